//! End-to-end acceptance criteria. Each criterion prints one line,
//!
//! ```text
//! [criterion N] PASS|FAIL  summary
//! ```
//!
//! followed by indented detail rows. The process exits non-zero if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::Instant;

use opo_core::analytic::{
    cs_sides_analytic, linear_response, ou_covariances, second_moments, triple_correlations,
};
use opo_core::criteria::{cs_test, pair_audit, pump_odd_moment, Partition, Verdict};
use opo_core::ensemble::{run_ensemble, run_ensemble_sequential, EnsembleResult};
use opo_core::{ModelParams, Moment, MomentReport, SimConfig};

const K: f64 = 3.0;

/// 40-digit reference values (crates/core/tests/oracle/analytic_mp.py).
const RATIO_GR_100: f64 = 1.52303451151;
const RATIO_GR_0_01: f64 = 0.688804801482;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Self { pass, summary: summary.into(), details }
    }
}

fn simulate(
    mu: f64,
    gamma_r: f64,
    g: f64,
    n_traj: usize,
    n_samples: usize,
    seed: u64,
) -> (ModelParams, EnsembleResult, MomentReport) {
    let params = ModelParams::new(mu, gamma_r, g).unwrap();
    let config = SimConfig {
        n_trajectories: n_traj,
        n_samples_per_traj: n_samples,
        master_seed: seed,
        ..SimConfig::recommended(&params)
    };
    let result = run_ensemble(&params, &config).unwrap();
    let report = result.accumulator.finalize().unwrap();
    (params, result, report)
}

/// The shared dataset: mu = 0.5, gamma_r = 1, g = 0.05, 102 400 samples.
struct Reference {
    params: ModelParams,
    result: EnsembleResult,
    report: MomentReport,
}

fn reference() -> Reference {
    let (params, result, report) = simulate(0.5, 1.0, 0.05, 64, 1600, 2024);
    Reference { params, result, report }
}

fn criterion_1() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (gr, oracle, expect) in [(100.0, RATIO_GR_100, true), (0.01, RATIO_GR_0_01, false)] {
        let p = ModelParams::new(0.7, gr, 0.0071).unwrap();
        let cs = cs_sides_analytic(&p).unwrap();
        let ratio = cs.ratio.unwrap();
        let rel = (ratio - oracle).abs() / oracle;
        let ok = rel <= 0.01 && cs.violated() == Some(expect);
        pass &= ok;
        details.push(format!(
            "gamma_r = {gr:<6} ratio {ratio:.6} (reference {oracle:.6}, rel {rel:.1e}) -> {}",
            if expect { "violated" } else { "satisfied" }
        ));
    }
    Outcome::new(pass, "analytic Cauchy-Schwarz verdicts at mu = 0.7", details)
}

fn criterion_2(reference: &Reference) -> Outcome {
    let p = &reference.params;
    let t = triple_correlations(p).unwrap();
    let s = second_moments(p).unwrap();
    let ou = ou_covariances(p).unwrap();
    let lr = linear_response(p).unwrap();
    let rows = [
        (Moment::T1, t.t1, lr.triples.t1),
        (Moment::T2, t.t2, lr.triples.t2),
        (Moment::T3, t.t3, lr.triples.t3),
        (Moment::T4, t.t4, lr.triples.t4),
        (Moment::Q4, s.q4, lr.q4),
        (Moment::VarX0, s.vx0, lr.vx0),
        (Moment::XXp, ou.xx, ou.xx),
        (Moment::YYp, ou.yy, ou.yy),
    ];
    let mut details = vec![format!(
        "{} samples in {} batches; columns: MC +- se | closed form | pull | rel | leading-order response",
        reference.report.n_samples, reference.report.n_batches
    )];
    let mut failed = Vec::new();
    for (m, analytic, response) in rows {
        let e = reference.report.real(m).unwrap();
        let pull = (e.value - analytic) / e.std_error;
        let rel = (e.value - analytic) / analytic;
        let ok = pull.abs() <= K && rel.abs() <= 0.2;
        if !ok {
            failed.push(m.name());
        }
        details.push(format!(
            "{:<7} {:+.4e} +- {:.1e} | {:+.4e} | {:+8.1} | {:+6.1}% | {:+.4e}  {}",
            m.name(),
            e.value,
            e.std_error,
            analytic,
            pull,
            100.0 * rel,
            response,
            if ok { "ok" } else { "MISMATCH" }
        ));
    }
    let summary = if failed.is_empty() {
        "Monte Carlo matches every closed-form moment".to_string()
    } else {
        format!(
            "Monte Carlo vs closed form: {} of 8 rows outside 3 sigma / 20% ({})",
            failed.len(),
            failed.join(", ")
        )
    };
    Outcome::new(failed.is_empty(), summary, details)
}

fn criterion_3() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (gr, expect, seed) in [(100.0, Verdict::Violated, 31), (0.01, Verdict::Satisfied, 32)] {
        let params = ModelParams::new(0.7, gr, 0.05).unwrap();
        let config = SimConfig { master_seed: seed, ..SimConfig::recommended(&params) };
        let result = run_ensemble(&params, &config).unwrap();
        let report = result.accumulator.finalize().unwrap();
        let cs = cs_test(&report, Partition::PumpIsolated, K).unwrap();
        let ok = cs.verdict == expect && cs.significance.abs() >= K && result.is_reliable();
        pass &= ok;
        details.push(format!(
            "gamma_r = {gr:<6} {} scheme, dt {}, {} samples: lhs {:.4e} rhs {:.4e} ratio {:.3} at {:+.1} sigma -> {}",
            config.scheme.name(),
            config.dt,
            report.n_samples,
            cs.lhs.value,
            cs.rhs.value,
            cs.ratio,
            cs.significance,
            cs.verdict.name()
        ));
        if let Some(q) = cs.rhs_from_triples {
            details.push(format!(
                "               rhs from quadrature triples s^2/(128 g^6 gamma_r) = {:.4e} +- {:.1e}",
                q.value, q.std_error
            ));
        }
    }
    Outcome::new(pass, "simulated Cauchy-Schwarz verdicts at mu = 0.7, g = 0.05", details)
}

fn criterion_4(reference: &Reference) -> Outcome {
    let mut details = Vec::new();
    let mut analytic_ok = true;
    let p1 = ModelParams::new(0.7, 100.0, 0.05).unwrap();
    let p2 = p1.with_g(0.1).unwrap();
    let (t1, t2) = (triple_correlations(&p1).unwrap(), triple_correlations(&p2).unwrap());
    let (s1, s2) = (second_moments(&p1).unwrap(), second_moments(&p2).unwrap());
    let mut worst: f64 = 0.0;
    for (a, b) in
        [(t1.t1, t2.t1), (t1.t2, t2.t2), (t1.t3, t2.t3), (t1.t4, t2.t4), (s1.q4, s2.q4), (s1.vx0, s2.vx0)]
    {
        let dev = (b / a - 16.0).abs() / 16.0;
        worst = worst.max(dev);
        analytic_ok &= dev < 1e-12;
    }
    details.push(format!("analytic t1..t4, q4, vx0: largest relative deviation from 16 = {worst:.1e}"));

    let (_, _, coarse) = simulate(0.5, 1.0, 0.1, 64, 1600, 4040);
    let small = reference.report.real(Moment::T1).unwrap();
    let large = coarse.real(Moment::T1).unwrap();
    let ratio = large.value / small.value;
    let se = ratio.abs()
        * ((large.std_error / large.value).powi(2) + (small.std_error / small.value).powi(2)).sqrt();
    let pull = (ratio - 16.0) / se;
    let mc_ok = pull.abs() <= K;
    details.push(format!(
        "MC t1(g = 0.05) = {:.4e} +- {:.1e}, t1(g = 0.1) = {:.4e} +- {:.1e}",
        small.value, small.std_error, large.value, large.std_error
    ));
    details.push(format!("MC ratio {ratio:.3} +- {se:.3} ({pull:+.1} sigma from 16)"));
    let lr = |g| linear_response(&ModelParams::new(0.5, 1.0, g).unwrap()).unwrap().triples.t1;
    details.push(format!(
        "MC / leading order: {:.3} at g = 0.05, {:.3} at g = 0.1",
        small.value / lr(0.05),
        large.value / lr(0.1)
    ));
    let summary = format!(
        "g^4 scaling: analytic {}, Monte Carlo t1 ratio {ratio:.2} ({pull:+.1} sigma from 16)",
        if analytic_ok { "exact" } else { "broken" }
    );
    Outcome::new(analytic_ok && mc_ok, summary, details)
}

fn criterion_5(reference: &Reference) -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (i, mu) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let report = if mu == 0.5 {
            reference.report.clone()
        } else {
            simulate(mu, 1.0, 0.05, 64, 1600, 5050 + i as u64).2
        };
        let e = report.real(Moment::MeanX0).unwrap();
        let target = 2.0 * mu;
        let pull = (e.value - target) / e.std_error;
        let rel = (e.value - target) / target;
        let ok = pull.abs() <= K && rel.abs() <= 0.01;
        pass &= ok;
        let depleted = linear_response(&ModelParams::new(mu, 1.0, 0.05).unwrap()).unwrap().mean_x0;
        details.push(format!(
            "mu = {mu}: <x0> = {:.6} +- {:.1e}, 2 mu = {target}, rel {:+.3}%, pull {pull:+.1}; depletion-corrected target {depleted:.6}, pull {:+.1}  {}",
            e.value,
            e.std_error,
            100.0 * rel,
            (e.value - depleted) / e.std_error,
            if ok { "ok" } else { "MISMATCH" }
        ));
    }
    Outcome::new(pass, "mean pump quadrature <x0> against 2 mu (3 sigma and 1%)", details)
}

fn criterion_6(reference: &Reference) -> Outcome {
    let audit = pair_audit(&reference.report, K).unwrap();
    let details = audit
        .entries
        .iter()
        .map(|e| {
            format!(
                "{:<5} {:+.3e} +- {:.1e} ({:+.2} sigma)",
                e.name, e.estimate.value, e.estimate.std_error, e.significance
            )
        })
        .collect();
    Outcome::new(audit.pairs_vanish, audit.message.clone(), details)
}

fn criterion_7(reference: &Reference) -> Outcome {
    let odd = pump_odd_moment(&reference.report, K).unwrap();
    let (_, _, control) = simulate(0.0, 1.0, 0.05, 64, 200, 7070);
    let null = pump_odd_moment(&control, K).unwrap();
    let details = vec![
        format!(
            "mu = 0.5: <dx0^3> = {:+.4e} +- {:.1e} ({:+.1} sigma) -> {}",
            odd.third_moment.value, odd.third_moment.std_error, odd.significance, odd.message
        ),
        format!(
            "mu = 0 control: <dx0^3> = {:+.4e} +- {:.1e} -> {}",
            null.third_moment.value, null.third_moment.std_error, null.message
        ),
    ];
    Outcome::new(odd.non_gaussian && !null.non_gaussian, "pump non-Gaussianity with vacuum control", details)
}

fn criterion_8(reference: &Reference) -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    let mut record = |name: &str, result: Result<String, String>| {
        let ok = result.is_ok();
        pass &= ok;
        let text = result.unwrap_or_else(|e| e);
        details.push(format!("{:<34} {}  {text}", name, if ok { "ok  " } else { "FAIL" }));
    };

    record(
        "noise moments (1e6 draws)",
        common::noise_moment_check(1_000_000, 0.01, 99, 4.0).map(|w| format!("largest pull {w:.2}")),
    );
    record(
        "accumulator merge laws",
        (0..20)
            .try_for_each(|seed| common::merge_law_check(seed, 200, 1e-12))
            .map(|_| "20 random three-way splits".into()),
    );
    let gap = common::mapping_identity_gap(&reference.report, reference.params.g());
    record(
        "quadrature/amplitude identity",
        if gap < 1e-10 {
            Ok(format!("relative gap {gap:.1e}"))
        } else {
            Err(format!("relative gap {gap:.1e}"))
        },
    );
    record(
        "classical Cauchy-Schwarz (10 sets)",
        common::classical_cs_check(10, 4000).map(|w| format!("largest ratio {w:.3}")),
    );
    let orders = common::weak_order_default();
    let weak =
        orders.iter().map(|(name, order, _, _)| format!("{name} {order:.3}")).collect::<Vec<_>>().join(", ");
    record(
        "weak order ~ 1",
        if orders.iter().all(|o| (o.1 - 1.0).abs() < 0.3) { Ok(weak) } else { Err(weak) },
    );
    let params = ModelParams::new(0.6, 3.0, 0.1).unwrap();
    let config = SimConfig {
        n_trajectories: 24,
        n_samples_per_traj: 40,
        master_seed: 8,
        ..SimConfig::recommended(&params)
    };
    let in_pool = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| run_ensemble(&params, &config).unwrap())
    };
    let (one, four) = (in_pool(1), in_pool(4));
    let sequential = run_ensemble_sequential(&params, &config).unwrap();
    record(
        "determinism across worker counts",
        if one == four && one == sequential {
            Ok("1 and 4 workers and the sequential path are bit-identical".into())
        } else {
            Err("results differ between worker counts".into())
        },
    );
    Outcome::new(pass, "property suites", details)
}

fn main() {
    let start = Instant::now();
    let reference = reference();
    println!(
        "reference dataset: mu = 0.5, gamma_r = 1, g = 0.05, {} samples, {} diverged trajectories ({:.1} s)\n",
        reference.report.n_samples,
        reference.result.n_diverged,
        start.elapsed().as_secs_f64()
    );

    let criteria: [(u32, &dyn Fn() -> Outcome); 8] = [
        (1, &criterion_1),
        (2, &|| criterion_2(&reference)),
        (3, &criterion_3),
        (4, &|| criterion_4(&reference)),
        (5, &|| criterion_5(&reference)),
        (6, &|| criterion_6(&reference)),
        (7, &|| criterion_7(&reference)),
        (8, &|| criterion_8(&reference)),
    ];
    let mut failed = Vec::new();
    for (n, run) in criteria {
        let t = Instant::now();
        let outcome = run();
        println!(
            "[criterion {n}] {}  {} ({:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.summary,
            t.elapsed().as_secs_f64()
        );
        for d in &outcome.details {
            println!("    {d}");
        }
        if !outcome.pass {
            failed.push(n);
        }
    }
    println!();
    if failed.is_empty() {
        println!("acceptance: all 8 criteria passed ({:.1} s)", start.elapsed().as_secs_f64());
    } else {
        println!(
            "acceptance: {} of 8 criteria failed: {:?} ({:.1} s)",
            failed.len(),
            failed,
            start.elapsed().as_secs_f64()
        );
        std::process::exit(1);
    }
}
