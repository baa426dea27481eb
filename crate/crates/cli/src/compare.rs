//! `opo compare`: Monte Carlo estimates of the perturbative moments against
//! their analytic values.

use opo_core::analytic::{analytic_report, linear_response, ou_covariances};
use opo_core::ensemble::run_ensemble;
use opo_core::moments::MIN_CONFIDENT_BATCHES;
use opo_core::Moment;

use crate::config::{near_threshold_warning, RunSpec, SpecArgs};
use crate::output::{num, write_csv};
use crate::Failure;

pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_HEADER: &[&str] = &[
    "moment",
    "mc",
    "mc_se",
    "analytic",
    "pull",
    "rel_dev",
    "linear_response",
    "low_confidence",
    "within_3sigma",
];

/// Compared moments, in table order.
pub const ROWS: [Moment; 8] =
    [Moment::T1, Moment::T2, Moment::T3, Moment::T4, Moment::Q4, Moment::VarX0, Moment::XXp, Moment::YYp];

const PULL_LIMIT: f64 = 3.0;

pub fn cmd_compare(args: &SpecArgs) -> Result<(), Failure> {
    let spec = RunSpec::resolve(args)?;
    let p = &spec.params;
    let mut warnings: Vec<String> = near_threshold_warning(p).into_iter().collect();

    let analytic = analytic_report(p)?;
    let lr = linear_response(p)?;
    let ou = ou_covariances(p)?;
    let result = run_ensemble(p, &spec.config)?;
    let report = result.accumulator.finalize()?;
    let low_confidence = report.n_batches < MIN_CONFIDENT_BATCHES;
    if low_confidence {
        warnings.push(format!(
            "low confidence: {} batches (fewer than {MIN_CONFIDENT_BATCHES}); increase n_trajectories or n_samples_per_traj",
            report.n_batches
        ));
    }

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    println!(
        "{:<7}{:>14}{:>12}{:>14}{:>9}{:>10}{:>14}",
        "moment", "mc", "mc_se", "analytic", "pull", "rel_dev", "lin_response"
    );
    for m in ROWS {
        let mc = report.real(m)?;
        let exact = analytic.real(m)?.value;
        let linear = match m {
            Moment::T1 => lr.triples.t1,
            Moment::T2 => lr.triples.t2,
            Moment::T3 => lr.triples.t3,
            Moment::T4 => lr.triples.t4,
            Moment::Q4 => lr.q4,
            Moment::VarX0 => lr.vx0,
            Moment::XXp => ou.xx,
            _ => ou.yy,
        };
        let pull = (mc.value - exact) / mc.std_error;
        let rel_dev = (mc.value - exact) / exact.abs();
        let within = pull.abs() <= PULL_LIMIT;
        if !within {
            failed.push(m.name());
        }
        println!(
            "{:<7}{:>14.5e}{:>12.3e}{:>14.5e}{:>9.2}{:>10.3}{:>14.5e}{}",
            m.name(),
            mc.value,
            mc.std_error,
            exact,
            pull,
            rel_dev,
            linear,
            if low_confidence { "  (low confidence)" } else { "" }
        );
        rows.push(vec![
            m.name().to_string(),
            num(mc.value),
            num(mc.std_error),
            num(exact),
            num(pull),
            num(rel_dev),
            num(linear),
            low_confidence.to_string(),
            within.to_string(),
        ]);
    }
    let path = write_csv(&spec.out_dir, COMPARE_FILE, COMPARE_HEADER, &rows)?;

    if failed.is_empty() {
        println!("summary: PASS (all |pull| <= {PULL_LIMIT})");
    } else {
        println!("summary: FAIL (|pull| > {PULL_LIMIT}: {})", failed.join(", "));
    }
    for w in &warnings {
        log::warn!("{w}");
        println!("warning: {w}");
    }
    println!("wrote {}", path.display());

    if !result.is_reliable() {
        return Err(Failure::Unreliable(format!(
            "{} of {} trajectories diverged",
            result.n_diverged, result.n_trajectories
        )));
    }
    Ok(())
}
