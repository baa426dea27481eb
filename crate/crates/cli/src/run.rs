//! `opo run`: one Monte Carlo run with a JSON report and running-average curves.

use std::time::Instant;

use serde::Serialize;

use opo_core::analytic::{
    cs_sides_analytic, linear_response, ou_covariances, second_moments, triple_correlations, zeroth_order,
    CsSides, LinearCovariances, LinearResponse, SecondMoments, TripleCorrelations, ZerothOrder,
};
use opo_core::criteria::{
    cs_test, cs_tests, pair_audit, pump_odd_moment, separability_witness, triples_from_report,
    CriterionReport, OddMomentReport, PairAudit, Partition, WitnessReport,
};
use opo_core::ensemble::{run_ensemble_segmented, DivergenceSummary};
use opo_core::moments::MIN_CONFIDENT_BATCHES;
use opo_core::{ModelParams, MomentReport, SimConfig};

use crate::config::{near_threshold_warning, RunSpec, SpecArgs};
use crate::output::{num, write_csv, write_json};
use crate::Failure;

pub const REPORT_FILE: &str = "report.json";
pub const RUNNING_FILE: &str = "running_cs.csv";
pub const RUNNING_HEADER: &[&str] = &[
    "tau",
    "samples_per_traj",
    "n_samples",
    "lhs",
    "lhs_se",
    "rhs",
    "rhs_se",
    "ratio",
    "significance",
    "verdict",
];

/// Number of points on the running-average curve.
const CHECKPOINTS: usize = 50;

#[derive(Debug, Serialize)]
pub struct ParamsOut {
    pub mu: f64,
    pub gamma_r: f64,
    pub g: f64,
    pub eps: f64,
}

impl From<&ModelParams> for ParamsOut {
    fn from(p: &ModelParams) -> Self {
        Self { mu: p.mu(), gamma_r: p.gamma_r(), g: p.g(), eps: p.eps() }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalyticOut {
    pub zeroth_order: ZerothOrder,
    pub triples: TripleCorrelations,
    pub second_moments: SecondMoments,
    pub cs_sides: CsSides,
    pub linear_covariances: LinearCovariances,
    /// Depletion-consistent linear-response forms, for diagnostics.
    pub linear_response: LinearResponse,
}

impl AnalyticOut {
    pub fn new(params: &ModelParams) -> Result<Self, Failure> {
        Ok(Self {
            zeroth_order: zeroth_order(params)?,
            triples: triple_correlations(params)?,
            second_moments: second_moments(params)?,
            cs_sides: cs_sides_analytic(params)?,
            linear_covariances: ou_covariances(params)?,
            linear_response: linear_response(params)?,
        })
    }
}

#[derive(Debug, Serialize)]
struct CriteriaOut {
    cauchy_schwarz: Vec<CriterionReport>,
    separability: Option<WitnessReport>,
    pair_audit: Option<PairAudit>,
    pump_odd_moment: Option<OddMomentReport>,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    code_version: &'static str,
    params: ParamsOut,
    config: &'a SimConfig,
    seed: u64,
    sigma_threshold: f64,
    /// Verdict of the pump-isolated Cauchy-Schwarz test, or `no_signal`.
    verdict: &'static str,
    wall_clock_seconds: f64,
    divergence: DivergenceSummary,
    moments: Option<&'a MomentReport>,
    criteria: Option<CriteriaOut>,
    analytic: AnalyticOut,
    notes: Vec<String>,
}

fn criterion_row(tau: f64, samples_per_traj: usize, report: &MomentReport, k: f64) -> Vec<String> {
    let head = vec![num(tau), samples_per_traj.to_string(), report.n_samples.to_string()];
    let tail = match cs_test(report, Partition::PumpIsolated, k) {
        Ok(c) => vec![
            num(c.lhs.value),
            num(c.lhs.std_error),
            num(c.rhs.value),
            num(c.rhs.std_error),
            num(c.ratio),
            num(c.significance),
            c.verdict.name().to_string(),
        ],
        Err(_) => {
            let mut v = vec!["nan".to_string(); 6];
            v.push("no_signal".into());
            v
        }
    };
    head.into_iter().chain(tail).collect()
}

fn criteria_of(report: &MomentReport, k: f64, notes: &mut Vec<String>) -> Result<CriteriaOut, Failure> {
    let cauchy_schwarz = cs_tests(report, k);
    if cauchy_schwarz.is_empty() {
        notes.push("no Cauchy-Schwarz test: both sides vanish".to_string());
    }
    let separability = match triples_from_report(report) {
        Ok((t, se)) => Some(separability_witness(&t, Some(&se), k)?),
        Err(e) => {
            notes.push(format!("no separability witness: {e}"));
            None
        }
    };
    if report.n_batches < MIN_CONFIDENT_BATCHES {
        notes.push(format!("low confidence: only {} batches", report.n_batches));
    }
    Ok(CriteriaOut {
        cauchy_schwarz,
        separability,
        pair_audit: pair_audit(report, k).ok(),
        pump_odd_moment: pump_odd_moment(report, k).ok(),
    })
}

pub fn cmd_run(args: &SpecArgs) -> Result<(), Failure> {
    let spec = RunSpec::resolve(args)?;
    let (params, config, k) = (spec.params, spec.config, spec.sigma_threshold);
    let started = Instant::now();
    let result = run_ensemble_segmented(&params, &config, CHECKPOINTS)?;
    let divergence = result.divergence();
    // an unreliable run still gets a report, even when nothing survived
    let report = match result.accumulator.finalize() {
        Ok(r) => Some(r),
        Err(_) if !divergence.reliable => None,
        Err(e) => return Err(e.into()),
    };
    let wall_clock_seconds = started.elapsed().as_secs_f64();

    let mut notes: Vec<String> = near_threshold_warning(&params).into_iter().collect();
    for n in &notes {
        log::warn!("{n}");
    }
    let criteria = match &report {
        Some(r) => Some(criteria_of(r, k, &mut notes)?),
        None => {
            notes.push("no moments: every trajectory diverged".to_string());
            None
        }
    };
    let verdict = criteria
        .iter()
        .flat_map(|c| &c.cauchy_schwarz)
        .find(|c| c.partition == Partition::PumpIsolated)
        .map_or("no_signal", |c| c.verdict.name());

    let rows: Vec<Vec<String>> = result
        .cumulative()
        .into_iter()
        .filter_map(|(tau, spt, acc)| acc.finalize().ok().map(|r| criterion_row(tau, spt, &r, k)))
        .collect();
    let csv = write_csv(&spec.out_dir, RUNNING_FILE, RUNNING_HEADER, &rows)?;

    let out = RunReport {
        code_version: env!("CARGO_PKG_VERSION"),
        params: ParamsOut::from(&params),
        config: &config,
        seed: config.master_seed,
        sigma_threshold: k,
        verdict,
        wall_clock_seconds,
        divergence,
        moments: report.as_ref(),
        criteria,
        analytic: AnalyticOut::new(&params)?,
        notes,
    };
    let json = write_json(&spec.out_dir, REPORT_FILE, &out)?;

    if let Some(c) = &out.criteria {
        for t in &c.cauchy_schwarz {
            println!(
                "{:<8} ratio {:.4}  significance {:+.2}  {}",
                t.partition.name(),
                t.ratio,
                t.significance,
                t.verdict.name()
            );
        }
        if let Some(w) = &c.separability {
            println!("witness  {}", w.message);
        }
    }
    println!("wrote {} and {}", json.display(), csv.display());

    if !divergence.reliable {
        return Err(Failure::Unreliable(format!(
            "{} of {} trajectories diverged; report written to {}",
            divergence.n_diverged,
            divergence.n_trajectories,
            json.display()
        )));
    }
    Ok(())
}
