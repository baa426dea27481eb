//! `opo sweep`: the pump-isolated Cauchy-Schwarz test along one parameter axis.

use clap::{Args, ValueEnum};

use opo_core::analytic::cs_sides_analytic;
use opo_core::criteria::{cs_test, Partition, Verdict};
use opo_core::ensemble::run_ensemble;
use opo_core::{Error, ModelParams};

use crate::config::{near_threshold_warning, RunSpec, SpecArgs};
use crate::output::{num, write_csv};
use crate::Failure;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_HEADER: &[&str] =
    &["mode", "mu", "gamma_r", "g", "lhs", "rhs", "ratio", "significance", "verdict"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(alias = "gamma_r")]
    GammaR,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    Mc,
    Both,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Parameter varied along the sweep.
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated axis values; duplicates are dropped with a warning.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    pub mode: Mode,
}

/// Parses the axis list, keeping the first occurrence of every value.
pub fn parse_axis(raw: &str) -> Result<Vec<f64>, Failure> {
    let mut out: Vec<f64> = Vec::new();
    for token in raw.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let v: f64 = token.parse().map_err(|_| Failure::Input(format!("invalid sweep value '{token}'")))?;
        if out.contains(&v) {
            log::warn!("duplicate sweep value {v} dropped");
        } else {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Failure::Input("empty sweep axis".into()));
    }
    Ok(out)
}

fn params_at(base: &ModelParams, axis: Axis, v: f64) -> Result<ModelParams, Failure> {
    let p = match axis {
        Axis::GammaR => ModelParams::new(base.mu(), v, base.g()),
        Axis::Mu => ModelParams::new(v, base.gamma_r(), base.g()),
    }?;
    p.require_below_threshold()?;
    Ok(p)
}

fn row(
    mode: &str,
    p: &ModelParams,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    significance: f64,
    verdict: &str,
) -> Vec<String> {
    vec![
        mode.to_string(),
        num(p.mu()),
        num(p.gamma_r()),
        num(p.g()),
        num(lhs),
        num(rhs),
        num(ratio),
        num(significance),
        verdict.to_string(),
    ]
}

fn no_signal_row(mode: &str, p: &ModelParams) -> Vec<String> {
    row(mode, p, 0.0, 0.0, f64::NAN, f64::NAN, "no_signal")
}

/// Exact sides, so the significance is infinite unless they coincide.
fn analytic_row(p: &ModelParams, k: f64) -> Result<Vec<String>, Failure> {
    let sides = cs_sides_analytic(p)?;
    let Some(ratio) = sides.ratio else {
        return Ok(no_signal_row("analytic", p));
    };
    let diff = sides.rhs - sides.lhs;
    let significance = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
    let verdict = Verdict::from_significance(significance, k);
    Ok(row("analytic", p, sides.lhs, sides.rhs, ratio, significance, verdict.name()))
}

/// Monte Carlo sides converted to the quadrature normalization of the
/// analytic rows (amplitude form times `128 g^6 gamma_r`).
fn mc_row(spec: &RunSpec) -> Result<(Vec<String>, bool), Failure> {
    let p = &spec.params;
    spec.config.validate(p)?;
    let result = run_ensemble(p, &spec.config)?;
    let report = result.accumulator.finalize()?;
    let row = match cs_test(&report, Partition::PumpIsolated, spec.sigma_threshold) {
        Ok(c) => {
            let scale = 128.0 * p.g().powi(6) * p.gamma_r();
            row("mc", p, c.lhs.value * scale, c.rhs.value * scale, c.ratio, c.significance, c.verdict.name())
        }
        Err(Error::NoSignal) => no_signal_row("mc", p),
        Err(e) => return Err(e.into()),
    };
    if !result.is_reliable() {
        log::warn!("mu = {}, gamma_r = {}: {} trajectories diverged", p.mu(), p.gamma_r(), result.n_diverged);
    }
    Ok((row, result.is_reliable()))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let values = parse_axis(&args.values)?;
    let base = RunSpec::resolve_unchecked(&args.spec)?;
    let points: Vec<ModelParams> =
        values.iter().map(|&v| params_at(&base.params, args.axis, v)).collect::<Result<_, _>>()?;

    for w in points.iter().filter_map(near_threshold_warning) {
        log::warn!("{w}");
    }

    let mut rows = Vec::new();
    let mut unreliable = Vec::new();
    for p in &points {
        if matches!(args.mode, Mode::Analytic | Mode::Both) {
            rows.push(analytic_row(p, base.sigma_threshold)?);
        }
        if matches!(args.mode, Mode::Mc | Mode::Both) {
            let (r, reliable) = mc_row(&base.at(*p, &args.spec)?)?;
            rows.push(r);
            if !reliable {
                unreliable.push(format!("mu = {}, gamma_r = {}", p.mu(), p.gamma_r()));
            }
        }
    }
    let path = write_csv(&base.out_dir, SWEEP_FILE, SWEEP_HEADER, &rows)?;

    println!("{:<9}{:>8}{:>10}{:>12}  verdict", "mode", "mu", "gamma_r", "ratio");
    for r in &rows {
        let ratio: f64 = r[6].parse().unwrap_or(f64::NAN);
        let mu: f64 = r[1].parse().unwrap_or(f64::NAN);
        let gr: f64 = r[2].parse().unwrap_or(f64::NAN);
        println!("{:<9}{:>8}{:>10}{:>12.4}  {}", r[0], mu, gr, ratio, r[8]);
    }
    println!("wrote {}", path.display());

    if !unreliable.is_empty() {
        return Err(Failure::Unreliable(format!("divergent points: {}", unreliable.join("; "))));
    }
    Ok(())
}
