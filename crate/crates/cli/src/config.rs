//! Run specification: built-in defaults, overlaid by an optional `key = value`
//! config file, overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use opo_core::sde::Scheme;
use opo_core::{ModelParams, SimConfig};

use crate::Failure;

pub const DEFAULT_MU: f64 = 0.5;
pub const DEFAULT_GAMMA_R: f64 = 1.0;
pub const DEFAULT_G: f64 = 0.05;
pub const DEFAULT_SIGMA_THRESHOLD: f64 = 3.0;
pub const DEFAULT_OUT_DIR: &str = "out";

/// Weak-coupling reference point selected by `--reference-params`.
pub const REFERENCE_MU: f64 = 0.7;
pub const REFERENCE_G: f64 = 0.0071;

/// Every key accepted in a config file.
pub const KEYS: &[&str] = &[
    "mu",
    "gamma_r",
    "g",
    "dt",
    "burn_in",
    "sample_interval",
    "n_samples_per_traj",
    "n_trajectories",
    "master_seed",
    "divergence_threshold",
    "sigma_threshold",
    "out_dir",
    "scheme",
];

/// Flags shared by every subcommand. Each one overrides the key of the same
/// name in the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SpecArgs {
    /// Plain-text `key = value` config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Use mu = 0.7 and g = 0.0071 unless given explicitly.
    #[arg(long)]
    pub reference_params: bool,
    /// Pump parameter E / E_threshold, in [0, 1).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Pump-to-signal damping ratio.
    #[arg(long)]
    pub gamma_r: Option<f64>,
    /// Nonlinearity scale.
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
    #[arg(long)]
    pub n_samples_per_traj: Option<usize>,
    #[arg(long)]
    pub n_trajectories: Option<usize>,
    #[arg(long, alias = "seed")]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub divergence_threshold: Option<f64>,
    /// Verdict threshold in standard errors.
    #[arg(long)]
    pub sigma_threshold: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// auto, euler_maruyama or exponential_euler.
    #[arg(long)]
    pub scheme: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SchemeChoice {
    Auto,
    Fixed(Scheme),
}

impl SchemeChoice {
    fn parse(s: &str) -> Option<Self> {
        if s == "auto" {
            Some(SchemeChoice::Auto)
        } else {
            Scheme::from_name(s).map(SchemeChoice::Fixed)
        }
    }
}

/// One layer of settings; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq)]
struct Settings {
    mu: Option<f64>,
    gamma_r: Option<f64>,
    g: Option<f64>,
    dt: Option<f64>,
    burn_in: Option<f64>,
    sample_interval: Option<f64>,
    n_samples_per_traj: Option<usize>,
    n_trajectories: Option<usize>,
    master_seed: Option<u64>,
    divergence_threshold: Option<f64>,
    sigma_threshold: Option<f64>,
    out_dir: Option<PathBuf>,
    scheme: Option<SchemeChoice>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value '{value}' for key '{key}'"))
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "mu" => self.mu = Some(parse_value(key, value)?),
            "gamma_r" => self.gamma_r = Some(parse_value(key, value)?),
            "g" => self.g = Some(parse_value(key, value)?),
            "dt" => self.dt = Some(parse_value(key, value)?),
            "burn_in" => self.burn_in = Some(parse_value(key, value)?),
            "sample_interval" => self.sample_interval = Some(parse_value(key, value)?),
            "n_samples_per_traj" => self.n_samples_per_traj = Some(parse_value(key, value)?),
            "n_trajectories" => self.n_trajectories = Some(parse_value(key, value)?),
            "master_seed" => self.master_seed = Some(parse_value(key, value)?),
            "divergence_threshold" => self.divergence_threshold = Some(parse_value(key, value)?),
            "sigma_threshold" => self.sigma_threshold = Some(parse_value(key, value)?),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "scheme" => {
                self.scheme =
                    Some(SchemeChoice::parse(value).ok_or_else(|| format!("unknown scheme '{value}'"))?)
            }
            _ => return Err(format!("unknown config key '{key}' (accepted: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    fn parse(text: &str) -> Result<Self, String> {
        let mut out = Settings::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {lineno}: expected 'key = value', got '{line}'"))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(format!("line {lineno}: duplicate key '{key}'"));
            }
            out.set(key, value).map_err(|e| format!("line {lineno}: {e}"))?;
            seen.push(key);
        }
        Ok(out)
    }

    fn from_args(args: &SpecArgs) -> Result<Self, String> {
        let scheme = match &args.scheme {
            None => None,
            Some(s) => Some(SchemeChoice::parse(s).ok_or_else(|| format!("unknown scheme '{s}'"))?),
        };
        Ok(Settings {
            mu: args.mu,
            gamma_r: args.gamma_r,
            g: args.g,
            dt: args.dt,
            burn_in: args.burn_in,
            sample_interval: args.sample_interval,
            n_samples_per_traj: args.n_samples_per_traj,
            n_trajectories: args.n_trajectories,
            master_seed: args.master_seed,
            divergence_threshold: args.divergence_threshold,
            sigma_threshold: args.sigma_threshold,
            out_dir: args.out_dir.clone(),
            scheme,
        })
    }

    fn reference_preset() -> Self {
        Settings { mu: Some(REFERENCE_MU), g: Some(REFERENCE_G), ..Default::default() }
    }

    /// Field-wise override: values set in `top` win.
    fn overlay(self, top: Settings) -> Settings {
        Settings {
            mu: top.mu.or(self.mu),
            gamma_r: top.gamma_r.or(self.gamma_r),
            g: top.g.or(self.g),
            dt: top.dt.or(self.dt),
            burn_in: top.burn_in.or(self.burn_in),
            sample_interval: top.sample_interval.or(self.sample_interval),
            n_samples_per_traj: top.n_samples_per_traj.or(self.n_samples_per_traj),
            n_trajectories: top.n_trajectories.or(self.n_trajectories),
            master_seed: top.master_seed.or(self.master_seed),
            divergence_threshold: top.divergence_threshold.or(self.divergence_threshold),
            sigma_threshold: top.sigma_threshold.or(self.sigma_threshold),
            out_dir: top.out_dir.or(self.out_dir),
            scheme: top.scheme.or(self.scheme),
        }
    }
}

/// Fully resolved inputs of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub params: ModelParams,
    pub config: SimConfig,
    pub sigma_threshold: f64,
    pub out_dir: PathBuf,
}

impl RunSpec {
    /// Resolves the layers without checking the simulation bounds, so that
    /// analytic-only commands can use parameters the integrator would reject.
    pub fn resolve_unchecked(args: &SpecArgs) -> Result<Self, Failure> {
        let mut layered = Settings::default();
        if let Some(path) = &args.config {
            layered = layered.overlay(read_config(path)?);
        }
        if args.reference_params {
            layered = layered.overlay(Settings::reference_preset());
        }
        let s = layered.overlay(Settings::from_args(args).map_err(Failure::Input)?);

        let params = ModelParams::new(
            s.mu.unwrap_or(DEFAULT_MU),
            s.gamma_r.unwrap_or(DEFAULT_GAMMA_R),
            s.g.unwrap_or(DEFAULT_G),
        )?;
        let scheme = match s.scheme.unwrap_or(SchemeChoice::Auto) {
            SchemeChoice::Auto => Scheme::auto(&params),
            SchemeChoice::Fixed(scheme) => scheme,
        };
        let base = SimConfig::recommended_for(&params, scheme);
        let config = SimConfig {
            dt: s.dt.unwrap_or(base.dt),
            burn_in: s.burn_in.unwrap_or(base.burn_in),
            sample_interval: s.sample_interval.unwrap_or(base.sample_interval),
            n_samples_per_traj: s.n_samples_per_traj.unwrap_or(base.n_samples_per_traj),
            n_trajectories: s.n_trajectories.unwrap_or(base.n_trajectories),
            master_seed: s.master_seed.unwrap_or(base.master_seed),
            divergence_threshold: s.divergence_threshold.unwrap_or(base.divergence_threshold),
            scheme,
        };
        let sigma_threshold = s.sigma_threshold.unwrap_or(DEFAULT_SIGMA_THRESHOLD);
        if !(sigma_threshold.is_finite() && sigma_threshold > 0.0) {
            return Err(Failure::Input(format!("sigma_threshold must be > 0, got {sigma_threshold}")));
        }
        Ok(RunSpec {
            params,
            config,
            sigma_threshold,
            out_dir: s.out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        })
    }

    /// Resolves and validates for a Monte Carlo run.
    pub fn resolve(args: &SpecArgs) -> Result<Self, Failure> {
        let spec = Self::resolve_unchecked(args)?;
        spec.config.validate(&spec.params)?;
        Ok(spec)
    }

    /// Same spec at different model parameters, with the timing defaults
    /// recomputed unless they were set explicitly.
    pub fn at(&self, params: ModelParams, args: &SpecArgs) -> Result<Self, Failure> {
        let mut moved = args.clone();
        moved.mu = Some(params.mu());
        moved.gamma_r = Some(params.gamma_r());
        moved.g = Some(params.g());
        Self::resolve_unchecked(&moved)
    }
}

/// The perturbative predictions lose accuracy close to threshold; logged
/// once per command (the per-call warning of the analytic module is muted).
pub fn near_threshold_warning(params: &ModelParams) -> Option<String> {
    (params.mu() > opo_core::analytic::NEAR_THRESHOLD_MU)
        .then(|| format!("near-threshold: perturbative oracle unreliable (mu = {})", params.mu()))
}

fn read_config(path: &Path) -> Result<Settings, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
    Settings::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}
