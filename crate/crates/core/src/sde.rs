//! Positive-P trajectories of the full nonlinear Ito equations.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    alpha_to_quadratures, drift_and_diffusion, ModelParams, PhaseSpaceState, QuadratureSample,
};
use crate::noise::{sample_wiener_increments, trajectory_stream, NoiseIncrement};

/// Upper bound on `dt * max(1, gamma_r)` for plain Euler-Maruyama.
pub const MAX_SCALED_DT: f64 = 0.05;

const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Plain Euler-Maruyama on all six amplitudes.
    EulerMaruyama,
    /// The linear pump relaxation is integrated exactly over each step; the
    /// nonlinear pump term and the downconverted modes use Euler-Maruyama.
    ExponentialEuler,
}

impl Scheme {
    /// Exponential Euler once the pump is stiffer than the signal.
    pub fn auto(params: &ModelParams) -> Self {
        if params.gamma_r() > 1.0 {
            Scheme::ExponentialEuler
        } else {
            Scheme::EulerMaruyama
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::ExponentialEuler => "exponential_euler",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "euler_maruyama" | "euler-maruyama" | "em" => Some(Scheme::EulerMaruyama),
            "exponential_euler" | "exponential-euler" | "exp" => Some(Scheme::ExponentialEuler),
            _ => None,
        }
    }

    /// Largest admissible step. Euler-Maruyama must resolve the pump decay;
    /// the exponential scheme only has to resolve the unit-rate modes.
    pub fn max_dt(self, params: &ModelParams) -> f64 {
        match self {
            Scheme::EulerMaruyama => MAX_SCALED_DT / params.gamma_r().max(1.0),
            Scheme::ExponentialEuler => MAX_SCALED_DT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub burn_in: f64,
    pub sample_interval: f64,
    pub n_samples_per_traj: usize,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub divergence_threshold: f64,
    pub scheme: Scheme,
}

impl SimConfig {
    /// Defaults scaled to the slowest relaxation rate `min(1 - mu, gamma_r)`,
    /// with the scheme picked by [`Scheme::auto`].
    pub fn recommended(params: &ModelParams) -> Self {
        Self::recommended_for(params, Scheme::auto(params))
    }

    pub fn recommended_for(params: &ModelParams, scheme: Scheme) -> Self {
        let dt = match scheme {
            Scheme::EulerMaruyama => 0.01 / params.gamma_r().max(1.0),
            Scheme::ExponentialEuler => 0.01,
        };
        let gap = (1.0 - params.mu()).max(f64::MIN_POSITIVE);
        Self {
            dt,
            burn_in: 20.0 / gap.min(params.gamma_r()),
            sample_interval: 2.0 / gap,
            n_samples_per_traj: 1600,
            n_trajectories: 64,
            master_seed: 0,
            divergence_threshold: 1e6,
            scheme,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.require_below_threshold()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        let max_dt = self.scheme.max_dt(params);
        if self.dt > max_dt * (1.0 + SLACK) {
            return bad(format!(
                "dt = {} exceeds the stability bound {} for {}",
                self.dt,
                max_dt,
                self.scheme.name()
            ));
        }
        let gap = 1.0 - params.mu();
        let min_burn = 10.0 / gap.min(params.gamma_r());
        if self.burn_in.is_nan() || self.burn_in < min_burn * (1.0 - SLACK) {
            return bad(format!("burn_in = {} is below 10/min(1-mu, gamma_r) = {min_burn}", self.burn_in));
        }
        let min_interval = 1.0 / gap;
        if self.sample_interval.is_nan() || self.sample_interval < min_interval * (1.0 - SLACK) {
            return bad(format!(
                "sample_interval = {} is below 1/(1-mu) = {min_interval}",
                self.sample_interval
            ));
        }
        if self.n_samples_per_traj == 0 || self.n_trajectories == 0 {
            return bad("sample and trajectory counts must be >= 1".into());
        }
        if self.divergence_threshold.is_nan() || self.divergence_threshold <= 0.0 {
            return bad(format!("divergence_threshold must be > 0, got {}", self.divergence_threshold));
        }
        Ok(())
    }

    pub fn burn_in_steps(&self) -> u64 {
        (self.burn_in / self.dt).ceil() as u64
    }

    pub fn steps_per_sample(&self) -> u64 {
        ((self.sample_interval / self.dt).round() as u64).max(1)
    }

    pub fn total_samples(&self) -> u64 {
        self.n_samples_per_traj as u64 * self.n_trajectories as u64
    }
}

/// One Euler-Maruyama step with explicitly supplied noise.
pub fn euler_maruyama_update(
    state: &PhaseSpaceState,
    params: &ModelParams,
    dt: f64,
    dw: &NoiseIncrement,
) -> PhaseSpaceState {
    let dd = drift_and_diffusion(state, params);
    let (d, [b, bp]) = (dd.drift, dd.noise_amp);
    PhaseSpaceState {
        a0: state.a0 + d.a0 * dt,
        a0p: state.a0p + d.a0p * dt,
        a1: state.a1 + d.a1 * dt + b * dw.dw1,
        a2: state.a2 + d.a2 * dt + b * dw.dw2,
        a1p: state.a1p + d.a1p * dt + bp * dw.dw1p,
        a2p: state.a2p + d.a2p * dt + bp * dw.dw2p,
    }
}

/// One exponential-Euler step with explicitly supplied noise.
pub fn exponential_euler_update(
    state: &PhaseSpaceState,
    params: &ModelParams,
    dt: f64,
    dw: &NoiseIncrement,
) -> PhaseSpaceState {
    Stepper::new(params, Scheme::ExponentialEuler, dt).update(state, dw)
}

/// Draws the noise and advances `state` by one Euler-Maruyama step.
pub fn step_euler_maruyama<R: Rng + ?Sized>(
    state: &PhaseSpaceState,
    params: &ModelParams,
    dt: f64,
    rng: &mut R,
) -> PhaseSpaceState {
    let dw = sample_wiener_increments(rng, dt);
    euler_maruyama_update(state, params, dt, &dw)
}

/// Step-size dependent constants of either scheme.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    params: ModelParams,
    scheme: Scheme,
    dt: f64,
    decay: f64,
    gain: f64,
}

impl Stepper {
    pub fn new(params: &ModelParams, scheme: Scheme, dt: f64) -> Self {
        let gr = params.gamma_r();
        let decay = (-gr * dt).exp();
        Self { params: *params, scheme, dt, decay, gain: -(-gr * dt).exp_m1() / gr }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn update(&self, state: &PhaseSpaceState, dw: &NoiseIncrement) -> PhaseSpaceState {
        match self.scheme {
            Scheme::EulerMaruyama => euler_maruyama_update(state, &self.params, self.dt, dw),
            Scheme::ExponentialEuler => {
                let p = &self.params;
                let (eps, pump) = (p.eps(), p.pump_amplitude());
                let mut next = euler_maruyama_update(state, p, self.dt, dw);
                next.a0 = pump + (state.a0 - pump) * self.decay - eps * state.a1 * state.a2 * self.gain;
                next.a0p = pump + (state.a0p - pump) * self.decay - eps * state.a1p * state.a2p * self.gain;
                next
            }
        }
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: &PhaseSpaceState, rng: &mut R) -> PhaseSpaceState {
        let dw = sample_wiener_increments(rng, self.dt);
        self.update(state, &dw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryResult {
    pub samples: Vec<QuadratureSample>,
    pub diverged: bool,
    /// Steps whose output was thrown away because the trajectory diverged.
    pub discarded_steps: u64,
}

/// Runs one trajectory from the deterministic fixed point.
pub fn simulate_trajectory(
    params: &ModelParams,
    config: &SimConfig,
    trajectory_index: u64,
) -> Result<TrajectoryResult> {
    simulate_trajectory_from(params, config, trajectory_index, PhaseSpaceState::fixed_point(params))
}

pub fn simulate_trajectory_from(
    params: &ModelParams,
    config: &SimConfig,
    trajectory_index: u64,
    initial: PhaseSpaceState,
) -> Result<TrajectoryResult> {
    config.validate(params)?;
    let mut samples = Vec::with_capacity(config.n_samples_per_traj);
    let outcome = drive_trajectory(params, config, trajectory_index, initial, |_, s| samples.push(*s));
    if outcome.diverged {
        samples.clear();
    }
    Ok(TrajectoryResult { samples, diverged: outcome.diverged, discarded_steps: outcome.discarded_steps })
}

pub(crate) struct DriveOutcome {
    pub diverged: bool,
    pub discarded_steps: u64,
}

/// Integrates one (pre-validated) trajectory and hands every retained
/// sample to `on_sample` together with its index. The caller must drop what
/// it received if the outcome reports divergence.
pub(crate) fn drive_trajectory<F>(
    params: &ModelParams,
    config: &SimConfig,
    trajectory_index: u64,
    initial: PhaseSpaceState,
    mut on_sample: F,
) -> DriveOutcome
where
    F: FnMut(usize, &QuadratureSample),
{
    let thr2 = config.divergence_threshold * config.divergence_threshold;
    let escaped = |s: &PhaseSpaceState| {
        let n = s.max_norm_sqr();
        n.is_nan() || n > thr2
    };
    if escaped(&initial) {
        return DriveOutcome { diverged: true, discarded_steps: 0 };
    }
    let stepper = Stepper::new(params, config.scheme, config.dt);
    let mut rng = trajectory_stream(config.master_seed, trajectory_index);
    let mut state = initial;
    let mut steps = 0u64;
    let mut advance = |n: u64, state: &mut PhaseSpaceState, steps: &mut u64| -> bool {
        for _ in 0..n {
            *state = stepper.step(state, &mut rng);
            *steps += 1;
            if escaped(state) {
                return false;
            }
        }
        true
    };

    if !advance(config.burn_in_steps(), &mut state, &mut steps) {
        return DriveOutcome { diverged: true, discarded_steps: steps };
    }
    let per_sample = config.steps_per_sample();
    for k in 0..config.n_samples_per_traj {
        if !advance(per_sample, &mut state, &mut steps) {
            return DriveOutcome { diverged: true, discarded_steps: steps };
        }
        let sample = alpha_to_quadratures(&state, params).at(steps as f64 * config.dt);
        on_sample(k, &sample);
    }
    DriveOutcome { diverged: false, discarded_steps: 0 }
}
