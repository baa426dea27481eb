//! Deterministic trajectory ensembles.
//!
//! Trajectories are grouped into fixed work units whose composition depends
//! only on the configuration. Each unit is integrated into private
//! accumulators and the unit results are merged in index order, so the
//! merged sums are bit-identical for any number of workers.

use serde::Serialize;

use crate::error::Result;
use crate::model::{ModelParams, PhaseSpaceState};
use crate::moments::MomentAccumulator;
use crate::sde::{drive_trajectory, SimConfig};

/// Number of error-estimation batches an ensemble aims for.
pub const TARGET_BATCHES: u64 = 32;

/// Largest tolerated fraction of diverged trajectories.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;

const UNIT_SIZE: usize = 4;

/// Accumulator of all samples whose index falls in one time segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Time of the last sample in the segment.
    pub tau_end: f64,
    /// Samples per trajectory up to and including this segment.
    pub samples_per_traj: usize,
    pub accumulator: MomentAccumulator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub accumulator: MomentAccumulator,
    pub segments: Vec<Segment>,
    pub n_trajectories: usize,
    pub n_diverged: usize,
    pub discarded_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceSummary {
    pub n_trajectories: usize,
    pub n_diverged: usize,
    pub discarded_steps: u64,
    pub diverged_fraction: f64,
    pub reliable: bool,
}

impl EnsembleResult {
    pub fn diverged_fraction(&self) -> f64 {
        self.n_diverged as f64 / self.n_trajectories as f64
    }

    pub fn is_reliable(&self) -> bool {
        self.diverged_fraction() <= MAX_DIVERGED_FRACTION
    }

    pub fn divergence(&self) -> DivergenceSummary {
        DivergenceSummary {
            n_trajectories: self.n_trajectories,
            n_diverged: self.n_diverged,
            discarded_steps: self.discarded_steps,
            diverged_fraction: self.diverged_fraction(),
            reliable: self.is_reliable(),
        }
    }

    /// Running accumulators: all samples up to the end of each segment.
    pub fn cumulative(&self) -> Vec<(f64, usize, MomentAccumulator)> {
        let mut out = Vec::with_capacity(self.segments.len());
        let mut running: Option<MomentAccumulator> = None;
        for seg in &self.segments {
            let acc = match running.take() {
                None => seg.accumulator.clone(),
                Some(mut acc) => {
                    acc.merge(&seg.accumulator).expect("segments share a schema");
                    acc
                }
            };
            out.push((seg.tau_end, seg.samples_per_traj, acc.clone()));
            running = Some(acc);
        }
        out
    }
}

/// Batch layout: with at least [`TARGET_BATCHES`] trajectories a batch is a
/// contiguous range of trajectories; otherwise every trajectory is cut into
/// contiguous blocks of samples.
#[derive(Debug, Clone, Copy)]
struct Batching {
    n_traj: u64,
    n_samples: u64,
    blocks_per_traj: u64,
}

impl Batching {
    fn new(config: &SimConfig) -> Self {
        let n_traj = config.n_trajectories as u64;
        let blocks_per_traj = if n_traj >= TARGET_BATCHES { 1 } else { TARGET_BATCHES.div_ceil(n_traj) };
        Self { n_traj, n_samples: config.n_samples_per_traj as u64, blocks_per_traj }
    }

    fn batch_id(&self, traj: u64, sample: u64) -> u64 {
        if self.blocks_per_traj == 1 {
            traj * TARGET_BATCHES / self.n_traj
        } else {
            traj * self.blocks_per_traj + sample * self.blocks_per_traj / self.n_samples
        }
    }
}

struct UnitResult {
    segments: Vec<MomentAccumulator>,
    n_diverged: usize,
    discarded_steps: u64,
}

fn segment_of(sample: usize, n_samples: usize, n_segments: usize) -> usize {
    sample * n_segments / n_samples
}

fn run_unit(
    params: &ModelParams,
    config: &SimConfig,
    batching: Batching,
    n_segments: usize,
    trajectories: std::ops::Range<usize>,
) -> UnitResult {
    let empty = MomentAccumulator::new(params);
    let mut out = UnitResult { segments: vec![empty.clone(); n_segments], n_diverged: 0, discarded_steps: 0 };
    for traj in trajectories {
        let mut local = vec![empty.clone(); n_segments];
        let outcome = drive_trajectory(
            params,
            config,
            traj as u64,
            PhaseSpaceState::fixed_point(params),
            |k, sample| {
                let acc = &mut local[segment_of(k, config.n_samples_per_traj, n_segments)];
                acc.set_batch(batching.batch_id(traj as u64, k as u64));
                acc.accumulate(sample);
            },
        );
        if outcome.diverged {
            log::debug!("trajectory {traj} diverged after {} steps", outcome.discarded_steps);
            out.n_diverged += 1;
            out.discarded_steps += outcome.discarded_steps;
            continue;
        }
        for (acc, part) in out.segments.iter_mut().zip(&local) {
            acc.merge(part).expect("same schema");
        }
    }
    out
}

fn run_impl(
    params: &ModelParams,
    config: &SimConfig,
    n_segments: usize,
    parallel: bool,
) -> Result<EnsembleResult> {
    config.validate(params)?;
    let n_segments = n_segments.clamp(1, config.n_samples_per_traj);
    let batching = Batching::new(config);
    let units: Vec<std::ops::Range<usize>> = (0..config.n_trajectories)
        .step_by(UNIT_SIZE)
        .map(|start| start..(start + UNIT_SIZE).min(config.n_trajectories))
        .collect();
    let work = |r: &std::ops::Range<usize>| run_unit(params, config, batching, n_segments, r.clone());

    let results: Vec<UnitResult> =
        if parallel { parallel_map(&units, work) } else { units.iter().map(work).collect() };

    let mut segments: Vec<MomentAccumulator> = vec![MomentAccumulator::new(params); n_segments];
    let (mut n_diverged, mut discarded_steps) = (0, 0);
    for r in &results {
        for (acc, part) in segments.iter_mut().zip(&r.segments) {
            acc.merge(part)?;
        }
        n_diverged += r.n_diverged;
        discarded_steps += r.discarded_steps;
    }

    let mut accumulator = MomentAccumulator::new(params);
    for seg in &segments {
        accumulator.merge(seg)?;
    }
    let n = config.n_samples_per_traj;
    let segments = segments
        .into_iter()
        .enumerate()
        .map(|(i, acc)| {
            // last sample index belonging to segment i
            let last = (0..n).rev().find(|&k| segment_of(k, n, n_segments) == i).unwrap_or(0);
            let tau_end = config.burn_in_steps() as f64 * config.dt
                + (last as u64 + 1) as f64 * config.steps_per_sample() as f64 * config.dt;
            Segment { tau_end, samples_per_traj: last + 1, accumulator: acc }
        })
        .collect();

    let result = EnsembleResult {
        accumulator,
        segments,
        n_trajectories: config.n_trajectories,
        n_diverged,
        discarded_steps,
    };
    if !result.is_reliable() {
        log::warn!(
            "unreliable run: {} of {} trajectories diverged",
            result.n_diverged,
            result.n_trajectories
        );
    }
    Ok(result)
}

#[cfg(feature = "parallel")]
fn parallel_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Runs the ensemble on the current rayon pool (sequentially when the
/// `parallel` feature is off).
pub fn run_ensemble(params: &ModelParams, config: &SimConfig) -> Result<EnsembleResult> {
    run_impl(params, config, 1, true)
}

/// Like [`run_ensemble`], additionally splitting the samples of every
/// trajectory into `n_segments` consecutive time windows.
pub fn run_ensemble_segmented(
    params: &ModelParams,
    config: &SimConfig,
    n_segments: usize,
) -> Result<EnsembleResult> {
    run_impl(params, config, n_segments, true)
}

/// Single-threaded reference path.
pub fn run_ensemble_sequential(params: &ModelParams, config: &SimConfig) -> Result<EnsembleResult> {
    run_impl(params, config, 1, false)
}
