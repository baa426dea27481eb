//! Shared checks for the integration and acceptance suites.
#![allow(dead_code)]

use num_complex::Complex64;
use opo_core::criteria::{cs_test, Partition, Verdict};
use opo_core::model::alpha_to_quadratures;
use opo_core::noise::{sample_wiener_increments, trajectory_stream, NoiseIncrement};
use opo_core::sde::{Scheme, Stepper};
use opo_core::{ModelParams, Moment, MomentAccumulator, MomentReport, PhaseSpaceState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Observable = fn(&opo_core::QuadratureSample) -> f64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cnormal<R: Rng>(rng: &mut R) -> Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Mean and standard error of a stream of reals.
#[derive(Default)]
pub struct Running {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Running {
    pub fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n
    }

    pub fn se(&self) -> f64 {
        ((self.sum_sq / self.n - self.mean().powi(2)).max(0.0) / self.n).sqrt()
    }

    pub fn pull(&self, target: f64) -> f64 {
        (self.mean() - target) / self.se()
    }
}

/// Empirical noise moments over `n` draws: every required correlation must
/// be within `k` standard errors of its target. Returns the largest pull.
pub fn noise_moment_check(n: usize, dt: f64, seed: u64, k: f64) -> Result<f64, String> {
    let mut rng = trajectory_stream(seed, 0);
    // (label, target, re/im accumulators)
    let labels = [
        ("dW1", 0.0),
        ("dW2", 0.0),
        ("dW1p", 0.0),
        ("dW2p", 0.0),
        ("dW1 dW2", 1.0),
        ("dW1p dW2p", 1.0),
        ("dW1^2", 0.0),
        ("dW2^2", 0.0),
        ("dW1p^2", 0.0),
        ("dW2p^2", 0.0),
        ("dW1 dW1p", 0.0),
        ("dW1 dW2p", 0.0),
        ("dW2 dW1p", 0.0),
        ("dW2 dW2p", 0.0),
    ];
    let mut acc: Vec<(Running, Running)> = labels.iter().map(|_| Default::default()).collect();
    let scale = 1.0 / dt.sqrt();
    for _ in 0..n {
        let w = sample_wiener_increments(&mut rng, dt);
        let (a, b, ap, bp) = (w.dw1 * scale, w.dw2 * scale, w.dw1p * scale, w.dw2p * scale);
        let values =
            [a, b, ap, bp, a * b, ap * bp, a * a, b * b, ap * ap, bp * bp, a * ap, a * bp, b * ap, b * bp];
        for ((re, im), v) in acc.iter_mut().zip(values) {
            re.push(v.re);
            im.push(v.im);
        }
    }
    let mut worst: f64 = 0.0;
    for ((label, target), (re, im)) in labels.iter().zip(&acc) {
        let pulls = [re.pull(*target), im.pull(0.0)];
        for p in pulls {
            worst = worst.max(p.abs());
            if p.abs() > k {
                return Err(format!("<{label}>/dt = {:.4}+{:.4}i, pull {p:.2}", re.mean(), im.mean()));
            }
        }
    }
    Ok(worst)
}

/// A random quadrature sample built from a random phase-space point.
pub fn random_sample<R: Rng>(rng: &mut R, params: &ModelParams) -> opo_core::QuadratureSample {
    let s = PhaseSpaceState {
        a0: c(params.pump_amplitude(), 0.0) + cnormal(rng),
        a0p: c(params.pump_amplitude(), 0.0) + cnormal(rng),
        a1: cnormal(rng),
        a2: cnormal(rng),
        a1p: cnormal(rng),
        a2p: cnormal(rng),
    };
    alpha_to_quadratures(&s, params)
}

fn rel_close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
}

/// Merge laws on a random stream split three ways: merge equals
/// concatenation, commutes, associates, and has the empty accumulator as
/// identity (all within `tol` relative on every moment).
pub fn merge_law_check(seed: u64, n: usize, tol: f64) -> Result<(), String> {
    let params = ModelParams::new(0.6, 2.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = MomentAccumulator::new(&params);
    let mut parts = vec![MomentAccumulator::new(&params); 3];
    for i in 0..n {
        let s = random_sample(&mut rng, &params);
        let batch = (i % 7) as u64;
        let part = rng.random_range(0..3);
        all.set_batch(batch);
        all.accumulate(&s);
        parts[part].set_batch(batch);
        parts[part].accumulate(&s);
    }
    let merge = |a: &MomentAccumulator, b: &MomentAccumulator| opo_core::moments::merge(a, b).unwrap();
    let left = merge(&merge(&parts[0], &parts[1]), &parts[2]);
    let right = merge(&parts[0], &merge(&parts[1], &parts[2]));
    let swapped = merge(&parts[2], &merge(&parts[1], &parts[0]));
    let with_empty = merge(&left, &MomentAccumulator::new(&params));
    if with_empty != left {
        return Err("merge with empty changed the accumulator".into());
    }
    if left.count() != all.count() || left.n_batches() != all.n_batches() {
        return Err("merged counts differ from the concatenated stream".into());
    }
    for &m in Moment::ALL {
        let want = all.estimate(m).unwrap();
        for (label, acc) in [("associativity", &right), ("commutativity", &swapped), ("concatenation", &left)]
        {
            let got = acc.estimate(m).unwrap();
            if !rel_close(got, want, tol) {
                return Err(format!("{label}: {} = {got} vs {want}", m.name()));
            }
        }
    }
    Ok(())
}

/// `q4 == 16 g^4 <da1+ da1 da2+ da2>` on a report; returns the relative gap.
pub fn mapping_identity_gap(report: &MomentReport, g: f64) -> f64 {
    let q4 = report.value(Moment::Q4).unwrap();
    let amp = report.value(Moment::A1pA1A2pA2).unwrap() * 16.0 * g.powi(4);
    (q4 - amp).norm() / q4.norm().max(amp.norm())
}

/// Classical ensemble: a mixture of correlated complex Gaussians for the
/// three modes with `a+ = conj(a)`.
pub fn classical_dataset(seed: u64, n: usize) -> MomentAccumulator {
    let params = ModelParams::new(0.5, 1.0, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_components = rng.random_range(1..4);
    let components: Vec<([Complex64; 3], [[Complex64; 3]; 3])> = (0..n_components)
        .map(|_| {
            let mean = [0; 3].map(|_| cnormal(&mut rng) * rng.random_range(0.0..3.0));
            let mix = [0; 3].map(|_| [0; 3].map(|_| cnormal(&mut rng) * 0.7));
            (mean, mix)
        })
        .collect();
    let mut acc = MomentAccumulator::unshifted(&params);
    for i in 0..n {
        let (mean, mix) = &components[rng.random_range(0..n_components)];
        let z = [0; 3].map(|_| cnormal(&mut rng));
        let v: [Complex64; 3] =
            std::array::from_fn(|r| mean[r] + mix[r][0] * z[0] + mix[r][1] * z[1] + mix[r][2] * z[2]);
        let state = PhaseSpaceState {
            a0: v[0],
            a0p: v[0].conj(),
            a1: v[1],
            a1p: v[1].conj(),
            a2: v[2],
            a2p: v[2].conj(),
        };
        acc.set_batch((i * 32 / n) as u64);
        acc.accumulate(&alpha_to_quadratures(&state, &params));
    }
    acc
}

/// Runs `cs_test` on `n_datasets` classical ensembles; none may be
/// declared violated. Returns the largest ratio seen.
pub fn classical_cs_check(n_datasets: u64, n: usize) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..n_datasets {
        let report = classical_dataset(seed, n).finalize().map_err(|e| e.to_string())?;
        for p in Partition::ALL {
            let r = cs_test(&report, p, 3.0).map_err(|e| e.to_string())?;
            worst = worst.max(r.ratio);
            if r.verdict == Verdict::Violated {
                return Err(format!("dataset {seed}, {}: ratio {:.4}", p.name(), r.ratio));
            }
        }
    }
    Ok(worst)
}

/// Weak-order estimate from coupled Euler paths at `dt`, `dt/2`, `dt/4`
/// (the coarse increments are sums of the fine ones). For each observable
/// returns `(order, ratio, ratio_se)` with
/// `ratio = E[f(dt) - f(dt/2)] / E[f(dt/2) - f(dt/4)]`.
pub fn weak_order(
    params: &ModelParams,
    initial: PhaseSpaceState,
    horizon: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
) -> Vec<(&'static str, f64, f64, f64)> {
    let fine_dt = dt / 4.0;
    let n_fine = (horizon / fine_dt).round() as usize;
    let steppers = [1.0, 2.0, 4.0].map(|d| Stepper::new(params, Scheme::EulerMaruyama, dt / d));
    let observables: [(&'static str, Observable); 2] =
        [("<x0>", |q| q.x0.re), ("<x x+>", |q| (q.x * q.xp).re)];

    // per observable: sums of d1, d2, d1^2, d2^2, d1 d2
    let mut sums = [[0.0f64; 5]; 2];
    for path in 0..n_paths {
        let mut rng = trajectory_stream(seed, path);
        let mut states = [initial; 3];
        let mut pending = [NoiseIncrement::zero(); 2];
        for step in 1..=n_fine {
            let w = sample_wiener_increments(&mut rng, fine_dt);
            states[2] = steppers[2].update(&states[2], &w);
            pending[0] += w;
            pending[1] += w;
            if step % 2 == 0 {
                states[1] = steppers[1].update(&states[1], &pending[1]);
                pending[1] = NoiseIncrement::zero();
            }
            if step % 4 == 0 {
                states[0] = steppers[0].update(&states[0], &pending[0]);
                pending[0] = NoiseIncrement::zero();
            }
        }
        let q = states.map(|s| alpha_to_quadratures(&s, params));
        for (sum, (_, f)) in sums.iter_mut().zip(&observables) {
            let d1 = f(&q[0]) - f(&q[1]);
            let d2 = f(&q[1]) - f(&q[2]);
            for (s, v) in sum.iter_mut().zip([d1, d2, d1 * d1, d2 * d2, d1 * d2]) {
                *s += v;
            }
        }
    }
    let n = n_paths as f64;
    observables
        .iter()
        .zip(&sums)
        .map(|((name, _), s)| {
            let (m1, m2) = (s[0] / n, s[1] / n);
            let (v1, v2, cov) = (s[2] / n - m1 * m1, s[3] / n - m2 * m2, s[4] / n - m1 * m2);
            let ratio = m1 / m2;
            // first-order error of a ratio of correlated means
            let var = (v1 / (m2 * m2) + v2 * m1 * m1 / m2.powi(4) - 2.0 * cov * m1 / m2.powi(3)) / n;
            (*name, ratio.log2(), ratio, var.max(0.0).sqrt())
        })
        .collect()
}

/// Default weak-order scenario: pump switched on from vacuum.
pub fn weak_order_default() -> Vec<(&'static str, f64, f64, f64)> {
    let params = ModelParams::new(0.5, 1.0, 0.3).unwrap();
    weak_order(&params, PhaseSpaceState::default(), 2.0, 0.1, 20_000, 11)
}
