//! Streaming, mergeable estimation of centered cross-moments up to order 4.
//!
//! Every sample is reduced to 14 linear complex channels (the six scaled
//! quadratures, the six amplitudes and the two raw amplitude products). Each
//! channel is shifted by a provisional mean (the deterministic steady state)
//! before any product is formed, and the accumulator keeps compensated sums
//! of every channel monomial that the target moments need. Centered moments
//! are assembled from those sums only at the end, so accumulation is a pure
//! sum and merging is exact addition.
//!
//! Samples are grouped into batches keyed by an id. Standard errors come
//! from a delete-one-batch jackknife, which for plain means coincides with
//! the batch-means estimate and also covers nonlinear combinations such as
//! the two sides of a Cauchy-Schwarz inequality.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{ModelParams, QuadratureSample};

/// Batches needed before a standard error is considered trustworthy.
pub const MIN_CONFIDENT_BATCHES: usize = 30;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    X0,
    Y0,
    X,
    Y,
    Xp,
    Yp,
    A0,
    A0p,
    A1,
    A2,
    A1p,
    A2p,
    N12,
    N0,
}

pub const N_CHANNELS: usize = 14;

enum Definition {
    /// `E[prod (c - E c)]`, summed over weighted products.
    Centered(&'static [(f64, &'static [Channel])]),
    /// `E[prod c]` on the unshifted channels.
    Raw(&'static [Channel]),
}

macro_rules! moments {
    ($( $variant:ident => $name:literal, $def:expr; )*) => {
        /// Target moments. Centered ones are built from fluctuations
        /// `du = u - <u>`; the `Mean*` and `Raw*` ones are plain averages.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Moment { $( $variant, )* }

        impl Moment {
            pub const ALL: &'static [Moment] = &[ $( Moment::$variant, )* ];

            pub fn name(self) -> &'static str {
                match self { $( Moment::$variant => $name, )* }
            }

            fn definition(self) -> Definition {
                match self { $( Moment::$variant => $def, )* }
            }
        }
    };
}

use Channel::*;
use Definition::{Centered, Raw};

moments! {
    MeanX0 => "mean_x0", Raw(&[X0]);
    MeanY0 => "mean_y0", Raw(&[Y0]);
    MeanX => "mean_x", Raw(&[X]);
    MeanY => "mean_y", Raw(&[Y]);
    MeanXp => "mean_xp", Raw(&[Xp]);
    MeanYp => "mean_yp", Raw(&[Yp]);
    T1 => "t1", Centered(&[(1.0, &[X, Xp, X0])]);
    T2 => "t2", Centered(&[(1.0, &[Y, Yp, X0])]);
    T3 => "t3", Centered(&[(1.0, &[Y, Xp, Y0])]);
    T4 => "t4", Centered(&[(1.0, &[X, Yp, Y0])]);
    VarX0 => "var_x0", Centered(&[(1.0, &[X0, X0])]);
    VarY0 => "var_y0", Centered(&[(1.0, &[Y0, Y0])]);
    XXp => "x_xp", Centered(&[(1.0, &[X, Xp])]);
    YYp => "y_yp", Centered(&[(1.0, &[Y, Yp])]);
    X0X => "x0_x", Centered(&[(1.0, &[X0, X])]);
    X0Y => "x0_y", Centered(&[(1.0, &[X0, Y])]);
    Y0X => "y0_x", Centered(&[(1.0, &[Y0, X])]);
    Y0Y => "y0_y", Centered(&[(1.0, &[Y0, Y])]);
    Q4 => "q4", Centered(&[
        (1.0, &[X, X, Xp, Xp]),
        (1.0, &[X, X, Yp, Yp]),
        (1.0, &[Y, Y, Xp, Xp]),
        (1.0, &[Y, Y, Yp, Yp]),
    ]);
    X0Cubed => "x0_cubed", Centered(&[(1.0, &[X0, X0, X0])]);
    A1pA1A2pA2 => "a1p_a1_a2p_a2", Centered(&[(1.0, &[A1p, A1, A2p, A2])]);
    A0pA0 => "a0p_a0", Centered(&[(1.0, &[A0p, A0])]);
    A1A2A0 => "a1_a2_a0", Centered(&[(1.0, &[A1, A2, A0])]);
    A1pA2pA0p => "a1p_a2p_a0p", Centered(&[(1.0, &[A1p, A2p, A0p])]);
    A0pA0A2pA2 => "a0p_a0_a2p_a2", Centered(&[(1.0, &[A0p, A0, A2p, A2])]);
    A1pA1 => "a1p_a1", Centered(&[(1.0, &[A1p, A1])]);
    A0pA0A1pA1 => "a0p_a0_a1p_a1", Centered(&[(1.0, &[A0p, A0, A1p, A1])]);
    A2pA2 => "a2p_a2", Centered(&[(1.0, &[A2p, A2])]);
    RawN12 => "raw_n12", Raw(&[N12]);
    RawN0 => "raw_n0", Raw(&[N0]);
    RawA1A2A0 => "raw_a1_a2_a0", Raw(&[A1, A2, A0]);
    RawA1pA2pA0p => "raw_a1p_a2p_a0p", Raw(&[A1p, A2p, A0p]);
}

pub const N_MOMENTS: usize = Moment::ALL.len();

impl Moment {
    fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Moment> {
        Moment::ALL.iter().copied().find(|m| m.name() == name)
    }
}

/// One expansion term: the monomial of the channels inside the subset and
/// the channels outside it, which contribute a mean (or shift) factor.
struct SubsetTerm {
    monomial: Option<usize>,
    outside: Vec<usize>,
}

struct ResolvedProduct {
    coef: f64,
    terms: Vec<SubsetTerm>,
}

struct Tables {
    monomials: Vec<Vec<Channel>>,
    /// Index of the single-channel monomial for each channel.
    singles: [usize; N_CHANNELS],
    /// Per moment: products, plus whether the definition is centered.
    resolved: Vec<(bool, Vec<ResolvedProduct>)>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(build_tables)
}

fn build_tables() -> Tables {
    let mut monomials: Vec<Vec<Channel>> = Vec::new();
    let mut index: HashMap<Vec<Channel>, usize> = HashMap::new();
    let mut intern = |mut key: Vec<Channel>| -> usize {
        key.sort();
        *index.entry(key.clone()).or_insert_with(|| {
            monomials.push(key);
            monomials.len() - 1
        })
    };

    let all_channels = [X0, Y0, X, Y, Xp, Yp, A0, A0p, A1, A2, A1p, A2p, N12, N0];
    let mut singles = [0usize; N_CHANNELS];
    for c in all_channels {
        singles[c as usize] = intern(vec![c]);
    }

    let mut resolved = Vec::with_capacity(N_MOMENTS);
    for &m in Moment::ALL {
        let (centered, products): (bool, Vec<(f64, &[Channel])>) = match m.definition() {
            Centered(p) => (true, p.to_vec()),
            Raw(c) => (false, vec![(1.0, c)]),
        };
        let products = products
            .into_iter()
            .map(|(coef, chans)| {
                let k = chans.len();
                let terms = (0..1usize << k)
                    .map(|mask| {
                        let inside: Vec<Channel> =
                            (0..k).filter(|i| mask & (1 << i) != 0).map(|i| chans[i]).collect();
                        let outside: Vec<usize> =
                            (0..k).filter(|i| mask & (1 << i) == 0).map(|i| chans[i] as usize).collect();
                        let monomial = if inside.is_empty() { None } else { Some(intern(inside)) };
                        SubsetTerm { monomial, outside }
                    })
                    .collect();
                ResolvedProduct { coef, terms }
            })
            .collect();
        resolved.push((centered, products));
    }

    Tables { monomials, singles, resolved }
}

/// Evaluates every target moment from monomial averages of the shifted
/// channels.
fn evaluate(averages: &[Complex64], shift: &[Complex64; N_CHANNELS]) -> Vec<Complex64> {
    let t = tables();
    let means: Vec<Complex64> = (0..N_CHANNELS).map(|c| averages[t.singles[c]]).collect();
    t.resolved
        .iter()
        .map(|(centered, products)| {
            products
                .iter()
                .map(|p| {
                    let sum: Complex64 = p
                        .terms
                        .iter()
                        .map(|term| {
                            let inside = term.monomial.map_or(ONE, |i| averages[i]);
                            term.outside.iter().fold(inside, |acc, &c| {
                                if *centered {
                                    acc * -means[c]
                                } else {
                                    acc * shift[c]
                                }
                            })
                        })
                        .sum();
                    p.coef * sum
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, v: Complex64) {
        neumaier(&mut self.sum.re, &mut self.comp.re, v.re);
        neumaier(&mut self.sum.im, &mut self.comp.im, v.im);
    }

    fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BatchSums {
    count: u64,
    sums: Vec<CompensatedSum>,
}

impl BatchSums {
    fn new() -> Self {
        Self { count: 0, sums: vec![CompensatedSum::default(); tables().monomials.len()] }
    }

    fn merge(&mut self, other: &BatchSums) {
        self.count += other.count;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Schema {
    shift: [Complex64; N_CHANNELS],
    g: f64,
    eps: f64,
    gamma_r: f64,
}

impl Schema {
    fn channels(&self, s: &QuadratureSample) -> [Complex64; N_CHANNELS] {
        let i = Complex64::new(0.0, 1.0);
        let (two_g, two_eps) = (2.0 * self.g, 2.0 * self.eps);
        let raw = [
            s.x0,
            s.y0,
            s.x,
            s.y,
            s.xp,
            s.yp,
            (s.x0 + i * s.y0) / two_eps,
            (s.x0 - i * s.y0) / two_eps,
            (s.x + i * s.y) / two_g,
            (s.xp + i * s.yp) / two_g,
            (s.xp - i * s.yp) / two_g,
            (s.x - i * s.y) / two_g,
            s.n12,
            s.n0,
        ];
        let mut out = [ZERO; N_CHANNELS];
        for i in 0..N_CHANNELS {
            out[i] = raw[i] - self.shift[i];
        }
        out
    }
}

/// Mergeable sums for all target moments, split into batches.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    schema: Schema,
    batches: BTreeMap<u64, BatchSums>,
    current: u64,
}

impl MomentAccumulator {
    /// Accumulator whose provisional centering point is the deterministic
    /// steady state of `params` (`x0 = 2 mu`, pump amplitude `mu/eps`,
    /// everything else zero).
    pub fn new(params: &ModelParams) -> Self {
        let pump = Complex64::new(params.pump_amplitude(), 0.0);
        let mut shift = [ZERO; N_CHANNELS];
        shift[X0 as usize] = Complex64::new(2.0 * params.mu(), 0.0);
        shift[A0 as usize] = pump;
        shift[A0p as usize] = pump;
        shift[N0 as usize] = pump * pump;
        Self::with_shift(params, shift)
    }

    /// Accumulator without provisional centering.
    pub fn unshifted(params: &ModelParams) -> Self {
        Self::with_shift(params, [ZERO; N_CHANNELS])
    }

    fn with_shift(params: &ModelParams, shift: [Complex64; N_CHANNELS]) -> Self {
        Self {
            schema: Schema { shift, g: params.g(), eps: params.eps(), gamma_r: params.gamma_r() },
            batches: BTreeMap::new(),
            current: 0,
        }
    }

    /// Subsequent samples go to batch `id`.
    pub fn set_batch(&mut self, id: u64) {
        self.current = id;
    }

    pub fn accumulate(&mut self, sample: &QuadratureSample) {
        let c = self.schema.channels(sample);
        let t = tables();
        let batch = self.batches.entry(self.current).or_insert_with(BatchSums::new);
        batch.count += 1;
        for (sum, mono) in batch.sums.iter_mut().zip(&t.monomials) {
            let v = mono.iter().fold(ONE, |acc, &ch| acc * c[ch as usize]);
            sum.add(v);
        }
    }

    /// Merges `other` into `self`; batches with equal ids are combined.
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if self.schema != other.schema {
            return Err(Error::SchemaMismatch);
        }
        for (id, b) in &other.batches {
            self.batches.entry(*id).or_insert_with(BatchSums::new).merge(b);
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.batches.values().map(|b| b.count).sum()
    }

    pub fn n_batches(&self) -> usize {
        self.batches.values().filter(|b| b.count > 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    fn totals(&self) -> Vec<Complex64> {
        let mut total = BatchSums::new();
        for b in self.batches.values() {
            total.merge(b);
        }
        total.sums.iter().map(CompensatedSum::value).collect()
    }

    /// Point estimate of one moment over all samples.
    pub fn estimate(&self, m: Moment) -> Result<Complex64> {
        let n = self.count();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        let avg: Vec<Complex64> = self.totals().into_iter().map(|s| s / n as f64).collect();
        Ok(evaluate(&avg, &self.schema.shift)[m.index()])
    }

    /// Estimates and jackknife standard errors for every target moment.
    pub fn finalize(&self) -> Result<MomentReport> {
        let n = self.count();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        let batches: Vec<&BatchSums> = self.batches.values().filter(|b| b.count > 0).collect();
        if batches.len() < 2 {
            return Err(Error::InsufficientBatches { found: batches.len(), needed: 2 });
        }
        let totals = self.totals();
        let avg: Vec<Complex64> = totals.iter().map(|s| s / n as f64).collect();
        let values = evaluate(&avg, &self.schema.shift);

        let replicates: Vec<Vec<Complex64>> = batches
            .iter()
            .map(|b| {
                let rest = (n - b.count) as f64;
                let avg: Vec<Complex64> =
                    totals.iter().zip(&b.sums).map(|(t, s)| (t - s.value()) / rest).collect();
                evaluate(&avg, &self.schema.shift)
            })
            .collect();

        let n_batches = batches.len();
        let entries = (0..N_MOMENTS)
            .map(|i| {
                let column: Vec<Complex64> = replicates.iter().map(|r| r[i]).collect();
                let (se_re, se_im) = jackknife_complex(&column);
                Some(MomentEstimate {
                    value: values[i],
                    std_error: se_re,
                    std_error_im: se_im,
                    n_batches,
                    low_confidence: n_batches < MIN_CONFIDENT_BATCHES,
                })
            })
            .collect();

        Ok(MomentReport {
            n_samples: n,
            n_batches,
            g: self.schema.g,
            gamma_r: self.schema.gamma_r,
            entries,
            replicates,
        })
    }
}

/// Combines two accumulators into a new one.
pub fn merge(a: &MomentAccumulator, b: &MomentAccumulator) -> Result<MomentAccumulator> {
    let mut out = a.clone();
    out.merge(b)?;
    Ok(out)
}

fn jackknife(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / b;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    ((b - 1.0) / b * ss).sqrt()
}

fn jackknife_complex(values: &[Complex64]) -> (f64, f64) {
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    (jackknife(&re), jackknife(&im))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: Complex64,
    /// Standard error of the real part.
    pub std_error: f64,
    /// Standard error of the imaginary part.
    pub std_error_im: f64,
    pub n_batches: usize,
    pub low_confidence: bool,
}

impl MomentEstimate {
    /// Estimate with a known uncertainty and no batch structure.
    pub fn exact(value: Complex64, std_error: f64) -> Self {
        Self { value, std_error, std_error_im: std_error, n_batches: 0, low_confidence: false }
    }
}

/// Real scalar with a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `value / std_error`, infinite for an exact nonzero value.
    pub fn significance(&self) -> f64 {
        if self.std_error > 0.0 {
            self.value / self.std_error
        } else if self.value == 0.0 {
            0.0
        } else {
            self.value.signum() * f64::INFINITY
        }
    }
}

/// Finalized moments. Reports built by [`MomentAccumulator::finalize`] keep
/// their jackknife replicates so derived quantities get correlated errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub n_samples: u64,
    pub n_batches: usize,
    /// Coupling and damping ratio of the quadrature normalization.
    pub g: f64,
    pub gamma_r: f64,
    entries: Vec<Option<MomentEstimate>>,
    replicates: Vec<Vec<Complex64>>,
}

impl MomentReport {
    /// Report holding only the given estimates, e.g. analytic predictions or
    /// externally supplied data.
    pub fn from_estimates(
        g: f64,
        gamma_r: f64,
        estimates: impl IntoIterator<Item = (Moment, MomentEstimate)>,
    ) -> Self {
        let mut entries = vec![None; N_MOMENTS];
        for (m, e) in estimates {
            entries[m.index()] = Some(e);
        }
        Self { n_samples: 0, n_batches: 0, g, gamma_r, entries, replicates: Vec::new() }
    }

    pub fn get(&self, m: Moment) -> Result<&MomentEstimate> {
        self.entries[m.index()].as_ref().ok_or_else(|| Error::MissingMoment(m.name().to_string()))
    }

    pub fn value(&self, m: Moment) -> Result<Complex64> {
        self.get(m).map(|e| e.value)
    }

    pub fn contains(&self, m: Moment) -> bool {
        self.entries[m.index()].is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(Option::is_none)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Moment, &MomentEstimate)> {
        Moment::ALL.iter().filter_map(|&m| self.entries[m.index()].as_ref().map(|e| (m, e)))
    }

    /// Real estimate of the real part of one moment.
    pub fn real(&self, m: Moment) -> Result<Estimate> {
        let e = self.get(m)?;
        Ok(Estimate { value: e.value.re, std_error: e.std_error })
    }

    /// Evaluates `f` on the moments and propagates uncertainty: by jackknife
    /// over batch replicates when available, otherwise by first-order
    /// propagation with the listed moments treated as independent.
    pub fn derive<F>(&self, required: &[Moment], f: F) -> Result<Estimate>
    where
        F: Fn(&dyn Fn(Moment) -> Complex64) -> f64,
    {
        for &m in required {
            self.get(m)?;
        }
        let value = f(&|m| self.entries[m.index()].map_or(ZERO, |e| e.value));

        let std_error = if !self.replicates.is_empty() {
            let reps: Vec<f64> = self.replicates.iter().map(|r| f(&|m| r[m.index()])).collect();
            jackknife(&reps)
        } else {
            let base: Vec<Complex64> = self.entries.iter().map(|e| e.map_or(ZERO, |e| e.value)).collect();
            let mut var = 0.0;
            for &m in required {
                let e = self.entries[m.index()].expect("checked above");
                for (step, imaginary) in [(e.std_error, false), (e.std_error_im, true)] {
                    if step <= 0.0 {
                        continue;
                    }
                    let delta = if imaginary { Complex64::new(0.0, step) } else { Complex64::new(step, 0.0) };
                    let eval = |sign: f64| {
                        let mut shifted = base.clone();
                        shifted[m.index()] += sign * delta;
                        f(&|k| shifted[k.index()])
                    };
                    // central difference with the one-sigma step is exact for
                    // functions up to quadratic in each moment
                    let d = 0.5 * (eval(1.0) - eval(-1.0));
                    var += d * d;
                }
            }
            var.sqrt()
        };
        Ok(Estimate { value, std_error })
    }
}

impl Serialize for MomentReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Entries<'a>(&'a MomentReport);
        impl Serialize for Entries<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(None)?;
                for (m, e) in self.0.iter() {
                    map.serialize_entry(m.name(), e)?;
                }
                map.end()
            }
        }
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("n_samples", &self.n_samples)?;
        map.serialize_entry("n_batches", &self.n_batches)?;
        map.serialize_entry("moments", &Entries(self))?;
        map.end()
    }
}
