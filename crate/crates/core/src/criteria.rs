//! Nonclassicality and entanglement verdicts from moment data.

use num_complex::Complex64;
use serde::Serialize;

use crate::analytic::TripleCorrelations;
use crate::error::{Error, Result};
use crate::moments::{Estimate, Moment, MomentReport};

/// Default number of standard errors required for a verdict.
pub const DEFAULT_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violated,
    Satisfied,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Violated => "violated",
            Verdict::Satisfied => "satisfied",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Classifies a signed difference `rhs - lhs` measured in standard errors.
    pub fn from_significance(significance: f64, k: f64) -> Self {
        if significance > k {
            Verdict::Violated
        } else if significance < -k {
            Verdict::Satisfied
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Which mode is singled out in `<|A|^2><|B|^2> >= |<A B>|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    /// `<da1+ da1 da2+ da2><da0+ da0> >= |<da1 da2 da0>|^2`.
    PumpIsolated,
    /// `<da0+ da0 da2+ da2><da1+ da1> >= |<da1 da2 da0>|^2`.
    SignalIsolated,
    /// `<da0+ da0 da1+ da1><da2+ da2> >= |<da1 da2 da0>|^2`.
    IdlerIsolated,
}

impl Partition {
    pub const ALL: [Partition; 3] =
        [Partition::PumpIsolated, Partition::SignalIsolated, Partition::IdlerIsolated];

    pub fn name(self) -> &'static str {
        match self {
            Partition::PumpIsolated => "cs_0|12",
            Partition::SignalIsolated => "cs_1|02",
            Partition::IdlerIsolated => "cs_2|01",
        }
    }

    /// The pair-product moment and the single-mode occupation of the LHS.
    fn lhs_moments(self) -> (Moment, Moment) {
        match self {
            Partition::PumpIsolated => (Moment::A1pA1A2pA2, Moment::A0pA0),
            Partition::SignalIsolated => (Moment::A0pA0A2pA2, Moment::A1pA1),
            Partition::IdlerIsolated => (Moment::A0pA0A1pA1, Moment::A2pA2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub name: String,
    pub partition: Partition,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `rhs - lhs` with its own standard error (correlations included).
    pub diff: Estimate,
    pub ratio: f64,
    /// `(rhs - lhs) / se(rhs - lhs)`.
    pub significance: f64,
    pub sigma_threshold: f64,
    pub verdict: Verdict,
    /// Minimizer of `<|A - lambda* B*|^2>` with `A = da1 da2` and `B` the
    /// isolated mode, i.e. `<A+ B+> / <B+ B>`; a diagnostic only.
    pub lambda_opt: Complex64,
    /// For the pump partition: the rhs rebuilt from the quadrature triples,
    /// `s^2 / (128 g^6 gamma_r)`.
    pub rhs_from_triples: Option<Estimate>,
}

/// Cauchy-Schwarz test on centered amplitude fluctuations. The rhs uses
/// `<da1 da2 da0><da1+ da2+ da0+>`, which equals `|<da1 da2 da0>|^2` for
/// every ensemble whose conjugate variables are true complex conjugates.
pub fn cs_test(report: &MomentReport, partition: Partition, k: f64) -> Result<CriterionReport> {
    let (pair, single) = partition.lhs_moments();
    let (a3, a3p) = (Moment::A1A2A0, Moment::A1pA2pA0p);
    let needed = [pair, single, a3, a3p];

    let lhs_fn = |m: &dyn Fn(Moment) -> Complex64| m(pair).re * m(single).re;
    let rhs_fn = |m: &dyn Fn(Moment) -> Complex64| (m(a3) * m(a3p)).re;
    let lhs = report.derive(&needed, lhs_fn)?;
    let rhs = report.derive(&needed, rhs_fn)?;
    let diff = report.derive(&needed, |m| rhs_fn(m) - lhs_fn(m))?;
    if lhs.value == 0.0 && rhs.value == 0.0 {
        return Err(Error::NoSignal);
    }

    let significance = diff.significance();
    let single_value = report.value(single)?;
    let lambda_opt = if single_value.norm() > 0.0 {
        report.value(a3p)? / single_value
    } else {
        Complex64::new(f64::NAN, f64::NAN)
    };

    let rhs_from_triples = match partition {
        Partition::PumpIsolated => {
            let triples = [Moment::T1, Moment::T2, Moment::T3, Moment::T4];
            if triples.iter().all(|&m| report.contains(m)) {
                let scale = 128.0 * report.g.powi(6) * report.gamma_r;
                Some(report.derive(&triples, |m| {
                    let s = -m(Moment::T1).re + m(Moment::T2).re + m(Moment::T3).re + m(Moment::T4).re;
                    s * s / scale
                })?)
            } else {
                None
            }
        }
        _ => None,
    };

    Ok(CriterionReport {
        name: partition.name().to_string(),
        partition,
        lhs,
        rhs,
        diff,
        ratio: rhs.value / lhs.value,
        significance,
        sigma_threshold: k,
        verdict: Verdict::from_significance(significance, k),
        lambda_opt,
        rhs_from_triples,
    })
}

/// Runs [`cs_test`] for every partition whose moments are present.
pub fn cs_tests(report: &MomentReport, k: f64) -> Vec<CriterionReport> {
    Partition::ALL.iter().filter_map(|&p| cs_test(report, p, k).ok()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessVerdict {
    /// All four triples nonzero: no state of the form `sum p rho_k (x) rho_lm`
    /// reproduces the data. Sufficient, not necessary, for tripartite
    /// entanglement.
    SeparableFormsExcluded,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub verdict: WitnessVerdict,
    pub significances: [f64; 4],
    pub sigma_threshold: f64,
    pub message: String,
}

pub fn separability_witness(
    triples: &TripleCorrelations,
    std_errors: Option<&[f64; 4]>,
    k: f64,
) -> Result<WitnessReport> {
    let se = std_errors.ok_or(Error::MissingUncertainty)?;
    let values = triples.as_array();
    let significances: [f64; 4] =
        std::array::from_fn(|i| Estimate { value: values[i], std_error: se[i] }.significance());
    let all_nonzero = significances.iter().all(|s| s.abs() >= k);
    let (verdict, message) = if all_nonzero {
        (
            WitnessVerdict::SeparableFormsExcluded,
            "all bipartite-separable forms excluded (sufficient condition met)".to_string(),
        )
    } else {
        (
            WitnessVerdict::Inconclusive,
            "inconclusive: at least one triple correlation is consistent with zero".to_string(),
        )
    };
    Ok(WitnessReport { verdict, significances, sigma_threshold: k, message })
}

/// Reads `t1..t4` and their standard errors from a report.
pub fn triples_from_report(report: &MomentReport) -> Result<(TripleCorrelations, [f64; 4])> {
    let [t1, t2, t3, t4] = [
        report.real(Moment::T1)?,
        report.real(Moment::T2)?,
        report.real(Moment::T3)?,
        report.real(Moment::T4)?,
    ];
    Ok((
        TripleCorrelations { t1: t1.value, t2: t2.value, t3: t3.value, t4: t4.value },
        [t1.std_error, t2.std_error, t3.std_error, t4.std_error],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEntry {
    pub name: &'static str,
    pub estimate: Estimate,
    pub significance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAudit {
    pub entries: Vec<PairEntry>,
    /// True when every pump/downconverted covariance is within `k` errors
    /// of zero.
    pub pairs_vanish: bool,
    pub sigma_threshold: f64,
    pub message: String,
}

pub fn pair_audit(report: &MomentReport, k: f64) -> Result<PairAudit> {
    let entries = [Moment::X0X, Moment::X0Y, Moment::Y0X, Moment::Y0Y]
        .iter()
        .map(|&m| {
            let estimate = report.real(m)?;
            Ok(PairEntry { name: m.name(), estimate, significance: estimate.significance() })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs_vanish = entries.iter().all(|e| e.significance.abs() <= k);
    let message = if pairs_vanish {
        "pump/downconverted pair correlations vanish; pair-based entanglement criteria cannot detect these correlations"
    } else {
        "pump/downconverted pair correlations present"
    }
    .to_string();
    Ok(PairAudit { entries, pairs_vanish, sigma_threshold: k, message })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OddMomentReport {
    pub third_moment: Estimate,
    pub significance: f64,
    pub non_gaussian: bool,
    pub message: String,
}

pub fn pump_odd_moment(report: &MomentReport, k: f64) -> Result<OddMomentReport> {
    let third_moment = report.real(Moment::X0Cubed)?;
    let significance = third_moment.significance();
    let non_gaussian = significance.abs() >= k;
    let message = if non_gaussian {
        "non-Gaussian pump fluctuations"
    } else {
        "pump third moment consistent with zero"
    }
    .to_string();
    Ok(OddMomentReport { third_moment, significance, non_gaussian, message })
}
