//! Closed-form perturbative predictions below threshold.
//!
//! All moment formulas are of order `g^4` in the scaled quadratures. The
//! Cauchy-Schwarz sides are reported in quadrature normalization; the
//! amplitude-normalized sides differ from them by the common factor
//! `1 / (128 g^6 gamma_r)`, so the ratio depends on `(mu, gamma_r)` only.

use log::warn;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::model::ModelParams;
use crate::moments::{Moment, MomentEstimate, MomentReport};

/// Above this pump parameter the expansion in `g` is not trusted.
pub const NEAR_THRESHOLD_MU: f64 = 0.9;

fn check_validity(params: &ModelParams) -> Result<()> {
    params.require_below_threshold()?;
    if params.mu() > NEAR_THRESHOLD_MU {
        warn!("near-threshold: perturbative oracle unreliable (mu = {})", params.mu());
    }
    Ok(())
}

/// Deterministic steady-state quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZerothOrder {
    pub x0: f64,
    pub y0: f64,
    pub x: f64,
    pub y: f64,
    pub xp: f64,
    pub yp: f64,
}

pub fn zeroth_order(params: &ModelParams) -> Result<ZerothOrder> {
    check_validity(params)?;
    Ok(ZerothOrder { x0: 2.0 * params.mu(), y0: 0.0, x: 0.0, y: 0.0, xp: 0.0, yp: 0.0 })
}

/// The four non-vanishing pump/signal/idler triple correlations:
/// `t1 = <dx dx+ dx0>`, `t2 = <dy dy+ dx0>`, `t3 = <dy dx+ dy0>`,
/// `t4 = <dx dy+ dy0>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripleCorrelations {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl TripleCorrelations {
    /// `-t1 + t2 + t3 + t4`; `|<da1 da2 da0>| = s / (8 g^2 eps)`.
    pub fn s(&self) -> f64 {
        -self.t1 + self.t2 + self.t3 + self.t4
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t1, self.t2, self.t3, self.t4]
    }
}

pub fn triple_correlations(params: &ModelParams) -> Result<TripleCorrelations> {
    check_validity(params)?;
    let (mu, gr) = (params.mu(), params.gamma_r());
    let g4 = params.g().powi(4);
    let t1 = -g4 * (mu / (1.0 - mu)).powi(2) * (2.0 / (1.0 + mu) + gr / (gr + 2.0 * (1.0 - mu)));
    let t2 = g4 * (mu / (1.0 + mu)).powi(2) * (2.0 / (1.0 - mu) + gr / (gr + 2.0 * (1.0 + mu)));
    let t3 = g4 * (mu * mu / (1.0 - mu * mu)) * (gr / (2.0 + gr));
    Ok(TripleCorrelations { t1, t2, t3, t4: t3 })
}

/// `q4 = <(dx^2 + dy^2)(dx+^2 + dy+^2)>`, `vx0 = <dx0^2>`, and `vy0`, which
/// the perturbative treatment drops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMoments {
    pub q4: f64,
    pub vx0: f64,
    pub vy0: f64,
}

pub fn second_moments(params: &ModelParams) -> Result<SecondMoments> {
    check_validity(params)?;
    let (mu, gr) = (params.mu(), params.gamma_r());
    let g4 = params.g().powi(4);
    let q4 = 2.0 * g4 * mu * mu * (1.0 / (1.0 - mu).powi(2) + 1.0 / (1.0 + mu).powi(2));
    let lorentz = gr * gr / (gr * gr + 4.0 * (1.0 - mu).powi(2));
    let vx0 = g4
        * (mu / (1.0 - mu)).powi(2)
        * ((2.0 / (1.0 + mu)).powi(2) + (1.0 + ((1.0 - mu) / (1.0 + mu)).powi(2)) * lorentz);
    Ok(SecondMoments { q4, vx0, vy0: 0.0 })
}

/// Both sides of `<a1+ a1 a2+ a2><a0+ a0> >= |<a1 a2 a0>|^2` for the
/// fluctuations, in quadrature normalization: `lhs = q4 vx0`, `rhs = s^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CsSides {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs / lhs`; `None` when both sides vanish.
    pub ratio: Option<f64>,
}

impl CsSides {
    pub fn violated(&self) -> Option<bool> {
        self.ratio.map(|r| r > 1.0)
    }
}

pub fn cs_sides_analytic(params: &ModelParams) -> Result<CsSides> {
    let triples = triple_correlations(params)?;
    let second = second_moments(params)?;
    let lhs = second.q4 * second.vx0;
    let rhs = triples.s().powi(2);
    let ratio = if lhs == 0.0 && rhs == 0.0 { None } else { Some(rhs / lhs) };
    Ok(CsSides { lhs, rhs, ratio })
}

/// Stationary covariances of the linearized downconverted quadratures:
/// `<dx dx+> = g^2 mu/(1-mu)` and `<dy dy+> = -g^2 mu/(1+mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearCovariances {
    pub xx: f64,
    pub yy: f64,
}

pub fn ou_covariances(params: &ModelParams) -> Result<LinearCovariances> {
    check_validity(params)?;
    let (mu, g2) = (params.mu(), params.g().powi(2));
    Ok(LinearCovariances { xx: g2 * mu / (1.0 - mu), yy: -g2 * mu / (1.0 + mu) })
}

/// Leading-order moments obtained by driving the slaved pump fluctuation
/// `dx0 = -gamma_r * int e^{-gamma_r s} (x x+ - y y+)` with the Gaussian
/// Ornstein-Uhlenbeck downconverted quadratures and pairing exactly.
///
/// These are what the full stochastic equations converge to as `g -> 0`.
/// They agree with [`triple_correlations`] for `t3`, `t4` and with
/// [`second_moments`] for `q4`, but not for `t1`, `t2`, `vx0`; they also give
/// a nonzero `vy0 = -2 t3`. Used as a diagnostic next to the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearResponse {
    pub triples: TripleCorrelations,
    pub q4: f64,
    pub vx0: f64,
    pub vy0: f64,
    /// Pump mean including depletion, `2 mu - g^2 (mu/(1-mu) + mu/(1+mu))`.
    pub mean_x0: f64,
}

impl LinearResponse {
    /// Cauchy-Schwarz ratio in amplitude form, with `<da0+ da0>` taken from
    /// `vx0 + vy0`.
    pub fn amplitude_cs_ratio(&self) -> Option<f64> {
        let lhs = self.q4 * (self.vx0 + self.vy0);
        let rhs = self.triples.s().powi(2);
        (lhs != 0.0 || rhs != 0.0).then(|| rhs / lhs)
    }
}

pub fn linear_response(params: &ModelParams) -> Result<LinearResponse> {
    let cov = ou_covariances(params)?;
    let (mu, gr) = (params.mu(), params.gamma_r());
    let (cx, cy) = (cov.xx, cov.yy);
    // each OU pair decays at twice its quadrature rate; the pump filter
    // turns exp(-a s) into gamma_r / (gamma_r + a)
    let t1 = -cx * cx * gr / (gr + 2.0 * (1.0 - mu));
    let t2 = cy * cy * gr / (gr + 2.0 * (1.0 + mu));
    let t3 = -cx * cy * gr / (gr + 2.0);
    Ok(LinearResponse {
        triples: TripleCorrelations { t1, t2, t3, t4: t3 },
        q4: 2.0 * (cx * cx + cy * cy),
        vx0: -t1 + t2,
        vy0: -2.0 * t3,
        mean_x0: 2.0 * mu - (cx - cy),
    })
}

/// Analytic predictions packaged as an exact [`MomentReport`], with the
/// amplitude moments obtained through the quadrature mapping:
/// `<da1+ da1 da2+ da2> = q4 / (16 g^4)`, `<da0+ da0> = (vx0 + vy0) / (8 gamma_r g^2)`
/// and `<da1 da2 da0> = <da1+ da2+ da0+> = -s / (8 g^2 eps)`.
pub fn analytic_report(params: &ModelParams) -> Result<MomentReport> {
    let triples = triple_correlations(params)?;
    let second = second_moments(params)?;
    let cov = ou_covariances(params)?;
    let (g, gr, eps) = (params.g(), params.gamma_r(), params.eps());
    let exact = |v: f64| MomentEstimate::exact(Complex64::new(v, 0.0), 0.0);
    let amp3 = -triples.s() / (8.0 * g * g * eps);
    Ok(MomentReport::from_estimates(
        g,
        gr,
        [
            (Moment::MeanX0, exact(2.0 * params.mu())),
            (Moment::T1, exact(triples.t1)),
            (Moment::T2, exact(triples.t2)),
            (Moment::T3, exact(triples.t3)),
            (Moment::T4, exact(triples.t4)),
            (Moment::Q4, exact(second.q4)),
            (Moment::VarX0, exact(second.vx0)),
            (Moment::VarY0, exact(second.vy0)),
            (Moment::XXp, exact(cov.xx)),
            (Moment::YYp, exact(cov.yy)),
            (Moment::A1pA1A2pA2, exact(second.q4 / (16.0 * g.powi(4)))),
            (Moment::A0pA0, exact((second.vx0 + second.vy0) / (8.0 * gr * g * g))),
            (Moment::A1A2A0, exact(amp3)),
            (Moment::A1pA2pA0p, exact(amp3)),
        ],
    ))
}
