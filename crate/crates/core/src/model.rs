//! Dimensionless model of the three-mode OPO in the positive-P representation.
//!
//! Time is measured in units of the downconverted damping, `tau = gamma * t`,
//! so the signal and idler decay at rate 1 and the pump at rate `gamma_r`.
//! With `eps = chi / gamma` the Ito equations read
//!
//! ```text
//! d a0  = [gamma_r (mu/eps - a0)  - eps a1  a2 ] dtau
//! d a0+ = [gamma_r (mu/eps - a0+) - eps a1+ a2+] dtau
//! d a1  = [-a1  + eps a2+ a0 ] dtau + sqrt(eps a0)  dW1
//! d a2  = [-a2  + eps a1+ a0 ] dtau + sqrt(eps a0)  dW2
//! d a1+ = [-a1+ + eps a2  a0+] dtau + sqrt(eps a0+) dW1+
//! d a2+ = [-a2+ + eps a1  a0+] dtau + sqrt(eps a0+) dW2+
//! ```
//!
//! and the scaled quadratures are
//!
//! ```text
//! x0 = eps (a0 + a0+)        y0 = -i eps (a0 - a0+)
//! x  = g (a1 + a2+)          y  = -i g (a1 - a2+)
//! x+ = g (a2 + a1+)          y+ = -i g (a2 - a1+)
//! ```
//!
//! so that `x + i y = 2 g a1`, `x - i y = 2 g a2+`, `x+ + i y+ = 2 g a2` and
//! `x+ - i y+ = 2 g a1+`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dimensionless configuration `(mu, gamma_r, g)` with the derived coupling
/// `eps = g * sqrt(2 gamma_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    mu: f64,
    gamma_r: f64,
    g: f64,
    eps: f64,
}

impl ModelParams {
    pub fn new(mu: f64, gamma_r: f64, g: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::Domain(format!("mu must be finite and >= 0, got {mu}")));
        }
        if !gamma_r.is_finite() || gamma_r <= 0.0 {
            return Err(Error::Domain(format!("gamma_r must be finite and > 0, got {gamma_r}")));
        }
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::Domain(format!("g must be finite and > 0, got {g}")));
        }
        Ok(Self { mu, gamma_r, g, eps: g * (2.0 * gamma_r).sqrt() })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma_r(&self) -> f64 {
        self.gamma_r
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// Coupling `chi / gamma`.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Pump amplitude at the deterministic fixed point, `mu / eps`.
    pub fn pump_amplitude(&self) -> f64 {
        self.mu / self.eps
    }

    pub fn is_below_threshold(&self) -> bool {
        self.mu < 1.0
    }

    pub fn require_below_threshold(&self) -> Result<()> {
        if self.is_below_threshold() {
            Ok(())
        } else {
            Err(Error::AboveThreshold(self.mu))
        }
    }

    /// Copy with a different `g`, keeping `mu` and `gamma_r`.
    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(self.mu, self.gamma_r, g)
    }
}

/// Builds the dimensionless parameters from the physical ratio `chi/gamma`,
/// the damping ratio `gamma_r = gamma_0/gamma` and the pump parameter.
pub fn derive_params(chi_over_gamma: f64, gamma_r: f64, mu: f64) -> Result<ModelParams> {
    if !chi_over_gamma.is_finite() || chi_over_gamma <= 0.0 {
        return Err(Error::Domain(format!("chi/gamma must be finite and > 0, got {chi_over_gamma}")));
    }
    if !gamma_r.is_finite() || gamma_r <= 0.0 {
        return Err(Error::Domain(format!("gamma_r must be finite and > 0, got {gamma_r}")));
    }
    let g = chi_over_gamma / (2.0 * gamma_r).sqrt();
    ModelParams::new(mu, gamma_r, g)
}

/// The six independent positive-P amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhaseSpaceState {
    pub a0: Complex64,
    pub a1: Complex64,
    pub a2: Complex64,
    pub a0p: Complex64,
    pub a1p: Complex64,
    pub a2p: Complex64,
}

impl PhaseSpaceState {
    /// Deterministic below-threshold steady state: pump at `mu/eps`, no
    /// downconverted field.
    pub fn fixed_point(params: &ModelParams) -> Self {
        let a0 = Complex64::new(params.pump_amplitude(), 0.0);
        Self { a0, a0p: a0, ..Self::default() }
    }

    /// Components in the order `(a0, a0+, a1, a2, a1+, a2+)`.
    pub fn to_array(&self) -> [Complex64; 6] {
        [self.a0, self.a0p, self.a1, self.a2, self.a1p, self.a2p]
    }

    pub fn from_array(v: [Complex64; 6]) -> Self {
        Self { a0: v[0], a0p: v[1], a1: v[2], a2: v[3], a1p: v[4], a2p: v[5] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest squared modulus over the six components; NaN if any
    /// component is NaN.
    pub fn max_norm_sqr(&self) -> f64 {
        self.to_array().iter().map(|z| z.norm_sqr()).fold(0.0, |m, v| if v > m || v.is_nan() { v } else { m })
    }
}

/// Scaled quadratures of one phase-space point, plus the raw amplitude
/// products `n12 = a1+ a1 a2+ a2` and `n0 = a0+ a0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct QuadratureSample {
    pub x0: Complex64,
    pub y0: Complex64,
    pub x: Complex64,
    pub y: Complex64,
    pub xp: Complex64,
    pub yp: Complex64,
    pub n12: Complex64,
    pub n0: Complex64,
    /// Dimensionless time `tau`.
    pub t: f64,
}

impl QuadratureSample {
    pub fn at(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.x0, self.y0, self.x, self.y, self.xp, self.yp, self.n12, self.n0]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            && self.t.is_finite()
    }
}

pub fn alpha_to_quadratures(state: &PhaseSpaceState, params: &ModelParams) -> QuadratureSample {
    let g = params.g;
    let eps = params.eps;
    QuadratureSample {
        x0: eps * (state.a0 + state.a0p),
        y0: -I * eps * (state.a0 - state.a0p),
        x: g * (state.a1 + state.a2p),
        y: -I * g * (state.a1 - state.a2p),
        xp: g * (state.a2 + state.a1p),
        yp: -I * g * (state.a2 - state.a1p),
        n12: state.a1p * state.a1 * state.a2p * state.a2,
        n0: state.a0p * state.a0,
        t: 0.0,
    }
}

/// Inverse of [`alpha_to_quadratures`] (the product fields are ignored).
pub fn quadratures_to_alpha(sample: &QuadratureSample, params: &ModelParams) -> PhaseSpaceState {
    let two_g = 2.0 * params.g;
    let two_eps = 2.0 * params.eps;
    PhaseSpaceState {
        a0: (sample.x0 + I * sample.y0) / two_eps,
        a0p: (sample.x0 - I * sample.y0) / two_eps,
        a1: (sample.x + I * sample.y) / two_g,
        a2p: (sample.x - I * sample.y) / two_g,
        a2: (sample.xp + I * sample.yp) / two_g,
        a1p: (sample.xp - I * sample.yp) / two_g,
    }
}

/// Drift rates of all six amplitudes and the two multiplicative noise
/// amplitudes `sqrt(eps a0)` (signal/idler) and `sqrt(eps a0+)` (their
/// conjugate partners).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub drift: PhaseSpaceState,
    pub noise_amp: [Complex64; 2],
}

pub fn drift_and_diffusion(state: &PhaseSpaceState, params: &ModelParams) -> DriftDiffusion {
    let eps = params.eps;
    let gr = params.gamma_r;
    let pump = params.pump_amplitude();
    let s = state;
    let drift = PhaseSpaceState {
        a0: gr * (pump - s.a0) - eps * s.a1 * s.a2,
        a0p: gr * (pump - s.a0p) - eps * s.a1p * s.a2p,
        a1: -s.a1 + eps * s.a2p * s.a0,
        a2: -s.a2 + eps * s.a1p * s.a0,
        a1p: -s.a1p + eps * s.a2 * s.a0p,
        a2p: -s.a2p + eps * s.a1 * s.a0p,
    };
    // principal branch; below threshold a0 stays near the positive real axis
    let noise_amp = [principal_sqrt(eps * s.a0), principal_sqrt(eps * s.a0p)];
    DriftDiffusion { drift, noise_amp }
}

/// Principal square root in Cartesian form (no trigonometric calls).
#[inline]
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    if a == 0.0 && b == 0.0 {
        return Complex64::new(0.0, b);
    }
    let r = a.hypot(b);
    if a >= 0.0 {
        let t = (0.5 * (r + a)).sqrt();
        Complex64::new(t, b / (2.0 * t))
    } else {
        let t = (0.5 * (r - a)).sqrt();
        Complex64::new(b.abs() / (2.0 * t), t.copysign(b))
    }
}
