//! Constitutive relations of the 1D strain gradient plasticity model.
//!
//! Units used throughout the crate: lengths in nm, stresses in GPa, time in s.
//! Strains are dimensionless and plastic strain gradients carry 1/nm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor added under the square root of the effective flow rate (1/s).
pub const DEFAULT_RATE_FLOOR: f64 = 1e-8;

/// Number of calibrated entries of the parameter vector.
pub const N_CALIBRATED: usize = 6;

/// Names of the calibrated parameters in their canonical order.
pub const PARAM_NAMES: [&str; N_CALIBRATED] = [
    "l_dis",
    "l_en",
    "yield_strength",
    "h_iso",
    "r_iso",
    "elastic_modulus",
];

/// Material parameters of the SGP model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgpParams {
    /// Dissipative length scale (nm).
    pub l_dis: f64,
    /// Energetic length scale (nm).
    pub l_en: f64,
    /// Initial slip resistance Y (GPa).
    pub yield_strength: f64,
    /// Isotropic hardening modulus h (GPa).
    pub h_iso: f64,
    /// Isotropic hardening exponent r.
    pub r_iso: f64,
    /// Young's modulus E (GPa).
    pub elastic_modulus: f64,
    /// Rate sensitivity exponent m.
    #[serde(default)]
    pub rate_power: f64,
    /// Reference flow rate q (1/s).
    #[serde(default = "default_rate_coeff")]
    pub rate_coeff: f64,
    /// Poisson ratio, only used to derive the shear modulus.
    #[serde(default = "default_poisson")]
    pub poisson: f64,
}

fn default_rate_coeff() -> f64 {
    1.0
}

fn default_poisson() -> f64 {
    0.3
}

impl SgpParams {
    /// The parameter set used for the micro-pillar numerical experiments
    /// (L = 500 nm, l_en = 75 nm, l_dis = 20 nm).
    pub fn reference() -> Self {
        Self {
            l_dis: 20.0,
            l_en: 75.0,
            yield_strength: 0.047,
            h_iso: 0.062,
            r_iso: 298.42,
            elastic_modulus: 128.44,
            rate_power: 0.0,
            rate_coeff: 1.0,
            poisson: 0.3,
        }
    }

    /// Builds a parameter set from the six calibrated entries, with m = 0,
    /// q = 1 and the given Poisson ratio.
    pub fn from_calibrated(theta: &[f64], poisson: f64) -> Self {
        assert_eq!(theta.len(), N_CALIBRATED, "expected {N_CALIBRATED} entries");
        Self {
            l_dis: theta[0],
            l_en: theta[1],
            yield_strength: theta[2],
            h_iso: theta[3],
            r_iso: theta[4],
            elastic_modulus: theta[5],
            rate_power: 0.0,
            rate_coeff: 1.0,
            poisson,
        }
    }

    pub fn calibrated(&self) -> [f64; N_CALIBRATED] {
        [
            self.l_dis,
            self.l_en,
            self.yield_strength,
            self.h_iso,
            self.r_iso,
            self.elastic_modulus,
        ]
    }

    /// Shear modulus μ = E / (2(1 + ν)).
    pub fn shear_modulus(&self) -> f64 {
        self.elastic_modulus / (2.0 * (1.0 + self.poisson))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_dis", self.l_dis),
            ("l_en", self.l_en),
            ("yield_strength", self.yield_strength),
            ("h_iso", self.h_iso),
            ("r_iso", self.r_iso),
            ("elastic_modulus", self.elastic_modulus),
            ("rate_coeff", self.rate_coeff),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.rate_power) {
            return Err(Error::InvalidParams(format!(
                "rate_power must lie in [0, 1], got {}",
                self.rate_power
            )));
        }
        if !(0.0..0.5).contains(&self.poisson) {
            return Err(Error::InvalidParams(format!(
                "poisson must lie in [0, 0.5), got {}",
                self.poisson
            )));
        }
        Ok(())
    }
}

/// Kinematic state at a quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialPointState {
    pub eps_total: f64,
    pub eps_plastic: f64,
    pub eps_plastic_grad: f64,
    pub eps_plastic_prev: f64,
    pub eps_plastic_grad_prev: f64,
    pub dt: f64,
}

impl MaterialPointState {
    /// Backward-Euler plastic strain rate.
    pub fn plastic_rate(&self) -> f64 {
        (self.eps_plastic - self.eps_plastic_prev) / self.dt
    }

    /// Backward-Euler rate of the plastic strain gradient.
    pub fn plastic_grad_rate(&self) -> f64 {
        (self.eps_plastic_grad - self.eps_plastic_grad_prev) / self.dt
    }
}

/// Uniaxial Cauchy stress T = E (ε − εᵖ).
pub fn cauchy_stress(state: &MaterialPointState, p: &SgpParams) -> f64 {
    p.elastic_modulus * (state.eps_total - state.eps_plastic)
}

/// Isotropic-hardening microstress R_en = sign(εᵖ) h (1 − exp(−r|εᵖ|)).
pub fn energetic_microstress_r(state: &MaterialPointState, p: &SgpParams) -> f64 {
    let ep = state.eps_plastic;
    // -expm1(-x) = 1 - exp(-x) without cancellation near zero
    ep.signum() * p.h_iso * -(-p.r_iso * ep.abs()).exp_m1()
}

/// Backstress-generating microstress S_en = μ ℓ_en² ∇εᵖ.
pub fn energetic_microstress_s(state: &MaterialPointState, p: &SgpParams) -> f64 {
    p.shear_modulus() * p.l_en * p.l_en * state.eps_plastic_grad
}

/// Effective nonlocal flow rate with the small-rate floor.
pub fn effective_flow_rate(rate: f64, grad_rate: f64, l_dis: f64, floor: f64) -> f64 {
    (rate * rate + l_dis * l_dis * grad_rate * grad_rate + floor * floor).sqrt()
}

/// Dissipative microstresses (R_dis, S_dis).
pub fn dissipative_microstresses(
    state: &MaterialPointState,
    p: &SgpParams,
    floor: f64,
) -> (f64, f64) {
    let rate = state.plastic_rate();
    let grad_rate = state.plastic_grad_rate();
    let w = effective_flow_rate(rate, grad_rate, p.l_dis, floor);
    let f = flow_factor(w, p);
    (f * rate, f * p.l_dis * p.l_dis * grad_rate)
}

/// Y (ẇ/q)^m / ẇ.
pub(crate) fn flow_factor(w: f64, p: &SgpParams) -> f64 {
    if p.rate_power == 0.0 {
        p.yield_strength / w
    } else {
        p.yield_strength * (w / p.rate_coeff).powf(p.rate_power) / w
    }
}

/// Derivative of [`flow_factor`] with respect to ẇ.
pub(crate) fn flow_factor_derivative(w: f64, p: &SgpParams) -> f64 {
    let m = p.rate_power;
    if m == 0.0 {
        -p.yield_strength / (w * w)
    } else {
        p.yield_strength * (m - 1.0) * p.rate_coeff.powf(-m) * w.powf(m - 2.0)
    }
}
