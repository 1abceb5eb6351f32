//! Integrand densities of the mass and quartic perturbations.
//!
//! A density `d(V)` is the momentum integral of a positive function `f(K)`.
//! Integrands are evaluated in the log domain: every leg contributes the two
//! weights
//!
//! * `a = exp(-k^2 sigma^2) / (u^2 omega^2) = 1 / (omega^2 y_phi^2 e^{k^2 sigma^2} + omega c / 2)`
//! * `g = exp(-k^2 sigma^2) / v^2 = 1 / (y_pi^2 e^{k^2 sigma^2} + omega c / 2)`
//!
//! with `c = coth(beta omega / 2)`, which keeps the integrands finite for
//! arbitrarily large `|k| sigma`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mode::norm_sq;
use crate::{Beta, ChannelParams, Error, ModelParams, Result};

/// The perturbations whose distinguishability can be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    V2Quantum,
    V4Quantum,
    V2Classical,
    V4Classical,
    PhiK,
    PiK,
}

impl PerturbationKind {
    /// Number of field legs of the perturbation.
    pub fn legs(&self) -> usize {
        match self {
            PerturbationKind::V2Quantum | PerturbationKind::V2Classical => 2,
            PerturbationKind::V4Quantum | PerturbationKind::V4Classical => 4,
            PerturbationKind::PhiK | PerturbationKind::PiK => 1,
        }
    }

    /// Number of free momentum vectors after momentum conservation.
    pub fn free_vectors(&self) -> usize {
        match self {
            PerturbationKind::V4Quantum | PerturbationKind::V4Classical => 3,
            _ => 1,
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, PerturbationKind::V2Classical | PerturbationKind::V4Classical)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PerturbationKind::V2Quantum => "v2",
            PerturbationKind::V4Quantum => "v4",
            PerturbationKind::V2Classical => "v2-classical",
            PerturbationKind::V4Classical => "v4-classical",
            PerturbationKind::PhiK => "phik",
            PerturbationKind::PiK => "pik",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v2" => Ok(PerturbationKind::V2Quantum),
            "v4" => Ok(PerturbationKind::V4Quantum),
            "v2-classical" => Ok(PerturbationKind::V2Classical),
            "v4-classical" => Ok(PerturbationKind::V4Classical),
            "phik" => Ok(PerturbationKind::PhiK),
            "pik" => Ok(PerturbationKind::PiK),
            _ => Err(Error::InvalidParameter(format!("unknown perturbation {s:?}"))),
        }
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log-weights of one leg and their sigma-derivatives.
#[derive(Debug, Clone, Copy)]
struct Leg {
    omega: f64,
    ln_a: f64,
    ln_g: f64,
    d_ln_a: f64,
    d_ln_g: f64,
}

/// Positive integrand `f(K)` over the free momenta of a perturbation.
///
/// The argument of [`Integrand::ln_value`] is the flattened list of free
/// momenta, `free_vectors * dim` numbers; the last quartic leg is
/// `k4 = -(k1 + k2 + k3)`.
#[derive(Debug, Clone)]
pub struct Integrand {
    pub kind: PerturbationKind,
    pub params: ModelParams,
    pub channel: ChannelParams,
    beta: f64,
}

impl Integrand {
    pub fn new(kind: PerturbationKind, params: &ModelParams, channel: &ChannelParams) -> Result<Self> {
        params.validate()?;
        channel.validate()?;
        let beta = match (kind, params.beta) {
            (PerturbationKind::V2Quantum | PerturbationKind::V4Quantum, Beta::Finite(_)) => {
                return Err(Error::ZeroTemperatureRequired)
            }
            (PerturbationKind::V2Classical | PerturbationKind::V4Classical, Beta::Infinite) => {
                return Err(Error::FiniteTemperatureRequired)
            }
            (_, Beta::Finite(b)) => b,
            (_, Beta::Infinite) => f64::INFINITY,
        };
        Ok(Integrand { kind, params: *params, channel: channel.clone(), beta })
    }

    /// Dimension of the integration domain.
    pub fn free_dim(&self) -> usize {
        self.kind.free_vectors() * self.params.dim
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Integrand { channel: self.channel.with_sigma(sigma), ..self.clone() }
    }

    pub fn value(&self, k: &[f64]) -> f64 {
        self.ln_value(k).exp()
    }

    pub fn ln_value(&self, k: &[f64]) -> f64 {
        self.eval(k, false).0
    }

    /// `d ln f / d sigma` at fixed momenta.
    pub fn dln_dsigma(&self, k: &[f64]) -> f64 {
        self.eval(k, true).1
    }

    /// `ln f` together with `d ln f / d sigma`.
    pub fn ln_value_and_derivative(&self, k: &[f64]) -> (f64, f64) {
        self.eval(k, true)
    }

    fn k2_of(&self, k: &[f64], leg: usize) -> f64 {
        let d = self.params.dim;
        if leg < self.kind.free_vectors() {
            norm_sq(&k[leg * d..(leg + 1) * d])
        } else {
            (0..d).map(|i| (0..3).map(|j| k[j * d + i]).sum::<f64>().powi(2)).sum()
        }
    }

    fn quantum_leg(&self, k2: f64, deriv: bool) -> Leg {
        let m = self.params.mass;
        let w = (k2 + m * m).sqrt();
        let c = self.params.thermal_factor(w);
        let x = self.channel.damping_exponent(k2);
        let (yphi2, ypi2) = self.channel.resolutions(k2);
        let ln_half = (0.5 * w * c).ln();
        let ln_phi = ln_or_neg_inf(w * w * yphi2) + x;
        let ln_pi = ln_or_neg_inf(ypi2) + x;
        let ln_a = -log_add_exp(ln_phi, ln_half);
        let ln_g = -log_add_exp(ln_pi, ln_half);
        let (d_ln_a, d_ln_g) = if deriv {
            let s = -2.0 * k2 * self.channel.sigma;
            (s * logistic(ln_phi - ln_half), s * logistic(ln_pi - ln_half))
        } else {
            (0.0, 0.0)
        };
        Leg { omega: w, ln_a, ln_g, d_ln_a, d_ln_g }
    }

    /// `ln (phi, P phi)` of the classical field and its sigma-derivative.
    fn classical_leg(&self, k2: f64, deriv: bool) -> (f64, f64) {
        let m = self.params.mass;
        let w2 = k2 + m * m;
        let b = self.beta;
        let (yphi2, _) = self.channel.resolutions(k2);
        let x = self.channel.damping_exponent(k2);
        let ln_base = (b * w2).ln();
        let ln_noise = ln_or_neg_inf(b * b * w2 * w2 * yphi2) + x;
        let ln_p = -log_add_exp(ln_base, ln_noise);
        let d = if deriv { -2.0 * k2 * self.channel.sigma * logistic(ln_noise - ln_base) } else { 0.0 };
        (ln_p, d)
    }

    fn eval(&self, k: &[f64], deriv: bool) -> (f64, f64) {
        debug_assert_eq!(k.len(), self.free_dim());
        match self.kind {
            PerturbationKind::PhiK | PerturbationKind::PiK => {
                let leg = self.quantum_leg(norm_sq(k), deriv);
                if self.kind == PerturbationKind::PhiK {
                    (leg.ln_a - 2.0 * leg.omega.ln(), leg.d_ln_a)
                } else {
                    (leg.ln_g, leg.d_ln_g)
                }
            }
            PerturbationKind::V2Quantum => {
                let leg = self.quantum_leg(norm_sq(k), deriv);
                let (ta, tg) = (2.0 * leg.ln_a, 2.0 * leg.ln_g);
                let ln_sum = log_add_exp(ta, tg);
                let ln_f = ln_sum - (32.0 * leg.omega * leg.omega).ln();
                if !deriv {
                    return (ln_f, 0.0);
                }
                let wa = (ta - ln_sum).exp();
                let wg = (tg - ln_sum).exp();
                (ln_f, 2.0 * (wa * leg.d_ln_a + wg * leg.d_ln_g))
            }
            PerturbationKind::V4Quantum => self.eval_v4(k, deriv),
            PerturbationKind::V2Classical => {
                let (ln_p, d) = self.classical_leg(norm_sq(k), deriv);
                (2.0 * ln_p - std::f64::consts::LN_2, 2.0 * d)
            }
            PerturbationKind::V4Classical => {
                let mut ln_f = -(24f64).ln();
                let mut d = 0.0;
                for leg in 0..4 {
                    let (ln_p, dp) = self.classical_leg(self.k2_of(k, leg), deriv);
                    ln_f += ln_p;
                    d += dp;
                }
                (ln_f, d)
            }
        }
    }

    fn eval_v4(&self, k: &[f64], deriv: bool) -> (f64, f64) {
        let legs: [Leg; 4] = std::array::from_fn(|i| self.quantum_leg(self.k2_of(k, i), deriv));
        let total_omega: f64 = legs.iter().map(|l| l.omega).sum();
        // the eight even subsets of legs carrying the phi weight
        let mut ln_terms = [0.0; 8];
        let mut d_terms = [0.0; 8];
        for (slot, mask) in EVEN_MASKS.iter().enumerate() {
            for (i, leg) in legs.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    ln_terms[slot] += leg.ln_a;
                    d_terms[slot] += leg.d_ln_a;
                } else {
                    ln_terms[slot] += leg.ln_g;
                    d_terms[slot] += leg.d_ln_g;
                }
            }
        }
        let hi = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: [f64; 8] = std::array::from_fn(|i| (ln_terms[i] - hi).exp());
        let norm: f64 = weights.iter().sum();
        let ln_f = hi + norm.ln() - V4_LN_PREFACTOR - 2.0 * total_omega.ln();
        let d = if deriv { weights.iter().zip(&d_terms).map(|(w, d)| w * d).sum::<f64>() / norm } else { 0.0 };
        (ln_f, d)
    }
}

/// Bit masks of the leg subsets with an even number of members.
const EVEN_MASKS: [u8; 8] = [0b0000, 0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100, 0b1111];

/// `ln(4! * 2^6)`.
const V4_LN_PREFACTOR: f64 = 7.336_936_913_707_618;

/// Distinguishability of a single linear observable `phi_k` or `pi_k`:
/// `exp(-k^2 sigma^2) / (omega^4 u^2)` or `exp(-k^2 sigma^2) / v^2`.
pub fn dist_linear(k: &[f64], params: &ModelParams, channel: &ChannelParams, which: PerturbationKind) -> Result<f64> {
    if !matches!(which, PerturbationKind::PhiK | PerturbationKind::PiK) {
        return Err(Error::UnsupportedPerturbation(which.name()));
    }
    crate::mode::checked_omega(k, params)?;
    Ok(Integrand::new(which, params, channel)?.value(k))
}

/// `d ln f / d sigma` of the integrand of `kind` at momenta `k`.
pub fn log_sigma_derivative(
    kind: PerturbationKind,
    k: &[f64],
    params: &ModelParams,
    channel: &ChannelParams,
) -> Result<f64> {
    let f = Integrand::new(kind, params, channel)?;
    if k.len() != f.free_dim() {
        return Err(Error::InvalidParameter(format!("expected {} momentum components, got {}", f.free_dim(), k.len())));
    }
    Ok(f.dln_dsigma(k))
}
