//! Distinguishability densities and their scaling exponents.
//!
//! The scaling exponent of a perturbation is
//! `alpha = d ln(sigma^d d(V)) / d ln sigma = d + sigma <d ln f / d sigma>_f`,
//! where the average is over the normalized integrand. The mass perturbation
//! is radially symmetric and handled by one-dimensional quadrature; the
//! quartic perturbation lives on `R^{3d}` and is sampled by Metropolis.

mod metropolis;

use serde::{Deserialize, Serialize};

pub use metropolis::{mc_alpha, McConfig};

use crate::perturbation::{Integrand, PerturbationKind};
use crate::quadrature::{adaptive_half_line, unit_sphere_area, Integral};
use crate::{ChannelParams, Error, ModelParams, Result, Statistics};

const QUAD_REL_TOL: f64 = 1e-11;
const QUAD_MAX_SEGMENTS: usize = 4000;

/// A deterministic density value with its relative error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub rel_err: f64,
}

/// Estimated scaling exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub std_err: f64,
    /// Post burn-in Metropolis acceptance; absent for deterministic estimates.
    pub acceptance_rate: Option<f64>,
    pub d_value: Option<f64>,
    pub warnings: Vec<String>,
}

fn v2_kind(stats: Statistics) -> PerturbationKind {
    match stats {
        Statistics::Quantum => PerturbationKind::V2Quantum,
        Statistics::Classical => PerturbationKind::V2Classical,
    }
}

/// Momentum scale used to map the radial half-line onto `[0, 1)`.
fn radial_scale(params: &ModelParams, channel: &ChannelParams) -> f64 {
    if channel.sigma > 0.0 {
        1.0 / channel.sigma
    } else if params.mass > 0.0 {
        params.mass
    } else {
        1.0
    }
}

fn radial_integral(f: &Integrand, weight: impl Fn(&[f64]) -> f64) -> Result<Integral> {
    let d = f.params.dim;
    let scale = radial_scale(&f.params, &f.channel);
    let g = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let mut k = vec![0.0; d];
        k[0] = r;
        let ln = f.ln_value(&k) + (d as f64 - 1.0) * r.ln();
        ln.exp() * weight(&k)
    };
    let r = adaptive_half_line(g, scale, QUAD_REL_TOL, QUAD_MAX_SEGMENTS)?;
    Ok(Integral { value: r.value * unit_sphere_area(d), error: r.error * unit_sphere_area(d), ..r })
}

/// Density of the mass perturbation, `S_{d-1} int_0^inf k^{d-1} f(k) dk`.
pub fn quad_density_v2(params: &ModelParams, channel: &ChannelParams, stats: Statistics) -> Result<DensityEstimate> {
    let f = Integrand::new(v2_kind(stats), params, channel)?;
    let r = radial_integral(&f, |_| 1.0)?;
    Ok(DensityEstimate { value: r.value, rel_err: r.rel_error() })
}

/// Scaling exponent of the mass perturbation from the quadrature of
/// `f` and `f sigma d ln f / d sigma`.
pub fn quad_alpha_v2(params: &ModelParams, channel: &ChannelParams, stats: Statistics) -> Result<AlphaEstimate> {
    let f = Integrand::new(v2_kind(stats), params, channel)?;
    let sigma = channel.sigma;
    let norm = radial_integral(&f, |_| 1.0)?;
    let moment = radial_integral(&f, |k| sigma * f.dln_dsigma(k))?;
    let mean = moment.value / norm.value;
    let std_err = mean.abs() * (norm.rel_error() + moment.rel_error());
    Ok(AlphaEstimate {
        alpha: params.dim as f64 + mean,
        std_err,
        acceptance_rate: None,
        d_value: Some(norm.value),
        warnings: Vec::new(),
    })
}

/// Scaling exponent of the mass perturbation by central differences of
/// `ln(sigma^d d(V))` in `ln sigma`, Richardson-extrapolated over the steps
/// `rel_step` and `rel_step / 2`.
pub fn fd_alpha_v2(
    params: &ModelParams,
    channel: &ChannelParams,
    stats: Statistics,
    sigma: f64,
    rel_step: f64,
) -> Result<AlphaEstimate> {
    if !(rel_step > 1e-6 && rel_step < 0.1) {
        return Err(Error::InvalidParameter(format!("rel_step must lie in (1e-6, 0.1), got {rel_step}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let d = params.dim as f64;
    let mut worst_rel = 0.0f64;
    let mut ln_delta = |s: f64| -> Result<f64> {
        let est = quad_density_v2(params, &channel.with_sigma(s), stats)?;
        worst_rel = worst_rel.max(est.rel_err);
        Ok(d * s.ln() + est.value.ln())
    };
    let mut slope =
        |h: f64| -> Result<f64> { Ok((ln_delta(sigma * h.exp())? - ln_delta(sigma * (-h).exp())?) / (2.0 * h)) };
    let coarse = slope(rel_step)?;
    let fine = slope(0.5 * rel_step)?;
    let alpha = (4.0 * fine - coarse) / 3.0;
    let center = quad_density_v2(params, &channel.with_sigma(sigma), stats)?;
    let std_err = (fine - coarse).abs() / 3.0 + 2.0 * (worst_rel.max(center.rel_err)) / rel_step;
    Ok(AlphaEstimate { alpha, std_err, acceptance_rate: None, d_value: Some(center.value), warnings: Vec::new() })
}

/// How each point of a sweep is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethod {
    MonteCarlo,
    FiniteDifference,
}

/// One point of an exponent sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sigma: f64,
    pub seed: u64,
    pub estimate: Result<AlphaEstimate>,
}

/// Relative step of the finite-difference sweep.
pub const SWEEP_FD_STEP: f64 = 0.01;

/// Evaluates the exponent at every `sigma`; point `i` uses seed `cfg.seed ^ i`.
///
/// Failures are reported per point and do not stop the sweep.
pub fn alpha_sweep(
    kind: PerturbationKind,
    params: &ModelParams,
    channel: &ChannelParams,
    sigmas: &[f64],
    cfg: &McConfig,
    method: SweepMethod,
) -> Result<Vec<SweepPoint>> {
    if sigmas.iter().any(|s| s.is_nan()) || sigmas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("sigmas must be sorted ascending".into()));
    }
    let stats = match (method, kind) {
        (SweepMethod::FiniteDifference, PerturbationKind::V2Quantum) => Some(Statistics::Quantum),
        (SweepMethod::FiniteDifference, PerturbationKind::V2Classical) => Some(Statistics::Classical),
        (SweepMethod::FiniteDifference, other) => return Err(Error::UnsupportedPerturbation(other.name())),
        (SweepMethod::MonteCarlo, _) => None,
    };
    Ok(sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let seed = cfg.seed ^ i as u64;
            let ch = channel.with_sigma(sigma);
            let estimate = match stats {
                Some(st) => fd_alpha_v2(params, &ch, st, sigma, SWEEP_FD_STEP),
                None => mc_alpha(kind, params, &ch, &McConfig { seed, ..cfg.clone() }),
            };
            SweepPoint { sigma, seed, estimate }
        })
        .collect())
}
