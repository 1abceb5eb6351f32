//! The coarse-graining Gaussian channel.
//!
//! Each mode is attenuated by `x = exp(-|k|^2 sigma^2 / 2)` and receives
//! additive noise `Y = diag(y_phi^2, y_pi^2)`. The resolutions are stored as
//! squared values throughout.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mode::{arcoth, covariance_from_omega, half_i_delta, norm_sq, ModeBlock, ModelParams};
use crate::{Error, Result};

/// Relative slack used when deciding positivity of 2x2 blocks.
pub const POSITIVITY_SLACK: f64 = 1e-12;

type ProfileFn = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// Momentum-dependent squared resolutions `|k|^2 -> (y_phi^2, y_pi^2)`.
#[derive(Clone)]
pub struct ResolutionProfile(Arc<ProfileFn>);

impl ResolutionProfile {
    pub fn new(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        ResolutionProfile(Arc::new(f))
    }
}

impl fmt::Debug for ResolutionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ResolutionProfile(..)")
    }
}

/// Spatial resolution `sigma` and squared field resolutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelParams {
    pub sigma: f64,
    pub yphi2: f64,
    pub ypi2: f64,
    /// Overrides the constant resolutions when present.
    #[serde(skip)]
    pub profile: Option<ResolutionProfile>,
}

impl PartialEq for ChannelParams {
    fn eq(&self, other: &Self) -> bool {
        self.sigma == other.sigma
            && self.yphi2 == other.yphi2
            && self.ypi2 == other.ypi2
            && self.profile.is_none()
            && other.profile.is_none()
    }
}

impl ChannelParams {
    pub fn new(sigma: f64, yphi2: f64, ypi2: f64) -> Result<Self> {
        let ch = ChannelParams { sigma, yphi2, ypi2, profile: None };
        ch.validate()?;
        Ok(ch)
    }

    /// The identity channel: no attenuation, no noise.
    pub fn identity() -> Self {
        ChannelParams { sigma: 0.0, yphi2: 0.0, ypi2: 0.0, profile: None }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("yphi2", self.yphi2), ("ypi2", self.ypi2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        ChannelParams { sigma, ..self.clone() }
    }

    pub fn with_profile(mut self, profile: ResolutionProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    /// Squared resolutions `(y_phi^2, y_pi^2)` at squared momentum `k2`.
    #[inline]
    pub fn resolutions(&self, k2: f64) -> (f64, f64) {
        match &self.profile {
            Some(p) => (p.0)(k2),
            None => (self.yphi2, self.ypi2),
        }
    }

    /// `|k|^2 sigma^2`, the exponent of the squared attenuation.
    #[inline]
    pub fn damping_exponent(&self, k2: f64) -> f64 {
        k2 * self.sigma * self.sigma
    }
}

/// Attenuation `exp(-|k|^2 sigma^2 / 2)`.
pub fn x_factor(k: &[f64], channel: &ChannelParams) -> f64 {
    (-0.5 * channel.damping_exponent(norm_sq(k))).exp()
}

/// Noise block `diag(y_phi^2, y_pi^2)` for constant resolutions.
pub fn y_block(channel: &ChannelParams) -> ModeBlock {
    ModeBlock::diag(channel.yphi2, channel.ypi2)
}

/// Noise block at momentum `k`, honouring a resolution profile.
pub fn y_block_at(k: &[f64], channel: &ChannelParams) -> ModeBlock {
    let (a, b) = channel.resolutions(norm_sq(k));
    ModeBlock::diag(a, b)
}

/// Outcome of the per-mode channel check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelVerdict {
    pub k_norm: f64,
    pub valid: bool,
    /// Smallest eigenvalue of `Y + (1 - x^2) i Delta`; decides validity.
    pub min_eigenvalue: f64,
    /// Smallest eigenvalue of `Y + (1 - x^2) (i/2) Delta`, the bare
    /// complete-positivity matrix.
    pub cp_min_eigenvalue: f64,
}

/// Checks the resolution condition `y_phi^2 y_pi^2 >= (1 - exp(-|k|^2 sigma^2))^2`.
///
/// Far above the resolution scale this becomes `y_phi^2 y_pi^2 >= 1`. The
/// eigenvalue of the weaker complete-positivity matrix is reported alongside.
pub fn validate_channel(k: &[f64], channel: &ChannelParams) -> ChannelVerdict {
    let k2 = norm_sq(k);
    let (a, d) = channel.resolutions(k2);
    let gamma = -(-channel.damping_exponent(k2)).exp_m1();
    let y = ModeBlock::diag(a, d);
    let uncertainty = y + half_i_delta().scale(2.0 * gamma);
    let cp = y + half_i_delta().scale(gamma);
    let [min_eigenvalue, hi] = uncertainty.hermitian_eigenvalues();
    let [cp_min_eigenvalue, _] = cp.hermitian_eigenvalues();
    let slack = POSITIVITY_SLACK * hi.abs().max(gamma);
    ChannelVerdict { k_norm: k2.sqrt(), valid: min_eigenvalue >= -slack, min_eigenvalue, cp_min_eigenvalue }
}

pub(crate) fn require_valid(k: &[f64], channel: &ChannelParams) -> Result<()> {
    let v = validate_channel(k, channel);
    if v.valid {
        Ok(())
    } else {
        Err(Error::InvalidChannel { k_norm: v.k_norm, min_eigenvalue: v.min_eigenvalue })
    }
}

/// Coarse-grained covariance `x^2 A + Y`.
pub fn coarse_covariance_b(k: &[f64], params: &ModelParams, channel: &ChannelParams) -> Result<ModeBlock> {
    let w = crate::mode::checked_omega(k, params)?;
    let k2 = norm_sq(k);
    let x2 = (-channel.damping_exponent(k2)).exp();
    Ok(covariance_from_omega(w, params).scale(x2) + y_block_at(k, channel))
}

/// Squared effective uncertainties `(u^2, v^2)` of a mode with frequency `w`.
pub(crate) fn uv_sq(w: f64, k2: f64, params: &ModelParams, channel: &ChannelParams) -> (f64, f64) {
    let (yphi2, ypi2) = channel.resolutions(k2);
    let t = 0.5 * params.thermal_factor(w) * (-channel.damping_exponent(k2)).exp();
    (yphi2 + t / w, ypi2 + t * w)
}

/// Effective frequency and temperature of a coarse-grained mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveMode {
    pub u_sq: f64,
    pub v_sq: f64,
    pub omega_prime: f64,
    pub beta_prime: f64,
}

impl EffectiveMode {
    /// The large-noise approximation `1 / v^2` of the effective temperature.
    pub fn approx_beta_prime(&self) -> f64 {
        1.0 / self.v_sq
    }

    /// `u v`, the phase-space area of the coarse-grained mode.
    pub fn uv(&self) -> f64 {
        (self.u_sq * self.v_sq).sqrt()
    }
}

/// Effective parameters `u^2`, `v^2`, `omega' = v/u` and
/// `beta' = (u/v) 2 arcoth(2uv)`.
pub fn effective_mode(k: &[f64], params: &ModelParams, channel: &ChannelParams) -> Result<EffectiveMode> {
    let w = crate::mode::checked_omega(k, params)?;
    effective_from_omega(w, norm_sq(k), params, channel)
}

pub(crate) fn effective_from_omega(
    w: f64,
    k2: f64,
    params: &ModelParams,
    channel: &ChannelParams,
) -> Result<EffectiveMode> {
    let (u_sq, v_sq) = uv_sq(w, k2, params, channel);
    let two_uv = 2.0 * (u_sq * v_sq).sqrt();
    if two_uv.is_nan() || two_uv <= 1.0 {
        return Err(Error::PureCoarseState(two_uv));
    }
    Ok(EffectiveMode {
        u_sq,
        v_sq,
        omega_prime: (v_sq / u_sq).sqrt(),
        beta_prime: (u_sq / v_sq).sqrt() * 2.0 * arcoth(two_uv),
    })
}

/// The imaginary-time independent propagator `diag(u^2, v^2)`.
pub fn k_app_block(k: &[f64], params: &ModelParams, channel: &ChannelParams) -> Result<ModeBlock> {
    let w = crate::mode::checked_omega(k, params)?;
    let (u_sq, v_sq) = uv_sq(w, norm_sq(k), params, channel);
    Ok(ModeBlock::diag(u_sq, v_sq))
}
