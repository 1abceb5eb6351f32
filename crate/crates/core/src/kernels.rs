//! Metric kernels of the coarse-grained distinguishability.
//!
//! A kernel `P` is a 2x2 block per mode such that the coarse-grained metric
//! between two linear perturbations is obtained by sandwiching `P` between
//! imaginary-time rotations. Multi-mode sectors at zero temperature are dense
//! `2^n x 2^n` matrices on the tensor basis `(phi_k1, pi_k1) x ... x (phi_kn, pi_kn)`,
//! with the first mode as the most significant index.
//!
//! Zero-temperature sector blocks carry the limit `beta * (...)`: the
//! imaginary-time average of the propagator is multiplied by `beta` so that it
//! stays finite as `beta -> inf`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_from_omega, require_valid, uv_sq};
use crate::mode::{
    c, checked_omega, covariance_from_omega, ground_propagator, ground_propagator_conj, norm_sq, propagator, rotation,
    thermal_propagator, Beta, ModeBlock, ModelParams, C64,
};
use crate::quadrature::gauss_legendre;
use crate::{ChannelParams, Error, Result};

/// Largest number of modes in a materialized sector.
pub const MAX_SECTOR_MODES: usize = 8;

const GL_START_NODES: usize = 32;
const GL_MAX_NODES: usize = 4096;
const GL_REL_TOL: f64 = 1e-9;

/// Which contractive metric a kernel or block represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Chi2,
    Fisher,
    LargeNoise,
    RawBures,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Chi2 => "chi2",
            MetricKind::Fisher => "fisher",
            MetricKind::LargeNoise => "large-noise",
            MetricKind::RawBures => "raw-bures",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi2" => Ok(MetricKind::Chi2),
            "fisher" => Ok(MetricKind::Fisher),
            "large-noise" => Ok(MetricKind::LargeNoise),
            "raw-bures" => Ok(MetricKind::RawBures),
            _ => Err(Error::InvalidParameter(format!("unknown metric {s:?}"))),
        }
    }
}

/// Quantum field or its classical (commuting) counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Quantum,
    Classical,
}

/// A per-mode kernel together with the metric it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBlock {
    pub block: ModeBlock,
    pub kind: MetricKind,
}

/// A dense operator on the tensor basis of a sector of distinct modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBlock {
    pub modes: Vec<Vec<f64>>,
    pub matrix: DMatrix<C64>,
}

impl SectorBlock {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest entrywise deviation from hermiticity, relative to the largest entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let diff = &self.matrix - self.matrix.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
    }
}

fn classical_a(w: f64, beta: f64) -> ModeBlock {
    ModeBlock::diag(1.0 / (beta * w * w), 1.0 / beta)
}

fn attenuation_sq(k: &[f64], channel: &ChannelParams) -> f64 {
    (-channel.damping_exponent(norm_sq(k))).exp()
}

/// The exact chi-squared kernel
/// `P = (A + i Delta/2) x R^B_{-1/2} (B + i Delta/2)^{-1} x (A + i Delta/2)`.
///
/// With [`Statistics::Classical`] the same expression is evaluated with the
/// classical covariance, `Delta = 0` and `R = I`.
pub fn chi2_kernel(k: &[f64], params: &ModelParams, channel: &ChannelParams, stats: Statistics) -> Result<KernelBlock> {
    let beta = params.beta.require_finite()?;
    require_valid(k, channel)?;
    let inner = chi2_inner(k, params, channel, stats)?;
    let w = checked_omega(k, params)?;
    let outer = match stats {
        Statistics::Quantum => propagator(&covariance_from_omega(w, params)),
        Statistics::Classical => classical_a(w, beta),
    };
    Ok(KernelBlock { block: outer * inner * outer, kind: MetricKind::Chi2 })
}

/// The middle factor `x R^B_{-1/2} (B + i Delta/2)^{-1} x` of the chi-squared kernel.
fn chi2_inner(k: &[f64], params: &ModelParams, channel: &ChannelParams, stats: Statistics) -> Result<ModeBlock> {
    let beta = params.beta.require_finite()?;
    let w = checked_omega(k, params)?;
    let k2 = norm_sq(k);
    let x2 = attenuation_sq(k, channel);
    let y = crate::channel::y_block_at(k, channel);
    match stats {
        Statistics::Quantum => {
            let b = covariance_from_omega(w, params).scale(x2) + y;
            let e = effective_from_omega(w, k2, params, channel)?;
            let r = rotation(e.omega_prime, e.beta_prime, -0.5)?;
            let g_inv = propagator(&b).inverse().map_err(|_| Error::PureCoarseState(2.0 * e.uv()))?;
            Ok((r * g_inv).scale(x2))
        }
        Statistics::Classical => {
            let b = classical_a(w, beta).scale(x2) + y;
            Ok(b.inverse()?.scale(x2))
        }
    }
}

/// The classical Fisher kernel `A (A + Y / x^2)^{-1} A` with the classical covariance.
///
/// Both `A` and `Y` are diagonal, so the kernel is evaluated entrywise; a
/// fully attenuated mode gives the zero kernel.
pub fn fisher_kernel(k: &[f64], params: &ModelParams, channel: &ChannelParams) -> Result<KernelBlock> {
    let beta = params.beta.require_finite()?;
    let w = checked_omega(k, params)?;
    let x2 = attenuation_sq(k, channel);
    if x2 == 0.0 {
        return Ok(KernelBlock { block: ModeBlock::zeros(), kind: MetricKind::Fisher });
    }
    let a = classical_a(w, beta);
    let (yphi2, ypi2) = channel.resolutions(norm_sq(k));
    let entry = |a: f64, y: f64| a * a / (a + y / x2);
    let block = ModeBlock::diag(entry(a.get(0, 0).re, yphi2), entry(a.get(1, 1).re, ypi2));
    Ok(KernelBlock { block, kind: MetricKind::Fisher })
}

/// The large-noise kernel `(A + i Delta/2) x K_app^{-1} x (A + i Delta/2)`.
pub fn large_noise_kernel(k: &[f64], params: &ModelParams, channel: &ChannelParams) -> Result<KernelBlock> {
    require_valid(k, channel)?;
    let w = checked_omega(k, params)?;
    let g = propagator(&covariance_from_omega(w, params));
    let inner = large_noise_inner(w, k, params, channel)?;
    Ok(KernelBlock { block: g * inner * g, kind: MetricKind::LargeNoise })
}

fn large_noise_inner(w: f64, k: &[f64], params: &ModelParams, channel: &ChannelParams) -> Result<ModeBlock> {
    let (u_sq, v_sq) = uv_sq(w, norm_sq(k), params, channel);
    Ok(ModeBlock::diag(u_sq, v_sq).inverse()?.scale(attenuation_sq(k, channel)))
}

/// `int_0^1 (A + i Delta/2) R_s ds` for one mode, by Gauss-Legendre with node doubling.
pub fn propagator_average(w: f64, beta: f64) -> Result<ModeBlock> {
    let eval = |n: usize| {
        let (x, wt) = gauss_legendre(n);
        x.iter().zip(&wt).fold(ModeBlock::zeros(), |acc, (&xi, &wi)| {
            acc + thermal_propagator(w, beta, 0.5 * (xi + 1.0)).scale(0.5 * wi)
        })
    };
    converge_gl(eval, |a, b| a.rel_distance(b))
}

fn converge_gl<T>(eval: impl Fn(usize) -> T, dist: impl Fn(&T, &T) -> f64) -> Result<T> {
    let mut n = GL_START_NODES;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let next = eval(n);
        let change = dist(&prev, &next);
        if change < GL_REL_TOL {
            return Ok(next);
        }
        if n >= GL_MAX_NODES {
            return Err(Error::QuadratureNotConverged { estimate: f64::NAN, error: change });
        }
        prev = next;
    }
}

/// First-order coarse-grained metric block `beta^2 int int R_t^dag P R_s ds dt`
/// for a linear observable of mode `k`.
///
/// Because `(A + i Delta/2) R_s` is Hermitian the double integral factorizes
/// into `beta^2 S P' S` with `S` the imaginary-time average and `P'` the
/// inner factor of the kernel. At zero temperature only the large-noise and
/// raw-Bures forms exist; there the limit `beta S -> diag(1/omega^2, 1)` is exact.
pub fn first_order_metric(
    k: &[f64],
    params: &ModelParams,
    channel: &ChannelParams,
    kind: MetricKind,
) -> Result<ModeBlock> {
    let w = checked_omega(k, params)?;
    match kind {
        MetricKind::Fisher => Ok(fisher_kernel(k, params, channel)?.block.scale(params.beta.require_finite()?.powi(2))),
        MetricKind::Chi2 | MetricKind::LargeNoise => {
            let inner = if kind == MetricKind::Chi2 {
                require_valid(k, channel)?;
                chi2_inner(k, params, channel, Statistics::Quantum)?
            } else {
                require_valid(k, channel)?;
                large_noise_inner(w, k, params, channel)?
            };
            let s = scaled_average(w, params)?;
            Ok(s * inner * s)
        }
        MetricKind::RawBures => {
            let s = scaled_average(w, params)?;
            Ok(s * ModeBlock::diag(2.0 * w, 2.0 / w) * s)
        }
    }
}

fn scaled_average(w: f64, params: &ModelParams) -> Result<ModeBlock> {
    match params.beta {
        Beta::Infinite => Ok(ModeBlock::diag(1.0 / (w * w), 1.0)),
        Beta::Finite(b) => Ok(propagator_average(w, b)?.scale(b)),
    }
}

fn check_sector(modes: &[Vec<f64>], params: &ModelParams) -> Result<Vec<f64>> {
    if modes.is_empty() {
        return Err(Error::InvalidParameter("sector needs at least one mode".into()));
    }
    if modes.len() > MAX_SECTOR_MODES {
        return Err(Error::SectorTooLarge(modes.len()));
    }
    for (i, a) in modes.iter().enumerate() {
        if modes[..i].iter().any(|b| b == a) {
            return Err(Error::DuplicateModes);
        }
    }
    modes.iter().map(|k| checked_omega_dim(k, params)).collect()
}

fn checked_omega_dim(k: &[f64], params: &ModelParams) -> Result<f64> {
    if k.len() != params.dim {
        return Err(Error::InvalidParameter(format!(
            "momentum has {} components, model has dimension {}",
            k.len(),
            params.dim
        )));
    }
    checked_omega(k, params)
}

fn to_dmatrix(b: &ModeBlock) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| b.get(i, j))
}

fn kron_all(blocks: impl IntoIterator<Item = ModeBlock>) -> DMatrix<C64> {
    blocks.into_iter().fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, b| acc.kronecker(&to_dmatrix(&b)))
}

fn diag_kron(factors: &[(f64, f64)]) -> DMatrix<C64> {
    kron_all(factors.iter().map(|&(a, b)| ModeBlock::diag(a, b)))
}

/// Zero-temperature sector block
/// `K = (1 / sum omega) [ x_j (A_inf + i Delta/2) + x_j (A_inf - i Delta/2) ]`.
pub fn zero_temp_block(modes: &[Vec<f64>], params: &ModelParams) -> Result<SectorBlock> {
    if !params.beta.is_infinite() {
        return Err(Error::ZeroTemperatureRequired);
    }
    let omegas = check_sector(modes, params)?;
    let total: f64 = omegas.iter().sum();
    let plus = kron_all(omegas.iter().map(|&w| ground_propagator(w)));
    let minus = kron_all(omegas.iter().map(|&w| ground_propagator_conj(w)));
    Ok(SectorBlock { modes: modes.to_vec(), matrix: (plus + minus) * c(1.0 / total, 0.0) })
}

/// Finite-temperature sector block `beta int_0^1 x_j (A + i Delta/2) R_s ds`.
///
/// Tends to [`zero_temp_block`] as `beta -> inf`.
pub fn finite_beta_sector_block(modes: &[Vec<f64>], params: &ModelParams) -> Result<SectorBlock> {
    let beta = params.beta.require_finite()?;
    let omegas = check_sector(modes, params)?;
    let eval = |n: usize| {
        let (x, wt) = gauss_legendre(n);
        let dim = 1usize << omegas.len();
        let mut acc = DMatrix::from_element(dim, dim, c(0.0, 0.0));
        for (&xi, &wi) in x.iter().zip(&wt) {
            let s = 0.5 * (xi + 1.0);
            let term = kron_all(omegas.iter().map(|&w| thermal_propagator(w, beta, s)));
            acc += term * c(0.5 * wi * beta, 0.0);
        }
        acc
    };
    let matrix = converge_gl(eval, |a, b| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE))?;
    Ok(SectorBlock { modes: modes.to_vec(), matrix })
}

/// `(diag(u^-2, v^-2) per mode, exp(-sum k^2 sigma^2))` for a sector.
fn noise_weights(
    modes: &[Vec<f64>],
    omegas: &[f64],
    params: &ModelParams,
    channel: &ChannelParams,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut factors = Vec::with_capacity(modes.len());
    let mut exponent = 0.0;
    for (k, &w) in modes.iter().zip(omegas) {
        require_valid(k, channel)?;
        let k2 = norm_sq(k);
        let (u_sq, v_sq) = uv_sq(w, k2, params, channel);
        if !(u_sq > 0.0 && v_sq > 0.0) {
            return Err(Error::SingularBlock(u_sq * v_sq));
        }
        factors.push((1.0 / u_sq, 1.0 / v_sq));
        exponent += channel.damping_exponent(k2);
    }
    Ok((factors, (-exponent).exp()))
}

/// Coarse-grained metric components `K D K exp(-sum k^2 sigma^2)` with
/// `D = x_j diag(u^-2, v^-2)`.
///
/// For [`MetricKind::RawBures`] the substitution `u^2 -> 1/(2 omega)`,
/// `v^2 -> omega/2` and `x -> 1` is applied instead.
pub fn cg_metric_block(
    modes: &[Vec<f64>],
    params: &ModelParams,
    channel: &ChannelParams,
    kind: MetricKind,
) -> Result<SectorBlock> {
    let k = zero_temp_block(modes, params)?;
    let omegas: Vec<f64> = modes.iter().map(|m| checked_omega(m, params)).collect::<Result<_>>()?;
    let (d, e) = match kind {
        MetricKind::LargeNoise => {
            let (f, e) = noise_weights(modes, &omegas, params, channel)?;
            (diag_kron(&f), e)
        }
        MetricKind::RawBures => {
            let f: Vec<(f64, f64)> = omegas.iter().map(|&w| (2.0 * w, 2.0 / w)).collect();
            (diag_kron(&f), 1.0)
        }
        other => return Err(Error::UnsupportedMetric(other.name())),
    };
    let matrix = &k.matrix * d * &k.matrix * c(e, 0.0);
    Ok(SectorBlock { modes: modes.to_vec(), matrix })
}

/// The (non-symmetric) coarse-graining map `D K exp(-sum k^2 sigma^2)` of a sector.
pub fn er_rho_block(modes: &[Vec<f64>], params: &ModelParams, channel: &ChannelParams) -> Result<SectorBlock> {
    let k = zero_temp_block(modes, params)?;
    er_rho_from(k, params, channel)
}

/// Finite-temperature counterpart of [`er_rho_block`], built on [`finite_beta_sector_block`].
pub fn er_rho_block_finite(modes: &[Vec<f64>], params: &ModelParams, channel: &ChannelParams) -> Result<SectorBlock> {
    let k = finite_beta_sector_block(modes, params)?;
    er_rho_from(k, params, channel)
}

fn er_rho_from(k: SectorBlock, params: &ModelParams, channel: &ChannelParams) -> Result<SectorBlock> {
    let omegas: Vec<f64> = k.modes.iter().map(|m| checked_omega(m, params)).collect::<Result<_>>()?;
    let (f, e) = noise_weights(&k.modes, &omegas, params, channel)?;
    let matrix = diag_kron(&f) * &k.matrix * c(e, 0.0);
    Ok(SectorBlock { modes: k.modes, matrix })
}

/// The per-mode noise factors and the Gaussian weight of a sector; shared with the spectral module.
pub(crate) fn sector_noise(
    modes: &[Vec<f64>],
    params: &ModelParams,
    channel: &ChannelParams,
) -> Result<(DMatrix<C64>, f64)> {
    let omegas = check_sector(modes, params)?;
    let (f, e) = noise_weights(modes, &omegas, params, channel)?;
    Ok((diag_kron(&f), e))
}
