//! Eigen-decomposition of the coarse-graining map per mode sector.
//!
//! The map `E R = D K e` is self-adjoint with respect to the source metric
//! `K`, so it is diagonalized through the Hermitian matrix
//! `K^{1/2} D K^{1/2} e`. An eigenvector `w` of the latter with a positive
//! eigenvalue maps back to `D K^{1/2} w`; eigenvectors in the kernel of `K`
//! are eigenvectors of `E R` with eigenvalue zero as they stand.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::kernels::{finite_beta_sector_block, sector_noise, zero_temp_block};
use crate::mode::C64;
use crate::{ChannelParams, Error, ModelParams, Result};

/// Eigenvalues below this fraction of the largest one are treated as zero.
const RANK_TOL: f64 = 1e-12;
/// Most negative eigenvalue of `K`, relative to the largest, accepted as round-off.
const NEGATIVITY_TOL: f64 = 1e-9;

/// Spectrum of the coarse-graining map on one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub modes: Vec<Vec<f64>>,
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors over the tensor basis, phase-fixed so that the
    /// largest component is real and positive.
    pub eigenvectors: Vec<DVector<C64>>,
    /// Eigenvalues carry the `beta * (...)` normalization.
    pub beta_scaled: bool,
}

/// One line of a relevance report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceEntry {
    pub eigenvalue: f64,
    pub observable: String,
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn psd_sqrt(k: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let eig = SymmetricEigen::new(hermitian_part(k));
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if let Some(&worst) = eig.eigenvalues.iter().find(|&&l| l < -NEGATIVITY_TOL * top) {
        return Err(Error::NotPositive(worst));
    }
    let roots = eig.eigenvalues.map(|l| C64::new(if l > RANK_TOL * top { l.sqrt() } else { 0.0 }, 0.0));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.adjoint())
}

fn fix_phase(mut v: DVector<C64>) -> DVector<C64> {
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    v /= C64::new(norm, 0.0);
    let top = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let pivot = v.iter().find(|z| z.norm() >= (1.0 - 1e-9) * top).copied().unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    v * phase
}

fn spectrum_from(
    k: &DMatrix<C64>,
    d: &DMatrix<C64>,
    e: f64,
    modes: &[Vec<f64>],
    beta_scaled: bool,
) -> Result<SpectrumResult> {
    let root = psd_sqrt(k)?;
    let sym = hermitian_part(&(&root * d * &root * C64::new(e, 0.0)));
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(Ordering::Equal));
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let back = d * &root;
    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut eigenvectors = Vec::with_capacity(order.len());
    for i in order {
        let lambda = eig.eigenvalues[i];
        let w = eig.eigenvectors.column(i).into_owned();
        let v = if lambda > RANK_TOL * top { &back * &w } else { w };
        eigenvalues.push(if lambda.abs() <= RANK_TOL * top { 0.0 } else { lambda });
        eigenvectors.push(fix_phase(v));
    }
    Ok(SpectrumResult { modes: modes.to_vec(), eigenvalues, eigenvectors, beta_scaled })
}

/// Spectrum of the zero-temperature coarse-graining map of a sector.
///
/// The source block has rank two for two or more modes; its kernel shows up
/// as eigenvalue zero rather than as an error.
pub fn sector_spectrum(modes: &[Vec<f64>], params: &ModelParams, channel: &ChannelParams) -> Result<SpectrumResult> {
    let k = zero_temp_block(modes, params)?;
    let (d, e) = sector_noise(modes, params, channel)?;
    spectrum_from(&k.matrix, &d, e, modes, true)
}

/// Spectrum of the finite-temperature map, built on the imaginary-time
/// quadrature of the sector propagator.
pub fn sector_spectrum_finite(
    modes: &[Vec<f64>],
    params: &ModelParams,
    channel: &ChannelParams,
) -> Result<SpectrumResult> {
    let k = finite_beta_sector_block(modes, params)?;
    let (d, e) = sector_noise(modes, params, channel)?;
    spectrum_from(&k.matrix, &d, e, modes, true)
}

fn format_momentum(k: &[f64]) -> String {
    k.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn format_coefficient(z: C64) -> String {
    if z.im.abs() <= 1e-12 * z.norm() {
        format!("{:.6}", z.re)
    } else {
        format!("({:.6}{:+.6}i)", z.re, z.im)
    }
}

/// Renders a coefficient vector as a polynomial in `phi(k)` and `pi(k)`.
pub fn observable_string(modes: &[Vec<f64>], v: &DVector<C64>) -> String {
    let n = modes.len();
    let top = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let labels: Vec<String> = modes.iter().map(|k| format_momentum(k)).collect();
    let mut terms = Vec::new();
    for (idx, z) in v.iter().enumerate() {
        if z.norm() <= 1e-9 * top {
            continue;
        }
        let monomial: Vec<String> = (0..n)
            .map(|j| {
                let bit = (idx >> (n - 1 - j)) & 1;
                format!("{}({})", if bit == 0 { "phi" } else { "pi" }, labels[j])
            })
            .collect();
        terms.push(format!("{}*{}", format_coefficient(*z), monomial.join("*")));
    }
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    }
}

fn canonical_order(modes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut sorted = modes.to_vec();
    sorted.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal));
    sorted
}

/// Eigen-observables whose eigenvalue is at least `cutoff`, most relevant first.
///
/// Modes are put in a canonical order first, so the report does not depend
/// on how the sector was listed.
pub fn relevance_report(
    modes: &[Vec<f64>],
    params: &ModelParams,
    channel: &ChannelParams,
    cutoff: f64,
) -> Result<Vec<RelevanceEntry>> {
    let modes = canonical_order(modes);
    let spec = sector_spectrum(&modes, params, channel)?;
    Ok(spec
        .eigenvalues
        .iter()
        .zip(&spec.eigenvectors)
        .filter(|(l, _)| **l >= cutoff)
        .map(|(&eigenvalue, v)| RelevanceEntry { eigenvalue, observable: observable_string(&modes, v) })
        .collect())
}
