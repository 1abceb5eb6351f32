//! Per-mode linear algebra for the free Klein-Gordon field.
//!
//! Every mode `k` carries a two-dimensional phase space spanned by the
//! complex Fourier coordinates `(phi_k, pi_k)`. The thermal state, the
//! symplectic form and the imaginary-time evolution are all 2x2 complex
//! blocks in that basis, so the whole model is handled mode by mode.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{Complex, Matrix2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// Largest `|beta * omega * s|` for which `cosh`/`sinh` stay finite.
pub const MAX_ROTATION_EXPONENT: f64 = 700.0;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A complex 2x2 matrix in the `(phi_k, pi_k)` basis.
#[derive(Clone, Copy, PartialEq)]
pub struct ModeBlock(pub Matrix2<C64>);

impl ModeBlock {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        ModeBlock(Matrix2::new(a, b, c, d))
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self::real(a, 0.0, 0.0, d)
    }

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0)
    }

    pub fn zeros() -> Self {
        Self::diag(0.0, 0.0)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        ModeBlock(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ModeBlock(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        ModeBlock(self.0.map(|z| z.conj()))
    }

    pub fn det(&self) -> C64 {
        self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0)
    }

    pub fn trace(&self) -> C64 {
        self.get(0, 0) + self.get(1, 1)
    }

    /// Closed-form inverse through the adjugate.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.norm() < 1e-300 {
            return Err(Error::SingularBlock(det.norm()));
        }
        let inv = det.inv();
        Ok(ModeBlock::new(self.get(1, 1) * inv, -self.get(0, 1) * inv, -self.get(1, 0) * inv, self.get(0, 0) * inv))
    }

    pub fn scale(&self, s: f64) -> Self {
        ModeBlock(self.0 * C64::from(s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        ModeBlock(self.0 * s)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius distance relative to the larger of the two norms.
    pub fn rel_distance(&self, other: &Self) -> f64 {
        let scale = self.norm().max(other.norm());
        if scale == 0.0 {
            0.0
        } else {
            (*self - *other).norm() / scale
        }
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.rel_distance(&self.adjoint()) <= rel_tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let a = self.get(0, 0).re;
        let d = self.get(1, 1).re;
        let b = 0.5 * (self.get(0, 1) + self.get(1, 0).conj());
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - half_gap, mean + half_gap]
    }
}

impl fmt::Debug for ModeBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.get(0, 0), self.get(0, 1), self.get(1, 0), self.get(1, 1))
    }
}

impl Add for ModeBlock {
    type Output = ModeBlock;
    fn add(self, rhs: ModeBlock) -> ModeBlock {
        ModeBlock(self.0 + rhs.0)
    }
}

impl Sub for ModeBlock {
    type Output = ModeBlock;
    fn sub(self, rhs: ModeBlock) -> ModeBlock {
        ModeBlock(self.0 - rhs.0)
    }
}

impl Mul for ModeBlock {
    type Output = ModeBlock;
    fn mul(self, rhs: ModeBlock) -> ModeBlock {
        ModeBlock(self.0 * rhs.0)
    }
}

impl Neg for ModeBlock {
    type Output = ModeBlock;
    fn neg(self) -> ModeBlock {
        ModeBlock(-self.0)
    }
}

/// Inverse temperature, with zero temperature as a distinguished value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "BetaRepr", try_from = "BetaRepr")]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Beta::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Beta::Finite(b) => Some(b),
            Beta::Infinite => None,
        }
    }

    pub fn require_finite(&self) -> Result<f64> {
        self.finite().ok_or(Error::FiniteTemperatureRequired)
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Beta::Infinite);
        }
        let b: f64 =
            t.parse().map_err(|_| Error::InvalidParameter(format!("beta must be a number or 'inf', got {s:?}")))?;
        if b.is_infinite() && b > 0.0 {
            Ok(Beta::Infinite)
        } else if b > 0.0 && b.is_finite() {
            Ok(Beta::Finite(b))
        } else {
            Err(Error::InvalidParameter(format!("beta must be positive, got {b}")))
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BetaRepr {
    Number(f64),
    Text(String),
}

impl From<Beta> for BetaRepr {
    fn from(b: Beta) -> Self {
        match b {
            Beta::Finite(v) => BetaRepr::Number(v),
            Beta::Infinite => BetaRepr::Text("inf".into()),
        }
    }
}

impl TryFrom<BetaRepr> for Beta {
    type Error = Error;
    fn try_from(r: BetaRepr) -> Result<Beta> {
        match r {
            BetaRepr::Number(v) => v.to_string().parse(),
            BetaRepr::Text(s) => s.parse(),
        }
    }
}

/// Mass, inverse temperature and spatial dimension of the free field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mass: f64,
    pub beta: Beta,
    pub dim: usize,
}

impl ModelParams {
    pub fn new(mass: f64, beta: Beta, dim: usize) -> Result<Self> {
        let p = ModelParams { mass, beta, dim };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be >= 0, got {}", self.mass)));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("spatial dimension must be >= 1".into()));
        }
        if let Beta::Finite(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("beta must be > 0, got {b}")));
            }
        }
        Ok(())
    }

    pub fn is_massless(&self) -> bool {
        self.mass == 0.0
    }

    /// Correlation length `1/m`; `None` for a massless field.
    pub fn correlation_length(&self) -> Option<f64> {
        (self.mass > 0.0).then(|| 1.0 / self.mass)
    }

    /// `coth(beta * omega / 2)`, equal to one at zero temperature.
    pub fn thermal_factor(&self, omega: f64) -> f64 {
        match self.beta {
            Beta::Finite(b) => coth(0.5 * b * omega),
            Beta::Infinite => 1.0,
        }
    }
}

/// A momentum mode together with its frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub k: Vec<f64>,
    pub k2: f64,
    pub omega: f64,
}

impl Mode {
    pub fn new(k: &[f64], params: &ModelParams) -> Result<Self> {
        if k.len() != params.dim {
            return Err(Error::InvalidParameter(format!(
                "momentum has {} components, model has dimension {}",
                k.len(),
                params.dim
            )));
        }
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite momentum {k:?}")));
        }
        let k2 = norm_sq(k);
        Ok(Mode { k: k.to_vec(), k2, omega: (k2 + params.mass * params.mass).sqrt() })
    }

    pub fn checked(k: &[f64], params: &ModelParams) -> Result<Self> {
        let m = Self::new(k, params)?;
        if m.omega > 0.0 {
            Ok(m)
        } else {
            Err(Error::InfraredSingular)
        }
    }

    pub fn norm(&self) -> f64 {
        self.k2.sqrt()
    }
}

#[inline]
pub fn norm_sq(k: &[f64]) -> f64 {
    k.iter().map(|x| x * x).sum()
}

/// Frequency `sqrt(|k|^2 + m^2)`.
pub fn omega(k: &[f64], params: &ModelParams) -> f64 {
    (norm_sq(k) + params.mass * params.mass).sqrt()
}

/// Frequency, rejecting the massless zero mode.
pub fn checked_omega(k: &[f64], params: &ModelParams) -> Result<f64> {
    let w = omega(k, params);
    if w > 0.0 {
        Ok(w)
    } else {
        Err(Error::InfraredSingular)
    }
}

/// Hyperbolic cotangent with both asymptotic branches taken in closed form.
pub fn coth(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax > 20.0 {
        1.0 + 2.0 * (-2.0 * ax).exp()
    } else if ax < 1e-8 {
        1.0 / ax + ax / 3.0
    } else {
        1.0 / ax.tanh()
    };
    v.copysign(x)
}

/// Inverse hyperbolic cotangent, defined for `|x| > 1`.
pub fn arcoth(x: f64) -> f64 {
    0.5 * (2.0 / (x - 1.0)).ln_1p()
}

/// The symplectic form `[[0, 1], [-1, 0]]`.
pub fn symplectic_delta() -> ModeBlock {
    ModeBlock::real(0.0, 1.0, -1.0, 0.0)
}

/// `i/2 * Delta`, the commutator part of the two-point function.
pub fn half_i_delta() -> ModeBlock {
    symplectic_delta().scale_c(c(0.0, 0.5))
}

/// Quantum covariance `(1/2) coth(beta omega / 2) diag(1/omega, omega)`.
pub fn covariance_a(k: &[f64], params: &ModelParams) -> Result<ModeBlock> {
    let w = checked_omega(k, params)?;
    Ok(covariance_from_omega(w, params))
}

pub(crate) fn covariance_from_omega(w: f64, params: &ModelParams) -> ModeBlock {
    let t = 0.5 * params.thermal_factor(w);
    ModeBlock::diag(t / w, t * w)
}

/// Covariance of the classical thermal field, `diag(1/(beta omega^2), 1/beta)`.
pub fn classical_covariance(k: &[f64], params: &ModelParams) -> Result<ModeBlock> {
    let beta = params.beta.require_finite()?;
    let w = checked_omega(k, params)?;
    Ok(ModeBlock::diag(1.0 / (beta * w * w), 1.0 / beta))
}

/// `A + (i/2) Delta`, the Hamiltonian form of the thermal propagator.
pub fn propagator(a: &ModeBlock) -> ModeBlock {
    *a + half_i_delta()
}

/// `A_inf + (i/2) Delta` for a ground-state mode; a rank-one projector scaled by one.
pub fn ground_propagator(w: f64) -> ModeBlock {
    ModeBlock::new(c(0.5 / w, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.5 * w, 0.0))
}

/// `A_inf - (i/2) Delta`, the complex conjugate of [`ground_propagator`].
pub fn ground_propagator_conj(w: f64) -> ModeBlock {
    ground_propagator(w).conj()
}

/// Imaginary-time rotation for frequency `w` and inverse temperature `beta`.
pub fn rotation(w: f64, beta: f64, s: f64) -> Result<ModeBlock> {
    let x = beta * w * s;
    if !x.is_finite() || x.abs() > MAX_ROTATION_EXPONENT {
        return Err(Error::ExponentOverflow(x));
    }
    let (ch, sh) = (x.cosh(), x.sinh());
    Ok(ModeBlock::new(c(ch, 0.0), c(0.0, -w * sh), c(0.0, sh / w), c(ch, 0.0)))
}

/// `R_s` for mode `k`: `exp(-s beta H) W_f exp(s beta H) = W_{R_s f}`.
pub fn rotation_r(k: &[f64], params: &ModelParams, s: f64) -> Result<ModeBlock> {
    let beta = params.beta.require_finite()?;
    let w = checked_omega(k, params)?;
    rotation(w, beta, s)
}

/// `(A + (i/2) Delta) R_s` evaluated without the cancellations of the
/// direct product.
///
/// With `n = 1/(e^{beta omega} - 1)` the product splits as
/// `(n+1) e^{-beta omega s} (A_inf + i Delta/2) + n e^{beta omega s} (A_inf - i Delta/2)`,
/// and both coefficients stay bounded for `s` in `[0, 1]`.
pub fn thermal_propagator(w: f64, beta: f64, s: f64) -> ModeBlock {
    let b = beta * w;
    let norm = -(-b).exp_m1();
    let down = (-b * s).exp() / norm;
    let up = (b * (s - 1.0)).exp() / norm;
    ground_propagator(w).scale(down) + ground_propagator_conj(w).scale(up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(m: f64, beta: f64, d: usize) -> ModelParams {
        ModelParams::new(m, Beta::Finite(beta), d).unwrap()
    }

    #[test]
    fn omega_examples() {
        let p = params(1.0, 1.0, 1);
        assert_eq!(omega(&[0.0], &p), 1.0);
        assert_relative_eq!(omega(&[1.0], &p), 2f64.sqrt(), max_relative = 1e-15);
        let p0 = ModelParams::new(0.0, Beta::Infinite, 2).unwrap();
        assert_eq!(omega(&[3.0, 4.0], &p0), 5.0);
        assert_eq!(checked_omega(&[0.0, 0.0], &p0), Err(Error::InfraredSingular));
    }

    #[test]
    fn covariance_examples() {
        let p = ModelParams::new(2.0, Beta::Infinite, 1).unwrap();
        let a = covariance_a(&[0.0], &p).unwrap();
        assert_eq!(a, ModeBlock::diag(0.25, 1.0));
        // pure state: A + i Delta / 2 is singular
        for w in [0.1, 1.0, 7.5] {
            let det = propagator(&covariance_from_omega(w, &p)).det();
            assert!(det.norm() < 1e-15, "det = {det}");
        }
        let p2 = params(1.0, 2.0, 1);
        let a = covariance_a(&[0.0], &p2).unwrap();
        let expected = 0.5 / 1f64.tanh();
        assert_relative_eq!(a.get(0, 0).re, expected, max_relative = 1e-14);
        assert_relative_eq!(a.get(1, 1).re, expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.656_518, max_relative = 1e-5);
    }

    #[test]
    fn delta_properties() {
        let d = symplectic_delta();
        assert_eq!(d, ModeBlock::real(0.0, 1.0, -1.0, 0.0));
        assert_eq!(d.transpose(), -d);
        assert_eq!(d * d, -ModeBlock::identity());
    }

    #[test]
    fn coth_branches_are_continuous() {
        for x in [1e-8, 20.0] {
            let lo = coth(x * (1.0 - 1e-12));
            let hi = coth(x * (1.0 + 1e-12));
            assert_relative_eq!(lo, hi, max_relative = 1e-10);
        }
        assert_relative_eq!(coth(-3.0), -coth(3.0));
        assert_relative_eq!(arcoth(coth(0.7)), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn rotation_identity_at_zero_and_overflow_guard() {
        let p = params(1.0, 3.0, 1);
        assert_eq!(rotation_r(&[0.4], &p, 0.0).unwrap(), ModeBlock::identity());
        let hot = params(1.0, 1e4, 1);
        assert!(matches!(rotation_r(&[0.0], &hot, 0.5), Err(Error::ExponentOverflow(_))));
        let cold = ModelParams::new(1.0, Beta::Infinite, 1).unwrap();
        assert_eq!(rotation_r(&[0.0], &cold, 0.5), Err(Error::FiniteTemperatureRequired));
    }

    #[test]
    fn beta_parsing() {
        assert_eq!("inf".parse::<Beta>().unwrap(), Beta::Infinite);
        assert_eq!("2.5".parse::<Beta>().unwrap(), Beta::Finite(2.5));
        assert!("-1".parse::<Beta>().is_err());
        assert!("abc".parse::<Beta>().is_err());
    }

    /// `(|k|, mass, beta)` with `beta * omega <= 5`, where direct products of
    /// rotations still resolve `1e-10` despite entries of size `exp(beta omega)`.
    fn arb_mode() -> impl Strategy<Value = (f64, f64, f64)> {
        (0.0..5.0f64, 0.05..3.0f64, 0.01..1.0f64).prop_map(|(k, m, t)| {
            let w = (k * k + m * m).sqrt();
            (k, m, 5.0 * t / w)
        })
    }

    proptest! {
        #[test]
        fn rotation_group_law((k, m, beta) in arb_mode(), s in -1.0..1.0f64, t in -1.0..1.0f64) {
            let p = params(m, beta, 1);
            let rs = rotation_r(&[k], &p, s).unwrap();
            let rt = rotation_r(&[k], &p, t).unwrap();
            let rst = rotation_r(&[k], &p, s + t).unwrap();
            prop_assert!((rs * rt).rel_distance(&rst) < 1e-10);
        }

        #[test]
        fn rotation_is_symplectic_and_conjugates((k, m, beta) in arb_mode(), s in -1.0..1.0f64) {
            let p = params(m, beta, 1);
            let r = rotation_r(&[k], &p, s).unwrap();
            let d = symplectic_delta();
            prop_assert!((r.transpose() * d * r).rel_distance(&d) < 1e-10);
            let rm = rotation_r(&[k], &p, -s).unwrap();
            prop_assert!(r.conj().rel_distance(&rm) < 1e-14);
        }

        #[test]
        fn rotation_preserves_state((k, m, beta) in arb_mode(), s in 0.0..1.0f64) {
            let p = params(m, beta, 1);
            let a = covariance_a(&[k], &p).unwrap();
            let r = rotation_r(&[k], &p, s).unwrap();
            prop_assert!((r.transpose() * a * r).rel_distance(&a) < 1e-10);
            let aq = propagator(&a);
            prop_assert!((aq * r).rel_distance(&(r.adjoint() * aq)) < 1e-10);
        }

        #[test]
        fn kms_condition((k, m, beta) in arb_mode()) {
            let p = params(m, beta, 1);
            let a = covariance_a(&[k], &p).unwrap();
            let r1 = rotation_r(&[k], &p, 1.0).unwrap();
            let lhs = propagator(&a) * r1;
            let rhs = a - half_i_delta();
            prop_assert!(lhs.rel_distance(&rhs) < 1e-10);
        }

        #[test]
        fn propagator_is_positive((k, m, beta) in arb_mode()) {
            for b in [Beta::Finite(beta), Beta::Infinite] {
                let p = ModelParams::new(m, b, 1).unwrap();
                let aq = propagator(&covariance_a(&[k], &p).unwrap());
                let [lo, hi] = aq.hermitian_eigenvalues();
                prop_assert!(lo >= -1e-12 * hi, "eigenvalues {lo} {hi}");
            }
        }

        #[test]
        fn stable_propagator_matches_product((k, m, beta) in arb_mode(), s in 0.0..1.0f64) {
            let p = params(m, beta, 1);
            let w = omega(&[k], &p);
            let direct = propagator(&covariance_a(&[k], &p).unwrap()) * rotation_r(&[k], &p, s).unwrap();
            let stable = thermal_propagator(w, beta, s);
            prop_assert!(direct.rel_distance(&stable) < 1e-9);
        }
    }
}
