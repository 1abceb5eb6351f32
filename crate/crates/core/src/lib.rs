//! Coarse-grained distinguishability of Gaussian states of free bosonic fields.
//!
//! The crate models the free Klein-Gordon field mode by mode, passes its
//! thermal or ground state through a Gaussian coarse-graining channel and
//! computes how well perturbed states can still be told apart:
//!
//! * [`mode`]: per-mode 2x2 blocks (covariance, symplectic form, imaginary-time rotation).
//! * [`channel`]: the attenuation/noise channel and the effective coarse-grained mode.
//! * [`kernels`]: metric kernels and multi-mode sector blocks.
//! * [`perturbation`]: integrand densities for mass and quartic perturbations.
//! * [`integrator`]: quadrature and Metropolis estimates of densities and scaling exponents.
//! * [`spectral`]: eigen-decomposition of the coarse-graining map per sector.

pub mod channel;
pub mod error;
pub mod integrator;
pub mod kernels;
pub mod mode;
pub mod perturbation;
pub mod quadrature;
pub mod spectral;

pub use channel::{
    coarse_covariance_b, effective_mode, k_app_block, validate_channel, x_factor, y_block, y_block_at, ChannelParams,
    ChannelVerdict, EffectiveMode, ResolutionProfile,
};
pub use error::{Error, Result};
pub use integrator::{
    alpha_sweep, fd_alpha_v2, mc_alpha, quad_alpha_v2, quad_density_v2, AlphaEstimate, DensityEstimate, McConfig,
    SweepMethod, SweepPoint, SWEEP_FD_STEP,
};
pub use kernels::{
    cg_metric_block, chi2_kernel, er_rho_block, finite_beta_sector_block, first_order_metric, fisher_kernel,
    large_noise_kernel, zero_temp_block, KernelBlock, MetricKind, SectorBlock, Statistics,
};
pub use mode::{
    checked_omega, classical_covariance, covariance_a, omega, rotation_r, symplectic_delta, Beta, Mode, ModeBlock,
    ModelParams, C64,
};
pub use perturbation::{dist_linear, log_sigma_derivative, Integrand, PerturbationKind};
pub use spectral::{relevance_report, sector_spectrum, sector_spectrum_finite, RelevanceEntry, SpectrumResult};
