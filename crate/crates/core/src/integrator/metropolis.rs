//! Random-walk Metropolis estimate of the scaling exponent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AlphaEstimate;
use crate::perturbation::{Integrand, PerturbationKind};
use crate::{ChannelParams, Error, ModelParams, Result};

const TARGET_ACCEPTANCE: f64 = 0.35;
const ADAPT_WINDOW: usize = 100;
const BATCHES_PER_CHAIN: usize = 4;
const MAX_INIT_TRIES: usize = 1000;

/// Sampler settings. `n_steps` counts every step of a chain, burn-in included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub n_steps: usize,
    pub n_burn: usize,
    /// Initial proposal width in units of `max(m, 1/sigma)`.
    pub step_scale: f64,
    pub n_chains: usize,
    pub thinning: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { seed: 0, n_steps: 200_000, n_burn: 20_000, step_scale: 0.5, n_chains: 8, thinning: 10 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps <= self.n_burn {
            return Err(Error::InvalidParameter(format!(
                "n_steps ({}) must exceed n_burn ({})",
                self.n_steps, self.n_burn
            )));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("step_scale must be positive, got {}", self.step_scale)));
        }
        if self.n_chains == 0 || self.thinning == 0 {
            return Err(Error::InvalidParameter("n_chains and thinning must be at least 1".into()));
        }
        let kept = (self.n_steps - self.n_burn) / self.thinning;
        if kept < BATCHES_PER_CHAIN {
            return Err(Error::InvalidParameter(format!(
                "only {kept} samples per chain are kept; at least {BATCHES_PER_CHAIN} are needed"
            )));
        }
        Ok(())
    }
}

struct ChainOutput {
    batch_means: Vec<f64>,
    accepted: usize,
    proposed: usize,
}

fn run_chain(f: &Integrand, cfg: &McConfig, chain: u64, unit: f64) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain);
    let dim = f.free_dim();
    let sigma = f.channel.sigma;
    let mut step = cfg.step_scale * unit;

    let mut x = vec![0.0; dim];
    let mut lf = f64::NEG_INFINITY;
    for _ in 0..MAX_INIT_TRIES {
        for xi in x.iter_mut() {
            *xi = step * rng.sample::<f64, _>(StandardNormal);
        }
        lf = f.ln_value(&x);
        if lf.is_finite() {
            break;
        }
    }
    if !lf.is_finite() {
        return Err(Error::NonFiniteDensity(x));
    }

    let mut y = vec![0.0; dim];
    let mut window_accepts = 0usize;
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity((cfg.n_steps - cfg.n_burn) / cfg.thinning + 1);
    for it in 0..cfg.n_steps {
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = xi + step * rng.sample::<f64, _>(StandardNormal);
        }
        let ly = f.ln_value(&y);
        if ly.is_nan() || ly == f64::INFINITY {
            return Err(Error::NonFiniteDensity(y));
        }
        let u: f64 = rng.random();
        let accept = u.ln() < ly - lf;
        if accept {
            std::mem::swap(&mut x, &mut y);
            lf = ly;
        }
        if it < cfg.n_burn {
            window_accepts += accept as usize;
            if (it + 1) % ADAPT_WINDOW == 0 {
                let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
                step *= (rate - TARGET_ACCEPTANCE).exp();
                window_accepts = 0;
            }
        } else {
            accepted += accept as usize;
            if (it - cfg.n_burn) % cfg.thinning == 0 {
                samples.push(sigma * f.dln_dsigma(&x));
            }
        }
    }

    let per_batch = samples.len() / BATCHES_PER_CHAIN;
    let batch_means = samples
        .chunks_exact(per_batch)
        .take(BATCHES_PER_CHAIN)
        .map(|b| b.iter().sum::<f64>() / b.len() as f64)
        .collect();
    Ok(ChainOutput { batch_means, accepted, proposed: cfg.n_steps - cfg.n_burn })
}

/// Scaling exponent `d + sigma <d ln f / d sigma>_f` with `f` sampled by
/// random-walk Metropolis at unit temperature.
///
/// Chains run in parallel, each on its own ChaCha stream of `cfg.seed`, and
/// are merged in chain order. The standard error comes from batch means,
/// several batches per chain.
pub fn mc_alpha(
    kind: PerturbationKind,
    params: &ModelParams,
    channel: &ChannelParams,
    cfg: &McConfig,
) -> Result<AlphaEstimate> {
    cfg.validate()?;
    if matches!(kind, PerturbationKind::PhiK | PerturbationKind::PiK) {
        return Err(Error::UnsupportedPerturbation(kind.name()));
    }
    if !(channel.sigma > 0.0 && channel.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", channel.sigma)));
    }
    let f = Integrand::new(kind, params, channel)?;
    let unit = params.mass.max(1.0 / channel.sigma);

    let outputs: Vec<ChainOutput> =
        (0..cfg.n_chains as u64).into_par_iter().map(|chain| run_chain(&f, cfg, chain, unit)).collect::<Result<_>>()?;

    let batches: Vec<f64> = outputs.iter().flat_map(|o| o.batch_means.iter().copied()).collect();
    let n = batches.len() as f64;
    let mean = batches.iter().sum::<f64>() / n;
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let std_err = (var / n).sqrt();
    let accepted: usize = outputs.iter().map(|o| o.accepted).sum();
    let proposed: usize = outputs.iter().map(|o| o.proposed).sum();
    let acceptance_rate = accepted as f64 / proposed as f64;

    let mut warnings = Vec::new();
    if !(0.1..=0.9).contains(&acceptance_rate) {
        warnings.push(format!("acceptance rate {acceptance_rate:.3} outside [0.1, 0.9]"));
    }
    Ok(AlphaEstimate {
        alpha: params.dim as f64 + mean,
        std_err,
        acceptance_rate: Some(acceptance_rate),
        d_value: None,
        warnings,
    })
}
