//! Cross-module consistency of the public API.

use cgdist::kernels::first_order_metric;
use cgdist::{
    alpha_sweep, cg_metric_block, dist_linear, er_rho_block, mc_alpha, omega, quad_density_v2, sector_spectrum, Beta,
    ChannelParams, Integrand, McConfig, MetricKind, ModelParams, PerturbationKind, Statistics, SweepMethod,
};

fn zero_t(m: f64, d: usize) -> ModelParams {
    ModelParams::new(m, Beta::Infinite, d).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn single_mode_sector_metric_matches_linear_densities() {
    let p = zero_t(0.7, 2);
    let ch = ChannelParams::new(0.4, 30.0, 50.0).unwrap();
    for k in [vec![0.0, 0.3], vec![0.9, -0.2], vec![2.0, 1.0]] {
        let sector = cg_metric_block(std::slice::from_ref(&k), &p, &ch, MetricKind::LargeNoise).unwrap().matrix;
        let first = first_order_metric(&k, &p, &ch, MetricKind::LargeNoise).unwrap();
        let phi = dist_linear(&k, &p, &ch, PerturbationKind::PhiK).unwrap();
        let pi = dist_linear(&k, &p, &ch, PerturbationKind::PiK).unwrap();
        assert!(rel(sector[(0, 0)].re, phi) < 1e-12 && rel(sector[(1, 1)].re, pi) < 1e-12);
        assert!(rel(first.get(0, 0).re, phi) < 1e-12 && rel(first.get(1, 1).re, pi) < 1e-12);
        assert!(sector[(0, 1)].norm() < 1e-15 * phi);
    }
}

#[test]
fn raw_bures_single_mode_is_the_bare_metric() {
    let p = zero_t(1.3, 1);
    let ch = ChannelParams::new(0.5, 2.0, 2.0).unwrap();
    let k = vec![0.6];
    let w = omega(&k, &p);
    let sector = cg_metric_block(std::slice::from_ref(&k), &p, &ch, MetricKind::RawBures).unwrap().matrix;
    let first = first_order_metric(&k, &p, &ch, MetricKind::RawBures).unwrap();
    assert!(rel(sector[(0, 0)].re, 2.0 / w.powi(3)) < 1e-12);
    assert!(rel(sector[(1, 1)].re, 2.0 / w) < 1e-12);
    assert!(rel(first.get(0, 0).re, 2.0 / w.powi(3)) < 1e-12);
    assert!(rel(first.get(1, 1).re, 2.0 / w) < 1e-12);
}

#[test]
fn large_noise_metric_tends_to_zero_temperature() {
    let ch = ChannelParams::new(0.3, 1e3, 1e3).unwrap();
    let k = vec![1.2];
    let zero = first_order_metric(&k, &zero_t(1.0, 1), &ch, MetricKind::LargeNoise).unwrap();
    let mut prev = f64::INFINITY;
    for beta in [2.0, 8.0, 32.0] {
        let p = ModelParams::new(1.0, Beta::Finite(beta), 1).unwrap();
        let err = first_order_metric(&k, &p, &ch, MetricKind::LargeNoise).unwrap().rel_distance(&zero);
        assert!(err < prev, "beta {beta}: {err}");
        prev = err;
    }
    assert!(prev < 1e-12);
}

#[test]
fn chi2_metric_approaches_large_noise_for_coarse_channels() {
    let p = ModelParams::new(0.8, Beta::Finite(3.0), 1).unwrap();
    let k = vec![0.5];
    let mut prev = f64::INFINITY;
    for y in [1e1, 1e2, 1e3, 1e4] {
        let ch = ChannelParams::new(0.2, y, y).unwrap();
        let chi2 = first_order_metric(&k, &p, &ch, MetricKind::Chi2).unwrap();
        let large = first_order_metric(&k, &p, &ch, MetricKind::LargeNoise).unwrap();
        let err = chi2.rel_distance(&large);
        assert!(err < prev && err < 10.0 / y, "y {y}: {err}");
        prev = err;
    }
}

#[test]
fn spectrum_matches_eigenvalues_of_the_map() {
    let p = zero_t(0.5, 1);
    let ch = ChannelParams::new(0.3, 4.0, 6.0).unwrap();
    let modes = vec![vec![-0.7], vec![0.2], vec![1.1]];
    let spec = sector_spectrum(&modes, &p, &ch).unwrap();
    let m = er_rho_block(&modes, &p, &ch).unwrap().matrix;
    let mut direct: Vec<f64> = m.eigenvalues().unwrap().iter().map(|z| z.re).collect();
    direct.sort_by(|a, b| b.total_cmp(a));
    let top = spec.eigenvalues[0];
    for (a, b) in spec.eigenvalues.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-10 * top, "{a} vs {b}");
    }
}

#[test]
fn quadrature_density_matches_simple_rule() {
    let p = zero_t(1.0, 1);
    let ch = ChannelParams::new(0.6, 0.3, 8.0).unwrap();
    let f = Integrand::new(PerturbationKind::V2Quantum, &p, &ch).unwrap();
    // composite Simpson on [0, 12], where the Gaussian damping has removed everything beyond
    let n = 20_000;
    let h = 12.0 / n as f64;
    let simpson: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * f.value(&[i as f64 * h])
        })
        .sum::<f64>()
        * h
        / 3.0;
    let q = quad_density_v2(&p, &ch, Statistics::Quantum).unwrap();
    assert!(rel(q.value, 2.0 * simpson) < 1e-10, "{} vs {}", q.value, 2.0 * simpson);
}

#[test]
fn sweep_points_reproduce_single_runs() {
    let p = zero_t(1.0, 1);
    let ch = ChannelParams::new(1.0, 1e-2, 1e4).unwrap();
    let cfg = McConfig { seed: 21, n_steps: 10_000, n_burn: 1_000, n_chains: 2, thinning: 5, ..McConfig::default() };
    let sigmas = [0.1, 0.5, 2.0];
    let pts = alpha_sweep(PerturbationKind::V4Quantum, &p, &ch, &sigmas, &cfg, SweepMethod::MonteCarlo).unwrap();
    let again = alpha_sweep(PerturbationKind::V4Quantum, &p, &ch, &sigmas, &cfg, SweepMethod::MonteCarlo).unwrap();
    assert_eq!(pts, again);
    for (i, pt) in pts.iter().enumerate() {
        let single = mc_alpha(
            PerturbationKind::V4Quantum,
            &p,
            &ch.with_sigma(sigmas[i]),
            &McConfig { seed: 21 ^ i as u64, ..cfg.clone() },
        )
        .unwrap();
        assert_eq!(pt.seed, 21 ^ i as u64);
        assert_eq!(pt.estimate.as_ref().unwrap(), &single);
    }
}
