//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Tolerances are pinned here and nowhere else.

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::Command;
use std::time::{Duration, Instant};

use cgdist::mode::{half_i_delta, propagator};
use cgdist::{
    alpha_sweep, chi2_kernel, covariance_a, fd_alpha_v2, fisher_kernel, large_noise_kernel, mc_alpha, omega,
    quad_alpha_v2, rotation_r, sector_spectrum, sector_spectrum_finite, symplectic_delta, validate_channel, Beta,
    ChannelParams, Integrand, McConfig, ModelParams, PerturbationKind, Statistics, SweepMethod, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of Monte Carlo standard errors allowed in sampled comparisons.
const MC_SIGMAS: f64 = 3.0;
/// Per-point wall-clock budget of the marginal-dimension check.
const C1_POINT_BUDGET: Duration = Duration::from_secs(120);
/// Budget of the 20-point sweep of the dashed curve.
const C2_SWEEP_BUDGET: Duration = Duration::from_secs(1800);
const C2_PLATEAU: f64 = -2.0;
const C2_PLATEAU_TOL: f64 = 0.2;
/// Allowed factor between the zero crossing of the solid curve and `y_phi^2`.
const C3_CROSSING_FACTOR: f64 = 3.0;
const C4_TOL: f64 = 0.1;
const C4_POINT_BUDGET: Duration = Duration::from_secs(10);
/// Relative tolerance of the algebraic identities.
const C6_REL_TOL: f64 = 1e-10;
/// Relative agreement of analytic and finite-difference sigma derivatives.
const C6_GRADIENT_TOL: f64 = 1e-6;
const C6_SAMPLES: usize = 200;
const C7_SAMPLES: usize = 200;
/// Relative tolerance of the single-mode spectrum.
const C8_EXACT_TOL: f64 = 1e-12;
const C8_FIDELITY: f64 = 1.0 - 1e-6;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn zero_t(mass: f64, dim: usize) -> ModelParams {
    ModelParams::new(mass, Beta::Infinite, dim).unwrap()
}

fn criterion_1() -> Outcome {
    let channel = ChannelParams::new(1.0, 1e-7, 1e10).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in 2..=6usize {
        let start = Instant::now();
        let est = mc_alpha(PerturbationKind::V4Quantum, &zero_t(0.0, d), &channel, &McConfig::default());
        let elapsed = start.elapsed();
        match est {
            Ok(e) => {
                let target = 2.0 * (3.0 - d as f64);
                let z = (e.alpha - target) / e.std_err;
                let ok = z.abs() <= MC_SIGMAS && elapsed <= C1_POINT_BUDGET;
                pass &= ok;
                parts.push(format!(
                    "d={d}: {:.3}+-{:.3} vs {target} ({z:+.1} se, {:.1}s){}",
                    e.alpha,
                    e.std_err,
                    elapsed.as_secs_f64(),
                    if ok { "" } else { " X" }
                ));
            }
            Err(err) => {
                pass = false;
                parts.push(format!("d={d}: error {err}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn fig1_sweep(yphi2: f64, lo: f64, hi: f64, n: usize) -> (Vec<(f64, f64, f64)>, Duration) {
    let params = zero_t(1.0, 4);
    let channel = ChannelParams::new(1.0, yphi2, 1e10).unwrap();
    let sigmas: Vec<f64> = (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect();
    let start = Instant::now();
    let points = alpha_sweep(
        PerturbationKind::V4Quantum,
        &params,
        &channel,
        &sigmas,
        &McConfig::default(),
        SweepMethod::MonteCarlo,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let rows = points
        .into_iter()
        .map(|p| {
            let e = p.estimate.unwrap();
            (p.sigma, e.alpha, e.std_err)
        })
        .collect();
    (rows, elapsed)
}

fn criterion_2() -> Outcome {
    let (rows, elapsed) = fig1_sweep(1e-7, 1e-4, 1e2, 20);
    let plateau: Vec<_> = rows.iter().filter(|r| r.0 <= 0.1).collect();
    let off_plateau: Vec<String> = plateau
        .iter()
        .filter(|r| (r.1 - C2_PLATEAU).abs() > C2_PLATEAU_TOL)
        .map(|r| format!("{:.1e}:{:.2}", r.0, r.1))
        .collect();
    let tail: Vec<_> = rows.iter().filter(|r| r.0 >= 0.1).collect();
    let monotone = tail.windows(2).all(|w| w[1].1 <= w[0].1 + MC_SIGMAS * (w[0].2.hypot(w[1].2)));
    let pass = off_plateau.is_empty() && monotone && elapsed <= C2_SWEEP_BUDGET;
    let plateau_mean = plateau.iter().map(|r| r.1).sum::<f64>() / plateau.len() as f64;
    outcome(
        pass,
        format!(
            "plateau mean {plateau_mean:.3}, {}/{} plateau points outside -2+-0.2 [{}]; transition monotone: {monotone} \
             ({:.2} -> {:.2}); {:.1}s",
            off_plateau.len(),
            plateau.len(),
            off_plateau.join(" "),
            tail.first().map_or(f64::NAN, |r| r.1),
            tail.last().map_or(f64::NAN, |r| r.1),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let yphi2 = 1e-3;
    let (rows, elapsed) = fig1_sweep(yphi2, 1e-5, 1e-1, 13);
    let first_positive = rows[0].1 > 0.0;
    let crossing = rows.windows(2).find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).map(|w| {
        let t = w[0].1 / (w[0].1 - w[1].1);
        (w[0].0.ln() + t * (w[1].0.ln() - w[0].0.ln())).exp()
    });
    let stays_negative = match crossing {
        Some(c) => rows.iter().filter(|r| r.0 > c).all(|r| r.1 < 0.0),
        None => false,
    };
    let within = crossing.is_some_and(|c| c >= yphi2 / C3_CROSSING_FACTOR && c <= yphi2 * C3_CROSSING_FACTOR);
    let pass = first_positive && within && stays_negative;
    outcome(
        pass,
        format!(
            "alpha({:.0e}) = {:.3}; crossing at sigma = {:.2e} ({:.2} y_phi^2); negative beyond: {stays_negative}; {:.1}s",
            rows[0].0,
            rows[0].1,
            crossing.unwrap_or(f64::NAN),
            crossing.unwrap_or(f64::NAN) / yphi2,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let cases: Vec<(&str, ModelParams, ChannelParams, f64)> = vec![
        ("massless d=5", zero_t(0.0, 5), ChannelParams::new(1.0, 1e-7, 1e10).unwrap(), 4.0),
        ("m=1 d=1 sigma=100", zero_t(1.0, 1), ChannelParams::new(100.0, 1e-7, 1e10).unwrap(), 0.0),
        ("m=1 d=2 sigma=100", zero_t(1.0, 2), ChannelParams::new(100.0, 1e-7, 1e10).unwrap(), 0.0),
        ("m=1 d=3 sigma=100", zero_t(1.0, 3), ChannelParams::new(100.0, 1e-7, 1e10).unwrap(), 0.0),
        ("m=1 d=8 y_phi^2=1 sigma=1e-3", zero_t(1.0, 8), ChannelParams::new(1e-3, 1.0, 1e8).unwrap(), 6.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, p, ch, target) in cases {
        let start = Instant::now();
        let est = fd_alpha_v2(&p, &ch, Statistics::Quantum, ch.sigma, 0.01);
        let elapsed = start.elapsed();
        match est {
            Ok(e) => {
                let ok = (e.alpha - target).abs() <= C4_TOL && elapsed <= C4_POINT_BUDGET;
                pass &= ok;
                parts.push(format!("{label}: {:.4} vs {target}{}", e.alpha, if ok { "" } else { " X" }));
            }
            Err(err) => {
                pass = false;
                parts.push(format!("{label}: error {err}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let channel = ChannelParams::new(1.0, 0.2, 10.0).unwrap();
    let sigmas = [0.1, 0.3, 1.0, 3.0, 10.0];
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for d in [1usize, 2] {
        let params = zero_t(1.0, d);
        for (i, &s) in sigmas.iter().enumerate() {
            let ch = channel.with_sigma(s);
            let cfg = McConfig { seed: 100 * d as u64 + i as u64, ..McConfig::default() };
            let mc = mc_alpha(PerturbationKind::V2Quantum, &params, &ch, &cfg).unwrap();
            let q = quad_alpha_v2(&params, &ch, Statistics::Quantum).unwrap();
            let z = (mc.alpha - q.alpha).abs() / mc.std_err.hypot(q.std_err);
            worst = worst.max(z);
            pass &= z <= MC_SIGMAS;
            parts.push(format!("d={d} s={s}: {:.3}/{:.3}", mc.alpha, q.alpha));
        }
    }
    outcome(pass, format!("worst deviation {worst:.2} combined se; {}", parts.join(", ")))
}

fn check(cond: bool, failures: &mut Vec<String>, what: &str) {
    if !cond && !failures.iter().any(|f| f == what) {
        failures.push(what.to_string());
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    let delta = symplectic_delta();
    for _ in 0..C6_SAMPLES {
        let m: f64 = rng.random_range(0.1..2.0);
        let k: f64 = rng.random_range(0.0..3.0);
        let w: f64 = (m * m + k * k).sqrt();
        let beta = rng.random_range(0.05..5.0) / w;
        let p = ModelParams::new(m, Beta::Finite(beta), 1).unwrap();
        let (s, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let rs = rotation_r(&[k], &p, s).unwrap();
        let rt = rotation_r(&[k], &p, t).unwrap();
        let rst = rotation_r(&[k], &p, s + t).unwrap();
        check((rs * rt).rel_distance(&rst) < C6_REL_TOL, &mut failures, "group law");
        check((rs.transpose() * delta * rs).rel_distance(&delta) < C6_REL_TOL, &mut failures, "symplectic");
        let a = covariance_a(&[k], &p).unwrap();
        check((rs.transpose() * a * rs).rel_distance(&a) < C6_REL_TOL, &mut failures, "state invariance");
        let r1 = rotation_r(&[k], &p, 1.0).unwrap();
        check((propagator(&a) * r1).rel_distance(&(a - half_i_delta())) < C6_REL_TOL, &mut failures, "KMS");

        let yphi2 = 10f64.powf(rng.random_range(-1.0..3.0));
        let ypi2 = (1.0 / yphi2) * 10f64.powf(rng.random_range(0.0..3.0));
        let ch = ChannelParams::new(rng.random_range(0.0..2.0), yphi2, ypi2).unwrap();
        let chi2 = chi2_kernel(&[k], &p, &ch, Statistics::Quantum).unwrap().block;
        check(chi2.rel_distance(&chi2.adjoint()) < C6_REL_TOL, &mut failures, "chi2 hermitian");
        let classical = chi2_kernel(&[k], &p, &ch, Statistics::Classical).unwrap().block;
        let fisher = fisher_kernel(&[k], &p, &ch).unwrap().block;
        check(classical.rel_distance(&fisher) < C6_REL_TOL, &mut failures, "Delta=0 reduction");

        let product: f64 = rng.random_range(0.5..2.0);
        let edge = ChannelParams::new(1.0, product.sqrt(), product.sqrt()).unwrap();
        let verdict = validate_channel(&[50.0], &edge);
        check(verdict.valid == (product >= 1.0), &mut failures, "validity boundary");

        for kind in [PerturbationKind::V2Quantum, PerturbationKind::V4Quantum] {
            let f = Integrand::new(kind, &zero_t(m, 1), &ch.with_sigma(rng.random_range(0.1..2.0))).unwrap();
            let kv: Vec<f64> = (0..f.free_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sigma = f.channel.sigma;
            let h = 1e-5 * sigma;
            let fd = (f.with_sigma(sigma + h).ln_value(&kv) - f.with_sigma(sigma - h).ln_value(&kv)) / (2.0 * h);
            let analytic = f.dln_dsigma(&kv);
            let scale = analytic.abs().max(1.0 / sigma);
            check((fd - analytic).abs() <= C6_GRADIENT_TOL * scale, &mut failures, "sigma derivative");
        }
    }
    let detail = format!("{C6_SAMPLES} random draws per identity");
    if failures.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; failed: {}", failures.join(", ")))
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_ratio = 0.0f64;
    for _ in 0..C7_SAMPLES {
        let m = rng.random_range(0.1..2.0);
        let k = rng.random_range(0.0..3.0);
        let beta = rng.random_range(0.1..10.0);
        let product = 10f64.powf(rng.random_range(4.0..10.0));
        let yphi2 = 10f64.powf(rng.random_range(-2.0..2.0)) * product.sqrt();
        let ch = ChannelParams::new(rng.random_range(0.0..2.0), yphi2, product / yphi2).unwrap();
        let p = ModelParams::new(m, Beta::Finite(beta), 1).unwrap();
        let chi2 = chi2_kernel(&[k], &p, &ch, Statistics::Quantum).unwrap().block;
        let large = large_noise_kernel(&[k], &p, &ch).unwrap().block;
        let rel = (chi2 - large).norm() / chi2.norm();
        worst_ratio = worst_ratio.max(rel / (10.0 / product.sqrt()));
    }
    outcome(
        worst_ratio <= 1.0,
        format!("max of difference / (10/(y_phi y_pi)) = {worst_ratio:.3e} over {C7_SAMPLES} draws"),
    )
}

/// Zero-temperature effective uncertainties of a mode with attenuation `x2`.
fn uv_sq(w: f64, x2: f64, ch: &ChannelParams) -> (f64, f64) {
    (ch.yphi2 + x2 / (2.0 * w), ch.ypi2 + x2 * w / 2.0)
}

fn criterion_8() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    let p = zero_t(1.0, 1);
    let ch = ChannelParams::new(0.4, 20.0, 5.0).unwrap();
    let k = 0.8;
    let w = omega(&[k], &p);
    let x2 = (-k * k * ch.sigma * ch.sigma).exp();
    let (u2, v2) = uv_sq(w, x2, &ch);
    let mut want = [x2 / (u2 * w * w), x2 / v2];
    want.sort_by(|a, b| b.total_cmp(a));
    let s1 = sector_spectrum(&[vec![k]], &p, &ch).unwrap();
    let n1 = s1.eigenvalues.iter().zip(want).map(|(g, w)| ((g - w) / w).abs()).fold(0.0, f64::max);
    pass &= n1 <= C8_EXACT_TOL;
    parts.push(format!("n=1 max rel error {n1:.1e}"));

    let (m, k) = (0.03, 0.04);
    let ch = ChannelParams::new(0.5, 3.0, 40.0).unwrap();
    let w = omega(&[k], &zero_t(m, 1));
    let x2 = (-k * k * ch.sigma * ch.sigma).exp();
    let (u2, v2) = uv_sq(w, x2, &ch);
    let eta1 = x2 * x2 / (2.0 * w * u2 * v2);
    let modes = vec![vec![k], vec![-k]];
    let sym = [C64::new(0.0, 0.0), C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, 0.0)];
    let mut errors = Vec::new();
    let mut fidelity = 1.0f64;
    for beta in [20.0, 40.0, 80.0] {
        let s = sector_spectrum_finite(&modes, &ModelParams::new(m, Beta::Finite(beta), 1).unwrap(), &ch).unwrap();
        let (idx, fid) = s
            .eigenvectors
            .iter()
            .map(|v| v.iter().zip(&sym).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr())
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        fidelity = fidelity.min(fid);
        errors.push((beta, ((s.eigenvalues[idx] - eta1) / eta1).abs(), idx));
    }
    let s0 = sector_spectrum(&modes, &zero_t(m, 1), &ch).unwrap();
    let zero_fid = s0.eigenvectors[1].iter().zip(&sym).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr();
    fidelity = fidelity.min(zero_fid);
    let decreasing = errors.windows(2).all(|e| e[1].1 < e[0].1);
    let at_most_inverse_beta = errors.windows(2).all(|e| e[1].1 * e[1].0 <= e[0].1 * e[0].0);
    pass &= decreasing && at_most_inverse_beta && fidelity >= C8_FIDELITY;
    parts.push(format!(
        "eta_1 rel errors {} (rank {} of 4; decreasing {decreasing}, beta*err non-increasing {at_most_inverse_beta})",
        errors.iter().map(|e| format!("beta={}: {:.2e}", e.0, e.1)).collect::<Vec<_>>().join(", "),
        errors[0].2 + 1
    ));
    parts.push(format!("eta_1 fidelity {:.12}", fidelity));
    outcome(pass, parts.join("; "))
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_cgdist")).args(args).output().expect("cgdist runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_9() -> Outcome {
    let runs: [&[&str]; 4] = [
        &[
            "--command",
            "alpha",
            "--perturbation",
            "v4",
            "--dim",
            "2",
            "--sigma",
            "0.5",
            "--yphi2",
            "1e-2",
            "--ypi2",
            "1e4",
            "--steps",
            "20000",
            "--burn",
            "2000",
            "--chains",
            "4",
            "--seed",
            "11",
        ],
        &[
            "--command",
            "alpha-sweep",
            "--perturbation",
            "v2",
            "--dim",
            "1",
            "--sigma-grid",
            "0.1:10:4",
            "--yphi2",
            "0.2",
            "--ypi2",
            "10",
            "--steps",
            "20000",
            "--burn",
            "2000",
            "--chains",
            "2",
            "--seed",
            "3",
            "--format",
            "json",
        ],
        &["--command", "spectrum", "--modes", "0.5;-0.5;0.2", "--sigma", "0.3", "--yphi2", "2", "--ypi2", "20"],
        &[
            "--command",
            "density",
            "--perturbation",
            "v2",
            "--dim",
            "3",
            "--sigma",
            "1s0",
            "--mass",
            "2",
            "--yphi2",
            "1e-3s0",
            "--ypi2",
            "1e3/s0",
        ],
    ];
    let mut identical = 0;
    let mut notes = Vec::new();
    for args in runs {
        let (c1, o1) = run_cli(args);
        let (c2, o2) = run_cli(args);
        if c1 == 0 && c2 == 0 && !o1.is_empty() && o1 == o2 {
            identical += 1;
        } else {
            notes.push(format!("{} (exit {c1}/{c2})", args[1]));
        }
    }
    outcome(identical == runs.len(), format!("{identical}/{} runs byte-identical {}", runs.len(), notes.join(" ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("marginal dimension of the quartic coupling", criterion_1),
        ("figure dashed curve plateau and transition", criterion_2),
        ("figure solid curve sign and crossing", criterion_3),
        ("mass-term exponents", criterion_4),
        ("Monte Carlo vs quadrature", criterion_5),
        ("algebraic invariants", criterion_6),
        ("large-noise universality", criterion_7),
        ("spectral cross-check", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        failed += usize::from(!o.pass);
        println!("criterion {}: {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
