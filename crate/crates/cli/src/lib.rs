//! Front end of the `cgdist` binary: configuration, dispatch and output.

pub mod config;
pub mod output;

use std::io::Write;

use cgdist::{
    alpha_sweep, dist_linear, fd_alpha_v2, first_order_metric, mc_alpha, quad_density_v2, relevance_report,
    sector_spectrum_finite, validate_channel, AlphaEstimate, Beta, Error, MetricKind, PerturbationKind, RelevanceEntry,
    Statistics, SWEEP_FD_STEP,
};

pub use config::{resolve, Cli, Command, ConfigError, Format, MethodArg, PerturbationArg, RunConfig};
pub use output::{Cell, Table, SCHEMA_VERSION};

/// Why a run stopped, mapped onto the process exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Malformed or contradictory configuration; exit status 64.
    Config(String),
    /// The channel violates the resolution condition; exit status 2.
    InvalidChannel(String),
    /// A numerical routine failed; exit status 1.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 64,
            Failure::InvalidChannel(_) => 2,
            Failure::Numerical(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::InvalidChannel(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidChannel { .. } => Failure::InvalidChannel(msg),
            Error::InvalidParameter(_)
            | Error::UnsupportedMetric(_)
            | Error::UnsupportedPerturbation(_)
            | Error::FiniteTemperatureRequired
            | Error::ZeroTemperatureRequired
            | Error::DuplicateModes
            | Error::SectorTooLarge(_) => Failure::Config(msg),
            _ => Failure::Numerical(msg),
        }
    }
}

/// Result of a run: the table, diagnostics for standard error, and the
/// failure (if any) that should decide the exit status once the table is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub diagnostics: Vec<String>,
    pub failure: Option<Failure>,
}

impl Report {
    fn ok(table: Table) -> Self {
        Report { table, diagnostics: Vec::new(), failure: None }
    }
}

/// Momentum far above any resolution scale, where the resolution condition is tightest.
const ASYMPTOTIC_K_SIGMA: f64 = 40.0;

fn check_asymptotic_validity(cfg: &RunConfig, sigma_positive: bool) -> Result<(), Failure> {
    if cfg.allow_invalid || !sigma_positive {
        return Ok(());
    }
    let v = validate_channel(&[ASYMPTOTIC_K_SIGMA], &cfg.channel.with_sigma(1.0));
    if v.valid {
        Ok(())
    } else {
        Err(Failure::InvalidChannel(format!(
            "channel violates the resolution condition at large momentum (smallest eigenvalue {:e}); \
             pass --allow-invalid to run anyway",
            v.min_eigenvalue
        )))
    }
}

fn momentum(cfg: &RunConfig, k: f64) -> Vec<f64> {
    let mut v = vec![0.0; cfg.model.dim];
    v[0] = k;
    v
}

fn alpha_row(sigma: f64, seed: u64, est: &AlphaEstimate) -> Vec<Cell> {
    vec![
        Cell::Float(sigma),
        Cell::Float(est.alpha),
        Cell::Float(est.std_err),
        est.acceptance_rate.into(),
        Cell::Int(seed),
    ]
}

const ALPHA_COLUMNS: [&str; 5] = ["sigma", "alpha", "std_err", "acceptance_rate", "seed"];

fn run_density(cfg: &RunConfig) -> Result<Report, Failure> {
    check_asymptotic_validity(cfg, cfg.channel.sigma > 0.0)?;
    match cfg.perturbation {
        PerturbationArg::V2 => {
            let d = quad_density_v2(&cfg.model, &cfg.channel, cfg.statistics)?;
            let mut t = Table::new(vec!["value", "rel_err_estimate"]);
            t.push(vec![Cell::Float(d.value), Cell::Float(d.rel_err)]);
            Ok(Report::ok(t))
        }
        PerturbationArg::V4 => {
            Err(Failure::Numerical("the quartic density has no deterministic evaluator; use --command alpha".into()))
        }
        PerturbationArg::Phik | PerturbationArg::Pik => {
            let kind = cfg.perturbation_kind();
            let metric = MetricKind::from(cfg.metric);
            let mut t = Table::new(vec!["k", "value"]);
            for &k in &cfg.k_grid {
                let kv = momentum(cfg, k);
                let value = if metric == MetricKind::LargeNoise {
                    dist_linear(&kv, &cfg.model, &cfg.channel, kind)?
                } else {
                    let m = first_order_metric(&kv, &cfg.model, &cfg.channel, metric)?;
                    let i = if kind == PerturbationKind::PhiK { 0 } else { 1 };
                    m.get(i, i).re
                };
                t.push(vec![Cell::Float(k), Cell::Float(value)]);
            }
            Ok(Report::ok(t))
        }
    }
}

fn require_sampled(cfg: &RunConfig) -> Result<(), Failure> {
    match cfg.perturbation {
        PerturbationArg::Phik | PerturbationArg::Pik => {
            Err(Failure::Config("scaling exponents are defined for v2 and v4 only".into()))
        }
        PerturbationArg::V4 if cfg.method == MethodArg::Fd => {
            Err(Failure::Config("the finite-difference method supports v2 only".into()))
        }
        _ => Ok(()),
    }
}

fn run_alpha(cfg: &RunConfig) -> Result<Report, Failure> {
    require_sampled(cfg)?;
    check_asymptotic_validity(cfg, cfg.channel.sigma > 0.0)?;
    let sigma = cfg.channel.sigma;
    let est = match cfg.method {
        MethodArg::Mc => mc_alpha(cfg.perturbation_kind(), &cfg.model, &cfg.channel, &cfg.mc)?,
        MethodArg::Fd => fd_alpha_v2(&cfg.model, &cfg.channel, cfg.statistics, sigma, SWEEP_FD_STEP)?,
    };
    let mut t = Table::new(ALPHA_COLUMNS.to_vec());
    t.push(alpha_row(sigma, cfg.mc.seed, &est));
    Ok(Report { table: t, diagnostics: est.warnings.clone(), failure: None })
}

fn run_sweep(cfg: &RunConfig) -> Result<Report, Failure> {
    require_sampled(cfg)?;
    let sigmas = cfg.sigma_grid.as_deref().unwrap_or_default();
    check_asymptotic_validity(cfg, sigmas.iter().any(|&s| s > 0.0))?;
    let points = alpha_sweep(cfg.perturbation_kind(), &cfg.model, &cfg.channel, sigmas, &cfg.mc, cfg.sweep_method())?;
    let mut t = Table::new(ALPHA_COLUMNS.to_vec());
    let mut diagnostics = Vec::new();
    let mut failed = 0usize;
    for p in &points {
        match &p.estimate {
            Ok(est) => {
                diagnostics.extend(est.warnings.iter().map(|w| format!("sigma {:e}: {w}", p.sigma)));
                t.push(alpha_row(p.sigma, p.seed, est));
            }
            Err(e) => {
                failed += 1;
                diagnostics.push(format!("sigma {:e}: {e}", p.sigma));
                t.push(vec![Cell::Float(p.sigma), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Int(p.seed)]);
            }
        }
    }
    let failure = (failed > 0).then(|| Failure::Numerical(format!("{failed} of {} sweep points failed", points.len())));
    Ok(Report { table: t, diagnostics, failure })
}

fn run_spectrum(cfg: &RunConfig) -> Result<Report, Failure> {
    if !cfg.allow_invalid {
        for k in &cfg.modes {
            let v = validate_channel(k, &cfg.channel);
            if !v.valid {
                return Err(Error::InvalidChannel { k_norm: v.k_norm, min_eigenvalue: v.min_eigenvalue }.into());
            }
        }
    }
    let entries: Vec<RelevanceEntry> = match cfg.model.beta {
        Beta::Infinite => relevance_report(&cfg.modes, &cfg.model, &cfg.channel, cfg.cutoff)?,
        Beta::Finite(_) => {
            let mut modes = cfg.modes.clone();
            modes.sort_by(|a, b| {
                a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            });
            let spec = sector_spectrum_finite(&modes, &cfg.model, &cfg.channel)?;
            spec.eigenvalues
                .iter()
                .zip(&spec.eigenvectors)
                .filter(|(l, _)| **l >= cfg.cutoff)
                .map(|(&eigenvalue, v)| RelevanceEntry {
                    eigenvalue,
                    observable: cgdist::spectral::observable_string(&modes, v),
                })
                .collect()
        }
    };
    let mut t = Table::new(vec!["eigenvalue", "observable"]);
    for e in entries {
        t.push(vec![Cell::Float(e.eigenvalue), Cell::Text(e.observable)]);
    }
    Ok(Report::ok(t))
}

fn run_validate(cfg: &RunConfig) -> Result<Report, Failure> {
    let mut t = Table::new(vec!["k", "valid", "min_eigenvalue", "cp_min_eigenvalue"]);
    let mut first_bad = None;
    for &k in &cfg.k_grid {
        let v = validate_channel(&momentum(cfg, k), &cfg.channel);
        if !v.valid && first_bad.is_none() {
            first_bad = Some(v);
        }
        t.push(vec![
            Cell::Float(k),
            Cell::Bool(v.valid),
            Cell::Float(v.min_eigenvalue),
            Cell::Float(v.cp_min_eigenvalue),
        ]);
    }
    let failure = match first_bad {
        Some(v) if !cfg.allow_invalid => Some(Failure::InvalidChannel(format!(
            "channel is not valid from |k| = {} on (smallest eigenvalue {:e})",
            v.k_norm, v.min_eigenvalue
        ))),
        _ => None,
    };
    Ok(Report { table: t, diagnostics: Vec::new(), failure })
}

/// Executes a resolved configuration.
pub fn run(cfg: &RunConfig) -> Result<Report, Failure> {
    if cfg.perturbation_kind().is_classical() && cfg.model.beta.is_infinite() {
        return Err(Failure::Config("the classical field needs a finite --beta".into()));
    }
    if cfg.statistics == Statistics::Classical && cfg.command == Command::Spectrum {
        return Err(Failure::Config("spectrum is defined for the quantum field only".into()));
    }
    match cfg.command {
        Command::Density => run_density(cfg),
        Command::Alpha => run_alpha(cfg),
        Command::AlphaSweep => run_sweep(cfg),
        Command::Spectrum => run_spectrum(cfg),
        Command::Validate => run_validate(cfg),
    }
}

/// Renders the table in the configured format.
pub fn render(cfg: &RunConfig, table: &Table) -> Result<String, Failure> {
    match cfg.format {
        Format::Csv => Ok(table.to_csv()),
        Format::Json => table.to_json(cfg).map_err(|e| Failure::Numerical(format!("cannot encode JSON: {e}"))),
    }
}

/// Resolves, runs and writes the output; returns the exit status.
pub fn execute(cli: Cli, stderr: &mut impl Write) -> u8 {
    let outcome = resolve(cli).map_err(Failure::from).and_then(|cfg| {
        let report = run(&cfg)?;
        let text = render(&cfg, &report.table)?;
        match &cfg.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display())))?,
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Numerical(format!("cannot write output: {e}")))?,
        }
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            for d in &report.diagnostics {
                let _ = writeln!(stderr, "warning: {d}");
            }
            match report.failure {
                Some(f) => {
                    let _ = writeln!(stderr, "error: {}", f.message());
                    f.exit_code()
                }
                None => 0,
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.exit_code()
        }
    }
}
