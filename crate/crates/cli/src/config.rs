//! Run configuration: a TOML file merged with command-line flags.

use std::path::PathBuf;

use cgdist::{Beta, ChannelParams, McConfig, MetricKind, ModelParams, PerturbationKind, Statistics, SweepMethod};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

/// Errors in the configuration itself; reported with exit status 64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Density,
    Alpha,
    AlphaSweep,
    Spectrum,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationArg {
    V2,
    V4,
    Phik,
    Pik,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Chi2,
    Fisher,
    LargeNoise,
    RawBures,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Chi2 => MetricKind::Chi2,
            MetricArg::Fisher => MetricKind::Fisher,
            MetricArg::LargeNoise => MetricKind::LargeNoise,
            MetricArg::RawBures => MetricKind::RawBures,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Mc,
    Fd,
}

/// Command-line flags. Every flag may also be set in the `--config` file; flags win.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "cgdist", version, about = "Coarse-grained distinguishability of free-field Gaussian states")]
pub struct Cli {
    /// TOML file with default values for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Spatial dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Field mass; sets the unit sigma0 = 1/m.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Inverse temperature, a number or `inf`.
    #[arg(long)]
    pub beta: Option<String>,
    /// Spatial resolution; accepts the suffixes `s0` (times sigma0) and `/s0` (divided by sigma0).
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,
    /// Squared field resolution, same suffixes as `--sigma`.
    #[arg(long, allow_hyphen_values = true)]
    pub yphi2: Option<String>,
    /// Squared momentum resolution, same suffixes as `--sigma`.
    #[arg(long, allow_hyphen_values = true)]
    pub ypi2: Option<String>,
    #[arg(long, value_enum)]
    pub perturbation: Option<PerturbationArg>,
    /// Use the classical field instead of the quantum one.
    #[arg(long)]
    pub classical: bool,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metropolis steps per chain, burn-in included.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burn: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long)]
    pub step_scale: Option<f64>,
    /// Exponent estimator: Monte Carlo or finite differences of the quadrature (mass term only).
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Log-spaced sigma grid `lo:hi:n`; suffixes as for `--sigma`.
    #[arg(long)]
    pub sigma_grid: Option<String>,
    /// Linear momentum grid `lo:hi:n` for `validate` and single-mode densities.
    #[arg(long)]
    pub k_grid: Option<String>,
    /// Sector momenta for `spectrum`: vectors separated by `;`, components by `,`.
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Smallest eigenvalue kept by `spectrum`.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Run even when the channel violates the resolution condition.
    #[arg(long)]
    pub allow_invalid: bool,
}

/// A number in TOML given either literally or as a string with a unit suffix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn into_text(self) -> String {
        match self {
            Scalar::Number(x) => format!("{x:e}"),
            Scalar::Text(s) => s,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    command: Option<Command>,
    dim: Option<usize>,
    mass: Option<f64>,
    beta: Option<Scalar>,
    sigma: Option<Scalar>,
    yphi2: Option<Scalar>,
    ypi2: Option<Scalar>,
    perturbation: Option<PerturbationArg>,
    classical: Option<bool>,
    metric: Option<MetricArg>,
    seed: Option<u64>,
    steps: Option<usize>,
    burn: Option<usize>,
    chains: Option<usize>,
    thinning: Option<usize>,
    step_scale: Option<f64>,
    method: Option<MethodArg>,
    out: Option<PathBuf>,
    format: Option<Format>,
    sigma_grid: Option<String>,
    k_grid: Option<String>,
    modes: Option<String>,
    cutoff: Option<f64>,
    allow_invalid: Option<bool>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelParams,
    pub channel: ChannelParams,
    pub perturbation: PerturbationArg,
    pub statistics: Statistics,
    pub metric: MetricArg,
    pub mc: McConfig,
    pub method: MethodArg,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub sigma_grid: Option<Vec<f64>>,
    pub k_grid: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub cutoff: f64,
    pub allow_invalid: bool,
}

impl RunConfig {
    /// The perturbation as understood by the library.
    pub fn perturbation_kind(&self) -> PerturbationKind {
        match (self.perturbation, self.statistics) {
            (PerturbationArg::V2, Statistics::Quantum) => PerturbationKind::V2Quantum,
            (PerturbationArg::V2, Statistics::Classical) => PerturbationKind::V2Classical,
            (PerturbationArg::V4, Statistics::Quantum) => PerturbationKind::V4Quantum,
            (PerturbationArg::V4, Statistics::Classical) => PerturbationKind::V4Classical,
            (PerturbationArg::Phik, _) => PerturbationKind::PhiK,
            (PerturbationArg::Pik, _) => PerturbationKind::PiK,
        }
    }

    pub fn sweep_method(&self) -> SweepMethod {
        match self.method {
            MethodArg::Mc => SweepMethod::MonteCarlo,
            MethodArg::Fd => SweepMethod::FiniteDifference,
        }
    }
}

/// Parses a value with an optional unit suffix: `s0` multiplies by
/// `sigma0 = 1/m`, `/s0` divides by it.
pub fn parse_scaled(text: &str, mass: f64, what: &str) -> Result<f64, ConfigError> {
    let t = text.trim();
    let (number, factor) = if let Some(head) = t.strip_suffix("/s0") {
        (head, Some(mass))
    } else if let Some(head) = t.strip_suffix("s0") {
        (head, if mass > 0.0 { Some(1.0 / mass) } else { None })
    } else {
        (t, Some(1.0))
    };
    let factor = match factor {
        Some(f) if f > 0.0 => f,
        _ => return bad(format!("{what}: the sigma0 suffix needs a positive mass")),
    };
    let x: f64 = number.trim().parse().map_err(|_| ConfigError(format!("{what}: cannot parse {text:?}")))?;
    if !x.is_finite() {
        return bad(format!("{what}: value must be finite, got {text:?}"));
    }
    Ok(x * factor)
}

fn parse_grid(text: &str, what: &str, mass: f64) -> Result<(f64, f64, usize), ConfigError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return bad(format!("{what}: expected lo:hi:n, got {text:?}"));
    }
    let lo = parse_scaled(parts[0], mass, what)?;
    let hi = parse_scaled(parts[1], mass, what)?;
    let n: usize = parts[2].trim().parse().map_err(|_| ConfigError(format!("{what}: bad point count in {text:?}")))?;
    if n == 0 || hi < lo || (n == 1 && hi != lo) {
        return bad(format!("{what}: need lo <= hi and n >= 1 (n = 1 only when lo = hi), got {text:?}"));
    }
    Ok((lo, hi, n))
}

/// Log-spaced grid `lo:hi:n` with positive end points.
pub fn parse_log_grid(text: &str, mass: f64) -> Result<Vec<f64>, ConfigError> {
    let (lo, hi, n) = parse_grid(text, "sigma-grid", mass)?;
    if lo <= 0.0 {
        return bad("sigma-grid: end points must be positive");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// Linearly spaced grid `lo:hi:n`.
pub fn parse_linear_grid(text: &str) -> Result<Vec<f64>, ConfigError> {
    let (lo, hi, n) = parse_grid(text, "k-grid", 1.0)?;
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
}

/// Parses `k1;k2;...` with comma-separated components.
pub fn parse_modes(text: &str, dim: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    text.split(';')
        .map(|vec| {
            let comps: Result<Vec<f64>, _> = vec.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let comps = comps.map_err(|_| ConfigError(format!("modes: cannot parse {vec:?}")))?;
            if comps.len() != dim {
                return bad(format!("modes: {vec:?} has {} components, dimension is {dim}", comps.len()));
            }
            Ok(comps)
        })
        .collect()
}

fn load_file(path: &PathBuf) -> Result<FileConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("malformed config {}: {e}", path.display())))
}

/// Merges the config file (if any) with the flags and validates the result.
pub fn resolve(cli: Cli) -> Result<RunConfig, ConfigError> {
    let file = match &cli.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    let command = cli.command.or(file.command).ok_or_else(|| ConfigError("--command is required".into()))?;
    let dim = cli.dim.or(file.dim).unwrap_or(1);
    let mass = cli.mass.or(file.mass).unwrap_or(1.0);
    let beta_text = cli.beta.or(file.beta.map(Scalar::into_text)).unwrap_or_else(|| "inf".into());
    let beta: Beta = beta_text.parse().map_err(|e: cgdist::Error| ConfigError(format!("beta: {e}")))?;
    let model = ModelParams::new(mass, beta, dim).map_err(|e| ConfigError(e.to_string()))?;

    let scaled = |flag: Option<String>, file: Option<Scalar>, default: f64, what: &str| -> Result<f64, ConfigError> {
        match flag.or(file.map(Scalar::into_text)) {
            Some(t) => parse_scaled(&t, mass, what),
            None => Ok(default),
        }
    };
    let sigma = scaled(cli.sigma, file.sigma, 1.0, "sigma")?;
    let yphi2 = scaled(cli.yphi2, file.yphi2, 1.0, "yphi2")?;
    let ypi2 = scaled(cli.ypi2, file.ypi2, 1.0, "ypi2")?;
    let channel = ChannelParams::new(sigma, yphi2, ypi2).map_err(|e| ConfigError(e.to_string()))?;

    let defaults = McConfig::default();
    let mc = McConfig {
        seed: cli.seed.or(file.seed).unwrap_or(defaults.seed),
        n_steps: cli.steps.or(file.steps).unwrap_or(defaults.n_steps),
        n_burn: cli.burn.or(file.burn).unwrap_or(defaults.n_burn),
        step_scale: cli.step_scale.or(file.step_scale).unwrap_or(defaults.step_scale),
        n_chains: cli.chains.or(file.chains).unwrap_or(defaults.n_chains),
        thinning: cli.thinning.or(file.thinning).unwrap_or(defaults.thinning),
    };
    mc.validate().map_err(|e| ConfigError(e.to_string()))?;

    let sigma_grid = match cli.sigma_grid.or(file.sigma_grid) {
        Some(t) => Some(parse_log_grid(&t, mass)?),
        None => None,
    };
    if command == Command::AlphaSweep && sigma_grid.is_none() {
        return bad("alpha-sweep needs --sigma-grid");
    }
    let k_grid = parse_linear_grid(&cli.k_grid.or(file.k_grid).unwrap_or_else(|| "0:10:11".into()))?;
    let modes = match cli.modes.or(file.modes) {
        Some(t) => parse_modes(&t, dim)?,
        None if command == Command::Spectrum => return bad("spectrum needs --modes"),
        None => Vec::new(),
    };
    let classical = cli.classical || file.classical.unwrap_or(false);
    Ok(RunConfig {
        command,
        model,
        channel,
        perturbation: cli.perturbation.or(file.perturbation).unwrap_or(PerturbationArg::V4),
        statistics: if classical { Statistics::Classical } else { Statistics::Quantum },
        metric: cli.metric.or(file.metric).unwrap_or(MetricArg::LargeNoise),
        mc,
        method: cli.method.or(file.method).unwrap_or(MethodArg::Mc),
        out: cli.out.or(file.out),
        format: cli.format.or(file.format).unwrap_or(Format::Csv),
        sigma_grid,
        k_grid,
        modes,
        cutoff: cli.cutoff.or(file.cutoff).unwrap_or(0.0),
        allow_invalid: cli.allow_invalid || file.allow_invalid.unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_scaled("1e-3s0", 2.0, "x").unwrap(), 5e-4);
        assert_eq!(parse_scaled("1e10/s0", 2.0, "x").unwrap(), 2e10);
        assert_eq!(parse_scaled("0.25", 0.0, "x").unwrap(), 0.25);
        assert!(parse_scaled("1s0", 0.0, "x").is_err());
        assert!(parse_scaled("abc", 1.0, "x").is_err());
    }

    #[test]
    fn grids() {
        let g = parse_log_grid("1e-4:1e2:7", 1.0).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!((g[0], g[6]), (1e-4, 1e2));
        assert!((g[2] - 1e-2).abs() < 1e-15);
        assert_eq!(parse_linear_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_log_grid("0:1:3", 1.0).is_err());
        assert!(parse_linear_grid("1:0:3").is_err());
    }

    #[test]
    fn modes() {
        assert_eq!(parse_modes("0.5;-0.5", 1).unwrap(), vec![vec![0.5], vec![-0.5]]);
        assert_eq!(parse_modes("1,2;3,4", 2).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(parse_modes("1,2;3", 2).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "command = \"density\"\nmass = 2.0\nsigma = \"1s0\"\nseed = 4\nperturbation = \"v2\"\n")
            .unwrap();
        let cli = Cli { config: Some(path.clone()), seed: Some(9), ..Cli::default() };
        let rc = resolve(cli).unwrap();
        assert_eq!(rc.mc.seed, 9);
        assert_eq!(rc.channel.sigma, 0.5);
        assert_eq!(rc.command, Command::Density);
        std::fs::write(&path, "command = \"density\"\nbogus = 1\n").unwrap();
        assert!(resolve(Cli { config: Some(path), ..Cli::default() }).is_err());
    }
}
