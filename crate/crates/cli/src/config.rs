use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use operc::BlockSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    #[default]
    Tau,
    U,
    AlphaN,
    Addingpoints,
    Contours,
    Crossing,
    CompareTau,
    CompareU,
    CompareCrossing,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    #[default]
    Origin,
    /// Both columns at or below 0, cut at `-k - n`.
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub n: usize,
    pub k: i64,
    pub slack: usize,
    pub start: StartKind,
    pub first_fixed: bool,
    pub target: Option<(i64, i64)>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::Tau,
            n: 5,
            k: 2,
            slack: operc::oracle::DEFAULT_SLACK,
            start: StartKind::Origin,
            first_fixed: true,
            target: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockConfig {
    pub spec: BlockSpec,
    /// Levels of the eta process run from the origin.
    pub eta_levels: usize,
    /// Half-width of the block range for the footprint check.
    pub footprint_range: i64,
    pub splice_trials: usize,
    pub eps: f64,
    pub peierls_n: u64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            spec: BlockSpec::parse("0.75", "0.2", 10).expect("valid default spec"),
            eta_levels: 20,
            footprint_range: 20,
            splice_trials: 1000,
            eps: 1e-14,
            peierls_n: 10,
        }
    }
}

/// Every parameter of a run. Absent options take command defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicas: Option<usize>,
    pub p: Option<f64>,
    pub p_grid: Option<Vec<f64>>,
    pub horizon: Option<usize>,
    pub k: Option<i64>,
    /// Levels for alpha_hat in rho and pc, and the range of the upper-tail fit.
    pub alpha_levels: Option<usize>,
    pub threshold: f64,
    pub tolerance: f64,
    pub alpha_prime: Option<f64>,
    pub n_min: usize,
    pub death_horizon: Option<usize>,
    pub block: BlockConfig,
    pub oracle: OracleConfig,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            replicas: None,
            p: None,
            p_grid: None,
            horizon: None,
            k: None,
            alpha_levels: None,
            threshold: 0.2,
            tolerance: 0.01,
            alpha_prime: None,
            n_min: 5,
            death_horizon: None,
            block: BlockConfig::default(),
            oracle: OracleConfig::default(),
            workers: None,
            out: None,
            format: Format::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn render(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The config with fields that cannot change results cleared.
    pub fn reproducible(&self) -> ExperimentConfig {
        ExperimentConfig { workers: None, out: None, format: Format::Csv, ..self.clone() }
    }

    /// SHA-256 of the reproducible part, hex.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.reproducible()).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn mc(&self, default_replicas: usize) -> operc::McConfig {
        operc::McConfig { replicas: self.replicas.unwrap_or(default_replicas), seed: self.seed, workers: self.workers }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "operc", version, about = "Oriented triangular site percolation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Comma-separated probabilities.
    #[arg(long, global = true, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Directory for result files; without it the table goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Slope estimate alpha_n = E[ubar_n] / n.
    Alpha,
    /// Cluster boundary slope, direct and from alpha.
    Rho,
    /// Survival to the horizon.
    Theta,
    /// Bisection bracket for the critical point.
    Pc,
    /// Exponential tail fits.
    Tails,
    /// Monotonicity of alpha over a p grid.
    Mono,
    /// Block construction: geometry, eta statistics, footprint, splice, Peierls.
    Block,
    /// Per-configuration invariant suite.
    Verify,
    /// Exact small-instance computations.
    Oracle(OracleArgs),
}

#[derive(Args, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub kind: Option<OracleKind>,
    /// Level (tau, u, alpha-n), largest n (addingpoints) or largest length (contours).
    #[arg(long)]
    pub n: Option<usize>,
    /// Truncation depth.
    #[arg(long)]
    pub k: Option<i64>,
    #[arg(long)]
    pub slack: Option<usize>,
    #[arg(long, value_enum)]
    pub start: Option<StartKind>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Alpha => "alpha",
            Command::Rho => "rho",
            Command::Theta => "theta",
            Command::Pc => "pc",
            Command::Tails => "tails",
            Command::Mono => "mono",
            Command::Block => "block",
            Command::Verify => "verify",
            Command::Oracle(_) => "oracle",
        }
    }
}

/// Merge file, `OPERC_SEED` and flags, in increasing priority.
pub fn resolve(cli: &Cli, env_seed: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.flags.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = env_seed {
        cfg.seed = s.trim().parse().map_err(|_| CliError::Config(format!("OPERC_SEED is not a u64: {s:?}")))?;
    }
    let f = &cli.flags;
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if f.replicas.is_some() {
        cfg.replicas = f.replicas;
    }
    if f.p.is_some() {
        cfg.p = f.p;
    }
    if f.p_grid.is_some() {
        cfg.p_grid = f.p_grid.clone();
    }
    if f.horizon.is_some() {
        cfg.horizon = f.horizon;
    }
    if f.out.is_some() {
        cfg.out = f.out.clone();
    }
    if f.workers.is_some() {
        cfg.workers = f.workers;
    }
    if let Some(v) = f.format {
        cfg.format = v;
    }
    if let Command::Oracle(a) = cli.command {
        let o = &mut cfg.oracle;
        o.kind = a.kind.unwrap_or(o.kind);
        o.n = a.n.unwrap_or(o.n);
        o.k = a.k.unwrap_or(o.k);
        o.slack = a.slack.unwrap_or(o.slack);
        o.start = a.start.unwrap_or(o.start);
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let probs = cfg.p.iter().chain(cfg.p_grid.iter().flatten());
    if let Some(p) = probs.into_iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CliError::Config(format!("probability {p} outside [0, 1]")));
    }
    if cfg.workers == Some(0) {
        return Err(CliError::Config("workers must be >= 1".into()));
    }
    if cfg.replicas == Some(0) {
        return Err(CliError::Config("replicas must be >= 1".into()));
    }
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(CliError::Config(format!("threshold {} outside (0, 1)", cfg.threshold)));
    }
    cfg.block.spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.p_grid = Some(vec![0.7, 0.8]);
        c.oracle.target = Some((0, -2));
        c.workers = Some(3);
        assert_eq!(ExperimentConfig::parse(&c.render()).unwrap(), c);
        assert_eq!(ExperimentConfig::parse("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn digest_ignores_plumbing() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { workers: Some(8), format: Format::Json, out: Some("x".into()), ..a.clone() };
        assert_eq!(a.digest(), b.digest());
        let c = ExperimentConfig { seed: 2, ..a.clone() };
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"block": {"spec": {"alpha": "0.75", "delta": "0.3", "L": 10}}}"#).is_err());
    }

    #[test]
    fn priority_order() {
        let cli = Cli::parse_from(["operc", "--seed", "9", "theta"]);
        assert_eq!(resolve(&cli, Some("4")).unwrap().seed, 9);
        let cli = Cli::parse_from(["operc", "theta"]);
        assert_eq!(resolve(&cli, Some("4")).unwrap().seed, 4);
        assert!(resolve(&cli, Some("x")).is_err());
        let cli = Cli::parse_from(["operc", "--p", "1.5", "theta"]);
        assert!(resolve(&cli, None).is_err());
    }
}
