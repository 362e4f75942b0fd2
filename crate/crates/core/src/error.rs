use thiserror::Error;

use crate::env::SiteR;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site ({n}, {m}) is not on the lattice (need n >= 0 and n + m even)")]
    OffLattice { n: i64, m: i64 },
    #[error("reflected point ({x}, {y}) maps below level 0 (need x + y >= 0)")]
    BelowLevelZero { x: i64, y: i64 },
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("starter set is empty")]
    EmptyStarters,
    #[error("starter height {height} has wrong parity for column {column}")]
    StarterParity { column: u8, height: i64 },
    #[error("edge comparison at level {level} is not decidable under truncation K={k}; increase K")]
    Undecidable { level: usize, k: i64 },
    #[error("all {replicas} replicas were truncated below; increase K")]
    AllTruncated { replicas: usize },
    #[error("no surviving replicas out of {replicas}")]
    NoSurvivors { replicas: usize },
    #[error("tail fit needs at least {needed} bins with >= {min_events} events, found {found}")]
    TooFewBins {
        needed: usize,
        min_events: u64,
        found: usize,
    },
    #[error("no finite deaths observed; nothing to fit")]
    NoFiniteDeaths,
    #[error("hypothesis unmet: alpha' = {alpha_prime} must exceed alpha_hat + 3 SE = {limit}")]
    AlphaPrimeTooSmall { alpha_prime: f64, limit: f64 },
    #[error("bisection cannot bracket threshold {threshold}: {reason}")]
    NoBracket { threshold: f64, reason: String },
    #[error("block spec: {0}")]
    BlockSpec(String),
    #[error("instance too large for exact enumeration: {sites} sites > limit {limit}")]
    TooLarge { sites: usize, limit: usize },
    #[error("splice failed at block ({n}, {m}): {reason}")]
    SpliceFailed { n: i64, m: i64, reason: String },
    #[error("path step from {from:?} to {to:?} is invalid")]
    BadPath { from: SiteR, to: SiteR },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::BadProbability(p))
    }
}
