//! Replica scheduling.
//!
//! Replica `r` always sees the field seeded by `derive_seed(seed, r)`, and
//! results come back in replica order, so any reduction done by the caller
//! is independent of the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::EnvField;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub replicas: usize,
    pub seed: u64,
    /// `None` uses the global pool.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(replicas: usize, seed: u64) -> Self {
        McConfig { replicas, seed, workers: None }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    /// Same replica count and workers, independent seed stream.
    pub fn substream(&self, tag: u64) -> Self {
        McConfig { seed: crate::env::derive_seed(self.seed ^ 0x5EED_5EED_5EED_5EED, tag), ..*self }
    }

    pub fn field(&self, r: usize) -> EnvField {
        EnvField::replica(self.seed, r as u64)
    }
}

/// Run `f(r, field_r)` for every replica, in parallel, returning results by index.
pub fn map_replicas<T, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &EnvField) -> T + Sync + Send,
{
    let run = || -> Vec<T> {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|r| f(r, &cfg.field(r)))
            .collect()
    };
    match cfg.workers {
        None => Ok(run()),
        Some(0) => Err(Error::InvalidArgument("workers must be >= 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
            Ok(pool.install(run))
        }
    }
}

/// Like [`map_replicas`] for fallible replica bodies; the first failure by
/// index wins.
pub fn try_map_replicas<T, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &EnvField) -> Result<T> + Sync + Send,
{
    map_replicas(cfg, f)?.into_iter().collect()
}

/// Replicas per reduction chunk. Fixed, so chunk boundaries do not depend on
/// the worker count.
pub const CHUNK: usize = 64;

/// Fold replicas chunk by chunk in parallel, then merge chunk results in
/// index order.
pub fn fold_replicas<A, I, F, M>(cfg: &McConfig, init: I, fold: F, mut merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, usize, &EnvField) + Sync + Send,
    M: FnMut(&mut A, A),
{
    let chunks = cfg.replicas.div_ceil(CHUNK);
    let chunk_cfg = McConfig { replicas: chunks, ..*cfg };
    let parts = map_replicas(&chunk_cfg, |c, _| {
        let mut acc = init();
        for r in c * CHUNK..((c + 1) * CHUNK).min(cfg.replicas) {
            fold(&mut acc, r, &cfg.field(r));
        }
        acc
    })?;
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Environment;

    #[test]
    fn order_and_worker_independence() {
        let cfg = McConfig::new(500, 17);
        let a = map_replicas(&cfg.with_workers(1), |r, f| (r, f.uniform(3, 1))).unwrap();
        let b = map_replicas(&cfg.with_workers(4), |r, f| (r, f.uniform(3, 1))).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, &(r, _))| i == r));
        assert!(map_replicas(&cfg.with_workers(0), |r, _| r).is_err());
    }

    #[test]
    fn fold_is_worker_independent() {
        let cfg = McConfig::new(1000, 3);
        let run = |w| {
            fold_replicas(
                &cfg.with_workers(w),
                || 0.0f64,
                |a, _, f| *a += f.uniform(0, 0).ln(),
                |a, b| *a += b,
            )
            .unwrap()
        };
        assert_eq!(run(1).to_bits(), run(3).to_bits());
    }

    #[test]
    fn substreams_differ() {
        let cfg = McConfig::new(1, 5);
        assert_ne!(cfg.substream(1).seed, cfg.substream(2).seed);
        assert_ne!(cfg.substream(1).seed, cfg.seed);
    }
}
