//! Lattice geometry and the coupled random environment.
//!
//! The lattice is `{(n, m) : n >= 0, n + m even}`. An open site `(n, m)` has
//! directed edges to `(n+1, m+1)`, `(n+2, m)` and `(n+1, m-1)`. Every site
//! carries a uniform `U` drawn from a stateless keyed hash of `(seed, n, m)`,
//! and the site is open at density `p` iff `U < p`, so a single seed couples
//! all values of `p` at once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the site hash, recorded in every result file.
pub const HASH_SPEC: &str = "splitmix64-site-v1";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const LEVEL_KEY: u64 = 0xC2B2_AE3D_27D4_EB4F;
const HEIGHT_KEY: u64 = 0x1656_67B1_9E37_79F9;
const REPLICA_KEY: u64 = 0x5851_F42D_4C95_7F2D;

/// The splitmix64 output finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `r` under a master seed. Replicas never depend on each
/// other, so extending a sweep leaves earlier replicas unchanged.
pub fn derive_seed(master: u64, replica: u64) -> u64 {
    mix64(mix64(master ^ REPLICA_KEY) ^ replica.wrapping_mul(GOLDEN))
}

/// A site of the rotated lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteR {
    pub n: i64,
    pub m: i64,
}

impl SiteR {
    pub fn new(n: i64, m: i64) -> Result<Self> {
        if n < 0 || (n + m).rem_euclid(2) != 0 {
            return Err(Error::OffLattice { n, m });
        }
        Ok(SiteR { n, m })
    }

    pub const fn origin() -> Self {
        SiteR { n: 0, m: 0 }
    }

    pub fn is_valid(self) -> bool {
        self.n >= 0 && (self.n + self.m).rem_euclid(2) == 0
    }

    /// The three successors, ordered up, straight, down.
    pub fn neighbors(self) -> [SiteR; 3] {
        [
            SiteR { n: self.n + 1, m: self.m + 1 },
            SiteR { n: self.n + 2, m: self.m },
            SiteR { n: self.n + 1, m: self.m - 1 },
        ]
    }

    pub fn is_successor(self, next: SiteR) -> bool {
        self.neighbors().contains(&next)
    }
}

/// Checked form of [`SiteR::neighbors`].
pub fn neighbors(s: SiteR) -> Result<[SiteR; 3]> {
    if !s.is_valid() {
        return Err(Error::OffLattice { n: s.n, m: s.m });
    }
    Ok(s.neighbors())
}

/// A point in the reflected frame, where the cluster boundaries `w_n`, `v_n`
/// are read off column by column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteRef {
    pub x: i64,
    pub y: i64,
}

/// Reflected `(x, y)` to rotated `(x + y, y - x)`.
pub fn to_rotated(s: SiteRef) -> Result<SiteR> {
    if s.x + s.y < 0 {
        return Err(Error::BelowLevelZero { x: s.x, y: s.y });
    }
    Ok(SiteR { n: s.x + s.y, m: s.y - s.x })
}

/// Rotated `(a, b)` to reflected `((a - b) / 2, (a + b) / 2)`; exact because
/// `a + b` is even on the lattice.
pub fn to_reflected(s: SiteR) -> SiteRef {
    debug_assert!(s.is_valid());
    SiteRef { x: (s.n - s.m).div_euclid(2), y: (s.n + s.m).div_euclid(2) }
}

/// Anything that assigns a uniform variable to every lattice site.
pub trait Environment: Sync {
    fn uniform(&self, n: i64, m: i64) -> f64;

    #[inline]
    fn is_open(&self, n: i64, m: i64, p: f64) -> bool {
        self.uniform(n, m) < p
    }
}

/// Site-addressable coupled randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvField {
    seed: u64,
    #[serde(skip)]
    key: u64,
}

impl EnvField {
    pub fn new(seed: u64) -> Self {
        EnvField { seed, key: mix64(seed.wrapping_add(GOLDEN)) }
    }

    /// Field of replica `r` under `master`.
    pub fn replica(master: u64, r: u64) -> Self {
        EnvField::new(derive_seed(master, r))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash_spec(&self) -> &'static str {
        HASH_SPEC
    }

    #[inline(always)]
    pub fn bits(&self, n: i64, m: i64) -> u64 {
        let h = mix64(self.key ^ (n as u64).wrapping_mul(LEVEL_KEY));
        mix64(h ^ (m as u64).wrapping_mul(HEIGHT_KEY))
    }

    pub fn uniform_at(&self, s: SiteR) -> f64 {
        Environment::uniform(self, s.n, s.m)
    }

    pub fn is_open_at(&self, s: SiteR, p: f64) -> bool {
        Environment::is_open(self, s.n, s.m, p)
    }
}

impl Environment for EnvField {
    /// 53-bit mantissa in `[0, 1)`.
    #[inline(always)]
    fn uniform(&self, n: i64, m: i64) -> f64 {
        (self.bits(n, m) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Two fields glued along a region: sites inside use `inside`, the rest use
/// `outside`. Used to re-randomize everything outside a footprint.
pub struct SplicedEnv<'a, F: Fn(i64, i64) -> bool + Sync> {
    pub inside: &'a dyn Environment,
    pub outside: &'a dyn Environment,
    pub region: F,
}

impl<F: Fn(i64, i64) -> bool + Sync> Environment for SplicedEnv<'_, F> {
    fn uniform(&self, n: i64, m: i64) -> f64 {
        if (self.region)(n, m) {
            self.inside.uniform(n, m)
        } else {
            self.outside.uniform(n, m)
        }
    }
}

/// Every site open or closed regardless of `p`.
pub struct ConstantEnv(pub f64);

impl Environment for ConstantEnv {
    fn uniform(&self, _n: i64, _m: i64) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neighbors_of_examples() {
        let s = |n, m| SiteR::new(n, m).unwrap();
        assert_eq!(neighbors(s(0, 0)).unwrap(), [s(1, 1), s(2, 0), s(1, -1)]);
        assert_eq!(neighbors(s(3, 1)).unwrap(), [s(4, 2), s(5, 1), s(4, 0)]);
        assert_eq!(neighbors(s(1, -1)).unwrap(), [s(2, 0), s(3, -1), s(2, -2)]);
    }

    #[test]
    fn off_lattice_rejected() {
        assert!(SiteR::new(0, 1).is_err());
        assert!(SiteR::new(-2, 0).is_err());
        assert!(neighbors(SiteR { n: 1, m: 1 }).is_ok());
        assert!(neighbors(SiteR { n: 1, m: 0 }).is_err());
    }

    #[test]
    fn frame_examples() {
        assert_eq!(to_reflected(SiteR::origin()), SiteRef { x: 0, y: 0 });
        assert_eq!(to_rotated(SiteRef { x: 0, y: 0 }).unwrap(), SiteR::origin());
        assert_eq!(to_reflected(SiteR { n: 4, m: 0 }), SiteRef { x: 2, y: 2 });
        // (n, w_n) lands on rotated level n + w_n at height w_n - n
        let r = to_rotated(SiteRef { x: 5, y: 9 }).unwrap();
        assert_eq!((r.n, r.m), (14, 4));
        assert!(to_rotated(SiteRef { x: 3, y: -4 }).is_err());
    }

    #[test]
    fn openness_extremes() {
        let f = EnvField::new(7);
        for n in 0..20 {
            for m in -n..=n {
                assert!(f.is_open(n, m, 1.0));
                assert!(!f.is_open(n, m, 0.0));
            }
        }
    }

    #[test]
    fn uniform_is_roughly_uniform() {
        let f = EnvField::new(11);
        let mut bins = [0u32; 10];
        let mut count = 0;
        for n in 0..300i64 {
            for m in (-n..=n).step_by(2) {
                let u = f.uniform(n, m);
                assert!((0.0..1.0).contains(&u));
                bins[(u * 10.0) as usize] += 1;
                count += 1;
            }
        }
        let expect = count as f64 / 10.0;
        for b in bins {
            assert!((b as f64 - expect).abs() < 5.0 * expect.sqrt(), "{bins:?}");
        }
    }

    #[test]
    fn same_seed_same_field_across_threads() {
        let f = EnvField::new(99);
        let here: Vec<f64> = (0..64).map(|k| f.uniform(k, -k)).collect();
        let there = std::thread::spawn(move || {
            let g = EnvField::new(99);
            (0..64).map(|k| g.uniform(k, -k)).collect::<Vec<f64>>()
        })
        .join()
        .unwrap();
        assert_eq!(here, there);
        assert_ne!(here[3], EnvField::new(100).uniform(3, -3));
    }

    #[test]
    fn replica_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for r in 0..10_000 {
            assert!(seen.insert(derive_seed(42, r)));
        }
    }

    fn lattice_site() -> impl Strategy<Value = SiteR> {
        (0i64..1_000_000, -1_000_000i64..1_000_000)
            .prop_map(|(n, m)| SiteR { n, m: if (n + m) % 2 == 0 { m } else { m + 1 } })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn neighbors_preserve_parity(s in lattice_site()) {
            for t in neighbors(s).unwrap() {
                prop_assert!(t.is_valid());
            }
        }

        #[test]
        fn frame_round_trip(s in lattice_site()) {
            let r = to_reflected(s);
            prop_assert_eq!(to_rotated(r).unwrap(), s);
        }

        #[test]
        fn reflected_round_trip(x in -100_000i64..100_000, d in 0i64..200_000) {
            let p = SiteRef { x, y: d - x };
            prop_assert_eq!(to_reflected(to_rotated(p).unwrap()), p);
        }

        #[test]
        fn coupling_is_monotone(seed in any::<u64>(), s in lattice_site(), p in 0.0f64..1.0, dp in 0.0f64..1.0) {
            let f = EnvField::new(seed);
            let q = (p + dp).min(1.0);
            if f.is_open_at(s, p) {
                prop_assert!(f.is_open_at(s, q));
            }
        }
    }
}
