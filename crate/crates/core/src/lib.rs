pub mod block;
pub mod env;
pub mod error;
pub mod ext;
pub mod estimators;
pub mod frontier;
pub mod oracle;
pub mod replicas;
pub mod stats;
pub mod verify;

pub use env::{derive_seed, neighbors, to_reflected, to_rotated, EnvField, Environment, SiteR, SiteRef, HASH_SPEC};
pub use error::{Error, Result};
pub use ext::ExtInt;
pub use frontier::{
    death_time, explore_cluster, ubar_path, reflected_boundaries, run_barred, run_barred_at, run_xi, tau_via_edges,
    u_bar_relative, BarredTrajectory, ClusterSample, FrontierState, StarterSpec, XiTrajectory,
};
pub use replicas::McConfig;
pub use stats::MeanSe;
pub use block::{BlockSpec, EtaMode, SpliceOutcome};
pub use oracle::ExactDist;
