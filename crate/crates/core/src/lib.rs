//! Stochastic block transition models for discrete-time dynamic networks.
//!
//! Nodes are clustered independently at every frame, with their labels
//! following a Markov chain over `{0, 1, ..., K}` where label `0` marks an
//! inactive node. Edge values depend on the group pair and on whether the
//! same dyad was unobserved, absent or present in the previous frame. All
//! continuous parameters are integrated out under conjugate priors, which
//! gives the exact integrated completed likelihood (ICL) of an allocation;
//! [`greedy::fit`] maximises it with node moves followed by group merges.
//!
//! Module map:
//!
//! - [`netcube`]: adjacency cubes, activity masks, event-list discretisation.
//! - [`io`]: text formats for edge lists, cubes, allocations and matrices.
//! - [`suffstats`]: allocations and the block counts the ICL factorises over.
//! - [`icl`]: exact log-ICL, plus move and merge deltas.
//! - [`greedy`]: initialisation, sweeps, merge phase and the restart driver.
//! - [`genmodel`]: simulation from the Bayesian hierarchy.
//! - [`evalkit`]: NMI, plug-in estimates and group-size trajectories.

pub mod error;
pub mod evalkit;
pub mod genmodel;
pub mod greedy;
pub mod icl;
pub mod io;
pub mod matrix;
pub mod netcube;
pub mod rng;
pub mod suffstats;

pub use error::{Error, Result};
pub use greedy::{fit, FitConfig, FitResult, InitMethod};
pub use icl::{log_icl_full, Hyperparameters, IclValue};
pub use netcube::{AdjacencyCube, NodeActivity};
pub use suffstats::{AllocationMatrix, SufficientStats};
