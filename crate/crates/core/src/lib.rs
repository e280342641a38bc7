//! Reward-poisoning attacks on online learning to rank.
//!
//! A learner recommends lists of items, an environment draws clicks under a
//! click model, and an attacker rewrites the clicks before the learner sees
//! them, aiming to get a target item recommended almost every round while
//! changing few clicks.
//!
//! Modules, bottom up: [`stats`] (confidence radius and per-item sums),
//! [`rng`], [`env`] (click models), [`learners`] (UCB, PBM-UCB, CascadeUCB),
//! [`attacks`], [`harness`] (replications, metrics, artifacts) and
//! [`config`] (experiment files and presets).

pub mod attacks;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod learners;
pub mod rng;
pub mod stats;

pub use attacks::{AttackConfig, AttackState, Attacker, Strategy};
pub use env::{ClickModel, EnvModel, Feedback};
pub use error::{Error, Result};
pub use harness::{
    compare, run_experiment, run_replication, sweep, ExperimentSpec, Metrics, RunOptions,
};
pub use learners::{Learner, LearnerKind};
pub use stats::{beta, ArmStats, BetaParams};
