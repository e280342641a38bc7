//! Reward-poisoning strategies.
//!
//! Every strategy sees the shown list and the pre-attack clicks, returns an
//! attack vector `alpha` and hands `clicks - alpha` to the learner. The
//! attacker keeps its own ledger of pre-attack sums and attack sums per item;
//! an item counts as observed in a round exactly when the learner observes it
//! (all shown positions, or positions up to the post-attack click under the
//! cascade model), so both sides agree on every post-attack mean.
//!
//! The conservative strategies (`ucb_attack`, `pbm_attack`, `cascade_attack`)
//! keep, for each item `l` and protected item `a`, the round `h[l][a]` at
//! which a feasible attack last pushed `l` below `a`'s lower confidence bound,
//! together with that bound. Later attacks on `l` fall back to the frozen
//! bound when the current one is out of reach.

mod baselines;
mod conservative;
mod general;

use serde::{Deserialize, Serialize};

use crate::env::{feasible, ClickModel, Feedback};
use crate::error::{Error, Result};
use crate::learners::LearnerKind;
use crate::rng::RngStream;
use crate::stats::{ArmStats, BetaParams};

pub use baselines::{
    modified_jun_attack_round, no_attack_round, trivial1_attack_round, trivialk_attack_round,
};
pub use conservative::{cal_alpha, cascade_attack_round, pbm_attack_round, ucb_attack_round};
pub use general::{attack_probability, general_attack_round};

/// Slack for comparisons against the binary feedback support.
///
/// `gamma` values are integers minus products of floats; without it a value
/// that is exactly 1 in real arithmetic could round up to 2.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `ceil(x)` for `x >= 0`, treating values within [`FEASIBILITY_TOL`] of an
/// integer as that integer.
#[inline]
pub(crate) fn ceil_tol(x: f64) -> i64 {
    if x <= FEASIBILITY_TOL {
        0
    } else {
        (x - FEASIBILITY_TOL).ceil() as i64
    }
}

/// Attack strategy, selected by name in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "ucb_attack")]
    UcbAttack,
    #[serde(rename = "pbm_attack")]
    PbmAttack,
    #[serde(rename = "cascade_attack")]
    CascadeAttack,
    #[serde(rename = "general_attack")]
    GeneralAttack,
    #[serde(rename = "trivial1")]
    Trivial1,
    #[serde(rename = "trivialK")]
    TrivialK,
    #[serde(rename = "modified_jun")]
    ModifiedJun,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::None,
        Strategy::UcbAttack,
        Strategy::PbmAttack,
        Strategy::CascadeAttack,
        Strategy::GeneralAttack,
        Strategy::Trivial1,
        Strategy::TrivialK,
        Strategy::ModifiedJun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::UcbAttack => "ucb_attack",
            Strategy::PbmAttack => "pbm_attack",
            Strategy::CascadeAttack => "cascade_attack",
            Strategy::GeneralAttack => "general_attack",
            Strategy::Trivial1 => "trivial1",
            Strategy::TrivialK => "trivialK",
            Strategy::ModifiedJun => "modified_jun",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::config(format!("unknown strategy `{name}`")))
    }

    /// Whether this strategy can run against `learner`.
    pub fn supports(self, learner: LearnerKind) -> bool {
        match self {
            Strategy::None | Strategy::GeneralAttack | Strategy::Trivial1 | Strategy::TrivialK => {
                true
            }
            Strategy::UcbAttack | Strategy::ModifiedJun => learner == LearnerKind::Ucb,
            Strategy::PbmAttack => learner == LearnerKind::PbmUcb,
            Strategy::CascadeAttack => learner == LearnerKind::CascadeUcb,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Attacker parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackConfig {
    /// Margin `Delta_0 > 0` enforced below the protected items' lower bounds.
    pub delta0: f64,
    pub beta_params: BetaParams,
    /// Items the attacker wants recommended.
    pub targets: Vec<usize>,
    /// `a*`: the targets plus the items that are never demoted.
    pub protected_set: Vec<usize>,
}

impl AttackConfig {
    pub fn new(
        delta0: f64,
        delta: f64,
        num_items: usize,
        targets: Vec<usize>,
        protected_set: Vec<usize>,
    ) -> Result<Self> {
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(Error::config(format!(
                "delta0 must be positive, got {delta0}"
            )));
        }
        let beta_params =
            BetaParams::new(num_items, delta).map_err(|e| Error::config(e.to_string()))?;
        if targets.is_empty() {
            return Err(Error::config("at least one target item is required"));
        }
        for &item in targets.iter().chain(&protected_set) {
            if item >= num_items {
                return Err(Error::config(format!(
                    "item {} out of range 1..={num_items}",
                    item + 1
                )));
            }
        }
        if let Some(t) = targets.iter().find(|t| !protected_set.contains(t)) {
            return Err(Error::config(format!(
                "target {} missing from the protected set",
                t + 1
            )));
        }
        let mut dedup = protected_set.clone();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.len() != protected_set.len() {
            return Err(Error::config("protected set has duplicates"));
        }
        Ok(Self {
            delta0,
            beta_params,
            targets,
            protected_set,
        })
    }

    /// Single-target configuration protecting only the target.
    pub fn single_target(delta0: f64, delta: f64, num_items: usize, target: usize) -> Result<Self> {
        Self::new(delta0, delta, num_items, vec![target], vec![target])
    }
}

/// One attack decision, kept when diagnostics are enabled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Decision {
    /// A conservative attack on `item`; one `gamma`/`gamma_tilde` per
    /// protected item, in protected-set order.
    Alpha {
        round: u64,
        item: usize,
        gamma: Vec<f64>,
        gamma_tilde: Vec<f64>,
        /// Whether the timestamps of `item` advanced to `round`.
        advanced: bool,
        alpha: i8,
    },
    /// A randomized attack on a clicked item.
    Coin {
        round: u64,
        item: usize,
        prob: f64,
        attacked: bool,
    },
}

/// Attacker bookkeeping for one replication.
#[derive(Debug, Clone)]
pub struct AttackState {
    pub per_item: Vec<ArmStats>,
    protected: Vec<usize>,
    is_protected: Vec<bool>,
    is_target: Vec<bool>,
    /// Row-major `L x |a*|`: `h[l][j]`.
    timestamps: Vec<u64>,
    /// Lower bound of `protected[j]` as it stood at round `h[l][j]`.
    frozen_lower: Vec<f64>,
    /// Scratch: current lower bounds of the protected items.
    lower_now: Vec<f64>,
    lower_stale: bool,
    position_weights: Vec<f64>,
    pub cumulative_cost: u64,
    round: u64,
    decisions: Option<Vec<Decision>>,
}

impl AttackState {
    /// Fresh state. `position_weights` are the examination probabilities
    /// folded into `bias_corrected_pulls` (ones outside the PBM).
    pub fn new(num_items: usize, config: &AttackConfig, position_weights: Vec<f64>) -> Self {
        let m = config.protected_set.len();
        let mut is_protected = vec![false; num_items];
        for &a in &config.protected_set {
            is_protected[a] = true;
        }
        let mut is_target = vec![false; num_items];
        for &a in &config.targets {
            is_target[a] = true;
        }
        Self {
            per_item: vec![ArmStats::default(); num_items],
            protected: config.protected_set.clone(),
            is_protected,
            is_target,
            timestamps: vec![1; num_items * m],
            // h starts at round 1. Every item has at most one observation at
            // the end of round 1, and beta(1) > 1 whenever delta <= 1/2, so
            // that bound is negative and clamps exactly like -inf.
            frozen_lower: vec![f64::NEG_INFINITY; num_items * m],
            lower_now: vec![f64::NEG_INFINITY; m],
            lower_stale: true,
            position_weights,
            cumulative_cost: 0,
            round: 0,
            decisions: None,
        }
    }

    /// Keeps every attack decision for later inspection.
    pub fn enable_diagnostics(&mut self) {
        self.decisions.get_or_insert_with(Vec::new);
    }

    pub fn take_decisions(&mut self) -> Vec<Decision> {
        self.decisions
            .as_mut()
            .map(std::mem::take)
            .unwrap_or_default()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn protected_set(&self) -> &[usize] {
        &self.protected
    }

    pub fn is_protected(&self, item: usize) -> bool {
        self.is_protected[item]
    }

    pub fn is_target(&self, item: usize) -> bool {
        self.is_target[item]
    }

    /// `h[l][a]` for protected item `a`.
    pub fn timestamp(&self, item: usize, protected_item: usize) -> Option<u64> {
        let j = self.protected.iter().position(|&a| a == protected_item)?;
        Some(self.timestamps[item * self.protected.len() + j])
    }

    /// Post-attack mean of `item` minus `2 beta(N)`, from the current ledger.
    pub fn current_lower(&self, item: usize, config: &AttackConfig) -> Result<f64> {
        let s = &self.per_item[item];
        let (_, post) = s.empirical_means()?;
        Ok(post - 2.0 * config.beta_params.radius(s.pulls))
    }

    /// Lower confidence bound of `item` as of round `at_round`.
    ///
    /// Only the two rounds the algorithms query are answerable: the current
    /// round, and a round stored as some timestamp `h[l][item]` (whose bound
    /// was snapshotted when the timestamp advanced).
    pub fn mu_lower(&self, item: usize, at_round: u64, config: &AttackConfig) -> Result<f64> {
        if at_round == self.round {
            return self.current_lower(item, config);
        }
        let j = self
            .protected
            .iter()
            .position(|&a| a == item)
            .ok_or_else(|| {
                Error::Domain(format!("no snapshots kept for unprotected item {item}"))
            })?;
        let m = self.protected.len();
        (0..self.per_item.len())
            .map(|l| l * m + j)
            .find(|&idx| self.timestamps[idx] == at_round && self.frozen_lower[idx].is_finite())
            .map(|idx| self.frozen_lower[idx])
            .ok_or_else(|| Error::Domain(format!("no snapshot of item {item} at round {at_round}")))
    }

    fn begin_round(&mut self) -> u64 {
        self.round += 1;
        self.round
    }

    #[inline]
    fn observe_pre(&mut self, item: usize, pre: u8, pos: usize) {
        let w = self.position_weights.get(pos).copied().unwrap_or(1.0);
        self.per_item[item].record(pre, 0, w);
        self.lower_stale |= self.is_protected[item];
    }

    #[inline]
    fn apply_attack(&mut self, item: usize, alpha: i8) {
        self.per_item[item].attack_sum += i64::from(alpha);
        self.cumulative_cost += alpha.unsigned_abs() as u64;
        self.lower_stale |= self.is_protected[item];
    }

    fn refresh_lower_now(&mut self, config: &AttackConfig) {
        if !self.lower_stale {
            return;
        }
        self.lower_stale = false;
        for (j, &a) in self.protected.iter().enumerate() {
            let s = &self.per_item[a];
            self.lower_now[j] = if s.pulls == 0 {
                f64::NEG_INFINITY
            } else {
                s.post_reward_sum() as f64 / s.pulls as f64
                    - 2.0 * config.beta_params.radius(s.pulls)
            };
        }
    }

    fn push_decision(&mut self, d: impl FnOnce() -> Decision) {
        if let Some(log) = self.decisions.as_mut() {
            log.push(d());
        }
    }
}

/// Result of one attacked round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackOutcome {
    pub alpha: Vec<i8>,
    pub post: Feedback,
}

/// A strategy bound to its configuration and state.
#[derive(Debug, Clone)]
pub struct Attacker {
    strategy: Strategy,
    kind: ClickModel,
    config: AttackConfig,
    state: AttackState,
}

impl Attacker {
    pub fn new(
        strategy: Strategy,
        learner: LearnerKind,
        config: AttackConfig,
        num_items: usize,
        kappa: &[f64],
    ) -> Result<Self> {
        if !strategy.supports(learner) {
            return Err(Error::config(format!(
                "strategy `{strategy}` cannot attack learner `{}`",
                learner.name()
            )));
        }
        let kind = learner.click_model();
        if kind == ClickModel::SingleArm
            && matches!(strategy, Strategy::UcbAttack | Strategy::ModifiedJun)
            && config.protected_set.len() != config.targets.len()
        {
            return Err(Error::config("single-arm attacks protect the targets only"));
        }
        let weights = if kind == ClickModel::PositionBased {
            kappa.to_vec()
        } else {
            vec![1.0; kappa.len().max(1)]
        };
        let state = AttackState::new(num_items, &config, weights);
        Ok(Self {
            strategy,
            kind,
            config,
            state,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn config(&self) -> &AttackConfig {
        &self.config
    }

    pub fn state(&self) -> &AttackState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut AttackState {
        &mut self.state
    }

    /// Attacks one round and checks the result lies in the feedback space.
    pub fn attack(
        &mut self,
        action: &[usize],
        pre: &Feedback,
        rng: &mut RngStream,
    ) -> Result<AttackOutcome> {
        let (state, config) = (&mut self.state, &self.config);
        let alpha = match self.strategy {
            Strategy::None => no_attack_round(state, self.kind, action, pre),
            Strategy::UcbAttack => vec![ucb_attack_round(state, config, action[0], pre.clicks[0])?],
            Strategy::PbmAttack => pbm_attack_round(state, config, action, pre)?,
            Strategy::CascadeAttack => cascade_attack_round(state, config, action, pre)?,
            Strategy::GeneralAttack => {
                general_attack_round(state, config, self.kind, action, pre, rng)
            }
            Strategy::Trivial1 => trivial1_attack_round(state, self.kind, action, pre),
            Strategy::TrivialK => trivialk_attack_round(state, self.kind, action, pre),
            Strategy::ModifiedJun => vec![modified_jun_attack_round(
                state,
                config,
                action[0],
                pre.clicks[0],
            )],
        };
        let post = post_feedback(self.kind, &pre.clicks, &alpha)?;
        Ok(AttackOutcome { alpha, post })
    }
}

/// `clicks - alpha`, rejecting anything outside the binary feedback space.
pub fn post_feedback(kind: ClickModel, clicks: &[u8], alpha: &[i8]) -> Result<Feedback> {
    if clicks.len() != alpha.len() {
        return Err(Error::Invariant(
            "attack vector has the wrong length".into(),
        ));
    }
    let mut post = Vec::with_capacity(clicks.len());
    for (&c, &a) in clicks.iter().zip(alpha) {
        let r = i16::from(c) - i16::from(a);
        if !(-1..=1).contains(&a) || !(0..=1).contains(&r) {
            return Err(Error::Invariant(format!(
                "attack {alpha:?} on clicks {clicks:?} leaves the binary support"
            )));
        }
        post.push(r as u8);
    }
    if !feasible(kind, &post) {
        return Err(Error::Invariant(format!(
            "post-attack clicks {post:?} infeasible under {kind:?}"
        )));
    }
    Ok(Feedback::from_clicks(post))
}

/// Folds the positions an observer of `post` would see, with the given
/// pre-attack clicks and attack values. Used by the non-conservative
/// strategies, whose decisions do not depend on same-round observations of
/// other items.
fn fold_observed(
    state: &mut AttackState,
    kind: ClickModel,
    action: &[usize],
    pre: &[u8],
    alpha: &[i8],
) {
    let last = match kind {
        ClickModel::Cascade => {
            let post_click = pre
                .iter()
                .zip(alpha)
                .position(|(&c, &a)| i16::from(c) - i16::from(a) == 1);
            post_click.unwrap_or(action.len() - 1)
        }
        _ => action.len() - 1,
    };
    for pos in 0..=last {
        state.observe_pre(action[pos], pre[pos], pos);
        if alpha[pos] != 0 {
            state.apply_attack(action[pos], alpha[pos]);
        }
    }
}
