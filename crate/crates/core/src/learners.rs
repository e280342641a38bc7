//! Victim algorithms: UCB for single-arm bandits, PBM-UCB and CascadeUCB.
//!
//! Learners only ever see post-attack clicks; [`Learner::update`] takes the
//! click vector the attacker returned and nothing else. Ties in every index
//! are broken towards the lowest item id.

use serde::{Deserialize, Serialize};

use crate::env::{feasible, ClickModel};
use crate::error::{Error, Result};
use crate::stats::ArmStats;

/// Which victim to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Ucb,
    PbmUcb,
    CascadeUcb,
}

impl LearnerKind {
    pub fn click_model(self) -> ClickModel {
        match self {
            LearnerKind::Ucb => ClickModel::SingleArm,
            LearnerKind::PbmUcb => ClickModel::PositionBased,
            LearnerKind::CascadeUcb => ClickModel::Cascade,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Ucb => "ucb",
            LearnerKind::PbmUcb => "pbm_ucb",
            LearnerKind::CascadeUcb => "cascade_ucb",
        }
    }
}

/// What a learner knows: per-item counts over the feedback it was given.
///
/// Attack sums stay zero here since the learner cannot see attacks; its
/// `pre_reward_sum` is the sum of the clicks it received.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerState {
    pub per_item: Vec<ArmStats>,
    /// Rounds chosen so far; the index of the current round once `choose` ran.
    pub round: u64,
    pub epsilon: f64,
}

impl LearnerState {
    pub fn new(num_items: usize, epsilon: f64) -> Self {
        Self {
            per_item: vec![ArmStats::default(); num_items],
            round: 0,
            epsilon,
        }
    }

    pub fn num_items(&self) -> usize {
        self.per_item.len()
    }

    /// Post-attack mean of `item` as the learner sees it.
    pub fn mean(&self, item: usize) -> Option<f64> {
        self.per_item[item].pre_mean()
    }
}

/// Uniform choose/update interface.
pub trait Learner: Send {
    fn kind(&self) -> LearnerKind;

    /// Starts the next round and returns the ordered list to show.
    fn choose(&mut self) -> Vec<usize>;

    /// Consumes the post-attack clicks of the current round.
    fn update(&mut self, action: &[usize], clicks: &[u8]) -> Result<()>;

    fn state(&self) -> &LearnerState;
}

/// Indices of the `k` largest scores, highest first, ties to the lowest id.
fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let cmp = |&a: &usize, &b: &usize| scores[b].total_cmp(&scores[a]).then(a.cmp(&b));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    order
}

/// Forced exploration list for round `t` (1-based) of a list learner.
///
/// The first `ceil(L/K)` rounds walk the items in id order, wrapping around
/// in the last list, so every item is shown at least once.
fn init_list(t: u64, num_items: usize, list_len: usize) -> Option<Vec<usize>> {
    let rounds = num_items.div_ceil(list_len) as u64;
    (t <= rounds).then(|| {
        let start = (t as usize - 1) * list_len;
        (0..list_len).map(|i| (start + i) % num_items).collect()
    })
}

fn check_shape(action: &[usize], clicks: &[u8], list_len: usize) -> Result<()> {
    if action.len() != list_len || clicks.len() != list_len {
        return Err(Error::InvalidAction(format!(
            "expected {list_len} positions, got action {} / clicks {}",
            action.len(),
            clicks.len()
        )));
    }
    Ok(())
}

/// UCB on a single-arm bandit with index `mean + (3/2) sqrt(ln t / N)`.
#[derive(Debug, Clone)]
pub struct Ucb {
    state: LearnerState,
}

impl Ucb {
    pub fn new(num_items: usize) -> Self {
        Self {
            state: LearnerState::new(num_items, 0.0),
        }
    }

    /// Index of `item` at round `t`; `+inf` for unplayed items.
    pub fn index(state: &LearnerState, item: usize, t: u64) -> f64 {
        let s = &state.per_item[item];
        if s.pulls == 0 {
            return f64::INFINITY;
        }
        let mean = s.pre_reward_sum as f64 / s.pulls as f64;
        mean + 1.5 * ((t as f64).ln() / s.pulls as f64).sqrt()
    }
}

/// Arm chosen by UCB in round `state.round + 1`.
pub fn ucb_choose(state: &LearnerState) -> usize {
    let t = state.round + 1;
    let l = state.num_items();
    if t as usize <= l {
        return t as usize - 1;
    }
    let mut best = 0;
    let mut best_index = f64::NEG_INFINITY;
    for a in 0..l {
        let idx = Ucb::index(state, a, t);
        if idx > best_index {
            best = a;
            best_index = idx;
        }
    }
    best
}

impl Learner for Ucb {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Ucb
    }

    fn choose(&mut self) -> Vec<usize> {
        let arm = ucb_choose(&self.state);
        self.state.round += 1;
        vec![arm]
    }

    fn update(&mut self, action: &[usize], clicks: &[u8]) -> Result<()> {
        check_shape(action, clicks, 1)?;
        if clicks[0] > 1 {
            return Err(Error::InfeasibleFeedback(format!("reward {}", clicks[0])));
        }
        self.state.per_item[action[0]].record(clicks[0], 0, 1.0);
        Ok(())
    }

    fn state(&self) -> &LearnerState {
        &self.state
    }
}

/// PBM-UCB with known examination probabilities.
///
/// The mean estimate is bias corrected, `S_a / Ntilde_a`, and the bonus is
/// `sqrt(N_a (1 + eps) ln t / (2 Ntilde_a^2))`.
#[derive(Debug, Clone)]
pub struct PbmUcb {
    state: LearnerState,
    kappa: Vec<f64>,
}

impl PbmUcb {
    pub fn new(num_items: usize, kappa: Vec<f64>, epsilon: f64) -> Self {
        Self {
            state: LearnerState::new(num_items, epsilon),
            kappa,
        }
    }

    pub fn index(state: &LearnerState, item: usize, t: u64) -> f64 {
        let s = &state.per_item[item];
        let weighted = s.bias_corrected_pulls;
        if weighted <= 0.0 {
            return f64::INFINITY;
        }
        let mean = s.pre_reward_sum as f64 / weighted;
        let bonus = (s.pulls as f64 * (1.0 + state.epsilon) * (t as f64).ln()
            / (2.0 * weighted * weighted))
            .sqrt();
        mean + bonus
    }
}

/// List chosen by PBM-UCB in round `state.round + 1`.
pub fn pbm_ucb_choose(state: &LearnerState, kappa: &[f64]) -> Vec<usize> {
    let t = state.round + 1;
    let (l, k) = (state.num_items(), kappa.len());
    if let Some(list) = init_list(t, l, k) {
        return list;
    }
    let scores: Vec<f64> = (0..l).map(|a| PbmUcb::index(state, a, t)).collect();
    top_k(&scores, k)
}

impl Learner for PbmUcb {
    fn kind(&self) -> LearnerKind {
        LearnerKind::PbmUcb
    }

    fn choose(&mut self) -> Vec<usize> {
        let list = pbm_ucb_choose(&self.state, &self.kappa);
        self.state.round += 1;
        list
    }

    fn update(&mut self, action: &[usize], clicks: &[u8]) -> Result<()> {
        check_shape(action, clicks, self.kappa.len())?;
        if !feasible(ClickModel::PositionBased, clicks) {
            return Err(Error::InfeasibleFeedback(format!("{clicks:?}")));
        }
        for ((&item, &c), &w) in action.iter().zip(clicks).zip(&self.kappa) {
            self.state.per_item[item].record(c, 0, w);
        }
        Ok(())
    }

    fn state(&self) -> &LearnerState {
        &self.state
    }
}

/// CascadeUCB with index `mean + (3/2) sqrt(ln t / N)`.
#[derive(Debug, Clone)]
pub struct CascadeUcb {
    state: LearnerState,
    list_len: usize,
}

impl CascadeUcb {
    pub fn new(num_items: usize, list_len: usize) -> Self {
        Self {
            state: LearnerState::new(num_items, 0.0),
            list_len,
        }
    }
}

/// List chosen by CascadeUCB in round `state.round + 1`.
pub fn cascade_ucb_choose(state: &LearnerState, list_len: usize) -> Vec<usize> {
    let t = state.round + 1;
    let l = state.num_items();
    if let Some(list) = init_list(t, l, list_len) {
        return list;
    }
    let scores: Vec<f64> = (0..l).map(|a| Ucb::index(state, a, t)).collect();
    top_k(&scores, list_len)
}

impl Learner for CascadeUcb {
    fn kind(&self) -> LearnerKind {
        LearnerKind::CascadeUcb
    }

    fn choose(&mut self) -> Vec<usize> {
        let list = cascade_ucb_choose(&self.state, self.list_len);
        self.state.round += 1;
        list
    }

    /// Positions up to the first click in `clicks` are observed; everything
    /// below it was never examined. No click means all positions were seen.
    fn update(&mut self, action: &[usize], clicks: &[u8]) -> Result<()> {
        check_shape(action, clicks, self.list_len)?;
        if !feasible(ClickModel::Cascade, clicks) {
            return Err(Error::InfeasibleFeedback(format!("{clicks:?}")));
        }
        let last = clicks
            .iter()
            .position(|&c| c == 1)
            .unwrap_or(self.list_len - 1);
        for (&item, &c) in action.iter().zip(clicks).take(last + 1) {
            self.state.per_item[item].record(c, 0, 1.0);
        }
        Ok(())
    }

    fn state(&self) -> &LearnerState {
        &self.state
    }
}

/// Builds a boxed learner of the given kind.
pub fn build_learner(
    kind: LearnerKind,
    num_items: usize,
    kappa: &[f64],
    epsilon: f64,
) -> Box<dyn Learner> {
    match kind {
        LearnerKind::Ucb => Box::new(Ucb::new(num_items)),
        LearnerKind::PbmUcb => Box::new(PbmUcb::new(num_items, kappa.to_vec(), epsilon)),
        LearnerKind::CascadeUcb => Box::new(CascadeUcb::new(num_items, kappa.len())),
    }
}
