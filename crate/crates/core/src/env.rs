//! Ground-truth click environments.
//!
//! Items are indexed `0..L` and list positions `0..K` throughout the library.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// How a user interacts with the shown list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickModel {
    /// Classical bandit: one arm, one Bernoulli reward.
    SingleArm,
    /// Position `k` is examined independently with probability `kappa[k]`.
    PositionBased,
    /// Top-down scan that stops at the first click.
    Cascade,
}

/// One round of click feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub clicks: Vec<u8>,
    /// First clicked position, `None` when nothing was clicked. Under the
    /// cascade model this is the stopping position `C_t`.
    pub click_pos: Option<usize>,
}

impl Feedback {
    pub fn from_clicks(clicks: Vec<u8>) -> Self {
        let click_pos = clicks.iter().position(|&c| c == 1);
        Self { clicks, click_pos }
    }
}

/// Whether `clicks` lies in the feedback space of `kind`.
pub fn feasible(kind: ClickModel, clicks: &[u8]) -> bool {
    if clicks.iter().any(|&c| c > 1) {
        return false;
    }
    match kind {
        ClickModel::SingleArm | ClickModel::PositionBased => true,
        ClickModel::Cascade => clicks.iter().map(|&c| c as usize).sum::<usize>() <= 1,
    }
}

/// Ground-truth instance: attraction probabilities, examination weights and
/// list length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvModel {
    means: Vec<f64>,
    kappa: Vec<f64>,
    list_len: usize,
    kind: ClickModel,
}

impl EnvModel {
    /// Validates and builds an instance. `kappa` is only read under the
    /// position-based model; other models get unit weights.
    pub fn new(
        kind: ClickModel,
        means: Vec<f64>,
        kappa: Option<Vec<f64>>,
        list_len: usize,
    ) -> Result<Self> {
        let num_items = means.len();
        if num_items == 0 {
            return Err(Error::config("environment needs at least one item"));
        }
        if let Some(bad) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::config(format!("item mean {bad} outside [0, 1]")));
        }
        if list_len == 0 || list_len > num_items {
            return Err(Error::config(format!(
                "list length {list_len} must lie in 1..={num_items}"
            )));
        }
        if kind == ClickModel::SingleArm && list_len != 1 {
            return Err(Error::config("single-arm model requires list length 1"));
        }
        let kappa = match kind {
            ClickModel::PositionBased => {
                let kappa =
                    kappa.ok_or_else(|| Error::config("position-based model needs kappa"))?;
                if kappa.len() != list_len {
                    return Err(Error::config(format!(
                        "kappa has {} entries, list length is {list_len}",
                        kappa.len()
                    )));
                }
                if kappa.iter().any(|k| !(*k > 0.0 && *k <= 1.0)) {
                    return Err(Error::config("kappa entries must lie in (0, 1]"));
                }
                if kappa.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::config("kappa must be non-increasing"));
                }
                kappa
            }
            _ => vec![1.0; list_len],
        };
        Ok(Self {
            means,
            kappa,
            list_len,
            kind,
        })
    }

    pub fn single_arm(means: Vec<f64>) -> Result<Self> {
        Self::new(ClickModel::SingleArm, means, None, 1)
    }

    pub fn position_based(means: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        let k = kappa.len();
        Self::new(ClickModel::PositionBased, means, Some(kappa), k)
    }

    pub fn cascade(means: Vec<f64>, list_len: usize) -> Result<Self> {
        Self::new(ClickModel::Cascade, means, None, list_len)
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn list_len(&self) -> usize {
        self.list_len
    }

    pub fn num_items(&self) -> usize {
        self.means.len()
    }

    pub fn kind(&self) -> ClickModel {
        self.kind
    }

    /// Checks that `action` is a list of `K` distinct items.
    pub fn validate_action(&self, action: &[usize]) -> Result<()> {
        if action.len() != self.list_len {
            return Err(Error::InvalidAction(format!(
                "list has {} items, expected {}",
                action.len(),
                self.list_len
            )));
        }
        if let Some(&bad) = action.iter().find(|&&a| a >= self.means.len()) {
            return Err(Error::InvalidAction(format!("unknown item {bad}")));
        }
        for (i, a) in action.iter().enumerate() {
            if action[..i].contains(a) {
                return Err(Error::InvalidAction(format!("item {a} shown twice")));
            }
        }
        Ok(())
    }

    /// Draws pre-attack feedback for `action`.
    ///
    /// Exactly `K` uniforms are consumed per call under every model, so two
    /// runs that share an environment stream see the same deviates round by
    /// round regardless of where the cascade stops.
    pub fn draw_feedback(&self, action: &[usize], rng: &mut RngStream) -> Result<Feedback> {
        self.validate_action(action)?;
        let mut clicks = vec![0u8; self.list_len];
        let mut click_pos = None;
        for (pos, &item) in action.iter().enumerate() {
            let u = rng.uniform();
            match self.kind {
                ClickModel::SingleArm => clicks[pos] = u8::from(u < self.means[item]),
                ClickModel::PositionBased => {
                    clicks[pos] = u8::from(u < self.kappa[pos] * self.means[item])
                }
                ClickModel::Cascade => {
                    if click_pos.is_none() && u < self.means[item] {
                        clicks[pos] = 1;
                        click_pos = Some(pos);
                    }
                }
            }
        }
        if self.kind != ClickModel::Cascade {
            click_pos = clicks.iter().position(|&c| c == 1);
        }
        Ok(Feedback { clicks, click_pos })
    }

    /// Gaps `mu_a - mu_target` for every item.
    pub fn gaps(&self, target: usize) -> Vec<f64> {
        let mu_target = self.means[target];
        self.means.iter().map(|m| m - mu_target).collect()
    }

    /// Product of the `K - 1` largest attraction probabilities.
    pub fn p_star(&self) -> f64 {
        let mut sorted = self.means.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.iter().take(self.list_len - 1).product()
    }

    /// Expected number of clicks of `action` (expected reward for one arm).
    pub fn expected_reward(&self, action: &[usize]) -> f64 {
        match self.kind {
            ClickModel::SingleArm | ClickModel::PositionBased => action
                .iter()
                .zip(&self.kappa)
                .map(|(&a, k)| k * self.means[a])
                .sum(),
            ClickModel::Cascade => {
                1.0 - action.iter().map(|&a| 1.0 - self.means[a]).product::<f64>()
            }
        }
    }

    /// Best achievable expected reward: the top-`K` items in decreasing order.
    pub fn optimal_reward(&self) -> f64 {
        let mut order: Vec<usize> = (0..self.means.len()).collect();
        order.sort_by(|&a, &b| self.means[b].total_cmp(&self.means[a]).then(a.cmp(&b)));
        order.truncate(self.list_len);
        self.expected_reward(&order)
    }
}
