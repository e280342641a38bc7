//! Per-run metrics and their aggregation across replications.

use serde::Serialize;

use super::ExperimentSpec;
use crate::attacks::AttackState;
use crate::env::ClickModel;
use crate::error::{Error, Result};
use crate::stats::BetaParams;

/// Post-hoc checks of the single-arm pull bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundCheck {
    /// Whether every pre-attack mean stayed within `beta(N)` of the truth
    /// after the initial `L` rounds.
    pub event_e: bool,
    /// Logged (round, arm) pairs checked against
    /// `N_a(t) <= min(N_target(t), 1 + 3 ln t / delta0^2)`.
    pub pull_bound_checks: u64,
    pub pull_bound_violations: u64,
}

/// Time series and final counters of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub rounds: Vec<u64>,
    /// Rounds so far in which every target was recommended.
    pub chosen_count: Vec<u64>,
    pub chosen_ratio: Vec<f64>,
    pub cost: Vec<u64>,
    /// Times each item was recommended.
    pub per_arm_pulls: Vec<u64>,
    /// `T - N_target(T)`.
    pub target_shortfall: u64,
    pub final_cost: u64,
    pub bounds: Option<BoundCheck>,
}

impl Metrics {
    pub fn final_ratio(&self) -> f64 {
        self.chosen_ratio.last().copied().unwrap_or(0.0)
    }

    pub fn final_chosen(&self) -> u64 {
        self.chosen_count.last().copied().unwrap_or(0)
    }
}

struct BoundTracker {
    means: Vec<f64>,
    beta: BetaParams,
    delta0: f64,
    target: usize,
    check: BoundCheck,
}

pub(crate) struct Recorder {
    targets: Vec<usize>,
    num_items: u64,
    chosen: u64,
    pulls: Vec<u64>,
    m: Metrics,
    bounds: Option<BoundTracker>,
}

impl Recorder {
    pub(crate) fn new(spec: &ExperimentSpec, means: &[f64]) -> Self {
        let cap = spec.horizon.min(10_001) as usize;
        let bounds = (spec.click_model() == ClickModel::SingleArm).then(|| BoundTracker {
            means: means.to_vec(),
            beta: BetaParams::new(means.len(), spec.attack.delta).expect("validated spec"),
            delta0: spec.attack.delta0,
            target: spec.attack.targets[0],
            check: BoundCheck {
                event_e: true,
                pull_bound_checks: 0,
                pull_bound_violations: 0,
            },
        });
        Self {
            targets: spec.attack.targets.clone(),
            num_items: means.len() as u64,
            chosen: 0,
            pulls: vec![0; means.len()],
            m: Metrics {
                rounds: Vec::with_capacity(cap),
                chosen_count: Vec::with_capacity(cap),
                chosen_ratio: Vec::with_capacity(cap),
                cost: Vec::with_capacity(cap),
                per_arm_pulls: Vec::new(),
                target_shortfall: 0,
                final_cost: 0,
                bounds: None,
            },
            bounds,
        }
    }

    pub(crate) fn record(&mut self, t: u64, action: &[usize], attack: &AttackState, logged: bool) {
        if self.targets.iter().all(|x| action.contains(x)) {
            self.chosen += 1;
        }
        for &a in action {
            self.pulls[a] += 1;
        }
        if let Some(b) = self.bounds.as_mut() {
            if t > self.num_items && b.check.event_e {
                let inside = |i: usize| {
                    let s = &attack.per_item[i];
                    s.pulls > 0
                        && (s.pre_reward_sum as f64 / s.pulls as f64 - b.means[i]).abs()
                            < b.beta.radius(s.pulls)
                };
                b.check.event_e = if t == self.num_items + 1 {
                    (0..b.means.len()).all(inside)
                } else {
                    inside(action[0])
                };
            }
            if logged && t >= self.num_items {
                let cap = 1.0 + 3.0 * (t as f64).ln() / (b.delta0 * b.delta0);
                let n_target = self.pulls[b.target];
                for (a, &n) in self.pulls.iter().enumerate() {
                    if a == b.target {
                        continue;
                    }
                    b.check.pull_bound_checks += 1;
                    if n > n_target || n as f64 > cap {
                        b.check.pull_bound_violations += 1;
                    }
                }
            }
        }
        if logged {
            self.m.rounds.push(t);
            self.m.chosen_count.push(self.chosen);
            self.m.chosen_ratio.push(self.chosen as f64 / t as f64);
            self.m.cost.push(attack.cumulative_cost);
        }
    }

    pub(crate) fn finish(mut self, attack: &AttackState) -> Metrics {
        let horizon = self.m.rounds.last().copied().unwrap_or(0);
        self.m.per_arm_pulls = self.pulls;
        self.m.target_shortfall = horizon - self.chosen;
        self.m.final_cost = attack.cumulative_cost;
        self.m.bounds = self.bounds.map(|b| b.check);
        self.m
    }
}

/// Cross-replication view of the pull-bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSummary {
    pub runs: usize,
    pub runs_with_event_e: usize,
    /// Violations summed over the runs where the clean event held.
    pub pull_bound_violations_given_e: u64,
    pub pull_bound_violations_total: u64,
}

/// Pointwise mean and sample standard deviation over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub replications: usize,
    pub rounds: Vec<u64>,
    pub chosen_count_mean: Vec<f64>,
    pub chosen_count_std: Vec<f64>,
    pub chosen_ratio_mean: Vec<f64>,
    pub chosen_ratio_std: Vec<f64>,
    pub cost_mean: Vec<f64>,
    pub cost_std: Vec<f64>,
    pub final_ratio_mean: f64,
    pub final_ratio_std: f64,
    pub final_cost_mean: f64,
    pub final_cost_std: f64,
    pub target_shortfall_mean: f64,
    pub per_arm_pulls_mean: Vec<f64>,
    pub bounds: Option<BoundSummary>,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates replications that share a logging grid.
pub fn aggregate(runs: &[Metrics]) -> Result<Summary> {
    let first = runs
        .first()
        .ok_or_else(|| Error::config("nothing to aggregate"))?;
    if runs.iter().any(|r| r.rounds != first.rounds) {
        return Err(Error::config("replications use different logging grids"));
    }
    if runs
        .iter()
        .any(|r| r.per_arm_pulls.len() != first.per_arm_pulls.len())
    {
        return Err(Error::config("replications have different item counts"));
    }
    let points = first.rounds.len();
    let series = |f: &dyn Fn(&Metrics, usize) -> f64| -> (Vec<f64>, Vec<f64>) {
        (0..points)
            .map(|i| mean_std(runs.iter().map(|r| f(r, i))))
            .unzip()
    };
    let (chosen_count_mean, chosen_count_std) = series(&|r, i| r.chosen_count[i] as f64);
    let (chosen_ratio_mean, chosen_ratio_std) = series(&|r, i| r.chosen_ratio[i]);
    let (cost_mean, cost_std) = series(&|r, i| r.cost[i] as f64);
    let (final_ratio_mean, final_ratio_std) = mean_std(runs.iter().map(Metrics::final_ratio));
    let (final_cost_mean, final_cost_std) = mean_std(runs.iter().map(|r| r.final_cost as f64));
    let (target_shortfall_mean, _) = mean_std(runs.iter().map(|r| r.target_shortfall as f64));
    let per_arm_pulls_mean = (0..first.per_arm_pulls.len())
        .map(|a| mean_std(runs.iter().map(|r| r.per_arm_pulls[a] as f64)).0)
        .collect();
    let bounds = first.bounds.map(|_| {
        let checks: Vec<BoundCheck> = runs.iter().filter_map(|r| r.bounds).collect();
        BoundSummary {
            runs: checks.len(),
            runs_with_event_e: checks.iter().filter(|c| c.event_e).count(),
            pull_bound_violations_given_e: checks
                .iter()
                .filter(|c| c.event_e)
                .map(|c| c.pull_bound_violations)
                .sum(),
            pull_bound_violations_total: checks.iter().map(|c| c.pull_bound_violations).sum(),
        }
    });
    Ok(Summary {
        replications: runs.len(),
        rounds: first.rounds.clone(),
        chosen_count_mean,
        chosen_count_std,
        chosen_ratio_mean,
        chosen_ratio_std,
        cost_mean,
        cost_std,
        final_ratio_mean,
        final_ratio_std,
        final_cost_mean,
        final_cost_std,
        target_shortfall_mean,
        per_arm_pulls_mean,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(costs: &[u64], chosen: &[u64]) -> Metrics {
        let rounds: Vec<u64> = (1..=costs.len() as u64).collect();
        Metrics {
            chosen_ratio: chosen
                .iter()
                .zip(&rounds)
                .map(|(&c, &t)| c as f64 / t as f64)
                .collect(),
            rounds,
            chosen_count: chosen.to_vec(),
            cost: costs.to_vec(),
            per_arm_pulls: vec![1, 2],
            target_shortfall: costs.len() as u64 - chosen.last().unwrap(),
            final_cost: *costs.last().unwrap(),
            bounds: None,
        }
    }

    #[test]
    fn single_run_is_preserved() {
        let r = run(&[0, 1, 3], &[1, 1, 2]);
        let s = aggregate(std::slice::from_ref(&r)).unwrap();
        assert_eq!(s.cost_mean, vec![0.0, 1.0, 3.0]);
        assert_eq!(s.chosen_count_mean, vec![1.0, 1.0, 2.0]);
        assert!(s.cost_std.iter().all(|&x| x == 0.0));
        assert_eq!(s.final_cost_mean, 3.0);
    }

    #[test]
    fn identical_runs_have_zero_std() {
        let r = run(&[0, 1, 3], &[1, 1, 2]);
        let s = aggregate(&[r.clone(), r]).unwrap();
        assert!(s
            .cost_std
            .iter()
            .chain(&s.chosen_ratio_std)
            .all(|&x| x == 0.0));
        assert_eq!(s.final_cost_std, 0.0);
    }

    #[test]
    fn mean_lies_between_runs() {
        let a = run(&[0, 1, 3], &[1, 1, 2]);
        let b = run(&[1, 2, 2], &[0, 1, 3]);
        let s = aggregate(&[a.clone(), b.clone()]).unwrap();
        let lo = a.final_ratio().min(b.final_ratio());
        let hi = a.final_ratio().max(b.final_ratio());
        assert!(lo <= s.final_ratio_mean && s.final_ratio_mean <= hi);
        assert!((s.final_cost_std - (0.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = run(&[0, 1, 3], &[1, 1, 2]);
        let b = run(&[0, 1], &[1, 1]);
        assert!(aggregate(&[a, b]).is_err());
        assert!(aggregate(&[]).is_err());
    }
}
