//! Experiment orchestration.
//!
//! A replication wires environment, learner and attacker together for `T`
//! rounds. Each round the learner picks a list, the environment draws
//! pre-attack clicks, the attacker rewrites them, and the learner sees only
//! the rewritten clicks.

mod metrics;
mod movielens;
mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, Attacker, Decision, Strategy};
use crate::env::{ClickModel, EnvModel};
use crate::error::{Error, Result};
use crate::learners::{build_learner, LearnerKind, LearnerState};
use crate::rng::{replication_seed, rng_stream, RngStream, StreamId};

pub use metrics::{aggregate, BoundCheck, BoundSummary, Metrics, Summary};
pub use movielens::ingest_movielens;
pub use output::{
    emit_comparison, emit_outputs, emit_sweep, summary_csv, summary_json, OutputFormat,
};

/// Where the attraction probabilities come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EnvSource {
    /// Fixed means, one per item.
    Inline { means: Vec<f64> },
    /// Means drawn from `U(0, high)` per replication, conditioned on the
    /// targets being sub-optimal.
    Uniform { num_items: usize, high: f64 },
    /// Means extracted from a ratings file.
    Movielens {
        ratings: String,
        threshold: f64,
        means: Vec<f64>,
    },
}

impl EnvSource {
    pub fn num_items(&self) -> usize {
        match self {
            EnvSource::Inline { means } | EnvSource::Movielens { means, .. } => means.len(),
            EnvSource::Uniform { num_items, .. } => *num_items,
        }
    }
}

/// Attacker settings shared by all strategies of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub delta0: f64,
    pub delta: f64,
    /// Target items, 0-based.
    pub targets: Vec<usize>,
    /// Pinned protected set (0-based, includes the targets). When absent the
    /// list models draw the remaining members at random per replication.
    pub protected: Option<Vec<usize>>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub learner: LearnerKind,
    pub env: EnvSource,
    pub list_len: usize,
    /// Examination probabilities; only used by the position-based model.
    pub kappa: Option<Vec<f64>>,
    pub strategy: Strategy,
    pub attack: AttackParams,
    pub horizon: u64,
    pub replications: u32,
    pub base_seed: u64,
    pub epsilon: f64,
}

impl ExperimentSpec {
    pub fn num_items(&self) -> usize {
        self.env.num_items()
    }

    pub fn click_model(&self) -> ClickModel {
        self.learner.click_model()
    }

    /// Checks every cross-field constraint before any round runs.
    pub fn validate(&self) -> Result<()> {
        let l = self.num_items();
        let k = self.list_len;
        if l < 2 {
            return Err(Error::config("need at least two items"));
        }
        match &self.env {
            EnvSource::Inline { means } | EnvSource::Movielens { means, .. } => {
                if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
                    return Err(Error::config("item means must lie in [0, 1]"));
                }
            }
            EnvSource::Uniform { high, .. } => {
                if !(*high > 0.0 && *high <= 1.0) {
                    return Err(Error::config(format!(
                        "uniform upper bound {high} outside (0, 1]"
                    )));
                }
            }
        }
        if self.learner == LearnerKind::Ucb && k != 1 {
            return Err(Error::config("ucb learner shows exactly one item"));
        }
        if k == 0 || k > l {
            return Err(Error::config(format!(
                "list length {k} must lie in 1..={l}"
            )));
        }
        if self.horizon < l as u64 {
            return Err(Error::config(format!(
                "horizon {} shorter than item count {l}",
                self.horizon
            )));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon must be non-negative"));
        }
        if !self.strategy.supports(self.learner) {
            return Err(Error::config(format!(
                "strategy `{}` cannot attack learner `{}`",
                self.strategy,
                self.learner.name()
            )));
        }
        if let (ClickModel::PositionBased, Some(kappa)) = (self.click_model(), &self.kappa) {
            if kappa.len() != k {
                return Err(Error::config(format!(
                    "kappa has {} entries for list length {k}",
                    kappa.len()
                )));
            }
        }
        let targets = &self.attack.targets;
        if targets.is_empty() {
            return Err(Error::config("no target item"));
        }
        if targets.len() > k {
            return Err(Error::config("more targets than list positions"));
        }
        let needed = if self.learner == LearnerKind::Ucb {
            targets.len()
        } else {
            k
        };
        if let Some(p) = &self.attack.protected {
            if p.len() != needed {
                return Err(Error::config(format!(
                    "protected set must have {needed} items, got {}",
                    p.len()
                )));
            }
            AttackConfig::new(
                self.attack.delta0,
                self.attack.delta,
                l,
                targets.clone(),
                p.clone(),
            )?;
        } else {
            AttackConfig::new(
                self.attack.delta0,
                self.attack.delta,
                l,
                targets.clone(),
                targets.clone(),
            )?;
        }
        Ok(())
    }

    /// Examination probabilities for positions `0..K`.
    pub fn resolved_kappa(&self) -> Vec<f64> {
        match self.click_model() {
            ClickModel::PositionBased => self
                .kappa
                .clone()
                .unwrap_or_else(|| default_kappa(self.list_len)),
            _ => vec![1.0; self.list_len],
        }
    }
}

/// `kappa_k = 0.9^k` for positions `k = 0..K`.
pub fn default_kappa(list_len: usize) -> Vec<f64> {
    (0..list_len).map(|k| 0.9f64.powi(k as i32)).collect()
}

/// Log the metrics at round `t`?
fn is_logged(t: u64, horizon: u64) -> bool {
    let step = if horizon <= 10_000 {
        1
    } else {
        horizon.div_ceil(10_000)
    };
    t.is_multiple_of(step) || t == horizon
}

/// One round as seen by the harness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub action: Vec<usize>,
    pub pre: Vec<u8>,
    pub alpha: Vec<i8>,
    pub post: Vec<u8>,
}

/// What to keep beyond the metrics.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub trace: bool,
    pub diagnostics: bool,
}

/// Output of one replication.
#[derive(Debug, Clone)]
pub struct Replication {
    pub metrics: Metrics,
    pub means: Vec<f64>,
    pub protected: Vec<usize>,
    pub trace: Option<Vec<RoundRecord>>,
    pub decisions: Vec<Decision>,
    pub learner_state: LearnerState,
}

/// Draws the instance of replication `index`: item means and protected set.
pub fn replication_setup(spec: &ExperimentSpec, index: u64) -> (Vec<f64>, Vec<usize>) {
    let seed = replication_seed(spec.base_seed, index);
    let mut setup = rng_stream(seed, StreamId::Setup);
    let means = match &spec.env {
        EnvSource::Inline { means } | EnvSource::Movielens { means, .. } => means.clone(),
        EnvSource::Uniform { num_items, high } => {
            let mut m: Vec<f64> = (0..*num_items).map(|_| high * setup.uniform()).collect();
            make_suboptimal(&mut m, &spec.attack.targets, spec.list_len, &mut setup);
            m
        }
    };
    let targets = &spec.attack.targets;
    let protected = match (&spec.attack.protected, spec.learner) {
        (Some(p), _) => p.clone(),
        (None, LearnerKind::Ucb) => targets.clone(),
        (None, _) => {
            let pool: Vec<usize> = (0..means.len()).filter(|i| !targets.contains(i)).collect();
            let mut p = setup.choose_distinct(&pool, spec.list_len - targets.len());
            p.sort_unstable();
            p.extend_from_slice(targets);
            p
        }
    };
    (means, protected)
}

/// Conditions sampled means on every target lying outside the best list.
///
/// Targets that rank among the top `K` trade values with items drawn
/// uniformly from the ranks below `K`, so each target ends up holding a
/// uniformly chosen sub-optimal value.
fn make_suboptimal(means: &mut [f64], targets: &[usize], list_len: usize, rng: &mut RngStream) {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    // Non-target items ranked below K, available to trade with.
    let mut low: Vec<usize> = order[list_len..]
        .iter()
        .copied()
        .filter(|i| !targets.contains(i))
        .collect();
    let high: Vec<usize> = order[..list_len]
        .iter()
        .copied()
        .filter(|i| targets.contains(i))
        .collect();
    for &t in &high {
        // With K = L every item is shown and there is nothing to trade with.
        if low.is_empty() {
            break;
        }
        let j = rng.below(low.len());
        let other = low.swap_remove(j);
        means.swap(t, other);
    }
}

/// Runs replication `index` of `spec`.
pub fn run_replication(spec: &ExperimentSpec, index: u64, opts: RunOptions) -> Result<Replication> {
    spec.validate()?;
    let (means, protected) = replication_setup(spec, index);
    let kappa = spec.resolved_kappa();
    let env = EnvModel::new(
        spec.click_model(),
        means.clone(),
        Some(kappa.clone()),
        spec.list_len,
    )?;
    let num_items = means.len();
    let config = AttackConfig::new(
        spec.attack.delta0,
        spec.attack.delta,
        num_items,
        spec.attack.targets.clone(),
        protected.clone(),
    )?;
    let mut attacker = Attacker::new(spec.strategy, spec.learner, config, num_items, &kappa)?;
    if opts.diagnostics {
        attacker.state_mut().enable_diagnostics();
    }
    let mut learner = build_learner(spec.learner, num_items, &kappa, spec.epsilon);

    let seed = replication_seed(spec.base_seed, index);
    let mut env_rng = rng_stream(seed, StreamId::Environment);
    let mut attack_rng = rng_stream(seed, StreamId::Attacker);

    let horizon = spec.horizon;
    let mut recorder = metrics::Recorder::new(spec, &means);
    let mut trace = opts.trace.then(|| Vec::with_capacity(horizon as usize));
    for t in 1..=horizon {
        let action = learner.choose();
        let pre = env.draw_feedback(&action, &mut env_rng)?;
        let out = attacker.attack(&action, &pre, &mut attack_rng)?;
        learner.update(&action, &out.post.clicks)?;
        recorder.record(t, &action, attacker.state(), is_logged(t, horizon));
        if let Some(tr) = trace.as_mut() {
            tr.push(RoundRecord {
                round: t,
                action,
                pre: pre.clicks,
                alpha: out.alpha,
                post: out.post.clicks,
            });
        }
    }
    let decisions = attacker.state_mut().take_decisions();
    Ok(Replication {
        metrics: recorder.finish(attacker.state()),
        means,
        protected,
        trace,
        decisions,
        learner_state: learner.state().clone(),
    })
}

/// All replications of one experiment and their summary.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub runs: Vec<Metrics>,
    pub summary: Summary,
}

/// Runs every replication, in parallel on up to `jobs` threads.
///
/// Results are ordered by replication index, so the output does not depend
/// on scheduling.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<ExperimentResult> {
    spec.validate()?;
    let reps = u64::from(spec.replications);
    let run = || -> Result<Vec<Metrics>> {
        (0..reps)
            .into_par_iter()
            .map(|i| run_replication(spec, i, RunOptions::default()).map(|r| r.metrics))
            .collect()
    };
    let runs = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let summary = aggregate(&runs)?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        runs,
        summary,
    })
}

/// Paired runs of several strategies on identical seeds.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub results: Vec<ExperimentResult>,
}

impl Comparison {
    /// Mean final cost of strategy `a` over that of strategy `b`.
    pub fn relative_cost(&self, a: Strategy, b: Strategy) -> Option<f64> {
        let find = |s: Strategy| self.results.iter().find(|r| r.spec.strategy == s);
        let (ra, rb) = (find(a)?, find(b)?);
        Some(ra.summary.final_cost_mean / rb.summary.final_cost_mean)
    }
}

/// Runs `spec` once per strategy. All strategies share base seed, instance
/// draws and environment stream.
pub fn compare(
    spec: &ExperimentSpec,
    strategies: &[Strategy],
    jobs: Option<usize>,
) -> Result<Comparison> {
    if strategies.len() < 2 {
        return Err(Error::config("compare needs at least two strategies"));
    }
    let bad: Vec<&str> = strategies
        .iter()
        .filter(|s| !s.supports(spec.learner))
        .map(|s| s.name())
        .collect();
    if !bad.is_empty() {
        return Err(Error::config(format!(
            "strategies incompatible with learner `{}`: {}",
            spec.learner.name(),
            bad.join(", ")
        )));
    }
    let results = strategies
        .iter()
        .map(|&s| {
            let mut sp = spec.clone();
            sp.strategy = s;
            run_experiment(&sp, jobs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { results })
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Mean of the (first) target item; needs fixed means.
    MuTarget,
    Delta0,
    /// Upper end of the uniform mean distribution.
    X,
    Epsilon,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::MuTarget => "mu_target",
            SweepParam::Delta0 => "delta0",
            SweepParam::X => "x",
            SweepParam::Epsilon => "epsilon",
        }
    }

    /// `spec` with this parameter set to `value`.
    pub fn apply(self, spec: &ExperimentSpec, value: f64) -> Result<ExperimentSpec> {
        let mut sp = spec.clone();
        match (self, &mut sp.env) {
            (SweepParam::MuTarget, EnvSource::Inline { means }) => {
                means[spec.attack.targets[0]] = value;
            }
            (SweepParam::MuTarget, _) => {
                return Err(Error::config("mu_target sweeps need inline means"));
            }
            (SweepParam::X, EnvSource::Uniform { high, .. }) => *high = value,
            (SweepParam::X, _) => return Err(Error::config("x sweeps need uniform means")),
            (SweepParam::Delta0, _) => sp.attack.delta0 = value,
            (SweepParam::Epsilon, _) => sp.epsilon = value,
        }
        sp.validate()?;
        Ok(sp)
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub result: ExperimentResult,
}

/// Results of a one-dimensional sweep, for each strategy.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param: SweepParam,
    pub strategies: Vec<Strategy>,
    /// `points[s][i]`: strategy `s` at grid value `i`.
    pub points: Vec<Vec<SweepPoint>>,
}

/// Runs every strategy at every grid value.
pub fn sweep(
    spec: &ExperimentSpec,
    param: SweepParam,
    values: &[f64],
    strategies: &[Strategy],
    jobs: Option<usize>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::config("sweep grid is empty"));
    }
    let strategies = if strategies.is_empty() {
        vec![spec.strategy]
    } else {
        strategies.to_vec()
    };
    let mut points = Vec::with_capacity(strategies.len());
    for &s in &strategies {
        let mut row = Vec::with_capacity(values.len());
        for &v in values {
            let mut sp = param.apply(spec, v)?;
            sp.strategy = s;
            row.push(SweepPoint {
                value: v,
                result: run_experiment(&sp, jobs)?,
            });
        }
        points.push(row);
    }
    Ok(SweepResult {
        param,
        strategies,
        points,
    })
}
