//! Experiment files and the shipped presets.
//!
//! Item ids in files and on the command line are 1-based; the library is
//! 0-based throughout.
//!
//! ```toml
//! name = "example"
//! learner = "pbm_ucb"          # ucb | pbm_ucb | cascade_ucb
//! list_len = 8
//! horizon = 100000
//! replications = 20
//! seed = 1
//! epsilon = 0.1
//! strategies = ["pbm_attack", "trivialK"]
//!
//! [env]
//! source = "uniform"           # inline | uniform | movielens
//! num_items = 16
//! high = 1.0
//!
//! [attack]
//! delta0 = 0.1
//! delta = 0.05
//! target = 16                  # or targets = [..]; defaults to the last item
//!
//! [[sweep]]
//! delta0 = [0.05, 0.1, 0.2]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::Strategy;
use crate::error::{Error, Result};
use crate::harness::{ingest_movielens, AttackParams, EnvSource, ExperimentSpec, SweepParam};
use crate::learners::LearnerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Inline,
    Uniform,
    Movielens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFile {
    pub source: SourceKind,
    pub num_items: Option<usize>,
    pub high: Option<f64>,
    pub means: Option<Vec<f64>>,
    pub ratings: Option<String>,
    pub threshold: Option<f64>,
    pub kappa: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackFile {
    pub delta0: f64,
    pub delta: f64,
    pub target: Option<usize>,
    pub targets: Option<Vec<usize>>,
    pub protected: Option<Vec<usize>>,
}

/// One sweep; exactly one key may be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub mu_target: Option<Vec<f64>>,
    pub delta0: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub epsilon: Option<Vec<f64>>,
}

impl SweepFile {
    pub fn grid(&self) -> Result<(SweepParam, Vec<f64>)> {
        let set: Vec<(SweepParam, &Vec<f64>)> = [
            (SweepParam::MuTarget, &self.mu_target),
            (SweepParam::Delta0, &self.delta0),
            (SweepParam::X, &self.x),
            (SweepParam::Epsilon, &self.epsilon),
        ]
        .into_iter()
        .filter_map(|(p, v)| v.as_ref().map(|v| (p, v)))
        .collect();
        match set.as_slice() {
            [(p, v)] if !v.is_empty() => Ok((*p, v.to_vec())),
            [_] => Err(Error::config("sweep grid is empty")),
            [] => Err(Error::config("sweep names no parameter")),
            _ => Err(Error::config(
                "sweeps vary exactly one parameter; multi-dimensional grids are not supported",
            )),
        }
    }
}

fn default_list_len() -> usize {
    1
}

fn default_replications() -> u32 {
    20
}

fn default_epsilon() -> f64 {
    0.1
}

/// Contents of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub name: String,
    pub learner: LearnerKind,
    #[serde(default = "default_list_len")]
    pub list_len: usize,
    pub horizon: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub strategies: Vec<Strategy>,
    pub env: EnvFile,
    pub attack: AttackFile,
    #[serde(default)]
    pub sweep: Vec<SweepFile>,
}

impl ExperimentFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::Parse {
                path: origin.into(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Values that replace file settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<u64>,
    pub num_items: Option<usize>,
    pub list_len: Option<usize>,
    pub seed: Option<u64>,
    pub delta0: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub replications: Option<u32>,
    pub strategies: Option<Vec<Strategy>>,
    pub ratings: Option<PathBuf>,
}

/// A file after overrides, with everything needed to run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    /// Runs the first listed strategy.
    pub spec: ExperimentSpec,
    pub strategies: Vec<Strategy>,
    pub sweeps: Vec<(SweepParam, Vec<f64>)>,
}

fn to_zero_based(ids: &[usize], num_items: usize, what: &str) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&i| {
            if i == 0 || i > num_items {
                Err(Error::config(format!(
                    "{what} item {i} outside 1..={num_items}"
                )))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

/// Applies `ov` to `file` and builds the experiment.
pub fn resolve(file: &ExperimentFile, ov: &Overrides) -> Result<Resolved> {
    let env = &file.env;
    let source = match env.source {
        SourceKind::Inline => {
            let means = env
                .means
                .clone()
                .ok_or_else(|| Error::config("inline source needs `means`"))?;
            if let Some(l) = ov.num_items.filter(|&l| l != means.len()) {
                return Err(Error::config(format!(
                    "cannot resize inline means ({} items) to {l}",
                    means.len()
                )));
            }
            EnvSource::Inline { means }
        }
        SourceKind::Uniform => EnvSource::Uniform {
            num_items: ov
                .num_items
                .or(env.num_items)
                .ok_or_else(|| Error::config("uniform source needs `num_items`"))?,
            high: env.high.unwrap_or(1.0),
        },
        SourceKind::Movielens => {
            let path = ov
                .ratings
                .clone()
                .or_else(|| env.ratings.as_ref().map(PathBuf::from))
                .ok_or_else(|| Error::config("movielens source needs a ratings file"))?;
            let num_items = ov
                .num_items
                .or(env.num_items)
                .ok_or_else(|| Error::config("movielens source needs `num_items`"))?;
            let threshold = env.threshold.unwrap_or(4.0);
            let means = ingest_movielens(&path, num_items, threshold)?;
            EnvSource::Movielens {
                ratings: path.display().to_string(),
                threshold,
                means,
            }
        }
    };
    let num_items = source.num_items();
    let a = &file.attack;
    let targets = match (a.target, &a.targets) {
        (Some(_), Some(_)) => {
            return Err(Error::config("set either `target` or `targets`, not both"))
        }
        (Some(t), None) => vec![t],
        (None, Some(ts)) => ts.clone(),
        (None, None) => vec![num_items],
    };
    let targets = to_zero_based(&targets, num_items, "target")?;
    let protected = a
        .protected
        .as_ref()
        .map(|p| to_zero_based(p, num_items, "protected"))
        .transpose()?;
    let strategies = ov
        .strategies
        .clone()
        .unwrap_or_else(|| file.strategies.clone());
    let strategy = *strategies
        .first()
        .ok_or_else(|| Error::config("no strategy given"))?;
    let spec = ExperimentSpec {
        name: file.name.clone(),
        learner: file.learner,
        env: source,
        list_len: ov.list_len.unwrap_or(file.list_len),
        kappa: env.kappa.clone(),
        strategy,
        attack: AttackParams {
            delta0: ov.delta0.unwrap_or(a.delta0),
            delta: ov.delta.unwrap_or(a.delta),
            targets,
            protected,
        },
        horizon: ov.horizon.unwrap_or(file.horizon),
        replications: ov.replications.unwrap_or(file.replications),
        base_seed: ov.seed.unwrap_or(file.seed),
        epsilon: ov.epsilon.unwrap_or(file.epsilon),
    };
    spec.validate()?;
    for s in &strategies {
        if !s.supports(spec.learner) {
            return Err(Error::config(format!(
                "strategy `{s}` cannot attack learner `{}`",
                spec.learner.name()
            )));
        }
    }
    let sweeps = file
        .sweep
        .iter()
        .map(SweepFile::grid)
        .collect::<Result<Vec<_>>>()?;
    Ok(Resolved {
        spec,
        strategies,
        sweeps,
    })
}

/// Shipped presets, by name.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "fig1-real-pbm",
        include_str!("../presets/fig1-real-pbm.toml"),
    ),
    (
        "fig1-synthetic-pbm",
        include_str!("../presets/fig1-synthetic-pbm.toml"),
    ),
    (
        "fig4-two-armed",
        include_str!("../presets/fig4-two-armed.toml"),
    ),
    ("fig5-sweeps", include_str!("../presets/fig5-sweeps.toml")),
    (
        "fig6-synthetic-cascade",
        include_str!("../presets/fig6-synthetic-cascade.toml"),
    ),
    (
        "fig7-real-cascade",
        include_str!("../presets/fig7-real-cascade.toml"),
    ),
    ("pull-bound-ucb", include_str!("../presets/pull-bound-ucb.toml")),
];

const ALIASES: &[(&str, &str)] = &[("fig1-synthetic", "fig1-synthetic-pbm")];

/// Text of preset `name` (aliases accepted).
pub fn preset_text(name: &str) -> Result<&'static str> {
    let canonical = ALIASES
        .iter()
        .find(|(a, _)| *a == name)
        .map_or(name, |(_, c)| *c);
    PRESETS
        .iter()
        .find(|(n, _)| *n == canonical)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::config(format!(
                "unknown preset `{name}` (available: {})",
                names.join(", ")
            ))
        })
}

/// Parsed preset `name`.
pub fn preset(name: &str) -> Result<ExperimentFile> {
    ExperimentFile::parse(preset_text(name)?, Path::new(&format!("preset:{name}")))
}
