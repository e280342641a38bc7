//! Brute-force replay of attack decisions from raw round logs.
//!
//! Nothing here reuses the library's bookkeeping: every quantity is
//! recomputed by scanning the full per-item observation history, with the
//! confidence radius written out in closed form.

#![allow(dead_code)]

use std::f64::consts::PI;

use clickpoison::attacks::{Decision, Strategy};
use clickpoison::harness::RoundRecord;
use clickpoison::ClickModel;

pub fn beta(n: u64, num_items: usize, delta: f64) -> f64 {
    let n = n as f64;
    ((PI * PI * num_items as f64 * n * n / (3.0 * delta)).ln() / (2.0 * n)).sqrt()
}

fn plus(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Equal up to `1e-12` relative to `max(|a|, |b|, 1)`; values are click
/// counts or probabilities, so 1 is the natural scale floor.
pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Positions whose outcome the learner sees after the attack.
pub fn observed_positions(kind: ClickModel, rec: &RoundRecord) -> usize {
    match kind {
        ClickModel::Cascade => rec
            .post
            .iter()
            .position(|&c| c == 1)
            .map_or(rec.post.len(), |c| c + 1),
        _ => rec.post.len(),
    }
}

/// Checks one round's feedback: binary, `alpha` in {-1, 0, 1},
/// `post = pre - alpha`, and a shape the click model can produce.
pub fn round_is_feasible(kind: ClickModel, rec: &RoundRecord) -> Result<(), String> {
    let k = rec.action.len();
    if rec.pre.len() != k || rec.post.len() != k || rec.alpha.len() != k {
        return Err(format!("round {}: length mismatch", rec.round));
    }
    for i in 0..k {
        if !(-1..=1).contains(&rec.alpha[i]) {
            return Err(format!("round {}: alpha {}", rec.round, rec.alpha[i]));
        }
        if rec.pre[i] > 1 || rec.post[i] > 1 {
            return Err(format!("round {}: non-binary click", rec.round));
        }
        if i16::from(rec.pre[i]) - i16::from(rec.alpha[i]) != i16::from(rec.post[i]) {
            return Err(format!("round {}: post != pre - alpha at {i}", rec.round));
        }
    }
    let clicks = rec.post.iter().filter(|&&c| c == 1).count();
    match kind {
        ClickModel::SingleArm if k != 1 => Err(format!(
            "round {}: {k} positions for a single arm",
            rec.round
        )),
        ClickModel::Cascade if clicks > 1 => {
            Err(format!("round {}: {clicks} cascade clicks", rec.round))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy)]
struct Obs {
    round: u64,
    pos: usize,
    pre: u8,
    alpha: i8,
}

#[derive(Debug, Clone)]
pub struct OracleAlpha {
    pub round: u64,
    pub item: usize,
    pub gamma: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
    pub advanced: bool,
    pub alpha: i8,
}

#[derive(Debug, Clone)]
pub struct OracleCoin {
    pub round: u64,
    pub item: usize,
    pub prob: f64,
    pub attacked: bool,
}

#[derive(Debug, Default)]
pub struct Replay {
    pub alphas: Vec<OracleAlpha>,
    pub coins: Vec<OracleCoin>,
    /// Rounds where the logged attack differs from what the oracle derives.
    pub mismatches: Vec<String>,
    /// Checks of `post_mean(l) <= [frozen lower(a) - delta0]_+` after an
    /// attack, one per attacked round and protected item.
    pub inequality_checks: u64,
    pub inequality_failures: Vec<String>,
}

pub struct Oracle {
    kind: ClickModel,
    strategy: Strategy,
    num_items: usize,
    delta0: f64,
    delta: f64,
    protected: Vec<usize>,
    history: Vec<Vec<Obs>>,
    /// Lower bound of each protected item frozen for each item; `None`
    /// until the first advance, which then imposes no constraint.
    frozen: Vec<Vec<Option<f64>>>,
}

impl Oracle {
    pub fn new(
        kind: ClickModel,
        strategy: Strategy,
        num_items: usize,
        delta0: f64,
        delta: f64,
        protected: &[usize],
    ) -> Self {
        Oracle {
            kind,
            strategy,
            num_items,
            delta0,
            delta,
            protected: protected.to_vec(),
            history: vec![Vec::new(); num_items],
            frozen: vec![vec![None; protected.len()]; num_items],
        }
    }

    /// Post-attack lower bound of `a` from observations accepted by `keep`.
    fn lower(&self, a: usize, keep: impl Fn(&Obs) -> bool) -> Option<f64> {
        let (mut n, mut sum) = (0u64, 0i64);
        for o in self.history[a].iter().filter(|o| keep(o)) {
            n += 1;
            sum += i64::from(o.pre) - i64::from(o.alpha);
        }
        (n > 0).then(|| sum as f64 / n as f64 - 2.0 * beta(n, self.num_items, self.delta))
    }

    /// Pre-attack mean and observation count.
    fn pre_stats(&self, a: usize, keep: impl Fn(&Obs) -> bool) -> (u64, f64) {
        let (mut n, mut sum) = (0u64, 0u64);
        for o in self.history[a].iter().filter(|o| keep(o)) {
            n += 1;
            sum += u64::from(o.pre);
        }
        (n, if n > 0 { sum as f64 / n as f64 } else { 0.0 })
    }

    /// Replays a whole trace.
    pub fn replay(mut self, trace: &[RoundRecord]) -> Replay {
        let mut out = Replay::default();
        for rec in trace {
            self.round(rec, &mut out);
        }
        out
    }

    fn round(&mut self, rec: &RoundRecord, out: &mut Replay) {
        let t = rec.round;
        let seen = observed_positions(self.kind, rec);
        for pos in 0..seen {
            self.history[rec.action[pos]].push(Obs {
                round: t,
                pos,
                pre: rec.pre[pos],
                alpha: rec.alpha[pos],
            });
        }
        match self.strategy {
            Strategy::UcbAttack | Strategy::PbmAttack | Strategy::CascadeAttack => {
                self.conservative(rec, out)
            }
            Strategy::GeneralAttack => self.general(rec, out),
            _ => {}
        }
    }

    fn is_protected(&self, item: usize) -> bool {
        self.protected.contains(&item)
    }

    fn conservative(&mut self, rec: &RoundRecord, out: &mut Replay) {
        let t = rec.round;
        let calls: Vec<usize> = match self.kind {
            ClickModel::Cascade => rec
                .pre
                .iter()
                .position(|&c| c == 1)
                .filter(|&c| !self.is_protected(rec.action[c]))
                .into_iter()
                .collect(),
            _ => (0..rec.action.len())
                .filter(|&p| !self.is_protected(rec.action[p]))
                .collect(),
        };
        let mut shared: Option<(usize, Vec<Option<f64>>)> = None;
        for pos in calls {
            let item = rec.action[pos];
            let r0 = rec.pre[pos];
            let (mut n, mut pre_sum, mut prior) = (0u64, 0i64, 0i64);
            for o in &self.history[item] {
                n += 1;
                pre_sum += i64::from(o.pre);
                if o.round < t {
                    prior += i64::from(o.alpha);
                }
            }
            let residual = (pre_sum - prior) as f64;
            let nf = n as f64;
            let kind = self.kind;
            // Protected items shown this round count before any call, except
            // under cascade where only positions above the click are seen yet.
            let cutoff = if kind == ClickModel::Cascade {
                pos
            } else {
                usize::MAX
            };
            if shared.as_ref().is_none_or(|(c, _)| *c != cutoff) {
                let lowers = self
                    .protected
                    .iter()
                    .map(|&a| self.lower(a, |o| o.round < t || o.pos < cutoff))
                    .collect();
                shared = Some((cutoff, lowers));
            }
            let now = shared.as_ref().unwrap().1.clone();
            let bound = |l: Option<f64>| l.map_or(0.0, |l| nf * plus(l - self.delta0));
            let gamma: Vec<f64> = now.iter().map(|&l| plus(residual - bound(l))).collect();
            let gamma_tilde: Vec<f64> = self.frozen[item]
                .iter()
                .map(|&l| plus(residual - bound(l)))
                .collect();
            let g_max = gamma.iter().cloned().fold(0.0, f64::max);
            let gt_max = gamma_tilde.iter().cloned().fold(0.0, f64::max);
            let advanced = g_max <= f64::from(r0) + 1e-9;
            let pay = if advanced { g_max } else { gt_max };
            let alpha = (pay - 1e-9).ceil().max(0.0) as i8;
            if advanced {
                self.frozen[item] = now;
            }
            if alpha != rec.alpha[pos] {
                out.mismatches.push(format!(
                    "round {t}: item {item} logged alpha {} but oracle derives {alpha}",
                    rec.alpha[pos]
                ));
            }
            if kind == ClickModel::Cascade && alpha == 1 {
                let moved = (pos + 1..rec.action.len()).find(|&i| self.is_protected(rec.action[i]));
                for i in pos + 1..rec.action.len() {
                    let want = if Some(i) == moved { -1 } else { 0 };
                    if rec.alpha[i] != want {
                        out.mismatches.push(format!(
                            "round {t}: position {i} alpha {} expected {want}",
                            rec.alpha[i]
                        ));
                    }
                }
            }
            if alpha == 1 {
                let post_mean = (pre_sum - prior - 1) as f64 / nf;
                for (j, l) in self.frozen[item].iter().enumerate() {
                    out.inequality_checks += 1;
                    let rhs = l.map_or(f64::INFINITY, |l| plus(l - self.delta0));
                    // Frozen bounds that were never set constrain nothing.
                    if post_mean > rhs + 1e-9 {
                        out.inequality_failures.push(format!(
                            "round {t}: mean {post_mean} of item {item} above bound {rhs} of item {}",
                            self.protected[j]
                        ));
                    }
                }
            }
            out.alphas.push(OracleAlpha {
                round: t,
                item,
                gamma,
                gamma_tilde,
                advanced,
                alpha,
            });
        }
    }

    fn general(&mut self, rec: &RoundRecord, out: &mut Replay) {
        let t = rec.round;
        let k = rec.action.len();
        let pre_seen = match self.kind {
            ClickModel::Cascade => rec.pre.iter().position(|&c| c == 1).map_or(k, |c| c + 1),
            _ => k,
        };
        let keep = |o: &Obs| o.round < t || o.pos < pre_seen;
        for pos in 0..pre_seen {
            let item = rec.action[pos];
            if rec.pre[pos] != 1 || self.is_protected(item) {
                continue;
            }
            let (n, m) = self.pre_stats(item, keep);
            let upper = m + beta(n, self.num_items, self.delta);
            let mut prob = 0.0f64;
            for &a in &self.protected {
                let (na, ma) = self.pre_stats(a, keep);
                if na == 0 {
                    prob = 1.0;
                    break;
                }
                prob = prob.max(plus(upper - (ma - beta(na, self.num_items, self.delta))) / upper);
            }
            let prob = prob.clamp(0.0, 1.0);
            out.coins.push(OracleCoin {
                round: t,
                item,
                prob,
                attacked: rec.alpha[pos] == 1,
            });
        }
    }
}

/// Compares the library's decision log with the oracle's derivation.
pub fn compare_decisions(logged: &[Decision], replay: &Replay) -> Vec<String> {
    let mut errs = replay.mismatches.clone();
    let mut alphas = replay.alphas.iter();
    let mut coins = replay.coins.iter();
    for d in logged {
        match d {
            Decision::Alpha {
                round,
                item,
                gamma,
                gamma_tilde,
                advanced,
                alpha,
            } => {
                let Some(o) = alphas.next() else {
                    errs.push(format!("round {round}: extra decision"));
                    continue;
                };
                let ok = o.round == *round
                    && o.item == *item
                    && o.advanced == *advanced
                    && o.alpha == *alpha
                    && gamma.len() == o.gamma.len()
                    && gamma.iter().zip(&o.gamma).all(|(a, b)| close(*a, *b))
                    && gamma_tilde
                        .iter()
                        .zip(&o.gamma_tilde)
                        .all(|(a, b)| close(*a, *b));
                if !ok {
                    errs.push(format!("round {round}: logged {d:?} vs oracle {o:?}"));
                }
            }
            Decision::Coin {
                round,
                item,
                prob,
                attacked,
            } => {
                let Some(o) = coins.next() else {
                    errs.push(format!("round {round}: extra coin"));
                    continue;
                };
                if o.round != *round
                    || o.item != *item
                    || o.attacked != *attacked
                    || !close(o.prob, *prob)
                {
                    errs.push(format!("round {round}: logged {d:?} vs oracle {o:?}"));
                }
            }
        }
    }
    if alphas.next().is_some() || coins.next().is_some() {
        errs.push("oracle derived decisions the library did not log".into());
    }
    errs
}
