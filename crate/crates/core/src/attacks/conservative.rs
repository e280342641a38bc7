//! Conservative attacks driven by frozen lower confidence bounds.

use super::{ceil_tol, AttackConfig, AttackState, Decision, FEASIBILITY_TOL};
use crate::env::{feasible, ClickModel, Feedback};
use crate::error::{Error, Result};
use crate::stats::clamp_plus;

/// Attack value for an unprotected item `item` whose current sample (with
/// pre-attack click `r0`) is already in the ledger.
///
/// For each protected item `a` the residual
/// `gamma(a) = [N*pre_mean - prior_attacks - N*[lower_a - delta0]_+]_+`
/// is computed twice: against `a`'s bound now, and against the bound frozen
/// at `h[item][a]`. When the largest current residual fits within `r0` it is
/// paid and every `h[item][.]` advances to `round`; otherwise the frozen
/// residual is paid and the timestamps stay put.
pub fn cal_alpha(
    state: &mut AttackState,
    config: &AttackConfig,
    item: usize,
    r0: u8,
    round: u64,
) -> Result<i8> {
    if state.is_protected[item] {
        return Err(Error::Domain(format!("item {item} is protected")));
    }
    state.refresh_lower_now(config);
    let m = state.protected.len();
    let row = item * m;
    let s = state.per_item[item];
    let n = s.pulls as f64;
    let residual = s.pre_reward_sum as f64 - s.attack_sum as f64;
    let logging = state.decisions.is_some();
    let mut gamma = Vec::with_capacity(if logging { m } else { 0 });
    let mut gamma_tilde = Vec::with_capacity(if logging { m } else { 0 });
    let (mut g_max, mut gt_max) = (0.0f64, 0.0f64);
    for j in 0..m {
        let g = clamp_plus(residual - n * clamp_plus(state.lower_now[j] - config.delta0));
        let gt = clamp_plus(residual - n * clamp_plus(state.frozen_lower[row + j] - config.delta0));
        g_max = g_max.max(g);
        gt_max = gt_max.max(gt);
        if logging {
            gamma.push(g);
            gamma_tilde.push(gt);
        }
    }
    let advanced = g_max <= f64::from(r0) + FEASIBILITY_TOL;
    let alpha = if advanced {
        state.timestamps[row..row + m].fill(round);
        state.frozen_lower[row..row + m].copy_from_slice(&state.lower_now);
        ceil_tol(g_max)
    } else {
        ceil_tol(gt_max)
    };
    if alpha > i64::from(r0) {
        return Err(Error::Invariant(format!(
            "attack {alpha} on item {item} exceeds click {r0} at round {round}"
        )));
    }
    let alpha = alpha as i8;
    state.apply_attack(item, alpha);
    state.push_decision(|| Decision::Alpha {
        round,
        item,
        gamma,
        gamma_tilde,
        advanced,
        alpha,
    });
    Ok(alpha)
}

/// One round against a single-arm learner that pulled `arm`.
pub fn ucb_attack_round(
    state: &mut AttackState,
    config: &AttackConfig,
    arm: usize,
    r0: u8,
) -> Result<i8> {
    if r0 > 1 {
        return Err(Error::InfeasibleFeedback(format!("reward {r0}")));
    }
    let t = state.begin_round();
    state.observe_pre(arm, r0, 0);
    if state.is_protected[arm] {
        return Ok(0);
    }
    cal_alpha(state, config, arm, r0, t)
}

/// One round under the position-based model.
///
/// Protected items shown this round are folded first so that the bounds the
/// unprotected items are pushed under include the current round.
pub fn pbm_attack_round(
    state: &mut AttackState,
    config: &AttackConfig,
    action: &[usize],
    pre: &Feedback,
) -> Result<Vec<i8>> {
    check_shape(action, pre, ClickModel::PositionBased)?;
    let t = state.begin_round();
    for (pos, &item) in action.iter().enumerate() {
        if state.is_protected[item] {
            state.observe_pre(item, pre.clicks[pos], pos);
        }
    }
    let mut alpha = vec![0i8; action.len()];
    for (pos, &item) in action.iter().enumerate() {
        if !state.is_protected[item] {
            state.observe_pre(item, pre.clicks[pos], pos);
            alpha[pos] = cal_alpha(state, config, item, pre.clicks[pos], t)?;
        }
    }
    Ok(alpha)
}

/// One round under the cascade model.
///
/// An attacked click on an unprotected item is moved to the first protected
/// item shown below it, if any, so the user still appears to click once.
/// The ledger records exactly the positions a learner sees after the attack.
pub fn cascade_attack_round(
    state: &mut AttackState,
    config: &AttackConfig,
    action: &[usize],
    pre: &Feedback,
) -> Result<Vec<i8>> {
    check_shape(action, pre, ClickModel::Cascade)?;
    let t = state.begin_round();
    let k = action.len();
    let mut alpha = vec![0i8; k];
    let Some(c) = pre.clicks.iter().position(|&x| x == 1) else {
        for (pos, &item) in action.iter().enumerate() {
            state.observe_pre(item, 0, pos);
        }
        return Ok(alpha);
    };
    for (pos, (&item, &click)) in action.iter().zip(&pre.clicks).enumerate().take(c + 1) {
        state.observe_pre(item, click, pos);
    }
    let clicked = action[c];
    if state.is_protected[clicked] {
        return Ok(alpha);
    }
    alpha[c] = cal_alpha(state, config, clicked, 1, t)?;
    if alpha[c] == 1 {
        let moved_to = (c + 1..k).find(|&i| state.is_protected[action[i]]);
        let last = moved_to.unwrap_or(k - 1);
        for (pos, &item) in action.iter().enumerate().take(last + 1).skip(c + 1) {
            state.observe_pre(item, 0, pos);
        }
        if let Some(i) = moved_to {
            alpha[i] = -1;
            state.apply_attack(action[i], -1);
        }
    }
    Ok(alpha)
}

fn check_shape(action: &[usize], pre: &Feedback, kind: ClickModel) -> Result<()> {
    if action.len() != pre.clicks.len() {
        return Err(Error::InfeasibleFeedback(format!(
            "{} clicks for {} positions",
            pre.clicks.len(),
            action.len()
        )));
    }
    if !feasible(kind, &pre.clicks) {
        return Err(Error::InfeasibleFeedback(format!(
            "{:?} under {kind:?}",
            pre.clicks
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::post_feedback;
    use crate::stats::{ArmStats, BetaParams};

    fn state(num_items: usize, cfg: &AttackConfig, k: usize) -> AttackState {
        let mut s = AttackState::new(num_items, cfg, vec![1.0; k]);
        s.enable_diagnostics();
        s
    }

    #[test]
    fn mu_lower_reference() {
        let cfg = AttackConfig::single_target(0.1, 0.1, 2, 1).unwrap();
        let mut st = state(2, &cfg, 1);
        assert_eq!(ucb_attack_round(&mut st, &cfg, 1, 1).unwrap(), 0);
        let v = st.mu_lower(1, 1, &cfg).unwrap();
        assert!((v - (1.0 - 2.0 * 1.446_820_6)).abs() < 2e-3);
        assert!(v <= st.per_item[1].post_mean().unwrap());
        assert!(matches!(st.mu_lower(0, 1, &cfg), Err(Error::UndefinedMean)));
    }

    #[test]
    fn first_pull_pays_the_click() {
        let cfg = AttackConfig::single_target(0.1, 0.1, 2, 1).unwrap();
        for r0 in [0u8, 1] {
            let mut st = state(2, &cfg, 1);
            assert_eq!(ucb_attack_round(&mut st, &cfg, 0, r0).unwrap(), r0 as i8);
            assert_eq!(st.timestamp(0, 1), Some(1));
            assert_eq!(st.cumulative_cost, u64::from(r0));
        }
    }

    #[test]
    fn target_is_never_attacked() {
        let cfg = AttackConfig::single_target(0.1, 0.1, 2, 1).unwrap();
        let mut st = state(2, &cfg, 1);
        for _ in 0..50 {
            assert_eq!(ucb_attack_round(&mut st, &cfg, 1, 1).unwrap(), 0);
        }
        assert_eq!(st.cumulative_cost, 0);
        assert!(st.take_decisions().is_empty());
    }

    #[test]
    fn zero_click_zero_gamma_advances() {
        let cfg = AttackConfig::single_target(0.1, 0.1, 2, 1).unwrap();
        let mut st = state(2, &cfg, 1);
        ucb_attack_round(&mut st, &cfg, 1, 1).unwrap();
        ucb_attack_round(&mut st, &cfg, 0, 0).unwrap();
        assert_eq!(st.timestamp(0, 1), Some(2));
        assert_eq!(st.cumulative_cost, 0);
    }

    #[test]
    fn frozen_bound_survives_later_rounds() {
        let cfg = AttackConfig::single_target(0.05, 0.1, 2, 1).unwrap();
        let mut st = state(2, &cfg, 1);
        // Make the target's bound clearly positive, then let arm 0 set h.
        for _ in 0..3000 {
            ucb_attack_round(&mut st, &cfg, 1, 1).unwrap();
        }
        ucb_attack_round(&mut st, &cfg, 0, 1).unwrap();
        let h = st.timestamp(0, 1).unwrap();
        let frozen = st.mu_lower(1, h, &cfg).unwrap();
        assert!(frozen > 0.0);
        for _ in 0..100 {
            ucb_attack_round(&mut st, &cfg, 1, 0).unwrap();
        }
        assert_eq!(st.timestamp(0, 1), Some(h));
        assert_eq!(st.mu_lower(1, h, &cfg).unwrap(), frozen);
    }

    // gamma recomputed from raw sums, written independently of cal_alpha.
    fn oracle_gamma(l: &ArmStats, a: &ArmStats, b: &BetaParams, delta0: f64) -> f64 {
        let n = l.pulls as f64;
        let mean_a = (a.pre_reward_sum as f64 - a.attack_sum as f64) / a.pulls as f64;
        let lower = mean_a - 2.0 * b.beta(a.pulls).unwrap();
        let inner =
            n * (l.pre_reward_sum as f64 / n) - l.attack_sum as f64 - n * (lower - delta0).max(0.0);
        inner.max(0.0)
    }

    #[test]
    fn hand_built_state_matches_oracle() {
        // Items 0..4, protected {2, 3}.
        let cfg = AttackConfig::new(0.1, 0.1, 4, vec![3], vec![2, 3]).unwrap();
        let mut st = state(4, &cfg, 2);
        st.per_item[2] = ArmStats {
            pulls: 400,
            pre_reward_sum: 330,
            attack_sum: 0,
            bias_corrected_pulls: 400.0,
        };
        st.per_item[3] = ArmStats {
            pulls: 900,
            pre_reward_sum: 560,
            attack_sum: -12,
            bias_corrected_pulls: 900.0,
        };
        st.per_item[0] = ArmStats {
            pulls: 40,
            pre_reward_sum: 30,
            attack_sum: 17,
            bias_corrected_pulls: 40.0,
        };
        st.lower_stale = true;
        st.round = 5000;
        st.observe_pre(0, 1, 0);
        let alpha = cal_alpha(&mut st, &cfg, 0, 1, 5000).unwrap();
        let d = st.take_decisions();
        let Decision::Alpha {
            gamma,
            gamma_tilde,
            advanced,
            ..
        } = &d[0]
        else {
            panic!()
        };
        let l = st.per_item[0];
        let before = ArmStats {
            attack_sum: l.attack_sum - i64::from(alpha),
            ..l
        };
        for (j, &a) in [2usize, 3].iter().enumerate() {
            let want = oracle_gamma(&before, &st.per_item[a], &cfg.beta_params, cfg.delta0);
            assert!(
                (gamma[j] - want).abs() <= 1e-12 * want.max(1.0),
                "{} vs {want}",
                gamma[j]
            );
            // Never advanced: frozen bound is -inf, so gamma_tilde is the raw residual.
            assert_eq!(gamma_tilde[j], 14.0);
        }
        let g_max = gamma[0].max(gamma[1]);
        assert!(g_max > 0.0 && g_max < 1.0, "{g_max}");
        assert!(*advanced);
        assert_eq!(alpha, 1);
        assert_eq!(st.timestamp(0, 2), Some(5000));
        assert_eq!(st.timestamp(0, 3), Some(5000));
    }

    #[test]
    fn pbm_all_protected_zero_attack() {
        let cfg = AttackConfig::new(0.1, 0.05, 6, vec![5], vec![1, 5]).unwrap();
        let mut st = state(6, &cfg, 2);
        let fb = Feedback::from_clicks(vec![1, 1]);
        assert_eq!(
            pbm_attack_round(&mut st, &cfg, &[5, 1], &fb).unwrap(),
            vec![0, 0]
        );
        assert_eq!(st.cumulative_cost, 0);
    }

    #[test]
    fn pbm_zero_click_outside_item() {
        let cfg = AttackConfig::new(0.1, 0.05, 6, vec![5], vec![1, 5]).unwrap();
        let mut st = state(6, &cfg, 2);
        let fb = Feedback::from_clicks(vec![1, 0]);
        assert_eq!(
            pbm_attack_round(&mut st, &cfg, &[5, 0], &fb).unwrap(),
            vec![0, 0]
        );
    }

    #[test]
    fn cascade_moves_click_to_first_protected_below() {
        // Positions 0..5; outside click at position 1, protected item at 4.
        let cfg = AttackConfig::new(0.1, 0.05, 8, vec![7], vec![6, 7]).unwrap();
        let mut st = state(8, &cfg, 5);
        let action = [0, 1, 2, 3, 7];
        let pre = Feedback::from_clicks(vec![0, 1, 0, 0, 0]);
        let alpha = cascade_attack_round(&mut st, &cfg, &action, &pre).unwrap();
        assert_eq!(alpha, vec![0, 1, 0, 0, -1]);
        let post = post_feedback(ClickModel::Cascade, &pre.clicks, &alpha).unwrap();
        assert_eq!(post.clicks, vec![0, 0, 0, 0, 1]);
        assert_eq!(st.cumulative_cost, 2);
        for &item in &action {
            assert_eq!(st.per_item[item].pulls, 1);
        }
        assert_eq!(st.per_item[7].post_reward_sum(), 1);
    }

    #[test]
    fn cascade_zero_cases() {
        let cfg = AttackConfig::new(0.1, 0.05, 8, vec![7], vec![6, 7]).unwrap();
        let mut st = state(8, &cfg, 3);
        let none = Feedback::from_clicks(vec![0, 0, 0]);
        assert_eq!(
            cascade_attack_round(&mut st, &cfg, &[0, 1, 2], &none).unwrap(),
            vec![0; 3]
        );
        let on_target = Feedback::from_clicks(vec![0, 1, 0]);
        assert_eq!(
            cascade_attack_round(&mut st, &cfg, &[0, 7, 2], &on_target).unwrap(),
            vec![0; 3]
        );
        assert_eq!(st.cumulative_cost, 0);
        // Positions after the click stay unobserved.
        assert_eq!(st.per_item[2].pulls, 1);
        let bad = Feedback::from_clicks(vec![1, 1, 0]);
        assert!(cascade_attack_round(&mut st, &cfg, &[0, 1, 2], &bad).is_err());
    }
}
