//! Reference strategies: no attack, click removal outside a fixed set, and
//! a non-conservative single-arm attack.

use super::{fold_observed, AttackConfig, AttackState, FEASIBILITY_TOL};
use crate::env::{ClickModel, Feedback};

/// Leaves the feedback untouched but keeps the ledger in sync.
pub fn no_attack_round(
    state: &mut AttackState,
    kind: ClickModel,
    action: &[usize],
    pre: &Feedback,
) -> Vec<i8> {
    state.begin_round();
    let alpha = vec![0i8; action.len()];
    fold_observed(state, kind, action, &pre.clicks, &alpha);
    alpha
}

fn remove_clicks(
    state: &mut AttackState,
    kind: ClickModel,
    action: &[usize],
    pre: &Feedback,
    keep: impl Fn(&AttackState, usize) -> bool,
) -> Vec<i8> {
    state.begin_round();
    let mut alpha = vec![0i8; action.len()];
    for (pos, &item) in action.iter().enumerate() {
        if pre.clicks[pos] == 1 && !keep(state, item) {
            alpha[pos] = 1;
        }
    }
    fold_observed(state, kind, action, &pre.clicks, &alpha);
    alpha
}

/// Removes every click on a non-target item.
pub fn trivial1_attack_round(
    state: &mut AttackState,
    kind: ClickModel,
    action: &[usize],
    pre: &Feedback,
) -> Vec<i8> {
    remove_clicks(state, kind, action, pre, |s, item| s.is_target[item])
}

/// Removes every click on an item outside the protected set.
pub fn trivialk_attack_round(
    state: &mut AttackState,
    kind: ClickModel,
    action: &[usize],
    pre: &Feedback,
) -> Vec<i8> {
    remove_clicks(state, kind, action, pre, |s, item| s.is_protected[item])
}

/// Removes a click on a non-target arm whenever the unclamped residual
/// `N*pre_mean - prior_attacks - N*(lower_target - delta0)` is positive.
/// With several targets the lowest target bound is used.
pub fn modified_jun_attack_round(
    state: &mut AttackState,
    config: &AttackConfig,
    arm: usize,
    r0: u8,
) -> i8 {
    state.begin_round();
    state.observe_pre(arm, r0, 0);
    if r0 != 1 || state.is_target[arm] {
        return 0;
    }
    state.refresh_lower_now(config);
    let lower = state
        .lower_now
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let s = state.per_item[arm];
    let n = s.pulls as f64;
    let residual = s.pre_reward_sum as f64 - s.attack_sum as f64 - n * (lower - config.delta0);
    if residual > FEASIBILITY_TOL {
        state.apply_attack(arm, 1);
        1
    } else {
        0
    }
}
