//! Exact Lipschitz constants of rewards, policies, configurations, and
//! value functions, plus the closed-form semi-norm bounds that hold under
//! the contraction condition `gamma * L_p * (1 + L_pi) < 1`.
//!
//! Product metrics are sums of the component metrics and are evaluated on
//! the fly; no product space is ever materialized. All constants come from
//! exhaustive pair enumeration, which is the scaling bottleneck of the
//! toolkit (O(S^2 A^2) transport solves for a configuration constant) and
//! is acceptable at the instance sizes this crate targets.

use ndarray::{ArrayView2, ArrayView3};

use crate::error::Result;
use crate::mdp::{ConfMdp, Configuration, Policy, ValueBundle};
use crate::metric::{kernel_lipschitz, kernel_lipschitz_by, seminorm_by, MetricSpace};

/// Contraction values this close to 1 are flagged: the bound denominators
/// blow up and the closed forms stop being informative.
pub const NEAR_SINGULAR_BAND: f64 = 1e-9;

/// Closed-form semi-norm bounds for the three value functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueBounds {
    pub q: f64,
    pub v: f64,
    pub u: f64,
}

/// Exact Lipschitz constants of an instance-pair, the exact semi-norms of
/// its value functions, and the theoretical bounds when applicable.
#[derive(Debug, Clone)]
pub struct LipschitzProfile {
    pub l_r: f64,
    pub l_pi: f64,
    pub l_p: f64,
    /// `gamma * l_p * (1 + l_pi)`; the bounds require this below 1.
    pub contraction: f64,
    pub exact_v: f64,
    pub exact_q: f64,
    pub exact_u: f64,
    /// Absent when the contraction condition fails.
    pub bounds: Option<ValueBounds>,
    /// Contraction within `NEAR_SINGULAR_BAND` of 1: bounds are computed
    /// but numerically fragile.
    pub near_singular: bool,
}

#[inline]
fn sa_dist(states: &MetricSpace, actions: &MetricSpace, i: usize, j: usize) -> f64 {
    let a_count = actions.len();
    let (si, ai) = (i / a_count, i % a_count);
    let (sj, aj) = (j / a_count, j % a_count);
    states.dist(si, sj) + actions.dist(ai, aj)
}

#[inline]
fn sas_dist(states: &MetricSpace, actions: &MetricSpace, i: usize, j: usize) -> f64 {
    let a_count = actions.len();
    let s_count = states.len();
    let (i_sa, ni) = (i / s_count, i % s_count);
    let (j_sa, nj) = (j / s_count, j % s_count);
    let (si, ai) = (i_sa / a_count, i_sa % a_count);
    let (sj, aj) = (j_sa / a_count, j_sa % a_count);
    states.dist(si, sj) + actions.dist(ai, aj) + states.dist(ni, nj)
}

/// Exact semi-norm of a function on state-action pairs under the sum
/// metric.
pub fn seminorm_state_action(
    states: &MetricSpace,
    actions: &MetricSpace,
    f: ArrayView2<'_, f64>,
) -> f64 {
    let a_count = actions.len();
    seminorm_by(
        states.len() * a_count,
        |i, j| sa_dist(states, actions, i, j),
        |i| f[[i / a_count, i % a_count]],
    )
}

/// Exact semi-norm of a function on state-action-next-state triples under
/// the sum metric.
pub fn seminorm_state_action_state(
    states: &MetricSpace,
    actions: &MetricSpace,
    f: ArrayView3<'_, f64>,
) -> f64 {
    let a_count = actions.len();
    let s_count = states.len();
    seminorm_by(
        s_count * a_count * s_count,
        |i, j| sas_dist(states, actions, i, j),
        |i| {
            let next = i % s_count;
            let sa = i / s_count;
            f[[sa / a_count, sa % a_count, next]]
        },
    )
}

/// Smallest constant for which the reward varies no faster than the sum
/// metric on triples, by exhaustive pair enumeration.
pub fn reward_lipschitz(c: &ConfMdp) -> f64 {
    seminorm_state_action_state(c.states(), c.actions(), c.reward())
}

/// Smallest Lipschitz constant of a policy seen as a kernel from states to
/// action distributions.
pub fn policy_lipschitz(states: &MetricSpace, actions: &MetricSpace, pi: &Policy) -> Result<f64> {
    kernel_lipschitz(states, actions, pi.probs())
}

/// Smallest Lipschitz constant of a configuration seen as a kernel from
/// state-action pairs (sum metric) to next-state distributions.
pub fn config_lipschitz(c: &ConfMdp, p: &Configuration) -> Result<f64> {
    let states = c.states();
    let actions = c.actions();
    kernel_lipschitz_by(
        states.len() * actions.len(),
        |i, j| sa_dist(states, actions, i, j),
        states,
        p.as_kernel(),
    )
}

/// The closed-form semi-norm bounds for Q, V, and U, or `None` when the
/// contraction condition fails.
pub fn theoretical_value_bounds(
    l_r: f64,
    l_pi: f64,
    l_p: f64,
    gamma: f64,
) -> Option<ValueBounds> {
    let contraction = gamma * l_p * (1.0 + l_pi);
    if contraction >= 1.0 {
        return None;
    }
    let denom = 1.0 - contraction;
    let q = l_r / denom;
    let v = q * (1.0 + l_pi);
    let u = l_r * (2.0 + l_pi - contraction) / denom;
    Some(ValueBounds { q, v, u })
}

/// Assembles the exact constants, the exact value-function semi-norms, and
/// the theoretical bounds for one pair.
pub fn profile(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    values: &ValueBundle,
) -> Result<LipschitzProfile> {
    let l_r = reward_lipschitz(c);
    let l_pi = policy_lipschitz(c.states(), c.actions(), pi)?;
    let l_p = config_lipschitz(c, p)?;
    let contraction = c.gamma() * l_p * (1.0 + l_pi);

    let exact_v = crate::metric::lipschitz_seminorm(c.states(), values.v.view());
    let exact_q = seminorm_state_action(c.states(), c.actions(), values.q.view());
    let exact_u = seminorm_state_action_state(c.states(), c.actions(), values.u.view());

    let bounds = theoretical_value_bounds(l_r, l_pi, l_p, c.gamma());
    let near_singular = bounds.is_some() && contraction >= 1.0 - NEAR_SINGULAR_BAND;

    Ok(LipschitzProfile {
        l_r,
        l_pi,
        l_p,
        contraction,
        exact_v,
        exact_q,
        exact_u,
        bounds,
        near_singular,
    })
}
