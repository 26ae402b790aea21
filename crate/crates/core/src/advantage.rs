//! Advantage functions for policy-configuration pairs: the pointwise
//! policy, configuration, and coupled advantages, the relative advantages
//! of a candidate pair against the current one, and their expectations
//! under the discounted distribution of the current pair.

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::mdp::{Configuration, DiscountedDistribution, Policy, ValueBundle};

/// Pointwise advantages of a pair with respect to its own value functions.
///
/// `policy_adv(s, a) = Q(s, a) - V(s)`,
/// `config_adv(s, a, s') = U(s, a, s') - Q(s, a)`, and
/// `coupled_adv(s, a, s') = U(s, a, s') - V(s)`, which is exactly the sum
/// of the other two.
#[derive(Debug, Clone)]
pub struct AdvantageBundle {
    pub policy_adv: Array2<f64>,
    pub config_adv: Array3<f64>,
    pub coupled_adv: Array3<f64>,
}

/// Relative advantages of a candidate pair `(pi', p')` against the current
/// pair `(pi, p)`, plus their expectations under the current pair's
/// discounted distribution.
///
/// `policy_rel(s)` integrates the policy advantage under `pi'`;
/// `config_rel(s, a)` integrates the configuration advantage under `p'`;
/// `coupled_rel(s)` integrates the coupled advantage under both.
#[derive(Debug, Clone)]
pub struct RelativeAdvantages {
    pub policy_rel: Array1<f64>,
    pub config_rel: Array2<f64>,
    pub coupled_rel: Array1<f64>,
    pub expected_policy: f64,
    pub expected_config: f64,
    pub expected_coupled: f64,
}

/// Derives the three pointwise advantage arrays from a solved bundle.
pub fn advantage_bundle(
    values: &ValueBundle,
    pi: &Policy,
    p: &Configuration,
) -> Result<AdvantageBundle> {
    let (s_count, a_count, next_count) = values.u.dim();
    if pi.n_states() != s_count || pi.n_actions() != a_count {
        return Err(Error::ShapeMismatch {
            what: "policy",
            expected: vec![s_count, a_count],
            got: vec![pi.n_states(), pi.n_actions()],
        });
    }
    let dims = p.probs().dim();
    if dims != (s_count, a_count, next_count) {
        return Err(Error::ShapeMismatch {
            what: "configuration",
            expected: vec![s_count, a_count, next_count],
            got: vec![dims.0, dims.1, dims.2],
        });
    }
    let mut policy_adv = Array2::zeros((s_count, a_count));
    let mut config_adv = Array3::zeros((s_count, a_count, next_count));
    let mut coupled_adv = Array3::zeros((s_count, a_count, next_count));
    for s in 0..s_count {
        for a in 0..a_count {
            policy_adv[[s, a]] = values.q[[s, a]] - values.v[s];
            for next in 0..next_count {
                config_adv[[s, a, next]] = values.u[[s, a, next]] - values.q[[s, a]];
                coupled_adv[[s, a, next]] = values.u[[s, a, next]] - values.v[s];
            }
        }
    }
    Ok(AdvantageBundle {
        policy_adv,
        config_adv,
        coupled_adv,
    })
}

/// Relative advantages of `(pi_new, p_new)` against the pair whose
/// advantages are in `bundle`. The expectations weigh states by `d`, the
/// discounted distribution of the current pair, and actions (for the
/// configuration term) by the current policy `pi`.
pub fn relative_advantages(
    bundle: &AdvantageBundle,
    pi: &Policy,
    pi_new: &Policy,
    p_new: &Configuration,
    d: &DiscountedDistribution,
) -> Result<RelativeAdvantages> {
    let (s_count, a_count, next_count) = bundle.config_adv.dim();
    for (what, rows, cols) in [
        ("policy", pi.n_states(), pi.n_actions()),
        ("candidate policy", pi_new.n_states(), pi_new.n_actions()),
    ] {
        if rows != s_count || cols != a_count {
            return Err(Error::ShapeMismatch {
                what,
                expected: vec![s_count, a_count],
                got: vec![rows, cols],
            });
        }
    }
    let dims = p_new.probs().dim();
    if dims != (s_count, a_count, next_count) {
        return Err(Error::ShapeMismatch {
            what: "candidate configuration",
            expected: vec![s_count, a_count, next_count],
            got: vec![dims.0, dims.1, dims.2],
        });
    }
    if d.mass.len() != s_count {
        return Err(Error::DimensionMismatch {
            expected: s_count,
            got: d.mass.len(),
        });
    }

    let mut policy_rel = Array1::zeros(s_count);
    let mut config_rel = Array2::zeros((s_count, a_count));
    let mut coupled_rel = Array1::zeros(s_count);
    for s in 0..s_count {
        let mut policy_total = 0.0;
        let mut coupled_total = 0.0;
        for a in 0..a_count {
            policy_total += pi_new.prob(s, a) * bundle.policy_adv[[s, a]];
            let mut config_total = 0.0;
            let mut coupled_inner = 0.0;
            for next in 0..next_count {
                config_total += p_new.prob(s, a, next) * bundle.config_adv[[s, a, next]];
                coupled_inner += p_new.prob(s, a, next) * bundle.coupled_adv[[s, a, next]];
            }
            config_rel[[s, a]] = config_total;
            coupled_total += pi_new.prob(s, a) * coupled_inner;
        }
        policy_rel[s] = policy_total;
        coupled_rel[s] = coupled_total;
    }

    let mut expected_policy = 0.0;
    let mut expected_config = 0.0;
    let mut expected_coupled = 0.0;
    for s in 0..s_count {
        let w = d.mass.mass(s);
        expected_policy += w * policy_rel[s];
        expected_coupled += w * coupled_rel[s];
        for a in 0..a_count {
            expected_config += w * pi.prob(s, a) * config_rel[[s, a]];
        }
    }

    Ok(RelativeAdvantages {
        policy_rel,
        config_rel,
        coupled_rel,
        expected_policy,
        expected_config,
        expected_coupled,
    })
}

/// Maximum residual of the exact decomposition of the coupled relative
/// advantage into its policy and configuration parts:
/// `coupled_rel(s) = policy_rel(s) + sum_a pi'(a|s) config_rel(s, a)`.
pub fn check_decomposition(rel: &RelativeAdvantages, pi_new: &Policy) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..rel.coupled_rel.len() {
        let mut config_part = 0.0;
        for a in 0..pi_new.n_actions() {
            config_part += pi_new.prob(s, a) * rel.config_rel[[s, a]];
        }
        let residual = (rel.coupled_rel[s] - rel.policy_rel[s] - config_part).abs();
        worst = worst.max(residual);
    }
    worst
}
