//! Safe policy-configuration improvement: greedy target selection plus a
//! lattice search over convex mixture steps, accepting a step only when
//! the decoupled improvement lower bound certifies strictly positive gain.
//!
//! The bound is not concave in the mixing coefficients (the candidate
//! Lipschitz constants enter nonlinearly through the penalty constants),
//! so the maximizer is found by exhaustive lattice search rather than by
//! any structural argument. Mixture Lipschitz constants are measured
//! exactly per candidate by default; the convex upper bound
//! `alpha L_target + (1 - alpha) L_current` is available as a cheaper,
//! more conservative alternative.

use ndarray::Array3;
use serde::Serialize;

use crate::advantage::advantage_bundle;
use crate::error::{Error, Result};
use crate::lipschitz::{config_lipschitz, policy_lipschitz, seminorm_state_action_state};
use crate::mdp::{
    discounted_distribution, expected_return_with, solve_values, ConfMdp, Configuration, Policy,
    ValueBundle,
};
use crate::metric::{transport_slices, Distribution};

/// One evaluated mixture step. `alpha` mixes the policy toward its greedy
/// target, `beta` the configuration toward its greedy target.
#[derive(Debug, Clone, Serialize)]
pub struct ImprovementStep {
    pub alpha: f64,
    pub beta: f64,
    pub predicted_bound: f64,
    pub realized_improvement: f64,
    pub j_before: f64,
    pub j_after: f64,
}

/// Why an improvement run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// An accepted step no longer moved the expected return numerically.
    Converged,
    MaxIters,
    /// No lattice candidate certified an improvement above the acceptance
    /// threshold.
    NoPositiveBound,
}

/// The accepted steps of a run, the reason it stopped, and a certificate
/// for the remaining optimality gap at the final pair.
#[derive(Debug, Clone, Serialize)]
pub struct ImprovementTrace {
    pub steps: Vec<ImprovementStep>,
    pub terminated_reason: TerminationReason,
    pub initial_j: f64,
    pub final_j: f64,
    /// Upper bound on `J(any pair) - final_j`: the maximum coupled
    /// advantage at the final pair divided by `1 - gamma`. Follows from
    /// the performance-difference identity, with no contraction condition.
    pub optimality_gap: f64,
    #[serde(skip)]
    pub final_policy: Policy,
    #[serde(skip)]
    pub final_configuration: Configuration,
}

/// Tuning knobs for [`spci_run`] and [`safe_step_with`].
#[derive(Debug, Clone)]
pub struct SpciOptions {
    pub max_iters: usize,
    /// Lattice resolution: mixing coefficients take `grid + 1` values.
    pub grid: usize,
    /// A step is accepted only when its certified bound exceeds this.
    /// Strictly positive by default so floating-point zeros never trigger
    /// a step.
    pub min_bound: f64,
    /// Measure mixture Lipschitz constants exactly per candidate (default)
    /// or fall back to the convex upper bound.
    pub exact_mixture_constants: bool,
}

impl Default for SpciOptions {
    fn default() -> Self {
        SpciOptions {
            max_iters: 50,
            grid: 100,
            min_bound: 1e-12,
            exact_mixture_constants: true,
        }
    }
}

/// Pointwise greedy targets: the policy puts all mass on the Q-maximizing
/// action per state, the configuration on the U-maximizing next state per
/// state-action pair. Ties break toward the lowest index.
pub fn greedy_targets(c: &ConfMdp, values: &ValueBundle) -> (Policy, Configuration) {
    let (s_count, a_count) = (c.n_states(), c.n_actions());
    let mut choices = Vec::with_capacity(s_count);
    for s in 0..s_count {
        let mut best = 0;
        for a in 1..a_count {
            if values.q[[s, a]] > values.q[[s, best]] {
                best = a;
            }
        }
        choices.push(best);
    }
    let pi_target = Policy::deterministic(a_count, &choices);

    let mut probs = Array3::zeros((s_count, a_count, s_count));
    for s in 0..s_count {
        for a in 0..a_count {
            let mut best = 0;
            for next in 1..s_count {
                if values.u[[s, a, next]] > values.u[[s, a, best]] {
                    best = next;
                }
            }
            probs[[s, a, best]] = 1.0;
        }
    }
    let p_target = Configuration::new(probs).expect("dirac rows are stochastic");
    (pi_target, p_target)
}

/// Evaluates the decoupled lower bound on a `(grid + 1) x (grid + 1)`
/// lattice of mixtures toward the targets and returns the maximizing step
/// with its realized improvement. Candidates violating the contraction
/// condition are skipped.
pub fn safe_step(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    pi_target: &Policy,
    p_target: &Configuration,
    mu: &Distribution,
    grid: usize,
) -> Result<ImprovementStep> {
    let options = SpciOptions {
        grid,
        ..SpciOptions::default()
    };
    safe_step_with(c, pi, p, pi_target, p_target, mu, &options)
}

pub fn safe_step_with(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    pi_target: &Policy,
    p_target: &Configuration,
    mu: &Distribution,
    options: &SpciOptions,
) -> Result<ImprovementStep> {
    assert!(options.grid >= 2, "lattice needs at least the corners");
    let gamma = c.gamma();
    let (s_count, a_count) = (c.n_states(), c.n_actions());

    let values = solve_values(c, pi, p)?;
    let bundle = advantage_bundle(&values, pi, p)?;
    let d = discounted_distribution(c, pi, p, mu)?;
    let j_before = expected_return_with(c, pi, p, mu, &values, &d)?;

    // Exact U-semi-norm of the current pair feeds the penalty constants.
    let u_norm = seminorm_state_action_state(c.states(), c.actions(), values.u.view());

    // Full-step advantage and penalty terms; both scale linearly in the
    // mixing coefficient, because mixing toward a target scales the
    // difference measure (and so every Wasserstein shift) by exactly the
    // coefficient, and the own-pair advantage is zero.
    let mut adv_policy_full = 0.0;
    let mut adv_config_full = 0.0;
    let mut policy_shift_full = 0.0;
    let mut config_shift_full = 0.0;
    for s in 0..s_count {
        let weight = d.mass.mass(s);
        for a in 0..a_count {
            adv_policy_full += weight * pi_target.prob(s, a) * bundle.policy_adv[[s, a]];
            let mut rel = 0.0;
            for next in 0..s_count {
                rel += p_target.prob(s, a, next) * bundle.config_adv[[s, a, next]];
            }
            adv_config_full += weight * pi.prob(s, a) * rel;
        }
        let pi_row: Vec<f64> = (0..a_count).map(|a| pi.prob(s, a)).collect();
        let target_row: Vec<f64> = (0..a_count).map(|a| pi_target.prob(s, a)).collect();
        policy_shift_full += weight * transport_slices(c.actions(), &target_row, &pi_row)?;
        for a in 0..a_count {
            let p_row: Vec<f64> = (0..s_count).map(|n| p.prob(s, a, n)).collect();
            let t_row: Vec<f64> = (0..s_count).map(|n| p_target.prob(s, a, n)).collect();
            config_shift_full +=
                weight * pi.prob(s, a) * transport_slices(c.states(), &t_row, &p_row)?;
        }
    }

    // Per-coefficient candidate Lipschitz constants.
    let steps = options.grid + 1;
    let coeff = |i: usize| i as f64 / options.grid as f64;
    let mut l_pi_mix = Vec::with_capacity(steps);
    let mut l_p_mix = Vec::with_capacity(steps);
    if options.exact_mixture_constants {
        for i in 0..steps {
            let candidate = pi.mix(pi_target, coeff(i));
            l_pi_mix.push(policy_lipschitz(c.states(), c.actions(), &candidate)?);
        }
        for i in 0..steps {
            let candidate = p.mix(p_target, coeff(i));
            l_p_mix.push(config_lipschitz(c, &candidate)?);
        }
    } else {
        let l_pi = policy_lipschitz(c.states(), c.actions(), pi)?;
        let l_pi_t = policy_lipschitz(c.states(), c.actions(), pi_target)?;
        let l_p = config_lipschitz(c, p)?;
        let l_p_t = config_lipschitz(c, p_target)?;
        for i in 0..steps {
            let t = coeff(i);
            l_pi_mix.push((1.0 - t) * l_pi + t * l_pi_t);
            l_p_mix.push((1.0 - t) * l_p + t * l_p_t);
        }
    }

    let mut best: Option<(usize, usize, f64)> = None;
    for (ai, &l_pi_a) in l_pi_mix.iter().enumerate() {
        let alpha = coeff(ai);
        for (bi, &l_p_b) in l_p_mix.iter().enumerate() {
            let beta = coeff(bi);
            let contraction = gamma * l_p_b * (1.0 + l_pi_a);
            if contraction >= 1.0 {
                continue;
            }
            let factor = (l_pi_a + 1.0) * (l_p_b + 1.0)
                / ((1.0 - gamma) * (1.0 - contraction));
            let c1 = u_norm * 2.0 * gamma * factor;
            let c2 = u_norm * 2.0 * (1.0 + gamma * l_p_b) * factor;
            let advantage =
                (alpha * adv_policy_full + beta * adv_config_full) / (1.0 - gamma);
            let bound = advantage
                - c1 * beta * config_shift_full
                - c2 * alpha * policy_shift_full;
            if best.is_none_or(|(_, _, b)| bound > b) {
                best = Some((ai, bi, bound));
            }
        }
    }
    let (ai, bi, predicted_bound) = best.ok_or(Error::NoApplicableCandidate)?;
    let (alpha, beta) = (coeff(ai), coeff(bi));

    let pi_step = pi.mix(pi_target, alpha);
    let p_step = p.mix(p_target, beta);
    let values_after = solve_values(c, &pi_step, &p_step)?;
    let d_after = discounted_distribution(c, &pi_step, &p_step, mu)?;
    let j_after = expected_return_with(c, &pi_step, &p_step, mu, &values_after, &d_after)?;

    Ok(ImprovementStep {
        alpha,
        beta,
        predicted_bound,
        realized_improvement: j_after - j_before,
        j_before,
        j_after,
    })
}

/// Runs greedy-target selection plus bound-certified mixture steps until
/// no candidate certifies an improvement above `min_bound`, the return
/// stops moving, or the iteration budget runs out.
pub fn spci_run(
    c: &ConfMdp,
    pi0: &Policy,
    p0: &Configuration,
    mu: &Distribution,
    options: &SpciOptions,
) -> Result<ImprovementTrace> {
    assert!(options.max_iters >= 1, "need at least one iteration");
    assert!(options.min_bound >= 0.0, "acceptance threshold must be nonnegative");

    let mut pi = pi0.clone();
    let mut p = p0.clone();
    let mut steps = Vec::new();
    let mut reason = TerminationReason::MaxIters;
    let mut current_j: Option<f64> = None;

    for _ in 0..options.max_iters {
        let values = solve_values(c, &pi, &p)?;
        let (pi_target, p_target) = greedy_targets(c, &values);
        if pi_target == pi && p_target == p {
            reason = TerminationReason::NoPositiveBound;
            break;
        }
        let mut step = safe_step_with(c, &pi, &p, &pi_target, &p_target, mu, options)?;
        if step.predicted_bound <= options.min_bound {
            reason = TerminationReason::NoPositiveBound;
            break;
        }
        // Chain the return values exactly across steps.
        if let Some(j) = current_j {
            let delta = step.j_before - j;
            debug_assert!(delta.abs() <= 1e-9);
            step.j_before = j;
            step.realized_improvement = step.j_after - j;
        }
        current_j = Some(step.j_after);
        pi = pi.mix(&pi_target, step.alpha);
        p = p.mix(&p_target, step.beta);
        let stalled = step.realized_improvement <= 1e-12;
        steps.push(step);
        if stalled {
            reason = TerminationReason::Converged;
            break;
        }
    }

    let values = solve_values(c, &pi, &p)?;
    let d = discounted_distribution(c, &pi, &p, mu)?;
    let final_j = expected_return_with(c, &pi, &p, mu, &values, &d)?;
    let initial_j = steps.first().map_or(final_j, |s| s.j_before);

    let bundle = advantage_bundle(&values, &pi, &p)?;
    let max_coupled = bundle
        .coupled_adv
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let optimality_gap = (max_coupled / (1.0 - c.gamma())).max(0.0);

    Ok(ImprovementTrace {
        steps,
        terminated_reason: reason,
        initial_j,
        final_j,
        optimality_gap,
        final_policy: pi,
        final_configuration: p,
    })
}
