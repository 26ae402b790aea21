//! Conf-MDP instances and the quantities solved for a policy-configuration
//! pair: value functions, discounted stationary distributions, expected
//! returns. All solves are direct dense factorizations; the sizes this
//! toolkit targets never justify iterative methods.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3};

use crate::error::{Error, Result};
use crate::metric::{Distribution, MetricSpace, MASS_TOLERANCE};

/// A configurable MDP: metric state and action spaces, a reward tensor over
/// state-action-next-state triples, and a discount strictly below one.
///
/// The transition model is deliberately absent: it is the configuration,
/// a decision variable supplied alongside the policy.
#[derive(Debug, Clone)]
pub struct ConfMdp {
    states: MetricSpace,
    actions: MetricSpace,
    reward: Array3<f64>,
    gamma: f64,
}

impl ConfMdp {
    pub fn new(
        states: MetricSpace,
        actions: MetricSpace,
        reward: Array3<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidDiscount { gamma });
        }
        let expected = [states.len(), actions.len(), states.len()];
        if reward.dim() != (expected[0], expected[1], expected[2]) {
            let (a, b, c) = reward.dim();
            return Err(Error::ShapeMismatch {
                what: "reward",
                expected: expected.to_vec(),
                got: vec![a, b, c],
            });
        }
        for ((s, a, next), &value) in reward.indexed_iter() {
            if !value.is_finite() {
                return Err(Error::NonFiniteReward { s, a, next });
            }
        }
        Ok(ConfMdp {
            states,
            actions,
            reward,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &MetricSpace {
        &self.states
    }

    pub fn actions(&self) -> &MetricSpace {
        &self.actions
    }

    pub fn reward(&self) -> ArrayView3<'_, f64> {
        self.reward.view()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The same instance with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        ConfMdp::new(
            self.states.clone(),
            self.actions.clone(),
            self.reward.clone(),
            gamma,
        )
    }

    /// The same instance with every reward multiplied by `factor`.
    pub fn with_scaled_reward(&self, factor: f64) -> Result<Self> {
        ConfMdp::new(
            self.states.clone(),
            self.actions.clone(),
            &self.reward * factor,
            self.gamma,
        )
    }
}

fn check_rows_stochastic(what: &'static str, rows: ArrayView2<'_, f64>) -> Result<()> {
    for (r, row) in rows.outer_iter().enumerate() {
        let mut sum = 0.0;
        for (c, &value) in row.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteMass { index: r * rows.ncols() + c });
            }
            if value < 0.0 {
                return Err(Error::NegativeMass {
                    index: r * rows.ncols() + c,
                    value,
                });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            let _ = what;
            return Err(Error::UnnormalizedMass {
                sum,
                tolerance: MASS_TOLERANCE,
            });
        }
    }
    Ok(())
}

/// An agent policy: a row-stochastic matrix of action probabilities per
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: Array2<f64>,
}

impl Policy {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        check_rows_stochastic("policy", probs.view())?;
        Ok(Policy { probs })
    }

    /// The uniform policy over `n_actions` in each of `n_states` states.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64),
        }
    }

    /// Deterministic policy from a per-state action choice.
    pub fn deterministic(n_actions: usize, choices: &[usize]) -> Self {
        let mut probs = Array2::zeros((choices.len(), n_actions));
        for (s, &a) in choices.iter().enumerate() {
            probs[[s, a]] = 1.0;
        }
        Policy { probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[[s, a]]
    }

    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.probs.view()
    }

    /// Convex mixture `weight * other + (1 - weight) * self`.
    pub fn mix(&self, other: &Policy, weight: f64) -> Policy {
        Policy {
            probs: (1.0 - weight) * &self.probs + weight * &other.probs,
        }
    }
}

/// An environment configuration: next-state distributions per state-action
/// pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    probs: Array3<f64>,
}

impl Configuration {
    pub fn new(probs: Array3<f64>) -> Result<Self> {
        let (s, a, next) = probs.dim();
        let flat = probs
            .view()
            .into_shape_with_order((s * a, next))
            .expect("contiguous configuration tensor");
        check_rows_stochastic("configuration", flat)?;
        Ok(Configuration { probs })
    }

    pub fn n_states(&self) -> usize {
        self.probs.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.probs.dim().1
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[[s, a, next]]
    }

    pub fn probs(&self) -> ArrayView3<'_, f64> {
        self.probs.view()
    }

    /// The (s, a) slices flattened to a (S*A) x S kernel, row index s*A + a.
    pub fn as_kernel(&self) -> ArrayView2<'_, f64> {
        let (s, a, next) = self.probs.dim();
        self.probs
            .view()
            .into_shape_with_order((s * a, next))
            .expect("contiguous configuration tensor")
    }

    /// Convex mixture `weight * other + (1 - weight) * self`.
    pub fn mix(&self, other: &Configuration, weight: f64) -> Configuration {
        Configuration {
            probs: (1.0 - weight) * &self.probs + weight * &other.probs,
        }
    }
}

/// The three value functions of a policy-configuration pair, solved
/// jointly: V over states, Q over state-action pairs, U over
/// state-action-next-state triples.
#[derive(Debug, Clone)]
pub struct ValueBundle {
    pub v: Array1<f64>,
    pub q: Array2<f64>,
    pub u: Array3<f64>,
}

/// A gamma-discounted stationary distribution together with the discount
/// and initial distribution that induced it.
#[derive(Debug, Clone)]
pub struct DiscountedDistribution {
    pub mass: Distribution,
    pub gamma: f64,
    pub initial: Distribution,
}

fn check_pair_shapes(c: &ConfMdp, pi: &Policy, p: &Configuration) -> Result<()> {
    let (s, a) = (c.n_states(), c.n_actions());
    if pi.n_states() != s || pi.n_actions() != a {
        return Err(Error::ShapeMismatch {
            what: "policy",
            expected: vec![s, a],
            got: vec![pi.n_states(), pi.n_actions()],
        });
    }
    let dims = p.probs().dim();
    if dims != (s, a, s) {
        return Err(Error::ShapeMismatch {
            what: "configuration",
            expected: vec![s, a, s],
            got: vec![dims.0, dims.1, dims.2],
        });
    }
    Ok(())
}

/// The state-state transition kernel induced by a policy and a
/// configuration: entry (s, s') is the probability of moving to s' from s.
pub fn state_kernel(pi: &Policy, p: &Configuration) -> Result<Array2<f64>> {
    let (s_count, a_count) = (pi.n_states(), pi.n_actions());
    let dims = p.probs().dim();
    if dims.0 != s_count || dims.1 != a_count {
        return Err(Error::ShapeMismatch {
            what: "configuration",
            expected: vec![s_count, a_count, dims.2],
            got: vec![dims.0, dims.1, dims.2],
        });
    }
    let mut kernel = Array2::zeros((s_count, dims.2));
    for s in 0..s_count {
        for a in 0..a_count {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for next in 0..dims.2 {
                kernel[[s, next]] += w * p.prob(s, a, next);
            }
        }
    }
    Ok(kernel)
}

/// Solves the value functions of `(pi, p)` by one dense linear solve for V,
/// then derives U and Q from it.
pub fn solve_values(c: &ConfMdp, pi: &Policy, p: &Configuration) -> Result<ValueBundle> {
    check_pair_shapes(c, pi, p)?;
    let (s_count, a_count) = (c.n_states(), c.n_actions());
    let kernel = state_kernel(pi, p)?;

    // r_pi(s) = sum_a pi(a|s) sum_s' p(s'|s,a) r(s,a,s')
    let mut r_pi = DVector::zeros(s_count);
    for s in 0..s_count {
        let mut total = 0.0;
        for a in 0..a_count {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for next in 0..s_count {
                inner += p.prob(s, a, next) * c.reward[[s, a, next]];
            }
            total += w * inner;
        }
        r_pi[s] = total;
    }

    let system = DMatrix::from_fn(s_count, s_count, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - c.gamma * kernel[[i, j]]
    });
    let v_vec = system
        .lu()
        .solve(&r_pi)
        .ok_or(Error::SingularSystem { context: "value solve" })?;
    if v_vec.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem { context: "value solve" });
    }
    let v = Array1::from_iter(v_vec.iter().cloned());

    let mut u = Array3::zeros((s_count, a_count, s_count));
    for s in 0..s_count {
        for a in 0..a_count {
            for next in 0..s_count {
                u[[s, a, next]] = c.reward[[s, a, next]] + c.gamma * v[next];
            }
        }
    }
    let mut q = Array2::zeros((s_count, a_count));
    for s in 0..s_count {
        for a in 0..a_count {
            let mut total = 0.0;
            for next in 0..s_count {
                total += p.prob(s, a, next) * u[[s, a, next]];
            }
            q[[s, a]] = total;
        }
    }
    Ok(ValueBundle { v, q, u })
}

/// The gamma-discounted stationary state distribution of `(pi, p)` from the
/// initial distribution `mu`, by solving the fixed-point system
/// `d = (1 - gamma) mu + gamma d P` directly.
pub fn discounted_distribution(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    mu: &Distribution,
) -> Result<DiscountedDistribution> {
    check_pair_shapes(c, pi, p)?;
    let s_count = c.n_states();
    if mu.len() != s_count {
        return Err(Error::DimensionMismatch {
            expected: s_count,
            got: mu.len(),
        });
    }
    let kernel = state_kernel(pi, p)?;
    // (Id - gamma P^T) d = (1 - gamma) mu
    let system = DMatrix::from_fn(s_count, s_count, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - c.gamma * kernel[[j, i]]
    });
    let rhs = DVector::from_fn(s_count, |i, _| (1.0 - c.gamma) * mu.mass(i));
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem { context: "discounted distribution solve" })?;
    if solution.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem { context: "discounted distribution solve" });
    }
    let mass = Distribution::from_weights(Array1::from_iter(solution.iter().cloned()))?;
    Ok(DiscountedDistribution {
        mass,
        gamma: c.gamma,
        initial: mu.clone(),
    })
}

/// Expected return of `(pi, p)` from `mu`.
///
/// Computed both as the mu-average of V and as the discounted-distribution
/// average of the one-step reward divided by (1 - gamma); the two routes
/// must agree, otherwise a solver bug is surfaced as an error.
pub fn expected_return(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    mu: &Distribution,
) -> Result<f64> {
    let values = solve_values(c, pi, p)?;
    let d = discounted_distribution(c, pi, p, mu)?;
    expected_return_with(c, pi, p, mu, &values, &d)
}

/// As [`expected_return`], reusing an already-solved value bundle and
/// discounted distribution.
pub fn expected_return_with(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    mu: &Distribution,
    values: &ValueBundle,
    d: &DiscountedDistribution,
) -> Result<f64> {
    let s_count = c.n_states();
    if mu.len() != s_count {
        return Err(Error::DimensionMismatch {
            expected: s_count,
            got: mu.len(),
        });
    }
    let via_values: f64 = (0..s_count).map(|s| mu.mass(s) * values.v[s]).sum();

    let mut one_step = 0.0;
    for s in 0..s_count {
        let ds = d.mass.mass(s);
        if ds == 0.0 {
            continue;
        }
        for a in 0..c.n_actions() {
            let w = ds * pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for next in 0..s_count {
                one_step += w * p.prob(s, a, next) * c.reward[[s, a, next]];
            }
        }
    }
    let via_distribution = one_step / (1.0 - c.gamma);
    let scale = 1.0 + via_values.abs().max(via_distribution.abs());
    if (via_values - via_distribution).abs() > 1e-9 * scale {
        return Err(Error::ConsistencyFailure {
            via_values,
            via_distribution,
        });
    }
    Ok(via_values)
}

/// Maximum residual of the three Bellman consistency identities for a
/// solved bundle. Diagnostic used by the verification suites.
pub fn bellman_residual(c: &ConfMdp, pi: &Policy, p: &Configuration, values: &ValueBundle) -> f64 {
    let (s_count, a_count) = (c.n_states(), c.n_actions());
    let mut worst = 0.0f64;
    for s in 0..s_count {
        let mut v_from_q = 0.0;
        for a in 0..a_count {
            v_from_q += pi.prob(s, a) * values.q[[s, a]];
            let mut q_from_u = 0.0;
            for next in 0..s_count {
                q_from_u += p.prob(s, a, next) * values.u[[s, a, next]];
                let u_expected = c.reward[[s, a, next]] + c.gamma * values.v[next];
                worst = worst.max((values.u[[s, a, next]] - u_expected).abs());
            }
            worst = worst.max((values.q[[s, a]] - q_from_u).abs());
        }
        worst = worst.max((values.v[s] - v_from_q).abs());
    }
    worst
}

/// Residual of the fixed-point identity defining a discounted distribution.
pub fn discounted_fixed_point_residual(
    d: &DiscountedDistribution,
    kernel: &Array2<f64>,
) -> f64 {
    let n = d.mass.len();
    let mut worst = 0.0f64;
    for next in 0..n {
        let mut propagated = 0.0;
        for s in 0..n {
            propagated += d.mass.mass(s) * kernel[[s, next]];
        }
        let expected = (1.0 - d.gamma) * d.initial.mass(next) + d.gamma * propagated;
        worst = worst.max((d.mass.mass(next) - expected).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state_mdp(reward: Array3<f64>, gamma: f64) -> ConfMdp {
        ConfMdp::new(
            MetricSpace::discrete(2),
            MetricSpace::discrete(2),
            reward,
            gamma,
        )
        .unwrap()
    }

    fn stay_put() -> Configuration {
        // both actions keep the current state
        Configuration::new(Array3::from_shape_fn((2, 2, 2), |(s, _a, next)| {
            if s == next {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap()
    }

    #[test]
    fn gamma_one_is_rejected() {
        let r = Array3::zeros((2, 2, 2));
        assert!(matches!(
            ConfMdp::new(
                MetricSpace::discrete(2),
                MetricSpace::discrete(2),
                r,
                1.0
            ),
            Err(Error::InvalidDiscount { .. })
        ));
    }

    #[test]
    fn single_action_kernel_equals_transition_slice() {
        let pi = Policy::new(array![[1.0], [1.0]]).unwrap();
        let p = Configuration::new(Array3::from_shape_fn((2, 1, 2), |(s, _, next)| {
            if s == next {
                0.25
            } else {
                0.75
            }
        }))
        .unwrap();
        let kernel = state_kernel(&pi, &p).unwrap();
        assert_eq!(kernel, array![[0.25, 0.75], [0.75, 0.25]]);
    }

    #[test]
    fn uniform_policy_averages_action_slices() {
        // slices per action: ((1,0),(1,0)) and ((0,1),(0,1)) -> every row (.5,.5)
        let pi = Policy::uniform(2, 2);
        let p = Configuration::new(Array3::from_shape_fn((2, 2, 2), |(_, a, next)| {
            if a == next {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap();
        let kernel = state_kernel(&pi, &p).unwrap();
        for s in 0..2 {
            for next in 0..2 {
                assert!((kernel[[s, next]] - 0.5).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn deterministic_pair_gives_permutation_kernel() {
        let pi = Policy::deterministic(2, &[1, 1]);
        let p = Configuration::new(Array3::from_shape_fn((2, 2, 2), |(s, a, next)| {
            // action 0 stays, action 1 swaps
            let dest = if a == 0 { s } else { 1 - s };
            if next == dest {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap();
        let kernel = state_kernel(&pi, &p).unwrap();
        assert_eq!(kernel, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn zero_reward_gives_zero_values() {
        let c = two_state_mdp(Array3::zeros((2, 2, 2)), 0.9);
        let values = solve_values(&c, &Policy::uniform(2, 2), &stay_put()).unwrap();
        assert!(values.v.iter().all(|&x| x.abs() <= 1e-12));
        assert!(values.q.iter().all(|&x| x.abs() <= 1e-12));
        assert!(values.u.iter().all(|&x| x.abs() <= 1e-12));
    }

    #[test]
    fn constant_reward_closed_form() {
        let gamma = 0.7;
        let c = two_state_mdp(Array3::from_elem((2, 2, 2), 1.0), gamma);
        let values = solve_values(&c, &Policy::uniform(2, 2), &stay_put()).unwrap();
        let expected_v = 1.0 / (1.0 - gamma);
        let expected_u = 1.0 + gamma / (1.0 - gamma);
        assert!(values.v.iter().all(|&x| (x - expected_v).abs() <= 1e-9));
        assert!(values.u.iter().all(|&x| (x - expected_u).abs() <= 1e-9));
    }

    #[test]
    fn chain_with_absorbing_reward_state() {
        // reward 1 whenever the next state is state 1, stay-put dynamics:
        // V(1) = 1/(1-gamma) = 10, V(0) = 0.
        let reward = Array3::from_shape_fn((2, 2, 2), |(_, _, next)| {
            if next == 1 {
                1.0
            } else {
                0.0
            }
        });
        let c = two_state_mdp(reward, 0.9);
        let values = solve_values(&c, &Policy::uniform(2, 2), &stay_put()).unwrap();
        assert!((values.v[1] - 10.0).abs() <= 1e-9);
        assert!(values.v[0].abs() <= 1e-9);
        assert!(bellman_residual(&c, &Policy::uniform(2, 2), &stay_put(), &values) <= 1e-9);
    }

    #[test]
    fn identity_kernel_fixes_initial_distribution() {
        let c = two_state_mdp(Array3::zeros((2, 2, 2)), 0.83);
        let mu = Distribution::new(array![0.3, 0.7]).unwrap();
        let d = discounted_distribution(&c, &Policy::uniform(2, 2), &stay_put(), &mu).unwrap();
        assert!((d.mass.mass(0) - 0.3).abs() <= 1e-10);
        assert!((d.mass.mass(1) - 0.7).abs() <= 1e-10);
    }

    #[test]
    fn swap_kernel_symmetric_distribution() {
        let c = two_state_mdp(Array3::zeros((2, 2, 2)), 0.5);
        let p = Configuration::new(Array3::from_shape_fn((2, 2, 2), |(s, _, next)| {
            if next == 1 - s {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap();
        let mu = Distribution::uniform(2);
        let d = discounted_distribution(&c, &Policy::uniform(2, 2), &p, &mu).unwrap();
        assert!((d.mass.mass(0) - 0.5).abs() <= 1e-10);
        assert!((d.mass.mass(1) - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn single_state_distribution_is_trivial() {
        let c = ConfMdp::new(
            MetricSpace::new(array![[0.0]]).unwrap(),
            MetricSpace::discrete(2),
            Array3::zeros((1, 2, 1)),
            0.9,
        )
        .unwrap();
        let p = Configuration::new(Array3::from_elem((1, 2, 1), 1.0)).unwrap();
        let d =
            discounted_distribution(&c, &Policy::uniform(1, 2), &p, &Distribution::uniform(1))
                .unwrap();
        assert_eq!(d.mass.mass(0), 1.0);
    }

    #[test]
    fn expected_return_closed_forms() {
        let mu = Distribution::uniform(2);
        let zero = two_state_mdp(Array3::zeros((2, 2, 2)), 0.9);
        let j = expected_return(&zero, &Policy::uniform(2, 2), &stay_put(), &mu).unwrap();
        assert!(j.abs() <= 1e-12);

        let constant = two_state_mdp(Array3::from_elem((2, 2, 2), 2.5), 0.6);
        let j = expected_return(&constant, &Policy::uniform(2, 2), &stay_put(), &mu).unwrap();
        assert!((j - 2.5 / 0.4).abs() <= 1e-9);
    }

    #[test]
    fn expected_return_matches_truncated_rollout() {
        let reward = Array3::from_shape_fn((2, 2, 2), |(_, _, next)| {
            if next == 1 {
                1.0
            } else {
                0.0
            }
        });
        let gamma = 0.9;
        let c = two_state_mdp(reward.clone(), gamma);
        let pi = Policy::uniform(2, 2);
        let p = stay_put();
        let mu = Distribution::new(array![1.0, 0.0]).unwrap();
        let j = expected_return(&c, &pi, &p, &mu).unwrap();

        // truncated rollout oracle: horizon chosen so the tail is below 1e-10
        let kernel = state_kernel(&pi, &p).unwrap();
        let mut r_pi = [0.0f64; 2];
        for s in 0..2 {
            for a in 0..2 {
                for next in 0..2 {
                    r_pi[s] += pi.prob(s, a) * p.prob(s, a, next) * reward[[s, a, next]];
                }
            }
        }
        let horizon = 400;
        let mut state_probs = [mu.mass(0), mu.mass(1)];
        let mut oracle = 0.0;
        let mut discount = 1.0;
        for _ in 0..=horizon {
            oracle += discount * (state_probs[0] * r_pi[0] + state_probs[1] * r_pi[1]);
            let next = [
                state_probs[0] * kernel[[0, 0]] + state_probs[1] * kernel[[1, 0]],
                state_probs[0] * kernel[[0, 1]] + state_probs[1] * kernel[[1, 1]],
            ];
            state_probs = next;
            discount *= gamma;
        }
        assert!((j - oracle).abs() <= 1e-9);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let c = two_state_mdp(Array3::zeros((2, 2, 2)), 0.9);
        let pi = Policy::uniform(3, 2);
        assert!(matches!(
            solve_values(&c, &pi, &stay_put()),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
