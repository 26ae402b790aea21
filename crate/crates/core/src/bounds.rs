//! Evaluators for the quantities this toolkit certifies: the coupled and
//! decoupled bounds on the Wasserstein distance between discounted
//! distributions, the performance difference identity, the coupled and
//! decoupled performance-improvement lower bounds, the policy-shift
//! average-vs-supremum comparison, and the three supporting inequality
//! checks used inside the improvement-bound derivations.
//!
//! Every bound is reported next to the exact quantity it bounds, with the
//! slack and an applicability flag for the contraction precondition. A
//! negative slack beyond tolerance on an applicable bound is a toolkit
//! bug, never an interesting finding.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use serde::Serialize;

use crate::advantage::{advantage_bundle, relative_advantages, AdvantageBundle, RelativeAdvantages};
use crate::error::{Error, Result};
use crate::lipschitz::{
    config_lipschitz, policy_lipschitz, profile, seminorm_state_action, LipschitzProfile,
};
use crate::mdp::{
    discounted_distribution, expected_return_with, solve_values, state_kernel, ConfMdp,
    Configuration, DiscountedDistribution, Policy, ValueBundle,
};
use crate::metric::{lipschitz_seminorm, wasserstein, Distribution};

/// Which `U`-semi-norm feeds the improvement bounds: the exact one
/// (computable on finite spaces) or the closed-form bound that only uses
/// the observable constants `L_r`, `L_pi`, `L_p`, and `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeminormMode {
    Exact,
    Theoretical,
}

impl SeminormMode {
    pub fn label(self) -> &'static str {
        match self {
            SeminormMode::Exact => "exact",
            SeminormMode::Theoretical => "theoretical",
        }
    }
}

/// One evaluated bound: its value (absent when the contraction
/// precondition fails), the exact quantity it bounds, and the slack in the
/// direction that makes nonnegative mean "the bound holds".
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub bound_value: Option<f64>,
    pub exact_value: f64,
    pub slack: Option<f64>,
    pub applicable: bool,
    pub components: BTreeMap<String, f64>,
}

impl BoundReport {
    fn upper(name: &str, bound: Option<f64>, exact: f64, components: BTreeMap<String, f64>) -> Self {
        BoundReport {
            name: name.to_owned(),
            applicable: bound.is_some(),
            bound_value: bound,
            exact_value: exact,
            slack: bound.map(|b| b - exact),
            components,
        }
    }

    fn lower(name: &str, bound: Option<f64>, exact: f64, components: BTreeMap<String, f64>) -> Self {
        BoundReport {
            name: name.to_owned(),
            applicable: bound.is_some(),
            bound_value: bound,
            exact_value: exact,
            slack: bound.map(|b| exact - b),
            components,
        }
    }
}

/// Everything needed to evaluate the bounds for one transition from a
/// current pair `(pi, p)` to a candidate pair `(pi', p')`: values,
/// discounted distributions, advantages, and exact Lipschitz constants,
/// computed once at construction.
pub struct Comparison<'a> {
    c: &'a ConfMdp,
    pi: &'a Policy,
    pi_new: &'a Policy,
    mu: &'a Distribution,
    values: ValueBundle,
    d: DiscountedDistribution,
    d_new: DiscountedDistribution,
    j: f64,
    j_new: f64,
    rel: RelativeAdvantages,
    current: LipschitzProfile,
    l_pi_new: f64,
    l_p_new: f64,
    kernel_new: Array2<f64>,
    /// integral of W(new kernel row, current kernel row) under d
    kernel_shift: f64,
    /// integral of W(pi'(.|s), pi(.|s)) under d
    policy_shift: f64,
    /// integral of W(p'(.|s,a), p(.|s,a)) under d and pi
    config_shift: f64,
    /// max over states of W(pi'(.|s), pi(.|s))
    policy_shift_sup: f64,
}

impl<'a> Comparison<'a> {
    pub fn new(
        c: &'a ConfMdp,
        pi: &'a Policy,
        p: &'a Configuration,
        pi_new: &'a Policy,
        p_new: &'a Configuration,
        mu: &'a Distribution,
    ) -> Result<Self> {
        let values = solve_values(c, pi, p)?;
        let values_new = solve_values(c, pi_new, p_new)?;
        let d = discounted_distribution(c, pi, p, mu)?;
        let d_new = discounted_distribution(c, pi_new, p_new, mu)?;
        let j = expected_return_with(c, pi, p, mu, &values, &d)?;
        let j_new = expected_return_with(c, pi_new, p_new, mu, &values_new, &d_new)?;

        let bundle: AdvantageBundle = advantage_bundle(&values, pi, p)?;
        let rel = relative_advantages(&bundle, pi, pi_new, p_new, &d)?;

        let current = profile(c, pi, p, &values)?;
        let l_pi_new = policy_lipschitz(c.states(), c.actions(), pi_new)?;
        let l_p_new = config_lipschitz(c, p_new)?;

        let kernel = state_kernel(pi, p)?;
        let kernel_new = state_kernel(pi_new, p_new)?;

        let s_count = c.n_states();
        let mut kernel_shift = 0.0;
        let mut policy_shift = 0.0;
        let mut policy_shift_sup = 0.0f64;
        let mut config_shift = 0.0;
        for s in 0..s_count {
            let weight = d.mass.mass(s);
            let w_kernel = row_wasserstein(c.states(), kernel_new.row(s), kernel.row(s))?;
            let w_policy =
                row_wasserstein(c.actions(), pi_new.probs().row(s), pi.probs().row(s))?;
            kernel_shift += weight * w_kernel;
            policy_shift += weight * w_policy;
            policy_shift_sup = policy_shift_sup.max(w_policy);
            for a in 0..c.n_actions() {
                let w_config = row_wasserstein(
                    c.states(),
                    p_new.probs().slice(ndarray::s![s, a, ..]),
                    p.probs().slice(ndarray::s![s, a, ..]),
                )?;
                config_shift += weight * pi.prob(s, a) * w_config;
            }
        }

        Ok(Comparison {
            c,
            pi,
            pi_new,
            mu,
            values,
            d,
            d_new,
            j,
            j_new,
            rel,
            current,
            l_pi_new,
            l_p_new,
            kernel_new,
            kernel_shift,
            policy_shift,
            config_shift,
            policy_shift_sup,
        })
    }

    pub fn expected_return_current(&self) -> f64 {
        self.j
    }

    pub fn expected_return_new(&self) -> f64 {
        self.j_new
    }

    pub fn relative(&self) -> &RelativeAdvantages {
        &self.rel
    }

    pub fn current_profile(&self) -> &LipschitzProfile {
        &self.current
    }

    pub fn candidate_constants(&self) -> (f64, f64) {
        (self.l_pi_new, self.l_p_new)
    }

    /// `gamma * L_p' * (1 + L_pi')`, the contraction of the candidate pair.
    pub fn contraction_new(&self) -> f64 {
        self.c.gamma() * self.l_p_new * (1.0 + self.l_pi_new)
    }

    fn applicable_new(&self) -> bool {
        self.contraction_new() < 1.0
    }

    /// The d-weighted Wasserstein distance between the state-state kernels
    /// of the two pairs.
    pub fn kernel_distance_term(&self) -> f64 {
        self.kernel_shift
    }

    /// The d-and-pi-weighted Wasserstein distance between configurations.
    pub fn config_distance_term(&self) -> f64 {
        self.config_shift
    }

    /// The d-weighted Wasserstein distance between policies.
    pub fn policy_distance_term(&self) -> f64 {
        self.policy_shift
    }

    fn base_components(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("l_pi_new".into(), self.l_pi_new);
        m.insert("l_p_new".into(), self.l_p_new);
        m.insert("contraction_new".into(), self.contraction_new());
        m.insert("gamma".into(), self.c.gamma());
        m
    }

    /// Upper bound on `W(d', d)` through the kernel shift, against the
    /// exactly computed distance.
    pub fn distribution_bound_coupled(&self) -> Result<BoundReport> {
        let exact = wasserstein(self.c.states(), &self.d_new.mass, &self.d.mass)?.distance;
        let mut components = self.base_components();
        components.insert("kernel_distance_term".into(), self.kernel_shift);
        let bound = if self.applicable_new() {
            let cn = self.contraction_new();
            Some(self.c.gamma() / (1.0 - cn) * self.kernel_shift)
        } else {
            None
        };
        Ok(BoundReport::upper(
            "distribution_shift_coupled",
            bound,
            exact,
            components,
        ))
    }

    /// The looser bound that separates the policy and configuration
    /// contributions to the distribution shift.
    pub fn distribution_bound_decoupled(&self) -> Result<BoundReport> {
        let exact = wasserstein(self.c.states(), &self.d_new.mass, &self.d.mass)?.distance;
        let mut components = self.base_components();
        components.insert("config_distance_term".into(), self.config_shift);
        components.insert("policy_distance_term".into(), self.policy_shift);
        let bound = if self.applicable_new() {
            let cn = self.contraction_new();
            let gamma = self.c.gamma();
            Some(
                gamma / (1.0 - cn) * self.config_shift
                    + gamma * self.l_p_new / (1.0 - cn) * self.policy_shift,
            )
        } else {
            None
        };
        Ok(BoundReport::upper(
            "distribution_shift_decoupled",
            bound,
            exact,
            components,
        ))
    }

    /// The d-averaged and supremum policy shifts, for tightness reporting:
    /// the average is never larger than the supremum.
    pub fn sup_comparison(&self) -> (f64, f64) {
        (self.policy_shift, self.policy_shift_sup)
    }

    /// The exact performance-difference identity: the left side is the
    /// return difference, the right side averages the coupled relative
    /// advantage under the candidate pair's discounted distribution.
    pub fn performance_difference(&self) -> Result<(f64, f64)> {
        let lhs = self.j_new - self.j;
        let mut rhs = 0.0;
        for s in 0..self.c.n_states() {
            rhs += self.d_new.mass.mass(s) * self.rel.coupled_rel[s];
        }
        rhs /= 1.0 - self.c.gamma();
        let tolerance = 1e-9;
        let residual = (lhs - rhs).abs();
        if residual > tolerance * (1.0 + lhs.abs().max(rhs.abs())) {
            return Err(Error::IdentityViolation {
                residual,
                tolerance,
            });
        }
        Ok((lhs, rhs))
    }

    /// The coupled-advantage semi-norm used by the coupled improvement
    /// bound, in the requested mode. `None` when the theoretical stand-in
    /// needs the current pair's contraction and it fails.
    fn coupled_advantage_seminorm(&self, mode: SeminormMode) -> Option<f64> {
        match mode {
            SeminormMode::Exact => Some(lipschitz_seminorm(
                self.c.states(),
                self.rel.coupled_rel.view(),
            )),
            SeminormMode::Theoretical => self
                .current
                .bounds
                .map(|b| 2.0 * b.u * (self.l_pi_new + 1.0) * (self.l_p_new + 1.0)),
        }
    }

    fn u_seminorm(&self, mode: SeminormMode) -> Option<f64> {
        match mode {
            SeminormMode::Exact => Some(self.current.exact_u),
            SeminormMode::Theoretical => self.current.bounds.map(|b| b.u),
        }
    }

    /// Lower bound on the performance improvement through the coupled
    /// advantage and the kernel shift penalty.
    pub fn pi_bound_coupled(&self, mode: SeminormMode) -> BoundReport {
        let exact = self.j_new - self.j;
        let gamma = self.c.gamma();
        let mut components = self.base_components();
        components.insert("advantage".into(), self.rel.expected_coupled);
        components.insert("kernel_distance_term".into(), self.kernel_shift);
        components.insert(
            "use_theoretical_seminorm".into(),
            if mode == SeminormMode::Theoretical { 1.0 } else { 0.0 },
        );

        let seminorm = self.coupled_advantage_seminorm(mode);
        let bound = match (self.applicable_new(), seminorm) {
            (true, Some(norm)) => {
                components.insert("advantage_seminorm".into(), norm);
                let cn = self.contraction_new();
                let advantage = self.rel.expected_coupled / (1.0 - gamma);
                let penalty =
                    gamma / ((1.0 - gamma) * (1.0 - cn)) * norm * self.kernel_shift;
                components.insert("penalty".into(), penalty);
                Some(advantage - penalty)
            }
            _ => None,
        };
        BoundReport::lower("improvement_coupled", bound, exact, components)
    }

    /// Lower bound on the performance improvement through the decoupled
    /// advantages and separate policy/configuration shift penalties.
    pub fn pi_bound_decoupled(&self, mode: SeminormMode) -> BoundReport {
        let exact = self.j_new - self.j;
        let gamma = self.c.gamma();
        let mut components = self.base_components();
        components.insert("advantage_policy".into(), self.rel.expected_policy);
        components.insert("advantage_config".into(), self.rel.expected_config);
        components.insert("config_distance_term".into(), self.config_shift);
        components.insert("policy_distance_term".into(), self.policy_shift);
        components.insert(
            "use_theoretical_seminorm".into(),
            if mode == SeminormMode::Theoretical { 1.0 } else { 0.0 },
        );

        let bound = match (self.applicable_new(), self.u_seminorm(mode)) {
            (true, Some(u_norm)) => {
                let cn = self.contraction_new();
                let factor = (self.l_pi_new + 1.0) * (self.l_p_new + 1.0)
                    / ((1.0 - gamma) * (1.0 - cn));
                let c1 = u_norm * 2.0 * gamma * factor;
                let c2 = u_norm * 2.0 * (1.0 + gamma * self.l_p_new) * factor;
                components.insert("u_seminorm".into(), u_norm);
                components.insert("c1".into(), c1);
                components.insert("c2".into(), c2);
                let advantage =
                    (self.rel.expected_policy + self.rel.expected_config) / (1.0 - gamma);
                Some(advantage - c1 * self.config_shift - c2 * self.policy_shift)
            }
            _ => None,
        };
        BoundReport::lower("improvement_decoupled", bound, exact, components)
    }

    /// Checks that averaging a 1-Lipschitz state function through the
    /// candidate kernel contracts its semi-norm to at most
    /// `L_p' (1 + L_pi')`. Returns (exact semi-norm, closed-form constant).
    pub fn verify_kernel_smoothing(&self, f: ArrayView1<'_, f64>) -> (f64, f64) {
        let norm_f = lipschitz_seminorm(self.c.states(), f);
        assert!(
            norm_f <= 1.0 + 1e-9,
            "witness function must be 1-Lipschitz, semi-norm {norm_f}"
        );
        let s_count = self.c.n_states();
        let averaged = Array1::from_shape_fn(s_count, |s| {
            (0..s_count)
                .map(|next| self.kernel_new[[s, next]] * f[next])
                .sum()
        });
        let lhs = lipschitz_seminorm(self.c.states(), averaged.view());
        let rhs = self.l_p_new * (1.0 + self.l_pi_new);
        (lhs, rhs)
    }

    /// Checks the gap between the expected coupled advantage and the sum of
    /// the expected decoupled advantages against the policy-shift penalty
    /// weighted by the configuration-advantage semi-norm.
    pub fn verify_advantage_decomposition(&self) -> (f64, f64) {
        let lhs = (self.rel.expected_coupled
            - self.rel.expected_policy
            - self.rel.expected_config)
            .abs();
        let config_rel_norm =
            seminorm_state_action(self.c.states(), self.c.actions(), self.rel.config_rel.view());
        let rhs = self.policy_shift * config_rel_norm;
        (lhs, rhs)
    }

    /// Checks the semi-norm of the coupled relative advantage against the
    /// decoupled semi-norms.
    pub fn verify_advantage_seminorm(&self) -> (f64, f64) {
        let lhs = lipschitz_seminorm(self.c.states(), self.rel.coupled_rel.view());
        let policy_norm = lipschitz_seminorm(self.c.states(), self.rel.policy_rel.view());
        let config_norm =
            seminorm_state_action(self.c.states(), self.c.actions(), self.rel.config_rel.view());
        let rhs = policy_norm + (self.l_pi_new + 1.0) * config_norm;
        (lhs, rhs)
    }

    pub fn values_current(&self) -> &ValueBundle {
        &self.values
    }

    pub fn discounted_current(&self) -> &DiscountedDistribution {
        &self.d
    }

    pub fn discounted_new(&self) -> &DiscountedDistribution {
        &self.d_new
    }

    pub fn initial(&self) -> &Distribution {
        self.mu
    }

    pub fn policies(&self) -> (&Policy, &Policy) {
        (self.pi, self.pi_new)
    }
}

fn row_wasserstein(
    space: &crate::metric::MetricSpace,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<f64> {
    let a = a.to_owned();
    let b = b.to_owned();
    crate::metric::transport_slices(
        space,
        a.as_slice().expect("contiguous row"),
        b.as_slice().expect("contiguous row"),
    )
}
