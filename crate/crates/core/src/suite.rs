//! Instance-level verification checks shared by the test suites and the
//! command-line harness.
//!
//! Every check reports a slack margin: nonnegative means the property
//! holds with room to spare, and anything above `-tolerance` passes.
//! For two-sided identities the margin is minus the absolute residual.
//!
//! The small-support brute-force transport oracle lives here on purpose:
//! it enumerates transportation-polytope vertices directly and never
//! touches the network-flow path it is checking.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::advantage::{advantage_bundle, check_decomposition, relative_advantages};
use crate::bounds::{Comparison, SeminormMode};
use crate::error::Result;
use crate::improvement::{spci_run, SpciOptions};
use crate::lipschitz::profile;
use crate::mdp::{
    bellman_residual, discounted_distribution, discounted_fixed_point_residual, solve_values,
    state_kernel, ConfMdp, Configuration, Policy,
};
use crate::metric::{
    lipschitz_seminorm, smooth_to_lipschitz, tv_divergence, wasserstein, Distribution,
    MetricSpace,
};

/// Outcome of one named check on one instance.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Margin by which the property holds; `>= -tolerance` passes.
    pub slack: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn new(name: &'static str, slack: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name,
            slack,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.slack >= -self.tolerance
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let mut mass: Vec<f64> = (0..n)
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-12))
        .collect();
    let sum: f64 = mass.iter().sum();
    for value in &mut mass {
        *value /= sum;
    }
    Distribution::new(Array1::from_vec(mass)).expect("normalized draw")
}

fn random_witness(rng: &mut ChaCha8Rng, space: &MetricSpace) -> Array1<f64> {
    let scale = space.diameter().max(1.0);
    let raw: Vec<f64> = (0..space.len())
        .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    smooth_to_lipschitz(space, &raw)
}

/// Exact minimum transport cost by enumerating the vertices of the
/// transportation polytope (spanning trees of the bipartite support
/// graph). Only tractable for tiny supports; the verification suites use
/// it up to four points.
pub fn brute_force_transport(dist: &Array2<f64>, p: &[f64], q: &[f64]) -> f64 {
    let m = p.len();
    let n = q.len();
    assert!(m <= 5 && n <= 5, "vertex enumeration is for tiny supports");
    let cells: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let basis_size = m + n - 1;
    let mut best = f64::INFINITY;

    // iterate over all cell subsets of basis size via bitmasks
    let total = 1usize << cells.len();
    'subsets: for mask in 0..total {
        if (mask as u64).count_ones() as usize != basis_size {
            continue;
        }
        let chosen: Vec<(usize, usize)> = cells
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &cell)| cell)
            .collect();

        // leaf elimination solves the flows and detects cycles at once
        let mut residual_supply = p.to_vec();
        let mut residual_demand = q.to_vec();
        let mut active: Vec<(usize, usize)> = chosen.clone();
        let mut flows: Vec<((usize, usize), f64)> = Vec::with_capacity(basis_size);
        while !active.is_empty() {
            let mut degree_source = vec![0usize; m];
            let mut degree_sink = vec![0usize; n];
            for &(i, j) in &active {
                degree_source[i] += 1;
                degree_sink[j] += 1;
            }
            let leaf_pos = active.iter().position(|&(i, j)| {
                degree_source[i] == 1 || degree_sink[j] == 1
            });
            let Some(pos) = leaf_pos else {
                // remaining edges all lie on cycles: not a spanning forest
                continue 'subsets;
            };
            let (i, j) = active.swap_remove(pos);
            let flow = if degree_source[i] == 1 {
                residual_supply[i]
            } else {
                residual_demand[j]
            };
            residual_supply[i] -= flow;
            residual_demand[j] -= flow;
            flows.push(((i, j), flow));
        }
        if residual_supply.iter().any(|&r| r.abs() > 1e-9)
            || residual_demand.iter().any(|&r| r.abs() > 1e-9)
        {
            // the subset did not span every node with positive mass
            continue;
        }
        if flows.iter().any(|&(_, f)| f < -1e-12) {
            continue;
        }
        let cost: f64 = flows
            .iter()
            .map(|&((i, j), f)| f.max(0.0) * dist[[i, j]])
            .sum();
        if cost < best {
            best = cost;
        }
    }
    best
}

fn merge(worst: &mut f64, margin: f64) {
    if margin < *worst {
        *worst = margin;
    }
}

/// The metric-layer checks: duality, the total-variation reduction under
/// the discrete metric, the metric axioms of the transport distance,
/// scaling covariance, and agreement with the brute-force oracle on tiny
/// supports.
pub fn metric_checks(space: &MetricSpace, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d65_7472_6963);
    let n = space.len();
    let mut outcomes = Vec::new();

    // duality: the transport distance dominates every 1-Lipschitz witness
    let mut duality = f64::INFINITY;
    for _ in 0..20 {
        let p = random_distribution(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        let w = wasserstein(space, &p, &q)?.distance;
        for _ in 0..5 {
            let f = random_witness(&mut rng, space);
            let pairing: f64 = (0..n)
                .map(|i| (p.mass(i) - q.mass(i)) * f[i])
                .sum();
            merge(&mut duality, w - pairing.abs());
        }
    }
    outcomes.push(CheckOutcome::new("wasserstein_duality", duality, 1e-9));

    // discrete-metric reduction to total variation
    let discrete = MetricSpace::discrete(n.max(2));
    let mut reduction = f64::INFINITY;
    for _ in 0..5 {
        let p = random_distribution(&mut rng, discrete.len());
        let q = random_distribution(&mut rng, discrete.len());
        let w = wasserstein(&discrete, &p, &q)?.distance;
        let tv = tv_divergence(&p, &q)?;
        merge(&mut reduction, -(w - tv).abs());
    }
    outcomes.push(CheckOutcome::new("discrete_metric_reduction", reduction, 1e-9));

    // symmetry, identity, triangle inequality
    let mut axioms = f64::INFINITY;
    for _ in 0..5 {
        let p = random_distribution(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        let r = random_distribution(&mut rng, n);
        let w_pq = wasserstein(space, &p, &q)?.distance;
        let w_qp = wasserstein(space, &q, &p)?.distance;
        let w_pp = wasserstein(space, &p, &p)?.distance;
        let w_pr = wasserstein(space, &p, &r)?.distance;
        let w_qr = wasserstein(space, &q, &r)?.distance;
        merge(&mut axioms, -(w_pq - w_qp).abs());
        merge(&mut axioms, -w_pp.abs());
        merge(&mut axioms, w_pq + w_qr - w_pr);
    }
    outcomes.push(CheckOutcome::new("wasserstein_metric_axioms", axioms, 1e-9));

    // scaling the metric scales distances and inversely scales semi-norms
    let mut scaling = f64::INFINITY;
    let factor = 2.5;
    let scaled = space.scaled(factor)?;
    for _ in 0..3 {
        let p = random_distribution(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        let w = wasserstein(space, &p, &q)?.distance;
        let w_scaled = wasserstein(&scaled, &p, &q)?.distance;
        merge(&mut scaling, -(w_scaled - factor * w).abs());
        let f = random_witness(&mut rng, space);
        let norm = lipschitz_seminorm(space, f.view());
        let norm_scaled = lipschitz_seminorm(&scaled, f.view());
        merge(&mut scaling, -(norm_scaled - norm / factor).abs());
    }
    outcomes.push(CheckOutcome::new("wasserstein_scaling", scaling, 1e-9));

    // tiny-support agreement with the polytope-vertex oracle
    let mut oracle_margin = f64::INFINITY;
    for trial in 0..4 {
        let k = 3 + (trial % 2);
        let points: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let dist = Array2::from_shape_fn((k, k), |(i, j)| {
            if i == j {
                0.0
            } else {
                let dx = points[i].0 - points[j].0;
                let dy = points[i].1 - points[j].1;
                (dx * dx + dy * dy).sqrt().max(1e-6)
            }
        });
        let mut sym = dist.clone();
        for i in 0..k {
            for j in 0..i {
                sym[[i, j]] = sym[[j, i]];
            }
        }
        let Ok(small) = MetricSpace::new(sym.clone()) else {
            continue;
        };
        let p = random_distribution(&mut rng, k);
        let q = random_distribution(&mut rng, k);
        let w = wasserstein(&small, &p, &q)?.distance;
        let oracle = brute_force_transport(&sym, p.as_slice(), q.as_slice());
        merge(&mut oracle_margin, -(w - oracle).abs());
    }
    outcomes.push(CheckOutcome::new("wasserstein_brute_force", oracle_margin, 1e-9));

    Ok(outcomes)
}

fn truncated_series_margin(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    mu: &Distribution,
) -> Result<f64> {
    let d = discounted_distribution(c, pi, p, mu)?;
    let gamma = c.gamma();
    let n = c.n_states();
    let horizon = if gamma == 0.0 {
        0
    } else {
        ((1e-8 * (1.0 - gamma)).ln() / gamma.ln()).ceil() as usize
    };
    let kernel = state_kernel(pi, p)?;
    let mut probs: Vec<f64> = (0..n).map(|s| mu.mass(s)).collect();
    let mut series = vec![0.0f64; n];
    let mut discount = 1.0;
    for _ in 0..=horizon {
        for s in 0..n {
            series[s] += (1.0 - gamma) * discount * probs[s];
        }
        let mut next = vec![0.0f64; n];
        for s in 0..n {
            for target in 0..n {
                next[target] += probs[s] * kernel[[s, target]];
            }
        }
        probs = next;
        discount *= gamma;
    }
    let worst = (0..n)
        .map(|s| (d.mass.mass(s) - series[s]).abs())
        .fold(0.0f64, f64::max);
    Ok(-worst)
}

fn permutation_margin(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let n = c.n_states();
    let a_count = c.n_actions();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let dist = Array2::from_shape_fn((n, n), |(i, j)| {
        // position of original points i and j after relabeling: build the
        // permuted matrix so that entry (perm[i], perm[j]) = dist(i, j)
        let inv_i = perm.iter().position(|&x| x == i).unwrap();
        let inv_j = perm.iter().position(|&x| x == j).unwrap();
        c.states().dist(inv_i, inv_j)
    });
    let states = MetricSpace::new(dist)?;
    let reward = Array3::from_shape_fn((n, a_count, n), |(s, a, next)| {
        let inv_s = perm.iter().position(|&x| x == s).unwrap();
        let inv_next = perm.iter().position(|&x| x == next).unwrap();
        c.reward()[[inv_s, a, inv_next]]
    });
    let permuted = ConfMdp::new(states, c.actions().clone(), reward, c.gamma())?;
    let pi_perm = Policy::new(Array2::from_shape_fn((n, a_count), |(s, a)| {
        let inv_s = perm.iter().position(|&x| x == s).unwrap();
        pi.prob(inv_s, a)
    }))?;
    let p_perm = Configuration::new(Array3::from_shape_fn((n, a_count, n), |(s, a, next)| {
        let inv_s = perm.iter().position(|&x| x == s).unwrap();
        let inv_next = perm.iter().position(|&x| x == next).unwrap();
        p.prob(inv_s, a, inv_next)
    }))?;

    let values = solve_values(c, pi, p)?;
    let values_perm = solve_values(&permuted, &pi_perm, &p_perm)?;
    let worst = (0..n)
        .map(|s| (values_perm.v[perm[s]] - values.v[s]).abs())
        .fold(0.0f64, f64::max);
    Ok(-worst)
}

/// The Conf-MDP solver checks: Bellman consistency, agreement of the two
/// expected-return formulas, the fixed point and truncated-series oracle
/// for the discounted distribution, and invariance under state
/// relabeling.
pub fn solver_checks(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    mu: &Distribution,
    seed: u64,
) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x736f_6c76_6572);
    let mut outcomes = Vec::new();

    let values = solve_values(c, pi, p)?;
    outcomes.push(CheckOutcome::new(
        "bellman_consistency",
        -bellman_residual(c, pi, p, &values),
        1e-9,
    ));

    let d = discounted_distribution(c, pi, p, mu)?;
    let via_values: f64 = (0..c.n_states()).map(|s| mu.mass(s) * values.v[s]).sum();
    let mut one_step = 0.0;
    for s in 0..c.n_states() {
        for a in 0..c.n_actions() {
            for next in 0..c.n_states() {
                one_step +=
                    d.mass.mass(s) * pi.prob(s, a) * p.prob(s, a, next) * c.reward()[[s, a, next]];
            }
        }
    }
    let via_distribution = one_step / (1.0 - c.gamma());
    outcomes.push(CheckOutcome::new(
        "return_formula_agreement",
        -(via_values - via_distribution).abs(),
        1e-9,
    ));

    let kernel = state_kernel(pi, p)?;
    outcomes.push(CheckOutcome::new(
        "discounted_fixed_point",
        -discounted_fixed_point_residual(&d, &kernel),
        1e-9,
    ));
    outcomes.push(CheckOutcome::new(
        "discounted_distribution_series",
        truncated_series_margin(c, pi, p, mu)?,
        1e-6,
    ));
    outcomes.push(CheckOutcome::new(
        "permutation_invariance",
        permutation_margin(c, pi, p, &mut rng)?,
        1e-9,
    ));

    Ok(outcomes)
}

/// The advantage checks: the pointwise decomposition identity, nullity of
/// own-pair relative advantages, and the two routes to the expected
/// coupled advantage.
pub fn advantage_checks(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    pi_new: &Policy,
    p_new: &Configuration,
    mu: &Distribution,
) -> Result<Vec<CheckOutcome>> {
    let values = solve_values(c, pi, p)?;
    let bundle = advantage_bundle(&values, pi, p)?;
    let d = discounted_distribution(c, pi, p, mu)?;
    let mut outcomes = Vec::new();

    let rel = relative_advantages(&bundle, pi, pi_new, p_new, &d)?;
    outcomes.push(CheckOutcome::new(
        "advantage_decomposition_pointwise",
        -check_decomposition(&rel, pi_new),
        1e-10,
    ));

    let own = relative_advantages(&bundle, pi, pi, p, &d)?;
    let own_worst = own
        .policy_rel
        .iter()
        .chain(own.coupled_rel.iter())
        .chain(own.config_rel.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
        .max(own.expected_policy.abs())
        .max(own.expected_config.abs())
        .max(own.expected_coupled.abs());
    outcomes.push(CheckOutcome::new("own_pair_nullity", -own_worst, 1e-12));

    // decomposition route to the expected coupled advantage
    let mut via_decomposition = 0.0;
    for s in 0..c.n_states() {
        let mut config_part = 0.0;
        for a in 0..c.n_actions() {
            config_part += pi_new.prob(s, a) * rel.config_rel[[s, a]];
        }
        via_decomposition += d.mass.mass(s) * (rel.policy_rel[s] + config_part);
    }
    outcomes.push(CheckOutcome::new(
        "expected_coupled_two_routes",
        -(rel.expected_coupled - via_decomposition).abs(),
        1e-10,
    ));

    Ok(outcomes)
}

/// The Lipschitz checks: the closed-form semi-norm bounds dominate the
/// exact semi-norms, the one-step recursion for the U-semi-norm, and the
/// covariance of the constants under reward scaling.
pub fn lipschitz_checks(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
) -> Result<Vec<CheckOutcome>> {
    let values = solve_values(c, pi, p)?;
    let prof = profile(c, pi, p, &values)?;
    let mut outcomes = Vec::new();

    if let Some(bounds) = prof.bounds {
        outcomes.push(CheckOutcome::new(
            "value_seminorm_bound_q",
            bounds.q - prof.exact_q,
            1e-9,
        ));
        outcomes.push(CheckOutcome::new(
            "value_seminorm_bound_v",
            bounds.v - prof.exact_v,
            1e-9,
        ));
        outcomes.push(CheckOutcome::new(
            "value_seminorm_bound_u",
            bounds.u - prof.exact_u,
            1e-9,
        ));
    }
    outcomes.push(CheckOutcome::new(
        "u_seminorm_recursion",
        prof.l_r + c.gamma() * prof.exact_v - prof.exact_u,
        1e-9,
    ));

    let factor = 3.0;
    let scaled = c.with_scaled_reward(factor)?;
    let values_scaled = solve_values(&scaled, pi, p)?;
    let prof_scaled = profile(&scaled, pi, p, &values_scaled)?;
    let mut covariance = f64::INFINITY;
    merge(&mut covariance, -(prof_scaled.l_r - factor * prof.l_r).abs());
    merge(&mut covariance, -(prof_scaled.exact_v - factor * prof.exact_v).abs());
    merge(&mut covariance, -(prof_scaled.exact_q - factor * prof.exact_q).abs());
    merge(&mut covariance, -(prof_scaled.exact_u - factor * prof.exact_u).abs());
    merge(&mut covariance, -(prof_scaled.l_pi - prof.l_pi).abs());
    merge(&mut covariance, -(prof_scaled.l_p - prof.l_p).abs());
    outcomes.push(CheckOutcome::new(
        "reward_scaling_covariance",
        covariance,
        1e-9,
    ));

    Ok(outcomes)
}

/// The bound checks for one current/candidate pair: distribution-shift
/// bounds, the performance-difference identity, the improvement lower
/// bounds in both semi-norm modes, the ordering between them, the
/// average-versus-supremum comparison, and the three supporting lemmas.
pub fn bound_checks(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    pi_new: &Policy,
    p_new: &Configuration,
    mu: &Distribution,
    seed: u64,
) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x626f_756e_6473);
    let cmp = Comparison::new(c, pi, p, pi_new, p_new, mu)?;
    let mut outcomes = Vec::new();

    let coupled = cmp.distribution_bound_coupled()?;
    if let Some(slack) = coupled.slack {
        outcomes.push(CheckOutcome::new("distribution_shift_coupled", slack, 1e-9));
    }
    let decoupled = cmp.distribution_bound_decoupled()?;
    if let Some(slack) = decoupled.slack {
        outcomes.push(CheckOutcome::new(
            "distribution_shift_decoupled_vs_exact",
            slack,
            1e-9,
        ));
    }
    if let (Some(loose), Some(tight)) = (decoupled.bound_value, coupled.bound_value) {
        outcomes.push(CheckOutcome::new(
            "distribution_shift_decoupled_vs_coupled",
            loose - tight,
            1e-9,
        ));
    }

    let (lhs, rhs) = cmp.performance_difference()?;
    outcomes.push(CheckOutcome::new(
        "performance_difference_identity",
        -(lhs - rhs).abs(),
        1e-9,
    ));

    for (mode, coupled_name, decoupled_name, order_name) in [
        (
            SeminormMode::Exact,
            "improvement_coupled_exact",
            "improvement_decoupled_exact",
            "improvement_ordering_exact",
        ),
        (
            SeminormMode::Theoretical,
            "improvement_coupled_theoretical",
            "improvement_decoupled_theoretical",
            "improvement_ordering_theoretical",
        ),
    ] {
        let pic = cmp.pi_bound_coupled(mode);
        let pid = cmp.pi_bound_decoupled(mode);
        if let Some(slack) = pic.slack {
            outcomes.push(CheckOutcome::new(coupled_name, slack, 1e-9));
        }
        if let Some(slack) = pid.slack {
            outcomes.push(CheckOutcome::new(decoupled_name, slack, 1e-9));
        }
        if let (Some(tight), Some(loose)) = (pic.bound_value, pid.bound_value) {
            outcomes.push(CheckOutcome::new(order_name, tight - loose, 1e-9));
        }
    }

    let (avg, sup) = cmp.sup_comparison();
    outcomes.push(CheckOutcome::new(
        "policy_shift_average_below_sup",
        sup - avg,
        1e-12,
    ));

    let mut smoothing = f64::INFINITY;
    for _ in 0..5 {
        let f = random_witness(&mut rng, c.states());
        let (lhs, rhs) = cmp.verify_kernel_smoothing(f.view());
        merge(&mut smoothing, rhs - lhs);
    }
    outcomes.push(CheckOutcome::new("kernel_smoothing_lemma", smoothing, 1e-9));

    let (lhs, rhs) = cmp.verify_advantage_decomposition();
    outcomes.push(CheckOutcome::new(
        "advantage_decomposition_expected",
        rhs - lhs,
        1e-9,
    ));
    let (lhs, rhs) = cmp.verify_advantage_seminorm();
    outcomes.push(CheckOutcome::new(
        "coupled_advantage_seminorm",
        rhs - lhs,
        1e-9,
    ));

    Ok(outcomes)
}

/// The discount-zero degeneracy: with the discount removed and a
/// configuration-only candidate, both improvement bounds coincide with
/// the realized improvement.
pub fn gamma_zero_checks(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    p_new: &Configuration,
    mu: &Distribution,
) -> Result<Vec<CheckOutcome>> {
    let c0 = c.with_gamma(0.0)?;
    let cmp = Comparison::new(&c0, pi, p, pi, p_new, mu)?;
    let mut worst = f64::INFINITY;
    for mode in [SeminormMode::Exact, SeminormMode::Theoretical] {
        let pic = cmp.pi_bound_coupled(mode);
        let pid = cmp.pi_bound_decoupled(mode);
        merge(&mut worst, -(pic.bound_value.unwrap() - pic.exact_value).abs());
        merge(&mut worst, -(pid.bound_value.unwrap() - pid.exact_value).abs());
    }
    Ok(vec![CheckOutcome::new("gamma_zero_degeneracy", worst, 1e-12)])
}

/// A short improvement run: accepted steps must realize at least their
/// certified bound and the return sequence must be non-decreasing.
pub fn improvement_checks(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    mu: &Distribution,
) -> Result<Vec<CheckOutcome>> {
    let options = SpciOptions {
        max_iters: 3,
        grid: 6,
        ..SpciOptions::default()
    };
    let trace = spci_run(c, pi, p, mu, &options)?;
    let mut safety = f64::INFINITY;
    let mut monotone = f64::INFINITY;
    for step in &trace.steps {
        merge(&mut safety, step.realized_improvement - step.predicted_bound);
        merge(&mut monotone, step.j_after - step.j_before);
    }
    if trace.steps.is_empty() {
        safety = 0.0;
        monotone = 0.0;
    }
    Ok(vec![
        CheckOutcome::new("spci_step_safety", safety, 1e-9),
        CheckOutcome::new("spci_monotonicity", monotone, 1e-9),
    ])
}

/// Runs every instance-level check group on one current/candidate pair.
pub fn instance_checks(
    c: &ConfMdp,
    pi: &Policy,
    p: &Configuration,
    pi_new: &Policy,
    p_new: &Configuration,
    mu: &Distribution,
    seed: u64,
) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();
    outcomes.extend(metric_checks(c.states(), seed)?);
    outcomes.extend(solver_checks(c, pi, p, mu, seed)?);
    outcomes.extend(advantage_checks(c, pi, p, pi_new, p_new, mu)?);
    outcomes.extend(lipschitz_checks(c, pi, p)?);
    outcomes.extend(bound_checks(c, pi, p, pi_new, p_new, mu, seed)?);
    outcomes.extend(gamma_zero_checks(c, pi, p, p_new, mu)?);
    outcomes.extend(improvement_checks(c, pi, p, mu)?);
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{random_instance, random_pair, GeneratorSpec, MetricKind};
    use ndarray::array;

    #[test]
    fn brute_force_oracle_handles_known_cases() {
        // line 0-1-3: moving (.5,.5,0) to (0,.5,.5) costs 1.5
        let dist = array![[0.0, 1.0, 3.0], [1.0, 0.0, 2.0], [3.0, 2.0, 0.0]];
        let w = brute_force_transport(&dist, &[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5]);
        assert!((w - 1.5).abs() <= 1e-12);

        let discrete = array![[0.0, 1.0], [1.0, 0.0]];
        let w = brute_force_transport(&discrete, &[1.0, 0.0], &[0.0, 1.0]);
        assert!((w - 1.0).abs() <= 1e-12);
        let w = brute_force_transport(&discrete, &[0.5, 0.5], &[0.5, 0.5]);
        assert!(w.abs() <= 1e-12);
    }

    #[test]
    fn full_suite_passes_on_generated_instances() {
        for seed in [1u64, 2, 3] {
            let spec = GeneratorSpec {
                n_states: 4,
                n_actions: 2,
                gamma: 0.6,
                smoothing: 0.6,
                metric_kind: MetricKind::Line,
                seed,
            };
            let (c, pi, p, mu) = random_instance(&spec).unwrap();
            let (pi_new, p_new) = random_pair(&c, 0.6, seed ^ 0xabcdef).unwrap();
            let outcomes = instance_checks(&c, &pi, &p, &pi_new, &p_new, &mu, seed).unwrap();
            assert!(outcomes.len() > 20);
            for outcome in &outcomes {
                assert!(
                    outcome.passed(),
                    "seed {seed}: {} failed with slack {}",
                    outcome.name,
                    outcome.slack
                );
            }
        }
    }
}
