//! Seeded generation of Lipschitz-continuous Conf-MDP instances with
//! controllable constants, plus two benchmark environments.
//!
//! Contraction is enforced by mixing every kernel row with the uniform
//! distribution: mixing at weight `w` scales every pairwise Wasserstein
//! distance by `1 - w`, so it is a provable knob on the kernel constants.
//! Generation measures the constants exactly and re-smooths a bounded
//! number of times; if the contraction condition still fails it errors
//! out instead of returning a non-contractive instance.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lipschitz::{config_lipschitz, policy_lipschitz};
use crate::mdp::{ConfMdp, Configuration, Policy};
use crate::metric::{Distribution, MetricSpace};

const MAX_SMOOTHING_ROUNDS: usize = 5;

/// Ground-metric family for generated spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// 0/1 distances.
    Discrete,
    /// Points on a line with random gaps.
    Line,
    /// Points embedded in the unit cube with Euclidean distances.
    RandomEmbedded,
}

/// Parameters for [`random_instance`].
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Uniform-mixture weight in [0, 1] applied to every kernel row.
    pub smoothing: f64,
    pub metric_kind: MetricKind,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount { gamma: self.gamma });
        }
        if !(0.0..=1.0).contains(&self.smoothing) || !self.smoothing.is_finite() {
            return Err(Error::UnnormalizedMass {
                sum: self.smoothing,
                tolerance: 1.0,
            });
        }
        Ok(())
    }
}

fn random_metric(rng: &mut ChaCha8Rng, kind: MetricKind, n: usize) -> MetricSpace {
    match kind {
        MetricKind::Discrete => MetricSpace::discrete(n),
        MetricKind::Line => {
            let mut coords = Vec::with_capacity(n);
            let mut x = 0.0;
            for _ in 0..n {
                coords.push(x);
                x += 0.2 + 0.8 * rng.random::<f64>();
            }
            MetricSpace::line(&coords).expect("line coordinates are distinct")
        }
        MetricKind::RandomEmbedded => {
            let mut points: Vec<[f64; 3]> = Vec::with_capacity(n);
            while points.len() < n {
                let candidate = [
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ];
                let separated = points.iter().all(|p| {
                    let d2: f64 = (0..3).map(|k| (p[k] - candidate[k]).powi(2)).sum();
                    d2.sqrt() >= 1e-3
                });
                if separated {
                    points.push(candidate);
                }
            }
            let dist = Array2::from_shape_fn((n, n), |(i, j)| {
                let d2: f64 = (0..3)
                    .map(|k| (points[i][k] - points[j][k]).powi(2))
                    .sum();
                if i == j {
                    0.0
                } else {
                    d2.sqrt()
                }
            });
            // mirror exactly so symmetry is bitwise
            let mut sym = dist.clone();
            for i in 0..n {
                for j in 0..i {
                    sym[[i, j]] = sym[[j, i]];
                }
            }
            MetricSpace::new(sym).expect("euclidean distances form a metric")
        }
    }
}

/// Dirichlet(1) row: normalized exponential draws.
fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n)
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-12))
        .collect();
    let sum: f64 = row.iter().sum();
    for value in &mut row {
        *value /= sum;
    }
    row
}

fn smooth_row(row: &mut [f64], weight: f64) {
    let n = row.len() as f64;
    let mut sum = 0.0;
    for value in row.iter_mut() {
        *value = (1.0 - weight) * *value + weight / n;
        sum += *value;
    }
    for value in row.iter_mut() {
        *value /= sum;
    }
}

struct RawPair {
    policy: Array2<f64>,
    config: Array3<f64>,
}

fn draw_pair(rng: &mut ChaCha8Rng, s_count: usize, a_count: usize) -> RawPair {
    let mut policy = Array2::zeros((s_count, a_count));
    for s in 0..s_count {
        let row = random_row(rng, a_count);
        for a in 0..a_count {
            policy[[s, a]] = row[a];
        }
    }
    let mut config = Array3::zeros((s_count, a_count, s_count));
    for s in 0..s_count {
        for a in 0..a_count {
            let row = random_row(rng, s_count);
            for next in 0..s_count {
                config[[s, a, next]] = row[next];
            }
        }
    }
    RawPair { policy, config }
}

fn smooth_pair(pair: &mut RawPair, weight: f64) {
    for mut row in pair.policy.rows_mut() {
        smooth_row(row.as_slice_mut().expect("contiguous policy row"), weight);
    }
    let (s_count, a_count, _) = pair.config.dim();
    for s in 0..s_count {
        for a in 0..a_count {
            let mut row = pair.config.slice_mut(ndarray::s![s, a, ..]);
            smooth_row(row.as_slice_mut().expect("contiguous config row"), weight);
        }
    }
}

/// Smooths until the contraction condition holds, erroring out after a
/// bounded number of rounds.
fn enforce_contraction(
    c: &ConfMdp,
    mut pair: RawPair,
    smoothing: f64,
) -> Result<(Policy, Configuration)> {
    smooth_pair(&mut pair, smoothing);
    for round in 0..=MAX_SMOOTHING_ROUNDS {
        let policy = Policy::new(pair.policy.clone())?;
        let config = Configuration::new(pair.config.clone())?;
        let l_pi = policy_lipschitz(c.states(), c.actions(), &policy)?;
        let l_p = config_lipschitz(c, &config)?;
        let contraction = c.gamma() * l_p * (1.0 + l_pi);
        if contraction < 1.0 {
            return Ok((policy, config));
        }
        if round == MAX_SMOOTHING_ROUNDS {
            return Err(Error::ContractionUnreachable {
                rounds: MAX_SMOOTHING_ROUNDS,
                contraction,
            });
        }
        smooth_pair(&mut pair, smoothing);
    }
    unreachable!("loop returns or errors")
}

/// Draws a full instance: metric spaces, a reward tensor rescaled to have
/// Lipschitz constant one, a contraction-satisfying policy-configuration
/// pair, and an initial state distribution.
///
/// The same spec always produces the identical instance; the smoothing
/// weight does not influence the random draws, only the post-processing.
pub fn random_instance(
    spec: &GeneratorSpec,
) -> Result<(ConfMdp, Policy, Configuration, Distribution)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let states = random_metric(&mut rng, spec.metric_kind, spec.n_states);
    let actions = random_metric(&mut rng, spec.metric_kind, spec.n_actions);

    let mut reward = Array3::from_shape_fn((spec.n_states, spec.n_actions, spec.n_states), |_| {
        2.0 * rng.random::<f64>() - 1.0
    });
    let pair = draw_pair(&mut rng, spec.n_states, spec.n_actions);
    let mu_row = random_row(&mut rng, spec.n_states);

    // rescale so the measured reward constant is one
    let probe = ConfMdp::new(states.clone(), actions.clone(), reward.clone(), spec.gamma)?;
    let l_r = crate::lipschitz::reward_lipschitz(&probe);
    if l_r > 1e-12 {
        reward /= l_r;
    }
    let c = ConfMdp::new(states, actions, reward, spec.gamma)?;

    let (policy, config) = enforce_contraction(&c, pair, spec.smoothing)?;
    let mu = Distribution::new(Array1::from_vec(mu_row))?;
    Ok((c, policy, config, mu))
}

/// Draws a second contraction-satisfying pair for an existing instance,
/// for comparisons between a current and a candidate pair.
pub fn random_pair(c: &ConfMdp, smoothing: f64, seed: u64) -> Result<(Policy, Configuration)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = draw_pair(&mut rng, c.n_states(), c.n_actions());
    enforce_contraction(c, pair, smoothing)
}

/// A configurable chain: states sit at integer coordinates on a line, the
/// two actions move left or right, and `slip` randomizes the motion
/// between the two neighbors. Reward 1 on every transition into the
/// rightmost state.
pub fn chain_env(n: usize, slip: f64, gamma: f64) -> Result<(ConfMdp, Configuration)> {
    assert!(n >= 2, "a chain needs at least two states");
    assert!((0.0..=1.0).contains(&slip), "slip is a probability");
    let coords: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let states = MetricSpace::line(&coords)?;
    let actions = MetricSpace::discrete(2);
    let reward = Array3::from_shape_fn((n, 2, n), |(_, _, next)| {
        if next == n - 1 {
            1.0
        } else {
            0.0
        }
    });
    let c = ConfMdp::new(states, actions, reward, gamma)?;

    let mut probs = Array3::zeros((n, 2, n));
    for s in 0..n {
        let left = s.saturating_sub(1);
        let right = usize::min(s + 1, n - 1);
        for a in 0..2 {
            let intended = if a == 0 { left } else { right };
            probs[[s, a, intended]] += 1.0 - slip;
            probs[[s, a, left]] += slip * 0.5;
            probs[[s, a, right]] += slip * 0.5;
        }
    }
    Ok((c, Configuration::new(probs)?))
}

/// A Manhattan-metric gridworld. The four actions are unit moves whose
/// ground metric is the Manhattan distance between the move vectors, the
/// goal reward sits in the north-east corner, and a west-to-east wind of
/// strength growing toward the east border pushes the outcome one extra
/// cell east with probability `wind * (x + 1) / width`.
pub fn gridworld_env(
    width: usize,
    height: usize,
    wind: f64,
    gamma: f64,
) -> Result<(ConfMdp, Configuration)> {
    assert!(width >= 2 && height >= 2, "grid needs both dimensions >= 2");
    assert!((0.0..=1.0).contains(&wind), "wind is a probability");
    let n = width * height;
    let coord = |s: usize| (s % width, s / width);
    let index = |x: usize, y: usize| y * width + x;
    let dist = Array2::from_shape_fn((n, n), |(i, j)| {
        let (xi, yi) = coord(i);
        let (xj, yj) = coord(j);
        (xi as f64 - xj as f64).abs() + (yi as f64 - yj as f64).abs()
    });
    let states = MetricSpace::new(dist)?;
    // east, west, north, south as points in the move plane
    let moves_xy: [(f64, f64); 4] = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
    let action_dist = Array2::from_shape_fn((4, 4), |(i, j)| {
        (moves_xy[i].0 - moves_xy[j].0).abs() + (moves_xy[i].1 - moves_xy[j].1).abs()
    });
    let actions = MetricSpace::new(action_dist)?;
    let goal = index(width - 1, height - 1);
    let reward = Array3::from_shape_fn((n, 4, n), |(_, _, next)| {
        if next == goal {
            1.0
        } else {
            0.0
        }
    });
    let c = ConfMdp::new(states, actions, reward, gamma)?;

    let mut probs = Array3::zeros((n, 4, n));
    for s in 0..n {
        let (x, y) = coord(s);
        let moves = [
            (x.saturating_add(1).min(width - 1), y),
            (x.saturating_sub(1), y),
            (x, y.saturating_add(1).min(height - 1)),
            (x, y.saturating_sub(1)),
        ];
        for (a, &(mx, my)) in moves.iter().enumerate() {
            let intended = index(mx, my);
            let blown = index(mx.saturating_add(1).min(width - 1), my);
            let blow_prob = wind * (mx + 1) as f64 / width as f64;
            probs[[s, a, intended]] += 1.0 - blow_prob;
            probs[[s, a, blown]] += blow_prob;
        }
    }
    Ok((c, Configuration::new(probs)?))
}
