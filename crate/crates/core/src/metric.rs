//! Finite metric spaces, discrete distributions, exact 1-Wasserstein
//! transport, and Lipschitz semi-norms.
//!
//! Everything here is exact up to floating-point rounding: the transport
//! solver is a successive-shortest-path min-cost flow on the residual
//! bipartite network, not an entropic approximation, so downstream bound
//! checks can assert slacks at 1e-9.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Tolerance for accepting a probability vector as normalized.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A finite metric space given by an explicit pairwise distance matrix.
///
/// Construction validates all metric axioms eagerly (including the O(n^3)
/// triangle check); every operation downstream assumes a validated space.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    dist: Array2<f64>,
}

impl MetricSpace {
    /// Validates a distance matrix and wraps it as a metric space.
    ///
    /// Distinct points at distance zero are rejected rather than merged:
    /// semi-norm suprema must stay finite.
    pub fn new(dist: Array2<f64>) -> Result<Self> {
        let (rows, cols) = dist.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let n = rows;
        for i in 0..n {
            for j in 0..n {
                let d = dist[[i, j]];
                if !d.is_finite() {
                    return Err(Error::NonFiniteDistance { i, j });
                }
                if d < 0.0 {
                    return Err(Error::NegativeDistance { i, j, value: d });
                }
            }
        }
        for i in 0..n {
            if dist[[i, i]] != 0.0 {
                return Err(Error::NonzeroDiagonal {
                    i,
                    value: dist[[i, i]],
                });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if dist[[i, j]] != dist[[j, i]] {
                    return Err(Error::AsymmetricMetric {
                        i,
                        j,
                        forward: dist[[i, j]],
                        backward: dist[[j, i]],
                    });
                }
                if dist[[i, j]] == 0.0 {
                    return Err(Error::ZeroDistanceDistinctPoints { i, j });
                }
            }
        }
        // Slack proportional to the diameter absorbs rounding in distances
        // that were themselves computed (e.g. Euclidean embeddings).
        let diameter = dist.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-12 * (1.0 + diameter);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let via = dist[[i, j]] + dist[[j, k]];
                    if dist[[i, k]] > via + tol {
                        return Err(Error::TriangleViolation {
                            i,
                            j,
                            k,
                            direct: dist[[i, k]],
                            via,
                        });
                    }
                }
            }
        }
        Ok(MetricSpace { dist })
    }

    /// The 0/1 discrete metric on `n` points.
    pub fn discrete(n: usize) -> Self {
        let dist = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 });
        MetricSpace { dist }
    }

    /// Points on the real line at the given coordinates.
    pub fn line(coords: &[f64]) -> Result<Self> {
        let n = coords.len();
        let dist = Array2::from_shape_fn((n, n), |(i, j)| (coords[i] - coords[j]).abs());
        MetricSpace::new(dist)
    }

    pub fn len(&self) -> usize {
        self.dist.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.nrows() == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[[i, j]]
    }

    pub fn dist_matrix(&self) -> ArrayView2<'_, f64> {
        self.dist.view()
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// The same point set with every distance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        MetricSpace::new(&self.dist * factor)
    }
}

/// A probability distribution over the points of a finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    mass: Array1<f64>,
}

impl Distribution {
    /// Validates nonnegativity and normalization (sum within 1e-12 of 1).
    ///
    /// The mass vector is stored as given; it is never renormalized, so
    /// serialization round-trips bit for bit.
    pub fn new(mass: Array1<f64>) -> Result<Self> {
        for (index, &value) in mass.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteMass { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeMass { index, value });
            }
        }
        let sum: f64 = mass.sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::UnnormalizedMass {
                sum,
                tolerance: MASS_TOLERANCE,
            });
        }
        Ok(Distribution { mass })
    }

    /// Normalizes arbitrary nonnegative weights. Used by solvers whose
    /// output is nonnegative up to rounding: entries in `[-1e-12, 0)` are
    /// clamped to zero before normalizing.
    pub fn from_weights(weights: Array1<f64>) -> Result<Self> {
        let mut mass = weights;
        for (index, value) in mass.iter_mut().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteMass { index });
            }
            if *value < 0.0 {
                if *value < -1e-12 {
                    return Err(Error::NegativeMass {
                        index,
                        value: *value,
                    });
                }
                *value = 0.0;
            }
        }
        let sum: f64 = mass.sum();
        if sum <= 0.0 {
            return Err(Error::UnnormalizedMass {
                sum,
                tolerance: MASS_TOLERANCE,
            });
        }
        mass /= sum;
        Ok(Distribution { mass })
    }

    pub fn uniform(n: usize) -> Self {
        Distribution {
            mass: Array1::from_elem(n, 1.0 / n as f64),
        }
    }

    /// All mass on a single point.
    pub fn dirac(n: usize, point: usize) -> Self {
        let mut mass = Array1::zeros(n);
        mass[point] = 1.0;
        Distribution { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn as_array(&self) -> ArrayView1<'_, f64> {
        self.mass.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.mass.as_slice().expect("contiguous mass vector")
    }
}

/// An optimal transport plan together with its cost.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub distance: f64,
    pub plan: Array2<f64>,
}

/// Exact 1-Wasserstein (Kantorovich) distance between `p` and `q` under the
/// ground metric of `space`, with the optimal coupling.
pub fn wasserstein(
    space: &MetricSpace,
    p: &Distribution,
    q: &Distribution,
) -> Result<TransportResult> {
    if p.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            got: p.len(),
        });
    }
    if q.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            got: q.len(),
        });
    }
    transport(space, p.as_slice(), q.as_slice())
}

/// Total variation divergence, with the `(1/2) * L1` normalization under
/// which it coincides with the Wasserstein distance for the 0/1 metric.
pub fn tv_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let sum: f64 = p
        .as_array()
        .iter()
        .zip(q.as_array().iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(0.5 * sum)
}

/// Exact Lipschitz semi-norm of a real-valued function on a finite space:
/// the maximum of |f(x) - f(y)| / d(x, y) over ordered pairs.
pub fn lipschitz_seminorm(space: &MetricSpace, f: ArrayView1<'_, f64>) -> f64 {
    assert_eq!(
        f.len(),
        space.len(),
        "function values must match the point count"
    );
    seminorm_by(space.len(), |i, j| space.dist(i, j), |i| f[i])
}

/// Lipschitz semi-norm over an arbitrary index set with an on-the-fly
/// distance. Product metrics (state x action, state x action x state) are
/// handled through this without ever materializing the product space.
pub fn seminorm_by(
    n: usize,
    dist: impl Fn(usize, usize) -> f64,
    value: impl Fn(usize) -> f64,
) -> f64 {
    let mut best = 0.0f64;
    for i in 0..n {
        let fi = value(i);
        for j in (i + 1)..n {
            let d = dist(i, j);
            if d > 0.0 {
                let ratio = (fi - value(j)).abs() / d;
                if ratio > best {
                    best = ratio;
                }
            }
        }
    }
    best
}

/// Exact smallest Lipschitz constant of a Markov kernel: rows of `kernel`
/// are distributions over `range`, indexed by the points of `domain`, and
/// the row distance is measured in Wasserstein distance.
pub fn kernel_lipschitz(
    domain: &MetricSpace,
    range: &MetricSpace,
    kernel: ArrayView2<'_, f64>,
) -> Result<f64> {
    if kernel.nrows() != domain.len() || kernel.ncols() != range.len() {
        return Err(Error::ShapeMismatch {
            what: "kernel",
            expected: vec![domain.len(), range.len()],
            got: vec![kernel.nrows(), kernel.ncols()],
        });
    }
    kernel_lipschitz_by(kernel.nrows(), |i, j| domain.dist(i, j), range, kernel)
}

/// As [`kernel_lipschitz`] but with an on-the-fly domain distance, for
/// kernels indexed by product spaces.
pub fn kernel_lipschitz_by(
    n_domain: usize,
    dist: impl Fn(usize, usize) -> f64,
    range: &MetricSpace,
    kernel: ArrayView2<'_, f64>,
) -> Result<f64> {
    let mut best = 0.0f64;
    for i in 0..n_domain {
        let row_i = kernel.row(i);
        for j in (i + 1)..n_domain {
            let d = dist(i, j);
            if d > 0.0 {
                let w = transport_slices(
                    range,
                    row_i.as_slice().expect("contiguous kernel row"),
                    kernel.row(j).as_slice().expect("contiguous kernel row"),
                )?;
                let ratio = w / d;
                if ratio > best {
                    best = ratio;
                }
            }
        }
    }
    Ok(best)
}

/// Transport distance between two already-validated mass slices.
/// Internal fast path that skips `Distribution` construction.
pub(crate) fn transport_slices(space: &MetricSpace, p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(transport(space, p, q)?.distance)
}

/// McShane extension: turns arbitrary values `raw` into a 1-Lipschitz
/// function via `f(x) = min_y (raw(y) + d(x, y))`. Valid for any input
/// because the metric satisfies the triangle inequality.
pub fn smooth_to_lipschitz(space: &MetricSpace, raw: &[f64]) -> Array1<f64> {
    assert_eq!(raw.len(), space.len());
    let n = space.len();
    Array1::from_shape_fn(n, |x| {
        (0..n)
            .map(|y| raw[y] + space.dist(x, y))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Successive-shortest-path min-cost flow on the complete bipartite residual
/// network. Sources carry `p`, sinks carry `q`; arcs cost `space.dist`.
///
/// Each augmentation zeroes a remaining supply, a remaining demand, or a
/// residual backward arc exactly (the bottleneck is subtracted from itself),
/// so termination does not depend on float drift. Potentials keep reduced
/// costs nonnegative, which makes the Dijkstra scans valid.
fn transport(space: &MetricSpace, p: &[f64], q: &[f64]) -> Result<TransportResult> {
    let n = space.len();
    let mut supply = p.to_vec();
    let mut demand = q.to_vec();
    let mut plan = Array2::<f64>::zeros((n, n));
    // node layout: 0..n sources, n..2n sinks
    let total = 2 * n;
    let mut potential = vec![0.0f64; total];

    // Masses below this are treated as exhausted: the two marginals both
    // sum to one only up to rounding, so their residues can differ by a few
    // ulps after the exact bottleneck subtractions.
    const EXHAUSTED: f64 = 1e-15;

    let max_augmentations = 50 * total * total + 64;
    let mut augmentations = 0usize;
    loop {
        let any_supply = supply.iter().any(|&s| s > EXHAUSTED);
        if !any_supply {
            break;
        }
        augmentations += 1;
        if augmentations > max_augmentations {
            return Err(Error::TransportFailure {
                context: "augmentation budget exceeded",
            });
        }

        // Dijkstra over reduced costs from all surplus sources.
        let mut dist = vec![f64::INFINITY; total];
        let mut parent = vec![usize::MAX; total];
        let mut done = vec![false; total];
        for (i, &s) in supply.iter().enumerate() {
            if s > EXHAUSTED {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..total {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && demand[u - n] > EXHAUSTED {
                target = u;
                break;
            }
            if u < n {
                // forward arcs source u -> every sink
                for j in 0..n {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = space.dist(u, j) + potential[u] - potential[v];
                    let cand = dist[u] + rc.max(0.0);
                    if cand < dist[v] {
                        dist[v] = cand;
                        parent[v] = u;
                    }
                }
            } else {
                // backward arcs sink u -> sources with positive flow
                let j = u - n;
                for i in 0..n {
                    if done[i] || plan[[i, j]] <= 0.0 {
                        continue;
                    }
                    let rc = -space.dist(i, j) + potential[u] - potential[i];
                    let cand = dist[u] + rc.max(0.0);
                    if cand < dist[i] {
                        dist[i] = cand;
                        parent[i] = u;
                    }
                }
            }
        }
        if target == usize::MAX {
            return Err(Error::TransportFailure {
                context: "no augmenting path (unbalanced marginals?)",
            });
        }

        // Reconstruct the path and find the bottleneck.
        let d_target = dist[target];
        let mut path = vec![target];
        let mut node = target;
        while parent[node] != usize::MAX {
            node = parent[node];
            path.push(node);
        }
        path.reverse();
        let start = path[0];
        let mut delta = supply[start].min(demand[target - n]);
        for w in path.windows(2) {
            if w[0] >= n {
                // backward arc: limited by the flow being cancelled
                delta = delta.min(plan[[w[1], w[0] - n]]);
            }
        }

        for w in path.windows(2) {
            if w[0] < n {
                plan[[w[0], w[1] - n]] += delta;
            } else {
                let flow = &mut plan[[w[1], w[0] - n]];
                *flow = if *flow <= delta { 0.0 } else { *flow - delta };
            }
        }
        supply[start] = if supply[start] <= delta {
            0.0
        } else {
            supply[start] - delta
        };
        let t = target - n;
        demand[t] = if demand[t] <= delta {
            0.0
        } else {
            demand[t] - delta
        };

        // Johnson potential update keeps reduced costs nonnegative; nodes
        // beyond the target (including unreached ones) are capped at the
        // target distance.
        for v in 0..total {
            potential[v] += dist[v].min(d_target);
        }
    }

    let mut distance = 0.0;
    for i in 0..n {
        for j in 0..n {
            let f = plan[[i, j]];
            if f > 0.0 {
                distance += f * space.dist(i, j);
            }
        }
    }
    Ok(TransportResult { distance, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn line_013() -> MetricSpace {
        MetricSpace::line(&[0.0, 1.0, 3.0]).unwrap()
    }

    #[test]
    fn single_point_space_is_valid() {
        let space = MetricSpace::new(array![[0.0]]).unwrap();
        assert_eq!(space.len(), 1);
    }

    #[test]
    fn discrete_two_point_space_is_valid() {
        assert!(MetricSpace::new(array![[0.0, 1.0], [1.0, 0.0]]).is_ok());
    }

    #[test]
    fn asymmetry_is_rejected_with_indices() {
        let err = MetricSpace::new(array![[0.0, 1.0], [2.0, 0.0]]).unwrap_err();
        match err {
            Error::AsymmetricMetric { i, j, .. } => {
                assert_eq!((i, j), (0, 1));
            }
            other => panic!("expected AsymmetricMetric, got {other:?}"),
        }
    }

    #[test]
    fn negative_zero_and_triangle_violations_are_rejected() {
        assert!(matches!(
            MetricSpace::new(array![[0.0, -1.0], [-1.0, 0.0]]),
            Err(Error::NegativeDistance { .. })
        ));
        assert!(matches!(
            MetricSpace::new(array![[0.0, 0.0], [0.0, 0.0]]),
            Err(Error::ZeroDistanceDistinctPoints { i: 0, j: 1 })
        ));
        assert!(matches!(
            MetricSpace::new(array![[0.5, 1.0], [1.0, 0.0]]),
            Err(Error::NonzeroDiagonal { i: 0, .. })
        ));
        // d(0,2) = 10 > d(0,1) + d(1,2) = 2
        let err = MetricSpace::new(array![
            [0.0, 1.0, 10.0],
            [1.0, 0.0, 1.0],
            [10.0, 1.0, 0.0]
        ])
        .unwrap_err();
        assert!(matches!(err, Error::TriangleViolation { .. }));
    }

    #[test]
    fn identical_measures_transport_along_the_diagonal() {
        let space = line_013();
        let p = Distribution::new(array![0.2, 0.3, 0.5]).unwrap();
        let result = wasserstein(&space, &p, &p).unwrap();
        assert!(result.distance.abs() <= 1e-15);
        for i in 0..3 {
            assert!((result.plan[[i, i]] - p.mass(i)).abs() <= 1e-15);
        }
    }

    #[test]
    fn discrete_metric_swap_costs_one() {
        let space = MetricSpace::discrete(2);
        let p = Distribution::new(array![1.0, 0.0]).unwrap();
        let q = Distribution::new(array![0.0, 1.0]).unwrap();
        let result = wasserstein(&space, &p, &q).unwrap();
        assert!((result.distance - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn line_space_matches_cdf_oracle() {
        // 1-D oracle: integral of |F_p - F_q| over the embedding gives 1.5.
        let space = line_013();
        let p = Distribution::new(array![0.5, 0.5, 0.0]).unwrap();
        let q = Distribution::new(array![0.0, 0.5, 0.5]).unwrap();
        let result = wasserstein(&space, &p, &q).unwrap();
        assert!((result.distance - 1.5).abs() <= 1e-9);
    }

    #[test]
    fn plan_marginals_match_inputs() {
        let space = line_013();
        let p = Distribution::new(array![0.5, 0.5, 0.0]).unwrap();
        let q = Distribution::new(array![0.0, 0.5, 0.5]).unwrap();
        let result = wasserstein(&space, &p, &q).unwrap();
        for i in 0..3 {
            let row: f64 = result.plan.row(i).sum();
            let col: f64 = result.plan.column(i).sum();
            assert!((row - p.mass(i)).abs() <= 1e-9);
            assert!((col - q.mass(i)).abs() <= 1e-9);
        }
        let recost: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| result.plan[[i, j]] * space.dist(i, j))
            .sum();
        assert!((recost - result.distance).abs() <= 1e-9);
    }

    #[test]
    fn wasserstein_rejects_mismatched_dimensions() {
        let space = MetricSpace::discrete(2);
        let p = Distribution::new(array![1.0, 0.0]).unwrap();
        let q = Distribution::uniform(3);
        assert!(matches!(
            wasserstein(&space, &p, &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tv_examples() {
        let p = Distribution::new(array![0.5, 0.5]).unwrap();
        assert_eq!(tv_divergence(&p, &p).unwrap(), 0.0);
        let a = Distribution::new(array![1.0, 0.0]).unwrap();
        let b = Distribution::new(array![0.0, 1.0]).unwrap();
        assert_eq!(tv_divergence(&a, &b).unwrap(), 1.0);
        let c = Distribution::new(array![0.25, 0.75]).unwrap();
        assert!((tv_divergence(&p, &c).unwrap() - 0.25).abs() <= 1e-15);
        let d = Distribution::uniform(3);
        assert!(matches!(
            tv_divergence(&p, &d),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn seminorm_examples() {
        let space = line_013();
        assert_eq!(
            lipschitz_seminorm(&space, array![5.0, 5.0, 5.0].view()),
            0.0
        );
        assert!(
            (lipschitz_seminorm(&space, array![0.0, 1.0, 3.0].view()) - 1.0).abs() <= 1e-15
        );
        // pair (0,1) realizes |0-2|/1 = 2
        assert!(
            (lipschitz_seminorm(&space, array![0.0, 2.0, 2.0].view()) - 2.0).abs() <= 1e-15
        );
        let single = MetricSpace::new(array![[0.0]]).unwrap();
        assert_eq!(lipschitz_seminorm(&single, array![7.0].view()), 0.0);
    }

    #[test]
    fn kernel_lipschitz_examples() {
        let d2 = MetricSpace::discrete(2);
        let constant = array![[0.3, 0.7], [0.3, 0.7]];
        assert_eq!(kernel_lipschitz(&d2, &d2, constant.view()).unwrap(), 0.0);

        let swap = array![[1.0, 0.0], [0.0, 1.0]];
        assert!((kernel_lipschitz(&d2, &d2, swap.view()).unwrap() - 1.0).abs() <= 1e-12);

        // domain {0, 2} on a line, W between rows is 0.5, distance 2
        let domain = MetricSpace::line(&[0.0, 2.0]).unwrap();
        let kernel = array![[1.0, 0.0], [0.5, 0.5]];
        let got = kernel_lipschitz(&domain, &d2, kernel.view()).unwrap();
        assert!((got - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn smoothing_produces_one_lipschitz_functions() {
        let space = line_013();
        let f = smooth_to_lipschitz(&space, &[3.0, -4.0, 10.0]);
        assert!(lipschitz_seminorm(&space, f.view()) <= 1.0 + 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(array![0.5, 0.5]).is_ok());
        assert!(matches!(
            Distribution::new(array![0.6, 0.5]),
            Err(Error::UnnormalizedMass { .. })
        ));
        assert!(matches!(
            Distribution::new(array![-0.1, 1.1]),
            Err(Error::NegativeMass { .. })
        ));
        let d = Distribution::from_weights(array![2.0, 2.0]).unwrap();
        assert_eq!(d.mass(0), 0.5);
    }
}
