//! Legendre-Gauss-Lobatto grids: nodes, quadrature weights, spectral
//! differentiation matrix, and barycentric interpolation.
//!
//! The N+1 LGL nodes are the roots of (1-x²)P'_N(x): the endpoints ±1 plus
//! the N-1 interior zeros of the Legendre polynomial derivative. Quadrature
//! on these nodes is exact for polynomials of degree ≤ 2N-1, and the
//! differentiation matrix maps nodal values of a function to nodal values of
//! the derivative of its degree-N interpolant.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CollocationError {
    #[error("polynomial order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("nodes do not form an LGL grid: {0}")]
    InconsistentGrid(String),
    #[error("grid has duplicate or non-increasing nodes near index {0}")]
    SingularGrid(usize),
    #[error("interpolation point {0} is outside [-1, 1]")]
    Extrapolation(f64),
    #[error("expected {expected} nodal values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Evaluate the Legendre polynomial P_n(x) by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_with_derivative(n, x).0
}

/// Evaluate P_n(x) and P'_n(x).
///
/// The derivative comes from (1-x²)P'_n = n(P_{n-1} - x P_n), with the
/// endpoint limit P'_n(±1) = (±1)^{n-1} n(n+1)/2.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let denom = 1.0 - x * x;
    let dp = if denom.abs() < 1e-14 {
        let sign = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 - 1) };
        sign * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p_prev - x * p) / denom
    };
    (p, dp)
}

/// Legendre-Gauss-Lobatto nodes for polynomial order `n`: the N+1 points
/// -1 = x_0 < x_1 < … < x_N = 1 where the interior points are roots of P'_N.
///
/// Interior roots are found by Newton iteration seeded with Chebyshev-Lobatto
/// points -cos(πj/N), converged to 1e-14 with a 100-iteration cap.
pub fn lgl_nodes(n: usize) -> Result<Vec<f64>, CollocationError> {
    if n < 1 {
        return Err(CollocationError::InvalidOrder(n));
    }
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    for j in 1..n {
        let mut x = -(std::f64::consts::PI * j as f64 / n as f64).cos();
        for _ in 0..100 {
            // Newton on P'_N; P''_N from the Legendre ODE.
            let (p, dp) = legendre_with_derivative(n, x);
            let ddp = (2.0 * x * dp - (n * (n + 1)) as f64 * p) / (1.0 - x * x);
            let step = dp / ddp;
            x -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        nodes[j] = x;
    }
    // Symmetrize so x_j = -x_{N-j} holds to the last bit.
    for j in 0..=(n / 2) {
        let avg = 0.5 * (nodes[j] - nodes[n - j]);
        nodes[j] = avg;
        nodes[n - j] = -avg;
    }
    if n % 2 == 0 {
        nodes[n / 2] = 0.0;
    }
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    Ok(nodes)
}

fn validate_lgl(nodes: &[f64]) -> Result<usize, CollocationError> {
    if nodes.len() < 2 {
        return Err(CollocationError::InconsistentGrid(format!(
            "need at least 2 nodes, got {}",
            nodes.len()
        )));
    }
    let n = nodes.len() - 1;
    for j in 0..n {
        if nodes[j + 1] <= nodes[j] {
            return Err(CollocationError::SingularGrid(j));
        }
    }
    if nodes[0] != -1.0 || nodes[n] != 1.0 {
        return Err(CollocationError::InconsistentGrid(
            "endpoints must be exactly -1 and +1".into(),
        ));
    }
    for (j, &x) in nodes.iter().enumerate().take(n).skip(1) {
        let (_, dp) = legendre_with_derivative(n, x);
        // P'_N scale grows with N; tolerance is relative to that scale.
        let scale = (n * (n + 1)) as f64;
        if dp.abs() > 1e-8 * scale {
            return Err(CollocationError::InconsistentGrid(format!(
                "interior node {j} is not a root of the Legendre derivative (residual {dp:.3e})"
            )));
        }
    }
    Ok(n)
}

/// Gauss-Lobatto quadrature weights w_j = 2 / (N(N+1) [P_N(x_j)]²).
///
/// Σ w_j f(x_j) integrates polynomials of degree ≤ 2N-1 exactly over [-1, 1].
pub fn lgl_weights(nodes: &[f64]) -> Result<Vec<f64>, CollocationError> {
    let n = validate_lgl(nodes)?;
    let denom = (n * (n + 1)) as f64;
    Ok(nodes
        .iter()
        .map(|&x| {
            let p = legendre(n, x);
            2.0 / (denom * p * p)
        })
        .collect())
}

/// Spectral differentiation matrix D for an LGL grid: (D·f)_k = p'(x_k)
/// where p is the degree-N interpolant of the nodal values f.
///
/// Off-diagonal entries are P_N(x_k) / (P_N(x_j)(x_k - x_j)); the corner
/// entries are ∓N(N+1)/4 and the remaining diagonal is zero.
pub fn lgl_diff_matrix(nodes: &[f64]) -> Result<DMatrix<f64>, CollocationError> {
    let n = validate_lgl(nodes)?;
    let p: Vec<f64> = nodes.iter().map(|&x| legendre(n, x)).collect();
    let corner = (n * (n + 1)) as f64 / 4.0;
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        for j in 0..=n {
            if k == j {
                d[(k, j)] = if k == 0 {
                    -corner
                } else if k == n {
                    corner
                } else {
                    0.0
                };
            } else {
                d[(k, j)] = p[k] / (p[j] * (nodes[k] - nodes[j]));
            }
        }
    }
    Ok(d)
}

/// An immutable LGL grid: order, nodes, quadrature weights, differentiation
/// matrix, and barycentric interpolation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diff_matrix: DMatrix<f64>,
    barycentric: Vec<f64>,
}

impl CollocationGrid {
    pub fn new(order: usize) -> Result<Self, CollocationError> {
        let nodes = lgl_nodes(order)?;
        let weights = lgl_weights(&nodes)?;
        let diff_matrix = lgl_diff_matrix(&nodes)?;
        // For Gauss-Lobatto points the barycentric weights are proportional
        // to (-1)^j sqrt(w_j), which stays well-scaled at high order.
        let barycentric = weights
            .iter()
            .enumerate()
            .map(|(j, &w)| if j % 2 == 0 { w.sqrt() } else { -w.sqrt() })
            .collect();
        Ok(Self {
            order,
            nodes,
            weights,
            diff_matrix,
            barycentric,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of grid points, N+1.
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff_matrix
    }

    /// Barycentric evaluation at `tau` of the polynomial interpolating
    /// `nodal_values` on the grid.
    pub fn interpolate(&self, nodal_values: &[f64], tau: f64) -> Result<f64, CollocationError> {
        if nodal_values.len() != self.len() {
            return Err(CollocationError::DimensionMismatch {
                expected: self.len(),
                got: nodal_values.len(),
            });
        }
        if !(-1.0..=1.0).contains(&tau) {
            return Err(CollocationError::Extrapolation(tau));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.len() {
            let diff = tau - self.nodes[j];
            if diff == 0.0 {
                return Ok(nodal_values[j]);
            }
            let c = self.barycentric[j] / diff;
            num += c * nodal_values[j];
            den += c;
        }
        Ok(num / den)
    }

    /// Σ w_j f_j, the LGL quadrature of nodal values over [-1, 1].
    pub fn quadrature(&self, nodal_values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(nodal_values)
            .map(|(w, f)| w * f)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Bracketed bisection root-finder on P'_N, independent of the Newton
    /// path used by `lgl_nodes`.
    fn interior_roots_by_bisection(n: usize) -> Vec<f64> {
        let dp = |x: f64| legendre_with_derivative(n, x).1;
        let samples = 20 * n;
        let mut roots = Vec::new();
        let mut prev_x = -1.0 + 1e-9;
        let mut prev_f = dp(prev_x);
        for i in 1..=samples {
            let x = -1.0 + 2.0 * i as f64 / samples as f64 - 1e-9;
            let f = dp(x);
            if prev_f == 0.0 {
                roots.push(prev_x);
            } else if prev_f * f < 0.0 {
                let (mut a, mut b) = (prev_x, x);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if dp(a) * dp(m) <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev_x = x;
            prev_f = f;
        }
        roots
    }

    #[test]
    fn nodes_order_one_is_endpoints() {
        assert_eq!(lgl_nodes(1).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn nodes_order_two_has_zero() {
        let nodes = lgl_nodes(2).unwrap();
        assert_eq!(nodes[0], -1.0);
        assert_relative_eq!(nodes[1], 0.0, epsilon = 1e-15);
        assert_eq!(nodes[2], 1.0);
    }

    #[test]
    fn nodes_order_four_matches_bisection_oracle() {
        // Interior nodes of N=4 are ±sqrt(3/7) and 0.
        let nodes = lgl_nodes(4).unwrap();
        let expected = (3.0f64 / 7.0).sqrt();
        assert_relative_eq!(nodes[1], -expected, epsilon = 1e-13);
        assert_relative_eq!(nodes[2], 0.0, epsilon = 1e-13);
        assert_relative_eq!(nodes[3], expected, epsilon = 1e-13);

        let oracle = interior_roots_by_bisection(4);
        assert_eq!(oracle.len(), 3);
        for (a, b) in nodes[1..4].iter().zip(&oracle) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn nodes_match_bisection_oracle_various_orders() {
        for n in [3, 5, 8, 13] {
            let nodes = lgl_nodes(n).unwrap();
            let oracle = interior_roots_by_bisection(n);
            assert_eq!(oracle.len(), n - 1, "order {n}");
            for (a, b) in nodes[1..n].iter().zip(&oracle) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn invalid_order_rejected() {
        assert_eq!(lgl_nodes(0).unwrap_err(), CollocationError::InvalidOrder(0));
    }

    #[test]
    fn weights_order_one_is_trapezoid() {
        let w = lgl_weights(&[-1.0, 1.0]).unwrap();
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_order_two_exact_values() {
        let w = lgl_weights(&lgl_nodes(2).unwrap()).unwrap();
        assert_relative_eq!(w[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(w[1], 4.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(w[2], 1.0 / 3.0, epsilon = 1e-14);
        // Quadrature-exactness oracle: Σ w_j x_j² = ∫ x² dx = 2/3.
        let nodes = lgl_nodes(2).unwrap();
        let q: f64 = nodes.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert_relative_eq!(q, 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=40 {
            let w = lgl_weights(&lgl_nodes(n).unwrap()).unwrap();
            let sum: f64 = w.iter().sum();
            assert_relative_eq!(sum, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn weights_reject_non_lgl_nodes() {
        let err = lgl_weights(&[-1.0, 0.3, 1.0]).unwrap_err();
        assert!(matches!(err, CollocationError::InconsistentGrid(_)));
    }

    #[test]
    fn quadrature_exact_to_degree_2n_minus_1() {
        for n in 2..=30 {
            let nodes = lgl_nodes(n).unwrap();
            let w = lgl_weights(&nodes).unwrap();
            for k in 0..=(2 * n - 1) {
                let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                let q: f64 = nodes
                    .iter()
                    .zip(&w)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert!(
                    (q - exact).abs() < 1e-10,
                    "order {n} degree {k}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn diff_matrix_order_one() {
        let d = lgl_diff_matrix(&[-1.0, 1.0]).unwrap();
        assert_relative_eq!(d[(0, 0)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(d[(0, 1)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(d[(1, 0)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(d[(1, 1)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn diff_matrix_corner_entries() {
        let d = lgl_diff_matrix(&lgl_nodes(4).unwrap()).unwrap();
        assert_relative_eq!(d[(0, 0)], -5.0, epsilon = 1e-12);
        assert_relative_eq!(d[(4, 4)], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn diff_matrix_corner_against_cardinal_finite_difference() {
        // Cross-check D[0][0] = derivative of the first Lagrange cardinal
        // function at x_0, via central differences of the cardinal itself.
        let grid = CollocationGrid::new(4).unwrap();
        let mut cardinal = vec![0.0; 5];
        cardinal[0] = 1.0;
        let h = 1e-6;
        // One-sided at the left endpoint: use interior offsets only.
        let f0 = grid.interpolate(&cardinal, -1.0).unwrap();
        let f1 = grid.interpolate(&cardinal, -1.0 + h).unwrap();
        let f2 = grid.interpolate(&cardinal, -1.0 + 2.0 * h).unwrap();
        let deriv = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
        assert_relative_eq!(deriv, -5.0, epsilon = 1e-4);
    }

    #[test]
    fn diff_matrix_kills_constants_and_reproduces_identity() {
        for n in [1, 2, 5, 12, 30] {
            let nodes = lgl_nodes(n).unwrap();
            let d = lgl_diff_matrix(&nodes).unwrap();
            let ones = nalgebra::DVector::from_element(n + 1, 1.0);
            let x = nalgebra::DVector::from_column_slice(&nodes);
            let dc = &d * &ones;
            let dx = &d * &x;
            for k in 0..=n {
                assert!(dc[k].abs() < 1e-10, "row sum at order {n}, row {k}");
                assert!((dx[k] - 1.0).abs() < 1e-10, "identity at order {n}, row {k}");
            }
        }
    }

    #[test]
    fn diff_matrix_exact_on_monomials() {
        for n in 2..=30 {
            let nodes = lgl_nodes(n).unwrap();
            let d = lgl_diff_matrix(&nodes).unwrap();
            for k in 0..=n {
                let f = nalgebra::DVector::from_iterator(
                    n + 1,
                    nodes.iter().map(|x| x.powi(k as i32)),
                );
                let df = &d * &f;
                for (j, &x) in nodes.iter().enumerate() {
                    let exact = if k == 0 {
                        0.0
                    } else {
                        k as f64 * x.powi(k as i32 - 1)
                    };
                    assert!(
                        (df[j] - exact).abs() < 1e-8,
                        "order {n}, degree {k}, node {j}: {} vs {exact}",
                        df[j]
                    );
                }
            }
        }
    }

    #[test]
    fn diff_matrix_rejects_duplicate_nodes() {
        let err = lgl_diff_matrix(&[-1.0, 0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, CollocationError::SingularGrid(_)));
    }

    #[test]
    fn grid_symmetry() {
        for n in [2, 5, 10, 25] {
            let grid = CollocationGrid::new(n).unwrap();
            let d = grid.diff_matrix();
            for j in 0..=n {
                assert_relative_eq!(grid.nodes()[j], -grid.nodes()[n - j], epsilon = 1e-14);
                assert_relative_eq!(
                    grid.weights()[j],
                    grid.weights()[n - j],
                    epsilon = 1e-13
                );
                for k in 0..=n {
                    assert_relative_eq!(
                        d[(j, k)],
                        -d[(n - j, n - k)],
                        epsilon = 1e-9,
                        max_relative = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn interpolate_cardinal_property() {
        let grid = CollocationGrid::new(7).unwrap();
        let values: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 2.0).collect();
        for (j, &x) in grid.nodes().iter().enumerate() {
            assert_eq!(grid.interpolate(&values, x).unwrap(), values[j]);
        }
    }

    #[test]
    fn interpolate_identity_and_cubic() {
        let grid = CollocationGrid::new(10).unwrap();
        let nodes: Vec<f64> = grid.nodes().to_vec();
        for tau in [-1.0, -0.73, -0.2, 0.11, 0.5, 0.98, 1.0] {
            let v = grid.interpolate(&nodes, tau).unwrap();
            assert_relative_eq!(v, tau, epsilon = 1e-13);
        }
        let cubed: Vec<f64> = nodes.iter().map(|x| x * x * x).collect();
        let v = grid.interpolate(&cubed, 0.5).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
    }

    #[test]
    fn interpolate_rejects_extrapolation_and_bad_length() {
        let grid = CollocationGrid::new(3).unwrap();
        assert!(matches!(
            grid.interpolate(&[0.0; 4], 1.5),
            Err(CollocationError::Extrapolation(_))
        ));
        assert!(matches!(
            grid.interpolate(&[0.0; 3], 0.5),
            Err(CollocationError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interpolation_stable_at_order_fifty() {
        let grid = CollocationGrid::new(50).unwrap();
        // Runge-prone target on equispaced grids; LGL + barycentric stays
        // bounded and converges at the rate its poles at ±i/5 allow
        // (about 5e-5 at order 50).
        let f = |x: f64| 1.0 / (1.0 + 25.0 * x * x);
        let values: Vec<f64> = grid.nodes().iter().map(|&x| f(x)).collect();
        for i in 0..=200 {
            let tau = -1.0 + i as f64 / 100.0;
            let v = grid.interpolate(&values, tau).unwrap();
            assert!((v - f(tau)).abs() < 5e-4, "tau {tau}: {v} vs {}", f(tau));
        }
    }
}
