//! Active-set solver for the SQP quadratic subproblem.
//!
//! Solves `min ½pᵀHp + gᵀp` subject to equality rows `A p = b`, two-sided
//! general inequalities `lo ≤ C p ≤ hi`, and variable bounds `l ≤ p ≤ u`,
//! with H symmetric positive definite.
//!
//! The method keeps equalities in the working set permanently and equilibrates
//! inequalities dual-style: solve the equality-constrained subproblem for the
//! current working set via a Schur complement in the H⁻¹ metric, drop working
//! rows with negative multipliers, add the most violated inactive row, and
//! repeat. The Schur factor grows incrementally on adds and is rebuilt on
//! drops. A seed working set warm-starts the loop across MPC samples.

use nalgebra::{DMatrix, DVector};

use super::dense;

/// One face of a box or two-sided inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintId {
    BoundLower(usize),
    BoundUpper(usize),
    IneqLower(usize),
    IneqUpper(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    Infeasible,
    IterationLimit,
}

pub struct QpInput<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub gradient: &'a DVector<f64>,
    pub eq_matrix: &'a DMatrix<f64>,
    pub eq_rhs: &'a DVector<f64>,
    pub ineq_matrix: Option<&'a DMatrix<f64>>,
    pub ineq_lower: &'a DVector<f64>,
    pub ineq_upper: &'a DVector<f64>,
    pub lower: &'a DVector<f64>,
    pub upper: &'a DVector<f64>,
}

pub struct QpSolution {
    pub step: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    /// Active inequality faces with their (nonnegative) multipliers.
    pub active: Vec<(ConstraintId, f64)>,
    pub status: QpStatus,
    pub iterations: usize,
}

struct ActiveRow {
    id: ConstraintId,
    /// +1 for lower faces (`row·p ≥ rhs`), -1 for upper faces.
    sign: f64,
    bound: f64,
    /// H⁻¹ rowᵀ for the unsigned row.
    hv: DVector<f64>,
    /// A_eq · hv.
    a_hv: DVector<f64>,
    /// row · H⁻¹ g.
    g_hv: f64,
}

/// Incrementally grown Cholesky factor of the working-set Schur matrix.
struct SchurFactor {
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
    size: usize,
}

impl SchurFactor {
    fn with_capacity(cap: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(cap, cap),
            factor: DMatrix::zeros(cap, cap),
            size: 0,
        }
    }

    fn init(&mut self, m: &DMatrix<f64>) -> bool {
        let k = m.nrows();
        self.matrix.view_mut((0, 0), (k, k)).copy_from(m);
        self.size = k;
        if k == 0 {
            return true;
        }
        match dense::cholesky_factor(&m.clone_owned()) {
            Some(l) => {
                self.factor.view_mut((0, 0), (k, k)).copy_from(&l);
                true
            }
            None => false,
        }
    }

    /// Append a row/column; returns false (leaving the factor unchanged) if
    /// the new row is numerically dependent.
    fn push(&mut self, col: &DVector<f64>, diag: f64) -> bool {
        let k = self.size;
        debug_assert_eq!(col.len(), k);
        let mut x = DMatrix::from_column_slice(k, 1, col.as_slice());
        if k > 0 {
            let l = self.factor.view((0, 0), (k, k)).clone_owned();
            dense::solve_lower_multi(&l, &mut x);
        }
        let d = diag - x.as_slice().iter().map(|v| v * v).sum::<f64>();
        if d <= 1e-11 * diag.abs().max(1.0) {
            return false;
        }
        for i in 0..k {
            self.matrix[(i, k)] = col[i];
            self.matrix[(k, i)] = col[i];
            self.factor[(k, i)] = x[(i, 0)];
        }
        self.matrix[(k, k)] = diag;
        self.factor[(k, k)] = d.sqrt();
        self.size = k + 1;
        true
    }

    /// Remove row `idx` (0-based within the current matrix) and refactor.
    fn remove(&mut self, idx: usize) -> bool {
        let k = self.size;
        let mut m = DMatrix::zeros(k - 1, k - 1);
        let mut ri = 0;
        for i in 0..k {
            if i == idx {
                continue;
            }
            let mut rj = 0;
            for j in 0..k {
                if j == idx {
                    continue;
                }
                m[(ri, rj)] = self.matrix[(i, j)];
                rj += 1;
            }
            ri += 1;
        }
        self.init(&m)
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        if self.size == 0 {
            return DVector::zeros(0);
        }
        let l = self.factor.view((0, 0), (self.size, self.size)).clone_owned();
        dense::solve_cholesky_vec(&l, rhs)
    }
}

pub fn solve(input: &QpInput, seed: &[ConstraintId]) -> QpSolution {
    let n = input.gradient.len();
    let m_e = input.eq_rhs.len();
    let m_i = input.ineq_lower.len();

    // Factor H, escalating a diagonal ridge if needed (damped BFGS should
    // keep H definite; the ridge is a numerical backstop).
    let mut ridge = 0.0;
    let mean_diag = (0..n).map(|i| input.hessian[(i, i)].abs()).sum::<f64>() / n.max(1) as f64;
    let l_h = loop {
        let trial = if ridge == 0.0 {
            dense::cholesky_factor(input.hessian)
        } else {
            let mut h = input.hessian.clone();
            for i in 0..n {
                h[(i, i)] += ridge;
            }
            dense::cholesky_factor(&h)
        };
        match trial {
            Some(l) => break l,
            None => {
                ridge = if ridge == 0.0 {
                    1e-10 * mean_diag.max(1.0)
                } else {
                    ridge * 100.0
                };
                if ridge > 1e6 * mean_diag.max(1.0) {
                    return QpSolution {
                        step: DVector::zeros(n),
                        eq_multipliers: DVector::zeros(m_e),
                        active: Vec::new(),
                        status: QpStatus::Infeasible,
                        iterations: 0,
                    };
                }
            }
        }
    };

    let h_solve = |v: &DVector<f64>| dense::solve_cholesky_vec(&l_h, v);
    let hinv_g = h_solve(input.gradient);

    // S_eq = A H⁻¹ Aᵀ via W = L⁻¹ Aᵀ.
    let s_eq = if m_e > 0 {
        let mut w = input.eq_matrix.transpose();
        dense::solve_lower_multi(&l_h, &mut w);
        w.transpose() * &w
    } else {
        DMatrix::zeros(0, 0)
    };
    let a_hinv_g = if m_e > 0 {
        input.eq_matrix * &hinv_g
    } else {
        DVector::zeros(0)
    };

    let cap = m_e + 2 * n + 2 * m_i + 4;
    let mut schur = SchurFactor::with_capacity(cap.min(m_e + n + 64));
    if !schur.init(&s_eq) {
        // Dependent equality rows; retry with a tiny diagonal lift so the
        // Schur solve stays defined (least-squares-like multipliers).
        let mut lifted = s_eq.clone();
        let lift = 1e-10 * (1.0 + s_eq.diagonal().amax());
        for i in 0..m_e {
            lifted[(i, i)] += lift;
        }
        if !schur.init(&lifted) {
            return QpSolution {
                step: DVector::zeros(n),
                eq_multipliers: DVector::zeros(m_e),
                active: Vec::new(),
                status: QpStatus::Infeasible,
                iterations: 0,
            };
        }
    }

    let mut active: Vec<ActiveRow> = Vec::new();

    let row_vector = |id: ConstraintId| -> (usize, f64, f64) {
        // (row index or var index, sign, bound)
        match id {
            ConstraintId::BoundLower(i) => (i, 1.0, input.lower[i]),
            ConstraintId::BoundUpper(i) => (i, -1.0, input.upper[i]),
            ConstraintId::IneqLower(r) => (r, 1.0, input.ineq_lower[r]),
            ConstraintId::IneqUpper(r) => (r, -1.0, input.ineq_upper[r]),
        }
    };

    let make_row = |id: ConstraintId| -> ActiveRow {
        let (idx, sign, bound) = row_vector(id);
        let (hv, g_hv) = match id {
            ConstraintId::BoundLower(_) | ConstraintId::BoundUpper(_) => {
                let mut e = DVector::zeros(n);
                e[idx] = 1.0;
                (h_solve(&e), hinv_g[idx])
            }
            ConstraintId::IneqLower(_) | ConstraintId::IneqUpper(_) => {
                let row = input.ineq_matrix.expect("ineq rows").row(idx).transpose();
                let g_hv = row.dot(&hinv_g);
                (h_solve(&row), g_hv)
            }
        };
        let a_hv = if m_e > 0 {
            input.eq_matrix * &hv
        } else {
            DVector::zeros(0)
        };
        ActiveRow {
            id,
            sign,
            bound,
            hv,
            a_hv,
            g_hv,
        }
    };

    let row_dot_hv = |id: ConstraintId, hv: &DVector<f64>| -> f64 {
        match id {
            ConstraintId::BoundLower(i) | ConstraintId::BoundUpper(i) => hv[i],
            ConstraintId::IneqLower(r) | ConstraintId::IneqUpper(r) => {
                input.ineq_matrix.expect("ineq rows").row(r).transpose().dot(hv)
            }
        }
    };

    let try_add = |schur: &mut SchurFactor, active: &mut Vec<ActiveRow>, id: ConstraintId| -> bool {
        let candidate = make_row(id);
        let k = m_e + active.len();
        let mut col = DVector::zeros(k);
        for i in 0..m_e {
            col[i] = candidate.sign * candidate.a_hv[i];
        }
        for (j, row) in active.iter().enumerate() {
            col[m_e + j] = candidate.sign * row.sign * row_dot_hv(row.id, &candidate.hv);
        }
        let diag = row_dot_hv(candidate.id, &candidate.hv);
        if !schur.push(&col, diag) {
            return false;
        }
        active.push(candidate);
        true
    };

    // Seed the working set; silently drop invalid or dependent entries.
    for &id in seed {
        let valid = match id {
            ConstraintId::BoundLower(i) => i < n && input.lower[i].is_finite(),
            ConstraintId::BoundUpper(i) => i < n && input.upper[i].is_finite(),
            ConstraintId::IneqLower(r) => r < m_i && input.ineq_lower[r].is_finite(),
            ConstraintId::IneqUpper(r) => r < m_i && input.ineq_upper[r].is_finite(),
        };
        if valid && !active.iter().any(|a| a.id == id) {
            let _ = try_add(&mut schur, &mut active, id);
        }
    }

    let max_iter = 6 * (n + m_e) + 4 * m_i + 100;
    let mut p = DVector::zeros(n);
    let mut lambda = DVector::zeros(m_e);
    let mut last_removed: Option<ConstraintId> = None;
    let mut cycle_count = 0usize;

    for iteration in 0..max_iter {
        // Solve the equality-constrained subproblem for the working set.
        let k = m_e + active.len();
        let mut rhs = DVector::zeros(k);
        for i in 0..m_e {
            rhs[i] = input.eq_rhs[i] + a_hinv_g[i];
        }
        for (j, row) in active.iter().enumerate() {
            rhs[m_e + j] = row.sign * (row.bound + row.g_hv);
        }
        let nu = schur.solve(&rhs);
        for i in 0..m_e {
            lambda[i] = nu[i];
        }
        // p = H⁻¹ (A_eqᵀ λ + Σ μ_j sign_j row_j - g)
        let mut w = -input.gradient.clone();
        if m_e > 0 {
            w += input.eq_matrix.transpose() * lambda.rows(0, m_e).clone_owned();
        }
        for (j, row) in active.iter().enumerate() {
            let coeff = nu[m_e + j] * row.sign;
            match row.id {
                ConstraintId::BoundLower(i) | ConstraintId::BoundUpper(i) => w[i] += coeff,
                ConstraintId::IneqLower(r) | ConstraintId::IneqUpper(r) => {
                    let rowv = input.ineq_matrix.expect("ineq rows").row(r);
                    for c in 0..n {
                        w[c] += coeff * rowv[c];
                    }
                }
            }
        }
        p = h_solve(&w);

        // Drop the most negative multiplier, if any.
        let mut worst: Option<(usize, f64)> = None;
        for (j, _row) in active.iter().enumerate() {
            let mu = nu[m_e + j];
            if mu < -1e-10 && worst.map_or(true, |(_, m)| mu < m) {
                worst = Some((j, mu));
            }
        }
        if let Some((j, _)) = worst {
            let id = active[j].id;
            active.remove(j);
            if !schur.remove(m_e + j) {
                return QpSolution {
                    step: p,
                    eq_multipliers: lambda,
                    active: Vec::new(),
                    status: QpStatus::Infeasible,
                    iterations: iteration,
                };
            }
            last_removed = Some(id);
            continue;
        }

        // Find the most violated inactive face.
        let mut worst_violation = 0.0;
        let mut worst_id: Option<ConstraintId> = None;
        for i in 0..n {
            let lo = input.lower[i];
            let hi = input.upper[i];
            if lo.is_finite() {
                let v = lo - p[i];
                if v > worst_violation {
                    worst_violation = v;
                    worst_id = Some(ConstraintId::BoundLower(i));
                }
            }
            if hi.is_finite() {
                let v = p[i] - hi;
                if v > worst_violation {
                    worst_violation = v;
                    worst_id = Some(ConstraintId::BoundUpper(i));
                }
            }
        }
        if let Some(c_mat) = input.ineq_matrix {
            let cv = c_mat * &p;
            for r in 0..m_i {
                let lo = input.ineq_lower[r];
                let hi = input.ineq_upper[r];
                if lo.is_finite() {
                    let v = lo - cv[r];
                    if v > worst_violation {
                        worst_violation = v;
                        worst_id = Some(ConstraintId::IneqLower(r));
                    }
                }
                if hi.is_finite() {
                    let v = cv[r] - hi;
                    if v > worst_violation {
                        worst_violation = v;
                        worst_id = Some(ConstraintId::IneqUpper(r));
                    }
                }
            }
        }

        let feas_tol = 1e-9 * (1.0 + p.amax());
        match worst_id {
            None => {
                return QpSolution {
                    step: p,
                    eq_multipliers: lambda,
                    active: active.iter().zip(nu.iter().skip(m_e)).map(|(r, &m)| (r.id, m)).collect(),
                    status: QpStatus::Solved,
                    iterations: iteration,
                };
            }
            Some(id) if worst_violation <= feas_tol => {
                let _ = id;
                return QpSolution {
                    step: p,
                    eq_multipliers: lambda,
                    active: active.iter().zip(nu.iter().skip(m_e)).map(|(r, &m)| (r.id, m)).collect(),
                    status: QpStatus::Solved,
                    iterations: iteration,
                };
            }
            Some(id) => {
                // Re-adding the row just removed signals a degenerate
                // vertex; tolerate a few such bounces before giving up.
                if last_removed == Some(id) {
                    cycle_count += 1;
                    if cycle_count > 6 {
                        return QpSolution {
                            step: p,
                            eq_multipliers: lambda,
                            active: active
                                .iter()
                                .zip(nu.iter().skip(m_e))
                                .map(|(r, &m)| (r.id, m))
                                .collect(),
                            status: QpStatus::IterationLimit,
                            iterations: iteration,
                        };
                    }
                }
                last_removed = None;
                if !try_add(&mut schur, &mut active, id) {
                    // Linearly dependent with the working set yet violated:
                    // the constraint set is inconsistent.
                    return QpSolution {
                        step: p,
                        eq_multipliers: lambda,
                        active: Vec::new(),
                        status: QpStatus::Infeasible,
                        iterations: iteration,
                    };
                }
            }
        }
    }

    QpSolution {
        step: p,
        eq_multipliers: lambda,
        active: active.iter().map(|r| (r.id, 0.0)).collect(),
        status: QpStatus::IterationLimit,
        iterations: max_iter,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn empty() -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::zeros(0, 0), DVector::zeros(0))
    }

    fn solve_simple(
        h: DMatrix<f64>,
        g: DVector<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> QpSolution {
        let (ae, be) = empty();
        let none = DVector::zeros(0);
        solve(
            &QpInput {
                hessian: &h,
                gradient: &g,
                eq_matrix: &ae,
                eq_rhs: &be,
                ineq_matrix: None,
                ineq_lower: &none,
                ineq_upper: &none,
                lower: &lb,
                upper: &ub,
            },
            &[],
        )
    }

    #[test]
    fn unconstrained_minimum() {
        let sol = solve_simple(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, -2.0]),
            DVector::from_element(2, f64::NEG_INFINITY),
            DVector::from_element(2, f64::INFINITY),
        );
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.step[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.step[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_becomes_active() {
        // min ½p² + p subject to p ≥ -0.3: unconstrained -1, clipped to -0.3.
        let sol = solve_simple(
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![-0.3]),
            DVector::from_vec(vec![f64::INFINITY]),
        );
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.step[0], -0.3, epsilon = 1e-12);
        assert_eq!(sol.active.len(), 1);
        assert_eq!(sol.active[0].0, ConstraintId::BoundLower(0));
        assert!(sol.active[0].1 > 0.0);
    }

    #[test]
    fn equality_and_bounds() {
        // min ½‖p‖² s.t. p_0 + p_1 = 4, p_1 ≤ 1 → p = (3, 1).
        let h = DMatrix::identity(2, 2);
        let g = DVector::zeros(2);
        let ae = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let be = DVector::from_vec(vec![4.0]);
        let none = DVector::zeros(0);
        let lb = DVector::from_element(2, f64::NEG_INFINITY);
        let ub = DVector::from_vec(vec![f64::INFINITY, 1.0]);
        let sol = solve(
            &QpInput {
                hessian: &h,
                gradient: &g,
                eq_matrix: &ae,
                eq_rhs: &be,
                ineq_matrix: None,
                ineq_lower: &none,
                ineq_upper: &none,
                lower: &lb,
                upper: &ub,
            },
            &[],
        );
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.step[0], 3.0, epsilon = 1e-10);
        assert_relative_eq!(sol.step[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn general_inequality_active() {
        // min ½‖p - (2,2)‖² s.t. p_0 + p_1 ≤ 2 → p = (1,1).
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-2.0, -2.0]);
        let (ae, be) = empty();
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let lo = DVector::from_vec(vec![f64::NEG_INFINITY]);
        let hi = DVector::from_vec(vec![2.0]);
        let lb = DVector::from_element(2, f64::NEG_INFINITY);
        let ub = DVector::from_element(2, f64::INFINITY);
        let sol = solve(
            &QpInput {
                hessian: &h,
                gradient: &g,
                eq_matrix: &ae,
                eq_rhs: &be,
                ineq_matrix: Some(&c),
                ineq_lower: &lo,
                ineq_upper: &hi,
                lower: &lb,
                upper: &ub,
            },
            &[],
        );
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.step[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.step[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn detects_infeasible_equality_vs_bounds() {
        // p_0 = 5 with p_0 ∈ [0, 1].
        let h = DMatrix::identity(1, 1);
        let g = DVector::zeros(1);
        let ae = DMatrix::from_row_slice(1, 1, &[1.0]);
        let be = DVector::from_vec(vec![5.0]);
        let none = DVector::zeros(0);
        let lb = DVector::from_vec(vec![0.0]);
        let ub = DVector::from_vec(vec![1.0]);
        let sol = solve(
            &QpInput {
                hessian: &h,
                gradient: &g,
                eq_matrix: &ae,
                eq_rhs: &be,
                ineq_matrix: None,
                ineq_lower: &none,
                ineq_upper: &none,
                lower: &lb,
                upper: &ub,
            },
            &[],
        );
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn warm_seed_reaches_same_solution() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.5, 0.2, 0.0, 0.2, 1.0]);
        let g = DVector::from_vec(vec![1.0, -3.0, 0.5]);
        let ae = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let be = DVector::from_vec(vec![0.5]);
        let none = DVector::zeros(0);
        let lb = DVector::from_vec(vec![-0.2, -0.2, -0.2]);
        let ub = DVector::from_vec(vec![0.6, 0.6, 0.6]);
        let input = QpInput {
            hessian: &h,
            gradient: &g,
            eq_matrix: &ae,
            eq_rhs: &be,
            ineq_matrix: None,
            ineq_lower: &none,
            ineq_upper: &none,
            lower: &lb,
            upper: &ub,
        };
        let cold = solve(&input, &[]);
        assert_eq!(cold.status, QpStatus::Solved);
        let seed: Vec<ConstraintId> = cold.active.iter().map(|(id, _)| *id).collect();
        let warm = solve(&input, &seed);
        assert_eq!(warm.status, QpStatus::Solved);
        assert!((&cold.step - &warm.step).amax() < 1e-10);
        assert!(warm.iterations <= cold.iterations);
    }

    /// Brute-force oracle: enumerate every subset of bound faces as the
    /// active set, solve the KKT system directly, and keep the best point
    /// that is primal and dual feasible.
    fn brute_force_box_qp(
        h: &DMatrix<f64>,
        g: &DVector<f64>,
        lb: &DVector<f64>,
        ub: &DVector<f64>,
    ) -> DVector<f64> {
        let n = g.len();
        let mut best: Option<(f64, DVector<f64>)> = None;
        // Each variable: 0 free, 1 at lower, 2 at upper.
        let mut pattern = vec![0usize; n];
        loop {
            let mut p = DVector::zeros(n);
            let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
            for i in 0..n {
                if pattern[i] == 1 {
                    p[i] = lb[i];
                } else if pattern[i] == 2 {
                    p[i] = ub[i];
                }
            }
            let valid = if free.is_empty() {
                true
            } else {
                let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
                let mut rhs = DVector::zeros(free.len());
                for (a, &i) in free.iter().enumerate() {
                    let mut v = -g[i];
                    for j in 0..n {
                        if pattern[j] != 0 {
                            v -= h[(i, j)] * p[j];
                        }
                    }
                    rhs[a] = v;
                }
                match hf.lu().solve(&rhs) {
                    Some(x) => {
                        for (a, &i) in free.iter().enumerate() {
                            p[i] = x[a];
                        }
                        true
                    }
                    None => false,
                }
            };
            if valid {
                let feasible = (0..n).all(|i| p[i] >= lb[i] - 1e-9 && p[i] <= ub[i] + 1e-9);
                if feasible {
                    let grad = h * &p + g;
                    let dual_ok = (0..n).all(|i| match pattern[i] {
                        1 => grad[i] >= -1e-8,
                        2 => grad[i] <= 1e-8,
                        _ => grad[i].abs() < 1e-7,
                    });
                    if dual_ok {
                        let obj = 0.5 * (&p.transpose() * h * &p)[(0, 0)] + g.dot(&p);
                        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                            best = Some((obj, p.clone()));
                        }
                    }
                }
            }
            // Advance the ternary pattern.
            let mut carry = 0;
            loop {
                if carry == n {
                    return best.expect("qp has a solution").1;
                }
                pattern[carry] += 1;
                if pattern[carry] == 3 {
                    pattern[carry] = 0;
                    carry += 1;
                } else {
                    break;
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_on_random_box_qps() {
        let mut state = 12345u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        for case in 0..40 {
            let n = 2 + case % 3;
            let m = DMatrix::from_fn(n, n, |_, _| next());
            let h = &m * m.transpose() + DMatrix::identity(n, n) * 0.5;
            let g = DVector::from_fn(n, |_, _| 2.0 * next());
            let lb = DVector::from_fn(n, |_, _| -0.4 + 0.2 * next());
            let ub = DVector::from_fn(n, |_, _| 0.4 + 0.2 * next());
            let sol = solve_simple(h.clone(), g.clone(), lb.clone(), ub.clone());
            assert_eq!(sol.status, QpStatus::Solved, "case {case}");
            let oracle = brute_force_box_qp(&h, &g, &lb, &ub);
            assert!(
                (&sol.step - &oracle).amax() < 1e-7,
                "case {case}: {} vs {}",
                sol.step,
                oracle
            );
        }
    }
}
