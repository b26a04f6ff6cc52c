//! Blocked dense Cholesky and triangular multi-RHS solves.
//!
//! The QP subproblem spends nearly all its time in `L = chol(H)`,
//! `W = L⁻¹ Aᵀ`, and `S = WᵀW`. Blocking pushes the bulk of those flops into
//! matrix-matrix products, which nalgebra dispatches to a tuned kernel.

use nalgebra::{DMatrix, DVector};

const BLOCK: usize = 64;

/// Lower-triangular Cholesky factor of an SPD matrix, or `None` if a pivot
/// fails (matrix not positive definite).
pub fn cholesky_factor(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = a.clone_owned();
    let mut k = 0;
    while k < n {
        let kb = BLOCK.min(n - k);
        // Unblocked factorization of the diagonal block, updating the panel
        // rows inside this block column.
        for j in k..k + kb {
            let mut d = l[(j, j)];
            for p in k..j {
                d -= l[(j, p)] * l[(j, p)];
            }
            if d <= 0.0 || !d.is_finite() {
                return None;
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..(k + kb) {
                let mut s = l[(i, j)];
                for p in k..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / dj;
            }
        }
        if k + kb < n {
            // Panel solve: rows below the block against L_kk^T.
            for r in (k + kb)..n {
                for j in k..(k + kb) {
                    let mut s = l[(r, j)];
                    for p in k..j {
                        s -= l[(r, p)] * l[(j, p)];
                    }
                    l[(r, j)] = s / l[(j, j)];
                }
            }
            // Trailing update A22 -= P P^T (gemm-heavy).
            let p_block = l.view((k + kb, k), (n - k - kb, kb)).clone_owned();
            let update = &p_block * p_block.transpose();
            let mut trail = l.view_mut((k + kb, k + kb), (n - k - kb, n - k - kb));
            trail -= &update;
        }
        k += kb;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            l[(i, j)] = 0.0;
        }
    }
    Some(l)
}

/// Solve `L X = B` in place for lower-triangular `L`.
pub fn solve_lower_multi(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    let nrhs = b.ncols();
    let mut k = 0;
    while k < n {
        let kb = BLOCK.min(n - k);
        for c in 0..nrhs {
            for j in k..k + kb {
                let mut v = b[(j, c)];
                for p in k..j {
                    v -= l[(j, p)] * b[(p, c)];
                }
                b[(j, c)] = v / l[(j, j)];
            }
        }
        if k + kb < n {
            let lblock = l.view((k + kb, k), (n - k - kb, kb));
            let xblock = b.view((k, 0), (kb, nrhs)).clone_owned();
            let prod = lblock * &xblock;
            let mut rest = b.view_mut((k + kb, 0), (n - k - kb, nrhs));
            rest -= &prod;
        }
        k += kb;
    }
}

/// Solve `Lᵀ X = B` in place for lower-triangular `L`.
pub fn solve_lower_transpose_multi(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    let nrhs = b.ncols();
    let mut block_starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    block_starts.reverse();
    for &k in &block_starts {
        let kb = BLOCK.min(n - k);
        if k + kb < n {
            // B[k..k+kb] -= L[k+kb.., k..k+kb]^T X[k+kb..]
            let lblock = l.view((k + kb, k), (n - k - kb, kb));
            let xblock = b.view((k + kb, 0), (n - k - kb, nrhs)).clone_owned();
            let prod = lblock.transpose() * &xblock;
            let mut head = b.view_mut((k, 0), (kb, nrhs));
            head -= &prod;
        }
        for c in 0..nrhs {
            for j in (k..k + kb).rev() {
                let mut v = b[(j, c)];
                for p in (j + 1)..(k + kb) {
                    v -= l[(p, j)] * b[(p, c)];
                }
                b[(j, c)] = v / l[(j, j)];
            }
        }
    }
}

/// Solve `L Lᵀ x = b` for a vector.
pub fn solve_cholesky_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    solve_lower_multi(l, &mut x);
    solve_lower_transpose_multi(l, &mut x);
    DVector::from_column_slice(x.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        // Simple deterministic LCG so tests need no RNG dependency.
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let m = DMatrix::from_fn(n, n, |_, _| next());
        &m * m.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    #[test]
    fn matches_nalgebra_cholesky() {
        for n in [1, 3, 17, 64, 65, 130, 200] {
            let a = random_spd(n, 42 + n as u64);
            let l = cholesky_factor(&a).expect("spd");
            let reference = a.clone().cholesky().expect("spd").l();
            let err = (&l - &reference).amax();
            assert!(err < 1e-9 * (1.0 + reference.amax()), "n={n} err={err}");
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_factor(&a).is_none());
    }

    #[test]
    fn triangular_solves_roundtrip() {
        for n in [5, 64, 129] {
            let a = random_spd(n, 7 + n as u64);
            let l = cholesky_factor(&a).unwrap();
            let b = DMatrix::from_fn(n, 3, |i, j| (i + 2 * j) as f64 * 0.01 - 0.3);
            let mut x = b.clone();
            solve_lower_multi(&l, &mut x);
            let err = (&l * &x - &b).amax();
            assert!(err < 1e-10, "forward n={n} err={err}");
            let mut y = b.clone();
            solve_lower_transpose_multi(&l, &mut y);
            let err = (l.transpose() * &y - &b).amax();
            assert!(err < 1e-10, "backward n={n} err={err}");
        }
    }

    #[test]
    fn full_solve_residual() {
        let n = 100;
        let a = random_spd(n, 99);
        let l = cholesky_factor(&a).unwrap();
        let b = DVector::from_fn(n, |i, _| (i as f64).sin());
        let x = solve_cholesky_vec(&l, &b);
        let r = (&a * &x - &b).amax();
        assert!(r < 1e-8, "residual {r}");
    }
}
