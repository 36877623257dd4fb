//! Continuous Lyapunov equation M^T P + P M = -Q by vectorization.
//!
//! The n^2 x n^2 system (entrywise coefficients of P) is solved with
//! Gaussian elimination under partial pivoting; the result is
//! symmetrized and its residual checked against 1e-10 * |Q|_inf.

use super::{Matrix, NumError};

pub fn solve_lyapunov(m: &Matrix, q: &Matrix) -> Result<Matrix, NumError> {
    assert!(m.is_square(), "solve_lyapunov: M must be square");
    assert_eq!(m.rows(), q.rows(), "solve_lyapunov: Q shape");
    assert_eq!(q.rows(), q.cols(), "solve_lyapunov: Q must be square");
    let n = m.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let nn = n * n;
    // Row (i, j): sum_k M[k][i] P[k][j] + P[i][k] M[k][j] = -Q[i][j];
    // unknown P[a][b] sits at column a*n + b.
    let mut sys = vec![0.0_f64; nn * nn];
    let mut rhs = vec![0.0_f64; nn];
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            for k in 0..n {
                sys[r * nn + k * n + j] += m[(k, i)];
                sys[r * nn + i * n + k] += m[(k, j)];
            }
            rhs[r] = -q[(i, j)];
        }
    }
    gauss_solve(&mut sys, &mut rhs, nn)?;
    let mut p = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            p[(a, b)] = rhs[a * n + b];
        }
    }
    // Symmetrize; the exact solution is symmetric for symmetric Q.
    let p = Matrix::new(n, n, {
        let pt = p.transpose();
        (0..n * n)
            .map(|idx| 0.5 * (p[(idx / n, idx % n)] + pt[(idx / n, idx % n)]))
            .collect()
    })
    .map_err(|_| NumError::SingularLyapunov)?;
    // Residual gate: near-singular systems that survived elimination
    // surface here instead of returning garbage.
    let mt = m.transpose();
    let residual = &(&mt.matmul(&p) + &p.matmul(m)) + q;
    if residual.norm_inf() > 1e-10 * q.norm_inf().max(f64::MIN_POSITIVE) {
        return Err(NumError::SingularLyapunov);
    }
    Ok(p)
}

fn gauss_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), NumError> {
    let scale = a.iter().fold(1e-300_f64, |m, x| m.max(x.abs()));
    for col in 0..n {
        let (mut pivot_row, mut pivot_val) = (col, a[col * n + col].abs());
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_row = r;
                pivot_val = v;
            }
        }
        if pivot_val <= 1e-13 * scale {
            return Err(NumError::SingularLyapunov);
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            b.swap(col, pivot_row);
        }
        let piv = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / piv;
            if factor == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for c in col + 1..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col * n + c] * b[c];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}
