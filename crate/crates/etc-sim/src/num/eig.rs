//! Eigenvalue routines for small dense matrices.
//!
//! General spectra come from Householder reduction to Hessenberg form
//! followed by Francis double-shift QR iteration on the real Schur form,
//! which keeps complex-conjugate pairs in 2x2 diagonal blocks. Symmetric
//! spectra use cyclic Jacobi rotations. Both carry iteration caps and
//! report `Indeterminate` instead of looping.

use super::{Matrix, NumError};

/// Eigenvalues of a square matrix as (re, im) pairs, in deflation order.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<(f64, f64)>, NumError> {
    assert!(m.is_square(), "eigenvalues: matrix must be square");
    let n = m.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut h = to_dense(m);
    hessenberg(&mut h);
    francis_qr(&mut h, 500 * n)
}

/// True when every eigenvalue satisfies re < -1e-9 * max(1, |M|_inf).
///
/// The margin keeps exactly-marginal modes (a zero eigenvalue computed
/// as +-1e-15) robustly classified as not Hurwitz.
pub fn is_hurwitz(m: &Matrix) -> Result<bool, NumError> {
    let margin = 1e-9 * m.norm_inf().max(1.0);
    let eigs = eigenvalues(m)?;
    Ok(eigs.iter().all(|&(re, _)| re < -margin))
}

/// Spectral norm |M|_2 = sqrt(lambda_max(M^T M)).
pub fn spectral_norm(m: &Matrix) -> Result<f64, NumError> {
    // Work with the smaller Gram matrix of the two.
    let g = if m.rows() >= m.cols() {
        m.transpose().matmul(m)
    } else {
        m.matmul(&m.transpose())
    };
    let (_, hi) = sym_eig_bounds(&g)?;
    Ok(hi.max(0.0).sqrt())
}

/// (lambda_min, lambda_max) of a symmetric matrix by cyclic Jacobi.
///
/// Converges to relative accuracy well below the documented 1e-8.
pub fn sym_eig_bounds(m: &Matrix) -> Result<(f64, f64), NumError> {
    assert!(m.is_square(), "sym_eig_bounds: matrix must be square");
    let n = m.rows();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let scale = m.max_abs();
    assert!(
        symmetry_defect(m) <= 1e-8 * scale.max(1.0),
        "sym_eig_bounds: input is not symmetric"
    );
    let mut a = to_dense(m);
    // Symmetrize exactly so rotations preserve symmetry.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = avg;
            a[j][i] = avg;
        }
    }
    let fro: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    if fro == 0.0 {
        return Ok((0.0, 0.0));
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if (2.0 * off).sqrt() <= 1e-12 * fro {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (i, row) in a.iter().enumerate() {
                lo = lo.min(row[i]);
                hi = hi.max(row[i]);
            }
            return Ok((lo, hi));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(NumError::Indeterminate)
}

fn symmetry_defect(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn to_dense(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// In-place Householder reduction to upper Hessenberg form.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm <= 1e-300 {
            continue;
        }
        let alpha = if a[k + 1][k] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        if vnorm_sq <= 1e-300 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;
        // Left: A[k+1.., :] -= beta * v (v^T A[k+1.., :])
        for j in 0..n {
            let s: f64 = (0..v.len()).map(|i| v[i] * a[k + 1 + i][j]).sum();
            let bs = beta * s;
            for i in 0..v.len() {
                a[k + 1 + i][j] -= v[i] * bs;
            }
        }
        // Right: A[:, k+1..] -= beta * (A[:, k+1..] v) v^T
        for row in a.iter_mut() {
            let s: f64 = (0..v.len()).map(|i| row[k + 1 + i] * v[i]).sum();
            let bs = beta * s;
            for i in 0..v.len() {
                row[k + 1 + i] -= v[i] * bs;
            }
        }
        // The reduced column is exactly (.., alpha, 0, .., 0).
        a[k + 1][k] = alpha;
        for i in k + 2..n {
            a[i][k] = 0.0;
        }
    }
}

/// Francis double-shift QR with deflation; returns eigenvalues.
fn francis_qr(h: &mut [Vec<f64>], cap: usize) -> Result<Vec<(f64, f64)>, NumError> {
    let n = h.len();
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut steps = 0usize;
    let mut stalled = 0usize;
    let scale: f64 = h
        .iter()
        .flatten()
        .fold(1e-300_f64, |m, x| m.max(x.abs()));
    loop {
        // Flush negligible subdiagonal entries.
        for k in 0..hi {
            let base = h[k][k].abs() + h[k + 1][k + 1].abs();
            let tiny = f64::EPSILON * if base > 0.0 { base } else { scale };
            if h[k + 1][k].abs() <= tiny {
                h[k + 1][k] = 0.0;
            }
        }
        if hi == 0 {
            eigs.push((h[0][0], 0.0));
            break;
        }
        if h[hi][hi - 1] == 0.0 {
            eigs.push((h[hi][hi], 0.0));
            hi -= 1;
            stalled = 0;
            continue;
        }
        if hi == 1 || h[hi - 1][hi - 2] == 0.0 {
            let (e1, e2) = eig_2x2(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi]);
            eigs.push(e1);
            eigs.push(e2);
            if hi == 1 {
                break;
            }
            hi -= 2;
            stalled = 0;
            continue;
        }
        steps += 1;
        stalled += 1;
        if steps > cap {
            return Err(NumError::Indeterminate);
        }
        let mut lo = hi - 1;
        while lo > 0 && h[lo][lo - 1] != 0.0 {
            lo -= 1;
        }
        // Trailing 2x2 determines the implicit double shift; every tenth
        // stalled step perturbs it to break symmetric cycling.
        let (mut s, mut t) = (
            h[hi - 1][hi - 1] + h[hi][hi],
            h[hi - 1][hi - 1] * h[hi][hi] - h[hi - 1][hi] * h[hi][hi - 1],
        );
        if stalled % 10 == 0 {
            let w = h[hi][hi - 1].abs() + h[hi - 1][hi - 2].abs();
            s = h[hi][hi] + h[hi - 1][hi - 1] + 0.75 * w;
            t = (h[hi][hi] + 0.375 * w) * (h[hi - 1][hi - 1] + 0.375 * w);
        }
        francis_step(h, lo, hi, s, t);
    }
    Ok(eigs)
}

fn eig_2x2(a: f64, b: f64, c: f64, d: f64) -> ((f64, f64), (f64, f64)) {
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        ((half_tr + r, 0.0), (half_tr - r, 0.0))
    } else {
        let r = (-disc).sqrt();
        ((half_tr, r), (half_tr, -r))
    }
}

/// One implicit double-shift bulge chase over the active window [lo, hi].
/// The window has size >= 3 by the caller's deflation logic.
fn francis_step(h: &mut [Vec<f64>], lo: usize, hi: usize, s: f64, t: f64) {
    let n = h.len();
    for k in lo..hi {
        let three = k + 2 <= hi;
        let (x, y, z) = if k == lo {
            // First column of (H - aI)(H - bI) where a + b = s, ab = t.
            (
                h[lo][lo] * h[lo][lo] + h[lo][lo + 1] * h[lo + 1][lo] - s * h[lo][lo] + t,
                h[lo + 1][lo] * (h[lo][lo] + h[lo + 1][lo + 1] - s),
                h[lo + 2][lo + 1] * h[lo + 1][lo],
            )
        } else {
            (
                h[k][k - 1],
                h[k + 1][k - 1],
                if three { h[k + 2][k - 1] } else { 0.0 },
            )
        };
        apply_reflector(h, n, k, x, y, z, three);
    }
    // Exact-arithmetic zeros below the first subdiagonal in the window.
    for i in lo + 2..=hi {
        for j in lo..i - 1 {
            h[i][j] = 0.0;
        }
    }
}

/// Similarity transform by the Householder reflector sending (x, y, z)
/// (or (x, y) when `three` is false) onto the first axis, acting on rows
/// and columns k..k+2 (or k..k+1).
fn apply_reflector(h: &mut [Vec<f64>], n: usize, k: usize, x: f64, y: f64, z: f64, three: bool) {
    let len = if three { 3 } else { 2 };
    let mut w = [x, y, z];
    let norm = (x * x + y * y + z * z).sqrt();
    if norm <= 1e-300 {
        return;
    }
    w[0] += x.signum() * norm;
    let wnorm_sq: f64 = w[..len].iter().map(|v| v * v).sum();
    if wnorm_sq <= 1e-300 {
        return;
    }
    let beta = 2.0 / wnorm_sq;
    for j in 0..n {
        let s: f64 = (0..len).map(|i| w[i] * h[k + i][j]).sum();
        let bs = beta * s;
        for i in 0..len {
            h[k + i][j] -= w[i] * bs;
        }
    }
    for r in 0..n {
        let s: f64 = (0..len).map(|i| h[r][k + i] * w[i]).sum();
        let bs = beta * s;
        for i in 0..len {
            h[r][k + i] -= w[i] * bs;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Vector;

    fn sorted(mut eigs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        eigs.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
        eigs
    }

    #[test]
    fn triangular_spectrum_is_diagonal() {
        let m = Matrix::from_rows(&[
            vec![3.0, 1.0, 0.0],
            vec![0.0, -2.0, 5.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let eigs = sorted(eigenvalues(&m).unwrap());
        let want = [(-2.0, 0.0), (0.5, 0.0), (3.0, 0.0)];
        for (got, want) in eigs.iter().zip(want) {
            assert!((got.0 - want.0).abs() < 1e-12 && got.1.abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_gives_conjugate_pair() {
        let th = 0.7_f64;
        let m = Matrix::from_rows(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]).unwrap();
        let eigs = sorted(eigenvalues(&m).unwrap());
        assert!((eigs[0].0 - th.cos()).abs() < 1e-12);
        assert!((eigs[0].1 + th.sin()).abs() < 1e-12);
        assert!((eigs[1].1 - th.sin()).abs() < 1e-12);
    }

    #[test]
    fn trace_and_determinant_are_preserved() {
        // Deterministic pseudo-random 5x5; sum(eig) = tr, prod |eig| relates to det.
        let mut seed = 0x9e3779b97f4a7c15_u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..25 {
            let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| next()).collect()).collect();
            let m = Matrix::from_rows(&rows).unwrap();
            let eigs = eigenvalues(&m).unwrap();
            let tr: f64 = (0..5).map(|i| m[(i, i)]).sum();
            let sum_re: f64 = eigs.iter().map(|e| e.0).sum();
            let sum_im: f64 = eigs.iter().map(|e| e.1).sum();
            assert!((sum_re - tr).abs() < 1e-8, "trace mismatch: {sum_re} vs {tr}");
            assert!(sum_im.abs() < 1e-8);
        }
    }

    #[test]
    fn hurwitz_examples() {
        let stable = Matrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]).unwrap();
        assert!(is_hurwitz(&stable).unwrap());
        let integrator = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(!is_hurwitz(&integrator).unwrap());
        let marginal = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(!is_hurwitz(&marginal).unwrap());
    }

    #[test]
    fn spectral_norm_examples() {
        let diag = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -2.0]]).unwrap();
        assert!((spectral_norm(&diag).unwrap() - 3.0).abs() < 1e-10);
        let nilpotent = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!((spectral_norm(&nilpotent).unwrap() - 1.0).abs() < 1e-10);
        let wide = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert!((spectral_norm(&wide).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn spectral_norm_dominates_scaled_image() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![-1.0, 0.25, 3.0]]).unwrap();
        let nm = spectral_norm(&m).unwrap();
        let v = Vector::from_slice(&[0.3, -1.2, 0.7]).unwrap();
        assert!(m.mul_vec(&v).norm_two() <= nm * v.norm_two() + 1e-12);
    }

    #[test]
    fn symmetric_bounds_match_diagonal() {
        let m = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, -1.0],
        ])
        .unwrap();
        let (lo, hi) = sym_eig_bounds(&m).unwrap();
        assert!((lo + 1.0).abs() < 1e-10);
        assert!((hi - 3.0).abs() < 1e-10);
    }

    #[test]
    fn jacobi_and_qr_agree_on_symmetric_input() {
        let mut seed = 42_u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let mut rows: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| next()).collect()).collect();
            for i in 0..4 {
                for j in 0..i {
                    let avg = 0.5 * (rows[i][j] + rows[j][i]);
                    rows[i][j] = avg;
                    rows[j][i] = avg;
                }
            }
            let m = Matrix::from_rows(&rows).unwrap();
            let (lo, hi) = sym_eig_bounds(&m).unwrap();
            let eigs = eigenvalues(&m).unwrap();
            let qr_lo = eigs.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
            let qr_hi = eigs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
            assert!((lo - qr_lo).abs() < 1e-8 && (hi - qr_hi).abs() < 1e-8);
            assert!(eigs.iter().all(|e| e.1.abs() < 1e-8));
        }
    }
}
