//! Tridiagonal solves for `(D - θσΔ_h) y = rhs` with homogeneous Neumann
//! boundaries.
//!
//! `Δ_h` is the second-order central Laplacian with mirrored ghost nodes
//! (`y_{-1} = y_1`, `y_{n} = y_{n-2}`). Its matrix is symmetric with respect to
//! the composite trapezoid weights, so the same operator serves the state and
//! the adjoint.

use crate::error::{Error, Result};

/// `out = Δ_h y` using mirrored ghost nodes.
pub fn neumann_laplacian(y: &[f64], inv_dx2: f64, out: &mut [f64]) {
    let n = y.len();
    debug_assert_eq!(out.len(), n);
    if n < 2 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    out[0] = 2.0 * (y[1] - y[0]) * inv_dx2;
    for m in 1..n - 1 {
        out[m] = (y[m - 1] - 2.0 * y[m] + y[m + 1]) * inv_dx2;
    }
    out[n - 1] = 2.0 * (y[n - 2] - y[n - 1]) * inv_dx2;
}

/// Off-diagonal coefficients of `-r Δ_h · dx²` in row `m`, as `(lower, upper)`.
#[inline]
fn neumann_offdiag(m: usize, n: usize, r: f64) -> (f64, f64) {
    if n < 2 {
        return (0.0, 0.0);
    }
    let lower = if m == 0 {
        0.0
    } else if m == n - 1 {
        -2.0 * r
    } else {
        -r
    };
    let upper = if m == n - 1 {
        0.0
    } else if m == 0 {
        -2.0 * r
    } else {
        -r
    };
    (lower, upper)
}

/// Solves `(diag(base) - r·dx²·Δ_h) y = rhs` for one compartment.
///
/// `r` is `θ σ / dx²`. Requires `base > 0` and `r ≥ 0`, which makes the
/// matrix diagonally dominant.
pub fn solve_neumann_scalar(base: &[f64], r: f64, rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = base.len();
    debug_assert!(rhs.len() == n && out.len() == n);
    let lap = if n < 2 { 0.0 } else { 2.0 * r };
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for m in 0..n {
        let (lower, upper) = neumann_offdiag(m, n, r);
        let diag = base[m] + lap;
        if !(diag.abs() >= lower.abs() + upper.abs()) {
            return Err(Error::Numerical(format!(
                "tridiagonal row {m} is not diagonally dominant (diag {diag}, off {lower}, {upper})"
            )));
        }
        let (pivot, carried) =
            if m == 0 { (diag, rhs[0]) } else { (diag - lower * c_prime[m - 1], rhs[m] - lower * d_prime[m - 1]) };
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Numerical(format!("zero pivot at row {m}")));
        }
        c_prime[m] = upper / pivot;
        d_prime[m] = carried / pivot;
    }
    out[n - 1] = d_prime[n - 1];
    for m in (0..n - 1).rev() {
        out[m] = d_prime[m] - c_prime[m] * out[m + 1];
    }
    Ok(())
}

type Mat2 = [f64; 4];

#[inline]
fn inv2(m: Mat2) -> Option<Mat2> {
    let det = m[0] * m[3] - m[1] * m[2];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = 1.0 / det;
    Some([m[3] * inv, -m[1] * inv, -m[2] * inv, m[0] * inv])
}

#[inline]
fn mul2(a: Mat2, b: Mat2) -> Mat2 {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

#[inline]
fn mulv2(a: Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0] * v[0] + a[1] * v[1], a[2] * v[0] + a[3] * v[1]]
}

/// Solves a pair of compartments coupled pointwise in space.
///
/// Node `m` contributes the local 2×2 block `base[m]` (row-major) and each
/// component carries its own Laplacian weight `r[c]`. Block Thomas
/// elimination; the off-diagonal blocks are diagonal.
pub fn solve_neumann_pair(base: &[Mat2], r: [f64; 2], rhs: &[[f64; 2]], out: &mut [[f64; 2]]) -> Result<()> {
    let n = base.len();
    debug_assert!(rhs.len() == n && out.len() == n);
    let lap = if n < 2 { [0.0, 0.0] } else { [2.0 * r[0], 2.0 * r[1]] };
    let mut c_prime: Vec<Mat2> = vec![[0.0; 4]; n];
    let mut d_prime: Vec<[f64; 2]> = vec![[0.0; 2]; n];
    for m in 0..n {
        let (l0, u0) = neumann_offdiag(m, n, r[0]);
        let (l1, u1) = neumann_offdiag(m, n, r[1]);
        let mut diag = base[m];
        diag[0] += lap[0];
        diag[3] += lap[1];
        let (pivot, carried) = if m == 0 {
            (diag, rhs[0])
        } else {
            // D - L C'_{m-1}, with L = diag(l0, l1).
            let c = c_prime[m - 1];
            let d = d_prime[m - 1];
            (
                [diag[0] - l0 * c[0], diag[1] - l0 * c[1], diag[2] - l1 * c[2], diag[3] - l1 * c[3]],
                [rhs[m][0] - l0 * d[0], rhs[m][1] - l1 * d[1]],
            )
        };
        let inv = inv2(pivot).ok_or_else(|| Error::Numerical(format!("singular 2x2 pivot at row {m}")))?;
        c_prime[m] = mul2(inv, [u0, 0.0, 0.0, u1]);
        d_prime[m] = mulv2(inv, carried);
    }
    out[n - 1] = d_prime[n - 1];
    for m in (0..n - 1).rev() {
        let next = mulv2(c_prime[m], out[m + 1]);
        out[m] = [d_prime[m][0] - next[0], d_prime[m][1] - next[1]];
    }
    if out.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::Numerical("non-finite value in coupled solve".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_neumann(base: &[f64], r: f64) -> Vec<Vec<f64>> {
        let n = base.len();
        let mut a = vec![vec![0.0; n]; n];
        for m in 0..n {
            a[m][m] = base[m] + 2.0 * r;
            if m > 0 {
                a[m][m - 1] = if m == n - 1 { -2.0 * r } else { -r };
            }
            if m + 1 < n {
                a[m][m + 1] = if m == 0 { -2.0 * r } else { -r };
            }
        }
        a
    }

    #[test]
    fn scalar_solve_matches_dense_product() {
        let base = vec![1.2, 1.0, 1.5, 1.1, 1.3];
        let r = 0.7;
        let rhs = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let mut x = vec![0.0; 5];
        solve_neumann_scalar(&base, r, &rhs, &mut x).unwrap();
        let a = dense_neumann(&base, r);
        for m in 0..5 {
            let ax: f64 = (0..5).map(|j| a[m][j] * x[j]).sum();
            assert!((ax - rhs[m]).abs() < 1e-13);
        }
    }

    #[test]
    fn pair_solve_matches_dense_product() {
        let n = 6;
        let base: Vec<Mat2> = (0..n).map(|m| [1.1 + 0.1 * m as f64, -0.05, -0.3, 1.4 - 0.02 * m as f64]).collect();
        let r = [0.4, 0.9];
        let rhs: Vec<[f64; 2]> = (0..n).map(|m| [m as f64 - 2.0, (m * m) as f64 * 0.1]).collect();
        let mut x = vec![[0.0; 2]; n];
        solve_neumann_pair(&base, r, &rhs, &mut x).unwrap();
        let a0 = dense_neumann(&vec![0.0; n], r[0]);
        let a1 = dense_neumann(&vec![0.0; n], r[1]);
        for m in 0..n {
            let lap0: f64 = (0..n).map(|j| a0[m][j] * x[j][0]).sum();
            let lap1: f64 = (0..n).map(|j| a1[m][j] * x[j][1]).sum();
            let r0 = base[m][0] * x[m][0] + base[m][1] * x[m][1] + lap0;
            let r1 = base[m][2] * x[m][0] + base[m][3] * x[m][1] + lap1;
            assert!((r0 - rhs[m][0]).abs() < 1e-13);
            assert!((r1 - rhs[m][1]).abs() < 1e-13);
        }
    }

    #[test]
    fn laplacian_is_symmetric_under_trapezoid_weights() {
        let n = 7;
        let dx = 1.0 / (n - 1) as f64;
        let w: Vec<f64> = (0..n).map(|m| if m == 0 || m == n - 1 { dx / 2.0 } else { dx }).collect();
        let mut col = vec![0.0; n];
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            neumann_laplacian(&e, 1.0 / (dx * dx), &mut col);
            for m in 0..n {
                a[m][j] = col[m];
            }
        }
        for m in 0..n {
            for j in 0..n {
                assert!((w[m] * a[m][j] - w[j] * a[j][m]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn laplacian_kills_constants() {
        let y = vec![3.0; 5];
        let mut out = vec![1.0; 5];
        neumann_laplacian(&y, 100.0, &mut out);
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_non_dominant_rows() {
        let mut x = vec![0.0; 3];
        let err = solve_neumann_scalar(&[-1.9, 1.0, 1.0], 1.0, &[1.0; 3], &mut x);
        assert!(matches!(err, Err(Error::Numerical(_))));
    }
}
