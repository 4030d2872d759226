//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by implicit-shift QL.

use crate::error::{Error, Result};

/// Iteration cap per eigenvalue in the QL sweep.
pub const MAX_QL_ITERATIONS: usize = 60;

/// Symmetric tridiagonal matrix: diagonal `d` and off-diagonal `e`
/// (`e[i]` couples `i` and `i+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

/// Householder reduction of the symmetric row-major `a` (`n × n`).
///
/// Returns the tridiagonal form and, when `want_q`, the orthogonal `Q`
/// (row-major) with `A = Q T Qᵀ`.
pub fn tridiagonalize(mut a: Vec<f64>, n: usize, want_q: bool) -> (Tridiagonal, Option<Vec<f64>>) {
    assert_eq!(a.len(), n * n);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        // column k below the diagonal, read from row k by symmetry
        let x = &a[k * n + k + 1..k * n + n];
        let alpha_scale = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        d[k] = a[k * n + k];
        if alpha_scale == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let v = &mut v[..m];
        for (vi, xi) in v.iter_mut().zip(x) {
            *vi = xi / alpha_scale;
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        e[k] = alpha * alpha_scale;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // p = beta A22 v
        let off = k + 1;
        let p = &mut p[..m];
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + n];
            p[i] = beta * row.iter().zip(v.iter()).map(|(r, t)| r * t).sum::<f64>();
        }
        let kcoef = 0.5 * beta * p.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..m {
            p[i] -= kcoef * v[i];
        }
        // A22 -= v wᵀ + w vᵀ with w = p
        for i in 0..m {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + n];
            for ((r, vj), wj) in row.iter_mut().zip(v.iter()).zip(p.iter()) {
                *r -= vi * wj + wi * vj;
            }
        }
        if want_q {
            reflectors.push((off, v.to_vec(), beta));
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 2) * n + n - 1];
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1) * n + n - 1];
    }
    let q = want_q.then(|| {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        // Q = H_0 H_1 ... ; apply from the right-most reflector backwards
        for (off, v, beta) in reflectors.iter().rev() {
            let m = v.len();
            // Q[off.., off..] = (I - beta v vᵀ) Q[off.., off..]
            let mut w = vec![0.0; n];
            for i in 0..m {
                let row = &q[(off + i) * n..(off + i + 1) * n];
                for (wj, qj) in w.iter_mut().zip(row) {
                    *wj += v[i] * qj;
                }
            }
            for i in 0..m {
                let f = beta * v[i];
                let row = &mut q[(off + i) * n..(off + i + 1) * n];
                for (qj, wj) in row.iter_mut().zip(&w) {
                    *qj -= f * wj;
                }
            }
        }
        q
    });
    (Tridiagonal { d, e }, q)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix.
///
/// On return `d` holds the eigenvalues (unsorted). When `z` is given
/// (row-major `n × n`, initially `Q` or the identity) its columns are
/// rotated into the eigenvectors.
pub fn tql(d: &mut [f64], e_in: &[f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&e_in[..n - 1]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: MAX_QL_ITERATIONS,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let zk = &mut z[k * n..(k + 1) * n];
                        let f = zk[i + 1];
                        zk[i + 1] = s * zk[i] + c * f;
                        zk[i] = c * zk[i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric tridiagonal matrix, sorted descending.
pub fn tridiagonal_eigenvalues(d: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    let mut d = d.to_vec();
    tql(&mut d, e, None)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

/// Eigenvalues of a dense symmetric row-major matrix, sorted descending.
pub fn symmetric_eigenvalues(a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let (t, _) = tridiagonalize(a, n, false);
    tridiagonal_eigenvalues(&t.d, &t.e)
}

/// Eigenpairs of a dense symmetric matrix, sorted by descending eigenvalue.
/// Column `k` of the returned row-major matrix is the unit eigenvector of
/// value `k`.
pub fn symmetric_eigen(a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (t, q) = tridiagonalize(a, n, true);
    let mut z = q.expect("requested");
    let mut d = t.d;
    tql(&mut d, &t.e, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (newk, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + newk] = z[i * n + k];
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn two_by_two_closed_form() {
        let q = 0.3;
        let v = symmetric_eigenvalues(vec![1.0 - q, q, q, 1.0 - q], 2).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] - (1.0 - 2.0 * q)).abs() < 1e-15);
    }

    #[test]
    fn trace_and_frobenius_preserved() {
        for n in [1, 3, 7, 20, 41] {
            let a = sym(n, n as u64);
            let tr: f64 = (0..n).map(|i| a[i * n + i]).sum();
            let fro: f64 = a.iter().map(|v| v * v).sum();
            let v = symmetric_eigenvalues(a, n).unwrap();
            assert!((v.iter().sum::<f64>() - tr).abs() < 1e-11);
            assert!((v.iter().map(|x| x * x).sum::<f64>() - fro).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvectors_satisfy_definition() {
        let n = 17;
        let a = sym(n, 99);
        let (vals, vecs) = symmetric_eigen(a.clone(), n).unwrap();
        for k in 0..n {
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * vecs[j * n + k]).sum();
                assert!((av - vals[k] * vecs[i * n + k]).abs() < 1e-12);
            }
            let norm: f64 = (0..n).map(|i| vecs[i * n + k].powi(2)).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_path_graph() {
        // path Laplacian-like matrix: eigenvalues 2cos(kπ/(n+1))
        let n = 30;
        let v = tridiagonal_eigenvalues(&vec![0.0; n], &vec![1.0; n - 1]).unwrap();
        for (k, x) in v.iter().enumerate() {
            let exact = 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((x - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn characteristic_polynomial_n3() {
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2, 2 ± √2
        let v = symmetric_eigenvalues(vec![2., 1., 0., 1., 2., 1., 0., 1., 2.], 3).unwrap();
        let r2 = 2f64.sqrt();
        assert!((v[0] - (2.0 + r2)).abs() < 1e-14);
        assert!((v[1] - 2.0).abs() < 1e-14);
        assert!((v[2] - (2.0 - r2)).abs() < 1e-14);
    }
}
