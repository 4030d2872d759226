//! Relative-precision `1 − λ₁` for slowly mixing symmetric chains.
//!
//! For a kernel commuting with a mirror involution `σ`, the antisymmetric
//! functions form an invariant subspace on which the chain acts through
//! `P_o(c,e) = P(c,e) − P(c,σe)` (`c, e` in one half `H⁺` of the paired
//! states). When the only jumps from `H⁺` into `σH⁺` go to the own mirror,
//! `I − P_o` is a diagonally dominant M-matrix given entirely by
//! nonnegative data: off-diagonals `−P(c,e)` and the killing rates
//! `v_c = Σ_{d fixed} P(c,d) + 2 P(c,σc)`. Gaussian elimination with
//! diagonals rebuilt from row sums and subtraction-free triangular solves
//! then keep full relative accuracy, and inverse iteration with
//! Collatz-Wielandt bounds yields the smallest eigenvalue of `I − P_o`
//! even when it is far below machine epsilon.

use crate::error::Result;
use crate::kernel::FiniteKernel;

use super::orbits;

/// Target relative width of the Collatz-Wielandt bracket.
const BRACKET_TOL: f64 = 1e-12;
const MAX_ITER: usize = 500;

/// Smallest eigenvalue of `I − P_o` in relative precision, or `None` when
/// the kernel has no mirror map or is not of the required form.
pub fn odd_sector_gap(p: &FiniteKernel) -> Result<Option<f64>> {
    let Some(mirror) = p.mirror() else {
        return Ok(None);
    };
    let o = orbits(mirror);
    let h = o.pairs.len();
    if h == 0 {
        return Ok(None);
    }
    let mut a = vec![0.0; h * h];
    let mut v = vec![0.0; h];
    for (i, &c) in o.pairs.iter().enumerate() {
        for &(e, val) in p.row(c) {
            if e == c {
                continue;
            }
            if e == mirror[c] {
                v[i] += 2.0 * val;
                continue;
            }
            match o.pair_of[e] {
                Some(k) if o.pairs[k] == e => a[i * h + k] += val,
                Some(_) => return Ok(None),
                None => v[i] += val,
            }
        }
    }
    let mut d = vec![0.0; h];
    for k in 0..h {
        let (head, tail) = a.split_at_mut((k + 1) * h);
        let row_k = &head[k * h..];
        d[k] = v[k] + row_k[k + 1..].iter().sum::<f64>();
        if !(d[k] > 0.0) {
            return Ok(None);
        }
        for (off, row_i) in tail.chunks_exact_mut(h).enumerate() {
            let i = k + 1 + off;
            let aik = row_i[k];
            if aik == 0.0 {
                continue;
            }
            let f = aik / d[k];
            v[i] += f * v[k];
            for j in k + 1..h {
                if j != i {
                    row_i[j] += f * row_k[j];
                }
            }
        }
    }
    let solve = |b: &[f64]| -> Vec<f64> {
        let mut y = b.to_vec();
        for i in 0..h {
            let row = &a[i * h..i * h + i];
            let s: f64 = row.iter().zip(&y[..i]).zip(&d[..i]).map(|((aik, yk), dk)| aik / dk * yk).sum();
            y[i] += s;
        }
        let mut x = vec![0.0; h];
        for k in (0..h).rev() {
            let row = &a[k * h + k + 1..(k + 1) * h];
            let s: f64 = row.iter().zip(&x[k + 1..]).map(|(akj, xj)| akj * xj).sum();
            x[k] = (y[k] + s) / d[k];
        }
        x
    };
    let mut x = vec![1.0; h];
    let mut estimate = f64::NAN;
    for _ in 0..MAX_ITER {
        let y = solve(&x);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (xi, yi) in x.iter().zip(&y) {
            if *yi > 0.0 {
                let r = xi / yi;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        estimate = 0.5 * (lo + hi);
        if hi / lo - 1.0 < BRACKET_TOL {
            break;
        }
        let top = y.iter().copied().fold(0.0, f64::max);
        x = y.iter().map(|t| t / top).collect();
    }
    Ok(Some(estimate))
}
