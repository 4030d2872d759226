//! Conductance `h = min_{π(A) ≤ 1/2} Q(A, Aᶜ) / π(A)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::FiniteKernel;
use crate::model::log_sum_exp;

/// State count above which exhaustive conductance is refused.
pub const MAX_EXACT_CONDUCTANCE: usize = 24;

const MASS_SLACK: f64 = 1e-12;
const RECOMPUTE_EVERY: u64 = 4096;

/// Conductance value and a minimizing set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conductance {
    pub h: f64,
    pub set: Vec<usize>,
}

fn flows(p: &FiniteKernel) -> (Vec<f64>, Vec<f64>, usize) {
    let n = p.len();
    let pi = p.stationary();
    let mut f = vec![0.0; n * n];
    for x in 0..n {
        for &(y, v) in p.row(x) {
            if x != y {
                f[x * n + y] = pi[x] * v;
            }
        }
    }
    // symmetrize the flow to remove rounding asymmetry
    for x in 0..n {
        for y in x + 1..n {
            let s = 0.5 * (f[x * n + y] + f[y * n + x]);
            f[x * n + y] = s;
            f[y * n + x] = s;
        }
    }
    (pi, f, n)
}

fn exact_q(mask: u32, f: &[f64], n: usize) -> f64 {
    let mut q = 0.0;
    for x in 0..n {
        if mask >> x & 1 == 1 {
            for y in 0..n {
                if mask >> y & 1 == 0 {
                    q += f[x * n + y];
                }
            }
        }
    }
    q
}

/// Exhaustive conductance over all `2^n` subsets, visited in Gray-code order
/// with incremental flow updates.
pub fn conductance_exact(p: &FiniteKernel) -> Result<Conductance> {
    let n = p.len();
    if n > MAX_EXACT_CONDUCTANCE {
        return Err(Error::TooLarge {
            what: "exhaustive conductance",
            size: n,
            limit: MAX_EXACT_CONDUCTANCE,
        });
    }
    if n < 2 {
        return Err(Error::Degenerate("conductance needs at least two states".into()));
    }
    let (pi, f, n) = flows(p);
    let out: Vec<f64> = (0..n).map(|z| f[z * n..(z + 1) * n].iter().sum()).collect();
    let mut mask: u32 = 0;
    let mut mass = 0.0;
    let mut q = 0.0;
    let mut best = f64::INFINITY;
    let mut best_mask = 0u32;
    let total: u64 = 1 << n;
    for k in 1..total {
        let z = k.trailing_zeros() as usize;
        let adding = mask >> z & 1 == 0;
        let inner: f64 = (0..n)
            .filter(|&x| x != z && mask >> x & 1 == 1)
            .map(|x| f[x * n + z])
            .sum();
        if adding {
            q += out[z] - 2.0 * inner;
            mass += pi[z];
            mask |= 1 << z;
        } else {
            q -= out[z] - 2.0 * inner;
            mass -= pi[z];
            mask &= !(1 << z);
        }
        if k % RECOMPUTE_EVERY == 0 {
            q = exact_q(mask, &f, n);
            mass = (0..n).filter(|&x| mask >> x & 1 == 1).map(|x| pi[x]).sum();
        }
        if mask != 0 && mass <= 0.5 + MASS_SLACK {
            let ratio = q.max(0.0) / mass;
            if ratio < best {
                best = ratio;
                best_mask = mask;
            }
        }
    }
    let set: Vec<usize> = (0..n).filter(|&x| best_mask >> x & 1 == 1).collect();
    let m: f64 = set.iter().map(|&x| pi[x]).sum();
    let h = exact_q(best_mask, &f, n) / m;
    Ok(Conductance { h, set })
}

/// Conductance restricted to prefixes and suffixes of the state order.
/// For a birth-death chain this is an upper bound on `h`, computed in
/// log-space so it survives tiny stationary masses.
pub fn interval_conductance(p: &FiniteKernel) -> Result<Conductance> {
    let n = p.len();
    if n < 2 {
        return Err(Error::Degenerate("conductance needs at least two states".into()));
    }
    let lp = p.log_stationary();
    let mut best = f64::INFINITY;
    let mut best_set = Vec::new();
    // log Q(prefix 0..=k, rest) and log π(prefix)
    for k in 0..n - 1 {
        for prefix in [true, false] {
            let members: Vec<usize> = if prefix { (0..=k).collect() } else { (k + 1..n).collect() };
            let log_mass = log_sum_exp(members.iter().map(|&x| lp[x]));
            if log_mass > (0.5 + MASS_SLACK).ln() {
                continue;
            }
            let mut flow_terms = Vec::new();
            for &x in &members {
                for &(y, v) in p.row(x) {
                    let inside = if prefix { y <= k } else { y > k };
                    if !inside && v > 0.0 {
                        flow_terms.push(lp[x] + v.ln());
                    }
                }
            }
            let ratio = (log_sum_exp(flow_terms) - log_mass).exp();
            if ratio < best {
                best = ratio;
                best_set = members;
            }
        }
    }
    Ok(Conductance {
        h: best,
        set: best_set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::StateLabel;

    fn uniform(n: usize) -> FiniteKernel {
        FiniteKernel::from_dense(
            (0..n).map(StateLabel::Index).collect(),
            vec![0.0; n],
            &vec![1.0 / n as f64; n * n],
        )
        .unwrap()
    }

    #[test]
    fn two_state_conductance_is_q() {
        let q = 0.35;
        let k = FiniteKernel::from_dense(
            vec![StateLabel::Index(0), StateLabel::Index(1)],
            vec![0.0, 0.0],
            &[1.0 - q, q, q, 1.0 - q],
        )
        .unwrap();
        assert!((conductance_exact(&k).unwrap().h - q).abs() < 1e-15);
    }

    #[test]
    fn uniform_chain_brute_force() {
        // Q(A,Aᶜ)/π(A) = |Aᶜ|/n for the chain P(x,y) = 1/n
        for n in [2usize, 3, 5, 8, 11] {
            let h = conductance_exact(&uniform(n)).unwrap().h;
            let expected = (n - n / 2) as f64 / n as f64;
            assert!((h - expected).abs() < 1e-14, "n={n}: {h}");
        }
    }

    #[test]
    fn rejects_large_input() {
        assert!(matches!(
            conductance_exact(&uniform(25)),
            Err(Error::TooLarge { .. })
        ));
    }
}
