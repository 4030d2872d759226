//! Inequalities relating gaps, conductance and variances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{lumped_projection, restriction, BirthDeathChain, FiniteKernel, Partition};

use super::{eigensystem, gap_report, spectrum};

/// One evaluated inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRecord {
    pub name: String,
    /// Whether the hypotheses of the inequality were checked and hold.
    pub hypotheses_checked: bool,
    pub value: f64,
    /// The exact quantity the bound is compared against, when known.
    pub compared: Option<f64>,
    pub holds: Option<bool>,
}

impl BoundRecord {
    /// Record for `actual ≥ bound`, allowing `tol` slack.
    pub fn lower(name: &str, hypotheses_checked: bool, bound: f64, actual: f64, tol: f64) -> Self {
        BoundRecord {
            name: name.to_string(),
            hypotheses_checked,
            value: bound,
            compared: Some(actual),
            holds: Some(actual >= bound - tol),
        }
    }

    /// Record for `actual ≤ bound`, allowing `tol` slack.
    pub fn upper(name: &str, hypotheses_checked: bool, bound: f64, actual: f64, tol: f64) -> Self {
        BoundRecord {
            name: name.to_string(),
            hypotheses_checked,
            value: bound,
            compared: Some(actual),
            holds: Some(actual <= bound + tol),
        }
    }

    /// Informational value without a comparison.
    pub fn info(name: &str, value: f64) -> Self {
        BoundRecord {
            name: name.to_string(),
            hypotheses_checked: false,
            value,
            compared: None,
            holds: None,
        }
    }

    /// `true` unless the inequality was checked under verified hypotheses
    /// and failed.
    pub fn is_sound(&self) -> bool {
        !(self.hypotheses_checked && self.holds == Some(false))
    }
}

/// Cheeger interval `(1 − 2h, 1 − h²/2)` for `λ₁`.
pub fn cheeger_interval(h: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::param("h", format!("conductance must lie in [0,1], got {h}")));
    }
    Ok((1.0 - 2.0 * h, 1.0 - h * h / 2.0))
}

/// `½ · Gap(P_H) · min_i Gap(P_{A_i})`.
pub fn decomposition_bound(p: &FiniteKernel, parts: &Partition) -> Result<f64> {
    let projected = lumped_projection(p, parts)?;
    let gh = gap_report(&projected)?.gap;
    let mut min_restricted = f64::INFINITY;
    for block in parts.members() {
        let r = restriction(p, &block)?;
        min_restricted = min_restricted.min(gap_report(&r)?.gap);
    }
    Ok(0.5 * gh * min_restricted)
}

/// Path bound `λ₁ ≤ 1 − (A/B) n^{−(q+2)}` for a birth-death chain with `n`
/// states, after checking that every interior rate and both boundary rates
/// are at least `A n^{−q}` and that `π` is `B`-unimodal around the index `k`
/// (0-based): `π(i) ≤ B π(j)` for `i ≤ j ≤ k` and `π(j) ≤ B π(i)` for
/// `k ≤ i ≤ j`.
pub fn bd_path_bound(c: &BirthDeathChain, a: f64, q: f64, b: f64, k: usize) -> Result<f64> {
    let n = c.len();
    if !(a > 0.0 && q >= 0.0 && b > 0.0) {
        return Err(Error::param("A, q, B", "need A, B > 0 and q >= 0"));
    }
    if k >= n {
        return Err(Error::param("k", format!("index {k} outside 0..{n}")));
    }
    if n < 2 {
        return Err(Error::Degenerate("path bound needs at least two states".into()));
    }
    let nf = n as f64;
    let floor = a * nf.powf(-q);
    for i in 0..n {
        let checks: &[(&str, f64)] = if i == 0 {
            &[("up", c.up[0])]
        } else if i == n - 1 {
            &[("down", c.down[n - 1])]
        } else {
            &[("up", c.up[i]), ("down", c.down[i])]
        };
        for &(dir, rate) in checks {
            if rate < floor {
                return Err(Error::Hypothesis(format!(
                    "{dir} rate at state {i} is {rate:e} < A n^-q = {floor:e}"
                )));
            }
        }
    }
    let lb = b.ln() + 1e-12;
    let lp = &c.log_weights;
    // i <= j <= k: π(i) <= B π(j)
    let mut arg = 0;
    for j in 0..=k {
        if lp[j] > lp[arg] {
            arg = j;
        }
        if lp[arg] - lp[j] > lb {
            return Err(Error::Hypothesis(format!(
                "monotonicity pair ({arg},{j}): p({arg}) > B p({j})"
            )));
        }
    }
    // k <= i <= j: π(j) <= B π(i)
    let mut arg = n - 1;
    for i in (k..n).rev() {
        if lp[i] > lp[arg] {
            arg = i;
        }
        if lp[arg] - lp[i] > lb {
            return Err(Error::Hypothesis(format!(
                "monotonicity pair ({i},{arg}): p({arg}) > B p({i})"
            )));
        }
    }
    Ok(1.0 - a / b * nf.powf(-(q + 2.0)))
}

/// Gershgorin lower bound on the smallest eigenvalue: `−1 + 2 min_i P(i,i)`.
pub fn gershgorin_bound(p: &FiniteKernel) -> f64 {
    let min_diag = (0..p.len()).map(|i| p.get(i, i)).fold(f64::INFINITY, f64::min);
    -1.0 + 2.0 * min_diag
}

/// `(1 − ε) · gap`, a lower bound on the gap of `(1 − ε) P + ε I`.
pub fn lazy_mixture_bound(gap_of_p: f64, epsilon: f64) -> f64 {
    (1.0 - epsilon) * gap_of_p
}

/// Spectral asymptotic variance of a function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvarSpectral {
    /// `Σ_{k≥1} a_k² (1 + λ_k)/(1 − λ_k)`.
    pub avar: f64,
    /// `2 Var_π(f) / (1 − λ₁)`.
    pub bound: f64,
    pub variance: f64,
    /// Set when `f` is constant; `avar` is then zero.
    pub degenerate: bool,
}

/// Asymptotic variance of `f` from the eigendecomposition.
pub fn avar_spectral(p: &FiniteKernel, f: &[f64]) -> Result<AvarSpectral> {
    if f.len() != p.len() {
        return Err(Error::StateMismatch(format!(
            "function has {} values for {} states",
            f.len(),
            p.len()
        )));
    }
    let es = eigensystem(p)?;
    let n = p.len();
    let pi: Vec<f64> = es.sqrt_pi.iter().map(|s| s * s).collect();
    let mean: f64 = f.iter().zip(&pi).map(|(a, b)| a * b).sum();
    let variance: f64 = f.iter().zip(&pi).map(|(a, b)| (a - mean).powi(2) * b).sum();
    let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if variance <= 1e-28 * scale * scale {
        return Ok(AvarSpectral {
            avar: 0.0,
            bound: 0.0,
            variance: 0.0,
            degenerate: true,
        });
    }
    if n > 1 && es.values[1] > 1.0 - 1e-12 {
        return Err(Error::Reducible(format!(
            "eigenvalue 1 has multiplicity > 1 (λ₁ = {})",
            es.values[1]
        )));
    }
    let mut avar = 0.0;
    for k in 1..n {
        let ak: f64 = (0..n).map(|x| f[x] * es.vectors[x * n + k] * es.sqrt_pi[x]).sum();
        let lk = es.values[k];
        avar += ak * ak * (1.0 + lk) / (1.0 - lk);
    }
    let bound = 2.0 * variance / (1.0 - es.values[1]);
    Ok(AvarSpectral {
        avar,
        bound,
        variance,
        degenerate: false,
    })
}

/// `sqrt((1 − π(x)) / (4 π(x)) · ρ^{2k})` with `ρ = max(λ₁, |λ_min|)`.
pub fn tv_bound(p: &FiniteKernel, x: usize, k: u32) -> Result<f64> {
    if x >= p.len() {
        return Err(Error::param("x", format!("state {x} out of range")));
    }
    let px = p.stationary()[x];
    if !(px > 0.0) {
        return Err(Error::Degenerate(format!("π({x}) = 0")));
    }
    let s = spectrum(p)?;
    let rho = if s.dimension > 1 {
        s.lambda1().max(s.lambda_min().abs()).min(1.0)
    } else {
        0.0
    };
    Ok(((1.0 - px) / (4.0 * px)).sqrt() * rho.powi(k as i32))
}
