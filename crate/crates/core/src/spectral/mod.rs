//! Spectra, gaps, conductance and the inequality toolkit for reversible
//! kernels.
//!
//! A reversible kernel is symmetrized as `S(x,y) = sqrt(P(x,y) P(y,x))`,
//! which equals `D^{1/2} P D^{-1/2}`. When the kernel carries a mirror map
//! the spectrum is computed sector by sector: the even sector is the chain
//! lumped onto mirror orbits and the odd sector acts on antisymmetric
//! functions. Sectors that are tridiagonal go straight to QL.

pub mod bounds;
pub mod conductance;
pub mod eigen;
mod refine;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::FiniteKernel;

pub use bounds::*;
pub use conductance::*;
pub use refine::odd_sector_gap;

/// Largest matrix handed to the dense solver.
pub const DENSE_LIMIT: usize = 4096;
/// Detailed-balance residual above which a kernel is rejected.
pub const REVERSIBILITY_TOL: f64 = 1e-8;
/// Gaps below this are not resolvable by a direct eigensolve.
pub const RESOLUTION: f64 = 1e-12;
/// Below this value of `1 − λ₁` the odd-sector refinement is attempted.
pub const REFINE_BELOW: f64 = 1e-6;
/// Smallest even-sector gap still trusted from the plain eigensolve when
/// combining it with a refined odd-sector value.
pub const EVEN_TRUST: f64 = 1e-9;

/// Eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub dimension: usize,
}

impl Spectrum {
    pub fn new(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let dimension = eigenvalues.len();
        Spectrum {
            eigenvalues,
            dimension,
        }
    }

    /// Second largest eigenvalue (`1` for a single state).
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(1.0)
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// `1 − max(λ₁, |λ_min|)`; `1` for a single state.
    pub fn gap(&self) -> f64 {
        gap(self)
    }
}

/// `1 − max(λ₁, |λ_min|)`; dimension one has gap `1`.
pub fn gap(s: &Spectrum) -> f64 {
    if s.dimension <= 1 {
        return 1.0;
    }
    1.0 - s.lambda1().max(s.lambda_min().abs())
}

/// Sparse symmetric matrix with rows sorted by column.
#[derive(Debug, Clone)]
pub(crate) struct SymSparse {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SymSparse {
    fn n(&self) -> usize {
        self.rows.len()
    }

    fn is_tridiagonal(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().all(|&(j, _)| j + 1 >= i && j <= i + 1))
    }

    fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if n == 0 {
            return Ok(Vec::new());
        }
        if self.is_tridiagonal() {
            let get = |i: usize, j: usize| {
                self.rows[i]
                    .iter()
                    .find(|e| e.0 == j)
                    .map_or(0.0, |e| e.1)
            };
            let d: Vec<f64> = (0..n).map(|i| get(i, i)).collect();
            let e: Vec<f64> = (0..n.saturating_sub(1)).map(|i| get(i, i + 1)).collect();
            return eigen::tridiagonal_eigenvalues(&d, &e);
        }
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                what: "dense eigenproblem",
                size: n,
                limit: DENSE_LIMIT,
            });
        }
        eigen::symmetric_eigenvalues(self.dense(), n)
    }

    fn dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut a = vec![0.0; n * n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                a[i * n + j] = v;
            }
        }
        a
    }
}

fn check_reversible(p: &FiniteKernel) -> Result<()> {
    let r = p.detailed_balance_residual();
    if r > REVERSIBILITY_TOL {
        return Err(Error::NotReversible(format!("detailed-balance residual {r:e}")));
    }
    Ok(())
}

/// Symmetrization without any sector split.
pub(crate) fn symmetrized(p: &FiniteKernel) -> SymSparse {
    let rows = (0..p.len())
        .map(|i| {
            p.row(i)
                .iter()
                .map(|&(j, v)| if i == j { (j, v) } else { (j, (v * p.get(j, i)).sqrt()) })
                .collect()
        })
        .collect();
    SymSparse { rows }
}

/// Mirror orbits: representatives of two-element orbits (`H⁺`, lower index
/// first) and of fixed points (`H⁰`).
pub(crate) struct Orbits {
    pub pairs: Vec<usize>,
    pub fixed: Vec<usize>,
    /// Orbit id of every state in the even-sector ordering.
    pub orbit_of: Vec<usize>,
    /// Position in `pairs` of every state belonging to a pair.
    pub pair_of: Vec<Option<usize>>,
}

pub(crate) fn orbits(mirror: &[usize]) -> Orbits {
    let n = mirror.len();
    let mut orbit_of = vec![usize::MAX; n];
    let mut pair_of = vec![None; n];
    let mut pairs = Vec::new();
    let mut fixed = Vec::new();
    let mut next = 0;
    for c in 0..n {
        let m = mirror[c];
        if m < c {
            continue;
        }
        orbit_of[c] = next;
        orbit_of[m] = next;
        next += 1;
        if m == c {
            fixed.push(c);
        } else {
            pair_of[c] = Some(pairs.len());
            pair_of[m] = Some(pairs.len());
            pairs.push(c);
        }
    }
    Orbits {
        pairs,
        fixed,
        orbit_of,
        pair_of,
    }
}

/// Even and odd sector matrices of a kernel with a mirror map.
pub(crate) fn sectors(p: &FiniteKernel, mirror: &[usize]) -> (SymSparse, SymSparse) {
    let o = orbits(mirror);
    let norbits = o.pairs.len() + o.fixed.len();
    let mut reps = vec![0usize; norbits];
    for c in 0..p.len() {
        if mirror[c] >= c {
            reps[o.orbit_of[c]] = c;
        }
    }
    // even sector: P_e(O, O') = P(rep O, O')
    let lump = |c: usize| {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(e, v) in p.row(c) {
            row.push((o.orbit_of[e], v));
        }
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, v) in row {
            match merged.last_mut() {
                Some(l) if l.0 == j => l.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged
    };
    let even_rows: Vec<Vec<(usize, f64)>> = reps.iter().map(|&c| lump(c)).collect();
    let get = |rows: &Vec<Vec<(usize, f64)>>, i: usize, j: usize| {
        rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |k| rows[i][k].1)
    };
    let even = SymSparse {
        rows: (0..norbits)
            .map(|i| {
                even_rows[i]
                    .iter()
                    .map(|&(j, v)| {
                        if i == j {
                            (j, v)
                        } else {
                            (j, (v * get(&even_rows, j, i)).sqrt())
                        }
                    })
                    .collect()
            })
            .collect(),
    };
    // odd sector on H⁺: P_o(c, e) = P(c, e) − P(c, σe)
    let odd_row = |c: usize| {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(e, v) in p.row(c) {
            if let Some(k) = o.pair_of[e] {
                let sign = if e == o.pairs[k] { 1.0 } else { -1.0 };
                row.push((k, sign * v));
            }
        }
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, v) in row {
            match merged.last_mut() {
                Some(l) if l.0 == j => l.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged
    };
    let odd_rows: Vec<Vec<(usize, f64)>> = o.pairs.iter().map(|&c| odd_row(c)).collect();
    let odd = SymSparse {
        rows: (0..o.pairs.len())
            .map(|i| {
                odd_rows[i]
                    .iter()
                    .map(|&(j, v)| {
                        if i == j {
                            (j, v)
                        } else {
                            let w = get(&odd_rows, j, i);
                            (j, v.signum() * (v * w).abs().sqrt())
                        }
                    })
                    .collect()
            })
            .collect(),
    };
    (even, odd)
}

/// Eigenvalues of each mirror sector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorSpectra {
    pub even: Spectrum,
    pub odd: Spectrum,
}

/// Spectra of the even and odd sectors of a kernel with a mirror map.
pub fn sector_spectra(p: &FiniteKernel) -> Result<SectorSpectra> {
    check_reversible(p)?;
    let mirror = p
        .mirror()
        .ok_or_else(|| Error::param("kernel", "no mirror map attached"))?;
    let (even, odd) = sectors(p, mirror);
    Ok(SectorSpectra {
        even: Spectrum::new(even.eigenvalues()?),
        odd: Spectrum::new(odd.eigenvalues()?),
    })
}

/// Full spectrum of a reversible kernel.
pub fn spectrum(p: &FiniteKernel) -> Result<Spectrum> {
    check_reversible(p)?;
    if p.mirror().is_some() {
        let s = sector_spectra(p)?;
        let mut all = s.even.eigenvalues;
        all.extend(s.odd.eigenvalues);
        return Ok(Spectrum::new(all));
    }
    spectrum_direct(p)
}

/// Spectrum from one solve of the whole symmetrized matrix.
pub fn spectrum_direct(p: &FiniteKernel) -> Result<Spectrum> {
    check_reversible(p)?;
    Ok(Spectrum::new(symmetrized(p).eigenvalues()?))
}

/// Eigenpairs of the symmetrized kernel together with `sqrt(π)`.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Row-major; column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
    pub sqrt_pi: Vec<f64>,
}

pub fn eigensystem(p: &FiniteKernel) -> Result<Eigensystem> {
    check_reversible(p)?;
    let n = p.len();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            what: "dense eigenproblem",
            size: n,
            limit: DENSE_LIMIT,
        });
    }
    let (values, vectors) = eigen::symmetric_eigen(symmetrized(p).dense(), n)?;
    let sqrt_pi = p.stationary().iter().map(|v| v.sqrt()).collect();
    Ok(Eigensystem {
        values,
        vectors,
        sqrt_pi,
    })
}

/// How a reported gap was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapStatus {
    /// Straight from the eigensolve.
    Direct,
    /// `1 − λ₁` recomputed by the odd-sector M-matrix iteration.
    Refined,
    /// `1 − λ₁` is below [`RESOLUTION`] and could not be refined.
    BelowResolution,
}

/// Gap of one kernel with enough detail to audit it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    /// `1 − max(λ₁, |λ_min|)`.
    pub gap: f64,
    /// `1 − λ₁`.
    pub one_minus_lambda1: f64,
    pub lambda1: f64,
    pub lambda_min: f64,
    pub status: GapStatus,
    pub dimension: usize,
}

/// Gap with small values of `1 − λ₁` resolved in relative precision when
/// the kernel admits the odd-sector refinement.
pub fn gap_report(p: &FiniteKernel) -> Result<GapReport> {
    let (spec, even_gap) = if p.mirror().is_some() {
        let s = sector_spectra(p)?;
        let even_gap = 1.0 - s.even.lambda1();
        let mut all = s.even.eigenvalues.clone();
        all.extend(s.odd.eigenvalues.iter().copied());
        (Spectrum::new(all), Some(even_gap))
    } else {
        (spectrum_direct(p)?, None)
    };
    let lambda_min = spec.lambda_min();
    let mut one_minus = 1.0 - spec.lambda1();
    let mut status = GapStatus::Direct;
    if spec.dimension > 1 && one_minus < REFINE_BELOW {
        match (odd_sector_gap(p)?, even_gap) {
            (Some(odd), Some(even)) if even >= EVEN_TRUST => {
                one_minus = odd.min(even);
                status = GapStatus::Refined;
            }
            _ => {
                if one_minus < RESOLUTION {
                    status = GapStatus::BelowResolution;
                }
            }
        }
    }
    if spec.dimension <= 1 {
        one_minus = 1.0;
    }
    let gap = if spec.dimension <= 1 {
        1.0
    } else {
        one_minus.min(1.0 + lambda_min)
    };
    Ok(GapReport {
        gap,
        one_minus_lambda1: one_minus,
        lambda1: 1.0 - one_minus,
        lambda_min,
        status,
        dimension: spec.dimension,
    })
}

/// Independent estimate of `λ₁` by power iteration on `(S + I)/2` with the
/// top eigenvector `sqrt(π)` projected out.
pub fn power_lambda1(p: &FiniteKernel, iterations: usize) -> Result<f64> {
    check_reversible(p)?;
    let s = symmetrized(p);
    let n = p.len();
    if n == 1 {
        return Ok(1.0);
    }
    let top: Vec<f64> = p.stationary().iter().map(|v| v.sqrt()).collect();
    let project = |v: &mut Vec<f64>| {
        let c: f64 = v.iter().zip(&top).map(|(a, b)| a * b).sum();
        for (x, t) in v.iter_mut().zip(&top) {
            *x -= c * t;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
    };
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 113) as f64 / 113.0).collect();
    project(&mut v);
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 0.5 * (v[i] + s.rows[i].iter().map(|&(j, w)| w * v[j]).sum::<f64>()))
            .collect()
    };
    let mut rq = 0.0;
    for _ in 0..iterations {
        let mut w = apply(&v);
        rq = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        project(&mut w);
        v = w;
    }
    Ok(2.0 * rq - 1.0)
}

/// Spectral summary of one kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub gap: f64,
    pub lambda1: f64,
    pub lambda_min: f64,
    pub gap_status: GapStatus,
    pub conductance: Option<f64>,
    pub cheeger_lower: Option<f64>,
    pub cheeger_upper: Option<f64>,
    pub bounds: Vec<BoundRecord>,
}

/// Gap, extreme eigenvalues, Gershgorin bound and, for at most
/// [`MAX_EXACT_CONDUCTANCE`] states, the conductance and Cheeger interval.
pub fn summarize(p: &FiniteKernel) -> Result<SpectralSummary> {
    let r = gap_report(p)?;
    let (conductance, cheeger_lower, cheeger_upper) = if p.len() <= MAX_EXACT_CONDUCTANCE && p.len() > 1 {
        let c = conductance_exact(p)?;
        let (lo, hi) = cheeger_interval(c.h.clamp(0.0, 1.0))?;
        (Some(c.h), Some(lo), Some(hi))
    } else {
        (None, None, None)
    };
    let g = gershgorin_bound(p);
    let bounds = vec![BoundRecord::lower("gershgorin_lambda_min", true, g, r.lambda_min, 1e-10)];
    Ok(SpectralSummary {
        gap: r.gap,
        lambda1: r.lambda1,
        lambda_min: r.lambda_min,
        gap_status: r.status,
        conductance,
        cheeger_lower,
        cheeger_upper,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{full_chain, signed_lumped_chain, ChainKind, StateLabel};
    use crate::model::ModelSpec;

    fn two_state(q: f64) -> FiniteKernel {
        FiniteKernel::from_dense(
            vec![StateLabel::Index(0), StateLabel::Index(1)],
            vec![0.0, 0.0],
            &[1.0 - q, q, q, 1.0 - q],
        )
        .unwrap()
    }

    #[test]
    fn gap_examples() {
        assert!((gap(&Spectrum::new(vec![1.0, 0.5, -0.7])) - 0.3).abs() < 1e-15);
        assert!((gap(&Spectrum::new(vec![1.0, 0.9, 0.1])) - 0.1).abs() < 1e-15);
        assert_eq!(gap(&Spectrum::new(vec![1.0])), 1.0);
    }

    #[test]
    fn two_state_spectrum() {
        let s = spectrum(&two_state(0.2)).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-15);
        assert!((s.eigenvalues[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn sectors_match_direct() {
        for m in [
            ModelSpec::ising(6, 1.3).unwrap(),
            ModelSpec::beg(4, 1.0, 2.0).unwrap(),
        ] {
            for kind in [ChainKind::Naive, ChainKind::EquiEnergy] {
                let k = full_chain(&m, kind).unwrap();
                let a = spectrum(&k).unwrap();
                let b = spectrum_direct(&k).unwrap();
                for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                    assert!((x - y).abs() < 1e-12, "{m:?} {kind:?}: {x} vs {y}");
                }
            }
        }
        let w = ModelSpec::warmup(6, 2.0, 0.3).unwrap();
        let k = full_chain(&w, ChainKind::SmallWorld).unwrap();
        let a = spectrum(&k).unwrap();
        let b = spectrum_direct(&k).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn power_iteration_agrees() {
        let m = ModelSpec::ising(6, 0.8).unwrap();
        let k = signed_lumped_chain(&m, ChainKind::EquiEnergy).unwrap();
        let s = spectrum(&k).unwrap();
        let p = power_lambda1(&k, 5000).unwrap();
        assert!((p - s.lambda1()).abs() < 1e-8, "{p} vs {}", s.lambda1());
    }

    #[test]
    fn refined_gap_agrees_with_direct_when_resolvable() {
        for (n, beta) in [(20, 2.0), (30, 2.0), (40, 1.5)] {
            let m = ModelSpec::ising(n, beta).unwrap();
            let k = signed_lumped_chain(&m, ChainKind::Naive).unwrap();
            let direct = 1.0 - spectrum(&k).unwrap().lambda1();
            let refined = odd_sector_gap(&k).unwrap().unwrap();
            assert!(
                (direct - refined).abs() <= 1e-9 * refined + 1e-14,
                "N={n}: {direct} vs {refined}"
            );
        }
    }

    #[test]
    fn hypercube_walk() {
        let m = ModelSpec::ising(4, 0.0).unwrap();
        let k = full_chain(&m, ChainKind::Naive).unwrap();
        let s = spectrum(&k).unwrap();
        let expected = [1.0, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5, -0.5, -0.5, -0.5, -1.0];
        for (x, y) in s.eigenvalues.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(s.gap().abs() < 1e-12);
        assert!((1.0 - s.lambda1() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_irreversible() {
        let k = FiniteKernel::from_dense(
            vec![StateLabel::Index(0), StateLabel::Index(1), StateLabel::Index(2)],
            vec![0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert!(matches!(spectrum(&k), Err(Error::NotReversible(_))));
    }
}
