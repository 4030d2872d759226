//! Finite reversible kernels: proposals, Metropolis chains and every derived
//! chain (lumped, restricted, projected).
//!
//! Full-space state indices:
//!
//! * Ising: bit `j` of the index set means `x_j = +1`;
//! * BEG: base-3 digit `j` of the index is `x_j + 1`;
//! * Warmup: index `x + N`.
//!
//! Class-space kernels list states in [`ClassTable`] order.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    class_table, log_sum_exp, ClassTable, EnergyClass, ModelKind, ModelSpec, Sign,
    SpinConfiguration,
};

/// Largest full Ising space that will be materialized.
pub const MAX_FULL_ISING_N: usize = 14;
/// Largest full BEG space that will be materialized.
pub const MAX_FULL_BEG_N: usize = 8;
/// Cap on stored transition entries of one kernel.
pub const MAX_ENTRIES: usize = 20_000_000;

/// Which Metropolis chain to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    /// Local proposal only (`M_E`).
    Naive,
    /// Local moves mixed with global flips and uniform orbit draws (`M`).
    EquiEnergy,
    /// Warming-up walk mixed with the reflection `x -> -x` (`M^(ε)`).
    SmallWorld,
}

impl ChainKind {
    pub fn name(self) -> &'static str {
        match self {
            ChainKind::Naive => "naive",
            ChainKind::EquiEnergy => "equi-energy",
            ChainKind::SmallWorld => "small-world",
        }
    }

    fn check(self, m: &ModelSpec) -> Result<()> {
        let ok = match self {
            ChainKind::Naive => true,
            ChainKind::EquiEnergy => m.kind != ModelKind::Warmup,
            ChainKind::SmallWorld => m.kind == ModelKind::Warmup,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::WrongModel {
                op: self.name(),
                model: m.kind.name(),
            })
        }
    }
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(ChainKind::Naive),
            "equi-energy" | "equi_energy" | "ee" => Ok(ChainKind::EquiEnergy),
            "small-world" | "small_world" | "sw" => Ok(ChainKind::SmallWorld),
            other => Err(Error::param("chain", format!("unknown chain kind `{other}`"))),
        }
    }
}

/// Label attached to one state of a [`FiniteKernel`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateLabel {
    Class(EnergyClass),
    Config(SpinConfiguration),
    /// Unsigned energy level: `|S|` and, for BEG, `R`.
    Level { magnitude: u32, quadrupole: Option<u32> },
    Block(usize),
    Index(usize),
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Class(c) => write!(f, "{c}"),
            StateLabel::Config(x) => write!(f, "{x}"),
            StateLabel::Level {
                magnitude,
                quadrupole: Some(r),
            } => write!(f, "{magnitude}:{r}"),
            StateLabel::Level {
                magnitude,
                quadrupole: None,
            } => write!(f, "{magnitude}"),
            StateLabel::Block(b) => write!(f, "B{b}"),
            StateLabel::Index(i) => write!(f, "{i}"),
        }
    }
}

/// A row-stochastic matrix with unnormalized log stationary weights.
///
/// Rows are stored sparse and sorted by column. `mirror`, when present, is
/// an involution of the state set that commutes with the kernel (the global
/// sign flip); the spectral routines use it to split the spectrum.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    labels: Vec<StateLabel>,
    log_weights: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    mirror: Option<Vec<usize>>,
}

impl FiniteKernel {
    /// Builds a kernel from raw rows; duplicate columns are summed.
    pub fn from_rows(
        labels: Vec<StateLabel>,
        log_weights: Vec<f64>,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        let n = labels.len();
        if log_weights.len() != n || rows.len() != n {
            return Err(Error::StateMismatch(format!(
                "{} labels, {} weights, {} rows",
                n,
                log_weights.len(),
                rows.len()
            )));
        }
        if n == 0 {
            return Err(Error::param("kernel", "empty state set"));
        }
        if let Some(w) = log_weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::param("log_weights", format!("non-finite weight {w}")));
        }
        let mut clean = Vec::with_capacity(n);
        let mut total = 0usize;
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, p) in row {
                if j >= n {
                    return Err(Error::StateMismatch(format!("row {i} points to state {j} >= {n}")));
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::param("transition", format!("entry ({i},{j}) = {p}")));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += p,
                    _ => merged.push((j, p)),
                }
            }
            merged.retain(|e| e.1 > 0.0);
            total += merged.len();
            if total > MAX_ENTRIES {
                return Err(Error::TooLarge {
                    what: "kernel entries",
                    size: total,
                    limit: MAX_ENTRIES,
                });
            }
            clean.push(merged);
        }
        Ok(FiniteKernel {
            labels,
            log_weights,
            rows: clean,
            mirror: None,
        })
    }

    /// Builds a kernel from a dense row-major matrix.
    pub fn from_dense(labels: Vec<StateLabel>, log_weights: Vec<f64>, dense: &[f64]) -> Result<Self> {
        let n = labels.len();
        if dense.len() != n * n {
            return Err(Error::StateMismatch(format!("dense matrix has {} entries, expected {}", dense.len(), n * n)));
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dense[i * n + j] != 0.0)
                    .map(|j| (j, dense[i * n + j]))
                    .collect()
            })
            .collect();
        Self::from_rows(labels, log_weights, rows)
    }

    /// Attaches a state involution commuting with the kernel.
    pub fn with_mirror(mut self, mirror: Vec<usize>) -> Result<Self> {
        let n = self.len();
        if mirror.len() != n || mirror.iter().enumerate().any(|(i, &j)| j >= n || mirror[j] != i) {
            return Err(Error::StateMismatch("mirror map is not an involution".into()));
        }
        self.mirror = Some(mirror);
        Ok(self)
    }

    pub fn without_mirror(mut self) -> Self {
        self.mirror = None;
        self
    }

    pub fn with_labels(mut self, labels: Vec<StateLabel>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::StateMismatch("label count differs from state count".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn mirror(&self) -> Option<&[usize]> {
        self.mirror.as_deref()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `P(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |e| e.0) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    /// Normalized stationary distribution.
    pub fn stationary(&self) -> Vec<f64> {
        let z = log_sum_exp(self.log_weights.iter().copied());
        self.log_weights.iter().map(|w| (w - z).exp()).collect()
    }

    /// Log of the normalized stationary distribution.
    pub fn log_stationary(&self) -> Vec<f64> {
        let z = log_sum_exp(self.log_weights.iter().copied());
        self.log_weights.iter().map(|w| w - z).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut d = vec![0.0; n * n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                d[i * n + j] = p;
            }
        }
        d
    }

    /// Largest `|Σ_j P(i,j) − 1|`.
    pub fn stochasticity_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative detailed-balance residual
    /// `|π(x)P(x,y) − π(y)P(y,x)| / max(...)`; infinite when only one side is
    /// positive.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                if j <= i {
                    continue;
                }
                let q = self.get(j, i);
                if q == 0.0 {
                    return f64::INFINITY;
                }
                let a = self.log_weights[i] + p.ln();
                let b = self.log_weights[j] + q.ln();
                worst = worst.max((-(a - b).abs()).exp_m1().abs());
            }
        }
        for (j, row) in self.rows.iter().enumerate() {
            for &(i, _) in row {
                if i < j && self.get(i, j) == 0.0 {
                    return f64::INFINITY;
                }
            }
        }
        worst
    }

    /// Fails unless rows sum to one within `tol` and detailed balance holds
    /// within `tol` relative.
    pub fn check_reversible(&self, tol: f64) -> Result<()> {
        let s = self.stochasticity_error();
        if s > tol {
            return Err(Error::NotReversible(format!("row sum error {s:e}")));
        }
        let r = self.detailed_balance_residual();
        if r > tol {
            return Err(Error::NotReversible(format!("detailed-balance residual {r:e}")));
        }
        Ok(())
    }

    /// `true` when every transition connects neighbours in the state order.
    pub fn is_birth_death(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().all(|&(j, _)| j + 1 >= i && j <= i + 1))
    }

    /// Text export: one line per state, `label: neighbour=prob ...`.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&self.labels[i].to_string());
            out.push(':');
            for &(j, p) in row {
                out.push(' ');
                out.push_str(&self.labels[j].to_string());
                out.push('=');
                out.push_str(&format!("{p:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Assignment of states to blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    blocks: usize,
}

impl Partition {
    /// Every block id in `0..max+1` must be used.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let blocks = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; blocks];
        for &b in &assignment {
            seen[b] = true;
        }
        if let Some(b) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyBlock(b));
        }
        Ok(Partition { assignment, blocks })
    }

    /// Blocks numbered by first appearance of each key.
    pub fn by_key<K: Eq + std::hash::Hash, F: Fn(usize) -> K>(n: usize, key: F) -> Self {
        let mut ids = HashMap::new();
        let assignment = (0..n)
            .map(|i| {
                let next = ids.len();
                *ids.entry(key(i)).or_insert(next)
            })
            .collect::<Vec<_>>();
        let blocks = ids.len();
        Partition { assignment, blocks }
    }

    pub fn trivial(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            blocks: 1,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            blocks: n,
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.blocks];
        for (i, &b) in self.assignment.iter().enumerate() {
            out[b].push(i);
        }
        out
    }
}

/// A chain on `0..n` moving only to adjacent states.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathChain {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub labels: Vec<StateLabel>,
}

impl BirthDeathChain {
    pub fn new(up: Vec<f64>, down: Vec<f64>, log_weights: Vec<f64>) -> Result<Self> {
        let labels = (0..up.len()).map(StateLabel::Index).collect();
        Self::with_labels(up, down, log_weights, labels)
    }

    pub fn with_labels(
        up: Vec<f64>,
        down: Vec<f64>,
        log_weights: Vec<f64>,
        labels: Vec<StateLabel>,
    ) -> Result<Self> {
        let n = up.len();
        if n == 0 || down.len() != n || log_weights.len() != n || labels.len() != n {
            return Err(Error::StateMismatch("birth-death vectors differ in length".into()));
        }
        if up[n - 1] != 0.0 || down[0] != 0.0 {
            return Err(Error::param("rates", "boundary states cannot move outward"));
        }
        for i in 0..n {
            let (u, d) = (up[i], down[i]);
            if !(u >= 0.0 && d >= 0.0) || u + d > 1.0 + 1e-12 {
                return Err(Error::param("rates", format!("state {i}: up={u}, down={d}")));
            }
        }
        Ok(BirthDeathChain {
            up,
            down,
            log_weights,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    pub fn hold(&self, i: usize) -> f64 {
        1.0 - self.up[i] - self.down[i]
    }

    pub fn stationary(&self) -> Vec<f64> {
        let z = log_sum_exp(self.log_weights.iter().copied());
        self.log_weights.iter().map(|w| (w - z).exp()).collect()
    }

    /// Largest relative residual of `π(i) up(i) = π(i+1) down(i+1)`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            let (u, d) = (self.up[i], self.down[i + 1]);
            if u == 0.0 && d == 0.0 {
                continue;
            }
            if u == 0.0 || d == 0.0 {
                return f64::INFINITY;
            }
            let a = self.log_weights[i] + u.ln();
            let b = self.log_weights[i + 1] + d.ln();
            worst = worst.max((-(a - b).abs()).exp_m1().abs());
        }
        worst
    }

    pub fn to_kernel(&self) -> Result<FiniteKernel> {
        let n = self.len();
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::with_capacity(3);
                if i > 0 {
                    r.push((i - 1, self.down[i]));
                }
                r.push((i, self.hold(i)));
                if i + 1 < n {
                    r.push((i + 1, self.up[i]));
                }
                r
            })
            .collect();
        FiniteKernel::from_rows(self.labels.clone(), self.log_weights.clone(), rows)
    }

    /// Reads a birth-death chain off a tridiagonal kernel.
    pub fn from_kernel(k: &FiniteKernel) -> Result<Self> {
        if !k.is_birth_death() {
            return Err(Error::param("kernel", "not a birth-death kernel"));
        }
        let n = k.len();
        let up = (0..n).map(|i| if i + 1 < n { k.get(i, i + 1) } else { 0.0 }).collect();
        let down = (0..n).map(|i| if i > 0 { k.get(i, i - 1) } else { 0.0 }).collect();
        Self::with_labels(up, down, k.log_weights.to_vec(), k.labels.to_vec())
    }
}

/// Metropolis chain of `proposal` with target log-weights `target`.
///
/// Acceptance is `exp(min(0, Δ))` with
/// `Δ = log π(y) + log K(y,x) − log π(x) − log K(x,y)`; when the proposal is
/// symmetric on a pair the proposal terms are dropped so equal-weight moves
/// accept with probability exactly one.
pub fn metropolize(proposal: &FiniteKernel, target: &[f64]) -> Result<FiniteKernel> {
    let n = proposal.len();
    if target.len() != n {
        return Err(Error::StateMismatch(format!(
            "{} target weights for {} states",
            target.len(),
            n
        )));
    }
    let mut rows = Vec::with_capacity(n);
    for x in 0..n {
        let mut row = Vec::with_capacity(proposal.rows[x].len());
        let mut hold = 0.0;
        for &(y, kxy) in &proposal.rows[x] {
            if y == x {
                hold += kxy;
                continue;
            }
            let kyx = proposal.get(y, x);
            if kyx == 0.0 {
                return Err(Error::NotReversible(format!(
                    "proposal K({x},{y}) > 0 but K({y},{x}) = 0"
                )));
            }
            let delta = if kxy == kyx {
                target[y] - target[x]
            } else {
                target[y] + kyx.ln() - target[x] - kxy.ln()
            };
            let d = delta.min(0.0);
            row.push((y, kxy * d.exp()));
            hold += kxy * -d.exp_m1();
        }
        row.push((x, hold));
        rows.push(row);
    }
    let k = FiniteKernel::from_rows(proposal.labels.clone(), target.to_vec(), rows)?;
    Ok(match &proposal.mirror {
        Some(m) => k.with_mirror(m.clone())?,
        None => k,
    })
}

/// Chain on blocks with `P_H(i,j) = Σ_{x∈A_i, y∈A_j} π(x)P(x,y) / (2π(A_i))`
/// for `i ≠ j`; the factor one half makes the result lazy.
pub fn lumped_projection(p: &FiniteKernel, parts: &Partition) -> Result<FiniteKernel> {
    project(p, parts, 0.5)
}

/// Exact lumping without the one-half factor: `Σ_{x∈A_i} π(x) P(x, A_j) / π(A_i)`.
/// Equals the strong lumping when the chain is strongly lumpable.
pub fn lumped_chain(p: &FiniteKernel, parts: &Partition) -> Result<FiniteKernel> {
    project(p, parts, 1.0)
}

fn project(p: &FiniteKernel, parts: &Partition, factor: f64) -> Result<FiniteKernel> {
    if parts.len() != p.len() {
        return Err(Error::StateMismatch(format!(
            "partition covers {} states, kernel has {}",
            parts.len(),
            p.len()
        )));
    }
    let members = parts.members();
    let m = members.len();
    let block_lw: Vec<f64> = members
        .iter()
        .map(|b| log_sum_exp(b.iter().map(|&x| p.log_weights[x])))
        .collect();
    let mut rows = Vec::with_capacity(m);
    for (bi, block) in members.iter().enumerate() {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for &x in block {
            let rel = (p.log_weights[x] - block_lw[bi]).exp();
            for &(y, pxy) in &p.rows[x] {
                let bj = parts.block_of(y);
                if bj != bi {
                    *acc.entry(bj).or_insert(0.0) += rel * pxy;
                }
            }
        }
        let mut row: Vec<(usize, f64)> = acc.into_iter().map(|(j, v)| (j, factor * v)).collect();
        row.sort_by_key(|e| e.0);
        let out: f64 = row.iter().map(|e| e.1).sum();
        row.push((bi, 1.0 - out));
        rows.push(row);
    }
    let labels = (0..m).map(StateLabel::Block).collect();
    let k = FiniteKernel::from_rows(labels, block_lw, rows)?;
    match p.mirror() {
        Some(mir) => {
            let image: Option<Vec<usize>> = members
                .iter()
                .map(|b| {
                    let target = parts.block_of(mir[b[0]]);
                    b.iter().all(|&x| parts.block_of(mir[x]) == target).then_some(target)
                })
                .collect();
            match image {
                Some(img) => Ok(k.clone().with_mirror(img).unwrap_or(k)),
                None => Ok(k),
            }
        }
        None => Ok(k),
    }
}

/// Restriction to `block`: moves leaving the block are turned into holding.
pub fn restriction(p: &FiniteKernel, block: &[usize]) -> Result<FiniteKernel> {
    if block.is_empty() {
        return Err(Error::EmptyBlock(0));
    }
    let mut local = HashMap::with_capacity(block.len());
    for (k, &x) in block.iter().enumerate() {
        if x >= p.len() {
            return Err(Error::StateMismatch(format!("state {x} out of range")));
        }
        if local.insert(x, k).is_some() {
            return Err(Error::StateMismatch(format!("state {x} repeated in block")));
        }
    }
    let mut rows = Vec::with_capacity(block.len());
    for (k, &x) in block.iter().enumerate() {
        let mut row = Vec::new();
        let mut hold = 0.0;
        for &(y, pxy) in &p.rows[x] {
            match local.get(&y) {
                Some(&l) if l != k => row.push((l, pxy)),
                _ => hold += pxy,
            }
        }
        row.push((k, hold));
        rows.push(row);
    }
    let labels = block.iter().map(|&x| p.labels[x].clone()).collect();
    let lw = block.iter().map(|&x| p.log_weights[x]).collect();
    FiniteKernel::from_rows(labels, lw, rows)
}

/// Result of a strong-lumpability check.
#[derive(Debug, Clone)]
pub struct StrongLumping {
    pub kernel: FiniteKernel,
    /// Largest deviation, over blocks and members, of the block-to-block
    /// mass vector from that of the first member of the block.
    pub max_deviation: f64,
}

/// Strong lumping of `p` onto `parts` together with the lumpability witness.
pub fn strong_lumping(p: &FiniteKernel, parts: &Partition) -> Result<StrongLumping> {
    let members = parts.members();
    let m = members.len();
    let mut max_dev: f64 = 0.0;
    for block in &members {
        let mass = |x: usize| {
            let mut v = vec![0.0; m];
            for &(y, pxy) in &p.rows[x] {
                v[parts.block_of(y)] += pxy;
            }
            v
        };
        let first = mass(block[0]);
        for &x in &block[1..] {
            let v = mass(x);
            for (a, b) in v.iter().zip(&first) {
                max_dev = max_dev.max((a - b).abs());
            }
        }
    }
    Ok(StrongLumping {
        kernel: lumped_chain(p, parts)?,
        max_deviation: max_dev,
    })
}

/// Index of a full-space configuration.
pub fn config_index(m: &ModelSpec, x: &SpinConfiguration) -> usize {
    match m.kind {
        ModelKind::Warmup => (x.values[0] + m.n as i32) as usize,
        ModelKind::Ising => x
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| if v == 1 { 1usize << j } else { 0 })
            .sum(),
        ModelKind::Beg => {
            let mut idx = 0usize;
            for &v in x.values.iter().rev() {
                idx = idx * 3 + (v + 1) as usize;
            }
            idx
        }
    }
}

/// Configuration at a full-space index.
pub fn config_at(m: &ModelSpec, index: usize) -> SpinConfiguration {
    let values = match m.kind {
        ModelKind::Warmup => vec![index as i32 - m.n as i32],
        ModelKind::Ising => (0..m.n)
            .map(|j| if index >> j & 1 == 1 { 1 } else { -1 })
            .collect(),
        ModelKind::Beg => {
            let mut v = Vec::with_capacity(m.n);
            let mut k = index;
            for _ in 0..m.n {
                v.push((k % 3) as i32 - 1);
                k /= 3;
            }
            v
        }
    };
    SpinConfiguration { kind: m.kind, values }
}

/// Enumerates the full space of `m` within the materialization caps.
pub fn full_states(m: &ModelSpec) -> Result<Vec<SpinConfiguration>> {
    let (cap, limit) = match m.kind {
        ModelKind::Warmup => (true, usize::MAX),
        ModelKind::Ising => (m.n <= MAX_FULL_ISING_N, MAX_FULL_ISING_N),
        ModelKind::Beg => (m.n <= MAX_FULL_BEG_N, MAX_FULL_BEG_N),
    };
    if !cap {
        return Err(Error::TooLarge {
            what: "full state space (N)",
            size: m.n,
            limit,
        });
    }
    let count = m.state_count().expect("bounded by caps");
    Ok((0..count).map(|i| config_at(m, i)).collect())
}

fn full_mirror(m: &ModelSpec, states: &[SpinConfiguration]) -> Vec<usize> {
    states.iter().map(|x| config_index(m, &x.negated())).collect()
}

fn full_log_weights(m: &ModelSpec, states: &[SpinConfiguration]) -> Vec<f64> {
    states
        .iter()
        .map(|x| {
            let s: i64 = x.values.iter().map(|&v| v as i64).sum();
            let r: i64 = x.values.iter().map(|&v| (v * v) as i64).sum();
            m.log_weight_stats(s, r)
        })
        .collect()
}

fn local_moves(m: &ModelSpec, x: &SpinConfiguration, scale: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    match m.kind {
        ModelKind::Warmup => {
            let v = x.values[0];
            let n = m.n as i32;
            let here = config_index(m, x);
            out.push(if v < n { (here + 1, scale * 0.5) } else { (here, scale * 0.5) });
            out.push(if v > -n { (here - 1, scale * 0.5) } else { (here, scale * 0.5) });
        }
        ModelKind::Ising => {
            let w = scale / m.n as f64;
            let idx = config_index(m, x);
            for j in 0..m.n {
                out.push((idx ^ (1 << j), w));
            }
        }
        ModelKind::Beg => {
            let w = scale / (2 * m.n) as f64;
            let mut y = x.clone();
            for j in 0..m.n {
                for step in [1, -1] {
                    let old = y.values[j];
                    y.values[j] = wrap(old + step);
                    out.push((config_index(m, &y), w));
                    y.values[j] = old;
                }
            }
        }
    }
    out
}

/// BEG single-site move with `2 = -1` and `-2 = 1`.
pub fn wrap(v: i32) -> i32 {
    match v {
        2 => -1,
        -2 => 1,
        v => v,
    }
}

fn labels_of(states: &[SpinConfiguration]) -> Vec<StateLabel> {
    states.iter().cloned().map(StateLabel::Config).collect()
}

/// The local proposal `K_E` on the full space: single flips (Ising, mass
/// `1/N` each), single `±1` moves with wraparound (BEG, `1/(2N)` each), or
/// the nearest-neighbour walk with holding at `±N` (Warmup).
///
/// Proposal kernels are symmetric and carry uniform log-weights.
pub fn single_flip_proposal(m: &ModelSpec) -> Result<FiniteKernel> {
    m.validate()?;
    let states = full_states(m)?;
    let rows = states.iter().map(|x| local_moves(m, x, 1.0)).collect();
    let mirror = full_mirror(m, &states);
    FiniteKernel::from_rows(labels_of(&states), vec![0.0; states.len()], rows)?.with_mirror(mirror)
}

/// Groups full-space indices by signed class.
fn class_members(m: &ModelSpec, states: &[SpinConfiguration]) -> HashMap<EnergyClass, Vec<usize>> {
    let mut map: HashMap<EnergyClass, Vec<usize>> = HashMap::new();
    for (i, x) in states.iter().enumerate() {
        let s: i64 = x.values.iter().map(|&v| v as i64).sum();
        let r: i64 = x.values.iter().map(|&v| (v * v) as i64).sum();
        map.entry(EnergyClass::from_stats(m.kind, s, r)).or_default().push(i);
    }
    map
}

/// The equi-energy proposal on the full space.
///
/// From a zero-magnetization class: `p1 K_E + (1 − p1) U`; otherwise
/// `p1 K_E + p2 δ_{−x} + (1 − p1 − p2) U`, where `U` is uniform on the signed
/// class of `x` (including `x`). Coinciding targets have their masses summed.
pub fn equi_energy_proposal(m: &ModelSpec) -> Result<FiniteKernel> {
    m.validate()?;
    if m.kind == ModelKind::Warmup {
        return Err(Error::WrongModel {
            op: "equi_energy_proposal",
            model: m.kind.name(),
        });
    }
    let states = full_states(m)?;
    let classes = class_members(m, &states);
    let mirror = full_mirror(m, &states);
    let entries: usize = classes.values().map(|c| c.len() * c.len()).sum();
    if entries > MAX_ENTRIES {
        return Err(Error::TooLarge {
            what: "kernel entries",
            size: entries,
            limit: MAX_ENTRIES,
        });
    }
    let mut rows = Vec::with_capacity(states.len());
    for (i, x) in states.iter().enumerate() {
        let s: i64 = x.values.iter().map(|&v| v as i64).sum();
        let r: i64 = x.values.iter().map(|&v| (v * v) as i64).sum();
        let members = &classes[&EnergyClass::from_stats(m.kind, s, r)];
        let mut row = local_moves(m, x, m.p1);
        let uniform = if s == 0 {
            1.0 - m.p1
        } else {
            row.push((mirror[i], m.p2));
            1.0 - m.p1 - m.p2
        };
        let u = uniform / members.len() as f64;
        row.extend(members.iter().map(|&y| (y, u)));
        rows.push(row);
    }
    FiniteKernel::from_rows(labels_of(&states), vec![0.0; states.len()], rows)?.with_mirror(mirror)
}

/// Warming-up proposal `(1 − ε) K_E + ε δ_{−x}`.
pub fn small_world_proposal(m: &ModelSpec, epsilon: f64) -> Result<FiniteKernel> {
    if m.kind != ModelKind::Warmup {
        return Err(Error::WrongModel {
            op: "small_world_proposal",
            model: m.kind.name(),
        });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("need 0 < epsilon < 1, got {epsilon}")));
    }
    let states = full_states(m)?;
    let mirror = full_mirror(m, &states);
    let rows = states
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut r = local_moves(m, x, 1.0 - epsilon);
            r.push((mirror[i], epsilon));
            r
        })
        .collect();
    FiniteKernel::from_rows(labels_of(&states), vec![0.0; states.len()], rows)?.with_mirror(mirror)
}

/// Full-space Metropolis chain of the requested kind.
pub fn full_chain(m: &ModelSpec, kind: ChainKind) -> Result<FiniteKernel> {
    kind.check(m)?;
    let proposal = match kind {
        ChainKind::Naive => single_flip_proposal(m)?,
        ChainKind::EquiEnergy => equi_energy_proposal(m)?,
        ChainKind::SmallWorld => small_world_proposal(m, m.epsilon)?,
    };
    let states: Vec<SpinConfiguration> = proposal
        .labels()
        .iter()
        .map(|l| match l {
            StateLabel::Config(x) => x.clone(),
            _ => unreachable!("full-space proposals carry configuration labels"),
        })
        .collect();
    metropolize(&proposal, &full_log_weights(m, &states))
}

/// Proposal masses out of a state with statistics `(s, r)`, grouped by the
/// statistics of the target. Uniform orbit draws stay inside the class and
/// are omitted.
pub fn class_moves(m: &ModelSpec, kind: ChainKind, s: i64, r: i64) -> Vec<((i64, i64), f64)> {
    let n = m.n as i64;
    let nf = m.n as f64;
    let local = if kind == ChainKind::EquiEnergy { m.p1 } else { 1.0 };
    let mut out = Vec::with_capacity(7);
    match m.kind {
        ModelKind::Ising => {
            let plus = (n + s) / 2;
            let minus = n - plus;
            if plus > 0 {
                out.push(((s - 2, 0), local * plus as f64 / nf));
            }
            if minus > 0 {
                out.push(((s + 2, 0), local * minus as f64 / nf));
            }
        }
        ModelKind::Beg => {
            let plus = (r + s) / 2;
            let minus = (r - s) / 2;
            let zero = n - r;
            let w = local / (2.0 * nf);
            let moves = [
                (plus, (s - 2, r)),
                (plus, (s - 1, r - 1)),
                (minus, (s + 1, r - 1)),
                (minus, (s + 2, r)),
                (zero, (s + 1, r + 1)),
                (zero, (s - 1, r + 1)),
            ];
            for (count, target) in moves {
                if count > 0 {
                    out.push((target, w * count as f64));
                }
            }
        }
        ModelKind::Warmup => {
            let lk = if kind == ChainKind::SmallWorld { 1.0 - m.epsilon } else { 1.0 };
            if s < n {
                out.push(((s + 1, 0), lk * 0.5));
            }
            if s > -n {
                out.push(((s - 1, 0), lk * 0.5));
            }
            if kind == ChainKind::SmallWorld && s != 0 {
                out.push(((-s, 0), m.epsilon));
            }
        }
    }
    if kind == ChainKind::EquiEnergy && s != 0 {
        out.push(((-s, r), m.p2));
    }
    out
}

/// Exact strong lumping of the Metropolis chain onto signed classes, built
/// from closed-form counting so it is available for any `N`. For the
/// warming-up model the classes are single states and this is the chain
/// itself.
pub fn signed_lumped_chain(m: &ModelSpec, kind: ChainKind) -> Result<FiniteKernel> {
    kind.check(m)?;
    let table = class_table(m)?;
    signed_lumped_from_table(m, kind, &table)
}

pub(crate) fn signed_lumped_from_table(
    m: &ModelSpec,
    kind: ChainKind,
    table: &ClassTable,
) -> Result<FiniteKernel> {
    let mut rows = Vec::with_capacity(table.len());
    for e in &table.entries {
        let (s, r) = e.class.stats();
        let here = table.index_of(&e.class).expect("class from table");
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(8);
        for ((s2, r2), mass) in class_moves(m, kind, s, r) {
            let j = table
                .index_of(&EnergyClass::from_stats(m.kind, s2, r2))
                .expect("moves stay inside the class list");
            let d = (m.log_weight_stats(s2, r2) - e.log_weight).min(0.0);
            row.push((j, mass * d.exp()));
        }
        let moved: f64 = row.iter().map(|e| e.1).sum();
        row.push((here, 1.0 - moved));
        rows.push(row);
    }
    let labels = table.classes().map(StateLabel::Class).collect();
    let lw = table.entries.iter().map(|e| e.log_class_weight).collect();
    let mirror = (0..table.len()).map(|i| table.mirror_index(i)).collect();
    FiniteKernel::from_rows(labels, lw, rows)?.with_mirror(mirror)
}

/// Partition of a class-labelled or configuration-labelled kernel into
/// unsigned energy levels, numbered by first appearance.
pub fn unsigned_partition(k: &FiniteKernel) -> Partition {
    Partition::by_key(k.len(), |i| level_of(&k.labels()[i]))
}

/// Partition into signed classes.
pub fn signed_partition(k: &FiniteKernel) -> Partition {
    Partition::by_key(k.len(), |i| match &k.labels()[i] {
        StateLabel::Config(x) => {
            let s: i64 = x.values.iter().map(|&v| v as i64).sum();
            let r: i64 = x.values.iter().map(|&v| (v * v) as i64).sum();
            Some(EnergyClass::from_stats(x.kind, s, r))
        }
        StateLabel::Class(c) => Some(*c),
        _ => None,
    })
}

fn level_of(l: &StateLabel) -> Option<(u32, Option<u32>)> {
    match l {
        StateLabel::Class(c) => Some((c.magnitude(), c.quadrupole())),
        StateLabel::Config(x) => {
            let s: i64 = x.values.iter().map(|&v| v as i64).sum();
            let q = (x.kind == ModelKind::Beg).then(|| x.values.iter().map(|&v| (v * v) as u32).sum());
            Some((s.unsigned_abs() as u32, q))
        }
        StateLabel::Level {
            magnitude,
            quadrupole,
        } => Some((*magnitude, *quadrupole)),
        _ => None,
    }
}

/// Lazy projection onto unsigned energy levels, with `Level` labels. The
/// partition blocks are sorted in class-table order.
pub fn unsigned_projection(k: &FiniteKernel) -> Result<FiniteKernel> {
    let levels: Vec<Option<(u32, Option<u32>)>> = k.labels().iter().map(level_of).collect();
    let mut keys: Vec<(u32, Option<u32>)> = levels.iter().flatten().copied().collect();
    keys.sort_by_key(|&(s, r)| (r, s));
    keys.dedup();
    if keys.is_empty() || levels.iter().any(Option::is_none) {
        return Err(Error::param("kernel", "states carry no energy labels"));
    }
    let pos: HashMap<_, _> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let parts = Partition::new(levels.iter().map(|l| pos[&l.unwrap()]).collect())?;
    let labels = keys
        .iter()
        .map(|&(magnitude, quadrupole)| StateLabel::Level {
            magnitude,
            quadrupole,
        })
        .collect();
    lumped_projection(k, &parts)?.without_mirror().with_labels(labels)
}

/// The lumped Ising chain `P̄` on `{0, 2, ..., N}` from the closed-form rates
/// `P̄(0,2) = p1/2`, `P̄(i,i+2) = (p1/4)(N−i)/N`,
/// `P̄(i,i−2) = (p1/4)((N+i)/N) exp(2β(1−i)/N)`.
pub fn ising_lumped_bd(m: &ModelSpec) -> Result<BirthDeathChain> {
    if m.kind != ModelKind::Ising {
        return Err(Error::WrongModel {
            op: "ising_lumped_bd",
            model: m.kind.name(),
        });
    }
    m.validate()?;
    let n = m.n;
    let nf = n as f64;
    let table = class_table(m)?;
    let levels: Vec<u32> = (0..=n as u32).step_by(2).collect();
    let mut up = Vec::with_capacity(levels.len());
    let mut down = Vec::with_capacity(levels.len());
    let mut lw = Vec::with_capacity(levels.len());
    for &i in &levels {
        let fi = i as f64;
        up.push(if i as usize == n {
            0.0
        } else if i == 0 {
            m.p1 / 2.0
        } else {
            m.p1 / 4.0 * (nf - fi) / nf
        });
        down.push(if i == 0 {
            0.0
        } else {
            m.p1 / 4.0 * (nf + fi) / nf * (2.0 * m.beta * (1.0 - fi) / nf).exp()
        });
        let members = table
            .entries
            .iter()
            .filter(|e| e.class.magnitude() == i)
            .map(|e| e.log_class_weight);
        lw.push(log_sum_exp(members));
    }
    let labels = levels
        .iter()
        .map(|&i| StateLabel::Level {
            magnitude: i,
            quadrupole: None,
        })
        .collect();
    BirthDeathChain::with_labels(up, down, lw, labels)
}

/// One printed closed-form rate of the lumped BEG chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrintedRate {
    pub rule: &'static str,
    pub from: (u32, u32),
    pub to: (u32, u32),
    pub value: f64,
}

/// Evaluates every printed lumped-BEG rate whose source and target are both
/// unsigned classes of `𝔻_N` and distinct. Rules are named by their move.
pub fn beg_printed_rates(m: &ModelSpec) -> Result<Vec<PrintedRate>> {
    if m.kind != ModelKind::Beg {
        return Err(Error::WrongModel {
            op: "beg_printed_rates",
            model: m.kind.name(),
        });
    }
    m.validate()?;
    let n = m.n as i64;
    let nf = m.n as f64;
    let (p1, b, k) = (m.p1, m.beta, m.k);
    let kb = k * b / nf;
    let min1 = |x: f64| x.min(0.0).exp();
    let valid = |s: i64, r: i64| s >= 0 && r >= 0 && s <= r && r <= n && (r - s) % 2 == 0;
    let mut out = Vec::new();
    let mut push = |rule: &'static str, from: (i64, i64), to: (i64, i64), value: f64| {
        if valid(from.0, from.1) && valid(to.0, to.1) && from != to {
            out.push(PrintedRate {
                rule,
                from: (from.0 as u32, from.1 as u32),
                to: (to.0 as u32, to.1 as u32),
                value,
            });
        }
    };
    push("(0,0)->(1,1)", (0, 0), (1, 1), p1 / 2.0 * min1(kb - b));
    push("(0,N)->(1,N-1)", (0, n), (1, n - 1), p1 / 4.0);
    push("(0,N)->(2,N)", (0, n), (2, n), p1 / 4.0);
    for r in (0..=n - 2).step_by(2) {
        push("(0,r)->(2,r)", (0, r), (2, r), p1 / (4.0 * nf));
        push("(0,r)->(1,r-1)", (0, r), (1, r - 1), p1 / (4.0 * nf));
        push("(0,r)->(1,r+1)", (0, r), (1, r + 1), p1 / (2.0 * nf) * min1(kb - b));
    }
    for r in 0..=n {
        for s in 1..=r {
            if (r - s) % 2 != 0 {
                continue;
            }
            let (fs, fr) = (s as f64, r as f64);
            if s <= n - 2 {
                push("(s,r)->(s+2,r)", (s, r), (s + 2, r), p1 / (8.0 * nf) * (fr - fs));
            }
            push(
                "(s,r)->(s-2,r)",
                (s, r),
                (s - 2, r),
                p1 / (8.0 * nf) * (fr + fs) * (4.0 * kb * (1.0 - fs)).exp(),
            );
            if r < n {
                push(
                    "(s,r)->(s+1,r+1)",
                    (s, r),
                    (s + 1, r + 1),
                    p1 / (4.0 * nf) * (nf - fr) * min1(kb * (2.0 * fs + 1.0) - b),
                );
                push(
                    "(s,r)->(s-1,r+1)",
                    (s, r),
                    (s - 1, r + 1),
                    p1 / (4.0 * nf) * (nf - fr) * (kb * (1.0 - 2.0 * fs) - b).exp(),
                );
            }
            if r > 0 && s <= n - 2 {
                push("(s,r)->(s+1,r-1)", (s, r), (s + 1, r - 1), p1 / (8.0 * nf) * (fr - fs));
            }
            push(
                "(s,r)->(s-1,r-1)",
                (s, r),
                (s - 1, r - 1),
                p1 / (8.0 * nf) * (fr + fs) * min1(kb * (2.0 * fs + 1.0) - b),
            );
        }
    }
    Ok(out)
}

/// Printed rules known to disagree with direct lumping, with the value the
/// direct computation gives. The direct-lumping kernel is the one used
/// everywhere else.
pub const KNOWN_TYPOS: &[(&str, &str)] = &[
    (
        "(0,r)->(2,r)",
        "missing factor r: direct lumping gives p1*r/(4N)",
    ),
    (
        "(0,r)->(1,r-1)",
        "missing factor r: direct lumping gives p1*r/(4N)",
    ),
    (
        "(0,r)->(1,r+1)",
        "missing factor N-r: direct lumping gives p1*(N-r)/(2N)*min(1, exp(K*beta/N - beta))",
    ),
    (
        "(s,r)->(s-1,r-1)",
        "exponent sign: direct lumping gives p1*(r+s)/(8N)*min(1, exp(beta + K*beta*(1-2s)/N))",
    ),
];

/// A printed rate that disagrees with the direct value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateDiscrepancy {
    pub rule: &'static str,
    pub from: (u32, u32),
    pub to: (u32, u32),
    pub printed: f64,
    pub direct: f64,
    /// Explanation when the rule is a known typo.
    pub annotation: Option<&'static str>,
}

impl RateDiscrepancy {
    pub fn is_annotated(&self) -> bool {
        self.annotation.is_some()
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) || (a - b).abs() <= tol * 1e-300
}

/// Compares the printed BEG rates with `direct`, a kernel on unsigned classes
/// labelled by [`StateLabel::Level`] (for instance [`beg_lumped`] or the
/// unsigned projection of the full chain).
pub fn beg_rate_discrepancies(m: &ModelSpec, direct: &FiniteKernel, tol: f64) -> Result<Vec<RateDiscrepancy>> {
    let index: HashMap<(u32, u32), usize> = direct
        .labels()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match l {
            StateLabel::Level {
                magnitude,
                quadrupole: Some(r),
            } => Some(((*magnitude, *r), i)),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for rate in beg_printed_rates(m)? {
        let (Some(&i), Some(&j)) = (index.get(&rate.from), index.get(&rate.to)) else {
            return Err(Error::StateMismatch(format!(
                "class {:?} or {:?} missing from the direct kernel",
                rate.from, rate.to
            )));
        };
        let d = direct.get(i, j);
        if !close(rate.value, d, tol) {
            out.push(RateDiscrepancy {
                rule: rate.rule,
                from: rate.from,
                to: rate.to,
                printed: rate.value,
                direct: d,
                annotation: KNOWN_TYPOS.iter().find(|t| t.0 == rate.rule).map(|t| t.1),
            });
        }
    }
    Ok(out)
}

/// Compares the printed Ising rates of [`ising_lumped_bd`] with `direct`, a
/// kernel on the levels `0, 2, ..., N` in that order.
pub fn ising_rate_discrepancies(m: &ModelSpec, direct: &FiniteKernel, tol: f64) -> Result<Vec<RateDiscrepancy>> {
    let bd = ising_lumped_bd(m)?;
    if direct.len() != bd.len() {
        return Err(Error::StateMismatch(format!(
            "direct kernel has {} states, expected {}",
            direct.len(),
            bd.len()
        )));
    }
    let mut out = Vec::new();
    let n = bd.len();
    for i in 0..n {
        let lvl = (2 * i) as u32;
        for (rule, j, printed) in [
            ("P(i,i+2)", i + 1, bd.up[i]),
            ("P(i,i-2)", i.wrapping_sub(1), bd.down[i]),
        ] {
            if j >= n {
                continue;
            }
            let d = direct.get(i, j);
            if !close(printed, d, tol) {
                out.push(RateDiscrepancy {
                    rule,
                    from: (lvl, 0),
                    to: (2 * j as u32, 0),
                    printed,
                    direct: d,
                    annotation: None,
                });
            }
        }
    }
    Ok(out)
}

/// The lumped BEG chain `P̄` on unsigned classes, obtained by direct lumping
/// (with the one-half factor) of the equi-energy Metropolis chain. States are
/// in `(r, s)` order with `Level` labels.
pub fn beg_lumped(m: &ModelSpec) -> Result<FiniteKernel> {
    if m.kind != ModelKind::Beg {
        return Err(Error::WrongModel {
            op: "beg_lumped",
            model: m.kind.name(),
        });
    }
    unsigned_projection(&signed_lumped_chain(m, ChainKind::EquiEnergy)?)
}

/// Sign of a class label, `None` for other labels.
pub fn label_sign(l: &StateLabel) -> Option<Sign> {
    match l {
        StateLabel::Class(c) => Some(c.sign()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(q: f64) -> FiniteKernel {
        FiniteKernel::from_dense(
            vec![StateLabel::Index(0), StateLabel::Index(1)],
            vec![0.0, 0.0],
            &[1.0 - q, q, q, 1.0 - q],
        )
        .unwrap()
    }

    #[test]
    fn metropolize_two_state() {
        let k = two_state(1.0);
        let target = [(2.0f64 / 3.0).ln(), (1.0f64 / 3.0).ln()];
        let m = metropolize(&k, &target).unwrap();
        assert!((m.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((m.get(1, 0) - 1.0).abs() < 1e-15);
        assert!((m.get(0, 0) - 0.5).abs() < 1e-15);
        m.check_reversible(1e-12).unwrap();
    }

    #[test]
    fn metropolize_uniform_is_identity_map() {
        let k = two_state(0.3);
        let m = metropolize(&k, &[0.0, 0.0]).unwrap();
        assert_eq!(m.to_dense(), k.to_dense());
    }

    #[test]
    fn metropolize_rejects_one_way_support() {
        let k = FiniteKernel::from_dense(
            vec![StateLabel::Index(0), StateLabel::Index(1)],
            vec![0.0, 0.0],
            &[0.5, 0.5, 0.0, 1.0],
        )
        .unwrap();
        assert!(matches!(metropolize(&k, &[0.0, 0.0]), Err(Error::NotReversible(_))));
        assert!(matches!(metropolize(&k, &[0.0]), Err(Error::StateMismatch(_))));
    }

    #[test]
    fn single_flip_examples() {
        let m = ModelSpec::ising(2, 1.0).unwrap();
        let k = single_flip_proposal(&m).unwrap();
        let x = config_index(&m, &SpinConfiguration::new(&m, vec![1, 1]).unwrap());
        let row = k.row(x);
        assert_eq!(row.len(), 2);
        assert!(row.iter().all(|e| e.1 == 0.5));
        let b = ModelSpec::beg(2, 1.0, 1.0).unwrap();
        let kb = single_flip_proposal(&b).unwrap();
        let x = config_index(&b, &SpinConfiguration::new(&b, vec![1, 0]).unwrap());
        let to_minus = config_index(&b, &SpinConfiguration::new(&b, vec![-1, 0]).unwrap());
        let to_zero = config_index(&b, &SpinConfiguration::new(&b, vec![0, 0]).unwrap());
        assert_eq!(kb.get(x, to_minus), 0.25);
        assert_eq!(kb.get(x, to_zero), 0.25);
    }

    #[test]
    fn warmup_proposals() {
        let m = ModelSpec::warmup(5, 2.0, 0.2).unwrap();
        let k = small_world_proposal(&m, 0.2).unwrap();
        let at = |x: i32| (x + 5) as usize;
        assert!((k.get(at(3), at(-3)) - 0.2).abs() < 1e-15);
        assert!((k.get(at(3), at(2)) - 0.4).abs() < 1e-15);
        assert!((k.get(at(3), at(4)) - 0.4).abs() < 1e-15);
        assert!((k.get(at(0), at(0)) - 0.2).abs() < 1e-15);
        assert!(small_world_proposal(&m, 1.0).is_err());
        let e = single_flip_proposal(&m).unwrap();
        assert_eq!(e.get(at(5), at(5)), 0.5);
    }

    #[test]
    fn equi_energy_masses() {
        let m = ModelSpec::ising(4, 1.0).unwrap().with_mixture(0.5, 0.25).unwrap();
        let k = equi_energy_proposal(&m).unwrap();
        let x = config_index(&m, &SpinConfiguration::new(&m, vec![1, 1, 1, -1]).unwrap());
        let neg = config_index(&m, &SpinConfiguration::new(&m, vec![-1, -1, -1, 1]).unwrap());
        assert_eq!(k.get(x, neg), 0.25);
        let z = config_index(&m, &SpinConfiguration::new(&m, vec![1, 1, -1, -1]).unwrap());
        let w = config_index(&m, &SpinConfiguration::new(&m, vec![-1, -1, 1, 1]).unwrap());
        assert!((k.get(z, w) - 0.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn projection_special_cases() {
        let k = two_state(0.4);
        let one = lumped_projection(&k, &Partition::trivial(2)).unwrap();
        assert_eq!(one.to_dense(), vec![1.0]);
        let single = lumped_projection(&k, &Partition::singletons(2)).unwrap();
        let d = single.to_dense();
        assert!((d[1] - 0.2).abs() < 1e-15 && (d[0] - 0.8).abs() < 1e-15);
        assert!(matches!(Partition::new(vec![0, 2]), Err(Error::EmptyBlock(1))));
    }

    #[test]
    fn restriction_whole_space_is_identity() {
        let m = ModelSpec::ising(4, 0.7).unwrap();
        let k = full_chain(&m, ChainKind::EquiEnergy).unwrap();
        let all: Vec<usize> = (0..k.len()).collect();
        let r = restriction(&k, &all).unwrap();
        assert_eq!(r.to_dense(), k.to_dense());
        assert!(matches!(restriction(&k, &[]), Err(Error::EmptyBlock(_))));
    }

    #[test]
    fn ising_bd_examples() {
        let m = ModelSpec::ising(4, 1.0).unwrap().with_mixture(0.5, 0.25).unwrap();
        let bd = ising_lumped_bd(&m).unwrap();
        assert_eq!(bd.up[0], 0.25);
        assert!((bd.up[1] - 0.0625).abs() < 1e-15);
        assert!((bd.down[1] - 0.5 / 4.0 * 1.5 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(bd.detailed_balance_residual() < 1e-12);
    }

    #[test]
    fn export_format() {
        let k = two_state(0.25);
        let text = k.export_text();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("0: 0=7.5000000000000000e-1 1=2.5000000000000000e-1"));
    }

    #[test]
    fn wrap_rules() {
        assert_eq!(wrap(2), -1);
        assert_eq!(wrap(-2), 1);
        assert_eq!(wrap(0), 0);
    }
}
