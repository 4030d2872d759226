//! Target distributions, sufficient statistics and energy classes.
//!
//! Three finite targets are supported:
//!
//! * `Warmup`: a single coordinate `x` in `{-N, ..., N}` with weight
//!   proportional to `(θ-1) θ^|x|`;
//! * `Ising`: spins in `{-1, 1}^N` with log-weight `β S² / (2N)`;
//! * `Beg`: spins in `{-1, 0, 1}^N` with log-weight `-β R + K β S² / N`,
//!
//! where `S = Σ x_i` and `R = Σ x_i²`. All weights stay in log-space.
//!
//! Every target is invariant under coordinate permutations and the global
//! sign flip, so the state space splits into energy classes (orbits). The
//! [`ClassTable`] lists them in a fixed order:
//!
//! * Ising and Warmup: magnitude ascending, `-` before `+`;
//! * BEG: `(r, s)` lexicographic, `-` before `+`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of signed classes a [`ClassTable`] will hold.
pub const MAX_CLASSES: usize = 2_000_000;

/// Which target distribution a [`ModelSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Warmup,
    Ising,
    Beg,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Warmup => "warmup",
            ModelKind::Ising => "ising",
            ModelKind::Beg => "beg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "warmup" | "warming-up" => Ok(ModelKind::Warmup),
            "ising" => Ok(ModelKind::Ising),
            "beg" => Ok(ModelKind::Beg),
            other => Err(Error::param("model", format!("unknown model `{other}`"))),
        }
    }
}

/// A model together with all of its parameters.
///
/// Construct through [`ModelSpec::ising`], [`ModelSpec::beg`] or
/// [`ModelSpec::warmup`]; every constructor and `with_*` method validates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    /// Inverse temperature (Ising, BEG).
    pub beta: f64,
    /// Quadratic coupling (BEG).
    pub k: f64,
    /// Base of the warming-up weights.
    pub theta: f64,
    /// Weight of the local proposal in the equi-energy mixture.
    pub p1: f64,
    /// Weight of the global flip in the equi-energy mixture.
    pub p2: f64,
    /// Weight of the reflection `x -> -x` in the warming-up small-world proposal.
    pub epsilon: f64,
    /// Scale used when `p1`, `p2` were derived from `a` and `N`.
    pub a: Option<f64>,
}

const DEFAULT_P1: f64 = 0.5;
const DEFAULT_P2: f64 = 0.25;
const DEFAULT_EPSILON: f64 = 0.3;

impl ModelSpec {
    /// Mean-field Ising model on `n` sites. `beta = 0` is accepted as the
    /// infinite-temperature limit.
    pub fn ising(n: usize, beta: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind: ModelKind::Ising,
            n,
            beta,
            k: 0.0,
            theta: 0.0,
            p1: DEFAULT_P1,
            p2: DEFAULT_P2,
            epsilon: DEFAULT_EPSILON,
            a: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Mean-field Blume-Emery-Griffiths model on `n` sites.
    pub fn beg(n: usize, beta: f64, k: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind: ModelKind::Beg,
            n,
            beta,
            k,
            theta: 0.0,
            p1: DEFAULT_P1,
            p2: DEFAULT_P2,
            epsilon: DEFAULT_EPSILON,
            a: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Warming-up double-peak target on `{-n, ..., n}`.
    pub fn warmup(n: usize, theta: f64, epsilon: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind: ModelKind::Warmup,
            n,
            beta: 0.0,
            k: 0.0,
            theta,
            p1: DEFAULT_P1,
            p2: DEFAULT_P2,
            epsilon,
            a: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mixture(mut self, p1: f64, p2: f64) -> Result<Self> {
        self.p1 = p1;
        self.p2 = p2;
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    /// Mixture weights `p1 = 1 - a/N`, `p2 = a/(2N)`, the variant of the
    /// scaled parameters that keeps `p1 + p2 < 1`.
    pub fn with_scaled(mut self, a: f64) -> Result<Self> {
        if !(a > 0.0) || a >= self.n as f64 {
            return Err(Error::param("a", format!("need 0 < a < N, got a={a}, N={}", self.n)));
        }
        let nf = self.n as f64;
        self.p1 = 1.0 - a / nf;
        self.p2 = a / (2.0 * nf);
        self.a = Some(a);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "N must be positive"));
        }
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        match self.kind {
            ModelKind::Ising | ModelKind::Beg => {
                if self.n % 2 == 1 {
                    return Err(Error::OddSize {
                        model: self.kind.name(),
                        n: self.n,
                    });
                }
                if !(self.beta >= 0.0) || !self.beta.is_finite() {
                    return Err(Error::param("beta", format!("need beta >= 0, got {}", self.beta)));
                }
                if self.kind == ModelKind::Beg && !(self.k > 0.0 && self.k.is_finite()) {
                    return Err(Error::param("k", format!("need K > 0, got {}", self.k)));
                }
                if !open_unit(self.p1) {
                    return Err(Error::param("p1", format!("need 0 < p1 < 1, got {}", self.p1)));
                }
                if !open_unit(self.p2) {
                    return Err(Error::param("p2", format!("need 0 < p2 < 1, got {}", self.p2)));
                }
                if self.p1 + self.p2 >= 1.0 {
                    return Err(Error::param(
                        "p1+p2",
                        format!("need p1 + p2 < 1, got {}", self.p1 + self.p2),
                    ));
                }
            }
            ModelKind::Warmup => {
                if !(self.theta > 1.0) || !self.theta.is_finite() {
                    return Err(Error::param("theta", format!("need theta > 1, got {}", self.theta)));
                }
                if !open_unit(self.epsilon) {
                    return Err(Error::param(
                        "epsilon",
                        format!("need 0 < epsilon < 1, got {}", self.epsilon),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Unnormalized log-weight of any state with statistics `(s, r)`.
    ///
    /// For the warming-up model `s` is the coordinate itself and `r` is ignored.
    pub fn log_weight_stats(&self, s: i64, r: i64) -> f64 {
        let nf = self.n as f64;
        match self.kind {
            ModelKind::Ising => self.beta * ((s * s) as f64) / (2.0 * nf),
            ModelKind::Beg => -self.beta * r as f64 + self.k * self.beta * ((s * s) as f64) / nf,
            ModelKind::Warmup => (self.theta - 1.0).ln() + s.unsigned_abs() as f64 * self.theta.ln(),
        }
    }

    /// Size of the full state space, when it fits in `usize`.
    pub fn state_count(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Warmup => Some(2 * self.n + 1),
            ModelKind::Ising => 1usize.checked_shl(self.n as u32).filter(|_| self.n < 63),
            ModelKind::Beg => 3usize.checked_pow(self.n as u32),
        }
    }
}

/// A concrete state of the full space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinConfiguration {
    pub kind: ModelKind,
    pub values: Vec<i32>,
}

impl SpinConfiguration {
    /// Validates `values` against the alphabet and length of `spec`.
    pub fn new(spec: &ModelSpec, values: Vec<i32>) -> Result<Self> {
        match spec.kind {
            ModelKind::Warmup => {
                if values.len() != 1 {
                    return Err(Error::Alphabet(format!(
                        "warming-up state has a single coordinate, got {} values",
                        values.len()
                    )));
                }
                if values[0].unsigned_abs() as usize > spec.n {
                    return Err(Error::Alphabet(format!(
                        "coordinate {} outside [-{n}, {n}]",
                        values[0],
                        n = spec.n
                    )));
                }
            }
            ModelKind::Ising | ModelKind::Beg => {
                if values.len() != spec.n {
                    return Err(Error::Alphabet(format!(
                        "expected {} spins, got {}",
                        spec.n,
                        values.len()
                    )));
                }
                let allowed: &[i32] = if spec.kind == ModelKind::Ising {
                    &[-1, 1]
                } else {
                    &[-1, 0, 1]
                };
                if let Some(v) = values.iter().find(|v| !allowed.contains(v)) {
                    return Err(Error::Alphabet(format!(
                        "spin value {v} not allowed for the {} model",
                        spec.kind
                    )));
                }
            }
        }
        Ok(SpinConfiguration {
            kind: spec.kind,
            values,
        })
    }

    pub fn negated(&self) -> Self {
        SpinConfiguration {
            kind: self.kind,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == ModelKind::Warmup {
            return write!(f, "{}", self.values[0]);
        }
        f.write_str("(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// `S(x) = Σ x_i`; the coordinate itself for the warming-up model.
pub fn magnetization(x: &SpinConfiguration) -> i64 {
    x.values.iter().map(|&v| v as i64).sum()
}

/// `R(x) = Σ x_i²`, defined for BEG configurations only.
pub fn quadrupole(x: &SpinConfiguration) -> Result<i64> {
    if x.kind != ModelKind::Beg {
        return Err(Error::WrongModel {
            op: "quadrupole",
            model: x.kind.name(),
        });
    }
    Ok(x.values.iter().map(|&v| (v * v) as i64).sum())
}

fn stats_of(x: &SpinConfiguration) -> (i64, i64) {
    let s = magnetization(x);
    let r = match x.kind {
        ModelKind::Beg => x.values.iter().map(|&v| (v * v) as i64).sum(),
        _ => 0,
    };
    (s, r)
}

fn check_kind(m: &ModelSpec, x: &SpinConfiguration) -> Result<()> {
    if m.kind != x.kind {
        return Err(Error::Alphabet(format!(
            "configuration of the {} model used with the {} model",
            x.kind, m.kind
        )));
    }
    let expected = if m.kind == ModelKind::Warmup { 1 } else { m.n };
    if x.values.len() != expected {
        return Err(Error::Alphabet(format!(
            "expected {expected} coordinates, got {}",
            x.values.len()
        )));
    }
    Ok(())
}

/// Unnormalized log-density of `x` under `m`.
pub fn log_weight(m: &ModelSpec, x: &SpinConfiguration) -> Result<f64> {
    check_kind(m, x)?;
    let (s, r) = stats_of(x);
    Ok(m.log_weight_stats(s, r))
}

/// Sign part of an energy class label. `None` is used exactly when the
/// magnitude is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    None,
    Plus,
}

impl Sign {
    pub fn of(s: i64) -> Sign {
        match s.signum() {
            -1 => Sign::Minus,
            1 => Sign::Plus,
            _ => Sign::None,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
            Sign::None => Sign::None,
        }
    }

    fn apply(self, magnitude: i64) -> i64 {
        if self == Sign::Minus {
            -magnitude
        } else {
            magnitude
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Sign::Minus => "-",
            Sign::None => "0",
            Sign::Plus => "+",
        }
    }
}

/// A signed orbit of the symmetry group acting on the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergyClass {
    Warmup { i: u32, sign: Sign },
    Ising { i: u32, sign: Sign },
    Beg { s: u32, r: u32, sign: Sign },
}

impl EnergyClass {
    pub fn kind(&self) -> ModelKind {
        match self {
            EnergyClass::Warmup { .. } => ModelKind::Warmup,
            EnergyClass::Ising { .. } => ModelKind::Ising,
            EnergyClass::Beg { .. } => ModelKind::Beg,
        }
    }

    pub fn sign(&self) -> Sign {
        match *self {
            EnergyClass::Warmup { sign, .. }
            | EnergyClass::Ising { sign, .. }
            | EnergyClass::Beg { sign, .. } => sign,
        }
    }

    /// `|S|` (or `|x|` for the warming-up model).
    pub fn magnitude(&self) -> u32 {
        match *self {
            EnergyClass::Warmup { i, .. } | EnergyClass::Ising { i, .. } => i,
            EnergyClass::Beg { s, .. } => s,
        }
    }

    /// Signed magnetization shared by every member of the class.
    pub fn signed_magnetization(&self) -> i64 {
        self.sign().apply(self.magnitude() as i64)
    }

    /// `R`, for BEG classes.
    pub fn quadrupole(&self) -> Option<u32> {
        match *self {
            EnergyClass::Beg { r, .. } => Some(r),
            _ => None,
        }
    }

    /// The class obtained by the global sign flip.
    pub fn mirror(&self) -> EnergyClass {
        match *self {
            EnergyClass::Warmup { i, sign } => EnergyClass::Warmup {
                i,
                sign: sign.flipped(),
            },
            EnergyClass::Ising { i, sign } => EnergyClass::Ising {
                i,
                sign: sign.flipped(),
            },
            EnergyClass::Beg { s, r, sign } => EnergyClass::Beg {
                s,
                r,
                sign: sign.flipped(),
            },
        }
    }

    /// Statistics `(S, R)` of any member.
    pub fn stats(&self) -> (i64, i64) {
        (
            self.signed_magnetization(),
            self.quadrupole().unwrap_or(0) as i64,
        )
    }

    /// Builds the class of a state with statistics `(s, r)`.
    pub fn from_stats(kind: ModelKind, s: i64, r: i64) -> EnergyClass {
        let sign = Sign::of(s);
        let mag = s.unsigned_abs() as u32;
        match kind {
            ModelKind::Warmup => EnergyClass::Warmup { i: mag, sign },
            ModelKind::Ising => EnergyClass::Ising { i: mag, sign },
            ModelKind::Beg => EnergyClass::Beg {
                s: mag,
                r: r as u32,
                sign,
            },
        }
    }
}

impl fmt::Display for EnergyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EnergyClass::Warmup { i, sign } | EnergyClass::Ising { i, sign } => {
                write!(f, "{}{}", sign.symbol(), i)
            }
            EnergyClass::Beg { s, r, sign } => write!(f, "{}{}:{}", sign.symbol(), s, r),
        }
    }
}

/// Class of `x`; two states share a class iff they lie in the same orbit.
pub fn class_of(m: &ModelSpec, x: &SpinConfiguration) -> Result<EnergyClass> {
    check_kind(m, x)?;
    let (s, r) = stats_of(x);
    Ok(EnergyClass::from_stats(m.kind, s, r))
}

/// The set `𝔻_N` of admissible `(s, r)` pairs sorted by `(r, s)`.
pub fn enumerate_beg_classes(n: usize) -> Result<Vec<(u32, u32)>> {
    if n % 2 == 1 {
        return Err(Error::OddSize { model: "beg", n });
    }
    if n == 0 {
        return Err(Error::param("n", "N must be positive"));
    }
    let mut out = Vec::new();
    for r in 0..=n as u32 {
        let mut s = r % 2;
        while s <= r {
            out.push((s, r));
            s += 2;
        }
    }
    Ok(out)
}

/// `ln C(n, k)`, exact through integer arithmetic for `n <= 60` and via
/// log-gamma beyond.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if n <= 60 {
        let mut c: u128 = 1;
        for i in 0..k as u128 {
            c = c * (n as u128 - i) / (i + 1);
        }
        (c as f64).ln()
    } else {
        use statrs::function::gamma::ln_gamma;
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// Numerically stable `ln Σ exp(v)`; `-inf` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// One row of a [`ClassTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class: EnergyClass,
    pub log_cardinality: f64,
    pub log_weight: f64,
    pub log_class_weight: f64,
}

/// Exact class weights of a model, in log-space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    pub kind: ModelKind,
    pub n: usize,
    pub entries: Vec<ClassEntry>,
    pub log_partition: f64,
    index: HashMap<EnergyClass, usize>,
}

impl ClassTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, c: &EnergyClass) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn classes(&self) -> impl Iterator<Item = EnergyClass> + '_ {
        self.entries.iter().map(|e| e.class)
    }

    /// Normalized class probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| (e.log_class_weight - self.log_partition).exp())
            .collect()
    }

    /// Index of the mirrored class.
    pub fn mirror_index(&self, i: usize) -> usize {
        self.index[&self.entries[i].class.mirror()]
    }

    /// Class cardinality as an exact integer when it fits.
    pub fn cardinality(&self, i: usize) -> u128 {
        let n = self.n as u64;
        match self.entries[i].class {
            EnergyClass::Warmup { .. } => 1,
            EnergyClass::Ising { i, .. } => binomial_exact(n, (n - i as u64) / 2),
            EnergyClass::Beg { s, r, .. } => {
                binomial_exact(n, r as u64) * binomial_exact(r as u64, (r - s) as u64 / 2)
            }
        }
    }

    /// `ln q_[N](r)` obtained by summing the BEG table over `s` at fixed `r`.
    pub fn beg_row_profile(&self) -> Result<Vec<f64>> {
        if self.kind != ModelKind::Beg {
            return Err(Error::WrongModel {
                op: "beg_row_profile",
                model: self.kind.name(),
            });
        }
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); self.n + 1];
        for e in &self.entries {
            let r = e.class.quadrupole().unwrap_or(0) as usize;
            rows[r].push(e.log_class_weight);
        }
        Ok(rows.into_iter().map(log_sum_exp).collect())
    }
}

/// `C(n, k)` in `u128`; saturates instead of overflowing.
pub fn binomial_exact(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = match c.checked_mul(n as u128 - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Builds the exact class table of `m`.
pub fn class_table(m: &ModelSpec) -> Result<ClassTable> {
    m.validate()?;
    let n = m.n;
    let count = match m.kind {
        ModelKind::Warmup | ModelKind::Ising => n + 1,
        ModelKind::Beg => (n / 2 + 1) * (n / 2 + 1) * 2,
    };
    if count > MAX_CLASSES {
        return Err(Error::TooLarge {
            what: "class list",
            size: count,
            limit: MAX_CLASSES,
        });
    }
    let mut entries = Vec::with_capacity(count);
    let mut push = |class: EnergyClass, log_card: f64| {
        let (s, r) = class.stats();
        let lw = m.log_weight_stats(s, r);
        entries.push(ClassEntry {
            class,
            log_cardinality: log_card,
            log_weight: lw,
            log_class_weight: log_card + lw,
        });
    };
    let signs = |mag: u32| -> &'static [Sign] {
        if mag == 0 {
            &[Sign::None]
        } else {
            &[Sign::Minus, Sign::Plus]
        }
    };
    match m.kind {
        ModelKind::Warmup => {
            for i in 0..=n as u32 {
                for &sign in signs(i) {
                    push(EnergyClass::Warmup { i, sign }, 0.0);
                }
            }
        }
        ModelKind::Ising => {
            for i in (0..=n as u32).step_by(2) {
                let lc = ln_binomial(n as u64, (n as u64 - i as u64) / 2);
                for &sign in signs(i) {
                    push(EnergyClass::Ising { i, sign }, lc);
                }
            }
        }
        ModelKind::Beg => {
            for (s, r) in enumerate_beg_classes(n)? {
                let lc = ln_binomial(n as u64, r as u64) + ln_binomial(r as u64, ((r - s) / 2) as u64);
                for &sign in signs(s) {
                    push(EnergyClass::Beg { s, r, sign }, lc);
                }
            }
        }
    }
    let log_partition = log_sum_exp(entries.iter().map(|e| e.log_class_weight));
    let index = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.class, i))
        .collect();
    Ok(ClassTable {
        kind: m.kind,
        n,
        entries,
        log_partition,
        index,
    })
}

/// `ln q_N(i)` for `i = 0, 2, ..., N`: the unsigned Ising level weights
/// `C(N, (N-i)/2) exp(β i² / 2N)`. Any `N >= 1` is accepted; odd `N` uses
/// `i = 1, 3, ..., N`.
pub fn ising_level_profile(n: usize, beta: f64) -> Vec<(u32, f64)> {
    let nf = n as f64;
    (n as u32 % 2..=n as u32)
        .step_by(2)
        .map(|i| {
            let lc = ln_binomial(n as u64, (n as u64 - i as u64) / 2);
            (i, lc + beta * (i as f64).powi(2) / (2.0 * nf))
        })
        .collect()
}

/// `ln q_[N](r)`, `r = 0..=N`, evaluated from the closed even/odd row formula.
/// Valid for every `N >= 1`, including odd `N`.
pub fn beg_row_profile(n: usize, beta: f64, k: f64) -> Vec<f64> {
    let nf = n as f64;
    (0..=n as u64)
        .map(|r| {
            let head = ln_binomial(n as u64, r) - beta * r as f64;
            let term = |i: u64| {
                let s = (r - 2 * i) as f64;
                ln_binomial(r, i) + k * beta / nf * s * s
            };
            let inner = if r % 2 == 0 {
                let mut parts = vec![ln_binomial(r, r / 2)];
                parts.extend((0..r / 2).map(|i| std::f64::consts::LN_2 + term(i)));
                log_sum_exp(parts)
            } else {
                std::f64::consts::LN_2 + log_sum_exp((0..=(r - 1) / 2).map(term))
            };
            head + inner
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: &ModelSpec, v: &[i32]) -> SpinConfiguration {
        SpinConfiguration::new(m, v.to_vec()).unwrap()
    }

    #[test]
    fn magnetization_examples() {
        let ising = ModelSpec::ising(4, 1.0).unwrap();
        let beg = ModelSpec::beg(4, 1.0, 1.0).unwrap();
        assert_eq!(magnetization(&cfg(&ising, &[1, 1, -1, -1])), 0);
        assert_eq!(magnetization(&cfg(&ising, &[1, 1, 1, 1])), 4);
        assert_eq!(magnetization(&cfg(&beg, &[1, 0, -1, 1])), 1);
        let w = ModelSpec::warmup(5, 2.0, 0.3).unwrap();
        assert_eq!(magnetization(&cfg(&w, &[-3])), -3);
    }

    #[test]
    fn quadrupole_examples() {
        let beg = ModelSpec::beg(4, 1.0, 1.0).unwrap();
        assert_eq!(quadrupole(&cfg(&beg, &[1, 0, -1, 1])).unwrap(), 3);
        assert_eq!(quadrupole(&cfg(&beg, &[0, 0, 0, 0])).unwrap(), 0);
        assert_eq!(quadrupole(&cfg(&beg, &[-1, -1, -1, -1])).unwrap(), 4);
        let ising = ModelSpec::ising(4, 1.0).unwrap();
        assert!(matches!(
            quadrupole(&cfg(&ising, &[1, 1, 1, 1])),
            Err(Error::WrongModel { .. })
        ));
    }

    #[test]
    fn log_weight_examples() {
        let ising = ModelSpec::ising(4, 1.0).unwrap();
        assert_eq!(log_weight(&ising, &cfg(&ising, &[1, -1, 1, -1])).unwrap(), 0.0);
        assert_eq!(log_weight(&ising, &cfg(&ising, &[1, 1, 1, 1])).unwrap(), 2.0);
        let beg = ModelSpec::beg(4, 1.0, 1.0).unwrap();
        assert_eq!(log_weight(&beg, &cfg(&beg, &[1, -1, 0, 0])).unwrap(), -2.0);
        let beg_x = cfg(&beg, &[1, 0, 0, 0]);
        assert!(matches!(log_weight(&ising, &beg_x), Err(Error::Alphabet(_))));
    }

    #[test]
    fn class_of_examples() {
        let ising = ModelSpec::ising(4, 1.0).unwrap();
        assert_eq!(
            class_of(&ising, &cfg(&ising, &[1, -1, 1, 1])).unwrap(),
            EnergyClass::Ising { i: 2, sign: Sign::Plus }
        );
        let beg = ModelSpec::beg(4, 1.0, 1.0).unwrap();
        assert_eq!(
            class_of(&beg, &cfg(&beg, &[-1, -1, 0, 0])).unwrap(),
            EnergyClass::Beg { s: 2, r: 2, sign: Sign::Minus }
        );
        let w = ModelSpec::warmup(5, 2.0, 0.3).unwrap();
        assert_eq!(
            class_of(&w, &cfg(&w, &[-3])).unwrap(),
            EnergyClass::Warmup { i: 3, sign: Sign::Minus }
        );
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(ModelSpec::ising(5, 1.0), Err(Error::OddSize { .. })));
        assert!(matches!(ModelSpec::beg(3, 1.0, 1.0), Err(Error::OddSize { .. })));
        assert!(ModelSpec::ising(4, -1.0).is_err());
        assert!(ModelSpec::beg(4, 1.0, 0.0).is_err());
        assert!(ModelSpec::warmup(4, 1.0, 0.3).is_err());
        assert!(ModelSpec::warmup(4, 2.0, 1.0).is_err());
        let m = ModelSpec::ising(4, 1.0).unwrap();
        assert!(m.clone().with_mixture(0.6, 0.4).is_err());
        assert!(m.clone().with_mixture(0.0, 0.4).is_err());
        assert!(m.with_mixture(0.6, 0.3).is_ok());
    }

    #[test]
    fn config_alphabet_checked() {
        let ising = ModelSpec::ising(4, 1.0).unwrap();
        assert!(SpinConfiguration::new(&ising, vec![1, 0, 1, 1]).is_err());
        assert!(SpinConfiguration::new(&ising, vec![1, 1, 1]).is_err());
        let w = ModelSpec::warmup(3, 2.0, 0.3).unwrap();
        assert!(SpinConfiguration::new(&w, vec![4]).is_err());
    }

    #[test]
    fn beg_class_list() {
        assert_eq!(
            enumerate_beg_classes(2).unwrap(),
            vec![(0, 0), (1, 1), (0, 2), (2, 2)]
        );
        let four = enumerate_beg_classes(4).unwrap();
        assert_eq!(four.len(), 9);
        assert!(four.contains(&(2, 4)) && four.contains(&(0, 4)));
        assert!(matches!(enumerate_beg_classes(3), Err(Error::OddSize { .. })));
        for n in (2..=40).step_by(2) {
            let closed: usize = (0..=n)
                .map(|r: usize| r / 2 + 1)
                .sum();
            assert_eq!(enumerate_beg_classes(n).unwrap().len(), closed);
        }
    }

    #[test]
    fn ising_table_n4() {
        let t = class_table(&ModelSpec::ising(4, 1.0).unwrap()).unwrap();
        let zero = &t.entries[0];
        assert_eq!(zero.class, EnergyClass::Ising { i: 0, sign: Sign::None });
        assert!((zero.log_class_weight.exp() - 6.0).abs() < 1e-12);
        let plus2 = t.index_of(&EnergyClass::Ising { i: 2, sign: Sign::Plus }).unwrap();
        assert_eq!(t.cardinality(plus2), 4);
        let order: Vec<String> = t.classes().map(|c| c.to_string()).collect();
        assert_eq!(order, ["00", "-2", "+2", "-4", "+4"]);
    }

    #[test]
    fn beg_table_order() {
        let t = class_table(&ModelSpec::beg(2, 1.0, 1.0).unwrap()).unwrap();
        let order: Vec<String> = t.classes().map(|c| c.to_string()).collect();
        assert_eq!(order, ["00:0", "-1:1", "+1:1", "00:2", "-2:2", "+2:2"]);
    }

    #[test]
    fn ln_binomial_routes_agree() {
        use statrs::function::gamma::ln_gamma;
        for n in [10u64, 30, 60] {
            for k in 0..=n {
                let g = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
                assert!((ln_binomial(n, k) - g).abs() < 1e-9 * g.abs().max(1.0));
            }
        }
        assert_eq!(ln_binomial(3, 5), f64::NEG_INFINITY);
        assert_eq!(binomial_exact(60, 30), 118264581564861424);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        let big = log_sum_exp([1000.0, 1000.0]);
        assert!((big - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn large_tables_normalize() {
        for m in [
            ModelSpec::ising(400, 2.0).unwrap(),
            ModelSpec::beg(200, 3.0, 5.0).unwrap(),
            ModelSpec::warmup(500, 2.0, 0.3).unwrap(),
        ] {
            let t = class_table(&m).unwrap();
            let total: f64 = t.probabilities().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{m:?}: {total}");
        }
    }
}
