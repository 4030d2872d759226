//! On-the-fly Metropolis sampling at sizes where kernels cannot be stored.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`); each run seeds the
//! generator from its master seed and selects stream `stream`, so runs in a
//! grid are independent and reproducible regardless of scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{wrap, ChainKind};
use crate::model::{EnergyClass, ModelKind, ModelSpec, SpinConfiguration};

/// Minimal number of batches; with `⌊√n⌋` batches this requires `n ≥ 10⁴`.
pub const MIN_BATCHES: usize = 100;
pub const MIN_BATCH_SIZE: usize = 10;

/// Generator for run `stream` under `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Occupancy of `k` boxes after placing `n` balls one at a time, each into
/// a box chosen with probability proportional to its content plus one.
/// Costs `O(n k)`.
pub fn bose_einstein_sample<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::param("k", "need at least one box"));
    }
    let mut occ = vec![0usize; k];
    for placed in 0..n {
        bose_einstein_place(&mut occ, rng.random_range(0..placed + k));
    }
    Ok(occ)
}

/// One placement: `u`, uniform in `0..(balls + boxes)`, selects box `b`
/// when it falls in the `b`-th run of `occ[b] + 1` consecutive values.
pub fn bose_einstein_place(occ: &mut [usize], mut u: usize) {
    let last = occ.len() - 1;
    for (b, c) in occ.iter_mut().enumerate() {
        if u <= *c || b == last {
            *c += 1;
            return;
        }
        u -= *c + 1;
    }
}

/// Reads an occupancy vector as a sequence of `+1` runs separated by single
/// `-1` spins: box 1 pluses, a minus, box 2 pluses, ..., box `k` pluses.
pub fn occupancy_to_spins(occ: &[usize]) -> Vec<i32> {
    let mut v = Vec::with_capacity(occ.iter().sum::<usize>() + occ.len().saturating_sub(1));
    for (b, &c) in occ.iter().enumerate() {
        if b > 0 {
            v.push(-1);
        }
        v.extend(std::iter::repeat_n(1, c));
    }
    v
}

/// Uniform `m`-subset of `0..n` as a sorted mask, by sequential selection.
fn choose_mask<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R, out: &mut [bool]) {
    let mut need = m;
    for (j, slot) in out.iter_mut().enumerate().take(n) {
        let left = n - j;
        *slot = need > 0 && rng.random_range(0..left) < need;
        if *slot {
            need -= 1;
        }
    }
}

/// How uniform class elements are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitSampler {
    /// Sequential subset selection, `O(N)`.
    #[default]
    Unranking,
    /// The sequential Bose-Einstein placement scheme, `O(N²)`.
    BoseEinstein,
}

impl FromStr for OrbitSampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unranking" => Ok(OrbitSampler::Unranking),
            "bose-einstein" => Ok(OrbitSampler::BoseEinstein),
            other => Err(Error::param("sampler", format!("unknown sampler `{other}`"))),
        }
    }
}

/// Fills `values` with a uniform element of the class with statistics
/// `(s, r)`; returns the elementary-operation cost.
#[allow(clippy::too_many_arguments)]
fn fill_uniform<R: Rng + ?Sized>(
    kind: ModelKind,
    n: usize,
    s: i64,
    r: i64,
    sampler: OrbitSampler,
    values: &mut [i32],
    mask: &mut [bool],
    rng: &mut R,
) -> u64 {
    // every Ising site is nonzero
    let r = if kind == ModelKind::Ising { n as i64 } else { r };
    let plus = ((r + s) / 2) as usize;
    let minus = ((r - s) / 2) as usize;
    match (kind, sampler) {
        (ModelKind::Ising, OrbitSampler::Unranking) => {
            choose_mask(n, plus, rng, mask);
            for (v, &m) in values.iter_mut().zip(mask.iter()) {
                *v = if m { 1 } else { -1 };
            }
            n as u64
        }
        (ModelKind::Ising, OrbitSampler::BoseEinstein) => {
            let occ = bose_einstein_sample(plus, minus + 1, rng).expect("k >= 1");
            values.copy_from_slice(&occupancy_to_spins(&occ));
            (plus * (minus + 1)) as u64
        }
        (ModelKind::Beg, OrbitSampler::Unranking) => {
            let r = r as usize;
            choose_mask(n, r, rng, mask);
            let mut signs = vec![false; r];
            choose_mask(r, plus, rng, &mut signs);
            let mut t = 0;
            for (v, &m) in values.iter_mut().zip(mask.iter()) {
                *v = if m {
                    t += 1;
                    if signs[t - 1] {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
            }
            (n + r) as u64
        }
        (ModelKind::Beg, OrbitSampler::BoseEinstein) => {
            let r = r as usize;
            // zeros are balls, the r nonzero sites are separators
            let occ = bose_einstein_sample(n - r, r + 1, rng).expect("k >= 1");
            let support = occupancy_to_spins(&occ);
            let socc = bose_einstein_sample(plus, minus + 1, rng).expect("k >= 1");
            let signs = occupancy_to_spins(&socc);
            let mut t = 0;
            for (v, &m) in values.iter_mut().zip(&support) {
                *v = if m == -1 {
                    t += 1;
                    signs[t - 1]
                } else {
                    0
                };
            }
            ((n - r) * (r + 1) + plus * (minus + 1)) as u64
        }
        (ModelKind::Warmup, _) => 1,
    }
}

/// Uniform element of the signed class `c`.
pub fn sample_uniform_class<R: Rng + ?Sized>(
    m: &ModelSpec,
    c: &EnergyClass,
    sampler: OrbitSampler,
    rng: &mut R,
) -> Result<SpinConfiguration> {
    if c.kind() != m.kind {
        return Err(Error::StateMismatch(format!(
            "class {c} does not belong to the {} model",
            m.kind.name()
        )));
    }
    let (s, r) = c.stats();
    let n = m.n as i64;
    let valid = match m.kind {
        ModelKind::Warmup => s.abs() <= n,
        ModelKind::Ising => s.abs() <= n && (n + s) % 2 == 0,
        ModelKind::Beg => s.abs() <= r && r <= n && (r + s) % 2 == 0,
    };
    if !valid {
        return Err(Error::param("class", format!("class {c} is empty for N={}", m.n)));
    }
    if m.kind == ModelKind::Warmup {
        return SpinConfiguration::new(m, vec![s as i32]);
    }
    let mut values = vec![0; m.n];
    let mut mask = vec![false; m.n];
    fill_uniform(m.kind, m.n, s, r, sampler, &mut values, &mut mask, rng);
    SpinConfiguration::new(m, values)
}

/// Proposal component drawn in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    /// Single-site move (or the nearest-neighbour step for the warming-up walk).
    Local,
    /// Global sign flip `x -> -x`.
    Flip,
    /// Uniform draw from the current signed class.
    Orbit,
}

/// Outcome of one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub component: Component,
    pub accepted: bool,
    pub cost: u64,
}

/// A Metropolis chain held as a configuration with running statistics.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: ModelSpec,
    kind: ChainKind,
    orbit: OrbitSampler,
    values: Vec<i32>,
    s: i64,
    r: i64,
    mask: Vec<bool>,
}

impl Sampler {
    pub fn new(m: &ModelSpec, kind: ChainKind, x: &SpinConfiguration) -> Result<Self> {
        m.validate()?;
        let ok = match kind {
            ChainKind::Naive => true,
            ChainKind::EquiEnergy => m.kind != ModelKind::Warmup,
            ChainKind::SmallWorld => m.kind == ModelKind::Warmup,
        };
        if !ok {
            return Err(Error::WrongModel {
                op: kind.name(),
                model: m.kind.name(),
            });
        }
        let x = SpinConfiguration::new(m, x.values.clone())?;
        let s = x.values.iter().map(|&v| v as i64).sum();
        let r = x.values.iter().map(|&v| (v * v) as i64).sum();
        Ok(Sampler {
            spec: m.clone(),
            kind,
            orbit: OrbitSampler::default(),
            values: x.values,
            s,
            r,
            mask: vec![false; m.n],
        })
    }

    /// Starts from a uniformly random configuration.
    pub fn random<R: Rng + ?Sized>(m: &ModelSpec, kind: ChainKind, rng: &mut R) -> Result<Self> {
        let values = match m.kind {
            ModelKind::Warmup => vec![rng.random_range(-(m.n as i32)..=m.n as i32)],
            ModelKind::Ising => (0..m.n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
            ModelKind::Beg => (0..m.n).map(|_| rng.random_range(-1..=1)).collect(),
        };
        Sampler::new(m, kind, &SpinConfiguration { kind: m.kind, values })
    }

    pub fn with_orbit_sampler(mut self, orbit: OrbitSampler) -> Self {
        self.orbit = orbit;
        self
    }

    pub fn state(&self) -> SpinConfiguration {
        SpinConfiguration {
            kind: self.spec.kind,
            values: self.values.clone(),
        }
    }

    /// Magnetization (the coordinate itself for the warming-up walk).
    pub fn s(&self) -> i64 {
        self.s
    }

    pub fn r(&self) -> i64 {
        self.r
    }

    pub fn class(&self) -> EnergyClass {
        EnergyClass::from_stats(self.spec.kind, self.s, self.r)
    }

    fn accept<R: Rng + ?Sized>(&self, s2: i64, r2: i64, rng: &mut R) -> bool {
        let d = self.spec.log_weight_stats(s2, r2) - self.spec.log_weight_stats(self.s, self.r);
        d >= 0.0 || rng.random::<f64>() < d.exp()
    }

    fn local<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (bool, u64) {
        let n = self.spec.n;
        match self.spec.kind {
            ModelKind::Warmup => {
                let up = rng.random::<bool>();
                let x = self.values[0] as i64;
                let y = if up { x + 1 } else { x - 1 };
                if y.unsigned_abs() as usize > n {
                    return (true, 1);
                }
                let ok = self.accept(y, 0, rng);
                if ok {
                    self.values[0] = y as i32;
                    self.s = y;
                }
                (ok, 1)
            }
            ModelKind::Ising => {
                let j = rng.random_range(0..n);
                let s2 = self.s - 2 * self.values[j] as i64;
                let ok = self.accept(s2, 0, rng);
                if ok {
                    self.values[j] = -self.values[j];
                    self.s = s2;
                }
                (ok, n as u64)
            }
            ModelKind::Beg => {
                let j = rng.random_range(0..n);
                let step = if rng.random::<bool>() { 1 } else { -1 };
                let old = self.values[j];
                let new = wrap(old + step);
                let s2 = self.s + (new - old) as i64;
                let r2 = self.r + (new * new - old * old) as i64;
                let ok = self.accept(s2, r2, rng);
                if ok {
                    self.values[j] = new;
                    self.s = s2;
                    self.r = r2;
                }
                (ok, n as u64)
            }
        }
    }

    fn flip(&mut self) -> u64 {
        for v in &mut self.values {
            *v = -*v;
        }
        self.s = -self.s;
        self.values.len() as u64
    }

    /// One Metropolis transition.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepRecord {
        let m = &self.spec;
        let component = match self.kind {
            ChainKind::Naive => Component::Local,
            ChainKind::SmallWorld => {
                if rng.random::<f64>() < m.epsilon {
                    Component::Flip
                } else {
                    Component::Local
                }
            }
            ChainKind::EquiEnergy => {
                let u = rng.random::<f64>();
                if u < m.p1 {
                    Component::Local
                } else if self.s != 0 && u < m.p1 + m.p2 {
                    Component::Flip
                } else {
                    Component::Orbit
                }
            }
        };
        let (accepted, cost) = match component {
            Component::Local => self.local(rng),
            // mirror images carry equal weight
            Component::Flip => (true, self.flip()),
            Component::Orbit => {
                let cost = fill_uniform(
                    self.spec.kind,
                    self.spec.n,
                    self.s,
                    self.r,
                    self.orbit,
                    &mut self.values,
                    &mut self.mask,
                    rng,
                );
                (true, cost)
            }
        };
        StepRecord {
            component,
            accepted,
            cost,
        }
    }
}

/// One transition from `x`.
pub fn step<R: Rng + ?Sized>(
    m: &ModelSpec,
    kind: ChainKind,
    x: &SpinConfiguration,
    rng: &mut R,
) -> Result<(SpinConfiguration, StepRecord)> {
    let mut s = Sampler::new(m, kind, x)?;
    let rec = s.step(rng);
    Ok((s.state(), rec))
}

/// Function whose stationary mean is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "S/N")]
    Magnetization,
    #[serde(rename = "|S|/N")]
    AbsMagnetization,
    #[serde(rename = "R/N")]
    Quadrupole,
    #[serde(rename = "S>0")]
    Positive,
}

impl Observable {
    pub fn tag(self) -> &'static str {
        match self {
            Observable::One => "1",
            Observable::Magnetization => "S/N",
            Observable::AbsMagnetization => "|S|/N",
            Observable::Quadrupole => "R/N",
            Observable::Positive => "S>0",
        }
    }

    pub fn check(self, m: &ModelSpec) -> Result<()> {
        if self == Observable::Quadrupole && m.kind != ModelKind::Beg {
            return Err(Error::WrongModel {
                op: "observable R/N",
                model: m.kind.name(),
            });
        }
        Ok(())
    }

    /// Value on a state with statistics `(s, r)` and `n` sites.
    pub fn eval(self, n: usize, s: i64, r: i64) -> f64 {
        let nf = n as f64;
        match self {
            Observable::One => 1.0,
            Observable::Magnetization => s as f64 / nf,
            Observable::AbsMagnetization => s.abs() as f64 / nf,
            Observable::Quadrupole => r as f64 / nf,
            Observable::Positive => {
                if s > 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Observable::One),
            "S/N" => Ok(Observable::Magnetization),
            "|S|/N" => Ok(Observable::AbsMagnetization),
            "R/N" => Ok(Observable::Quadrupole),
            "S>0" => Ok(Observable::Positive),
            other => Err(Error::param("observable", format!("unknown observable `{other}`"))),
        }
    }
}

/// Parameters of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub steps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    /// Stream index of this run under `seed`.
    pub stream: u64,
    pub observable: Observable,
    pub sampler: OrbitSampler,
    /// Starting configuration; uniformly random when absent.
    pub initial: Option<Vec<i32>>,
    /// Count visits per signed class among the kept samples.
    pub histogram: bool,
}

impl RunConfig {
    /// `steps` steps with a 10% burn-in and no thinning.
    pub fn new(steps: u64, seed: u64, observable: Observable) -> Self {
        RunConfig {
            steps,
            burn_in: steps / 10,
            thinning: 1,
            seed,
            stream: 0,
            observable,
            sampler: OrbitSampler::default(),
            initial: None,
            histogram: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::param(
                "steps",
                format!("need steps > burn-in, got {} <= {}", self.steps, self.burn_in),
            ));
        }
        if self.thinning == 0 {
            return Err(Error::param("thinning", "need thinning >= 1"));
        }
        Ok(())
    }

    /// Number of samples kept after burn-in and thinning.
    pub fn kept(&self) -> u64 {
        (self.steps - self.burn_in).div_ceil(self.thinning)
    }
}

/// Proposal and acceptance counts of one component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ComponentStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl ComponentStats {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Elementary-operation tallies over all steps (burn-in included).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostCounters {
    pub flip_proposals: u64,
    pub orbit_jumps: u64,
    pub global_flips: u64,
    pub elementary_ops: u64,
}

/// Visits of one signed class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCount {
    pub class: String,
    pub s: i64,
    pub r: i64,
    pub count: u64,
}

/// Summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub model: ModelSpec,
    pub chain: ChainKind,
    pub config: RunConfig,
    pub samples: u64,
    pub estimate: f64,
    pub avar: f64,
    /// Standard error of `avar` under normal batch means.
    pub avar_se: f64,
    /// `sqrt(avar / samples)`.
    pub standard_error: f64,
    pub batch_count: usize,
    pub batch_size: usize,
    pub local: ComponentStats,
    pub flip: ComponentStats,
    pub orbit: ComponentStats,
    pub cost: CostCounters,
    pub histogram: Option<Vec<ClassCount>>,
}

/// Batch-means estimate of the asymptotic variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchMeans {
    pub avar: f64,
    pub se: f64,
    pub batches: usize,
    pub batch_size: usize,
}

/// Shape used for `n` samples: `⌊√n⌋` batches of `⌊n/b⌋`; trailing samples
/// are left out of the variance.
pub fn batch_shape(n: usize) -> Result<(usize, usize)> {
    let b = n.isqrt();
    let size = n.checked_div(b).unwrap_or(0);
    if b < MIN_BATCHES || size < MIN_BATCH_SIZE {
        return Err(Error::TraceTooShort {
            len: n,
            needed: MIN_BATCHES * MIN_BATCHES,
        });
    }
    Ok((b, size))
}

fn batch_result(sums: &[f64], size: usize) -> BatchMeans {
    let b = sums.len();
    let means: Vec<f64> = sums.iter().map(|s| s / size as f64).collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    let avar = size as f64 * var;
    BatchMeans {
        avar,
        se: avar * (2.0 / (b - 1) as f64).sqrt(),
        batches: b,
        batch_size: size,
    }
}

/// `n · Var(μ̂)` estimated by batch means.
pub fn batch_means_avar(trace: &[f64]) -> Result<BatchMeans> {
    let (b, size) = batch_shape(trace.len())?;
    let sums: Vec<f64> = trace[..b * size].chunks_exact(size).map(|c| c.iter().sum()).collect();
    Ok(batch_result(&sums, size))
}

/// Runs one trajectory, calling `sink(step, sampler, value)` on every kept
/// sample.
pub fn run_estimate_with<F>(m: &ModelSpec, kind: ChainKind, cfg: &RunConfig, mut sink: F) -> Result<RunStats>
where
    F: FnMut(u64, &Sampler, f64),
{
    cfg.validate()?;
    cfg.observable.check(m)?;
    let kept = cfg.kept();
    let (b, size) = batch_shape(kept as usize)?;
    let mut rng = rng_for(cfg.seed, cfg.stream);
    let sampler = match &cfg.initial {
        Some(v) => Sampler::new(m, kind, &SpinConfiguration::new(m, v.clone())?)?,
        None => Sampler::random(m, kind, &mut rng)?,
    };
    let mut sampler = sampler.with_orbit_sampler(cfg.sampler);
    let mut local = ComponentStats::default();
    let mut flip = ComponentStats::default();
    let mut orbit = ComponentStats::default();
    let mut cost = CostCounters::default();
    let mut hist: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut sums = vec![0.0; b];
    let mut total = 0.0;
    let mut taken: u64 = 0;
    for t in 0..cfg.steps {
        let rec = sampler.step(&mut rng);
        let slot = match rec.component {
            Component::Local => {
                cost.flip_proposals += 1;
                &mut local
            }
            Component::Flip => {
                cost.global_flips += 1;
                &mut flip
            }
            Component::Orbit => {
                cost.orbit_jumps += 1;
                &mut orbit
            }
        };
        slot.proposed += 1;
        slot.accepted += rec.accepted as u64;
        cost.elementary_ops += rec.cost;
        if t >= cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.thinning) {
            let v = cfg.observable.eval(m.n, sampler.s, sampler.r);
            total += v;
            let batch = taken as usize / size;
            if batch < b {
                sums[batch] += v;
            }
            taken += 1;
            if cfg.histogram {
                *hist.entry((sampler.s, sampler.r)).or_default() += 1;
            }
            sink(t, &sampler, v);
        }
    }
    debug_assert_eq!(taken, kept);
    let bm = batch_result(&sums, size);
    let histogram = cfg.histogram.then(|| {
        hist.into_iter()
            .map(|((s, r), count)| ClassCount {
                class: EnergyClass::from_stats(m.kind, s, r).to_string(),
                s,
                r,
                count,
            })
            .collect()
    });
    Ok(RunStats {
        model: m.clone(),
        chain: kind,
        config: cfg.clone(),
        samples: kept,
        estimate: total / kept as f64,
        avar: bm.avar,
        avar_se: bm.se,
        standard_error: (bm.avar / kept as f64).sqrt(),
        batch_count: b,
        batch_size: size,
        local,
        flip,
        orbit,
        cost,
        histogram,
    })
}

/// Runs one trajectory.
pub fn run_estimate(m: &ModelSpec, kind: ChainKind, cfg: &RunConfig) -> Result<RunStats> {
    run_estimate_with(m, kind, cfg, |_, _, _| {})
}

/// Runs independent trajectories in parallel; results are in input order.
pub fn run_many(jobs: &[(ModelSpec, ChainKind, RunConfig)]) -> Vec<Result<RunStats>> {
    jobs.par_iter().map(|(m, k, c)| run_estimate(m, *k, c)).collect()
}

/// Mean cost per step of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostProfile {
    pub n: usize,
    pub steps: u64,
    pub ops_per_step: f64,
    /// `ops_per_step / N`.
    pub ops_per_site_step: f64,
    pub local_fraction: f64,
    pub flip_fraction: f64,
    pub orbit_fraction: f64,
}

pub fn cost_profile(stats: &RunStats) -> CostProfile {
    let steps = stats.config.steps;
    let st = steps as f64;
    let ops = stats.cost.elementary_ops as f64 / st;
    CostProfile {
        n: stats.model.n,
        steps,
        ops_per_step: ops,
        ops_per_site_step: ops / stats.model.n as f64,
        local_fraction: stats.cost.flip_proposals as f64 / st,
        flip_fraction: stats.cost.global_flips as f64 / st,
        orbit_fraction: stats.cost.orbit_jumps as f64 / st,
    }
}

/// Relative spread `max/min − 1` of the per-site cost over several runs.
pub fn cost_spread(profiles: &[CostProfile]) -> f64 {
    let lo = profiles.iter().map(|p| p.ops_per_site_step).fold(f64::INFINITY, f64::min);
    let hi = profiles.iter().map(|p| p.ops_per_site_step).fold(0.0, f64::max);
    hi / lo - 1.0
}
