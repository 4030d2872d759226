//! Experiments that confront the mixing results with exact computations:
//! gap scans, bound audits, decay fits and unimodality scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::kernel::{
    beg_lumped, full_chain, ising_lumped_bd, label_sign, lumped_projection, restriction,
    signed_lumped_chain, unsigned_partition, BirthDeathChain, ChainKind, FiniteKernel, Partition,
};
use crate::model::{
    beg_row_profile, class_table, ising_level_profile, log_sum_exp, ModelKind, ModelSpec, Sign,
};
use crate::spectral::{
    bd_path_bound, conductance_exact, decomposition_bound, gap_report, spectrum, BoundRecord,
    GapStatus, MAX_EXACT_CONDUCTANCE, RESOLUTION,
};

/// Minimum number of usable points for an asserted fit.
pub const MIN_FIT_POINTS: usize = 6;
/// Upper edge of the fitted `log Gap` vs `N` slope required for slow mixing.
pub const SLOW_SLOPE: f64 = -0.01;
/// Barrier `Ĩ(0)` above which a BEG cell is flagged as deep two-phase.
pub const BARRIER_FLAG: f64 = 0.05;
/// Relative flat tolerance of the unimodality test.
pub const PLATEAU_TOL: f64 = 1e-12;

/// Parameter lists to scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub model: ModelKind,
    pub n: Vec<usize>,
    pub beta: Vec<f64>,
    pub k: Vec<f64>,
    pub theta: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub epsilon: Vec<f64>,
    /// Scales for the `N`-dependent mixture weights (Ising).
    pub a: Vec<f64>,
    /// Chains for `gap_scan`; empty means every chain defined for the model.
    pub chains: Vec<ChainKind>,
}

impl ScanGrid {
    pub fn new(model: ModelKind, n: Vec<usize>) -> Self {
        ScanGrid {
            model,
            n,
            beta: vec![1.0],
            k: vec![1.0],
            theta: vec![2.0],
            p1: vec![0.5],
            p2: vec![0.25],
            epsilon: vec![0.3],
            a: Vec::new(),
            chains: Vec::new(),
        }
    }

    pub fn chains(&self) -> Vec<ChainKind> {
        if !self.chains.is_empty() {
            return self.chains.clone();
        }
        match self.model {
            ModelKind::Warmup => vec![ChainKind::Naive, ChainKind::SmallWorld],
            _ => vec![ChainKind::Naive, ChainKind::EquiEnergy],
        }
    }

    fn sizes(&self) -> Vec<usize> {
        let mut n = self.n.clone();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// Cells grouped by everything but `N`, each group sorted by `N`.
    /// Without `mixture` only the first `p1`, `p2` pair is used.
    pub fn groups(&self, mixture: bool) -> Result<Vec<Group>> {
        let sizes = self.sizes();
        let nonempty = |name: &'static str, v: &[f64]| {
            if v.is_empty() {
                Err(Error::param(name, "empty list"))
            } else {
                Ok(())
            }
        };
        if sizes.is_empty() {
            return Err(Error::param("n", "empty list"));
        }
        let mut out = Vec::new();
        let pairs: Vec<(f64, f64)> = if mixture {
            self.p1.iter().flat_map(|&a| self.p2.iter().map(move |&b| (a, b))).collect()
        } else {
            vec![(self.p1.first().copied().unwrap_or(0.5), self.p2.first().copied().unwrap_or(0.25))]
        };
        let build = |make: &dyn Fn(usize) -> Result<ModelSpec>| -> Result<Group> {
            let cells = sizes.iter().map(|&n| make(n)).collect::<Result<Vec<_>>>()?;
            Ok(Group {
                label: group_label(&cells[0]),
                cells,
            })
        };
        match self.model {
            ModelKind::Warmup => {
                nonempty("theta", &self.theta)?;
                nonempty("epsilon", &self.epsilon)?;
                for &t in &self.theta {
                    for &e in &self.epsilon {
                        out.push(build(&|n| ModelSpec::warmup(n, t, e))?);
                    }
                }
            }
            ModelKind::Ising => {
                nonempty("beta", &self.beta)?;
                for &b in &self.beta {
                    for &(p1, p2) in &pairs {
                        out.push(build(&|n| ModelSpec::ising(n, b)?.with_mixture(p1, p2))?);
                    }
                    if mixture {
                        for &a in &self.a {
                            out.push(build(&|n| ModelSpec::ising(n, b)?.with_scaled(a))?);
                        }
                    }
                }
            }
            ModelKind::Beg => {
                nonempty("beta", &self.beta)?;
                nonempty("k", &self.k)?;
                for &b in &self.beta {
                    for &k in &self.k {
                        for &(p1, p2) in &pairs {
                            out.push(build(&|n| ModelSpec::beg(n, b, k)?.with_mixture(p1, p2))?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.groups(true).map(|_| ())
    }
}

/// Models sharing every parameter except `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub label: String,
    pub cells: Vec<ModelSpec>,
}

/// Human-readable parameter tag of a model, without `N`.
pub fn group_label(m: &ModelSpec) -> String {
    match (m.kind, m.a) {
        (ModelKind::Warmup, _) => format!("theta={},epsilon={}", m.theta, m.epsilon),
        (ModelKind::Ising, Some(a)) => format!("beta={},a={}", m.beta, a),
        (ModelKind::Ising, None) => format!("beta={},p1={},p2={}", m.beta, m.p1, m.p2),
        (ModelKind::Beg, _) => format!("beta={},K={},p1={},p2={}", m.beta, m.k, m.p1, m.p2),
    }
}

/// Exact gap of one chain at one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCell {
    pub group: String,
    pub model: ModelKind,
    pub n: usize,
    pub beta: f64,
    pub k: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub p1: f64,
    pub p2: f64,
    pub a: Option<f64>,
    pub chain: ChainKind,
    pub states: usize,
    pub gap: f64,
    pub one_minus_lambda1: f64,
    pub lambda_min: f64,
    pub status: GapStatus,
    /// Closed-form bound compared with `gap`, when the analysis has one.
    pub bound: Option<f64>,
    pub holds: Option<bool>,
}

impl GapCell {
    /// Usable in a fit of `log gap`. Refined gaps keep relative precision
    /// far below [`RESOLUTION`].
    pub fn resolved(&self) -> bool {
        match self.status {
            GapStatus::BelowResolution => false,
            GapStatus::Refined => self.gap > 0.0,
            GapStatus::Direct => self.gap > RESOLUTION,
        }
    }
}

fn cell_from(m: &ModelSpec, chain: ChainKind, k: &FiniteKernel) -> Result<GapCell> {
    let r = gap_report(k)?;
    Ok(GapCell {
        group: group_label(m),
        model: m.kind,
        n: m.n,
        beta: m.beta,
        k: m.k,
        theta: m.theta,
        epsilon: m.epsilon,
        p1: m.p1,
        p2: m.p2,
        a: m.a,
        chain,
        states: k.len(),
        gap: r.gap,
        one_minus_lambda1: r.one_minus_lambda1,
        lambda_min: r.lambda_min,
        status: r.status,
        bound: None,
        holds: None,
    })
}

/// Gap of the signed lumped chain of `m`.
pub fn gap_cell(m: &ModelSpec, chain: ChainKind) -> Result<GapCell> {
    cell_from(m, chain, &signed_lumped_chain(m, chain)?)
}

/// Ordinary least squares line with a 95% interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub points: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<Fit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::StateMismatch("fit needs as many x as y values".into()));
    }
    if n < 3 {
        return Err(Error::Degenerate(format!("fit needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("fit abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (ss / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::Degenerate(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(Fit {
        slope,
        intercept,
        slope_lo: slope - t * se,
        slope_hi: slope + t * se,
        points: n,
    })
}

/// Abscissa transform of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// `log y` against `N`.
    SemiLog,
    /// `log y` against `log N`.
    LogLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub name: String,
    pub group: String,
    pub scale: Scale,
    pub fit: Option<Fit>,
    /// Cells left out because their gap is below resolution.
    pub excluded: usize,
}

fn fit_cells(name: &str, group: &str, scale: Scale, pts: &[(usize, f64, bool)]) -> FitRecord {
    let usable: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.2 && p.1 > 0.0)
        .map(|&(n, y, _)| {
            let x = match scale {
                Scale::SemiLog => n as f64,
                Scale::LogLog => (n as f64).ln(),
            };
            (x, y.ln())
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = usable.iter().copied().unzip();
    FitRecord {
        name: name.to_string(),
        group: group.to_string(),
        scale,
        fit: ols(&x, &y).ok(),
        excluded: pts.len() - usable.len(),
    }
}

/// A checked inequality tied to a cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub group: String,
    pub n: usize,
    #[serde(flatten)]
    pub record: BoundRecord,
}

/// Pass/fail of an empirical claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub group: String,
    pub passed: bool,
    pub detail: String,
}

/// One `(x, y)` series for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: Vec<(f64, f64)>,
}

/// Everything one analysis produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub analysis: String,
    pub cells: Vec<GapCell>,
    pub audits: Vec<AuditRecord>,
    pub fits: Vec<FitRecord>,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
    pub series: Vec<Series>,
}

impl BoundReport {
    fn new(analysis: &str) -> Self {
        BoundReport {
            analysis: analysis.to_string(),
            cells: Vec::new(),
            audits: Vec::new(),
            fits: Vec::new(),
            assertions: Vec::new(),
            notes: Vec::new(),
            series: Vec::new(),
        }
    }

    fn audit(&mut self, group: &str, n: usize, record: BoundRecord) {
        self.audits.push(AuditRecord {
            group: group.to_string(),
            n,
            record,
        });
    }

    fn assert(&mut self, name: &str, group: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            group: group.to_string(),
            passed,
            detail,
        });
    }

    /// Failed audits under verified hypotheses and failed assertions.
    pub fn defects(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .audits
            .iter()
            .filter(|a| !a.record.is_sound())
            .map(|a| {
                format!(
                    "{} [{} N={}]: bound {:e} vs {:e}",
                    a.record.name,
                    a.group,
                    a.n,
                    a.record.value,
                    a.record.compared.unwrap_or(f64::NAN)
                )
            })
            .collect();
        out.extend(
            self.assertions
                .iter()
                .filter(|a| !a.passed)
                .map(|a| format!("{} [{}]: {}", a.name, a.group, a.detail)),
        );
        out
    }

    pub fn passed(&self) -> bool {
        self.defects().is_empty()
    }

    pub fn fit(&self, name: &str, group: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.name == name && f.group == group)
    }

    pub fn assertion(&self, name: &str, group: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name && a.group == group)
    }
}

fn par_cells<F>(groups: &[Group], f: F) -> Result<Vec<Vec<GapCell>>>
where
    F: Fn(&ModelSpec) -> Result<GapCell> + Sync,
{
    let flat: Vec<(usize, &ModelSpec)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, grp)| grp.cells.iter().map(move |m| (g, m)))
        .collect();
    let done: Vec<(usize, GapCell)> = flat
        .par_iter()
        .map(|&(g, m)| f(m).map(|c| (g, c)))
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); groups.len()];
    for (g, c) in done {
        out[g].push(c);
    }
    Ok(out)
}

fn check_model(grid: &ScanGrid, want: ModelKind, op: &'static str) -> Result<()> {
    if grid.model != want {
        return Err(Error::WrongModel {
            op,
            model: grid.model.name(),
        });
    }
    Ok(())
}

fn gap_series(name: &str, cells: &[GapCell], f: impl Fn(&GapCell) -> f64) -> Series {
    Series {
        name: name.to_string(),
        x: "N".into(),
        y: "value".into(),
        points: cells.iter().map(|c| (c.n as f64, f(c))).collect(),
    }
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect()
}

/// Exact gaps of every chain in the grid, with informational log-log fits.
pub fn gap_scan(grid: &ScanGrid) -> Result<BoundReport> {
    let groups = grid.groups(true)?;
    let mut rep = BoundReport::new("gap-scan");
    for chain in grid.chains() {
        let per_group = par_cells(&groups, |m| gap_cell(m, chain))?;
        for (g, cells) in groups.iter().zip(per_group) {
            let pts: Vec<_> = cells.iter().map(|c| (c.n, c.gap, c.resolved())).collect();
            rep.fits.push(fit_cells(&format!("gap-{}", chain.name()), &g.label, Scale::LogLog, &pts));
            rep.series.push(gap_series(
                &format!("gap_{}_{}", chain.name(), slug(&g.label)),
                &cells,
                |c| c.gap,
            ));
            rep.cells.extend(cells);
        }
    }
    Ok(rep)
}

/// `(p1 p2 / 32) (N/2 + 1)^{-3} min[(1 − p1 − p2)/2, (1 − p1)/p2]`.
pub fn ising_fast_bound(n: usize, p1: f64, p2: f64) -> f64 {
    p1 * p2 / 32.0 * (n as f64 / 2.0 + 1.0).powi(-3) * ((1.0 - p1 - p2) / 2.0).min((1.0 - p1) / p2)
}

/// Smallest `N` of the sorted list from which `holds` is true through the end.
pub fn empirical_n0(cells: &[(usize, bool)]) -> Option<usize> {
    let mut n0 = None;
    for &(n, ok) in cells.iter().rev() {
        if !ok {
            break;
        }
        n0 = Some(n);
    }
    n0
}

/// Mixture weights for scale `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledParams {
    /// `(1 − a/(2N), a/N)`.
    pub printed: (f64, f64),
    /// Whether the printed pair satisfies `p1 + p2 < 1`; it never does.
    pub printed_valid: bool,
    /// `(1 − a/N, a/(2N))`, used in place of the printed pair.
    pub fallback: (f64, f64),
}

pub fn scaled_params(a: f64, n: usize) -> Result<ScaledParams> {
    let nf = n as f64;
    if !(a > 0.0) || a >= nf {
        return Err(Error::param("a", format!("need 0 < a < N, got a={a}, N={n}")));
    }
    let printed = (1.0 - a / (2.0 * nf), a / nf);
    Ok(ScaledParams {
        printed,
        printed_valid: printed.0 + printed.1 < 1.0,
        fallback: (1.0 - a / nf, a / (2.0 * nf)),
    })
}

/// Polynomial lower bound for the equi-energy Ising chain: per cell the
/// exact gap against the closed-form bound, the empirical `N₀`, and audits
/// of the lumped chain `P̄` and of the decomposition inequality.
pub fn verify_ising_fast(grid: &ScanGrid) -> Result<BoundReport> {
    check_model(grid, ModelKind::Ising, "verify ising-fast")?;
    let groups = grid.groups(true)?;
    let mut rep = BoundReport::new("ising-fast");
    let per_group = par_cells(&groups, |m| {
        let mut c = gap_cell(m, ChainKind::EquiEnergy)?;
        let b = ising_fast_bound(m.n, m.p1, m.p2);
        c.bound = Some(b);
        c.holds = Some(c.gap >= b);
        Ok(c)
    })?;
    let audits: Vec<Vec<BoundRecord>> = groups
        .iter()
        .flat_map(|g| g.cells.iter())
        .collect::<Vec<_>>()
        .par_iter()
        .map(|m| ising_fast_audits(m))
        .collect::<Result<_>>()?;
    let mut audit_iter = audits.into_iter();
    for (g, cells) in groups.iter().zip(per_group) {
        for (m, recs) in g.cells.iter().zip(audit_iter.by_ref()) {
            for r in recs {
                rep.audit(&g.label, m.n, r);
            }
        }
        let flags: Vec<(usize, bool)> = cells.iter().map(|c| (c.n, c.holds == Some(true))).collect();
        let n0 = empirical_n0(&flags);
        rep.assert(
            "n0_found",
            &g.label,
            n0.is_some(),
            match n0 {
                Some(n0) => format!("bound holds for every scanned N >= {n0}"),
                None => "bound fails at the largest scanned N".into(),
            },
        );
        let pts: Vec<_> = cells.iter().map(|c| (c.n, c.gap, c.resolved())).collect();
        let fit = fit_cells("gap-equi-energy", &g.label, Scale::LogLog, &pts);
        if let Some(a) = g.cells[0].a {
            let sp = scaled_params(a, g.cells[0].n)?;
            rep.notes.push(format!(
                "{}: printed pair (1-a/2N, a/N) gives p1+p2 = 1 + a/2N > 1; fallback (1-a/N, a/2N) used (N={}: {:?})",
                g.label, g.cells[0].n, sp.fallback
            ));
            match fit.fit.filter(|f| f.points >= MIN_FIT_POINTS) {
                Some(f) => rep.assert(
                    "scaled_slope",
                    &g.label,
                    f.slope_lo >= -5.25,
                    format!("slope {:.4} in [{:.4}, {:.4}], need lower edge >= -5.25", f.slope, f.slope_lo, f.slope_hi),
                ),
                None => rep.notes.push(format!("{}: too few points for the scaled-slope check", g.label)),
            }
        }
        rep.fits.push(fit);
        rep.series.push(gap_series(&format!("gap_{}", slug(&g.label)), &cells, |c| c.gap));
        rep.series.push(gap_series(&format!("bound_{}", slug(&g.label)), &cells, |c| c.bound.unwrap_or(f64::NAN)));
        rep.cells.extend(cells);
    }
    Ok(rep)
}

fn ising_fast_audits(m: &ModelSpec) -> Result<Vec<BoundRecord>> {
    let mut out = Vec::new();
    let nf = m.n as f64;
    let bd = ising_lumped_bd(m)?.to_kernel()?;
    let s = spectrum(&bd)?;
    let lam1 = s.lambda1();
    out.push(BoundRecord::upper(
        "barP_lambda1",
        true,
        1.0 - m.p1 / 16.0 * (nf / 2.0 + 1.0).powi(-3),
        lam1,
        1e-12,
    ));
    out.push(BoundRecord::lower("barP_lambda_min", true, 1.0 - m.p1, s.lambda_min(), 1e-12));
    let g_bar = gap_report(&bd)?.gap;
    let chain = signed_lumped_chain(m, ChainKind::EquiEnergy)?;
    let g = gap_report(&chain)?.gap;
    let inner = (1.0 - m.p1).min(0.5 * m.p2 * (1.0 - m.p1 - m.p2));
    out.push(BoundRecord::lower("decomposition_chain", true, 0.5 * g_bar * inner, g, 1e-12));
    // the same inequality on the signed classes with the unsigned partition
    let parts = unsigned_partition(&chain);
    out.push(BoundRecord::lower(
        "decomposition_signed",
        true,
        decomposition_bound(&chain, &parts)?,
        g,
        1e-12,
    ));
    if m.n <= 10 {
        let full = full_chain(m, ChainKind::EquiEnergy)?;
        let parts = unsigned_partition(&full);
        let gf = gap_report(&full)?.gap;
        out.push(BoundRecord::lower("decomposition_full", true, decomposition_bound(&full, &parts)?, gf, 1e-12));
    }
    Ok(out)
}

/// `Q(A, Aᶜ)/π(A)` for `A` the negative-magnetization states.
pub fn sign_bottleneck(p: &FiniteKernel) -> Result<f64> {
    let lp = p.log_stationary();
    let inside: Vec<bool> = p.labels().iter().map(|l| label_sign(l) == Some(Sign::Minus)).collect();
    if !inside.iter().any(|&b| b) {
        return Err(Error::param("kernel", "no negative-magnetization states"));
    }
    let mass = log_sum_exp((0..p.len()).filter(|&i| inside[i]).map(|i| lp[i]));
    let mut flow = Vec::new();
    for x in (0..p.len()).filter(|&i| inside[i]) {
        for &(y, v) in p.row(x) {
            if !inside[y] && v > 0.0 {
                flow.push(lp[x] + v.ln());
            }
        }
    }
    Ok((log_sum_exp(flow) - mass).exp())
}

fn slow_audits(m: &ModelSpec, chain: &FiniteKernel, c: &GapCell) -> Result<Vec<BoundRecord>> {
    let mut out = Vec::new();
    let h_a = sign_bottleneck(chain)?;
    let rel = |b: f64| 1e-9 * b.abs() + 1e-300;
    out.push(BoundRecord::upper("cheeger_sign_set", true, 2.0 * h_a, c.one_minus_lambda1, rel(2.0 * h_a)));
    if chain.len() <= MAX_EXACT_CONDUCTANCE {
        let h = conductance_exact(chain)?.h;
        out.push(BoundRecord::lower("cheeger_lower", true, h * h / 2.0, c.one_minus_lambda1, 1e-10));
        out.push(BoundRecord::upper("cheeger_upper", true, 2.0 * h, c.one_minus_lambda1, 1e-10));
    }
    if m.kind == ModelKind::Beg {
        // h(A) <= 2 π{S ∈ {0,1}} / (1 − π{S = 0})
        let lp = chain.log_stationary();
        let mags: Vec<i64> = chain
            .labels()
            .iter()
            .map(|l| match l {
                crate::kernel::StateLabel::Class(c) => c.signed_magnetization(),
                _ => i64::MAX,
            })
            .collect();
        let l01 = log_sum_exp((0..chain.len()).filter(|&i| mags[i] == 0 || mags[i] == 1).map(|i| lp[i]));
        let l0 = log_sum_exp((0..chain.len()).filter(|&i| mags[i] == 0).map(|i| lp[i]));
        let b = 2.0 * l01.exp() / -l0.exp_m1();
        out.push(BoundRecord::upper("sign_set_flow", true, b, h_a, rel(b)));
    }
    Ok(out)
}

/// Slow mixing of the naive Ising chain: exponential fits of the exact gap
/// for `β > 1`, polynomial fits otherwise, and Cheeger audits on the
/// negative-magnetization bottleneck.
pub fn verify_ising_slow(grid: &ScanGrid) -> Result<BoundReport> {
    check_model(grid, ModelKind::Ising, "verify ising-slow")?;
    slow_common(grid, "ising-slow")
}

/// Slow mixing of the naive BEG chain, with the rate-function barrier used
/// to flag cells deep in the two-phase region.
pub fn verify_beg_slow(grid: &ScanGrid) -> Result<BoundReport> {
    check_model(grid, ModelKind::Beg, "verify beg-slow")?;
    slow_common(grid, "beg-slow")
}

/// Cell, its audits and, for small BEG sizes, the containment check.
type SlowCell = (GapCell, Vec<BoundRecord>, Option<(bool, String)>);

fn slow_common(grid: &ScanGrid, name: &str) -> Result<BoundReport> {
    let groups = grid.groups(false)?;
    let mut rep = BoundReport::new(name);
    let flat: Vec<&ModelSpec> = groups.iter().flat_map(|g| g.cells.iter()).collect();
    let results: Vec<SlowCell> = flat
        .par_iter()
        .map(|m| {
            let chain = signed_lumped_chain(m, ChainKind::Naive)?;
            let c = cell_from(m, ChainKind::Naive, &chain)?;
            let audits = slow_audits(m, &chain, &c)?;
            let contain = if m.kind == ModelKind::Beg && m.n <= 6 {
                let full = full_chain(m, ChainKind::Naive)?;
                let ct = spectral_containment(&chain, &full)?;
                let msg = format!(
                    "N={}: lumped eigenvalues within {:.2e} of the full spectrum; gaps {:.6e} (lumped) vs {:.6e} (full)",
                    m.n, ct.max_distance, ct.gap_lumped, ct.gap_full
                );
                Some((ct.contained(1e-8, 1e-10), msg))
            } else {
                None
            };
            Ok((c, audits, contain))
        })
        .collect::<Result<_>>()?;
    let mut it = results.into_iter();
    let mut phase = Vec::new();
    for g in &groups {
        let mut cells = Vec::new();
        for m in &g.cells {
            let (c, audits, contain) = it.next().expect("one result per cell");
            for a in audits {
                rep.audit(&g.label, m.n, a);
            }
            if let Some((ok, msg)) = contain {
                rep.assert("lumped_containment", &g.label, ok, msg);
            }
            cells.push(c);
        }
        let m0 = &g.cells[0];
        let pts: Vec<_> = cells.iter().map(|c| (c.n, c.gap, c.resolved())).collect();
        let semilog = fit_cells("gap-naive", &g.label, Scale::SemiLog, &pts);
        let excluded = semilog.excluded;
        if excluded > 0 {
            rep.notes.push(format!("{}: {excluded} cell(s) below resolution, excluded from fits", g.label));
        }
        let flagged = match m0.kind {
            ModelKind::Ising => m0.beta > 1.0,
            _ => {
                let rm = rate_minima(m0.beta, m0.k)?;
                rep.notes.push(format!(
                    "{}: rate-function minimizer z* = {:.6}, barrier I(0) = {:.6}",
                    g.label, rm.z_star, rm.barrier
                ));
                let big = g.cells.last().expect("nonempty group");
                if let Ok(mode) = magnetization_mode(big) {
                    rep.notes.push(format!(
                        "{}: mode of |S|/N at N={} is {:.6} (|mode - z*| = {:.3e}, 2/N = {:.3e})",
                        g.label,
                        big.n,
                        mode,
                        (mode - rm.z_star).abs(),
                        2.0 / big.n as f64
                    ));
                }
                rm.barrier >= BARRIER_FLAG
            }
        };
        if m0.kind == ModelKind::Ising && m0.beta == 0.0 {
            let worst = cells
                .iter()
                .map(|c| (c.one_minus_lambda1 - 2.0 / c.n as f64).abs())
                .fold(0.0, f64::max);
            rep.assert(
                "hypercube_gap",
                &g.label,
                worst < 1e-12,
                format!("max |1 - lambda1 - 2/N| = {worst:.3e}; the walk is periodic so Gap = 0"),
            );
        }
        if flagged {
            match semilog.fit.filter(|f| f.points >= MIN_FIT_POINTS) {
                Some(f) => rep.assert(
                    "slow_slope",
                    &g.label,
                    f.slope_hi < SLOW_SLOPE,
                    format!(
                        "log Gap vs N slope {:.5} in [{:.5}, {:.5}], need upper edge < {SLOW_SLOPE}",
                        f.slope, f.slope_lo, f.slope_hi
                    ),
                ),
                None => rep.notes.push(format!("{}: too few resolved points for the slope check", g.label)),
            }
        }
        if let Some(f) = semilog.fit {
            phase.push((m0.beta, m0.k, f.slope));
        }
        rep.fits.push(semilog);
        rep.fits.push(fit_cells("gap-naive", &g.label, Scale::LogLog, &pts));
        rep.series.push(gap_series(&format!("gap_{}", slug(&g.label)), &cells, |c| c.gap));
        rep.cells.extend(cells);
    }
    if grid.model == ModelKind::Beg {
        for &(b, k, slope) in &phase {
            rep.series.push(Series {
                name: format!("phase_beta={b}"),
                x: "K".into(),
                y: "slope".into(),
                points: vec![(k, slope)],
            });
        }
        merge_series(&mut rep.series);
    }
    Ok(rep)
}

fn merge_series(series: &mut Vec<Series>) {
    let mut out: Vec<Series> = Vec::new();
    for s in series.drain(..) {
        match out.iter_mut().find(|o| o.name == s.name) {
            Some(o) => o.points.extend(s.points),
            None => out.push(s),
        }
    }
    *series = out;
}

/// Comparison of a lumped spectrum with the full-space one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Containment {
    /// Largest distance from a lumped eigenvalue to the full spectrum.
    pub max_distance: f64,
    pub gap_lumped: f64,
    pub gap_full: f64,
}

impl Containment {
    pub fn contained(&self, eig_tol: f64, gap_tol: f64) -> bool {
        self.max_distance <= eig_tol && self.gap_lumped >= self.gap_full - gap_tol
    }

    pub fn gaps_equal(&self, tol: f64) -> bool {
        (self.gap_lumped - self.gap_full).abs() <= tol
    }
}

pub fn spectral_containment(lumped: &FiniteKernel, full: &FiniteKernel) -> Result<Containment> {
    let sl = spectrum(lumped)?;
    let mut sf = spectrum(full)?.eigenvalues;
    sf.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    for &v in &sl.eigenvalues {
        let i = sf.partition_point(|&x| x < v);
        let mut d = f64::INFINITY;
        if i < sf.len() {
            d = d.min((sf[i] - v).abs());
        }
        if i > 0 {
            d = d.min((sf[i - 1] - v).abs());
        }
        worst = worst.max(d);
    }
    Ok(Containment {
        max_distance: worst,
        gap_lumped: gap_report(lumped)?.gap,
        gap_full: gap_report(full)?.gap,
    })
}

/// Partition of the warming-up space into `{-1, 0, 1}` and `{±i}`, `i ≥ 2`.
pub fn warmup_partition(n: usize) -> Result<Partition> {
    if n < 2 {
        return Err(Error::param("n", "the warming-up partition needs N >= 2"));
    }
    let ni = n as i64;
    Partition::new((-ni..=ni).map(|x| (x.unsigned_abs().max(1) - 1) as usize).collect())
}

/// The printed rates of the projected warming-up chain `M_H`, as
/// `(i, j, value)` with 1-based block indices.
pub fn warmup_printed_rates(n: usize, theta: f64, epsilon: f64) -> Vec<(usize, usize, f64)> {
    let w = (1.0 - epsilon) / 4.0;
    let mut out = Vec::new();
    out.push((1, 2, w / (1.0 + 1.0 / (2.0 * theta))));
    for i in 2..n {
        out.push((i, i + 1, w));
        out.push((i, i - 1, w / theta));
    }
    out.push((n, n - 1, w / theta));
    out
}

/// Fast mixing of the warming-up walk with reflections, slow mixing
/// without them.
pub fn verify_warmup(grid: &ScanGrid) -> Result<BoundReport> {
    check_model(grid, ModelKind::Warmup, "verify warmup")?;
    let groups = grid.groups(false)?;
    let mut rep = BoundReport::new("warmup");
    type CellOut = (GapCell, GapCell, Vec<BoundRecord>, f64);
    let flat: Vec<&ModelSpec> = groups.iter().flat_map(|g| g.cells.iter()).collect();
    let results: Vec<CellOut> = flat.par_iter().map(|m| warmup_cell(m)).collect::<Result<_>>()?;
    let mut it = results.into_iter();
    for g in &groups {
        let mut eps_cells = Vec::new();
        let mut naive_cells = Vec::new();
        let mut worst_rate: f64 = 0.0;
        for m in &g.cells {
            let (ce, cn, audits, dev) = it.next().expect("one result per cell");
            for a in audits {
                rep.audit(&g.label, m.n, a);
            }
            worst_rate = worst_rate.max(dev);
            eps_cells.push(ce);
            naive_cells.push(cn);
        }
        let printed_fail = rep
            .audits
            .iter()
            .filter(|a| a.group == g.label && a.record.name == "projection_lambda_min_printed")
            .filter(|a| a.record.holds == Some(false))
            .count();
        if printed_fail > 0 {
            rep.notes.push(format!(
                "{}: lambda_min(M_H) >= (1+epsilon)/2 fails at {printed_fail} cell(s); the Gershgorin bound epsilon holds",
                g.label
            ));
        }
        rep.assert(
            "projected_rates",
            &g.label,
            worst_rate <= 1e-12,
            format!("max deviation of M_H from the closed-form rates: {worst_rate:.3e}"),
        );
        let scaled: Vec<(usize, f64, bool)> = eps_cells
            .iter()
            .map(|c| (c.n, c.gap * (c.n as f64).powi(2), c.resolved()))
            .collect();
        let inf = scaled.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        rep.assert("scaled_gap_infimum", &g.label, inf > 0.0, format!("inf Gap N^2 = {inf:.6e}"));
        let n_max = scaled.iter().map(|p| p.0).max().unwrap_or(0);
        let last: Vec<_> = scaled.iter().copied().filter(|p| p.0 * 10 >= n_max).collect();
        let tail = fit_cells("gap-n2-last-decade", &g.label, Scale::LogLog, &last);
        match tail.fit {
            Some(f) => rep.assert(
                "scaled_gap_trend",
                &g.label,
                f.slope_lo >= -0.1,
                format!(
                    "log(Gap N^2) vs log N slope {:.5} in [{:.5}, {:.5}] over N >= {}, need lower edge >= -0.1",
                    f.slope,
                    f.slope_lo,
                    f.slope_hi,
                    n_max.div_ceil(10)
                ),
            ),
            None => rep.notes.push(format!("{}: too few points in the last decade", g.label)),
        }
        rep.fits.push(tail);
        let pts: Vec<_> = naive_cells.iter().map(|c| (c.n, c.gap, c.resolved())).collect();
        let semilog = fit_cells("gap-naive", &g.label, Scale::SemiLog, &pts);
        let theta = g.cells[0].theta;
        match semilog.fit.filter(|f| f.points >= MIN_FIT_POINTS) {
            Some(f) => rep.assert(
                "naive_slope",
                &g.label,
                f.slope_hi <= -theta.ln() + 0.1,
                format!(
                    "log Gap vs N slope {:.5} in [{:.5}, {:.5}], need upper edge <= {:.5}",
                    f.slope,
                    f.slope_lo,
                    f.slope_hi,
                    -theta.ln() + 0.1
                ),
            ),
            None => rep.notes.push(format!("{}: too few resolved naive gaps for the slope check", g.label)),
        }
        rep.fits.push(semilog);
        rep.fits.push(fit_cells("gap-small-world", &g.label, Scale::LogLog, &eps_cells.iter().map(|c| (c.n, c.gap, c.resolved())).collect::<Vec<_>>()));
        rep.series.push(gap_series(&format!("gap_small_world_{}", slug(&g.label)), &eps_cells, |c| c.gap));
        rep.series.push(gap_series(&format!("gap_naive_{}", slug(&g.label)), &naive_cells, |c| c.gap));
        rep.cells.extend(eps_cells);
        rep.cells.extend(naive_cells);
    }
    Ok(rep)
}

fn warmup_cell(m: &ModelSpec) -> Result<(GapCell, GapCell, Vec<BoundRecord>, f64)> {
    let me = full_chain(m, ChainKind::SmallWorld)?;
    let mn = full_chain(m, ChainKind::Naive)?;
    let ce = cell_from(m, ChainKind::SmallWorld, &me)?;
    let cn = cell_from(m, ChainKind::Naive, &mn)?;
    let (n, theta, eps) = (m.n, m.theta, m.epsilon);
    let mut audits = Vec::new();
    let parts = warmup_partition(n)?;
    let mh = lumped_projection(&me, &parts)?.without_mirror();
    let dev = warmup_printed_rates(n, theta, eps)
        .iter()
        .map(|&(i, j, v)| (mh.get(i - 1, j - 1) - v).abs())
        .fold(0.0, f64::max);
    for (b, block) in parts.members().iter().enumerate().skip(1) {
        let g = gap_report(&restriction(&me, block)?)?.gap;
        let want = 1.0 - (1.0 - 2.0 * eps).abs();
        let name = format!("restriction_gap_A{}", b + 1);
        audits.push(BoundRecord::lower(&name, true, want, g, 1e-12));
        audits.push(BoundRecord::upper(&name, true, want, g, 1e-12));
    }
    audits.push(BoundRecord::lower("decomposition", true, decomposition_bound(&me, &parts)?, ce.gap, 1e-12));
    let sh = spectrum(&mh)?;
    let mrate = ((1.0 - eps) / (4.0 * theta)).min((1.0 - eps) / (4.0 * (1.0 + 1.0 / (2.0 * theta))));
    let bd = BirthDeathChain::from_kernel(&mh)?;
    match bd_path_bound(&bd, mrate * (1.0 - 1e-12), 0.0, 3.0, n - 1) {
        Ok(b) => audits.push(BoundRecord::upper("path_bound_projection", true, b, sh.lambda1(), 1e-12)),
        Err(e) => {
            let mut r = BoundRecord::info("path_bound_projection", f64::NAN);
            r.name = format!("path_bound_projection (hypothesis: {e})");
            audits.push(r);
        }
    }
    // Gershgorin with up + down <= (1 − ε)/2 gives λ_min >= ε
    let d = 2.0 * (0..mh.len()).map(|i| 1.0 - mh.get(i, i)).fold(0.0, f64::max);
    audits.push(BoundRecord::lower("projection_lambda_min", true, 1.0 - d, sh.lambda_min(), 1e-12));
    audits.push(BoundRecord::lower("projection_lambda_min_eps", true, eps, sh.lambda_min(), 1e-12));
    // the closed form (1 + ε)/2 drops a factor 2 in D; recorded, not enforced
    audits.push(BoundRecord::lower("projection_lambda_min_printed", false, (1.0 + eps) / 2.0, sh.lambda_min(), 1e-12));
    // A = {-N, ..., -1}: Q(A, Aᶜ) <= π(0) and π(A) = (1 − π(0))/2
    let pi0 = (theta - 1.0) / (2.0 * theta.powi(n as i32 + 1) - theta - 1.0);
    let hb = 2.0 * pi0 / (1.0 - pi0);
    audits.push(BoundRecord::upper("naive_cheeger", true, 2.0 * hb, cn.one_minus_lambda1, 1e-9 * hb));
    Ok((ce, cn, audits, dev))
}

/// Polynomial lower bound for the equi-energy BEG chain on parameters whose
/// row profile is eventually unimodal.
pub fn verify_beg_fast(grid: &ScanGrid) -> Result<BoundReport> {
    check_model(grid, ModelKind::Beg, "verify beg-fast")?;
    let groups = grid.groups(true)?;
    let mut rep = BoundReport::new("beg-fast");
    let n_scan = grid.sizes().last().copied().unwrap_or(0).max(50);
    let mut kept = Vec::new();
    for g in &groups {
        let m0 = &g.cells[0];
        let sizes: Vec<usize> = (2..=n_scan).collect();
        let summary = scan_one(ModelKind::Beg, m0.beta, Some(m0.k), &sizes, &mut Vec::new());
        match summary.n0_unimodal {
            Some(n0) => {
                rep.notes.push(format!("{}: row profile unimodal for every N >= {n0} up to {n_scan}", g.label));
                kept.push(g.clone());
            }
            None => rep.notes.push(format!(
                "{}: skipped, row profile not unimodal at N = {n_scan}",
                g.label
            )),
        }
    }
    let flat: Vec<&ModelSpec> = kept.iter().flat_map(|g| g.cells.iter()).collect();
    let results: Vec<(GapCell, f64, BoundRecord, BoundRecord)> = flat
        .par_iter()
        .map(|m| {
            let chain = signed_lumped_chain(m, ChainKind::EquiEnergy)?;
            let mut c = cell_from(m, ChainKind::EquiEnergy, &chain)?;
            let gbar = gap_report(&beg_lumped(m)?)?.gap;
            let bound = gbar * m.p2 / 2.0 * ((1.0 - m.p1) / 2.0).min((1.0 - m.p1 - m.p2) / 2.0);
            c.bound = Some(bound);
            c.holds = Some(c.gap >= bound - 1e-12);
            let printed = BoundRecord::lower("projection_bound", true, bound, c.gap, 1e-12);
            let parts = unsigned_partition(&chain);
            let dec = BoundRecord::lower("decomposition_signed", true, decomposition_bound(&chain, &parts)?, c.gap, 1e-12);
            Ok((c, gbar, printed, dec))
        })
        .collect::<Result<_>>()?;
    let mut it = results.into_iter();
    for g in &kept {
        let mut cells = Vec::new();
        let mut constants = Vec::new();
        for m in &g.cells {
            let (c, gbar, a1, a2) = it.next().expect("one result per cell");
            rep.audit(&g.label, m.n, a1);
            rep.audit(&g.label, m.n, a2);
            let n6 = (m.n as f64).powi(6) / (m.p1 * m.p1);
            constants.push((m.n as f64, c.gap * n6));
            rep.series.push(Series {
                name: format!("gap_barP_{}", slug(&g.label)),
                x: "N".into(),
                y: "gap".into(),
                points: vec![(m.n as f64, gbar)],
            });
            cells.push(c);
        }
        let pts: Vec<_> = cells.iter().map(|c| (c.n, c.gap, c.resolved())).collect();
        let fit = fit_cells("gap-equi-energy", &g.label, Scale::LogLog, &pts);
        match fit.fit.filter(|f| f.points >= MIN_FIT_POINTS) {
            Some(f) => rep.assert(
                "poly_slope",
                &g.label,
                f.slope_lo >= -6.25,
                format!("log-log slope {:.4} in [{:.4}, {:.4}], need lower edge >= -6.25", f.slope, f.slope_lo, f.slope_hi),
            ),
            None => rep.notes.push(format!("{}: too few points for the slope check", g.label)),
        }
        let c_inf = constants.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        rep.notes.push(format!("{}: inf_N Gap N^6 / p1^2 = {c_inf:.6e}", g.label));
        rep.fits.push(fit);
        rep.series.push(Series {
            name: format!("constant_{}", slug(&g.label)),
            x: "N".into(),
            y: "gap*N^6/p1^2".into(),
            points: constants,
        });
        rep.series.push(gap_series(&format!("gap_{}", slug(&g.label)), &cells, |c| c.gap));
        rep.cells.extend(cells);
    }
    merge_series(&mut rep.series);
    Ok(rep)
}

/// Unimodality of one profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRecord {
    pub model: ModelKind,
    pub n: usize,
    pub beta: f64,
    pub k: Option<f64>,
    /// No strict local minimum between two strict local maxima.
    pub unimodal: bool,
    /// Non-increasing.
    pub monotone: bool,
    /// Abscissa of the largest value.
    pub peak: u32,
    /// `(abscissa, ln q)`.
    pub profile: Vec<(u32, f64)>,
}

/// Unimodality over `N` for one parameter pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnimodalSummary {
    pub beta: f64,
    pub k: Option<f64>,
    pub n0_unimodal: Option<usize>,
    pub n0_monotone: Option<usize>,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnimodalityReport {
    pub model: ModelKind,
    pub profiles: Vec<ProfileRecord>,
    pub summaries: Vec<UnimodalSummary>,
}

/// `(unimodal, monotone non-increasing)` of a log-profile; steps within
/// `PLATEAU_TOL` (relative) count as flat.
pub fn shape(log_q: &[f64]) -> (bool, bool) {
    let mut went_down = false;
    let mut unimodal = true;
    let mut monotone = true;
    for w in log_q.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= PLATEAU_TOL {
            continue;
        }
        if d > 0.0 {
            monotone = false;
            if went_down {
                unimodal = false;
            }
        } else {
            went_down = true;
        }
    }
    (unimodal, monotone)
}

fn profile_of(model: ModelKind, n: usize, beta: f64, k: Option<f64>) -> Vec<(u32, f64)> {
    match model {
        ModelKind::Beg => beg_row_profile(n, beta, k.unwrap_or(1.0))
            .into_iter()
            .enumerate()
            .map(|(r, v)| (r as u32, v))
            .collect(),
        _ => ising_level_profile(n, beta),
    }
}

fn scan_one(
    model: ModelKind,
    beta: f64,
    k: Option<f64>,
    sizes: &[usize],
    out: &mut Vec<ProfileRecord>,
) -> UnimodalSummary {
    let mut flags = Vec::new();
    for &n in sizes {
        let profile = profile_of(model, n, beta, k);
        let lq: Vec<f64> = profile.iter().map(|p| p.1).collect();
        let (unimodal, monotone) = shape(&lq);
        let peak = profile
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |p| p.0);
        flags.push((n, unimodal, monotone));
        out.push(ProfileRecord {
            model,
            n,
            beta,
            k,
            unimodal,
            monotone,
            peak,
            profile,
        });
    }
    let u: Vec<(usize, bool)> = flags.iter().map(|f| (f.0, f.1)).collect();
    let mo: Vec<(usize, bool)> = flags.iter().map(|f| (f.0, f.2)).collect();
    UnimodalSummary {
        beta,
        k,
        n0_unimodal: empirical_n0(&u),
        n0_monotone: empirical_n0(&mo),
        n_max: sizes.iter().copied().max().unwrap_or(0),
    }
}

/// Shapes of the Ising level weights `q_N` or the BEG row weights `q_[N]`
/// over the grid. Any `N ≥ 1` is scanned, odd values included.
pub fn unimodality_scan(grid: &ScanGrid) -> Result<UnimodalityReport> {
    if grid.model == ModelKind::Warmup {
        return Err(Error::WrongModel {
            op: "unimodality-scan",
            model: grid.model.name(),
        });
    }
    let sizes = grid.sizes();
    if sizes.is_empty() || sizes[0] == 0 {
        return Err(Error::param("n", "need a nonempty list of positive N"));
    }
    let ks: Vec<Option<f64>> = if grid.model == ModelKind::Beg {
        grid.k.iter().map(|&k| Some(k)).collect()
    } else {
        vec![None]
    };
    let mut profiles = Vec::new();
    let mut summaries = Vec::new();
    for &b in &grid.beta {
        if !(b >= 0.0) {
            return Err(Error::param("beta", format!("need beta >= 0, got {b}")));
        }
        for &k in &ks {
            summaries.push(scan_one(grid.model, b, k, &sizes, &mut profiles));
        }
    }
    Ok(UnimodalityReport {
        model: grid.model,
        profiles,
        summaries,
    })
}

fn log_mgf(beta: f64, t: f64) -> f64 {
    let a = t.abs();
    // ln(1 + e^{-β}(e^t + e^{-t})) − ln(1 + 2e^{-β})
    log_sum_exp([0.0, -beta + a, -beta - a]) - log_sum_exp([0.0, -beta + std::f64::consts::LN_2])
}

fn mgf_slope(beta: f64, t: f64) -> f64 {
    let e = (-beta).exp();
    let (p, m) = (t.exp(), (-t).exp());
    if t.abs() > 300.0 {
        return t.signum();
    }
    e * (p - m) / (1.0 + e * (p + m))
}

/// Legendre transform `J_β(z)` of the single-site log-moment generating
/// function, by bisection on the stationarity condition.
pub fn legendre_j(beta: f64, z: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::param("z", format!("need z in [-1, 1], got {z}")));
    }
    let e = (-beta).exp();
    if z.abs() == 1.0 {
        return Ok(-(e / (1.0 + 2.0 * e)).ln());
    }
    let target = z.abs();
    let mut hi = 1.0;
    let mut tries = 0;
    while mgf_slope(beta, hi) < target {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::NoConvergence {
                index: 0,
                iterations: tries,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mgf_slope(beta, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(t * target - log_mgf(beta, t))
}

/// Location and depth of the minima of `J_β(z) − βKz²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateMinima {
    /// Nonnegative minimizer; the minima are `±z_star`.
    pub z_star: f64,
    /// Minimum of `J_β(z) − βKz²`.
    pub g_min: f64,
    /// `Ĩ(0)`.
    pub barrier: f64,
}

const RATE_GRID: usize = 4000;

fn rate_g(beta: f64, k: f64, z: f64) -> Result<f64> {
    Ok(legendre_j(beta, z)? - beta * k * z * z)
}

pub fn rate_minima(beta: f64, k: f64) -> Result<RateMinima> {
    if !(beta >= 0.0 && k > 0.0) {
        return Err(Error::param("beta, K", "need beta >= 0 and K > 0"));
    }
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=RATE_GRID {
        let v = rate_g(beta, k, i as f64 / RATE_GRID as f64)?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let h = 1.0 / RATE_GRID as f64;
    let mut a = (best.0 as f64 - 1.0).max(0.0) * h;
    let mut b = ((best.0 + 1) as f64 * h).min(1.0);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        if b - a < 1e-13 {
            break;
        }
        let c = b - gr * (b - a);
        let d = a + gr * (b - a);
        if rate_g(beta, k, c)? < rate_g(beta, k, d)? {
            b = d;
        } else {
            a = c;
        }
    }
    let mut z = 0.5 * (a + b);
    let mut g = rate_g(beta, k, z)?;
    for edge in [0.0, 1.0] {
        let v = rate_g(beta, k, edge)?;
        if v <= g {
            z = edge;
            g = v;
        }
    }
    if z < 1e-6 {
        z = 0.0;
        g = 0.0;
    }
    Ok(RateMinima {
        z_star: z,
        g_min: g,
        barrier: -g,
    })
}

/// `Ĩ_{β,K}(z) = J_β(z) − βKz² − min_t{J_β(t) − βKt²}`.
pub fn rate_function(beta: f64, k: f64, z: f64) -> Result<f64> {
    let m = rate_minima(beta, k)?;
    Ok((rate_g(beta, k, z)? - m.g_min).max(0.0))
}

/// Nonnegative `|S|/N` maximizing the exact magnetization distribution.
pub fn magnetization_mode(m: &ModelSpec) -> Result<f64> {
    let t = class_table(m)?;
    let mut by_s: Vec<Vec<f64>> = vec![Vec::new(); m.n + 1];
    for e in &t.entries {
        let s = e.class.signed_magnetization();
        if s >= 0 {
            by_s[s as usize].push(e.log_class_weight);
        }
    }
    let best = by_s
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(s, v)| (s, log_sum_exp(v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |p| p.0);
    Ok(best as f64 / m.n as f64)
}
