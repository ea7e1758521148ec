//! Parameter sweeps, Mott-boundary bisection and timing benchmarks on top of
//! the Gutzwiller and BDMFT solvers, plus the CSV record format they emit.
//!
//! Sweeps run one chain per `(scheme, μ)` in parallel; inside a chain the
//! `J` values are visited in ascending order and each point is warm-started
//! from its predecessor unless `cold_start` is set. Every chain is
//! deterministic, so the output does not depend on the worker count.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::basis::{SchemeKind, TruncationScheme};
use crate::bdmft::{self, AlphaScheme, BdmftConfig, BdmftResult};
use crate::error::{invalid, Error, Result};
use crate::gutzwiller::{self, GutzwillerConfig};
use crate::Real;

/// `φ` above this counts as condensed.
pub const CONDENSATE_THRESHOLD: f64 = 1e-6;

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 17] = [
    "solver",
    "scheme_kind",
    "n_c",
    "alpha_opt",
    "mu_over_u",
    "j_over_u",
    "z",
    "l_bath",
    "phi",
    "n_mean",
    "e_tot",
    "e_paper",
    "g_c0",
    "e_kin_con",
    "iters",
    "time_ms",
    "converged",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Solver {
    Gutzwiller,
    Bdmft,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Gutzwiller => "gutzwiller",
            Solver::Bdmft => "bdmft",
        })
    }
}

impl FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gutzwiller" | "gw" => Ok(Solver::Gutzwiller),
            "bdmft" => Ok(Solver::Bdmft),
            other => invalid(format!("unknown solver `{other}`")),
        }
    }
}

/// Truncation scheme together with the rule that fixes its `α`.
///
/// For the Gutzwiller solver any scheme other than `FixedAlpha` means
/// "minimize the energy over `α`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec<T> {
    pub scheme: TruncationScheme<T>,
    pub alpha_scheme: AlphaScheme<T>,
}

impl<T: Real> SchemeSpec<T> {
    pub fn new(scheme: TruncationScheme<T>) -> Self {
        Self { scheme, alpha_scheme: AlphaScheme::MinimizeEAim }
    }

    pub fn with_alpha_scheme(self, alpha_scheme: AlphaScheme<T>) -> Self {
        Self { alpha_scheme, ..self }
    }
}

impl<T: Real> fmt::Display for SchemeSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scheme.is_cts() {
            write!(f, "{}[{}]", self.scheme, self.alpha_scheme)
        } else {
            write!(f, "{}", self.scheme)
        }
    }
}

/// Optional solver settings; `None` keeps the solver default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides<T> {
    pub mixing: Option<T>,
    pub tol_phi: Option<T>,
    pub tol_delta: Option<T>,
    pub max_iter: Option<usize>,
    pub beta_fict: Option<T>,
    pub n_omega: Option<usize>,
    pub alpha_max: Option<T>,
}

impl<T: Real> Overrides<T> {
    fn gutzwiller(&self, cfg: &mut GutzwillerConfig<T>) {
        if let Some(m) = self.mixing {
            cfg.mixing = m;
        }
        if let Some(t) = self.tol_phi {
            cfg.tol_phi = t;
        }
        if let Some(n) = self.max_iter {
            cfg.max_iter = n;
        }
        if let Some(a) = self.alpha_max {
            cfg.alpha_max = a;
        }
    }

    fn bdmft(&self, cfg: &mut BdmftConfig<T>) {
        if let Some(m) = self.mixing {
            cfg.mixing_delta = m;
            cfg.mixing_phi = m;
        }
        if let Some(t) = self.tol_phi {
            cfg.tol_phi = t;
        }
        if let Some(t) = self.tol_delta {
            cfg.tol_delta = t;
        }
        if let Some(n) = self.max_iter {
            cfg.max_sc_iter = n;
        }
        if let Some(b) = self.beta_fict {
            cfg.beta_fict = b;
        }
        if let Some(n) = self.n_omega {
            cfg.n_omega = n;
        }
        if let Some(a) = self.alpha_max {
            cfg.alpha_max = a;
        }
    }
}

/// One solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSpec<T> {
    pub solver: Solver,
    pub scheme: SchemeSpec<T>,
    pub mu_over_u: T,
    pub j_over_u: T,
    pub z: usize,
    /// Bath orbitals; ignored by the Gutzwiller solver.
    pub l_b: usize,
    pub overrides: Overrides<T>,
}

impl<T: Real> PointSpec<T> {
    pub fn gutzwiller_config(&self) -> GutzwillerConfig<T> {
        let mut scheme = self.scheme.scheme;
        if let AlphaScheme::FixedAlpha(a) = self.scheme.alpha_scheme {
            scheme = scheme.with_alpha(a);
        }
        let mut cfg = GutzwillerConfig::new(self.j_over_u, self.mu_over_u, self.z, scheme);
        self.overrides.gutzwiller(&mut cfg);
        cfg
    }

    pub fn bdmft_config(&self) -> BdmftConfig<T> {
        let mut cfg = BdmftConfig::new(self.j_over_u, self.mu_over_u, self.z, self.scheme.scheme)
            .with_alpha_scheme(self.scheme.alpha_scheme);
        cfg.l_b = self.l_b;
        self.overrides.bdmft(&mut cfg);
        cfg
    }
}

/// State carried from one `J` point to the next along a chain.
#[derive(Debug, Clone)]
pub enum WarmState<T> {
    Gutzwiller(T),
    Bdmft(Box<BdmftResult<T>>),
}

/// One row of the results CSV. Floating fields are stored as `f64`
/// whatever scalar type the solver ran in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub solver: Solver,
    pub scheme_kind: SchemeKind,
    pub n_c: usize,
    pub alpha_opt: f64,
    pub mu_over_u: f64,
    pub j_over_u: f64,
    pub z: usize,
    /// Empty for the Gutzwiller solver.
    pub l_bath: Option<usize>,
    pub phi: f64,
    pub n_mean: f64,
    pub e_tot: f64,
    /// `⟨H(φ)⟩` of the Gutzwiller single-site problem; empty for BDMFT.
    pub e_paper: Option<f64>,
    pub g_c0: f64,
    pub e_kin_con: f64,
    pub iters: usize,
    pub time_ms: f64,
    pub converged: bool,
}

impl ResultRecord {
    /// Row for a run that returned an error: all observables are NaN.
    fn failed<T: Real>(p: &PointSpec<T>) -> Self {
        Self {
            solver: p.solver,
            scheme_kind: p.scheme.scheme.kind,
            n_c: p.scheme.scheme.n_c,
            alpha_opt: f64::NAN,
            mu_over_u: p.mu_over_u.to_f64_lossy(),
            j_over_u: p.j_over_u.to_f64_lossy(),
            z: p.z,
            l_bath: (p.solver == Solver::Bdmft).then_some(p.l_b),
            phi: f64::NAN,
            n_mean: f64::NAN,
            e_tot: f64::NAN,
            e_paper: (p.solver == Solver::Gutzwiller).then_some(f64::NAN),
            g_c0: f64::NAN,
            e_kin_con: f64::NAN,
            iters: 0,
            time_ms: 0.0,
            converged: false,
        }
    }

    pub fn is_condensed(&self) -> bool {
        self.phi > CONDENSATE_THRESHOLD
    }

    fn fields(&self) -> Vec<String> {
        let opt_usize = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let opt_f = |x: Option<f64>| x.map(format_g12).unwrap_or_default();
        vec![
            self.solver.to_string(),
            self.scheme_kind.to_string(),
            self.n_c.to_string(),
            format_g12(self.alpha_opt),
            format_g12(self.mu_over_u),
            format_g12(self.j_over_u),
            self.z.to_string(),
            opt_usize(self.l_bath),
            format_g12(self.phi),
            format_g12(self.n_mean),
            format_g12(self.e_tot),
            opt_f(self.e_paper),
            format_g12(self.g_c0),
            format_g12(self.e_kin_con),
            self.iters.to_string(),
            format_g12(self.time_ms),
            self.converged.to_string(),
        ]
    }

    fn from_fields(row: &csv::StringRecord, line: usize) -> Result<Self> {
        if row.len() != CSV_HEADER.len() {
            return invalid(format!("line {line}: expected {} fields, got {}", CSV_HEADER.len(), row.len()));
        }
        let bad = |col: usize| Error::InvalidInput(format!("line {line}: bad `{}` value `{}`", CSV_HEADER[col], &row[col]));
        let f = |col: usize| row[col].trim().parse::<f64>().map_err(|_| bad(col));
        let u = |col: usize| row[col].trim().parse::<usize>().map_err(|_| bad(col));
        let opt = |s: &str| !s.trim().is_empty();
        Ok(Self {
            solver: row[0].parse()?,
            scheme_kind: row[1].parse()?,
            n_c: u(2)?,
            alpha_opt: f(3)?,
            mu_over_u: f(4)?,
            j_over_u: f(5)?,
            z: u(6)?,
            l_bath: if opt(&row[7]) { Some(u(7)?) } else { None },
            phi: f(8)?,
            n_mean: f(9)?,
            e_tot: f(10)?,
            e_paper: if opt(&row[11]) { Some(f(11)?) } else { None },
            g_c0: f(12)?,
            e_kin_con: f(13)?,
            iters: u(14)?,
            time_ms: f(15)?,
            converged: row[16].trim().parse().map_err(|_| bad(16))?,
        })
    }
}

/// Formats with 12 significant digits, `%.12g` style: fixed notation for
/// decimal exponents in `[-5, 12)`, scientific otherwise, trailing zeros
/// dropped.
pub fn format_g12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(&format!("{}.{}", &digits[..1], &digits[1..]));
        return format!("{sign}{m}e{exp}");
    }
    let body = if exp >= 0 {
        let point = exp as usize + 1;
        format!("{}.{}", &digits[..point], &digits[point..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    format!("{sign}{}", trim_zeros(&body))
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn write_records<W: Write>(out: W, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return invalid(format!("unexpected CSV header `{}`", header.iter().collect::<Vec<_>>().join(",")));
    }
    r.records()
        .enumerate()
        .map(|(i, row)| ResultRecord::from_fields(&row?, i + 2))
        .collect()
}

/// Runs a single point, optionally warm-started.
pub fn run_point<T: Real>(p: &PointSpec<T>, warm: Option<&WarmState<T>>) -> Result<(ResultRecord, WarmState<T>)> {
    let started = Instant::now();
    match p.solver {
        Solver::Gutzwiller => {
            let mut cfg = p.gutzwiller_config();
            if let Some(WarmState::Gutzwiller(phi)) = warm {
                cfg.warm_phi = Some(*phi);
            }
            let r = match p.scheme.alpha_scheme {
                AlphaScheme::FixedAlpha(_) => gutzwiller::solve_fixed_alpha(&cfg)?,
                _ => gutzwiller::solve(&cfg)?,
            };
            let rec = ResultRecord {
                solver: p.solver,
                scheme_kind: cfg.scheme.kind,
                n_c: cfg.scheme.n_c,
                alpha_opt: r.alpha_opt.to_f64_lossy(),
                mu_over_u: p.mu_over_u.to_f64_lossy(),
                j_over_u: p.j_over_u.to_f64_lossy(),
                z: p.z,
                l_bath: None,
                phi: r.phi.to_f64_lossy(),
                n_mean: r.n_mean.to_f64_lossy(),
                e_tot: r.e_site.to_f64_lossy(),
                e_paper: Some(r.e_paper.to_f64_lossy()),
                g_c0: 0.0,
                e_kin_con: 0.0,
                iters: r.iters,
                time_ms: started.elapsed().as_secs_f64() * 1e3,
                converged: r.converged,
            };
            Ok((rec, WarmState::Gutzwiller(r.phi)))
        }
        Solver::Bdmft => {
            let cfg = p.bdmft_config();
            let r = match warm {
                Some(WarmState::Bdmft(prev)) => bdmft::self_consistency_loop_warm(&cfg, prev)?,
                _ => bdmft::solve(&cfg)?,
            };
            let rec = ResultRecord {
                solver: p.solver,
                scheme_kind: cfg.scheme.kind,
                n_c: cfg.scheme.n_c,
                alpha_opt: if cfg.scheme.is_cts() { r.alpha_opt.to_f64_lossy() } else { 0.0 },
                mu_over_u: p.mu_over_u.to_f64_lossy(),
                j_over_u: p.j_over_u.to_f64_lossy(),
                z: p.z,
                l_bath: Some(cfg.l_b),
                phi: r.phi.to_f64_lossy(),
                n_mean: r.n_mean.to_f64_lossy(),
                e_tot: r.e_tot_site.to_f64_lossy(),
                e_paper: None,
                g_c0: r.g_c0.to_f64_lossy(),
                e_kin_con: r.e_kin_con.to_f64_lossy(),
                iters: r.iters,
                time_ms: started.elapsed().as_secs_f64() * 1e3,
                converged: r.converged,
            };
            Ok((rec, WarmState::Bdmft(Box::new(r))))
        }
    }
}

/// Inclusive grid `min, min+step, …, max`; the last point is snapped to
/// `max` when it lands within a small fraction of a step.
pub fn j_grid<T: Real>(min: T, max: T, step: T) -> Result<Vec<T>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || min < T::zero() || max < min {
        return invalid("J grid needs finite 0 <= min <= max");
    }
    if max == min {
        return Ok(vec![min]);
    }
    if !(step > T::zero()) {
        return invalid("J step must be positive");
    }
    let span = (max - min) / step;
    let n = (span + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    if n > 1_000_000 {
        return invalid("J grid has too many points");
    }
    Ok((0..=n).map(|k| min + step * T::from_count(k)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<T> {
    pub solver: Solver,
    pub schemes: Vec<SchemeSpec<T>>,
    pub mu_values: Vec<T>,
    pub j_values: Vec<T>,
    pub z: usize,
    pub l_b: usize,
    pub overrides: Overrides<T>,
    /// Solve every point from scratch instead of warm-starting along `J`.
    pub cold_start: bool,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl<T: Real> SweepSpec<T> {
    pub fn new(solver: Solver, schemes: Vec<SchemeSpec<T>>, mu_values: Vec<T>, j_values: Vec<T>) -> Self {
        Self {
            solver,
            schemes,
            mu_values,
            j_values,
            z: 6,
            l_b: 2,
            overrides: Overrides::default(),
            cold_start: false,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() || self.mu_values.is_empty() || self.j_values.is_empty() {
            return invalid("sweep needs at least one scheme, one μ and one J");
        }
        for s in &self.schemes {
            s.scheme.validate()?;
        }
        if self.mu_values.iter().any(|m| !m.is_finite()) {
            return invalid("μ values must be finite");
        }
        if self.j_values.iter().any(|j| !j.is_finite() || *j < T::zero()) {
            return invalid("J values must be finite and >= 0");
        }
        if self.z == 0 {
            return invalid("coordination number must be positive");
        }
        if self.workers == Some(0) {
            return invalid("worker count must be positive");
        }
        Ok(())
    }

    fn point(&self, scheme: SchemeSpec<T>, mu: T, j: T) -> PointSpec<T> {
        PointSpec {
            solver: self.solver,
            scheme,
            mu_over_u: mu,
            j_over_u: j,
            z: self.z,
            l_b: self.l_b,
            overrides: self.overrides,
        }
    }

    fn chain(&self, scheme: SchemeSpec<T>, mu: T, js: &[T]) -> Vec<ResultRecord> {
        let mut warm: Option<WarmState<T>> = None;
        js.iter()
            .map(|&j| {
                let p = self.point(scheme, mu, j);
                let prior = if self.cold_start { None } else { warm.as_ref() };
                match run_point(&p, prior) {
                    Ok((rec, state)) => {
                        warm = rec.converged.then_some(state);
                        rec
                    }
                    Err(_) => {
                        warm = None;
                        ResultRecord::failed(&p)
                    }
                }
            })
            .collect()
    }
}

/// Runs the sweep. Rows come out ordered by scheme (in the order given),
/// then `μ` and `J` ascending. Point failures become `converged = false`
/// rows; only invalid specifications are errors.
pub fn run_sweep<T: Real>(spec: &SweepSpec<T>) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let mut mus = spec.mu_values.clone();
    mus.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    mus.dedup();
    let mut js = spec.j_values.clone();
    js.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    js.dedup();
    let chains: Vec<(SchemeSpec<T>, T)> =
        spec.schemes.iter().flat_map(|&s| mus.iter().map(move |&m| (s, m))).collect();
    let work = || -> Vec<ResultRecord> {
        chains.par_iter().flat_map_iter(|&(s, m)| spec.chain(s, m, &js)).collect()
    };
    match spec.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

/// Bisects a sign change of `condensed(J)` on `[lo, hi]` down to width
/// `tol`. The lower end must be uncondensed and the upper end condensed.
/// Returns the final bracket and the number of indicator calls.
pub fn bisect_transition<T, F>(mut condensed: F, lo: T, hi: T, tol: T) -> Result<(T, T, usize)>
where
    T: Real,
    F: FnMut(T) -> Result<bool>,
{
    if !(lo.is_finite() && hi.is_finite()) || !(lo < hi) {
        return Err(Error::Bracket(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > T::zero()) {
        return invalid("bisection tolerance must be positive");
    }
    if condensed(lo)? {
        return Err(Error::Bracket(format!("lower end J = {lo} is already condensed")));
    }
    if !condensed(hi)? {
        return Err(Error::Bracket(format!("upper end J = {hi} is not condensed")));
    }
    let (mut a, mut b, mut calls) = (lo, hi, 2);
    while b - a > tol {
        let mid = T::lit(0.5) * (a + b);
        calls += 1;
        if condensed(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok((a, b, calls))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec<T> {
    pub solver: Solver,
    pub scheme: SchemeSpec<T>,
    pub mu_over_u: T,
    pub z: usize,
    pub l_b: usize,
    pub overrides: Overrides<T>,
    pub j_lo: T,
    pub j_hi: T,
    pub tol_j: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryResult {
    /// Midpoint of the final bracket.
    pub j_c: f64,
    pub j_lo: f64,
    pub j_hi: f64,
    /// Every solver run made, in evaluation order.
    pub records: Vec<ResultRecord>,
}

/// Locates the Mott/superfluid transition `J_c(μ)` by bisection on the
/// condensate indicator `φ > 1e-6`. Each evaluation is a cold solve.
pub fn detect_mott_boundary<T: Real>(spec: &BoundarySpec<T>) -> Result<BoundaryResult> {
    let mut records = Vec::new();
    let indicator = |j: T| -> Result<bool> {
        let p = PointSpec {
            solver: spec.solver,
            scheme: spec.scheme,
            mu_over_u: spec.mu_over_u,
            j_over_u: j,
            z: spec.z,
            l_b: spec.l_b,
            overrides: spec.overrides,
        };
        let (rec, _) = run_point(&p, None)?;
        let condensed = rec.is_condensed();
        records.push(rec);
        Ok(condensed)
    };
    let (a, b, _) = bisect_transition(indicator, spec.j_lo, spec.j_hi, spec.tol_j)?;
    let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
    Ok(BoundaryResult { j_c: 0.5 * (a + b), j_lo: a, j_hi: b, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec<T> {
    pub solver: Solver,
    pub schemes: Vec<SchemeSpec<T>>,
    /// Index into `schemes` of the scheme speedups are measured against.
    pub reference: usize,
    pub mu_over_u: T,
    pub j_values: Vec<T>,
    pub z: usize,
    pub l_b: usize,
    pub overrides: Overrides<T>,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scheme: String,
    pub j_over_u: f64,
    /// Median wall-clock time over the repeats.
    pub time_ms: f64,
    /// Reference time divided by this time at the same `J`.
    pub speedup: f64,
    pub converged: bool,
    pub phi: f64,
    pub e_tot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Per scheme: label, summed median time and summed-reference speedup.
    pub totals: Vec<(String, f64, f64)>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scheme", "j_over_u", "time_ms", "speedup", "converged", "phi", "e_tot"])?;
        for r in &self.rows {
            w.write_record([
                r.scheme.clone(),
                format_g12(r.j_over_u),
                format_g12(r.time_ms),
                format_g12(r.speedup),
                r.converged.to_string(),
                format_g12(r.phi),
                format_g12(r.e_tot),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Median of the per-`J` speedups of `scheme`.
    pub fn median_speedup(&self, scheme: &str) -> Option<f64> {
        let mut xs: Vec<f64> = self.rows.iter().filter(|r| r.scheme == scheme).map(|r| r.speedup).collect();
        (!xs.is_empty()).then(|| median(&mut xs))
    }

    /// Speedup of `scheme` over the whole sweep.
    pub fn total_speedup(&self, scheme: &str) -> Option<f64> {
        self.totals.iter().find(|t| t.0 == scheme).map(|t| t.2)
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times identical cold solves, serially, `repeats` times each and reports
/// the median per `(scheme, J)`.
pub fn run_bench<T: Real>(spec: &BenchSpec<T>) -> Result<BenchReport> {
    if spec.repeats < 3 {
        return invalid("bench needs at least 3 repeats");
    }
    if spec.reference >= spec.schemes.len() {
        return invalid("bench reference index out of range");
    }
    if spec.j_values.is_empty() {
        return invalid("bench needs at least one J");
    }
    let labels: Vec<String> = spec.schemes.iter().map(|s| s.to_string()).collect();
    let mut times = vec![vec![0.0; spec.j_values.len()]; spec.schemes.len()];
    let mut rows = Vec::new();
    for (si, &scheme) in spec.schemes.iter().enumerate() {
        for (ji, &j) in spec.j_values.iter().enumerate() {
            let p = PointSpec {
                solver: spec.solver,
                scheme,
                mu_over_u: spec.mu_over_u,
                j_over_u: j,
                z: spec.z,
                l_b: spec.l_b,
                overrides: spec.overrides,
            };
            let mut samples = Vec::with_capacity(spec.repeats);
            let mut last = None;
            for _ in 0..spec.repeats {
                let clock = Instant::now();
                let out = run_point(&p, None);
                samples.push(clock.elapsed().as_secs_f64() * 1e3);
                last = Some(out);
            }
            let rec = match last.expect("repeats > 0") {
                Ok((rec, _)) => rec,
                Err(_) => ResultRecord::failed(&p),
            };
            let t = median(&mut samples);
            times[si][ji] = t;
            rows.push(BenchRow {
                scheme: labels[si].clone(),
                j_over_u: j.to_f64_lossy(),
                time_ms: t,
                speedup: f64::NAN,
                converged: rec.converged,
                phi: rec.phi,
                e_tot: rec.e_tot,
            });
        }
    }
    let nj = spec.j_values.len();
    for (k, row) in rows.iter_mut().enumerate() {
        row.speedup = times[spec.reference][k % nj] / row.time_ms;
    }
    let ref_total: f64 = times[spec.reference].iter().sum();
    let totals = labels
        .iter()
        .zip(&times)
        .map(|(l, t)| {
            let total: f64 = t.iter().sum();
            (l.clone(), total, ref_total / total)
        })
        .collect();
    Ok(BenchReport { rows, totals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_format_cases() {
        assert_eq!(format_g12(0.0), "0");
        assert_eq!(format_g12(1.0), "1");
        assert_eq!(format_g12(-4.372371234567891), "-4.37237123457");
        assert_eq!(format_g12(0.4), "0.4");
        assert_eq!(format_g12(1e-7), "1e-7");
        assert_eq!(format_g12(1.5e-5), "0.000015");
        assert_eq!(format_g12(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_g12(9.9999999999999), "10");
        assert_eq!(format_g12(f64::NAN), "NaN");
    }

    #[test]
    fn g12_keeps_twelve_digits() {
        for &x in &[std::f64::consts::PI, -2.0f64.sqrt() * 1e-3, 6.02214076e23, 1.0 / 3.0] {
            let y: f64 = format_g12(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 5e-12, "{x} -> {y}");
        }
    }

    #[test]
    fn grid_inclusive() {
        let g = j_grid(0.0f64, 0.1, 0.02).unwrap();
        assert_eq!(g.len(), 6);
        assert!((g[5] - 0.1).abs() < 1e-15);
        assert_eq!(j_grid(0.3f64, 0.3, 0.0).unwrap(), vec![0.3]);
        assert!(j_grid(0.2f64, 0.1, 0.01).is_err());
        assert!(j_grid(0.0f64, 0.1, 0.0).is_err());
    }

    #[test]
    fn bisection_finds_step() {
        let (a, b, calls) = bisect_transition(|j: f64| Ok(j > 0.0123), 0.0, 0.1, 1e-4).unwrap();
        assert!(a <= 0.0123 && 0.0123 < b && b - a <= 1e-4);
        assert!(calls < 20);
    }

    #[test]
    fn bisection_reports_bad_end() {
        let e = bisect_transition(|j: f64| Ok(j > 0.05), 0.06, 0.1, 1e-4).unwrap_err();
        assert!(matches!(&e, Error::Bracket(m) if m.contains("lower")));
        let e = bisect_transition(|j: f64| Ok(j > 0.5), 0.0, 0.1, 1e-4).unwrap_err();
        assert!(matches!(&e, Error::Bracket(m) if m.contains("upper")));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
