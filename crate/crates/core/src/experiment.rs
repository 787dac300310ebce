//! Deterministic parameter sweeps and the dual-path oracle check.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::{
    jc_evolve_trace, photon_subtract_fock, second_moments, subtracted_tmsv, thermal_product, tmsv_fock,
    tmsv_truncation, FockTwoModeState,
};
use crate::gamma::{build_table, Cutoffs, GammaTable};
use crate::gaussian::{
    dissipate, make_thermal_tmsv, random_resource_with, to_standard_form, ResourceBounds, StandardForm,
};
use crate::nongaussian::{
    degauss_row, formal_subtract, gaussian_equivalent_cm, max_transfer, CutoffPolicy, SubtractionSpec,
};
use crate::svg;
use crate::transfer::{linspace, negativity, transfer_curve_with, AmplitudeMode, QubitXState, TransferCurve};

/// Environment variable holding the worker-thread count. Unset or `0` means
/// one worker per available core.
pub const WORKERS_ENV: &str = "CVTRANSFER_WORKERS";

/// Grid resolution used by [`max_transfer`] in sweeps.
pub const MAX_TRANSFER_RESOLUTION: usize = 400;

/// Configures the global worker pool from [`WORKERS_ENV`]. Later calls are
/// no-ops.
pub fn init_workers() -> Result<()> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parameter(format!("{WORKERS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NormalizationScan,
    Transfer,
    ThermalSurface,
    DissipationSurface,
    DegaussDiff,
    RandomMaxScan,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::NormalizationScan,
        ExperimentKind::Transfer,
        ExperimentKind::ThermalSurface,
        ExperimentKind::DissipationSurface,
        ExperimentKind::DegaussDiff,
        ExperimentKind::RandomMaxScan,
        ExperimentKind::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NormalizationScan => "normalization-scan",
            ExperimentKind::Transfer => "transfer",
            ExperimentKind::ThermalSurface => "thermal-surface",
            ExperimentKind::DissipationSurface => "dissipation-surface",
            ExperimentKind::DegaussDiff => "degauss-diff",
            ExperimentKind::RandomMaxScan => "random-max-scan",
            ExperimentKind::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown experiment kind {s:?}")))
    }
}

/// Uniform grid `lo..=hi` with `points` entries. A single point sits at `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points }
    }

    pub fn single(x: f64) -> Self {
        Self {
            lo: x,
            hi: x,
            points: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.points == 0 || self.hi < self.lo {
            return Err(Error::Parameter(format!("{what} grid {self} is empty or not finite")));
        }
        Ok(())
    }

    fn scalar(&self, what: &str) -> Result<f64> {
        if self.points != 1 {
            return Err(Error::Parameter(format!(
                "{what} takes a single value here, got grid {self}"
            )));
        }
        Ok(self.lo)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.points == 1 {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}:{}:{}", self.lo, self.hi, self.points)
        }
    }
}

/// Parses `x` or `lo:hi:points`.
impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("cannot parse grid {s:?}; expected x or lo:hi:points"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        match parts.as_slice() {
            [x] => Ok(Grid::single(x.parse().map_err(|_| bad())?)),
            [lo, hi, n] => Ok(Grid::new(
                lo.parse().map_err(|_| bad())?,
                hi.parse().map_err(|_| bad())?,
                n.parse().map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub zeta: Grid,
    pub tau: Grid,
    pub nbar: Grid,
    pub gamma_t: Grid,
    /// Bath occupation of the loss channel.
    pub big_n: f64,
    /// Photons subtracted per mode; the largest `s` for `random-max-scan`.
    pub s: usize,
    /// Beam-splitter subtraction when set, ideal subtraction otherwise.
    pub transmittivity: Option<f64>,
    /// Fixed source cutoffs; adaptive per resource when absent.
    pub cutoffs: Option<Cutoffs>,
    /// Discarded-weight target of adaptive cutoffs.
    pub tail: f64,
    pub samples: usize,
    pub seed: u64,
    pub amplitude: AmplitudeMode,
    /// Pass threshold of `oracle-check`.
    pub tolerance: f64,
    /// Output path prefix; `.csv` and `.svg` are appended.
    pub output: Option<PathBuf>,
    pub svg: bool,
}

impl ExperimentSpec {
    /// Defaults of each kind: `ζ = 0.86`, `N = 0.1`, τ on `[0, 2π]` with 200
    /// points, and for surfaces ζ on `[0, 2]` (80), n̄ on `[0, 3]` (60),
    /// Γt on `[0, 0.6]` (60).
    pub fn new(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let zeta = match kind {
            NormalizationScan | DegaussDiff => Grid::new(0.0, 2.0, 80),
            _ => Grid::single(0.86),
        };
        let nbar = match kind {
            ThermalSurface => Grid::new(0.0, 3.0, 60),
            _ => Grid::single(0.0),
        };
        let gamma_t = match kind {
            DissipationSurface => Grid::new(0.0, 0.6, 60),
            _ => Grid::single(0.0),
        };
        let s = match kind {
            DegaussDiff => 1,
            RandomMaxScan => 4,
            _ => 0,
        };
        Self {
            kind,
            zeta,
            tau: Grid::new(0.0, TAU, 200),
            nbar,
            gamma_t,
            big_n: 0.1,
            s,
            transmittivity: None,
            cutoffs: None,
            tail: 1e-10,
            samples: 22,
            seed: 7,
            amplitude: AmplitudeMode::Signed,
            tolerance: 1e-6,
            output: None,
            svg: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.zeta.validate("zeta")?;
        self.tau.validate("tau")?;
        self.nbar.validate("nbar")?;
        self.gamma_t.validate("gamma-t")?;
        if self.tau.lo < 0.0 {
            return Err(Error::Parameter("interaction times must be ≥ 0".into()));
        }
        if self.nbar.lo < 0.0 || self.gamma_t.lo < 0.0 || !(self.big_n >= 0.0) {
            return Err(Error::Parameter("occupations and dissipation times must be ≥ 0".into()));
        }
        if let Some(t) = self.transmittivity {
            SubtractionSpec::physical(self.s, t).validate()?;
        }
        if !(self.tail > 0.0 && self.tail < 1.0) {
            return Err(Error::Parameter(format!("tail {} outside (0, 1)", self.tail)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if self.kind == ExperimentKind::RandomMaxScan && self.samples == 0 {
            return Err(Error::Parameter("random scan needs at least one sample".into()));
        }
        Ok(())
    }

    /// Short digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..16])
    }

    fn policy(&self) -> CutoffPolicy {
        match self.cutoffs {
            Some(c) => CutoffPolicy::Fixed(c),
            None => CutoffPolicy::Adaptive { tail: self.tail },
        }
    }

    fn subtraction(&self) -> SubtractionSpec {
        match self.transmittivity {
            Some(t) => SubtractionSpec::physical(self.s, t),
            None => SubtractionSpec::formal(self.s),
        }
    }
}

/// Named numeric columns with an optional leading text column, plus
/// metadata written as `# key: value` lines above the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Option<(String, Vec<String>)>,
    pub metadata: BTreeMap<String, String>,
}

impl ResultTable {
    pub fn new(names: &[&str]) -> Self {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            columns: vec![Vec::new(); names.len()],
            labels: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_labels(label: &str, names: &[&str]) -> Self {
        let mut t = Self::new(names);
        t.labels = Some((label.to_string(), Vec::new()));
        t
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() || self.labels.is_some() {
            return Err(Error::Parameter(format!(
                "row of width {} does not fit table",
                row.len()
            )));
        }
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
        Ok(())
    }

    pub fn push_labeled_row(&mut self, label: &str, row: &[f64]) -> Result<()> {
        let Some((_, labels)) = self.labels.as_mut() else {
            return Err(Error::Parameter("table has no label column".into()));
        };
        if row.len() != self.names.len() {
            return Err(Error::Parameter(format!(
                "row of width {} does not fit table",
                row.len()
            )));
        }
        labels.push(label.to_string());
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_ref().map(|(_, l)| l.as_slice())
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        for (k, v) in &self.metadata {
            buf.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let mut header: Vec<&str> = Vec::new();
            if let Some((l, _)) = &self.labels {
                header.push(l);
            }
            header.extend(self.names.iter().map(String::as_str));
            w.write_record(&header)?;
            for i in 0..self.len() {
                let mut rec: Vec<String> = Vec::new();
                if let Some((_, l)) = &self.labels {
                    rec.push(l[i].clone());
                }
                rec.extend(self.columns.iter().map(|c| format!("{:?}", c[i])));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        String::from_utf8(buf).map_err(|e| Error::Parameter(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    /// Values of `value` arranged as `[outer][inner]` for a table whose rows
    /// run over `outer × inner` in row-major order.
    pub fn surface(&self, outer: &str, inner: &str, value: &str) -> Option<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let (o, i, v) = (self.column(outer)?, self.column(inner)?, self.column(value)?);
        let n_in = i.iter().skip(1).position(|x| *x == i[0]).map_or(i.len(), |p| p + 1);
        if n_in == 0 || v.len() % n_in != 0 {
            return None;
        }
        let outer_vals: Vec<f64> = o.iter().step_by(n_in).cloned().collect();
        let rows = v.chunks(n_in).map(<[f64]>::to_vec).collect();
        Some((outer_vals, i[..n_in].to_vec(), rows))
    }
}

/// Resource in standard form: squeezed thermal pair, then thermal loss.
fn resource(zeta: f64, nbar: f64, big_n: f64, gamma_t: f64) -> Result<StandardForm> {
    let sf = make_thermal_tmsv(zeta, nbar)?;
    if gamma_t == 0.0 {
        return Ok(sf);
    }
    let v = dissipate(&sf.to_covariance(), big_n, gamma_t)?;
    Ok(to_standard_form(&v)?.0)
}

fn resource_curve(spec: &ExperimentSpec, sf: &StandardForm, taus: &[f64]) -> Result<TransferCurve> {
    let sub = spec.subtraction();
    let source = build_table(sf, &spec.policy().source(sf, sub.s))?;
    let table = if sub.s == 0 { source } else { sub.apply(&source)? };
    transfer_curve_with(&table, taus, spec.amplitude, false)
}

/// Collects per-point rows in grid order up to the first failure. On failure
/// the completed prefix is returned with the error.
fn gather<T: Sync, R: Send>(points: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> (Vec<R>, Option<Error>) {
    let results: Vec<Result<R>> = points.par_iter().map(f).collect();
    let mut done = Vec::new();
    for r in results {
        match r {
            Ok(v) => done.push(v),
            Err(e) => return (done, Some(e)),
        }
    }
    (done, None)
}

/// Runs the experiment, writes `<output>.csv` (and `<output>.svg` when
/// requested) and returns the table. On a failing grid point the rows
/// finished so far are still written, marked `status: partial`.
pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let (mut table, err) = compute(spec)?;
    table.set_meta("kind", spec.kind.name());
    table.set_meta("spec_hash", spec.hash());
    table.set_meta("spec", serde_json::to_string(spec)?);
    table.set_meta("seed", spec.seed.to_string());
    table.set_meta("version", env!("CARGO_PKG_VERSION"));
    table.set_meta(
        "cutoffs",
        match spec.cutoffs {
            Some(c) => format!("n_c={} m_c={} k_c={}", c.n_c, c.m_c, c.k_c),
            None => format!("adaptive tail={:e}", spec.tail),
        },
    );
    table.set_meta("status", if err.is_some() { "partial" } else { "complete" });
    if let Some(prefix) = &spec.output {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        table.write_csv(&with_ext(prefix, "csv"))?;
        if spec.svg && err.is_none() {
            if let Some(doc) = render_svg(spec, &table) {
                std::fs::write(with_ext(prefix, "svg"), doc)?;
            }
        }
    }
    match err {
        Some(e) => Err(e),
        None => Ok(table),
    }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn compute(spec: &ExperimentSpec) -> Result<(ResultTable, Option<Error>)> {
    use ExperimentKind::*;
    let taus = spec.tau.values();
    Ok(match spec.kind {
        NormalizationScan => {
            let cut = spec.cutoffs.unwrap_or_default();
            let zetas = spec.zeta.values();
            let (rows, err) = gather(&zetas, |&z| {
                build_table(
                    &resource(
                        z,
                        spec.nbar.scalar("nbar")?,
                        spec.big_n,
                        spec.gamma_t.scalar("gamma-t")?,
                    )?,
                    &cut,
                )
                .map(|t| t.normalization())
                .map_err(|e| e.at(&format!("ζ = {z}")))
            });
            let mut t = ResultTable::new(&["zeta", "norm"]);
            for (z, n) in zetas.iter().zip(rows) {
                t.push_row(&[*z, n])?;
            }
            (t, err)
        }
        Transfer => {
            let sf = resource(
                spec.zeta.scalar("zeta")?,
                spec.nbar.scalar("nbar")?,
                spec.big_n,
                spec.gamma_t.scalar("gamma-t")?,
            )?;
            let curve = resource_curve(spec, &sf, &taus)?;
            let mut t = ResultTable::new(&["tau", "negativity"]);
            for (tau, n) in curve.tau_grid.iter().zip(&curve.negativity) {
                t.push_row(&[*tau, *n])?;
            }
            (t, None)
        }
        ThermalSurface | DissipationSurface => {
            let zeta = spec.zeta.scalar("zeta")?;
            let thermal = spec.kind == ThermalSurface;
            let (name, outer) = if thermal {
                ("nbar", spec.nbar.values())
            } else {
                ("gamma_t", spec.gamma_t.values())
            };
            let (rows, err) = gather(&outer, |&x| {
                let sf = if thermal {
                    resource(zeta, x, spec.big_n, spec.gamma_t.scalar("gamma-t")?)
                } else {
                    resource(zeta, spec.nbar.scalar("nbar")?, spec.big_n, x)
                };
                sf.and_then(|sf| resource_curve(spec, &sf, &taus))
                    .map_err(|e| e.at(&format!("{name} = {x}")))
            });
            let mut t = ResultTable::new(&[name, "tau", "negativity"]);
            for (x, curve) in outer.iter().zip(rows) {
                for (tau, n) in curve.tau_grid.iter().zip(&curve.negativity) {
                    t.push_row(&[*x, *tau, *n])?;
                }
            }
            (t, err)
        }
        DegaussDiff => {
            let zetas = spec.zeta.values();
            let (rows, err) = gather(&zetas, |&z| {
                degauss_row(z, &taus, spec.s, spec.policy(), spec.amplitude).map_err(|e| e.at(&format!("ζ = {z}")))
            });
            let mut t = ResultTable::new(&["zeta", "tau", "value"]);
            for (z, row) in zetas.iter().zip(rows) {
                for (tau, v) in taus.iter().zip(row) {
                    t.push_row(&[*z, *tau, v])?;
                }
            }
            t.set_meta("s", spec.s.to_string());
            (t, err)
        }
        RandomMaxScan => {
            let (t, err) = random_max_scan(spec)?;
            (t, err)
        }
        OracleCheck => {
            let report = oracle_check(spec.tolerance, spec.cutoffs, spec.tau.points);
            (report.to_table()?, None)
        }
    })
}

fn random_max_scan(spec: &ExperimentSpec) -> Result<(ResultTable, Option<Error>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bounds = ResourceBounds::default();
    let resources: Vec<StandardForm> = (0..spec.samples)
        .map(|_| {
            random_resource_with(&mut rng, &bounds)
                .and_then(|v| to_standard_form(&v))
                .map(|r| r.0)
        })
        .collect::<Result<_>>()?;
    let window = (spec.tau.lo, spec.tau.hi);
    let indexed: Vec<(usize, StandardForm)> = resources.into_iter().enumerate().collect();
    let (rows, err) = gather(&indexed, |(i, sf)| {
        let source = build_table(sf, &spec.policy().source(sf, spec.s))?;
        (0..=spec.s)
            .map(|s| {
                let table = if s == 0 {
                    source.clone()
                } else {
                    formal_subtract(&source, s)?
                };
                max_transfer(&table, window, MAX_TRANSFER_RESOLUTION)
            })
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| e.at(&format!("sample {i}")))
    });
    let mut t = ResultTable::new(&["sample", "s", "max_negativity"]);
    for (i, maxima) in rows.iter().enumerate() {
        for (s, m) in maxima.iter().enumerate() {
            t.push_row(&[i as f64, s as f64, *m])?;
        }
    }
    Ok((t, err))
}

/// `(sample, s, max at s − 1, max at s)` for each consecutive pair where the
/// maximum grows by more than `tol`.
pub fn monotonicity_exceptions(table: &ResultTable, tol: f64) -> Vec<(usize, usize, f64, f64)> {
    let (Some(sample), Some(s), Some(m)) = (
        table.column("sample"),
        table.column("s"),
        table.column("max_negativity"),
    ) else {
        return Vec::new();
    };
    (1..table.len())
        .filter(|&i| sample[i] == sample[i - 1] && m[i] > m[i - 1] + tol)
        .map(|i| (sample[i] as usize, s[i] as usize, m[i - 1], m[i]))
        .collect()
}

fn render_svg(spec: &ExperimentSpec, t: &ResultTable) -> Option<String> {
    use ExperimentKind::*;
    let title = format!("{} (ζ = {})", spec.kind, spec.zeta);
    match spec.kind {
        NormalizationScan => {
            let pts = t
                .column("zeta")?
                .iter()
                .cloned()
                .zip(t.column("norm")?.iter().cloned())
                .collect();
            Some(svg::line_plot(&[("norm".into(), pts)], &title, "ζ", "Σ γ"))
        }
        Transfer => {
            let pts = t
                .column("tau")?
                .iter()
                .cloned()
                .zip(t.column("negativity")?.iter().cloned())
                .collect();
            Some(svg::line_plot(&[("negativity".into(), pts)], &title, "τ", "negativity"))
        }
        ThermalSurface | DissipationSurface | DegaussDiff => {
            let (outer, value) = match spec.kind {
                ThermalSurface => ("nbar", "negativity"),
                DissipationSurface => ("gamma_t", "negativity"),
                _ => ("zeta", "value"),
            };
            let (ys, xs, grid) = t.surface(outer, "tau", value)?;
            let by_tau: Vec<Vec<f64>> = (0..xs.len()).map(|j| grid.iter().map(|row| row[j]).collect()).collect();
            Some(svg::heatmap(&xs, &ys, &by_tau, &title, "τ", outer))
        }
        RandomMaxScan => {
            let (samples, _, grid) = t.surface("sample", "s", "max_negativity")?;
            let series = samples
                .iter()
                .zip(grid)
                .map(|(i, row)| {
                    (
                        format!("#{i}"),
                        row.into_iter().enumerate().map(|(s, v)| (s as f64, v)).collect(),
                    )
                })
                .collect::<Vec<_>>();
            Some(svg::line_plot(&series, "random resources", "s", "max negativity"))
        }
        OracleCheck => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub entries: Vec<OracleEntry>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.deviation).fold(0.0, f64::max)
    }

    pub fn to_table(&self) -> Result<ResultTable> {
        let mut t = ResultTable::with_labels("check", &["deviation", "tolerance", "pass"]);
        for e in &self.entries {
            t.push_labeled_row(&e.name, &[e.deviation, e.tolerance, if e.passed { 1.0 } else { 0.0 }])?;
            if !e.note.is_empty() {
                t.set_meta(&format!("note {}", e.name), e.note.clone());
            }
        }
        t.set_meta("passed", self.passed().to_string());
        Ok(t)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            write!(
                f,
                "{} {:<40} deviation {:.3e} (tolerance {:.1e})",
                if e.passed { "PASS" } else { "FAIL" },
                e.name,
                e.deviation,
                e.tolerance
            )?;
            if !e.note.is_empty() {
                write!(f, " {}", e.note)?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "oracle check passed"
            } else {
                "oracle check FAILED"
            }
        )
    }
}

/// Largest entrywise or negativity difference between two qubit states.
pub fn xstate_distance(a: &QubitXState, b: &QubitXState) -> f64 {
    [
        a.a - b.a,
        a.b - b.b,
        a.c - b.c,
        a.e - b.e,
        a.g - b.g,
        a.d - b.d,
        negativity(a) - negativity(b),
    ]
    .iter()
    .fold(0.0, |m, x| m.max(x.abs()))
}

/// Sup-norm distance between a table-route transfer and the Fock route over
/// `taus`.
pub fn curve_vs_oracle(table: &GammaTable, state: &FockTwoModeState, taus: &[f64]) -> Result<f64> {
    let curve = transfer_curve_with(table, taus, AmplitudeMode::Signed, true)?;
    let states = curve.states.expect("states kept");
    let devs: Vec<f64> = taus
        .par_iter()
        .zip(&states)
        .map(|(&t, x)| jc_evolve_trace(state, t).map(|y| xstate_distance(x, &y)))
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Compares the covariance route against brute-force Fock states. With
/// `cutoffs` set every table uses them; otherwise cutoffs are adaptive with
/// a `1e−12` tail. Failures become report entries.
pub fn oracle_check(tolerance: f64, cutoffs: Option<Cutoffs>, tau_points: usize) -> OracleReport {
    let taus = linspace(0.0, TAU, tau_points.max(2));
    let policy = match cutoffs {
        Some(c) => CutoffPolicy::Fixed(c),
        None => CutoffPolicy::Adaptive { tail: 1e-12 },
    };
    let table_for = |sf: &StandardForm, s: usize| -> Result<GammaTable> {
        let src = build_table(sf, &policy.source(sf, s))?;
        formal_subtract(&src, s)
    };
    let mut entries = Vec::new();
    let mut push = |name: &str, r: Result<f64>| {
        let (deviation, note) = match r {
            Ok(d) => (d, String::new()),
            Err(e) => (f64::INFINITY, e.to_string()),
        };
        entries.push(OracleEntry {
            name: name.to_string(),
            deviation,
            tolerance,
            passed: deviation <= tolerance,
            note,
        });
    };

    let zeta = 0.86;
    let tmsv_state = || tmsv_fock(zeta, tmsv_truncation(zeta) + 10);
    push(
        "tmsv 0.86 populations",
        (|| {
            let table = table_for(&make_thermal_tmsv(zeta, 0.0)?, 0)?;
            let st = tmsv_state()?;
            let top = table.cutoffs.n_c.min(table.cutoffs.m_c).min(st.truncation);
            let mut worst: f64 = 0.0;
            for n in 0..=top {
                for m in 0..=top {
                    worst = worst.max((table.diag[(n, m)] - st.population(n, m)).abs());
                }
            }
            Ok(worst)
        })(),
    );
    push(
        "tmsv 0.86 transfer",
        (|| {
            let table = table_for(&make_thermal_tmsv(zeta, 0.0)?, 0)?;
            curve_vs_oracle(&table, &tmsv_state()?, &taus)
        })(),
    );
    for z in [0.3, 0.86] {
        push(
            &format!("subtracted s=1 {z} transfer"),
            (|| {
                let table = table_for(&make_thermal_tmsv(z, 0.0)?, 1)?;
                curve_vs_oracle(&table, &subtracted_tmsv(z, 1, 1e-14)?, &taus)
            })(),
        );
    }
    push(
        "subtracted s=2 0.5 populations",
        (|| {
            let table = table_for(&make_thermal_tmsv(0.5, 0.0)?, 2)?;
            let st = photon_subtract_fock(&tmsv_fock(0.5, 60)?, 2)?;
            let top = table.cutoffs.n_c.min(12);
            let mut worst: f64 = 0.0;
            for n in 0..=top {
                worst = worst.max((table.diag[(n, n)] - st.population(n, n)).abs());
            }
            Ok(worst)
        })(),
    );
    push(
        "thermal product transfer",
        (|| {
            let (n1, n2) = (0.3, 0.2);
            let sf = StandardForm::new(2.0 * n1 + 1.0, 2.0 * n2 + 1.0, 0.0, 0.0)?;
            let table = table_for(&sf, 0)?;
            let sparse: Vec<f64> = taus.iter().step_by(10).cloned().collect();
            curve_vs_oracle(&table, &thermal_product(n1, n2, 30)?, &sparse)
        })(),
    );
    push(
        "gaussian equivalent doubling",
        (|| {
            let sf = gaussian_equivalent_cm(0.5, 1)?;
            let st = subtracted_tmsv(0.5, 1, 1e-14)?;
            let big = photon_subtract_fock(&tmsv_fock(0.5, 2 * st.truncation + 1)?, 1)?;
            let (other, _) = to_standard_form(&second_moments(&big)?)?;
            Ok([
                sf.n1 - other.n1,
                sf.n2 - other.n2,
                sf.m_plus - other.m_plus,
                sf.m_minus - other.m_minus,
            ]
            .iter()
            .fold(0.0, |m: f64, x| m.max(x.abs())))
        })(),
    );
    OracleReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!("0.5".parse::<Grid>().unwrap(), Grid::single(0.5));
        assert_eq!("0:2:5".parse::<Grid>().unwrap().values(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!("a:b".parse::<Grid>().is_err());
        assert_eq!(Grid::new(0.0, 1.0, 3).to_string(), "0:1:3");
        assert!(Grid::new(1.0, 0.0, 3).validate("x").is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn table_csv() {
        let mut t = ResultTable::new(&["x", "y"]);
        t.push_row(&[1.0, 1e-9]).unwrap();
        t.push_row(&[2.0, 0.5]).unwrap();
        assert!(t.push_row(&[1.0]).is_err());
        t.set_meta("seed", "7");
        assert_eq!(t.to_csv_string().unwrap(), "# seed: 7\nx,y\n1.0,1e-9\n2.0,0.5\n");
        let mut l = ResultTable::with_labels("check", &["v"]);
        l.push_labeled_row("a b", &[0.0]).unwrap();
        assert_eq!(l.to_csv_string().unwrap(), "check,v\na b,0.0\n");
    }

    #[test]
    fn surface_reshape() {
        let mut t = ResultTable::new(&["z", "tau", "v"]);
        for z in [0.0, 1.0] {
            for tau in [0.0, 0.5, 1.0] {
                t.push_row(&[z, tau, z + tau]).unwrap();
            }
        }
        let (zs, taus, grid) = t.surface("z", "tau", "v").unwrap();
        assert_eq!(zs, vec![0.0, 1.0]);
        assert_eq!(taus, vec![0.0, 0.5, 1.0]);
        assert_eq!(grid[1], vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn small_runs_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ExperimentSpec::new(ExperimentKind::Transfer);
        spec.tau = Grid::new(0.0, TAU, 20);
        spec.output = Some(dir.path().join("out/transfer"));
        spec.svg = true;
        let a = run(&spec).unwrap();
        let first = std::fs::read(dir.path().join("out/transfer.csv")).unwrap();
        let b = run(&spec).unwrap();
        let second = std::fs::read(dir.path().join("out/transfer.csv")).unwrap();
        assert_eq!(a, b);
        assert_eq!(first, second);
        assert!(dir.path().join("out/transfer.svg").exists());
        assert_eq!(a.metadata["status"], "complete");
    }

    #[test]
    fn bad_specs() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Transfer);
        spec.zeta = Grid::new(0.0, 1.0, 3);
        assert!(matches!(run(&spec), Err(Error::Parameter(_))));
        let mut spec = ExperimentSpec::new(ExperimentKind::Transfer);
        spec.transmittivity = Some(1.5);
        spec.s = 1;
        assert!(matches!(run(&spec), Err(Error::Parameter(_))));
    }

    #[test]
    fn partial_output_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ExperimentSpec::new(ExperimentKind::DegaussDiff);
        spec.zeta = Grid::new(0.0, 1.0, 3);
        spec.tau = Grid::new(0.0, 3.0, 4);
        spec.s = 2;
        // The vacuum row needs no table; the next one cannot absorb the shift.
        spec.cutoffs = Some(Cutoffs::new(1, 1, 5));
        spec.output = Some(dir.path().join("t"));
        assert!(matches!(run(&spec), Err(Error::Cutoff(_))));
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert!(text.contains("# status: partial"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
    }
}
