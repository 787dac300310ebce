//! Fock-basis coefficients `γ^{pq}_{nm} = ⟨n, m|ρ|p, q⟩` of a two-mode
//! resource given in standard form.
//!
//! Five families are needed for the qubit state:
//!
//! | family | entry        |
//! |--------|--------------|
//! | `diag` | `γ^{n,m}_{n,m}` |
//! | `ge`   | `γ^{n,m+1}_{n,m+1}` |
//! | `eg`   | `γ^{n+1,m}_{n+1,m}` |
//! | `ggee` | `γ^{n+1,m+1}_{n,m}` |
//! | `geeg` | `γ^{n+1,m}_{n,m+1}` |
//!
//! Two independent routes are provided. The series route sums, over the
//! angular order `k`, Bessel-product coefficients times terminating
//! hypergeometric factors in `n` and `m`. The quadrature route integrates the
//! characteristic function against displacement matrix elements in polar
//! coordinates.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaussian::StandardForm;
use crate::quadrature::PanelRule;
use crate::special::{binomial_mixture, double_factorial, factorial_ratio_sqrt, laguerre, meixner_column};

/// Default tolerated normalization deficit of a table.
pub const DEFAULT_EPS_TRUNC: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cutoffs {
    pub n_c: usize,
    pub m_c: usize,
    pub k_c: usize,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Self {
            n_c: 25,
            m_c: 25,
            k_c: 100,
        }
    }
}

impl Cutoffs {
    pub fn new(n_c: usize, m_c: usize, k_c: usize) -> Self {
        Self { n_c, m_c, k_c }
    }

    /// Cutoffs large enough that the discarded photon-number tail of each
    /// mode and of the angular series are both below `tail`.
    ///
    /// Each reduced mode of a standard-form state is thermal with ratio
    /// `(n_j − 1)/(n_j + 1)`; the angular series decays like
    /// `(m₊² / ((n1 + 1)(n2 + 1)))ᵏ` once `k` exceeds the photon cutoff.
    pub fn adaptive(sf: &StandardForm, tail: f64) -> Self {
        let tail = tail.clamp(1e-300, 0.5);
        let mode_cut = |n: f64| {
            let rho = (n - 1.0) / (n + 1.0);
            if rho <= 0.0 {
                0
            } else {
                (tail.ln() / rho.ln()).ceil().max(0.0) as usize
            }
        };
        let n_c = mode_cut(sf.n1).max(4);
        let m_c = mode_cut(sf.n2).max(4);
        Self {
            n_c,
            m_c,
            k_c: Self::series_cutoff(sf, n_c, m_c, 1e-3 * tail),
        }
    }

    /// Smallest angular order beyond which every term of every family's
    /// series, for indices up to `(n_c, m_c)`, stays below `tol`.
    pub fn series_cutoff(sf: &StandardForm, n_c: usize, m_c: usize, tol: f64) -> usize {
        const MAX_K: usize = 50_000;
        const RUN: usize = 5;
        let s = Series::new(sf);
        if !s.correlated {
            return 0;
        }
        let amax = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let pop = 4.0 / (s.a * s.b);
        let coh = 8.0 * s.alpha.abs().max(s.beta.abs()) / (s.a * s.b).powi(2) * (((n_c + 1) * (m_c + 1)) as f64).sqrt();
        // Terms grow like λ^{2k} k^{n_c + m_c} until roughly this order.
        let k_peak = ((n_c.max(m_c) + 1) as f64 / -s.ln_lambda).ceil() as usize;
        let mut run = 0;
        for k in 0..MAX_K {
            let f1 = meixner_column(1.0, k, s.z1, s.ln_lambda, n_c + 1);
            let f2 = meixner_column(1.0, k, s.z2, s.ln_lambda, m_c + 1);
            let g1 = meixner_column(2.0, k, s.z1, s.ln_lambda, n_c);
            let g2 = meixner_column(2.0, k, s.z2, s.ln_lambda, m_c);
            let wp = binomial_mixture(k, 0, s.abar, s.bbar);
            let wc =
                (k + 1) as f64 * binomial_mixture(k, 1, s.abar, s.bbar).max(binomial_mixture(k, 1, s.bbar, s.abar));
            let bound = (pop * wp * amax(&f1) * amax(&f2)).max(coh * wc * amax(&g1) * amax(&g2));
            if k >= k_peak && bound < tol {
                run += 1;
                if run == RUN {
                    return k;
                }
            } else {
                run = 0;
            }
        }
        log::warn!("angular series not converged below {tol:e} by k = {MAX_K}");
        MAX_K
    }

    /// Cutoffs raised by `s` in both modes, as needed by a source table
    /// feeding an `s`-photon subtraction.
    pub fn inflated(&self, s: usize) -> Self {
        Self {
            n_c: self.n_c + s,
            m_c: self.m_c + s,
            k_c: self.k_c + 2 * s,
        }
    }
}

/// The five coefficient families stored in a [`GammaTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Diag,
    Ge,
    Eg,
    Ggee,
    Geeg,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Diag, Family::Ge, Family::Eg, Family::Ggee, Family::Geeg];

    pub fn name(self) -> &'static str {
        match self {
            Family::Diag => "diag",
            Family::Ge => "ge",
            Family::Eg => "eg",
            Family::Ggee => "ggee",
            Family::Geeg => "geeg",
        }
    }

    /// `(n, m, p, q)` of the coefficient stored at `(n, m)`.
    pub fn indices(self, n: usize, m: usize) -> (usize, usize, usize, usize) {
        match self {
            Family::Diag => (n, m, n, m),
            Family::Ge => (n, m + 1, n, m + 1),
            Family::Eg => (n + 1, m, n + 1, m),
            Family::Ggee => (n, m, n + 1, m + 1),
            Family::Geeg => (n, m + 1, n + 1, m),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown coefficient family '{s}'")))
    }
}

/// How the two coherence families are evaluated when building a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoherenceMethod {
    /// Bessel-product series; fast, and matched against quadrature in the
    /// test suite.
    #[default]
    Series,
    /// Polar quadrature with a node-doubling convergence check.
    Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaTable {
    pub sf: StandardForm,
    pub cutoffs: Cutoffs,
    pub diag: DMatrix<f64>,
    pub ge: DMatrix<f64>,
    pub eg: DMatrix<f64>,
    pub ggee: DMatrix<f64>,
    pub geeg: DMatrix<f64>,
}

impl GammaTable {
    /// Assembles a table from family matrices of shape `(n_c + 1) × (m_c + 1)`.
    pub fn from_parts(
        sf: StandardForm,
        cutoffs: Cutoffs,
        diag: DMatrix<f64>,
        ge: DMatrix<f64>,
        eg: DMatrix<f64>,
        ggee: DMatrix<f64>,
        geeg: DMatrix<f64>,
    ) -> Result<Self> {
        let shape = (cutoffs.n_c + 1, cutoffs.m_c + 1);
        for m in [&diag, &ge, &eg, &ggee, &geeg] {
            if m.shape() != shape {
                return Err(Error::Parameter(format!(
                    "family shape {:?} does not match cutoffs {:?}",
                    m.shape(),
                    shape
                )));
            }
        }
        Ok(Self {
            sf,
            cutoffs,
            diag,
            ge,
            eg,
            ggee,
            geeg,
        })
    }

    pub fn family(&self, f: Family) -> &DMatrix<f64> {
        match f {
            Family::Diag => &self.diag,
            Family::Ge => &self.ge,
            Family::Eg => &self.eg,
            Family::Ggee => &self.ggee,
            Family::Geeg => &self.geeg,
        }
    }

    fn family_mut(&mut self, f: Family) -> &mut DMatrix<f64> {
        match f {
            Family::Diag => &mut self.diag,
            Family::Ge => &mut self.ge,
            Family::Eg => &mut self.eg,
            Family::Ggee => &mut self.ggee,
            Family::Geeg => &mut self.geeg,
        }
    }

    pub fn get(&self, f: Family, n: usize, m: usize) -> f64 {
        self.family(f)[(n, m)]
    }

    /// `Σ_{n ≤ n_c, m ≤ m_c} γ^{nm}_{nm}`.
    pub fn normalization(&self) -> f64 {
        self.diag.sum()
    }

    /// Error carrying the deficit when the normalization leaves `[1 − eps, 1 + eps]`.
    pub fn truncation_warning(&self, eps: f64) -> Option<Error> {
        let norm = self.normalization();
        if (norm - 1.0).abs() > eps {
            Some(Error::Truncation {
                msg: format!("coefficient table normalization {norm:.6} outside 1 ± {eps}; raise n_c/m_c/k_c"),
                deficit: 1.0 - norm,
            })
        } else {
            None
        }
    }

    pub fn check_normalization(&self, eps: f64) -> Result<()> {
        match self.truncation_warning(eps) {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Every family multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for f in Family::ALL {
            *out.family_mut(f) *= factor;
        }
        out
    }

    /// The table divided by its own normalization.
    pub fn renormalized(&self) -> Result<Self> {
        let norm = self.normalization();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::numeric(
                "cannot renormalize a table with non-positive trace",
                norm,
            ));
        }
        Ok(self.scaled(1.0 / norm))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["family", "n", "m", "value"])?;
        for f in Family::ALL {
            let mat = self.family(f);
            for n in 0..=self.cutoffs.n_c {
                for m in 0..=self.cutoffs.m_c {
                    w.write_record([
                        f.name().to_string(),
                        n.to_string(),
                        m.to_string(),
                        format!("{}", mat[(n, m)]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, sf: StandardForm, cutoffs: Cutoffs) -> Result<Self> {
        let shape = (cutoffs.n_c + 1, cutoffs.m_c + 1);
        let mut table = Self {
            sf,
            cutoffs,
            diag: DMatrix::zeros(shape.0, shape.1),
            ge: DMatrix::zeros(shape.0, shape.1),
            eg: DMatrix::zeros(shape.0, shape.1),
            ggee: DMatrix::zeros(shape.0, shape.1),
            geeg: DMatrix::zeros(shape.0, shape.1),
        };
        let mut seen = 0usize;
        let mut r = csv::Reader::from_path(path)?;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Parameter(format!("malformed cache row {rec:?}")));
            }
            let fam: Family = rec[0].parse()?;
            let parse_idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parameter(format!("bad index '{s}': {e}")))
            };
            let (n, m) = (parse_idx(&rec[1])?, parse_idx(&rec[2])?);
            let v: f64 = rec[3]
                .parse()
                .map_err(|e| Error::Parameter(format!("bad value '{}': {e}", &rec[3])))?;
            if n >= shape.0 || m >= shape.1 {
                return Err(Error::Cutoff(format!("cache entry ({n},{m}) outside cutoffs")));
            }
            table.family_mut(fam)[(n, m)] = v;
            seen += 1;
        }
        if seen != 5 * shape.0 * shape.1 {
            return Err(Error::Parameter(format!(
                "cache holds {seen} entries, expected {}",
                5 * shape.0 * shape.1
            )));
        }
        Ok(table)
    }
}

/// Stable hash of a table's defining inputs, used to name cache files.
pub fn cache_key(sf: &StandardForm, cut: &Cutoffs, method: CoherenceMethod) -> String {
    let mut h = Sha256::new();
    for x in [sf.n1, sf.n2, sf.m_plus, sf.m_minus] {
        h.update(x.to_bits().to_le_bytes());
    }
    for c in [cut.n_c, cut.m_c, cut.k_c] {
        h.update((c as u64).to_le_bytes());
    }
    h.update([method as u8]);
    hex::encode(&h.finalize()[..16])
}

/// Loads a table from `dir` if a matching cache file exists, otherwise
/// builds and stores it.
pub fn build_table_cached(sf: &StandardForm, cut: &Cutoffs, method: CoherenceMethod, dir: &Path) -> Result<GammaTable> {
    let path: PathBuf = dir.join(format!("gamma-{}.csv", cache_key(sf, cut, method)));
    if path.exists() {
        log::debug!("loading coefficient cache {}", path.display());
        return GammaTable::read_csv(&path, *sf, *cut);
    }
    let table = build_table_with(sf, cut, method)?;
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    table.write_csv(&tmp)?;
    std::fs::File::open(&tmp)?.sync_all()?;
    std::fs::rename(&tmp, &path)?;
    Ok(table)
}

/// Correlation constants of the angular expansion.
#[derive(Debug, Clone, Copy)]
struct Series {
    a: f64,
    b: f64,
    z1: f64,
    z2: f64,
    /// Coefficient of `cos(φ − θ)`.
    alpha: f64,
    /// Coefficient of `cos(φ + θ)`.
    beta: f64,
    /// `ln λ` with `λ² = m₊² / (a b)`.
    ln_lambda: f64,
    /// `α² / m₊²`, `β² / m₊²`.
    abar: f64,
    bbar: f64,
    correlated: bool,
}

impl Series {
    fn new(sf: &StandardForm) -> Self {
        let a = sf.n1 + 1.0;
        let b = sf.n2 + 1.0;
        let alpha = 0.5 * (sf.m_minus + sf.m_plus);
        let beta = 0.5 * (sf.m_minus - sf.m_plus);
        let correlated = sf.m_plus > 0.0;
        let (ln_lambda, abar, bbar) = if correlated {
            let mp2 = sf.m_plus * sf.m_plus;
            (0.5 * (mp2 / (a * b)).ln(), alpha * alpha / mp2, beta * beta / mp2)
        } else {
            (f64::NEG_INFINITY, 0.0, 0.0)
        };
        Self {
            a,
            b,
            z1: 2.0 / a,
            z2: 2.0 / b,
            alpha,
            beta,
            ln_lambda,
            abar,
            bbar,
            correlated,
        }
    }

    /// Rows `k = 0..=k_c`, columns `n = 0..=n_max` of `λᵏ ₂F₁(−n, β+k; β; z)`.
    fn columns(&self, beta: f64, z: f64, n_max: usize, k_c: usize) -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = (0..=k_c)
            .into_par_iter()
            .map(|k| meixner_column(beta, k, z, self.ln_lambda, n_max))
            .collect();
        DMatrix::from_fn(k_c + 1, n_max + 1, |k, n| rows[k][n])
    }

    /// Populations `γ^{nm}_{nm}` for `n ≤ n_max`, `m ≤ m_max`.
    fn populations(&self, n_max: usize, m_max: usize, k_c: usize) -> DMatrix<f64> {
        let pref = 4.0 / (self.a * self.b);
        if !self.correlated {
            let r1 = 1.0 - self.z1;
            let r2 = 1.0 - self.z2;
            return DMatrix::from_fn(n_max + 1, m_max + 1, |n, m| {
                pref * r1.powi(n as i32) * r2.powi(m as i32)
            });
        }
        let mut f1 = self.columns(1.0, self.z1, n_max, k_c);
        let f2 = self.columns(1.0, self.z2, m_max, k_c);
        for k in 0..=k_c {
            let w = binomial_mixture(k, 0, self.abar, self.bbar);
            f1.row_mut(k).scale_mut(w);
        }
        f1.transpose() * f2 * pref
    }

    /// `γ^{n+1,m+1}_{nm}` (`swap = false`) or `γ^{n+1,m}_{n,m+1}` (`swap = true`).
    fn coherences(&self, n_max: usize, m_max: usize, k_c: usize, swap: bool) -> DMatrix<f64> {
        if !self.correlated {
            return DMatrix::zeros(n_max + 1, m_max + 1);
        }
        let (lead, x, y, sign) = if swap {
            (self.alpha, self.bbar, self.abar, 1.0)
        } else {
            (self.beta, self.abar, self.bbar, -1.0)
        };
        if lead == 0.0 {
            return DMatrix::zeros(n_max + 1, m_max + 1);
        }
        let mut g1 = self.columns(2.0, self.z1, n_max, k_c);
        let g2 = self.columns(2.0, self.z2, m_max, k_c);
        for k in 0..=k_c {
            let w = (k + 1) as f64 * binomial_mixture(k, 1, x, y);
            g1.row_mut(k).scale_mut(w);
        }
        let pref = sign * 8.0 * lead / (self.a * self.b).powi(2);
        let mut out = g1.transpose() * g2 * pref;
        for n in 0..=n_max {
            for m in 0..=m_max {
                out[(n, m)] *= (((n + 1) * (m + 1)) as f64).sqrt();
            }
        }
        out
    }
}

/// Angular coefficient `G_k(m₊, m₋)` of the population series, evaluated as a
/// terminating sum in division-free form so that `m₋ = 0` is regular.
pub fn coeff_g(k: usize, m_plus: f64, m_minus: f64) -> f64 {
    let d = m_minus * m_minus - m_plus * m_plus;
    let m2 = m_minus * m_minus;
    let mut term = 1.0;
    let mut sum = 0.0;
    for j in 0..=k {
        if j > 0 {
            let jf = (j - 1) as f64;
            term *= (0.5 + jf) * (jf - k as f64) / ((jf + 1.0) * (jf + 1.0));
        }
        sum += term * d.powi(j as i32) * m2.powi((k - j) as i32);
    }
    let twok = 2 * k as i64;
    let fact2k: f64 = (1..=twok).map(|i| i as f64).product();
    double_factorial(twok - 1) / (fact2k * double_factorial(twok)) * sum
}

fn check_indices(n: usize, m: usize, cut: &Cutoffs) -> Result<()> {
    if n > cut.n_c || m > cut.m_c {
        return Err(Error::Cutoff(format!(
            "index ({n},{m}) exceeds cutoffs ({},{})",
            cut.n_c, cut.m_c
        )));
    }
    Ok(())
}

/// `γ^{nm}_{nm}` from the series truncated at `k_c`.
pub fn gamma_diag(n: usize, m: usize, sf: &StandardForm, cut: &Cutoffs) -> Result<f64> {
    check_indices(n, m, cut)?;
    Ok(Series::new(sf).populations(n, m, cut.k_c)[(n, m)])
}

/// `γ^{n,m+1}_{n,m+1}`.
pub fn gamma_ge(n: usize, m: usize, sf: &StandardForm, cut: &Cutoffs) -> Result<f64> {
    check_indices(n, m, cut)?;
    Ok(Series::new(sf).populations(n, m + 1, cut.k_c)[(n, m + 1)])
}

/// `γ^{n+1,m}_{n+1,m}`.
pub fn gamma_eg(n: usize, m: usize, sf: &StandardForm, cut: &Cutoffs) -> Result<f64> {
    check_indices(n, m, cut)?;
    Ok(Series::new(sf).populations(n + 1, m, cut.k_c)[(n + 1, m)])
}

/// `γ^{n+1,m+1}_{nm}`.
pub fn gamma_ggee(n: usize, m: usize, sf: &StandardForm, cut: &Cutoffs) -> Result<f64> {
    check_indices(n, m, cut)?;
    Ok(Series::new(sf).coherences(n, m, cut.k_c, false)[(n, m)])
}

/// `γ^{n+1,m}_{n,m+1}`.
pub fn gamma_geeg(n: usize, m: usize, sf: &StandardForm, cut: &Cutoffs) -> Result<f64> {
    check_indices(n, m, cut)?;
    Ok(Series::new(sf).coherences(n, m, cut.k_c, true)[(n, m)])
}

/// Builds all five families with the series route and logs a warning if the
/// normalization leaves `1 ± 0.01`.
pub fn build_table(sf: &StandardForm, cut: &Cutoffs) -> Result<GammaTable> {
    build_table_with(sf, cut, CoherenceMethod::Series)
}

pub fn build_table_with(sf: &StandardForm, cut: &Cutoffs, method: CoherenceMethod) -> Result<GammaTable> {
    sf.validate()?;
    let (nc, mc) = (cut.n_c, cut.m_c);
    let series = Series::new(sf);
    let pops = series.populations(nc + 1, mc + 1, cut.k_c);
    let diag = pops.view((0, 0), (nc + 1, mc + 1)).into_owned();
    let ge = pops.view((0, 1), (nc + 1, mc + 1)).into_owned();
    let eg = pops.view((1, 0), (nc + 1, mc + 1)).into_owned();
    let (ggee, geeg) = match method {
        CoherenceMethod::Series => (
            series.coherences(nc, mc, cut.k_c, false),
            series.coherences(nc, mc, cut.k_c, true),
        ),
        CoherenceMethod::Quadrature => quadrature_coherences(sf, nc, mc)?,
    };
    let table = GammaTable {
        sf: *sf,
        cutoffs: *cut,
        diag,
        ge,
        eg,
        ggee,
        geeg,
    };
    if let Some(w) = table.truncation_warning(DEFAULT_EPS_TRUNC) {
        log::warn!("{w}");
    }
    Ok(table)
}

fn quadrature_coherences(sf: &StandardForm, nc: usize, mc: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let top = nc.max(mc) + 1;
    let cfg = QuadratureConfig::for_index(top);
    let coarse = QuadratureEngine::new(sf, top, cfg)?;
    let fine = QuadratureEngine::new(sf, top, cfg.refined())?;
    let mut out = Vec::new();
    for fam in [Family::Ggee, Family::Geeg] {
        let cells: Vec<(usize, usize)> = (0..=nc).flat_map(|n| (0..=mc).map(move |m| (n, m))).collect();
        let vals: Vec<Result<f64>> = cells
            .par_iter()
            .map(|&(n, m)| {
                let (i, j, p, q) = fam.indices(n, m);
                let a = coarse.gamma(i, j, p, q);
                let b = fine.gamma(i, j, p, q);
                let diff = (a.re - b.re).abs();
                if diff > 1e-8 {
                    return Err(Error::numeric(
                        format!("quadrature not converged for {fam}({n},{m})"),
                        diff,
                    ));
                }
                Ok(b.re)
            })
            .collect();
        let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
        out.push(DMatrix::from_row_slice(nc + 1, mc + 1, &vals));
    }
    let geeg = out.pop().unwrap();
    let ggee = out.pop().unwrap();
    Ok((ggee, geeg))
}

/// Displacement matrix element `⟨n|D(−ξ)|p⟩`.
pub fn f_np(n: usize, p: usize, xi: Complex64) -> Complex64 {
    let r = xi.norm();
    let phase = Complex64::from_polar(1.0, (n as f64 - p as f64) * xi.arg());
    phase * radial_part(n, p, r) * (-0.5 * r * r).exp()
}

/// `f_np(r e^{iφ}) = radial_part(n, p, r) e^{−r²/2} e^{i(n−p)φ}`.
fn radial_part(n: usize, p: usize, r: f64) -> f64 {
    let x = r * r;
    if n >= p {
        let d = n - p;
        factorial_ratio_sqrt(p, n) * (-r).powi(d as i32) * laguerre(p, d as f64, x)
    } else {
        let d = p - n;
        factorial_ratio_sqrt(n, p) * r.powi(d as i32) * laguerre(n, d as f64, x)
    }
}

/// Node counts of the polar quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Gauss–Legendre panels per radial axis.
    pub panels: usize,
    /// Points per panel.
    pub order: usize,
    /// Minimum number of trapezoid nodes per angle.
    pub angular_min: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panels: 4,
            order: 20,
            angular_min: 64,
        }
    }
}

impl QuadratureConfig {
    /// Default rule widened for large Fock indices.
    pub fn for_index(max_index: usize) -> Self {
        Self {
            panels: 4usize.max((max_index + 12) / 6),
            ..Self::default()
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            panels: self.panels * 2,
            order: self.order,
            angular_min: self.angular_min * 2,
        }
    }
}

type Kernel = Arc<(DMatrix<f64>, f64)>;

/// Polar quadrature for one resource. Angular kernels are memoized per
/// phase winding `(n − p, m − q)`.
pub struct QuadratureEngine {
    sf: StandardForm,
    cfg: QuadratureConfig,
    rule: PanelRule,
    kernels: Mutex<HashMap<(i64, i64), Kernel>>,
}

impl QuadratureEngine {
    /// `max_index` bounds every Fock index that will be requested; it sets the
    /// radial extent.
    pub fn new(sf: &StandardForm, max_index: usize, cfg: QuadratureConfig) -> Result<Self> {
        sf.validate()?;
        if cfg.panels == 0 || cfg.order == 0 || cfg.angular_min < 4 {
            return Err(Error::Parameter(format!("degenerate quadrature configuration {cfg:?}")));
        }
        // Slowest decay direction of exp(−½((n1+1)r² + (n2+1)s²) + m₊ r s).
        let (p, q) = (0.5 * (sf.n1 + 1.0), 0.5 * (sf.n2 + 1.0));
        let h = 0.5 * sf.m_plus;
        let mu = 0.5 * (p + q) - (0.25 * (p - q) * (p - q) + h * h).sqrt();
        let deg = (2 * max_index + 2) as f64;
        let mut r2: f64 = 40.0 / mu;
        for _ in 0..20 {
            r2 = (41.5 + 0.5 * deg * r2.max(1.0).ln()) / mu;
        }
        let rule = PanelRule::new(0.0, r2.sqrt(), cfg.panels, cfg.order);
        Ok(Self {
            sf: *sf,
            cfg,
            rule,
            kernels: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> QuadratureConfig {
        self.cfg
    }

    /// `K_ij = w_i w_j r_i s_j E(r_i, s_j) M(r_i s_j)` where `E` is the Gaussian
    /// envelope and `M` the rescaled angular mean; also returns the largest
    /// imaginary part met in the angular sums.
    fn kernel(&self, a: i64, b: i64) -> Kernel {
        if let Some(k) = self.kernels.lock().unwrap().get(&(a, b)) {
            return Arc::clone(k);
        }
        let sf = &self.sf;
        let alpha = 0.5 * (sf.m_minus + sf.m_plus);
        let beta = 0.5 * (sf.m_minus - sf.m_plus);
        let nodes = &self.rule.nodes;
        let weights = &self.rule.weights;
        let len = nodes.len();
        let rows: Vec<(Vec<f64>, f64)> = (0..len)
            .into_par_iter()
            .map(|i| {
                let r = nodes[i];
                let mut row = vec![0.0; len];
                let mut imag: f64 = 0.0;
                for j in 0..len {
                    let s = nodes[j];
                    let env = (-0.5 * ((sf.n1 + 1.0) * r * r + (sf.n2 + 1.0) * s * s) + sf.m_plus * r * s).exp();
                    if env < 1e-300 {
                        continue;
                    }
                    let m = angular_mean(r * s, alpha, beta, a, b, self.cfg.angular_min);
                    imag = imag.max(m.im.abs());
                    row[j] = weights[i] * weights[j] * r * s * env * m.re;
                }
                (row, imag)
            })
            .collect();
        let imag = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        let mat = DMatrix::from_fn(len, len, |i, j| rows[i].0[j]);
        let k = Arc::new((mat, imag));
        self.kernels.lock().unwrap().insert((a, b), Arc::clone(&k));
        k
    }

    /// `γ^{pq}_{nm}` as a complex number; the real part is the coefficient.
    pub fn gamma(&self, n: usize, m: usize, p: usize, q: usize) -> Complex64 {
        let a = n as i64 - p as i64;
        let b = m as i64 - q as i64;
        let kern = self.kernel(a, b);
        let nodes = &self.rule.nodes;
        let u: Vec<f64> = nodes.iter().map(|&r| radial_part(n, p, r)).collect();
        let v: Vec<f64> = nodes.iter().map(|&s| radial_part(m, q, s)).collect();
        let mut acc = 0.0;
        for (i, ui) in u.iter().enumerate() {
            if *ui == 0.0 {
                continue;
            }
            let row: f64 = kern.0.row(i).iter().zip(&v).map(|(k, vj)| k * vj).sum();
            acc += ui * row;
        }
        Complex64::new(4.0 * acc, kern.1)
    }
}

/// Periodic trapezoid mean over `(φ, θ)` of
/// `exp(−x(α cos(φ−θ) + β cos(φ+θ) + α − β)) e^{i(aφ + bθ)}`.
///
/// On an even `N × N` grid the pair `(φ−θ, φ+θ)` ranges over grid points of
/// equal parity, so the double sum splits into even and odd single sums.
/// Odd `a + b` cancels exactly between the two preimages of each pair.
fn angular_mean(x: f64, alpha: f64, beta: f64, a: i64, b: i64, n_min: usize) -> Complex64 {
    if (a + b).rem_euclid(2) != 0 {
        return Complex64::new(0.0, 0.0);
    }
    let p = (a - b) / 2;
    let q = (a + b) / 2;
    let spread = x * alpha.abs().max(beta.abs());
    let need = (80.0 * spread).sqrt() + 8.0 + 2.0 * (p.abs() + q.abs()) as f64;
    let mut n = n_min.max(need.ceil() as usize);
    n += n % 2;
    let step = 2.0 * PI / n as f64;
    let sums = |c: f64, shift: f64, order: i64| {
        let mut even = Complex64::new(0.0, 0.0);
        let mut odd = Complex64::new(0.0, 0.0);
        for u in 0..n {
            let t = step * u as f64;
            let val = (-x * c * (t.cos() + shift)).exp();
            let term = Complex64::from_polar(val, order as f64 * t);
            if u % 2 == 0 {
                even += term;
            } else {
                odd += term;
            }
        }
        (even, odd)
    };
    let (ae, ao) = sums(alpha, 1.0, p);
    let (be, bo) = sums(beta, -1.0, q);
    (ae * be + ao * bo) * (2.0 / (n * n) as f64)
}

/// `γ^{pq}_{nm}` by polar quadrature with a node-doubling convergence check.
pub fn gamma_quadrature(n: usize, m: usize, p: usize, q: usize, sf: &StandardForm, tol: f64) -> Result<f64> {
    let top = n.max(m).max(p).max(q);
    let cfg = QuadratureConfig::for_index(top);
    let coarse = QuadratureEngine::new(sf, top, cfg)?.gamma(n, m, p, q);
    let fine = QuadratureEngine::new(sf, top, cfg.refined())?.gamma(n, m, p, q);
    if fine.im.abs() >= tol {
        return Err(Error::numeric(
            "imaginary part of quadrature coefficient above tolerance",
            fine.im.abs(),
        ));
    }
    let diff = (coarse.re - fine.re).abs();
    if diff >= tol {
        return Err(Error::numeric("quadrature node doubling disagrees", diff));
    }
    Ok(fine.re)
}

/// Writes the table's values in a fixed order; handy for diffing runs.
pub fn dump_table(table: &GammaTable, mut w: impl Write) -> Result<()> {
    for f in Family::ALL {
        let mat = table.family(f);
        for n in 0..mat.nrows() {
            for m in 0..mat.ncols() {
                writeln!(w, "{f},{n},{m},{}", mat[(n, m)])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::make_tmsv;
    use approx::assert_abs_diff_eq;

    fn schmidt(zeta: f64, n: usize) -> f64 {
        let t = zeta.tanh();
        t.powi(2 * n as i32) / zeta.cosh().powi(2)
    }

    #[test]
    fn coeff_g_values() {
        assert_eq!(coeff_g(0, 0.3, -0.1), 1.0);
        assert_abs_diff_eq!(coeff_g(1, 1.3, -0.4), (1.69 + 0.16) / 8.0, epsilon = 1e-15);
        assert_eq!(coeff_g(3, 0.0, 0.0), 0.0);
        let g = coeff_g(2, 1.0, 0.0);
        assert!(g.is_finite() && g > 0.0);
    }

    #[test]
    fn coeff_g_is_a_bessel_mixture() {
        // G_k = (2k−1)!!/((2k)!(2k)!!) · Σ_i C(k,i)² α^{2i} β^{2(k−i)}.
        let (mp, mm): (f64, f64) = (1.7, -0.6);
        let (al, be) = (0.5 * (mm + mp), 0.5 * (mm - mp));
        for k in 0..8usize {
            let tk = 2 * k as i64;
            let f2k: f64 = (1..=tk).map(|i| i as f64).product();
            let pre = double_factorial(tk - 1) / (f2k * double_factorial(tk));
            let mix = mp.powi(2 * k as i32) * binomial_mixture(k, 0, al * al / (mp * mp), be * be / (mp * mp));
            assert!(
                (coeff_g(k, mp, mm) - pre * mix).abs() < 1e-12 * (pre * mix).max(1e-300),
                "k={k}"
            );
        }
    }

    #[test]
    fn vacuum_table() {
        let t = build_table(&StandardForm::vacuum(), &Cutoffs::default()).unwrap();
        assert_eq!(t.diag[(0, 0)], 1.0);
        assert_eq!(t.normalization(), 1.0);
        for f in Family::ALL {
            let m = t.family(f);
            let off = m
                .iter()
                .enumerate()
                .filter(|(i, _)| !(f == Family::Diag && *i == 0))
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max);
            assert_eq!(off, 0.0, "{f}");
        }
    }

    #[test]
    fn tmsv_anchors() {
        let sf = make_tmsv(0.86);
        let cut = Cutoffs::default();
        assert_abs_diff_eq!(gamma_diag(0, 0, &sf, &cut).unwrap(), 0.515_23, epsilon = 1e-5);
        assert_abs_diff_eq!(
            gamma_diag(0, 0, &sf, &cut).unwrap(),
            1.0 / 0.86f64.cosh().powi(2),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(gamma_diag(1, 0, &sf, &cut).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(gamma_ge(1, 0, &sf, &cut).unwrap(), schmidt(0.86, 1), epsilon = 1e-12);
        assert_abs_diff_eq!(gamma_eg(0, 1, &sf, &cut).unwrap(), schmidt(0.86, 1), epsilon = 1e-12);
        assert_abs_diff_eq!(
            gamma_ggee(2, 2, &sf, &cut).unwrap(),
            schmidt(0.86, 2) * 0.86f64.tanh(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(gamma_ggee(2, 1, &sf, &cut).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma_geeg(1, 1, &sf, &cut).unwrap(), 0.0, epsilon = 1e-12);
        assert!(gamma_diag(26, 0, &sf, &cut).is_err());
    }

    #[test]
    fn tmsv_table_matches_schmidt_form() {
        for zeta in [0.3, 0.86, 1.2] {
            let sf = make_tmsv(zeta);
            let cut = Cutoffs::new(25, 25, Cutoffs::series_cutoff(&sf, 25, 25, 1e-14));
            let t = build_table(&sf, &cut).unwrap();
            let th = zeta.tanh();
            let mut worst: f64 = 0.0;
            for n in 0..=25 {
                for m in 0..=25 {
                    let d = if n == m { schmidt(zeta, n) } else { 0.0 };
                    let ge = if n == m + 1 { schmidt(zeta, n) } else { 0.0 };
                    let eg = if m == n + 1 { schmidt(zeta, m) } else { 0.0 };
                    let gg = if n == m { schmidt(zeta, n) * th } else { 0.0 };
                    worst = worst
                        .max((t.diag[(n, m)] - d).abs())
                        .max((t.ge[(n, m)] - ge).abs())
                        .max((t.eg[(n, m)] - eg).abs())
                        .max((t.ggee[(n, m)] - gg).abs())
                        .max(t.geeg[(n, m)].abs());
                }
            }
            assert!(worst < 1e-8, "ζ={zeta}: {worst:e}");
        }
    }

    #[test]
    fn mode_swap_symmetry() {
        let sf = StandardForm::new(2.5, 1.8, 1.2, -0.7).unwrap();
        let cut = Cutoffs::new(8, 8, 100);
        let t = build_table(&sf, &cut).unwrap();
        let s = build_table(&sf.swapped(), &cut).unwrap();
        for n in 0..=8 {
            for m in 0..=8 {
                assert_abs_diff_eq!(t.ge[(n, m)], s.eg[(m, n)], epsilon = 1e-13);
                assert_abs_diff_eq!(t.diag[(n, m)], s.diag[(m, n)], epsilon = 1e-13);
                assert_abs_diff_eq!(t.ggee[(n, m)], s.ggee[(m, n)], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn uncorrelated_factorizes() {
        let sf = StandardForm::new(3.0, 1.5, 0.0, 0.0).unwrap();
        let t = build_table(&sf, &Cutoffs::new(10, 10, 50)).unwrap();
        let g1 = |n: i32| 0.5 * 0.5f64.powi(n);
        let g2 = |m: i32| 0.8 * 0.2f64.powi(m);
        for n in 0..=10 {
            for m in 0..=10 {
                assert_abs_diff_eq!(t.diag[(n, m)], g1(n as i32) * g2(m as i32), epsilon = 1e-15);
            }
        }
        assert_eq!(t.ggee.amax(), 0.0);
        assert_eq!(t.geeg.amax(), 0.0);
    }

    #[test]
    fn default_normalization_window() {
        let n = |z: f64| build_table(&make_tmsv(z), &Cutoffs::default()).unwrap().normalization();
        assert!(n(0.86) >= 0.99);
        assert!(n(1.5) >= 0.99);
        assert!(n(2.0) <= 0.95);
        let t = build_table(&make_tmsv(2.0), &Cutoffs::default()).unwrap();
        assert!(matches!(
            t.truncation_warning(DEFAULT_EPS_TRUNC),
            Some(Error::Truncation { .. })
        ));
    }

    #[test]
    fn adaptive_cutoffs_close_the_deficit() {
        for zeta in [1.5, 2.0] {
            let sf = make_tmsv(zeta);
            let cut = Cutoffs::adaptive(&sf, 1e-12);
            let t = build_table(&sf, &cut).unwrap();
            assert_abs_diff_eq!(t.normalization(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn f_np_basics() {
        let xi = Complex64::new(0.3, -0.5);
        assert_abs_diff_eq!(
            (f_np(0, 0, xi) - (-0.5 * xi.norm_sqr()).exp()).norm(),
            0.0,
            epsilon = 1e-16
        );
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(f_np(3, 3, zero), Complex64::new(1.0, 0.0));
        assert_eq!(f_np(3, 1, zero).norm(), 0.0);
        let xi = Complex64::from_polar(0.7, 1.1);
        for n in 0..=5 {
            let s: f64 = (0..=60).map(|p| f_np(n, p, xi).norm_sqr()).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn f_np_is_unitary_matrix_element() {
        // ⟨n|D(−ξ)|p⟩ = conj(⟨p|D(ξ)|n⟩) = conj(⟨p|D(−(−ξ))|n⟩)
        let xi = Complex64::from_polar(0.9, 0.4);
        for n in 0..5 {
            for p in 0..5 {
                let lhs = f_np(n, p, xi);
                let rhs = f_np(p, n, -xi).conj();
                assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_vacuum() {
        let v = gamma_quadrature(0, 0, 0, 0, &StandardForm::vacuum(), 1e-12).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_matches_series_on_tmsv() {
        let sf = make_tmsv(0.5);
        let cut = Cutoffs::default();
        let series = build_table(&sf, &cut).unwrap();
        let eng = QuadratureEngine::new(&sf, 5, QuadratureConfig::default()).unwrap();
        for n in 0..=4 {
            for m in 0..=4 {
                assert_abs_diff_eq!(eng.gamma(n, m, n, m).re, series.diag[(n, m)], epsilon = 1e-8);
                assert_abs_diff_eq!(eng.gamma(n, m, n + 1, m + 1).re, series.ggee[(n, m)], epsilon = 1e-8);
            }
        }
        assert_abs_diff_eq!(
            gamma_quadrature(2, 2, 2, 2, &sf, 1e-8).unwrap(),
            series.diag[(2, 2)],
            epsilon = 1e-8
        );
    }

    #[test]
    fn quadrature_selection_rule() {
        let sf = StandardForm::new(2.2, 1.7, 1.1, -0.4).unwrap();
        for n in 0..3 {
            for m in 0..3 {
                assert!(gamma_quadrature(n, m, n, m + 1, &sf, 1e-10).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadrature_coherence_table_matches_series() {
        let sf = StandardForm::new(2.2, 1.7, 1.1, -0.4).unwrap();
        let cut = Cutoffs::new(6, 6, 100);
        let a = build_table_with(&sf, &cut, CoherenceMethod::Series).unwrap();
        let b = build_table_with(&sf, &cut, CoherenceMethod::Quadrature).unwrap();
        assert!((&a.ggee - &b.ggee).amax() < 1e-8);
        assert!((&a.geeg - &b.geeg).amax() < 1e-8);
        assert!(a.geeg.amax() > 1e-3);
    }

    #[test]
    fn csv_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sf = StandardForm::new(2.2, 1.7, 1.1, -0.4).unwrap();
        let cut = Cutoffs::new(5, 4, 60);
        let a = build_table_cached(&sf, &cut, CoherenceMethod::Series, dir.path()).unwrap();
        let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let b = build_table_cached(&sf, &cut, CoherenceMethod::Series, dir.path()).unwrap();
        assert_eq!(a, b);
        let other = cache_key(&sf, &Cutoffs::new(5, 4, 61), CoherenceMethod::Series);
        assert_ne!(other, cache_key(&sf, &cut, CoherenceMethod::Series));
    }
}
