//! Photon-subtracted resources.
//!
//! Subtraction acts on a coefficient table by shifting every index up by `s`
//! and weighting with ladder-operator factors. The ideal map applies `aˢ ⊗ bˢ`
//! directly; the beam-splitter map conditions on one photon reflected off a
//! weakly reflecting splitter per stage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ResultTable;
use crate::fock::{second_moments, subtracted_tmsv};
use crate::gamma::{build_table, Cutoffs, Family, GammaTable};
use crate::gaussian::{make_tmsv, to_standard_form, von_neumann_entropy, StandardForm};
use crate::special::ln_rising;
use crate::transfer::{assemble_state, linspace, negativity, transfer_curve, transfer_curve_with, AmplitudeMode};

/// Discarded weight used when sizing tables for subtracted resources.
pub const SUBTRACTION_TAIL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubtractionMode {
    #[default]
    Formal,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubtractionSpec {
    pub s: usize,
    pub mode: SubtractionMode,
    /// Beam-splitter transmittivity, physical mode only.
    pub transmittivity: f64,
}

impl SubtractionSpec {
    pub fn formal(s: usize) -> Self {
        Self {
            s,
            mode: SubtractionMode::Formal,
            transmittivity: 1.0,
        }
    }

    pub fn physical(s: usize, transmittivity: f64) -> Self {
        Self {
            s,
            mode: SubtractionMode::Physical,
            transmittivity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == SubtractionMode::Physical && !(self.transmittivity > 0.0 && self.transmittivity < 1.0) {
            return Err(Error::Parameter(format!(
                "physical subtraction needs 0 < T < 1, got {}",
                self.transmittivity
            )));
        }
        Ok(())
    }

    pub fn apply(&self, table: &GammaTable) -> Result<GammaTable> {
        self.validate()?;
        match self.mode {
            SubtractionMode::Formal => formal_subtract(table, self.s),
            SubtractionMode::Physical => physical_subtract_cascade(table, self.transmittivity, self.s),
        }
    }
}

/// Shifts every family by `s` with `weight(n, m, p, q)` on the output indices.
fn shift_map(table: &GammaTable, s: usize, weight: impl Fn(usize, usize, usize, usize) -> f64) -> Result<GammaTable> {
    let c = table.cutoffs;
    if c.n_c < s || c.m_c < s {
        return Err(Error::Cutoff(format!(
            "source cutoffs ({}, {}) cannot absorb a shift by {s}; rebuild with cutoffs raised by {s}",
            c.n_c, c.m_c
        )));
    }
    let cut = Cutoffs::new(c.n_c - s, c.m_c - s, c.k_c);
    let fam = |f: Family| {
        nalgebra::DMatrix::from_fn(cut.n_c + 1, cut.m_c + 1, |n, m| {
            let (i, j, p, q) = f.indices(n, m);
            weight(i, j, p, q) * table.get(f, n + s, m + s)
        })
    };
    let out = GammaTable::from_parts(
        table.sf,
        cut,
        fam(Family::Diag),
        fam(Family::Ge),
        fam(Family::Eg),
        fam(Family::Ggee),
        fam(Family::Geeg),
    )?;
    if !(out.normalization() > 0.0) {
        return Err(Error::Domain("subtraction annihilates the state (zero trace)".into()));
    }
    out.renormalized()
}

/// Ideal `s`-photon subtraction from each mode, renormalized on the output
/// table. The output cutoffs are the source cutoffs lowered by `s`.
pub fn formal_subtract(table: &GammaTable, s: usize) -> Result<GammaTable> {
    if s == 0 {
        return Ok(table.clone());
    }
    shift_map(table, s, |n, m, p, q| {
        (0.5 * (ln_rising(n, s) + ln_rising(m, s) + ln_rising(p, s) + ln_rising(q, s))).exp()
    })
}

/// One-photon-per-mode subtraction through beam splitters of transmittivity
/// `t`, conditioned on a single reflected photon in each arm.
pub fn physical_subtract(table: &GammaTable, t: f64) -> Result<GammaTable> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Parameter(format!("transmittivity {t} outside (0, 1)")));
    }
    let ln_t = t.ln();
    shift_map(table, 1, |n, m, p, q| {
        let ladder = (((n + 1) * (m + 1)) as f64).sqrt() * (((p + 1) * (q + 1)) as f64).sqrt();
        (0.5 * (n + m + p + q) as f64 * ln_t).exp() * ladder
    })
}

/// `s` beam-splitter stages in sequence.
pub fn physical_subtract_cascade(table: &GammaTable, t: f64, s: usize) -> Result<GammaTable> {
    let mut out = table.clone();
    for _ in 0..s {
        out = physical_subtract(&out, t)?;
    }
    Ok(out)
}

/// Photon-number cutoff for one mode of ratio `rho` after subtracting `s`
/// photons, so the discarded weight `∝ Σ_{n > N} ((n+s)!/n!)² ρⁿ` is below
/// `tail`.
fn subtracted_mode_cut(n_j: f64, s: usize, tail: f64) -> usize {
    let rho = (n_j - 1.0) / (n_j + 1.0);
    if rho <= 0.0 {
        return 4;
    }
    let lw = |n: usize| 2.0 * ln_rising(n, s) + n as f64 * rho.ln();
    let mut logs: Vec<f64> = Vec::new();
    let mut top = f64::NEG_INFINITY;
    for n in 0.. {
        let l = lw(n);
        top = top.max(l);
        logs.push(l);
        if n > s + 2 && l < top + tail.ln() - 12.0 && l < logs[n - 1] {
            break;
        }
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut rest = total;
    for (k, wk) in w.iter().enumerate() {
        rest -= wk;
        if rest / total < tail {
            return k.max(4);
        }
    }
    w.len()
}

/// Source-table cutoffs for an `s`-photon subtraction whose output discards
/// less than about `tail` of its weight.
///
/// The angular series tolerance is tightened by the largest ladder weight
/// the shift applies and by the rough size `ρ^s` of the renormalizing trace,
/// since both amplify truncation error in the output.
pub fn subtraction_cutoffs(sf: &StandardForm, s: usize, tail: f64) -> Cutoffs {
    let n_c = subtracted_mode_cut(sf.n1, s, tail) + s;
    let m_c = subtracted_mode_cut(sf.n2, s, tail) + s;
    let ln_rho = |n: f64| ((n - 1.0) / (n + 1.0)).max(1e-300).ln();
    let ln_one_minus = |n: f64| (2.0 / (n + 1.0)).ln();
    let weight = ln_rising(n_c - s, s) + ln_rising(m_c - s, s);
    let trace = 0.5 * s as f64 * (ln_rho(sf.n1) + ln_rho(sf.n2)) + ln_one_minus(sf.n1) + ln_one_minus(sf.n2);
    let tol = ((1e-3 * tail).ln() + trace - weight).max(-640.0).exp().max(1e-280);
    Cutoffs::new(n_c, m_c, Cutoffs::series_cutoff(sf, n_c, m_c, tol))
}

/// Source table for subtractions of up to `s_max` photons.
pub fn subtraction_source(sf: &StandardForm, s_max: usize, tail: f64) -> Result<GammaTable> {
    build_table(sf, &subtraction_cutoffs(sf, s_max, tail))
}

/// How source-table cutoffs are chosen for each resource.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffPolicy {
    /// The same cutoffs everywhere; subtraction lowers them by `s`.
    Fixed(Cutoffs),
    /// Per-resource cutoffs from [`subtraction_cutoffs`].
    Adaptive { tail: f64 },
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        CutoffPolicy::Adaptive { tail: SUBTRACTION_TAIL }
    }
}

impl CutoffPolicy {
    pub fn source(&self, sf: &StandardForm, s: usize) -> Cutoffs {
        match *self {
            CutoffPolicy::Fixed(c) => c,
            CutoffPolicy::Adaptive { tail } => subtraction_cutoffs(sf, s, tail),
        }
    }
}

/// Standard form of the Gaussian state with the same second moments as the
/// `s`-photon-subtracted squeezed vacuum, from the Fock construction.
pub fn gaussian_equivalent_cm(zeta: f64, s: usize) -> Result<StandardForm> {
    if !zeta.is_finite() {
        return Err(Error::Parameter(format!("squeezing {zeta} is not finite")));
    }
    if s == 0 {
        return Ok(make_tmsv(zeta));
    }
    if zeta == 0.0 {
        return Err(Error::Domain("the vacuum cannot be photon-subtracted".into()));
    }
    let state = subtracted_tmsv(zeta, s, 1e-14)?;
    let v = second_moments(&state)?;
    let (sf, _) = to_standard_form(&v)?;
    Ok(sf)
}

/// Von Neumann entropy of the Gaussian equivalent of the `s`-subtracted
/// squeezed vacuum.
pub fn non_gaussianity(zeta: f64, s: usize) -> Result<f64> {
    if s == 0 {
        return Ok(0.0);
    }
    von_neumann_entropy(&gaussian_equivalent_cm(zeta, s)?.to_covariance())
}

/// Largest negativity over `window`: a uniform grid of `resolution` points,
/// refined by golden-section search around the best cell.
pub fn max_transfer(table: &GammaTable, window: (f64, f64), resolution: usize) -> Result<f64> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) || resolution < 2 {
        return Err(Error::Parameter(format!(
            "invalid window [{lo}, {hi}] or resolution {resolution}"
        )));
    }
    let grid = linspace(lo, hi, resolution);
    let curve = transfer_curve(table, &grid)?;
    let (best, &top) = curve
        .negativity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if top == 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| assemble_state(table, t).map(|x| negativity(&x));
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(resolution - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut refined = top;
    while b - a > 1e-9 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        refined = refined.max(fc).max(fd);
    }
    Ok(refined)
}

/// Difference surface `𝓔_Gauss − 𝓔_subtracted` of squeezed-vacuum transfer
/// curves over `(ζ, τ)`, in columns `zeta,tau,value`.
///
/// Tables are sized so the subtracted state discards less than
/// [`SUBTRACTION_TAIL`].
pub fn degauss_difference(zeta_grid: &[f64], tau_grid: &[f64], s: usize) -> Result<ResultTable> {
    degauss_difference_with(zeta_grid, tau_grid, s, CutoffPolicy::default())
}

pub fn degauss_difference_with(
    zeta_grid: &[f64],
    tau_grid: &[f64],
    s: usize,
    policy: CutoffPolicy,
) -> Result<ResultTable> {
    let rows: Vec<Vec<f64>> = zeta_grid
        .par_iter()
        .map(|&zeta| {
            degauss_row(zeta, tau_grid, s, policy, AmplitudeMode::Signed).map_err(|e| e.at(&format!("ζ = {zeta}")))
        })
        .collect::<Result<_>>()?;
    let mut out = ResultTable::new(&["zeta", "tau", "value"]);
    for (zeta, row) in zeta_grid.iter().zip(rows) {
        for (tau, v) in tau_grid.iter().zip(row) {
            out.push_row(&[*zeta, *tau, v])?;
        }
    }
    out.set_meta("s", s.to_string());
    Ok(out)
}

/// One `ζ` row of the difference surface: Gaussian minus `s`-subtracted
/// transfer at each `τ`.
pub fn degauss_row(
    zeta: f64,
    tau_grid: &[f64],
    s: usize,
    policy: CutoffPolicy,
    mode: AmplitudeMode,
) -> Result<Vec<f64>> {
    if zeta == 0.0 {
        return Ok(vec![0.0; tau_grid.len()]);
    }
    let sf = make_tmsv(zeta);
    let source = build_table(&sf, &policy.source(&sf, s))?;
    let gauss = transfer_curve_with(&source, tau_grid, mode, false)?;
    let sub = transfer_curve_with(&formal_subtract(&source, s)?, tau_grid, mode, false)?;
    Ok(gauss
        .negativity
        .iter()
        .zip(&sub.negativity)
        .map(|(g, n)| g - n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{nu_minus, StandardForm};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_and_cutoff_guard() {
        let t = build_table(&make_tmsv(0.5), &Cutoffs::new(12, 12, 200)).unwrap();
        assert_eq!(formal_subtract(&t, 0).unwrap(), t);
        let small = build_table(&make_tmsv(0.5), &Cutoffs::new(2, 2, 50)).unwrap();
        assert!(matches!(formal_subtract(&small, 3), Err(Error::Cutoff(_))));
        let vac = build_table(&StandardForm::vacuum(), &Cutoffs::new(5, 5, 10)).unwrap();
        assert!(formal_subtract(&vac, 1).is_err());
        assert!(physical_subtract(&t, 1.0).is_err());
    }

    #[test]
    fn single_subtraction_weights() {
        let z: f64 = 0.86;
        let sf = make_tmsv(z);
        let src = subtraction_source(&sf, 1, 1e-13).unwrap();
        let out = formal_subtract(&src, 1).unwrap();
        let t2 = z.tanh().powi(2);
        // ∝ (n+1)² t^{2n}, normalized by (1 + t²)/(1 − t²)³.
        let norm = (1.0 + t2) / (1.0 - t2).powi(3);
        for n in 0..6 {
            let expect = ((n + 1) * (n + 1)) as f64 * t2.powi(n as i32) / norm;
            assert_abs_diff_eq!(out.diag[(n, n)], expect, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(out.diag[(1, 2)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn thermal_product_stays_factorized() {
        let sf = StandardForm::new(2.0, 3.0, 0.0, 0.0).unwrap();
        let src = build_table(&sf, &Cutoffs::new(70, 70, 0)).unwrap();
        let out = formal_subtract(&src, 2).unwrap();
        let d = &out.diag;
        for n in 0..5 {
            for m in 0..5 {
                assert_abs_diff_eq!(d[(n, m)] * d[(0, 0)], d[(n, 0)] * d[(0, m)], epsilon = 1e-14);
            }
        }
        assert_eq!(out.ggee.amax(), 0.0);
    }

    #[test]
    fn physical_approaches_formal() {
        let sf = make_tmsv(0.86);
        let src = subtraction_source(&sf, 1, 1e-12).unwrap();
        let formal = formal_subtract(&src, 1).unwrap();
        let phys = physical_subtract(&src, 1.0 - 1e-8).unwrap();
        for f in Family::ALL {
            assert_abs_diff_eq!((formal.family(f) - phys.family(f)).amax(), 0.0, epsilon = 1e-5);
        }
        assert_abs_diff_eq!(phys.normalization(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_equivalent() {
        for z in [0.3, 0.86] {
            assert_abs_diff_eq!(gaussian_equivalent_cm(z, 0).unwrap().m_plus, make_tmsv(z).m_plus);
            let sf = gaussian_equivalent_cm(z, 1).unwrap();
            assert_abs_diff_eq!(sf.n1, sf.n2, epsilon = 1e-9);
            assert_abs_diff_eq!(sf.m_plus, -sf.m_minus, epsilon = 1e-9);
            assert!(nu_minus(&sf).unwrap() < nu_minus(&make_tmsv(z)).unwrap());
        }
        assert_eq!(non_gaussianity(0.5, 0).unwrap(), 0.0);
        assert!(non_gaussianity(0.1, 1).unwrap() > 0.0);
        assert!(non_gaussianity(1.0, 1).unwrap() > 0.0);
    }

    #[test]
    fn max_transfer_basics() {
        let vac = build_table(&StandardForm::vacuum(), &Cutoffs::new(4, 4, 0)).unwrap();
        assert_eq!(max_transfer(&vac, (0.0, 6.3), 400).unwrap(), 0.0);
        let t = build_table(&make_tmsv(0.86), &Cutoffs::adaptive(&make_tmsv(0.86), 1e-12)).unwrap();
        let coarse = max_transfer(&t, (0.0, std::f64::consts::TAU), 50).unwrap();
        let fine = max_transfer(&t, (0.0, std::f64::consts::TAU), 400).unwrap();
        assert!(fine > 0.0 && coarse <= fine + 1e-9);
    }

    #[test]
    fn vacuum_column_is_zero() {
        let table = degauss_difference(&[0.0], &linspace(0.0, 6.0, 5), 1).unwrap();
        assert!(table.column("value").unwrap().iter().all(|v| *v == 0.0));
    }
}
