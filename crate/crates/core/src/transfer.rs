//! Two-qubit state produced by bilocal resonant Jaynes–Cummings coupling, and
//! its negativity.
//!
//! Each qubit starts in `|g⟩` and couples to one mode with the same strength.
//! Basis order is `(gg, ge, eg, ee)`.

use std::path::Path;

use nalgebra::{Matrix4, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaTable;

/// Tolerance on populations and coherence bounds before a state is rejected.
pub const POSITIVITY_TOL: f64 = 1e-6;

/// Two-qubit X-state: four populations and the two real coherences
/// `G = ⟨gg|ρ|ee⟩`, `D = ⟨ge|ρ|eg⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitXState {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
    pub g: f64,
    pub d: f64,
}

impl QubitXState {
    pub fn ground() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            e: 0.0,
            g: 0.0,
            d: 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        self.a + self.b + self.c + self.e
    }

    /// Checks trace, populations and the two coherence bounds.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if ![self.a, self.b, self.c, self.e, self.g, self.d]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::Domain("X-state has non-finite entries".into()));
        }
        if (self.trace() - 1.0).abs() > tol {
            return Err(Error::Domain(format!(
                "X-state trace {} differs from one",
                self.trace()
            )));
        }
        let pops = [self.a, self.b, self.c, self.e];
        if pops.iter().any(|&p| p < -tol) {
            return Err(Error::Domain(format!("negative population in {self:?}")));
        }
        if self.g.abs() > (self.a.max(0.0) * self.e.max(0.0)).sqrt() + tol
            || self.d.abs() > (self.b.max(0.0) * self.c.max(0.0)).sqrt() + tol
        {
            return Err(Error::Domain(format!("coherence exceeds population bound in {self:?}")));
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::from_diagonal(&nalgebra::Vector4::new(self.a, self.b, self.c, self.e));
        m[(0, 3)] = self.g;
        m[(3, 0)] = self.g;
        m[(1, 2)] = self.d;
        m[(2, 1)] = self.d;
        m
    }

    /// Partial transpose on the second qubit.
    pub fn partial_transpose(&self) -> Matrix4<f64> {
        let mut m = Matrix4::from_diagonal(&nalgebra::Vector4::new(self.a, self.b, self.c, self.e));
        m[(0, 3)] = self.d;
        m[(3, 0)] = self.d;
        m[(1, 2)] = self.g;
        m[(2, 1)] = self.g;
        m
    }

    /// Closed-form spectrum of the partial transpose, ascending.
    pub fn pt_eigenvalues(&self) -> [f64; 4] {
        let outer = (0.25 * (self.a - self.e).powi(2) + self.d * self.d).sqrt();
        let inner = (0.25 * (self.b - self.c).powi(2) + self.g * self.g).sqrt();
        let mut ev = [
            0.5 * (self.a + self.e) - outer,
            0.5 * (self.a + self.e) + outer,
            0.5 * (self.b + self.c) - inner,
            0.5 * (self.b + self.c) + inner,
        ];
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Spectrum of the partial transpose from a dense symmetric eigensolve.
    pub fn pt_eigenvalues_dense(&self) -> [f64; 4] {
        let eig = SymmetricEigen::new(self.partial_transpose());
        let mut ev = [
            eig.eigenvalues[0],
            eig.eigenvalues[1],
            eig.eigenvalues[2],
            eig.eigenvalues[3],
        ];
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Twice the modulus of the negative partial-transpose eigenvalue.
pub fn negativity(rho: &QubitXState) -> f64 {
    let ev = rho.pt_eigenvalues();
    #[cfg(debug_assertions)]
    {
        let dense = rho.pt_eigenvalues_dense();
        let scale = rho.to_matrix().amax().max(1.0);
        for (x, y) in ev.iter().zip(&dense) {
            debug_assert!(
                (x - y).abs() <= 1e-9 * scale,
                "closed-form PT spectrum {ev:?} vs {dense:?}"
            );
        }
    }
    2.0 * (-ev[0]).max(0.0)
}

/// Sign convention for the emission amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AmplitudeMode {
    /// `S_n = sin(τ√n)`, the exact propagator.
    #[default]
    Signed,
    /// `S_n = √(1 − C_n²) ≥ 0`.
    Unsigned,
}

/// `(C_n, S_n)` with `C_n = cos(τ√n)`, `S_n = sin(τ√n)`.
pub fn jc_amplitudes(n: usize, tau: f64) -> (f64, f64) {
    jc_amplitudes_with(n, tau, AmplitudeMode::Signed)
}

pub fn jc_amplitudes_with(n: usize, tau: f64, mode: AmplitudeMode) -> (f64, f64) {
    let (s, c) = (tau * (n as f64).sqrt()).sin_cos();
    match mode {
        AmplitudeMode::Signed => (c, s),
        AmplitudeMode::Unsigned => (c, (1.0 - c * c).max(0.0).sqrt()),
    }
}

pub fn assemble_state(table: &GammaTable, tau: f64) -> Result<QubitXState> {
    assemble_state_with(table, tau, AmplitudeMode::Signed)
}

/// Sums the coefficient families against the Jaynes–Cummings amplitudes.
/// `E` is fixed by the unit trace.
pub fn assemble_state_with(table: &GammaTable, tau: f64, mode: AmplitudeMode) -> Result<QubitXState> {
    if !tau.is_finite() {
        return Err(Error::Parameter(format!("interaction time {tau} is not finite")));
    }
    let (nc, mc) = (table.cutoffs.n_c, table.cutoffs.m_c);
    let top = nc.max(mc) + 1;
    let (cs, ss): (Vec<f64>, Vec<f64>) = (0..=top).map(|n| jc_amplitudes_with(n, tau, mode)).unzip();

    let mut st = QubitXState {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        e: 0.0,
        g: 0.0,
        d: 0.0,
    };
    for n in 0..=nc {
        let (cn, sn1) = (cs[n], ss[n + 1]);
        let mut a = 0.0;
        let mut b = 0.0;
        let mut c = 0.0;
        let mut gd = 0.0;
        let mut dd = 0.0;
        for m in 0..=mc {
            let (cm, sm1) = (cs[m], ss[m + 1]);
            a += cm * cm * table.diag[(n, m)];
            b += sm1 * sm1 * table.ge[(n, m)];
            c += cm * cm * table.eg[(n, m)];
            let w = cm * sm1;
            gd += w * table.ggee[(n, m)];
            dd += w * table.geeg[(n, m)];
        }
        st.a += cn * cn * a;
        st.b += cn * cn * b;
        st.c += sn1 * sn1 * c;
        st.g -= cn * sn1 * gd;
        st.d += cn * sn1 * dd;
    }
    st.e = 1.0 - st.a - st.b - st.c;
    if let Err(e) = st.validate(POSITIVITY_TOL) {
        return Err(Error::Truncation {
            msg: format!("{e} at τ = {tau}; raise the cutoffs"),
            deficit: 1.0 - table.normalization(),
        });
    }
    Ok(st)
}

/// `Σ S²_{n+1} S²_{m+1} γ^{n+1,m+1}_{n+1,m+1}` over the table: `E` summed
/// directly rather than by complement.
pub fn excited_population_direct(table: &GammaTable, tau: f64, mode: AmplitudeMode) -> f64 {
    let (nc, mc) = (table.cutoffs.n_c, table.cutoffs.m_c);
    let mut e = 0.0;
    for n in 0..nc {
        let sn = jc_amplitudes_with(n + 1, tau, mode).1;
        for m in 0..mc {
            let sm = jc_amplitudes_with(m + 1, tau, mode).1;
            e += sn * sn * sm * sm * table.diag[(n + 1, m + 1)];
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCurve {
    pub tau_grid: Vec<f64>,
    pub negativity: Vec<f64>,
    pub states: Option<Vec<QubitXState>>,
}

impl TransferCurve {
    pub fn max(&self) -> f64 {
        self.negativity.iter().cloned().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tau", "negativity"])?;
        for (t, n) in self.tau_grid.iter().zip(&self.negativity) {
            w.write_record([t.to_string(), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Largest pointwise difference to another curve on the same grid.
    pub fn sup_distance(&self, other: &TransferCurve) -> Result<f64> {
        if self.tau_grid.len() != other.tau_grid.len() {
            return Err(Error::Parameter("curves have different grids".into()));
        }
        Ok(self
            .negativity
            .iter()
            .zip(&other.negativity)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// `n` equally spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn transfer_curve(table: &GammaTable, tau_grid: &[f64]) -> Result<TransferCurve> {
    transfer_curve_with(table, tau_grid, AmplitudeMode::Signed, false)
}

pub fn transfer_curve_with(
    table: &GammaTable,
    tau_grid: &[f64],
    mode: AmplitudeMode,
    keep_states: bool,
) -> Result<TransferCurve> {
    if let Some(t) = tau_grid.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::Parameter(format!("interaction time {t} must be finite and ≥ 0")));
    }
    let states: Vec<QubitXState> = tau_grid
        .par_iter()
        .map(|&t| assemble_state_with(table, t, mode))
        .collect::<Result<_>>()?;
    Ok(TransferCurve {
        tau_grid: tau_grid.to_vec(),
        negativity: states.iter().map(negativity).collect(),
        states: keep_states.then_some(states),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::{build_table, Cutoffs};
    use crate::gaussian::{make_tmsv, StandardForm};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn amplitudes() {
        assert_eq!(jc_amplitudes(0, 2.3), (1.0, 0.0));
        let (c, s) = jc_amplitudes(1, FRAC_PI_2);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-16);
        let (c, s) = jc_amplitudes(4, PI);
        assert_abs_diff_eq!(c, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
        let (_, s) = jc_amplitudes(1, 4.0);
        assert!(s < 0.0);
        assert!(jc_amplitudes_with(1, 4.0, AmplitudeMode::Unsigned).1 > 0.0);
    }

    #[test]
    fn negativity_examples() {
        let bell = QubitXState {
            a: 0.5,
            e: 0.5,
            g: 0.5,
            ..QubitXState::ground()
        };
        assert_abs_diff_eq!(negativity(&bell), 1.0, epsilon = 1e-15);
        assert_eq!(negativity(&QubitXState::ground()), 0.0);
        let x = QubitXState {
            a: 0.4,
            b: 0.1,
            c: 0.1,
            e: 0.4,
            g: 0.3,
            d: 0.0,
        };
        assert_abs_diff_eq!(negativity(&x), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn no_interaction_and_vacuum() {
        let t = build_table(&make_tmsv(0.86), &Cutoffs::default()).unwrap();
        let s = assemble_state(&t, 0.0).unwrap();
        assert_abs_diff_eq!(s.a, t.normalization(), epsilon = 1e-15);
        assert_eq!((s.b, s.c, s.g, s.d), (0.0, 0.0, 0.0, 0.0));
        let v = build_table(&StandardForm::vacuum(), &Cutoffs::default()).unwrap();
        for tau in [0.3, 1.7, 5.0] {
            assert_eq!(assemble_state(&v, tau).unwrap(), QubitXState::ground());
        }
        let curve = transfer_curve(&v, &linspace(0.0, TAU, 50)).unwrap();
        assert_eq!(curve.max(), 0.0);
    }

    #[test]
    fn complement_matches_direct_sum() {
        let sf = make_tmsv(0.6);
        let t = build_table(&sf, &Cutoffs::adaptive(&sf, 1e-13)).unwrap();
        for tau in [0.4, 1.9, 3.3] {
            let s = assemble_state(&t, tau).unwrap();
            let direct = excited_population_direct(&t, tau, AmplitudeMode::Signed);
            assert_abs_diff_eq!(s.e, direct, epsilon = 1e-11);
        }
    }

    #[test]
    fn not_periodic_in_tau() {
        let t = build_table(&make_tmsv(0.86), &Cutoffs::default()).unwrap();
        let a = transfer_curve(&t, &linspace(0.0, TAU, 40)).unwrap();
        let b = transfer_curve(&t, &linspace(TAU, 2.0 * TAU, 40)).unwrap();
        assert!(a.sup_distance(&b).unwrap() > 1e-3);
    }

    #[test]
    fn curve_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let t = build_table(&make_tmsv(0.5), &Cutoffs::new(10, 10, 100)).unwrap();
        let c = transfer_curve(&t, &linspace(0.0, 1.0, 3)).unwrap();
        c.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("tau,negativity\n0,"));
        assert_eq!(text.lines().count(), 4);
        assert!(transfer_curve(&t, &[-1.0]).is_err());
    }
}
