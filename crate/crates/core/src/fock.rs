//! Brute-force truncated Fock-space states.
//!
//! Everything here is built from ladder-operator matrix elements only, so
//! agreement with [`crate::gamma`] is an independent check.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::transfer::QubitXState;

/// Largest truncation accepted for full density-matrix negativities.
pub const DENSITY_NEGATIVITY_MAX: usize = 24;

/// Tolerated residue outside the X pattern after the interaction.
pub const X_STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FockRepr {
    /// `ψ(n, m)` on `|n, m⟩`.
    Pure(DMatrix<Complex64>),
    /// `⟨n, m|ρ|p, q⟩` stored at `((n·d + m)·d + p)·d + q` with `d = N_F + 1`.
    Density(Vec<Complex64>),
}

/// Two-mode state truncated to photon numbers `≤ truncation` in each mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FockTwoModeState {
    pub repr: FockRepr,
    pub truncation: usize,
}

impl FockTwoModeState {
    pub fn pure(amplitudes: DMatrix<Complex64>) -> Result<Self> {
        if amplitudes.nrows() != amplitudes.ncols() || amplitudes.nrows() == 0 {
            return Err(Error::Parameter("amplitude matrix must be square and non-empty".into()));
        }
        let truncation = amplitudes.nrows() - 1;
        let mut st = Self {
            repr: FockRepr::Pure(amplitudes),
            truncation,
        };
        st.normalize()?;
        Ok(st)
    }

    pub fn density(truncation: usize, entries: Vec<Complex64>) -> Result<Self> {
        let d = truncation + 1;
        if entries.len() != d.pow(4) {
            return Err(Error::Parameter(format!(
                "density needs {} entries, got {}",
                d.pow(4),
                entries.len()
            )));
        }
        let mut st = Self {
            repr: FockRepr::Density(entries),
            truncation,
        };
        let herm = st.hermiticity_defect();
        if herm > 1e-10 {
            return Err(Error::Domain(format!(
                "density matrix is not Hermitian (defect {herm:e})"
            )));
        }
        st.normalize()?;
        Ok(st)
    }

    fn dim(&self) -> usize {
        self.truncation + 1
    }

    /// `⟨n, m|ρ|p, q⟩`, zero outside the truncation.
    pub fn element(&self, n: usize, m: usize, p: usize, q: usize) -> Complex64 {
        let d = self.dim();
        if n >= d || m >= d || p >= d || q >= d {
            return Complex64::new(0.0, 0.0);
        }
        match &self.repr {
            FockRepr::Pure(psi) => psi[(n, m)] * psi[(p, q)].conj(),
            FockRepr::Density(rho) => rho[((n * d + m) * d + p) * d + q],
        }
    }

    pub fn population(&self, n: usize, m: usize) -> f64 {
        self.element(n, m, n, m).re
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            FockRepr::Pure(psi) => psi.iter().map(|c| c.norm_sqr()).sum(),
            FockRepr::Density(_) => {
                let d = self.dim();
                (0..d)
                    .flat_map(|n| (0..d).map(move |m| (n, m)))
                    .map(|(n, m)| self.population(n, m))
                    .sum()
            }
        }
    }

    fn normalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::Domain(format!("state has zero or invalid norm ({tr})")));
        }
        match &mut self.repr {
            FockRepr::Pure(psi) => *psi /= Complex64::new(tr.sqrt(), 0.0),
            FockRepr::Density(rho) => rho.iter_mut().for_each(|x| *x /= tr),
        }
        Ok(())
    }

    fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for n in 0..d {
            for m in 0..d {
                for p in 0..d {
                    for q in 0..d {
                        worst = worst.max((self.element(n, m, p, q) - self.element(p, q, n, m).conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// Probability on the outermost shell (`n = N_F` or `m = N_F`).
    pub fn boundary_mass(&self) -> f64 {
        let nf = self.truncation;
        (0..=nf)
            .map(|k| self.population(nf, k) + self.population(k, nf))
            .sum::<f64>()
            - self.population(nf, nf)
    }

    /// Density-matrix form of the same state.
    pub fn to_density(&self) -> Self {
        let d = self.dim();
        let mut rho = vec![Complex64::new(0.0, 0.0); d.pow(4)];
        for n in 0..d {
            for m in 0..d {
                for p in 0..d {
                    for q in 0..d {
                        rho[((n * d + m) * d + p) * d + q] = self.element(n, m, p, q);
                    }
                }
            }
        }
        Self {
            repr: FockRepr::Density(rho),
            truncation: self.truncation,
        }
    }
}

/// Two-mode squeezed vacuum `sech ζ Σ tanhⁿζ |n, n⟩`, renormalized on the
/// truncation. Fails if the discarded weight `tanh^{2(N_F+1)} ζ` exceeds `1e−12`.
pub fn tmsv_fock(zeta: f64, n_f: usize) -> Result<FockTwoModeState> {
    if !zeta.is_finite() {
        return Err(Error::Parameter(format!("squeezing {zeta} is not finite")));
    }
    let t = zeta.tanh();
    let tail = t.abs().powi(2 * (n_f as i32 + 1));
    if tail > 1e-12 {
        return Err(Error::Cutoff(format!(
            "truncation {n_f} leaves tail weight {tail:e} for ζ = {zeta}"
        )));
    }
    let sech = 1.0 / zeta.cosh();
    let mut psi = DMatrix::from_element(n_f + 1, n_f + 1, Complex64::new(0.0, 0.0));
    let mut c = sech;
    for n in 0..=n_f {
        psi[(n, n)] = Complex64::new(c, 0.0);
        c *= t;
    }
    FockTwoModeState::pure(psi)
}

/// Smallest truncation meeting the tail condition of [`tmsv_fock`].
pub fn tmsv_truncation(zeta: f64) -> usize {
    let t2 = zeta.tanh().powi(2);
    if t2 == 0.0 {
        return 0;
    }
    ((1e-12f64.ln() / t2.ln()).ceil() as usize).saturating_sub(1).max(1)
}

/// Thermal occupation probability `n̄ⁿ / (n̄ + 1)^{n+1}`.
pub fn thermal_weights(nbar: f64, n: usize) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let r = nbar / (nbar + 1.0);
    r.powi(n as i32) / (nbar + 1.0)
}

/// Product of two thermal states as a density matrix.
pub fn thermal_product(nbar1: f64, nbar2: f64, n_f: usize) -> Result<FockTwoModeState> {
    if !(nbar1 >= 0.0 && nbar2 >= 0.0) {
        return Err(Error::Parameter("thermal occupations must be ≥ 0".into()));
    }
    let d = n_f + 1;
    let mut rho = vec![Complex64::new(0.0, 0.0); d.pow(4)];
    for n in 0..d {
        for m in 0..d {
            rho[((n * d + m) * d + n) * d + m] =
                Complex64::new(thermal_weights(nbar1, n) * thermal_weights(nbar2, m), 0.0);
        }
    }
    FockTwoModeState::density(n_f, rho)
}

fn sqrt_falling(n: usize, s: usize) -> f64 {
    // √(n (n−1) ⋯ (n−s+1)), the ladder-operator weight of aˢ on |n⟩.
    (0..s).map(|j| ((n - j) as f64).sqrt()).product()
}

/// Applies `aˢ ⊗ bˢ` to a pure state and renormalizes. The truncation drops
/// by `s`.
pub fn photon_subtract_fock(state: &FockTwoModeState, s: usize) -> Result<FockTwoModeState> {
    let FockRepr::Pure(psi) = &state.repr else {
        return Err(Error::Parameter("photon subtraction needs a pure input".into()));
    };
    if s == 0 {
        return Ok(state.clone());
    }
    if s > state.truncation {
        return Err(Error::Cutoff(format!(
            "cannot subtract {s} photons at truncation {}",
            state.truncation
        )));
    }
    let nf = state.truncation - s;
    let out = DMatrix::from_fn(nf + 1, nf + 1, |n, m| {
        psi[(n + s, m + s)] * sqrt_falling(n + s, s) * sqrt_falling(m + s, s)
    });
    FockTwoModeState::pure(out)
}

/// Truncation at which the `s`-photon-subtracted squeezed vacuum discards
/// less than `tail` of its weight.
pub fn subtracted_truncation(zeta: f64, s: usize, tail: f64) -> usize {
    let t2 = zeta.tanh().powi(2);
    if t2 == 0.0 {
        return s.max(1);
    }
    // Weights ∝ ((n+s)!/n!)² t^{2n}, accumulated in log space.
    let lw = |n: usize| 2.0 * ((n + 1)..=(n + s)).map(|j| (j as f64).ln()).sum::<f64>() + n as f64 * t2.ln();
    let mut logs = Vec::new();
    let mut n = 0;
    loop {
        logs.push(lw(n));
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if n > s + 2 && logs[n] < top + tail.ln() - 10.0 && logs[n] < logs[n - 1] {
            break;
        }
        n += 1;
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    // Suffix sums from the top end keep tails far below machine epsilon exact.
    let mut beyond = vec![0.0; w.len() + 1];
    for k in (0..w.len()).rev() {
        beyond[k] = beyond[k + 1] + w[k];
    }
    let k = (1..=w.len()).find(|&k| beyond[k] / total < tail).unwrap_or(w.len());
    k.max(tmsv_truncation(zeta).saturating_sub(s))
}

/// `s`-photon-subtracted squeezed vacuum with discarded weight below `tail`.
pub fn subtracted_tmsv(zeta: f64, s: usize, tail: f64) -> Result<FockTwoModeState> {
    let nf = subtracted_truncation(zeta, s, tail);
    photon_subtract_fock(&tmsv_fock(zeta, nf + s)?, s)
}

/// Exact bilocal interaction on `|gg⟩ ⊗ ρ` followed by the trace over both
/// modes. The reduced state must have X structure.
pub fn jc_evolve_trace(state: &FockTwoModeState, tau: f64) -> Result<QubitXState> {
    let d = state.truncation + 1;
    let amp: Vec<(f64, f64)> = (0..=d)
        .map(|n| {
            let (s, c) = (tau * (n as f64).sqrt()).sin_cos();
            (c, s)
        })
        .collect();
    let i = Complex64::new(0.0, 1.0);
    // For qubit configuration q: the field state (n, m) that lands on (f1, f2)
    // and the amplitude it picks up.
    let pre = |q: usize, f1: usize, f2: usize| -> (usize, usize, Complex64) {
        match q {
            0 => (f1, f2, Complex64::new(amp[f1].0 * amp[f2].0, 0.0)),
            1 => (f1, f2 + 1, -i * amp[f1].0 * amp[f2 + 1].1),
            2 => (f1 + 1, f2, -i * amp[f1 + 1].1 * amp[f2].0),
            _ => (f1 + 1, f2 + 1, Complex64::new(-amp[f1 + 1].1 * amp[f2 + 1].1, 0.0)),
        }
    };
    let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (q, row) in rho.iter_mut().enumerate() {
        for (qp, cell) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for f1 in 0..d {
                for f2 in 0..d {
                    let (n, m, x) = pre(q, f1, f2);
                    let (p, r, y) = pre(qp, f1, f2);
                    if n >= d || m >= d || p >= d || r >= d {
                        continue;
                    }
                    let el = state.element(n, m, p, r);
                    if el != Complex64::new(0.0, 0.0) {
                        acc += x * el * y.conj();
                    }
                }
            }
            *cell = acc;
        }
    }
    let x_pattern = |q: usize, qp: usize| q == qp || q + qp == 3;
    let mut residue: f64 = 0.0;
    for q in 0..4 {
        for qp in 0..4 {
            if !x_pattern(q, qp) {
                residue = residue.max(rho[q][qp].norm());
            } else {
                residue = residue.max(rho[q][qp].im.abs());
            }
        }
    }
    if residue > X_STRUCTURE_TOL {
        return Err(Error::Consistency(format!(
            "reduced qubit state is not a real X-state (residue {residue:e})"
        )));
    }
    Ok(QubitXState {
        a: rho[0][0].re,
        b: rho[1][1].re,
        c: rho[2][2].re,
        e: rho[3][3].re,
        g: rho[0][3].re,
        d: rho[1][2].re,
    })
}

/// Logarithmic negativity (base 2) of the two-mode state.
///
/// Pure states use their Schmidt coefficients; density matrices are partially
/// transposed and diagonalized, which is limited to small truncations.
pub fn cv_log_negativity(state: &FockTwoModeState) -> Result<f64> {
    match &state.repr {
        FockRepr::Pure(psi) => {
            let sv = psi.clone().singular_values();
            Ok((sv.sum().powi(2)).log2())
        }
        FockRepr::Density(_) => {
            if state.truncation > DENSITY_NEGATIVITY_MAX {
                return Err(Error::Cutoff(format!(
                    "density negativity limited to truncation {DENSITY_NEGATIVITY_MAX}"
                )));
            }
            let d = state.dim();
            let pt = DMatrix::from_fn(d * d, d * d, |row, col| {
                let (n, m) = (row / d, row % d);
                let (p, q) = (col / d, col % d);
                state.element(n, q, p, m)
            });
            let eig = SymmetricEigen::new(pt);
            let norm: f64 = eig.eigenvalues.iter().map(|x| x.abs()).sum();
            Ok(norm.log2())
        }
    }
}

/// `Tr(ρ O)` for an operator given by its action on basis kets.
fn expect(state: &FockTwoModeState, op: impl Fn(usize, usize) -> Option<(usize, usize, f64)>) -> Complex64 {
    let d = state.truncation + 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..d {
        for m in 0..d {
            if let Some((p, q, c)) = op(n, m) {
                // Tr(ρO) = Σ ⟨x|ρ|y⟩⟨y|O|x⟩ with O|n,m⟩ = c|p,q⟩.
                acc += state.element(n, m, p, q) * c;
            }
        }
    }
    acc
}

/// Symmetrized quadrature covariance matrix, `x = a + a†`, `y = i(a† − a)`.
///
/// Fails if more than `1e−10` of the weight sits on the outermost shell,
/// where ladder-operator moments are cut off.
pub fn second_moments(state: &FockTwoModeState) -> Result<CovarianceMatrix> {
    let edge = state.boundary_mass();
    if edge > 1e-10 {
        return Err(Error::Cutoff(format!("weight {edge:e} on the truncation boundary")));
    }
    let sq = |n: usize| (n as f64).sqrt();
    let a1 = expect(state, |n, m| (n >= 1).then(|| (n - 1, m, sq(n))));
    let a2 = expect(state, |n, m| (m >= 1).then(|| (n, m - 1, sq(m))));
    let aa1 = expect(state, |n, m| (n >= 2).then(|| (n - 2, m, sq(n) * sq(n - 1))));
    let aa2 = expect(state, |n, m| (m >= 2).then(|| (n, m - 2, sq(m) * sq(m - 1))));
    let n1 = expect(state, |n, m| Some((n, m, n as f64))).re;
    let n2 = expect(state, |n, m| Some((n, m, m as f64))).re;
    let u = expect(state, |n, m| (n >= 1 && m >= 1).then(|| (n - 1, m - 1, sq(n) * sq(m))));
    let w = expect(state, |n, m| (n >= 1).then(|| (n - 1, m + 1, sq(n) * sq(m + 1))));

    let mut v = nalgebra::Matrix4::zeros();
    v[(0, 0)] = 2.0 * aa1.re + 2.0 * n1 + 1.0;
    v[(1, 1)] = -2.0 * aa1.re + 2.0 * n1 + 1.0;
    v[(0, 1)] = 2.0 * aa1.im;
    v[(2, 2)] = 2.0 * aa2.re + 2.0 * n2 + 1.0;
    v[(3, 3)] = -2.0 * aa2.re + 2.0 * n2 + 1.0;
    v[(2, 3)] = 2.0 * aa2.im;
    v[(0, 2)] = 2.0 * u.re + 2.0 * w.re;
    v[(1, 3)] = -2.0 * u.re + 2.0 * w.re;
    v[(0, 3)] = -2.0 * w.im + 2.0 * u.im;
    v[(1, 2)] = 2.0 * w.im + 2.0 * u.im;
    let first = [2.0 * a1.re, 2.0 * a1.im, 2.0 * a2.re, 2.0 * a2.im];
    for r in 0..4 {
        for c in r..4 {
            v[(r, c)] -= first[r] * first[c];
            v[(c, r)] = v[(r, c)];
        }
    }
    CovarianceMatrix::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{make_tmsv, to_standard_form};
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix4;

    #[test]
    fn tmsv_construction() {
        let v = tmsv_fock(0.0, 0).unwrap();
        assert_eq!(v.population(0, 0), 1.0);
        let t = tmsv_fock(0.86, 60).unwrap();
        assert_abs_diff_eq!(t.trace(), 1.0, epsilon = 1e-12);
        let sech2 = 1.0 / 0.86f64.cosh().powi(2);
        for n in 0..5 {
            assert_abs_diff_eq!(
                t.population(n, n),
                sech2 * 0.86f64.tanh().powi(2 * n as i32),
                epsilon = 1e-12
            );
        }
        assert!(matches!(tmsv_fock(0.86, 10), Err(Error::Cutoff(_))));
    }

    #[test]
    fn thermal() {
        assert_eq!(thermal_weights(0.0, 0), 1.0);
        assert_eq!(thermal_weights(0.0, 3), 0.0);
        let s: f64 = (0..=80).map(|n| thermal_weights(1.0, n)).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(thermal_weights(0.5, 1), 0.5 / 2.25, epsilon = 1e-15);
    }

    #[test]
    fn subtraction() {
        let t = tmsv_fock(0.5, 40).unwrap();
        assert_eq!(photon_subtract_fock(&t, 0).unwrap(), t);
        let s = photon_subtract_fock(&t, 1).unwrap();
        assert_abs_diff_eq!(s.trace(), 1.0, epsilon = 1e-14);
        let th = 0.5f64.tanh();
        let FockRepr::Pure(psi) = &s.repr else { panic!() };
        let ratio = psi[(3, 3)].re / psi[(2, 2)].re;
        assert_abs_diff_eq!(ratio, 4.0 / 3.0 * th, epsilon = 1e-13);
        assert!(photon_subtract_fock(&tmsv_fock(0.0, 3).unwrap(), 1).is_err());
    }

    #[test]
    fn jc_trivial_cases() {
        let t = tmsv_fock(0.86, 60).unwrap();
        let x = jc_evolve_trace(&t, 0.0).unwrap();
        assert_abs_diff_eq!(x.a, 1.0, epsilon = 1e-14);
        let v = tmsv_fock(0.0, 4).unwrap();
        assert_eq!(jc_evolve_trace(&v, 1.3).unwrap(), QubitXState::ground());
        for tau in [0.5, 1.0, 4.0] {
            let x = jc_evolve_trace(&t, tau).unwrap();
            assert_abs_diff_eq!(x.trace(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn density_path_agrees_with_pure_path() {
        let t = tmsv_fock(0.3, 25).unwrap();
        let d = t.to_density();
        for tau in [0.7, 2.2] {
            let a = jc_evolve_trace(&t, tau).unwrap();
            let b = jc_evolve_trace(&d, tau).unwrap();
            assert_abs_diff_eq!(a.g, b.g, epsilon = 1e-14);
            assert_abs_diff_eq!(a.e, b.e, epsilon = 1e-14);
        }
        let small = tmsv_fock(0.2, 12).unwrap();
        let ln_pure = cv_log_negativity(&small).unwrap();
        let ln_dense = cv_log_negativity(&small.to_density()).unwrap();
        assert_abs_diff_eq!(ln_pure, ln_dense, epsilon = 1e-10);
    }

    #[test]
    fn log_negativity() {
        assert_abs_diff_eq!(
            cv_log_negativity(&tmsv_fock(0.0, 2).unwrap()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // Σ sech·tanhⁿ = sech/(1 − tanh), so E_N = 2 log₂(sech/(1 − tanh)) = 2ζ/ln 2.
        let z = 0.86;
        let a = cv_log_negativity(&tmsv_fock(z, 60).unwrap()).unwrap();
        let b = cv_log_negativity(&tmsv_fock(z, 120).unwrap()).unwrap();
        assert_abs_diff_eq!(a, 2.0 * z / 2f64.ln(), epsilon = 1e-8);
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        let s1 = cv_log_negativity(&subtracted_tmsv(z, 1, 1e-14).unwrap()).unwrap();
        assert!(s1 > a);
        let th = thermal_product(0.4, 0.2, 8).unwrap();
        assert_abs_diff_eq!(cv_log_negativity(&th).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn moments() {
        let vac = second_moments(&tmsv_fock(0.0, 3).unwrap()).unwrap();
        assert_abs_diff_eq!((vac.matrix() - Matrix4::identity()).amax(), 0.0, epsilon = 1e-15);
        let sf = make_tmsv(0.7);
        let t = second_moments(&tmsv_fock(0.7, tmsv_truncation(0.7) + 20).unwrap()).unwrap();
        assert_abs_diff_eq!((t.matrix() - sf.to_covariance().matrix()).amax(), 0.0, epsilon = 1e-8);
        let th = second_moments(&thermal_product(1.0, 1.0, 60).unwrap()).unwrap();
        assert_abs_diff_eq!((th.matrix() - Matrix4::identity() * 3.0).amax(), 0.0, epsilon = 1e-8);
        assert!(second_moments(&thermal_product(1.0, 1.0, 10).unwrap()).is_err());
    }

    #[test]
    fn moments_follow_phase_rotation() {
        // Amplitudes cₙ e^{−inθ} on mode 1 rotate its quadratures by θ.
        let z: f64 = 0.5;
        let theta: f64 = 0.7;
        let nf = tmsv_truncation(z) + 20;
        let base = tmsv_fock(z, nf).unwrap();
        let FockRepr::Pure(psi) = &base.repr else { panic!() };
        let rot = DMatrix::from_fn(nf + 1, nf + 1, |n, m| {
            psi[(n, m)] * Complex64::from_polar(1.0, -(n as f64) * theta)
        });
        let v = second_moments(&FockTwoModeState::pure(rot).unwrap()).unwrap();
        let (s, c) = theta.sin_cos();
        let mut r = Matrix4::identity();
        r[(0, 0)] = c;
        r[(0, 1)] = s;
        r[(1, 0)] = -s;
        r[(1, 1)] = c;
        let expect = r * make_tmsv(z).to_covariance().matrix() * r.transpose();
        assert!((v.matrix() - expect).amax() < 1e-9, "{} vs {}", v.matrix(), expect);
        let (sf, _) = to_standard_form(&v).unwrap();
        assert_abs_diff_eq!(sf.m_plus, make_tmsv(z).m_plus, epsilon = 1e-9);
    }

    #[test]
    fn truncation_doubling() {
        let s = subtracted_tmsv(0.5, 1, 1e-13).unwrap();
        let nf = s.truncation;
        let big = photon_subtract_fock(&tmsv_fock(0.5, 2 * nf + 1).unwrap(), 1).unwrap();
        let a = second_moments(&s).unwrap();
        let b = second_moments(&big).unwrap();
        assert_abs_diff_eq!((a.matrix() - b.matrix()).amax(), 0.0, epsilon = 1e-9);
        for tau in [0.9, 2.5] {
            let x = jc_evolve_trace(&s, tau).unwrap();
            let y = jc_evolve_trace(&big, tau).unwrap();
            assert_abs_diff_eq!(x.g, y.g, epsilon = 1e-9);
            assert_abs_diff_eq!(x.e, y.e, epsilon = 1e-9);
        }
    }
}
