//! Two-mode Gaussian resources at the covariance-matrix level.
//!
//! Quadratures are `x = a + a†`, `y = i(a† − a)`, ordered `(x1, y1, x2, y2)`,
//! so the vacuum covariance matrix is the identity. Every other module in the
//! crate uses the same convention.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on symplectic eigenvalues for the bona fide check.
pub const BONA_FIDE_TOL: f64 = 1e-8;

/// Default tolerance for the strict entanglement test `ν₋ < 1 − tol`.
pub const ENTANGLEMENT_TOL: f64 = 1e-9;

/// Block-diagonal symplectic form with 2×2 blocks `[[0, 1], [−1, 0]]`.
pub fn omega() -> Matrix4<f64> {
    let mut o = Matrix4::zeros();
    o[(0, 1)] = 1.0;
    o[(1, 0)] = -1.0;
    o[(2, 3)] = 1.0;
    o[(3, 2)] = -1.0;
    o
}

/// Symmetric 4×4 matrix of symmetrized second moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix {
    v: Matrix4<f64>,
}

#[derive(Serialize, Deserialize)]
struct CovarianceRepr {
    v: [[f64; 4]; 4],
}

impl Serialize for CovarianceMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CovarianceRepr { v: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CovarianceMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CovarianceRepr::deserialize(d)?;
        CovarianceMatrix::from_rows(repr.v).map_err(serde::de::Error::custom)
    }
}

impl CovarianceMatrix {
    /// Wraps a matrix, symmetrizing it. Fails if the input is visibly
    /// non-symmetric or not finite. Physicality is checked separately.
    pub fn new(v: Matrix4<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("covariance matrix has non-finite entries".into()));
        }
        let scale = v.amax().max(1.0);
        let asym = (v - v.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Domain(format!(
                "covariance matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self {
            v: (v + v.transpose()) * 0.5,
        })
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self> {
        Self::new(Matrix4::from_fn(|i, j| rows[i][j]))
    }

    pub fn identity() -> Self {
        Self { v: Matrix4::identity() }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.v
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut r = [[0.0; 4]; 4];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.v[(i, j)];
            }
        }
        r
    }

    pub fn block_a(&self) -> Matrix2<f64> {
        self.v.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn block_b(&self) -> Matrix2<f64> {
        self.v.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn block_c(&self) -> Matrix2<f64> {
        self.v.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// Returns `S V Sᵀ`.
    pub fn transformed(&self, s: &SymplecticOp) -> Self {
        let v = s.s * self.v * s.s.transpose();
        Self {
            v: (v + v.transpose()) * 0.5,
        }
    }

    pub fn is_bona_fide(&self) -> bool {
        self.check_bona_fide().is_ok()
    }

    /// Positive definite with both symplectic eigenvalues at least `1 − tol`.
    pub fn check_bona_fide(&self) -> Result<()> {
        let a = self.block_a();
        if !(self.v[(0, 0)] > 0.0 && a.determinant() > 0.0 && self.v.determinant() > 0.0) {
            return Err(Error::Domain("covariance matrix is not positive definite".into()));
        }
        let (lo, _) = symplectic_eigenvalues(self);
        if lo < 1.0 - BONA_FIDE_TOL {
            return Err(Error::Domain(format!(
                "covariance matrix violates the uncertainty principle (ν = {lo})"
            )));
        }
        Ok(())
    }
}

/// Canonical form reachable by local symplectic operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardForm {
    pub n1: f64,
    pub n2: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

impl StandardForm {
    /// Validated constructor.
    pub fn new(n1: f64, n2: f64, m_plus: f64, m_minus: f64) -> Result<Self> {
        let sf = Self {
            n1,
            n2,
            m_plus,
            m_minus,
        };
        sf.validate()?;
        Ok(sf)
    }

    pub fn vacuum() -> Self {
        Self {
            n1: 1.0,
            n2: 1.0,
            m_plus: 0.0,
            m_minus: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            n1,
            n2,
            m_plus,
            m_minus,
        } = *self;
        if ![n1, n2, m_plus, m_minus].iter().all(|x| x.is_finite()) {
            return Err(Error::Parameter("standard form has non-finite entries".into()));
        }
        if n1 < 1.0 - BONA_FIDE_TOL || n2 < 1.0 - BONA_FIDE_TOL {
            return Err(Error::Domain(format!(
                "local parameters must be ≥ 1 (n1={n1}, n2={n2})"
            )));
        }
        if m_plus < m_minus.abs() - 1e-12 * m_plus.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "standard form requires m_plus ≥ |m_minus| (m_plus={m_plus}, m_minus={m_minus})"
            )));
        }
        self.to_covariance().check_bona_fide()
    }

    pub fn to_covariance(&self) -> CovarianceMatrix {
        let mut v = Matrix4::zeros();
        v[(0, 0)] = self.n1;
        v[(1, 1)] = self.n1;
        v[(2, 2)] = self.n2;
        v[(3, 3)] = self.n2;
        v[(0, 2)] = self.m_plus;
        v[(2, 0)] = self.m_plus;
        v[(1, 3)] = self.m_minus;
        v[(3, 1)] = self.m_minus;
        CovarianceMatrix { v }
    }

    /// Exchanges the roles of the two modes.
    pub fn swapped(&self) -> Self {
        Self {
            n1: self.n2,
            n2: self.n1,
            ..*self
        }
    }

    /// Covariance determinant `(n1 n2 − m₊²)(n1 n2 − m₋²)`.
    pub fn det(&self) -> f64 {
        let p = self.n1 * self.n2;
        (p - self.m_plus * self.m_plus) * (p - self.m_minus * self.m_minus)
    }
}

/// Real 4×4 matrix preserving the symplectic form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticOp {
    s: Matrix4<f64>,
}

impl SymplecticOp {
    pub fn new(s: Matrix4<f64>) -> Result<Self> {
        let o = omega();
        let err = (s * o * s.transpose() - o).amax();
        if err > 1e-10 * s.amax().powi(2).max(1.0) {
            return Err(Error::Domain(format!("matrix is not symplectic (residual {err:e})")));
        }
        Ok(Self { s })
    }

    pub fn identity() -> Self {
        Self { s: Matrix4::identity() }
    }

    /// Direct sum of two single-mode operations; each must have unit determinant.
    pub fn local(s1: Matrix2<f64>, s2: Matrix2<f64>) -> Result<Self> {
        let mut s = Matrix4::zeros();
        s.fixed_view_mut::<2, 2>(0, 0).copy_from(&s1);
        s.fixed_view_mut::<2, 2>(2, 2).copy_from(&s2);
        Self::new(s)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.s
    }

    pub fn compose(&self, inner: &SymplecticOp) -> SymplecticOp {
        SymplecticOp { s: self.s * inner.s }
    }
}

/// Parameters of a squeezed thermal pair mixed on a beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceParams {
    pub s1: f64,
    pub s2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub transmittivity: f64,
    pub nbar1: f64,
    pub nbar2: f64,
}

impl ResourceParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.s1,
            self.s2,
            self.phi1,
            self.phi2,
            self.transmittivity,
            self.nbar1,
            self.nbar2,
        ];
        if !all.iter().all(|x| x.is_finite()) {
            return Err(Error::Parameter("resource parameters must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.transmittivity) {
            return Err(Error::Parameter(format!(
                "transmittivity {} outside [0, 1]",
                self.transmittivity
            )));
        }
        if self.nbar1 < 0.0 || self.nbar2 < 0.0 {
            return Err(Error::Parameter("thermal occupations must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Two-mode squeezed vacuum of squeezing `zeta`, in standard form.
pub fn make_tmsv(zeta: f64) -> StandardForm {
    let r = 2.0 * zeta.abs();
    StandardForm {
        n1: r.cosh(),
        n2: r.cosh(),
        m_plus: r.sinh(),
        m_minus: -r.sinh(),
    }
}

/// Two-mode squeezed thermal state: both thermal modes of occupation `nbar`
/// squeezed by `zeta`, so every entry is `(2n̄ + 1)` times the vacuum case.
pub fn make_thermal_tmsv(zeta: f64, nbar: f64) -> Result<StandardForm> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::Parameter(format!(
            "thermal occupation {nbar} must be finite and ≥ 0"
        )));
    }
    let f = 2.0 * nbar + 1.0;
    let t = make_tmsv(zeta);
    StandardForm::new(f * t.n1, f * t.n2, f * t.m_plus, f * t.m_minus)
}

fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, s, -s, c)
}

/// Covariance matrix of thermal modes that are squeezed, rotated and then
/// mixed on a beam splitter of the given transmittivity.
pub fn make_squeezed_thermal_bs(p: &ResourceParams) -> Result<CovarianceMatrix> {
    p.validate()?;
    let mut v_th = Matrix4::identity();
    v_th[(0, 0)] = 2.0 * p.nbar1 + 1.0;
    v_th[(1, 1)] = 2.0 * p.nbar1 + 1.0;
    v_th[(2, 2)] = 2.0 * p.nbar2 + 1.0;
    v_th[(3, 3)] = 2.0 * p.nbar2 + 1.0;

    let mut sq = Matrix4::zeros();
    sq[(0, 0)] = (-p.s1).exp();
    sq[(1, 1)] = p.s1.exp();
    sq[(2, 2)] = (-p.s2).exp();
    sq[(3, 3)] = p.s2.exp();

    let mut rot = Matrix4::zeros();
    rot.fixed_view_mut::<2, 2>(0, 0).copy_from(&rotation(p.phi1));
    rot.fixed_view_mut::<2, 2>(2, 2).copy_from(&rotation(p.phi2));

    let t = p.transmittivity.sqrt();
    let r = (1.0 - p.transmittivity).sqrt();
    let mut bs = Matrix4::zeros();
    for i in 0..2 {
        bs[(i, i)] = t;
        bs[(i + 2, i + 2)] = t;
        bs[(i, i + 2)] = -r;
        bs[(i + 2, i)] = r;
    }

    let m = sq * rot * bs;
    let cm = CovarianceMatrix::new(m.transpose() * v_th * m)?;
    cm.check_bona_fide()?;
    Ok(cm)
}

/// Signed 2×2 singular value decomposition `M = R(φ)·diag(σ1, σ2)·R(θ)` with
/// proper rotations only, `σ1 ≥ |σ2|` and `σ1 σ2 = det M`.
fn signed_svd(m: &Matrix2<f64>) -> (Matrix2<f64>, f64, f64, Matrix2<f64>) {
    let e = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let f = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let g = 0.5 * (m[(1, 0)] + m[(0, 1)]);
    let h = 0.5 * (m[(1, 0)] - m[(0, 1)]);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    let theta = 0.5 * (a2 - a1);
    let phi = 0.5 * (a2 + a1);
    // R(φ) here rotates counter-clockwise: [[c, −s], [s, c]].
    let ccw = |a: f64| {
        let (s, c) = a.sin_cos();
        Matrix2::new(c, -s, s, c)
    };
    (ccw(phi), q + r, q - r, ccw(theta))
}

fn sqrt_spd2(a: &Matrix2<f64>) -> Matrix2<f64> {
    // √A = (A + √det·I)/√(tr A + 2√det) for symmetric positive definite 2×2.
    let s = a.determinant().sqrt();
    let t = (a.trace() + 2.0 * s).sqrt();
    (a + Matrix2::identity() * s) / t
}

/// Reduces a bona fide covariance matrix to standard form.
///
/// The parameters come from the local symplectic invariants
/// `det A`, `det B`, `det C` and `det V`. The returned operation `L`
/// satisfies `L V Lᵀ = V_sf`.
pub fn to_standard_form(v: &CovarianceMatrix) -> Result<(StandardForm, SymplecticOp)> {
    v.check_bona_fide()?;
    let a = v.block_a();
    let b = v.block_b();
    let c = v.block_c();
    let n1 = a.determinant().sqrt();
    let n2 = b.determinant().sqrt();
    let det_c = c.determinant();
    let det_v = v.matrix().determinant();

    let p = n1 * n2;
    let sum_sq = (p * p + det_c * det_c - det_v) / p;
    let scale = sum_sq.abs().max(1.0);
    let disc = sum_sq * sum_sq - 4.0 * det_c * det_c;
    if disc < -1e-9 * scale * scale {
        return Err(Error::numeric("standard-form quadratic has no real roots", disc));
    }

    let s1 = sqrt_spd2(&a).try_inverse().unwrap() * n1.sqrt();
    let s2 = sqrt_spd2(&b).try_inverse().unwrap() * n2.sqrt();
    let c_scaled = s1 * c * s2.transpose();
    // The signed singular values solve the same quadratic as the invariants
    // (σ1² + σ2² = sum_sq, σ1 σ2 = det C) without its loss of precision when
    // the roots coincide.
    let (u, m_plus, m_minus, w) = signed_svd(&c_scaled);
    let op = SymplecticOp::local(u.transpose() * s1, w * s2)?;

    let sf = StandardForm {
        n1,
        n2,
        m_plus,
        m_minus,
    };
    Ok((sf, op))
}

/// Smallest symplectic eigenvalue of the partially transposed state.
pub fn nu_minus(sf: &StandardForm) -> Result<f64> {
    let delta = sf.n1 * sf.n1 + sf.n2 * sf.n2 - 2.0 * sf.m_plus * sf.m_minus;
    let det_v = sf.det();
    let tol = 1e-12 * delta.abs().max(1.0).powi(2);
    let inner = delta * delta - 4.0 * det_v;
    if inner < -tol {
        return Err(Error::numeric("negative discriminant in ν₋", inner));
    }
    let root = inner.max(0.0).sqrt();
    let denom = delta + root;
    if denom <= 0.0 {
        return Err(Error::numeric("degenerate invariant Δ in ν₋", denom));
    }
    // ν₋² = (Δ − √(Δ² − 4 det V))/2, rationalized.
    let nu_sq = 2.0 * det_v / denom;
    if nu_sq < -tol {
        return Err(Error::numeric("negative radicand in ν₋", nu_sq));
    }
    Ok(nu_sq.max(0.0).sqrt())
}

/// `ν₋ < 1 − tol`. The boundary ν₋ = 1 (e.g. the vacuum) is separable.
pub fn is_entangled(sf: &StandardForm, tol: f64) -> Result<bool> {
    Ok(nu_minus(sf)? < 1.0 - tol)
}

/// Symmetric thermal-loss evolution of the covariance matrix.
pub fn dissipate(v0: &CovarianceMatrix, big_n: f64, gamma_t: f64) -> Result<CovarianceMatrix> {
    if !(big_n >= 0.0) || !(gamma_t >= 0.0) {
        return Err(Error::Parameter(format!(
            "bath occupation and dissipation time must be ≥ 0 (N={big_n}, Γt={gamma_t})"
        )));
    }
    let decay = (-gamma_t).exp();
    let bath = (2.0 * big_n + 1.0) * (1.0 - decay);
    let v = Matrix4::identity() * bath + v0.matrix() * decay;
    CovarianceMatrix::new(v)
}

/// Closed-form dissipation time beyond which a two-mode squeezed vacuum is
/// reported separable, as printed in the source literature.
///
/// Returns `+∞` for a zero-temperature bath. This expression does not agree
/// with [`separability_time`]; see that function.
pub fn dissipation_threshold(zeta: f64, big_n: f64) -> Result<f64> {
    if !(big_n >= 0.0) || !zeta.is_finite() {
        return Err(Error::Parameter(format!(
            "invalid threshold inputs (ζ={zeta}, N={big_n})"
        )));
    }
    if big_n == 0.0 {
        return Ok(f64::INFINITY);
    }
    let r2 = 2.0 * zeta;
    let num = 4.0 * big_n * (big_n + 1.0) + r2.sinh() - r2.cosh() + 1.0;
    let den = 4.0 * big_n * big_n + 4.0 * big_n;
    Ok((num / den).sqrt().ln())
}

/// Dissipation time at which ν₋ of a thermally damped two-mode squeezed
/// vacuum reaches one: `ln((2N + 1 − e^{−2|ζ|}) / 2N)`.
pub fn separability_time(zeta: f64, big_n: f64) -> Result<f64> {
    if !(big_n >= 0.0) || !zeta.is_finite() {
        return Err(Error::Parameter(format!(
            "invalid threshold inputs (ζ={zeta}, N={big_n})"
        )));
    }
    if big_n == 0.0 {
        return Ok(f64::INFINITY);
    }
    let squeezed = (-2.0 * zeta.abs()).exp();
    Ok(((2.0 * big_n + 1.0 - squeezed) / (2.0 * big_n)).ln())
}

/// Thermal occupation at which a thermalized two-mode squeezed vacuum becomes
/// separable.
pub fn thermal_threshold(zeta: f64) -> f64 {
    ((2.0 * zeta).exp() - 1.0) / 2.0
}

/// Symplectic eigenvalues `(ν_small, ν_large)`.
///
/// For positive definite input these are the singular values of
/// `V^{1/2} Ω V^{1/2}`, which stay accurate when the two coincide (pure
/// states). Otherwise the two-mode invariants are used.
pub fn symplectic_eigenvalues(v: &CovarianceMatrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(v.v);
    if eig.eigenvalues.min() > 0.0 {
        let root = eig.eigenvalues.map(f64::sqrt);
        let half = eig.eigenvectors * Matrix4::from_diagonal(&root) * eig.eigenvectors.transpose();
        let sv = (half * omega() * half).singular_values();
        return (sv.min(), sv.max());
    }
    let delta = v.block_a().determinant() + v.block_b().determinant() + 2.0 * v.block_c().determinant();
    let det_v = v.matrix().determinant();
    let root = (delta * delta - 4.0 * det_v).max(0.0).sqrt();
    let hi_sq = 0.5 * (delta + root);
    let lo_sq = if hi_sq > 0.0 { det_v / hi_sq } else { 0.0 };
    (lo_sq.max(0.0).sqrt(), hi_sq.max(0.0).sqrt())
}

fn entropy_term(nu: f64) -> f64 {
    let plus = 0.5 * (nu + 1.0);
    let minus = 0.5 * (nu - 1.0);
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    xlnx(plus) - xlnx(minus)
}

/// Von Neumann entropy (nats) of the Gaussian state with this covariance matrix.
pub fn von_neumann_entropy(v: &CovarianceMatrix) -> Result<f64> {
    let (lo, hi) = symplectic_eigenvalues(v);
    if lo < 1.0 - BONA_FIDE_TOL {
        return Err(Error::Domain(format!("symplectic eigenvalue {lo} below one")));
    }
    Ok(entropy_term(lo.max(1.0)) + entropy_term(hi.max(1.0)))
}

/// Sampling ranges for [`random_resource`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceBounds {
    pub squeezing: (f64, f64),
    pub phase: (f64, f64),
    pub transmittivity: (f64, f64),
    pub nbar: (f64, f64),
}

impl Default for ResourceBounds {
    fn default() -> Self {
        Self {
            squeezing: (-1.2, 1.2),
            phase: (0.0, std::f64::consts::TAU),
            transmittivity: (0.25, 0.75),
            nbar: (0.0, 0.5),
        }
    }
}

impl ResourceBounds {
    fn validate(&self) -> Result<()> {
        let ranges = [self.squeezing, self.phase, self.transmittivity, self.nbar];
        if ranges
            .iter()
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::Parameter("sampling ranges must be finite with lo ≤ hi".into()));
        }
        if self.transmittivity.0 < 0.0 || self.transmittivity.1 > 1.0 || self.nbar.0 < 0.0 {
            return Err(Error::Parameter("sampling ranges leave the physical domain".into()));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> ResourceParams {
        let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        ResourceParams {
            s1: draw(self.squeezing),
            s2: draw(self.squeezing),
            phi1: draw(self.phase),
            phi2: draw(self.phase),
            transmittivity: draw(self.transmittivity),
            nbar1: draw(self.nbar),
            nbar2: draw(self.nbar),
        }
    }
}

/// Draws an entangled squeezed-thermal beam-splitter resource.
pub fn random_resource(seed: u64, bounds: &ResourceBounds) -> Result<CovarianceMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_resource_with(&mut rng, bounds)
}

/// As [`random_resource`] but continues an existing generator stream.
pub fn random_resource_with(rng: &mut impl Rng, bounds: &ResourceBounds) -> Result<CovarianceMatrix> {
    bounds.validate()?;
    for _ in 0..1000 {
        let params = bounds.sample(rng);
        let cm = make_squeezed_thermal_bs(&params)?;
        let (sf, _) = to_standard_form(&cm)?;
        if is_entangled(&sf, ENTANGLEMENT_TOL)? {
            return Ok(cm);
        }
    }
    Err(Error::Sampling("1000 consecutive separable draws".into()))
}
