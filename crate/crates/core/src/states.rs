//! Single-mode state representations: finite superpositions of coherent states,
//! truncated Fock-space density matrices, Gaussian states and the named state
//! families used by the witness examples.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::hermitian_eigenvalues;

/// Coherent amplitudes closer than this are considered identical.
pub const MERGE_TOLERANCE: f64 = 1e-8;
/// Superpositions whose norm falls below this are rejected.
pub const NORM_FLOOR: f64 = 1e-14;

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const PSD_TOLERANCE: f64 = 1e-10;

/// `<a|b> = exp(-|a|^2/2 - |b|^2/2 + a* b)`.
pub fn coherent_overlap(a: Complex64, b: Complex64) -> Complex64 {
    overlap_exponent(a, b).exp()
}

/// `log <a|b> = -|a - b|^2/2 + i Im(a* b)`, written without the cancellation of
/// `a* b - (|a|^2 + |b|^2)/2` at large amplitudes.
pub(crate) fn overlap_exponent(a: Complex64, b: Complex64) -> Complex64 {
    let d = b - a;
    Complex64::new(-0.5 * d.norm_sqr(), a.re * d.im - a.im * d.re)
}

/// Exponent of the `(k, l)` term of `e^{-|beta|^2/2} Phi(beta)` for a coherent
/// superposition: `-|beta - (a - b)|^2/2 + i [Im(a* b) + Im(beta conj(a + b))]`.
pub(crate) fn scaled_cf_exponent(beta: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    let d = b - a;
    let phase = a.re * d.im - a.im * d.re + (beta * (a + b).conj()).im;
    Complex64::new(-0.5 * (beta + d).norm_sqr(), phase)
}

fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// One `lambda |alpha>` term of a coherent-state superposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub lambda: Complex64,
    pub alpha: Complex64,
}

impl Term {
    pub fn new(lambda: Complex64, alpha: Complex64) -> Self {
        Self { lambda, alpha }
    }
}

impl From<(Complex64, Complex64)> for Term {
    fn from((lambda, alpha): (Complex64, Complex64)) -> Self {
        Self { lambda, alpha }
    }
}

/// `|Psi> = sum_i lambda_i |alpha_i>` with nonzero weights and pairwise distinct
/// amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SuperpositionRepr", into = "SuperpositionRepr")]
pub struct CoherentSuperposition {
    terms: Vec<Term>,
    normalized: bool,
}

#[derive(Serialize, Deserialize)]
struct SuperpositionRepr {
    terms: Vec<Term>,
}

impl TryFrom<SuperpositionRepr> for CoherentSuperposition {
    type Error = Error;
    fn try_from(r: SuperpositionRepr) -> Result<Self> {
        Self::new(r.terms)
    }
}

impl From<CoherentSuperposition> for SuperpositionRepr {
    fn from(s: CoherentSuperposition) -> Self {
        Self { terms: s.terms }
    }
}

impl CoherentSuperposition {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidState("superposition needs at least one term".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if !is_finite(t.lambda) || !is_finite(t.alpha) {
                return Err(Error::InvalidState(format!("term {i} is not finite")));
            }
            if t.lambda == Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidState(format!("term {i} has zero weight")));
            }
            for (j, u) in terms[..i].iter().enumerate() {
                if (t.alpha - u.alpha).norm() < MERGE_TOLERANCE {
                    return Err(Error::DegenerateSuperposition(format!(
                        "amplitudes of terms {j} and {i} coincide within {MERGE_TOLERANCE:e}"
                    )));
                }
            }
        }
        let mut s = Self { terms, normalized: false };
        s.normalized = (s.norm_sqr() - 1.0).abs() <= 1e-12;
        Ok(s)
    }

    pub fn from_pairs(pairs: &[(Complex64, Complex64)]) -> Result<Self> {
        Self::new(pairs.iter().copied().map(Term::from).collect())
    }

    /// The coherent state `|alpha>`.
    pub fn coherent(alpha: Complex64) -> Self {
        Self { terms: vec![Term::new(Complex64::new(1.0, 0.0), alpha)], normalized: true }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Gram matrix `G_{kl} = <alpha_k|alpha_l>`.
    pub fn gram_matrix(&self) -> DMatrix<Complex64> {
        let n = self.terms.len();
        DMatrix::from_fn(n, n, |k, l| coherent_overlap(self.terms[k].alpha, self.terms[l].alpha))
    }

    /// `<Psi|Psi>` together with the sum of the moduli of its terms, which sets the
    /// scale of the cancellation error.
    fn norm_sqr_with_scale(&self) -> (f64, f64) {
        let mut total = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for k in &self.terms {
            for l in &self.terms {
                let t = k.lambda.conj() * l.lambda * coherent_overlap(k.alpha, l.alpha);
                total += t;
                scale += t.norm();
            }
        }
        (total.re, scale)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr_with_scale().0
    }

    /// Rescales all weights by one positive factor so that `<Psi|Psi> = 1`.
    pub fn normalize(&self) -> Result<Self> {
        let (n2, scale) = self.norm_sqr_with_scale();
        if !(n2 > 0.0) || n2.sqrt() < NORM_FLOOR || n2 <= 64.0 * f64::EPSILON * scale {
            return Err(Error::DegenerateSuperposition(format!(
                "norm^2 = {n2:e} is numerically zero (term scale {scale:e})"
            )));
        }
        let f = 1.0 / n2.sqrt();
        let terms = self.terms.iter().map(|t| Term::new(t.lambda * f, t.alpha)).collect();
        Ok(Self { terms, normalized: true })
    }

    /// Displaces the state so the first amplitude sits at the origin and rescales the
    /// weights so the first one equals 1. The displacement phase
    /// `exp((alpha_1* alpha_i - alpha_1 alpha_i*)/2)` is absorbed into each weight, so
    /// `|Phi(beta)|` is unchanged.
    pub fn canonicalize(&self) -> Self {
        let first = self.terms[0];
        let a1 = first.alpha;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let phase = (0.5 * (a1.conj() * t.alpha - a1 * t.alpha.conj())).exp();
                Term::new(t.lambda / first.lambda * phase, t.alpha - a1)
            })
            .collect::<Vec<_>>();
        let mut s = Self { terms, normalized: false };
        s.normalized = (s.norm_sqr() - 1.0).abs() <= 1e-12;
        s
    }

    /// Phase-space rotation `alpha -> alpha e^{i phi}` of every amplitude.
    pub fn rotated(&self, phi: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phi);
        let terms = self.terms.iter().map(|t| Term::new(t.lambda, t.alpha * rot)).collect();
        Self { terms, normalized: self.normalized }
    }

    /// First and second normally ordered moments `(<a>, <a^2>, <a^dag a>)`.
    pub fn second_moments(&self) -> SecondMoments {
        let (mut a1, mut a2, mut n, mut d) = (
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        for k in &self.terms {
            for l in &self.terms {
                let w = k.lambda.conj() * l.lambda * coherent_overlap(k.alpha, l.alpha);
                d += w;
                a1 += w * l.alpha;
                a2 += w * l.alpha * l.alpha;
                n += w * k.alpha.conj() * l.alpha;
            }
        }
        SecondMoments { a: a1 / d.re, a2: a2 / d.re, n: n.re / d.re }
    }
}

/// `<a>`, `<a^2>` and `<a^dag a>` of a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondMoments {
    pub a: Complex64,
    pub a2: Complex64,
    pub n: f64,
}

impl SecondMoments {
    pub const VACUUM: Self = Self { a: Complex64::new(0.0, 0.0), a2: Complex64::new(0.0, 0.0), n: 0.0 };

    /// Variance of `x(phi) = e^{-i phi} a^dag + e^{i phi} a`; the vacuum level is 1.
    pub fn quadrature_variance(&self, phi: f64) -> f64 {
        let e2 = Complex64::from_polar(1.0, 2.0 * phi);
        1.0 + 2.0 * (self.n - self.a.norm_sqr()) + 2.0 * (e2 * (self.a2 - self.a * self.a)).re
    }

    /// `min_phi` of the quadrature variance.
    pub fn min_quadrature_variance(&self) -> f64 {
        1.0 + 2.0 * (self.n - self.a.norm_sqr()) - 2.0 * (self.a2 - self.a * self.a).norm()
    }

    pub fn max_quadrature_variance(&self) -> f64 {
        1.0 + 2.0 * (self.n - self.a.norm_sqr()) + 2.0 * (self.a2 - self.a * self.a).norm()
    }
}

/// Amplitudes `c_n` of a pure state in the truncated Fock basis, `0 <= n <= cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockStateVector {
    amps: Vec<Complex64>,
}

impl FockStateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty Fock vector".into()));
        }
        if amps.iter().any(|&c| !is_finite(c)) {
            return Err(Error::InvalidState("non-finite Fock amplitude".into()));
        }
        Ok(Self { amps })
    }

    /// The number state `|n>`.
    pub fn number(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); n + 1];
        amps[n] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    /// Truncation of the coherent state `|alpha>` to `0..=cutoff`, not renormalized.
    pub fn coherent(alpha: Complex64, cutoff: usize) -> Self {
        let mut amps = Vec::with_capacity(cutoff + 1);
        let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..=cutoff {
            if n > 0 {
                c *= alpha / (n as f64).sqrt();
            }
            amps.push(c);
        }
        Self { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < NORM_FLOOR {
            return Err(Error::DegenerateSuperposition("zero Fock vector".into()));
        }
        Ok(Self { amps: self.amps.iter().map(|c| c / n).collect() })
    }
}

/// Output of [`squeezed_vacuum_fock`]: the truncated (unrenormalized) state and the
/// probability weight lost beyond the cutoff.
#[derive(Clone, Debug)]
pub struct TruncatedState {
    pub state: FockStateVector,
    pub truncation_weight: f64,
}

/// Fock expansion of the squeezed vacuum, `c_{2n} = t^n sqrt((2n)!) / (2^n n! sqrt(cosh r))`
/// with `t = -e^{i arg xi} tanh|xi|`, truncated at `cutoff`.
///
/// The sign of `t` matches the closed-form characteristic functions in
/// [`crate::charfn`] (`<a^2> = -e^{i arg xi} sinh|xi| cosh|xi|`).
pub fn squeezed_vacuum_fock(xi: Complex64, cutoff: usize) -> TruncatedState {
    let r = xi.norm();
    let theta = if r > 0.0 { xi.arg() } else { 0.0 };
    let t = -Complex64::from_polar(r.tanh(), theta);
    let mut amps = vec![Complex64::new(0.0, 0.0); cutoff + 1];
    let mut c = Complex64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut n = 0;
    while 2 * n <= cutoff {
        if n > 0 {
            // c_{2n} / c_{2n-2} = t sqrt((2n)(2n-1)) / (2n)
            c *= t * ((2 * n - 1) as f64 / (2 * n) as f64).sqrt();
        }
        amps[2 * n] = c;
        n += 1;
    }
    let kept: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    TruncatedState { state: FockStateVector { amps }, truncation_weight: (1.0 - kept).max(0.0) }
}

/// Density matrix `rho_{k,l}` on the truncated Fock space `0..dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FockMatrixRepr", into = "FockMatrixRepr")]
pub struct FockDensityMatrix {
    mat: DMatrix<Complex64>,
}

/// JSON form: `{"dim": n, "entries": [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct FockMatrixRepr {
    dim: usize,
    entries: Vec<Complex64>,
}

impl TryFrom<FockMatrixRepr> for FockDensityMatrix {
    type Error = Error;
    fn try_from(r: FockMatrixRepr) -> Result<Self> {
        Self::from_row_major(r.dim, &r.entries)
    }
}

impl From<FockDensityMatrix> for FockMatrixRepr {
    fn from(m: FockDensityMatrix) -> Self {
        let dim = m.dim();
        let entries = (0..dim).flat_map(|k| (0..dim).map(move |l| (k, l))).map(|(k, l)| m.mat[(k, l)]).collect();
        Self { dim, entries }
    }
}

impl FockDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::InvalidDensityMatrix(format!("shape {}x{}", mat.nrows(), mat.ncols())));
        }
        if mat.iter().any(|&c| !is_finite(c)) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let dim = mat.nrows();
        for k in 0..dim {
            for l in k..dim {
                let d = (mat[(k, l)] - mat[(l, k)].conj()).norm();
                if d > HERMITIAN_TOLERANCE {
                    return Err(Error::InvalidDensityMatrix(format!("not Hermitian at ({k},{l}): {d:e}")));
                }
            }
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min_ev = hermitian_eigenvalues(&mat)[0];
        if min_ev < -PSD_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_ev:e}")));
        }
        Ok(Self { mat })
    }

    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidDensityMatrix(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// `|psi><psi|` after normalizing `psi`.
    pub fn pure(psi: &FockStateVector) -> Result<Self> {
        let v = psi.normalized()?;
        let dim = v.amps.len();
        let mat = DMatrix::from_fn(dim, dim, |k, l| v.amps[k] * v.amps[l].conj());
        Ok(Self { mat })
    }

    /// The number state `|n><n|`.
    pub fn number(n: usize) -> Self {
        let mut mat = DMatrix::zeros(n + 1, n + 1);
        mat[(n, n)] = Complex64::new(1.0, 0.0);
        Self { mat }
    }

    /// Diagonal state with the given photon-number probabilities.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let dim = probs.len();
        Self::new(DMatrix::from_fn(dim, dim, |k, l| {
            if k == l {
                Complex64::new(probs[k], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// Builds the matrix without validation; callers guarantee a density matrix up
    /// to rounding.
    pub(crate) fn from_matrix_unchecked(mat: DMatrix<Complex64>) -> Self {
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.mat[(k, l)]
    }

    /// If the state is pure within `tol` (largest eigenvalue >= 1 - tol), returns
    /// the corresponding Fock vector.
    pub fn as_pure(&self, tol: f64) -> Option<FockStateVector> {
        let herm = (&self.mat + self.mat.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let (idx, &top) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        if top < 1.0 - tol {
            return None;
        }
        let v = eig.eigenvectors.column(idx);
        FockStateVector::new(v.iter().copied().collect()).ok()
    }

    /// `tr(rho a^dag^k a^l)`, exact in the truncated space.
    pub fn normal_moment(&self, k: usize, l: usize) -> Complex64 {
        use crate::math::falling;
        // a^l |p> = sqrt(p!/(p-l)!) |p-l>;  <q| a^dag^k = sqrt(q!/(q-k)!) <q-k|
        // tr(rho a^dag^k a^l) = sum_p rho_{p,q} sqrt(falling(p,l) falling(q,k)), q = p - l + k
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for p in l..dim {
            let q = p - l + k;
            if q >= dim {
                continue;
            }
            acc += self.mat[(p, q)] * (falling(p, l) * falling(q, k)).sqrt();
        }
        acc
    }

    pub fn second_moments(&self) -> SecondMoments {
        SecondMoments { a: self.normal_moment(0, 1), a2: self.normal_moment(0, 2), n: self.normal_moment(1, 1).re }
    }
}

/// Zero-mean squeezed thermal state `S(xi) rho_th S(xi)^dag`, with `mu = cosh|xi|`
/// and `nu = e^{i arg xi} sinh|xi|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianState {
    pub mu: f64,
    pub nu: Complex64,
    pub mean_photons_thermal: f64,
}

impl GaussianState {
    pub fn squeezed_vacuum(xi: Complex64) -> Self {
        let (mu, nu) = mu_nu(xi);
        Self { mu, nu, mean_photons_thermal: 0.0 }
    }

    /// Gaussian state with minimal and maximal quadrature variances `v_sq`, `v_asq`
    /// (vacuum = 1) and squeezing phase `theta` (`arg xi`).
    pub fn from_variances(v_sq: f64, v_asq: f64, theta: f64) -> Result<Self> {
        validate_variances(v_sq, v_asq)?;
        let r = (v_asq / v_sq).ln() / 4.0;
        let n_th = ((v_sq * v_asq).sqrt() - 1.0) / 2.0;
        Ok(Self { mu: r.cosh(), nu: Complex64::from_polar(r.sinh(), theta), mean_photons_thermal: n_th.max(0.0) })
    }

    pub fn second_moments(&self) -> SecondMoments {
        let s = 2.0 * self.mean_photons_thermal + 1.0;
        SecondMoments {
            a: Complex64::new(0.0, 0.0),
            a2: -self.mu * self.nu * s,
            n: self.mean_photons_thermal * (1.0 + 2.0 * self.nu.norm_sqr()) + self.nu.norm_sqr(),
        }
    }
}

pub(crate) fn mu_nu(xi: Complex64) -> (f64, Complex64) {
    let r = xi.norm();
    let theta = if r > 0.0 { xi.arg() } else { 0.0 };
    (r.cosh(), Complex64::from_polar(r.sinh(), theta))
}

fn validate_variances(v_sq: f64, v_asq: f64) -> Result<()> {
    if !(v_sq > 0.0 && v_sq.is_finite() && v_asq.is_finite()) {
        return Err(Error::InvalidState(format!("variances must be positive and finite (v_sq = {v_sq})")));
    }
    if v_asq < v_sq {
        return Err(Error::InvalidState(format!("v_asq = {v_asq} < v_sq = {v_sq}")));
    }
    if v_sq * v_asq < 1.0 - 1e-12 {
        return Err(Error::InvalidState(format!("v_sq * v_asq = {} violates the uncertainty bound", v_sq * v_asq)));
    }
    Ok(())
}

/// Any state the toolkit can evaluate. JSON uses a `"type"` tag; complex numbers are
/// `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StateSpec {
    CoherentSuperposition(CoherentSuperposition),
    FockMatrix(FockDensityMatrix),
    SqueezedVacuum {
        xi: Complex64,
    },
    /// `N (|0> + lambda |xi; 0>)`.
    SqPlusVac {
        xi: Complex64,
        lambda: Complex64,
    },
    /// `(|0><0| + |lambda|^2 |xi;0><xi;0|) / (1 + |lambda|^2)`; `lambda_abs = inf`
    /// gives the pure squeezed vacuum.
    SqVacMixture {
        xi: Complex64,
        #[serde(with = "extended_f64")]
        lambda_abs: f64,
    },
    #[serde(rename = "gaussian_variances")]
    GaussianFromVariances {
        v_sq: f64,
        v_asq: f64,
        #[serde(default)]
        theta: f64,
    },
}

impl StateSpec {
    /// Vacuum as a one-dimensional Fock matrix.
    pub fn vacuum() -> Self {
        Self::FockMatrix(FockDensityMatrix::number(0))
    }

    /// Gaussian model of the mixed squeezed state with -4.13 dB squeezing and
    /// +6.11 dB antisqueezing.
    pub fn measured_squeezed_model() -> Self {
        Self::GaussianFromVariances { v_sq: 10f64.powf(-0.413), v_asq: 10f64.powf(0.611), theta: 0.0 }
    }

    /// Phase-space rotation by `phi`: `a -> a e^{i phi}`, so `Phi(beta)` becomes
    /// `Phi(beta e^{-i phi})`.
    pub fn rotated(&self, phi: f64) -> Self {
        let rot2 = Complex64::from_polar(1.0, 2.0 * phi);
        match self {
            Self::CoherentSuperposition(s) => Self::CoherentSuperposition(s.rotated(phi)),
            Self::FockMatrix(rho) => {
                let m = rho.matrix();
                let out = DMatrix::from_fn(m.nrows(), m.ncols(), |k, l| {
                    m[(k, l)] * Complex64::from_polar(1.0, (k as f64 - l as f64) * phi)
                });
                Self::FockMatrix(FockDensityMatrix::from_matrix_unchecked(out))
            }
            Self::SqueezedVacuum { xi } => Self::SqueezedVacuum { xi: xi * rot2 },
            Self::SqPlusVac { xi, lambda } => Self::SqPlusVac { xi: xi * rot2, lambda: *lambda },
            Self::SqVacMixture { xi, lambda_abs } => Self::SqVacMixture { xi: xi * rot2, lambda_abs: *lambda_abs },
            Self::GaussianFromVariances { v_sq, v_asq, theta } => {
                Self::GaussianFromVariances { v_sq: *v_sq, v_asq: *v_asq, theta: theta + 2.0 * phi }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |z: Complex64, what: &str| {
            if is_finite(z) {
                Ok(())
            } else {
                Err(Error::InvalidState(format!("{what} is not finite")))
            }
        };
        match self {
            Self::CoherentSuperposition(_) | Self::FockMatrix(_) => Ok(()),
            Self::SqueezedVacuum { xi } => finite(*xi, "xi"),
            Self::SqPlusVac { xi, lambda } => {
                finite(*xi, "xi")?;
                finite(*lambda, "lambda")?;
                let (mu, _) = mu_nu(*xi);
                let n2 = 1.0 + 2.0 * lambda.re / mu.sqrt() + lambda.norm_sqr();
                if !(n2 > NORM_FLOOR) {
                    return Err(Error::DegenerateSuperposition(format!("|0> + lambda|xi> has norm^2 {n2:e}")));
                }
                Ok(())
            }
            Self::SqVacMixture { xi, lambda_abs } => {
                finite(*xi, "xi")?;
                if lambda_abs.is_nan() || *lambda_abs < 0.0 {
                    return Err(Error::InvalidState(format!("lambda_abs = {lambda_abs}")));
                }
                Ok(())
            }
            Self::GaussianFromVariances { v_sq, v_asq, theta } => {
                if !theta.is_finite() {
                    return Err(Error::InvalidState("theta is not finite".into()));
                }
                validate_variances(*v_sq, *v_asq)
            }
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    /// `(<a>, <a^2>, <a^dag a>)` in closed form.
    pub fn second_moments(&self) -> SecondMoments {
        match self {
            Self::CoherentSuperposition(s) => s.second_moments(),
            Self::FockMatrix(rho) => rho.second_moments(),
            Self::SqueezedVacuum { xi } => GaussianState::squeezed_vacuum(*xi).second_moments(),
            Self::SqPlusVac { xi, lambda } => {
                let (mu, nu) = mu_nu(*xi);
                let n2 = 1.0 / (1.0 + 2.0 * lambda.re / mu.sqrt() + lambda.norm_sqr());
                // <0|a^2|xi> = sqrt(2) c_2 = -nu / mu^{3/2};  <xi|a^2|xi> = -mu nu
                let a2 = n2 * (*lambda * (-nu / mu.powf(1.5)) + lambda.norm_sqr() * (-mu * nu));
                SecondMoments { a: Complex64::new(0.0, 0.0), a2, n: n2 * lambda.norm_sqr() * nu.norm_sqr() }
            }
            Self::SqVacMixture { xi, lambda_abs } => {
                let (mu, nu) = mu_nu(*xi);
                let p = mixture_weight(*lambda_abs);
                SecondMoments { a: Complex64::new(0.0, 0.0), a2: -p * mu * nu, n: p * nu.norm_sqr() }
            }
            Self::GaussianFromVariances { v_sq, v_asq, theta } => GaussianState::from_variances(*v_sq, *v_asq, *theta)
                .map(|g| g.second_moments())
                .unwrap_or(SecondMoments::VACUUM),
        }
    }
}

/// Weight `|lambda|^2 / (1 + |lambda|^2)` of the squeezed component in a mixture.
pub(crate) fn mixture_weight(lambda_abs: f64) -> f64 {
    if lambda_abs.is_infinite() {
        1.0
    } else {
        let l2 = lambda_abs * lambda_abs;
        l2 / (1.0 + l2)
    }
}

/// Serializes `f64::INFINITY` as the string `"inf"`, accepting either form back.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(v) => Ok(v),
            NumOrStr::Str(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}
