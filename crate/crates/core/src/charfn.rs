//! Normal-ordered characteristic functions `Phi(beta) = <:D(beta):>`.
//!
//! Every evaluator also offers the scaled value `e^{-|beta|^2/2} Phi(beta)`, which is
//! bounded by one in modulus for every quantum state and never overflows.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::{binomial, factorial, golden_max};
use crate::states::{mixture_weight, mu_nu, scaled_cf_exponent, CoherentSuperposition, FockDensityMatrix, GaussianState, SecondMoments, StateSpec, Term};

/// Coefficients below `ZERO_TOLERANCE * max|phi|` are treated as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Largest natural log we allow for `|Phi|`.
const LOG_OVERFLOW: f64 = 709.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `Phi(beta) = sum_{k,l} phi_{k,l} beta^k conj(beta)^l`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialCF {
    coeffs: DMatrix<Complex64>,
    order: usize,
}

impl PolynomialCF {
    /// Wraps a square coefficient matrix, zeroing entries below `zero_tol * max|phi|`
    /// and trimming trailing zero rows and columns.
    pub fn from_coeffs(coeffs: DMatrix<Complex64>, zero_tol: f64) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.nrows() != coeffs.ncols() {
            return Err(Error::InvalidInput(format!(
                "coefficient matrix must be square and nonempty, got {}x{}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let cut = zero_tol * max;
        let mut c = coeffs.map(|z| if z.norm() < cut || z.norm() == 0.0 { ZERO } else { z });
        let mut order = 0;
        let mut top = 0;
        for k in 0..c.nrows() {
            for l in 0..c.ncols() {
                if c[(k, l)] != ZERO {
                    order = order.max(k + l);
                    top = top.max(k).max(l);
                }
            }
        }
        c = c.view((0, 0), (top + 1, top + 1)).into_owned();
        Ok(Self { coeffs: c, order })
    }

    /// Constant CF `Phi = 1`.
    pub fn one() -> Self {
        Self { coeffs: DMatrix::from_element(1, 1, ONE), order: 0 }
    }

    pub fn coeffs(&self) -> &DMatrix<Complex64> {
        &self.coeffs
    }

    /// `phi_{k,l}`, zero outside the stored range.
    pub fn coeff(&self, k: usize, l: usize) -> Complex64 {
        if k < self.coeffs.nrows() && l < self.coeffs.ncols() {
            self.coeffs[(k, l)]
        } else {
            ZERO
        }
    }

    /// Total degree `max(k + l)` over nonzero coefficients.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Largest single-variable power present.
    pub fn max_index(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    /// Rescales so that `phi_{0,0} = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let c00 = self.coeffs[(0, 0)];
        if c00.norm() == 0.0 {
            return Err(Error::InvalidInput("phi_00 = 0 cannot be normalized".into()));
        }
        Ok(Self { coeffs: self.coeffs.map(|z| z / c00), order: self.order })
    }

    pub fn eval(&self, beta: Complex64) -> Complex64 {
        eval_polynomial(self, beta)
    }
}

/// Horner evaluation of `sum phi_{k,l} beta^k conj(beta)^l`.
pub fn eval_polynomial(p: &PolynomialCF, beta: Complex64) -> Complex64 {
    let bc = beta.conj();
    let n = p.coeffs.nrows();
    let mut outer = ZERO;
    for k in (0..n).rev() {
        let mut inner = ZERO;
        for l in (0..n).rev() {
            inner = inner * bc + p.coeffs[(k, l)];
        }
        outer = outer * beta + inner;
    }
    outer
}

/// CF of the operator `|k><l|`:
/// `sum_n sqrt(k! l!) beta^{l-n} (-beta*)^{k-n} / (n! (k-n)! (l-n)!)`.
pub fn cf_fock_element(k: usize, l: usize, beta: Complex64) -> Complex64 {
    let pre = (factorial(k) * factorial(l)).sqrt();
    let mb = -beta.conj();
    (0..=k.min(l))
        .map(|n| beta.powu((l - n) as u32) * mb.powu((k - n) as u32) * (pre / (factorial(n) * factorial(k - n) * factorial(l - n))))
        .sum()
}

/// `phi_{k,l} = (-1)^l <a^dag^k a^l> / (k! l!)`, moments taken exactly in the truncated space.
pub fn polynomial_from_fock(rho: &FockDensityMatrix) -> PolynomialCF {
    polynomial_from_fock_with_tol(rho, ZERO_TOLERANCE)
}

pub fn polynomial_from_fock_with_tol(rho: &FockDensityMatrix, zero_tol: f64) -> PolynomialCF {
    let dim = rho.dim();
    let coeffs = DMatrix::from_fn(dim, dim, |k, l| {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        rho.normal_moment(k, l) * (sign / (factorial(k) * factorial(l)))
    });
    PolynomialCF::from_coeffs(coeffs, zero_tol).expect("square nonempty matrix")
}

/// Stabilized sum `sum_{k,l} conj(lambda_k) lambda_l exp(e_{kl})` with
/// `e_{kl} = beta alpha_k* - beta* alpha_l + alpha_k* alpha_l - (|alpha_k|^2 + |alpha_l|^2)/2 - |beta|^2/2`.
/// Returns `(m, s)` such that the sum equals `exp(m) * s`.
fn coherent_kernel_sum(terms: &[Term], beta: Complex64) -> (f64, Complex64) {
    let mut m = f64::NEG_INFINITY;
    for k in terms {
        for l in terms {
            m = m.max(scaled_cf_exponent(beta, k.alpha, l.alpha).re);
        }
    }
    let mut s = ZERO;
    for k in terms {
        for l in terms {
            s += k.lambda.conj() * l.lambda * (scaled_cf_exponent(beta, k.alpha, l.alpha) - m).exp();
        }
    }
    (m, s)
}

/// `Phi(beta)` of `sum lambda_i |alpha_i>`, divided by `<Psi|Psi>` so unnormalized
/// input is accepted.
pub fn cf_coherent_superposition(sup: &CoherentSuperposition, beta: Complex64) -> Result<Complex64> {
    let half = 0.5 * beta.norm_sqr();
    let (mn, sn) = coherent_kernel_sum(sup.terms(), beta);
    let (md, sd) = coherent_kernel_sum(sup.terms(), ZERO);
    let log_mod = half + mn - md + sn.norm().ln() - sd.re.ln();
    if log_mod > LOG_OVERFLOW {
        return Err(Error::OverflowGuard { log_modulus: log_mod });
    }
    Ok(sn / sd.re * (half + mn - md).exp())
}

/// `e^{-|beta|^2/2} Phi(beta)` of a coherent superposition.
pub fn cf_coherent_superposition_scaled(sup: &CoherentSuperposition, beta: Complex64) -> Complex64 {
    let (mn, sn) = coherent_kernel_sum(sup.terms(), beta);
    let (md, sd) = coherent_kernel_sum(sup.terms(), ZERO);
    sn / sd.re * (mn - md).exp()
}

#[derive(Clone, Debug)]
enum Kind {
    Superposition(CoherentSuperposition),
    Polynomial(PolynomialCF),
    /// `(1 - p) + p Phi_sq`
    SqueezedMixture { mu: f64, nu: Complex64, p: f64 },
    /// `N^2 [1 + lambda e^{t beta*^2/2}/sqrt(mu) + c.c. + |lambda|^2 Phi_sq]`
    SqPlusVac { mu: f64, nu: Complex64, lambda: Complex64, n2: f64 },
    /// `exp(Re(beta^2 m*) - |beta|^2 n)`
    Gaussian { m: Complex64, n: f64 },
}

/// Binds a state to a callable `beta -> Phi(beta)`.
#[derive(Clone, Debug)]
pub struct CfEvaluator {
    kind: Kind,
}

impl CfEvaluator {
    pub fn new(spec: &StateSpec) -> Result<Self> {
        spec.validate()?;
        let kind = match spec {
            StateSpec::CoherentSuperposition(s) => Kind::Superposition(s.normalize()?),
            StateSpec::FockMatrix(rho) => Kind::Polynomial(polynomial_from_fock(rho)),
            StateSpec::SqueezedVacuum { xi } => {
                let (mu, nu) = mu_nu(*xi);
                Kind::SqueezedMixture { mu, nu, p: 1.0 }
            }
            StateSpec::SqVacMixture { xi, lambda_abs } => {
                let (mu, nu) = mu_nu(*xi);
                Kind::SqueezedMixture { mu, nu, p: mixture_weight(*lambda_abs) }
            }
            StateSpec::SqPlusVac { xi, lambda } => {
                let (mu, nu) = mu_nu(*xi);
                let n2 = 1.0 / (1.0 + 2.0 * lambda.re / mu.sqrt() + lambda.norm_sqr());
                Kind::SqPlusVac { mu, nu, lambda: *lambda, n2 }
            }
            StateSpec::GaussianFromVariances { v_sq, v_asq, theta } => {
                let mom = GaussianState::from_variances(*v_sq, *v_asq, *theta)?.second_moments();
                Kind::Gaussian { m: mom.a2, n: mom.n }
            }
        };
        Ok(Self { kind })
    }

    pub fn from_polynomial(p: PolynomialCF) -> Self {
        Self { kind: Kind::Polynomial(p) }
    }

    /// `Phi(beta)`; only coherent superpositions can hit the overflow guard.
    pub fn eval(&self, beta: Complex64) -> Result<Complex64> {
        match &self.kind {
            Kind::Superposition(s) => cf_coherent_superposition(s, beta),
            Kind::Polynomial(p) => Ok(p.eval(beta)),
            _ => {
                let half = 0.5 * beta.norm_sqr();
                if half > LOG_OVERFLOW {
                    let v = self.eval_scaled(beta);
                    let log_mod = v.norm().ln() + half;
                    if log_mod > LOG_OVERFLOW {
                        return Err(Error::OverflowGuard { log_modulus: log_mod });
                    }
                }
                Ok(self.eval_scaled(beta) * half.exp())
            }
        }
    }

    /// `e^{-|beta|^2/2} Phi(beta)`.
    pub fn eval_scaled(&self, beta: Complex64) -> Complex64 {
        let half = 0.5 * beta.norm_sqr();
        match &self.kind {
            Kind::Superposition(s) => cf_coherent_superposition_scaled(s, beta),
            Kind::Polynomial(p) => p.eval(beta) * (-half).exp(),
            Kind::SqueezedMixture { mu, nu, p } => {
                let sq = (-0.5 * (*mu * beta + nu * beta.conj()).norm_sqr()).exp();
                Complex64::new((1.0 - p) * (-half).exp() + p * sq, 0.0)
            }
            Kind::SqPlusVac { mu, nu, lambda, n2 } => {
                let t = -nu / *mu;
                let bc = beta.conj();
                let cross = lambda * (t * bc * bc * 0.5 - half).exp() / mu.sqrt();
                let cross = cross + (lambda.conj() * (t.conj() * beta * beta * 0.5 - half).exp() / mu.sqrt());
                let sq = (-0.5 * (*mu * beta + nu * bc).norm_sqr()).exp();
                (Complex64::new((-half).exp() + lambda.norm_sqr() * sq, 0.0) + cross) * *n2
            }
            Kind::Gaussian { m, n } => {
                let log = (beta * beta * m.conj()).re - beta.norm_sqr() * n - half;
                Complex64::new(log.exp(), 0.0)
            }
        }
    }

    /// Rough bound on the angular frequency of `phi -> Phi(r e^{i phi})`.
    fn phase_frequency(&self, beta_abs: f64) -> f64 {
        match &self.kind {
            Kind::Superposition(s) => {
                let amax = s.terms().iter().map(|t| t.alpha.norm()).fold(0.0, f64::max);
                4.0 * beta_abs * amax + beta_abs * beta_abs
            }
            Kind::Polynomial(p) => p.max_index() as f64,
            _ => 2.0,
        }
    }

    /// `max_phi |e^{-r^2/2} Phi(r e^{i phi})|` by a phase scan (at least 64 points,
    /// more for rapidly oscillating CFs) whose best few local maxima are refined with
    /// golden-section search. Returns `(phi, value)`.
    pub fn max_scaled_abs_over_phase(&self, beta_abs: f64) -> (f64, f64) {
        const REFINE: usize = 4;
        let f = |phi: f64| self.eval_scaled(Complex64::from_polar(beta_abs, phi)).norm();
        if beta_abs == 0.0 {
            return (0.0, f(0.0));
        }
        let scan = ((16.0 * self.phase_frequency(beta_abs)).ceil() as usize).clamp(64, 1 << 16);
        let step = std::f64::consts::TAU / scan as f64;
        let vals: Vec<f64> = (0..scan).map(|i| f(i as f64 * step)).collect();
        let mut peaks: Vec<usize> =
            (0..scan).filter(|&i| vals[i] >= vals[(i + scan - 1) % scan] && vals[i] >= vals[(i + 1) % scan]).collect();
        peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
        let mut best = (0.0, f64::NEG_INFINITY);
        for &i in peaks.iter().take(REFINE) {
            let center = i as f64 * step;
            let (phi, v) = golden_max(f, center - step, center + step, 60);
            let cand = if v > vals[i] { (phi, v) } else { (center, vals[i]) };
            if cand.1 > best.1 {
                best = cand;
            }
        }
        best
    }

    /// `max_phi |Phi(r e^{i phi})|`.
    pub fn max_abs_over_phase(&self, beta_abs: f64) -> (f64, f64) {
        let (phi, v) = self.max_scaled_abs_over_phase(beta_abs);
        (phi, v * (0.5 * beta_abs * beta_abs).exp())
    }

    /// `(<a>, <a^2>, <a^dag a>)`, in closed form where the family allows it.
    pub fn second_moments(&self) -> SecondMoments {
        match &self.kind {
            Kind::Superposition(s) => s.second_moments(),
            Kind::Polynomial(p) => SecondMoments {
                a: -p.coeff(0, 1),
                a2: p.coeff(0, 2) * 2.0,
                n: -p.coeff(1, 1).re,
            },
            Kind::SqueezedMixture { mu, nu, p } => SecondMoments { a: ZERO, a2: -*p * *mu * nu, n: p * nu.norm_sqr() },
            Kind::SqPlusVac { mu, nu, lambda, n2 } => {
                let t = -nu / *mu;
                SecondMoments {
                    a: ZERO,
                    a2: *n2 * (*lambda * t / mu.sqrt() + lambda.norm_sqr() * (-*mu * nu)),
                    n: n2 * lambda.norm_sqr() * nu.norm_sqr(),
                }
            }
            Kind::Gaussian { m, n } => SecondMoments { a: ZERO, a2: *m, n: *n },
        }
    }
}

/// `Phi(beta)` of any supported state.
pub fn cf_named(spec: &StateSpec, beta: Complex64) -> Result<Complex64> {
    CfEvaluator::new(spec)?.eval(beta)
}

/// Normally ordered moments `<a^dag^k a^l>` for `k + l <= kmax`.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub kmax: usize,
    values: Vec<Vec<Complex64>>,
}

impl MomentTable {
    pub fn get(&self, k: usize, l: usize) -> Option<Complex64> {
        if k + l <= self.kmax {
            Some(self.values[k][l])
        } else {
            None
        }
    }

    pub fn second_moments(&self) -> Option<SecondMoments> {
        Some(SecondMoments { a: self.get(0, 1)?, a2: self.get(0, 2)?, n: self.get(1, 1)?.re })
    }
}

/// Largest total derivative order `moments_from_cf` supports.
pub const MAX_MOMENT_ORDER: usize = 4;

/// Central-difference estimate of `d^p/dx^p d^q/dy^q f` at the origin.
fn mixed_partial(f: &impl Fn(f64, f64) -> Complex64, p: usize, q: usize, h: f64) -> Complex64 {
    // weights of the p-th central difference on the nodes (p/2 - j) h
    let stencil = |p: usize| -> Vec<(f64, f64)> {
        (0..=p)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                ((p as f64 / 2.0 - j as f64) * h, sign * binomial(p, j))
            })
            .collect()
    };
    let (sx, sy) = (stencil(p), stencil(q));
    let mut acc = ZERO;
    for &(x, wx) in &sx {
        for &(y, wy) in &sy {
            acc += f(x, y) * (wx * wy);
        }
    }
    acc / h.powi((p + q) as i32)
}

/// Moments from numerical derivatives of the CF at the origin,
/// `<a^dag^k a^l> = (-1)^l d^k_beta d^l_beta* Phi |_0`.
///
/// Uses tensor central differences in `(Re beta, Im beta)` with one Richardson pass.
/// The step is 1e-3 for total order up to 2 and 2e-2 for orders 3 and 4, where
/// rounding would otherwise dominate.
pub fn moments_from_cf(evaluator: &CfEvaluator, kmax: usize) -> Result<MomentTable> {
    if kmax > MAX_MOMENT_ORDER {
        return Err(Error::InvalidInput(format!("kmax = {kmax} exceeds {MAX_MOMENT_ORDER}")));
    }
    let f = |x: f64, y: f64| evaluator.eval(Complex64::new(x, y)).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let mut values = vec![vec![ZERO; kmax + 1]; kmax + 1];
    for k in 0..=kmax {
        for l in 0..=(kmax - k) {
            let n = k + l;
            if n == 0 {
                values[0][0] = f(0.0, 0.0);
                continue;
            }
            // (X - iY)^k (X + iY)^l / 2^n, expanded as sum_p c_p X^p Y^{n-p}
            let mut poly = vec![ONE];
            let mul = |poly: &Vec<Complex64>, ycoef: Complex64| {
                let mut out = vec![ZERO; poly.len() + 1];
                for (i, &c) in poly.iter().enumerate() {
                    out[i + 1] += c; // X raises the x-power
                    out[i] += c * ycoef; // Y keeps it
                }
                out
            };
            for _ in 0..k {
                poly = mul(&poly, Complex64::new(0.0, -1.0));
            }
            for _ in 0..l {
                poly = mul(&poly, Complex64::new(0.0, 1.0));
            }
            let h = if n <= 2 { 1e-3 } else { 2e-2 };
            let deriv = |h: f64| -> Complex64 {
                poly.iter().enumerate().filter(|(_, c)| c.norm() > 0.0).map(|(p, c)| c * mixed_partial(&f, p, n - p, h)).sum::<Complex64>()
                    / 2f64.powi(n as i32)
            };
            let d = (deriv(h / 2.0) * 4.0 - deriv(h)) / 3.0;
            values[k][l] = if l % 2 == 0 { d } else { -d };
        }
    }
    Ok(MomentTable { kmax, values })
}

/// Variance of `x(phi) = e^{-i phi} a^dag + e^{i phi} a` (vacuum = 1).
pub fn quadrature_variance(spec: &StateSpec, phi: f64) -> f64 {
    spec.second_moments().quadrature_variance(phi)
}

/// `min_phi` of [`quadrature_variance`].
pub fn min_quadrature_variance(spec: &StateSpec) -> f64 {
    spec.second_moments().min_quadrature_variance()
}

/// `10 log10(v_min)`.
pub fn squeezing_db(v_min: f64) -> f64 {
    10.0 * v_min.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::FockStateVector;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sup(pairs: &[(Complex64, Complex64)]) -> CoherentSuperposition {
        CoherentSuperposition::from_pairs(pairs).unwrap()
    }

    #[test]
    fn coherent_state_has_unit_modulus() {
        let alpha = c(0.7, -1.2);
        let s = CoherentSuperposition::coherent(alpha);
        for beta in [c(0.0, 0.0), c(1.0, 2.0), c(-3.0, 0.5)] {
            let v = cf_coherent_superposition(&s, beta).unwrap();
            let expect = (beta * alpha.conj() - beta.conj() * alpha).exp();
            assert!((v - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn two_term_plateau_at_five() {
        // exact value (1 + 2e^{-b^2/2}) / (2 (1 + e^{-b^2/2})) = 1/2 + O(e^{-b^2/2})
        for b in [5.0f64, 6.0] {
            let s = sup(&[(ONE, ZERO), (ONE, c(b, 0.0))]).normalize().unwrap();
            let e = (-0.5 * b * b).exp();
            let exact = (1.0 + 2.0 * e) / (2.0 * (1.0 + e));
            let v = cf_coherent_superposition(&s, c(b, 0.0)).unwrap();
            assert!((v.norm() * e - exact).abs() < 1e-12);
            let scaled = cf_coherent_superposition_scaled(&s, c(b, 0.0));
            assert!((scaled.norm() - exact).abs() < 1e-12);
            assert!((scaled.norm() - 0.5).abs() < 2e-6);
        }
    }

    #[test]
    fn overflow_guard_trips_at_large_beta() {
        let s = sup(&[(ONE, ZERO), (ONE, c(40.0, 0.0))]);
        assert!(matches!(cf_coherent_superposition(&s, c(40.0, 0.0)), Err(Error::OverflowGuard { .. })));
        // unstabilized evaluation would already be inf here; the scaled value is fine
        let v = cf_coherent_superposition(&s, c(30.0, 0.0)).unwrap();
        assert!(v.norm().is_finite());
        assert!((cf_coherent_superposition_scaled(&s, c(40.0, 0.0)).norm() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fock_element_examples() {
        assert_relative_eq!(cf_fock_element(1, 1, c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        let b = c(0.3, -0.8);
        assert!((cf_fock_element(0, 1, b) - b).norm() < 1e-15);
        assert_eq!(cf_fock_element(0, 0, b), ONE);
        // L_2(x) = 1 - 2x + x^2/2
        let x = b.norm_sqr();
        assert!((cf_fock_element(2, 2, b) - c(1.0 - 2.0 * x + x * x / 2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn polynomial_examples() {
        let p = polynomial_from_fock(&FockDensityMatrix::number(0));
        assert_eq!(p.order(), 0);
        assert_eq!(p.coeff(0, 0), ONE);
        assert_eq!(eval_polynomial(&p, c(7.0, 0.0)), ONE);

        let p = polynomial_from_fock(&FockDensityMatrix::number(1));
        assert_eq!(p.order(), 2);
        assert_eq!(p.coeff(1, 1), c(-1.0, 0.0));
        assert_eq!(p.coeff(0, 1), ZERO);
        let v = eval_polynomial(&p, c(2f64.sqrt(), 0.0));
        assert!((v - c(-1.0, 0.0)).norm() < 1e-14);

        let p = polynomial_from_fock(&FockDensityMatrix::number(2));
        let b = c(1.3, 0.4);
        assert!((eval_polynomial(&p, b) - cf_fock_element(2, 2, b)).norm() < 1e-13);
    }

    #[test]
    fn squeezed_vacuum_along_squeezed_axis() {
        let r = 0.4;
        let spec = StateSpec::SqueezedVacuum { xi: c(r, 0.0) };
        let ev = CfEvaluator::new(&spec).unwrap();
        for &b in &[0.3, 1.0, 2.5] {
            // with t = -tanh r the squeezed axis for xi > 0 is the real axis
            let v = ev.eval(c(b, 0.0)).unwrap();
            let expect = (b * b / 2.0 - (2.0 * r).exp() * b * b / 2.0).exp();
            assert_relative_eq!(v.norm(), expect, max_relative = 1e-12);
            assert!(v.norm() <= 1.0);
        }
    }

    #[test]
    fn squeezed_vacuum_cf_matches_fock_expansion() {
        let xi = c(0.3, 0.5);
        let ev = CfEvaluator::new(&StateSpec::SqueezedVacuum { xi }).unwrap();
        let t = crate::states::squeezed_vacuum_fock(xi, 40);
        let rho = FockDensityMatrix::pure(&t.state).unwrap();
        let poly = polynomial_from_fock_with_tol(&rho, 0.0);
        for beta in [c(0.4, 0.1), c(-0.3, 0.7), c(1.0, -0.5)] {
            assert!((ev.eval(beta).unwrap() - poly.eval(beta)).norm() < 1e-8);
        }
    }

    #[test]
    fn sq_plus_vac_matches_fock_expansion() {
        let (xi, lambda) = (c(-0.562, 0.0), c(-1.4, 0.0));
        let ev = CfEvaluator::new(&StateSpec::SqPlusVac { xi, lambda }).unwrap();
        let t = crate::states::squeezed_vacuum_fock(xi, 40);
        let mut amps = t.state.amplitudes().iter().map(|a| a * lambda).collect::<Vec<_>>();
        amps[0] += ONE;
        let rho = FockDensityMatrix::pure(&FockStateVector::new(amps).unwrap()).unwrap();
        let poly = polynomial_from_fock_with_tol(&rho, 0.0);
        for beta in [c(0.4, 0.1), c(-0.3, 0.7), c(1.0, -0.5), c(0.0, 1.2)] {
            assert!((ev.eval(beta).unwrap() - poly.eval(beta)).norm() < 1e-8);
        }
        let m_exact = rho.second_moments();
        let m = ev.second_moments();
        assert!((m.a2 - m_exact.a2).norm() < 1e-10);
        assert!((m.n - m_exact.n).abs() < 1e-10);
    }

    #[test]
    fn sq_plus_vac_variance_is_above_vacuum() {
        let spec = StateSpec::SqPlusVac { xi: c(-0.562, 0.0), lambda: c(-1.4, 0.0) };
        let v = min_quadrature_variance(&spec);
        assert!((v - 1.0006).abs() < 1e-3, "{v}");
        let mom = moments_from_cf(&CfEvaluator::new(&spec).unwrap(), 2).unwrap().second_moments().unwrap();
        assert!((mom.min_quadrature_variance() - v).abs() < 1e-6);
    }

    #[test]
    fn squeezing_examples() {
        assert_eq!(squeezing_db(1.0), 0.0);
        let v = min_quadrature_variance(&StateSpec::SqueezedVacuum { xi: c(0.562, 0.0) });
        assert_relative_eq!(v, (-1.124f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(v, 0.3250, epsilon = 1e-4);
        assert!((squeezing_db(v) + 4.88).abs() < 5e-3);
        assert!((squeezing_db(10f64.powf(-0.354)) + 3.54).abs() < 1e-12);
        let vac = StateSpec::vacuum();
        assert_eq!(quadrature_variance(&vac, 0.3), 1.0);
    }

    #[test]
    fn moments_of_simple_states() {
        let vac = moments_from_cf(&CfEvaluator::new(&StateSpec::vacuum()).unwrap(), 4).unwrap();
        for k in 0..=4 {
            for l in 0..=(4 - k) {
                if k + l > 0 {
                    assert!(vac.get(k, l).unwrap().norm() < 1e-8);
                }
            }
        }
        let one = moments_from_cf(&CfEvaluator::new(&StateSpec::FockMatrix(FockDensityMatrix::number(1))).unwrap(), 2).unwrap();
        assert!((one.get(1, 1).unwrap() - ONE).norm() < 1e-6);

        let xi = c(0.3, 0.4);
        let sq = moments_from_cf(&CfEvaluator::new(&StateSpec::SqueezedVacuum { xi }).unwrap(), 4).unwrap();
        let r = xi.norm();
        let expect = -Complex64::from_polar(r.sinh() * r.cosh(), xi.arg());
        assert!((sq.get(0, 2).unwrap() - expect).norm() < 1e-6);
        // fourth order against the Fock expansion
        let rho = FockDensityMatrix::pure(&crate::states::squeezed_vacuum_fock(xi, 60).state).unwrap();
        assert!((sq.get(2, 2).unwrap() - rho.normal_moment(2, 2)).norm() < 1e-5);
        assert!((sq.get(0, 4).unwrap() - rho.normal_moment(0, 4)).norm() < 1e-5);
        assert!(moments_from_cf(&CfEvaluator::new(&StateSpec::vacuum()).unwrap(), 5).is_err());
    }

    #[test]
    fn trimming_zeroes_tiny_coefficients() {
        let m = DMatrix::from_row_slice(2, 2, &[ONE, c(1e-14, 0.0), c(1e-14, 0.0), c(-1e-13, 0.0)]);
        let p = PolynomialCF::from_coeffs(m.clone(), ZERO_TOLERANCE).unwrap();
        assert_eq!(p.order(), 0);
        assert_eq!(p.max_index(), 0);
        let p = PolynomialCF::from_coeffs(m, 1e-15).unwrap();
        assert_eq!(p.order(), 2);
    }

    use proptest::prelude::*;

    fn complex(scale: f64) -> impl Strategy<Value = Complex64> {
        (-scale..scale, -scale..scale).prop_map(|(a, b)| c(a, b))
    }

    fn superposition(max_r: usize) -> impl Strategy<Value = CoherentSuperposition> {
        prop::collection::vec((complex(1.5), complex(2.5)), 1..=max_r)
            .prop_filter_map("valid", |v| {
                let pairs: Vec<_> = v.into_iter().map(|(l, a)| (l + c(0.1, 0.0), a)).collect();
                let s = CoherentSuperposition::from_pairs(&pairs).ok()?;
                s.normalize().ok()
            })
    }

    fn fock_vector(max_m: usize) -> impl Strategy<Value = FockStateVector> {
        prop::collection::vec(complex(1.0), 1..=max_m + 1).prop_filter_map("nonzero", |v| FockStateVector::new(v).ok()?.normalized().ok())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn canonicalize_preserves_cf_modulus(s in superposition(5), betas in prop::collection::vec(complex(3.0), 100)) {
            let k = s.canonicalize();
            for b in betas {
                let v0 = cf_coherent_superposition_scaled(&s, b).norm();
                let v1 = cf_coherent_superposition_scaled(&k, b).norm();
                prop_assert!((v0 - v1).abs() < 1e-10);
            }
        }

        #[test]
        fn path_equivalence(psi in fock_vector(6), betas in prop::collection::vec(complex(1.5), 20)) {
            let rho = FockDensityMatrix::pure(&psi).unwrap();
            let p = polynomial_from_fock_with_tol(&rho, 0.0);
            let a = psi.amplitudes();
            for b in betas {
                let mut direct = ZERO;
                for k in 0..a.len() {
                    for l in 0..a.len() {
                        direct += a[k] * a[l].conj() * cf_fock_element(k, l, b);
                    }
                }
                let v = eval_polynomial(&p, b);
                prop_assert!((v - direct).norm() < 1e-10 * (1.0 + direct.norm()));
            }
        }

        #[test]
        fn polynomial_hermiticity(psi in fock_vector(5)) {
            let p = polynomial_from_fock_with_tol(&FockDensityMatrix::pure(&psi).unwrap(), 0.0);
            for k in 0..=p.max_index() {
                for l in 0..=p.max_index() {
                    let sign = if (k + l) % 2 == 0 { 1.0 } else { -1.0 };
                    prop_assert!((p.coeff(l, k) - p.coeff(k, l).conj() * sign).norm() < 1e-12);
                }
            }
        }
    }
}
