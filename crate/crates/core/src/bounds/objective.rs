//! Objectives over canonical superpositions `|0> + sum_{j>=2} lambda_j |alpha_j>`.
//!
//! Parameter layout for `r` terms (`n = r - 1` free terms):
//! `[Re lambda_2.., Im lambda_2.., Re alpha_2.., Im alpha_2..]`.

use num_complex::Complex64;

use super::ascent::Objective;
use crate::states::{overlap_exponent, scaled_cf_exponent, SecondMoments, Term};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `D` below this fraction of `sum |terms of D|` is numerically zero.
const GRAM_FLOOR: f64 = 1e-10;

pub(crate) fn unpack(r: usize, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = r - 1;
    let mut lam = Vec::with_capacity(r);
    let mut alp = Vec::with_capacity(r);
    lam.push(ONE);
    alp.push(ZERO);
    for j in 0..n {
        lam.push(Complex64::new(x[j], x[n + j]));
        alp.push(Complex64::new(x[2 * n + j], x[3 * n + j]));
    }
    (lam, alp)
}

pub(crate) fn pack(terms: &[Term]) -> Vec<f64> {
    let n = terms.len() - 1;
    let mut x = vec![0.0; 4 * n];
    for (j, t) in terms[1..].iter().enumerate() {
        x[j] = t.lambda.re;
        x[n + j] = t.lambda.im;
        x[2 * n + j] = t.alpha.re;
        x[3 * n + j] = t.alpha.im;
    }
    x
}

pub(crate) fn terms_of(r: usize, x: &[f64]) -> Vec<Term> {
    let (lam, alp) = unpack(r, x);
    lam.into_iter().zip(alp).map(|(l, a)| Term::new(l, a)).collect()
}

/// `log |e^{-|beta|^2/2} Phi(beta)|` of the canonical superposition.
pub(crate) struct CfObjective {
    pub r: usize,
    pub beta: Complex64,
}

struct Buffers {
    gn: Vec<Complex64>,
    gd: Vec<Complex64>,
    wn: Vec<Complex64>,
    wd: Vec<Complex64>,
}

impl Buffers {
    fn new(r: usize) -> Self {
        Self { gn: vec![ZERO; r * r], gd: vec![ZERO; r * r], wn: vec![ZERO; r * r], wd: vec![ZERO; r * r] }
    }
}

struct Sums {
    n: Complex64,
    d: f64,
    d_scale: f64,
}

impl CfObjective {
    /// Fills the kernels `gn[k*r+l] = exp(e_kl)`, `gd[k*r+l] = <alpha_k|alpha_l>` and the
    /// weighted terms `w = conj(lambda_k) lambda_l g`.
    fn kernels(&self, lam: &[Complex64], alp: &[Complex64], buf: &mut Buffers) -> Sums {
        let r = self.r;
        let mut s = Sums { n: ZERO, d: 0.0, d_scale: 0.0 };
        for k in 0..r {
            for l in 0..r {
                let ll = lam[k].conj() * lam[l];
                let gd = overlap_exponent(alp[k], alp[l]).exp();
                let gn = scaled_cf_exponent(self.beta, alp[k], alp[l]).exp();
                let i = k * r + l;
                buf.gd[i] = gd;
                buf.gn[i] = gn;
                buf.wd[i] = ll * gd;
                buf.wn[i] = ll * gn;
                s.d += buf.wd[i].re;
                s.d_scale += buf.wd[i].norm();
                s.n += buf.wn[i];
            }
        }
        s
    }

    fn admissible(s: &Sums) -> bool {
        s.d > GRAM_FLOOR * s.d_scale && s.n.norm() > 0.0
    }
}

impl Objective for CfObjective {
    fn dim(&self) -> usize {
        4 * (self.r - 1)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (lam, alp) = unpack(self.r, x);
        let s = self.kernels(&lam, &alp, &mut Buffers::new(self.r));
        if !Self::admissible(&s) {
            return f64::NEG_INFINITY;
        }
        s.n.norm().ln() - s.d.ln()
    }

    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = self.r;
        let m = r - 1;
        let (lam, alp) = unpack(r, x);
        let mut buf = Buffers::new(r);
        let s = self.kernels(&lam, &alp, &mut buf);
        let Buffers { gn, gd, wn, wd } = &buf;
        if !Self::admissible(&s) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::NEG_INFINITY;
        }
        let (b, bc) = (self.beta, self.beta.conj());
        let n_conj = s.n.conj() / s.n.norm_sqr();
        let inv_d = 1.0 / s.d;
        // d log|N| / dx = Re(conj(N) dN/dx) / |N|^2 ;  d log D / dx = Re(dD/dx) / D
        let combine = |dn: Complex64, dd: Complex64| (n_conj * dn).re - dd.re * inv_d;
        for j in 1..r {
            let jj = j - 1;
            // weights: dW/dlambda_j = sum_k conj(l_k) g_kj,  dW/dlambda_j* = sum_l l_l g_jl
            let (mut an, mut bn, mut ad, mut bd) = (ZERO, ZERO, ZERO, ZERO);
            // amplitudes: holomorphic and antiholomorphic derivatives
            let (mut pn, mut qn, mut pd, mut qd) = (ZERO, ZERO, ZERO, ZERO);
            let aj = alp[j];
            let ajc = aj.conj();
            for k in 0..r {
                let wkj_n = wn[k * r + j];
                let wjk_n = wn[j * r + k];
                let wkj_d = wd[k * r + j];
                let wjk_d = wd[j * r + k];
                an += lam[k].conj() * gn[k * r + j];
                bn += lam[k] * gn[j * r + k];
                ad += lam[k].conj() * gd[k * r + j];
                bd += lam[k] * gd[j * r + k];

                // de_kl/dalpha_j  = d_lj (-beta* + conj(a_k) - conj(a_j)/2) - d_kj conj(a_j)/2
                // de_kl/dalpha_j* = d_kj (beta + a_l - a_j/2) - d_lj a_j/2
                pn += wkj_n * (-bc + alp[k].conj() - ajc * 0.5) - wjk_n * (ajc * 0.5);
                qn += wjk_n * (b + alp[k] - aj * 0.5) - wkj_n * (aj * 0.5);
                pd += wkj_d * (alp[k].conj() - ajc * 0.5) - wjk_d * (ajc * 0.5);
                qd += wjk_d * (alp[k] - aj * 0.5) - wkj_d * (aj * 0.5);
            }
            let i = Complex64::new(0.0, 1.0);
            grad[jj] = combine(an + bn, ad + bd);
            grad[m + jj] = combine(i * (an - bn), i * (ad - bd));
            grad[2 * m + jj] = combine(pn + qn, pd + qd);
            grad[3 * m + jj] = combine(i * (pn - qn), i * (pd - qd));
        }
        s.n.norm().ln() - s.d.ln()
    }
}

/// `(<a>, <a^2>, <a^dag a>)` of a superposition given as raw weights and amplitudes,
/// or `None` if the norm is numerically zero.
pub(crate) fn moments(lam: &[Complex64], alp: &[Complex64]) -> Option<SecondMoments> {
    let (mut d, mut scale, mut a1, mut a2, mut n) = (ZERO, 0.0, ZERO, ZERO, ZERO);
    for k in 0..lam.len() {
        for l in 0..lam.len() {
            let w = lam[k].conj() * lam[l] * overlap_exponent(alp[k], alp[l]).exp();
            d += w;
            scale += w.norm();
            a1 += w * alp[l];
            a2 += w * alp[l] * alp[l];
            n += w * alp[k].conj() * alp[l];
        }
    }
    if !(d.re > GRAM_FLOOR * scale) {
        return None;
    }
    Some(SecondMoments { a: a1 / d.re, a2: a2 / d.re, n: n.re / d.re })
}

/// Negated minimal quadrature variance; maximizing it minimizes the variance.
pub(crate) struct VarianceObjective {
    pub r: usize,
}

const FD_STEP: f64 = 1e-6;

impl Objective for VarianceObjective {
    fn dim(&self) -> usize {
        4 * (self.r - 1)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (lam, alp) = unpack(self.r, x);
        match moments(&lam, &alp) {
            Some(m) => -m.min_quadrature_variance(),
            None => f64::NEG_INFINITY,
        }
    }

    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let f = self.value(x);
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + FD_STEP;
            let fp = self.value(&xp);
            xp[i] = x[i] - FD_STEP;
            let fm = self.value(&xp);
            xp[i] = x[i];
            grad[i] = if fp.is_finite() && fm.is_finite() { (fp - fm) / (2.0 * FD_STEP) } else { 0.0 };
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::cf_coherent_superposition_scaled;
    use crate::states::CoherentSuperposition;

    #[test]
    fn value_matches_direct_cf() {
        let x = [0.4, -0.7, 0.2, 0.1, 1.3, -0.5, 0.6, 0.9];
        let obj = CfObjective { r: 3, beta: Complex64::new(1.1, 0.3) };
        let s = CoherentSuperposition::new(terms_of(3, &x)).unwrap();
        let direct = cf_coherent_superposition_scaled(&s, obj.beta).norm().ln();
        assert!((obj.value(&x) - direct).abs() < 1e-13);
        let mut g = vec![0.0; 8];
        assert_eq!(obj.value_and_grad(&x, &mut g), obj.value(&x));
    }

    #[test]
    fn pack_roundtrip() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(pack(&terms_of(3, &x)), x);
    }

    #[test]
    fn moments_match_superposition() {
        let x = [0.4, -0.7, 0.2, 0.1, 1.3, -0.5, 0.6, 0.9];
        let (lam, alp) = unpack(3, &x);
        let m = moments(&lam, &alp).unwrap();
        let s = CoherentSuperposition::new(terms_of(3, &x)).unwrap().second_moments();
        assert!((m.a2 - s.a2).norm() < 1e-13 && (m.n - s.n).abs() < 1e-13);
    }
}
