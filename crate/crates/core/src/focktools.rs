//! Exact DNC of finite Fock-space states, the beam-splitter Schmidt-rank oracle, and
//! photon addition and subtraction in Fock space and on polynomial CFs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfn::{polynomial_from_fock_with_tol, PolynomialCF, ZERO_TOLERANCE};
use crate::error::{Error, Result};
use crate::math::{binomial, factorial, falling};
use crate::states::{FockDensityMatrix, FockStateVector};

/// Default tolerance for deciding that a Fock population or singular value is zero.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Mean photon number below which subtraction is refused.
const SUBTRACTION_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DncMethod {
    PolynomialOrder,
    SchmidtRank,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DncResult {
    pub dnc: usize,
    pub method: DncMethod,
    pub highest_fock: usize,
    pub polynomial_order: usize,
    pub tolerance_used: f64,
}

/// Largest `m` with `|rho_{m,m}| > tol`; 0 for the vacuum.
pub fn highest_fock_index(rho: &FockDensityMatrix, tol: f64) -> usize {
    (0..rho.dim()).rev().find(|&m| rho.get(m, m).norm() > tol).unwrap_or(0)
}

/// DNC `= m + 1` for a state supported on `|0>..|m>`, cross-checked against the
/// order of its polynomial CF.
pub fn dnc_finite(rho: &FockDensityMatrix, tol: f64) -> Result<DncResult> {
    dnc_finite_with(rho, tol, ZERO_TOLERANCE)
}

/// [`dnc_finite`] with an explicit relative threshold for trimming CF coefficients.
pub fn dnc_finite_with(rho: &FockDensityMatrix, tol: f64, zero_tol: f64) -> Result<DncResult> {
    let highest = highest_fock_index(rho, tol);
    let order = polynomial_from_fock_with_tol(rho, zero_tol).order();
    if order != 2 * highest {
        return Err(Error::InconsistentOrder { order, highest_fock: highest });
    }
    Ok(DncResult {
        dnc: highest + 1,
        method: DncMethod::PolynomialOrder,
        highest_fock: highest,
        polynomial_order: order,
        tolerance_used: tol,
    })
}

/// Schmidt rank of `|psi, 0>` after a 50:50 beam splitter. Each `|n>` maps to
/// `2^{-n/2} sum_j sqrt(C(n,j)) |j, n-j>` (phases do not affect the rank).
pub fn beam_splitter_schmidt_rank(psi: &FockStateVector, tol: f64) -> usize {
    let amps = psi.amplitudes();
    let dim = amps.len();
    let mut c = DMatrix::<Complex64>::zeros(dim, dim);
    for (n, &lam) in amps.iter().enumerate() {
        let scale = 2f64.powf(-(n as f64) / 2.0);
        for j in 0..=n {
            c[(j, n - j)] += lam * (scale * binomial(n, j).sqrt());
        }
    }
    let sv = c.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// [`dnc_finite`] computed through the Schmidt rank, for pure inputs.
pub fn dnc_schmidt(psi: &FockStateVector, tol: f64) -> DncResult {
    let rank = beam_splitter_schmidt_rank(psi, tol);
    DncResult {
        dnc: rank,
        method: DncMethod::SchmidtRank,
        highest_fock: rank.saturating_sub(1),
        polynomial_order: 2 * rank.saturating_sub(1),
        tolerance_used: tol,
    }
}

/// `a^dag^n rho a^n`, renormalized.
pub fn photon_add_fock(rho: &FockDensityMatrix, n: usize) -> Result<FockDensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("photon addition needs n >= 1".into()));
    }
    let dim = rho.dim();
    let out_dim = dim + n;
    let trace: f64 = (0..dim).map(|k| falling(k + n, n) * rho.get(k, k).re).sum();
    let mut out = DMatrix::<Complex64>::zeros(out_dim, out_dim);
    for k in 0..dim {
        for l in 0..dim {
            out[(k + n, l + n)] = rho.get(k, l) * ((falling(k + n, n) * falling(l + n, n)).sqrt() / trace);
        }
    }
    Ok(FockDensityMatrix::from_matrix_unchecked(out))
}

/// `a rho a^dag`, renormalized; the output dimension shrinks by one.
pub fn photon_subtract_fock(rho: &FockDensityMatrix) -> Result<FockDensityMatrix> {
    let dim = rho.dim();
    let mean_n: f64 = (1..dim).map(|k| k as f64 * rho.get(k, k).re).sum();
    if mean_n <= SUBTRACTION_FLOOR {
        return Err(Error::VacuumSubtraction);
    }
    let out = DMatrix::from_fn(dim - 1, dim - 1, |k, l| {
        rho.get(k + 1, l + 1) * (((k + 1) * (l + 1)) as f64).sqrt() / mean_n
    });
    Ok(FockDensityMatrix::from_matrix_unchecked(out))
}

/// Photon addition applied directly to a polynomial CF.
///
/// With `w_k = n!^2 / (k!^2 (n-k)!)` the unnormalized output is
/// `sum_k w_k sum_{i,j<=k} C(k,i) C(k,j) (-1)^{k-j+i} beta^{k-i} beta*^{k-j} d_beta^j d_beta*^i Phi`,
/// the normally ordered expansion of `<:D(beta): a^dag^n rho a^n>`. The result is
/// normalized by the Fock-space trace `tr(a^dag^n rho a^n) = sum_k w_k <a^dag^k a^k>`,
/// which must agree with the constant term of the unnormalized output.
pub fn photon_add_cf(p: &PolynomialCF, n: usize) -> Result<PolynomialCF> {
    if n == 0 {
        return Err(Error::InvalidInput("photon addition needs n >= 1".into()));
    }
    let size = p.max_index() + 1;
    let out_size = size + n;
    let mut out = DMatrix::<Complex64>::zeros(out_size, out_size);
    let nf = factorial(n);
    for k in 0..=n {
        let w = nf * nf / (factorial(k) * factorial(k) * factorial(n - k));
        for i in 0..=k {
            for j in 0..=k {
                let sign = if (k - j + i) % 2 == 0 { 1.0 } else { -1.0 };
                let cw = w * sign * binomial(k, i) * binomial(k, j);
                // d^j/dbeta^j d^i/dbeta*^i beta^a beta*^b, then times beta^{k-i} beta*^{k-j}
                for a in j..size {
                    for b in i..size {
                        let c = p.coeff(a, b);
                        if c.norm() == 0.0 {
                            continue;
                        }
                        let ra = a - j + k - i;
                        let rb = b - i + k - j;
                        out[(ra, rb)] += c * (cw * falling(a, j) * falling(b, i));
                    }
                }
            }
        }
    }
    // <a^dag^k a^k> = (-1)^k k!^2 phi_{k,k}
    let trace: f64 = (0..=n.min(p.max_index()))
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * nf * nf / factorial(n - k) * p.coeff(k, k).re
        })
        .sum();
    let c00 = out[(0, 0)];
    if !(trace > 0.0) || (c00.re - trace).abs() > 1e-9 * trace || c00.im.abs() > 1e-9 * trace {
        return Err(Error::InvalidInput(format!(
            "photon-addition normalization mismatch: operator gives {c00}, Fock trace {trace}"
        )));
    }
    PolynomialCF::from_coeffs(out.map(|z| z / trace), ZERO_TOLERANCE)
}
