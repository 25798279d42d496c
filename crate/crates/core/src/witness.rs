//! DNC lower bounds from violations of `|Phi(beta)| <= chi_r(|beta|)`, for analytic
//! states or sampled CF data with error bars, plus the Bochner matrix test.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundTable;
use crate::charfn::CfEvaluator;
use crate::error::{Error, Result};
use crate::math::hermitian_eigenvalues;
use crate::states::StateSpec;

/// Relative safety pad added to interpolated bounds.
pub const BOUND_PAD: f64 = 1e-6;
/// Default significance for sampled data.
pub const DEFAULT_K_SIGMA_SAMPLES: f64 = 5.0;
/// Default significance for analytic states (no statistical error).
pub const DEFAULT_K_SIGMA_ANALYTIC: f64 = 0.0;
/// Default tolerance of the Bochner eigenvalue test.
pub const BOCHNER_TOL: f64 = 1e-10;

/// One sampled CF value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub beta: Complex64,
    pub phi: Complex64,
    pub sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    beta_re: f64,
    beta_im: f64,
    phi_re: f64,
    phi_im: f64,
    sigma: f64,
}

/// Sampled CF with per-point errors. Must contain `beta = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCF {
    points: Vec<SamplePoint>,
}

fn key(beta: Complex64) -> (i64, i64) {
    ((beta.re * 1e9).round() as i64, (beta.im * 1e9).round() as i64)
}

impl SampledCF {
    pub fn new(points: Vec<SamplePoint>) -> Result<Self> {
        for p in &points {
            let finite = [p.beta.re, p.beta.im, p.phi.re, p.phi.im, p.sigma].iter().all(|v| v.is_finite());
            if !finite || p.sigma < 0.0 {
                return Err(Error::InvalidInput(format!("bad sample at beta = {}", p.beta)));
            }
        }
        let origin = points
            .iter()
            .find(|p| p.beta.norm() < 1e-12)
            .ok_or_else(|| Error::InvalidInput("samples must include beta = 0".into()))?;
        if (origin.phi - 1.0).norm() > 3.0 * origin.sigma + 1e-9 {
            return Err(Error::InvalidInput(format!("Phi(0) = {} is inconsistent with 1", origin.phi)));
        }
        let s = Self { points };
        let index = s.index();
        for p in &s.points {
            if let Some(&j) = index.get(&key(-p.beta)) {
                let q = &s.points[j];
                let tol = 3.0 * (p.sigma.powi(2) + q.sigma.powi(2)).sqrt() + 1e-9;
                if (q.phi - p.phi.conj()).norm() > tol {
                    return Err(Error::InvalidInput(format!("samples at +-{} violate Phi(-beta) = Phi(beta)*", p.beta)));
                }
            }
        }
        Ok(s)
    }

    /// Noise-free samples of an analytic state with `sigma = sigma0 e^{|beta|^2/2}`.
    pub fn from_evaluator(ev: &CfEvaluator, betas: &[Complex64], sigma0: f64) -> Result<Self> {
        let mut points = Vec::with_capacity(betas.len() + 1);
        if !betas.iter().any(|b| b.norm() < 1e-12) {
            points.push(SamplePoint { beta: Complex64::new(0.0, 0.0), phi: Complex64::new(1.0, 0.0), sigma: sigma0 });
        }
        for &b in betas {
            points.push(SamplePoint { beta: b, phi: ev.eval(b)?, sigma: sigma0 * (0.5 * b.norm_sqr()).exp() });
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    fn index(&self) -> HashMap<(i64, i64), usize> {
        self.points.iter().enumerate().map(|(i, p)| (key(p.beta), i)).collect()
    }

    /// Reads CSV with header `beta_re,beta_im,phi_re,phi_im,sigma`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut points = Vec::new();
        for rec in rd.deserialize() {
            let row: SampleRow = rec?;
            points.push(SamplePoint {
                beta: Complex64::new(row.beta_re, row.beta_im),
                phi: Complex64::new(row.phi_re, row.phi_im),
                sigma: row.sigma,
            });
        }
        Self::new(points)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.points {
            wr.serialize(SampleRow { beta_re: p.beta.re, beta_im: p.beta.im, phi_re: p.phi.re, phi_im: p.phi.im, sigma: p.sigma })?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Anything that yields `Phi(beta)` on demand.
pub trait CfSource {
    fn phi(&self, beta: Complex64) -> Result<Complex64>;
}

impl CfSource for CfEvaluator {
    fn phi(&self, beta: Complex64) -> Result<Complex64> {
        self.eval(beta)
    }
}

impl CfSource for SampledCF {
    /// Looks up a sampled value (`beta` matched to 1e-9).
    fn phi(&self, beta: Complex64) -> Result<Complex64> {
        self.points
            .iter()
            .find(|p| (p.beta - beta).norm() < 1e-9)
            .map(|p| p.phi)
            .ok_or_else(|| Error::InvalidInput(format!("no sample at beta = {beta}")))
    }
}

/// Monotone cubic (Fritsch-Carlson) interpolation of `log chi` with an upper envelope.
#[derive(Clone, Debug)]
pub struct BoundCurve {
    pub r: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl BoundCurve {
    pub fn new(table: &BoundTable) -> Result<Self> {
        let x: Vec<f64> = table.rows.iter().map(|r| r.beta_abs).collect();
        if x.is_empty() || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!("table for r = {} needs a strictly increasing grid", table.r)));
        }
        let y: Vec<f64> = table.rows.iter().map(|r| r.chi.ln()).collect();
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 1 {
            let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
            for i in 0..n {
                let left = if i > 0 { d[i - 1] } else { d[0] };
                let right = if i < n - 1 { d[i] } else { d[n - 2] };
                m[i] = if left * right <= 0.0 { 0.0 } else { stencil_slope(&x, &y, i) };
                if m[i] * left < 0.0 {
                    m[i] = 0.0;
                }
            }
            for i in 0..n - 1 {
                if d[i] == 0.0 {
                    m[i] = 0.0;
                    m[i + 1] = 0.0;
                    continue;
                }
                let (a, b) = (m[i] / d[i], m[i + 1] / d[i]);
                let s = a * a + b * b;
                if s > 9.0 {
                    let t = 3.0 / s.sqrt();
                    m[i] = t * a * d[i];
                    m[i + 1] = t * b * d[i];
                }
            }
        }
        Ok(Self { r: table.r, x, y, m })
    }

    pub fn max_beta(&self) -> f64 {
        *self.x.last().expect("nonempty")
    }

    /// Padded upper envelope of the interpolant, or `None` outside the grid.
    pub fn upper(&self, beta_abs: f64) -> Option<f64> {
        let n = self.x.len();
        if beta_abs < self.x[0] - 1e-12 || beta_abs > self.x[n - 1] + 1e-12 {
            return None;
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&beta_abs)) {
            Ok(i) => return Some(self.y[i].exp() * (1.0 + BOUND_PAD)),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = ((beta_abs - self.x[i]) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let cubic = (2.0 * t3 - 3.0 * t2 + 1.0) * self.y[i]
            + (t3 - 2.0 * t2 + t) * h * self.m[i]
            + (-2.0 * t3 + 3.0 * t2) * self.y[i + 1]
            + (t3 - t2) * h * self.m[i + 1];
        let linear = self.y[i] + t * (self.y[i + 1] - self.y[i]);
        Some(cubic.max(linear).exp() * (1.0 + BOUND_PAD))
    }
}

/// Derivative at node `i` of the Lagrange interpolant through up to five nearby nodes.
fn stencil_slope(x: &[f64], y: &[f64], i: usize) -> f64 {
    let n = x.len();
    let w = n.min(5);
    let lo = i.saturating_sub(w / 2).min(n - w);
    let idx = lo..lo + w;
    let mut slope = 0.0;
    for j in idx.clone() {
        let coef = if j == i {
            idx.clone().filter(|&k| k != i).map(|k| 1.0 / (x[i] - x[k])).sum()
        } else {
            let num: f64 = idx.clone().filter(|&k| k != i && k != j).map(|k| x[i] - x[k]).product();
            let den: f64 = idx.clone().filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            num / den
        };
        slope += coef * y[j];
    }
    slope
}

/// What to certify.
#[derive(Clone, Copy, Debug)]
pub enum WitnessTarget<'a> {
    Spec(&'a StateSpec),
    Samples(&'a SampledCF),
}

/// Largest-margin point against one bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    pub r: usize,
    pub beta: Complex64,
    pub phi_abs: f64,
    pub chi: f64,
    pub margin: f64,
    pub sigma: f64,
    /// `margin / sigma`; absent for exact data.
    pub sigmas_of_significance: Option<f64>,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// Largest `r` whose bound is significantly violated; DNC > this value.
    pub certified_dnc_gt: usize,
    pub k_sigma: f64,
    pub witness_points: Vec<WitnessPoint>,
    pub bounds_used: Vec<String>,
    /// Samples outside the tables' range that were skipped.
    pub ignored_points: usize,
}

impl WitnessReport {
    /// Human-readable summary line.
    pub fn summary(&self) -> String {
        if self.certified_dnc_gt == 0 {
            "no nonclassicality certified".to_string()
        } else {
            format!("certified DNC ≥ {}", self.certified_dnc_gt + 1)
        }
    }
}

struct Observation {
    beta: Complex64,
    phi_abs: f64,
    sigma: f64,
}

/// Certifies `DNC > r` for every `r` whose bound `chi_r` is exceeded by more than
/// `k_sigma` standard errors. `chi_1 = 1` is built in; `tables` supply `r >= 2`.
///
/// Analytic states are probed at the grid points of the tables, maximizing
/// `|Phi(beta e^{i phi})|` over the phase. Samples beyond the tables' range raise
/// `RangeMismatch` unless `clip` is set, in which case they are skipped.
pub fn certify(target: WitnessTarget<'_>, tables: &[BoundTable], k_sigma: f64, clip: bool) -> Result<WitnessReport> {
    if !(k_sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("k_sigma = {k_sigma}")));
    }
    let mut curves: Vec<BoundCurve> = tables.iter().filter(|t| t.r >= 2).map(BoundCurve::new).collect::<Result<_>>()?;
    curves.sort_by_key(|c| c.r);
    let mut bounds_used = vec!["chi_1 = 1".to_string()];
    let mut sorted: Vec<&BoundTable> = tables.iter().filter(|t| t.r >= 2).collect();
    sorted.sort_by_key(|t| t.r);
    bounds_used.extend(sorted.iter().map(|t| t.id()));

    let max_beta = curves.iter().map(|c| c.max_beta()).fold(f64::INFINITY, f64::min);
    let mut ignored = 0;
    let observations: Vec<Observation> = match target {
        WitnessTarget::Spec(spec) => {
            let ev = CfEvaluator::new(spec)?;
            let grid: Vec<f64> = match sorted.first() {
                Some(t) => t.rows.iter().map(|r| r.beta_abs).filter(|&b| b > 0.0).collect(),
                None => Vec::new(),
            };
            grid.into_iter()
                .map(|b| {
                    let (phi, v) = ev.max_abs_over_phase(b);
                    Observation { beta: Complex64::from_polar(b, phi), phi_abs: v, sigma: 0.0 }
                })
                .collect()
        }
        WitnessTarget::Samples(samples) => {
            let mut obs = Vec::new();
            let mut out_of_range = 0;
            for p in samples.points() {
                if p.beta.norm() > max_beta + 1e-12 {
                    out_of_range += 1;
                    continue;
                }
                obs.push(Observation { beta: p.beta, phi_abs: p.phi.norm(), sigma: p.sigma });
            }
            if out_of_range > 0 && !curves.is_empty() {
                if !clip {
                    return Err(Error::RangeMismatch { count: out_of_range, max_beta });
                }
                log::warn!("ignoring {out_of_range} samples beyond |beta| = {max_beta}");
                ignored = out_of_range;
            }
            obs
        }
    };

    let mut certified = 0;
    let mut witness_points = Vec::new();
    let levels = std::iter::once(None).chain(curves.iter().map(Some));
    for curve in levels {
        let r = curve.map_or(1, |c| c.r);
        let mut best: Option<WitnessPoint> = None;
        for o in &observations {
            let chi = match curve {
                None => 1.0 + BOUND_PAD,
                Some(c) => match c.upper(o.beta.norm()) {
                    Some(v) => v,
                    None => continue,
                },
            };
            let margin = o.phi_abs - chi;
            let violated = margin > k_sigma * o.sigma && margin > 0.0;
            let point = WitnessPoint {
                r,
                beta: o.beta,
                phi_abs: o.phi_abs,
                chi,
                margin,
                sigma: o.sigma,
                sigmas_of_significance: if o.sigma > 0.0 { Some(margin / o.sigma) } else { None },
                violated,
            };
            let better = match &best {
                None => true,
                Some(b) => (point.violated, significance(&point)) > (b.violated, significance(b)),
            };
            if better {
                best = Some(point);
            }
        }
        if let Some(p) = best {
            if p.violated {
                certified = certified.max(r);
            }
            witness_points.push(p);
        }
    }
    Ok(WitnessReport { certified_dnc_gt: certified, k_sigma, witness_points, bounds_used, ignored_points: ignored })
}

/// Ranking key: significance for noisy points, raw margin for exact ones.
fn significance(p: &WitnessPoint) -> f64 {
    p.sigmas_of_significance.unwrap_or(p.margin)
}

/// Certified level of the vacuum/squeezed-vacuum mixture for each `|lambda|`.
pub fn mixture_threshold_scan(xi: Complex64, lambda_grid: &[f64], tables: &[BoundTable]) -> Result<Vec<(f64, usize)>> {
    lambda_grid
        .iter()
        .map(|&lambda_abs| {
            let spec = StateSpec::SqVacMixture { xi, lambda_abs };
            let rep = certify(WitnessTarget::Spec(&spec), tables, DEFAULT_K_SIGMA_ANALYTIC, false)?;
            Ok((lambda_abs, rep.certified_dnc_gt))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BochnerResult {
    pub min_eigenvalue: f64,
    pub nonclassical: bool,
}

/// Minimum eigenvalue of `[Phi(beta_i - beta_j)]`; classical states give a
/// positive semidefinite matrix.
pub fn bochner_matrix_test(source: &dyn CfSource, betas: &[Complex64], tol: f64) -> Result<BochnerResult> {
    let n = betas.len();
    if n < 2 {
        return Err(Error::InvalidInput("the Bochner test needs at least two points".into()));
    }
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = source.phi(betas[i] - betas[j])?;
        }
    }
    let min_eigenvalue = hermitian_eigenvalues(&m)[0];
    Ok(BochnerResult { min_eigenvalue, nonclassical: min_eigenvalue < -tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundRow;
    use crate::states::{CoherentSuperposition, FockDensityMatrix};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn synthetic_table(r: usize, f: impl Fn(f64) -> f64) -> BoundTable {
        let rows = (0..=100)
            .map(|i| {
                let b = i as f64 * 0.05;
                let chi = f(b);
                BoundRow { beta_abs: b, chi, normalized_chi: chi * (-b * b / 2.0).exp(), converged: true, terms: vec![] }
            })
            .collect();
        BoundTable { r, seed: 0, restarts: 0, rows }
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_never_below_smooth_curves() {
        let curves: [fn(f64) -> f64; 3] = [
            |b| 1.0 + b * b,
            |b| (b * b / 2.0).exp() * (0.5 + 0.5 * (-b * b).exp()),
            |b| (b * b / 2.0).exp() * (0.5 + 0.5 * (-2.0 * b * b).exp()),
        ];
        for f in curves {
            let curve = BoundCurve::new(&synthetic_table(2, f)).unwrap();
            assert!((curve.upper(1.0).unwrap() / f(1.0) - (1.0 + BOUND_PAD)).abs() < 1e-12);
            for i in 0..=5000 {
                let b = i as f64 * 1e-3;
                assert!(curve.upper(b).unwrap() >= f(b), "b={b}");
            }
            assert!(curve.upper(5.1).is_none());
        }
    }

    #[test]
    fn coherent_state_is_not_certified() {
        let spec = StateSpec::CoherentSuperposition(CoherentSuperposition::coherent(c(1.0, 0.5)));
        let t = synthetic_table(2, |b| 1.0 + 0.1 * b * b);
        let rep = certify(WitnessTarget::Spec(&spec), &[t], 0.0, false).unwrap();
        assert_eq!(rep.certified_dnc_gt, 0);
        assert_eq!(rep.summary(), "no nonclassicality certified");
    }

    #[test]
    fn bochner_examples() {
        let coh = CfEvaluator::new(&StateSpec::CoherentSuperposition(CoherentSuperposition::coherent(c(0.3, -1.0)))).unwrap();
        let betas = [c(0.0, 0.0), c(0.4, 0.1), c(-1.0, 0.7), c(2.0, 2.0)];
        assert!(bochner_matrix_test(&coh, &betas, BOCHNER_TOL).unwrap().min_eigenvalue >= -1e-10);

        let one = CfEvaluator::new(&StateSpec::FockMatrix(FockDensityMatrix::number(1))).unwrap();
        let r = bochner_matrix_test(&one, &[c(0.0, 0.0), c(0.5, 0.0)], BOCHNER_TOL).unwrap();
        assert!((r.min_eigenvalue - 0.25).abs() < 1e-12);
        assert!(!r.nonclassical);

        // antisqueezed axis of xi = 0.5 > 0 is the imaginary axis
        let sq = CfEvaluator::new(&StateSpec::SqueezedVacuum { xi: c(0.5, 0.0) }).unwrap();
        let b = c(0.0, 1.0);
        let phi = sq.eval(b).unwrap().norm();
        assert!(phi > 1.0);
        let r = bochner_matrix_test(&sq, &[c(0.0, 0.0), b], BOCHNER_TOL).unwrap();
        assert!((r.min_eigenvalue - (1.0 - phi)).abs() < 1e-12);
        assert!(r.nonclassical);
    }

    #[test]
    fn samples_validation_and_csv() {
        let ev = CfEvaluator::new(&StateSpec::SqueezedVacuum { xi: c(0.5, 0.0) }).unwrap();
        let betas: Vec<Complex64> = (1..=10).flat_map(|i| [c(0.0, 0.2 * i as f64), c(0.0, -0.2 * i as f64)]).collect();
        let s = SampledCF::from_evaluator(&ev, &betas, 1e-3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("beta_re,beta_im,phi_re,phi_im,sigma\n"));
        assert_eq!(SampledCF::read_csv(&buf[..]).unwrap(), s);

        let bad = "beta_re,beta_im,phi_re,phi_im,sigma\n0.5,0,1,0,0.01\n";
        assert!(SampledCF::read_csv(bad.as_bytes()).is_err());
        let bad = "beta_re,beta_im,phi_re,phi_im,sigma\n0,0,1.5,0,0.01\n";
        assert!(SampledCF::read_csv(bad.as_bytes()).is_err());
        let bad = "beta_re,beta_im,phi_re,phi_im,sigma\n0,0,1,0,0\n0.5,0,0.3,0.2,0.01\n-0.5,0,0.3,0.2,0.01\n";
        assert!(SampledCF::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn range_mismatch_and_clip() {
        let ev = CfEvaluator::new(&StateSpec::SqueezedVacuum { xi: c(0.5, 0.0) }).unwrap();
        let s = SampledCF::from_evaluator(&ev, &[c(0.0, 1.0), c(0.0, 6.0)], 1e-3).unwrap();
        let t = synthetic_table(2, |b| 1.0 + 0.5 * b * b);
        let err = certify(WitnessTarget::Samples(&s), std::slice::from_ref(&t), 5.0, false);
        assert!(matches!(err, Err(Error::RangeMismatch { count: 1, .. })));
        let rep = certify(WitnessTarget::Samples(&s), &[t], 5.0, true).unwrap();
        assert_eq!(rep.ignored_points, 1);
    }

    #[test]
    fn second_order_equivalence_examples() {
        // |Phi(beta)| > 1  <=>  2x2 matrix with betas {0, beta} has a negative eigenvalue
        let sq = CfEvaluator::new(&StateSpec::SqueezedVacuum { xi: c(0.3, 0.4) }).unwrap();
        for i in 0..50 {
            let b = Complex64::from_polar(0.05 + 0.05 * i as f64, 0.37 * i as f64);
            let res = bochner_matrix_test(&sq, &[c(0.0, 0.0), b], BOCHNER_TOL).unwrap();
            assert_eq!(res.nonclassical, sq.eval(b).unwrap().norm() > 1.0 + BOCHNER_TOL);
        }
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn k_sigma_monotonicity(sigma0 in 1e-4f64..0.2, ks in prop::collection::vec(0.0f64..10.0, 2..6)) {
            let ev = CfEvaluator::new(&StateSpec::SqueezedVacuum { xi: c(0.6, 0.0) }).unwrap();
            let betas: Vec<Complex64> = (1..=16).flat_map(|i| [c(0.0, 0.25 * i as f64), c(0.0, -0.25 * i as f64)]).collect();
            let s = SampledCF::from_evaluator(&ev, &betas, sigma0).unwrap();
            let tables = [synthetic_table(2, |b| 1.0 + 0.3 * b * b), synthetic_table(3, |b| 1.0 + 0.6 * b * b)];
            let mut ks = ks;
            ks.sort_by(f64::total_cmp);
            let levels: Vec<usize> = ks.iter().map(|&k| certify(WitnessTarget::Samples(&s), &tables, k, false).unwrap().certified_dnc_gt).collect();
            for w in levels.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }

        #[test]
        fn bochner_second_order(re in -2.0f64..2.0, im in -2.0f64..2.0, xr in -0.8f64..0.8, xi_im in -0.8f64..0.8) {
            let ev = CfEvaluator::new(&StateSpec::SqueezedVacuum { xi: c(xr, xi_im) }).unwrap();
            let b = c(re, im);
            let phi = ev.eval(b).unwrap().norm();
            prop_assume!((phi - 1.0).abs() > 1e-8);
            let res = bochner_matrix_test(&ev, &[c(0.0, 0.0), b], BOCHNER_TOL).unwrap();
            prop_assert_eq!(res.nonclassical, phi > 1.0 + BOCHNER_TOL);
        }
    }
}
