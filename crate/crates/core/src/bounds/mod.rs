//! Bound functions `chi_r(|beta|) = sup |Phi(beta)|` over superpositions of at most `r`
//! coherent states, computed by multi-start quasi-Newton ascent.
//!
//! `beta` is taken real and positive (the supremum depends only on `|beta|`), and the
//! superposition is canonicalized to `|0> + sum_{j>=2} lambda_j |alpha_j>`, leaving
//! `4(r-1)` real variables.

mod ascent;
mod io;
mod objective;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{CoherentSuperposition, Term};
use ascent::{ascend, AscentResult, AscentSettings, Objective};
use objective::{pack, terms_of, CfObjective, VarianceObjective};

pub use io::{read_table_csv, read_table_json, table_file_name, write_table_csv, write_table_json};

/// Default grid `0, 0.05, ..., 5`.
pub fn default_grid() -> Vec<f64> {
    grid(5.0, 0.05)
}

/// `0, step, 2 step, ...` up to and including `max` (within rounding).
pub fn grid(max: f64, step: f64) -> Vec<f64> {
    if max <= 0.0 || step <= 0.0 {
        return vec![0.0];
    }
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// `2^{4(r-1)}`, one start per sign configuration of the real variables.
pub fn default_restarts(r: usize) -> usize {
    1usize << (4 * r.saturating_sub(1)).min(40)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub r: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_init: f64,
    pub seed: u64,
    pub beta_grid: Vec<f64>,
    /// Reseed every grid point from its neighbours' optima after the random starts.
    #[serde(default = "yes")]
    pub continuation: bool,
}

fn yes() -> bool {
    true
}

impl OptimizerConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            restarts: default_restarts(r),
            max_iters: 5000,
            grad_tol: 1e-8,
            step_init: 0.1,
            seed: 0,
            beta_grid: default_grid(),
            continuation: true,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.beta_grid = grid;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::InvalidInput("r must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput("restarts must be positive".into()));
        }
        if self.beta_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidInput("beta grid must be finite and nonnegative".into()));
        }
        Ok(())
    }

    fn settings(&self) -> AscentSettings {
        AscentSettings { max_iters: self.max_iters, grad_tol: self.grad_tol, step_init: self.step_init }
    }
}

/// One grid point of a bound table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub beta_abs: f64,
    pub chi: f64,
    /// `chi e^{-beta^2/2}`
    pub normalized_chi: f64,
    pub converged: bool,
    /// Canonical optimizer output; weights may be zero.
    pub terms: Vec<Term>,
}

impl BoundRow {
    fn trivial(beta_abs: f64) -> Self {
        Self {
            beta_abs,
            chi: 1.0,
            normalized_chi: (-0.5 * beta_abs * beta_abs).exp(),
            converged: true,
            terms: vec![Term::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))],
        }
    }

    fn from_log(beta_abs: f64, log_normalized: f64, terms: Vec<Term>, converged: bool) -> Self {
        Self {
            beta_abs,
            chi: (log_normalized + 0.5 * beta_abs * beta_abs).exp(),
            normalized_chi: log_normalized.exp(),
            converged,
            terms,
        }
    }

    /// Achieving state with negligible-weight terms dropped, normalized.
    pub fn best_state(&self) -> Result<CoherentSuperposition> {
        let max = self.terms.iter().map(|t| t.lambda.norm()).fold(0.0, f64::max);
        let kept: Vec<Term> = self.terms.iter().copied().filter(|t| t.lambda.norm() > 1e-9 * max).collect();
        CoherentSuperposition::new(kept)?.normalize()
    }

    /// Error if the row did not converge.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { beta_abs: self.beta_abs, best: self.chi })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub r: usize,
    pub seed: u64,
    pub restarts: usize,
    pub rows: Vec<BoundRow>,
}

impl BoundTable {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn max_beta(&self) -> f64 {
        self.rows.iter().map(|r| r.beta_abs).fold(0.0, f64::max)
    }

    /// Short identifier used in witness reports.
    pub fn id(&self) -> String {
        format!("chi_{}(seed={},restarts={},rows={})", self.r, self.seed, self.restarts, self.rows.len())
    }

    /// The trivial table `chi_1 = 1`.
    pub fn classical(grid: &[f64]) -> Self {
        Self { r: 1, seed: 0, restarts: 0, rows: grid.iter().map(|&b| BoundRow::trivial(b)).collect() }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream for one `(seed, beta, restart)` task.
fn task_rng(seed: u64, beta_abs: f64, restart: usize) -> ChaCha8Rng {
    let s = splitmix(splitmix(splitmix(seed) ^ beta_abs.to_bits()) ^ restart as u64);
    ChaCha8Rng::seed_from_u64(s)
}

/// Random start: magnitudes from a half-normal (weights, unit mean modulus of the
/// complex weight) or uniform in a disk of radius `radius` (amplitudes); the sign of
/// each real variable is taken from the bits of `restart`.
fn random_start(r: usize, radius: f64, restart: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = r - 1;
    let weight = Normal::new(0.0, (2.0 / std::f64::consts::PI).sqrt()).expect("valid normal");
    let mut x = vec![0.0; 4 * n];
    for j in 0..n {
        x[j] = weight.sample(rng).abs();
        x[n + j] = weight.sample(rng).abs();
        let rho = radius * rng.random::<f64>().sqrt();
        let th = std::f64::consts::FRAC_PI_2 * rng.random::<f64>();
        x[2 * n + j] = rho * th.cos();
        x[3 * n + j] = rho * th.sin();
    }
    let bits = restart % (1usize << (4 * n).min(63));
    for (i, v) in x.iter_mut().enumerate() {
        if bits >> i & 1 == 1 {
            *v = -*v;
        }
    }
    x
}

/// Runs all starts in parallel and keeps the best by value, ties going to the
/// lowest start index, so the outcome does not depend on scheduling.
fn best_of<O: Objective>(obj: &O, starts: Vec<Vec<f64>>, settings: &AscentSettings) -> Option<(AscentResult, bool)> {
    let results: Vec<AscentResult> = starts.into_par_iter().map(|x0| ascend(obj, x0, settings)).collect();
    let any_converged = results.iter().any(|r| r.converged && r.value.is_finite());
    let mut best: Option<AscentResult> = None;
    for res in results {
        if !res.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| res.value > b.value) {
            best = Some(res);
        }
    }
    best.map(|b| (b, any_converged))
}

fn random_starts(r: usize, radius: f64, seed: u64, beta_abs: f64, restarts: usize) -> Vec<Vec<f64>> {
    (0..restarts)
        .map(|i| {
            let mut rng = task_rng(seed, beta_abs, i);
            random_start(r, radius, i, &mut rng)
        })
        .collect()
}

/// Starting-disk radius for amplitudes at a given `|beta|`.
fn start_radius(beta_abs: f64) -> f64 {
    2.0 * beta_abs + 1.0
}

fn optimize_row(config: &OptimizerConfig, beta_abs: f64, extra: Vec<Vec<f64>>) -> BoundRow {
    if config.r == 1 || beta_abs == 0.0 {
        return BoundRow::trivial(beta_abs);
    }
    let obj = CfObjective { r: config.r, beta: Complex64::new(beta_abs, 0.0) };
    let mut starts = random_starts(config.r, start_radius(beta_abs), config.seed, beta_abs, config.restarts);
    starts.extend(extra);
    match best_of(&obj, starts, &config.settings()) {
        Some((best, any)) => BoundRow::from_log(beta_abs, best.value, terms_of(config.r, &best.x), any),
        None => BoundRow { converged: false, ..BoundRow::trivial(beta_abs) },
    }
}

/// Re-optimizes a row from the given starts and keeps the better of old and new.
fn refine_row(config: &OptimizerConfig, row: &BoundRow, starts: Vec<Vec<f64>>) -> BoundRow {
    if config.r == 1 || row.beta_abs == 0.0 || starts.is_empty() {
        return row.clone();
    }
    let obj = CfObjective { r: config.r, beta: Complex64::new(row.beta_abs, 0.0) };
    match best_of(&obj, starts, &config.settings()) {
        Some((best, _)) if best.value > row.normalized_chi.ln() => {
            BoundRow::from_log(row.beta_abs, best.value, terms_of(config.r, &best.x), row.converged || best.converged)
        }
        _ => row.clone(),
    }
}

/// Pads an `(r-1)`-term canonical state with a zero-weight term at either end of its
/// amplitude chain, giving starts whose value equals `chi_{r-1}` exactly.
fn embed_lower(r: usize, lower: &BoundRow) -> Vec<Vec<f64>> {
    if lower.terms.len() + 1 != r {
        return Vec::new();
    }
    let offset = lower.beta_abs.max(0.5);
    let re: Vec<f64> = lower.terms.iter().map(|t| t.alpha.re).collect();
    let hi = re.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = re.iter().copied().fold(f64::INFINITY, f64::min);
    [hi + offset, lo - offset]
        .into_iter()
        .map(|a| {
            let mut terms = lower.terms.clone();
            terms.push(Term::new(Complex64::new(0.0, 0.0), Complex64::new(a, 0.0)));
            pack(&terms)
        })
        .collect()
}

/// `chi_r(|beta|)` and its achieving state at a single point.
pub fn chi_r(beta_abs: f64, config: &OptimizerConfig) -> Result<BoundRow> {
    config.validate()?;
    if !(beta_abs.is_finite() && beta_abs >= 0.0) {
        return Err(Error::InvalidInput(format!("beta_abs = {beta_abs}")));
    }
    Ok(optimize_row(config, beta_abs, Vec::new()))
}

/// `max |Phi(beta)|` at a complex `beta` (no rotation to the real axis); used to
/// validate rotation invariance. Returns the normalized value.
pub fn chi_r_at(beta: Complex64, config: &OptimizerConfig) -> Result<f64> {
    config.validate()?;
    if config.r == 1 || beta.norm() == 0.0 {
        return Ok((-0.5 * beta.norm_sqr()).exp());
    }
    let obj = CfObjective { r: config.r, beta };
    let starts = random_starts(config.r, start_radius(beta.norm()), config.seed, beta.norm(), config.restarts);
    let (best, _) = best_of(&obj, starts, &config.settings())
        .ok_or(Error::NonConvergence { beta_abs: beta.norm(), best: f64::NAN })?;
    Ok(best.value.exp())
}

fn continuation_sweeps(config: &OptimizerConfig, rows: &mut [BoundRow]) {
    let n = rows.len();
    for i in 1..n {
        let seed = pack(&rows[i - 1].terms);
        if rows[i - 1].terms.len() == config.r {
            rows[i] = refine_row(config, &rows[i], vec![seed]);
        }
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let seed = pack(&rows[i + 1].terms);
        if rows[i + 1].terms.len() == config.r {
            rows[i] = refine_row(config, &rows[i], vec![seed]);
        }
    }
}

/// `chi_r` on `config.beta_grid`. Rows of non-converged points carry a flag.
pub fn build_bound_table(config: &OptimizerConfig) -> Result<BoundTable> {
    build_seeded(config, None)
}

fn build_seeded(config: &OptimizerConfig, lower: Option<&BoundTable>) -> Result<BoundTable> {
    config.validate()?;
    if config.beta_grid.is_empty() {
        return Err(Error::InvalidInput("empty beta grid".into()));
    }
    let mut rows: Vec<BoundRow> = config
        .beta_grid
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let extra = lower.map(|t| embed_lower(config.r, &t.rows[i])).unwrap_or_default();
            optimize_row(config, b, extra)
        })
        .collect();
    if config.continuation {
        continuation_sweeps(config, &mut rows);
    }
    let table = BoundTable { r: config.r, seed: config.seed, restarts: config.restarts, rows };
    log_weight_drift(&table);
    Ok(table)
}

/// Tables for `r = 2..=r_max`, each seeded with the previous one so that
/// `chi_{r+1} >= chi_r` holds pointwise. `restarts(r)` picks the random-start budget.
pub fn build_bound_tables(
    r_max: usize,
    base: &OptimizerConfig,
    restarts: impl Fn(usize) -> usize,
) -> Result<Vec<BoundTable>> {
    let mut tables: Vec<BoundTable> = Vec::new();
    for r in 2..=r_max {
        let config = OptimizerConfig { r, restarts: restarts(r), ..base.clone() };
        let t = build_seeded(&config, tables.last())?;
        tables.push(t);
    }
    Ok(tables)
}

/// Largest relative change of the sorted weight moduli across rows with
/// `|beta| >= 3.5`, logged for inspection.
fn log_weight_drift(table: &BoundTable) {
    let profiles: Vec<Vec<f64>> = table
        .rows
        .iter()
        .filter(|row| row.beta_abs >= 3.5 && row.terms.len() == table.r)
        .map(|row| chain_weights(&row.terms))
        .collect();
    if profiles.len() < 2 {
        return;
    }
    let first = &profiles[0];
    let drift = profiles
        .iter()
        .flat_map(|p| p.iter().zip(first).map(|(a, b)| (a - b).abs() / b.max(1e-300)))
        .fold(0.0, f64::max);
    log::info!("chi_{}: weight drift over |beta| >= 3.5 is {:.3e}", table.r, drift);
}

/// Weight moduli in the order of the amplitudes along the chain, scaled so the first
/// equals 1.
pub fn chain_weights(terms: &[Term]) -> Vec<f64> {
    let mut t: Vec<Term> = terms.to_vec();
    t.sort_by(|a, b| a.alpha.re.total_cmp(&b.alpha.re));
    let first = t[0].lambda.norm();
    t.iter().map(|x| x.lambda.norm() / first).collect()
}

/// Closed-form plateau values `lim chi_r e^{-beta^2/2}` for `r <= 5`; larger `r`
/// falls back to [`plateau_oracle`].
pub fn reference_plateau(r: usize) -> f64 {
    match r {
        0 | 1 => 0.0,
        2 => 0.5,
        3 => std::f64::consts::FRAC_1_SQRT_2,
        4 => (1.0 + 5f64.sqrt()) / 4.0,
        5 => 3f64.sqrt() / 2.0,
        _ => plateau_oracle(r).0,
    }
}

/// `max sum_k l_k l_{k+1} / sum_k l_k^2` over real weights: the top eigenvalue of the
/// path-graph adjacency matrix halved. Returns the value and the optimal weights
/// scaled so the first is 1.
pub fn plateau_oracle(r: usize) -> (f64, Vec<f64>) {
    if r <= 1 {
        return (0.0, vec![1.0; r]);
    }
    let m = nalgebra::DMatrix::<f64>::from_fn(r, r, |i, j| if i.abs_diff(j) == 1 { 0.5 } else { 0.0 });
    let eig = m.symmetric_eigen();
    let (idx, &val) = eig.eigenvalues.iter().enumerate().max_by(|a: &(usize, &f64), b| a.1.total_cmp(b.1)).expect("nonempty");
    let v = eig.eigenvectors.column(idx);
    let w = v.iter().map(|x| x / v[0]).collect();
    (val, w)
}

/// Result of [`min_variance_over_sr`].
#[derive(Clone, Debug)]
pub struct VarianceResult {
    pub variance: f64,
    pub state: CoherentSuperposition,
    pub converged: bool,
}

/// `min` over superpositions of `r` coherent states of the minimal quadrature variance
/// (vacuum = 1). `config.beta_grid` is ignored.
pub fn min_variance_over_sr(r: usize, config: &OptimizerConfig) -> Result<VarianceResult> {
    if r == 0 {
        return Err(Error::InvalidInput("r must be at least 1".into()));
    }
    if r == 1 {
        return Ok(VarianceResult { variance: 1.0, state: CoherentSuperposition::coherent(Complex64::new(0.0, 0.0)), converged: true });
    }
    let obj = VarianceObjective { r };
    // the optimal amplitudes grow with r (|alpha| ~ 1.6 at r = 2, ~ 3.2 at r = 3)
    let radius = 1.5 * r as f64;
    let starts = random_starts(r, radius, config.seed, -1.0, config.restarts);
    // finite-difference gradients cannot reach the analytic tolerance
    let settings = AscentSettings { grad_tol: config.grad_tol.max(1e-6), ..config.settings() };
    let (best, any) =
        best_of(&obj, starts, &settings).ok_or(Error::NonConvergence { beta_abs: 0.0, best: f64::NAN })?;
    let state = CoherentSuperposition::new(terms_of(r, &best.x))?.normalize()?;
    Ok(VarianceResult { variance: -best.value, state, converged: any })
}

/// Analytic gradient of the ascent objective `log |e^{-|beta|^2/2} Phi(beta)|` against
/// central differences at the canonical parameter vector `x` (length `4(r-1)`).
#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2)`.
    pub relative_error: f64,
}

pub fn gradient_check(r: usize, beta: Complex64, x: &[f64], h: f64) -> Result<GradientCheck> {
    if r < 2 || x.len() != 4 * (r - 1) {
        return Err(Error::InvalidInput(format!("need r >= 2 and {} parameters", 4 * r.saturating_sub(1))));
    }
    let obj = CfObjective { r, beta };
    let mut analytic = vec![0.0; x.len()];
    let f = obj.value_and_grad(x, &mut analytic);
    if !f.is_finite() {
        return Err(Error::InvalidInput("parameters outside the admissible region".into()));
    }
    let mut xp = x.to_vec();
    let numeric: Vec<f64> = (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = obj.value(&xp);
            xp[i] = x[i] - h;
            let fm = obj.value(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect();
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let relative_error = if na.max(nn) == 0.0 { 0.0 } else { diff / na.max(nn) };
    Ok(GradientCheck { analytic, numeric, relative_error })
}

/// Objective value at canonical parameters, `log |e^{-|beta|^2/2} Phi(beta)|`.
pub fn objective_value(r: usize, beta: Complex64, x: &[f64]) -> f64 {
    CfObjective { r, beta }.value(x)
}
