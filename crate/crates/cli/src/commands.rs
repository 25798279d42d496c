use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use num_complex::Complex64;
use qncq::bounds::{self, BoundTable, OptimizerConfig};
use qncq::charfn::CfEvaluator;
use qncq::focktools::{self, DncResult};
use qncq::states::{FockDensityMatrix, StateSpec};
use qncq::witness::{self, SampledCF, WitnessTarget};
use serde::Serialize;

use crate::manifest::{sidecar, DirLock, RunManifest};
use crate::{BoundsArgs, CfArgs, DncArgs, PhotonArgs, PhotonOp, WitnessArgs};

/// Default `--restarts auto` ceiling.
const AUTO_RESTART_CAP: usize = 4096;

fn input_error(msg: String) -> anyhow::Error {
    qncq::Error::InvalidInput(msg).into()
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn read_spec(path: &Path) -> Result<StateSpec> {
    Ok(StateSpec::from_json(&read_input(path)?)?)
}

/// Accepts a bare `{"dim", "entries"}` matrix or a `fock_matrix` spec.
fn read_density_matrix(path: &Path) -> Result<FockDensityMatrix> {
    let text = read_input(path)?;
    if let Ok(rho) = serde_json::from_str::<FockDensityMatrix>(&text) {
        return Ok(rho);
    }
    match StateSpec::from_json(&text)? {
        StateSpec::FockMatrix(rho) => Ok(rho),
        _ => Err(input_error(format!("{} is not a Fock-space density matrix", path.display()))),
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn parse_rank_range(s: &str) -> Result<(usize, usize)> {
    let bad = || input_error(format!("--r {s:?}: expected `r` or `lo..hi`"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
        }
        None => {
            let r = s.trim().parse().map_err(|_| bad())?;
            (r, r)
        }
    };
    if lo < 1 || hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_scan(s: &str) -> Result<Vec<f64>> {
    let bad = || input_error(format!("--scan-lambda {s:?}: expected start:stop:step"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0 && stop >= start && start >= 0.0) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

pub fn bounds(a: &BoundsArgs) -> Result<()> {
    let (lo, hi) = parse_rank_range(&a.r)?;
    if !(a.beta_max.is_finite() && a.beta_max >= 0.0 && a.step > 0.0) {
        return Err(input_error("--beta-max must be >= 0 and --step > 0".into()));
    }
    let restarts = |r: usize| -> Result<usize> {
        if a.restarts == "auto" {
            let n = bounds::default_restarts(r);
            if n > AUTO_RESTART_CAP && !a.no_restart_cap {
                log::warn!("r = {r}: capping {n} automatic restarts at {AUTO_RESTART_CAP} (see --no-restart-cap)");
                return Ok(AUTO_RESTART_CAP);
            }
            Ok(n)
        } else {
            a.restarts.parse().ok().filter(|&n| n > 0).ok_or_else(|| input_error(format!("--restarts {:?}", a.restarts)))
        }
    };
    for r in lo.max(2)..=hi {
        restarts(r)?;
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let _lock = DirLock::acquire(&a.out)?;

    let grid = bounds::grid(a.beta_max, a.step);
    let base = OptimizerConfig::new(2).with_grid(grid.clone()).with_seed(a.seed);
    let mut tables = Vec::new();
    if lo == 1 {
        tables.push(BoundTable::classical(&grid));
    }
    if hi >= 2 {
        if lo == hi {
            let config = OptimizerConfig { r: hi, restarts: restarts(hi)?, ..base };
            tables.push(bounds::build_bound_table(&config)?);
        } else {
            let built = bounds::build_bound_tables(hi, &base, |r| restarts(r).expect("checked above"))?;
            tables.extend(built.into_iter().filter(|t| t.r >= lo));
        }
    }

    let mut manifest = RunManifest::new("bounds", a, Some(a.seed))?;
    for t in &tables {
        let csv_path = a.out.join(bounds::table_file_name(t.r));
        let mut buf = Vec::new();
        bounds::write_table_csv(t, &mut buf)?;
        write_file(&csv_path, &buf)?;
        manifest.add_output(&csv_path);
        let json_path = csv_path.with_extension("json");
        let mut buf = Vec::new();
        bounds::write_table_json(t, &mut buf)?;
        write_file(&json_path, &buf)?;
        manifest.add_output(&json_path);
        let last = t.rows.last().expect("nonempty grid");
        println!("chi_{}: {} rows, chi_normalized({}) = {:.6}", t.r, t.rows.len(), last.beta_abs, last.normalized_chi);
    }
    if a.normalized {
        let path = a.out.join("normalized.csv");
        write_file(&path, &normalized_csv(&grid, &tables)?)?;
        manifest.add_output(&path);
    }
    manifest.write(&a.out.join("manifest.json"))?;

    let failed: Vec<(usize, &bounds::BoundRow)> =
        tables.iter().flat_map(|t| t.rows.iter().filter(|r| !r.converged).map(move |r| (t.r, r))).collect();
    if !failed.is_empty() {
        for (r, row) in &failed {
            log::warn!("chi_{r} did not converge at |beta| = {}", row.beta_abs);
        }
        if !a.allow_nonconverged {
            let (_, row) = failed[0];
            return Err(qncq::Error::NonConvergence { beta_abs: row.beta_abs, best: row.chi })
                .context(format!("{} non-converged row(s); rerun with more restarts or --allow-nonconverged", failed.len()));
        }
    }
    Ok(())
}

/// `beta_abs,chi_1,chi_2,...` with every column scaled by `e^{-beta^2/2}`.
fn normalized_csv(grid: &[f64], tables: &[BoundTable]) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["beta_abs".to_string()];
    let with_classical = tables.first().is_none_or(|t| t.r != 1);
    if with_classical {
        header.push("chi_1".into());
    }
    header.extend(tables.iter().map(|t| format!("chi_{}", t.r)));
    wr.write_record(&header)?;
    for (i, &b) in grid.iter().enumerate() {
        let mut rec = vec![b.to_string()];
        if with_classical {
            rec.push((-0.5 * b * b).exp().to_string());
        }
        rec.extend(tables.iter().map(|t| t.rows[i].normalized_chi.to_string()));
        wr.write_record(&rec)?;
    }
    wr.into_inner().map_err(|e| anyhow!("{e}"))
}

#[derive(Serialize)]
struct DncReport {
    #[serde(flatten)]
    result: DncResult,
    schmidt_rank: Option<usize>,
}

pub fn dnc(a: &DncArgs) -> Result<()> {
    let rho = read_density_matrix(&a.input)?;
    let result = focktools::dnc_finite_with(&rho, a.tol, a.zero_tol)?;
    println!("DNC = {}", result.dnc);
    println!("highest Fock index = {}", result.highest_fock);
    println!("polynomial order = {}", result.polynomial_order);
    let schmidt_rank = rho.as_pure(a.tol).map(|psi| focktools::beam_splitter_schmidt_rank(&psi, a.tol));
    if let Some(k) = schmidt_rank {
        println!("Schmidt rank = {k}");
        if k != result.dnc {
            log::warn!("Schmidt rank {k} disagrees with DNC {}; try another --tol", result.dnc);
        }
    }
    if let Some(out) = &a.out {
        let report = DncReport { result, schmidt_rank };
        write_file(out, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
        let mut m = RunManifest::new("dnc", a, None)?;
        m.add_input(&a.input)?;
        m.add_output(out);
        m.write(&sidecar(out))?;
    }
    Ok(())
}

pub fn cf(a: &CfArgs) -> Result<()> {
    let spec = read_spec(&a.spec)?;
    let ev = CfEvaluator::new(&spec)?;
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["beta_abs", "max_abs", "phase_at_max", "abs_real_axis", "abs_imag_axis"])?;
    for b in bounds::grid(a.beta_max, a.step) {
        let (phase, max_abs) = ev.max_abs_over_phase(b);
        let re = ev.eval(Complex64::new(b, 0.0))?.norm();
        let im = ev.eval(Complex64::new(0.0, b))?.norm();
        wr.write_record([b, max_abs, phase, re, im].map(|v| v.to_string()))?;
    }
    let bytes = wr.into_inner().map_err(|e| anyhow!("{e}"))?;
    match &a.out {
        Some(out) => {
            let _lock = DirLock::acquire(&parent_dir(out))?;
            write_file(out, &bytes)?;
            let mut m = RunManifest::new("cf", a, None)?;
            m.add_input(&a.spec)?;
            m.add_output(out);
            m.write(&sidecar(out))?;
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

/// Every `chi_<r>.csv` with `r >= 2` in `dir`, sorted by `r`.
fn read_tables(dir: &Path) -> Result<(Vec<BoundTable>, Vec<PathBuf>)> {
    let entries = fs::read_dir(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let Some(r) = name.strip_prefix("chi_").and_then(|s| s.strip_suffix(".csv")).and_then(|s| s.parse::<usize>().ok())
        else {
            continue;
        };
        if r >= 2 {
            found.push((r, path));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(input_error(format!("no chi_<r>.csv tables in {}", dir.display())));
    }
    let mut tables = Vec::new();
    let mut paths = Vec::new();
    for (_, path) in found {
        let file = fs::File::open(&path)?;
        tables.push(bounds::read_table_csv(file).map_err(|e| input_error(format!("{}: {e}", path.display())))?);
        paths.push(path);
    }
    Ok((tables, paths))
}

pub fn witness(a: &WitnessArgs) -> Result<()> {
    let (tables, table_paths) = read_tables(&a.tables)?;
    let mut m = RunManifest::new("witness", a, None)?;
    for p in &table_paths {
        m.add_input(p)?;
    }
    let bytes = if let Some(scan) = &a.scan_lambda {
        let spec_path = a.spec.as_ref().expect("clap enforces a target");
        m.add_input(spec_path)?;
        let xi = match read_spec(spec_path)? {
            StateSpec::SqVacMixture { xi, .. } | StateSpec::SqPlusVac { xi, .. } | StateSpec::SqueezedVacuum { xi } => xi,
            _ => return Err(input_error("--scan-lambda needs a squeezed-vacuum spec".into())),
        };
        let rows = witness::mixture_threshold_scan(xi, &parse_scan(scan)?, &tables)?;
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(["lambda_abs", "certified_dnc_gt"])?;
        for (l, c) in &rows {
            wr.write_record([l.to_string(), c.to_string()])?;
        }
        let mut prev = None;
        for &(l, c) in &rows {
            if prev.is_some_and(|p| c > p) {
                eprintln!("|lambda| = {l}: certified DNC ≥ {}", c + 1);
            }
            prev = Some(c);
        }
        wr.into_inner().map_err(|e| anyhow!("{e}"))?
    } else {
        let report = match (&a.spec, &a.samples) {
            (Some(path), _) => {
                m.add_input(path)?;
                let spec = read_spec(path)?;
                let k = a.k_sigma.unwrap_or(witness::DEFAULT_K_SIGMA_ANALYTIC);
                witness::certify(WitnessTarget::Spec(&spec), &tables, k, a.clip)?
            }
            (None, Some(path)) => {
                m.add_input(path)?;
                let samples = SampledCF::read_csv(fs::File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?)?;
                let k = a.k_sigma.unwrap_or(witness::DEFAULT_K_SIGMA_SAMPLES);
                witness::certify(WitnessTarget::Samples(&samples), &tables, k, a.clip)?
            }
            (None, None) => unreachable!("clap enforces a target"),
        };
        eprintln!("{}", report.summary());
        (serde_json::to_string_pretty(&report)? + "\n").into_bytes()
    };
    match &a.out {
        Some(out) => {
            let _lock = DirLock::acquire(&parent_dir(out))?;
            write_file(out, &bytes)?;
            m.add_output(out);
            m.write(&sidecar(out))?;
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

pub fn photon(a: &PhotonArgs) -> Result<()> {
    let rho = read_density_matrix(&a.input)?;
    let before = focktools::dnc_finite(&rho, a.tol)?;
    let out_rho = match a.op {
        PhotonOp::Add => focktools::photon_add_fock(&rho, a.n)?,
        PhotonOp::Subtract => {
            let mut cur = rho;
            for _ in 0..a.n {
                cur = focktools::photon_subtract_fock(&cur)?;
            }
            cur
        }
    };
    let after = focktools::dnc_finite(&out_rho, a.tol)?;
    let _lock = DirLock::acquire(&parent_dir(&a.out))?;
    write_file(&a.out, (serde_json::to_string_pretty(&StateSpec::FockMatrix(out_rho))? + "\n").as_bytes())?;
    let mut m = RunManifest::new("photon", a, None)?;
    m.add_input(&a.input)?;
    m.add_output(&a.out);
    m.write(&sidecar(&a.out))?;
    println!("DNC {} → {}", before.dnc, after.dnc);
    Ok(())
}
