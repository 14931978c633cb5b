//! Command implementations behind the `comire` binary: simulate, fit,
//! risk, and check. Each command writes its outputs plus a key-value
//! manifest sufficient to reproduce the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::basis::{build_basis, SplineBasis};
use crate::checks::{geweke_z_default, monitored_functionals, run_ppc};
use crate::error::{ComireError, Result};
use crate::gibbs::{run_chain, ChainSettings, PosteriorDraws};
use crate::io::{
    file_digest, read_dataset, read_draws, write_dataset, write_draws, ConfigFile, Manifest,
};
use crate::model::ModelConfig;
use crate::risk::{posterior_bmd, posterior_risk_curve, RiskQuery};
use crate::simgen::{gen_scenario1, gen_scenario2, gen_scenario3, ScenarioSpec};
use crate::samplers::RngStream;
use crate::util::{linspace, quantile};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const FIT_MANIFEST: &str = "fit_manifest.txt";

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub scenario: u8,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Generate a scenario dataset plus a truth sidecar with the generative
/// dose-response and additional-risk curves at the standard threshold.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = ScenarioSpec::new(args.scenario, args.n, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let mut rng = RngStream::new(spec.seed, 0);

    let threshold = 37.0;
    type BetaFn = Box<dyn Fn(f64) -> Option<f64>>;
    type RiskFn = Box<dyn Fn(f64) -> f64>;
    let (data, beta_at, risk_at): (_, BetaFn, RiskFn) = match spec.id {
            1 => {
                let (data, truth) = gen_scenario1(&mut rng, spec.n)?;
                let t1 = truth.clone();
                let t2 = truth;
                (
                    data,
                    Box::new(move |x| Some(t1.beta(x))),
                    Box::new(move |x| t2.additional_risk(x, threshold)),
                )
            }
            2 => {
                let (data, truth) = gen_scenario2(&mut rng, spec.n)?;
                (
                    data,
                    Box::new(|_| None),
                    Box::new(move |x| truth.additional_risk(x, threshold)),
                )
            }
            3 => {
                let (data, truth) = gen_scenario3(&mut rng, spec.n)?;
                (
                    data,
                    Box::new(|_| None),
                    Box::new(move |x| truth.additional_risk(x, threshold)),
                )
            }
            _ => unreachable!("validated above"),
        };

    let data_path = args.out.join(format!("scenario{}_data.csv", spec.id));
    write_dataset(&data_path, &data)?;

    let truth_path = args.out.join(format!("scenario{}_truth.csv", spec.id));
    let grid = linspace(0.0, data.dose_max().unwrap_or(1.0), 200);
    let mut out = String::from("x,beta,risk_a37\n");
    for &x in &grid {
        let beta = beta_at(x).map_or("NA".to_string(), |b| b.to_string());
        writeln!(out, "{x},{beta},{}", risk_at(x)).expect("string write");
    }
    fs::write(&truth_path, out)?;

    let mut manifest = Manifest::new();
    manifest.set("tool_version", VERSION);
    manifest.set("command", "simulate");
    manifest.set("scenario", spec.id);
    manifest.set("n", spec.n);
    manifest.set("seed", spec.seed);
    manifest.set("dose_shape", spec.dose_shape);
    manifest.set("dose_scale", spec.dose_scale);
    manifest.set("threshold", threshold);
    manifest.set("output_data", data_path.display());
    manifest.set("output_truth", truth_path.display());
    manifest.set("output_data_sha256", file_digest(&data_path)?);
    manifest.write(&args.out.join("simulate_manifest.txt"))?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct FitArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub max_y: Option<f64>,
    pub out: PathBuf,
}

/// Fit the model and persist one draws file per chain plus the manifest
/// that later commands use to rebuild the basis.
pub fn cmd_fit(args: &FitArgs) -> Result<PosteriorDraws> {
    let file_cfg = match &args.config {
        Some(path) => ConfigFile::read(path)?,
        None => ConfigFile::default(),
    };
    let (data, report) = read_dataset(&args.data, args.max_y)?;
    if !report.extra_columns.is_empty() {
        eprintln!(
            "warning: ignoring extra columns: {}",
            report.extra_columns.join(", ")
        );
    }

    let settings = ChainSettings {
        iterations: args.iterations.or(file_cfg.iterations).unwrap_or(5000),
        burn_in: args.burn_in.or(file_cfg.burn_in).unwrap_or(2000),
        thin: args.thin.or(file_cfg.thin).unwrap_or(5),
        chains: args.chains.or(file_cfg.chains).unwrap_or(1),
        seed: args.seed.or(file_cfg.seed).unwrap_or(0),
    };

    let dose_max = match file_cfg.dose_max.or_else(|| data.dose_max()) {
        Some(v) if v > 0.0 => v,
        _ => {
            return Err(ComireError::Config(
                "dose range is empty; supply `dose_max` in the config".into(),
            ))
        }
    };
    let prior_mean = match file_cfg.prior_mean.or_else(|| data.response_mean()) {
        Some(v) => v,
        None => {
            return Err(ComireError::Config(
                "dataset is empty; supply `prior_mean` in the config".into(),
            ))
        }
    };

    let inner_knots = file_cfg.inner_knots.unwrap_or(7);
    let degree = file_cfg.degree.unwrap_or(3);
    let basis = build_basis(inner_knots, dose_max, degree)?;
    let j = basis.j();
    let h = file_cfg.h.unwrap_or(10);
    let config = ModelConfig {
        h,
        basis,
        alpha: vec![file_cfg.alpha.unwrap_or(1.0 / h as f64); h],
        eta: vec![file_cfg.eta.unwrap_or(1.0 / j as f64); j],
        a_tau: file_cfg.a_tau.unwrap_or(2.0),
        b_tau: file_cfg.b_tau.unwrap_or(2.0),
        prior_mean,
        kappa: file_cfg.kappa.unwrap_or(10.0),
    };

    let draws = run_chain(&config, &data, &settings)?;

    fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();
    for chain_id in 0..settings.chains {
        let path = args.out.join(format!("draws_chain_{chain_id}.csv"));
        write_draws(&path, &draws, chain_id)?;
        outputs.push(path);
    }

    let dose_p99 = if data.is_empty() {
        dose_max
    } else {
        quantile(data.x(), 0.99)
    };
    let mut manifest = Manifest::new();
    manifest.set("tool_version", VERSION);
    manifest.set("command", "fit");
    manifest.set("input_data", args.data.display());
    manifest.set("input_data_sha256", file_digest(&args.data)?);
    manifest.set("rows_read", report.rows_read);
    manifest.set("rows_filtered", report.rows_filtered);
    if let Some(ceiling) = args.max_y {
        manifest.set("max_y", ceiling);
    }
    manifest.set("n", data.len());
    manifest.set("seed", settings.seed);
    manifest.set("chains", settings.chains);
    manifest.set("iterations", settings.iterations);
    manifest.set("burn_in", settings.burn_in);
    manifest.set("thin", settings.thin);
    manifest.set("retained_per_chain", settings.retained_per_chain());
    manifest.set("h", config.h);
    manifest.set("j", j);
    manifest.set("inner_knots", inner_knots);
    manifest.set("degree", degree);
    manifest.set("dose_max", dose_max);
    manifest.set("dose_p99", dose_p99);
    manifest.set("alpha", config.alpha[0]);
    manifest.set("eta", config.eta[0]);
    manifest.set("a_tau", config.a_tau);
    manifest.set("b_tau", config.b_tau);
    manifest.set("prior_mean", prior_mean);
    manifest.set("kappa", config.kappa);
    for (k, path) in outputs.iter().enumerate() {
        manifest.set(&format!("output_draws_{k}"), path.display());
    }
    manifest.write(&args.out.join(FIT_MANIFEST))?;
    Ok(draws)
}

/// Resolve a draws argument (directory or single file) into chain files
/// plus the fit manifest sitting next to them.
fn locate_draws(path: &Path) -> Result<(Vec<PathBuf>, Manifest)> {
    let (dir, files) = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("draws_chain_") && n.ends_with(".csv"))
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        (path.to_path_buf(), files)
    } else {
        let dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        (dir, vec![path.to_path_buf()])
    };
    if files.is_empty() {
        return Err(ComireError::Usage(format!(
            "no draw files found under {}",
            path.display()
        )));
    }
    let manifest = Manifest::read(&dir.join(FIT_MANIFEST))?;
    Ok((files, manifest))
}

fn basis_from_manifest(manifest: &Manifest) -> Result<SplineBasis> {
    build_basis(
        manifest.require_usize("inner_knots")?,
        manifest.require_f64("dose_max")?,
        manifest.require_usize("degree")?,
    )
}

#[derive(Debug, Clone)]
pub struct RiskArgs {
    pub draws: PathBuf,
    pub threshold: f64,
    pub q: Vec<f64>,
    pub grid_max: Option<f64>,
    pub out: PathBuf,
}

/// Summarize the posterior additional-risk curve and the benchmark-dose
/// table, one row per requested risk level.
pub fn cmd_risk(args: &RiskArgs) -> Result<()> {
    if args.q.is_empty() {
        return Err(ComireError::Usage(
            "at least one benchmark risk level (--q) is required".into(),
        ));
    }
    let (files, manifest) = locate_draws(&args.draws)?;
    let draws = read_draws(&files)?;
    let basis = basis_from_manifest(&manifest)?;
    let dose_max = manifest.require_f64("dose_max")?;
    let grid_max = args.grid_max.unwrap_or(manifest.require_f64("dose_p99")?);
    if !(grid_max > 0.0) {
        return Err(ComireError::Usage("grid maximum must be positive".into()));
    }

    fs::create_dir_all(&args.out)?;
    let grid = linspace(0.0, grid_max, 100);
    let query = RiskQuery::new(args.threshold, args.q[0], grid)?;
    let curve = posterior_risk_curve(&draws, &basis, &query)?;
    let curve_path = args.out.join("risk_curve.csv");
    let mut out = String::from("x,mean,lo95,hi95\n");
    for p in &curve {
        writeln!(out, "{},{},{},{}", p.x, p.mean, p.lo95, p.hi95).expect("string write");
    }
    fs::write(&curve_path, out)?;

    let bmd_path = args.out.join("bmd_table.csv");
    let mut out = String::from("q,bmd_mean,bmd_lo,bmd_hi,bmdl\n");
    for &q in &args.q {
        match posterior_bmd(&draws, &basis, q, args.threshold, (0.0, dose_max)) {
            Ok(summary) => {
                if summary.unattained > 0 {
                    eprintln!(
                        "warning: q = {q}: {} of {} draws never reach the required risk; \
                         they are excluded from the quantiles",
                        summary.unattained,
                        summary.unattained + summary.samples.len()
                    );
                }
                writeln!(
                    out,
                    "{q},{},{},{},{}",
                    summary.mean, summary.lo95, summary.hi95, summary.bmdl
                )
                .expect("string write");
            }
            Err(e @ ComireError::Degenerate(_)) => {
                eprintln!("warning: q = {q}: {e}; writing NA row");
                writeln!(out, "{q},NA,NA,NA,NA").expect("string write");
            }
            Err(e) => return Err(e),
        }
    }
    fs::write(&bmd_path, out)?;

    let mut m = Manifest::new();
    m.set("tool_version", VERSION);
    m.set("command", "risk");
    m.set("draws_input", args.draws.display());
    m.set("threshold", args.threshold);
    m.set(
        "q_list",
        args.q
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(";"),
    );
    m.set("grid_max", grid_max);
    m.set("grid_points", 100);
    m.set("output_curve", curve_path.display());
    m.set("output_bmd", bmd_path.display());
    m.write(&args.out.join("risk_manifest.txt"))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CheckArgs {
    pub draws: PathBuf,
    pub data: PathBuf,
    pub threshold: f64,
    pub replicates: usize,
    pub bandwidth: Option<f64>,
    pub seed: u64,
    pub max_y: Option<f64>,
    pub out: PathBuf,
}

/// Posterior predictive check plus per-scalar convergence diagnostics.
pub fn cmd_check(args: &CheckArgs) -> Result<()> {
    let (files, manifest) = locate_draws(&args.draws)?;
    let draws = read_draws(&files)?;
    let basis = basis_from_manifest(&manifest)?;
    let (data, _) = read_dataset(&args.data, args.max_y)?;

    let ppc = run_ppc(
        &draws,
        &basis,
        &data,
        args.threshold,
        args.replicates,
        args.bandwidth,
        args.seed,
    )?;

    fs::create_dir_all(&args.out)?;
    let ppc_path = args.out.join("ppc.csv");
    let mut out = String::from("x,observed");
    for k in 1..=ppc.replicates.len() {
        write!(out, ",rep_{k}").expect("string write");
    }
    out.push('\n');
    let fmt = |v: &Option<f64>| v.map_or("NA".to_string(), |v| v.to_string());
    for (g, &x) in ppc.grid.iter().enumerate() {
        write!(out, "{x},{}", fmt(&ppc.observed[g])).expect("string write");
        for rep in &ppc.replicates {
            write!(out, ",{}", fmt(&rep[g])).expect("string write");
        }
        out.push('\n');
    }
    fs::write(&ppc_path, out)?;

    // Geweke scores: every raw draw column for completeness, then the
    // identified reporting functionals that convergence is judged on.
    let diag_path = args.out.join("diagnostics.txt");
    let names = draws.scalar_names();
    let grid_max = manifest
        .require_f64("dose_p99")
        .unwrap_or(manifest.require_f64("dose_max")?);
    let mut out = String::from("chain,param,kind,z,status\n");
    let mut pass = 0usize;
    let mut total = 0usize;
    for chain_id in draws.chain_ids() {
        let raw = names
            .iter()
            .enumerate()
            .map(|(idx, name)| (name.clone(), draws.scalar_series(chain_id, idx)));
        let functional =
            monitored_functionals(&draws, &basis, args.threshold, grid_max, chain_id)?;
        for (kind, (name, series)) in raw
            .map(|r| ("raw", r))
            .chain(functional.into_iter().map(|f| ("functional", f)))
        {
            let (z_text, status) = match geweke_z_default(&series) {
                Ok(Some(z)) => {
                    if kind == "functional" {
                        total += 1;
                        if z.abs() < 3.0 {
                            pass += 1;
                        }
                    }
                    (z.to_string(), if z.abs() < 3.0 { "pass" } else { "fail" })
                }
                Ok(None) => ("NA".into(), "na"),
                Err(e) => (format!("error: {e}"), "na"),
            };
            writeln!(out, "{chain_id},{name},{kind},{z_text},{status}").expect("string write");
        }
    }
    fs::write(&diag_path, out)?;
    println!(
        "ppc tail flag: {:.4}; geweke: {pass}/{total} scalars within |z| < 3",
        ppc.tail_flag
    );

    let mut m = Manifest::new();
    m.set("tool_version", VERSION);
    m.set("command", "check");
    m.set("draws_input", args.draws.display());
    m.set("input_data", args.data.display());
    m.set("input_data_sha256", file_digest(&args.data)?);
    m.set("threshold", args.threshold);
    m.set("replicates", args.replicates);
    m.set("bandwidth", ppc.bandwidth);
    m.set("seed", args.seed);
    m.set("tail_flag", ppc.tail_flag);
    m.set("geweke_pass", pass);
    m.set("geweke_total", total);
    m.set("output_ppc", ppc_path.display());
    m.set("output_diagnostics", diag_path.display());
    m.write(&args.out.join("check_manifest.txt"))?;
    Ok(())
}
