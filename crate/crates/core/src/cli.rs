//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on bad input or a failed computation, 2 when a
//! verdict (acceptance, covariance check, Picard rate) fails.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acceptance;
use crate::config::{default_output_dir, ConfigError, RunConfig};
use crate::dynamics::{picard_solve, run_ensemble, Diffusion, Ensemble, Gain, Scheme};
use crate::grid::{Field, Grid};
use crate::io;
use crate::kernels::{
    check_condition_with, solve_rho_fourier, solve_rho_power, verify_c1prime, Condition, EigenResult,
};
use crate::noise::{smoothed_increment, NoiseMode};
use crate::verify::{
    empirical_covariance, holder_exponent, moment_supremum, ou_covariance, picard_rate_check_diag, Direction,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Verdict(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Verdict(_) => 2,
            _ => 1,
        }
    }
}

fn input<E: Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "neurofield",
    version,
    about = "Stochastic neural field simulator and verifier"
)]
struct Cli {
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Time,
    Space,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the ensemble described by a config and write it to disk.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate C1, C2, C2' and C3' for the configured kernel.
    CheckKernel {
        #[arg(long)]
        config: PathBuf,
        /// Hölder order used for C3'.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Solve for the weight ρ_w by power iteration and, for homogeneous
    /// kernels, by the Fourier construction.
    SolveRho {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Picard iteration on frozen noise with the factorial-rate check.
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8)]
        iterations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistics of a stored ensemble.
    Verify {
        /// Directory written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        covariance: bool,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        lags: Vec<f64>,
        /// Recorded time to analyze (default: the last one).
        #[arg(long)]
        time: Option<f64>,
        #[arg(long, value_enum)]
        holder: Option<DirectionArg>,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Moment orders to report, e.g. `2,4`.
        #[arg(long, value_delimiter = ',')]
        moments: Vec<f64>,
    },
    /// Run the acceptance suite and write verdict.json.
    Accept {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only these criteria, e.g. `--only 1,3`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

/// What `simulate` records next to its outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub fingerprint: String,
    /// Canonical config text; reparses to the same fingerprint.
    pub config: String,
    /// Directory relative file references in `config` resolve against.
    pub config_dir: String,
    pub times: Vec<f64>,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub n_paths: usize,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Reparses the embedded config and checks its fingerprint.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let cfg = RunConfig::from_toml(&self.config, Path::new(&self.config_dir))?;
        if cfg.fingerprint() != self.fingerprint {
            return Err(CliError::Input("manifest config does not match its fingerprint".into()));
        }
        Ok(cfg)
    }

    /// Loads the `ensemble_t{k}.bin` matrices.
    pub fn ensemble(&self, dir: &Path, grid: Grid) -> Result<Ensemble, CliError> {
        let mut data = Vec::with_capacity(self.times.len());
        for k in 0..self.times.len() {
            let m = io::read_matrix(&dir.join(format!("ensemble_t{k}.bin"))).map_err(input)?;
            if m.grid != grid || m.rows != self.n_paths || m.cols != grid.len() {
                return Err(CliError::Input(format!(
                    "ensemble_t{k}.bin does not match the manifest"
                )));
            }
            data.push(m.data);
        }
        Ok(Ensemble {
            grid,
            times: self.times.clone(),
            n_paths: self.n_paths,
            data,
        })
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(input(e)),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate { config, out } => simulate(&config, out.as_deref()),
        Command::CheckKernel { config, alpha } => check_kernel(&config, alpha),
        Command::SolveRho {
            config,
            tol,
            max_iter,
            out,
        } => solve_rho(&config, tol, max_iter, out.as_deref()),
        Command::Picard {
            config,
            iterations,
            out,
        } => picard(&config, iterations, out.as_deref()),
        Command::Verify {
            input,
            covariance,
            lags,
            time,
            holder,
            q,
            moments,
        } => verify(&input, covariance, &lags, time, holder, q, &moments),
        Command::Accept { out, only } => accept(out.as_deref(), &only),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn simulate(config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(config)?;
    let model = cfg.model()?;
    let solver = cfg.solver()?;
    let noise = cfg.noise()?;
    let dir = cfg.output_dir(out);
    let ens = run_ensemble(&model, &solver, &noise).map_err(input)?;
    create_dir(&dir)?;

    let formats = &cfg.output.formats;
    let mut files = Vec::new();
    let n = ens.grid.len();
    if formats.iter().any(|f| f == "fields") {
        create_dir(&dir.join("paths"))?;
        for p in 0..cfg.output.path_files.min(ens.n_paths) {
            for k in 0..ens.times.len() {
                let name = format!("paths/path{p}_t{k}.bin");
                let f = Field::new(ens.grid, ens.path_state(k, p).to_vec()).map_err(input)?;
                io::write_field(&dir.join(&name), &f, "state").map_err(input)?;
                files.push(name);
            }
        }
    }
    if formats.iter().any(|f| f == "ensemble") {
        for k in 0..ens.times.len() {
            let name = format!("ensemble_t{k}.bin");
            io::write_matrix(&dir.join(&name), &ens.grid, ens.n_paths, n, ens.at(k), "ensemble").map_err(input)?;
            files.push(name);
        }
    }
    if formats.iter().any(|f| f == "csv") {
        write_summary(&dir.join("summary.csv"), &ens)?;
        files.push("summary.csv".into());
    }

    let manifest = Manifest {
        fingerprint: cfg.fingerprint(),
        config: cfg.canonical(),
        config_dir: cfg.base_dir.to_string_lossy().into_owned(),
        times: ens.times.clone(),
        dt: solver.dt,
        scheme: solver.scheme,
        seed: noise.seed(),
        n_paths: ens.n_paths,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(input)?;
    write_text(&dir.join("manifest.json"), &text)?;
    println!(
        "simulated {} paths x {} recorded times into {}",
        ens.n_paths,
        ens.times.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    time: f64,
    mean: f64,
    second_moment: f64,
    sup_second_moment: f64,
    sup_abs: f64,
}

/// Per recorded time: spatial average of the path mean and of `E|Y|²`, the
/// supremum over `x` of `E|Y|²`, and the largest `|Y|` seen.
fn write_summary(path: &Path, ens: &Ensemble) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(input)?;
    let n = ens.grid.len();
    let p = ens.n_paths as f64;
    for (k, &time) in ens.times.iter().enumerate() {
        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        let mut sup_abs = 0.0_f64;
        for row in ens.at(k).chunks_exact(n) {
            for i in 0..n {
                m1[i] += row[i];
                m2[i] += row[i] * row[i];
                sup_abs = sup_abs.max(row[i].abs());
            }
        }
        w.serialize(SummaryRow {
            time,
            mean: m1.iter().sum::<f64>() / (p * n as f64),
            second_moment: m2.iter().sum::<f64>() / (p * n as f64),
            sup_second_moment: m2.iter().fold(0.0_f64, |a, &b| a.max(b)) / p,
            sup_abs,
        })
        .map_err(input)?;
    }
    w.flush().map_err(input)
}

fn check_kernel(config: &Path, alpha: f64) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(config)?;
    let spec = cfg.kernel_spec()?;
    let grid = cfg.grid()?;
    println!(
        "{:<5} {:<26} {:>14} {:>14} {:>12}",
        "cond", "verdict", "value(L)", "value(2L)", "constant"
    );
    for cond in Condition::ALL {
        let a = (cond == Condition::C3Prime).then_some(alpha);
        match check_condition_with(&spec, grid, cond, a, cfg.kernel.divergence_ratio) {
            Ok(r) => println!(
                "{:<5} {:<26} {:>14.6e} {:>14.6e} {:>12}",
                cond.to_string(),
                format!("{:?}", r.verdict),
                r.value_at_l,
                r.value_at_2l,
                r.constant.map(|c| format!("{c:.6}")).unwrap_or_else(|| "-".into())
            ),
            Err(e) => println!("{:<5} error: {e}", cond.to_string()),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct RhoSummary {
    method: String,
    lambda: f64,
    residual: f64,
    defect: f64,
    iterations: usize,
    min_rho: f64,
}

fn rho_summary(k: &crate::kernels::KernelModel, r: &EigenResult) -> Result<RhoSummary, CliError> {
    Ok(RhoSummary {
        method: format!("{:?}", r.method),
        lambda: r.lambda,
        residual: r.residual,
        defect: verify_c1prime(k, &r.rho, r.lambda).map_err(input)?,
        iterations: r.iterations,
        min_rho: r.min_rho,
    })
}

fn solve_rho(config: &Path, tol: f64, max_iter: usize, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(config)?;
    let k = cfg.kernel()?;
    let mut results = vec![solve_rho_power(&k, tol, max_iter).map_err(input)?];
    if k.is_homogeneous() {
        results.push(solve_rho_fourier(&k).map_err(input)?);
    }
    let mut summaries = Vec::new();
    for r in &results {
        let s = rho_summary(&k, r)?;
        println!(
            "{:<20} lambda {:.10}  residual {:.3e}  c1' defect {:.3e}  iterations {}",
            s.method, s.lambda, s.residual, s.defect, s.iterations
        );
        summaries.push(s);
    }
    // the two methods solve different (transposed, one-sided) problems, so
    // this distance is informative, not a pass criterion
    let distance = (results.len() == 2).then(|| {
        results[0]
            .rho
            .values()
            .iter()
            .zip(results[1].rho.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    });
    if let Some(d) = distance {
        println!("sup |rho_power - rho_fourier| = {d:.3e}");
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        for r in &results {
            let name = match r.method {
                crate::kernels::EigenMethod::PowerIteration => "rho_power.bin",
                crate::kernels::EigenMethod::FourierConstruction => "rho_fourier.bin",
            };
            io::write_field(&dir.join(name), &r.rho, "rho").map_err(input)?;
        }
        let report = serde_json::json!({ "methods": summaries, "sup_distance": distance });
        write_text(
            &dir.join("solve_rho.json"),
            &serde_json::to_string_pretty(&report).map_err(input)?,
        )?;
    }
    Ok(())
}

fn picard(config: &Path, iterations: usize, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(config)?;
    if cfg.noise.mode != NoiseMode::SmoothedWhite {
        return Err(CliError::Input("noise.mode: picard needs smoothed_white noise".into()));
    }
    let model = cfg.model()?;
    let solver = cfg.solver()?;
    let noise = cfg.noise()?;
    let steps = solver.n_steps();
    // the same increments `simulate` would draw for these paths
    let frozen = crate::par::try_map_indices(solver.n_paths, |p| {
        (0..steps)
            .map(|k| smoothed_increment(&noise, solver.dt, noise.stream(p as u64, k as u64)))
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(input)?;
    let diag = picard_solve(&model, solver.dt, &frozen, iterations, noise.phi_norm2()).map_err(input)?;
    let rate = picard_rate_check_diag(&diag).map_err(input)?;
    println!("{:>3} {:>14}", "n", "H_n(T)");
    for (n, h) in diag.h.iter().enumerate() {
        println!("{n:>3} {h:>14.6e}");
    }
    println!(
        "monotone {}  factorial {}  xi {:.4}  envelope spread {:.3}",
        rate.monotone, rate.factorial, rate.xi, rate.envelope_spread
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        let mut w = csv::Writer::from_path(dir.join("picard.csv")).map_err(input)?;
        w.write_record(["n", "h"]).map_err(input)?;
        for (n, h) in diag.h.iter().enumerate() {
            w.write_record([n.to_string(), h.to_string()]).map_err(input)?;
        }
        w.flush().map_err(input)?;
        write_text(
            &dir.join("picard.json"),
            &serde_json::to_string_pretty(&rate).map_err(input)?,
        )?;
    }
    if rate.pass {
        Ok(())
    } else {
        Err(CliError::Verdict(
            "Picard differences do not show a factorial rate".into(),
        ))
    }
}

/// `σ² c(lag) (1 - e^{-2t}) / 2` when the stored run is the linear OU model
/// under exponential Euler (which is exact in law for it).
fn ou_oracle(cfg: &RunConfig, scheme: Scheme) -> Result<Option<(Field, f64)>, CliError> {
    let model = cfg.model()?;
    let linear = model.kernel.is_zero() || model.gain == Gain::Constant(0.0);
    let zero_start = model.initial.values().iter().all(|&v| v == 0.0);
    let s = match model.diffusion {
        Diffusion::Constant(s) => s,
        _ => return Ok(None),
    };
    if !linear || !zero_start || scheme != Scheme::ExponentialEuler || cfg.noise.mode != NoiseMode::SmoothedWhite {
        return Ok(None);
    }
    Ok(Some((cfg.phi()?, s * s)))
}

fn verify(
    dir: &Path,
    covariance: bool,
    lags: &[f64],
    time: Option<f64>,
    holder: Option<DirectionArg>,
    q: f64,
    moments: &[f64],
) -> Result<(), CliError> {
    let manifest = Manifest::read(dir)?;
    let cfg = manifest.run_config()?;
    let grid = cfg.grid()?;
    let ens = manifest.ensemble(dir, grid)?;
    let t = time.unwrap_or(*ens.times.last().expect("recorded times"));
    let mut report = serde_json::Map::new();
    let mut failures = Vec::new();

    if covariance {
        // lags snap to the mesh; report the ones actually used
        let mesh: Vec<f64> = lags.iter().map(|l| (l / grid.dx()).round() * grid.dx()).collect();
        let oracle = ou_oracle(&cfg, manifest.scheme)?;
        let analytic = oracle
            .as_ref()
            .map(|(phi, s2)| move |lag: f64| s2 * ou_covariance(phi, t, lag).unwrap_or(f64::NAN));
        let r =
            empirical_covariance(&ens, t, &mesh, analytic.as_ref().map(|f| f as &dyn Fn(f64) -> f64)).map_err(input)?;
        println!(
            "{:>8} {:>14} {:>14} {:>12} ",
            "lag", "empirical", "analytic", "mc_sigma"
        );
        for i in 0..r.lags.len() {
            let a = r
                .analytic
                .as_ref()
                .map(|a| format!("{:.6e}", a[i]))
                .unwrap_or_else(|| "-".into());
            println!(
                "{:>8.4} {:>14.6e} {:>14} {:>12.3e}",
                r.lags[i], r.empirical[i], a, r.mc_sigma[i]
            );
        }
        let mut w = csv::Writer::from_path(dir.join("covariance.csv")).map_err(input)?;
        w.write_record(["lag", "empirical", "analytic", "mc_sigma"])
            .map_err(input)?;
        for i in 0..r.lags.len() {
            let a = r.analytic.as_ref().map(|a| a[i].to_string()).unwrap_or_default();
            w.write_record([
                r.lags[i].to_string(),
                r.empirical[i].to_string(),
                a,
                r.mc_sigma[i].to_string(),
            ])
            .map_err(input)?;
        }
        w.flush().map_err(input)?;
        match r.max_z {
            Some(z) => {
                println!("max z = {z:.3}");
                if !(z < 4.0) {
                    failures.push(format!("covariance max z = {z:.3}"));
                }
            }
            None => println!("no analytic covariance for this model"),
        }
        report.insert("covariance".into(), serde_json::to_value(&r).map_err(input)?);
    }

    if let Some(d) = holder {
        let direction = match d {
            DirectionArg::Time => Direction::Time,
            DirectionArg::Space => Direction::Space,
        };
        let e = holder_exponent(&ens, direction, q).map_err(input)?;
        println!(
            "eta_hat ({:?}, q = {}) = {:.4}  r2 = {:.4}",
            e.direction, e.q, e.eta_hat, e.fit_r2
        );
        report.insert("holder".into(), serde_json::to_value(&e).map_err(input)?);
    }

    let mut mreports = Vec::new();
    for &p in moments {
        let m = moment_supremum(&ens, p).map_err(input)?;
        println!(
            "sup E|Y|^{p} = {:.6e} (± {:.2e}) at t = {}  finite {}",
            m.value, m.mc_sigma, m.argmax_time, m.finite
        );
        if !m.finite {
            failures.push(format!("moment p = {p} grows beyond 2x between T/2 and T"));
        }
        mreports.push(m);
    }
    if !mreports.is_empty() {
        report.insert("moments".into(), serde_json::to_value(&mreports).map_err(input)?);
    }

    report.insert("pass".into(), serde_json::Value::Bool(failures.is_empty()));
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(report)).map_err(input)?;
    write_text(&dir.join("verify.json"), &text)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verdict(failures.join("; ")))
    }
}

fn accept(out: Option<&Path>, only: &[u32]) -> Result<(), CliError> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(default_output_dir);
    create_dir(&dir)?;
    let scratch = dir.join("scratch");
    create_dir(&scratch)?;
    let results = acceptance::run_all(&scratch, only, |r| println!("{}", r.line()));
    let verdict = acceptance::verdict_json(&results);
    write_text(
        &dir.join("verdict.json"),
        &serde_json::to_string_pretty(&verdict).map_err(input)?,
    )?;
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("all {} criteria passed", results.len());
        Ok(())
    } else {
        Err(CliError::Verdict(format!(
            "{failed} of {} criteria failed",
            results.len()
        )))
    }
}
