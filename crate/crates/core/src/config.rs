//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! dim = 1
//! half_width = 10.0
//! points_per_dim = 256
//!
//! [kernel]
//! spec = "gaussian(1, 1)"
//!
//! [noise]
//! phi = "indicator(1)"
//! seed = 7
//!
//! [model]
//! gain = "sigmoid(1)"
//! diffusion = "constant(1)"
//!
//! [solver]
//! dt = 0.01
//! t_end = 1.0
//! n_paths = 100
//! ```
//!
//! Builtins are written as calls: `name(arg, ...)`. Relative file paths are
//! resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{Diffusion, Gain, ModelSpec, Scheme, SolverConfig};
use crate::grid::{Field, Grid, GridSpec};
use crate::io;
use crate::kernels::{KernelModel, KernelSpec, DEFAULT_DIVERGENCE_RATIO};
use crate::noise::{identity_spectrum, matched_spectrum, NoiseMode, NoiseSpec, PhiSpec, SpectralMode};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NEUROFIELD_OUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {msg}")]
    Field { field: &'static str, msg: String },
    #[error("{field}: {source}")]
    File { field: &'static str, source: io::IoError },
}

fn field_err(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// `zero`, `delta`, `gaussian(a, s)`, `mexican_hat(a1, s1, a2, s2)`,
    /// `exponential(a, s)`, `rank_one_gaussian`, `inverse_product`,
    /// `file` (dense matrix at `path`) or `profile_file` (homogeneous
    /// profile field at `path`).
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default = "default_ratio")]
    pub divergence_ratio: f64,
}

fn default_ratio() -> f64 {
    DEFAULT_DIVERGENCE_RATIO
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "default_mode")]
    pub mode: NoiseMode,
    /// `delta`, `indicator(h)`, `gaussian(s)` or `file` (field at `phi_path`).
    #[serde(default = "default_phi")]
    pub phi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_path: Option<String>,
    /// Q-Wiener only: `identity`, `matched`, `matched(k)` or the path of a
    /// text file with one `lambda,field_path` pair per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_mode() -> NoiseMode {
    NoiseMode::SmoothedWhite
}

fn default_phi() -> String {
    "delta".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `sigmoid(slope)`, `heaviside_smooth(beta, theta)`, `constant(c)`.
    pub gain: String,
    /// `constant(s0)`, `affine(s0, s1)`, `bounded_smooth(amplitude[, base])`.
    pub diffusion: String,
    /// `zero`, `constant(c)`, `gaussian(a, s)` or `file` (at `initial_path`).
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_path: Option<String>,
}

fn default_initial() -> String {
    "zero".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "one")]
    pub n_paths: usize,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn default_scheme() -> Scheme {
    Scheme::ExponentialEuler
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Any of `fields` (per-path field files), `ensemble` (one matrix per
    /// recorded time), `csv` (summary moments).
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    /// Number of paths written as individual field files.
    #[serde(default = "default_path_files")]
    pub path_files: usize,
}

fn default_formats() -> Vec<String> {
    vec!["fields".into(), "ensemble".into(), "csv".into()]
}

fn default_path_files() -> usize {
    4
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
            path_files: default_path_files(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub kernel: KernelSection,
    pub noise: NoiseSection,
    pub model: ModelSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// `name(a, b, ...)` or a bare `name`.
pub fn parse_call(field: &'static str, text: &str) -> Result<(String, Vec<f64>), ConfigError> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text.to_ascii_lowercase(), Vec::new()));
    };
    if !text.ends_with(')') {
        return Err(field_err(field, format!("missing `)` in `{text}`")));
    }
    let name = text[..open].trim().to_ascii_lowercase();
    let inner = &text[open + 1..text.len() - 1];
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| field_err(field, format!("`{}` is not a number in `{text}`", a.trim())))
            })
            .collect::<Result<_, _>>()?
    };
    Ok((name, args))
}

fn arity(field: &'static str, name: &str, args: &[f64], allowed: &[usize]) -> Result<(), ConfigError> {
    if allowed.contains(&args.len()) {
        Ok(())
    } else {
        Err(field_err(
            field,
            format!("`{name}` takes {allowed:?} arguments, got {}", args.len()),
        ))
    }
}

pub fn parse_gain(text: &str) -> Result<Gain, ConfigError> {
    const F: &str = "model.gain";
    let (name, a) = parse_call(F, text)?;
    match name.as_str() {
        "sigmoid" => {
            arity(F, &name, &a, &[0, 1])?;
            Ok(Gain::Sigmoid {
                slope: a.first().copied().unwrap_or(1.0),
            })
        }
        "heaviside_smooth" => {
            arity(F, &name, &a, &[2])?;
            Ok(Gain::HeavisideSmooth {
                beta: a[0],
                theta: a[1],
            })
        }
        "constant" => {
            arity(F, &name, &a, &[1])?;
            Ok(Gain::Constant(a[0]))
        }
        "zero" => Ok(Gain::Constant(0.0)),
        _ => Err(field_err(F, format!("unknown gain `{name}`"))),
    }
}

pub fn parse_diffusion(text: &str) -> Result<Diffusion, ConfigError> {
    const F: &str = "model.diffusion";
    let (name, a) = parse_call(F, text)?;
    match name.as_str() {
        "constant" => {
            arity(F, &name, &a, &[1])?;
            Ok(Diffusion::Constant(a[0]))
        }
        "affine" => {
            arity(F, &name, &a, &[2])?;
            Ok(Diffusion::Affine { s0: a[0], s1: a[1] })
        }
        "bounded_smooth" => {
            arity(F, &name, &a, &[1, 2])?;
            Ok(Diffusion::BoundedSmooth {
                amplitude: a[0],
                base: a.get(1).copied().unwrap_or(0.0),
            })
        }
        "zero" => Ok(Diffusion::Constant(0.0)),
        _ => Err(field_err(F, format!("unknown diffusion `{name}`"))),
    }
}

pub fn parse_phi(text: &str) -> Result<PhiSpec, ConfigError> {
    const F: &str = "noise.phi";
    let (name, a) = parse_call(F, text)?;
    match name.as_str() {
        "delta" => Ok(PhiSpec::Delta),
        "indicator" => {
            arity(F, &name, &a, &[1])?;
            Ok(PhiSpec::Indicator { width: a[0] })
        }
        "gaussian" => {
            arity(F, &name, &a, &[1])?;
            Ok(PhiSpec::Gaussian { scale: a[0] })
        }
        _ => Err(field_err(F, format!("unknown phi `{name}`"))),
    }
}

/// Builtin kernel recipes (file kernels are handled by [`RunConfig`]).
pub fn parse_kernel(text: &str) -> Result<KernelSpec, ConfigError> {
    const F: &str = "kernel.spec";
    let (name, a) = parse_call(F, text)?;
    let spec = match name.as_str() {
        "zero" => KernelSpec::Zero,
        "delta" => KernelSpec::Delta,
        "gaussian" => {
            arity(F, &name, &a, &[2])?;
            KernelSpec::Gaussian {
                amplitude: a[0],
                scale: a[1],
            }
        }
        "mexican_hat" => {
            arity(F, &name, &a, &[4])?;
            KernelSpec::MexicanHat {
                a1: a[0],
                s1: a[1],
                a2: a[2],
                s2: a[3],
            }
        }
        "exponential" => {
            arity(F, &name, &a, &[2])?;
            KernelSpec::Exponential {
                amplitude: a[0],
                scale: a[1],
            }
        }
        "rank_one_gaussian" => KernelSpec::RankOneGaussian,
        "inverse_product" => KernelSpec::InverseProduct,
        _ => return Err(field_err(F, format!("unknown kernel `{name}`"))),
    };
    if a.iter().any(|v| !v.is_finite()) {
        return Err(field_err(F, "non-finite kernel parameter"));
    }
    Ok(spec)
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    /// Parses and validates; file references are checked for existence
    /// and grid agreement before anything runs.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn required_path(&self, field: &'static str, p: &Option<String>) -> Result<PathBuf, ConfigError> {
        let p = p
            .as_ref()
            .ok_or_else(|| field_err(field, "a path is required for `file`"))?;
        let full = self.resolve(p);
        if !full.exists() {
            return Err(field_err(field, format!("{} does not exist", full.display())));
        }
        Ok(full)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid()?;
        self.kernel_spec()?;
        if !(self.kernel.divergence_ratio > 1.0) {
            return Err(field_err("kernel.divergence_ratio", "must exceed 1"));
        }
        self.phi()?;
        if self.noise.mode == NoiseMode::QWiener && self.noise.spectrum.is_none() {
            return Err(field_err("noise.spectrum", "required for q_wiener noise"));
        }
        parse_gain(&self.model.gain)?;
        parse_diffusion(&self.model.diffusion)?;
        self.initial(grid)?;
        self.solver()?;
        for f in &self.output.formats {
            if !["fields", "ensemble", "csv"].contains(&f.as_str()) {
                return Err(field_err("output.formats", format!("unknown format `{f}`")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(GridSpec::new(
            self.grid.dim,
            self.grid.half_width,
            self.grid.points_per_dim,
        ))
        .map_err(|e| field_err("grid", e.to_string()))
    }

    /// The kernel recipe; file kernels come back as [`KernelSpec::Sampled`].
    pub fn kernel_spec(&self) -> Result<KernelSpec, ConfigError> {
        let grid = self.grid()?;
        match self.kernel.spec.trim() {
            "file" => {
                let path = self.required_path("kernel.path", &self.kernel.path)?;
                let m = io::read_matrix(&path).map_err(|source| ConfigError::File {
                    field: "kernel.path",
                    source,
                })?;
                if m.grid != grid || m.rows != grid.len() || m.cols != grid.len() {
                    return Err(field_err("kernel.path", "matrix does not match the [grid] section"));
                }
                let k = KernelModel::general(grid, m.data).map_err(|e| field_err("kernel.path", e.to_string()))?;
                Ok(KernelSpec::Sampled(k))
            }
            "profile_file" => {
                let path = self.required_path("kernel.path", &self.kernel.path)?;
                let (f, _) = io::read_field(&path).map_err(|source| ConfigError::File {
                    field: "kernel.path",
                    source,
                })?;
                if *f.grid() != grid {
                    return Err(field_err("kernel.path", "profile does not match the [grid] section"));
                }
                Ok(KernelSpec::Sampled(KernelModel::homogeneous(f)))
            }
            other => parse_kernel(other),
        }
    }

    pub fn kernel(&self) -> Result<KernelModel, ConfigError> {
        self.kernel_spec()?
            .build(self.grid()?)
            .map_err(|e| field_err("kernel.spec", e.to_string()))
    }

    pub fn phi(&self) -> Result<Field, ConfigError> {
        let grid = self.grid()?;
        if self.noise.phi.trim() == "file" {
            let path = self.required_path("noise.phi_path", &self.noise.phi_path)?;
            let (f, _) = io::read_field(&path).map_err(|source| ConfigError::File {
                field: "noise.phi_path",
                source,
            })?;
            if *f.grid() != grid {
                return Err(field_err("noise.phi_path", "phi does not match the [grid] section"));
            }
            return Ok(f);
        }
        parse_phi(&self.noise.phi)?
            .sample(grid)
            .map_err(|e| field_err("noise.phi", e.to_string()))
    }

    fn spectrum(&self, grid: &Grid, phi: &Field) -> Result<Vec<SpectralMode>, ConfigError> {
        const F: &str = "noise.spectrum";
        let text = self.noise.spectrum.as_deref().ok_or_else(|| field_err(F, "missing"))?;
        let (name, a) = parse_call(F, text).unwrap_or_default();
        match name.as_str() {
            "identity" => return Ok(identity_spectrum(grid)),
            // matched to φ itself; pair with phi = "delta" for the smoothed-white law
            "matched" => {
                arity(F, &name, &a, &[0, 1])?;
                return Ok(matched_spectrum(phi, a.first().map(|&k| k as usize)));
            }
            _ => {}
        }
        let path = self.required_path(F, &Some(text.to_string()))?;
        let listing = fs::read_to_string(&path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut modes = Vec::new();
        for (n, line) in listing.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lam, file) = line
                .split_once(',')
                .ok_or_else(|| field_err(F, format!("line {}: expected `lambda,path`", n + 1)))?;
            let lambda: f64 = lam
                .trim()
                .parse()
                .map_err(|_| field_err(F, format!("line {}: bad lambda `{lam}`", n + 1)))?;
            let (basis, _) =
                io::read_field(&dir.join(file.trim())).map_err(|source| ConfigError::File { field: F, source })?;
            modes.push(SpectralMode { lambda, basis });
        }
        Ok(modes)
    }

    /// The noise recipe. The seed comes from `[noise]`.
    pub fn noise(&self) -> Result<NoiseSpec, ConfigError> {
        let phi = self.phi()?;
        let r = match self.noise.mode {
            NoiseMode::SmoothedWhite => NoiseSpec::smoothed_white(phi, self.noise.seed),
            NoiseMode::QWiener => {
                let grid = self.grid()?;
                let spectrum = self.spectrum(&grid, &phi)?;
                NoiseSpec::qwiener(phi, spectrum, self.noise.seed)
            }
        };
        r.map_err(|e| field_err("noise", e.to_string()))
    }

    fn initial(&self, grid: Grid) -> Result<Field, ConfigError> {
        const F: &str = "model.initial";
        if self.model.initial.trim() == "file" {
            let path = self.required_path("model.initial_path", &self.model.initial_path)?;
            let (f, _) = io::read_field(&path).map_err(|source| ConfigError::File {
                field: "model.initial_path",
                source,
            })?;
            if *f.grid() != grid {
                return Err(field_err(
                    "model.initial_path",
                    "initial field does not match the [grid] section",
                ));
            }
            return Ok(f);
        }
        let (name, a) = parse_call(F, &self.model.initial)?;
        match name.as_str() {
            "zero" => Ok(Field::zeros(grid)),
            "constant" => {
                arity(F, &name, &a, &[1])?;
                Ok(Field::constant(grid, a[0]))
            }
            "gaussian" => {
                arity(F, &name, &a, &[2])?;
                let (amp, s2) = (a[0], a[1] * a[1]);
                Ok(Field::from_fn(grid, |x| {
                    amp * (-x.iter().map(|v| v * v).sum::<f64>() / s2).exp()
                }))
            }
            _ => Err(field_err(F, format!("unknown initial condition `{name}`"))),
        }
    }

    pub fn model(&self) -> Result<ModelSpec, ConfigError> {
        let grid = self.grid()?;
        ModelSpec::new(
            self.kernel()?,
            parse_gain(&self.model.gain)?,
            parse_diffusion(&self.model.diffusion)?,
            self.initial(grid)?,
        )
        .map_err(|e| field_err("model", e.to_string()))
    }

    pub fn solver(&self) -> Result<SolverConfig, ConfigError> {
        let s = &self.solver;
        if s.n_paths == 0 {
            return Err(field_err("solver.n_paths", "must be at least 1"));
        }
        SolverConfig::new(s.dt, s.t_end, s.scheme, s.record_every, s.n_paths)
            .map_err(|e| field_err("solver", e.to_string()))
    }

    /// Canonical TOML of everything that determines the results (the output
    /// directory is left out).
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output.directory = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of [`RunConfig::canonical`], hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// `--out`, else `[output] directory`, else `$NEUROFIELD_OUT`, else
    /// `neurofield-out`.
    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Some(d) = &self.output.directory {
            return self.resolve(d);
        }
        default_output_dir()
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("neurofield-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[grid]
dim = 1
half_width = 10.0
points_per_dim = 64

[kernel]
spec = "mexican_hat(2, 1, 1, 2)"

[noise]
phi = "gaussian(1)"
seed = 3

[model]
gain = "sigmoid(2)"
diffusion = "bounded_smooth(0.5, 1)"
initial = "gaussian(1, 2)"

[solver]
dt = 0.01
t_end = 0.5
scheme = "euler_maruyama"
n_paths = 8
record_every = 5
"#;

    #[test]
    fn parses_and_builds() {
        let c = RunConfig::from_toml(BASIC, Path::new(".")).unwrap();
        assert_eq!(parse_gain(&c.model.gain).unwrap(), Gain::Sigmoid { slope: 2.0 });
        assert_eq!(
            parse_diffusion(&c.model.diffusion).unwrap(),
            Diffusion::BoundedSmooth {
                amplitude: 0.5,
                base: 1.0
            }
        );
        let m = c.model().unwrap();
        assert_eq!(m.grid().len(), 64);
        assert_eq!(c.solver().unwrap().scheme, Scheme::EulerMaruyama);
        assert_eq!(c.noise().unwrap().seed(), 3);
        assert_eq!(c.output, OutputSection::default());
    }

    #[test]
    fn canonical_round_trip_keeps_fingerprint() {
        let c = RunConfig::from_toml(BASIC, Path::new(".")).unwrap();
        let back = RunConfig::from_toml(&c.canonical(), Path::new(".")).unwrap();
        assert_eq!(back.fingerprint(), c.fingerprint());
        assert_eq!(back.grid, c.grid);
        let mut other = c.clone();
        other.noise.seed = 4;
        assert_ne!(other.fingerprint(), c.fingerprint());
        let mut moved = c.clone();
        moved.output.directory = Some("elsewhere".into());
        assert_eq!(moved.fingerprint(), c.fingerprint());
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = BASIC.replace("sigmoid(2)", "sigmoid(2, 3)");
        let e = RunConfig::from_toml(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.starts_with("model.gain"), "{e}");

        let bad = BASIC.replace("points_per_dim = 64", "points_per_dim = 63");
        assert!(RunConfig::from_toml(&bad, Path::new("."))
            .unwrap_err()
            .to_string()
            .starts_with("grid"));

        let bad = BASIC.replace("dt = 0.01", "dt = \"fast\"");
        let e = RunConfig::from_toml(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("line"), "{e}");

        let bad = BASIC.replace("mexican_hat(2, 1, 1, 2)", "file");
        let e = RunConfig::from_toml(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.starts_with("kernel.path"), "{e}");

        let bad = BASIC.replace("[solver]", "[solver]\nbogus = 1");
        assert!(RunConfig::from_toml(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn call_parsing() {
        assert_eq!(
            parse_call("x", " Gaussian( 1 , 2.5 ) ").unwrap(),
            ("gaussian".into(), vec![1.0, 2.5])
        );
        assert_eq!(parse_call("x", "delta").unwrap(), ("delta".into(), vec![]));
        assert!(parse_call("x", "gaussian(1").is_err());
        assert!(parse_call("x", "gaussian(a)").is_err());
    }

    #[test]
    fn file_inputs_are_checked_against_the_grid() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::line(10.0, 64).unwrap();
        let phi = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        io::write_field(&dir.path().join("phi.bin"), &phi, "phi").unwrap();
        io::write_field(
            &dir.path().join("small.bin"),
            &Field::zeros(Grid::line(1.0, 8).unwrap()),
            "phi",
        )
        .unwrap();
        let text = BASIC.replace("phi = \"gaussian(1)\"", "phi = \"file\"\nphi_path = \"phi.bin\"");
        let c = RunConfig::from_toml(&text, dir.path()).unwrap();
        assert_eq!(c.phi().unwrap(), phi);
        let text = text.replace("phi.bin", "small.bin");
        assert!(RunConfig::from_toml(&text, dir.path())
            .unwrap_err()
            .to_string()
            .starts_with("noise.phi_path"));

        // spectrum listing
        let e = crate::noise::fourier_basis(&g, Some(2));
        io::write_field(&dir.path().join("e0.bin"), &e[0].basis, "basis").unwrap();
        io::write_field(&dir.path().join("e1.bin"), &e[1].basis, "basis").unwrap();
        fs::write(dir.path().join("spec.txt"), "# lambda,path\n0.5,e0.bin\n0.25, e1.bin\n").unwrap();
        let text = BASIC.replace("[noise]", "[noise]\nmode = \"q_wiener\"\nspectrum = \"spec.txt\"");
        let c = RunConfig::from_toml(&text, dir.path()).unwrap();
        assert_eq!(c.noise().unwrap().retained_trace(), Some(0.75));
    }
}
