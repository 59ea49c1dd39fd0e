//! Time integrators for
//! `dY = (-Y + F(Y)) dt + σ(Y) dW^φ`, `F(h)(x) = ∫ w(x,y) G(h(y)) dy`,
//! and the Picard iteration used as an oracle for the mild solution.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid, GridError};
use crate::kernels::{apply_kernel, KernelError, KernelModel};
use crate::noise::{qwiener_increment, smoothed_increment, NoiseError, NoiseMode, NoiseSpec};
use crate::par;

/// States with `|Y| >` this abort the path.
pub const BLOW_UP_GUARD: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("path {path} blew up at t = {time} (|Y| = {value:e})")]
    BlowUp { path: u64, time: f64, value: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("expected {expected} noise increments, got {got}")]
    IncrementCount { expected: usize, got: usize },
    #[error("picard iteration needs at least 2 iterations, got {0}")]
    TooFewIterations(usize),
}

/// Bounded, globally Lipschitz gain `G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gain {
    /// `1 / (1 + exp(-slope a))`.
    Sigmoid {
        slope: f64,
    },
    /// `(1 + tanh(beta (a - theta))) / 2`.
    HeavisideSmooth {
        beta: f64,
        theta: f64,
    },
    Constant(f64),
}

impl Gain {
    pub fn eval(&self, a: f64) -> f64 {
        match *self {
            Self::Sigmoid { slope } => 1.0 / (1.0 + (-slope * a).exp()),
            Self::HeavisideSmooth { beta, theta } => 0.5 * (1.0 + (beta * (a - theta)).tanh()),
            Self::Constant(c) => c,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Self::Sigmoid { slope } => slope.abs() / 4.0,
            Self::HeavisideSmooth { beta, .. } => beta.abs() / 2.0,
            Self::Constant(_) => 0.0,
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            Self::Sigmoid { .. } | Self::HeavisideSmooth { .. } => 1.0,
            Self::Constant(c) => c.abs(),
        }
    }

    /// `C_G` with `|G(a) - G(b)| ≤ C_G |a - b|` and `sup |G| ≤ C_G`.
    pub fn constant(&self) -> f64 {
        self.lipschitz().max(self.bound())
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        let ok = match *self {
            Self::Sigmoid { slope } => slope.is_finite(),
            Self::HeavisideSmooth { beta, theta } => beta.is_finite() && theta.is_finite(),
            Self::Constant(c) => c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::Model(format!("non-finite gain parameters in {self:?}")))
        }
    }
}

/// Globally Lipschitz diffusion coefficient `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Diffusion {
    Constant(f64),
    /// `s0 + s1 a`.
    Affine {
        s0: f64,
        s1: f64,
    },
    /// `base + amplitude tanh(a)`.
    BoundedSmooth {
        amplitude: f64,
        base: f64,
    },
}

impl Diffusion {
    pub fn eval(&self, a: f64) -> f64 {
        match *self {
            Self::Constant(s) => s,
            Self::Affine { s0, s1 } => s0 + s1 * a,
            Self::BoundedSmooth { amplitude, base } => base + amplitude * a.tanh(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Self::Constant(_) => 0.0,
            Self::Affine { s1, .. } => s1.abs(),
            Self::BoundedSmooth { amplitude, .. } => amplitude.abs(),
        }
    }

    /// `C_σ` with Lipschitz constant `≤ C_σ` and `|σ(a)| ≤ C_σ (1 + |a|)`.
    pub fn constant(&self) -> f64 {
        let growth = match *self {
            Self::Constant(s) => s.abs(),
            Self::Affine { s0, s1 } => s0.abs().max(s1.abs()),
            Self::BoundedSmooth { amplitude, base } => base.abs() + amplitude.abs(),
        };
        self.lipschitz().max(growth)
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Self::Affine { s1, .. } if *s1 != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, Self::Constant(s) if s == 0.0)
            || matches!(*self, Self::Affine { s0, s1 } if s0 == 0.0 && s1 == 0.0)
            || matches!(*self, Self::BoundedSmooth { amplitude, base } if amplitude == 0.0 && base == 0.0)
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        let c = self.constant();
        if !c.is_finite() {
            return Err(DynamicsError::Model(format!(
                "non-finite diffusion parameters in {self:?}"
            )));
        }
        // linear growth on a sample lattice
        for i in -200..=200 {
            let a = i as f64 * 0.5;
            if self.eval(a).abs() > c * (1.0 + a.abs()) * (1.0 + 1e-12) {
                return Err(DynamicsError::Model(format!(
                    "{self:?} violates linear growth at a = {a}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub kernel: KernelModel,
    pub gain: Gain,
    pub diffusion: Diffusion,
    pub initial: Field,
}

impl ModelSpec {
    pub fn new(kernel: KernelModel, gain: Gain, diffusion: Diffusion, initial: Field) -> Result<Self, DynamicsError> {
        if kernel.grid() != initial.grid() {
            return Err(GridError::GridMismatch.into());
        }
        gain.validate()?;
        diffusion.validate()?;
        Ok(Self {
            kernel,
            gain,
            diffusion,
            initial,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExponentialEuler,
    EulerMaruyama,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential_euler" => Ok(Self::ExponentialEuler),
            "euler_maruyama" => Ok(Self::EulerMaruyama),
            _ => Err(format!("unknown scheme `{s}` (exponential_euler, euler_maruyama)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub record_every: usize,
    pub n_paths: usize,
}

impl SolverConfig {
    pub fn new(
        dt: f64,
        t_end: f64,
        scheme: Scheme,
        record_every: usize,
        n_paths: usize,
    ) -> Result<Self, DynamicsError> {
        let c = Self {
            dt,
            t_end,
            scheme,
            record_every,
            n_paths,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be at least dt = {}", self.t_end, self.dt));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!(
                "t_end = {} is not a whole number of steps of {}",
                self.t_end, self.dt
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Step indices at which states are recorded: 0, every `record_every`
    /// steps, and always the last step.
    pub fn recorded_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut v: Vec<usize> = (0..=n).step_by(self.record_every).collect();
        if *v.last().unwrap() != n {
            v.push(n);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub seed: u64,
    pub path_index: u64,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectories hold the initial state")
    }
}

/// Recorded states of many paths: `data[k]` is a row-major
/// `n_paths x grid.len()` matrix at `times[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub data: Vec<Vec<f64>>,
}

impl Ensemble {
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self, DynamicsError> {
        let first = trajs
            .first()
            .ok_or_else(|| DynamicsError::Config("empty ensemble".into()))?;
        let grid = *first.states[0].grid();
        let mut data = vec![Vec::with_capacity(trajs.len() * grid.len()); first.times.len()];
        for t in trajs {
            if t.times != first.times {
                return Err(DynamicsError::Config("trajectories recorded at different times".into()));
            }
            for (k, s) in t.states.iter().enumerate() {
                if *s.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                data[k].extend_from_slice(s.values());
            }
        }
        Ok(Self {
            grid,
            times: first.times.clone(),
            n_paths: trajs.len(),
            data,
        })
    }

    /// Index of the recorded time closest to `t`, if within `1e-9`.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// The `n_paths x len` matrix at recorded time index `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k]
    }

    pub fn path_state(&self, k: usize, p: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[k][p * n..(p + 1) * n]
    }
}

/// `F(Y) = ∫ w(·, y) G(Y(y)) dy`.
#[allow(non_snake_case)]
pub fn drift_F(model: &ModelSpec, y: &Field) -> Result<Field, DynamicsError> {
    if y.grid() != model.grid() {
        return Err(GridError::GridMismatch.into());
    }
    if model.kernel.is_zero() {
        return Ok(Field::zeros(*model.grid()));
    }
    let g = match model.gain {
        Gain::Constant(c) => Field::constant(*model.grid(), c),
        gain => y.map(|a| gain.eval(a)),
    };
    Ok(apply_kernel(&model.kernel, &g, false, false)?)
}

/// `ν(dt) = √((1 - e^{-2dt}) / (2dt))`, the exact-variance weight.
pub fn exact_variance_weight(dt: f64) -> f64 {
    (-(-2.0 * dt).exp_m1() / (2.0 * dt)).sqrt()
}

/// One step of the chosen scheme with the smoothed increment `dw` drawn for
/// this step.
pub fn step(model: &ModelSpec, y: &Field, dt: f64, dw: &Field, scheme: Scheme) -> Result<Field, DynamicsError> {
    if dw.grid() != y.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let f = drift_F(model, y)?;
    let sigma = model.diffusion;
    let noisy = !sigma.is_zero();
    let (a, b, c) = match scheme {
        Scheme::ExponentialEuler => {
            let decay = (-dt).exp();
            (decay, -(-dt).exp_m1(), exact_variance_weight(dt))
        }
        Scheme::EulerMaruyama => (1.0 - dt, dt, 1.0),
    };
    let values: Vec<f64> = y
        .values()
        .iter()
        .zip(f.values())
        .zip(dw.values())
        .map(|((&yi, &fi), &wi)| {
            let mut v = a * yi + b * fi;
            if noisy {
                v += c * sigma.eval(yi) * wi;
            }
            v
        })
        .collect();
    Ok(Field::from_raw(*y.grid(), values))
}

fn guard(state: &Field, path: u64, time: f64) -> Result<(), DynamicsError> {
    let m = state
        .values()
        .iter()
        .fold(0.0_f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) });
    if m > BLOW_UP_GUARD {
        return Err(DynamicsError::BlowUp { path, time, value: m });
    }
    Ok(())
}

/// Steps from the model's initial state, drawing increment `k` from
/// `increment(k)`.
fn integrate_path(
    model: &ModelSpec,
    config: &SolverConfig,
    seed: u64,
    path_index: u64,
    mut increment: impl FnMut(usize) -> Result<Field, DynamicsError>,
) -> Result<Trajectory, DynamicsError> {
    config.validate()?;
    let n = config.n_steps();
    let mut y = model.initial.clone();
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    for k in 0..n {
        let dw = increment(k)?;
        y = step(model, &y, config.dt, &dw, config.scheme)?;
        let t = (k + 1) as f64 * config.dt;
        guard(&y, path_index, t)?;
        if (k + 1) % config.record_every == 0 || k + 1 == n {
            times.push(t);
            states.push(y.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        seed,
        path_index,
    })
}

fn zero_noise(model: &ModelSpec, noise: &NoiseSpec) -> Result<(), DynamicsError> {
    if noise.grid() != model.grid() {
        return Err(GridError::GridMismatch.into());
    }
    Ok(())
}

/// Random-field formulation: smoothed white increments, one per step, drawn
/// from `(seed, path_index, step)`.
pub fn solve_path(
    model: &ModelSpec,
    config: &SolverConfig,
    noise: &NoiseSpec,
    seed: u64,
    path_index: u64,
) -> Result<Trajectory, DynamicsError> {
    if noise.mode() != NoiseMode::SmoothedWhite {
        return Err(NoiseError::WrongMode(NoiseMode::SmoothedWhite).into());
    }
    zero_noise(model, noise)?;
    let noise = noise.with_seed(seed);
    let deterministic = model.diffusion.is_zero();
    let grid = *model.grid();
    integrate_path(model, config, seed, path_index, |k| {
        if deterministic {
            return Ok(Field::zeros(grid));
        }
        Ok(smoothed_increment(
            &noise,
            config.dt,
            noise.stream(path_index, k as u64),
        )?)
    })
}

/// Hilbert-space formulation: `dW^φ = φ * (Σ √λ_k Δβ_k e_k)`.
pub fn solve_hilbert_path(
    model: &ModelSpec,
    config: &SolverConfig,
    noise: &NoiseSpec,
    seed: u64,
    path_index: u64,
) -> Result<Trajectory, DynamicsError> {
    if noise.mode() != NoiseMode::QWiener {
        return Err(NoiseError::WrongMode(NoiseMode::QWiener).into());
    }
    zero_noise(model, noise)?;
    let noise = noise.with_seed(seed);
    integrate_path(model, config, seed, path_index, |k| {
        let dw = qwiener_increment(&noise, config.dt, noise.stream(path_index, k as u64))?;
        Ok(noise.smooth(&dw)?)
    })
}

/// Steps on pre-drawn smoothed increments, one per step.
pub fn solve_path_frozen(
    model: &ModelSpec,
    config: &SolverConfig,
    increments: &[Field],
) -> Result<Trajectory, DynamicsError> {
    config.validate()?;
    if increments.len() != config.n_steps() {
        return Err(DynamicsError::IncrementCount {
            expected: config.n_steps(),
            got: increments.len(),
        });
    }
    integrate_path(model, config, 0, 0, |k| Ok(increments[k].clone()))
}

/// Runs `config.n_paths` paths (indices `0..n_paths`) of whichever
/// formulation matches the noise mode. Output is independent of the thread
/// count.
pub fn run_ensemble(model: &ModelSpec, config: &SolverConfig, noise: &NoiseSpec) -> Result<Ensemble, DynamicsError> {
    run_ensemble_range(model, config, noise, 0, config.n_paths)
}

pub fn run_ensemble_range(
    model: &ModelSpec,
    config: &SolverConfig,
    noise: &NoiseSpec,
    first_path: usize,
    n_paths: usize,
) -> Result<Ensemble, DynamicsError> {
    if n_paths == 0 {
        return Err(DynamicsError::Config("n_paths must be at least 1".into()));
    }
    let seed = noise.seed();
    let trajs = par::try_map_indices(n_paths, |p| {
        let path = (first_path + p) as u64;
        match noise.mode() {
            NoiseMode::SmoothedWhite => solve_path(model, config, noise, seed, path),
            NoiseMode::QWiener => solve_hilbert_path(model, config, noise, seed, path),
        }
    })?;
    Ensemble::from_trajectories(&trajs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardDiagnostics {
    /// Terminal field `Y_n(T)` of every path, for `n = 0..=n_iter + 1`:
    /// `iterates[n]` is row-major `n_paths x len`.
    pub iterates: Vec<Vec<f64>>,
    /// `H_n(T) = sup_x mean_paths |Y_{n+1}(T) - Y_n(T)|²`, `n = 0..=n_iter`.
    pub h: Vec<f64>,
    /// The last iterate on the full time mesh for path 0.
    pub final_path: Vec<Field>,
    pub t_end: f64,
    pub dt: f64,
    /// `(K, C_w, ‖φ‖²_{L²})` entering the factorial envelope.
    pub bound_constants: (f64, f64, f64),
}

/// Picard iteration of the mild equation on frozen noise. `frozen[p][k]` is
/// the smoothed increment of path `p` on `[t_k, t_k + dt]`. The time integrals
/// use the left-point rule, so
/// `Y_{n+1}(t_{k+1}) = e^{-dt} (Y_{n+1}(t_k) + dt F(Y_n(t_k)) + σ(Y_n(t_k)) ΔW_k)`
/// with `Y_0(t) = Y(0)`.
pub fn picard_solve(
    model: &ModelSpec,
    dt: f64,
    frozen: &[Vec<Field>],
    n_iter: usize,
    phi_norm2: f64,
) -> Result<PicardDiagnostics, DynamicsError> {
    if n_iter < 2 {
        return Err(DynamicsError::TooFewIterations(n_iter));
    }
    let n_paths = frozen.len();
    if n_paths == 0 {
        return Err(DynamicsError::Config("picard needs at least one path".into()));
    }
    let n_steps = frozen[0].len();
    if n_steps == 0 {
        return Err(DynamicsError::IncrementCount { expected: 1, got: 0 });
    }
    for p in frozen {
        if p.len() != n_steps {
            return Err(DynamicsError::IncrementCount {
                expected: n_steps,
                got: p.len(),
            });
        }
    }
    if !(dt > 0.0) {
        return Err(DynamicsError::Config(format!("dt must be positive, got {dt}")));
    }
    let grid = *model.grid();
    let len = grid.len();
    let decay = (-dt).exp();

    // per path: terminal value of every iterate, plus the last full iterate
    let per_path = par::try_map_indices(n_paths, |p| -> Result<(Vec<Vec<f64>>, Vec<Field>), DynamicsError> {
        let mut prev: Vec<Field> = vec![model.initial.clone(); n_steps + 1];
        let mut terminals = vec![model.initial.values().to_vec()];
        for _ in 0..=n_iter {
            let mut next = Vec::with_capacity(n_steps + 1);
            let mut z = model.initial.clone();
            next.push(z.clone());
            for k in 0..n_steps {
                let yk = &prev[k];
                let f = drift_F(model, yk)?;
                let dw = &frozen[p][k];
                let vals: Vec<f64> = z
                    .values()
                    .iter()
                    .zip(yk.values())
                    .zip(f.values().iter().zip(dw.values()))
                    .map(|((&zi, &yi), (&fi, &wi))| decay * (zi + dt * fi + model.diffusion.eval(yi) * wi))
                    .collect();
                z = Field::from_raw(grid, vals);
                guard(&z, p as u64, (k + 1) as f64 * dt)?;
                next.push(z.clone());
            }
            terminals.push(z.into_values());
            prev = next;
        }
        Ok((terminals, prev))
    })?;

    let n_iterates = n_iter + 2;
    let mut iterates = vec![Vec::with_capacity(n_paths * len); n_iterates];
    for (terminals, _) in &per_path {
        for (n, t) in terminals.iter().enumerate() {
            iterates[n].extend_from_slice(t);
        }
    }
    let h = (0..=n_iter)
        .map(|n| {
            let mut acc = vec![0.0; len];
            for p in 0..n_paths {
                let a = &iterates[n + 1][p * len..(p + 1) * len];
                let b = &iterates[n][p * len..(p + 1) * len];
                for ((s, x), y) in acc.iter_mut().zip(a).zip(b) {
                    *s += (x - y) * (x - y);
                }
            }
            acc.into_iter().fold(0.0_f64, f64::max) / n_paths as f64
        })
        .collect();
    let final_path = per_path.into_iter().next().map(|(_, full)| full).unwrap();
    let k = model.gain.constant().max(model.diffusion.constant()).powi(2);
    Ok(PicardDiagnostics {
        iterates,
        h,
        final_path,
        t_end: n_steps as f64 * dt,
        dt,
        bound_constants: (k, model.kernel.row_l1_sup(), phi_norm2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::noise::{white_increment, PhiSpec};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn line(l: f64, n: usize) -> Grid {
        Grid::line(l, n).unwrap()
    }

    fn normalized_gaussian(g: Grid) -> KernelModel {
        KernelSpec::gaussian(1.0 / PI.sqrt(), 1.0).build(g).unwrap()
    }

    fn model(k: KernelModel, gain: Gain, sigma: Diffusion) -> ModelSpec {
        let g = *k.grid();
        ModelSpec::new(k, gain, sigma, Field::zeros(g)).unwrap()
    }

    #[test]
    fn drift_examples() {
        let g = line(10.0, 256);
        let m = model(normalized_gaussian(g), Gain::Constant(1.0), Diffusion::Constant(0.0));
        let y = Field::from_fn(g, |x| x[0].sin());
        for v in drift_F(&m, &y).unwrap().values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-10);
        }
        let m = model(
            KernelModel::zero(g),
            Gain::Sigmoid { slope: 1.0 },
            Diffusion::Constant(0.0),
        );
        assert_eq!(drift_F(&m, &y).unwrap(), Field::zeros(g));
        let m = model(
            KernelSpec::gaussian(1.0, 1.0).build(g).unwrap(),
            Gain::Sigmoid { slope: 1.0 },
            Diffusion::Constant(0.0),
        );
        for v in drift_F(&m, &Field::zeros(g)).unwrap().values() {
            assert_abs_diff_eq!(*v, 0.5 * PI.sqrt(), epsilon = 1e-6);
        }
    }

    #[test]
    fn gain_and_diffusion_constants() {
        assert_eq!(Gain::Sigmoid { slope: 2.0 }.lipschitz(), 0.5);
        assert_eq!(Gain::Sigmoid { slope: 2.0 }.constant(), 1.0);
        assert_eq!(Gain::HeavisideSmooth { beta: 4.0, theta: 0.0 }.constant(), 2.0);
        assert_eq!(Diffusion::Affine { s0: 0.5, s1: 2.0 }.constant(), 2.0);
        assert!(Diffusion::BoundedSmooth {
            amplitude: 0.3,
            base: 1.0
        }
        .is_bounded());
        assert!(!Diffusion::Affine { s0: 0.5, s1: 2.0 }.is_bounded());
        // numeric Lipschitz check on a lattice
        for g in [
            Gain::Sigmoid { slope: 3.0 },
            Gain::HeavisideSmooth { beta: 2.0, theta: 0.4 },
        ] {
            for i in -100..100 {
                let (a, b) = (i as f64 * 0.05, (i + 1) as f64 * 0.05);
                assert!((g.eval(a) - g.eval(b)).abs() <= g.lipschitz() * 0.05 + 1e-15);
            }
        }
        let g = line(1.0, 4);
        assert!(ModelSpec::new(
            KernelModel::zero(g),
            Gain::Constant(f64::NAN),
            Diffusion::Constant(0.0),
            Field::zeros(g)
        )
        .is_err());
    }

    #[test]
    fn solver_config_validation() {
        assert!(SolverConfig::new(0.0, 1.0, Scheme::ExponentialEuler, 1, 1).is_err());
        assert!(SolverConfig::new(0.1, 0.05, Scheme::ExponentialEuler, 1, 1).is_err());
        assert!(SolverConfig::new(0.1, 1.0, Scheme::ExponentialEuler, 0, 1).is_err());
        assert!(SolverConfig::new(0.3, 1.0, Scheme::ExponentialEuler, 1, 1).is_err());
        let c = SolverConfig::new(0.1, 1.0, Scheme::ExponentialEuler, 3, 1).unwrap();
        assert_eq!(c.n_steps(), 10);
        assert_eq!(c.recorded_steps(), vec![0, 3, 6, 9, 10]);
    }

    #[test]
    fn step_pure_decay_and_fixed_point() {
        let g = line(5.0, 64);
        let m = model(KernelModel::zero(g), Gain::Constant(0.0), Diffusion::Constant(0.0));
        let y = Field::from_fn(g, |x| x[0].cos());
        let out = step(&m, &y, 0.1, &Field::zeros(g), Scheme::ExponentialEuler).unwrap();
        for (a, b) in out.values().iter().zip(y.values()) {
            assert_eq!(*a, (-0.1f64).exp() * b);
        }
        // Y* = F(Y*) for constant gain and a normalized kernel is Y* ≡ c
        let m = model(normalized_gaussian(g), Gain::Constant(0.7), Diffusion::Constant(0.0));
        let ystar = drift_F(&m, &Field::zeros(g)).unwrap();
        let out = step(&m, &ystar, 0.1, &Field::zeros(g), Scheme::ExponentialEuler).unwrap();
        for (a, b) in out.values().iter().zip(ystar.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_variance_matches_ito_isometry() {
        let g = line(4.0, 32);
        let phi = PhiSpec::Gaussian { scale: 1.0 }.sample(g).unwrap();
        let c0 = crate::noise::analytic_covariance(&phi).get(g.origin_index());
        let noise = NoiseSpec::smoothed_white(phi, 5).unwrap();
        let m = model(KernelModel::zero(g), Gain::Constant(0.0), Diffusion::Constant(1.0));
        let dt = 0.1;
        let o = g.origin_index();
        let sq: Vec<f64> = (0..100_000u64)
            .map(|p| {
                let dw = smoothed_increment(&noise, dt, noise.stream(p, 0)).unwrap();
                step(&m, &Field::zeros(g), dt, &dw, Scheme::ExponentialEuler)
                    .unwrap()
                    .get(o)
                    .powi(2)
            })
            .collect();
        let n = sq.len() as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let se = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let expect = c0 * (1.0 - (-0.2f64).exp()) / 2.0;
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn deterministic_constant_drift_is_exact() {
        let g = line(10.0, 128);
        let m = model(normalized_gaussian(g), Gain::Constant(1.0), Diffusion::Constant(0.0));
        let noise = NoiseSpec::smoothed_white(Field::delta(g), 0).unwrap();
        for dt in [0.5, 0.1, 0.01] {
            let c = SolverConfig::new(dt, 2.0, Scheme::ExponentialEuler, 1, 1).unwrap();
            let tr = solve_path(&m, &c, &noise, 0, 0).unwrap();
            for (t, s) in tr.times.iter().zip(&tr.states) {
                let expect = 1.0 - (-t).exp();
                assert!(s.values().iter().all(|v| (v - expect).abs() < 1e-8), "dt={dt} t={t}");
            }
        }
    }

    #[test]
    fn deterministic_mexican_hat_reaches_stationary_state() {
        let g = line(10.0, 128);
        let k = KernelSpec::mexican_hat(2.0, 1.0, 1.0, 2.0).build(g).unwrap();
        let init = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        let m = ModelSpec::new(k, Gain::Sigmoid { slope: 1.0 }, Diffusion::Constant(0.0), init).unwrap();
        let noise = NoiseSpec::smoothed_white(Field::delta(g), 0).unwrap();
        let c = SolverConfig::new(0.05, 50.0, Scheme::ExponentialEuler, 1000, 1).unwrap();
        let y = solve_path(&m, &c, &noise, 0, 0).unwrap().last().clone();
        let res = drift_F(&m, &y).unwrap().axpby(1.0, &y, -1.0).unwrap();
        assert!(res.sup_norm() < 1e-6, "{}", res.sup_norm());

        // independent oracle: plain fixed-point iteration Y ← F(Y)
        let mut z = Field::zeros(g);
        for _ in 0..500 {
            z = drift_F(&m, &z).unwrap();
        }
        assert!(z.axpby(1.0, &y, -1.0).unwrap().sup_norm() < 1e-6);
    }

    #[test]
    fn stochastic_paths_replay_bit_identically() {
        let g = line(5.0, 32);
        let m = model(
            normalized_gaussian(g),
            Gain::Sigmoid { slope: 1.0 },
            Diffusion::Affine { s0: 0.3, s1: 0.1 },
        );
        let noise = NoiseSpec::smoothed_white(PhiSpec::Gaussian { scale: 0.5 }.sample(g).unwrap(), 1).unwrap();
        let c = SolverConfig::new(0.01, 0.5, Scheme::EulerMaruyama, 5, 4).unwrap();
        let a = solve_path(&m, &c, &noise, 77, 3).unwrap();
        let b = solve_path(&m, &c, &noise, 77, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, solve_path(&m, &c, &noise, 77, 4).unwrap());
        let e = run_ensemble(&m, &c, &noise.with_seed(77)).unwrap();
        assert_eq!(e.path_state(e.times.len() - 1, 3), a.last().values());
    }

    #[test]
    fn frozen_noise_uniqueness() {
        let g = line(5.0, 32);
        let m = model(
            normalized_gaussian(g),
            Gain::Sigmoid { slope: 1.0 },
            Diffusion::Affine { s0: 0.3, s1: 0.1 },
        );
        let noise = NoiseSpec::smoothed_white(PhiSpec::Gaussian { scale: 0.5 }.sample(g).unwrap(), 1).unwrap();
        let c = SolverConfig::new(0.01, 1.0, Scheme::ExponentialEuler, 10, 1).unwrap();
        let inc: Vec<Field> = (0..100)
            .map(|k| smoothed_increment(&noise, 0.01, noise.stream(0, k)).unwrap())
            .collect();
        let a = solve_path_frozen(&m, &c, &inc).unwrap();
        let b = solve_path_frozen(&m, &c, &inc).unwrap();
        assert_eq!(a.states, b.states);
        // frozen run on the same draws equals the sampled run
        let s = solve_path(&m, &c, &noise, 1, 0).unwrap();
        assert_eq!(a.states, s.states);
        assert!(matches!(
            solve_path_frozen(&m, &c, &inc[..5]),
            Err(DynamicsError::IncrementCount { .. })
        ));
    }

    #[test]
    fn blow_up_guard_fires() {
        let g = line(1.0, 4);
        let m = model(
            KernelModel::zero(g),
            Gain::Constant(0.0),
            Diffusion::Affine { s0: 0.0, s1: 1.0 },
        );
        let m = ModelSpec {
            initial: Field::constant(g, 1.0),
            ..m
        };
        let c = SolverConfig::new(0.1, 10.0, Scheme::EulerMaruyama, 1, 1).unwrap();
        let inc = vec![Field::constant(g, 100.0); 100];
        assert!(matches!(
            solve_path_frozen(&m, &c, &inc),
            Err(DynamicsError::BlowUp { .. })
        ));
    }

    #[test]
    fn hilbert_zero_spectrum_is_deterministic_run() {
        let g = line(5.0, 32);
        let m = model(
            normalized_gaussian(g),
            Gain::Sigmoid { slope: 1.0 },
            Diffusion::Constant(1.0),
        );
        let m = ModelSpec {
            initial: Field::from_fn(g, |x| (-x[0] * x[0]).exp()),
            ..m
        };
        let zero = crate::noise::identity_spectrum(&g)
            .into_iter()
            .map(|s| crate::noise::SpectralMode { lambda: 0.0, ..s })
            .collect();
        let q = NoiseSpec::qwiener(Field::delta(g), zero, 3).unwrap();
        let c = SolverConfig::new(0.05, 1.0, Scheme::ExponentialEuler, 4, 1).unwrap();
        let h = solve_hilbert_path(&m, &c, &q, 3, 0).unwrap();
        let det = ModelSpec {
            diffusion: Diffusion::Constant(0.0),
            ..m.clone()
        };
        let d = solve_path(&det, &c, &NoiseSpec::smoothed_white(Field::delta(g), 0).unwrap(), 0, 0).unwrap();
        assert_eq!(h.states, d.states);
    }

    #[test]
    fn hilbert_flat_mode_is_scalar_ou() {
        let g = line(2.0, 8);
        let e1 = Field::constant(g, 1.0 / g.volume().sqrt());
        let q = NoiseSpec::qwiener(
            Field::delta(g),
            vec![crate::noise::SpectralMode { lambda: 2.0, basis: e1 }],
            9,
        )
        .unwrap();
        let m = model(KernelModel::zero(g), Gain::Constant(0.0), Diffusion::Constant(1.0));
        let c = SolverConfig::new(0.1, 8.0, Scheme::ExponentialEuler, 80, 4000).unwrap();
        let e = run_ensemble(&m, &c, &q).unwrap();
        let last = e.at(e.times.len() - 1);
        let sq: Vec<f64> = (0..4000).map(|p| last[p * 8].powi(2)).collect();
        let mean = sq.iter().sum::<f64>() / 4000.0;
        let se = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3999.0 / 4000.0).sqrt();
        // λ e1² (1 - e^{-2T}) / 2
        let expect = 2.0 / 4.0 * (1.0 - (-16.0f64).exp()) / 2.0;
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
        for p in 0..10 {
            let s = e.path_state(1, p);
            assert!(s.iter().all(|&v| v == s[0]));
        }
    }

    fn frozen_white(noise: &NoiseSpec, n_paths: usize, n_steps: usize, dt: f64) -> Vec<Vec<Field>> {
        (0..n_paths)
            .map(|p| {
                (0..n_steps)
                    .map(|k| {
                        let w = white_increment(noise.grid(), dt, RngStream::new(noise.seed(), p as u64, k as u64))
                            .unwrap();
                        noise.smooth(&w).unwrap()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn picard_fixed_point_and_linear_cases() {
        let g = line(5.0, 32);
        let noise = NoiseSpec::smoothed_white(PhiSpec::Gaussian { scale: 1.0 }.sample(g).unwrap(), 2).unwrap();
        let frozen = frozen_white(&noise, 5, 20, 0.05);

        // deterministic fixed point: Y* ≡ 1 for constant gain 1, normalized w
        let m = ModelSpec::new(
            normalized_gaussian(g),
            Gain::Constant(1.0),
            Diffusion::Constant(0.0),
            Field::constant(g, 1.0),
        )
        .unwrap();
        // the left-point mild map keeps Y* only up to O(dt); use H_n for n ≥ 1
        let d = picard_solve(&m, 0.05, &frozen, 4, noise.phi_norm2()).unwrap();
        for &h in &d.h[1..] {
            assert!(h < 1e-28, "{:?}", d.h);
        }

        // linear: G = 0, σ = 1, neither integrand depends on the iterate
        let m = model(KernelModel::zero(g), Gain::Constant(0.0), Diffusion::Constant(1.0));
        let d = picard_solve(&m, 0.05, &frozen, 3, noise.phi_norm2()).unwrap();
        assert!(d.h[0] > 0.0);
        assert_eq!(d.h[1], 0.0);
        assert!(matches!(
            picard_solve(&m, 0.05, &frozen, 1, 1.0),
            Err(DynamicsError::TooFewIterations(1))
        ));
        let mut ragged = frozen.clone();
        ragged[2].pop();
        assert!(matches!(
            picard_solve(&m, 0.05, &ragged, 3, 1.0),
            Err(DynamicsError::IncrementCount { .. })
        ));
    }

    #[test]
    fn picard_limit_matches_the_recursion() {
        // the iteration's fixed point is the recursion
        // Z_{k+1} = e^{-dt}(Z_k + dt F(Z_k) + σ(Z_k) ΔW_k), computed here directly
        let g = line(5.0, 32);
        let noise = NoiseSpec::smoothed_white(PhiSpec::Gaussian { scale: 1.0 }.sample(g).unwrap(), 4).unwrap();
        let frozen = frozen_white(&noise, 1, 50, 0.02);
        let m = model(
            normalized_gaussian(g),
            Gain::Sigmoid { slope: 1.0 },
            Diffusion::Affine { s0: 0.3, s1: 0.2 },
        );
        let d = picard_solve(&m, 0.02, &frozen, 12, noise.phi_norm2()).unwrap();
        let mut z = Field::zeros(g);
        for dw in &frozen[0] {
            let f = drift_F(&m, &z).unwrap();
            let vals = (0..g.len())
                .map(|i| (-0.02f64).exp() * (z.get(i) + 0.02 * f.get(i) + m.diffusion.eval(z.get(i)) * dw.get(i)))
                .collect();
            z = Field::new(g, vals).unwrap();
        }
        let last = d.final_path.last().unwrap();
        assert!(z.axpby(1.0, last, -1.0).unwrap().sup_norm() < 1e-12);
    }
}
