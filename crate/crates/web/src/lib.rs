//! Browser bindings for three small demos: a 1D sample path heatmap, the
//! smoothed-noise covariance against its closed form, and the ρ_w weight from
//! both solvers.

use neurofield::dynamics::{solve_path, Diffusion, Gain, ModelSpec, Scheme, SolverConfig};
use neurofield::grid::{Field, Grid, GridSpec};
use neurofield::kernels::{solve_rho_fourier, solve_rho_power, KernelSpec};
use neurofield::noise::{analytic_covariance, smoothed_increment, NoiseSpec, PhiSpec};
use wasm_bindgen::prelude::*;

fn js_err<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

fn line(half_width: f64, n: usize) -> Result<Grid, JsError> {
    Grid::new(GridSpec::new(1, half_width, n)).map_err(js_err)
}

/// One sample path on a periodic line. `data` is row-major
/// `times.len() x n`.
#[wasm_bindgen]
pub struct PathFrames {
    times: Vec<f64>,
    coords: Vec<f64>,
    data: Vec<f64>,
}

#[wasm_bindgen]
impl PathFrames {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }
}

/// Simulates one path of the sigmoid-gain model with a Mexican-hat kernel
/// `a1 exp(-x²) - a2 exp(-x²/4)`, constant noise level `sigma` and a
/// Gaussian bump as the initial state.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    n: usize,
    half_width: f64,
    excitation: f64,
    inhibition: f64,
    slope: f64,
    sigma: f64,
    phi_scale: f64,
    t_end: f64,
    seed: u32,
) -> Result<PathFrames, JsError> {
    let grid = line(half_width, n)?;
    let kernel = KernelSpec::mexican_hat(excitation, 1.0, inhibition, 2.0)
        .build(grid)
        .map_err(js_err)?;
    let initial = Field::from_fn(grid, |x| 2.0 * (-x[0] * x[0]).exp());
    let model = ModelSpec::new(kernel, Gain::Sigmoid { slope }, Diffusion::Constant(sigma), initial).map_err(js_err)?;
    let dt = 0.01;
    let steps = (t_end / dt).round().max(1.0);
    let record = (steps as usize / 200).max(1);
    let cfg = SolverConfig::new(dt, steps * dt, Scheme::ExponentialEuler, record, 1).map_err(js_err)?;
    let phi = PhiSpec::Gaussian { scale: phi_scale }.sample(grid).map_err(js_err)?;
    let noise = NoiseSpec::smoothed_white(phi, seed as u64).map_err(js_err)?;
    let path = solve_path(&model, &cfg, &noise, seed as u64, 0).map_err(js_err)?;
    Ok(PathFrames {
        coords: (0..n).map(|i| grid.coord(i)).collect(),
        data: path.states.iter().flat_map(|s| s.values().iter().copied()).collect(),
        times: path.times,
    })
}

/// Empirical covariance of smoothed noise at unit time against `φ * φ̃`.
#[wasm_bindgen]
pub struct CovarianceCurve {
    lags: Vec<f64>,
    empirical: Vec<f64>,
    analytic: Vec<f64>,
}

#[wasm_bindgen]
impl CovarianceCurve {
    #[wasm_bindgen(getter)]
    pub fn lags(&self) -> Vec<f64> {
        self.lags.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn empirical(&self) -> Vec<f64> {
        self.empirical.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn analytic(&self) -> Vec<f64> {
        self.analytic.clone()
    }
}

/// `phi` is `"indicator"` or `"gaussian"` with width or scale `size`. Lags
/// run over mesh steps `0..max_lag` along the line, pooled over positions.
#[wasm_bindgen]
pub fn noise_covariance(
    n: usize,
    half_width: f64,
    phi: &str,
    size: f64,
    draws: usize,
    max_lag: usize,
    seed: u32,
) -> Result<CovarianceCurve, JsError> {
    let grid = line(half_width, n)?;
    let spec = match phi {
        "indicator" => PhiSpec::Indicator { width: size },
        "gaussian" => PhiSpec::Gaussian { scale: size },
        other => return Err(JsError::new(&format!("unknown phi `{other}`"))),
    };
    let phi = spec.sample(grid).map_err(js_err)?;
    let c = analytic_covariance(&phi);
    let noise = NoiseSpec::smoothed_white(phi, seed as u64).map_err(js_err)?;
    let max_lag = max_lag.min(n / 2 - 1);
    let mut sums = vec![0.0; max_lag + 1];
    for p in 0..draws.max(1) {
        let w = smoothed_increment(&noise, 1.0, noise.stream(p as u64, 0)).map_err(js_err)?;
        let v = w.values();
        for (k, s) in sums.iter_mut().enumerate() {
            *s += (0..n).map(|i| v[i] * v[(i + k) % n]).sum::<f64>() / n as f64;
        }
    }
    let origin = grid.origin_index();
    Ok(CovarianceCurve {
        lags: (0..=max_lag).map(|k| k as f64 * grid.dx()).collect(),
        empirical: sums.iter().map(|s| s / draws.max(1) as f64).collect(),
        analytic: (0..=max_lag).map(|k| c.get(origin + k)).collect(),
    })
}

/// Weights from power iteration and from the Fourier construction, each
/// normalized to unit mass.
#[wasm_bindgen]
pub struct RhoPair {
    coords: Vec<f64>,
    power: Vec<f64>,
    fourier: Vec<f64>,
    power_lambda: f64,
    fourier_lambda: f64,
    power_residual: f64,
}

#[wasm_bindgen]
impl RhoPair {
    #[wasm_bindgen(getter)]
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn power(&self) -> Vec<f64> {
        self.power.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fourier(&self) -> Vec<f64> {
        self.fourier.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn power_lambda(&self) -> f64 {
        self.power_lambda
    }

    #[wasm_bindgen(getter)]
    pub fn fourier_lambda(&self) -> f64 {
        self.fourier_lambda
    }

    #[wasm_bindgen(getter)]
    pub fn power_residual(&self) -> f64 {
        self.power_residual
    }
}

/// `kernel` is `"gaussian"` (`exp(-x²/s²)`) or `"mexican_hat"`
/// (`exp(-x²/s²) - inhibition exp(-x²/(4s²))`).
#[wasm_bindgen]
pub fn solve_rho(n: usize, half_width: f64, kernel: &str, scale: f64, inhibition: f64) -> Result<RhoPair, JsError> {
    let grid = line(half_width, n)?;
    let spec = match kernel {
        "gaussian" => KernelSpec::gaussian(1.0, scale),
        "mexican_hat" => KernelSpec::mexican_hat(1.0, scale, inhibition, 2.0 * scale),
        other => return Err(JsError::new(&format!("unknown kernel `{other}`"))),
    };
    let k = spec.build(grid).map_err(js_err)?;
    let p = solve_rho_power(&k, 1e-10, 10_000).map_err(js_err)?;
    let f = solve_rho_fourier(&k).map_err(js_err)?;
    Ok(RhoPair {
        coords: (0..n).map(|i| grid.coord(i)).collect(),
        power: p.rho.into_values(),
        fourier: f.rho.into_values(),
        power_lambda: p.lambda,
        fourier_lambda: f.lambda,
        power_residual: p.residual,
    })
}
