//! Driving noise for both formulations.
//!
//! White increments use the density convention: the value at a node is the
//! cell increment `W([t, t+dt] x cell)` divided by the cell volume, so it has
//! variance `dt / dx^N` and [`convolve`](crate::grid::convolve) turns it
//! straight into `∫ φ(x - y) W(dt, dy)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{integrate, Convolver, Field, Grid, GridError, GridFft};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("dt must be positive, got {0}")]
    BadDt(f64),
    #[error("phi has zero L2 norm")]
    ZeroPhi,
    #[error("Q-Wiener noise needs a non-empty spectrum")]
    EmptySpectrum,
    #[error("spectral weight {index} is negative or non-finite ({value})")]
    BadLambda { index: usize, value: f64 },
    #[error("basis fields {i} and {j} have inner product {value}, expected {expected}")]
    NotOrthonormal {
        i: usize,
        j: usize,
        value: f64,
        expected: f64,
    },
    #[error("operation needs {0:?} noise")]
    WrongMode(NoiseMode),
    #[error("alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("indicator width must be positive, got {0}")]
    BadWidth(f64),
}

/// Tolerance for the orthonormality check on user spectra.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

// Full Gram checks above this many multiply-adds fall back to norms only.
const GRAM_CHECK_BUDGET: usize = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    SmoothedWhite,
    QWiener,
}

/// Correlation profile recipes.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiSpec {
    /// Discrete delta; variance scales like `1/dx^N`.
    Delta,
    /// Indicator of the cube `|x_a| ≤ width/2`.
    Indicator {
        width: f64,
    },
    /// `exp(-|x|²/s²)`.
    Gaussian {
        scale: f64,
    },
    Sampled(Field),
}

impl PhiSpec {
    pub fn sample(&self, grid: Grid) -> Result<Field, NoiseError> {
        match self {
            Self::Delta => Ok(Field::delta(grid)),
            Self::Indicator { width } => {
                if !(*width > 0.0) {
                    return Err(NoiseError::BadWidth(*width));
                }
                let h = 0.5 * width * (1.0 + 1e-12);
                Ok(Field::from_fn(grid, |x| {
                    if x.iter().all(|v| v.abs() <= h) {
                        1.0
                    } else {
                        0.0
                    }
                }))
            }
            Self::Gaussian { scale } => {
                let s2 = scale * scale;
                Ok(Field::from_fn(grid, |x| {
                    (-x.iter().map(|v| v * v).sum::<f64>() / s2).exp()
                }))
            }
            Self::Sampled(f) => {
                if *f.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                Ok(f.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMode {
    pub lambda: f64,
    /// L²-normalized basis field.
    pub basis: Field,
}

#[derive(Clone, Debug)]
pub struct NoiseSpec {
    phi: Field,
    mode: NoiseMode,
    spectrum: Option<Arc<Vec<SpectralMode>>>,
    seed: u64,
    smoother: Arc<Convolver>,
}

impl NoiseSpec {
    pub fn smoothed_white(phi: Field, seed: u64) -> Result<Self, NoiseError> {
        let norm2 = integrate(&phi.map(|v| v * v), None)?;
        if !(norm2 > 0.0) {
            return Err(NoiseError::ZeroPhi);
        }
        Ok(Self {
            smoother: Arc::new(Convolver::new(&phi)),
            phi,
            mode: NoiseMode::SmoothedWhite,
            spectrum: None,
            seed,
        })
    }

    /// Q-Wiener noise with the finite spectrum `{(λ_k, e_k)}`, smoothed by `φ`
    /// after summation.
    pub fn qwiener(phi: Field, spectrum: Vec<SpectralMode>, seed: u64) -> Result<Self, NoiseError> {
        validate_spectrum(phi.grid(), &spectrum)?;
        Ok(Self {
            smoother: Arc::new(Convolver::new(&phi)),
            phi,
            mode: NoiseMode::QWiener,
            spectrum: Some(Arc::new(spectrum)),
            seed,
        })
    }

    pub fn phi(&self) -> &Field {
        &self.phi
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn spectrum(&self) -> Option<&[SpectralMode]> {
        self.spectrum.as_deref().map(Vec::as_slice)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// `Σ λ_k` over the retained modes.
    pub fn retained_trace(&self) -> Option<f64> {
        self.spectrum().map(|s| s.iter().map(|m| m.lambda).sum())
    }

    /// `‖φ‖²_{L²}`.
    pub fn phi_norm2(&self) -> f64 {
        integrate(&self.phi.map(|v| v * v), None).unwrap()
    }

    /// Applies the smoothing operator `B u = φ * u`.
    pub fn smooth(&self, u: &Field) -> Result<Field, NoiseError> {
        Ok(self.smoother.apply(u)?)
    }

    /// The stream for one step of one path.
    pub fn stream(&self, path_index: u64, step_index: u64) -> RngStream {
        RngStream::new(self.seed, path_index, step_index)
    }
}

fn validate_spectrum(grid: &Grid, spectrum: &[SpectralMode]) -> Result<(), NoiseError> {
    if spectrum.is_empty() {
        return Err(NoiseError::EmptySpectrum);
    }
    for (i, m) in spectrum.iter().enumerate() {
        if !(m.lambda >= 0.0 && m.lambda.is_finite()) {
            return Err(NoiseError::BadLambda {
                index: i,
                value: m.lambda,
            });
        }
        if m.basis.grid() != grid {
            return Err(GridError::GridMismatch.into());
        }
    }
    let k = spectrum.len();
    let full = k * k * grid.len() <= GRAM_CHECK_BUDGET;
    for i in 0..k {
        let js = if full { 0..=i } else { i..=i };
        for j in js {
            let v = crate::grid::inner(&spectrum[i].basis, &spectrum[j].basis)?;
            let expected = if i == j { 1.0 } else { 0.0 };
            if (v - expected).abs() > ORTHONORMAL_TOL {
                return Err(NoiseError::NotOrthonormal {
                    i,
                    j,
                    value: v,
                    expected,
                });
            }
        }
    }
    Ok(())
}

/// I.i.d. `N(0, dt/dx^N)` field (density convention).
pub fn white_increment(grid: &Grid, dt: f64, rng: RngStream) -> Result<Field, NoiseError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NoiseError::BadDt(dt));
    }
    let sd = (dt / grid.cell_volume()).sqrt();
    let values = rng.normals(grid.len()).into_iter().map(|z| sd * z).collect();
    Ok(Field::new(*grid, values)?)
}

/// `ΔW^φ = φ * ΔW`.
pub fn smoothed_increment(spec: &NoiseSpec, dt: f64, rng: RngStream) -> Result<Field, NoiseError> {
    if spec.mode != NoiseMode::SmoothedWhite {
        return Err(NoiseError::WrongMode(NoiseMode::SmoothedWhite));
    }
    let w = white_increment(spec.grid(), dt, rng)?;
    spec.smooth(&w)
}

/// `ΔW = Σ_k √λ_k Δβ_k e_k` over the retained spectrum (not yet smoothed).
pub fn qwiener_increment(spec: &NoiseSpec, dt: f64, rng: RngStream) -> Result<Field, NoiseError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NoiseError::BadDt(dt));
    }
    let modes = spec.spectrum().ok_or(NoiseError::WrongMode(NoiseMode::QWiener))?;
    let z = rng.normals(modes.len());
    let mut out = vec![0.0; spec.grid().len()];
    for (m, zk) in modes.iter().zip(z) {
        if m.lambda == 0.0 {
            continue;
        }
        let a = (m.lambda * dt).sqrt() * zk;
        for (o, e) in out.iter_mut().zip(m.basis.values()) {
            *o += a * e;
        }
    }
    Ok(Field::new(*spec.grid(), out)?)
}

/// `c = φ ⋆ φ~`, the spatial covariance per unit time of `W^φ`.
pub fn analytic_covariance(phi: &Field) -> Field {
    crate::grid::convolve(phi, &phi.reflected()).expect("same grid")
}

/// `max_z ‖φ - τ_z φ‖_{L²} / |z|^α` over `z ∈ {1, 2, 4, 8}·dx` on each axis.
pub fn nikolskii_constant(phi: &Field, alpha: f64) -> Result<f64, NoiseError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(NoiseError::BadAlpha(alpha));
    }
    let g = phi.grid();
    let mut best = 0.0_f64;
    for axis in 0..g.dim() {
        for s in [1isize, 2, 4, 8] {
            let d = phi.axpby(1.0, &phi.shifted(axis, s), -1.0)?;
            let norm = integrate(&d.map(|v| v * v), None)?.sqrt();
            best = best.max(norm / (s as f64 * g.dx()).powf(alpha));
        }
    }
    Ok(best)
}

/// A real Fourier mode on the grid, indexed by its integer wave vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierMode {
    /// Wave vector, components in `(-n/2, n/2]`.
    pub wave: [i64; 2],
    pub sine: bool,
    pub basis: Field,
}

fn signed(k: usize, n: usize) -> i64 {
    if k > n / 2 {
        k as i64 - n as i64
    } else {
        k as i64
    }
}

/// Orthonormal real Fourier basis (cosines and sines of the node index
/// phase), ordered by increasing `|wave|²`, truncated to `max_modes`.
pub fn fourier_basis(grid: &Grid, max_modes: Option<usize>) -> Vec<FourierMode> {
    let n = grid.n();
    let dim = grid.dim();
    let mut waves: Vec<[i64; 2]> = Vec::new();
    for flat in 0..grid.len() {
        let idx = grid.unravel(flat);
        let mut w = [0i64; 2];
        for a in 0..dim {
            w[a] = signed(idx[a], n);
        }
        // keep one representative of each {k, -k} pair
        let neg = neg_wave(w, n, dim);
        if w <= neg {
            waves.push(w);
        }
    }
    waves.sort_by_key(|w| (w[0] * w[0] + w[1] * w[1], *w));

    let volume = grid.volume();
    let limit = max_modes.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    for w in waves {
        if out.len() >= limit {
            break;
        }
        let self_conjugate = neg_wave(w, n, dim) == w;
        let phase = |flat: usize| {
            let idx = grid.unravel(flat);
            (0..dim)
                .map(|a| std::f64::consts::TAU * (w[a] as f64) * idx[a] as f64 / n as f64)
                .sum::<f64>()
        };
        if self_conjugate {
            let c = 1.0 / volume.sqrt();
            let vals = (0..grid.len()).map(|i| c * phase(i).cos().round()).collect();
            out.push(FourierMode {
                wave: w,
                sine: false,
                basis: Field::from_raw(*grid, vals),
            });
        } else {
            let c = (2.0 / volume).sqrt();
            let cos = (0..grid.len()).map(|i| c * phase(i).cos()).collect();
            out.push(FourierMode {
                wave: w,
                sine: false,
                basis: Field::from_raw(*grid, cos),
            });
            if out.len() >= limit {
                break;
            }
            let sin = (0..grid.len()).map(|i| c * phase(i).sin()).collect();
            out.push(FourierMode {
                wave: w,
                sine: true,
                basis: Field::from_raw(*grid, sin),
            });
        }
    }
    out
}

fn neg_wave(w: [i64; 2], n: usize, dim: usize) -> [i64; 2] {
    let mut neg = [0i64; 2];
    for a in 0..dim {
        neg[a] = signed((n as i64 - w[a]).rem_euclid(n as i64) as usize, n);
    }
    neg
}

/// Spectrum of the circulant covariance operator with kernel `φ ⋆ φ~` in the
/// real Fourier basis: `λ_k = |φ̂_k|²`. Q-Wiener increments built from it,
/// left unsmoothed, have the same law as `φ * ΔW`.
pub fn matched_spectrum(phi: &Field, max_modes: Option<usize>) -> Vec<SpectralMode> {
    let grid = *phi.grid();
    let spectrum = GridFft::new(grid).profile_spectrum(phi);
    fourier_basis(&grid, max_modes)
        .into_iter()
        .map(|m| {
            let mut idx = [0usize; 2];
            for a in 0..grid.dim() {
                idx[a] = m.wave[a].rem_euclid(grid.n() as i64) as usize;
            }
            SpectralMode {
                lambda: spectrum[grid.ravel(idx)].norm_sqr(),
                basis: m.basis,
            }
        })
        .collect()
}

/// `Q = I` on the grid: every Fourier mode with weight 1.
pub fn identity_spectrum(grid: &Grid) -> Vec<SpectralMode> {
    fourier_basis(grid, None)
        .into_iter()
        .map(|m| SpectralMode {
            lambda: 1.0,
            basis: m.basis,
        })
        .collect()
}
