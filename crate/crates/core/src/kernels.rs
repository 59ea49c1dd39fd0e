//! Connectivity kernels `w(x, y)`, the well-posedness condition certifier,
//! and two solvers for the weight `ρ_w` with `∫|w(x,y)| ρ_w(x) dx ≤ Λ_w ρ_w(y)`.
//!
//! A [`KernelSpec`] is a recipe that can be sampled on any grid (the
//! certifier needs boxes of size L and 2L); a [`KernelModel`] is the sampled
//! operator on one grid.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{integrate, Convolver, Field, Grid, GridError, GridFft};
use crate::par;

/// Largest node count for which a dense `General` kernel is stored.
pub const MAX_DENSE_POINTS: usize = 4096;

/// Box-doubling growth ratio above which a condition is reported as
/// diverging.
pub const DEFAULT_DIVERGENCE_RATIO: f64 = 1.05;

/// Shifts, in mesh units, used for Hölder-type estimates.
const HOLDER_SHIFTS: [isize; 3] = [1, 2, 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("kernel matrix must be {expected}x{expected}, got {got} entries")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("dense kernels are limited to {MAX_DENSE_POINTS} nodes, grid has {0}")]
    TooLarge(usize),
    #[error("unknown condition `{0}` (expected C1, C2, C2', C3')")]
    UnknownCondition(String),
    #[error("condition C3' needs an exponent alpha")]
    MissingAlpha,
    #[error("alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("a kernel loaded from a file cannot be resampled on a larger box")]
    NotResamplable,
    #[error("operation needs a homogeneous kernel")]
    NotHomogeneous,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("kernel is identically zero")]
    ZeroKernel,
    #[error("Fourier denominator {0} dropped below 1")]
    DenominatorTooSmall(f64),
    #[error("rho has negative values (min {min:e}, max {max:e})")]
    NegativeRho { min: f64, max: f64 },
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Sampled kernel operator on one grid.
#[derive(Clone, Debug)]
pub struct KernelModel {
    grid: Grid,
    kind: KernelKind,
    is_zero: bool,
    // indexed by (absolute as usize) * 2 + (transpose as usize)
    convolvers: Arc<[OnceLock<Convolver>; 4]>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    /// `w(x, y) = profile(x - y)`, profile centered at the origin node.
    Homogeneous { profile: Field },
    /// Dense row-major `w(x_i, y_j)`.
    General { matrix: Vec<f64> },
}

impl KernelModel {
    pub fn homogeneous(profile: Field) -> Self {
        let grid = *profile.grid();
        let is_zero = profile.values().iter().all(|&v| v == 0.0);
        Self {
            grid,
            kind: KernelKind::Homogeneous { profile },
            is_zero,
            convolvers: Arc::new(Default::default()),
        }
    }

    pub fn general(grid: Grid, matrix: Vec<f64>) -> Result<Self, KernelError> {
        let n = grid.len();
        if n > MAX_DENSE_POINTS {
            return Err(KernelError::TooLarge(n));
        }
        if matrix.len() != n * n {
            return Err(KernelError::ShapeMismatch {
                expected: n,
                got: matrix.len(),
            });
        }
        if let Some(i) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i).into());
        }
        let is_zero = matrix.iter().all(|&v| v == 0.0);
        Ok(Self {
            grid,
            kind: KernelKind::General { matrix },
            is_zero,
            convolvers: Arc::new(Default::default()),
        })
    }

    pub fn zero(grid: Grid) -> Self {
        Self::homogeneous(Field::zeros(grid))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.kind, KernelKind::Homogeneous { .. })
    }

    /// `w(x_i, y_j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        match &self.kind {
            KernelKind::Homogeneous { profile } => {
                let g = &self.grid;
                let (ii, jj) = (g.unravel(i), g.unravel(j));
                let mut lag = g.origin_index();
                for a in 0..g.dim() {
                    lag = g.shift_index(lag, a, ii[a] as isize - jj[a] as isize);
                }
                profile.get(lag)
            }
            KernelKind::General { matrix } => matrix[i * self.grid.len() + j],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match &self.kind {
            KernelKind::Homogeneous { profile } => Self::homogeneous(profile.scaled(c)),
            KernelKind::General { matrix } => {
                Self::general(self.grid, matrix.iter().map(|v| c * v).collect()).expect("scaling keeps the shape")
            }
        }
    }

    /// `sup_x ∫|w(x, y)| dy`.
    pub fn row_l1_sup(&self) -> f64 {
        match &self.kind {
            KernelKind::Homogeneous { profile } => integrate(&profile.abs(), None).unwrap(),
            KernelKind::General { matrix } => {
                let n = self.grid.len();
                let w = self.grid.cell_volume();
                matrix
                    .chunks_exact(n)
                    .map(|row| row.iter().map(|v| v.abs()).sum::<f64>() * w)
                    .fold(0.0, f64::max)
            }
        }
    }

    fn convolver(&self, absolute: bool, transpose: bool) -> &Convolver {
        let KernelKind::Homogeneous { profile } = &self.kind else {
            unreachable!("convolver requested for a general kernel")
        };
        self.convolvers[(absolute as usize) * 2 + transpose as usize].get_or_init(|| {
            let mut p = if absolute { profile.abs() } else { profile.clone() };
            if transpose {
                p = p.reflected();
            }
            Convolver::new(&p)
        })
    }
}

/// `dx^N Σ_j w(x_i, y_j) h(y_j)`, optionally with `|w|` and/or the transposed
/// kernel `w(y_j, x_i)`.
pub fn apply_kernel(k: &KernelModel, h: &Field, absolute: bool, transpose: bool) -> Result<Field, KernelError> {
    if h.grid() != k.grid() {
        return Err(GridError::GridMismatch.into());
    }
    if k.is_zero {
        return Ok(Field::zeros(k.grid));
    }
    match &k.kind {
        KernelKind::Homogeneous { .. } => Ok(k.convolver(absolute, transpose).apply(h)?),
        KernelKind::General { matrix } => {
            let n = k.grid.len();
            let w = k.grid.cell_volume();
            let hv = h.values();
            let entry = |v: f64| if absolute { v.abs() } else { v };
            let values: Vec<f64> = if transpose {
                let mut out = vec![0.0; n];
                for (j, row) in matrix.chunks_exact(n).enumerate() {
                    let hj = hv[j];
                    for (o, &wji) in out.iter_mut().zip(row) {
                        *o += entry(wji) * hj;
                    }
                }
                out.into_iter().map(|v| v * w).collect()
            } else {
                matrix
                    .chunks_exact(n)
                    .map(|row| row.iter().zip(hv).map(|(&a, &b)| entry(a) * b).sum::<f64>() * w)
                    .collect()
            };
            Ok(Field::new(k.grid, values)?)
        }
    }
}

/// Kernel recipes that can be sampled on any grid.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Zero,
    /// Discrete identity operator.
    Delta,
    /// `a exp(-|r|²/s²)`.
    Gaussian {
        amplitude: f64,
        scale: f64,
    },
    /// `a1 exp(-|r|²/s1²) - a2 exp(-|r|²/s2²)`.
    MexicanHat {
        a1: f64,
        s1: f64,
        a2: f64,
        s2: f64,
    },
    /// `a exp(-|r|/s)`.
    Exponential {
        amplitude: f64,
        scale: f64,
    },
    /// `u(x) u(y)` with `u(x) = exp(-|x|²/2)`.
    RankOneGaussian,
    /// `(1+|x|)^-1 (1+|y|)^-1`: square integrable, but its row L1 norms are
    /// not square integrable.
    InverseProduct,
    Scaled {
        factor: f64,
        inner: Box<KernelSpec>,
    },
    /// A fixed sampled kernel (e.g. loaded from a matrix file).
    Sampled(KernelModel),
}

impl PartialEq for KernelModel {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.kind == other.kind
    }
}

impl KernelSpec {
    pub fn gaussian(amplitude: f64, scale: f64) -> Self {
        Self::Gaussian { amplitude, scale }
    }

    pub fn mexican_hat(a1: f64, s1: f64, a2: f64, s2: f64) -> Self {
        Self::MexicanHat { a1, s1, a2, s2 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        match self {
            Self::Zero | Self::Delta | Self::Gaussian { .. } | Self::MexicanHat { .. } | Self::Exponential { .. } => {
                true
            }
            Self::RankOneGaussian | Self::InverseProduct => false,
            Self::Scaled { inner, .. } => inner.is_homogeneous(),
            Self::Sampled(k) => k.is_homogeneous(),
        }
    }

    /// Profile value at lag `r` for homogeneous recipes.
    fn profile_at(&self, grid: &Grid, r: &[f64]) -> f64 {
        let r2: f64 = r.iter().map(|v| v * v).sum();
        match self {
            Self::Zero => 0.0,
            Self::Delta => {
                if r2.sqrt() < 0.5 * grid.dx() {
                    1.0 / grid.cell_volume()
                } else {
                    0.0
                }
            }
            Self::Gaussian { amplitude, scale } => amplitude * (-r2 / (scale * scale)).exp(),
            Self::MexicanHat { a1, s1, a2, s2 } => a1 * (-r2 / (s1 * s1)).exp() - a2 * (-r2 / (s2 * s2)).exp(),
            Self::Exponential { amplitude, scale } => amplitude * (-r2.sqrt() / scale).exp(),
            Self::Scaled { factor, inner } => factor * inner.profile_at(grid, r),
            _ => unreachable!("profile_at on a non-homogeneous recipe"),
        }
    }

    /// `w(x, y)` for general recipes.
    fn value_at(&self, x: &[f64], y: &[f64]) -> f64 {
        let norm = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            Self::RankOneGaussian => {
                let u = |p: &[f64]| (-0.5 * p.iter().map(|v| v * v).sum::<f64>()).exp();
                u(x) * u(y)
            }
            Self::InverseProduct => 1.0 / ((1.0 + norm(x)) * (1.0 + norm(y))),
            Self::Scaled { factor, inner } => factor * inner.value_at(x, y),
            _ => unreachable!("value_at on a homogeneous recipe"),
        }
    }

    /// Samples the recipe on `grid`.
    pub fn build(&self, grid: Grid) -> Result<KernelModel, KernelError> {
        if let Self::Sampled(k) = self {
            return if *k.grid() == grid {
                Ok(k.clone())
            } else {
                Err(GridError::GridMismatch.into())
            };
        }
        if let Self::Scaled { factor, inner } = self {
            if let Self::Sampled(_) = inner.as_ref() {
                return Ok(inner.build(grid)?.scaled(*factor));
            }
        }
        if self.is_homogeneous() {
            Ok(KernelModel::homogeneous(Field::from_fn(grid, |r| {
                self.profile_at(&grid, r)
            })))
        } else {
            let n = grid.len();
            if n > MAX_DENSE_POINTS {
                return Err(KernelError::TooLarge(n));
            }
            let dim = grid.dim();
            let mut matrix = Vec::with_capacity(n * n);
            for i in 0..n {
                let x = grid.point(i);
                for j in 0..n {
                    matrix.push(self.value_at(&x[..dim], &grid.point(j)[..dim]));
                }
            }
            KernelModel::general(grid, matrix)
        }
    }

    fn is_resamplable(&self) -> bool {
        match self {
            Self::Sampled(_) => false,
            Self::Scaled { inner, .. } => inner.is_resamplable(),
            _ => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `∬ w² < ∞`
    C1,
    /// `∫ (∫|w(x,y)| dy)² dx < ∞`
    C2,
    /// `sup_x ∫|w(x,y)| dy ≤ C_w`
    C2Prime,
    /// `‖w(x,·) - w(x̃,·)‖₁ ≤ L_w |x - x̃|^α`
    C3Prime,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Self::C1, Self::C2, Self::C2Prime, Self::C3Prime];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C2Prime => "C2'",
            Self::C3Prime => "C3'",
        })
    }
}

impl FromStr for Condition {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c1" => Ok(Self::C1),
            "c2" => Ok(Self::C2),
            "c2'" | "c2prime" | "c2p" => Ok(Self::C2Prime),
            "c3'" | "c3prime" | "c3p" => Ok(Self::C3Prime),
            _ => Err(KernelError::UnknownCondition(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    DivergesUnderRefinement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub value_at_l: f64,
    pub value_at_2l: f64,
    /// `C_w` for C2', the `L_w` estimate for C3'.
    pub constant: Option<f64>,
    pub alpha: Option<f64>,
}

/// Evaluates `cond` on `grid` and on the doubled box, with the default
/// divergence ratio.
pub fn check_condition(
    spec: &KernelSpec,
    grid: Grid,
    cond: Condition,
    alpha: Option<f64>,
) -> Result<ConditionReport, KernelError> {
    check_condition_with(spec, grid, cond, alpha, DEFAULT_DIVERGENCE_RATIO)
}

pub fn check_condition_with(
    spec: &KernelSpec,
    grid: Grid,
    cond: Condition,
    alpha: Option<f64>,
    divergence_ratio: f64,
) -> Result<ConditionReport, KernelError> {
    let alpha = match (cond, alpha) {
        (Condition::C3Prime, None) => return Err(KernelError::MissingAlpha),
        (Condition::C3Prime, Some(a)) if !(a > 0.0 && a <= 1.0) => return Err(KernelError::BadAlpha(a)),
        (Condition::C3Prime, Some(a)) => Some(a),
        _ => None,
    };
    if !spec.is_resamplable() {
        return Err(KernelError::NotResamplable);
    }
    let big = grid.doubled()?;
    let value_at_l = condition_value(spec, grid, cond, alpha.unwrap_or(1.0))?;
    let value_at_2l = condition_value(spec, big, cond, alpha.unwrap_or(1.0))?;
    let verdict = if !(value_at_l.is_finite() && value_at_2l.is_finite()) {
        Verdict::Fails
    } else if (value_at_l == 0.0 && value_at_2l == 0.0) || value_at_2l / value_at_l < divergence_ratio {
        Verdict::Holds
    } else {
        Verdict::DivergesUnderRefinement
    };
    let constant = match cond {
        Condition::C2Prime | Condition::C3Prime => Some(value_at_l),
        _ => None,
    };
    Ok(ConditionReport {
        condition: cond,
        verdict,
        value_at_l,
        value_at_2l,
        constant,
        alpha,
    })
}

/// The defining quantity of `cond` on one grid.
fn condition_value(spec: &KernelSpec, grid: Grid, cond: Condition, alpha: f64) -> Result<f64, KernelError> {
    let w = grid.cell_volume();
    if spec.is_homogeneous() {
        // On the periodic box every row is a shift of the profile.
        let p = Field::from_fn(grid, |r| spec.profile_at(&grid, r));
        let l1 = integrate(&p.abs(), None)?;
        return Ok(match cond {
            Condition::C1 => grid.volume() * integrate(&p.map(|v| v * v), None)?,
            Condition::C2 => grid.volume() * l1 * l1,
            Condition::C2Prime => l1,
            Condition::C3Prime => {
                let mut best = 0.0_f64;
                for axis in 0..grid.dim() {
                    for &s in &HOLDER_SHIFTS {
                        let diff = p.axpby(1.0, &p.shifted(axis, s), -1.0)?;
                        let h = s as f64 * grid.dx();
                        best = best.max(integrate(&diff.abs(), None)? / h.powf(alpha));
                    }
                }
                best
            }
        });
    }

    let n = grid.len();
    let dim = grid.dim();
    let row = |i: usize| -> Vec<f64> {
        let x = grid.point(i);
        (0..n)
            .map(|j| spec.value_at(&x[..dim], &grid.point(j)[..dim]))
            .collect()
    };
    let per_row: Vec<f64> = par::map_indices(n, |i| {
        let r = row(i);
        match cond {
            Condition::C1 => r.iter().map(|v| v * v).sum::<f64>() * w * w,
            Condition::C2 => {
                let l1 = r.iter().map(|v| v.abs()).sum::<f64>() * w;
                l1 * l1 * w
            }
            Condition::C2Prime => r.iter().map(|v| v.abs()).sum::<f64>() * w,
            Condition::C3Prime => {
                let idx = grid.unravel(i);
                let mut best = 0.0_f64;
                for axis in 0..dim {
                    for &s in &HOLDER_SHIFTS {
                        // non-periodic recipe: skip pairs that leave the box
                        if idx[axis] + s as usize >= grid.n() {
                            continue;
                        }
                        let other = row(grid.shift_index(i, axis, s));
                        let d: f64 = r.iter().zip(&other).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
                        best = best.max(d / (s as f64 * grid.dx()).powf(alpha));
                    }
                }
                best
            }
        }
    });
    Ok(match cond {
        Condition::C1 | Condition::C2 => per_row.iter().sum(),
        Condition::C2Prime | Condition::C3Prime => per_row.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenMethod {
    PowerIteration,
    FourierConstruction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    /// Normalized to `∫ρ = 1`.
    pub rho: Field,
    pub lambda: f64,
    /// `sup |Jρ - λρ| / sup ρ` for power iteration; the one-sided
    /// `sup max(0, Jρ - λρ) / sup ρ` for the Fourier construction.
    pub residual: f64,
    pub method: EigenMethod,
    pub iterations: usize,
    pub min_rho: f64,
}

/// Negative values of ρ below `-RHO_NEGATIVITY_TOL * max ρ` are rejected.
pub const RHO_NEGATIVITY_TOL: f64 = 1e-8;

fn normalized(rho: Field) -> Result<Field, KernelError> {
    let mass = integrate(&rho, None)?;
    if !(mass > 0.0) {
        return Err(KernelError::ZeroKernel);
    }
    Ok(rho.scaled(1.0 / mass))
}

/// Leading eigenpair of `Jh(y) = ∫|w(x,y)| h(x) dx` by power iteration from
/// the constant field.
pub fn solve_rho_power(k: &KernelModel, tol: f64, max_iter: usize) -> Result<EigenResult, KernelError> {
    if !(tol > 0.0) {
        return Err(KernelError::BadTolerance(tol));
    }
    if k.is_zero() {
        return Err(KernelError::ZeroKernel);
    }
    let grid = *k.grid();
    let mut rho = Field::constant(grid, 1.0 / grid.volume());
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = apply_kernel(k, &rho, true, true)?;
        let lambda = integrate(&next, None)?;
        if !(lambda > 0.0) {
            return Err(KernelError::ZeroKernel);
        }
        let defect = next.axpby(1.0, &rho, -lambda)?;
        residual = defect.sup_norm() / rho.max();
        if residual < tol {
            let min_rho = rho.min();
            return Ok(EigenResult {
                rho,
                lambda,
                residual,
                method: EigenMethod::PowerIteration,
                iterations: it,
                min_rho,
            });
        }
        rho = next.scaled(1.0 / lambda);
    }
    Err(KernelError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Builds `ρ` for a homogeneous kernel from
/// `ρ̂(ξ) = ẑ(ξ) / (Λ_w - v̂(ξ))`, `v = |w|`, `z = exp(-|x|²/2)`,
/// `Λ_w = ‖w‖₁ + 1`, so that `Λ_w ρ - Jρ = z ≥ 0`.
pub fn solve_rho_fourier(k: &KernelModel) -> Result<EigenResult, KernelError> {
    let KernelKind::Homogeneous { profile } = k.kind() else {
        return Err(KernelError::NotHomogeneous);
    };
    let grid = *k.grid();
    let v = profile.abs();
    let lambda = integrate(&v, None)? + 1.0;

    // J acts on the first argument: (Jρ)(y) = ∫ v(x - y) ρ(x) dx = (ṽ * ρ)(y)
    let fft = GridFft::new(grid);
    let v_hat = fft.profile_spectrum(&v.reflected());
    let z = Field::from_fn(grid, |x| (-0.5 * x.iter().map(|a| a * a).sum::<f64>()).exp());
    let z_hat = fft.profile_spectrum(&z);

    let mut rho_hat = Vec::with_capacity(grid.len());
    for (zh, vh) in z_hat.iter().zip(&v_hat) {
        let denom = Complex64::new(lambda, 0.0) - vh;
        if denom.norm() < 1.0 - 1e-9 {
            return Err(KernelError::DenominatorTooSmall(denom.norm()));
        }
        rho_hat.push(zh / denom);
    }
    let raw = fft.centered_from_spectrum(rho_hat);
    let rho = Field::new(grid, raw.into_iter().map(|r| r / grid.cell_volume()).collect())?;
    let (min, max) = (rho.min(), rho.max());
    if min < -RHO_NEGATIVITY_TOL * max {
        return Err(KernelError::NegativeRho { min, max });
    }
    let rho = normalized(rho)?;
    let residual = c1prime_defect(k, &rho, lambda)?.max(0.0);
    let min_rho = rho.min();
    Ok(EigenResult {
        rho,
        lambda,
        residual,
        method: EigenMethod::FourierConstruction,
        iterations: 1,
        min_rho,
    })
}

fn c1prime_defect(k: &KernelModel, rho: &Field, lambda: f64) -> Result<f64, KernelError> {
    let j = apply_kernel(k, rho, true, true)?;
    let d = j.axpby(1.0, rho, -lambda)?;
    Ok(d.max() / rho.max())
}

/// `max_y (∫|w(x,y)| ρ(x) dx - λ ρ(y)) / sup ρ`. A value `≤ tol` certifies
/// the weighted inequality on the grid.
pub fn verify_c1prime(k: &KernelModel, rho: &Field, lambda: f64) -> Result<f64, KernelError> {
    if !(lambda > 0.0) {
        return Err(KernelError::BadLambda(lambda));
    }
    let (min, max) = (rho.min(), rho.max());
    if !(max > 0.0) || min < -RHO_NEGATIVITY_TOL * max {
        return Err(KernelError::NegativeRho { min, max });
    }
    c1prime_defect(k, rho, lambda)
}
