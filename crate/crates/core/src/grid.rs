//! Periodic box discretization of R^N, rectangle-rule quadrature and FFT
//! convolution.
//!
//! The box is `[-L, L)^N` with `n` nodes per axis, `x_i = -L + i * dx`. Flat
//! indices are row-major with axis 0 slowest. Because `n` is even, the origin
//! is always a node (`i = n / 2` on every axis), which is where sampled
//! convolution profiles are centered.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("points_per_dim must be even, got {0}")]
    OddMeshCount(usize),
    #[error("points_per_dim must be at least 4, got {0}")]
    TooFewPoints(usize),
    #[error("half_width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("dimension must be 1 or 2, got {0}")]
    UnsupportedDimension(usize),
    #[error("grid has too many points ({0})")]
    TooLarge(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points_per_dim: usize) -> Self {
        Self {
            dim,
            half_width,
            points_per_dim,
        }
    }
}

/// A validated [`GridSpec`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    dx: f64,
}

/// Validates `spec` and returns the grid.
pub fn make_grid(spec: GridSpec) -> Result<Grid, GridError> {
    Grid::new(spec)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self, GridError> {
        if spec.dim == 0 || spec.dim > MAX_DIM {
            return Err(GridError::UnsupportedDimension(spec.dim));
        }
        if !(spec.half_width.is_finite() && spec.half_width > 0.0) {
            return Err(GridError::BadHalfWidth(spec.half_width));
        }
        if !spec.points_per_dim.is_multiple_of(2) {
            return Err(GridError::OddMeshCount(spec.points_per_dim));
        }
        if spec.points_per_dim < 4 {
            return Err(GridError::TooFewPoints(spec.points_per_dim));
        }
        let total = spec.points_per_dim.checked_pow(spec.dim as u32).unwrap_or(usize::MAX);
        if total > 1 << 28 {
            return Err(GridError::TooLarge(total));
        }
        Ok(Self {
            spec,
            dx: 2.0 * spec.half_width / spec.points_per_dim as f64,
        })
    }

    /// 1-D convenience constructor.
    pub fn line(half_width: f64, n: usize) -> Result<Self, GridError> {
        Self::new(GridSpec::new(1, half_width, n))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.spec.points_per_dim
    }

    pub fn half_width(&self) -> f64 {
        self.spec.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `dx^N`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.spec.dim as i32)
    }

    /// Total number of nodes, `n^N`.
    pub fn len(&self) -> usize {
        self.n().pow(self.spec.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Box volume `(2L)^N`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.spec.half_width).powi(self.spec.dim as i32)
    }

    /// Coordinate of the `i`-th node along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.spec.half_width + i as f64 * self.dx
    }

    /// Per-axis indices of a flat index, axis 0 first.
    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIM] {
        let n = self.n();
        match self.spec.dim {
            1 => [flat, 0],
            _ => [flat / n, flat % n],
        }
    }

    pub fn ravel(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.spec.dim {
            1 => idx[0],
            _ => idx[0] * self.n() + idx[1],
        }
    }

    /// Coordinates of a flat index; entries past `dim` are zero.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut p = [0.0; MAX_DIM];
        for (axis, slot) in p.iter_mut().enumerate().take(self.dim()) {
            *slot = self.coord(idx[axis]);
        }
        p
    }

    /// Flat index of the node at the origin.
    pub fn origin_index(&self) -> usize {
        self.ravel([self.n() / 2; MAX_DIM])
    }

    /// Flat index of `flat` moved by `k` nodes along `axis`, wrapping.
    pub fn shift_index(&self, flat: usize, axis: usize, k: isize) -> usize {
        let n = self.n() as isize;
        let mut idx = self.unravel(flat);
        idx[axis] = (idx[axis] as isize + k).rem_euclid(n) as usize;
        self.ravel(idx)
    }

    /// The box of twice the half-width at the same mesh size.
    pub fn doubled(&self) -> Result<Self, GridError> {
        Self::new(GridSpec::new(self.dim(), 2.0 * self.half_width(), 2 * self.n()))
    }

    fn check_same(&self, other: &Grid) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} L={} n={} dx={}",
            self.dim(),
            self.half_width(),
            self.n(),
            self.dx
        )
    }
}

/// Real values sampled on a [`Grid`]. All entries are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan. Callers guarantee the invariant.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f` at every node. Panics if `f` returns a non-finite value.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                let v = f(&p[..dim]);
                assert!(v.is_finite(), "sampled function is not finite at {:?}", &p[..dim]);
                v
            })
            .collect();
        Self::from_raw(grid, values)
    }

    /// Discrete delta: `1 / dx^N` at the origin, zero elsewhere.
    pub fn delta(grid: Grid) -> Self {
        let mut f = Self::zeros(grid);
        f.values[grid.origin_index()] = 1.0 / grid.cell_volume();
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise map. Panics on a non-finite result.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert!(values.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Self::from_raw(self.grid, values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Result<Self, GridError> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_raw(self.grid, values))
    }

    /// `f~(x) = f(-x)` on the periodic box.
    pub fn reflected(&self) -> Self {
        let g = self.grid;
        let n = g.n();
        let values = (0..g.len())
            .map(|i| {
                let mut idx = g.unravel(i);
                for a in idx.iter_mut().take(g.dim()) {
                    *a = (n - *a) % n;
                }
                self.values[g.ravel(idx)]
            })
            .collect();
        Self::from_raw(g, values)
    }

    /// Periodic shift `(tau f)(y) = f(y + k dx e_axis)`.
    pub fn shifted(&self, axis: usize, k: isize) -> Self {
        let g = self.grid;
        let values = (0..g.len()).map(|i| self.values[g.shift_index(i, axis, k)]).collect();
        Self::from_raw(g, values)
    }

    /// Centered profile reordered so the origin sits at flat index 0
    /// (lag `k` at index `k mod n` on every axis).
    fn origin_first(&self) -> Vec<f64> {
        let g = self.grid;
        let half = (g.n() / 2) as isize;
        (0..g.len())
            .map(|i| {
                let mut j = i;
                for axis in 0..g.dim() {
                    j = g.shift_index(j, axis, half);
                }
                self.values[j]
            })
            .collect()
    }

    /// Inverse of [`Field::origin_first`].
    fn from_origin_first(grid: Grid, data: &[f64]) -> Vec<f64> {
        let half = (grid.n() / 2) as isize;
        (0..grid.len())
            .map(|i| {
                let mut j = i;
                for axis in 0..grid.dim() {
                    j = grid.shift_index(j, axis, -half);
                }
                data[j]
            })
            .collect()
    }
}

/// Rectangle-rule quadrature `dx^N * sum f(x_i) w(x_i)`.
pub fn integrate(f: &Field, weight: Option<&Field>) -> Result<f64, GridError> {
    let s: f64 = match weight {
        None => f.values.iter().sum(),
        Some(w) => {
            f.grid.check_same(&w.grid)?;
            f.values.iter().zip(&w.values).map(|(a, b)| a * b).sum()
        }
    };
    Ok(s * f.grid.cell_volume())
}

/// `<f, g>` under [`integrate`].
pub fn inner(f: &Field, g: &Field) -> Result<f64, GridError> {
    integrate(f, Some(g))
}

/// Forward/inverse N-d FFT on the grid's `n^N` layout.
#[derive(Clone)]
pub(crate) struct GridFft {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridFft {
    pub(crate) fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.grid.n();
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        match self.grid.dim() {
            1 => plan.process_with_scratch(data, &mut scratch),
            _ => {
                // rows are contiguous; columns go through a gather buffer
                plan.process_with_scratch(data, &mut scratch);
                let mut col = vec![Complex64::default(); n];
                for c in 0..n {
                    for r in 0..n {
                        col[r] = data[r * n + c];
                    }
                    plan.process_with_scratch(&mut col, &mut scratch);
                    for r in 0..n {
                        data[r * n + c] = col[r];
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / self.grid.len() as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false)
    }

    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true)
    }

    /// Spectrum of a centered profile, including the `dx^N` quadrature weight.
    pub(crate) fn profile_spectrum(&self, profile: &Field) -> Vec<Complex64> {
        let w = self.grid.cell_volume();
        let mut data: Vec<Complex64> = profile
            .origin_first()
            .into_iter()
            .map(|v| Complex64::new(v * w, 0.0))
            .collect();
        self.forward(&mut data);
        data
    }

    /// Centered real field from a spectrum laid out origin-first.
    pub(crate) fn centered_from_spectrum(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spectrum);
        let re: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
        Field::from_origin_first(self.grid, &re)
    }
}

/// Convolution with a fixed centered profile, with the profile spectrum
/// computed once.
#[derive(Clone)]
pub struct Convolver {
    fft: GridFft,
    spectrum: Vec<Complex64>,
    is_zero: bool,
}

impl fmt::Debug for Convolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Convolver")
            .field("grid", &self.fft.grid)
            .finish_non_exhaustive()
    }
}

impl Convolver {
    pub fn new(profile: &Field) -> Self {
        let fft = GridFft::new(profile.grid);
        let spectrum = fft.profile_spectrum(profile);
        let is_zero = profile.values.iter().all(|&v| v == 0.0);
        Self { fft, spectrum, is_zero }
    }

    pub fn grid(&self) -> &Grid {
        &self.fft.grid
    }

    /// `v(x_i) = dx^N * sum_j profile(x_i - x_j) u(x_j)`, periodic.
    pub fn apply(&self, u: &Field) -> Result<Field, GridError> {
        self.fft.grid.check_same(&u.grid)?;
        if self.is_zero {
            return Ok(Field::zeros(u.grid));
        }
        let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        for (d, s) in data.iter_mut().zip(&self.spectrum) {
            *d *= s;
        }
        self.fft.inverse(&mut data);
        let values: Vec<f64> = data.into_iter().map(|c| c.re).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Field::from_raw(u.grid, values))
    }
}

/// One-off convolution `(profile * u)`; see [`Convolver`] for repeated use.
pub fn convolve(profile: &Field, u: &Field) -> Result<Field, GridError> {
    profile.grid.check_same(&u.grid)?;
    Convolver::new(profile).apply(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn direct_convolve(p: &Field, u: &Field) -> Vec<f64> {
        let g = *p.grid();
        let origin = g.origin_index();
        (0..g.len())
            .map(|i| {
                let ii = g.unravel(i);
                let mut s = 0.0;
                for j in 0..g.len() {
                    let jj = g.unravel(j);
                    let mut lag = origin;
                    for a in 0..g.dim() {
                        lag = g.shift_index(lag, a, ii[a] as isize - jj[a] as isize);
                    }
                    s += p.get(lag) * u.get(j);
                }
                s * g.cell_volume()
            })
            .collect()
    }

    #[test]
    fn coords_and_indexing() {
        let g = Grid::line(10.0, 4).unwrap();
        let xs: Vec<f64> = (0..4).map(|i| g.point(i)[0]).collect();
        assert_eq!(xs, vec![-10.0, -5.0, 0.0, 5.0]);

        let g2 = Grid::new(GridSpec::new(2, 1.0, 4)).unwrap();
        assert_eq!(g2.len(), 16);
        assert_eq!(g2.origin_index(), 10);
        assert_eq!(g2.point(10), [0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(Grid::line(1.0, 3), Err(GridError::OddMeshCount(3)));
        assert_eq!(Grid::line(1.0, 2), Err(GridError::TooFewPoints(2)));
        assert_eq!(Grid::line(0.0, 8), Err(GridError::BadHalfWidth(0.0)));
        assert!(matches!(
            Grid::new(GridSpec::new(3, 1.0, 8)),
            Err(GridError::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn field_rejects_nan_and_bad_length() {
        let g = Grid::line(1.0, 4).unwrap();
        assert!(matches!(
            Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(GridError::NonFinite(1))
        ));
        assert!(matches!(
            Field::new(g, vec![0.0; 3]),
            Err(GridError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn integrate_box_measure_and_odd_symmetry() {
        let g = Grid::line(10.0, 100).unwrap();
        assert_abs_diff_eq!(
            integrate(&Field::constant(g, 1.0), None).unwrap(),
            20.0,
            epsilon = 1e-12
        );
        // f(x) = x: the node at -L has no mirror partner, so use the
        // symmetric part of the periodic box via the reflected weight.
        let x = Field::from_fn(g, |p| p[0]);
        let odd = x.axpby(0.5, &x.reflected(), -0.5).unwrap();
        assert_abs_diff_eq!(integrate(&odd, None).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn integrate_mismatched_weight() {
        let a = Field::zeros(Grid::line(1.0, 4).unwrap());
        let b = Field::zeros(Grid::line(1.0, 8).unwrap());
        assert_eq!(integrate(&a, Some(&b)), Err(GridError::GridMismatch));
    }

    #[test]
    fn delta_profile_is_identity() {
        let g = Grid::line(3.0, 32).unwrap();
        let u = Field::from_fn(g, |p| (p[0] * 1.3).sin() + 0.2 * p[0]);
        let v = convolve(&Field::delta(g), &u).unwrap();
        for (a, b) in v.values().iter().zip(u.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_profile_smears_to_integral() {
        let g = Grid::line(2.0, 16).unwrap();
        let u = Field::from_fn(g, |p| (-p[0] * p[0]).exp() + p[0]);
        let total = integrate(&u, None).unwrap();
        let v = convolve(&Field::constant(g, 1.0), &u).unwrap();
        for a in v.values() {
            assert_abs_diff_eq!(*a, total, epsilon = 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_sum_2d() {
        let g = Grid::new(GridSpec::new(2, 2.0, 8)).unwrap();
        let p = Field::from_fn(g, |x| (-(x[0] * x[0] + 0.5 * x[1] * x[1])).exp() + 0.1 * x[0]);
        let u = Field::from_fn(g, |x| (x[0] + 2.0 * x[1]).cos());
        let fast = convolve(&p, &u).unwrap();
        let slow = direct_convolve(&p, &u);
        let scale = slow.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn reflect_and_shift() {
        let g = Grid::line(2.0, 8).unwrap();
        let f = Field::from_fn(g, |p| p[0]);
        let r = f.reflected();
        // x_i -> -x_i; the node at -L maps to itself
        assert_eq!(r.get(0), -2.0);
        assert_eq!(r.get(1), 1.5);
        assert_eq!(r.get(4), 0.0);
        let s = f.shifted(0, 1);
        assert_eq!(s.get(0), -1.5);
        assert_eq!(s.get(7), -2.0);
    }

    #[test]
    fn doubled_grid_keeps_mesh() {
        let g = Grid::line(5.0, 64).unwrap();
        let d = g.doubled().unwrap();
        assert_eq!(d.dx(), g.dx());
        assert_eq!(d.half_width(), 10.0);
    }

    #[test]
    fn gaussian_integral_matches_adaptive_quadrature() {
        let oracle = crate::oracles::adaptive_simpson(&|x: f64| (-x * x / 2.0).exp(), -10.0, 10.0, 1e-13);
        assert_abs_diff_eq!(oracle, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
        let g = Grid::line(10.0, 256).unwrap();
        let f = Field::from_fn(g, |p| (-p[0] * p[0] / 2.0).exp());
        assert_abs_diff_eq!(integrate(&f, None).unwrap(), oracle, epsilon = 1e-8);
    }

    #[test]
    fn indicator_self_convolution_is_triangle() {
        let g = Grid::line(4.0, 256).unwrap();
        let ind = Field::from_fn(g, |p| if p[0].abs() <= 0.5 { 1.0 } else { 0.0 });
        let tri = convolve(&ind, &ind).unwrap();
        // closed form of the continuous convolution
        let err = (0..g.len())
            .map(|i| (tri.get(i) - (1.0 - g.point(i)[0].abs()).max(0.0)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2.0 * g.dx(), "sup error {err}");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn field_strategy(g: Grid) -> impl Strategy<Value = Field> {
            prop::collection::vec(-5.0..5.0f64, g.len()).prop_map(move |v| Field::new(g, v).unwrap())
        }

        fn direct(p: &Field, u: &Field) -> Vec<f64> {
            super::direct_convolve(p, u)
        }

        proptest! {
            #[test]
            fn integrate_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64,
                                   f in field_strategy(Grid::line(2.0, 16).unwrap()),
                                   h in field_strategy(Grid::line(2.0, 16).unwrap())) {
                let lhs = integrate(&f.axpby(a, &h, b).unwrap(), None).unwrap();
                let rhs = a * integrate(&f, None).unwrap() + b * integrate(&h, None).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
            }

            #[test]
            fn convolution_matches_direct_and_commutes(
                p in field_strategy(Grid::line(3.0, 64).unwrap()),
                u in field_strategy(Grid::line(3.0, 64).unwrap())) {
                let fast = convolve(&p, &u).unwrap();
                let swapped = convolve(&u, &p).unwrap();
                let slow = direct(&p, &u);
                let scale = slow.iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
                for i in 0..slow.len() {
                    prop_assert!((fast.get(i) - slow[i]).abs() <= 1e-10 * scale);
                    prop_assert!((fast.get(i) - swapped.get(i)).abs() <= 1e-10 * scale);
                }
            }

            #[test]
            fn young_bound(p in field_strategy(Grid::line(3.0, 32).unwrap()),
                           u in field_strategy(Grid::line(3.0, 32).unwrap())) {
                let v = convolve(&p, &u).unwrap();
                let bound = integrate(&p.abs(), None).unwrap() * u.sup_norm();
                prop_assert!(v.sup_norm() <= bound * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
