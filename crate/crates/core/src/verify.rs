//! Monte-Carlo estimators and analytic oracles.
//!
//! Thresholds are z-scores against Monte-Carlo standard errors. The OU
//! oracles assume `Y(0) = 0`, `G = 0`, `σ = 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Ensemble, PicardDiagnostics, Trajectory};
use crate::grid::Field;
use crate::noise::analytic_covariance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("time {0} is not recorded in the ensemble")]
    TimeNotRecorded(f64),
    #[error("need at least {need} paths, got {got}")]
    TooFewPaths { need: usize, got: usize },
    #[error("need at least {need} {what}, got {got}")]
    InsufficientScales {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("moment order must be one of {allowed:?}, got {got}")]
    BadOrder { allowed: &'static [f64], got: f64 },
    #[error("t must be non-negative, got {0}")]
    BadTime(f64),
    #[error("trajectories differ in {0}")]
    Mismatch(&'static str),
    #[error("recorded times are not evenly spaced")]
    UnevenTimes,
    #[error("picard diagnostics need at least 5 H values, got {0}")]
    TooFewIterates(usize),
    #[error("empty ensemble")]
    Empty,
}

/// Smallest ensemble accepted by the covariance and moment estimators.
pub const MIN_PATHS: usize = 100;

/// Value of `c` at the grid lag nearest `lag` along axis 0, with a warning if
/// `lag` is not a mesh multiple.
fn covariance_at(c: &Field, lag: f64) -> f64 {
    let g = c.grid();
    let k = (lag / g.dx()).round();
    if (k * g.dx() - lag).abs() > 1e-9 * g.dx().max(lag.abs()) {
        log::warn!("lag {lag} is off the mesh, using {}", k * g.dx());
    }
    c.get(g.shift_index(g.origin_index(), 0, k as isize))
}

/// `E[Y(t,x) Y(t,x+lag)] = c(lag) (1 - e^{-2t}) / 2` for the OU model.
pub fn ou_covariance(phi: &Field, t: f64, lag: f64) -> Result<f64, VerifyError> {
    if !(t >= 0.0) {
        return Err(VerifyError::BadTime(t));
    }
    Ok(covariance_at(&analytic_covariance(phi), lag) * ou_factor(t))
}

/// `(1 - e^{-2t}) / 2`.
pub fn ou_factor(t: f64) -> f64 {
    -(-2.0 * t).exp_m1() / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub time: f64,
    pub lags: Vec<f64>,
    pub empirical: Vec<f64>,
    pub analytic: Option<Vec<f64>>,
    pub mc_sigma: Vec<f64>,
    /// Worst `|empirical - analytic| / mc_sigma`.
    pub max_z: Option<f64>,
    /// Every `mc_sigma` is zero (e.g. a deterministic ensemble).
    pub degenerate: bool,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn z_score(diff: f64, sigma: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if sigma == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / sigma
    }
}

/// Equal-time covariance at lags along axis 0, centered on the per-point
/// ensemble mean and pooled over `x` (the models under test are
/// homogeneous). Each path contributes one pooled statistic, and
/// `mc_sigma` is the standard error of their mean.
pub fn empirical_covariance(
    ens: &Ensemble,
    t: f64,
    lags: &[f64],
    analytic: Option<&dyn Fn(f64) -> f64>,
) -> Result<CovarianceReport, VerifyError> {
    let k = ens.time_index(t).ok_or(VerifyError::TimeNotRecorded(t))?;
    if ens.n_paths < MIN_PATHS {
        return Err(VerifyError::TooFewPaths {
            need: MIN_PATHS,
            got: ens.n_paths,
        });
    }
    let g = &ens.grid;
    let len = g.len();
    let p = ens.n_paths;
    let data = ens.at(k);
    let mut mean = vec![0.0; len];
    for row in data.chunks_exact(len) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= p as f64);
    // a column with a single value has that value as its exact mean
    for (i, m) in mean.iter_mut().enumerate() {
        let first = data[i];
        if data.chunks_exact(len).all(|row| row[i] == first) {
            *m = first;
        }
    }
    let correction = p as f64 / (p as f64 - 1.0);

    let mut empirical = Vec::with_capacity(lags.len());
    let mut mc_sigma = Vec::with_capacity(lags.len());
    for &lag in lags {
        let shift = (lag / g.dx()).round() as isize;
        let partner: Vec<usize> = (0..len).map(|i| g.shift_index(i, 0, shift)).collect();
        let per_path: Vec<f64> = data
            .chunks_exact(len)
            .map(|row| {
                (0..len)
                    .map(|i| (row[i] - mean[i]) * (row[partner[i]] - mean[partner[i]]))
                    .sum::<f64>()
                    / len as f64
                    * correction
            })
            .collect();
        let (m, sd) = mean_sd(&per_path);
        empirical.push(m);
        mc_sigma.push(sd / (p as f64).sqrt());
    }
    let analytic: Option<Vec<f64>> = analytic.map(|f| lags.iter().map(|&l| f(l)).collect());
    let max_z = analytic.as_ref().map(|a| {
        a.iter()
            .zip(&empirical)
            .zip(&mc_sigma)
            .map(|((a, e), s)| z_score(e - a, *s))
            .fold(0.0, f64::max)
    });
    let degenerate = mc_sigma.iter().all(|&s| s == 0.0);
    Ok(CovarianceReport {
        time: ens.times[k],
        lags: lags.to_vec(),
        empirical,
        analytic,
        mc_sigma,
        max_z,
        degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Time,
    Space,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub direction: Direction,
    pub q: f64,
    pub eta_hat: f64,
    pub fit_r2: f64,
    pub scales_used: Vec<f64>,
    /// `eta_hat < 0.95`; smooth directions saturate near 1.
    pub rough: bool,
}

/// Dyadic separations, in mesh or record units.
pub const HOLDER_SCALES: [usize; 4] = [1, 2, 4, 8];

/// Variogram estimate: least-squares slope of `log E|Δ_h Y|^q` against
/// `log h` over `h ∈ {1, 2, 4, 8}` record spacings (Time, all recorded
/// pairs) or mesh steps along axis 0 (Space, final recorded time), divided
/// by `q`.
pub fn holder_exponent(ens: &Ensemble, direction: Direction, q: f64) -> Result<ExponentEstimate, VerifyError> {
    if q != 2.0 && q != 4.0 {
        return Err(VerifyError::BadOrder {
            allowed: &[2.0, 4.0],
            got: q,
        });
    }
    if ens.n_paths == 0 {
        return Err(VerifyError::Empty);
    }
    let len = ens.grid.len();
    let max_scale = *HOLDER_SCALES.last().unwrap();
    let (unit, moments): (f64, Vec<f64>) = match direction {
        Direction::Time => {
            let nt = ens.times.len();
            if nt < max_scale + 1 {
                return Err(VerifyError::InsufficientScales {
                    what: "recorded times",
                    need: max_scale + 1,
                    got: nt,
                });
            }
            let spacing = ens.times[1] - ens.times[0];
            if ens
                .times
                .windows(2)
                .any(|w| ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing)
            {
                return Err(VerifyError::UnevenTimes);
            }
            let m = HOLDER_SCALES
                .iter()
                .map(|&h| {
                    let mut acc = 0.0;
                    let mut count = 0usize;
                    for k in 0..nt - h {
                        for (a, b) in ens.at(k + h).iter().zip(ens.at(k)) {
                            acc += (a - b).abs().powf(q);
                        }
                        count += ens.at(k).len();
                    }
                    acc / count as f64
                })
                .collect();
            (spacing, m)
        }
        Direction::Space => {
            let g = &ens.grid;
            if g.n() < 2 * max_scale {
                return Err(VerifyError::InsufficientScales {
                    what: "mesh points per axis",
                    need: 2 * max_scale,
                    got: g.n(),
                });
            }
            let data = ens.at(ens.times.len() - 1);
            let m = HOLDER_SCALES
                .iter()
                .map(|&h| {
                    let mut acc = 0.0;
                    for row in data.chunks_exact(len) {
                        for i in 0..len {
                            acc += (row[g.shift_index(i, 0, h as isize)] - row[i]).abs().powf(q);
                        }
                    }
                    acc / data.len() as f64
                })
                .collect();
            (g.dx(), m)
        }
    };
    let scales: Vec<f64> = HOLDER_SCALES.iter().map(|&h| h as f64 * unit).collect();
    let (slope, r2) = if moments.iter().all(|&m| m > 0.0) {
        let xs: Vec<f64> = scales.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
        linear_fit(&xs, &ys)
    } else {
        // a constant direction has no roughness to measure
        (f64::INFINITY, 1.0)
    };
    let eta_hat = slope / q;
    Ok(ExponentEstimate {
        direction,
        q,
        eta_hat,
        fit_r2: r2,
        scales_used: scales,
        rough: eta_hat < 0.95,
    })
}

/// Least-squares slope and `R²` of `y` on `x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    /// `sup_{t, x} mean_paths |Y(t,x)|^p`.
    pub value: f64,
    /// Standard error of the mean at the maximizing `(t, x)`.
    pub mc_sigma: f64,
    pub argmax_time: f64,
    /// `sup_x` of the moment at the recorded time nearest `T/2`, and at `T`.
    pub at_half: f64,
    pub at_end: f64,
    /// No growth beyond 2x between `T/2` and `T`.
    pub finite: bool,
}

pub fn moment_supremum(ens: &Ensemble, p: f64) -> Result<MomentReport, VerifyError> {
    if ![2.0, 4.0, 8.0].contains(&p) {
        return Err(VerifyError::BadOrder {
            allowed: &[2.0, 4.0, 8.0],
            got: p,
        });
    }
    if ens.n_paths == 0 || ens.times.is_empty() {
        return Err(VerifyError::Empty);
    }
    if ens.n_paths < MIN_PATHS {
        return Err(VerifyError::TooFewPaths {
            need: MIN_PATHS,
            got: ens.n_paths,
        });
    }
    let len = ens.grid.len();
    let paths = ens.n_paths as f64;
    // per time: (sup_x moment, argmax x)
    let per_time: Vec<(f64, usize)> = (0..ens.times.len())
        .map(|k| {
            let mut acc = vec![0.0; len];
            for row in ens.at(k).chunks_exact(len) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v.abs().powf(p);
                }
            }
            acc.iter().enumerate().fold((f64::NEG_INFINITY, 0), |best, (i, &a)| {
                if a / paths > best.0 {
                    (a / paths, i)
                } else {
                    best
                }
            })
        })
        .collect();
    let (kmax, &(value, imax)) =
        per_time.iter().enumerate().fold(
            (0, &per_time[0]),
            |best, (k, v)| if v.0 > best.1 .0 { (k, v) } else { best },
        );
    let samples: Vec<f64> = ens
        .at(kmax)
        .chunks_exact(len)
        .map(|row| row[imax].abs().powf(p))
        .collect();
    let (_, sd) = mean_sd(&samples);
    let t_end = *ens.times.last().unwrap();
    let half = ens
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_end / 2.0).abs().total_cmp(&(b.1 - t_end / 2.0).abs()))
        .map(|(k, _)| k)
        .unwrap();
    let at_half = per_time[half].0;
    let at_end = per_time.last().unwrap().0;
    Ok(MomentReport {
        p,
        value,
        mc_sigma: sd / paths.sqrt(),
        argmax_time: ens.times[kmax],
        at_half,
        at_end,
        finite: value.is_finite() && at_end <= 2.0 * at_half,
    })
}

/// `sup_{t, x} |A - B|` over the common recorded times.
pub fn pathwise_compare(a: &Trajectory, b: &Trajectory) -> Result<f64, VerifyError> {
    if a.times.len() != b.times.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(s, t)| (s - t).abs() > 1e-12 * t.abs().max(1.0))
    {
        return Err(VerifyError::Mismatch("recorded times"));
    }
    let mut worst = 0.0_f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        if x.grid() != y.grid() {
            return Err(VerifyError::Mismatch("grids"));
        }
        for (u, v) in x.values().iter().zip(y.values()) {
            worst = worst.max((u - v).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardRateReport {
    pub pass: bool,
    /// `H_n` non-increasing for `n ≥ 2`.
    pub monotone: bool,
    /// No upward trend in `log(n H_n / H_{n-1})`.
    pub factorial: bool,
    /// Fitted `ξ` in `H_n ≈ A (ξ T)^n / n!`.
    pub xi: f64,
    /// `max_n (log H_n + log n! - n log(ξ T)) - min_n (...)` over positive
    /// entries.
    pub envelope_spread: f64,
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Factorial-envelope check on `H_0, H_1, ...`. The sequence passes when it
/// is non-increasing from `n = 2` and the ratios `n H_n / H_{n-1}` show no
/// upward trend: the mean of `log(n H_n / H_{n-1})` over the second half is
/// at most `log 2` above the first half. A geometric or constant sequence
/// makes these terms grow like `log n` and fails. Entries that are exactly
/// zero count as converged.
pub fn picard_rate_check(h: &[f64], t_end: f64) -> Result<PicardRateReport, VerifyError> {
    if h.len() < 5 {
        return Err(VerifyError::TooFewIterates(h.len()));
    }
    let monotone = h.windows(2).skip(2).all(|w| w[1] <= w[0]);

    let d: Vec<f64> = (1..h.len())
        .filter(|&n| h[n] > 0.0 && h[n - 1] > 0.0)
        .map(|n| (n as f64 * h[n] / h[n - 1]).ln())
        .collect();
    let factorial = if d.len() < 2 {
        // at most one non-trivial ratio: converged outright
        h.iter().skip(1).any(|&v| v == 0.0)
    } else {
        let mid = d.len() / 2;
        let first = d[..mid].iter().sum::<f64>() / mid as f64;
        let second = d[mid..].iter().sum::<f64>() / (d.len() - mid) as f64;
        second <= first + std::f64::consts::LN_2
    };

    let pts: Vec<(f64, f64)> = (0..h.len())
        .filter(|&n| h[n] > 0.0)
        .map(|n| (n as f64, h[n].ln() + ln_factorial(n)))
        .collect();
    let (xi, envelope_spread) = if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let (slope, _) = linear_fit(&xs, &ys);
        let resid: Vec<f64> = pts.iter().map(|(n, y)| y - n * slope).collect();
        let hi = resid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = resid.iter().copied().fold(f64::INFINITY, f64::min);
        (slope.exp() / t_end, hi - lo)
    } else {
        (0.0, 0.0)
    };
    Ok(PicardRateReport {
        pass: monotone && factorial,
        monotone,
        factorial,
        xi,
        envelope_spread,
    })
}

/// [`picard_rate_check`] on a diagnostics record.
pub fn picard_rate_check_diag(diag: &PicardDiagnostics) -> Result<PicardRateReport, VerifyError> {
    picard_rate_check(&diag.h, diag.t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_ensemble, Diffusion, Gain, ModelSpec, Scheme, SolverConfig};
    use crate::grid::Grid;
    use crate::kernels::{KernelModel, KernelSpec};
    use crate::noise::{NoiseSpec, PhiSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn line(l: f64, n: usize) -> Grid {
        Grid::line(l, n).unwrap()
    }

    fn ou_model(g: Grid) -> ModelSpec {
        ModelSpec::new(
            KernelModel::zero(g),
            Gain::Constant(0.0),
            Diffusion::Constant(1.0),
            Field::zeros(g),
        )
        .unwrap()
    }

    #[test]
    fn ou_covariance_examples() {
        let g = line(4.0, 128);
        let phi = PhiSpec::Indicator { width: 1.0 }.sample(g).unwrap();
        let c0 = analytic_covariance(&phi).get(g.origin_index());
        assert_eq!(ou_covariance(&phi, 0.0, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(ou_covariance(&phi, 1e3, 0.0).unwrap(), c0 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            ou_covariance(&phi, 1.0, 0.0).unwrap(),
            c0 * 0.432_332_358_4,
            epsilon = 1e-9
        );
        // c0 = ‖φ‖² on the mesh: 17 nodes of width 1/16
        assert_abs_diff_eq!(c0, 17.0 / 16.0, epsilon = 1e-12);
        assert!(ou_covariance(&phi, -1.0, 0.0).is_err());
        // monotone in t, even in lag
        let mut last = -1.0;
        for k in 0..20 {
            let v = ou_covariance(&phi, k as f64 * 0.2, 0.25).unwrap();
            assert!(v > last);
            last = v;
            assert_eq!(v, ou_covariance(&phi, k as f64 * 0.2, -0.25).unwrap());
        }
    }

    #[test]
    fn covariance_of_deterministic_ensemble_is_degenerate() {
        let g = line(4.0, 32);
        let m = ModelSpec::new(
            KernelModel::zero(g),
            Gain::Constant(0.0),
            Diffusion::Constant(0.0),
            Field::from_fn(g, |x| x[0]),
        )
        .unwrap();
        let noise = NoiseSpec::smoothed_white(Field::delta(g), 0).unwrap();
        let c = SolverConfig::new(0.1, 1.0, Scheme::ExponentialEuler, 10, 120).unwrap();
        let e = run_ensemble(&m, &c, &noise).unwrap();
        let r = empirical_covariance(&e, 1.0, &[0.0, 0.5], Some(&|_| 0.0)).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.empirical, vec![0.0, 0.0]);
        assert_eq!(r.max_z, Some(0.0));
        assert!(matches!(
            empirical_covariance(&e, 0.5, &[0.0], None),
            Err(VerifyError::TimeNotRecorded(_))
        ));
    }

    #[test]
    fn linear_covariance_lag_zero_is_second_moment_and_reproducible() {
        let g = line(4.0, 64);
        let phi = PhiSpec::Indicator { width: 1.0 }.sample(g).unwrap();
        let m = ou_model(g);
        let c = SolverConfig::new(0.05, 1.0, Scheme::ExponentialEuler, 20, 400).unwrap();
        let a = run_ensemble(&m, &c, &NoiseSpec::smoothed_white(phi.clone(), 1).unwrap()).unwrap();
        let b = run_ensemble(&m, &c, &NoiseSpec::smoothed_white(phi.clone(), 2).unwrap()).unwrap();
        let oracle = |lag: f64| ou_covariance(&phi, 1.0, lag).unwrap();
        let ra = empirical_covariance(&a, 1.0, &[0.0, 0.5, 1.0], Some(&oracle)).unwrap();
        let rb = empirical_covariance(&b, 1.0, &[0.0, 0.5, 1.0], None).unwrap();
        assert!(ra.max_z.unwrap() < 4.0, "{ra:?}");
        for i in 0..3 {
            let s = (ra.mc_sigma[i].powi(2) + rb.mc_sigma[i].powi(2)).sqrt();
            assert!((ra.empirical[i] - rb.empirical[i]).abs() < 4.0 * s);
        }
        // lag 0 equals the centered second moment, pooled over x
        let k = a.time_index(1.0).unwrap();
        let len = g.len();
        let p = a.n_paths as f64;
        let mut total = 0.0;
        for i in 0..len {
            let col: Vec<f64> = (0..a.n_paths).map(|q| a.at(k)[q * len + i]).collect();
            let mu = col.iter().sum::<f64>() / p;
            total += col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (p - 1.0);
        }
        assert_abs_diff_eq!(ra.empirical[0], total / len as f64, epsilon = 1e-12);
    }

    #[test]
    fn holder_smooth_deterministic_path() {
        let g = line(4.0, 32);
        let k = KernelSpec::gaussian(1.0, 1.0).build(g).unwrap();
        let m = ModelSpec::new(
            k,
            Gain::Sigmoid { slope: 1.0 },
            Diffusion::Constant(0.0),
            Field::from_fn(g, |x| (-x[0] * x[0]).exp()),
        )
        .unwrap();
        let c = SolverConfig::new(0.01, 0.5, Scheme::ExponentialEuler, 1, 1).unwrap();
        let e = run_ensemble(&m, &c, &NoiseSpec::smoothed_white(Field::delta(g), 0).unwrap()).unwrap();
        let est = holder_exponent(&e, Direction::Time, 2.0).unwrap();
        assert!(est.eta_hat >= 0.95 && !est.rough, "{est:?}");
        assert!(holder_exponent(&e, Direction::Time, 3.0).is_err());
    }

    #[test]
    fn holder_time_exponent_stable_under_dt_halving() {
        let g = line(4.0, 32);
        let phi = PhiSpec::Gaussian { scale: 0.5 }.sample(g).unwrap();
        let noise = NoiseSpec::smoothed_white(phi, 3).unwrap();
        let est = |dt: f64| {
            let c = SolverConfig::new(dt, 0.5, Scheme::ExponentialEuler, 1, 200).unwrap();
            let e = run_ensemble(&ou_model(g), &c, &noise).unwrap();
            holder_exponent(&e, Direction::Time, 2.0).unwrap()
        };
        let (a, b) = (est(0.01), est(0.005));
        assert!((a.eta_hat - 0.5).abs() < 0.06, "{a:?}");
        assert!((a.eta_hat - b.eta_hat).abs() < 0.05, "{a:?} {b:?}");
        assert!(a.rough && a.fit_r2 > 0.99);
    }

    #[test]
    fn moment_supremum_cases() {
        let g = line(4.0, 32);
        let zero = ModelSpec::new(
            KernelModel::zero(g),
            Gain::Constant(0.0),
            Diffusion::Constant(0.0),
            Field::zeros(g),
        )
        .unwrap();
        let c = SolverConfig::new(0.1, 2.0, Scheme::ExponentialEuler, 5, 100).unwrap();
        let noise = NoiseSpec::smoothed_white(Field::delta(g), 0).unwrap();
        let e = run_ensemble(&zero, &c, &noise).unwrap();
        let r = moment_supremum(&e, 2.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.finite);
        assert!(moment_supremum(&e, 3.0).is_err());

        // E|Y|^4 ≥ (E|Y|^2)^2 on a linear run
        let phi = PhiSpec::Gaussian { scale: 1.0 }.sample(g).unwrap();
        let e = run_ensemble(&ou_model(g), &c, &NoiseSpec::smoothed_white(phi, 1).unwrap()).unwrap();
        let m2 = moment_supremum(&e, 2.0).unwrap();
        let m4 = moment_supremum(&e, 4.0).unwrap();
        assert!(m4.value >= m2.value * m2.value);
        assert!(m2.finite);
    }

    #[test]
    fn picard_rate_examples() {
        assert!(picard_rate_check(&[1.0, 0.1, 0.005, 1e-4, 1e-6], 1.0).unwrap().pass);
        let flat = picard_rate_check(&[1.0; 6], 1.0).unwrap();
        assert!(!flat.pass && flat.monotone && !flat.factorial);
        assert!(!picard_rate_check(&[1.0, 0.5, 0.6, 0.7, 0.8], 1.0).unwrap().pass);
        assert!(picard_rate_check(&[1.0, 0.5, 0.0, 0.0, 0.0], 1.0).unwrap().pass);
        assert!(matches!(
            picard_rate_check(&[1.0; 4], 1.0),
            Err(VerifyError::TooFewIterates(4))
        ));
        // exact factorial sequence recovers ξ
        let h: Vec<f64> = (0..9).map(|n| 0.3f64.powi(n as i32) / ln_factorial(n).exp()).collect();
        let r = picard_rate_check(&h, 1.0).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.xi, 0.3, epsilon = 1e-9);
        assert!(r.envelope_spread < 1e-9);
    }

    fn traj(vals: &[f64]) -> Trajectory {
        let g = line(1.0, 4);
        Trajectory {
            times: vec![0.0, 1.0],
            states: vec![Field::zeros(g), Field::new(g, vals.to_vec()).unwrap()],
            seed: 0,
            path_index: 0,
        }
    }

    #[test]
    fn pathwise_compare_mismatch() {
        let a = traj(&[0.0; 4]);
        let mut b = a.clone();
        b.times[1] = 2.0;
        assert!(pathwise_compare(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn pathwise_compare_is_a_pseudometric(
            a in prop::collection::vec(-5.0..5.0f64, 4),
            b in prop::collection::vec(-5.0..5.0f64, 4),
            c in prop::collection::vec(-5.0..5.0f64, 4),
        ) {
            let (ta, tb, tc) = (traj(&a), traj(&b), traj(&c));
            prop_assert_eq!(pathwise_compare(&ta, &ta).unwrap(), 0.0);
            prop_assert_eq!(pathwise_compare(&ta, &tb).unwrap(), pathwise_compare(&tb, &ta).unwrap());
            let ab = pathwise_compare(&ta, &tb).unwrap();
            let bc = pathwise_compare(&tb, &tc).unwrap();
            let ac = pathwise_compare(&ta, &tc).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
