//! Late-window analysis of observer series: decay exponents, tail and
//! attractor fits, approach rates, ε-scaling and the rescaled remainder.

pub mod lsq;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    attractor_denominator, attractor_eval, basis, scaling_params, wk_eval, AttractorParams,
    ILL_CONDITIONED,
};
use crate::error::{Error, Result};
use crate::solver::TimeSeries;

pub const DEFAULT_WINDOW_FACTOR: f64 = 5.0;
pub const MIN_WINDOW_SAMPLES: usize = 50;
/// Log-uniform resampling density of the local-exponent estimator.
const LOG_SAMPLES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Window {
    pub fn new(t_lo: f64, t_hi: f64) -> Result<Self> {
        if !(t_lo > 0.0 && t_hi > t_lo) {
            return Err(Error::Domain(format!("bad window [{t_lo}, {t_hi}]")));
        }
        Ok(Window { t_lo, t_hi })
    }

    /// Late window `[factor (R + r_obs), t_final]`; `factor >= 3`.
    pub fn late(support: f64, r_obs: f64, factor: f64, t_final: f64) -> Result<Self> {
        if factor < 3.0 {
            return Err(Error::Config(format!(
                "window factor must be >= 3, got {factor}"
            )));
        }
        Window::new(factor * (support + r_obs), t_final)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_lo && t <= self.t_hi
    }

    /// Index range of samples inside the window (series times ascending).
    pub fn indices(&self, series: &TimeSeries) -> Result<std::ops::Range<usize>> {
        let start = series.t.partition_point(|t| *t < self.t_lo);
        let end = series.t.partition_point(|t| *t <= self.t_hi);
        let samples = end.saturating_sub(start);
        if samples < MIN_WINDOW_SAMPLES {
            return Err(Error::Window {
                t_lo: self.t_lo,
                t_hi: self.t_hi,
                samples,
                needed: MIN_WINDOW_SAMPLES,
            });
        }
        Ok(start..end)
    }
}

/// `σ(t) = d ln|u| / d ln t` on a log-uniform grid plus its plateau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExponent {
    pub t: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Median of `σ` over the last third of the window (in `ln t`).
    pub plateau: f64,
    pub window: Window,
}

/// Four-point Lagrange interpolation of a series at `t` (times ascending).
fn interpolate(t_nodes: &[f64], values: &[f64], t: f64) -> f64 {
    let n = t_nodes.len();
    let k = t_nodes.partition_point(|x| *x < t).clamp(2, n - 2);
    let lo = k - 2;
    let mut sum = 0.0;
    for a in lo..lo + 4 {
        let mut w = 1.0;
        for b in lo..lo + 4 {
            if a != b {
                w *= (t - t_nodes[b]) / (t_nodes[a] - t_nodes[b]);
            }
        }
        sum += w * values[a];
    }
    sum
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn local_exponent(series: &TimeSeries, window: Window) -> Result<LocalExponent> {
    let range = window.indices(series)?;
    let t = &series.t[range.clone()];
    let u = &series.u[range];
    let sign = u[0].signum();
    if let Some(i) = u.iter().position(|x| x.signum() != sign || *x == 0.0) {
        return Err(Error::SignChange {
            t_lo: window.t_lo,
            t_hi: window.t_hi,
            at: t[i],
        });
    }
    // padded so that interpolation near the window edges stays centered
    let full_t = &series.t;
    let lo = (t[0]).ln();
    let hi = (t[t.len() - 1]).ln();
    let grid: Vec<f64> = (0..LOG_SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / (LOG_SAMPLES - 1) as f64)
        .collect();
    let log_u: Vec<f64> = grid
        .iter()
        .map(|l| interpolate(full_t, &series.u, l.exp()).abs().ln())
        .collect();
    let mut times = Vec::with_capacity(LOG_SAMPLES - 2);
    let mut sigma = Vec::with_capacity(LOG_SAMPLES - 2);
    for i in 1..LOG_SAMPLES - 1 {
        times.push(grid[i].exp());
        sigma.push((log_u[i + 1] - log_u[i - 1]) / (grid[i + 1] - grid[i - 1]));
    }
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::Degenerate("non-finite local exponent".into()));
    }
    let tail_start = sigma.len() - sigma.len() / 3;
    let plateau = median(&mut sigma[tail_start..].to_vec());
    Ok(LocalExponent {
        t: times,
        sigma,
        plateau,
        window,
    })
}

/// Row weighting of least-squares fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Rows scaled by the inverse of the leading basis function, so every
    /// sample counts by its relative misfit.
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub kind: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norm relative to the norm of the fitted data.
    pub relative_residual: f64,
    pub window: Window,
    pub samples: usize,
    pub condition: f64,
    pub ill_conditioned: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl FitReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

fn row_weight(weighting: Weighting, p: u32, t: f64, r: f64) -> f64 {
    match weighting {
        Weighting::Uniform => 1.0,
        Weighting::Relative => 1.0 / basis(p - 2, t, r),
    }
}

/// Linear least squares of the series in the tail basis
/// `basis_{p+k-2}(t, r)`, `k = 0..=n`, `n <= 2`.
pub fn fit_tail(
    series: &TimeSeries,
    p: u32,
    n: u32,
    window: Window,
    weighting: Weighting,
) -> Result<FitReport> {
    if n > 2 {
        return Err(Error::Config(format!(
            "tail fit uses at most 3 terms, got n = {n}"
        )));
    }
    let range = window.indices(series)?;
    let cols = n as usize + 1;
    let rows = range.len();
    let r = series.r;
    if series.t[range.start] <= r {
        return Err(Error::Domain(
            "tail fit window reaches the light cone".into(),
        ));
    }
    let mut design = DMatrix::zeros(rows, cols);
    let mut rhs = DVector::zeros(rows);
    for (row, i) in range.enumerate() {
        let t = series.t[i];
        let w = row_weight(weighting, p, t, r);
        for k in 0..cols {
            design[(row, k)] = w * basis(p + k as u32 - 2, t, r);
        }
        rhs[row] = w * series.u[i];
    }
    let solution = lsq::solve(&design, &rhs)?;
    let data_norm = rhs.norm();
    Ok(FitReport {
        kind: "tail".into(),
        names: (0..cols).map(|k| format!("A{k}")).collect(),
        values: solution.coefficients.iter().copied().collect(),
        residual_norm: solution.residual_norm,
        relative_residual: if data_norm > 0.0 {
            solution.residual_norm / data_norm
        } else {
            0.0
        },
        window,
        samples: rows,
        condition: solution.condition,
        ill_conditioned: solution.condition > ILL_CONDITIONED,
        iterations: 1,
        converged: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorFitOptions {
    pub weighting: Weighting,
    /// Also fit a linear amplitude on `(3t²+r²)/X³`, the first term the
    /// attractor cannot absorb, so it does not bias `(a, b)`.
    pub subleading: bool,
    pub max_iterations: usize,
    pub step_tol: f64,
}

impl Default for AttractorFitOptions {
    fn default() -> Self {
        AttractorFitOptions {
            weighting: Weighting::Relative,
            subleading: true,
            max_iterations: 100,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorFit {
    pub params: AttractorParams,
    /// Amplitude of the subleading term when fitted.
    pub subleading: Option<f64>,
    pub report: FitReport,
}

struct AttractorProblem<'a> {
    t: &'a [f64],
    u: &'a [f64],
    r: f64,
    weights: Vec<f64>,
    subleading: bool,
}

impl AttractorProblem<'_> {
    fn residuals(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let params = AttractorParams {
            a: theta[0],
            b: theta[1],
        };
        let mut out = DVector::zeros(self.t.len());
        for (i, (t, u)) in self.t.iter().zip(self.u).enumerate() {
            let mut model = attractor_eval(params, *t, self.r).ok()?;
            if self.subleading {
                model += theta[2] * basis(3, *t, self.r);
            }
            out[i] = self.weights[i] * (u - model);
        }
        Some(out)
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let (a, b) = (theta[0], theta[1]);
        let cols = if self.subleading { 3 } else { 2 };
        let params = AttractorParams { a, b };
        DMatrix::from_fn(self.t.len(), cols, |i, j| {
            let t = self.t[i];
            let d = attractor_denominator(params, t, self.r);
            let s = t + a;
            let g = -std::f64::consts::SQRT_2 / (d * d);
            let w = self.weights[i];
            match j {
                0 => w * g * (1.0 + 2.0 * b * s),
                1 => w * g * (s * s - self.r * self.r),
                _ => w * basis(3, t, self.r),
            }
        })
    }
}

/// Gauss–Newton fit of `(a, b)` with step halving.
pub fn fit_attractor(
    series: &TimeSeries,
    window: Window,
    init: AttractorParams,
    options: AttractorFitOptions,
) -> Result<AttractorFit> {
    if init.b == 0.0 || !init.b.is_finite() {
        return Err(Error::NonGenericData(0.0));
    }
    let range = window.indices(series)?;
    let t = &series.t[range.clone()];
    let u = &series.u[range];
    let r = series.r;
    let weights: Vec<f64> = t
        .iter()
        .map(|t| row_weight(options.weighting, 3, *t, r))
        .collect();
    let problem = AttractorProblem {
        t,
        u,
        r,
        weights,
        subleading: options.subleading,
    };

    let mut theta = vec![init.a, init.b];
    if options.subleading {
        theta.push(0.0);
    }
    let mut resid = problem.residuals(&theta).ok_or_else(|| {
        Error::Domain(format!(
            "initial attractor ({}, {}) is singular inside the window",
            init.a, init.b
        ))
    })?;
    let mut ssr = resid.norm_squared();
    let mut condition = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let jac = problem.jacobian(&theta);
        let step = lsq::solve(&jac, &resid)?;
        condition = step.condition;
        let delta = step.coefficients;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(delta.iter())
                .map(|(x, d)| x + scale * d)
                .collect();
            if let Some(res) = problem.residuals(&trial) {
                let trial_ssr = res.norm_squared();
                if trial_ssr <= ssr {
                    accepted = Some((trial, res, trial_ssr));
                    break;
                }
            }
            scale *= 0.5;
        }
        let small_step = |scale: f64| {
            theta
                .iter()
                .zip(delta.iter())
                .all(|(x, d)| (scale * d).abs() <= options.step_tol * x.abs().max(1e-300))
        };
        match accepted {
            Some((trial, res, trial_ssr)) => {
                let done = small_step(scale);
                theta = trial;
                resid = res;
                ssr = trial_ssr;
                if done {
                    converged = true;
                    break;
                }
            }
            None => {
                // no descent at roundoff level: stationary if the step explains
                // nothing of the residual
                let explained = (&jac * &delta).norm();
                converged = small_step(1.0) || explained <= 1e-7 * resid.norm();
                break;
            }
        }
    }

    let data_norm = problem
        .u
        .iter()
        .zip(&problem.weights)
        .map(|(u, w)| (u * w).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut names = vec!["a".to_string(), "b".to_string()];
    if options.subleading {
        names.push("c".into());
    }
    let params = AttractorParams {
        a: theta[0],
        b: theta[1],
    };
    Ok(AttractorFit {
        params,
        subleading: options.subleading.then(|| theta[2]),
        report: FitReport {
            kind: "attractor".into(),
            names,
            values: theta.clone(),
            residual_norm: ssr.sqrt(),
            relative_residual: if data_norm > 0.0 {
                ssr.sqrt() / data_norm
            } else {
                0.0
            },
            window,
            samples: t.len(),
            condition,
            ill_conditioned: condition > ILL_CONDITIONED,
            iterations,
            converged,
        },
    })
}

/// Local exponent of `|u - u_{a,b}|`.
pub fn approach_rate(
    series: &TimeSeries,
    params: AttractorParams,
    window: Window,
) -> Result<LocalExponent> {
    let range = window.indices(series)?;
    let mut diff = series.clone();
    let mut max_u: f64 = 0.0;
    let mut max_d: f64 = 0.0;
    for i in 0..series.len() {
        let t = series.t[i];
        let d = match attractor_eval(params, t, series.r) {
            Ok(att) => series.u[i] - att,
            Err(_) if !range.contains(&i) => f64::NAN,
            Err(e) => return Err(e),
        };
        diff.u[i] = d;
        if range.contains(&i) {
            max_u = max_u.max(series.u[i].abs());
            max_d = max_d.max(d.abs());
        }
    }
    if max_d <= 1e-12 * max_u {
        return Err(Error::Degenerate(format!(
            "|u - attractor| <= {max_d:e} is below the noise floor of |u| ~ {max_u:e}"
        )));
    }
    // samples outside the window only feed edge interpolation
    for x in diff.u.iter_mut().filter(|x| x.is_nan()) {
        *x = 0.0;
    }
    local_exponent(&diff, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonScaling {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub amplitude_lo: f64,
    pub amplitude_hi: f64,
    pub ratio: f64,
    /// `ln(ratio) / ln(eps_hi / eps_lo)`.
    pub power: f64,
    pub below_noise_floor: bool,
}

fn rms(series: &TimeSeries, window: Window) -> Result<f64> {
    let range = window.indices(series)?;
    let n = range.len() as f64;
    Ok((series.u[range].iter().map(|u| u * u).sum::<f64>() / n).sqrt())
}

fn scaling_from(eps_lo: f64, eps_hi: f64, lo: f64, hi: f64, floor: f64) -> Result<EpsilonScaling> {
    if !(eps_hi > eps_lo && eps_lo > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon scaling needs 0 < eps_lo < eps_hi, got {eps_lo}, {eps_hi}"
        )));
    }
    let ratio = hi / lo;
    Ok(EpsilonScaling {
        eps_lo,
        eps_hi,
        amplitude_lo: lo,
        amplitude_hi: hi,
        ratio,
        power: ratio.abs().ln() / (eps_hi / eps_lo).ln(),
        below_noise_floor: lo.abs() <= floor || hi.abs() <= floor,
    })
}

/// Measured ε-power from the late-window RMS of two series
/// (typically `u - εu0` at `ε` and `2ε`).
pub fn epsilon_scaling(
    lo: &TimeSeries,
    hi: &TimeSeries,
    eps_lo: f64,
    eps_hi: f64,
    window: Window,
    noise_floor: f64,
) -> Result<EpsilonScaling> {
    scaling_from(
        eps_lo,
        eps_hi,
        rms(lo, window)?,
        rms(hi, window)?,
        noise_floor,
    )
}

/// Measured ε-power from two fitted coefficients.
pub fn epsilon_scaling_from_coefficients(
    c_lo: f64,
    c_hi: f64,
    eps_lo: f64,
    eps_hi: f64,
    noise_floor: f64,
) -> Result<EpsilonScaling> {
    scaling_from(eps_lo, eps_hi, c_lo, c_hi, noise_floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverRemainder {
    pub r: f64,
    pub samples: usize,
    /// `max |W_ε - Σ ε^{ka} W^(k)|` over the valid region.
    pub max_abs: f64,
    /// Same, weighted by `<T+R><T-R>^{p-2}`.
    pub max_weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub epsilon: f64,
    pub p: u32,
    pub a_scale: f64,
    pub b_scale: f64,
    pub lambda0: f64,
    pub n: u32,
    pub observers: Vec<ObserverRemainder>,
    pub max_abs: f64,
    pub max_weighted: f64,
    pub notices: Vec<String>,
}

fn bracket_weight(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Rescales `w = u - εu0` into `W_ε(T, R) = ε^{-b} w(ε^{-a}T, ε^{-a}R)` and
/// compares it with `Σ_{k<=n} ε^{ka} W^(k)(T, R)` on `T - R > 1`.
pub fn scaled_remainder(
    remainders: &[TimeSeries],
    epsilon: f64,
    p: u32,
    a_scale: f64,
    b_coefficients: &[f64],
    n: u32,
) -> Result<RemainderReport> {
    let scaling = scaling_params(p, a_scale);
    if !scaling.valid {
        return Err(Error::Config(format!(
            "a_scale = {a_scale} outside the admissible range {:?}",
            scaling.a_scale_range
        )));
    }
    if b_coefficients.len() <= n as usize {
        return Err(Error::Config(format!(
            "need B_(p,k) for k = 0..={n}, got {} values",
            b_coefficients.len()
        )));
    }
    let squeeze = epsilon.powf(a_scale);
    let amplify = epsilon.powf(-scaling.b_scale);
    let mut observers = Vec::new();
    let mut notices = Vec::new();
    for series in remainders {
        let rs = squeeze * series.r;
        let mut samples = 0;
        let mut max_abs: f64 = 0.0;
        let mut max_weighted: f64 = 0.0;
        for (t, w) in series.t.iter().zip(&series.u) {
            let ts = squeeze * t;
            if ts - rs <= 1.0 {
                continue;
            }
            let mut model = 0.0;
            for k in 0..=n {
                model +=
                    squeeze.powi(k as i32) * wk_eval(p, k, b_coefficients[k as usize], ts, rs)?;
            }
            let dev = (amplify * w - model).abs();
            samples += 1;
            max_abs = max_abs.max(dev);
            max_weighted = max_weighted
                .max(dev * bracket_weight(ts + rs) * bracket_weight(ts - rs).powi(p as i32 - 2));
        }
        if samples == 0 {
            notices.push(format!(
                "observer r = {} has no samples with eps^a (t - r) > 1; excluded",
                series.r
            ));
            continue;
        }
        observers.push(ObserverRemainder {
            r: series.r,
            samples,
            max_abs,
            max_weighted,
        });
    }
    if observers.is_empty() {
        return Err(Error::Domain(
            "no observer reaches the scaled validity region".into(),
        ));
    }
    Ok(RemainderReport {
        epsilon,
        p,
        a_scale,
        b_scale: scaling.b_scale,
        lambda0: scaling.lambda0,
        n,
        max_abs: observers.iter().map(|o| o.max_abs).fold(0.0, f64::max),
        max_weighted: observers.iter().map(|o| o.max_weighted).fold(0.0, f64::max),
        observers,
        notices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{tail_eval, TailExpansion};

    fn sampled(r: f64, t0: f64, t1: f64, n: usize, f: impl Fn(f64) -> f64) -> TimeSeries {
        let t: Vec<f64> = (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect();
        let u = t.iter().map(|t| f(*t)).collect();
        TimeSeries { r, t, u }
    }

    #[test]
    fn exponent_of_pure_powers() {
        for sigma in [-1.0, -2.0, -3.0, -4.0] {
            let s = sampled(0.0, 1.0, 200.0, 4000, |t| 3.0 * t.powf(sigma));
            let e = local_exponent(&s, Window::new(10.0, 200.0).unwrap()).unwrap();
            assert!((e.plateau - sigma).abs() < 1e-3, "{sigma}: {}", e.plateau);
        }
    }

    #[test]
    fn exponent_of_tail_terms() {
        let w = Window::new(20.0, 100.0).unwrap();
        let s = sampled(1.0, 2.0, 100.0, 5000, |t| 1.0 / (t * t - 1.0));
        assert!((local_exponent(&s, w).unwrap().plateau + 2.0).abs() < 0.01);
        let s = sampled(1.0, 2.0, 100.0, 5000, |t| -0.3 * t / (t * t - 1.0).powi(2));
        assert!((local_exponent(&s, w).unwrap().plateau + 3.0).abs() < 0.02);
    }

    #[test]
    fn sign_change_and_short_window() {
        let s = sampled(0.0, 1.0, 100.0, 2000, |t| (t - 50.0) / t.powi(3));
        let err = local_exponent(&s, Window::new(20.0, 100.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SignChange { .. }));
        let err = local_exponent(&s, Window::new(20.0, 21.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Window { .. }));
        assert!(Window::late(1.0, 1.0, 2.0, 100.0).is_err());
    }

    #[test]
    fn tail_fit_recovers_its_own_basis() {
        for r in [0.0, 0.5, 2.0] {
            let exp = TailExpansion::from_a(3, vec![1.0, 2.0, 3.0]);
            let s = sampled(r, 3.0, 100.0, 3000, |t| tail_eval(&exp, t, r).unwrap());
            for weighting in [Weighting::Uniform, Weighting::Relative] {
                let fit = fit_tail(&s, 3, 2, Window::new(15.0, 100.0).unwrap(), weighting).unwrap();
                for (got, want) in fit.values.iter().zip([1.0, 2.0, 3.0]) {
                    assert!(
                        (got - want).abs() < 1e-9,
                        "{weighting:?} r={r}: {got} vs {want}"
                    );
                }
                assert!(!fit.ill_conditioned);
            }
        }
        let s = sampled(0.0, 3.0, 100.0, 3000, |t| 1.0 / (t * t));
        assert!(fit_tail(
            &s,
            3,
            3,
            Window::new(15.0, 100.0).unwrap(),
            Weighting::Uniform
        )
        .is_err());
    }

    #[test]
    fn tail_fit_of_attractor_gives_sqrt2_over_b() {
        let params = AttractorParams { a: 1.0, b: 1.0 };
        let s = sampled(0.0, 1e3, 1e4, 3000, |t| {
            attractor_eval(params, t, 0.0).unwrap()
        });
        let fit = fit_tail(
            &s,
            3,
            2,
            Window::new(1e3, 1e4).unwrap(),
            Weighting::Relative,
        )
        .unwrap();
        assert!((fit.values[0] - std::f64::consts::SQRT_2).abs() < 1e-6);
    }

    fn attractor_series(params: AttractorParams, r: f64, extra: f64) -> TimeSeries {
        sampled(r, 2.0, 400.0, 8000, |t| {
            attractor_eval(params, t, r).unwrap() + extra * basis(3, t, r)
        })
    }

    #[test]
    fn attractor_fit_round_trip() {
        let truth = AttractorParams { a: 0.7, b: 1.3 };
        for r in [0.0, 1.0] {
            let s = attractor_series(truth, r, 0.0);
            let init = AttractorParams { a: 0.5, b: 1.2 };
            let w = Window::new(20.0, 400.0).unwrap();
            for subleading in [false, true] {
                let options = AttractorFitOptions {
                    subleading,
                    ..Default::default()
                };
                let fit = fit_attractor(&s, w, init, options).unwrap();
                assert!(fit.report.converged);
                assert!((fit.params.a - 0.7).abs() < 1e-8, "{:?}", fit.params);
                assert!((fit.params.b - 1.3).abs() < 1e-8, "{:?}", fit.params);
            }
        }
    }

    #[test]
    fn perturbation_bias_shrinks_later() {
        let truth = AttractorParams { a: 0.7, b: 1.3 };
        let s = attractor_series(truth, 1.0, 5.0);
        let plain = AttractorFitOptions {
            subleading: false,
            ..Default::default()
        };
        let bias = |t_lo: f64| {
            let fit = fit_attractor(&s, Window::new(t_lo, 400.0).unwrap(), truth, plain).unwrap();
            (fit.params.a - truth.a).abs() + (fit.params.b - truth.b).abs()
        };
        let (early, late) = (bias(20.0), bias(100.0));
        assert!(late < 0.5 * early, "{early} -> {late}");
        let fit = fit_attractor(
            &s,
            Window::new(20.0, 400.0).unwrap(),
            truth,
            Default::default(),
        )
        .unwrap();
        assert!((fit.params.b - truth.b).abs() < 1e-7);
        assert!((fit.subleading.unwrap() - 5.0).abs() < 1e-5);
    }

    #[test]
    fn non_generic_init_rejected() {
        let s = attractor_series(AttractorParams { a: 1.0, b: 1.0 }, 0.0, 0.0);
        let err = fit_attractor(
            &s,
            Window::new(20.0, 400.0).unwrap(),
            AttractorParams { a: 1.0, b: 0.0 },
            Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonGenericData(_)));
    }

    #[test]
    fn approach_rates() {
        let params = AttractorParams { a: 1.0, b: 1.0 };
        let w = Window::new(20.0, 400.0).unwrap();
        let exact = attractor_series(params, 1.0, 0.0);
        assert!(matches!(
            approach_rate(&exact, params, w),
            Err(Error::Degenerate(_))
        ));
        let perturbed = attractor_series(params, 1.0, 1.0);
        let rate = approach_rate(&perturbed, params, w).unwrap().plateau;
        assert!((rate + 4.0).abs() < 0.01, "{rate}");
        let wrong_b = approach_rate(&perturbed, AttractorParams { a: 1.0, b: 2.0 }, w).unwrap();
        assert!((wrong_b.plateau + 2.0).abs() < 0.05, "{}", wrong_b.plateau);
        let wrong_a = approach_rate(&perturbed, AttractorParams { a: 1.5, b: 1.0 }, w).unwrap();
        assert!((wrong_a.plateau + 3.0).abs() < 0.05, "{}", wrong_a.plateau);
    }

    #[test]
    fn linear_series_scale_with_power_one() {
        let w = Window::new(20.0, 100.0).unwrap();
        let base = sampled(1.0, 1.0, 100.0, 2000, |t| 1.0 / (t * t - 1.0));
        let lo = base.map(|_, u| 0.05 * u);
        let hi = base.map(|_, u| 0.1 * u);
        let s = epsilon_scaling(&lo, &hi, 0.05, 0.1, w, 0.0).unwrap();
        assert!((s.power - 1.0).abs() < 1e-12);
        let s = epsilon_scaling_from_coefficients(1.0, 8.0, 0.05, 0.1, 1e-3).unwrap();
        assert!((s.power - 3.0).abs() < 1e-12 && !s.below_noise_floor);
        assert!(
            epsilon_scaling_from_coefficients(1e-9, 8.0, 0.05, 0.1, 1e-6)
                .unwrap()
                .below_noise_floor
        );
        assert!(epsilon_scaling_from_coefficients(1.0, 8.0, 0.1, 0.05, 0.0).is_err());
    }

    #[test]
    fn remainder_vanishes_for_exact_scaled_data() {
        let (eps, a_scale, p): (f64, f64, u32) = (0.1, 1.0, 3);
        let b = [0.3, -0.2];
        let sp = scaling_params(p, a_scale);
        let sq = eps.powf(a_scale);
        let make = |r: f64| {
            sampled(r, 0.0, 100.0, 4001, |t| {
                let (ts, rs) = (sq * t, sq * r);
                if ts <= rs {
                    return 0.0;
                }
                let w: f64 = (0..2)
                    .map(|k| sq.powi(k) * wk_eval(p, k as u32, b[k as usize], ts, rs).unwrap())
                    .sum();
                eps.powf(sp.b_scale) * w
            })
        };
        let series = vec![make(0.5), make(2.0), make(200.0)];
        let rep = scaled_remainder(&series, eps, p, a_scale, &b, 1).unwrap();
        assert_eq!(rep.observers.len(), 2);
        assert_eq!(rep.notices.len(), 1);
        assert!(rep.max_abs < 1e-12, "{}", rep.max_abs);
        let n0 = scaled_remainder(&series, eps, p, a_scale, &b, 0).unwrap();
        assert!(n0.max_abs > rep.max_abs);
        assert!(scaled_remainder(&series, eps, p, 2.0, &b, 1).is_err());
        assert!(scaled_remainder(&series, eps, p, a_scale, &b[..1], 1).is_err());
    }
}
