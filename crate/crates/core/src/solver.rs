//! Method-of-lines evolution of `□u = u^p` in spherical symmetry.
//!
//! The field is carried as `v = r u`, which turns the radial wave operator into
//! the flat 1D one:
//!
//! ```text
//! ∂²_t v = ∂²_r v + v^p / r^{p-1},   v(t, 0) = 0.
//! ```
//!
//! Space is discretized with fourth-order centered differences (odd
//! reflection of `v` across the origin, one-sided at the outer edge), time
//! with classical RK4. The outer boundary is placed beyond the causal reach of
//! every observer, so no boundary condition other than `v = 0` is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{build_h, HFunction, RadialProfile};

/// Amplitudes above this are treated as blow-up.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e3;
/// Epsilon above which the run is flagged as outside the small-data regime.
pub const SMALL_DATA_WARNING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub r_max: f64,
    /// Number of cells; nodes are `r_j = j Δr`, `j = 0..=n`.
    pub n: usize,
}

impl Grid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || n < 8 {
            return Err(Error::Config(format!(
                "grid needs r_max > 0 and at least 8 cells, got r_max = {r_max}, n = {n}"
            )));
        }
        Ok(Grid { r_max, n })
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub p: u32,
    pub epsilon: f64,
    pub f: RadialProfile,
    pub g: RadialProfile,
    pub grid: Grid,
    pub cfl: f64,
    pub t_final: f64,
    pub observers: Vec<f64>,
    /// Energy is recorded every this many steps.
    pub energy_every: usize,
    /// `false` drops the `u^p` source (free wave).
    pub nonlinear: bool,
    pub blowup_threshold: f64,
}

impl EvolutionConfig {
    pub fn support_radius(&self) -> f64 {
        self.f.support_radius().max(self.g.support_radius())
    }

    pub fn validate(&self) -> Result<()> {
        self.f.validate()?;
        self.g.validate()?;
        Grid::new(self.grid.r_max, self.grid.n)?;
        if self.p < 3 {
            return Err(Error::Config(format!("p must be >= 3, got {}", self.p)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.observers.is_empty() {
            return Err(Error::Config(
                "at least one observer radius is required".into(),
            ));
        }
        if let Some(r) = self
            .observers
            .iter()
            .find(|r| !(**r >= 0.0 && r.is_finite()))
        {
            return Err(Error::Config(format!(
                "observer radius must be >= 0, got {r}"
            )));
        }
        if self.energy_every == 0 {
            return Err(Error::Config("energy_every must be >= 1".into()));
        }
        let reach = self.grid.r_max - self.max_observer() - self.support_radius();
        if self.t_final >= reach {
            return Err(Error::Config(format!(
                "causality: t_final = {} must be < r_max - max(observer) - R_support = {reach}",
                self.t_final
            )));
        }
        Ok(())
    }

    pub fn max_observer(&self) -> f64 {
        self.observers.iter().copied().fold(0.0, f64::max)
    }

    pub fn dt(&self) -> f64 {
        self.cfl * self.grid.dr()
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt() - 1e-9).ceil() as usize
    }
}

/// Radial state: `v = r u` and `π = ∂_t v` on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
}

impl FieldState {
    pub fn initial(config: &EvolutionConfig) -> Self {
        let grid = config.grid;
        let eps = config.epsilon;
        let mut v = vec![0.0; grid.n + 1];
        let mut pi = vec![0.0; grid.n + 1];
        for j in 1..grid.n {
            let r = grid.node(j);
            v[j] = r * eps * config.f.eval(r);
            pi[j] = r * eps * config.g.eval(r);
        }
        FieldState { t: 0.0, v, pi }
    }

    /// `u` at node `j`; at the origin `∂_r v(0)` from the odd continuation.
    pub fn u_at(&self, j: usize, dr: f64) -> f64 {
        if j == 0 {
            (8.0 * self.v[1] - self.v[2]) / (6.0 * dr)
        } else {
            self.v[j] / (j as f64 * dr)
        }
    }

    /// `u(r)` by four-point Lagrange interpolation of nodal `u` values
    /// (`u` continued evenly across the origin).
    pub fn interpolate_u(&self, r: f64, dr: f64) -> f64 {
        let n = self.v.len() - 1;
        let s = r / dr;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-9 {
            return self.u_at(nearest as usize, dr);
        }
        let j0 = (s.floor() as usize).min(n - 2);
        let base = j0 as isize - 1;
        let mut sum = 0.0;
        for a in 0..4 {
            let ja = base + a as isize;
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    let jb = (base + b as isize) as f64;
                    w *= (s - jb) / (ja as f64 - jb);
                }
            }
            sum += w * self.u_at(ja.unsigned_abs(), dr);
        }
        sum
    }
}

fn second_derivative(v: &[f64], inv12h2: f64, out: &mut [f64]) {
    let n = v.len() - 1;
    out[0] = 0.0;
    out[1] = (-29.0 * v[1] + 16.0 * v[2] - v[3]) * inv12h2;
    for j in 2..n - 1 {
        out[j] = (-v[j - 2] + 16.0 * v[j - 1] - 30.0 * v[j] + 16.0 * v[j + 1] - v[j + 2]) * inv12h2;
    }
    out[n - 1] = (10.0 * v[n] - 15.0 * v[n - 1] - 4.0 * v[n - 2] + 14.0 * v[n - 3]
        - 6.0 * v[n - 4]
        + v[n - 5])
        * inv12h2;
    out[n] = 0.0;
}

/// Right-hand side of the first-order system: `(∂_t v, ∂_t π)`.
///
/// With `p = None` the nonlinear source is dropped.
pub fn reduce_rhs(state: &FieldState, p: Option<u32>, dr: f64) -> (Vec<f64>, Vec<f64>) {
    let mut dpi = vec![0.0; state.v.len()];
    rhs_into(
        &state.v,
        &state.pi,
        p,
        dr,
        &mut vec![0.0; state.v.len()],
        &mut dpi,
    );
    (state.pi.clone(), dpi)
}

fn rhs_into(v: &[f64], pi: &[f64], p: Option<u32>, dr: f64, dv: &mut [f64], dpi: &mut [f64]) {
    let n = v.len() - 1;
    dv.copy_from_slice(pi);
    dv[0] = 0.0;
    dv[n] = 0.0;
    second_derivative(v, 1.0 / (12.0 * dr * dr), dpi);
    if let Some(p) = p {
        let pm1 = p as i32 - 1;
        for j in 1..n {
            let u = v[j] / (j as f64 * dr);
            dpi[j] += v[j] * u.powi(pm1);
        }
    }
}

/// `∂_r v` to fourth order, odd reflection at the origin.
fn first_derivative(v: &[f64], dr: f64, out: &mut [f64]) {
    let n = v.len() - 1;
    let inv = 1.0 / (12.0 * dr);
    let at = |j: isize| -> f64 {
        if j < 0 {
            -v[(-j) as usize]
        } else {
            v[j as usize]
        }
    };
    for j in 0..n - 1 {
        let i = j as isize;
        out[j] = (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) * inv;
    }
    out[n - 1] =
        (-3.0 * v[n] - 10.0 * v[n - 1] + 18.0 * v[n - 2] - 6.0 * v[n - 3] + v[n - 4]) * -inv;
    out[n] =
        (25.0 * v[n] - 48.0 * v[n - 1] + 36.0 * v[n - 2] - 16.0 * v[n - 3] + 3.0 * v[n - 4]) * inv;
}

/// `E = ∫ [½(∂_t u)² + ½(∂_r u)² - u^{p+1}/(p+1)] r² dr`, written in `v`:
/// `∫ [½π² + ½(∂_r v)² - v^{p+1}/((p+1) r^{p-1})] dr` (trapezoid).
pub fn energy(state: &FieldState, p: Option<u32>, dr: f64) -> f64 {
    let n = state.v.len() - 1;
    let mut dv = vec![0.0; n + 1];
    first_derivative(&state.v, dr, &mut dv);
    let density = |j: usize| -> f64 {
        let mut e = 0.5 * state.pi[j] * state.pi[j] + 0.5 * dv[j] * dv[j];
        if let (Some(p), true) = (p, j > 0) {
            let r = j as f64 * dr;
            let u = state.v[j] / r;
            e -= r * state.v[j] * u.powi(p as i32) / (p + 1) as f64;
        }
        e
    };
    let mut sum = 0.5 * (density(0) + density(n));
    for j in 1..n {
        sum += density(j);
    }
    sum * dr
}

/// Signed observer time series `u(t_i, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub r: f64,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Pointwise `self - factor * other` on a shared time axis.
    pub fn minus_scaled(&self, other: &TimeSeries, factor: f64) -> Result<TimeSeries> {
        if self.t.len() != other.t.len() || self.r != other.r {
            return Err(Error::Domain(format!(
                "series mismatch: r {} vs {}, {} vs {} samples",
                self.r,
                other.r,
                self.t.len(),
                other.t.len()
            )));
        }
        Ok(TimeSeries {
            r: self.r,
            t: self.t.clone(),
            u: self
                .u
                .iter()
                .zip(&other.u)
                .map(|(a, b)| a - factor * b)
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> TimeSeries {
        TimeSeries {
            r: self.r,
            t: self.t.clone(),
            u: self.t.iter().zip(&self.u).map(|(t, u)| f(*t, *u)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scheme_order: u32,
    pub dr: f64,
    pub dt: f64,
    pub steps: usize,
    /// Largest `|v_j|` seen ahead of the causal front `R + t + 4Δr`.
    pub causality_leak: f64,
    /// Largest relative energy deviation from `E(0)`.
    pub energy_drift: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRun {
    pub config: EvolutionConfig,
    pub observers: Vec<TimeSeries>,
    pub energy: Vec<EnergySample>,
    pub meta: RunMeta,
}

impl EvolutionRun {
    pub fn observer(&self, r: f64) -> Option<&TimeSeries> {
        self.observers.iter().find(|s| s.r == r)
    }
}

struct Rk4Workspace {
    k: [(Vec<f64>, Vec<f64>); 4],
    v: Vec<f64>,
    pi: Vec<f64>,
}

impl Rk4Workspace {
    fn new(len: usize) -> Self {
        let pair = || (vec![0.0; len], vec![0.0; len]);
        Rk4Workspace {
            k: [pair(), pair(), pair(), pair()],
            v: vec![0.0; len],
            pi: vec![0.0; len],
        }
    }

    fn step(&mut self, state: &mut FieldState, p: Option<u32>, dr: f64, dt: f64) {
        let stage_dt = [0.5 * dt, 0.5 * dt, dt];
        {
            let (dv, dpi) = &mut self.k[0];
            rhs_into(&state.v, &state.pi, p, dr, dv, dpi);
        }
        for s in 0..3 {
            let h = stage_dt[s];
            let (kv, kpi) = &self.k[s];
            for j in 0..state.v.len() {
                self.v[j] = state.v[j] + h * kv[j];
                self.pi[j] = state.pi[j] + h * kpi[j];
            }
            self.v[0] = 0.0;
            let (dv, dpi) = &mut self.k[s + 1];
            rhs_into(&self.v, &self.pi, p, dr, dv, dpi);
        }
        let w = dt / 6.0;
        let [(a_v, a_pi), (b_v, b_pi), (c_v, c_pi), (d_v, d_pi)] = &self.k;
        for j in 0..state.v.len() {
            state.v[j] += w * (a_v[j] + 2.0 * b_v[j] + 2.0 * c_v[j] + d_v[j]);
            state.pi[j] += w * (a_pi[j] + 2.0 * b_pi[j] + 2.0 * c_pi[j] + d_pi[j]);
        }
        state.v[0] = 0.0;
        state.t += dt;
    }
}

/// Runs the configured evolution and records observers every step.
pub fn evolve(config: &EvolutionConfig) -> Result<EvolutionRun> {
    config.validate()?;
    let grid = config.grid;
    let dr = grid.dr();
    let dt = config.dt();
    let steps = config.steps();
    let p = config.nonlinear.then_some(config.p);
    let support = config.support_radius();

    let mut warnings = Vec::new();
    if config.epsilon > SMALL_DATA_WARNING {
        warnings.push(format!(
            "epsilon = {} exceeds the small-data threshold {SMALL_DATA_WARNING}",
            config.epsilon
        ));
    }

    let mut state = FieldState::initial(config);
    let mut work = Rk4Workspace::new(grid.n + 1);
    let mut observers: Vec<TimeSeries> = config
        .observers
        .iter()
        .map(|r| TimeSeries {
            r: *r,
            t: Vec::with_capacity(steps + 1),
            u: Vec::with_capacity(steps + 1),
        })
        .collect();
    let mut energy_series = Vec::with_capacity(steps / config.energy_every + 2);
    let mut causality_leak: f64 = 0.0;

    let record = |state: &FieldState, observers: &mut Vec<TimeSeries>| {
        for obs in observers.iter_mut() {
            obs.t.push(state.t);
            obs.u.push(state.interpolate_u(obs.r, dr));
        }
    };
    record(&state, &mut observers);
    energy_series.push(EnergySample {
        t: 0.0,
        energy: energy(&state, p, dr),
    });

    for step in 1..=steps {
        work.step(&mut state, p, dr, dt);
        state.t = step as f64 * dt;

        let mut peak: f64 = 0.0;
        for j in 1..=grid.n {
            let u = state.v[j] / (j as f64 * dr);
            if !u.is_finite() {
                return Err(Error::Blowup {
                    t: state.t,
                    reason: format!("non-finite value at r = {}", grid.node(j)),
                });
            }
            peak = peak.max(u.abs());
        }
        if peak > config.blowup_threshold {
            return Err(Error::Blowup {
                t: state.t,
                reason: format!("|u| = {peak:e} exceeds {}", config.blowup_threshold),
            });
        }
        let front = support + state.t + 4.0 * dr;
        let first = (front / dr).ceil() as usize;
        if first <= grid.n {
            for v in &state.v[first..] {
                causality_leak = causality_leak.max(v.abs());
            }
        }

        record(&state, &mut observers);
        if step % config.energy_every == 0 || step == steps {
            energy_series.push(EnergySample {
                t: state.t,
                energy: energy(&state, p, dr),
            });
        }
    }

    let e0 = energy_series[0].energy;
    let energy_drift = if e0 != 0.0 {
        energy_series
            .iter()
            .map(|s| ((s.energy - e0) / e0).abs())
            .fold(0.0, f64::max)
    } else {
        energy_series
            .iter()
            .map(|s| s.energy.abs())
            .fold(0.0, f64::max)
    };

    Ok(EvolutionRun {
        config: config.clone(),
        observers,
        energy: energy_series,
        meta: RunMeta {
            scheme_order: 4,
            dr,
            dt,
            steps,
            causality_leak,
            energy_drift,
            warnings,
        },
    })
}

/// Free wave `u0(t, r) = [h(t-r) - h(t+r)] / r`; near the origin the limit
/// `-2 h'(t)`.
pub fn free_wave(h: &HFunction, t: f64, r: f64) -> f64 {
    let r = r.abs();
    if r <= 1e-6 * h.support_radius() {
        -2.0 * h.derivative(t)
    } else {
        (h.eval(t - r) - h.eval(t + r)) / r
    }
}

/// Closed-form solution of the linear problem with data `(f, g)`.
pub fn linear_solution(f: &RadialProfile, g: &RadialProfile, t: f64, r: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "linear solution needs t >= 0, got {t}"
        )));
    }
    Ok(free_wave(&build_h(f, g)?, t, r))
}
