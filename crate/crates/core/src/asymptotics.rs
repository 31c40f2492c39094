//! Predicted late-time structure of small solutions of `□u = u^p`.
//!
//! The tail is assembled from moments of the free profile `h`,
//! `C_{q,i} = ∫ x^i h(x)^q dx`, rescaled into
//! `B_{p,k} = 2^{p+k-3} C_{p,k} / (p+k-2)`. Each `B_{p,k}` multiplies the
//! bracket
//!
//! ```text
//! [1/(t-r)^m - 1/(t+r)^m] / r,   m = p + k - 2,
//! ```
//!
//! which for `m = 1, 2, 3` equals `2/X`, `4t/X²` and `2(3t²+r²)/X³` with
//! `X = t² - r²`. The [`TailExpansion`] coefficients `A_k` are taken in the
//! normalized basis `1/X, t/X², (3t²+r²)/X³`, so `A_k = c_m ε^p B_{p,k}` with
//! `c_m ∈ {2, 4, 2}`. Brackets with `m > 3` are used unnormalized.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{build_h, integrate_with_breaks, HFunction, RadialProfile};

/// Fits whose column-scaled condition number exceeds this are flagged.
pub const ILL_CONDITIONED: f64 = 1e8;

/// Moments `C_{q,i}` of a profile `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub q: u32,
    /// `entries[i] = C_{q,i}`.
    pub entries: Vec<f64>,
}

/// `C_{q,i} = ∫ x^i h(x)^q dx` over the support of `h`.
pub fn moment(h: &HFunction, q: u32, i: u32, tol: f64) -> Result<f64> {
    if q == 0 {
        return Err(Error::Domain("moment power q must be >= 1".into()));
    }
    let radius = h.support_radius();
    if radius == 0.0 {
        return Ok(0.0);
    }
    integrate_with_breaks(
        |x| x.powi(i as i32) * h.eval(x).powi(q as i32),
        (-radius, radius),
        &h.breakpoints(),
        tol,
    )
}

pub fn moment_table(h: &HFunction, q: u32, n: u32, tol: f64) -> Result<MomentTable> {
    let entries = (0..=n)
        .map(|i| moment(h, q, i, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTable { q, entries })
}

/// `B_{p,k} = 2^{p+k-3} C / (p+k-2)`.
pub fn b_coefficient(p: u32, k: u32, c: f64) -> f64 {
    let m = p + k - 2;
    2f64.powi((p + k) as i32 - 3) * c / m as f64
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `[1/(t-r)^m - 1/(t+r)^m] / r` for `t > |r|`, evaluated without
/// cancellation as `2 Σ_{j odd} C(m,j) t^{m-j} r^{j-1} / (t²-r²)^m`.
/// Even in `r`; at `r = 0` it is `2m / t^{m+1}`.
pub fn bracket(m: u32, t: f64, r: f64) -> f64 {
    let x = t * t - r * r;
    let mut sum = 0.0;
    let mut j = 1;
    while j <= m {
        sum += binomial(m, j) * t.powi((m - j) as i32) * r.powi(j as i32 - 1);
        j += 2;
    }
    2.0 * sum / x.powi(m as i32)
}

/// Normalization of [`bracket`] into the `A_k` basis.
pub fn basis_factor(m: u32) -> f64 {
    match m {
        1 => 2.0,
        2 => 4.0,
        3 => 2.0,
        _ => 1.0,
    }
}

/// Normalized basis function `bracket(m) / basis_factor(m)`.
pub fn basis(m: u32, t: f64, r: f64) -> f64 {
    bracket(m, t, r) / basis_factor(m)
}

/// `W^(k)(t, r) = B Θ(t-r)/r [1/(t-r)^{p+k-2} - 1/(t+r)^{p+k-2}]`.
pub fn wk_eval(p: u32, k: u32, b: f64, t: f64, r: f64) -> Result<f64> {
    let r = r.abs();
    if t == r {
        return Err(Error::LightCone(t));
    }
    if t < r {
        return Ok(0.0);
    }
    Ok(b * bracket(p + k - 2, t, r))
}

/// Tail coefficients predicted for data `(εf, εg)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExpansion {
    pub p: u32,
    pub epsilon: f64,
    /// Truncation order: terms `k = 0..=n`.
    pub n: u32,
    /// `C_{p,k}`.
    pub c: Vec<f64>,
    /// `B_{p,k}`.
    pub b: Vec<f64>,
    /// `A_k = c_m ε^p B_{p,k}`.
    pub a: Vec<f64>,
}

impl TailExpansion {
    /// An expansion given directly by its `A_k` (used for synthetic series).
    pub fn from_a(p: u32, a: Vec<f64>) -> Self {
        TailExpansion {
            p,
            epsilon: 1.0,
            n: a.len().saturating_sub(1) as u32,
            c: Vec::new(),
            b: Vec::new(),
            a,
        }
    }

    /// `A0` is nonzero relative to the other coefficients (parity zeros
    /// come out of the quadrature at roundoff level, not exactly 0).
    pub fn is_generic(&self) -> bool {
        let scale = self.a.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        self.a.first().is_some_and(|a0| a0.abs() > 1e-10 * scale)
    }
}

/// `Σ_k A_k basis_{p+k-2}(t, r)`; requires `t > r >= 0`.
pub fn tail_eval(exp: &TailExpansion, t: f64, r: f64) -> Result<f64> {
    if !(t > r && r >= 0.0) {
        return Err(Error::Domain(format!(
            "tail expansion needs t > r >= 0, got t = {t}, r = {r}"
        )));
    }
    Ok(exp
        .a
        .iter()
        .enumerate()
        .map(|(k, a)| a * basis(exp.p + k as u32 - 2, t, r))
        .sum())
}

/// Builds `h`, its moments, `B_{p,k}` and the leading-order `A_k`.
pub fn predict_tail(
    f: &RadialProfile,
    g: &RadialProfile,
    p: u32,
    epsilon: f64,
    n: u32,
    tol: f64,
) -> Result<TailExpansion> {
    if p < 3 {
        return Err(Error::Config(format!("p must be >= 3, got {p}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let h = build_h(f, g)?.with_tol(tol);
    let c = moment_table(&h, p, n, tol)?.entries;
    let b: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, c)| b_coefficient(p, k as u32, *c))
        .collect();
    let scale = epsilon.powi(p as i32);
    let a = b
        .iter()
        .enumerate()
        .map(|(k, b)| basis_factor(p + k as u32 - 2) * scale * b)
        .collect();
    Ok(TailExpansion {
        p,
        epsilon,
        n,
        c,
        b,
        a,
    })
}

/// Parameters of the attractor `u = √2 / (t + a + b[(t+a)² - r²])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorParams {
    pub a: f64,
    pub b: f64,
}

/// Denominator of the attractor.
pub fn attractor_denominator(params: AttractorParams, t: f64, r: f64) -> f64 {
    let s = t + params.a;
    s + params.b * (s * s - r * r)
}

/// Evaluates the attractor. `u → -u` maps solutions to solutions, so `b < 0`
/// gives the negative branch; the denominator must be nonzero and carry the
/// sign of `b` (positive when `b = 0`).
pub fn attractor_eval(params: AttractorParams, t: f64, r: f64) -> Result<f64> {
    let d = attractor_denominator(params, t, r);
    let sign_ok = if params.b < 0.0 { d < 0.0 } else { d > 0.0 };
    if !d.is_finite() || !sign_ok {
        return Err(Error::Domain(format!(
            "attractor denominator {d:e} at t = {t}, r = {r} for (a, b) = ({}, {})",
            params.a, params.b
        )));
    }
    Ok(SQRT_2 / d)
}

/// Largest `|u_tt - u_rr - 2u_r/r - u³|` of the attractor over the grid
/// `t = 1 + ih ∈ [1, 5]`, `r = jh ∈ [0, t - 0.2]`, with 4th-order centered
/// differences (the origin uses `3 u_rr`, stencils reach `r < 0` by evenness).
pub fn attractor_residual(params: AttractorParams, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 0.2) {
        return Err(Error::Domain(format!(
            "residual step must lie in (0, 0.2], got {h}"
        )));
    }
    let u = |t: f64, r: f64| attractor_eval(params, t, r);
    let d2 = |f0: f64, fp: [f64; 2], fm: [f64; 2]| {
        (-fp[1] + 16.0 * fp[0] - 30.0 * f0 + 16.0 * fm[0] - fm[1]) / (12.0 * h * h)
    };
    let steps = ((4.0 / h) + 0.5) as usize;
    let mut worst: f64 = 0.0;
    for i in 0..=steps {
        let t = 1.0 + i as f64 * h;
        let rmax = t - 0.2;
        let mut j = 0;
        while j as f64 * h <= rmax + 1e-12 {
            let r = j as f64 * h;
            let u0 = u(t, r)?;
            let utt = d2(
                u0,
                [u(t + h, r)?, u(t + 2.0 * h, r)?],
                [u(t - h, r)?, u(t - 2.0 * h, r)?],
            );
            let (rp, rm) = (
                [u(t, r + h)?, u(t, r + 2.0 * h)?],
                [u(t, r - h)?, u(t, r - 2.0 * h)?],
            );
            let urr = d2(u0, rp, rm);
            let lap = if j == 0 {
                3.0 * urr
            } else {
                let ur = (-rp[1] + 8.0 * rp[0] - 8.0 * rm[0] + rm[1]) / (12.0 * h);
                urr + 2.0 * ur / r
            };
            worst = worst.max((utt - lap - u0 * u0 * u0).abs());
            j += 1;
        }
    }
    Ok(worst)
}

/// The attractor's large-`X` expansion in the tail basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorExpansion {
    /// Coefficients of `1/X, t/X², (3t²+r²)/X³`.
    pub coeffs: Vec<f64>,
    /// Coefficient of `t²/X³`, the term outside the tail basis at `t⁻⁴`.
    pub t2_coeff: f64,
}

/// Series division of `√2 / (bX + (1+2ab)t + a(1+ab))` through order `t⁻⁴`:
///
/// `A0 = √2/b`, `A1 = -√2(1+2ab)/b²`, `A2 = √2 a(1+ab)/b²`, and `√2/b³` on
/// `t²/X³`. `n` truncates the returned coefficient list (at most 3 terms).
pub fn attractor_expand(params: AttractorParams, n: u32) -> Result<AttractorExpansion> {
    let AttractorParams { a, b } = params;
    if b == 0.0 {
        return Err(Error::Domain("attractor expansion needs b != 0".into()));
    }
    let all = [
        SQRT_2 / b,
        -SQRT_2 * (1.0 + 2.0 * a * b) / (b * b),
        SQRT_2 * a * (1.0 + a * b) / (b * b),
    ];
    let len = (n as usize + 1).min(3);
    Ok(AttractorExpansion {
        coeffs: all[..len].to_vec(),
        t2_coeff: SQRT_2 / (b * b * b),
    })
}

/// Sampled counterpart of [`attractor_expand`]: weighted least squares of the
/// attractor on `t ∈ [10³, 10⁴]`, `r ∈ {0, t/2}` in the basis
/// `{1/X, t/X², (3t²+r²)/X³, t²/X³}`.
pub fn attractor_expand_sampled(params: AttractorParams) -> Result<AttractorExpansion> {
    let samples = 200;
    let mut rows = Vec::with_capacity(2 * samples);
    for i in 0..samples {
        let t = 1e3 * 10f64.powf(i as f64 / (samples - 1) as f64);
        for r in [0.0, 0.5 * t] {
            rows.push((t, r, attractor_eval(params, t, r)?));
        }
    }
    let cols = 4;
    let mut design = DMatrix::zeros(rows.len(), cols);
    let mut rhs = DVector::zeros(rows.len());
    for (row, (t, r, u)) in rows.iter().enumerate() {
        let x = t * t - r * r;
        // relative weighting, every sample counts equally
        let w = x;
        design[(row, 0)] = w / x;
        design[(row, 1)] = w * t / (x * x);
        design[(row, 2)] = w * (3.0 * t * t + r * r) / (x * x * x);
        design[(row, 3)] = w * t * t / (x * x * x);
        rhs[row] = w * u;
    }
    let solution = crate::analysis::lsq::solve(&design, &rhs)?;
    if solution.condition > ILL_CONDITIONED {
        return Err(Error::IllConditioned(solution.condition));
    }
    let c = solution.coefficients;
    Ok(AttractorExpansion {
        coeffs: vec![c[0], c[1], c[2]],
        t2_coeff: c[3],
    })
}

/// Closed-form inverse of the first two expansion coefficients.
pub fn match_attractor(a0: f64, a1: f64) -> Result<AttractorParams> {
    if a0 == 0.0 || !a0.is_finite() {
        return Err(Error::NonGenericData(a0));
    }
    if !a1.is_finite() {
        return Err(Error::Domain(format!("A1 must be finite, got {a1}")));
    }
    let b = SQRT_2 / a0;
    let a = (-a1 * b * b / SQRT_2 - 1.0) / (2.0 * b);
    Ok(AttractorParams { a, b })
}

/// Bookkeeping of the scaling argument for a given exponent `a_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub p: u32,
    pub a_scale: f64,
    /// `p + a_scale (p-1)`.
    pub b_scale: f64,
    /// `(p-1)(1-a) + a[(p-1)² - 2]/p`.
    pub lambda0: f64,
    /// Open interval `(0, p(p-1)/(p+1))` of admissible `a_scale`.
    pub a_scale_range: (f64, f64),
    pub valid: bool,
}

pub fn scaling_params(p: u32, a_scale: f64) -> ScalingParams {
    let pf = p as f64;
    let upper = pf * (pf - 1.0) / (pf + 1.0);
    ScalingParams {
        p,
        a_scale,
        b_scale: pf + a_scale * (pf - 1.0),
        lambda0: (pf - 1.0) * (1.0 - a_scale) + a_scale * ((pf - 1.0).powi(2) - 2.0) / pf,
        a_scale_range: (0.0, upper),
        valid: a_scale > 0.0 && a_scale < upper,
    }
}
