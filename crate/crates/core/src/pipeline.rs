//! The `predict`, `evolve`, `analyze`, `verify` and `sweep` pipelines behind
//! the command line. Every output is a pure function of the config.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    approach_rate, epsilon_scaling_from_coefficients, fit_attractor, fit_tail, local_exponent,
    scaled_remainder, AttractorFitOptions, EpsilonScaling, FitReport, RemainderReport, Weighting,
    Window,
};
use crate::asymptotics::{
    attractor_expand, match_attractor, predict_tail, scaling_params, AttractorParams,
};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::profiles::build_h;
use crate::solver::{
    evolve, free_wave, EnergySample, EvolutionConfig, EvolutionRun, RunMeta, TimeSeries,
};

/// Quadrature tolerance for predicted moments.
pub const PREDICT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p: u32,
    pub epsilon: f64,
    pub n: u32,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub a_scale: f64,
    pub lambda0: f64,
    pub a_scale_range: (f64, f64),
    #[serde(rename = "nonGeneric")]
    pub non_generic: bool,
}

pub fn predict(config: &Config, epsilon: f64) -> Result<Prediction> {
    let n = config.analysis.n_terms;
    let pf = &config.profiles;
    let tail = predict_tail(&pf.f, &pf.g, config.p, epsilon, n, PREDICT_TOL)?;
    let scaling = scaling_params(config.p, config.analysis.a_scale);
    Ok(Prediction {
        p: config.p,
        epsilon,
        n,
        non_generic: !tail.is_generic(),
        c: tail.c,
        b: tail.b,
        a: tail.a,
        a_scale: scaling.a_scale,
        lambda0: scaling.lambda0,
        a_scale_range: scaling.a_scale_range,
    })
}

/// A nonlinear run and its free-wave companion on the same grid.
#[derive(Debug, Clone)]
pub struct RunPair {
    pub nonlinear: EvolutionRun,
    pub linear: EvolutionRun,
}

impl RunPair {
    /// `w = u - εu0` per observer, with `εu0` taken from the linear run.
    pub fn remainders(&self) -> Result<Vec<TimeSeries>> {
        self.nonlinear
            .observers
            .iter()
            .zip(&self.linear.observers)
            .map(|(u, l)| u.minus_scaled(l, 1.0))
            .collect()
    }
}

pub fn run_pair(config: &EvolutionConfig) -> Result<RunPair> {
    let linear_config = EvolutionConfig {
        nonlinear: false,
        ..config.clone()
    };
    let (nonlinear, linear) = rayon::join(|| evolve(config), || evolve(&linear_config));
    Ok(RunPair {
        nonlinear: nonlinear?,
        linear: linear?,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn observer_file(r: f64) -> String {
    format!("obs_r{r}.csv")
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut text = String::with_capacity(48 * series.len() + 4);
    text.push_str("t,u\n");
    for (t, u) in series.t.iter().zip(&series.u) {
        text.push_str(&format!("{t:e},{u:e}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_series(path: &Path, r: f64) -> Result<TimeSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("t,u") {
        return Err(Error::Config(format!(
            "{}: expected header t,u",
            path.display()
        )));
    }
    let mut series = TimeSeries {
        r,
        t: Vec::new(),
        u: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let parsed = line
            .split_once(',')
            .and_then(|(t, u)| Some((t.parse::<f64>().ok()?, u.parse::<f64>().ok()?)));
        let Some((t, u)) = parsed else {
            return Err(Error::Config(format!(
                "{}: malformed row {}: {line}",
                path.display(),
                i + 2
            )));
        };
        series.t.push(t);
        series.u.push(u);
    }
    Ok(series)
}

/// Everything of a run except the observer series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: EvolutionConfig,
    pub meta: RunMeta,
    pub energy: Vec<EnergySample>,
}

/// Writes `obs_r<r>.csv` per observer and `run.json`.
pub fn write_run(dir: &Path, run: &EvolutionRun) -> Result<()> {
    create_dir(dir)?;
    for series in &run.observers {
        write_series(&dir.join(observer_file(series.r)), series)?;
    }
    write_json(
        &dir.join("run.json"),
        &RunRecord {
            config: run.config.clone(),
            meta: run.meta.clone(),
            energy: run.energy.clone(),
        },
    )
}

pub fn read_run(dir: &Path) -> Result<EvolutionRun> {
    let record: RunRecord = read_json(&dir.join("run.json"))?;
    let observers = record
        .config
        .observers
        .iter()
        .map(|r| read_series(&dir.join(observer_file(*r)), *r))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolutionRun {
        config: record.config,
        observers,
        energy: record.energy,
        meta: record.meta,
    })
}

/// Writes the nonlinear run into `dir` and its companion into `dir/linear`.
pub fn write_pair(dir: &Path, pair: &RunPair) -> Result<()> {
    write_run(dir, &pair.nonlinear)?;
    write_run(&dir.join("linear"), &pair.linear)
}

pub fn read_pair(dir: &Path) -> Result<RunPair> {
    Ok(RunPair {
        nonlinear: read_run(dir)?,
        linear: read_run(&dir.join("linear"))?,
    })
}

/// Linear-run error against the closed-form free wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub factor: usize,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub error_coarse: f64,
    pub error_fine: f64,
    /// `ln(error_coarse / error_fine) / ln(factor)`.
    pub order: f64,
}

/// Largest deviation of a free-wave run from `ε u0` over all observers.
pub fn linear_error(run: &EvolutionRun) -> Result<f64> {
    let c = &run.config;
    let h = build_h(&c.f, &c.g)?;
    let mut worst: f64 = 0.0;
    for series in &run.observers {
        for (t, u) in series.t.iter().zip(&series.u) {
            worst = worst.max((u - c.epsilon * free_wave(&h, *t, series.r)).abs());
        }
    }
    Ok(worst)
}

pub fn convergence(coarse: &EvolutionRun, fine: &EvolutionRun) -> Result<Convergence> {
    let (nc, nf) = (coarse.config.grid.n, fine.config.grid.n);
    if nf <= nc || nf % nc != 0 {
        return Err(Error::Config(format!(
            "convergence needs the fine grid to be a multiple of the coarse one, got {nc} and {nf}"
        )));
    }
    let factor = nf / nc;
    let error_coarse = linear_error(coarse)?;
    let error_fine = linear_error(fine)?;
    Ok(Convergence {
        factor,
        n_coarse: nc,
        n_fine: nf,
        error_coarse,
        error_fine,
        order: (error_coarse / error_fine).ln() / (factor as f64).ln(),
    })
}

/// Attractor matched to one observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorSummary {
    /// From the fitted `A0, A1`.
    pub matched: AttractorParams,
    pub fitted: AttractorParams,
    pub subleading: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Expansion coefficients of the fitted attractor.
    pub expansion: Vec<f64>,
    pub approach: Option<f64>,
    /// Approach exponent with `b` doubled.
    pub approach_mismatched: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverAnalysis {
    pub r: f64,
    pub window: Window,
    /// Local-exponent plateau of `u`.
    pub exponent: Option<f64>,
    /// Tail fit of `w = u - εu0`.
    pub tail: FitReport,
    pub attractor: Option<AttractorSummary>,
    pub notices: Vec<String>,
}

impl ObserverAnalysis {
    pub fn coefficient(&self, k: usize) -> Option<f64> {
        self.tail.values.get(k).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub epsilon: f64,
    pub prediction: Prediction,
    /// Attractor parameters matched to the predicted `A0, A1`.
    pub predicted_attractor: Option<AttractorParams>,
    pub observers: Vec<ObserverAnalysis>,
    pub energy_drift: f64,
    pub causality_leak: f64,
}

impl AnalysisReport {
    pub fn observer(&self, r: f64) -> Option<&ObserverAnalysis> {
        self.observers.iter().find(|o| o.r == r)
    }
}

fn attractor_summary(w: &TimeSeries, window: Window, a0: f64, a1: f64) -> Result<AttractorSummary> {
    let matched = match_attractor(a0, a1)?;
    let fit = fit_attractor(w, window, matched, AttractorFitOptions::default())?;
    let fitted = fit.params;
    let mismatched = AttractorParams {
        b: 2.0 * fitted.b,
        ..fitted
    };
    Ok(AttractorSummary {
        matched,
        fitted,
        subleading: fit.subleading,
        converged: fit.report.converged,
        iterations: fit.report.iterations,
        expansion: attractor_expand(fitted, 2)?.coeffs,
        approach: approach_rate(w, fitted, window).ok().map(|e| e.plateau),
        approach_mismatched: approach_rate(w, mismatched, window).ok().map(|e| e.plateau),
    })
}

/// Exponents, tail fits and (for generic cubic data) attractor fits at every
/// observer. The tail fit keeps at least two terms so the attractor can be
/// matched.
pub fn analyze(config: &Config, pair: &RunPair, prediction: &Prediction) -> Result<AnalysisReport> {
    let remainders = pair.remainders()?;
    let support = config.support_radius();
    let n = config.analysis.n_terms.max(1);
    let attractor_applies = config.p == 3 && !prediction.non_generic;
    let mut observers = Vec::new();
    for (u, w) in pair.nonlinear.observers.iter().zip(&remainders) {
        let window = Window::late(support, u.r, config.analysis.window_factor, config.t_final)?;
        let mut notices = Vec::new();
        let exponent = match local_exponent(u, window) {
            Ok(e) => Some(e.plateau),
            Err(e) => {
                notices.push(format!("exponent: {e}"));
                None
            }
        };
        let tail = fit_tail(w, config.p, n, window, Weighting::Relative)?;
        if tail.ill_conditioned {
            notices.push(format!("tail fit ill-conditioned ({:e})", tail.condition));
        }
        let attractor = if attractor_applies {
            match attractor_summary(w, window, tail.values[0], tail.values[1]) {
                Ok(s) => Some(s),
                Err(e) => {
                    notices.push(format!("attractor: {e}"));
                    None
                }
            }
        } else {
            None
        };
        observers.push(ObserverAnalysis {
            r: u.r,
            window,
            exponent,
            tail,
            attractor,
            notices,
        });
    }
    let predicted_attractor = if attractor_applies && prediction.a.len() > 1 {
        match_attractor(prediction.a[0], prediction.a[1]).ok()
    } else {
        None
    };
    Ok(AnalysisReport {
        epsilon: pair.nonlinear.config.epsilon,
        prediction: prediction.clone(),
        predicted_attractor,
        observers,
        energy_drift: pair.nonlinear.meta.energy_drift,
        causality_leak: pair
            .nonlinear
            .meta
            .causality_leak
            .max(pair.linear.meta.causality_leak),
    })
}

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub predicted: Option<f64>,
    pub measured: Option<f64>,
    pub tolerance: String,
    /// `None` for informational rows.
    pub pass: Option<bool>,
}

impl Check {
    fn gate(
        name: String,
        predicted: Option<f64>,
        measured: Option<f64>,
        tolerance: String,
        ok: bool,
    ) -> Check {
        Check {
            name,
            predicted,
            measured,
            tolerance,
            pass: Some(ok && measured.is_some_and(f64::is_finite)),
        }
    }

    fn info(name: String, predicted: Option<f64>, measured: Option<f64>) -> Check {
        Check {
            name,
            predicted,
            measured,
            tolerance: "-".into(),
            pass: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub epsilon: f64,
    pub generic: bool,
    pub checks: Vec<Check>,
    pub all_pass: bool,
    pub scaling: Vec<EpsilonScaling>,
    pub analysis: AnalysisReport,
    pub analysis_doubled: AnalysisReport,
}

fn within(measured: Option<f64>, target: f64, tol: f64) -> bool {
    measured.is_some_and(|m| (m - target).abs() <= tol)
}

fn relative_within(measured: Option<f64>, target: f64, tol: f64) -> bool {
    measured.is_some_and(|m| (m - target).abs() <= tol * target.abs())
}

/// Relative tolerance of fitted against predicted tail coefficients.
pub const AMPLITUDE_TOL: f64 = 0.10;
/// Allowed deviation of the measured ε-power, as a fraction of `p`.
pub const SCALING_TOL: f64 = 0.05;

/// Pass/fail table from the analyses at `ε` and `2ε`.
pub fn verification_checks(
    config: &Config,
    base: &AnalysisReport,
    doubled: &AnalysisReport,
) -> Result<(Vec<Check>, Vec<EpsilonScaling>)> {
    let pred = &base.prediction;
    let p = config.p;
    let generic = !pred.non_generic;
    let mut checks = Vec::new();
    let mut scaling = Vec::new();
    let (target_exp, exp_tol) = if generic {
        (-(p as f64 - 1.0), 0.1)
    } else {
        (-(p as f64), 0.15)
    };
    let eps_p = base.epsilon.powi(p as i32);
    let non_generic_scale = 0.05 * eps_p * pred.c.get(1).copied().unwrap_or(0.0).abs();
    for obs in &base.observers {
        let r = obs.r;
        checks.push(Check::gate(
            format!("exponent r={r}"),
            Some(target_exp),
            obs.exponent,
            format!("±{exp_tol}"),
            within(obs.exponent, target_exp, exp_tol),
        ));
        let a0 = obs.coefficient(0);
        let a1 = obs.coefficient(1);
        if generic {
            checks.push(Check::gate(
                format!("A0 r={r}"),
                Some(pred.a[0]),
                a0,
                format!("{}%", AMPLITUDE_TOL * 100.0),
                relative_within(a0, pred.a[0], AMPLITUDE_TOL),
            ));
            checks.push(Check::info(format!("A1 r={r}"), pred.a.get(1).copied(), a1));
        } else {
            checks.push(Check::gate(
                format!("|A0| r={r}"),
                Some(0.0),
                a0,
                format!("<{non_generic_scale:.3e}"),
                a0.is_some_and(|a| a.abs() < non_generic_scale),
            ));
            if let Some(target) = pred.a.get(1) {
                checks.push(Check::gate(
                    format!("A1 r={r}"),
                    Some(*target),
                    a1,
                    format!("{}%", AMPLITUDE_TOL * 100.0),
                    relative_within(a1, *target, AMPLITUDE_TOL),
                ));
            }
        }
        if generic && p == 3 {
            match &obs.attractor {
                Some(att) => {
                    let predicted = base.predicted_attractor;
                    checks.push(Check::info(
                        format!("a r={r}"),
                        predicted.map(|x| x.a),
                        Some(att.fitted.a),
                    ));
                    checks.push(Check::info(
                        format!("b r={r}"),
                        predicted.map(|x| x.b),
                        Some(att.fitted.b),
                    ));
                    checks.push(Check::gate(
                        format!("attractor fit converged r={r}"),
                        None,
                        Some(att.iterations as f64),
                        "converged".into(),
                        att.converged,
                    ));
                    checks.push(Check::gate(
                        format!("approach r={r}"),
                        Some(-4.0),
                        att.approach,
                        "±0.4".into(),
                        within(att.approach, -4.0, 0.4),
                    ));
                    checks.push(Check::gate(
                        format!("approach 2b r={r}"),
                        Some(-2.0),
                        att.approach_mismatched,
                        ">= -2.2".into(),
                        att.approach_mismatched.is_some_and(|x| x >= -2.2),
                    ));
                }
                None => checks.push(Check::gate(
                    format!("attractor fit r={r}"),
                    None,
                    None,
                    "fit succeeds".into(),
                    false,
                )),
            }
        }
        let k = if generic { 0 } else { 1 };
        if let (Some(lo), Some(hi)) = (
            obs.coefficient(k),
            doubled.observer(r).and_then(|d| d.coefficient(k)),
        ) {
            let s = epsilon_scaling_from_coefficients(lo, hi, base.epsilon, doubled.epsilon, 0.0)?;
            let tol = SCALING_TOL * p as f64;
            checks.push(Check::gate(
                format!("eps power (A{k}) r={r}"),
                Some(p as f64),
                Some(s.power),
                format!("±{tol:.2}"),
                (s.power - p as f64).abs() <= tol && s.ratio > 0.0,
            ));
            scaling.push(s);
        }
    }
    checks.push(Check::info(
        "energy drift".into(),
        None,
        Some(base.energy_drift),
    ));
    checks.push(Check::info(
        "causality leak".into(),
        None,
        Some(base.causality_leak),
    ));
    Ok((checks, scaling))
}

/// Runs `ε` and `2ε` (each with its free companion), analyzes both and
/// tabulates predicted against measured values.
pub fn verify(config: &Config, factor: usize) -> Result<VerifyReport> {
    let eps = config.epsilon.first();
    if !(eps > 0.0) {
        return Err(Error::Config(format!(
            "verify needs epsilon > 0, got {eps}"
        )));
    }
    let runs: Vec<Result<(RunPair, Prediction)>> = [eps, 2.0 * eps]
        .par_iter()
        .map(|e| {
            let pair = run_pair(&config.evolution(*e, factor)?)?;
            Ok((pair, predict(config, *e)?))
        })
        .collect();
    let mut runs = runs.into_iter();
    let (pair, prediction) = runs.next().expect("two runs")?;
    let (pair2, prediction2) = runs.next().expect("two runs")?;
    let analysis = analyze(config, &pair, &prediction)?;
    let analysis_doubled = analyze(config, &pair2, &prediction2)?;
    let (checks, scaling) = verification_checks(config, &analysis, &analysis_doubled)?;
    Ok(VerifyReport {
        epsilon: eps,
        generic: !prediction.non_generic,
        all_pass: checks.iter().all(|c| c.pass != Some(false)),
        checks,
        scaling,
        analysis,
        analysis_doubled,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.6e}"),
        None => "-".into(),
    }
}

/// Plain-text rendering of the verification table.
pub fn render_table(report: &VerifyReport) -> String {
    let mut out = format!(
        "epsilon = {}, {} data\n{:<32} {:>14} {:>14} {:>12}  {}\n",
        report.epsilon,
        if report.generic {
            "generic"
        } else {
            "non-generic"
        },
        "check",
        "predicted",
        "measured",
        "tolerance",
        "result"
    );
    for c in &report.checks {
        let result = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "info",
        };
        out.push_str(&format!(
            "{:<32} {:>14} {:>14} {:>12}  {}\n",
            c.name,
            fmt_opt(c.predicted),
            fmt_opt(c.measured),
            c.tolerance,
            result
        ));
    }
    out.push_str(if report.all_pass {
        "all checks passed\n"
    } else {
        "some checks FAILED\n"
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub directory: String,
    pub analysis: AnalysisReport,
    pub remainder: Option<RemainderReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// ε-power between consecutive entries (sorted by ε), per observer.
    pub scaling: Vec<EpsilonScaling>,
    /// Max remainder deviations ordered by decreasing ε.
    pub remainder_max: Vec<f64>,
    /// Whether `remainder_max` decreases strictly as ε decreases.
    pub remainder_monotone: bool,
}

pub fn sweep_dir_name(epsilon: f64) -> String {
    format!("eps_{epsilon}")
}

/// Scaled-remainder comparison of one run pair, with `n` terms.
pub fn remainder_report(config: &Config, pair: &RunPair, n: u32) -> Result<RemainderReport> {
    let eps = pair.nonlinear.config.epsilon;
    let pf = &config.profiles;
    let tail = predict_tail(&pf.f, &pf.g, config.p, eps, n, PREDICT_TOL)?;
    scaled_remainder(
        &pair.remainders()?,
        eps,
        config.p,
        config.analysis.a_scale,
        &tail.b,
        n,
    )
}

/// One run pair per ε, in parallel; each writes into `out/eps_<ε>/`.
pub fn sweep(config: &Config, factor: usize, out: &Path) -> Result<SweepReport> {
    let mut eps = config.epsilon.values();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("sweep needs every epsilon > 0".into()));
    }
    let entries: Vec<Result<SweepEntry>> = eps
        .par_iter()
        .map(|e| {
            let pair = run_pair(&config.evolution(*e, factor)?)?;
            let dir = sweep_dir_name(*e);
            write_pair(&out.join(&dir), &pair)?;
            let prediction = predict(config, *e)?;
            let analysis = analyze(config, &pair, &prediction)?;
            write_json(&out.join(&dir).join("analysis.json"), &analysis)?;
            let remainder = remainder_report(config, &pair, 1).ok();
            Ok(SweepEntry {
                epsilon: *e,
                directory: dir,
                analysis,
                remainder,
            })
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    let mut scaling = Vec::new();
    for pair in entries.windows(2) {
        let (hi, lo) = (&pair[0].analysis, &pair[1].analysis);
        let k = if lo.prediction.non_generic { 1 } else { 0 };
        for obs in &lo.observers {
            let other = hi.observer(obs.r).and_then(|o| o.coefficient(k));
            if let (Some(a), Some(b)) = (obs.coefficient(k), other) {
                scaling.push(epsilon_scaling_from_coefficients(
                    a, b, lo.epsilon, hi.epsilon, 0.0,
                )?);
            }
        }
    }
    let remainder_max: Vec<f64> = entries
        .iter()
        .filter_map(|e| e.remainder.as_ref().map(|r| r.max_abs))
        .collect();
    let remainder_monotone =
        remainder_max.len() == entries.len() && remainder_max.windows(2).all(|w| w[1] < w[0]);
    Ok(SweepReport {
        entries,
        scaling,
        remainder_max,
        remainder_monotone,
    })
}
