//! Run configuration, read from JSON.
//!
//! ```json
//! {
//!   "p": 3,
//!   "epsilon": 0.05,
//!   "profiles": {
//!     "f": { "family": "zero" },
//!     "g": { "family": "poly_bump", "amplitude": 1.0, "radius": 1.0, "m": 3 }
//!   },
//!   "grid": { "n": 8000, "cfl": 0.5 },
//!   "t_final": 100.0,
//!   "observers": [0.5, 1.0, 2.0],
//!   "analysis": { "window_factor": 5.0, "n_terms": 2, "a_scale": 1.0 }
//! }
//! ```
//!
//! `epsilon` may also be a list (used by `sweep`). When `grid.r_max` is
//! omitted it is set to `t_final + max(observers) + R + 1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_WINDOW_FACTOR;
use crate::asymptotics::scaling_params;
use crate::error::{Error, Result};
use crate::profiles::RadialProfile;
use crate::solver::{EvolutionConfig, Grid, DEFAULT_BLOWUP_THRESHOLD};

/// Margin added beyond the causal minimum when `r_max` is derived.
pub const AUTO_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    One(f64),
    Many(Vec<f64>),
}

impl Epsilon {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Epsilon::One(e) => vec![*e],
            Epsilon::Many(v) => v.clone(),
        }
    }

    pub fn first(&self) -> f64 {
        match self {
            Epsilon::One(e) => *e,
            Epsilon::Many(v) => v.first().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profiles {
    pub f: RadialProfile,
    pub g: RadialProfile,
}

fn default_cfl() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    pub n: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_window_factor() -> f64 {
    DEFAULT_WINDOW_FACTOR
}
fn default_n_terms() -> u32 {
    2
}
fn default_a_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_window_factor")]
    pub window_factor: f64,
    #[serde(default = "default_n_terms")]
    pub n_terms: u32,
    #[serde(default = "default_a_scale")]
    pub a_scale: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            window_factor: default_window_factor(),
            n_terms: default_n_terms(),
            a_scale: default_a_scale(),
        }
    }
}

fn default_energy_every() -> usize {
    20
}
fn default_blowup() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub p: u32,
    pub epsilon: Epsilon,
    pub profiles: Profiles,
    pub grid: GridSpec,
    pub t_final: f64,
    pub observers: Vec<f64>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default = "default_energy_every")]
    pub energy_every: usize,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let config: Config =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn support_radius(&self) -> f64 {
        self.profiles
            .f
            .support_radius()
            .max(self.profiles.g.support_radius())
    }

    pub fn max_observer(&self) -> f64 {
        self.observers.iter().copied().fold(0.0, f64::max)
    }

    pub fn r_max(&self) -> f64 {
        self.grid.r_max.unwrap_or_else(|| {
            self.t_final + self.max_observer() + self.support_radius() + AUTO_MARGIN
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.p < 3 {
            return bad(format!("p must be an integer >= 3, got {}", self.p));
        }
        let eps = self.epsilon.values();
        if eps.is_empty() {
            return bad("epsilon list is empty".into());
        }
        if let Some(e) = eps.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return bad(format!("epsilon must be finite and >= 0, got {e}"));
        }
        self.profiles.f.validate()?;
        self.profiles.g.validate()?;
        if self.observers.is_empty() {
            return bad("at least one observer radius is required".into());
        }
        if let Some(r) = self
            .observers
            .iter()
            .find(|r| !(**r >= 0.0 && r.is_finite()))
        {
            return bad(format!("observer radius must be finite and >= 0, got {r}"));
        }
        if !(self.analysis.window_factor >= 3.0) {
            return bad(format!(
                "analysis.window_factor must be >= 3, got {}",
                self.analysis.window_factor
            ));
        }
        if self.analysis.n_terms > 2 {
            return bad(format!(
                "analysis.n_terms must be <= 2, got {}",
                self.analysis.n_terms
            ));
        }
        if !scaling_params(self.p, self.analysis.a_scale).valid {
            return bad(format!(
                "analysis.a_scale = {} outside the admissible range",
                self.analysis.a_scale
            ));
        }
        if self.energy_every == 0 {
            return bad("energy_every must be >= 1".into());
        }
        self.evolution(self.epsilon.first(), 1)?.validate()
    }

    /// Solver configuration for one `ε` with `N` multiplied by `factor`.
    pub fn evolution(&self, epsilon: f64, factor: usize) -> Result<EvolutionConfig> {
        if factor == 0 {
            return Err(Error::Config("resolution factor must be >= 1".into()));
        }
        Ok(EvolutionConfig {
            p: self.p,
            epsilon,
            f: self.profiles.f,
            g: self.profiles.g,
            grid: Grid::new(self.r_max(), self.grid.n * factor)?,
            cfl: self.grid.cfl,
            t_final: self.t_final,
            observers: self.observers.clone(),
            energy_every: self.energy_every,
            nonlinear: true,
            blowup_threshold: self.blowup_threshold,
        })
    }
}
