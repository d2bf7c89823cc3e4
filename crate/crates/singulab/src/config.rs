//! Run configuration shared by the command-line front-end and the certificates it writes.
//!
//! The file format is one `key = value` per line; `#` starts a comment.

use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;
use thiserror::Error;

use crate::link::TraceParams;
use crate::parse::parse_rational;
use crate::singular::{SearchParams, Tolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    Value { key: String, value: String },
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    /// Residual below which a point counts as singular.
    pub residual_tol: f64,
    pub rank_tol: f64,
    /// Lower bound for every certified margin.
    pub margin_tol: f64,
    pub kernel_gap: f64,
    pub eigen_floor: f64,
    pub t: String,
    pub s: String,
    pub grid: usize,
    pub phase_seeds: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// First link radius relative to the ambient scale.
    pub eps_start: f64,
    pub eps_shrinks: usize,
    pub max_step: f64,
    pub seed: u64,
    pub trials: usize,
    pub halvings: usize,
    #[serde(skip)]
    pub workers: usize,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            residual_tol: 1e-10,
            rank_tol: 1e-8,
            margin_tol: 1e-8,
            kernel_gap: 1e3,
            eigen_floor: 1e-8,
            t: "1/10".into(),
            s: "1/1000".into(),
            grid: 8,
            phase_seeds: 2,
            r_min: 1e-2,
            r_max: 1.0,
            eps_start: 0.1,
            eps_shrinks: 6,
            max_step: 0.05,
            seed: 1,
            trials: 16,
            halvings: 8,
            workers: 0,
            output: None,
        }
    }
}

pub const KEYS: [&str; 19] = [
    "residual_tol", "rank_tol", "margin_tol", "kernel_gap", "eigen_floor", "t", "s", "grid", "phase_seeds", "r_min", "r_max",
    "eps_start", "eps_shrinks", "max_step", "seed", "trials", "halvings", "workers", "output",
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Value { key: key.to_string(), value: value.to_string() };
        let float = || value.parse::<f64>().map_err(|_| bad());
        let count = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "residual_tol" => self.residual_tol = float()?,
            "rank_tol" => self.rank_tol = float()?,
            "margin_tol" => self.margin_tol = float()?,
            "kernel_gap" => self.kernel_gap = float()?,
            "eigen_floor" => self.eigen_floor = float()?,
            "t" => {
                parse_rational(value).ok_or_else(bad)?;
                self.t = value.to_string();
            }
            "s" => {
                parse_rational(value).ok_or_else(bad)?;
                self.s = value.to_string();
            }
            "grid" => self.grid = count()?,
            "phase_seeds" => self.phase_seeds = count()?,
            "r_min" => self.r_min = float()?,
            "r_max" => self.r_max = float()?,
            "eps_start" => self.eps_start = float()?,
            "eps_shrinks" => self.eps_shrinks = count()?,
            "max_step" => self.max_step = float()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "trials" => self.trials = count()?,
            "halvings" => self.halvings = count()?,
            "workers" => self.workers = count()?,
            "output" => self.output = Some(value.to_string()),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: k + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("residual_tol", self.residual_tol),
            ("rank_tol", self.rank_tol),
            ("margin_tol", self.margin_tol),
            ("kernel_gap", self.kernel_gap),
            ("eigen_floor", self.eigen_floor),
            ("r_min", self.r_min),
            ("r_max", self.r_max),
            ("eps_start", self.eps_start),
            ("max_step", self.max_step),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.grid == 0 {
            return Err(ConfigError::NotPositive("grid"));
        }
        if self.phase_seeds == 0 {
            return Err(ConfigError::NotPositive("phase_seeds"));
        }
        if !self.t_value().is_positive() {
            return Err(ConfigError::NotPositive("t"));
        }
        if !self.s_value().is_positive() {
            return Err(ConfigError::NotPositive("s"));
        }
        Ok(())
    }

    pub fn t_value(&self) -> BigRational {
        parse_rational(&self.t).expect("validated")
    }

    pub fn s_value(&self) -> BigRational {
        parse_rational(&self.s).expect("validated")
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { accept: self.residual_tol, rank: self.rank_tol, kernel_gap: self.kernel_gap, eigen_floor: self.eigen_floor }
    }

    pub fn search_params(&self) -> SearchParams {
        SearchParams {
            r_min: self.r_min,
            r_max: self.r_max,
            grid: self.grid,
            phase_seeds: self.phase_seeds,
            tol: self.tolerances(),
            workers: self.workers,
            ..SearchParams::default()
        }
    }

    pub fn trace_params(&self) -> TraceParams {
        TraceParams { max_step: self.max_step, ..TraceParams::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let config = RunConfig::from_text("# comment\nt = 1/20\ngrid=12 # trailing\n\nworkers = 3\n").unwrap();
        assert_eq!(config.t, "1/20");
        assert_eq!(config.grid, 12);
        assert_eq!(config.workers, 3);
        assert_eq!(config.seed, RunConfig::default().seed);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(RunConfig::from_text("grid 3"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(RunConfig::from_text("colour = red"), Err(ConfigError::UnknownKey("colour".into())));
        assert_eq!(RunConfig::from_text("rank_tol = -1"), Err(ConfigError::NotPositive("rank_tol")));
        assert_eq!(RunConfig::from_text("t = 0"), Err(ConfigError::NotPositive("t")));
        assert!(matches!(RunConfig::from_text("t = z1"), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn workers_not_serialized() {
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        a.workers = 1;
        b.workers = 8;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn key_list_is_complete() {
        let mut config = RunConfig::default();
        for key in KEYS {
            let value = match key {
                "t" | "s" => "1/2",
                "output" => "out.json",
                _ => "2",
            };
            config.set(key, value).unwrap();
        }
    }
}
