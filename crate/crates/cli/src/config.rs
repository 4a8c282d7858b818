//! Run configuration: flat `key = value` files, `summary.json` files with an
//! embedded `config` object, and command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use quasimorse::particles::{default_dt, MotionParams};
use quasimorse::steadystate::DEFAULT_MIN_MILL_NODES;
use quasimorse::sweep::SweepConfig;
use quasimorse::{Pattern, PotentialParams, SearchConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub l: f64,
    pub k: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub pattern: Pattern,
    /// Fine grid step.
    pub dr: f64,
    pub dr_coarse: Option<f64>,
    pub rmax: Option<f64>,
    pub window: Option<f64>,
    pub min_mill_nodes: usize,
    pub polish: bool,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "N")]
    pub particles: usize,
    pub seed: u64,
    pub bin: f64,
    pub samples: usize,
    #[serde(rename = "C_min")]
    pub c_min: f64,
    #[serde(rename = "C_max")]
    pub c_max: f64,
    pub l_min: f64,
    pub l_max: f64,
    #[serde(rename = "C_res")]
    pub c_res: usize,
    pub l_res: usize,
    pub exclusion: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            c: 10.0 / 9.0,
            l: 0.75,
            k: 0.5,
            lambda: 100.0,
            alpha: 1.0,
            beta: 5.0,
            pattern: Pattern::Flock,
            dr: 0.01,
            dr_coarse: None,
            rmax: None,
            window: None,
            min_mill_nodes: DEFAULT_MIN_MILL_NODES,
            polish: true,
            dt: None,
            t_end: 50.0,
            particles: 400,
            seed: 0,
            bin: 0.05,
            samples: 50,
            c_min: 1.01,
            c_max: 2.0,
            l_min: 0.3,
            l_max: 0.95,
            c_res: 10,
            l_res: 10,
            exclusion: 0.02,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}")))
}

fn opt(key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    match v.trim() {
        "" | "null" | "none" | "auto" => Ok(None),
        s => num(key, s).map(Some),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "dim" | "n" => self.dim = num(key, value)?,
            "C" => self.c = num(key, value)?,
            "l" => self.l = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "pattern" => {
                self.pattern = value
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("pattern: expected flock or mill, got {value:?}")))?
            }
            "dr" => self.dr = num(key, value)?,
            "dr_coarse" => self.dr_coarse = opt(key, value)?,
            "rmax" => self.rmax = opt(key, value)?,
            "window" => self.window = opt(key, value)?,
            "min_mill_nodes" => self.min_mill_nodes = num(key, value)?,
            "polish" => self.polish = num(key, value)?,
            "dt" => self.dt = opt(key, value)?,
            "T" => self.t_end = num(key, value)?,
            "N" => self.particles = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "bin" => self.bin = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "C_min" => self.c_min = num(key, value)?,
            "C_max" => self.c_max = num(key, value)?,
            "l_min" => self.l_min = num(key, value)?,
            "l_max" => self.l_max = num(key, value)?,
            "C_res" => self.c_res = num(key, value)?,
            "l_res" => self.l_res = num(key, value)?,
            "exclusion" => self.exclusion = num(key, value)?,
            _ => return Err(ConfigError(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", no + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Applies the `config` object of a JSON summary.
    pub fn apply_json(&mut self, text: &str) -> Result<(), ConfigError> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("bad JSON: {e}")))?;
        let obj = doc
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| ConfigError("JSON file has no config object".into()))?;
        for (key, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => String::new(),
                other => other.to_string(),
            };
            self.set(key, &s)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        if text.trim_start().starts_with('{') {
            cfg.apply_json(&text)?;
        } else {
            cfg.apply_text(&text)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.dim == 2 || self.dim == 3) {
            return Err(ConfigError(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        for (name, v) in [
            ("C", self.c),
            ("l", self.l),
            ("k", self.k),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("dr", self.dr),
            ("T", self.t_end),
            ("bin", self.bin),
            ("C_min", self.c_min),
            ("C_max", self.c_max),
            ("l_min", self.l_min),
            ("l_max", self.l_max),
            ("exclusion", self.exclusion),
        ] {
            pos(name, v)?;
        }
        for (name, v) in [
            ("dr_coarse", self.dr_coarse),
            ("rmax", self.rmax),
            ("window", self.window),
            ("dt", self.dt),
        ] {
            if let Some(v) = v {
                pos(name, v)?;
            }
        }
        for (name, v) in [
            ("N", self.particles),
            ("samples", self.samples),
            ("C_res", self.c_res),
            ("l_res", self.l_res),
        ] {
            if v == 0 {
                return Err(ConfigError(format!("{name} must be positive, got 0")));
            }
        }
        if self.pattern == Pattern::Mill && self.dim != 2 {
            return Err(ConfigError("pattern: mills are two-dimensional".into()));
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<PotentialParams, ConfigError> {
        PotentialParams::new(self.dim, self.c, self.l, self.k, self.lambda).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn motion(&self) -> Result<MotionParams, ConfigError> {
        MotionParams::new(self.alpha, self.beta).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn search(&self) -> SearchConfig {
        let dr_coarse = self.dr_coarse.unwrap_or(10.0 * self.dr);
        SearchConfig {
            dr_fine: self.dr,
            dr_coarse,
            r_max: self.rmax.unwrap_or(10.0 / self.k),
            window: self.window.unwrap_or(3.0 * dr_coarse),
            min_mill_nodes: self.min_mill_nodes,
            polish: self.polish,
        }
    }

    pub fn time_step(&self, p: &PotentialParams, m: &MotionParams) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(p, m))
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            n: self.dim,
            k: self.k,
            lambda: self.lambda,
            c_range: (self.c_min, self.c_max),
            l_range: (self.l_min, self.l_max),
            resolution: (self.c_res, self.l_res),
            pattern: self.pattern,
            motion: Some(MotionParams {
                alpha: self.alpha,
                beta: self.beta,
            }),
            exclusion: self.exclusion,
        }
    }

    /// Flat map of every key, as embedded in summaries.
    pub fn to_map(&self) -> BTreeMap<String, serde_json::Value> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nC = 1.2\n l=0.5 # trailing\npattern = mill\nrmax = 4\n\n").unwrap();
        assert_eq!(c.c, 1.2);
        assert_eq!(c.l, 0.5);
        assert_eq!(c.pattern, Pattern::Mill);
        assert_eq!(c.rmax, Some(4.0));
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("bogus = 1").unwrap_err().0.contains("bogus"));
        assert!(c.apply_text("dr = abc").unwrap_err().0.contains("dr"));
        assert!(c.apply_text("just words").is_err());
        c.apply_text("dr = 0").unwrap();
        assert!(c.validate().unwrap_err().0.contains("dr"));
    }

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("k = 1\nseed = 17\nwindow = 0.3\npattern = mill").unwrap();
        let doc = serde_json::json!({ "config": c.to_map(), "other": 1 });
        let mut d = RunConfig::default();
        d.apply_json(&doc.to_string()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn derived_defaults() {
        let c = RunConfig::default();
        let s = c.search();
        assert_eq!(s.r_max, 20.0);
        assert!((s.dr_coarse - 0.1).abs() < 1e-15);
        let p = c.potential().unwrap();
        let m = c.motion().unwrap();
        assert_eq!(c.time_step(&p, &m), 0.01);
    }
}
