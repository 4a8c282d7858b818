//! (C, l) phase-diagram sweeps: analytic regime label versus solver outcome.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::MotionParams;
use crate::potential::{regime, PotentialParams, Region};
use crate::steadystate::{search_support, Pattern, SearchConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub k: f64,
    pub lambda: f64,
    pub c_range: (f64, f64),
    pub l_range: (f64, f64),
    pub resolution: (usize, usize),
    pub pattern: Pattern,
    pub motion: Option<MotionParams>,
    /// Cells with `|C l^n - 1|` at most this are skipped; the solver breaks
    /// down on nearly catastrophic potentials there.
    pub exclusion: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return Err(Error::InvalidParams("empty sweep grid".into()));
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.c_range) || !ordered(self.l_range) || self.c_range.0 <= 0.0 || self.l_range.0 <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sweep ranges must be positive and ordered: C {:?}, l {:?}",
                self.c_range, self.l_range
            )));
        }
        if self.pattern == Pattern::Mill && self.motion.is_none() {
            return Err(Error::InvalidParams("mill sweep needs motion parameters".into()));
        }
        Ok(())
    }

    fn axis(range: (f64, f64), m: usize) -> Vec<f64> {
        if m == 1 {
            return vec![range.0];
        }
        (0..m)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (m - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Compact { support: (f64, f64), e: f64 },
    NoCompactSolution,
    Excluded,
    Failed { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub c: f64,
    pub l: f64,
    pub a_const: Option<f64>,
    pub region: Option<Region>,
    pub outcome: Outcome,
    /// Region I produced a compact solution, or region II / separatrix did not.
    /// `None` for excluded, non-biological or failed cells.
    pub concordant: Option<bool>,
}

/// Grid spacing tied to the shortest length scale of the cell:
/// `L = 1 / max(a, k)`, fine step `L/100`, coarse step `L/10`,
/// cutoff `10 max(1/k, 1/a)`.
pub fn cell_search_config(p: &PotentialParams, a: f64) -> SearchConfig {
    let fastest = a.max(p.k);
    let slowest = if a > 0.0 { a.min(p.k) } else { p.k };
    let len = 1.0 / fastest;
    SearchConfig {
        dr_fine: len / 100.0,
        dr_coarse: len / 10.0,
        r_max: 10.0 / slowest,
        window: 3.0 * len / 10.0,
        min_mill_nodes: crate::steadystate::DEFAULT_MIN_MILL_NODES,
        polish: false,
    }
}

pub fn solve_cell(cfg: &SweepConfig, c: f64, l: f64) -> SweepCell {
    let mut cell = SweepCell {
        c,
        l,
        a_const: None,
        region: None,
        outcome: Outcome::Excluded,
        concordant: None,
    };
    let p = match PotentialParams::new(cfg.n, c, l, cfg.k, cfg.lambda) {
        Ok(p) => p,
        Err(e) => {
            cell.outcome = Outcome::Failed { reason: e.to_string() };
            return cell;
        }
    };
    let reg = match regime(&p) {
        Ok(r) => r,
        Err(e) => {
            cell.outcome = Outcome::Failed { reason: e.to_string() };
            return cell;
        }
    };
    cell.a_const = Some(reg.a_const);
    cell.region = Some(reg.region);
    if reg.region == Region::NotBiological || (p.c_ln() - 1.0).abs() <= cfg.exclusion {
        return cell;
    }
    let sc = cell_search_config(&p, reg.a);
    cell.outcome = match search_support(&p, cfg.pattern, cfg.motion.as_ref(), &sc) {
        Ok(s) => Outcome::Compact { support: s.support, e: s.e },
        Err(Error::NoCompactSolution(_)) => Outcome::NoCompactSolution,
        Err(e) => Outcome::Failed { reason: e.to_string() },
    };
    cell.concordant = match (&cell.outcome, reg.region) {
        (Outcome::Compact { .. }, Region::I) => Some(true),
        (Outcome::Compact { .. }, _) => Some(false),
        (Outcome::NoCompactSolution, Region::I) => Some(false),
        (Outcome::NoCompactSolution, _) => Some(true),
        _ => None,
    };
    cell
}

/// Runs every cell independently; rows are ordered by C, then l.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    let cs = SweepConfig::axis(cfg.c_range, cfg.resolution.0);
    let ls = SweepConfig::axis(cfg.l_range, cfg.resolution.1);
    let cells: Vec<(f64, f64)> = cs.iter().flat_map(|&c| ls.iter().map(move |&l| (c, l))).collect();
    Ok(cells.par_iter().map(|&(c, l)| solve_cell(cfg, c, l)).collect())
}
