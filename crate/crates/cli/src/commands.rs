//! Subcommand implementations. Each writes its artifacts into `out` and
//! returns the process exit status.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use quasimorse::particles::{
    empirical_density, flock_initial, mill_initial, order_parameters, relative_l1, simulate_observed,
    EmpiricalDensity, Frame, ParticleState,
};
use quasimorse::potential::{potential_minimum, quasi_morse_d2u, quasi_morse_du, quasi_morse_u};
use quasimorse::steadystate::flock_radius_3d;
use quasimorse::sweep::Outcome;
use quasimorse::{regime, run_sweep, search_support, Error, Pattern, SteadyState};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NO_COMPACT: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;

/// Failure carrying the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: format!("i/o error: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoCompactSolution(_) => EXIT_NO_COMPACT,
            Error::BlowUp(_) => EXIT_BLOW_UP,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

fn write_json(path: &Path, v: &Value) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("summary serializes");
    s.push('\n');
    fs::write(path, s)
}

fn prepare(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure {
        code: EXIT_INVALID,
        message: format!("cannot create {}: {e}", out.display()),
    })
}

pub fn potential(cfg: &RunConfig, out: &Path) -> Result<i32, Failure> {
    cfg.validate()?;
    let p = cfg.potential()?;
    let reg = regime(&p)?;
    prepare(out)?;
    let r_end = cfg.rmax.unwrap_or(10.0 / p.k);
    let samples = 1000;
    let rows = (1..=samples).map(|i| {
        let r = r_end * i as f64 / samples as f64;
        vec![
            r,
            quasi_morse_u(&p, r).unwrap_or(f64::NAN),
            quasi_morse_du(&p, r).unwrap_or(f64::NAN),
            quasi_morse_d2u(&p, r).unwrap_or(f64::NAN),
        ]
    });
    write_csv(&out.join("potential.csv"), &["r", "U", "dU", "d2U"], rows)?;
    let r_min = if reg.unique_min { potential_minimum(&p).ok() } else { None };
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "potential",
            "status": "ok",
            "config": cfg.to_map(),
            "regime": reg,
            "r_min": r_min,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<i32, Failure> {
    cfg.validate()?;
    let p = cfg.potential()?;
    let motion = cfg.motion()?;
    let reg = regime(&p)?;
    let search = cfg.search();
    search.validate()?;
    prepare(out)?;
    let mut summary = json!({
        "command": "solve",
        "config": cfg.to_map(),
        "regime": reg,
        "search": search,
    });
    let result = search_support(&p, cfg.pattern, Some(&motion), &search);
    let sol = match result {
        Ok(s) => s,
        Err(e) => {
            let f = Failure::from(e);
            summary["status"] = json!(if f.code == EXIT_NO_COMPACT { "NoCompactSolution" } else { "error" });
            summary["message"] = json!(f.message);
            write_json(&out.join("summary.json"), &summary)?;
            return Err(f);
        }
    };
    write_csv(
        &out.join("profile.csv"),
        &["r", "rho", "conv", "target"],
        (0..sol.r.len()).map(|i| vec![sol.r[i], sol.rho[i], sol.conv[i], sol.target[i]]),
    )?;
    summary["status"] = json!("ok");
    summary["A"] = json!(reg.a_const);
    summary["region"] = json!(reg.region);
    summary["support"] = json!([sol.support.0, sol.support.1]);
    summary["mu"] = json!(sol.mu);
    summary["gamma"] = json!(sol.gamma);
    summary["e"] = json!(sol.e);
    summary["e1"] = json!(sol.e1);
    summary["e2"] = json!(sol.e2);
    summary["mass"] = json!(sol.mass);
    summary["dr"] = json!(sol.dr);
    if p.n == 3 && cfg.pattern == Pattern::Flock {
        let certs = flock_radius_3d(&p, search.r_max)?;
        summary["certificates"] = json!(certs);
    }
    summary["solution"] = serde_json::to_value(&sol).expect("state serializes");
    write_json(&out.join("summary.json"), &summary)?;
    Ok(EXIT_OK)
}

fn load_continuum(path: &Path) -> Result<SteadyState, Failure> {
    let text = fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let sol = doc
        .get("solution")
        .cloned()
        .ok_or_else(|| ConfigError(format!("{} holds no solution", path.display())))?;
    serde_json::from_value(sol).map_err(|e| Failure::from(ConfigError(format!("{}: {e}", path.display()))))
}

fn snapshot_csv(path: &Path, s: &ParticleState) -> std::io::Result<()> {
    let header: Vec<&str> = if s.dim == 2 {
        vec!["id", "x", "y", "vx", "vy"]
    } else {
        vec!["id", "x", "y", "z", "vx", "vy", "vz"]
    };
    write_csv(
        path,
        &header,
        (0..s.len()).map(|i| {
            let mut row = vec![i as f64];
            row.extend_from_slice(s.pos(i));
            row.extend_from_slice(s.vel(i));
            row
        }),
    )
}

/// Histograms averaged for the comparison.
pub const AVERAGED_SNAPSHOTS: usize = 10;

pub fn simulate(cfg: &RunConfig, out: &Path, continuum: Option<&Path>) -> Result<i32, Failure> {
    cfg.validate()?;
    let p = cfg.potential()?;
    let motion = cfg.motion()?;
    let reference = continuum.map(load_continuum).transpose()?;
    let r_min = potential_minimum(&p).map_err(|_| ConfigError("potential has no minimum to size the initial swarm".into()))?;
    let state = match cfg.pattern {
        Pattern::Flock => flock_initial(p.n, cfg.particles, 2.0 * r_min, &motion, cfg.seed)?,
        Pattern::Mill => mill_initial(cfg.particles, 0.5 * r_min, 1.5 * r_min, &motion, cfg.seed)?,
    };
    let frame = match cfg.pattern {
        Pattern::Flock => Frame::CenterOfMass,
        Pattern::Mill => Frame::Origin,
    };
    prepare(out)?;
    let snaps = out.join("snapshots");
    prepare(&snaps)?;
    let dt = cfg.time_step(&p, &motion);
    let steps = (cfg.t_end / dt).round().max(1.0) as usize;
    let every = (steps / cfg.samples).max(1);

    let mut series = Vec::new();
    let mut recent: Vec<EmpiricalDensity> = Vec::new();
    let mut io_error: Option<std::io::Error> = None;
    let mut record = |s: &ParticleState| {
        let (pol, ang) = order_parameters(s);
        series.push(json!({ "t": s.t, "polarization": pol, "angular_momentum": ang }));
        let idx = series.len() - 1;
        if let Err(e) = snapshot_csv(&snaps.join(format!("snapshot_{idx:05}.csv")), s) {
            io_error.get_or_insert(e);
        }
        if let Ok(h) = empirical_density(s, cfg.bin, frame) {
            recent.push(h);
            if recent.len() > AVERAGED_SNAPSHOTS {
                recent.remove(0);
            }
        }
    };
    record(&state);
    let result = simulate_observed(state, &p, &motion, dt, cfg.t_end, every, &mut record);
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let mut summary = json!({
        "command": "simulate",
        "config": cfg.to_map(),
        "dt": dt,
        "frame": frame,
    });
    write_json(&out.join("trajectory.json"), &json!({ "series": series }))?;
    let last = match result {
        Ok(s) => s,
        Err(e) => {
            let f = Failure::from(e);
            summary["status"] = json!(if f.code == EXIT_BLOW_UP { "BlowUp" } else { "error" });
            summary["message"] = json!(f.message);
            write_json(&out.join("summary.json"), &summary)?;
            return Err(f);
        }
    };
    let hist = EmpiricalDensity::average(&recent)?;
    write_csv(
        &out.join("empirical_density.csv"),
        &["r_lo", "r_hi", "r", "density"],
        (0..hist.centers.len()).map(|i| vec![hist.edges[i], hist.edges[i + 1], hist.centers[i], hist.density[i]]),
    )?;
    let speeds: Vec<f64> = (0..last.len())
        .map(|i| last.vel(i).iter().map(|c| c * c).sum::<f64>().sqrt())
        .collect();
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let std = (speeds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / speeds.len() as f64).sqrt();
    let (pol, ang) = order_parameters(&last);
    summary["status"] = json!("ok");
    summary["t"] = json!(last.t);
    summary["N"] = json!(last.len());
    summary["mean_speed"] = json!(mean);
    summary["speed_std"] = json!(std);
    summary["cruise_speed"] = json!(motion.cruise_speed());
    summary["polarization"] = json!(pol);
    summary["angular_momentum"] = json!(ang);
    summary["histogram_mass"] = json!(hist.mass());
    summary["snapshots_averaged"] = json!(recent.len());
    write_json(&out.join("summary.json"), &summary)?;
    if let (Some(sol), Some(path)) = (reference, continuum) {
        let l1 = relative_l1(&hist, &sol);
        write_json(
            &out.join("comparison.json"),
            &json!({
                "relative_l1": l1,
                "snapshots_averaged": recent.len(),
                "continuum": path.display().to_string(),
                "continuum_support": [sol.support.0, sol.support.1],
            }),
        )?;
    }
    Ok(EXIT_OK)
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<i32, Failure> {
    cfg.validate()?;
    let sc = cfg.sweep();
    let cells = run_sweep(&sc)?;
    prepare(out)?;
    let mut w = BufWriter::new(fs::File::create(out.join("sweep.csv"))?);
    writeln!(w, "C,l,A,region,outcome,R_m,R_M,e,concordant")?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for c in &cells {
        let region = c.region.map(|r| r.to_string()).unwrap_or_default();
        let (kind, support, e) = match &c.outcome {
            Outcome::Compact { support, e } => ("compact", Some(*support), Some(*e)),
            Outcome::NoCompactSolution => ("NoCompactSolution", None, None),
            Outcome::Excluded => ("excluded", None, None),
            Outcome::Failed { .. } => ("failed", None, None),
        };
        let conc = match c.concordant {
            Some(true) => "yes",
            Some(false) => "no",
            None => "",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt(c.c),
            fmt(c.l),
            opt(c.a_const),
            region,
            kind,
            opt(support.map(|s| s.0)),
            opt(support.map(|s| s.1)),
            opt(e),
            conc
        )?;
    }
    w.flush()?;
    let discordant = cells.iter().filter(|c| c.concordant == Some(false)).count();
    let failed = cells.iter().filter(|c| matches!(c.outcome, Outcome::Failed { .. })).count();
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "sweep",
            "status": "ok",
            "config": cfg.to_map(),
            "cells": cells.len(),
            "discordant": discordant,
            "failed": failed,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn default_out() -> PathBuf {
    PathBuf::from("out")
}
