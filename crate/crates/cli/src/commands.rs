//! Implementations of the six subcommands.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rabinovich_core::field::{assemble_rhs, Mode, PerturbationSpec, ScalarField};
use rabinovich_core::integrator::{fmt_g17, integrate, IntegratorConfig, Trajectory};
use rabinovich_core::linalg::Vec3;
use rabinovich_core::orbit::{detect_period, monodromy, solve_fiber_point, Orbit};
use rabinovich_core::rabinovich::{
    classify_equilibrium, classify_level_pair, equilibrium_point, fiber_seed, make_context,
    matching_regions, Family, LevelPair, SystemParams,
};
use rabinovich_core::report::{run_experiment_with_trajectory, ExperimentSpec};

use crate::config::{OutputFormat, RunConfig};
use crate::CliError;

fn numeric<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numeric(e.to_string())
}

fn write_output(path: Option<&str>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::Numeric(format!("cannot write {p}: {e}"))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Numeric(format!("stdout: {e}"))),
    }
}

/// JSON export schema for trajectories.
#[derive(Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
}

#[derive(Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl TrajectoryRecord {
    fn from_trajectory(traj: &Trajectory) -> Self {
        TrajectoryRecord {
            samples: traj
                .samples()
                .iter()
                .map(|s| TrajectorySample {
                    t: s.t,
                    x: s.state.x,
                    y: s.state.y,
                    z: s.state.z,
                    h: s.energy,
                    c: s.casimir,
                })
                .collect(),
        }
    }
}

fn render_trajectory(traj: &Trajectory, format: OutputFormat) -> Result<Vec<u8>, CliError> {
    match format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)
                .map_err(|e| CliError::Numeric(format!("render: {e}")))?;
            Ok(buf)
        }
        OutputFormat::Json => {
            let record = TrajectoryRecord::from_trajectory(traj);
            let mut text = serde_json::to_string_pretty(&record)
                .map_err(|e| CliError::Numeric(format!("render: {e}")))?;
            text.push('\n');
            Ok(text.into_bytes())
        }
    }
}

fn auto_seed_state(cfg: &RunConfig) -> Result<Vec3, CliError> {
    let p = SystemParams::new(cfg.beta);
    let lp = LevelPair::new(
        cfg.h.expect("validated: auto_seed has h"),
        cfg.c.expect("validated: auto_seed has c"),
    );
    let seed = fiber_seed(lp, p).ok_or_else(|| {
        CliError::Numeric(format!("fiber of (h, c) = ({}, {}) is empty", lp.h, lp.c))
    })?;
    Ok(solve_fiber_point(lp, p, seed).map_err(numeric)?.state)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let p = SystemParams::new(cfg.beta);
    let ctx = make_context(p);
    let spec = cfg.perturbation();
    let icfg = cfg.integrator();

    let start = match cfg.u0_vec() {
        Some(u) => u,
        None => auto_seed_state(cfg)?,
    };

    // With a target fiber available, run through the experiment machinery
    // so a convergence verdict comes out as well.
    let with_verdict = cfg.mode != Mode::None && cfg.h.is_some() && cfg.c.is_some();
    let (traj, summary) = if with_verdict {
        let lp = LevelPair::new(cfg.h.unwrap(), cfg.c.unwrap());
        match reference_orbit(lp, p, &icfg) {
            Ok(orbit) => {
                let offset = start - orbit.samples[0];
                let ex = ExperimentSpec {
                    params: p,
                    perturbation: spec.clone(),
                    orbit,
                    offset,
                    t_end: cfg.t_end,
                    cfg: icfg,
                };
                let (traj, record, verdict) =
                    run_experiment_with_trajectory(&ex).map_err(numeric)?;
                let line = format!(
                    "mode {:?}: verdict {verdict}, final_dist {:.6e}, drift_H {:.6e}, drift_C {:.6e}",
                    cfg.mode, record.final_dist(), record.drift_h, record.drift_c
                );
                (traj, line)
            }
            Err(e) => {
                eprintln!("note: no reference orbit on the target fiber ({e}); plain run");
                plain_run(&spec, &ctx, start, cfg, &icfg)?
            }
        }
    } else {
        plain_run(&spec, &ctx, start, cfg, &icfg)?
    };

    let bytes = render_trajectory(&traj, cfg.format)?;
    write_output(cfg.output.as_deref(), &bytes)?;
    eprintln!("{summary}");
    Ok(())
}

fn plain_run(
    spec: &PerturbationSpec,
    ctx: &rabinovich_core::field::FieldContext,
    start: Vec3,
    cfg: &RunConfig,
    icfg: &IntegratorConfig,
) -> Result<(Trajectory, String), CliError> {
    let field = assemble_rhs(spec, ctx).map_err(|e| CliError::Config(e.to_string()))?;
    let traj = integrate(&field, start, cfg.t_end, icfg).map_err(numeric)?;
    let h0 = traj.first().energy;
    let c0 = traj.first().casimir;
    let (mut dh, mut dc) = (0.0f64, 0.0f64);
    for s in traj.samples() {
        dh = dh.max((s.energy - h0).abs());
        dc = dc.max((s.casimir - c0).abs());
    }
    let line = format!(
        "mode {:?}: {} samples to t = {}, drift_H {:.6e}, drift_C {:.6e}, termination {:?}",
        cfg.mode,
        traj.samples().len(),
        traj.end_time(),
        dh,
        dc,
        traj.termination()
    );
    Ok((traj, line))
}

fn reference_orbit(
    lp: LevelPair,
    p: SystemParams,
    icfg: &IntegratorConfig,
) -> Result<Orbit, CliError> {
    let seed = fiber_seed(lp, p)
        .ok_or_else(|| CliError::Numeric(format!("fiber of ({}, {}) is empty", lp.h, lp.c)))?;
    let fp = solve_fiber_point(lp, p, seed).map_err(numeric)?;
    detect_period(&fp, p, icfg).map_err(numeric)
}

pub fn cmd_classify(h: f64, c: f64, beta: f64) -> Result<(), CliError> {
    let p = SystemParams::new(beta);
    let region = classify_level_pair(LevelPair::new(h, c), p);
    if region.is_listed() {
        println!("{} {}", region.case_path(), region.sigma_label());
    } else {
        println!("{}", region.case_path());
    }
    Ok(())
}

pub fn cmd_orbit(
    beta: f64,
    h: f64,
    c: f64,
    rtol: f64,
    atol: f64,
    out: Option<&str>,
) -> Result<(), CliError> {
    let p = SystemParams::new(beta);
    let icfg = IntegratorConfig::with_tolerances(rtol, atol);
    let orbit = reference_orbit(LevelPair::new(h, c), p, &icfg)?;
    let mut text = orbit.to_json();
    text.push('\n');
    write_output(out, text.as_bytes())?;
    eprintln!(
        "orbit on (h, c) = ({h}, {c}): period {}, component {:?}",
        fmt_g17(orbit.period),
        orbit.component
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_floquet(
    orbit_path: &Path,
    mode: Mode,
    gain_a: f64,
    gain_b: f64,
    rtol: f64,
    atol: f64,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(orbit_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", orbit_path.display()))
    })?;
    let orbit = Orbit::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", orbit_path.display())))?;
    if !(gain_a > 0.0 && gain_b > 0.0) {
        return Err(CliError::Config("gains must be strictly positive".into()));
    }

    let p = orbit.params;
    let ctx = make_context(p);
    let spec = PerturbationSpec {
        mode,
        h: Some(orbit.level.h),
        c: Some(orbit.level.c),
        gain_a: ScalarField::constant(gain_a),
        gain_b: ScalarField::constant(gain_b),
    };
    let field = assemble_rhs(&spec, &ctx).map_err(|e| CliError::Config(e.to_string()))?;
    let icfg = IntegratorConfig::with_tolerances(rtol, atol);
    let result = monodromy(&orbit, &field, &icfg).map_err(numeric)?;

    #[derive(Serialize)]
    struct FloquetOut {
        mode: Mode,
        multipliers: Vec<[f64; 2]>,
        det: f64,
        div_integral: f64,
        closure_residual: f64,
    }
    let out = FloquetOut {
        mode,
        multipliers: result.multipliers.iter().map(|l| [l.re, l.im]).collect(),
        det: result.det,
        div_integral: result.div_integral,
        closure_residual: result.closure_residual,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
    Ok(())
}

pub fn cmd_equilibria(beta: f64, m_values: &[f64]) -> Result<(), CliError> {
    let p = SystemParams::new(beta);
    println!("family,m,x,y,z,stability");
    for family in [Family::E1, Family::E2, Family::E3] {
        for &m in m_values {
            let point = equilibrium_point(family, m, p);
            let verdict = classify_equilibrium(point, p).ok_or_else(|| {
                CliError::Numeric(format!("{family:?} member at m = {m} not recognized"))
            })?;
            println!(
                "{:?},{},{},{},{},{}",
                family,
                fmt_g17(m),
                fmt_g17(point.x),
                fmt_g17(point.y),
                fmt_g17(point.z),
                verdict.stability
            );
        }
    }
    Ok(())
}

pub struct SweepGrid {
    pub beta: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub n: usize,
}

pub fn cmd_sweep(
    grid: &SweepGrid,
    check_fibers: bool,
    out: Option<&str>,
) -> Result<(), CliError> {
    if grid.n < 2 {
        return Err(CliError::Config("sweep needs n >= 2".into()));
    }
    if !(grid.h_min < grid.h_max && grid.c_min < grid.c_max) {
        return Err(CliError::Config("sweep bounds must be ordered".into()));
    }
    let p = SystemParams::new(grid.beta);
    let mut csv = String::from("h,c,case_path\n");
    let mut listed = 0usize;
    let mut violations = 0usize;
    let mut worst_residual = 0.0f64;

    for i in 0..grid.n {
        for j in 0..grid.n {
            let h = grid.h_min + (grid.h_max - grid.h_min) * i as f64 / (grid.n - 1) as f64;
            let c = grid.c_min + (grid.c_max - grid.c_min) * j as f64 / (grid.n - 1) as f64;
            let lp = LevelPair::new(h, c);
            let matches = matching_regions(lp, p);
            if matches.len() > 1 {
                violations += 1;
            }
            let region = classify_level_pair(lp, p);
            if region.is_listed() {
                listed += 1;
                if check_fibers {
                    let seed = fiber_seed(lp, p).ok_or_else(|| {
                        CliError::Numeric(format!("listed cell ({h}, {c}) has empty fiber"))
                    })?;
                    let fp = solve_fiber_point(lp, p, seed).map_err(numeric)?;
                    worst_residual = worst_residual.max(fp.residual_h.max(fp.residual_c));
                }
            }
            csv.push_str(&format!(
                "{},{},{}\n",
                fmt_g17(h),
                fmt_g17(c),
                region.case_path()
            ));
        }
    }
    write_output(out, csv.as_bytes())?;
    let mut summary = format!(
        "cells {}, listed {}, outside {}, disjointness_violations {}",
        grid.n * grid.n,
        listed,
        grid.n * grid.n - listed,
        violations
    );
    if check_fibers {
        summary.push_str(&format!(", worst_fiber_residual {worst_residual:.3e}"));
    }
    eprintln!("{summary}");
    if violations > 0 {
        return Err(CliError::Numeric(format!(
            "{violations} grid cells matched more than one region"
        )));
    }
    Ok(())
}
