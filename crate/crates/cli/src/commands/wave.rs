//! Single-packet wave subcommands: `evolve` (propagate and dump the field),
//! `trajectories` (guided paths through the stored evolution), and
//! `equivariance` (transported-ensemble vs |psi|^2 check).

use pilotwave::experiments::states::gaussian_packet;
use pilotwave::{
    equivariance_report, evolve, integrate_ensemble, sample_density, EvolutionRecord, GridSpec64,
    Potential, PropagatorConfig, RealField, TrajectoryStatus, UnitSystem64, WaveField,
};
use serde::Serialize;

use crate::config::ConfigMap;
use crate::errors::CliError;
use crate::output::fmt_f64;
use crate::render;

use super::{finalize_config, grid_json, units_json};

pub const EVOLVE_KEYS: &[(&str, &str, &str)] = &[
    ("half_width", "16", "grid spans [-half_width, half_width)"),
    ("points", "256", "grid points (power of two)"),
    ("center", "0", "initial packet center"),
    ("width", "1", "initial packet position spread"),
    ("wavenumber", "0", "initial carrier wavenumber"),
    ("potential", "free", "external potential: free | harmonic"),
    ("omega", "1", "harmonic angular frequency (potential = harmonic)"),
    ("dt", "0.001", "propagation time step"),
    ("steps", "1000", "number of steps"),
    ("stride", "10", "store a frame every this many steps"),
    ("hbar", "1", "reduced Planck constant"),
    ("mass", "1", "particle mass"),
];

pub const TRAJECTORIES_KEYS: &[(&str, &str, &str)] = &[
    ("n", "200", "number of trajectories"),
    ("seed", "7", "master seed for initial-position sampling"),
    ("step_dt", "dt*stride/4", "trajectory integrator micro-step"),
];

pub const EQUIVARIANCE_KEYS: &[(&str, &str, &str)] = &[
    ("n", "10000", "ensemble size"),
    ("seed", "21", "master seed for initial-position sampling"),
    ("times", "final frame", "comma-separated report times"),
];

/// Everything the shared wave-packet evolution needs, parsed up front so
/// configuration errors surface before any computation starts.
struct WaveParams {
    grid: GridSpec64,
    units: UnitSystem64,
    center: f64,
    width: f64,
    wavenumber: f64,
    potential: String,
    omega: f64,
    prop: PropagatorConfig<f64>,
}

fn parse_wave(cfg: &mut ConfigMap) -> Result<WaveParams, CliError> {
    let half_width = cfg.get_f64("half_width", 16.0)?;
    let points = cfg.get_pow2("points", 256)?;
    let center = cfg.get_f64("center", 0.0)?;
    let width = cfg.get_f64("width", 1.0)?;
    let wavenumber = cfg.get_f64("wavenumber", 0.0)?;
    let potential = cfg.get_str("potential", "free")?;
    let omega = cfg.get_f64("omega", 1.0)?;
    let dt = cfg.get_f64("dt", 1e-3)?;
    let steps = cfg.get_usize("steps", 1000)?;
    let stride = cfg.get_usize("stride", 10)?;
    let hbar = cfg.get_f64("hbar", 1.0)?;
    let mass = cfg.get_f64("mass", 1.0)?;

    if !matches!(potential.as_str(), "free" | "harmonic") {
        return Err(CliError::TypeError {
            key: "potential".into(),
            line: None,
            message: format!("expected `free` or `harmonic`, got `{potential}`"),
        });
    }

    Ok(WaveParams {
        grid: GridSpec64::line(-half_width, half_width, points)?,
        units: UnitSystem64::new(hbar, mass)?,
        center,
        width,
        wavenumber,
        potential,
        omega,
        prop: PropagatorConfig {
            dt,
            steps,
            frame_stride: stride,
        },
    })
}

/// The evolved record plus the state it started from.
struct WaveRun {
    record: EvolutionRecord<f64>,
    initial: WaveField<f64>,
}

fn run_wave(p: &WaveParams) -> Result<WaveRun, CliError> {
    let psi0: WaveField<f64> =
        gaussian_packet(&p.grid, p.center, p.width, p.wavenumber)?.into();
    let pot = match p.potential.as_str() {
        "free" => Potential::free(&p.grid),
        _ => {
            let mass = p.units.mass;
            let v: Vec<f64> = (0..p.grid.len())
                .map(|j| {
                    let x = p.grid.point(j)[0];
                    0.5 * mass * p.omega * p.omega * x * x
                })
                .collect();
            Potential::new(RealField::new(p.grid.clone(), v)?)
        }
    };
    let record =
        evolve(&psi0, &pot, &p.prop, &p.units).map_err(|abort| CliError::from(abort.error))?;
    Ok(WaveRun {
        record,
        initial: psi0,
    })
}

fn density_rows(record: &EvolutionRecord<f64>) -> Vec<Vec<f64>> {
    record
        .frames()
        .iter()
        .map(|f| f.field.probability_density().values().to_vec())
        .collect()
}

#[derive(Serialize)]
struct EvolveSummary {
    frames: usize,
    t_final: f64,
    max_norm_drift: f64,
    energy_initial: f64,
    energy_final: f64,
    source_id: String,
}

pub fn run_evolve(cfg: &mut ConfigMap) -> Result<(), CliError> {
    let params = parse_wave(cfg)?;
    let setup = finalize_config(
        cfg,
        "evolve",
        None,
        grid_json(&params.grid),
        units_json(&params.units),
    )?;
    let (mut out, render_on) = (setup.out, setup.render);

    let run = run_wave(&params)?;
    let record = &run.record;

    let last = record.frames().last().expect("evolution stores frames");
    let rows = match &last.field {
        WaveField::Scalar(f) => {
            let grid = f.grid();
            f.values()
                .iter()
                .enumerate()
                .map(|(j, c)| vec![fmt_f64(grid.point(j)[0]), fmt_f64(c.re), fmt_f64(c.im)])
                .collect::<Vec<_>>()
        }
        WaveField::Spinor(_) => unreachable!("evolve builds scalar packets"),
    };
    out.write_csv("field.csv", &["x", "re", "im"], rows)?;

    let norm_rows = record
        .frame_times()
        .iter()
        .zip(record.norms())
        .map(|(&t, &n)| vec![fmt_f64(t), fmt_f64(n)])
        .collect::<Vec<_>>();
    out.write_csv("norms.csv", &["t", "norm"], norm_rows)?;

    let summary = EvolveSummary {
        frames: record.frames().len(),
        t_final: last.time,
        max_norm_drift: record
            .norms()
            .iter()
            .map(|n| (n - 1.0).abs())
            .fold(0.0, f64::max),
        energy_initial: record.energies()[0],
        energy_final: *record.energies().last().unwrap(),
        source_id: record.id().to_string(),
    };
    out.write_json("summary.json", &summary)?;

    if render_on {
        let img = render::heatmap_rows(&density_rows(record), 2);
        out.write_bytes("density.png", &img.encode_png()?)?;
    }
    out.finish(&setup.head)
}

#[derive(Serialize)]
struct TrajectorySummary {
    n: usize,
    seed: u64,
    stalled: usize,
    escaped: usize,
    source_id: String,
}

pub fn run_trajectories(cfg: &mut ConfigMap) -> Result<(), CliError> {
    let params = parse_wave(cfg)?;
    let n = cfg.get_usize("n", 200)?;
    let seed = cfg.get_u64("seed", 7)?;
    let frame_dt = params.prop.dt * params.prop.frame_stride as f64;
    let step_dt = cfg.get_f64("step_dt", frame_dt / 4.0)?;
    let setup = finalize_config(
        cfg,
        "trajectories",
        Some(seed),
        grid_json(&params.grid),
        units_json(&params.units),
    )?;
    let (mut out, render_on) = (setup.out, setup.render);

    let run = run_wave(&params)?;
    let record = &run.record;

    let rho0 = run.initial.probability_density();
    let samples = sample_density(&rho0, n, seed)?;
    let times = record.frame_times();
    let set = integrate_ensemble(samples.points(), record, &params.units, step_dt, &times)?;

    let rows = set.trajectories.iter().enumerate().flat_map(|(id, traj)| {
        traj.times
            .iter()
            .zip(&traj.positions)
            .map(move |(&t, p)| vec![id.to_string(), fmt_f64(t), fmt_f64(p[0])])
    });
    out.write_csv("trajectories.csv", &["trajectory_id", "t", "x"], rows)?;

    let summary = TrajectorySummary {
        n,
        seed,
        stalled: set
            .trajectories
            .iter()
            .filter(|t| matches!(t.status, TrajectoryStatus::NodeStalled { .. }))
            .count(),
        escaped: set
            .trajectories
            .iter()
            .filter(|t| matches!(t.status, TrajectoryStatus::Escaped { .. }))
            .count(),
        source_id: set.source_id.clone(),
    };
    out.write_json("summary.json", &summary)?;

    if render_on {
        let series: Vec<Vec<(f64, f64)>> = set
            .trajectories
            .iter()
            .map(|traj| {
                traj.times
                    .iter()
                    .zip(&traj.positions)
                    .map(|(&t, p)| (t, p[0]))
                    .collect()
            })
            .collect();
        let img = render::polylines(&series, 640, 480);
        out.write_bytes("trajectories.png", &img.encode_png()?)?;
    }
    out.finish(&setup.head)
}

pub fn run_equivariance(cfg: &mut ConfigMap) -> Result<(), CliError> {
    let params = parse_wave(cfg)?;
    let n = cfg.get_usize("n", 10_000)?;
    let seed = cfg.get_u64("seed", 21)?;
    let t_final = params.prop.dt * params.prop.steps as f64;
    let times = cfg.get_f64_list("times", &[t_final])?;
    let setup = finalize_config(
        cfg,
        "equivariance",
        Some(seed),
        grid_json(&params.grid),
        units_json(&params.units),
    )?;
    let (mut out, render_on) = (setup.out, setup.render);

    let run = run_wave(&params)?;
    let report = equivariance_report(&run.initial, &run.record, n, seed, &times, &params.units)?;

    let rows = report
        .times
        .iter()
        .zip(&report.tv)
        .map(|(&t, &tv)| vec![fmt_f64(t), fmt_f64(tv)])
        .collect::<Vec<_>>();
    out.write_csv("tv.csv", &["t", "tv"], rows)?;
    out.write_json("summary.json", &report)?;

    if render_on {
        let img = render::heatmap_rows(&density_rows(&run.record), 2);
        out.write_bytes("density.png", &img.encode_png()?)?;
    }
    out.finish(&setup.head)
}
