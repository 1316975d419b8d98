//! `double-slit`: two-packet interference with guided arrivals.

use pilotwave::{double_slit, DoubleSlitConfig, GridSpec64, UnitSystem64};

use crate::config::ConfigMap;
use crate::errors::CliError;
use crate::output::fmt_f64;
use crate::render;

use super::{finalize_config, grid_json, units_json};

pub const KEYS: &[(&str, &str, &str)] = &[
    ("separation", "16", "slit separation (packet centers at +-separation/2)"),
    ("width", "1", "width of each slit's Gaussian"),
    ("wavenumber", "20", "forward carrier wavenumber (sets screen distance)"),
    ("flight_time", "48", "transverse flight time to the screen"),
    ("half_width", "192", "grid spans [-half_width, half_width)"),
    ("points", "1024", "grid points (power of two)"),
    ("dt", "0.25", "frame spacing of the stored free evolution"),
    ("stride", "1", "store a frame every this many steps"),
    ("bins", "512", "arrival histogram bins"),
    ("n", "100000", "number of trajectories"),
    ("seed", "5", "master seed for initial-position sampling"),
    ("hbar", "1", "reduced Planck constant"),
    ("mass", "1", "particle mass"),
];

pub fn run(cfg: &mut ConfigMap) -> Result<(), CliError> {
    let defaults = DoubleSlitConfig::<f64>::default();
    let slit = DoubleSlitConfig {
        separation: cfg.get_f64("separation", defaults.separation)?,
        packet_width: cfg.get_f64("width", defaults.packet_width)?,
        forward_wavenumber: cfg.get_f64("wavenumber", defaults.forward_wavenumber)?,
        flight_time: cfg.get_f64("flight_time", defaults.flight_time)?,
        grid_half_width: cfg.get_f64("half_width", defaults.grid_half_width)?,
        grid_points: cfg.get_pow2("points", defaults.grid_points)?,
        dt: cfg.get_f64("dt", defaults.dt)?,
        frame_stride: cfg.get_usize("stride", defaults.frame_stride)?,
        arrival_bins: cfg.get_usize("bins", defaults.arrival_bins)?,
        n: cfg.get_usize("n", defaults.n)?,
        seed: cfg.get_u64("seed", defaults.seed)?,
        units: UnitSystem64::new(
            cfg.get_f64("hbar", 1.0)?,
            cfg.get_f64("mass", 1.0)?,
        )?,
    };
    let grid = GridSpec64::line(-slit.grid_half_width, slit.grid_half_width, slit.grid_points)?;
    let setup = finalize_config(
        cfg,
        "double-slit",
        Some(slit.seed),
        grid_json(&grid),
        units_json(&slit.units),
    )?;
    let (mut out, render_on) = (setup.out, setup.render);

    let report = double_slit(&slit)?;

    // Start and arrival of every trajectory, in the trajectory CSV schema.
    let t_final = slit.flight_time;
    let rows = report
        .initial_positions
        .iter()
        .zip(&report.arrivals)
        .enumerate()
        .flat_map(|(id, (&x0, &x1))| {
            [
                vec![id.to_string(), fmt_f64(0.0), fmt_f64(x0)],
                vec![id.to_string(), fmt_f64(t_final), fmt_f64(x1)],
            ]
        });
    out.write_csv("trajectories.csv", &["trajectory_id", "t", "x"], rows)?;
    out.write_json("summary.json", &report)?;

    if render_on {
        let curve = |h: &pilotwave::HistogramDensity<f64>| -> Vec<(f64, f64)> {
            let edges = &h.edges()[0];
            h.masses()
                .iter()
                .enumerate()
                .map(|(i, &m)| (0.5 * (edges[i] + edges[i + 1]), m))
                .collect()
        };
        let img = render::polylines(
            &[curve(&report.arrival_histogram), curve(&report.target_histogram)],
            800,
            480,
        );
        out.write_bytes("pattern.png", &img.encode_png()?)?;
    }
    out.finish(&setup.head)
}
