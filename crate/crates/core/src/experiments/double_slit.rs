//! Two-slit interference in the standard desk-scale idealization: the slits
//! prepare a symmetric superposition of two transverse Gaussians, the state
//! flies freely for a fixed time, and each particle's arrival position is
//! read off its guided trajectory. Which slit a particle "went through" is
//! its initial transverse sign, and arrivals avoid the interference nodes.

use serde::Serialize;

use crate::equilibrium::{
    bin_density, histogram, total_variation, uniform_edges, HistogramDensity, SampleSet,
};
use crate::error::ExperimentError;
use crate::grid::GridSpec;
use crate::guidance::{integrate_ensemble, TrajectoryStatus};
use crate::propagator::{evolve, EvolutionRecord, Potential, PropagatorConfig, WaveField};
use crate::real::Real;
use crate::seed;
use crate::units::UnitSystem;

use super::states::two_slit_superposition;

/// Two-slit run parameters. The transverse coordinate is simulated on a 1D
/// grid; the forward motion enters only through the flight time (and the
/// carrier wavenumber, reported as an equivalent screen distance).
#[derive(Clone, Debug, Serialize)]
pub struct DoubleSlitConfig<R> {
    /// Slit separation d (centers of the two Gaussians sit at +-d/2).
    pub separation: R,
    /// Width sigma of each slit's Gaussian.
    pub packet_width: R,
    /// Forward carrier wavenumber k; fixes the equivalent screen distance
    /// hbar k T / m but does not enter the transverse dynamics.
    pub forward_wavenumber: R,
    /// Transverse flight time T to the screen.
    pub flight_time: R,
    pub grid_half_width: R,
    pub grid_points: usize,
    /// Propagation step; free evolution is exact at any step, so this only
    /// sets the frame spacing the trajectory integrator interpolates over.
    pub dt: R,
    pub frame_stride: usize,
    /// Bins of the arrival histogram. Fine enough that the bins flanking a
    /// node sit inside the quadratic trough of the fringe (~25 bins per
    /// fringe at the default geometry); coarser bins pick up the shoulders
    /// and blur the node contrast.
    pub arrival_bins: usize,
    pub n: usize,
    pub seed: u64,
    pub units: UnitSystem<R>,
}

impl<R: Real> Default for DoubleSlitConfig<R> {
    fn default() -> Self {
        Self {
            separation: R::of(16.0),
            packet_width: R::one(),
            forward_wavenumber: R::of(20.0),
            flight_time: R::of(48.0),
            grid_half_width: R::of(192.0),
            grid_points: 1024,
            dt: R::of(0.25),
            frame_stride: 1,
            arrival_bins: 512,
            n: 100_000,
            seed: 5,
            units: UnitSystem::natural(),
        }
    }
}

impl<R: Real> DoubleSlitConfig<R> {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let four = R::of(4.0);
        if !(self.separation > four * self.packet_width) {
            return Err(ExperimentError::InvalidConfig(format!(
                "slits are unresolvable: separation {} must exceed 4 x width {}",
                self.separation.as_f64(),
                self.packet_width.as_f64()
            )));
        }
        if !(self.flight_time > R::zero()) {
            return Err(ExperimentError::InvalidConfig("flight time must be positive".into()));
        }
        if !(self.forward_wavenumber > R::zero()) {
            return Err(ExperimentError::InvalidConfig(
                "forward wavenumber must be positive".into(),
            ));
        }
        if self.n == 0 {
            return Err(ExperimentError::InvalidConfig("ensemble must not be empty".into()));
        }
        let steps = (self.flight_time / self.dt).as_f64().round();
        if steps < 1.0
            || ((self.dt * R::of(steps) - self.flight_time) / self.flight_time)
                .abs()
                .as_f64()
                > 1e-9
        {
            return Err(ExperimentError::InvalidConfig(format!(
                "flight time {} is not a whole number of steps of dt {}",
                self.flight_time.as_f64(),
                self.dt.as_f64()
            )));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.flight_time / self.dt).as_f64().round() as usize
    }

    fn id(&self) -> String {
        let words = [
            self.separation.as_f64().to_bits(),
            self.packet_width.as_f64().to_bits(),
            self.flight_time.as_f64().to_bits(),
            self.dt.as_f64().to_bits(),
            self.grid_half_width.as_f64().to_bits(),
            self.grid_points as u64,
            self.n as u64,
            self.seed,
        ];
        format!("double-slit-{:016x}", seed::hash_words(words))
    }
}

/// Everything a two-slit run produces: arrivals with their slit labels, the
/// fringe geometry read off |psi_T|^2, and the arrival/target histograms.
#[derive(Clone, Debug, Serialize)]
pub struct DoubleSlitReport<R> {
    pub config: DoubleSlitConfig<R>,
    /// Final transverse position per trajectory.
    #[serde(skip_serializing)]
    pub arrivals: Vec<R>,
    #[serde(skip_serializing)]
    pub initial_positions: Vec<R>,
    /// Which slit each trajectory passed through: the sign of its start.
    #[serde(skip_serializing)]
    pub slit_labels: Vec<i8>,
    /// Far-field prediction 2 pi hbar T / (m d).
    pub predicted_fringe_spacing: R,
    /// Mean spacing of adjacent minima of the computed |psi_T|^2.
    pub measured_fringe_spacing: R,
    /// Interference node positions (refined minima of |psi_T|^2).
    pub node_positions: Vec<R>,
    pub arrival_histogram: HistogramDensity<R>,
    /// |psi_T|^2 integrated over the same bins.
    pub target_histogram: HistogramDensity<R>,
    /// Total variation distance between the two histograms above.
    pub tv_distance: R,
    pub peak_bin_mass: R,
    /// Largest mass among the bins bracketing any interference node.
    pub max_node_bin_mass: R,
    /// Equivalent longitudinal screen distance hbar k T / m.
    pub screen_distance: R,
    pub stalled: usize,
    /// The stored evolution, for downstream equivariance analysis.
    #[serde(skip_serializing)]
    pub record: EvolutionRecord<R>,
}

/// Local minima of `values` restricted to |x| <= window, refined by a
/// parabola through each minimum and its neighbors.
fn density_minima<R: Real>(grid: &GridSpec<R>, values: &[R], window: R) -> Vec<R> {
    let ax = grid.axis(0);
    let mut out = Vec::new();
    for j in 1..ax.points - 1 {
        let x = ax.coord(j);
        if x.abs() > window {
            continue;
        }
        let (lo, mid, hi) = (values[j - 1], values[j], values[j + 1]);
        if mid < lo && mid <= hi {
            let denom = lo - mid - mid + hi;
            let shift = if denom > R::zero() {
                let half = R::of(0.5);
                half * (lo - hi) / denom
            } else {
                R::zero()
            };
            out.push(x + shift * ax.dx());
        }
    }
    out
}

fn mean_adjacent_gap<R: Real>(positions: &[R]) -> R {
    if positions.len() < 2 {
        return R::zero();
    }
    let total = *positions.last().expect("nonempty") - positions[0];
    total / R::from_usize_exact(positions.len() - 1)
}

/// Run the two-slit experiment: prepare the superposition, fly, transport an
/// equilibrium ensemble, and analyze arrivals against the wave's own fringes.
pub fn double_slit<R: Real>(
    cfg: &DoubleSlitConfig<R>,
) -> Result<DoubleSlitReport<R>, ExperimentError> {
    cfg.validate()?;
    let units = cfg.units;
    let grid: GridSpec<R> =
        GridSpec::line(-cfg.grid_half_width, cfg.grid_half_width, cfg.grid_points)
            .map_err(ExperimentError::from)?;
    let psi0 = two_slit_superposition(&grid, cfg.separation, cfg.packet_width)
        .map_err(ExperimentError::from)?;

    let prop = PropagatorConfig {
        dt: cfg.dt,
        steps: cfg.steps(),
        frame_stride: cfg.frame_stride,
    };
    let record = evolve(&WaveField::Scalar(psi0), &Potential::free(&grid), &prop, &units)
        .map_err(|abort| ExperimentError::from(abort.error))?;
    let t_final = record
        .frames()
        .last()
        .expect("evolve stores at least the initial frame")
        .time;

    // Equilibrium ensemble transported along the guided flow.
    let rho0 = record.frames()[0].field.probability_density();
    let samples = crate::equilibrium::sample_density(&rho0, cfg.n, cfg.seed)?;
    let step_dt = (record.frames()[1].time - record.frames()[0].time) / R::of(4.0);
    let sample_times = [R::zero(), t_final];
    let set = integrate_ensemble(samples.points(), &record, &units, step_dt, &sample_times)?;

    let initial_positions: Vec<R> = samples.points().iter().map(|p| p[0]).collect();
    let slit_labels: Vec<i8> = initial_positions.iter().map(|&x| super::outcome_sign(x)).collect();
    let arrivals: Vec<R> = set.trajectories.iter().map(|t| t.positions[1][0]).collect();
    let stalled = set
        .trajectories
        .iter()
        .filter(|t| !matches!(t.status, TrajectoryStatus::Completed))
        .count();

    // Fringe geometry from the wave itself.
    let rho_t = record
        .frames()
        .last()
        .expect("final frame present")
        .field
        .probability_density();
    let dv = grid.cell_volume();
    let var: R = rho_t
        .values()
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let x = grid.point(j)[0];
            r * x * x
        })
        .sum::<R>()
        * dv;
    let window = R::of(2.5) * var.sqrt();
    let node_positions = density_minima(&grid, rho_t.values(), window);
    let measured = mean_adjacent_gap(&node_positions);
    let two_pi = R::PI() + R::PI();
    let predicted = two_pi * units.hbar * t_final / (units.mass * cfg.separation);

    // Arrival histogram vs. the binned wave density.
    let edges = vec![uniform_edges(
        -cfg.grid_half_width,
        cfg.grid_half_width,
        cfg.arrival_bins,
    )];
    let arrival_points: Vec<_> = arrivals.iter().map(|&x| [x, R::zero()]).collect();
    let arrival_set = SampleSet::from_parts(arrival_points, 1, cfg.seed, cfg.id());
    let arrival_histogram = histogram(&arrival_set, &edges)?;
    let target_histogram = bin_density(&rho_t, &edges)?;
    let tv_distance = total_variation(&arrival_histogram, &target_histogram)?;

    let peak_bin_mass = arrival_histogram
        .masses()
        .iter()
        .copied()
        .fold(R::zero(), R::max);
    let bin_w = (cfg.grid_half_width + cfg.grid_half_width) / R::from_usize_exact(cfg.arrival_bins);
    let half = R::of(0.5);
    let mut max_node_bin_mass = R::zero();
    for &node in &node_positions {
        for probe in [node - half * bin_w, node + half * bin_w] {
            let u = ((probe + cfg.grid_half_width) / bin_w).as_f64().floor();
            let b = (u.max(0.0) as usize).min(cfg.arrival_bins - 1);
            max_node_bin_mass = max_node_bin_mass.max(arrival_histogram.masses()[b]);
        }
    }

    Ok(DoubleSlitReport {
        arrivals,
        initial_positions,
        slit_labels,
        predicted_fringe_spacing: predicted,
        measured_fringe_spacing: measured,
        node_positions,
        arrival_histogram,
        target_histogram,
        tv_distance,
        peak_bin_mass,
        max_node_bin_mass,
        screen_distance: units.hbar * cfg.forward_wavenumber * t_final / units.mass,
        stalled,
        record,
        config: cfg.clone(),
    })
}
