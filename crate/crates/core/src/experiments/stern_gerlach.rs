//! Stern-Gerlach readout: an impulsive field-gradient coupling turns spin
//! into pointer momentum, free flight separates the beams, and each guided
//! trajectory lands in exactly one of them. The particle itself only ever has
//! a position — the binary outcome is the sign of that position — yet the
//! +-hbar/2 statistics come out Born-weighted.

use num_complex::Complex;
use serde::Serialize;

use crate::equilibrium::sample_density;
use crate::error::ExperimentError;
use crate::grid::GridSpec;
use crate::guidance::TrajectoryStatus;
use crate::propagator::{analyzer_direction, Potential, SpinCoupling, WaveField};
use crate::real::Real;
use crate::seed;
use crate::units::UnitSystem;

use super::states::polarized_packet;
use super::{
    analyzer_branch_densities, outcome_sign, overlap_mass, run_phases, OutcomeRecord, Phase,
};

#[derive(Clone, Debug, Serialize)]
pub struct SternGerlachConfig<R> {
    /// Spin amplitudes (c_plus, c_minus) in the sigma_z basis; must be
    /// normalized to 1 within 1e-10.
    pub amplitudes: (Complex<R>, Complex<R>),
    /// Analyzer axis angle in the x-z plane (0 = +z).
    pub angle: R,
    /// Field gradient b in B(x) = b x n(angle).
    pub gradient: R,
    /// Coupling duration tau (the magnet is switched on impulsively).
    pub duration: R,
    /// Field-free flight after the magnet, long enough to separate beams.
    pub flight_time: R,
    pub magnetic_moment: R,
    pub packet_width: R,
    pub grid_half_width: R,
    pub grid_points: usize,
    pub dt: R,
    pub frame_stride: usize,
    pub n: usize,
    pub seed: u64,
    pub units: UnitSystem<R>,
}

impl<R: Real> Default for SternGerlachConfig<R> {
    fn default() -> Self {
        Self {
            amplitudes: (Complex::new(R::one(), R::zero()), Complex::new(R::zero(), R::zero())),
            angle: R::zero(),
            gradient: R::of(10.0),
            duration: R::of(0.5),
            flight_time: R::of(2.0),
            magnetic_moment: R::one(),
            packet_width: R::one(),
            grid_half_width: R::of(32.0),
            grid_points: 512,
            dt: R::of(2.5e-3),
            frame_stride: 10,
            n: 10_000,
            seed: 11,
            units: UnitSystem::natural(),
        }
    }
}

impl<R: Real> SternGerlachConfig<R> {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let norm = self.amplitudes.0.norm_sqr() + self.amplitudes.1.norm_sqr();
        if (norm - R::one()).abs() > R::of(1e-10) {
            return Err(ExperimentError::InvalidConfig(format!(
                "spin amplitudes must be normalized: |c+|^2 + |c-|^2 = {}",
                norm.as_f64()
            )));
        }
        for (v, what) in [
            (self.gradient, "field gradient"),
            (self.duration, "coupling duration"),
            (self.flight_time, "flight time"),
            (self.magnetic_moment, "magnetic moment"),
            (self.packet_width, "packet width"),
        ] {
            if !(v > R::zero()) || !v.is_finite() {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{what} must be positive, got {}",
                    v.as_f64()
                )));
            }
        }
        if self.n == 0 {
            return Err(ExperimentError::InvalidConfig("ensemble must not be empty".into()));
        }
        super::whole_steps(self.duration, self.dt, "coupling duration")?;
        super::whole_steps(self.flight_time, self.dt, "flight time")?;
        Ok(())
    }

    fn id(&self) -> String {
        let words = [
            self.amplitudes.0.re.as_f64().to_bits(),
            self.amplitudes.0.im.as_f64().to_bits(),
            self.amplitudes.1.re.as_f64().to_bits(),
            self.amplitudes.1.im.as_f64().to_bits(),
            self.angle.as_f64().to_bits(),
            self.gradient.as_f64().to_bits(),
            self.duration.as_f64().to_bits(),
            self.flight_time.as_f64().to_bits(),
            self.n as u64,
            self.seed,
        ];
        format!("stern-gerlach-{:016x}", seed::hash_words(words))
    }
}

/// Quantum weight of the +1 outcome: |<+n(theta)|chi>|^2. The oracle the
/// trajectory statistics are tested against.
pub fn born_weight_plus<R: Real>(amplitudes: (Complex<R>, Complex<R>), theta: R) -> R {
    let half = theta / (R::one() + R::one());
    (amplitudes.0.scale(half.cos()) + amplitudes.1.scale(half.sin())).norm_sqr()
}

/// Run one Stern-Gerlach measurement and return the per-trajectory outcomes.
pub fn stern_gerlach<R: Real>(
    cfg: &SternGerlachConfig<R>,
) -> Result<OutcomeRecord<R>, ExperimentError> {
    cfg.validate()?;
    let units = cfg.units;
    let grid: GridSpec<R> =
        GridSpec::line(-cfg.grid_half_width, cfg.grid_half_width, cfg.grid_points)
            .map_err(ExperimentError::from)?;
    let psi0 =
        polarized_packet(&grid, cfg.amplitudes, cfg.packet_width).map_err(ExperimentError::from)?;

    let coupling = SpinCoupling::linear_gradient(
        &grid,
        0,
        cfg.gradient,
        analyzer_direction(cfg.angle),
        cfg.magnetic_moment,
        0,
    );
    let phases = [
        Phase {
            potential: Potential::free(&grid).with_coupling(coupling),
            dt: cfg.dt,
            steps: super::whole_steps(cfg.duration, cfg.dt, "coupling duration")?,
            stride: cfg.frame_stride,
        },
        Phase {
            potential: Potential::free(&grid),
            dt: cfg.dt,
            steps: super::whole_steps(cfg.flight_time, cfg.dt, "flight time")?,
            stride: cfg.frame_stride,
        },
    ];
    let (vel, final_field, t_final) =
        run_phases(WaveField::Spinor(psi0.clone()), &phases, &units, &cfg.id())?;

    // The beams must be disjoint at readout or the sign is meaningless.
    let spinor = final_field.as_spinor().expect("spin-1/2 evolution stays spinor");
    let (rho_plus, rho_minus) = analyzer_branch_densities(spinor, cfg.angle, 0)?;
    let overlap = overlap_mass(&rho_plus, &rho_minus, grid.cell_volume());
    if overlap.as_f64() > 0.01 {
        return Err(ExperimentError::UnresolvedBeams { side: 1, overlap: overlap.as_f64() });
    }

    let rho0 = psi0.probability_density();
    let samples = sample_density(&rho0, cfg.n, cfg.seed)?;
    let set = vel.ensemble(
        samples.points(),
        &[R::zero(), t_final],
        vel.default_step_dt(),
    )?;
    debug_assert!(set
        .trajectories
        .iter()
        .all(|t| matches!(t.status, TrajectoryStatus::Completed)));

    let outcomes: Vec<i8> = set
        .trajectories
        .iter()
        .map(|t| outcome_sign(t.positions[1][0]))
        .collect();
    Ok(OutcomeRecord::one_sided(cfg.angle, outcomes, cfg.seed))
}
