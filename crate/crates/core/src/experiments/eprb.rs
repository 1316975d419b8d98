//! EPR-Bohm singlet pair: two particles on a shared 2D configuration grid
//! (axis 0 = particle 1's pointer, axis 1 = particle 2's), measured by
//! sequential Stern-Gerlach couplings. Outcomes are displacement signs; the
//! correlation E(a, b) lands on the singlet value -cos(a - b), equal-axis
//! settings anticorrelate perfectly, and changing one analyzer flips distant
//! trajectories even though marginal statistics stay put.

use serde::Serialize;

use crate::equilibrium::sample_density;
use crate::error::ExperimentError;
use crate::grid::{GridSpec, Point};
use crate::guidance::TrajectoryStatus;
use crate::propagator::{analyzer_direction, Potential, SpinCoupling, WaveField};
use crate::real::Real;
use crate::seed;
use crate::units::UnitSystem;

use super::states::singlet_packet;
use super::{
    analyzer_branch_densities, outcome_sign, overlap_mass, run_phases, OutcomeRecord, Phase,
};

/// One side's impulsive analyzer: field gradient and how long it acts.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AnalyzerCoupling<R> {
    pub gradient: R,
    pub duration: R,
}

/// Which analyzer couples first. Outcome statistics do not depend on this;
/// individual trajectories do.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MeasurementOrder {
    FirstThenSecond,
    SecondThenFirst,
}

#[derive(Clone, Debug, Serialize)]
pub struct EPRBConfig<R> {
    /// Analyzer angle for side 1 (x-z plane, radians, in [0, 2 pi)).
    pub angle_1: R,
    /// Analyzer angle for side 2.
    pub angle_2: R,
    pub coupling_1: AnalyzerCoupling<R>,
    pub coupling_2: AnalyzerCoupling<R>,
    /// Field-free flight after both couplings.
    pub flight_time: R,
    pub order: MeasurementOrder,
    pub magnetic_moment: R,
    pub packet_width: R,
    pub grid_half_width: R,
    /// Points per axis of the two-particle grid.
    pub grid_points: usize,
    pub dt: R,
    pub frame_stride: usize,
    pub n: usize,
    pub seed: u64,
    pub units: UnitSystem<R>,
}

impl<R: Real> Default for EPRBConfig<R> {
    fn default() -> Self {
        let coupling = AnalyzerCoupling { gradient: R::of(24.0), duration: R::of(0.25) };
        Self {
            angle_1: R::zero(),
            angle_2: R::zero(),
            coupling_1: coupling,
            coupling_2: coupling,
            flight_time: R::of(1.5),
            order: MeasurementOrder::FirstThenSecond,
            magnetic_moment: R::one(),
            packet_width: R::one(),
            grid_half_width: R::of(24.0),
            grid_points: 256,
            dt: R::of(2.5e-3),
            frame_stride: 10,
            n: 4000,
            seed: 7,
            units: UnitSystem::natural(),
        }
    }
}

impl<R: Real> EPRBConfig<R> {
    pub fn with_angles(mut self, a: R, b: R) -> Self {
        self.angle_1 = a;
        self.angle_2 = b;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let two_pi = R::PI() + R::PI();
        for (angle, side) in [(self.angle_1, 1), (self.angle_2, 2)] {
            if !(angle >= R::zero() && angle < two_pi) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "side-{side} analyzer angle must lie in [0, 2 pi), got {}",
                    angle.as_f64()
                )));
            }
        }
        for (c, side) in [(self.coupling_1, 1), (self.coupling_2, 2)] {
            if !(c.gradient > R::zero()) || !(c.duration > R::zero()) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "side-{side} coupling needs positive gradient and duration"
                )));
            }
        }
        if !(self.flight_time >= R::zero()) {
            return Err(ExperimentError::InvalidConfig("flight time must not be negative".into()));
        }
        if self.n == 0 {
            return Err(ExperimentError::InvalidConfig("ensemble must not be empty".into()));
        }
        super::whole_steps(self.coupling_1.duration, self.dt, "side-1 coupling")?;
        super::whole_steps(self.coupling_2.duration, self.dt, "side-2 coupling")?;
        if self.flight_time > R::zero() {
            super::whole_steps(self.flight_time, self.dt, "flight time")?;
        }
        Ok(())
    }

    fn id(&self) -> String {
        let words = [
            self.angle_1.as_f64().to_bits(),
            self.angle_2.as_f64().to_bits(),
            self.coupling_1.gradient.as_f64().to_bits(),
            self.coupling_1.duration.as_f64().to_bits(),
            self.coupling_2.gradient.as_f64().to_bits(),
            self.coupling_2.duration.as_f64().to_bits(),
            self.flight_time.as_f64().to_bits(),
            u64::from(self.order == MeasurementOrder::SecondThenFirst),
            self.grid_points as u64,
            self.n as u64,
            self.seed,
        ];
        format!("eprb-{:016x}", seed::hash_words(words))
    }
}

/// Analytic singlet correlation -cos(a - b): the oracle every run is tested
/// against, and the source of the perfect equal-axis anticorrelation.
pub fn singlet_correlation<R: Real>(a: R, b: R) -> R {
    -(a - b).cos()
}

/// Full per-trajectory output of one run, for callers that need positions
/// (the nonlocality probe) on top of the outcome statistics.
pub(crate) struct EprbTrajectories<R> {
    pub record: OutcomeRecord<R>,
    pub starts: Vec<Point<R>>,
    pub finals: Vec<Point<R>>,
}

pub(crate) fn eprb_trajectories<R: Real>(
    cfg: &EPRBConfig<R>,
) -> Result<EprbTrajectories<R>, ExperimentError> {
    cfg.validate()?;
    let units = cfg.units;
    let grid: GridSpec<R> =
        GridSpec::square(-cfg.grid_half_width, cfg.grid_half_width, cfg.grid_points)
            .map_err(ExperimentError::from)?;
    let psi0 = singlet_packet(&grid, cfg.packet_width).map_err(ExperimentError::from)?;

    let side_1 = Phase {
        potential: Potential::free(&grid).with_coupling(SpinCoupling::linear_gradient(
            &grid,
            0,
            cfg.coupling_1.gradient,
            analyzer_direction(cfg.angle_1),
            cfg.magnetic_moment,
            0,
        )),
        dt: cfg.dt,
        steps: super::whole_steps(cfg.coupling_1.duration, cfg.dt, "side-1 coupling")?,
        stride: cfg.frame_stride,
    };
    let side_2 = Phase {
        potential: Potential::free(&grid).with_coupling(SpinCoupling::linear_gradient(
            &grid,
            1,
            cfg.coupling_2.gradient,
            analyzer_direction(cfg.angle_2),
            cfg.magnetic_moment,
            1,
        )),
        dt: cfg.dt,
        steps: super::whole_steps(cfg.coupling_2.duration, cfg.dt, "side-2 coupling")?,
        stride: cfg.frame_stride,
    };
    let mut phases = match cfg.order {
        MeasurementOrder::FirstThenSecond => vec![side_1, side_2],
        MeasurementOrder::SecondThenFirst => vec![side_2, side_1],
    };
    if cfg.flight_time > R::zero() {
        phases.push(Phase {
            potential: Potential::free(&grid),
            dt: cfg.dt,
            steps: super::whole_steps(cfg.flight_time, cfg.dt, "flight time")?,
            stride: cfg.frame_stride,
        });
    }
    let (vel, final_field, t_final) =
        run_phases(WaveField::Spinor(psi0.clone()), &phases, &units, &cfg.id())?;

    let spinor = final_field.as_spinor().expect("pair evolution stays spinor");
    let dv = grid.cell_volume();
    for (side, angle, particle) in [(1u8, cfg.angle_1, 0usize), (2, cfg.angle_2, 1)] {
        let (rho_plus, rho_minus) = analyzer_branch_densities(spinor, angle, particle)?;
        let overlap = overlap_mass(&rho_plus, &rho_minus, dv);
        if overlap.as_f64() > 0.01 {
            return Err(ExperimentError::UnresolvedBeams { side, overlap: overlap.as_f64() });
        }
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

    let finals: Vec<Point<R>> = set.trajectories.iter().map(|t| t.positions[1]).collect();
    let outcomes_1: Vec<i8> = finals.iter().map(|p| outcome_sign(p[0])).collect();
    let outcomes_2: Vec<i8> = finals.iter().map(|p| outcome_sign(p[1])).collect();
    Ok(EprbTrajectories {
        record: OutcomeRecord::two_sided(
            (cfg.angle_1, cfg.angle_2),
            outcomes_1,
            outcomes_2,
            cfg.seed,
        ),
        starts: samples.points().to_vec(),
        finals,
    })
}

/// Run one EPRB setting pair and return the outcome record with E(a, b).
pub fn eprb_run<R: Real>(cfg: &EPRBConfig<R>) -> Result<OutcomeRecord<R>, ExperimentError> {
    Ok(eprb_trajectories(cfg)?.record)
}

/// CHSH estimate from four setting pairs sharing one base configuration.
#[derive(Clone, Debug, Serialize)]
pub struct ChshReport<R> {
    /// (a, a_alt, b, b_alt).
    pub angles: [R; 4],
    /// S = E(a,b) + E(a,b_alt) + E(a_alt,b) - E(a_alt,b_alt).
    pub s: R,
    /// Combined standard error of the four runs.
    pub se: R,
    /// Oracle value of S from -cos(a - b).
    pub predicted: R,
    pub runs: Vec<OutcomeRecord<R>>,
}

/// Estimate the CHSH quantity at settings (a, a_alt, b, b_alt). Each of the
/// four runs draws its own seed stream derived from the base seed.
pub fn chsh<R: Real>(
    base: &EPRBConfig<R>,
    angles: [R; 4],
) -> Result<ChshReport<R>, ExperimentError> {
    let [a, a_alt, b, b_alt] = angles;
    let pairs = [(a, b), (a, b_alt), (a_alt, b), (a_alt, b_alt)];
    let mut runs = Vec::with_capacity(4);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        let cfg = EPRBConfig {
            seed: seed::hash_words([base.seed, i as u64, u64::from(b'S')]),
            ..base.clone()
        }
        .with_angles(x, y);
        runs.push(eprb_run(&cfg)?);
    }
    let e = |i: usize| runs[i].correlation.expect("two-sided run has E");
    let var = |i: usize| {
        let se = runs[i].correlation_se.expect("two-sided run has se");
        se * se
    };
    let s = e(0) + e(1) + e(2) - e(3);
    let se = (var(0) + var(1) + var(2) + var(3)).sqrt();
    let predicted = singlet_correlation(a, b) + singlet_correlation(a, b_alt)
        + singlet_correlation(a_alt, b)
        - singlet_correlation(a_alt, b_alt);
    Ok(ChshReport { angles, s, se, predicted, runs })
}

/// One trajectory whose near-side outcome changed when only the distant
/// setting did.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DivergingPair<R> {
    pub index: usize,
    pub start: Point<R>,
    pub final_baseline: Point<R>,
    pub final_alternate: Point<R>,
    pub outcomes_baseline: (i8, i8),
    pub outcomes_alternate: (i8, i8),
}

/// Result of running the same ensemble against two distant settings.
#[derive(Clone, Debug, Serialize)]
pub struct NonlocalityReport<R> {
    pub near_angle: R,
    pub distant_baseline: R,
    pub distant_alternate: R,
    pub n: usize,
    pub seed: u64,
    /// How many side-1 outcomes changed, and the fraction of n.
    pub flips_1: usize,
    pub flip_fraction_1: R,
    /// Total variation between the empirical joint outcome distributions.
    pub joint_shift_empirical: R,
    /// Oracle joint shift |E(a,b) - E(a,b_alt)| / 2.
    pub joint_shift_predicted: R,
    pub sample: Vec<DivergingPair<R>>,
    #[serde(skip_serializing)]
    pub runs: (OutcomeRecord<R>, OutcomeRecord<R>),
}

fn joint_cells<R: Real>(rec: &OutcomeRecord<R>) -> [R; 4] {
    let mut counts = [0usize; 4];
    for (&o1, &o2) in rec.outcomes_1.iter().zip(&rec.outcomes_2) {
        let idx = usize::from(o1 < 0) * 2 + usize::from(o2 < 0);
        counts[idx] += 1;
    }
    let n = R::from_usize_exact(rec.n);
    counts.map(|c| R::from_usize_exact(c) / n)
}

/// Rerun the identical ensemble (same seed, same initial positions, distant
/// analyzer coupling first) with the distant setting changed from
/// `distant_baseline` to `distant_alternate`, and report how the near side
/// responds.
pub fn nonlocality_probe<R: Real>(
    base: &EPRBConfig<R>,
    distant_baseline: R,
    distant_alternate: R,
) -> Result<NonlocalityReport<R>, ExperimentError> {
    let mut cfg = base.clone();
    // The distant analyzer must act while the wave packets still share
    // support, i.e. before the near side's branches separate.
    cfg.order = MeasurementOrder::SecondThenFirst;
    let baseline = eprb_trajectories(&cfg.clone().with_angles(base.angle_1, distant_baseline))?;
    let alternate = eprb_trajectories(&cfg.with_angles(base.angle_1, distant_alternate))?;
    debug_assert_eq!(baseline.starts, alternate.starts);

    let n = baseline.record.n;
    let mut flips = 0usize;
    let mut sample = Vec::new();
    for i in 0..n {
        if baseline.record.outcomes_1[i] != alternate.record.outcomes_1[i] {
            flips += 1;
            if sample.len() < 8 {
                sample.push(DivergingPair {
                    index: i,
                    start: baseline.starts[i],
                    final_baseline: baseline.finals[i],
                    final_alternate: alternate.finals[i],
                    outcomes_baseline: (
                        baseline.record.outcomes_1[i],
                        baseline.record.outcomes_2[i],
                    ),
                    outcomes_alternate: (
                        alternate.record.outcomes_1[i],
                        alternate.record.outcomes_2[i],
                    ),
                });
            }
        }
    }

    let (p, q) = (joint_cells(&baseline.record), joint_cells(&alternate.record));
    let two = R::one() + R::one();
    let joint_shift_empirical = p
        .iter()
        .zip(&q)
        .map(|(&a, &b)| (a - b).abs())
        .sum::<R>()
        / two;
    let e0 = singlet_correlation(base.angle_1, distant_baseline);
    let e1 = singlet_correlation(base.angle_1, distant_alternate);
    let joint_shift_predicted = (e0 - e1).abs() / two;

    Ok(NonlocalityReport {
        near_angle: base.angle_1,
        distant_baseline,
        distant_alternate,
        n,
        seed: base.seed,
        flips_1: flips,
        flip_fraction_1: R::from_usize_exact(flips) / R::from_usize_exact(n),
        joint_shift_empirical,
        joint_shift_predicted,
        sample,
        runs: (baseline.record, alternate.record),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    #[test]
    fn singlet_oracle_hits_the_anchor_values() {
        assert_eq!(singlet_correlation(0.7, 0.7), -1.0);
        assert!((singlet_correlation(PI, 0.0) - 1.0).abs() < 1e-15);
        assert!((singlet_correlation(FRAC_PI_3, 0.0) + 0.5).abs() < 1e-15);
        assert!(singlet_correlation(FRAC_PI_2, 0.0).abs() < 1e-15);
    }

    fn quick(n: usize) -> EPRBConfig<f64> {
        EPRBConfig { n, ..EPRBConfig::default() }
    }

    #[test]
    fn equal_axes_anticorrelate_perfectly() {
        let run = eprb_run(&quick(600).with_angles(0.3, 0.3)).unwrap();
        assert_eq!(run.correlation, Some(-1.0));
        for (o1, o2) in run.outcomes_1.iter().zip(&run.outcomes_2) {
            assert_eq!(o1 * o2, -1);
        }
    }

    #[test]
    fn correlation_follows_the_singlet_oracle() {
        let run = eprb_run(&quick(2000).with_angles(0.0, FRAC_PI_3)).unwrap();
        let e = run.correlation.unwrap();
        let se = run.correlation_se.unwrap();
        assert!(
            (e - singlet_correlation(0.0, FRAC_PI_3)).abs() < 3.0 * se + 0.01,
            "E {e} vs oracle -0.5 (se {se})"
        );
    }

    #[test]
    fn measurement_order_leaves_statistics_alone() {
        let cfg = quick(1500).with_angles(0.0, FRAC_PI_3);
        let first = eprb_run(&cfg).unwrap();
        let swapped = eprb_run(&EPRBConfig {
            order: MeasurementOrder::SecondThenFirst,
            ..cfg
        })
        .unwrap();
        let (e1, e2) = (first.correlation.unwrap(), swapped.correlation.unwrap());
        assert!((e1 - e2).abs() < 0.1, "order changed E: {e1} vs {e2}");
    }

    #[test]
    fn unchanged_distant_setting_reproduces_bitwise() {
        let report = nonlocality_probe(&quick(400), FRAC_PI_3, FRAC_PI_3).unwrap();
        assert_eq!(report.flips_1, 0);
        assert_eq!(report.joint_shift_empirical, 0.0);
        for pair in &report.sample {
            panic!("no diverging pairs expected, got {pair:?}");
        }
    }

    #[test]
    fn changing_the_distant_setting_flips_near_outcomes() {
        let report = nonlocality_probe(&quick(800), FRAC_PI_3, FRAC_PI_3 + FRAC_PI_2).unwrap();
        assert!(report.flips_1 > 0, "no near-side flips at all");
        assert!(!report.sample.is_empty());
        assert!(
            (report.joint_shift_empirical - report.joint_shift_predicted).abs() < 0.05,
            "joint shift {} vs predicted {}",
            report.joint_shift_empirical,
            report.joint_shift_predicted
        );
        // Marginal side-1 statistics stay put (no signaling).
        let (ref a, ref b) = report.runs;
        assert!((a.fraction_plus_1 - b.fraction_plus_1).abs() < 0.1);
    }

    #[test]
    fn angles_outside_the_window_are_rejected()
    {
        let cfg = quick(10).with_angles(-0.1, 0.0);
        assert!(matches!(
            eprb_run(&cfg),
            Err(ExperimentError::InvalidConfig(_))
        ));
    }
}
