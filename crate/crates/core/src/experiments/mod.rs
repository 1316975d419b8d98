//! Canned, configurable experiments: double slit, Stern-Gerlach, the EPR-Bohm
//! singlet pair with CHSH statistics, a nonlocality probe, and two exact
//! enumeration checks (CHSH bound for deterministic strategies, the spin-1/2
//! additivity obstruction).
//!
//! Every experiment is a pure function of its config: fixed seed in, bitwise
//! identical outcomes out. Measurements are operationalized as position
//! readouts — a pointer packet is displaced by an impulsive spin coupling and
//! the recorded outcome is the sign of the displacement.

pub mod double_slit;
pub mod eprb;
pub mod nogo;
pub mod states;
pub mod stern_gerlach;

pub use double_slit::{double_slit, DoubleSlitConfig, DoubleSlitReport};
pub use eprb::{
    chsh, eprb_run, nonlocality_probe, singlet_correlation, AnalyzerCoupling, ChshReport,
    DivergingPair, EPRBConfig, MeasurementOrder, NonlocalityReport,
};
pub use nogo::{
    local_deterministic_chsh_bound, von_neumann_obstruction, BisectorValue, ChshEnumeration,
    ChshStrategy, SpinAssignmentRow, VonNeumannObstruction,
};
pub use stern_gerlach::{stern_gerlach, SternGerlachConfig};

use serde::Serialize;

use crate::error::{ExperimentError, PropagatorError};
use crate::field::{SpinorField, NODE_EPS};
use crate::guidance::VelocityRecord;
use crate::propagator::{spin_pairs, Potential, Stepper, WaveField};
use crate::real::Real;
use crate::units::UnitSystem;

/// Per-trajectory measurement outcomes for one run, with the derived
/// statistics. Outcomes are strictly +-1; side 2 is empty for
/// single-particle experiments.
#[derive(Clone, Debug, Serialize)]
pub struct OutcomeRecord<R> {
    /// Analyzer angles (radians, x-z plane); side 2 is None for one side.
    pub setting_1: R,
    pub setting_2: Option<R>,
    #[serde(skip_serializing)]
    pub outcomes_1: Vec<i8>,
    #[serde(skip_serializing)]
    pub outcomes_2: Vec<i8>,
    pub n: usize,
    pub seed: u64,
    pub fraction_plus_1: R,
    pub fraction_plus_2: Option<R>,
    /// E = mean of the per-trajectory outcome products (two-sided runs).
    pub correlation: Option<R>,
    pub correlation_se: Option<R>,
}

fn fraction_plus<R: Real>(outcomes: &[i8]) -> R {
    let plus = outcomes.iter().filter(|&&o| o > 0).count();
    R::from_usize_exact(plus) / R::from_usize_exact(outcomes.len())
}

impl<R: Real> OutcomeRecord<R> {
    pub(crate) fn one_sided(setting: R, outcomes: Vec<i8>, seed: u64) -> Self {
        assert!(outcomes.iter().all(|&o| o == 1 || o == -1), "outcomes must be +-1");
        let n = outcomes.len();
        let fraction = fraction_plus(&outcomes);
        Self {
            setting_1: setting,
            setting_2: None,
            outcomes_1: outcomes,
            outcomes_2: Vec::new(),
            n,
            seed,
            fraction_plus_1: fraction,
            fraction_plus_2: None,
            correlation: None,
            correlation_se: None,
        }
    }

    pub(crate) fn two_sided(
        settings: (R, R),
        outcomes_1: Vec<i8>,
        outcomes_2: Vec<i8>,
        seed: u64,
    ) -> Self {
        assert_eq!(outcomes_1.len(), outcomes_2.len());
        assert!(
            outcomes_1.iter().chain(&outcomes_2).all(|&o| o == 1 || o == -1),
            "outcomes must be +-1"
        );
        let n = outcomes_1.len();
        let rn = R::from_usize_exact(n);
        let e = outcomes_1
            .iter()
            .zip(&outcomes_2)
            .map(|(&a, &b)| R::of(f64::from(a) * f64::from(b)))
            .sum::<R>()
            / rn;
        debug_assert!(e.abs() <= R::one() + R::epsilon());
        // Products are +-1, so their sample variance is 1 - E^2.
        let se = ((R::one() - e * e) / rn).max(R::zero()).sqrt();
        Self {
            setting_1: settings.0,
            setting_2: Some(settings.1),
            fraction_plus_1: fraction_plus(&outcomes_1),
            fraction_plus_2: Some(fraction_plus(&outcomes_2)),
            outcomes_1,
            outcomes_2,
            n,
            seed,
            correlation: Some(e),
            correlation_se: Some(se),
        }
    }
}

/// One stage of a piecewise-constant-potential schedule: evolve under
/// `potential` for `steps` of `dt`, storing a velocity frame every `stride`
/// steps.
pub(crate) struct Phase<R> {
    pub potential: Potential<R>,
    pub dt: R,
    pub steps: usize,
    pub stride: usize,
}

/// Run the phase schedule, streaming velocity frames into a compact record
/// (full spinor frames on a 2D grid would not fit in memory). Returns the
/// velocity record, the final wave field, and the final time.
pub(crate) fn run_phases<R: Real>(
    psi0: WaveField<R>,
    phases: &[Phase<R>],
    units: &UnitSystem<R>,
    source_id: &str,
) -> Result<(VelocityRecord<R>, WaveField<R>, R), ExperimentError> {
    let eps = R::of(NODE_EPS);
    let mut vel = VelocityRecord::new(psi0.grid().clone(), source_id);
    vel.push_state(R::zero(), &psi0, eps, units)
        .map_err(ExperimentError::from)?;

    let mut state = psi0;
    let mut t = R::zero();
    let mut global_step = 0usize;
    for phase in phases {
        let mut stepper = Stepper::starting_at(state, &phase.potential, phase.dt, units, t)
            .map_err(ExperimentError::from)?;
        for s in 1..=phase.steps {
            stepper.step();
            global_step += 1;
            if s % phase.stride == 0 || s == phase.steps {
                if !stepper.state().is_finite() {
                    return Err(PropagatorError::NonFinite {
                        step: global_step,
                        time: stepper.time().as_f64(),
                    }
                    .into());
                }
                vel.push_state(stepper.time(), stepper.state(), eps, units)
                    .map_err(ExperimentError::from)?;
            }
        }
        t = stepper.time();
        state = stepper.into_state();
    }
    Ok((vel, state, t))
}

/// Decompose a spinor into analyzer-basis branch densities for one particle:
/// rho_plus/rho_minus are |<+-n(theta)|psi>|^2 summed over the other
/// particle's spin, one value per grid point.
pub(crate) fn analyzer_branch_densities<R: Real>(
    field: &SpinorField<R>,
    theta: R,
    particle: usize,
) -> Result<(Vec<R>, Vec<R>), ExperimentError> {
    let pairs = spin_pairs(field.num_components(), particle).map_err(ExperimentError::from)?;
    let half = theta / (R::one() + R::one());
    let (c, s) = (half.cos(), half.sin());
    let n = field.grid().len();
    let mut rho_plus = vec![R::zero(); n];
    let mut rho_minus = vec![R::zero(); n];
    for &(up, down) in &pairs {
        let (u, d) = (field.component(up), field.component(down));
        for j in 0..n {
            let plus = u[j].scale(c) + d[j].scale(s);
            let minus = d[j].scale(c) - u[j].scale(s);
            rho_plus[j] += plus.norm_sqr();
            rho_minus[j] += minus.norm_sqr();
        }
    }
    Ok((rho_plus, rho_minus))
}

/// Probability mass shared between two branch densities: integral of
/// min(rho_plus, rho_minus). Near zero once the beams have separated.
pub(crate) fn overlap_mass<R: Real>(rho_plus: &[R], rho_minus: &[R], dv: R) -> R {
    rho_plus
        .iter()
        .zip(rho_minus)
        .map(|(&p, &m)| p.min(m))
        .sum::<R>()
        * dv
}

/// Readout sign with an explicit tie-break (exact zero counts as +1; it has
/// measure zero and never occurs in practice).
pub(crate) fn outcome_sign<R: Real>(x: R) -> i8 {
    if x < R::zero() {
        -1
    } else {
        1
    }
}

/// A phase span must be a whole number of steps so phase boundaries land
/// exactly on step boundaries.
pub(crate) fn whole_steps<R: Real>(span: R, dt: R, what: &str) -> Result<usize, ExperimentError> {
    let steps = (span / dt).as_f64().round();
    if steps < 1.0 || ((dt * R::of(steps) - span) / span).abs().as_f64() > 1e-9 {
        return Err(ExperimentError::InvalidConfig(format!(
            "{what} {} is not a whole number of steps of dt {}",
            span.as_f64(),
            dt.as_f64()
        )));
    }
    Ok(steps as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_statistics_match_hand_counts() {
        let rec = OutcomeRecord::<f64>::two_sided(
            (0.0, 1.0),
            vec![1, 1, -1, -1],
            vec![-1, 1, 1, -1],
            9,
        );
        assert_eq!(rec.fraction_plus_1, 0.5);
        assert_eq!(rec.fraction_plus_2, Some(0.5));
        // Products: -1, +1, -1, +1 -> E = 0.
        assert_eq!(rec.correlation, Some(0.0));
        assert_eq!(rec.correlation_se, Some((1.0f64 / 4.0).sqrt()));
    }

    #[test]
    #[should_panic(expected = "outcomes must be +-1")]
    fn outcome_record_rejects_out_of_range_values() {
        let _ = OutcomeRecord::<f64>::one_sided(0.0, vec![1, 0, -1], 1);
    }

    #[test]
    fn analyzer_decomposition_recovers_born_weights() {
        let grid: crate::grid::GridSpec<f64> = crate::grid::GridSpec::line(-8.0, 8.0, 64).unwrap();
        let theta = std::f64::consts::FRAC_PI_3;
        // Spin-up packet analyzed at angle theta: branch masses cos^2(theta/2)
        // and sin^2(theta/2).
        let psi = states::polarized_packet(
            &grid,
            (num_complex::Complex::new(1.0, 0.0), num_complex::Complex::new(0.0, 0.0)),
            1.0,
        )
        .unwrap();
        let (rp, rm) = analyzer_branch_densities(&psi, theta, 0).unwrap();
        let dv = grid.cell_volume();
        let mass_plus: f64 = rp.iter().sum::<f64>() * dv;
        let mass_minus: f64 = rm.iter().sum::<f64>() * dv;
        assert!((mass_plus - (theta / 2.0).cos().powi(2)).abs() < 1e-12);
        assert!((mass_minus - (theta / 2.0).sin().powi(2)).abs() < 1e-12);
        // Identical branches overlap fully; the shared mass is min of both.
        assert!((overlap_mass(&rp, &rp, dv) - mass_plus).abs() < 1e-12);
    }
}
