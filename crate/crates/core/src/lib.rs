//! Numerical laboratory for pilot-wave dynamics: spectral wave propagation on
//! periodic grids, guided trajectories, quantum-equilibrium sampling, and the
//! spin-pair experiments built from those pieces.
//!
//! The core is generic over the floating scalar through [`Real`]; concrete
//! f64 aliases for the common types are exported at the crate root. No-go
//! bookkeeping (`experiments::nogo`) runs on exact integer arithmetic.

pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod guidance;
pub mod propagator;
pub mod real;
pub mod seed;
pub mod spectral;
pub mod units;

pub use equilibrium::{
    bin_density, equivariance_report, histogram, ks_statistic, sample_density,
    total_variation, uniform_edges, EquivarianceReport, HistogramDensity, SampleSet,
};
pub use error::{ExperimentError, FieldError, GuidanceError, PropagatorError, SampleError};
pub use experiments::{
    chsh, double_slit, eprb_run, local_deterministic_chsh_bound, nonlocality_probe,
    singlet_correlation, stern_gerlach, von_neumann_obstruction, AnalyzerCoupling, ChshEnumeration,
    ChshReport, ChshStrategy, DoubleSlitConfig, DoubleSlitReport, EPRBConfig, MeasurementOrder,
    NonlocalityReport, OutcomeRecord, SternGerlachConfig, VonNeumannObstruction,
};
pub use field::{PolarForm, RealField, ScalarField, SpinorField, VectorField, NODE_EPS};
pub use grid::{AxisSpec, GridSpec, Point};
pub use guidance::{
    continuity_residual, hj_residual, integrate_ensemble, integrate_trajectory, quantum_potential,
    velocity, velocity_from_phase, velocity_scalar, velocity_spinor, FramePairResidual,
    Trajectory, TrajectorySet, TrajectoryStatus, VelocityField, VelocityRecord,
};
pub use propagator::{
    analyzer_direction, evolve, step_scalar, step_spinor, EvolutionRecord, EvolveAbort, Frame,
    Potential, PropagatorConfig, SpinCoupling, Stepper, WaveField,
};
pub use real::Real;
pub use units::UnitSystem;

pub type GridSpec64 = GridSpec<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type SpinorField64 = SpinorField<f64>;
pub type RealField64 = RealField<f64>;
pub type UnitSystem64 = UnitSystem<f64>;
