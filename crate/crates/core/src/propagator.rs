//! Split-operator propagation.
//!
//! Each step is a Strang splitting e^{-iV dt/2hbar} . e^{-i T dt/hbar} .
//! e^{-iV dt/2hbar}: a pointwise potential half-phase, an exact kinetic phase
//! in Fourier space, and the potential half-phase again. Spin couplings enter
//! the potential half-steps as exact pointwise 2x2 unitaries
//! e^{i mu dt (B.sigma)/(2hbar)} (closed form from cos/sin of |B|); a scalar
//! potential commutes with them, so the half-step product is exact. Every
//! factor has unit modulus, so propagation preserves the norm to roundoff
//! regardless of dt.
//!
//! Second-order accuracy in dt holds for time-independent potentials;
//! switching potentials between evolution phases (coupling windows) is the
//! supported form of time dependence.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::PropagatorError;
use crate::field::{RealField, ScalarField, SpinorField, VectorField};
use crate::grid::GridSpec;
use crate::real::Real;
use crate::seed;
use crate::spectral::FftPlans;
use crate::units::UnitSystem;

/// Propagation state: a scalar wave or a 2/4-component spinor wave.
#[derive(Clone, Debug, PartialEq)]
pub enum WaveField<R> {
    Scalar(ScalarField<R>),
    Spinor(SpinorField<R>),
}

impl<R: Real> WaveField<R> {
    pub fn grid(&self) -> &GridSpec<R> {
        match self {
            WaveField::Scalar(f) => f.grid(),
            WaveField::Spinor(f) => f.grid(),
        }
    }

    pub fn num_components(&self) -> usize {
        match self {
            WaveField::Scalar(_) => 1,
            WaveField::Spinor(f) => f.num_components(),
        }
    }

    pub fn norm_sq(&self) -> R {
        match self {
            WaveField::Scalar(f) => f.norm_sq(),
            WaveField::Spinor(f) => f.norm_sq(),
        }
    }

    pub fn probability_density(&self) -> RealField<R> {
        match self {
            WaveField::Scalar(f) => f.probability_density(),
            WaveField::Spinor(f) => f.probability_density(),
        }
    }

    pub fn probability_current(&self, units: &UnitSystem<R>) -> VectorField<R> {
        match self {
            WaveField::Scalar(f) => f.probability_current(units),
            WaveField::Spinor(f) => f.probability_current(units),
        }
    }

    pub fn as_scalar(&self) -> Option<&ScalarField<R>> {
        match self {
            WaveField::Scalar(f) => Some(f),
            WaveField::Spinor(_) => None,
        }
    }

    pub fn as_spinor(&self) -> Option<&SpinorField<R>> {
        match self {
            WaveField::Spinor(f) => Some(f),
            WaveField::Scalar(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        let ok = |vs: &[Complex<R>]| vs.iter().all(|v| v.re.is_finite() && v.im.is_finite());
        match self {
            WaveField::Scalar(f) => ok(f.values()),
            WaveField::Spinor(f) => (0..f.num_components()).all(|c| ok(f.component(c))),
        }
    }
}

impl<R: Real> From<ScalarField<R>> for WaveField<R> {
    fn from(f: ScalarField<R>) -> Self {
        WaveField::Scalar(f)
    }
}

impl<R: Real> From<SpinorField<R>> for WaveField<R> {
    fn from(f: SpinorField<R>) -> Self {
        WaveField::Spinor(f)
    }
}

/// Zeeman-type coupling -mu B(x).sigma acting on one particle's spin.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinCoupling<R> {
    /// B vector at every grid point.
    pub field: Vec<[R; 3]>,
    pub mu: R,
    /// Which particle's spin the field couples to: 0 or 1.
    pub particle: usize,
}

impl<R: Real> SpinCoupling<R> {
    /// Uniform field B, same at every point.
    pub fn uniform(grid: &GridSpec<R>, b: [R; 3], mu: R, particle: usize) -> Self {
        Self { field: vec![b; grid.len()], mu, particle }
    }

    /// Analyzer field B(x) = slope * x_axis * direction: the displacement-linear
    /// profile that turns spin into pointer momentum.
    pub fn linear_gradient(
        grid: &GridSpec<R>,
        axis: usize,
        slope: R,
        direction: [R; 3],
        mu: R,
        particle: usize,
    ) -> Self {
        let field = (0..grid.len())
            .map(|j| {
                let s = slope * grid.point(j)[axis];
                [direction[0] * s, direction[1] * s, direction[2] * s]
            })
            .collect();
        Self { field, mu, particle }
    }
}

/// Unit vector in the x-z plane at angle theta from +z; the analyzer axis
/// convention used by every spin experiment here.
pub fn analyzer_direction<R: Real>(theta: R) -> [R; 3] {
    [theta.sin(), R::zero(), theta.cos()]
}

/// External potential: scalar part V(x) plus optional spin couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential<R> {
    v: RealField<R>,
    couplings: Vec<SpinCoupling<R>>,
}

impl<R: Real> Potential<R> {
    pub fn free(grid: &GridSpec<R>) -> Self {
        Self {
            v: RealField::from_raw(grid.clone(), vec![R::zero(); grid.len()]),
            couplings: Vec::new(),
        }
    }

    pub fn new(v: RealField<R>) -> Self {
        Self { v, couplings: Vec::new() }
    }

    pub fn with_coupling(mut self, c: SpinCoupling<R>) -> Self {
        self.couplings.push(c);
        self
    }

    pub fn v(&self) -> &RealField<R> {
        &self.v
    }

    pub fn couplings(&self) -> &[SpinCoupling<R>] {
        &self.couplings
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig<R> {
    pub dt: R,
    pub steps: usize,
    /// Store a frame every this many steps (the final step is always stored).
    pub frame_stride: usize,
}

impl<R: Real> PropagatorConfig<R> {
    pub fn validate(&self) -> Result<(), PropagatorError> {
        if !(self.dt > R::zero()) || !self.dt.is_finite() {
            return Err(PropagatorError::InvalidConfig(format!(
                "dt must be finite and positive, got {}",
                self.dt.as_f64()
            )));
        }
        if self.steps == 0 {
            return Err(PropagatorError::InvalidConfig("steps must be >= 1".into()));
        }
        if self.frame_stride == 0 || self.frame_stride > self.steps {
            return Err(PropagatorError::InvalidConfig(format!(
                "frame_stride must be in 1..=steps, got {} with steps {}",
                self.frame_stride, self.steps
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Frame<R> {
    pub time: R,
    pub field: WaveField<R>,
}

/// Stored history of one evolution: frames, the configuration and potential
/// that produced them, and the per-frame norm/energy log.
#[derive(Clone, Debug)]
pub struct EvolutionRecord<R> {
    grid: GridSpec<R>,
    units: UnitSystem<R>,
    config: PropagatorConfig<R>,
    potential: Potential<R>,
    frames: Vec<Frame<R>>,
    norms: Vec<R>,
    energies: Vec<R>,
    id: String,
}

impl<R: Real> EvolutionRecord<R> {
    pub fn grid(&self) -> &GridSpec<R> {
        &self.grid
    }

    pub fn units(&self) -> &UnitSystem<R> {
        &self.units
    }

    pub fn config(&self) -> &PropagatorConfig<R> {
        &self.config
    }

    pub fn potential(&self) -> &Potential<R> {
        &self.potential
    }

    pub fn dt(&self) -> R {
        self.config.dt
    }

    pub fn frames(&self) -> &[Frame<R>] {
        &self.frames
    }

    pub fn frame_times(&self) -> Vec<R> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn norms(&self) -> &[R] {
        &self.norms
    }

    pub fn energies(&self) -> &[R] {
        &self.energies
    }

    /// Content fingerprint tying derived artifacts back to this record.
    pub fn id(&self) -> &str {
        &self.id
    }

    #[cfg(test)]
    pub(crate) fn truncate_frames(&mut self, keep: usize) {
        self.frames.truncate(keep);
        self.norms.truncate(keep);
        self.energies.truncate(keep);
    }
}

/// Evolution failure carrying everything computed before the abort.
#[derive(Debug)]
pub struct EvolveAbort<R> {
    pub error: PropagatorError,
    pub partial: EvolutionRecord<R>,
}

impl<R: Real> From<EvolveAbort<R>> for PropagatorError {
    fn from(a: EvolveAbort<R>) -> Self {
        a.error
    }
}

fn record_id<R: Real>(
    grid: &GridSpec<R>,
    units: &UnitSystem<R>,
    cfg: &PropagatorConfig<R>,
    ncomp: usize,
) -> String {
    let mut words: Vec<u64> = vec![grid.dims() as u64, ncomp as u64];
    for ax in grid.axes() {
        words.push(ax.points as u64);
        words.push(ax.min.as_f64().to_bits());
        words.push(ax.max.as_f64().to_bits());
    }
    words.push(units.hbar.as_f64().to_bits());
    words.push(units.mass.as_f64().to_bits());
    words.push(cfg.dt.as_f64().to_bits());
    words.push(cfg.steps as u64);
    words.push(cfg.frame_stride as u64);
    format!("{:016x}", seed::hash_words(words))
}

/// Which component pairs a 2x2 spin unitary acts on.
pub(crate) fn spin_pairs(
    ncomp: usize,
    particle: usize,
) -> Result<Vec<(usize, usize)>, PropagatorError> {
    match (ncomp, particle) {
        (2, 0) => Ok(vec![(0, 1)]),
        (2, _) => Err(PropagatorError::ShapeMismatch(format!(
            "coupling targets particle {particle} but the field describes a single particle"
        ))),
        (4, 0) => Ok(vec![(0, 2), (1, 3)]),
        (4, 1) => Ok(vec![(0, 1), (2, 3)]),
        (4, _) => Err(PropagatorError::ShapeMismatch(format!(
            "coupling targets particle {particle}; pair fields have particles 0 and 1"
        ))),
        _ => unreachable!("component counts validated at construction"),
    }
}

struct SpinHalfStep<R> {
    pairs: Vec<(usize, usize)>,
    /// Per-point unitary (u00, u01, u10, u11).
    table: Vec<[Complex<R>; 4]>,
}

/// Reusable stepping engine. `evolve` drives it for whole runs; experiments
/// drive it directly to stream frames through multi-phase protocols without
/// storing full histories.
pub struct Stepper<R: Real> {
    state: WaveField<R>,
    pot: Potential<R>,
    units: UnitSystem<R>,
    dt: R,
    t0: R,
    steps_taken: usize,
    kinetic_phase: Vec<Complex<R>>,
    pot_half: Vec<Complex<R>>,
    spin_half: Vec<SpinHalfStep<R>>,
    plans: FftPlans<R>,
}

impl<R: Real> Stepper<R> {
    pub fn new(
        initial: WaveField<R>,
        pot: &Potential<R>,
        dt: R,
        units: &UnitSystem<R>,
    ) -> Result<Self, PropagatorError> {
        Self::starting_at(initial, pot, dt, units, R::zero())
    }

    /// Stepper whose clock starts at `t0`; later phases of a switched protocol
    /// continue the time axis of earlier ones.
    pub fn starting_at(
        initial: WaveField<R>,
        pot: &Potential<R>,
        dt: R,
        units: &UnitSystem<R>,
        t0: R,
    ) -> Result<Self, PropagatorError> {
        if !(dt > R::zero()) || !dt.is_finite() {
            return Err(PropagatorError::InvalidConfig(format!(
                "dt must be finite and positive, got {}",
                dt.as_f64()
            )));
        }
        let grid = initial.grid().clone();
        if pot.v.grid() != &grid {
            return Err(PropagatorError::ShapeMismatch(
                "potential grid differs from field grid".into(),
            ));
        }
        if !initial.is_finite() {
            return Err(PropagatorError::NonFinite { step: 0, time: t0.as_f64() });
        }
        let norm = initial.norm_sq();
        if (norm - R::one()).abs() > R::of(1e-6) {
            log::warn!(
                "propagating a non-normalized field (|psi|^2 = {}); densities will not be probabilities",
                norm.as_f64()
            );
        }

        let ncomp = initial.num_components();
        let mut spin_half = Vec::new();
        for c in &pot.couplings {
            if ncomp == 1 {
                return Err(PropagatorError::ShapeMismatch(
                    "spin coupling applied to a scalar field".into(),
                ));
            }
            if c.field.len() != grid.len() {
                return Err(PropagatorError::ShapeMismatch(format!(
                    "coupling field has {} points, grid has {}",
                    c.field.len(),
                    grid.len()
                )));
            }
            let pairs = spin_pairs(ncomp, c.particle)?;
            spin_half.push(SpinHalfStep {
                pairs,
                table: spin_half_table(c, dt, units.hbar),
            });
        }

        let kinetic_phase = kinetic_phase_table(&grid, dt, units);
        let half = dt / (R::one() + R::one()) / units.hbar;
        let pot_half = pot
            .v
            .values()
            .iter()
            .map(|&v| Complex::from_polar(R::one(), -v * half))
            .collect();

        Ok(Self {
            state: initial,
            pot: pot.clone(),
            units: *units,
            dt,
            t0,
            steps_taken: 0,
            kinetic_phase,
            pot_half,
            spin_half,
            plans: FftPlans::new(),
        })
    }

    pub fn state(&self) -> &WaveField<R> {
        &self.state
    }

    pub fn into_state(self) -> WaveField<R> {
        self.state
    }

    pub fn time(&self) -> R {
        self.t0 + self.dt * R::from_usize_exact(self.steps_taken)
    }

    pub fn dt(&self) -> R {
        self.dt
    }

    /// One Strang step.
    pub fn step(&mut self) {
        let grid = self.state.grid().clone();
        match &mut self.state {
            WaveField::Scalar(f) => {
                apply_phase(f.values_mut(), &self.pot_half);
                self.plans.transform_all(&grid, f.values_mut(), false);
                apply_phase(f.values_mut(), &self.kinetic_phase);
                self.plans.transform_all(&grid, f.values_mut(), true);
                apply_phase(f.values_mut(), &self.pot_half);
            }
            WaveField::Spinor(s) => {
                half_potential_spin(s, &self.pot_half, &self.spin_half);
                for c in s.components_mut() {
                    self.plans.transform_all(&grid, c, false);
                    apply_phase(c, &self.kinetic_phase);
                    self.plans.transform_all(&grid, c, true);
                }
                half_potential_spin(s, &self.pot_half, &self.spin_half);
            }
        }
        self.steps_taken += 1;
    }

    /// Total energy <H> of the current state: spectral kinetic term plus
    /// potential and coupling quadratures.
    pub fn energy(&mut self) -> R {
        energy_of(&self.state, &self.pot, &self.units, &mut self.plans)
    }
}

fn kinetic_phase_table<R: Real>(
    grid: &GridSpec<R>,
    dt: R,
    units: &UnitSystem<R>,
) -> Vec<Complex<R>> {
    let two = R::one() + R::one();
    let scale = units.hbar * dt / (two * units.mass);
    let k0 = grid.axis(0).wavenumbers();
    match grid.dims() {
        1 => k0
            .iter()
            .map(|&k| Complex::from_polar(R::one(), -scale * k * k))
            .collect(),
        _ => {
            let k1 = grid.axis(1).wavenumbers();
            let n1 = k1.len();
            (0..grid.len())
                .map(|f| {
                    let ka = k0[f / n1];
                    let kb = k1[f % n1];
                    Complex::from_polar(R::one(), -scale * (ka * ka + kb * kb))
                })
                .collect()
        }
    }
}

fn spin_half_table<R: Real>(c: &SpinCoupling<R>, dt: R, hbar: R) -> Vec<[Complex<R>; 4]> {
    let two = R::one() + R::one();
    let scale = c.mu * dt / (two * hbar);
    c.field
        .iter()
        .map(|b| {
            let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
            if norm == R::zero() {
                return [
                    Complex::new(R::one(), R::zero()),
                    Complex::default(),
                    Complex::default(),
                    Complex::new(R::one(), R::zero()),
                ];
            }
            let theta = scale * norm;
            let (s, co) = theta.sin_cos();
            let (nx, ny, nz) = (b[0] / norm, b[1] / norm, b[2] / norm);
            [
                Complex::new(co, s * nz),
                Complex::new(s * ny, s * nx),
                Complex::new(-s * ny, s * nx),
                Complex::new(co, -s * nz),
            ]
        })
        .collect()
}

fn apply_phase<R: Real>(values: &mut [Complex<R>], phase: &[Complex<R>]) {
    for (v, p) in values.iter_mut().zip(phase.iter()) {
        *v *= *p;
    }
}

fn half_potential_spin<R: Real>(
    s: &mut SpinorField<R>,
    pot_half: &[Complex<R>],
    spin_half: &[SpinHalfStep<R>],
) {
    for c in s.components_mut() {
        apply_phase(c, pot_half);
    }
    for sh in spin_half {
        for &(ia, ib) in &sh.pairs {
            let comps = s.components_mut();
            let (lo, hi) = comps.split_at_mut(ib);
            let a = &mut lo[ia];
            let b = &mut hi[0];
            for j in 0..a.len() {
                let (x, y) = (a[j], b[j]);
                let m = &sh.table[j];
                a[j] = m[0] * x + m[1] * y;
                b[j] = m[2] * x + m[3] * y;
            }
        }
    }
}

fn energy_of<R: Real>(
    state: &WaveField<R>,
    pot: &Potential<R>,
    units: &UnitSystem<R>,
    plans: &mut FftPlans<R>,
) -> R {
    let grid = state.grid();
    let dv = grid.cell_volume();
    let ntot = R::from_usize_exact(grid.len());
    let two = R::one() + R::one();
    let kin_scale = units.hbar * units.hbar / (two * units.mass);

    let k0 = grid.axis(0).wavenumbers();
    let ksq_at = |f: usize| -> R {
        match grid.dims() {
            1 => k0[f] * k0[f],
            _ => {
                let k1 = grid.axis(1).wavenumbers();
                let n1 = k1.len();
                let (ka, kb) = (k0[f / n1], k1[f % n1]);
                ka * ka + kb * kb
            }
        }
    };

    let components: Vec<&[Complex<R>]> = match state {
        WaveField::Scalar(f) => vec![f.values()],
        WaveField::Spinor(f) => (0..f.num_components()).map(|c| f.component(c)).collect(),
    };

    let mut kinetic = R::zero();
    for c in &components {
        let mut buf = c.to_vec();
        plans.transform_all(grid, &mut buf, false);
        for (f, v) in buf.iter().enumerate() {
            kinetic += ksq_at(f) * v.norm_sqr();
        }
    }
    kinetic *= kin_scale * dv / ntot;

    let rho = state.probability_density();
    let potential: R = pot
        .v
        .values()
        .iter()
        .zip(rho.values())
        .map(|(&v, &r)| v * r)
        .sum::<R>()
        * dv;

    let mut coupling_energy = R::zero();
    if let WaveField::Spinor(s) = state {
        for c in &pot.couplings {
            if let Ok(pairs) = spin_pairs(s.num_components(), c.particle) {
                for j in 0..grid.len() {
                    let mut sx = R::zero();
                    let mut sy = R::zero();
                    let mut sz = R::zero();
                    for &(ia, ib) in &pairs {
                        let up = s.component(ia)[j];
                        let dn = s.component(ib)[j];
                        let cross = up.conj() * dn;
                        sx += two * cross.re;
                        sy += two * cross.im;
                        sz += up.norm_sqr() - dn.norm_sqr();
                    }
                    let b = c.field[j];
                    coupling_energy -= c.mu * (b[0] * sx + b[1] * sy + b[2] * sz);
                }
            }
        }
        coupling_energy *= dv;
    }

    kinetic + potential + coupling_energy
}

pub fn step_scalar<R: Real>(
    psi: &ScalarField<R>,
    pot: &Potential<R>,
    dt: R,
    units: &UnitSystem<R>,
) -> Result<ScalarField<R>, PropagatorError> {
    let mut st = Stepper::new(WaveField::Scalar(psi.clone()), pot, dt, units)?;
    st.step();
    match st.into_state() {
        WaveField::Scalar(f) => Ok(f),
        WaveField::Spinor(_) => unreachable!("scalar stepper yields scalar state"),
    }
}

pub fn step_spinor<R: Real>(
    psi: &SpinorField<R>,
    pot: &Potential<R>,
    dt: R,
    units: &UnitSystem<R>,
) -> Result<SpinorField<R>, PropagatorError> {
    let mut st = Stepper::new(WaveField::Spinor(psi.clone()), pot, dt, units)?;
    st.step();
    match st.into_state() {
        WaveField::Spinor(f) => Ok(f),
        WaveField::Scalar(_) => unreachable!("spinor stepper yields spinor state"),
    }
}

/// Runs `cfg.steps` Strang steps from `initial`, storing a frame every
/// `cfg.frame_stride` steps plus the final state, with per-frame norm and
/// energy logs. The first frame is the initial state. A non-finite frame
/// aborts with everything stored so far.
pub fn evolve<R: Real>(
    initial: &WaveField<R>,
    pot: &Potential<R>,
    cfg: &PropagatorConfig<R>,
    units: &UnitSystem<R>,
) -> Result<EvolutionRecord<R>, EvolveAbort<R>> {
    cfg.validate().map_err(|error| EvolveAbort {
        error,
        partial: empty_record(initial.grid(), units, cfg, pot, initial.num_components()),
    })?;

    let mut record = empty_record(initial.grid(), units, cfg, pot, initial.num_components());
    let mut stepper = Stepper::new(initial.clone(), pot, cfg.dt, units).map_err(|error| {
        EvolveAbort { error, partial: record_clone_for_abort(&record) }
    })?;

    push_frame(&mut record, &mut stepper);
    for s in 1..=cfg.steps {
        stepper.step();
        if s % cfg.frame_stride == 0 || s == cfg.steps {
            if !stepper.state().is_finite() {
                return Err(EvolveAbort {
                    error: PropagatorError::NonFinite { step: s, time: stepper.time().as_f64() },
                    partial: record,
                });
            }
            push_frame(&mut record, &mut stepper);
        }
    }
    Ok(record)
}

fn empty_record<R: Real>(
    grid: &GridSpec<R>,
    units: &UnitSystem<R>,
    cfg: &PropagatorConfig<R>,
    pot: &Potential<R>,
    ncomp: usize,
) -> EvolutionRecord<R> {
    EvolutionRecord {
        grid: grid.clone(),
        units: *units,
        config: *cfg,
        potential: pot.clone(),
        frames: Vec::new(),
        norms: Vec::new(),
        energies: Vec::new(),
        id: record_id(grid, units, cfg, ncomp),
    }
}

fn record_clone_for_abort<R: Real>(r: &EvolutionRecord<R>) -> EvolutionRecord<R> {
    r.clone()
}

fn push_frame<R: Real>(record: &mut EvolutionRecord<R>, stepper: &mut Stepper<R>) {
    record.norms.push(stepper.state().norm_sq());
    record.energies.push(stepper.energy());
    record.frames.push(Frame { time: stepper.time(), field: stepper.state().clone() });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarField, SpinorField};

    fn gaussian<R: Real>(grid: &GridSpec<R>, sigma: R, center: R) -> ScalarField<R> {
        let four = R::of(4.0);
        ScalarField::from_fn(grid.clone(), |p| {
            let d = p[0] - center;
            Complex::new((-d * d / (four * sigma * sigma)).exp(), R::zero())
        })
        .normalize()
        .unwrap()
    }

    fn variance(rho: &RealField<f64>) -> f64 {
        let dv = rho.grid().cell_volume();
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (j, r) in rho.values().iter().enumerate() {
            let x = rho.grid().point(j)[0];
            m0 += r * dv;
            m1 += x * r * dv;
            m2 += x * x * r * dv;
        }
        m2 / m0 - (m1 / m0).powi(2)
    }

    #[test]
    fn free_gaussian_spreads_at_analytic_rate() {
        // sigma_t^2 = sigma0^2 (1 + (hbar t / 2 m sigma0^2)^2) = 2 at t = 2.
        let grid: GridSpec<f64> = GridSpec::line(-16.0, 16.0, 256).unwrap();
        let psi = gaussian(&grid, 1.0, 0.0);
        let units = UnitSystem::natural();
        let cfg = PropagatorConfig { dt: 1e-3, steps: 2000, frame_stride: 2000 };
        let rec = evolve(&psi.into(), &Potential::free(&grid), &cfg, &units).unwrap();
        assert_eq!(rec.frames().len(), 2);
        let rho = rec.frames()[1].field.probability_density();
        assert!((variance(&rho) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn norm_is_preserved_over_a_thousand_free_steps() {
        let grid: GridSpec<f64> = GridSpec::line(-16.0, 16.0, 128).unwrap();
        let psi = gaussian(&grid, 1.0, 1.5);
        let cfg = PropagatorConfig { dt: 1e-3, steps: 1000, frame_stride: 100 };
        let rec = evolve(&psi.into(), &Potential::free(&grid), &cfg, &UnitSystem::natural()).unwrap();
        for n in rec.norms() {
            assert!((n - 1.0).abs() < 1e-10);
        }
        // And the free propagator conserves energy to roundoff.
        let e0 = rec.energies()[0];
        for e in rec.energies() {
            assert!((e - e0).abs() / e0 < 1e-12);
        }
    }

    #[test]
    fn single_step_is_unitary_to_roundoff() {
        let grid: GridSpec<f64> = GridSpec::line(-8.0, 8.0, 64).unwrap();
        let v = RealField::new(grid.clone(), (0..64).map(|j| {
            let x: f64 = grid.point(j)[0];
            0.5 * x * x
        }).collect())
        .unwrap();
        let psi = gaussian(&grid, 0.7, 0.3);
        let next = step_scalar(&psi, &Potential::new(v), 1e-2, &UnitSystem::natural()).unwrap();
        assert!((next.norm_sq() - psi.norm_sq()).abs() < 1e-13);
    }

    #[test]
    fn harmonic_ground_state_density_is_stationary() {
        // V = x^2/2 with hbar = m = 1: ground state exp(-x^2/2), E0 = 1/2.
        let grid: GridSpec<f64> = GridSpec::line(-12.0, 12.0, 256).unwrap();
        let psi = gaussian(&grid, std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let v = RealField::new(
            grid.clone(),
            (0..grid.len()).map(|j| 0.5 * grid.point(j)[0].powi(2)).collect(),
        )
        .unwrap();
        let cfg = PropagatorConfig { dt: 1e-4, steps: 10_000, frame_stride: 1000 };
        let rec = evolve(&psi.clone().into(), &Potential::new(v), &cfg, &UnitSystem::natural())
            .unwrap();
        let rho0 = psi.probability_density();
        let total_time = 1.0;
        for f in rec.frames() {
            let rho = f.field.probability_density();
            let dev = rho
                .values()
                .iter()
                .zip(rho0.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dev / total_time < 1e-8, "density drift {dev}");
        }
        // Energy log sits at E0 = 0.5.
        for e in rec.energies() {
            assert!((e - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_drift_stays_small_for_time_independent_potential() {
        // Coherent state sloshing in the harmonic well, total time 10.
        let grid: GridSpec<f64> = GridSpec::line(-12.0, 12.0, 256).unwrap();
        let psi = gaussian(&grid, std::f64::consts::FRAC_1_SQRT_2, 2.0);
        let v = RealField::new(
            grid.clone(),
            (0..grid.len()).map(|j| 0.5 * grid.point(j)[0].powi(2)).collect(),
        )
        .unwrap();
        let cfg = PropagatorConfig { dt: 5e-4, steps: 20_000, frame_stride: 2000 };
        let rec = evolve(&psi.into(), &Potential::new(v), &cfg, &UnitSystem::natural()).unwrap();
        let e0 = rec.energies()[0];
        for e in rec.energies() {
            assert!(((e - e0) / e0).abs() < 1e-6, "relative energy drift {}", (e - e0) / e0);
        }
    }

    #[test]
    fn halving_dt_quarters_the_splitting_defect() {
        let grid: GridSpec<f64> = GridSpec::line(-12.0, 12.0, 128).unwrap();
        let psi = gaussian(&grid, std::f64::consts::FRAC_1_SQRT_2, 1.0);
        let v = RealField::new(
            grid.clone(),
            (0..grid.len()).map(|j| 0.5 * grid.point(j)[0].powi(2)).collect(),
        )
        .unwrap();
        let pot = Potential::new(v);
        let units = UnitSystem::natural();

        let run = |dt: f64, steps: usize| -> ScalarField<f64> {
            let cfg = PropagatorConfig { dt, steps, frame_stride: steps };
            let rec = evolve(&psi.clone().into(), &pot, &cfg, &units).unwrap();
            rec.frames().last().unwrap().field.as_scalar().unwrap().clone()
        };

        let reference = run(2.5e-4, 4096);
        let err = |f: &ScalarField<f64>| -> f64 {
            f.values()
                .iter()
                .zip(reference.values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let coarse = err(&run(4e-3, 256));
        let fine = err(&run(2e-3, 512));
        let ratio = coarse / fine;
        assert!((3.0..5.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn conjugation_reverses_the_evolution() {
        let grid: GridSpec<f64> = GridSpec::line(-12.0, 12.0, 128).unwrap();
        let psi = gaussian(&grid, 0.8, 1.2);
        let v = RealField::new(
            grid.clone(),
            (0..grid.len()).map(|j| 0.5 * grid.point(j)[0].powi(2)).collect(),
        )
        .unwrap();
        let pot = Potential::new(v);
        let units = UnitSystem::natural();
        let cfg = PropagatorConfig { dt: 1e-3, steps: 500, frame_stride: 500 };

        let fwd = evolve(&psi.clone().into(), &pot, &cfg, &units).unwrap();
        let end = fwd.frames().last().unwrap().field.as_scalar().unwrap().clone();
        let conj = ScalarField::new(
            grid.clone(),
            end.values().iter().map(|v| v.conj()).collect(),
        )
        .unwrap();
        let back = evolve(&conj.into(), &pot, &cfg, &units).unwrap();
        let recovered = back.frames().last().unwrap().field.as_scalar().unwrap().clone();
        let err = recovered
            .values()
            .iter()
            .zip(psi.values())
            .map(|(a, b)| (a.conj() - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "time-reversal defect {err}");
    }

    #[test]
    fn larmor_precession_tracks_the_analytic_phase() {
        // Uniform B along z, spin starting along +x: <sigma_x>(t) = cos(2 mu B t / hbar).
        let grid: GridSpec<f64> = GridSpec::line(-16.0, 16.0, 128).unwrap();
        let spatial = gaussian(&grid, 1.0, 0.0);
        let inv = 1.0 / 2f64.sqrt();
        let spinor = SpinorField::product(
            &spatial,
            &[Complex::new(inv, 0.0), Complex::new(inv, 0.0)],
        )
        .unwrap();
        let units = UnitSystem::natural();
        let pot = Potential::free(&grid)
            .with_coupling(SpinCoupling::uniform(&grid, [0.0, 0.0, 1.0], 1.0, 0));
        let cfg = PropagatorConfig { dt: 1e-3, steps: 1000, frame_stride: 250 };
        let rec = evolve(&spinor.into(), &pot, &cfg, &units).unwrap();
        let dv = grid.cell_volume();
        for f in rec.frames() {
            let s = f.field.as_spinor().unwrap();
            let sx: f64 = s
                .component(0)
                .iter()
                .zip(s.component(1))
                .map(|(u, d)| 2.0 * (u.conj() * d).re)
                .sum::<f64>()
                * dv;
            let expect = (2.0 * f.time).cos();
            assert!((sx - expect).abs() < 1e-6, "t={} sx={} expect={}", f.time, sx, expect);
        }
    }

    #[test]
    fn frame_stride_equal_to_steps_gives_two_frames() {
        let grid: GridSpec<f64> = GridSpec::line(-8.0, 8.0, 32).unwrap();
        let psi = gaussian(&grid, 1.0, 0.0);
        let cfg = PropagatorConfig { dt: 1e-3, steps: 7, frame_stride: 7 };
        let rec = evolve(&psi.into(), &Potential::free(&grid), &cfg, &UnitSystem::natural()).unwrap();
        assert_eq!(rec.frames().len(), 2);
        assert_eq!(rec.frames()[0].time, 0.0);
        assert!((rec.frames()[1].time - 7e-3).abs() < 1e-15);
    }

    #[test]
    fn coupling_on_scalar_or_missing_particle_is_shape_mismatch() {
        let grid: GridSpec<f64> = GridSpec::line(-8.0, 8.0, 32).unwrap();
        let psi = gaussian(&grid, 1.0, 0.0);
        let pot = Potential::free(&grid)
            .with_coupling(SpinCoupling::uniform(&grid, [0.0, 0.0, 1.0], 1.0, 0));
        assert!(matches!(
            step_scalar(&psi, &pot, 1e-3, &UnitSystem::natural()),
            Err(PropagatorError::ShapeMismatch(_))
        ));

        let spinor = SpinorField::product(&psi, &[Complex::new(1.0, 0.0), Complex::default()])
            .unwrap();
        let pot1 = Potential::free(&grid)
            .with_coupling(SpinCoupling::uniform(&grid, [0.0, 0.0, 1.0], 1.0, 1));
        assert!(matches!(
            step_spinor(&spinor, &pot1, 1e-3, &UnitSystem::natural()),
            Err(PropagatorError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn non_finite_state_aborts_with_partial_record() {
        let grid: GridSpec<f64> = GridSpec::line(-8.0, 8.0, 32).unwrap();
        let mut psi = gaussian(&grid, 1.0, 0.0);
        psi.values_mut()[3] = Complex::new(f64::NAN, 0.0);
        let cfg = PropagatorConfig { dt: 1e-3, steps: 10, frame_stride: 5 };
        let err = evolve(
            &WaveField::Scalar(psi),
            &Potential::free(&grid),
            &cfg,
            &UnitSystem::natural(),
        )
        .unwrap_err();
        assert!(matches!(err.error, PropagatorError::NonFinite { .. }));
        assert!(err.partial.frames().is_empty());
    }

    #[test]
    fn stepping_works_at_f32() {
        let grid: GridSpec<f32> = GridSpec::line(-8.0, 8.0, 64).unwrap();
        let psi = gaussian(&grid, 1.0f32, 0.0);
        let next = step_scalar(&psi, &Potential::free(&grid), 1e-3, &UnitSystem::natural()).unwrap();
        assert!((next.norm_sq() - 1.0).abs() < 1e-5);
    }
}
