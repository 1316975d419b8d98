//! The guiding layer: velocity fields read off the wave function, the quantum
//! potential, Hamilton-Jacobi and continuity diagnostics, and deterministic
//! trajectory integration.
//!
//! The primary velocity definition is v = (hbar/m) Im(psi* grad psi) / rho
//! with the denominator floored at eps * rho_max; points below the floor are
//! masked as nodes. An independent route computes v = grad(S)/m from locally
//! unwrapped phase differences (`velocity_from_phase`); the two must agree off
//! the mask, and tests hold them to that.
//!
//! Phases are never integrated globally: every S difference used here is the
//! argument of a product of nearby amplitudes, which equals the unwrapped
//! difference whenever the true change stays under pi. That keeps unwrap seams
//! out of the dynamics entirely.

use rayon::prelude::*;

use crate::error::GuidanceError;
use crate::field::{RealField, ScalarField, SpinorField, NODE_EPS};
use crate::grid::{GridSpec, Point, MAX_DIMS};
use crate::propagator::{EvolutionRecord, WaveField};
use crate::real::Real;
use crate::units::UnitSystem;

/// Guiding velocity on the grid: one real component per axis plus the node
/// mask inherited from the source density.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField<R> {
    grid: GridSpec<R>,
    components: Vec<Vec<R>>,
    mask: Vec<bool>,
}

impl<R: Real> VelocityField<R> {
    pub(crate) fn from_parts(grid: GridSpec<R>, components: Vec<Vec<R>>, mask: Vec<bool>) -> Self {
        debug_assert_eq!(components.len(), grid.dims());
        debug_assert!(components.iter().all(|c| c.len() == grid.len()));
        debug_assert_eq!(mask.len(), grid.len());
        Self { grid, components, mask }
    }

    pub fn grid(&self) -> &GridSpec<R> {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[R] {
        &self.components[axis]
    }

    /// True where the source density sat below the node floor.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Multilinear interpolation at an arbitrary (possibly unwrapped) point.
    /// Masked corners contribute nothing; the returned flag is true when the
    /// nearest corner is masked, i.e. the point sits in a node region.
    pub fn sample(&self, x: Point<R>) -> (Point<R>, bool) {
        let dims = self.grid.dims();
        let half = R::of(0.5);
        let mut base = [0usize; MAX_DIMS];
        let mut frac = [R::zero(); MAX_DIMS];
        let mut nearest = [0usize; MAX_DIMS];
        for a in 0..dims {
            let ax = self.grid.axis(a);
            let u = (x[a] - ax.min) / ax.dx();
            let fl = u.floor();
            base[a] = (fl.as_f64() as i64).rem_euclid(ax.points as i64) as usize;
            frac[a] = u - fl;
            nearest[a] =
                if frac[a] < half { base[a] } else { (base[a] + 1) % ax.points };
        }

        let mut v = [R::zero(); MAX_DIMS];
        for corner in 0..(1usize << dims) {
            let mut w = R::one();
            let mut idx = [0usize; MAX_DIMS];
            for a in 0..dims {
                if (corner >> a) & 1 == 1 {
                    idx[a] = (base[a] + 1) % self.grid.axis(a).points;
                    w *= frac[a];
                } else {
                    idx[a] = base[a];
                    w *= R::one() - frac[a];
                }
            }
            let flat = self.grid.flat(&idx[..dims]);
            if !self.mask[flat] {
                for a in 0..dims {
                    v[a] += w * self.components[a][flat];
                }
            }
        }
        let stalled = self.mask[self.grid.flat(&nearest[..dims])];
        (v, stalled)
    }
}

fn node_mask<R: Real>(rho: &[R], eps: R) -> (Vec<bool>, R) {
    let rho_max = rho.iter().copied().fold(R::zero(), R::max);
    let floor = eps * rho_max;
    (rho.iter().map(|&r| r < floor).collect(), floor)
}

fn velocity_from_current<R: Real>(
    grid: &GridSpec<R>,
    rho: &[R],
    current: &[Vec<R>],
    eps: R,
) -> VelocityField<R> {
    let (mask, floor) = node_mask(rho, eps);
    let components = current
        .iter()
        .map(|j| {
            j.iter()
                .zip(rho.iter())
                .map(|(&jv, &r)| jv / r.max(floor))
                .collect()
        })
        .collect();
    VelocityField::from_parts(grid.clone(), components, mask)
}

/// v = (hbar/m) Im(grad psi / psi), regularized as Im(psi* grad psi) over
/// max(rho, eps*rho_max), with sub-floor points masked.
///
/// # Panics
/// If `eps <= 0`.
pub fn velocity_scalar<R: Real>(
    psi: &ScalarField<R>,
    eps: R,
    units: &UnitSystem<R>,
) -> VelocityField<R> {
    assert!(eps > R::zero(), "node floor eps must be positive");
    let rho = psi.probability_density();
    let j = psi.probability_current(units);
    let dims = psi.grid().dims();
    let current: Vec<Vec<R>> = (0..dims).map(|a| j.component(a).to_vec()).collect();
    velocity_from_current(psi.grid(), rho.values(), &current, eps)
}

/// Spinor guiding velocity: numerator and denominator component-summed. On a
/// two-axis configuration grid each axis is one particle's coordinate; with a
/// single mass in `units` both particles share it.
///
/// # Panics
/// If `eps <= 0`.
pub fn velocity_spinor<R: Real>(
    psi: &SpinorField<R>,
    eps: R,
    units: &UnitSystem<R>,
) -> VelocityField<R> {
    assert!(eps > R::zero(), "node floor eps must be positive");
    let rho = psi.probability_density();
    let j = psi.probability_current(units);
    let dims = psi.grid().dims();
    let current: Vec<Vec<R>> = (0..dims).map(|a| j.component(a).to_vec()).collect();
    velocity_from_current(psi.grid(), rho.values(), &current, eps)
}

/// Dispatching form of [`velocity_scalar`] / [`velocity_spinor`].
pub fn velocity<R: Real>(
    field: &WaveField<R>,
    eps: R,
    units: &UnitSystem<R>,
) -> VelocityField<R> {
    match field {
        WaveField::Scalar(f) => velocity_scalar(f, eps, units),
        WaveField::Spinor(f) => velocity_spinor(f, eps, units),
    }
}

/// Periodic neighbor of `flat` shifted by `delta` cells along `axis`.
fn shifted<R: Real>(grid: &GridSpec<R>, flat: usize, axis: usize, delta: i64) -> usize {
    match grid.dims() {
        1 => {
            let n = grid.axis(0).points as i64;
            (flat as i64 + delta).rem_euclid(n) as usize
        }
        _ => {
            let n1 = grid.axis(1).points;
            let (i0, i1) = (flat / n1, flat % n1);
            if axis == 0 {
                let n0 = grid.axis(0).points as i64;
                let s = (i0 as i64 + delta).rem_euclid(n0) as usize;
                s * n1 + i1
            } else {
                let s = (i1 as i64 + delta).rem_euclid(n1 as i64) as usize;
                i0 * n1 + s
            }
        }
    }
}

/// Grow a mask by `reach` cells in every axis direction (periodic).
fn dilate_mask<R: Real>(grid: &GridSpec<R>, mask: &[bool], reach: i64) -> Vec<bool> {
    let mut out = mask.to_vec();
    for (j, &m) in mask.iter().enumerate() {
        if m {
            for axis in 0..grid.dims() {
                for d in -reach..=reach {
                    out[shifted(grid, j, axis, d)] = true;
                }
            }
        }
    }
    out
}

/// v = grad(S)/m computed from local phase differences: the independent route
/// to the same velocity field. Each directional derivative is a fourth-order
/// centered difference of arg(psi_{j+d} psi*_{j-d}), which equals the
/// unwrapped S difference while the true phase change over the stencil stays
/// below pi. The mask is the node mask dilated by the stencil reach.
///
/// # Panics
/// If `eps <= 0`.
pub fn velocity_from_phase<R: Real>(
    psi: &ScalarField<R>,
    eps: R,
    units: &UnitSystem<R>,
) -> VelocityField<R> {
    assert!(eps > R::zero(), "node floor eps must be positive");
    let grid = psi.grid();
    let rho: Vec<R> = psi.values().iter().map(|v| v.norm_sqr()).collect();
    let (base_mask, _) = node_mask(&rho, eps);
    let mask = dilate_mask(grid, &base_mask, 2);

    let vals = psi.values();
    let twelve = R::of(12.0);
    let eight = R::of(8.0);
    let components = (0..grid.dims())
        .map(|axis| {
            let dx = grid.axis(axis).dx();
            (0..grid.len())
                .map(|j| {
                    if mask[j] {
                        return R::zero();
                    }
                    let r1 = vals[shifted(grid, j, axis, 1)]
                        * vals[shifted(grid, j, axis, -1)].conj();
                    let r2 = vals[shifted(grid, j, axis, 2)]
                        * vals[shifted(grid, j, axis, -2)].conj();
                    let dphi = (eight * r1.arg() - r2.arg()) / (twelve * dx);
                    units.hbar * dphi / units.mass
                })
                .collect()
        })
        .collect();
    VelocityField::from_parts(grid.clone(), components, mask)
}

/// Q = -(hbar^2/2m) laplacian(R)/R with R = |psi|, the denominator floored at
/// the node level; masked points are reported as zero.
///
/// # Panics
/// If `eps <= 0`.
pub fn quantum_potential<R: Real>(
    psi: &ScalarField<R>,
    eps: R,
    units: &UnitSystem<R>,
) -> RealField<R> {
    assert!(eps > R::zero(), "node floor eps must be positive");
    let grid = psi.grid();
    let rho: Vec<R> = psi.values().iter().map(|v| v.norm_sqr()).collect();
    let (mask, rho_floor) = node_mask(&rho, eps);
    let amp_floor = rho_floor.sqrt();

    let amp = ScalarField::from_raw(
        grid.clone(),
        rho.iter()
            .map(|&r| num_complex::Complex::new(r.sqrt(), R::zero()))
            .collect(),
    );
    let lap = amp.laplacian();
    let two = R::one() + R::one();
    let scale = -units.hbar * units.hbar / (two * units.mass);
    let values = lap
        .values()
        .iter()
        .zip(rho.iter())
        .zip(mask.iter())
        .map(|((l, &r), &m)| {
            if m {
                R::zero()
            } else {
                scale * l.re / r.sqrt().max(amp_floor)
            }
        })
        .collect();
    RealField::from_raw(grid.clone(), values)
}

/// Residual field for one consecutive frame pair, evaluated at the pair's
/// temporal midpoint. Masked points are zeroed; the summary statistics run
/// over unmasked points only.
#[derive(Clone, Debug)]
pub struct FramePairResidual<R> {
    pub time: R,
    pub field: RealField<R>,
    pub mask: Vec<bool>,
    pub max_abs: R,
    pub mean_abs: R,
}

fn summarize<R: Real>(
    grid: &GridSpec<R>,
    time: R,
    values: Vec<R>,
    mask: Vec<bool>,
) -> FramePairResidual<R> {
    let mut max_abs = R::zero();
    let mut sum = R::zero();
    let mut count = 0usize;
    for (v, m) in values.iter().zip(mask.iter()) {
        if !m {
            max_abs = max_abs.max(v.abs());
            sum += v.abs();
            count += 1;
        }
    }
    let mean_abs = if count == 0 { R::zero() } else { sum / R::from_usize_exact(count) };
    FramePairResidual { time, field: RealField::from_raw(grid.clone(), values), mask, max_abs, mean_abs }
}

/// Scalar phase-gradient magnitude-squared |grad S|^2 via second-order local
/// phase differences, plus the stencil-dilated node mask.
fn grad_s_squared<R: Real>(
    psi: &ScalarField<R>,
    eps: R,
    hbar: R,
) -> (Vec<R>, Vec<bool>) {
    let grid = psi.grid();
    let rho: Vec<R> = psi.values().iter().map(|v| v.norm_sqr()).collect();
    let (base_mask, _) = node_mask(&rho, eps);
    let mask = dilate_mask(grid, &base_mask, 1);
    let vals = psi.values();
    let two = R::one() + R::one();
    let mut gsq = vec![R::zero(); grid.len()];
    for axis in 0..grid.dims() {
        let dx = grid.axis(axis).dx();
        for (j, g) in gsq.iter_mut().enumerate() {
            if mask[j] {
                continue;
            }
            let r = vals[shifted(grid, j, axis, 1)] * vals[shifted(grid, j, axis, -1)].conj();
            let ds = hbar * r.arg() / (two * dx);
            *g += ds * ds;
        }
    }
    (gsq, mask)
}

/// Hamilton-Jacobi residual dS/dt + |grad S|^2/(2m) + V + Q for every
/// consecutive frame pair of a scalar record. dS/dt comes from the phase
/// difference between the frames (second-order accurate at the midpoint);
/// the spatial terms are averaged over the pair.
pub fn hj_residual<R: Real>(
    record: &EvolutionRecord<R>,
    eps: R,
    units: &UnitSystem<R>,
) -> Result<Vec<FramePairResidual<R>>, GuidanceError> {
    let frames = record.frames();
    if frames.len() < 2 {
        return Err(GuidanceError::InsufficientFrames { needed: 2, got: frames.len() });
    }
    let grid = record.grid();
    let v_ext = record.potential().v().values();
    let two = R::one() + R::one();

    struct FrameTerms<R> {
        gsq: Vec<R>,
        q: Vec<R>,
        mask: Vec<bool>,
    }
    let mut terms: Vec<FrameTerms<R>> = Vec::with_capacity(frames.len());
    let mut fields: Vec<&ScalarField<R>> = Vec::with_capacity(frames.len());
    for f in frames {
        let psi = f.field.as_scalar().ok_or_else(|| {
            GuidanceError::ShapeMismatch(
                "Hamilton-Jacobi residual is defined for scalar records".into(),
            )
        })?;
        let (gsq, fd_mask) = grad_s_squared(psi, eps, units.hbar);
        let q_field = quantum_potential(psi, eps, units);
        let rho: Vec<R> = psi.values().iter().map(|v| v.norm_sqr()).collect();
        let (q_mask, _) = node_mask(&rho, eps);
        let mask = fd_mask
            .iter()
            .zip(q_mask.iter())
            .map(|(&a, &b)| a || b)
            .collect();
        terms.push(FrameTerms { gsq, q: q_field.values().to_vec(), mask });
        fields.push(psi);
    }

    let mut out = Vec::with_capacity(frames.len() - 1);
    for i in 0..frames.len() - 1 {
        let dt = frames[i + 1].time - frames[i].time;
        let mid = (frames[i].time + frames[i + 1].time) / two;
        let (a, b) = (&terms[i], &terms[i + 1]);
        let mask: Vec<bool> = a.mask.iter().zip(b.mask.iter()).map(|(&x, &y)| x || y).collect();
        let values: Vec<R> = (0..grid.len())
            .map(|j| {
                if mask[j] {
                    return R::zero();
                }
                let dphi = (fields[i + 1].values()[j] * fields[i].values()[j].conj()).arg();
                let dsdt = units.hbar * dphi / dt;
                let gsq = (a.gsq[j] + b.gsq[j]) / two;
                let q = (a.q[j] + b.q[j]) / two;
                dsdt + gsq / (two * units.mass) + v_ext[j] + q
            })
            .collect();
        out.push(summarize(grid, mid, values, mask));
    }
    Ok(out)
}

/// Continuity residual d(rho)/dt + div(rho v) per consecutive frame pair,
/// reported as the maximum absolute value off-mask. The divergence is the
/// spectral derivative of the probability current, averaged over the pair;
/// the time derivative is the midpoint difference quotient.
pub fn continuity_residual<R: Real>(
    record: &EvolutionRecord<R>,
    eps: R,
    units: &UnitSystem<R>,
) -> Result<Vec<R>, GuidanceError> {
    let frames = record.frames();
    if frames.len() < 2 {
        return Err(GuidanceError::InsufficientFrames { needed: 2, got: frames.len() });
    }
    let grid = record.grid();

    struct FrameTerms<R> {
        rho: Vec<R>,
        div_j: Vec<R>,
        mask: Vec<bool>,
    }
    let terms: Vec<FrameTerms<R>> = frames
        .iter()
        .map(|f| {
            let rho = f.field.probability_density().values().to_vec();
            let j = f.field.probability_current(units);
            let mut div_j = vec![R::zero(); grid.len()];
            for axis in 0..grid.dims() {
                let jc = ScalarField::from_raw(
                    grid.clone(),
                    j.component(axis)
                        .iter()
                        .map(|&v| num_complex::Complex::new(v, R::zero()))
                        .collect(),
                );
                for (d, g) in div_j.iter_mut().zip(jc.gradient(axis).values()) {
                    *d += g.re;
                }
            }
            let (mask, _) = node_mask(&rho, eps);
            FrameTerms { rho, div_j, mask }
        })
        .collect();

    let two = R::one() + R::one();
    let mut out = Vec::with_capacity(frames.len() - 1);
    for i in 0..frames.len() - 1 {
        let dt = frames[i + 1].time - frames[i].time;
        let (a, b) = (&terms[i], &terms[i + 1]);
        let mut max_abs = R::zero();
        for j in 0..grid.len() {
            if a.mask[j] || b.mask[j] {
                continue;
            }
            let drho = (b.rho[j] - a.rho[j]) / dt;
            let div = (a.div_j[j] + b.div_j[j]) / two;
            max_abs = max_abs.max((drho + div).abs());
        }
        out.push(max_abs);
    }
    Ok(out)
}

/// How a trajectory's integration ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrajectoryStatus<R> {
    Completed,
    /// Entered a node region; position frozen from `time` on.
    NodeStalled { time: R },
    /// Position became non-finite at `time`; frozen at the last finite value.
    Escaped { time: R },
}

/// One guided path sampled on the requested time grid. Positions are wrapped
/// into the box; `winding` counts the accumulated periodic wraps per axis, so
/// `position + winding * length` recovers the unwrapped coordinate.
#[derive(Clone, Debug)]
pub struct Trajectory<R> {
    pub times: Vec<R>,
    pub positions: Vec<Point<R>>,
    pub winding: Vec<[i32; MAX_DIMS]>,
    pub status: TrajectoryStatus<R>,
}

impl<R: Real> Trajectory<R> {
    /// Unwrapped coordinates on the given grid.
    pub fn unwrapped(&self, grid: &GridSpec<R>) -> Vec<Point<R>> {
        self.positions
            .iter()
            .zip(self.winding.iter())
            .map(|(p, w)| {
                let mut out = *p;
                for (a, ax) in grid.axes().iter().enumerate() {
                    out[a] += R::of(w[a] as f64) * ax.length();
                }
                out
            })
            .collect()
    }
}

/// An ensemble sharing one time grid, with the provenance needed to reproduce
/// it: the sampling seed (when the starts were drawn) and the source record id.
#[derive(Clone, Debug)]
pub struct TrajectorySet<R> {
    pub times: Vec<R>,
    pub trajectories: Vec<Trajectory<R>>,
    pub seed: Option<u64>,
    pub source_id: String,
}

impl<R: Real> TrajectorySet<R> {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Wrapped final position of every trajectory.
    pub fn final_positions(&self) -> Vec<Point<R>> {
        self.trajectories
            .iter()
            .map(|t| *t.positions.last().expect("trajectories carry >= 1 sample"))
            .collect()
    }

    pub fn stalled_count(&self) -> usize {
        self.trajectories
            .iter()
            .filter(|t| matches!(t.status, TrajectoryStatus::NodeStalled { .. }))
            .count()
    }
}

/// One stored flow frame: density and current on the grid plus the node
/// floor eps * max(rho). The integrator divides interpolated current by
/// interpolated density at the sample point instead of interpolating a
/// precomputed v = J/rho: between separating wave branches v is nearly a
/// step while J and rho stay smooth, so interpolating the ratio's inputs
/// keeps trajectory transport unbiased exactly where sorting into outcome
/// classes is decided.
#[derive(Clone, Debug)]
struct FlowFrame<R> {
    rho: Vec<R>,
    current: Vec<Vec<R>>,
    floor: R,
}

impl<R: Real> FlowFrame<R> {
    fn from_state(field: &WaveField<R>, eps: R, units: &UnitSystem<R>) -> Self {
        assert!(eps > R::zero(), "node floor eps must be positive");
        let rho = field.probability_density().values().to_vec();
        let j = field.probability_current(units);
        let dims = field.grid().dims();
        let current = (0..dims).map(|a| j.component(a).to_vec()).collect();
        let rho_max = rho.iter().copied().fold(R::zero(), R::max);
        Self { rho, current, floor: eps * rho_max }
    }

    /// Multilinear current (numerator) and density (denominator) at an
    /// arbitrary, possibly unwrapped point.
    fn sample(&self, grid: &GridSpec<R>, x: Point<R>) -> (Point<R>, R) {
        let dims = grid.dims();
        let mut base = [0usize; MAX_DIMS];
        let mut frac = [R::zero(); MAX_DIMS];
        for a in 0..dims {
            let ax = grid.axis(a);
            let u = (x[a] - ax.min) / ax.dx();
            let fl = u.floor();
            base[a] = (fl.as_f64() as i64).rem_euclid(ax.points as i64) as usize;
            frac[a] = u - fl;
        }
        let mut num = [R::zero(); MAX_DIMS];
        let mut den = R::zero();
        for corner in 0..(1usize << dims) {
            let mut w = R::one();
            let mut idx = [0usize; MAX_DIMS];
            for a in 0..dims {
                if (corner >> a) & 1 == 1 {
                    idx[a] = (base[a] + 1) % grid.axis(a).points;
                    w *= frac[a];
                } else {
                    idx[a] = base[a];
                    w *= R::one() - frac[a];
                }
            }
            let flat = grid.flat(&idx[..dims]);
            den += w * self.rho[flat];
            for a in 0..dims {
                num[a] += w * self.current[a][flat];
            }
        }
        (num, den)
    }
}

/// Time-indexed flow frames: the compact record trajectories integrate
/// against. Built from a stored evolution or streamed frame by frame while a
/// stepper runs, which keeps long 2D runs out of memory.
#[derive(Clone, Debug)]
pub struct VelocityRecord<R> {
    grid: GridSpec<R>,
    times: Vec<R>,
    frames: Vec<FlowFrame<R>>,
    source_id: String,
}

impl<R: Real> VelocityRecord<R> {
    pub fn new(grid: GridSpec<R>, source_id: impl Into<String>) -> Self {
        Self { grid, times: Vec::new(), frames: Vec::new(), source_id: source_id.into() }
    }

    /// Convert every frame of an evolution record.
    pub fn from_evolution(
        record: &EvolutionRecord<R>,
        eps: R,
    ) -> Result<Self, GuidanceError> {
        Self::from_evolution_with_units(record, eps, record.units())
    }

    pub fn from_evolution_with_units(
        record: &EvolutionRecord<R>,
        eps: R,
        units: &UnitSystem<R>,
    ) -> Result<Self, GuidanceError> {
        if record.frames().len() < 2 {
            return Err(GuidanceError::InsufficientFrames {
                needed: 2,
                got: record.frames().len(),
            });
        }
        let mut out = Self::new(record.grid().clone(), record.id());
        for f in record.frames() {
            out.push_state(f.time, &f.field, eps, units)?;
        }
        Ok(out)
    }

    /// Append the flow frame (density, current, node floor) of `field` at
    /// `time`. Times must increase strictly; the grid must match.
    pub fn push_state(
        &mut self,
        time: R,
        field: &WaveField<R>,
        eps: R,
        units: &UnitSystem<R>,
    ) -> Result<(), GuidanceError> {
        if field.grid() != &self.grid {
            return Err(GuidanceError::ShapeMismatch(
                "frame grid differs from record grid".into(),
            ));
        }
        if let Some(&last) = self.times.last() {
            if time <= last {
                return Err(GuidanceError::InvalidConfig(format!(
                    "frame times must increase strictly ({} after {})",
                    time.as_f64(),
                    last.as_f64()
                )));
            }
        }
        self.frames.push(FlowFrame::from_state(field, eps, units));
        self.times.push(time);
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec<R> {
        &self.grid
    }

    pub fn times(&self) -> &[R] {
        &self.times
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Default integrator micro-step: a quarter of the first frame interval.
    pub fn default_step_dt(&self) -> R {
        let four = R::of(4.0);
        (self.times[1] - self.times[0]) / four
    }

    fn bracket(&self, t: R) -> Result<(usize, R), GuidanceError> {
        let times = &self.times;
        let n = times.len();
        let (t0, t1) = (times[0], times[n - 1]);
        let slack = (t1 - t0) * R::of(1e-12);
        if t < t0 - slack || t > t1 + slack {
            return Err(GuidanceError::OutOfWindow {
                t: t.as_f64(),
                t_min: t0.as_f64(),
                t_max: t1.as_f64(),
            });
        }
        let tc = t.max(t0).min(t1);
        let mut i = times.partition_point(|&x| x <= tc);
        i = i.saturating_sub(1).min(n - 2);
        let a = (tc - times[i]) / (times[i + 1] - times[i]);
        Ok((i, a))
    }

    /// Space-and-time interpolated guiding velocity. Current and density are
    /// each interpolated (multilinear in space, linear in time) and divided
    /// here, at the sample point; the flag reports a node stall, i.e. the
    /// interpolated density fell to or below the interpolated node floor.
    pub fn velocity_at(&self, x: Point<R>, t: R) -> Result<(Point<R>, bool), GuidanceError> {
        if self.frames.len() < 2 {
            return Err(GuidanceError::InsufficientFrames { needed: 2, got: self.frames.len() });
        }
        let (i, a) = self.bracket(t)?;
        let (n0, d0) = self.frames[i].sample(&self.grid, x);
        let (n1, d1) = self.frames[i + 1].sample(&self.grid, x);
        let b = R::one() - a;
        let den = b * d0 + a * d1;
        let floor = b * self.frames[i].floor + a * self.frames[i + 1].floor;
        if den <= floor {
            return Ok(([R::zero(); MAX_DIMS], true));
        }
        let mut v = [R::zero(); MAX_DIMS];
        for (axis, out) in v.iter_mut().enumerate() {
            *out = (b * n0[axis] + a * n1[axis]) / den;
        }
        Ok((v, false))
    }

    /// `None` means a node stall at one of the RK4 stage points.
    fn rk4_step(&self, p: Point<R>, t: R, h: R) -> Result<Option<Point<R>>, GuidanceError> {
        let two = R::one() + R::one();
        let six = R::of(6.0);
        let half = h / two;
        let advance = |p: Point<R>, k: Point<R>, s: R| -> Point<R> {
            let mut out = p;
            for a in 0..MAX_DIMS {
                out[a] += s * k[a];
            }
            out
        };
        let (k1, s1) = self.velocity_at(p, t)?;
        if s1 {
            return Ok(None);
        }
        let (k2, s2) = self.velocity_at(advance(p, k1, half), t + half)?;
        if s2 {
            return Ok(None);
        }
        let (k3, s3) = self.velocity_at(advance(p, k2, half), t + half)?;
        if s3 {
            return Ok(None);
        }
        let (k4, s4) = self.velocity_at(advance(p, k3, h), t + h)?;
        if s4 {
            return Ok(None);
        }
        let mut out = p;
        for a in 0..MAX_DIMS {
            out[a] += h / six * (k1[a] + two * k2[a] + two * k3[a] + k4[a]);
        }
        Ok(Some(out))
    }

    /// Classical RK4 on dq/dt = v(q, t) with multilinear spatial and linear
    /// temporal interpolation, sampled at `sample_times`. Deterministic:
    /// identical inputs give bitwise identical output.
    pub fn trajectory(
        &self,
        x0: Point<R>,
        sample_times: &[R],
        step_dt: R,
    ) -> Result<Trajectory<R>, GuidanceError> {
        if self.frames.len() < 2 {
            return Err(GuidanceError::InsufficientFrames { needed: 2, got: self.frames.len() });
        }
        if !(step_dt > R::zero()) || !step_dt.is_finite() {
            return Err(GuidanceError::InvalidConfig(format!(
                "step_dt must be finite and positive, got {}",
                step_dt.as_f64()
            )));
        }
        if sample_times.is_empty() {
            return Err(GuidanceError::InvalidConfig("no sample times requested".into()));
        }
        if sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GuidanceError::InvalidConfig(
                "sample times must increase strictly".into(),
            ));
        }
        if !x0.iter().all(|c| c.is_finite()) {
            return Err(GuidanceError::InvalidConfig("start point must be finite".into()));
        }
        self.bracket(sample_times[0])?;
        self.bracket(*sample_times.last().expect("non-empty"))?;

        let n = sample_times.len();
        let mut positions = Vec::with_capacity(n);
        let mut winding = Vec::with_capacity(n);
        let mut status = TrajectoryStatus::Completed;
        let mut frozen = false;
        let mut p = x0;

        let record = |p: &Point<R>, positions: &mut Vec<Point<R>>, winding: &mut Vec<[i32; MAX_DIMS]>| {
            let (wrapped, turns) = self.grid.wrap_point(p);
            positions.push(wrapped);
            winding.push(turns);
        };

        record(&p, &mut positions, &mut winding);
        let mut t = sample_times[0];
        for &target in &sample_times[1..] {
            while !frozen && t < target {
                let rem = target - t;
                let h = if rem < step_dt { rem } else { step_dt };
                match self.rk4_step(p, t, h)? {
                    Some(next) if next.iter().all(|c| c.is_finite()) => {
                        p = next;
                        t = if rem <= step_dt { target } else { t + h };
                    }
                    Some(_) => {
                        status = TrajectoryStatus::Escaped { time: t };
                        frozen = true;
                    }
                    None => {
                        status = TrajectoryStatus::NodeStalled { time: t };
                        frozen = true;
                    }
                }
            }
            t = target;
            record(&p, &mut positions, &mut winding);
        }

        Ok(Trajectory { times: sample_times.to_vec(), positions, winding, status })
    }

    /// Elementwise [`Self::trajectory`] over all starts, in parallel. Statuses
    /// are per-trajectory; only setup errors abort the batch.
    pub fn ensemble(
        &self,
        starts: &[Point<R>],
        sample_times: &[R],
        step_dt: R,
    ) -> Result<TrajectorySet<R>, GuidanceError> {
        let trajectories = starts
            .par_iter()
            .map(|&x0| self.trajectory(x0, sample_times, step_dt))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TrajectorySet {
            times: sample_times.to_vec(),
            trajectories,
            seed: None,
            source_id: self.source_id.clone(),
        })
    }
}

/// Trajectory straight from an evolution record; velocity fields are derived
/// with the standard node floor and the given units.
pub fn integrate_trajectory<R: Real>(
    x0: Point<R>,
    record: &EvolutionRecord<R>,
    units: &UnitSystem<R>,
    step_dt: R,
    sample_times: &[R],
) -> Result<Trajectory<R>, GuidanceError> {
    VelocityRecord::from_evolution_with_units(record, R::of(NODE_EPS), units)?
        .trajectory(x0, sample_times, step_dt)
}

/// Ensemble version of [`integrate_trajectory`].
pub fn integrate_ensemble<R: Real>(
    starts: &[Point<R>],
    record: &EvolutionRecord<R>,
    units: &UnitSystem<R>,
    step_dt: R,
    sample_times: &[R],
) -> Result<TrajectorySet<R>, GuidanceError> {
    VelocityRecord::from_evolution_with_units(record, R::of(NODE_EPS), units)?
        .ensemble(starts, sample_times, step_dt)
}
