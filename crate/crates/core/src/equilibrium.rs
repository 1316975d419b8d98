//! Quantum-equilibrium machinery: draw initial positions distributed as
//! |psi_0|^2, push them along the guided flow, and measure how closely the
//! evolved ensemble tracks |psi_t|^2 (equivariance).
//!
//! Densities are treated as piecewise constant over grid cells, which makes
//! the CDF piecewise linear and the inverse-CDF sampler exact for that model.
//! Histogram comparisons use total variation distance, ruler of choice for
//! "how much probability sits in the wrong place".

use rand::Rng;
use serde::Serialize;

use crate::error::{ExperimentError, SampleError};
use crate::field::RealField;
use crate::grid::{Point, MAX_DIMS};
use crate::guidance::VelocityRecord;
use crate::propagator::{EvolutionRecord, WaveField};
use crate::real::Real;
use crate::seed;
use crate::units::UnitSystem;

/// Bins per axis used by the equivariance report.
pub const DEFAULT_BINS: usize = 64;

/// Positions drawn from a density, with the provenance to redraw them.
#[derive(Clone, Debug)]
pub struct SampleSet<R> {
    points: Vec<Point<R>>,
    dims: usize,
    seed: u64,
    source_id: String,
}

impl<R: Real> SampleSet<R> {
    /// Wrap already-computed positions (e.g. trajectory endpoints) so they can
    /// be histogrammed like fresh samples.
    pub(crate) fn from_parts(
        points: Vec<Point<R>>,
        dims: usize,
        seed: u64,
        source_id: String,
    ) -> Self {
        Self { points, dims, seed, source_id }
    }

    pub fn points(&self) -> &[Point<R>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Content fingerprint of the sampled density.
    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

/// Normalized histogram over a tensor grid of bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramDensity<R> {
    edges: Vec<Vec<R>>,
    masses: Vec<R>,
    clamped: usize,
}

impl<R: Real> HistogramDensity<R> {
    pub fn edges(&self) -> &[Vec<R>] {
        &self.edges
    }

    pub fn masses(&self) -> &[R] {
        &self.masses
    }

    pub fn dims(&self) -> usize {
        self.edges.len()
    }

    pub fn bins(&self, axis: usize) -> usize {
        self.edges[axis].len() - 1
    }

    /// Number of out-of-range samples folded into boundary bins.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn has_clamped(&self) -> bool {
        self.clamped > 0
    }
}

/// Evenly spaced bin edges, `bins + 1` of them.
pub fn uniform_edges<R: Real>(min: R, max: R, bins: usize) -> Vec<R> {
    let n = R::from_usize_exact(bins);
    (0..=bins)
        .map(|i| min + (max - min) * R::from_usize_exact(i) / n)
        .collect()
}

/// Piecewise-linear CDF table over cells: cum[j] is the mass strictly before
/// cell j, cum[len] the total.
struct CdfTable<R> {
    cum: Vec<R>,
}

impl<R: Real> CdfTable<R> {
    fn new(masses: impl Iterator<Item = R>) -> Self {
        let mut cum = vec![R::zero()];
        let mut acc = R::zero();
        for m in masses {
            acc += m.max(R::zero());
            cum.push(acc);
        }
        Self { cum }
    }

    fn total(&self) -> R {
        *self.cum.last().expect("cum is never empty")
    }

    /// Invert at u in [0, total): (cell index, fraction through the cell).
    fn invert(&self, u: R) -> (usize, R) {
        let cells = self.cum.len() - 1;
        let mut j = self.cum.partition_point(|&c| c <= u);
        j = j.saturating_sub(1).min(cells - 1);
        // Skip any zero-mass run floor-ward of u (partition_point already
        // lands past it; this guards the u == cum boundary).
        let mut cell = j;
        while cell + 1 < cells && self.cum[cell + 1] - self.cum[cell] <= R::zero() {
            cell += 1;
        }
        let mass = self.cum[cell + 1] - self.cum[cell];
        let frac = if mass > R::zero() {
            ((u - self.cum[cell]) / mass).max(R::zero()).min(R::one() - R::epsilon())
        } else {
            R::zero()
        };
        (cell, frac)
    }
}

/// Draw `n` points distributed as `rho`, by inverse transform on the
/// piecewise-linear CDF (1D) or axis-0 marginal followed by the axis-1
/// conditional (2D). Reproducible for a fixed seed.
/// Place a draw from grid cell `cell` at fraction `frac` of the cell centered
/// on the node, [coord - dx/2, coord + dx/2), wrapped back into the box. A
/// node's density value represents the cell around it; spreading the mass
/// over [coord, coord + dx) instead would shift every sample by +dx/2 on
/// average, which reads straight through to outcome statistics.
fn cell_coord<R: Real>(ax: &crate::grid::AxisSpec<R>, cell: usize, frac: R) -> R {
    let x = ax.coord(cell) + (frac - R::of(0.5)) * ax.dx();
    if x < ax.min { x + ax.length() } else { x }
}

pub fn sample_density<R: Real>(
    rho: &RealField<R>,
    n: usize,
    master_seed: u64,
) -> Result<SampleSet<R>, SampleError> {
    if n == 0 {
        return Err(SampleError::EmptyInput("no samples requested".into()));
    }
    let grid = rho.grid();
    let dims = grid.dims();
    let values = rho.values();

    let source_id = {
        let mut words: Vec<u64> = values.iter().map(|v| v.as_f64().to_bits()).collect();
        words.push(grid.len() as u64);
        format!("{:016x}", seed::hash_words(words))
    };
    let mut rng = seed::rng(master_seed, "sample-density");

    let mut points = Vec::with_capacity(n);
    match dims {
        1 => {
            let ax = grid.axis(0);
            let table = CdfTable::new(values.iter().copied());
            if !(table.total() > R::zero()) {
                return Err(SampleError::DegenerateDensity);
            }
            let total = table.total().as_f64();
            for _ in 0..n {
                let u = R::of(rng.gen_range(0.0..total));
                let (cell, frac) = table.invert(u);
                points.push([cell_coord(ax, cell, frac), R::zero()]);
            }
        }
        _ => {
            let (ax0, ax1) = (grid.axis(0), grid.axis(1));
            let n1 = ax1.points;
            let marginal = CdfTable::new(
                (0..ax0.points)
                    .map(|i| (0..n1).map(|j| values[i * n1 + j]).sum::<R>()),
            );
            if !(marginal.total() > R::zero()) {
                return Err(SampleError::DegenerateDensity);
            }
            let rows: Vec<CdfTable<R>> = (0..ax0.points)
                .map(|i| CdfTable::new(values[i * n1..(i + 1) * n1].iter().copied()))
                .collect();
            let total = marginal.total().as_f64();
            for _ in 0..n {
                let u = R::of(rng.gen_range(0.0..total));
                let (row, frac0) = marginal.invert(u);
                let x0 = cell_coord(ax0, row, frac0);
                let row_total = rows[row].total().as_f64();
                let v = R::of(rng.gen_range(0.0..row_total));
                let (cell, frac1) = rows[row].invert(v);
                let x1 = cell_coord(ax1, cell, frac1);
                points.push([x0, x1]);
            }
        }
    }

    Ok(SampleSet { points, dims, seed: master_seed, source_id })
}

fn validate_edges<R: Real>(edges: &[Vec<R>]) -> Result<(), SampleError> {
    if edges.is_empty() || edges.len() > MAX_DIMS {
        return Err(SampleError::InvalidBins(format!(
            "need edge lists for 1 or 2 axes, got {}",
            edges.len()
        )));
    }
    for (a, e) in edges.iter().enumerate() {
        if e.len() < 2 {
            return Err(SampleError::InvalidBins(format!(
                "axis {a} needs at least 2 edges, got {}",
                e.len()
            )));
        }
        if e.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SampleError::InvalidBins(format!(
                "axis {a} edges must increase strictly"
            )));
        }
    }
    Ok(())
}

/// Bin index for a coordinate, clamping out-of-range values to the boundary
/// bins. Returns (index, was_clamped).
fn bin_of<R: Real>(edges: &[R], x: R) -> (usize, bool) {
    let bins = edges.len() - 1;
    if x < edges[0] {
        return (0, true);
    }
    if x >= edges[bins] {
        return (bins - 1, true);
    }
    let mut b = edges.partition_point(|&e| e <= x);
    b = b.saturating_sub(1).min(bins - 1);
    (b, false)
}

/// Count samples into bins; masses are counts/n. Out-of-range samples land in
/// the nearest boundary bin and are tallied in the clamped counter.
pub fn histogram<R: Real>(
    samples: &SampleSet<R>,
    edges: &[Vec<R>],
) -> Result<HistogramDensity<R>, SampleError> {
    if samples.is_empty() {
        return Err(SampleError::EmptyInput("cannot histogram an empty sample set".into()));
    }
    validate_edges(edges)?;
    if edges.len() != samples.dims() {
        return Err(SampleError::InvalidBins(format!(
            "{}-axis edges for {}-dimensional samples",
            edges.len(),
            samples.dims()
        )));
    }

    let bins: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
    let total_bins: usize = bins.iter().product();
    let mut counts = vec![0usize; total_bins];
    let mut clamped = 0usize;
    for p in samples.points() {
        let mut flat = 0usize;
        for (a, e) in edges.iter().enumerate() {
            let (b, c) = bin_of(e, p[a]);
            if c {
                clamped += 1;
            }
            flat = flat * bins[a] + b;
        }
        counts[flat] += 1;
    }
    if clamped > 0 {
        log::warn!("{clamped} samples fell outside the histogram range and were clamped");
    }

    let n = R::from_usize_exact(samples.len());
    let masses = counts
        .iter()
        .map(|&c| R::from_usize_exact(c) / n)
        .collect();
    Ok(HistogramDensity { edges: edges.to_vec(), masses, clamped })
}

/// Integrate a grid density over histogram bins (exact for the
/// piecewise-constant cell model) and normalize to unit mass.
pub fn bin_density<R: Real>(
    rho: &RealField<R>,
    edges: &[Vec<R>],
) -> Result<HistogramDensity<R>, SampleError> {
    validate_edges(edges)?;
    let grid = rho.grid();
    if edges.len() != grid.dims() {
        return Err(SampleError::InvalidBins(format!(
            "{}-axis edges for a {}-dimensional density",
            edges.len(),
            grid.dims()
        )));
    }

    // Per-axis overlap weights between each grid cell and each bin.
    let overlaps: Vec<Vec<(usize, usize, R)>> = (0..grid.dims())
        .map(|a| {
            let ax = grid.axis(a);
            let e = &edges[a];
            let bins = e.len() - 1;
            let mut out = Vec::new();
            for cell in 0..ax.points {
                // Node-centered cells, matching the sampler's cell model.
                let lo = ax.coord(cell) - ax.dx() / (R::one() + R::one());
                let hi = lo + ax.dx();
                for b in 0..bins {
                    let ov = (hi.min(e[b + 1]) - lo.max(e[b])).max(R::zero());
                    if ov > R::zero() {
                        out.push((cell, b, ov));
                    }
                }
            }
            out
        })
        .collect();

    let bins: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
    let total_bins: usize = bins.iter().product();
    let mut masses = vec![R::zero(); total_bins];
    let values = rho.values();
    match grid.dims() {
        1 => {
            for &(cell, b, ov) in &overlaps[0] {
                masses[b] += values[cell].max(R::zero()) * ov;
            }
        }
        _ => {
            let n1 = grid.axis(1).points;
            for &(c0, b0, ov0) in &overlaps[0] {
                for &(c1, b1, ov1) in &overlaps[1] {
                    masses[b0 * bins[1] + b1] +=
                        values[c0 * n1 + c1].max(R::zero()) * ov0 * ov1;
                }
            }
        }
    }

    let total: R = masses.iter().copied().sum();
    if !(total > R::zero()) {
        return Err(SampleError::DegenerateDensity);
    }
    for m in &mut masses {
        *m /= total;
    }
    Ok(HistogramDensity { edges: edges.to_vec(), masses, clamped: 0 })
}

/// Total variation distance (1/2) sum |p_i - q_i| over identical binnings.
pub fn total_variation<R: Real>(
    p: &HistogramDensity<R>,
    q: &HistogramDensity<R>,
) -> Result<R, SampleError> {
    if p.edges != q.edges {
        return Err(SampleError::BinMismatch);
    }
    let two = R::one() + R::one();
    Ok(p
        .masses
        .iter()
        .zip(q.masses.iter())
        .map(|(&a, &b)| (a - b).abs())
        .sum::<R>()
        / two)
}

/// Kolmogorov-Smirnov statistic of samples against a reference CDF.
pub fn ks_statistic<R: Real>(values: &[R], cdf: impl Fn(R) -> R) -> R {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample values"));
    let n = R::from_usize_exact(sorted.len());
    let mut d = R::zero();
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = R::from_usize_exact(i) / n;
        let hi = R::from_usize_exact(i + 1) / n;
        d = d.max((f - lo).abs()).max((f - hi).abs());
    }
    d
}

/// Equivariance measurement: TV distance between the guided ensemble's
/// histogram and the binned |psi_t|^2 at each requested time.
#[derive(Clone, Debug, Serialize)]
pub struct EquivarianceReport<R> {
    pub times: Vec<R>,
    pub tv: Vec<R>,
    pub n: usize,
    pub seed: u64,
    pub bins: usize,
    pub source_id: String,
    /// Trajectories that stalled in node regions (reported, not hidden).
    pub stalled: usize,
}

/// Find the frame whose time matches `t`, within a tolerance scaled to the
/// frame spacing.
fn frame_index<R: Real>(record: &EvolutionRecord<R>, t: R) -> Result<usize, ExperimentError> {
    let frames = record.frames();
    let mut best = 0usize;
    let mut best_d = R::infinity();
    for (i, f) in frames.iter().enumerate() {
        let d = (f.time - t).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let spacing = if frames.len() > 1 {
        frames[1].time - frames[0].time
    } else {
        R::one()
    };
    if best_d > spacing * R::of(1e-6) {
        return Err(ExperimentError::InvalidConfig(format!(
            "time {} does not match a stored frame (nearest is {})",
            t.as_f64(),
            frames[best].time.as_f64()
        )));
    }
    Ok(best)
}

/// Bin edges covering the occupied region (union over the given frames of
/// cells above a relative density threshold), one cell of padding per side.
fn occupied_edges<R: Real>(
    record: &EvolutionRecord<R>,
    frame_indices: &[usize],
    bins: usize,
) -> Vec<Vec<R>> {
    let grid = record.grid();
    let threshold = R::of(1e-9);
    let mut lo = [R::infinity(); MAX_DIMS];
    let mut hi = [R::neg_infinity(); MAX_DIMS];
    for &fi in frame_indices {
        let rho = record.frames()[fi].field.probability_density();
        let cut = rho.max_value() * threshold;
        for (j, &r) in rho.values().iter().enumerate() {
            if r >= cut {
                let p = grid.point(j);
                for a in 0..grid.dims() {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
        }
    }
    (0..grid.dims())
        .map(|a| {
            let dx = grid.axis(a).dx();
            uniform_edges(lo[a] - dx, hi[a] + dx, bins)
        })
        .collect()
}

/// Sample rho_0 = |psi_0|^2, integrate the ensemble along the record's guiding
/// flow, and report TV(t) between the trajectory histogram and binned
/// |psi_t|^2 at each requested time.
pub fn equivariance_report<R: Real>(
    psi0: &WaveField<R>,
    record: &EvolutionRecord<R>,
    n: usize,
    master_seed: u64,
    times: &[R],
    units: &UnitSystem<R>,
) -> Result<EquivarianceReport<R>, ExperimentError> {
    if times.is_empty() {
        return Err(ExperimentError::InvalidConfig("no report times requested".into()));
    }
    let frame_indices = times
        .iter()
        .map(|&t| frame_index(record, t))
        .collect::<Result<Vec<_>, _>>()?;

    let rho0 = psi0.probability_density();
    let samples = sample_density(&rho0, n, master_seed)?;

    let vel = VelocityRecord::from_evolution_with_units(
        record,
        R::of(crate::field::NODE_EPS),
        units,
    )?;

    // Integrate from the record start so samples drawn at t0 transport
    // correctly, then report at the requested times.
    let t0 = record.frames()[0].time;
    let mut sample_times: Vec<R> = Vec::with_capacity(times.len() + 1);
    if times[0] > t0 {
        sample_times.push(t0);
    }
    sample_times.extend_from_slice(times);
    let offset = sample_times.len() - times.len();

    let set = vel
        .ensemble(samples.points(), &sample_times, vel.default_step_dt())?
        .with_seed(master_seed);

    let edges = occupied_edges(record, &frame_indices, DEFAULT_BINS);
    let mut tv = Vec::with_capacity(times.len());
    for (k, &fi) in frame_indices.iter().enumerate() {
        let positions: Vec<Point<R>> = set
            .trajectories
            .iter()
            .map(|tr| tr.positions[offset + k])
            .collect();
        let at_time = SampleSet::from_parts(
            positions,
            record.grid().dims(),
            master_seed,
            samples.source_id.clone(),
        );
        let ensemble_hist = histogram(&at_time, &edges)?;
        let rho_t = record.frames()[fi].field.probability_density();
        let target = bin_density(&rho_t, &edges)?;
        tv.push(total_variation(&ensemble_hist, &target)?);
    }

    Ok(EquivarianceReport {
        times: times.to_vec(),
        tv,
        n,
        seed: master_seed,
        bins: DEFAULT_BINS,
        source_id: record.id().to_string(),
        stalled: set.stalled_count(),
    })
}
