//! Periodic uniform grids in one or two dimensions.
//!
//! Grid points sit at `min + j*dx` for `j = 0..points`, with `dx = (max-min)/points`;
//! the right edge `max` is identified with `min` (periodic topology), so `points`
//! cells of width `dx` tile the axis exactly. Two-dimensional data is stored
//! row-major with axis 0 outermost: `flat = i0 * n1 + i1`.

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::real::Real;

/// Axis lengths must be FFT-friendly and resolve at least a few oscillations.
pub const MIN_POINTS_PER_AXIS: usize = 16;

pub const MAX_DIMS: usize = 2;

/// Coordinate tuple sized for the supported dimensionalities. One-dimensional
/// grids use slot 0 and keep slot 1 at zero.
pub type Point<R> = [R; MAX_DIMS];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec<R> {
    pub min: R,
    pub max: R,
    pub points: usize,
}

impl<R: Real> AxisSpec<R> {
    pub fn new(min: R, max: R, points: usize) -> Result<Self, FieldError> {
        if !min.is_finite() || !max.is_finite() {
            return Err(FieldError::InvalidGrid("axis extents must be finite".into()));
        }
        if max <= min {
            return Err(FieldError::InvalidGrid(format!(
                "axis needs max > min, got [{}, {}]",
                min.as_f64(),
                max.as_f64()
            )));
        }
        if points < MIN_POINTS_PER_AXIS || !points.is_power_of_two() {
            return Err(FieldError::InvalidGrid(format!(
                "axis points must be a power of two >= {MIN_POINTS_PER_AXIS}, got {points}"
            )));
        }
        Ok(Self { min, max, points })
    }

    pub fn length(&self) -> R {
        self.max - self.min
    }

    pub fn dx(&self) -> R {
        self.length() / R::from_usize_exact(self.points)
    }

    pub fn coord(&self, j: usize) -> R {
        self.min + self.dx() * R::from_usize_exact(j)
    }

    /// Maps x into [min, max) and reports how many periods were unwound.
    pub fn wrap(&self, x: R) -> (R, i32) {
        let len = self.length();
        let turns = ((x - self.min) / len).floor();
        let wrapped = x - turns * len;
        // floor can land exactly on max through rounding; fold it back.
        let wrapped = if wrapped >= self.max { wrapped - len } else { wrapped };
        let wrapped = if wrapped < self.min { wrapped + len } else { wrapped };
        (wrapped, turns.as_f64() as i32)
    }

    /// Angular wavenumbers in DFT layout: 0, dk, .., (n/2-1)dk, -n/2 dk, .., -dk
    /// with dk = 2*pi/length. Index n/2 is the Nyquist mode (sign convention
    /// negative); first-derivative multipliers must zero it, see `spectral`.
    pub fn wavenumbers(&self) -> Vec<R> {
        let n = self.points;
        let dk = (R::PI() + R::PI()) / self.length();
        (0..n)
            .map(|i| {
                let signed = if i <= n / 2 - 1 { i as isize } else { i as isize - n as isize };
                dk * R::of(signed as f64)
            })
            .collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.points / 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<R> {
    axes: Vec<AxisSpec<R>>,
}

impl<R: Real> GridSpec<R> {
    pub fn new(axes: Vec<AxisSpec<R>>) -> Result<Self, FieldError> {
        if axes.is_empty() || axes.len() > MAX_DIMS {
            return Err(FieldError::InvalidGrid(format!(
                "grids support 1..={MAX_DIMS} axes, got {}",
                axes.len()
            )));
        }
        Ok(Self { axes })
    }

    pub fn line(min: R, max: R, points: usize) -> Result<Self, FieldError> {
        Self::new(vec![AxisSpec::new(min, max, points)?])
    }

    pub fn plane(axis0: AxisSpec<R>, axis1: AxisSpec<R>) -> Result<Self, FieldError> {
        AxisSpec::new(axis0.min, axis0.max, axis0.points)?;
        AxisSpec::new(axis1.min, axis1.max, axis1.points)?;
        Self::new(vec![axis0, axis1])
    }

    /// Square 2D grid over [min, max) on both axes.
    pub fn square(min: R, max: R, points: usize) -> Result<Self, FieldError> {
        let ax = AxisSpec::new(min, max, points)?;
        Self::new(vec![ax, ax])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &AxisSpec<R> {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[AxisSpec<R>] {
        &self.axes
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one grid cell (dx, or dx0*dx1).
    pub fn cell_volume(&self) -> R {
        self.axes.iter().map(|a| a.dx()).fold(R::one(), |acc, d| acc * d)
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims());
        match self.axes.len() {
            1 => idx[0],
            _ => idx[0] * self.axes[1].points + idx[1],
        }
    }

    /// Coordinates of a flat index, unused axes zero-filled.
    pub fn point(&self, flat: usize) -> Point<R> {
        match self.axes.len() {
            1 => [self.axes[0].coord(flat), R::zero()],
            _ => {
                let n1 = self.axes[1].points;
                [self.axes[0].coord(flat / n1), self.axes[1].coord(flat % n1)]
            }
        }
    }

    pub fn contains(&self, p: &Point<R>) -> bool {
        self.axes
            .iter()
            .enumerate()
            .all(|(a, ax)| p[a] >= ax.min && p[a] < ax.max)
    }

    /// Wraps a point into the grid extents, returning per-axis period counts.
    pub fn wrap_point(&self, p: &Point<R>) -> (Point<R>, [i32; MAX_DIMS]) {
        let mut out = [R::zero(); MAX_DIMS];
        let mut turns = [0i32; MAX_DIMS];
        for (a, ax) in self.axes.iter().enumerate() {
            let (x, t) = ax.wrap(p[a]);
            out[a] = x;
            turns[a] = t;
        }
        (out, turns)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self == other
    }
}
