//! Complex wave fields on periodic grids, their densities, currents, and the
//! amplitude/phase (polar) decomposition.
//!
//! All integrals are Riemann sums weighted by the cell volume, which on a
//! periodic uniform grid is the trapezoid rule exactly. A spinor field stores
//! one full grid layer per component; two components describe one spin-1/2
//! particle, four describe a pair in the tensor order
//! (up,up), (up,down), (down,up), (down,down) with particle 1 as the slow index.
//! Four-component fields require a 2D grid: axis 0 is particle 1's pointer
//! coordinate, axis 1 is particle 2's.

use num_complex::Complex;

use crate::error::FieldError;
use crate::grid::{GridSpec, Point};
use crate::real::Real;
use crate::spectral::{self, FftPlans};
use crate::units::UnitSystem;

/// Relative density floor below which phase and velocity data is untrusted.
/// Points with rho < NODE_EPS * max(rho) are masked.
pub const NODE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RealField<R> {
    grid: GridSpec<R>,
    values: Vec<R>,
}

impl<R: Real> RealField<R> {
    pub fn new(grid: GridSpec<R>, values: Vec<R>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::ShapeMismatch(format!(
                "grid has {} points, data has {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec<R>, values: Vec<R>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec<R> {
        &self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    /// Riemann-sum integral over the grid.
    pub fn integral(&self) -> R {
        let dv = self.grid.cell_volume();
        self.values.iter().copied().sum::<R>() * dv
    }

    pub fn max_value(&self) -> R {
        self.values.iter().copied().fold(R::neg_infinity(), R::max)
    }
}

/// Real vector field with one component per grid axis (currents, velocities).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<R> {
    grid: GridSpec<R>,
    components: Vec<Vec<R>>,
}

impl<R: Real> VectorField<R> {
    pub(crate) fn from_raw(grid: GridSpec<R>, components: Vec<Vec<R>>) -> Self {
        debug_assert_eq!(components.len(), grid.dims());
        Self { grid, components }
    }

    pub fn grid(&self) -> &GridSpec<R> {
        &self.grid
    }

    /// Component along `axis`, one value per grid point.
    pub fn component(&self, axis: usize) -> &[R] {
        &self.components[axis]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<R> {
    grid: GridSpec<R>,
    values: Vec<Complex<R>>,
}

impl<R: Real> ScalarField<R> {
    pub fn new(grid: GridSpec<R>, values: Vec<Complex<R>>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::ShapeMismatch(format!(
                "grid has {} points, data has {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec<R>, values: Vec<Complex<R>>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: GridSpec<R>, mut f: impl FnMut(Point<R>) -> Complex<R>) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec<R> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<R>] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex<R>] {
        &mut self.values
    }

    /// Squared L2 norm, integral of |psi|^2.
    pub fn norm_sq(&self) -> R {
        let dv = self.grid.cell_volume();
        self.values.iter().map(|v| v.norm_sqr()).sum::<R>() * dv
    }

    pub fn normalize(&self) -> Result<Self, FieldError> {
        let n2 = self.norm_sq();
        if n2 <= zero_norm_floor::<R>() {
            return Err(FieldError::ZeroNorm);
        }
        let inv = R::one() / n2.sqrt();
        let values = self.values.iter().map(|v| v.scale(inv)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn probability_density(&self) -> RealField<R> {
        let values = self.values.iter().map(|v| v.norm_sqr()).collect();
        RealField::from_raw(self.grid.clone(), values)
    }

    /// Probability current J = (hbar/m) Im(conj(psi) grad psi).
    pub fn probability_current(&self, units: &UnitSystem<R>) -> VectorField<R> {
        let mut plans = FftPlans::new();
        let scale = units.hbar / units.mass;
        let components = (0..self.grid.dims())
            .map(|axis| {
                let grad = spectral::gradient_values(&self.grid, &self.values, axis, &mut plans);
                self.values
                    .iter()
                    .zip(grad.iter())
                    .map(|(v, g)| (v.conj() * g).im * scale)
                    .collect()
            })
            .collect();
        VectorField::from_raw(self.grid.clone(), components)
    }

    /// Spectral partial derivative along `axis`.
    pub fn gradient(&self, axis: usize) -> Self {
        let mut plans = FftPlans::new();
        let values = spectral::gradient_values(&self.grid, &self.values, axis, &mut plans);
        Self { grid: self.grid.clone(), values }
    }

    pub fn laplacian(&self) -> Self {
        let mut plans = FftPlans::new();
        let values = spectral::laplacian_values(&self.grid, &self.values, &mut plans);
        Self { grid: self.grid.clone(), values }
    }

    /// Splits psi into amplitude and unwrapped phase action S (psi = A e^{iS/hbar}).
    pub fn polar_decompose(&self, eps: R, units: &UnitSystem<R>) -> PolarForm<R> {
        let rho: Vec<R> = self.values.iter().map(|v| v.norm_sqr()).collect();
        let rho_max = rho.iter().copied().fold(R::zero(), R::max);
        let floor = eps * rho_max;
        let mask: Vec<bool> = rho.iter().map(|&r| r < floor).collect();

        let amplitude: Vec<R> = self.values.iter().map(|v| v.norm()).collect();
        let raw: Vec<R> = self.values.iter().map(|v| v.arg()).collect();
        let mut phase = vec![R::zero(); raw.len()];

        match self.grid.dims() {
            1 => unwrap_line(&raw, &mask, &mut phase, |j| j, self.grid.axis(0).points, false),
            _ => {
                let n0 = self.grid.axis(0).points;
                let n1 = self.grid.axis(1).points;
                // Seed line runs along axis 0 at index1 = 0; each axis-1 row is
                // then unwrapped outward from its seed value.
                unwrap_line(&raw, &mask, &mut phase, |i| i * n1, n0, false);
                for i in 0..n0 {
                    unwrap_line(&raw, &mask, &mut phase, |j| i * n1 + j, n1, true);
                }
            }
        }

        for (j, p) in phase.iter_mut().enumerate() {
            if mask[j] {
                *p = R::zero();
            } else {
                *p *= units.hbar;
            }
        }

        PolarForm {
            amplitude: RealField::from_raw(self.grid.clone(), amplitude),
            action: RealField::from_raw(self.grid.clone(), phase),
            mask,
        }
    }
}

/// Result of `polar_decompose`: psi = amplitude * exp(i action / hbar) away
/// from masked points. Masked points carry amplitude but zero action.
#[derive(Clone, Debug)]
pub struct PolarForm<R> {
    pub amplitude: RealField<R>,
    pub action: RealField<R>,
    pub mask: Vec<bool>,
}

/// Unwraps the phases of one grid line in place. `at` maps line position to
/// flat index. Masked points break the chain: the next unmasked point restarts
/// from its raw phase. With `anchored`, an unmasked first point keeps the
/// unwrapped value a previous (seed) pass stored there, tying this line's
/// offset to the seed line.
fn unwrap_line<R: Real>(
    raw: &[R],
    mask: &[bool],
    phase: &mut [R],
    at: impl Fn(usize) -> usize,
    len: usize,
    anchored: bool,
) {
    let mut prev: Option<(R, R)> = None; // (raw, unwrapped) of last unmasked point
    for p in 0..len {
        let j = at(p);
        if mask[j] {
            prev = None;
            continue;
        }
        let unwrapped = match prev {
            None if p == 0 && anchored => phase[j],
            None => raw[j],
            Some((praw, pun)) => pun + wrap_to_pi(raw[j] - praw),
        };
        phase[j] = unwrapped;
        prev = Some((raw[j], unwrapped));
    }
}

/// Maps an angle difference into (-pi, pi].
fn wrap_to_pi<R: Real>(d: R) -> R {
    let tau = R::PI() + R::PI();
    let mut d = d % tau;
    if d > R::PI() {
        d -= tau;
    }
    if d <= -R::PI() {
        d += tau;
    }
    d
}

fn zero_norm_floor<R: Real>() -> R {
    R::of(1e-300).max(R::min_positive_value())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField<R> {
    grid: GridSpec<R>,
    components: Vec<Vec<Complex<R>>>,
}

impl<R: Real> SpinorField<R> {
    pub fn new(grid: GridSpec<R>, components: Vec<Vec<Complex<R>>>) -> Result<Self, FieldError> {
        match components.len() {
            2 => {}
            4 if grid.dims() == 2 => {}
            4 => {
                return Err(FieldError::ShapeMismatch(
                    "four-component (pair) spinors need a 2D grid, one axis per particle".into(),
                ))
            }
            n => {
                return Err(FieldError::ShapeMismatch(format!(
                    "spinor fields have 2 or 4 components, got {n}"
                )))
            }
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(FieldError::ShapeMismatch(format!(
                    "grid has {} points, component has {}",
                    grid.len(),
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(FieldError::NonFinite);
            }
        }
        Ok(Self { grid, components })
    }

    /// Product state: spatial profile times a constant spin vector.
    pub fn product(spatial: &ScalarField<R>, spin: &[Complex<R>]) -> Result<Self, FieldError> {
        let components = spin
            .iter()
            .map(|amp| spatial.values().iter().map(|v| v * amp).collect())
            .collect();
        Self::new(spatial.grid().clone(), components)
    }

    pub fn grid(&self) -> &GridSpec<R> {
        &self.grid
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> &[Complex<R>] {
        &self.components[c]
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<Complex<R>>] {
        &mut self.components
    }

    pub fn norm_sq(&self) -> R {
        let dv = self.grid.cell_volume();
        self.components
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<R>())
            .sum::<R>()
            * dv
    }

    pub fn normalize(&self) -> Result<Self, FieldError> {
        let n2 = self.norm_sq();
        if n2 <= zero_norm_floor::<R>() {
            return Err(FieldError::ZeroNorm);
        }
        let inv = R::one() / n2.sqrt();
        let components = self
            .components
            .iter()
            .map(|c| c.iter().map(|v| v.scale(inv)).collect())
            .collect();
        Ok(Self { grid: self.grid.clone(), components })
    }

    /// Total position density, summed over spin components.
    pub fn probability_density(&self) -> RealField<R> {
        let mut rho = vec![R::zero(); self.grid.len()];
        for c in &self.components {
            for (r, v) in rho.iter_mut().zip(c.iter()) {
                *r += v.norm_sqr();
            }
        }
        RealField::from_raw(self.grid.clone(), rho)
    }

    /// Component-summed current J = (hbar/m) sum_c Im(conj(c) grad c).
    pub fn probability_current(&self, units: &UnitSystem<R>) -> VectorField<R> {
        let mut plans = FftPlans::new();
        let scale = units.hbar / units.mass;
        let components = (0..self.grid.dims())
            .map(|axis| {
                let mut j = vec![R::zero(); self.grid.len()];
                for c in &self.components {
                    let grad = spectral::gradient_values(&self.grid, c, axis, &mut plans);
                    for ((jv, v), g) in j.iter_mut().zip(c.iter()).zip(grad.iter()) {
                        *jv += (v.conj() * g).im * scale;
                    }
                }
                j
            })
            .collect();
        VectorField::from_raw(self.grid.clone(), components)
    }
}
