//! Initial wave packets shared by the canned experiments: Gaussians, the
//! two-slit superposition, polarized spinors, and the two-particle singlet.

use num_complex::Complex;

use crate::error::FieldError;
use crate::field::{ScalarField, SpinorField};
use crate::grid::GridSpec;
use crate::real::Real;

/// Normalized 1D Gaussian packet centered at `center` with position spread
/// `width` (so |psi|^2 has standard deviation `width`) and carrier
/// wavenumber `k`.
pub fn gaussian_packet<R: Real>(
    grid: &GridSpec<R>,
    center: R,
    width: R,
    k: R,
) -> Result<ScalarField<R>, FieldError> {
    let four = R::of(4.0);
    let w2 = four * width * width;
    ScalarField::from_fn(grid.clone(), |p| {
        let x = p[0] - center;
        let envelope = (-x * x / w2).exp();
        Complex::from_polar(envelope, k * p[0])
    })
    .normalize()
}

/// Symmetric two-slit state: equal-weight Gaussians at +-separation/2.
pub fn two_slit_superposition<R: Real>(
    grid: &GridSpec<R>,
    separation: R,
    width: R,
) -> Result<ScalarField<R>, FieldError> {
    let four = R::of(4.0);
    let w2 = four * width * width;
    let half = separation / (R::one() + R::one());
    ScalarField::from_fn(grid.clone(), |p| {
        let a = p[0] - half;
        let b = p[0] + half;
        Complex::new((-a * a / w2).exp() + (-b * b / w2).exp(), R::zero())
    })
    .normalize()
}

/// Single-particle spin-1/2 packet: Gaussian spatial profile times the
/// spin vector (c_plus, c_minus) in the sigma_z basis.
pub fn polarized_packet<R: Real>(
    grid: &GridSpec<R>,
    amplitudes: (Complex<R>, Complex<R>),
    width: R,
) -> Result<SpinorField<R>, FieldError> {
    let spatial = gaussian_packet(grid, R::zero(), width, R::zero())?;
    SpinorField::product(&spatial, &[amplitudes.0, amplitudes.1])?.normalize()
}

/// Two-particle singlet on a 2D configuration grid (axis 0 = particle 0,
/// axis 1 = particle 1): component order (uu, ud, du, dd), spin state
/// (|ud> - |du>)/sqrt(2), each particle in a Gaussian of the given width.
pub fn singlet_packet<R: Real>(
    grid: &GridSpec<R>,
    width: R,
) -> Result<SpinorField<R>, FieldError> {
    let four = R::of(4.0);
    let w2 = four * width * width;
    let envelope: Vec<Complex<R>> = (0..grid.len())
        .map(|j| {
            let p = grid.point(j);
            Complex::new((-(p[0] * p[0] + p[1] * p[1]) / w2).exp(), R::zero())
        })
        .collect();
    let zero = vec![Complex::new(R::zero(), R::zero()); grid.len()];
    let neg: Vec<Complex<R>> = envelope.iter().map(|v| -v).collect();
    SpinorField::new(grid.clone(), vec![zero.clone(), envelope, neg, zero])?.normalize()
}
