//! Spectral calculus on periodic grids.
//!
//! Forward transforms are unnormalized; inverse transforms carry the 1/n
//! factor per axis, so forward-then-inverse is the identity. First-derivative
//! multipliers zero the Nyquist mode (a pure cosine on the grid, whose sampled
//! derivative is zero at every node); the Laplacian keeps the full -k^2 weight
//! there. Lines along a strided axis are gathered into a scratch buffer,
//! transformed, and scattered back.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::grid::GridSpec;
use crate::real::Real;

pub(crate) struct FftPlans<R: Real> {
    planner: FftPlanner<R>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<R>>>,
    scratch: Vec<Complex<R>>,
    line: Vec<Complex<R>>,
}

impl<R: Real> FftPlans<R> {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            scratch: Vec::new(),
            line: Vec::new(),
        }
    }

    fn plan(&mut self, n: usize, inverse: bool) -> Arc<dyn Fft<R>> {
        let planner = &mut self.planner;
        self.plans
            .entry((n, inverse))
            .or_insert_with(|| {
                let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
                planner.plan_fft(n, dir)
            })
            .clone()
    }

    /// Transforms every grid line along `axis` in place.
    pub fn transform_axis(
        &mut self,
        grid: &GridSpec<R>,
        data: &mut [Complex<R>],
        axis: usize,
        inverse: bool,
    ) {
        debug_assert_eq!(data.len(), grid.len());
        let n = grid.axis(axis).points;
        let fft = self.plan(n, inverse);
        self.scratch.resize(fft.get_inplace_scratch_len(), Complex::default());

        let contiguous = axis == grid.dims() - 1;
        if contiguous {
            fft.process_with_scratch(data, &mut self.scratch);
        } else {
            // axis 0 of a 2D grid: columns with stride n1.
            let n1 = grid.axis(1).points;
            self.line.resize(n, Complex::default());
            for j in 0..n1 {
                for i in 0..n {
                    self.line[i] = data[i * n1 + j];
                }
                fft.process_with_scratch(&mut self.line, &mut self.scratch);
                for i in 0..n {
                    data[i * n1 + j] = self.line[i];
                }
            }
        }

        if inverse {
            let scale = R::one() / R::from_usize_exact(n);
            for v in data.iter_mut() {
                *v = v.scale(scale);
            }
        }
    }

    pub fn transform_all(&mut self, grid: &GridSpec<R>, data: &mut [Complex<R>], inverse: bool) {
        for axis in 0..grid.dims() {
            self.transform_axis(grid, data, axis, inverse);
        }
    }
}

/// d/dx_axis via Fourier multiplier i*k (Nyquist zeroed).
pub(crate) fn gradient_values<R: Real>(
    grid: &GridSpec<R>,
    values: &[Complex<R>],
    axis: usize,
    plans: &mut FftPlans<R>,
) -> Vec<Complex<R>> {
    let mut out = values.to_vec();
    plans.transform_axis(grid, &mut out, axis, false);

    let ax = grid.axis(axis);
    let k = ax.wavenumbers();
    let nyq = ax.nyquist_index();
    let ik: Vec<Complex<R>> = k
        .iter()
        .enumerate()
        .map(|(i, &ki)| {
            if i == nyq {
                Complex::default()
            } else {
                Complex::new(R::zero(), ki)
            }
        })
        .collect();

    match grid.dims() {
        1 => {
            for (v, m) in out.iter_mut().zip(ik.iter()) {
                *v *= *m;
            }
        }
        _ => {
            let n1 = grid.axis(1).points;
            for (flat, v) in out.iter_mut().enumerate() {
                let idx = if axis == 0 { flat / n1 } else { flat % n1 };
                *v *= ik[idx];
            }
        }
    }

    plans.transform_axis(grid, &mut out, axis, true);
    out
}

/// Laplacian via Fourier multiplier -(k0^2 + k1^2), Nyquist included.
pub(crate) fn laplacian_values<R: Real>(
    grid: &GridSpec<R>,
    values: &[Complex<R>],
    plans: &mut FftPlans<R>,
) -> Vec<Complex<R>> {
    let mut out = values.to_vec();
    plans.transform_all(grid, &mut out, false);

    let k0 = grid.axis(0).wavenumbers();
    match grid.dims() {
        1 => {
            for (v, &k) in out.iter_mut().zip(k0.iter()) {
                *v = v.scale(-(k * k));
            }
        }
        _ => {
            let k1 = grid.axis(1).wavenumbers();
            let n1 = k1.len();
            for (flat, v) in out.iter_mut().enumerate() {
                let ka = k0[flat / n1];
                let kb = k1[flat % n1];
                *v = v.scale(-(ka * ka + kb * kb));
            }
        }
    }

    plans.transform_all(grid, &mut out, true);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_err(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn plane_wave(grid: &GridSpec<f64>, mode0: isize, mode1: isize) -> Vec<Complex<f64>> {
        let tau = std::f64::consts::TAU;
        (0..grid.len())
            .map(|f| {
                let p = grid.point(f);
                let mut phase = tau * mode0 as f64 * (p[0] - grid.axis(0).min) / grid.axis(0).length();
                if grid.dims() == 2 {
                    phase += tau * mode1 as f64 * (p[1] - grid.axis(1).min) / grid.axis(1).length();
                }
                Complex::from_polar(1.0, phase)
            })
            .collect()
    }

    #[test]
    fn forward_inverse_round_trip_is_identity() {
        let grid: GridSpec<f64> = GridSpec::square(-1.0, 3.0, 32).unwrap();
        let orig = plane_wave(&grid, 3, -5);
        let mut data = orig.clone();
        let mut plans = FftPlans::new();
        plans.transform_all(&grid, &mut data, false);
        plans.transform_all(&grid, &mut data, true);
        assert!(max_err(&data, &orig) < 1e-12);
    }

    #[test]
    fn plane_wave_is_gradient_eigenfunction() {
        let grid: GridSpec<f64> = GridSpec::line(0.0, 4.0, 64).unwrap();
        let f = plane_wave(&grid, 5, 0);
        let k = 5.0 * std::f64::consts::TAU / 4.0;
        let mut plans = FftPlans::new();
        let g = gradient_values(&grid, &f, 0, &mut plans);
        let expect: Vec<_> = f.iter().map(|v| v * Complex::new(0.0, k)).collect();
        assert!(max_err(&g, &expect) < 1e-10);
    }

    #[test]
    fn plane_wave_is_laplacian_eigenfunction_2d() {
        let grid: GridSpec<f64> = GridSpec::square(-2.0, 2.0, 32).unwrap();
        let f = plane_wave(&grid, 2, -3);
        let tau = std::f64::consts::TAU;
        let k0 = 2.0 * tau / 4.0;
        let k1 = -3.0 * tau / 4.0;
        let mut plans = FftPlans::new();
        let lap = laplacian_values(&grid, &f, &mut plans);
        let expect: Vec<_> = f.iter().map(|v| v.scale(-(k0 * k0 + k1 * k1))).collect();
        assert!(max_err(&lap, &expect) < 1e-10);

        let g1 = gradient_values(&grid, &f, 1, &mut plans);
        let expect1: Vec<_> = f.iter().map(|v| v * Complex::new(0.0, k1)).collect();
        assert!(max_err(&g1, &expect1) < 1e-10);
    }

    #[test]
    fn gaussian_gradient_matches_symbolic_derivative() {
        // f = exp(-x^2/2): f' = -x f, f'' = (x^2 - 1) f. Tails and spectrum both
        // decay below 1e-14 on [-16, 16) at 256 points, so spectral error is
        // pure roundoff.
        let grid: GridSpec<f64> = GridSpec::line(-16.0, 16.0, 256).unwrap();
        let f: Vec<Complex<f64>> = (0..grid.len())
            .map(|j| Complex::new((-grid.point(j)[0].powi(2) / 2.0).exp(), 0.0))
            .collect();
        let mut plans = FftPlans::new();
        let g = gradient_values(&grid, &f, 0, &mut plans);
        let lap = laplacian_values(&grid, &f, &mut plans);
        for j in 0..grid.len() {
            let x = grid.point(j)[0];
            assert!((g[j].re - (-x) * f[j].re).abs() < 1e-10);
            assert!(g[j].im.abs() < 1e-10);
            assert!((lap[j].re - (x * x - 1.0) * f[j].re).abs() < 1e-10);
        }
    }

    #[test]
    fn central_difference_agreement_improves_as_dx_squared() {
        // The spectral derivative is exact to roundoff here, so the deviation
        // from a centered difference is the FD truncation error, O(dx^2).
        fn fd_deviation(points: usize) -> f64 {
            let grid: GridSpec<f64> = GridSpec::line(-16.0, 16.0, points).unwrap();
            let f: Vec<Complex<f64>> = (0..grid.len())
                .map(|j| Complex::new((-grid.point(j)[0].powi(2) / 2.0).exp(), 0.0))
                .collect();
            let mut plans = FftPlans::new();
            let g = gradient_values(&grid, &f, 0, &mut plans);
            let n = grid.len();
            let dx = grid.axis(0).dx();
            (0..n)
                .map(|j| {
                    let fd = (f[(j + 1) % n].re - f[(j + n - 1) % n].re) / (2.0 * dx);
                    (g[j].re - fd).abs()
                })
                .fold(0.0, f64::max)
        }
        let coarse = fd_deviation(128);
        let fine = fd_deviation(256);
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn nyquist_mode_gradient_is_zero() {
        // cos(k_nyq x) sampled on the grid alternates +-1; its sampled
        // derivative is identically zero and the multiplier must agree.
        let grid: GridSpec<f64> = GridSpec::line(0.0, 2.0, 32).unwrap();
        let f: Vec<Complex<f64>> = (0..32)
            .map(|j| Complex::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let mut plans = FftPlans::new();
        let g = gradient_values(&grid, &f, 0, &mut plans);
        for v in &g {
            assert!(v.norm() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn round_trip_preserves_random_fields(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let grid: GridSpec<f64> = GridSpec::line(-1.0, 1.0, 64).unwrap();
            let orig: Vec<Complex<f64>> = (0..64)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut data = orig.clone();
            let mut plans = FftPlans::new();
            plans.transform_all(&grid, &mut data, false);
            plans.transform_all(&grid, &mut data, true);
            prop_assert!(max_err(&data, &orig) < 1e-12);
        }
    }
}
