//! Internal FFT plumbing shared by the lattice and continuum transforms.
//!
//! Two storage layouts are used throughout the crate:
//!
//! * lattice fields: site index `i` holds `n = i - M/2`, spectra live on the
//!   fundamental arc `theta in [-pi/2, 3pi/2)` with index `j` holding
//!   `theta_k = 2 pi (j - M/4) / M` (slow bump at 0, modulated bump at pi,
//!   neither wraps);
//! * continuum windows: sample index `j` holds `x_j = -L + j dx`, spectra are
//!   centered, index `k` holding `xi_k = 2 pi (k - M/2) / (M dx)`.
//!
//! Both are plain rotations of the natural FFT order, chosen so the rotation
//! counts below are exact for `M % 4 == 0`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward FFT: `out_k = sum_m buf_m e^{-2 pi i m k / M}`.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place inverse FFT including the `1/M` normalization.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Centered sites -> arc spectrum: `\hat a(theta_k) = sum_n a_n e^{-i n theta_k}`.
pub(crate) fn lattice_forward(values: &[Complex64]) -> Vec<Complex64> {
    let m = values.len();
    debug_assert_eq!(m % 4, 0);
    let mut buf = values.to_vec();
    buf.rotate_left(m / 2);
    fft_forward(&mut buf);
    buf.rotate_left(3 * m / 4);
    buf
}

/// Arc spectrum -> centered sites (exact inverse of [`lattice_forward`]).
pub(crate) fn lattice_inverse(spectrum: &[Complex64]) -> Vec<Complex64> {
    let m = spectrum.len();
    debug_assert_eq!(m % 4, 0);
    let mut buf = spectrum.to_vec();
    buf.rotate_left(m / 4);
    fft_inverse(&mut buf);
    buf.rotate_left(m / 2);
    buf
}

/// Centered window samples -> centered spectrum `\hat f(xi_k) = dx sum_j f(x_j) e^{-i x_j xi_k}`.
pub(crate) fn grid_forward(values: &[Complex64], dx: f64) -> Vec<Complex64> {
    let m = values.len();
    debug_assert_eq!(m % 2, 0);
    let mut buf = values.to_vec();
    buf.rotate_left(m / 2);
    fft_forward(&mut buf);
    buf.rotate_left(m / 2);
    for v in buf.iter_mut() {
        *v *= dx;
    }
    buf
}

/// Centered spectrum -> window samples, `f(x_j) = (2L)^{-1} sum_k \hat f(xi_k) e^{i x_j xi_k}`.
pub(crate) fn grid_inverse(spectrum: &[Complex64], dx: f64) -> Vec<Complex64> {
    let m = spectrum.len();
    debug_assert_eq!(m % 2, 0);
    let mut buf = spectrum.to_vec();
    buf.rotate_left(m / 2);
    fft_inverse(&mut buf);
    buf.rotate_left(m / 2);
    let scale = 1.0 / dx;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(m: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    /// O(M^2) reference for the lattice transform in the arc layout.
    fn naive_lattice_forward(values: &[Complex64]) -> Vec<Complex64> {
        let m = values.len() as i64;
        (0..m)
            .map(|j| {
                let theta = 2.0 * PI * (j - m / 4) as f64 / m as f64;
                (0..m)
                    .map(|i| {
                        let n = (i - m / 2) as f64;
                        values[i as usize] * Complex64::from_polar(1.0, -n * theta)
                    })
                    .sum()
            })
            .collect()
    }

    /// O(M^2) reference for the centered grid transform.
    fn naive_grid_forward(values: &[Complex64], dx: f64) -> Vec<Complex64> {
        let m = values.len() as i64;
        let l = dx * m as f64 / 2.0;
        (0..m)
            .map(|k| {
                let xi = PI * (k - m / 2) as f64 / l;
                (0..m)
                    .map(|j| {
                        let x = -l + j as f64 * dx;
                        values[j as usize] * Complex64::from_polar(1.0, -x * xi) * dx
                    })
                    .sum()
            })
            .collect()
    }

    fn max_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn lattice_transform_matches_naive_dft() {
        let v = random_field(32, 7);
        let fast = lattice_forward(&v);
        let slow = naive_lattice_forward(&v);
        let scale = slow.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_dist(&fast, &slow) / scale < 1e-12);
    }

    #[test]
    fn lattice_round_trip_is_identity() {
        let v = random_field(64, 8);
        let back = lattice_inverse(&lattice_forward(&v));
        assert!(max_dist(&v, &back) < 1e-12);
    }

    #[test]
    fn grid_transform_matches_naive_dft() {
        let v = random_field(24, 9);
        let dx = 0.35;
        let fast = grid_forward(&v, dx);
        let slow = naive_grid_forward(&v, dx);
        let scale = slow.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_dist(&fast, &slow) / scale < 1e-12);
    }

    #[test]
    fn grid_round_trip_is_identity() {
        let v = random_field(40, 10);
        let back = grid_inverse(&grid_forward(&v, 0.125), 0.125);
        assert!(max_dist(&v, &back) < 1e-12);
    }
}
