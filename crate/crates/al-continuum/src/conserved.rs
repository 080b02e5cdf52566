//! Conserved functionals of the Ablowitz-Ladik flow and their monitors.
//!
//! With `beta_n = s conj(alpha_n)` (`s = +1` defocusing, `-1` focusing), the
//! functionals tracked here are
//!
//! ```text
//! M    = -sum_n ln(1 - alpha_n beta_n),
//! H    = -sum_n [alpha_n beta_{n+1} + alpha_{n+1} beta_n + 2 ln(1 - alpha_n beta_n)],
//! H_2  = -sum_n [2 ln(1 - alpha_n beta_n)
//!                + 2 Re(alpha_{n+2} beta_n - (1/2) alpha_n^2 beta_{n-1}^2
//!                       - alpha_{n+1} alpha_n beta_n beta_{n-1})],
//! A(z) = sum_{l>=1} (-1)^{l+1}/l tr{(Lambda Gamma)^l} = log det(1 + Lambda Gamma),
//! G(kappa h) = s 2/(e^{4 kappa h}+1) M - s tanh(2 kappa h) Re[A(e^{kappa h}) + A(i e^{kappa h})],
//! ```
//!
//! where `Lambda = alpha (S - 1/z)^{-1}`, `Gamma = beta (z - S)^{-1}`, and `S`
//! is the cyclic shift `(S f)_n = f_{n+1}` on the truncated lattice.  `A(z)`
//! is evaluated by dense eigendecomposition of `Lambda Gamma` and the
//! principal logarithm per eigenvalue, valid because the spectral radius stays
//! below one under the series convergence condition
//! `|z|/(|z|^2 - 1) ||alpha||^2 < 1`.
//!
//! The combination `G` is coercive at the arc inflection points: its
//! quadratic part is `int sin^2(theta) |a(theta)|^2 / (sinh^2(2 kappa h) +
//! sin^2(theta)) dtheta / 2 pi >= 0` regardless of the sign convention.

use crate::dynamics::{Sign, Trajectory};
use crate::fft;
use crate::spectral::{forward_transform, project_arc, LatticeField, SpectralError};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

/// Largest lattice for which the dense `A(z)` route is permitted.
pub const MAX_DENSE_LATTICE: usize = 2048;

/// Failure modes of the conserved-functional evaluations.
#[derive(Debug, Error)]
pub enum ConservedError {
    #[error("logarithm domain violated at site {site}: 1 - alpha beta = {one_minus:.6e}")]
    LogDomain { site: usize, one_minus: f64 },
    #[error("{functional} has imaginary residual {residual:.3e} above roundoff")]
    ImaginaryResidual { functional: &'static str, residual: f64 },
    #[error("spectral parameter must satisfy |z| > 1, got |z| = {0:.6e}")]
    SpectralParameter(f64),
    #[error(
        "series convergence condition violated: |z|/(|z|^2-1) ||alpha||^2 = {bound:.6e} >= 1"
    )]
    OutsideConvergence { bound: f64 },
    #[error("dense generating-function route is gated to M <= {max}, got M = {m}")]
    MatrixTooLarge { m: usize, max: usize },
    #[error("eigenvalue solver failed with LAPACK info = {info}")]
    EigenSolver { info: i32 },
    #[error("kappa must be positive and finite, got {0}")]
    InvalidKappa(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

mod lapack {
    use num_complex::Complex64;

    extern "C" {
        fn zgeev_(
            jobvl: *const u8,
            jobvr: *const u8,
            n: *const i32,
            a: *mut Complex64,
            lda: *const i32,
            w: *mut Complex64,
            vl: *mut Complex64,
            ldvl: *const i32,
            vr: *mut Complex64,
            ldvr: *const i32,
            work: *mut Complex64,
            lwork: *const i32,
            rwork: *mut f64,
            info: *mut i32,
        );
    }

    /// Eigenvalues of a dense column-major `n x n` matrix (contents destroyed).
    pub fn eigenvalues(a: &mut [Complex64], n: usize) -> Result<Vec<Complex64>, i32> {
        assert_eq!(a.len(), n * n);
        let dim = n as i32;
        let mut w = vec![Complex64::default(); n];
        let mut rwork = vec![0.0f64; 2 * n.max(1)];
        let mut info = 0i32;
        let jobv = b'N';

        let mut query = [Complex64::default()];
        unsafe {
            zgeev_(
                &jobv, &jobv, &dim, a.as_mut_ptr(), &dim, w.as_mut_ptr(),
                std::ptr::null_mut(), &1, std::ptr::null_mut(), &1,
                query.as_mut_ptr(), &-1, rwork.as_mut_ptr(), &mut info,
            );
        }
        if info != 0 {
            return Err(info);
        }
        let lwork = (query[0].re as i32).max(2 * dim).max(1);
        let mut work = vec![Complex64::default(); lwork as usize];
        unsafe {
            zgeev_(
                &jobv, &jobv, &dim, a.as_mut_ptr(), &dim, w.as_mut_ptr(),
                std::ptr::null_mut(), &1, std::ptr::null_mut(), &1,
                work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(), &mut info,
            );
        }
        if info != 0 {
            return Err(info);
        }
        Ok(w)
    }
}

fn beta_of(v: Complex64, s: f64) -> Complex64 {
    s * v.conj()
}

/// `M(alpha) = -sum_n ln(1 - alpha_n beta_n)`.
pub fn mass(field: &LatticeField, sign: Sign) -> Result<f64, ConservedError> {
    let s = sign.value();
    let mut total = 0.0;
    for (site, v) in field.values().iter().enumerate() {
        let one_minus = 1.0 - s * v.norm_sqr();
        if one_minus <= 0.0 {
            return Err(ConservedError::LogDomain { site, one_minus });
        }
        total -= one_minus.ln();
    }
    Ok(total)
}

/// `H(alpha)`, the Hamiltonian generating the flow.  Accumulated in complex
/// arithmetic; an imaginary residual above roundoff is flagged as an error
/// rather than silently discarded.
pub fn hamiltonian(field: &LatticeField, sign: Sign) -> Result<f64, ConservedError> {
    let v = field.values();
    let m = v.len();
    let s = sign.value();
    let mut total = Complex64::default();
    for i in 0..m {
        let a = v[i];
        let a_next = v[(i + 1) % m];
        let one_minus = 1.0 - s * a.norm_sqr();
        if one_minus <= 0.0 {
            return Err(ConservedError::LogDomain { site: i, one_minus });
        }
        total -= a * beta_of(a_next, s) + a_next * beta_of(a, s) + 2.0 * one_minus.ln();
    }
    let scale = total.re.abs().max(1.0);
    if total.im.abs() > 1e-10 * scale {
        return Err(ConservedError::ImaginaryResidual {
            functional: "hamiltonian",
            residual: total.im.abs(),
        });
    }
    Ok(total.re)
}

/// `H_2(alpha)`, the next conserved quantity in the hierarchy; its quadratic
/// part is `s int 4 sin^2(theta) |a(theta)|^2 dtheta / 2 pi`.
pub fn h2(field: &LatticeField, sign: Sign) -> Result<f64, ConservedError> {
    let v = field.values();
    let m = v.len();
    let s = sign.value();
    let mut total = 0.0;
    for i in 0..m {
        let a = v[i];
        let one_minus = 1.0 - s * a.norm_sqr();
        if one_minus <= 0.0 {
            return Err(ConservedError::LogDomain { site: i, one_minus });
        }
        let b = beta_of(a, s);
        let a1 = v[(i + 1) % m];
        let a2 = v[(i + 2) % m];
        let b_prev = beta_of(v[(i + m - 1) % m], s);
        let bracket = a2 * b - 0.5 * a * a * b_prev * b_prev - a1 * a * b * b_prev;
        total -= 2.0 * one_minus.ln() + 2.0 * bracket.re;
    }
    Ok(total)
}

/// Quadratic part of [`h2`]: `s M^{-1} sum_j 4 sin^2(theta_j) |a(theta_j)|^2`.
pub fn h2_quadratic(field: &LatticeField, sign: Sign) -> f64 {
    let spec = forward_transform(field);
    let m = spec.m();
    let mut total = 0.0;
    for j in 0..m {
        let sn = spec.theta(j).sin();
        total += 4.0 * sn * sn * spec.values()[j].norm_sqr();
    }
    sign.value() * total / m as f64
}

/// Spectral parameter and resolvent factors for the generating function.
///
/// The resolvents are circulants, diagonal in the Fourier basis with symbols
/// `1/(e^{i theta} - 1/z)` and `1/(z - e^{i theta})`, so the factors are held
/// as convolution kernels; [`Self::lambda`]/[`Self::gamma`] materialize the
/// dense matrices `Lambda_{nm} = alpha_n k1(n-m)`, `Gamma_{nm} = beta_n k2(n-m)`.
pub struct GeneratingFunctionContext {
    z: Complex64,
    m: usize,
    alpha: Vec<Complex64>,
    beta: Vec<Complex64>,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    sym1: Vec<Complex64>,
}

impl GeneratingFunctionContext {
    pub fn new(
        field: &LatticeField,
        sign: Sign,
        z: Complex64,
    ) -> Result<Self, ConservedError> {
        if !(z.norm() > 1.0) || !z.norm().is_finite() {
            return Err(ConservedError::SpectralParameter(z.norm()));
        }
        let m = field.m();
        if m > MAX_DENSE_LATTICE {
            return Err(ConservedError::MatrixTooLarge { m, max: MAX_DENSE_LATTICE });
        }
        let s = sign.value();
        let alpha = field.values().to_vec();
        let beta: Vec<Complex64> = alpha.iter().map(|&a| beta_of(a, s)).collect();
        let z_inv = 1.0 / z;
        let mut sym1 = Vec::with_capacity(m);
        let mut sym2 = Vec::with_capacity(m);
        for j in 0..m {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            sym1.push(1.0 / (phase - z_inv));
            sym2.push(1.0 / (z - phase));
        }
        let mut k1 = sym1.clone();
        fft::fft_inverse(&mut k1);
        let mut k2 = sym2.clone();
        fft::fft_inverse(&mut k2);
        Ok(Self { z, m, alpha, beta, k1, k2, sym1 })
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Dense `Lambda = alpha (S - 1/z)^{-1}`, column-major.
    pub fn lambda(&self) -> Vec<Complex64> {
        let m = self.m;
        let mut out = vec![Complex64::default(); m * m];
        for col in 0..m {
            for row in 0..m {
                out[row + col * m] = self.alpha[row] * self.k1[(row + m - col) % m];
            }
        }
        out
    }

    /// Dense `Gamma = beta (z - S)^{-1}`, column-major.
    pub fn gamma(&self) -> Vec<Complex64> {
        let m = self.m;
        let mut out = vec![Complex64::default(); m * m];
        for col in 0..m {
            for row in 0..m {
                out[row + col * m] = self.beta[row] * self.k2[(row + m - col) % m];
            }
        }
        out
    }

    /// `||Lambda||_{HS}^2`; every row repeats the full kernel, so this is
    /// `||alpha||^2 sum_r |k1(r)|^2`.
    pub fn lambda_hs_norm_sq(&self) -> f64 {
        let a: f64 = self.alpha.iter().map(|v| v.norm_sqr()).sum();
        let k: f64 = self.k1.iter().map(|v| v.norm_sqr()).sum();
        a * k
    }

    /// `||Gamma||_{HS}^2 = ||alpha||^2 sum_r |k2(r)|^2`.
    pub fn gamma_hs_norm_sq(&self) -> f64 {
        let a: f64 = self.beta.iter().map(|v| v.norm_sqr()).sum();
        let k: f64 = self.k2.iter().map(|v| v.norm_sqr()).sum();
        a * k
    }

    /// Dense product `Lambda Gamma`, column-major, built column-by-column via
    /// circular convolution (two transforms per column).
    pub fn product(&self) -> Vec<Complex64> {
        let m = self.m;
        let mut out = vec![Complex64::default(); m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(col, chunk)| {
            let mut w: Vec<Complex64> = (0..m)
                .map(|k| self.beta[k] * self.k2[(k + m - col) % m])
                .collect();
            fft::fft_forward(&mut w);
            for (wv, sym) in w.iter_mut().zip(&self.sym1) {
                *wv *= sym;
            }
            fft::fft_inverse(&mut w);
            for (row, item) in chunk.iter_mut().enumerate() {
                *item = self.alpha[row] * w[row];
            }
        });
        out
    }

    /// `tr{Lambda Gamma}`, the quadratic term of the generating function.
    pub fn quadratic_trace(&self) -> Complex64 {
        let m = self.m;
        let mut total = Complex64::default();
        for n in 0..m {
            for k in 0..m {
                total += self.alpha[n]
                    * self.beta[k]
                    * self.k1[(n + m - k) % m]
                    * self.k2[(k + m - n) % m];
            }
        }
        total
    }
}

/// Series convergence bound `|z|/(|z|^2 - 1) ||alpha||^2`; the generating
/// function is defined where this is below one.
pub fn convergence_bound(z: Complex64, l2_norm_sq: f64) -> f64 {
    let r = z.norm();
    r / (r * r - 1.0) * l2_norm_sq
}

/// `A(z; alpha) = log det(1 + Lambda Gamma)` as the sum of principal
/// logarithms over the eigenvalues of the dense product.
pub fn generating_function(
    field: &LatticeField,
    z: Complex64,
    sign: Sign,
) -> Result<Complex64, ConservedError> {
    if !(z.norm() > 1.0) || !z.norm().is_finite() {
        return Err(ConservedError::SpectralParameter(z.norm()));
    }
    let bound = convergence_bound(z, field.l2_norm_sq());
    if !(bound < 1.0) {
        return Err(ConservedError::OutsideConvergence { bound });
    }
    let ctx = GeneratingFunctionContext::new(field, sign, z)?;
    let mut prod = ctx.product();
    let eigs = lapack::eigenvalues(&mut prod, ctx.dim())
        .map_err(|info| ConservedError::EigenSolver { info })?;
    let mut total = Complex64::default();
    for mu in eigs {
        let shifted = 1.0 + mu;
        if shifted.norm() < 1e-14 {
            return Err(ConservedError::OutsideConvergence { bound: f64::INFINITY });
        }
        total += shifted.ln();
    }
    Ok(total)
}

/// Coercive combination
/// `G(kappa h) = s 2/(e^{4 kappa h}+1) M - s tanh(2 kappa h) Re[A(e^{kappa h}) + A(i e^{kappa h})]`.
pub fn g_functional(
    field: &LatticeField,
    kappa: f64,
    sign: Sign,
) -> Result<f64, ConservedError> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(ConservedError::InvalidKappa(kappa));
    }
    let kh = kappa * field.h();
    let s = sign.value();
    let m_val = mass(field, sign)?;
    let radius = kh.exp();
    let a_real = generating_function(field, Complex64::new(radius, 0.0), sign)?;
    let a_imag = generating_function(field, Complex64::new(0.0, radius), sign)?;
    Ok(s * 2.0 / ((4.0 * kh).exp() + 1.0) * m_val
        - s * (2.0 * kh).tanh() * (a_real.re + a_imag.re))
}

/// Quadratic part of [`g_functional`]:
/// `M^{-1} sum_j sin^2(theta_j) |a(theta_j)|^2 / (sinh^2(2 kappa h) + sin^2(theta_j))`.
/// Non-negative and independent of the sign convention.
pub fn g_quadratic(field: &LatticeField, kappa: f64) -> Result<f64, ConservedError> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(ConservedError::InvalidKappa(kappa));
    }
    let kh = kappa * field.h();
    let sh = (2.0 * kh).sinh();
    let spec = forward_transform(field);
    let m = spec.m();
    let mut total = 0.0;
    for j in 0..m {
        let sn = spec.theta(j).sin();
        total += sn * sn * spec.values()[j].norm_sqr() / (sh * sh + sn * sn);
    }
    Ok(total / m as f64)
}

/// Analytic floor for the generating-function scale: `kappa_0` with
/// `sinh(kappa_0 h) = ||alpha||^2`, i.e. convergence bound exactly `1/2` at
/// `|z| = e^{kappa_0 h}`.
pub fn kappa_floor_analytic(l2_norm_sq: f64, h: f64) -> f64 {
    l2_norm_sq.asinh() / h
}

/// Measured floor: scans `kappa` downward from just inside the smooth-cutoff
/// cap `pi/(4h)` by factors of `0.9`, returning the smallest `kappa` where the
/// convergence condition still holds with a 2x margin
/// (`sinh(kappa h) >= ||alpha||^2`), or `None` if even the cap fails.
pub fn kappa_floor_scan(l2_norm_sq: f64, h: f64) -> Option<f64> {
    let cap = 0.999 * PI / (4.0 * h);
    let ok = |kappa: f64| (kappa * h).sinh() >= l2_norm_sq;
    if !ok(cap) {
        return None;
    }
    // Near-zero mass admits arbitrarily small scales; stop at a fixed tiny
    // spectral scale instead of scanning into the subnormals.
    let floor = 1e-8 / h;
    let mut best = cap;
    loop {
        let next = 0.9 * best;
        if next < floor || !ok(next) {
            return Some(best);
        }
        best = next;
    }
}

/// Time series `t -> ||(1 - P_delta) alpha(t)|| / ||alpha(0)||` measuring how
/// much mass the flow sends toward the arc inflection points `sin^2 theta >=
/// delta^2`.
pub fn suppression_ratio(
    traj: &Trajectory,
    delta: f64,
) -> Result<Vec<(f64, f64)>, ConservedError> {
    let norm0 = traj.initial().l2_norm();
    let mut out = Vec::with_capacity(traj.len());
    for (t, f) in traj.snapshots() {
        let projected = project_arc(f, delta)?;
        let residual_sq = (f.l2_norm_sq() - projected.l2_norm_sq()).max(0.0);
        let ratio = if norm0 > 0.0 { residual_sq.sqrt() / norm0 } else { 0.0 };
        out.push((*t, ratio));
    }
    Ok(out)
}

/// Which conserved functional a [`DriftReport`] tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackedFunctional {
    Mass,
    Hamiltonian,
    SecondHamiltonian,
    Generating { kappa: f64 },
}

impl TrackedFunctional {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Mass => "mass",
            Self::Hamiltonian => "hamiltonian",
            Self::SecondHamiltonian => "h2",
            Self::Generating { .. } => "g",
        }
    }

    pub fn evaluate(&self, field: &LatticeField, sign: Sign) -> Result<f64, ConservedError> {
        match self {
            Self::Mass => mass(field, sign),
            Self::Hamiltonian => hamiltonian(field, sign),
            Self::SecondHamiltonian => h2(field, sign),
            Self::Generating { kappa } => g_functional(field, *kappa, sign),
        }
    }
}

/// Values of one functional along a trajectory with its worst-case drift.
#[derive(Debug, Clone)]
pub struct DriftReport {
    pub functional: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub max_abs_drift: f64,
    pub max_rel_drift: f64,
}

impl DriftReport {
    /// Computes drifts of `values` relative to the first entry.
    pub fn from_series(functional: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        let reference = values.first().copied().unwrap_or(0.0);
        let max_abs_drift = values
            .iter()
            .map(|v| (v - reference).abs())
            .fold(0.0, f64::max);
        let scale = if reference.abs() > f64::MIN_POSITIVE { reference.abs() } else { 1.0 };
        Self {
            functional: functional.into(),
            times,
            values,
            max_abs_drift,
            max_rel_drift: max_abs_drift / scale,
        }
    }
}

/// Evaluates `which` on every `sample_stride`-th snapshot (endpoints always
/// included) and reports the drift; snapshot evaluations run in parallel.
pub fn functional_drift(
    traj: &Trajectory,
    which: TrackedFunctional,
    sample_stride: usize,
) -> Result<DriftReport, ConservedError> {
    let stride = sample_stride.max(1);
    let sign = traj.params().sign;
    let last = traj.len() - 1;
    let picks: Vec<usize> = (0..traj.len())
        .filter(|i| i % stride == 0 || *i == last)
        .collect();
    let evaluated: Result<Vec<(f64, f64)>, ConservedError> = picks
        .par_iter()
        .map(|&i| {
            let (t, f) = &traj.snapshots()[i];
            Ok((*t, which.evaluate(f, sign)?))
        })
        .collect();
    let series = evaluated?;
    let (times, values): (Vec<f64>, Vec<f64>) = series.into_iter().unzip();
    Ok(DriftReport::from_series(which.label(), times, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, EvolutionParams};
    use crate::spectral::{sample_initial_data, InitData, SamplingParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(h: f64, m: usize, amp: f64, seed: u64) -> LatticeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..m)
            .map(|_| Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
            .collect();
        LatticeField::new(h, 0.0, values).unwrap()
    }

    fn single_site(h: f64, m: usize, a: Complex64) -> LatticeField {
        let mut f = LatticeField::zeros(h, m).unwrap();
        f.values_mut()[m / 2] = a;
        f
    }

    fn scale_field(f: &LatticeField, lambda: f64) -> LatticeField {
        LatticeField::new(
            f.h(),
            f.t_lat(),
            f.values().iter().map(|v| lambda * v).collect(),
        )
        .unwrap()
    }

    #[test]
    fn eigen_solver_handles_a_rotation_matrix() {
        let mut a = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let mut eigs = lapack::eigenvalues(&mut a, 2).unwrap();
        eigs.sort_by(|p, q| p.im.partial_cmp(&q.im).unwrap());
        assert!((eigs[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((eigs[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn mass_of_single_site_matches_scalar_formula() {
        let f = single_site(0.5, 16, Complex64::new(0.1, 0.0));
        let defoc = mass(&f, Sign::Defocusing).unwrap();
        assert!((defoc - (-(0.99f64).ln())).abs() < 1e-15);
        let foc = mass(&f, Sign::Focusing).unwrap();
        assert!((foc - (-(1.01f64).ln())).abs() < 1e-15);
        let zero = LatticeField::zeros(0.5, 16).unwrap();
        assert_eq!(mass(&zero, Sign::Defocusing).unwrap(), 0.0);
    }

    #[test]
    fn mass_rejects_fields_outside_the_defocusing_disk() {
        let f = single_site(0.5, 16, Complex64::new(1.0, 0.0));
        assert!(matches!(
            mass(&f, Sign::Defocusing),
            Err(ConservedError::LogDomain { .. })
        ));
        assert!(mass(&f, Sign::Focusing).is_ok());
    }

    #[test]
    fn hamiltonian_of_plane_wave_matches_direct_summation() {
        let m = 32usize;
        let theta = 2.0 * PI * 3.0 / m as f64;
        let a = 0.15;
        let values: Vec<Complex64> = (0..m)
            .map(|i| {
                let n = (i as i64 - m as i64 / 2) as f64;
                a * Complex64::from_polar(1.0, n * theta)
            })
            .collect();
        let f = LatticeField::new(0.5, 0.0, values).unwrap();
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let s = sign.value();
            let expected = -(m as f64) * (2.0 * s * a * a * theta.cos()
                + 2.0 * (1.0 - s * a * a).ln());
            let got = hamiltonian(&f, sign).unwrap();
            assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn h2_of_single_site_reduces_to_twice_the_mass() {
        let f = single_site(0.5, 16, Complex64::new(0.2, 0.1));
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let got = h2(&f, sign).unwrap();
            assert!((got - 2.0 * mass(&f, sign).unwrap()).abs() < 1e-14);
            assert!((hamiltonian(&f, sign).unwrap() - 2.0 * mass(&f, sign).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn h2_approaches_its_quadratic_part_at_fourth_order() {
        let base = random_field(0.5, 32, 1.0, 20);
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let resid = |lambda: f64| {
                let f = scale_field(&base, lambda);
                (h2(&f, sign).unwrap() - h2_quadratic(&f, sign)).abs()
            };
            let r1 = resid(2e-2);
            let r2 = resid(1e-2);
            let order = (r1 / r2).log2();
            assert!((3.8..=4.2).contains(&order), "{sign:?}: order = {order:.2}");
        }
    }

    #[test]
    fn hilbert_schmidt_identities_hold() {
        let f = random_field(0.25, 64, 0.4, 21);
        let l2 = f.l2_norm_sq();
        for z in [
            Complex64::new(1.5, 0.0),
            Complex64::new(0.0, (0.4f64).exp()),
            Complex64::new(1.1, 0.8),
        ] {
            let ctx = GeneratingFunctionContext::new(&f, Sign::Defocusing, z).unwrap();
            let r2 = z.norm_sqr();
            let lam_expect = r2 / (r2 - 1.0) * l2;
            let gam_expect = 1.0 / (r2 - 1.0) * l2;
            assert!(
                (ctx.lambda_hs_norm_sq() - lam_expect).abs() < 1e-8 * lam_expect,
                "z = {z}"
            );
            assert!(
                (ctx.gamma_hs_norm_sq() - gam_expect).abs() < 1e-8 * gam_expect,
                "z = {z}"
            );
        }
    }

    #[test]
    fn dense_factors_match_kernel_shortcut() {
        let f = random_field(0.25, 16, 0.3, 22);
        let ctx = GeneratingFunctionContext::new(&f, Sign::Focusing, Complex64::new(1.4, 0.2))
            .unwrap();
        let lam = ctx.lambda();
        let direct: f64 = lam.iter().map(|v| v.norm_sqr()).sum();
        assert!((direct - ctx.lambda_hs_norm_sq()).abs() < 1e-12 * direct);
        let gam = ctx.gamma();
        let direct_g: f64 = gam.iter().map(|v| v.norm_sqr()).sum();
        assert!((direct_g - ctx.gamma_hs_norm_sq()).abs() < 1e-12 * direct_g);
    }

    #[test]
    fn product_matches_dense_multiplication() {
        let f = random_field(0.25, 16, 0.3, 23);
        let ctx = GeneratingFunctionContext::new(&f, Sign::Defocusing, Complex64::new(1.3, -0.4))
            .unwrap();
        let m = ctx.dim();
        let lam = ctx.lambda();
        let gam = ctx.gamma();
        let mut expect = vec![Complex64::default(); m * m];
        for col in 0..m {
            for row in 0..m {
                let mut acc = Complex64::default();
                for k in 0..m {
                    acc += lam[row + k * m] * gam[k + col * m];
                }
                expect[row + col * m] = acc;
            }
        }
        let got = ctx.product();
        let err: f64 = got
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn quadratic_trace_matches_spectral_quadrature() {
        // tr{Lambda Gamma} = s int |a(theta)|^2 / (z^2 e^{-i theta} - 1) dtheta/2pi
        // up to kernel wrap-around on the periodic lattice, which enters at
        // O(|z|^{-M} ||alpha||^2).
        let f = random_field(0.25, 48, 0.3, 24);
        for sign in [Sign::Defocusing, Sign::Focusing] {
            for z in [Complex64::new(1.5, 0.0), Complex64::new(0.0, 1.6)] {
                let ctx = GeneratingFunctionContext::new(&f, sign, z).unwrap();
                let got = ctx.quadratic_trace();
                let spec = forward_transform(&f);
                let m = spec.m();
                let mut quad = Complex64::default();
                for j in 0..m {
                    let theta = spec.theta(j);
                    let denom = z * z * Complex64::from_polar(1.0, -theta) - 1.0;
                    quad += spec.values()[j].norm_sqr() / denom;
                }
                quad *= sign.value() / m as f64;
                let wrap = 20.0 * z.norm().powi(-(m as i32)) * f.l2_norm_sq();
                assert!((got - quad).norm() < wrap + 1e-12, "z = {z}");
            }
        }
    }

    #[test]
    fn log_det_matches_truncated_trace_series() {
        let f = random_field(0.25, 16, 0.25, 25);
        let z = Complex64::new(1.5, 0.0);
        let sign = Sign::Focusing;
        let a = generating_function(&f, z, sign).unwrap();

        let ctx = GeneratingFunctionContext::new(&f, sign, z).unwrap();
        let m = ctx.dim();
        let prod = ctx.product();
        let matmul = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            let mut out = vec![Complex64::default(); m * m];
            for col in 0..m {
                for k in 0..m {
                    let y_entry = y[k + col * m];
                    for row in 0..m {
                        out[row + col * m] += x[row + k * m] * y_entry;
                    }
                }
            }
            out
        };
        let trace = |x: &[Complex64]| -> Complex64 {
            (0..m).map(|i| x[i + i * m]).sum()
        };
        let mut series = Complex64::default();
        let mut power = prod.clone();
        for l in 1..=40 {
            let sign_l = if l % 2 == 1 { 1.0 } else { -1.0 };
            series += sign_l / l as f64 * trace(&power);
            power = matmul(&power, &prod);
        }
        assert!((a - series).norm() < 1e-12 * a.norm().max(1e-6));
    }

    #[test]
    fn generating_function_is_zero_on_zero_data_and_gated() {
        let zero = LatticeField::zeros(0.5, 16).unwrap();
        let a = generating_function(&zero, Complex64::new(2.0, 0.0), Sign::Defocusing).unwrap();
        assert!(a.norm() < 1e-14);

        let big = LatticeField::zeros(0.1, 4096).unwrap();
        assert!(matches!(
            GeneratingFunctionContext::new(&big, Sign::Defocusing, Complex64::new(2.0, 0.0)),
            Err(ConservedError::MatrixTooLarge { .. })
        ));

        let f = random_field(0.5, 16, 0.9, 26); // large mass
        assert!(matches!(
            generating_function(&f, Complex64::new(1.01, 0.0), Sign::Defocusing),
            Err(ConservedError::OutsideConvergence { .. })
        ));
        assert!(matches!(
            generating_function(&f, Complex64::new(0.5, 0.0), Sign::Defocusing),
            Err(ConservedError::SpectralParameter(_))
        ));
    }

    #[test]
    fn generating_function_is_analytic_in_z() {
        let f = random_field(0.25, 32, 0.1, 27);
        let sign = Sign::Defocusing;
        let z0 = Complex64::new(1.4, 0.0);
        let diff = |e: f64| {
            let plus = generating_function(&f, z0 + e, sign).unwrap();
            let minus = generating_function(&f, z0 - e, sign).unwrap();
            (plus - minus) / (2.0 * e)
        };
        let d1 = diff(0.04);
        let d2 = diff(0.02);
        let d3 = diff(0.01);
        let order = ((d1 - d2).norm() / (d2 - d3).norm()).log2();
        assert!(order >= 1.9, "centered-difference order = {order:.2}");
    }

    #[test]
    fn g_matches_its_quadratic_part_at_fourth_order() {
        let base = random_field(0.25, 32, 1.0, 28);
        let kappa = 2.0;
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let resid = |lambda: f64| {
                let f = scale_field(&base, lambda);
                (g_functional(&f, kappa, sign).unwrap() - g_quadratic(&f, kappa).unwrap()).abs()
            };
            let r1 = resid(4e-2);
            let r2 = resid(2e-2);
            let order = (r1 / r2).log2();
            assert!((3.7..=4.3).contains(&order), "{sign:?}: order = {order:.2}");
        }
    }

    #[test]
    fn g_is_nonnegative_on_small_fields() {
        for seed in 30..34 {
            let f = random_field(0.25, 32, 5e-2, seed);
            for sign in [Sign::Defocusing, Sign::Focusing] {
                let g = g_functional(&f, 2.0, sign).unwrap();
                assert!(g >= -1e-12, "{sign:?}: g = {g:.3e}");
                assert!(g_quadratic(&f, 2.0).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn g_is_conserved_along_the_flow() {
        let f = random_field(0.25, 32, 8e-2, 35);
        let params = EvolutionParams {
            sign: Sign::Focusing,
            dt: 0.01,
            t_final_lat: 1.0,
            snapshot_stride: 20,
            ..Default::default()
        };
        let traj = evolve(&f, &params).unwrap();
        let report = functional_drift(&traj, TrackedFunctional::Generating { kappa: 2.0 }, 1)
            .unwrap();
        assert!(report.max_rel_drift < 1e-6, "drift = {:.3e}", report.max_rel_drift);
    }

    #[test]
    fn hamiltonians_are_conserved_along_the_flow() {
        let f = random_field(0.25, 48, 0.15, 36);
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let params = EvolutionParams {
                sign,
                dt: 0.01,
                t_final_lat: 2.0,
                snapshot_stride: 50,
                ..Default::default()
            };
            let traj = evolve(&f, &params).unwrap();
            for (which, tol) in [
                (TrackedFunctional::Mass, 1e-8),
                (TrackedFunctional::Hamiltonian, 1e-7),
                (TrackedFunctional::SecondHamiltonian, 1e-7),
            ] {
                let report = functional_drift(&traj, which, 1).unwrap();
                assert!(
                    report.max_rel_drift < tol,
                    "{sign:?}/{}: drift = {:.3e}",
                    report.functional,
                    report.max_rel_drift
                );
            }
        }
    }

    #[test]
    fn mass_norm_equivalence_in_the_small_regime() {
        for seed in 40..44 {
            let raw = random_field(0.25, 64, 1.0, seed);
            let target = 1.0 / 20.0;
            let f = scale_field(&raw, (target / raw.l2_norm_sq()).sqrt());
            for sign in [Sign::Defocusing, Sign::Focusing] {
                let m_abs = mass(&f, sign).unwrap().abs();
                let n2 = f.l2_norm_sq();
                assert!(0.5 * m_abs <= n2 && n2 <= 2.0 * m_abs, "{sign:?}");
            }
        }
    }

    #[test]
    fn defocusing_mass_confines_sites_to_a_disk() {
        let f = random_field(0.25, 32, 0.6, 45);
        let m_val = mass(&f, Sign::Defocusing).unwrap();
        let radius_sq = 1.0 - (-m_val).exp();
        for v in f.values() {
            assert!(v.norm_sqr() <= radius_sq + 1e-15);
        }
    }

    #[test]
    fn kappa_scan_brackets_the_analytic_floor() {
        let l2 = 0.05;
        let h = 0.1;
        let analytic = kappa_floor_analytic(l2, h);
        let scanned = kappa_floor_scan(l2, h).unwrap();
        assert!(scanned >= analytic - 1e-12);
        assert!(scanned <= analytic / 0.9 + 1e-12, "scan {scanned} vs floor {analytic}");
        // A field too massive for the cap yields no admissible kappa.
        assert!(kappa_floor_scan(2.0, 1.0).is_none());
        // Zero mass terminates at the scan's tiny-scale floor.
        let zero = kappa_floor_scan(0.0, 0.4).unwrap();
        assert!(zero > 0.0 && zero < 1e-7 / 0.4, "zero-mass scan stopped at {zero}");
    }

    #[test]
    fn suppression_ratio_vanishes_on_band_limited_data_and_shrinks_with_delta() {
        // Sampled data lives within |theta| <= 2Nh < delta-arc, so the t = 0
        // ratio is zero.
        let g = InitData::Gaussian { amplitude: 0.2, width: 1.0, center: 0.0, frequency: 0.0 };
        let params = SamplingParams {
            h: 0.04,
            gamma: 0.5,
            window_half_width: 10.24,
            oversample: 4,
            enforce_small_h: true,
            relax_gamma: false,
        };
        let alpha = sample_initial_data(&g, &g, &params).unwrap();
        let evo = EvolutionParams {
            dt: 0.05,
            t_final_lat: 0.1,
            snapshot_stride: 1,
            ..Default::default()
        };
        let traj = evolve(&alpha, &evo).unwrap();
        let series = suppression_ratio(&traj, 0.75).unwrap();
        assert!(series[0].1 < 1e-12);

        // Nested arcs: the ratio is non-increasing in delta at fixed time.
        let f = random_field(0.25, 32, 0.3, 46);
        let still = EvolutionParams {
            dt: 0.1,
            t_final_lat: 0.1,
            ..Default::default()
        };
        let traj2 = evolve(&f, &still).unwrap();
        let mut prev = f64::INFINITY;
        for delta in [0.3, 0.5, 0.7, 0.9] {
            let r = suppression_ratio(&traj2, delta).unwrap()[0].1;
            assert!(r <= prev + 1e-14);
            prev = r;
        }
    }

    #[test]
    fn drift_report_reduces_series_correctly() {
        let report = DriftReport::from_series(
            "mass",
            vec![0.0, 1.0, 2.0],
            vec![2.0, 2.5, 1.8],
        );
        assert_eq!(report.functional, "mass");
        assert!((report.max_abs_drift - 0.5).abs() < 1e-15);
        assert!((report.max_rel_drift - 0.25).abs() < 1e-15);
        assert!(report.max_abs_drift >= 0.0 && report.max_rel_drift >= 0.0);
    }

    #[test]
    fn spectrum_of_product_stays_inside_the_unit_disk_under_the_bound() {
        let f = random_field(0.25, 24, 0.15, 47);
        let z = Complex64::new(1.5, 0.0);
        assert!(convergence_bound(z, f.l2_norm_sq()) < 1.0);
        let ctx = GeneratingFunctionContext::new(&f, Sign::Defocusing, z).unwrap();
        let mut prod = ctx.product();
        let eigs = lapack::eigenvalues(&mut prod, ctx.dim()).unwrap();
        for mu in eigs {
            assert!(mu.norm() < 1.0);
        }
    }
}
