//! Lattice fields, continuum windows, and the spectral maps between them.
//!
//! A lattice field lives on sites `n = -M/2, ..., M/2 - 1` with spacing `h`,
//! so the spatial window is `[-L, L)` with `L = M h / 2`.  Its spectrum is
//! indexed by the fundamental arc `theta in [-pi/2, 3pi/2)`: the half
//! `|theta| < pi/2` carries the slowly varying channel and the half around
//! `theta = pi` carries the Neel-modulated channel.  The two channels are
//! extracted by [`split_fields`] and measured against continuum profiles via
//! [`reconstruct`], the arc-restricted Fourier interpolant
//!
//! ```text
//! (R c)(x) = h^{-1} int_{|theta| < pi/2} e^{i x theta / h} \hat c(theta) dtheta / 2 pi .
//! ```
//!
//! Initial data combining both channels is produced by [`sample_initial_data`]:
//! `alpha_n(0) = h (P_N psi_0)(h n) + (-1)^n h (P_N phi_0)(h n)` with the
//! band limit `N = h^{-gamma}`.

use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Failure modes of the sampling and spectral maps.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("lattice spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("lattice size must be a multiple of 4 and at least 8, got {0}")]
    InvalidSize(usize),
    #[error("window half-width {l} is not an integer number of cells of size {dx}")]
    WindowGridMismatch { l: f64, dx: f64 },
    #[error("field contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("band-limit exponent gamma must lie in (0, 13/18], got {0}")]
    GammaRange(f64),
    #[error("aliasing: band limit N = {n:.6e} needs 2 N h < pi, but 2 N h = {two_n_h:.6e}")]
    Aliasing { n: f64, two_n_h: f64 },
    #[error(
        "spacing h = {h:.6e} exceeds the small-field threshold {h0:.6e} \
         set by the data mass (disable enforcement to proceed anyway)"
    )]
    MassThreshold { h: f64, h0: f64 },
    #[error("oversampling factor must be at least 4, got {0}")]
    Oversample(usize),
    #[error("arc half-width delta must lie in (0, 1), got {0}")]
    DeltaRange(f64),
    #[error("smooth cutoff needs kappa > 0 and kappa h < pi/4, got kappa h = {0:.6e}")]
    KappaArc(f64),
    #[error("grids do not match: ({dx_a}, {len_a}) vs ({dx_b}, {len_b})")]
    GridMismatch { dx_a: f64, len_a: usize, dx_b: f64, len_b: usize },
    #[error("profile file field is not resolvable without sample data")]
    MissingSamples,
}

/// `C^1` plateau mollifier: `1` on `|x| <= 1`, `0` on `|x| >= 2`, and the
/// bridge `exp(1 - 1/(1 - (|x|-1)^2))` in between.
pub fn bump(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let u = a - 1.0;
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

fn check_values(values: &[Complex64]) -> Result<(), SpectralError> {
    for (i, v) in values.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(SpectralError::NonFinite(i));
        }
    }
    Ok(())
}

/// Complex field on the centered lattice `n = -M/2, ..., M/2 - 1` with
/// spacing `h`, tagged with the lattice time it was recorded at.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    h: f64,
    t_lat: f64,
    values: Vec<Complex64>,
}

impl LatticeField {
    /// Wraps raw site values, validating spacing, size, and finiteness.
    pub fn new(h: f64, t_lat: f64, values: Vec<Complex64>) -> Result<Self, SpectralError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(SpectralError::InvalidSpacing(h));
        }
        if values.len() % 4 != 0 || values.len() < 8 {
            return Err(SpectralError::InvalidSize(values.len()));
        }
        check_values(&values)?;
        Ok(Self { h, t_lat, values })
    }

    /// All-zero field of size `m`.
    pub fn zeros(h: f64, m: usize) -> Result<Self, SpectralError> {
        Self::new(h, 0.0, vec![Complex64::default(); m])
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t_lat(&self) -> f64 {
        self.t_lat
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// Half-width `L = M h / 2` of the spatial window `[-L, L)`.
    pub fn window_half_width(&self) -> f64 {
        0.5 * self.h * self.values.len() as f64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub(crate) fn set_t_lat(&mut self, t_lat: f64) {
        self.t_lat = t_lat;
    }

    /// Site number `n = i - M/2` stored at index `i`.
    pub fn site(&self, i: usize) -> i64 {
        i as i64 - self.values.len() as i64 / 2
    }

    /// Physical position `x = n h` of storage index `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.site(i) as f64 * self.h
    }

    /// Unweighted squared norm `sum_n |alpha_n|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `sum |alpha_n - beta_n|^2` over matching grids.
    pub fn l2_distance(&self, other: &Self) -> Result<f64, SpectralError> {
        if self.h != other.h || self.m() != other.m() {
            return Err(SpectralError::GridMismatch {
                dx_a: self.h,
                len_a: self.m(),
                dx_b: other.h,
                len_b: other.m(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

/// Spectrum of a lattice field on the fundamental arc `theta in [-pi/2, 3pi/2)`,
/// index `j` holding `theta_j = 2 pi (j - M/4) / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    h: f64,
    t_lat: f64,
    values: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t_lat(&self) -> f64 {
        self.t_lat
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Arc angle `theta_j` stored at index `j`.
    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * (j as i64 - self.values.len() as i64 / 4) as f64 / self.values.len() as f64
    }

    /// Site-side squared norm via Plancherel, `M^{-1} sum_j |\hat a(theta_j)|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }
}

/// Lattice field -> arc spectrum, `\hat a(theta_j) = sum_n a_n e^{-i n theta_j}`.
pub fn forward_transform(field: &LatticeField) -> SpectralCoefficients {
    SpectralCoefficients {
        h: field.h,
        t_lat: field.t_lat,
        values: fft::lattice_forward(&field.values),
    }
}

/// Arc spectrum -> lattice field (exact inverse of [`forward_transform`]).
pub fn inverse_transform(spec: &SpectralCoefficients) -> LatticeField {
    LatticeField {
        h: spec.h,
        t_lat: spec.t_lat,
        values: fft::lattice_inverse(&spec.values),
    }
}

/// Complex function sampled on the centered window `x_j = -L + j dx`, with an
/// optional certificate that its spectrum vanishes for `|xi| >= bandlimit`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumField {
    dx: f64,
    values: Vec<Complex64>,
    bandlimit: Option<f64>,
}

impl ContinuumField {
    pub fn new(
        dx: f64,
        values: Vec<Complex64>,
        bandlimit: Option<f64>,
    ) -> Result<Self, SpectralError> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(SpectralError::InvalidSpacing(dx));
        }
        if values.len() % 2 != 0 || values.len() < 4 {
            return Err(SpectralError::InvalidSize(values.len()));
        }
        check_values(&values)?;
        Ok(Self { dx, values, bandlimit })
    }

    /// Builds the field from its centered spectrum.
    pub fn from_spectrum(
        dx: f64,
        spectrum: &[Complex64],
        bandlimit: Option<f64>,
    ) -> Result<Self, SpectralError> {
        Self::new(dx, fft::grid_inverse(spectrum, dx), bandlimit)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Half-width `L = len * dx / 2` of the window `[-L, L)`.
    pub fn window_half_width(&self) -> f64 {
        0.5 * self.dx * self.values.len() as f64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Position `x_j = -L + j dx` of storage index `j`.
    pub fn x(&self, j: usize) -> f64 {
        -self.window_half_width() + j as f64 * self.dx
    }

    /// Frequency `xi_k = 2 pi (k - M/2) / (M dx)` of spectrum index `k`.
    pub fn xi(&self, k: usize) -> f64 {
        let m = self.values.len() as i64;
        2.0 * PI * (k as i64 - m / 2) as f64 / (m as f64 * self.dx)
    }

    pub fn bandlimit(&self) -> Option<f64> {
        self.bandlimit
    }

    /// Centered spectrum `\hat f(xi_k) = dx sum_j f(x_j) e^{-i x_j xi_k}`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        fft::grid_forward(&self.values, self.dx)
    }

    /// Windowed squared norm `dx sum_j |f(x_j)|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.dx * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `L^2` distance over matching grids.
    pub fn l2_distance(&self, other: &Self) -> Result<f64, SpectralError> {
        if self.dx != other.dx || self.len() != other.len() {
            return Err(SpectralError::GridMismatch {
                dx_a: self.dx,
                len_a: self.len(),
                dx_b: other.dx,
                len_b: other.len(),
            });
        }
        Ok((self.dx
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>())
        .sqrt())
    }

    /// Sharp Fourier cutoff keeping `|xi| < cut`.
    pub fn sharp_lowpass(&self, cut: f64) -> Self {
        let mut spec = self.spectrum();
        let m = self.values.len();
        for k in 0..m {
            if self.xi(k).abs() >= cut {
                spec[k] = Complex64::default();
            }
        }
        let bl = Some(self.bandlimit.map_or(cut, |b| b.min(cut)));
        Self {
            dx: self.dx,
            values: fft::grid_inverse(&spec, self.dx),
            bandlimit: bl,
        }
    }

    /// Spectral mass `(2L)^{-1} sum_{|xi_k| >= cut} |\hat f(xi_k)|^2` above `cut`.
    pub fn tail_norm_sq(&self, cut: f64) -> f64 {
        let spec = self.spectrum();
        let two_l = 2.0 * self.window_half_width();
        spec.iter()
            .enumerate()
            .filter(|(k, _)| self.xi(*k).abs() >= cut)
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            / two_l
    }

    /// Exact resampling to `new_len` points on the same window by centered
    /// zero-padding (or truncation) of the spectrum.
    pub fn resample(&self, new_len: usize) -> Result<Self, SpectralError> {
        if new_len % 2 != 0 || new_len < 4 {
            return Err(SpectralError::InvalidSize(new_len));
        }
        let m = self.values.len();
        if new_len == m {
            return Ok(self.clone());
        }
        let spec = self.spectrum();
        let mut new_spec = vec![Complex64::default(); new_len];
        let keep = m.min(new_len);
        for k in 0..keep {
            let src = k + (m - keep) / 2;
            let dst = k + (new_len - keep) / 2;
            new_spec[dst] = spec[src];
        }
        let new_dx = self.dx * m as f64 / new_len as f64;
        Self::from_spectrum(new_dx, &new_spec, self.bandlimit)
    }

    /// Values at the lattice points `x = n h`; `h` must be an integer multiple
    /// of `dx` and the windows must agree.
    pub fn subsample(&self, h: f64) -> Result<Vec<Complex64>, SpectralError> {
        let ratio = h / self.dx;
        let q = ratio.round();
        if !(q >= 1.0) || (ratio - q).abs() > 1e-9 * q {
            return Err(SpectralError::WindowGridMismatch { l: h, dx: self.dx });
        }
        let q = q as usize;
        Ok(self.values.iter().step_by(q).copied().collect())
    }
}

/// Analytic or tabulated initial profile for one channel.
///
/// The Gaussian family is `a exp(-(x-c)^2 / w^2) e^{i nu x}` with Fourier
/// transform `a w sqrt(pi) exp(-w^2 (xi - nu)^2 / 4) e^{-i c (xi - nu)}`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitData {
    Gaussian { amplitude: f64, width: f64, center: f64, frequency: f64 },
    Samples(ContinuumField),
}

impl InitData {
    /// Squared `L^2` mass of the profile (closed form for Gaussians).
    pub fn l2_norm_sq(&self) -> f64 {
        match self {
            Self::Gaussian { amplitude, width, .. } => {
                amplitude * amplitude * width.abs() * (PI / 2.0).sqrt()
            }
            Self::Samples(f) => f.l2_norm_sq(),
        }
    }

    /// Fourier transform at frequency `xi` for analytic profiles.
    fn spectrum_at(&self, xi: f64) -> Option<Complex64> {
        match self {
            Self::Gaussian { amplitude, width, center, frequency } => {
                let d = xi - frequency;
                let mag = amplitude * width * PI.sqrt() * (-width * width * d * d / 4.0).exp();
                Some(mag * Complex64::from_polar(1.0, -center * d))
            }
            Self::Samples(_) => None,
        }
    }

    /// Band-limited restriction `P_{<= cut}` sampled on the window grid
    /// `(dx, len)`.  Tabulated profiles are resampled spectrally first.
    pub fn bandlimited(
        &self,
        cut: f64,
        dx: f64,
        len: usize,
    ) -> Result<ContinuumField, SpectralError> {
        let probe = ContinuumField::new(dx, vec![Complex64::default(); len], None)?;
        match self {
            Self::Gaussian { .. } => {
                let mut spec = vec![Complex64::default(); len];
                for (k, s) in spec.iter_mut().enumerate() {
                    let xi = probe.xi(k);
                    if xi.abs() <= cut {
                        *s = self.spectrum_at(xi).expect("analytic profile");
                    }
                }
                ContinuumField::from_spectrum(dx, &spec, Some(cut * (1.0 + 1e-12)))
            }
            Self::Samples(f) => {
                let half = 0.5 * dx * len as f64;
                if (f.window_half_width() - half).abs() > 1e-9 * half {
                    return Err(SpectralError::GridMismatch {
                        dx_a: f.dx,
                        len_a: f.len(),
                        dx_b: dx,
                        len_b: len,
                    });
                }
                let on_grid = f.resample(len)?;
                Ok(on_grid.sharp_lowpass(cut * (1.0 + 1e-12)))
            }
        }
    }
}

/// Geometry and guards for [`sample_initial_data`].
#[derive(Debug, Clone)]
pub struct SamplingParams {
    /// Lattice spacing `h`.
    pub h: f64,
    /// Band-limit exponent: `N = h^{-gamma}`.
    pub gamma: f64,
    /// Spatial window half-width `L`; `2L/h` must be a multiple of 4.
    pub window_half_width: f64,
    /// Fine-grid refinement used to render profiles (`dx = h / oversample`).
    pub oversample: usize,
    /// Enforce the small-field threshold `h <= min(1, (1/100) / mass)`.
    pub enforce_small_h: bool,
    /// Accept band-limit exponents beyond `13/18` (the aliasing guard
    /// `2 N h < pi` still applies).
    pub relax_gamma: bool,
}

impl SamplingParams {
    /// Number of lattice sites `M = 2L/h`, validated.
    pub fn lattice_len(&self) -> Result<usize, SpectralError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SpectralError::InvalidSpacing(self.h));
        }
        let ratio = 2.0 * self.window_half_width / self.h;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * m.max(1.0) || m < 8.0 {
            return Err(SpectralError::WindowGridMismatch {
                l: self.window_half_width,
                dx: self.h,
            });
        }
        let m = m as usize;
        if m % 4 != 0 {
            return Err(SpectralError::InvalidSize(m));
        }
        Ok(m)
    }

    /// Band limit `N = h^{-gamma}`.
    pub fn band_limit(&self) -> f64 {
        self.h.powf(-self.gamma)
    }
}

/// Largest admissible spacing `min(1, (1/100) (||psi_0||^2 + ||phi_0||^2)^{-1})`
/// for the given initial mass.
pub fn small_h_threshold(psi0: &InitData, phi0: &InitData) -> f64 {
    let mass = psi0.l2_norm_sq() + phi0.l2_norm_sq();
    if mass == 0.0 {
        1.0
    } else {
        (0.01 / mass).min(1.0)
    }
}

/// Samples the two-channel initial datum
/// `alpha_n(0) = h (P_N psi_0)(h n) + (-1)^n h (P_N phi_0)(h n)`, `N = h^{-gamma}`.
pub fn sample_initial_data(
    psi0: &InitData,
    phi0: &InitData,
    params: &SamplingParams,
) -> Result<LatticeField, SpectralError> {
    let gamma_cap = if params.relax_gamma { f64::INFINITY } else { 13.0 / 18.0 + 1e-12 };
    if !(params.gamma > 0.0 && params.gamma <= gamma_cap) {
        return Err(SpectralError::GammaRange(params.gamma));
    }
    if params.oversample < 4 {
        return Err(SpectralError::Oversample(params.oversample));
    }
    let m = params.lattice_len()?;
    let h = params.h;
    let n_cut = params.band_limit();
    if 2.0 * n_cut * h >= PI {
        return Err(SpectralError::Aliasing { n: n_cut, two_n_h: 2.0 * n_cut * h });
    }
    if params.enforce_small_h {
        let h0 = small_h_threshold(psi0, phi0);
        if h > h0 {
            return Err(SpectralError::MassThreshold { h, h0 });
        }
    }

    let q = params.oversample;
    let fine_len = q * m;
    let dx = h / q as f64;
    let psi = psi0.bandlimited(n_cut, dx, fine_len)?;
    let phi = phi0.bandlimited(n_cut, dx, fine_len)?;

    let values = (0..m)
        .map(|i| {
            let n = i as i64 - m as i64 / 2;
            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            h * (psi.values[q * i] + sign * phi.values[q * i])
        })
        .collect();
    LatticeField::new(h, 0.0, values)
}

/// Channel extraction: restricts the arc spectrum to `theta in [-pi/2, pi/2)`
/// (slow channel) and `theta - pi in [-pi/2, pi/2)` (modulated channel,
/// re-centered and unwound by `e^{4 i t_lat}`), returning the two continuum
/// interpolants on the window grid with `dx = h/4`.
///
/// The split is exactly norm-preserving:
/// `||psi^h||_{L^2}^2 + ||phi^h||_{L^2}^2 = h^{-1} ||alpha||_{l^2}^2`.
pub fn split_fields(field: &LatticeField) -> (ContinuumField, ContinuumField) {
    let m = field.m();
    let h = field.h;
    let spec = fft::lattice_forward(&field.values);
    let fine_len = 4 * m;
    let dx = h / 4.0;
    let phase = Complex64::from_polar(1.0, 4.0 * field.t_lat);

    // Slow channel: arc indices j in [0, M/2) hold theta in [-pi/2, pi/2);
    // continuum frequency xi = theta / h sits at centered index j + 7M/4.
    let mut psi_spec = vec![Complex64::default(); fine_len];
    for j in 0..m / 2 {
        psi_spec[j + 7 * m / 4] = spec[j];
    }
    // Modulated channel: arc indices j in [M/2, M) hold theta - pi in [-pi/2, pi/2).
    let mut phi_spec = vec![Complex64::default(); fine_len];
    for j in m / 2..m {
        phi_spec[j + 5 * m / 4] = phase * spec[j];
    }

    let bl = Some(PI / (2.0 * h) * (1.0 + 1e-12));
    let psi = ContinuumField {
        dx,
        values: fft::grid_inverse(&psi_spec, dx),
        bandlimit: bl,
    };
    let phi = ContinuumField {
        dx,
        values: fft::grid_inverse(&phi_spec, dx),
        bandlimit: bl,
    };
    (psi, phi)
}

/// Arc-restricted Fourier interpolant of a lattice field on the fine grid
/// `dx = h/4`: only the slow half `|theta| < pi/2` of the spectrum enters, so
/// `||R c||_{L^2}^2 = h^{-1} ||c||_{l^2}^2` exactly for slow-supported `c`.
pub fn reconstruct(field: &LatticeField) -> ContinuumField {
    let (psi, _) = split_fields(field);
    psi
}

/// Sharp projection onto arc modes with `sin^2 theta < delta^2`; requires
/// `0 < delta < 1`.
pub fn project_arc(field: &LatticeField, delta: f64) -> Result<LatticeField, SpectralError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SpectralError::DeltaRange(delta));
    }
    let mut spec = forward_transform(field);
    let dd = delta * delta;
    for j in 0..spec.m() {
        let s = spec.theta(j).sin();
        if s * s >= dd {
            spec.values_mut()[j] = Complex64::default();
        }
    }
    Ok(inverse_transform(&spec))
}

/// Smooth two-bump cutoff with symbol `chi(theta/(kappa h)) + chi((theta - pi)/(kappa h))`
/// built from [`bump`]; requires `kappa > 0` and `kappa h < pi/4` so the bumps
/// stay disjoint on the arc.
pub fn project_smooth(field: &LatticeField, kappa: f64) -> Result<LatticeField, SpectralError> {
    let kh = kappa * field.h;
    if !(kappa > 0.0) || !(kh < PI / 4.0) {
        return Err(SpectralError::KappaArc(kh));
    }
    let mut spec = forward_transform(field);
    for j in 0..spec.m() {
        let theta = spec.theta(j);
        let sym = bump(theta / kh) + bump((theta - PI) / kh);
        spec.values_mut()[j] *= sym;
    }
    Ok(inverse_transform(&spec))
}
