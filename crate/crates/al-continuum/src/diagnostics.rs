//! Quantitative measurements on lattice trajectories and their continuum
//! channels: mixed space-time norms, compactness profiles (Fourier-side and
//! spatial-side tails), the on-site effective-nonlinearity comparison, the
//! oscillatory cross-channel term, and the headline channel-vs-reference
//! convergence error.

use crate::dynamics::Trajectory;
use crate::nls::NlsState;
use crate::quad::simpson_weights;
use crate::spectral::{split_fields, ContinuumField, SpectralError};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// One measured quantity per snapshot time, tagged for report emission.
#[derive(Debug, Clone, Serialize)]
pub struct NormProfile {
    pub label: String,
    pub parameter: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl NormProfile {
    fn new(label: &str, parameter: f64, times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        Self { label: label.to_owned(), parameter, times, values }
    }

    /// Largest value over the time grid.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("unsupported space-time norm pair (q, r) = ({q}, {r}); expected (6, 6) or (4, inf)")]
    InvalidExponents { q: f64, r: f64 },
    #[error("need at least {need} snapshots, got {got}")]
    TooFewSnapshots { need: usize, got: usize },
    #[error("snapshots are not equally spaced in time")]
    UnequalSpacing,
    #[error(
        "time grid under-resolved: halving the snapshot density changes the norm \
         by a relative {rel:.3e} (tolerance 1e-2)"
    )]
    UnderResolvedTime { rel: f64 },
    #[error("kappa = {kappa:.6e} invalid: need 0 < kappa h < pi/2 at h = {h:.6e}")]
    KappaRange { kappa: f64, h: f64 },
    #[error("radius = {radius:.6e} invalid: need 1 <= radius < window half-width {window:.6e}")]
    RadiusRange { radius: f64, window: f64 },
    #[error("input exceeds the bandlimit {cut:.6e}: relative spectral tail {tail:.3e}")]
    Bandlimit { cut: f64, tail: f64 },
    #[error("snapshot time grids or spatial grids do not match")]
    TimeGridMismatch,
    #[error("no snapshot at time zero to anchor the oscillatory integral")]
    MissingAnchor,
    #[error(
        "envelope under-resolved in time: step-to-step change is a fraction {rel:.3e} \
         of its size (limit 0.5)"
    )]
    EnvelopeUnderResolved { rel: f64 },
}

fn check_uniform_times(times: &[f64]) -> Result<f64, DiagnosticsError> {
    let delta = times[1] - times[0];
    if !(delta > 0.0) {
        return Err(DiagnosticsError::UnequalSpacing);
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - delta).abs() > 1e-9 * delta {
            return Err(DiagnosticsError::UnequalSpacing);
        }
    }
    Ok(delta)
}

/// `int f dt` by composite Simpson over `idx` (uniformly spaced picks).
fn simpson_time_integral(times: &[f64], f: &[f64], idx: &[usize]) -> f64 {
    let n = idx.len() - 1;
    let d = (times[idx[n]] - times[idx[0]]) / n as f64;
    let w = simpson_weights(n);
    d * w.iter().zip(idx).map(|(wi, &i)| wi * f[i]).sum::<f64>()
}

/// Mixed space-time norm `( int ||alpha(t)||_{l^r}^q dt )^{1/q}` over the
/// lattice-time snapshot grid, with composite Simpson time weights.
///
/// Supported pairs: `(q, r) = (6, 6)` and `(4, inf)` (pass `f64::INFINITY`).
/// Fails if halving the snapshot density moves the result by 1% or more.
pub fn strichartz_norm(traj: &Trajectory, q: f64, r: f64) -> Result<f64, DiagnosticsError> {
    let linf = if q == 6.0 && r == 6.0 {
        false
    } else if q == 4.0 && r.is_infinite() {
        true
    } else {
        return Err(DiagnosticsError::InvalidExponents { q, r });
    };
    let snaps = traj.snapshots();
    if snaps.len() < 5 {
        return Err(DiagnosticsError::TooFewSnapshots { need: 5, got: snaps.len() });
    }
    let times = traj.times();
    check_uniform_times(&times)?;

    // q-th power of the inner norm, per snapshot.
    let f: Vec<f64> = snaps
        .iter()
        .map(|(_, field)| {
            if linf {
                field.linf_norm().powi(4)
            } else {
                field.values().iter().map(|v| v.norm_sqr().powi(3)).sum::<f64>()
            }
        })
        .collect();

    let all: Vec<usize> = (0..f.len()).collect();
    let value = simpson_time_integral(&times, &f, &all).max(0.0).powf(1.0 / q);

    // Density check: compare against the half-density quadrature on a common
    // span (dropping the last snapshot when the interval count is odd).
    let last = if (f.len() - 1) % 2 == 0 { f.len() - 1 } else { f.len() - 2 };
    let full_span: Vec<usize> = (0..=last).collect();
    let half_span: Vec<usize> = (0..=last).step_by(2).collect();
    let v_full = simpson_time_integral(&times, &f, &full_span).max(0.0).powf(1.0 / q);
    let v_half = simpson_time_integral(&times, &f, &half_span).max(0.0).powf(1.0 / q);
    let rel = (v_full - v_half).abs() / v_full.max(f64::MIN_POSITIVE);
    if rel >= 1e-2 {
        return Err(DiagnosticsError::UnderResolvedTime { rel });
    }
    Ok(value)
}

/// Per-snapshot inner norms feeding [`strichartz_norm`], for report emission.
pub fn strichartz_series(traj: &Trajectory, q: f64, r: f64) -> Result<NormProfile, DiagnosticsError> {
    let (label, linf) = if q == 6.0 && r == 6.0 {
        ("L6l6", false)
    } else if q == 4.0 && r.is_infinite() {
        ("L4linf", true)
    } else {
        return Err(DiagnosticsError::InvalidExponents { q, r });
    };
    let values = traj
        .snapshots()
        .iter()
        .map(|(_, field)| {
            if linf {
                field.linf_norm()
            } else {
                field.values().iter().map(|v| v.norm_sqr().powi(3)).sum::<f64>().powf(1.0 / 6.0)
            }
        })
        .collect();
    Ok(NormProfile::new(label, q, traj.times(), values))
}

/// Fourier-tail profile `sqrt(||P_{|xi|>=kappa} psi^h(t)||^2 +
/// ||P_{|xi|>=kappa} phi^h(t)||^2)` per snapshot.
pub fn equicontinuity_series(
    traj: &Trajectory,
    kappa: f64,
) -> Result<NormProfile, DiagnosticsError> {
    let h = traj.h();
    if !(kappa > 0.0) || kappa * h >= PI / 2.0 {
        return Err(DiagnosticsError::KappaRange { kappa, h });
    }
    let values = traj
        .snapshots()
        .iter()
        .map(|(_, field)| {
            let (psi, phi) = split_fields(field);
            (psi.tail_norm_sq(kappa) + phi.tail_norm_sq(kappa)).sqrt()
        })
        .collect();
    Ok(NormProfile::new("equicontinuity", kappa, traj.times(), values))
}

/// Sup over snapshots of the Fourier-tail profile.
pub fn equicontinuity_profile(traj: &Trajectory, kappa: f64) -> Result<f64, DiagnosticsError> {
    Ok(equicontinuity_series(traj, kappa)?.sup())
}

/// Smooth window: 1 on `|x| <= 1`, 0 on `|x| >= 2`, monotone between.
fn plateau_cutoff(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let ramp = |t: f64| (-1.0 / t).exp();
        let up = ramp(2.0 - a);
        up / (up + ramp(a - 1.0))
    }
}

/// Spatial-tail profile `h^{-1} || (1 - chi(nh/R)) alpha(t) ||_{l^2}^2` per
/// snapshot, with the smooth plateau cutoff `chi` (1 on `|x| <= 1`, 0 beyond 2).
pub fn tightness_series(traj: &Trajectory, radius: f64) -> Result<NormProfile, DiagnosticsError> {
    let window = traj.initial().window_half_width();
    if !(radius >= 1.0) || radius >= window {
        return Err(DiagnosticsError::RadiusRange { radius, window });
    }
    let h = traj.h();
    let values = traj
        .snapshots()
        .iter()
        .map(|(_, field)| {
            field
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let weight = 1.0 - plateau_cutoff(field.x(i) / radius);
                    weight * weight * v.norm_sqr()
                })
                .sum::<f64>()
                / h
        })
        .collect();
    Ok(NormProfile::new("tightness", radius, traj.times(), values))
}

/// Sup over snapshots of the spatial-tail profile.
pub fn tightness_profile(traj: &Trajectory, radius: f64) -> Result<f64, DiagnosticsError> {
    Ok(tightness_series(traj, radius)?.sup())
}

fn require_bandlimited(field: &ContinuumField, cut: f64) -> Result<(), DiagnosticsError> {
    let total = field.l2_norm_sq();
    let tail = field.tail_norm_sq(cut);
    if tail > 1e-20 + 1e-12 * total {
        return Err(DiagnosticsError::Bandlimit {
            cut,
            tail: tail / total.max(f64::MIN_POSITIVE),
        });
    }
    Ok(())
}

/// Compares the exact neighbor nonlinearity with its on-site surrogate.
///
/// From channel samples band-limited below `h^{-1/2}`, builds
/// `a_n = h [psi(nh) + (-1)^n e^{-4 i t / h^2} phi(nh)]`, then measures
///
/// ```text
/// || |a_n|^2 (a_{n-1} + a_{n+1})  -  2 h |a_n|^2 [psi(nh) - (-1)^n e^{-4 i t / h^2} phi(nh)] ||_{l^2}
/// ```
///
/// normalized by `h^{5/2}`.  The neighbor shift flips the sign of the
/// modulated channel, which is what decouples the two limits; the returned
/// ratio tends to zero with `h`.  (A focusing/defocusing sign would multiply
/// both terms alike and drops out of the norm.)
pub fn sign_flip_check(
    psi: &ContinuumField,
    phi: &ContinuumField,
    h: f64,
    t: f64,
) -> Result<f64, DiagnosticsError> {
    let cut = h.powf(-0.5);
    require_bandlimited(psi, cut)?;
    require_bandlimited(phi, cut)?;
    let psi_s = psi.subsample(h)?;
    let phi_s = phi.subsample(h)?;
    if psi_s.len() != phi_s.len() || psi_s.len() < 4 || psi_s.len() % 2 != 0 {
        return Err(DiagnosticsError::TimeGridMismatch);
    }
    let m = psi_s.len();
    let modulation = Complex64::from_polar(1.0, -4.0 * t / (h * h));
    let parity = |i: usize| -> f64 {
        let n = i as i64 - m as i64 / 2;
        if n.rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let alpha: Vec<Complex64> = (0..m)
        .map(|i| h * (psi_s[i] + parity(i) * modulation * phi_s[i]))
        .collect();
    let mut diff_sq = 0.0;
    for i in 0..m {
        let left = alpha[(i + m - 1) % m];
        let right = alpha[(i + 1) % m];
        let exact = alpha[i].norm_sqr() * (left + right);
        let onsite =
            2.0 * h * alpha[i].norm_sqr() * (psi_s[i] - parity(i) * modulation * phi_s[i]);
        diff_sq += (exact - onsite).norm_sqr();
    }
    Ok(diff_sq.sqrt() / h.powf(2.5))
}

/// Oscillatory moments `m0 = int_0^d e^{i mu u} du` and
/// `m1 = int_0^d u e^{i mu u} du`, series-evaluated near the resonance.
fn filon_moments(mu: f64, d: f64) -> (Complex64, Complex64) {
    let z = mu * d;
    if z.abs() < 0.5 {
        let iz = Complex64::new(0.0, z);
        let mut term = Complex64::new(1.0, 0.0); // (iz)^k / k!
        let mut m0 = Complex64::default();
        let mut m1 = Complex64::default();
        for k in 0..24 {
            m0 += term / (k as f64 + 1.0);
            m1 += term / (k as f64 + 2.0);
            term *= iz / (k as f64 + 1.0);
        }
        (d * m0, d * d * m1)
    } else {
        let e = Complex64::from_polar(1.0, z);
        let imu = Complex64::new(0.0, mu);
        let m0 = (e - 1.0) / imu;
        let m1 = d * e / imu - m0 / imu;
        (m0, m1)
    }
}

/// Size of the nonresonant channel interaction
///
/// ```text
/// max_t || int_0^t e^{i (t-s) Laplacian} [ e^{-8 i s / h^2} (phi^h)^2 conj(psi^h) ](s) ds ||_{L^2}
/// ```
///
/// over the snapshot times.  Within each snapshot interval the envelope is
/// interpolated linearly and the fast phase integrated exactly (Filon rule);
/// the snapshot spacing only has to resolve the envelope, which is checked.
pub fn cross_term_magnitude(
    psi: &[(f64, ContinuumField)],
    phi: &[(f64, ContinuumField)],
    h: f64,
) -> Result<f64, DiagnosticsError> {
    let k = psi.len();
    if k < 2 {
        return Err(DiagnosticsError::TooFewSnapshots { need: 2, got: k });
    }
    if phi.len() != k {
        return Err(DiagnosticsError::TimeGridMismatch);
    }
    let base = &psi[0].1;
    let len = base.len();
    let two_l = 2.0 * base.window_half_width();
    let times: Vec<f64> = psi.iter().map(|(t, _)| *t).collect();
    for ((tp, fp), (tq, fq)) in psi.iter().zip(phi) {
        if (tp - tq).abs() > 1e-9 * tp.abs().max(1.0) {
            return Err(DiagnosticsError::TimeGridMismatch);
        }
        if fp.len() != len || fq.len() != len || fp.dx() != base.dx() || fq.dx() != base.dx() {
            return Err(DiagnosticsError::TimeGridMismatch);
        }
    }
    let delta = check_uniform_times(&times)?;
    let anchor = times
        .iter()
        .position(|t| t.abs() <= 1e-9 * delta)
        .ok_or(DiagnosticsError::MissingAnchor)?;

    // Envelope spectra and resolution check.
    let mut specs = Vec::with_capacity(k);
    let mut norms = Vec::with_capacity(k);
    for ((_, fp), (_, fq)) in psi.iter().zip(phi) {
        let envelope: Vec<Complex64> = fq
            .values()
            .iter()
            .zip(fp.values())
            .map(|(q, p)| q * q * p.conj())
            .collect();
        let field = ContinuumField::new(base.dx(), envelope, None)?;
        norms.push(field.l2_norm());
        specs.push(field.spectrum());
    }
    let peak = norms.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(0.0);
    }
    // The resolution check below is relative to the envelope's own peak, so
    // it would reject pure round-off fluctuation when one channel is empty
    // (e.g. a decoupling experiment with zero slow-channel data).  An
    // envelope below `1e-6` of the channel scale `max|phi|^2 (||psi|| +
    // ||phi||)` contributes at most `t_max * peak` to the interaction, which
    // is negligible at the same rate, so it is accepted without the check.
    let phi_inf = phi
        .iter()
        .map(|(_, f)| f.max_abs())
        .fold(0.0, f64::max);
    let content = psi
        .iter()
        .zip(phi)
        .map(|((_, p), (_, q))| p.l2_norm() + q.l2_norm())
        .fold(0.0, f64::max);
    let negligible = peak <= 1e-6 * phi_inf * phi_inf * content;
    if !negligible {
        for w in 0..k - 1 {
            let change_sq: f64 = specs[w]
                .iter()
                .zip(&specs[w + 1])
                .map(|(a, b)| (b - a).norm_sqr())
                .sum::<f64>()
                / two_l;
            let rel = change_sq.sqrt() / peak;
            if rel > 0.5 {
                return Err(DiagnosticsError::EnvelopeUnderResolved { rel });
            }
        }
    }

    let omega = 8.0 / (h * h);
    let mu: Vec<f64> = (0..len).map(|idx| base.xi(idx) * base.xi(idx) - omega).collect();
    let moments: Vec<(Complex64, Complex64)> =
        mu.iter().map(|&m| filon_moments(m, delta)).collect();

    // Prefix integrals int_{t_0}^{t_j} e^{i mu s} G(s) ds per mode; the value
    // anchored at t = 0 is the difference against the prefix at the anchor.
    let mut prefixes: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    let mut cum = vec![Complex64::default(); len];
    prefixes.push(cum.clone());
    for j in 1..k {
        for idx in 0..len {
            let a = specs[j - 1][idx];
            let b = specs[j][idx] - a;
            let (m0, m1) = moments[idx];
            let phase = Complex64::from_polar(1.0, mu[idx] * times[j - 1]);
            cum[idx] += phase * (a * m0 + b / delta * m1);
        }
        prefixes.push(cum.clone());
    }
    let at_anchor = prefixes[anchor].clone();
    let worst = prefixes
        .iter()
        .map(|p| {
            (p.iter()
                .zip(&at_anchor)
                .map(|(c, a)| (c - a).norm_sqr())
                .sum::<f64>()
                / two_l)
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

fn channel_distance(a: &ContinuumField, b: &ContinuumField) -> Result<f64, DiagnosticsError> {
    if a.len() == b.len() && a.dx() == b.dx() {
        return Ok(a.l2_distance(b)?);
    }
    let wa = a.window_half_width();
    let wb = b.window_half_width();
    if (wa - wb).abs() > 1e-9 * wa.max(wb) {
        return Err(DiagnosticsError::TimeGridMismatch);
    }
    if a.len() < b.len() {
        Ok(a.resample(b.len())?.l2_distance(b)?)
    } else {
        Ok(b.resample(a.len())?.l2_distance(a)?)
    }
}

/// Max-over-time `L^2` distances `(max_t ||psi^h - psi_ref||, max_t ||phi^h -
/// phi_ref||)` between the lattice channels and reference solves, after
/// spectral resampling onto the common grid.  Snapshot times must agree
/// (lattice times are macroscopic times divided by `h^2`).
pub fn convergence_error(
    traj: &Trajectory,
    psi_ref: &[NlsState],
    phi_ref: &[NlsState],
) -> Result<(f64, f64), DiagnosticsError> {
    let k = traj.len();
    if psi_ref.len() != k || phi_ref.len() != k {
        return Err(DiagnosticsError::TimeGridMismatch);
    }
    let h = traj.h();
    let mut worst_psi = 0.0f64;
    let mut worst_phi = 0.0f64;
    for (i, (t_lat, field)) in traj.snapshots().iter().enumerate() {
        let t_mac = h * h * t_lat;
        let tol = 1e-9 * t_mac.abs().max(1.0);
        if (psi_ref[i].t - t_mac).abs() > tol || (phi_ref[i].t - t_mac).abs() > tol {
            return Err(DiagnosticsError::TimeGridMismatch);
        }
        let (psi_h, phi_h) = split_fields(field);
        worst_psi = worst_psi.max(channel_distance(&psi_h, &psi_ref[i].field)?);
        worst_phi = worst_phi.max(channel_distance(&phi_h, &phi_ref[i].field)?);
    }
    Ok((worst_psi, worst_phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{
        evolve_two_sided, free_propagator, EvolutionParams, Sign, Trajectory,
    };
    use crate::nls::{schrodinger_group, Orientation};
    use crate::spectral::{
        sample_initial_data, InitData, LatticeField, SamplingParams,
    };

    fn gaussian_lattice(h: f64, m: usize, amp: f64, width: f64) -> LatticeField {
        let values: Vec<Complex64> = (0..m)
            .map(|i| {
                let x = (i as i64 - m as i64 / 2) as f64 * h;
                Complex64::new(amp * (-x * x / (width * width)).exp(), 0.0)
            })
            .collect();
        LatticeField::new(h, 0.0, values).unwrap()
    }

    fn free_trajectory(init: &LatticeField, t_final: f64, count: usize) -> Trajectory {
        let snaps: Vec<(f64, LatticeField)> = (0..count)
            .map(|i| {
                let t = t_final * i as f64 / (count - 1) as f64;
                (t, free_propagator(init, t))
            })
            .collect();
        Trajectory::from_snapshots(EvolutionParams::default(), snaps).unwrap()
    }

    fn constant_trajectory(field: &LatticeField, span: f64, count: usize) -> Trajectory {
        let snaps: Vec<(f64, LatticeField)> = (0..count)
            .map(|i| (span * i as f64 / (count - 1) as f64, field.clone()))
            .collect();
        Trajectory::from_snapshots(EvolutionParams::default(), snaps).unwrap()
    }

    #[test]
    fn strichartz_of_zero_trajectory_vanishes() {
        let zero = LatticeField::zeros(0.1, 64).unwrap();
        let traj = constant_trajectory(&zero, 1.0, 9);
        assert_eq!(strichartz_norm(&traj, 6.0, 6.0).unwrap(), 0.0);
        assert_eq!(strichartz_norm(&traj, 4.0, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn strichartz_of_constant_field_is_span_root_times_inner_norm() {
        let field = gaussian_lattice(0.1, 64, 0.5, 1.0);
        let traj = constant_trajectory(&field, 2.0, 9);
        let l6 = field
            .values()
            .iter()
            .map(|v| v.norm_sqr().powi(3))
            .sum::<f64>()
            .powf(1.0 / 6.0);
        let got = strichartz_norm(&traj, 6.0, 6.0).unwrap();
        let want = 2.0f64.powf(1.0 / 6.0) * l6;
        assert!((got - want).abs() < 1e-12 * want);
        let got_inf = strichartz_norm(&traj, 4.0, f64::INFINITY).unwrap();
        let want_inf = 2.0f64.powf(0.25) * field.linf_norm();
        assert!((got_inf - want_inf).abs() < 1e-12 * want_inf);
    }

    #[test]
    fn strichartz_rejects_unsupported_exponent_pairs() {
        let field = gaussian_lattice(0.1, 64, 0.5, 1.0);
        let traj = constant_trajectory(&field, 1.0, 9);
        assert!(matches!(
            strichartz_norm(&traj, 2.0, 2.0),
            Err(DiagnosticsError::InvalidExponents { .. })
        ));
    }

    #[test]
    fn strichartz_is_homogeneous_under_the_linear_flow() {
        let h = 0.1;
        let base = gaussian_lattice(h, 64, 0.4, 1.3);
        let doubled = LatticeField::new(
            h,
            0.0,
            base.values().iter().map(|v| 2.0 * v).collect(),
        )
        .unwrap();
        let t_span = 3.0;
        let a = strichartz_norm(&free_trajectory(&base, t_span, 17), 6.0, 6.0).unwrap();
        let b = strichartz_norm(&free_trajectory(&doubled, t_span, 17), 6.0, 6.0).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn strichartz_detects_an_under_resolved_time_grid() {
        let field = gaussian_lattice(0.1, 64, 0.5, 1.0);
        let snaps: Vec<(f64, LatticeField)> = (0..9)
            .map(|i| {
                let t = i as f64 * 0.25;
                let scale = 1.0 + (PI * i as f64).cos(); // alternates 2, 0, 2, ...
                let values = field.values().iter().map(|v| scale * v).collect();
                (t, LatticeField::new(field.h(), 0.0, values).unwrap())
            })
            .collect();
        let traj = Trajectory::from_snapshots(EvolutionParams::default(), snaps).unwrap();
        assert!(matches!(
            strichartz_norm(&traj, 6.0, 6.0),
            Err(DiagnosticsError::UnderResolvedTime { .. })
        ));
    }

    #[test]
    fn normalized_strichartz_is_stable_across_mesh_halving_for_free_flow() {
        // Same continuum data at h and h/2 under the linear flow; the
        // h^(-1/2)-normalized space-time norm should not move much.
        let mut normalized = Vec::new();
        for (h, m) in [(0.2, 128usize), (0.1, 256)] {
            let init = sample_initial_data(
                &InitData::Gaussian { amplitude: 0.15, width: 1.0, center: 0.0, frequency: 0.0 },
                &InitData::Gaussian { amplitude: 0.0, width: 1.0, center: 0.0, frequency: 0.0 },
                &SamplingParams {
                    h,
                    gamma: 0.5,
                    window_half_width: 0.5 * h * m as f64,
                    oversample: 4,
                    enforce_small_h: true,
                    relax_gamma: false,
                },
            )
            .unwrap();
            let t_span = 0.5 / (h * h); // fixed macroscopic horizon 0.5
            let traj = free_trajectory(&init, t_span, 33);
            let v = strichartz_norm(&traj, 6.0, 6.0).unwrap();
            normalized.push(v / h.sqrt());
        }
        let ratio = normalized[0] / normalized[1];
        assert!(
            (0.5..2.0).contains(&ratio),
            "normalized values {normalized:?}, ratio {ratio:.3}"
        );
    }

    #[test]
    fn equicontinuity_vanishes_above_the_bandlimit_under_free_flow() {
        let h = 0.1;
        let m = 256;
        let init = sample_initial_data(
            &InitData::Gaussian { amplitude: 0.3, width: 1.0, center: 0.0, frequency: 0.0 },
            &InitData::Gaussian { amplitude: 0.2, width: 1.5, center: 0.0, frequency: 0.0 },
            &SamplingParams {
                h,
                gamma: 0.5, // bandlimit N = h^{-1/2} ~ 3.16
                window_half_width: 0.5 * h * m as f64,
                oversample: 4,
                enforce_small_h: false,
                relax_gamma: false,
            },
        )
        .unwrap();
        let traj = free_trajectory(&init, 30.0, 7);
        let kappa = 4.0; // above N, below pi/(2h) ~ 15.7
        let profile = equicontinuity_series(&traj, kappa).unwrap();
        for v in &profile.values {
            assert!(*v < 1e-12, "tail {v:.3e}");
        }
    }

    #[test]
    fn equicontinuity_is_monotone_in_kappa() {
        let h = 0.1;
        let init = gaussian_lattice(h, 256, 0.4, 1.0);
        let traj = free_trajectory(&init, 10.0, 7);
        let mut prev = f64::INFINITY;
        for kappa in [1.0, 2.0, 4.0, 8.0] {
            let v = equicontinuity_profile(&traj, kappa).unwrap();
            assert!(v <= prev + 1e-15, "kappa {kappa}: {v:.3e} > {prev:.3e}");
            prev = v;
        }
    }

    #[test]
    fn equicontinuity_rejects_kappa_beyond_the_arc() {
        let init = gaussian_lattice(0.1, 64, 0.4, 1.0);
        let traj = constant_trajectory(&init, 1.0, 5);
        assert!(matches!(
            equicontinuity_profile(&traj, PI / 2.0 / 0.1),
            Err(DiagnosticsError::KappaRange { .. })
        ));
    }

    #[test]
    fn tightness_vanishes_for_data_inside_the_plateau() {
        let h = 0.1;
        let m = 256;
        let values: Vec<Complex64> = (0..m)
            .map(|i| {
                let x = (i as i64 - m as i64 / 2) as f64 * h;
                if x.abs() <= 2.0 {
                    Complex64::new(0.3, 0.1)
                } else {
                    Complex64::default()
                }
            })
            .collect();
        let field = LatticeField::new(h, 0.0, values).unwrap();
        let traj = constant_trajectory(&field, 1.0, 5);
        assert_eq!(tightness_profile(&traj, 4.0).unwrap(), 0.0);
        assert!(tightness_profile(&traj, 1.5).unwrap() > 0.0);
    }

    #[test]
    fn tightness_is_monotone_in_radius() {
        let init = gaussian_lattice(0.1, 256, 0.5, 4.0);
        let traj = free_trajectory(&init, 5.0, 5);
        let mut prev = f64::INFINITY;
        for radius in [1.0, 2.0, 4.0, 8.0] {
            let v = tightness_profile(&traj, radius).unwrap();
            assert!(v <= prev + 1e-15, "radius {radius}");
            prev = v;
        }
    }

    #[test]
    fn tightness_rejects_radius_outside_the_window() {
        let init = gaussian_lattice(0.1, 64, 0.4, 1.0); // window 3.2
        let traj = constant_trajectory(&init, 1.0, 5);
        assert!(matches!(
            tightness_profile(&traj, 3.2),
            Err(DiagnosticsError::RadiusRange { .. })
        ));
        assert!(matches!(
            tightness_profile(&traj, 0.5),
            Err(DiagnosticsError::RadiusRange { .. })
        ));
    }

    #[test]
    fn profiles_are_invariant_under_whole_site_translation() {
        let h = 0.1;
        let base = gaussian_lattice(h, 128, 0.4, 1.0);
        let shifted = {
            let mut v = base.values().to_vec();
            v.rotate_right(9);
            LatticeField::new(h, 0.0, v).unwrap()
        };
        let ta = free_trajectory(&base, 4.0, 9);
        let tb = free_trajectory(&shifted, 4.0, 9);
        let sa = strichartz_norm(&ta, 6.0, 6.0).unwrap();
        let sb = strichartz_norm(&tb, 6.0, 6.0).unwrap();
        assert!((sa - sb).abs() < 1e-12 * sa);
        let ea = equicontinuity_profile(&ta, 3.0).unwrap();
        let eb = equicontinuity_profile(&tb, 3.0).unwrap();
        assert!((ea - eb).abs() < 1e-12 * ea.max(1e-300));
    }

    fn bandlimited_gaussian(dx: f64, len: usize, amp: f64, width: f64, cut: f64) -> ContinuumField {
        InitData::Gaussian { amplitude: amp, width, center: 0.0, frequency: 0.0 }
            .bandlimited(cut, dx, len)
            .unwrap()
    }

    #[test]
    fn sign_flip_difference_vanishes_for_constant_channels() {
        let h = 0.1;
        let len = 512; // lattice sites 128 at q = 4
        let dx = h / 4.0;
        let c1 = Complex64::new(0.3, -0.1);
        let c2 = Complex64::new(0.2, 0.25);
        let psi = ContinuumField::new(dx, vec![c1; len], None).unwrap();
        let phi = ContinuumField::new(dx, vec![c2; len], None).unwrap();
        let ratio = sign_flip_check(&psi, &phi, h, 0.37).unwrap();
        assert!(ratio < 1e-12, "ratio {ratio:.3e}");
    }

    #[test]
    fn sign_flip_ratio_decreases_under_mesh_halving() {
        let mut ratios = Vec::new();
        for (h, len) in [(0.2, 256usize), (0.1, 1024)] {
            let dx = h / 4.0;
            let cut = 2.0; // below h^{-1/2} for both h
            let psi = bandlimited_gaussian(dx, len, 0.5, 1.0, cut);
            let phi = ContinuumField::new(dx, vec![Complex64::default(); len], None).unwrap();
            ratios.push(sign_flip_check(&psi, &phi, h, 0.0).unwrap());
        }
        assert!(
            ratios[1] < 0.5 * ratios[0],
            "ratios {ratios:?} did not decrease"
        );
    }

    #[test]
    fn sign_flip_difference_is_cubically_homogeneous() {
        let h = 0.1;
        let len = 512;
        let dx = h / 4.0;
        let psi = bandlimited_gaussian(dx, len, 0.4, 1.2, 2.0);
        let phi = bandlimited_gaussian(dx, len, 0.3, 0.8, 2.0);
        let lam = 1.7;
        let scale = |f: &ContinuumField| {
            ContinuumField::new(dx, f.values().iter().map(|v| lam * v).collect(), None).unwrap()
        };
        let r1 = sign_flip_check(&psi, &phi, h, 0.2).unwrap();
        let r2 = sign_flip_check(&scale(&psi), &scale(&phi), h, 0.2).unwrap();
        assert!((r2 - lam.powi(3) * r1).abs() < 1e-10 * r2);
    }

    #[test]
    fn sign_flip_rejects_wideband_input() {
        let h = 0.1;
        let len = 512;
        let dx = h / 4.0;
        // Bandlimit 5 exceeds h^{-1/2} ~ 3.16.
        let psi = bandlimited_gaussian(dx, len, 0.4, 0.3, 5.0);
        let phi = ContinuumField::new(dx, vec![Complex64::default(); len], None).unwrap();
        assert!(matches!(
            sign_flip_check(&psi, &phi, h, 0.0),
            Err(DiagnosticsError::Bandlimit { .. })
        ));
    }

    #[test]
    fn cross_term_vanishes_without_the_modulated_channel() {
        let dx = 0.1;
        let len = 128;
        let psi_field = bandlimited_gaussian(dx, len, 0.5, 1.0, 2.0);
        let zero = ContinuumField::new(dx, vec![Complex64::default(); len], None).unwrap();
        let psi: Vec<(f64, ContinuumField)> =
            (0..5).map(|i| (0.1 * i as f64, psi_field.clone())).collect();
        let phi: Vec<(f64, ContinuumField)> =
            (0..5).map(|i| (0.1 * i as f64, zero.clone())).collect();
        assert_eq!(cross_term_magnitude(&psi, &phi, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn cross_term_matches_the_frozen_envelope_closed_form() {
        let h = 0.1;
        let dx = h / 4.0;
        let len = 512;
        let psi_field = bandlimited_gaussian(dx, len, 0.5, 1.0, 2.0);
        let phi_field = bandlimited_gaussian(dx, len, 0.4, 1.4, 2.0);
        let count = 9;
        let tau = 0.4;
        let times: Vec<f64> = (0..count).map(|i| tau * i as f64 / (count - 1) as f64).collect();
        let psi: Vec<(f64, ContinuumField)> =
            times.iter().map(|&t| (t, psi_field.clone())).collect();
        let phi: Vec<(f64, ContinuumField)> =
            times.iter().map(|&t| (t, phi_field.clone())).collect();
        let got = cross_term_magnitude(&psi, &phi, h).unwrap();

        // Frozen envelope: the integral telescopes to G * (e^{i mu t} - 1)/(i mu),
        // and the norm is largest at the final time for this data.
        let envelope: Vec<Complex64> = phi_field
            .values()
            .iter()
            .zip(psi_field.values())
            .map(|(q, p)| q * q * p.conj())
            .collect();
        let g = ContinuumField::new(dx, envelope, None).unwrap();
        let spec = g.spectrum();
        let two_l = 2.0 * g.window_half_width();
        let mut best = 0.0f64;
        for &t in &times {
            let mut sum = 0.0;
            for (idx, v) in spec.iter().enumerate() {
                let mu = g.xi(idx) * g.xi(idx) - 8.0 / (h * h);
                let (m0, _) = filon_moments(mu, t);
                sum += (v * m0).norm_sqr();
            }
            best = best.max((sum / two_l).sqrt());
        }
        assert!((got - best).abs() < 1e-10 * best, "got {got:.6e} want {best:.6e}");
        // Nonresonant bound: every mode sits far from xi^2 = 8/h^2.
        assert!(got <= 0.3 * h * h * g.l2_norm(), "got {got:.3e}");
        assert!(got > 0.0);
    }

    #[test]
    fn cross_term_flags_an_under_resolved_envelope() {
        let dx = 0.1;
        let len = 128;
        let on = bandlimited_gaussian(dx, len, 0.5, 1.0, 2.0);
        let off = ContinuumField::new(dx, vec![Complex64::default(); len], None).unwrap();
        let psi = vec![(0.0, on.clone()), (0.1, on.clone()), (0.2, on.clone())];
        let phi = vec![(0.0, off), (0.1, on.clone()), (0.2, on)];
        assert!(matches!(
            cross_term_magnitude(&psi, &phi, 0.1),
            Err(DiagnosticsError::EnvelopeUnderResolved { .. })
        ));
    }

    #[test]
    fn cross_term_accepts_round_off_noise_in_an_empty_channel() {
        // With an empty slow channel the envelope is pure round-off: it
        // fluctuates by O(1) of its own (tiny) peak between snapshots, which
        // must not trip the resolution check.
        let dx = 0.1;
        let len = 128;
        let on = bandlimited_gaussian(dx, len, 0.5, 1.0, 2.0);
        let noise = |seed: usize| {
            let values: Vec<Complex64> = (0..len)
                .map(|n| {
                    let angle = (n * (seed + 3)) as f64 * 2.399_963;
                    1e-14 * Complex64::from_polar(1.0, angle)
                })
                .collect();
            ContinuumField::new(dx, values, None).unwrap()
        };
        let psi: Vec<(f64, ContinuumField)> =
            (0..5).map(|i| (0.1 * i as f64, noise(i))).collect();
        let phi: Vec<(f64, ContinuumField)> =
            (0..5).map(|i| (0.1 * i as f64, on.clone())).collect();
        let got = cross_term_magnitude(&psi, &phi, 0.1).unwrap();
        assert!(got < 1e-12, "noise-scale interaction, got {got:.3e}");
    }

    #[test]
    fn cross_term_requires_an_anchor_at_time_zero() {
        let dx = 0.1;
        let len = 128;
        let on = bandlimited_gaussian(dx, len, 0.5, 1.0, 2.0);
        let psi: Vec<(f64, ContinuumField)> =
            (0..5).map(|i| (0.1 + 0.1 * i as f64, on.clone())).collect();
        let phi = psi.clone();
        assert!(matches!(
            cross_term_magnitude(&psi, &phi, 0.1),
            Err(DiagnosticsError::MissingAnchor)
        ));
    }

    #[test]
    fn convergence_error_of_a_channel_against_itself_is_zero() {
        let h = 0.1;
        let m = 256;
        let init = sample_initial_data(
            &InitData::Gaussian { amplitude: 0.3, width: 1.0, center: 0.0, frequency: 0.0 },
            &InitData::Gaussian { amplitude: 0.2, width: 1.5, center: 0.0, frequency: 0.0 },
            &SamplingParams {
                h,
                gamma: 0.5,
                window_half_width: 0.5 * h * m as f64,
                oversample: 4,
                enforce_small_h: false,
                relax_gamma: false,
            },
        )
        .unwrap();
        let traj = free_trajectory(&init, 20.0, 5);
        let mut psi_ref = Vec::new();
        let mut phi_ref = Vec::new();
        for (t_lat, field) in traj.snapshots() {
            let (p, q) = split_fields(field);
            let t = h * h * t_lat;
            psi_ref.push(NlsState {
                field: p,
                t,
                sign: Sign::Defocusing,
                orientation: Orientation::Forward,
            });
            phi_ref.push(NlsState {
                field: q,
                t,
                sign: Sign::Defocusing,
                orientation: Orientation::Reversed,
            });
        }
        let (ep, eq) = convergence_error(&traj, &psi_ref, &phi_ref).unwrap();
        assert_eq!(ep, 0.0);
        assert_eq!(eq, 0.0);
    }

    #[test]
    fn linear_flow_error_respects_the_multiplier_bound() {
        let h = 0.1;
        let m = 256;
        let gamma = 0.5;
        let init = sample_initial_data(
            &InitData::Gaussian { amplitude: 0.3, width: 1.0, center: 0.0, frequency: 0.0 },
            &InitData::Gaussian { amplitude: 0.2, width: 1.5, center: 0.0, frequency: 0.0 },
            &SamplingParams {
                h,
                gamma,
                window_half_width: 0.5 * h * m as f64,
                oversample: 4,
                enforce_small_h: false,
                relax_gamma: false,
            },
        )
        .unwrap();
        let t_mac = 0.1;
        let count = 6;
        let snaps: Vec<(f64, LatticeField)> = (0..count)
            .map(|i| {
                let t_lat = t_mac / (h * h) * i as f64 / (count - 1) as f64;
                (t_lat, free_propagator(&init, t_lat))
            })
            .collect();
        let traj = Trajectory::from_snapshots(EvolutionParams::default(), snaps).unwrap();
        let (psi0, phi0) = split_fields(traj.initial());
        let mut psi_ref = Vec::new();
        let mut phi_ref = Vec::new();
        for (t_lat, _) in traj.snapshots() {
            let t = h * h * t_lat;
            psi_ref.push(NlsState {
                field: schrodinger_group(&psi0, t, Orientation::Forward),
                t,
                sign: Sign::Defocusing,
                orientation: Orientation::Forward,
            });
            phi_ref.push(NlsState {
                field: schrodinger_group(&phi0, t, Orientation::Reversed),
                t,
                sign: Sign::Defocusing,
                orientation: Orientation::Reversed,
            });
        }
        let (ep, eq) = convergence_error(&traj, &psi_ref, &phi_ref).unwrap();

        // Dispersion mismatch bound: |e^{i delta t} - 1| <= |delta| T per mode,
        // with delta = 4 sin^2(h xi / 2)/h^2 - xi^2 over the occupied band.
        let n_band = h.powf(-gamma);
        let mut delta_max = 0.0f64;
        let steps = 200;
        for i in 0..=steps {
            let xi = n_band * i as f64 / steps as f64;
            let s = (h * xi / 2.0).sin();
            delta_max = delta_max.max((4.0 * s * s / (h * h) - xi * xi).abs());
        }
        let bound_psi = delta_max * t_mac * psi0.l2_norm() * 1.000001;
        let bound_phi = delta_max * t_mac * phi0.l2_norm() * 1.000001;
        assert!(ep > 0.0 && ep <= bound_psi, "psi error {ep:.3e} vs bound {bound_psi:.3e}");
        assert!(eq > 0.0 && eq <= bound_phi, "phi error {eq:.3e} vs bound {bound_phi:.3e}");
    }

    #[test]
    fn pure_modulated_data_leaves_the_slow_channel_empty() {
        // Headline decoupling: with psi_0 = 0 the psi channel stays at the
        // noise floor while phi carries all the mass.
        for (h, m) in [(0.1, 128usize), (0.05, 256)] {
            let init = sample_initial_data(
                &InitData::Gaussian { amplitude: 0.0, width: 1.0, center: 0.0, frequency: 0.0 },
                &InitData::Gaussian { amplitude: 0.25, width: 1.0, center: 0.0, frequency: 0.0 },
                &SamplingParams {
                    h,
                    gamma: 0.25,
                    window_half_width: 0.5 * h * m as f64,
                    oversample: 4,
                    enforce_small_h: true,
                    relax_gamma: false,
                },
            )
            .unwrap();
            let t_lat = 0.2 / (h * h);
            let params = EvolutionParams {
                sign: Sign::Defocusing,
                dt: 0.05,
                t_final_lat: t_lat,
                snapshot_stride: ((t_lat / 0.05) as usize / 8).max(1),
                mass_drift_tol: 1e-6,
            };
            let traj = evolve_two_sided(&init, &params).unwrap();
            let mut psi_peak = 0.0f64;
            let mut phi_peak = 0.0f64;
            for (_, field) in traj.snapshots() {
                let (psi, phi) = split_fields(field);
                psi_peak = psi_peak.max(psi.l2_norm());
                phi_peak = phi_peak.max(phi.l2_norm());
            }
            assert!(
                psi_peak < 1e-10 * phi_peak,
                "h = {h}: psi {psi_peak:.3e} vs phi {phi_peak:.3e}"
            );
        }
    }
}
