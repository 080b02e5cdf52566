//! Time evolution of the Ablowitz-Ladik lattice.
//!
//! The flow integrated here is
//!
//! ```text
//! i d/dt alpha_n = -(alpha_{n-1} - 2 alpha_n + alpha_{n+1})
//!                  + s |alpha_n|^2 (alpha_{n-1} + alpha_{n+1}),
//! ```
//!
//! split as `d/dt alpha = L alpha + N(alpha)` with the linear symbol
//! `l(theta) = -4 i sin^2(theta/2)` (diagonal on the spectral arc) and the
//! pointwise-in-`n` nonlinearity `N(alpha)_n = -i s |alpha_n|^2 (alpha_{n-1} +
//! alpha_{n+1})`.  Steps use the integrating-factor (Lawson) Runge-Kutta 4
//! scheme: with `E = exp((dt/2) L)`,
//!
//! ```text
//! a1 = N(u),                    a2 = N(E u + (dt/2) E a1),
//! a3 = N(E u + (dt/2) a2),      a4 = N(E^2 u + dt E a3),
//! u' = E^2 u + (dt/6) (E^2 a1 + 2 E a2 + 2 E a3 + a4),
//! ```
//!
//! which reduces to the exact free propagator when the nonlinearity vanishes
//! and costs ten transforms per step.  Runs are guarded by the defocusing
//! phase-space constraint `|alpha_n| < 1` and a relative mass-drift monitor.

use crate::conserved;
use crate::fft;
use crate::spectral::{LatticeField, SpectralError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sign `s` of the lattice nonlinearity (equal to the sign `sigma` of the
/// limiting cubic Schrodinger nonlinearity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Defocusing,
    Focusing,
}

impl Sign {
    /// `+1` for defocusing, `-1` for focusing.
    pub fn value(self) -> f64 {
        match self {
            Self::Defocusing => 1.0,
            Self::Focusing => -1.0,
        }
    }
}

/// Step size, horizon, and recording cadence for one evolution leg.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionParams {
    pub sign: Sign,
    /// Step magnitude; the direction is set by the sign of `t_final_lat`.
    pub dt: f64,
    /// Lattice-time horizon; `|t_final_lat|` must be an integer number of steps.
    pub t_final_lat: f64,
    /// Record every this many steps (the endpoints are always recorded).
    pub snapshot_stride: usize,
    /// Abort when the projected relative mass drift at the horizon exceeds this.
    pub mass_drift_tol: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            sign: Sign::Defocusing,
            dt: 0.1,
            t_final_lat: 1.0,
            snapshot_stride: 1,
            mass_drift_tol: 1e-8,
        }
    }
}

/// Failure modes of the integrator.
#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("dt = {dt} does not divide the horizon t_final = {t_final}")]
    StepMismatch { dt: f64, t_final: f64 },
    #[error("snapshot stride must be positive")]
    StrideZero,
    #[error(
        "left the defocusing phase space at t_lat = {t_lat:.6e}: \
         max |alpha_n| = {linf:.6e} >= 1"
    )]
    PhaseSpaceExit { t_lat: f64, linf: f64 },
    #[error("field became non-finite at t_lat = {t_lat:.6e}")]
    Blowup { t_lat: f64 },
    #[error(
        "mass drift {projected:.3e} projected at the horizon exceeds {tol:.3e} \
         (observed at t_lat = {t_lat:.6e}); reduce dt"
    )]
    MassDrift { t_lat: f64, projected: f64, tol: f64 },
    #[error("invalid snapshot sequence: {0}")]
    InvalidSnapshots(&'static str),
}

/// Time-ordered snapshots of one run, tagged with the parameters that made it.
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: EvolutionParams,
    snapshots: Vec<(f64, LatticeField)>,
}

impl Trajectory {
    /// Wraps externally produced snapshots (e.g. an exact flow) so they can
    /// feed the same measurements as integrator output.
    pub fn from_snapshots(
        params: EvolutionParams,
        snapshots: Vec<(f64, LatticeField)>,
    ) -> Result<Self, DynamicsError> {
        if snapshots.is_empty() {
            return Err(DynamicsError::InvalidSnapshots("no snapshots"));
        }
        let h = snapshots[0].1.h();
        let m = snapshots[0].1.m();
        for (t, f) in &snapshots {
            if !t.is_finite() {
                return Err(DynamicsError::InvalidSnapshots("non-finite time"));
            }
            if f.h() != h || f.m() != m {
                return Err(DynamicsError::InvalidSnapshots("snapshots on different grids"));
            }
        }
        if snapshots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(DynamicsError::InvalidSnapshots("times not strictly increasing"));
        }
        Ok(Self { params, snapshots })
    }

    pub fn params(&self) -> &EvolutionParams {
        &self.params
    }

    pub fn snapshots(&self) -> &[(f64, LatticeField)] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|(t, _)| *t).collect()
    }

    pub fn field(&self, i: usize) -> &LatticeField {
        &self.snapshots[i].1
    }

    pub fn initial(&self) -> &LatticeField {
        &self.snapshots[0].1
    }

    pub fn final_state(&self) -> &(f64, LatticeField) {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn h(&self) -> f64 {
        self.initial().h()
    }

    /// Concatenates a backward leg and a forward leg sharing the same initial
    /// snapshot into one ascending-time trajectory.
    fn splice(backward: Trajectory, forward: Trajectory) -> Trajectory {
        let mut snapshots: Vec<(f64, LatticeField)> = backward
            .snapshots
            .into_iter()
            .skip(1)
            .rev()
            .collect();
        snapshots.extend(forward.snapshots);
        Trajectory { params: forward.params, snapshots }
    }
}

/// Right-hand side `d alpha / dt` of the flow (periodic neighbors).
pub fn al_rhs(field: &LatticeField, sign: Sign) -> Vec<Complex64> {
    let v = field.values();
    let m = v.len();
    let s = sign.value();
    (0..m)
        .map(|i| {
            let left = v[(i + m - 1) % m];
            let right = v[(i + 1) % m];
            let lap = left - 2.0 * v[i] + right;
            let nl = s * v[i].norm_sqr() * (left + right);
            Complex64::new(0.0, -1.0) * (-lap + nl)
        })
        .collect()
}

/// Exact linear flow `e^{t L}`: multiplies each arc mode by
/// `exp(-4 i sin^2(theta/2) t)`.
pub fn free_propagator(field: &LatticeField, t: f64) -> LatticeField {
    let mut spec = fft::lattice_forward(field.values());
    let m = spec.len() as i64;
    for (j, v) in spec.iter_mut().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * (j as i64 - m / 4) as f64 / m as f64;
        let half = (theta / 2.0).sin();
        *v *= Complex64::from_polar(1.0, -4.0 * half * half * t);
    }
    let mut out = field.clone();
    out.values_mut().copy_from_slice(&fft::lattice_inverse(&spec));
    out.set_t_lat(field.t_lat() + t);
    out
}

fn nonlinear_term(v: &[Complex64], s: f64, out: &mut [Complex64]) {
    let m = v.len();
    for i in 0..m {
        let left = v[(i + m - 1) % m];
        let right = v[(i + 1) % m];
        out[i] = Complex64::new(0.0, -s) * (v[i].norm_sqr() * (left + right));
    }
}

/// Applies the diagonal arc multiplier `mult` to physical-space `values`.
fn apply_multiplier(values: &[Complex64], mult: &[Complex64]) -> Vec<Complex64> {
    let mut spec = fft::lattice_forward(values);
    for (v, m) in spec.iter_mut().zip(mult) {
        *v *= m;
    }
    fft::lattice_inverse(&spec)
}

struct Stepper {
    e_half: Vec<Complex64>,
    e_full: Vec<Complex64>,
    s: f64,
    dt: f64,
    include_nonlinearity: bool,
}

impl Stepper {
    fn new(m: usize, dt: f64, sign: Sign, include_nonlinearity: bool) -> Self {
        let half: Vec<Complex64> = (0..m)
            .map(|j| {
                let theta =
                    2.0 * std::f64::consts::PI * (j as i64 - m as i64 / 4) as f64 / m as f64;
                let sh = (theta / 2.0).sin();
                Complex64::from_polar(1.0, -4.0 * sh * sh * dt / 2.0)
            })
            .collect();
        let full = half.iter().map(|z| z * z).collect();
        Self { e_half: half, e_full: full, s: sign.value(), dt, include_nonlinearity }
    }

    fn step(&self, u: &[Complex64]) -> Vec<Complex64> {
        let m = u.len();
        let dt = self.dt;
        let eu = apply_multiplier(u, &self.e_half);
        let eeu = apply_multiplier(u, &self.e_full);
        if !self.include_nonlinearity {
            return eeu;
        }

        let mut a1 = vec![Complex64::default(); m];
        nonlinear_term(u, self.s, &mut a1);
        let ea1 = apply_multiplier(&a1, &self.e_half);
        let eea1 = apply_multiplier(&a1, &self.e_full);

        let stage2: Vec<Complex64> = (0..m).map(|i| eu[i] + 0.5 * dt * ea1[i]).collect();
        let mut a2 = vec![Complex64::default(); m];
        nonlinear_term(&stage2, self.s, &mut a2);

        let stage3: Vec<Complex64> = (0..m).map(|i| eu[i] + 0.5 * dt * a2[i]).collect();
        let mut a3 = vec![Complex64::default(); m];
        nonlinear_term(&stage3, self.s, &mut a3);

        let ea3 = apply_multiplier(&a3, &self.e_half);
        let stage4: Vec<Complex64> = (0..m).map(|i| eeu[i] + dt * ea3[i]).collect();
        let mut a4 = vec![Complex64::default(); m];
        nonlinear_term(&stage4, self.s, &mut a4);

        let ea2 = apply_multiplier(&a2, &self.e_half);
        (0..m)
            .map(|i| eeu[i] + dt / 6.0 * (eea1[i] + 2.0 * ea2[i] + 2.0 * ea3[i] + a4[i]))
            .collect()
    }
}

fn check_state(
    values: &[Complex64],
    t_lat: f64,
    sign: Sign,
) -> Result<(), DynamicsError> {
    let mut linf: f64 = 0.0;
    for v in values {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(DynamicsError::Blowup { t_lat });
        }
        linf = linf.max(v.norm_sqr());
    }
    if sign == Sign::Defocusing && linf >= 1.0 {
        return Err(DynamicsError::PhaseSpaceExit { t_lat, linf: linf.sqrt() });
    }
    Ok(())
}

fn evolve_impl(
    initial: &LatticeField,
    params: &EvolutionParams,
    include_nonlinearity: bool,
) -> Result<Trajectory, DynamicsError> {
    if params.snapshot_stride == 0 {
        return Err(DynamicsError::StrideZero);
    }
    if !(params.dt > 0.0) || !params.dt.is_finite() || !params.t_final_lat.is_finite() {
        return Err(DynamicsError::StepMismatch { dt: params.dt, t_final: params.t_final_lat });
    }
    let span = params.t_final_lat.abs();
    let steps_f = span / params.dt;
    let n_steps = steps_f.round();
    if (steps_f - n_steps).abs() > 1e-6 * n_steps.max(1.0) {
        return Err(DynamicsError::StepMismatch { dt: params.dt, t_final: params.t_final_lat });
    }
    let n_steps = n_steps as usize;
    let direction = if params.t_final_lat < 0.0 { -1.0 } else { 1.0 };
    let dt_signed = direction * params.dt;

    check_state(initial.values(), initial.t_lat(), params.sign)?;
    let stepper = Stepper::new(initial.m(), dt_signed, params.sign, include_nonlinearity);

    let t0 = initial.t_lat();
    let mass0 = conserved::mass(initial, params.sign).ok();
    let mut u = initial.values().to_vec();
    let mut snapshots = Vec::with_capacity(n_steps / params.snapshot_stride + 2);
    snapshots.push((t0, initial.clone()));

    let make_field = |values: &[Complex64], t_lat: f64, template: &LatticeField| {
        let mut f = template.clone();
        f.values_mut().copy_from_slice(values);
        f.set_t_lat(t_lat);
        f
    };

    for k in 1..=n_steps {
        u = stepper.step(&u);
        let t_lat = t0 + k as f64 * dt_signed;
        check_state(&u, t_lat, params.sign)?;

        let at_stride = k % params.snapshot_stride == 0;
        if at_stride || k == n_steps {
            let field = make_field(&u, t_lat, initial);
            if at_stride && k >= 5 * params.snapshot_stride && include_nonlinearity {
                if let (Some(m0), Ok(mk)) = (mass0, conserved::mass(&field, params.sign)) {
                    let scale = m0.abs().max(f64::MIN_POSITIVE);
                    let drift = (mk - m0).abs() / scale;
                    let projected = drift * n_steps as f64 / k as f64;
                    if projected > params.mass_drift_tol {
                        return Err(DynamicsError::MassDrift {
                            t_lat,
                            projected,
                            tol: params.mass_drift_tol,
                        });
                    }
                }
            }
            snapshots.push((t_lat, field));
        }
    }

    Ok(Trajectory { params: params.clone(), snapshots })
}

/// Integrates from the field's own time towards `t_final_lat` (relative to the
/// initial time; negative values run backwards), recording every
/// `snapshot_stride` steps.
pub fn evolve(
    initial: &LatticeField,
    params: &EvolutionParams,
) -> Result<Trajectory, DynamicsError> {
    evolve_impl(initial, params, true)
}

/// Runs backward to `-|t_final_lat|` and forward to `+|t_final_lat|` from the
/// same datum and splices the legs into one ascending-time trajectory.
pub fn evolve_two_sided(
    initial: &LatticeField,
    params: &EvolutionParams,
) -> Result<Trajectory, DynamicsError> {
    let span = params.t_final_lat.abs();
    let back = evolve(initial, &EvolutionParams { t_final_lat: -span, ..params.clone() })?;
    let fwd = evolve(initial, &EvolutionParams { t_final_lat: span, ..params.clone() })?;
    Ok(Trajectory::splice(back, fwd))
}

#[cfg(test)]
pub(crate) fn evolve_without_nonlinearity(
    initial: &LatticeField,
    params: &EvolutionParams,
) -> Result<Trajectory, DynamicsError> {
    evolve_impl(initial, params, false)
}
