//! Continuum-limit laboratory for the Ablowitz-Ladik lattice.
//!
//! The Ablowitz-Ladik (AL) system
//!
//! ```text
//! i d/dt alpha_n = -(alpha_{n-1} - 2 alpha_n + alpha_{n+1})
//!                  + alpha_n beta_n (alpha_{n-1} + alpha_{n+1}),
//! beta_n = s * conj(alpha_n),  s = +1 defocusing / -1 focusing,
//! ```
//!
//! run from small sampled data `alpha_n(0) = h psi_0(hn) + (-1)^n h phi_0(hn)`
//! over the stretched horizon `|t| <= h^{-2} T`, converges channel-wise to a
//! pair of decoupled cubic Schrodinger flows.  This crate is a laboratory for
//! measuring that limit: spectral samplers and channel splitters, a
//! structure-preserving integrator, the AL conserved quantities and their
//! perturbative shadows, cubic-NLS reference solves, and the diagnostic norms
//! (Strichartz, equicontinuity, tightness, decoupling residuals) that certify
//! convergence.
//!
//! Modules:
//!
//! * [`spectral`] - lattice/continuum fields, sampling, channel split, projections;
//! * [`dynamics`] - the AL flow via an integrating-factor RK4 scheme;
//! * [`conserved`] - mass, Hamiltonians, the generating function `A(z)`, and
//!   the high-frequency suppression functional `G`;
//! * [`nls`] - cubic NLS reference solves and Duhamel residuals;
//! * [`diagnostics`] - space-time norms, compactness profiles, decoupling checks;
//! * [`harness`] - config-driven experiment runner and report emitters.
//!
//! Each major capability has a runnable example; start with
//! `cargo run --release --example spectral_toolkit`.

pub mod conserved;
pub mod diagnostics;
pub mod dynamics;
mod fft;
pub mod harness;
pub mod nls;
mod quad;
pub mod spectral;

pub use num_complex::Complex64;
