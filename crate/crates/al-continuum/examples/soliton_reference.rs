//! Validity of the cubic Schrodinger reference solver.
//!
//! Three closed-form targets:
//!
//! 1. Focusing soliton — `u(t, x) = sech(x) e^{it}` solves
//!    `i u_t = -u_xx + 2 sigma |u|^2 u` with `sigma = -1`; the adaptive
//!    solver must track it in max-over-time L^2 to 1e-6 at T = 1.
//! 2. Free Gaussian — with the nonlinearity off the propagator must
//!    reproduce `(1 + 4it)^{-1/2} exp(-x^2 / (1 + 4it))`.
//! 3. Integral-equation (Duhamel) residual — the solved trajectory plugged
//!    into its own integral form must close to 1e-5 on 65 snapshots.

use al_continuum::dynamics::Sign;
use al_continuum::nls::{duhamel_residual, nls_solve_auto, schrodinger_group, Orientation};
use al_continuum::spectral::ContinuumField;
use al_continuum::Complex64;

fn soliton(t: f64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0 / x.cosh(), t)
}

fn soliton_field(t: f64, dx: f64, len: usize) -> ContinuumField {
    let half = 0.5 * dx * len as f64;
    let values: Vec<Complex64> =
        (0..len).map(|j| soliton(t, -half + dx * j as f64)).collect();
    ContinuumField::new(dx, values, None).expect("valid grid")
}

fn main() {
    let mut fails = 0u32;
    let check = |name: &str, error: f64, tol: f64, fails: &mut u32| {
        let ok = error <= tol;
        if !ok {
            *fails += 1;
        }
        println!(
            "{:<40} {}: error {:.3e}, tolerance {:.0e}",
            name,
            if ok { "PASS" } else { "FAIL" },
            error,
            tol
        );
    };

    // 1. Soliton tracking.
    let (len, half) = (1024usize, 20.0f64);
    let dx = 2.0 * half / len as f64;
    let times: Vec<f64> = (0..11).map(|j| j as f64 * 0.1).collect();
    let init = soliton_field(0.0, dx, len);
    eprintln!("solving the focusing equation against the soliton to T = 1 ...");
    let (states, dt, deviation) =
        nls_solve_auto(&init, &times, Sign::Focusing, Orientation::Forward, 1e-8)
            .expect("solver self-converges");
    println!("adaptive solve: dt = {dt:.2e}, self-convergence deviation = {deviation:.3e}");
    let worst = states
        .iter()
        .map(|s| {
            s.field
                .l2_distance(&soliton_field(s.t, dx, len))
                .expect("same grid")
        })
        .fold(0.0, f64::max);
    check("soliton max-t L2 error", worst, 1e-6, &mut fails);

    // 2. Free Gaussian under the linear group.
    let t = 0.7;
    let gauss = ContinuumField::new(
        0.125,
        (0..512)
            .map(|j| {
                let x = -32.0 + 0.125 * j as f64;
                Complex64::new((-x * x).exp(), 0.0)
            })
            .collect(),
        None,
    )
    .expect("valid grid");
    let moved = schrodinger_group(&gauss, t, Orientation::Forward);
    let denom = Complex64::new(1.0, 4.0 * t);
    let exact: Vec<Complex64> = (0..512)
        .map(|j| {
            let x = -32.0 + 0.125 * j as f64;
            (Complex64::new(-x * x, 0.0) / denom).exp() / denom.sqrt()
        })
        .collect();
    let exact_field = ContinuumField::new(0.125, exact, None).expect("valid grid");
    check(
        "free Gaussian closed form",
        moved.l2_distance(&exact_field).expect("same grid"),
        1e-10,
        &mut fails,
    );

    // 3. Duhamel residual of the solved soliton trajectory.
    eprintln!("closing the integral equation on 65 snapshots ...");
    let fine_times: Vec<f64> = (0..65).map(|j| j as f64 / 64.0).collect();
    let (fine_states, _, _) =
        nls_solve_auto(&init, &fine_times, Sign::Focusing, Orientation::Forward, 1e-8)
            .expect("solver self-converges");
    let residual = duhamel_residual(&fine_states, Sign::Focusing, Orientation::Forward)
        .expect("uniform snapshot grid");
    check("integral-equation residual", residual, 1e-5, &mut fails);

    // The reversed orientation solves the conjugated equation: conjugating
    // the soliton datum and reversing must reproduce the conjugate solution.
    let conj_init = ContinuumField::new(
        dx,
        init.values().iter().map(|v| v.conj()).collect(),
        None,
    )
    .expect("valid grid");
    let (rev, _, _) =
        nls_solve_auto(&conj_init, &times, Sign::Focusing, Orientation::Reversed, 1e-8)
            .expect("solver self-converges");
    let worst_rev = rev
        .iter()
        .map(|s| {
            let expected = ContinuumField::new(
                dx,
                soliton_field(s.t, dx, len).values().iter().map(|v| v.conj()).collect(),
                None,
            )
            .expect("valid grid");
            s.field.l2_distance(&expected).expect("same grid")
        })
        .fold(0.0, f64::max);
    check("reversed-orientation conjugate soliton", worst_rev, 1e-6, &mut fails);

    if fails > 0 {
        eprintln!("{fails} reference-solver check(s) failed");
        std::process::exit(1);
    }
    eprintln!("reference solver validated against all closed forms");
}
