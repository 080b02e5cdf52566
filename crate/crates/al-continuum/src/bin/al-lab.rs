//! Laboratory driver for the lattice-to-continuum experiments.
//!
//! Verbs:
//! * `run`    — execute the pipeline for a single mesh from a config file.
//! * `sweep`  — execute every mesh in the config and the cross-mesh verdicts.
//! * `check`  — validate a config (or the shipped default) and print the
//!              derived per-mesh quantities without running anything.
//! * `oracle` — run the quick closed-form self-checks; useful before
//!              committing to a long simulation.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error,
//! 3 verdict failure under `--strict`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use al_continuum::conserved::{g_functional, g_quadratic};
use al_continuum::dynamics::{evolve, EvolutionParams, Sign};
use al_continuum::harness::{
    self, config_from_json, emit_reports, mesh_plan, validate, RunRecord, SimConfig, MASS_CAP,
};
use al_continuum::nls::{
    duhamel_residual_with_coefficient, nls_solve, nls_solve_auto, schrodinger_group, NlsState,
    Orientation,
};
use al_continuum::spectral::{
    sample_initial_data, small_h_threshold, split_fields, ContinuumField, InitData, LatticeField,
    SamplingParams,
};
use al_continuum::Complex64;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERDICT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "al-lab",
    version,
    about = "Continuum-limit laboratory for the integrable cubic lattice"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Execute the pipeline for a single mesh (exactly one h after filters).
    Run(RunArgs),
    /// Execute every configured mesh and compute the cross-mesh verdicts.
    Sweep(RunArgs),
    /// Validate a config and print derived quantities; runs nothing.
    Check(CheckArgs),
    /// Run the quick closed-form self-checks; runs no simulation.
    Oracle,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap the worker pool (default: one worker per CPU).
    #[arg(long)]
    jobs: Option<usize>,
    /// Keep only the matching entry of h_list (1e-12 relative match).
    #[arg(long = "only-h", value_name = "H")]
    only_h: Option<f64>,
    /// Exit with code 3 when any verdict fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Experiment description; the shipped default experiment when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.verb {
        Verb::Run(args) => run_or_sweep(args, true),
        Verb::Sweep(args) => run_or_sweep(args, false),
        Verb::Check(args) => check(args),
        Verb::Oracle => oracle(),
    };
    ExitCode::from(code)
}

/// Reads the config, applies the CLI overrides, validates strictly.
fn load_effective(args: &RunArgs) -> Result<SimConfig, u8> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return Err(EXIT_CONFIG);
        }
    }
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", args.config.display());
        EXIT_CONFIG
    })?;
    let mut config = config_from_json(&text).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    if let Some(target) = args.only_h {
        let kept: Vec<f64> = config
            .h_list
            .iter()
            .copied()
            .filter(|&h| (h - target).abs() <= 1e-12 * target.abs().max(h.abs()))
            .collect();
        if kept.is_empty() {
            eprintln!(
                "error: --only-h {target} matches no entry of h_list {:?}",
                config.h_list
            );
            return Err(EXIT_CONFIG);
        }
        config.h_list = kept;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.display().to_string();
    }
    validate(&config).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    Ok(config)
}

fn run_or_sweep(args: RunArgs, single: bool) -> u8 {
    let config = match load_effective(&args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let record = if single {
        if config.h_list.len() != 1 {
            eprintln!(
                "error: run expects exactly one mesh, but h_list has {} entries \
                 (narrow it with --only-h, or use the sweep verb)",
                config.h_list.len()
            );
            return EXIT_CONFIG;
        }
        let h = config.h_list[0];
        match harness::run_single(&config, h) {
            Ok(block) => RunRecord::assemble(config.clone(), vec![block], Vec::new()),
            Err(failure) => RunRecord::assemble(config.clone(), Vec::new(), vec![failure]),
        }
    } else {
        match harness::run_sweep(&config, args.jobs) {
            Ok(record) => record,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    };

    print_record(&record);
    match emit_reports(&record, Path::new(&record.config.out_dir)) {
        Ok(paths) => {
            for p in &paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write reports to {}: {e}", record.config.out_dir);
            return EXIT_RUNTIME;
        }
    }

    if !record.failures.is_empty() {
        return EXIT_RUNTIME;
    }
    if args.strict && record.verdicts.iter().any(|v| !v.pass) {
        return EXIT_VERDICT;
    }
    0
}

fn print_record(record: &RunRecord) {
    for b in &record.blocks {
        println!(
            "mesh h = {}: {} sites, N = {:.4}, dt = {:.6e} ({} steps to t_lat = {:.4}), \
             {} snapshots, {:.1} s",
            b.h,
            b.lattice_sites,
            b.band_limit,
            b.dt,
            b.steps,
            b.lattice_horizon,
            b.snapshots,
            b.wall_clock_seconds
        );
        for d in &b.drifts {
            match d.kappa {
                Some(kappa) => println!(
                    "  {} drift: {:.3e} absolute at kappa = {:.4} ({} samples)",
                    d.functional, d.max_abs_drift, kappa, d.samples
                ),
                None => println!(
                    "  {} drift: {:.3e} relative ({} samples)",
                    d.functional, d.max_rel_drift, d.samples
                ),
            }
        }
        for s in &b.strichartz {
            println!("  spacetime norm {}: raw {:.6e}, normalized {:.6e}", s.label, s.raw, s.normalized);
        }
        for s in &b.suppression_sup {
            println!("  arc-tail sup ratio at delta = {}: {:.6e}", s.delta, s.sup_ratio);
        }
        println!(
            "  err_psi = {:.6e}, err_phi = {:.6e}, cross term = {:.3e}",
            b.err_psi, b.err_phi, b.cross_term
        );
        println!(
            "  reference solves: dt_psi = {:.3e} (dev {:.2e}), dt_phi = {:.3e} (dev {:.2e}), \
             duhamel {:.3e} / {:.3e}",
            b.nls_dt_psi, b.nls_dev_psi, b.nls_dt_phi, b.nls_dev_phi, b.duhamel_psi, b.duhamel_phi
        );
        for note in &b.notes {
            println!("  note: {note}");
        }
    }
    for f in &record.failures {
        println!("failed mesh h = {}: stage \"{}\": {}", f.h, f.stage, f.message);
    }
    if record.partial {
        println!(
            "record is PARTIAL: {} mesh(es) failed, {} completed",
            record.failures.len(),
            record.blocks.len()
        );
    }
    for v in &record.verdicts {
        let status = if v.pass { "PASS" } else { "FAIL" };
        match v.measured {
            Some(m) => println!(
                "verdict {:<22} {status}: measured {:.6e} vs tolerance {:.3e} | {}",
                v.name, m, v.tolerance, v.detail
            ),
            None => println!(
                "verdict {:<22} {status}: no measurement (tolerance {:.3e}) | {}",
                v.name, v.tolerance, v.detail
            ),
        }
    }
}

fn check(args: CheckArgs) -> u8 {
    let config = match &args.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return EXIT_CONFIG;
                }
            };
            match config_from_json(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            }
        }
        None => SimConfig::default(),
    };
    if let Err(e) = validate(&config) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    println!("configuration is valid");
    println!(
        "sign = {:?}, gamma = {}, T = {}, L = {}, dt_lat = {}, snapshots = {}",
        config.sign,
        config.gamma,
        config.t_final,
        config.window_half_width,
        config.dt_lat,
        config.snapshots
    );
    let (psi0, phi0) = config.init.build().expect("validated");
    let mass = psi0.l2_norm_sq() + phi0.l2_norm_sq();
    println!("initial continuum mass ||psi0||^2 + ||phi0||^2 = {mass:.6}");
    if mass > 0.0 {
        println!(
            "mesh bound from the unit-disk mass cap: h <= {:.6} (h * mass <= {MASS_CAP})",
            MASS_CAP / mass
        );
        println!(
            "conservative small-field scale min(1, 0.01/mass) = {:.6e} \
             (informational; meshes above it rely on the in-flow guard)",
            small_h_threshold(&psi0, &phi0)
        );
    }
    println!("h        N            sites    dt_lat        steps    t_lat       est. memory");
    for &h in &config.h_list {
        match mesh_plan(&config, h) {
            Ok(plan) => println!(
                "{:<8} {:<12.6} {:<8} {:<13.6e} {:<8} {:<11.4} {:.1} MB",
                plan.h,
                plan.band_limit,
                plan.lattice_sites,
                plan.dt,
                plan.steps,
                plan.lattice_horizon,
                plan.memory_bytes as f64 / 1.0e6
            ),
            Err(e) => println!("{h:<8} unplannable: {e}"),
        }
    }
    println!("tolerances:");
    for (name, value) in &config.tolerances {
        println!("  {name} = {value:e}");
    }
    println!("output directory: {}", config.out_dir);
    0
}

// --- closed-form self-checks -------------------------------------------

struct OracleCheck {
    name: &'static str,
    error: f64,
    tolerance: f64,
}

fn oracle() -> u8 {
    let checks: Vec<Result<OracleCheck, String>> = vec![
        plane_wave_lattice(),
        split_norm_identity(),
        free_gaussian(),
        nls_plane_wave(),
        soliton_tracking(),
        zero_coefficient_integral(),
        quadratic_regime(),
    ];
    let mut failed = 0;
    for result in checks {
        match result {
            Ok(c) => {
                let status = if c.error <= c.tolerance { "PASS" } else { "FAIL" };
                if c.error > c.tolerance {
                    failed += 1;
                }
                println!(
                    "oracle {:<38} {status}: error {:.3e}, tolerance {:.1e}",
                    c.name, c.error, c.tolerance
                );
            }
            Err(e) => {
                failed += 1;
                println!("oracle setup error: {e}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} oracle check(s) failed");
        EXIT_RUNTIME
    } else {
        0
    }
}

/// Plane wave `a e^{i n theta}` rotates at `4 sin^2(theta/2) + 2 s a^2 cos theta`.
fn plane_wave_lattice() -> Result<OracleCheck, String> {
    let m = 64usize;
    let a = 0.1;
    let theta = 2.0 * PI * 5.0 / m as f64;
    let values: Vec<Complex64> =
        (0..m).map(|i| a * Complex64::from_polar(1.0, theta * i as f64)).collect();
    let field = LatticeField::new(0.1, 0.0, values).map_err(|e| e.to_string())?;
    let params = EvolutionParams {
        sign: Sign::Defocusing,
        dt: 0.05,
        t_final_lat: 50.0,
        snapshot_stride: 1000,
        mass_drift_tol: 1e-8,
    };
    let traj = evolve(&field, &params).map_err(|e| e.to_string())?;
    let (t, last) = traj.snapshots().last().expect("final snapshot");
    let omega = 4.0 * (theta / 2.0).sin().powi(2) + 2.0 * a * a * theta.cos();
    let worst = last
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - a * Complex64::from_polar(1.0, theta * i as f64 - omega * t)).norm())
        .fold(0.0, f64::max);
    Ok(OracleCheck { name: "lattice plane-wave dispersion", error: worst, tolerance: 1e-8 })
}

/// `||psi^h||^2 + ||phi^h||^2 = h^{-1} ||alpha||^2` exactly.
fn split_norm_identity() -> Result<OracleCheck, String> {
    let psi0 = InitData::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0, frequency: 0.0 };
    let phi0 = InitData::Gaussian { amplitude: 0.5, width: 1.0, center: 1.0, frequency: 0.0 };
    let params = SamplingParams {
        h: 0.2,
        gamma: 0.5,
        window_half_width: 32.0,
        oversample: 4,
        enforce_small_h: false,
        relax_gamma: false,
    };
    let alpha = sample_initial_data(&psi0, &phi0, &params).map_err(|e| e.to_string())?;
    let (psi, phi) = split_fields(&alpha);
    let lhs = psi.l2_norm_sq() + phi.l2_norm_sq();
    let rhs = alpha.l2_norm_sq() / params.h;
    Ok(OracleCheck {
        name: "channel-split norm identity",
        error: (lhs - rhs).abs() / rhs,
        tolerance: 1e-10,
    })
}

fn gaussian_field(dx: f64, len: usize) -> Result<ContinuumField, String> {
    let half = 0.5 * dx * len as f64;
    let values: Vec<Complex64> = (0..len)
        .map(|j| {
            let x = -half + dx * j as f64;
            Complex64::new((-x * x).exp(), 0.0)
        })
        .collect();
    ContinuumField::new(dx, values, None).map_err(|e| e.to_string())
}

/// Free evolution of `e^{-x^2}` equals `(1+4it)^{-1/2} e^{-x^2/(1+4it)}`.
fn free_gaussian() -> Result<OracleCheck, String> {
    let (dx, len) = (0.125, 512);
    let f = gaussian_field(dx, len)?;
    let t = 0.7;
    let out = schrodinger_group(&f, t, Orientation::Forward);
    let denom = Complex64::new(1.0, 4.0 * t);
    let root = denom.sqrt();
    let half = 0.5 * dx * len as f64;
    let mut err_sq = 0.0;
    let mut norm_sq = 0.0;
    for j in 0..len {
        let x = -half + dx * j as f64;
        let expect = (Complex64::new(-x * x, 0.0) / denom).exp() / root;
        err_sq += (out.values()[j] - expect).norm_sqr() * dx;
        norm_sq += expect.norm_sqr() * dx;
    }
    Ok(OracleCheck {
        name: "free-propagator Gaussian closed form",
        error: (err_sq / norm_sq).sqrt(),
        tolerance: 1e-10,
    })
}

/// Defocusing plane wave `a e^{ikx}` picks up the phase `e^{-i(k^2+2a^2)t}`.
fn nls_plane_wave() -> Result<OracleCheck, String> {
    let (dx, len) = (0.125, 256);
    let window = dx * len as f64;
    let k = 2.0 * PI * 4.0 / window;
    let a = 0.5;
    let half = 0.5 * window;
    let values: Vec<Complex64> = (0..len)
        .map(|j| a * Complex64::from_polar(1.0, k * (-half + dx * j as f64)))
        .collect();
    let init = ContinuumField::new(dx, values, None).map_err(|e| e.to_string())?;
    let times = [0.0, 0.5, 1.0];
    let states = nls_solve(&init, &times, Sign::Defocusing, Orientation::Forward, 1e-3)
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for s in &states {
        let phase = Complex64::from_polar(1.0, -(k * k + 2.0 * a * a) * s.t);
        let mut err_sq = 0.0;
        for j in 0..len {
            let expect = phase * init.values()[j];
            err_sq += (s.field.values()[j] - expect).norm_sqr() * dx;
        }
        worst = worst.max(err_sq.sqrt() / (a * window.sqrt()));
    }
    Ok(OracleCheck { name: "nls plane-wave phase rotation", error: worst, tolerance: 1e-8 })
}

/// Focusing soliton `sech(x) e^{it}` tracked to `T = 1` in `L^2`.
fn soliton_tracking() -> Result<OracleCheck, String> {
    let (dx, len) = (40.0 / 1024.0, 1024usize);
    let half = 0.5 * dx * len as f64;
    let values: Vec<Complex64> = (0..len)
        .map(|j| Complex64::new(1.0 / (-half + dx * j as f64).cosh(), 0.0))
        .collect();
    let init = ContinuumField::new(dx, values, None).map_err(|e| e.to_string())?;
    let times: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
    let (states, _, _) =
        nls_solve_auto(&init, &times, Sign::Focusing, Orientation::Forward, 1e-8)
            .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for s in &states {
        let phase = Complex64::from_polar(1.0, s.t);
        let mut err_sq = 0.0;
        for j in 0..len {
            let x = -half + dx * j as f64;
            let expect = phase / x.cosh();
            err_sq += (s.field.values()[j] - expect).norm_sqr() * dx;
        }
        worst = worst.max(err_sq.sqrt());
    }
    Ok(OracleCheck { name: "focusing soliton tracking", error: worst, tolerance: 1e-6 })
}

/// With the cubic coefficient zeroed, free snapshots solve the integral
/// equation exactly; the residual is pure quadrature error of 0.
fn zero_coefficient_integral() -> Result<OracleCheck, String> {
    let base = gaussian_field(0.125, 256)?;
    let states: Vec<NlsState> = (0..9)
        .map(|i| {
            let t = i as f64 / 8.0;
            NlsState {
                field: schrodinger_group(&base, t, Orientation::Forward),
                t,
                sign: Sign::Defocusing,
                orientation: Orientation::Forward,
            }
        })
        .collect();
    let r = duhamel_residual_with_coefficient(&states, Sign::Defocusing, Orientation::Forward, 0.0)
        .map_err(|e| e.to_string())?;
    Ok(OracleCheck { name: "zero-coefficient integral identity", error: r, tolerance: 1e-12 })
}

/// For small fields the coercive functional reduces to its quadratic part.
fn quadratic_regime() -> Result<OracleCheck, String> {
    let (h, m, a) = (0.25, 64usize, 5e-4);
    let values: Vec<Complex64> = (0..m)
        .map(|i| {
            let n = i as f64 - m as f64 / 2.0;
            let x = n * h;
            a * (-x * x).exp() * Complex64::from_polar(1.0, 0.3 * n)
        })
        .collect();
    let field = LatticeField::new(h, 0.0, values).map_err(|e| e.to_string())?;
    let kappa = 1.0;
    let g = g_functional(&field, kappa, Sign::Defocusing).map_err(|e| e.to_string())?;
    let g2 = g_quadratic(&field, kappa).map_err(|e| e.to_string())?;
    Ok(OracleCheck {
        name: "coercive functional quadratic regime",
        error: (g - g2).abs() / g2.max(1e-300),
        tolerance: 1e-4,
    })
}
