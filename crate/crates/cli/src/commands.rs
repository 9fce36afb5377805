//! The five batch subcommands: spectrum, estimate, sweep, compile and
//! oracle-check.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use spinstar_core::blockstate::{measure_center_peaks, pseudopure_state, thermal_state};
use spinstar_core::compiler::{build_sequence, compile_with_readout};
use spinstar_core::estimator::FieldEstimate;
use spinstar_core::evolve::{
    finite_pulse_simultaneous, free_evolve, Drive, EvolutionParams, Species,
};
use spinstar_core::experiment::{derive_seed, detect, run_field_experiment, simulate_peaks};
use spinstar_core::gates::{apply_ideal_gate, Gate};
use spinstar_core::oracle::{oracle_pseudopure, oracle_run, oracle_thermal, project_to_peaks, OracleOp};
use spinstar_core::program::PulseShape;
use spinstar_core::experiment::PulseModel;

use crate::config::{config_err, CliError, RunConfig, SweepAxis};
use crate::output;

fn ensure_out_dir(config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::Numeric(format!("cannot create {}: {e}", config.out_dir.display())))
}

/// prepare → sequence → readout → spectro; emits spectrum.csv, peaks.csv and
/// spectrum.svg.
pub fn cmd_spectrum(config: &RunConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let spec = config.experiment_spec();
    let amps = simulate_peaks(&spec)?;
    let det = detect(
        &amps,
        &config.system,
        &config.relax,
        &config.acquisition,
        &config.corruption,
        config.seed,
    )?;
    output::write_spectrum_csv(&config.out_dir.join("spectrum.csv"), &det.spectrum)?;
    output::write_peaks_csv(&config.out_dir.join("peaks.csv"), &det.peaks)?;
    let series: Vec<(f64, f64)> = det
        .spectrum
        .freq_hz
        .iter()
        .zip(det.spectrum.amps.iter())
        .map(|(f, a)| (*f, a.re))
        .collect();
    output::svg_line_plot(
        &config.out_dir.join("spectrum.svg"),
        "centre-spin spectrum (real part)",
        "frequency offset [Hz]",
        "amplitude [arb]",
        &[("Re S(f)", series)],
    )?;
    println!(
        "spectrum: {} lines written to {}",
        det.peaks.len(),
        config.out_dir.display()
    );
    Ok(())
}

fn estimate_once(config: &RunConfig, seed: u64) -> Result<spinstar_core::experiment::FieldExperimentOutput, CliError> {
    let spec = config.experiment_spec();
    if spec.sequence.is_none() {
        return Err(config_err("sequence: estimate requires original | a | b"));
    }
    if !(spec.delay_s > 0.0) {
        return Err(config_err("delay_s: estimate requires a positive delay"));
    }
    Ok(run_field_experiment(
        &spec,
        &config.acquisition,
        &config.corruption,
        &config.estimator,
        seed,
    )?)
}

fn degraded(estimate: &FieldEstimate) -> bool {
    estimate.flags.iter().any(|f| f.starts_with("degraded"))
}

/// Field experiment plus zero-delay reference; emits per-peak estimates CSV,
/// the fused JSON record and spectra.
pub fn cmd_estimate(config: &RunConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let out = estimate_once(config, config.seed)?;
    output::write_spectrum_csv(&config.out_dir.join("reference_spectrum.csv"), &out.reference.spectrum)?;
    output::write_spectrum_csv(&config.out_dir.join("target_spectrum.csv"), &out.target.spectrum)?;
    output::write_peaks_csv(&config.out_dir.join("calibrated_peaks.csv"), &out.calibrated)?;
    output::write_peak_estimates_csv(&config.out_dir.join("peak_estimates.csv"), &out.estimate)?;
    output::write_estimate_json(&config.out_dir.join("estimate.json"), &out.estimate)?;
    let per_peak: Vec<(f64, f64)> =
        out.estimate.peaks.iter().map(|r| (r.ell as f64, r.b0_tesla)).collect();
    let fused: Vec<(f64, f64)> = out
        .estimate
        .peaks
        .iter()
        .map(|r| (r.ell as f64, out.estimate.b0_tesla))
        .collect();
    output::svg_line_plot(
        &config.out_dir.join("estimate.svg"),
        "per-peak field estimates",
        "lopsidedness",
        "B0 estimate [T]",
        &[("per peak", per_peak), ("fused", fused)],
    )?;
    println!(
        "estimate: B0 = {} T, sigma = {} T, flags: [{}]",
        output::fmt_f64(out.estimate.b0_tesla),
        output::fmt_f64(out.estimate.sigma_tesla),
        out.estimate.flags.join("; ")
    );
    if config.fail_on_degraded && degraded(&out.estimate) {
        return Err(CliError::Numeric("estimate degraded".into()));
    }
    Ok(())
}

/// Parallel sweep over one configuration axis; per-point failures are
/// recorded and the sweep continues.
pub fn cmd_sweep(config: &RunConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let axis = config
        .sweep_axis
        .ok_or_else(|| config_err("sweep.axis: required for the sweep command"))?;
    if config.sweep_values.len() < 2 {
        return Err(config_err("sweep.values: need at least 2 points"));
    }
    let points: Vec<(usize, f64)> =
        config.sweep_values.iter().copied().enumerate().collect();
    let run_point = |(index, value): &(usize, f64)| -> (f64, Option<(f64, f64)>, String) {
        let mut point_config = config.clone();
        match axis {
            SweepAxis::DeltaCenter => point_config.delta_si_hz = *value,
            SweepAxis::DeltaPeripheral => point_config.delta_h_hz = *value,
            SweepAxis::B0 => point_config.b0_tesla = *value,
        }
        match estimate_once(&point_config, derive_seed(config.seed, *index as u64)) {
            Ok(out) => {
                let flags = out.estimate.flags.join("; ");
                (*value, Some((out.estimate.b0_tesla, out.estimate.sigma_tesla)), flags)
            }
            Err(e) => (*value, None, format!("error: {e}")),
        }
    };
    let rows: Vec<(f64, Option<(f64, f64)>, String)> = match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
            pool.install(|| {
                use rayon::prelude::*;
                points.par_iter().map(run_point).collect()
            })
        }
        None => {
            use rayon::prelude::*;
            points.par_iter().map(run_point).collect()
        }
    };
    output::write_sweep_csv(&config.out_dir.join("sweep.csv"), &rows)?;
    let curve: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|(v, est, _)| est.map(|(b0, _)| (*v, b0)))
        .collect();
    output::svg_line_plot(
        &config.out_dir.join("sweep.svg"),
        "fused estimate vs sweep value",
        "sweep value",
        "B0 estimate [T]",
        &[("fused estimate", curve)],
    )?;
    let failures = rows.iter().filter(|(_, est, _)| est.is_none()).count();
    println!(
        "sweep: {} points, {failures} failed, written to {}",
        rows.len(),
        config.out_dir.display()
    );
    Ok(())
}

/// Compile the configured sequence and emit the timed pulse program.
pub fn cmd_compile(config: &RunConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let kind = config
        .sequence
        .ok_or_else(|| config_err("sequence: compile requires original | a | b"))?;
    let shape = match config.pulses {
        PulseModel::Bb1 => PulseShape::Bb1,
        _ => PulseShape::Hard,
    };
    let ir = build_sequence(kind, config.priming, config.delay_s, &config.system)?;
    let program = compile_with_readout(&ir, &config.system, shape)?;
    let text = program.to_text();
    std::fs::write(config.out_dir.join("program.txt"), &text)
        .map_err(|e| CliError::Numeric(format!("io: {e}")))?;
    print!("{text}");
    Ok(())
}

fn random_op(rng: &mut ChaCha12Rng, n: u32) -> OracleOp {
    let params = EvolutionParams {
        b0_tesla: rng.gen_range(-5e-9..5e-9),
        delta_peripheral_hz: rng.gen_range(-20.0..20.0),
        delta_center_hz: rng.gen_range(-20.0..20.0),
        duration_s: rng.gen_range(0.0..0.2),
    };
    match rng.gen_range(0..10u32) {
        0 => OracleOp::Gate(Gate::HadamardCenter),
        1 => OracleOp::Gate(Gate::NotCenter),
        2 => OracleOp::Gate(Gate::NotPeripheral),
        3 => OracleOp::Gate(Gate::ZCenter(rng.gen_range(-3.0..3.0))),
        4 => OracleOp::Gate(Gate::ZPeripheral(rng.gen_range(-3.0..3.0))),
        5 => OracleOp::Gate(Gate::CnotCenterToPeripheral),
        6 if n % 2 == 1 => OracleOp::Gate(Gate::ModCnotPeripheralToCenter),
        6 => OracleOp::Gate(Gate::RotCenter {
            phase: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            angle: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
        }),
        7 => OracleOp::Gate(Gate::RotPeripheral {
            phase: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            angle: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
        }),
        8 => OracleOp::FreeEvolve(params),
        _ => {
            let duration = rng.gen_range(1e-6..5e-5);
            let mut drives = vec![Drive {
                species: if rng.gen_bool(0.5) { Species::Center } else { Species::Peripheral },
                nutation_hz: rng.gen_range(2e3..2e4),
                rf_phase_rad: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                carrier_offset_hz: 0.0,
            }];
            if rng.gen_bool(0.4) {
                drives.push(Drive {
                    species: match drives[0].species {
                        Species::Center => Species::Peripheral,
                        Species::Peripheral => Species::Center,
                    },
                    nutation_hz: rng.gen_range(2e3..2e4),
                    rf_phase_rad: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                    carrier_offset_hz: 0.0,
                });
            }
            OracleOp::Pulse { drives, duration_s: duration, params }
        }
    }
}

/// Random operation sequences on both engines; prints the worst deviation of
/// the peak projections and fails beyond 1e-10.
pub fn cmd_oracle_check(config: &RunConfig) -> Result<(), CliError> {
    let n = config.oracle_n;
    if n > 4 {
        return Err(config_err(format!(
            "oracle.n: {n} exceeds the cost guard (n <= 4)"
        )));
    }
    if config.oracle_trials == 0 {
        println!("oracle-check: 0 trials requested, vacuous pass (warning)");
        return Ok(());
    }
    let mut system = config.system.clone();
    system.n_peripheral = n;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut worst: f64 = 0.0;
    for trial in 0..config.oracle_trials {
        let ells: Vec<i32> = (-(n as i32)..=n as i32).step_by(2).collect();
        let (mut engine_state, mut full_state) = if trial % 2 == 0 {
            let ell = ells[rng.gen_range(0..ells.len())];
            (
                pseudopure_state(&system, spinstar_core::system::Lopsidedness(ell))?,
                oracle_pseudopure(&system, spinstar_core::system::Lopsidedness(ell))?,
            )
        } else {
            let mut e = thermal_state(&system);
            let mut f = oracle_thermal(&system)?;
            let scale = C64::new(1.0 / system.gamma_peripheral_mhz_t, 0.0);
            for b in e.blocks.iter_mut() {
                b.mat = b.mat.scale(scale);
            }
            f.mat = f.mat.scale(scale);
            (e, f)
        };
        for _ in 0..8 {
            let op = random_op(&mut rng, n);
            engine_state = match &op {
                OracleOp::Gate(g) => apply_ideal_gate(&engine_state, g)?,
                OracleOp::FreeEvolve(p) => free_evolve(&engine_state, p, &system)?,
                OracleOp::Pulse { drives, duration_s, params } => {
                    finite_pulse_simultaneous(&engine_state, drives, *duration_s, params, &system)?
                }
            };
            full_state = oracle_run(&full_state, &[op], &system)?;
        }
        let ep = measure_center_peaks(&engine_state, &system);
        let op = project_to_peaks(&full_state, &system);
        for ((_, a), (_, b)) in ep.iter().zip(op.iter()) {
            worst = worst.max((a - b).norm());
        }
    }
    println!(
        "oracle-check: n={n}, trials={}, max deviation {:e}",
        config.oracle_trials, worst
    );
    if worst > 1e-10 {
        return Err(CliError::Numeric(format!(
            "engine/oracle deviation {worst:e} exceeds 1e-10"
        )));
    }
    Ok(())
}
