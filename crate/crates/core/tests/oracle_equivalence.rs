//! The repository's central correctness check: for every supported small
//! system, random operation sequences give the same peak projections from
//! the block engine and the brute-force tensor-product oracle.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use spinstar_core::blockstate::{measure_center_peaks, pseudopure_state, thermal_state, BlockState};
use spinstar_core::evolve::{
    finite_pulse_simultaneous, free_evolve, Drive, EvolutionParams, Species,
};
use spinstar_core::gates::{apply_ideal_gate, Gate};
use spinstar_core::oracle::{
    oracle_pseudopure, oracle_run, oracle_thermal, project_to_peaks, FullState, OracleOp,
};
use spinstar_core::system::{Lopsidedness, SpinStarSystem};

fn engine_apply(state: &BlockState, op: &OracleOp, system: &SpinStarSystem) -> BlockState {
    match op {
        OracleOp::Gate(g) => apply_ideal_gate(state, g).unwrap(),
        OracleOp::FreeEvolve(params) => free_evolve(state, params, system).unwrap(),
        OracleOp::Pulse { drives, duration_s, params } => {
            finite_pulse_simultaneous(state, drives, *duration_s, params, system).unwrap()
        }
    }
}

fn random_op(rng: &mut ChaCha12Rng, n: u32) -> OracleOp {
    let params = EvolutionParams {
        b0_tesla: rng.gen_range(-5e-9..5e-9),
        delta_peripheral_hz: rng.gen_range(-20.0..20.0),
        delta_center_hz: rng.gen_range(-20.0..20.0),
        duration_s: rng.gen_range(0.0..0.2),
    };
    let choice = rng.gen_range(0..10u32);
    match choice {
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
            let both = rng.gen_bool(0.4);
            let mk = |species, rng: &mut ChaCha12Rng| Drive {
                species,
                nutation_hz: rng.gen_range(2e3..2e4),
                rf_phase_rad: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                carrier_offset_hz: 0.0,
            };
            let drives = if both {
                vec![mk(Species::Center, rng), mk(Species::Peripheral, rng)]
            } else if rng.gen_bool(0.5) {
                vec![mk(Species::Center, rng)]
            } else {
                vec![mk(Species::Peripheral, rng)]
            };
            OracleOp::Pulse { drives, duration_s: duration, params }
        }
    }
}

fn compare_after_sequence(
    n: u32,
    trials: usize,
    ops_per_trial: usize,
    seed: u64,
) -> f64 {
    let mut system = SpinStarSystem::tms();
    system.n_peripheral = n;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        // alternate starting states: unit-scale pseudopure and scaled thermal
        let (mut engine_state, mut full_state): (BlockState, FullState) = if trial % 2 == 0 {
            let ells: Vec<i32> = (-(n as i32)..=n as i32).step_by(2).collect();
            let ell = ells[rng.gen_range(0..ells.len())];
            (
                pseudopure_state(&system, Lopsidedness(ell)).unwrap(),
                oracle_pseudopure(&system, Lopsidedness(ell)).unwrap(),
            )
        } else {
            let mut e = thermal_state(&system);
            let mut f = oracle_thermal(&system).unwrap();
            let scale = C64::new(1.0 / system.gamma_peripheral_mhz_t, 0.0);
            for b in e.blocks.iter_mut() {
                b.mat = b.mat.scale(scale);
            }
            f.mat = f.mat.scale(scale);
            (e, f)
        };
        for _ in 0..ops_per_trial {
            let op = random_op(&mut rng, n);
            engine_state = engine_apply(&engine_state, &op, &system);
            full_state = oracle_run(&full_state, &[op], &system).unwrap();
        }
        let engine_peaks = measure_center_peaks(&engine_state, &system);
        let oracle_peaks = project_to_peaks(&full_state, &system);
        for ((le, ae), (lo, ao)) in engine_peaks.iter().zip(oracle_peaks.iter()) {
            assert_eq!(le.0, lo.0);
            worst = worst.max((ae - ao).norm());
        }
    }
    worst
}

#[test]
fn engine_matches_oracle_n1() {
    let worst = compare_after_sequence(1, 40, 8, 11);
    assert!(worst <= 1e-10, "worst deviation {worst}");
}

#[test]
fn engine_matches_oracle_n2() {
    let worst = compare_after_sequence(2, 40, 8, 22);
    assert!(worst <= 1e-10, "worst deviation {worst}");
}

#[test]
fn engine_matches_oracle_n3() {
    let worst = compare_after_sequence(3, 40, 8, 33);
    assert!(worst <= 1e-10, "worst deviation {worst}");
}

#[test]
fn engine_matches_oracle_n4() {
    let worst = compare_after_sequence(4, 15, 6, 44);
    assert!(worst <= 1e-10, "worst deviation {worst}");
}
