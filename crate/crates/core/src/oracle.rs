//! Reference full tensor-product simulator for small systems (N ≤ 4).
//!
//! Everything here is built directly in the 2^(N+1)-dimensional product
//! basis with no symmetry assumptions: per-spin operators, a Taylor
//! scaling-and-squaring matrix exponential, and permutation gates written as
//! explicit basis maps. The block engine uses none of these code paths, so
//! agreement between the two is evidence rather than tautology.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolve::{Drive, EvolutionParams, Species};
use crate::gates::Gate;
use crate::linalg::CMat;
use crate::program::{Primitive, PulseProgram, PulseSpecies};
use crate::system::{Lopsidedness, SpinStarSystem};

/// Full density matrix over centre ⊗ peripherals. Basis index c·2^N + p with
/// bit i of p giving the state of proton i (0 = up).
#[derive(Debug, Clone)]
pub struct FullState {
    pub n: u32,
    pub mat: CMat,
}

const MAX_N: u32 = 4;

fn guard(n: u32) -> Result<()> {
    if n > MAX_N {
        return Err(Error::OracleTooLarge(n));
    }
    Ok(())
}

fn dim(n: u32) -> usize {
    1 << (n + 1)
}

fn spin_m(bit: usize) -> f64 {
    if bit == 0 {
        0.5
    } else {
        -0.5
    }
}

fn lops_of(p: usize, n: u32) -> i32 {
    let down = (p as u32 & ((1u32 << n) - 1)).count_ones() as i32;
    n as i32 - 2 * down
}

pub fn oracle_thermal(system: &SpinStarSystem) -> Result<FullState> {
    let n = system.n_peripheral;
    guard(n)?;
    let d = dim(n);
    let mut mat = CMat::zeros(d);
    for idx in 0..d {
        let c = idx >> n;
        let p = idx & ((1 << n) - 1);
        let pop = system.gamma_center_mhz_t * spin_m(c)
            + system.gamma_peripheral_mhz_t * lops_of(p, n) as f64 / 2.0;
        mat[(idx, idx)] = C64::new(pop, 0.0);
    }
    Ok(FullState { n, mat })
}

pub fn oracle_pseudopure(system: &SpinStarSystem, ell: Lopsidedness) -> Result<FullState> {
    let n = system.n_peripheral;
    guard(n)?;
    let ell = Lopsidedness::checked(n, ell.0)?;
    let d = dim(n);
    let mut mat = CMat::zeros(d);
    let members: Vec<usize> =
        (0..(1usize << n)).filter(|&p| lops_of(p, n) == ell.0).collect();
    let w = 1.0 / members.len() as f64;
    for p in members {
        mat[(p, p)] = C64::new(w, 0.0); // c = 0 branch
    }
    Ok(FullState { n, mat })
}

/// Taylor scaling-and-squaring exponential of a general complex matrix.
fn expm(a: &CMat) -> CMat {
    let norm1 = {
        let n = a.dim;
        let mut worst = 0.0f64;
        for j in 0..n {
            let col: f64 = (0..n).map(|i| a[(i, j)].norm()).sum();
            worst = worst.max(col);
        }
        worst
    };
    let k = if norm1 > 0.25 { (norm1 / 0.25).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(C64::new(1.0 / (1u64 << k) as f64, 0.0));
    let mut result = CMat::identity(a.dim);
    let mut term = CMat::identity(a.dim);
    for j in 1..=24 {
        term = term.mul(&scaled).scale(C64::new(1.0 / j as f64, 0.0));
        result = result.add(&term);
        if term.frobenius_norm() < 1e-20 * result.frobenius_norm() {
            break;
        }
    }
    for _ in 0..k {
        result = result.mul(&result);
    }
    result
}

/// Single-spin 2×2 embedded at a bit position (0..N-1 = protons, N = centre).
fn embed(n: u32, bit: u32, op: [[C64; 2]; 2]) -> CMat {
    let d = dim(n);
    let mut m = CMat::zeros(d);
    for col in 0..d {
        let s = (col >> bit) & 1;
        for (s2, row_op) in op.iter().enumerate() {
            let _ = row_op;
            let row = (col & !(1 << bit)) | (s2 << bit);
            let v = op[s2][s];
            if v.norm_sqr() > 0.0 {
                m[(row, col)] += v;
            }
        }
    }
    m
}

fn rot2(phase: f64, angle: f64) -> [[C64; 2]; 2] {
    let c = C64::new((angle / 2.0).cos(), 0.0);
    let s = (angle / 2.0).sin();
    [
        [c, C64::new(0.0, -s) * C64::from_polar(1.0, -phase)],
        [C64::new(0.0, -s) * C64::from_polar(1.0, phase), c],
    ]
}

fn hadamard2() -> [[C64; 2]; 2] {
    let h = C64::new(1.0 / 2.0_f64.sqrt(), 0.0);
    [[h, h], [h, -h]]
}

fn x2() -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    [[z, o], [o, z]]
}

/// Free Hamiltonian as a full diagonal matrix (Hz).
fn free_hamiltonian(system: &SpinStarSystem, params: &EvolutionParams) -> CMat {
    let n = system.n_peripheral;
    let d = dim(n);
    let dc = params.delta_center_eff(system);
    let dp = params.delta_peripheral_eff(system);
    let j = system.j_coupling_hz;
    let mut h = CMat::zeros(d);
    for idx in 0..d {
        let mc = spin_m(idx >> n);
        let p = idx & ((1 << n) - 1);
        let mut e = dc * mc;
        for i in 0..n {
            let mi = spin_m((p >> i) & 1);
            e += dp * mi + j * mc * mi;
        }
        h[(idx, idx)] = C64::new(e, 0.0);
    }
    h
}

/// Collective equatorial drive operator for one species.
fn drive_operator(n: u32, species: Species, phase: f64) -> CMat {
    let g2 = {
        let z = C64::new(0.0, 0.0);
        let off = C64::from_polar(0.5, -phase);
        [[z, off], [off.conj(), z]]
    };
    match species {
        Species::Center => embed(n, n, g2),
        Species::Peripheral => {
            let mut m = CMat::zeros(dim(n));
            for i in 0..n {
                m = m.add(&embed(n, i, g2));
            }
            m
        }
    }
}

fn unitary_for_gate(gate: &Gate, system: &SpinStarSystem) -> Result<CMat> {
    let n = system.n_peripheral;
    let d = dim(n);
    let mask = (1usize << n) - 1;
    let u = match gate {
        Gate::HadamardCenter => embed(n, n, hadamard2()),
        Gate::NotCenter => embed(n, n, x2()),
        Gate::NotPeripheral => {
            let mut m = CMat::zeros(d);
            for col in 0..d {
                let c = col & !mask;
                let p = col & mask;
                m[(c | (!p & mask), col)] = C64::new(1.0, 0.0);
            }
            m
        }
        Gate::ZCenter(theta) => {
            let z = C64::new(0.0, 0.0);
            embed(
                n,
                n,
                [[C64::from_polar(1.0, -theta / 2.0), z], [z, C64::from_polar(1.0, theta / 2.0)]],
            )
        }
        Gate::ZPeripheral(theta) => {
            let mut m = CMat::zeros(d);
            for col in 0..d {
                let mj = lops_of(col & mask, n) as f64 / 2.0;
                m[(col, col)] = C64::from_polar(1.0, -theta * mj);
            }
            m
        }
        Gate::CnotCenterToPeripheral => {
            let mut m = CMat::zeros(d);
            for col in 0..d {
                if col >> n == 0 {
                    m[(col, col)] = C64::new(1.0, 0.0);
                } else {
                    let p = col & mask;
                    m[((1 << n) | (!p & mask), col)] = C64::new(1.0, 0.0);
                }
            }
            m
        }
        Gate::ModCnotPeripheralToCenter => {
            if n % 2 == 0 {
                return Err(Error::EvenPeripheralCount("disentangling CNOT".into()));
            }
            let mut m = CMat::zeros(d);
            for col in 0..d {
                let p = col & mask;
                let down = (p as u32).count_ones();
                if 2 * down > n {
                    // majority down: m_J < 0, flip the centre bit
                    m[(col ^ (1 << n), col)] = C64::new(1.0, 0.0);
                } else {
                    m[(col, col)] = C64::new(1.0, 0.0);
                }
            }
            m
        }
        Gate::RotCenter { phase, angle } => embed(n, n, rot2(*phase, *angle)),
        Gate::RotPeripheral { phase, angle } => {
            let mut u = CMat::identity(d);
            for i in 0..n {
                u = u.mul(&embed(n, i, rot2(*phase, *angle)));
            }
            u
        }
    };
    Ok(u)
}

/// One oracle-level operation, mirroring the engine's operation set.
#[derive(Debug, Clone)]
pub enum OracleOp {
    Gate(Gate),
    FreeEvolve(EvolutionParams),
    Pulse { drives: Vec<Drive>, duration_s: f64, params: EvolutionParams },
}

fn unitary_for_op(op: &OracleOp, system: &SpinStarSystem) -> Result<CMat> {
    match op {
        OracleOp::Gate(g) => unitary_for_gate(g, system),
        OracleOp::FreeEvolve(params) => {
            let h = free_hamiltonian(system, params);
            let s = C64::new(0.0, 2.0 * std::f64::consts::PI * params.duration_s);
            Ok(expm(&h.scale(s)))
        }
        OracleOp::Pulse { drives, duration_s, params } => {
            let mut shifted = *params;
            for d in drives {
                match d.species {
                    Species::Center => shifted.delta_center_hz -= d.carrier_offset_hz,
                    Species::Peripheral => shifted.delta_peripheral_hz -= d.carrier_offset_hz,
                }
            }
            let mut h = free_hamiltonian(system, &shifted);
            for d in drives {
                let g = drive_operator(system.n_peripheral, d.species, d.rf_phase_rad);
                h = h.add(&g.scale(C64::new(-d.nutation_hz, 0.0)));
            }
            let s = C64::new(0.0, 2.0 * std::f64::consts::PI * duration_s);
            Ok(expm(&h.scale(s)))
        }
    }
}

/// Evolve a full state through a list of operations.
pub fn oracle_run(
    initial: &FullState,
    ops: &[OracleOp],
    system: &SpinStarSystem,
) -> Result<FullState> {
    guard(system.n_peripheral)?;
    let mut mat = initial.mat.clone();
    for op in ops {
        let u = unitary_for_op(op, system)?;
        mat = mat.conjugate_by(&u);
    }
    Ok(FullState { n: initial.n, mat })
}

/// Net unitary of a pulse program (instantaneous pulses, delays evolved).
pub fn oracle_program_unitary(
    program: &PulseProgram,
    params: &EvolutionParams,
    system: &SpinStarSystem,
) -> Result<CMat> {
    guard(system.n_peripheral)?;
    let mut u = CMat::identity(dim(system.n_peripheral));
    for prim in &program.primitives {
        let step = match prim {
            Primitive::Delay { duration_s } => {
                let h = free_hamiltonian(system, params);
                let s = C64::new(0.0, 2.0 * std::f64::consts::PI * duration_s);
                expm(&h.scale(s))
            }
            Primitive::FrameShift { species, angle_rad } => {
                let gate = match species {
                    Species::Center => Gate::ZCenter(*angle_rad),
                    Species::Peripheral => Gate::ZPeripheral(*angle_rad),
                };
                unitary_for_gate(&gate, system)?
            }
            Primitive::Pulse { species, flip_angle_rad, rf_phase_rad, .. } => {
                let mut step = CMat::identity(dim(system.n_peripheral));
                if matches!(species, PulseSpecies::Center | PulseSpecies::Both) {
                    step = step.mul(&unitary_for_gate(
                        &Gate::RotCenter { phase: *rf_phase_rad, angle: *flip_angle_rad },
                        system,
                    )?);
                }
                if matches!(species, PulseSpecies::Peripheral | PulseSpecies::Both) {
                    step = step.mul(&unitary_for_gate(
                        &Gate::RotPeripheral { phase: *rf_phase_rad, angle: *flip_angle_rad },
                        system,
                    )?);
                }
                step
            }
        };
        u = step.mul(&u);
    }
    Ok(u)
}

/// Sum centre single-quantum coherences over peripheral basis states grouped
/// by lopsidedness; matches the block engine's peak measurement on
/// collective states.
pub fn project_to_peaks(
    state: &FullState,
    system: &SpinStarSystem,
) -> Vec<(Lopsidedness, C64)> {
    let n = state.n;
    system
        .lopsidedness_values()
        .into_iter()
        .map(|ell| {
            let mut amp = C64::new(0.0, 0.0);
            for p in 0..(1usize << n) {
                if lops_of(p, n) == ell.0 {
                    amp += state.mat[(p, (1 << n) | p)];
                }
            }
            (ell, amp)
        })
        .collect()
}
