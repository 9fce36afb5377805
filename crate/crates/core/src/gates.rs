//! Ideal (instantaneous) gates on the block representation.
//!
//! Convention: rotations are right-handed, U = exp(−iθ(cosφ·Ax + sinφ·Ay))
//! for an equatorial axis at phase φ and exp(−iθ·Az) about z, while free
//! evolution advances element phases by +2π·t·ΔE (see [`crate::evolve`]).

use num_complex::Complex64 as C64;

use crate::blockstate::{BlockState, SectorBlock, CENTER_DOWN, CENTER_UP};
use crate::error::{Error, Result};
use crate::linalg::{exp_i_hermitian, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    HadamardCenter,
    NotCenter,
    /// Collective NOT of the peripheral register (all spins flipped).
    NotPeripheral,
    ZCenter(f64),
    ZPeripheral(f64),
    /// Collective NOT on the peripherals conditioned on the centre being
    /// |1⟩ (m_c = −1/2); identity on m_c = +1/2.
    CnotCenterToPeripheral,
    /// Disentangling gate: flips the centre iff the peripheral register is in
    /// the flipped branch (m_J < 0). Only defined for odd peripheral counts.
    ModCnotPeripheralToCenter,
    RotCenter { phase: f64, angle: f64 },
    RotPeripheral { phase: f64, angle: f64 },
}

/// Sign carried by the collective flip on sector J so that the gate equals
/// the product-basis flip of every peripheral spin: (−1)^((N−2J)/2).
pub fn collective_flip_sign(n: u32, two_j: u32) -> f64 {
    if ((n - two_j) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Operator builders on one sector block (dimension 2(2J+1)).
pub mod ops {
    use super::*;

    /// Collective Jz in the (2J+1)-dim azimuthal basis (m = J..−J).
    pub fn jz(two_j: u32) -> CMat {
        let dim = two_j as usize + 1;
        let j = two_j as f64 / 2.0;
        let mut m = CMat::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = C64::new(j - k as f64, 0.0);
        }
        m
    }

    /// Collective Jx and Jy from the ladder operators.
    pub fn jx_jy(two_j: u32) -> (CMat, CMat) {
        let dim = two_j as usize + 1;
        let j = two_j as f64 / 2.0;
        let mut jx = CMat::zeros(dim);
        let mut jy = CMat::zeros(dim);
        for k in 1..dim {
            // ⟨J,m+1|J+|J,m⟩ with m = J-k (row k-1, column k)
            let m = j - k as f64;
            let amp = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
            jx[(k - 1, k)] = C64::new(amp / 2.0, 0.0);
            jx[(k, k - 1)] = C64::new(amp / 2.0, 0.0);
            jy[(k - 1, k)] = C64::new(0.0, -amp / 2.0);
            jy[(k, k - 1)] = C64::new(0.0, amp / 2.0);
        }
        (jx, jy)
    }

    /// Embed a 2×2 centre operator into the block: op ⊗ I.
    pub fn center(op: [[C64; 2]; 2], dim_j: usize) -> CMat {
        let mut m = CMat::zeros(2 * dim_j);
        for a in 0..2 {
            for b in 0..2 {
                for k in 0..dim_j {
                    m[(a * dim_j + k, b * dim_j + k)] = op[a][b];
                }
            }
        }
        m
    }

    /// Embed a peripheral operator into the block: I ⊗ op.
    pub fn peripheral(op: &CMat, dim_j: usize) -> CMat {
        let mut m = CMat::zeros(2 * dim_j);
        for c in 0..2 {
            for a in 0..dim_j {
                for b in 0..dim_j {
                    m[(c * dim_j + a, c * dim_j + b)] = op[(a, b)];
                }
            }
        }
        m
    }

    pub fn sz2() -> [[C64; 2]; 2] {
        let h = C64::new(0.5, 0.0);
        [[h, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), -h]]
    }

    /// cosφ·Sx + sinφ·Sy as a 2×2.
    pub fn equatorial2(phase: f64) -> [[C64; 2]; 2] {
        let z = C64::new(0.0, 0.0);
        let off = C64::from_polar(0.5, -phase);
        [[z, off], [off.conj(), z]]
    }
}

fn unitary_for(gate: &Gate, block: &SectorBlock, n: u32) -> Result<CMat> {
    let dim_j = block.sector.dim();
    let dim = 2 * dim_j;
    let u = match gate {
        Gate::HadamardCenter => {
            let s = C64::new(1.0 / 2.0_f64.sqrt(), 0.0);
            ops::center([[s, s], [s, -s]], dim_j)
        }
        Gate::NotCenter => {
            let z = C64::new(0.0, 0.0);
            let o = C64::new(1.0, 0.0);
            ops::center([[z, o], [o, z]], dim_j)
        }
        Gate::NotPeripheral => {
            let sign = collective_flip_sign(n, block.sector.two_j);
            let mut u = CMat::zeros(dim);
            for c in 0..2 {
                for k in 0..dim_j {
                    u[(c * dim_j + (dim_j - 1 - k), c * dim_j + k)] = C64::new(sign, 0.0);
                }
            }
            u
        }
        Gate::ZCenter(theta) => {
            let z = C64::new(0.0, 0.0);
            ops::center(
                [[C64::from_polar(1.0, -theta / 2.0), z], [z, C64::from_polar(1.0, theta / 2.0)]],
                dim_j,
            )
        }
        Gate::ZPeripheral(theta) => {
            let mut op = CMat::zeros(dim_j);
            for k in 0..dim_j {
                op[(k, k)] = C64::from_polar(1.0, -theta * block.m_j(k));
            }
            ops::peripheral(&op, dim_j)
        }
        Gate::CnotCenterToPeripheral => {
            let sign = collective_flip_sign(n, block.sector.two_j);
            let mut u = CMat::zeros(dim);
            for k in 0..dim_j {
                u[(block.idx(CENTER_UP, k), block.idx(CENTER_UP, k))] = C64::new(1.0, 0.0);
                u[(block.idx(CENTER_DOWN, dim_j - 1 - k), block.idx(CENTER_DOWN, k))] =
                    C64::new(sign, 0.0);
            }
            u
        }
        Gate::ModCnotPeripheralToCenter => {
            if n % 2 == 0 {
                return Err(Error::EvenPeripheralCount("disentangling CNOT".into()));
            }
            let mut u = CMat::zeros(dim);
            for k in 0..dim_j {
                if block.m_j(k) > 0.0 {
                    u[(block.idx(CENTER_UP, k), block.idx(CENTER_UP, k))] = C64::new(1.0, 0.0);
                    u[(block.idx(CENTER_DOWN, k), block.idx(CENTER_DOWN, k))] = C64::new(1.0, 0.0);
                } else {
                    u[(block.idx(CENTER_DOWN, k), block.idx(CENTER_UP, k))] = C64::new(1.0, 0.0);
                    u[(block.idx(CENTER_UP, k), block.idx(CENTER_DOWN, k))] = C64::new(1.0, 0.0);
                }
            }
            u
        }
        Gate::RotCenter { phase, angle } => {
            let h = ops::center(ops::equatorial2(*phase), dim_j);
            exp_i_hermitian(&h, -*angle)
        }
        Gate::RotPeripheral { phase, angle } => {
            let (jx, jy) = ops::jx_jy(block.sector.two_j);
            let h = jx.scale(C64::new(phase.cos(), 0.0)).add(&jy.scale(C64::new(phase.sin(), 0.0)));
            exp_i_hermitian(&ops::peripheral(&h, dim_j), -*angle)
        }
    };
    Ok(u)
}

/// Apply an ideal gate blockwise: ρ_J → U_J ρ_J U_J† for every sector.
pub fn apply_ideal_gate(state: &BlockState, gate: &Gate) -> Result<BlockState> {
    let mut out = state.clone();
    for block in out.blocks.iter_mut() {
        let u = unitary_for(gate, block, state.n_peripheral)?;
        block.mat = block.mat.conjugate_by(&u);
    }
    Ok(out)
}

pub fn apply_ideal_gates(state: &BlockState, gates: &[Gate]) -> Result<BlockState> {
    let mut s = state.clone();
    for g in gates {
        s = apply_ideal_gate(&s, g)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockstate::{measure_center_peaks, pseudopure_state, thermal_state};
    use crate::system::{Lopsidedness, SpinStarSystem};
    use std::f64::consts::FRAC_PI_2;

    fn readout() -> Gate {
        Gate::RotCenter { phase: -FRAC_PI_2, angle: FRAC_PI_2 }
    }

    #[test]
    fn hadamard_then_cnot_builds_noon() {
        let system = SpinStarSystem::tms();
        let psi = pseudopure_state(&system, Lopsidedness(12)).unwrap();
        let s = apply_ideal_gates(&psi, &[Gate::HadamardCenter, Gate::CnotCenterToPeripheral])
            .unwrap();
        // expect (|0,m=6⟩ + |1,m=-6⟩)/√2 density matrix in the top sector
        let top = &s.blocks[0];
        let dim_j = top.sector.dim();
        let i0 = top.idx(CENTER_UP, 0); // m=+6
        let i1 = top.idx(CENTER_DOWN, dim_j - 1); // m=-6
        assert!((top.mat[(i0, i0)].re - 0.5).abs() < 1e-12);
        assert!((top.mat[(i1, i1)].re - 0.5).abs() < 1e-12);
        assert!((top.mat[(i0, i1)].norm() - 0.5).abs() < 1e-12);
        // nothing anywhere else
        let total: f64 = s.blocks.iter().map(|b| b.mat.frobenius_norm()).sum();
        assert!((total - top.mat.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn cnot_is_involution() {
        let system = SpinStarSystem::tms();
        let thermal = thermal_state(&system);
        let s = apply_ideal_gates(
            &thermal,
            &[Gate::HadamardCenter, Gate::CnotCenterToPeripheral, Gate::CnotCenterToPeripheral],
        )
        .unwrap();
        let expect = apply_ideal_gate(&thermal, &Gate::HadamardCenter).unwrap();
        assert!(s.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn hadamard_squared_is_identity() {
        let system = SpinStarSystem::tms();
        let thermal = thermal_state(&system);
        let readout_state = apply_ideal_gate(&thermal, &readout()).unwrap();
        let s = apply_ideal_gates(&readout_state, &[Gate::HadamardCenter, Gate::HadamardCenter])
            .unwrap();
        assert!(s.max_abs_diff(&readout_state) < 1e-12);
    }

    #[test]
    fn not_center_swaps_branch_labels_of_noon() {
        let system = SpinStarSystem::tms();
        let psi = pseudopure_state(&system, Lopsidedness(12)).unwrap();
        let noon = apply_ideal_gates(&psi, &[Gate::HadamardCenter, Gate::CnotCenterToPeripheral])
            .unwrap();
        let s = apply_ideal_gate(&noon, &Gate::NotCenter).unwrap();
        let top = &s.blocks[0];
        let dim_j = top.sector.dim();
        // branches now |1,m=6⟩ and |0,m=-6⟩, coherence magnitude preserved
        let i0 = top.idx(CENTER_DOWN, 0);
        let i1 = top.idx(CENTER_UP, dim_j - 1);
        assert!((top.mat[(i0, i0)].re - 0.5).abs() < 1e-12);
        assert!((top.mat[(i1, i1)].re - 0.5).abs() < 1e-12);
        assert!((top.mat[(i0, i1)].norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mod_cnot_factorizes_center_from_noon() {
        // the disentangled product of the conditional NOT: centre in |0⟩,
        // peripherals left in the |m⟩+|-m⟩ superposition
        let system = SpinStarSystem::tmp(10.8394, 11.0).unwrap();
        let psi = pseudopure_state(&system, Lopsidedness(9)).unwrap();
        let s = apply_ideal_gates(
            &psi,
            &[
                Gate::HadamardCenter,
                Gate::CnotCenterToPeripheral,
                Gate::ModCnotPeripheralToCenter,
            ],
        )
        .unwrap();
        let top = &s.blocks[0];
        let dim_j = top.sector.dim();
        for k in 0..dim_j {
            let i = top.idx(CENTER_DOWN, k);
            assert!(top.mat[(i, i)].norm() < 1e-12);
        }
        let i0 = top.idx(CENTER_UP, 0);
        let i1 = top.idx(CENTER_UP, dim_j - 1);
        assert!((top.mat[(i0, i1)].norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mod_cnot_requires_odd_n() {
        let system = SpinStarSystem::tms();
        let thermal = thermal_state(&system);
        assert!(apply_ideal_gate(&thermal, &Gate::ModCnotPeripheralToCenter).is_err());
    }

    #[test]
    fn mod_cnot_disentangles_every_line_odd_n() {
        let system = SpinStarSystem::tmp(10.8394, 11.0).unwrap();
        for ell in [-9, -3, 1, 9] {
            let psi = pseudopure_state(&system, Lopsidedness(ell)).unwrap();
            let s = apply_ideal_gates(
                &psi,
                &[
                    Gate::HadamardCenter,
                    Gate::CnotCenterToPeripheral,
                    Gate::ModCnotPeripheralToCenter,
                ],
            )
            .unwrap();
            // centre factored: every block diagonal in the centre index
            for block in &s.blocks {
                let dim_j = block.sector.dim();
                for a in 0..dim_j {
                    for b in 0..dim_j {
                        let cross = block.mat[(block.idx(CENTER_UP, a), block.idx(CENTER_DOWN, b))];
                        assert!(cross.norm() < 1e-12, "ell={ell}");
                    }
                }
            }
        }
    }

    #[test]
    fn mod_cnot_is_involution() {
        let system = SpinStarSystem::tmp(10.8394, 11.0).unwrap();
        let thermal = thermal_state(&system);
        let once = apply_ideal_gate(&thermal, &Gate::ModCnotPeripheralToCenter).unwrap();
        let twice = apply_ideal_gate(&once, &Gate::ModCnotPeripheralToCenter).unwrap();
        assert!(twice.max_abs_diff(&thermal) < 1e-12);
    }

    #[test]
    fn unitaries_preserve_trace_hermiticity_and_sector_weights() {
        let system = SpinStarSystem::tms();
        let thermal = thermal_state(&system);
        let gates = [
            Gate::HadamardCenter,
            Gate::RotPeripheral { phase: 0.3, angle: 1.1 },
            Gate::CnotCenterToPeripheral,
            Gate::ZPeripheral(0.7),
            Gate::RotCenter { phase: -1.2, angle: 0.4 },
            Gate::NotPeripheral,
            Gate::ZCenter(2.2),
        ];
        // tolerances are relative to the state scale (thermal populations are
        // O(γ_p·N/2) and the weighted sums run over 2^N basis states)
        let scale: f64 = thermal
            .blocks
            .iter()
            .map(|b| {
                b.sector.multiplicity as f64
                    * (0..b.mat.dim).map(|i| b.mat[(i, i)].norm()).sum::<f64>()
            })
            .sum();
        let before_weights = thermal.sector_weights();
        let before_trace = thermal.weighted_trace();
        let s = apply_ideal_gates(&thermal, &gates).unwrap();
        assert!((s.weighted_trace() - before_trace).norm() < 1e-12 * scale);
        assert!(s.hermiticity_defect() < 1e-12 * scale.max(1.0));
        for (a, b) in s.sector_weights().iter().zip(before_weights.iter()) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn primed_thermal_amplification_matches_gamma_ratio() {
        let system = SpinStarSystem::tms();
        let thermal = thermal_state(&system);
        let primed = apply_ideal_gate(&thermal, &Gate::CnotCenterToPeripheral).unwrap();
        let read_t = apply_ideal_gate(&thermal, &readout()).unwrap();
        let read_p = apply_ideal_gate(&primed, &readout()).unwrap();
        let pt = measure_center_peaks(&read_t, &system);
        let pp = measure_center_peaks(&read_p, &system);
        let gr = system.gamma_ratio();
        for ((ell, t), (_, p)) in pt.iter().zip(pp.iter()) {
            let expect = 1.0 + gr * ell.0 as f64;
            let got = (p / t).re;
            assert!(
                (got - expect).abs() < 1e-9 * expect.abs().max(1.0),
                "ell={} got={got} expect={expect}",
                ell.0
            );
        }
    }
}
