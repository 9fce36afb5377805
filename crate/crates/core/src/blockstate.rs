//! Symmetry-reduced density matrix for the spin star.
//!
//! The peripheral spins only ever see collective drives and a uniform
//! coupling to the centre, so the dynamics never mix irreducible sectors.
//! The state is held as one complex block per [`DickeSector`], of dimension
//! 2(2J+1) in the basis |m_c⟩ ⊗ |J, m_J⟩, plus the sector multiplicity as a
//! statistical weight. Deviation-matrix convention throughout: the identity
//! part of the thermal state is dropped and blocks need not be positive.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::system::{
    dicke_decomposition, lopsidedness_multiplicity, DickeSector, Lopsidedness, SpinStarSystem,
};

/// Index of the centre-spin level: 0 ↔ m_c = +1/2 (|0⟩), 1 ↔ m_c = −1/2.
pub const CENTER_UP: usize = 0;
pub const CENTER_DOWN: usize = 1;

#[derive(Debug, Clone)]
pub struct SectorBlock {
    pub sector: DickeSector,
    pub mat: CMat,
}

impl SectorBlock {
    pub fn empty(sector: DickeSector) -> Self {
        let dim = 2 * sector.dim();
        Self { sector, mat: CMat::zeros(dim) }
    }

    /// Row/column index of |m_c index c⟩ ⊗ |J, m_J = J − k⟩.
    pub fn idx(&self, c: usize, k: usize) -> usize {
        c * self.sector.dim() + k
    }

    /// m_J value for ladder position k (k = 0 is m_J = J, descending).
    pub fn m_j(&self, k: usize) -> f64 {
        self.sector.j() - k as f64
    }

    /// m_c value for centre index c.
    pub fn m_c(c: usize) -> f64 {
        if c == CENTER_UP {
            0.5
        } else {
            -0.5
        }
    }

    /// Ladder position of m_J = ell/2 if it exists in this sector.
    pub fn k_of_ell(&self, ell: i32) -> Option<usize> {
        let two_m = ell; // m_J = ell/2 so 2m_J = ell
        if two_m.unsigned_abs() > self.sector.two_j || (two_m - self.sector.two_j as i32) % 2 != 0 {
            return None;
        }
        Some(((self.sector.two_j as i32 - two_m) / 2) as usize)
    }
}

/// The full symmetry-reduced state: one block per sector.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub n_peripheral: u32,
    pub blocks: Vec<SectorBlock>,
}

impl BlockState {
    pub fn zero(n: u32) -> Self {
        let blocks = dicke_decomposition(n).into_iter().map(SectorBlock::empty).collect();
        Self { n_peripheral: n, blocks }
    }

    /// Multiplicity-weighted trace over all sectors.
    pub fn weighted_trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.mat.trace() * b.sector.multiplicity as f64).sum()
    }

    /// Worst Hermiticity defect across blocks.
    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks.iter().map(|b| b.mat.hermiticity_defect()).fold(0.0, f64::max)
    }

    /// Multiplicity-weighted trace per sector; conserved by every collective
    /// operation.
    pub fn sector_weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| (b.mat.trace() * b.sector.multiplicity as f64).re).collect()
    }

    pub fn max_abs_diff(&self, other: &BlockState) -> f64 {
        self.blocks
            .iter()
            .zip(other.blocks.iter())
            .map(|(a, b)| a.mat.max_abs_diff(&b.mat))
            .fold(0.0, f64::max)
    }
}

/// High-temperature thermal deviation state: diagonal populations
/// γ_c·m_c + γ_p·m_J per basis state (MHz/T units), traceless overall.
pub fn thermal_state(system: &SpinStarSystem) -> BlockState {
    let mut state = BlockState::zero(system.n_peripheral);
    let gc = system.gamma_center_mhz_t;
    let gp = system.gamma_peripheral_mhz_t;
    for block in state.blocks.iter_mut() {
        let dim_j = block.sector.dim();
        for c in 0..2 {
            for k in 0..dim_j {
                let pop = gc * SectorBlock::m_c(c) + gp * block.m_j(k);
                let i = block.idx(c, k);
                block.mat[(i, i)] = C64::new(pop, 0.0);
            }
        }
    }
    state
}

/// Pseudopure state for multiplet line ℓ: support only on m_c = +1/2,
/// m_J = ℓ/2, spread over the sectors that contain that m_J in proportion to
/// their multiplicity; normalised to weighted trace 1. For ℓ = ±N this is a
/// single pure product state.
pub fn pseudopure_state(system: &SpinStarSystem, ell: Lopsidedness) -> Result<BlockState> {
    let n = system.n_peripheral;
    let ell = Lopsidedness::checked(n, ell.0)?;
    let total = lopsidedness_multiplicity(n, ell)? as f64;
    if total <= 0.0 {
        return Err(Error::BadLopsidedness { n, ell: ell.0 });
    }
    let mut state = BlockState::zero(n);
    for block in state.blocks.iter_mut() {
        if let Some(k) = block.k_of_ell(ell.0) {
            let i = block.idx(CENTER_UP, k);
            block.mat[(i, i)] = C64::new(1.0 / total, 0.0);
        }
    }
    Ok(state)
}

/// Sum the multiplicity-weighted centre-spin single-quantum coherences
/// ⟨m_c=+1/2, m_J=ℓ/2| ρ |m_c=−1/2, m_J=ℓ/2⟩ per multiplet line; returns one
/// complex amplitude per line, ℓ ascending.
pub fn measure_center_peaks(
    state: &BlockState,
    system: &SpinStarSystem,
) -> Vec<(Lopsidedness, C64)> {
    system
        .lopsidedness_values()
        .into_iter()
        .map(|ell| {
            let mut amp = C64::new(0.0, 0.0);
            for block in &state.blocks {
                if let Some(k) = block.k_of_ell(ell.0) {
                    let i = block.idx(CENTER_UP, k);
                    let j = block.idx(CENTER_DOWN, k);
                    amp += block.mat[(i, j)] * block.sector.multiplicity as f64;
                }
            }
            (ell, amp)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{apply_ideal_gate, Gate};

    #[test]
    fn thermal_deviation_is_traceless() {
        let state = thermal_state(&SpinStarSystem::tms());
        assert!(state.weighted_trace().norm() < 1e-9);
        assert!(state.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn thermal_readout_is_binomial() {
        let system = SpinStarSystem::tms();
        let state = thermal_state(&system);
        let read = apply_ideal_gate(&state, &Gate::RotCenter { phase: -std::f64::consts::FRAC_PI_2, angle: std::f64::consts::FRAC_PI_2 }).unwrap();
        let peaks = measure_center_peaks(&read, &system);
        let center = peaks.iter().find(|(l, _)| l.0 == 0).unwrap().1;
        let outer = peaks.iter().find(|(l, _)| l.0 == 12).unwrap().1;
        // all real and positive, binomially distributed
        for (ell, amp) in &peaks {
            assert!(amp.im.abs() < 1e-12, "ell={}", ell.0);
            assert!(amp.re > 0.0, "ell={}", ell.0);
        }
        let ratio = center.re / outer.re;
        assert!((ratio - 924.0).abs() < 1e-6, "ratio={ratio}");
    }

    #[test]
    fn single_proton_peaks_equal() {
        let mut system = SpinStarSystem::tms();
        system.n_peripheral = 1;
        let state = thermal_state(&system);
        let read = apply_ideal_gate(&state, &Gate::RotCenter { phase: -std::f64::consts::FRAC_PI_2, angle: std::f64::consts::FRAC_PI_2 }).unwrap();
        let peaks = measure_center_peaks(&read, &system);
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0].1 - peaks[1].1).norm() < 1e-12);
    }

    #[test]
    fn pseudopure_outermost_is_pure_top_sector() {
        let system = SpinStarSystem::tms();
        let state = pseudopure_state(&system, Lopsidedness(12)).unwrap();
        assert!((state.weighted_trace().re - 1.0).abs() < 1e-12);
        // only the J=6 sector is populated, single element
        for block in &state.blocks {
            let occ: f64 = (0..block.mat.dim).map(|i| block.mat[(i, i)].re).sum();
            if block.sector.two_j == 12 {
                assert!((occ - 1.0).abs() < 1e-12);
                assert!((block.mat[(0, 0)].re - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(occ, 0.0);
            }
        }
    }

    #[test]
    fn pseudopure_center_line_spreads_by_multiplicity() {
        let system = SpinStarSystem::tms();
        let state = pseudopure_state(&system, Lopsidedness(0)).unwrap();
        // weight on each (J, m_J=0) sector should be d_J / 924
        for block in &state.blocks {
            let k = block.k_of_ell(0).unwrap();
            let i = block.idx(CENTER_UP, k);
            let w = block.mat[(i, i)].re * block.sector.multiplicity as f64;
            let expect = block.sector.multiplicity as f64 / 924.0;
            assert!((w - expect).abs() < 1e-12);
        }
        assert!((state.weighted_trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pseudopure_rejects_invalid_ell() {
        let system = SpinStarSystem::tms();
        assert!(pseudopure_state(&system, Lopsidedness(13)).is_err());
        assert!(pseudopure_state(&system, Lopsidedness(11)).is_err());
    }

    #[test]
    fn measure_of_zero_state_is_all_zero() {
        let system = SpinStarSystem::tms();
        let peaks = measure_center_peaks(&BlockState::zero(12), &system);
        assert_eq!(peaks.len(), 13);
        assert!(peaks.iter().all(|(_, a)| a.norm() == 0.0));
    }
}
