//! Free evolution, finite-duration RF pulses, composite pulses and
//! relaxation on the block representation.
//!
//! Sign conventions: the phase of element (a, b) advances by +2π·t·(E_a − E_b)
//! with E/h in Hz, and RF rotations are right-handed (exp(−iβ·n̂·A)); the
//! pulse propagator is therefore exp(+i2πτ·(H_diag − ν·G)) per block.

use num_complex::Complex64 as C64;

use crate::blockstate::{BlockState, SectorBlock};
use crate::error::{Error, Result};
use crate::gates::ops;
use crate::linalg::{exp_i_hermitian, CMat};
use crate::system::SpinStarSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Center,
    Peripheral,
}

/// Field and frame context for evolution: B₀ offset from the nominal field
/// plus the rotating-frame frequency offsets of the two species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionParams {
    pub b0_tesla: f64,
    pub delta_peripheral_hz: f64,
    pub delta_center_hz: f64,
    pub duration_s: f64,
}

impl EvolutionParams {
    pub fn offsets(b0_tesla: f64, delta_peripheral_hz: f64, delta_center_hz: f64) -> Self {
        Self { b0_tesla, delta_peripheral_hz, delta_center_hz, duration_s: 0.0 }
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s;
        self
    }

    /// Effective centre offset in Hz including the field term.
    pub fn delta_center_eff(&self, system: &SpinStarSystem) -> f64 {
        self.delta_center_hz + system.gamma_center_mhz_t * 1e6 * self.b0_tesla
    }

    pub fn delta_peripheral_eff(&self, system: &SpinStarSystem) -> f64 {
        self.delta_peripheral_hz + system.gamma_peripheral_mhz_t * 1e6 * self.b0_tesla
    }
}

/// Basis-state energy E(m_c, m_J)/h in Hz.
fn energy(dc_eff: f64, dp_eff: f64, j_hz: f64, m_c: f64, m_j: f64) -> f64 {
    dc_eff * m_c + dp_eff * m_j + j_hz * m_c * m_j
}

/// Diagonal phase evolution: element ((m_c,m_J),(m_c′,m_J′)) advances by
/// 2π·t·[(δ_c+γ_cB₀)(m_c−m_c′) + (δ_p+γ_pB₀)(m_J−m_J′) + J(m_c·m_J − m_c′·m_J′)].
pub fn free_evolve(
    state: &BlockState,
    params: &EvolutionParams,
    system: &SpinStarSystem,
) -> Result<BlockState> {
    if params.duration_s < 0.0 {
        return Err(Error::Domain("evolution duration must be >= 0".into()));
    }
    let dc = params.delta_center_eff(system);
    let dp = params.delta_peripheral_eff(system);
    let j = system.j_coupling_hz;
    let t = params.duration_s;
    let mut out = state.clone();
    for block in out.blocks.iter_mut() {
        let dim_j = block.sector.dim();
        let energies: Vec<f64> = (0..2 * dim_j)
            .map(|i| {
                let c = i / dim_j;
                let k = i % dim_j;
                energy(dc, dp, j, SectorBlock::m_c(c), block.m_j(k))
            })
            .collect();
        for a in 0..2 * dim_j {
            for b in 0..2 * dim_j {
                if a == b {
                    continue;
                }
                let phase = 2.0 * std::f64::consts::PI * t * (energies[a] - energies[b]);
                block.mat[(a, b)] *= C64::from_polar(1.0, phase);
            }
        }
    }
    Ok(out)
}

/// One RF drive term: species, nutation frequency, phase, and an optional
/// extra carrier detuning applied to the addressed species for the pulse
/// duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub species: Species,
    pub nutation_hz: f64,
    pub rf_phase_rad: f64,
    pub carrier_offset_hz: f64,
}

impl Drive {
    pub fn new(species: Species, nutation_hz: f64, rf_phase_rad: f64) -> Self {
        Self { species, nutation_hz, rf_phase_rad, carrier_offset_hz: 0.0 }
    }
}

/// Evolve under the full block Hamiltonian (offsets + J + rotating-frame RF
/// terms) for the given duration, by eigendecomposition per block.
pub fn finite_pulse_simultaneous(
    state: &BlockState,
    drives: &[Drive],
    duration_s: f64,
    params: &EvolutionParams,
    system: &SpinStarSystem,
) -> Result<BlockState> {
    if duration_s < 0.0 {
        return Err(Error::Domain("pulse duration must be >= 0".into()));
    }
    for d in drives {
        if !(d.nutation_hz > 0.0) {
            return Err(Error::Domain("nutation frequency must be > 0".into()));
        }
    }
    let mut dc = params.delta_center_eff(system);
    let mut dp = params.delta_peripheral_eff(system);
    for d in drives {
        match d.species {
            Species::Center => dc -= d.carrier_offset_hz,
            Species::Peripheral => dp -= d.carrier_offset_hz,
        }
    }
    let j = system.j_coupling_hz;
    let mut out = state.clone();
    for block in out.blocks.iter_mut() {
        let dim_j = block.sector.dim();
        let dim = 2 * dim_j;
        // Diagonal part.
        let mut h = CMat::zeros(dim);
        for i in 0..dim {
            let c = i / dim_j;
            let k = i % dim_j;
            h[(i, i)] = C64::new(energy(dc, dp, j, SectorBlock::m_c(c), block.m_j(k)), 0.0);
        }
        // RF terms.
        for d in drives {
            let term = match d.species {
                Species::Center => ops::center(ops::equatorial2(d.rf_phase_rad), dim_j),
                Species::Peripheral => {
                    let (jx, jy) = ops::jx_jy(block.sector.two_j);
                    let eq = jx
                        .scale(C64::new(d.rf_phase_rad.cos(), 0.0))
                        .add(&jy.scale(C64::new(d.rf_phase_rad.sin(), 0.0)));
                    ops::peripheral(&eq, dim_j)
                }
            };
            h = h.add(&term.scale(C64::new(-d.nutation_hz, 0.0)));
        }
        let u = exp_i_hermitian(&h, 2.0 * std::f64::consts::PI * duration_s);
        block.mat = block.mat.conjugate_by(&u);
    }
    Ok(out)
}

/// Single-species finite pulse.
#[allow(clippy::too_many_arguments)]
pub fn finite_pulse(
    state: &BlockState,
    species: Species,
    nutation_hz: f64,
    duration_s: f64,
    rf_phase_rad: f64,
    carrier_offset_hz: f64,
    params: &EvolutionParams,
    system: &SpinStarSystem,
) -> Result<BlockState> {
    finite_pulse_simultaneous(
        state,
        &[Drive { species, nutation_hz, rf_phase_rad, carrier_offset_hz }],
        duration_s,
        params,
        system,
    )
}

/// BB1 composite rotation: the correction triple π_{φ+φ₁} · 2π_{φ+3φ₁} ·
/// π_{φ+φ₁} followed by the target pulse θ_φ, with φ₁ = arccos(−θ/4π).
/// `amplitude_error` is the fractional miscalibration ε of the RF field; the
/// residual rotation error is O(ε³).
#[allow(clippy::too_many_arguments)]
pub fn bb1_pulse(
    state: &BlockState,
    species: Species,
    target_angle_rad: f64,
    rf_phase_rad: f64,
    nutation_hz: f64,
    amplitude_error: f64,
    params: &EvolutionParams,
    system: &SpinStarSystem,
) -> Result<BlockState> {
    if !(target_angle_rad > 0.0 && target_angle_rad <= 2.0 * std::f64::consts::PI + 1e-12) {
        return Err(Error::Domain("BB1 target angle must be in (0, 2π]".into()));
    }
    let phi1 = bb1_phi1(target_angle_rad);
    let actual = nutation_hz * (1.0 + amplitude_error);
    let seg = |angle: f64, phase: f64| -> (Drive, f64) {
        // Durations are set by the nominal calibration; the actual field is
        // miscalibrated by ε.
        let duration = angle / (2.0 * std::f64::consts::PI * nutation_hz);
        (Drive::new(species, actual, phase), duration)
    };
    let pi = std::f64::consts::PI;
    let segments = [
        seg(pi, rf_phase_rad + phi1),
        seg(2.0 * pi, rf_phase_rad + 3.0 * phi1),
        seg(pi, rf_phase_rad + phi1),
        seg(target_angle_rad, rf_phase_rad),
    ];
    let mut s = state.clone();
    for (drive, duration) in segments {
        s = finite_pulse_simultaneous(&s, &[drive], duration, params, system)?;
    }
    Ok(s)
}

/// BB1 correction phase φ₁ = arccos(−θ / 4π).
pub fn bb1_phi1(target_angle_rad: f64) -> f64 {
    (-target_angle_rad / (4.0 * std::f64::consts::PI)).acos()
}

/// Coherence-order damping and T1 recovery model.
///
/// Off-diagonal elements with coherence orders (Δm_c, Δm_J) damp at
/// |Δm_c|·rate_center + |Δm_J|^α·rate_peripheral; diagonals relax toward the
/// thermal state with the two T1 rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationModel {
    pub rate_center: f64,
    pub rate_peripheral: f64,
    pub order_exponent: f64,
    pub t1_rate_center: f64,
    pub t1_rate_peripheral: f64,
}

impl RelaxationModel {
    /// Defaults calibrated from the measured coherence times: the peripheral
    /// rate from the single-spin T2*, and α from the ratio of single-spin to
    /// N-spin cat-state T2* so that the cat coherence decays at the measured
    /// rate when attributed entirely to the peripheral channel.
    pub fn from_system(system: &SpinStarSystem) -> Self {
        let n = system.n_peripheral as f64;
        let alpha = if system.n_peripheral > 1 {
            (system.t2star_peripheral_s / system.t2star_noon_s).ln() / n.ln()
        } else {
            1.0
        };
        Self {
            rate_center: 1.0 / system.t2_center_s,
            rate_peripheral: 1.0 / system.t2star_peripheral_s,
            order_exponent: alpha,
            t1_rate_center: 1.0 / system.t1_center_s,
            t1_rate_peripheral: 1.0 / system.t1_peripheral_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rate_center", self.rate_center),
            ("rate_peripheral", self.rate_peripheral),
            ("t1_rate_center", self.t1_rate_center),
            ("t1_rate_peripheral", self.t1_rate_peripheral),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.order_exponent) {
            return Err(Error::Config("order_exponent must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Transverse damping rate for a coherence of the given orders.
    pub fn coherence_rate(&self, delta_m_c: f64, delta_m_j: f64) -> f64 {
        let dmj = delta_m_j.abs();
        let peripheral = if dmj > 0.0 { dmj.powf(self.order_exponent) * self.rate_peripheral } else { 0.0 };
        delta_m_c.abs() * self.rate_center + peripheral
    }
}

/// Apply relaxation for a duration: coherence-order damping off the diagonal
/// and exponential recovery toward the thermal state on the diagonal.
pub fn relax(
    state: &BlockState,
    duration_s: f64,
    model: &RelaxationModel,
    system: &SpinStarSystem,
) -> Result<BlockState> {
    if duration_s < 0.0 {
        return Err(Error::Domain("relaxation duration must be >= 0".into()));
    }
    model.validate()?;
    let thermal = crate::blockstate::thermal_state(system);
    let decay_c = (-duration_s * model.t1_rate_center).exp();
    let decay_p = (-duration_s * model.t1_rate_peripheral).exp();
    let mut out = state.clone();
    for (block, tblock) in out.blocks.iter_mut().zip(thermal.blocks.iter()) {
        let dim_j = block.sector.dim();
        // Off-diagonal damping.
        for a in 0..2 * dim_j {
            for b in 0..2 * dim_j {
                if a == b {
                    continue;
                }
                let (ca, ka) = (a / dim_j, a % dim_j);
                let (cb, kb) = (b / dim_j, b % dim_j);
                let dmc = SectorBlock::m_c(ca) - SectorBlock::m_c(cb);
                let dmj = block.m_j(ka) - block.m_j(kb);
                let rate = model.coherence_rate(dmc, dmj);
                block.mat[(a, b)] *= (-duration_s * rate).exp();
            }
        }
        // Diagonal recovery toward thermal, split into the centre-polarisation
        // part (T1 of the centre) and the rest (peripheral T1).
        for k in 0..dim_j {
            let iu = block.idx(0, k);
            let id = block.idx(1, k);
            let du = block.mat[(iu, iu)] - tblock.mat[(iu, iu)];
            let dd = block.mat[(id, id)] - tblock.mat[(id, id)];
            let odd = (du - dd) / 2.0;
            let even = (du + dd) / 2.0;
            block.mat[(iu, iu)] = tblock.mat[(iu, iu)] + odd * decay_c + even * decay_p;
            block.mat[(id, id)] = tblock.mat[(id, id)] - odd * decay_c + even * decay_p;
        }
    }
    Ok(out)
}
