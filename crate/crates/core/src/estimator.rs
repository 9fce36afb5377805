//! Magnetic-field estimation from per-peak phases: inversion of the phase
//! law per multiplet line, aliasing resolution across the lopsidedness
//! ladder, and precision-weighted fusion.

use crate::error::{Error, Result};
use crate::system::{Lopsidedness, SpinStarSystem};
use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

/// Which sequence produced the phases, i.e. which phase law to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// Entangled throughout the delay: rate coefficient ℓγ_H + γ_Si and both
    /// frame offsets enter.
    Original,
    /// Sequence B (echo refocusing): coefficient ℓγ_H, centre terms removed.
    DisentangledEcho,
    /// Sequence A (disentangling CNOT): coefficient ℓγ_H plus a
    /// deterministic J phase π·t·J·|ℓ| accrued while the centre is pinned.
    DisentangledCnot,
}

/// Phase law for the calibrated peak phases of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseModel {
    pub mode: PhaseMode,
    pub delay_s: f64,
    /// Frequency offsets the estimator assumes (not necessarily the true
    /// ones; a mismatch is exactly what the disentangling sequences forgive).
    pub delta_peripheral_hz: f64,
    pub delta_center_hz: f64,
}

impl PhaseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_s > 0.0) {
            return Err(Error::Domain("phase model needs a positive delay".into()));
        }
        Ok(())
    }

    /// Deterministic offset phase (radians) to subtract before inversion.
    pub fn detrend_rad(&self, ell: Lopsidedness, system: &SpinStarSystem) -> f64 {
        let l = ell.0 as f64;
        let offsets = match self.mode {
            PhaseMode::Original => l * self.delta_peripheral_hz + self.delta_center_hz,
            PhaseMode::DisentangledEcho | PhaseMode::DisentangledCnot => {
                l * self.delta_peripheral_hz
            }
        };
        let j_correction = match self.mode {
            PhaseMode::DisentangledCnot => {
                PI * self.delay_s * system.j_coupling_hz * l.abs()
            }
            _ => 0.0,
        };
        TAU * self.delay_s * offsets + j_correction
    }
}

/// Field-to-phase-rate coefficient of one multiplet line, in Hz per Tesla:
/// ℓγ_H + γ_Si when the centre stays entangled, ℓγ_H when disentangled.
pub fn phase_rate_coefficient(
    ell: Lopsidedness,
    system: &SpinStarSystem,
    mode: PhaseMode,
) -> f64 {
    let l = ell.0 as f64;
    let mhz_per_t = match mode {
        PhaseMode::Original => l * system.gamma_peripheral_mhz_t + system.gamma_center_mhz_t,
        PhaseMode::DisentangledEcho | PhaseMode::DisentangledCnot => {
            l * system.gamma_peripheral_mhz_t
        }
    };
    mhz_per_t * 1e6
}

/// Polarisation-priming amplitude magnification A(ℓ) = 1 + γ_R·ℓ.
pub fn amplification(ell: Lopsidedness, system: &SpinStarSystem) -> f64 {
    1.0 + system.gamma_ratio() * ell.0 as f64
}

/// One calibrated peak phase entering the estimator.
#[derive(Debug, Clone, Copy)]
pub struct PeakPhase {
    pub ell: Lopsidedness,
    pub phase_rad: f64,
    /// One-sigma phase noise; zero means noiseless (clamped internally).
    pub sigma_phase_rad: f64,
}

/// Field values consistent with one peak phase: B₀(k) = (φ_detrended + 2πk)
/// / (2πt·coefficient) for every branch k that lands inside the prior.
pub fn peak_candidates(
    peak: &PeakPhase,
    model: &PhaseModel,
    system: &SpinStarSystem,
    prior_range_tesla: (f64, f64),
) -> Result<Vec<(i64, f64)>> {
    model.validate()?;
    let coeff = phase_rate_coefficient(peak.ell, system, model.mode);
    if coeff == 0.0 {
        return Ok(Vec::new());
    }
    let detrended = peak.phase_rad - model.detrend_rad(peak.ell, system);
    let denom = TAU * model.delay_s * coeff;
    let (lo, hi) = prior_range_tesla;
    // k range bracketing the prior interval
    let k_at = |b: f64| (b * denom - detrended) / TAU;
    let (ka, kb) = (k_at(lo), k_at(hi));
    let k_min = ka.min(kb).floor() as i64 - 1;
    let k_max = ka.max(kb).ceil() as i64 + 1;
    let mut out = Vec::new();
    for k in k_min..=k_max {
        let b = (detrended + TAU * k as f64) / denom;
        if b >= lo && b <= hi {
            out.push((k, b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PeakRecord {
    pub ell: i32,
    pub phase_rad: f64,
    pub branch_k: i64,
    pub b0_tesla: f64,
    pub weight: f64,
    pub sigma_tesla: f64,
}

#[derive(Debug, Clone)]
pub struct FieldEstimate {
    pub b0_tesla: f64,
    pub sigma_tesla: f64,
    pub peaks: Vec<PeakRecord>,
    pub flags: Vec<String>,
}

const SIGMA_PHASE_FLOOR: f64 = 1e-12;

/// Coarse-to-fine fusion: the lowest-|ℓ| usable peak selects a branch inside
/// the prior; each higher-|ℓ| peak selects the candidate nearest the running
/// estimate; the result is the weighted mean with w_ℓ = 1/σ_ℓ² where
/// σ_ℓ = σ_φ,ℓ / (2πt·|coefficient_ℓ|).
pub fn fuse(
    peaks: &[PeakPhase],
    model: &PhaseModel,
    system: &SpinStarSystem,
    prior_range_tesla: (f64, f64),
) -> Result<FieldEstimate> {
    model.validate()?;
    if prior_range_tesla.0 >= prior_range_tesla.1 {
        return Err(Error::Domain("prior range must be a nonempty interval".into()));
    }
    let mut flags = Vec::new();
    let mut usable: Vec<&PeakPhase> = peaks
        .iter()
        .filter(|p| phase_rate_coefficient(p.ell, system, model.mode) != 0.0)
        .collect();
    if usable.is_empty() {
        return Err(Error::Domain("no usable peaks (all coefficients zero)".into()));
    }
    usable.sort_by_key(|p| (p.ell.0.abs(), p.ell.0));

    let mut records: Vec<PeakRecord> = Vec::new();
    let mut sum_w = 0.0;
    let mut sum_wb = 0.0;
    for (i, peak) in usable.iter().enumerate() {
        let coeff = phase_rate_coefficient(peak.ell, system, model.mode);
        let denom = TAU * model.delay_s * coeff;
        let detrended = peak.phase_rad - model.detrend_rad(peak.ell, system);
        let (k, b0) = if i == 0 {
            let candidates = peak_candidates(peak, model, system, prior_range_tesla)?;
            match candidates.len() {
                0 => {
                    flags.push(format!(
                        "degraded: anchor peak ell={} has no branch inside the prior",
                        peak.ell.0
                    ));
                    // fall back to the branch nearest the prior midpoint
                    let mid = (prior_range_tesla.0 + prior_range_tesla.1) / 2.0;
                    let k = ((mid * denom - detrended) / TAU).round() as i64;
                    (k, (detrended + TAU * k as f64) / denom)
                }
                1 => candidates[0],
                _ => {
                    let mid = (prior_range_tesla.0 + prior_range_tesla.1) / 2.0;
                    let mut best = candidates[0];
                    let mut best_d = (best.1 - mid).abs();
                    let mut tie = false;
                    for c in &candidates[1..] {
                        let d = (c.1 - mid).abs();
                        if (d - best_d).abs() < 1e-15 * best_d.max(1e-30) {
                            tie = true;
                            if c.0.abs() < best.0.abs() {
                                best = *c;
                            }
                        } else if d < best_d {
                            best = *c;
                            best_d = d;
                            tie = false;
                        }
                    }
                    if tie {
                        flags.push(format!(
                            "tie: anchor ell={} branches equally near; chose smaller |k|",
                            peak.ell.0
                        ));
                    } else {
                        flags.push(format!(
                            "ambiguous anchor ell={}: {} branches in prior",
                            peak.ell.0,
                            candidates.len()
                        ));
                    }
                    best
                }
            }
        } else {
            let running = sum_wb / sum_w;
            let k_exact = (running * denom - detrended) / TAU;
            let k = k_exact.round() as i64;
            if (k_exact - k_exact.floor() - 0.5).abs() < 1e-9 {
                let k_alt = k_exact.floor() as i64;
                let chosen = if k_alt.abs() < k.abs() { k_alt } else { k };
                flags.push(format!(
                    "tie: ell={} branches equally near; chose smaller |k|",
                    peak.ell.0
                ));
                (chosen, (detrended + TAU * chosen as f64) / denom)
            } else {
                (k, (detrended + TAU * k as f64) / denom)
            }
        };
        let sigma_phase = peak.sigma_phase_rad.max(SIGMA_PHASE_FLOOR);
        let sigma_b = sigma_phase / (TAU * model.delay_s * coeff.abs());
        let w = 1.0 / (sigma_b * sigma_b);
        sum_w += w;
        sum_wb += w * b0;
        records.push(PeakRecord {
            ell: peak.ell.0,
            phase_rad: peak.phase_rad,
            branch_k: k,
            b0_tesla: b0,
            weight: w,
            sigma_tesla: sigma_b,
        });
    }
    let b0 = sum_wb / sum_w;
    let sigma = 1.0 / sum_w.sqrt();
    for r in &records {
        if (r.b0_tesla - b0).abs() > 3.0 * r.sigma_tesla.max(sigma) && records.len() > 1 {
            flags.push(format!(
                "degraded: peak ell={} deviates {}σ from the fused value",
                r.ell,
                ((r.b0_tesla - b0).abs() / r.sigma_tesla.max(sigma)).round()
            ));
        }
    }
    records.sort_by_key(|r| r.ell);
    Ok(FieldEstimate { b0_tesla: b0, sigma_tesla: sigma, peaks: records, flags })
}

/// Per-line sensitivity ratios against a single centre spin and a single
/// peripheral spin, plus the √N / N scaling comparison.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub rows: Vec<(i32, f64, f64)>,
    pub sqrt_n: f64,
    pub heisenberg_n: f64,
}

pub fn sensitivity_report(system: &SpinStarSystem, mode: PhaseMode) -> SensitivityReport {
    let rows = system
        .lopsidedness_values()
        .into_iter()
        .map(|ell| {
            let coeff = phase_rate_coefficient(ell, system, mode);
            (
                ell.0,
                (coeff / (system.gamma_center_mhz_t * 1e6)).abs(),
                (coeff / (system.gamma_peripheral_mhz_t * 1e6)).abs(),
            )
        })
        .collect();
    SensitivityReport {
        rows,
        sqrt_n: (system.n_peripheral as f64).sqrt(),
        heisenberg_n: system.n_peripheral as f64,
    }
}
