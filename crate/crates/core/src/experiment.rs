//! End-to-end experiment chains: state preparation, sequence execution,
//! readout, detection, reference phasing, and field estimation. This is the
//! layer the batch runner and the acceptance suite drive.

use num_complex::Complex64 as C64;

use crate::blockstate::{measure_center_peaks, pseudopure_state, thermal_state, BlockState};
use crate::compiler::{
    build_sequence, compile_with_readout, execute_ir, ideal_readout, SequenceKind,
};
use crate::error::{Error, Result};
use crate::estimator::{fuse, FieldEstimate, PeakPhase, PhaseMode, PhaseModel};
use crate::evolve::{EvolutionParams, RelaxationModel};
use crate::program::{execute_program, ExecMode, ExecOptions, PulseShape};
use crate::spectro::{
    calibrate_and_apply_phase, combine_phase_cycle, extract_peaks, process, synthesize_fid,
    Corruption, Fid, PeakMeasurement, Spectrum,
};
use crate::system::{Lopsidedness, SpinStarSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseModel {
    /// Ideal gate-level execution of the sequence.
    Ideal,
    /// Compiled program with hard rectangular pulses.
    Hard,
    /// Compiled program with BB1 composite pulses.
    Bb1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Thermal,
    Pseudopure(i32),
}

/// Everything needed to simulate one experiment up to the detected peak
/// amplitudes.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub system: SpinStarSystem,
    pub initial: InitialState,
    /// None runs prepare → readout only (a plain spectrum).
    pub sequence: Option<SequenceKind>,
    pub priming: bool,
    pub pulses: PulseModel,
    pub delay_s: f64,
    pub b0_tesla: f64,
    pub delta_peripheral_hz: f64,
    pub delta_center_hz: f64,
    /// Relaxation model applied over delay windows when set.
    pub relax_during_delays: Option<RelaxationModel>,
    /// Fractional RF miscalibration for compiled pulses.
    pub amplitude_error: f64,
}

impl ExperimentSpec {
    pub fn new(system: SpinStarSystem) -> Self {
        Self {
            system,
            initial: InitialState::Thermal,
            sequence: None,
            priming: false,
            pulses: PulseModel::Ideal,
            delay_s: 0.0,
            b0_tesla: 0.0,
            delta_peripheral_hz: 0.0,
            delta_center_hz: 0.0,
            relax_during_delays: None,
            amplitude_error: 0.0,
        }
    }

    fn params(&self) -> EvolutionParams {
        EvolutionParams::offsets(self.b0_tesla, self.delta_peripheral_hz, self.delta_center_hz)
    }

    fn prepare(&self) -> Result<BlockState> {
        match self.initial {
            InitialState::Thermal => Ok(thermal_state(&self.system)),
            InitialState::Pseudopure(ell) => {
                pseudopure_state(&self.system, Lopsidedness(ell))
            }
        }
    }
}

/// Run prepare → sequence → readout → measure and return the detected
/// per-line complex amplitudes.
pub fn simulate_peaks(spec: &ExperimentSpec) -> Result<Vec<(Lopsidedness, C64)>> {
    let state = spec.prepare()?;
    let params = spec.params();
    let read = match spec.pulses {
        PulseModel::Ideal => {
            let mut s = state;
            if spec.priming || spec.sequence.is_some() {
                let kind = spec.sequence.unwrap_or(SequenceKind::Original);
                let ir = if spec.sequence.is_some() {
                    build_sequence(kind, spec.priming, spec.delay_s, &spec.system)?
                } else {
                    // priming alone: just the polarisation-transfer prefix
                    build_sequence(SequenceKind::Original, true, 0.0, &spec.system)?
                        .into_iter()
                        .take(1)
                        .collect()
                };
                s = execute_ir(&s, &ir, &params, &spec.system, spec.relax_during_delays.as_ref())?;
            }
            ideal_readout(&s)?
        }
        PulseModel::Hard | PulseModel::Bb1 => {
            let shape =
                if spec.pulses == PulseModel::Bb1 { PulseShape::Bb1 } else { PulseShape::Hard };
            let ir = match (spec.sequence, spec.priming) {
                (Some(kind), priming) => {
                    build_sequence(kind, priming, spec.delay_s, &spec.system)?
                }
                (None, true) => build_sequence(SequenceKind::Original, true, 0.0, &spec.system)?
                    .into_iter()
                    .take(1)
                    .collect(),
                (None, false) => Vec::new(),
            };
            let program = compile_with_readout(&ir, &spec.system, shape)?;
            let opts = ExecOptions {
                mode: ExecMode::Finite { amplitude_error: spec.amplitude_error },
                relax_during_delays: spec.relax_during_delays,
                relax_during_pulses: false,
            };
            execute_program(&state, &program, &params, &spec.system, &opts)?
        }
    };
    Ok(measure_center_peaks(&read, &spec.system))
}

/// Acquisition geometry for detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionSpec {
    pub dwell_s: f64,
    pub n_samples: usize,
    pub zero_fill: usize,
    /// Receiver-frame position of the multiplet centre.
    pub detection_center_hz: f64,
    /// Run the 4-step receiver phase cycle.
    pub phase_cycle: bool,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        Self {
            dwell_s: 0.004,
            n_samples: 2048,
            zero_fill: 16384,
            detection_center_hz: 0.0,
            phase_cycle: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectionOutput {
    pub fid: Fid,
    pub spectrum: Spectrum,
    pub peaks: Vec<PeakMeasurement>,
}

/// Synthesize, process and extract one acquisition from simulated peak
/// amplitudes. Stepping every pulse phase by χ rotates the detected
/// amplitudes by e^{−iχ}, so the phase cycle is synthesized from the rotated
/// amplitudes with per-step derived seeds.
pub fn detect(
    peak_amps: &[(Lopsidedness, C64)],
    system: &SpinStarSystem,
    model: &RelaxationModel,
    acq: &AcquisitionSpec,
    corruption: &Corruption,
    seed: u64,
) -> Result<DetectionOutput> {
    let fid = if acq.phase_cycle {
        let steps = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, 1.5 * std::f64::consts::PI];
        let mut fids = Vec::with_capacity(4);
        for (r, chi) in steps.iter().enumerate() {
            let rotated: Vec<(Lopsidedness, C64)> = peak_amps
                .iter()
                .map(|(l, a)| (*l, a * C64::from_polar(1.0, -chi)))
                .collect();
            fids.push(synthesize_fid(
                &rotated,
                system,
                model,
                acq.detection_center_hz,
                acq.dwell_s,
                acq.n_samples,
                corruption,
                derive_seed(seed, r as u64),
            )?);
        }
        combine_phase_cycle(&fids, &steps)?
    } else {
        synthesize_fid(
            peak_amps,
            system,
            model,
            acq.detection_center_hz,
            acq.dwell_s,
            acq.n_samples,
            corruption,
            seed,
        )?
    };
    let spectrum = process(&fid, acq.zero_fill)?;
    let peaks = extract_peaks(&spectrum, system, model, acq.detection_center_hz)?;
    Ok(DetectionOutput { fid, spectrum, peaks })
}

/// Derive a per-run stream seed from a master seed and an index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 step
    let mut z = master ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Estimator-side configuration for a field experiment.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorSpec {
    /// Offsets the estimator assumes; None means "use the true configured
    /// values" (the honest default).
    pub assume_delta_peripheral_hz: Option<f64>,
    pub assume_delta_center_hz: Option<f64>,
    pub prior_range_tesla: (f64, f64),
    /// Reference peaks below this fraction of the strongest line are
    /// excluded from estimation.
    pub min_reference_amp_fraction: f64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            assume_delta_peripheral_hz: None,
            assume_delta_center_hz: None,
            prior_range_tesla: (-1e-7, 1e-7),
            min_reference_amp_fraction: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldExperimentOutput {
    pub reference: DetectionOutput,
    pub target: DetectionOutput,
    /// Target peaks after reference phasing.
    pub calibrated: Vec<PeakMeasurement>,
    pub uncalibrated_lines: Vec<Lopsidedness>,
    pub estimate: FieldEstimate,
    pub model: PhaseModel,
}

pub fn phase_mode_for(kind: SequenceKind) -> PhaseMode {
    match kind {
        SequenceKind::Original => PhaseMode::Original,
        SequenceKind::DisentangleCnot => PhaseMode::DisentangledCnot,
        SequenceKind::DisentangleEcho => PhaseMode::DisentangledEcho,
    }
}

/// Full field-measurement chain: target run plus zero-delay reference,
/// reference phasing, and fused estimation.
pub fn run_field_experiment(
    spec: &ExperimentSpec,
    acq: &AcquisitionSpec,
    corruption: &Corruption,
    estimator: &EstimatorSpec,
    seed: u64,
) -> Result<FieldExperimentOutput> {
    let kind = spec
        .sequence
        .ok_or_else(|| Error::Config("field experiment needs a sequence".into()))?;
    if !(spec.delay_s > 0.0) {
        return Err(Error::Config("field experiment needs a positive delay".into()));
    }
    let model_relax = spec
        .relax_during_delays
        .unwrap_or_else(|| RelaxationModel::from_system(&spec.system));

    let reference_spec = ExperimentSpec { delay_s: 0.0, ..spec.clone() };
    let ref_amps = simulate_peaks(&reference_spec)?;
    let reference =
        detect(&ref_amps, &spec.system, &model_relax, acq, corruption, derive_seed(seed, 0x5ef))?;

    let target_amps = simulate_peaks(spec)?;
    let target =
        detect(&target_amps, &spec.system, &model_relax, acq, corruption, derive_seed(seed, 0x7a9))?;

    let mut targets = vec![target.peaks.clone()];
    let uncalibrated = calibrate_and_apply_phase(
        &reference.peaks,
        &mut targets,
        estimator.min_reference_amp_fraction,
    );
    let calibrated = targets.into_iter().next().unwrap();

    let model = PhaseModel {
        mode: phase_mode_for(kind),
        delay_s: spec.delay_s,
        delta_peripheral_hz: estimator
            .assume_delta_peripheral_hz
            .unwrap_or(spec.delta_peripheral_hz),
        delta_center_hz: estimator.assume_delta_center_hz.unwrap_or(spec.delta_center_hz),
    };
    let phases: Vec<PeakPhase> = calibrated
        .iter()
        .filter(|p| !uncalibrated.contains(&p.ell))
        .map(|p| PeakPhase {
            ell: p.ell,
            phase_rad: p.phase_rad,
            sigma_phase_rad: p.sigma_phase_rad,
        })
        .collect();
    let estimate = fuse(&phases, &model, &spec.system, estimator.prior_range_tesla)?;
    Ok(FieldExperimentOutput {
        reference,
        target,
        calibrated,
        uncalibrated_lines: uncalibrated,
        estimate,
        model,
    })
}
