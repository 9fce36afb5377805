//! Timed pulse programs and their execution on the block engine.
//!
//! A program is an ordered list of pulse / delay / frame-shift primitives.
//! Execution supports two models: `Instant` treats every pulse as an ideal
//! rotation (durations keep their scheduled value but evolve nothing), and
//! `Finite` integrates the full block Hamiltonian over each pulse.

use crate::blockstate::BlockState;
use crate::error::{Error, Result};
use crate::evolve::{
    bb1_pulse, finite_pulse_simultaneous, free_evolve, relax, Drive, EvolutionParams,
    RelaxationModel, Species,
};
use crate::gates::{apply_ideal_gate, Gate};
use crate::system::SpinStarSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseSpecies {
    Center,
    Peripheral,
    /// Simultaneous equal-duration drive of both channels (amplitudes
    /// rescaled so each reaches the same flip angle in the shared window).
    Both,
}

impl PulseSpecies {
    pub fn label(&self) -> &'static str {
        match self {
            PulseSpecies::Center => "center",
            PulseSpecies::Peripheral => "peripheral",
            PulseSpecies::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    Hard,
    Bb1,
}

impl PulseShape {
    pub fn label(&self) -> &'static str {
        match self {
            PulseShape::Hard => "hard",
            PulseShape::Bb1 => "bb1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Pulse {
        species: PulseSpecies,
        flip_angle_rad: f64,
        rf_phase_rad: f64,
        duration_s: f64,
        shape: PulseShape,
    },
    Delay {
        duration_s: f64,
    },
    /// Residual virtual-Z frame, appended as trailing metadata.
    FrameShift {
        species: Species,
        angle_rad: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseProgram {
    pub primitives: Vec<Primitive>,
    /// Index of the first primitive of the readout excitation, when present.
    pub readout_start: Option<usize>,
}

impl PulseProgram {
    pub fn total_duration(&self) -> f64 {
        self.primitives
            .iter()
            .map(|p| match p {
                Primitive::Pulse { duration_s, .. } => *duration_s,
                Primitive::Delay { duration_s } => *duration_s,
                Primitive::FrameShift { .. } => 0.0,
            })
            .sum()
    }

    pub fn pulse_count(&self) -> usize {
        self.primitives.iter().filter(|p| matches!(p, Primitive::Pulse { .. })).count()
    }

    /// Shift the RF phase of every pulse by the same angle (a global frame
    /// step, as used by receiver phase cycling).
    pub fn with_global_phase_step(&self, step_rad: f64) -> PulseProgram {
        let mut out = self.clone();
        for p in out.primitives.iter_mut() {
            if let Primitive::Pulse { rf_phase_rad, .. } = p {
                *rf_phase_rad += step_rad;
            }
        }
        out
    }

    /// Line-oriented structured text, one primitive per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.primitives {
            match p {
                Primitive::Pulse { species, flip_angle_rad, rf_phase_rad, duration_s, shape } => {
                    out.push_str(&format!(
                        "pulse {} {:.16e} {:.16e} {:.16e} {}\n",
                        species.label(),
                        flip_angle_rad,
                        rf_phase_rad,
                        duration_s,
                        shape.label()
                    ));
                }
                Primitive::Delay { duration_s } => {
                    out.push_str(&format!("delay {:.16e}\n", duration_s));
                }
                Primitive::FrameShift { species, angle_rad } => {
                    let label = match species {
                        Species::Center => "center",
                        Species::Peripheral => "peripheral",
                    };
                    out.push_str(&format!("frame {} {:.16e}\n", label, angle_rad));
                }
            }
        }
        out
    }
}

/// How pulses are realised during execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExecMode {
    /// Every pulse is an ideal instantaneous rotation.
    Instant,
    /// Pulses integrate the full block Hamiltonian; `amplitude_error` is the
    /// fractional RF miscalibration applied to every drive.
    Finite { amplitude_error: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ExecOptions {
    pub mode: ExecMode,
    /// Relaxation applied over delay windows, when configured.
    pub relax_during_delays: Option<RelaxationModel>,
    /// Also interleave relaxation over pulse windows (off by default; pulse
    /// durations are microseconds against coherence times of seconds).
    pub relax_during_pulses: bool,
}

impl ExecOptions {
    pub fn instant() -> Self {
        Self { mode: ExecMode::Instant, relax_during_delays: None, relax_during_pulses: false }
    }

    pub fn finite() -> Self {
        Self {
            mode: ExecMode::Finite { amplitude_error: 0.0 },
            relax_during_delays: None,
            relax_during_pulses: false,
        }
    }
}

/// Run a pulse program against a state. `params.duration_s` is ignored; the
/// program supplies all timing.
pub fn execute_program(
    state: &BlockState,
    program: &PulseProgram,
    params: &EvolutionParams,
    system: &SpinStarSystem,
    opts: &ExecOptions,
) -> Result<BlockState> {
    let mut s = state.clone();
    for prim in &program.primitives {
        match prim {
            Primitive::Delay { duration_s } => {
                s = free_evolve(&s, &params.with_duration(*duration_s), system)?;
                if let Some(model) = &opts.relax_during_delays {
                    s = relax(&s, *duration_s, model, system)?;
                }
            }
            Primitive::FrameShift { species, angle_rad } => {
                let gate = match species {
                    Species::Center => Gate::ZCenter(*angle_rad),
                    Species::Peripheral => Gate::ZPeripheral(*angle_rad),
                };
                s = apply_ideal_gate(&s, &gate)?;
            }
            Primitive::Pulse { species, flip_angle_rad, rf_phase_rad, duration_s, shape } => {
                match opts.mode {
                    ExecMode::Instant => {
                        s = apply_instant_pulse(&s, *species, *flip_angle_rad, *rf_phase_rad)?;
                    }
                    ExecMode::Finite { amplitude_error } => {
                        if *duration_s <= 0.0 {
                            return Err(Error::Domain(
                                "finite execution requires positive pulse durations".into(),
                            ));
                        }
                        let nominal = flip_angle_rad / (2.0 * std::f64::consts::PI * duration_s);
                        s = match (shape, species) {
                            (PulseShape::Hard, sp) => {
                                let drives =
                                    drives_for(*sp, nominal * (1.0 + amplitude_error), *rf_phase_rad);
                                finite_pulse_simultaneous(&s, &drives, *duration_s, params, system)?
                            }
                            (PulseShape::Bb1, PulseSpecies::Both) => {
                                // back-to-back composites; the two channels
                                // commute at the rotation level
                                let sc = bb1_pulse(
                                    &s,
                                    Species::Center,
                                    *flip_angle_rad,
                                    *rf_phase_rad,
                                    nominal,
                                    amplitude_error,
                                    params,
                                    system,
                                )?;
                                bb1_pulse(
                                    &sc,
                                    Species::Peripheral,
                                    *flip_angle_rad,
                                    *rf_phase_rad,
                                    nominal,
                                    amplitude_error,
                                    params,
                                    system,
                                )?
                            }
                            (PulseShape::Bb1, sp) => {
                                let species = match sp {
                                    PulseSpecies::Center => Species::Center,
                                    PulseSpecies::Peripheral => Species::Peripheral,
                                    PulseSpecies::Both => unreachable!(),
                                };
                                bb1_pulse(
                                    &s,
                                    species,
                                    *flip_angle_rad,
                                    *rf_phase_rad,
                                    nominal,
                                    amplitude_error,
                                    params,
                                    system,
                                )?
                            }
                        };
                        if opts.relax_during_pulses {
                            if let Some(model) = &opts.relax_during_delays {
                                s = relax(&s, *duration_s, model, system)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(s)
}

fn drives_for(species: PulseSpecies, nutation_hz: f64, rf_phase_rad: f64) -> Vec<Drive> {
    match species {
        PulseSpecies::Center => vec![Drive::new(Species::Center, nutation_hz, rf_phase_rad)],
        PulseSpecies::Peripheral => {
            vec![Drive::new(Species::Peripheral, nutation_hz, rf_phase_rad)]
        }
        PulseSpecies::Both => vec![
            Drive::new(Species::Center, nutation_hz, rf_phase_rad),
            Drive::new(Species::Peripheral, nutation_hz, rf_phase_rad),
        ],
    }
}

fn apply_instant_pulse(
    state: &BlockState,
    species: PulseSpecies,
    flip: f64,
    phase: f64,
) -> Result<BlockState> {
    let mut s = state.clone();
    match species {
        PulseSpecies::Center => {
            s = apply_ideal_gate(&s, &Gate::RotCenter { phase, angle: flip })?;
        }
        PulseSpecies::Peripheral => {
            s = apply_ideal_gate(&s, &Gate::RotPeripheral { phase, angle: flip })?;
        }
        PulseSpecies::Both => {
            s = apply_ideal_gate(&s, &Gate::RotCenter { phase, angle: flip })?;
            s = apply_ideal_gate(&s, &Gate::RotPeripheral { phase, angle: flip })?;
        }
    }
    Ok(s)
}
