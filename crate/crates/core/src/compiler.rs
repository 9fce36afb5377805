//! Gate-level IR for the sensor sequences and its translation into timed
//! pulse programs.
//!
//! Compilation rules:
//! - Hadamard → π/2 pulse at phase −y followed by a virtual π z-frame.
//! - CNOT (centre-controlled, peripheral target) → two target π/2 pulses
//!   bracketing an echo window of total length 1/(2J), with simultaneous
//!   two-species π_x pulses at 1/(8J) and 3/(8J), plus trailing z-frames
//!   chosen so the compiled gate equals the ideal one on every sector.
//! - ModCNOT (proton-conditioned centre flip) → the same structure on the
//!   centre channel with window 1/(2NJ), matching the separation of the
//!   outermost multiplet lines. Exact on the outermost lines.
//! - Z gates fold into the phases of subsequent pulses; unresolved frames
//!   are appended as trailing metadata, never as standalone primitives.
//!
//! Delays carry the logical echo timing; pulse durations add to wall time,
//! so the instantaneous-pulse model reproduces ideal gates exactly while the
//! finite model inherits an O(J·τ_pulse) window stretch that is common to a
//! run and its phasing reference.

use crate::error::{Error, Result};
use crate::evolve::Species;
use crate::program::{Primitive, PulseProgram, PulseShape, PulseSpecies};
use crate::system::SpinStarSystem;
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IrGate {
    Hadamard(Species),
    /// Collective NOT on the target conditioned on the control; only the
    /// centre-controlled form has a compiled realisation here.
    Cnot { control: Species, target: Species },
    /// Disentangling CNOT: centre flip conditioned on the peripheral branch.
    ModCnot,
    Not(Species),
    Z(Species, f64),
    Delay(f64),
    /// Refocused window: simultaneous π pulses on the selected species at
    /// 1/4 and 3/4 of the window.
    Echo { center: bool, peripheral: bool, duration_s: f64 },
    /// Two π pulses on one species at t/4 and 3t/4 of the window.
    PiPair { species: Species, duration_s: f64 },
    /// Plain rotation pulse.
    Rot { species: Species, phase: f64, angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// H — CNOT — delay — CNOT — H; phase rate (ℓγ_H + γ_Si)B₀.
    Original,
    /// Sequence A: disentangling CNOT pair around the delay (odd N only).
    DisentangleCnot,
    /// Sequence B: centre echo pair inside the delay (any N).
    DisentangleEcho,
}

/// Assemble the gate-level sensor sequence: optional polarisation-priming
/// prefix, the entangling wrapper, the delay (plain, CNOT-disentangled, or
/// echo-refocused), and the mirrored readout unwinding.
pub fn build_sequence(
    kind: SequenceKind,
    priming: bool,
    delay_t: f64,
    system: &SpinStarSystem,
) -> Result<Vec<IrGate>> {
    if delay_t < 0.0 {
        return Err(Error::Domain("delay must be >= 0".into()));
    }
    let mut ir = Vec::new();
    if priming {
        ir.push(IrGate::Cnot { control: Species::Center, target: Species::Peripheral });
    }
    ir.push(IrGate::Hadamard(Species::Center));
    ir.push(IrGate::Cnot { control: Species::Center, target: Species::Peripheral });
    match kind {
        SequenceKind::Original => {
            ir.push(IrGate::Delay(delay_t));
        }
        SequenceKind::DisentangleCnot => {
            if system.n_peripheral % 2 == 0 {
                return Err(Error::EvenPeripheralCount("sequence A".into()));
            }
            ir.push(IrGate::ModCnot);
            ir.push(IrGate::Delay(delay_t));
            ir.push(IrGate::ModCnot);
        }
        SequenceKind::DisentangleEcho => {
            ir.push(IrGate::PiPair { species: Species::Center, duration_s: delay_t });
        }
    }
    ir.push(IrGate::Cnot { control: Species::Center, target: Species::Peripheral });
    ir.push(IrGate::Hadamard(Species::Center));
    Ok(ir)
}

struct Emitter {
    primitives: Vec<Primitive>,
    pending_z: [f64; 2],
    shape: PulseShape,
    pi2_center: f64,
    pi2_peripheral: f64,
}

impl Emitter {
    fn species_index(species: Species) -> usize {
        match species {
            Species::Center => 0,
            Species::Peripheral => 1,
        }
    }

    fn pi2_duration(&self, species: Species) -> f64 {
        match species {
            Species::Center => self.pi2_center,
            Species::Peripheral => self.pi2_peripheral,
        }
    }

    /// Duration of the simultaneous two-species π pulse: the slower channel
    /// sets the window and the other is amplitude-rescaled to match.
    fn pi_both_duration(&self) -> f64 {
        2.0 * self.pi2_center.max(self.pi2_peripheral)
    }

    /// Emit a pulse with the pending z-frame folded into its phase,
    /// normalised into (−π, π].
    fn pulse(&mut self, species: Species, flip: f64, nominal_phase: f64, duration: f64) {
        let raw = nominal_phase - self.pending_z[Self::species_index(species)];
        let mut folded = raw.rem_euclid(2.0 * PI);
        if folded > PI {
            folded -= 2.0 * PI;
        }
        if folded == -0.0 {
            folded = 0.0;
        }
        self.primitives.push(Primitive::Pulse {
            species: match species {
                Species::Center => PulseSpecies::Center,
                Species::Peripheral => PulseSpecies::Peripheral,
            },
            flip_angle_rad: flip,
            rf_phase_rad: folded,
            duration_s: duration,
            shape: self.shape,
        });
    }

    /// Refocusing π pair inside a window: frame-transparent, so the phases
    /// are emitted unfolded (any common phase refocuses identically).
    fn window_with_pi_pair(&mut self, species: PulseSpecies, window: f64) {
        let duration = match species {
            PulseSpecies::Center => 2.0 * self.pi2_center,
            PulseSpecies::Peripheral => 2.0 * self.pi2_peripheral,
            PulseSpecies::Both => self.pi_both_duration(),
        };
        let quarter = window / 4.0;
        self.delay(quarter);
        self.primitives.push(Primitive::Pulse {
            species,
            flip_angle_rad: PI,
            rf_phase_rad: 0.0,
            duration_s: duration,
            shape: self.shape,
        });
        self.delay(2.0 * quarter);
        self.primitives.push(Primitive::Pulse {
            species,
            flip_angle_rad: PI,
            rf_phase_rad: 0.0,
            duration_s: duration,
            shape: self.shape,
        });
        self.delay(quarter);
    }

    /// CNOT-style conditional block: target π/2 pulses bracketing a
    /// refocused coupling window, plus the trailing frame corrections that
    /// make the block equal the ideal gate.
    fn conditional_block(&mut self, target: Species, window: f64, frames: [(Species, f64); 2]) {
        let pi2 = self.pi2_duration(target);
        self.pulse(target, FRAC_PI_2, -FRAC_PI_2, pi2);
        // simultaneous π pulses at 1/4 and 3/4 of the window, i.e. at the
        // absolute times 1/(8J) and 3/(8J) for the conventional 1/(2J) echo
        self.window_with_pi_pair(PulseSpecies::Both, window);
        self.pulse(target, FRAC_PI_2, 0.0, pi2);
        for (species, angle) in frames {
            self.pending_z[Self::species_index(species)] += angle;
        }
    }

    fn delay(&mut self, duration: f64) {
        if duration > 0.0 {
            self.primitives.push(Primitive::Delay { duration_s: duration });
        }
    }

    fn flush_frames(&mut self) {
        for (i, species) in [Species::Center, Species::Peripheral].into_iter().enumerate() {
            let mut angle = self.pending_z[i].rem_euclid(2.0 * PI);
            if angle > PI {
                angle -= 2.0 * PI;
            }
            if angle.abs() > 1e-12 {
                self.primitives.push(Primitive::FrameShift { species, angle_rad: angle });
            }
            self.pending_z[i] = 0.0;
        }
    }
}

/// Translate a gate sequence into a timed pulse program.
pub fn compile(
    ir: &[IrGate],
    system: &SpinStarSystem,
    shape: PulseShape,
) -> Result<PulseProgram> {
    compile_inner(ir, system, shape, false)
}

/// As [`compile`], with a readout excitation (π/2 at −y on the centre)
/// appended after the sequence and marked for phase cycling.
pub fn compile_with_readout(
    ir: &[IrGate],
    system: &SpinStarSystem,
    shape: PulseShape,
) -> Result<PulseProgram> {
    compile_inner(ir, system, shape, true)
}

fn compile_inner(
    ir: &[IrGate],
    system: &SpinStarSystem,
    shape: PulseShape,
    readout: bool,
) -> Result<PulseProgram> {
    let n = system.n_peripheral;
    let j = system.j_coupling_hz;
    let mut em = Emitter {
        primitives: Vec::new(),
        pending_z: [0.0; 2],
        shape,
        pi2_center: system.pulse_pi2_center_s,
        pi2_peripheral: system.pulse_pi2_peripheral_s,
    };
    for gate in ir {
        match gate {
            IrGate::Hadamard(species) => {
                let pi2 = em.pi2_duration(*species);
                em.pulse(*species, FRAC_PI_2, -FRAC_PI_2, pi2);
                em.pending_z[Emitter::species_index(*species)] += PI;
            }
            IrGate::Cnot { control, target } => {
                if *control != Species::Center || *target != Species::Peripheral {
                    return Err(Error::Domain(
                        "only the centre-controlled CNOT is compilable; the \
                         proton-conditioned variant is ModCnot"
                            .into(),
                    ));
                }
                // trailing frames: π/2 on the target and πN/2 on the control
                // (the N-dependence absorbs the sector phases of the
                // collective flip)
                em.conditional_block(
                    Species::Peripheral,
                    1.0 / (2.0 * j),
                    [(Species::Peripheral, FRAC_PI_2), (Species::Center, PI * n as f64 / 2.0)],
                );
            }
            IrGate::ModCnot => {
                if n % 2 == 0 {
                    return Err(Error::EvenPeripheralCount(
                        "disentangling CNOT (sequence A)".into(),
                    ));
                }
                em.conditional_block(
                    Species::Center,
                    1.0 / (2.0 * n as f64 * j),
                    [(Species::Center, FRAC_PI_2), (Species::Peripheral, PI / (2.0 * n as f64))],
                );
            }
            IrGate::Not(species) => {
                let duration = 2.0 * em.pi2_duration(*species);
                em.pulse(*species, PI, 0.0, duration);
            }
            IrGate::Z(species, angle) => {
                em.pending_z[Emitter::species_index(*species)] += angle;
            }
            IrGate::Delay(t) => {
                if *t < 0.0 {
                    return Err(Error::Domain("IR delays must be >= 0".into()));
                }
                em.delay(*t);
            }
            IrGate::Echo { center, peripheral, duration_s } => {
                if *duration_s < 0.0 {
                    return Err(Error::Domain("echo windows must be >= 0".into()));
                }
                let species = match (center, peripheral) {
                    (true, true) => PulseSpecies::Both,
                    (true, false) => PulseSpecies::Center,
                    (false, true) => PulseSpecies::Peripheral,
                    (false, false) => {
                        return Err(Error::Domain("echo needs at least one species".into()))
                    }
                };
                em.window_with_pi_pair(species, *duration_s);
            }
            IrGate::PiPair { species, duration_s } => {
                if *duration_s < 0.0 {
                    return Err(Error::Domain("echo windows must be >= 0".into()));
                }
                let ps = match species {
                    Species::Center => PulseSpecies::Center,
                    Species::Peripheral => PulseSpecies::Peripheral,
                };
                em.window_with_pi_pair(ps, *duration_s);
            }
            IrGate::Rot { species, phase, angle } => {
                let duration = em.pi2_duration(*species) * angle / FRAC_PI_2;
                em.pulse(*species, *angle, *phase, duration);
            }
        }
    }
    let readout_start = if readout {
        let idx = em.primitives.len();
        let pi2 = em.pi2_center;
        em.pulse(Species::Center, FRAC_PI_2, -FRAC_PI_2, pi2);
        Some(idx)
    } else {
        None
    };
    em.flush_frames();
    Ok(PulseProgram { primitives: em.primitives, readout_start })
}

/// The 4-step receiver phase cycle: all pulse phases stepped together through
/// {0, π/2, π, 3π/2} with the receiver phase co-stepped. Averaging the four
/// receiver-rotated acquisitions cancels DC offset and quadrature imbalance.
pub fn phase_cycle_variants(program: &PulseProgram) -> Result<(Vec<PulseProgram>, Vec<f64>)> {
    if program.readout_start.is_none() {
        return Err(Error::Domain("phase cycling requires a readout pulse".into()));
    }
    let steps = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
    let programs = steps.iter().map(|s| program.with_global_phase_step(*s)).collect();
    Ok((programs, steps.to_vec()))
}

/// Execute a gate sequence with ideal gates (the gate-level reference path).
pub fn execute_ir(
    state: &crate::blockstate::BlockState,
    ir: &[IrGate],
    params: &crate::evolve::EvolutionParams,
    system: &SpinStarSystem,
    relax_model: Option<&crate::evolve::RelaxationModel>,
) -> Result<crate::blockstate::BlockState> {
    use crate::evolve::{free_evolve, relax};
    use crate::gates::{apply_ideal_gate, Gate};
    let mut s = state.clone();
    let evolve_seg = |s: &crate::blockstate::BlockState, t: f64| -> Result<_> {
        let mut out = free_evolve(s, &params.with_duration(t), system)?;
        if let Some(model) = relax_model {
            out = relax(&out, t, model, system)?;
        }
        Ok(out)
    };
    for gate in ir {
        s = match gate {
            IrGate::Hadamard(Species::Center) => apply_ideal_gate(&s, &Gate::HadamardCenter)?,
            IrGate::Hadamard(Species::Peripheral) => {
                let r = apply_ideal_gate(
                    &s,
                    &Gate::RotPeripheral { phase: -FRAC_PI_2, angle: FRAC_PI_2 },
                )?;
                apply_ideal_gate(&r, &Gate::ZPeripheral(PI))?
            }
            IrGate::Cnot { control, target } => {
                if *control != Species::Center || *target != Species::Peripheral {
                    return Err(Error::Domain("only the centre-controlled CNOT exists".into()));
                }
                apply_ideal_gate(&s, &Gate::CnotCenterToPeripheral)?
            }
            IrGate::ModCnot => apply_ideal_gate(&s, &Gate::ModCnotPeripheralToCenter)?,
            IrGate::Not(Species::Center) => apply_ideal_gate(&s, &Gate::NotCenter)?,
            IrGate::Not(Species::Peripheral) => apply_ideal_gate(&s, &Gate::NotPeripheral)?,
            IrGate::Z(Species::Center, angle) => apply_ideal_gate(&s, &Gate::ZCenter(*angle))?,
            IrGate::Z(Species::Peripheral, angle) => {
                apply_ideal_gate(&s, &Gate::ZPeripheral(*angle))?
            }
            IrGate::Delay(t) => evolve_seg(&s, *t)?,
            IrGate::Echo { center, peripheral, duration_s } => {
                let mut cur = evolve_seg(&s, duration_s / 4.0)?;
                for seg in 0..2 {
                    if *center {
                        cur = apply_ideal_gate(&cur, &Gate::RotCenter { phase: 0.0, angle: PI })?;
                    }
                    if *peripheral {
                        cur = apply_ideal_gate(
                            &cur,
                            &Gate::RotPeripheral { phase: 0.0, angle: PI },
                        )?;
                    }
                    let t = if seg == 0 { duration_s / 2.0 } else { duration_s / 4.0 };
                    cur = evolve_seg(&cur, t)?;
                }
                cur
            }
            IrGate::PiPair { species, duration_s } => {
                let rot = match species {
                    Species::Center => Gate::RotCenter { phase: 0.0, angle: PI },
                    Species::Peripheral => Gate::RotPeripheral { phase: 0.0, angle: PI },
                };
                let mut cur = evolve_seg(&s, duration_s / 4.0)?;
                cur = apply_ideal_gate(&cur, &rot)?;
                cur = evolve_seg(&cur, duration_s / 2.0)?;
                cur = apply_ideal_gate(&cur, &rot)?;
                evolve_seg(&cur, duration_s / 4.0)?
            }
            IrGate::Rot { species, phase, angle } => {
                let g = match species {
                    Species::Center => Gate::RotCenter { phase: *phase, angle: *angle },
                    Species::Peripheral => Gate::RotPeripheral { phase: *phase, angle: *angle },
                };
                apply_ideal_gate(&s, &g)?
            }
        };
    }
    Ok(s)
}

/// Ideal readout excitation matching the compiled one.
pub fn ideal_readout(
    state: &crate::blockstate::BlockState,
) -> Result<crate::blockstate::BlockState> {
    crate::gates::apply_ideal_gate(
        state,
        &crate::gates::Gate::RotCenter { phase: -FRAC_PI_2, angle: FRAC_PI_2 },
    )
}
