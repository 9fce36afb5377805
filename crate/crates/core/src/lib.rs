//! Symmetry-reduced simulator for spin-star cat-state NMR magnetometry.
//!
//! One central spin J-coupled to N equivalent peripheral spins is evolved in
//! permutation-symmetric blocks, so the cost of a full 13-spin experiment is
//! a handful of ≤26-dimensional matrices instead of an 8192-dimensional one.
//! The crate covers the whole measurement chain: thermal and pseudopure
//! preparation, polarisation priming, cat-state sequences with disentangling
//! variants, pulse compilation to timed programs, free-induction synthesis
//! and spectral processing, and multi-peak field estimation with aliasing
//! resolution. A brute-force tensor-product oracle validates the reduced
//! engine for small systems.

pub mod blockstate;
pub mod compiler;
pub mod error;
pub mod estimator;
pub mod evolve;
pub mod experiment;
pub mod gates;
pub mod linalg;
pub mod oracle;
pub mod program;
pub mod spectro;
pub mod system;

pub use blockstate::{measure_center_peaks, pseudopure_state, thermal_state, BlockState};
pub use error::{Error, Result};
pub use evolve::{
    bb1_pulse, finite_pulse, finite_pulse_simultaneous, free_evolve, relax, Drive,
    EvolutionParams, RelaxationModel, Species,
};
pub use gates::{apply_ideal_gate, apply_ideal_gates, Gate};
pub use system::{
    binomial, dicke_decomposition, lopsidedness_multiplicity, peak_frequency, DickeSector,
    Lopsidedness, SpinStarSystem,
};
