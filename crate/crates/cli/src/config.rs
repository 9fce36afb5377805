//! Run configuration: a single JSON document, overridable by CLI flags.

use serde::Deserialize;
use spinstar_core::estimator::PhaseMode;
use spinstar_core::evolve::RelaxationModel;
use spinstar_core::experiment::{
    AcquisitionSpec, EstimatorSpec, ExperimentSpec, InitialState, PulseModel,
};
use spinstar_core::compiler::SequenceKind;
use spinstar_core::spectro::Corruption;
use spinstar_core::system::SpinStarSystem;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl From<spinstar_core::Error> for CliError {
    fn from(e: spinstar_core::Error) -> Self {
        match e {
            spinstar_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SystemOverrides {
    pub n_peripheral: Option<u32>,
    pub gamma_center_mhz_t: Option<f64>,
    pub gamma_peripheral_mhz_t: Option<f64>,
    pub j_coupling_hz: Option<f64>,
    pub t1_center_s: Option<f64>,
    pub t2_center_s: Option<f64>,
    pub t1_peripheral_s: Option<f64>,
    pub t2_peripheral_s: Option<f64>,
    pub t2star_peripheral_s: Option<f64>,
    pub t2star_noon_s: Option<f64>,
    pub pulse_pi2_center_s: Option<f64>,
    pub pulse_pi2_peripheral_s: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub dwell_s: Option<f64>,
    pub n_samples: Option<usize>,
    pub zero_fill: Option<usize>,
    pub detection_center_hz: Option<f64>,
    pub phase_cycle: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    pub noise_sigma: Option<f64>,
    pub dc_re: Option<f64>,
    pub dc_im: Option<f64>,
    pub quadrature_gain: Option<f64>,
    pub drift_amp: Option<f64>,
    pub drift_freq_hz: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RelaxConfig {
    pub rate_center: Option<f64>,
    pub rate_peripheral: Option<f64>,
    pub order_exponent: Option<f64>,
    pub t1_rate_center: Option<f64>,
    pub t1_rate_peripheral: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub assume_delta_h_hz: Option<f64>,
    pub assume_delta_si_hz: Option<f64>,
    pub prior_b0_tesla: Option<[f64; 2]>,
    pub min_reference_amp_fraction: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n: Option<u32>,
    pub trials: Option<usize>,
}

/// The JSON-facing document. Unknown keys are rejected.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    #[serde(default)]
    pub system: SystemOverrides,
    pub state: Option<serde_json::Value>,
    pub sequence: Option<String>,
    pub priming: Option<bool>,
    pub pulses: Option<String>,
    pub delay_s: Option<f64>,
    pub b0_tesla: Option<f64>,
    pub delta_h_hz: Option<f64>,
    pub delta_si_hz: Option<f64>,
    pub amplitude_error: Option<f64>,
    pub relax_during_delays: Option<bool>,
    #[serde(default)]
    pub relax: RelaxConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub corruption: CorruptionConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
    pub threads: Option<usize>,
    pub fail_on_degraded: Option<bool>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid config JSON: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    DeltaCenter,
    DeltaPeripheral,
    B0,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SpinStarSystem,
    pub initial: InitialState,
    pub sequence: Option<SequenceKind>,
    pub priming: bool,
    pub pulses: PulseModel,
    pub delay_s: f64,
    pub b0_tesla: f64,
    pub delta_h_hz: f64,
    pub delta_si_hz: f64,
    pub amplitude_error: f64,
    pub relax_during_delays: bool,
    pub relax: RelaxationModel,
    pub acquisition: AcquisitionSpec,
    pub corruption: Corruption,
    pub estimator: EstimatorSpec,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<f64>,
    pub oracle_n: u32,
    pub oracle_trials: usize,
    pub seed: u64,
    pub out_dir: std::path::PathBuf,
    pub threads: Option<usize>,
    pub fail_on_degraded: bool,
}

pub fn sequence_kind(name: &str) -> Result<SequenceKind, CliError> {
    match name {
        "original" => Ok(SequenceKind::Original),
        "a" | "seq_a" => Ok(SequenceKind::DisentangleCnot),
        "b" | "seq_b" => Ok(SequenceKind::DisentangleEcho),
        other => Err(config_err(format!(
            "sequence: unknown value {other:?} (expected original | a | b)"
        ))),
    }
}

pub fn phase_mode_name(mode: PhaseMode) -> &'static str {
    match mode {
        PhaseMode::Original => "original",
        PhaseMode::DisentangledEcho => "disentangled_echo",
        PhaseMode::DisentangledCnot => "disentangled_cnot",
    }
}

impl RunConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self, CliError> {
        let preset = raw.preset.as_deref().unwrap_or("tms");
        let mut system = match preset {
            "tms" => SpinStarSystem::tms(),
            "tmp" => {
                let gamma = raw.system.gamma_center_mhz_t.ok_or_else(|| {
                    config_err(
                        "system.gamma_center_mhz_t: required for the tmp preset (not in the \
                         built-in constants)",
                    )
                })?;
                let j = raw.system.j_coupling_hz.ok_or_else(|| {
                    config_err("system.j_coupling_hz: required for the tmp preset")
                })?;
                SpinStarSystem::tmp(gamma, j).map_err(|e| config_err(e.to_string()))?
            }
            other => {
                return Err(config_err(format!(
                    "preset: unknown value {other:?} (expected tms | tmp)"
                )))
            }
        };
        let o = &raw.system;
        if let Some(v) = o.n_peripheral {
            system.n_peripheral = v;
        }
        if let Some(v) = o.gamma_center_mhz_t {
            system.gamma_center_mhz_t = v;
        }
        if let Some(v) = o.gamma_peripheral_mhz_t {
            system.gamma_peripheral_mhz_t = v;
        }
        if let Some(v) = o.j_coupling_hz {
            system.j_coupling_hz = v;
        }
        if let Some(v) = o.t1_center_s {
            system.t1_center_s = v;
        }
        if let Some(v) = o.t2_center_s {
            system.t2_center_s = v;
        }
        if let Some(v) = o.t1_peripheral_s {
            system.t1_peripheral_s = v;
        }
        if let Some(v) = o.t2_peripheral_s {
            system.t2_peripheral_s = v;
        }
        if let Some(v) = o.t2star_peripheral_s {
            system.t2star_peripheral_s = v;
        }
        if let Some(v) = o.t2star_noon_s {
            system.t2star_noon_s = v;
        }
        if let Some(v) = o.pulse_pi2_center_s {
            system.pulse_pi2_center_s = v;
        }
        if let Some(v) = o.pulse_pi2_peripheral_s {
            system.pulse_pi2_peripheral_s = v;
        }
        system.validate().map_err(|e| config_err(e.to_string()))?;

        let initial = match &raw.state {
            None => InitialState::Thermal,
            Some(serde_json::Value::String(s)) if s == "thermal" => InitialState::Thermal,
            Some(serde_json::Value::Object(map)) => {
                let ell = map
                    .get("pseudopure")
                    .and_then(|v| v.as_i64())
                    .ok_or_else(|| config_err("state: expected \"thermal\" or {\"pseudopure\": ell}"))?;
                InitialState::Pseudopure(ell as i32)
            }
            Some(other) => {
                return Err(config_err(format!(
                    "state: expected \"thermal\" or {{\"pseudopure\": ell}}, got {other}"
                )))
            }
        };
        if let InitialState::Pseudopure(ell) = initial {
            spinstar_core::system::Lopsidedness::checked(system.n_peripheral, ell)
                .map_err(|e| config_err(format!("state.pseudopure: {e}")))?;
        }

        let sequence = match &raw.sequence {
            None => None,
            Some(s) if s == "none" => None,
            Some(s) => Some(sequence_kind(s)?),
        };
        let pulses = match raw.pulses.as_deref() {
            None | Some("ideal") => PulseModel::Ideal,
            Some("hard") => PulseModel::Hard,
            Some("bb1") => PulseModel::Bb1,
            Some(other) => {
                return Err(config_err(format!(
                    "pulses: unknown value {other:?} (expected ideal | hard | bb1)"
                )))
            }
        };
        let delay_s = raw.delay_s.unwrap_or(0.0);
        if delay_s < 0.0 {
            return Err(config_err("delay_s: must be >= 0"));
        }
        let mut relax = RelaxationModel::from_system(&system);
        if let Some(v) = raw.relax.rate_center {
            relax.rate_center = v;
        }
        if let Some(v) = raw.relax.rate_peripheral {
            relax.rate_peripheral = v;
        }
        if let Some(v) = raw.relax.order_exponent {
            relax.order_exponent = v;
        }
        if let Some(v) = raw.relax.t1_rate_center {
            relax.t1_rate_center = v;
        }
        if let Some(v) = raw.relax.t1_rate_peripheral {
            relax.t1_rate_peripheral = v;
        }
        relax.validate().map_err(|e| config_err(format!("relax: {e}")))?;

        let acq = AcquisitionSpec {
            dwell_s: raw.acquisition.dwell_s.unwrap_or(0.004),
            n_samples: raw.acquisition.n_samples.unwrap_or(2048),
            zero_fill: raw.acquisition.zero_fill.unwrap_or(16384),
            detection_center_hz: raw.acquisition.detection_center_hz.unwrap_or(0.0),
            phase_cycle: raw.acquisition.phase_cycle.unwrap_or(false),
        };
        if acq.n_samples < 2 {
            return Err(config_err("acquisition.n_samples: must be >= 2"));
        }
        if !acq.zero_fill.is_power_of_two() || acq.zero_fill < acq.n_samples {
            return Err(config_err(
                "acquisition.zero_fill: must be a power of two >= n_samples",
            ));
        }
        let corruption = Corruption {
            noise_sigma: raw.corruption.noise_sigma.unwrap_or(0.0),
            dc_re: raw.corruption.dc_re.unwrap_or(0.0),
            dc_im: raw.corruption.dc_im.unwrap_or(0.0),
            quadrature_gain: raw.corruption.quadrature_gain.unwrap_or(0.0),
            drift_amp: raw.corruption.drift_amp.unwrap_or(0.0),
            drift_freq_hz: raw.corruption.drift_freq_hz.unwrap_or(0.0),
        };
        if corruption.noise_sigma < 0.0 {
            return Err(config_err("corruption.noise_sigma: must be >= 0"));
        }
        let prior = raw.estimator.prior_b0_tesla.unwrap_or([-1e-7, 1e-7]);
        if prior[0] >= prior[1] {
            return Err(config_err("estimator.prior_b0_tesla: must be [lo, hi] with lo < hi"));
        }
        let estimator = EstimatorSpec {
            assume_delta_peripheral_hz: raw.estimator.assume_delta_h_hz,
            assume_delta_center_hz: raw.estimator.assume_delta_si_hz,
            prior_range_tesla: (prior[0], prior[1]),
            min_reference_amp_fraction: raw.estimator.min_reference_amp_fraction.unwrap_or(1e-6),
        };
        let sweep_axis = match raw.sweep.axis.as_deref() {
            None => None,
            Some("delta_center") | Some("delta_si") => Some(SweepAxis::DeltaCenter),
            Some("delta_peripheral") | Some("delta_h") => Some(SweepAxis::DeltaPeripheral),
            Some("b0") => Some(SweepAxis::B0),
            Some(other) => {
                return Err(config_err(format!(
                    "sweep.axis: unknown value {other:?} (expected delta_center | \
                     delta_peripheral | b0)"
                )))
            }
        };
        Ok(RunConfig {
            system,
            initial,
            sequence,
            priming: raw.priming.unwrap_or(false),
            pulses,
            delay_s,
            b0_tesla: raw.b0_tesla.unwrap_or(0.0),
            delta_h_hz: raw.delta_h_hz.unwrap_or(0.0),
            delta_si_hz: raw.delta_si_hz.unwrap_or(0.0),
            amplitude_error: raw.amplitude_error.unwrap_or(0.0),
            relax_during_delays: raw.relax_during_delays.unwrap_or(false),
            relax,
            acquisition: acq,
            corruption,
            estimator,
            sweep_axis,
            sweep_values: raw.sweep.values.clone().unwrap_or_default(),
            oracle_n: raw.oracle.n.unwrap_or(2),
            oracle_trials: raw.oracle.trials.unwrap_or(100),
            seed: raw.seed.unwrap_or(0),
            out_dir: std::path::PathBuf::from(raw.out_dir.as_deref().unwrap_or("out")),
            threads: raw.threads,
            fail_on_degraded: raw.fail_on_degraded.unwrap_or(false),
        })
    }

    pub fn experiment_spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            system: self.system.clone(),
            initial: self.initial,
            sequence: self.sequence,
            priming: self.priming,
            pulses: self.pulses,
            delay_s: self.delay_s,
            b0_tesla: self.b0_tesla,
            delta_peripheral_hz: self.delta_h_hz,
            delta_center_hz: self.delta_si_hz,
            relax_during_delays: if self.relax_during_delays { Some(self.relax) } else { None },
            amplitude_error: self.amplitude_error,
        }
    }
}
