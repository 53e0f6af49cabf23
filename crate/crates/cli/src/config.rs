//! JSON config schemas for every subcommand.
//!
//! All frequencies and rates are cyclic (Hz); durations are seconds. Every
//! config accepts an optional free-form `notes` field for inline
//! documentation; it is ignored by the computation.

use gawqed::calibration::CalibrationConfig;
use gawqed::device::{AtomConfig, DeviceConfig};
use gawqed::sequences::ScheduleConfig;
use gawqed::DeviceLayout64;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::CliError;

/// Device description: either an explicit point-by-point layout or one of the
/// braided presets pinned to a decoherence-free frequency.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeviceSpec {
    /// Explicit layout: delays and per-point rates.
    Explicit {
        omega_ref_hz: f64,
        atoms: Vec<AtomConfig>,
    },
    /// Two braided two-point atoms with equal gaps, pinned so atom `a`
    /// decouples at `f_df_hz`; the gap phase there is `pi/2 + winding * pi`.
    TwoPointDf {
        gamma0_hz: f64,
        f_df_hz: f64,
        #[serde(default)]
        winding: u32,
        #[serde(default)]
        gamma_nr_hz: [f64; 2],
        #[serde(default)]
        gamma_phi_hz: [f64; 2],
    },
    /// Two braided three-point atoms with gap ratio `phi1 = phi3 =
    /// ratio * phi2`, pinned so the upper decoherence-free frequency of atom
    /// `a` sits at `f_df2_hz`. `gamma_scale` multiplies both point rates
    /// uniformly (this rescales the exchange coupling without moving the
    /// decoherence-free frequencies).
    ThreePointDf2 {
        gamma1_hz: f64,
        gamma2_hz: f64,
        ratio: f64,
        f_df2_hz: f64,
        #[serde(default = "one")]
        gamma_scale: f64,
        #[serde(default)]
        gamma_nr_hz: [f64; 2],
        #[serde(default)]
        gamma_phi_hz: [f64; 2],
    },
}

fn one() -> f64 {
    1.0
}

impl DeviceSpec {
    pub fn to_layout(&self) -> Result<DeviceLayout64, CliError> {
        let layout = match self {
            DeviceSpec::Explicit { omega_ref_hz, atoms } => DeviceConfig {
                omega_ref_hz: *omega_ref_hz,
                atoms: atoms.clone(),
            }
            .to_layout()?,
            DeviceSpec::TwoPointDf {
                gamma0_hz,
                f_df_hz,
                winding,
                gamma_nr_hz,
                gamma_phi_hz,
            } => gawqed::spectra::two_point_df_layout(
                TAU * gamma0_hz,
                TAU * f_df_hz,
                *winding,
                gamma_nr_hz.map(|x| TAU * x),
                gamma_phi_hz.map(|x| TAU * x),
            )?,
            DeviceSpec::ThreePointDf2 {
                gamma1_hz,
                gamma2_hz,
                ratio,
                f_df2_hz,
                gamma_scale,
                gamma_nr_hz,
                gamma_phi_hz,
            } => {
                if !(*gamma_scale > 0.0) {
                    return Err(CliError::validation("gamma_scale must be > 0"));
                }
                gawqed::spectra::three_point_df2_layout(
                    TAU * gamma1_hz * gamma_scale,
                    TAU * gamma2_hz * gamma_scale,
                    *ratio,
                    TAU * f_df2_hz,
                    gamma_nr_hz.map(|x| TAU * x),
                    gamma_phi_hz.map(|x| TAU * x),
                )?
            }
        };
        Ok(layout)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    pub device: DeviceSpec,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub n_points: usize,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfConfig {
    pub device: DeviceSpec,
    /// Atom id to search.
    pub atom: String,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    /// Residual radiative rate (Hz) below which a minimum counts as
    /// decoherence-free.
    #[serde(default = "default_df_tol")]
    pub tol_hz: f64,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

fn default_df_tol() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T1Config {
    pub device: DeviceSpec,
    pub atom: String,
    /// Qubit frequency during the decay.
    pub f_hz: f64,
    pub t_max_s: f64,
    pub n_points: usize,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChevronConfig {
    pub device: DeviceSpec,
    /// Frequency the passive atom is parked at (typically a
    /// decoherence-free frequency).
    pub f_df_hz: f64,
    pub delta_start_hz: f64,
    pub delta_stop_hz: f64,
    pub n_delta: usize,
    pub t_max_s: f64,
    pub n_t: usize,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingConfig {
    pub device: DeviceSpec,
    /// Frequency of the stationary atom (atom index 1).
    pub f_fixed_hz: f64,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub n_points: usize,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Ground,
    #[serde(untagged)]
    Excited { excited: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityConfig {
    /// Only `"entangled_pair"`, the state `(|01> - i|10>)/sqrt(2)`, is
    /// supported.
    pub target: String,
    /// Segment from which deterministic detuning phase is rotated out before
    /// comparing to the target (phase accumulated while no coherence existed
    /// is not physical).
    #[serde(default)]
    pub frame_correct_from_segment: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub device: DeviceSpec,
    pub schedule: ScheduleConfig,
    /// Rotating-frame frequency; defaults to the mean of the first segment.
    #[serde(default)]
    pub rotating_frame_hz: Option<f64>,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub fidelity: Option<FidelityConfig>,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    pub device: DeviceSpec,
    /// Idle frequency of atom `a` (its decoherence-free point).
    pub f_df1_hz: f64,
    /// Frequency of atom `b` and of the interaction segment.
    pub f_df2_hz: f64,
    /// Exchange coupling during the interaction segment; sets the
    /// sqrt(iSWAP) duration `pi / (4 g)`.
    pub g_eff_hz: f64,
    #[serde(default = "default_idle")]
    pub idle_s: f64,
    /// Optional binomial shot noise on the tomography expectations.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

fn default_idle() -> f64 {
    100e-9
}

// No `deny_unknown_fields` here: serde does not support it together with
// `flatten`.
#[derive(Debug, Deserialize)]
pub struct CalibrateConfig {
    #[serde(flatten)]
    pub calibration: CalibrationConfig,
    /// Target frequency per qubit id; every qubit must appear.
    pub targets_hz: BTreeMap<String, f64>,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    TwoPoint,
    ThreePoint,
}

impl ModelName {
    pub fn to_kind(self) -> gawqed::estimation::ModelKind<f64> {
        match self {
            ModelName::TwoPoint => gawqed::estimation::ModelKind::TwoPoint,
            ModelName::ThreePoint => gawqed::estimation::ModelKind::ThreePoint,
        }
    }
}

/// One fit parameter: `{"name": .., "value": ..}` fixes it,
/// `{"name": .., "init": .., "lo": .., "hi": ..}` frees it.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ParamSpecConfig {
    Fixed { name: String, value: f64 },
    Free { name: String, init: f64, lo: f64, hi: f64 },
}

impl ParamSpecConfig {
    pub fn to_spec(&self) -> gawqed::estimation::ParamSpec<f64> {
        match self {
            ParamSpecConfig::Fixed { name, value } => {
                gawqed::estimation::ParamSpec::fixed(name.clone(), *value)
            }
            ParamSpecConfig::Free { name, init, lo, hi } => {
                gawqed::estimation::ParamSpec::free(name.clone(), *init, *lo, *hi)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Dataset CSV (`kind,label,f_hz,value_hz,sigma_hz`), relative paths
    /// resolved against the config file's directory.
    pub dataset_csv: String,
    pub model: ModelName,
    pub params: Vec<ParamSpecConfig>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}

fn default_restarts() -> usize {
    32
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub model: ModelName,
    pub params: BTreeMap<String, f64>,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub n_points: usize,
    #[serde(default)]
    pub noise_sigma_hz: f64,
    #[serde(default)]
    pub seed: u64,
    /// Free-form inline documentation; ignored by the computation.
    #[allow(dead_code)]
    #[serde(default)]
    pub notes: Option<serde_json::Value>,
}
