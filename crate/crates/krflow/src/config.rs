//! Run configuration: strict TOML parsing with documented defaults and
//! range validation.
//!
//! Unknown keys are a parse error. Error mapping: malformed TOML or unknown
//! keys produce [`CliError::ParseError`] (exit code 2), out-of-range values
//! produce [`CliError::RangeError`] (exit code 3).

use crate::error::CliError;
use crate::flow::FlowKind;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Initial metric selection.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum InitialSpec {
    /// The Fubini-Study reference metric.
    FubiniStudy,
    /// Explicit perturbation `u = amplitude * sum c_k sin(k pi y)`.
    Perturbed {
        amplitude: f64,
        /// List of `[mode, coefficient]` pairs.
        modes: Vec<(usize, f64)>,
    },
    /// Seeded random perturbation over modes 1..=n_modes with coefficients
    /// drawn uniformly from [-1, 1] (ChaCha20, driven by `seed`).
    Random {
        amplitude: f64,
        #[serde(default = "default_n_modes")]
        n_modes: usize,
    },
}

fn default_n_modes() -> usize {
    3
}

/// A validated run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(rename = "N")]
    pub n_cells: usize,
    #[serde(default = "default_flow_kind")]
    pub flow_kind: FlowKind,
    #[serde(default = "default_initial")]
    pub initial: InitialSpec,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(rename = "C_cfl", default = "default_c_cfl")]
    pub c_cfl: f64,
    /// Checkpoint every this many samples; 0 disables checkpoints.
    #[serde(default)]
    pub checkpoint_every: usize,
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_ell() -> u32 {
    1
}
fn default_flow_kind() -> FlowKind {
    FlowKind::Krf
}
fn default_initial() -> InitialSpec {
    InitialSpec::FubiniStudy
}
fn default_t_final() -> f64 {
    10.0
}
fn default_sample_dt() -> f64 {
    0.02
}
fn default_stop_tol() -> f64 {
    1e-9
}
fn default_c_cfl() -> f64 {
    0.2
}

impl RunConfig {
    /// Parse and validate a TOML string.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::ParseError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let range = |msg: String| Err(CliError::RangeError(msg));
        if self.n < 1 || self.n > 8 {
            return range(format!("n = {} outside 1..=8", self.n));
        }
        if self.ell < 1 {
            return range("ell must be >= 1".into());
        }
        if self.n_cells < 16 {
            return range(format!("N = {} below the minimum 16", self.n_cells));
        }
        if self.n_cells > 4096 {
            return range(format!("N = {} above the maximum 4096", self.n_cells));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return range(format!("t_final = {} must be positive", self.t_final));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return range(format!("sample_dt = {} must be positive", self.sample_dt));
        }
        if !(self.stop_tol >= 0.0 && self.stop_tol.is_finite()) {
            return range(format!("stop_tol = {} must be nonnegative", self.stop_tol));
        }
        if !(self.c_cfl > 0.0 && self.c_cfl <= 10.0) {
            return range(format!("C_cfl = {} outside (0, 10]", self.c_cfl));
        }
        match &self.initial {
            InitialSpec::Perturbed { amplitude, modes } => {
                if !amplitude.is_finite() {
                    return range("initial.amplitude must be finite".into());
                }
                if modes.is_empty() || modes.iter().any(|&(k, _)| k == 0 || k > 16) {
                    return range("initial.modes must be nonempty with 1 <= mode <= 16".into());
                }
            }
            InitialSpec::Random { amplitude, n_modes } => {
                if !amplitude.is_finite() {
                    return range("initial.amplitude must be finite".into());
                }
                if *n_modes == 0 || *n_modes > 16 {
                    return range("initial.n_modes outside 1..=16".into());
                }
            }
            InitialSpec::FubiniStudy => {}
        }
        Ok(())
    }
}

/// Read and parse a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n = 1\nN = 64\noutput_dir = \"out\"\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.ell, 1);
        assert_eq!(cfg.flow_kind, FlowKind::Krf);
        assert_eq!(cfg.initial, InitialSpec::FubiniStudy);
        assert_eq!(cfg.t_final, 10.0);
        assert_eq!(cfg.sample_dt, 0.02);
        assert_eq!(cfg.c_cfl, 0.2);
        assert_eq!(cfg.checkpoint_every, 0);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_key_is_parse_error_naming_the_key() {
        let text = format!("{MINIMAL}flowkind = \"krf\"\n");
        match RunConfig::from_toml(&text) {
            Err(CliError::ParseError(msg)) => {
                assert!(msg.contains("flowkind"), "message: {msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_n_is_range_error() {
        let text = "n = 1\nN = 4\noutput_dir = \"out\"\n";
        assert!(matches!(RunConfig::from_toml(text), Err(CliError::RangeError(_))));
    }

    #[test]
    fn round_trip_through_toml() {
        let text = format!(
            "{MINIMAL}seed = 9\n[initial]\nkind = \"perturbed\"\namplitude = 0.1\nmodes = [[1, 1.0], [2, -0.5]]\n"
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        let echoed = toml::to_string(&cfg).unwrap();
        let cfg2 = RunConfig::from_toml(&echoed).unwrap();
        assert_eq!(cfg, cfg2);
    }
}
