//! Run orchestration: builds the initial state from a configuration,
//! drives the flow engine, and emits all artifacts.

use crate::config::{InitialSpec, RunConfig};
use crate::error::CliError;
use crate::flow::{FlowParams, Runner, Termination};
use crate::geometry::ClassData;
use crate::output::{self, Headline, RunManifest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

/// Environment variable prefixing `output_dir` when set.
pub const OUTPUT_ROOT_ENV: &str = "KRFLOW_OUTPUT_ROOT";

fn now_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Resolves the output directory, honoring the output-root override.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var(OUTPUT_ROOT_ENV) {
        Ok(root) if !root.is_empty() => PathBuf::from(root).join(&config.output_dir),
        _ => PathBuf::from(&config.output_dir),
    }
}

/// The initial potential prescribed by the configuration.
pub fn initial_phi(config: &RunConfig) -> Vec<f64> {
    let n_nodes = config.n_cells + 1;
    let ys: Vec<f64> = (0..n_nodes).map(|i| i as f64 / config.n_cells as f64).collect();
    let modes: Vec<(usize, f64)> = match &config.initial {
        InitialSpec::FubiniStudy => return vec![0.0; n_nodes],
        InitialSpec::Perturbed { modes, .. } => modes.clone(),
        InitialSpec::Random { n_modes, .. } => {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            (1..=*n_modes).map(|k| (k, rng.gen_range(-1.0..1.0))).collect()
        }
    };
    let amplitude = match &config.initial {
        InitialSpec::Perturbed { amplitude, .. } | InitialSpec::Random { amplitude, .. } => *amplitude,
        InitialSpec::FubiniStudy => 0.0,
    };
    ys.iter()
        .map(|&y| amplitude * modes.iter().map(|&(k, c)| c * (k as f64 * PI * y).sin()).sum::<f64>())
        .collect()
}

/// Flow parameters derived from a configuration.
pub fn flow_params(config: &RunConfig) -> FlowParams {
    FlowParams {
        class: ClassData::new(config.n, config.ell),
        n_cells: config.n_cells,
        kind: config.flow_kind,
        t_final: config.t_final,
        sample_dt: config.sample_dt,
        stop_tol: config.stop_tol,
        c_cfl: config.c_cfl,
        checkpoint_every: config.checkpoint_every,
    }
}

/// Executes a run end to end. The manifest is always written once the
/// output directory exists; a hard flow error is reflected both in the
/// manifest and in the returned error.
pub fn execute(config: &RunConfig) -> Result<(), CliError> {
    let dir = output_dir(config);
    std::fs::create_dir_all(&dir)?;
    // Probe writability before doing any work, so an unwritable target
    // fails cleanly with no partial manifest.
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"")?;
    let _ = std::fs::remove_file(&probe);

    let start_time = now_seconds();
    let runner = Runner::new(flow_params(config))?;
    let phi0 = initial_phi(config);
    let result = runner.run(phi0)?;

    let files = output::emit_series(config.n, &result.records, &result.checkpoints, &dir)?;
    let last = result.records.last();
    let manifest = RunManifest {
        config: serde_json::to_value(config).expect("config serializes"),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        start_time,
        end_time: now_seconds(),
        termination: output::termination_value(&result.termination),
        files,
        headline: Headline {
            final_e1: last.map(|r| r.e[1.min(config.n)]),
            final_pinch: last.map(|r| r.pinch),
            alpha: result.alpha,
        },
        steps_taken: result.steps_taken,
    };
    output::write_manifest(&manifest, &dir)?;

    if let Termination::Error(msg) = &result.termination {
        return Err(CliError::Other(format!("run terminated with error: {msg}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_phi_deterministic_per_seed() {
        let text = "n = 1\nN = 64\noutput_dir = \"out\"\nseed = 11\n[initial]\nkind = \"random\"\namplitude = 0.05\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        let a = initial_phi(&cfg);
        let b = initial_phi(&cfg);
        assert_eq!(a, b);
        let cfg2 = RunConfig::from_toml(&text.replace("seed = 11", "seed = 12")).unwrap();
        assert_ne!(a, initial_phi(&cfg2));
    }

    #[test]
    fn fs_config_converges_and_writes_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("fsrun");
        let text = format!(
            "n = 1\nN = 64\noutput_dir = {:?}\nstop_tol = 1e-9\n",
            out.to_str().unwrap()
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        execute(&cfg).unwrap();
        let (manifest, mismatches) = output::verify_manifest(&out).unwrap();
        assert!(mismatches.is_empty(), "{mismatches:?}");
        assert_eq!(manifest.termination, serde_json::json!("converged"));
    }
}
