//! Batch CLI: `krflow run <config>`, `krflow inspect <manifest-dir>`,
//! `krflow oracle <point-spec>` (debug single-point evaluation).
//!
//! Exit codes: 0 success, 2 config parse error, 3 config range error,
//! 4 flow/numerics failure, 5 I/O failure.

use clap::{Parser, Subcommand};
use krflow::error::CliError;
use krflow::geometry::RadialProfile;
use krflow::oracle::{self, PointChart};
use krflow::{config, output, run};
use nalgebra::Complex;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "krflow", version, about = "Radial Kahler-Ricci flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run described by a TOML configuration file.
    Run { config: PathBuf },
    /// Summarize a run directory and verify its manifest digests.
    Inspect { dir: PathBuf },
    /// Evaluate the coordinate oracle at a single chart point (debug).
    Oracle {
        /// Point as comma-separated re:im pairs, e.g. "0.5:0.0,0.1:-0.2".
        point: String,
        /// Complex dimension (defaults to the number of coordinates given).
        #[arg(long)]
        n: Option<usize>,
        /// Finite-difference step.
        #[arg(long, default_value_t = 0.03)]
        step: f64,
        /// Profile text file supplying a radial potential (default: FS).
        #[arg(long)]
        profile: Option<PathBuf>,
    },
}

fn parse_point(spec: &str) -> Result<Vec<Complex<f64>>, CliError> {
    spec.split(',')
        .map(|pair| {
            let mut it = pair.split(':');
            let re: f64 = it
                .next()
                .ok_or_else(|| CliError::ParseError("empty coordinate".into()))?
                .trim()
                .parse()
                .map_err(|e| CliError::ParseError(format!("bad coordinate: {e}")))?;
            let im: f64 = match it.next() {
                Some(s) => s
                    .trim()
                    .parse()
                    .map_err(|e| CliError::ParseError(format!("bad coordinate: {e}")))?,
                None => 0.0,
            };
            Ok(Complex::new(re, im))
        })
        .collect()
}

fn oracle_command(
    point: &str,
    n: Option<usize>,
    step: f64,
    profile: Option<&PathBuf>,
) -> Result<(), CliError> {
    let z = parse_point(point)?;
    let n = n.unwrap_or(z.len());
    if n != z.len() {
        return Err(CliError::RangeError(format!(
            "point has {} coordinates but n = {n}",
            z.len()
        )));
    }
    let pt = PointChart::new(z).map_err(|e| CliError::Other(e.to_string()))?;
    let tensor; // keep both potential closures alive to the end
    let sigma;
    if let Some(path) = profile {
        let text = std::fs::read_to_string(path)?;
        let p = RadialProfile::from_text(&text).map_err(|e| CliError::Other(e.to_string()))?;
        if p.class().n != n {
            return Err(CliError::RangeError(format!(
                "profile has n = {}, point has n = {n}",
                p.class().n
            )));
        }
        let grid = p.grid().clone();
        let u = p.u().to_vec();
        let potential = oracle::radial_potential(n, move |y| grid.interp(&u, y));
        tensor = oracle::oracle_curvature_at(&potential, &pt, step)
            .map_err(|e| CliError::Other(e.to_string()))?;
        sigma = oracle::oracle_sigma_at(&potential, &pt, step)
            .map_err(|e| CliError::Other(e.to_string()))?;
    } else {
        let potential = oracle::fs_potential(n);
        tensor = oracle::oracle_curvature_at(&potential, &pt, step)
            .map_err(|e| CliError::Other(e.to_string()))?;
        sigma = oracle::oracle_sigma_at(&potential, &pt, step)
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    println!("metric g_(i jbar):");
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| format!("{:+.8e}{:+.8e}i", tensor.g[(i, j)].re, tensor.g[(i, j)].im))
            .collect();
        println!("  [{}]", row.join(", "));
    }
    println!("volume density: {:.12e}", tensor.vol);
    println!("scalar curvature: {:.12e}", tensor.scalar);
    let sig: Vec<String> = sigma.iter().map(|v| format!("{v:.10e}")).collect();
    println!("sigma: [{}]", sig.join(", "));
    println!("self-test residual: {:.3e}", tensor.residual);
    Ok(())
}

fn inspect_command(dir: &PathBuf) -> Result<(), CliError> {
    let (manifest, mismatches) = output::verify_manifest(dir)?;
    println!("code version: {}", manifest.code_version);
    println!("termination: {}", manifest.termination);
    println!("steps taken: {}", manifest.steps_taken);
    println!(
        "wall time: {:.1} s",
        (manifest.end_time - manifest.start_time).max(0.0)
    );
    if let Some(v) = manifest.headline.final_e1 {
        println!("final E_1: {v:.12e}");
    }
    if let Some(v) = manifest.headline.final_pinch {
        println!("final pinching deviation: {v:.6e}");
    }
    if let Some(v) = manifest.headline.alpha {
        println!("fitted decay rate alpha: {v:.6e}");
    }
    println!("files:");
    for f in &manifest.files {
        println!("  {}  {}", f.sha256, f.name);
    }
    if mismatches.is_empty() {
        println!("all digests verified");
        Ok(())
    } else {
        for m in &mismatches {
            eprintln!("digest mismatch: {m}");
        }
        Err(CliError::Other("manifest digests do not match".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config: path } => {
            config::parse_config(path).and_then(|cfg| run::execute(&cfg))
        }
        Command::Inspect { dir } => inspect_command(dir),
        Command::Oracle { point, n, step, profile } => {
            oracle_command(point, *n, *step, profile.as_ref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
