//! `vrf-sentinel` command-line entry point.
//!
//! Every subcommand writes its artifacts into `--out` together with a
//! `manifest.json` recording the resolved arguments, the seed and SHA-256
//! hashes of inputs and outputs. `replay` reruns a manifest.

mod args;
mod commands;
mod logging;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use vrf_sentinel::{Error, Result};

use args::{Cli, Command, ReplayArgs};
use commands::Run;
use manifest::{hash_inputs, hash_outputs, Manifest};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(p)?)
}

/// Makes paths absolute and checks the inputs exist.
fn resolve(command: &mut Command) -> Result<Vec<PathBuf>> {
    let out = absolute(command.out_mut())?;
    *command.out_mut() = out;
    let mut inputs = Vec::new();
    for p in command.inputs_mut() {
        *p = absolute(p)?;
        if !p.exists() {
            return Err(Error::Config(format!("input {} does not exist", p.display())));
        }
        inputs.push(p.clone());
    }
    Ok(inputs)
}

fn run(mut command: Command, seed: u64) -> Result<Manifest> {
    let inputs = resolve(&mut command)?;
    let input_hashes = hash_inputs(&inputs)?;
    let out = command.out_mut().clone();
    std::fs::create_dir_all(&out)?;
    logging::take_warnings();
    let mut ctx = Run {
        out: out.clone(),
        seed,
        converged: None,
    };
    commands::execute(&command, &mut ctx)?;
    let manifest = Manifest {
        tool: env!("CARGO_BIN_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: command.name().into(),
        seed,
        log_level: logging::level(),
        config: command,
        inputs: input_hashes,
        outputs: hash_outputs(&out)?,
        warnings: logging::take_warnings(),
        converged: ctx.converged,
    };
    manifest.write(&out)?;
    Ok(manifest)
}

fn replay(a: &ReplayArgs) -> Result<Manifest> {
    let recorded = Manifest::read(&absolute(&a.manifest)?)?;
    let current = hash_inputs(&recorded.inputs.keys().map(PathBuf::from).collect::<Vec<_>>())?;
    let changed: Vec<&String> = recorded
        .inputs
        .iter()
        .filter(|(path, hash)| current.get(*path) != Some(hash))
        .map(|(path, _)| path)
        .collect();
    if !changed.is_empty() {
        return Err(Error::Integrity(format!(
            "input(s) changed since the recorded run: {}",
            changed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let mut command = recorded.config.clone();
    *command.out_mut() = a.out.clone();
    let manifest = run(command, recorded.seed)?;
    if a.check && manifest.outputs != recorded.outputs {
        let differing: Vec<&String> = recorded
            .outputs
            .keys()
            .chain(manifest.outputs.keys())
            .filter(|k| recorded.outputs.get(*k) != manifest.outputs.get(*k))
            .collect();
        return Err(Error::Integrity(format!(
            "replayed outputs differ from the recorded run: {}",
            differing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(manifest)
}

fn main() -> ExitCode {
    logging::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Replay(a) => replay(a),
        command => run(command.clone(), cli.seed),
    };
    match result {
        Ok(manifest) => {
            if manifest.converged == Some(false) {
                eprintln!("warning: a detector did not converge (recorded in the manifest)");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
