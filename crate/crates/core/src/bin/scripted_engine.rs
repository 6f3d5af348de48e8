//! Reference engine process speaking the JSON-lines analysis protocol,
//! backed by the deterministic scripted evaluator.
//!
//! Flags: `--black-perspective` reports win rates for black;
//! `--fault <kind>` with `--fault-after <n>` simulates misbehavior
//! (`wrong-id`, `garbage`, `hang`, `exit`, `refuse`).

use std::io;
use std::process::ExitCode;

use gogap::engine::protocol::{serve, Fault, ServeOptions};
use gogap::engine::{Perspective, ScriptedEngine};

fn main() -> ExitCode {
    let mut opts = ServeOptions::default();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--black-perspective" => opts.perspective = Perspective::Black,
            "--fault" => match args.next().as_deref().and_then(Fault::parse) {
                Some(f) => opts.fault = f,
                None => {
                    eprintln!("unknown fault");
                    return ExitCode::from(2);
                }
            },
            "--fault-after" => match args.next().and_then(|n| n.parse().ok()) {
                Some(n) => opts.fault_after = n,
                None => {
                    eprintln!("--fault-after needs a number");
                    return ExitCode::from(2);
                }
            },
            other => {
                eprintln!("unknown argument {other}");
                return ExitCode::from(2);
            }
        }
    }
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    match serve(&mut ScriptedEngine::new(), stdin, stdout, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
