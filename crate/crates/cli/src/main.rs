//! `shellforge` command-line tool.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 when a stage fails.
//! Every command that gets past argument parsing leaves a JSON report with
//! its resolved configuration in the output directory, failed or not.

mod args;
mod geometry;
mod gestures;
mod run;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, GestureCommand};
use run::{Failure, Run};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    panic::set_hook(Box::new(|info| {
        eprintln!("shellforge: internal error: {info}");
    }));
    let mut run = Run::new(&cli.global, cli.command.name());
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| dispatch(&mut run, &cli.command)))
        .unwrap_or_else(|_| Err(Failure::new("internal", "unexpected internal error; see the message above")));
    run.finish(outcome)
}

fn dispatch(run: &mut Run, command: &Command) -> Result<serde_json::Value, Failure> {
    match command {
        Command::Blank(a) => run.with_config(a, |r| geometry::blank(r, a)),
        Command::Bracket(a) => run.with_config(a, |r| geometry::bracket(r, a)),
        Command::Validate(a) => run.with_config(a, |r| geometry::validate(r, a)),
        Command::Shell(a) => run.with_config(a, |r| geometry::shell(r, a)),
        Command::Split(a) => run.with_config(a, |r| geometry::split(r, a)),
        Command::Place(a) => run.with_config(a, |r| geometry::place(r, a)),
        Command::Fasten(a) => run.with_config(a, |r| geometry::fasten(r, a)),
        Command::Pipeline(a) => run.with_config(a, |r| geometry::pipeline(r, a)),
        Command::Gesture(g) => match g {
            GestureCommand::Synth(a) => run.with_config(a, |r| gestures::synth(r, a)),
            GestureCommand::Train(a) => run.with_config(a, |r| gestures::train(r, a)),
            GestureCommand::Eval(a) => run.with_config(a, |r| gestures::eval(r, a)),
            GestureCommand::Classify(a) => run.with_config(a, |r| gestures::classify(r, a)),
            GestureCommand::Check(a) => run.with_config(a, |r| gestures::check(r, a)),
        },
    }
}
