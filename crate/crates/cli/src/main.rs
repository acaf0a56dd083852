//! `steadyctl`: compute optimal steady states of disturbed LTI systems,
//! synthesize the disturbance-aware and disturbance-independent controllers,
//! simulate the closed loops, and compare analytic transient costs against
//! simulation. All numeric output is printed with 9 significant digits and
//! every CSV carries a `# config-hash:` line binding it to its inputs.

mod commands;
mod config;
mod output;

use clap::Parser;

use crate::config::Cli;

fn main() {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
