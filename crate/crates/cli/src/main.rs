//! Command-line diagnostics for signature-changing metrics.
//!
//! Exit codes: 0 = all verdicts pass, 1 = an analytic verdict failed,
//! 2 = usage or schema error.

mod commands;
mod output;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sigchange",
    about = "Diagnostics and normal-coordinate construction for metrics that change signature across a hypersurface",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List builtin spaces or write one as a JSON space file.
    Catalog(commands::catalog::Args),
    /// Run transversality diagnostics at singular samples of a space.
    Check(commands::check::Args),
    /// Sample the smooth-root integral transform and probe its smoothness.
    Baldomero(commands::baldomero::Args),
    /// Integrate a geodesic and report pregeodesic residuals.
    Geodesic(commands::geodesic::Args),
    /// Build and verify normal coordinates for a radical field.
    Normalize(commands::normalize::Args),
}

fn main() {
    // die quietly when the downstream pipe closes (e.g. `sigchange ... | head`)
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Catalog(args) => commands::catalog::run(&args),
        Command::Check(args) => commands::check::run(&args),
        Command::Baldomero(args) => commands::baldomero::run(&args),
        Command::Geodesic(args) => commands::geodesic::run(&args),
        Command::Normalize(args) => commands::normalize::run(&args),
    };
    std::process::exit(code);
}
