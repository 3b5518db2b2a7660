use std::path::PathBuf;
use std::process::ExitCode;

use caplab_core::Error;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::Params;

#[derive(Parser)]
#[command(name = "caplab", version, about = "Cap lengths, Fourier decay and maximal averages for convex curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Domain, k_circ and b for a graph curve; samples of γ, γ', γ'', h.
    CurveInfo(Run),
    /// Cap lengths Λ(θ, δ) over a direction grid.
    Caps(Run),
    /// |σ̂(Rθ)|/Λ(θ, 1/R) over directions and radii.
    Ft(Run),
    /// The cap-integral decision and its verdict.
    Criterion(Run),
    /// Dyadic partition for one k and the w_k t_kn scan.
    Partition(Run),
    /// van der Corput scan of the partial multipliers.
    Vdc(Run),
    /// Lower bound for the lacunary maximal operator norm on a grid.
    GridMax(Run),
    /// Thin-strip lower-bound test.
    Strip(Run),
    /// Weighted square function over a seeded ensemble.
    Squarefn(Run),
    /// Growth of the hyperbolic-cross maximal probe.
    Hyperbolic(Run),
}

#[derive(clap::Args)]
struct Run {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

impl Command {
    fn parts(&self) -> (&'static str, &Run) {
        match self {
            Command::CurveInfo(r) => ("curve-info", r),
            Command::Caps(r) => ("caps", r),
            Command::Ft(r) => ("ft", r),
            Command::Criterion(r) => ("criterion", r),
            Command::Partition(r) => ("partition", r),
            Command::Vdc(r) => ("vdc", r),
            Command::GridMax(r) => ("grid-max", r),
            Command::Strip(r) => ("strip", r),
            Command::Squarefn(r) => ("squarefn", r),
            Command::Hyperbolic(r) => ("hyperbolic", r),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } | Error::Estimation(_) => 3,
        _ => 2,
    }
}

fn run(cmd: &Command) -> Result<commands::Outcome, Error> {
    let (name, r) = cmd.parts();
    let params = match &r.config {
        Some(path) => Params::from_file(path)?.overlay(&r.params),
        None => r.params.clone(),
    };
    if let Some(c) = &params.command {
        if c != name {
            return Err(Error::Format(format!("config is for `{c}`, not `{name}`")));
        }
    }
    match name {
        "curve-info" => commands::curve_info(&params),
        "caps" => commands::caps(&params),
        "ft" => commands::ft(&params),
        "criterion" => commands::criterion(&params),
        "partition" => commands::partition(&params),
        "vdc" => commands::vdc(&params),
        "grid-max" => commands::grid_max(&params),
        "strip" => commands::strip(&params),
        "squarefn" => commands::squarefn(&params),
        _ => commands::hyperbolic(&params),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("CAPLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli.command) {
        Ok(out) => {
            println!("{}", out.line);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
