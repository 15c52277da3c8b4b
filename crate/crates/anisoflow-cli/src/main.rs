//! Command-line front end: shape generation, tensor building, flows,
//! ROF solves, spectral decomposition and filtering, eigenfunction
//! tests and sweeps, depth inpainting and guided fusion. Every command
//! writes its outputs plus a deterministic JSON run manifest.

mod commands;
mod imageio;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisoflow", version, about = "Adaptive anisotropic TV toolkit")]
struct Cli {
    /// Worker thread cap (also ANISOFLOW_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Optional JSON config supplying defaults for omitted flags.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a synthetic shape and report its measured geometry.
    Shapes(commands::ShapesArgs),
    /// Build an anisotropy tensor from an image or a mask.
    Tensor(commands::TensorArgs),
    /// Run the gradient flow.
    Flow(commands::FlowArgs),
    /// Solve one ROF problem.
    Rof(commands::RofArgs),
    /// Spectral transform: decompose, filter, spectrum.
    #[command(subcommand)]
    Spectral(commands::SpectralCmd),
    /// Eigenfunction diagnostics: test one shape or sweep ellipses.
    #[command(subcommand)]
    Eigen(commands::EigenCmd),
    /// Guided depth inpainting.
    Inpaint(commands::InpaintArgs),
    /// Guided functional/structural fusion.
    Fuse(commands::FuseArgs),
}

fn main() {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("ANISOFLOW_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let config = match cli.config.as_deref().map(commands::Config::load) {
        None => commands::Config::default(),
        Some(Ok(cfg)) => cfg,
        Some(Err(err)) => exit_usage(&err),
    };

    let result = match cli.command {
        Command::Shapes(args) => commands::run_shapes(args, &config),
        Command::Tensor(args) => commands::run_tensor(args, &config),
        Command::Flow(args) => commands::run_flow(args, &config),
        Command::Rof(args) => commands::run_rof(args, &config),
        Command::Spectral(cmd) => commands::run_spectral(cmd, &config),
        Command::Eigen(cmd) => commands::run_eigen(cmd, &config),
        Command::Inpaint(args) => commands::run_inpaint(args, &config),
        Command::Fuse(args) => commands::run_fuse(args, &config),
    };

    match result {
        Ok(()) => {}
        Err(err) => match err.downcast_ref::<commands::NumericalFailure>() {
            Some(_) => exit_numerical(&err),
            None => exit_usage(&err),
        },
    }
}

fn exit_usage(err: &anyhow::Error) -> ! {
    eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
    std::process::exit(2);
}

fn exit_numerical(err: &anyhow::Error) -> ! {
    eprintln!("{}", serde_json::json!({ "error": format!("{err:#}"), "kind": "numerical" }));
    std::process::exit(3);
}
