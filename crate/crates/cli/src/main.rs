use std::path::PathBuf;

use clap::Parser;

use toda_forge::{execute, Overrides};

/// Build and verify explicit Toda field theory solutions from a JSON job file.
#[derive(Debug, Parser)]
#[command(name = "toda-forge", version)]
struct Args {
    /// JSON job configuration
    #[arg(long)]
    config: PathBuf,
    /// Output path (overrides `out` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Residual tolerance (overrides `tol`)
    #[arg(long)]
    tol: Option<f64>,
    /// Random seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results are assembled in grid order either way
    #[arg(long, env = "TODA_FORGE_JOBS", default_value_t = 1)]
    jobs: usize,
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { toda_forge::EXIT_CONFIG } else { toda_forge::EXIT_PASS };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let o = Overrides { out: args.out, tol: args.tol, seed: args.seed, jobs: args.jobs };
    std::process::exit(execute(&args.config, &o));
}
