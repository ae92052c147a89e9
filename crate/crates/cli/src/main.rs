use clap::{Parser, ValueEnum};
use fracbdsde::config::{RunConfig, Subcommand};
use fracbdsde::run::{execution_from_env, read_config, run_with};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Fbm,
    Girsanov,
    Duality,
    Sde,
    Bdsde,
    Spde,
    All,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Fbm => Subcommand::Fbm,
            Command::Girsanov => Subcommand::Girsanov,
            Command::Duality => Subcommand::Duality,
            Command::Sde => Subcommand::Sde,
            Command::Bdsde => Subcommand::Bdsde,
            Command::Spde => Subcommand::Spde,
            Command::All => Subcommand::All,
        }
    }
}

/// Numerical experiments for BDSDEs driven by fractional Brownian motion.
///
/// Settings come from the defaults, then `--config`, then the flags below.
/// Set FRACBDSDE_WORKERS=1 for a sequential, reproducible run.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Command,
    /// File of `key=value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hurst index in (0, 1/2).
    #[arg(long)]
    hurst: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    paths: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Constant `0.8` or pieces `0.8@0.5,0.4@1`.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    bound_constant: Option<String>,
    /// zero, const:a, linear:f1,f2,f3 or sine:a,f3.
    #[arg(long)]
    driver: Option<String>,
    /// poly:c0,c1,c2.
    #[arg(long)]
    terminal: Option<String>,
    /// affine:b,σ, ou:κ,σ, sine-vol:b,σ,a, heat2:σ or corr2:σ,ρ.
    #[arg(long)]
    coeff: Option<String>,
    #[arg(long)]
    basis_degree: Option<String>,
    /// Half width and point count, `1.5:201`.
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    bpaths: Option<String>,
    #[arg(long)]
    wpaths: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        [
            ("hurst", &self.hurst),
            ("horizon", &self.horizon),
            ("steps", &self.steps),
            ("paths", &self.paths),
            ("seed", &self.seed),
            ("gamma", &self.gamma),
            ("p", &self.p),
            ("bound_constant", &self.bound_constant),
            ("driver", &self.driver),
            ("terminal", &self.terminal),
            ("coeff", &self.coeff),
            ("basis_degree", &self.basis_degree),
            ("lattice", &self.lattice),
            ("bpaths", &self.bpaths),
            ("wpaths", &self.wpaths),
            ("out", &self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(read_config).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let config = match RunConfig::resolve(file.as_deref(), &cli.overrides()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = run_with(cli.command.into(), &config, execution_from_env(), |r| {
        println!("{}", r.status_line());
        println!("{}", r.detail());
    });
    match outcome {
        Ok(o) => {
            println!("manifest: {}", o.manifest.display());
            if o.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
