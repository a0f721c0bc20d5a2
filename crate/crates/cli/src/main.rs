use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use phsoc::C64;
use phsoc_cli::{
    cmd_analyze, cmd_demo, cmd_regularize, cmd_solve, parse_complex, DemoParams, Flags, EXIT_INPUT,
};

/// Minimal energy supply transfer for linear port-Hamiltonian systems.
#[derive(Debug, Parser)]
#[command(name = "phsoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Relative rank tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Number of sampled frequencies.
    #[arg(long = "omega-grid")]
    omega_grid: Option<usize>,

    /// Write the machine-readable result to this path.
    #[arg(long = "json-out")]
    json_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide regularity and the Kronecker index of the optimality pencil.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the rank-minimal regularising cost weight.
    Regularize {
        file: PathBuf,
        /// Multiply the weight by this positive factor.
        #[arg(long)]
        scale: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the boundary value problem given in the file's `bvp` block.
    Solve {
        file: PathBuf,
        /// Shift, `re` or `re,im`.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        mu: Option<C64>,
        /// Number of time samples.
        #[arg(long)]
        grid: Option<usize>,
        /// Write the trajectory CSV to this path.
        #[arg(long = "csv-out")]
        csv_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Emit a built-in model: mech, heat, ex52 or ex53.
    Demo {
        name: String,
        /// Heat rod nodes.
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Heat conductivity.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Mechanical degrees of freedom.
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Mechanical damping.
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long = "json-out")]
        json_out: Option<PathBuf>,
    },
}

fn flags(common: Common) -> Flags {
    Flags {
        tol: common.tol,
        omega_grid: common.omega_grid,
        json_out: common.json_out,
        ..Flags::default()
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Analyze { file, common } => cmd_analyze(&file, &flags(common)),
        Command::Regularize {
            file,
            scale,
            common,
        } => cmd_regularize(
            &file,
            &Flags {
                scale,
                ..flags(common)
            },
        ),
        Command::Solve {
            file,
            mu,
            grid,
            csv_out,
            common,
        } => cmd_solve(
            &file,
            &Flags {
                mu,
                grid,
                csv_out,
                ..flags(common)
            },
        ),
        Command::Demo {
            name,
            n,
            kappa,
            l,
            d,
            json_out,
        } => cmd_demo(
            &name,
            &DemoParams { n, kappa, l, d },
            &Flags {
                json_out,
                ..Flags::default()
            },
        ),
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.text);
            std::process::exit(outcome.code);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code);
        }
    }
}
