use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdi_cli::verify::{self, Level};
use pdi_cli::{cmd_image, cmd_simulate_with_fields, cmd_sweep_alpha, exit_code, load_config, Overrides};
use pdi_core::Result;

/// Synthetic near-field data and differential sampling images of local
/// defects in periodic layers.
#[derive(Parser)]
#[command(name = "pdi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Solver grid, overriding `[solver] nx, ny`.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
    /// Relative GMRES tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Noise level applied to the data before imaging.
    #[arg(long)]
    delta: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Regularization parameter α₀.
    #[arg(long)]
    alpha0: Option<f64>,
    /// Floquet-Bloch mode of the differential indicator.
    #[arg(long)]
    q: Option<i64>,
    /// Sampling spacing in wavelengths.
    #[arg(long)]
    sampling_res: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            grid: self.grid.as_ref().map(|g| (g[0], g[1])),
            tol: self.tol,
            delta: self.delta,
            seed: self.seed,
            alpha0: self.alpha0,
            q: self.q,
            sampling_res: self.sampling_res,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problems and write the near-field matrices.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Skip the defect-free reference data.
        #[arg(long)]
        skip_periodic: bool,
        /// Also dump the scattered field of the up-going incidence with
        /// this mode number (repeatable).
        #[arg(long = "dump-field", value_name = "J", allow_negative_numbers = true)]
        dump_field: Vec<i64>,
    },
    /// Image the defect from previously simulated data.
    Image {
        #[command(flatten)]
        common: Common,
        /// Directory holding `perturbed_top.dat` and `perturbed_bottom.dat`
        /// (defaults to `--out`).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the oracle checks and print one line per check.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
    },
    /// Image at several regularization parameters.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        /// Directory holding the perturbed data (defaults to `--out`).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated α₀ values.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4, 1e-5])]
        values: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { common, skip_periodic, dump_field } => {
            let cfg = load_config(&common.config, &common.overrides())?;
            for f in cmd_simulate_with_fields(&cfg, &common.out, skip_periodic, &dump_field)? {
                println!("{}", common.out.join(f).display());
            }
        }
        Command::Image { common, data } => {
            let cfg = load_config(&common.config, &common.overrides())?;
            let data = data.unwrap_or_else(|| common.out.clone());
            let (map, files) = cmd_image(&cfg, &data, &common.out)?;
            let (lo, hi) = map.min_max();
            log::info!("indicator range [{lo:.3e}, {hi:.3e}]");
            for f in files {
                println!("{}", common.out.join(f).display());
            }
        }
        Command::Verify { level } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let checks = verify::run(level, |c| println!("{c}"))?;
            if checks.iter().any(|c| !c.passed()) {
                return Ok(1);
            }
        }
        Command::SweepAlpha { common, data, values } => {
            let cfg = load_config(&common.config, &common.overrides())?;
            let data = data.unwrap_or_else(|| common.out.clone());
            let (rows, _) = cmd_sweep_alpha(&cfg, &data, &common.out, &values)?;
            for r in rows {
                println!(
                    "alpha0 {:.1e} max {:.3e} argmax ({:.3}, {:.3}) cell {}",
                    r.alpha0, r.max, r.argmax[0], r.argmax[1], r.argmax_cell
                );
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = std::env::var("PDI_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot set thread count: {e}");
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
