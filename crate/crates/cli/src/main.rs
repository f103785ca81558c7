use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sidechan_cli::{
    cmd_analyze, cmd_keyrate, cmd_simulate, parse_direction, parse_method, parse_parameter, AnalyzeArgs, CliError,
    KeyRateArgs, SimulateArgs, Source, Sweep, EXIT_VALIDATION,
};
use sidechan_core::leakage::{EstimatorOptions, DEFAULT_CELL_BUDGET};
use sidechan_core::synth::DEFAULT_MC_BINS;

#[derive(Parser)]
#[command(name = "sidechan", version, about = "Side-channel leakage analysis for four-diode BB84 transmitters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for Monte-Carlo estimates.
    #[arg(long, default_value_t = 0)]
    mc_seed: u64,
    /// Samples per Monte-Carlo estimate.
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    /// Also compute the joint leakage assuming independent parameters.
    #[arg(long)]
    joint: bool,
    /// Upper bound on joint-grid cells.
    #[arg(long, env = "SIDECHAN_CELL_BUDGET", default_value_t = DEFAULT_CELL_BUDGET)]
    cell_budget: u64,
}

impl Common {
    fn estimator(&self) -> EstimatorOptions {
        EstimatorOptions {
            mc_samples: self.mc_samples,
            mc_bins: DEFAULT_MC_BINS,
            seed: self.mc_seed,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a measured ensemble described by a manifest.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        /// Parameter to analyze (repeatable): wavelength, pulse, arrival, spatial.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Method (repeatable): exact, eq8, guessing, mc.
        #[arg(long = "method")]
        methods: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Analyze a synthetic preset, optionally sweeping an offset or pixel size.
    Simulate {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        seed: u64,
        /// `param:lo:hi:steps` (offset in axis units) or `pixel:f1,f2,...`.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long = "method")]
        methods: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Write the rendered ensemble and its manifest under `<out>/ensemble`.
        #[arg(long)]
        export: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Secret key rate bound after subtracting the exact leakage budget.
    Keyrate {
        #[arg(long)]
        qber: f64,
        #[arg(long, conflicts_with_all = ["preset", "seed"], required_unless_present = "preset")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "seed")]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// dr (direct) or rr (reverse, needs --i-be).
        #[arg(long, default_value = "dr")]
        direction: String,
        /// Bob-Eve information for reverse reconciliation.
        #[arg(long)]
        i_be: Option<f64>,
        #[arg(long, env = "SIDECHAN_CELL_BUDGET", default_value_t = DEFAULT_CELL_BUDGET)]
        cell_budget: u64,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze { manifest, params, methods, out, common } => {
            let mut args = AnalyzeArgs::new(manifest, out);
            args.parameters = params.iter().map(|p| parse_parameter(p)).collect::<Result<_, _>>()?;
            args.methods = methods.iter().map(|m| parse_method(m)).collect::<Result<_, _>>()?;
            args.joint = common.joint;
            args.estimator = common.estimator();
            args.cell_budget = common.cell_budget;
            let report = cmd_analyze(&args)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            println!("budget {:e} bits/pulse -> {}", report.budget.total, args.out.display());
            Ok(0)
        }
        Command::Simulate { preset, seed, sweep, methods, out, export, common } => {
            let mut args = SimulateArgs::new(preset, seed, out);
            args.sweep = sweep.as_deref().map(Sweep::parse).transpose()?;
            args.methods = methods.iter().map(|m| parse_method(m)).collect::<Result<_, _>>()?;
            args.export = export;
            args.joint = common.joint;
            args.estimator = common.estimator();
            args.cell_budget = common.cell_budget;
            let summary = cmd_simulate(&args)?;
            println!("budget {:e} bits/pulse -> {}", summary.report.budget.total, args.out_dir.display());
            Ok(0)
        }
        Command::Keyrate { qber, manifest, preset, seed, direction, i_be, cell_budget } => {
            let source = match (manifest, preset, seed) {
                (Some(m), _, _) => Source::Manifest(m),
                (None, Some(name), Some(seed)) => Source::Preset { name, seed },
                _ => return Err(CliError::Usage("need --manifest or --preset with --seed".into())),
            };
            let mut args = KeyRateArgs::new(qber, source);
            args.direction = parse_direction(&direction)?;
            args.i_be = i_be;
            args.cell_budget = cell_budget;
            let outcome = cmd_keyrate(&args)?;
            println!("i_ab {}", outcome.i_ab);
            println!("i_ae {}", outcome.i_ae);
            println!("r {}", outcome.rate);
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
