use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jps_core::experiment::{evaluate_selection_file, export_dataset, run_experiment, Context, Experiment};
use jps_core::precoder::RateReport;
use jps_core::{Result, RunConfig};

#[derive(Parser)]
#[command(name = "simulate", version, about = "Port-selection CSI acquisition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (`section.key = value` lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run seed; overrides `system.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo realizations per evaluation; overrides `sim.n_real`.
    #[arg(long)]
    n_real: Option<usize>,
    /// Scenario drops per sweep point; overrides `sim.n_scen`.
    #[arg(long)]
    n_scen: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic and Monte Carlo sum rate versus P for each CSI error level.
    AnalyticVsMc(Common),
    /// Sum rate over the rho_s / rho_c grid.
    RateVsCorrelation(Common),
    /// GS-JPS versus MM-S versus exhaustive search.
    SelectionCompare(Common),
    /// S1/S2 feedback rates and the CR1 CCDF.
    Compression(Common),
    /// Rates of externally produced selections.
    DlEval {
        #[command(flatten)]
        common: Common,
        /// JSON lines with `{"sample": i, "selection": {...}}`.
        #[arg(long)]
        selections: PathBuf,
    },
    /// Export GS-JPS-labelled samples as JSON lines.
    ExportDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        n_samples: usize,
        /// Output file; defaults to `<out>/dataset.jsonl`.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// GS-JPS selection of one scenario, written as selection JSON.
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        scenario_index: usize,
    },
    /// Analytic and Monte Carlo rates of a selection JSON file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long, default_value_t = 0)]
        scenario_index: usize,
    },
    /// Port powers and correlation matrices of one scenario.
    DumpScenario {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        scenario_index: usize,
    },
}

fn context(c: &Common) -> Result<Context> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = c.n_real {
        cfg.sim.n_real = n;
    }
    if let Some(n) = c.n_scen {
        cfg.sim.n_scen = n;
    }
    Ok(Context::new(cfg, c.seed, &c.out))
}

fn print_report(r: &RateReport) {
    println!("{}", RateReport::csv_header(r.per_user_rate.len()));
    println!("{}", r.csv_row());
}

fn run(cli: Cli) -> Result<()> {
    let experiment = |e: Experiment, common: &Common| -> Result<()> {
        for f in run_experiment(e, &context(common)?)? {
            println!("{}", f.display());
        }
        Ok(())
    };
    match cli.command {
        Command::AnalyticVsMc(c) => experiment(Experiment::AnalyticVsMc, &c),
        Command::RateVsCorrelation(c) => experiment(Experiment::RateVsCorrelation, &c),
        Command::SelectionCompare(c) => experiment(Experiment::SelectionCompare, &c),
        Command::Compression(c) => experiment(Experiment::Compression, &c),
        Command::DlEval { common, selections } => {
            let mut ctx = context(&common)?;
            ctx.selections = Some(selections);
            for f in run_experiment(Experiment::DlEval, &ctx)? {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::ExportDataset { common, n_samples, file } => {
            let ctx = context(&common)?;
            let path = file.unwrap_or_else(|| ctx.out_dir.join("dataset.jsonl"));
            let n = export_dataset(&ctx, n_samples, &path)?;
            println!("{} ({n} samples)", path.display());
            Ok(())
        }
        Command::Select { common, scenario_index } => {
            let ctx = context(&common)?;
            let cfg = &ctx.cfg;
            let sc = ctx.scenario(&cfg.system, scenario_index)?;
            let model = ctx.model(&sc, cfg.system.eps2())?;
            let counts = ctx.counts(cfg.selection.ports_per_user, cfg.system.n_bs)?;
            let gs = ctx.gs(&model, &counts, scenario_index)?;
            std::fs::create_dir_all(&ctx.out_dir)?;
            let path = ctx.out_dir.join(format!("selection_{scenario_index}.json"));
            std::fs::write(&path, gs.selection.to_json()?)?;
            println!("{} sum_rate={}", path.display(), gs.sum_rate);
            Ok(())
        }
        Command::Evaluate { common, selection, scenario_index } => {
            let ctx = context(&common)?;
            let text = std::fs::read_to_string(&selection)?;
            let (analytic, mc) = evaluate_selection_file(&ctx, &text, scenario_index)?;
            print_report(&analytic);
            println!("{}", mc.csv_row());
            Ok(())
        }
        Command::DumpScenario { common, scenario_index } => {
            let ctx = context(&common)?;
            let sc = ctx.scenario(&ctx.cfg.system, scenario_index)?;
            std::fs::create_dir_all(&ctx.out_dir)?;
            let csv = ctx.out_dir.join(format!("scenario_{scenario_index}.csv"));
            sc.stats.write_csv(std::fs::File::create(&csv)?)?;
            let json = ctx.out_dir.join(format!("scenario_{scenario_index}_correlation.json"));
            sc.stats.write_correlation_json(std::fs::File::create(&json)?)?;
            println!("{}\n{}", csv.display(), json.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
