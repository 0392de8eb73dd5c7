//! Configuration-driven experiment runner, dataset export and selection
//! evaluation.
//!
//! Every CSV starts with `#` comment lines holding the format version, the
//! experiment name, the seed and the fully resolved configuration, followed by
//! any notes about skipped points. The body below is a plain CSV table.

mod dataset;
mod runs;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::analytic::AnalyticModel;
use crate::config::RunConfig;
use crate::error::{Error, Result, SelectionError};
use crate::portsel::{gs_jps, GsJpsResult};
use crate::rng::{derive_seed, stream, Domain};
use crate::scenario::{IndefinitePolicy, Scenario};
use crate::selection::PortSelection;
use crate::SystemConfig;

pub use dataset::{evaluate_selection_file, export_dataset, selection_accuracy, DatasetRecord, DlSelectionRecord, DATASET_FORMAT_VERSION};

/// Version written into every CSV header.
pub const CSV_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    AnalyticVsMc,
    RateVsCorrelation,
    SelectionCompare,
    Compression,
    DlEval,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Self::AnalyticVsMc, Self::RateVsCorrelation, Self::SelectionCompare, Self::Compression, Self::DlEval];

    pub fn name(self) -> &'static str {
        match self {
            Self::AnalyticVsMc => "analytic-vs-mc",
            Self::RateVsCorrelation => "rate-vs-correlation",
            Self::SelectionCompare => "selection-compare",
            Self::Compression => "compression",
            Self::DlEval => "dl-eval",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

/// Resolved inputs shared by all experiments.
#[derive(Debug, Clone)]
pub struct Context {
    /// Configuration with `system.seed` already set to the run seed.
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    /// Selection JSON-lines file consumed by `dl-eval`.
    pub selections: Option<PathBuf>,
}

impl Context {
    pub fn new(mut cfg: RunConfig, seed: Option<u64>, out_dir: impl Into<PathBuf>) -> Self {
        if let Some(s) = seed {
            cfg.system.seed = s;
        }
        Self { cfg, out_dir: out_dir.into(), selections: None }
    }

    pub fn seed(&self) -> u64 {
        self.cfg.system.seed
    }

    /// Scenario `index` of a run: placement stream `index`, so every sweep
    /// point reuses the same drops.
    pub fn scenario(&self, system: &SystemConfig, index: usize) -> Result<Scenario> {
        let mut rng = stream(self.seed(), Domain::Placement, index as u64);
        Scenario::generate(system, self.cfg.sim.min_distance_m, IndefinitePolicy::Reject, &mut rng)
    }

    pub fn model<'a>(&self, sc: &'a Scenario, eps2: f64) -> Result<AnalyticModel<'a>> {
        AnalyticModel::new(&sc.stats, sc.power.per_user.clone(), sc.config.sigma_n2, eps2, self.cfg.analytic.clone())
    }

    /// Per-BS counts for a total budget `ports`.
    pub fn counts(&self, ports: usize, n_bs: usize) -> Result<Vec<usize>> {
        let mut sel = self.cfg.selection.clone();
        if ports != sel.ports_per_user {
            sel.per_bs = None;
        }
        sel.ports_per_user = ports;
        sel.counts(n_bs)
    }

    pub fn gs(&self, model: &AnalyticModel, counts: &[usize], index: usize) -> Result<GsJpsResult> {
        gs_jps(model, counts, self.cfg.selection.n_rand, self.cfg.selection.sweeps, derive_seed(self.seed(), Domain::Selection, index as u64))
    }

    pub fn mc_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed(), Domain::Channel, index as u64)
    }
}

/// A CSV document assembled in memory and written once.
#[derive(Debug, Clone)]
pub struct CsvDoc {
    header: String,
    notes: Vec<String>,
    columns: String,
    rows: Vec<String>,
}

impl CsvDoc {
    pub fn new(ctx: &Context, experiment: &str, columns: &str) -> Self {
        let mut header = String::new();
        let _ = writeln!(header, "# format_version = {CSV_FORMAT_VERSION}");
        let _ = writeln!(header, "# experiment = {experiment}");
        let _ = writeln!(header, "# seed = {}", ctx.seed());
        for line in ctx.cfg.to_kv().lines() {
            let _ = writeln!(header, "# {line}");
        }
        Self { header, notes: Vec::new(), columns: columns.to_string(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    /// Record a skipped or clamped point; also logged as a warning.
    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        warn!("{msg}");
        self.notes.push(msg);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.clone();
        for n in &self.notes {
            let _ = writeln!(out, "# note: {n}");
        }
        let _ = writeln!(out, "{}", self.columns);
        for r in &self.rows {
            let _ = writeln!(out, "{r}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// The non-comment lines of a CSV document.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

/// Errors that describe an infeasible point rather than a broken run.
pub(crate) fn is_soft(e: &Error) -> bool {
    match e {
        Error::Indefinite { .. }
        | Error::DivergentMoment { .. }
        | Error::Placement { .. }
        | Error::TooManyRejections { .. }
        | Error::Selection(SelectionError::Infeasible { .. }) => true,
        Error::Round { source, .. } => is_soft(source),
        _ => false,
    }
}

/// Turn a soft error into `None` plus a note, pass others through.
pub(crate) fn soften<T>(r: Result<T>, what: &str, notes: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_soft(&e) => {
            notes.push(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Analytic sum rate. When a required moment diverges the extended objective
/// (zero weight for an infinite `μ`) is reported instead, with a note.
pub(crate) fn analytic_sum(model: &AnalyticModel, sel: &PortSelection, what: &str, notes: &mut Vec<String>) -> Result<f64> {
    match model.report(sel) {
        Ok(r) => Ok(r.sum_rate),
        Err(e) if is_soft(&e) => {
            notes.push(format!("{what}: {e}; extended objective reported"));
            Ok(model.sum_rate_terms(&model.all_terms(sel)?))
        }
        Err(e) => Err(e),
    }
}

/// One output row plus the notes raised while computing it.
#[derive(Debug, Default)]
pub(crate) struct TaskOut {
    pub rows: Vec<String>,
    pub notes: Vec<String>,
}

/// Evaluate `f` over `(point, scenario)` pairs in parallel and append rows in
/// task order.
pub(crate) fn run_grid<P: Sync>(
    doc: &mut CsvDoc,
    points: &[P],
    n_scen: usize,
    f: impl Fn(&P, usize) -> Result<TaskOut> + Sync,
) -> Result<()> {
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..n_scen).map(move |i| (p, i))).collect();
    let outs: Vec<TaskOut> = tasks.par_iter().map(|&(p, i)| f(&points[p], i)).collect::<Result<_>>()?;
    for o in outs {
        o.notes.into_iter().for_each(|n| doc.note(n));
        o.rows.into_iter().for_each(|r| doc.push(r));
    }
    Ok(())
}

/// Sweep axis or the base value when the axis is empty.
pub(crate) fn axis<T: Clone>(sweep: &[T], base: T) -> Vec<T> {
    if sweep.is_empty() {
        vec![base]
    } else {
        sweep.to_vec()
    }
}

fn plot_stub(csv_name: &str, x: &str, y: &[&str], group: &[&str]) -> String {
    let ys = y.iter().map(|c| format!("\"{c}\"")).collect::<Vec<_>>().join(", ");
    let gs = group.iter().map(|c| format!("\"{c}\"")).collect::<Vec<_>>().join(", ");
    format!(
        "# Plot stub for {csv_name}; edit freely.\n\
         import pandas as pd\n\
         import matplotlib.pyplot as plt\n\n\
         df = pd.read_csv(\"{csv_name}\", comment=\"#\")\n\
         ys = [{ys}]\n\
         groups = [{gs}]\n\
         mean = df.groupby(groups + [\"{x}\"])[ys].mean().reset_index()\n\
         fig, ax = plt.subplots()\n\
         for key, part in (mean.groupby(groups) if groups else [((), mean)]):\n\
         \x20   for y in ys:\n\
         \x20       ax.plot(part[\"{x}\"], part[y], marker=\"o\", label=f\"{{y}} {{key}}\")\n\
         ax.set_xlabel(\"{x}\")\n\
         ax.legend()\n\
         fig.savefig(\"{csv_name}\".replace(\".csv\", \".png\"), dpi=150)\n"
    )
}

fn write_pair(ctx: &Context, file: &str, doc: &CsvDoc, x: &str, y: &[&str], group: &[&str]) -> Result<Vec<PathBuf>> {
    let csv = ctx.out_dir.join(format!("{file}.csv"));
    doc.write(&csv)?;
    let py = ctx.out_dir.join(format!("{file}.plot.py"));
    std::fs::write(&py, plot_stub(&format!("{file}.csv"), x, y, group))?;
    Ok(vec![csv, py])
}

/// Run one experiment and return the files written.
pub fn run_experiment(experiment: Experiment, ctx: &Context) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&ctx.out_dir)?;
    let name = experiment.name();
    match experiment {
        Experiment::AnalyticVsMc => {
            let doc = runs::analytic_vs_mc(ctx)?;
            write_pair(ctx, name, &doc, "ports", &["analytic_sum_rate", "mc_sum_rate"], &["eps2"])
        }
        Experiment::RateVsCorrelation => {
            let doc = runs::rate_vs_correlation(ctx)?;
            write_pair(ctx, name, &doc, "ports", &["gs_sum_rate"], &["rho_s", "rho_c"])
        }
        Experiment::SelectionCompare => {
            let doc = runs::selection_compare(ctx)?;
            write_pair(ctx, name, &doc, "ports", &["gs_sum_rate", "mms_sum_rate", "exhaustive_sum_rate"], &["eff_ports"])
        }
        Experiment::Compression => {
            let (rates, ccdf) = runs::compression(ctx)?;
            let mut files = write_pair(ctx, name, &rates, "ports", &["mc_rate_s1", "mc_rate_s2"], &["corr_ports"])?;
            let ccdf_name = format!("{name}_ccdf");
            let path = ctx.out_dir.join(format!("{ccdf_name}.csv"));
            ccdf.write(&path)?;
            files.push(path);
            let py = ctx.out_dir.join(format!("{ccdf_name}.plot.py"));
            std::fs::write(&py, plot_stub(&format!("{ccdf_name}.csv"), "cr1", &["ccdf"], &["ports", "corr_ports", "mode"]))?;
            files.push(py);
            Ok(files)
        }
        Experiment::DlEval => {
            let path = ctx
                .selections
                .as_deref()
                .ok_or_else(|| Error::Config("dl-eval needs a selection JSON-lines file (--selections)".into()))?;
            let doc = runs::dl_eval(ctx, path)?;
            write_pair(ctx, name, &doc, "sample", &["dl_sum_rate", "gs_sum_rate"], &[])
        }
    }
}

/// Render a float for CSV output.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}
