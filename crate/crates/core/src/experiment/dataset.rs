//! JSON-lines dataset export and evaluation of externally produced selections.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precoder::{monte_carlo_rate, McOptions, RateReport};
use crate::selection::{PortSelection, SelectionFile};

use super::Context;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// One dataset line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetRecord {
    pub format_version: u32,
    pub sample: usize,
    pub seed: u64,
    pub n_bs: usize,
    pub n_antennas: usize,
    pub n_users: usize,
    /// `β̄ / max β̄`, shape `B·M × U` with row `b·M + m`.
    pub beta: Vec<Vec<f64>>,
    /// GS-JPS label mask, shape `U × B × M`.
    pub labels: Vec<Vec<Vec<u8>>>,
    /// `|Λ_{b,u}|`, shape `U × B`.
    pub counts: Vec<Vec<usize>>,
    pub sum_rate: f64,
    pub selection: SelectionFile,
}

/// One line of a selection file consumed by `dl-eval`.
#[derive(Debug, Clone)]
pub struct DlSelectionRecord {
    pub sample: usize,
    pub selection: PortSelection,
}

#[derive(Deserialize)]
struct RawSelectionLine {
    sample: usize,
    selection: SelectionFile,
}

pub(crate) fn read_selection_lines(path: &Path) -> Result<Vec<DlSelectionRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSelectionLine = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("{}: line {}: {e}", path.display(), n + 1)))?;
        out.push(DlSelectionRecord { sample: raw.sample, selection: raw.selection.try_into()? });
    }
    Ok(out)
}

fn record(ctx: &Context, sample: usize) -> Result<DatasetRecord> {
    let cfg = &ctx.cfg;
    let sys = &cfg.system;
    let sc = ctx.scenario(sys, sample)?;
    let counts = ctx.counts(cfg.selection.ports_per_user, sys.n_bs)?;
    let model = ctx.model(&sc, sys.eps2())?;
    let gs = ctx.gs(&model, &counts, sample)?;
    let st = &sc.stats;
    let (nb, m, nu) = (st.n_bs, st.n_antennas, st.n_users);
    let peak = st.beta_bar.iter().copied().fold(0.0, f64::max);
    let beta = (0..nb * m)
        .map(|row| (0..nu).map(|u| st.beta(row / m, u, row % m) / peak).collect())
        .collect();
    let mask = gs.selection.mask();
    let labels = (0..nu).map(|u| (0..nb).map(|b| mask[(u * nb + b) * m..(u * nb + b + 1) * m].to_vec()).collect()).collect();
    let counts = (0..nu).map(|u| (0..nb).map(|b| gs.selection.get(b, u).len()).collect()).collect();
    Ok(DatasetRecord {
        format_version: DATASET_FORMAT_VERSION,
        sample,
        seed: ctx.seed(),
        n_bs: nb,
        n_antennas: m,
        n_users: nu,
        beta,
        labels,
        counts,
        sum_rate: gs.sum_rate,
        selection: SelectionFile::from(&gs.selection),
    })
}

/// Write `n_samples` GS-JPS-labelled samples as JSON lines.
pub fn export_dataset(ctx: &Context, n_samples: usize, path: &Path) -> Result<usize> {
    let records: Vec<DatasetRecord> = (0..n_samples).into_par_iter().map(|i| record(ctx, i)).collect::<Result<_>>()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(records.len())
}

/// Analytic and Monte Carlo rates of a serialized selection on scenario `index`.
pub fn evaluate_selection_file(ctx: &Context, selection_json: &str, index: usize) -> Result<(RateReport, RateReport)> {
    let cfg = &ctx.cfg;
    let sys = &cfg.system;
    let sel = PortSelection::from_json(selection_json)?;
    sel.check_shape(sys.n_bs, sys.n_antennas, sys.n_users)?;
    sel.validate(Some(&vec![cfg.selection.ports_per_user; sys.n_users]))?;
    let sc = ctx.scenario(sys, index)?;
    let model = ctx.model(&sc, sys.eps2())?;
    let analytic = model.report(&sel)?;
    let opts = McOptions { rank_tol: cfg.analytic.rank_tol, ..McOptions::default() };
    let mc = monte_carlo_rate(&sc.stats, &sel, sys.eps2(), &sc.power.per_user, sys.sigma_n2, cfg.sim.n_real, ctx.mc_seed(index), &opts)?;
    Ok((analytic, mc))
}

/// Average fraction of correctly selected ports, in percent:
/// `(1/UB) Σ_u Σ_b |Λ ∩ Λ̂| / |Λ|` with `Λ` from `label`.
/// Blocks with an empty label set count as fully correct.
pub fn selection_accuracy(predicted: &PortSelection, label: &PortSelection) -> Result<f64> {
    label
        .check_shape(predicted.n_bs(), predicted.n_antennas(), predicted.n_users())
        .map_err(Error::Selection)?;
    let (nb, nu) = (label.n_bs(), label.n_users());
    let mut total = 0.0;
    for u in 0..nu {
        for b in 0..nb {
            let want = label.get(b, u);
            if want.is_empty() {
                total += 1.0;
                continue;
            }
            let got = predicted.get(b, u);
            let hit = want.iter().filter(|m| got.binary_search(m).is_ok()).count();
            total += hit as f64 / want.len() as f64;
        }
    }
    Ok(100.0 * total / (nb * nu) as f64)
}
