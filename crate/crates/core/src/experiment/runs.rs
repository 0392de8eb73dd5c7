//! The figure-family experiments.

use std::path::Path;

use crate::analytic::AnalyticModel;
use crate::config::SystemConfig;
use crate::error::Result;
use crate::feedback::{compression_ratio, EdtCodec, EdtMode};
use crate::linalg::submatrix;
use crate::portsel::{exhaustive_oracle, mm_s_baseline, search_space, MAX_SPACE};
use crate::precoder::{monte_carlo_rate, FeedbackPath, McOptions};
use crate::scenario::Scenario;
use crate::selection::PortSelection;

use super::dataset::read_selection_lines;
use super::{analytic_sum, axis, num, run_grid, selection_accuracy, soften, Context, CsvDoc, TaskOut};

/// A system configuration plus the selection budget of one sweep point.
struct Point {
    system: SystemConfig,
    ports: usize,
    counts: Vec<usize>,
    eps2: f64,
    label: String,
}

/// Build sweep points, dropping invalid ones with a note.
fn points(ctx: &Context, doc: &mut CsvDoc, grid: Vec<(SystemConfig, usize, f64, String)>) -> Vec<Point> {
    let mut out = Vec::new();
    for (system, ports, eps2, label) in grid {
        let checked = system.validate().and_then(|_| ctx.counts(ports, system.n_bs));
        match checked {
            Ok(counts) => out.push(Point { system, ports, counts, eps2, label }),
            Err(e) => doc.note(format!("skipped {label}: {e}")),
        }
    }
    out
}

/// Scenario, GS-JPS selection and model for one task; `None` on a soft failure.
fn select<'a>(
    ctx: &Context,
    sc: &'a Scenario,
    p: &Point,
    i: usize,
    notes: &mut Vec<String>,
) -> Result<Option<(AnalyticModel<'a>, PortSelection, f64)>> {
    let model = ctx.model(sc, p.eps2)?;
    let what = format!("{} scenario {i}", p.label);
    Ok(soften(ctx.gs(&model, &p.counts, i), &what, notes)?.map(|g| (model, g.selection, g.sum_rate)))
}

fn nan_row(prefix: &str, n: usize) -> String {
    let mut s = prefix.to_string();
    for _ in 0..n {
        s.push_str(",NaN");
    }
    s
}

/// Sum rate versus P for each CSI error level, analytic and Monte Carlo.
pub(super) fn analytic_vs_mc(ctx: &Context) -> Result<CsvDoc> {
    let cfg = &ctx.cfg;
    let mut doc =
        CsvDoc::new(ctx, "analytic-vs-mc", "ports,eps2,scenario,analytic_sum_rate,mc_sum_rate,mc_stderr,max_user_gap");
    let mut grid = Vec::new();
    for &p in &axis(&cfg.sweep.ports, cfg.selection.ports_per_user) {
        for &e in &axis(&cfg.sweep.eps2, cfg.system.eps2()) {
            let system = SystemConfig { eps_ce2: e, eps_q2: 0.0, ..cfg.system.clone() };
            grid.push((system, p, e, format!("ports={p} eps2={e}")));
        }
    }
    let pts = points(ctx, &mut doc, grid);
    run_grid(&mut doc, &pts, cfg.sim.n_scen, |p, i| {
        let mut out = TaskOut::default();
        let prefix = format!("{},{},{i}", p.ports, num(p.eps2));
        let what = format!("{} scenario {i}", p.label);
        let Some(sc) = soften(ctx.scenario(&p.system, i), &what, &mut out.notes)? else {
            out.rows.push(nan_row(&prefix, 4));
            return Ok(out);
        };
        let Some((model, sel, _)) = select(ctx, &sc, p, i, &mut out.notes)? else {
            out.rows.push(nan_row(&prefix, 4));
            return Ok(out);
        };
        let analytic = soften(model.report(&sel), &what, &mut out.notes)?;
        let mc = monte_carlo_rate(
            &sc.stats,
            &sel,
            p.eps2,
            &sc.power.per_user,
            sc.config.sigma_n2,
            cfg.sim.n_real,
            ctx.mc_seed(i),
            &McOptions { rank_tol: cfg.analytic.rank_tol, ..McOptions::default() },
        );
        let mc = soften(mc, &what, &mut out.notes)?;
        let a_sum = analytic.as_ref().map_or(f64::NAN, |r| r.sum_rate);
        let m_sum = mc.as_ref().map_or(f64::NAN, |r| r.sum_rate);
        let stderr = mc.as_ref().and_then(|r| r.sum_rate_stderr).unwrap_or(f64::NAN);
        let gap = match (&analytic, &mc) {
            (Some(a), Some(m)) => a
                .per_user_rate
                .iter()
                .zip(&m.per_user_rate)
                .map(|(x, y)| (x - y).abs() / y.abs())
                .fold(0.0, f64::max),
            _ => f64::NAN,
        };
        out.rows.push(format!("{prefix},{},{},{},{}", num(a_sum), num(m_sum), num(stderr), num(gap)));
        Ok(out)
    })?;
    Ok(doc)
}

/// Sum rate over the spatial/cross-BS correlation grid.
pub(super) fn rate_vs_correlation(ctx: &Context) -> Result<CsvDoc> {
    let cfg = &ctx.cfg;
    let mut doc = CsvDoc::new(ctx, "rate-vs-correlation", "rho_s,rho_c,ports,scenario,gs_sum_rate,mms_sum_rate");
    let mut grid = Vec::new();
    for &rs in &axis(&cfg.sweep.rho_s, cfg.system.rho_s) {
        for &rc in &axis(&cfg.sweep.rho_c, cfg.system.rho_c) {
            for &p in &axis(&cfg.sweep.ports, cfg.selection.ports_per_user) {
                let system = SystemConfig { rho_s: rs, rho_c: rc, ..cfg.system.clone() };
                grid.push((system, p, cfg.system.eps2(), format!("rho_s={rs} rho_c={rc} ports={p}")));
            }
        }
    }
    let pts = points(ctx, &mut doc, grid);
    run_grid(&mut doc, &pts, cfg.sim.n_scen, |p, i| {
        let mut out = TaskOut::default();
        let prefix = format!("{},{},{},{i}", num(p.system.rho_s), num(p.system.rho_c), p.ports);
        let what = format!("{} scenario {i}", p.label);
        let Some(sc) = soften(ctx.scenario(&p.system, i), &what, &mut out.notes)? else {
            out.rows.push(nan_row(&prefix, 2));
            return Ok(out);
        };
        let Some((model, sel, _)) = select(ctx, &sc, p, i, &mut out.notes)? else {
            out.rows.push(nan_row(&prefix, 2));
            return Ok(out);
        };
        let gs = analytic_sum(&model, &sel, &format!("{what} (GS-JPS)"), &mut out.notes)?;
        let mms = match soften(mm_s_baseline(&sc.stats, &p.counts), &what, &mut out.notes)? {
            Some(s) => analytic_sum(&model, &s, &format!("{what} (MM-S)"), &mut out.notes)?,
            None => f64::NAN,
        };
        out.rows.push(format!("{prefix},{},{}", num(gs), num(mms)));
        Ok(out)
    })?;
    Ok(doc)
}

/// GS-JPS against MM-S and, where the space is small enough, exhaustive search.
pub(super) fn selection_compare(ctx: &Context) -> Result<CsvDoc> {
    let cfg = &ctx.cfg;
    let mut doc = CsvDoc::new(
        ctx,
        "selection-compare",
        "ports,eff_ports,scenario,search_space,gs_sum_rate,mms_sum_rate,exhaustive_sum_rate,gs_over_exhaustive",
    );
    let mut grid = Vec::new();
    for &p in &axis(&cfg.sweep.ports, cfg.selection.ports_per_user) {
        for &l in &axis(&cfg.sweep.eff_ports, cfg.system.eff_ports) {
            let system = SystemConfig { eff_ports: l, corr_ports: cfg.system.corr_ports.min(l), ..cfg.system.clone() };
            grid.push((system, p, cfg.system.eps2(), format!("ports={p} eff_ports={l}")));
        }
    }
    let pts = points(ctx, &mut doc, grid);
    run_grid(&mut doc, &pts, cfg.sim.n_scen, |p, i| {
        let mut out = TaskOut::default();
        let prefix = format!("{},{},{i}", p.ports, p.system.eff_ports);
        let what = format!("{} scenario {i}", p.label);
        let Some(sc) = soften(ctx.scenario(&p.system, i), &what, &mut out.notes)? else {
            out.rows.push(nan_row(&prefix, 5));
            return Ok(out);
        };
        let space = search_space(&sc.stats, &p.counts);
        let Some((model, sel, _)) = select(ctx, &sc, p, i, &mut out.notes)? else {
            out.rows.push(nan_row(&format!("{prefix},{space}"), 4));
            return Ok(out);
        };
        let gs = analytic_sum(&model, &sel, &format!("{what} (GS-JPS)"), &mut out.notes)?;
        let mms = match soften(mm_s_baseline(&sc.stats, &p.counts), &what, &mut out.notes)? {
            Some(s) => analytic_sum(&model, &s, &format!("{what} (MM-S)"), &mut out.notes)?,
            None => f64::NAN,
        };
        let ex = if space <= MAX_SPACE {
            let o = exhaustive_oracle(&model, &p.counts, MAX_SPACE)?;
            analytic_sum(&model, &o.selection, &format!("{what} (exhaustive)"), &mut out.notes)?
        } else {
            if i == 0 {
                out.notes.push(format!("{}: exhaustive search skipped, {space} candidates exceed {MAX_SPACE}", p.label));
            }
            f64::NAN
        };
        out.rows.push(format!("{prefix},{space},{},{},{},{}", num(gs), num(mms), num(ex), num(gs / ex)));
        Ok(out)
    })?;
    Ok(doc)
}

/// Feedback compression under S1/S2: rates and the CR₁ distribution.
pub(super) fn compression(ctx: &Context) -> Result<(CsvDoc, CsvDoc)> {
    let cfg = &ctx.cfg;
    let mut doc = CsvDoc::new(
        ctx,
        "compression",
        "ports,corr_ports,scenario,cr1_s1,cr1_s2,analytic_sum_rate,mc_rate_s1,mc_rate_s2",
    );
    let mut grid = Vec::new();
    for &p in &axis(&cfg.sweep.ports, cfg.selection.ports_per_user) {
        for &l0 in &axis(&cfg.sweep.corr_ports, cfg.system.corr_ports) {
            let system = SystemConfig { corr_ports: l0, ..cfg.system.clone() };
            grid.push((system, p, cfg.system.eps2(), format!("ports={p} corr_ports={l0}")));
        }
    }
    let pts = points(ctx, &mut doc, grid);
    let n_draws = cfg.sim.n_scen.max(cfg.sim.ccdf_scen);
    let quantize = Some((cfg.feedback.bits_amp, cfg.feedback.bits_phase));
    let bits = (cfg.feedback.bits_amp + cfg.feedback.bits_phase) as usize;
    run_grid(&mut doc, &pts, n_draws, |p, i| {
        let mut out = TaskOut::default();
        let prefix = format!("{},{},{i}", p.ports, p.system.corr_ports);
        let what = format!("{} scenario {i}", p.label);
        let Some(sc) = soften(ctx.scenario(&p.system, i), &what, &mut out.notes)? else {
            out.rows.push(nan_row(&prefix, 5));
            return Ok(out);
        };
        let Some((model, sel, _)) = select(ctx, &sc, p, i, &mut out.notes)? else {
            out.rows.push(nan_row(&prefix, 5));
            return Ok(out);
        };
        let mut ratio = [0.0; 2];
        for (k, mode) in [EdtMode::S1, EdtMode::S2].into_iter().enumerate() {
            let codecs = (0..sc.stats.n_users)
                .map(|u| {
                    let idx = sel.stacked_indices(u);
                    EdtCodec::build(&submatrix(&sc.stats.r[u], &idx, &idx), mode, cfg.analytic.rank_tol)
                })
                .collect::<Result<Vec<_>>>()?;
            ratio[k] = compression_ratio(&codecs, bits).ratio;
        }
        let (mut analytic, mut rate) = (f64::NAN, [f64::NAN; 2]);
        if i < cfg.sim.n_scen {
            analytic = soften(model.report(&sel), &what, &mut out.notes)?.map_or(f64::NAN, |r| r.sum_rate);
            for (k, mode) in [EdtMode::S1, EdtMode::S2].into_iter().enumerate() {
                let opts = McOptions {
                    feedback: FeedbackPath::Explicit { mode, quantize },
                    rank_tol: cfg.analytic.rank_tol,
                    ..McOptions::default()
                };
                let r = monte_carlo_rate(
                    &sc.stats,
                    &sel,
                    p.system.eps_ce2,
                    &sc.power.per_user,
                    sc.config.sigma_n2,
                    cfg.sim.n_real,
                    ctx.mc_seed(i),
                    &opts,
                );
                rate[k] = soften(r, &what, &mut out.notes)?.map_or(f64::NAN, |r| r.sum_rate);
            }
        }
        out.rows.push(format!(
            "{prefix},{},{},{},{},{}",
            num(ratio[0]),
            num(ratio[1]),
            num(analytic),
            num(rate[0]),
            num(rate[1])
        ));
        Ok(out)
    })?;
    let ccdf = ccdf_doc(ctx, &doc)?;
    Ok((doc, ccdf))
}

/// Empirical `P(CR₁ > x)` per point and mode from the rate table.
fn ccdf_doc(ctx: &Context, rates: &CsvDoc) -> Result<CsvDoc> {
    let mut doc = CsvDoc::new(ctx, "compression-ccdf", "ports,corr_ports,mode,cr1,ccdf");
    let mut groups: Vec<((String, String), [Vec<f64>; 2])> = Vec::new();
    for row in &rates.rows {
        let f: Vec<&str> = row.split(',').collect();
        let key = (f[0].to_string(), f[1].to_string());
        let vals = [f[3].parse::<f64>().unwrap_or(f64::NAN), f[4].parse::<f64>().unwrap_or(f64::NAN)];
        if !groups.last().is_some_and(|g| g.0 == key) {
            groups.push((key.clone(), [Vec::new(), Vec::new()]));
        }
        let g = groups.last_mut().expect("group just pushed");
        for k in 0..2 {
            if vals[k].is_finite() {
                g.1[k].push(vals[k]);
            }
        }
    }
    for ((p, l0), samples) in groups {
        for (k, mode) in ["S1", "S2"].into_iter().enumerate() {
            let mut v = samples[k].clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            let n = samples[k].len() as f64;
            for x in v {
                let above = samples[k].iter().filter(|&&s| s > x).count() as f64;
                doc.push(format!("{p},{l0},{mode},{},{}", num(x), num(above / n)));
            }
        }
    }
    Ok(doc)
}

/// Rates of externally produced selections against GS-JPS on the same scenarios.
pub(super) fn dl_eval(ctx: &Context, path: &Path) -> Result<CsvDoc> {
    let cfg = &ctx.cfg;
    let mut doc = CsvDoc::new(ctx, "dl-eval", "sample,dl_sum_rate,gs_sum_rate,ratio,accuracy");
    let records = read_selection_lines(path)?;
    let counts = ctx.counts(cfg.selection.ports_per_user, cfg.system.n_bs)?;
    let budget = vec![cfg.selection.ports_per_user; cfg.system.n_users];
    let system = cfg.system.clone();
    let outs: Vec<TaskOut> = {
        use rayon::prelude::*;
        records
            .par_iter()
            .map(|rec| -> Result<TaskOut> {
                let mut out = TaskOut::default();
                let i = rec.sample;
                let what = format!("sample {i}");
                let sel = rec.selection.clone();
                sel.check_shape(system.n_bs, system.n_antennas, system.n_users)?;
                sel.validate(Some(&budget))?;
                let sc = ctx.scenario(&system, i)?;
                let model = ctx.model(&sc, system.eps2())?;
                let dl = analytic_sum(&model, &sel, &format!("{what} (supplied)"), &mut out.notes)?;
                let gs = ctx.gs(&model, &counts, i)?;
                let gs_rate = analytic_sum(&model, &gs.selection, &format!("{what} (GS-JPS)"), &mut out.notes)?;
                let acc = selection_accuracy(&sel, &gs.selection)?;
                out.rows.push(format!("{i},{},{},{},{}", num(dl), num(gs_rate), num(dl / gs_rate), num(acc)));
                Ok(out)
            })
            .collect::<Result<_>>()?
    };
    for o in outs {
        o.notes.into_iter().for_each(|n| doc.note(n));
        o.rows.into_iter().for_each(|r| doc.push(r));
    }
    Ok(doc)
}
