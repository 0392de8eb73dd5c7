use std::io::Write;

use jps_core::experiment::{
    csv_body, evaluate_selection_file, export_dataset, run_experiment, Context, DatasetRecord, Experiment,
};
use jps_core::{Error, RunConfig, SelectionError};

const DESK: &str = "\
system.bs = 2
system.antennas = 16
system.users = 2
system.eff_ports = 6
system.corr_ports = 1
selection.ports_per_user = 4
selection.n_rand = 8
sim.n_real = 4096
sim.n_scen = 2
sim.ccdf_scen = 20
";

/// Desk configuration with the keys in `extra` replaced.
fn ctx(extra: &str, dir: &std::path::Path) -> Context {
    let key = |l: &str| l.split('=').next().unwrap_or("").trim().to_string();
    let overridden: Vec<String> = extra.lines().map(key).collect();
    let base: String = DESK.lines().filter(|l| !overridden.contains(&key(l))).map(|l| format!("{l}\n")).collect();
    let cfg = RunConfig::parse(&format!("{base}{extra}")).unwrap();
    Context::new(cfg, Some(3), dir)
}

fn rows(path: &std::path::Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    csv_body(&text).lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn export_single_sample_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("", dir.path());
    let path = dir.path().join("d.jsonl");
    assert_eq!(export_dataset(&c, 1, &path).unwrap(), 1);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    let rec: DatasetRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(rec.format_version, 1);
    assert_eq!((rec.beta.len(), rec.beta[0].len()), (32, 2));
    assert!(rec.beta.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(rec.beta.iter().flatten().any(|&v| v == 1.0));
    for u in 0..2 {
        for b in 0..2 {
            let ones: usize = rec.labels[u][b].iter().map(|&x| x as usize).sum();
            assert_eq!(ones, rec.counts[u][b]);
            assert_eq!(rec.counts[u][b], 2);
        }
    }
    // per-BS disjointness of the label masks
    for b in 0..2 {
        for m in 0..16 {
            assert!(rec.labels[0][b][m] + rec.labels[1][b][m] <= 1);
        }
    }
}

#[test]
fn gs_selection_round_trips_through_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("", dir.path());
    let cfg = &c.cfg;
    let sc = c.scenario(&cfg.system, 0).unwrap();
    let model = c.model(&sc, cfg.system.eps2()).unwrap();
    let gs = c.gs(&model, &[2, 2], 0).unwrap();
    let direct = model.report(&gs.selection).unwrap();
    let (analytic, mc) = evaluate_selection_file(&c, &gs.selection.to_json().unwrap(), 0).unwrap();
    assert!((analytic.sum_rate - gs.sum_rate).abs() <= 1e-12 * gs.sum_rate);
    assert!((analytic.sum_rate - direct.sum_rate).abs() <= 1e-12 * direct.sum_rate);
    assert_eq!(mc.n_realizations, 4096);
}

#[test]
fn sharing_violation_names_the_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("", dir.path());
    let text = r#"{"format_version":1,"n_bs":2,"n_antennas":16,"n_users":2,"users":[
        {"user":0,"ports":[[0,3],[0,4],[1,5],[1,6]]},{"user":1,"ports":[[0,4],[0,7],[1,9],[1,11]]}]}"#;
    match evaluate_selection_file(&c, text, 0) {
        Err(Error::Selection(SelectionError::Shared { bs, user, other, port })) => {
            assert_eq!((bs, user, other, port), (0, 0, 1, 4));
        }
        other => panic!("expected a sharing error, got {other:?}"),
    }
}

#[test]
fn over_budget_selection_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("", dir.path());
    let text = r#"{"format_version":1,"n_bs":2,"n_antennas":16,"n_users":2,"users":[
        {"user":0,"ports":[[0,1],[0,2],[0,3],[1,5],[1,6]]},{"user":1,"ports":[[0,4],[0,7],[1,9],[1,11]]}]}"#;
    assert!(matches!(
        evaluate_selection_file(&c, text, 0),
        Err(Error::Selection(SelectionError::Budget { user: 0, count: 5, budget: 4 }))
    ));
}

#[test]
fn unknown_experiment_is_an_error() {
    assert!(matches!("no-such-experiment".parse::<Experiment>(), Err(Error::UnknownExperiment(_))));
}

#[test]
fn compression_ccdf_drops_below_one_with_full_cross_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("system.rho_c = 1\nsystem.corr_ports = 2\nsim.n_scen = 1\nsim.n_real = 1024\n", dir.path());
    run_experiment(Experiment::Compression, &c).unwrap();
    let ccdf = rows(&dir.path().join("compression_ccdf.csv"));
    assert!(!ccdf.is_empty());
    assert!(ccdf.iter().any(|r| r[2] == "S1" && r[3].parse::<f64>().unwrap() < 1.0));
    for r in rows(&dir.path().join("compression.csv")) {
        let s1: f64 = r[3].parse().unwrap();
        let s2: f64 = r[4].parse().unwrap();
        assert!(s2 <= s1 + 1e-12);
    }
}

#[test]
fn selection_compare_tiny_grid_tracks_exhaustive() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = "system.antennas = 8\nsystem.eff_ports = 4\nselection.ports_per_user = 2\nsim.n_scen = 4\n";
    let c = ctx(tiny, dir.path());
    run_experiment(Experiment::SelectionCompare, &c).unwrap();
    for r in rows(&dir.path().join("selection-compare.csv")) {
        let gs: f64 = r[4].parse().unwrap();
        let ex: f64 = r[6].parse().unwrap();
        assert!(gs <= ex * (1.0 + 1e-12), "{r:?}");
        assert!(gs >= 0.95 * ex, "{r:?}");
    }
}

#[test]
fn error_free_signal_power_matches_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("sim.n_real = 40000\n", dir.path());
    let sc = c.scenario(&c.cfg.system, 0).unwrap();
    let model = c.model(&sc, 0.0).unwrap();
    let gs = c.gs(&model, &[2, 2], 0).unwrap();
    let (analytic, mc) = evaluate_selection_file(&c, &gs.selection.to_json().unwrap(), 0).unwrap();
    for (a, m) in analytic.signal_power.iter().zip(&mc.signal_power) {
        assert!((a - m).abs() <= 0.03 * m, "{a} vs {m}");
    }
}

#[test]
fn analytic_vs_mc_rows_cover_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("sim.n_real = 2048\nsim.n_scen = 2\nsweep.ports = 2, 4\nsweep.eps2 = 0, 0.05\n", dir.path());
    run_experiment(Experiment::AnalyticVsMc, &c).unwrap();
    let rows = rows(&dir.path().join("analytic-vs-mc.csv"));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let mc: f64 = r[4].parse().unwrap();
        let se: f64 = r[5].parse().unwrap();
        assert!(mc.is_finite() && mc > 0.0 && se > 0.0, "{r:?}");
    }
}

#[test]
fn every_experiment_writes_header_and_plot_stub() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ctx("sim.n_scen = 1\nsim.n_real = 1024\nsim.ccdf_scen = 2\n", dir.path());
    let sel = dir.path().join("sel.jsonl");
    {
        let data = dir.path().join("data.jsonl");
        export_dataset(&c, 2, &data).unwrap();
        let mut f = std::fs::File::create(&sel).unwrap();
        for line in std::fs::read_to_string(&data).unwrap().lines() {
            let rec: DatasetRecord = serde_json::from_str(line).unwrap();
            let v = serde_json::json!({"sample": rec.sample, "selection": rec.selection});
            writeln!(f, "{v}").unwrap();
        }
    }
    c.selections = Some(sel);
    for e in Experiment::ALL {
        let files = run_experiment(e, &c).unwrap();
        let csv = files.iter().find(|p| p.extension().is_some_and(|x| x == "csv")).unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert!(text.starts_with("# format_version = 1\n"), "{}", e.name());
        assert!(text.contains("# seed = 3\n"));
        assert!(text.contains("# system.antennas = 16\n"));
        assert!(files.iter().any(|p| p.to_string_lossy().ends_with(".plot.py")));
    }
    // dl-eval of GS-JPS's own labels reproduces its rate and accuracy
    for r in rows(&dir.path().join("dl-eval.csv")) {
        assert_eq!(r[1], r[2]);
        assert_eq!(r[4], "100");
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let extra = "sim.n_scen = 2\nsim.n_real = 3000\nsweep.eps2 = 0, 0.05\n";
    let ca = ctx(extra, a.path());
    let cb = ctx(extra, b.path());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    one.install(|| run_experiment(Experiment::AnalyticVsMc, &ca)).unwrap();
    four.install(|| run_experiment(Experiment::AnalyticVsMc, &cb)).unwrap();
    let ta = std::fs::read_to_string(a.path().join("analytic-vs-mc.csv")).unwrap();
    let tb = std::fs::read_to_string(b.path().join("analytic-vs-mc.csv")).unwrap();
    assert_eq!(csv_body(&ta), csv_body(&tb));
}

#[test]
fn dl_eval_requires_a_selection_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx("", dir.path());
    assert!(matches!(run_experiment(Experiment::DlEval, &c), Err(Error::Config(_))));
}
