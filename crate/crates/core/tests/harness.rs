use srm_core::decision::StrategyKind;
use srm_core::harness::bench::PlannerBenchConfig;
use srm_core::harness::compare::mean_std;
use srm_core::harness::{
    benchmark_frontier, benchmark_planner, compare, emit_plots, run_episode, CompareCase, EpisodeConfig, PlotError,
    TerminalStatus,
};
use srm_core::scenario::Scenario;

fn scenario_json(grid: &[String], regions: &str, start: (f64, f64), resolution: f64) -> String {
    let rows: Vec<String> = grid.iter().map(|r| format!("\"{r}\"")).collect();
    format!(
        r#"{{"resolution": {resolution}, "grid": [{}], "regions": [{regions}], "start": [{}, {}],
            "sensor": {{"beams": 90, "max_range_m": 3.0}}, "seed": 3}}"#,
        rows.join(","),
        start.0,
        start.1
    )
}

/// 6×6 free cells inside a one-cell wall.
fn small_room() -> Scenario {
    let mut g = vec!["########".to_string()];
    g.extend((0..6).map(|_| "#......#".to_string()));
    g.push("########".to_string());
    let text = scenario_json(&g, r#"{"label": "r", "kind": "room", "rect": [1, 1, 6, 6]}"#, (1.6, 1.6), 0.4);
    Scenario::parse(&text, "small_room").unwrap()
}

/// Two rooms joined by a door, with a corridor strip along the bottom.
fn two_rooms() -> Scenario {
    let (w, h) = (30usize, 18usize);
    let mut g = Vec::new();
    for y in 0..h {
        let row: String = (0..w)
            .map(|x| {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                let mid_wall = x == 15 && y >= 5 && !(10..13).contains(&y);
                let floor = y == 5 && x > 0 && x < w - 1 && !(3..6).contains(&x) && !(22..25).contains(&x);
                if border || mid_wall || floor {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        g.push(row);
    }
    let regions = r#"{"label": "a", "kind": "room", "rect": [1, 6, 14, 16]},
                     {"label": "b", "kind": "room", "rect": [16, 6, 28, 16]},
                     {"label": "c", "kind": "connection", "rect": [1, 1, 28, 4]}"#;
    Scenario::parse(&scenario_json(&g, regions, (1.0, 0.6), 0.2), "two_rooms").unwrap()
}

#[test]
fn single_room_completes_with_exact_map() {
    let sc = small_room();
    for strategy in [StrategyKind::Srm, StrategyKind::NearestFrontier, StrategyKind::MaxEntropy] {
        let cfg = EpisodeConfig::for_scenario(&sc, strategy, 1);
        let out = run_episode(&sc, &cfg).unwrap();
        assert_eq!(out.metrics.status, TerminalStatus::Complete, "{strategy}");
        assert_eq!(out.map_agreement(), 1.0, "{strategy}");
    }
}

#[test]
fn zero_time_budget_times_out_with_initial_record() {
    let sc = small_room();
    let mut cfg = EpisodeConfig::for_scenario(&sc, StrategyKind::Srm, 1);
    cfg.max_sim_time = 0.0;
    let out = run_episode(&sc, &cfg).unwrap();
    assert_eq!(out.metrics.status, TerminalStatus::Timeout);
    assert_eq!(out.metrics.rows.len(), 1);
    assert_eq!(out.metrics.rows[0].normalized_entropy, 1.0);
    assert_eq!(out.metrics.total_path_length, 0.0);
}

#[test]
fn invalid_config_is_rejected() {
    let sc = small_room();
    let mut cfg = EpisodeConfig::for_scenario(&sc, StrategyKind::Srm, 1);
    cfg.dt = 0.0;
    assert!(run_episode(&sc, &cfg).is_err());
}

#[test]
fn episodes_are_reproducible_and_well_formed() {
    let sc = two_rooms();
    for strategy in [StrategyKind::Srm, StrategyKind::NearestFrontier, StrategyKind::Combined { gamma1: 1.0, gamma2: 0.5 }] {
        let cfg = EpisodeConfig::for_scenario(&sc, strategy, 4);
        let a = run_episode(&sc, &cfg).unwrap();
        let b = run_episode(&sc, &cfg).unwrap();
        assert_eq!(a.metrics.metrics_csv(), b.metrics.metrics_csv(), "{strategy}");
        assert_eq!(a.metrics.decisions_jsonl(), b.metrics.decisions_jsonl(), "{strategy}");
        assert_eq!(a.metrics.status, TerminalStatus::Complete, "{strategy}");
        assert!(a.map_agreement() >= 0.995, "{strategy}");

        let rows = &a.metrics.rows;
        for w in rows.windows(2) {
            assert!(w[1].sim_time > w[0].sim_time);
            assert!(w[1].traveled_length_m >= w[0].traveled_length_m);
            assert!(w[1].map_entropy_bits <= w[0].map_entropy_bits + 1e-9);
        }
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.normalized_entropy)));
        let last = rows.last().unwrap();
        assert!((last.traveled_length_m - a.metrics.total_path_length).abs() < 1e-9);
        // every decision names a node that exists by the end
        assert!(a.metrics.decisions.iter().all(|d| d.node_id < a.graph.len()));
    }
}

#[test]
fn srm_visits_rooms_before_corridors() {
    let sc = two_rooms();
    let cfg = EpisodeConfig::for_scenario(&sc, StrategyKind::Srm, 2);
    let out = run_episode(&sc, &cfg).unwrap();
    let cases: Vec<u8> = out.metrics.decisions.iter().map(|d| d.case).collect();
    // once a room target was chosen, corridor targets only appear when no room is left
    if let Some(first_room) = cases.iter().position(|&c| c == 1) {
        let last_room = cases.iter().rposition(|&c| c == 1).unwrap();
        assert!(cases[first_room..=last_room].iter().all(|&c| c == 1), "{cases:?}");
    }
}

#[test]
fn compare_bookkeeping() {
    let sc = small_room();
    let cases = [CompareCase::new(sc)];
    let strategies = [StrategyKind::Srm, StrategyKind::Srm];
    let report = compare(&cases, &strategies, &[1, 2], true).unwrap();
    assert_eq!(report.runs.len(), 4);
    assert_eq!(report.aggregates.len(), 1, "identical strategies share one group");
    let agg = &report.aggregates[0];
    assert_eq!(agg.n, 4);
    let lens: Vec<f64> = report.runs.iter().map(|r| r.path_length).collect();
    let (m, s) = mean_std(&lens);
    assert_eq!((agg.path_mean, agg.path_std), (m, s));
    assert_eq!(report.runs[0], report.runs[2]);
    assert_eq!(report.runs[1], report.runs[3]);

    let single = compare(&cases, &[StrategyKind::NearestFrontier], &[1, 2], false).unwrap();
    assert_eq!(single.runs.len(), 2);
    assert_eq!(single.aggregates.len(), 1);
    assert!(single.summary_csv().lines().count() == 2);
    assert!(compare(&cases, &[StrategyKind::Srm], &[1], false).is_err());
}

#[test]
fn sample_std_uses_n_minus_one() {
    let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
    assert_eq!(m, 5.0);
    assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
}

#[test]
fn compare_parallel_matches_sequential() {
    let cases = [CompareCase::new(two_rooms())];
    let strategies = [StrategyKind::Srm, StrategyKind::NearestFrontier];
    let par = compare(&cases, &strategies, &[1, 2], true).unwrap();
    let seq = compare(&cases, &strategies, &[1, 2], false).unwrap();
    assert_eq!(par.runs_csv(), seq.runs_csv());
    assert_eq!(par.summary_csv(), seq.summary_csv());
    assert_eq!(par.entropy_csv(), seq.entropy_csv());
}

#[test]
fn frontier_benchmark_is_sound_and_pruning_never_costs_more() {
    let sc = two_rooms();
    let cfg = EpisodeConfig::for_scenario(&sc, StrategyKind::Srm, 1);
    let bench = benchmark_frontier(&sc, &cfg).unwrap();
    assert!(!bench.rows.is_empty());
    let first = &bench.rows[0];
    assert_eq!(first.detected_cells, first.oracle_cells, "tiny state: everything is detected");
    for r in &bench.rows {
        assert_eq!(r.unsound, 0);
        assert_eq!(r.partial_clusters, 0);
        assert!(r.ops_pruned <= r.ops_unpruned, "step {}", r.step);
        assert!(r.nodes_pruned <= r.nodes_unpruned);
    }
    assert_eq!(bench.csv().lines().count(), bench.rows.len() + 1);
}

#[test]
fn planner_benchmark_rows_and_repeatability() {
    let sc = two_rooms();
    let cfg = PlannerBenchConfig { queries: 1, rrt_samples: 300, ..Default::default() };
    let a = benchmark_planner(std::slice::from_ref(&sc), &cfg).unwrap();
    assert_eq!(a.rows.len(), 2);
    assert_eq!(a.rows[0].planner, "srm-astar");
    assert_eq!(a.rows[1].planner, "rrt-star");
    let b = benchmark_planner(std::slice::from_ref(&sc), &cfg).unwrap();
    assert_eq!(a.rows[0].record.nodes_expanded, b.rows[0].record.nodes_expanded);
    assert_eq!(a.rows[0].record.path_length, b.rows[0].record.path_length);
}

#[test]
fn plots_from_run_output() {
    let sc = small_room();
    let cfg = EpisodeConfig::for_scenario(&sc, StrategyKind::Srm, 1);
    let out = run_episode(&sc, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    out.write_to(&run_dir, &sc.name, &cfg).unwrap();
    let plots = dir.path().join("plots");
    let files = emit_plots(&run_dir, &plots).unwrap();
    let names: Vec<String> = files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"entropy.svg".to_string()));
    assert!(names.contains(&"map.svg".to_string()));
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    }
    let again = dir.path().join("again");
    emit_plots(&run_dir, &again).unwrap();
    for n in &names {
        assert_eq!(std::fs::read(plots.join(n)).unwrap(), std::fs::read(again.join(n)).unwrap());
    }
}

#[test]
fn plots_need_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(matches!(emit_plots(dir.path(), &out), Err(PlotError::NoInput(_))));
    assert!(!out.exists());
}

#[test]
fn entropy_plot_matches_golden_file() {
    let input = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");
    let dir = tempfile::tempdir().unwrap();
    emit_plots(std::path::Path::new(input), dir.path()).unwrap();
    let got = std::fs::read_to_string(dir.path().join("entropy.svg")).unwrap();
    let want = std::fs::read_to_string(format!("{input}/entropy.svg")).unwrap();
    assert_eq!(got, want);
}
