use std::path::PathBuf;

use proptest::prelude::*;
use sagin_core::harness::{
    csv_string, emit_csv, emit_plot, plot_svg, prepare_models, run_point, run_sweep, run_sweep_on, Metric, CSV_HEADER,
    ENV_OUT_DIR, ENV_SEED,
};
use sagin_core::neural::checkpoint;
use sagin_core::{build_reference_topology, ExperimentConfig, HarnessError, Policy, SweepResult, SweepRow};

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The default grid with very short runs and a very small network.
fn quick_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&config_dir().join("default.toml")).unwrap();
    cfg.simulation.duration_s = 0.3;
    cfg.simulation.warmup_s = 0.1;
    cfg.routing.interval_s = 0.1;
    cfg.neural.conv_channels = vec![2];
    cfg.neural.hidden = vec![4];
    cfg.pretrain.samples = 3;
    cfg.pretrain.epochs = 1;
    cfg
}

#[test]
fn bundled_configs_parse() {
    let full = ExperimentConfig::load(&config_dir().join("default.toml")).unwrap();
    assert_eq!(full.sweep.grid().len(), 16);
    assert_eq!(full.simulation.duration_s, 60.0);
    assert_eq!(full.routing.window, 16);
    let smoke = ExperimentConfig::load(&config_dir().join("smoke.toml")).unwrap();
    assert_eq!(smoke.sweep.grid(), vec![100, 400, 700, 1000, 1300, 1600]);
    assert_eq!(smoke.simulation.duration_s, 10.0);
}

#[test]
fn bad_configs_are_config_errors() {
    for text in [
        "[routing]\nwindow = 16\n",
        "[simulation]\nduration_s = 0.0\n",
        "[sweep]\nn_min = 500\nn_max = 100\n",
        "[sweep]\npolicies = [\"ospf\"]\n",
        "[routing]\nepsilon = 1.5\n",
        "not toml at all",
    ] {
        let e = ExperimentConfig::from_toml_str(text).unwrap_err();
        assert!(e.is_config(), "{text:?}: {e}");
    }
    let e = ExperimentConfig::load(&config_dir().join("missing.toml")).unwrap_err();
    assert!(e.is_config());
}

#[test]
fn environment_overrides() {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(|k| match k {
        k if k == ENV_SEED => Some("42".into()),
        k if k == ENV_OUT_DIR => Some("/tmp/sagin-out".into()),
        _ => None,
    })
    .unwrap();
    assert_eq!(cfg.simulation.seed, 42);
    assert_eq!(
        cfg.output_path("a/b.csv".as_ref()),
        PathBuf::from("/tmp/sagin-out/a/b.csv")
    );
    assert_eq!(cfg.output_path("/abs.csv".as_ref()), PathBuf::from("/abs.csv"));
    assert!(cfg
        .apply_overrides(|k| (k == ENV_SEED).then(|| "seven".into()))
        .is_err());
}

#[test]
fn default_grid_gives_32_sorted_rows_and_identical_csv() {
    let cfg = quick_config();
    let a = run_sweep(&cfg).unwrap();
    assert_eq!(a.rows().len(), 32);
    let keys: Vec<(Policy, usize)> = a.rows().iter().map(|r| (r.policy, r.n_sources)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys[0], (Policy::Sp, 100));
    assert_eq!(keys[31], (Policy::Dnn, 1600));
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(csv_string(&a), csv_string(&b));
}

#[test]
fn repetitions_use_consecutive_seeds() {
    let mut cfg = quick_config();
    cfg.sweep.n_min = 200;
    cfg.sweep.n_max = 200;
    cfg.sweep.repetitions = 3;
    cfg.sweep.policies = vec![Policy::Sp];
    let topo = build_reference_topology(&cfg.topology).unwrap();
    let r = run_sweep_on(&topo, &cfg, None).unwrap();
    let seeds: Vec<u64> = r.rows().iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![1, 2, 3]);
    let (m, _) = run_point(&topo, &cfg, Policy::Sp, 200, 1, None).unwrap();
    assert_eq!(
        r.rows()[1],
        SweepRow::new(Policy::Sp, 200, 2, m.throughput_bps, m.loss_rate, m.mean_delay_s)
    );
}

#[test]
fn dnn_without_checkpoints_or_pretraining_fails() {
    let mut cfg = quick_config();
    cfg.pretrain.enabled = false;
    assert!(matches!(run_sweep(&cfg), Err(HarnessError::MissingCheckpoint)));
    cfg.sweep.policies = vec![Policy::Sp];
    assert_eq!(run_sweep(&cfg).unwrap().rows().len(), 16);
}

#[test]
fn checkpoints_are_loaded_and_checked() {
    let cfg = quick_config();
    let topo = build_reference_topology(&cfg.topology).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let trained = prepare_models(&topo, &cfg).unwrap();
    checkpoint::save_models(dir.path(), &trained).unwrap();
    let mut from_disk = cfg.clone();
    from_disk.pretrain.enabled = false;
    from_disk.routing.checkpoint_dir = Some(dir.path().to_path_buf());
    assert_eq!(prepare_models(&topo, &from_disk).unwrap(), trained);
    from_disk.neural.hidden = vec![5];
    assert!(prepare_models(&topo, &from_disk).unwrap_err().is_config());
}

fn sample_result() -> SweepResult {
    let mut rows = Vec::new();
    for (i, n) in [100, 400, 700].into_iter().enumerate() {
        for seed in [1, 2] {
            let sp = 2e8 * (i + 1) as f64 + seed as f64;
            rows.push(SweepRow::new(Policy::Sp, n, seed, sp, 0.01 * i as f64, 0.19));
            rows.push(SweepRow::new(
                Policy::Dnn,
                n,
                seed,
                1.5 * sp,
                0.0,
                0.2 + 1e-7 * seed as f64,
            ));
        }
    }
    SweepResult::new(rows)
}

#[test]
fn csv_reads_back_with_a_standard_reader() {
    let result = sample_result();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.csv");
    emit_csv(&result, &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header.join(","), CSV_HEADER);
    let rows: Vec<SweepRow> = reader
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            SweepRow::new(
                rec[0].parse().unwrap(),
                rec[1].parse().unwrap(),
                rec[2].parse().unwrap(),
                rec[3].parse().unwrap(),
                rec[4].parse().unwrap(),
                rec[5].parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows, result.rows());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let file = tempfile::NamedTempFile::new().unwrap();
    let under_a_file = file.path().join("out.csv");
    assert!(matches!(
        emit_csv(&sample_result(), &under_a_file),
        Err(HarnessError::Io { .. })
    ));
    assert!(matches!(
        emit_csv(&SweepResult::default(), &under_a_file),
        Err(HarnessError::EmptyResult)
    ));
}

#[test]
fn plot_has_one_line_per_policy_scaled_to_the_maximum() {
    let result = sample_result();
    let svg = plot_svg(&result, Metric::Throughput).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 2);
    let titles: Vec<&str> = lines
        .iter()
        .map(|l| l.children().find(|c| c.has_tag_name("title")).unwrap().text().unwrap())
        .collect();
    assert_eq!(titles, vec!["sp", "dnn"]);
    let ys: Vec<Vec<f64>> = lines
        .iter()
        .map(|l| {
            l.attribute("points")
                .unwrap()
                .split(' ')
                .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
                .collect()
        })
        .collect();
    assert!(ys.iter().all(|y| y.len() == 3));
    let top = ys.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let bottom = ys.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    // the largest mean sits on the top edge of the plot area
    assert!((top - 30.0).abs() < 0.05, "{top}");
    assert!(bottom <= 360.0);

    // loss: sp starts at zero, which sits on the x axis
    let svg = plot_svg(&result, Metric::LossRate).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let sp = doc.descendants().find(|n| n.has_tag_name("polyline")).unwrap();
    let first_y: f64 = sp
        .attribute("points")
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(first_y, 360.0);
    let axis = doc.descendants().any(|n| n.text() == Some("number of source nodes"));
    assert!(axis);
}

#[test]
fn plots_need_two_source_counts() {
    let one = SweepResult::new(vec![SweepRow::new(Policy::Sp, 100, 1, 1.0, 0.0, 0.1)]);
    assert!(matches!(
        plot_svg(&one, Metric::LossRate),
        Err(HarnessError::InsufficientPoints(1))
    ));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plots/throughput.svg");
    emit_plot(&sample_result(), Metric::Throughput, &path).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("<svg"));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn config_survives_a_toml_round_trip(
        duration in 1.0f64..120.0,
        warmup_frac in 0.0f64..0.9,
        seed in any::<u32>(),
        window in 1usize..64,
        epsilon in 0.0f64..=1.0,
        n_min in 1usize..800,
        span in 0usize..800,
        step in 1usize..300,
        reps in 1usize..5,
        dnn_first in any::<bool>(),
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.simulation.duration_s = duration;
        cfg.simulation.warmup_s = duration * warmup_frac;
        cfg.simulation.seed = seed as u64;
        cfg.routing.window = window;
        cfg.routing.epsilon = epsilon;
        cfg.sweep.n_min = n_min;
        cfg.sweep.n_max = n_min + span;
        cfg.sweep.n_step = step;
        cfg.sweep.repetitions = reps;
        if dnn_first {
            cfg.sweep.policies = vec![Policy::Dnn, Policy::Sp];
        }
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert_eq!(&back, &cfg);
        let grid = back.sweep.grid();
        prop_assert_eq!(grid[0], n_min);
        prop_assert!(grid.windows(2).all(|w| w[1] - w[0] == step));
        prop_assert!(*grid.last().unwrap() <= n_min + span);
    }
}
