use std::fs;

use mtuc_core::experiment::{run_experiment, ExperimentId, ExperimentSpec};
use mtuc_core::scenario::{generate_random, DeviceCount, GenSpec};
use mtuc_core::Error;

fn quick(id: ExperimentId) -> ExperimentSpec {
    let mut spec = ExperimentSpec::desk(id);
    spec.seeds = vec![0, 1];
    spec.train.max_updates = 40;
    spec.train.hidden = 16;
    spec
}

#[test]
fn every_experiment_writes_seeded_csvs() {
    for id in ExperimentId::ALL {
        let mut spec = quick(id);
        if id == ExperimentId::Fig6ProfitVsAuvs {
            spec.sweep = vec![1, 2];
        }
        let dir = tempfile::tempdir().unwrap();
        let m = run_experiment(&spec, dir.path()).unwrap();
        assert!(m.failed_cells.is_empty());
        for f in &m.files {
            let text = fs::read_to_string(dir.path().join(f)).unwrap();
            if !f.ends_with("_routes.csv") && !f.ends_with("fig6_profit_vs_auvs_summary.csv") {
                assert!(text.starts_with("seed,scenario_hash,"), "{f}: {}", text.lines().next().unwrap_or(""));
            }
            assert!(text.lines().count() >= 2, "{f} has no rows");
        }
        assert!(dir.path().join("manifest.json").exists());
    }
}

#[test]
fn single_worker_runs_are_reproducible() {
    for id in [ExperimentId::Fig12Lr, ExperimentId::Fig8Offload] {
        let spec = quick(id);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = run_experiment(&spec, a.path()).unwrap();
        run_experiment(&spec, b.path()).unwrap();
        for f in m.files.iter().map(String::as_str).chain(["manifest.json"]) {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{id}: {f}");
        }
    }
}

#[test]
fn failed_cells_are_listed_in_the_manifest() {
    let mut spec = quick(ExperimentId::OracleGap);
    // Too many groups for the exhaustive search.
    spec.scenario = Some(generate_random(&GenSpec::new(7, 1, DeviceCount::PerGroup(1)), 0).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&spec, dir.path()).unwrap_err();
    assert!(matches!(err, Error::CellsFailed(2)));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let failed = manifest["failed_cells"].as_array().unwrap();
    assert_eq!(failed.len(), 2);
    assert!(failed[0]["error"].as_str().unwrap().contains("too large"));
}

#[test]
fn supplied_scenario_is_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec_gen = GenSpec::new(3, 1, DeviceCount::PerGroup(2));
    spec_gen.area_m = 600.0;
    let s = generate_random(&spec_gen, 5).unwrap();
    let path = dir.path().join("s.toml");
    s.save(&path).unwrap();
    let before = fs::read(&path).unwrap();
    let mut spec = quick(ExperimentId::OracleGap);
    spec.scenario = Some(mtuc_core::load_scenario(&path).unwrap());
    run_experiment(&spec, &dir.path().join("out")).unwrap();
    assert_eq!(fs::read(&path).unwrap(), before);
}
