use super::*;
use crate::kernels::save_system;

fn small_walker(gait: Option<Vec<usize>>) -> ExperimentConfig {
    ExperimentConfig {
        world: WorldSource::Walker(CyclicWalkerConfig { phases: 3, actions: 2, track_length: 20, gait, ..Default::default() }),
        data_steps: 3000,
        train_steps: 600,
        restarts: 2,
        evals_per_model: 2,
        eval_steps: 60,
        train: TrainConfig { epochs: 3, ..TrainConfig::default() },
        ..ExperimentConfig::walker_preset()
    }
}

#[test]
fn bits_for_counts() {
    assert_eq!([1, 2, 3, 4, 5, 6, 8, 9].map(bits_for), [0, 1, 2, 2, 3, 3, 3, 4]);
}

#[test]
fn m_range_parsing() {
    assert_eq!(MRange::parse("1..12").unwrap(), MRange { start: 1, end: 12 });
    assert_eq!(MRange::parse("1..=3").unwrap().values().count(), 3);
    assert_eq!(MRange::parse("4").unwrap(), MRange { start: 4, end: 4 });
    assert!(MRange::parse("5..2").is_err());
    assert!(MRange::parse("a..2").is_err());
}

#[test]
fn walker_dimension_stage_matches_the_structure() {
    let cfg = ExperimentConfig { data_steps: 20_000, ..ExperimentConfig::walker_preset() };
    let world = World::load(&cfg.world).unwrap();
    let support = run_support_stage(&cfg, &world).unwrap();
    let dims = run_dimension_stage(&cfg, &world, &support).unwrap();
    assert_eq!(dims.support_cardinality, 6);
    assert_eq!(dims.d_s, 6);
    assert_eq!(dims.m_bound, 11);
    assert_eq!(dims.gamma.len(), 18);
}

#[test]
fn action_independent_world_has_no_dimension() {
    let beta = StochasticKernel::deterministic(&[0, 1, 2], 3).unwrap();
    let step = [vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
    let rows: Vec<Vec<f64>> = step.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
    let alpha = StochasticKernel::from_rows(&rows).unwrap();
    let sys = SmlSystem::new(beta, alpha, vec![1.0, 0.0, 0.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sys.json");
    save_system(&path, &sys).unwrap();
    let cfg = ExperimentConfig {
        world: WorldSource::File { system: path, reference_policy: None },
        data_steps: 3000,
        ..Default::default()
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.dimension.d_s, 0);
    assert_eq!(report.dimension.m_bound, report.support.support.len() as u64 - 1);
    assert!(report.scan.is_none() && report.constructed.is_none());
}

#[test]
fn constant_gait_needs_no_hidden_units() {
    let mut cfg = small_walker(Some(vec![1, 1, 1]));
    cfg.m_range = Some(MRange { start: 0, end: 0 });
    cfg.train.epochs = 10;
    let world = World::load(&cfg.world).unwrap();
    let support = run_support_stage(&cfg, &world).unwrap();
    let dims = run_dimension_stage(&cfg, &world, &support).unwrap();
    let data = training_data(&cfg, &world).unwrap();
    let scan = run_scan_stage(&cfg, &world, &data, &dims, cfg.m_range.unwrap()).unwrap();
    assert_eq!(scan.rows.len(), 1);
    assert_eq!(scan.rows[0].best.unwrap() as f64, scan.baseline);
}

#[test]
fn constructed_policy_walks_like_the_reference() {
    let cfg = ExperimentConfig { eval_steps: 300, ..ExperimentConfig::walker_preset() };
    let world = World::load(&cfg.world).unwrap();
    let check = run_constructed_check(&cfg, &world, &SupportSet::full(6)).unwrap();
    assert_eq!(check.baseline, 50.0);
    assert!(check.ratio >= 0.9, "{check:?}");
}

#[test]
fn reports_are_deterministic() {
    let mut cfg = small_walker(None);
    cfg.m_range = Some(MRange { start: 1, end: 2 });
    let a = run_experiment(&cfg).unwrap().to_json();
    let b = run_experiment(&cfg).unwrap().to_json();
    assert_eq!(a, b);
    let report: ExperimentReport = serde_json::from_str(&a).unwrap();
    let scan = report.scan.unwrap();
    assert_eq!(scan.rows.len(), 2);
    assert!(scan.rows.iter().all(|r| r.evaluations + r.diverged * cfg.evals_per_model == 4));
    let csv = scan.to_csv();
    assert!(csv.starts_with("m,best,mean,std\n1,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(!csv.contains('\r'));
}

#[test]
fn config_json_and_validation() {
    let cfg = ExperimentConfig::from_json(r#"{"world":{"walker":{"phases":4,"actions":2,"track_length":10}},"seed":7}"#)
        .unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.restarts, 20);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"keep_fraction":0.0}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"exploration":1.5}"#).is_err());
    let full = ExperimentConfig::default().full_scale();
    assert_eq!((full.data_steps, full.restarts), (100_000, 100));
    assert_eq!(full.m_range.unwrap().end, 100);
}

#[test]
fn scan_rejects_file_worlds() {
    let cfg = small_walker(None);
    let walker = World::load(&cfg.world).unwrap();
    let world = World { walker: None, ..walker };
    let dims = DimensionStage { support_cardinality: 3, d_s: 3, per_state: vec![], m_bound: 5, gamma: vec![] };
    let data = TrainingData::Binary(vec![(vec![0, 0], vec![0])]);
    assert!(run_scan_stage(&cfg, &world, &data, &dims, MRange { start: 1, end: 1 }).is_err());
}
