use evogame::inference::{reconstruct_dataset, InferenceReport, Status};
use evogame::payoff::PayoffModel;
use evogame::sim::{run_simulation, Dynamics, InitialSampler, PedestrianParams, SimConfig};
use evogame::validation::{ntfr_1d_ansatz, ntfr_1d_config, origin_repulsion_1d};
use evogame::TrajectoryDataset;

fn bytes_of(ds: &TrajectoryDataset) -> Vec<u8> {
    let mut out = Vec::new();
    ds.write_ndjson(&mut out).unwrap();
    out
}

#[test]
fn dataset_round_trip_is_byte_identical() {
    let ds = run_simulation(&ntfr_1d_config(4, 3), Some(&origin_repulsion_1d())).unwrap();
    let first = bytes_of(&ds);
    let back = TrajectoryDataset::read_ndjson(first.as_slice()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(bytes_of(&back), first);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.ndjson");
    ds.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    assert_eq!(TrajectoryDataset::load(&path).unwrap(), ds);
}

#[test]
fn pedestrian_dataset_round_trip() {
    let cfg = SimConfig {
        dynamics: Dynamics::Pedestrian(PedestrianParams::default()),
        agents: 4,
        dt: 0.005,
        steps: 40,
        subsample: 20,
        realizations: 2,
        seed: 5,
        initial: InitialSampler::pedestrian_default(),
    };
    let ds = run_simulation(&cfg, None).unwrap();
    let first = bytes_of(&ds);
    let back = TrajectoryDataset::read_ndjson(first.as_slice()).unwrap();
    assert_eq!(bytes_of(&back), first);
}

#[test]
fn payoff_round_trip_is_byte_identical() {
    let mut model = ntfr_1d_ansatz();
    let c: Vec<f64> = (0..model.n_coefficients()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
    model.set_coefficients(&c).unwrap();
    let mut first = Vec::new();
    model.write_json(&mut first).unwrap();
    let back = PayoffModel::read_json(first.as_slice()).unwrap();
    assert_eq!(back, model);
    let mut second = Vec::new();
    back.write_json(&mut second).unwrap();
    assert_eq!(second, first);
}

#[test]
fn report_round_trip() {
    let report = InferenceReport {
        status: Status::Converged,
        iterations: 3,
        objective_trace: vec![1.0, 0.5, 0.1 + 0.2],
        final_data_term: 1e-9,
        grad_norm: 3e-7,
        wall_ms: 12,
        skipped_pairs: 0,
        coefficients: vec![0.1, -2.5e-300, 7.0],
    };
    let json = report.to_json().unwrap();
    let back: InferenceReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json().unwrap(), json);
}

#[test]
fn reconstruction_restores_the_generator_strategies() {
    let ds = run_simulation(&ntfr_1d_config(3, 4), Some(&origin_repulsion_1d())).unwrap();
    let mut stripped = ds.clone();
    stripped.meta.strategies = None;
    for s in &mut stripped.snapshots {
        s.sigma = None;
    }
    let space = ds.meta.strategies.clone().unwrap();
    let rec = reconstruct_dataset(&stripped, &space, 1.0).unwrap();
    assert!(rec.violations.is_empty());
    assert!(rec.max_residual <= 1e-8);
    rec.dataset.validate().unwrap();
    for (a, b) in rec.dataset.snapshots.iter().zip(&ds.snapshots) {
        for (p, q) in a.sigma.as_ref().unwrap().iter().zip(b.sigma.as_ref().unwrap()) {
            for (x, y) in p.iter().zip(q.iter()) {
                assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
            }
        }
    }
}
