use tempfile::tempdir;
use tiscan_harness::config::{ExperimentConfig, ExperimentKind, ProfileSelection};
use tiscan_harness::experiments::run_servo_accuracy;

#[test]
fn probe() {
    let dir = tempdir().unwrap();
    let config = ExperimentConfig {
        kind: ExperimentKind::ServoAccuracy,
        profile: ProfileSelection::Static,
        duration_s: 3.0,
        noise_sigma_mm: 0.0,
        plant_time_constant_s: 0.0,
        plant_latency_s: 0.0,
        out_dir: std::path::PathBuf::from("/tmp/zl2"),
        ..ExperimentConfig::default()
    };
    let (record, _) = run_servo_accuracy(&config).unwrap();
    for s in &record.samples {
        println!("{:<6} {:.12e} {:.12e}", s.t_s, s.translation_mm, s.rotation_deg);
    }
}
