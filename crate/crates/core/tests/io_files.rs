use std::fs;

use spinlab::io::{load_config, read_curve_csv, read_stim_echo_csv, read_t1_csv, sha256_hex, write_curve_csv, RunManifest};
use spinlab::{DecayCurve, Error};

#[test]
fn curve_file_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let x: Vec<f64> = (0..7).map(|k| k as f64 * 1.1e-6).collect();
    let y: Vec<f64> = x.iter().map(|t| (-t / 3.3e-6f64).exp()).collect();
    let curve = DecayCurve::new(x, y, Some(vec![1.0 / 3.0; 7])).unwrap();
    write_curve_csv(&path, &curve).unwrap();
    let back = read_curve_csv(&path).unwrap();
    assert_eq!(back.abscissa, curve.abscissa);
    assert_eq!(back.amplitude, curve.amplitude);
    assert_eq!(back.stderr, curve.stderr);
}

#[test]
fn t1_file_accepts_times_or_rates() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("rates.csv");
    let b = dir.path().join("times.csv");
    fs::write(&a, "temperature_K,rate_Hz,sigma_Hz\n4.5,0.25,0.01\n6,3.0,0.1\n").unwrap();
    fs::write(&b, "# seconds\ntemperature_K,T1_s\n4.5,4.0\n6,0.3333333333333333\n").unwrap();
    let ra = read_t1_csv(&a, 1.02).unwrap();
    let rb = read_t1_csv(&b, 1.02).unwrap();
    assert_eq!(ra.points.len(), 2);
    assert!((ra.points[1].rate - rb.points[1].rate).abs() < 1e-12);
    assert_eq!(ra.points[0].sigma, 0.01);
    assert_eq!(rb.points[0].sigma, 0.0);
    assert_eq!(ra.field, 1.02);
}

#[test]
fn stim_echo_rows_group_by_tau() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    let mut text = String::from("tau_s,tw_s,amplitude\n");
    for tau in [2e-7, 5e-7] {
        for tw in [0.0, 1e-4, 2e-4] {
            text += &format!("{tau},{tw},{}\n", (-tw / 1e-3f64).exp());
        }
    }
    fs::write(&path, text).unwrap();
    let surfaces = read_stim_echo_csv(&path).unwrap();
    assert_eq!(surfaces.len(), 2);
    assert_eq!(surfaces[1].tau, 5e-7);
    assert_eq!(surfaces[1].points.len(), 3);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_curve_csv(&dir.path().join("nope.csv")), Err(Error::Io(_))));
}

#[test]
fn manifest_records_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("project.toml");
    fs::write(&cfg, "schema_version = 1\n").unwrap();
    let m = RunManifest::new(vec!["spinlab".into(), "levels".into()]).with_config(&cfg).unwrap();
    assert_eq!(m.config_sha256.as_deref(), Some(sha256_hex(b"schema_version = 1\n").as_str()));
    let out = dir.path().join("run_manifest.json");
    m.write(&out).unwrap();
    let back: RunManifest = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(back, m);
    assert!(load_config(&cfg).unwrap().spin_systems.is_empty());
}
