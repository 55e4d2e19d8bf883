use torus_sir::config::{ExperimentConfig, Mode};
use torus_sir::formats::{read_csv, read_field, OutputDir};
use torus_sir::manifest::{compare, OutputRecord};
use torus_sir_core::GridField;

const CONFIG: &str = r#"{
  "mode": "simulate",
  "model": {
    "beta": 1.0, "alpha": 0.5, "gamma": 0.05,
    "kernel": { "radius": 0.2, "exponent": 4 },
    "initial": { "region": { "shape": "rect", "x1": [0.0, 0.5], "x2": [0.0, 1.0] }, "p": 0.5 }
  },
  "simulation": { "n_agents": 50, "horizon": 0.2, "snapshot_times": [0.1, 0.2],
                  "pairings": [[{ "family": 5, "n1": 2, "n2": 0 }]] },
  "replicates": 2,
  "seed": 5
}"#;

#[test]
fn config_round_trips_through_json() {
    let c = ExperimentConfig::from_json(CONFIG).unwrap();
    let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
    assert_eq!(c, again);
    c.validate(Mode::Simulate).unwrap();
}

#[test]
fn unknown_keys_are_rejected() {
    let bad = CONFIG.replace("\"seed\": 5", "\"seed\": 5, \"sede\": 6");
    assert!(ExperimentConfig::from_json(&bad).is_err());
    let bad = CONFIG.replace("\"exponent\": 4", "\"exponent\": 4, \"shape\": 1");
    assert!(ExperimentConfig::from_json(&bad).is_err());
}

#[test]
fn invalid_values_are_config_errors() {
    let c = ExperimentConfig::from_json(&CONFIG.replace("\"p\": 0.5", "\"p\": 1.5")).unwrap();
    assert_eq!(c.validate(Mode::Simulate).unwrap_err().exit_code(), 2);
    let c = ExperimentConfig::from_json(CONFIG).unwrap();
    assert_eq!(c.validate(Mode::Pde).unwrap_err().exit_code(), 2, "mode mismatch");
    let c = ExperimentConfig::from_json(&CONFIG.replace("\"n2\": 0 }]]", "\"n2\": 1 }]]")).unwrap();
    assert!(c.validate(Mode::Simulate).is_err(), "odd basis index");
}

#[test]
fn fields_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = OutputDir::create(dir.path()).unwrap();
    let values: Vec<f64> = (0..64 * 64).map(|k| (k as f64).sin() / 3.0).collect();
    let field = GridField::new(64, values).unwrap();
    out.field("f_t000", "f", 0.25, &field).unwrap();
    let (meta, back) = read_field(&dir.path().join("f_t000.json")).unwrap();
    assert_eq!(back, field);
    assert_eq!((meta.n_grid, meta.time), (64, 0.25));

    torus_sir::formats::write_field_csv(&mut out, "f.csv", &field).unwrap();
    let (schema, header, rows) = read_csv(&dir.path().join("f.csv")).unwrap();
    assert_eq!(schema, "torus-sir grid-field v1");
    assert_eq!(header, ["i1", "i2", "x1", "x2", "value"]);
    assert_eq!(rows.len(), 64 * 64);
    let v: f64 = rows[77][4].parse().unwrap();
    assert_eq!(v, field.values()[77]);
    assert_eq!(out.written(), ["f_t000.bin", "f_t000.json", "f.csv"]);
}

#[test]
fn replay_comparison_names_every_difference() {
    let rec = |p: &str, h: &str| OutputRecord { path: p.into(), sha256: h.into(), bytes: 1 };
    let recorded = [rec("a", "1"), rec("b", "2"), rec("c", "3")];
    let reproduced = [rec("a", "1"), rec("b", "9"), rec("d", "4")];
    let r = compare(&recorded, &reproduced);
    assert!(!r.identical);
    assert_eq!((r.mismatched, r.missing, r.extra), (vec!["b".to_string()], vec!["c".to_string()], vec!["d".to_string()]));
    assert!(compare(&recorded, &recorded).identical);
}
