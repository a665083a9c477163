use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qchannel_cli::{run, validate_str, ExperimentConfig, Overrides, MANIFEST_NAME};
use serde_json::{json, Value};

fn qchannel(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qchannel")).args(args).env("QCHANNEL_OUTPUT_ROOT", root).output().unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn parse(v: &Value) -> ExperimentConfig {
    serde_json::from_value(v.clone()).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn edge_config() -> Value {
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    json!({ "mode": "edge-sweep", "noiseless": true, "p_grid": grid, "output_dir": "edge" })
}

#[test]
fn well_formed_config_has_no_diagnostics() {
    assert!(validate_str(&edge_config().to_string()).is_empty());
}

#[test]
fn p_grid_outside_unit_interval_is_reported_by_path() {
    let mut cfg = edge_config();
    cfg["p_grid"] = json!([0.2, 1.5]);
    let ds = validate_str(&cfg.to_string());
    assert_eq!(ds.len(), 1, "{ds:?}");
    assert_eq!(ds[0].path, "$.p_grid[1]");
}

#[test]
fn schedule_fractions_must_sum_to_one() {
    let cfg = json!({
        "mode": "process-tomo", "noiseless": true, "output_dir": "x",
        "channel": { "schedule": { "segments": [
            { "rotation": { "axis": [0, 0, 1], "angle_deg": 0 }, "fraction": 0.6 },
            { "rotation": { "axis": [0, 0, 1], "angle_deg": 180 }, "fraction": 0.3 }
        ] } }
    });
    let ds = validate_str(&cfg.to_string());
    assert_eq!(ds.len(), 1, "{ds:?}");
    assert_eq!(ds[0].path, "$.channel.schedule");
    assert!(ds[0].message.contains("duty-cycle schedule") && ds[0].message.contains("fractions sum to 0.8999"), "{}", ds[0].message);
}

#[test]
fn schema_errors_carry_json_paths() {
    let ds = validate_str(r#"{"mode": "edge-sweep", "output_dir": "x", "input_state": {"phase": "a"}}"#);
    assert_eq!(ds.len(), 1);
    assert_eq!(ds[0].path, "$.input_state.phase");

    let ds = validate_str(r#"{"mode": "warp", "output_dir": "x"}"#);
    assert_eq!(ds[0].path, "$.mode");

    let ds = validate_str(r#"{"mode": "edge-sweep", "output_dir": "x", "colour": 1}"#);
    assert!(ds[0].message.contains("colour"));
}

#[test]
fn mode_requirements() {
    let ds = validate_str(r#"{"mode": "process-tomo", "output_dir": "x", "seeds": [1]}"#);
    assert!(ds.iter().any(|d| d.path == "$.channel"), "{ds:?}");
    let ds = validate_str(r#"{"mode": "edge-sweep", "output_dir": "x", "p_grid": [0.5]}"#);
    assert!(ds.iter().any(|d| d.path == "$.seeds"), "{ds:?}");
    let ds = validate_str(r#"{"mode": "state-tomo", "output_dir": "x", "noiseless": true, "input_state": {"mixing": 1.2}}"#);
    assert!(ds.iter().any(|d| d.path == "$.input_state.mixing"), "{ds:?}");
}

#[test]
fn noiseless_edge_sweep_csv_follows_the_law() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run(&parse(&edge_config()), Some(tmp.path())).unwrap();
    let rows = read_csv(&tmp.path().join("edge/edge_sweep.csv"));
    assert_eq!(rows.len(), 21);
    for r in &rows {
        let p: f64 = r[0].parse().unwrap();
        assert_eq!(r[1], "");
        let d: Vec<f64> = r[2..5].iter().map(|x| x.parse().unwrap()).collect();
        let law = [1.0, (1.0 - 2.0 * p).abs(), (1.0 - 2.0 * p).abs()];
        for k in 0..3 {
            assert!((d[k] - law[k]).abs() < 1e-9, "p = {p}: {d:?}");
        }
    }
    assert!(m.runs.iter().all(|r| r.converged));
}

#[test]
fn manifest_lists_existing_files_and_is_written_last() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "mode": "process-tomo", "flux": 1e4, "seeds": [1, 2], "mesh_resolution": 6, "output_dir": "proc",
        "channel": { "pauli_mixture": { "p0": 0.7, "px": 0.0, "py": 0.0, "pz": 0.3 } }
    });
    let m = run(&parse(&cfg), Some(tmp.path())).unwrap();
    let dir = tmp.path().join("proc");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap()).unwrap();
    let listed: Vec<String> =
        manifest["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert_eq!(listed, m.artifacts);
    for f in &listed {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let mut on_disk: Vec<String> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.sort();
    let mut expected = listed.clone();
    expected.push(MANIFEST_NAME.to_string());
    expected.sort();
    assert_eq!(on_disk, expected);
    for csv_name in listed.iter().filter(|f| f.ends_with(".csv")) {
        assert!(listed.contains(&format!("{csv_name}.json")), "sidecar for {csv_name}");
    }
    assert_eq!(manifest["config"]["mode"], "process-tomo");
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 2);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn state_tomo_concurrence_near_generated_mixing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "mode": "state-tomo", "input_state": { "phase": -0.12, "mixing": 0.1 },
        "flux": 1e4, "seeds": [4], "output_dir": "st"
    });
    run(&parse(&cfg), Some(tmp.path())).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("st/state_seed4.json")).unwrap()).unwrap();
    let c = report["concurrence"].as_f64().unwrap();
    // Mixing 0.1 gives 0.85 exactly; one seed at flux 1e4 scatters by about 0.01.
    assert!((c - 0.85).abs() < 0.05, "{c}");
    assert!(report["mle"]["converged"].as_bool().unwrap());
}

#[test]
fn classical_probe_of_idle_epc_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "mode": "classical-probe", "output_dir": "probe",
        "channel": { "epc": { "retardance_program": [ { "retardances": [0, 0, 0, 0], "fraction": 1.0 } ] } }
    });
    run(&parse(&cfg), Some(tmp.path())).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("probe/probe.json")).unwrap()).unwrap();
    for (r, row) in report["lambda"].as_array().unwrap().iter().enumerate() {
        for (c, v) in row.as_array().unwrap().iter().enumerate() {
            let want = if r == c { 1.0 } else { 0.0 };
            assert!((v.as_f64().unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn generated_counts_reconstruct_through_counts_path() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = json!({ "mode": "generate-counts", "flux": 1e4, "seeds": [21], "output_dir": "gen" });
    run(&parse(&gen), Some(tmp.path())).unwrap();
    let counts = tmp.path().join("gen/counts_seed21.json");
    let tomo = json!({ "mode": "state-tomo", "counts_path": counts, "output_dir": "tomo" });
    run(&parse(&tomo), Some(tmp.path())).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("tomo/state_counts.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 21);
    assert!(report["fidelity_to_source"].as_f64().unwrap() > 0.99);
}

#[test]
fn overrides_win_over_the_file() {
    let mut cfg = parse(&json!({ "mode": "edge-sweep", "seeds": [1, 2], "p_grid": [0.5], "output_dir": "a" }));
    Overrides { seed: Some(9), flux: Some(5e3), accidentals: Some(1.0), noiseless: false, output_dir: Some("b".into()) }
        .apply(&mut cfg);
    assert_eq!(cfg.seeds, vec![9]);
    assert_eq!(cfg.flux, 5e3);
    assert_eq!(cfg.accidentals, 1.0);
    assert_eq!(cfg.output_dir, PathBuf::from("b"));
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "good.json", &edge_config());
    let out = qchannel(&["validate", good.to_str().unwrap()], tmp.path());
    assert!(out.status.success());

    let out = qchannel(&["run", good.to_str().unwrap(), "--output-dir", "flagged"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("flagged").join(MANIFEST_NAME).is_file());

    let mut bad = edge_config();
    bad["p_grid"] = json!([1.5]);
    let bad = write_config(tmp.path(), "bad.json", &bad);
    let out = qchannel(&["validate", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_grid[0]"));
    assert_eq!(qchannel(&["run", bad.to_str().unwrap()], tmp.path()).status.code(), Some(1));

    assert_eq!(qchannel(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(qchannel(&["run", tmp.path().join("missing.json").to_str().unwrap()], tmp.path()).status.code(), Some(3));

    // Fully mixed input leaves nothing to invert: a domain error at run time.
    let mixed = json!({ "mode": "process-tomo", "noiseless": true, "input_state": { "mixing": 1.0 }, "output_dir": "m",
                         "channel": { "pauli_mixture": { "p0": 1.0, "px": 0.0, "py": 0.0, "pz": 0.0 } } });
    let mixed = write_config(tmp.path(), "mixed.json", &mixed);
    let out = qchannel(&["run", mixed.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ill-conditioned"));
}

#[test]
fn validate_and_run_agree_on_rejections() {
    let tmp = tempfile::tempdir().unwrap();
    let base = json!({ "mode": "state-tomo", "noiseless": true, "output_dir": "v" });
    let variants = [
        json!({ "flux": -1.0 }),
        json!({ "accidentals": -0.5 }),
        json!({ "mesh_resolution": 2 }),
        json!({ "input_state": { "mixing": -0.1 } }),
        json!({ "edge_rotation": { "axis": [0, 0, 0], "angle_deg": 90 } }),
        json!({ "max_condition": 0.5 }),
        json!({ "noiseless": false }),
        json!({}),
    ];
    for v in variants {
        let mut cfg = base.clone();
        for (k, val) in v.as_object().unwrap() {
            cfg[k] = val.clone();
        }
        let diagnostics = validate_str(&cfg.to_string());
        let ran = run(&parse(&cfg), Some(tmp.path()));
        assert_eq!(diagnostics.is_empty(), ran.is_ok(), "{cfg}: {diagnostics:?}");
    }
}
