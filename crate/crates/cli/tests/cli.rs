//! End-to-end checks of the binary: flag validation, output content, and
//! seed determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bbcav"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bbcav-cli-{}-{name}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(path: &Path) -> Csv {
    let text = std::fs::read_to_string(path).unwrap();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if header.is_empty() {
            header = fields;
        } else {
            rows.push(fields);
        }
    }
    Csv { header, rows }
}

impl Csv {
    fn column(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name} in {:?}", self.header))
    }

    fn value(&self, row: &[String], name: &str) -> f64 {
        row[self.column(name)].parse().unwrap()
    }
}

#[test]
fn rejects_bad_flags() {
    let out = bin()
        .args(["simulate", "--mode", "bogus", "--out", "/tmp/never.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // theta outside [0, 2 pi)
    let out = bin()
        .args([
            "simulate",
            "--mode",
            "free-sb",
            "--theta",
            "7.0",
            "--out",
            "/tmp/never.csv",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));
}

#[test]
fn decoupled_run_preserves_purity_at_even_n() {
    let dir = scratch("sim-bb");
    let path = dir.join("bb.csv");
    run_ok(bin().args([
        "simulate",
        "--mode",
        "bb",
        "--theta",
        "0",
        "--n-max",
        "20",
        "--input-state",
        "D",
        "--out",
        path.to_str().unwrap(),
    ]));
    let csv = read_csv(&path);
    assert_eq!(csv.rows.len(), 21);
    for row in &csv.rows {
        let n: u32 = row[0].parse().unwrap();
        if n.is_multiple_of(2) {
            let purity = csv.value(row, "purity");
            let comp = csv.value(row, "fidelity_compensated");
            assert!((purity - 1.0).abs() < 1e-9, "purity {purity} at n = {n}");
            assert!((comp - 1.0).abs() < 1e-9);
        }
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn zero_bandwidth_keeps_everything_pure() {
    let dir = scratch("sim-sigma0");
    let path = dir.join("pure.csv");
    run_ok(bin().args([
        "simulate",
        "--mode",
        "free",
        "--sigma-phi",
        "0",
        "--n-max",
        "12",
        "--input-state",
        "R",
        "--out",
        path.to_str().unwrap(),
    ]));
    let csv = read_csv(&path);
    for row in &csv.rows {
        assert!((csv.value(row, "purity") - 1.0).abs() < 1e-12);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn free_dephasing_matches_the_closed_form() {
    let dir = scratch("sim-free");
    let path = dir.join("free.csv");
    run_ok(bin().args([
        "simulate",
        "--mode",
        "free",
        "--sigma-phi",
        "0.0839",
        "--input-state",
        "D",
        "--n-max",
        "15",
        "--out",
        path.to_str().unwrap(),
    ]));
    let csv = read_csv(&path);
    let row10 = csv.rows.iter().find(|r| r[0] == "10").unwrap();
    assert!((csv.value(row10, "purity") - 0.6223).abs() < 5e-4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn trace_preset_reproduces_the_known_curves() {
    let dir = scratch("fig2");
    run_ok(bin().args([
        "reproduce",
        "--figure",
        "2",
        "--out-dir",
        dir.to_str().unwrap(),
        "--n-double-max",
        "10",
    ]));
    for file in ["fig2.csv", "fig2_purity.svg", "fig2_fidelity.svg"] {
        assert!(dir.join(file).exists(), "{file} missing");
    }
    let csv = read_csv(&dir.join("fig2.csv"));
    let sigma = 0.0839_f64;
    for row in &csv.rows {
        let k: f64 = row[csv.column("n_double")].parse().unwrap();
        let state = &row[csv.column("state")];
        let protocol = &row[csv.column("protocol")];
        if state == "H" && protocol == "free" {
            assert!((csv.value(row, "fidelity_compensated") - 1.0).abs() < 1e-9);
            assert!((csv.value(row, "fidelity_raw") - 1.0).abs() < 1e-9);
        }
        if state == "D" && protocol == "free" {
            let n = 2.0 * k;
            let expect = (1.0 + (-2.0 * n * n * sigma * sigma).exp()) / 2.0;
            assert!(
                (csv.value(row, "purity") - expect).abs() < 1e-6,
                "purity off at cycle {k}"
            );
        }
        if protocol == "bb" {
            assert!((csv.value(row, "purity") - 1.0).abs() < 1e-9);
        }
    }
    for file in ["fig2_purity.svg", "fig2_fidelity.svg"] {
        let svg = std::fs::read_to_string(dir.join(file)).unwrap();
        assert!(svg.contains("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 6);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_preset_emits_the_retarder_scan() {
    let dir = scratch("fig3");
    run_ok(bin().args([
        "reproduce",
        "--figure",
        "3",
        "--out-dir",
        dir.to_str().unwrap(),
        "--n-double-max",
        "3",
        "--sphere-points",
        "64",
    ]));
    let csv = read_csv(&dir.join("fig3.csv"));
    assert_eq!(
        csv.header,
        vec![
            "n_double",
            "theta",
            "protocol",
            "avg_purity",
            "avg_fidelity_compensated"
        ]
    );
    // 5 thetas x 2 protocols x 4 cycle values
    assert_eq!(csv.rows.len(), 40);
    for row in &csv.rows {
        let theta: f64 = row[csv.column("theta")].parse().unwrap();
        let protocol = &row[csv.column("protocol")];
        if theta == 0.0 && protocol == "bb" {
            assert!((csv.value(row, "avg_purity") - 1.0).abs() < 1e-9);
        }
        let p = csv.value(row, "avg_purity");
        assert!((0.5..=1.0 + 1e-9).contains(&p));
    }
    for file in ["fig3_purity.svg", "fig3_fidelity.svg"] {
        let svg = std::fs::read_to_string(dir.join(file)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 10);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_preset_accepts_custom_angles() {
    let dir = scratch("fig3-custom");
    run_ok(bin().args([
        "reproduce",
        "--figure",
        "3",
        "--out-dir",
        dir.to_str().unwrap(),
        "--n-double-max",
        "2",
        "--sphere-points",
        "32",
        "--thetas",
        "0.5,1.0",
    ]));
    let csv = read_csv(&dir.join("fig3.csv"));
    // 2 thetas x 2 protocols x 3 cycle values
    assert_eq!(csv.rows.len(), 12);
    let out = bin()
        .args([
            "reproduce",
            "--figure",
            "3",
            "--out-dir",
            dir.to_str().unwrap(),
            "--thetas",
            "0.5,oops",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pipeline_is_byte_deterministic_per_seed() {
    let dir = scratch("pipe-det");
    let mut outputs = Vec::new();
    for (sub, threads) in [("a", "1"), ("b", "4")] {
        let out_dir = dir.join(sub);
        run_ok(bin().args([
            "pipeline",
            "--seed",
            "7",
            "--n-max",
            "5",
            "--counts",
            "20000",
            "--threads",
            threads,
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]));
        outputs.push(out_dir);
    }
    for file in ["counts.csv", "states.json", "fit.json"] {
        let a = std::fs::read(outputs[0].join(file)).unwrap();
        let b = std::fs::read(outputs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs across runs/threads");
    }
    // a different seed gives different counts
    let other = dir.join("c");
    run_ok(bin().args([
        "pipeline",
        "--seed",
        "8",
        "--n-max",
        "5",
        "--counts",
        "20000",
        "--out-dir",
        other.to_str().unwrap(),
    ]));
    assert_ne!(
        std::fs::read(outputs[0].join("counts.csv")).unwrap(),
        std::fs::read(other.join("counts.csv")).unwrap()
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pipeline_default_config_recovers_the_spread() {
    let dir = scratch("pipe-default");
    run_ok(bin().args([
        "pipeline",
        "--seed",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fit.json")).unwrap()).unwrap();
    let sigma = fit["fit"]["sigma_phi"].as_f64().unwrap();
    assert!(
        (sigma - 0.0839).abs() <= 0.005,
        "default run recovered sigma_phi = {sigma}"
    );
    // all three outputs carry the seed
    let counts = std::fs::read_to_string(dir.join("counts.csv")).unwrap();
    assert!(counts.contains("# seed = 1"));
    let states: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("states.json")).unwrap()).unwrap();
    assert_eq!(states["seed"], 1);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pipeline_rejects_invalid_round_trip_range() {
    let out = bin()
        .args([
            "pipeline",
            "--n-min",
            "0",
            "--counts",
            "100",
            "--out-dir",
            "/tmp/never-bbcav",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_min"));
}

#[test]
fn pipeline_with_no_counts_reports_no_signal() {
    let dir = scratch("pipe-zero");
    let out = bin()
        .args([
            "pipeline",
            "--counts",
            "0",
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("no signal"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pipeline_flags_override_the_config_file() {
    let dir = scratch("pipe-config");
    let config_path = dir.join("config.json");
    let config = serde_json::json!({
        "schema_version": 1,
        "seed": 3,
        "mode": "free",
        "theta": 0.0,
        "phi0": 0.2182,
        "sigma_phi": 0.0839,
        "input_state": "D",
        "n_min": 1,
        "n_max": 4,
        "quad_nodes": 64,
        "detection": {
            "mu_in": 1.0,
            "extraction": 0.04,
            "survival": 1.0,
            "detector_efficiency": 0.5,
            "pulses": 1e6,
            "round_trip_ns": 6.8,
            "bin_ps": 102.0,
            "window_bins": 10,
            "dark_rate": 0.0
        },
        "tomography": { "restarts": 4, "poisson_likelihood": false, "fitted_normalization": false },
        "fit": "purity"
    });
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let out_dir = dir.join("out");
    run_ok(bin().args([
        "pipeline",
        "--config",
        config_path.to_str().unwrap(),
        "--seed",
        "99",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["seed"], 99, "flag must override the config file seed");
    assert_eq!(fit["config"]["n_max"], 4, "file values survive otherwise");

    // malformed config is a descriptive failure
    std::fs::write(&config_path, "{\"schema_version\": 1, \"bogus\": true}").unwrap();
    let out = bin()
        .args([
            "pipeline",
            "--config",
            config_path.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}
