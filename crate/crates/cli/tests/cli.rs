use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn splatflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splatflow")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn schema() -> serde_json::Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/experiment-report.schema.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.gsf");
    let f = file.to_str().unwrap();
    assert!(splatflow(&["gen", "--count", "64", "--seed", "7", "--out", f]).status.success());
    assert_eq!(fs::metadata(&file).unwrap().len(), 16 + 64 * 236);
    let out = splatflow(&["verify", f]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS: 64 of 64 records checked"));

    let again = dir.path().join("h.gsf");
    splatflow(&["gen", "--count", "64", "--seed", "7", "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(&file).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn verify_reports_truncation_and_camera() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.gsf");
    let f = file.to_str().unwrap();
    splatflow(&["gen", "--count", "3", "--out", f]);
    let cam = dir.path().join("cam.json");
    fs::write(
        &cam,
        r#"{"rotation_cw": [[1,0,0],[0,1,0],[0,0,1]], "translation_cw": [0,0,40], "focal": [800,800], "principal": [640,360]}"#,
    )
    .unwrap();
    let out = splatflow(&["verify", f, "--camera", cam.to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["checked"], 3);

    let bytes = fs::read(&file).unwrap();
    fs::write(&file, &bytes[..bytes.len() - 10]).unwrap();
    let out = splatflow(&["verify", f]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("expected 708 bytes, found 698"), "{err}");
}

#[test]
fn run_window_prints_cycle_table() {
    let out = splatflow(&["run", "--method", "window", "--profile", "calibrated", "--mode", "analytic"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("| Window | 371 | 83 | 184 (183-185) | 130 (130-132) | 57 | 89 | 194 (194-196) |"), "{text}");
    for (method, row) in [
        ("naive", "| Naive | 1822 (1812-1861) | - | 1342 (1332-1381) | - | 1180 (1180-1181) | 670 (670-671) | 276 (276-277) |"),
        ("stream", "| Stream | 433 (428-485) | 262 (77-428) | 225 (158-429) | 135 (124-214) | 230 (158-483) | 79 (79-429) | 210 (210-429) |"),
    ] {
        let out = splatflow(&["run", "--method", method, "--mode", "analytic"]);
        assert!(stdout(&out).contains(row), "{}", stdout(&out));
    }
}

#[test]
fn run_writes_schema_valid_deterministic_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        let d = dir.to_str().unwrap().to_string();
        vec!["run", "--preset", "window-4", "--jitter", "--seed", "3", "--out"]
            .into_iter()
            .map(String::from)
            .chain([d])
            .collect::<Vec<_>>()
    };
    for dir in [a.path(), b.path()] {
        let argv = args(dir);
        let out = splatflow(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["window-4.json", "window-4_summary.csv", "window-4_kernels.csv", "window-4_table.md"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("window-4.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema()).unwrap();
    assert!(validator.is_valid(&report));
    let summary = fs::read_to_string(a.path().join("window-4_summary.csv")).unwrap();
    assert!(summary.starts_with(
        "preset,method,n_units,mode,interface,n_gaussians,total_cycles,throughput_bytes_per_sec,\
         throughput_mb_per_sec,speedup_vs_naive1,effective_parallel_efficiency,bottleneck_kernel\n"
    ));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = splatflow(&["sweep", "--mode", "analytic", "--out", d]);
    assert!(out.status.success());
    let json = dir.path().join("sweep.json");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 7);
    assert!(jsonschema::validator_for(&schema()).unwrap().is_valid(&report));

    let csv = splatflow(&["report", json.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(stdout(&csv), fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap());
    let md = splatflow(&["report", json.to_str().unwrap()]);
    assert!(stdout(&md).contains("| window-50 | analytic | 50 |"));
    let w50 = report["rows"][6]["speedup_vs_naive1"].as_f64().unwrap();
    assert!((w50 - 226.0).abs() < 0.01, "{w50}");
}

#[test]
fn external_cap_saturates() {
    let out = splatflow(&["run", "--preset", "window-25", "--external-cap", "45.8", "--mode", "analytic"]);
    assert!(stdout(&out).contains("| window-25 | analytic | 25 | 45.80 |"), "{}", stdout(&out));
}

#[test]
fn profile_file_overrides_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut profile = splatflow::arch::calibrated_profile(splatflow::arch::Method::Window);
    profile.name = "custom".into();
    profile.kernels.insert(splatflow::kernels::KernelKind::Color, splatflow::arch::CycleStats::fixed(500));
    let path = dir.path().join("p.toml");
    fs::write(&path, profile.to_toml().unwrap()).unwrap();
    let out = splatflow(&["run", "--method", "window", "--mode", "analytic", "--profile", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("| Window | 500 | 83 |"), "{}", stdout(&out));
}

#[test]
fn capacity_error_names_preset() {
    let out = splatflow(&["run", "--method", "window", "--units", "51"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("window-51") && err.contains("51"), "{err}");
}

#[test]
fn bad_arguments_fail() {
    assert!(!splatflow(&["run"]).status.success());
    assert!(!splatflow(&["run", "--preset", "window-3"]).status.success());
    assert!(!splatflow(&["gen", "--count", "0", "--out", "/tmp/never.gsf"]).status.success());
}
