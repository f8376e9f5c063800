use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn hgframe(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgframe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_config(args: &[&str], config: &Path, out: &Path) -> Output {
    let mut full = args.to_vec();
    full.extend(["--config", config.to_str().unwrap()]);
    hgframe(&full, out)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

const ORTHONORMAL_BODY: &str = r#"
[window]
preset = "half-box-sqrt2"
n = 512

[lattice]
a = 1.0
b = 2.0
k_max = 3

[grid]
n_alpha = 32
"#;

#[test]
fn orthonormal_window_passes_orthogonality() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_config(&["check", "orth"], &configs().join("orthonormal.toml"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["command"], "check orth");
    assert!(out.join("self_bracket.csv").exists());
}

#[test]
fn overlapping_box_fails_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_config(&["check", "orth"], &configs().join("box_overlap.toml"), &out);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["verdict"], "fail");
    let w = &r["result"]["report"]["worst_witness"];
    assert!(w["alpha"].as_f64().unwrap() < 1.0);
    assert!(w["index"].is_object());
}

#[test]
fn t_outside_unit_interval_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{ORTHONORMAL_BODY}\n[field]\nt = 1.0\n"));
    let o = run_config(&["check", "orth"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("field.t"));
}

#[test]
fn non_integer_lattice_product_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ORTHONORMAL_BODY.replace("b = 2.0", "b = 1.5") + "\n[field]\nt = 0.7\n";
    let cfg = write_config(tmp.path(), &text);
    let o = run_config(&["check", "orth"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lattice.a*b"));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{ORTHONORMAL_BODY}\n[field]\nt = 0.6\ncolour = 1\n"));
    let o = run_config(&["bracket"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config(&["bracket"], &tmp.path().join("absent.toml"), &tmp.path().join("out"));
    assert_ne!(o.status.code(), Some(0));
    assert_ne!(o.status.code(), Some(1));
}

#[test]
fn zero_window_gives_zero_bracket_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ORTHONORMAL_BODY.replace("preset = \"half-box-sqrt2\"", "preset = \"zero\"") + "\n[field]\nt = 0.6\n";
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run_config(&["check", "orth"], &cfg, &out);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("self_bracket.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(rec[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(&rec[3], "false");
        rows += 1;
    }
    assert_eq!(rows, 32);
}

#[test]
fn orthogonal_windows_give_flat_condition_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("re,im\n");
    for _ in 0..512 {
        csv.push_str(&format!("{},0\n", std::f64::consts::SQRT_2));
    }
    fs::write(tmp.path().join("upper_half.csv"), csv).unwrap();
    let text = format!(
        "{ORTHONORMAL_BODY}\n[partner_window]\nfile = \"upper_half.csv\"\nsupport = [0.5, 1.0]\n\n[field]\nt = 0.6\n"
    )
    .replace("n = 512", "n = 1024");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run_config(&["gabor-scan"], &cfg, &out);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("gabor_scan.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let alpha: f64 = rec[1].parse().unwrap();
        let profile: f64 = rec[3].parse().unwrap();
        assert!(alpha > 0.6);
        assert!((profile + 1.0).abs() < 1e-12, "{profile}");
        rows += 1;
    }
    // scan rows cover the support (t, 1] of the field
    assert_eq!(rows, 13);
}

#[test]
fn empty_classify_instance_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("inst.json"), r#"{"fibers": []}"#).unwrap();
    let cfg = write_config(tmp.path(), "[classify]\ninstance = \"inst.json\"\n");
    let o = run_config(&["classify"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn canonical_duals_classify_as_everything() {
    let tmp = tempfile::tempdir().unwrap();
    // orthonormal basis of C^2 plus a repeated vector; its canonical dual is
    // computed by hand: S = diag(2, 1), so the dual divides the first row by 2.
    let inst = r#"{"fibers": [{
        "alpha": 0.5,
        "system": [[[1,0],[0,0]], [[0,0],[1,0]], [[1,0],[0,0]]],
        "dual":   [[[0.5,0],[0,0]], [[0,0],[1,0]], [[0.5,0],[0,0]]]
    }]}"#;
    fs::write(tmp.path().join("inst.json"), inst).unwrap();
    let cfg = write_config(tmp.path(), "[classify]\ninstance = \"inst.json\"\n");
    let out = tmp.path().join("out");
    let o = run_config(&["classify"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    for key in ["alternate_everywhere", "oblique_everywhere", "type_i_everywhere", "type_ii_everywhere"] {
        assert_eq!(r["result"][key], true, "{key}");
    }
}

#[test]
fn shipped_classify_example_flags_the_perturbed_fiber() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_config(&["classify"], &configs().join("classify.toml"), &out);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["result"]["non_alternate_alphas"], serde_json::json!([0.625]));
}

#[test]
fn command_line_overrides_win() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("bracket.toml");
    let o = hgframe(&["bracket", "--config", cfg.to_str().unwrap(), "--grid", "16", "--tol", "1e-7"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["config"]["grid"]["n_alpha"], 16);
    assert_eq!(r["config"]["tolerances"]["tol"], 1e-7);
    let text = fs::read_to_string(out.join("bracket.csv")).unwrap();
    assert_eq!(text.lines().count(), 17);
}
