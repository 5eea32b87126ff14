use std::path::Path;
use std::process::{Command, Output};

fn sbmlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmlab")).arg("--out").arg(out).args(args).output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (name, body) in [("bad.toml", "seed = [1,"), ("unknown.toml", "seed = 1\nbogus = 2\n"), ("range.toml", "[profile]\nstep = -1.0\n")] {
        let cfg = tmp.path().join(name);
        std::fs::write(&cfg, body).unwrap();
        let r = sbmlab(&["--config", cfg.to_str().unwrap(), "profile"], &out);
        assert_eq!(r.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!out.exists(), "{name} left output behind");
    }
}

#[test]
fn invalid_tauberian_constants_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = sbmlab(&["tauberian", "--c1", "2", "--c2", "1"], &out);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn missing_input_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = sbmlab(&["dimension", "--input", tmp.path().join("nope.txt").to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn profile_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let r = sbmlab(&["profile"], tmp.path());
    assert!(r.status.success());
    let doc = json(&tmp.path().join("profile.json"));
    let f0 = doc["f0"].as_f64().unwrap();
    assert!(f0 > 1.0 && f0 < 2.0);
    let csv = std::fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("# table=profile\n"));
    assert!(csv.contains("# config_hash="));
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn half_f_spectrum_has_lambda0_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let r = sbmlab(&["spectrum", "--phi", "half-f", "--n-max", "2"], tmp.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let doc = json(&tmp.path().join("spectrum.json"));
    let l0 = doc["lambda0"].as_f64().unwrap();
    assert!((l0 - 0.5).abs() < 1e-4, "{l0}");
    let spectrum = std::fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    assert!(spectrum.lines().any(|l| l.starts_with("phi,n,lambda")));
}

#[test]
fn cantor_dimension_and_tauberian_notes() {
    let tmp = tempfile::tempdir().unwrap();
    let r = sbmlab(&["dimension", "--cantor", "10"], tmp.path());
    assert!(r.status.success());
    let slope = json(&tmp.path().join("dim.json"))["slope"].as_f64().unwrap();
    assert!((slope - 2f64.ln() / 3f64.ln()).abs() < 0.03, "{slope}");

    let r = sbmlab(&["tauberian", "--c1", "1", "--c2", "1", "--p", "1"], tmp.path());
    assert!(r.status.success());
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("d1"), "{stdout}");
    assert!(tmp.path().join("tauberian.json").exists());
}

#[test]
fn input_points_file() {
    let tmp = tempfile::tempdir().unwrap();
    let pts = tmp.path().join("pts.txt");
    let body: String = (0..2000).map(|i| format!("{}\n", (i as f64 + 0.5) / 2000.0)).collect();
    std::fs::write(&pts, body).unwrap();
    let out = tmp.path().join("out");
    let r = sbmlab(&["dimension", "--input", pts.to_str().unwrap(), "--beta", "0.5"], &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let doc = json(&out.join("dim.json"));
    assert!((doc["slope"].as_f64().unwrap() - 1.0).abs() < 0.05, "{doc}");
}

#[test]
fn degenerate_points_are_a_module_error() {
    let tmp = tempfile::tempdir().unwrap();
    let pts = tmp.path().join("pts.txt");
    std::fs::write(&pts, "0.5\n0.5\n").unwrap();
    let out = tmp.path().join("out");
    let r = sbmlab(&["dimension", "--input", pts.to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(3));
    assert!(!out.exists());
}
