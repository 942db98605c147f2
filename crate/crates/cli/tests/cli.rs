use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spinchaos(args: &[&str], out_base: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinchaos"))
        .args(args)
        .env("SPINCHAOS_OUT_DIR", out_base)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["separatrix", "--bogus"],
        vec!["lyapunov-scan-L", "--L", "9..4"],
        vec!["quantum-relax", "--S", "5/2"],
        vec!["recipe", "fig99"],
    ] {
        let o = spinchaos(&args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[separatrix]\nhh = 1.0\n").unwrap();
    let o = spinchaos(&["separatrix", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn numeric_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // No saddle-energy sign change inside this bracket.
    let o = spinchaos(&["separatrix", "--lo", "1.3", "--hi", "2.0"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "numeric");
}

#[test]
fn env_dir_manifest_and_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spinchaos(&["separatrix", "--scaling-decades", "2,3,4", "--seed", "5"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("separatrix");
    let m = manifest(&dir);
    assert_eq!(m["seed"], 5);
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert!(files.contains(&"scalings.csv") && files.contains(&"report.json"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let j = report["fixed_point"]["coupling"].as_f64().unwrap();
    assert!((j - 1.1504059085).abs() < 1e-6, "J* = {j}");

    let ok = spinchaos(&["verify", dir.to_str().unwrap()], tmp.path());
    assert_eq!(ok.status.code(), Some(0));
    fs::write(dir.join("scalings.csv"), "tampered\n").unwrap();
    let bad = spinchaos(&["verify", dir.to_str().unwrap()], tmp.path());
    assert_eq!(bad.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("mismatch"));
}

#[test]
fn flags_override_config_and_replay_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 11\nformat = \"ndjson\"\n[classical-orbit]\nJ = 0.79\nstride = 100\n").unwrap();
    let out = tmp.path().join("a");
    let o = spinchaos(
        &["classical-orbit", "--config", cfg.to_str().unwrap(), "--J", "1.76", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["classical-orbit"]["J"], "1.76");
    assert_eq!(m["config"]["classical-orbit"]["stride"], 100);
    assert!(out.join("orbit.ndjson").exists());

    let again = tmp.path().join("b");
    let o = spinchaos(&["replay", out.to_str().unwrap(), "--out", again.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(out.join("orbit.ndjson")).unwrap(), fs::read(again.join("orbit.ndjson")).unwrap());
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let o = spinchaos(
            &["arnold-watch", "--t-end", "200", "--dt", "0.01", "--record-every", "0.5", "--seed", seed, "--out", out.to_str().unwrap()],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("samples.csv")).unwrap()
    };
    assert_eq!(run("a", "3"), run("b", "3"));
    assert_ne!(run("a", "3"), run("c", "4"));
}

#[test]
fn arnold_watch_resumes_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let common = ["arnold-watch", "--dt", "0.01", "--record-every", "5", "--drift-width", "3000", "--seed", "2"];
    let go = |out: &Path, extra: &[&str]| {
        let mut args: Vec<&str> = common.to_vec();
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out.to_str().unwrap()]);
        let o = spinchaos(&args, tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let whole = tmp.path().join("whole");
    go(&whole, &["--t-end", "15000"]);
    let parts = tmp.path().join("parts");
    go(&parts, &["--t-end", "10000"]);
    assert!(parts.join("checkpoint.json").exists());
    go(&parts, &["--t-end", "15000", "--resume"]);
    for f in ["samples.csv", "drift.csv", "checkpoint.json"] {
        assert_eq!(fs::read(whole.join(f)).unwrap(), fs::read(parts.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn recipes_list_and_show() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spinchaos(&["recipe", "--list"], tmp.path());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["fig2", "fig4b", "fig8", "fig16", "fig21"] {
        assert!(text.contains(name), "{name}");
    }
    let o = spinchaos(&["recipe", "fig16", "--show"], tmp.path());
    assert!(String::from_utf8_lossy(&o.stdout).contains("subcommand = \"stability-certificate\""));
}
