use std::path::Path;
use std::process::{Command, Output};

fn ck(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ck-lab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_passes_for_tan_and_fails_for_worst() {
    let d = tempfile::tempdir().unwrap();
    let o = ck(d.path(), &["check", "--phase", "tan", "--n", "3", "--samples", "40"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&d.path().join("check.json"));
    assert_eq!(v["config"]["check"]["samples"], 40);
    assert_eq!(v["result"]["verdict"], true);
    let csv = std::fs::read_to_string(d.path().join("check.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));

    let o = ck(d.path(), &["check", "--phase", "worst", "--samples", "40"]);
    assert_eq!(code(&o), 1);
    let o = ck(d.path(), &["check", "--phase", "worst", "--samples", "40", "--expect", "fail"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn usage_errors_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&ck(d.path(), &["check", "--phase", "nope"])), 2);
    assert_eq!(code(&ck(d.path(), &["check", "--samples", "x"])), 2);
    assert_eq!(code(&ck(d.path(), &["frobnicate"])), 2);
    assert_eq!(code(&ck(d.path(), &["straighten", "--phase", "tan", "--explicit"])), 2);
    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "sede = 3\n").unwrap();
    let o = ck(d.path(), &["--config", bad.to_str().unwrap(), "check"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn held_lock_exits_with_three() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join(".ck-lab.lock"), "").unwrap();
    assert_eq!(code(&ck(d.path(), &["abc-verify", "--phase", "rest"])), 3);
    std::fs::remove_file(d.path().join(".ck-lab.lock")).unwrap();
    assert_eq!(code(&ck(d.path(), &["abc-verify", "--phase", "rest"])), 0);
    assert!(!d.path().join(".ck-lab.lock").exists());
}

#[test]
fn flags_override_toml_which_overrides_defaults() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\n[check]\nsamples = 12\nfail_floor = 0.2\n").unwrap();
    let o = ck(d.path(), &["--config", cfg.to_str().unwrap(), "check", "--phase", "rest", "--samples", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&d.path().join("check.json"));
    assert_eq!(v["config"]["seed"], 5);
    assert_eq!(v["config"]["check"]["samples"], 7);
    assert_eq!(v["config"]["check"]["fail_floor"], 0.2);
    assert_eq!(v["config"]["check"]["expect"], "pass");
}

#[test]
fn outputs_are_deterministic_and_timestamps_stay_in_the_log() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "3", "straighten", "--phase", "tan"];
    assert_eq!(code(&ck(a.path(), &args)), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_ck-lab"))
        .env("CK_LAB_THREADS", "1")
        .arg("--out")
        .arg(b.path())
        .args(args)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    // Only the output directory may differ.
    let strip = |d: &Path| {
        let text = std::fs::read_to_string(d.join("straighten.json")).unwrap();
        text.replace(d.to_str().unwrap(), "OUT")
    };
    let (fa, fb) = (strip(a.path()), strip(b.path()));
    assert!(fa == fb, "outputs differ");
    assert!(a.path().join("run.log").exists());
    assert!(!fa.contains("time"));
}

#[test]
fn straighten_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let radii = "2^-3,2^-4,2^-5,2^-6,2^-7";
    assert_eq!(code(&ck(d.path(), &["straighten", "--phase", "rest", "--radii", radii])), 0);
    let v = json(&d.path().join("straighten.json"));
    assert_eq!(v["result"]["fit"]["exact"], true);
    assert_eq!(code(&ck(d.path(), &["straighten", "--phase", "worst", "--explicit", "--anchor", "0", "--radii", radii])), 0);
    assert_eq!(code(&ck(d.path(), &["straighten", "--phase", "worst", "--naive-abc", "--anchor", "0", "--radii", radii])), 1);
}

#[test]
fn trace_and_plots() {
    let d = tempfile::tempdir().unwrap();
    let o = ck(d.path(), &["--plot", "trace", "--phase", "tan", "--xi", "0.05,-0.04", "--v", "0.06,0.1", "--points", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1 + 9);
    let o = ck(d.path(), &["--plot", "tan-coniness", "--steps", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(d.path().join("coniness.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.contains("<!-- config"));
    assert!(svg.contains("<!-- config"));
}

#[test]
fn sk_run_writes_a_reloadable_family() {
    let d = tempfile::tempdir().unwrap();
    let o = ck(d.path(), &["tubes", "sk-run", "--phase", "rest", "--delta", "2^-4", "--eta", "0.25", "--grid-res", "64"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fam = d.path().join("family.jsonl");
    let first = std::fs::read_to_string(&fam).unwrap();
    assert!(first.starts_with("# config: "));
    let e = tempfile::tempdir().unwrap();
    let o = ck(e.path(), &["tubes", "sk-run", "--phase", "rest", "--delta", "2^-4", "--eta", "0.25", "--grid-res", "64", "--family", fam.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let a = json(&d.path().join("sk.json"));
    let b = json(&e.path().join("sk.json"));
    assert_eq!(a["result"]["union_volume"], b["result"]["union_volume"]);
    assert_eq!(a["result"]["members"], 256);
}
