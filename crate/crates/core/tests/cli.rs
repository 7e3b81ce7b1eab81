use std::fs;
use std::path::Path;

use kropina::cli::run;
use kropina::io::{manifest_path, read_trajectory, sha256_file, RunManifest};

fn kropina(args: &[&str]) -> i32 {
    let mut argv = vec!["kropina".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(&argv)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn trace_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("el.csv");
    let code = kropina(&["trace", "--model", "heisenberg:1", "--point", "0,0,0", "--dir", "1,0,1", "--out", p(&out)]);
    assert_eq!(code, 0);
    let traj = read_trajectory(&out).unwrap();
    assert!(traj.len() > 2);
    let m = RunManifest::read(&manifest_path(&out)).unwrap();
    assert_eq!(m.command, "trace");
    assert_eq!(m.model, "heisenberg:1");
    assert_eq!(m.outputs[0].sha256, sha256_file(&out).unwrap());
    assert_eq!(m.seeds[0].xi, vec![1.0, 0.0, 1.0]);
}

#[test]
fn trace_and_lift_trace_compare_clean() {
    let dir = tempfile::tempdir().unwrap();
    let el = dir.path().join("el.csv");
    let lift = dir.path().join("lift.csv");
    let seed = ["--model", "heisenberg:1", "--point", "0.1,-0.2,0", "--dir", "1,0.3,0.8"];
    let mut a = vec!["trace"];
    a.extend(seed);
    a.extend(["--out", p(&el)]);
    assert_eq!(kropina(&a), 0);
    let mut b = vec!["lift-trace"];
    b.extend(seed);
    b.extend(["--out", p(&lift)]);
    assert_eq!(kropina(&b), 0);
    let report = dir.path().join("cmp.json");
    assert_eq!(kropina(&["compare", "--a", p(&el), "--b", p(&lift), "--metric", "sup", "--tol", "1e-6", "--out", p(&report)]), 0);
    assert!(fs::read_to_string(manifest_path(&report)).unwrap().contains("\"compare\""));
    // an impossibly tight tolerance is a failed check, not a usage error
    assert_eq!(kropina(&["compare", "--a", p(&el), "--b", p(&lift), "--metric", "sup", "--tol", "0"]), 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(kropina(&["trace", "--bogus"]), 1);
    assert_eq!(kropina(&["trace", "--model", "no-such:1", "--point", "0,0,0", "--dir", "1,0,1", "--out", "/tmp/x.csv"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    assert_eq!(kropina(&["trace", "--model", "heisenberg:1", "--point", "0,0", "--dir", "1,0,1", "--out", p(&out)]), 1);
}

#[test]
fn kernel_seed_is_a_computation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    assert_eq!(kropina(&["trace", "--model", "heisenberg:1", "--point", "0,0,0", "--dir", "1,0,0", "--out", p(&out)]), 2);
}

#[test]
fn config_file_models_load() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.kropina");
    fs::write(&cfg, "label = \"closed\"\ndim = 2\ng11 = 1\ng22 = 1\nw = [1, 0.3*cos(x2)]\n").unwrap();
    let out = dir.path().join("ind.json");
    assert_eq!(kropina(&["indicatrix", "--model", p(&cfg), "--point", "0,0.1", "--out", p(&out)]), 0);
    let m = RunManifest::read(&manifest_path(&out)).unwrap();
    assert!(m.model_config.unwrap().contains("dim = 2"));
}

#[test]
fn equivalence_commands_pass() {
    assert_eq!(kropina(&["blowup", "--model", "heisenberg:1", "--point", "0,0,0", "--xi0", "1,0,0", "--v", "0,0,1", "--expect", "-1"]), 0);
    assert_eq!(kropina(&["equiv", "--model", "heisenberg:1", "--point", "0,0,0", "--dir", "1,0,1", "--scale", "2", "--beta", "0.1*x"]), 0);
    assert_eq!(kropina(&["equiv", "--model", "heisenberg:1", "--point", "0,0,0", "--dir", "1,0,1", "--scale", "-1"]), 0);
    assert_eq!(kropina(&["curvature", "--model", "burns-shnider:1", "--point", "0.5,0.2,0.3"]), 0);
}
