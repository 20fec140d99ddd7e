use std::path::Path;
use std::process::{Command, Output};

fn xbar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xbar")).args(args).output().expect("spawn xbar")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&xbar(&["--help"])), 0);
    assert_eq!(code(&xbar(&["--version"])), 0);
}

#[test]
fn parse_errors_exit_one() {
    assert_eq!(code(&xbar(&["no-such-command"])), 1);
    assert_eq!(code(&xbar(&["solve-threshold", "--size", "many"])), 1);
    assert_eq!(code(&xbar(&["--mode", "sideways", "show-config"])), 1);
}

#[test]
fn invalid_parameters_exit_one() {
    let o = xbar(&["show-config", "--r-line", "-3"]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
    let o = xbar(&["--config", "/nonexistent/x.cfg", "show-config"]);
    assert!(code(&o) != 0);
}

#[test]
fn general_mode_needs_finite_selectors() {
    let o = xbar(&["--mode", "general", "show-config"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("general"));
}

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = stdout(&xbar(&["show-config", "--size", "64", "--r-line", "12.5"]));
    let path = dir.path().join("a.cfg");
    std::fs::write(&path, &first).unwrap();
    let second = xbar(&["--config", path.to_str().unwrap(), "show-config"]);
    assert_eq!(code(&second), 0);
    assert_eq!(stdout(&second), first);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.cfg");
    std::fs::write(&path, stdout(&xbar(&["show-config", "--size", "64"]))).unwrap();
    let o = stdout(&xbar(&["--config", path.to_str().unwrap(), "show-config", "--size", "32"]));
    let again = stdout(&xbar(&["show-config", "--size", "32"]));
    assert_eq!(o, again);
}

#[test]
fn solve_threshold_prints_trace() {
    let o = xbar(&["solve-threshold"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = s.lines().find(|l| l.starts_with(&format!("{key} ="))).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    assert!((value("r_th0") - 1e5).abs() < 1e-6);
    assert!((value("stmc_approx") - 110250.0).abs() < 1e-6);
    assert!((value("stmc_exact") - 110337.4501334628).abs() < 1e-4);
    assert_eq!(value("iterations"), 12.0);
    assert_eq!(s.lines().filter(|l| l.starts_with("trace[")).count(), 13);
}

#[test]
fn validate_passes_on_reference() {
    let o = xbar(&["validate", "--samples", "100000", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches(" pass").count(), 16);
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn sweeps_write_identical_files_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let out = d.to_str().unwrap();
        let runs: [&[&str]; 3] = [
            &["--out", out, "heatmap", "--size", "16", "--r-line", "20"],
            &["--out", out, "capacity-sweep", "--sizes", "8,16", "--r-lines", "10,30"],
            &["--out", out, "thresholds", "--sizes", "16,32", "--r-lines", "10", "--r-size", "32"],
        ];
        for args in runs {
            let o = xbar(args);
            assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let o = xbar(&["--out", out, "aspect-ratio", "--total-cells", "256"]);
        assert_eq!(code(&o), 0);
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8, "{names:?}");
    for n in names {
        let n = n.to_str().unwrap();
        assert_eq!(read(a.path(), n), read(b.path(), n), "{n} differs");
    }
}

#[test]
fn aspect_ratio_rejects_mixed_totals() {
    let o = xbar(&["aspect-ratio", "--shapes", "16x16,8x16"]);
    assert!(code(&o) != 0);
}
