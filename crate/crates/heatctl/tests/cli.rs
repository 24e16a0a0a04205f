use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heatctl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatctl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn preset_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = heatctl(&["simulate", "--preset", "paper-fig4"], d);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trace.csv", "w_t40.csv", "slice.csv", "control_top.csv", "open_loop/trace.csv", "plots.gp"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,norm_w,norm_v,u_v,y_v\n"));
    assert_eq!(trace.lines().count(), 82);
}

#[test]
fn empty_config_lists_required_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    fs::write(&cfg, "# nothing here\n").unwrap();
    let o = heatctl(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing required keys"), "{}", stderr(&o));
}

#[test]
fn config_errors_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "a = 1\nb = 1\nh = 0.05\nmu = 0\ndt = 0.05\nt_end = 1\nw0 = x\n").unwrap();
    let o = heatctl(&["eigs", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4") && stderr(&o).contains("mu"), "{}", stderr(&o));
    let o = heatctl(&["eigs", "--preset", "paper-fig4", "--set", "nonsense=3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stable_plant_needs_no_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatctl(&["synthesize", "--preset", "paper-fig4", "--set", "mu=1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("N = 0") && stdout(&o).contains("already stable"), "{}", stdout(&o));
}

#[test]
fn verify_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatctl(&["verify", "--preset", "paper-fig4"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));

    let o = heatctl(&["verify", "--preset", "paper-fig4", "--set", "scheme=one-sided"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("XFAIL W-symmetry"), "{}", stdout(&o));

    // alpha + mu = -lambda_2 makes the controller shift singular.
    let o = heatctl(&["verify", "--preset", "paper-fig4", "--set", "alpha=24.570196695356-6"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("resonates"), "{}", stdout(&o));
}

#[test]
fn gain_file_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--preset", "paper-fig4", "--set", "gains=auto"];
    let o = heatctl(&[&["synthesize"][..], &base].concat(), &dir.path().join("syn"));
    assert!(o.status.success(), "{}", stderr(&o));
    let gains = dir.path().join("syn/gains.csv");
    let direct = heatctl(&[&["simulate"][..], &base].concat(), &dir.path().join("direct"));
    assert!(direct.status.success());
    let set = format!("gain_file={}", gains.display());
    let reloaded = heatctl(&["simulate", "--preset", "paper-fig4", "--set", &set], &dir.path().join("reloaded"));
    assert!(reloaded.status.success(), "{}", stderr(&reloaded));
    assert_eq!(fs::read(dir.path().join("direct/trace.csv")).unwrap(), fs::read(dir.path().join("reloaded/trace.csv")).unwrap());

    let o = heatctl(&["simulate", "--preset", "paper-fig4", "--set", &set, "--set", "mu=5"], &dir.path().join("x"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gain file"), "{}", stderr(&o));
}

#[test]
fn initial_state_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let first = heatctl(&["simulate", "--preset", "paper-fig4"], &dir.path().join("a"));
    assert!(first.status.success());
    let set = format!("w0={}", dir.path().join("a/w_t0.csv").display());
    let second = heatctl(&["simulate", "--preset", "paper-fig4", "--set", &set], &dir.path().join("b"));
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(fs::read(dir.path().join("a/trace.csv")).unwrap(), fs::read(dir.path().join("b/trace.csv")).unwrap());
}

#[test]
fn observe_reports_input_independence() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatctl(&["observe", "--preset", "paper-fig4", "--set", "input=random"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("input-independent"), "{}", stdout(&o));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,norm_w,norm_v,u_v,y_v,norm_err_w,norm_err_v\n"));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatctl(
        &["sweep", "--preset", "paper-fig4", "--set", "sweep_key=alpha", "--set", "sweep_values=1,2,3"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")), "{csv}");
}

#[test]
fn rectangle_with_three_unstable_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rect.cfg");
    fs::write(&cfg, "a = 1\nb = 1/sqrt(2)\nnx = 29\nny = 21\nmu = 50\ndt = 0.01\nt_end = 0.5\nw0 = x*y\neig_count = 8\n").unwrap();
    let o = heatctl(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let o = heatctl(&["synthesize", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(stdout(&o).starts_with("N = 3"), "{}", stdout(&o));
}

#[test]
fn eigs_flags_ties_on_the_square() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatctl(&["eigs", "--preset", "paper-fig4", "--set", "mu=30"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("coincide"), "{}", stdout(&o));
    assert!(dir.path().join("eigs.csv").exists());
}
