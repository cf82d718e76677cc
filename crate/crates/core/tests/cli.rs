use std::path::Path;
use std::process::{Command, Output};

fn tailhop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailhop"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn vertical_twenty_strides() {
    let d = tempfile::tempdir().unwrap();
    let o = tailhop(d.path(), &["simulate", "--system", "vertical", "--strides", "20", "--out", "v.csv"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let csv = std::fs::read_to_string(d.path().join("v.csv")).unwrap();
    assert!(csv.starts_with("t,mode,chi,chidot_over_omega\n"));
    let modes = column(&csv, "mode");
    let switches = modes.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(switches, 40);
    assert_eq!(modes[0], 1.0);
    let s = stdout(&o);
    assert!(s.contains("strides=20"), "{s}");
    let td: f64 = s.split("touchdown_chidot=[").nth(1).unwrap().split(']').next().unwrap().parse().unwrap();
    assert!((td + 0.9).abs() < 1e-2, "{td}");
}

#[test]
fn malformed_key_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.conf", "vertical.k_t = 2\nvertical.kt = 3\n");
    let o = tailhop(d.path(), &["simulate", "--config", &cfg, "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!d.path().join("x.csv").exists());
}

#[test]
fn monoped_in_the_limit_keeps_attitude_flat() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "lim.conf",
        "run.system = monoped\nrun.strides = 3\nmonoped.m_t = 2.419e-6\nmonoped.i_b = 1e6\nmonoped.i_t = 1e12\nmonoped.apex_height = 0.2\n",
    );
    let o = tailhop(d.path(), &["simulate", "--config", &cfg, "--out", "m.csv", "--svg", "m.svg"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let csv = std::fs::read_to_string(d.path().join("m.csv")).unwrap();
    for name in ["phi1", "phi2", "dphi1", "dphi2"] {
        let m = column(&csv, name).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(m < 1e-6, "{name}: {m}");
    }
    assert!(std::fs::read_to_string(d.path().join("m.svg")).unwrap().contains("<polyline"));
}

#[test]
fn every_system_simulates() {
    let d = tempfile::tempdir().unwrap();
    for s in ["vertical", "slip", "hir", "monoped", "mbhop"] {
        let out = format!("{s}.csv");
        let o = tailhop(d.path(), &["simulate", "--system", s, "--strides", "3", "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "{s}: {o:?}");
        assert!(stdout(&o).starts_with(&format!("system={s} strides=3")), "{}", stdout(&o));
    }
}

#[test]
fn start_below_touchdown_is_numerical() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "low.conf", "run.system = slip\nslip.apex_height = 0.5\n");
    let o = tailhop(d.path(), &["simulate", "--config", &cfg, "--out", "s.csv"]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
}

fn machine_line(o: &Output) -> String {
    stdout(o).lines().find(|l| l.starts_with("fixpoint ")).unwrap().to_string()
}

fn fixpoint_x(o: &Output) -> Vec<f64> {
    machine_line(o).split("x=").nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect()
}

#[test]
fn fixpoints() {
    let d = tempfile::tempdir().unwrap();
    let o = tailhop(d.path(), &["fixpoint", "--system", "mbhop"]);
    assert_eq!(o.status.code(), Some(0));
    let x = fixpoint_x(&o);
    assert!((x[0] - 0.3).abs() < 1e-10, "{x:?}");
    let beta_line = stdout(&o).lines().find(|l| l.starts_with("beta:")).unwrap().to_string();
    let nums: Vec<f64> = beta_line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    assert!((nums[0] - nums[1]).abs() < 1e-10, "{beta_line}");

    let o = tailhop(d.path(), &["fixpoint", "--system", "vertical", "--guess", "0.9"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((fixpoint_x(&o)[0] - 1.0).abs() < 1e-8);

    let o = tailhop(d.path(), &["fixpoint", "--system", "slip"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((fixpoint_x(&o)[1] + 2.0).abs() < 1e-6);
}

#[test]
fn fixpoint_failures() {
    let d = tempfile::tempdir().unwrap();
    let o = tailhop(d.path(), &["fixpoint", "--system", "mbhop", "--guess", "0.3,4.0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no convergence"));
    let o = tailhop(d.path(), &["fixpoint", "--system", "vertical", "--guess", "1e6"]);
    assert_eq!(o.status.code(), Some(3));
    let o = tailhop(d.path(), &["fixpoint", "--system", "mbhop", "--guess", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tailhop(d.path(), &["fixpoint", "--system", "monoped"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_single_props() {
    let d = tempfile::tempdir().unwrap();
    let o = tailhop(d.path(), &["verify", "--prop", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.lines().filter(|l| l.starts_with("1 ")).all(|l| l.contains("PASS")), "{s}");

    let cfg = write(d.path(), "low.conf", "hir.gain_margin = 0.5\nhir.disturbance = worst\n");
    let o = tailhop(d.path(), &["verify", "--prop", "5", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("SKIP"));

    let o = tailhop(d.path(), &["verify", "--prop", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_failure_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "tight.conf", "invariance.tolerance = 1e-15\n");
    let o = tailhop(d.path(), &["verify", "--prop", "6", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn sweep_single_point() {
    let d = tempfile::tempdir().unwrap();
    let o = tailhop(d.path(), &["sweep", "--param", "k_t", "--range", "2:4:1", "--out", "one.csv"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let csv = std::fs::read_to_string(d.path().join("one.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let r = column(&csv, "radius")[0];
    assert!((r - 0.09).abs() < 1e-6);
}

#[test]
fn sweep_errors() {
    let d = tempfile::tempdir().unwrap();
    for range in ["1:2", "1:2:0", "x:1:2"] {
        let o = tailhop(d.path(), &["sweep", "--param", "k_t", "--range", range]);
        assert_eq!(o.status.code(), Some(2), "{range}");
    }
    let o = tailhop(d.path(), &["sweep", "--param", "nope", "--range", "0:1:2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_tailhop"))
        .current_dir(d.path())
        .env("TAILHOP_WORKERS", "zero")
        .args(["sweep", "--param", "k_t", "--range", "1:2:2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "j.conf", "run.system = mbhop\nrun.seed = 7\nsweep.jitter = 0.05\n");
    let run = |workers: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_tailhop"))
            .current_dir(d.path())
            .env("TAILHOP_WORKERS", workers)
            .args(["sweep", "--config", &cfg, "--param", "k_p", "--range", "0.01:0.2:9", "--out", out])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(d.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("3", "b.csv"));

    let sim = |out: &str| {
        let o = tailhop(d.path(), &["simulate", "--system", "slip", "--strides", "3", "--out", out]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(d.path().join(out)).unwrap()
    };
    assert_eq!(sim("s1.csv"), sim("s2.csv"));
}

#[test]
fn usage_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(tailhop(d.path(), &["bogus"]).status.code(), Some(2));
    assert_eq!(tailhop(d.path(), &["sweep", "--param", "k_t"]).status.code(), Some(2));
    assert_eq!(tailhop(d.path(), &["simulate", "--system", "biped"]).status.code(), Some(2));
    assert_eq!(tailhop(d.path(), &["--help"]).status.code(), Some(0));
}
