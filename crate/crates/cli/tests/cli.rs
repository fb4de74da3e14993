use std::path::{Path, PathBuf};

use hbg_cli::{read_csv, run_cli_with};

const MODELS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models");

fn model(name: &str) -> String {
    Path::new(MODELS).join(name).to_string_lossy().into_owned()
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn hbg(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli_with(std::iter::once("hbg").chain(args.iter().copied()), &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_reports_locations() {
    let r = hbg(&["validate", &model("three_tank.hbg")]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("8 switched"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.hbg",
        "bondgraph m {\n  element C C1 { value = -1.0 }\n}\n",
    );
    let r = hbg(&["validate", path_str(&bad)]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("bad.hbg:2:"), "{}", r.err);
    assert!(r.err.contains("hbg validate"));
}

#[test]
fn compile_emits_dot() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("d.dot");
    let graph = dir.path().join("g.dot");
    let r = hbg(&[
        "compile",
        &model("periodic.hbg"),
        "--emit",
        "dot",
        "--out",
        path_str(&dot),
        "--emit-graph",
        path_str(&graph),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("digraph \"periodic_ibd\" {"));
    assert!(std::fs::read_to_string(&graph).unwrap().contains("digraph"));

    let r = hbg(&["compile", &model("three_tank.hbg"), "--check-modes"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("256 modes"), "{}", r.out);

    let r = hbg(&["compile", &model("three_tank.hbg"), "--check-modes", "--mode-cap", "16"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("hbg compile"));
}

#[test]
fn sim_writes_trace_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let events = dir.path().join("e.csv");
    let r = hbg(&[
        "sim",
        &model("periodic.hbg"),
        "--out",
        path_str(&csv),
        "--t-end",
        "3",
        "--dt",
        "0.1",
        "--integrator",
        "euler",
        "--mode",
        "--events",
        path_str(&events),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,h,mode"));
    assert_eq!(text.lines().count(), 32);
    let table = read_csv(&csv).unwrap();
    assert_eq!(table.column("t").unwrap()[30], 3.0);
    let log = std::fs::read_to_string(&events).unwrap();
    assert_eq!(
        log,
        "t,junction,transition\n1.0,drain,off->on\n2.0,drain,on->off\n3.0,drain,off->on\n"
    );
}

#[test]
fn sim_probe_selection_and_init() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let r = hbg(&[
        "sim",
        &model("three_tank.hbg"),
        "--out",
        path_str(&csv),
        "--probe",
        "h3,h1",
        "--init",
        "0.2,0.0,0.1",
        "--t-end",
        "0.5",
        "--record-every",
        "10",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let table = read_csv(&csv).unwrap();
    assert_eq!(table.names, vec!["t", "h3", "h1"]);
    assert_eq!(table.column("t").unwrap(), &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
    assert_eq!(table.column("h1").unwrap()[0], 0.2);
    assert_eq!(table.column("h3").unwrap()[0], 0.1);
}

#[test]
fn sim_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = path_str(&out);
    let m = model("periodic.hbg");
    for (args, needle) in [
        (vec!["sim", &m, "--out", o, "--dt", "0"], "--dt"),
        (vec!["sim", &m, "--out", o, "--dt", "-1"], "--dt"),
        (vec!["sim", &m, "--out", o, "--t-end", "-2"], "--t-end"),
        (vec!["sim", &m, "--out", o, "--probe", "q"], "`q`"),
        (vec!["sim", &m, "--out", o, "--init", "1,2"], "--init"),
        (vec!["sim", &m, "--out", o, "--record-every", "0"], "--record-every"),
        (vec!["sim", &m, "--out", o, "--integrator", "heun"], "heun"),
        (vec!["sim", &m], "--out"),
        (vec!["frobnicate"], "frobnicate"),
    ] {
        let r = hbg(&args);
        assert_eq!(r.code, 2, "{args:?}: {}", r.err);
        assert!(r.err.contains(needle), "{args:?}: {}", r.err);
    }
    assert!(!out.exists());
}

#[test]
fn sim_runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let r = hbg(&["sim", "/nonexistent/m.hbg", "--out", path_str(&out)]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("hbg sim") && r.err.contains("m.hbg"));

    let runaway = write(
        dir.path(),
        "runaway.hbg",
        "bondgraph runaway {\n  signal s = piecewise(0.0: 1e15)\n  element Sf Sf1 { value = signal(s) }\n  \
         element C C1 { value = 0.001 }\n  junction 0 j\n  bond b1 from Sf1 to j\n  bond b2 from j to C1\n  \
         probe h = effort(C1)\n}\n",
    );
    let r = hbg(&["sim", path_str(&runaway), "--out", path_str(&out)]);
    assert_eq!(r.code, 1, "{}", r.err);
    assert!(
        r.err.to_lowercase().contains("blow") || r.err.contains("1e12") || r.err.contains("C1"),
        "{}",
        r.err
    );
}

#[test]
fn bench_three_tank_passes() {
    let r = hbg(&["bench", "three-tank"]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);
    assert_eq!(r.out.lines().count(), 7);
    assert!(r.out.lines().all(|l| l.ends_with("PASS")), "{}", r.out);
    assert!(r.out.contains("t1=1.69"));
}

#[test]
fn plot_series_handling() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "t.csv", "t,a,b,mode\n0.0,1.0,2.0,01\n1.0,2.0,0.5,10\n");
    let svg = dir.path().join("p.svg");
    let r = hbg(&["plot", path_str(&csv), "--out", path_str(&svg)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);

    let r = hbg(&["plot", path_str(&csv), "--out", path_str(&svg), "--series", "b"]);
    assert_eq!(r.code, 0);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 1);

    for series in ["", "zzz", "a,"] {
        let r = hbg(&["plot", path_str(&csv), "--out", path_str(&svg), "--series", series]);
        assert_eq!(r.code, 2, "{series:?}");
        assert!(r.err.contains("hbg plot") && r.err.contains("--series"));
    }

    let broken = write(dir.path(), "broken.csv", "t,a\n0.0,1.0\n1.0,x\n");
    let r = hbg(&["plot", path_str(&broken), "--out", path_str(&svg)]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("broken.csv") && r.err.contains("line 3"), "{}", r.err);
}

#[test]
fn help_goes_to_stdout() {
    let r = hbg(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("sim"));
    assert!(r.err.is_empty());
}
