use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use zoomcons::codec::trace;

fn zoomcons(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zoomcons"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> HashMap<String, String> {
    std::fs::read_to_string(dir.join("manifest.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(": ").expect("key: value line");
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn run_ring20_reports_rho() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ring.cfg");
    std::fs::write(&cfg, "graph.family = ring\ngraph.n = 20\nparams.m = 6\nparams.k_in = 0.97\nparams.k_out = 2\nrun.max_steps = 200\n").unwrap();
    let out = dir.path().join("out");
    let o = zoomcons(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 2 | 3)), "{o:?}");
    let m = manifest(&out);
    let rho: f64 = m["rho"].parse().unwrap();
    assert!((rho - 0.9673).abs() <= 5e-4);
    assert_eq!(m["config.graph.n"], "20");
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().next().unwrap(), "t,disagreement,estimate_error,l_min,l_max,zoom_outs,x_ave");
    assert_eq!(history.lines().count(), m["result.steps"].parse::<usize>().unwrap() + 2);
}

#[test]
fn consensus_start_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = zoomcons(&[
        "run", "--out", out.to_str().unwrap(),
        "--set", "x0.source=constant", "--set", "x0.value=2.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out)["result.steps"], "0");
}

#[test]
fn certified_ring4_never_zooms_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = zoomcons(&[
        "run", "--out", out.to_str().unwrap(), "--seed", "7",
        "--set", "graph.n=4", "--set", "params.m=132", "--set", "params.k_in=0.5",
        "--set", "params.l0=auto", "--set", "run.trace=true",
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let m = manifest(&out);
    assert_eq!(m["theorem.all_hold"], "true");
    assert_eq!(m["result.zoom_out_count"], "0");
    assert_eq!(m["config.x0.seed"], "7");

    let steps: usize = m["result.steps"].parse().unwrap();
    let bytes = std::fs::read(out.join("symbols.bin")).unwrap();
    assert_eq!(bytes.len(), steps * 4 * 2);
    let symbols = trace::from_bytes(&bytes, 4).unwrap();
    let csv = std::fs::read_to_string(out.join("symbols.csv")).unwrap();
    assert_eq!(csv, trace::to_csv(&symbols));
}

#[test]
fn horizon_and_divergence_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short");
    let o = zoomcons(&["run", "--out", short.to_str().unwrap(), "--set", "run.max_steps=5"]);
    assert_eq!(o.status.code(), Some(2));
    let div = dir.path().join("div");
    let o = zoomcons(&[
        "run", "--out", div.to_str().unwrap(),
        "--set", "params.m=1", "--set", "params.k_in=0.9",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(manifest(&div)["result.status"], "diverged");
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = zoomcons(&["run", "--out", out.to_str().unwrap(), "--set", "bogus.key=1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = zoomcons(&["run", "--out", out.to_str().unwrap(), "--set", "params.m=1,2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = zoomcons(&["run", "--out", out.to_str().unwrap(), "--config", "/no/such/file.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "graph.n = 4, 6, 8\nparams.m = 3, 6\nrun.max_steps = 300\n").unwrap();
    let out = dir.path().join("out");
    let o = zoomcons(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2",
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("graph.n,params.m,rho,converged,steps_to_tol,"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn spectrum_exports_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let o = zoomcons(&["spectrum", "--set", "graph.n=4", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rho_line = stdout.lines().find(|l| l.starts_with("rho: ")).unwrap();
    let rho: f64 = rho_line[5..].parse().unwrap();
    assert!((rho - 1.0 / 3.0).abs() < 1e-12);
    let p = std::fs::read_to_string(dir.path().join("P.csv")).unwrap();
    assert_eq!(p.lines().count(), 4);
    let g = std::fs::read_to_string(dir.path().join("graph.txt")).unwrap();
    assert!(g.starts_with("4\n"));
}

#[test]
fn file_sources_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let exported = dir.path().join("exp");
    assert!(zoomcons(&["spectrum", "--set", "graph.n=5", "--out", exported.to_str().unwrap()]).status.success());
    std::fs::write(dir.path().join("x0.txt"), "1\n-1\n0.5\n0\n2\n").unwrap();
    let cfg = dir.path().join("files.cfg");
    std::fs::write(
        &cfg,
        "graph.family = file\ngraph.file = exp/graph.txt\nmatrix.rule = file\nmatrix.file = exp/P.csv\n\
         x0.source = file\nx0.file = x0.txt\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = zoomcons(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 2 | 3)), "{o:?}");
    let m = manifest(&out);
    assert_eq!(m["x0.values"], "1,-1,0.5,0,2");
    assert_eq!(m["graph.agents"], "5");
}
