//! Experiment configurations, single runs, sweeps and run manifests.
//!
//! Configs are flat `key = value` text with namespaced keys. A value holding a
//! comma-separated list turns that key into a sweep axis (at most two axes).
//!
//! ```text
//! graph.family = ring        # ring | geometric | file
//! graph.n = 10, 20, 40
//! params.m = 6
//! params.k_in = 0.5rho       # a multiple of the essential spectral radius
//! params.k_out = 1/k_in
//! x0.source = gaussian
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{check_theorem, min_l0, TheoremCertificate};
use crate::codec::ZoomParams;
use crate::engine::{
    estimate_rate, gaussian_x0, l2, run_quantized, SimulationConfig, SimulationResult,
    DEFAULT_REL_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::graph::Digraph;
use crate::matrix::ConsensusMatrix;

/// Attempts made to draw a strongly connected geometric graph, trying `seed, seed + 1, ...`.
pub const RESAMPLE_ATTEMPTS: u64 = 100;
pub const MAX_AXES: usize = 2;

/// Known keys, their defaults and whether they may be swept.
const KEYS: &[(&str, &str, bool)] = &[
    ("graph.family", "ring", false),
    ("graph.n", "20", true),
    ("graph.radius", "0.5", true),
    ("graph.seed", "0", true),
    ("graph.file", "", false),
    ("matrix.rule", "max_degree", false),
    ("matrix.file", "", false),
    ("params.m", "6", true),
    ("params.k_in", "0.9", true),
    ("params.k_out", "2", true),
    ("params.l0", "1", true),
    ("x0.source", "gaussian", false),
    ("x0.seed", "0", true),
    ("x0.file", "", false),
    ("x0.value", "0", false),
    ("x0.normalize", "false", false),
    ("run.max_steps", "10000", true),
    ("run.rel_tol", "1e-9", true),
    ("run.tol", "", false),
    ("run.rate_window", "50", false),
    ("run.trace", "false", false),
    ("sweep.vary_seed", "false", false),
];

fn key_info(key: &str) -> Option<(&'static str, bool)> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, s)| (*d, *s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, Vec<String>>,
    base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|(k, d, _)| (k.to_string(), vec![d.to_string()]))
            .collect();
        Self { values, base_dir: PathBuf::from(".") }
    }
}

impl ExperimentConfig {
    /// Parse config text on top of the defaults. Relative file paths resolve
    /// against the current directory.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
            spec.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(spec)
    }

    /// Load a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec = Self::parse(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(spec)
    }

    /// Set a key; a comma-separated value makes it a sweep axis.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (_, sweepable) =
            key_info(key).ok_or_else(|| invalid(format!("unknown key {key:?}")))?;
        let items: Vec<String> = value.split(',').map(|s| s.trim().to_string()).collect();
        if items.len() > 1 && !sweepable {
            return Err(invalid(format!("{key} cannot be swept")));
        }
        if items.iter().any(String::is_empty) && items.len() > 1 {
            return Err(invalid(format!("{key}: empty entry in sweep list")));
        }
        self.values.insert(key.to_string(), items);
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&[String]> {
        self.values.get(key).map(Vec::as_slice)
    }

    /// Keys with more than one value, in key order.
    pub fn axes(&self) -> Vec<(String, Vec<String>)> {
        self.values
            .iter()
            .filter(|(_, v)| v.len() > 1)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Config text in the same `key = value` format it is parsed from.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {}", v.join(", "));
        }
        out
    }

    fn resolve_path(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Checks sweep shape and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        if self.axes().len() > MAX_AXES {
            return Err(invalid(format!("at most {MAX_AXES} swept keys, got {}", self.axes().len())));
        }
        let scalar = |k: &str| self.values[k][0].as_str();
        for (key, needed) in [
            ("graph.file", scalar("graph.family") == "file"),
            ("matrix.file", scalar("matrix.rule") == "file"),
            ("x0.file", scalar("x0.source") == "file"),
        ] {
            if needed {
                let p = scalar(key);
                if p.is_empty() {
                    return Err(invalid(format!("{key} must be set")));
                }
                if !self.resolve_path(p).is_file() {
                    return Err(invalid(format!("{key}: {p} does not exist")));
                }
            }
        }
        Ok(())
    }

    /// The cross product of the sweep axes, in row-major order (last axis fastest).
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let axes = self.axes();
        let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
        for (key, vals) in &axes {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push((key.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        let vary = parse_bool("sweep.vary_seed", &self.values["sweep.vary_seed"][0])?;
        combos
            .into_iter()
            .enumerate()
            .map(|(index, assignment)| {
                let mut flat: BTreeMap<String, String> =
                    self.values.iter().map(|(k, v)| (k.clone(), v[0].clone())).collect();
                for (k, v) in &assignment {
                    flat.insert(k.clone(), v.clone());
                }
                if vary {
                    for key in ["graph.seed", "x0.seed"] {
                        if !assignment.iter().any(|(k, _)| k == key) {
                            let base: u64 = parse_num(key, &flat[key])?;
                            flat.insert(key.to_string(), base.wrapping_add(index as u64).to_string());
                        }
                    }
                }
                Ok(Cell { index, assignment, spec: CellConfig::from_flat(&flat, self)? })
            })
            .collect()
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(format!("{key}: expected true/false, got {v:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Ring { n: usize },
    Geometric { n: usize, radius: f64, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixRule {
    MaxDegree,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KIn {
    Value(f64),
    /// A multiple of the essential spectral radius.
    RhoMultiple(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KOut {
    Value(f64),
    InverseKIn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum L0 {
    Value(f64),
    /// Just above the certificate bound: `1.01 * min_l0`.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub enum X0Source {
    Gaussian { seed: u64 },
    File(PathBuf),
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    RelativeToX0(f64),
}

/// One fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    pub graph: GraphSource,
    pub matrix: MatrixRule,
    pub m: u32,
    pub k_in: KIn,
    pub k_out: KOut,
    pub l0: L0,
    pub x0: X0Source,
    pub normalize_x0: bool,
    pub max_steps: usize,
    pub tol: Tolerance,
    pub rate_window: usize,
    pub trace: bool,
    /// The scalar key/value pairs this cell was resolved from.
    pub resolved: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    pub assignment: Vec<(String, String)>,
    pub spec: CellConfig,
}

impl CellConfig {
    fn from_flat(flat: &BTreeMap<String, String>, parent: &ExperimentConfig) -> Result<Self> {
        let get = |k: &str| flat[k].as_str();
        let n = || parse_num::<usize>("graph.n", get("graph.n"));
        let graph = match get("graph.family") {
            "ring" => GraphSource::Ring { n: n()? },
            "geometric" => GraphSource::Geometric {
                n: n()?,
                radius: parse_num("graph.radius", get("graph.radius"))?,
                seed: parse_num("graph.seed", get("graph.seed"))?,
            },
            "file" => GraphSource::File(parent.resolve_path(get("graph.file"))),
            other => return Err(invalid(format!("graph.family: unknown family {other:?}"))),
        };
        let matrix = match get("matrix.rule") {
            "max_degree" => MatrixRule::MaxDegree,
            "file" => MatrixRule::File(parent.resolve_path(get("matrix.file"))),
            other => return Err(invalid(format!("matrix.rule: unknown rule {other:?}"))),
        };
        let k_in = match get("params.k_in").strip_suffix("rho") {
            Some(f) => KIn::RhoMultiple(parse_num("params.k_in", f.trim().trim_end_matches('*'))?),
            None => KIn::Value(parse_num("params.k_in", get("params.k_in"))?),
        };
        let k_out = match get("params.k_out") {
            "1/k_in" | "inv" => KOut::InverseKIn,
            v => KOut::Value(parse_num("params.k_out", v)?),
        };
        let l0 = match get("params.l0") {
            "auto" => L0::Auto,
            v => L0::Value(parse_num("params.l0", v)?),
        };
        let x0 = match get("x0.source") {
            "gaussian" => X0Source::Gaussian { seed: parse_num("x0.seed", get("x0.seed"))? },
            "file" => X0Source::File(parent.resolve_path(get("x0.file"))),
            "constant" => X0Source::Constant(parse_num("x0.value", get("x0.value"))?),
            other => return Err(invalid(format!("x0.source: unknown source {other:?}"))),
        };
        let tol = if get("run.tol").is_empty() {
            Tolerance::RelativeToX0(parse_num("run.rel_tol", get("run.rel_tol"))?)
        } else {
            Tolerance::Absolute(parse_num("run.tol", get("run.tol"))?)
        };
        Ok(Self {
            graph,
            matrix,
            m: parse_num("params.m", get("params.m"))?,
            k_in,
            k_out,
            l0,
            x0,
            normalize_x0: parse_bool("x0.normalize", get("x0.normalize"))?,
            max_steps: parse_num("run.max_steps", get("run.max_steps"))?,
            tol,
            rate_window: parse_num("run.rate_window", get("run.rate_window"))?,
            trace: parse_bool("run.trace", get("run.trace"))?,
            resolved: flat.clone(),
        })
    }
}

/// Everything a single run produced.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub graph: Digraph,
    /// The seed that produced a strongly connected geometric graph.
    pub graph_seed: Option<u64>,
    pub matrix: ConsensusMatrix,
    pub params: ZoomParams,
    pub x0: Vec<f64>,
    pub tol: f64,
    pub certificate: TheoremCertificate,
    pub result: SimulationResult,
    pub rate: Option<f64>,
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("{}: bad number {s:?}", path.display()))))
        .collect()
}

fn read_matrix_csv(path: &Path) -> Result<crate::matrix::DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("{}: bad number {s:?}", path.display())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    crate::matrix::from_rows(&rows)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Build the graph, resampling geometric graphs with the next seed until
/// strongly connected.
pub fn build_graph(spec: &GraphSource) -> Result<(Digraph, Option<u64>)> {
    match spec {
        GraphSource::Ring { n } => Ok((Digraph::ring(*n)?, None)),
        GraphSource::File(path) => Ok((Digraph::from_edge_list(&std::fs::read_to_string(path)?)?, None)),
        GraphSource::Geometric { n, radius, seed } => {
            for attempt in 0..RESAMPLE_ATTEMPTS {
                let s = seed.wrapping_add(attempt);
                let g = Digraph::random_geometric(*n, *radius, s)?;
                if g.is_strongly_connected() {
                    return Ok((g, Some(s)));
                }
            }
            Err(Error::InfeasibleParameters(format!(
                "no strongly connected geometric graph (n = {n}, R = {radius}) in {RESAMPLE_ATTEMPTS} seeds from {seed}"
            )))
        }
    }
}

pub fn build_matrix(rule: &MatrixRule, graph: &Digraph) -> Result<ConsensusMatrix> {
    match rule {
        MatrixRule::MaxDegree => ConsensusMatrix::max_degree(graph),
        MatrixRule::File(path) => ConsensusMatrix::custom(graph, read_matrix_csv(path)?),
    }
}

/// A cell with its graph, matrix, initial state and parameters resolved, but not yet run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: Digraph,
    pub graph_seed: Option<u64>,
    pub matrix: ConsensusMatrix,
    pub params: ZoomParams,
    pub x0: Vec<f64>,
    pub tol: f64,
}

pub fn prepare(spec: &CellConfig) -> Result<Prepared> {
    let (graph, graph_seed) = build_graph(&spec.graph)?;
    let matrix = build_matrix(&spec.matrix, &graph)?;
    let n = graph.n();
    let mut x0 = match &spec.x0 {
        X0Source::Gaussian { seed } => gaussian_x0(n, *seed),
        X0Source::Constant(c) => vec![*c; n],
        X0Source::File(path) => read_numbers(path)?,
    };
    if x0.len() != n {
        return Err(invalid(format!("x0 has {} entries for {n} agents", x0.len())));
    }
    if spec.normalize_x0 {
        let norm = l2(&x0);
        if norm > 0.0 {
            x0.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let rho = matrix.rho();
    let k_in = match spec.k_in {
        KIn::Value(v) => v,
        KIn::RhoMultiple(f) => f * rho,
    };
    let k_out = match spec.k_out {
        KOut::Value(v) => v,
        KOut::InverseKIn => 1.0 / k_in,
    };
    let l0 = match spec.l0 {
        L0::Value(v) => v,
        L0::Auto => 1.01 * min_l0(rho, k_in, spec.m, n, l2(&x0))?,
    };
    let params = ZoomParams::new(spec.m, k_in, k_out, l0)?;
    let tol = match spec.tol {
        Tolerance::Absolute(t) => t,
        Tolerance::RelativeToX0(r) => {
            let norm = l2(&x0);
            if norm > 0.0 { r * norm } else { DEFAULT_REL_TOL }
        }
    };
    Ok(Prepared { graph, graph_seed, matrix, params, x0, tol })
}

pub fn run_cell(spec: &CellConfig) -> Result<CellOutcome> {
    let Prepared { graph, graph_seed, matrix, params, x0, tol } = prepare(spec)?;
    let certificate = check_theorem(&matrix, &params, &x0);
    let config = SimulationConfig::new(matrix.clone(), params, x0.clone())
        .with_max_steps(spec.max_steps)
        .with_tol(tol)
        .with_symbols(spec.trace);
    let result = run_quantized(&config)?;
    let window = spec.rate_window.min(result.history.len().saturating_sub(1));
    let rate = if window == 0 { None } else { estimate_rate(&result.history, window).ok() };
    Ok(CellOutcome { graph, graph_seed, matrix, params, x0, tol, certificate, result, rate })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// `key: value` manifest with everything needed to reproduce the run.
pub fn manifest(spec: &CellConfig, outcome: &CellOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "version: {}", crate::VERSION);
    for (k, v) in &spec.resolved {
        let _ = writeln!(out, "config.{k}: {v}");
    }
    let _ = writeln!(out, "graph.agents: {}", outcome.graph.n());
    let _ = writeln!(out, "graph.edges: {}", outcome.graph.edge_count());
    let _ = writeln!(out, "graph.effective_seed: {}", opt(outcome.graph_seed));
    let _ = writeln!(out, "rho: {}", outcome.matrix.rho());
    let norms = outcome.matrix.norms();
    let _ = writeln!(out, "norm.p: {}", norms.p);
    let _ = writeln!(out, "norm.p_disagreement: {}", norms.p_disagreement);
    let _ = writeln!(out, "norm.k: {}", norms.k);
    let _ = writeln!(out, "norm.k_minus_i: {}", norms.k_minus_i);
    let _ = writeln!(out, "params.effective_k_in: {}", outcome.params.k_in());
    let _ = writeln!(out, "params.effective_k_out: {}", outcome.params.k_out());
    let _ = writeln!(out, "params.effective_l0: {}", outcome.params.l0());
    let x0: Vec<String> = outcome.x0.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "x0.values: {}", x0.join(","));
    let _ = writeln!(out, "x0.norm: {}", l2(&outcome.x0));
    let _ = writeln!(out, "run.effective_tol: {}", outcome.tol);
    out.push_str(&outcome.certificate.to_string());
    let r = &outcome.result;
    let last = r.history.last().expect("history always holds t = 0");
    let _ = writeln!(out, "result.status: {}", r.status);
    let _ = writeln!(out, "result.steps: {}", r.steps());
    let _ = writeln!(out, "result.converged_at: {}", opt(r.converged_at));
    let _ = writeln!(out, "result.zoom_in_count: {}", r.zoom_in_count);
    let _ = writeln!(out, "result.zoom_out_count: {}", r.zoom_out_count);
    let _ = writeln!(out, "result.zoom_out_fraction: {}", r.zoom_out_fraction());
    let _ = writeln!(out, "result.final_disagreement: {}", last.disagreement);
    let _ = writeln!(out, "result.final_estimate_error: {}", last.estimate_error);
    let _ = writeln!(out, "result.empirical_rate: {}", opt(outcome.rate));
    out
}

/// One sweep row: either an outcome summary or the error that stopped the cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub assignment: Vec<(String, String)>,
    pub outcome: std::result::Result<RowSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowSummary {
    pub rho: f64,
    pub converged: bool,
    pub steps: usize,
    pub converged_at: Option<usize>,
    pub rate: Option<f64>,
    pub zoom_out_fraction: f64,
    pub status: String,
}

impl RowSummary {
    fn from_outcome(o: &CellOutcome) -> Self {
        Self {
            rho: o.matrix.rho(),
            converged: o.result.converged_at.is_some(),
            steps: o.result.steps(),
            converged_at: o.result.converged_at,
            rate: o.rate,
            zoom_out_fraction: o.result.zoom_out_fraction(),
            status: o.result.status.to_string(),
        }
    }
}

/// Run every cell; failures are recorded per row. `workers > 1` runs cells in
/// parallel without changing row order.
pub fn sweep(spec: &ExperimentConfig, workers: usize) -> Result<Vec<SweepRow>> {
    let cells = spec.cells()?;
    let run = |cell: &Cell| SweepRow {
        assignment: cell.assignment.clone(),
        outcome: run_cell(&cell.spec)
            .map(|o| RowSummary::from_outcome(&o))
            .map_err(|e| e.to_string()),
    };
    if workers <= 1 {
        return Ok(cells.iter().map(run).collect());
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(run).collect()))
}

pub fn sweep_csv(spec: &ExperimentConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for (key, _) in spec.axes() {
        let _ = write!(out, "{key},");
    }
    out.push_str("rho,converged,steps_to_tol,empirical_rate,zoom_out_fraction,status,error\n");
    for row in rows {
        for (_, v) in &row.assignment {
            let _ = write!(out, "{v},");
        }
        match &row.outcome {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},",
                    s.rho,
                    s.converged,
                    s.converged_at.map_or(String::new(), |t| t.to_string()),
                    s.rate.map_or(String::new(), |r| r.to_string()),
                    s.zoom_out_fraction,
                    s.status
                );
            }
            Err(e) => {
                let _ = writeln!(out, ",false,,,,error,\"{}\"", e.replace('"', "'"));
            }
        }
    }
    out
}
