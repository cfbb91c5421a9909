//! Python bindings: graphs, consensus matrices, the quantizer, the zoom codec,
//! simulation runs and the convergence certificate.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use zoomcons as zc;
use zoomcons::matrix::{from_rows, DMatrix};

fn to_py(e: zc::Error) -> PyErr {
    match e {
        zc::Error::Io(io) => PyIOError::new_err(io.to_string()),
        zc::Error::ProtocolViolation(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[pyclass(name = "Digraph", module = "pyzoomcons", frozen)]
struct PyDigraph(zc::Digraph);

#[pymethods]
impl PyDigraph {
    /// Graph from 0-based `(from, to)` pairs.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        zc::Digraph::new(n, edges).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn ring(n: usize) -> PyResult<Self> {
        zc::Digraph::ring(n).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        zc::Digraph::complete(n).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn random_geometric(n: usize, radius: f64, seed: u64) -> PyResult<Self> {
        zc::Digraph::random_geometric(n, radius, seed).map(Self).map_err(to_py)
    }

    /// Parse the 1-based edge-list text format.
    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        zc::Digraph::from_edge_list(text).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn edge_count(&self) -> usize {
        self.0.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().collect()
    }

    fn in_neighbors(&self, i: usize) -> Vec<usize> {
        self.0.in_neighbors(i)
    }

    fn is_symmetric(&self) -> bool {
        self.0.is_symmetric()
    }

    fn is_strongly_connected(&self) -> bool {
        self.0.is_strongly_connected()
    }

    fn to_edge_list(&self) -> String {
        self.0.to_edge_list()
    }

    fn __repr__(&self) -> String {
        format!("Digraph(n={}, edges={})", self.0.n(), self.0.edge_count())
    }
}

#[pyclass(name = "ConsensusMatrix", module = "pyzoomcons", frozen)]
struct PyConsensusMatrix(zc::ConsensusMatrix);

#[pymethods]
impl PyConsensusMatrix {
    #[staticmethod]
    fn max_degree(graph: &PyDigraph) -> PyResult<Self> {
        zc::ConsensusMatrix::max_degree(&graph.0).map(Self).map_err(to_py)
    }

    /// A user-supplied `P` given as a list of rows.
    #[staticmethod]
    fn custom(graph: &PyDigraph, p: Vec<Vec<f64>>) -> PyResult<Self> {
        let p = from_rows(&p).map_err(to_py)?;
        zc::ConsensusMatrix::custom(&graph.0, p).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho()
    }

    fn p(&self) -> Vec<Vec<f64>> {
        rows(self.0.p())
    }

    fn k(&self) -> Vec<Vec<f64>> {
        rows(self.0.k())
    }

    /// Eigenvalues of `P`, sorted by decreasing modulus.
    fn eigenvalues(&self) -> Vec<(f64, f64)> {
        self.0.eigenvalues().into_iter().map(|z| (z.re, z.im)).collect()
    }

    fn norms<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let n = self.0.norms();
        let d = PyDict::new(py);
        d.set_item("p", n.p)?;
        d.set_item("k", n.k)?;
        d.set_item("k_minus_i", n.k_minus_i)?;
        d.set_item("p_disagreement", n.p_disagreement)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("ConsensusMatrix(n={}, rho={})", self.0.n(), self.0.rho())
    }
}

#[pyclass(name = "UniformQuantizer", module = "pyzoomcons", frozen)]
struct PyQuantizer(zc::UniformQuantizer);

#[pymethods]
impl PyQuantizer {
    #[new]
    fn new(m: u32) -> PyResult<Self> {
        zc::UniformQuantizer::new(m).map(Self).map_err(to_py)
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m()
    }

    fn alphabet_size(&self) -> usize {
        self.0.alphabet_size()
    }

    fn levels(&self) -> Vec<f64> {
        self.0.levels()
    }

    fn quantize(&self, x: f64) -> PyResult<f64> {
        self.0.quantize(x).map_err(to_py)
    }

    fn quantize_symbol(&self, x: f64) -> PyResult<u16> {
        self.0.quantize_symbol(x).map(|s| s.0).map_err(to_py)
    }

    fn level(&self, symbol: u16) -> Option<f64> {
        self.0.level(zc::Symbol(symbol))
    }

    fn is_saturated(&self, symbol: u16) -> bool {
        self.0.is_saturated(zc::Symbol(symbol))
    }
}

#[pyclass(name = "ZoomParams", module = "pyzoomcons", frozen)]
struct PyZoomParams(zc::ZoomParams);

#[pymethods]
impl PyZoomParams {
    #[new]
    fn new(m: u32, k_in: f64, k_out: f64, l0: f64) -> PyResult<Self> {
        zc::ZoomParams::new(m, k_in, k_out, l0).map(Self).map_err(to_py)
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m()
    }

    #[getter]
    fn k_in(&self) -> f64 {
        self.0.k_in()
    }

    #[getter]
    fn k_out(&self) -> f64 {
        self.0.k_out()
    }

    #[getter]
    fn l0(&self) -> f64 {
        self.0.l0()
    }

    fn __repr__(&self) -> String {
        format!(
            "ZoomParams(m={}, k_in={}, k_out={}, l0={})",
            self.0.m(),
            self.0.k_in(),
            self.0.k_out(),
            self.0.l0()
        )
    }
}

/// One side of a zoom link. An encoder and a decoder built from the same
/// parameters stay in lockstep.
#[pyclass(name = "Codec", module = "pyzoomcons")]
struct PyCodec {
    params: zc::ZoomParams,
    state: zc::CodecState,
}

#[pymethods]
impl PyCodec {
    #[new]
    fn new(params: &PyZoomParams) -> Self {
        Self { params: params.0, state: zc::CodecState::new(&params.0) }
    }

    fn encode(&mut self, x: f64) -> PyResult<u16> {
        self.state.encode(&self.params, x).map(|s| s.0).map_err(to_py)
    }

    fn decode(&mut self, symbol: u16) -> PyResult<f64> {
        self.state.decode(&self.params, zc::Symbol(symbol)).map_err(to_py)
    }

    #[getter]
    fn x_hat(&self) -> f64 {
        self.state.x_hat()
    }

    #[getter]
    fn l(&self) -> f64 {
        self.state.l()
    }

    #[getter]
    fn t(&self) -> u64 {
        self.state.t()
    }
}

#[pyclass(name = "SimulationResult", module = "pyzoomcons", frozen)]
struct PyResultWrap(zc::SimulationResult);

#[pymethods]
impl PyResultWrap {
    #[getter]
    fn status(&self) -> &'static str {
        self.0.status.as_str()
    }

    #[getter]
    fn converged_at(&self) -> Option<usize> {
        self.0.converged_at
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn zoom_in_count(&self) -> usize {
        self.0.zoom_in_count
    }

    #[getter]
    fn zoom_out_count(&self) -> usize {
        self.0.zoom_out_count
    }

    #[getter]
    fn final_x(&self) -> Vec<f64> {
        self.0.final_x.clone()
    }

    #[getter]
    fn final_x_hat(&self) -> Vec<f64> {
        self.0.final_x_hat.clone()
    }

    /// `(t, disagreement, estimate_error, l_min, l_max, zoom_outs, x_ave)` per step.
    fn history(&self) -> Vec<(usize, f64, f64, f64, f64, usize, f64)> {
        self.0
            .history
            .iter()
            .map(|m| (m.t, m.disagreement, m.estimate_error, m.l_min, m.l_max, m.zoom_outs, m.x_ave))
            .collect()
    }

    fn history_csv(&self) -> String {
        self.0.history_csv()
    }

    /// Per-step symbol indices, if recorded.
    fn symbols(&self) -> Option<Vec<Vec<u16>>> {
        self.0
            .symbols
            .as_ref()
            .map(|s| s.iter().map(|row| row.iter().map(|x| x.0).collect()).collect())
    }

    fn estimate_rate(&self, window: usize) -> PyResult<f64> {
        zc::estimate_rate(&self.0.history, window).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("SimulationResult(status={}, steps={})", self.0.status, self.0.steps())
    }
}

#[pyfunction]
#[pyo3(signature = (matrix, params, x0, max_steps=10_000, tol=None, record_symbols=false))]
fn run_quantized(
    matrix: &PyConsensusMatrix,
    params: &PyZoomParams,
    x0: Vec<f64>,
    max_steps: usize,
    tol: Option<f64>,
    record_symbols: bool,
) -> PyResult<PyResultWrap> {
    let mut cfg = zc::SimulationConfig::new(matrix.0.clone(), params.0, x0)
        .with_max_steps(max_steps)
        .with_symbols(record_symbols);
    if let Some(t) = tol {
        cfg = cfg.with_tol(t);
    }
    zc::run_quantized(&cfg).map(PyResultWrap).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (matrix, x0, max_steps=10_000, tol=None))]
fn run_ideal(matrix: &PyConsensusMatrix, x0: Vec<f64>, max_steps: usize, tol: Option<f64>) -> PyResult<PyResultWrap> {
    let tol = tol.unwrap_or_else(|| zc::engine::default_tol(&x0));
    zc::run_ideal(&matrix.0, &x0, max_steps, tol).map(PyResultWrap).map_err(to_py)
}

/// The certificate as a dict of condition flags, thresholds and margins.
#[pyfunction]
fn check_theorem<'py>(
    py: Python<'py>,
    matrix: &PyConsensusMatrix,
    params: &PyZoomParams,
    x0: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let c = zc::check_theorem(&matrix.0, &params.0, &x0);
    let d = PyDict::new(py);
    d.set_item("rho", c.rho)?;
    d.set_item("x0_norm", c.x0_norm)?;
    d.set_item("cond_rate", c.cond_rate)?;
    d.set_item("cond_m", c.cond_m)?;
    d.set_item("cond_l0", c.cond_l0)?;
    d.set_item("all_hold", c.all_hold)?;
    d.set_item("rate_margin", c.rate_margin)?;
    d.set_item("m_threshold", c.m_threshold)?;
    d.set_item("m_margin", c.m_margin)?;
    d.set_item("l0_threshold", c.l0_threshold)?;
    d.set_item("l0_margin", c.l0_margin)?;
    Ok(d)
}

#[pyfunction]
fn min_m(rho: f64, k_in: f64, n: usize) -> PyResult<u64> {
    zc::min_m(rho, k_in, n).map_err(to_py)
}

#[pyfunction]
fn min_l0(rho: f64, k_in: f64, m: u32, n: usize, x0_norm: f64) -> PyResult<f64> {
    zc::min_l0(rho, k_in, m, n, x0_norm).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (m, silence=false))]
fn bits_per_symbol(m: u32, silence: bool) -> PyResult<f64> {
    zc::bits_per_symbol(m, silence).map_err(to_py)
}

#[pyfunction]
fn essential_spectral_radius(p: Vec<Vec<f64>>) -> PyResult<f64> {
    let p = from_rows(&p).map_err(to_py)?;
    zc::essential_spectral_radius(&p).map_err(to_py)
}

#[pyfunction]
fn gaussian_x0(n: usize, seed: u64) -> Vec<f64> {
    zc::gaussian_x0(n, seed)
}

#[pymodule]
fn pyzoomcons(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDigraph>()?;
    m.add_class::<PyConsensusMatrix>()?;
    m.add_class::<PyQuantizer>()?;
    m.add_class::<PyZoomParams>()?;
    m.add_class::<PyCodec>()?;
    m.add_class::<PyResultWrap>()?;
    m.add_function(wrap_pyfunction!(run_quantized, m)?)?;
    m.add_function(wrap_pyfunction!(run_ideal, m)?)?;
    m.add_function(wrap_pyfunction!(check_theorem, m)?)?;
    m.add_function(wrap_pyfunction!(min_m, m)?)?;
    m.add_function(wrap_pyfunction!(min_l0, m)?)?;
    m.add_function(wrap_pyfunction!(bits_per_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(essential_spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_x0, m)?)?;
    Ok(())
}
