//! Closed-loop simulation in synchronous discrete time.
//!
//! Each tick of [`run_quantized`]: every agent observes its state, encodes and
//! broadcasts one symbol, every receiver replica decodes it, and the control
//! `u_i = sum_j K_ij x_hat_j` is applied. At `t = 0` no symbol exists yet and
//! `x_hat(0) = 0`, so `u(0) = 0` and `x(1) = x(0)`.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codec::{CodecState, ZoomParams};
use crate::error::{invalid, Error, Result};
use crate::matrix::ConsensusMatrix;
use crate::quantizer::Symbol;

/// A run is declared divergent once a scaling factor exceeds this multiple of `l0`.
pub const DIVERGENCE_FACTOR: f64 = 1e12;
/// Default convergence tolerance, relative to `||x(0)||`.
pub const DEFAULT_REL_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub matrix: ConsensusMatrix,
    pub params: ZoomParams,
    pub x0: Vec<f64>,
    pub max_steps: usize,
    /// Convergence is declared when the disagreement drops to `tol` or below.
    pub tol: f64,
    /// Keep iterating after convergence until `max_steps`.
    pub full_horizon: bool,
    /// Keep the per-step symbol trace in the result.
    pub record_symbols: bool,
}

impl SimulationConfig {
    pub fn new(matrix: ConsensusMatrix, params: ZoomParams, x0: Vec<f64>) -> Self {
        let tol = default_tol(&x0);
        Self {
            matrix,
            params,
            x0,
            max_steps: DEFAULT_MAX_STEPS,
            tol,
            full_horizon: false,
            record_symbols: false,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_full_horizon(mut self, full: bool) -> Self {
        self.full_horizon = full;
        self
    }

    pub fn with_symbols(mut self, record: bool) -> Self {
        self.record_symbols = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(&self.matrix, &self.x0, self.max_steps, self.tol)
    }
}

/// `1e-9 * ||x0||`, or `1e-9` for a zero initial state.
pub fn default_tol(x0: &[f64]) -> f64 {
    let norm = l2(x0);
    if norm > 0.0 {
        DEFAULT_REL_TOL * norm
    } else {
        DEFAULT_REL_TOL
    }
}

fn validate_common(matrix: &ConsensusMatrix, x0: &[f64], max_steps: usize, tol: f64) -> Result<()> {
    if x0.len() != matrix.n() {
        return Err(invalid(format!(
            "x0 has {} entries, matrix has dimension {}",
            x0.len(),
            matrix.n()
        )));
    }
    if let Some(x) = x0.iter().find(|x| !x.is_finite()) {
        return Err(invalid(format!("x0 contains non-finite value {x}")));
    }
    if max_steps == 0 {
        return Err(invalid("max_steps must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tol must be positive, got {tol}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub t: usize,
    /// `||x - x_ave 1||_2`
    pub disagreement: f64,
    /// `||x - x_hat||_2`
    pub estimate_error: f64,
    pub l_min: f64,
    pub l_max: f64,
    /// Saturated symbols emitted at this step, each scheduling a zoom-out.
    pub zoom_outs: usize,
    pub x_ave: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    HorizonExhausted,
    Diverged,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::HorizonExhausted => "horizon_exhausted",
            RunStatus::Diverged => "diverged",
        }
    }
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub status: RunStatus,
    /// First step at which the disagreement was within tolerance.
    pub converged_at: Option<usize>,
    pub history: Vec<StepMetrics>,
    pub zoom_in_count: usize,
    pub zoom_out_count: usize,
    pub final_x: Vec<f64>,
    pub final_x_hat: Vec<f64>,
    /// `symbols[t - 1][j]` is agent `j`'s symbol at step `t`, when recorded.
    pub symbols: Option<Vec<Vec<Symbol>>>,
}

impl SimulationResult {
    pub fn steps(&self) -> usize {
        self.history.last().map_or(0, |m| m.t)
    }

    /// Fraction of emitted symbols that were saturated.
    pub fn zoom_out_fraction(&self) -> f64 {
        let total = self.zoom_in_count + self.zoom_out_count;
        if total == 0 {
            0.0
        } else {
            self.zoom_out_count as f64 / total as f64
        }
    }

    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

pub const HISTORY_HEADER: &str = "t,disagreement,estimate_error,l_min,l_max,zoom_outs,x_ave";

pub fn history_csv(history: &[StepMetrics]) -> String {
    let mut out = String::with_capacity(64 * (history.len() + 1));
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for m in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.t, m.disagreement, m.estimate_error, m.l_min, m.l_max, m.zoom_outs, m.x_ave
        );
    }
    out
}

/// Standard gaussian initial state, reproducible from `seed`.
pub fn gaussian_x0(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn disagreement(x: &[f64]) -> (f64, f64) {
    let ave = mean(x);
    (x.iter().map(|v| (v - ave) * (v - ave)).sum::<f64>().sqrt(), ave)
}

/// Decoder replicas held by one receiver: `(sender, replica)`.
struct Receiver {
    replicas: Vec<(usize, CodecState)>,
}

/// Quantized closed loop `x(t+1) = x(t) + K x_hat(t)`.
pub fn run_quantized(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let n = config.matrix.n();
    let k = config.matrix.k();
    let params = &config.params;
    let l_limit = DIVERGENCE_FACTOR * params.l0();

    let mut x = config.x0.clone();
    let mut senders = vec![CodecState::new(params); n];
    let mut receivers: Vec<Receiver> = (0..n)
        .map(|i| Receiver {
            replicas: (0..n)
                .filter(|&j| j != i && k[(i, j)] != 0.0)
                .map(|j| (j, CodecState::new(params)))
                .collect(),
        })
        .collect();
    let mut symbols = config.record_symbols.then(Vec::new);
    let mut history = Vec::with_capacity(config.max_steps.min(1 << 16) + 1);
    let mut zoom_in_count = 0;
    let mut zoom_out_count = 0;
    let mut converged_at = None;

    let (d0, ave0) = disagreement(&x);
    history.push(StepMetrics {
        t: 0,
        disagreement: d0,
        estimate_error: l2(&x),
        l_min: params.l0(),
        l_max: params.l0(),
        zoom_outs: 0,
        x_ave: ave0,
    });
    let mut status = RunStatus::HorizonExhausted;
    if d0 <= config.tol {
        converged_at = Some(0);
        if !config.full_horizon {
            status = RunStatus::Converged;
        }
    }

    // u(0) = K x_hat(0) = 0, so x(1) = x(0): the loop starts at t = 1 with x unchanged.
    let mut step_symbols = vec![Symbol(0); n];
    let mut u = vec![0.0; n];
    if status != RunStatus::Converged {
        for t in 1..=config.max_steps {
            let mut zoom_outs = 0;
            for (j, codec) in senders.iter_mut().enumerate() {
                let s = codec.encode(params, x[j])?;
                if params.quantizer().is_saturated(s) {
                    zoom_outs += 1;
                }
                step_symbols[j] = s;
            }
            zoom_out_count += zoom_outs;
            zoom_in_count += n - zoom_outs;
            for rx in &mut receivers {
                for (j, replica) in &mut rx.replicas {
                    replica.decode(params, step_symbols[*j])?;
                }
            }
            if let Some(trace) = symbols.as_mut() {
                trace.push(step_symbols.clone());
            }

            let (d, ave) = disagreement(&x);
            let mut est_err = 0.0;
            let mut l_min = f64::INFINITY;
            let mut l_max = 0.0f64;
            for (xj, c) in x.iter().zip(&senders) {
                est_err += (xj - c.x_hat()) * (xj - c.x_hat());
                l_min = l_min.min(c.l());
                l_max = l_max.max(c.l());
            }
            history.push(StepMetrics {
                t,
                disagreement: d,
                estimate_error: est_err.sqrt(),
                l_min,
                l_max,
                zoom_outs,
                x_ave: ave,
            });

            if !d.is_finite() || !(l_max <= l_limit) {
                status = RunStatus::Diverged;
                break;
            }
            if d <= config.tol && converged_at.is_none() {
                converged_at = Some(t);
                if !config.full_horizon {
                    status = RunStatus::Converged;
                    break;
                }
            }
            if t == config.max_steps {
                break;
            }

            // Each agent's control uses its own estimate and its replicas of its in-neighbors'.
            for (i, rx) in receivers.iter().enumerate() {
                let mut acc = k[(i, i)] * senders[i].x_hat();
                for (j, replica) in &rx.replicas {
                    acc += k[(i, *j)] * replica.x_hat();
                }
                u[i] = acc;
            }
            for (xi, ui) in x.iter_mut().zip(&u) {
                *xi += ui;
            }
        }
    }
    if status == RunStatus::HorizonExhausted && converged_at.is_some() {
        status = RunStatus::Converged;
    }

    for (i, rx) in receivers.iter().enumerate() {
        for (j, replica) in &rx.replicas {
            if replica != &senders[*j] {
                return Err(Error::ProtocolViolation(format!(
                    "replica of agent {j} at agent {i} lost synchrony"
                )));
            }
        }
    }

    Ok(SimulationResult {
        status,
        converged_at,
        history,
        zoom_in_count,
        zoom_out_count,
        final_x: x,
        final_x_hat: senders.iter().map(CodecState::x_hat).collect(),
        symbols,
    })
}

/// Unquantized baseline `x(t+1) = P x(t)`.
pub fn run_ideal(
    matrix: &ConsensusMatrix,
    x0: &[f64],
    max_steps: usize,
    tol: f64,
) -> Result<SimulationResult> {
    validate_common(matrix, x0, max_steps, tol)?;
    let p = matrix.p();
    let n = matrix.n();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut history = Vec::new();
    let mut converged_at = None;
    let mut status = RunStatus::HorizonExhausted;
    for t in 0..=max_steps {
        let (d, ave) = disagreement(&x);
        history.push(StepMetrics {
            t,
            disagreement: d,
            estimate_error: 0.0,
            l_min: 0.0,
            l_max: 0.0,
            zoom_outs: 0,
            x_ave: ave,
        });
        if !d.is_finite() {
            status = RunStatus::Diverged;
            break;
        }
        if d <= tol {
            converged_at = Some(t);
            status = RunStatus::Converged;
            break;
        }
        if t == max_steps {
            break;
        }
        for (i, out) in next.iter_mut().enumerate() {
            *out = (0..n).map(|j| p[(i, j)] * x[j]).sum();
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(SimulationResult {
        status,
        converged_at,
        history,
        zoom_in_count: 0,
        zoom_out_count: 0,
        final_x_hat: x.clone(),
        final_x: x,
        symbols: None,
    })
}

/// Geometric-mean per-step contraction of the disagreement over the trailing
/// `window` steps: `(d(T) / d(T - window))^(1 / window)`.
pub fn estimate_rate(history: &[StepMetrics], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(invalid("window must be at least 1"));
    }
    if history.len() < window + 1 {
        return Err(invalid(format!(
            "history has {} entries, window {window} needs {}",
            history.len(),
            window + 1
        )));
    }
    let end = history[history.len() - 1].disagreement;
    let start = history[history.len() - 1 - window].disagreement;
    if !(end > 0.0 && start > 0.0) {
        return Err(Error::UndefinedRate(
            "disagreement is zero inside the window".into(),
        ));
    }
    Ok((end / start).powf(1.0 / window as f64))
}
