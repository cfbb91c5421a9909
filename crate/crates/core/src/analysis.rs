//! Sufficient conditions for zoom-in-only convergence, and channel accounting.
//!
//! With `rho` the essential spectral radius of `P`, `N` agents and `||x(0)||`
//! the Euclidean norm of the initial state, the certificate holds when
//!
//! * `rho < k_in < 1`,
//! * `m >= (4 + 3 k_in) sqrt(N) / (k_in (k_in - rho))`,
//! * `l0 > 2 (rho + 2) ||x(0)|| / (k_in - 3 sqrt(N) / m)`.
//!
//! Under these conditions every step is a zoom-in step and the run converges
//! with rate at most `k_in`. No condition involves `k_out`, since zoom-out
//! never happens.

use std::fmt;

use crate::codec::ZoomParams;
use crate::engine::l2;
use crate::error::{invalid, Error, Result};
use crate::matrix::ConsensusMatrix;

/// Relative slack applied to the `m` threshold so a bound that is tight in
/// exact arithmetic is not lost to round-off.
pub const THRESHOLD_SLACK: f64 = 1e-12;

fn m_threshold(rho: f64, k_in: f64, n: usize) -> f64 {
    (4.0 + 3.0 * k_in) * (n as f64).sqrt() / (k_in * (k_in - rho))
}

fn l0_denominator(k_in: f64, m: u32, n: usize) -> f64 {
    k_in - 3.0 * (n as f64).sqrt() / m as f64
}

/// Smallest integer `m` satisfying the quantizer-size condition.
pub fn min_m(rho: f64, k_in: f64, n: usize) -> Result<u64> {
    if !(rho < k_in && k_in < 1.0 && rho >= 0.0) {
        return Err(invalid(format!("need 0 <= rho < k_in < 1, got rho = {rho}, k_in = {k_in}")));
    }
    if n == 0 {
        return Err(invalid("need at least one agent"));
    }
    let rhs = m_threshold(rho, k_in, n) * (1.0 - THRESHOLD_SLACK);
    Ok(rhs.ceil().max(1.0) as u64)
}

/// Right-hand side of the `l0` condition; any strictly larger `l0` satisfies it.
pub fn min_l0(rho: f64, k_in: f64, m: u32, n: usize, x0_norm: f64) -> Result<f64> {
    let denom = l0_denominator(k_in, m, n);
    if !(denom > 0.0) {
        return Err(Error::InfeasibleParameters(format!(
            "k_in - 3 sqrt(N)/m = {denom} is not positive"
        )));
    }
    Ok(2.0 * (rho + 2.0) * x0_norm / denom)
}

/// Bits needed per transmitted symbol. With `silence` the zero level of an
/// odd `m` is sent as no transmission, leaving `m + 1` signalled symbols.
pub fn bits_per_symbol(m: u32, silence: bool) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    if silence {
        if m.is_multiple_of(2) {
            return Err(invalid(format!("m = {m} is even and has no zero level")));
        }
        Ok(((m + 1) as f64).log2())
    } else {
        Ok(((m + 2) as f64).log2())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCertificate {
    pub rho: f64,
    pub n: usize,
    pub params: ZoomParams,
    pub x0_norm: f64,
    pub cond_rate: bool,
    pub cond_m: bool,
    pub cond_l0: bool,
    pub all_hold: bool,
    /// `min(k_in - rho, 1 - k_in)`; positive iff the rate condition holds.
    pub rate_margin: f64,
    /// The real-valued `m` threshold, when `k_in > rho`.
    pub m_threshold: Option<f64>,
    /// `m - m_threshold`.
    pub m_margin: Option<f64>,
    /// The `l0` bound, when its denominator is positive.
    pub l0_threshold: Option<f64>,
    /// `l0 - l0_threshold`.
    pub l0_margin: Option<f64>,
}

/// Evaluate the three hypotheses for a matrix, parameters and initial state.
pub fn check_theorem(matrix: &ConsensusMatrix, params: &ZoomParams, x0: &[f64]) -> TheoremCertificate {
    let rho = matrix.rho();
    let n = matrix.n();
    let k_in = params.k_in();
    let x0_norm = l2(x0);

    let cond_rate = rho < k_in && k_in < 1.0;
    let m_threshold = (k_in > rho).then(|| m_threshold(rho, k_in, n));
    let m = params.m() as f64;
    let cond_m = m_threshold.is_some_and(|th| m >= th * (1.0 - THRESHOLD_SLACK));
    let l0_threshold = min_l0(rho, k_in, params.m(), n, x0_norm).ok();
    let cond_l0 = l0_threshold.is_some_and(|th| params.l0() > th);

    TheoremCertificate {
        rho,
        n,
        params: *params,
        x0_norm,
        cond_rate,
        cond_m,
        cond_l0,
        all_hold: cond_rate && cond_m && cond_l0,
        rate_margin: (k_in - rho).min(1.0 - k_in),
        m_threshold,
        m_margin: m_threshold.map(|th| m - th),
        l0_threshold,
        l0_margin: l0_threshold.map(|th| params.l0() - th),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

impl fmt::Display for TheoremCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theorem.rho: {}", self.rho)?;
        writeln!(f, "theorem.n: {}", self.n)?;
        writeln!(f, "theorem.m: {}", self.params.m())?;
        writeln!(f, "theorem.k_in: {}", self.params.k_in())?;
        writeln!(f, "theorem.k_out: {} (not constrained)", self.params.k_out())?;
        writeln!(f, "theorem.l0: {}", self.params.l0())?;
        writeln!(f, "theorem.x0_norm: {}", self.x0_norm)?;
        writeln!(f, "theorem.cond_rate: {}", self.cond_rate)?;
        writeln!(f, "theorem.rate_margin: {}", self.rate_margin)?;
        writeln!(f, "theorem.cond_m: {}", self.cond_m)?;
        writeln!(f, "theorem.m_threshold: {}", opt(self.m_threshold))?;
        writeln!(f, "theorem.m_margin: {}", opt(self.m_margin))?;
        writeln!(f, "theorem.cond_l0: {}", self.cond_l0)?;
        writeln!(f, "theorem.l0_threshold: {}", opt(self.l0_threshold))?;
        writeln!(f, "theorem.l0_margin: {}", opt(self.l0_margin))?;
        writeln!(f, "theorem.all_hold: {}", self.all_hold)
    }
}
