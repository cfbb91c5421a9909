//! Zooming-in/zooming-out encoder and decoder.
//!
//! The sender and each of its receivers run identical copies of [`CodecState`].
//! The encoder quantizes the innovation `x - x_hat` scaled by the current
//! scaling factor, and both sides update `x_hat` and the scaling factor from
//! the emitted symbol alone, so the copies stay bit-identical as long as no
//! symbol is lost.
//!
//! Time indexing: the state at step `t` holds `x_hat(t)` and `l(t)`, with
//! `x_hat(0) = 0` and `l(0) = l(1) = l0`. The first symbol is `s(1)`. After
//! symbol `s(t)` the next factor is `k_in * l(t)` if `|s(t)| < 1` and
//! `k_out * l(t)` if `|s(t)| = 1`.

use crate::error::{invalid, Error, Result};
use crate::quantizer::{Symbol, UniformQuantizer};

/// Parameters shared by every codec in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomParams {
    quantizer: UniformQuantizer,
    k_in: f64,
    k_out: f64,
    l0: f64,
}

impl ZoomParams {
    pub fn new(m: u32, k_in: f64, k_out: f64, l0: f64) -> Result<Self> {
        let quantizer = UniformQuantizer::new(m)?;
        if !(k_in > 0.0 && k_in < 1.0) {
            return Err(invalid(format!("k_in must lie in (0, 1), got {k_in}")));
        }
        if !(k_out > 1.0 && k_out.is_finite()) {
            return Err(invalid(format!("k_out must exceed 1, got {k_out}")));
        }
        if !(l0 > 0.0 && l0.is_finite()) {
            return Err(invalid(format!("l0 must be positive, got {l0}")));
        }
        Ok(Self { quantizer, k_in, k_out, l0 })
    }

    pub fn m(&self) -> u32 {
        self.quantizer.m()
    }

    pub fn k_in(&self) -> f64 {
        self.k_in
    }

    pub fn k_out(&self) -> f64 {
        self.k_out
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn quantizer(&self) -> &UniformQuantizer {
        &self.quantizer
    }

    pub fn with_l0(self, l0: f64) -> Result<Self> {
        Self::new(self.m(), self.k_in, self.k_out, l0)
    }
}

/// One replica of an agent's coder/decoder state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecState {
    x_hat: f64,
    l: f64,
    t: u64,
    last: Option<Symbol>,
}

impl CodecState {
    pub fn new(params: &ZoomParams) -> Self {
        Self { x_hat: 0.0, l: params.l0, t: 0, last: None }
    }

    /// Current estimate `x_hat(t)`.
    pub fn x_hat(&self) -> f64 {
        self.x_hat
    }

    /// Scaling factor `l(t)`.
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn last_symbol(&self) -> Option<Symbol> {
        self.last
    }

    /// The factor `l(t + 1)` that the next symbol will be scaled by.
    pub fn scheduled_scale(&self, params: &ZoomParams) -> f64 {
        match self.last {
            None => self.l,
            Some(s) if params.quantizer.is_saturated(s) => params.k_out * self.l,
            Some(_) => params.k_in * self.l,
        }
    }

    /// Sender side: emit `s(t+1)` for the true state `x(t+1)` and advance.
    pub fn encode(&mut self, params: &ZoomParams, x_true: f64) -> Result<Symbol> {
        if !x_true.is_finite() {
            return Err(invalid(format!("non-finite state {x_true}")));
        }
        let l_next = self.scheduled_scale(params);
        let innovation = x_true - self.x_hat;
        // a scale that underflowed to zero must still map zero innovation to a level
        let scaled = if innovation == 0.0 { 0.0 } else { innovation / l_next };
        let symbol = params.quantizer.quantize_symbol(scaled)?;
        self.advance(params, l_next, symbol);
        Ok(symbol)
    }

    /// Receiver side: apply the received symbol and return the new estimate.
    pub fn decode(&mut self, params: &ZoomParams, symbol: Symbol) -> Result<f64> {
        if params.quantizer.level(symbol).is_none() {
            return Err(Error::ProtocolViolation(format!(
                "symbol index {} outside the {}-symbol alphabet",
                symbol.0,
                params.quantizer.alphabet_size()
            )));
        }
        let l_next = self.scheduled_scale(params);
        self.advance(params, l_next, symbol);
        Ok(self.x_hat)
    }

    /// Receiver side, for a symbol given as its level value.
    pub fn decode_level(&mut self, params: &ZoomParams, level: f64) -> Result<f64> {
        let symbol = params
            .quantizer
            .symbol_index(level)
            .map_err(|e| Error::ProtocolViolation(e.to_string()))?;
        self.decode(params, symbol)
    }

    fn advance(&mut self, params: &ZoomParams, l_next: f64, symbol: Symbol) {
        let level = params.quantizer.level(symbol).expect("validated symbol");
        self.x_hat += l_next * level;
        self.l = l_next;
        self.t += 1;
        self.last = Some(symbol);
    }
}

/// Symbol traces: little-endian `u16` indices, one per agent per step, and a CSV form.
pub mod trace {
    use std::fmt::Write as _;

    use super::Symbol;
    use crate::error::{Error, Result};

    /// Steps are written in order; within a step agents are written in index order.
    pub fn to_bytes(steps: &[Vec<Symbol>]) -> Vec<u8> {
        steps.iter().flatten().flat_map(|s| s.0.to_le_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8], n: usize) -> Result<Vec<Vec<Symbol>>> {
        if n == 0 || !bytes.len().is_multiple_of(2 * n) {
            return Err(Error::Parse(format!(
                "trace of {} bytes is not a whole number of {n}-agent steps",
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(2 * n)
            .map(|step| {
                step.chunks_exact(2)
                    .map(|b| Symbol(u16::from_le_bytes([b[0], b[1]])))
                    .collect()
            })
            .collect())
    }

    /// Header `t,agent_1,...,agent_n`; the first row is `t = 1`.
    pub fn to_csv(steps: &[Vec<Symbol>]) -> String {
        let n = steps.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for j in 1..=n {
            let _ = write!(out, ",agent_{j}");
        }
        out.push('\n');
        for (idx, step) in steps.iter().enumerate() {
            let _ = write!(out, "{}", idx + 1);
            for s in step {
                let _ = write!(out, ",{}", s.0);
            }
            out.push('\n');
        }
        out
    }
}
