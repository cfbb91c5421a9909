//! Acceptance checks, runnable from the CLI (`zoomcons verify`) and from the
//! `acceptance` test target.
//!
//! Every check carries its own tolerance and runtime budget.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{bits_per_symbol, check_theorem};
use crate::codec::{CodecState, ZoomParams};
use crate::engine::{
    estimate_rate, gaussian_x0, l2, run_ideal, run_quantized, RunStatus, SimulationConfig,
};
use crate::error::Result;
use crate::graph::Digraph;
use crate::matrix::ConsensusMatrix;
use crate::quantizer::UniformQuantizer;

/// Essential spectral radius of the 20-ring reported for the maximum degree rule.
pub const RING20_RHO: f64 = 0.9673;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} {:>9.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn timed(
    id: u32,
    name: &'static str,
    budget_secs: f64,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CheckOutcome {
    let budget = Duration::from_secs_f64(budget_secs);
    let start = Instant::now();
    let (mut passed, mut detail) = match body() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    if elapsed > budget {
        passed = false;
        detail = format!("{detail}; over budget of {budget_secs}s");
    }
    CheckOutcome { id, name, passed, detail, elapsed, budget }
}

fn ring_matrix(n: usize) -> Result<ConsensusMatrix> {
    ConsensusMatrix::max_degree(&Digraph::ring(n)?)
}

/// Eigenvalues of the max-degree Perron matrix of an `n`-ring, from the circulant formula.
pub fn ring_circulant_eigenvalues(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            1.0 - (2.0 / 3.0) * (1.0 - theta.cos())
        })
        .collect()
}

pub fn ring_circulant_rho(n: usize) -> f64 {
    ring_circulant_eigenvalues(n)[1..]
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
}

fn unit_gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut x = gaussian_x0(n, seed);
    let norm = l2(&x);
    x.iter_mut().for_each(|v| *v /= norm);
    x
}

pub fn spectral_anchor() -> CheckOutcome {
    timed(1, "ring-20 spectral radius", 1.0, || {
        let rho = ring_matrix(20)?.rho();
        let err = (rho - RING20_RHO).abs();
        Ok((err <= 5e-4, format!("rho = {rho:.6}, |rho - {RING20_RHO}| = {err:.2e} (tol 5e-4)")))
    })
}

pub const ERROR_BOUND_CASES: usize = 100_000;

pub fn error_bound_fuzz() -> CheckOutcome {
    timed(2, "quantization error fuzz", 5.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1e77a);
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for _ in 0..ERROR_BOUND_CASES {
            let m = rng.random_range(1..=64u32);
            // l in (0, 10]
            let l = 10.0 * (1.0 - rng.random::<f64>());
            let z = rng.random_range(-l..=l);
            let (err, bound) = UniformQuantizer::new(m)?.quantization_error_bound(z, l)?;
            worst = worst.max(err / bound);
            if err > bound {
                violations += 1;
            }
        }
        Ok((
            violations == 0,
            format!("{ERROR_BOUND_CASES} cases checked, {violations} violations, max err/bound = {worst:.6}"),
        ))
    })
}

/// Seeds of the unit-norm initial states used for the certified ring-4 run.
pub const THEOREM_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

pub fn theorem_regime() -> CheckOutcome {
    timed(3, "certified ring-4 run", 1.0, || {
        let matrix = ring_matrix(4)?;
        let oracle_rho = ring_circulant_rho(4);
        if (matrix.rho() - oracle_rho).abs() > 1e-9 {
            return Ok((false, format!("rho {} disagrees with circulant {oracle_rho}", matrix.rho())));
        }
        let params = ZoomParams::new(132, 0.5, 2.0, 10.5)?;
        let mut worst_rate = 0.0f64;
        let mut worst_steps = 0usize;
        for seed in THEOREM_SEEDS {
            let x0 = unit_gaussian(4, seed);
            let cert = check_theorem(&matrix, &params, &x0);
            if !cert.all_hold {
                return Ok((false, format!("seed {seed}: certificate fails\n{cert}")));
            }
            let cfg = SimulationConfig::new(matrix.clone(), params, x0)
                .with_tol(1e-9)
                .with_max_steps(60);
            let res = run_quantized(&cfg)?;
            if res.zoom_out_count != 0 {
                return Ok((false, format!("seed {seed}: {} zoom-outs", res.zoom_out_count)));
            }
            let d1 = res.history[1].disagreement;
            for h in &res.history[1..] {
                let expected_l = 10.5 * 0.5f64.powi(h.t as i32 - 1);
                if h.l_min != expected_l || h.l_max != expected_l {
                    return Ok((false, format!("seed {seed}: l({}) = [{}, {}] != {expected_l}", h.t, h.l_min, h.l_max)));
                }
                let bound = d1 * 0.51f64.powi(h.t as i32 - 1);
                if h.disagreement > bound {
                    return Ok((false, format!(
                        "seed {seed}: disagreement({}) = {:e} exceeds {:e}",
                        h.t, h.disagreement, bound
                    )));
                }
            }
            let Some(t_conv) = res.converged_at.filter(|_| res.status == RunStatus::Converged) else {
                return Ok((false, format!("seed {seed}: not converged in 60 steps")));
            };
            let window = t_conv - 1;
            let rate = estimate_rate(&res.history, window)?;
            if rate > 0.5 + 0.01 {
                return Ok((false, format!("seed {seed}: empirical rate {rate:.4} > k_in + 0.01")));
            }
            worst_rate = worst_rate.max(rate);
            worst_steps = worst_steps.max(t_conv);
        }
        Ok((
            true,
            format!(
                "{} seeds certified, no zoom-out, converged by t = {worst_steps}, max rate {worst_rate:.4}",
                THEOREM_SEEDS.len()
            ),
        ))
    })
}

pub const CONSERVATION_CONFIGS: usize = 100;

/// One random (graph, params, x0) configuration for the conservation check.
pub fn random_config(rng: &mut ChaCha8Rng) -> Result<SimulationConfig> {
    let graph = loop {
        let n = rng.random_range(3..=30usize);
        let g = if rng.random_bool(0.5) {
            Digraph::ring(n)?
        } else {
            Digraph::random_geometric(n.max(5), 0.5, rng.random())?
        };
        if g.is_strongly_connected() {
            break g;
        }
    };
    let matrix = ConsensusMatrix::max_degree(&graph)?;
    let params = ZoomParams::new(
        rng.random_range(3..=16),
        rng.random_range(0.3..0.99),
        rng.random_range(1.1..2.5),
        rng.random_range(0.5..5.0),
    )?;
    let x0 = gaussian_x0(graph.n(), rng.random());
    Ok(SimulationConfig::new(matrix, params, x0).with_max_steps(2000))
}

pub fn average_conservation() -> CheckOutcome {
    timed(4, "average conservation", 30.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa7e);
        let mut worst = 0.0f64;
        let mut steps = 0usize;
        for idx in 0..CONSERVATION_CONFIGS {
            let cfg = random_config(&mut rng)?;
            let n = cfg.x0.len() as f64;
            let scale = cfg.x0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let res = run_quantized(&cfg)?;
            let ave0 = res.history[0].x_ave;
            for h in &res.history {
                let drift = (h.x_ave - ave0).abs() / (n * scale);
                worst = worst.max(drift);
                if drift > 1e-10 {
                    return Ok((false, format!("config {idx}: drift {drift:e} at t = {} ({})", h.t, res.status)));
                }
            }
            steps += res.history.len();
        }
        Ok((
            true,
            format!("{CONSERVATION_CONFIGS} configs, {steps} steps, max drift / (n max|x0|) = {worst:.2e}"),
        ))
    })
}

pub const SYNC_TRAJECTORIES: usize = 100;

pub fn codec_synchrony() -> CheckOutcome {
    timed(5, "codec synchrony", 5.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5c);
        let mut symbols = 0usize;
        for idx in 0..SYNC_TRAJECTORIES {
            let params = ZoomParams::new(
                rng.random_range(1..=32),
                rng.random_range(0.05..0.99),
                rng.random_range(1.01..4.0),
                rng.random_range(0.01..10.0),
            )?;
            let mut enc = CodecState::new(&params);
            let mut dec = CodecState::new(&params);
            let mut x: f64 = rng.random_range(-10.0..10.0);
            let drift: f64 = rng.random_range(0.5..1.0);
            let len = rng.random_range(100..1000);
            let mut stream = Vec::with_capacity(len);
            let mut enc_hist = Vec::with_capacity(len);
            for t in 0..len {
                x += rng.random_range(-1.0..1.0) * drift.powi(t as i32);
                stream.push(enc.encode(&params, x)?);
                enc_hist.push((enc.x_hat().to_bits(), enc.l().to_bits()));
            }
            // the decoder sees only the symbol stream
            for (t, s) in stream.iter().enumerate() {
                dec.decode(&params, *s)?;
                if (dec.x_hat().to_bits(), dec.l().to_bits()) != enc_hist[t] {
                    return Ok((false, format!("trajectory {idx}: mismatch at step {}", t + 1)));
                }
            }
            symbols += len;
        }
        Ok((true, format!("{SYNC_TRAJECTORIES} trajectories, {symbols} symbols, bit-identical")))
    })
}

pub fn sub_threshold_regime() -> CheckOutcome {
    timed(6, "m = 1 below threshold", 10.0, || {
        let matrix = ring_matrix(20)?;
        let params = ZoomParams::new(1, 0.9, 2.0, 1.0)?;
        let mut failures = Vec::new();
        let mut worst_steps = 0;
        for seed in 0..10u64 {
            let x0 = gaussian_x0(20, seed);
            let tol = 1e-6 * l2(&x0);
            let res = run_quantized(
                &SimulationConfig::new(matrix.clone(), params, x0)
                    .with_tol(tol)
                    .with_max_steps(5000),
            )?;
            match res.status {
                RunStatus::Converged => worst_steps = worst_steps.max(res.steps()),
                status => failures.push(format!("seed {seed} {status} at t = {}", res.steps())),
            }
        }
        if failures.is_empty() {
            Ok((true, format!("10 seeds converged, slowest at t = {worst_steps}")))
        } else {
            Ok((false, format!("{} of 10 seeds failed: {}", failures.len(), failures.join(", "))))
        }
    })
}

/// Empirical rate of a ring-20, `m = 6`, `k_out = 2` run from the shared initial state.
pub fn ring20_rate(k_in: f64) -> Result<(f64, f64)> {
    let matrix = ring_matrix(20)?;
    let x0 = gaussian_x0(20, 0);
    let tol = 1e-9 * l2(&x0);
    let params = ZoomParams::new(6, k_in, 2.0, 1.0)?;
    let res = run_quantized(
        &SimulationConfig::new(matrix, params, x0)
            .with_tol(tol)
            .with_max_steps(20_000),
    )?;
    let window = 100.min(res.history.len() - 1);
    Ok((estimate_rate(&res.history, window)?, res.zoom_out_fraction()))
}

pub fn threshold_sweep() -> CheckOutcome {
    timed(7, "k_in threshold sweep", 10.0, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for k_in in [0.98, 0.99] {
            let (rate, _) = ring20_rate(k_in)?;
            ok &= (rate - k_in).abs() <= 0.01;
            parts.push(format!("k_in {k_in}: rate {rate:.4} (pinned)"));
        }
        for k_in in [0.90, 0.93] {
            let (rate, zof) = ring20_rate(k_in)?;
            ok &= (rate - k_in).abs() > 0.01;
            parts.push(format!("k_in {k_in}: rate {rate:.4}, zoom-out fraction {zof:.3} (free)"));
        }
        Ok((ok, parts.join("; ")))
    })
}

pub fn alphabet_accounting() -> CheckOutcome {
    timed(8, "alphabet and bit accounting", 1.0, || {
        for m in 1..=64 {
            let size = UniformQuantizer::new(m)?.alphabet_size();
            if size != m as usize + 2 {
                return Ok((false, format!("m = {m}: alphabet size {size}")));
            }
        }
        let b3 = bits_per_symbol(3, true)?;
        let b1 = bits_per_symbol(1, true)?;
        Ok((
            b3 == 2.0 && b1 == 1.0,
            format!("|S_m| = m + 2 for m in 1..=64; bits(3, silence) = {b3}, bits(1, silence) = {b1}"),
        ))
    })
}

pub fn ideal_baseline() -> CheckOutcome {
    timed(9, "ideal baseline rate", 1.0, || {
        let matrix = ring_matrix(4)?;
        let oracle = ring_circulant_rho(4);
        // zero-mean start so the disagreement keeps full relative precision
        let mut x0 = gaussian_x0(4, 9);
        let ave = x0.iter().sum::<f64>() / 4.0;
        x0.iter_mut().for_each(|v| *v -= ave);
        let res = run_ideal(&matrix, &x0, 40, f64::MIN_POSITIVE)?;
        let rate = estimate_rate(&res.history, 30)?;
        let err = (rate - oracle).abs();
        Ok((err <= 0.01, format!("rate {rate:.6} vs circulant rho {oracle:.6}, |diff| = {err:.2e} (tol 0.01)")))
    })
}

/// All checks, in order.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        spectral_anchor(),
        error_bound_fuzz(),
        theorem_regime(),
        average_conservation(),
        codec_synchrony(),
        sub_threshold_regime(),
        threshold_sweep(),
        alphabet_accounting(),
        ideal_baseline(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circulant_ring4() {
        let mut e = ring_circulant_eigenvalues(4);
        e.sort_by(f64::total_cmp);
        let want = [-1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn outcome_line_format() {
        let o = timed(8, "x", 1.0, || Ok((true, "fine".into())));
        assert!(o.line().starts_with("[PASS]  8 x"));
        let late = timed(1, "y", 0.0, || Ok((true, String::new())));
        assert!(!late.passed);
    }
}
