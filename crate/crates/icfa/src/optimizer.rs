//! Cyclic per-user gradient ascent with backtracking line search.
//!
//! One outer sweep updates each user's precoder in turn: ascend along the
//! WSR gradient, project back onto the power ball when the step leaves it,
//! and backtrack (t *= beta) until the sufficient-increase test
//! `WSR_new >= WSR_old + alpha t ||grad||_F^2` passes. A user's update is
//! abandoned when the required increase `c` falls below `c_min`.
//!
//! The loop is objective-agnostic: the same code optimizes the
//! Monte-Carlo finite-alphabet WSR and the closed-form Gaussian WSR. For
//! Monte-Carlo objectives, one evaluation seed is frozen for an entire
//! sweep and refreshed between sweeps; with common random numbers the
//! accepted WSR sequence is nondecreasing within a sweep by construction.

use crate::channel::{project_power, ChannelSet, NoiseSpec, PrecoderSet};
use crate::constellation::SymbolTable;
use crate::error::{Error, Result};
use crate::gradient::{
    finite_wsr_gradient, gaussian_wsr_gradient, kkt_from_gradients, KktReport,
};
use crate::linalg::{c64, frob_sq, CMatrix};
use crate::mc::{derive_seed, tagged_gaussians, McConfig};
use crate::rate::{finite_wsr, gaussian_wsr, RateEstimate, Weights};

/// Line-search and stopping parameters.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions {
    /// Sufficient-increase fraction, in (0, 0.5).
    pub alpha: f64,
    /// Step-shrink factor, in (0, 1).
    pub beta: f64,
    /// Abandon a user's update when alpha * t * ||grad||^2 drops below this.
    pub c_min: f64,
    /// Outer sweep cap.
    pub max_outer: usize,
    /// Stop when the relative WSR gain over a full sweep falls below this.
    pub rel_tol: f64,
    /// Multistart count.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            alpha: 0.1,
            beta: 0.5,
            c_min: 1e-6,
            max_outer: 100,
            rel_tol: 1e-4,
            restarts: 3,
            seed: 0,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// One user's line-search outcome within a sweep.
#[derive(Debug, Clone, Copy)]
pub struct UserUpdate {
    /// Backtracking iterations spent (0 = abandoned before any candidate).
    pub steps: usize,
    /// Accepted step size, or None when the update was abandoned.
    pub accepted_step: Option<f64>,
    /// Whether the accepted candidate needed a power projection.
    pub projected: bool,
}

/// Per-sweep record.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub sweep: usize,
    /// WSR after this sweep's updates, under this sweep's evaluation seed.
    pub wsr: f64,
    pub stderr: f64,
    pub users: Vec<UserUpdate>,
}

/// Full optimization trace.
#[derive(Debug, Clone)]
pub struct OptimizerTrace {
    pub sweeps: Vec<SweepRecord>,
    pub final_wsr: RateEstimate,
    pub final_kkt: KktReport,
    /// True when the relative-gain criterion triggered before `max_outer`.
    pub converged: bool,
}

/// A weighted sum-rate objective: a value / gradient pair sharing one
/// evaluation seed (ignored by deterministic objectives).
pub trait WsrObjective: Sync {
    fn wsr(&self, pre: &PrecoderSet, eval_seed: u64) -> Result<RateEstimate>;
    fn gradient(&self, pre: &PrecoderSet, user: usize, eval_seed: u64) -> Result<CMatrix>;
}

/// Monte-Carlo finite-alphabet WSR objective.
pub struct FiniteWsrObjective<'a> {
    pub ch: &'a ChannelSet,
    pub tables: &'a [SymbolTable],
    pub noise: NoiseSpec,
    pub weights: Weights,
    pub samples: usize,
}

impl WsrObjective for FiniteWsrObjective<'_> {
    fn wsr(&self, pre: &PrecoderSet, eval_seed: u64) -> Result<RateEstimate> {
        let mc = McConfig::new(self.samples, eval_seed);
        finite_wsr(self.ch, pre, self.tables, &self.noise, &self.weights, &mc)
    }

    fn gradient(&self, pre: &PrecoderSet, user: usize, eval_seed: u64) -> Result<CMatrix> {
        let mc = McConfig::new(self.samples, eval_seed);
        finite_wsr_gradient(
            self.ch,
            pre,
            self.tables,
            &self.noise,
            &self.weights,
            user,
            &mc,
        )
    }
}

/// Closed-form Gaussian-input WSR objective.
pub struct GaussianWsrObjective<'a> {
    pub ch: &'a ChannelSet,
    pub noise: NoiseSpec,
    pub weights: Weights,
}

impl WsrObjective for GaussianWsrObjective<'_> {
    fn wsr(&self, pre: &PrecoderSet, _eval_seed: u64) -> Result<RateEstimate> {
        gaussian_wsr(self.ch, pre, &self.noise, &self.weights)
    }

    fn gradient(&self, pre: &PrecoderSet, user: usize, _eval_seed: u64) -> Result<CMatrix> {
        gaussian_wsr_gradient(self.ch, pre, &self.noise, &self.weights, user)
    }
}

/// Random precoders with i.i.d. standard complex Gaussian entries scaled
/// onto the power sphere tr(G G^H) = P_j.
pub fn random_power_sphere_init(ch: &ChannelSet, p: &[f64], seed: u64) -> PrecoderSet {
    let g = ch
        .n_t
        .iter()
        .enumerate()
        .map(|(j, &nt)| {
            let draws = tagged_gaussians(seed, j as u64, nt * nt);
            let m = CMatrix::from_fn(nt, nt, |r, c| draws[r * nt + c]);
            let scale = (p[j] / frob_sq(&m)).sqrt();
            m * c64(scale, 0.0)
        })
        .collect();
    PrecoderSet { g, p: p.to_vec() }
}

const SWEEP_SEED_TAG: u64 = 0x5eed_0001;
const KKT_SEED_TAG: u64 = 0x5eed_0002;

/// Maximizes the WSR from a random on-sphere initialization.
pub fn optimize_wsr(
    obj: &dyn WsrObjective,
    ch: &ChannelSet,
    p: &[f64],
    opts: &OptimizerOptions,
) -> Result<(PrecoderSet, OptimizerTrace)> {
    opts.validate()?;
    let init = random_power_sphere_init(ch, p, opts.seed);
    optimize_wsr_from(obj, init, opts)
}

/// Maximizes the WSR starting from the given precoders.
pub fn optimize_wsr_from(
    obj: &dyn WsrObjective,
    init: PrecoderSet,
    opts: &OptimizerOptions,
) -> Result<(PrecoderSet, OptimizerTrace)> {
    opts.validate()?;
    let k = init.k();
    let mut pre = init;
    let mut sweeps = Vec::new();
    let mut converged = false;
    let mut final_wsr = RateEstimate::exact(f64::NAN);

    for sweep in 0..opts.max_outer {
        let eval_seed = derive_seed(opts.seed, SWEEP_SEED_TAG + sweep as u64);
        let start = obj.wsr(&pre, eval_seed)?;
        if !start.value.is_finite() {
            return Err(Error::NonFinite(format!("WSR at sweep {sweep}")));
        }
        let mut cur = start;
        let mut users = Vec::with_capacity(k);

        for j in 0..k {
            let grad = obj.gradient(&pre, j, eval_seed)?;
            let grad_norm_sq = frob_sq(&grad);
            let mut t = 1.0;
            let mut steps = 0usize;
            let mut accepted_step = None;
            let mut projected = false;
            loop {
                let c = opts.alpha * t * grad_norm_sq;
                if c < opts.c_min {
                    break;
                }
                let raw = &pre.g[j] + &grad * c64(t, 0.0);
                let needs_proj = frob_sq(&raw) > pre.p[j];
                let cand = project_power(&raw, pre.p[j]);
                let mut cand_set = pre.clone();
                cand_set.g[j] = cand;
                let wsr_new = obj.wsr(&cand_set, eval_seed)?;
                if !wsr_new.value.is_finite() {
                    return Err(Error::NonFinite(format!("WSR at sweep {sweep}, user {j}")));
                }
                steps += 1;
                let t_used = t;
                t *= opts.beta;
                if wsr_new.value >= cur.value + c {
                    pre = cand_set;
                    cur = wsr_new;
                    accepted_step = Some(t_used);
                    projected = needs_proj;
                    break;
                }
            }
            users.push(UserUpdate {
                steps,
                accepted_step,
                projected,
            });
        }

        sweeps.push(SweepRecord {
            sweep,
            wsr: cur.value,
            stderr: cur.stderr,
            users,
        });
        final_wsr = cur;
        let gain = cur.value - start.value;
        if gain < opts.rel_tol * cur.value.abs().max(1e-12) {
            converged = true;
            break;
        }
    }

    let kkt_seed = derive_seed(opts.seed, KKT_SEED_TAG);
    let mut grads = Vec::with_capacity(k);
    for j in 0..k {
        grads.push(obj.gradient(&pre, j, kkt_seed)?);
    }
    let final_kkt = kkt_from_gradients(&pre, &grads);
    let trace = OptimizerTrace {
        sweeps,
        final_wsr,
        final_kkt,
        converged,
    };
    Ok((pre, trace))
}

/// Runs `opts.restarts` independent optimizations and returns the precoders
/// with the maximum final WSR, plus every trace. Restart 0 uses `opts.seed`
/// itself, so `restarts = 1` is identical to a single run.
pub fn multistart(
    obj: &dyn WsrObjective,
    ch: &ChannelSet,
    p: &[f64],
    opts: &OptimizerOptions,
) -> Result<(PrecoderSet, Vec<OptimizerTrace>)> {
    opts.validate()?;
    let mut best: Option<(PrecoderSet, f64)> = None;
    let mut traces = Vec::with_capacity(opts.restarts);
    for r in 0..opts.restarts {
        let seed = if r == 0 {
            opts.seed
        } else {
            derive_seed(opts.seed, r as u64)
        };
        let run_opts = OptimizerOptions { seed, ..*opts };
        let (pre, trace) = optimize_wsr(obj, ch, p, &run_opts)?;
        let value = trace.final_wsr.value;
        if best.as_ref().map_or(true, |(_, b)| value > *b) {
            best = Some((pre, value));
        }
        traces.push(trace);
    }
    Ok((best.expect("restarts >= 1").0, traces))
}
