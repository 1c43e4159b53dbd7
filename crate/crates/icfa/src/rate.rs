//! Achievable-rate computations.
//!
//! `finite_rate` is the exact-enumeration Monte-Carlo estimator of the
//! per-user mutual information under discrete inputs: all inner sums over
//! the joint alphabet are evaluated exactly in the log domain and only the
//! noise expectation is sampled. `gaussian_rate` is the closed-form
//! log-determinant rate for Gaussian inputs, `jensen_rate` the deterministic
//! closed-form approximation obtained by pushing the noise expectation
//! inside the logarithms (tight as SNR -> 0), and `first_order_rate` the
//! shared leading term `(log2 e / sigma^2) tr(H G G^H H^H)` of both.

use rayon::prelude::*;

use crate::channel::{ChannelSet, NoiseSpec, PrecoderSet};
use crate::constellation::SymbolTable;
use crate::enumeration::{validate_system, EnumSet};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, gram, log2_det_hpd, noise_plus_gram, LOG2_E};
use crate::mc::{standard_noise, McConfig};

/// A rate in bits/s/Hz with its Monte-Carlo standard error.
///
/// Exact (non-sampled) computations report `stderr = 0` and `samples = 0`.
/// Values are reported raw; Monte-Carlo noise can push them slightly
/// negative near zero rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl RateEstimate {
    pub fn exact(value: f64) -> Self {
        RateEstimate {
            value,
            stderr: 0.0,
            samples: 0,
        }
    }
}

/// Per-user weighting factors, constrained to sum to K.
#[derive(Debug, Clone)]
pub struct Weights {
    mu: Vec<f64>,
}

impl Weights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.iter().any(|&m| m < 0.0) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let sum: f64 = mu.iter().sum();
        let k = mu.len() as f64;
        if (sum - k).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "weights must sum to K = {k}, got {sum}"
            )));
        }
        Ok(Weights { mu })
    }

    pub fn uniform(k: usize) -> Self {
        Weights { mu: vec![1.0; k] }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-draw log-ratio samples for user `j`; the mean of these, subtracted
/// from log2 M_j, is the rate estimate.
fn per_draw_log_ratios(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    j: usize,
    mc: &McConfig,
) -> Result<Vec<f64>> {
    let full = EnumSet::new(ch, pre, tables, noise, j, None)?;
    let excl = EnumSet::new(ch, pre, tables, noise, j, Some(j))?;
    let sigma = noise.sigma2.sqrt();
    let n_r = ch.n_r[j];
    let seed = mc.seed;
    let draws: Vec<f64> = (0..mc.samples)
        .into_par_iter()
        .map_init(
            || (full.scratch(), excl.scratch()),
            |(sc_full, sc_excl), s| {
                let z = standard_noise(seed, j, s, n_r);
                let n: Vec<_> = z.iter().map(|v| v * sigma).collect();
                full.avg_log2_lse(&n, sc_full) - excl.avg_log2_lse(&n, sc_excl)
            },
        )
        .collect();
    Ok(draws)
}

/// Finite-alphabet achievable rate of user `j` (bits/s/Hz).
pub fn finite_rate(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    j: usize,
    mc: &McConfig,
) -> Result<RateEstimate> {
    validate_system(ch, pre, tables)?;
    let draws = per_draw_log_ratios(ch, pre, tables, noise, j, mc)?;
    let (mean, stderr) = mean_and_stderr(&draws);
    Ok(RateEstimate {
        value: (tables[j].size() as f64).log2() - mean,
        stderr,
        samples: mc.samples,
    })
}

/// Finite-alphabet weighted sum-rate: sum of mu_j * finite_rate(j), with the
/// standard errors propagated in quadrature. Users with zero weight are
/// skipped entirely.
pub fn finite_wsr(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    w: &Weights,
    mc: &McConfig,
) -> Result<RateEstimate> {
    validate_system(ch, pre, tables)?;
    let mut value = 0.0;
    let mut var = 0.0;
    for (j, &mu) in w.mu().iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        let r = finite_rate(ch, pre, tables, noise, j, mc)?;
        value += mu * r.value;
        var += (mu * r.stderr) * (mu * r.stderr);
    }
    Ok(RateEstimate {
        value,
        stderr: var.sqrt(),
        samples: mc.samples,
    })
}

/// Gaussian-input rate of user `j`: difference of two log-determinants.
pub fn gaussian_rate(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    noise: &NoiseSpec,
    j: usize,
) -> Result<RateEstimate> {
    let n = ch.n_r[j];
    let all = noise_plus_gram(
        noise.sigma2,
        n,
        (0..ch.k).map(|i| gram(&(ch.h(j, i) * &pre.g[i]))),
    );
    let interf = noise_plus_gram(
        noise.sigma2,
        n,
        (0..ch.k)
            .filter(|&i| i != j)
            .map(|i| gram(&(ch.h(j, i) * &pre.g[i]))),
    );
    Ok(RateEstimate::exact(
        log2_det_hpd(&all)? - log2_det_hpd(&interf)?,
    ))
}

/// Gaussian-input weighted sum-rate.
pub fn gaussian_wsr(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    noise: &NoiseSpec,
    w: &Weights,
) -> Result<RateEstimate> {
    let mut value = 0.0;
    for (j, &mu) in w.mu().iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        value += mu * gaussian_rate(ch, pre, noise, j)?.value;
    }
    Ok(RateEstimate::exact(value))
}

/// Deterministic closed-form rate approximation with the noise expectation
/// pushed inside the logarithms; the exponents become -||.||^2 / (2 sigma^2)
/// and no sampling is needed. Asymptotically exact as SNR -> 0.
pub fn jensen_rate(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    j: usize,
) -> Result<RateEstimate> {
    validate_system(ch, pre, tables)?;
    let doubled = NoiseSpec {
        sigma2: 2.0 * noise.sigma2,
    };
    let full = EnumSet::new(ch, pre, tables, &doubled, j, None)?;
    let excl = EnumSet::new(ch, pre, tables, &doubled, j, Some(j))?;
    let zero = vec![num_complex::Complex64::default(); ch.n_r[j]];
    let a = full.avg_log2_lse(&zero, &mut full.scratch());
    let b = excl.avg_log2_lse(&zero, &mut excl.scratch());
    Ok(RateEstimate::exact(
        (tables[j].size() as f64).log2() - (a - b),
    ))
}

/// Leading low-SNR term shared by the finite-alphabet and Gaussian rates:
/// `(log2 e / sigma^2) tr(H_jj G_j G_j^H H_jj^H)`.
pub fn first_order_rate(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    noise: &NoiseSpec,
    j: usize,
) -> Result<RateEstimate> {
    let hg = ch.h(j, j) * &pre.g[j];
    Ok(RateEstimate::exact(LOG2_E / noise.sigma2 * frob_sq(&hg)))
}
