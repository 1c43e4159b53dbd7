//! Weighted sum-rate gradients.
//!
//! The finite-alphabet gradient with respect to each precoder is assembled
//! from two expectation matrices per (receiver, user) pair: T1 runs over the
//! full joint alphabet of all users, T2 over the alphabet with the
//! receiver's own user removed. Both are ratio-of-sums expectations whose
//! numerator and denominator share each noise draw; the ratio is evaluated
//! per draw and then averaged, and each T pair reuses the same per-receiver
//! noise streams as the rate estimator, so the assembled gradient is the
//! exact gradient of the Monte-Carlo objective under frozen draws. That is
//! what the finite-difference validator checks.

use nalgebra::DMatrix;

use rayon::prelude::*;

use crate::channel::{ChannelSet, NoiseSpec, PrecoderSet};
use crate::constellation::{DifferenceTable, SymbolTable};
use crate::enumeration::{validate_system, EnumSet};
use crate::error::Result;
use crate::linalg::{c64, frob_sq, gram, noise_plus_gram, solve_hpd, CMatrix, LOG2_E};
use crate::mc::{standard_noise, McConfig};
use crate::rate::Weights;

/// A complex matrix estimate with a per-entry Monte-Carlo standard error
/// (combined over real and imaginary parts).
#[derive(Debug, Clone)]
pub struct MatrixEstimate {
    pub value: CMatrix,
    pub stderr: DMatrix<f64>,
}

/// Per-user gradient matrices with standard errors and the sampling config
/// they were estimated under.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub grad: Vec<CMatrix>,
    pub stderr: Vec<DMatrix<f64>>,
    pub mc: McConfig,
}

/// KKT diagnostics for a precoder set.
///
/// The multiplier estimate `kappa_j = max(0, Re tr(G^H grad) / tr(G^H G))`
/// is a least-squares alignment convention, reported for diagnosis only.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub kappa: Vec<f64>,
    /// ||grad_j - kappa_j G_j||_F per user.
    pub stationarity: Vec<f64>,
    /// |kappa_j (tr(G_j G_j^H) - P_j)| per user.
    pub slackness: Vec<f64>,
    /// Users whose precoder is numerically zero (kappa reported as 0).
    pub zero_precoder: Vec<bool>,
}

fn estimate_from_draws(draws: &[CMatrix], rows: usize, cols: usize) -> MatrixEstimate {
    let n = draws.len();
    let mut mean = CMatrix::zeros(rows, cols);
    for d in draws {
        mean += d;
    }
    mean /= c64(n as f64, 0.0);
    let mut stderr = DMatrix::<f64>::zeros(rows, cols);
    if n >= 2 {
        for d in draws {
            let dev = d - &mean;
            for r in 0..rows {
                for c in 0..cols {
                    stderr[(r, c)] += dev[(r, c)].norm_sqr();
                }
            }
        }
        stderr.iter_mut().for_each(|v| {
            *v = (*v / (n - 1) as f64 / n as f64).sqrt();
        });
    }
    MatrixEstimate { value: mean, stderr }
}

/// Per-draw T1/T2 ratio matrices for receiver `i` and target user `j`.
///
/// For `i == j` the T2 matrix is identically zero: removing user `i` removes
/// the indices the difference factor would range over, and averaging the
/// factor uniformly over them cancels exactly (the alphabet is zero-mean).
fn t_pair_draws(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    i: usize,
    j: usize,
    mc: &McConfig,
) -> Result<Vec<(CMatrix, CMatrix)>> {
    let full = EnumSet::new(ch, pre, tables, noise, i, None)?;
    let excl = if i != j {
        Some(EnumSet::new(ch, pre, tables, noise, i, Some(i))?)
    } else {
        None
    };
    let raw = DifferenceTable::new(&tables[j]);
    let n_t_j = tables[j].n_t;
    let n_r = ch.n_r[i];
    let loc_full = full.users.iter().position(|&u| u == j).expect("user in set");
    let loc_excl = excl
        .as_ref()
        .map(|e| e.users.iter().position(|&u| u == j).expect("user in set"));
    let sigma = noise.sigma2.sqrt();
    let seed = mc.seed;
    let draws: Vec<(CMatrix, CMatrix)> = (0..mc.samples)
        .into_par_iter()
        .map_init(
            || (full.scratch(), excl.as_ref().map(|e| e.scratch())),
            |(sc_full, sc_excl), s| {
                let z = standard_noise(seed, i, s, n_r);
                let n: Vec<_> = z.iter().map(|v| v * sigma).collect();
                let t1 = full.t_ratio_avg(&n, loc_full, &raw, n_t_j, sc_full);
                let t2 = match (&excl, sc_excl, loc_excl) {
                    (Some(e), Some(sc), Some(loc)) => e.t_ratio_avg(&n, loc, &raw, n_t_j, sc),
                    _ => CMatrix::zeros(n_r, n_t_j),
                };
                (t1, t2)
            },
        )
        .collect();
    Ok(draws)
}

/// Monte-Carlo estimates of the gradient expectation matrices T1 and T2 for
/// receiver `i` and target user `j`, each N_r_i x N_t_j.
pub fn t_matrices(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    i: usize,
    j: usize,
    mc: &McConfig,
) -> Result<(CMatrix, CMatrix)> {
    let (t1, t2) = t_matrices_detailed(ch, pre, tables, noise, i, j, mc)?;
    Ok((t1.value, t2.value))
}

/// As [`t_matrices`] but with per-entry standard errors.
pub fn t_matrices_detailed(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    i: usize,
    j: usize,
    mc: &McConfig,
) -> Result<(MatrixEstimate, MatrixEstimate)> {
    validate_system(ch, pre, tables)?;
    let draws = t_pair_draws(ch, pre, tables, noise, i, j, mc)?;
    let (rows, cols) = (ch.n_r[i], tables[j].n_t);
    let t1: Vec<CMatrix> = draws.iter().map(|(a, _)| a.clone()).collect();
    let t2: Vec<CMatrix> = draws.iter().map(|(_, b)| b.clone()).collect();
    Ok((
        estimate_from_draws(&t1, rows, cols),
        estimate_from_draws(&t2, rows, cols),
    ))
}

fn gradient_draws_for_user(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    w: &Weights,
    k: usize,
    mc: &McConfig,
) -> Result<Vec<CMatrix>> {
    let n_t = ch.n_t[k];
    let scale = c64(LOG2_E / noise.sigma2, 0.0);
    let mut per_draw = vec![CMatrix::zeros(n_t, n_t); mc.samples];
    for i in 0..ch.k {
        let mu = w.mu()[i];
        if mu == 0.0 {
            continue;
        }
        let h_ik_adj = ch.h(i, k).adjoint();
        let draws = t_pair_draws(ch, pre, tables, noise, i, k, mc)?;
        for (acc, (t1, t2)) in per_draw.iter_mut().zip(&draws) {
            // T2 enters only for i != k; it is identically zero when i == k.
            *acc += (&h_ik_adj * (t1 - t2)) * (scale * c64(mu, 0.0));
        }
    }
    Ok(per_draw)
}

/// Finite-alphabet WSR gradient with respect to user `k`'s precoder:
/// `(log2 e / sigma^2) (sum_i mu_i H_ik^H T1_ik - sum_{i != k} mu_i H_ik^H T2_ik)`.
pub fn finite_wsr_gradient(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    w: &Weights,
    k: usize,
    mc: &McConfig,
) -> Result<CMatrix> {
    validate_system(ch, pre, tables)?;
    let draws = gradient_draws_for_user(ch, pre, tables, noise, w, k, mc)?;
    Ok(estimate_from_draws(&draws, ch.n_t[k], ch.n_t[k]).value)
}

/// Gradients for every user, with per-entry standard errors.
pub fn finite_wsr_gradient_report(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    w: &Weights,
    mc: &McConfig,
) -> Result<GradientReport> {
    validate_system(ch, pre, tables)?;
    let mut grad = Vec::with_capacity(ch.k);
    let mut stderr = Vec::with_capacity(ch.k);
    for k in 0..ch.k {
        let draws = gradient_draws_for_user(ch, pre, tables, noise, w, k, mc)?;
        let est = estimate_from_draws(&draws, ch.n_t[k], ch.n_t[k]);
        grad.push(est.value);
        stderr.push(est.stderr);
    }
    Ok(GradientReport {
        grad,
        stderr,
        mc: *mc,
    })
}

/// Exact Gaussian-input WSR gradient with respect to user `k`'s precoder,
/// evaluated with Hermitian solves.
pub fn gaussian_wsr_gradient(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    noise: &NoiseSpec,
    w: &Weights,
    k: usize,
) -> Result<CMatrix> {
    let n_t = ch.n_t[k];
    let mut out = CMatrix::zeros(n_t, n_t);
    for j in 0..ch.k {
        let mu = w.mu()[j];
        if mu == 0.0 {
            continue;
        }
        let n = ch.n_r[j];
        let h_jk = ch.h(j, k);
        let hg_k = h_jk * &pre.g[k];
        let all = noise_plus_gram(
            noise.sigma2,
            n,
            (0..ch.k).map(|i| gram(&(ch.h(j, i) * &pre.g[i]))),
        );
        out += h_jk.adjoint() * solve_hpd(&all, &hg_k)? * c64(mu, 0.0);
        if j != k {
            let interf = noise_plus_gram(
                noise.sigma2,
                n,
                (0..ch.k)
                    .filter(|&i| i != j)
                    .map(|i| gram(&(ch.h(j, i) * &pre.g[i]))),
            );
            out -= h_jk.adjoint() * solve_hpd(&interf, &hg_k)? * c64(mu, 0.0);
        }
    }
    Ok(out * c64(LOG2_E, 0.0))
}

/// KKT diagnostics computed from explicit per-user gradients.
pub fn kkt_from_gradients(pre: &PrecoderSet, grads: &[CMatrix]) -> KktReport {
    let k = pre.k();
    let mut kappa = Vec::with_capacity(k);
    let mut stationarity = Vec::with_capacity(k);
    let mut slackness = Vec::with_capacity(k);
    let mut zero_precoder = Vec::with_capacity(k);
    for j in 0..k {
        let g = &pre.g[j];
        let tr_gg = frob_sq(g);
        let is_zero = tr_gg < 1e-300;
        let kj = if is_zero {
            0.0
        } else {
            let align: f64 = g
                .iter()
                .zip(grads[j].iter())
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            (align / tr_gg).max(0.0)
        };
        let resid = frob_sq(&(&grads[j] - g * c64(kj, 0.0))).sqrt();
        kappa.push(kj);
        stationarity.push(resid);
        slackness.push((kj * (tr_gg - pre.p[j])).abs());
        zero_precoder.push(is_zero);
    }
    KktReport {
        kappa,
        stationarity,
        slackness,
        zero_precoder,
    }
}

/// KKT diagnostics of the finite-alphabet WSR at the given precoders.
pub fn kkt_residual(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    w: &Weights,
    mc: &McConfig,
) -> Result<KktReport> {
    let report = finite_wsr_gradient_report(ch, pre, tables, noise, w, mc)?;
    Ok(kkt_from_gradients(pre, &report.grad))
}

/// Central-difference gradient of a real objective over the real and
/// imaginary parts of each entry, returned in the same `d/dG*` convention as
/// the analytic gradients. The step per entry is `step * (1 + |entry|)`; the
/// objective must be deterministic (frozen noise draws) for this to mean
/// anything.
pub fn finite_difference_gradient<F>(mut f: F, g0: &CMatrix, step: f64) -> Result<CMatrix>
where
    F: FnMut(&CMatrix) -> Result<f64>,
{
    let mut out = CMatrix::zeros(g0.nrows(), g0.ncols());
    for r in 0..g0.nrows() {
        for c in 0..g0.ncols() {
            let h = step * (1.0 + g0[(r, c)].norm());
            let mut gp = g0.clone();
            let mut gm = g0.clone();
            gp[(r, c)] += c64(h, 0.0);
            gm[(r, c)] -= c64(h, 0.0);
            let d_re = (f(&gp)? - f(&gm)?) / (2.0 * h);
            let mut gp = g0.clone();
            let mut gm = g0.clone();
            gp[(r, c)] += c64(0.0, h);
            gm[(r, c)] -= c64(0.0, h);
            let d_im = (f(&gp)? - f(&gm)?) / (2.0 * h);
            out[(r, c)] = c64(d_re / 2.0, d_im / 2.0);
        }
    }
    Ok(out)
}

/// Relative Frobenius distance, used by the gradient validators.
pub fn rel_frob_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let denom = frob_sq(b).sqrt().max(1e-300);
    frob_sq(&(a - b)).sqrt() / denom
}
