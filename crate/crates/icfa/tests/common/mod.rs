//! Shared test helpers: an independent numerical-integration oracle for
//! constellation-constrained mutual information, and fixture shorthands.
//!
//! The oracle never touches the library's enumeration kernels: it evaluates
//! the defining noise expectation by trapezoid quadrature over the complex
//! noise plane (per receive dimension), with Gaussian weights normalized on
//! the grid.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use icfa::channel::ChannelSet;
use icfa::constellation::{make_constellation, product_space, Scheme, SymbolTable};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Gaussian-weighted 1-D trapezoid nodes for N(0, s^2): (point, weight),
/// weights normalized to sum to 1.
fn gauss_grid(s: f64, half_width: f64, step: f64) -> Vec<(f64, f64)> {
    let n = (half_width / step).ceil() as i64;
    let mut nodes = Vec::with_capacity((2 * n + 1) as usize);
    let mut total = 0.0;
    for i in -n..=n {
        let x = i as f64 * step * s;
        let w = (-x * x / (2.0 * s * s)).exp();
        total += w;
        nodes.push((x, w));
    }
    for node in &mut nodes {
        node.1 /= total;
    }
    nodes
}

/// Constellation-constrained mutual information (bits) of the scalar
/// complex AWGN channel y = g x + n, x uniform over `points`,
/// n ~ CN(0, sigma2), by 2-D trapezoid quadrature.
pub fn scalar_awgn_mi_oracle(points: &[Complex64], g: Complex64, sigma2: f64) -> f64 {
    let q = points.len();
    let s = (sigma2 / 2.0).sqrt();
    let grid = gauss_grid(s, 8.0, 0.25);
    let inv = 1.0 / sigma2;
    let mut expect = 0.0;
    for m in 0..q {
        for (a, wa) in &grid {
            for (b, wb) in &grid {
                let noise = c64(*a, *b);
                let mut sum = 0.0;
                for n in 0..q {
                    let d = g * (points[m] - points[n]);
                    let e = -(d.norm_sqr() + 2.0 * (d.re * noise.re + d.im * noise.im)) * inv;
                    sum += e.exp();
                }
                expect += wa * wb * sum.log2();
            }
        }
    }
    (q as f64).log2() - expect / q as f64
}

/// Single-user MIMO constellation-constrained mutual information (bits) for
/// y = H G x + n over a 2-receive-antenna channel, by 4-D trapezoid
/// quadrature over the noise.
pub fn mimo2_single_user_mi_oracle(
    h: &CMatrix,
    g: &CMatrix,
    table: &SymbolTable,
    sigma2: f64,
) -> f64 {
    assert_eq!(h.nrows(), 2);
    let m = table.size();
    let imgs: Vec<CVector> = table.vectors.iter().map(|x| h * g * x).collect();
    let s = (sigma2 / 2.0).sqrt();
    let grid = gauss_grid(s, 6.0, 0.5);
    let inv = 1.0 / sigma2;
    let mut expect = 0.0;
    for p in 0..m {
        for (a0, w0) in &grid {
            for (b0, w1) in &grid {
                for (a1, w2) in &grid {
                    for (b1, w3) in &grid {
                        let n0 = c64(*a0, *b0);
                        let n1 = c64(*a1, *b1);
                        let mut sum = 0.0;
                        for r in 0..m {
                            let d0 = imgs[p][0] - imgs[r][0];
                            let d1 = imgs[p][1] - imgs[r][1];
                            let e = -(d0.norm_sqr()
                                + d1.norm_sqr()
                                + 2.0 * (d0.re * n0.re + d0.im * n0.im)
                                + 2.0 * (d1.re * n1.re + d1.im * n1.im))
                                * inv;
                            sum += e.exp();
                        }
                        expect += w0 * w1 * w2 * w3 * sum.log2();
                    }
                }
            }
        }
    }
    (m as f64).log2() - expect / m as f64
}

/// Symbol tables for one modulation on every user of a channel set.
pub fn tables_for(ch: &ChannelSet, scheme: Scheme, order: usize) -> Vec<SymbolTable> {
    let c = make_constellation(scheme, order).unwrap();
    ch.n_t
        .iter()
        .map(|&nt| product_space(&c, nt).unwrap())
        .collect()
}

/// A 1x1 single-user system with unit channel and precoder sqrt(p).
pub fn scalar_system(scheme: Scheme, order: usize, p: f64) -> (ChannelSet, icfa::PrecoderSet, Vec<SymbolTable>) {
    let ch = ChannelSet::new(vec![vec![CMatrix::identity(1, 1)]]).unwrap();
    let pre = icfa::PrecoderSet::new(
        vec![CMatrix::identity(1, 1) * c64(p.sqrt(), 0.0)],
        vec![p],
    )
    .unwrap();
    let c = make_constellation(scheme, order).unwrap();
    let tables = vec![product_space(&c, 1).unwrap()];
    (ch, pre, tables)
}

/// A seeded random normalized 2-user 2x2 channel.
pub fn random_2user_channel(seed: u64) -> ChannelSet {
    let draws = icfa::mc::tagged_gaussians(seed, 0xc4a, 16);
    let mut h = Vec::new();
    let mut idx = 0;
    for _ in 0..2 {
        let mut row = Vec::new();
        for _ in 0..2 {
            let m = CMatrix::from_fn(2, 2, |r, c| draws[idx + 2 * r + c]);
            idx += 4;
            row.push(icfa::channel::normalize_channel(&m).unwrap());
        }
        h.push(row);
    }
    ChannelSet::new(h).unwrap()
}

/// Worst relative Frobenius error of the Gaussian-input WSR gradient
/// against central finite differences, over all users.
pub fn gaussian_fd_worst(
    ch: &ChannelSet,
    pre: &icfa::PrecoderSet,
    w: &icfa::Weights,
    step: f64,
) -> f64 {
    use icfa::gradient::{finite_difference_gradient, gaussian_wsr_gradient, rel_frob_error};
    let noise = icfa::NoiseSpec::unit();
    let mut worst = 0.0f64;
    for k in 0..ch.k {
        let analytic = gaussian_wsr_gradient(ch, pre, &noise, w, k).unwrap();
        let fd = finite_difference_gradient(
            |g| {
                let mut cand = pre.clone();
                cand.g[k] = g.clone();
                Ok(icfa::rate::gaussian_wsr(ch, &cand, &noise, w)?.value)
            },
            &pre.g[k],
            step,
        )
        .unwrap();
        worst = worst.max(rel_frob_error(&fd, &analytic));
    }
    worst
}

/// Worst relative Frobenius error of the finite-alphabet WSR gradient
/// against central finite differences under frozen noise draws.
pub fn finite_fd_worst(
    ch: &ChannelSet,
    pre: &icfa::PrecoderSet,
    tables: &[SymbolTable],
    w: &icfa::Weights,
    mc: &icfa::McConfig,
    step: f64,
) -> f64 {
    use icfa::gradient::{finite_difference_gradient, finite_wsr_gradient, rel_frob_error};
    let noise = icfa::NoiseSpec::unit();
    let mut worst = 0.0f64;
    for k in 0..ch.k {
        let analytic = finite_wsr_gradient(ch, pre, tables, &noise, w, k, mc).unwrap();
        let fd = finite_difference_gradient(
            |g| {
                let mut cand = pre.clone();
                cand.g[k] = g.clone();
                Ok(icfa::rate::finite_wsr(ch, &cand, tables, &noise, w, mc)?.value)
            },
            &pre.g[k],
            step,
        )
        .unwrap();
        worst = worst.max(rel_frob_error(&fd, &analytic));
    }
    worst
}
