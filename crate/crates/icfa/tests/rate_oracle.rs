//! Single-user rate estimates against the independent quadrature oracle.
//!
//! Oracle values below were computed with `scalar_awgn_mi_oracle` (trapezoid
//! quadrature, half-width 8 sigma, step sigma/4) and are frozen to guard the
//! oracle itself against regressions.

mod common;

use common::*;
use icfa::channel::{power_from_snr_db, ChannelSet, NoiseSpec};
use icfa::constellation::Scheme;
use icfa::rate::finite_rate;
use icfa::{McConfig, PrecoderSet};

const BPSK_ORACLE: [(f64, f64); 3] = [
    (-5.0, 0.349514),
    (0.0, 0.721452),
    (5.0, 0.976177),
];
const QPSK_ORACLE: [(f64, f64); 3] = [
    (-5.0, 0.395463),
    (0.0, 0.971888),
    (5.0, 1.718388),
];

#[test]
fn oracle_matches_frozen_values() {
    for (scheme, order, frozen) in [
        (Scheme::Bpsk, 2usize, &BPSK_ORACLE),
        (Scheme::Qpsk, 4, &QPSK_ORACLE),
    ] {
        let c = icfa::constellation::make_constellation(scheme, order).unwrap();
        for &(snr, expected) in frozen.iter() {
            let p = power_from_snr_db(snr);
            let mi = scalar_awgn_mi_oracle(&c.points, c64(p.sqrt(), 0.0), 1.0);
            assert!(
                (mi - expected).abs() < 1e-5,
                "oracle drifted: {scheme:?} snr {snr}: {mi} vs {expected}"
            );
        }
    }
}

#[test]
fn oracle_is_grid_converged() {
    // halving the step / widening the window moves the BPSK 0 dB value by
    // less than 1e-7
    let c = icfa::constellation::make_constellation(Scheme::Bpsk, 2).unwrap();
    let coarse = scalar_awgn_mi_oracle(&c.points, c64(1.0, 0.0), 1.0);
    let fine = {
        // inline re-implementation with a finer grid
        let q = c.points.len();
        let s = (0.5f64).sqrt();
        let step = 0.125 * s;
        let n = (10.0 / 0.125) as i64;
        let mut grid = Vec::new();
        let mut total = 0.0;
        for i in -n..=n {
            let x = i as f64 * step;
            let w = (-x * x / (2.0 * s * s)).exp();
            total += w;
            grid.push((x, w));
        }
        for g in &mut grid {
            g.1 /= total;
        }
        let mut expect = 0.0;
        for m in 0..q {
            for (a, wa) in &grid {
                for (b, wb) in &grid {
                    let mut sum = 0.0;
                    for nn in 0..q {
                        let d = c.points[m] - c.points[nn];
                        let e = -(d.norm_sqr() + 2.0 * (d.re * a + d.im * b));
                        sum += e.exp();
                    }
                    expect += wa * wb * sum.log2();
                }
            }
        }
        (q as f64).log2() - expect / q as f64
    };
    assert!((coarse - fine).abs() < 1e-7, "{coarse} vs {fine}");
}

#[test]
fn scalar_finite_rate_matches_oracle() {
    for (scheme, order, frozen) in [
        (Scheme::Bpsk, 2usize, &BPSK_ORACLE),
        (Scheme::Qpsk, 4, &QPSK_ORACLE),
    ] {
        for &(snr, oracle) in frozen.iter() {
            let p = power_from_snr_db(snr);
            let (ch, pre, tables) = scalar_system(scheme, order, p);
            let mc = McConfig::new(4000, 2024);
            let r = finite_rate(&ch, &pre, &tables, &NoiseSpec::unit(), 0, &mc).unwrap();
            assert!(
                (r.value - oracle).abs() <= 3.0 * r.stderr,
                "{scheme:?} snr {snr}: {} vs oracle {oracle} (stderr {})",
                r.value,
                r.stderr
            );
        }
    }
}

#[test]
fn mimo_2x2_single_user_matches_oracle() {
    // K = 1, 2x2 channel, identity-scaled precoder, BPSK at 0 dB
    let h = CMatrix::from_row_slice(
        2,
        2,
        &[
            c64(0.9, 0.2),
            c64(-0.3, 0.4),
            c64(0.1, -0.6),
            c64(0.7, 0.1),
        ],
    );
    let h = icfa::channel::normalize_channel(&h).unwrap();
    let ch = ChannelSet::new(vec![vec![h.clone()]]).unwrap();
    let p = power_from_snr_db(0.0);
    let pre = PrecoderSet::scaled_identity(&ch, &[p]);
    let tables = tables_for(&ch, Scheme::Bpsk, 2);
    let oracle = mimo2_single_user_mi_oracle(&h, &pre.g[0], &tables[0], 1.0);
    let mc = McConfig::new(3000, 5);
    let r = finite_rate(&ch, &pre, &tables, &NoiseSpec::unit(), 0, &mc).unwrap();
    assert!(
        (r.value - oracle).abs() <= 3.0 * r.stderr,
        "{} vs oracle {oracle} (stderr {})",
        r.value,
        r.stderr
    );
}
