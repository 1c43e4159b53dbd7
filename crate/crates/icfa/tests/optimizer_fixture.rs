//! Optimizer behavior on the fixed channel fixtures.

mod common;

use common::*;
use icfa::channel::{load_fixture, power_from_snr_db, NoiseSpec};
use icfa::constellation::Scheme;
use icfa::optimizer::{optimize_wsr, optimize_wsr_from, FiniteWsrObjective, OptimizerOptions};
use icfa::rate::Weights;

#[test]
fn fixture_trace_nondecreasing_within_noise() {
    let (ch, _) = load_fixture("paper-2user-2x2").unwrap();
    let tables = tables_for(&ch, Scheme::Bpsk, 2);
    let p = vec![power_from_snr_db(5.0); 2];
    let obj = FiniteWsrObjective {
        ch: &ch,
        tables: &tables,
        noise: NoiseSpec::unit(),
        weights: Weights::uniform(2),
        samples: 400,
    };
    let opts = OptimizerOptions {
        seed: 2,
        rel_tol: 5e-3,
        ..Default::default()
    };
    let (pre, trace) = optimize_wsr(&obj, &ch, &p, &opts).unwrap();
    assert!(pre.feasible(1e-9));
    assert!(trace.converged);
    for w in trace.sweeps.windows(2) {
        let band = 3.0 * (w[0].stderr * w[0].stderr + w[1].stderr * w[1].stderr).sqrt();
        assert!(
            w[1].wsr >= w[0].wsr - band,
            "sweep {} -> {}: {} -> {} (band {band})",
            w[0].sweep,
            w[1].sweep,
            w[0].wsr,
            w[1].wsr
        );
    }
}

#[test]
fn saturated_start_terminates_immediately() {
    let (ch, _) = load_fixture("paper-2user-2x2").unwrap();
    let tables = tables_for(&ch, Scheme::Bpsk, 2);
    let p = vec![power_from_snr_db(40.0); 2];
    let design = icfa::designs::high_snr_design(&ch, &tables, &p, None).unwrap();
    let obj = FiniteWsrObjective {
        ch: &ch,
        tables: &tables,
        noise: NoiseSpec::unit(),
        weights: Weights::uniform(2),
        samples: 300,
    };
    let opts = OptimizerOptions {
        seed: 4,
        ..Default::default()
    };
    let (_, trace) = optimize_wsr_from(&obj, design.precoders.clone(), &opts).unwrap();
    assert_eq!(trace.sweeps.len(), 1);
    assert!(trace.converged);
    // every user's update was abandoned on the flat plateau
    assert!(trace.sweeps[0].users.iter().all(|u| u.accepted_step.is_none()));
}
