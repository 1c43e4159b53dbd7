//! Experiment harness: SNR sweeps, optimization runs, gradient checks and a
//! detector demo, all driven by [`ExperimentConfig`].
//!
//! Output files are byte-reproducible for a fixed config and seed: rows are
//! sorted before writing and the `wall_ms` column is kept at zero, with the
//! measured timings logged to stderr instead.

use std::fmt::Write as _;
use std::time::Instant;

use crate::channel::{power_from_snr_db, ChannelSet, NoiseSpec, PrecoderSet};
use crate::config::{ExperimentConfig, Method};
use crate::constellation::SymbolTable;
use crate::designs::{high_snr_design, ia_rate_loss, low_snr_design};
use crate::detector::{map_llr, whiten, BitMapping, LlrBase, LlrVector};
use crate::error::{Error, Result};
use crate::gradient::{
    finite_difference_gradient, finite_wsr_gradient, gaussian_wsr_gradient, rel_frob_error,
};
use crate::linalg::{c64, frob_sq, CMatrix, CVector};
use crate::mc::{derive_seed, standard_noise, McConfig};
use crate::optimizer::{
    multistart, FiniteWsrObjective, GaussianWsrObjective, OptimizerTrace,
};
use crate::rate::{finite_rate, finite_wsr, Weights};

/// One output row of a sweep: a per-user rate or the "sum" aggregate.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub snr_db: f64,
    /// 1-based user index; `None` renders as "sum".
    pub user: Option<usize>,
    pub method: Method,
    pub rate_bits: f64,
    pub stderr: f64,
    /// Kept at zero in output files so re-runs are byte-identical; the
    /// measured wall time is logged to stderr.
    pub wall_ms: u64,
}

/// CSV schema: `snr_db,user,method,rate_bits,stderr,wall_ms`.
pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("snr_db,user,method,rate_bits,stderr,wall_ms\n");
    for r in rows {
        let user = match r.user {
            Some(u) => u.to_string(),
            None => "sum".to_string(),
        };
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{}",
            r.snr_db,
            user,
            r.method.name(),
            r.rate_bits,
            r.stderr,
            r.wall_ms
        )
        .unwrap();
    }
    out
}

const OPT_SEED_TAG: u64 = 0xa000;
const EVAL_SEED_TAG: u64 = 0xe000;

/// Builds the method's precoders for one SNR point. Not used for ia-loss.
fn precoders_for_point(
    cfg: &ExperimentConfig,
    ch: &ChannelSet,
    tables: &[SymbolTable],
    weights: &Weights,
    p: &[f64],
    point: usize,
) -> Result<PrecoderSet> {
    let noise = NoiseSpec::unit();
    match cfg.method {
        Method::Identity => Ok(PrecoderSet::scaled_identity(ch, p)),
        Method::LowSnr => low_snr_design(ch, p),
        Method::HighSnr => Ok(high_snr_design(ch, tables, p, None)?.precoders),
        Method::FiniteOpt => {
            let obj = FiniteWsrObjective {
                ch,
                tables,
                noise,
                weights: weights.clone(),
                samples: cfg.samples,
            };
            let mut opts = cfg.optimizer_options();
            opts.seed = derive_seed(cfg.seed, OPT_SEED_TAG + point as u64);
            Ok(multistart(&obj, ch, p, &opts)?.0)
        }
        Method::GaussianOpt => {
            let obj = GaussianWsrObjective {
                ch,
                noise,
                weights: weights.clone(),
            };
            let mut opts = cfg.optimizer_options();
            opts.seed = derive_seed(cfg.seed, OPT_SEED_TAG + point as u64);
            Ok(multistart(&obj, ch, p, &opts)?.0)
        }
        Method::IaLoss => Err(Error::InvalidArgument(
            "ia-loss has no precoders; handled separately".into(),
        )),
    }
}

fn ia_rows(cfg: &ExperimentConfig, ch: &ChannelSet, tables: &[SymbolTable]) -> Result<Vec<SweepRow>> {
    let n_t = ch.n_t[0];
    let n_r = ch.n_r[0];
    if ch.n_t.iter().any(|&v| v != n_t) || ch.n_r.iter().any(|&v| v != n_r) {
        return Err(Error::InvalidArgument(
            "ia-loss accounting requires equal antenna counts across users".into(),
        ));
    }
    let m: Vec<usize> = tables.iter().map(|t| t.size()).collect();
    let acc = ia_rate_loss(ch.k, n_t, n_r, &m)?;
    let scale = acc.eta as f64 / (acc.eta + 1) as f64;
    let mut rows = Vec::new();
    for &snr in &cfg.snr_db {
        for (j, &mj) in m.iter().enumerate() {
            rows.push(SweepRow {
                snr_db: snr,
                user: Some(j + 1),
                method: Method::IaLoss,
                rate_bits: scale * (mj as f64).log2(),
                stderr: 0.0,
                wall_ms: 0,
            });
        }
        rows.push(SweepRow {
            snr_db: snr,
            user: None,
            method: Method::IaLoss,
            rate_bits: acc.limit,
            stderr: 0.0,
            wall_ms: 0,
        });
    }
    Ok(rows)
}

/// Runs the configured sweep and returns the CSV text.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<String> {
    let ch = cfg.load_channel()?;
    let tables = cfg.tables(&ch)?;
    let weights = cfg.weights_for(ch.k)?;
    let noise = NoiseSpec::unit();

    let mut rows = if cfg.method == Method::IaLoss {
        ia_rows(cfg, &ch, &tables)?
    } else {
        let mut rows = Vec::new();
        for (point, &snr) in cfg.snr_db.iter().enumerate() {
            let started = Instant::now();
            let p = vec![power_from_snr_db(snr); ch.k];
            let pre = precoders_for_point(cfg, &ch, &tables, &weights, &p, point)?;
            let mc = McConfig::new(cfg.samples, derive_seed(cfg.seed, EVAL_SEED_TAG + point as u64));
            let mut sum = 0.0;
            let mut var = 0.0;
            for j in 0..ch.k {
                let r = finite_rate(&ch, &pre, &tables, &noise, j, &mc)?;
                sum += r.value;
                var += r.stderr * r.stderr;
                rows.push(SweepRow {
                    snr_db: snr,
                    user: Some(j + 1),
                    method: cfg.method,
                    rate_bits: r.value,
                    stderr: r.stderr,
                    wall_ms: 0,
                });
            }
            rows.push(SweepRow {
                snr_db: snr,
                user: None,
                method: cfg.method,
                rate_bits: sum,
                stderr: var.sqrt(),
                wall_ms: 0,
            });
            eprintln!(
                "# sweep point snr={snr} dB done in {} ms",
                started.elapsed().as_millis()
            );
        }
        rows
    };

    rows.sort_by(|a, b| {
        a.snr_db
            .partial_cmp(&b.snr_db)
            .unwrap()
            .then_with(|| a.user.unwrap_or(usize::MAX).cmp(&b.user.unwrap_or(usize::MAX)))
    });
    Ok(render_csv(&rows))
}

fn format_matrix(label: &str, m: &CMatrix) -> String {
    let mut out = format!("{label} =\n");
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|c| format!("{:9.4}{:+.4}j", m[(r, c)].re, m[(r, c)].im))
            .collect();
        writeln!(out, "  {}", row.join("  ")).unwrap();
    }
    out
}

/// Runs the optimizer at every configured SNR point; returns the precoder
/// report and a `snr_db,sweep,wsr,stderr` trace CSV.
pub fn run_optimize(cfg: &ExperimentConfig) -> Result<(String, String)> {
    let ch = cfg.load_channel()?;
    let tables = cfg.tables(&ch)?;
    let weights = cfg.weights_for(ch.k)?;
    let noise = NoiseSpec::unit();
    let mut report = String::new();
    let mut trace_csv = String::from("snr_db,sweep,wsr,stderr\n");

    for (point, &snr) in cfg.snr_db.iter().enumerate() {
        let started = Instant::now();
        let p = vec![power_from_snr_db(snr); ch.k];
        let mut opts = cfg.optimizer_options();
        opts.seed = derive_seed(cfg.seed, OPT_SEED_TAG + point as u64);
        let (pre, traces): (PrecoderSet, Vec<OptimizerTrace>) = match cfg.method {
            Method::GaussianOpt => {
                let obj = GaussianWsrObjective {
                    ch: &ch,
                    noise,
                    weights: weights.clone(),
                };
                multistart(&obj, &ch, &p, &opts)?
            }
            Method::FiniteOpt => {
                let obj = FiniteWsrObjective {
                    ch: &ch,
                    tables: &tables,
                    noise,
                    weights: weights.clone(),
                    samples: cfg.samples,
                };
                multistart(&obj, &ch, &p, &opts)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "optimize expects method finite-opt or gaussian-opt, got {}",
                    other.name()
                )))
            }
        };

        let best = traces
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.final_wsr.value.partial_cmp(&b.final_wsr.value).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        writeln!(report, "# snr {snr} dB, method {}, seed {}", cfg.method.name(), cfg.seed).unwrap();
        for (j, g) in pre.g.iter().enumerate() {
            report.push_str(&format_matrix(&format!("G_{}", j + 1), g));
            writeln!(
                report,
                "tr(G_{0} G_{0}^H) = {1:.4}  (P_{0} = {2:.4})",
                j + 1,
                frob_sq(g),
                p[j]
            )
            .unwrap();
        }
        let final_wsr = traces[best].final_wsr;
        writeln!(
            report,
            "WSR = {:.6} (stderr {:.6}), restarts = {}, best = {}, sweeps = {}, converged = {}\n",
            final_wsr.value,
            final_wsr.stderr,
            traces.len(),
            best + 1,
            traces[best].sweeps.len(),
            traces[best].converged
        )
        .unwrap();
        for rec in &traces[best].sweeps {
            writeln!(
                trace_csv,
                "{},{},{:.6},{:.6}",
                snr,
                rec.sweep + 1,
                rec.wsr,
                rec.stderr
            )
            .unwrap();
        }
        eprintln!(
            "# optimize point snr={snr} dB done in {} ms",
            started.elapsed().as_millis()
        );
    }
    Ok((report, trace_csv))
}

/// Finite-difference validation of both gradients on the configured
/// instance plus a built-in scalar BPSK case. Returns the report and
/// whether every check passed.
pub fn run_gradcheck(cfg: &ExperimentConfig) -> Result<(String, bool)> {
    const GAUSSIAN_TOL: f64 = 1e-6;
    const FINITE_TOL: f64 = 1e-3;
    const FD_STEP: f64 = 1e-4;

    let ch = cfg.load_channel()?;
    let tables = cfg.tables(&ch)?;
    let weights = cfg.weights_for(ch.k)?;
    let noise = NoiseSpec::unit();
    let snr = cfg.snr_db[0];
    let p = vec![power_from_snr_db(snr); ch.k];
    let pre = PrecoderSet::scaled_identity(&ch, &p);
    let mc = McConfig::new(cfg.samples, cfg.seed);

    let mut report = String::new();
    let mut ok = true;
    let mut check = |name: &str, err: f64, tol: f64, report: &mut String| {
        let pass = err < tol;
        ok &= pass;
        writeln!(
            report,
            "{name}: max rel err {err:.3e} (tolerance {tol:.0e}) {}",
            if pass { "PASS" } else { "FAIL" }
        )
        .unwrap();
    };

    // Gaussian gradient on the configured instance.
    let mut worst = 0.0f64;
    for k in 0..ch.k {
        let analytic = gaussian_wsr_gradient(&ch, &pre, &noise, &weights, k)?;
        let fd = finite_difference_gradient(
            |g| {
                let mut cand = pre.clone();
                cand.g[k] = g.clone();
                Ok(crate::rate::gaussian_wsr(&ch, &cand, &noise, &weights)?.value)
            },
            &pre.g[k],
            FD_STEP,
        )?;
        worst = worst.max(rel_frob_error(&fd, &analytic));
    }
    check("gaussian gradient vs central differences", worst, GAUSSIAN_TOL, &mut report);

    // Built-in scalar BPSK case.
    {
        let ch1 = ChannelSet::new(vec![vec![CMatrix::identity(1, 1)]])?;
        let c = crate::constellation::make_constellation(crate::constellation::Scheme::Bpsk, 2)?;
        let t1 = vec![crate::constellation::product_space(&c, 1)?];
        let p1 = PrecoderSet::new(vec![CMatrix::identity(1, 1)], vec![1.0])?;
        let w1 = Weights::uniform(1);
        let mc1 = McConfig::new(cfg.samples.min(500), cfg.seed);
        let analytic = finite_wsr_gradient(&ch1, &p1, &t1, &noise, &w1, 0, &mc1)?;
        let fd = finite_difference_gradient(
            |g| {
                let mut cand = p1.clone();
                cand.g[0] = g.clone();
                Ok(finite_wsr(&ch1, &cand, &t1, &noise, &w1, &mc1)?.value)
            },
            &p1.g[0],
            FD_STEP,
        )?;
        check(
            "finite-alphabet gradient, 1x1 bpsk vs central differences",
            rel_frob_error(&fd, &analytic),
            FINITE_TOL,
            &mut report,
        );
    }

    // Finite-alphabet gradient on the configured instance (frozen draws).
    let mut worst = 0.0f64;
    for k in 0..ch.k {
        let analytic = finite_wsr_gradient(&ch, &pre, &tables, &noise, &weights, k, &mc)?;
        let fd = finite_difference_gradient(
            |g| {
                let mut cand = pre.clone();
                cand.g[k] = g.clone();
                Ok(finite_wsr(&ch, &cand, &tables, &noise, &weights, &mc)?.value)
            },
            &pre.g[k],
            FD_STEP,
        )?;
        worst = worst.max(rel_frob_error(&fd, &analytic));
    }
    check(
        "finite-alphabet gradient vs central differences",
        worst,
        FINITE_TOL,
        &mut report,
    );

    Ok((report, ok))
}

/// Transmits one random symbol vector per user over the configured channel
/// and reports the MAP detector's extrinsic LLRs next to the true bits.
pub fn detect_demo(cfg: &ExperimentConfig) -> Result<String> {
    let ch = cfg.load_channel()?;
    let tables = cfg.tables(&ch)?;
    let cons = cfg.constellations(ch.k)?;
    let weights = cfg.weights_for(ch.k)?;
    let snr = cfg.snr_db[0];
    let p = vec![power_from_snr_db(snr); ch.k];
    let noise = NoiseSpec::unit();
    let pre = match cfg.method {
        Method::IaLoss => PrecoderSet::scaled_identity(&ch, &p),
        _ => precoders_for_point(cfg, &ch, &tables, &weights, &p, 0)?,
    };

    let mappings: Vec<BitMapping> = cons
        .iter()
        .zip(&ch.n_t)
        .map(|(c, &nt)| BitMapping::new(c, nt))
        .collect::<Result<_>>()?;

    // deterministic "random" bits per user
    let mut bits: Vec<Vec<i8>> = Vec::new();
    for j in 0..ch.k {
        let n = mappings[j].bits();
        let draws = crate::mc::tagged_gaussians(cfg.seed, 0xb17 + j as u64, n);
        bits.push(draws.iter().map(|z| if z.re >= 0.0 { 1 } else { -1 }).collect());
    }
    let symbols: Vec<&CVector> = (0..ch.k)
        .map(|j| {
            let idx = mappings[j].map_index(&bits[j]).expect("sized above");
            &tables[j].vectors[idx]
        })
        .collect();

    let mut out = String::new();
    writeln!(out, "# detector demo: snr {snr} dB, method {}, seed {}", cfg.method.name(), cfg.seed).unwrap();
    for j in 0..ch.k {
        let mut y = CVector::zeros(ch.n_r[j]);
        for (i, sym) in symbols.iter().enumerate() {
            y += ch.h(j, i) * &pre.g[i] * *sym;
        }
        let z = standard_noise(cfg.seed, j, 0, ch.n_r[j]);
        let y = y + z * c64(noise.sigma2.sqrt(), 0.0);
        let llr = map_llr(
            &y,
            &ch,
            &pre,
            &tables,
            &noise,
            j,
            &mappings[j],
            &LlrVector::zeros(mappings[j].bits()),
            LlrBase::Natural,
        )?;
        let decisions: Vec<i8> = llr.values.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect();
        let correct = decisions
            .iter()
            .zip(&bits[j])
            .filter(|(a, b)| a == b)
            .count();
        writeln!(out, "user {}:", j + 1).unwrap();
        writeln!(out, "  tx bits   {:?}", bits[j]).unwrap();
        writeln!(
            out,
            "  llr       [{}]",
            llr.values
                .iter()
                .map(|v| format!("{v:+.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        )
        .unwrap();
        writeln!(out, "  decisions {:?}  ({correct}/{} correct)", decisions, bits[j].len()).unwrap();
        let (_, eq) = whiten(&y, &ch, &pre, &noise, j)?;
        writeln!(out, "{}", format_matrix("  whitened own channel", &eq)).unwrap();
    }
    Ok(out)
}

/// Report for the closed-form low-SNR design at the first SNR point.
pub fn design_low_report(cfg: &ExperimentConfig) -> Result<String> {
    let ch = cfg.load_channel()?;
    let snr = cfg.snr_db[0];
    let p = vec![power_from_snr_db(snr); ch.k];
    let pre = low_snr_design(&ch, &p)?;
    let noise = NoiseSpec::unit();
    let mut out = format!("# low-snr design, snr {snr} dB\n");
    for (j, g) in pre.g.iter().enumerate() {
        out.push_str(&format_matrix(&format!("G_{}", j + 1), g));
        writeln!(
            out,
            "tr = {:.4}, first-order rate = {:.6} b/s/Hz",
            frob_sq(g),
            crate::rate::first_order_rate(&ch, &pre, &noise, j)?.value
        )
        .unwrap();
    }
    Ok(out)
}

/// Report for the high-SNR power-allocation design at the first SNR point.
pub fn design_high_report(cfg: &ExperimentConfig) -> Result<String> {
    let ch = cfg.load_channel()?;
    let tables = cfg.tables(&ch)?;
    let snr = cfg.snr_db[0];
    let p = vec![power_from_snr_db(snr); ch.k];
    let design = high_snr_design(&ch, &tables, &p, None)?;
    let mut out = format!("# high-snr design, snr {snr} dB\n");
    writeln!(out, "cascade order (strongest first): {:?}", design.order.iter().map(|u| u + 1).collect::<Vec<_>>()).unwrap();
    writeln!(out, "worst-case joint-difference norm = {:.6}", design.min_joint_distance).unwrap();
    for j in 0..ch.k {
        writeln!(
            out,
            "user {}: epsilon = {:.6} (certificate {:.6}), omega_min = {:.6}, omega_max = {:.6}, distinct = {}",
            j + 1,
            design.epsilon[j],
            design.cascade_epsilon[j],
            design.omega.min[j],
            design.omega.max[j],
            design.omega.distinct[j]
        )
        .unwrap();
    }
    for (j, g) in design.precoders.g.iter().enumerate() {
        out.push_str(&format_matrix(&format!("G_{}", j + 1), g));
    }
    Ok(out)
}

/// Report for the IA symbol-extension accounting.
pub fn ia_loss_report(cfg: &ExperimentConfig) -> Result<String> {
    let ch = cfg.load_channel()?;
    let tables = cfg.tables(&ch)?;
    let n_t = ch.n_t[0];
    let n_r = ch.n_r[0];
    if ch.n_t.iter().any(|&v| v != n_t) || ch.n_r.iter().any(|&v| v != n_r) {
        return Err(Error::InvalidArgument(
            "ia-loss accounting requires equal antenna counts across users".into(),
        ));
    }
    let m: Vec<usize> = tables.iter().map(|t| t.size()).collect();
    let acc = ia_rate_loss(ch.k, n_t, n_r, &m)?;
    let mut out = String::new();
    writeln!(out, "# ia symbol-extension accounting").unwrap();
    writeln!(out, "eta = {}, rho = {}, streams = {}", acc.eta, acc.rho, acc.q.len()).unwrap();
    writeln!(out, "per-stream alphabet sizes: {:?}", acc.q).unwrap();
    writeln!(out, "limiting average sum-rate = {:.6} b/s/Hz", acc.limit).unwrap();
    writeln!(out, "saturation sum-rate (full space) = {:.6} b/s/Hz",
        m.iter().map(|&mj| (mj as f64).log2()).sum::<f64>()).unwrap();
    for (i, r) in acc.head.iter().enumerate() {
        writeln!(
            out,
            "n = {}: extension {:.3e} symbols, avg rate {r:.6}",
            i + 1,
            acc.extension_length(i as u64 + 1)
        )
        .unwrap();
    }
    writeln!(out, "n = 64: avg rate {:.6}", acc.average_rate(64)).unwrap();
    Ok(out)
}
