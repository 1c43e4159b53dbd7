//! Interference-channel model: channel matrices, precoders with per-user
//! power budgets, the noise/SNR convention, and the fixed desk-scale
//! fixtures used throughout the tests.
//!
//! Conventions: noise variance sigma^2 = 1 and per-user power
//! P = 10^(SNR_dB / 10), so SNR = P / sigma^2.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, frob_sq, CMatrix};

/// All K^2 channel matrices of a K-user interference channel.
///
/// `h[j][i]` is the N_r_j x N_t_i response from transmitter `i` to
/// receiver `j`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub k: usize,
    pub n_t: Vec<usize>,
    pub n_r: Vec<usize>,
    h: Vec<Vec<CMatrix>>,
    pub normalized: bool,
}

impl ChannelSet {
    pub fn new(h: Vec<Vec<CMatrix>>) -> Result<Self> {
        let k = h.len();
        if k == 0 || h.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch(
                "channel grid must be K x K with K >= 1".into(),
            ));
        }
        let n_r: Vec<usize> = h.iter().map(|row| row[0].nrows()).collect();
        let n_t: Vec<usize> = (0..k).map(|i| h[0][i].ncols()).collect();
        for j in 0..k {
            for i in 0..k {
                if h[j][i].nrows() != n_r[j] || h[j][i].ncols() != n_t[i] {
                    return Err(Error::DimensionMismatch(format!(
                        "H_{}_{} is {}x{}, expected {}x{}",
                        j + 1,
                        i + 1,
                        h[j][i].nrows(),
                        h[j][i].ncols(),
                        n_r[j],
                        n_t[i]
                    )));
                }
            }
        }
        Ok(ChannelSet {
            k,
            n_t,
            n_r,
            h,
            normalized: false,
        })
    }

    #[inline]
    pub fn h(&self, rx: usize, tx: usize) -> &CMatrix {
        &self.h[rx][tx]
    }

    /// Normalizes every matrix to tr(H H^H) = N_r and sets the flag.
    pub fn normalize_all(mut self) -> Result<Self> {
        for j in 0..self.k {
            for i in 0..self.k {
                self.h[j][i] = normalize_channel(&self.h[j][i])?;
            }
        }
        self.normalized = true;
        Ok(self)
    }

    /// Checks tr(H_ji H_ji^H) = N_r_j for all pairs, to the given tolerance.
    pub fn normalization_holds(&self, tol: f64) -> bool {
        self.h.iter().enumerate().all(|(j, row)| {
            row.iter()
                .all(|m| (frob_sq(m) - self.n_r[j] as f64).abs() <= tol)
        })
    }
}

/// Per-user precoding matrices and power budgets.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub g: Vec<CMatrix>,
    pub p: Vec<f64>,
}

impl PrecoderSet {
    /// Validates tr(G_j G_j^H) <= P_j + 1e-9 for all users.
    pub fn new(g: Vec<CMatrix>, p: Vec<f64>) -> Result<Self> {
        if g.len() != p.len() {
            return Err(Error::DimensionMismatch(
                "precoder and power lists differ in length".into(),
            ));
        }
        for (j, (gj, &pj)) in g.iter().zip(&p).enumerate() {
            let tr = frob_sq(gj);
            if tr > pj + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "user {}: tr(G G^H) = {tr} exceeds budget {pj}",
                    j + 1
                )));
            }
        }
        Ok(PrecoderSet { g, p })
    }

    /// G_j = sqrt(P_j / N_t_j) I for every user (full power, no shaping).
    pub fn scaled_identity(ch: &ChannelSet, p: &[f64]) -> Self {
        let g = ch
            .n_t
            .iter()
            .zip(p)
            .map(|(&nt, &pj)| CMatrix::identity(nt, nt) * c64((pj / nt as f64).sqrt(), 0.0))
            .collect();
        PrecoderSet { g, p: p.to_vec() }
    }

    pub fn k(&self) -> usize {
        self.g.len()
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.g
            .iter()
            .zip(&self.p)
            .all(|(g, &p)| frob_sq(g) <= p + tol)
    }
}

/// Noise variance (linear). The crate-wide convention is sigma^2 = 1 with
/// the SNR absorbed into the power budgets.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub sigma2: f64,
}

impl NoiseSpec {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(NoiseSpec { sigma2 })
    }

    pub fn unit() -> Self {
        NoiseSpec { sigma2: 1.0 }
    }
}

/// Per-user power for a given SNR in dB under the sigma^2 = 1 convention.
pub fn power_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Rescales `h` so that tr(H H^H) equals its row count.
pub fn normalize_channel(h: &CMatrix) -> Result<CMatrix> {
    let tr = frob_sq(h);
    if tr <= 0.0 {
        return Err(Error::DegenerateChannel(
            "cannot normalize the zero matrix".into(),
        ));
    }
    Ok(h * c64((h.nrows() as f64 / tr).sqrt(), 0.0))
}

/// Projects `g` onto the power ball of radius sqrt(P): returns `g` unchanged
/// when tr(G G^H) <= P, otherwise sqrt(P) G / ||G||_F (trace exactly P).
pub fn project_power(g: &CMatrix, p: f64) -> CMatrix {
    let tr = frob_sq(g);
    if tr <= p {
        g.clone()
    } else {
        g * c64((p / tr).sqrt(), 0.0)
    }
}

fn mat2(rows: [[Complex64; 2]; 2]) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
}

/// Loads one of the fixed (non-fading) channel fixtures by name.
///
/// Known names: "paper-2user-2x2" and "paper-3user-2x2". The matrices are
/// returned exactly as printed, without re-normalization.
pub fn load_fixture(name: &str) -> Result<(ChannelSet, &'static str)> {
    match name {
        "paper-2user-2x2" => {
            let h11 = mat2([
                [c64(1.2813, 0.0), c64(0.1578, 0.3445)],
                [c64(0.1578, -0.3445), c64(0.2666, 0.0)],
            ]);
            let h12 = mat2([
                [c64(0.4596, 0.0), c64(0.0332, -0.5936)],
                [c64(0.0332, 0.5936), c64(1.0401, 0.0)],
            ]);
            let h21 = mat2([
                [c64(0.3523, 0.0), c64(-0.3938, 0.3207)],
                [c64(-0.3938, -0.3207), c64(1.1662, 0.0)],
            ]);
            let h22 = mat2([
                [c64(0.2483, 0.0), c64(0.3246, 0.2157)],
                [c64(0.3246, -0.2157), c64(1.2785, 0.0)],
            ]);
            let ch = ChannelSet::new(vec![vec![h11, h12], vec![h21, h22]])?;
            Ok((ch, "fixed 2-user 2x2 interference channel"))
        }
        "paper-3user-2x2" => {
            let h11 = mat2([
                [c64(-0.2279, -0.6039), c64(0.0660, 0.6264)],
                [c64(-0.8774, 0.6273), c64(0.1515, -0.0198)],
            ]);
            let h12 = mat2([
                [c64(0.1915, -0.3442), c64(-0.1092, -0.0798)],
                [c64(0.1022, 1.2773), c64(0.4246, 0.0667)],
            ]);
            let h13 = mat2([
                [c64(0.5759, 0.1583), c64(-0.1092, -0.0798)],
                [c64(0.1022, 1.2773), c64(0.4246, 0.0667)],
            ]);
            let h21 = mat2([
                [c64(-0.3382, -0.7046), c64(0.6131, -0.1955)],
                [c64(0.4195, 0.2793), c64(-0.7792, 0.3374)],
            ]);
            let h22 = mat2([
                [c64(0.4643, 0.6778), c64(0.7344, -0.0113)],
                [c64(0.4052, -0.6845), c64(0.3806, -0.0892)],
            ]);
            let h23 = mat2([
                [c64(-0.8238, -0.4134), c64(0.5425, 0.1126)],
                [c64(0.1321, 0.2715), c64(0.7267, -0.4734)],
            ]);
            let h31 = mat2([
                [c64(-0.9707, 0.2271), c64(-0.4520, -0.2644)],
                [c64(-0.0265, -0.7569), c64(0.2748, -0.2878)],
            ]);
            let h32 = mat2([
                [c64(-0.2200, -0.0000), c64(-0.0113, 0.6334)],
                [c64(-0.5837, -0.1839), c64(-0.0279, -1.0840)],
            ]);
            let h33 = mat2([
                [c64(-0.2200, -0.0000), c64(-0.0113, 0.6334)],
                [c64(-0.5837, -0.1839), c64(-0.0279, -1.0840)],
            ]);
            let ch = ChannelSet::new(vec![
                vec![h11, h12, h13],
                vec![h21, h22, h23],
                vec![h31, h32, h33],
            ])?;
            Ok((ch, "fixed 3-user 2x2 interference channel"))
        }
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

/// The final precoders reported for the 2-user fixture at SNR 5 dB.
///
/// Known names: "paper-2user-bpsk-snr5" and "paper-2user-qpsk-snr5". The
/// power budget is 10^0.5 per user.
pub fn fixture_precoders(name: &str) -> Result<PrecoderSet> {
    let p = vec![power_from_snr_db(5.0); 2];
    let g = match name {
        "paper-2user-bpsk-snr5" => vec![
            mat2([
                [c64(0.5390, -0.7978), c64(1.0204, 0.1993)],
                [c64(-1.0166, -0.1732), c64(0.2907, 0.0809)],
            ]),
            mat2([
                [c64(-0.0063, 0.0404), c64(0.2802, -0.3445)],
                [c64(1.2232, 0.0059), c64(0.6386, -1.0292)],
            ]),
        ],
        "paper-2user-qpsk-snr5" => vec![
            mat2([
                [c64(1.0523, -0.6658), c64(0.2312, -1.1369)],
                [c64(0.3759, -0.0377), c64(0.2090, -0.2814)],
            ]),
            mat2([
                [c64(-0.4825, 0.0572), c64(0.2828, 0.1678)],
                [c64(-0.8290, 1.0292), c64(1.0257, 0.1388)],
            ]),
        ],
        other => return Err(Error::UnknownFixture(other.to_string())),
    };
    // Printed to four decimals; the trace can overshoot the budget by the
    // rounding error, so bypass the feasibility check.
    Ok(PrecoderSet { g, p })
}

/// Parses the plain-text channel format: a `H_j_i` key line starts a matrix
/// and each following line is one row of whitespace-separated `re,im` pairs.
pub fn parse_channel_text(text: &str) -> Result<ChannelSet> {
    struct Block {
        rx: usize,
        tx: usize,
        rows: Vec<Vec<Complex64>>,
        line: usize,
    }
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("H_") {
            let mut it = rest.split('_');
            let rx = it.next().and_then(|s| s.parse::<usize>().ok());
            let tx = it.next().and_then(|s| s.parse::<usize>().ok());
            match (rx, tx, it.next()) {
                (Some(rx), Some(tx), None) if rx >= 1 && tx >= 1 => blocks.push(Block {
                    rx: rx - 1,
                    tx: tx - 1,
                    rows: Vec::new(),
                    line: line_no,
                }),
                _ => {
                    return Err(Error::Config {
                        line: line_no,
                        msg: format!("malformed matrix key {line:?}, expected H_<j>_<i>"),
                    })
                }
            }
            continue;
        }
        let block = blocks.last_mut().ok_or(Error::Config {
            line: line_no,
            msg: "matrix row before any H_j_i key".into(),
        })?;
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let mut parts = tok.split(',');
            let re = parts.next().and_then(|s| s.parse::<f64>().ok());
            let im = parts.next().and_then(|s| s.parse::<f64>().ok());
            match (re, im, parts.next()) {
                (Some(re), Some(im), None) => row.push(c64(re, im)),
                _ => {
                    return Err(Error::Config {
                        line: line_no,
                        msg: format!("bad entry {tok:?}, expected re,im"),
                    })
                }
            }
        }
        block.rows.push(row);
    }
    if blocks.is_empty() {
        return Err(Error::Config {
            line: 0,
            msg: "no matrices found".into(),
        });
    }
    let k = blocks
        .iter()
        .map(|b| b.rx.max(b.tx) + 1)
        .max()
        .unwrap_or(0);
    let mut grid: Vec<Vec<Option<CMatrix>>> = vec![(0..k).map(|_| None).collect(); k];
    for b in blocks {
        let cols = b.rows.first().map(|r| r.len()).unwrap_or(0);
        if cols == 0 || b.rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Config {
                line: b.line,
                msg: format!("H_{}_{} has ragged or empty rows", b.rx + 1, b.tx + 1),
            });
        }
        let flat: Vec<Complex64> = b.rows.iter().flatten().cloned().collect();
        if grid[b.rx][b.tx].is_some() {
            return Err(Error::Config {
                line: b.line,
                msg: format!("duplicate matrix H_{}_{}", b.rx + 1, b.tx + 1),
            });
        }
        grid[b.rx][b.tx] = Some(CMatrix::from_row_slice(b.rows.len(), cols, &flat));
    }
    let mut h = Vec::with_capacity(k);
    for (j, row) in grid.into_iter().enumerate() {
        let mut out = Vec::with_capacity(k);
        for (i, m) in row.into_iter().enumerate() {
            out.push(m.ok_or(Error::Config {
                line: 0,
                msg: format!("missing matrix H_{}_{}", j + 1, i + 1),
            })?);
        }
        h.push(out);
    }
    ChannelSet::new(h)
}

/// Renders a channel set in the format accepted by [`parse_channel_text`].
pub fn format_channel_text(ch: &ChannelSet) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for j in 0..ch.k {
        for i in 0..ch.k {
            writeln!(out, "H_{}_{}", j + 1, i + 1).unwrap();
            let m = ch.h(j, i);
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|c| format!("{},{}", m[(r, c)].re, m[(r, c)].im))
                    .collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_identity_is_identity() {
        let h = CMatrix::identity(2, 2);
        let out = normalize_channel(&h).unwrap();
        assert!((&out - &h).norm() < 1e-15);
    }

    #[test]
    fn normalize_scales_down() {
        let h = CMatrix::identity(2, 2) * c64(2.0, 0.0);
        let out = normalize_channel(&h).unwrap();
        assert!((&out - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn normalize_random_trace() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.3, -1.2), c64(0.7, 0.1), c64(-0.5, 0.4), c64(1.1, 2.0)],
        );
        let out = normalize_channel(&h).unwrap();
        assert!((frob_sq(&out) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_zero_rejected() {
        assert!(normalize_channel(&CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn project_leaves_feasible_untouched() {
        let g = CMatrix::identity(2, 2) * c64(0.5, 0.0);
        let out = project_power(&g, 1.0);
        assert!((&out - &g).norm() == 0.0);
    }

    #[test]
    fn project_scales_to_budget() {
        let g = CMatrix::identity(2, 2) * c64(2.0, 0.0);
        let out = project_power(&g, 1.0);
        assert!((frob_sq(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paper_bpsk_precoder_trace_matches_snr5_budget() {
        // Sum of squared moduli of the printed entries vs 10^0.5.
        let pre = fixture_precoders("paper-2user-bpsk-snr5").unwrap();
        let tr = frob_sq(&pre.g[0]);
        let p = power_from_snr_db(5.0);
        assert!((tr - p).abs() / p < 0.01, "tr = {tr}, P = {p}");
    }

    #[test]
    fn fixture_entries_match_print() {
        let (ch2, _) = load_fixture("paper-2user-2x2").unwrap();
        assert_eq!(ch2.h(0, 0)[(0, 0)], c64(1.2813, 0.0));
        assert_eq!(ch2.h(1, 0)[(0, 1)], c64(-0.3938, 0.3207));
        let (ch3, _) = load_fixture("paper-3user-2x2").unwrap();
        assert_eq!(ch3.h(1, 1)[(0, 0)], c64(0.4643, 0.6778));
        assert_eq!(ch3.h(2, 0)[(1, 0)], c64(-0.0265, -0.7569));
    }

    #[test]
    fn unknown_fixture_rejected() {
        assert!(load_fixture("bogus").is_err());
    }

    #[test]
    fn channel_text_round_trip() {
        let (ch, _) = load_fixture("paper-3user-2x2").unwrap();
        let text = format_channel_text(&ch);
        let back = parse_channel_text(&text).unwrap();
        assert_eq!(back.k, 3);
        for j in 0..3 {
            for i in 0..3 {
                assert_eq!(ch.h(j, i), back.h(j, i));
            }
        }
    }

    #[test]
    fn channel_text_errors_carry_line_numbers() {
        let err = parse_channel_text("H_1_1\n1.0,0 nonsense\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = parse_channel_text("1.0,0\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn project_power_idempotent_and_never_grows(
            scale in 0.1f64..4.0,
            p in 0.2f64..3.0,
        ) {
            let g = CMatrix::from_row_slice(
                2,
                2,
                &[c64(scale, 0.1), c64(-0.4, scale), c64(0.2, -0.3), c64(scale, -0.8)],
            );
            let before = frob_sq(&g);
            let once = project_power(&g, p);
            let twice = project_power(&once, p);
            let tr = frob_sq(&once);
            // trace is either untouched or exactly the budget
            prop_assert!(tr <= before + 1e-12);
            prop_assert!((tr - before).abs() < 1e-12 || (tr - p).abs() < 1e-9);
            prop_assert!((&twice - &once).norm() < 1e-12);
        }
    }
}
