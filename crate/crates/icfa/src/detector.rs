//! Soft MAP multiuser detection.
//!
//! `map_llr` produces extrinsic bit LLRs for one user by marginalizing the
//! interference exactly over the other users' discrete alphabets, instead of
//! modeling it as colored Gaussian noise. The Gaussian-assumption baseline
//! front-end (`whiten`) is also provided: it whitens interference-plus-noise
//! with the Hermitian inverse square root of its covariance, after which a
//! point-to-point detector applies.
//!
//! Bits take values +1/-1. Bit vectors map to transmit vectors one antenna
//! at a time with Gray labeling per constellation axis. LLRs are computed in
//! natural-log units and converted at the boundary; natural log is the
//! default output unit.



use crate::channel::{ChannelSet, NoiseSpec, PrecoderSet};
use crate::constellation::{Constellation, Scheme, SymbolTable};
use crate::enumeration::{for_each_combo, logsumexp, validate_system};
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_hermitian, gram, noise_plus_gram, CMatrix, CVector, LOG2_E};

/// LLR output/input units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LlrBase {
    #[default]
    Natural,
    Log2,
}

/// A vector of per-bit LLRs in the stated base.
#[derive(Debug, Clone)]
pub struct LlrVector {
    pub values: Vec<f64>,
    pub base: LlrBase,
}

impl LlrVector {
    pub fn zeros(bits: usize) -> Self {
        LlrVector {
            values: vec![0.0; bits],
            base: LlrBase::Natural,
        }
    }

    fn to_natural(&self) -> Vec<f64> {
        match self.base {
            LlrBase::Natural => self.values.clone(),
            LlrBase::Log2 => self.values.iter().map(|v| v / LOG2_E).collect(),
        }
    }
}

fn gray_decode(mut w: usize) -> usize {
    let mut mask = w >> 1;
    while mask != 0 {
        w ^= mask;
        mask >>= 1;
    }
    w
}

/// Maps +1/-1 bit vectors of length `N_t * log2 Q` onto symbol-table
/// indices, one antenna chunk at a time, Gray-coded per constellation axis.
#[derive(Debug, Clone)]
pub struct BitMapping {
    pub n_t: usize,
    pub bits_per_point: usize,
    /// Symbol-table index per bit word (most-significant bit first).
    table_index: Vec<usize>,
}

impl BitMapping {
    pub fn new(c: &Constellation, n_t: usize) -> Result<Self> {
        let b = c.bits_per_point();
        if (1usize << b) != c.order {
            return Err(Error::UnsupportedModulation(format!(
                "order {} is not a power of two",
                c.order
            )));
        }
        let bits = n_t * b;
        if bits >= usize::BITS as usize {
            return Err(Error::CapExceeded {
                required: 1u128 << bits,
                cap: crate::ENUMERATION_CAP,
            });
        }
        let mut table_index = vec![0usize; 1 << bits];
        for (w, slot) in table_index.iter_mut().enumerate() {
            let mut idx = 0usize;
            for a in 0..n_t {
                let chunk = (w >> ((n_t - 1 - a) * b)) & ((1 << b) - 1);
                idx = idx * c.order + point_index_from_bits(c, chunk);
            }
            *slot = idx;
        }
        Ok(BitMapping {
            n_t,
            bits_per_point: b,
            table_index,
        })
    }

    pub fn bits(&self) -> usize {
        self.n_t * self.bits_per_point
    }

    /// Word with bit 0 most significant; bit value 1 encodes +1.
    pub fn index_for_word(&self, word: usize) -> usize {
        self.table_index[word]
    }

    /// Symbol-table index for a +1/-1 bit vector.
    pub fn map_index(&self, bits: &[i8]) -> Result<usize> {
        if bits.len() != self.bits() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} bits, got {}",
                self.bits(),
                bits.len()
            )));
        }
        let mut w = 0usize;
        for &s in bits {
            w = (w << 1) | usize::from(s > 0);
        }
        Ok(self.table_index[w])
    }

    /// Returns a mapping with the sense of bit `i` inverted; used to check
    /// the label-flip antisymmetry of the LLRs.
    pub fn with_bit_flipped(&self, i: usize) -> Self {
        let bits = self.bits();
        let mask = 1usize << (bits - 1 - i);
        let table_index = (0..self.table_index.len())
            .map(|w| self.table_index[w ^ mask])
            .collect();
        BitMapping {
            n_t: self.n_t,
            bits_per_point: self.bits_per_point,
            table_index,
        }
    }
}

/// Constellation-point index for one antenna's bit chunk.
fn point_index_from_bits(c: &Constellation, w: usize) -> usize {
    match c.scheme {
        Scheme::Bpsk => {
            // points are [+1, -1]; bit 1 selects +1
            if w == 1 {
                0
            } else {
                1
            }
        }
        Scheme::Qpsk => {
            // points ordered (+,+), (+,-), (-,+), (-,-); bit 1 selects +
            let b_i = (w >> 1) & 1;
            let b_q = w & 1;
            ((1 - b_i) << 1) | (1 - b_q)
        }
        Scheme::Pam | Scheme::Psk => gray_decode(w),
        Scheme::Qam => {
            let side_bits = c.bits_per_point() / 2;
            let side = 1usize << side_bits;
            let w_i = w >> side_bits;
            let w_q = w & (side - 1);
            gray_decode(w_i) * side + gray_decode(w_q)
        }
    }
}

/// Natural-log likelihoods `ln p(y | x_j = table[p])` for every candidate
/// own-symbol, with interference marginalized exactly over the other users'
/// alphabets.
fn own_symbol_log_likelihoods(
    y: &CVector,
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    j: usize,
) -> Result<Vec<f64>> {
    validate_system(ch, pre, tables)?;
    let n_r = ch.n_r[j];
    if y.len() != n_r {
        return Err(Error::DimensionMismatch(format!(
            "received vector has length {}, receiver {} has {} antennas",
            y.len(),
            j + 1,
            n_r
        )));
    }
    let interferers: Vec<usize> = (0..ch.k).filter(|&t| t != j).collect();
    let sizes: Vec<usize> = interferers.iter().map(|&t| tables[t].size()).collect();
    let combos: usize = sizes.iter().product::<usize>().max(1);

    let own: Vec<CVector> = {
        let hg = ch.h(j, j) * &pre.g[j];
        tables[j].vectors.iter().map(|x| &hg * x).collect()
    };
    let imgs: Vec<Vec<CVector>> = interferers
        .iter()
        .map(|&t| {
            let hg = ch.h(j, t) * &pre.g[t];
            tables[t].vectors.iter().map(|x| &hg * x).collect()
        })
        .collect();

    let inv = 1.0 / noise.sigma2;
    let log_norm = -(combos as f64).ln() - n_r as f64 * (std::f64::consts::PI * noise.sigma2).ln();
    let mut exps = vec![0.0f64; combos];
    let mut digits = vec![0usize; interferers.len()];
    let mut out = Vec::with_capacity(own.len());
    for own_img in &own {
        let base = y - own_img;
        for_each_combo(&sizes, &mut digits, |m, flat| {
            let mut norm = 0.0;
            for r in 0..n_r {
                let mut v = base[r];
                for (u, &mi) in m.iter().enumerate() {
                    v -= imgs[u][mi][r];
                }
                norm += v.norm_sqr();
            }
            exps[flat] = -norm * inv;
        });
        out.push(logsumexp(&exps) + log_norm);
    }
    Ok(out)
}

/// Extrinsic MAP LLRs for user `j` given the received vector and prior LLRs
/// on the user's bits. For each bit, the prior-weighted likelihoods of all
/// bit vectors agreeing with +1 and with -1 are summed in the log domain;
/// the bit's own prior is excluded (extrinsic convention).
pub fn map_llr(
    y: &CVector,
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
    noise: &NoiseSpec,
    j: usize,
    mapping: &BitMapping,
    priors: &LlrVector,
    base: LlrBase,
) -> Result<LlrVector> {
    let bits = mapping.bits();
    if tables[j].size() != 1usize << bits {
        return Err(Error::DimensionMismatch(format!(
            "bit mapping covers {} vectors, table has {}",
            1usize << bits,
            tables[j].size()
        )));
    }
    if priors.values.len() != bits {
        return Err(Error::DimensionMismatch(format!(
            "expected {} prior LLRs, got {}",
            bits,
            priors.values.len()
        )));
    }
    let la = priors.to_natural();
    let ll = own_symbol_log_likelihoods(y, ch, pre, tables, noise, j)?;

    let words = 1usize << bits;
    // half of s^T L_A over all bits; per-bit exclusion subtracts its term
    let mut full_prior = vec![0.0f64; words];
    for (w, fp) in full_prior.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &l) in la.iter().enumerate() {
            let s = if (w >> (bits - 1 - i)) & 1 == 1 { 1.0 } else { -1.0 };
            acc += 0.5 * s * l;
        }
        *fp = acc;
    }

    let mut values = Vec::with_capacity(bits);
    let mut pos_buf = Vec::with_capacity(words / 2);
    let mut neg_buf = Vec::with_capacity(words / 2);
    for i in 0..bits {
        pos_buf.clear();
        neg_buf.clear();
        for w in 0..words {
            let s_i = (w >> (bits - 1 - i)) & 1 == 1;
            let own_prior = 0.5 * if s_i { la[i] } else { -la[i] };
            let metric = ll[mapping.index_for_word(w)] + full_prior[w] - own_prior;
            if s_i {
                pos_buf.push(metric);
            } else {
                neg_buf.push(metric);
            }
        }
        values.push(logsumexp(&pos_buf) - logsumexp(&neg_buf));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LLR".into()));
    }
    if base == LlrBase::Log2 {
        values.iter_mut().for_each(|v| *v *= LOG2_E);
    }
    Ok(LlrVector { values, base })
}

/// Interference-plus-noise covariance of receiver `j` under the Gaussian
/// interference model: sigma^2 I + sum_{i != j} H_ji G_i G_i^H H_ji^H.
pub fn interference_covariance(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    noise: &NoiseSpec,
    j: usize,
) -> CMatrix {
    noise_plus_gram(
        noise.sigma2,
        ch.n_r[j],
        (0..ch.k)
            .filter(|&i| i != j)
            .map(|i| gram(&(ch.h(j, i) * &pre.g[i]))),
    )
}

/// Hermitian inverse square root of the interference-plus-noise covariance.
pub fn whitening_matrix(ch: &ChannelSet, pre: &PrecoderSet, noise: &NoiseSpec, j: usize) -> CMatrix {
    inv_sqrt_hermitian(&interference_covariance(ch, pre, noise, j))
}

/// Whitens the received vector and returns it with the equivalent
/// own-signal channel `C^(-1/2) H_jj G_j`.
pub fn whiten(
    y: &CVector,
    ch: &ChannelSet,
    pre: &PrecoderSet,
    noise: &NoiseSpec,
    j: usize,
) -> Result<(CVector, CMatrix)> {
    if y.len() != ch.n_r[j] {
        return Err(Error::DimensionMismatch(format!(
            "received vector has length {}, receiver {} has {} antennas",
            y.len(),
            j + 1,
            ch.n_r[j]
        )));
    }
    let w = whitening_matrix(ch, pre, noise, j);
    let eq = &w * (ch.h(j, j) * &pre.g[j]);
    Ok((&w * y, eq))
}
