//! Shared enumeration kernels.
//!
//! Every finite-alphabet expectation in this crate reduces to, per noise
//! draw, sums of `exp(-(||v + n||^2) / sigma^2)` over the joint symbol space,
//! where `v = sum_u H_{r,u} G_u (x_{u,m_u} - x_{u,n_u})`. The common factor
//! `exp(-||n||^2 / sigma^2)` cancels in every ratio and log-difference this
//! crate evaluates, so the kernels work with the reduced exponent
//! `-(||v||^2 + 2 Re<v, n>) / sigma^2`. All inner sums are evaluated in the
//! log domain with max subtraction; exponents reach -1e6 at high SNR and
//! would underflow otherwise.

use num_complex::Complex64;

use crate::channel::{ChannelSet, NoiseSpec, PrecoderSet};
use crate::constellation::{DifferenceTable, SymbolTable};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Flat norm tables above this entry count are not materialized.
const NORM_CACHE_MAX: usize = 1 << 22;

/// Iterates the mixed-radix product space of `sizes`, passing the digit
/// vector and the flat (lexicographic) index. Zero radices yield a single
/// empty combination.
#[inline]
pub(crate) fn for_each_combo(sizes: &[usize], digits: &mut [usize], mut f: impl FnMut(&[usize], usize)) {
    debug_assert_eq!(sizes.len(), digits.len());
    digits.iter_mut().for_each(|d| *d = 0);
    let k = sizes.len();
    let mut flat = 0usize;
    loop {
        f(digits, flat);
        flat += 1;
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < sizes[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Log-sum-exp with max subtraction.
#[inline]
pub(crate) fn logsumexp(exps: &[f64]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for &e in exps {
        if e > mx {
            mx = e;
        }
    }
    if !mx.is_finite() {
        return mx;
    }
    let mut s = 0.0;
    for &e in exps {
        s += (e - mx).exp();
    }
    mx + s.ln()
}

#[inline]
fn dot2re(a: &[Complex64], b: &[Complex64]) -> f64 {
    // 2 Re <a, b>
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x.re * y.re + x.im * y.im;
    }
    2.0 * acc
}

/// Checks channel / precoder / table consistency once per entry point.
pub(crate) fn validate_system(
    ch: &ChannelSet,
    pre: &PrecoderSet,
    tables: &[SymbolTable],
) -> Result<()> {
    if pre.k() != ch.k || tables.len() != ch.k {
        return Err(Error::DimensionMismatch(format!(
            "K mismatch: channel {}, precoders {}, tables {}",
            ch.k,
            pre.k(),
            tables.len()
        )));
    }
    for u in 0..ch.k {
        if pre.g[u].nrows() != ch.n_t[u] || pre.g[u].ncols() != ch.n_t[u] {
            return Err(Error::DimensionMismatch(format!(
                "user {}: precoder is {}x{}, channel expects {3}x{3}",
                u + 1,
                pre.g[u].nrows(),
                pre.g[u].ncols(),
                ch.n_t[u]
            )));
        }
        if tables[u].n_t != ch.n_t[u] {
            return Err(Error::DimensionMismatch(format!(
                "user {}: symbol table built for {} antennas, channel has {}",
                u + 1,
                tables[u].n_t,
                ch.n_t[u]
            )));
        }
    }
    let mut prod: u128 = 1;
    for t in tables {
        prod *= t.size() as u128;
    }
    if prod > crate::ENUMERATION_CAP as u128 {
        return Err(Error::CapExceeded {
            required: prod,
            cap: crate::ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// Precomputed effective-difference tables for one receiver and one subset of
/// users (all of them, or all but one).
pub(crate) struct EnumSet {
    /// Global indices of the users enumerated here.
    pub users: Vec<usize>,
    /// Alphabet size per enumerated user.
    pub sizes: Vec<usize>,
    pub n_r: usize,
    pub sigma2: f64,
    /// Product of `sizes` (1 when `users` is empty).
    pub total: usize,
    /// Per enumerated user: H_{r,u} G_u (x_m - x_n), flattened as
    /// `(m * M_u + n) * n_r + row`.
    diff: Vec<Vec<Complex64>>,
    /// ||v||^2 per (m_flat, n_flat), when small enough to materialize.
    norm_cache: Option<Vec<f64>>,
}

impl EnumSet {
    pub(crate) fn new(
        ch: &ChannelSet,
        pre: &PrecoderSet,
        tables: &[SymbolTable],
        noise: &NoiseSpec,
        receiver: usize,
        exclude: Option<usize>,
    ) -> Result<EnumSet> {
        let users: Vec<usize> = (0..ch.k).filter(|&u| Some(u) != exclude).collect();
        let sizes: Vec<usize> = users.iter().map(|&u| tables[u].size()).collect();
        let n_r = ch.n_r[receiver];
        let total = sizes.iter().product::<usize>().max(1);

        let mut diff = Vec::with_capacity(users.len());
        for (&u, &m_u) in users.iter().zip(&sizes) {
            let hg = ch.h(receiver, u) * &pre.g[u];
            let imgs: Vec<_> = tables[u].vectors.iter().map(|x| &hg * x).collect();
            let mut flat = vec![Complex64::default(); m_u * m_u * n_r];
            for m in 0..m_u {
                for n in 0..m_u {
                    let base = (m * m_u + n) * n_r;
                    for r in 0..n_r {
                        flat[base + r] = imgs[m][r] - imgs[n][r];
                    }
                }
            }
            diff.push(flat);
        }

        let mut set = EnumSet {
            users,
            sizes,
            n_r,
            sigma2: noise.sigma2,
            total,
            diff,
            norm_cache: None,
        };
        if set.total.checked_mul(set.total).is_some_and(|sq| sq <= NORM_CACHE_MAX) {
            set.build_norm_cache();
        }
        Ok(set)
    }

    fn build_norm_cache(&mut self) {
        let ku = self.users.len();
        let mut cache = vec![0.0f64; self.total * self.total];
        let mut v = vec![Complex64::default(); self.n_r];
        let mut md = vec![0usize; ku];
        let mut nd = vec![0usize; ku];
        let mut offs = vec![0usize; ku];
        let sizes = self.sizes.clone();
        for_each_combo(&sizes, &mut md, |m, mf| {
            for u in 0..ku {
                offs[u] = m[u] * self.sizes[u];
            }
            let row = mf * self.total;
            for_each_combo(&sizes, &mut nd, |n, nf| {
                v.iter_mut().for_each(|z| *z = Complex64::default());
                for u in 0..ku {
                    let base = (offs[u] + n[u]) * self.n_r;
                    let d = &self.diff[u][base..base + self.n_r];
                    for (acc, z) in v.iter_mut().zip(d) {
                        *acc += z;
                    }
                }
                cache[row + nf] = v.iter().map(|z| z.norm_sqr()).sum();
            });
        });
        self.norm_cache = Some(cache);
    }

    pub(crate) fn scratch(&self) -> Scratch {
        Scratch {
            dot: self
                .sizes
                .iter()
                .map(|&m| vec![0.0; m * m])
                .collect(),
            exps: vec![0.0; self.total],
            vbuf: vec![Complex64::default(); self.total * self.n_r],
            md: vec![0; self.users.len()],
            nd: vec![0; self.users.len()],
            offs: vec![0; self.users.len()],
        }
    }

    fn fill_dots(&self, noise: &[Complex64], scratch: &mut Scratch) {
        for (u, tbl) in scratch.dot.iter_mut().enumerate() {
            let flat = &self.diff[u];
            for (p, slot) in tbl.iter_mut().enumerate() {
                *slot = dot2re(&flat[p * self.n_r..(p + 1) * self.n_r], noise);
            }
        }
    }

    /// Average over m-combinations of `log2 sum_n exp(-(||v||^2 + 2Re<v,n>)/sigma^2)`.
    ///
    /// With an empty user set this is exactly zero (a single empty term).
    pub(crate) fn avg_log2_lse(&self, noise: &[Complex64], scratch: &mut Scratch) -> f64 {
        let ku = self.users.len();
        if ku == 0 {
            return 0.0;
        }
        self.fill_dots(noise, scratch);
        let inv = 1.0 / self.sigma2;
        let total = self.total;
        let mut acc = 0.0;
        let Scratch {
            dot,
            exps,
            md,
            nd,
            offs,
            ..
        } = scratch;
        let sizes = &self.sizes;
        if let Some(cache) = &self.norm_cache {
            for_each_combo(sizes, md, |m, mf| {
                for u in 0..ku {
                    offs[u] = m[u] * sizes[u];
                }
                let row = &cache[mf * total..(mf + 1) * total];
                for_each_combo(sizes, nd, |n, nf| {
                    let mut e = row[nf];
                    for u in 0..ku {
                        e += dot[u][offs[u] + n[u]];
                    }
                    exps[nf] = -e * inv;
                });
                acc += logsumexp(exps);
            });
        } else {
            let n_r = self.n_r;
            let mut v = vec![Complex64::default(); n_r];
            for_each_combo(sizes, md, |m, mf| {
                let _ = mf;
                for u in 0..ku {
                    offs[u] = m[u] * sizes[u];
                }
                for_each_combo(sizes, nd, |n, nf| {
                    v.iter_mut().for_each(|z| *z = Complex64::default());
                    let mut d2 = 0.0;
                    for u in 0..ku {
                        let base = (offs[u] + n[u]) * n_r;
                        for (acc_v, z) in v.iter_mut().zip(&self.diff[u][base..base + n_r]) {
                            *acc_v += z;
                        }
                        d2 += dot[u][offs[u] + n[u]];
                    }
                    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                    exps[nf] = -(norm + d2) * inv;
                });
                acc += logsumexp(exps);
            });
        }
        acc / (total as f64) / std::f64::consts::LN_2
    }

    /// Average over m-combinations of the weighted ratio
    /// `sum_n w (v + n) d_target^H / sum_n w`, the per-draw building block of
    /// the gradient expectation matrices. `raw` holds the target user's
    /// unprojected symbol differences; the result is `n_r x n_t_target`.
    ///
    /// Weights are normalized by their per-m maximum before exponentiation,
    /// which leaves the ratio unchanged and keeps it finite at high SNR.
    pub(crate) fn t_ratio_avg(
        &self,
        noise: &[Complex64],
        target_local: usize,
        raw: &DifferenceTable,
        n_t_target: usize,
        scratch: &mut Scratch,
    ) -> CMatrix {
        let ku = self.users.len();
        let n_r = self.n_r;
        let mut out = CMatrix::zeros(n_r, n_t_target);
        if ku == 0 {
            return out;
        }
        self.fill_dots(noise, scratch);
        let inv = 1.0 / self.sigma2;
        let total = self.total;
        let Scratch {
            dot,
            exps,
            vbuf,
            md,
            nd,
            offs,
        } = scratch;
        let sizes = &self.sizes;
        for_each_combo(sizes, md, |m, _mf| {
            for u in 0..ku {
                offs[u] = m[u] * sizes[u];
            }
            let m_t = m[target_local];
            // pass 1: exponents and summed vectors per n-combination
            for_each_combo(sizes, nd, |n, nf| {
                let vslot = &mut vbuf[nf * n_r..(nf + 1) * n_r];
                vslot.iter_mut().for_each(|z| *z = Complex64::default());
                let mut d2 = 0.0;
                for u in 0..ku {
                    let base = (offs[u] + n[u]) * n_r;
                    for (acc_v, z) in vslot.iter_mut().zip(&self.diff[u][base..base + n_r]) {
                        *acc_v += z;
                    }
                    d2 += dot[u][offs[u] + n[u]];
                }
                let norm: f64 = vslot.iter().map(|z| z.norm_sqr()).sum();
                exps[nf] = -(norm + d2) * inv;
            });
            let mut mx = f64::NEG_INFINITY;
            for &e in exps.iter().take(total) {
                if e > mx {
                    mx = e;
                }
            }
            // pass 2: weighted accumulation
            let mut den = 0.0;
            let mut num = CMatrix::zeros(n_r, n_t_target);
            for_each_combo(sizes, nd, |n, nf| {
                let w = (exps[nf] - mx).exp();
                den += w;
                let n_t_idx = n[target_local];
                let d = raw.get(m_t, n_t_idx);
                let vslot = &vbuf[nf * n_r..(nf + 1) * n_r];
                for r in 0..n_r {
                    let vn = (vslot[r] + noise[r]) * w;
                    for c in 0..n_t_target {
                        num[(r, c)] += vn * d[c].conj();
                    }
                }
            });
            out += num / Complex64::new(den, 0.0);
        });
        out / Complex64::new(total as f64, 0.0)
    }
}

pub(crate) struct Scratch {
    dot: Vec<Vec<f64>>,
    exps: Vec<f64>,
    vbuf: Vec<Complex64>,
    md: Vec<usize>,
    nd: Vec<usize>,
    offs: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combo_iteration_order_is_lexicographic() {
        let mut seen = Vec::new();
        let mut d = vec![0; 2];
        for_each_combo(&[2, 3], &mut d, |digits, flat| {
            seen.push((digits.to_vec(), flat));
        });
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], (vec![0, 0], 0));
        assert_eq!(seen[1], (vec![0, 1], 1));
        assert_eq!(seen[5], (vec![1, 2], 5));
    }

    #[test]
    fn empty_combo_runs_once() {
        let mut count = 0;
        for_each_combo(&[], &mut [], |_, _| count += 1);
        assert_eq!(count, 1);
    }

    #[test]
    fn logsumexp_handles_huge_negatives() {
        let v = vec![-1e6, -1e6 + 1.0, -2e6];
        let out = logsumexp(&v);
        assert!(out.is_finite());
        assert!((out - (-1e6 + 1.0 + (1f64 + (-1.0f64).exp() + 0.0).ln())).abs() < 1e-9);
    }
}
