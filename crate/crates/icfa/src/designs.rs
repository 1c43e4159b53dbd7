//! Closed-form precoder constructions and the interference-alignment
//! saturation-loss accounting.
//!
//! - Low SNR: beamform all power along the dominant eigenvector of the
//!   user's own channel Gram matrix; interference is negligible there and
//!   the design maximizes the shared first-order rate term.
//! - High SNR: scaled-identity precoders whose per-user power fractions
//!   follow a strict dominance cascade over the channel-rotated symbol
//!   differences, which keeps every joint symbol combination resolvable
//!   and drives the sum-rate to its saturation value `sum_j log2 M_j`.
//! - IA accounting: the symbol-extension bookkeeping showing that aligning
//!   interference into half the signal space caps the average sum-rate at
//!   `eta/(eta+1)` of saturation when inputs are finite-alphabet.

use crate::channel::{ChannelSet, PrecoderSet};
use crate::constellation::SymbolTable;
use crate::error::{Error, Result};
use crate::linalg::{c64, dominant_eigenvector, CMatrix};

/// Safety factor applied to each strict dominance inequality of the
/// high-SNR cascade.
const CASCADE_MARGIN: f64 = 1.05;

/// Extreme magnitudes of the nonzero entries of `H_ji G (x_m - x_n)` style
/// products, per transmitting user (precoders not applied; the cascade
/// scales identity precoders afterwards).
#[derive(Debug, Clone)]
pub struct OmegaBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Count of distinct nonzero magnitudes per user (1e-9 tolerance).
    pub distinct: Vec<usize>,
}

/// Result of the high-SNR power-allocation design.
#[derive(Debug, Clone)]
pub struct HighSnrDesign {
    /// Selected power fractions per user (original indexing); the first
    /// user in `order` has fraction exactly 1. Chosen to maximize the
    /// worst-case joint-difference norm (see below); always at least as
    /// aggressive as the certificate profile.
    pub epsilon: Vec<f64>,
    /// Strictly cascade-feasible certificate profile: these fractions
    /// satisfy every dominance inequality with margin [`CASCADE_MARGIN`].
    pub cascade_epsilon: Vec<f64>,
    /// Cascade order, strongest first.
    pub order: Vec<usize>,
    pub precoders: PrecoderSet,
    pub omega: OmegaBounds,
    /// min over receivers and joint symbol pairs of
    /// `|| sum_i H_ji G_i (x_i,m - x_i,n) ||` at the selected profile; the
    /// decodability margin that drives how fast the sum-rate saturates.
    pub min_joint_distance: f64,
}

/// Symbol-extension accounting for interference alignment on a K-user
/// channel with N_T transmit and N_R receive antennas everywhere.
#[derive(Debug, Clone)]
pub struct IaAccounting {
    pub eta: u64,
    pub rho: u64,
    /// Per-stream scalar alphabet sizes q_1..q_{K*N_T}.
    pub q: Vec<u64>,
    /// Limiting average sum-rate: eta/(eta+1) * sum_j log2 M_j.
    pub limit: f64,
    /// Average sum-rate per symbol for extension indices n = 1..=8.
    pub head: Vec<f64>,
}

impl IaAccounting {
    /// Average sum-rate per symbol at extension index `n`.
    pub fn average_rate(&self, n: u64) -> f64 {
        let (a, b) = self.split_sums();
        let r = (n as f64 / (n + 1) as f64).powf(self.rho as f64);
        self.eta as f64 / (self.eta + 1) as f64 * (a + b * r)
    }

    /// Desired-signal stream lengths at extension index `n` (as floats;
    /// they overflow integers for large exponents).
    pub fn stream_lengths(&self, n: u64) -> Vec<f64> {
        let lead = self.eta as f64 * ((n + 1) as f64).powf(self.rho as f64);
        let tail = self.eta as f64 * (n as f64).powf(self.rho as f64);
        (0..self.q.len())
            .map(|j| if (j as u64) < self.eta + 1 { lead } else { tail })
            .collect()
    }

    /// Symbol-extension length at index `n`.
    pub fn extension_length(&self, n: u64) -> f64 {
        (self.eta + 1) as f64 * ((n + 1) as f64).powf(self.rho as f64)
    }

    fn split_sums(&self) -> (f64, f64) {
        let lead: f64 = self.q.iter().take(self.eta as usize + 1).map(|&q| (q as f64).log2()).sum();
        let tail: f64 = self.q.iter().skip(self.eta as usize + 1).map(|&q| (q as f64).log2()).sum();
        (lead, tail)
    }
}

/// Beamforming design for the low-SNR regime: `G_j = sqrt(P_j) [v_max_j 0]`
/// with `v_max_j` the dominant eigenvector of `H_jj^H H_jj`. The trace is
/// exactly `P_j`.
pub fn low_snr_design(ch: &ChannelSet, p: &[f64]) -> Result<PrecoderSet> {
    if p.len() != ch.k {
        return Err(Error::DimensionMismatch("one power per user required".into()));
    }
    let mut g = Vec::with_capacity(ch.k);
    for j in 0..ch.k {
        let h = ch.h(j, j);
        let gramm = h.adjoint() * h;
        let (_, v) = dominant_eigenvector(&gramm);
        let n_t = ch.n_t[j];
        let mut gj = CMatrix::zeros(n_t, n_t);
        for r in 0..n_t {
            gj[(r, 0)] = v[r] * c64(p[j].sqrt(), 0.0);
        }
        g.push(gj);
    }
    PrecoderSet::new(g, p.to_vec())
}

/// Collects, for each transmitting user `i`, the distinct nonzero magnitudes
/// of the entries of `H_ji (x_m - x_n)` across all receivers `j`, symbol
/// pairs and vector positions, and returns their extremes.
pub fn compute_omega(ch: &ChannelSet, tables: &[SymbolTable]) -> Result<OmegaBounds> {
    if tables.len() != ch.k {
        return Err(Error::DimensionMismatch("one table per user required".into()));
    }
    const TOL: f64 = 1e-9;
    let mut min = Vec::with_capacity(ch.k);
    let mut max = Vec::with_capacity(ch.k);
    let mut distinct = Vec::with_capacity(ch.k);
    for i in 0..ch.k {
        let m_i = tables[i].size();
        let mut mags: Vec<f64> = Vec::new();
        for j in 0..ch.k {
            let h = ch.h(j, i);
            let imgs: Vec<_> = tables[i].vectors.iter().map(|x| h * x).collect();
            for m in 0..m_i {
                for n in 0..m_i {
                    if m == n {
                        continue;
                    }
                    for t in 0..ch.n_r[j] {
                        let a = (imgs[m][t] - imgs[n][t]).norm();
                        if a > TOL {
                            mags.push(a);
                        }
                    }
                }
            }
        }
        if mags.is_empty() {
            return Err(Error::DegenerateChannel(format!(
                "user {}: all channel-rotated symbol differences vanish",
                i + 1
            )));
        }
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut count = 1usize;
        for w in mags.windows(2) {
            if w[1] - w[0] > TOL {
                count += 1;
            }
        }
        min.push(mags[0]);
        max.push(*mags.last().unwrap());
        distinct.push(count);
    }
    Ok(OmegaBounds { min, max, distinct })
}

/// Size guard for the exact joint-difference enumeration.
const JOINT_ENUM_MAX: u128 = 1 << 22;

/// min over receivers and distinct joint symbol pairs of the norm of
/// `sum_i s_i D_ji(m_i, n_i)`, where `diffs[j][i]` holds the unscaled
/// per-user image differences at receiver j and `s_i` scales user i.
fn min_joint_distance(
    diffs: &[Vec<Vec<crate::linalg::CVector>>],
    sizes: &[usize],
    scales: &[f64],
) -> f64 {
    let k = sizes.len();
    let mut best = f64::INFINITY;
    let mut md = vec![0usize; k];
    let mut nd = vec![0usize; k];
    for recv in diffs {
        let n_r = recv[0][0].len();
        crate::enumeration::for_each_combo(sizes, &mut md, |m, _| {
            crate::enumeration::for_each_combo(sizes, &mut nd, |n, _| {
                if m == n {
                    return;
                }
                let mut norm = 0.0;
                for t in 0..n_r {
                    let mut v = num_complex::Complex64::default();
                    for i in 0..k {
                        v += recv[i][m[i] * sizes[i] + n[i]][t]
                            * num_complex::Complex64::new(scales[i], 0.0);
                    }
                    norm += v.norm_sqr();
                }
                if norm < best {
                    best = norm;
                }
            });
        });
    }
    best.sqrt()
}

/// Scaled-identity precoders for the high-SNR regime.
///
/// The dominance cascade is solved backward with margin [`CASCADE_MARGIN`]:
/// the last user in `order` gets a free scale, each earlier user is pinned
/// at margin * (sum of later users' worst-case terms), and the profile is
/// rescaled so the first user's fraction is exactly 1. That certificate
/// profile is returned in `cascade_epsilon` and always satisfies every
/// dominance inequality strictly.
///
/// The certificate is sufficient but can be far more conservative than
/// necessary (the triangle inequality over single coordinates ignores how
/// the joint difference vectors actually combine), and the limit is reached
/// by any fractions that keep every joint difference nonzero. The returned
/// `epsilon` therefore maximizes the exact worst-case joint-difference norm
/// over a deterministic grid of feasible profiles (falling back to the
/// certificate when the joint alphabet is too large to enumerate).
pub fn high_snr_design(
    ch: &ChannelSet,
    tables: &[SymbolTable],
    p: &[f64],
    order: Option<&[usize]>,
) -> Result<HighSnrDesign> {
    if p.len() != ch.k {
        return Err(Error::DimensionMismatch("one power per user required".into()));
    }
    let omega = compute_omega(ch, tables)?;
    let order: Vec<usize> = match order {
        Some(o) => {
            let mut seen = vec![false; ch.k];
            for &u in o {
                if u >= ch.k || seen[u] {
                    return Err(Error::InvalidArgument("order must be a permutation".into()));
                }
                seen[u] = true;
            }
            if o.len() != ch.k {
                return Err(Error::InvalidArgument("order must be a permutation".into()));
            }
            o.to_vec()
        }
        None => {
            let mut idx: Vec<usize> = (0..ch.k).collect();
            idx.sort_by(|&a, &b| {
                let ka = p[a] * omega.min[a] * omega.min[a];
                let kb = p[b] * omega.min[b] * omega.min[b];
                kb.partial_cmp(&ka).unwrap().then(a.cmp(&b))
            });
            idx
        }
    };

    // Backward cascade on the per-antenna amplitudes s_i = sqrt(eps_i P_i / N_t_i).
    let k = ch.k;
    let mut u = vec![0.0f64; k];
    u[k - 1] = 1.0;
    for pos in (0..k.saturating_sub(1)).rev() {
        let later: f64 = (pos + 1..k)
            .map(|q| u[q] * omega.max[order[q]])
            .sum();
        u[pos] = CASCADE_MARGIN * later / omega.min[order[pos]];
    }
    let first = order[0];
    let s_first = (p[first] / ch.n_t[first] as f64).sqrt();
    let scale = s_first / u[0];

    let mut cascade_epsilon = vec![0.0f64; k];
    for (pos, &user) in order.iter().enumerate() {
        let s = scale * u[pos];
        let eps = s * s * ch.n_t[user] as f64 / p[user];
        if pos == 0 {
            cascade_epsilon[user] = 1.0;
        } else if eps <= 0.0 || eps > 1.0 {
            return Err(Error::InfeasibleCascade(format!(
                "user {} (position {} in the cascade) needs power fraction {eps:.4}, \
                 outside (0, 1]: sqrt(eps_{0} P_{0} / N_t) * omega_min must exceed \
                 {CASCADE_MARGIN} x the later users' omega_max terms",
                user + 1,
                pos + 1,
            )));
        } else {
            cascade_epsilon[user] = eps;
        }
    }

    // The construction pins each inequality at the margin; verify anyway.
    for pos in 0..k {
        let user = order[pos];
        let s_i = (cascade_epsilon[user] * p[user] / ch.n_t[user] as f64).sqrt();
        let later: f64 = (pos + 1..k)
            .map(|q| {
                let uq = order[q];
                (cascade_epsilon[uq] * p[uq] / ch.n_t[uq] as f64).sqrt() * omega.max[uq]
            })
            .sum();
        if s_i * omega.min[user] <= later {
            return Err(Error::InfeasibleCascade(format!(
                "cascade inequality violated at position {} (user {})",
                pos + 1,
                user + 1
            )));
        }
    }

    let (epsilon, min_dist) = select_epsilon(ch, tables, p, &order, &cascade_epsilon);

    let g: Vec<CMatrix> = (0..k)
        .map(|i| {
            CMatrix::identity(ch.n_t[i], ch.n_t[i])
                * c64((epsilon[i] * p[i] / ch.n_t[i] as f64).sqrt(), 0.0)
        })
        .collect();
    let precoders = PrecoderSet::new(g, p.to_vec())?;
    Ok(HighSnrDesign {
        epsilon,
        cascade_epsilon,
        order,
        precoders,
        omega,
        min_joint_distance: min_dist,
    })
}

/// Picks the power fractions maximizing the exact worst-case
/// joint-difference norm over a deterministic multiplicative grid per free
/// user (the certificate profile is always one of the candidates). Returns
/// the certificate itself, with the distance unevaluated (NaN), when the
/// joint alphabet is too large to enumerate.
fn select_epsilon(
    ch: &ChannelSet,
    tables: &[SymbolTable],
    p: &[f64],
    order: &[usize],
    cascade: &[f64],
) -> (Vec<f64>, f64) {
    let k = ch.k;
    let sizes: Vec<usize> = tables.iter().map(|t| t.size()).collect();
    let joint: u128 = sizes.iter().map(|&s| s as u128).product();
    if joint * joint > JOINT_ENUM_MAX || k == 1 {
        return (cascade.to_vec(), f64::NAN);
    }

    // unscaled image differences H_ji (x_m - x_n), per receiver and user
    let diffs: Vec<Vec<Vec<crate::linalg::CVector>>> = (0..k)
        .map(|j| {
            (0..k)
                .map(|i| {
                    let imgs: Vec<_> = tables[i].vectors.iter().map(|x| ch.h(j, i) * x).collect();
                    let m_i = sizes[i];
                    let mut out = Vec::with_capacity(m_i * m_i);
                    for m in 0..m_i {
                        for n in 0..m_i {
                            out.push(&imgs[m] - &imgs[n]);
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();

    // candidate fractions per cascade position: 1.0 downward by a fixed
    // ratio until just below the certificate value, which is appended
    const GRID_RATIO: f64 = 0.6;
    let mut candidate_lists: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (pos, &user) in order.iter().enumerate() {
        if pos == 0 {
            candidate_lists.push(vec![1.0]);
            continue;
        }
        let floor = cascade[user].max(1e-6);
        let mut vals = Vec::new();
        let mut v = 1.0;
        while v > floor {
            vals.push(v);
            v *= GRID_RATIO;
        }
        vals.push(cascade[user]);
        candidate_lists.push(vals);
    }

    let counts: Vec<usize> = candidate_lists.iter().map(|c| c.len()).collect();
    let mut digits = vec![0usize; k];
    let mut best_eps: Option<Vec<f64>> = None;
    let mut best_dist = f64::NEG_INFINITY;
    crate::enumeration::for_each_combo(&counts, &mut digits, |choice, _| {
        let mut eps = vec![0.0; k];
        let mut scales = vec![0.0; k];
        for (pos, &user) in order.iter().enumerate() {
            eps[user] = candidate_lists[pos][choice[pos]];
            scales[user] = (eps[user] * p[user] / ch.n_t[user] as f64).sqrt();
        }
        let d = min_joint_distance(&diffs, &sizes, &scales);
        if d > best_dist {
            best_dist = d;
            best_eps = Some(eps);
        }
    });
    match best_eps {
        Some(eps) if best_dist > 0.0 => (eps, best_dist),
        _ => (cascade.to_vec(), f64::NAN),
    }
}

/// Average sum-rate accounting for interference alignment over symbol
/// extensions, for equal antenna counts N_T / N_R at every node and
/// per-user vector alphabet sizes `m_sizes`.
///
/// Requires `K > eta` where `eta = floor(max(N_T,N_R)/min(N_T,N_R))`.
pub fn ia_rate_loss(k: usize, n_t: usize, n_r: usize, m_sizes: &[usize]) -> Result<IaAccounting> {
    if k == 0 || n_t == 0 || n_r == 0 {
        return Err(Error::InvalidArgument("K, N_T, N_R must be positive".into()));
    }
    if m_sizes.len() != k {
        return Err(Error::DimensionMismatch("one alphabet size per user".into()));
    }
    let eta = (n_t.max(n_r) / n_t.min(n_r)) as u64;
    if k as u64 <= eta {
        return Err(Error::InvalidArgument(format!(
            "the accounting requires K > eta; got K = {k}, eta = {eta}"
        )));
    }
    let kn = (k * n_t) as u64;
    let rho = kn * eta * (kn - eta - 1);

    // Per-stream scalar alphabets: user i's N_T streams each carry Q_i
    // symbols, with M_i = Q_i^{N_T}.
    let mut q = Vec::with_capacity(k * n_t);
    for (i, &m) in m_sizes.iter().enumerate() {
        let qi = (m as f64).powf(1.0 / n_t as f64).round() as u64;
        if qi < 2 || qi.pow(n_t as u32) != m as u64 {
            return Err(Error::InvalidArgument(format!(
                "user {}: alphabet size {m} is not an N_T-th power",
                i + 1
            )));
        }
        for _ in 0..n_t {
            q.push(qi);
        }
    }

    let limit = eta as f64 / (eta + 1) as f64
        * m_sizes.iter().map(|&m| (m as f64).log2()).sum::<f64>();
    let mut acc = IaAccounting {
        eta,
        rho,
        q,
        limit,
        head: Vec::new(),
    };
    acc.head = (1..=8).map(|n| acc.average_rate(n)).collect();
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{load_fixture, NoiseSpec};
    use crate::constellation::{make_constellation, product_space, Scheme};
    use crate::linalg::frob_sq;
    use crate::rate::first_order_rate;

    fn tables_for(ch: &ChannelSet, scheme: Scheme, order: usize) -> Vec<SymbolTable> {
        let c = make_constellation(scheme, order).unwrap();
        ch.n_t.iter().map(|&nt| product_space(&c, nt).unwrap()).collect()
    }

    #[test]
    fn low_snr_identity_channel_beams_on_e1() {
        let ch = ChannelSet::new(vec![vec![CMatrix::identity(2, 2)]]).unwrap();
        let pre = low_snr_design(&ch, &[1.0]).unwrap();
        assert!((frob_sq(&pre.g[0]) - 1.0).abs() < 1e-12);
        assert!((pre.g[0][(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(pre.g[0][(0, 1)].norm() == 0.0 && pre.g[0][(1, 1)].norm() == 0.0);
    }

    #[test]
    fn low_snr_dominant_axis() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c64(2.0, 0.0),
            c64(1.0, 0.0),
        ]));
        let ch = ChannelSet::new(vec![vec![h]]).unwrap();
        let pre = low_snr_design(&ch, &[4.0]).unwrap();
        assert!((pre.g[0][(0, 0)].re - 2.0).abs() < 1e-12);
        assert!(pre.g[0][(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn low_snr_maximizes_first_order_term() {
        let (ch, _) = load_fixture("paper-2user-2x2").unwrap();
        let p = [1.3, 1.3];
        let pre = low_snr_design(&ch, &p).unwrap();
        let noise = NoiseSpec::unit();
        for j in 0..2 {
            // analytic maximum of tr(H G G^H H^H) under tr(G G^H) <= P
            let h = ch.h(j, j);
            let (lam, _) = dominant_eigenvector(&(h.adjoint() * h));
            let achieved = frob_sq(&(h * &pre.g[j]));
            assert!((achieved - p[j] * lam).abs() < 1e-9, "{achieved} vs {}", p[j] * lam);
            let fo = first_order_rate(&ch, &pre, &noise, j).unwrap().value;
            assert!(fo > 0.0);
        }
    }

    #[test]
    fn low_snr_beats_random_feasible_precoders() {
        let (ch, _) = load_fixture("paper-2user-2x2").unwrap();
        let p = [2.0, 2.0];
        let designed = low_snr_design(&ch, &p).unwrap();
        let noise = NoiseSpec::unit();
        for trial in 0..10u64 {
            let draws = crate::mc::tagged_gaussians(99, trial, 8);
            let mut g = Vec::new();
            for j in 0..2 {
                let m = CMatrix::from_fn(2, 2, |r, c| draws[4 * j + 2 * r + c]);
                g.push(crate::channel::project_power(&m, p[j]));
            }
            let random = PrecoderSet::new(g, p.to_vec()).unwrap();
            for j in 0..2 {
                let fo_design = first_order_rate(&ch, &designed, &noise, j).unwrap().value;
                let fo_random = first_order_rate(&ch, &random, &noise, j).unwrap().value;
                assert!(fo_design >= fo_random - 1e-12);
            }
        }
    }

    #[test]
    fn omega_scalar_bpsk() {
        let ch = ChannelSet::new(vec![vec![CMatrix::identity(1, 1)]]).unwrap();
        let c = make_constellation(Scheme::Bpsk, 2).unwrap();
        let tables = vec![product_space(&c, 1).unwrap()];
        let om = compute_omega(&ch, &tables).unwrap();
        assert!((om.min[0] - 2.0).abs() < 1e-12);
        assert!((om.max[0] - 2.0).abs() < 1e-12);
        assert_eq!(om.distinct[0], 1);

        let half = ChannelSet::new(vec![vec![CMatrix::identity(1, 1) * c64(0.5, 0.0)]]).unwrap();
        let om = compute_omega(&half, &tables).unwrap();
        assert!((om.min[0] - 1.0).abs() < 1e-12 && (om.max[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_matches_exhaustive_enumeration() {
        let (ch, _) = load_fixture("paper-2user-2x2").unwrap();
        let tables = tables_for(&ch, Scheme::Bpsk, 2);
        let om = compute_omega(&ch, &tables).unwrap();
        // independent brute-force loop
        for i in 0..2 {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for j in 0..2 {
                for m in 0..tables[i].size() {
                    for n in 0..tables[i].size() {
                        let d = &tables[i].vectors[m] - &tables[i].vectors[n];
                        let a = ch.h(j, i) * d;
                        for t in 0..2 {
                            let mag = a[t].norm();
                            if mag > 1e-9 {
                                lo = lo.min(mag);
                                hi = hi.max(mag);
                            }
                        }
                    }
                }
            }
            assert!((om.min[i] - lo).abs() < 1e-12);
            assert!((om.max[i] - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_degenerate_channel_rejected() {
        let ch = ChannelSet::new(vec![vec![CMatrix::zeros(1, 1)]]).unwrap();
        let c = make_constellation(Scheme::Bpsk, 2).unwrap();
        let tables = vec![product_space(&c, 1).unwrap()];
        assert!(compute_omega(&ch, &tables).is_err());
    }

    #[test]
    fn high_snr_single_user() {
        let ch = ChannelSet::new(vec![vec![CMatrix::identity(2, 2)]]).unwrap();
        let tables = tables_for(&ch, Scheme::Bpsk, 2);
        let d = high_snr_design(&ch, &tables, &[4.0], None).unwrap();
        assert_eq!(d.epsilon, vec![1.0]);
        assert!((frob_sq(&d.precoders.g[0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn high_snr_cascade_strictly_feasible() {
        for fixture in ["paper-2user-2x2", "paper-3user-2x2"] {
            let (ch, _) = load_fixture(fixture).unwrap();
            let tables = tables_for(&ch, Scheme::Bpsk, 2);
            let p = vec![100.0; ch.k];
            let d = high_snr_design(&ch, &tables, &p, None).unwrap();
            assert_eq!(d.epsilon[d.order[0]], 1.0);
            assert_eq!(d.cascade_epsilon[d.order[0]], 1.0);
            for &e in d.epsilon.iter().chain(&d.cascade_epsilon) {
                assert!(e > 0.0 && e <= 1.0);
            }
            // the selected profile keeps every joint difference resolvable
            assert!(d.min_joint_distance > 0.0);
            // every cascade inequality strict with the design margin on the
            // certificate profile
            for pos in 0..ch.k {
                let user = d.order[pos];
                let s_i = (d.cascade_epsilon[user] * p[user] / 2.0).sqrt();
                let later: f64 = (pos + 1..ch.k)
                    .map(|qpos| {
                        let uq = d.order[qpos];
                        (d.cascade_epsilon[uq] * p[uq] / 2.0).sqrt() * d.omega.max[uq]
                    })
                    .sum();
                assert!(
                    s_i * d.omega.min[user] >= CASCADE_MARGIN * later - 1e-9,
                    "position {pos}: {} vs {later}",
                    s_i * d.omega.min[user]
                );
            }
            // the selected profile's worst case is no worse than the
            // certificate's
            let scales: Vec<f64> = (0..ch.k)
                .map(|i| (d.cascade_epsilon[i] * p[i] / 2.0).sqrt())
                .collect();
            let sizes: Vec<usize> = tables.iter().map(|t| t.size()).collect();
            let diffs: Vec<Vec<Vec<crate::linalg::CVector>>> = (0..ch.k)
                .map(|j| {
                    (0..ch.k)
                        .map(|i| {
                            let imgs: Vec<_> =
                                tables[i].vectors.iter().map(|x| ch.h(j, i) * x).collect();
                            let mut out = Vec::new();
                            for m in 0..sizes[i] {
                                for n in 0..sizes[i] {
                                    out.push(&imgs[m] - &imgs[n]);
                                }
                            }
                            out
                        })
                        .collect()
                })
                .collect();
            let cascade_dist = min_joint_distance(&diffs, &sizes, &scales);
            assert!(
                d.min_joint_distance >= cascade_dist - 1e-12,
                "{} < {cascade_dist}",
                d.min_joint_distance
            );
        }
    }

    #[test]
    fn ia_loss_examples() {
        // eta = 1, BPSK on 2 antennas: M_j = 4, limit = 4/2
        let acc = ia_rate_loss(2, 2, 2, &[4, 4]).unwrap();
        assert_eq!(acc.eta, 1);
        assert_eq!(acc.rho, 8);
        assert_eq!(acc.limit, 2.0);
        // QPSK, 3 users: M_j = 16, limit = 12/2
        let acc = ia_rate_loss(3, 2, 2, &[16, 16, 16]).unwrap();
        assert_eq!(acc.limit, 6.0);
        // eta = 2 case: K=3, 1x2, BPSK => limit = (2/3) * 3
        let acc = ia_rate_loss(3, 1, 2, &[2, 2, 2]).unwrap();
        assert_eq!(acc.eta, 2);
        assert!((acc.limit - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ia_loss_requires_k_above_eta() {
        let err = ia_rate_loss(2, 1, 2, &[2, 2]).unwrap_err();
        assert!(err.to_string().contains("K > eta"), "{err}");
    }

    #[test]
    fn ia_finite_n_below_limit_and_converging() {
        let acc = ia_rate_loss(2, 2, 2, &[4, 4]).unwrap();
        let mut last = 0.0;
        for n in 1..=64 {
            let r = acc.average_rate(n);
            assert!(r <= acc.limit + 1e-12);
            assert!(r >= last - 1e-12, "not nondecreasing at n = {n}");
            last = r;
        }
        // rho = 0 cases hit the limit immediately
        let siso = ia_rate_loss(2, 1, 1, &[2, 2]).unwrap();
        assert_eq!(siso.rho, 0);
        assert!((siso.average_rate(1) - siso.limit).abs() < 1e-12);
        // small eta = 1 case converges within 5% by n = 64
        let k3 = ia_rate_loss(3, 1, 1, &[2, 2, 2]).unwrap();
        let r64 = k3.average_rate(64);
        assert!((k3.limit - r64) / k3.limit < 0.05, "r64 = {r64}, limit = {}", k3.limit);
    }
}
