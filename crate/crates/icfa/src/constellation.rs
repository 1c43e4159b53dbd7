//! Modulation alphabets and the enumerated per-user transmit-vector spaces.
//!
//! Every expectation and gradient in this crate runs over the joint product
//! space of all users' transmit vectors, so these tables are built once and
//! shared. All alphabets are zero-mean with unit average energy, which gives
//! the exact identities `sum_m x_m = 0` and `sum_m x_m x_m^H = M I` used by
//! the low-SNR expansions.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, CVector};
use crate::ENUMERATION_CAP;

/// Modulation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bpsk,
    Qpsk,
    Psk,
    Pam,
    Qam,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Bpsk => "bpsk",
            Scheme::Qpsk => "qpsk",
            Scheme::Psk => "psk",
            Scheme::Pam => "pam",
            Scheme::Qam => "qam",
        }
    }
}

/// A scalar modulation alphabet: `order` distinct complex points with zero
/// mean and unit average energy.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub scheme: Scheme,
    pub order: usize,
    pub points: Vec<Complex64>,
}

/// Enumerated product space of one user's transmit vectors, indexed
/// lexicographically over antenna positions (first antenna most significant).
#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub n_t: usize,
    pub order: usize,
    pub vectors: Vec<CVector>,
}

impl SymbolTable {
    pub fn size(&self) -> usize {
        self.vectors.len()
    }

    pub fn bits_per_vector(&self) -> usize {
        self.n_t * self.order.trailing_zeros() as usize
    }
}

/// Precomputed pairwise differences `x_m - x_n` of a symbol table.
#[derive(Debug, Clone)]
pub struct DifferenceTable {
    pub size: usize,
    diffs: Vec<CVector>,
}

impl DifferenceTable {
    pub fn new(table: &SymbolTable) -> Self {
        let size = table.size();
        let mut diffs = Vec::with_capacity(size * size);
        for m in 0..size {
            for n in 0..size {
                diffs.push(&table.vectors[m] - &table.vectors[n]);
            }
        }
        DifferenceTable { size, diffs }
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> &CVector {
        &self.diffs[m * self.size + n]
    }
}

fn is_power_of_two(x: usize) -> bool {
    x >= 2 && x.is_power_of_two()
}

/// Builds a unit-energy, zero-mean alphabet for the given scheme and order.
///
/// Supported orders: BPSK 2, QPSK 4, PSK/PAM any power of two >= 2,
/// QAM square powers of two (4, 16, 64, ...).
pub fn make_constellation(scheme: Scheme, order: usize) -> Result<Constellation> {
    let points = match scheme {
        Scheme::Bpsk => {
            if order != 2 {
                return Err(Error::UnsupportedModulation(format!(
                    "bpsk requires order 2, got {order}"
                )));
            }
            vec![c64(1.0, 0.0), c64(-1.0, 0.0)]
        }
        Scheme::Qpsk => {
            if order != 4 {
                return Err(Error::UnsupportedModulation(format!(
                    "qpsk requires order 4, got {order}"
                )));
            }
            // Index order: (I sign, Q sign) = (+,+), (+,-), (-,+), (-,-).
            let a = std::f64::consts::FRAC_1_SQRT_2;
            vec![c64(a, a), c64(a, -a), c64(-a, a), c64(-a, -a)]
        }
        Scheme::Psk => {
            if !is_power_of_two(order) {
                return Err(Error::UnsupportedModulation(format!(
                    "psk order must be a power of two >= 2, got {order}"
                )));
            }
            (0..order)
                .map(|q| {
                    let phi = 2.0 * std::f64::consts::PI * q as f64 / order as f64;
                    c64(phi.cos(), phi.sin())
                })
                .collect()
        }
        Scheme::Pam => {
            if !is_power_of_two(order) {
                return Err(Error::UnsupportedModulation(format!(
                    "pam order must be a power of two >= 2, got {order}"
                )));
            }
            pam_levels(order).into_iter().map(|l| c64(l, 0.0)).collect()
        }
        Scheme::Qam => {
            let side = (order as f64).sqrt().round() as usize;
            if !is_power_of_two(order) || side * side != order || !is_power_of_two(side) {
                return Err(Error::UnsupportedModulation(format!(
                    "qam order must be a square power of two (4, 16, 64, ...), got {order}"
                )));
            }
            let levels = pam_levels(side);
            // Mean energy doubles when the same levels fill both axes; the
            // per-axis levels are already unit energy, so rescale by 1/sqrt(2).
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut pts = Vec::with_capacity(order);
            for &i_lvl in &levels {
                for &q_lvl in &levels {
                    pts.push(c64(s * i_lvl, s * q_lvl));
                }
            }
            pts
        }
    };
    let c = Constellation {
        scheme,
        order,
        points,
    };
    debug_assert!(c.check_invariants(1e-12));
    Ok(c)
}

/// Ascending PAM levels {-(Q-1), ..., -1, 1, ..., Q-1} scaled to unit energy.
fn pam_levels(order: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..order).map(|k| (2 * k) as f64 - (order - 1) as f64).collect();
    let energy = raw.iter().map(|l| l * l).sum::<f64>() / order as f64;
    let s = 1.0 / energy.sqrt();
    raw.into_iter().map(|l| l * s).collect()
}

impl Constellation {
    /// Parses config-file names such as "bpsk", "qpsk", "qam16", "psk8", "pam4".
    pub fn from_name(name: &str) -> Result<Constellation> {
        let name = name.trim().to_ascii_lowercase();
        match name.as_str() {
            "bpsk" => return make_constellation(Scheme::Bpsk, 2),
            "qpsk" => return make_constellation(Scheme::Qpsk, 4),
            _ => {}
        }
        for (prefix, scheme) in [("qam", Scheme::Qam), ("psk", Scheme::Psk), ("pam", Scheme::Pam)] {
            if let Some(rest) = name.strip_prefix(prefix) {
                let order: usize = rest
                    .parse()
                    .map_err(|_| Error::UnsupportedModulation(name.clone()))?;
                return make_constellation(scheme, order);
            }
        }
        Err(Error::UnsupportedModulation(name))
    }

    /// Zero mean, unit energy, all points distinct.
    pub fn check_invariants(&self, tol: f64) -> bool {
        let q = self.points.len() as f64;
        let mean = self.points.iter().sum::<Complex64>() / q;
        let energy = self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / q;
        if mean.norm() > tol || (energy - 1.0).abs() > tol {
            return false;
        }
        for (i, a) in self.points.iter().enumerate() {
            for b in self.points.iter().skip(i + 1) {
                if (a - b).norm() < tol {
                    return false;
                }
            }
        }
        true
    }

    /// Bits carried by one point.
    pub fn bits_per_point(&self) -> usize {
        self.order.trailing_zeros() as usize
    }
}

/// Enumerates the `order^n_t` transmit vectors of one user in lexicographic
/// order over antenna positions.
pub fn product_space(c: &Constellation, n_t: usize) -> Result<SymbolTable> {
    if n_t < 1 {
        return Err(Error::InvalidArgument("n_t must be >= 1".into()));
    }
    let mut size: u128 = 1;
    for _ in 0..n_t {
        size *= c.order as u128;
        if size > ENUMERATION_CAP as u128 {
            return Err(Error::CapExceeded {
                required: size,
                cap: ENUMERATION_CAP,
            });
        }
    }
    let size = size as usize;
    let mut vectors = Vec::with_capacity(size);
    for p in 0..size {
        let mut v = DVector::zeros(n_t);
        let mut rem = p;
        for a in (0..n_t).rev() {
            v[a] = c.points[rem % c.order];
            rem /= c.order;
        }
        vectors.push(v);
    }
    Ok(SymbolTable {
        n_t,
        order: c.order,
        vectors,
    })
}

/// Checks the product over all users of table sizes against the global cap.
pub fn check_joint_cap(tables: &[SymbolTable]) -> Result<()> {
    let mut prod: u128 = 1;
    for t in tables {
        prod *= t.size() as u128;
    }
    if prod > ENUMERATION_CAP as u128 {
        return Err(Error::CapExceeded {
            required: prod,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}
