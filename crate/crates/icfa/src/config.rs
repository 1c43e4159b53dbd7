//! Plain-text experiment configuration.
//!
//! The format is flat `key value` lines (an optional `=` between them is
//! accepted), `#` comments, and optional `[user N]` sections that override
//! the modulation for a single user:
//!
//! ```text
//! fixture paper-2user-2x2      # or: channel_file my_channel.txt
//! modulation bpsk
//! weights 1,1
//! snr_db 0,5,10
//! method high-snr
//! samples 1000
//! seed 7
//! restarts 3
//! out sweep.csv
//!
//! [user 2]
//! modulation qpsk
//! ```
//!
//! Unknown keys are rejected with their line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::channel::{load_fixture, parse_channel_text, ChannelSet};
use crate::constellation::{product_space, Constellation, SymbolTable};
use crate::error::{Error, Result};
use crate::optimizer::OptimizerOptions;
use crate::rate::Weights;

/// Precoder construction method for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FiniteOpt,
    GaussianOpt,
    LowSnr,
    HighSnr,
    IaLoss,
    Identity,
}

impl Method {
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "finite-opt" => Some(Method::FiniteOpt),
            "gaussian-opt" => Some(Method::GaussianOpt),
            "low-snr" => Some(Method::LowSnr),
            "high-snr" => Some(Method::HighSnr),
            "ia-loss" => Some(Method::IaLoss),
            "identity" => Some(Method::Identity),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::FiniteOpt => "finite-opt",
            Method::GaussianOpt => "gaussian-opt",
            Method::LowSnr => "low-snr",
            Method::HighSnr => "high-snr",
            Method::IaLoss => "ia-loss",
            Method::Identity => "identity",
        }
    }
}

/// Where the channel matrices come from.
#[derive(Debug, Clone)]
pub enum ChannelSource {
    Fixture(String),
    File(PathBuf),
}

/// Parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: ChannelSource,
    pub modulation: String,
    pub user_modulation: BTreeMap<usize, String>,
    pub weights: Option<Vec<f64>>,
    pub snr_db: Vec<f64>,
    pub method: Method,
    pub samples: usize,
    pub seed: u64,
    pub restarts: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c_min: f64,
    pub max_outer: usize,
    pub rel_tol: f64,
    pub out: Option<PathBuf>,
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut source: Option<ChannelSource> = None;
        let mut modulation: Option<String> = None;
        let mut user_modulation = BTreeMap::new();
        let mut weights = None;
        let mut snr_db: Option<Vec<f64>> = None;
        let mut method: Option<Method> = None;
        let mut samples = 1000usize;
        let mut seed = 0u64;
        let mut restarts = 3usize;
        let defaults = OptimizerOptions::default();
        let mut alpha = defaults.alpha;
        let mut beta = defaults.beta;
        let mut c_min = defaults.c_min;
        let mut max_outer = defaults.max_outer;
        let mut rel_tol = defaults.rel_tol;
        let mut out = None;
        let mut section: Option<usize> = None;

        for (idx, raw) in text.lines().enumerate() {
            let ln = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let inner = inner
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(ln, "unterminated section header"))?
                    .trim();
                let user = inner
                    .strip_prefix("user")
                    .map(str::trim)
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&u| u >= 1)
                    .ok_or_else(|| cfg_err(ln, format!("bad section {line:?}, expected [user N]")))?;
                section = Some(user - 1);
                continue;
            }
            let (key, value) = split_kv(line).ok_or_else(|| cfg_err(ln, "expected `key value`"))?;
            if let Some(user) = section {
                match key {
                    "modulation" => {
                        user_modulation.insert(user, value.to_string());
                    }
                    other => {
                        return Err(cfg_err(ln, format!("unknown per-user key {other:?}")));
                    }
                }
                continue;
            }
            match key {
                "fixture" => source = Some(ChannelSource::Fixture(value.to_string())),
                "channel_file" => source = Some(ChannelSource::File(PathBuf::from(value))),
                "modulation" => modulation = Some(value.to_string()),
                "weights" => {
                    weights = Some(parse_list(value).map_err(|m| cfg_err(ln, m))?);
                }
                "snr_db" => {
                    snr_db = Some(parse_list(value).map_err(|m| cfg_err(ln, m))?);
                }
                "method" => {
                    method = Some(
                        Method::parse(value)
                            .ok_or_else(|| cfg_err(ln, format!("unknown method {value:?}")))?,
                    );
                }
                "samples" => samples = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "seed" => seed = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "restarts" => restarts = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "alpha" => alpha = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "beta" => beta = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "c_min" => c_min = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "max_outer" => max_outer = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "rel_tol" => rel_tol = parse_num(value).map_err(|m| cfg_err(ln, m))?,
                "out" => out = Some(PathBuf::from(value)),
                other => return Err(cfg_err(ln, format!("unknown key {other:?}"))),
            }
        }

        let source = source.ok_or_else(|| cfg_err(0, "missing `fixture` or `channel_file`"))?;
        let modulation = modulation.ok_or_else(|| cfg_err(0, "missing `modulation`"))?;
        let snr_db = snr_db.ok_or_else(|| cfg_err(0, "missing `snr_db`"))?;
        if snr_db.is_empty() {
            return Err(cfg_err(0, "snr_db grid must not be empty"));
        }
        let method = method.ok_or_else(|| cfg_err(0, "missing `method`"))?;
        if samples == 0 {
            return Err(cfg_err(0, "samples must be >= 1"));
        }
        Ok(ExperimentConfig {
            source,
            modulation,
            user_modulation,
            weights,
            snr_db,
            method,
            samples,
            seed,
            restarts,
            alpha,
            beta,
            c_min,
            max_outer,
            rel_tol,
            out,
        })
    }

    pub fn load_channel(&self) -> Result<ChannelSet> {
        match &self.source {
            ChannelSource::Fixture(name) => Ok(load_fixture(name)?.0),
            ChannelSource::File(path) => {
                let text = std::fs::read_to_string(path)?;
                parse_channel_text(&text)
            }
        }
    }

    pub fn constellations(&self, k: usize) -> Result<Vec<Constellation>> {
        (0..k)
            .map(|u| {
                let name = self.user_modulation.get(&u).unwrap_or(&self.modulation);
                Constellation::from_name(name)
            })
            .collect()
    }

    pub fn tables(&self, ch: &ChannelSet) -> Result<Vec<SymbolTable>> {
        let cons = self.constellations(ch.k)?;
        ch.n_t
            .iter()
            .zip(&cons)
            .map(|(&nt, c)| product_space(c, nt))
            .collect()
    }

    pub fn weights_for(&self, k: usize) -> Result<Weights> {
        match &self.weights {
            Some(mu) => {
                if mu.len() != k {
                    return Err(Error::DimensionMismatch(format!(
                        "{} weights for {k} users",
                        mu.len()
                    )));
                }
                Weights::new(mu.clone())
            }
            None => Ok(Weights::uniform(k)),
        }
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            alpha: self.alpha,
            beta: self.beta,
            c_min: self.c_min,
            max_outer: self.max_outer,
            rel_tol: self.rel_tol,
            restarts: self.restarts,
            seed: self.seed,
        }
    }
}

fn split_kv(line: &str) -> Option<(&str, &str)> {
    let (key, rest) = line.split_once(char::is_whitespace).or_else(|| line.split_once('='))?;
    let rest = rest.trim().trim_start_matches('=').trim();
    if rest.is_empty() {
        return None;
    }
    Some((key.trim(), rest))
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number {tok:?}"))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("bad value {value:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
fixture paper-2user-2x2
modulation bpsk
snr_db 0,5
method high-snr
";

    #[test]
    fn parse_minimal() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(cfg.snr_db, vec![0.0, 5.0]);
        assert_eq!(cfg.method, Method::HighSnr);
        assert_eq!(cfg.samples, 1000);
        let ch = cfg.load_channel().unwrap();
        assert_eq!(ch.k, 2);
        assert_eq!(cfg.tables(&ch).unwrap()[0].size(), 4);
    }

    #[test]
    fn per_user_modulation_override() {
        let text = format!("{BASE}\n[user 2]\nmodulation qpsk\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let ch = cfg.load_channel().unwrap();
        let tables = cfg.tables(&ch).unwrap();
        assert_eq!(tables[0].size(), 4);
        assert_eq!(tables[1].size(), 16);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "fixture paper-2user-2x2\nmodulation bpsk\nbogus_key 1\n";
        match ExperimentConfig::parse(text) {
            Err(Error::Config { line: 3, .. }) => {}
            other => panic!("expected config error at line 3, got {other:?}"),
        }
        let text = "fixture paper-2user-2x2\nmodulation bpsk\nsnr_db \nmethod identity\n";
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn empty_snr_grid_rejected() {
        let text = "fixture paper-2user-2x2\nmodulation bpsk\nsnr_db ,\nmethod identity\n";
        assert!(ExperimentConfig::parse(text).is_err());
        let text = "fixture paper-2user-2x2\nmodulation bpsk\nmethod identity\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("snr_db"), "{err}");
    }

    #[test]
    fn equals_separator_accepted() {
        let text = "fixture = paper-2user-2x2\nmodulation = bpsk\nsnr_db = 5\nmethod = identity\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.snr_db, vec![5.0]);
    }
}
