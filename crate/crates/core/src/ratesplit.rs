//! Single-tier rate splitting and the orthogonal (TDMA) baseline.
//!
//! Every user decodes the common stream first, treating all private streams
//! as noise (including its own), then removes it and decodes its private
//! stream against the residual multi-user interference. The common rate is
//! limited by the weakest user.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::precoding::PrecoderSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Oma,
    Rs,
    Hrs,
    HrsOpt,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Oma, Scheme::Rs, Scheme::Hrs, Scheme::HrsOpt];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Oma => "OMA",
            Scheme::Rs => "RS",
            Scheme::Hrs => "HRS",
            Scheme::HrsOpt => "HRS_OPT",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OMA" => Ok(Scheme::Oma),
            "RS" => Ok(Scheme::Rs),
            "HRS" => Ok(Scheme::Hrs),
            "HRS_OPT" | "HRS-OPT" => Ok(Scheme::HrsOpt),
            other => Err(Error::invalid("scheme", format!("unknown scheme {other:?}"))),
        }
    }
}

/// Per-stream rate decomposition, bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBreakdown {
    pub scheme: Scheme,
    pub r_outer_common: f64,
    /// One entry per group; single-tier RS reports its common rate here.
    pub r_inner_common: Vec<f64>,
    pub r_private: Vec<f64>,
    pub sum_rate: f64,
}

impl RateBreakdown {
    pub fn new(scheme: Scheme, r_outer_common: f64, r_inner_common: Vec<f64>, r_private: Vec<f64>) -> Self {
        let sum_rate = r_outer_common + r_inner_common.iter().sum::<f64>() + r_private.iter().sum::<f64>();
        RateBreakdown {
            scheme,
            r_outer_common,
            r_inner_common,
            r_private,
            sum_rate,
        }
    }

    pub fn inner_common_total(&self) -> f64 {
        self.r_inner_common.iter().sum()
    }

    pub fn private_total(&self) -> f64 {
        self.r_private.iter().sum()
    }

    /// Absolute sum rate in bit/s for a receiver bandwidth in Hz.
    pub fn sum_rate_bps(&self, bandwidth: f64) -> f64 {
        self.sum_rate * bandwidth
    }
}

pub(crate) fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Squared alignment `(h_k . w)^2`.
pub(crate) fn gain2(h: &DMatrix<f64>, k: usize, w: &DVector<f64>) -> f64 {
    let x = h.row(k).dot(&w.transpose());
    x * x
}

fn gain2_col(h: &DMatrix<f64>, k: usize, w: &DMatrix<f64>, j: usize) -> f64 {
    let x = h.row(k).transpose().dot(&w.column(j));
    x * x
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsPowerSplit {
    pub total_power: f64,
    pub alpha: f64,
    pub p_common: f64,
    pub p_private: Vec<f64>,
}

/// Uniform split: each private stream gets `P alpha / K`, the common stream
/// the remaining `P (1 - alpha)`.
pub fn rs_split(total_power: f64, alpha: f64, k: usize) -> Result<RsPowerSplit> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    if k == 0 {
        return Err(Error::invalid("K", "at least one user required"));
    }
    if !(total_power > 0.0 && total_power.is_finite()) {
        return Err(Error::invalid("P", format!("must be > 0, got {total_power}")));
    }
    Ok(RsPowerSplit {
        total_power,
        alpha,
        p_common: total_power * (1.0 - alpha),
        p_private: vec![total_power * alpha / k as f64; k],
    })
}

/// SINR of the common stream at user `k`. The denominator counts every
/// private stream, user `k`'s own included.
pub fn rs_sinr_common(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    w_c: &DVector<f64>,
    split: &RsPowerSplit,
    noise_var: &DVector<f64>,
    k: usize,
) -> f64 {
    let interference: f64 = (0..w.ncols())
        .map(|j| split.p_private[j] * gain2_col(h, k, w, j))
        .sum();
    split.p_common * gain2(h, k, w_c) / (interference + noise_var[k])
}

/// SINR of user `k`'s private stream after the common stream is removed.
pub fn rs_sinr_private(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    split: &RsPowerSplit,
    noise_var: &DVector<f64>,
    k: usize,
) -> f64 {
    let interference: f64 = (0..w.ncols())
        .filter(|&j| j != k)
        .map(|j| split.p_private[j] * gain2_col(h, k, w, j))
        .sum();
    split.p_private[k] * gain2_col(h, k, w, k) / (interference + noise_var[k])
}

pub fn rs_rates(
    h: &DMatrix<f64>,
    precoders: &PrecoderSet,
    split: &RsPowerSplit,
    noise_var: &DVector<f64>,
) -> RateBreakdown {
    let k = h.nrows();
    let gamma_c = (0..k)
        .map(|u| rs_sinr_common(h, &precoders.private, &precoders.common, split, noise_var, u))
        .fold(f64::INFINITY, f64::min);
    let private = (0..k)
        .map(|u| rate(rs_sinr_private(h, &precoders.private, split, noise_var, u)))
        .collect();
    RateBreakdown::new(Scheme::Rs, 0.0, vec![rate(gamma_c)], private)
}

/// Equal-time TDMA: user `k` gets the full power with a matched filter for a
/// `1/K` share of the time.
pub fn oma_rates(h: &DMatrix<f64>, total_power: f64, noise_var: &DVector<f64>) -> RateBreakdown {
    let k = h.nrows();
    let share = 1.0 / k as f64;
    let private = (0..k)
        .map(|u| share * rate(total_power * h.row(u).norm_squared() / noise_var[u]))
        .collect();
    RateBreakdown::new(Scheme::Oma, 0.0, vec![], private)
}
