//! One-sided L^p statistics and norms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};

/// Order of a one-sided norm: a real p ≥ 1, or infinity (the max statistic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(domain!("norm order must be at least 1, got {p}"));
        }
        if p.is_infinite() {
            return Ok(NormOrder::Infinity);
        }
        Ok(NormOrder::Finite(p))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, NormOrder::Infinity)
    }

    /// 1/p, with 1/∞ = 0.
    pub fn reciprocal(&self) -> f64 {
        match *self {
            NormOrder::Finite(p) => 1.0 / p,
            NormOrder::Infinity => 0.0,
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(NormOrder::Infinity);
        }
        let p: f64 = s.parse().map_err(|_| domain!("cannot parse norm order {s:?}"))?;
        NormOrder::finite(p)
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            NormOrder::Finite(p) => serializer.serialize_f64(p),
            NormOrder::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(p) => NormOrder::finite(p),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// S_p(z, θ₀): the one-sided L^p norm of the violations (θ₀ − z_j)₊.
///
/// `+∞` coordinates never violate and contribute nothing. A `−∞` coordinate would make the
/// statistic infinite and is rejected.
pub fn s_p(z: &[f64], theta0: f64, p: NormOrder) -> Result<f64> {
    if z.is_empty() {
        return Err(domain!("statistic of an empty vector"));
    }
    if let Some(bad) = z.iter().find(|x| x.is_nan() || **x == f64::NEG_INFINITY) {
        return Err(domain!("statistic undefined for coordinate {bad}"));
    }
    if !theta0.is_finite() {
        return Err(domain!("theta0 must be finite, got {theta0}"));
    }
    Ok(statistic(z, theta0, p))
}

/// Unchecked S_p used on simulation hot paths.
#[inline]
pub(crate) fn statistic(z: &[f64], theta0: f64, p: NormOrder) -> f64 {
    match p {
        NormOrder::Infinity => z.iter().fold(0.0_f64, |m, &x| m.max(theta0 - x)),
        NormOrder::Finite(1.0) => z.iter().map(|&x| (theta0 - x).max(0.0)).sum(),
        NormOrder::Finite(p) => {
            // Factor out the largest violation so large p cannot overflow.
            let top = z.iter().fold(0.0_f64, |m, &x| m.max(theta0 - x));
            if top == 0.0 || top.is_infinite() {
                return top;
            }
            let inner: f64 = if p == 2.0 {
                z.iter()
                    .map(|&x| {
                        let v = (theta0 - x).max(0.0) / top;
                        v * v
                    })
                    .sum()
            } else {
                z.iter()
                    .map(|&x| ((theta0 - x).max(0.0) / top).powf(p))
                    .sum()
            };
            top * inner.powf(1.0 / p)
        }
    }
}

/// ‖x‖₋,p: the L^p norm of the negative parts of `x`.
pub fn one_sided_norm_neg(x: &[f64], p: NormOrder) -> Result<f64> {
    s_p(x, 0.0, p)
}

/// ‖x‖₊,p: the L^p norm of the positive parts of `x`.
pub fn one_sided_norm_pos(x: &[f64], p: NormOrder) -> Result<f64> {
    let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
    one_sided_norm_neg(&flipped, p)
}
