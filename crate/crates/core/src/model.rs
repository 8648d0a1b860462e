//! The Gaussian moment inequality model: mean vectors, the identified set, and the
//! aggregation of raw observations into the standardized Z statistic.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::normal::{GaussianStream, StreamSeed};

/// Mean vector μ of `Z ~ N(μ, I_k)`. A `+∞` entry encodes a slack moment that can never
/// be violated; `−∞` is not allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(with = "crate::report::extended_vec")]
    mu: Vec<f64>,
}

impl ModelParams {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(domain!("model needs at least one moment"));
        }
        if mu.iter().any(|m| m.is_nan() || *m == f64::NEG_INFINITY) {
            return Err(domain!("mean components must be finite or +inf"));
        }
        if !mu.iter().any(|m| m.is_finite()) {
            return Err(domain!("at least one mean component must be finite"));
        }
        Ok(Self { mu })
    }

    pub fn constant(k: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; k])
    }

    /// `(θ₀ − b, +∞, …, +∞)`: one binding moment at distance `b` below `θ₀`.
    pub fn least_favorable(k: usize, theta0: f64, b: f64) -> Result<Self> {
        if k == 0 {
            return Err(domain!("model needs at least one moment"));
        }
        let mut mu = vec![f64::INFINITY; k];
        mu[0] = theta0 - b;
        Self::new(mu)
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// μ + c·1.
    pub fn shifted(&self, c: f64) -> Self {
        Self { mu: self.mu.iter().map(|m| m + c).collect() }
    }

    /// θ̄(μ) = min_j μ(j), the upper end of the identified set (−∞, θ̄].
    pub fn theta_bar(&self) -> f64 {
        self.mu.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Whether θ₀ lies in the identified set, i.e. the null `min_j μ(j) ≥ θ₀` holds.
    pub fn in_null(&self, theta0: f64) -> bool {
        self.theta_bar() >= theta0
    }

    /// Writes one draw of Z into `out`. One normal is consumed per coordinate, slack or
    /// not, so models of equal dimension stay draw-for-draw aligned.
    #[inline]
    pub(crate) fn fill_z(&self, stream: &mut GaussianStream, out: &mut [f64]) {
        for (z, &m) in out.iter_mut().zip(&self.mu) {
            let e = stream.next_normal();
            *z = if m == f64::INFINITY { f64::INFINITY } else { m + e };
        }
    }
}

/// θ̄ for a raw mean vector; fails when no component is finite.
pub fn theta_bar(mu: &[f64]) -> Result<f64> {
    ModelParams::new(mu.to_vec()).map(|m| m.theta_bar())
}

pub fn in_null(params: &ModelParams, theta0: f64) -> bool {
    params.in_null(theta0)
}

pub fn sample_z(params: &ModelParams, seed: StreamSeed) -> Vec<f64> {
    let mut out = vec![0.0; params.k()];
    params.fill_z(&mut seed.stream(), &mut out);
    out
}

/// Observations `(label, value)` from a balanced design with labels in `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub labels: Vec<usize>,
    pub values: Vec<f64>,
    pub k: usize,
}

impl RawSample {
    pub fn new(labels: Vec<usize>, values: Vec<f64>, k: usize) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} labels but {} values",
                labels.len(),
                values.len()
            )));
        }
        Ok(Self { labels, values, k })
    }
}

/// Z_j = mean of the values carrying label j. Requires exactly n/k observations per label.
pub fn aggregate(raw: &RawSample) -> Result<Vec<f64>> {
    let k = raw.k;
    let n = raw.labels.len();
    if k == 0 || n == 0 {
        return Err(Error::Validation("empty sample or zero labels".into()));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::Validation(format!("{n} observations cannot be split evenly over {k} labels")));
    }
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&label, &w) in raw.labels.iter().zip(&raw.values) {
        if label == 0 || label > k {
            return Err(Error::Validation(format!("label {label} outside 1..={k}")));
        }
        if !w.is_finite() {
            return Err(Error::Validation(format!("non-finite observation {w}")));
        }
        sums[label - 1] += w;
        counts[label - 1] += 1;
    }
    let per = n / k;
    if let Some(j) = counts.iter().position(|&c| c != per) {
        return Err(Error::Validation(format!(
            "unbalanced design: label {} has {} observations, expected {per}",
            j + 1,
            counts[j]
        )));
    }
    Ok(sums.into_iter().map(|s| s / per as f64).collect())
}
