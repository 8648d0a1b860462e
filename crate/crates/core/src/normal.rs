//! Standard normal kernels and the deterministic Gaussian stream every simulation draws from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Identifies one reproducible Gaussian stream.
///
/// The master seed keys a ChaCha8 generator and `stream_id` selects one of its 2^64
/// independent keystreams, so distinct pairs never overlap and equal pairs replay exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed {
    pub master: u64,
    pub stream_id: u64,
}

impl StreamSeed {
    pub fn new(master: u64, stream_id: u64) -> Self {
        Self { master, stream_id }
    }

    pub fn stream(&self) -> GaussianStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream_id);
        GaussianStream { rng }
    }
}

/// Sequential standard normal draws from one [`StreamSeed`].
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.rng.sample(StandardNormal);
        }
    }
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x) without argument checks; NaN propagates.
#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-x / SQRT_2)
    }
}

/// Standard normal cdf. Infinite arguments saturate to 0 or 1; NaN is rejected.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(domain!("normal cdf of NaN"));
    }
    Ok(cdf(x))
}

/// Upper tail 1 − Φ(x), accurate where Φ(x) rounds to one.
#[inline]
pub(crate) fn upper_tail(x: f64) -> f64 {
    cdf(-x)
}

/// Φ⁻¹(q) for q ∈ (0, 1). Never returns an infinite value.
pub fn std_normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain!("normal quantile requires q in (0, 1), got {q}"));
    }
    Ok(quantile(q))
}

/// Φ⁻¹(1 − tail), computed from the tail probability so that tiny tails keep full precision.
pub fn std_normal_upper_quantile(tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(domain!("upper quantile requires a tail probability in (0, 1), got {tail}"));
    }
    Ok(-quantile(tail))
}

fn quantile(q: f64) -> f64 {
    // erfc_inv seeds the root; Halley steps polish it against `cdf`.
    let mut x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * q);
    for _ in 0..2 {
        let density = std_normal_pdf(x);
        if density == 0.0 {
            break;
        }
        // Φ(x) − q, evaluated on whichever tail keeps precision.
        let e = if q < 0.5 { cdf(x) - q } else { (1.0 - q) - upper_tail(x) };
        let u = e / density;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Draws `k` i.i.d. standard normals from a fresh stream.
pub fn sample_gaussian_vector(seed: StreamSeed, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(domain!("cannot sample a zero-dimensional vector"));
    }
    let mut out = vec![0.0; k];
    seed.stream().fill(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule of the density on [0, x], plus one half.
    fn cdf_by_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let mut acc = std_normal_pdf(0.0) + std_normal_pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * std_normal_pdf(i as f64 * h);
        }
        0.5 + acc * h / 3.0
    }

    fn quantile_by_bisection(q: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert!((std_normal_cdf(40.0).unwrap() - 1.0).abs() <= 1e-12);
        let x = 1.644_853_626_951_472_2;
        let oracle = cdf_by_quadrature(x);
        assert!((oracle - 0.95).abs() < 1e-12, "oracle {oracle}");
        assert!((std_normal_cdf(x).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn cdf_matches_quadrature_on_a_grid() {
        for i in 0..=60 {
            let x = -6.0 + 0.2 * i as f64;
            let oracle = if x >= 0.0 { cdf_by_quadrature(x) } else { 1.0 - cdf_by_quadrature(-x) };
            assert!((cdf(x) - oracle).abs() <= 1e-12, "x = {x}");
        }
    }

    #[test]
    fn cdf_infinities_and_nan() {
        assert_eq!(std_normal_cdf(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(std_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn quantile_reference_points() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        let oracle = quantile_by_bisection(0.95);
        let q = std_normal_quantile(0.95).unwrap();
        assert!((q - oracle).abs() < 1e-12);
        assert!((q - 1.644_853_626_951_472_2).abs() < 1e-12);
        for q in [2f64.powi(-30), 0.001, 0.025, 0.3, 0.77] {
            let s = std_normal_quantile(q).unwrap() + std_normal_quantile(1.0 - q).unwrap();
            assert!(s.abs() <= 1e-12, "q = {q}, sum {s}");
        }
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        for q in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(q).is_err());
        }
        assert!(std_normal_upper_quantile(0.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..1000 {
            let q = i as f64 / 1000.0;
            let x = std_normal_quantile(q).unwrap();
            assert!((cdf(x) - q).abs() <= 1e-12, "q = {q}");
        }
        // Above zero the round trip goes through the upper tail: Φ(6) = 1 − 1e-9 cannot
        // carry 1e-9 accuracy in x once rounded to a double.
        for i in 0..=120 {
            let x = -6.0 + 0.1 * i as f64;
            let back = if x <= 0.0 {
                std_normal_quantile(cdf(x)).unwrap()
            } else {
                std_normal_upper_quantile(upper_tail(x)).unwrap()
            };
            assert!((back - x).abs() <= 1e-9, "x = {x}, back {back}");
        }
    }

    #[test]
    fn upper_quantile_tiny_tail() {
        let t = 1e-20;
        let x = std_normal_upper_quantile(t).unwrap();
        assert!(((upper_tail(x) - t) / t).abs() < 1e-10);
    }

    #[test]
    fn sampler_determinism_and_streams() {
        let a = sample_gaussian_vector(StreamSeed::new(7, 3), 16).unwrap();
        let b = sample_gaussian_vector(StreamSeed::new(7, 3), 16).unwrap();
        let c = sample_gaussian_vector(StreamSeed::new(7, 4), 16).unwrap();
        let d = sample_gaussian_vector(StreamSeed::new(8, 3), 16).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert!(sample_gaussian_vector(StreamSeed::new(1, 1), 0).is_err());
    }

    #[test]
    fn sampler_moments() {
        let n = 1_000_000;
        let z = sample_gaussian_vector(StreamSeed::new(2024, 0), n).unwrap();
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 6e-3, "var {var}");
    }

    #[test]
    fn sampler_kolmogorov_smirnov() {
        let n = 100_000;
        let mut z = sample_gaussian_vector(StreamSeed::new(99, 5), n).unwrap();
        z.sort_by(f64::total_cmp);
        let d = z
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        // Asymptotic KS critical value at level 1e-4: sqrt(-ln(1e-4 / 2) / 2) / sqrt(n).
        let crit = (-(0.5e-4_f64).ln() / 2.0).sqrt() / (n as f64).sqrt();
        assert!(d < crit, "D = {d}, critical {crit}");
    }
}
