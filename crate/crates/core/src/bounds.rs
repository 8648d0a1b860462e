//! Neyman–Pearson upper bound on the minimax power of any level-α test, and the
//! √(2 log k) sharpness sweep.
//!
//! The bound is the power of the most powerful test of μ = 0 against the uniform mixture
//! of the k single-violation points (0, …, −b, …, 0). Its likelihood ratio is monotone in
//! Σ_j exp(−b Z_j), which is handled in log space throughout.

use serde::{Deserialize, Serialize};

use crate::critical::{critical_value_max, upper_order_statistic};
use crate::error::{domain, Result};
use crate::normal::upper_tail;
use crate::sim::{map_blocks, Proportion, Purpose, SimConfig};

/// log Σ_j exp(−b z_j), evaluated with the max factored out.
pub fn np_log_statistic(z: &[f64], b: f64) -> f64 {
    let top = z.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(-b * x));
    if !top.is_finite() {
        return top;
    }
    let sum: f64 = z.iter().map(|&x| (-b * x - top).exp()).sum();
    top + sum.ln()
}

/// Σ_j exp(−b z_j). Overflows to `+inf` only when the true value exceeds `f64::MAX`.
pub fn np_statistic(z: &[f64], b: f64) -> Result<f64> {
    if z.is_empty() || z.iter().any(|x| !x.is_finite()) {
        return Err(domain!("Neyman-Pearson statistic needs a nonempty finite vector"));
    }
    if !(b > 0.0) {
        return Err(domain!("separation b must be positive, got {b}"));
    }
    Ok(np_log_statistic(z, b).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// β̄(b; k), simulated power of the Neyman–Pearson test at (−b, 0, …, 0).
    pub beta_bar: f64,
    /// Exact minimax power of the max test at the same (b, k); absent for α > 1/2.
    pub beta_inf: Option<f64>,
    pub b: f64,
    pub k: usize,
    pub alpha: f64,
    /// c̃_α, the simulated null quantile of the statistic.
    pub c_tilde: f64,
    pub log_c_tilde: f64,
    /// Standard error of `beta_bar`, including the error carried in from `c_tilde`.
    pub se: f64,
    pub reps: u64,
    pub seed: u64,
}

impl BoundReport {
    /// β̄ + n·se ≥ β_∞: the bound dominates the max test's minimax power.
    pub fn dominates(&self, n_se: f64) -> bool {
        self.beta_inf.is_none_or(|inf| self.beta_bar + n_se * self.se >= inf)
    }
}

/// Simulates β̄(b; k).
///
/// c̃ and β̄ come from independent streams. Every b shares the same draws, so curves in b
/// are common-random-number comparisons.
pub fn upper_bound_power(k: usize, b: f64, alpha: f64, cfg: &SimConfig) -> Result<BoundReport> {
    if k == 0 {
        return Err(domain!("k must be positive"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(domain!("separation b must be positive, got {b}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain!("alpha must lie in (0, 1), got {alpha}"));
    }
    cfg.require_reps(1)?;
    let simulate = |purpose: Purpose, shift: f64| {
        map_blocks(cfg, purpose, 0, |stream, rows| {
            let mut z = vec![0.0; k];
            (0..rows)
                .map(|_| {
                    stream.fill(&mut z);
                    z[0] -= shift;
                    np_log_statistic(&z, b)
                })
                .collect::<Vec<f64>>()
        })
        .into_iter()
        .flatten()
        .collect::<Vec<f64>>()
    };
    let log_c = upper_order_statistic(simulate(Purpose::BoundNull, 0.0), alpha)?.value;
    let hits = simulate(Purpose::BoundAlt, b).into_iter().filter(|&s| s > log_c).count() as u64;
    let prop = Proportion::from_counts(hits, cfg.reps);
    // Delta method for the estimated quantile: the statistic's alternative-to-null density
    // ratio at c̃ is the likelihood ratio c̃·exp(−b²/2)/k.
    let ratio = (log_c - 0.5 * b * b - (k as f64).ln()).exp();
    let quantile_var = ratio * ratio * alpha * (1.0 - alpha) / cfg.reps as f64;
    let se = (prop.std_error * prop.std_error + quantile_var).sqrt();
    let beta_inf = critical_value_max(k, alpha).ok().map(|c| upper_tail(c.value - b));
    Ok(BoundReport {
        beta_bar: prop.estimate,
        beta_inf,
        b,
        k,
        alpha,
        c_tilde: log_c.exp(),
        log_c_tilde: log_c,
        se,
        reps: cfg.reps,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    /// √((2 − ε) log k), below the detection boundary.
    pub b_minus: f64,
    pub beta_bar_minus: f64,
    pub beta_bar_minus_se: f64,
    /// √((2 + ε) log k), above the detection boundary.
    pub b_plus: f64,
    /// Exact max-test minimax power at `b_plus`.
    pub beta_inf_plus: f64,
}

pub fn asymptotic_sweep(alpha: f64, epsilon: f64, ks: &[usize], cfg: &SimConfig) -> Result<Vec<SweepRow>> {
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(domain!("epsilon must lie in (0, 2), got {epsilon}"));
    }
    if ks.is_empty() || ks[0] < 2 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain!("ks must be strictly increasing and at least 2"));
    }
    ks.iter()
        .map(|&k| {
            let log_k = (k as f64).ln();
            let b_minus = ((2.0 - epsilon) * log_k).sqrt();
            let b_plus = ((2.0 + epsilon) * log_k).sqrt();
            let lower = upper_bound_power(k, b_minus, alpha, cfg)?;
            let c = critical_value_max(k, alpha)?.value;
            Ok(SweepRow {
                k,
                b_minus,
                beta_bar_minus: lower.beta_bar,
                beta_bar_minus_se: lower.se,
                b_plus,
                beta_inf_plus: upper_tail(c - b_plus),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::{cdf, std_normal_quantile};

    #[test]
    fn statistic_examples() {
        assert!((np_statistic(&[0.0; 7], 2.3).unwrap() - 7.0).abs() < 1e-12);
        let v = np_statistic(&[-1.0, 0.0], 1.0).unwrap();
        assert!((v - (std::f64::consts::E + 1.0)).abs() < 1e-12);
        assert!(np_statistic(&[f64::INFINITY], 1.0).is_err());
        assert!(np_statistic(&[0.0], 0.0).is_err());
    }

    #[test]
    fn single_coordinate_is_monotone_in_z() {
        let vals: Vec<f64> = (-20..20).map(|i| np_statistic(&[i as f64 * 0.1], 1.3).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn log_space_matches_naive_sum() {
        let z = [-3.0, 0.5, 1.25, -0.75, 2.0];
        for b in [0.1, 1.0, 3.0, 10.0] {
            let naive: f64 = z.iter().map(|x: &f64| (-b * x).exp()).sum();
            let v = np_statistic(&z, b).unwrap();
            assert!(((v - naive) / naive).abs() < 1e-12);
        }
        // Far past the overflow point of the naive sum the log form stays finite.
        let l = np_log_statistic(&[-400.0, 0.0], 5.0);
        assert!((l - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn bound_is_attained_at_k1() {
        let cfg = SimConfig::new(100_000, 50);
        let r = upper_bound_power(1, 2.0, 0.05, &cfg).unwrap();
        let exact = 1.0 - cdf(std_normal_quantile(0.95).unwrap() - 2.0);
        assert!((r.beta_bar - exact).abs() <= 3.0 * r.se, "{r:?}");
        assert!((r.beta_inf.unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn standard_error_matches_seed_to_seed_spread() {
        for (k, b) in [(1, 1.0), (5, 2.0)] {
            let runs: Vec<BoundReport> =
                (0..60).map(|s| upper_bound_power(k, b, 0.05, &SimConfig::new(20_000, 1000 + s)).unwrap()).collect();
            let n = runs.len() as f64;
            let mean = runs.iter().map(|r| r.beta_bar).sum::<f64>() / n;
            let sd = (runs.iter().map(|r| (r.beta_bar - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let se = runs.iter().map(|r| r.se).sum::<f64>() / n;
            assert!((sd / se - 1.0).abs() < 0.3, "k = {k}: spread {sd}, reported {se}");
        }
    }

    #[test]
    fn bound_dominates_max_test() {
        let cfg = SimConfig::new(50_000, 51);
        for k in [2, 5, 10] {
            for b in [1.0, 2.0, 3.0] {
                let r = upper_bound_power(k, b, 0.05, &cfg).unwrap();
                assert!(r.dominates(3.0), "{r:?}");
            }
        }
    }

    #[test]
    fn vanishing_separation_gives_size() {
        let cfg = SimConfig::new(100_000, 52);
        let r = upper_bound_power(5, 1e-3, 0.05, &cfg).unwrap();
        assert!((r.beta_bar - 0.05).abs() <= 3.0 * r.se, "{r:?}");
    }

    #[test]
    fn nondecreasing_in_b() {
        let cfg = SimConfig::new(50_000, 53);
        let powers: Vec<(f64, f64)> = [0.5, 1.0, 1.5, 2.0, 3.0]
            .into_iter()
            .map(|b| {
                let r = upper_bound_power(4, b, 0.05, &cfg).unwrap();
                (r.beta_bar, r.se)
            })
            .collect();
        for w in powers.windows(2) {
            assert!(w[1].0 >= w[0].0 - 3.0 * w[0].1.hypot(w[1].1), "{powers:?}");
        }
    }

    #[test]
    fn sweep_validation_and_shape() {
        let cfg = SimConfig::new(20_000, 54);
        assert!(asymptotic_sweep(0.05, 2.5, &[10], &cfg).is_err());
        assert!(asymptotic_sweep(0.05, 0.5, &[10, 5], &cfg).is_err());
        assert!(asymptotic_sweep(0.05, 0.5, &[1, 5], &cfg).is_err());
        let rows = asymptotic_sweep(0.05, 0.5, &[10, 100], &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].beta_inf_plus > rows[0].beta_inf_plus);
        for r in &rows {
            let c = std_normal_quantile(0.95_f64.powf(1.0 / r.k as f64)).unwrap();
            assert!((r.beta_inf_plus - (1.0 - cdf(c - r.b_plus))).abs() < 1e-9);
        }
    }

    #[test]
    fn epsilon_near_two_collapses_to_size() {
        let cfg = SimConfig::new(100_000, 55);
        let rows = asymptotic_sweep(0.05, 2.0 - 1e-8, &[10, 100], &cfg).unwrap();
        for r in rows {
            assert!((r.beta_bar_minus - 0.05).abs() <= 3.0 * r.beta_bar_minus_se, "{r:?}");
        }
    }
}
