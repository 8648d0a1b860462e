//! Rejection rules and power: the exact minimax power over M₁*(θ₀, b), simulated power at
//! an arbitrary mean, and the worst case over one-sided L^p norm alternatives.

use serde::{Deserialize, Serialize};

use crate::critical::{check_alpha, CriticalValue};
use crate::error::{config, domain, Result};
use crate::model::ModelParams;
use crate::normal::upper_tail;
use crate::sim::{map_blocks, Proportion, Purpose, SimConfig};
use crate::stats::{statistic, NormOrder};

/// An L^p test: reject H₀,θ₀ when S_p(Z, θ₀) exceeds the least-favorable critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub p: NormOrder,
    pub alpha: f64,
    pub critical: CriticalValue,
}

impl TestSpec {
    pub fn new(critical: CriticalValue) -> Self {
        Self { p: critical.p, alpha: critical.alpha, critical }
    }

    pub fn k(&self) -> usize {
        self.critical.k
    }

    pub fn label(&self) -> String {
        format!("L{}", self.p)
    }

    pub(crate) fn check_k(&self, k: usize) -> Result<()> {
        if k != self.k() {
            return Err(config!("test was calibrated for k = {}, used with k = {k}", self.k()));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn rejects(&self, z: &[f64], theta0: f64) -> bool {
        statistic(z, theta0, self.p) > self.critical.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub estimate: f64,
    /// Zero for exact formulas.
    pub std_error: f64,
    pub reps: Option<u64>,
    #[serde(with = "crate::report::extended_vec_opt")]
    pub worst_case_mu: Option<Vec<f64>>,
}

pub fn reject(test: &TestSpec, z: &[f64], theta0: f64) -> bool {
    test.rejects(z, theta0)
}

/// Minimax power over M₁*(θ₀, b): 1 − Φ(c_{p,α} − b), the same for every θ₀.
pub fn minimax_power_exact(test: &TestSpec, b: f64, k: usize) -> Result<f64> {
    test.check_k(k)?;
    check_alpha(test.alpha)?;
    if !(b > 0.0) {
        return Err(domain!("separation b must be positive, got {b}"));
    }
    Ok(upper_tail(test.critical.value - b))
}

/// Simulated rejection probability P_μ(S_p(Z, θ₀) > c).
pub fn power_at(test: &TestSpec, mu: &ModelParams, theta0: f64, cfg: &SimConfig) -> Result<PowerReport> {
    power_on_stream(test, mu, theta0, cfg, Purpose::Power, 0)
}

pub(crate) fn power_on_stream(
    test: &TestSpec,
    mu: &ModelParams,
    theta0: f64,
    cfg: &SimConfig,
    purpose: Purpose,
    sub: u64,
) -> Result<PowerReport> {
    test.check_k(mu.k())?;
    cfg.require_reps(1)?;
    let k = mu.k();
    let hits: u64 = map_blocks(cfg, purpose, sub, |stream, rows| {
        let mut z = vec![0.0; k];
        let mut hits = 0u64;
        for _ in 0..rows {
            mu.fill_z(stream, &mut z);
            hits += test.rejects(&z, theta0) as u64;
        }
        hits
    })
    .into_iter()
    .sum();
    let prop = Proportion::from_counts(hits, cfg.reps);
    Ok(PowerReport {
        estimate: prop.estimate,
        std_error: prop.std_error,
        reps: Some(cfg.reps),
        worst_case_mu: None,
    })
}

/// Which sparsity levels m of the candidate family to search.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityGrid {
    #[default]
    All,
    Only(Vec<usize>),
}

impl SparsityGrid {
    pub fn levels(&self, k: usize) -> Result<Vec<usize>> {
        let levels = match self {
            SparsityGrid::All => (1..=k).collect(),
            SparsityGrid::Only(ms) => ms.clone(),
        };
        if levels.is_empty() || levels.iter().any(|&m| m == 0 || m > k) {
            return Err(domain!("sparsity levels must be nonempty and within 1..={k}"));
        }
        Ok(levels)
    }
}

/// Member `m` of the candidate family on the sphere ‖μ‖₋,p = b: m coordinates at
/// −b·m^{−1/p}, the rest slack.
pub fn lp_alternative(k: usize, b: f64, p_alt: NormOrder, m: usize) -> Result<ModelParams> {
    if m == 0 || m > k {
        return Err(domain!("sparsity {m} outside 1..={k}"));
    }
    let level = -b * (m as f64).powf(-p_alt.reciprocal());
    let mut mu = vec![f64::INFINITY; k];
    mu[..m].fill(level);
    ModelParams::new(mu)
}

/// Minimum simulated power over the sparse-to-dense family on ‖μ‖₋,p_alt = b (θ₀ = 0).
///
/// This is an upper bound on the minimax power over M_{1,p_alt}(b), since only the family
/// is searched. Member m always draws from sub-stream m, so two tests evaluated with the
/// same configuration see identical samples.
pub fn minimax_power_lp_alt(
    test: &TestSpec,
    b: f64,
    p_alt: NormOrder,
    k: usize,
    cfg: &SimConfig,
    grid: &SparsityGrid,
) -> Result<PowerReport> {
    test.check_k(k)?;
    if !(b > 0.0) {
        return Err(domain!("separation b must be positive, got {b}"));
    }
    let mut worst: Option<(PowerReport, ModelParams)> = None;
    for m in grid.levels(k)? {
        let mu = lp_alternative(k, b, p_alt, m)?;
        let report = power_on_stream(test, &mu, 0.0, cfg, Purpose::Power, m as u64)?;
        if worst.as_ref().is_none_or(|(w, _)| report.estimate < w.estimate) {
            worst = Some((report, mu));
        }
    }
    let (mut report, mu) = worst.expect("grid is nonempty");
    report.worst_case_mu = Some(mu.mu().to_vec());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{critical_value_max, critical_value_mc};
    use crate::normal::{cdf, std_normal_quantile};

    fn max_test(k: usize) -> TestSpec {
        TestSpec::new(critical_value_max(k, 0.05).unwrap())
    }

    fn fin(p: f64) -> NormOrder {
        NormOrder::finite(p).unwrap()
    }

    #[test]
    fn rejection_examples() {
        let test = max_test(3);
        let c = test.critical.value;
        assert!(!reject(&test, &[0.7, 0.7, 0.7], 0.7));
        assert!(reject(&test, &[1.0, -c - 0.001, 2.0], 0.0));
        assert!(!reject(&test, &[1.0, -c + 0.001, 2.0], 0.0));
        let inf = f64::INFINITY;
        let mc = critical_value_mc(3, 0.05, fin(1.0), &SimConfig::new(20_000, 1)).unwrap();
        for t in [test, TestSpec::new(mc)] {
            assert!(reject(&t, &[inf, -1e6, inf], 0.0));
        }
    }

    #[test]
    fn exact_power_examples() {
        let test = max_test(1);
        let c = test.critical.value;
        assert_eq!(minimax_power_exact(&test, c, 1).unwrap(), 0.5);
        let z95 = std_normal_quantile(0.95).unwrap();
        let oracle = 1.0 - cdf(-z95);
        let got = minimax_power_exact(&test, 2.0 * 1.644_853_6, 1).unwrap();
        assert!((got - oracle).abs() < 1e-6 && (got - 0.95).abs() < 1e-6);
        let got = minimax_power_exact(&max_test(10), 3.0, 10).unwrap();
        assert!((got - (1.0 - cdf(2.5679 - 3.0))).abs() < 5e-4);
        assert!((got - 0.667).abs() < 1e-3, "{got}");
        assert!(minimax_power_exact(&test, 0.0, 1).is_err());
        assert!(minimax_power_exact(&test, 1.0, 2).is_err());
    }

    #[test]
    fn simulated_power_examples() {
        let cfg = SimConfig::new(100_000, 4);
        let test = max_test(5);
        let size = power_at(&test, &ModelParams::constant(5, 1.0).unwrap(), 1.0, &cfg).unwrap();
        assert!((size.estimate - 0.05).abs() <= 3.0 * size.std_error, "{size:?}");
        let lf = ModelParams::least_favorable(5, 1.0, 2.0).unwrap();
        let pw = power_at(&test, &lf, 1.0, &cfg).unwrap();
        let exact = minimax_power_exact(&test, 2.0, 5).unwrap();
        assert!((pw.estimate - exact).abs() <= 3.0 * pw.std_error);
        let mut mu = vec![f64::INFINITY; 5];
        mu[2] = 50.0;
        let deep = power_at(&test, &ModelParams::new(mu).unwrap(), 0.0, &cfg).unwrap();
        assert_eq!(deep.estimate, 0.0);
    }

    #[test]
    fn location_invariance_draw_for_draw() {
        let cfg = SimConfig::new(20_000, 9);
        let test = max_test(4);
        let mu = ModelParams::new(vec![0.3, -0.5, 1.0, 2.0]).unwrap();
        let a = power_at(&test, &mu, 0.0, &cfg).unwrap();
        let b = power_at(&test, &mu.shifted(0.5), 0.5, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn family_construction() {
        let mu = lp_alternative(4, 2.0, fin(1.0), 4).unwrap();
        assert_eq!(mu.mu(), &[-0.5; 4]);
        let mu = lp_alternative(4, 2.0, fin(2.0), 2).unwrap();
        let norm = crate::stats::one_sided_norm_neg(mu.mu(), fin(2.0)).unwrap();
        assert!((norm - 2.0).abs() < 1e-12);
        assert_eq!(mu.mu()[2], f64::INFINITY);
        assert!(lp_alternative(4, 2.0, fin(1.0), 5).is_err());
    }

    #[test]
    fn lp_alt_infinity_reduces_to_exact() {
        let cfg = SimConfig::new(100_000, 13);
        let test = max_test(6);
        let r = minimax_power_lp_alt(&test, 2.0, NormOrder::Infinity, 6, &cfg, &SparsityGrid::All).unwrap();
        let exact = minimax_power_exact(&test, 2.0, 6).unwrap();
        assert!((r.estimate - exact).abs() <= 3.0 * r.std_error);
        assert_eq!(r.worst_case_mu.unwrap().iter().filter(|m| m.is_finite()).count(), 1);
    }

    #[test]
    fn lp_alt_single_coordinate() {
        let cfg = SimConfig::new(100_000, 14);
        let exact = 1.0 - cdf(std_normal_quantile(0.95).unwrap() - 1.5);
        for p_alt in [fin(1.0), fin(3.0), NormOrder::Infinity] {
            let r = minimax_power_lp_alt(&max_test(1), 1.5, p_alt, 1, &cfg, &SparsityGrid::All).unwrap();
            assert!((r.estimate - exact).abs() <= 3.0 * r.std_error);
        }
    }

    #[test]
    fn restricted_grid_never_lowers_the_minimum() {
        let cfg = SimConfig::new(20_000, 15);
        let test = max_test(5);
        let full = minimax_power_lp_alt(&test, 3.0, fin(1.0), 5, &cfg, &SparsityGrid::All).unwrap();
        let some = minimax_power_lp_alt(&test, 3.0, fin(1.0), 5, &cfg, &SparsityGrid::Only(vec![1, 2])).unwrap();
        assert!(full.estimate <= some.estimate);
        assert!(minimax_power_lp_alt(&test, 3.0, fin(1.0), 5, &cfg, &SparsityGrid::Only(vec![])).is_err());
    }
}
