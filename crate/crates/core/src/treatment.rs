//! Testing whether anyone should be treated: H₀ τ ≤ 0, with alternatives separated by
//! the welfare gain w*(τ) = (1/k)‖τ‖₊,₁ rather than by a parameter of interest.
//!
//! The null is the moment inequality null after a sign flip, so every test here is an
//! L^p test applied to −Z at θ₀ = 0.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::normal::{GaussianStream, StreamSeed};
use crate::power::{PowerReport, SparsityGrid, TestSpec};
use crate::sim::{map_blocks, Proportion, Purpose, SimConfig};

/// Stratum-level treatment effects τ(j). `−∞` encodes a stratum where treatment is
/// strongly harmful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentModel {
    #[serde(with = "crate::report::extended_vec")]
    tau: Vec<f64>,
}

impl TreatmentModel {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(domain!("treatment model needs at least one stratum"));
        }
        if tau.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
            return Err(domain!("treatment effects must be finite or -inf"));
        }
        Ok(Self { tau })
    }

    pub fn k(&self) -> usize {
        self.tau.len()
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn welfare_gain(&self) -> f64 {
        welfare_gain(self)
    }

    /// Z_j = τ(j) − ε_j. This is −Z' for the moment model at μ = −τ under the same draws,
    /// which keeps the two problems aligned draw for draw.
    #[inline]
    pub(crate) fn fill_z(&self, stream: &mut GaussianStream, out: &mut [f64]) {
        for (z, &t) in out.iter_mut().zip(&self.tau) {
            let e = stream.next_normal();
            *z = if t == f64::NEG_INFINITY { f64::NEG_INFINITY } else { t - e };
        }
    }
}

/// w*(τ) = (1/k) Σ_j τ(j)₊.
pub fn welfare_gain(model: &TreatmentModel) -> f64 {
    model.tau.iter().map(|t| t.max(0.0)).sum::<f64>() / model.k() as f64
}

pub fn sample_treatment_z(model: &TreatmentModel, seed: StreamSeed) -> Vec<f64> {
    let mut out = vec![0.0; model.k()];
    model.fill_z(&mut seed.stream(), &mut out);
    out
}

/// Rejects "treat nobody" when S_p(−Z, 0) > c_{p,α}.
pub fn treatment_reject(test: &TestSpec, z: &[f64]) -> bool {
    let flipped: Vec<f64> = z.iter().map(|v| -v).collect();
    test.rejects(&flipped, 0.0)
}

/// Member `m` of the welfare family: m strata at k·b/m, the rest at −∞. Always w* = b.
pub fn welfare_alternative(k: usize, b: f64, m: usize) -> Result<TreatmentModel> {
    if m == 0 || m > k {
        return Err(domain!("sparsity {m} outside 1..={k}"));
    }
    let mut tau = vec![f64::NEG_INFINITY; k];
    tau[..m].fill(k as f64 * b / m as f64);
    TreatmentModel::new(tau)
}

/// Simulated rejection probability at τ. Uses sub-stream `sub` of the welfare namespace.
pub fn treatment_power(test: &TestSpec, model: &TreatmentModel, cfg: &SimConfig, sub: u64) -> Result<PowerReport> {
    test.check_k(model.k())?;
    cfg.require_reps(1)?;
    let k = model.k();
    let hits: u64 = map_blocks(cfg, Purpose::Welfare, sub, |stream, rows| {
        let mut z = vec![0.0; k];
        let mut hits = 0u64;
        for _ in 0..rows {
            model.fill_z(stream, &mut z);
            z.iter_mut().for_each(|v| *v = -*v);
            hits += test.rejects(&z, 0.0) as u64;
        }
        hits
    })
    .into_iter()
    .sum();
    let prop = Proportion::from_counts(hits, cfg.reps);
    Ok(PowerReport { estimate: prop.estimate, std_error: prop.std_error, reps: Some(cfg.reps), worst_case_mu: None })
}

/// Minimum simulated power over the welfare family at w* = b; an upper bound on β*(b, φ).
/// `worst_case_mu` holds the minimizing τ.
pub fn minimax_power_welfare(test: &TestSpec, b: f64, cfg: &SimConfig, grid: &SparsityGrid) -> Result<PowerReport> {
    if !(b > 0.0) {
        return Err(domain!("welfare separation b must be positive, got {b}"));
    }
    let k = test.k();
    let mut worst: Option<(PowerReport, TreatmentModel)> = None;
    for m in grid.levels(k)? {
        let tau = welfare_alternative(k, b, m)?;
        let report = treatment_power(test, &tau, cfg, m as u64)?;
        if worst.as_ref().is_none_or(|(w, _)| report.estimate < w.estimate) {
            worst = Some((report, tau));
        }
    }
    let (mut report, tau) = worst.expect("grid is nonempty");
    report.worst_case_mu = Some(tau.tau);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareEntry {
    pub test: String,
    pub power: PowerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareRow {
    pub b: f64,
    pub entries: Vec<WelfareEntry>,
    /// Index into `entries` of the test with the largest β* upper bound.
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareComparison {
    pub k: usize,
    pub alpha: f64,
    pub rows: Vec<WelfareRow>,
}

/// β* upper bounds for each test across `b_grid`. Every test sees the same draws for the
/// same family member.
pub fn compare_tests_welfare(tests: &[TestSpec], b_grid: &[f64], cfg: &SimConfig) -> Result<WelfareComparison> {
    let first = tests.first().ok_or_else(|| domain!("no tests to compare"))?;
    let (k, alpha) = (first.k(), first.alpha);
    if tests.iter().any(|t| t.k() != k || t.alpha != alpha) {
        return Err(Error::Config("all compared tests must share k and alpha".into()));
    }
    let rows = b_grid
        .iter()
        .map(|&b| {
            let entries = tests
                .iter()
                .map(|t| {
                    Ok(WelfareEntry { test: t.label(), power: minimax_power_welfare(t, b, cfg, &SparsityGrid::All)? })
                })
                .collect::<Result<Vec<_>>>()?;
            let winner = entries
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.power.estimate.total_cmp(&b.1.power.estimate).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            Ok(WelfareRow { b, entries, winner })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WelfareComparison { k, alpha, rows })
}

/// A balanced stratified experiment: n/(2k) observations in each (stratum, arm) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentSample {
    /// Strata in `1..=k`.
    pub strata: Vec<usize>,
    /// Treatment indicators.
    pub treated: Vec<bool>,
    pub outcomes: Vec<f64>,
    pub k: usize,
}

/// Z_j = mean treated outcome − mean control outcome in stratum j.
pub fn aggregate_treatment(sample: &TreatmentSample) -> Result<Vec<f64>> {
    let k = sample.k;
    let n = sample.strata.len();
    if n != sample.treated.len() || n != sample.outcomes.len() {
        return Err(Error::Validation("strata, treatment and outcome columns differ in length".into()));
    }
    if k == 0 || n == 0 || !n.is_multiple_of(2 * k) {
        return Err(Error::Validation(format!("{n} observations cannot fill 2 x {k} balanced cells")));
    }
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![[0usize; 2]; k];
    for ((&x, &d), &y) in sample.strata.iter().zip(&sample.treated).zip(&sample.outcomes) {
        if x == 0 || x > k {
            return Err(Error::Validation(format!("stratum {x} outside 1..={k}")));
        }
        if !y.is_finite() {
            return Err(Error::Validation(format!("non-finite outcome {y}")));
        }
        sums[x - 1][d as usize] += y;
        counts[x - 1][d as usize] += 1;
    }
    let per = n / (2 * k);
    if counts.iter().flatten().any(|&c| c != per) {
        return Err(Error::Validation(format!("unbalanced design: every cell needs {per} observations")));
    }
    Ok(sums.iter().map(|s| (s[1] - s[0]) / per as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{critical_value_max, critical_value_mc};
    use crate::model::{sample_z, ModelParams};
    use crate::normal::{cdf, std_normal_quantile};
    use crate::power::reject;
    use crate::stats::NormOrder;
    use proptest::prelude::*;

    fn max_test(k: usize) -> TestSpec {
        TestSpec::new(critical_value_max(k, 0.05).unwrap())
    }

    fn sum_test(k: usize) -> TestSpec {
        let cfg = SimConfig::new(100_000, 60);
        TestSpec::new(critical_value_mc(k, 0.05, NormOrder::Finite(1.0), &cfg).unwrap())
    }

    #[test]
    fn welfare_examples() {
        let m = TreatmentModel::new(vec![2.0, -1.0, 1.0]).unwrap();
        assert!((welfare_gain(&m) - 1.0).abs() < 1e-15);
        let m = TreatmentModel::new(vec![-1.0, f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(welfare_gain(&m), 0.0);
        let m = TreatmentModel::new(vec![0.7; 4]).unwrap();
        assert!((welfare_gain(&m) - 0.7).abs() < 1e-15);
        assert!(TreatmentModel::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn reject_examples() {
        let test = max_test(4);
        assert!(!treatment_reject(&test, &[0.0; 4]));
        let c = test.critical.value;
        assert!(treatment_reject(&test, &[0.0, c + 0.01, 0.0, -3.0]));
    }

    #[test]
    fn family_members_sit_on_the_welfare_sphere() {
        for k in [1, 3, 10] {
            for m in 1..=k {
                for b in [0.1, 0.8, 2.5] {
                    let tau = welfare_alternative(k, b, m).unwrap();
                    assert!((welfare_gain(&tau) - b).abs() < 1e-12);
                }
            }
        }
        assert_eq!(welfare_alternative(10, 0.8, 10).unwrap().tau(), &[0.8; 10]);
        let sparse = welfare_alternative(10, 0.8, 1).unwrap();
        assert!((sparse.tau()[0] - 8.0).abs() < 1e-12);
        assert!(sparse.tau()[1..].iter().all(|t| *t == f64::NEG_INFINITY));
    }

    #[test]
    fn single_stratum_power() {
        let cfg = SimConfig::new(100_000, 61);
        let exact = 1.0 - cdf(std_normal_quantile(0.95).unwrap() - 1.2);
        for test in [max_test(1), sum_test(1)] {
            let r = minimax_power_welfare(&test, 1.2, &cfg, &SparsityGrid::All).unwrap();
            assert!((r.estimate - exact).abs() <= 3.0 * r.std_error + 3.0 * test.critical.std_error());
        }
    }

    #[test]
    fn sum_test_wins_dense_alternatives() {
        let cfg = SimConfig::new(100_000, 62);
        let dense = SparsityGrid::Only(vec![10]);
        let max = minimax_power_welfare(&max_test(10), 0.8, &cfg, &dense).unwrap();
        let sum = minimax_power_welfare(&sum_test(10), 0.8, &cfg, &dense).unwrap();
        assert!(sum.estimate - max.estimate > 3.0 * sum.std_error.hypot(max.std_error));
    }

    #[test]
    fn growing_family_never_raises_minimum() {
        let cfg = SimConfig::new(20_000, 63);
        let test = sum_test(6);
        let mut last = f64::INFINITY;
        for upto in 1..=6 {
            let grid = SparsityGrid::Only((1..=upto).collect());
            let r = minimax_power_welfare(&test, 0.6, &cfg, &grid).unwrap();
            assert!(r.estimate <= last);
            last = r.estimate;
        }
    }

    #[test]
    fn comparison_table() {
        let cfg = SimConfig::new(20_000, 64);
        // At k = 1 every norm sees the same draws, so simulated critical values coincide.
        let crit = SimConfig::new(20_000, 65);
        let single: Vec<TestSpec> = [1.0, 2.0, 5.0]
            .into_iter()
            .map(|p| TestSpec::new(critical_value_mc(1, 0.05, NormOrder::Finite(p), &crit).unwrap()))
            .collect();
        let t = compare_tests_welfare(&single, &[0.5, 1.5], &cfg).unwrap();
        for row in &t.rows {
            assert_eq!(row.entries[0].power.estimate, row.entries[1].power.estimate);
            assert_eq!(row.entries[0].power.estimate, row.entries[2].power.estimate);
        }
        let t = compare_tests_welfare(&[max_test(3), sum_test(3)], &[12.0], &cfg).unwrap();
        assert!(t.rows[0].entries.iter().all(|e| e.power.estimate > 0.999));
        assert!(compare_tests_welfare(&[max_test(3), sum_test(2)], &[1.0], &cfg).is_err());
        assert!(compare_tests_welfare(&[], &[1.0], &cfg).is_err());
    }

    #[test]
    fn power_equals_moment_problem_draw_for_draw() {
        let cfg = SimConfig::new(20_000, 66);
        let tau = vec![0.4, -0.2, 1.1, f64::NEG_INFINITY];
        let mu = ModelParams::new(tau.iter().map(|t| -t).collect()).unwrap();
        for test in [max_test(4), sum_test(4)] {
            let treat = treatment_power(&test, &TreatmentModel::new(tau.clone()).unwrap(), &cfg, 3).unwrap();
            let moment = crate::power::power_on_stream(&test, &mu, 0.0, &cfg, Purpose::Welfare, 3).unwrap();
            assert_eq!(treat, moment);
        }
    }

    #[test]
    fn aggregate_examples() {
        let s = TreatmentSample {
            strata: vec![1, 1, 2, 2, 1, 1, 2, 2],
            treated: vec![true, false, true, false, true, false, true, false],
            outcomes: vec![3.0, 1.0, 0.0, 2.0, 5.0, 1.0, 2.0, 2.0],
            k: 2,
        };
        assert_eq!(aggregate_treatment(&s).unwrap(), vec![3.0, -1.0]);
        let bad = TreatmentSample { treated: vec![true; 8], ..s.clone() };
        assert!(aggregate_treatment(&bad).is_err());
        let bad = TreatmentSample { strata: vec![1, 1, 2, 3, 1, 1, 2, 2], ..s };
        assert!(aggregate_treatment(&bad).is_err());
    }

    proptest! {
        #[test]
        fn sign_duality(z in prop::collection::vec(-4.0f64..4.0, 5)) {
            let test = max_test(5);
            let neg: Vec<f64> = z.iter().map(|v| -v).collect();
            prop_assert_eq!(treatment_reject(&test, &z), reject(&test, &neg, 0.0));
        }

        #[test]
        fn draws_match_moment_model(tau in prop::collection::vec(-3.0f64..3.0, 4), seed in any::<u64>()) {
            let s = StreamSeed::new(seed, 1);
            let z = sample_treatment_z(&TreatmentModel::new(tau.clone()).unwrap(), s);
            let mu = ModelParams::new(tau.iter().map(|t| -t).collect()).unwrap();
            let z_moment = sample_z(&mu, s);
            for (a, b) in z.iter().zip(&z_moment) {
                prop_assert!((a + b).abs() < 1e-12);
            }
        }
    }
}
