//! Least-favorable critical values c_{p,α} = q_{0,1−α}(S_p(Z, 0)).
//!
//! The max statistic has an exact closed form. Finite p is simulated under μ = 0. All
//! finite-p simulations for the same `(k, reps, seed)` read the same Gaussian draws
//! regardless of p, so critical values for different norms are common-random-number
//! comparable.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::normal::std_normal_upper_quantile;
use crate::sim::{map_blocks, Purpose, SimConfig, BLOCK_SIZE};
use crate::stats::{statistic, NormOrder};

/// Smallest replication count accepted for a simulated critical value.
pub const MIN_CRITICAL_REPS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    pub k: usize,
    pub p: NormOrder,
    pub alpha: f64,
    pub method: CriticalMethod,
    pub reps: Option<u64>,
    /// Master seed of the simulation, when simulated.
    pub seed: Option<u64>,
    pub mc_std_error: Option<f64>,
}

impl CriticalValue {
    /// Standard error of the value, zero for closed forms.
    pub fn std_error(&self) -> f64 {
        self.mc_std_error.unwrap_or(0.0)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain!("alpha must lie in (0, 1), got {alpha}"));
    }
    if alpha > 0.5 {
        return Err(Error::Unsupported(format!(
            "alpha = {alpha} > 1/2: least-favorable critical values may be negative"
        )));
    }
    Ok(())
}

/// Exact c_{∞,α} = Φ⁻¹((1 − α)^{1/k}), from P(S_∞(Z, 0) ≤ c) = Φ(c)^k for c ≥ 0.
pub fn critical_value_max(k: usize, alpha: f64) -> Result<CriticalValue> {
    if k == 0 {
        return Err(domain!("k must be positive"));
    }
    check_alpha(alpha)?;
    // 1 − (1 − α)^{1/k} without cancellation.
    let tail = -((-alpha).ln_1p() / k as f64).exp_m1();
    Ok(CriticalValue {
        value: std_normal_upper_quantile(tail)?,
        k,
        p: NormOrder::Infinity,
        alpha,
        method: CriticalMethod::ClosedForm,
        reps: None,
        seed: None,
        mc_std_error: None,
    })
}

/// Closed form for p = ∞, simulation otherwise.
pub fn critical_value(k: usize, alpha: f64, p: NormOrder, cfg: &SimConfig) -> Result<CriticalValue> {
    match p {
        NormOrder::Infinity => critical_value_max(k, alpha),
        NormOrder::Finite(_) => critical_value_mc(k, alpha, p, cfg),
    }
}

/// Simulated c_{p,α}: the ⌈(1 − α)N⌉-th order statistic of N draws of S_p(Z, 0) under μ = 0.
///
/// Works for p = ∞ too, which is how the simulation is checked against the closed form.
pub fn critical_value_mc(k: usize, alpha: f64, p: NormOrder, cfg: &SimConfig) -> Result<CriticalValue> {
    if k == 0 {
        return Err(domain!("k must be positive"));
    }
    check_alpha(alpha)?;
    cfg.require_reps(MIN_CRITICAL_REPS)?;
    let blocks = map_blocks(cfg, Purpose::Critical, 0, |stream, rows| {
        let mut z = vec![0.0; k];
        (0..rows)
            .map(|_| {
                stream.fill(&mut z);
                statistic(&z, 0.0, p)
            })
            .collect::<Vec<f64>>()
    });
    let draws: Vec<f64> = blocks.into_iter().flatten().collect();
    simulated(draws, k, alpha, p, cfg)
}

fn simulated(draws: Vec<f64>, k: usize, alpha: f64, p: NormOrder, cfg: &SimConfig) -> Result<CriticalValue> {
    let q = upper_order_statistic(draws, alpha)?;
    Ok(CriticalValue {
        value: q.value,
        k,
        p,
        alpha,
        method: CriticalMethod::MonteCarlo,
        reps: Some(cfg.reps),
        seed: Some(cfg.seed),
        mc_std_error: Some(q.std_error),
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct OrderStatistic {
    pub value: f64,
    pub std_error: f64,
}

/// The ⌈(1 − α)N⌉-th smallest draw, with a distribution-free standard error read off the
/// order statistics one binomial standard deviation either side of that rank.
pub(crate) fn upper_order_statistic(mut draws: Vec<f64>, alpha: f64) -> Result<OrderStatistic> {
    let n = draws.len() as u64;
    // ⌈(1 − α)N⌉ = N − ⌊αN⌋; the epsilon absorbs representation error in α.
    let exceed = (alpha * n as f64 + 1e-9).floor() as u64;
    if exceed == 0 {
        return Err(config!(
            "{n} replications cannot resolve the upper {alpha} quantile (need alpha * reps >= 1)"
        ));
    }
    let rank = n - exceed;
    draws.sort_unstable_by(f64::total_cmp);
    let at = |r: u64| draws[(r.clamp(1, n) - 1) as usize];
    let spread = ((n as f64) * alpha * (1.0 - alpha)).sqrt().ceil() as u64;
    let hi = at(rank + spread);
    let lo = at(rank.saturating_sub(spread));
    Ok(OrderStatistic { value: at(rank), std_error: 0.5 * (hi - lo) })
}

/// A stored N × k matrix of standard normal draws shared across critical-value
/// computations.
///
/// Rows are the same draws [`critical_value_mc`] uses for the same `(k, cfg)`, so
/// `panel.critical_value(α, p)` reproduces it exactly. Prefix views reuse the first
/// `k' ≤ k` columns, giving nested samples across dimensions.
#[derive(Debug, Clone)]
pub struct GaussianPanel {
    k: usize,
    cfg: SimConfig,
    data: Vec<f64>,
}

impl GaussianPanel {
    pub fn generate(k: usize, cfg: &SimConfig) -> Result<Self> {
        if k == 0 {
            return Err(domain!("k must be positive"));
        }
        cfg.require_reps(MIN_CRITICAL_REPS)?;
        let blocks = map_blocks(cfg, Purpose::Critical, 0, |stream, rows| {
            let mut block = vec![0.0; rows * k];
            stream.fill(&mut block);
            block
        });
        let mut data = Vec::with_capacity(cfg.reps as usize * k);
        for b in blocks {
            data.extend_from_slice(&b);
        }
        debug_assert_eq!(data.len() as u64, cfg.reps * k as u64);
        debug_assert!(cfg.blocks() * BLOCK_SIZE >= cfg.reps);
        Ok(Self { k, cfg: *cfg, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn reps(&self) -> u64 {
        self.cfg.reps
    }

    pub fn critical_value(&self, alpha: f64, p: NormOrder) -> Result<CriticalValue> {
        self.critical_value_prefix(self.k, alpha, p)
    }

    /// Critical value for dimension `k_sub`, using the first `k_sub` columns of every row.
    pub fn critical_value_prefix(&self, k_sub: usize, alpha: f64, p: NormOrder) -> Result<CriticalValue> {
        if k_sub == 0 || k_sub > self.k {
            return Err(domain!("prefix dimension {k_sub} outside 1..={}", self.k));
        }
        check_alpha(alpha)?;
        let draws = self.data.chunks_exact(self.k).map(|row| statistic(&row[..k_sub], 0.0, p)).collect();
        simulated(draws, k_sub, alpha, p, &self.cfg)
    }
}
