//! Upper confidence bounds (−∞, ĉ] from inverting the L^p tests, their risk under
//! excess-length losses, and numerical checks of the test/CI duality.

use serde::{Deserialize, Serialize};

use crate::critical::check_alpha;
use crate::error::{domain, Result};
use crate::model::ModelParams;
use crate::power::{minimax_power_exact, power_on_stream, TestSpec};
use crate::sim::{map_blocks, Moments, Proportion, Purpose, SimConfig};
use crate::stats::{statistic, NormOrder};

/// Default bisection tolerance, in θ units.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Number of midpoint cells used when integrating zero-one risks against ν.
pub const QUADRATURE_POINTS: usize = 200;

/// Span beyond the critical value covered by the quadrature grid.
pub const QUADRATURE_MARGIN: f64 = 8.0;

/// Tolerance attributed to the truncated midpoint quadrature.
pub const QUADRATURE_TOL: f64 = 1e-2;

/// The upper endpoint of the confidence set (−∞, ĉ].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperCi {
    pub c_hat: f64,
}

/// Excess-length loss ℓ̃ together with its representing measure ν, ℓ̃(t) = ∫ 1{t ≥ b} dν(b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// 1{t ≥ b}; ν is a point mass at b.
    ZeroOne { b: f64 },
    /// t; ν is Lebesgue measure.
    Linear,
    /// t²; dν(b) = 2b db.
    Quadratic,
}

impl LossSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            LossSpec::ZeroOne { b } => (t >= b) as u8 as f64,
            LossSpec::Linear => t,
            LossSpec::Quadratic => t * t,
        }
    }

    /// ν((lo, hi]). Only meaningful for the absolutely continuous catalog members.
    fn cell_mass(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            LossSpec::ZeroOne { b } => (lo < b && b <= hi) as u8 as f64,
            LossSpec::Linear => hi - lo,
            LossSpec::Quadratic => hi * hi - lo * lo,
        }
    }

    pub fn name(&self) -> String {
        match self {
            LossSpec::ZeroOne { b } => format!("zero_one({b})"),
            LossSpec::Linear => "linear".into(),
            LossSpec::Quadratic => "quadratic".into(),
        }
    }
}

fn check_observation(z: &[f64]) -> Result<f64> {
    if z.iter().any(|x| x.is_nan() || *x == f64::NEG_INFINITY) {
        return Err(domain!("observations must be finite or +inf"));
    }
    let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(domain!("at least one finite observation is needed to bound theta"));
    }
    Ok(min)
}

/// Inverts the test family: ĉ = sup{θ₀ : S_p(Z, θ₀) ≤ c}.
///
/// p = ∞ uses the closed form min_j z_j + c. Finite p bisects on [min z, min z + c], where
/// the statistic starts at 0 and ends at or above c.
pub fn invert_test(test: &TestSpec, z: &[f64], tol: f64) -> Result<UpperCi> {
    let min = check_observation(z)?;
    check_tol(tol)?;
    Ok(UpperCi { c_hat: upper_endpoint(test, z, min, tol) })
}

/// Same as [`invert_test`] but always bisects, including for p = ∞.
pub fn invert_test_bisection(test: &TestSpec, z: &[f64], tol: f64) -> Result<UpperCi> {
    let min = check_observation(z)?;
    check_tol(tol)?;
    Ok(UpperCi { c_hat: bisect(z, test.p, test.critical.value, min, tol) })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(domain!("tolerance must be positive, got {tol}"));
    }
    Ok(())
}

#[inline]
fn upper_endpoint(test: &TestSpec, z: &[f64], min: f64, tol: f64) -> f64 {
    match test.p {
        NormOrder::Infinity => min + test.critical.value,
        NormOrder::Finite(_) => bisect(z, test.p, test.critical.value, min, tol),
    }
}

fn bisect(z: &[f64], p: NormOrder, c: f64, min: f64, tol: f64) -> f64 {
    // Invariant: S(lo) ≤ c. `hi` either has S(hi) > c or is the bracket end.
    let (mut lo, mut hi) = (min, min + c);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if statistic(z, mid, p) <= c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if statistic(z, hi, p) <= c {
        hi
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Simulated E_μ ℓ̃((ĉ(Z) − θ̄(μ))₊).
pub fn ci_risk(test: &TestSpec, mu: &ModelParams, loss: &LossSpec, cfg: &SimConfig) -> Result<RiskReport> {
    test.check_k(mu.k())?;
    cfg.require_reps(2)?;
    let moments = excess_moments(test, mu, cfg, Purpose::Risk, |t| loss.eval(t));
    Ok(RiskReport { estimate: moments.mean(), std_error: moments.std_error(), reps: cfg.reps, seed: cfg.seed })
}

/// Simulates the excess (ĉ − θ̄)₊ and accumulates `f` of it.
fn excess_moments(
    test: &TestSpec,
    mu: &ModelParams,
    cfg: &SimConfig,
    purpose: Purpose,
    f: impl Fn(f64) -> f64 + Sync + Send,
) -> Moments {
    let k = mu.k();
    let theta_bar = mu.theta_bar();
    map_blocks(cfg, purpose, 0, |stream, rows| {
        let mut z = vec![0.0; k];
        let mut acc = Moments::default();
        for _ in 0..rows {
            mu.fill_z(stream, &mut z);
            let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
            let c_hat = upper_endpoint(test, &z, min, DEFAULT_TOL);
            acc.push(f((c_hat - theta_bar).max(0.0)));
        }
        acc
    })
    .into_iter()
    .fold(Moments::default(), Moments::merge)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: u64,
}

/// Simulated P_μ(θ̄(μ) ≤ ĉ(Z)).
pub fn coverage(test: &TestSpec, mu: &ModelParams, cfg: &SimConfig) -> Result<CoverageReport> {
    test.check_k(mu.k())?;
    cfg.require_reps(1)?;
    let k = mu.k();
    let theta_bar = mu.theta_bar();
    let hits: u64 = map_blocks(cfg, Purpose::Coverage, 0, |stream, rows| {
        let mut z = vec![0.0; k];
        let mut hits = 0;
        for _ in 0..rows {
            mu.fill_z(stream, &mut z);
            let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
            hits += (theta_bar <= upper_endpoint(test, &z, min, DEFAULT_TOL)) as u64;
        }
        hits
    })
    .into_iter()
    .sum();
    let prop = Proportion::from_counts(hits, cfg.reps);
    Ok(CoverageReport { estimate: prop.estimate, std_error: prop.std_error, reps: cfg.reps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub k: usize,
    pub p: NormOrder,
    pub alpha: f64,
    pub critical_value: f64,
    pub b: Option<f64>,
    pub loss: Option<LossSpec>,
    pub reps: u64,
    pub seed: u64,
}

/// Minimax power of the test against one minus the CI's zero-one risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// Minimax power: exact for p = ∞, otherwise simulated at the least-favorable mean on
    /// the same draws as `rhs`.
    pub lhs: f64,
    /// 1 − Φ(c − b) at the test's critical value.
    pub lhs_formula: f64,
    /// Zero when `lhs` is exact.
    pub lhs_se: f64,
    /// One minus the simulated risk at the least-favorable mean (−b, ∞, …, ∞).
    pub rhs: f64,
    pub gap: f64,
    /// Standard error of `rhs`.
    pub se: f64,
    pub config: CheckConfig,
}

impl DualityReport {
    pub fn holds(&self, n_se: f64) -> bool {
        self.gap <= n_se * self.se
    }
}

pub fn duality_check(test: &TestSpec, b: f64, cfg: &SimConfig) -> Result<DualityReport> {
    check_alpha(test.alpha)?;
    let k = test.k();
    let lhs_formula = minimax_power_exact(test, b, k)?;
    let worst = ModelParams::least_favorable(k, 0.0, b)?;
    let risk = ci_risk(test, &worst, &LossSpec::ZeroOne { b }, cfg)?;
    let (lhs, lhs_se) = match test.p {
        NormOrder::Infinity => (lhs_formula, 0.0),
        NormOrder::Finite(_) => {
            let power = power_on_stream(test, &worst, 0.0, cfg, Purpose::Risk, 0)?;
            (power.estimate, power.std_error)
        }
    };
    let rhs = 1.0 - risk.estimate;
    Ok(DualityReport {
        lhs,
        lhs_formula,
        lhs_se,
        rhs,
        gap: (lhs - rhs).abs(),
        se: risk.std_error,
        config: CheckConfig {
            k,
            p: test.p,
            alpha: test.alpha,
            critical_value: test.critical.value,
            b: Some(b),
            loss: None,
            reps: cfg.reps,
            seed: cfg.seed,
        },
    })
}

/// Direct risk of a general loss against the ν-integral of zero-one risks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossIntegralReport {
    pub direct: f64,
    pub integrated: f64,
    pub gap: f64,
    /// Combined standard error of both simulated sides.
    pub se: f64,
    pub quadrature_tol: f64,
    pub quadrature_points: usize,
    pub b_max: f64,
    pub config: CheckConfig,
}

impl LossIntegralReport {
    pub fn holds(&self, n_se: f64) -> bool {
        self.gap <= self.quadrature_tol + n_se * self.se
    }
}

/// Compares R(ĉ, ℓ̃) with ∫ R(ĉ, ℓ̃_b) dν(b), both at μ* = (0, ∞, …, ∞).
///
/// The zero-one risk curve is estimated from its own stream, on a 200-cell midpoint grid
/// over (0, c + 8]. For a zero-one loss ν is a point mass and both sides coincide.
pub fn loss_integral_check(test: &TestSpec, loss: &LossSpec, cfg: &SimConfig) -> Result<LossIntegralReport> {
    check_alpha(test.alpha)?;
    let k = test.k();
    let worst = ModelParams::least_favorable(k, 0.0, 0.0)?;
    let direct = ci_risk(test, &worst, loss, cfg)?;
    let b_max = test.critical.value + QUADRATURE_MARGIN;
    let config = CheckConfig {
        k,
        p: test.p,
        alpha: test.alpha,
        critical_value: test.critical.value,
        b: None,
        loss: Some(*loss),
        reps: cfg.reps,
        seed: cfg.seed,
    };
    if let LossSpec::ZeroOne { .. } = loss {
        return Ok(LossIntegralReport {
            direct: direct.estimate,
            integrated: direct.estimate,
            gap: 0.0,
            se: 0.0,
            quadrature_tol: 0.0,
            quadrature_points: 1,
            b_max,
            config,
        });
    }
    let h = b_max / QUADRATURE_POINTS as f64;
    // Cumulative ν-mass of the cells whose midpoint lies at or below t.
    let mut cumulative = Vec::with_capacity(QUADRATURE_POINTS + 1);
    cumulative.push(0.0);
    for i in 0..QUADRATURE_POINTS {
        let mass = loss.cell_mass(i as f64 * h, (i + 1) as f64 * h);
        cumulative.push(cumulative[i] + mass);
    }
    let integrated = excess_moments(test, &worst, cfg, Purpose::RiskCurve, |t| {
        // Number of midpoints (i + 1/2)h ≤ t.
        let cells = ((t / h) + 0.5).floor().clamp(0.0, QUADRATURE_POINTS as f64) as usize;
        cumulative[cells]
    });
    let gap = (direct.estimate - integrated.mean()).abs();
    Ok(LossIntegralReport {
        direct: direct.estimate,
        integrated: integrated.mean(),
        gap,
        se: direct.std_error.hypot(integrated.std_error()),
        quadrature_tol: QUADRATURE_TOL,
        quadrature_points: QUADRATURE_POINTS,
        b_max,
        config,
    })
}
