//! Browser bindings for the interactive demo in `www/`.
//!
//! Each export takes plain numbers and comma-separated lists and returns a JSON string.
//! The same functions are callable natively (without the `wasm_bindgen` wrappers) for tests.

use momineq::ci::{invert_test, DEFAULT_TOL};
use momineq::critical::critical_value;
use momineq::power::{minimax_power_exact, TestSpec};
use momineq::treatment::compare_tests_welfare;
use momineq::{NormOrder, SimConfig};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Upper limits that keep a single call interactive in the browser.
const MAX_K: usize = 200;
const MAX_REPS: u64 = 400_000;
const MAX_POINTS: usize = 400;

fn parse_orders(list: &str) -> Result<Vec<NormOrder>, String> {
    let orders = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<NormOrder>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    if orders.is_empty() {
        return Err("give at least one norm order".into());
    }
    Ok(orders)
}

fn parse_reals(list: &str) -> Result<Vec<f64>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect()
}

fn check_sizes(k: usize, reps: u64) -> Result<(), String> {
    if k == 0 || k > MAX_K {
        return Err(format!("k must lie in 1..={MAX_K}"));
    }
    if reps > MAX_REPS {
        return Err(format!("at most {MAX_REPS} replications in the browser"));
    }
    Ok(())
}

fn tests_for(k: usize, alpha: f64, orders: &[NormOrder], cfg: &SimConfig) -> Result<Vec<TestSpec>, String> {
    orders
        .iter()
        .map(|&p| critical_value(k, alpha, p, cfg).map(TestSpec::new).map_err(|e| e.to_string()))
        .collect()
}

fn to_json(value: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Exact minimax power curves b ↦ 1 − Φ(c_{p,α} − b) on `points` separations in (0, b_max].
pub fn power_curves_json(
    k: usize,
    alpha: f64,
    orders: &str,
    b_max: f64,
    points: usize,
    critical_reps: u64,
    seed: u64,
) -> Result<String, String> {
    check_sizes(k, critical_reps)?;
    if !(b_max > 0.0 && b_max.is_finite()) || points == 0 || points > MAX_POINTS {
        return Err(format!("need b_max > 0 and 1..={MAX_POINTS} points"));
    }
    let cfg = SimConfig::new(critical_reps, seed);
    let tests = tests_for(k, alpha, &parse_orders(orders)?, &cfg)?;
    let b: Vec<f64> = (1..=points).map(|i| b_max * i as f64 / points as f64).collect();
    let curves = tests
        .iter()
        .map(|t| {
            let power = b.iter().map(|&b| minimax_power_exact(t, b, k)).collect::<momineq::Result<Vec<f64>>>();
            power.map(|power| json!({ "test": t.label(), "critical_value": t.critical.value, "power": power }))
        })
        .collect::<momineq::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&json!({ "k": k, "alpha": alpha, "b": b, "curves": curves }))
}

/// Upper confidence endpoints ĉ for an observed Z, one per norm order.
pub fn invert_json(z: &str, alpha: f64, orders: &str, critical_reps: u64, seed: u64) -> Result<String, String> {
    let z = parse_reals(z)?;
    check_sizes(z.len(), critical_reps)?;
    let cfg = SimConfig::new(critical_reps, seed);
    let tests = tests_for(z.len(), alpha, &parse_orders(orders)?, &cfg)?;
    let endpoints = tests
        .iter()
        .map(|t| {
            invert_test(t, &z, DEFAULT_TOL)
                .map(|ci| json!({ "test": t.label(), "critical_value": t.critical.value, "c_hat": ci.c_hat }))
        })
        .collect::<momineq::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&json!({ "z": z, "alpha": alpha, "endpoints": endpoints }))
}

/// Welfare-family minimax power of each test at each welfare gain in `b_list`.
pub fn welfare_table_json(
    k: usize,
    alpha: f64,
    orders: &str,
    b_list: &str,
    reps: u64,
    seed: u64,
) -> Result<String, String> {
    check_sizes(k, reps)?;
    let b = parse_reals(b_list)?;
    if b.is_empty() || b.len() > 40 {
        return Err("give between 1 and 40 welfare gains".into());
    }
    let cfg = SimConfig::new(reps, seed);
    let tests = tests_for(k, alpha, &parse_orders(orders)?, &cfg)?;
    to_json(&compare_tests_welfare(&tests, &b, &cfg).map_err(|e| e.to_string())?)
}

#[wasm_bindgen]
pub fn power_curves(
    k: usize,
    alpha: f64,
    orders: &str,
    b_max: f64,
    points: usize,
    critical_reps: u32,
    seed: u32,
) -> Result<String, JsError> {
    power_curves_json(k, alpha, orders, b_max, points, critical_reps.into(), seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn invert(z: &str, alpha: f64, orders: &str, critical_reps: u32, seed: u32) -> Result<String, JsError> {
    invert_json(z, alpha, orders, critical_reps.into(), seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn welfare_table(k: usize, alpha: f64, orders: &str, b_list: &str, reps: u32, seed: u32) -> Result<String, JsError> {
    welfare_table_json(k, alpha, orders, b_list, reps.into(), seed.into()).map_err(|e| JsError::new(&e))
}
