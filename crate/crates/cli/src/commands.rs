//! Command implementations. Each returns the rendered report and the grid points that failed.

use std::path::{Path, PathBuf};

use anyhow::Context;
use momineq::bounds::{asymptotic_sweep, upper_bound_power, BoundReport, SweepRow};
use momineq::cache::CriticalCache;
use momineq::ci::{duality_check, invert_test, loss_integral_check, DualityReport, LossIntegralReport, LossSpec};
use momineq::critical::{critical_value, CriticalMethod, CriticalValue};
use momineq::model::{aggregate, ModelParams, RawSample};
use momineq::power::{minimax_power_exact, power_at, TestSpec};
use momineq::report::{render_csv, render_json, Cell};
use momineq::treatment::{aggregate_treatment, compare_tests_welfare, treatment_reject, TreatmentSample, WelfareComparison};
use momineq::{NormOrder, SimConfig};
use serde::Serialize;
use serde_json::Value;

use crate::args::{
    Common, Critical, CritvalArgs, DualityArgs, Format, InvertArgs, LossKind, PowerCurveArgs, TreatmentArgs,
    UpperBoundArgs,
};

/// Invalid configuration detected before any computation; maps to the usage exit status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub struct Outcome {
    pub report: String,
    /// Grid points that could not be computed, one line each.
    pub failures: Vec<String>,
}

/// The report body in either format; `csv` is `(header, rows)`.
fn render(
    command: &str,
    config: &impl Serialize,
    format: Format,
    json: &impl Serialize,
    csv: (&[&str], Vec<Vec<Cell>>),
) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => render_json(command, config, json)?,
        Format::Csv => render_csv(command, config, csv.0, &csv.1)?,
    })
}

pub fn dry_run(command: &str, config: &impl Serialize) -> anyhow::Result<String> {
    Ok(render_json(command, config, &Value::Null)?)
}

fn check_alpha(alpha: f64) -> anyhow::Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(usage(format!("--alpha must lie in (0, 0.5], got {alpha}")));
    }
    Ok(())
}

fn check_ks(ks: &[usize]) -> anyhow::Result<()> {
    if ks.contains(&0) {
        return Err(usage("--k must be positive"));
    }
    Ok(())
}

fn check_separations(bs: &[f64]) -> anyhow::Result<()> {
    if let Some(b) = bs.iter().find(|&&b| !(b > 0.0)) {
        return Err(usage(format!("--b values must be positive, got {b}")));
    }
    Ok(())
}

fn opt(x: Option<f64>) -> Cell {
    x.map(Cell::Num).unwrap_or_else(|| Cell::from(""))
}

fn method_name(m: CriticalMethod) -> &'static str {
    match m {
        CriticalMethod::ClosedForm => "closed_form",
        CriticalMethod::MonteCarlo => "monte_carlo",
    }
}

/// Critical values, read through the optional cache file.
struct CriticalSource {
    cfg: SimConfig,
    cache: Option<(PathBuf, CriticalCache)>,
}

impl CriticalSource {
    fn open(reps: u64, seed: u64, cache: Option<&Path>) -> anyhow::Result<Self> {
        let cache = match cache {
            Some(path) => Some((
                path.to_path_buf(),
                CriticalCache::load(path).with_context(|| format!("reading cache {}", path.display()))?,
            )),
            None => None,
        };
        Ok(Self { cfg: SimConfig::new(reps, seed), cache })
    }

    fn from_args(critical: &Critical, common: &Common) -> anyhow::Result<Self> {
        Self::open(critical.critical_reps, common.seed, critical.cache.as_deref())
    }

    fn get(&mut self, k: usize, p: NormOrder, alpha: f64) -> momineq::Result<CriticalValue> {
        match &mut self.cache {
            Some((_, cache)) => cache.get_or_compute(k, p, alpha, &self.cfg).map(|(c, _)| c),
            None => critical_value(k, alpha, p, &self.cfg),
        }
    }

    fn save(self) -> anyhow::Result<()> {
        if let Some((path, cache)) = self.cache {
            cache.save(&path).with_context(|| format!("writing cache {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn critval(args: &CritvalArgs) -> anyhow::Result<Outcome> {
    check_ks(&args.k)?;
    args.alpha.iter().try_for_each(|&a| check_alpha(a))?;
    let mut source = CriticalSource::open(args.reps, args.common.seed, args.cache.as_deref())?;
    let mut values = Vec::new();
    let mut failures = Vec::new();
    for &k in &args.k {
        for &p in &args.p {
            for &alpha in &args.alpha {
                match source.get(k, p, alpha) {
                    Ok(c) => values.push(c),
                    Err(e) => failures.push(format!("k={k} p={p} alpha={alpha}: {e}")),
                }
            }
        }
    }
    source.save()?;
    let rows = values
        .iter()
        .map(|c| {
            vec![
                Cell::from(c.k),
                Cell::from(c.p.to_string()),
                Cell::from(c.alpha),
                Cell::from(c.value),
                Cell::from(method_name(c.method)),
                opt(c.mc_std_error),
                c.reps.map(Cell::from).unwrap_or_else(|| Cell::from("")),
                c.seed.map(Cell::from).unwrap_or_else(|| Cell::from("")),
            ]
        })
        .collect();
    let header = ["k", "p", "alpha", "critical_value", "method", "se", "reps", "seed"];
    let format = args.common.format.unwrap_or(Format::Json);
    let report = render("critval", args, format, &values, (&header, rows))?;
    Ok(Outcome { report, failures })
}

#[derive(Debug, Serialize)]
struct PowerRow {
    k: usize,
    p: NormOrder,
    alpha: f64,
    b: f64,
    critical_value: f64,
    exact: f64,
    estimate: f64,
    se: f64,
    reps: u64,
    seed: u64,
}

pub fn power_curve(args: &PowerCurveArgs) -> anyhow::Result<Outcome> {
    check_ks(&args.k)?;
    check_alpha(args.alpha)?;
    check_separations(&args.b.0)?;
    if !args.theta0.is_finite() {
        return Err(usage("--theta0 must be finite"));
    }
    let mut source = CriticalSource::from_args(&args.critical, &args.common)?;
    let cfg = SimConfig::new(args.reps, args.common.seed);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &k in &args.k {
        for &p in &args.p {
            let test = match source.get(k, p, args.alpha) {
                Ok(c) => TestSpec::new(c),
                Err(e) => {
                    failures.push(format!("k={k} p={p}: {e}"));
                    continue;
                }
            };
            for &b in &args.b.0 {
                let point = || -> momineq::Result<PowerRow> {
                    let exact = minimax_power_exact(&test, b, k)?;
                    let mu = ModelParams::least_favorable(k, args.theta0, b)?;
                    let mc = power_at(&test, &mu, args.theta0, &cfg)?;
                    Ok(PowerRow {
                        k,
                        p,
                        alpha: args.alpha,
                        b,
                        critical_value: test.critical.value,
                        exact,
                        estimate: mc.estimate,
                        se: mc.std_error,
                        reps: cfg.reps,
                        seed: cfg.seed,
                    })
                };
                match point() {
                    Ok(r) => rows.push(r),
                    Err(e) => failures.push(format!("k={k} p={p} b={b}: {e}")),
                }
            }
        }
    }
    source.save()?;
    let cells = rows
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.k),
                Cell::from(r.p.to_string()),
                Cell::from(r.alpha),
                Cell::from(r.b),
                Cell::from(r.critical_value),
                Cell::from(r.exact),
                Cell::from(r.estimate),
                Cell::from(r.se),
                Cell::from(r.reps),
                Cell::from(r.seed),
            ]
        })
        .collect();
    let header = ["k", "p", "alpha", "b", "critical_value", "exact", "estimate", "se", "reps", "seed"];
    let format = args.common.format.unwrap_or(Format::Csv);
    let report = render("power-curve", args, format, &rows, (&header, cells))?;
    Ok(Outcome { report, failures })
}

#[derive(Debug, Serialize)]
struct Checked<T> {
    #[serde(flatten)]
    report: T,
    holds: bool,
}

#[derive(Debug, Serialize)]
struct DualityResults {
    duality: Vec<Checked<DualityReport>>,
    loss_integral: Vec<Checked<LossIntegralReport>>,
}

pub fn duality(args: &DualityArgs) -> anyhow::Result<Outcome> {
    check_ks(&args.k)?;
    check_alpha(args.alpha)?;
    check_separations(&args.b.0)?;
    let mut source = CriticalSource::from_args(&args.critical, &args.common)?;
    let cfg = SimConfig::new(args.reps, args.common.seed);
    let mut results = DualityResults { duality: Vec::new(), loss_integral: Vec::new() };
    let mut failures = Vec::new();
    for &k in &args.k {
        for &p in &args.p {
            let test = match source.get(k, p, args.alpha) {
                Ok(c) => TestSpec::new(c),
                Err(e) => {
                    failures.push(format!("k={k} p={p}: {e}"));
                    continue;
                }
            };
            for &b in &args.b.0 {
                match duality_check(&test, b, &cfg) {
                    Ok(r) => results.duality.push(Checked { holds: r.holds(args.n_se), report: r }),
                    Err(e) => failures.push(format!("duality k={k} p={p} b={b}: {e}")),
                }
            }
            for &loss in &args.loss {
                let spec = match loss {
                    LossKind::Linear => LossSpec::Linear,
                    LossKind::Quadratic => LossSpec::Quadratic,
                };
                match loss_integral_check(&test, &spec, &cfg) {
                    Ok(r) => results.loss_integral.push(Checked { holds: r.holds(args.n_se), report: r }),
                    Err(e) => failures.push(format!("loss integral k={k} p={p} loss={}: {e}", spec.name())),
                }
            }
        }
    }
    source.save()?;
    let mut cells: Vec<Vec<Cell>> = results
        .duality
        .iter()
        .map(|c| {
            let r = &c.report;
            vec![
                Cell::from("duality"),
                Cell::from(r.config.k),
                Cell::from(r.config.p.to_string()),
                Cell::from(r.config.alpha),
                opt(r.config.b),
                Cell::from(""),
                Cell::from(r.lhs),
                Cell::from(r.rhs),
                Cell::from(r.gap),
                Cell::from(r.se),
                Cell::from(c.holds.to_string()),
            ]
        })
        .collect();
    cells.extend(results.loss_integral.iter().map(|c| {
        let r = &c.report;
        vec![
            Cell::from("loss_integral"),
            Cell::from(r.config.k),
            Cell::from(r.config.p.to_string()),
            Cell::from(r.config.alpha),
            Cell::from(""),
            Cell::from(r.config.loss.map(|l| l.name()).unwrap_or_default()),
            Cell::from(r.direct),
            Cell::from(r.integrated),
            Cell::from(r.gap),
            Cell::from(r.se),
            Cell::from(c.holds.to_string()),
        ]
    }));
    let header = ["check", "k", "p", "alpha", "b", "loss", "lhs", "rhs", "gap", "se", "holds"];
    let format = args.common.format.unwrap_or(Format::Json);
    let report = render("duality", args, format, &results, (&header, cells))?;
    Ok(Outcome { report, failures })
}

pub fn upper_bound(args: &UpperBoundArgs) -> anyhow::Result<Outcome> {
    check_ks(&args.k)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let cfg = SimConfig::new(args.reps, args.common.seed);
    let format = args.common.format.unwrap_or(Format::Csv);
    if args.sweep {
        let rows: Vec<SweepRow> = asymptotic_sweep(args.alpha, args.epsilon, &args.k, &cfg).map_err(|e| usage(e.to_string()))?;
        let cells = rows
            .iter()
            .map(|r| {
                vec![
                    Cell::from(r.k),
                    Cell::from(r.b_minus),
                    Cell::from(r.beta_bar_minus),
                    Cell::from(r.beta_bar_minus_se),
                    Cell::from(r.b_plus),
                    Cell::from(r.beta_inf_plus),
                ]
            })
            .collect();
        let header = ["k", "b_minus", "beta_bar_minus", "beta_bar_minus_se", "b_plus", "beta_inf_plus"];
        let report = render("upper-bound", args, format, &rows, (&header, cells))?;
        return Ok(Outcome { report, failures: Vec::new() });
    }
    check_separations(&args.b.0)?;
    let mut rows: Vec<Checked<BoundReport>> = Vec::new();
    let mut failures = Vec::new();
    for &k in &args.k {
        for &b in &args.b.0 {
            match upper_bound_power(k, b, args.alpha, &cfg) {
                Ok(r) => rows.push(Checked { holds: r.dominates(args.n_se), report: r }),
                Err(e) => failures.push(format!("k={k} b={b}: {e}")),
            }
        }
    }
    let cells = rows
        .iter()
        .map(|c| {
            let r = &c.report;
            vec![
                Cell::from(r.k),
                Cell::from(r.b),
                Cell::from(r.alpha),
                Cell::from(r.beta_bar),
                Cell::from(r.se),
                opt(r.beta_inf),
                Cell::from(r.c_tilde),
                Cell::from(c.holds.to_string()),
                Cell::from(r.reps),
                Cell::from(r.seed),
            ]
        })
        .collect();
    let header = ["k", "b", "alpha", "beta_bar", "se", "beta_inf", "c_tilde", "dominates", "reps", "seed"];
    let report = render("upper-bound", args, format, &rows, (&header, cells))?;
    Ok(Outcome { report, failures })
}

pub fn treatment(args: &TreatmentArgs) -> anyhow::Result<Outcome> {
    check_ks(&[args.k])?;
    check_alpha(args.alpha)?;
    check_separations(&args.b.0)?;
    if args.p.is_empty() {
        return Err(usage("--p needs at least one norm order"));
    }
    let mut source = CriticalSource::from_args(&args.critical, &args.common)?;
    let cfg = SimConfig::new(args.reps, args.common.seed);
    let mut failures = Vec::new();
    let mut tests = Vec::new();
    for &p in &args.p {
        match source.get(args.k, p, args.alpha) {
            Ok(c) => tests.push(TestSpec::new(c)),
            Err(e) => failures.push(format!("p={p}: {e}")),
        }
    }
    source.save()?;
    let mut table = WelfareComparison { k: args.k, alpha: args.alpha, rows: Vec::new() };
    if !tests.is_empty() {
        for &b in &args.b.0 {
            match compare_tests_welfare(&tests, &[b], &cfg) {
                Ok(mut t) => table.rows.append(&mut t.rows),
                Err(e) => failures.push(format!("b={b}: {e}")),
            }
        }
    }
    let mut cells = Vec::new();
    for row in &table.rows {
        for (i, entry) in row.entries.iter().enumerate() {
            let active = entry.power.worst_case_mu.as_ref().map(|t| t.iter().filter(|x| x.is_finite()).count());
            cells.push(vec![
                Cell::from(row.b),
                Cell::from(entry.test.clone()),
                Cell::from(entry.power.estimate),
                Cell::from(entry.power.std_error),
                active.map(Cell::from).unwrap_or_else(|| Cell::from("")),
                Cell::from((i == row.winner).to_string()),
            ]);
        }
    }
    let header = ["b", "test", "estimate", "se", "worst_case_strata", "winner"];
    let format = args.common.format.unwrap_or(Format::Csv);
    let report = render("treatment", args, format, &table, (&header, cells))?;
    Ok(Outcome { report, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Moment,
    Treatment,
}

/// Z from `--z`, or from a CSV in either layout.
fn observed(args: &InvertArgs) -> anyhow::Result<(ModelKind, Vec<f64>)> {
    let Some(path) = &args.input else {
        if args.z.is_empty() {
            return Err(usage("give --z or --input"));
        }
        return Ok((ModelKind::Moment, args.z.clone()));
    };
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    let field = |rec: &csv::StringRecord, i: usize, line: usize| -> anyhow::Result<String> {
        rec.get(i).map(|s| s.trim().to_string()).ok_or_else(|| usage(format!("row {line}: missing column {}", i + 1)))
    };
    let label = |s: &str, line: usize| -> anyhow::Result<usize> {
        s.parse().map_err(|_| usage(format!("row {line}: `{s}` is not a positive integer label")))
    };
    let real = |s: &str, line: usize| -> anyhow::Result<f64> {
        s.parse().map_err(|_| usage(format!("row {line}: `{s}` is not a number")))
    };
    match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["label", "value"] => {
            let (mut labels, mut values) = (Vec::new(), Vec::new());
            for (i, rec) in records.iter().enumerate() {
                labels.push(label(&field(rec, 0, i + 2)?, i + 2)?);
                values.push(real(&field(rec, 1, i + 2)?, i + 2)?);
            }
            let k = args.k.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(0));
            let z = aggregate(&RawSample::new(labels, values, k)?).map_err(|e| usage(e.to_string()))?;
            Ok((ModelKind::Moment, z))
        }
        ["x", "d", "y"] => {
            let (mut strata, mut treated, mut outcomes) = (Vec::new(), Vec::new(), Vec::new());
            for (i, rec) in records.iter().enumerate() {
                let line = i + 2;
                strata.push(label(&field(rec, 0, line)?, line)?);
                treated.push(match field(rec, 1, line)?.as_str() {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => return Err(usage(format!("row {line}: treatment indicator `{other}` is not 0 or 1"))),
                });
                outcomes.push(real(&field(rec, 2, line)?, line)?);
            }
            let k = args.k.unwrap_or_else(|| strata.iter().copied().max().unwrap_or(0));
            let z = aggregate_treatment(&TreatmentSample { strata, treated, outcomes, k })
                .map_err(|e| usage(e.to_string()))?;
            Ok((ModelKind::Treatment, z))
        }
        _ => Err(usage(format!("{}: header must be `label,value` or `x,d,y`, found `{}`", path.display(), header.join(",")))),
    }
}

#[derive(Debug, Serialize)]
struct Endpoint {
    test: String,
    p: NormOrder,
    critical_value: f64,
    /// Upper confidence endpoint for min_j μ(j); in the treatment model μ = −τ.
    c_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_effect_lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejects_no_treatment: Option<bool>,
}

#[derive(Debug, Serialize)]
struct InvertResults {
    model: ModelKind,
    k: usize,
    #[serde(with = "momineq::report::extended_vec")]
    z: Vec<f64>,
    alpha: f64,
    endpoints: Vec<Endpoint>,
}

pub fn invert(args: &InvertArgs) -> anyhow::Result<Outcome> {
    check_alpha(args.alpha)?;
    if !(args.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let (model, z) = observed(args)?;
    let k = z.len();
    // The treatment problem is the moment problem at μ = −τ.
    let moments: Vec<f64> = match model {
        ModelKind::Moment => z.clone(),
        ModelKind::Treatment => z.iter().map(|v| -v).collect(),
    };
    let mut source = CriticalSource::from_args(&args.critical, &args.common)?;
    let mut endpoints = Vec::new();
    let mut failures = Vec::new();
    for &p in &args.p {
        let point = |source: &mut CriticalSource| -> momineq::Result<Endpoint> {
            let test = TestSpec::new(source.get(k, p, args.alpha)?);
            let c_hat = invert_test(&test, &moments, args.tol)?.c_hat;
            let treated = model == ModelKind::Treatment;
            Ok(Endpoint {
                test: test.label(),
                p,
                critical_value: test.critical.value,
                c_hat,
                max_effect_lower_bound: treated.then_some(-c_hat),
                rejects_no_treatment: treated.then(|| treatment_reject(&test, &z)),
            })
        };
        match point(&mut source) {
            Ok(e) => endpoints.push(e),
            Err(e) => failures.push(format!("p={p}: {e}")),
        }
    }
    source.save()?;
    let cells = endpoints
        .iter()
        .map(|e| {
            vec![
                Cell::from(e.test.clone()),
                Cell::from(e.p.to_string()),
                Cell::from(args.alpha),
                Cell::from(e.critical_value),
                Cell::from(e.c_hat),
                opt(e.max_effect_lower_bound),
                e.rejects_no_treatment.map(|r| Cell::from(r.to_string())).unwrap_or_else(|| Cell::from("")),
            ]
        })
        .collect();
    let header = ["test", "p", "alpha", "critical_value", "c_hat", "max_effect_lower_bound", "rejects_no_treatment"];
    let results = InvertResults { model, k, z, alpha: args.alpha, endpoints };
    let format = args.common.format.unwrap_or(Format::Json);
    let report = render("invert", args, format, &results, (&header, cells))?;
    Ok(Outcome { report, failures })
}
