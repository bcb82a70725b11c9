//! Plan execution over a dataset.
//!
//! Nodes run in topological order. Relation nodes (source, clip) carry a
//! [`Relation`]; every other node carries a [`Value`]. Randomness comes only
//! from keyed streams (see [`noise`]), so a run is a pure function of plan,
//! data, seed and options.

mod dataset;
pub mod noise;
mod relational;
mod value;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use dataset::{load_dataset, parse_timestamp, Cell, Dataset, DatasetError};
pub use noise::{keyed_stream, laplace_moments, sample_laplace, sample_laplace_batch, LaplaceMoments, ScaleError};
pub use relational::{aggregate_relation, clip_contributions, clip_relation, evaluate_aggregate, Relation};
pub use value::Value;

use crate::exact;
use crate::plan::{
    AnalysisPlan, ClipBound, ClipSpec, Expr, ExprOp, Guard, NodeKind, SensitivityDecl, StructuralError,
};
use crate::sensitivity::{noise_input_bound, Delta};
use crate::statics::{self, EpsilonResolution};
use crate::verifier::{self, Report, VerifyOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecOptions {
    pub seed: u64,
    /// When false, noise nodes pass their input through unchanged.
    pub noise: bool,
    /// Run even when verification reports violations.
    pub allow_invalid: bool,
    pub verify: VerifyOptions,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self { seed: 0, noise: true, allow_invalid: false, verify: VerifyOptions::default() }
    }
}

/// One Laplace perturbation, recorded for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRecord {
    pub node: String,
    /// Exact budget, rendered as a fraction.
    pub epsilon: String,
    pub sensitivity: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionResult {
    pub plan: String,
    pub seed: u64,
    pub noise: bool,
    pub releases: BTreeMap<String, Value>,
    pub noise_applied: Vec<NoiseRecord>,
    /// Output of every value node, including unreleased ones.
    #[serde(skip)]
    pub values: BTreeMap<String, Value>,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("plan is structurally invalid ({} error(s)); run `check` for details", .0.len())]
    Invalid(Vec<StructuralError>),
    #[error("plan failed verification with {} violation(s); pass --allow-invalid to run anyway", .0.violation_count())]
    Refused(Box<Report>),
    #[error("dataset does not satisfy the plan: {0}")]
    Data(String),
    #[error("node `{node}`: {message}")]
    Runtime { node: String, message: String },
    #[error("node `{node}` produced a non-finite value: {message}")]
    Domain { node: String, message: String },
}

fn runtime(node: &str, message: impl Into<String>) -> ExecError {
    ExecError::Runtime { node: node.to_string(), message: message.into() }
}

/// Checks that the data honours every declared partition constraint.
pub fn check_constraints(plan: &AnalysisPlan, ds: &Dataset) -> Result<(), String> {
    for pc in &plan.constraints {
        let attr = ds.column_index(&pc.attribute).ok_or_else(|| format!("unknown column `{}`", pc.attribute))?;
        let within = pc
            .within
            .iter()
            .map(|w| ds.column_index(w).ok_or_else(|| format!("unknown column `{w}`")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut cells: BTreeMap<(String, Vec<String>), (String, u64)> = BTreeMap::new();
        for (i, row) in ds.rows().iter().enumerate() {
            let key = (ds.unit_of(i), within.iter().map(|&w| row[w].key()).collect::<Vec<_>>());
            let value = row[attr].key();
            let entry = cells.entry(key.clone()).or_insert_with(|| (value.clone(), 0));
            entry.1 += 1;
            let context = if key.1.is_empty() {
                String::new()
            } else {
                format!(" for {}", pc.within.iter().zip(&key.1).map(|(w, v)| format!("{w} = {v}")).collect::<Vec<_>>().join(", "))
            };
            if entry.0 != value {
                return Err(format!(
                    "unit `{}` has more than one {} value{context} ({} and {value})",
                    key.0, pc.attribute, entry.0
                ));
            }
            if let Some(m) = pc.max_rows_per_unit {
                if entry.1 > m {
                    return Err(format!("unit `{}` has more than {m} row(s){context}", key.0));
                }
            }
        }
    }
    Ok(())
}

/// Evaluates an expression. `guard`, when set, makes every division use
/// `max(denominator, guard)`; without it a zero denominator is an error.
pub fn eval_expr(expr: &Expr, values: &BTreeMap<String, Value>, guard: Option<f64>) -> Result<Value, String> {
    match expr {
        Expr::Num(x) => Ok(Value::Scalar(*x)),
        Expr::Node(id) => values.get(id).cloned().ok_or_else(|| format!("`{id}` has not been computed")),
        Expr::Op(op, args) => {
            let vals = args.iter().map(|a| eval_expr(a, values, guard)).collect::<Result<Vec<_>, _>>()?;
            let fold = |f: fn(f64, f64) -> f64| -> Result<Value, String> {
                let mut it = vals.iter();
                let first = it.next().ok_or("operator needs arguments")?.clone();
                it.try_fold(first, |acc, v| acc.zip(v, f))
            };
            match (op, vals.as_slice()) {
                (ExprOp::Add, _) => fold(|a, b| a + b),
                (ExprOp::Mul, _) => fold(|a, b| a * b),
                (ExprOp::Min, _) => fold(f64::min),
                (ExprOp::Max, _) => fold(f64::max),
                (ExprOp::Sub, [a, b]) => a.zip(b, |x, y| x - y),
                (ExprOp::Div, [a, b]) => match guard {
                    Some(g) => a.zip(b, |x, y| x / y.max(g)),
                    None => {
                        if b.values().contains(&0.0) {
                            return Err("division by zero".into());
                        }
                        a.zip(b, |x, y| x / y)
                    }
                },
                (ExprOp::Neg, [a]) => Ok(a.map(|x| -x)),
                (ExprOp::Abs, [a]) => Ok(a.map(f64::abs)),
                (ExprOp::Sqrt, [a]) => Ok(a.map(f64::sqrt)),
                (ExprOp::Clamp, [x, lo, hi]) => x.zip(lo, f64::max)?.zip(hi, f64::min),
                _ => Err(format!("`{}` got {} argument(s)", op.name(), vals.len())),
            }
        }
    }
}

fn runtime_clip_bound(id: &str, clip: &ClipSpec, values: &BTreeMap<String, Value>) -> Result<u64, ExecError> {
    match &clip.per_unit_bound {
        ClipBound::Fixed(k) => Ok(*k),
        ClipBound::Ref(p) => {
            let x = values
                .get(p)
                .and_then(Value::as_scalar)
                .ok_or_else(|| runtime(id, format!("bound `{p}` is not a scalar")))?;
            if !x.is_finite() || x < 1.0 {
                return Err(runtime(id, format!("bound `{p}` evaluated to {x}; clip bounds must be at least 1")));
            }
            Ok(x.floor() as u64)
        }
    }
}

/// Noise-free value of one aggregate: the source rows pushed through the
/// aggregate's clip chain. `bound` supplies each clip's row bound.
pub fn evaluate_query(
    plan: &AnalysisPlan,
    aggregate: &str,
    ds: &Dataset,
    seed: u64,
    bound: impl Fn(&str, &ClipSpec) -> Result<u64, String>,
) -> Result<Value, String> {
    let spec = match plan.node(aggregate).map(|n| &n.kind) {
        Some(NodeKind::Aggregate(a)) => a,
        _ => return Err(format!("`{aggregate}` is not an aggregate")),
    };
    let mut rel = Relation::all(ds);
    for (clip_id, clip) in plan.clip_chain(aggregate).into_iter().rev() {
        let k = bound(clip_id, clip)?;
        rel = clip_relation(ds, &rel, clip_id, k, clip, seed)?;
    }
    aggregate_relation(ds, &rel, spec)
}

/// Adds Laplace(scale) noise to every cell, drawing cells in key order from
/// the node's own stream.
fn perturb(x: &Value, scale: f64, seed: u64, node: &str) -> Result<Value, ScaleError> {
    let mut rng = keyed_stream(seed, "noise", &[node]);
    Ok(match x {
        Value::Scalar(v) => Value::Scalar(v + sample_laplace(scale, &mut rng)?),
        Value::Cells(m) => {
            let mut out = BTreeMap::new();
            for (k, v) in m {
                out.insert(k.clone(), v + sample_laplace(scale, &mut rng)?);
            }
            Value::Cells(out)
        }
    })
}

/// Verifies the plan, then runs it. Plans with violations are refused
/// unless `allow_invalid` is set; structurally invalid plans never run.
pub fn execute(plan: &AnalysisPlan, ds: &Dataset, opts: &ExecOptions) -> Result<ExecutionResult, ExecError> {
    let report = verifier::verify(plan, &opts.verify).map_err(ExecError::Invalid)?;
    if report.violation_count() > 0 && !opts.allow_invalid {
        return Err(ExecError::Refused(Box::new(report)));
    }
    if ds.unit_column() != plan.privacy.unit_column {
        return Err(ExecError::Data(format!(
            "dataset is keyed by `{}` but the plan's privacy unit is `{}`",
            ds.unit_column(),
            plan.privacy.unit_column
        )));
    }
    check_constraints(plan, ds).map_err(ExecError::Data)?;

    let order = plan.topological_order().expect("validated plans are acyclic");
    let mut relations: BTreeMap<&str, Relation> = BTreeMap::new();
    let mut values: BTreeMap<String, Value> = BTreeMap::new();
    let mut noise_applied = Vec::new();

    for id in order {
        let kind = &plan.node(id).expect("ids come from the plan").kind;
        let input = || plan.data_input(id).expect("validated nodes have an input");
        let out = match kind {
            NodeKind::Source => {
                relations.insert(id, Relation::all(ds));
                continue;
            }
            NodeKind::Clip(clip) => {
                let k = runtime_clip_bound(id, clip, &values)?;
                let rel = clip_relation(ds, &relations[input()], id, k, clip, opts.seed).map_err(|m| runtime(id, m))?;
                relations.insert(id, rel);
                continue;
            }
            NodeKind::Aggregate(spec) => aggregate_relation(ds, &relations[input()], spec).map_err(|m| runtime(id, m))?,
            NodeKind::Constant { value } => Value::Scalar(*value),
            NodeKind::Hyperparameter { expr } => eval_expr(expr, &values, None).map_err(|m| runtime(id, m))?,
            NodeKind::PostProcess(p) => {
                let guard = match &p.guard {
                    Guard::Constant(g) => *g,
                    Guard::Ref(r) => values
                        .get(r)
                        .and_then(Value::as_scalar)
                        .ok_or_else(|| runtime(id, format!("guard `{r}` is not a scalar")))?,
                };
                eval_expr(&p.expr, &values, Some(guard)).map_err(|m| runtime(id, m))?
            }
            NodeKind::Release => values[input()].clone(),
            NodeKind::Noise(spec) => {
                let x = values[input()].clone();
                if opts.noise {
                    let epsilon = match statics::resolve_epsilon(plan, spec) {
                        EpsilonResolution::Resolved(e) => e,
                        EpsilonResolution::Unresolved(m) => return Err(runtime(id, m)),
                    };
                    let sensitivity = match &spec.sensitivity {
                        SensitivityDecl::Constant(c) => *c,
                        SensitivityDecl::Ref(r) => values
                            .get(r)
                            .and_then(Value::as_scalar)
                            .ok_or_else(|| runtime(id, format!("sensitivity `{r}` is not a scalar")))?,
                        SensitivityDecl::Auto => match noise_input_bound(plan, id).value {
                            Delta::Finite(d) => d,
                            Delta::Unbounded => return Err(runtime(id, "sensitivity is unbounded; cannot calibrate noise")),
                        },
                    };
                    let scale = sensitivity / exact::to_f64(&epsilon);
                    let noisy = perturb(&x, scale, opts.seed, id)
                        .map_err(|e| runtime(id, format!("{e} (sensitivity {sensitivity})")))?;
                    noise_applied.push(NoiseRecord { node: id.to_string(), epsilon: exact::render(&epsilon), sensitivity, scale });
                    noisy
                } else {
                    x
                }
            }
        };
        if !out.is_finite() {
            return Err(ExecError::Domain { node: id.to_string(), message: format!("{out:?}") });
        }
        values.insert(id.to_string(), out);
    }

    let releases = plan.release_ids().into_iter().map(|r| (r.to_string(), values[r].clone())).collect();
    Ok(ExecutionResult {
        plan: plan.display_name().to_string(),
        seed: opts.seed,
        noise: opts.noise,
        releases,
        noise_applied,
        values,
    })
}
