//! Sensitivity bounds for aggregate queries.
//!
//! A bound is derived from the contribution limits the plan declares:
//!
//! - **R1** `count` below a clip with bound `k` → `k` rows per unit, times
//!   the number of scope cells a unit can reach when the clip is scoped.
//! - **R2** `count` covered by a partition constraint with
//!   `max_rows_per_unit = m` whose `within` columns the query fixes → `m`.
//! - **R3** `sum` with a row bound from R1/R2 and value bounds `[lo, hi]`
//!   → rows · max(|lo|, |hi|).
//! - **R4** otherwise → unbounded.
//!
//! Grouped aggregates use the same row bound, which bounds the L1 change
//! across all cells. The [`oracle`] module checks these rules by brute force.

pub mod oracle;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::plan::{fixed_columns, AggOp, AnalysisPlan, NodeKind, NodeId};
use crate::statics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta {
    Finite(f64),
    Unbounded,
}

impl Delta {
    pub fn finite(self) -> Option<f64> {
        match self {
            Delta::Finite(x) => Some(x),
            Delta::Unbounded => None,
        }
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::Finite(x) => write!(f, "{x}"),
            Delta::Unbounded => write!(f, "unbounded"),
        }
    }
}

impl Serialize for Delta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Delta::Finite(x) => s.serialize_f64(*x),
            Delta::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityBound {
    pub value: Delta,
    pub trace: Vec<String>,
}

impl SensitivityBound {
    fn unbounded(trace: Vec<String>) -> Self {
        Self { value: Delta::Unbounded, trace }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("node `{0}` does not exist")]
    UnknownNode(NodeId),
    #[error("node `{0}` is a {1} node; sensitivity is derived for aggregates only")]
    NotAggregate(NodeId, &'static str),
}

/// Number of scope cells a unit can reach in a query that fixes `fixed`.
fn scope_cells(plan: &AnalysisPlan, scope: &str, fixed: &BTreeMap<String, String>) -> Option<(u64, String)> {
    if let Some(v) = fixed.get(scope) {
        return Some((1, format!("query fixes {scope} = {v}")));
    }
    for pc in &plan.constraints {
        if pc.attribute == scope && pc.within.iter().all(|w| fixed.contains_key(w)) {
            return Some((1, format!("partition constraint puts each unit in one {scope} cell")));
        }
    }
    let n = plan.schema.column(scope)?.closed_values()?.len() as u64;
    Some((n, format!("{scope} has {n} declared values")))
}

/// Maximum rows one unit can contribute to `aggregate`, with the rule used.
fn row_bound(plan: &AnalysisPlan, aggregate: &str, trace: &mut Vec<String>) -> Option<(u64, &'static str)> {
    let fixed = fixed_columns(plan.effective_predicate(aggregate));
    let mut best: Option<(u64, &'static str, String)> = None;
    let mut offer = |rows: u64, rule: &'static str, why: String| {
        if best.as_ref().is_none_or(|(b, _, _)| rows < *b) {
            best = Some((rows, rule, why));
        }
    };
    for (clip_id, clip) in plan.clip_chain(aggregate) {
        let Some(k) = statics::clip_bound_upper(plan, clip) else {
            trace.push(format!("clip `{clip_id}`: bound has no static upper limit; ignored"));
            continue;
        };
        match &clip.scope {
            None => offer(k, "R1", format!("clip `{clip_id}` keeps at most {k} rows per unit")),
            Some(scope) => match scope_cells(plan, scope, &fixed) {
                Some((cells, why)) => offer(
                    k.saturating_mul(cells),
                    "R1",
                    format!("clip `{clip_id}` keeps at most {k} rows per unit per {scope} cell; {why}"),
                ),
                None => trace.push(format!(
                    "clip `{clip_id}` is scoped by {scope}, which has no closed value set; ignored"
                )),
            },
        }
    }
    for pc in &plan.constraints {
        let Some(m) = pc.max_rows_per_unit else { continue };
        if pc.within.iter().all(|w| fixed.contains_key(w)) {
            let cell = if pc.within.is_empty() {
                "overall".to_string()
            } else {
                pc.within.iter().map(|w| format!("{w} = {}", fixed[w])).collect::<Vec<_>>().join(", ")
            };
            offer(m, "R2", format!("partition constraint allows at most {m} row(s) per unit ({cell})"));
        }
    }
    best.map(|(rows, rule, why)| {
        trace.push(format!("{rule}: {why}"));
        (rows, rule)
    })
}

/// Derives a worst-case bound on how much `aggregate` changes when one
/// privacy unit is added or removed.
pub fn derive_sensitivity(plan: &AnalysisPlan, aggregate: &str) -> Result<SensitivityBound, SensitivityError> {
    let node = plan.node(aggregate).ok_or_else(|| SensitivityError::UnknownNode(aggregate.to_string()))?;
    let spec = match &node.kind {
        NodeKind::Aggregate(a) => a,
        other => return Err(SensitivityError::NotAggregate(aggregate.to_string(), other.name())),
    };
    let mut trace = Vec::new();
    if spec.op == AggOp::MaxPerUnit {
        trace.push("R4: max_per_unit has no sensitivity rule".to_string());
        return Ok(SensitivityBound::unbounded(trace));
    }
    let Some((rows, rule)) = row_bound(plan, aggregate, &mut trace) else {
        trace.push("R4: no clip or partition constraint bounds the rows a unit contributes".to_string());
        return Ok(SensitivityBound::unbounded(trace));
    };
    match spec.op {
        AggOp::Count => {
            trace.push(format!("{rule}: count changes by at most {rows}"));
            Ok(SensitivityBound { value: Delta::Finite(rows as f64), trace })
        }
        AggOp::Sum => {
            let column = spec.column.as_deref().unwrap_or_default();
            let mut bounds: Option<(f64, f64)> = None;
            for (clip_id, clip) in plan.clip_chain(aggregate) {
                if let Some(vb) = clip.value_bounds.as_ref().filter(|vb| vb.column == column) {
                    bounds = Some(match bounds {
                        None => (vb.lo, vb.hi),
                        Some((lo, hi)) => (lo.max(vb.lo), hi.min(vb.hi)),
                    });
                    trace.push(format!("clip `{clip_id}` clamps {column} into [{}, {}]", vb.lo, vb.hi));
                }
            }
            match bounds {
                Some((lo, hi)) => {
                    let (lo, hi) = if lo <= hi { (lo, hi) } else { (lo, lo) };
                    let per_row = lo.abs().max(hi.abs());
                    let delta = rows as f64 * per_row;
                    trace.push(format!("R3: sum changes by at most {rows} x {per_row} = {delta}"));
                    Ok(SensitivityBound { value: Delta::Finite(delta), trace })
                }
                None => {
                    trace.push(format!("R4: summed column {column} has no value bounds"));
                    Ok(SensitivityBound::unbounded(trace))
                }
            }
        }
        AggOp::MaxPerUnit => unreachable!(),
    }
}

/// The bound a noise node's input calls for: the derived bound when the
/// input is an aggregate, else the width of the input's static range.
pub fn noise_input_bound(plan: &AnalysisPlan, noise: &str) -> SensitivityBound {
    let Some(input) = plan.data_input(noise) else {
        return SensitivityBound::unbounded(vec!["noise node has no single input".into()]);
    };
    match plan.node(input).map(|n| &n.kind) {
        Some(NodeKind::Aggregate(_)) => derive_sensitivity(plan, input).expect("input is an aggregate"),
        _ => {
            let range = statics::node_interval(plan, input);
            if range.is_bounded() {
                SensitivityBound {
                    value: Delta::Finite(range.width()),
                    trace: vec![format!(
                        "input `{input}` always lies in [{}, {}], so it moves by at most {}",
                        range.lo,
                        range.hi,
                        range.width()
                    )],
                }
            } else {
                SensitivityBound::unbounded(vec![format!("input `{input}` has no static range")])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::parse_plan;

    fn restaurant(nodes: &str, edges: &str, constraints: &str) -> AnalysisPlan {
        parse_plan(&format!(
            r#"{{"schema": {{"columns": [
                    {{"name": "VisitorId", "kind": "identifier"}},
                    {{"name": "Day", "kind": "categorical", "values": ["Mon", "Tue", "Wed", "Thu", "Fri"]}},
                    {{"name": "Length", "kind": "categorical", "values": ["long", "short"]}},
                    {{"name": "Time spent", "kind": "numeric"}}]}},
                "privacy": {{"unit_column": "VisitorId", "epsilon_total": 1.0}},
                "nodes": [{{"id": "data", "kind": "source"}}, {nodes}],
                "edges": [{edges}],
                "constraints": [{constraints}]}}"#
        ))
        .unwrap()
    }

    fn delta(plan: &AnalysisPlan, id: &str) -> Delta {
        derive_sensitivity(plan, id).unwrap().value
    }

    #[test]
    fn clipped_count_uses_clip_bound() {
        let plan = restaurant(
            r#"{"id": "clip", "kind": "clip", "per_unit_bound": 5},
               {"id": "visits", "kind": "aggregate", "op": "count"}"#,
            r#"["data", "clip"], ["clip", "visits"]"#,
            "",
        );
        let b = derive_sensitivity(&plan, "visits").unwrap();
        assert_eq!(b.value, Delta::Finite(5.0));
        assert!(!b.trace.is_empty());
    }

    #[test]
    fn once_per_day_constraint_gives_one() {
        let plan = restaurant(
            r#"{"id": "long_mon", "kind": "aggregate", "op": "count",
                "predicate": [["eq", "Day", "Mon"], ["eq", "Length", "long"]]}"#,
            r#"["data", "long_mon"]"#,
            r#"{"attribute": "Length", "within": ["Day"], "max_rows_per_unit": 1}"#,
        );
        assert_eq!(delta(&plan, "long_mon"), Delta::Finite(1.0));
    }

    #[test]
    fn unclipped_count_is_unbounded() {
        let plan = restaurant(r#"{"id": "n", "kind": "aggregate", "op": "count"}"#, r#"["data", "n"]"#, "");
        let b = derive_sensitivity(&plan, "n").unwrap();
        assert_eq!(b.value, Delta::Unbounded);
        assert!(b.trace.iter().any(|t| t.starts_with("R4")));
    }

    #[test]
    fn bounded_sum_scales_by_magnitude() {
        let plan = restaurant(
            r#"{"id": "clip", "kind": "clip", "per_unit_bound": 3,
                "value_bounds": {"column": "Time spent", "lo": 0, "hi": 10}},
               {"id": "total", "kind": "aggregate", "op": "sum", "column": "Time spent"}"#,
            r#"["data", "clip"], ["clip", "total"]"#,
            "",
        );
        assert_eq!(delta(&plan, "total"), Delta::Finite(30.0));
    }

    #[test]
    fn scoped_clip_multiplies_by_reachable_cells() {
        let plan = restaurant(
            r#"{"id": "clip", "kind": "clip", "per_unit_bound": 2, "scope": "Day"},
               {"id": "all", "kind": "aggregate", "op": "count"},
               {"id": "mon", "kind": "aggregate", "op": "count", "predicate": [["eq", "Day", "Mon"]]}"#,
            r#"["data", "clip"], ["clip", "all"], ["clip", "mon"]"#,
            "",
        );
        assert_eq!(delta(&plan, "all"), Delta::Finite(10.0));
        assert_eq!(delta(&plan, "mon"), Delta::Finite(2.0));
    }

    #[test]
    fn non_aggregate_is_a_contract_violation() {
        let plan = restaurant(r#"{"id": "n", "kind": "aggregate", "op": "count"}"#, r#"["data", "n"]"#, "");
        assert_eq!(
            derive_sensitivity(&plan, "data"),
            Err(SensitivityError::NotAggregate("data".into(), "source"))
        );
    }

    #[test]
    fn larger_clip_never_shrinks_the_bound() {
        for k in 1..20u64 {
            let make = |k: u64| {
                restaurant(
                    &format!(
                        r#"{{"id": "clip", "kind": "clip", "per_unit_bound": {k},
                            "value_bounds": {{"column": "Time spent", "lo": -4, "hi": 3}}}},
                           {{"id": "n", "kind": "aggregate", "op": "count"}},
                           {{"id": "s", "kind": "aggregate", "op": "sum", "column": "Time spent"}}"#
                    ),
                    r#"["data", "clip"], ["clip", "n"], ["clip", "s"]"#,
                    "",
                )
            };
            let (small, big) = (make(k), make(k + 1));
            for id in ["n", "s"] {
                assert!(delta(&small, id).finite().unwrap() <= delta(&big, id).finite().unwrap());
            }
        }
    }
}
