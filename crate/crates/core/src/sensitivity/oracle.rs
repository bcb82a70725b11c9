//! Brute-force sensitivity oracle for small datasets.
//!
//! Computes `max |q(D) - q(D')|` over add/remove-one-unit neighbours `D'` of a
//! concrete dataset `D`. Removal neighbours are enumerated exactly. Addition
//! neighbours are enumerated over every multiset of up to `max_added_rows`
//! rows drawn from a template set, which covers each value that can change
//! how a row is filtered, clipped, grouped or summed:
//!
//! - categorical columns: every predicate constant plus one other value, or
//!   up to `max_added_rows` distinct values for scope, group and constraint
//!   columns that the query does not fix;
//! - numeric columns: value-bound endpoints, predicate constants and their
//!   neighbours, and observed extremes;
//! - columns the query never reads: one placeholder.
//!
//! Synthetic units must satisfy the plan's partition constraints. The result
//! is a lower bound on the true sensitivity, so a derived bound below it is
//! unsound.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::executor::{check_constraints, evaluate_query, Cell, Dataset, Value};
use crate::par::{self, Strategy};
use crate::plan::{fixed_columns, AggOp, AnalysisPlan, ColumnKind, Literal, NodeKind};
use crate::statics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub max_units: usize,
    pub max_added_rows: usize,
    pub max_neighbors: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { max_units: 16, max_added_rows: 6, max_neighbors: 1_000_000, seed: 0, strategy: Strategy::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Removed(String),
    Added(Vec<Vec<Cell>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub empirical: f64,
    pub neighbors: usize,
    /// A neighbour attaining `empirical`, if any change was observed.
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("`{0}` is not an aggregate node")]
    NotAggregate(String),
    #[error("dataset has {found} units; the oracle is limited to {limit}")]
    TooManyUnits { found: usize, limit: usize },
    #[error("{count} addition neighbours exceed the limit of {limit}")]
    TooManyNeighbors { count: u128, limit: usize },
    #[error("clip `{0}` has no static row bound")]
    DynamicClip(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
}

fn push_unique_text(out: &mut Vec<String>, v: &str) {
    if !out.iter().any(|x| x == v) {
        out.push(v.to_string());
    }
}

fn push_unique_num(out: &mut Vec<f64>, v: f64) {
    if v.is_finite() && !out.iter().any(|x| x.to_bits() == v.to_bits()) {
        out.push(v);
    }
}

/// Candidate cells for every column; the unit column gets a placeholder.
fn templates_per_column(plan: &AnalysisPlan, aggregate: &str, ds: &Dataset, width: usize) -> Vec<Vec<Cell>> {
    let preds = plan.effective_predicate(aggregate);
    let fixed = fixed_columns(preds.iter().copied());
    let chain = plan.clip_chain(aggregate);
    let spec = match &plan.node(aggregate).expect("checked by caller").kind {
        NodeKind::Aggregate(a) => a,
        _ => unreachable!(),
    };

    let mut spread: BTreeSet<&str> = chain.iter().filter_map(|(_, c)| c.scope.as_deref()).collect();
    spread.extend(spec.group_by.as_deref());
    for pc in &plan.constraints {
        spread.insert(&pc.attribute);
        spread.extend(pc.within.iter().map(String::as_str));
    }
    let mut numeric_refs: BTreeSet<&str> = chain.iter().filter_map(|(_, c)| c.value_bounds.as_ref().map(|v| v.column.as_str())).collect();
    if spec.op == AggOp::Sum {
        numeric_refs.extend(spec.column.as_deref());
    }

    let observed = |col: usize| ds.rows().iter().map(move |r| &r[col]);
    ds.schema()
        .columns
        .iter()
        .enumerate()
        .map(|(i, col)| {
            if col.name == plan.privacy.unit_column {
                return vec![Cell::Text(String::new())];
            }
            let constants: Vec<&Literal> = preds.iter().filter(|c| c.column == col.name).map(|c| &c.value).collect();
            let referenced = !constants.is_empty() || spread.contains(col.name.as_str()) || numeric_refs.contains(col.name.as_str());
            match col.kind {
                ColumnKind::Categorical | ColumnKind::Identifier => {
                    let mut pool: Vec<String> = match col.closed_values() {
                        Some(vs) => vs.to_vec(),
                        None => {
                            let mut p = Vec::new();
                            for c in observed(i) {
                                push_unique_text(&mut p, &c.key());
                            }
                            p
                        }
                    };
                    for k in 0..width {
                        if pool.len() > width + constants.len() {
                            break;
                        }
                        if col.closed_values().is_none() {
                            push_unique_text(&mut pool, &format!("~other{k}"));
                        }
                    }
                    if !referenced {
                        return vec![Cell::Text(pool.first().cloned().unwrap_or_default())];
                    }
                    let mut out = Vec::new();
                    for lit in &constants {
                        if let Literal::Text(s) = lit {
                            if col.closed_values().is_none_or(|vs| vs.contains(s)) {
                                push_unique_text(&mut out, s);
                            }
                        }
                    }
                    let target = if spread.contains(col.name.as_str()) && !fixed.contains_key(&col.name) {
                        width.max(out.len() + 1)
                    } else {
                        out.len() + 1
                    };
                    for v in &pool {
                        if out.len() >= target {
                            break;
                        }
                        push_unique_text(&mut out, v);
                    }
                    out.into_iter().map(Cell::Text).collect()
                }
                ColumnKind::Numeric | ColumnKind::Timestamp => {
                    let as_cell = |x: f64| match col.kind {
                        ColumnKind::Timestamp => Cell::Time(x as i64),
                        _ => Cell::Number(x),
                    };
                    let mut out = Vec::new();
                    for lit in &constants {
                        let c = match lit {
                            Literal::Number(x) => Some(*x),
                            Literal::Text(s) => crate::executor::parse_timestamp(s).map(|t| t as f64),
                        };
                        if let Some(c) = c {
                            for x in [c - 1.0, c, c + 1.0] {
                                push_unique_num(&mut out, x);
                            }
                        }
                    }
                    for (_, clip) in &chain {
                        if let Some(vb) = clip.value_bounds.as_ref().filter(|vb| vb.column == col.name) {
                            push_unique_num(&mut out, vb.lo);
                            push_unique_num(&mut out, vb.hi);
                        }
                    }
                    let nums: Vec<f64> = observed(i).filter_map(|c| match c {
                        Cell::Number(x) => Some(*x),
                        Cell::Time(t) => Some(*t as f64),
                        Cell::Text(_) => None,
                    }).collect();
                    if !referenced {
                        return vec![as_cell(nums.first().copied().unwrap_or(0.0))];
                    }
                    if numeric_refs.contains(col.name.as_str()) {
                        let lo = nums.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        push_unique_num(&mut out, lo);
                        push_unique_num(&mut out, hi);
                    }
                    if out.is_empty() {
                        out.push(0.0);
                    }
                    out.into_iter().map(as_cell).collect()
                }
            }
        })
        .collect()
}

fn cartesian(columns: &[Vec<Cell>]) -> Vec<Vec<Cell>> {
    columns.iter().fold(vec![Vec::new()], |acc, options| {
        acc.iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut row = prefix.clone();
                    row.push(o.clone());
                    row
                })
            })
            .collect()
    })
}

/// Number of non-empty multisets of size at most `r` over `t` items.
fn multiset_count(t: usize, r: usize) -> u128 {
    // C(t + r, r) - 1
    let mut c: u128 = 1;
    for i in 1..=r as u128 {
        c = c.saturating_mul(t as u128 + i) / i;
    }
    c - 1
}

/// Every non-decreasing index sequence of length 1..=r over 0..t.
fn multisets(t: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(t: usize, r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == r {
            return;
        }
        for i in start..t {
            cur.push(i);
            rec(t, r, i, cur, out);
            cur.pop();
        }
    }
    rec(t, r, 0, &mut cur, &mut out);
    out
}

/// Largest observed change in `aggregate` over one-unit neighbours of `ds`.
pub fn empirical_sensitivity(
    plan: &AnalysisPlan,
    aggregate: &str,
    ds: &Dataset,
    cfg: &OracleConfig,
) -> Result<OracleResult, OracleError> {
    if !matches!(plan.node(aggregate).map(|n| &n.kind), Some(NodeKind::Aggregate(_))) {
        return Err(OracleError::NotAggregate(aggregate.to_string()));
    }
    if ds.unit_count() > cfg.max_units {
        return Err(OracleError::TooManyUnits { found: ds.unit_count(), limit: cfg.max_units });
    }
    // An added unit should be able to fill every clip and overflow it: k + 1
    // rows, or k per scope cell when the query spans several cells.
    let fixed = fixed_columns(plan.effective_predicate(aggregate));
    let (mut overflow, mut fill_cells) = (cfg.max_added_rows, cfg.max_added_rows);
    for (clip_id, clip) in plan.clip_chain(aggregate) {
        let k = statics::clip_bound_upper(plan, clip).ok_or_else(|| OracleError::DynamicClip(clip_id.to_string()))?;
        let k = usize::try_from(k).unwrap_or(usize::MAX);
        let cells = match clip.scope.as_deref() {
            Some(scope) if !fixed.contains_key(scope) => {
                plan.schema.column(scope).and_then(|c| c.closed_values()).map_or(1, <[String]>::len)
            }
            _ => 1,
        };
        overflow = overflow.max(k.saturating_add(1));
        fill_cells = fill_cells.max(k.saturating_mul(cells).saturating_add(1));
    }
    let query = |d: &Dataset| -> Result<Value, OracleError> {
        evaluate_query(plan, aggregate, d, cfg.seed, |id, clip| {
            statics::clip_bound_upper(plan, clip).ok_or_else(|| format!("clip `{id}` has no static bound"))
        })
        .map_err(OracleError::Eval)
    };
    let base = query(ds)?;

    let units: Vec<String> = ds.unit_index().keys().cloned().collect();
    let removals = par::try_map(cfg.strategy, &units, |u| Ok::<_, OracleError>(query(&ds.without_unit(u))?.l1_distance(&base)))?;

    let unit_col = ds.column_index(ds.unit_column()).expect("dataset has its unit column");
    let mut added_unit = "~added".to_string();
    while ds.unit_index().contains_key(&added_unit) {
        added_unit.push('~');
    }
    let mut templates = cartesian(&templates_per_column(plan, aggregate, ds, cfg.max_added_rows));
    for row in &mut templates {
        row[unit_col] = Cell::Text(added_unit.clone());
    }
    let added_rows = if multiset_count(templates.len(), fill_cells) <= cfg.max_neighbors as u128 { fill_cells } else { overflow };
    let count = multiset_count(templates.len(), added_rows);
    if count > cfg.max_neighbors as u128 {
        return Err(OracleError::TooManyNeighbors { count, limit: cfg.max_neighbors });
    }
    let sets = multisets(templates.len(), added_rows);
    let additions = par::try_map(cfg.strategy, &sets, |set| {
        let rows: Vec<Vec<Cell>> = set.iter().map(|&i| templates[i].clone()).collect();
        let alone = Dataset::new(ds.schema().clone(), ds.unit_column(), rows.clone())
            .map_err(|e| OracleError::Eval(e.to_string()))?;
        if check_constraints(plan, &alone).is_err() {
            return Ok(None);
        }
        let grown = ds.with_rows(rows).map_err(|e| OracleError::Eval(e.to_string()))?;
        Ok::<_, OracleError>(Some(query(&grown)?.l1_distance(&base)))
    })?;

    let mut best = OracleResult { empirical: 0.0, neighbors: 0, witness: None };
    let mut consider = |d: f64, w: &dyn Fn() -> Witness| {
        best.neighbors += 1;
        if d > best.empirical {
            best.empirical = d;
            best.witness = Some(w());
        }
    };
    for (u, d) in units.iter().zip(&removals) {
        consider(*d, &|| Witness::Removed(u.clone()));
    }
    for (set, d) in sets.iter().zip(&additions) {
        if let Some(d) = d {
            consider(*d, &|| Witness::Added(set.iter().map(|&i| templates[i].clone()).collect()));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_enumeration_matches_count() {
        for t in 1..5 {
            for r in 1..5 {
                assert_eq!(multisets(t, r).len() as u128, multiset_count(t, r));
            }
        }
    }
}
