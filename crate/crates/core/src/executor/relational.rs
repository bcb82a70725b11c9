//! Row-level operators: contribution clipping and aggregation.
//!
//! Operators work on a [`Relation`], a list of surviving row indices into a
//! [`Dataset`] plus the value clamps applied so far, so chains of clips never
//! copy rows.

use std::collections::BTreeMap;

use rand::seq::index;

use super::dataset::{Cell, Dataset};
use super::noise::keyed_stream;
use super::value::Value;
use crate::plan::{AggOp, AggregateSpec, ClipSpec, Comparison};

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub rows: Vec<usize>,
    /// `(column index, lo, hi)` clamps, applied in order when reading values.
    pub clamps: Vec<(usize, f64, f64)>,
}

impl Relation {
    pub fn all(ds: &Dataset) -> Self {
        Self { rows: (0..ds.len()).collect(), clamps: Vec::new() }
    }

    pub fn cell(&self, ds: &Dataset, row: usize, col: usize) -> Cell {
        let raw = &ds.rows()[row][col];
        match raw {
            Cell::Number(x) => {
                let v = self
                    .clamps
                    .iter()
                    .filter(|(c, _, _)| *c == col)
                    .fold(*x, |v, (_, lo, hi)| v.max(*lo).min(*hi));
                Cell::Number(v)
            }
            other => other.clone(),
        }
    }

    fn matches(&self, ds: &Dataset, row: usize, predicate: &[(usize, &Comparison)]) -> bool {
        predicate.iter().all(|(col, c)| {
            self.cell(ds, row, *col).compare(&c.value).is_some_and(|ord| c.op.holds(ord))
        })
    }
}

fn resolve_predicate<'a>(ds: &Dataset, predicate: &'a [Comparison]) -> Result<Vec<(usize, &'a Comparison)>, String> {
    predicate
        .iter()
        .map(|c| {
            ds.column_index(&c.column)
                .map(|i| (i, c))
                .ok_or_else(|| format!("predicate references unknown column `{}`", c.column))
        })
        .collect()
}

/// Keeps at most `k` rows per privacy unit (per unit and scope cell when a
/// scope is given) among rows passing `spec.filter`, choosing survivors by
/// seeded uniform sampling without replacement. Survivors keep their input
/// order. Each (clip, unit, cell) group samples from its own stream, so one
/// unit's rows never influence another unit's survivors.
pub fn clip_relation(
    ds: &Dataset,
    input: &Relation,
    clip_id: &str,
    k: u64,
    spec: &ClipSpec,
    seed: u64,
) -> Result<Relation, String> {
    let filter = resolve_predicate(ds, &spec.filter)?;
    let scope_col = match &spec.scope {
        Some(s) => Some(ds.column_index(s).ok_or_else(|| format!("clip scope references unknown column `{s}`"))?),
        None => None,
    };
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for &row in &input.rows {
        if !input.matches(ds, row, &filter) {
            continue;
        }
        let cell = scope_col.map(|c| input.cell(ds, row, c).key()).unwrap_or_default();
        groups.entry((ds.unit_of(row), cell)).or_default().push(row);
    }
    let k = usize::try_from(k).unwrap_or(usize::MAX);
    let mut survivors = Vec::with_capacity(input.rows.len());
    for ((unit, cell), rows) in groups {
        if rows.len() <= k {
            survivors.extend(rows);
        } else {
            let mut rng = keyed_stream(seed, "clip", &[clip_id, &unit, &cell]);
            survivors.extend(index::sample(&mut rng, rows.len(), k).into_iter().map(|i| rows[i]));
        }
    }
    survivors.sort_unstable();

    let mut clamps = input.clamps.clone();
    if let Some(vb) = &spec.value_bounds {
        let col = ds
            .column_index(&vb.column)
            .ok_or_else(|| format!("value_bounds references unknown column `{}`", vb.column))?;
        clamps.push((col, vb.lo, vb.hi));
    }
    Ok(Relation { rows: survivors, clamps })
}

/// Exact count/sum over predicate-matching rows; one value per group cell
/// when grouped, with every declared cell present.
pub fn aggregate_relation(ds: &Dataset, rel: &Relation, spec: &AggregateSpec) -> Result<Value, String> {
    let predicate = resolve_predicate(ds, &spec.predicate)?;
    let value_col = match (spec.op, &spec.column) {
        (AggOp::Sum, Some(c)) => Some(ds.column_index(c).ok_or_else(|| format!("sum references unknown column `{c}`"))?),
        (AggOp::Sum, None) => return Err("sum needs a column".into()),
        _ => None,
    };
    let group = match &spec.group_by {
        Some(g) => {
            let col = ds.column_index(g).ok_or_else(|| format!("group_by references unknown column `{g}`"))?;
            let cells = ds.schema().columns[col]
                .closed_values()
                .ok_or_else(|| format!("group_by column `{g}` has no closed value set"))?
                .to_vec();
            Some((col, cells))
        }
        None => None,
    };

    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    let mut per_unit: BTreeMap<(String, String), f64> = BTreeMap::new();
    if let Some((_, cells)) = &group {
        for c in cells {
            totals.insert(c.clone(), 0.0);
        }
    } else {
        totals.insert(String::new(), 0.0);
    }
    for &row in &rel.rows {
        if !rel.matches(ds, row, &predicate) {
            continue;
        }
        let cell = group.as_ref().map(|(col, _)| rel.cell(ds, row, *col).key()).unwrap_or_default();
        match spec.op {
            AggOp::Count => *totals.entry(cell).or_default() += 1.0,
            AggOp::Sum => {
                let v = rel.cell(ds, row, value_col.unwrap()).as_number().unwrap_or(0.0);
                *totals.entry(cell).or_default() += v;
            }
            AggOp::MaxPerUnit => *per_unit.entry((cell, ds.unit_of(row))).or_default() += 1.0,
        }
    }
    if spec.op == AggOp::MaxPerUnit {
        for ((cell, _), n) in per_unit {
            let slot = totals.entry(cell).or_default();
            *slot = slot.max(n);
        }
    }
    Ok(match group {
        Some(_) => Value::Cells(totals),
        None => Value::Scalar(totals[""]),
    })
}

/// Applies [`clip_relation`] to a whole dataset and returns the survivors.
pub fn clip_contributions(ds: &Dataset, k: u64, scope: Option<&str>, seed: u64) -> Dataset {
    let spec = ClipSpec {
        per_unit_bound: crate::plan::ClipBound::Fixed(k),
        scope: scope.map(str::to_string),
        value_bounds: None,
        filter: Vec::new(),
    };
    let rel = clip_relation(ds, &Relation::all(ds), "", k, &spec, seed).expect("scope column exists");
    ds.select(&rel.rows)
}

/// Evaluates an aggregate over every row of a dataset.
pub fn evaluate_aggregate(spec: &AggregateSpec, ds: &Dataset) -> Result<Value, String> {
    aggregate_relation(ds, &Relation::all(ds), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{Column, ColumnKind, Schema};

    fn ds(rows: &[(&str, &str, &str)]) -> Dataset {
        let schema = Schema {
            columns: vec![
                Column::categorical("Product Type", &["A", "B", "C"]),
                Column::categorical("Event Type", &["open", "error"]),
                Column::new("User ID", ColumnKind::Identifier),
            ],
        };
        let rows = rows
            .iter()
            .map(|(p, e, u)| vec![Cell::Text(p.to_string()), Cell::Text(e.to_string()), Cell::Text(u.to_string())])
            .collect();
        Dataset::new(schema, "User ID", rows).unwrap()
    }

    fn count_errors_by_product() -> AggregateSpec {
        AggregateSpec {
            op: AggOp::Count,
            predicate: vec![Comparison::eq_text("Event Type", "error")],
            group_by: Some("Product Type".into()),
            column: None,
        }
    }

    #[test]
    fn grouped_count_fills_missing_cells() {
        let d = ds(&[("A", "error", "u1"), ("A", "open", "u2"), ("B", "error", "u2")]);
        let v = evaluate_aggregate(&count_errors_by_product(), &d).unwrap();
        assert_eq!(
            v,
            Value::Cells(BTreeMap::from([("A".into(), 1.0), ("B".into(), 1.0), ("C".into(), 0.0)]))
        );
        let empty = ds(&[]);
        assert_eq!(evaluate_aggregate(&count_errors_by_product(), &empty).unwrap().values(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn clipping_keeps_at_most_k_per_unit() {
        let rows: Vec<(&str, &str, &str)> = (0..8).map(|_| ("A", "open", "v1")).chain([("B", "open", "v2"); 3]).collect();
        let d = ds(&rows);
        let clipped = clip_contributions(&d, 5, None, 7);
        assert_eq!(clipped.unit_index()["v1"].len(), 5);
        assert_eq!(clipped.unit_index()["v2"].len(), 3);
        assert_eq!(clipped, clip_contributions(&d, 5, None, 7));
    }

    #[test]
    fn scoped_clip_bounds_each_cell() {
        let rows = [("A", "open", "u"); 4].into_iter().chain([("B", "open", "u"); 4]).collect::<Vec<_>>();
        let clipped = clip_contributions(&ds(&rows), 2, Some("Product Type"), 1);
        assert_eq!(clipped.len(), 4);
    }

    #[test]
    fn unknown_predicate_column_errors() {
        let spec = AggregateSpec {
            op: AggOp::Count,
            predicate: vec![Comparison::eq_text("Colour", "red")],
            group_by: None,
            column: None,
        };
        assert!(evaluate_aggregate(&spec, &ds(&[])).unwrap_err().contains("Colour"));
    }

    #[test]
    fn max_per_unit_counts_the_heaviest_unit() {
        let d = ds(&[("A", "error", "u1"), ("A", "error", "u1"), ("A", "error", "u2")]);
        let spec = AggregateSpec { op: AggOp::MaxPerUnit, predicate: vec![], group_by: None, column: None };
        assert_eq!(evaluate_aggregate(&spec, &d).unwrap(), Value::Scalar(2.0));
    }
}
