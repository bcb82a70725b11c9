//! Release values recomputed straight from the CSV files, without the
//! engine. Each function mirrors one correct fixture with noise switched off.
//!
//! Clipping keeps an arbitrary subset of a unit's rows, so every plan here is
//! built so that the kept subset does not matter: counts over a clip scoped
//! by the counted product are `sum over units of min(k, rows)`, and sums only
//! appear where no rows are dropped.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

const PRODUCTS: [&str; 7] = ["A", "B", "C", "D", "E", "F", "Others"];
const EVENT_TYPES: [&str; 5] = ["open", "close", "save", "reset", "error"];
const DAYS: [&str; 5] = ["Mon", "Tue", "Wed", "Thu", "Fri"];
const GUARD: f64 = 1e-6;

fn records(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.deserialize().map(|r| r.unwrap()).collect()
}

/// Rows per unit satisfying `keep`.
fn per_unit(rows: &[BTreeMap<String, String>], unit: &str, keep: impl Fn(&BTreeMap<String, String>) -> bool) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in rows.iter().filter(|r| keep(r)) {
        *out.entry(r[unit].clone()).or_insert(0) += 1;
    }
    out
}

fn clipped_total(counts: &BTreeMap<String, usize>, k: usize) -> f64 {
    counts.values().map(|&n| n.min(k) as f64).sum()
}

fn zscores(rates: &[f64]) -> Map<String, Value> {
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    PRODUCTS
        .iter()
        .zip(rates)
        .map(|(p, r)| (format!("out_z_{}", p.to_lowercase()), json!((r - mean) / std.max(GUARD))))
        .collect()
}

fn telemetry(name: &str, rows: &[BTreeMap<String, String>]) -> Option<Map<String, Value>> {
    let unit = "User ID";
    let product = |p: &'static str| move |r: &BTreeMap<String, String>| r["Product Type"] == p;
    let mut out = Map::new();
    match name {
        "telemetry-average-repaired" => {
            for p in PRODUCTS {
                let counts = per_unit(rows, unit, product(p));
                let avg = clipped_total(&counts, 5) / (counts.len() as f64).max(1.0).max(GUARD);
                out.insert(format!("out_avg_{}", p.to_lowercase()), json!(avg));
            }
        }
        "telemetry-zscore-repaired" => {
            let rates: Vec<f64> = PRODUCTS
                .iter()
                .map(|&p| {
                    let events = clipped_total(&per_unit(rows, unit, product(p)), 5);
                    let errors = clipped_total(&per_unit(rows, unit, |r| r["Product Type"] == p && r["Event Type"] == "error"), 5);
                    (errors / events.max(GUARD)).clamp(0.0, 1.0)
                })
                .collect();
            out = zscores(&rates);
        }
        "adaptive-clip" => {
            let events = clipped_total(&per_unit(rows, unit, |_| true), 20);
            let users = per_unit(rows, unit, |_| true).len() as f64;
            let k = (events / users.max(1.0).max(GUARD)).clamp(1.0, 10.0).floor() as usize;
            let errors = clipped_total(&per_unit(rows, unit, |r| r["Event Type"] == "error"), k);
            out.insert("out_errors".into(), json!(errors));
            out.insert("out_users".into(), json!(users));
        }
        "telemetry-histogram" => {
            let cells: Map<String, Value> = EVENT_TYPES
                .iter()
                .map(|&e| (e.to_string(), json!(clipped_total(&per_unit(rows, unit, |r| r["Event Type"] == e), 5))))
                .collect();
            out.insert("out_histogram".into(), Value::Object(cells));
        }
        _ => return None,
    }
    Some(out)
}

fn restaurant(name: &str, rows: &[BTreeMap<String, String>]) -> Option<Map<String, Value>> {
    let minutes = |r: &BTreeMap<String, String>| r["Time spent"].parse::<f64>().unwrap();
    let total = rows.len() as f64;
    let long = rows.iter().filter(|r| minutes(r) > 60.0).count() as f64;
    let mut out = Map::new();
    match name {
        "restaurant-ratio" => {
            out.insert("out_long_ratio".into(), json!((long / total.max(GUARD)).clamp(0.0, 1.0)));
        }
        "restaurant-time-spent" => {
            let capped = |r: &BTreeMap<String, String>| minutes(r).clamp(0.0, 120.0);
            out.insert("out_minutes".into(), json!(rows.iter().map(capped).sum::<f64>()));
            out.insert(
                "out_long_minutes".into(),
                json!(rows.iter().filter(|r| capped(r) > 60.0).map(capped).sum::<f64>()),
            );
        }
        "fixed-sensitivity" | "clipped-count" => {
            out.insert("out_visits".into(), json!(total));
        }
        "per-day-split" => {
            for day in DAYS {
                for len in ["long", "short"] {
                    let n = rows.iter().filter(|r| r["Day"] == day && r["Length"] == len).count();
                    out.insert(format!("out_{len}_{}_visits", day.to_lowercase()), json!(n as f64));
                }
            }
        }
        _ => return None,
    }
    Some(out)
}

/// Checks the assumption above that no restaurant visitor has more than five
/// visits, so a clip at 5 keeps every row.
pub fn restaurant_max_visits(path: &Path) -> usize {
    per_unit(&records(path), "VisitorId", |_| true).values().copied().max().unwrap_or(0)
}

/// Expected releases for a correct fixture, or `None` if there is no
/// recount for it.
pub fn expected_releases(plan_name: &str, data: &Path) -> Option<Map<String, Value>> {
    let rows = records(data);
    if rows.first().is_some_and(|r| r.contains_key("User ID")) {
        telemetry(plan_name, &rows)
    } else {
        restaurant(plan_name, &rows)
    }
}

/// Largest relative difference between two release maps of identical shape;
/// `None` if the shapes differ.
pub fn max_relative_error(got: &Value, want: &Value) -> Option<f64> {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64()?, b.as_f64()?);
            Some(if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
        }
        (Value::Object(a), Value::Object(b)) => {
            if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
                return None;
            }
            a.values().zip(b.values()).try_fold(0.0f64, |acc, (x, y)| Some(acc.max(max_relative_error(x, y)?)))
        }
        _ => None,
    }
}
