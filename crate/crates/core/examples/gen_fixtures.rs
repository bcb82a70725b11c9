//! Regenerates the fixture corpus under `fixtures/`: plans, datasets and the
//! `corpus.json` manifest. Output is deterministic.
//!
//!     cargo run -p dpaudit-core --example gen_fixtures [-- <out dir>]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dpaudit_core::plan::parse_plan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const PRODUCTS: [&str; 7] = ["A", "B", "C", "D", "E", "F", "Others"];
const EVENTS: [&str; 5] = ["open", "close", "save", "reset", "error"];
const DAYS: [&str; 5] = ["Mon", "Tue", "Wed", "Thu", "Fri"];

fn telemetry_schema() -> Value {
    json!({"columns": [
        {"name": "Product Type", "kind": "categorical", "values": PRODUCTS},
        {"name": "Event Type", "kind": "categorical", "values": EVENTS},
        {"name": "Time of Event", "kind": "timestamp"},
        {"name": "User ID", "kind": "identifier"}
    ]})
}

fn restaurant_schema() -> Value {
    json!({"columns": [
        {"name": "VisitorId", "kind": "identifier"},
        {"name": "Day", "kind": "categorical", "values": DAYS},
        {"name": "Length", "kind": "categorical", "values": ["long", "short"]},
        {"name": "Time spent", "kind": "numeric"}
    ]})
}

/// Accumulates nodes and edges; edges from parameter and expression
/// references are added automatically.
struct Plan {
    name: String,
    schema: Value,
    unit: &'static str,
    nodes: Vec<Value>,
    edges: Vec<(String, String)>,
    constraints: Vec<Value>,
}

fn refs_in(expr: &Value, out: &mut Vec<String>) {
    match expr {
        Value::String(s) => out.push(s.clone()),
        Value::Array(items) => items.iter().skip(1).for_each(|i| refs_in(i, out)),
        _ => {}
    }
}

impl Plan {
    fn new(name: &str, schema: Value, unit: &'static str) -> Self {
        let mut p = Self { name: name.into(), schema, unit, nodes: vec![], edges: vec![], constraints: vec![] };
        p.nodes.push(json!({"id": "data", "kind": "source"}));
        p
    }

    fn edge(&mut self, parent: &str, child: &str) {
        let e = (parent.to_string(), child.to_string());
        if !self.edges.contains(&e) {
            self.edges.push(e);
        }
    }

    fn clip(&mut self, id: &str, input: &str, extra: Value) -> String {
        let mut node = json!({"id": id, "kind": "clip"});
        node.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        if let Some(r) = node["per_unit_bound"].get("ref").and_then(Value::as_str) {
            self.edge(r, id);
        }
        self.nodes.push(node);
        self.edge(input, id);
        id.into()
    }

    fn aggregate(&mut self, id: &str, input: &str, extra: Value) -> String {
        let mut node = json!({"id": id, "kind": "aggregate"});
        node.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        self.nodes.push(node);
        self.edge(input, id);
        id.into()
    }

    fn noise(&mut self, id: &str, input: &str, extra: Value) -> String {
        let mut node = json!({"id": id, "kind": "noise"});
        node.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        if let Some(r) = node["sensitivity"].get("ref").and_then(Value::as_str) {
            self.edge(r, id);
        }
        self.nodes.push(node);
        self.edge(input, id);
        id.into()
    }

    fn post(&mut self, id: &str, expr: Value) -> String {
        let mut refs = Vec::new();
        refs_in(&expr, &mut refs);
        self.nodes.push(json!({"id": id, "kind": "post_process", "expr": expr}));
        for r in refs {
            self.edge(&r, id);
        }
        id.into()
    }

    fn hyper(&mut self, id: &str, expr: Value) -> String {
        let mut refs = Vec::new();
        refs_in(&expr, &mut refs);
        self.nodes.push(json!({"id": id, "kind": "hyperparameter", "expr": expr}));
        for r in refs {
            self.edge(&r, id);
        }
        id.into()
    }

    fn release(&mut self, id: &str, input: &str) {
        self.nodes.push(json!({"id": id, "kind": "release"}));
        self.edge(input, id);
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "schema": self.schema,
            "privacy": {"unit_column": self.unit, "neighboring": "add_or_remove_one", "epsilon_total": 1.0},
            "nodes": self.nodes,
            "edges": self.edges.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
            "constraints": self.constraints,
        })
    }
}

fn pid(p: &str) -> String {
    p.to_lowercase()
}

fn product(p: &str) -> Value {
    json!(["eq", "Product Type", p])
}

fn d_average(repaired: bool) -> Plan {
    let name = if repaired { "telemetry-average-repaired" } else { "telemetry-average" };
    let mut plan = Plan::new(name, telemetry_schema(), "User ID");
    let users = plan.clip("one_row_per_user_product", "data", json!({"per_unit_bound": 1, "scope": "Product Type"}));
    let events = if repaired {
        plan.clip("events_clip", "data", json!({"per_unit_bound": 5, "scope": "Product Type"}))
    } else {
        "data".to_string()
    };
    for p in PRODUCTS {
        let id = pid(p);
        let total = plan.aggregate(&format!("events_{id}"), &events, json!({"op": "count", "predicate": [product(p)]}));
        let nusers = plan.aggregate(&format!("users_{id}"), &users, json!({"op": "count", "predicate": [product(p)]}));
        let avg = if repaired {
            let dp_total =
                plan.noise(&format!("dp_events_{id}"), &total, json!({"epsilon": "epsilon_total / 14", "sensitivity": 5}));
            let dp_users =
                plan.noise(&format!("dp_users_{id}"), &nusers, json!({"epsilon": "epsilon_total / 14", "sensitivity": 1}));
            plan.post(&format!("avg_{id}"), json!(["div", dp_total, ["max", dp_users, 1]]))
        } else {
            let dp_total = plan.noise(&format!("dp_events_{id}"), &total, json!({"epsilon": 1.0, "sensitivity": 1}));
            plan.post(&format!("avg_{id}"), json!(["div", dp_total, nusers]))
        };
        plan.release(&format!("out_avg_{id}"), &avg);
    }
    plan
}

/// z-scores of per-product error rates from per-product rate values.
fn zscores(plan: &mut Plan, rates: &[String]) {
    let n = rates.len() as f64;
    let mut add = vec![json!("add")];
    add.extend(rates.iter().map(|r| json!(r)));
    let mean = plan.post("mean_rate", json!(["div", add, n]));
    let mut sq = vec![json!("add")];
    sq.extend(rates.iter().map(|r| json!(["mul", ["sub", r, mean], ["sub", r, mean]])));
    let var = plan.post("var_rate", json!(["div", sq, n]));
    let std = plan.post("std_rate", json!(["sqrt", var]));
    for (p, r) in PRODUCTS.iter().zip(rates) {
        let z = plan.post(&format!("z_{}", pid(p)), json!(["div", ["sub", r, mean], std]));
        plan.release(&format!("out_z_{}", pid(p)), &z);
    }
}

fn d_zscore() -> Plan {
    let mut plan = Plan::new("telemetry-zscore", telemetry_schema(), "User ID");
    let mut rates = Vec::new();
    for p in PRODUCTS {
        let id = pid(p);
        let total = plan.aggregate(&format!("events_{id}"), "data", json!({"op": "count", "predicate": [product(p)]}));
        let errors = plan.aggregate(
            &format!("errors_{id}"),
            "data",
            json!({"op": "count", "predicate": [product(p), ["eq", "Event Type", "error"]]}),
        );
        let max_err = plan.aggregate(
            &format!("max_user_errors_{id}"),
            "data",
            json!({"op": "max_per_unit", "predicate": [product(p), ["eq", "Event Type", "error"]]}),
        );
        let sens = plan.hyper(&format!("sensitivity_{id}"), json!(["div", max_err, total]));
        let rate = plan.post(&format!("rate_{id}"), json!(["clamp", ["div", errors, total], 0, 1]));
        let dp = plan.noise(
            &format!("dp_rate_raw_{id}"),
            &rate,
            json!({"epsilon": "epsilon_total / 7", "sensitivity": {"ref": sens}, "signal_estimate": 0.2}),
        );
        rates.push(plan.post(&format!("dp_rate_{id}"), json!(["clamp", dp, 0, 1])));
    }
    zscores(&mut plan, &rates);
    plan
}

fn d_zscore_repaired() -> Plan {
    let mut plan = Plan::new("telemetry-zscore-repaired", telemetry_schema(), "User ID");
    let all = plan.clip("events_clip", "data", json!({"per_unit_bound": 5, "scope": "Product Type"}));
    let errs = plan.clip(
        "errors_clip",
        "data",
        json!({"per_unit_bound": 5, "scope": "Product Type", "filter": [["eq", "Event Type", "error"]]}),
    );
    let mut rates = Vec::new();
    for p in PRODUCTS {
        let id = pid(p);
        let total = plan.aggregate(&format!("events_{id}"), &all, json!({"op": "count", "predicate": [product(p)]}));
        let errors = plan.aggregate(&format!("errors_{id}"), &errs, json!({"op": "count", "predicate": [product(p)]}));
        let dp_total =
            plan.noise(&format!("dp_events_{id}"), &total, json!({"epsilon": "epsilon_total / 14", "sensitivity": 5}));
        let dp_errors = plan.noise(
            &format!("dp_errors_{id}"),
            &errors,
            json!({"epsilon": "epsilon_total / 14", "sensitivity": 5, "signal_estimate": 5}),
        );
        rates.push(plan.post(&format!("rate_{id}"), json!(["clamp", ["div", dp_errors, dp_total], 0, 1])));
    }
    zscores(&mut plan, &rates);
    plan
}

fn zscore_full_epsilon() -> Plan {
    let mut plan = Plan::new("zscore-per-product-full-epsilon", telemetry_schema(), "User ID");
    let errs = plan.clip(
        "errors_clip",
        "data",
        json!({"per_unit_bound": 5, "scope": "Product Type", "filter": [["eq", "Event Type", "error"]]}),
    );
    for p in PRODUCTS {
        let id = pid(p);
        let errors = plan.aggregate(&format!("errors_{id}"), &errs, json!({"op": "count", "predicate": [product(p)]}));
        let dp = plan.noise(&format!("dp_errors_{id}"), &errors, json!({"epsilon": 1.0, "sensitivity": 5}));
        plan.release(&format!("out_errors_{id}"), &dp);
    }
    plan
}

fn adaptive_clip() -> Plan {
    let mut plan = Plan::new("adaptive-clip", telemetry_schema(), "User ID");
    let events = plan.clip("events_clip", "data", json!({"per_unit_bound": 20}));
    let users = plan.clip("one_row_per_user", "data", json!({"per_unit_bound": 1}));
    let n_events = plan.aggregate("events", &events, json!({"op": "count"}));
    let n_users = plan.aggregate("users", &users, json!({"op": "count"}));
    let dp_events = plan.noise("dp_events", &n_events, json!({"epsilon": "epsilon_total / 3", "sensitivity": 20}));
    let dp_users = plan.noise("dp_users", &n_users, json!({"epsilon": "epsilon_total / 3", "sensitivity": 1}));
    let k = plan.hyper("error_bound", json!(["clamp", ["div", dp_events, ["max", dp_users, 1]], 1, 10]));
    let errs = plan.clip(
        "errors_clip",
        "data",
        json!({"per_unit_bound": {"ref": k}, "filter": [["eq", "Event Type", "error"]]}),
    );
    let errors = plan.aggregate("errors", &errs, json!({"op": "count"}));
    let dp = plan.noise("dp_errors", &errors, json!({"epsilon": "epsilon_total / 3", "sensitivity": "auto"}));
    plan.release("out_errors", &dp);
    plan.release("out_users", &dp_users);
    plan
}

fn telemetry_histogram() -> Plan {
    let mut plan = Plan::new("telemetry-histogram", telemetry_schema(), "User ID");
    let clip = plan.clip("per_type_clip", "data", json!({"per_unit_bound": 5, "scope": "Event Type"}));
    let hist = plan.aggregate("events_by_type", &clip, json!({"op": "count", "group_by": "Event Type"}));
    let dp = plan.noise("dp_events_by_type", &hist, json!({"epsilon": 1.0, "sensitivity": "auto"}));
    plan.release("out_histogram", &dp);
    plan
}

fn long_visit() -> Value {
    json!(["gt", "Time spent", 60])
}

fn restaurant_ratio() -> Plan {
    let mut plan = Plan::new("restaurant-ratio", restaurant_schema(), "VisitorId");
    let clip = plan.clip("visits_clip", "data", json!({"per_unit_bound": 5}));
    let long = plan.aggregate("long_visits", &clip, json!({"op": "count", "predicate": [long_visit()]}));
    let total = plan.aggregate("total_visits", &clip, json!({"op": "count"}));
    let dp_long = plan.noise("dp_long_visits", &long, json!({"epsilon": "epsilon_total / 2", "sensitivity": 5}));
    let dp_total = plan.noise("dp_total_visits", &total, json!({"epsilon": "epsilon_total / 2", "sensitivity": 5}));
    let ratio = plan.post("long_ratio", json!(["clamp", ["div", dp_long, dp_total], 0, 1]));
    plan.release("out_long_ratio", &ratio);
    plan
}

fn restaurant_time_spent() -> Plan {
    let mut plan = Plan::new("restaurant-time-spent", restaurant_schema(), "VisitorId");
    let clip = plan.clip(
        "visits_clip",
        "data",
        json!({"per_unit_bound": 5, "value_bounds": {"column": "Time spent", "lo": 0, "hi": 120}}),
    );
    let minutes = plan.aggregate("minutes", &clip, json!({"op": "sum", "column": "Time spent"}));
    let long_minutes =
        plan.aggregate("long_minutes", &clip, json!({"op": "sum", "column": "Time spent", "predicate": [long_visit()]}));
    let dp = plan.noise("dp_minutes", &minutes, json!({"epsilon": "epsilon_total / 2", "sensitivity": "auto"}));
    let dp_long = plan.noise("dp_long_minutes", &long_minutes, json!({"epsilon": "epsilon_total / 2", "sensitivity": 600}));
    plan.release("out_minutes", &dp);
    plan.release("out_long_minutes", &dp_long);
    plan
}

fn restaurant_count(name: &str, clip: Option<u64>, sensitivity: u64) -> Plan {
    let mut plan = Plan::new(name, restaurant_schema(), "VisitorId");
    let input = match clip {
        Some(k) => plan.clip("visits_clip", "data", json!({"per_unit_bound": k})),
        None => "data".into(),
    };
    let visits = plan.aggregate("visits", &input, json!({"op": "count"}));
    let dp = plan.noise("dp_visits", &visits, json!({"epsilon": 1.0, "sensitivity": sensitivity}));
    plan.release("out_visits", &dp);
    plan
}

fn b1_sensitivity_from_data() -> Plan {
    let mut plan = Plan::new("sensitivity-from-data", restaurant_schema(), "VisitorId");
    let rows = plan.aggregate("row_count", "data", json!({"op": "count"}));
    plan.hyper("sensitivity", json!(rows));
    let clip = plan.clip("visits_clip", "data", json!({"per_unit_bound": 10}));
    let visits = plan.aggregate("visits", &clip, json!({"op": "count"}));
    let dp = plan.noise("dp_visits", &visits, json!({"epsilon": 1.0, "sensitivity": {"ref": "sensitivity"}}));
    plan.edge("sensitivity", &dp);
    plan.release("out_visits", &dp);
    plan
}

fn b3_true_denominator() -> Plan {
    let mut plan = Plan::new("true-denominator", restaurant_schema(), "VisitorId");
    let clip = plan.clip("visits_clip", "data", json!({"per_unit_bound": 5}));
    let long = plan.aggregate("long_visits", &clip, json!({"op": "count", "predicate": [long_visit()]}));
    let total = plan.aggregate("total_visits", "data", json!({"op": "count"}));
    let dp_long = plan.noise("dp_long_visits", &long, json!({"epsilon": 1.0, "sensitivity": 5}));
    let ratio = plan.post("long_ratio", json!(["div", dp_long, total]));
    plan.release("out_long_ratio", &ratio);
    plan
}

fn b4_noisy_ratio() -> Plan {
    let mut plan = Plan::new("noisy-ratio", restaurant_schema(), "VisitorId");
    let clip = plan.clip("visits_clip", "data", json!({"per_unit_bound": 5}));
    let long = plan.aggregate("long_visits", &clip, json!({"op": "count", "predicate": [long_visit()]}));
    let total = plan.aggregate("total_visits", &clip, json!({"op": "count"}));
    let ratio = plan.post("long_ratio", json!(["clamp", ["div", long, total], 0, 1]));
    let dp = plan.noise("dp_long_ratio", &ratio, json!({"epsilon": 1.0, "sensitivity": 1, "signal_estimate": 0.3}));
    plan.release("out_long_ratio", &dp);
    plan
}

fn b5_per_day(name: &str, epsilon: Value) -> Plan {
    let mut plan = Plan::new(name, restaurant_schema(), "VisitorId");
    plan.constraints.push(json!({"attribute": "Length", "within": ["Day"], "max_rows_per_unit": 1}));
    for day in DAYS {
        for len in ["long", "short"] {
            let q = format!("{len}_{}", day.to_lowercase());
            let agg = plan.aggregate(
                &format!("{q}_visits"),
                "data",
                json!({"op": "count", "predicate": [["eq", "Day", day], ["eq", "Length", len]]}),
            );
            let dp = plan.noise(&format!("dp_{q}_visits"), &agg, json!({"epsilon": epsilon, "sensitivity": 1}));
            plan.release(&format!("out_{q}_visits"), &dp);
        }
    }
    plan
}

fn telemetry_rows(rng: &mut ChaCha8Rng, users: usize, rows: usize) -> Vec<[String; 4]> {
    let start = 1_672_531_200i64; // 2023-01-01T00:00:00Z
    let year = 365 * 24 * 3600;
    // Each user favours two or three products and has a personal error rate.
    let profiles: Vec<(Vec<usize>, f64)> = (0..users)
        .map(|_| {
            let n = rng.gen_range(2..=3);
            let mut ps: Vec<usize> = (0..n).map(|_| rng.gen_range(0..PRODUCTS.len())).collect();
            ps.sort_unstable();
            ps.dedup();
            (ps, rng.gen_range(0.02..0.25))
        })
        .collect();
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        // Every user gets a row; beyond that, low user ids are heavier users.
        let u = if i < users { i } else { ((rng.gen::<f64>().powf(1.6)) * users as f64) as usize };
        let (ps, err) = &profiles[u];
        let p = if rng.gen_bool(0.9) { ps[rng.gen_range(0..ps.len())] } else { rng.gen_range(0..PRODUCTS.len()) };
        let e = if rng.gen_bool(*err) { "error" } else { EVENTS[rng.gen_range(0..4)] };
        let t = chrono::DateTime::from_timestamp(start + rng.gen_range(0..year), 0).unwrap();
        out.push([PRODUCTS[p].to_string(), e.to_string(), t.format("%Y-%m-%d %H:%M:%S").to_string(), format!("user{:03}", u + 1)]);
    }
    out.sort_by(|a, b| a[2].cmp(&b[2]));
    out
}

fn telemetry_csv(rows: &[[String; 4]]) -> String {
    let mut s = String::from("Product Type,Event Type,Time of Event,User ID\n");
    for r in rows {
        writeln!(s, "{}", r.join(",")).unwrap();
    }
    s
}

fn restaurant_csv(rng: &mut ChaCha8Rng, visitors: usize) -> String {
    let mut s = String::from("VisitorId,Day,Length,Time spent\n");
    for v in 1..=visitors {
        let loyalty = rng.gen_range(0.1..0.9);
        for day in DAYS {
            if rng.gen_bool(loyalty) {
                // Whole minutes, never exactly 60, so "> 60" and ">= 60" agree.
                let mut minutes = rng.gen_range(15..=130);
                if minutes == 60 {
                    minutes = 61;
                }
                let len = if minutes >= 60 { "long" } else { "short" };
                writeln!(s, "v{v:03},{day},{len},{minutes}").unwrap();
            }
        }
    }
    s
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));

    let mut rng = ChaCha8Rng::seed_from_u64(20230101);
    write(&out.join("data/telemetry.csv"), &telemetry_csv(&telemetry_rows(&mut rng, 100, 2000)));
    write(&out.join("data/restaurant.csv"), &restaurant_csv(&mut rng, 60));
    write(&out.join("data/telemetry-six-users.csv"), &telemetry_csv(&telemetry_rows(&mut rng, 6, 14)));
    let mut heavy: Vec<[String; 4]> = (0..7)
        .map(|i| ["A".into(), if i == 3 { "error" } else { "open" }.into(), format!("2023-03-0{} 09:00:00", i + 1), "user001".into()])
        .collect();
    heavy.push(["A".into(), "save".into(), "2023-03-02 10:00:00".into(), "user002".into()]);
    heavy.push(["B".into(), "error".into(), "2023-03-04 11:30:00".into(), "user003".into()]);
    write(&out.join("data/telemetry-heavy-user.csv"), &telemetry_csv(&heavy));

    let cases: Vec<(Plan, &str, Value, &str)> = vec![
        (d_average(false), "telemetry.csv", json!({"codes": ["M1", "M3", "M5"]}),
         "Average events per product: per-product event counts are noised with sensitivity 1 although a user can contribute any number of events, the denominator (distinct users per product) is released without noise, and seven releases at epsilon 1.0 each overlap on the same users."),
        (d_average(true), "telemetry.csv", json!({"verdict": "pass"}),
         "The average plan repaired: events are clipped to 5 per user per product, both numerator and denominator are noised, and the budget is split fourteen ways."),
        (d_zscore(), "telemetry.csv", json!({"codes": ["M2", "M4"]}),
         "Z-scores of per-product error rates: the noise scale comes from the largest per-user error count divided by the true event total, both read without noise, and noise with sensitivity up to 1 is added to rates that are far smaller."),
        (d_zscore_repaired(), "telemetry.csv", json!({"verdict": "pass"}),
         "The z-score plan repaired: clipped per-product event and error counts are each noised at epsilon_total / 14 with sensitivity 5, and rates and z-scores are computed from the noised counts."),
        (zscore_full_epsilon(), "telemetry.csv", json!({"codes": ["M5"]}),
         "Seven per-product error counts each released at epsilon 1.0; every user may appear in every product, so the worst case is 7.0 against a limit of 1.0."),
        (adaptive_clip(), "telemetry.csv", json!({"verdict": "pass"}),
         "The per-user error clip bound is derived from noised, released statistics, which is post-processing and costs no extra budget."),
        (telemetry_histogram(), "telemetry.csv", json!({"verdict": "pass"}),
         "Histogram of event types with at most 5 events per user per type; the derived sensitivity covers all five cells."),
        (restaurant_ratio(), "restaurant.csv", json!({"verdict": "pass"}),
         "Share of long visits: visits are clipped to 5 per visitor and both the count and the total are noised at epsilon / 2."),
        (restaurant_time_spent(), "restaurant.csv", json!({"verdict": "pass"}),
         "Total minutes spent, overall and in long visits: at most 5 visits per visitor, each capped at 120 minutes, so one visitor moves either sum by at most 600."),
        (b1_sensitivity_from_data(), "restaurant.csv", json!({"codes": ["M2"]}),
         "The sensitivity is set to the number of rows in the data."),
        (restaurant_count("fixed-sensitivity", Some(10), 10), "restaurant.csv", json!({"verdict": "pass"}),
         "A fixed sensitivity of 10, chosen without looking at the data and enforced by a clip."),
        (restaurant_count("unclipped-count", None, 1), "restaurant.csv", json!({"codes": ["M1"]}),
         "Total visits with sensitivity 1, although one visitor can visit many times."),
        (restaurant_count("clipped-count", Some(5), 5), "restaurant.csv", json!({"verdict": "pass"}),
         "Visits clipped to 5 per visitor, with sensitivity 5."),
        (b3_true_denominator(), "restaurant.csv", json!({"codes": ["M3"]}),
         "A noised count of long visits divided by the true total number of visits."),
        (b4_noisy_ratio(), "restaurant.csv", json!({"codes": ["M4"]}),
         "Noise with sensitivity 1 added to a ratio that lies in [0, 1] and is expected to be about 0.3."),
        (b5_per_day("per-day-full-epsilon", json!("epsilon_total")), "restaurant.csv", json!({"codes": ["M5"]}),
         "Long and short visit counts for each of five days, each at the full epsilon. A visitor comes at most once a day, so each day costs epsilon, but five days cost 5 * epsilon."),
        (b5_per_day("per-day-split", json!("epsilon_total / 5")), "restaurant.csv", json!({"verdict": "pass"}),
         "The same per-day counts at epsilon / 5 each, for a total of exactly epsilon."),
    ];

    let mut manifest = Vec::new();
    for (plan, data, expected, note) in cases {
        let doc = plan.to_json();
        let text = serde_json::to_string_pretty(&doc).unwrap() + "\n";
        if let Err(e) = parse_plan(&text) {
            panic!("{}: generated plan does not parse: {e}", plan.name);
        }
        let file = format!("plans/{}.json", plan.name);
        write(&out.join(&file), &text);
        manifest.push(json!({
            "name": plan.name,
            "plan": file,
            "dataset": format!("data/{data}"),
            "expected": expected,
            "note": note,
        }));
    }
    write(&out.join("corpus.json"), &(serde_json::to_string_pretty(&json!({"cases": manifest})).unwrap() + "\n"));
    println!("wrote {} fixtures to {}", manifest.len(), out.display());
}
