//! Long-form documentation for each finding code.

use dpaudit_core::verifier::Code;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub code: &'static str,
    pub title: &'static str,
    pub definition: &'static str,
    pub wrong: &'static str,
    pub fixed: &'static str,
    pub remediation: &'static str,
}

pub fn explanation(code: Code) -> Explanation {
    let (definition, wrong, fixed, remediation) = match code {
        Code::M1 => (
            "The sensitivity given to a noise node is smaller than the largest change one privacy unit can cause \
in the value being noised. Counting visits with sensitivity 1 is wrong when one visitor can visit many \
times: removing that visitor changes the count by their number of visits.",
            r#"{"id": "visits", "kind": "aggregate", "op": "count"},
{"id": "dp_visits", "kind": "noise", "epsilon": 1.0, "sensitivity": 1}
edges: data -> visits -> dp_visits"#,
            r#"{"id": "visits_clip", "kind": "clip", "per_unit_bound": 5},
{"id": "visits", "kind": "aggregate", "op": "count"},
{"id": "dp_visits", "kind": "noise", "epsilon": 1.0, "sensitivity": 5}
edges: data -> visits_clip -> visits -> dp_visits"#,
            "Bound each unit's contribution first (a clip keeping at most k rows per unit, or a declared \
partition constraint), then declare a sensitivity at least as large as the bound, or declare \"auto\" to \
use the derived bound.",
        ),
        Code::M2 => (
            "A hyperparameter (sensitivity, epsilon, clip bound or division guard) is computed from the data \
without noise. The hyperparameter itself then leaks information, even though the released value is noised.",
            r#"{"id": "row_count", "kind": "aggregate", "op": "count"},
{"id": "sensitivity", "kind": "hyperparameter", "expr": "row_count"},
{"id": "dp_visits", "kind": "noise", "epsilon": 1.0, "sensitivity": {"ref": "sensitivity"}}"#,
            r#"{"id": "dp_visits", "kind": "noise", "epsilon": 1.0, "sensitivity": 10}
(with a clip keeping at most 10 rows per unit)"#,
            "Fix the value without looking at the data, or compute it from values that were already noised \
and released; post-processing noised values costs no extra budget.",
        ),
        Code::M3 => (
            "A released value depends on the data along some path that never passes through a noise node. \
Noising the numerator of a ratio does not protect the ratio when the denominator is exact.",
            r#"{"id": "dp_long_visits", "kind": "noise", "epsilon": 1.0, "sensitivity": 5},
{"id": "long_ratio", "kind": "post_process", "expr": ["div", "dp_long_visits", "total_visits"]}
(total_visits is an exact count)"#,
            r#"{"id": "dp_long_visits", "kind": "noise", "epsilon": "epsilon_total / 2", "sensitivity": 5},
{"id": "dp_total_visits", "kind": "noise", "epsilon": "epsilon_total / 2", "sensitivity": 5},
{"id": "long_ratio", "kind": "post_process", "expr": ["div", "dp_long_visits", "dp_total_visits"]}"#,
            "Split epsilon between the queries (here epsilon_total / 2 each), noise every quantity the \
release depends on, and combine only the noised values.",
        ),
        Code::M4 => (
            "The noise is large compared to the value it protects, so the result carries little information. \
This does not break privacy and is reported as a warning. A ratio in [0, 1] noised with sensitivity 1 \
has noise of the same order as the whole range of the value.",
            r#"{"id": "long_ratio", "kind": "post_process", "expr": ["clamp", ["div", "long_visits", "total_visits"], 0, 1]},
{"id": "dp_long_ratio", "kind": "noise", "epsilon": 1.0, "sensitivity": 1, "signal_estimate": 0.3}"#,
            r#"{"id": "dp_long_visits", "kind": "noise", "epsilon": "epsilon_total / 2", "sensitivity": 5},
{"id": "dp_total_visits", "kind": "noise", "epsilon": "epsilon_total / 2", "sensitivity": 5},
{"id": "long_ratio", "kind": "post_process", "expr": ["clamp", ["div", "dp_long_visits", "dp_total_visits"], 0, 1]}"#,
            "Noise the underlying counts or sums, which are large relative to their sensitivity, and compute \
the ratio afterwards. The warning threshold on signal / sensitivity can be changed with --threshold.",
        ),
        Code::M5 => (
            "The worst-case privacy budget spent on one unit across all noise nodes exceeds epsilon_total. \
Budgets add up across queries that can see the same unit; they only combine by maximum when a declared \
partition constraint guarantees a unit falls in a single cell. Example: count long and short visits for \
each of 5 days, each query at epsilon, where every visitor comes at most once a day. On one day a visitor \
is either a long or a short visit, so the day costs max(epsilon, epsilon) = epsilon. A visitor may come \
every day, though, so the five days cost 5 * epsilon in total, five times the allowance.",
            r#"10 noise nodes, one per (Day, Length) pair, each with "epsilon": "epsilon_total"
constraint: {"attribute": "Length", "within": ["Day"], "max_rows_per_unit": 1}
worst case: 5 * epsilon_total"#,
            r#"the same 10 noise nodes, each with "epsilon": "epsilon_total / 5"
worst case: 5 * (epsilon_total / 5) = epsilon_total"#,
            "Divide epsilon_total among the queries that can see the same unit, for example epsilon_total / n \
each. Declare a partition constraint only when the data really guarantees it; disjoint values are not \
disjoint units.",
        ),
    };
    Explanation { code: code.long(), title: code.title(), definition, wrong, fixed, remediation }
}

pub fn render_text(e: &Explanation) -> String {
    let indent = |s: &str| s.lines().map(|l| format!("    {l}\n")).collect::<String>();
    format!(
        "{} — {}\n\n{}\n\nWrong:\n{}\nFixed:\n{}\nHow to fix: {}\n",
        e.code,
        e.title,
        e.definition,
        indent(e.wrong),
        indent(e.fixed),
        e.remediation
    )
}
