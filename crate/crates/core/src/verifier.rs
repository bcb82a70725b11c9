//! The five privacy checks and the verification report.
//!
//! | code | what it catches |
//! |------|-----------------|
//! | M1 | declared sensitivity below what one unit can actually change |
//! | M2 | hyperparameters computed from un-noised data |
//! | M3 | releases that reach the data along a path with no noise |
//! | M4 | noise large relative to the signal it protects (warning only) |
//! | M5 | worst-case budget above `epsilon_total` |

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::budget::{self, compose, BudgetError, BudgetLedger};
use crate::plan::{validate_plan, AnalysisPlan, NodeKind, SensitivityDecl, StructuralCode, StructuralError};
use crate::sensitivity::{derive_sensitivity, noise_input_bound, Delta};
use crate::statics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Code {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl Code {
    pub const ALL: [Code; 5] = [Code::M1, Code::M2, Code::M3, Code::M4, Code::M5];

    pub fn short(self) -> &'static str {
        match self {
            Code::M1 => "M1",
            Code::M2 => "M2",
            Code::M3 => "M3",
            Code::M4 => "M4",
            Code::M5 => "M5",
        }
    }

    pub fn long(self) -> &'static str {
        match self {
            Code::M1 => "M1_MISUSED_SENSITIVITY",
            Code::M2 => "M2_DATA_DEPENDENT_HYPERPARAM",
            Code::M3 => "M3_PARTIALLY_PRIVATIZED",
            Code::M4 => "M4_OVERLY_NOISY",
            Code::M5 => "M5_BUDGET_EXCEEDED",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Code::M1 => "Misused sensitivity",
            Code::M2 => "Data-dependent hyperparameter",
            Code::M3 => "Partially privatized computation",
            Code::M4 => "Overly noisy result",
            Code::M5 => "Privacy budget exceeded",
        }
    }

    /// Accepts `M1`, `m1` or `M1_MISUSED_SENSITIVITY`.
    pub fn parse(text: &str) -> Option<Code> {
        let t = text.trim().to_ascii_uppercase();
        Code::ALL.into_iter().find(|c| t == c.short() || t == c.long())
    }

    pub fn severity(self) -> Severity {
        match self {
            Code::M4 => Severity::Warning,
            _ => Severity::Violation,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.long())
    }
}

impl Serialize for Code {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.long())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Violation,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub code: Code,
    pub severity: Severity,
    /// Implicated nodes; the first is the node the finding is about.
    pub nodes: Vec<String>,
    pub message: String,
    pub suggestion: String,
}

impl Finding {
    fn new(code: Code, nodes: Vec<String>, message: String, suggestion: &str) -> Self {
        Self { code, severity: code.severity(), nodes, message, suggestion: suggestion.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "pass-with-warnings")]
    PassWithWarnings,
    #[serde(rename = "fail-with-violations")]
    FailWithViolations,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::PassWithWarnings => "pass-with-warnings",
            Verdict::FailWithViolations => "fail-with-violations",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub plan: String,
    /// SHA-256 of the plan's canonical JSON form.
    pub plan_hash: String,
    pub verdict: Verdict,
    pub findings: Vec<Finding>,
    pub ledger: BudgetLedger,
}

impl Report {
    pub fn violation_count(&self) -> usize {
        self.findings.iter().filter(|f| f.severity == Severity::Violation).count()
    }

    pub fn warning_count(&self) -> usize {
        self.findings.iter().filter(|f| f.severity == Severity::Warning).count()
    }

    pub fn codes(&self) -> BTreeSet<Code> {
        self.findings.iter().map(|f| f.code).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// M4 fires when signal / sensitivity is strictly below this.
    pub threshold: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { threshold: 1.0 }
    }
}

pub fn plan_hash(plan: &AnalysisPlan) -> String {
    hex::encode(Sha256::digest(plan.to_json_string().as_bytes()))
}

/// Nodes reachable from the source without passing through a noise node.
pub fn sensitive_nodes(plan: &AnalysisPlan) -> BTreeSet<&str> {
    let mut seen = BTreeSet::new();
    let Some(source) = plan.source_id() else { return seen };
    let mut queue = VecDeque::from([source]);
    seen.insert(source);
    while let Some(id) = queue.pop_front() {
        for child in plan.children(id) {
            if matches!(plan.node(child).map(|n| &n.kind), Some(NodeKind::Noise(_))) {
                continue;
            }
            if seen.insert(child) {
                queue.push_back(child);
            }
        }
    }
    seen
}

const M1_FIX: &str = "Bound each unit's contribution with a clip (or a partition constraint) and declare at least the resulting bound, or declare \"auto\".";
const M2_FIX: &str = "Use a constant fixed without looking at the data, or compute the value from noised, released results.";
const M3_FIX: &str = "Add noise to every data path that reaches the release, splitting epsilon between the noised queries, and combine only noised values.";
const M4_FIX: &str = "Add noise to the underlying counts or sums, whose sensitivity is small relative to their size, then post-process the noised values.";
const M5_FIX: &str = "Split epsilon_total across the noise nodes (for example epsilon_total / n each) so the worst-case total stays within the limit.";

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

pub fn check_misused_sensitivity(plan: &AnalysisPlan) -> Vec<Finding> {
    let mut out = Vec::new();
    for id in plan.noise_ids() {
        let NodeKind::Noise(spec) = &plan.node(id).expect("listed").kind else { continue };
        let Some(input) = plan.data_input(id) else { continue };
        if !matches!(plan.node(input).map(|n| &n.kind), Some(NodeKind::Aggregate(_))) {
            continue;
        }
        let derived = derive_sensitivity(plan, input).expect("input is an aggregate");
        let declared = match &spec.sensitivity {
            SensitivityDecl::Auto => None,
            _ => statics::declared_sensitivity(plan, spec),
        };
        let nodes = vec![id.to_string(), input.to_string()];
        match (derived.value, declared) {
            (Delta::Unbounded, Some(c)) => out.push(Finding::new(
                Code::M1,
                nodes,
                format!(
                    "`{id}` declares sensitivity {}, but nothing bounds how many rows one unit contributes to `{input}`, so one unit can change it without limit.",
                    fmt_num(c)
                ),
                M1_FIX,
            )),
            (Delta::Unbounded, None) => out.push(Finding::new(
                Code::M1,
                nodes,
                format!("`{id}` has no finite sensitivity: nothing bounds how many rows one unit contributes to `{input}`."),
                M1_FIX,
            )),
            (Delta::Finite(d), Some(c)) if c < d => out.push(Finding::new(
                Code::M1,
                nodes,
                format!(
                    "`{id}` declares sensitivity {}, but one unit can change `{input}` by up to {}.",
                    fmt_num(c),
                    fmt_num(d)
                ),
                M1_FIX,
            )),
            _ => {}
        }
    }
    out
}

pub fn check_data_dependent_hyperparams(plan: &AnalysisPlan) -> Vec<Finding> {
    let sensitive = sensitive_nodes(plan);
    let mut out = Vec::new();
    for id in plan.ids_where(|k| matches!(k, NodeKind::Hyperparameter { .. })) {
        let NodeKind::Hyperparameter { expr } = &plan.node(id).expect("listed").kind else { continue };
        let tainted: Vec<String> = expr.references().into_iter().filter(|r| sensitive.contains(r.as_str())).collect();
        if tainted.is_empty() {
            continue;
        }
        let list = tainted.iter().map(|t| format!("`{t}`")).collect::<Vec<_>>().join(", ");
        let mut nodes = vec![id.to_string()];
        nodes.extend(tainted);
        out.push(Finding::new(
            Code::M2,
            nodes,
            format!("hyperparameter `{id}` is computed from {list}, which read(s) the data without noise."),
            M2_FIX,
        ));
    }
    out
}

/// A shortest source-to-`release` path through sensitive nodes, if any.
pub fn unprotected_path<'a>(plan: &'a AnalysisPlan, sensitive: &BTreeSet<&'a str>, release: &'a str) -> Option<Vec<&'a str>> {
    if !sensitive.contains(release) {
        return None;
    }
    let source = plan.source_id()?;
    let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
    let mut queue = VecDeque::from([release]);
    let mut seen = BTreeSet::from([release]);
    while let Some(id) = queue.pop_front() {
        if id == source {
            let mut path = vec![source];
            let mut cur = source;
            while let Some(&next) = prev.get(cur) {
                path.push(next);
                cur = next;
            }
            return Some(path);
        }
        for parent in plan.parents(id) {
            if sensitive.contains(parent) && seen.insert(parent) {
                prev.insert(parent, id);
                queue.push_back(parent);
            }
        }
    }
    None
}

pub fn check_partial_privatization(plan: &AnalysisPlan) -> Vec<Finding> {
    let sensitive = sensitive_nodes(plan);
    let mut out = Vec::new();
    for release in plan.release_ids() {
        let Some(path) = unprotected_path(plan, &sensitive, release) else { continue };
        let shown = path.iter().map(|n| format!("`{n}`")).collect::<Vec<_>>().join(" -> ");
        let mut nodes = vec![release.to_string()];
        nodes.extend(path.iter().filter(|n| **n != release).map(|n| n.to_string()));
        out.push(Finding::new(
            Code::M3,
            nodes,
            format!("release `{release}` reaches the data without noise along {shown}."),
            M3_FIX,
        ));
    }
    out
}

pub fn check_noise_placement(plan: &AnalysisPlan, threshold: f64) -> Vec<Finding> {
    let mut out = Vec::new();
    for id in plan.noise_ids() {
        let NodeKind::Noise(spec) = &plan.node(id).expect("listed").kind else { continue };
        let Some(input) = plan.data_input(id) else { continue };
        let input_is_aggregate = matches!(plan.node(input).map(|n| &n.kind), Some(NodeKind::Aggregate(_)));
        let delta = match &spec.sensitivity {
            SensitivityDecl::Auto => noise_input_bound(plan, id).value.finite(),
            _ => statics::declared_sensitivity(plan, spec).or_else(|| noise_input_bound(plan, id).value.finite()),
        };
        let signal = match spec.signal_estimate {
            Some(s) => Some(s),
            None if !input_is_aggregate => {
                let range = statics::node_interval(plan, input);
                range.is_bounded().then(|| range.width())
            }
            None => None,
        };
        let (Some(delta), Some(signal)) = (delta, signal) else { continue };
        if delta.is_nan() || delta <= 0.0 {
            continue;
        }
        let ratio = signal / delta;
        if ratio < threshold {
            out.push(Finding::new(
                Code::M4,
                vec![id.to_string(), input.to_string()],
                format!(
                    "`{id}` adds noise calibrated to sensitivity {} to a value of size about {}; the signal-to-sensitivity ratio {} is below {}.",
                    fmt_num(delta),
                    fmt_num(signal),
                    fmt_num(ratio),
                    fmt_num(threshold)
                ),
                M4_FIX,
            ));
        }
    }
    out
}

pub fn check_budget(plan: &AnalysisPlan, ledger: &BudgetLedger) -> Vec<Finding> {
    if !ledger.exceeded() {
        return Vec::new();
    }
    let nodes = ledger.entries.iter().map(|e| e.node.clone()).collect();
    vec![Finding::new(
        Code::M5,
        nodes,
        format!(
            "worst-case consumption per unit is {}, above epsilon_total = {}{}.",
            budget::show(&ledger.worst_case_total),
            budget::show(&ledger.limit),
            if plan.constraints.is_empty() { " (no partition constraint licenses parallel composition)" } else { "" }
        ),
        M5_FIX,
    )]
}

fn budget_error(e: BudgetError) -> StructuralError {
    let (code, node) = match &e {
        BudgetError::Unresolved { node, .. } => (StructuralCode::UnresolvedEpsilon, Some(node.clone())),
        BudgetError::NonPositive { node, .. } => (StructuralCode::NonpositiveEpsilon, Some(node.clone())),
        _ => (StructuralCode::InvalidPrivacy, None),
    };
    StructuralError { code, nodes: node.into_iter().collect(), message: e.to_string() }
}

/// Runs M1–M5 over a structurally valid plan.
pub fn verify(plan: &AnalysisPlan, opts: &VerifyOptions) -> Result<Report, Vec<StructuralError>> {
    let structural = validate_plan(plan);
    if !structural.is_empty() {
        return Err(structural);
    }
    let ledger = compose(plan).map_err(|e| vec![budget_error(e)])?;
    let mut findings = check_misused_sensitivity(plan);
    findings.extend(check_data_dependent_hyperparams(plan));
    findings.extend(check_partial_privatization(plan));
    findings.extend(check_noise_placement(plan, opts.threshold));
    findings.extend(check_budget(plan, &ledger));
    findings.sort_by(|a, b| (a.code, &a.nodes).cmp(&(b.code, &b.nodes)));

    let verdict = if findings.is_empty() {
        Verdict::Pass
    } else if findings.iter().all(|f| f.severity == Severity::Warning) {
        Verdict::PassWithWarnings
    } else {
        Verdict::FailWithViolations
    };
    Ok(Report { plan: plan.display_name().to_string(), plan_hash: plan_hash(plan), verdict, findings, ledger })
}

/// Human-readable report. `color` adds ANSI styling.
pub fn render_text(report: &Report, color: bool) -> String {
    let paint = |code: &str, s: &str| if color { format!("\x1b[{code}m{s}\x1b[0m") } else { s.to_string() };
    let mut out = String::new();
    out.push_str(&format!("plan {} (sha256 {})\n", report.plan, &report.plan_hash[..16]));
    let verdict = report.verdict.to_string();
    let verdict = match report.verdict {
        Verdict::Pass => paint("32", &verdict),
        Verdict::PassWithWarnings => paint("33", &verdict),
        Verdict::FailWithViolations => paint("31", &verdict),
    };
    out.push_str(&format!(
        "verdict: {verdict} ({} violation(s), {} warning(s))\n",
        report.violation_count(),
        report.warning_count()
    ));
    for f in &report.findings {
        let sev = match f.severity {
            Severity::Violation => paint("31", "violation"),
            Severity::Warning => paint("33", "warning"),
        };
        out.push_str(&format!("\n{} {sev} [{}]\n", paint("1", f.code.long()), f.nodes.join(", ")));
        out.push_str(&format!("  {}\n  fix: {}\n", f.message, f.suggestion));
    }
    out.push_str(&format!(
        "\nbudget: worst case {} of limit {}\n",
        budget::show(&report.ledger.worst_case_total),
        budget::show(&report.ledger.limit)
    ));
    for line in report.ledger.tree.render().lines() {
        out.push_str(&format!("  {line}\n"));
    }
    out
}
