//! Command implementations for the `dpaudit` binary. Each command returns an
//! [`Output`] (exit code plus text) so it can be tested without a process.
//!
//! Exit codes: 0 pass (or warnings only), 1 violations, 2 unreadable or
//! structurally invalid input, 3 runtime failure.

pub mod corpus;
pub mod explain;

use std::fs;
use std::path::{Path, PathBuf};

use dpaudit_core::executor::{execute, load_dataset, Dataset, ExecError, ExecOptions};
use dpaudit_core::plan::{parse_plan, AnalysisPlan, NodeKind, PlanError, StructuralError};
use dpaudit_core::sensitivity::oracle::{empirical_sensitivity, OracleConfig, Witness};
use dpaudit_core::sensitivity::{derive_sensitivity, Delta};
use dpaudit_core::statics;
use dpaudit_core::verifier::{self, Code, Verdict, VerifyOptions};
use dpaudit_core::Strategy;
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn ok(code: i32, stdout: String) -> Self {
        Self { code, stdout, stderr: String::new() }
    }

    fn fail(code: i32, stderr: String) -> Self {
        Self { code, stdout: String::new(), stderr }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Reads and parses a plan file; errors name the file and, for syntax
/// errors, the line and column.
pub fn load_plan(path: &Path) -> Result<AnalysisPlan, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_plan(&text).map_err(|e| match e {
        PlanError::Syntax { line, column, message } => format!("{}:{line}:{column}: {message}", path.display()),
        other => format!("{}: {other}", path.display()),
    })
}

fn structural_output(path: &Path, errors: &[StructuralError], format: Format) -> Output {
    match format {
        Format::Json => Output::ok(
            EXIT_INPUT,
            pretty(&json!({"plan": path.display().to_string(), "structural_errors": errors})),
        ),
        Format::Text => {
            let mut s = format!("{}: plan is structurally invalid\n", path.display());
            for e in errors {
                s.push_str(&format!("  {e}\n"));
            }
            Output::fail(EXIT_INPUT, s)
        }
    }
}

fn input_error(message: String, format: Format) -> Output {
    match format {
        Format::Json => Output::ok(EXIT_INPUT, pretty(&json!({"error": message}))),
        Format::Text => Output::fail(EXIT_INPUT, format!("error: {message}\n")),
    }
}

#[derive(Debug, Clone)]
pub struct CheckArgs {
    pub plan: PathBuf,
    pub format: Format,
    pub strict_warnings: bool,
    pub threshold: f64,
    pub color: bool,
}

pub fn check(args: &CheckArgs) -> Output {
    let plan = match load_plan(&args.plan) {
        Ok(p) => p,
        Err(e) => return input_error(e, args.format),
    };
    let report = match verifier::verify(&plan, &VerifyOptions { threshold: args.threshold }) {
        Ok(r) => r,
        Err(errors) => return structural_output(&args.plan, &errors, args.format),
    };
    let code = match report.verdict {
        Verdict::Pass => EXIT_OK,
        Verdict::PassWithWarnings if !args.strict_warnings => EXIT_OK,
        _ => EXIT_VIOLATIONS,
    };
    let text = match args.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => verifier::render_text(&report, args.color),
    };
    Output::ok(code, text)
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub plan: PathBuf,
    pub data: PathBuf,
    pub seed: u64,
    pub no_noise: bool,
    pub allow_invalid: bool,
    pub threshold: f64,
    pub format: Format,
    /// Writes every node's value here as JSON.
    pub trace: Option<PathBuf>,
    pub color: bool,
}

fn load_inputs(plan_path: &Path, data_path: &Path) -> Result<(AnalysisPlan, Dataset), String> {
    let plan = load_plan(plan_path)?;
    let ds = load_dataset(data_path, &plan.schema, &plan.privacy.unit_column)
        .map_err(|e| format!("{}: {e}", data_path.display()))?;
    Ok((plan, ds))
}

pub fn run(args: &RunArgs) -> Output {
    let (plan, ds) = match load_inputs(&args.plan, &args.data) {
        Ok(x) => x,
        Err(e) => return input_error(e, args.format),
    };
    let opts = ExecOptions {
        seed: args.seed,
        noise: !args.no_noise,
        allow_invalid: args.allow_invalid,
        verify: VerifyOptions { threshold: args.threshold },
    };
    match execute(&plan, &ds, &opts) {
        Ok(result) => {
            if let Some(path) = &args.trace {
                if let Err(e) = fs::write(path, pretty(&result.values)) {
                    return Output::fail(EXIT_RUNTIME, format!("error: cannot write trace {}: {e}\n", path.display()));
                }
            }
            let text = match args.format {
                Format::Json => pretty(&result),
                Format::Text => {
                    let mut s = format!(
                        "plan {} (seed {}, noise {})\n",
                        result.plan,
                        result.seed,
                        if result.noise { "on" } else { "off" }
                    );
                    for (id, v) in &result.releases {
                        s.push_str(&format!("{id} = {}\n", serde_json::to_string(v).expect("serializable")));
                    }
                    s
                }
            };
            Output::ok(EXIT_OK, text)
        }
        Err(ExecError::Invalid(errors)) => structural_output(&args.plan, &errors, args.format),
        Err(ExecError::Refused(report)) => match args.format {
            Format::Json => Output::ok(EXIT_VIOLATIONS, pretty(&json!({"refused": true, "report": report}))),
            Format::Text => Output {
                code: EXIT_VIOLATIONS,
                stdout: verifier::render_text(&report, args.color),
                stderr: format!(
                    "error: refusing to run: the plan has {} violation(s); pass --allow-invalid to run anyway\n",
                    report.violation_count()
                ),
            },
        },
        Err(e) => match args.format {
            Format::Json => Output::ok(EXIT_RUNTIME, pretty(&json!({"error": e.to_string()}))),
            Format::Text => Output::fail(EXIT_RUNTIME, format!("error: {e}\n")),
        },
    }
}

#[derive(Debug, Clone)]
pub struct OracleArgs {
    pub plan: PathBuf,
    pub data: PathBuf,
    pub node: String,
    pub format: Format,
    pub config: OracleConfig,
}

fn show_delta(d: Delta) -> serde_json::Value {
    match d {
        Delta::Finite(x) => json!(x),
        Delta::Unbounded => json!("unbounded"),
    }
}

/// Compares the brute-force sensitivity of an aggregate with its derived
/// bound, or, for a noise node, with the sensitivity the node declares.
pub fn oracle(args: &OracleArgs) -> Output {
    let (plan, ds) = match load_inputs(&args.plan, &args.data) {
        Ok(x) => x,
        Err(e) => return input_error(e, args.format),
    };
    if let Err(errors) = verifier::verify(&plan, &VerifyOptions::default()) {
        return structural_output(&args.plan, &errors, args.format);
    }
    let (aggregate, declared) = match plan.node(&args.node).map(|n| &n.kind) {
        Some(NodeKind::Aggregate(_)) => (args.node.clone(), None),
        Some(NodeKind::Noise(spec)) => match plan.data_input(&args.node) {
            Some(input) if matches!(plan.node(input).map(|n| &n.kind), Some(NodeKind::Aggregate(_))) => {
                (input.to_string(), Some(statics::declared_sensitivity(&plan, spec)))
            }
            _ => return input_error(format!("noise node `{}` does not read an aggregate", args.node), args.format),
        },
        Some(other) => {
            return input_error(
                format!("`{}` is a {} node; the oracle takes an aggregate or noise node", args.node, other.name()),
                args.format,
            )
        }
        None => return input_error(format!("no node `{}` in the plan", args.node), args.format),
    };
    let derived = derive_sensitivity(&plan, &aggregate).expect("checked to be an aggregate");
    let result = match empirical_sensitivity(&plan, &aggregate, &ds, &args.config) {
        Ok(r) => r,
        Err(e) => return input_error(e.to_string(), args.format),
    };
    // What the empirical change is compared against.
    let (bound, against) = match declared {
        Some(Some(c)) => (Delta::Finite(c), "declared"),
        // A sensitivity not known before execution falls back to the derived bound.
        Some(None) | None => (derived.value, "derived"),
    };
    let sound = match bound {
        Delta::Finite(b) => result.empirical <= b,
        Delta::Unbounded => true,
    };
    let verdict = if sound { "SOUND" } else { "UNSOUND" };
    let witness = match &result.witness {
        None => "no neighbour changes the value".to_string(),
        Some(Witness::Removed(u)) => format!("removing unit {u}"),
        Some(Witness::Added(rows)) => format!("adding a unit with {} row(s)", rows.len()),
    };
    let code = if sound { EXIT_OK } else { EXIT_VIOLATIONS };
    let text = match args.format {
        Format::Json => pretty(&json!({
            "node": args.node,
            "aggregate": aggregate,
            "units": ds.unit_count(),
            "neighbors": result.neighbors,
            "empirical": result.empirical,
            "witness": witness,
            "derived": show_delta(derived.value),
            "derivation": derived.trace,
            "declared": declared.flatten(),
            "compared_against": against,
            "verdict": verdict,
        })),
        Format::Text => {
            let mut s = format!("node: {}", args.node);
            if aggregate != args.node {
                s.push_str(&format!(" (input aggregate `{aggregate}`)"));
            }
            s.push('\n');
            s.push_str(&format!(
                "empirical max change: {} over {} neighbour(s) of {} unit(s); {witness}\n",
                result.empirical,
                result.neighbors,
                ds.unit_count()
            ));
            s.push_str(&format!("derived bound: {}\n", derived.value));
            for t in &derived.trace {
                s.push_str(&format!("  {t}\n"));
            }
            if let Some(Some(c)) = declared {
                s.push_str(&format!("declared sensitivity: {c}\n"));
            }
            let rel = if sound { "<=" } else { ">" };
            s.push_str(&format!("{verdict}: empirical {} {rel} {against} {bound}\n", result.empirical));
            s
        }
    };
    Output::ok(code, text)
}

pub fn explain_code(code: &str, format: Format) -> Output {
    let Some(code) = Code::parse(code) else {
        return Output::fail(EXIT_INPUT, format!("error: unknown code `{code}`; expected one of M1, M2, M3, M4, M5\n"));
    };
    let e = explain::explanation(code);
    match format {
        Format::Json => Output::ok(EXIT_OK, pretty(&e)),
        Format::Text => Output::ok(EXIT_OK, explain::render_text(&e)),
    }
}

/// Whether ANSI colour should be used: `always`, `never`, or `auto`
/// (colour when stdout is a terminal).
pub fn color_enabled(choice: &str) -> bool {
    use std::io::IsTerminal;
    match choice {
        "always" => true,
        "never" => false,
        _ => std::io::stdout().is_terminal(),
    }
}

/// The oracle's default configuration with a chosen strategy.
pub fn oracle_config(max_units: usize, max_added_rows: usize, seed: u64, sequential: bool) -> OracleConfig {
    OracleConfig {
        max_units,
        max_added_rows,
        seed,
        strategy: if sequential { Strategy::Sequential } else { Strategy::Parallel },
        ..OracleConfig::default()
    }
}
