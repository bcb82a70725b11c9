//! Structural validation. Returns every problem found, sorted by node id, so
//! that callers can render all of them at once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::*;
use crate::statics::{self, EpsilonResolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StructuralCode {
    DuplicateColumn,
    InvalidSchema,
    InvalidPrivacy,
    UnknownColumn,
    DuplicateNode,
    DanglingEdge,
    NoSource,
    MultipleSources,
    Cycle,
    BadInputs,
    MissingEdge,
    UnusedEdge,
    InvalidExpr,
    InvalidParameter,
    InvalidClip,
    InvalidAggregate,
    InvalidNoise,
    UnresolvedEpsilon,
    NonpositiveEpsilon,
    InvalidConstraint,
}

impl StructuralCode {
    pub fn as_str(self) -> &'static str {
        match self {
            StructuralCode::DuplicateColumn => "DUPLICATE_COLUMN",
            StructuralCode::InvalidSchema => "INVALID_SCHEMA",
            StructuralCode::InvalidPrivacy => "INVALID_PRIVACY",
            StructuralCode::UnknownColumn => "UNKNOWN_COLUMN",
            StructuralCode::DuplicateNode => "DUPLICATE_NODE",
            StructuralCode::DanglingEdge => "DANGLING_EDGE",
            StructuralCode::NoSource => "NO_SOURCE",
            StructuralCode::MultipleSources => "MULTIPLE_SOURCES",
            StructuralCode::Cycle => "CYCLE",
            StructuralCode::BadInputs => "BAD_INPUTS",
            StructuralCode::MissingEdge => "MISSING_EDGE",
            StructuralCode::UnusedEdge => "UNUSED_EDGE",
            StructuralCode::InvalidExpr => "INVALID_EXPR",
            StructuralCode::InvalidParameter => "INVALID_PARAMETER",
            StructuralCode::InvalidClip => "INVALID_CLIP",
            StructuralCode::InvalidAggregate => "INVALID_AGGREGATE",
            StructuralCode::InvalidNoise => "INVALID_NOISE",
            StructuralCode::UnresolvedEpsilon => "UNRESOLVED_EPSILON",
            StructuralCode::NonpositiveEpsilon => "NONPOSITIVE_EPSILON",
            StructuralCode::InvalidConstraint => "INVALID_CONSTRAINT",
        }
    }
}

impl fmt::Display for StructuralCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralError {
    pub code: StructuralCode,
    pub nodes: Vec<NodeId>,
    pub message: String,
}

impl fmt::Display for StructuralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.nodes.is_empty() {
            write!(f, "{}: {}", self.code, self.message)
        } else {
            write!(f, "{} [{}]: {}", self.code, self.nodes.join(", "), self.message)
        }
    }
}

struct Collector {
    errors: Vec<StructuralError>,
}

impl Collector {
    fn push(&mut self, code: StructuralCode, nodes: &[&str], message: impl Into<String>) {
        self.errors.push(StructuralError {
            code,
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            message: message.into(),
        });
    }
}

/// Checks every structural invariant of a plan. An empty result means the
/// plan is well-formed; it says nothing about whether the plan is private.
pub fn validate_plan(plan: &AnalysisPlan) -> Vec<StructuralError> {
    let mut c = Collector { errors: Vec::new() };
    check_schema(plan, &mut c);
    check_nodes_and_edges(plan, &mut c);
    check_cycles(plan, &mut c);
    for node in &plan.nodes {
        check_node(plan, node, &mut c);
    }
    check_constraints(plan, &mut c);

    let mut errors = c.errors;
    errors.sort_by(|a, b| {
        let ka = a.nodes.first().map(String::as_str).unwrap_or("");
        let kb = b.nodes.first().map(String::as_str).unwrap_or("");
        (ka, a.code, &a.message).cmp(&(kb, b.code, &b.message))
    });
    errors.dedup();
    errors
}

fn check_schema(plan: &AnalysisPlan, c: &mut Collector) {
    let mut seen = BTreeSet::new();
    for col in &plan.schema.columns {
        if !seen.insert(col.name.as_str()) {
            c.push(StructuralCode::DuplicateColumn, &[], format!("column `{}` is declared twice", col.name));
        }
        match (&col.kind, &col.values) {
            (ColumnKind::Categorical, Some(values)) => {
                let distinct: BTreeSet<&String> = values.iter().collect();
                if distinct.len() != values.len() || values.is_empty() {
                    c.push(
                        StructuralCode::InvalidSchema,
                        &[],
                        format!("categorical column `{}` needs a non-empty list of distinct values", col.name),
                    );
                }
            }
            (ColumnKind::Categorical, None) => {}
            (_, Some(_)) => c.push(
                StructuralCode::InvalidSchema,
                &[],
                format!("column `{}` is not categorical but declares a value set", col.name),
            ),
            _ => {}
        }
    }
    let eps = plan.privacy.epsilon_total;
    if !(eps.is_finite() && eps > 0.0) {
        c.push(StructuralCode::InvalidPrivacy, &[], format!("epsilon_total must be positive, found {eps}"));
    }
    if plan.schema.column(&plan.privacy.unit_column).is_none() {
        c.push(
            StructuralCode::UnknownColumn,
            &[],
            format!("privacy unit column `{}` is not in the schema", plan.privacy.unit_column),
        );
    }
}

fn check_nodes_and_edges(plan: &AnalysisPlan, c: &mut Collector) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for n in &plan.nodes {
        *counts.entry(n.id.as_str()).or_default() += 1;
    }
    for (id, n) in &counts {
        if *n > 1 {
            c.push(StructuralCode::DuplicateNode, &[id], format!("node id `{id}` is used {n} times"));
        }
    }
    for e in &plan.edges {
        for end in [&e.parent, &e.child] {
            if !counts.contains_key(end.as_str()) {
                c.push(
                    StructuralCode::DanglingEdge,
                    &[end],
                    format!("edge {} -> {} references nonexistent node `{end}`", e.parent, e.child),
                );
            }
        }
    }
    let sources = plan.ids_where(|k| matches!(k, NodeKind::Source));
    match sources.len() {
        0 => c.push(StructuralCode::NoSource, &[], "plan has no source node"),
        1 => {}
        _ => c.push(
            StructuralCode::MultipleSources,
            &sources,
            format!("plan has {} source nodes; exactly one is allowed", sources.len()),
        ),
    }
}

/// Reports each strongly connected component that contains a cycle.
fn check_cycles(plan: &AnalysisPlan, c: &mut Collector) {
    let ids: Vec<&str> = plan.node_ids().into_iter().collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut adj = vec![Vec::new(); ids.len()];
    for e in &plan.edges {
        if let (Some(&p), Some(&ch)) = (index.get(e.parent.as_str()), index.get(e.child.as_str())) {
            adj[p].push(ch);
        }
    }
    for comp in tarjan_scc(&adj) {
        let cyclic = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
        if cyclic {
            let mut members: Vec<&str> = comp.iter().map(|&i| ids[i]).collect();
            members.sort();
            c.push(StructuralCode::Cycle, &members, format!("edges form a cycle through {}", members.join(", ")));
        }
    }
}

fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for i in 0..s.adj[v].len() {
            let w = s.adj[v][i];
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            s.out.push(comp);
        }
    }
    let n = adj.len();
    let mut s = State {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

fn kind_of<'a>(plan: &'a AnalysisPlan, id: &str) -> Option<&'a NodeKind> {
    plan.node(id).map(|n| &n.kind)
}

fn check_column(plan: &AnalysisPlan, node: &str, column: &str, what: &str, c: &mut Collector) -> Option<ColumnKind> {
    match plan.schema.column(column) {
        Some(col) => Some(col.kind),
        None => {
            c.push(StructuralCode::UnknownColumn, &[node], format!("{what} references unknown column `{column}`"));
            None
        }
    }
}

fn check_predicate(plan: &AnalysisPlan, node: &str, preds: &[Comparison], what: &str, c: &mut Collector) {
    for p in preds {
        let Some(kind) = check_column(plan, node, &p.column, what, c) else { continue };
        let ok = match (&kind, &p.value) {
            (ColumnKind::Numeric, Literal::Number(_)) => true,
            (ColumnKind::Numeric, Literal::Text(_)) => false,
            (ColumnKind::Timestamp, Literal::Text(t)) => crate::executor::parse_timestamp(t).is_some(),
            (ColumnKind::Timestamp, Literal::Number(_)) => false,
            (ColumnKind::Categorical, Literal::Text(t)) => plan
                .schema
                .column(&p.column)
                .and_then(|col| col.closed_values())
                .is_none_or(|vals| vals.iter().any(|v| v == t) || p.op != CmpOp::Eq),
            (ColumnKind::Categorical, Literal::Number(_)) => false,
            (ColumnKind::Identifier, _) => true,
        };
        if !ok {
            c.push(
                StructuralCode::InvalidAggregate,
                &[node],
                format!("{what} comparison `{p}` does not fit column kind {kind:?}"),
            );
        }
    }
}

/// Parameter references must name a constant/hyperparameter and have an edge.
fn check_param_ref(plan: &AnalysisPlan, node: &str, target: &str, role: &str, c: &mut Collector) {
    match kind_of(plan, target) {
        None => c.push(StructuralCode::InvalidParameter, &[node], format!("{role} references unknown node `{target}`")),
        Some(k) if !k.is_parameter() => c.push(
            StructuralCode::InvalidParameter,
            &[node],
            format!("{role} references `{target}`, a {} node; only constants and hyperparameters can parameterize", k.name()),
        ),
        Some(_) => {}
    }
    if !plan.parents(node).contains(&target) {
        c.push(StructuralCode::MissingEdge, &[node], format!("{role} references `{target}` but there is no edge {target} -> {node}"));
    }
}

fn check_expr_node(plan: &AnalysisPlan, node: &PlanNode, expr: &Expr, c: &mut Collector) {
    let id = node.id.as_str();
    for msg in expr.arity_errors() {
        c.push(StructuralCode::InvalidExpr, &[id], msg);
    }
    let refs = expr.references();
    let params = node.parameter_refs();
    let parents: BTreeSet<&str> = plan.parents(id).into_iter().collect();
    for r in &refs {
        match kind_of(plan, r) {
            None => c.push(StructuralCode::InvalidExpr, &[id], format!("expression references unknown node `{r}`")),
            Some(k) if k.is_relation() => c.push(
                StructuralCode::InvalidExpr,
                &[id],
                format!("expression references `{r}`, a {} node that carries rows, not a number", k.name()),
            ),
            Some(_) => {}
        }
        if !parents.contains(r.as_str()) {
            c.push(StructuralCode::MissingEdge, &[id], format!("expression references `{r}` but there is no edge {r} -> {id}"));
        }
    }
    for p in parents {
        if !refs.contains(p) && !params.contains(p) {
            c.push(StructuralCode::UnusedEdge, &[id], format!("edge {p} -> {id} is not used by the expression"));
        }
    }
}

fn check_relation_input(plan: &AnalysisPlan, id: &str, c: &mut Collector) {
    let inputs = plan.data_parents(id);
    match inputs.as_slice() {
        [only] => match kind_of(plan, only) {
            Some(NodeKind::Source) | Some(NodeKind::Clip(_)) => {}
            Some(k) => c.push(
                StructuralCode::BadInputs,
                &[id],
                format!("input `{only}` is a {} node; expected the source or a clip", k.name()),
            ),
            None => {}
        },
        _ => c.push(
            StructuralCode::BadInputs,
            &[id],
            format!("expected exactly one source/clip input, found {}", inputs.len()),
        ),
    }
}

fn check_node(plan: &AnalysisPlan, node: &PlanNode, c: &mut Collector) {
    let id = node.id.as_str();
    match &node.kind {
        NodeKind::Source => {
            if !plan.parents(id).is_empty() {
                c.push(StructuralCode::BadInputs, &[id], "source node cannot have inputs");
            }
        }
        NodeKind::Constant { value } => {
            if !plan.parents(id).is_empty() {
                c.push(StructuralCode::BadInputs, &[id], "constant node cannot have inputs");
            }
            if !value.is_finite() {
                c.push(StructuralCode::InvalidParameter, &[id], "constant must be finite");
            }
        }
        NodeKind::Clip(clip) => {
            check_relation_input(plan, id, c);
            match &clip.per_unit_bound {
                ClipBound::Fixed(0) => c.push(StructuralCode::InvalidClip, &[id], "per_unit_bound must be at least 1"),
                ClipBound::Fixed(_) => {}
                ClipBound::Ref(target) => check_param_ref(plan, id, target, "per_unit_bound", c),
            }
            if let Some(scope) = &clip.scope {
                check_column(plan, id, scope, "clip scope", c);
            }
            if let Some(vb) = &clip.value_bounds {
                if let Some(kind) = check_column(plan, id, &vb.column, "value_bounds", c) {
                    if kind != ColumnKind::Numeric {
                        c.push(StructuralCode::InvalidClip, &[id], format!("value_bounds column `{}` is not numeric", vb.column));
                    }
                }
                if !(vb.lo.is_finite() && vb.hi.is_finite() && vb.lo <= vb.hi) {
                    c.push(StructuralCode::InvalidClip, &[id], format!("value_bounds [{}, {}] is not a finite interval", vb.lo, vb.hi));
                }
            }
            check_predicate(plan, id, &clip.filter, "clip filter", c);
        }
        NodeKind::Aggregate(agg) => {
            check_relation_input(plan, id, c);
            check_predicate(plan, id, &agg.predicate, "predicate", c);
            match (agg.op, &agg.column) {
                (AggOp::Sum, None) => c.push(StructuralCode::InvalidAggregate, &[id], "sum needs a `column`"),
                (AggOp::Sum, Some(col)) => {
                    if let Some(kind) = check_column(plan, id, col, "sum", c) {
                        if kind != ColumnKind::Numeric {
                            c.push(StructuralCode::InvalidAggregate, &[id], format!("summed column `{col}` is not numeric"));
                        }
                    }
                }
                (op, Some(_)) => c.push(
                    StructuralCode::InvalidAggregate,
                    &[id],
                    format!("`{}` does not take a `column`", op.name()),
                ),
                (_, None) => {}
            }
            if let Some(g) = &agg.group_by {
                if check_column(plan, id, g, "group_by", c).is_some()
                    && plan.schema.column(g).and_then(|col| col.closed_values()).is_none()
                {
                    c.push(
                        StructuralCode::InvalidAggregate,
                        &[id],
                        format!("group_by column `{g}` must be categorical with a closed value set"),
                    );
                }
            }
        }
        NodeKind::Noise(noise) => {
            let inputs = plan.data_parents(id);
            match inputs.as_slice() {
                [only] => match kind_of(plan, only) {
                    Some(k) if k.is_relation() => c.push(
                        StructuralCode::BadInputs,
                        &[id],
                        format!("noise input `{only}` carries rows; noise applies to a numeric query"),
                    ),
                    Some(NodeKind::Aggregate(_)) => {}
                    Some(_) if plan.data_aggregates(id).is_empty() => c.push(
                        StructuralCode::BadInputs,
                        &[id],
                        format!("noise input `{only}` does not depend on any aggregate"),
                    ),
                    _ => {}
                },
                _ => c.push(
                    StructuralCode::BadInputs,
                    &[id],
                    format!("noise node needs exactly one data input, found {}", inputs.len()),
                ),
            }
            match &noise.sensitivity {
                SensitivityDecl::Constant(x) if !(*x > 0.0 && x.is_finite()) => {
                    c.push(StructuralCode::InvalidNoise, &[id], format!("declared sensitivity must be positive, found {x}"))
                }
                SensitivityDecl::Ref(target) => check_param_ref(plan, id, target, "sensitivity", c),
                _ => {}
            }
            if let Some(est) = noise.signal_estimate {
                if !(est >= 0.0 && est.is_finite()) {
                    c.push(StructuralCode::InvalidNoise, &[id], format!("signal_estimate must be nonnegative, found {est}"));
                }
            }
            if let EpsilonSpec::Ref(target) = &noise.epsilon {
                check_param_ref(plan, id, target, "epsilon", c);
            }
            match statics::resolve_epsilon(plan, noise) {
                EpsilonResolution::Resolved(eps) => {
                    if !crate::exact::is_positive(&eps) {
                        c.push(
                            StructuralCode::NonpositiveEpsilon,
                            &[id],
                            format!("epsilon `{}` resolves to {}, which is not positive", noise.epsilon, crate::exact::render(&eps)),
                        );
                    }
                }
                EpsilonResolution::Unresolved(why) => {
                    c.push(StructuralCode::UnresolvedEpsilon, &[id], format!("cannot resolve epsilon: {why}"))
                }
            }
        }
        NodeKind::Hyperparameter { expr } => check_expr_node(plan, node, expr, c),
        NodeKind::PostProcess(pp) => {
            check_expr_node(plan, node, &pp.expr, c);
            match &pp.guard {
                Guard::Constant(g) if !(*g > 0.0 && g.is_finite()) => {
                    c.push(StructuralCode::InvalidParameter, &[id], format!("division guard must be positive, found {g}"))
                }
                Guard::Ref(target) => check_param_ref(plan, id, target, "guard", c),
                _ => {}
            }
        }
        NodeKind::Release => {
            let inputs = plan.parents(id);
            match inputs.as_slice() {
                [only] => {
                    if kind_of(plan, only).is_some_and(|k| k.is_relation()) {
                        c.push(StructuralCode::BadInputs, &[id], format!("release input `{only}` carries rows, not a number"));
                    }
                }
                _ => c.push(
                    StructuralCode::BadInputs,
                    &[id],
                    format!("release needs exactly one input, found {}", inputs.len()),
                ),
            }
        }
    }
}

fn check_constraints(plan: &AnalysisPlan, c: &mut Collector) {
    for pc in &plan.constraints {
        for col in std::iter::once(&pc.attribute).chain(pc.within.iter()) {
            match plan.schema.column(col) {
                None => c.push(StructuralCode::InvalidConstraint, &[], format!("partition constraint references unknown column `{col}`")),
                Some(column) if column.kind != ColumnKind::Categorical => c.push(
                    StructuralCode::InvalidConstraint,
                    &[],
                    format!("partition constraint column `{col}` must be categorical"),
                ),
                Some(_) => {}
            }
        }
        if pc.within.contains(&pc.attribute) {
            c.push(StructuralCode::InvalidConstraint, &[], format!("`{}` cannot partition within itself", pc.attribute));
        }
        if pc.max_rows_per_unit == Some(0) {
            c.push(StructuralCode::InvalidConstraint, &[], "max_rows_per_unit must be at least 1");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_plan() -> AnalysisPlan {
        parse_plan(
            r#"{
            "schema": {"columns": [
                {"name": "User ID", "kind": "identifier"},
                {"name": "Day", "kind": "categorical", "values": ["Mon", "Tue"]}
            ]},
            "privacy": {"unit_column": "User ID", "epsilon_total": 1.0},
            "nodes": [
                {"id": "data", "kind": "source"},
                {"id": "clip", "kind": "clip", "per_unit_bound": 2},
                {"id": "n", "kind": "aggregate", "op": "count"},
                {"id": "noisy", "kind": "noise", "epsilon": "epsilon_total", "sensitivity": "auto"},
                {"id": "out", "kind": "release"}
            ],
            "edges": [["data", "clip"], ["clip", "n"], ["n", "noisy"], ["noisy", "out"]]
        }"#,
        )
        .unwrap()
    }

    fn codes(errors: &[StructuralError]) -> Vec<StructuralCode> {
        errors.iter().map(|e| e.code).collect()
    }

    #[test]
    fn well_formed_plan_has_no_errors() {
        assert_eq!(validate_plan(&base_plan()), vec![]);
    }

    #[test]
    fn cycle_lists_its_members() {
        let mut plan = base_plan();
        plan.edges.push(Edge::new("noisy", "clip"));
        let errors = validate_plan(&plan);
        let cycle = errors.iter().find(|e| e.code == StructuralCode::Cycle).expect("cycle reported");
        assert_eq!(cycle.nodes, vec!["clip", "n", "noisy"]);
    }

    #[test]
    fn second_source_is_rejected() {
        let mut plan = base_plan();
        plan.nodes.push(PlanNode::new("other", NodeKind::Source));
        let errors = validate_plan(&plan);
        assert!(codes(&errors).contains(&StructuralCode::MultipleSources));
        let e = errors.iter().find(|e| e.code == StructuralCode::MultipleSources).unwrap();
        assert_eq!(e.nodes, vec!["data", "other"]);
    }

    #[test]
    fn release_needs_one_input() {
        let mut plan = base_plan();
        plan.nodes.push(PlanNode::new("const", NodeKind::Constant { value: 1.0 }));
        plan.edges.push(Edge::new("const", "out"));
        assert_eq!(codes(&validate_plan(&plan)), vec![StructuralCode::BadInputs]);
    }

    #[test]
    fn nonpositive_and_unresolved_epsilon() {
        let mut plan = base_plan();
        if let NodeKind::Noise(n) = &mut plan.nodes[3].kind {
            n.epsilon = EpsilonSpec::symbolic("epsilon_total - 1").unwrap();
        }
        assert_eq!(codes(&validate_plan(&plan)), vec![StructuralCode::NonpositiveEpsilon]);
        if let NodeKind::Noise(n) = &mut plan.nodes[3].kind {
            n.epsilon = EpsilonSpec::symbolic("epsilon_total / (2 - 2)").unwrap();
        }
        assert_eq!(codes(&validate_plan(&plan)), vec![StructuralCode::UnresolvedEpsilon]);
    }

    #[test]
    fn expression_edges_must_match_references() {
        let mut plan = base_plan();
        plan.nodes.push(PlanNode::new(
            "ratio",
            NodeKind::PostProcess(PostProcessSpec {
                expr: Expr::op(ExprOp::Div, vec![Expr::node("noisy"), Expr::node("n")]),
                guard: Guard::default(),
            }),
        ));
        plan.edges.push(Edge::new("noisy", "ratio"));
        let errors = validate_plan(&plan);
        assert_eq!(codes(&errors), vec![StructuralCode::MissingEdge]);
        assert_eq!(errors[0].nodes, vec!["ratio"]);
    }

    #[test]
    fn constraint_columns_must_be_categorical() {
        let mut plan = base_plan();
        plan.constraints.push(PartitionConstraint {
            attribute: "User ID".into(),
            within: vec![],
            max_rows_per_unit: None,
        });
        assert_eq!(codes(&validate_plan(&plan)), vec![StructuralCode::InvalidConstraint]);
    }

    #[test]
    fn output_is_sorted_and_repeatable() {
        let mut plan = base_plan();
        plan.nodes.push(PlanNode::new("zz", NodeKind::Release));
        plan.nodes.push(PlanNode::new("aa", NodeKind::Release));
        let first = validate_plan(&plan);
        assert_eq!(first, validate_plan(&plan));
        let ids: Vec<&str> = first.iter().map(|e| e.nodes[0].as_str()).collect();
        assert_eq!(ids, vec!["aa", "zz"]);
    }
}
