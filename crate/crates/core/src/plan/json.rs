//! Plan file reading and writing.
//!
//! Top-level keys are `name` (optional), `schema`, `privacy`, `nodes`,
//! `edges`, `constraints`. Each node is an object with `id` and `kind` plus
//! kind-specific fields; unknown fields are rejected so typos surface early.

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use super::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("node `{node}`: unknown node kind `{kind}` (expected one of {})", NodeKind::NAMES.join(", "))]
    UnknownNodeKind { node: NodeId, kind: String },
    #[error("edge {parent} -> {child} references nonexistent node `{missing}`")]
    DanglingEdge { parent: NodeId, child: NodeId, missing: NodeId },
    #[error("node `{node}`: {message}")]
    InvalidNode { node: NodeId, message: String },
    #[error("{message}")]
    Invalid { message: String },
}

impl PlanError {
    fn invalid(message: impl Into<String>) -> Self {
        PlanError::Invalid { message: message.into() }
    }
}

/// Parses plan-file text into the in-memory model.
///
/// Structural soundness (one source, acyclicity, arities) is checked
/// separately by [`validate_plan`]; parsing only rejects malformed text,
/// unknown node kinds, and edges naming nodes that do not exist.
pub fn parse_plan(text: &str) -> Result<AnalysisPlan, PlanError> {
    let root: Json = serde_json::from_str(text).map_err(|e| {
        // serde_json appends the position; it is reported separately.
        let full = e.to_string();
        let message = full.rfind(" at line ").map_or(full.as_str(), |i| &full[..i]).to_string();
        PlanError::Syntax { line: e.line(), column: e.column(), message }
    })?;
    plan_from_json(root)
}

pub(crate) fn plan_from_json(root: Json) -> Result<AnalysisPlan, PlanError> {
    let mut top = match root {
        Json::Object(map) => Fields::new(map, "plan"),
        _ => return Err(PlanError::invalid("plan must be a JSON object")),
    };
    let name = top.opt_string("name").map_err(PlanError::invalid)?;
    let schema: Schema = top.required_typed("schema").map_err(PlanError::invalid)?;
    let privacy: PrivacySpec = top.required_typed("privacy").map_err(PlanError::invalid)?;
    let raw_nodes = match top.take("nodes") {
        Some(Json::Array(items)) => items,
        Some(_) => return Err(PlanError::invalid("`nodes` must be an array")),
        None => return Err(PlanError::invalid("missing `nodes`")),
    };
    let raw_edges = match top.take("edges") {
        Some(Json::Array(items)) => items,
        Some(_) => return Err(PlanError::invalid("`edges` must be an array")),
        None => Vec::new(),
    };
    let constraints: Vec<PartitionConstraint> = match top.take("constraints") {
        Some(v) => serde_json::from_value(v).map_err(|e| PlanError::invalid(format!("constraints: {e}")))?,
        None => Vec::new(),
    };
    top.finish().map_err(PlanError::invalid)?;

    let nodes = raw_nodes.into_iter().enumerate().map(|(i, n)| node_from_json(i, n)).collect::<Result<Vec<_>, _>>()?;

    let mut edges = Vec::with_capacity(raw_edges.len());
    for raw in raw_edges {
        let pair: (String, String) = serde_json::from_value(raw.clone())
            .map_err(|_| PlanError::invalid(format!("edge must be [parent, child], found {raw}")))?;
        edges.push(Edge { parent: pair.0, child: pair.1 });
    }
    for e in &edges {
        for end in [&e.parent, &e.child] {
            if !nodes.iter().any(|n| &n.id == end) {
                return Err(PlanError::DanglingEdge {
                    parent: e.parent.clone(),
                    child: e.child.clone(),
                    missing: end.clone(),
                });
            }
        }
    }

    Ok(AnalysisPlan { name, schema, privacy, nodes, edges, constraints })
}

fn node_from_json(index: usize, raw: Json) -> Result<PlanNode, PlanError> {
    let mut f = match raw {
        Json::Object(map) => Fields::new(map, "node"),
        _ => return Err(PlanError::invalid(format!("nodes[{index}] must be an object"))),
    };
    let id = match f.take("id") {
        Some(Json::String(s)) if !s.is_empty() => s,
        _ => return Err(PlanError::invalid(format!("nodes[{index}] needs a non-empty string `id`"))),
    };
    let bad = |message: String| PlanError::InvalidNode { node: id.clone(), message };
    let kind_name = match f.take("kind") {
        Some(Json::String(s)) => s,
        _ => return Err(bad("missing string `kind`".into())),
    };
    let kind = match kind_name.as_str() {
        "source" => NodeKind::Source,
        "release" => NodeKind::Release,
        "clip" => {
            let per_unit_bound = match f.take("per_unit_bound") {
                Some(v) => clip_bound_from_json(v).map_err(bad)?,
                None => return Err(bad("clip needs `per_unit_bound`".into())),
            };
            NodeKind::Clip(ClipSpec {
                per_unit_bound,
                scope: f.opt_string("scope").map_err(bad)?,
                value_bounds: f.opt_typed("value_bounds").map_err(bad)?,
                filter: f.predicate("filter").map_err(bad)?,
            })
        }
        "aggregate" => NodeKind::Aggregate(AggregateSpec {
            op: f.required_typed("op").map_err(bad)?,
            predicate: f.predicate("predicate").map_err(bad)?,
            group_by: f.opt_string("group_by").map_err(bad)?,
            column: f.opt_string("column").map_err(bad)?,
        }),
        "noise" => {
            let mechanism = f.opt_typed("mechanism").map_err(bad)?.unwrap_or_default();
            let epsilon = f.required_typed("epsilon").map_err(bad)?;
            let sensitivity = match f.take("sensitivity") {
                Some(v) => sensitivity_from_json(v).map_err(bad)?,
                None => return Err(bad("noise needs `sensitivity` (number, \"auto\", or {\"ref\": id})".into())),
            };
            let signal_estimate = f.opt_typed("signal_estimate").map_err(bad)?;
            NodeKind::Noise(NoiseSpec { mechanism, epsilon, sensitivity, signal_estimate })
        }
        "hyperparameter" => NodeKind::Hyperparameter { expr: f.required_typed("expr").map_err(bad)? },
        "constant" => NodeKind::Constant { value: f.required_typed("value").map_err(bad)? },
        "post_process" => {
            let expr = f.required_typed("expr").map_err(bad)?;
            let guard = match f.take("guard") {
                Some(v) => guard_from_json(v).map_err(bad)?,
                None => Guard::default(),
            };
            NodeKind::PostProcess(PostProcessSpec { expr, guard })
        }
        other => return Err(PlanError::UnknownNodeKind { node: id.clone(), kind: other.to_string() }),
    };
    f.finish().map_err(bad)?;
    Ok(PlanNode { id, kind })
}

fn ref_from_object(map: &Map<String, Json>) -> Option<NodeId> {
    match (map.len(), map.get("ref")) {
        (1, Some(Json::String(id))) => Some(id.clone()),
        _ => None,
    }
}

fn clip_bound_from_json(v: Json) -> Result<ClipBound, String> {
    match &v {
        Json::Number(n) => n
            .as_u64()
            .map(ClipBound::Fixed)
            .ok_or_else(|| format!("per_unit_bound must be a positive integer, found {n}")),
        Json::Object(map) => ref_from_object(map).map(ClipBound::Ref).ok_or_else(|| "per_unit_bound object must be {\"ref\": id}".into()),
        other => Err(format!("per_unit_bound must be an integer or {{\"ref\": id}}, found {other}")),
    }
}

fn sensitivity_from_json(v: Json) -> Result<SensitivityDecl, String> {
    match &v {
        Json::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .map(SensitivityDecl::Constant)
            .ok_or_else(|| format!("sensitivity {n} is not finite")),
        Json::String(s) if s == "auto" => Ok(SensitivityDecl::Auto),
        Json::Object(map) => ref_from_object(map).map(SensitivityDecl::Ref).ok_or_else(|| "sensitivity object must be {\"ref\": id}".into()),
        other => Err(format!("sensitivity must be a number, \"auto\", or {{\"ref\": id}}, found {other}")),
    }
}

fn guard_from_json(v: Json) -> Result<Guard, String> {
    match &v {
        Json::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Guard::Constant)
            .ok_or_else(|| format!("guard {n} is not finite")),
        Json::Object(map) => ref_from_object(map).map(Guard::Ref).ok_or_else(|| "guard object must be {\"ref\": id}".into()),
        other => Err(format!("guard must be a number or {{\"ref\": id}}, found {other}")),
    }
}

fn comparison_from_json(v: Json) -> Result<Comparison, String> {
    let items = match v {
        Json::Array(items) if items.len() == 3 => items,
        other => return Err(format!("comparison must be [op, column, value], found {other}")),
    };
    let op = items[0]
        .as_str()
        .and_then(CmpOp::from_name)
        .ok_or_else(|| format!("unknown comparison operator {}", items[0]))?;
    let column = items[1].as_str().ok_or_else(|| format!("comparison column must be a string, found {}", items[1]))?;
    let value = match &items[2] {
        Json::String(s) => Literal::Text(s.clone()),
        Json::Number(n) => Literal::Number(n.as_f64().filter(|x| x.is_finite()).ok_or("comparison literal is not finite")?),
        other => return Err(format!("comparison value must be a string or number, found {other}")),
    };
    Ok(Comparison { column: column.to_string(), op, value })
}

/// Object field reader that rejects leftovers.
struct Fields {
    map: Map<String, Json>,
    what: &'static str,
}

impl Fields {
    fn new(map: Map<String, Json>, what: &'static str) -> Self {
        Self { map, what }
    }

    fn take(&mut self, key: &str) -> Option<Json> {
        self.map.remove(key)
    }

    fn opt_string(&mut self, key: &str) -> Result<Option<String>, String> {
        match self.take(key) {
            None | Some(Json::Null) => Ok(None),
            Some(Json::String(s)) => Ok(Some(s)),
            Some(other) => Err(format!("`{key}` must be a string, found {other}")),
        }
    }

    fn opt_typed<T: serde::de::DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, String> {
        match self.take(key) {
            None | Some(Json::Null) => Ok(None),
            Some(v) => serde_json::from_value(v).map(Some).map_err(|e| format!("`{key}`: {e}")),
        }
    }

    fn required_typed<T: serde::de::DeserializeOwned>(&mut self, key: &str) -> Result<T, String> {
        self.opt_typed(key)?.ok_or_else(|| format!("missing `{key}`"))
    }

    fn predicate(&mut self, key: &str) -> Result<Vec<Comparison>, String> {
        match self.take(key) {
            None | Some(Json::Null) => Ok(Vec::new()),
            Some(Json::Array(items)) => items.into_iter().map(comparison_from_json).collect(),
            Some(other) => Err(format!("`{key}` must be a list of comparisons, found {other}")),
        }
    }

    fn finish(self) -> Result<(), String> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(format!("unknown {} field `{k}`", self.what)),
        }
    }
}

fn comparison_to_json(c: &Comparison) -> Json {
    let value = match &c.value {
        Literal::Text(s) => Json::String(s.clone()),
        Literal::Number(x) => Json::from(*x),
    };
    json!([c.op.name(), c.column, value])
}

fn ref_json(id: &str) -> Json {
    json!({ "ref": id })
}

fn node_to_json(node: &PlanNode) -> Json {
    let mut m = Map::new();
    m.insert("id".into(), Json::String(node.id.clone()));
    m.insert("kind".into(), Json::String(node.kind.name().into()));
    match &node.kind {
        NodeKind::Source | NodeKind::Release => {}
        NodeKind::Clip(c) => {
            let bound = match &c.per_unit_bound {
                ClipBound::Fixed(k) => Json::from(*k),
                ClipBound::Ref(id) => ref_json(id),
            };
            m.insert("per_unit_bound".into(), bound);
            if let Some(scope) = &c.scope {
                m.insert("scope".into(), Json::String(scope.clone()));
            }
            if let Some(vb) = &c.value_bounds {
                m.insert("value_bounds".into(), serde_json::to_value(vb).unwrap());
            }
            if !c.filter.is_empty() {
                m.insert("filter".into(), Json::Array(c.filter.iter().map(comparison_to_json).collect()));
            }
        }
        NodeKind::Aggregate(a) => {
            m.insert("op".into(), Json::String(a.op.name().into()));
            if !a.predicate.is_empty() {
                m.insert("predicate".into(), Json::Array(a.predicate.iter().map(comparison_to_json).collect()));
            }
            if let Some(g) = &a.group_by {
                m.insert("group_by".into(), Json::String(g.clone()));
            }
            if let Some(c) = &a.column {
                m.insert("column".into(), Json::String(c.clone()));
            }
        }
        NodeKind::Noise(n) => {
            m.insert("mechanism".into(), serde_json::to_value(n.mechanism).unwrap());
            m.insert("epsilon".into(), Json::from(n.epsilon.clone()));
            let s = match &n.sensitivity {
                SensitivityDecl::Constant(x) => Json::from(*x),
                SensitivityDecl::Auto => Json::String("auto".into()),
                SensitivityDecl::Ref(id) => ref_json(id),
            };
            m.insert("sensitivity".into(), s);
            if let Some(est) = n.signal_estimate {
                m.insert("signal_estimate".into(), Json::from(est));
            }
        }
        NodeKind::Hyperparameter { expr } => {
            m.insert("expr".into(), Json::from(expr.clone()));
        }
        NodeKind::Constant { value } => {
            m.insert("value".into(), Json::from(*value));
        }
        NodeKind::PostProcess(p) => {
            m.insert("expr".into(), Json::from(p.expr.clone()));
            let g = match &p.guard {
                Guard::Constant(x) => Json::from(*x),
                Guard::Ref(id) => ref_json(id),
            };
            m.insert("guard".into(), g);
        }
    }
    Json::Object(m)
}

pub(crate) fn plan_to_json(plan: &AnalysisPlan) -> Json {
    let mut m = Map::new();
    if let Some(name) = &plan.name {
        m.insert("name".into(), Json::String(name.clone()));
    }
    m.insert("schema".into(), serde_json::to_value(&plan.schema).unwrap());
    m.insert("privacy".into(), serde_json::to_value(&plan.privacy).unwrap());
    m.insert("nodes".into(), Json::Array(plan.nodes.iter().map(node_to_json).collect()));
    m.insert(
        "edges".into(),
        Json::Array(plan.edges.iter().map(|e| json!([e.parent, e.child])).collect()),
    );
    m.insert("constraints".into(), serde_json::to_value(&plan.constraints).unwrap());
    Json::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": {"columns": [{"name": "User ID", "kind": "identifier"}]},
        "privacy": {"unit_column": "User ID", "epsilon_total": 1.0},
        "nodes": [
            {"id": "data", "kind": "source"},
            {"id": "n", "kind": "aggregate", "op": "count"},
            {"id": "noisy", "kind": "noise", "epsilon": 1.0, "sensitivity": 1},
            {"id": "out", "kind": "release"}
        ],
        "edges": [["data", "n"], ["n", "noisy"], ["noisy", "out"]]
    }"#;

    #[test]
    fn minimal_plan_has_four_nodes() {
        let plan = parse_plan(MINIMAL).unwrap();
        assert_eq!(plan.nodes.len(), 4);
        assert_eq!(plan.edges.len(), 3);
        assert_eq!(plan.source_id(), Some("data"));
        assert_eq!(plan.topological_order().unwrap(), vec!["data", "n", "noisy", "out"]);
    }

    #[test]
    fn dangling_edge_names_the_missing_id() {
        let text = MINIMAL.replace(r#"["noisy", "out"]"#, r#"["noisy", "ghost"]"#);
        match parse_plan(&text).unwrap_err() {
            PlanError::DanglingEdge { missing, .. } => assert_eq!(missing, "ghost"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_kind_is_reported_with_node_id() {
        let text = MINIMAL.replace(r#""kind": "release""#, r#""kind": "publish""#);
        let err = parse_plan(&text).unwrap_err();
        assert_eq!(err, PlanError::UnknownNodeKind { node: "out".into(), kind: "publish".into() });
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_plan("{\n  \"schema\": [,\n}").unwrap_err();
        match err {
            PlanError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_node_fields_are_rejected() {
        let text = MINIMAL.replace(r#""sensitivity": 1"#, r#""sensitivity": 1, "sensitivty": 2"#);
        let err = parse_plan(&text).unwrap_err();
        assert!(matches!(err, PlanError::InvalidNode { ref node, .. } if node == "noisy"), "{err}");
    }

    #[test]
    fn reserialization_is_stable() {
        let plan = parse_plan(MINIMAL).unwrap();
        let text = plan.to_json_string();
        let again = parse_plan(&text).unwrap();
        assert_eq!(plan, again);
        assert_eq!(text, again.to_json_string());
    }
}
