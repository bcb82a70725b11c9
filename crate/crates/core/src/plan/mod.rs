//! Analysis plans: a dataflow graph of clip / aggregate / noise /
//! post-processing nodes over a single tabular source, plus the privacy
//! specification and declared partition constraints.

mod epsilon;
mod expr;
mod json;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use epsilon::{EpsilonSpec, SymbolicEpsilon, TOTAL_IDENT};
pub use expr::{Expr, ExprOp};
pub use json::{parse_plan, PlanError};
pub use validate::{validate_plan, StructuralCode, StructuralError};

use crate::exact::{self, Rational};

pub type NodeId = String;

/// Division guard used by `post_process` nodes that do not declare one.
pub const DEFAULT_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Timestamp,
    Identifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Closed value set; only meaningful for categorical columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

impl Column {
    pub fn new(name: &str, kind: ColumnKind) -> Self {
        Self { name: name.to_string(), kind, values: None }
    }

    pub fn categorical(name: &str, values: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            values: Some(values.iter().map(|v| v.to_string()).collect()),
        }
    }

    pub fn closed_values(&self) -> Option<&[String]> {
        match self.kind {
            ColumnKind::Categorical => self.values.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub columns: Vec<Column>,
}

impl Schema {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighboring {
    #[default]
    AddOrRemoveOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySpec {
    pub unit_column: String,
    #[serde(default)]
    pub neighboring: Neighboring,
    pub epsilon_total: f64,
}

impl PrivacySpec {
    /// The total budget as the exact rational its decimal text denotes.
    pub fn epsilon_total_exact(&self) -> Option<Rational> {
        exact::from_f64(self.epsilon_total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Text(String),
    Number(f64),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Text(s) => write!(f, "{s:?}"),
            Literal::Number(x) => write!(f, "{x}"),
        }
    }
}

/// One conjunct of a row predicate: `column <op> literal`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub column: String,
    pub op: CmpOp,
    pub value: Literal,
}

impl Comparison {
    pub fn new(op: CmpOp, column: &str, value: Literal) -> Self {
        Self { column: column.to_string(), op, value }
    }

    pub fn eq_text(column: &str, value: &str) -> Self {
        Self::new(CmpOp::Eq, column, Literal::Text(value.to_string()))
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.column, self.op.name(), self.value)
    }
}

/// Equality-fixed columns of a conjunctive predicate.
pub fn fixed_columns<'a>(predicates: impl IntoIterator<Item = &'a Comparison>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for c in predicates {
        if c.op == CmpOp::Eq {
            let v = match &c.value {
                Literal::Text(s) => s.clone(),
                Literal::Number(x) => x.to_string(),
            };
            out.entry(c.column.clone()).or_insert(v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClipBound {
    Fixed(u64),
    Ref(NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueBounds {
    pub column: String,
    pub lo: f64,
    pub hi: f64,
}

impl ValueBounds {
    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Contribution bounding: keep at most `per_unit_bound` rows per privacy unit
/// (per cell of `scope` when given), after dropping rows failing `filter`;
/// optionally clamp one numeric column into `value_bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSpec {
    pub per_unit_bound: ClipBound,
    pub scope: Option<String>,
    pub value_bounds: Option<ValueBounds>,
    pub filter: Vec<Comparison>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggOp {
    Count,
    Sum,
    /// Largest number of matching rows contributed by any single unit. Has no
    /// sensitivity rule; exists to describe data-dependent hyperparameters.
    MaxPerUnit,
}

impl AggOp {
    pub fn name(self) -> &'static str {
        match self {
            AggOp::Count => "count",
            AggOp::Sum => "sum",
            AggOp::MaxPerUnit => "max_per_unit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSpec {
    pub op: AggOp,
    pub predicate: Vec<Comparison>,
    pub group_by: Option<String>,
    /// Summed column (required for `sum`).
    pub column: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    #[default]
    Laplace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensitivityDecl {
    Constant(f64),
    Auto,
    Ref(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub mechanism: Mechanism,
    pub epsilon: EpsilonSpec,
    pub sensitivity: SensitivityDecl,
    /// Expected magnitude of the true value, used for utility warnings.
    pub signal_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Guard {
    Constant(f64),
    Ref(NodeId),
}

impl Default for Guard {
    fn default() -> Self {
        Guard::Constant(DEFAULT_GUARD)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessSpec {
    pub expr: Expr,
    /// Division uses `max(denominator, guard)`.
    pub guard: Guard,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Source,
    Clip(ClipSpec),
    Aggregate(AggregateSpec),
    Noise(NoiseSpec),
    Hyperparameter { expr: Expr },
    Constant { value: f64 },
    PostProcess(PostProcessSpec),
    Release,
}

impl NodeKind {
    pub const NAMES: [&'static str; 8] =
        ["source", "clip", "aggregate", "noise", "hyperparameter", "constant", "post_process", "release"];

    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Source => "source",
            NodeKind::Clip(_) => "clip",
            NodeKind::Aggregate(_) => "aggregate",
            NodeKind::Noise(_) => "noise",
            NodeKind::Hyperparameter { .. } => "hyperparameter",
            NodeKind::Constant { .. } => "constant",
            NodeKind::PostProcess(_) => "post_process",
            NodeKind::Release => "release",
        }
    }

    /// Source and clip nodes carry row sets; everything else carries numbers.
    pub fn is_relation(&self) -> bool {
        matches!(self, NodeKind::Source | NodeKind::Clip(_))
    }

    /// Nodes whose value can parameterize another node (`{"ref": ..}`).
    pub fn is_parameter(&self) -> bool {
        matches!(self, NodeKind::Hyperparameter { .. } | NodeKind::Constant { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl PlanNode {
    pub fn new(id: &str, kind: NodeKind) -> Self {
        Self { id: id.to_string(), kind }
    }

    /// Nodes referenced as parameters (clip bound, sensitivity, epsilon, guard).
    pub fn parameter_refs(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        match &self.kind {
            NodeKind::Clip(c) => {
                if let ClipBound::Ref(id) = &c.per_unit_bound {
                    out.insert(id.clone());
                }
            }
            NodeKind::Noise(n) => {
                if let SensitivityDecl::Ref(id) = &n.sensitivity {
                    out.insert(id.clone());
                }
                if let Some(id) = n.epsilon.referenced_node() {
                    out.insert(id.clone());
                }
            }
            NodeKind::PostProcess(p) => {
                if let Guard::Ref(id) = &p.guard {
                    out.insert(id.clone());
                }
            }
            _ => {}
        }
        out
    }

    /// Nodes referenced from an arithmetic expression.
    pub fn expr_refs(&self) -> BTreeSet<NodeId> {
        match &self.kind {
            NodeKind::Hyperparameter { expr } => expr.references(),
            NodeKind::PostProcess(p) => p.expr.references(),
            _ => BTreeSet::new(),
        }
    }
}

/// Declared guarantee: within each cell of the `within` columns, every
/// privacy unit's rows share a single value of `attribute`; with
/// `max_rows_per_unit`, a unit also has at most that many rows per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConstraint {
    pub attribute: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub within: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rows_per_unit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
}

impl Edge {
    pub fn new(parent: &str, child: &str) -> Self {
        Self { parent: parent.to_string(), child: child.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPlan {
    pub name: Option<String>,
    pub schema: Schema,
    pub privacy: PrivacySpec,
    pub nodes: Vec<PlanNode>,
    pub edges: Vec<Edge>,
    pub constraints: Vec<PartitionConstraint>,
}

impl AnalysisPlan {
    pub fn node(&self, id: &str) -> Option<&PlanNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_ids(&self) -> BTreeSet<&str> {
        self.nodes.iter().map(|n| n.id.as_str()).collect()
    }

    /// Parents of `id`, sorted and deduplicated.
    pub fn parents(&self, id: &str) -> Vec<&str> {
        let set: BTreeSet<&str> =
            self.edges.iter().filter(|e| e.child == id).map(|e| e.parent.as_str()).collect();
        set.into_iter().collect()
    }

    pub fn children(&self, id: &str) -> Vec<&str> {
        let set: BTreeSet<&str> =
            self.edges.iter().filter(|e| e.parent == id).map(|e| e.child.as_str()).collect();
        set.into_iter().collect()
    }

    /// Parents that feed data rather than parameters.
    pub fn data_parents(&self, id: &str) -> Vec<&str> {
        let params = self.node(id).map(|n| n.parameter_refs()).unwrap_or_default();
        self.parents(id).into_iter().filter(|p| !params.contains(*p)).collect()
    }

    /// The single data input of a clip, aggregate, noise, or release node.
    pub fn data_input(&self, id: &str) -> Option<&str> {
        match self.data_parents(id).as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }

    pub fn source_id(&self) -> Option<&str> {
        self.nodes.iter().find(|n| matches!(n.kind, NodeKind::Source)).map(|n| n.id.as_str())
    }

    /// Ids of nodes of one kind, sorted.
    pub fn ids_where(&self, pred: impl Fn(&NodeKind) -> bool) -> Vec<&str> {
        let set: BTreeSet<&str> =
            self.nodes.iter().filter(|n| pred(&n.kind)).map(|n| n.id.as_str()).collect();
        set.into_iter().collect()
    }

    pub fn noise_ids(&self) -> Vec<&str> {
        self.ids_where(|k| matches!(k, NodeKind::Noise(_)))
    }

    pub fn release_ids(&self) -> Vec<&str> {
        self.ids_where(|k| matches!(k, NodeKind::Release))
    }

    pub fn aggregate_ids(&self) -> Vec<&str> {
        self.ids_where(|k| matches!(k, NodeKind::Aggregate(_)))
    }

    /// Clip nodes between `aggregate` and the source, nearest first.
    pub fn clip_chain(&self, aggregate: &str) -> Vec<(&str, &ClipSpec)> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cursor = self.data_input(aggregate);
        while let Some(id) = cursor {
            if !seen.insert(id) {
                break;
            }
            match self.node(id).map(|n| &n.kind) {
                Some(NodeKind::Clip(spec)) => {
                    out.push((id, spec));
                    cursor = self.data_input(id);
                }
                _ => break,
            }
        }
        out
    }

    /// Every row predicate applied before `aggregate` sees a row: clip filters
    /// along the chain plus the aggregate's own predicate.
    pub fn effective_predicate(&self, aggregate: &str) -> Vec<&Comparison> {
        let mut out: Vec<&Comparison> = Vec::new();
        if let Some(NodeKind::Aggregate(a)) = self.node(aggregate).map(|n| &n.kind) {
            out.extend(a.predicate.iter());
        }
        for (_, clip) in self.clip_chain(aggregate) {
            out.extend(clip.filter.iter());
        }
        out
    }

    /// Transitive predecessors of `id` (excluding `id`).
    pub fn ancestors(&self, id: &str) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        let mut stack = self.parents(id);
        while let Some(p) = stack.pop() {
            if out.insert(p) {
                stack.extend(self.parents(p));
            }
        }
        out
    }

    /// Aggregates that feed `id` through value edges, excluding any
    /// parameter references on the way.
    pub fn data_aggregates(&self, id: &str) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = self.data_parents(id);
        while let Some(p) = stack.pop() {
            if !seen.insert(p) {
                continue;
            }
            match self.node(p).map(|n| &n.kind) {
                Some(NodeKind::Aggregate(_)) => {
                    out.insert(p);
                }
                Some(NodeKind::Source) | Some(NodeKind::Clip(_)) | None => {}
                Some(_) => stack.extend(self.data_parents(p)),
            }
        }
        out
    }

    /// Nodes in dependency order; ties broken by node id. `None` if cyclic.
    pub fn topological_order(&self) -> Option<Vec<&str>> {
        let ids = self.node_ids();
        let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|id| (*id, 0)).collect();
        let mut children: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in &self.edges {
            if !ids.contains(e.parent.as_str()) || !ids.contains(e.child.as_str()) {
                continue;
            }
            if children.entry(e.parent.as_str()).or_default().insert(e.child.as_str()) {
                *indegree.get_mut(e.child.as_str()).unwrap() += 1;
            }
        }
        let mut ready: BTreeSet<&str> =
            indegree.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
        let mut order = Vec::with_capacity(ids.len());
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for c in children.get(id).into_iter().flatten() {
                let d = indegree.get_mut(c).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == ids.len()).then_some(order)
    }

    /// Canonical JSON text of the plan.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&json::plan_to_json(self)).expect("plan JSON is always serializable")
    }

    pub fn to_json(&self) -> serde_json::Value {
        json::plan_to_json(self)
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed-plan")
    }
}
