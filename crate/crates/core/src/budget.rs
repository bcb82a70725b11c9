//! Worst-case per-unit privacy budget.
//!
//! Noise nodes compose sequentially (budgets add) unless a partition
//! constraint says a unit can only appear in one cell of an attribute: then
//! nodes whose queries pin different cells of that attribute, within the same
//! cell of the constraint's `within` columns, compose in parallel (the block
//! costs its most expensive cell). Disjoint attribute values alone never
//! license parallel composition: one unit can contribute rows to every cell.

use std::collections::BTreeMap;

use num::{Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::exact::{self, Rational};
use crate::plan::{fixed_columns, AnalysisPlan, NodeKind, PartitionConstraint};
use crate::statics::{resolve_epsilon, EpsilonResolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("noise node `{node}`: epsilon cannot be resolved ({reason})")]
    Unresolved { node: String, reason: String },
    #[error("noise node `{node}`: epsilon must be positive, got {value}")]
    NonPositive { node: String, value: String },
    #[error("epsilon_total must be a positive finite number")]
    BadTotal,
    #[error("cannot split a budget among zero queries")]
    ZeroQueries,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompositionNode {
    Leaf { node: String, epsilon: Rational },
    /// Budgets add.
    Sequential { label: String, children: Vec<CompositionNode> },
    /// Only the most expensive child counts.
    Parallel { label: String, children: Vec<CompositionNode> },
}

impl CompositionNode {
    pub fn total(&self) -> Rational {
        match self {
            CompositionNode::Leaf { epsilon, .. } => epsilon.clone(),
            CompositionNode::Sequential { children, .. } => {
                children.iter().fold(Rational::zero(), |acc, c| acc + c.total())
            }
            CompositionNode::Parallel { children, .. } => {
                children.iter().map(CompositionNode::total).max().unwrap_or_else(Rational::zero)
            }
        }
    }

    /// Indented text rendering, one line per node.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        match self {
            CompositionNode::Leaf { node, epsilon } => {
                out.push_str(&format!("{pad}{node}: {}\n", show(epsilon)));
            }
            CompositionNode::Sequential { label, children } | CompositionNode::Parallel { label, children } => {
                let how = if matches!(self, CompositionNode::Parallel { .. }) { "parallel, max" } else { "sequential, sum" };
                out.push_str(&format!("{pad}{label} ({how}) = {}\n", show(&self.total())));
                for c in children {
                    c.render_into(out, depth + 1);
                }
            }
        }
    }
}

/// `1/14 (≈0.071429)`, or just `7` for integers.
pub fn show(r: &Rational) -> String {
    if r.is_integer() {
        exact::render(r)
    } else {
        format!("{} (≈{:.6})", exact::render(r), exact::to_f64(r))
    }
}

impl Serialize for CompositionNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CompositionNode::Leaf { node, epsilon } => {
                let mut st = s.serialize_struct("Leaf", 4)?;
                st.serialize_field("kind", "leaf")?;
                st.serialize_field("node", node)?;
                st.serialize_field("epsilon", &exact::render(epsilon))?;
                st.serialize_field("epsilon_value", &exact::to_f64(epsilon))?;
                st.end()
            }
            CompositionNode::Sequential { label, children } | CompositionNode::Parallel { label, children } => {
                let kind = if matches!(self, CompositionNode::Parallel { .. }) { "parallel" } else { "sequential" };
                let total = self.total();
                let mut st = s.serialize_struct("Group", 5)?;
                st.serialize_field("kind", kind)?;
                st.serialize_field("label", label)?;
                st.serialize_field("total", &exact::render(&total))?;
                st.serialize_field("total_value", &exact::to_f64(&total))?;
                st.serialize_field("children", children)?;
                st.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub node: String,
    pub epsilon: Rational,
}

impl Serialize for LedgerEntry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("LedgerEntry", 3)?;
        st.serialize_field("node", &self.node)?;
        st.serialize_field("epsilon", &exact::render(&self.epsilon))?;
        st.serialize_field("epsilon_value", &exact::to_f64(&self.epsilon))?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    /// One entry per noise node, sorted by node id.
    pub entries: Vec<LedgerEntry>,
    pub tree: CompositionNode,
    pub worst_case_total: Rational,
    pub limit: Rational,
}

impl BudgetLedger {
    pub fn exceeded(&self) -> bool {
        self.worst_case_total > self.limit
    }

    pub fn epsilon_of(&self, node: &str) -> Option<&Rational> {
        self.entries.iter().find(|e| e.node == node).map(|e| &e.epsilon)
    }
}

impl Serialize for BudgetLedger {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BudgetLedger", 6)?;
        st.serialize_field("entries", &self.entries)?;
        st.serialize_field("composition_tree", &self.tree)?;
        st.serialize_field("worst_case_total", &exact::render(&self.worst_case_total))?;
        st.serialize_field("worst_case_total_value", &exact::to_f64(&self.worst_case_total))?;
        st.serialize_field("budget_limit", &exact::render(&self.limit))?;
        st.serialize_field("budget_limit_value", &exact::to_f64(&self.limit))?;
        st.end()
    }
}

/// `epsilon_total / n`, exactly.
pub fn allocate_equal(epsilon_total: &Rational, n: u64) -> Result<Rational, BudgetError> {
    if n == 0 {
        return Err(BudgetError::ZeroQueries);
    }
    if !epsilon_total.is_positive() {
        return Err(BudgetError::BadTotal);
    }
    Ok(epsilon_total / Rational::from_integer(n.into()))
}

/// The (within values, attribute value) cell that a noise node's queries all
/// pin under `pc`, if they agree on one.
fn cell_under(plan: &AnalysisPlan, noise: &str, pc: &PartitionConstraint) -> Option<(Vec<String>, String)> {
    let aggregates = plan.data_aggregates(noise);
    let mut cell: Option<(Vec<String>, String)> = None;
    for agg in aggregates.iter().copied() {
        if let Some(NodeKind::Aggregate(spec)) = plan.node(agg).map(|n| &n.kind) {
            // A grouped aggregate spans every cell of its grouping column.
            if spec.group_by.as_deref() == Some(pc.attribute.as_str()) {
                return None;
            }
        }
        let fixed = fixed_columns(plan.effective_predicate(agg));
        let attr = fixed.get(&pc.attribute)?.clone();
        let within = pc.within.iter().map(|w| fixed.get(w).cloned()).collect::<Option<Vec<_>>>()?;
        match &cell {
            None => cell = Some((within, attr)),
            Some(c) if *c == (within.clone(), attr.clone()) => {}
            Some(_) => return None,
        }
    }
    cell
}

/// Builds the composition tree and worst-case total for every noise node.
pub fn compose(plan: &AnalysisPlan) -> Result<BudgetLedger, BudgetError> {
    let limit = plan.privacy.epsilon_total_exact().filter(exact::is_positive).ok_or(BudgetError::BadTotal)?;
    let mut entries = Vec::new();
    for id in plan.noise_ids() {
        let NodeKind::Noise(spec) = &plan.node(id).expect("listed").kind else { unreachable!() };
        let epsilon = match resolve_epsilon(plan, spec) {
            EpsilonResolution::Resolved(e) => e,
            EpsilonResolution::Unresolved(reason) => {
                return Err(BudgetError::Unresolved { node: id.to_string(), reason })
            }
        };
        if !exact::is_positive(&epsilon) {
            return Err(BudgetError::NonPositive { node: id.to_string(), value: exact::render(&epsilon) });
        }
        entries.push(LedgerEntry { node: id.to_string(), epsilon });
    }
    entries.sort_by(|a, b| a.node.cmp(&b.node));

    // (constraint index, within values) -> attribute value -> leaves
    type Block = BTreeMap<String, Vec<CompositionNode>>;
    let mut blocks: BTreeMap<(usize, Vec<String>), Block> = BTreeMap::new();
    let mut loose = Vec::new();
    for e in &entries {
        let leaf = CompositionNode::Leaf { node: e.node.clone(), epsilon: e.epsilon.clone() };
        let scoped = plan
            .constraints
            .iter()
            .enumerate()
            .find_map(|(i, pc)| cell_under(plan, &e.node, pc).map(|(within, attr)| ((i, within), attr)));
        match scoped {
            Some((key, attr)) => blocks.entry(key).or_default().entry(attr).or_default().push(leaf),
            None => loose.push(leaf),
        }
    }

    let mut top = Vec::new();
    for ((ci, within), cells) in blocks {
        let pc = &plan.constraints[ci];
        let scope = if pc.within.is_empty() {
            String::new()
        } else {
            format!(
                " where {}",
                pc.within.iter().zip(&within).map(|(w, v)| format!("{w} = {v}")).collect::<Vec<_>>().join(", ")
            )
        };
        let children = cells
            .into_iter()
            .map(|(value, mut leaves)| {
                if leaves.len() == 1 {
                    leaves.pop().unwrap()
                } else {
                    CompositionNode::Sequential { label: format!("{} = {value}", pc.attribute), children: leaves }
                }
            })
            .collect();
        top.push(CompositionNode::Parallel { label: format!("{} cells{scope}", pc.attribute), children });
    }
    top.extend(loose);
    let tree = CompositionNode::Sequential { label: "all releases".into(), children: top };
    let worst_case_total = tree.total();
    Ok(BudgetLedger { entries, tree, worst_case_total, limit })
}
