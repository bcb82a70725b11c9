//! Prefix s-expressions used by `post_process` and `hyperparameter` nodes.
//!
//! An expression is a JSON number (literal), a JSON string (node id), or an
//! array whose head names an operator: `["div", "noisy_long", "noisy_total"]`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExprOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Abs,
    Min,
    Max,
    Clamp,
    Sqrt,
}

impl ExprOp {
    pub const ALL: [ExprOp; 10] = [
        ExprOp::Add,
        ExprOp::Sub,
        ExprOp::Mul,
        ExprOp::Div,
        ExprOp::Neg,
        ExprOp::Abs,
        ExprOp::Min,
        ExprOp::Max,
        ExprOp::Clamp,
        ExprOp::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExprOp::Add => "add",
            ExprOp::Sub => "sub",
            ExprOp::Mul => "mul",
            ExprOp::Div => "div",
            ExprOp::Neg => "neg",
            ExprOp::Abs => "abs",
            ExprOp::Min => "min",
            ExprOp::Max => "max",
            ExprOp::Clamp => "clamp",
            ExprOp::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Accepted argument counts as `(min, max)`; `None` means variadic.
    pub fn arity(self) -> (usize, Option<usize>) {
        match self {
            ExprOp::Add | ExprOp::Mul | ExprOp::Min | ExprOp::Max => (2, None),
            ExprOp::Sub | ExprOp::Div => (2, Some(2)),
            ExprOp::Neg | ExprOp::Abs | ExprOp::Sqrt => (1, Some(1)),
            ExprOp::Clamp => (3, Some(3)),
        }
    }

    pub fn accepts(self, n: usize) -> bool {
        let (lo, hi) = self.arity();
        n >= lo && hi.is_none_or(|hi| n <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Json", into = "Json")]
pub enum Expr {
    Num(f64),
    Node(NodeId),
    Op(ExprOp, Vec<Expr>),
}

impl Expr {
    pub fn op(op: ExprOp, args: Vec<Expr>) -> Self {
        Expr::Op(op, args)
    }

    pub fn node(id: impl Into<NodeId>) -> Self {
        Expr::Node(id.into())
    }

    /// Node ids referenced anywhere in the expression.
    pub fn references(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut BTreeSet<NodeId>) {
        match self {
            Expr::Num(_) => {}
            Expr::Node(id) => {
                out.insert(id.clone());
            }
            Expr::Op(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
        }
    }

    /// Operators whose argument count is wrong, in pre-order.
    pub fn arity_errors(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk_arity(&mut out);
        out
    }

    fn walk_arity(&self, out: &mut Vec<String>) {
        if let Expr::Op(op, args) = self {
            if !op.accepts(args.len()) {
                out.push(format!("`{}` does not take {} argument(s)", op.name(), args.len()));
            }
            args.iter().for_each(|a| a.walk_arity(out));
        }
    }

    pub fn contains_op(&self, needle: ExprOp) -> bool {
        match self {
            Expr::Op(op, args) => *op == needle || args.iter().any(|a| a.contains_op(needle)),
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Node(id) => write!(f, "{id}"),
            Expr::Op(op, args) => {
                write!(f, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl TryFrom<Json> for Expr {
    type Error = String;

    fn try_from(value: Json) -> Result<Self, Self::Error> {
        match value {
            Json::Number(n) => n
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Expr::Num)
                .ok_or_else(|| format!("literal {n} is not a finite number")),
            Json::String(s) => Ok(Expr::Node(s)),
            Json::Array(items) => {
                let mut items = items.into_iter();
                let head = match items.next() {
                    Some(Json::String(s)) => s,
                    Some(other) => return Err(format!("operator must be a string, found {other}")),
                    None => return Err("empty expression list".into()),
                };
                let op = ExprOp::from_name(&head).ok_or_else(|| format!("unknown operator `{head}`"))?;
                let args = items.map(Expr::try_from).collect::<Result<Vec<_>, _>>()?;
                Ok(Expr::Op(op, args))
            }
            other => Err(format!("expected number, node id, or [op, ...], found {other}")),
        }
    }
}

impl From<Expr> for Json {
    fn from(expr: Expr) -> Self {
        match expr {
            Expr::Num(x) => Json::from(x),
            Expr::Node(id) => Json::String(id),
            Expr::Op(op, args) => {
                let mut out = Vec::with_capacity(args.len() + 1);
                out.push(Json::String(op.name().to_string()));
                out.extend(args.into_iter().map(Json::from));
                Json::Array(out)
            }
        }
    }
}
