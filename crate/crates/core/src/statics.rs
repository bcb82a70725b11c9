//! Static evaluation over a plan: exact values of constant parameters,
//! resolved budgets, and conservative value ranges (interval arithmetic).

use std::collections::BTreeSet;

use num::{Signed, Zero};

use crate::exact::{self, Rational};
use crate::plan::{
    AggOp, AnalysisPlan, ClipBound, ClipSpec, EpsilonSpec, Expr, ExprOp, Guard, NodeKind, NoiseSpec,
    SensitivityDecl,
};

/// Closed interval with possibly infinite ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const FULL: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
    pub const NONNEG: Interval = Interval { lo: 0.0, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn as_point(&self) -> Option<f64> {
        (self.lo == self.hi && self.lo.is_finite()).then_some(self.lo)
    }

    fn hull(values: impl IntoIterator<Item = f64>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            let v = if v.is_nan() { 0.0 } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Self { lo, hi }
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi).sanitize()
    }

    fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }

    fn mul(self, o: Self) -> Self {
        // 0 * inf is taken as 0: a zero factor pins the product.
        let m = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        Self::hull([m(self.lo, o.lo), m(self.lo, o.hi), m(self.hi, o.lo), m(self.hi, o.hi)])
    }

    /// Division by a strictly positive interval.
    fn div_positive(self, d: Self) -> Self {
        debug_assert!(d.lo > 0.0);
        let q = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b };
        Self::hull([q(self.lo, d.lo), q(self.lo, d.hi), q(self.hi, d.lo), q(self.hi, d.hi)])
    }

    fn abs(self) -> Self {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Self::new(0.0, (-self.lo).max(self.hi))
        }
    }

    fn sanitize(self) -> Self {
        if self.lo.is_nan() || self.hi.is_nan() {
            Self::FULL
        } else {
            self
        }
    }
}

/// Exact value of a constant or hyperparameter whose expression uses only
/// literals and other exactly-known parameters (no `sqrt`).
pub fn exact_value(plan: &AnalysisPlan, id: &str) -> Option<Rational> {
    exact_value_inner(plan, id, &mut BTreeSet::new())
}

fn exact_value_inner<'a>(plan: &'a AnalysisPlan, id: &'a str, visiting: &mut BTreeSet<&'a str>) -> Option<Rational> {
    if !visiting.insert(id) {
        return None;
    }
    let out = match &plan.node(id)?.kind {
        NodeKind::Constant { value } => exact::from_f64(*value),
        NodeKind::Hyperparameter { expr } => exact_expr(plan, expr, visiting),
        _ => None,
    };
    visiting.remove(id);
    out
}

fn exact_expr<'a>(plan: &'a AnalysisPlan, expr: &'a Expr, visiting: &mut BTreeSet<&'a str>) -> Option<Rational> {
    match expr {
        Expr::Num(x) => exact::from_f64(*x),
        Expr::Node(id) => exact_value_inner(plan, id, visiting),
        Expr::Op(op, args) => {
            let vals = args.iter().map(|a| exact_expr(plan, a, visiting)).collect::<Option<Vec<_>>>()?;
            match (op, vals.as_slice()) {
                (ExprOp::Add, _) => Some(vals.iter().fold(Rational::zero(), |acc, v| acc + v)),
                (ExprOp::Mul, [first, rest @ ..]) => Some(rest.iter().fold(first.clone(), |acc, v| acc * v)),
                (ExprOp::Sub, [a, b]) => Some(a - b),
                (ExprOp::Div, [a, b]) => (!b.is_zero()).then(|| a / b),
                (ExprOp::Neg, [a]) => Some(-a),
                (ExprOp::Abs, [a]) => Some(a.abs()),
                (ExprOp::Min, _) => vals.iter().min().cloned(),
                (ExprOp::Max, _) => vals.iter().max().cloned(),
                (ExprOp::Clamp, [x, lo, hi]) => Some(x.clone().max(lo.clone()).min(hi.clone())),
                _ => None,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonResolution {
    Resolved(Rational),
    /// The expression cannot be evaluated statically.
    Unresolved(String),
}

/// Resolves a noise node's budget to an exact rational.
pub fn resolve_epsilon(plan: &AnalysisPlan, noise: &NoiseSpec) -> EpsilonResolution {
    let total = match plan.privacy.epsilon_total_exact() {
        Some(t) => t,
        None => return EpsilonResolution::Unresolved("epsilon_total is not a finite number".into()),
    };
    match &noise.epsilon {
        EpsilonSpec::Literal(x) => match exact::from_f64(*x) {
            Some(r) => EpsilonResolution::Resolved(r),
            None => EpsilonResolution::Unresolved(format!("{x} is not finite")),
        },
        EpsilonSpec::Symbolic(s) => match s.resolve(&total) {
            Some(r) => EpsilonResolution::Resolved(r),
            None => EpsilonResolution::Unresolved(format!("`{}` divides by zero", s.source())),
        },
        EpsilonSpec::Ref(id) => match exact_value(plan, id) {
            Some(r) => EpsilonResolution::Resolved(r),
            None => EpsilonResolution::Unresolved(format!("parameter `{id}` has no statically known exact value")),
        },
    }
}

/// Largest row bound a clip can enforce, known before execution.
pub fn clip_bound_upper(plan: &AnalysisPlan, clip: &ClipSpec) -> Option<u64> {
    match &clip.per_unit_bound {
        ClipBound::Fixed(k) => Some(*k),
        ClipBound::Ref(id) => {
            let range = node_interval(plan, id);
            (range.hi.is_finite() && range.hi >= 1.0).then(|| range.hi.floor() as u64)
        }
    }
}

/// Declared sensitivity when it is a number known before execution.
pub fn declared_sensitivity(plan: &AnalysisPlan, noise: &NoiseSpec) -> Option<f64> {
    match &noise.sensitivity {
        SensitivityDecl::Constant(x) => Some(*x),
        SensitivityDecl::Auto => None,
        SensitivityDecl::Ref(id) => exact_value(plan, id).map(|r| exact::to_f64(&r)),
    }
}

pub fn guard_value(plan: &AnalysisPlan, guard: &Guard) -> Option<f64> {
    match guard {
        Guard::Constant(x) => Some(*x),
        Guard::Ref(id) => node_interval(plan, id).as_point(),
    }
}

/// Conservative range of a value node's output.
pub fn node_interval(plan: &AnalysisPlan, id: &str) -> Interval {
    node_interval_inner(plan, id, &mut BTreeSet::new())
}

fn node_interval_inner<'a>(plan: &'a AnalysisPlan, id: &'a str, visiting: &mut BTreeSet<&'a str>) -> Interval {
    let Some(node) = plan.node(id) else {
        return Interval::FULL;
    };
    if !visiting.insert(id) {
        return Interval::FULL;
    }
    let out = match &node.kind {
        NodeKind::Constant { value } => Interval::point(*value),
        NodeKind::Hyperparameter { expr } => expr_interval(plan, expr, None, visiting),
        NodeKind::PostProcess(p) => {
            let guard = match &p.guard {
                Guard::Constant(g) => Interval::point(*g),
                Guard::Ref(g) => node_interval_inner(plan, g, visiting),
            };
            expr_interval(plan, &p.expr, Some(guard), visiting)
        }
        NodeKind::Aggregate(a) => match a.op {
            AggOp::Count | AggOp::MaxPerUnit => Interval::NONNEG,
            AggOp::Sum => Interval::FULL,
        },
        NodeKind::Release => match plan.data_input(id) {
            Some(input) => node_interval_inner(plan, input, visiting),
            None => Interval::FULL,
        },
        NodeKind::Noise(_) | NodeKind::Source | NodeKind::Clip(_) => Interval::FULL,
    };
    visiting.remove(id);
    out
}

fn expr_interval<'a>(
    plan: &'a AnalysisPlan,
    expr: &'a Expr,
    guard: Option<Interval>,
    visiting: &mut BTreeSet<&'a str>,
) -> Interval {
    match expr {
        Expr::Num(x) => Interval::point(*x),
        Expr::Node(id) => node_interval_inner(plan, id, visiting),
        Expr::Op(op, args) => {
            let v: Vec<Interval> = args.iter().map(|a| expr_interval(plan, a, guard, visiting)).collect();
            match (op, v.as_slice()) {
                (ExprOp::Add, [first, rest @ ..]) => rest.iter().fold(*first, |acc, x| acc.add(*x)),
                (ExprOp::Mul, [first, rest @ ..]) => rest.iter().fold(*first, |acc, x| acc.mul(*x)),
                (ExprOp::Sub, [a, b]) => a.add(b.neg()),
                (ExprOp::Neg, [a]) => a.neg(),
                (ExprOp::Abs, [a]) => a.abs(),
                (ExprOp::Min, [first, rest @ ..]) => rest
                    .iter()
                    .fold(*first, |acc, x| Interval::new(acc.lo.min(x.lo), acc.hi.min(x.hi))),
                (ExprOp::Max, [first, rest @ ..]) => rest
                    .iter()
                    .fold(*first, |acc, x| Interval::new(acc.lo.max(x.lo), acc.hi.max(x.hi))),
                (ExprOp::Clamp, [x, lo, hi]) => {
                    Interval::new(x.lo.max(lo.lo).min(hi.hi), x.hi.max(lo.lo).min(hi.hi))
                }
                (ExprOp::Sqrt, [a]) => Interval::new(a.lo.max(0.0).sqrt(), a.hi.max(0.0).sqrt()),
                (ExprOp::Div, [a, b]) => match guard {
                    Some(g) if g.lo > 0.0 => {
                        let d = Interval::new(b.lo.max(g.lo), b.hi.max(g.lo));
                        a.div_positive(d)
                    }
                    _ if b.lo > 0.0 => a.div_positive(*b),
                    _ if b.hi < 0.0 => a.div_positive(b.neg()).neg(),
                    _ => Interval::FULL,
                },
                _ => Interval::FULL,
            }
        }
    }
}
