//! Budget declarations on noise nodes.
//!
//! A noise node's epsilon is a decimal literal (`0.5`), a symbolic share of
//! the total budget (`"epsilon_total / 14"`), or a reference to a
//! hyperparameter/constant node (`{"ref": "eps_q"}`).
//!
//! Symbolic grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | atom
//! atom  := decimal | 'epsilon_total' | '(' expr ')'
//! ```

use std::fmt;

use num::Zero;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::NodeId;
use crate::exact::{self, Rational};

pub const TOTAL_IDENT: &str = "epsilon_total";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Json", into = "Json")]
pub enum EpsilonSpec {
    Literal(f64),
    Symbolic(SymbolicEpsilon),
    Ref(NodeId),
}

impl EpsilonSpec {
    pub fn symbolic(source: &str) -> Result<Self, String> {
        SymbolicEpsilon::parse(source).map(EpsilonSpec::Symbolic)
    }

    pub fn referenced_node(&self) -> Option<&NodeId> {
        match self {
            EpsilonSpec::Ref(id) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for EpsilonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonSpec::Literal(x) => write!(f, "{x}"),
            EpsilonSpec::Symbolic(s) => write!(f, "{}", s.source),
            EpsilonSpec::Ref(id) => write!(f, "ref({id})"),
        }
    }
}

impl TryFrom<Json> for EpsilonSpec {
    type Error = String;

    fn try_from(value: Json) -> Result<Self, Self::Error> {
        match value {
            Json::Number(n) => n
                .as_f64()
                .filter(|x| x.is_finite())
                .map(EpsilonSpec::Literal)
                .ok_or_else(|| format!("epsilon {n} is not finite")),
            Json::String(s) => EpsilonSpec::symbolic(&s),
            Json::Object(map) => match map.get("ref") {
                Some(Json::String(id)) if map.len() == 1 => Ok(EpsilonSpec::Ref(id.clone())),
                _ => Err("epsilon object must be {\"ref\": \"<node id>\"}".into()),
            },
            other => Err(format!("epsilon must be a number, expression string, or ref; found {other}")),
        }
    }
}

impl From<EpsilonSpec> for Json {
    fn from(spec: EpsilonSpec) -> Self {
        match spec {
            EpsilonSpec::Literal(x) => Json::from(x),
            EpsilonSpec::Symbolic(s) => Json::String(s.source),
            EpsilonSpec::Ref(id) => serde_json::json!({ "ref": id }),
        }
    }
}

/// A parsed budget expression over `epsilon_total`; keeps its source text for
/// lossless serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicEpsilon {
    source: String,
    expr: EpsExpr,
}

#[derive(Debug, Clone, PartialEq)]
enum EpsExpr {
    Num(Rational),
    Total,
    Neg(Box<EpsExpr>),
    Bin(char, Box<EpsExpr>, Box<EpsExpr>),
}

impl SymbolicEpsilon {
    pub fn parse(source: &str) -> Result<Self, String> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens: &tokens, pos: 0 };
        let expr = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(format!("unexpected `{}` in epsilon expression `{source}`", tokens[parser.pos]));
        }
        Ok(Self { source: source.to_string(), expr })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates against the plan's total budget; `None` on division by zero.
    pub fn resolve(&self, total: &Rational) -> Option<Rational> {
        eval(&self.expr, total)
    }
}

fn eval(e: &EpsExpr, total: &Rational) -> Option<Rational> {
    Some(match e {
        EpsExpr::Num(r) => r.clone(),
        EpsExpr::Total => total.clone(),
        EpsExpr::Neg(inner) => -eval(inner, total)?,
        EpsExpr::Bin(op, a, b) => {
            let (a, b) = (eval(a, total)?, eval(b, total)?);
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => {
                    if b.is_zero() {
                        return None;
                    }
                    a / b
                }
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(Rational),
    Total,
    Sym(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(r) => write!(f, "{}", exact::render(r)),
            Token::Total => write!(f, "{TOTAL_IDENT}"),
            Token::Sym(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if "+-*/()".contains(c) {
            out.push(Token::Sym(c));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = exact::parse_decimal(&text).ok_or_else(|| format!("bad number `{text}`"))?;
            out.push(Token::Num(value));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let ident: String = chars[start..i].iter().collect();
            if ident != TOTAL_IDENT {
                return Err(format!("unknown identifier `{ident}` in epsilon expression (only `{TOTAL_IDENT}`)"));
            }
            out.push(Token::Total);
        } else {
            return Err(format!("unexpected character `{c}` in epsilon expression"));
        }
    }
    if out.is_empty() {
        return Err("empty epsilon expression".into());
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl Parser<'_> {
    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Sym(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<EpsExpr, String> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = EpsExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<EpsExpr, String> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = EpsExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<EpsExpr, String> {
        if self.peek_sym() == Some('-') {
            self.pos += 1;
            return Ok(EpsExpr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<EpsExpr, String> {
        let tok = self.tokens.get(self.pos).cloned().ok_or("epsilon expression ends early")?;
        self.pos += 1;
        match tok {
            Token::Num(r) => Ok(EpsExpr::Num(r)),
            Token::Total => Ok(EpsExpr::Total),
            Token::Sym('(') => {
                let inner = self.expr()?;
                if self.peek_sym() != Some(')') {
                    return Err("missing `)` in epsilon expression".into());
                }
                self.pos += 1;
                Ok(inner)
            }
            Token::Sym(c) => Err(format!("unexpected `{c}` in epsilon expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn resolves_shares_of_total() {
        let total = q(1, 1);
        let share = SymbolicEpsilon::parse("epsilon_total / 14").unwrap();
        assert_eq!(share.resolve(&total), Some(q(1, 14)));
        let mixed = SymbolicEpsilon::parse("(epsilon_total - 0.25) * 2 / 3").unwrap();
        assert_eq!(mixed.resolve(&total), Some(q(1, 2)));
        let neg = SymbolicEpsilon::parse("-epsilon_total + 2").unwrap();
        assert_eq!(neg.resolve(&q(1, 2)), Some(q(3, 2)));
    }

    #[test]
    fn division_by_zero_is_unresolvable() {
        let e = SymbolicEpsilon::parse("epsilon_total / (1 - 1)").unwrap();
        assert_eq!(e.resolve(&q(1, 1)), None);
    }

    #[test]
    fn rejects_foreign_identifiers_and_garbage() {
        assert!(SymbolicEpsilon::parse("eps / 2").unwrap_err().contains("unknown identifier"));
        assert!(SymbolicEpsilon::parse("epsilon_total /").is_err());
        assert!(SymbolicEpsilon::parse("(epsilon_total").is_err());
        assert!(SymbolicEpsilon::parse("epsilon_total 2").is_err());
        assert!(SymbolicEpsilon::parse("").is_err());
    }

    #[test]
    fn json_forms_round_trip() {
        for text in [r#"0.5"#, r#""epsilon_total / 7""#, r#"{"ref":"eps"}"#] {
            let spec: EpsilonSpec = serde_json::from_str(text).unwrap();
            assert_eq!(serde_json::to_string(&spec).unwrap(), text);
        }
    }
}
