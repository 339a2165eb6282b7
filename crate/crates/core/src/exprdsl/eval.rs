use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{BinOp, ExprAst, Func, Node, Span, Symbol};
use crate::autodiff::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalErrorKind {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite result")]
    NonFinite,
    #[error("unbound symbol `{0}`")]
    Unbound(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at {span}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub span: Span,
}

/// Values for every symbol an expression may mention.
#[derive(Clone, Copy, Debug)]
pub struct Bindings<'a, S> {
    pub q: &'a [S],
    pub qd: &'a [S],
    pub t: &'a S,
    pub params: &'a BTreeMap<String, f64>,
}

fn domain<T>(span: Span, msg: &str) -> Result<T, EvalError> {
    Err(EvalError { kind: EvalErrorKind::Domain(msg.to_string()), span })
}

/// Evaluate `ast` over any [`Scalar`]; the same tree serves plain reals and
/// every dual-number level.
pub fn evaluate<S: Scalar>(ast: &ExprAst, b: &Bindings<'_, S>) -> Result<S, EvalError> {
    let v = match &ast.node {
        Node::Number(v) => S::from_f64(*v),
        Node::Symbol(sym) => lookup(sym, b, ast.span)?,
        Node::Neg(a) => -evaluate(a, b)?,
        Node::Call { func, arg } => {
            let x = evaluate(arg, b)?;
            call(*func, x, ast.span)?
        }
        Node::Binary { op: BinOp::Pow, lhs, rhs } => power(lhs, rhs, b, ast.span)?,
        Node::Binary { op, lhs, rhs } => {
            let l = evaluate(lhs, b)?;
            let r = evaluate(rhs, b)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r.value() == 0.0 {
                        return domain(ast.span, "division by zero");
                    }
                    l / r
                }
                BinOp::Pow => unreachable!(),
            }
        }
    };
    if !v.value().is_finite() {
        return Err(EvalError { kind: EvalErrorKind::NonFinite, span: ast.span });
    }
    Ok(v)
}

fn lookup<S: Scalar>(sym: &Symbol, b: &Bindings<'_, S>, span: Span) -> Result<S, EvalError> {
    let unbound = || EvalError { kind: EvalErrorKind::Unbound(sym.to_string()), span };
    match sym {
        Symbol::Coord(i) => b.q.get(*i).cloned().ok_or_else(unbound),
        Symbol::Vel(i) => b.qd.get(*i).cloned().ok_or_else(unbound),
        Symbol::Time => Ok(b.t.clone()),
        Symbol::Param(p) => b.params.get(p).map(|&v| S::from_f64(v)).ok_or_else(unbound),
    }
}

fn call<S: Scalar>(func: Func, x: S, span: Span) -> Result<S, EvalError> {
    Ok(match func {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Tan => x.tan(),
        Func::Exp => x.exp(),
        Func::Log => {
            if x.value() <= 0.0 {
                return domain(span, "log of non-positive argument");
            }
            x.ln()
        }
        Func::Sqrt => {
            if x.value() < 0.0 {
                return domain(span, "sqrt of negative argument");
            }
            x.sqrt()
        }
        Func::Sinh => x.sinh(),
        Func::Cosh => x.cosh(),
        Func::Abs => x.abs(),
    })
}

fn power<S: Scalar>(
    lhs: &ExprAst,
    rhs: &ExprAst,
    b: &Bindings<'_, S>,
    span: Span,
) -> Result<S, EvalError> {
    let base = evaluate(lhs, b)?;
    if rhs.is_state_independent() {
        let fb = Bindings::<f64> { q: &[], qd: &[], t: &0.0, params: b.params };
        let n = evaluate(rhs, &fb)?;
        let x = base.value();
        if x < 0.0 && n.fract() != 0.0 {
            return domain(span, "non-integer power of a negative base");
        }
        if x == 0.0 && n < 0.0 {
            return domain(span, "negative power of zero");
        }
        return Ok(base.powf(n));
    }
    if base.value() <= 0.0 {
        return domain(span, "state-dependent exponent needs a positive base");
    }
    let exponent = evaluate(rhs, b)?;
    Ok((exponent * base.ln()).exp())
}
