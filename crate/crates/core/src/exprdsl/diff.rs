use super::ast::{BinOp, ExprAst, Func, Node, Symbol};

fn is_num(e: &ExprAst, v: f64) -> bool {
    matches!(e.node, Node::Number(x) if x == v)
}

fn add(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        a.add(b)
    }
}

fn sub(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        a.sub(b)
    }
}

fn neg(a: ExprAst) -> ExprAst {
    match a.node {
        Node::Number(v) => ExprAst::num(-v),
        _ => a.neg(),
    }
}

fn mul(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        ExprAst::num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        a.mul(b)
    }
}

fn div(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) {
        ExprAst::num(0.0)
    } else {
        a.div(b)
    }
}

fn call(func: Func, arg: &ExprAst) -> ExprAst {
    ExprAst::call(func, arg.clone())
}

/// Partial derivative of `ast` with respect to `wrt`, as a new tree.
///
/// Zero and one factors are dropped; nothing else is simplified.
pub fn differentiate(ast: &ExprAst, wrt: &Symbol) -> ExprAst {
    if !ast.uses(wrt) {
        return ExprAst::num(0.0);
    }
    match &ast.node {
        Node::Number(_) => ExprAst::num(0.0),
        Node::Symbol(s) => ExprAst::num(if s == wrt { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(differentiate(a, wrt)),
        Node::Binary { op, lhs, rhs } => {
            let (u, v) = (lhs.as_ref(), rhs.as_ref());
            let (du, dv) = (differentiate(u, wrt), differentiate(v, wrt));
            match op {
                BinOp::Add => add(du, dv),
                BinOp::Sub => sub(du, dv),
                BinOp::Mul => add(mul(du, v.clone()), mul(u.clone(), dv)),
                BinOp::Div => div(sub(mul(du, v.clone()), mul(u.clone(), dv)), v.clone().pow(2.0)),
                BinOp::Pow if !v.uses(wrt) => {
                    let reduced = match v.node {
                        Node::Number(n) => ExprAst::num(n - 1.0),
                        _ => v.clone().sub(ExprAst::num(1.0)),
                    };
                    let power = if is_num(&reduced, 1.0) {
                        u.clone()
                    } else {
                        ExprAst::binary(BinOp::Pow, u.clone(), reduced)
                    };
                    mul(mul(v.clone(), power), du)
                }
                BinOp::Pow => {
                    // u^v (v' ln u + v u'/u)
                    let inner = add(mul(dv, call(Func::Log, u)), div(mul(v.clone(), du), u.clone()));
                    mul(ast.clone(), inner)
                }
            }
        }
        Node::Call { func, arg } => {
            let du = differentiate(arg, wrt);
            let outer = match func {
                Func::Sin => call(Func::Cos, arg),
                Func::Cos => neg(call(Func::Sin, arg)),
                Func::Tan => ExprAst::num(1.0).div(call(Func::Cos, arg).pow(2.0)),
                Func::Exp => ast.clone(),
                Func::Log => ExprAst::num(1.0).div(arg.as_ref().clone()),
                Func::Sqrt => ExprAst::num(0.5).div(ast.clone()),
                Func::Sinh => call(Func::Cosh, arg),
                Func::Cosh => call(Func::Sinh, arg),
                Func::Abs => arg.as_ref().clone().div(ast.clone()),
            };
            mul(outer, du)
        }
    }
}
