use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Byte range `[start, end)` into the source text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// A resolved identifier. Coordinate indices are zero-based; the surface syntax
/// `q1`, `qd1` is one-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Coord(usize),
    Vel(usize),
    Time,
    Param(String),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Coord(i) => write!(f, "q{}", i + 1),
            Symbol::Vel(i) => write!(f, "qd{}", i + 1),
            Symbol::Time => f.write_str("t"),
            Symbol::Param(p) => f.write_str(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Abs,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Number(f64),
    Symbol(Symbol),
    Neg(Box<ExprAst>),
    Binary { op: BinOp, lhs: Box<ExprAst>, rhs: Box<ExprAst> },
    Call { func: Func, arg: Box<ExprAst> },
}

/// Expression tree with source spans.
///
/// Equality compares structure *and* spans; use [`ExprAst::same_structure`] to
/// ignore spans.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprAst {
    pub node: Node,
    pub span: Span,
}

#[allow(clippy::should_implement_trait)]
impl ExprAst {
    pub fn new(node: Node, span: Span) -> Self {
        ExprAst { node, span }
    }

    pub fn num(v: f64) -> Self {
        ExprAst::new(Node::Number(v), Span::default())
    }

    pub fn sym(s: Symbol) -> Self {
        ExprAst::new(Node::Symbol(s), Span::default())
    }

    pub fn binary(op: BinOp, lhs: ExprAst, rhs: ExprAst) -> Self {
        let span = lhs.span.join(rhs.span);
        ExprAst::new(Node::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span)
    }

    pub fn call(func: Func, arg: ExprAst) -> Self {
        let span = arg.span;
        ExprAst::new(Node::Call { func, arg: Box::new(arg) }, span)
    }

    pub fn add(self, rhs: ExprAst) -> Self {
        ExprAst::binary(BinOp::Add, self, rhs)
    }

    pub fn sub(self, rhs: ExprAst) -> Self {
        ExprAst::binary(BinOp::Sub, self, rhs)
    }

    pub fn mul(self, rhs: ExprAst) -> Self {
        ExprAst::binary(BinOp::Mul, self, rhs)
    }

    pub fn div(self, rhs: ExprAst) -> Self {
        ExprAst::binary(BinOp::Div, self, rhs)
    }

    pub fn pow(self, exponent: f64) -> Self {
        ExprAst::binary(BinOp::Pow, self, ExprAst::num(exponent))
    }

    pub fn neg(self) -> Self {
        let span = self.span;
        ExprAst::new(Node::Neg(Box::new(self)), span)
    }

    /// Sum of the terms, `0` for an empty list.
    pub fn sum<I: IntoIterator<Item = ExprAst>>(terms: I) -> Self {
        terms.into_iter().reduce(ExprAst::add).unwrap_or_else(|| ExprAst::num(0.0))
    }

    /// Structural equality ignoring spans.
    pub fn same_structure(&self, other: &ExprAst) -> bool {
        match (&self.node, &other.node) {
            (Node::Number(a), Node::Number(b)) => a.to_bits() == b.to_bits(),
            (Node::Symbol(a), Node::Symbol(b)) => a == b,
            (Node::Neg(a), Node::Neg(b)) => a.same_structure(b),
            (
                Node::Binary { op: oa, lhs: la, rhs: ra },
                Node::Binary { op: ob, lhs: lb, rhs: rb },
            ) => oa == ob && la.same_structure(lb) && ra.same_structure(rb),
            (Node::Call { func: fa, arg: aa }, Node::Call { func: fb, arg: ab }) => {
                fa == fb && aa.same_structure(ab)
            }
            _ => false,
        }
    }

    pub fn visit_symbols(&self, f: &mut dyn FnMut(&Symbol)) {
        match &self.node {
            Node::Number(_) => {}
            Node::Symbol(s) => f(s),
            Node::Neg(a) | Node::Call { arg: a, .. } => a.visit_symbols(f),
            Node::Binary { lhs, rhs, .. } => {
                lhs.visit_symbols(f);
                rhs.visit_symbols(f);
            }
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.visit_symbols(&mut |s| {
            out.insert(s.clone());
        });
        out
    }

    pub fn uses(&self, sym: &Symbol) -> bool {
        let mut found = false;
        self.visit_symbols(&mut |s| found |= s == sym);
        found
    }

    /// True when no coordinate, velocity or time symbol occurs (parameters allowed).
    pub fn is_state_independent(&self) -> bool {
        let mut dep = false;
        self.visit_symbols(&mut |s| dep |= !matches!(s, Symbol::Param(_)));
        !dep
    }

    /// Rebuild the tree with symbols replaced where `f` returns a replacement.
    pub fn substitute(&self, f: &dyn Fn(&Symbol) -> Option<ExprAst>) -> ExprAst {
        let node = match &self.node {
            Node::Number(v) => Node::Number(*v),
            Node::Symbol(s) => match f(s) {
                Some(rep) => return rep,
                None => Node::Symbol(s.clone()),
            },
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(f))),
            Node::Binary { op, lhs, rhs } => Node::Binary {
                op: *op,
                lhs: Box::new(lhs.substitute(f)),
                rhs: Box::new(rhs.substitute(f)),
            },
            Node::Call { func, arg } => Node::Call { func: *func, arg: Box::new(arg.substitute(f)) },
        };
        ExprAst::new(node, self.span)
    }

    /// Replace every parameter symbol that has a value in `params` by a literal.
    pub fn bind_params(&self, params: &BTreeMap<String, f64>) -> ExprAst {
        self.substitute(&|s| match s {
            Symbol::Param(p) => params.get(p).map(|&v| ExprAst::new(Node::Number(v), Span::default())),
            _ => None,
        })
    }

    /// Renumber coordinate and velocity indices through `map`.
    pub fn remap_coords(&self, map: &dyn Fn(usize) -> usize) -> ExprAst {
        self.substitute(&|s| match s {
            Symbol::Coord(i) => Some(ExprAst::sym(Symbol::Coord(map(*i)))),
            Symbol::Vel(i) => Some(ExprAst::sym(Symbol::Vel(map(*i)))),
            _ => None,
        })
    }
}

/// Set of symbol names occurring in `ast`, in canonical spelling.
pub fn free_symbols(ast: &ExprAst) -> BTreeSet<String> {
    ast.symbols().into_iter().map(|s| s.to_string()).collect()
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Number(v) if *v < 0.0 || v.is_sign_negative() => PREC_NEG,
        Node::Number(_) | Node::Symbol(_) | Node::Call { .. } => PREC_ATOM,
        Node::Neg(_) => PREC_NEG,
        Node::Binary { op: BinOp::Add | BinOp::Sub, .. } => PREC_ADD,
        Node::Binary { op: BinOp::Mul | BinOp::Div, .. } => PREC_MUL,
        Node::Binary { op: BinOp::Pow, .. } => PREC_POW,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &ExprAst, min_prec: u8) -> fmt::Result {
    if precedence(&e.node) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Minimal-parenthesis rendering that reparses to the same structure.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Number(v) => write!(f, "{v:?}"),
            Node::Symbol(s) => write!(f, "{s}"),
            Node::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, PREC_NEG)
            }
            Node::Call { func, arg } => write!(f, "{}({arg})", func.name()),
            Node::Binary { op, lhs, rhs } => {
                let (l, r) = match op {
                    BinOp::Add | BinOp::Sub => (PREC_ADD, PREC_MUL),
                    BinOp::Mul | BinOp::Div => (PREC_MUL, PREC_NEG),
                    BinOp::Pow => (PREC_ATOM, PREC_NEG),
                };
                write_operand(f, lhs, l)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, rhs, r)
            }
        }
    }
}
