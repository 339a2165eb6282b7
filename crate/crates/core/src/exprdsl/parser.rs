use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ast::{BinOp, ExprAst, Func, Node, Span, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("coordinate `{name}` out of range (system has {n_coords} coordinates)")]
    CoordinateOutOfRange { name: String, n_coords: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at {span}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Span,
}

/// The symbols an expression may mention: `q<i>`, `qd<i>` for `1 ≤ i ≤ n_coords`,
/// `t`, declared parameters, and optional aliases (e.g. `s`, `z` for `q1`, `q2`).
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    n_coords: usize,
    params: BTreeSet<String>,
    aliases: BTreeMap<String, Symbol>,
}

impl SymbolTable {
    pub fn new<I, S>(n_coords: usize, params: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if n_coords == 0 {
            return Err("a system needs at least one coordinate".into());
        }
        let mut table = SymbolTable { n_coords, ..Default::default() };
        for p in params {
            let p = p.into();
            table.check_free_name(&p)?;
            table.params.insert(p);
        }
        Ok(table)
    }

    pub fn with_alias(mut self, name: &str, target: Symbol) -> Result<Self, String> {
        self.check_free_name(name)?;
        self.aliases.insert(name.to_string(), target);
        Ok(self)
    }

    pub fn n_coords(&self) -> usize {
        self.n_coords
    }

    pub fn params(&self) -> &BTreeSet<String> {
        &self.params
    }

    fn check_free_name(&self, name: &str) -> Result<(), String> {
        let mut chars = name.chars();
        let valid = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(format!("`{name}` is not a valid identifier"));
        }
        if name == "t" || coordinate_syntax(name).is_some() || Func::from_name(name).is_some() {
            return Err(format!("`{name}` clashes with a reserved symbol"));
        }
        if self.params.contains(name) || self.aliases.contains_key(name) {
            return Err(format!("`{name}` declared twice"));
        }
        Ok(())
    }

    fn resolve(&self, name: &str, span: Span) -> Result<Symbol, ParseError> {
        if name == "t" {
            return Ok(Symbol::Time);
        }
        if let Some((is_vel, index)) = coordinate_syntax(name) {
            if index == 0 || index > self.n_coords {
                return Err(ParseError {
                    kind: ParseErrorKind::CoordinateOutOfRange {
                        name: name.to_string(),
                        n_coords: self.n_coords,
                    },
                    span,
                });
            }
            return Ok(if is_vel { Symbol::Vel(index - 1) } else { Symbol::Coord(index - 1) });
        }
        if let Some(sym) = self.aliases.get(name) {
            return Ok(sym.clone());
        }
        if self.params.contains(name) {
            return Ok(Symbol::Param(name.to_string()));
        }
        Err(ParseError { kind: ParseErrorKind::UnknownSymbol(name.to_string()), span })
    }
}

/// `q12` → `(false, 12)`, `qd3` → `(true, 3)`.
fn coordinate_syntax(name: &str) -> Option<(bool, usize)> {
    let (is_vel, digits) = if let Some(rest) = name.strip_prefix("qd") {
        (true, rest)
    } else {
        (false, name.strip_prefix('q')?)
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // Absurd indices are still coordinate syntax, just out of range.
    Some((is_vel, digits.parse().unwrap_or(usize::MAX)))
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Tok, Span), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::End, Span::new(start, start)));
        }
        let c = bytes[start];
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => self.number()?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax(format!("unexpected character `{ch}`")),
                    span: Span::new(start, start + ch.len_utf8()),
                });
            }
        };
        Ok((tok, Span::new(start, self.pos)))
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut n = digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(ParseError {
                kind: ParseErrorKind::Syntax("malformed number".into()),
                span: Span::new(start, self.pos),
            });
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            if digits(&mut self.pos) == 0 {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax("malformed exponent".into()),
                    span: Span::new(save, self.pos),
                });
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Tok::Num).map_err(|_| ParseError {
            kind: ParseErrorKind::Syntax(format!("malformed number `{text}`")),
            span: Span::new(start, self.pos),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    span: Span,
    table: &'a SymbolTable,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, span) = self.lexer.next_token()?;
        self.tok = tok;
        self.span = span;
        Ok(())
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { kind: ParseErrorKind::Syntax(msg.into()), span: self.span })
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = self.tok {
            self.bump()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = ExprAst::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = self.tok {
            self.bump()?;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = ExprAst::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprAst, ParseError> {
        if self.tok == Tok::Op('-') {
            let start = self.span;
            self.bump()?;
            let operand = self.unary()?;
            let span = start.join(operand.span);
            return Ok(ExprAst::new(Node::Neg(Box::new(operand)), span));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            // right operand is a unary expression: `a^-b`, and `a^b^c` = `a^(b^c)`
            let exponent = self.unary()?;
            return Ok(ExprAst::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst, ParseError> {
        let span = self.span;
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(ExprAst::new(Node::Number(v), span))
            }
            Tok::Ident(name) => {
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return self.syntax(format!("function `{name}` must be called with `(`"));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return self.syntax("expected `)` after function argument");
                    }
                    let end = self.span;
                    self.bump()?;
                    return Ok(ExprAst::new(Node::Call { func, arg: Box::new(arg) }, span.join(end)));
                }
                if self.tok == Tok::LParen {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnknownSymbol(format!("{name}(...)")),
                        span,
                    });
                }
                let sym = self.table.resolve(&name, span)?;
                Ok(ExprAst::new(Node::Symbol(sym), span))
            }
            Tok::LParen => {
                self.bump()?;
                let mut inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.syntax("expected `)`");
                }
                inner.span = span.join(self.span);
                self.bump()?;
                Ok(inner)
            }
            Tok::End => self.syntax("unexpected end of input"),
            other => self.syntax(format!("unexpected token {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parse against an explicit symbol table.
pub fn parse_with(text: &str, table: &SymbolTable) -> Result<ExprAst, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError {
            kind: ParseErrorKind::Syntax("empty expression".into()),
            span: Span::new(0, text.len()),
        });
    }
    let mut p = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        span: Span::default(),
        table,
    };
    p.bump()?;
    let ast = p.expr()?;
    if p.tok != Tok::End {
        return p.syntax(format!("unexpected {} after expression", describe(&p.tok)));
    }
    Ok(ast)
}

/// Parse `text` for a system with `n_coords` coordinates and the given parameters.
pub fn parse<I, S>(text: &str, n_coords: usize, param_names: I) -> Result<ExprAst, ParseError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let table = SymbolTable::new(n_coords, param_names).map_err(|msg| ParseError {
        kind: ParseErrorKind::Syntax(msg),
        span: Span::new(0, 0),
    })?;
    parse_with(text, &table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> ExprAst {
        parse(text, 2, ["omega"]).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert!(p("2+3*4").same_structure(&p("2+(3*4)")));
        assert!(p("2^3^2").same_structure(&p("2^(3^2)")));
        assert!(p("-q1^2").same_structure(&p("-(q1^2)")));
        assert!(p("a - b - c".replace(['a', 'b', 'c'], "q1").as_str())
            .same_structure(&p("(q1 - q1) - q1")));
        assert!(p("q1/q2*q1").same_structure(&p("(q1/q2)*q1")));
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(p("1.5e-3").node, Node::Number(1.5e-3));
        assert_eq!(p(".5").node, Node::Number(0.5));
        assert_eq!(p("2E+2").node, Node::Number(200.0));
        assert!(parse("1e", 1, Vec::<String>::new()).is_err());
    }

    #[test]
    fn coordinate_out_of_range() {
        let err = parse("q3 + q1", 2, Vec::<String>::new()).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::CoordinateOutOfRange { .. }));
        assert_eq!(err.span, Span::new(0, 2));
        let err = parse("q0", 2, Vec::<String>::new()).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::CoordinateOutOfRange { .. }));
    }

    #[test]
    fn unknown_symbol_has_span() {
        let err = parse("q1 + beta", 1, ["alpha"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownSymbol("beta".into()));
        assert_eq!(err.span, Span::new(5, 9));
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "   ", "1 +", "(q1", "q1 q1", "sin q1", "2 ** 3", "foo(1)", "q1 $ 2"] {
            assert!(parse(bad, 1, Vec::<String>::new()).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn aliases_resolve_to_coordinates() {
        let table = SymbolTable::new(2, Vec::<String>::new())
            .unwrap()
            .with_alias("s", Symbol::Coord(0))
            .unwrap()
            .with_alias("z", Symbol::Coord(1))
            .unwrap();
        let ast = parse_with("s*z", &table).unwrap();
        assert!(ast.same_structure(&p("q1*q2")));
    }

    #[test]
    fn params_cannot_shadow_reserved_names() {
        assert!(SymbolTable::new(1, ["q1"]).is_err());
        assert!(SymbolTable::new(1, ["t"]).is_err());
        assert!(SymbolTable::new(1, ["sin"]).is_err());
        assert!(SymbolTable::new(0, Vec::<String>::new()).is_err());
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "2+3*4",
            "-(q1+q2)^2",
            "(-q1)^2",
            "q1 - (q2 - 1)",
            "q1 / (q2 * omega)",
            "2^-1",
            "(2^3)^2",
            "sin(q1)^2 + cos(q1)^2",
            "-sqrt(abs(q1)) * --qd2",
            "0.5*qd1^2 - 0.5*omega^2*q1^2 + t",
        ] {
            let ast = p(text);
            let printed = ast.to_string();
            assert!(p(&printed).same_structure(&ast), "{text} -> {printed}");
        }
    }
}
