//! Closed expression grammar for analytic exponent fields.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '·') unary)*
//! unary  := '-' unary | atom
//! atom   := number | 'pi' | 'x1' .. 'xN' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp'
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column} in `{source_text}`")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed field expression over the coordinates `x1..xN`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    source: String,
    root: Node,
    max_coord: usize,
}

impl FieldExpr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let mut p = Parser {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            max_coord: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: src.trim().to_string(),
            root,
            max_coord: p.max_coord,
        })
    }

    /// Constant expression.
    pub fn constant(c: f64) -> Self {
        Self {
            source: format!("{c}"),
            root: Node::Const(c),
            max_coord: 0,
        }
    }

    /// Highest coordinate index referenced (`x3` gives 3, none gives 0).
    pub fn max_coord(&self) -> usize {
        self.max_coord
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval(&self.root, x)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn eval(n: &Node, x: &[f64]) -> f64 {
    match n {
        Node::Const(c) => *c,
        Node::Coord(i) => x[*i],
        Node::Neg(a) => -eval(a, x),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Call(f, a) => {
            let v = eval(a, x);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    max_coord: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            column: self.pos + 1,
            message: message.to_string(),
            source_text: self.src.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                '+' => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                '-' | '−' => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some('*' | '·') = self.peek() {
            self.pos += 1;
            lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some('-' | '−') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{want}`")))
        }
    }

    fn slice(&self, start: usize, end: usize) -> &str {
        let b0 = self.chars[start].0;
        let b1 = self.chars.get(end).map_or(self.src.len(), |c| c.0);
        &self.src[b0..b1]
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let mut end = start;
        let n = self.chars.len();
        while end < n && (self.chars[end].1.is_ascii_digit() || self.chars[end].1 == '.') {
            end += 1;
        }
        if end < n && matches!(self.chars[end].1, 'e' | 'E') {
            let mut k = end + 1;
            if k < n && matches!(self.chars[k].1, '+' | '-') {
                k += 1;
            }
            if k < n && self.chars[k].1.is_ascii_digit() {
                while k < n && self.chars[k].1.is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = self.slice(start, end);
        let value: f64 = text
            .parse()
            .map_err(|_| self.error(&format!("bad number `{text}`")))?;
        self.pos = end;
        Ok(Node::Const(value))
    }

    fn word(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let mut end = start;
        while end < self.chars.len() && self.chars[end].1.is_ascii_alphanumeric() {
            end += 1;
        }
        let word = self.slice(start, end).to_string();
        let func = match word.as_str() {
            "pi" => {
                self.pos = end;
                return Ok(Node::Const(std::f64::consts::PI));
            }
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            w if w.len() > 1
                && w.starts_with('x')
                && w[1..].chars().all(|c| c.is_ascii_digit()) =>
            {
                let idx: usize = w[1..].parse().map_err(|_| self.error("bad coordinate"))?;
                if idx == 0 {
                    return Err(self.error("coordinates are numbered from x1"));
                }
                self.pos = end;
                self.max_coord = self.max_coord.max(idx);
                return Ok(Node::Coord(idx - 1));
            }
            _ => return Err(self.error(&format!("unknown identifier `{word}`"))),
        };
        self.pos = end;
        self.expect('(')?;
        let arg = self.expr()?;
        self.expect(')')?;
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        FieldExpr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ev("2", &[]), 2.0);
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("-2 - -3", &[]), 1.0);
        assert_eq!(ev("2·3", &[]), 6.0);
        assert_eq!(ev("1.5e1", &[]), 15.0);
        assert_eq!(ev("2 − 1", &[]), 1.0);
    }

    #[test]
    fn coordinates_and_functions() {
        let v = ev("2 + 0.5*sin(pi*x1)", &[0.5, 0.0]);
        assert!((v - 2.5).abs() < 1e-15);
        assert_eq!(ev("x2", &[1.0, 4.0]), 4.0);
        assert!((ev("exp(x1) + cos(0)", &[1.0]) - (std::f64::consts::E + 1.0)).abs() < 1e-15);
        assert_eq!(FieldExpr::parse("x1 + x3").unwrap().max_coord(), 3);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "2+", "", "sin(1", "foo(1)", "x0", "2 3", "1/2", "tan(x1)", "2^3",
        ] {
            assert!(FieldExpr::parse(bad).is_err(), "{bad}");
        }
        let err = FieldExpr::parse("2+").unwrap_err();
        assert_eq!(err.column, 3);
    }
}
