use std::collections::BTreeMap;

use super::{BinOp, Func, Node};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            // typographic minus sign, U+2212
            '\u{2212}' => Tok::Op('-'),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ';' => Tok::Semi,
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

pub(crate) struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    dim: usize,
    consts: &'a BTreeMap<String, f64>,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &str, dim: usize, consts: &'a BTreeMap<String, f64>) -> Result<Self> {
        Ok(Parser {
            toks: lex(src)?,
            at: 0,
            dim,
            consts,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    /// `[e1; e2; ...]` or a bare `e1; e2; ...`.
    pub(crate) fn components(&mut self) -> Result<Vec<Node>> {
        let bracketed = *self.peek() == Tok::LBracket;
        if bracketed {
            self.bump();
        }
        let mut comps = vec![self.expr()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            comps.push(self.expr()?);
        }
        if bracketed {
            if *self.peek() != Tok::RBracket {
                return self.fail("expected `]`");
            }
            self.bump();
        }
        if *self.peek() != Tok::End {
            return self.fail("unexpected trailing input");
        }
        Ok(comps)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            // right-associative; the exponent may carry its own sign
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.fail("expected `)`");
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, pos),
            Tok::End => Err(Error::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
            t => Err(Error::Syntax {
                pos,
                msg: format!("unexpected token {t:?}"),
            }),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Node> {
        if let Some(f) = Func::from_name(&name) {
            if *self.peek() != Tok::LParen {
                return self.fail(format!("expected `(` after `{name}`"));
            }
            self.bump();
            let arg = self.expr()?;
            if *self.peek() != Tok::RParen {
                return self.fail("expected `)`");
            }
            self.bump();
            return Ok(Node::Call(f, Box::new(arg)));
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            if idx == 0 || idx > self.dim || name.starts_with("x0") {
                return Err(Error::UnknownIdentifier { name, pos });
            }
            return Ok(Node::Var(idx - 1));
        }
        if let Some(&v) = self.consts.get(&name) {
            return Ok(Node::Const(v));
        }
        match name.as_str() {
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "e" => Ok(Node::Const(std::f64::consts::E)),
            _ => Err(Error::UnknownIdentifier { name, pos }),
        }
    }
}
