//! Coordinate expressions for vector fields.
//!
//! A field over `x1..xn` is written as a bracketed, semicolon-separated list
//! of scalar expressions, e.g. `[1; x1; -x2]`. Supported syntax: numbers,
//! `+ - * / ^` (with `^` right-associative and binding tighter than unary
//! minus), parentheses, the functions `sin cos tan atan exp log sqrt abs`,
//! and the constants `pi` and `e`. Named constants may be injected at parse
//! time (scene parameters use this).
//!
//! Evaluation is generic over [`Scalar`], so the same tree produces values
//! (`f64`) or exact directional derivatives ([`Dual`]).

mod dual;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

pub use dual::{Dual, Scalar};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree node. Variables are zero-based coordinate indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn eval<S: Scalar>(&self, x: &[S]) -> std::result::Result<S, String> {
        Ok(match self {
            Node::Const(v) => S::cst(*v),
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x)?,
            Node::Bin(op, a, b) => {
                let l = a.eval(x)?;
                match op {
                    BinOp::Add => l + b.eval(x)?,
                    BinOp::Sub => l - b.eval(x)?,
                    BinOp::Mul => l * b.eval(x)?,
                    BinOp::Div => {
                        let r = b.eval(x)?;
                        if r.value() == 0.0 {
                            return Err("division by zero".into());
                        }
                        l / r
                    }
                    BinOp::Pow => {
                        if let Some(k) = b.literal() {
                            if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 {
                                if k < 0.0 && l.value() == 0.0 {
                                    return Err("zero raised to a negative power".into());
                                }
                                return Ok(l.powi(k as i32));
                            }
                        }
                        let r = b.eval(x)?;
                        if l.value() < 0.0 {
                            return Err("negative base with non-integer exponent".into());
                        }
                        l.powf(r)
                    }
                }
            }
            Node::Call(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.tan(),
                    Func::Atan => v.atan(),
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v.value() <= 0.0 {
                            return Err(format!("log of non-positive value {}", v.value()));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v.value() < 0.0 {
                            return Err(format!("sqrt of negative value {}", v.value()));
                        }
                        v.sqrt()
                    }
                    Func::Abs => v.abs(),
                }
            }
        })
    }

    /// Numeric literal, possibly negated.
    fn literal(&self) -> Option<f64> {
        match self {
            Node::Const(v) => Some(*v),
            Node::Neg(a) => a.literal().map(|v| -v),
            _ => None,
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Call(_, a) => a.max_var(),
            Node::Bin(_, a, b) => a.max_var().max(b.max_var()),
        }
    }
}

impl fmt::Display for Node {
    /// Canonical, fully parenthesized form; parses back to an identical tree
    /// up to the sign folding of negative constants.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
            Node::Const(v) => write!(f, "{v:?}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => {
                let o = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {o} {b})")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

fn no_consts() -> &'static BTreeMap<String, f64> {
    static EMPTY: std::sync::OnceLock<BTreeMap<String, f64>> = std::sync::OnceLock::new();
    EMPTY.get_or_init(BTreeMap::new)
}

/// A vector field on an `dim`-dimensional coordinate chart.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    dim: usize,
    components: Vec<Node>,
}

/// Parse a field with `dim` components over `x1..xdim`.
pub fn parse_field(source: &str, dim: usize) -> Result<FieldExpr> {
    FieldExpr::parse_with(source, dim, no_consts())
}

impl FieldExpr {
    /// Like [`parse_field`], resolving extra named constants.
    pub fn parse_with(source: &str, dim: usize, consts: &BTreeMap<String, f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension {
                expected: 1,
                found: 0,
            });
        }
        let components = parser::Parser::new(source, dim, consts)?.components()?;
        if components.len() != dim {
            return Err(Error::ComponentCount {
                expected: dim,
                found: components.len(),
            });
        }
        debug_assert!(components.iter().all(|c| c.max_var().is_none_or(|i| i < dim)));
        Ok(FieldExpr { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Node] {
        &self.components
    }

    fn check_point(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }

    /// Evaluate over any scalar type.
    pub fn eval_generic<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        self.check_point(p.len())?;
        self.components
            .iter()
            .enumerate()
            .map(|(component, c)| c.eval(p).map_err(|msg| Error::Domain { component, msg }))
            .collect()
    }

    pub fn eval(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.eval_generic(p)?))
    }

    /// Value and directional derivative `Df(p)·v` in one forward pass.
    pub fn jvp(&self, p: &[f64], v: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_point(v.len())?;
        let seeded: Vec<Dual> = p.iter().zip(v).map(|(&a, &b)| Dual::new(a, b)).collect();
        let out = self.eval_generic(&seeded)?;
        Ok((
            DVector::from_iterator(self.dim, out.iter().map(|d| d.v)),
            DVector::from_iterator(self.dim, out.iter().map(|d| d.d)),
        ))
    }

    /// `J[i][j] = ∂f_i/∂x_j`, one dual pass per coordinate.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p.len())?;
        let n = self.dim;
        let mut jac = DMatrix::zeros(n, n);
        let mut seeded: Vec<Dual> = p.iter().map(|&a| Dual::cst(a)).collect();
        for j in 0..n {
            seeded[j].d = 1.0;
            let out = self.eval_generic(&seeded)?;
            for (i, d) in out.iter().enumerate() {
                jac[(i, j)] = d.d;
            }
            seeded[j].d = 0.0;
        }
        Ok(jac)
    }

    /// Canonical text that [`parse_field`] reads back.
    pub fn render(&self) -> String {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        format!("[{}]", parts.join("; "))
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A single scalar function of the `dim` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    dim: usize,
    node: Node,
}

impl ScalarExpr {
    pub fn parse_with(source: &str, dim: usize, consts: &BTreeMap<String, f64>) -> Result<Self> {
        let mut comps = parser::Parser::new(source, dim, consts)?.components()?;
        if comps.len() != 1 {
            return Err(Error::ComponentCount {
                expected: 1,
                found: comps.len(),
            });
        }
        Ok(ScalarExpr {
            dim,
            node: comps.remove(0),
        })
    }

    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        Self::parse_with(source, dim, no_consts())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_generic<S: Scalar>(&self, p: &[S]) -> Result<S> {
        if p.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: p.len(),
            });
        }
        self.node
            .eval(p)
            .map_err(|msg| Error::Domain { component: 0, msg })
    }

    pub fn render(&self) -> String {
        self.node.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bracketed_list() {
        let f = parse_field("[1; x1; -x2]", 3).unwrap();
        assert_eq!(f.dim(), 3);
        assert_eq!(f.eval(&[0.0, 2.0, 3.0]).unwrap().as_slice(), &[1.0, 0.0, -2.0]);
    }

    #[test]
    fn bare_list_and_whitespace() {
        let a = parse_field("sin(x1)*x2;exp(-x1)", 2).unwrap();
        let b = parse_field("[ sin ( x1 ) * x2 ;  exp( - x1 ) ]", 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.eval(&[0.0, 5.0]).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn trailing_operator_is_a_syntax_error() {
        match parse_field("[x1 +]", 1) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_component_count() {
        assert_eq!(
            parse_field("[x1; x2]", 3),
            Err(Error::ComponentCount {
                expected: 3,
                found: 2
            })
        );
    }

    #[test]
    fn unknown_identifiers() {
        assert!(matches!(
            parse_field("[x4]", 3),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_field("[y1]", 1),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_field("[x0]", 1),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_field("[sinh(x1)]", 1),
            Err(Error::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse_field("[-x1^2; 2^3^2; 1 - 2 - 3; 8/4/2; x1^-1]", 5).unwrap();
        let v = f.eval(&[3.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.as_slice(), &[-9.0, 512.0, -4.0, 1.0, 1.0 / 3.0]);
    }

    #[test]
    fn substitution_examples() {
        let f = parse_field("[1; x2; -x3]", 3).unwrap();
        assert_eq!(f.eval(&[0.0, 2.0, 3.0]).unwrap().as_slice(), &[1.0, 2.0, -3.0]);
        let g = parse_field("[x1^2 + x2^2]", 2).unwrap_err();
        assert!(matches!(g, Error::ComponentCount { .. }));
        let g = parse_field("[x1^2 + x2^2; 0]", 2).unwrap();
        assert_eq!(g.eval(&[3.0, 4.0]).unwrap()[0], 25.0);
    }

    #[test]
    fn domain_errors_name_the_component() {
        let f = parse_field("[x1/x2; 1]", 2).unwrap();
        assert!(matches!(
            f.eval(&[1.0, 0.0]),
            Err(Error::Domain { component: 0, .. })
        ));
        let f = parse_field("[1; log(x1)]", 2).unwrap();
        assert!(matches!(
            f.eval(&[-1.0, 0.0]),
            Err(Error::Domain { component: 1, .. })
        ));
        let f = parse_field("[sqrt(x1)]", 1).unwrap();
        assert!(f.eval(&[-1.0]).is_err());
        let f = parse_field("[x1^0.5]", 1).unwrap();
        assert!(f.eval(&[-1.0]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let f = parse_field("[x1+x2; x1-x2]", 2).unwrap();
        let j = f.jacobian(&[0.3, -7.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]));
        let f = parse_field("[sin(x1)]", 1).unwrap();
        assert_eq!(f.jacobian(&[0.0]).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn named_constants() {
        let mut c = BTreeMap::new();
        c.insert("delta".to_string(), -1.25);
        let f = FieldExpr::parse_with("[delta*x1; pi]", 2, &c).unwrap();
        let v = f.eval(&[2.0, 0.0]).unwrap();
        assert_eq!(v[0], -2.5);
        assert_eq!(v[1], std::f64::consts::PI);
        let back = parse_field(&f.render(), 2).unwrap();
        assert_eq!(back.eval(&[2.0, 0.0]).unwrap(), v);
    }

    #[test]
    fn unicode_minus() {
        let f = parse_field("[x1 \u{2212} x2; 0]", 2).unwrap();
        assert_eq!(f.eval(&[1.0, 3.0]).unwrap()[0], -2.0);
    }

    #[test]
    fn scientific_literals() {
        let f = parse_field("[1e-3*x1; 2.5E2]", 2).unwrap();
        let v = f.eval(&[2.0, 0.0]).unwrap();
        assert_eq!(v.as_slice(), &[2e-3, 250.0]);
    }
}
