//! Closed-form expressions: parsing, evaluation, symbolic differentiation.
//!
//! Expressions carry the metric entries, vector-field components, simple
//! equations and integrands used everywhere else. The grammar is plain
//! infix (`^` right-associative) over the functions `sin cos exp log sqrt
//! abs sgn` plus the two-argument signed power `spow(e, c)` with a constant
//! exponent.
//!
//! Differentiation is symbolic so that Christoffel symbols and determinant
//! derivatives stay exact away from the singular set; finite differences
//! are kept for cross-checks only. Derivatives of `abs`, `sgn` and `spow`
//! are valid away from zeros of their argument, and evaluating such a
//! derivative at the zero raises [`Error::Domain`] instead of returning a
//! subgradient. Printing those derivative nodes falls back to the soft
//! `sgn`/`abs(..)^q` spellings, so a print/reparse round trip of a
//! derivative loses the strict-at-zero behaviour (parsed expressions round
//! trip exactly).

mod deriv;
mod parse;

use std::fmt;

use crate::error::{Error, Result};
use crate::signed_power::spow;

/// Unary functions available in the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sgn,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sgn" => Func::Sgn,
            _ => return None,
        })
    }
}

/// Expression tree. Variables are indices into the owning
/// [`Expression`]'s declared variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Func(Func, Box<Node>),
    /// Signed power with constant exponent: eps(e)|e|^c.
    SPow(Box<Node>, f64),
    /// |e|^q. Produced by differentiation; errors at e = 0 unless q > 0.
    AbsPow(Box<Node>, f64),
    /// Sign of e, undefined at e = 0. Produced by differentiation.
    StrictSgn(Box<Node>),
}

/// A parsed expression together with its declared variable list.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    vars: Vec<String>,
    root: Node,
}

impl Expression {
    /// Parse `source` against the declared `variables` (bound by position
    /// at evaluation time).
    pub fn parse(source: &str, variables: &[&str]) -> Result<Expression> {
        let vars: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        let root = parse::parse(source, &vars)?;
        Ok(Expression { vars, root })
    }

    /// A constant expression over the given variable list.
    pub fn constant(value: f64, variables: &[&str]) -> Expression {
        Expression {
            vars: variables.iter().map(|s| s.to_string()).collect(),
            root: Node::Num(value),
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub(crate) fn from_parts(vars: Vec<String>, root: Node) -> Expression {
        Expression { vars, root }
    }

    /// Evaluate with `env` binding the declared variables by position.
    pub fn eval(&self, env: &[f64]) -> Result<f64> {
        if env.len() < self.vars.len() {
            return Err(Error::MissingBinding {
                name: self.vars[env.len()].clone(),
            });
        }
        eval_node(&self.root, env)
    }

    /// Exact symbolic partial derivative with respect to the named variable.
    ///
    /// A name absent from the variable list yields the zero expression.
    pub fn differentiate(&self, var: &str) -> Expression {
        let root = match self.vars.iter().position(|v| v == var) {
            Some(idx) => deriv::differentiate(&self.root, idx),
            None => Node::Num(0.0),
        };
        Expression {
            vars: self.vars.clone(),
            root,
        }
    }

    /// Replace every variable `i` with `replacement[i]`, producing an
    /// expression over `new_vars`. Used for symbolic pullbacks.
    pub fn substitute(&self, new_vars: &[&str], replacements: &[Node]) -> Result<Expression> {
        if replacements.len() != self.vars.len() {
            return Err(Error::Dimension {
                expected: self.vars.len(),
                found: replacements.len(),
            });
        }
        let root = substitute_node(&self.root, replacements);
        Ok(Expression {
            vars: new_vars.iter().map(|s| s.to_string()).collect(),
            root,
        })
    }

    /// True when no variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        node_is_constant(&self.root)
    }

    /// Sum of two expressions over the same variable list.
    pub fn checked_add(&self, other: &Expression) -> Result<Expression> {
        self.combine(other, |a, b| Node::Add(Box::new(a), Box::new(b)))
    }

    /// Product of two expressions over the same variable list.
    pub fn checked_mul(&self, other: &Expression) -> Result<Expression> {
        self.combine(other, |a, b| Node::Mul(Box::new(a), Box::new(b)))
    }

    fn combine(
        &self,
        other: &Expression,
        op: impl FnOnce(Node, Node) -> Node,
    ) -> Result<Expression> {
        if self.vars != other.vars {
            return Err(Error::Dimension {
                expected: self.vars.len(),
                found: other.vars.len(),
            });
        }
        Ok(Expression {
            vars: self.vars.clone(),
            root: op(self.root.clone(), other.root.clone()),
        })
    }
}

fn eval_node(node: &Node, env: &[f64]) -> Result<f64> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(i) => env[*i],
        Node::Neg(a) => -eval_node(a, env)?,
        Node::Add(a, b) => eval_node(a, env)? + eval_node(b, env)?,
        Node::Sub(a, b) => eval_node(a, env)? - eval_node(b, env)?,
        Node::Mul(a, b) => eval_node(a, env)? * eval_node(b, env)?,
        Node::Div(a, b) => eval_node(a, env)? / eval_node(b, env)?,
        Node::Pow(a, b) => eval_node(a, env)?.powf(eval_node(b, env)?),
        Node::Func(f, a) => {
            let x = eval_node(a, env)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(Error::Domain {
                            what: format!("log({x})"),
                        });
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(Error::Domain {
                            what: format!("sqrt({x})"),
                        });
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
                Func::Sgn => {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
            }
        }
        Node::SPow(a, c) => spow(eval_node(a, env)?, *c)?,
        Node::AbsPow(a, q) => {
            let x = eval_node(a, env)?.abs();
            if *q == 0.0 {
                1.0
            } else if x == 0.0 {
                if *q > 0.0 {
                    0.0
                } else {
                    return Err(Error::Domain {
                        what: format!("|0|^{q} inside a derivative"),
                    });
                }
            } else {
                x.powf(*q)
            }
        }
        Node::StrictSgn(a) => {
            let x = eval_node(a, env)?;
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                return Err(Error::Domain {
                    what: "sgn at zero inside a derivative".to_string(),
                });
            }
        }
    })
}

fn substitute_node(node: &Node, repl: &[Node]) -> Node {
    match node {
        Node::Num(v) => Node::Num(*v),
        Node::Var(i) => repl[*i].clone(),
        Node::Neg(a) => Node::Neg(Box::new(substitute_node(a, repl))),
        Node::Add(a, b) => Node::Add(
            Box::new(substitute_node(a, repl)),
            Box::new(substitute_node(b, repl)),
        ),
        Node::Sub(a, b) => Node::Sub(
            Box::new(substitute_node(a, repl)),
            Box::new(substitute_node(b, repl)),
        ),
        Node::Mul(a, b) => Node::Mul(
            Box::new(substitute_node(a, repl)),
            Box::new(substitute_node(b, repl)),
        ),
        Node::Div(a, b) => Node::Div(
            Box::new(substitute_node(a, repl)),
            Box::new(substitute_node(b, repl)),
        ),
        Node::Pow(a, b) => Node::Pow(
            Box::new(substitute_node(a, repl)),
            Box::new(substitute_node(b, repl)),
        ),
        Node::Func(f, a) => Node::Func(*f, Box::new(substitute_node(a, repl))),
        Node::SPow(a, c) => Node::SPow(Box::new(substitute_node(a, repl)), *c),
        Node::AbsPow(a, q) => Node::AbsPow(Box::new(substitute_node(a, repl)), *q),
        Node::StrictSgn(a) => Node::StrictSgn(Box::new(substitute_node(a, repl))),
    }
}

fn node_is_constant(node: &Node) -> bool {
    match node {
        Node::Num(_) => true,
        Node::Var(_) => false,
        Node::Neg(a) | Node::Func(_, a) | Node::SPow(a, _) | Node::AbsPow(a, _) | Node::StrictSgn(a) => {
            node_is_constant(a)
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            node_is_constant(a) && node_is_constant(b)
        }
    }
}

// Precedence levels for printing: additive 1, multiplicative 2, unary 3,
// power 4, atoms 5.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) | Node::AbsPow(..) => 4,
        Node::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, node: &Node, vars: &[String], min_prec: u8) -> fmt::Result {
    if precedence(node) < min_prec {
        write!(f, "(")?;
        write_node(f, node, vars)?;
        write!(f, ")")
    } else {
        write_node(f, node, vars)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, vars: &[String]) -> fmt::Result {
    match node {
        Node::Num(v) => write!(f, "{v}"),
        Node::Var(i) => write!(f, "{}", vars[*i]),
        Node::Neg(a) => {
            write!(f, "-")?;
            write_operand(f, a, vars, 3)
        }
        Node::Add(a, b) => {
            write_operand(f, a, vars, 1)?;
            write!(f, " + ")?;
            write_operand(f, b, vars, 2)
        }
        Node::Sub(a, b) => {
            write_operand(f, a, vars, 1)?;
            write!(f, " - ")?;
            write_operand(f, b, vars, 2)
        }
        Node::Mul(a, b) => {
            write_operand(f, a, vars, 2)?;
            write!(f, " * ")?;
            write_operand(f, b, vars, 3)
        }
        Node::Div(a, b) => {
            write_operand(f, a, vars, 2)?;
            write!(f, " / ")?;
            write_operand(f, b, vars, 3)
        }
        Node::Pow(a, b) => {
            write_operand(f, a, vars, 5)?;
            write!(f, "^")?;
            write_operand(f, b, vars, 4)
        }
        Node::Func(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, vars)?;
            write!(f, ")")
        }
        Node::SPow(a, c) => {
            write!(f, "spow(")?;
            write_node(f, a, vars)?;
            write!(f, ", {c})")
        }
        Node::AbsPow(a, q) => {
            write!(f, "abs(")?;
            write_node(f, a, vars)?;
            write!(f, ")^")?;
            if *q < 0.0 {
                write!(f, "({q})")
            } else {
                write!(f, "{q}")
            }
        }
        Node::StrictSgn(a) => {
            write!(f, "sgn(")?;
            write_node(f, a, vars)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.vars)
    }
}
