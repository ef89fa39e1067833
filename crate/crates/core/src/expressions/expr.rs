//! Scalar expressions for integrands, densities and observables.

use std::fmt;
use std::sync::Arc;

use super::ExprError;

/// Unary functions available in the scalar language.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Function {
    Exp,
    Log,
    Sqrt,
    Acos,
    Cos,
    Sin,
    Abs,
}

impl Function {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sqrt" => Self::Sqrt,
            "acos" => Self::Acos,
            "cos" => Self::Cos,
            "sin" => Self::Sin,
            "abs" => Self::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Acos => "acos",
            Self::Cos => "cos",
            Self::Sin => "sin",
            Self::Abs => "abs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Less,
    Greater,
    LessEq,
    GreaterEq,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
            Self::Less => "<",
            Self::Greater => ">",
            Self::LessEq => "<=",
            Self::GreaterEq => ">=",
        }
    }
}

/// Expression tree. Comparisons evaluate to 1 or 0 so indicators can be
/// multiplied into integrands.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Constant(f64),
    Variable(usize),
    Neg(Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Call(Function, Arc<Expr>),
}

/// Slack allowed on `acos` arguments so that cosines computed from unit
/// vectors with rounding error (e.g. `1 + 2^-52`) do not fail.
pub const ACOS_SLACK: f64 = 1e-12;

/// A parsed scalar expression bound to an ordered variable list.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarExpression {
    variables: Vec<String>,
    root: Arc<Expr>,
}

impl ScalarExpression {
    pub fn new(variables: &[String], root: Expr) -> Self {
        Self {
            variables: variables.to_vec(),
            root: Arc::new(root),
        }
    }

    pub fn constant(variables: &[String], value: f64) -> Self {
        Self::new(variables, Expr::Constant(value))
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub(crate) fn root_arc(&self) -> Arc<Expr> {
        Arc::clone(&self.root)
    }

    /// Combines two expressions over the same variables.
    pub fn binary(&self, op: BinaryOp, other: &ScalarExpression) -> Self {
        assert_eq!(self.variables, other.variables);
        Self {
            variables: self.variables.clone(),
            root: Arc::new(Expr::Binary(op, self.root_arc(), other.root_arc())),
        }
    }

    pub fn call(&self, function: Function) -> Self {
        Self {
            variables: self.variables.clone(),
            root: Arc::new(Expr::Call(function, self.root_arc())),
        }
    }

    /// True if the expression is the literal constant `value`.
    pub fn is_constant(&self, value: f64) -> bool {
        matches!(*self.root, Expr::Constant(c) if c == value)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, ExprError> {
        if point.len() != self.variables.len() {
            return Err(ExprError::DimensionMismatch {
                expected: self.variables.len(),
                found: point.len(),
            });
        }
        let value = eval(&self.root, point)?;
        if !value.is_finite() {
            return Err(domain("non-finite result", point));
        }
        Ok(value)
    }
}

fn domain(reason: &str, point: &[f64]) -> ExprError {
    ExprError::Domain {
        reason: reason.to_string(),
        point: point.to_vec(),
    }
}

fn eval(expr: &Expr, point: &[f64]) -> Result<f64, ExprError> {
    Ok(match expr {
        Expr::Constant(c) => *c,
        Expr::Variable(i) => point[*i],
        Expr::Neg(e) => -eval(e, point)?,
        Expr::Binary(op, a, b) => {
            let x = eval(a, point)?;
            let y = eval(b, point)?;
            match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(domain("division by zero", point));
                    }
                    x / y
                }
                BinaryOp::Less => f64::from(u8::from(x < y)),
                BinaryOp::Greater => f64::from(u8::from(x > y)),
                BinaryOp::LessEq => f64::from(u8::from(x <= y)),
                BinaryOp::GreaterEq => f64::from(u8::from(x >= y)),
            }
        }
        Expr::Pow(base, e) => {
            let x = eval(base, point)?;
            if *e < 0 && x == 0.0 {
                return Err(domain("negative power of zero", point));
            }
            x.powi(*e)
        }
        Expr::Call(f, arg) => {
            let x = eval(arg, point)?;
            match f {
                Function::Exp => x.exp(),
                Function::Log => {
                    if x <= 0.0 {
                        return Err(domain("log of non-positive value", point));
                    }
                    x.ln()
                }
                Function::Sqrt => {
                    if x < 0.0 {
                        return Err(domain("sqrt of negative value", point));
                    }
                    x.sqrt()
                }
                Function::Acos => {
                    if !(-1.0 - ACOS_SLACK..=1.0 + ACOS_SLACK).contains(&x) {
                        return Err(domain("acos argument outside [-1, 1]", point));
                    }
                    x.clamp(-1.0, 1.0).acos()
                }
                Function::Cos => x.cos(),
                Function::Sin => x.sin(),
                Function::Abs => x.abs(),
            }
        }
    })
}

struct Printer<'a> {
    expr: &'a Expr,
    variables: &'a [String],
}

impl<'a> fmt::Display for Printer<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &'a Expr| Printer {
            expr: e,
            variables: self.variables,
        };
        match self.expr {
            Expr::Constant(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Variable(i) => write!(f, "{}", self.variables[*i]),
            Expr::Neg(e) => write!(f, "(-{})", sub(e)),
            Expr::Binary(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            Expr::Pow(b, e) => {
                if *e < 0 {
                    write!(f, "{}^({e})", sub(b))
                } else {
                    write!(f, "{}^{e}", sub(b))
                }
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}

/// Fully parenthesized rendering in the input grammar.
impl fmt::Display for ScalarExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            Printer {
                expr: &self.root,
                variables: &self.variables,
            }
        )
    }
}
