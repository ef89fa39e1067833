//! Recursive-descent parser shared by the polynomial and scalar languages.
//!
//! Grammar (whitespace insignificant, explicit `*` required):
//!
//! ```text
//! comparison := sum (("<" | ">" | "<=" | ">=") sum)?
//! sum        := product (("+" | "-") product)*
//! product    := unary (("*" | "/") unary)*
//! unary      := ("-" | "+") unary | power
//! power      := primary ("^" exponent)?
//! exponent   := integer | "-" integer | "(" "-"? integer ")"
//! primary    := number | identifier | function "(" comparison ")" | "(" comparison ")"
//! ```
//!
//! Polynomial mode rejects function calls, comparisons, negative exponents and
//! division by anything but a nonzero constant.

use std::collections::HashMap;
use std::sync::Arc;

use super::expr::{BinaryOp, Expr, Function, ScalarExpression};
use super::polynomial::Polynomial;
use super::ExprError;

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number { value: f64, integer: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Less,
    Greater,
    LessEq,
    GreaterEq,
    End,
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<(Token, Pos)>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut column) = (1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column };
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        let start = i;
        let token = if c.is_ascii_digit() || c == '.' {
            let mut integer = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                integer = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integer = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value = literal.parse::<f64>().map_err(|_| ExprError::Syntax {
                line,
                column,
                message: format!("malformed number `{literal}`"),
            })?;
            Token::Number { value, integer }
        } else if c.is_ascii_alphabetic() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Token::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' => Token::Plus,
                '-' => Token::Minus,
                '*' => Token::Star,
                '/' => Token::Slash,
                '^' => Token::Caret,
                '(' => Token::LParen,
                ')' => Token::RParen,
                '<' | '>' => {
                    let eq = i < chars.len() && chars[i] == '=';
                    if eq {
                        i += 1;
                    }
                    match (c, eq) {
                        ('<', false) => Token::Less,
                        ('<', true) => Token::LessEq,
                        ('>', false) => Token::Greater,
                        _ => Token::GreaterEq,
                    }
                }
                other => {
                    return Err(ExprError::Syntax {
                        line,
                        column,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        };
        column += i - start;
        out.push((token, pos));
    }
    out.push((Token::End, Pos { line, column }));
    Ok(out)
}

/// Named scalar definitions that may be referenced by identifier.
pub type Definitions = HashMap<String, ScalarExpression>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Polynomial,
    Scalar,
}

struct Parser<'a> {
    tokens: Vec<(Token, Pos)>,
    index: usize,
    variables: &'a [String],
    definitions: Option<&'a Definitions>,
    mode: Mode,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.index].0
    }

    fn pos(&self) -> Pos {
        self.tokens[self.index].1
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.index].0.clone();
        if self.index + 1 < self.tokens.len() {
            self.index += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        let pos = self.pos();
        ExprError::Syntax {
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<(), ExprError> {
        if *self.peek() == token {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn parse_all(&mut self) -> Result<Expr, ExprError> {
        let e = self.comparison()?;
        if *self.peek() != Token::End {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(e)
    }

    fn comparison(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Token::Less => BinaryOp::Less,
            Token::Greater => BinaryOp::Greater,
            Token::LessEq => BinaryOp::LessEq,
            Token::GreaterEq => BinaryOp::GreaterEq,
            _ => return Ok(lhs),
        };
        if self.mode == Mode::Polynomial {
            return Err(self.error("comparisons are not allowed in polynomials"));
        }
        self.advance();
        let rhs = self.sum()?;
        Ok(Expr::Binary(op, Arc::new(lhs), Arc::new(rhs)))
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Arc::new(lhs), Arc::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                Token::Number { .. } | Token::Ident(_) | Token::LParen => {
                    return Err(self.error("implicit multiplication is not allowed; use `*`"))
                }
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Arc::new(lhs), Arc::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Token::Minus => {
                self.advance();
                Ok(Expr::Neg(Arc::new(self.unary()?)))
            }
            Token::Plus => {
                self.advance();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Token::Caret {
            return Ok(base);
        }
        self.advance();
        let exponent = self.exponent()?;
        Ok(Expr::Pow(Arc::new(base), exponent))
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let parenthesized = *self.peek() == Token::LParen;
        if parenthesized {
            self.advance();
        }
        let negative = *self.peek() == Token::Minus;
        if negative {
            self.advance();
        }
        let pos = self.pos();
        let value = match self.advance() {
            Token::Number { value, integer } => {
                if !integer || value.fract() != 0.0 {
                    return Err(ExprError::BadExponent {
                        line: pos.line,
                        column: pos.column,
                        message: format!("exponent {value} is not an integer"),
                    });
                }
                if value > f64::from(i32::MAX) {
                    return Err(ExprError::BadExponent {
                        line: pos.line,
                        column: pos.column,
                        message: "exponent too large".into(),
                    });
                }
                value as i32
            }
            _ => {
                return Err(ExprError::BadExponent {
                    line: pos.line,
                    column: pos.column,
                    message: "exponent must be an integer literal".into(),
                })
            }
        };
        if parenthesized {
            self.expect(Token::RParen, "`)`")?;
        }
        if negative && self.mode == Mode::Polynomial {
            return Err(ExprError::BadExponent {
                line: pos.line,
                column: pos.column,
                message: "negative exponents are not allowed in polynomials".into(),
            });
        }
        Ok(if negative { -value } else { value })
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let pos = self.pos();
        match self.advance() {
            Token::Number { value, .. } => Ok(Expr::Constant(value)),
            Token::LParen => {
                let e = self.comparison()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let Some(function) = Function::from_name(&name) else {
                        return Err(ExprError::UnknownFunction {
                            name,
                            line: pos.line,
                            column: pos.column,
                        });
                    };
                    if self.mode == Mode::Polynomial {
                        return Err(ExprError::Syntax {
                            line: pos.line,
                            column: pos.column,
                            message: format!("function `{name}` is not allowed in polynomials"),
                        });
                    }
                    self.advance();
                    let arg = self.comparison()?;
                    self.expect(Token::RParen, "`)`")?;
                    return Ok(Expr::Call(function, Arc::new(arg)));
                }
                if let Some(i) = self.variables.iter().position(|v| *v == name) {
                    return Ok(Expr::Variable(i));
                }
                if let Some(def) = self.definitions.and_then(|d| d.get(&name)) {
                    return Ok(def.root().clone());
                }
                if name == "pi" && self.mode == Mode::Scalar {
                    return Ok(Expr::Constant(std::f64::consts::PI));
                }
                Err(ExprError::UnknownIdentifier {
                    name,
                    line: pos.line,
                    column: pos.column,
                })
            }
            Token::End => Err(ExprError::Syntax {
                line: pos.line,
                column: pos.column,
                message: "unexpected end of input".into(),
            }),
            other => Err(ExprError::Syntax {
                line: pos.line,
                column: pos.column,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

fn check_variables(variables: &[String]) -> Result<(), ExprError> {
    if variables.is_empty() {
        return Err(ExprError::NoVariables);
    }
    for (i, v) in variables.iter().enumerate() {
        let valid = v.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(ExprError::InvalidVariableName(v.clone()));
        }
        if variables[..i].contains(v) {
            return Err(ExprError::DuplicateVariable(v.clone()));
        }
    }
    Ok(())
}

/// Parses a polynomial over the given ordered variables.
pub fn parse_polynomial(text: &str, variables: &[String]) -> Result<Polynomial, ExprError> {
    check_variables(variables)?;
    let mut parser = Parser {
        tokens: tokenize(text)?,
        index: 0,
        variables,
        definitions: None,
        mode: Mode::Polynomial,
    };
    let expr = parser.parse_all()?;
    to_polynomial(&expr, variables)
}

/// Parses a scalar expression over the given ordered variables.
pub fn parse_scalar_expression(
    text: &str,
    variables: &[String],
) -> Result<ScalarExpression, ExprError> {
    parse_scalar_expression_with(text, variables, &Definitions::new())
}

/// Like [`parse_scalar_expression`], resolving extra identifiers against
/// previously parsed named definitions (inlined at parse time).
pub fn parse_scalar_expression_with(
    text: &str,
    variables: &[String],
    definitions: &Definitions,
) -> Result<ScalarExpression, ExprError> {
    check_variables(variables)?;
    for d in definitions.values() {
        if d.variables() != variables {
            return Err(ExprError::VariableMismatch);
        }
    }
    let mut parser = Parser {
        tokens: tokenize(text)?,
        index: 0,
        variables,
        definitions: Some(definitions),
        mode: Mode::Scalar,
    };
    let expr = parser.parse_all()?;
    Ok(ScalarExpression::new(variables, expr))
}

fn to_polynomial(expr: &Expr, variables: &[String]) -> Result<Polynomial, ExprError> {
    Ok(match expr {
        Expr::Constant(c) => Polynomial::constant(variables, *c),
        Expr::Variable(i) => Polynomial::variable(variables, *i),
        Expr::Neg(e) => -&to_polynomial(e, variables)?,
        Expr::Binary(op, a, b) => {
            let pa = to_polynomial(a, variables)?;
            let pb = to_polynomial(b, variables)?;
            match op {
                BinaryOp::Add => &pa + &pb,
                BinaryOp::Sub => &pa - &pb,
                BinaryOp::Mul => &pa * &pb,
                BinaryOp::Div => {
                    if !pb.is_constant() || pb.is_zero() {
                        return Err(ExprError::NotPolynomial(
                            "division by a non-constant or zero expression".into(),
                        ));
                    }
                    pa.scale(1.0 / pb.constant_term())
                }
                _ => return Err(ExprError::NotPolynomial("comparison".into())),
            }
        }
        Expr::Pow(base, e) => {
            if *e < 0 {
                return Err(ExprError::NotPolynomial("negative exponent".into()));
            }
            to_polynomial(base, variables)?.pow(*e as u32)
        }
        Expr::Call(f, _) => {
            return Err(ExprError::NotPolynomial(format!("function `{}`", f.name())))
        }
    })
}
