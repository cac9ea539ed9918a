//! Tiny arithmetic expression parser for generalized-mode normal
//! definitions, e.g. "cos((pi/5)*(y - 2.2))".
//!
//! Grammar: expr = term (('+'|'-') term)*; term = factor (('*'|'/') factor)*;
//! factor = number | x | y | z | pi | '(' expr ')' | fn '(' expr ')' | '-' factor.

use std::fmt;

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Fn1(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy)]
pub enum Func {
    Cos,
    Sin,
    Sqrt,
    Exp,
    Abs,
}

#[derive(Debug)]
pub struct ExprError {
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expression error at column {}: {}", self.pos + 1, self.message)
    }
}

impl std::error::Error for ExprError {}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            chars: text.chars().collect(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(ExprError {
                pos: p.pos,
                message: format!("unexpected trailing input {:?}", p.rest()),
            });
        }
        Ok(e)
    }

    pub fn eval(&self, point: [f64; 3]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Coord(d) => point[*d],
            Expr::Add(a, b) => a.eval(point) + b.eval(point),
            Expr::Sub(a, b) => a.eval(point) - b.eval(point),
            Expr::Mul(a, b) => a.eval(point) * b.eval(point),
            Expr::Div(a, b) => a.eval(point) / b.eval(point),
            Expr::Neg(a) => -a.eval(point),
            Expr::Fn1(f, a) => {
                let v = a.eval(point);
                match f {
                    Func::Cos => v.cos(),
                    Func::Sin => v.sin(),
                    Func::Sqrt => v.sqrt(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some('-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some('/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(ExprError {
                        pos: self.pos,
                        message: "expected ')'".into(),
                    });
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            other => Err(ExprError {
                pos: self.pos,
                message: format!("unexpected input {other:?}"),
            }),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_ascii_digit() || c == '.' {
                self.pos += 1;
            } else if (c == 'e' || c == 'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.chars.get(self.pos), Some('+') | Some('-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse()
            .map(Expr::Num)
            .map_err(|_| ExprError {
                pos: start,
                message: format!("invalid number {s:?}"),
            })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        match name.as_str() {
            "x" => Ok(Expr::Coord(0)),
            "y" => Ok(Expr::Coord(1)),
            "z" => Ok(Expr::Coord(2)),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "cos" | "sin" | "sqrt" | "exp" | "abs" => {
                if self.peek() != Some('(') {
                    return Err(ExprError {
                        pos: self.pos,
                        message: format!("{name} needs parenthesized argument"),
                    });
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(ExprError {
                        pos: self.pos,
                        message: "expected ')'".into(),
                    });
                }
                self.pos += 1;
                let f = match name.as_str() {
                    "cos" => Func::Cos,
                    "sin" => Func::Sin,
                    "sqrt" => Func::Sqrt,
                    "exp" => Func::Exp,
                    _ => Func::Abs,
                };
                Ok(Expr::Fn1(f, Box::new(arg)))
            }
            other => Err(ExprError {
                pos: start,
                message: format!("unknown identifier {other:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_coords() {
        assert_eq!(Expr::parse("1").unwrap().eval([0.0; 3]), 1.0);
        assert_eq!(Expr::parse("x + 2*y - z").unwrap().eval([1.0, 2.0, 3.0]), 2.0);
        assert!((Expr::parse("pi").unwrap().eval([0.0; 3]) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn sloshing_mode_shape() {
        let e = Expr::parse("cos((pi/5)*(y - 2.2))").unwrap();
        let v = e.eval([0.0, 2.2, 0.0]);
        assert!((v - 1.0).abs() < 1e-15);
        let v = e.eval([0.0, 2.2 + 2.5, 0.0]);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn precedence_and_negation() {
        assert_eq!(Expr::parse("2+3*4").unwrap().eval([0.0; 3]), 14.0);
        assert_eq!(Expr::parse("-(2+1)/3").unwrap().eval([0.0; 3]), -1.0);
        assert_eq!(Expr::parse("1e-2 * 100").unwrap().eval([0.0; 3]), 1.0);
    }

    #[test]
    fn errors_carry_position() {
        assert!(Expr::parse("2 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("1 2").is_err());
    }
}
