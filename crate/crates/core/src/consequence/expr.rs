//! Trigger expressions of consequence rules.
//!
//! Grammar:
//!
//! ```text
//! expr    := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | compare
//! compare := operand (("==" | "!=" | "<" | "<=" | ">" | ">=" | "in") operand)?
//! operand := number | string | "true" | "false" | list | name
//!          | "exists" "(" name ")" | "(" expr ")"
//! list    := "[" (string ("," string)*)? "]"
//! ```
//!
//! Names are dotted paths such as `item.rent` or `pref.children_count`. A name
//! that resolves to nothing makes every comparison involving it false.

use std::fmt;

use thiserror::Error;

use crate::catalog::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Name(String),
    Exists(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    In(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset}")]
pub struct ExprError {
    pub message: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Str(String),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Number(n) => write!(f, "{n}"),
            Token::Str(s) => write!(f, "'{s}'"),
            Token::Ident(s) => f.write_str(s),
            Token::Op(o) => f.write_str(o),
            Token::LParen => f.write_str("("),
            Token::RParen => f.write_str(")"),
            Token::LBracket => f.write_str("["),
            Token::RBracket => f.write_str("]"),
            Token::Comma => f.write_str(","),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |message: String, offset| ExprError { message, offset };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '(' => out.push((start, Token::LParen)),
            ')' => out.push((start, Token::RParen)),
            '[' => out.push((start, Token::LBracket)),
            ']' => out.push((start, Token::RBracket)),
            ',' => out.push((start, Token::Comma)),
            '=' | '!' | '<' | '>' => {
                let two = src.get(i..i + 2).unwrap_or("");
                let op = match two {
                    "==" => "==",
                    "!=" => "!=",
                    "<=" => "<=",
                    ">=" => ">=",
                    _ if c == '<' => "<",
                    _ if c == '>' => ">",
                    _ => return Err(err(format!("unexpected `{c}`"), start)),
                };
                i += op.len();
                out.push((start, Token::Op(op)));
                continue;
            }
            '\'' | '"' => {
                let close = src[i + 1..].find(c).ok_or_else(|| err("unterminated string".into(), start))?;
                out.push((start, Token::Str(src[i + 1..i + 1 + close].to_string())));
                i += close + 2;
                continue;
            }
            c if c.is_ascii_digit() || (c == '-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) => {
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let n = src[start..i].parse().map_err(|_| err(format!("bad number `{}`", &src[start..i]), start))?;
                out.push((start, Token::Number(n)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
                continue;
            }
            other => return Err(err(format!("unexpected `{other}`"), start)),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { message: message.into(), offset: self.offset() })
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Token::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: Token) -> Result<(), ExprError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => self.error(format!("expected `{want}`, found `{t}`")),
            None => self.error(format!("expected `{want}`, found end of input")),
        }
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and()?;
        while self.keyword("or") {
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while self.keyword("and") {
            lhs = Expr::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.keyword("not") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.compare()
    }

    fn compare(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.operand()?;
        let op = match self.peek() {
            Some(Token::Op(op)) => match *op {
                "==" => CmpOp::Eq,
                "!=" => CmpOp::Ne,
                "<" => CmpOp::Lt,
                "<=" => CmpOp::Le,
                ">" => CmpOp::Gt,
                _ => CmpOp::Ge,
            },
            Some(Token::Ident(s)) if s == "in" => {
                self.pos += 1;
                return Ok(Expr::In(Box::new(lhs), Box::new(self.operand()?)));
            }
            _ => return Ok(lhs),
        };
        self.pos += 1;
        Ok(Expr::Compare(op, Box::new(lhs), Box::new(self.operand()?)))
    }

    fn operand(&mut self) -> Result<Expr, ExprError> {
        match self.next() {
            Some(Token::Number(n)) => Ok(Expr::Literal(Value::Number(n))),
            Some(Token::Str(s)) => Ok(Expr::Literal(Value::Text(s))),
            Some(Token::LParen) => {
                let e = self.or()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::LBracket) => {
                let mut items = Vec::new();
                if self.peek() != Some(&Token::RBracket) {
                    loop {
                        match self.next() {
                            Some(Token::Str(s)) => items.push(s),
                            _ => {
                                self.pos -= 1;
                                return self.error("list literals hold strings only");
                            }
                        }
                        if self.peek() == Some(&Token::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Token::RBracket)?;
                Ok(Expr::Literal(Value::Set(items)))
            }
            Some(Token::Ident(word)) => match word.as_str() {
                "true" => Ok(Expr::Literal(Value::Bool(true))),
                "false" => Ok(Expr::Literal(Value::Bool(false))),
                "exists" => {
                    self.expect(Token::LParen)?;
                    let name = match self.next() {
                        Some(Token::Ident(n)) => n,
                        _ => {
                            self.pos -= 1;
                            return self.error("exists() takes a name");
                        }
                    };
                    self.expect(Token::RParen)?;
                    Ok(Expr::Exists(name))
                }
                "and" | "or" | "not" | "in" => {
                    self.pos -= 1;
                    self.error(format!("unexpected keyword `{word}`"))
                }
                _ => Ok(Expr::Name(word)),
            },
            Some(t) => {
                self.pos -= 1;
                self.error(format!("unexpected `{t}`"))
            }
            None => self.error("unexpected end of input"),
        }
    }
}

impl Expr {
    /// Parses an expression. Empty input is the constant `true`.
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Ok(Expr::Literal(Value::Bool(true)));
        }
        let mut p = Parser { tokens, pos: 0, end: src.len() };
        let e = p.or()?;
        if p.pos < p.tokens.len() {
            return p.error(format!("trailing `{}`", p.tokens[p.pos].1));
        }
        Ok(e)
    }

    /// Every name the expression refers to.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Name(n) | Expr::Exists(n) => out.push(n),
            Expr::Not(e) => e.collect_names(out),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Compare(_, a, b) | Expr::In(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
        }
    }

    fn value<F>(&self, lookup: &F) -> Option<Value>
    where
        F: Fn(&str) -> Option<Value>,
    {
        match self {
            Expr::Literal(v) => Some(v.clone()),
            Expr::Name(n) => lookup(n),
            other => Some(Value::Bool(other.eval(lookup))),
        }
    }

    /// Evaluates the expression as a condition.
    pub fn eval<F>(&self, lookup: &F) -> bool
    where
        F: Fn(&str) -> Option<Value>,
    {
        match self {
            Expr::Literal(v) => matches!(v, Value::Bool(true)),
            Expr::Name(n) => matches!(lookup(n), Some(Value::Bool(true))),
            Expr::Exists(n) => lookup(n).is_some(),
            Expr::Not(e) => !e.eval(lookup),
            Expr::And(a, b) => a.eval(lookup) && b.eval(lookup),
            Expr::Or(a, b) => a.eval(lookup) || b.eval(lookup),
            Expr::Compare(op, a, b) => match (a.value(lookup), b.value(lookup)) {
                (Some(x), Some(y)) => compare(*op, &x, &y),
                _ => false,
            },
            Expr::In(a, b) => match (a.value(lookup), b.value(lookup)) {
                (Some(Value::Text(x)), Some(Value::Set(set))) => set.contains(&x),
                (Some(Value::Text(x)), Some(Value::Text(y))) => x == y,
                (Some(Value::Set(xs)), Some(Value::Set(set))) => xs.iter().all(|x| set.contains(x)),
                _ => false,
            },
        }
    }
}

fn compare(op: CmpOp, x: &Value, y: &Value) -> bool {
    match (x, y) {
        (Value::Number(a), Value::Number(b)) => match op {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        },
        (Value::Text(_), Value::Text(_)) | (Value::Bool(_), Value::Bool(_)) | (Value::Set(_), Value::Set(_)) => {
            match op {
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                _ => false,
            }
        }
        _ => false,
    }
}
