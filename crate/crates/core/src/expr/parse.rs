//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := factor (('*'|'/') factor)*
//! factor  := '-' factor | power
//! power   := primary ('^' factor)?          // right-associative
//! primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use super::{eval_node, Func, Node};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => return self.ident(start),
            other => {
                return Err(Error::Syntax {
                    offset: start,
                    expected: format!("a token, found `{}`", other as char),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let mut end = self.pos;
        while end < self.src.len() && (self.src[end].is_ascii_digit() || self.src[end] == b'.') {
            end += 1;
        }
        if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
            let mut e = end + 1;
            if e < self.src.len() && (self.src[e] == b'+' || self.src[e] == b'-') {
                e += 1;
            }
            if e < self.src.len() && self.src[e].is_ascii_digit() {
                end = e;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..end]).expect("ascii slice");
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: format!("a numeric literal, found `{text}`"),
        })?;
        self.pos = end;
        Ok((Tok::Num(value), start))
    }

    fn ident(&mut self, start: usize) -> Result<(Tok, usize)> {
        let mut end = self.pos;
        while end < self.src.len()
            && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
        {
            end += 1;
        }
        let text = std::str::from_utf8(&self.src[start..end]).expect("ascii slice");
        self.pos = end;
        Ok((Tok::Ident(text.to_string()), start))
    }
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    cursor: usize,
    vars: &'a [String],
}

pub(super) fn parse(source: &str, vars: &[String]) -> Result<Node> {
    let mut lexer = Lexer::new(source);
    let mut tokens = Vec::new();
    loop {
        let (tok, off) = lexer.next()?;
        let done = tok == Tok::Eof;
        tokens.push((tok, off));
        if done {
            break;
        }
    }
    let mut parser = Parser {
        tokens,
        cursor: 0,
        vars,
    };
    let node = parser.expr()?;
    let (tok, off) = parser.peek();
    if *tok != Tok::Eof {
        return Err(Error::Syntax {
            offset: off,
            expected: "end of input".to_string(),
        });
    }
    Ok(node)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> (&Tok, usize) {
        let (tok, off) = &self.tokens[self.cursor];
        (tok, *off)
    }

    fn bump(&mut self) -> (Tok, usize) {
        let item = self.tokens[self.cursor].clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        item
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        if *self.peek().0 == Tok::Minus {
            self.bump();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if *self.peek().0 == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek().0 == Tok::LParen {
                    self.bump();
                    self.call(name, off)
                } else if let Some(idx) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(idx))
                } else {
                    Err(Error::UnknownVariable { name, offset: off })
                }
            }
            _ => Err(Error::Syntax {
                offset: off,
                expected: "a number, variable, function call or `(`".to_string(),
            }),
        }
    }

    fn call(&mut self, name: String, off: usize) -> Result<Node> {
        let mut args = vec![self.expr()?];
        while *self.peek().0 == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect_rparen()?;

        if name == "spow" {
            if args.len() != 2 {
                return Err(Error::Arity {
                    name,
                    expected: 2,
                    found: args.len(),
                    offset: off,
                });
            }
            let exponent = args.pop().expect("arity checked");
            let base = args.pop().expect("arity checked");
            if !super::node_is_constant(&exponent) {
                return Err(Error::NonConstantExponent { offset: off });
            }
            let c = eval_node(&exponent, &[]).map_err(|_| Error::NonConstantExponent { offset: off })?;
            return Ok(Node::SPow(Box::new(base), c));
        }

        match Func::from_name(&name) {
            Some(func) => {
                if args.len() != 1 {
                    return Err(Error::Arity {
                        name,
                        expected: 1,
                        found: args.len(),
                        offset: off,
                    });
                }
                Ok(Node::Func(func, Box::new(args.pop().expect("arity checked"))))
            }
            None => Err(Error::UnknownFunction { name, offset: off }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let (tok, off) = self.bump();
        if tok == Tok::RParen {
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: off,
                expected: "`)`".to_string(),
            })
        }
    }
}
