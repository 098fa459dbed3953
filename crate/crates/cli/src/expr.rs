//! Infix ring expressions over a truncation context.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] INT)?
//! atom   := INT | 1_OBJECT | WORD | 'inv' '(' expr ')' | '(' expr ')'
//! WORD   := NAME ('.' NAME ('^' ['-'] INT)?)*
//! ```
//!
//! An integer `n` stands for `n` times the sum of all identities.

use std::fmt;

use num_bigint::BigInt;
use novlab_core::{RingElement, TruncationContext};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError {
    /// 1-based character column.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Identity(String),
    Word(String),
    Inv,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    let err = |k: usize, m: String| ExprError { column: k + 1, message: m };
    while k < chars.len() {
        let c = chars[k];
        let start = k;
        match c {
            ' ' | '\t' | '\n' => {
                k += 1;
                continue;
            }
            '+' => out.push((Tok::Plus, start)),
            '-' | '−' => out.push((Tok::Minus, start)),
            '*' => out.push((Tok::Star, start)),
            '^' => out.push((Tok::Caret, start)),
            '(' => out.push((Tok::LParen, start)),
            ')' => out.push((Tok::RParen, start)),
            d if d.is_ascii_digit() => {
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                let digits: String = chars[start..k].iter().collect();
                if k < chars.len() && chars[k] == '_' {
                    if digits != "1" {
                        return Err(err(start, format!("`{digits}_` is not an identity; write `1_<object>`")));
                    }
                    k += 1;
                    let name_start = k;
                    while k < chars.len() && is_name_char(chars[k]) {
                        k += 1;
                    }
                    if k == name_start {
                        return Err(err(name_start, "expected an object name after `1_`".into()));
                    }
                    out.push((Tok::Identity(chars[name_start..k].iter().collect()), start));
                } else {
                    out.push((Tok::Int(digits.parse().expect("ascii digits")), start));
                }
                continue;
            }
            a if is_name_start(a) => {
                while k < chars.len() && is_name_char(chars[k]) {
                    k += 1;
                }
                if chars[start..k].iter().collect::<String>() == "inv" {
                    out.push((Tok::Inv, start));
                    continue;
                }
                // `g^2.h^-1.e` is one arrow: an exponent belongs to the word
                // only when a further `.letter` follows it.
                loop {
                    let mut j = k;
                    if j < chars.len() && chars[j] == '^' {
                        j += 1;
                        if j < chars.len() && chars[j] == '-' {
                            j += 1;
                        }
                        let d0 = j;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        if j == d0 {
                            break;
                        }
                    }
                    if !(j + 1 < chars.len() && chars[j] == '.' && is_name_start(chars[j + 1])) {
                        break;
                    }
                    k = j + 1;
                    while k < chars.len() && is_name_char(chars[k]) {
                        k += 1;
                    }
                }
                out.push((Tok::Word(chars[start..k].iter().collect()), start));
                continue;
            }
            other => return Err(err(start, format!("unexpected character `{other}`"))),
        }
        k += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    ctx: &'a TruncationContext,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn column(&self) -> usize {
        self.toks[self.at].1 + 1
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { column: self.column(), message: message.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn ring<T>(&self, column: usize, r: Result<T, impl fmt::Display>) -> Result<T, ExprError> {
        r.map_err(|e| ExprError { column, message: e.to_string() })
    }

    fn expr(&mut self) -> Result<RingElement, ExprError> {
        let mut acc = self.term()?;
        loop {
            let col = self.column();
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = self.ring(col, acc.add(&rhs))?;
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = self.ring(col, acc.sub(&rhs))?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RingElement, ExprError> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::Star {
            let col = self.column();
            self.bump();
            let rhs = self.unary()?;
            acc = self.ring(col, acc.mul(&rhs))?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<RingElement, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<RingElement, ExprError> {
        let base_col = self.column();
        let word = match self.peek() {
            Tok::Word(w) => Some(w.clone()),
            _ => None,
        };
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let exp_col = self.column();
        let Tok::Int(k) = self.bump() else {
            return Err(ExprError { column: exp_col, message: "expected an integer exponent".into() });
        };
        let k: i64 = match i64::try_from(k) {
            Ok(k) if k <= 4096 => k,
            _ => return Err(ExprError { column: exp_col, message: "exponent too large".into() }),
        };
        let k = if negative { -k } else { k };
        if let Some(w) = word {
            // A bare word raised to a power is the arrow power, so that
            // negative exponents name inverse arrows.
            let graph = self.ctx.graph().clone();
            let arrow = self.ring(base_col, graph.parse_arrow(&w))?;
            let p = self.ring(exp_col, arrow.pow(k))?;
            return self.ring(base_col, RingElement::monomial(self.ctx, p, 1));
        }
        let unit = if k < 0 { self.ring(base_col, base.unit_inverse())? } else { base };
        let mut acc = RingElement::one(self.ctx);
        for _ in 0..k.unsigned_abs() {
            acc = self.ring(base_col, acc.mul(&unit))?;
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<RingElement, ExprError> {
        let col = self.column();
        match self.bump() {
            Tok::Int(n) => Ok(RingElement::one(self.ctx).scale(&n)),
            Tok::Identity(name) => {
                let graph = self.ctx.graph();
                let p = graph
                    .object_id(&name)
                    .ok_or_else(|| ExprError { column: col, message: format!("undefined object `{name}`") })?;
                Ok(RingElement::identity(self.ctx, p))
            }
            Tok::Word(w) => {
                let graph = self.ctx.graph().clone();
                let arrow = graph.parse_arrow(&w).map_err(|e| ExprError {
                    column: col,
                    message: match e {
                        novlab_core::GroupoidError::UnknownGenerator(g) => format!("undefined generator `{g}`"),
                        other => other.to_string(),
                    },
                })?;
                self.ring(col, RingElement::monomial(self.ctx, arrow, 1))
            }
            Tok::Inv => {
                if *self.peek() != Tok::LParen {
                    return self.fail("expected `(` after inv");
                }
                self.bump();
                let inner = self.expr()?;
                self.close()?;
                inner.unit_inverse().map_err(|e| ExprError { column: col, message: format!("inv(): {e}") })
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            Tok::End => Err(ExprError { column: col, message: "unexpected end of expression".into() }),
            t => Err(ExprError { column: col, message: format!("unexpected {}", describe(&t)) }),
        }
    }

    fn close(&mut self) -> Result<(), ExprError> {
        if *self.peek() != Tok::RParen {
            return self.fail("expected `)`");
        }
        self.bump();
        Ok(())
    }
}

fn describe(t: &Tok) -> &'static str {
    match t {
        Tok::Plus => "`+`",
        Tok::Minus => "`-`",
        Tok::Star => "`*`",
        Tok::Caret => "`^`",
        Tok::RParen => "`)`",
        Tok::LParen => "`(`",
        Tok::Inv => "`inv`",
        _ => "token",
    }
}

pub fn evaluate(src: &str, ctx: &TruncationContext) -> Result<RingElement, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0, ctx };
    let out = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(format!("unexpected {}", describe(p.peek())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use novlab_core::groupoid::{GeneratorSpec, GroupoidGraph, ObjectSpec};

    fn ctx() -> TruncationContext {
        let graph = GroupoidGraph::new(
            vec![ObjectSpec { name: "p".into(), morse_index: 1 }],
            vec![
                GeneratorSpec { name: "g".into(), source: "p".into(), target: "p".into(), u_value: -1.0 },
                GeneratorSpec { name: "h".into(), source: "p".into(), target: "p".into(), u_value: -0.5 },
            ],
        )
        .unwrap();
        TruncationContext::new(graph, 5.0).unwrap()
    }

    fn eval(s: &str) -> String {
        evaluate(s, &ctx()).unwrap().render()
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("1 + 2 * g"), "1_p + 2*g");
        assert_eq!(eval("-g^2 + 3"), "3*1_p - g^2");
        assert_eq!(eval("(1 + g)^2"), "1_p + 2*g + g^2");
        assert_eq!(eval("2 - 2"), "0");
    }

    #[test]
    fn words_and_inverses() {
        assert_eq!(eval("g.h"), "g.h");
        assert_eq!(eval("g^-1 * g"), "1_p");
        assert_eq!(eval("g.h^-1.g"), "g.h^-1.g");
        assert_eq!(eval("g^2.h"), "g^2.h");
        assert_eq!(eval("(1 - g)^-1"), "1_p + g + g^2 + g^3 + g^4");
    }

    #[test]
    fn truncation_drops_long_words() {
        assert_eq!(eval("g^5 + g^4"), "g^4");
    }

    #[test]
    fn error_columns() {
        let e = evaluate("1 + k", &ctx()).unwrap_err();
        assert_eq!(e.column, 5);
        assert!(e.message.contains("undefined generator `k`"));
        let e = evaluate("(1 + g", &ctx()).unwrap_err();
        assert_eq!(e.column, 7);
        let e = evaluate("inv(g)", &ctx()).unwrap_err();
        assert_eq!(e.column, 1);
        let e = evaluate("1 $ g", &ctx()).unwrap_err();
        assert_eq!(e.column, 3);
        let e = evaluate("g ^ x", &ctx()).unwrap_err();
        assert_eq!(e.column, 5);
    }
}
