//! Canonical prefix syntax for STL formulas.
//!
//! ```text
//! formula := (pred a1 a2 ... ak b)            aᵀx ≤ b
//!          | (in  [label] xmin ymin xmax ymax)
//!          | (out [label] xmin ymin xmax ymax)
//!          | (not formula)
//!          | (and formula+) | (or formula+)
//!          | (G lo hi formula) | (F lo hi formula)
//!          | (U lo hi formula formula)
//! ```
//!
//! Labels are bare words that do not parse as numbers. Printing uses the
//! shortest round-tripping decimal form, so `parse(print(f)) == f`.

use std::fmt;

use thiserror::Error;

use crate::environment::Rect;

use super::StlFormula;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("STL syntax error at token {position}: {message}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Word(String),
}

fn tokenize(input: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Token>| {
        if !word.is_empty() {
            out.push(Token::Word(std::mem::take(word)));
        }
    };
    for c in input.chars() {
        match c {
            '(' => {
                flush(&mut word, &mut out);
                out.push(Token::Open);
            }
            ')' => {
                flush(&mut word, &mut out);
                out.push(Token::Close);
            }
            c if c.is_whitespace() => flush(&mut word, &mut out),
            c => word.push(c),
        }
    }
    flush(&mut word, &mut out);
    out
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect_close(&mut self) -> Result<(), SyntaxError> {
        match self.next() {
            Some(Token::Close) => Ok(()),
            _ => {
                self.pos -= 1;
                self.err("expected ')'")
            }
        }
    }

    fn number(&mut self) -> Result<f64, SyntaxError> {
        match self.next() {
            Some(Token::Word(w)) => match w.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => {
                    self.pos -= 1;
                    self.err(format!("expected a finite number, found '{w}'"))
                }
            },
            _ => {
                self.pos -= 1;
                self.err("expected a number")
            }
        }
    }

    fn step(&mut self) -> Result<usize, SyntaxError> {
        match self.next() {
            Some(Token::Word(w)) => match w.parse::<usize>() {
                Ok(v) => Ok(v),
                Err(_) => {
                    self.pos -= 1;
                    self.err(format!("expected a step index, found '{w}'"))
                }
            },
            _ => {
                self.pos -= 1;
                self.err("expected a step index")
            }
        }
    }

    fn numbers_until_close(&mut self) -> Result<Vec<f64>, SyntaxError> {
        let mut out = Vec::new();
        while !matches!(self.peek(), Some(Token::Close) | None) {
            out.push(self.number()?);
        }
        Ok(out)
    }

    fn formula(&mut self) -> Result<StlFormula, SyntaxError> {
        match self.next() {
            Some(Token::Open) => {}
            _ => {
                self.pos -= 1;
                return self.err("expected '('");
            }
        }
        let head = match self.next() {
            Some(Token::Word(w)) => w,
            _ => {
                self.pos -= 1;
                return self.err("expected an operator name");
            }
        };
        let f = match head.as_str() {
            "pred" => {
                let nums = self.numbers_until_close()?;
                if nums.len() < 2 {
                    return self.err("pred needs at least one coefficient and a bound");
                }
                let (a, b) = nums.split_at(nums.len() - 1);
                StlFormula::Predicate {
                    a: a.to_vec(),
                    b: b[0],
                }
            }
            "in" | "out" => {
                let label = match self.peek() {
                    Some(Token::Word(w)) if w.parse::<f64>().is_err() => {
                        let l = w.clone();
                        self.pos += 1;
                        Some(l)
                    }
                    _ => None,
                };
                let nums = self.numbers_until_close()?;
                if nums.len() != 4 {
                    return self.err(format!("{head} needs 4 numbers, got {}", nums.len()));
                }
                StlFormula::Region {
                    label,
                    rect: Rect::new([nums[0], nums[1]], [nums[2], nums[3]]),
                    inside: head == "in",
                }
            }
            "not" => StlFormula::Not(Box::new(self.formula()?)),
            "and" | "or" => {
                let mut children = Vec::new();
                while matches!(self.peek(), Some(Token::Open)) {
                    children.push(self.formula()?);
                }
                if children.is_empty() {
                    return self.err(format!("{head} needs at least one operand"));
                }
                if head == "and" {
                    StlFormula::And(children)
                } else {
                    StlFormula::Or(children)
                }
            }
            "G" | "F" => {
                let lo = self.step()?;
                let hi = self.step()?;
                let body = Box::new(self.formula()?);
                if head == "G" {
                    StlFormula::Always { lo, hi, body }
                } else {
                    StlFormula::Eventually { lo, hi, body }
                }
            }
            "U" => {
                let lo = self.step()?;
                let hi = self.step()?;
                let left = Box::new(self.formula()?);
                let right = Box::new(self.formula()?);
                StlFormula::Until {
                    lo,
                    hi,
                    left,
                    right,
                }
            }
            other => {
                self.pos -= 1;
                return self.err(format!("unknown operator '{other}'"));
            }
        };
        self.expect_close()?;
        Ok(f)
    }
}

pub fn parse_formula(input: &str) -> Result<StlFormula, SyntaxError> {
    let mut p = Parser {
        tokens: tokenize(input),
        pos: 0,
    };
    let f = p.formula()?;
    if p.pos != p.tokens.len() {
        return p.err("trailing input after formula");
    }
    f.validate().map_err(|e| SyntaxError {
        position: p.pos,
        message: e.to_string(),
    })?;
    Ok(f)
}

impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StlFormula::Predicate { a, b } => {
                write!(f, "(pred")?;
                for v in a {
                    write!(f, " {v}")?;
                }
                write!(f, " {b})")
            }
            StlFormula::Region {
                label,
                rect,
                inside,
            } => {
                write!(f, "({}", if *inside { "in" } else { "out" })?;
                if let Some(l) = label {
                    write!(f, " {l}")?;
                }
                write!(
                    f,
                    " {} {} {} {})",
                    rect.min[0], rect.min[1], rect.max[0], rect.max[1]
                )
            }
            StlFormula::Not(g) => write!(f, "(not {g})"),
            StlFormula::And(gs) | StlFormula::Or(gs) => {
                write!(
                    f,
                    "({}",
                    if matches!(self, StlFormula::And(_)) {
                        "and"
                    } else {
                        "or"
                    }
                )?;
                for g in gs {
                    write!(f, " {g}")?;
                }
                write!(f, ")")
            }
            StlFormula::Always { lo, hi, body } => write!(f, "(G {lo} {hi} {body})"),
            StlFormula::Eventually { lo, hi, body } => write!(f, "(F {lo} {hi} {body})"),
            StlFormula::Until {
                lo,
                hi,
                left,
                right,
            } => write!(f, "(U {lo} {hi} {left} {right})"),
        }
    }
}
