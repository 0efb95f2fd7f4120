//! Hand-rolled lexer and recursive-descent parser for the concrete formula
//! syntax. Precedence, tightest first: unary (`!`, `X`, `F`), `&`, `|`,
//! `U`; `U` is right-associative.

use super::{Formula, FormulaError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Bang,
    And,
    Or,
    Next,
    Until,
    Eventually,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, FormulaError> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '!' => {
                toks.push((i, Tok::Bang));
                i += 1;
            }
            '&' => {
                toks.push((i, Tok::And));
                i += 1;
            }
            '|' => {
                toks.push((i, Tok::Or));
                i += 1;
            }
            '(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "F" => Tok::Eventually,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((start, tok));
            }
            other => {
                return Err(FormulaError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> FormulaError {
        FormulaError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        }
    }

    // until := or ('U' until)?
    fn until(&mut self) -> Result<Formula, FormulaError> {
        let left = self.or()?;
        if self.peek() == Some(&Tok::Until) {
            self.bump();
            let right = self.until()?;
            return Ok(Formula::until(left, right));
        }
        Ok(left)
    }

    // or := and ('|' and)*
    fn or(&mut self) -> Result<Formula, FormulaError> {
        let mut left = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            let right = self.and()?;
            left = Formula::or(left, right);
        }
        Ok(left)
    }

    // and := unary ('&' unary)*
    fn and(&mut self) -> Result<Formula, FormulaError> {
        let mut left = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            let right = self.unary()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek() {
            Some(Tok::Bang) => {
                let (bang_pos, _) = self.bump().unwrap();
                let inner = self.unary()?;
                match inner {
                    Formula::Atom(a) => Ok(Formula::NotAtom(a)),
                    _ => Err(FormulaError::Negation { pos: bang_pos }),
                }
            }
            Some(Tok::Next) => {
                self.bump();
                Ok(Formula::next(self.unary()?))
            }
            Some(Tok::Eventually) => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.bump();
                Ok(Formula::Atom(name))
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.until()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                self.bump();
                Ok(inner)
            }
            Some(other) => Err(self.err(format!("expected formula, got `{other:?}`"))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parses a formula string. Errors carry the byte offset of the offending
/// token.
pub fn parse(text: &str) -> Result<Formula, FormulaError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    let f = p.until()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input after formula"));
    }
    Ok(f)
}
