//! Recursive-descent parser for the rule DSL.
//!
//! ```text
//! rule   := expr [ '@' 'c' '=' '(' number { ',' number } ')' ]
//! expr   := term { '|' term }
//! term   := factor { '&' factor }
//! factor := '!' factor | '(' expr ')' | 'I' digits | '0' | '1'
//! ```

use super::expr::BoolExpr;
use super::RuleError;

pub(crate) struct Parsed {
    pub expr: BoolExpr,
    pub cutoff: Option<Vec<f64>>,
}

pub(crate) fn parse(text: &str) -> Result<Parsed, RuleError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let expr = p.expr()?;
    p.skip_ws();
    let cutoff = if p.eat(b'@') { Some(p.cutoff_clause()?) } else { None };
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(Parsed { expr, cutoff })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> RuleError {
        RuleError::Syntax { position: self.pos, message: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), RuleError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<BoolExpr, RuleError> {
        let mut items = vec![self.term()?];
        while self.eat(b'|') {
            items.push(self.term()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { BoolExpr::Or(items) })
    }

    fn term(&mut self) -> Result<BoolExpr, RuleError> {
        let mut items = vec![self.factor()?];
        while self.eat(b'&') {
            items.push(self.factor()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { BoolExpr::And(items) })
    }

    fn factor(&mut self) -> Result<BoolExpr, RuleError> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(BoolExpr::not(self.factor()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'0') => {
                self.pos += 1;
                Ok(BoolExpr::Const(false))
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(BoolExpr::Const(true))
            }
            Some(b'I') => {
                let start = self.pos;
                self.pos += 1;
                let digits_start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos == digits_start {
                    return Err(RuleError::Syntax {
                        position: start,
                        message: "atom needs an index, e.g. I1".into(),
                    });
                }
                let text = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
                let k: usize = text.parse().map_err(|_| RuleError::Syntax {
                    position: start,
                    message: "atom index too large".into(),
                })?;
                if k == 0 {
                    return Err(RuleError::Syntax {
                        position: start,
                        message: "atom indices start at 1".into(),
                    });
                }
                Ok(BoolExpr::Atom(k))
            }
            Some(_) => Err(self.error("expected atom, constant, '!' or '('")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn cutoff_clause(&mut self) -> Result<Vec<f64>, RuleError> {
        self.expect(b'c')?;
        self.expect(b'=')?;
        self.expect(b'(')?;
        let mut values = vec![self.number()?];
        while self.eat(b',') {
            values.push(self.number()?);
        }
        self.expect(b')')?;
        Ok(values)
    }

    fn number(&mut self) -> Result<f64, RuleError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && matches!(self.src[self.pos], b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E')
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(RuleError::Syntax { position: start, message: "expected a finite number".into() }),
        }
    }
}
