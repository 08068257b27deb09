//! Small row-predicate language used to describe dropped subsets.
//!
//! ```text
//! pred  := and { '|' and }
//! and   := unary { '&' unary }
//! unary := '!' unary | '(' pred ')' | 'true' | 'false' | cmp
//! cmp   := ident op number | 'category' ('==' | '!=') code
//! op    := '<' | '<=' | '>' | '>=' | '==' | '!='
//! ```

use std::fmt;

use thiserror::Error;

use crate::unit_classification::UnitCategory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredicateError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("predicate refers to category but no categories are available")]
    NoCategory,
}

/// Read access to one row for predicate evaluation.
pub trait RowView {
    fn value(&self, column: &str) -> Option<f64>;
    fn category(&self) -> Option<UnitCategory> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Const(bool),
    Compare { column: String, op: CmpOp, value: f64 },
    Category { equal: bool, category: UnitCategory },
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

impl Predicate {
    pub fn parse(text: &str) -> Result<Self, PredicateError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let out = p.or()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(out)
    }

    pub fn eval<R: RowView + ?Sized>(&self, row: &R) -> Result<bool, PredicateError> {
        Ok(match self {
            Predicate::Const(b) => *b,
            Predicate::Compare { column, op, value } => {
                let v = row
                    .value(column)
                    .ok_or_else(|| PredicateError::UnknownColumn(column.clone()))?;
                op.apply(v, *value)
            }
            Predicate::Category { equal, category } => {
                let c = row.category().ok_or(PredicateError::NoCategory)?;
                (c == *category) == *equal
            }
            Predicate::Not(p) => !p.eval(row)?,
            Predicate::And(ps) => {
                for p in ps {
                    if !p.eval(row)? {
                        return Ok(false);
                    }
                }
                true
            }
            Predicate::Or(ps) => {
                for p in ps {
                    if p.eval(row)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    /// Whether the predicate mentions `category`.
    pub fn uses_category(&self) -> bool {
        match self {
            Predicate::Category { .. } => true,
            Predicate::Not(p) => p.uses_category(),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().any(Predicate::uses_category),
            _ => false,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Const(b) => write!(f, "{b}"),
            Predicate::Compare { column, op, value } => write!(f, "{column} {} {value:?}", op.symbol()),
            Predicate::Category { equal, category } => {
                write!(f, "category {} {category}", if *equal { "==" } else { "!=" })
            }
            Predicate::Not(p) => write!(f, "!({p})"),
            Predicate::And(ps) | Predicate::Or(ps) => {
                let sep = if matches!(self, Predicate::And(_)) { " & " } else { " | " };
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "({p})")?;
                }
                Ok(())
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> PredicateError {
        PredicateError::Syntax { position: self.pos, message: msg.to_string() }
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

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s.as_bytes()) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<Predicate, PredicateError> {
        let mut items = vec![self.and()?];
        while self.eat("|") {
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Predicate::Or(items) })
    }

    fn and(&mut self) -> Result<Predicate, PredicateError> {
        let mut items = vec![self.unary()?];
        while self.eat("&") {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Predicate::And(items) })
    }

    fn unary(&mut self) -> Result<Predicate, PredicateError> {
        match self.peek() {
            Some(b'!') if !self.src[self.pos..].starts_with(b"!=") => {
                self.pos += 1;
                Ok(Predicate::Not(Box::new(self.unary()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let p = self.or()?;
                if !self.eat(")") {
                    return Err(self.error("expected ')'"));
                }
                Ok(p)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.comparison(),
            Some(_) => Err(self.error("expected a comparison, '!' or '('")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn cmp_op(&mut self) -> Result<CmpOp, PredicateError> {
        for (s, op) in [
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ] {
            if self.eat(s) {
                return Ok(op);
            }
        }
        Err(self.error("expected a comparison operator"))
    }

    fn comparison(&mut self) -> Result<Predicate, PredicateError> {
        let start = self.pos;
        let name = self.ident();
        match name.as_str() {
            "true" => return Ok(Predicate::Const(true)),
            "false" => return Ok(Predicate::Const(false)),
            _ => {}
        }
        let op = self.cmp_op()?;
        if name == "category" {
            let equal = match op {
                CmpOp::Eq => true,
                CmpOp::Ne => false,
                _ => {
                    return Err(PredicateError::Syntax {
                        position: start,
                        message: "category only supports == and !=".into(),
                    })
                }
            };
            let code_pos = self.pos;
            let code = self.ident();
            let category = code.parse().map_err(|_| PredicateError::Syntax {
                position: code_pos,
                message: format!("unknown category code {code:?}"),
            })?;
            return Ok(Predicate::Category { equal, category });
        }
        self.skip_ws();
        let num_start = self.pos;
        while self.pos < self.src.len()
            && matches!(self.src[self.pos], b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E')
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[num_start..self.pos]).unwrap();
        let value = match text.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                return Err(PredicateError::Syntax {
                    position: num_start,
                    message: "expected a finite number".into(),
                })
            }
        };
        Ok(Predicate::Compare { column: name, op, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Row(HashMap<&'static str, f64>, Option<UnitCategory>);

    impl RowView for Row {
        fn value(&self, column: &str) -> Option<f64> {
            self.0.get(column).copied()
        }
        fn category(&self) -> Option<UnitCategory> {
            self.1
        }
    }

    #[test]
    fn parse_and_eval() {
        let row = Row(HashMap::from([("x_y", -0.5), ("x_d", 1.0)]), Some(UnitCategory::Nevertaker));
        let cases = [
            ("x_y <= 0", true),
            ("x_y > 0", false),
            ("x_y <= 0 & x_d > 2", false),
            ("x_y <= 0 & !(x_d > 2)", true),
            ("x_y > 0 | category == NT", true),
            ("category != NT", false),
            ("false", false),
            ("true & x_d >= 1e0", true),
        ];
        for (text, want) in cases {
            assert_eq!(Predicate::parse(text).unwrap().eval(&row).unwrap(), want, "{text}");
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(Predicate::parse("x_y <"), Err(PredicateError::Syntax { .. })));
        assert!(matches!(Predicate::parse("category < C"), Err(PredicateError::Syntax { .. })));
        assert!(matches!(Predicate::parse("(x > 1"), Err(PredicateError::Syntax { .. })));
        let row = Row(HashMap::new(), None);
        assert_eq!(
            Predicate::parse("z > 1").unwrap().eval(&row),
            Err(PredicateError::UnknownColumn("z".into()))
        );
        assert_eq!(Predicate::parse("category == C").unwrap().eval(&row), Err(PredicateError::NoCategory));
    }

    #[test]
    fn display_round_trips() {
        let p = Predicate::parse("x_y <= 0 & !(x_d > 2) | category == AT").unwrap();
        assert_eq!(Predicate::parse(&p.to_string()).unwrap(), p);
    }
}
