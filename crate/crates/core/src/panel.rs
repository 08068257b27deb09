//! Column-oriented table with CSV input and output.
//!
//! Numeric columns are `f64`; a column named `category` holds unit
//! categories by code. Numbers are written in shortest round-trip form, so
//! writing and re-reading a panel is lossless.

use std::io::{Read, Write};

use thiserror::Error;

use crate::estimation::RdSample;
use crate::predicate::RowView;
use crate::unit_classification::UnitCategory;

pub const CATEGORY_COLUMN: &str = "category";

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("row {row}, column {column:?}: {message}")]
    Cell { row: usize, column: String, message: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("column {column:?} has {got} rows, expected {expected}")]
    Length { column: String, expected: usize, got: usize },
}

impl From<csv::Error> for PanelError {
    fn from(e: csv::Error) -> Self {
        PanelError::Csv(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Num(Vec<f64>),
    Cat(Vec<UnitCategory>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Cat(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Panel {
    names: Vec<String>,
    cols: Vec<Column>,
}

impl Panel {
    pub fn new() -> Self {
        Panel::default()
    }

    pub fn len(&self) -> usize {
        self.cols.first().map_or(0, Column::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    fn push(&mut self, name: &str, col: Column) -> Result<(), PanelError> {
        if self.has(name) {
            return Err(PanelError::DuplicateColumn(name.to_string()));
        }
        if !self.cols.is_empty() && col.len() != self.len() {
            return Err(PanelError::Length { column: name.to_string(), expected: self.len(), got: col.len() });
        }
        self.names.push(name.to_string());
        self.cols.push(col);
        Ok(())
    }

    pub fn push_num(&mut self, name: &str, values: Vec<f64>) -> Result<(), PanelError> {
        self.push(name, Column::Num(values))
    }

    pub fn push_cat(&mut self, values: Vec<UnitCategory>) -> Result<(), PanelError> {
        self.push(CATEGORY_COLUMN, Column::Cat(values))
    }

    /// Replaces or appends the category column.
    pub fn set_categories(&mut self, values: Vec<UnitCategory>) -> Result<(), PanelError> {
        match self.position(CATEGORY_COLUMN) {
            Some(p) => {
                if values.len() != self.len() {
                    return Err(PanelError::Length {
                        column: CATEGORY_COLUMN.into(),
                        expected: self.len(),
                        got: values.len(),
                    });
                }
                self.cols[p] = Column::Cat(values);
                Ok(())
            }
            None => self.push_cat(values),
        }
    }

    pub fn num(&self, name: &str) -> Option<&[f64]> {
        match self.position(name).map(|p| &self.cols[p]) {
            Some(Column::Num(v)) => Some(v),
            _ => None,
        }
    }

    pub fn require(&self, name: &str) -> Result<&[f64], PanelError> {
        self.num(name).ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    }

    pub fn categories(&self) -> Option<&[UnitCategory]> {
        match self.position(CATEGORY_COLUMN).map(|p| &self.cols[p]) {
            Some(Column::Cat(v)) => Some(v),
            _ => None,
        }
    }

    /// A 0/1 column, checked.
    pub fn bits(&self, name: &str) -> Result<Vec<bool>, PanelError> {
        self.require(name)?
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v == 0.0 {
                    Ok(false)
                } else if v == 1.0 {
                    Ok(true)
                } else {
                    Err(PanelError::Cell { row: i + 1, column: name.to_string(), message: format!("expected 0 or 1, got {v}") })
                }
            })
            .collect()
    }

    pub fn row(&self, i: usize) -> PanelRow<'_> {
        PanelRow { panel: self, i }
    }

    pub fn rows(&self) -> Vec<PanelRow<'_>> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    /// Column names starting with `prefix`, in table order.
    pub fn names_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.names.iter().filter(|n| n.starts_with(prefix)).cloned().collect()
    }

    /// Unit ids from `id_column`, or row numbers when it is absent.
    pub fn ids(&self, id_column: &str) -> Result<Vec<u64>, PanelError> {
        match self.num(id_column) {
            None => Ok((0..self.len() as u64).collect()),
            Some(v) => v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) {
                        Ok(x as u64)
                    } else {
                        Err(PanelError::Cell {
                            row: i + 1,
                            column: id_column.to_string(),
                            message: "ids must be non-negative integers".into(),
                        })
                    }
                })
                .collect(),
        }
    }

    /// Estimation sample for one centered score column.
    pub fn sample(&self, score: &str, outcome: &str, treatment: Option<&str>, covariates: &[String], id_column: &str) -> Result<RdSample, PanelError> {
        let x = self.require(score)?.to_vec();
        let y = self.require(outcome)?.to_vec();
        let d = match treatment {
            Some(t) => Some(self.bits(t)?.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect()),
            None => None,
        };
        let cov_cols = covariates.iter().map(|c| self.require(c)).collect::<Result<Vec<_>, _>>()?;
        let z = (0..self.len()).map(|i| cov_cols.iter().map(|c| c[i]).collect()).collect();
        Ok(RdSample { ids: self.ids(id_column)?, x, y, d, z })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PanelError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.names)?;
        let mut rec = Vec::with_capacity(self.cols.len());
        for i in 0..self.len() {
            rec.clear();
            for c in &self.cols {
                rec.push(match c {
                    Column::Num(v) => v[i].to_string(),
                    Column::Cat(v) => v[i].code().to_string(),
                });
            }
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| PanelError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    /// Reads a CSV with a header row. Non-finite numbers are rejected with
    /// the 1-based data row number.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, PanelError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let names: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut cols: Vec<Column> = names
            .iter()
            .map(|n| if n == CATEGORY_COLUMN { Column::Cat(Vec::new()) } else { Column::Num(Vec::new()) })
            .collect();
        for (r, rec) in rd.records().enumerate() {
            let rec = rec?;
            let row = r + 1;
            if rec.len() != names.len() {
                return Err(PanelError::Cell {
                    row,
                    column: String::new(),
                    message: format!("expected {} fields, got {}", names.len(), rec.len()),
                });
            }
            for ((field, name), col) in rec.iter().zip(&names).zip(cols.iter_mut()) {
                let cell_err = |message: String| PanelError::Cell { row, column: name.clone(), message };
                match col {
                    Column::Num(v) => {
                        let x: f64 = field.parse().map_err(|_| cell_err(format!("not a number: {field:?}")))?;
                        if !x.is_finite() {
                            return Err(cell_err(format!("non-finite value {field:?}")));
                        }
                        v.push(x);
                    }
                    Column::Cat(v) => {
                        v.push(field.parse().map_err(|_| cell_err(format!("unknown category {field:?}")))?);
                    }
                }
            }
        }
        let mut panel = Panel::new();
        for (n, c) in names.iter().zip(cols) {
            panel.push(n, c)?;
        }
        for flag in ["t", "d"] {
            if panel.has(flag) {
                panel.bits(flag)?;
            }
        }
        Ok(panel)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PanelRow<'a> {
    panel: &'a Panel,
    i: usize,
}

impl RowView for PanelRow<'_> {
    fn value(&self, column: &str) -> Option<f64> {
        self.panel.num(column).map(|v| v[self.i])
    }

    fn category(&self) -> Option<UnitCategory> {
        self.panel.categories().map(|c| c[self.i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut p = Panel::new();
        p.push_num("lot_id", vec![0.0, 1.0]).unwrap();
        p.push_num("x", vec![0.1, -1.0 / 3.0]).unwrap();
        p.push_num("d", vec![1.0, 0.0]).unwrap();
        p.push_cat(vec![UnitCategory::Complier, UnitCategory::Nevertaker]).unwrap();
        let text = p.to_csv_string();
        assert!(text.starts_with("lot_id,x,d,category\n0,0.1,1,C\n"));
        let q = Panel::read_csv(text.as_bytes()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_bad_cells_with_row_numbers() {
        let err = Panel::read_csv("x,y\n1,2\n3,NaN\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        let err = Panel::read_csv("x,d\n1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("expected 0 or 1"));
        let err = Panel::read_csv("x,y\n1,inf\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }
}
