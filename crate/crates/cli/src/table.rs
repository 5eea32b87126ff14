//! Typed result tables and their CSV form: `# key=value` metadata lines, a header row, data rows.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("column {name} has {found} rows, table has {expected}")]
    LengthMismatch { name: String, expected: usize, found: usize },
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Float(Vec<f64>),
    Int(Vec<i64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Int(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, row: usize, out: &mut String) {
        match self {
            Column::Float(v) => write!(out, "{}", v[row]).unwrap(),
            Column::Int(v) => write!(out, "{}", v[row]).unwrap(),
            Column::Text(v) => out.push_str(&v[row]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    columns: Vec<(String, Column)>,
    metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), columns: Vec::new(), metadata: Vec::new() }
    }

    pub fn with_column(mut self, name: &str, column: Column) -> Result<Self, TableError> {
        self.push_column(name, column)?;
        Ok(self)
    }

    pub fn push_column(&mut self, name: &str, column: Column) -> Result<(), TableError> {
        if self.columns.iter().any(|(n, _)| n == name) {
            return Err(TableError::DuplicateColumn(name.into()));
        }
        if let Some((_, first)) = self.columns.first() {
            if first.len() != column.len() {
                return Err(TableError::LengthMismatch { name: name.into(), expected: first.len(), found: column.len() });
            }
        }
        self.columns.push((name.into(), column));
        Ok(())
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.set_meta(key, value);
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.into(), value)),
        }
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn floats(&self, name: &str) -> Option<&[f64]> {
        match self.column(name)? {
            Column::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# table={}", self.name).unwrap();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}").unwrap();
        }
        let header: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(out, "{}", header.join(",")).unwrap();
        for row in 0..self.rows() {
            for (i, (_, col)) in self.columns.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                col.cell(row, &mut out);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `(log λ, log D)` from columns `lambda`, `d`.
    Rate,
    /// `(log a, log P)` from columns `a`, `probability`.
    Tail,
}

impl PlotKind {
    fn columns(self) -> (&'static str, &'static str) {
        match self {
            PlotKind::Rate => ("lambda", "d"),
            PlotKind::Tail => ("a", "probability"),
        }
    }

    pub fn stem(self) -> &'static str {
        match self {
            PlotKind::Rate => "rate",
            PlotKind::Tail => "tail",
        }
    }
}

/// Plot-ready log-log pairs and the two endpoints of their least-squares line.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub points: String,
    pub fit_line: String,
    pub slope: f64,
}

pub fn emit_plot_data(table: &ResultTable, kind: PlotKind) -> Result<PlotData, TableError> {
    let (xn, yn) = kind.columns();
    let missing = |n: &str| TableError::SchemaMismatch(format!("{} table needs float column {n}", kind.stem()));
    let x = table.floats(xn).ok_or_else(|| missing(xn))?;
    let y = table.floats(yn).ok_or_else(|| missing(yn))?;
    if x.len() < 2 {
        return Err(TableError::SchemaMismatch(format!("{} table has {} rows, needs 2", kind.stem(), x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(TableError::SchemaMismatch("log-log data must be positive".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = sbmlab::stats::linear_fit(&lx, &ly)
        .ok_or_else(|| TableError::SchemaMismatch("abscissae must not all coincide".into()))?;
    let mut points = format!("# log_{xn} log_{yn}\n");
    for (a, b) in lx.iter().zip(&ly) {
        writeln!(points, "{a} {b}").unwrap();
    }
    let (lo, hi) = lx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let fit_line = format!(
        "# slope={} intercept={}\n{lo} {}\n{hi} {}\n",
        fit.slope,
        fit.intercept,
        fit.predict(lo),
        fit.predict(hi)
    );
    Ok(PlotData { points, fit_line, slope: fit.slope })
}
