//! Delimited numeric text input.
//!
//! One observation per line, fields separated by commas or whitespace.
//! Blank lines and lines starting with `#` are skipped. The first remaining
//! line is a header when any of its fields is not a number.

use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    /// 1-based source line of each row.
    pub lines: Vec<usize>,
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.parse::<f64>().ok()
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut header = None;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| parse_number(f)).collect();
        if header.is_none() && rows.is_empty() && parsed.iter().any(Option::is_none) {
            header = Some(fields.iter().map(|s| s.to_string()).collect::<Vec<_>>());
            width = Some(fields.len());
            continue;
        }
        if let Some((col, _)) = parsed.iter().enumerate().find(|(_, v)| v.is_none()) {
            return Err(CliError::Parse {
                line: line_no,
                message: format!("field {} ({:?}) is not a number", col + 1, fields[col]),
            });
        }
        match width {
            Some(w) if w != fields.len() => {
                return Err(CliError::Parse {
                    line: line_no,
                    message: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            _ => width = Some(fields.len()),
        }
        rows.push(parsed.into_iter().map(Option::unwrap).collect());
        lines.push(line_no);
    }
    if rows.is_empty() {
        return Err(CliError::Validation("input contains no data rows".into()));
    }
    Ok(Table {
        header,
        rows,
        lines,
    })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text)
}

/// A column chosen by 0-based index or by (case-insensitive) header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.is_empty() {
            return Err("empty column selector".into());
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

impl Table {
    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    pub fn resolve(&self, sel: &ColumnSelector) -> Result<usize> {
        match sel {
            ColumnSelector::Index(i) if *i < self.width() => Ok(*i),
            ColumnSelector::Index(i) => Err(CliError::Validation(format!(
                "column {i} out of range (width {})",
                self.width()
            ))),
            ColumnSelector::Name(name) => self
                .header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c.eq_ignore_ascii_case(name)))
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "no column named {name:?}; header is {:?}",
                        self.header
                    ))
                }),
        }
    }

    fn find_header(&self, pred: impl Fn(&str) -> bool) -> Option<usize> {
        self.header
            .as_ref()?
            .iter()
            .position(|c| pred(&c.to_ascii_lowercase()))
    }

    /// Covariate and response columns. Defaults: a `year` column (else
    /// column 0) for x and the first column whose name contains `wind`
    /// (else the first column other than x) for y.
    pub fn xy_columns(
        &self,
        x: Option<&ColumnSelector>,
        y: Option<&ColumnSelector>,
    ) -> Result<(usize, usize)> {
        let xc = match x {
            Some(s) => self.resolve(s)?,
            None => self.find_header(|c| c == "year").unwrap_or(0),
        };
        let yc = match y {
            Some(s) => self.resolve(s)?,
            None => self
                .find_header(|c| c.contains("wind"))
                .unwrap_or(if xc == 0 { 1 } else { 0 }),
        };
        if yc >= self.width() {
            return Err(CliError::Validation(
                "input needs at least two columns".into(),
            ));
        }
        if xc == yc {
            return Err(CliError::Validation(
                "x and y select the same column".into(),
            ));
        }
        Ok((xc, yc))
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }
}
