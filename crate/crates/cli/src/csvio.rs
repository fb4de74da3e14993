//! Trace export and import.

use std::io;
use std::path::{Path, PathBuf};

use hbg_core::expr::format_number;
use hbg_core::SimTrace;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("`{path}`: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("`{path}`: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("`{path}` line {line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("no probe named `{0}`")]
    UnknownProbe(String),
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Probe labels to write, in order; `None` writes all.
    pub probes: Option<Vec<String>>,
    /// Append the mode bit string as a last column.
    pub mode: bool,
}

/// Writes `t`, the selected probes and optionally the mode, one row per
/// recorded step. Numbers use the shortest text that parses back exactly.
pub fn write_csv_to<W: io::Write>(trace: &SimTrace, opts: &CsvOptions, out: W) -> Result<(), CsvError> {
    if trace.is_empty() {
        return Err(CsvError::EmptyTrace);
    }
    let columns: Vec<usize> = match &opts.probes {
        None => (0..trace.probe_labels.len()).collect(),
        Some(labels) => labels
            .iter()
            .map(|l| {
                trace
                    .probe_labels
                    .iter()
                    .position(|p| p == l)
                    .ok_or_else(|| CsvError::UnknownProbe(l.clone()))
            })
            .collect::<Result<_, _>>()?,
    };
    let to_err = |source| CsvError::Csv {
        path: PathBuf::from("<output>"),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(columns.iter().map(|&c| trace.probe_labels[c].clone()));
    if opts.mode {
        header.push("mode".into());
    }
    w.write_record(&header).map_err(to_err)?;
    for (k, t) in trace.times.iter().enumerate() {
        let mut row = vec![format_number(*t)];
        row.extend(columns.iter().map(|&c| format_number(trace.probes[c][k])));
        if opts.mode {
            row.push(trace.modes[k].to_string());
        }
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| to_err(e.into()))?;
    Ok(())
}

pub fn write_csv(trace: &SimTrace, path: &Path, opts: &CsvOptions) -> Result<(), CsvError> {
    let file = std::fs::File::create(path).map_err(|source| CsvError::Io {
        path: path.into(),
        source,
    })?;
    write_csv_to(trace, opts, io::BufWriter::new(file)).map_err(|e| match e {
        CsvError::Csv { source, .. } => CsvError::Csv {
            path: path.into(),
            source,
        },
        other => other,
    })
}

/// Numeric columns of a trace CSV. A `mode` column is skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }
}

pub fn read_csv(path: &Path) -> Result<Table, CsvError> {
    let file = std::fs::File::open(path).map_err(|source| CsvError::Io {
        path: path.into(),
        source,
    })?;
    read_csv_from(file, path)
}

pub fn read_csv_from<R: io::Read>(input: R, path: &Path) -> Result<Table, CsvError> {
    let malformed = |line: u64, message: String| CsvError::Malformed {
        path: path.into(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = r.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(malformed(1, "missing header".into()));
    }
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| &headers[i] != "mode").collect();
    let mut table = Table {
        names: keep.iter().map(|&i| headers[i].to_string()).collect(),
        columns: vec![Vec::new(); keep.len()],
    };
    for record in r.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, &i) in keep.iter().enumerate() {
            let cell = &record[i];
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| malformed(line, format!("`{cell}` in column `{}` is not a number", &headers[i])))?;
            table.columns[col].push(v);
        }
    }
    Ok(table)
}
