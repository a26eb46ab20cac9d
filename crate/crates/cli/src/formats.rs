//! Indicator and softmax CSV files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use safety_evidence::indicator::IndicatorMatrix;
use safety_evidence::softmax::SoftmaxTensor;

use crate::error::{CliError, CliResult};

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input)
}

fn csv_writer<W: Write>(output: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(output)
}

/// Translate a csv crate error into a located format or I/O error.
fn csv_error(path: &Path, err: csv::Error) -> CliError {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CliError::io(path, e),
        csv::ErrorKind::UnequalLengths {
            expected_len,
            len,
            pos,
        } => CliError::format(
            path,
            pos.map_or(line, |p| p.line()),
            len as usize + 1,
            format!("ragged row: {len} fields, header has {expected_len}"),
        ),
        csv::ErrorKind::Utf8 { pos, err } => CliError::format(
            path,
            pos.map_or(line, |p| p.line()),
            err.field() + 1,
            "invalid UTF-8",
        ),
        other => CliError::format(path, line, 0, format!("{other:?}")),
    }
}

fn write_error(path: &Path, err: csv::Error) -> CliError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CliError::io(path, e),
        other => CliError::format(path, 0, 0, format!("{other:?}")),
    }
}

fn check_first_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> CliResult<()> {
    for (col, name) in expected.iter().enumerate() {
        if header.get(col) != Some(*name) {
            return Err(CliError::format(
                path,
                1,
                col + 1,
                format!("header column {} must be `{name}`", col + 1),
            ));
        }
    }
    Ok(())
}

/// Parse an indicator CSV from any reader; `path` is only used in errors.
pub fn parse_indicators<R: Read>(input: R, path: &Path) -> CliResult<IndicatorMatrix> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_first_header(path, &header, &["sample_id"])?;
    let models: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if models.is_empty() {
        return Err(CliError::format(path, 1, 2, "no model columns"));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        ids.push(record[0].to_string());
        for (col, cell) in record.iter().enumerate().skip(1) {
            values.push(match cell {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(CliError::format(
                        path,
                        line,
                        col + 1,
                        format!("indicator must be 0 or 1, found `{other}`"),
                    ))
                }
            });
        }
    }
    if ids.is_empty() {
        return Err(CliError::format(path, 2, 0, "no data rows"));
    }
    Ok(IndicatorMatrix::new(values, models, Some(ids))?)
}

pub fn read_indicators(path: &Path) -> CliResult<IndicatorMatrix> {
    parse_indicators(open(path)?, path)
}

/// Row ids of a matrix, falling back to the row index.
fn sample_id(ids: Option<&[String]>, row: usize) -> String {
    ids.map_or_else(|| row.to_string(), |ids| ids[row].clone())
}

pub fn render_indicators<W: Write>(m: &IndicatorMatrix, output: W, path: &Path) -> CliResult<()> {
    let mut w = csv_writer(output);
    let mut header = vec!["sample_id".to_string()];
    header.extend(m.model_names().iter().cloned());
    w.write_record(&header).map_err(|e| write_error(path, e))?;
    let ids = m.sample_ids();
    let mut fields: Vec<String> = Vec::with_capacity(m.n_models() + 1);
    for (s, row) in m.rows().enumerate() {
        fields.clear();
        fields.push(sample_id(ids, s));
        fields.extend(
            row.iter()
                .map(|v| if *v == 1 { "1" } else { "0" }.to_string()),
        );
        w.write_record(&fields).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_indicators(m: &IndicatorMatrix, path: &Path) -> CliResult<()> {
    render_indicators(m, create(path)?, path)
}

/// Split `<model>_<class>` at the last underscore.
fn split_column(name: &str) -> Option<(&str, usize)> {
    let (model, class) = name.rsplit_once('_')?;
    Some((model, class.parse().ok()?))
}

pub fn parse_softmax<R: Read>(input: R, path: &Path) -> CliResult<SoftmaxTensor> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_first_header(path, &header, &["sample_id", "label"])?;

    // Columns must come grouped by model with classes 0..C in order.
    let mut models: Vec<String> = Vec::new();
    for (idx, name) in header.iter().enumerate().skip(2) {
        let (model, _) = split_column(name).ok_or_else(|| {
            CliError::format(
                path,
                1,
                idx + 1,
                format!("column `{name}` is not `<model>_<class>`"),
            )
        })?;
        if models.last().map(String::as_str) != Some(model) {
            models.push(model.to_string());
        }
    }
    let n_cols = header.len() - 2;
    if models.is_empty() {
        return Err(CliError::format(path, 1, 3, "no probability columns"));
    }
    let n_classes = n_cols / models.len();
    if n_classes < 2 || n_cols != models.len() * n_classes {
        return Err(CliError::format(
            path,
            1,
            0,
            "every model needs the same number (at least 2) of classes",
        ));
    }
    for (idx, name) in header.iter().enumerate().skip(2) {
        let (model, class) = split_column(name).expect("checked above");
        let m = (idx - 2) / n_classes;
        if model != models[m] || class != (idx - 2) % n_classes {
            return Err(CliError::format(
                path,
                1,
                idx + 1,
                format!("column `{name}` is out of order"),
            ));
        }
    }

    let mut labels = Vec::new();
    let mut probabilities = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        let label: usize = record[1]
            .parse()
            .ok()
            .filter(|&y| y < n_classes)
            .ok_or_else(|| {
                CliError::format(
                    path,
                    line,
                    2,
                    format!("`{}` is not a class index", &record[1]),
                )
            })?;
        labels.push(label);
        let start = probabilities.len();
        for (col, cell) in record.iter().enumerate().skip(2) {
            let p: f64 = cell
                .parse()
                .ok()
                .filter(|p: &f64| p.is_finite() && *p >= 0.0)
                .ok_or_else(|| {
                    CliError::format(
                        path,
                        line,
                        col + 1,
                        format!("`{cell}` is not a probability"),
                    )
                })?;
            probabilities.push(p);
        }
        for (m, row) in probabilities[start..].chunks_exact(n_classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > safety_evidence::softmax::ROW_SUM_TOLERANCE {
                return Err(CliError::format(
                    path,
                    line,
                    3 + m * n_classes,
                    format!("probabilities of model `{}` sum to {sum}", models[m]),
                ));
            }
        }
    }
    if labels.is_empty() {
        return Err(CliError::format(path, 2, 0, "no data rows"));
    }
    Ok(SoftmaxTensor::new(
        probabilities,
        labels,
        models,
        n_classes,
    )?)
}

pub fn read_softmax(path: &Path) -> CliResult<SoftmaxTensor> {
    parse_softmax(open(path)?, path)
}

pub fn render_softmax<W: Write>(t: &SoftmaxTensor, output: W, path: &Path) -> CliResult<()> {
    let mut w = csv_writer(output);
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    for name in t.model_names() {
        header.extend((0..t.n_classes()).map(|c| format!("{name}_{c}")));
    }
    w.write_record(&header).map_err(|e| write_error(path, e))?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for s in 0..t.n_samples() {
        fields.clear();
        fields.push(s.to_string());
        fields.push(t.labels()[s].to_string());
        for m in 0..t.n_models() {
            fields.extend(t.row(s, m).iter().map(|p| p.to_string()));
        }
        w.write_record(&fields).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_softmax(t: &SoftmaxTensor, path: &Path) -> CliResult<()> {
    render_softmax(t, create(path)?, path)
}
