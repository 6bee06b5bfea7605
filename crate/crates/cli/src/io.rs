//! CSV ingestion and fixed-precision output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tensordens::posterior::Dataset;

use crate::error::CliError;

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Data rows tagged with their line number.
type Rows = Vec<(u64, Vec<String>)>;

fn read_records(path: &Path) -> Result<(Vec<String>, Rows), CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: cannot read header: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Input(format!("{}: missing header row", path.display())));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    Ok((headers, rows))
}

fn parse_unit(path: &Path, line: u64, column: &str, text: &str) -> Result<f64, CliError> {
    let v: f64 = text.parse().map_err(|_| {
        CliError::Input(format!(
            "{}: line {line}: column {column}: {text:?} is not a number",
            path.display()
        ))
    })?;
    if !(v > 0.0 && v < 1.0) {
        return Err(CliError::Input(format!(
            "{}: line {line}: column {column}: {v} is outside (0,1)",
            path.display()
        )));
    }
    Ok(v)
}

fn expect_x_columns(path: &Path, names: &[String]) -> Result<usize, CliError> {
    for (k, name) in names.iter().enumerate() {
        if *name != format!("x{}", k + 1) {
            return Err(CliError::Input(format!(
                "{}: expected column x{} in the header, found {name:?}",
                path.display(),
                k + 1
            )));
        }
    }
    if names.is_empty() {
        return Err(CliError::Input(format!("{}: no covariate columns", path.display())));
    }
    Ok(names.len())
}

/// Reads a `y,x1,…,xp` data file.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let (headers, rows) = read_records(path)?;
    if headers.first().map(String::as_str) != Some("y") {
        return Err(CliError::Input(format!(
            "{}: the first column must be y",
            path.display()
        )));
    }
    let p = expect_x_columns(path, &headers[1..])?;
    let mut x = Vec::with_capacity(rows.len() * p);
    let mut y = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.len() != p + 1 {
            return Err(CliError::Input(format!(
                "{}: line {line}: expected {} fields, found {}",
                path.display(),
                p + 1,
                row.len()
            )));
        }
        y.push(parse_unit(path, line, "y", &row[0])?);
        for (k, text) in row[1..].iter().enumerate() {
            x.push(parse_unit(path, line, &headers[k + 1], text)?);
        }
    }
    Ok(Dataset::new(x, y, p)?)
}

/// Query covariates and, when the file has a `y` column, query responses.
pub struct Queries {
    pub x: Vec<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

/// Reads a query file with columns `x1,…,xp` and an optional `y`.
pub fn read_queries(path: &Path) -> Result<Queries, CliError> {
    let (headers, rows) = read_records(path)?;
    let y_col = headers.iter().position(|h| h == "y");
    let x_names: Vec<String> = headers.iter().filter(|h| *h != "y").cloned().collect();
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&i| Some(i) != y_col).collect();
    expect_x_columns(path, &x_names)?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.len() != headers.len() {
            return Err(CliError::Input(format!(
                "{}: line {line}: expected {} fields, found {}",
                path.display(),
                headers.len(),
                row.len()
            )));
        }
        let x = x_cols
            .iter()
            .map(|&i| parse_unit(path, line, &headers[i], &row[i]))
            .collect::<Result<Vec<f64>, _>>()?;
        xs.push(x);
        if let Some(i) = y_col {
            ys.push(parse_unit(path, line, "y", &row[i])?);
        }
    }
    Ok(Queries {
        x: xs,
        y: y_col.map(|_| ys),
    })
}

/// Writes `dataset` as `y,x1,…,xp`.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut out = String::new();
    out.push('y');
    for k in 1..=data.p() {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(&fmt_f64(data.y()[i]));
        for &v in data.x(i) {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(bytes).map_err(io_err)?;
    file.flush().map_err(io_err)
}

/// JSON formatter printing every float with 17 significant digits.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with fixed-precision floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Input(format!("cannot serialize results: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}
