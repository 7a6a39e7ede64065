//! CSV ingestion and export of unit-level and area-level data.

use std::io::{Read, Write};
use std::path::Path;

use maxspi::{BlockLmmData, ClusterBlock, ModelKind};
use nalgebra::DMatrix;

use crate::error::CliError;

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn parse_cell(value: &str, row: usize, column: &str) -> Result<f64, CliError> {
    let v: f64 = value.parse().map_err(|_| CliError::Parse {
        row,
        column: column.to_string(),
        message: format!("`{value}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(CliError::Parse {
            row,
            column: column.to_string(),
            message: format!("`{value}` is not finite"),
        });
    }
    Ok(v)
}

struct Table {
    header: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_table<R: Read>(mut reader: csv::Reader<R>, source: &str) -> Result<Table, CliError> {
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Parse {
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(CliError::EmptyFile(source.to_string()));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // 1-based line numbers, header on line 1
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Parse {
            row: line,
            column: String::new(),
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(CliError::Parse {
                row: line,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        rows.push((line, rec));
    }
    if rows.is_empty() {
        return Err(CliError::EmptyFile(source.to_string()));
    }
    Ok(Table { header, rows })
}

fn expect_column(header: &[String], idx: usize, name: &str) -> Result<(), CliError> {
    match header.get(idx) {
        Some(h) if h == name => Ok(()),
        other => Err(CliError::Parse {
            row: 1,
            column: other.cloned().unwrap_or_default(),
            message: format!("expected column {} to be `{name}`", idx + 1),
        }),
    }
}

struct Grouped {
    ids: Vec<String>,
    y: Vec<Vec<f64>>,
    x: Vec<Vec<Vec<f64>>>,
    extra: Vec<Vec<f64>>,
}

/// Groups rows by the first column in order of first appearance.
fn group(table: &Table, n_cov: usize, has_extra: bool) -> Result<Grouped, CliError> {
    let mut g = Grouped {
        ids: Vec::new(),
        y: Vec::new(),
        x: Vec::new(),
        extra: Vec::new(),
    };
    let mut index = std::collections::HashMap::new();
    for (line, rec) in &table.rows {
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(CliError::Parse {
                row: *line,
                column: table.header[0].clone(),
                message: "empty identifier".into(),
            });
        }
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            g.ids.push(id);
            g.y.push(Vec::new());
            g.x.push(Vec::new());
            g.extra.push(Vec::new());
            g.ids.len() - 1
        });
        g.y[slot].push(parse_cell(&rec[1], *line, &table.header[1])?);
        let mut row = Vec::with_capacity(n_cov + 1);
        row.push(1.0);
        for j in 0..n_cov {
            row.push(parse_cell(&rec[2 + j], *line, &table.header[2 + j])?);
        }
        g.x[slot].push(row);
        if has_extra {
            let col = 2 + n_cov;
            g.extra[slot].push(parse_cell(&rec[col], *line, &table.header[col])?);
        }
    }
    Ok(g)
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows[0].len();
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn unit_data_from_reader<R: Read>(reader: csv::Reader<R>, source: &str) -> Result<BlockLmmData, CliError> {
    let table = read_table(reader, source)?;
    expect_column(&table.header, 0, "cluster")?;
    expect_column(&table.header, 1, "y")?;
    if table.header.len() < 3 {
        return Err(CliError::Parse {
            row: 1,
            column: String::new(),
            message: "at least one covariate column is required".into(),
        });
    }
    let n_cov = table.header.len() - 2;
    let g = group(&table, n_cov, false)?;
    let clusters = g
        .ids
        .into_iter()
        .zip(g.y)
        .zip(g.x)
        .map(|((id, y), x)| ClusterBlock::new(id, y, to_matrix(&x)))
        .collect();
    Ok(BlockLmmData::new(ModelKind::Nerm, clusters)?)
}

/// Reads `cluster,y,x1,...,xp`; an intercept column is prepended.
pub fn ingest_unit_csv(path: &Path) -> Result<BlockLmmData, CliError> {
    unit_data_from_reader(open(path)?, &path.display().to_string())
}

pub fn ingest_unit_str(text: &str) -> Result<BlockLmmData, CliError> {
    let reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    unit_data_from_reader(reader, "<input>")
}

fn area_data_from_reader<R: Read>(reader: csv::Reader<R>, source: &str) -> Result<BlockLmmData, CliError> {
    let table = read_table(reader, source)?;
    expect_column(&table.header, 0, "area")?;
    expect_column(&table.header, 1, "y")?;
    let last = table.header.len().saturating_sub(1);
    if table.header.len() < 4 {
        return Err(CliError::Parse {
            row: 1,
            column: String::new(),
            message: "expected area,y,x1,...,xp,error_var".into(),
        });
    }
    expect_column(&table.header, last, "error_var")?;
    let n_cov = table.header.len() - 3;
    let g = group(&table, n_cov, true)?;
    let mut clusters = Vec::with_capacity(g.ids.len());
    for (((id, y), x), ev) in g.ids.into_iter().zip(g.y).zip(g.x).zip(g.extra) {
        if y.len() != 1 {
            return Err(CliError::Parse {
                row: 0,
                column: "area".into(),
                message: format!("area `{id}` appears {} times", y.len()),
            });
        }
        clusters.push(ClusterBlock::new(id, y, to_matrix(&x)).with_error_var(ev[0]));
    }
    Ok(BlockLmmData::new(ModelKind::Fhm, clusters)?)
}

/// Reads `area,y,x1,...,xp,error_var`, one row per area.
pub fn ingest_area_csv(path: &Path) -> Result<BlockLmmData, CliError> {
    area_data_from_reader(open(path)?, &path.display().to_string())
}

pub fn ingest_area_str(text: &str) -> Result<BlockLmmData, CliError> {
    let reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    area_data_from_reader(reader, "<input>")
}

/// Writes data in the format read by [`ingest_unit_csv`] or
/// [`ingest_area_csv`], dropping the intercept. Values use the shortest
/// representation that round-trips.
pub fn write_data_csv<W: Write>(data: &BlockLmmData, y: Option<&[f64]>, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let p = data.p();
    let mut header = vec![
        match data.model() {
            ModelKind::Nerm => "cluster".to_string(),
            ModelKind::Fhm => "area".to_string(),
        },
        "y".to_string(),
    ];
    header.extend((1..=p).map(|j| format!("x{j}")));
    if data.model() == ModelKind::Fhm {
        header.push("error_var".into());
    }
    let io = |e: csv::Error| CliError::Io {
        path: "<output>".into(),
        message: e.to_string(),
    };
    w.write_record(&header).map_err(io)?;
    let mut row_idx = 0;
    for c in data.clusters() {
        for i in 0..c.n() {
            let yv = y.map(|y| y[row_idx]).unwrap_or(c.y[i]);
            row_idx += 1;
            let mut rec = vec![c.id.clone(), yv.to_string()];
            rec.extend((1..=p).map(|j| c.x[(i, j)].to_string()));
            if let Some(ev) = c.error_var {
                rec.push(ev.to_string());
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Io {
        path: "<output>".into(),
        message: e.to_string(),
    })?;
    Ok(())
}

/// All numbers of a headerless CSV, row by row.
pub fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Parse {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, v)| parse_cell(v, i + 1, &format!("{}", j + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(CliError::EmptyFile(path.display().to_string()));
    }
    Ok(rows)
}
