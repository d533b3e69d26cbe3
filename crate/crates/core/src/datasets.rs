//! Embedded example datasets and CSV ingestion.
//!
//! Every CSV must start with a header row. Row numbers in error messages
//! count data rows from 1 (the header is row 0); column numbers count from 1.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::regression::RegressionData;

const SHOSHONI_CSV: &str = include_str!("../data/shoshoni.csv");
const DROSOPHILA_CSV: &str = include_str!("../data/drosophila.csv");
const HOMICIDE_CSV: &str = include_str!("../data/homicide.csv");
const TELEPHONE_CSV: &str = include_str!("../data/telephone.csv");
const STARS_CSV: &str = include_str!("../data/stars.csv");
const ALCOHOL_CSV: &str = include_str!("../data/alcohol.csv");

/// Names accepted by [`embedded`].
pub const EMBEDDED: [&str; 6] = ["shoshoni", "drosophila", "homicide", "telephone", "stars", "alcohol"];

/// How to read a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetKind {
    /// One numeric column (the named one, or the first column).
    Univariate { column: Option<String> },
    /// A value column and a nonnegative integer count column.
    Frequencies { value: String, count: String },
    /// A response column and predictor columns; an intercept is prepended.
    /// With `predictors: None` every other column that parses as numeric in
    /// all rows is used, except columns named in `ignore`.
    Regression { response: String, predictors: Option<Vec<String>>, ignore: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetValues {
    Sample(Vec<f64>),
    Frequencies { values: Vec<f64>, counts: Vec<u64> },
    Regression(RegressionData),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub values: DatasetValues,
    /// Number of data rows in the source.
    pub rows: usize,
    /// Columns actually used, in order.
    pub columns: Vec<String>,
    pub provenance: String,
}

impl Dataset {
    /// The observations as an i.i.d. sample (frequencies are expanded).
    pub fn sample(&self) -> Option<Vec<f64>> {
        match &self.values {
            DatasetValues::Sample(v) => Some(v.clone()),
            DatasetValues::Frequencies { values, counts } => Some(
                values
                    .iter()
                    .zip(counts)
                    .flat_map(|(&v, &c)| std::iter::repeat_n(v, c as usize))
                    .collect(),
            ),
            DatasetValues::Regression(_) => None,
        }
    }

    pub fn regression(&self) -> Option<&RegressionData> {
        match &self.values {
            DatasetValues::Regression(r) => Some(r),
            _ => None,
        }
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        match &self.values {
            DatasetValues::Sample(v) => v.len(),
            DatasetValues::Frequencies { counts, .. } => counts.iter().sum::<u64>() as usize,
            DatasetValues::Regression(r) => r.n(),
        }
    }
}

struct Table {
    headers: Vec<String>,
    cells: Vec<Vec<String>>,
}

fn read_table(source: &str, reader: impl std::io::Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv { path: source.into(), row: 0, column: 0, message: e.to_string() })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Csv { path: source.into(), row: 0, column: 0, message: "missing header row".into() });
    }
    let mut cells = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv { path: source.into(), row: i + 1, column: 0, message: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::Csv {
                path: source.into(),
                row: i + 1,
                column: rec.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        cells.push(rec.iter().map(|s| s.to_string()).collect());
    }
    if cells.is_empty() {
        return Err(Error::Csv { path: source.into(), row: 1, column: 0, message: "file has a header but no data rows".into() });
    }
    Ok(Table { headers, cells })
}

impl Table {
    fn column_index(&self, source: &str, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
            path: source.into(),
            row: 0,
            column: 0,
            message: format!("no column named '{name}' (columns: {})", self.headers.join(", ")),
        })
    }

    fn numeric_column(&self, source: &str, j: usize) -> Result<Vec<f64>> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[j].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Csv {
                    path: source.into(),
                    row: i + 1,
                    column: j + 1,
                    message: format!("non-numeric value '{}' in column '{}'", row[j], self.headers[j]),
                })
            })
            .collect()
    }

    fn is_numeric(&self, j: usize) -> bool {
        self.cells.iter().all(|row| row[j].parse::<f64>().is_ok_and(|v| v.is_finite()))
    }
}

fn build(name: &str, source: &str, table: Table, kind: &DatasetKind, provenance: &str) -> Result<Dataset> {
    let rows = table.cells.len();
    let (values, columns) = match kind {
        DatasetKind::Univariate { column } => {
            let j = match column {
                Some(c) => table.column_index(source, c)?,
                None => 0,
            };
            (DatasetValues::Sample(table.numeric_column(source, j)?), vec![table.headers[j].clone()])
        }
        DatasetKind::Frequencies { value, count } => {
            let jv = table.column_index(source, value)?;
            let jc = table.column_index(source, count)?;
            let values = table.numeric_column(source, jv)?;
            let raw = table.numeric_column(source, jc)?;
            let mut counts = Vec::with_capacity(raw.len());
            for (i, c) in raw.iter().enumerate() {
                if !(*c >= 0.0 && c.fract() == 0.0) {
                    return Err(Error::Csv {
                        path: source.into(),
                        row: i + 1,
                        column: jc + 1,
                        message: format!("count '{c}' is not a nonnegative integer"),
                    });
                }
                counts.push(*c as u64);
            }
            (DatasetValues::Frequencies { values, counts }, vec![value.clone(), count.clone()])
        }
        DatasetKind::Regression { response, predictors, ignore } => {
            let jy = table.column_index(source, response)?;
            let pred_idx: Vec<usize> = match predictors {
                Some(list) => list.iter().map(|p| table.column_index(source, p)).collect::<Result<_>>()?,
                None => (0..table.headers.len())
                    .filter(|&j| j != jy && !ignore.contains(&table.headers[j]) && table.is_numeric(j))
                    .collect(),
            };
            if pred_idx.is_empty() {
                return Err(Error::Data(format!("{source}: no predictor columns")));
            }
            let y = table.numeric_column(source, jy)?;
            let cols: Vec<Vec<f64>> = pred_idx.iter().map(|&j| table.numeric_column(source, j)).collect::<Result<_>>()?;
            let n = y.len();
            let mut design = DMatrix::from_element(n, cols.len() + 1, 1.0);
            for (k, c) in cols.iter().enumerate() {
                for i in 0..n {
                    design[(i, k + 1)] = c[i];
                }
            }
            let mut names = vec!["intercept".to_string()];
            names.extend(pred_idx.iter().map(|&j| table.headers[j].clone()));
            let mut used = names[1..].to_vec();
            used.push(response.clone());
            (DatasetValues::Regression(RegressionData::new(design, y, names)?), used)
        }
    };
    Ok(Dataset { name: name.into(), values, rows, columns, provenance: provenance.into() })
}

/// Reads a CSV file with a header row.
pub fn ingest_csv(path: &Path, kind: &DatasetKind) -> Result<Dataset> {
    let source = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: source.clone(), source: e })?;
    let table = read_table(&source, file)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    build(&name, &source, table, kind, "user-supplied file")
}

/// Parses CSV text already in memory.
pub fn parse_csv(name: &str, text: &str, kind: &DatasetKind, provenance: &str) -> Result<Dataset> {
    let table = read_table(name, text.as_bytes())?;
    build(name, name, table, kind, provenance)
}

/// Looks up an embedded dataset by name.
pub fn embedded(name: &str) -> Result<Dataset> {
    let regression = |response: &str, predictors: &[&str]| DatasetKind::Regression {
        response: response.into(),
        predictors: Some(predictors.iter().map(|s| s.to_string()).collect()),
        ignore: vec![],
    };
    match name {
        "shoshoni" => parse_csv(
            name,
            SHOSHONI_CSV,
            &DatasetKind::Univariate { column: Some("ratio".into()) },
            "Width-to-length ratios of 20 Shoshoni beaded rectangles.",
        ),
        "drosophila" => parse_csv(
            name,
            DROSOPHILA_CSV,
            &DatasetKind::Frequencies { value: "count".into(), count: "frequency".into() },
            "Recessive lethal daughter counts per father fly in a Drosophila mutagenicity assay (first experimental run).",
        ),
        "homicide" => parse_csv(
            name,
            HOMICIDE_CSV,
            &regression("rate", &["gdp"]),
            "APPROXIMATE: homicide rate vs GDP per capita for 23 Western countries, reconstructed from public \
             figures; not the exact published table, so fitted values differ from published ones.",
        ),
        "telephone" => parse_csv(
            name,
            TELEPHONE_CSV,
            &regression("calls", &["year"]),
            "Belgian international telephone calls (tens of millions), years 1950-1973.",
        ),
        "stars" => parse_csv(
            name,
            STARS_CSV,
            &regression("log_light", &["log_te"]),
            "Hertzsprung-Russell diagram of the star cluster CYG OB1 (47 stars).",
        ),
        "alcohol" => parse_csv(
            name,
            ALCOHOL_CSV,
            &regression("log_solubility", &["sag", "v", "mass"]),
            "Aqueous solubility of 44 aliphatic alcohols with solvent-accessible area, volume and mass \
             as predictors; transcribed from a public robust-statistics data collection.",
        ),
        other => Err(Error::Data(format!("unknown embedded dataset '{other}' (available: {})", EMBEDDED.join(", ")))),
    }
}

fn sample_of(name: &str) -> Vec<f64> {
    embedded(name).and_then(|d| d.sample().ok_or_else(|| Error::Data("not a sample".into()))).expect("embedded dataset parses")
}

fn regression_of(name: &str) -> RegressionData {
    embedded(name)
        .ok()
        .and_then(|d| d.regression().cloned())
        .expect("embedded dataset parses")
}

pub fn shoshoni() -> Vec<f64> {
    sample_of("shoshoni")
}

/// Drosophila counts expanded to one value per fly.
pub fn drosophila() -> Vec<f64> {
    sample_of("drosophila")
}

pub fn homicide() -> RegressionData {
    regression_of("homicide")
}

pub fn telephone() -> RegressionData {
    regression_of("telephone")
}

pub fn stars() -> RegressionData {
    regression_of("stars")
}

pub fn alcohol() -> RegressionData {
    regression_of("alcohol")
}

/// Formats a number so that it parses back to the identical `f64`.
pub fn format_lossless(x: f64) -> String {
    format!("{x:?}")
}
