//! CSV ingestion: parsing, domain inference, level coding and scaling.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ssanova::{Dataset, PredictorDomain};

use crate::error::{CliError, CliResult, Stage};

/// Integer-valued columns with at most this many distinct values are
/// treated as discrete.
pub const MAX_INFERRED_LEVELS: usize = 20;

/// A numeric CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Reads a CSV file whose cells are all numeric. A file without any content
/// yields a table with no headers. Rows are numbered from 1, not counting
/// the header.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::io(path, e))?;
    parse_table(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_table(text: &str) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Ok(Table { headers: Vec::new(), rows: Vec::new() });
    }
    let mut seen = BTreeSet::new();
    for h in &headers {
        if h.is_empty() {
            return Err(CliError::input("header has an empty column name"));
        }
        if !seen.insert(h.as_str()) {
            return Err(CliError::input(format!("duplicate column '{h}'")));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| CliError::input(format!("row {row_no}: {e}")))?;
        if record.len() > headers.len() {
            return Err(CliError::input(format!(
                "row {row_no} has {} cells but the header has {}",
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(headers.len());
        for (j, name) in headers.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            if is_missing(cell) {
                return Err(CliError::input(format!("row {row_no}: missing value in column '{name}'")));
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::input(format!(
                        "row {row_no}: value '{cell}' in column '{name}' is not numeric"
                    )))
                }
            }
        }
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

/// Forced domain kinds for named columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DomainOverrides {
    pub discrete: Vec<String>,
    pub continuous: Vec<String>,
}

/// A predictor column with its domain. Discrete columns keep the sorted raw
/// values; the value at position `k` is coded as level `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub name: String,
    pub domain: PredictorDomain,
    pub levels: Option<Vec<f64>>,
}

impl Predictor {
    /// Maps a raw value onto the scale `PredictorDomain::scale` expects.
    pub fn code(&self, raw: f64) -> Option<f64> {
        match &self.levels {
            None => Some(raw),
            Some(levels) => levels.iter().position(|&l| l == raw).map(|k| (k + 1) as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub response: String,
    pub predictors: Vec<Predictor>,
    pub dataset: Dataset,
}

fn is_discrete_like(values: &[f64]) -> bool {
    if !values.iter().all(|v| v.fract() == 0.0) {
        return false;
    }
    let distinct = distinct_sorted(values).len();
    distinct <= MAX_INFERRED_LEVELS && distinct < values.len()
}

fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Builds a dataset from `table`.
///
/// `predictors` selects and orders the predictor columns; by default every
/// column except the response is used. Continuous columns are scaled to
/// `[0, 1]` by their observed range. A column is discrete when it is
/// integer-valued with at most 20 distinct values, some of which repeat,
/// unless an override says otherwise.
pub fn ingest(
    table: &Table,
    response: &str,
    predictors: Option<&[String]>,
    overrides: &DomainOverrides,
) -> CliResult<Ingested> {
    if table.headers.is_empty() {
        return Err(CliError::input("input file is empty"));
    }
    if table.rows.is_empty() {
        return Err(CliError::input("input file has no data rows"));
    }
    let y_col = table
        .column_index(response)
        .ok_or_else(|| CliError::input(format!("response column '{response}' not found")))?;
    let names: Vec<String> = match predictors {
        Some(list) => list.to_vec(),
        None => table.headers.iter().filter(|h| *h != response).cloned().collect(),
    };
    if names.is_empty() {
        return Err(CliError::input("no predictor columns"));
    }
    for name in overrides.discrete.iter().chain(&overrides.continuous) {
        if !names.contains(name) {
            return Err(CliError::input(format!("override names unknown predictor '{name}'")));
        }
        if overrides.discrete.contains(name) && overrides.continuous.contains(name) {
            return Err(CliError::input(format!("'{name}' is forced both discrete and continuous")));
        }
    }

    let mut cols = Vec::with_capacity(names.len());
    let mut preds = Vec::with_capacity(names.len());
    for name in &names {
        if name == response {
            return Err(CliError::input(format!("'{name}' is both response and predictor")));
        }
        let j = table
            .column_index(name)
            .ok_or_else(|| CliError::input(format!("predictor column '{name}' not found")))?;
        let values = table.column(j);
        let discrete = if overrides.discrete.contains(name) {
            true
        } else if overrides.continuous.contains(name) {
            false
        } else {
            is_discrete_like(&values)
        };
        let pred = if discrete {
            let levels = distinct_sorted(&values);
            let domain = PredictorDomain::discrete(levels.len())
                .map_err(|_| CliError::input(format!("discrete column '{name}' has a single level")))?;
            Predictor { name: name.clone(), domain, levels: Some(levels) }
        } else {
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let domain = PredictorDomain::continuous(min, max)
                .map_err(|_| CliError::input(format!("continuous column '{name}' is constant")))?;
            Predictor { name: name.clone(), domain, levels: None }
        };
        cols.push(j);
        preds.push(pred);
    }

    let rows: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| {
            cols.iter()
                .zip(&preds)
                .map(|(&j, p)| p.code(r[j]).expect("levels cover the training values"))
                .collect()
        })
        .collect();
    let y = table.column(y_col);
    let domains = preds.iter().map(|p| p.domain.clone()).collect();
    let dataset = Dataset::from_raw(rows, y, domains).stage("ingest")?;
    Ok(Ingested { response: response.to_string(), predictors: preds, dataset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Table {
        parse_table(text).unwrap()
    }

    #[test]
    fn scales_continuous_columns() {
        let t = table("x,y\n0,1\n5,2\n10,3\n");
        let ing = ingest(&t, "y", None, &DomainOverrides::default()).unwrap();
        let xs: Vec<f64> = (0..3).map(|i| ing.dataset.row(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(ing.predictors[0].domain, PredictorDomain::Continuous { min: 0.0, max: 10.0 });
    }

    #[test]
    fn infers_discrete_columns() {
        let t = table("g,y\n1,0.1\n2,0.2\n1,0.3\n2,0.4\n");
        let ing = ingest(&t, "y", None, &DomainOverrides::default()).unwrap();
        assert_eq!(ing.predictors[0].domain, PredictorDomain::Discrete { levels: 2 });
        assert_eq!(ing.predictors[0].levels, Some(vec![1.0, 2.0]));
    }

    #[test]
    fn codes_arbitrary_levels() {
        let t = table("g,y\n7,0\n-3,1\n7,2\n10,3\n");
        let ing = ingest(&t, "y", None, &DomainOverrides::default()).unwrap();
        let codes: Vec<f64> = (0..4).map(|i| ing.dataset.row(i)[0]).collect();
        assert_eq!(codes, vec![2.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn overrides_win() {
        let t = table("g,y\n1,0.1\n2,0.2\n1,0.3\n2,0.4\n");
        let ov = DomainOverrides { continuous: vec!["g".into()], ..Default::default() };
        let ing = ingest(&t, "y", None, &ov).unwrap();
        assert!(!ing.predictors[0].domain.is_discrete());
        let ov = DomainOverrides { discrete: vec!["h".into()], ..Default::default() };
        assert!(ingest(&t, "y", None, &ov).is_err());
    }

    #[test]
    fn many_integer_levels_stay_continuous() {
        let mut text = String::from("x,y\n");
        for i in 0..50 {
            text.push_str(&format!("{},{}\n", i % 25, i));
        }
        let ing = ingest(&table(&text), "y", None, &DomainOverrides::default()).unwrap();
        assert!(!ing.predictors[0].domain.is_discrete());
    }

    #[test]
    fn missing_cells_name_the_row() {
        let mut text = String::from("x,y\n");
        for i in 0..10 {
            if i == 6 {
                text.push_str("0.5,\n");
            } else {
                text.push_str(&format!("{},{}\n", i as f64 / 10.0, i));
            }
        }
        let err = parse_table(&text).unwrap_err().to_string();
        assert!(err.contains("row 7"), "{err}");
        let err = parse_table("x,y\n1,2\n3\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_table("x,y\n1,abc\n").is_err());
        assert!(parse_table("x,y\n1,inf\n").is_err());
        assert!(parse_table("x,x\n1,2\n").is_err());
        let empty = table("");
        assert!(empty.headers.is_empty());
        assert!(ingest(&empty, "y", None, &DomainOverrides::default()).is_err());
        let t = table("x,z\n1,2\n2,3\n3,1\n");
        let err = ingest(&t, "y", None, &DomainOverrides::default()).unwrap_err().to_string();
        assert!(err.contains("'y'"), "{err}");
        let t = table("x,y\n1,2\n1,3\n");
        assert!(ingest(&t, "y", None, &DomainOverrides::default()).is_err());
    }

    #[test]
    fn predictor_selection_orders_columns() {
        let t = table("a,b,y\n0,10,1\n1,20,2\n0.5,30,3\n");
        let list = vec!["b".to_string(), "a".to_string()];
        let ing = ingest(&t, "y", Some(&list), &DomainOverrides::default()).unwrap();
        assert_eq!(ing.predictors[0].name, "b");
        assert_eq!(ing.dataset.row(1), &[0.5, 1.0]);
    }
}
