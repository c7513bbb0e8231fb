use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::PredictorDomain;

/// Observations on the kernel scale: continuous predictors in `[0, 1]`,
/// discrete predictors as level codes `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    d: usize,
    /// Row-major `n × d`.
    x: Vec<f64>,
    y: Vec<f64>,
    domains: Vec<PredictorDomain>,
}

impl Dataset {
    /// Builds a dataset from rows that are already on the kernel scale.
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>, domains: Vec<PredictorDomain>) -> Result<Self> {
        let d = domains.len();
        if rows.len() != y.len() {
            return Err(Error::invalid(format!(
                "{} predictor rows but {} responses",
                rows.len(),
                y.len()
            )));
        }
        let mut x = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invalid(format!(
                    "row {} has {} values, expected {d}",
                    i + 1,
                    row.len()
                )));
            }
            for (v, dom) in row.iter().zip(&domains) {
                dom.check_scaled(*v)
                    .map_err(|e| Error::Domain(format!("row {}: {e}", i + 1)))?;
            }
            x.extend_from_slice(row);
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("response at row {} is not finite", i + 1)));
        }
        Ok(Dataset {
            n: y.len(),
            d,
            x,
            y,
            domains,
        })
    }

    /// Builds a dataset from raw values, rescaling continuous predictors with
    /// their domain's stored range.
    pub fn from_raw(rows: Vec<Vec<f64>>, y: Vec<f64>, domains: Vec<PredictorDomain>) -> Result<Self> {
        let scaled = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .zip(&domains)
                    .map(|(&v, dom)| match dom.scale(v) {
                        Ok((s, false)) => Ok(s),
                        Ok((_, true)) => Err(Error::Domain(format!(
                            "row {}: value {v} outside the declared range",
                            i + 1
                        ))),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(scaled, y, domains)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn n_predictors(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn domains(&self) -> &[PredictorDomain] {
        &self.domains
    }

    /// The rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            n: indices.len(),
            d: self.d,
            x,
            y,
            domains: self.domains.clone(),
        }
    }

    /// Same predictors with a different response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.n {
            return Err(Error::invalid(format!(
                "response has {} values, dataset has {} rows",
                y.len(),
                self.n
            )));
        }
        Ok(Dataset { y, ..self.clone() })
    }
}
