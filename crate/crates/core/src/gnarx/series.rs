use std::ops::Range;

use crate::error::{Error, Result};

/// Dense node-by-time matrix with explicitly missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<Option<f64>>,
}

impl Panel {
    pub fn missing(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            cells: vec![None; n_rows * n_cols],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            cells: vec![Some(0.0); n_rows * n_cols],
        }
    }

    /// Non-finite inputs become missing cells.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let opt: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| v.is_finite().then_some(v)).collect())
            .collect();
        Self::from_optional_rows(&opt)
    }

    pub fn from_optional_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} columns, expected {n_cols}",
                r.len()
            )));
        }
        let cells = rows
            .iter()
            .flatten()
            .map(|v| v.filter(|x| x.is_finite()))
            .collect();
        Ok(Self {
            n_rows,
            n_cols,
            cells,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.n_cols + col]
    }

    /// Stores `value`; non-finite values are stored as missing.
    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        self.cells[row * self.n_cols + col] = value.filter(|v| v.is_finite());
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        &self.cells[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn slice_cols(&self, cols: Range<usize>) -> Result<Panel> {
        if cols.end > self.n_cols || cols.start > cols.end {
            return Err(Error::DimensionMismatch(format!(
                "column range {cols:?} outside 0..{}",
                self.n_cols
            )));
        }
        let rows: Vec<Vec<Option<f64>>> = (0..self.n_rows)
            .map(|r| self.row(r)[cols.clone()].to_vec())
            .collect();
        let mut p = Panel::from_optional_rows(&rows)?;
        p.n_cols = cols.len();
        Ok(p)
    }

    pub fn count_missing(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }
}

/// Observations of the edge processes, one row per (line-graph) node, plus
/// any number of exogenous covariate panels with identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TenSeries {
    values: Panel,
    covariates: Vec<Panel>,
    labels: Vec<String>,
}

impl TenSeries {
    pub fn new(values: Panel, covariates: Vec<Panel>, labels: Vec<String>) -> Result<Self> {
        for (h, z) in covariates.iter().enumerate() {
            if z.n_rows() != values.n_rows() || z.n_cols() != values.n_cols() {
                return Err(Error::DimensionMismatch(format!(
                    "covariate {} is {}x{}, values are {}x{}",
                    h + 1,
                    z.n_rows(),
                    z.n_cols(),
                    values.n_rows(),
                    values.n_cols()
                )));
            }
        }
        if labels.len() != values.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} flows",
                labels.len(),
                values.n_rows()
            )));
        }
        Ok(Self {
            values,
            covariates,
            labels,
        })
    }

    /// Labels flows `0..n` by their index.
    pub fn unlabelled(values: Panel, covariates: Vec<Panel>) -> Result<Self> {
        let labels = (0..values.n_rows()).map(|i| i.to_string()).collect();
        Self::new(values, covariates, labels)
    }

    pub fn values(&self) -> &Panel {
        &self.values
    }

    pub fn covariates(&self) -> &[Panel] {
        &self.covariates
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_flows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_times(&self) -> usize {
        self.values.n_cols()
    }

    #[inline]
    pub fn value(&self, flow: usize, t: usize) -> Option<f64> {
        self.values.get(flow, t)
    }

    #[inline]
    pub fn covariate(&self, h: usize, flow: usize, t: usize) -> Option<f64> {
        self.covariates[h].get(flow, t)
    }

    pub fn slice_time(&self, t: Range<usize>) -> Result<TenSeries> {
        let values = self.values.slice_cols(t.clone())?;
        let covariates = self
            .covariates
            .iter()
            .map(|z| z.slice_cols(t.clone()))
            .collect::<Result<_>>()?;
        TenSeries::new(values, covariates, self.labels.clone())
    }
}
