use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{GnarxOrder, TenSeries};
use crate::error::{Error, Result};
use crate::graph::NeighbourhoodTable;

/// Stacked regression system, one row per usable `(node, t)`.
#[derive(Debug, Clone)]
pub struct Design {
    n_cols: usize,
    response: Vec<f64>,
    // row-major
    matrix: Vec<f64>,
    /// `(node, t)` of every retained row, in row order.
    pub rows: Vec<(usize, usize)>,
    /// `(node, t)` instances dropped because some input was missing.
    pub dropped: Vec<(usize, usize)>,
}

impl Design {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows(), self.n_cols, &self.matrix)
    }

    pub fn response_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.response)
    }
}

pub(crate) fn check_inputs(
    series: &TenSeries,
    nbrs: &NeighbourhoodTable,
    order: &GnarxOrder,
) -> Result<()> {
    order.validate()?;
    if nbrs.n_nodes() != series.n_flows() {
        return Err(Error::DimensionMismatch(format!(
            "neighbourhood table has {} nodes, series has {} flows",
            nbrs.n_nodes(),
            series.n_flows()
        )));
    }
    if order.max_stage() > nbrs.r_max() {
        return Err(Error::Config(format!(
            "order needs stage {} neighbours, table only covers {}",
            order.max_stage(),
            nbrs.r_max()
        )));
    }
    if order.n_covariates() != series.covariates().len() {
        return Err(Error::DimensionMismatch(format!(
            "order has {} covariates, series has {}",
            order.n_covariates(),
            series.covariates().len()
        )));
    }
    Ok(())
}

/// Writes the regressors of `(node, t)` into `out`. Returns `false` when any
/// required input is missing. Caller guarantees `t >= order.max_lag()`.
pub(crate) fn fill_row(
    series: &TenSeries,
    nbrs: &NeighbourhoodTable,
    order: &GnarxOrder,
    node: usize,
    t: usize,
    out: &mut [f64],
) -> bool {
    let n = series.n_flows();
    let mut col = 0;

    for l in 1..=order.p {
        let Some(own) = series.value(node, t - l) else {
            return false;
        };
        if order.global_alpha {
            out[col] = own;
            col += 1;
        } else {
            out[col..col + n].fill(0.0);
            out[col + node] = own;
            col += n;
        }
    }
    for (l0, &s_l) in order.s.iter().enumerate() {
        let lag = t - (l0 + 1);
        for r in 1..=s_l {
            match nbrs.weighted_sum(node, r, |v| series.value(v, lag)) {
                Some(v) => out[col] = v,
                None => return false,
            }
            col += 1;
        }
    }
    for (h, &q_h) in order.q.iter().enumerate() {
        for q in 0..=q_h {
            match series.covariate(h, node, t - q) {
                Some(v) => out[col] = v,
                None => return false,
            }
            col += 1;
        }
    }
    debug_assert_eq!(col, out.len());
    true
}

/// Builds the stacked design for all flows and `t ∈ t_range`. Rows are
/// ordered by time, then by node; rows touching a missing value are dropped
/// and listed in [`Design::dropped`].
pub fn build_design(
    series: &TenSeries,
    nbrs: &NeighbourhoodTable,
    order: &GnarxOrder,
    t_range: Range<usize>,
) -> Result<Design> {
    check_inputs(series, nbrs, order)?;
    if t_range.start < order.max_lag() {
        return Err(Error::Config(format!(
            "time range starts at {} but the model needs {} lags of history",
            t_range.start,
            order.max_lag()
        )));
    }
    if t_range.end > series.n_times() {
        return Err(Error::DimensionMismatch(format!(
            "time range ends at {} but the series has {} time points",
            t_range.end,
            series.n_times()
        )));
    }

    let n = series.n_flows();
    let n_cols = order.n_coefficients(n);
    let capacity = n * t_range.len();
    let mut design = Design {
        n_cols,
        response: Vec::with_capacity(capacity),
        matrix: Vec::with_capacity(capacity * n_cols),
        rows: Vec::with_capacity(capacity),
        dropped: Vec::new(),
    };
    let mut buf = vec![0.0; n_cols];

    for t in t_range {
        for node in 0..n {
            let y = series.value(node, t);
            match y {
                Some(y) if fill_row(series, nbrs, order, node, t, &mut buf) => {
                    design.response.push(y);
                    design.matrix.extend_from_slice(&buf);
                    design.rows.push((node, t));
                }
                _ => design.dropped.push((node, t)),
            }
        }
    }

    if design.rows.is_empty() {
        return Err(Error::NoUsableObservations);
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnarx::Panel;
    use crate::graph::{neighbourhoods, Graph};

    fn series(rows: &[Vec<f64>], covs: &[Vec<Vec<f64>>]) -> TenSeries {
        TenSeries::unlabelled(
            Panel::from_rows(rows).unwrap(),
            covs.iter().map(|c| Panel::from_rows(c).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_neighbour_row() {
        let g = Graph::from_edges(2, [(0, 1)], false).unwrap();
        let nb = neighbourhoods(&g, 1).unwrap();
        let s = series(&[vec![2.0, 0.0], vec![4.0, 0.0]], &[]);
        let d = build_design(&s, &nb, &GnarxOrder::first_order(0), 1..2).unwrap();
        assert_eq!(d.rows, vec![(0, 1), (1, 1)]);
        assert_eq!(d.row(0), &[2.0, 4.0]);
        assert_eq!(d.row(1), &[4.0, 2.0]);
    }

    #[test]
    fn neighbour_regressor_is_mean() {
        let g = Graph::from_edges(3, [(0, 1), (0, 2)], false).unwrap();
        let nb = neighbourhoods(&g, 1).unwrap();
        let s = series(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![6.0, 0.0]], &[]);
        let d = build_design(&s, &nb, &GnarxOrder::first_order(0), 1..2).unwrap();
        assert_eq!(d.row(0), &[1.0, 4.0]);
    }

    #[test]
    fn first_order_with_two_covariates_has_four_columns() {
        let g = Graph::from_edges(2, [(0, 1)], false).unwrap();
        let nb = neighbourhoods(&g, 1).unwrap();
        let z = vec![vec![0.5, 0.7], vec![0.1, 0.3]];
        let s = series(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[z.clone(), z]);
        let d = build_design(&s, &nb, &GnarxOrder::first_order(2), 1..2).unwrap();
        assert_eq!(d.n_cols(), 4);
        assert_eq!(d.row(0), &[1.0, 3.0, 0.7, 0.7]);
    }

    #[test]
    fn missing_values_drop_rows() {
        let g = Graph::from_edges(2, [(0, 1)], false).unwrap();
        let nb = neighbourhoods(&g, 1).unwrap();
        let s = series(&[vec![1.0, 2.0, 3.0], vec![f64::NAN, 4.0, 5.0]], &[]);
        let d = build_design(&s, &nb, &GnarxOrder::first_order(0), 1..3).unwrap();
        assert_eq!(d.dropped, vec![(0, 1), (1, 1)]);
        assert_eq!(d.rows, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn range_errors() {
        let g = Graph::from_edges(2, [(0, 1)], false).unwrap();
        let nb = neighbourhoods(&g, 1).unwrap();
        let s = series(&[vec![1.0, 2.0], vec![f64::NAN, f64::NAN]], &[]);
        let o = GnarxOrder::first_order(0);
        assert!(matches!(
            build_design(&s, &nb, &o, 0..2),
            Err(Error::Config(_))
        ));
        let s2 = series(&[vec![f64::NAN, f64::NAN], vec![f64::NAN, f64::NAN]], &[]);
        assert!(matches!(
            build_design(&s2, &nb, &o, 1..2),
            Err(Error::NoUsableObservations)
        ));
    }

    #[test]
    fn per_node_alpha_places_own_lag_in_node_column() {
        let g = Graph::from_edges(2, [(0, 1)], false).unwrap();
        let nb = neighbourhoods(&g, 1).unwrap();
        let s = series(&[vec![1.0, 0.0], vec![3.0, 0.0]], &[]);
        let o = GnarxOrder::new(1, vec![1], vec![], false).unwrap();
        let d = build_design(&s, &nb, &o, 1..2).unwrap();
        assert_eq!(d.row(0), &[1.0, 0.0, 3.0]);
        assert_eq!(d.row(1), &[0.0, 3.0, 1.0]);
    }
}
