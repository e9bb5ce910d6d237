use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::design::{check_inputs, fill_row};
use super::{build_design, GnarxOrder, Panel, TenSeries};
use crate::error::{Error, Result};
use crate::graph::{neighbourhoods, Graph, NeighbourhoodTable};

/// Guardrail on the number of usable rows per estimated coefficient.
pub const MIN_ROWS_PER_COEFFICIENT: usize = 10;

// |R_jj| below this fraction of the column norm marks column j as collinear
// with the columns before it.
const RANK_TOLERANCE: f64 = 1e-10;

/// Coefficient vector together with the order that gives it meaning.
///
/// Layout: α (per lag, or per lag and node), then β ordered by `(l, r)`,
/// then γ ordered by `(h, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnarxParams {
    order: GnarxOrder,
    n_nodes: usize,
    theta: Vec<f64>,
}

impl GnarxParams {
    pub fn new(order: GnarxOrder, n_nodes: usize, theta: Vec<f64>) -> Result<Self> {
        order.validate()?;
        let expected = order.n_coefficients(n_nodes);
        if theta.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients given, order needs {expected}",
                theta.len()
            )));
        }
        Ok(Self {
            order,
            n_nodes,
            theta,
        })
    }

    pub fn order(&self) -> &GnarxOrder {
        &self.order
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `α[node, l]`, `l` 1-based.
    pub fn alpha(&self, node: usize, l: usize) -> f64 {
        if self.order.global_alpha {
            self.theta[l - 1]
        } else {
            self.theta[(l - 1) * self.n_nodes + node]
        }
    }

    /// `β[l, r]`, both 1-based.
    pub fn beta(&self, l: usize, r: usize) -> f64 {
        let base = self.order.n_alpha(self.n_nodes);
        let before: usize = self.order.s[..l - 1].iter().sum();
        self.theta[base + before + r - 1]
    }

    /// `γ[h, q]`, `h` 1-based, `q` the covariate lag.
    pub fn gamma(&self, h: usize, q: usize) -> f64 {
        let base = self.order.n_alpha(self.n_nodes) + self.order.n_beta();
        let before: usize = self.order.q[..h - 1].iter().map(|q| q + 1).sum();
        self.theta[base + before + q]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

/// Result of a least-squares GNARX fit.
#[derive(Debug, Clone, PartialEq)]
pub struct GnarxFit {
    pub params: GnarxParams,
    pub coefficients: Vec<Coefficient>,
    /// `RSS / (n - k)`.
    pub residual_variance: f64,
    pub n_obs_used: usize,
    /// `sqrt(RSS / n)` over the rows used in the fit.
    pub rmse: f64,
    pub dropped: Vec<(usize, usize)>,
}

/// Legend thresholds: `***` < 0.001, `**` < 0.01, `*` < 0.05, `.` ≤ 0.1.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else if p_value <= 0.1 {
        "."
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub signif: String,
}

/// Serializable fit summary; also sufficient to rebuild [`GnarxParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub order: GnarxOrder,
    pub n_nodes: usize,
    pub coefficients: Vec<ReportRow>,
    pub rmse: f64,
    pub n_obs_used: usize,
    pub residual_variance: f64,
}

impl FitReport {
    pub fn params(&self) -> Result<GnarxParams> {
        GnarxParams::new(
            self.order.clone(),
            self.n_nodes,
            self.coefficients.iter().map(|c| c.estimate).collect(),
        )
    }
}

impl GnarxFit {
    pub fn report(&self) -> FitReport {
        FitReport {
            order: self.params.order.clone(),
            n_nodes: self.params.n_nodes,
            coefficients: self
                .coefficients
                .iter()
                .map(|c| ReportRow {
                    name: c.name.clone(),
                    estimate: c.estimate,
                    std_error: c.std_error,
                    p_value: c.p_value,
                    signif: significance_stars(c.p_value).to_string(),
                })
                .collect(),
            rmse: self.rmse,
            n_obs_used: self.n_obs_used,
            residual_variance: self.residual_variance,
        }
    }
}

struct OlsSolution {
    beta: Vec<f64>,
    std_errors: Vec<f64>,
    rss: f64,
}

/// Least squares through a Householder QR of the design.
fn least_squares(x: DMatrix<f64>, y: DVector<f64>, names: &[String]) -> Result<OlsSolution> {
    let (n, k) = x.shape();
    let col_norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let qr = x.clone().qr();
    let r = qr.r();

    let collinear: Vec<String> = (0..k)
        .filter(|&j| col_norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * col_norms[j])
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty_head = qty.rows(0, k).into_owned();
    let beta = r
        .solve_upper_triangular(&qty_head)
        .ok_or_else(|| Error::RankDeficient {
            columns: names.to_vec(),
        })?;

    let residuals = &y - &x * &beta;
    let rss = residuals.norm_squared();
    let s2 = rss / (n - k) as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient {
            columns: names.to_vec(),
        })?;
    // Var(beta) = s² R⁻¹ R⁻ᵀ, so se_j = s ‖row j of R⁻¹‖.
    let std_errors = (0..k)
        .map(|j| (s2 * r_inv.row(j).norm_squared()).sqrt())
        .collect();

    Ok(OlsSolution {
        beta: beta.iter().copied().collect(),
        std_errors,
        rss,
    })
}

fn normal_p_value(estimate: f64, std_error: f64) -> f64 {
    if std_error > 0.0 {
        erfc((estimate / std_error).abs() / std::f64::consts::SQRT_2)
    } else if estimate == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Fits over every time point that has enough history.
pub fn fit(series: &TenSeries, g: &Graph, order: &GnarxOrder) -> Result<GnarxFit> {
    fit_range(series, g, order, order.max_lag()..series.n_times())
}

/// Stacked OLS fit of `order` using response times `t_range`.
pub fn fit_range(
    series: &TenSeries,
    g: &Graph,
    order: &GnarxOrder,
    t_range: Range<usize>,
) -> Result<GnarxFit> {
    let nbrs = neighbourhoods(g, order.max_stage().max(1))?;
    let design = build_design(series, &nbrs, order, t_range)?;
    let n_coef = order.n_coefficients(series.n_flows());
    let required = MIN_ROWS_PER_COEFFICIENT * n_coef;
    if design.n_rows() < required {
        return Err(Error::InsufficientObservations {
            rows: design.n_rows(),
            coefficients: n_coef,
            required,
        });
    }

    let names = order.coefficient_names(series.labels());
    let n = design.n_rows();
    let sol = least_squares(design.matrix(), design.response_vector(), &names)?;

    let coefficients = names
        .into_iter()
        .zip(sol.beta.iter().zip(&sol.std_errors))
        .map(|(name, (&estimate, &std_error))| Coefficient {
            name,
            estimate,
            std_error,
            p_value: normal_p_value(estimate, std_error),
        })
        .collect();

    Ok(GnarxFit {
        params: GnarxParams::new(order.clone(), series.n_flows(), sol.beta)?,
        coefficients,
        residual_variance: sol.rss / (n - n_coef) as f64,
        n_obs_used: n,
        rmse: (sol.rss / n as f64).sqrt(),
        dropped: design.dropped,
    })
}

/// One-step-ahead prediction `x̂[·, t]` from data up to `t - 1` (and the
/// contemporaneous covariates). Flows lacking some input get `None`.
pub fn predict_one_step(
    params: &GnarxParams,
    series: &TenSeries,
    nbrs: &NeighbourhoodTable,
    t: usize,
) -> Result<Vec<Option<f64>>> {
    let order = params.order();
    check_inputs(series, nbrs, order)?;
    if params.n_nodes() != series.n_flows() {
        return Err(Error::DimensionMismatch(format!(
            "parameters for {} nodes, series has {} flows",
            params.n_nodes(),
            series.n_flows()
        )));
    }
    if t >= series.n_times() {
        return Err(Error::DimensionMismatch(format!(
            "time {t} outside series of length {}",
            series.n_times()
        )));
    }
    let n = series.n_flows();
    if t < order.max_lag() {
        return Ok(vec![None; n]);
    }
    let mut buf = vec![0.0; params.theta().len()];
    Ok((0..n)
        .map(|node| {
            fill_row(series, nbrs, order, node, t, &mut buf).then(|| {
                buf.iter()
                    .zip(params.theta())
                    .map(|(x, c)| x * c)
                    .sum::<f64>()
            })
        })
        .collect())
}

/// Forecast errors `u[i, t] = x[i, t] - x̂[i, t]` for `t ∈ t_range`; column
/// `j` of the result is time `t_range.start + j`.
pub fn forecast_errors(
    params: &GnarxParams,
    series: &TenSeries,
    nbrs: &NeighbourhoodTable,
    t_range: Range<usize>,
) -> Result<Panel> {
    let mut out = Panel::missing(series.n_flows(), t_range.len());
    for (j, t) in t_range.enumerate() {
        let pred = predict_one_step(params, series, nbrs, t)?;
        for (node, xhat) in pred.into_iter().enumerate() {
            let u = match (series.value(node, t), xhat) {
                (Some(x), Some(xhat)) => Some(x - xhat),
                _ => None,
            };
            out.set(node, j, u);
        }
    }
    Ok(out)
}
