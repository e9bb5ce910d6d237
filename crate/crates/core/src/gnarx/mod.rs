//! Generalized network autoregression with exogenous regressors (GNARX).
//!
//! Each node value regresses on its own lags, on stage-weighted averages of
//! lagged neighbour values and on current/lagged covariates:
//!
//! ```text
//! x[i,t] = Σ_l ( α[i,l] x[i,t-l] + Σ_{r ≤ s_l} β[l,r] Σ_{j ∈ N^r(i)} ω[i,j] x[j,t-l] )
//!        + Σ_h Σ_{q ≤ q_h} γ[h,q] z[h,i,t-q] + ε[i,t]
//! ```
//!
//! Estimation stacks all nodes and times into one least-squares problem.

mod design;
mod estimate;
mod series;

pub use design::{build_design, Design};
pub use estimate::{
    fit, fit_range, forecast_errors, predict_one_step, significance_stars, Coefficient, FitReport,
    GnarxFit, GnarxParams, MIN_ROWS_PER_COEFFICIENT,
};
pub use series::{Panel, TenSeries};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model order `(p, s, q)`; the covariate count is `q.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnarxOrder {
    pub p: usize,
    pub s: Vec<usize>,
    pub q: Vec<usize>,
    #[serde(default = "default_true")]
    pub global_alpha: bool,
}

fn default_true() -> bool {
    true
}

impl GnarxOrder {
    pub fn new(p: usize, s: Vec<usize>, q: Vec<usize>, global_alpha: bool) -> Result<Self> {
        let order = Self {
            p,
            s,
            q,
            global_alpha,
        };
        order.validate()?;
        Ok(order)
    }

    /// `p = 1`, stage-1 neighbours, `n_covariates` contemporaneous
    /// covariates, global α.
    pub fn first_order(n_covariates: usize) -> Self {
        Self {
            p: 1,
            s: vec![1],
            q: vec![0; n_covariates],
            global_alpha: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config(
                "autoregressive order p must be at least 1".into(),
            ));
        }
        if self.s.len() != self.p {
            return Err(Error::Config(format!(
                "stage vector s has {} entries, expected p = {}",
                self.s.len(),
                self.p
            )));
        }
        Ok(())
    }

    pub fn n_covariates(&self) -> usize {
        self.q.len()
    }

    /// Largest time lag any regressor reaches back.
    pub fn max_lag(&self) -> usize {
        self.q.iter().copied().max().unwrap_or(0).max(self.p)
    }

    pub fn max_stage(&self) -> usize {
        self.s.iter().copied().max().unwrap_or(0)
    }

    pub(crate) fn n_alpha(&self, n_nodes: usize) -> usize {
        if self.global_alpha {
            self.p
        } else {
            self.p * n_nodes
        }
    }

    pub(crate) fn n_beta(&self) -> usize {
        self.s.iter().sum()
    }

    pub(crate) fn n_gamma(&self) -> usize {
        self.q.iter().map(|q| q + 1).sum()
    }

    pub fn n_coefficients(&self, n_nodes: usize) -> usize {
        self.n_alpha(n_nodes) + self.n_beta() + self.n_gamma()
    }

    /// Column names in coefficient order: `alpha_l` (or `alpha_l_<label>`),
    /// `beta_l_r`, `gamma_h_q`, all 1-based except the covariate lag.
    pub fn coefficient_names(&self, labels: &[String]) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_coefficients(labels.len()));
        for l in 1..=self.p {
            if self.global_alpha {
                names.push(format!("alpha_{l}"));
            } else {
                names.extend(labels.iter().map(|lab| format!("alpha_{l}_{lab}")));
            }
        }
        for (l, &s_l) in self.s.iter().enumerate() {
            for r in 1..=s_l {
                names.push(format!("beta_{}_{r}", l + 1));
            }
        }
        for (h, &q_h) in self.q.iter().enumerate() {
            for q in 0..=q_h {
                names.push(format!("gamma_{}_{q}", h + 1));
            }
        }
        names
    }
}
