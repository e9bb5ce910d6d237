//! Residual-based Page-type CUSUM charts on centred squared forecast errors.
//!
//! Phase I fixes the mean `b̂` of the forecast errors and the spread `σ̂` of
//! their centred squares. In Phase II every new error moves
//!
//! ```text
//! Q(m, k) = Σ_{t=m+1}^{m+k} (u_t - b̂)² - (k/m) Σ_{t=1}^{m} (u_t - b̂)²
//! D(m, k) = max_{0 ≤ a ≤ k} |Q(m, k) - Q(m, a)|
//! ```
//!
//! and the chart signals once `D(m, k) > σ̂ ζ_α g(m, k, ν)`. The critical
//! value `ζ_α` is calibrated by Monte Carlo over a finite horizon `k_max`.
//! Across flows, [`monitor_network`] tracks the cumulative fraction of
//! signalled charts and raises a network alarm at threshold `W`.

use std::io::Write;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnarx::Panel;
use crate::rng::{derive_seed, rng_from_seed};

pub const MIN_MC_REPS: usize = 1000;

fn default_mc_reps() -> usize {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    /// Significance level of each chart over the horizon `k_max`.
    pub alpha: f64,
    #[serde(default)]
    pub nu: f64,
    /// Phase I length.
    pub m: usize,
    /// Phase II horizon used for calibrating `ζ_α`.
    pub k_max: usize,
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ChartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha = {} not in (0, 1)",
                self.alpha
            )));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::Config(format!("nu = {} must be >= 0", self.nu)));
        }
        if self.m < 2 {
            return Err(Error::Config(format!("Phase I length m = {} < 2", self.m)));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.mc_reps < MIN_MC_REPS {
            return Err(Error::Config(format!(
                "mc_reps = {} below the minimum of {MIN_MC_REPS}",
                self.mc_reps
            )));
        }
        Ok(())
    }
}

/// Boundary weight `g(m, k, ν) = √m (1 + k/m) (k / (k + m))^ν`.
pub fn weight_g(m: usize, k: usize, nu: f64) -> f64 {
    let (m, k) = (m as f64, k as f64);
    m.sqrt() * (1.0 + k / m) * (k / (k + m)).powf(nu)
}

/// Per-flow chart state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartState {
    b_hat: f64,
    sigma_hat: f64,
    phase1_sum_sq: f64,
    m: usize,
    nu: f64,
    zeta: f64,
    q_current: f64,
    q_min: f64,
    q_max: f64,
    k: usize,
    d_current: f64,
    ucl_current: f64,
    signalled: bool,
    tau: Option<usize>,
    gaps: usize,
}

impl ChartState {
    /// Phase I calibration from the (possibly partly missing) forecast
    /// errors, with a given critical value. `m` is the number of observed
    /// errors.
    pub fn calibrate(phase1: &[Option<f64>], zeta: f64, nu: f64) -> Result<Self> {
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(Error::Config(format!(
                "critical value {zeta} must be positive"
            )));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(Error::Config(format!("nu = {nu} must be >= 0")));
        }
        let observed: Vec<f64> = phase1
            .iter()
            .flatten()
            .copied()
            .filter(|u| u.is_finite())
            .collect();
        let m = observed.len();
        if m < 2 {
            return Err(Error::Data(format!(
                "Phase I has {m} observed forecast errors, at least 2 required"
            )));
        }
        let b_hat = observed.iter().sum::<f64>() / m as f64;
        let centred_sq: Vec<f64> = observed.iter().map(|u| (u - b_hat).powi(2)).collect();
        let phase1_sum_sq: f64 = centred_sq.iter().sum();
        let mean_sq = phase1_sum_sq / m as f64;
        let var = centred_sq
            .iter()
            .map(|v| (v - mean_sq).powi(2))
            .sum::<f64>()
            / (m - 1) as f64;
        let sigma_hat = var.sqrt();
        if sigma_hat.is_nan() || sigma_hat <= 1e-12 * mean_sq {
            return Err(Error::DegeneratePhaseOne);
        }
        Ok(Self {
            b_hat,
            sigma_hat,
            phase1_sum_sq,
            m,
            nu,
            zeta,
            q_current: 0.0,
            q_min: 0.0,
            q_max: 0.0,
            k: 0,
            d_current: 0.0,
            ucl_current: 0.0,
            signalled: false,
            tau: None,
            gaps: 0,
        })
    }

    /// Advances `Q` by one observed error and returns the new `D`.
    fn advance(&mut self, u: f64) -> f64 {
        self.k += 1;
        let c = u - self.b_hat;
        self.q_current += c * c - self.phase1_sum_sq / self.m as f64;
        self.q_min = self.q_min.min(self.q_current);
        self.q_max = self.q_max.max(self.q_current);
        self.d_current = (self.q_max - self.q_current).max(self.q_current - self.q_min);
        self.d_current
    }

    /// Feeds the next Phase II error and reports whether the chart signals.
    /// A missing error leaves the state untouched apart from the gap count.
    pub fn update(&mut self, u_next: Option<f64>) -> Result<bool> {
        if let Some(tau) = self.tau {
            return Err(Error::ChartClosed { tau });
        }
        let Some(u) = u_next.filter(|u| u.is_finite()) else {
            self.gaps += 1;
            return Ok(false);
        };
        let d = self.advance(u);
        self.ucl_current = self.ucl_at(self.k);
        if d > self.ucl_current {
            self.signalled = true;
            self.tau = Some(self.k);
        }
        Ok(self.signalled)
    }

    /// Upper control limit `σ̂ ζ_α g(m, k, ν)` at Phase II step `k`.
    pub fn ucl_at(&self, k: usize) -> f64 {
        self.sigma_hat * self.zeta * weight_g(self.m, k, self.nu)
    }

    pub fn b_hat(&self) -> f64 {
        self.b_hat
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    pub fn phase1_sum_sq(&self) -> f64 {
        self.phase1_sum_sq
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// `Q(m, k)` at the current step.
    pub fn q(&self) -> f64 {
        self.q_current
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    /// `D(m, k)` at the current step (0 before any update).
    pub fn statistic(&self) -> f64 {
        self.d_current
    }

    /// UCL evaluated at the last update (0 before any update).
    pub fn ucl(&self) -> f64 {
        self.ucl_current
    }

    /// Number of observed Phase II errors consumed so far.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_signalled(&self) -> bool {
        self.signalled
    }

    /// Chart step at which the signal fired.
    pub fn tau(&self) -> Option<usize> {
        self.tau
    }

    /// Missing Phase II errors skipped so far.
    pub fn gaps(&self) -> usize {
        self.gaps
    }
}

/// Calibrates a chart with a critical value computed from `config`.
pub fn calibrate(phase1_errors: &[Option<f64>], config: &ChartConfig) -> Result<ChartState> {
    config.validate()?;
    if phase1_errors.len() != config.m {
        return Err(Error::DimensionMismatch(format!(
            "{} Phase I errors, config says m = {}",
            phase1_errors.len(),
            config.m
        )));
    }
    let zeta = compute_critical_value(config)?;
    ChartState::calibrate(phase1_errors, zeta, config.nu)
}

/// `max_{1≤k≤k_max} D(m, k) / (σ̂ g(m, k, ν))` for one error stream whose
/// first `m` entries are Phase I.
pub fn max_standardized_statistic(errors: &[f64], m: usize, k_max: usize, nu: f64) -> Result<f64> {
    if errors.len() < m + k_max {
        return Err(Error::DimensionMismatch(format!(
            "stream of length {} shorter than m + k_max = {}",
            errors.len(),
            m + k_max
        )));
    }
    let phase1: Vec<Option<f64>> = errors[..m].iter().map(|&u| Some(u)).collect();
    let mut chart = ChartState::calibrate(&phase1, 1.0, nu)?;
    let mut best = f64::NEG_INFINITY;
    for (k, &u) in (1..=k_max).zip(&errors[m..m + k_max]) {
        let d = chart.advance(u);
        best = best.max(d / (chart.sigma_hat * weight_g(chart.m, k, nu)));
    }
    Ok(best)
}

/// Lower empirical quantile: smallest sample `x` with `F̂(x) ≥ level`.
pub fn empirical_quantile(mut samples: Vec<f64>, level: f64) -> f64 {
    assert!(!samples.is_empty(), "quantile of an empty sample");
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let rank = ((level * n as f64) - 1e-9).ceil().max(1.0) as usize;
    samples[rank.min(n) - 1]
}

/// Monte Carlo critical value: the `(1 - α)` quantile of the maximal
/// standardized statistic over `mc_reps` in-control standard normal streams.
/// Replication `i` uses a seed derived from `(config.seed, i)`, so the result
/// does not depend on thread scheduling.
pub fn compute_critical_value(config: &ChartConfig) -> Result<f64> {
    config.validate()?;
    let n = config.m + config.k_max;
    let stats = (0..config.mc_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_from_seed(derive_seed(config.seed, &[rep as u64]));
            let errors: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            max_standardized_statistic(&errors, config.m, config.k_max, config.nu)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(empirical_quantile(stats, 1.0 - config.alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub flow: usize,
    /// Phase II time point (1-based) of the signal.
    pub tau: usize,
    pub d_at_signal: f64,
    pub ucl_at_signal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    /// `I_X(t)` for `t = 1..=k_max` (index `t - 1`).
    pub intensity: Vec<f64>,
    pub n_signalled: Vec<usize>,
    /// Ordered by signal time, then flow.
    pub signals: Vec<SignalRecord>,
    /// Per-flow signal time (1-based Phase II time point).
    pub taus: Vec<Option<usize>>,
    /// First `t` with `I_X(t) ≥ W`.
    pub network_alarm_time: Option<usize>,
    pub threshold_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub network_alarm_time: Option<usize>,
    #[serde(rename = "W")]
    pub w: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub n_flows: usize,
    pub n_signalled: usize,
}

#[derive(Serialize)]
struct IntensityRow {
    t: usize,
    intensity: f64,
    n_signalled: usize,
}

#[derive(Serialize)]
struct SignalRow<'a> {
    flow_id: &'a str,
    tau: usize,
    d_at_signal: f64,
    ucl_at_signal: f64,
}

impl MonitorReport {
    pub fn n_flows(&self) -> usize {
        self.taus.len()
    }

    pub fn total_signalled(&self) -> usize {
        self.n_signalled.last().copied().unwrap_or(0)
    }

    /// CSV `t,intensity,n_signalled`.
    pub fn write_intensity_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, (&intensity, &n_signalled)) in
            self.intensity.iter().zip(&self.n_signalled).enumerate()
        {
            w.serialize(IntensityRow {
                t: i + 1,
                intensity,
                n_signalled,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `flow_id,tau,d_at_signal,ucl_at_signal`; flow ids are labels when
    /// given, indices otherwise.
    pub fn write_signals_csv<W: Write>(&self, out: W, labels: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.signals.is_empty() {
            w.write_record(["flow_id", "tau", "d_at_signal", "ucl_at_signal"])?;
        }
        for s in &self.signals {
            let index = s.flow.to_string();
            let flow_id = labels.map_or(index.as_str(), |l| l[s.flow].as_str());
            w.serialize(SignalRow {
                flow_id,
                tau: s.tau,
                d_at_signal: s.d_at_signal,
                ucl_at_signal: s.ucl_at_signal,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, alpha: f64, zeta: f64) -> MonitorSummary {
        MonitorSummary {
            network_alarm_time: self.network_alarm_time,
            w: self.threshold_w,
            alpha,
            zeta,
            n_flows: self.n_flows(),
            n_signalled: self.total_signalled(),
        }
    }
}

/// Runs all charts through the Phase II error matrix (`flows × k_max`,
/// column `j` is time `j + 1`) and aggregates the cumulative change
/// intensity. Signalled charts stop consuming errors.
pub fn monitor_network(charts: &mut [ChartState], errors: &Panel, w: f64) -> Result<MonitorReport> {
    let n = charts.len();
    if errors.n_rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} charts but {} rows of Phase II errors",
            n,
            errors.n_rows()
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("no charts to monitor".into()));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::Config(format!("threshold W = {w} not in (0, 1]")));
    }

    let mut taus: Vec<Option<usize>> = vec![None; n];
    let mut count = 0usize;
    for (flow, chart) in charts.iter().enumerate() {
        if chart.is_signalled() {
            taus[flow] = Some(0);
            count += 1;
        }
    }

    let k_max = errors.n_cols();
    let mut report = MonitorReport {
        intensity: Vec::with_capacity(k_max),
        n_signalled: Vec::with_capacity(k_max),
        signals: Vec::new(),
        taus: Vec::new(),
        network_alarm_time: None,
        threshold_w: w,
    };
    let alarm_count = w * n as f64 - 1e-9;

    for j in 0..k_max {
        let t = j + 1;
        for (flow, chart) in charts.iter_mut().enumerate() {
            if chart.is_signalled() {
                continue;
            }
            if chart.update(errors.get(flow, j))? {
                taus[flow] = Some(t);
                count += 1;
                report.signals.push(SignalRecord {
                    flow,
                    tau: t,
                    d_at_signal: chart.statistic(),
                    ucl_at_signal: chart.ucl(),
                });
            }
        }
        report.intensity.push(count as f64 / n as f64);
        report.n_signalled.push(count);
        if report.network_alarm_time.is_none() && count as f64 >= alarm_count {
            report.network_alarm_time = Some(t);
        }
    }
    report.taus = taus;
    Ok(report)
}
