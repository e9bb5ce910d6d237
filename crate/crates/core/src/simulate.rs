//! Simulation study: generate TEN data from a first-order GNARX mechanism,
//! inject a parameter change, then fit, calibrate and monitor end to end.
//!
//! Time layout of one iteration (0-based indices, 1200 points by default):
//!
//! ```text
//! [0, 300)      burn-in, discarded
//! [300, 900)    model fit
//! [900, 1100)   Phase I, chart calibration
//! [1100, 1150)  Phase II, in control
//! [1150, 1200)  Phase II, changed parameter in effect
//! ```
//!
//! Covariate panels are stored pre-lagged: column `t` of covariate `h`
//! holds the draw that enters the recursion at `t`, so the model is fit with
//! lag-0 covariate terms.

use std::io::Write;
use std::ops::Range;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusum::{compute_critical_value, monitor_network, ChartConfig, ChartState};
use crate::error::{Error, Result};
use crate::gnarx::{fit_range, forecast_errors, GnarxOrder, Panel, TenSeries};
use crate::graph::{neighbourhoods, sample_erdos_renyi, sample_sbm, Graph};
use crate::rng::{derive_seed, rng_from_seed};

/// Replacement seeds tried for an iteration whose pipeline fails.
pub const MAX_RESAMPLES: usize = 3;

/// Largest tolerated fraction of failed iterations.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Phase II intensity threshold; the simulation tracks the full curve.
const SIMULATION_W: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencySource {
    ErdosRenyi,
    Sbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangedParameter {
    Alpha,
    Beta,
    Gamma1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeScope {
    AllFlows,
    /// Flows in the first SBM community only.
    ClusterC1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodLengths {
    pub burn_in: usize,
    pub fit: usize,
    pub phase1: usize,
    pub phase2_ic: usize,
    pub phase2_ooc: usize,
}

impl Default for PeriodLengths {
    fn default() -> Self {
        Self {
            burn_in: 300,
            fit: 600,
            phase1: 200,
            phase2_ic: 50,
            phase2_ooc: 50,
        }
    }
}

impl PeriodLengths {
    pub fn total(&self) -> usize {
        self.burn_in + self.fit + self.phase1 + self.phase2()
    }

    pub fn phase2(&self) -> usize {
        self.phase2_ic + self.phase2_ooc
    }

    pub fn fit_range(&self) -> Range<usize> {
        self.burn_in..self.burn_in + self.fit
    }

    pub fn phase1_range(&self) -> Range<usize> {
        let start = self.fit_range().end;
        start..start + self.phase1
    }

    pub fn phase2_range(&self) -> Range<usize> {
        let start = self.phase1_range().end;
        start..start + self.phase2()
    }

    /// First index at which the changed parameter is in effect.
    pub fn change_start(&self) -> usize {
        self.phase2_range().start + self.phase2_ic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseParameters {
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for BaseParameters {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.3,
            gamma1: 2.0,
            gamma2: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSettings {
    pub er_nodes: usize,
    pub er_edges: usize,
    pub sbm_cluster_sizes: Vec<usize>,
    pub sbm_p_within: f64,
    pub sbm_p_between: f64,
}

impl Default for GraphSettings {
    fn default() -> Self {
        Self {
            er_nodes: 10,
            er_edges: 30,
            sbm_cluster_sizes: vec![5, 5],
            sbm_p_within: 0.8,
            sbm_p_between: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChartSettings {
    pub alpha: f64,
    pub nu: f64,
    pub mc_reps: usize,
}

impl Default for ChartSettings {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            nu: 0.0,
            mc_reps: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub adjacency_source: AdjacencySource,
    pub changed_parameter: ChangedParameter,
    pub delta: f64,
    pub change_scope: ChangeScope,
    #[serde(default)]
    pub lengths: PeriodLengths,
    #[serde(default)]
    pub base: BaseParameters,
    #[serde(default)]
    pub graph: GraphSettings,
    #[serde(default)]
    pub chart: ChartSettings,
    pub iterations: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(
        adjacency_source: AdjacencySource,
        changed_parameter: ChangedParameter,
        delta: f64,
        change_scope: ChangeScope,
        iterations: usize,
        seed: u64,
    ) -> Self {
        Self {
            name: None,
            adjacency_source,
            changed_parameter,
            delta,
            change_scope,
            lengths: PeriodLengths::default(),
            base: BaseParameters::default(),
            graph: GraphSettings::default(),
            chart: ChartSettings::default(),
            iterations,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.change_scope == ChangeScope::ClusterC1
            && self.adjacency_source != AdjacencySource::Sbm
        {
            return Err(Error::Config(
                "change_scope cluster_c1 requires adjacency_source sbm".into(),
            ));
        }
        let l = &self.lengths;
        for (name, v) in [
            ("burn_in", l.burn_in),
            ("fit", l.fit),
            ("phase1", l.phase1),
            ("phase2_ic", l.phase2_ic),
            ("phase2_ooc", l.phase2_ooc),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("lengths.{name} must be positive")));
            }
        }
        if l.phase2() != 100 {
            return Err(Error::Config(format!(
                "lengths.phase2_ic + lengths.phase2_ooc = {}, expected 100",
                l.phase2()
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        let b = &self.base;
        for (name, v) in [
            ("delta", self.delta),
            ("base.alpha", b.alpha),
            ("base.beta", b.beta),
            ("base.gamma1", b.gamma1),
            ("base.gamma2", b.gamma2),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} is not finite")));
            }
        }
        self.chart_config().validate()
    }

    /// Explicit name, or one derived from the scenario fields.
    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let param = match self.changed_parameter {
            ChangedParameter::Alpha => "alpha",
            ChangedParameter::Beta => "beta",
            ChangedParameter::Gamma1 => "gamma1",
        };
        let source = match self.adjacency_source {
            AdjacencySource::ErdosRenyi => "er",
            AdjacencySource::Sbm => "sbm",
        };
        let scope = match self.change_scope {
            ChangeScope::AllFlows => "all",
            ChangeScope::ClusterC1 => "c1",
        };
        format!("{param}+{}_{source}_{scope}", self.delta)
    }

    /// Chart settings shared by every flow and iteration of the scenario.
    pub fn chart_config(&self) -> ChartConfig {
        ChartConfig {
            alpha: self.chart.alpha,
            nu: self.chart.nu,
            m: self.lengths.phase1,
            k_max: self.lengths.phase2(),
            mc_reps: self.chart.mc_reps,
            seed: derive_seed(self.seed, &[u64::MAX]),
        }
    }

    /// Seed used for attempt `attempt` of iteration `iteration`.
    pub fn iteration_seed(&self, iteration: usize, attempt: usize) -> u64 {
        derive_seed(self.seed, &[iteration as u64, attempt as u64])
    }
}

/// The nine change cases on ER/all flows and SBM/cluster `c1`, 18 specs.
pub fn standard_scenarios(iterations: usize, seed: u64) -> Vec<ScenarioSpec> {
    let changes = [
        (ChangedParameter::Alpha, 0.2),
        (ChangedParameter::Alpha, 0.3),
        (ChangedParameter::Alpha, 0.5),
        (ChangedParameter::Beta, 0.3),
        (ChangedParameter::Beta, 0.4),
        (ChangedParameter::Beta, 0.5),
        (ChangedParameter::Gamma1, 1.0),
        (ChangedParameter::Gamma1, 1.5),
        (ChangedParameter::Gamma1, 2.0),
    ];
    let mut specs = Vec::with_capacity(2 * changes.len());
    for (source, scope) in [
        (AdjacencySource::ErdosRenyi, ChangeScope::AllFlows),
        (AdjacencySource::Sbm, ChangeScope::ClusterC1),
    ] {
        for (param, delta) in changes {
            specs.push(ScenarioSpec::new(
                source, param, delta, scope, iterations, seed,
            ));
        }
    }
    specs
}

/// One generated data set.
#[derive(Debug, Clone)]
pub struct GeneratedTen {
    /// Covariates `z1, z2`, pre-lagged.
    pub series: TenSeries,
    pub graph: Graph,
    /// Community of each flow for SBM graphs.
    pub clusters: Option<Vec<usize>>,
    /// Flows whose parameter changes.
    pub affected: Vec<bool>,
}

/// Samples the graph and the series for one iteration.
pub fn generate_ten(spec: &ScenarioSpec, iteration_seed: u64) -> Result<GeneratedTen> {
    spec.validate()?;
    let graph_seed = derive_seed(iteration_seed, &[0]);
    let (graph, clusters) = match spec.adjacency_source {
        AdjacencySource::ErdosRenyi => (
            sample_erdos_renyi(spec.graph.er_nodes, spec.graph.er_edges, graph_seed)?,
            None,
        ),
        AdjacencySource::Sbm => {
            let sbm = sample_sbm(
                &spec.graph.sbm_cluster_sizes,
                spec.graph.sbm_p_within,
                spec.graph.sbm_p_between,
                graph_seed,
            )?;
            (sbm.graph, Some(sbm.labels))
        }
    };
    let n = graph.n_nodes();
    let affected: Vec<bool> = match (spec.change_scope, &clusters) {
        (ChangeScope::AllFlows, _) => vec![true; n],
        (ChangeScope::ClusterC1, Some(labels)) => labels.iter().map(|&c| c == 0).collect(),
        (ChangeScope::ClusterC1, None) => unreachable!("validated"),
    };

    let nbrs = neighbourhoods(&graph, 1)?;
    let total = spec.lengths.total();
    let change_start = spec.lengths.change_start();
    let b = &spec.base;
    let bump = |param: ChangedParameter, i: usize, t: usize| {
        if spec.changed_parameter == param && affected[i] && t >= change_start {
            spec.delta
        } else {
            0.0
        }
    };

    let mut rng = rng_from_seed(derive_seed(iteration_seed, &[1]));
    let mut draw =
        |len: usize| -> Vec<f64> { (0..len).map(|_| rng.sample(StandardNormal)).collect() };

    let mut x = Panel::zeros(n, total);
    let mut z1 = Panel::zeros(n, total);
    let mut z2 = Panel::zeros(n, total);
    let mut prev_x = vec![0.0; n];
    let mut prev_z1 = draw(n);
    let mut prev_z2 = draw(n);

    for t in 0..total {
        let eps = draw(n);
        let next_z1 = draw(n);
        let next_z2 = draw(n);
        let mut cur = vec![0.0; n];
        for i in 0..n {
            let nbr = nbrs.weighted_sum(i, 1, |j| Some(prev_x[j])).unwrap_or(0.0);
            cur[i] = (b.alpha + bump(ChangedParameter::Alpha, i, t)) * prev_x[i]
                + (b.beta + bump(ChangedParameter::Beta, i, t)) * nbr
                + (b.gamma1 + bump(ChangedParameter::Gamma1, i, t)) * prev_z1[i]
                + b.gamma2 * prev_z2[i]
                + eps[i];
            x.set(i, t, Some(cur[i]));
            z1.set(i, t, Some(prev_z1[i]));
            z2.set(i, t, Some(prev_z2[i]));
        }
        prev_x = cur;
        prev_z1 = next_z1;
        prev_z2 = next_z2;
    }

    Ok(GeneratedTen {
        series: TenSeries::unlabelled(x, vec![z1, z2])?,
        graph,
        clusters,
        affected,
    })
}

/// Model order fit in every iteration: one own lag, one neighbour stage and
/// the two pre-lagged covariates.
pub fn simulation_order() -> GnarxOrder {
    GnarxOrder::first_order(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    /// `I_X(t)` over Phase II.
    pub intensity: Vec<f64>,
    /// Per-flow signal time (1-based Phase II time point).
    pub taus: Vec<Option<usize>>,
    /// `(alpha, beta, gamma1, gamma2)` estimates.
    pub coefficients: Vec<f64>,
}

/// Fit, calibrate and monitor one generated data set with critical value
/// `zeta`.
pub fn run_iteration(
    spec: &ScenarioSpec,
    iteration_seed: u64,
    zeta: f64,
) -> Result<IterationResult> {
    let data = generate_ten(spec, iteration_seed)?;
    let order = simulation_order();
    let fit = fit_range(&data.series, &data.graph, &order, spec.lengths.fit_range())?;
    let nbrs = neighbourhoods(&data.graph, 1)?;
    let phase1 = forecast_errors(
        &fit.params,
        &data.series,
        &nbrs,
        spec.lengths.phase1_range(),
    )?;
    let mut charts = (0..data.series.n_flows())
        .map(|i| ChartState::calibrate(phase1.row(i), zeta, spec.chart.nu))
        .collect::<Result<Vec<_>>>()?;
    let phase2 = forecast_errors(
        &fit.params,
        &data.series,
        &nbrs,
        spec.lengths.phase2_range(),
    )?;
    let report = monitor_network(&mut charts, &phase2, SIMULATION_W)?;
    Ok(IterationResult {
        intensity: report.intensity,
        taus: report.taus,
        coefficients: fit.params.theta().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub seed: u64,
    /// Replacement seeds used before this result was obtained.
    pub resamples: usize,
    pub result: IterationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedIteration {
    pub iteration: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub zeta: f64,
    /// Pointwise mean of `I_X` over completed iterations.
    pub mean_intensity: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub failed: Vec<FailedIteration>,
}

impl ScenarioResult {
    /// Iterations that needed at least one replacement seed.
    pub fn resampled(&self) -> usize {
        self.iterations.iter().filter(|r| r.resamples > 0).count()
    }

    /// First Phase II time point (1-based) with mean intensity `>= level`.
    pub fn time_to_reach(&self, level: f64) -> Option<usize> {
        self.mean_intensity
            .iter()
            .position(|&v| v >= level)
            .map(|j| j + 1)
    }

    /// Mean of each coefficient over completed iterations.
    pub fn mean_coefficients(&self) -> Vec<f64> {
        let Some(first) = self.iterations.first() else {
            return Vec::new();
        };
        let mut sums = vec![0.0; first.result.coefficients.len()];
        for rec in &self.iterations {
            for (s, c) in sums.iter_mut().zip(&rec.result.coefficients) {
                *s += c;
            }
        }
        sums.iter()
            .map(|s| s / self.iterations.len() as f64)
            .collect()
    }

    /// CSV `scenario,t,mean_intensity`.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "t", "mean_intensity"])?;
        for (j, v) in self.mean_intensity.iter().enumerate() {
            w.write_record([self.name.clone(), (j + 1).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `scenario,iteration,flow_id,tau`; `tau` is empty for flows that
    /// never signalled.
    pub fn write_taus_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "iteration", "flow_id", "tau"])?;
        for rec in &self.iterations {
            for (flow, tau) in rec.result.taus.iter().enumerate() {
                w.write_record([
                    self.name.clone(),
                    rec.iteration.to_string(),
                    flow.to_string(),
                    tau.map(|t| t.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn attempt_iteration(
    spec: &ScenarioSpec,
    iteration: usize,
    zeta: f64,
) -> std::result::Result<IterationRecord, Error> {
    let mut last_error = None;
    for attempt in 0..=MAX_RESAMPLES {
        let seed = spec.iteration_seed(iteration, attempt);
        match run_iteration(spec, seed, zeta) {
            Ok(result) => {
                return Ok(IterationRecord {
                    iteration,
                    seed,
                    resamples: attempt,
                    result,
                })
            }
            Err(e) => last_error = Some(e),
        }
    }
    Err(last_error.expect("at least one attempt"))
}

/// Runs every iteration of a scenario in parallel and averages the
/// intensity curves in iteration order.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    spec.validate()?;
    let zeta = compute_critical_value(&spec.chart_config())?;
    run_scenario_with_zeta(spec, zeta)
}

/// As [`run_scenario`] with a precomputed critical value.
pub fn run_scenario_with_zeta(spec: &ScenarioSpec, zeta: f64) -> Result<ScenarioResult> {
    spec.validate()?;
    let outcomes: Vec<_> = (0..spec.iterations)
        .into_par_iter()
        .map(|i| attempt_iteration(spec, i, zeta))
        .collect();

    let mut iterations = Vec::with_capacity(outcomes.len());
    let mut failed = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rec) => iterations.push(rec),
            Err(e) => failed.push(FailedIteration {
                iteration: i,
                error: e.to_string(),
            }),
        }
    }
    if failed.len() as f64 > MAX_FAILURE_FRACTION * spec.iterations as f64 || iterations.is_empty()
    {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: spec.iterations,
            last_error: failed.last().map(|f| f.error.clone()).unwrap_or_default(),
        });
    }

    let k_max = spec.lengths.phase2();
    let mut mean_intensity = vec![0.0; k_max];
    for rec in &iterations {
        for (m, v) in mean_intensity.iter_mut().zip(&rec.result.intensity) {
            *m += v;
        }
    }
    for m in &mut mean_intensity {
        *m /= iterations.len() as f64;
    }

    Ok(ScenarioResult {
        name: spec.label(),
        zeta,
        mean_intensity,
        iterations,
        failed,
    })
}
