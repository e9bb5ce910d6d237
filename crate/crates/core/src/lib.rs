//! Modelling and monitoring of temporal edge network (TEN) processes: time
//! series attached to the edges of a graph whose structure never changes.
//!
//! The edge processes are moved onto the nodes of a derived graph
//! ([`graph`]), modelled with a network autoregression with exogenous
//! regressors ([`gnarx`]), and monitored through CUSUM charts on the
//! one-step-ahead forecast errors ([`cusum`]). [`simulate`] runs the
//! end-to-end simulation study and [`data`] prepares cross-border electricity
//! flow exports for the same pipeline.

pub mod cusum;
pub mod data;
pub mod error;
pub mod gnarx;
pub mod graph;
pub mod rng;
pub mod simulate;

pub use cusum::{
    compute_critical_value, monitor_network, weight_g, ChartConfig, ChartState, MonitorReport,
};
pub use data::Statistic;
pub use error::{Error, ErrorKind, Result};
pub use gnarx::{
    fit, fit_range, forecast_errors, predict_one_step, GnarxFit, GnarxOrder, GnarxParams, Panel,
    TenSeries,
};
pub use graph::{neighbourhoods, to_line_graph, Graph, NeighbourhoodTable};
pub use simulate::{run_scenario, ScenarioResult, ScenarioSpec};
