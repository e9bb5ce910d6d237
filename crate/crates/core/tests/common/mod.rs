//! Brute-force oracles and fixture checks shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use tenmon_core::cusum::ChartState;
use tenmon_core::data::{self, monitor_phases, split_phases, PreparedData, Statistic};
use tenmon_core::gnarx::{fit_range, GnarxFit, GnarxOrder};
use tenmon_core::graph::{Graph, LineGraph};

/// Every simple undirected graph on `n` nodes.
pub fn all_undirected_graphs(n: usize) -> impl Iterator<Item = Graph> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    (0u64..1 << pairs.len()).map(move |mask| {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e);
        Graph::from_edges(n, edges, false).unwrap()
    })
}

/// Checks a line graph against the pairwise definition: one node per edge
/// of `g`, adjacent iff the edges share an endpoint.
pub fn check_line_graph(g: &Graph, line: &LineGraph) -> Result<(), String> {
    let edges = g.edges();
    let mapped: BTreeSet<(usize, usize)> = line.edge_map.iter().copied().collect();
    if line.edge_map.len() != edges.len() || mapped != edges.iter().copied().collect() {
        return Err(format!("edge map {:?} != edges {:?}", line.edge_map, edges));
    }
    if line.graph.is_directed() {
        return Err("line graph is directed".into());
    }
    for (a, &(i1, j1)) in line.edge_map.iter().enumerate() {
        for (b, &(i2, j2)) in line.edge_map.iter().enumerate() {
            let expected = a != b && (i1 == i2 || i1 == j2 || j1 == i2 || j1 == j2);
            if line.graph.has_edge(a, b) != expected {
                return Err(format!(
                    "edges {:?} and {:?}: adjacency {}",
                    (i1, j1),
                    (i2, j2),
                    !expected
                ));
            }
        }
    }
    Ok(())
}

/// All-pairs shortest path lengths along out-edges (`usize::MAX` if none).
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n_nodes();
    let mut d = vec![vec![usize::MAX; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if g.has_edge(i, j) {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != usize::MAX && d[k][j] != usize::MAX && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Detector statistic `max_{0<=a<=k} |Q(k) - Q(a)|` evaluated from scratch.
pub fn brute_force_d(phase1: &[f64], phase2: &[f64]) -> Vec<f64> {
    let m = phase1.len() as f64;
    let b = phase1.iter().sum::<f64>() / m;
    let drift = phase1.iter().map(|u| (u - b) * (u - b)).sum::<f64>() / m;
    let mut q = vec![0.0];
    for u in phase2 {
        q.push(q.last().unwrap() + ((u - b) * (u - b) - drift));
    }
    (1..q.len())
        .map(|k| (0..=k).map(|a| (q[k] - q[a]).abs()).fold(0.0, f64::max))
        .collect()
}

/// Runs a chart that never signals through `phase2`, collecting `D`.
pub fn incremental_d(phase1: &[f64], phase2: &[f64]) -> Vec<f64> {
    let p1: Vec<Option<f64>> = phase1.iter().copied().map(Some).collect();
    let mut chart = ChartState::calibrate(&p1, f64::MAX / 4.0, 0.0).unwrap();
    phase2
        .iter()
        .map(|&u| {
            chart.update(Some(u)).unwrap();
            chart.statistic()
        })
        .collect()
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[derive(Debug, Deserialize)]
pub struct FixtureOracle {
    pub labels: Vec<String>,
    pub weeks: Vec<String>,
    pub phase1: [usize; 2],
    pub phase2: [usize; 2],
    pub zeta: f64,
    pub low_coverage: Vec<(String, String)>,
    pub statistics: std::collections::BTreeMap<String, StatisticOracle>,
}

#[derive(Debug, Deserialize)]
pub struct StatisticOracle {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub rmse: f64,
    pub n_obs: usize,
    pub taus: Vec<Option<usize>>,
}

pub fn fixture_oracle() -> FixtureOracle {
    serde_json::from_reader(File::open(fixture_dir().join("oracle.json")).unwrap()).unwrap()
}

pub fn load_prepared(dir: &Path, statistic: Statistic) -> Result<(PreparedData, usize), String> {
    let flows =
        data::read_flow_records(File::open(dir.join("flows.csv")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let generation = data::read_generation_records(
        File::open(dir.join("generation.csv")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let prepared =
        data::prepare(&flows.records, &generation.records, statistic).map_err(|e| e.to_string())?;
    Ok((prepared, flows.errors.len() + generation.errors.len()))
}

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Compares the prepared fixture, its Phase I fit and its Phase II signals
/// with the reference values frozen in `oracle.json`.
pub fn check_fixture() -> Result<String, String> {
    const TOL: f64 = 1e-9;
    let oracle = fixture_oracle();
    let phase1 = date("2021-01-01")..=date("2021-05-09");
    let phase2 = date("2021-05-10")..=date("2021-07-31");
    let mut lines = Vec::new();
    for statistic in Statistic::ALL {
        let expected = &oracle.statistics[&statistic.to_string()];
        let (prepared, bad_rows) = load_prepared(&fixture_dir(), statistic)?;
        if bad_rows != 3 {
            return Err(format!("{bad_rows} malformed rows, expected 3"));
        }
        if prepared.series.labels() != oracle.labels.as_slice() {
            return Err(format!("labels {:?}", prepared.series.labels()));
        }
        let weeks: Vec<String> = prepared.weeks.iter().map(|w| w.to_string()).collect();
        if weeks != oracle.weeks {
            return Err("week axis differs".into());
        }
        let flagged: Vec<(String, String)> = prepared
            .pairs
            .iter()
            .flat_map(|p| {
                (0..p.weeks.len())
                    .filter(|&w| p.low_coverage(w))
                    .map(move |w| (p.label(), p.weeks[w].to_string()))
            })
            .collect();
        if flagged != oracle.low_coverage {
            return Err(format!("low-coverage weeks {flagged:?}"));
        }

        let phases = split_phases(&prepared.weeks, phase1.clone(), phase2.clone())
            .map_err(|e| e.to_string())?;
        if [phases.phase1.start, phases.phase1.end] != oracle.phase1
            || [phases.phase2.start, phases.phase2.end] != oracle.phase2
        {
            return Err(format!("phases {phases:?}"));
        }
        let order = GnarxOrder::first_order(2);
        let fit: GnarxFit = fit_range(
            &prepared.series,
            &prepared.graph,
            &order,
            phases.fit_rows(&order),
        )
        .map_err(|e| e.to_string())?;
        if fit.n_obs_used != expected.n_obs {
            return Err(format!(
                "{statistic}: {} rows used, expected {}",
                fit.n_obs_used, expected.n_obs
            ));
        }
        for ((c, want), want_se) in fit
            .coefficients
            .iter()
            .zip(&expected.coefficients)
            .zip(&expected.std_errors)
        {
            if !close(c.estimate, *want, TOL) || !close(c.std_error, *want_se, TOL) {
                return Err(format!(
                    "{statistic} {}: {} ({}) vs {} ({})",
                    c.name, c.estimate, c.std_error, want, want_se
                ));
            }
        }
        if !close(fit.rmse, expected.rmse, TOL) {
            return Err(format!(
                "{statistic} rmse {} vs {}",
                fit.rmse, expected.rmse
            ));
        }
        let run = monitor_phases(
            &prepared.series,
            &prepared.graph,
            &fit.params,
            &phases,
            oracle.zeta,
            0.0,
            1.0,
        )
        .map_err(|e| e.to_string())?;
        if run.report.taus != expected.taus {
            return Err(format!(
                "{statistic} signal times {:?} vs {:?}",
                run.report.taus, expected.taus
            ));
        }
        lines.push(format!(
            "{statistic}: {} signals",
            run.report.total_signalled()
        ));
    }
    Ok(lines.join(", "))
}

pub mod properties;
