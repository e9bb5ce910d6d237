use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tenmon_core::cusum::{compute_critical_value, ChartConfig, MonitorSummary};
use tenmon_core::data::{self, split_phases, write_panel_csv, PreparedData, RowError, Statistic};
use tenmon_core::gnarx::{fit_range, FitReport, GnarxOrder};
use tenmon_core::graph::{sample_erdos_renyi, sample_sbm, to_line_graph, write_graph, Graph};
use tenmon_core::simulate::{run_scenario_with_zeta, standard_scenarios, ScenarioSpec};
use tenmon_core::{Error, Result};

use crate::config::{self, DataConfig, FitConfig, GraphConfig, MonitorConfig, SimulateConfig};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    std::io::Write::write_all(&mut out, b"\n")?;
    Ok(())
}

/// `--out` wins over the config's `out_dir`; the default is `out`.
fn out_dir(flag: Option<PathBuf>, from_config: Option<&PathBuf>, base: &Path) -> Result<PathBuf> {
    let dir = match (flag, from_config) {
        (Some(dir), _) => dir,
        (None, Some(dir)) => config::resolve(base, dir),
        (None, None) => PathBuf::from("out"),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub nu: Option<f64>,
}

#[derive(Serialize)]
struct ScenarioSummary {
    scenario: String,
    spec: ScenarioSpec,
    zeta: f64,
    completed: usize,
    resampled: usize,
    failed: usize,
    end_intensity: f64,
    time_to_quarter: Option<usize>,
    mean_coefficients: Vec<f64>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let (config, base) = SimulateConfig::load(&args.config)?;
    let mut specs = config.scenarios.clone();
    if let Some(grid) = &config.standard_grid {
        let mut grid_specs = standard_scenarios(grid.iterations, grid.seed);
        if let Some(reps) = grid.mc_reps {
            grid_specs.iter_mut().for_each(|s| s.chart.mc_reps = reps);
        }
        specs.extend(grid_specs);
    }
    for spec in &mut specs {
        if let Some(seed) = args.seed {
            spec.seed = seed;
        }
        if let Some(alpha) = args.alpha {
            spec.chart.alpha = alpha;
        }
        if let Some(nu) = args.nu {
            spec.chart.nu = nu;
        }
        spec.validate()?;
    }
    let mut labels: Vec<String> = specs.iter().map(ScenarioSpec::label).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("scenario names are not unique".into()));
    }

    let dir = out_dir(args.out, config.out_dir.as_ref(), &base)?;
    let mut zetas: Vec<(ChartConfig, f64)> = Vec::new();
    let mut summaries = Vec::new();
    for spec in &specs {
        let chart = spec.chart_config();
        let zeta = match zetas.iter().find(|(c, _)| *c == chart) {
            Some((_, z)) => *z,
            None => {
                let z = compute_critical_value(&chart)?;
                zetas.push((chart, z));
                z
            }
        };
        let result = run_scenario_with_zeta(spec, zeta)?;
        result.write_curve_csv(create(&dir, &format!("{}_curve.csv", result.name))?)?;
        result.write_taus_csv(create(&dir, &format!("{}_taus.csv", result.name))?)?;
        println!(
            "{}: end intensity {:.3} over {} iterations",
            result.name,
            result.mean_intensity.last().copied().unwrap_or(0.0),
            result.iterations.len()
        );
        summaries.push(ScenarioSummary {
            scenario: result.name.clone(),
            spec: spec.clone(),
            zeta,
            completed: result.iterations.len(),
            resampled: result.resampled(),
            failed: result.failed.len(),
            end_intensity: result.mean_intensity.last().copied().unwrap_or(0.0),
            time_to_quarter: result.time_to_reach(0.25),
            mean_coefficients: result.mean_coefficients(),
        });
    }
    write_json(&dir, "simulation_summary.json", &summaries)
}

#[derive(Serialize)]
struct IngestReport {
    statistic: Statistic,
    n_pairs: usize,
    n_weeks: usize,
    malformed_rows: BTreeMap<String, Vec<String>>,
    low_coverage_weeks: Vec<(String, String)>,
    missing_countries: Vec<String>,
}

fn ingest(
    cfg: &DataConfig,
    base: &Path,
    statistic: Option<Statistic>,
) -> Result<(PreparedData, IngestReport)> {
    let statistic = statistic.unwrap_or(cfg.statistic);
    let flows = data::read_flow_records(File::open(config::resolve(base, &cfg.flows))?)?;
    let generation =
        data::read_generation_records(File::open(config::resolve(base, &cfg.generation))?)?;
    let prepared = data::prepare(&flows.records, &generation.records, statistic)?;
    let describe = |errors: &[RowError]| {
        errors
            .iter()
            .map(|e| format!("line {}: {}", e.line, e.message))
            .collect::<Vec<_>>()
    };
    let report = IngestReport {
        statistic,
        n_pairs: prepared.pairs.len(),
        n_weeks: prepared.weeks.len(),
        malformed_rows: BTreeMap::from([
            ("flows".to_string(), describe(&flows.errors)),
            ("generation".to_string(), describe(&generation.errors)),
        ]),
        low_coverage_weeks: prepared
            .pairs
            .iter()
            .flat_map(|p| {
                (0..p.weeks.len())
                    .filter(|&w| p.low_coverage(w))
                    .map(move |w| (p.label(), p.weeks[w].to_string()))
            })
            .collect(),
        missing_countries: prepared.missing_countries.clone(),
    };
    Ok((prepared, report))
}

fn fit_phase_one(
    prepared: &PreparedData,
    cfg: &DataConfig,
    order: &GnarxOrder,
) -> Result<(FitReport, data::PhaseSplit)> {
    let (p1, p2) = cfg.windows();
    let phases = split_phases(&prepared.weeks, p1, p2)?;
    let fit = fit_range(
        &prepared.series,
        &prepared.graph,
        order,
        phases.fit_rows(order),
    )?;
    Ok((fit.report(), phases))
}

pub struct FitArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub statistic: Option<Statistic>,
}

pub fn fit(args: FitArgs) -> Result<()> {
    let (config, base): (FitConfig, _) = config::load(&args.config)?;
    let (prepared, ingest_report) = ingest(&config.data, &base, args.statistic)?;
    let (report, _) = fit_phase_one(&prepared, &config.data, &config.order)?;
    let dir = out_dir(args.out, config.out_dir.as_ref(), &base)?;
    write_json(&dir, "fit.json", &report)?;
    write_json(&dir, "ingest.json", &ingest_report)?;
    write_panel_csv(
        create(&dir, &format!("panel_{}.csv", prepared.statistic))?,
        &prepared.weeks,
        prepared.series.labels(),
        prepared.series.values(),
    )?;
    for row in &report.coefficients {
        println!(
            "{:<12} {:>10.4} ({:.4}) {}",
            row.name, row.estimate, row.std_error, row.signif
        );
    }
    println!(
        "rmse {:.4} on {} observations",
        report.rmse, report.n_obs_used
    );
    Ok(())
}

pub struct MonitorArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub statistic: Option<Statistic>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub nu: Option<f64>,
    pub threshold_w: Option<f64>,
}

#[derive(Serialize)]
struct MonitorOutput<'a> {
    statistic: Statistic,
    #[serde(flatten)]
    summary: MonitorSummary,
    nu: f64,
    m: usize,
    k_max: usize,
    signalled_flows: Vec<&'a str>,
}

pub fn monitor(args: MonitorArgs) -> Result<()> {
    let (mut config, base): (MonitorConfig, _) = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.chart.seed = seed;
    }
    if let Some(alpha) = args.alpha {
        config.chart.alpha = alpha;
    }
    if let Some(nu) = args.nu {
        config.chart.nu = nu;
    }
    let w = args.threshold_w.unwrap_or(config.threshold_w);

    let (prepared, ingest_report) = ingest(&config.data, &base, args.statistic)?;
    let (p1, p2) = config.data.windows();
    let phases = split_phases(&prepared.weeks, p1, p2)?;
    let report = match &config.fit {
        Some(path) => {
            let text = fs::read_to_string(config::resolve(&base, path))?;
            let report: FitReport = config::parse_json(&text, &path.display().to_string())?;
            if report.n_nodes != prepared.series.n_flows() {
                return Err(Error::DimensionMismatch(format!(
                    "fit covers {} flows, data has {}",
                    report.n_nodes,
                    prepared.series.n_flows()
                )));
            }
            report
        }
        None => fit_phase_one(&prepared, &config.data, &config.order)?.0,
    };
    let params = report.params()?;

    let chart = ChartConfig {
        alpha: config.chart.alpha,
        nu: config.chart.nu,
        m: phases.fit_rows(params.order()).len(),
        k_max: phases.phase2.len(),
        mc_reps: config.chart.mc_reps,
        seed: config.chart.seed,
    };
    let zeta = compute_critical_value(&chart)?;
    let run = data::monitor_phases(
        &prepared.series,
        &prepared.graph,
        &params,
        &phases,
        zeta,
        chart.nu,
        w,
    )?;

    let dir = out_dir(args.out, config.out_dir.as_ref(), &base)?;
    let labels = prepared.series.labels();
    run.report
        .write_intensity_csv(create(&dir, "intensity.csv")?)?;
    run.report
        .write_signals_csv(create(&dir, "signals.csv")?, Some(labels))?;
    write_json(&dir, "ingest.json", &ingest_report)?;
    let output = MonitorOutput {
        statistic: prepared.statistic,
        summary: run.report.summary(chart.alpha, zeta),
        nu: chart.nu,
        m: chart.m,
        k_max: chart.k_max,
        signalled_flows: run
            .report
            .signals
            .iter()
            .map(|s| labels[s.flow].as_str())
            .collect(),
    };
    write_json(&dir, "summary.json", &output)?;
    println!(
        "{} of {} flows signalled, network alarm {}",
        run.report.total_signalled(),
        labels.len(),
        run.report
            .network_alarm_time
            .map_or("none".to_string(), |t| format!(
                "at Phase II week {t} ({})",
                prepared.weeks[phases.phase2.start + t - 1]
            ))
    );
    Ok(())
}

pub struct GraphArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn write_graph_files(dir: &Path, stem: &str, g: &Graph) -> Result<()> {
    write_graph(
        g,
        create(dir, &format!("{stem}_edges.csv"))?,
        create(dir, &format!("{stem}_meta.json"))?,
    )
}

fn write_line_graph(dir: &Path, g: &Graph, labels: Option<&[String]>) -> Result<()> {
    let line = to_line_graph(g)?;
    write_graph_files(dir, "line", &line.graph)?;
    let mut out = csv_writer(create(dir, "line_nodes.csv")?);
    out.write_record(["node", "from", "to"])?;
    for (node, &(a, b)) in line.edge_map.iter().enumerate() {
        let name = |i: usize| labels.map_or(i.to_string(), |l| l[i].clone());
        out.write_record([node.to_string(), name(a), name(b)])?;
    }
    out.flush()?;
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

pub fn graph(args: GraphArgs) -> Result<()> {
    let (config, base): (GraphConfig, _) = config::load(&args.config)?;
    let dir = out_dir(args.out, config.out_dir(), &base)?;
    match config {
        GraphConfig::ErdosRenyi {
            n_nodes,
            n_edges,
            seed,
            line_graph,
            ..
        } => {
            let g = sample_erdos_renyi(n_nodes, n_edges, args.seed.unwrap_or(seed))?;
            write_graph_files(&dir, "graph", &g)?;
            if line_graph {
                write_line_graph(&dir, &g, None)?;
            }
            println!("{} nodes, {} edges", g.n_nodes(), g.n_edges());
        }
        GraphConfig::Sbm {
            cluster_sizes,
            p_within,
            p_between,
            seed,
            line_graph,
            ..
        } => {
            let sbm = sample_sbm(
                &cluster_sizes,
                p_within,
                p_between,
                args.seed.unwrap_or(seed),
            )?;
            write_graph_files(&dir, "graph", &sbm.graph)?;
            let mut out = csv_writer(create(&dir, "clusters.csv")?);
            out.write_record(["node", "cluster"])?;
            for (node, c) in sbm.labels.iter().enumerate() {
                out.write_record([node.to_string(), c.to_string()])?;
            }
            out.flush()?;
            if line_graph {
                write_line_graph(&dir, &sbm.graph, None)?;
            }
            println!(
                "{} nodes, {} edges",
                sbm.graph.n_nodes(),
                sbm.graph.n_edges()
            );
        }
        GraphConfig::Pairs { flows, .. } => {
            let records = data::read_flow_records(File::open(config::resolve(&base, &flows))?)?;
            let pairs = data::aggregate_weekly(&records.records)?;
            let (countries, names) = data::country_graph(&pairs)?;
            write_graph_files(&dir, "graph", &countries)?;
            write_line_graph(&dir, &countries, Some(&names))?;
            println!("{} countries, {} pairs", names.len(), pairs.len());
        }
    }
    Ok(())
}
