//! Preparation of cross-border physical flow exports.
//!
//! Hourly `timestamp,from,to,mw` records are summed into Monday–Sunday weeks
//! labelled by their Sunday, paired per country pair with a canonical
//! orientation (the lexicographically smaller code is side 1), reduced to one
//! weekly statistic per pair and laid out on the line graph of the country
//! network. Renewable generation (`timestamp,country,mw`) supplies the two
//! covariate panels.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::ops::{Range, RangeInclusive};
use std::str::FromStr;

use chrono::{DateTime, Datelike, Days, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::cusum::{monitor_network, ChartState, MonitorReport};
use crate::error::{Error, Result};
use crate::gnarx::{forecast_errors, GnarxOrder, GnarxParams, Panel, TenSeries};
use crate::graph::{neighbourhoods, to_line_graph, Graph};

pub const HOURS_PER_WEEK: usize = 168;

/// Weeks whose hourly coverage falls below this fraction are flagged.
pub const MIN_COVERAGE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub timestamp: DateTime<Utc>,
    pub from: String,
    pub to: String,
    /// Megawatts; `None` when the export has no value for the hour.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub timestamp: DateTime<Utc>,
    pub country: String,
    pub value: Option<f64>,
}

/// A CSV row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<RowError>,
}

/// ISO-8601 instant; offsets are converted to UTC, naive times taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    let naive = s.strip_suffix('Z').unwrap_or(s);
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|fmt| NaiveDateTime::parse_from_str(naive, fmt).ok())
    .map(|n| n.and_utc())
}

fn parse_mw(s: &str) -> std::result::Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| format!("unparseable value `{s}`"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("value {v} is not a non-negative number"));
    }
    Ok(Some(v))
}

fn read_rows<R: Read, T>(
    input: R,
    header: &[&str],
    mut build: impl FnMut(&csv::StringRecord) -> std::result::Result<T, String>,
) -> Result<Parsed<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let found: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Data(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            found.join(",")
        )));
    }
    let mut parsed = Parsed {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for row in reader.records() {
        match row {
            Err(e) => parsed.errors.push(RowError {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                let result = if rec.len() != header.len() {
                    Err(format!(
                        "expected {} fields, found {}",
                        header.len(),
                        rec.len()
                    ))
                } else {
                    build(&rec)
                };
                match result {
                    Ok(r) => parsed.records.push(r),
                    Err(message) => parsed.errors.push(RowError { line, message }),
                }
            }
        }
    }
    Ok(parsed)
}

/// Reads `timestamp,from,to,mw`. Malformed rows are collected, not fatal.
pub fn read_flow_records<R: Read>(input: R) -> Result<Parsed<FlowRecord>> {
    read_rows(input, &["timestamp", "from", "to", "mw"], |rec| {
        let timestamp =
            parse_timestamp(&rec[0]).ok_or_else(|| format!("bad timestamp `{}`", &rec[0]))?;
        let (from, to) = (rec[1].to_string(), rec[2].to_string());
        if from.is_empty() || to.is_empty() {
            return Err("empty country code".into());
        }
        if from == to {
            return Err(format!("flow from {from} to itself"));
        }
        Ok(FlowRecord {
            timestamp,
            from,
            to,
            value: parse_mw(&rec[3])?,
        })
    })
}

/// Reads `timestamp,country,mw`.
pub fn read_generation_records<R: Read>(input: R) -> Result<Parsed<GenerationRecord>> {
    read_rows(input, &["timestamp", "country", "mw"], |rec| {
        let timestamp =
            parse_timestamp(&rec[0]).ok_or_else(|| format!("bad timestamp `{}`", &rec[0]))?;
        if rec[1].is_empty() {
            return Err("empty country code".into());
        }
        Ok(GenerationRecord {
            timestamp,
            country: rec[1].to_string(),
            value: parse_mw(&rec[2])?,
        })
    })
}

/// Sunday closing the Monday–Sunday week that contains `date`.
pub fn week_end(date: NaiveDate) -> NaiveDate {
    let to_sunday = 6 - date.weekday().num_days_from_monday();
    date + Days::new(u64::from(to_sunday))
}

/// Weekly totals for one key on a shared week axis.
#[derive(Debug, Clone, PartialEq)]
struct WeeklyTotals {
    sums: Vec<Option<f64>>,
    coverage: Vec<f64>,
}

type WeeklyTable<K> = (Vec<NaiveDate>, BTreeMap<K, WeeklyTotals>);

/// Sums values per key and week. Values are added in timestamp order so the
/// result does not depend on input order.
fn weekly_totals<K: Ord + Clone + fmt::Debug>(
    items: impl Iterator<Item = (K, DateTime<Utc>, Option<f64>)>,
) -> std::result::Result<WeeklyTable<K>, (K, DateTime<Utc>)> {
    let mut by_key: BTreeMap<K, BTreeMap<i64, Option<f64>>> = BTreeMap::new();
    for (key, ts, value) in items {
        let slot = by_key.entry(key.clone()).or_default();
        if slot.insert(ts.timestamp(), value).is_some() {
            return Err((key, ts));
        }
    }
    let stamps = || by_key.values().flat_map(|m| m.keys().copied());
    let (Some(min), Some(max)) = (stamps().min(), stamps().max()) else {
        return Ok((Vec::new(), BTreeMap::new()));
    };
    let to_week = |secs: i64| week_end(DateTime::from_timestamp(secs, 0).unwrap().date_naive());
    let first = to_week(min);
    let n_weeks = ((to_week(max) - first).num_days() / 7 + 1) as usize;
    let weeks: Vec<NaiveDate> = (0..n_weeks)
        .map(|i| first + Days::new(7 * i as u64))
        .collect();

    let totals = by_key
        .into_iter()
        .map(|(key, values)| {
            let mut sums = vec![None; n_weeks];
            let mut hours: Vec<Vec<i64>> = vec![Vec::new(); n_weeks];
            for (secs, value) in values {
                let Some(v) = value else { continue };
                let w = ((to_week(secs) - first).num_days() / 7) as usize;
                *sums[w].get_or_insert(0.0) += v;
                let hour = secs.div_euclid(3600);
                if hours[w].last() != Some(&hour) {
                    hours[w].push(hour);
                }
            }
            let coverage = hours
                .iter()
                .map(|h| (h.len() as f64 / HOURS_PER_WEEK as f64).min(1.0))
                .collect();
            (key, WeeklyTotals { sums, coverage })
        })
        .collect();
    Ok((weeks, totals))
}

/// Weekly flows of one country pair in canonical orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    pub side1: String,
    pub side2: String,
    pub weeks: Vec<NaiveDate>,
    /// Flow from side 1 to side 2, MW summed over the week.
    pub f1: Vec<Option<f64>>,
    /// Flow from side 2 to side 1.
    pub f2: Vec<Option<f64>>,
    pub coverage1: Vec<f64>,
    pub coverage2: Vec<f64>,
}

impl PairSeries {
    pub fn label(&self) -> String {
        format!("{}-{}", self.side1, self.side2)
    }

    pub fn low_coverage(&self, week: usize) -> bool {
        self.coverage1[week] < MIN_COVERAGE || self.coverage2[week] < MIN_COVERAGE
    }

    /// The same pair with the orientation reversed.
    pub fn swapped(&self) -> PairSeries {
        PairSeries {
            side1: self.side2.clone(),
            side2: self.side1.clone(),
            weeks: self.weeks.clone(),
            f1: self.f2.clone(),
            f2: self.f1.clone(),
            coverage1: self.coverage2.clone(),
            coverage2: self.coverage1.clone(),
        }
    }
}

/// Aggregates hourly records into weekly, canonically oriented pair series.
/// All pairs share one week axis spanning the whole input. A week without
/// any observed hour for a direction is missing.
pub fn aggregate_weekly(records: &[FlowRecord]) -> Result<Vec<PairSeries>> {
    if records.is_empty() {
        return Err(Error::Data("no flow records".into()));
    }
    let (weeks, totals) = weekly_totals(
        records
            .iter()
            .map(|r| ((r.from.clone(), r.to.clone()), r.timestamp, r.value)),
    )
    .map_err(|((from, to), ts)| Error::DuplicateRecord {
        timestamp: ts.to_rfc3339(),
        from,
        to,
    })?;

    let n_weeks = weeks.len();
    let mut pairs: BTreeMap<(String, String), PairSeries> = BTreeMap::new();
    for ((from, to), t) in totals {
        let forward = from < to;
        let (a, b) = if forward { (from, to) } else { (to, from) };
        let entry = pairs
            .entry((a.clone(), b.clone()))
            .or_insert_with(|| PairSeries {
                side1: a,
                side2: b,
                weeks: weeks.clone(),
                f1: vec![None; n_weeks],
                f2: vec![None; n_weeks],
                coverage1: vec![0.0; n_weeks],
                coverage2: vec![0.0; n_weeks],
            });
        if forward {
            entry.f1 = t.sums;
            entry.coverage1 = t.coverage;
        } else {
            entry.f2 = t.sums;
            entry.coverage2 = t.coverage;
        }
    }
    Ok(pairs.into_values().collect())
}

/// Weekly aggregation statistic of the two flows of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// `ln(f1 + f2 + 1)`: overall exchange strength.
    M1,
    /// `ln(f1 + 1) - ln(f2 + 1)`: log asymmetry.
    M2,
    /// `(f1 - f2) / (f1 + f2)`: proportional asymmetry, missing at 0/0.
    M3,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::M1, Statistic::M2, Statistic::M3];

    pub fn evaluate(self, f1: f64, f2: f64) -> Option<f64> {
        match self {
            Statistic::M1 => Some((f1 + f2).ln_1p()),
            Statistic::M2 => Some(f1.ln_1p() - f2.ln_1p()),
            Statistic::M3 => {
                let total = f1 + f2;
                (total > 0.0).then(|| (f1 - f2) / total)
            }
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::M1 => "m1",
            Statistic::M2 => "m2",
            Statistic::M3 => "m3",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Statistic::M1),
            "m2" => Ok(Statistic::M2),
            "m3" => Ok(Statistic::M3),
            other => Err(Error::Config(format!(
                "unknown statistic `{other}` (m1, m2, m3)"
            ))),
        }
    }
}

/// Weekly series of `statistic` for one pair; missing flows propagate.
pub fn apply_statistic(pair: &PairSeries, statistic: Statistic) -> Vec<Option<f64>> {
    pair.f1
        .iter()
        .zip(&pair.f2)
        .map(|(f1, f2)| match (f1, f2) {
            (Some(f1), Some(f2)) => statistic.evaluate(*f1, *f2),
            _ => None,
        })
        .collect()
}

fn country_index(pairs: &[PairSeries]) -> BTreeMap<&str, usize> {
    let mut countries: Vec<&str> = pairs
        .iter()
        .flat_map(|p| [p.side1.as_str(), p.side2.as_str()])
        .collect();
    countries.sort_unstable();
    countries.dedup();
    countries
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect()
}

/// Country network whose undirected edges are the pairs; node `i` is the
/// `i`-th country in sorted order.
pub fn country_graph(pairs: &[PairSeries]) -> Result<(Graph, Vec<String>)> {
    let index = country_index(pairs);
    let edges = pairs
        .iter()
        .map(|p| (index[p.side1.as_str()], index[p.side2.as_str()]));
    let graph = Graph::from_edges(index.len(), edges, false)?;
    if graph.n_edges() != pairs.len() {
        return Err(Error::Data("country pairs are not unique".into()));
    }
    Ok((graph, index.keys().map(|c| c.to_string()).collect()))
}

/// Line graph of the country network with node `k` carrying `pairs[k]`.
pub fn build_pair_graph(pairs: &[PairSeries]) -> Result<Graph> {
    if pairs.len() < 2 {
        return Err(Error::Data(format!(
            "{} country pair(s); at least 2 are needed",
            pairs.len()
        )));
    }
    let (countries, names) = country_graph(pairs)?;
    let line = to_line_graph(&countries)?;
    let position: HashMap<(usize, usize), usize> = line
        .edge_map
        .iter()
        .enumerate()
        .map(|(node, &e)| (e, node))
        .collect();
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let node_of: Vec<usize> = pairs
        .iter()
        .map(|p| {
            let (a, b) = (index[p.side1.as_str()], index[p.side2.as_str()]);
            position[&(a.min(b), a.max(b))]
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            if line.graph.has_edge(node_of[i], node_of[j]) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(pairs.len(), edges, false)
}

/// Weekly generation totals per country.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryWeekly {
    pub weeks: Vec<NaiveDate>,
    pub totals: BTreeMap<String, Vec<Option<f64>>>,
    pub coverage: BTreeMap<String, Vec<f64>>,
}

pub fn aggregate_country_weekly(records: &[GenerationRecord]) -> Result<CountryWeekly> {
    let (weeks, totals) = weekly_totals(
        records
            .iter()
            .map(|r| (r.country.clone(), r.timestamp, r.value)),
    )
    .map_err(|(country, ts)| Error::DuplicateRecord {
        timestamp: ts.to_rfc3339(),
        from: country,
        to: String::new(),
    })?;
    let mut out = CountryWeekly {
        weeks,
        totals: BTreeMap::new(),
        coverage: BTreeMap::new(),
    };
    for (country, t) in totals {
        out.totals.insert(country.clone(), t.sums);
        out.coverage.insert(country, t.coverage);
    }
    Ok(out)
}

/// Covariate panels `z1 = ln(R(side1) + 1)`, `z2 = ln(R(side2) + 1)` aligned
/// to the pair weeks.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariatePanels {
    pub z1: Panel,
    pub z2: Panel,
    /// Pair-side countries without any generation data.
    pub missing_countries: Vec<String>,
}

pub fn build_covariates(
    generation: &CountryWeekly,
    pairs: &[PairSeries],
) -> Result<CovariatePanels> {
    let weeks = pairs
        .first()
        .map(|p| p.weeks.as_slice())
        .ok_or_else(|| Error::Data("no country pairs".into()))?;
    let week_pos: HashMap<NaiveDate, usize> = generation
        .weeks
        .iter()
        .enumerate()
        .map(|(i, &w)| (w, i))
        .collect();
    let mut z1 = Panel::missing(pairs.len(), weeks.len());
    let mut z2 = Panel::missing(pairs.len(), weeks.len());
    let mut missing_countries = Vec::new();

    for (k, pair) in pairs.iter().enumerate() {
        for (side, panel) in [(&pair.side1, &mut z1), (&pair.side2, &mut z2)] {
            let Some(totals) = generation.totals.get(side) else {
                if !missing_countries.contains(side) {
                    missing_countries.push(side.clone());
                }
                continue;
            };
            for (j, week) in weeks.iter().enumerate() {
                let v = week_pos.get(week).and_then(|&i| totals[i]);
                panel.set(k, j, v.map(f64::ln_1p));
            }
        }
    }
    missing_countries.sort();
    Ok(CovariatePanels {
        z1,
        z2,
        missing_countries,
    })
}

/// Index ranges of the two monitoring phases on a week axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSplit {
    pub phase1: Range<usize>,
    pub phase2: Range<usize>,
}

/// Calendar windows 2018–2019 (Phase I) and 2020–2022 (Phase II).
pub fn default_phase_windows() -> (RangeInclusive<NaiveDate>, RangeInclusive<NaiveDate>) {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    (
        d(2018, 1, 1)..=d(2019, 12, 31),
        d(2020, 1, 1)..=d(2022, 12, 31),
    )
}

/// Splits a sorted week axis by week-end label. Phase II must start right
/// after Phase I ends.
pub fn split_phases(
    weeks: &[NaiveDate],
    phase1: RangeInclusive<NaiveDate>,
    phase2: RangeInclusive<NaiveDate>,
) -> Result<PhaseSplit> {
    if phase1.end() >= phase2.start() {
        return Err(Error::Config(format!(
            "Phase I ends {} but Phase II starts {}",
            phase1.end(),
            phase2.start()
        )));
    }
    let range_of = |window: &RangeInclusive<NaiveDate>| {
        let start = weeks.partition_point(|w| w < window.start());
        let end = weeks.partition_point(|w| w <= window.end());
        start..end.max(start)
    };
    let (p1, p2) = (range_of(&phase1), range_of(&phase2));
    if p1.is_empty() {
        return Err(Error::Data("Phase I contains no weeks".into()));
    }
    if p2.is_empty() {
        return Err(Error::Data("Phase II contains no weeks".into()));
    }
    if p1.end != p2.start {
        return Err(Error::Data(format!(
            "{} week(s) fall between Phase I and Phase II",
            p2.start - p1.end
        )));
    }
    Ok(PhaseSplit {
        phase1: p1,
        phase2: p2,
    })
}

impl PhaseSplit {
    /// Phase I time points usable as responses for `order`; also the
    /// window of the Phase I forecast errors.
    pub fn fit_rows(&self, order: &GnarxOrder) -> Range<usize> {
        self.phase1.start.max(order.max_lag()).min(self.phase1.end)..self.phase1.end
    }
}

/// Charts calibrated on the Phase I forecast errors and run through Phase II.
#[derive(Debug, Clone)]
pub struct PhaseMonitoring {
    pub charts: Vec<ChartState>,
    pub phase1_errors: Panel,
    pub phase2_errors: Panel,
    pub report: MonitorReport,
}

/// Calibrates one chart per flow on the Phase I errors of `params` and
/// monitors Phase II with threshold `w`.
pub fn monitor_phases(
    series: &TenSeries,
    graph: &Graph,
    params: &GnarxParams,
    phases: &PhaseSplit,
    zeta: f64,
    nu: f64,
    w: f64,
) -> Result<PhaseMonitoring> {
    if phases.phase2.end > series.n_times() {
        return Err(Error::Data(format!(
            "Phase II ends at week {} but the series has {}",
            phases.phase2.end,
            series.n_times()
        )));
    }
    let nbrs = neighbourhoods(graph, params.order().max_stage().max(1))?;
    let phase1_errors = forecast_errors(params, series, &nbrs, phases.fit_rows(params.order()))?;
    let mut charts = (0..series.n_flows())
        .map(|i| {
            ChartState::calibrate(phase1_errors.row(i), zeta, nu).map_err(|e| match e {
                Error::Data(msg) => Error::Data(format!("flow {}: {msg}", series.labels()[i])),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let phase2_errors = forecast_errors(params, series, &nbrs, phases.phase2.clone())?;
    let report = monitor_network(&mut charts, &phase2_errors, w)?;
    Ok(PhaseMonitoring {
        charts,
        phase1_errors,
        phase2_errors,
        report,
    })
}

/// Everything the model needs from one ingest.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub statistic: Statistic,
    pub pairs: Vec<PairSeries>,
    pub weeks: Vec<NaiveDate>,
    pub graph: Graph,
    /// Rows are pairs (labelled `A-B`), columns weeks; covariates `z1, z2`.
    pub series: TenSeries,
    pub missing_countries: Vec<String>,
}

pub fn prepare(
    flows: &[FlowRecord],
    generation: &[GenerationRecord],
    statistic: Statistic,
) -> Result<PreparedData> {
    let pairs = aggregate_weekly(flows)?;
    let graph = build_pair_graph(&pairs)?;
    let values: Vec<Vec<Option<f64>>> = pairs
        .iter()
        .map(|p| apply_statistic(p, statistic))
        .collect();
    let covariates = build_covariates(&aggregate_country_weekly(generation)?, &pairs)?;
    let labels = pairs.iter().map(PairSeries::label).collect();
    let series = TenSeries::new(
        Panel::from_optional_rows(&values)?,
        vec![covariates.z1, covariates.z2],
        labels,
    )?;
    Ok(PreparedData {
        statistic,
        weeks: pairs[0].weeks.clone(),
        pairs,
        graph,
        series,
        missing_countries: covariates.missing_countries,
    })
}

/// CSV `week_end,pair,value`, week-major; missing values are empty.
pub fn write_panel_csv<W: Write>(
    out: W,
    weeks: &[NaiveDate],
    labels: &[String],
    panel: &Panel,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["week_end", "pair", "value"])?;
    for (j, week) in weeks.iter().enumerate() {
        for (k, label) in labels.iter().enumerate() {
            let value = panel.get(k, j).map(|v| v.to_string()).unwrap_or_default();
            w.write_record([week.to_string().as_str(), label.as_str(), value.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}
