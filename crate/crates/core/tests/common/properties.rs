//! Property checks shared by the proptest suite and the acceptance harness.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use tenmon_core::cusum::{monitor_network, ChartState};
use tenmon_core::data::{apply_statistic, PairSeries, Statistic};
use tenmon_core::gnarx::Panel;
use tenmon_core::graph::{neighbourhoods, Graph};
use tenmon_core::simulate::{
    run_scenario_with_zeta, AdjacencySource, ChangeScope, ChangedParameter, ScenarioSpec,
};

pub fn graph() -> impl Strategy<Value = Graph> {
    (2usize..=9, any::<bool>()).prop_flat_map(|(n, directed)| {
        proptest::collection::vec(proptest::bool::weighted(0.35), n * n).prop_map(move |bits| {
            let edges = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| i != j && bits[i * n + j] && (directed || i < j));
            Graph::from_edges(n, edges, directed).unwrap()
        })
    })
}

pub fn weights_sum_to_one(g: &Graph, r_max: usize) -> Result<(), TestCaseError> {
    let table = neighbourhoods(g, r_max).unwrap();
    for node in 0..g.n_nodes() {
        for r in 1..=r_max {
            let total: f64 = table.weights(node, r).map(|(_, w)| w).sum();
            let size = table.stage(node, r).len();
            if size == 0 {
                prop_assert_eq!(total, 0.0);
            } else {
                prop_assert!(
                    (total - 1.0).abs() < 1e-12,
                    "node {} stage {}: {}",
                    node,
                    r,
                    total
                );
            }
        }
    }
    Ok(())
}

/// Phase I streams, a Phase II error panel with gaps, and a critical value.
pub fn monitoring_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<Option<f64>>>, f64, f64)>
{
    (1usize..8, 1usize..30).prop_flat_map(|(n, k)| {
        (
            proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 8..30), n),
            proptest::collection::vec(
                proptest::collection::vec(proptest::option::weighted(0.85, -6.0f64..6.0), k),
                n,
            ),
            0.05f64..3.0,
            0.05f64..=1.0,
        )
    })
}

pub fn intensity_monotone(
    phase1: &[Vec<f64>],
    phase2: &[Vec<Option<f64>>],
    zeta: f64,
    w: f64,
) -> Result<(), TestCaseError> {
    let mut charts = Vec::new();
    for p in phase1 {
        let p: Vec<Option<f64>> = p.iter().copied().map(Some).collect();
        match ChartState::calibrate(&p, zeta, 0.0) {
            Ok(c) => charts.push(c),
            Err(_) => return Err(TestCaseError::reject("degenerate Phase I")),
        }
    }
    let panel = Panel::from_optional_rows(phase2).unwrap();
    let report = monitor_network(&mut charts, &panel, w).unwrap();
    prop_assert_eq!(report.intensity.len(), panel.n_cols());
    prop_assert!(report.intensity.windows(2).all(|p| p[0] <= p[1]));
    prop_assert!(report.intensity.iter().all(|&v| (0.0..=1.0).contains(&v)));
    if let Some(t) = report.network_alarm_time {
        prop_assert!(report.intensity[t - 1] >= w - 1e-9);
        prop_assert!(t == 1 || report.intensity[t - 2] < w - 1e-9);
    }
    Ok(())
}

pub fn shift_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (
        proptest::collection::vec(-3.0f64..3.0, 5..60),
        proptest::collection::vec(-5.0f64..5.0, 1..80),
        -100.0f64..100.0,
    )
}

/// `D` depends on the errors only through their deviations from the
/// Phase I mean, so a common shift leaves it unchanged.
pub fn detector_shift_invariant(
    phase1: &[f64],
    phase2: &[f64],
    c: f64,
) -> Result<(), TestCaseError> {
    let base = super::incremental_d(phase1, phase2);
    let shift = |v: &[f64]| v.iter().map(|u| u + c).collect::<Vec<_>>();
    let moved = super::incremental_d(&shift(phase1), &shift(phase2));
    let scale = 1.0 + phase2.len() as f64 * (1.0 + c.abs()) * 1e-9;
    for (a, b) in base.iter().zip(&moved) {
        prop_assert!(
            (a - b).abs() <= 1e-6 * scale * (1.0 + a.abs()),
            "{} vs {}",
            a,
            b
        );
    }
    Ok(())
}

pub fn flows() -> impl Strategy<Value = (Vec<Option<f64>>, Vec<Option<f64>>)> {
    (1usize..12).prop_flat_map(|n| {
        let value = prop_oneof![
            1 => Just(Some(0.0)),
            1 => Just(None),
            6 => (0.0f64..1e6).prop_map(Some),
        ];
        (
            proptest::collection::vec(value.clone(), n),
            proptest::collection::vec(value, n),
        )
    })
}

pub fn pair_swap_antisymmetric(
    f1: &[Option<f64>],
    f2: &[Option<f64>],
) -> Result<(), TestCaseError> {
    let pair = PairSeries {
        side1: "AA".into(),
        side2: "BB".into(),
        weeks: Vec::new(),
        f1: f1.to_vec(),
        f2: f2.to_vec(),
        coverage1: vec![1.0; f1.len()],
        coverage2: vec![1.0; f2.len()],
    };
    let swapped = pair.swapped();
    for statistic in [Statistic::M2, Statistic::M3] {
        let a = apply_statistic(&pair, statistic);
        let b = apply_statistic(&swapped, statistic);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.map(|v| -v), *y);
        }
    }
    prop_assert_eq!(
        apply_statistic(&pair, Statistic::M1),
        apply_statistic(&swapped, Statistic::M1)
    );
    Ok(())
}

pub fn scenario() -> impl Strategy<Value = ScenarioSpec> {
    (any::<bool>(), 0usize..3, 0.0f64..1.0, any::<u64>()).prop_map(|(sbm, param, delta, seed)| {
        let (source, scope) = if sbm {
            (AdjacencySource::Sbm, ChangeScope::ClusterC1)
        } else {
            (AdjacencySource::ErdosRenyi, ChangeScope::AllFlows)
        };
        let param = [
            ChangedParameter::Alpha,
            ChangedParameter::Beta,
            ChangedParameter::Gamma1,
        ][param];
        ScenarioSpec::new(source, param, delta, scope, 3, seed)
    })
}

/// Identical spec and seed give bit-identical results, also when the
/// iterations run on a single thread.
pub fn pipeline_deterministic(spec: &ScenarioSpec) -> Result<(), TestCaseError> {
    let zeta = 1.4;
    let first = run_scenario_with_zeta(spec, zeta).unwrap();
    let second = run_scenario_with_zeta(spec, zeta).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let serial = pool.install(|| run_scenario_with_zeta(spec, zeta).unwrap());
    prop_assert_eq!(&first, &second);
    prop_assert_eq!(&first, &serial);
    Ok(())
}
