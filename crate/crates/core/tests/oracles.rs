mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use tenmon_core::gnarx::{build_design, fit, GnarxOrder, Panel, TenSeries};
use tenmon_core::graph::{neighbourhoods, sample_erdos_renyi, sample_sbm, to_line_graph, Graph};
use tenmon_core::rng::{derive_seed, rng_from_seed};
use tenmon_core::simulate::{
    generate_ten, simulation_order, AdjacencySource, ChangeScope, ChangedParameter, ScenarioSpec,
};

#[test]
fn line_graph_matches_pairwise_definition_on_small_directed_graphs() {
    for n in 2..=4 {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .collect();
        for mask in 1u64..1 << pairs.len() {
            let edges = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &e)| e);
            let g = Graph::from_edges(n, edges, true).unwrap();
            common::check_line_graph(&g, &to_line_graph(&g).unwrap()).unwrap();
        }
    }
}

#[test]
fn stages_match_shortest_path_distances() {
    for n in 1..=5 {
        for g in common::all_undirected_graphs(n) {
            let d = common::floyd_warshall(&g);
            let table = neighbourhoods(&g, n.max(1)).unwrap();
            for i in 0..n {
                for r in 1..=n {
                    let mut got = table.stage(i, r).to_vec();
                    got.sort_unstable();
                    let want: Vec<usize> = (0..n).filter(|&j| d[i][j] == r).collect();
                    assert_eq!(got, want);
                }
            }
        }
    }
}

#[test]
fn sbm_edge_count_matches_expectation() {
    let samples = 10_000u64;
    let counts: Vec<f64> = (0..samples)
        .map(|s| {
            sample_sbm(&[5, 5], 0.8, 0.2, derive_seed(9, &[s]))
                .unwrap()
                .graph
                .n_edges() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / samples as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let se = (var / samples as f64).sqrt();
    // 2 * C(5, 2) * 0.8 within communities plus 5 * 5 * 0.2 between.
    assert!((mean - 21.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn erdos_renyi_pairs_are_uniform() {
    let samples = 4000;
    let mut freq = vec![vec![0usize; 10]; 10];
    for s in 0..samples {
        let g = sample_erdos_renyi(10, 30, derive_seed(10, &[s])).unwrap();
        assert_eq!(g.n_edges(), 30);
        for (i, j) in g.edges() {
            freq[i][j] += 1;
        }
    }
    let p = 30.0 / 45.0;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    for i in 0..10 {
        for j in (i + 1)..10 {
            let f = freq[i][j] as f64 / samples as f64;
            assert!((f - p).abs() < 5.0 * se, "pair ({i}, {j}): {f}");
        }
    }
}

fn random_series(n: usize, t: usize, n_cov: usize, seed: u64) -> TenSeries {
    let mut rng = rng_from_seed(seed);
    let panel = |rng: &mut tenmon_core::rng::Rng| {
        let rows: Vec<Vec<Option<f64>>> = (0..n)
            .map(|_| {
                (0..t)
                    .map(|_| rng.random_bool(0.9).then(|| rng.random_range(-2.0..2.0)))
                    .collect()
            })
            .collect();
        Panel::from_optional_rows(&rows).unwrap()
    };
    let values = panel(&mut rng);
    let covs = (0..n_cov).map(|_| panel(&mut rng)).collect();
    TenSeries::unlabelled(values, covs).unwrap()
}

/// Regressors of `(node, t)` written out from the model definition.
fn naive_row(
    s: &TenSeries,
    g: &Graph,
    order: &GnarxOrder,
    node: usize,
    t: usize,
) -> Option<Vec<f64>> {
    let n = s.n_flows();
    let d = common::floyd_warshall(g);
    let mut row = Vec::new();
    s.value(node, t)?;
    for l in 1..=order.p {
        let own = s.value(node, t - l)?;
        if order.global_alpha {
            row.push(own);
        } else {
            row.extend((0..n).map(|j| if j == node { own } else { 0.0 }));
        }
    }
    for (l0, &s_l) in order.s.iter().enumerate() {
        for r in 1..=s_l {
            let stage: Vec<usize> = (0..n).filter(|&j| d[node][j] == r).collect();
            let mut total = 0.0;
            for &j in &stage {
                total += s.value(j, t - l0 - 1)?;
            }
            row.push(if stage.is_empty() {
                0.0
            } else {
                total / stage.len() as f64
            });
        }
    }
    for (h, &q_h) in order.q.iter().enumerate() {
        for q in 0..=q_h {
            row.push(s.covariate(h, node, t - q)?);
        }
    }
    Some(row)
}

#[test]
fn design_matches_naive_construction() {
    let orders = [
        GnarxOrder::new(1, vec![1], vec![0, 0], true).unwrap(),
        GnarxOrder::new(2, vec![2, 1], vec![1], true).unwrap(),
        GnarxOrder::new(2, vec![0, 3], vec![], false).unwrap(),
    ];
    for (k, order) in orders.iter().enumerate() {
        for rep in 0..20u64 {
            let seed = derive_seed(11, &[k as u64, rep]);
            let n = 3 + (rep as usize % 5);
            let g = Graph::from_edges(
                n,
                (0..n)
                    .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| (i * 7 + j * 3 + rep as usize) % 3 != 0),
                false,
            )
            .unwrap();
            let s = random_series(n, 12, order.n_covariates(), seed);
            let nbrs = neighbourhoods(&g, order.max_stage().max(1)).unwrap();
            let design = build_design(&s, &nbrs, order, order.max_lag()..12).unwrap();
            let mut expected_rows = Vec::new();
            for t in order.max_lag()..12 {
                for node in 0..n {
                    if let Some(row) = naive_row(&s, &g, order, node, t) {
                        expected_rows.push(((node, t), row, s.value(node, t).unwrap()));
                    }
                }
            }
            assert_eq!(design.n_rows(), expected_rows.len());
            for (i, (at, row, y)) in expected_rows.iter().enumerate() {
                assert_eq!(design.rows[i], *at);
                assert_eq!(design.response()[i], *y);
                for (a, b) in design.row(i).iter().zip(row) {
                    assert!((a - b).abs() < 1e-14, "{at:?}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn least_squares_matches_normal_equations() {
    let g = sample_erdos_renyi(6, 8, 12).unwrap();
    let s = random_series(6, 80, 2, 13);
    let order = GnarxOrder::new(2, vec![2, 1], vec![1, 0], true).unwrap();
    let fitted = fit(&s, &g, &order).unwrap();

    let nbrs = neighbourhoods(&g, 2).unwrap();
    let design = build_design(&s, &nbrs, &order, 2..80).unwrap();
    let x = DMatrix::from_row_slice(
        design.n_rows(),
        design.n_cols(),
        &(0..design.n_rows())
            .flat_map(|i| design.row(i).to_vec())
            .collect::<Vec<_>>(),
    );
    let y = DVector::from_column_slice(design.response());
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let beta = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let (n, k) = (x.nrows() as f64, x.ncols() as f64);
    let sigma2 = resid.norm_squared() / (n - k);
    for (j, c) in fitted.coefficients.iter().enumerate() {
        assert!(
            (c.estimate - beta[j]).abs() < 1e-9,
            "{}: {} vs {}",
            c.name,
            c.estimate,
            beta[j]
        );
        let se = (sigma2 * xtx_inv[(j, j)]).sqrt();
        assert!((c.std_error - se).abs() < 1e-9 * (1.0 + se));
    }
    assert!((fitted.rmse - (resid.norm_squared() / n).sqrt()).abs() < 1e-10);
    assert_eq!(fitted.n_obs_used, design.n_rows());
}

#[test]
fn detector_matches_brute_force() {
    for stream in 0..200u64 {
        let mut rng = rng_from_seed(derive_seed(14, &[stream]));
        let e: Vec<f64> = (0..120).map(|_| rng.random_range(-3.0..3.0)).collect();
        assert_eq!(
            common::incremental_d(&e[..40], &e[40..]),
            common::brute_force_d(&e[..40], &e[40..])
        );
    }
}

fn spec(param: ChangedParameter, delta: f64, seed: u64) -> ScenarioSpec {
    ScenarioSpec::new(
        AdjacencySource::ErdosRenyi,
        param,
        delta,
        ChangeScope::AllFlows,
        1,
        seed,
    )
}

#[test]
fn generated_flows_have_stationary_mean_zero() {
    let s = spec(ChangedParameter::Alpha, 0.0, 15);
    let data = generate_ten(&s, 16).unwrap();
    let n = data.graph.n_nodes();
    let nbrs = neighbourhoods(&data.graph, 1).unwrap();
    // x_t = A x_{t-1} + e_t with A = alpha I + beta W and Var(e) = (1 + g1^2 + g2^2) I.
    let mut a = DMatrix::<f64>::identity(n, n) * s.base.alpha;
    for i in 0..n {
        for (j, w) in nbrs.weights(i, 1) {
            a[(i, j)] += s.base.beta * w;
        }
    }
    let noise = 1.0 + s.base.gamma1.powi(2) + s.base.gamma2.powi(2);
    let inv = (DMatrix::identity(n, n) - a).try_inverse().unwrap();
    let long_run = &inv * inv.transpose() * noise;
    let range = s.lengths.burn_in..s.lengths.total();
    let t = range.len() as f64;
    for i in 0..n {
        let mean = range
            .clone()
            .map(|k| data.series.value(i, k).unwrap())
            .sum::<f64>()
            / t;
        let sd = (long_run[(i, i)] / t).sqrt();
        assert!(mean.abs() <= 4.0 * sd, "flow {i}: mean {mean}, sd {sd}");
    }
}

#[test]
fn refit_after_change_recovers_new_beta() {
    let mut s = spec(ChangedParameter::Beta, 0.3, 17);
    s.lengths.phase2_ic = 1;
    s.lengths.phase2_ooc = 99;
    let estimates: Vec<f64> = (0..20u64)
        .map(|i| {
            let data = generate_ten(&s, derive_seed(18, &[i])).unwrap();
            let post = s.lengths.change_start()..s.lengths.total();
            let f =
                tenmon_core::gnarx::fit_range(&data.series, &data.graph, &simulation_order(), post)
                    .unwrap();
            f.params.beta(1, 1)
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    assert!((mean - 0.6).abs() <= 0.1, "mean beta {mean}");
}
