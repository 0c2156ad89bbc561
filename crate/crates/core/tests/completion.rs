use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blockmc::harness::{self, ExperimentConfig};
use blockmc::linalg;
use blockmc::model::{self, FactorMode, SpectrumSpec, TailProfile};
use blockmc::rmse;
use blockmc::solver::{self, SolverConfig};

fn load_fixture(name: &str) -> Mat<f64> {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let rows: Vec<Vec<f64>> = std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

#[test]
fn svd_survives_clustered_spectrum() {
    // captured from a solver iterate on which the direct bidiagonal sweep stalls
    let a = load_fixture("svd_stall.csv");
    let svd = linalg::thin_svd(a.as_ref()).unwrap();
    let back = svd.compose(&svd.s);
    assert!(linalg::max_abs_diff(back.as_ref(), a.as_ref()) < 1e-12);
    assert!(linalg::orthonormality_deviation(svd.u.as_ref()).unwrap() < 1e-12);
    assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    let sv = linalg::singular_values(a.as_ref()).unwrap();
    for (x, y) in sv.iter().zip(&svd.s) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn worst_case_solution_matches_oracle() {
    let (n, k, l) = (40, 4, 36);
    let shape = model::make_shape(n, k, l).unwrap();
    let mask = model::build_mask(n, l, l).unwrap();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(70 + seed);
        let gt = model::build_ground_truth(shape, &SpectrumSpec::flat(50.0, 1.0), FactorMode::WorstCaseSymmetric, &mut rng).unwrap();
        let obs = model::apply_mask(&mask, gt.x_sol.as_ref()).unwrap();
        let c = solver::complete(&obs, &SolverConfig::default()).unwrap();
        assert!(c.converged);
        assert_eq!(c.feasibility_gap, 0.0);
        let raw = (&c.x_hat - &gt.x_sol).norm_l2();
        let scaled = rmse::scaled_rmse(raw, n, k, l).unwrap();
        let oracle = rmse::scaled_rmse(rmse::residual_oracle(gt.vperp(), l, 1.0).unwrap(), n, k, l).unwrap();
        assert!((scaled - oracle).abs() <= 0.02 * oracle, "seed {seed}: {scaled} vs {oracle}");
    }
}

#[test]
fn solver_ignores_masked_inputs_end_to_end() {
    let (n, k, l) = (30, 3, 27);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gt = model::build_ground_truth(
        model::make_shape(n, k, l).unwrap(),
        &SpectrumSpec::flat(10.0, 1.0),
        FactorMode::Asymmetric,
        &mut rng,
    )
    .unwrap();
    let mask = model::build_mask(n, l, l).unwrap();
    let obs = model::apply_mask(&mask, gt.x_sol.as_ref()).unwrap();
    let mut dirty = obs.clone();
    for i in l..n {
        for j in l..n {
            dirty.y[(i, j)] = 1e3 * (i as f64 - j as f64);
        }
    }
    let cfg = SolverConfig::default();
    let a = solver::complete(&obs, &cfg).unwrap();
    let b = solver::complete(&dirty, &cfg).unwrap();
    assert_eq!(linalg::max_abs_diff(a.x_hat.as_ref(), b.x_hat.as_ref()), 0.0);
}

#[test]
fn normalized_random_tails_have_fixed_norm() {
    for profile in [TailProfile::Gaussian, TailProfile::Uniform] {
        let spec = SpectrumSpec {
            sigma_mag: 50.0,
            sigma_eps: 1.0,
            tail_profile: profile,
            normalize_tail_norm: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gt = model::build_ground_truth(model::make_shape(40, 4, 36).unwrap(), &spec, FactorMode::WorstCaseSymmetric, &mut rng).unwrap();
        let norm = gt.eps_sigma.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 6.0).abs() < 1e-12);
    }
}

#[test]
fn sweep_is_thread_count_independent() {
    let cfg = ExperimentConfig {
        n: 20,
        beta_list: vec![0.05, 0.1],
        trials: 4,
        mode: FactorMode::Asymmetric,
        ..ExperimentConfig::table2(17)
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| harness::run_rmse_table(&cfg).unwrap())
    };
    let a = serde_json::to_string(&run(1)).unwrap();
    let b = serde_json::to_string(&run(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn flat_worst_case_dominates_asymmetric_small_run() {
    let base = ExperimentConfig {
        beta_list: vec![0.05, 0.1],
        trials: 12,
        ..ExperimentConfig::table2(31)
    };
    let worst = harness::run_rmse_table(&base).unwrap();
    let asym = harness::run_rmse_table(&ExperimentConfig {
        mode: FactorMode::Asymmetric,
        ..base.clone()
    })
    .unwrap();
    for (w, a) in worst.cells.iter().zip(&asym.cells) {
        let se = (w.std_error.powi(2) + a.std_error.powi(2)).sqrt();
        assert!(a.mean_scaled_rmse <= w.mean_scaled_rmse + 2.0 * se);
        let xi = w.theory_xi.unwrap();
        assert!((w.mean_oracle_scaled.unwrap() - xi).abs() < 0.15 * xi);
    }
}

#[test]
fn cell_statistics_reproducible_from_trials() {
    let cfg = ExperimentConfig {
        n: 20,
        beta_list: vec![0.1],
        trials: 5,
        ..ExperimentConfig::table2(2)
    };
    let r = harness::run_rmse_table(&cfg).unwrap();
    let values: Vec<f64> = r.trials_of(0).map(|t| t.scaled_rmse).collect();
    let (mean, se) = harness::mean_and_se(&values);
    assert_eq!(r.cells[0].mean_scaled_rmse, mean);
    assert_eq!(r.cells[0].std_error, se);
    let seeds: Vec<u64> = r.trials_of(0).map(|t| t.seed).collect();
    let expected: Vec<u64> = (0..5).map(|t| harness::seed_trial(2, 0, t)).collect();
    assert_eq!(seeds, expected);
}
