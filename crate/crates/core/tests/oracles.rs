//! Independent numerical oracles: quadrature, brute-force scans and
//! Monte-Carlo estimates checked against the closed forms.

use belief_info::critical;
use belief_info::experiments::{self, ExperimentConfig, Scenario};
use belief_info::gaussian::{self, Gaussian, LocationModel};
use belief_info::measures::{self, BeliefWeights, Categorical, Units};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn scalar_view_information_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (nu, c) = (rng.random_range(-2.0..2.0), rng.random_range(0.05..3.0));
        let (m1, s1) = (rng.random_range(-2.0..2.0), rng.random_range(0.05..3.0));
        let (m0, s0) = (rng.random_range(-2.0..2.0), rng.random_range(0.05..3.0));
        let g = |m: f64, v: f64| Gaussian::from_rows(vec![m], vec![vec![v]]).unwrap();
        let closed = gaussian::info_gaussian_view(&g(nu, c), &g(m1, s1), &g(m0, s0)).unwrap().nats();
        let integrand =
            |x: f64| normal_log_pdf(x, nu, c).exp() * (normal_log_pdf(x, m1, s1) - normal_log_pdf(x, m0, s0));
        let half = 14.0 * c.sqrt();
        let numeric = integrate(&integrand, nu - half, nu + half, 1e-11);
        assert!((closed - numeric).abs() < 1e-6, "{closed} vs {numeric}");
    }
}

/// Draws `ȳ ~ N(θ, Σ/n)` with `θ ~ prior`.
fn draw_mean(rng: &mut ChaCha8Rng, prior: &Gaussian, model: &LocationModel, n: usize) -> DVector<f64> {
    let d = prior.dim();
    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let theta = prior.mean() + prior.cov().factor() * z;
    let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    theta + model.noise_cov().factor() * e / (n as f64).sqrt()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn mutual_information_is_expected_posterior_divergence() {
    let prior = Gaussian::isotropic(2, 1.0).unwrap();
    let model = LocationModel::isotropic(2, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            let y = draw_mean(&mut rng, &prior, &model, 10);
            let post = gaussian::posterior(&prior, &model, 10, &y).unwrap();
            gaussian::kl_gaussian(&post, &prior).unwrap().nats()
        })
        .collect();
    let (mean, se) = mean_and_se(&samples);
    let exact = gaussian::mutual_info_gaussian(&prior, &model, 10).unwrap().nats();
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} ± {se} vs {exact}");
}

#[test]
fn gaussian_consistent_future_expectation() {
    let prior = Gaussian::from_rows(vec![0.5, -0.3], vec![vec![1.2, 0.3], vec![0.3, 0.8]]).unwrap();
    let model = LocationModel::new(nalgebra::DMatrix::from_row_slice(2, 2, &[0.6, -0.1, -0.1, 0.4])).unwrap();
    let q1 = Gaussian::from_rows(vec![1.0, 0.0], vec![vec![0.5, 0.0], vec![0.0, 0.7]]).unwrap();
    let q0 = Gaussian::from_rows(vec![-0.5, 0.2], vec![vec![2.0, 0.4], vec![0.4, 1.5]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            let y = draw_mean(&mut rng, &prior, &model, 3);
            let post = gaussian::posterior(&prior, &model, 3, &y).unwrap();
            gaussian::info_gaussian_view(&post, &q1, &q0).unwrap().nats()
        })
        .collect();
    let (mean, se) = mean_and_se(&samples);
    let now = gaussian::info_gaussian_view(&prior, &q1, &q0).unwrap().nats();
    assert!((mean - now).abs() <= 3.0 * se, "{mean} ± {se} vs {now}");
}

#[test]
fn annealing_solver_hits_random_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let n = rng.random_range(2..9);
        let prior: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = prior.iter().sum();
        let prior = Categorical::new(prior.iter().map(|p| p / z).collect()).unwrap();
        let like = BeliefWeights::new((0..n).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap();
        let post = critical::anneal(&prior, &like, 1.0).unwrap().to_weights();
        let f = |l: f64| {
            measures::info(&critical::anneal(&prior, &like, l).unwrap(), &post, &prior.to_weights()).unwrap().nats()
        };
        let lambda_true = rng.random_range(0.0..3.0);
        let target = f(lambda_true);
        let (lambda, r) = critical::solve_annealing_lambda(&prior, &like, target, 1e-10).unwrap();
        let hit = measures::info(&r, &post, &prior.to_weights()).unwrap().nats();
        assert!((hit - target).abs() <= 1e-8, "{hit} vs {target} (λ {lambda} vs {lambda_true})");
    }
}

#[test]
fn record_additivity_audit() {
    let config = ExperimentConfig { num_experiments: 200, master_seed: 8, ..Default::default() };
    let prior = config.prior().unwrap();
    for i in 0..200 {
        let r = experiments::run_experiment(&config, i).unwrap();
        let post1 = &r.stage_posteriors[0];
        for view in &r.stage_posteriors {
            let direct = gaussian::info_gaussian_view(view, post1, &prior).unwrap().nats();
            for mid in &r.stage_posteriors {
                let split = gaussian::info_gaussian_view(view, post1, mid).unwrap().nats()
                    + gaussian::info_gaussian_view(view, mid, &prior).unwrap().nats();
                assert!((direct - split).abs() <= 1e-9);
            }
        }
        assert!(r.first_inference_info_per_view[0] >= 0.0);
    }
}

#[test]
fn genuine_ensemble_mean_matches_mutual_information() {
    let config = ExperimentConfig { num_experiments: 100_000, master_seed: 21, ..Default::default() };
    let summary = experiments::run_ensemble(&config).unwrap();
    let stage = &summary.stages[0];
    let se = (stage.variance / 100_000.0).sqrt();
    assert!((stage.mean - (41.0f64).ln()).abs() <= 3.0 * se, "{} ± {se}", stage.mean);
    assert!(stage.min.value >= summary.covariance_floor - 1e-9);
    for s in &summary.stages {
        assert_eq!(s.histogram_bits.total(), 100_000);
    }
}

#[test]
fn inconsistent_ensemble_has_negative_median() {
    let config = ExperimentConfig {
        num_experiments: 1000,
        master_seed: 4,
        scenario: Scenario::Inconsistent,
        ..Default::default()
    };
    let summary = experiments::run_ensemble(&config).unwrap();
    assert!(summary.stages[1].median < 0.0);
}

#[test]
fn tiny_noise_posterior_tracks_sample_mean() {
    let config = ExperimentConfig {
        noise_sigma: 1e-6,
        batch_sizes: vec![5],
        num_experiments: 1,
        ..Default::default()
    };
    let r = experiments::run_experiment(&config, 0).unwrap();
    let post = &r.stage_posteriors[0];
    for (m, y) in post.mean().iter().zip(&r.batch_means[0]) {
        assert!((m - y).abs() < 1e-9);
    }
}

#[test]
fn laplace_fit_recovers_synthetic_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (loc, scale) = (5.3576, std::f64::consts::LOG2_E);
    let values: Vec<f64> = (0..100_000)
        .map(|_| {
            let u: f64 = rng.random_range(-0.5..0.5);
            loc - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect();
    let fit = experiments::laplace_fit(&values).unwrap();
    assert!((fit.location - loc).abs() <= 0.02 * loc);
    assert!((fit.scale - scale).abs() <= 0.02 * scale);
}

#[test]
fn golden_record_is_stable() {
    let config = ExperimentConfig { master_seed: 42, ..Default::default() };
    let record = experiments::run_experiment(&config, 0).unwrap();
    let json = serde_json::to_string_pretty(&record).unwrap();
    let golden = include_str!("golden/seed42_index0.json");
    assert_eq!(json.trim_end(), golden.trim_end());
    let mut stage_one_bits = Units::Bits.from_nats(record.first_inference_info_per_view[0]);
    stage_one_bits -= Units::Bits.from_nats(experiments::covariance_floor(&config).unwrap());
    assert!(stage_one_bits >= 0.0);
}
