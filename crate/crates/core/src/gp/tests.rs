use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::kernel::{eval_kernel, KernelSpec};

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Points {
    Points::from_flat(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let x = random_points(rng, n, d);
    let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Dataset::from_points(x, y).unwrap()
}

/// Dense LU-based oracle: mean, variance and log marginal likelihood without
/// any Cholesky factor.
fn dense_oracle(spec: &KernelSpec, noise: f64, data: &Dataset, x: &[f64]) -> (f64, f64, f64) {
    let n = data.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        eval_kernel(spec, data.inputs().row(i), data.inputs().row(j)).unwrap() + if i == j { noise } else { 0.0 }
    });
    let lu = a.clone().lu();
    let y = DVector::from_column_slice(data.outputs());
    let ks = DVector::from_fn(n, |i, _| eval_kernel(spec, data.inputs().row(i), x).unwrap());
    let w = lu.solve(&y).unwrap();
    let z = lu.solve(&ks).unwrap();
    let mean = ks.dot(&w);
    let var = eval_kernel(spec, x, x).unwrap() - ks.dot(&z);
    let lml = -0.5 * y.dot(&w) - 0.5 * a.determinant().ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    (mean, var, lml)
}

#[test]
fn empty_dataset_is_prior() {
    let spec = KernelSpec::gaussian(vec![0.3, 0.3], 1.7).unwrap();
    let m = GpModel::fit(&spec, 0.1, Dataset::empty(2)).unwrap();
    assert_eq!(m.posterior_mean(&[0.2, 0.4]).unwrap(), 0.0);
    assert_eq!(m.posterior_var(&[0.2, 0.4]).unwrap(), 1.7);
}

#[test]
fn one_point_closed_form() {
    let spec = KernelSpec::gaussian(vec![1.0], 1.0).unwrap();
    let data = Dataset::from_points(Points::from_rows(1, &[[0.5]]).unwrap(), vec![2.0]).unwrap();
    let m = GpModel::fit(&spec, 1.0, data).unwrap();
    assert!((m.posterior_mean(&[0.5]).unwrap() - 1.0).abs() < 1e-15);
    assert!((m.posterior_var(&[0.5]).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn matches_dense_oracle_on_twenty_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = KernelSpec::gaussian(vec![0.4, 0.7], 1.3).unwrap();
    let data = random_dataset(&mut rng, 20, 2);
    let m = GpModel::fit(&spec, 0.05, data.clone()).unwrap();
    assert_eq!(m.jitter(), 0.0);
    for _ in 0..10 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let (mu, var, lml) = dense_oracle(&spec, 0.05, &data, &x);
        assert!((m.posterior_mean(&x).unwrap() - mu).abs() < 1e-8);
        assert!((m.posterior_var(&x).unwrap() - var).abs() < 1e-8);
        assert!((m.log_marginal_likelihood() - lml).abs() < 1e-8 * lml.abs().max(1.0));
    }
}

#[test]
fn cholesky_reconstructs_training_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = KernelSpec::gaussian(vec![0.2], 1.0).unwrap();
    let data = random_dataset(&mut rng, 15, 1);
    let m = GpModel::fit(&spec, 1e-4, data.clone()).unwrap();
    let l = m.cholesky();
    let rec = l * l.transpose();
    let mut k = crate::kernel::kernel_matrix(&spec, data.inputs()).unwrap();
    for i in 0..15 {
        k[(i, i)] += 1e-4 + m.jitter();
    }
    assert!((rec - &k).norm() / k.norm() < 1e-8);
}

#[test]
fn noiseless_interpolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = KernelSpec::gaussian(vec![0.3, 0.3], 1.0).unwrap();
    let data = random_dataset(&mut rng, 12, 2);
    let m = GpModel::fit(&spec, 0.0, data.clone()).unwrap();
    assert!(m.jitter() <= 1e-10);
    for (x, y) in data.inputs().rows().zip(data.outputs()) {
        assert!((m.posterior_mean(x).unwrap() - y).abs() < 1e-5);
    }
}

#[test]
fn repeated_observation_recursion() {
    // one observation at x with k = 1, noise 1 gives sigma_n^2 = 0.5; a second
    // copy follows sigma_n^2 * noise / (sigma_n^2 + noise) = 1/3
    let spec = KernelSpec::gaussian(vec![1.0], 1.0).unwrap();
    let x = Points::from_rows(1, &[[0.2]]).unwrap();
    let m = GpModel::fit(&spec, 1.0, Dataset::from_points(x.clone(), vec![0.0]).unwrap()).unwrap();
    assert!((m.posterior_var(&[0.2]).unwrap() - 0.5).abs() < 1e-15);
    let m2 = m.condition_fantasy(&x, &[0.3]).unwrap();
    assert!((m2.posterior_var(&[0.2]).unwrap() - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn fantasy_equals_refit() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for config in 0..10 {
        let d = 1 + config % 3;
        let spec = KernelSpec::gaussian(vec![0.25 + 0.05 * config as f64; d], 1.0 + config as f64 * 0.1).unwrap();
        let data = random_dataset(&mut rng, 5 + config, d);
        let noise = 1e-3;
        let base = GpModel::fit(&spec, noise, data.clone()).unwrap();
        let xf = random_points(&mut rng, 1, d);
        let yf: f64 = rng.sample(StandardNormal);
        let fantasy = base.condition_fantasy(&xf, &[yf]).unwrap();

        let mut full = data.clone();
        full.push(xf.row(0), yf, full.next_label()).unwrap();
        let refit = GpModel::fit(&spec, noise, full).unwrap();
        for _ in 0..5 {
            let x = random_points(&mut rng, 1, d);
            let x = x.row(0);
            assert!((fantasy.posterior_mean(x).unwrap() - refit.posterior_mean(x).unwrap()).abs() < 1e-10);
            assert!((fantasy.posterior_var(x).unwrap() - refit.posterior_var(x).unwrap()).abs() < 1e-10);
        }
        assert!((fantasy.log_marginal_likelihood() - refit.log_marginal_likelihood()).abs() < 1e-10);
    }
}

#[test]
fn fantasy_on_empty_model() {
    let spec = KernelSpec::gaussian(vec![0.5], 1.0).unwrap();
    let prior = GpModel::fit(&spec, 0.1, Dataset::empty(1)).unwrap();
    let x = Points::from_rows(1, &[[0.1], [0.6]]).unwrap();
    let a = prior.condition_fantasy(&x, &[1.0, -1.0]).unwrap();
    let b = GpModel::fit(&spec, 0.1, Dataset::from_points(x, vec![1.0, -1.0]).unwrap()).unwrap();
    assert!((a.posterior_mean(&[0.3]).unwrap() - b.posterior_mean(&[0.3]).unwrap()).abs() < 1e-14);
}

#[test]
fn fantasy_variance_ignores_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let spec = KernelSpec::gaussian(vec![0.3, 0.3], 1.0).unwrap();
    let base = GpModel::fit(&spec, 1e-3, random_dataset(&mut rng, 8, 2)).unwrap();
    let xf = random_points(&mut rng, 3, 2);
    let a = base.condition_fantasy(&xf, &[0.0; 3]).unwrap();
    let b = base.condition_fantasy(&xf, &[100.0; 3]).unwrap();
    for _ in 0..10 {
        let x = random_points(&mut rng, 1, 2);
        assert!((a.posterior_var(x.row(0)).unwrap() - b.posterior_var(x.row(0)).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn seven_copies_follow_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let spec = KernelSpec::gaussian(vec![0.3, 0.3], 1.0).unwrap();
    let noise = 1e-3;
    let base = GpModel::fit(&spec, noise, random_dataset(&mut rng, 6, 2)).unwrap();
    let x = [0.42, 0.58];
    let s2n = base.posterior_var(&x).unwrap();
    let copies = Points::from_rows(2, &[x; 7]).unwrap();
    let fantasy = base.condition_fantasy(&copies, &[0.0; 7]).unwrap();
    let expected = s2n * noise / (7.0 * s2n + noise);
    assert!((fantasy.posterior_var(&x).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn fantasy_rejects_empty_and_mismatched() {
    let spec = KernelSpec::gaussian(vec![0.3], 1.0).unwrap();
    let base = GpModel::fit(&spec, 0.1, Dataset::empty(1)).unwrap();
    assert!(base.condition_fantasy(&Points::empty(1), &[]).is_err());
    let x = Points::from_rows(1, &[[0.1]]).unwrap();
    assert!(base.condition_fantasy(&x, &[1.0, 2.0]).is_err());
}

#[test]
fn lml_scalar_case() {
    let spec = KernelSpec::gaussian(vec![1.0], 1.0).unwrap();
    let data = Dataset::from_points(Points::from_rows(1, &[[0.0]]).unwrap(), vec![0.0]).unwrap();
    let m = GpModel::fit(&spec, 1.0, data).unwrap();
    let expected = -0.5 * 2f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((m.log_marginal_likelihood() - expected).abs() < 1e-14);
    assert!((m.log_marginal_likelihood() + 1.26551).abs() < 1e-5);
}

#[test]
fn lml_matches_dense_logdet_and_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let spec = KernelSpec::gaussian(vec![0.3, 0.5], 0.8).unwrap();
    let data = random_dataset(&mut rng, 15, 2);
    let m = GpModel::fit(&spec, 1e-2, data.clone()).unwrap();
    let (_, _, lml) = dense_oracle(&spec, 1e-2, &data, &[0.0, 0.0]);
    assert!((m.log_marginal_likelihood() - lml).abs() < 1e-8);

    let order: Vec<usize> = (0..15).rev().collect();
    let permuted = Dataset::from_points(
        data.inputs().select(&order),
        order.iter().map(|&i| data.outputs()[i]).collect(),
    )
    .unwrap();
    let mp = GpModel::fit(&spec, 1e-2, permuted).unwrap();
    assert!((m.log_marginal_likelihood() - mp.log_marginal_likelihood()).abs() < 1e-10);
}

#[test]
fn dataset_invariants() {
    let x = Points::from_rows(1, &[[0.0], [1.0]]).unwrap();
    assert!(Dataset::new(x.clone(), vec![1.0], vec![1, 2]).is_err());
    assert!(Dataset::new(x.clone(), vec![1.0, 2.0], vec![2, 1]).is_err());
    let mut d = Dataset::new(x, vec![1.0, 2.0], vec![1, 3]).unwrap();
    assert!(d.push(&[0.5], 0.0, 3).is_err());
    d.insert_sorted(&[0.5], 9.0, 2).unwrap();
    assert_eq!(d.labels(), &[1, 2, 3]);
    assert_eq!(d.outputs(), &[1.0, 9.0, 2.0]);
    assert_eq!(d.inputs().row(1), &[0.5]);
    assert!(d.insert_sorted(&[0.5], 9.0, 2).is_err());
}

#[test]
fn fit_rejects_negative_noise_and_wrong_dim() {
    let spec = KernelSpec::gaussian(vec![1.0], 1.0).unwrap();
    assert!(GpModel::fit(&spec, -1.0, Dataset::empty(1)).is_err());
    let data = Dataset::from_points(Points::from_rows(2, &[[0.0, 0.0]]).unwrap(), vec![1.0]).unwrap();
    assert!(GpModel::fit(&spec, 0.1, data).is_err());
}

fn gp_draw(rng: &mut ChaCha8Rng, spec: &KernelSpec, x: &Points, noise: f64) -> Vec<f64> {
    let mut k = crate::kernel::kernel_matrix(spec, x).unwrap();
    for i in 0..x.len() {
        k[(i, i)] += 1e-8;
    }
    let l = k.cholesky().unwrap().unpack();
    let z = DVector::from_fn(x.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    (l * z)
        .iter()
        .map(|v| v + noise.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[test]
fn hyperparameters_recover_lengthscale() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let truth = KernelSpec::gaussian(vec![0.2], 1.0).unwrap();
    let x = random_points(&mut rng, 60, 1);
    let y = gp_draw(&mut rng, &truth, &x, 1e-4);
    let data = Dataset::from_points(x, y).unwrap();
    let search = HyperSearchConfig {
        noise_variance: 1e-4,
        ..Default::default()
    };
    let fitted = fit_hyperparameters(&data, &search).unwrap();
    let l = fitted.lengthscales[0];
    assert!((0.1..=0.4).contains(&l), "lengthscale {l}");
}

#[test]
fn hyperparameter_search_never_worsens_its_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let truth = KernelSpec::gaussian(vec![0.3, 0.6], 1.5).unwrap();
    let x = random_points(&mut rng, 30, 2);
    let y = gp_draw(&mut rng, &truth, &x, 1e-3);
    let data = Dataset::from_points(x, y).unwrap();
    let search = HyperSearchConfig {
        noise_variance: 1e-3,
        starts: 0,
        initial: vec![truth.clone()],
        ..Default::default()
    };
    let fitted = fit_hyperparameters(&data, &search).unwrap();
    let lml = |s: &KernelSpec| GpModel::fit(s, 1e-3, data.clone()).unwrap().log_marginal_likelihood();
    assert!(lml(&fitted) >= lml(&truth) - 1e-6);
}

#[test]
fn hyperparameters_are_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let data = random_dataset(&mut rng, 12, 2);
    let order: Vec<usize> = vec![5, 2, 11, 0, 7, 1, 3, 10, 4, 9, 6, 8];
    let permuted = Dataset::from_points(
        data.inputs().select(&order),
        order.iter().map(|&i| data.outputs()[i]).collect(),
    )
    .unwrap();
    let search = HyperSearchConfig {
        starts: 4,
        ..Default::default()
    };
    assert_eq!(
        fit_hyperparameters(&data, &search).unwrap(),
        fit_hyperparameters(&permuted, &search).unwrap()
    );
}

#[test]
fn hyperparameters_need_two_points() {
    let data = Dataset::from_points(Points::from_rows(1, &[[0.0]]).unwrap(), vec![1.0]).unwrap();
    assert!(fit_hyperparameters(&data, &HyperSearchConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variance_bounded_and_monotone(seed in any::<u64>(), n in 0usize..10, noise in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = KernelSpec::gaussian(vec![0.3, 0.6], 1.2).unwrap();
        let base = GpModel::fit(&spec, noise, random_dataset(&mut rng, n, 2)).unwrap();
        let extra = random_points(&mut rng, 1, 2);
        let more = base.condition_fantasy(&extra, &[0.0]).unwrap();
        for _ in 0..8 {
            let x = random_points(&mut rng, 1, 2);
            let (v0, v1) = (base.posterior_var(x.row(0)).unwrap(), more.posterior_var(x.row(0)).unwrap());
            prop_assert!((0.0..=1.2).contains(&v0));
            prop_assert!(v1 <= v0 + 1e-9);
        }
    }
}
