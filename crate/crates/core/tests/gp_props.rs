mod common;

use approx::assert_relative_eq;
use nalgebra::DVector;
use proptest::prelude::*;

use common::{random_point, random_problem, rng};
use gpreg::gp::{
    fit, kernel_eval, log_marginal_likelihood, optimize_hyperparams, HyperoptOptions,
    KernelHyperparams, SampleSet,
};

#[test]
fn matches_dense_reference_multi_output() {
    let mut r = rng(11);
    for _ in 0..20 {
        let p = random_problem(&mut r, 25, 3, 2);
        let model = fit(&p.samples, &p.hyper).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut r, 3, 2.5);
            let (mean, var) = model.posterior_predict(&x).unwrap();
            let want = p.dense.mean(&x);
            for c in 0..2 {
                assert!((mean[c] - want[c]).abs() < 1e-8);
            }
            assert!((var - p.dense.variance(&x).max(0.0)).abs() < 1e-8);
        }
        let lml = log_marginal_likelihood(&p.samples, &p.hyper).unwrap();
        assert!((lml - p.dense.log_likelihood()).abs() < 1e-8 * lml.abs().max(1.0));
    }
}

#[test]
fn permutation_leaves_posterior_unchanged() {
    let mut r = rng(5);
    let p = random_problem(&mut r, 30, 2, 1);
    let mut rows: Vec<_> = p
        .samples
        .inputs()
        .cloned()
        .zip(p.samples.outputs().cloned())
        .collect();
    rows.reverse();
    rows.swap(3, 17);
    let mut shuffled = SampleSet::new(2, 1, rows.len()).unwrap();
    for (x, y) in rows {
        shuffled.push(x, y).unwrap();
    }
    let a = fit(&p.samples, &p.hyper).unwrap();
    let b = fit(&shuffled, &p.hyper).unwrap();
    for _ in 0..50 {
        let x = random_point(&mut r, 2, 3.0);
        assert_relative_eq!(a.mean(&x).unwrap()[0], b.mean(&x).unwrap()[0], epsilon = 1e-9);
        assert_relative_eq!(a.variance(&x).unwrap(), b.variance(&x).unwrap(), epsilon = 1e-10);
    }
}

#[test]
fn near_interpolation_with_small_noise() {
    let inputs: Vec<DVector<f64>> = (0..15).map(|i| DVector::from_element(1, i as f64 * 0.4)).collect();
    let outputs: Vec<f64> = inputs.iter().map(|x| (x[0] * 1.3).sin()).collect();
    let samples = SampleSet::from_scalar(inputs.clone(), &outputs).unwrap();
    let hyper = KernelHyperparams::new(1.0, vec![0.7], 1e-8).unwrap();
    let model = fit(&samples, &hyper).unwrap();
    for (x, y) in inputs.iter().zip(&outputs) {
        assert!((model.mean(x).unwrap()[0] - y).abs() < 1e-5);
        assert!(model.variance(x).unwrap() < 1e-6);
    }
}

#[test]
fn duplicated_inputs_average_their_outputs() {
    let x = DVector::from_element(2, 0.3);
    let samples = SampleSet::from_scalar(vec![x.clone(), x.clone(), x.clone()], &[1.0, 2.0, 3.0]).unwrap();
    let hyper = KernelHyperparams::new(1.0, vec![1.0, 1.0], 0.01).unwrap();
    let model = fit(&samples, &hyper).unwrap();
    // three noisy copies: mean 3 * 2 / (3 + 0.01), variance 0.01 / 3.01
    assert_relative_eq!(model.mean(&x).unwrap()[0], 6.0 / 3.01, epsilon = 1e-9);
    assert_relative_eq!(model.variance(&x).unwrap(), 0.01 / 3.01, epsilon = 1e-9);
}

#[test]
fn hyperopt_improves_likelihood_and_is_seeded() {
    let inputs: Vec<DVector<f64>> = (0..40)
        .map(|i| DVector::from_vec(vec![i as f64 * 0.1, (i % 7) as f64 * 0.3]))
        .collect();
    let outputs: Vec<f64> = inputs.iter().map(|x| (2.0 * x[0]).sin()).collect();
    let samples = SampleSet::from_scalar(inputs, &outputs).unwrap();
    let init = KernelHyperparams::new(1.0, vec![5.0, 5.0], 0.01).unwrap();
    let opts = HyperoptOptions {
        seed: 3,
        ..HyperoptOptions::default()
    };
    let a = optimize_hyperparams(&samples, &init, &opts).unwrap();
    let b = optimize_hyperparams(&samples, &init, &opts).unwrap();
    assert_eq!(a.length_scales(), b.length_scales());
    let before = log_marginal_likelihood(&samples, &init).unwrap();
    let after = log_marginal_likelihood(&samples, &a).unwrap();
    assert!(after > before + 1.0, "{before} -> {after}");
    // the irrelevant second input ends up with the longer scale
    assert!(a.length_scales()[1] > a.length_scales()[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_and_bounded(
        x in prop::collection::vec(-5.0f64..5.0, 3),
        y in prop::collection::vec(-5.0f64..5.0, 3),
        amp in 0.1f64..4.0,
        ls in prop::collection::vec(0.1f64..5.0, 3),
    ) {
        let hyper = KernelHyperparams::new(amp, ls, 0.01).unwrap();
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        let kxy = kernel_eval(&x, &y, &hyper).unwrap();
        prop_assert_eq!(kxy, kernel_eval(&y, &x, &hyper).unwrap());
        prop_assert!(kxy >= 0.0);
        prop_assert!(kxy <= amp);
        prop_assert_eq!(kernel_eval(&x, &x, &hyper).unwrap(), amp);
    }

    #[test]
    fn variance_within_prior(seed in 0u64..10_000, n in 1usize..20) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n, 2, 1);
        let model = fit(&p.samples, &p.hyper).unwrap();
        let floor = p.hyper.amplitude() * p.hyper.noise_variance()
            / (p.hyper.amplitude() * n as f64 + p.hyper.noise_variance());
        for _ in 0..10 {
            let x = random_point(&mut r, 2, 4.0);
            let v = model.variance(&x).unwrap();
            prop_assert!(v >= 0.0 && v <= p.hyper.amplitude());
            // no query is better known than one observed n times without spread
            prop_assert!(v >= floor - 1e-12);
        }
    }

    #[test]
    fn adding_data_never_raises_variance(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, 12, 2, 1);
        let small = fit(&p.samples, &p.hyper).unwrap();
        let mut more = SampleSet::new(2, 1, p.samples.len() + 1).unwrap();
        for (x, y) in p.samples.inputs().zip(p.samples.outputs()) {
            more.push(x.clone(), y.clone()).unwrap();
        }
        more.push(random_point(&mut r, 2, 2.0), DVector::from_element(1, 0.5)).unwrap();
        let large = fit(&more, &p.hyper).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut r, 2, 3.0);
            prop_assert!(large.variance(&x).unwrap() <= small.variance(&x).unwrap() + 1e-12);
        }
    }
}
