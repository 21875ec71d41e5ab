mod common;

use nalgebra::DVector;
use rand::Rng;

use common::{random_point, random_problem, rng, uniform_bound_trial};
use gpreg::bounds::{
    build_bound_report, confidence_parameters, kernel_lipschitz_grid, local_variance_bound,
    noise_floor, posterior_lipschitz_constants, regulation_error_bound, BoxDomain, CoveringMode,
};
use gpreg::gp::{fit, KernelHyperparams};

#[test]
fn variance_bound_holds_for_anisotropic_kernels() {
    let mut r = rng(21);
    for _ in 0..200 {
        let n = r.random_range(1..30);
        let p = random_problem(&mut r, n, 3, 1);
        let model = fit(&p.samples, &p.hyper).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut r, 3, 2.5);
            let rho = r.random_range(0.01..3.0);
            let v = model.variance(&x).unwrap();
            assert!(v <= local_variance_bound(&model, &x, rho) + 1e-12);
        }
    }
}

#[test]
fn mean_lipschitz_constant_dominates_sampled_slopes() {
    let mut r = rng(4);
    for _ in 0..5 {
        let p = random_problem(&mut r, 20, 2, 1);
        let model = fit(&p.samples, &p.hyper).unwrap();
        let domain = BoxDomain::hull(p.samples.inputs()).unwrap();
        let (l_mean, _) = posterior_lipschitz_constants(&model, 0.1, &domain).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let x = random_point(&mut r, 2, 2.0);
            let y = &x + random_point(&mut r, 2, 0.05);
            let d = (&x - &y).norm();
            if d > 0.0 {
                worst = worst.max((model.mean(&x).unwrap()[0] - model.mean(&y).unwrap()[0]).abs() / d);
            }
        }
        assert!(worst <= l_mean, "sampled slope {worst} above {l_mean}");
    }
}

#[test]
fn analytic_kernel_lipschitz_matches_grid() {
    let hyper = KernelHyperparams::new(2.0, vec![0.4, 1.5], 0.01).unwrap();
    let domain = BoxDomain {
        lo: DVector::from_vec(vec![-3.0, -3.0]),
        hi: DVector::from_vec(vec![3.0, 3.0]),
    };
    let grid = kernel_lipschitz_grid(&hyper, &domain, 20_000);
    let analytic = hyper.lipschitz_constant();
    assert!(grid <= analytic * (1.0 + 1e-12));
    assert!((grid - analytic).abs() < 1e-6 * analytic);
}

#[test]
fn report_invariants_are_exact() {
    let mut r = rng(9);
    let p = random_problem(&mut r, 15, 2, 1);
    let model = fit(&p.samples, &p.hyper).unwrap();
    let domain = BoxDomain::hull(p.samples.inputs()).unwrap().inflate(0.05);
    for covering in [CoveringMode::DatasetSize, CoveringMode::DomainGrid] {
        let rep = build_bound_report(&model, 0.2, 0.05, 1.5, &domain, covering).unwrap();
        assert_eq!(rep.beta, 2.0 * (rep.covering_count as f64 / 0.05).ln());
        assert_eq!(
            rep.alpha,
            (rep.l_f + rep.l_mean) * rep.rho + (rep.beta * rep.l_var * rep.rho).sqrt()
        );
    }
    assert!(confidence_parameters(0.1, 0.0, 10, 1.0, 1.0, 1.0).is_err());
    assert!(confidence_parameters(0.1, 1.0, 10, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn regulation_bound_monotone_in_coverage_radius() {
    let mut r = rng(2);
    let p = random_problem(&mut r, 30, 2, 1);
    let model = fit(&p.samples, &p.hyper).unwrap();
    let domain = BoxDomain::hull(p.samples.inputs()).unwrap();
    let rep = build_bound_report(&model, 0.5, 0.01, 2.0, &domain, CoveringMode::DatasetSize).unwrap();
    let top = 3.0 * p.hyper.max_length_scale();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=300 {
        let rho = top * i as f64 / 300.0;
        let (b, floor) = regulation_error_bound(model.hyper(), rho, &rep);
        assert!(b >= prev - 1e-12);
        assert_eq!(floor, noise_floor(model.hyper(), rep.beta));
        prev = b;
    }
}

#[test]
fn uniform_bound_standard_deviation_variant_is_looser_when_variance_small() {
    use gpreg::bounds::{uniform_error_bound, uniform_error_bound_with, SpreadTerm};
    let mut r = rng(31);
    let p = random_problem(&mut r, 40, 1, 1);
    let model = fit(&p.samples, &p.hyper).unwrap();
    let domain = BoxDomain::hull(p.samples.inputs()).unwrap();
    let rep = build_bound_report(&model, 0.1, 0.05, 1.0, &domain, CoveringMode::DatasetSize).unwrap();
    for _ in 0..100 {
        let x = random_point(&mut r, 1, 2.0);
        let v = model.variance(&x).unwrap();
        let printed = uniform_error_bound(&model, &x, &rep);
        let sd = uniform_error_bound_with(&model, &x, &rep, SpreadTerm::StdDev);
        if v < 1.0 {
            assert!(sd >= printed);
        }
    }
}

#[test]
fn uniform_bound_small_monte_carlo() {
    let trials: Vec<_> = (0..40).map(|s| uniform_bound_trial(1_000 + s, 60, 200, 0.1)).collect();
    let violations = trials.iter().filter(|t| t.violated).count();
    assert!(violations as f64 / 40.0 <= 0.1 + 0.02 + 1e-12, "{violations} violations");
    assert!(trials.iter().all(|t| t.rho > 0.0 && t.worst_ratio.is_finite()));
}
