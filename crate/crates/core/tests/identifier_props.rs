mod common;

use nalgebra::DVector;
use rand::Rng;

use common::{random_point, rng};
use gpreg::gp::{KernelHyperparams, SampleSet};
use gpreg::regulator::{Identifier, IdentifierKind};

fn dataset(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<(DVector<f64>, f64)> {
    (0..n)
        .map(|_| {
            let x = random_point(r, 6, 1.0);
            let u = (2.0 * x[3]).sin() + 0.5 * x[5];
            (x, u)
        })
        .collect()
}

fn fitted(kind: IdentifierKind, hyper: &KernelHyperparams, data: &[(DVector<f64>, f64)]) -> Identifier {
    let mut set = SampleSet::new(6, 1, data.len()).unwrap();
    for (x, u) in data {
        set.push(x.clone(), DVector::from_element(1, *u)).unwrap();
    }
    let mut id = Identifier::empty(kind, hyper, &set).unwrap();
    id.refit(&set).unwrap();
    id
}

/// Largest change of the identifier's prediction over probe points.
fn response(kind: IdentifierKind, trial: u64, scale: f64) -> (f64, f64) {
    let hyper = KernelHyperparams::new(1.0, vec![7.7, 34.3, 19.9, 0.4, 133.6, 1.2], 0.01).unwrap();
    let mut r = rng(trial);
    let data = dataset(&mut r, 30);
    let perturbed: Vec<_> = data
        .iter()
        .map(|(x, u)| {
            let dx = random_point(&mut r, 6, scale);
            (x + dx, u + r.random_range(-scale..scale))
        })
        .collect();
    let size = data
        .iter()
        .zip(&perturbed)
        .map(|((x, u), (y, v))| (x - y).norm() + (u - v).abs())
        .fold(0.0, f64::max);
    let a = fitted(kind, &hyper, &data);
    let b = fitted(kind, &hyper, &perturbed);
    let probes: Vec<_> = (0..50).map(|_| random_point(&mut r, 6, 1.0)).collect();
    let change = probes
        .iter()
        .map(|p| (a.mean(p)[0] - b.mean(p)[0]).abs())
        .fold(0.0, f64::max);
    (size, change)
}

#[test]
fn perturbation_response_has_linear_envelope() {
    for kind in [IdentifierKind::Gp, IdentifierKind::Ls] {
        let scale = |t: u64| 1e-4 * 10f64.powf((t % 25) as f64 / 12.0);
        let fit: Vec<_> = (0..50).map(|t| response(kind, t, scale(t))).collect();
        let gain = fit.iter().map(|(s, d)| d / s).fold(0.0, f64::max);
        assert!(gain.is_finite() && gain > 0.0);
        for t in 50..100 {
            let (s, d) = response(kind, t, scale(t));
            assert!(d <= 2.0 * gain * s, "{kind:?} trial {t}: change {d} above envelope {}", 2.0 * gain * s);
        }
    }
}

#[test]
fn refit_on_same_data_is_idempotent() {
    let hyper = KernelHyperparams::new(1.0, vec![1.0; 6], 0.01).unwrap();
    let mut r = rng(3);
    let data = dataset(&mut r, 25);
    for kind in [IdentifierKind::Gp, IdentifierKind::Ls] {
        let a = fitted(kind, &hyper, &data);
        let b = fitted(kind, &hyper, &data);
        for _ in 0..20 {
            let p = random_point(&mut r, 6, 1.0);
            assert!((a.mean(&p)[0] - b.mean(&p)[0]).abs() <= 1e-12);
            assert!((a.mean_jacobian(&p) - b.mean_jacobian(&p)).amax() <= 1e-12);
        }
    }
}

#[test]
fn identifiers_share_one_interface() {
    let hyper = KernelHyperparams::new(1.0, vec![1.0; 6], 0.01).unwrap();
    let mut r = rng(4);
    let data = dataset(&mut r, 10);
    let p = random_point(&mut r, 6, 1.0);
    for kind in [IdentifierKind::Gp, IdentifierKind::Ls] {
        let id = fitted(kind, &hyper, &data);
        assert_eq!(id.kind(), kind);
        assert_eq!(id.mean(&p).len(), 1);
        assert_eq!(id.mean_jacobian(&p).shape(), (1, 6));
        let v = id.variance(&p);
        match kind {
            IdentifierKind::Gp => assert!((0.0..=1.0).contains(&v)),
            IdentifierKind::Ls => assert_eq!(v, f64::INFINITY),
        }
    }
}
