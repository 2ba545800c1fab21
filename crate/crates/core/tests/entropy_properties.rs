//! Cross-estimator and maximum-entropy properties on the built-in families.

use dpc_core::entropy::{estimate_histogram, estimate_knn, gaussian_entropy};
use dpc_core::sampling::{draw_marginal, modules, Seed};
use dpc_core::scenario::{FamilyKind, MarginalFamily};

const N: usize = 100_000;

fn sample(kind: FamilyKind, seed: u64) -> Vec<f64> {
    let f = MarginalFamily::zero_mean(kind, 1.0);
    draw_marginal(&f, N, Seed::new(seed).with_module(modules::ENTROPY)).unwrap()
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn non_gaussian_families_stay_below_gaussian_entropy() {
    for kind in [
        FamilyKind::Laplace,
        FamilyKind::Uniform,
        FamilyKind::GaussianMixture,
    ] {
        let s = sample(kind, 31);
        let e = estimate_knn(&s, 4).unwrap();
        let g = gaussian_entropy(sample_variance(&s)).unwrap();
        assert!(
            e.nats <= g.nats + 3.0 * e.stderr,
            "{kind:?}: {} vs {}",
            e.nats,
            g.nats
        );
    }
}

#[test]
fn knn_and_histogram_agree() {
    for (i, kind) in FamilyKind::ALL.into_iter().enumerate() {
        let s = sample(kind, 40 + i as u64);
        let k = estimate_knn(&s, 4).unwrap();
        let h = estimate_histogram(&s, 100).unwrap();
        let tol = 3.0 * (k.stderr + h.stderr);
        assert!(
            (k.nats - h.nats).abs() <= tol,
            "{kind:?}: knn {k:?} hist {h:?}"
        );
    }
}

#[test]
fn mixture_entropy_is_strictly_sub_gaussian() {
    // ½N(-a, s) + ½N(a, s) with a² = 0.8, s = 0.2 is clearly bimodal.
    let s = sample(FamilyKind::GaussianMixture, 5);
    let e = estimate_knn(&s, 4).unwrap();
    let g = gaussian_entropy(1.0).unwrap();
    assert!(e.nats < g.nats - 0.1, "{} vs {}", e.nats, g.nats);
}
