//! Closed-form lower bounds from second-order statistics.
//!
//! For Gaussian input of power `σ_X²` the rate at gain `η` is bounded below by
//!
//! ```text
//! ½ log₂(1 + (η + ρ_XN σ_N/σ_X)² / (1 - ρ_XN² - ρ_ZN²) · σ_X²/σ_N²)
//! ```
//!
//! which does not involve the interference variance at all. The derivation
//! runs through a virtual channel `Y = H̃X + W̃Z + Ñ` whose noise `Ñ` is
//! uncorrelated with `X` and `Z`, and a residual variance `Q(η)` minimized in
//! closed form over the receiver scaling `β`. All of those intermediate
//! quantities are exposed here so they can be checked independently.

use crate::scenario::{Domain, GainDistribution, SecondOrderStats};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A rate in bits per channel use, or the unbounded rate of a noiseless
/// channel. Never carries a floating-point infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    Bits(f64),
    Unbounded,
}

impl Rate {
    pub fn bits(self) -> Option<f64> {
        match self {
            Rate::Bits(b) => Some(b),
            Rate::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Rate::Unbounded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Theorem1,
    Corollary1,
    LemmaMc,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Theorem1 => "theorem1",
            Method::Corollary1 => "corollary1",
            Method::LemmaMc => "lemma_mc",
            Method::Oracle => "oracle",
        }
    }
}

/// Contribution of one gain atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainTerm {
    pub eta: f64,
    pub p: f64,
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// `Σ p_k · rate_k`.
    pub rate: Rate,
    pub per_gain: Vec<GainTerm>,
    pub method: Method,
    pub domain: Domain,
    /// Monte-Carlo standard error of `rate`; `None` for exact methods.
    pub stderr_bits: Option<f64>,
}

impl BoundResult {
    pub fn from_terms(per_gain: Vec<GainTerm>, method: Method, domain: Domain) -> Self {
        let unbounded = per_gain.iter().any(|t| t.p > 0.0 && t.rate.is_unbounded());
        let rate = if unbounded {
            Rate::Unbounded
        } else {
            Rate::Bits(
                per_gain
                    .iter()
                    .map(|t| t.p * t.rate.bits().unwrap_or(0.0))
                    .sum(),
            )
        };
        Self {
            rate,
            per_gain,
            method,
            domain,
            stderr_bits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("input power {0} must be positive")]
    NonPositivePower(f64),
    #[error("noise variance {0} is negative")]
    NegativeNoiseVariance(f64),
    #[error("input is not finite")]
    NonFinite,
}

/// The rewritten channel `Y = H̃X + W̃Z + Ñ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualChannel {
    /// `H̃ = η + ρ_XN σ_N/σ_X`. May be negative.
    pub eta_tilde: f64,
    /// `W̃ = 1 + ρ_ZN σ_N/σ_Z`, absent when `σ_Z²` is absent or zero.
    pub w_tilde: Option<f64>,
    /// `σ_Ñ² = (1 - ρ_XN² - ρ_ZN²) σ_N²`.
    pub sigma_ntilde2: f64,
}

pub fn virtual_channel(
    stats: &SecondOrderStats,
    eta: f64,
    sigma_z2: Option<f64>,
) -> VirtualChannel {
    let w_tilde = sigma_z2
        .filter(|&v| v > 0.0 && v.is_finite())
        .map(|v| 1.0 + stats.rho_zn() * stats.sigma_n2().sqrt() / v.sqrt());
    VirtualChannel {
        eta_tilde: eta + stats.input_loading(),
        w_tilde,
        sigma_ntilde2: stats.decorrelated_noise_variance(),
    }
}

/// MMSE receiver scaling `β* = η σ_X² / (η² σ_X² + σ_Ñ²)`.
pub fn beta_star(eta_tilde: f64, sigma_x2: f64, sigma_ntilde2: f64) -> f64 {
    eta_tilde * sigma_x2 / (eta_tilde * eta_tilde * sigma_x2 + sigma_ntilde2)
}

/// Residual variance `(1-βη)²σ_X² + (α-β)² σ_z2_eff + β²σ_Ñ²`, where
/// `sigma_z2_eff` is `W̃²σ_Z²`.
pub fn q_form(
    alpha: f64,
    beta: f64,
    eta: f64,
    sigma_x2: f64,
    sigma_z2_eff: f64,
    sigma_ntilde2: f64,
) -> f64 {
    let gx = 1.0 - beta * eta;
    let gz = alpha - beta;
    gx * gx * sigma_x2 + gz * gz * sigma_z2_eff + beta * beta * sigma_ntilde2
}

/// Minimum of [`q_form`] over `(α, β)`, attained at `α = β = β*`.
/// Returns `(Q, β*)` with `Q = σ_Ñ²σ_X² / (η²σ_X² + σ_Ñ²)`.
pub fn q_min(eta: f64, sigma_x2: f64, sigma_ntilde2: f64) -> (f64, f64) {
    let q = sigma_ntilde2 * sigma_x2 / (eta * eta * sigma_x2 + sigma_ntilde2);
    (q, beta_star(eta, sigma_x2, sigma_ntilde2))
}

fn log2_1p(snr: f64, domain: Domain) -> f64 {
    domain.log_factor() * (1.0 + snr).log2()
}

/// Per-atom term of [`theorem1_bound`].
pub fn theorem1_term(stats: &SecondOrderStats, eta: f64, domain: Domain) -> Rate {
    if stats.sigma_n2() == 0.0 {
        return if eta == 0.0 {
            Rate::Bits(0.0)
        } else {
            Rate::Unbounded
        };
    }
    let gain = eta + stats.input_loading();
    let snr = gain * gain / stats.unexplained_fraction() * (stats.sigma_x2() / stats.sigma_n2());
    Rate::Bits(log2_1p(snr, domain))
}

/// The same per-atom term, computed on the virtual channel:
/// `½ log₂(1 + H̃²σ_X²/σ_Ñ²)`.
pub fn virtual_channel_term(stats: &SecondOrderStats, eta: f64, domain: Domain) -> Rate {
    if stats.sigma_n2() == 0.0 {
        return if eta == 0.0 {
            Rate::Bits(0.0)
        } else {
            Rate::Unbounded
        };
    }
    let vc = virtual_channel(stats, eta, None);
    let snr = vc.eta_tilde * vc.eta_tilde * stats.sigma_x2() / vc.sigma_ntilde2;
    Rate::Bits(log2_1p(snr, domain))
}

/// The per-atom term through the entropy route: Gaussian input entropy minus
/// the Gaussian entropy of the minimal residual, `½ log₂(σ_X² / Q(H̃))`.
pub fn residual_variance_term(stats: &SecondOrderStats, eta: f64, domain: Domain) -> Rate {
    if stats.sigma_n2() == 0.0 {
        return if eta == 0.0 {
            Rate::Bits(0.0)
        } else {
            Rate::Unbounded
        };
    }
    let vc = virtual_channel(stats, eta, None);
    let (q, _) = q_min(vc.eta_tilde, stats.sigma_x2(), vc.sigma_ntilde2);
    Rate::Bits(domain.log_factor() * (stats.sigma_x2() / q).log2())
}

/// Lower bound for arbitrary (possibly dependent, non-Gaussian) noise with
/// the given second-order statistics.
pub fn theorem1_bound(
    stats: &SecondOrderStats,
    gain: &GainDistribution,
    domain: Domain,
) -> BoundResult {
    let terms = gain
        .atoms
        .iter()
        .map(|a| GainTerm {
            eta: a.eta,
            p: a.p,
            rate: theorem1_term(stats, a.eta, domain),
        })
        .collect();
    BoundResult::from_terms(terms, Method::Theorem1, domain)
}

/// Lower bound when the noise mean does not depend on the input:
/// `½ log₂(1 + η²σ_X²/σ_N²)` per atom.
pub fn corollary1_bound(
    sigma_x2: f64,
    sigma_n2: f64,
    gain: &GainDistribution,
    domain: Domain,
) -> Result<BoundResult, BoundError> {
    if !sigma_x2.is_finite() || !sigma_n2.is_finite() {
        return Err(BoundError::NonFinite);
    }
    if sigma_x2 <= 0.0 {
        return Err(BoundError::NonPositivePower(sigma_x2));
    }
    if sigma_n2 < 0.0 {
        return Err(BoundError::NegativeNoiseVariance(sigma_n2));
    }
    let terms = gain
        .atoms
        .iter()
        .map(|a| {
            let rate = if sigma_n2 == 0.0 {
                if a.eta == 0.0 {
                    Rate::Bits(0.0)
                } else {
                    Rate::Unbounded
                }
            } else {
                Rate::Bits(log2_1p(a.eta * a.eta * sigma_x2 / sigma_n2, domain))
            };
            GainTerm {
                eta: a.eta,
                p: a.p,
                rate,
            }
        })
        .collect();
    Ok(BoundResult::from_terms(terms, Method::Corollary1, domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(sx2: f64, sn2: f64, rxn: f64, rzn: f64) -> SecondOrderStats {
        SecondOrderStats::new(sx2, sn2, rxn, rzn).unwrap()
    }

    fn bits(r: Rate) -> f64 {
        r.bits().unwrap()
    }

    #[test]
    fn virtual_channel_identity_without_correlation() {
        let vc = virtual_channel(&stats(1.0, 0.3, 0.0, 0.0), 1.0, Some(2.0));
        assert_eq!(vc.eta_tilde, 1.0);
        assert_eq!(vc.w_tilde, Some(1.0));
        assert_eq!(vc.sigma_ntilde2, 0.3);
    }

    #[test]
    fn virtual_channel_cancellation() {
        let vc = virtual_channel(&stats(2.0, 2.0, -0.5, 0.0), 0.5, None);
        assert_eq!(vc.eta_tilde, 0.0);
        assert_eq!(vc.w_tilde, None);
    }

    #[test]
    fn virtual_channel_noise_reduction() {
        let vc = virtual_channel(&stats(1.0, 1.0, 0.5, 0.5), 1.0, Some(0.0));
        assert_eq!(vc.sigma_ntilde2, 0.5);
        assert_eq!(vc.w_tilde, None);
    }

    #[test]
    fn theorem1_unit_snr() {
        let g = GainDistribution::constant(1.0);
        let r = theorem1_bound(&stats(1.0, 1.0, 0.0, 0.0), &g, Domain::Real);
        assert_eq!(r.rate, Rate::Bits(0.5));
        assert_eq!(r.method, Method::Theorem1);
    }

    #[test]
    fn theorem1_interference_correlation() {
        let g = GainDistribution::constant(1.0);
        let r = theorem1_bound(&stats(1.0, 1.0, 0.0, 0.6), &g, Domain::Real);
        let expected = 0.5 * (1.0 + 1.0 / 0.64f64).log2();
        assert!((bits(r.rate) - expected).abs() < 1e-15);
        assert!((expected - 0.678776).abs() < 1e-6);
    }

    #[test]
    fn theorem1_zero_at_cancellation() {
        let g = GainDistribution::constant(0.5);
        let r = theorem1_bound(&stats(1.0, 1.0, -0.5, 0.0), &g, Domain::Real);
        assert_eq!(r.rate, Rate::Bits(0.0));
    }

    #[test]
    fn zero_noise_is_unbounded_sentinel() {
        let g = GainDistribution::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]);
        let r = theorem1_bound(&stats(1.0, 0.0, 0.0, 0.0), &g, Domain::Real);
        assert_eq!(r.rate, Rate::Unbounded);
        assert_eq!(r.per_gain[0].rate, Rate::Bits(0.0));
        let c = corollary1_bound(1.0, 0.0, &g, Domain::Real).unwrap();
        assert_eq!(c.rate, Rate::Unbounded);
    }

    #[test]
    fn corollary1_examples() {
        let r =
            corollary1_bound(1.0, 0.25, &GainDistribution::constant(1.0), Domain::Real).unwrap();
        assert!((bits(r.rate) - 0.5 * 5f64.log2()).abs() < 1e-15);
        assert!((bits(r.rate) - 1.16096).abs() < 1e-5);

        let r =
            corollary1_bound(1.0, 0.25, &GainDistribution::constant(0.0), Domain::Real).unwrap();
        assert_eq!(r.rate, Rate::Bits(0.0));
    }

    #[test]
    fn corollary1_mixture_is_weighted_sum_of_atoms() {
        let mix = GainDistribution::from_pairs(&[(1.0, 0.5), (2.0, 0.5)]);
        let r = corollary1_bound(1.0, 1.0, &mix, Domain::Real).unwrap();
        let a1 = bits(
            corollary1_bound(1.0, 1.0, &GainDistribution::constant(1.0), Domain::Real)
                .unwrap()
                .rate,
        );
        let a2 = bits(
            corollary1_bound(1.0, 1.0, &GainDistribution::constant(2.0), Domain::Real)
                .unwrap()
                .rate,
        );
        assert!((bits(r.rate) - (0.5 * a1 + 0.5 * a2)).abs() < 1e-15);
        assert!((bits(r.rate) - (0.25 + 0.25 * 5f64.log2())).abs() < 1e-15);
    }

    #[test]
    fn corollary1_rejects_bad_inputs() {
        let g = GainDistribution::constant(1.0);
        assert!(corollary1_bound(0.0, 1.0, &g, Domain::Real).is_err());
        assert!(corollary1_bound(1.0, -1.0, &g, Domain::Real).is_err());
        assert!(corollary1_bound(f64::NAN, 1.0, &g, Domain::Real).is_err());
    }

    #[test]
    fn beta_star_examples() {
        assert_eq!(beta_star(0.0, 3.0, 2.0), 0.0);
        assert_eq!(beta_star(1.0, 1.0, 1.0), 0.5);
    }

    #[test]
    fn q_form_examples() {
        assert_eq!(q_form(0.0, 0.0, 1.7, 2.5, 3.0, 0.4), 2.5);
        let tied = q_form(0.3, 0.3, 1.0, 1.0, 2.0, 1.0);
        let untied = q_form(0.5, 0.3, 1.0, 1.0, 2.0, 1.0);
        assert!(untied > tied);
    }

    #[test]
    fn q_min_examples() {
        assert_eq!(q_min(0.0, 2.0, 0.5), (2.0, 0.0));
        assert_eq!(q_min(1.0, 1.0, 1.0), (0.5, 0.5));
        let (q, _) = q_min(1e6, 1.3, 0.7);
        assert!((1e12 * q / 0.7 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn three_routes_agree() {
        let s = stats(1.7, 0.6, -0.3, 0.45);
        for eta in [-2.0, -0.1, 0.0, 0.8, 3.0] {
            let a = bits(theorem1_term(&s, eta, Domain::Real));
            let b = bits(virtual_channel_term(&s, eta, Domain::Real));
            let c = bits(residual_variance_term(&s, eta, Domain::Real));
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} {b}");
            assert!((a - c).abs() <= 1e-12 * a.max(1.0), "{a} {c}");
        }
    }

    #[test]
    fn complex_domain_doubles() {
        let s = stats(1.7, 0.6, -0.3, 0.45);
        let g = GainDistribution::from_pairs(&[(0.3, 0.2), (1.1, 0.8)]);
        let re = bits(theorem1_bound(&s, &g, Domain::Real).rate);
        let cx = bits(theorem1_bound(&s, &g, Domain::Complex).rate);
        assert_eq!(cx, 2.0 * re);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn stats_strategy() -> impl Strategy<Value = SecondOrderStats> {
            (0.05..20.0f64, 0.05..20.0f64, -0.9..0.9f64, 0.0..1.0f64).prop_map(
                |(sx2, sn2, rxn, frac)| {
                    let room = (1.0 - rxn * rxn).sqrt() * 0.999;
                    SecondOrderStats::new(sx2, sn2, rxn, (2.0 * frac - 1.0) * room).unwrap()
                },
            )
        }

        proptest! {
            #[test]
            fn q_form_never_below_q_min(
                eta in -5.0..5.0f64,
                sx2 in 0.01..10.0f64,
                sz2 in 0.0..10.0f64,
                snt2 in 0.01..10.0f64,
                alpha in -5.0..5.0f64,
                beta in -5.0..5.0f64,
            ) {
                let (q, b) = q_min(eta, sx2, snt2);
                let at = q_form(alpha, beta, eta, sx2, sz2, snt2);
                prop_assert!(at >= q * (1.0 - 1e-12));
                let at_opt = q_form(b, b, eta, sx2, sz2, snt2);
                prop_assert!((at_opt - q).abs() <= 1e-12 * q);
            }

            #[test]
            fn uncorrelated_theorem_equals_corollary(
                sx2 in 0.01..100.0f64,
                sn2 in 0.01..100.0f64,
                eta in -10.0..10.0f64,
            ) {
                let g = GainDistribution::constant(eta);
                let s = SecondOrderStats::new(sx2, sn2, 0.0, 0.0).unwrap();
                let t = theorem1_bound(&s, &g, Domain::Real).rate.bits().unwrap();
                let c = corollary1_bound(sx2, sn2, &g, Domain::Real).unwrap().rate.bits().unwrap();
                prop_assert!((t - c).abs() <= 1e-12);
            }

            #[test]
            fn total_is_weighted_sum(
                s in stats_strategy(),
                etas in proptest::collection::vec(-3.0..3.0f64, 1..6),
            ) {
                let p = 1.0 / etas.len() as f64;
                let g = GainDistribution::from_pairs(&etas.iter().map(|&e| (e, p)).collect::<Vec<_>>());
                let r = theorem1_bound(&s, &g, Domain::Real);
                let sum: f64 = r.per_gain.iter().map(|t| t.p * t.rate.bits().unwrap()).sum();
                prop_assert!((r.rate.bits().unwrap() - sum).abs() <= 1e-12);
                prop_assert!(r.rate.bits().unwrap() >= 0.0);
            }
        }
    }
}
