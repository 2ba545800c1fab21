//! Monte-Carlo evaluation of the general entropy bound
//!
//! ```text
//! R ≥ E_η[ h(X) - min_{α,β} h((1-βη)X + (α-β)Z - βN | H = η) ]
//! ```
//!
//! with Gaussian input `X ~ N(0, σ_X²)` independent of `Z`. Entropies of the
//! residual are estimated with the nearest-neighbor estimator; `h(X)` is exact.
//!
//! The search over `(α, β)` starts from the closed-form optimum of the
//! residual variance on the virtual channel and then scores a local grid by
//! estimated entropy. Grid coordinates are virtual-channel coordinates: the
//! residual's interference coefficient is `(a - β)·W̃`, so `a = β` removes `Z`
//! from the residual entirely. The raw coefficient passed to
//! [`objective_samples`] is `α = a·W̃`.

use crate::closed_form::{self, BoundResult, GainTerm, Method, Rate};
use crate::entropy::{self, EntropyError, EntropyEstimate, DEFAULT_K, MAX_K, MIN_KNN_SAMPLES};
use crate::nats_to_bits;
use crate::sampling::{self, modules, SampleBatch, SamplingError, Seed};
use crate::scenario::{
    ChannelScenario, FamilyKind, NoiseModel, SecondOrderStats, TargetStats, ValidationError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Grid half-width floor, used when the warm-start `β` is (nearly) zero.
const MIN_BETA_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// `a = β`: the residual carries no interference.
    TiedToBeta,
    /// `a` searched on its own grid axis.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub n_samples: usize,
    pub k: usize,
    pub alpha_policy: AlphaPolicy,
    /// Grid points per axis; odd so the warm start is on the grid.
    pub refine_grid: usize,
    /// Grid half-width relative to the warm-start `β`.
    pub refine_span: f64,
    pub seed: u64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            n_samples: 200_000,
            k: DEFAULT_K,
            alpha_policy: AlphaPolicy::TiedToBeta,
            refine_grid: 21,
            refine_span: 0.2,
            seed: 0,
        }
    }
}

impl LemmaConfig {
    pub fn validate(&self) -> Result<(), LemmaError> {
        if self.n_samples < MIN_KNN_SAMPLES {
            return Err(LemmaError::Config(format!(
                "n_samples = {} is below the estimator minimum of {MIN_KNN_SAMPLES}",
                self.n_samples
            )));
        }
        if !(1..=MAX_K).contains(&self.k) {
            return Err(LemmaError::Config(format!(
                "k = {} is outside [1, {MAX_K}]",
                self.k
            )));
        }
        if self.refine_grid < 3 || self.refine_grid.is_multiple_of(2) {
            return Err(LemmaError::Config(format!(
                "refine_grid = {} must be odd and at least 3",
                self.refine_grid
            )));
        }
        if !(self.refine_span > 0.0 && self.refine_span <= 1.0) {
            return Err(LemmaError::Config(format!(
                "refine_span = {} must lie in (0, 1]",
                self.refine_span
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LemmaError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// `(1 - βη)x + (α - β)z - β·noise`, row by row.
pub fn objective_samples(b: &SampleBatch, alpha: f64, beta: f64) -> Vec<f64> {
    let gx = 1.0 - beta * b.eta;
    let gz = alpha - beta;
    b.x.iter()
        .zip(&b.z)
        .zip(&b.noise)
        .map(|((x, z), n)| gx * x + gz * z - beta * n)
        .collect()
}

/// Search outcome for one gain atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomEstimate {
    pub eta: f64,
    pub p: f64,
    /// Raw interference coefficient of the chosen residual.
    pub alpha: f64,
    pub beta: f64,
    /// Closed-form warm start `β*` on the virtual channel.
    pub beta_warm: f64,
    /// Entropy of the chosen residual; `None` when no sampling was needed.
    pub entropy: Option<EntropyEstimate>,
    /// Point estimate of the residual entropy at the warm start.
    pub warm_entropy_nats: Option<f64>,
    pub rate: Rate,
    pub stderr_bits: f64,
    pub theorem1: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaOutcome {
    pub bound: BoundResult,
    pub atoms: Vec<AtomEstimate>,
}

fn grid_offsets(points: usize) -> Vec<f64> {
    let half = (points - 1) / 2;
    (0..points)
        .map(|j| (j as f64 - half as f64) / half as f64)
        .collect()
}

/// Evaluates the bound on every gain atom of `s`.
pub fn lemma_bound(s: &ChannelScenario, cfg: &LemmaConfig) -> Result<LemmaOutcome, LemmaError> {
    cfg.validate()?;
    let stats = s.moment_algebra()?;
    let atoms = s
        .gain
        .atoms
        .iter()
        .enumerate()
        .map(|(idx, a)| lemma_atom(s, &stats, idx, a.eta, a.p, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let terms = atoms
        .iter()
        .map(|a| GainTerm {
            eta: a.eta,
            p: a.p,
            rate: a.rate,
        })
        .collect();
    let mut bound = BoundResult::from_terms(terms, Method::LemmaMc, s.domain);
    bound.stderr_bits = Some(
        atoms
            .iter()
            .map(|a| (a.p * a.stderr_bits).powi(2))
            .sum::<f64>()
            .sqrt(),
    );
    Ok(LemmaOutcome { bound, atoms })
}

fn lemma_atom(
    s: &ChannelScenario,
    stats: &SecondOrderStats,
    idx: usize,
    eta: f64,
    p: f64,
    cfg: &LemmaConfig,
) -> Result<AtomEstimate, LemmaError> {
    let theorem1 = closed_form::theorem1_term(stats, eta, s.domain);
    let sigma_z2 = s.interference_variance();
    let vc = closed_form::virtual_channel(stats, eta, sigma_z2);

    if stats.sigma_n2() == 0.0 {
        return Ok(AtomEstimate {
            eta,
            p,
            alpha: 0.0,
            beta: 0.0,
            beta_warm: 0.0,
            entropy: None,
            warm_entropy_nats: None,
            rate: theorem1,
            stderr_bits: 0.0,
            theorem1,
        });
    }

    let w_tilde = vc.w_tilde.unwrap_or(1.0);
    let beta_warm = closed_form::beta_star(vc.eta_tilde, stats.sigma_x2(), vc.sigma_ntilde2);
    let half = cfg.refine_span * beta_warm.abs().max(MIN_BETA_SCALE);
    let offsets = grid_offsets(cfg.refine_grid);
    let centre = offsets.len() / 2;

    // (a, β) in virtual-channel coordinates; the warm start comes first.
    let mut candidates = vec![(beta_warm, beta_warm)];
    match cfg.alpha_policy {
        AlphaPolicy::TiedToBeta => {
            for (j, t) in offsets.iter().enumerate() {
                if j != centre {
                    let b = beta_warm + half * t;
                    candidates.push((b, b));
                }
            }
        }
        AlphaPolicy::Free => {
            for (i, ta) in offsets.iter().enumerate() {
                for (j, tb) in offsets.iter().enumerate() {
                    if i != centre || j != centre {
                        candidates.push((beta_warm + half * ta, beta_warm + half * tb));
                    }
                }
            }
        }
    }

    let seed = Seed::new(cfg.seed)
        .with_module(modules::LEMMA)
        .with_atom(idx as u32);
    let batch = sampling::draw(s, eta, cfg.n_samples, seed)?;

    let scores = candidates
        .par_iter()
        .map(|&(a, b)| entropy::knn_nats(&objective_samples(&batch, a * w_tilde, b), cfg.k))
        .collect::<Result<Vec<f64>, _>>()?;

    let best = (0..candidates.len())
        .min_by(|&i, &j| {
            scores[i]
                .total_cmp(&scores[j])
                .then(candidates[i].1.abs().total_cmp(&candidates[j].1.abs()))
        })
        .expect("candidate grid is never empty");
    let (a, beta) = candidates[best];
    let alpha = a * w_tilde;
    let est = entropy::estimate_knn(&objective_samples(&batch, alpha, beta), cfg.k)?;

    let h_x = entropy::gaussian_entropy(stats.sigma_x2())?.nats;
    let dims = s.domain.dimensions();
    let rate_bits = (dims * nats_to_bits(h_x - est.nats)).max(0.0);
    Ok(AtomEstimate {
        eta,
        p,
        alpha,
        beta,
        beta_warm,
        entropy: Some(est),
        warm_entropy_nats: Some(scores[0]),
        rate: Rate::Bits(rate_bits),
        stderr_bits: dims * nats_to_bits(est.stderr),
        theorem1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    RhoZn,
    RhoXn,
    SnrDb,
    Family,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::RhoZn => "rho_zn",
            SweepAxis::RhoXn => "rho_xn",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Family => "family",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepAxis::RhoZn,
            SweepAxis::RhoXn,
            SweepAxis::SnrDb,
            SweepAxis::Family,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| format!("unknown sweep axis `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Family(FamilyKind),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v:?}"),
            SweepValue::Family(k) => f.write_str(k.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: SweepValue,
    pub lemma: BoundResult,
    pub theorem: BoundResult,
}

/// Rebuilds `template` with one statistic replaced, holding the others
/// (`σ_N²`, `ρ_XN`, `ρ_ZN`, innovation family) fixed. `snr_db` sets
/// `σ_X² = σ_N² · 10^(v/10)`.
pub fn instantiate(
    template: &ChannelScenario,
    axis: SweepAxis,
    value: SweepValue,
) -> Result<ChannelScenario, LemmaError> {
    let stats = template.moment_algebra()?;
    let family = template
        .noise
        .innovation
        .kind()
        .unwrap_or(FamilyKind::Gaussian);
    let mut target = TargetStats {
        sigma_n2: stats.sigma_n2(),
        rho_xn: stats.rho_xn(),
        rho_zn: stats.rho_zn(),
    };
    let mut power = template.power;
    let mut family = family;
    match (axis, value) {
        (SweepAxis::RhoZn, SweepValue::Number(v)) => target.rho_zn = v,
        (SweepAxis::RhoXn, SweepValue::Number(v)) => target.rho_xn = v,
        (SweepAxis::SnrDb, SweepValue::Number(v)) => {
            power = stats.sigma_n2() * 10f64.powf(v / 10.0)
        }
        (SweepAxis::Family, SweepValue::Family(k)) => family = k,
        (axis, value) => {
            return Err(LemmaError::Config(format!(
                "value `{value}` does not fit axis `{}`",
                axis.name()
            )))
        }
    }
    let noise = NoiseModel::from_target(power, template.interference_variance(), target, family)
        .map_err(|v| ValidationError {
            violations: vec![v],
        })?;
    let s = ChannelScenario {
        noise,
        power,
        ..template.clone()
    };
    s.validate()?;
    Ok(s)
}

/// Evaluates the Monte-Carlo and closed-form bounds at every axis value.
/// Each point uses the same seed, so neighbouring points share their random
/// streams. A failing point does not stop the sweep.
pub fn sweep(
    template: &ChannelScenario,
    axis: SweepAxis,
    values: &[SweepValue],
    cfg: &LemmaConfig,
) -> Vec<Result<SweepPoint, LemmaError>> {
    values
        .iter()
        .map(|&value| {
            let s = instantiate(template, axis, value)?;
            let stats = s.moment_algebra()?;
            let lemma = lemma_bound(&s, cfg)?.bound;
            let theorem = closed_form::theorem1_bound(&stats, &s.gain, s.domain);
            Ok(SweepPoint {
                axis,
                value,
                lemma,
                theorem,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MarginalFamily;

    fn gaussian_scenario() -> ChannelScenario {
        ChannelScenario::awgn(1.0, MarginalFamily::gaussian(0.0, 1.0))
    }

    fn quick() -> LemmaConfig {
        LemmaConfig {
            n_samples: 20_000,
            refine_grid: 5,
            ..LemmaConfig::default()
        }
    }

    #[test]
    fn objective_with_zero_coefficients_is_input() {
        let b = sampling::draw(&gaussian_scenario(), 1.3, 100, Seed::new(0)).unwrap();
        assert_eq!(objective_samples(&b, 0.0, 0.0), b.x);
    }

    #[test]
    fn objective_cancels_input_and_interference() {
        let mut s = gaussian_scenario();
        s.noise.innovation = MarginalFamily::gaussian(0.0, 0.0);
        s.noise.degenerate = true;
        let eta = 2.0;
        let b = sampling::draw(&s, eta, 100, Seed::new(0)).unwrap();
        let v = objective_samples(&b, 1.0 / eta, 1.0 / eta);
        assert!(v.iter().all(|&x| x == 0.0), "{v:?}");
    }

    #[test]
    fn config_validation() {
        let ok = LemmaConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            LemmaConfig {
                n_samples: 49,
                ..ok
            },
            LemmaConfig { k: 0, ..ok },
            LemmaConfig {
                refine_grid: 4,
                ..ok
            },
            LemmaConfig {
                refine_grid: 1,
                ..ok
            },
            LemmaConfig {
                refine_span: 0.0,
                ..ok
            },
            LemmaConfig {
                refine_span: 1.5,
                ..ok
            },
        ] {
            assert!(
                matches!(bad.validate(), Err(LemmaError::Config(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn grid_is_symmetric_with_exact_centre() {
        assert_eq!(grid_offsets(5), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(grid_offsets(21)[10], 0.0);
    }

    #[test]
    fn warm_start_is_scored_and_never_beaten_by_much() {
        let out = lemma_bound(&gaussian_scenario(), &quick()).unwrap();
        let a = out.atoms[0];
        let est = a.entropy.unwrap();
        assert!(est.nats <= a.warm_entropy_nats.unwrap() + est.stderr);
        assert!((a.beta_warm - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = lemma_bound(&gaussian_scenario(), &quick()).unwrap();
        let b = lemma_bound(&gaussian_scenario(), &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_atom_skips_sampling() {
        let mut s = gaussian_scenario();
        s.noise.innovation = MarginalFamily::gaussian(0.0, 0.0);
        s.noise.degenerate = true;
        let out = lemma_bound(&s, &quick()).unwrap();
        assert_eq!(out.bound.rate, Rate::Unbounded);
    }

    #[test]
    fn rejects_small_sample_counts() {
        let cfg = LemmaConfig {
            n_samples: 10,
            ..quick()
        };
        assert!(matches!(
            lemma_bound(&gaussian_scenario(), &cfg),
            Err(LemmaError::Config(_))
        ));
    }

    #[test]
    fn unbounded_interference_is_rejected_by_sampler() {
        let mut s = gaussian_scenario();
        s.interference = MarginalFamily::Unbounded;
        assert_eq!(
            lemma_bound(&s, &quick()),
            Err(LemmaError::Sampling(SamplingError::UnsupportedSampling))
        );
    }

    #[test]
    fn free_policy_searches_two_axes() {
        let mut s = gaussian_scenario();
        s.noise.c_z = 0.3;
        let cfg = LemmaConfig {
            alpha_policy: AlphaPolicy::Free,
            refine_grid: 3,
            ..quick()
        };
        let out = lemma_bound(&s, &cfg).unwrap();
        assert!(out.bound.rate.bits().unwrap() > 0.0);
    }

    #[test]
    fn instantiate_rejects_mismatched_values() {
        let s = gaussian_scenario();
        assert!(instantiate(&s, SweepAxis::Family, SweepValue::Number(1.0)).is_err());
        assert!(instantiate(
            &s,
            SweepAxis::RhoZn,
            SweepValue::Family(FamilyKind::Laplace)
        )
        .is_err());
        assert!(instantiate(&s, SweepAxis::RhoZn, SweepValue::Number(1.0)).is_err());
    }

    #[test]
    fn empty_sweep_is_empty() {
        assert!(sweep(&gaussian_scenario(), SweepAxis::RhoZn, &[], &quick()).is_empty());
    }

    #[test]
    fn sweep_collects_point_errors() {
        let values = [
            SweepValue::Number(0.2),
            SweepValue::Number(1.5),
            SweepValue::Number(0.4),
        ];
        let out = sweep(&gaussian_scenario(), SweepAxis::RhoZn, &values, &quick());
        assert_eq!(out.len(), 3);
        assert!(out[0].is_ok() && out[1].is_err() && out[2].is_ok());
    }
}
