//! Channel scenarios: gain law, interference law, conditional noise law and
//! power budget, plus the second-order statistics the closed-form bound uses.
//!
//! The noise is modelled as a linear mix `N = c_x·X + c_z·Z + W` where the
//! innovation `W` is independent of `X` and `Z` but may follow any of the
//! built-in [`MarginalFamily`] laws. This realizes every feasible pair of
//! correlation coefficients while keeping the moments exact.

mod file;

pub use file::{NoiseSpec, ScenarioError, ScenarioFile, TargetStats};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Absolute tolerance on `Σ p_k = 1` for gain and mixture weights.
pub const PMF_TOLERANCE: f64 = 1e-9;

/// Real or proper-complex signalling. Complex signalling drops the `½`
/// in front of every `log₂(1 + SNR)` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Real,
    Complex,
}

impl Domain {
    /// Multiplier applied to `log₂(1 + SNR)` (and to entropy differences).
    pub fn log_factor(self) -> f64 {
        match self {
            Domain::Real => 0.5,
            Domain::Complex => 1.0,
        }
    }

    /// Rate multiplier relative to the real-valued evaluation.
    pub fn dimensions(self) -> f64 {
        match self {
            Domain::Real => 1.0,
            Domain::Complex => 2.0,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Real => "real",
            Domain::Complex => "complex",
        })
    }
}

/// One point of the discretized channel-gain law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainAtom {
    pub eta: f64,
    pub p: f64,
}

/// Finite discrete law of the channel gain `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainDistribution {
    pub atoms: Vec<GainAtom>,
}

impl GainDistribution {
    /// Deterministic gain `H = eta`.
    pub fn constant(eta: f64) -> Self {
        Self {
            atoms: vec![GainAtom { eta, p: 1.0 }],
        }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self {
            atoms: pairs.iter().map(|&(eta, p)| GainAtom { eta, p }).collect(),
        }
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        if self.atoms.is_empty() {
            out.push(Violation::EmptyGain);
            return;
        }
        let mut finite = true;
        for (i, a) in self.atoms.iter().enumerate() {
            if !a.eta.is_finite() {
                finite = false;
                out.push(Violation::NonFinite {
                    field: format!("gain.atoms[{i}].eta"),
                });
            }
            if !a.p.is_finite() {
                finite = false;
                out.push(Violation::NonFinite {
                    field: format!("gain.atoms[{i}].p"),
                });
            } else if a.p < 0.0 {
                out.push(Violation::NegativeProbability { index: i, p: a.p });
            }
        }
        if finite {
            let sum: f64 = self.atoms.iter().map(|a| a.p).sum();
            if (sum - 1.0).abs() > PMF_TOLERANCE {
                out.push(Violation::BadPmf { sum });
            }
        }
    }
}

/// Family tag without parameters, used to rebuild a law at a given variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    Laplace,
    Uniform,
    GaussianMixture,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [
        FamilyKind::Gaussian,
        FamilyKind::Laplace,
        FamilyKind::Uniform,
        FamilyKind::GaussianMixture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Laplace => "laplace",
            FamilyKind::Uniform => "uniform",
            FamilyKind::GaussianMixture => "gaussian_mixture",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown family `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Scalar marginal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalFamily {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Density `exp(-|x - mean| / scale) / (2 scale)`.
    Laplace {
        mean: f64,
        scale: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    GaussianMixture {
        components: Vec<MixtureComponent>,
    },
    /// Interference of unbounded variance. Accepted by the closed-form bound
    /// only; samplers reject it.
    Unbounded,
}

impl MarginalFamily {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        MarginalFamily::Gaussian { mean, variance }
    }

    pub fn laplace(mean: f64, scale: f64) -> Self {
        MarginalFamily::Laplace { mean, scale }
    }

    pub fn uniform(low: f64, high: f64) -> Self {
        MarginalFamily::Uniform { low, high }
    }

    /// Zero-mean member of `kind` with the requested variance.
    ///
    /// The mixture is the symmetric bimodal law `½N(-a, s) + ½N(a, s)` with
    /// `a² = 0.8 v` and `s = 0.2 v`.
    pub fn zero_mean(kind: FamilyKind, variance: f64) -> Self {
        match kind {
            FamilyKind::Gaussian => Self::gaussian(0.0, variance),
            FamilyKind::Laplace => Self::laplace(0.0, (variance / 2.0).sqrt()),
            FamilyKind::Uniform => {
                let half = (3.0 * variance).sqrt();
                Self::uniform(-half, half)
            }
            FamilyKind::GaussianMixture => {
                let a = (0.8 * variance).sqrt();
                let s = 0.2 * variance;
                MarginalFamily::GaussianMixture {
                    components: vec![
                        MixtureComponent {
                            weight: 0.5,
                            mean: -a,
                            variance: s,
                        },
                        MixtureComponent {
                            weight: 0.5,
                            mean: a,
                            variance: s,
                        },
                    ],
                }
            }
        }
    }

    pub fn kind(&self) -> Option<FamilyKind> {
        match self {
            MarginalFamily::Gaussian { .. } => Some(FamilyKind::Gaussian),
            MarginalFamily::Laplace { .. } => Some(FamilyKind::Laplace),
            MarginalFamily::Uniform { .. } => Some(FamilyKind::Uniform),
            MarginalFamily::GaussianMixture { .. } => Some(FamilyKind::GaussianMixture),
            MarginalFamily::Unbounded => None,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            MarginalFamily::Gaussian { mean, .. } | MarginalFamily::Laplace { mean, .. } => {
                Some(*mean)
            }
            MarginalFamily::Uniform { low, high } => Some(0.5 * (low + high)),
            MarginalFamily::GaussianMixture { components } => {
                Some(components.iter().map(|c| c.weight * c.mean).sum())
            }
            MarginalFamily::Unbounded => None,
        }
    }

    /// Exact variance; `None` for [`MarginalFamily::Unbounded`].
    pub fn variance(&self) -> Option<f64> {
        match self {
            MarginalFamily::Gaussian { variance, .. } => Some(*variance),
            MarginalFamily::Laplace { scale, .. } => Some(2.0 * scale * scale),
            MarginalFamily::Uniform { low, high } => {
                let w = high - low;
                Some(w * w / 12.0)
            }
            MarginalFamily::GaussianMixture { components } => {
                let mean: f64 = components.iter().map(|c| c.weight * c.mean).sum();
                let second: f64 = components
                    .iter()
                    .map(|c| c.weight * (c.variance + c.mean * c.mean))
                    .sum();
                Some((second - mean * mean).max(0.0))
            }
            MarginalFamily::Unbounded => None,
        }
    }

    fn violations(&self, field: &str, out: &mut Vec<Violation>) {
        let bad = |reason: String| Violation::BadFamily {
            field: field.to_string(),
            reason,
        };
        match self {
            MarginalFamily::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() {
                    out.push(bad("parameters must be finite".into()));
                } else if *variance < 0.0 {
                    out.push(bad(format!("variance {variance} is negative")));
                }
            }
            MarginalFamily::Laplace { mean, scale } => {
                if !mean.is_finite() || !scale.is_finite() {
                    out.push(bad("parameters must be finite".into()));
                } else if *scale < 0.0 {
                    out.push(bad(format!("scale {scale} is negative")));
                }
            }
            MarginalFamily::Uniform { low, high } => {
                if !low.is_finite() || !high.is_finite() {
                    out.push(bad("parameters must be finite".into()));
                } else if high < low {
                    out.push(bad(format!("high {high} is below low {low}")));
                }
            }
            MarginalFamily::GaussianMixture { components } => {
                if components.is_empty() {
                    out.push(bad("mixture has no components".into()));
                    return;
                }
                let finite = components
                    .iter()
                    .all(|c| c.weight.is_finite() && c.mean.is_finite() && c.variance.is_finite());
                if !finite {
                    out.push(bad("parameters must be finite".into()));
                    return;
                }
                if components.iter().any(|c| c.weight < 0.0) {
                    out.push(bad("negative mixture weight".into()));
                }
                if components.iter().any(|c| c.variance < 0.0) {
                    out.push(bad("negative component variance".into()));
                }
                let sum: f64 = components.iter().map(|c| c.weight).sum();
                if (sum - 1.0).abs() > PMF_TOLERANCE {
                    out.push(bad(format!("mixture weights sum to {sum}")));
                }
            }
            MarginalFamily::Unbounded => {}
        }
    }
}

/// Conditional noise law `N = c_x·X + c_z·Z + W`, with `W` drawn from
/// `innovation` independently of `X` and `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub c_x: f64,
    pub c_z: f64,
    pub innovation: MarginalFamily,
    /// Permits `Var(W) = 0`.
    #[serde(default)]
    pub degenerate: bool,
}

impl NoiseModel {
    /// Noise independent of input and interference.
    pub fn independent(innovation: MarginalFamily) -> Self {
        Self {
            c_x: 0.0,
            c_z: 0.0,
            innovation,
            degenerate: false,
        }
    }

    /// Builds the linear mix realizing `target` exactly:
    /// `c_x = ρ_XN σ_N/σ_X`, `c_z = ρ_ZN σ_N/σ_Z`,
    /// `Var(W) = (1 - ρ_XN² - ρ_ZN²) σ_N²`.
    ///
    /// `sigma_z2` of `None` (unbounded) or zero requires `rho_zn = 0`.
    pub fn from_target(
        sigma_x2: f64,
        sigma_z2: Option<f64>,
        target: TargetStats,
        family: FamilyKind,
    ) -> Result<Self, Violation> {
        let TargetStats {
            sigma_n2,
            rho_xn,
            rho_zn,
        } = target;
        for (name, v) in [
            ("noise.target.sigma_n2", sigma_n2),
            ("noise.target.rho_xn", rho_xn),
            ("noise.target.rho_zn", rho_zn),
        ] {
            if !v.is_finite() {
                return Err(Violation::NonFinite { field: name.into() });
            }
        }
        if !(sigma_x2 > 0.0) {
            return Err(Violation::NonPositivePower { value: sigma_x2 });
        }
        if sigma_n2 < 0.0 {
            return Err(Violation::BadFamily {
                field: "noise.target.sigma_n2".into(),
                reason: format!("noise variance {sigma_n2} is negative"),
            });
        }
        let sum = rho_xn * rho_xn + rho_zn * rho_zn;
        if sum >= 1.0 {
            return Err(Violation::CorrelationOverflow { sum });
        }
        if sigma_n2 == 0.0 {
            return Err(Violation::DegenerateInnovation);
        }
        let sigma_n = sigma_n2.sqrt();
        let c_z = match sigma_z2 {
            Some(v) if v > 0.0 && v.is_finite() => rho_zn * sigma_n / v.sqrt(),
            _ if rho_zn == 0.0 => 0.0,
            _ => return Err(Violation::InterferenceLoading {
                reason:
                    "correlation with interference requires finite, positive interference variance"
                        .into(),
            }),
        };
        Ok(Self {
            c_x: rho_xn * sigma_n / sigma_x2.sqrt(),
            c_z,
            innovation: MarginalFamily::zero_mean(family, (1.0 - sum) * sigma_n2),
            degenerate: false,
        })
    }
}

/// Complete generative description of `Y = H·X + Z + N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub gain: GainDistribution,
    pub interference: MarginalFamily,
    pub noise: NoiseModel,
    /// Average power budget `σ_X²`.
    pub power: f64,
    #[serde(default)]
    pub domain: Domain,
}

impl ChannelScenario {
    /// Unit-gain scenario with standard Gaussian interference and independent
    /// innovation `noise`.
    pub fn awgn(power: f64, noise: MarginalFamily) -> Self {
        Self {
            gain: GainDistribution::constant(1.0),
            interference: MarginalFamily::gaussian(0.0, 1.0),
            noise: NoiseModel::independent(noise),
            power,
            domain: Domain::Real,
        }
    }

    /// `σ_Z²`, or `None` for unbounded interference.
    pub fn interference_variance(&self) -> Option<f64> {
        self.interference.variance()
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut out = Vec::new();

        if !self.power.is_finite() {
            out.push(Violation::NonFinite {
                field: "power".into(),
            });
        } else if self.power <= 0.0 {
            out.push(Violation::NonPositivePower { value: self.power });
        }

        self.gain.violations(&mut out);
        self.interference.violations("interference", &mut out);
        self.noise
            .innovation
            .violations("noise.innovation", &mut out);

        for (name, v) in [("noise.c_x", self.noise.c_x), ("noise.c_z", self.noise.c_z)] {
            if !v.is_finite() {
                out.push(Violation::NonFinite { field: name.into() });
            }
        }

        if matches!(self.noise.innovation, MarginalFamily::Unbounded) {
            out.push(Violation::BadFamily {
                field: "noise.innovation".into(),
                reason: "the innovation must have finite variance".into(),
            });
        }

        let sigma_z2 = self.interference_variance();
        if self.noise.c_z != 0.0 {
            match sigma_z2 {
                None => out.push(Violation::InterferenceLoading {
                    reason: "c_z must be 0 when the interference variance is unbounded".into(),
                }),
                Some(0.0) => out.push(Violation::InterferenceLoading {
                    reason: "c_z must be 0 when the interference variance is 0".into(),
                }),
                _ => {}
            }
        }

        let var_w = self.noise.innovation.variance();
        if var_w == Some(0.0) && !self.noise.degenerate {
            out.push(Violation::DegenerateInnovation);
        }

        // Correlation check only once every input is well formed.
        if out.is_empty() {
            let sx2 = self.power;
            let sz2 = sigma_z2.unwrap_or(0.0);
            let var_w = var_w.unwrap_or(0.0);
            let explained =
                self.noise.c_x * self.noise.c_x * sx2 + self.noise.c_z * self.noise.c_z * sz2;
            let sn2 = explained + var_w;
            if sn2 > 0.0 && !sn2.is_finite() {
                out.push(Violation::NonFinite {
                    field: "noise".into(),
                });
            } else if sn2 > 0.0 {
                let sum = explained / sn2;
                if sum >= 1.0 {
                    out.push(Violation::CorrelationOverflow { sum });
                }
            }
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { violations: out })
        }
    }

    /// Exact second-order statistics of `(X_G, Z, N_G)` with Gaussian input
    /// `X_G ~ N(0, σ_X²)` independent of `Z`.
    pub fn moment_algebra(&self) -> Result<SecondOrderStats, ValidationError> {
        self.validate()?;
        let sx2 = self.power;
        let sz2 = self.interference_variance().unwrap_or(0.0);
        let var_w = self.noise.innovation.variance().unwrap_or(0.0);
        let NoiseModel { c_x, c_z, .. } = self.noise;
        let sn2 = c_x * c_x * sx2 + c_z * c_z * sz2 + var_w;
        let (rho_xn, rho_zn) = if sn2 > 0.0 {
            let sn = sn2.sqrt();
            let rzn = if sz2 > 0.0 {
                c_z * sz2.sqrt() / sn
            } else {
                0.0
            };
            (c_x * sx2.sqrt() / sn, rzn)
        } else {
            (0.0, 0.0)
        };
        SecondOrderStats::new(sx2, sn2, rho_xn, rho_zn).map_err(|e| ValidationError {
            violations: vec![Violation::from(e)],
        })
    }

    /// Parses and validates a JSON scenario document.
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        ScenarioFile::parse(text)?.resolve()
    }
}

/// `(σ_X², σ_N², ρ_XN, ρ_ZN)` evaluated under Gaussian input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderStats {
    sigma_x2: f64,
    sigma_n2: f64,
    rho_xn: f64,
    rho_zn: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("statistic `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("input power {0} must be positive")]
    NonPositivePower(f64),
    #[error("noise variance {0} is negative")]
    NegativeNoiseVariance(f64),
    #[error("correlation `{name}` = {value} is outside (-1, 1)")]
    CorrelationOutOfRange { name: &'static str, value: f64 },
    #[error("rho_xn^2 + rho_zn^2 = {0} must be below 1")]
    CorrelationOverflow(f64),
}

impl SecondOrderStats {
    pub fn new(sigma_x2: f64, sigma_n2: f64, rho_xn: f64, rho_zn: f64) -> Result<Self, StatsError> {
        for (name, v) in [
            ("sigma_x2", sigma_x2),
            ("sigma_n2", sigma_n2),
            ("rho_xn", rho_xn),
            ("rho_zn", rho_zn),
        ] {
            if !v.is_finite() {
                return Err(StatsError::NonFinite(name));
            }
        }
        if sigma_x2 <= 0.0 {
            return Err(StatsError::NonPositivePower(sigma_x2));
        }
        if sigma_n2 < 0.0 {
            return Err(StatsError::NegativeNoiseVariance(sigma_n2));
        }
        for (name, value) in [("rho_xn", rho_xn), ("rho_zn", rho_zn)] {
            if value.abs() >= 1.0 {
                return Err(StatsError::CorrelationOutOfRange { name, value });
            }
        }
        let sum = rho_xn * rho_xn + rho_zn * rho_zn;
        if sum >= 1.0 {
            return Err(StatsError::CorrelationOverflow(sum));
        }
        Ok(Self {
            sigma_x2,
            sigma_n2,
            rho_xn,
            rho_zn,
        })
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    pub fn sigma_n2(&self) -> f64 {
        self.sigma_n2
    }

    pub fn rho_xn(&self) -> f64 {
        self.rho_xn
    }

    pub fn rho_zn(&self) -> f64 {
        self.rho_zn
    }

    /// `ρ_XN σ_N / σ_X`: the part of the noise that acts as extra channel gain.
    pub fn input_loading(&self) -> f64 {
        self.rho_xn * self.sigma_n2.sqrt() / self.sigma_x2.sqrt()
    }

    /// `1 - ρ_XN² - ρ_ZN²`, strictly positive by construction.
    pub fn unexplained_fraction(&self) -> f64 {
        1.0 - self.rho_xn * self.rho_xn - self.rho_zn * self.rho_zn
    }

    /// Variance of the noise after removing its projections on `X` and `Z`.
    pub fn decorrelated_noise_variance(&self) -> f64 {
        self.unexplained_fraction() * self.sigma_n2
    }

    pub fn with_rho_zn(self, rho_zn: f64) -> Result<Self, StatsError> {
        Self::new(self.sigma_x2, self.sigma_n2, self.rho_xn, rho_zn)
    }
}

/// A single failed invariant. [`Violation::field`] names the offending
/// location in the scenario document.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("value is not finite")]
    NonFinite { field: String },
    #[error("power {value} must be positive")]
    NonPositivePower { value: f64 },
    #[error("gain distribution has no atoms")]
    EmptyGain,
    #[error("atom {index} has negative probability {p}")]
    NegativeProbability { index: usize, p: f64 },
    #[error("probabilities sum to {sum}, expected 1 within 1e-9")]
    BadPmf { sum: f64 },
    #[error("{reason}")]
    BadFamily { field: String, reason: String },
    #[error("innovation variance is 0 but the noise is not flagged degenerate")]
    DegenerateInnovation,
    #[error("{reason}")]
    InterferenceLoading { reason: String },
    #[error("rho_xn^2 + rho_zn^2 = {sum} must be below 1")]
    CorrelationOverflow { sum: f64 },
}

impl Violation {
    pub fn field(&self) -> &str {
        match self {
            Violation::NonFinite { field } | Violation::BadFamily { field, .. } => field,
            Violation::NonPositivePower { .. } => "power",
            Violation::EmptyGain
            | Violation::BadPmf { .. }
            | Violation::NegativeProbability { .. } => "gain.atoms",
            Violation::DegenerateInnovation => "noise.innovation",
            Violation::InterferenceLoading { .. } => "noise.c_z",
            Violation::CorrelationOverflow { .. } => "noise",
        }
    }
}

impl From<StatsError> for Violation {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::CorrelationOverflow(sum) => Violation::CorrelationOverflow { sum },
            StatsError::NonPositivePower(value) => Violation::NonPositivePower { value },
            other => Violation::BadFamily {
                field: "noise".into(),
                reason: other.to_string(),
            },
        }
    }
}

/// Every invariant a scenario failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl ValidationError {
    pub fn has(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field(), v)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ChannelScenario {
        ChannelScenario::awgn(1.0, MarginalFamily::gaussian(0.0, 1.0))
    }

    #[test]
    fn canonical_scenario_is_valid() {
        assert_eq!(canonical().validate(), Ok(()));
    }

    #[test]
    fn pmf_summing_to_point_nine_is_rejected() {
        let mut s = canonical();
        s.gain = GainDistribution::from_pairs(&[(1.0, 0.6), (2.0, 0.3)]);
        let err = s.validate().unwrap_err();
        assert!(err.has(|v| matches!(v, Violation::BadPmf { sum } if (sum - 0.9).abs() < 1e-12)));
        assert!(err.to_string().contains("gain.atoms"));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut s = canonical();
        s.power = -1.0;
        s.gain = GainDistribution::from_pairs(&[(1.0, 0.5)]);
        s.noise.innovation = MarginalFamily::gaussian(0.0, 0.0);
        let err = s.validate().unwrap_err();
        assert!(err.has(|v| matches!(v, Violation::NonPositivePower { .. })));
        assert!(err.has(|v| matches!(v, Violation::BadPmf { .. })));
        assert!(err.has(|v| matches!(v, Violation::DegenerateInnovation)));
    }

    #[test]
    fn strongly_loaded_noise_stays_below_overflow() {
        // N = 0.8 X + 0.8 Z + W with Var(W) = 0.01: sum = 1.28 / 1.29.
        let mut s = canonical();
        s.noise = NoiseModel {
            c_x: 0.8,
            c_z: 0.8,
            innovation: MarginalFamily::gaussian(0.0, 0.01),
            degenerate: false,
        };
        let stats = s.moment_algebra().unwrap();
        let sum = stats.rho_xn().powi(2) + stats.rho_zn().powi(2);
        assert!((sum - 1.28 / 1.29).abs() < 1e-12);
        assert!(sum < 1.0);
    }

    #[test]
    fn degenerate_innovation_with_loading_overflows() {
        let mut s = canonical();
        s.noise = NoiseModel {
            c_x: 0.8,
            c_z: 0.8,
            innovation: MarginalFamily::gaussian(0.0, 0.0),
            degenerate: true,
        };
        let err = s.validate().unwrap_err();
        assert!(err.has(|v| matches!(v, Violation::CorrelationOverflow { .. })));
    }

    #[test]
    fn zero_variance_interference_requires_zero_loading() {
        let mut s = canonical();
        s.interference = MarginalFamily::gaussian(0.0, 0.0);
        s.noise.c_z = 0.5;
        let err = s.validate().unwrap_err();
        assert!(err.has(|v| matches!(v, Violation::InterferenceLoading { .. })));

        s.noise.c_z = 0.0;
        let stats = s.moment_algebra().unwrap();
        assert_eq!(stats.rho_zn(), 0.0);
    }

    #[test]
    fn unbounded_interference_accepted_with_zero_loading() {
        let mut s = canonical();
        s.interference = MarginalFamily::Unbounded;
        let stats = s.moment_algebra().unwrap();
        assert_eq!(stats.rho_zn(), 0.0);
        assert_eq!(stats.sigma_n2(), 1.0);
    }

    #[test]
    fn moment_algebra_independent_noise() {
        let s = ChannelScenario::awgn(1.0, MarginalFamily::gaussian(0.0, 0.25));
        let st = s.moment_algebra().unwrap();
        assert_eq!((st.sigma_n2(), st.rho_xn(), st.rho_zn()), (0.25, 0.0, 0.0));
    }

    #[test]
    fn moment_algebra_input_loading() {
        let mut s = ChannelScenario::awgn(1.0, MarginalFamily::gaussian(0.0, 0.75));
        s.noise.c_x = 0.5;
        let st = s.moment_algebra().unwrap();
        assert!((st.sigma_n2() - 1.0).abs() < 1e-15);
        assert!((st.rho_xn() - 0.5).abs() < 1e-15);
        assert_eq!(st.rho_zn(), 0.0);
    }

    #[test]
    fn moment_algebra_laplace_mix() {
        let mut s = ChannelScenario::awgn(1.0, MarginalFamily::laplace(0.0, 0.5));
        s.noise.c_x = 0.3;
        s.noise.c_z = 0.4;
        let st = s.moment_algebra().unwrap();
        assert!((st.sigma_n2() - 0.75).abs() < 1e-15);
        assert!((st.rho_xn() - 0.3 / 0.75f64.sqrt()).abs() < 1e-15);
        assert!((st.rho_zn() - 0.4 / 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_mean_families_hit_requested_variance() {
        for kind in FamilyKind::ALL {
            let f = MarginalFamily::zero_mean(kind, 0.7);
            assert!((f.variance().unwrap() - 0.7).abs() < 1e-14, "{kind:?}");
            assert!(f.mean().unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn target_stats_round_trip() {
        let target = TargetStats {
            sigma_n2: 2.0,
            rho_xn: -0.4,
            rho_zn: 0.5,
        };
        for kind in FamilyKind::ALL {
            let mut s = canonical();
            s.interference = MarginalFamily::gaussian(0.0, 3.0);
            s.noise = NoiseModel::from_target(1.0, Some(3.0), target, kind).unwrap();
            let st = s.moment_algebra().unwrap();
            assert!((st.sigma_n2() - 2.0).abs() < 1e-12);
            assert!((st.rho_xn() + 0.4).abs() < 1e-12);
            assert!((st.rho_zn() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn target_stats_overflow_is_rejected() {
        let target = TargetStats {
            sigma_n2: 1.0,
            rho_xn: 0.8,
            rho_zn: 0.67,
        };
        let err =
            NoiseModel::from_target(1.0, Some(1.0), target, FamilyKind::Gaussian).unwrap_err();
        assert!(matches!(err, Violation::CorrelationOverflow { .. }));
    }

    #[test]
    fn stats_constructor_rejects_bad_values() {
        assert!(SecondOrderStats::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(SecondOrderStats::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(SecondOrderStats::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(SecondOrderStats::new(1.0, 1.0, 0.8, 0.6).is_err());
        assert!(SecondOrderStats::new(1.0, f64::NAN, 0.0, 0.0).is_err());
        assert!(SecondOrderStats::new(1.0, 1.0, 0.7, 0.7).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn finite() -> impl Strategy<Value = f64> {
            prop_oneof![
                -1e6..1e6f64,
                Just(0.0),
                Just(-0.0),
                Just(f64::MIN_POSITIVE),
                Just(1e300),
                Just(-1e300),
            ]
        }

        proptest! {
            #[test]
            fn validate_never_panics(
                power in finite(),
                eta in finite(),
                p in finite(),
                c_x in finite(),
                c_z in finite(),
                a in finite(),
                b in finite(),
                degenerate in any::<bool>(),
            ) {
                let s = ChannelScenario {
                    gain: GainDistribution::from_pairs(&[(eta, p)]),
                    interference: MarginalFamily::uniform(a.min(b), a.max(b)),
                    noise: NoiseModel {
                        c_x,
                        c_z,
                        innovation: MarginalFamily::laplace(a, b),
                        degenerate,
                    },
                    power,
                    domain: Domain::Real,
                };
                let _ = s.validate();
                let _ = s.moment_algebra();
            }

            #[test]
            fn loadings_keep_correlations_feasible(
                c_x in -5.0..5.0f64,
                c_z in -5.0..5.0f64,
                sx2 in 0.01..10.0f64,
                sz2 in 0.01..10.0f64,
                vw in 0.001..10.0f64,
            ) {
                let s = ChannelScenario {
                    gain: GainDistribution::constant(1.0),
                    interference: MarginalFamily::gaussian(0.0, sz2),
                    noise: NoiseModel {
                        c_x,
                        c_z,
                        innovation: MarginalFamily::gaussian(0.0, vw),
                        degenerate: false,
                    },
                    power: sx2,
                    domain: Domain::Real,
                };
                let st = s.moment_algebra().unwrap();
                let bound = (c_x * c_x * sx2 + c_z * c_z * sz2) / st.sigma_n2();
                let sum = st.rho_xn().powi(2) + st.rho_zn().powi(2);
                prop_assert!(sum <= bound * (1.0 + 1e-12));
                prop_assert!(sum < 1.0);
            }
        }
    }
}
