//! Exact Gel'fand–Pinsker rate for jointly Gaussian `(X, Z, N)` with the
//! linear auxiliary `U = X + αZ`:
//!
//! ```text
//! R(α) = I(U; Y) - I(U; Z),   Y = ηX + Z + N
//! ```
//!
//! Both mutual informations are bivariate Gaussian, `-½ log₂(1 - ρ²)`, and are
//! evaluated from correlation coefficients. This path shares no code with
//! [`crate::closed_form`] and serves as its independent check.

use crate::scenario::SecondOrderStats;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Initial α search interval is `[-ALPHA_RANGE, ALPHA_RANGE]`.
pub const ALPHA_RANGE: f64 = 10.0;
pub const ALPHA_TOL: f64 = 1e-10;
const MAX_WIDENINGS: usize = 3;
/// Rounding slack for covariances on the PSD boundary.
const PSD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("covariance of (X, Z, N) is not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("singular covariance: {0}")]
    SingularCovariance(&'static str),
}

/// Second moments of jointly Gaussian `(X, Z, N)` with `X ⟂ Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianJoint {
    pub sigma_x2: f64,
    pub sigma_z2: f64,
    pub sigma_n2: f64,
    pub rho_xn: f64,
    pub rho_zn: f64,
}

impl GaussianJoint {
    pub fn new(
        sigma_x2: f64,
        sigma_z2: f64,
        sigma_n2: f64,
        rho_xn: f64,
        rho_zn: f64,
    ) -> Result<Self, OracleError> {
        let all = [sigma_x2, sigma_z2, sigma_n2, rho_xn, rho_zn];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::NotPsd("non-finite entry".into()));
        }
        if sigma_x2 <= 0.0 || sigma_z2 <= 0.0 || sigma_n2 <= 0.0 {
            return Err(OracleError::NotPsd("variances must be positive".into()));
        }
        // With ρ_XZ = 0 the determinant is σ_X²σ_Z²σ_N²(1 - ρ_XN² - ρ_ZN²).
        let sum = rho_xn * rho_xn + rho_zn * rho_zn;
        if sum > 1.0 + PSD_SLACK {
            return Err(OracleError::NotPsd(format!(
                "rho_xn^2 + rho_zn^2 = {sum} > 1"
            )));
        }
        Ok(Self {
            sigma_x2,
            sigma_z2,
            sigma_n2,
            rho_xn,
            rho_zn,
        })
    }

    pub fn from_stats(stats: &SecondOrderStats, sigma_z2: f64) -> Result<Self, OracleError> {
        Self::new(
            stats.sigma_x2(),
            sigma_z2,
            stats.sigma_n2(),
            stats.rho_xn(),
            stats.rho_zn(),
        )
    }
}

/// `I = -½ log₂(1 - ρ²)` from `ρ² = cov² / (var_a var_b)`.
fn gaussian_mi_bits(cov: f64, var_a: f64, var_b: f64) -> Result<f64, OracleError> {
    let rho2 = cov * cov / (var_a * var_b);
    if !(rho2 < 1.0) {
        return Err(OracleError::SingularCovariance("perfectly correlated pair"));
    }
    Ok(-0.5 * (-rho2).ln_1p() / std::f64::consts::LN_2)
}

/// `I(U;Y) - I(U;Z)` in bits for `U = X + αZ` at gain `eta`.
pub fn gp_rate(j: &GaussianJoint, eta: f64, alpha: f64) -> Result<f64, OracleError> {
    let (sx, sz, sn) = (j.sigma_x2.sqrt(), j.sigma_z2.sqrt(), j.sigma_n2.sqrt());
    let cov_xn = j.rho_xn * sx * sn;
    let cov_zn = j.rho_zn * sz * sn;

    let var_u = j.sigma_x2 + alpha * alpha * j.sigma_z2;
    let var_y =
        eta * eta * j.sigma_x2 + j.sigma_z2 + j.sigma_n2 + 2.0 * eta * cov_xn + 2.0 * cov_zn;
    if !(var_u > 0.0) {
        return Err(OracleError::SingularCovariance("Var(U) = 0"));
    }
    let scale = eta * eta * j.sigma_x2 + j.sigma_z2 + j.sigma_n2;
    if !(var_y > PSD_SLACK * scale) {
        return Err(OracleError::SingularCovariance("Var(Y) = 0"));
    }
    let cov_uy = eta * j.sigma_x2 + cov_xn + alpha * (j.sigma_z2 + cov_zn);
    let cov_uz = alpha * j.sigma_z2;

    Ok(gaussian_mi_bits(cov_uy, var_u, var_y)? - gaussian_mi_bits(cov_uz, var_u, j.sigma_z2)?)
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    // The bracket midpoint can be marginally worse than the best probe.
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .fold((x, fx), |best, p| if p.1 > best.1 { p } else { best })
}

/// Maximizes [`gp_rate`] over α. The search starts on `[-10, 10]` and doubles
/// the interval (up to three times) when the maximizer lands on its edge.
pub fn gp_rate_max(j: &GaussianJoint, eta: f64) -> Result<(f64, f64), OracleError> {
    // Surface errors (e.g. Var(Y) = 0) before searching.
    gp_rate(j, eta, 0.0)?;
    let f = |a: f64| gp_rate(j, eta, a).unwrap_or(f64::NEG_INFINITY);
    let mut range = ALPHA_RANGE;
    let mut best = golden_section_max(f, -range, range, ALPHA_TOL);
    for _ in 0..MAX_WIDENINGS {
        if best.0.abs() < range * (1.0 - 1e-6) {
            break;
        }
        range *= 2.0;
        best = golden_section_max(f, -range, range, ALPHA_TOL);
    }
    Ok((best.1, best.0))
}
