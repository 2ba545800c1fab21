//! Lower bounds on dirty paper coding (DPC) achievable rates for the channel
//!
//! ```text
//! Y = H·X + Z + N
//! ```
//!
//! where the interference `Z` and gain `H` are known to the transmitter, and
//! the noise `N` may be non-Gaussian and statistically dependent on both `X`
//! and `Z`.
//!
//! The crate offers three routes to a rate:
//!
//! - [`closed_form`]: the second-order-statistics bound and its uncorrelated
//!   special case, together with every intermediate quantity of its derivation
//!   (virtual channel, residual variance `Q(η)`, MMSE scaling `β*`).
//! - [`lemma_eval`]: Monte-Carlo evaluation of the general entropy bound, with
//!   a k-nearest-neighbor entropy estimator and a local search over `(α, β)`.
//! - [`oracle`]: the exact Gel'fand–Pinsker rate for jointly Gaussian
//!   `(X, Z, N)` with a linear auxiliary `U = X + αZ`.
//!
//! Scenarios are described by [`scenario::ChannelScenario`] and sampled with
//! the counter-based, scheduler-independent generator in [`sampling`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod entropy;
pub mod lemma_eval;
pub mod oracle;
pub mod sampling;
pub mod scenario;

pub use closed_form::{BoundResult, GainTerm, Method, Rate};
pub use scenario::{ChannelScenario, Domain, GainDistribution, SecondOrderStats};

/// Bits per nat. All entropies are in nats; rates are converted once, here.
pub(crate) fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
