//! Seeded joint sampling of `(X_G, Z, N_G, Y)` at a fixed gain atom, and
//! empirical second-order statistics.
//!
//! Every column has its own ChaCha20 stream, and every row consumes exactly
//! [`WORDS_PER_ROW`] 32-bit words of it. Row `i` is therefore a pure function
//! of `(root, module, atom, batch, column, i)`: any range of rows can be drawn
//! independently, and splitting a batch across workers reproduces a single
//! sequential draw bit for bit.

use crate::scenario::{ChannelScenario, MarginalFamily, SecondOrderStats, ValidationError};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::io::{self, Write};
use std::ops::Range;
use thiserror::Error;

/// 32-bit words consumed per row per column (four `u64` draws).
pub const WORDS_PER_ROW: u64 = 8;

/// Rows per work unit in parallel draws. Has no effect on the output.
const CHUNK_ROWS: usize = 1 << 15;

/// Root seed plus the stream labels that select an independent substream.
///
/// `atom` and `batch` are packed into 24 bits each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed {
    pub root: u64,
    pub module: u8,
    pub atom: u32,
    pub batch: u32,
}

/// Module tags for [`Seed::module`].
pub mod modules {
    pub const SAMPLING: u8 = 0;
    pub const LEMMA: u8 = 1;
    pub const VERIFY: u8 = 2;
    pub const ENTROPY: u8 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Column {
    X = 0,
    Z = 1,
    Innovation = 2,
    Marginal = 3,
}

impl Seed {
    pub fn new(root: u64) -> Self {
        Self {
            root,
            ..Self::default()
        }
    }

    pub fn with_module(self, module: u8) -> Self {
        Self { module, ..self }
    }

    pub fn with_atom(self, atom: u32) -> Self {
        Self { atom, ..self }
    }

    pub fn with_batch(self, batch: u32) -> Self {
        Self { batch, ..self }
    }

    fn stream_id(&self, column: Column) -> u64 {
        debug_assert!(self.atom < 1 << 24 && self.batch < 1 << 24);
        (self.module as u64) << 56
            | (column as u64) << 48
            | ((self.atom as u64) & 0xFF_FFFF) << 24
            | (self.batch as u64) & 0xFF_FFFF
    }

    fn rng_at(&self, column: Column, row: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.root);
        rng.set_stream(self.stream_id(column));
        rng.set_word_pos(row as u128 * WORDS_PER_ROW as u128);
        rng
    }
}

/// The four raw draws available to one row of one column.
#[derive(Debug, Clone, Copy)]
pub struct RowDraws(pub [u64; 4]);

impl RowDraws {
    fn next(rng: &mut ChaCha20Rng) -> Self {
        RowDraws([
            rng.next_u64(),
            rng.next_u64(),
            rng.next_u64(),
            rng.next_u64(),
        ])
    }

    /// Uniform on the open interval `(0, 1)` from draw `i`.
    pub fn open01(&self, i: usize) -> f64 {
        ((self.0[i] >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller from draws `i` and `i + 1`.
    pub fn standard_normal(&self, i: usize) -> f64 {
        let r = (-2.0 * self.open01(i).ln()).sqrt();
        r * (std::f64::consts::TAU * self.open01(i + 1)).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("cannot sample interference of unbounded variance")]
    UnsupportedSampling,
    #[error("batch size must be at least {min}, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("column `{0}` has zero sample variance")]
    DegenerateColumn(&'static str),
    #[error("sample correlations (rho_xn = {rho_xn}, rho_zn = {rho_zn}) leave no independent noise component")]
    NearlyDegenerate { rho_xn: f64, rho_zn: f64 },
}

impl MarginalFamily {
    /// Maps one row's draws to a sample. Gaussian by Box–Muller, Laplace by
    /// inverse CDF, uniform by an affine map, mixtures by picking a component
    /// and then sampling it.
    pub fn sample_row(&self, d: &RowDraws) -> Result<f64, SamplingError> {
        Ok(match self {
            MarginalFamily::Gaussian { mean, variance } => {
                mean + variance.sqrt() * d.standard_normal(0)
            }
            MarginalFamily::Laplace { mean, scale } => {
                let v = d.open01(0) - 0.5;
                mean - scale * v.signum() * (1.0 - 2.0 * v.abs()).ln()
            }
            MarginalFamily::Uniform { low, high } => low + (high - low) * d.open01(0),
            MarginalFamily::GaussianMixture { components } => {
                let u = d.open01(0);
                let mut acc = 0.0;
                let mut pick = &components[components.len() - 1];
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        pick = c;
                        break;
                    }
                }
                pick.mean + pick.variance.sqrt() * d.standard_normal(1)
            }
            MarginalFamily::Unbounded => return Err(SamplingError::UnsupportedSampling),
        })
    }
}

/// Rows of `Y = η·X + Z + N` at a fixed gain atom.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub eta: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub noise: Vec<f64>,
    pub y: Vec<f64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn with_capacity(eta: f64, n: usize) -> Self {
        Self {
            eta,
            x: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            noise: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
        }
    }

    fn append(&mut self, mut other: SampleBatch) {
        self.x.append(&mut other.x);
        self.z.append(&mut other.z);
        self.noise.append(&mut other.noise);
        self.y.append(&mut other.y);
    }

    /// Writes the batch as CSV with header `x,z,n,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,z,n,y")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.x[i], self.z[i], self.noise[i], self.y[i]
            )?;
        }
        Ok(())
    }
}

fn check_samplable(s: &ChannelScenario) -> Result<(), SamplingError> {
    s.validate()?;
    if matches!(s.interference, MarginalFamily::Unbounded) {
        return Err(SamplingError::UnsupportedSampling);
    }
    Ok(())
}

/// Draws rows `rows` of the batch identified by `seed`.
pub fn draw_range(
    s: &ChannelScenario,
    eta: f64,
    rows: Range<usize>,
    seed: Seed,
) -> Result<SampleBatch, SamplingError> {
    check_samplable(s)?;
    draw_range_with(s, eta, rows, seed, |x, z, w| {
        Ok(s.noise.c_x * x + s.noise.c_z * z + s.noise.innovation.sample_row(w)?)
    })
}

fn draw_range_with<F>(
    s: &ChannelScenario,
    eta: f64,
    rows: Range<usize>,
    seed: Seed,
    noise: F,
) -> Result<SampleBatch, SamplingError>
where
    F: Fn(f64, f64, &RowDraws) -> Result<f64, SamplingError>,
{
    let n = rows.len();
    let start = rows.start as u64;
    let sx = s.power.sqrt();
    let mut rx = seed.rng_at(Column::X, start);
    let mut rz = seed.rng_at(Column::Z, start);
    let mut rw = seed.rng_at(Column::Innovation, start);
    let mut b = SampleBatch::with_capacity(eta, n);
    for _ in 0..n {
        let x = sx * RowDraws::next(&mut rx).standard_normal(0);
        let z = s.interference.sample_row(&RowDraws::next(&mut rz))?;
        let nz = noise(x, z, &RowDraws::next(&mut rw))?;
        b.x.push(x);
        b.z.push(z);
        b.noise.push(nz);
        b.y.push(eta * x + z + nz);
    }
    Ok(b)
}

fn draw_chunks<F>(eta: f64, n: usize, chunk: usize, f: F) -> Result<SampleBatch, SamplingError>
where
    F: Fn(Range<usize>) -> Result<SampleBatch, SamplingError> + Sync,
{
    let chunk = chunk.max(1);
    let parts: Vec<_> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .collect::<Result<_, _>>()?;
    let mut out = SampleBatch::with_capacity(eta, n);
    for p in parts {
        out.append(p);
    }
    Ok(out)
}

/// Draws `n` iid rows with Gaussian input `X ~ N(0, σ_X²)` independent of
/// `Z`, and noise `N = c_x X + c_z Z + W`.
pub fn draw(
    s: &ChannelScenario,
    eta: f64,
    n: usize,
    seed: Seed,
) -> Result<SampleBatch, SamplingError> {
    draw_chunked(s, eta, n, seed, CHUNK_ROWS)
}

/// [`draw`] split into work units of `chunk` rows. The output does not depend
/// on `chunk`.
pub fn draw_chunked(
    s: &ChannelScenario,
    eta: f64,
    n: usize,
    seed: Seed,
    chunk: usize,
) -> Result<SampleBatch, SamplingError> {
    if n < 1 {
        return Err(SamplingError::TooFewSamples { n, min: 1 });
    }
    check_samplable(s)?;
    draw_chunks(eta, n, chunk, |r| draw_range(s, eta, r, seed))
}

/// Like [`draw`], but the noise column comes from a user-supplied sampler
/// `noise(x, z, draws)`; `s.noise` is ignored. Moments of such scenarios are
/// only available through [`empirical_stats`].
pub fn draw_custom<F>(
    s: &ChannelScenario,
    eta: f64,
    n: usize,
    seed: Seed,
    noise: F,
) -> Result<SampleBatch, SamplingError>
where
    F: Fn(f64, f64, &RowDraws) -> f64 + Sync,
{
    if n < 1 {
        return Err(SamplingError::TooFewSamples { n, min: 1 });
    }
    check_samplable(s)?;
    draw_chunks(eta, n, CHUNK_ROWS, |r| {
        draw_range_with(s, eta, r, seed, |x, z, w| Ok(noise(x, z, w)))
    })
}

/// `n` iid draws from a single marginal law.
pub fn draw_marginal(
    family: &MarginalFamily,
    n: usize,
    seed: Seed,
) -> Result<Vec<f64>, SamplingError> {
    let parts: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|c| {
            let rows = c * CHUNK_ROWS..((c + 1) * CHUNK_ROWS).min(n);
            let mut rng = seed.rng_at(Column::Marginal, rows.start as u64);
            rows.map(|_| family.sample_row(&RowDraws::next(&mut rng)))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(parts.concat())
}

/// Sample means, unbiased variances and covariances of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMoments {
    pub n: usize,
    pub mean_x: f64,
    pub mean_z: f64,
    pub mean_n: f64,
    pub var_x: f64,
    pub var_z: f64,
    pub var_n: f64,
    pub cov_xn: f64,
    pub cov_zn: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn batch_moments(b: &SampleBatch) -> Result<BatchMoments, SamplingError> {
    let n = b.len();
    if n < 2 {
        return Err(SamplingError::TooFewSamples { n, min: 2 });
    }
    let (mx, mz, mn) = (mean(&b.x), mean(&b.z), mean(&b.noise));
    let mut acc = [0.0f64; 5];
    for i in 0..n {
        let (dx, dz, dn) = (b.x[i] - mx, b.z[i] - mz, b.noise[i] - mn);
        acc[0] += dx * dx;
        acc[1] += dz * dz;
        acc[2] += dn * dn;
        acc[3] += dx * dn;
        acc[4] += dz * dn;
    }
    let d = (n - 1) as f64;
    Ok(BatchMoments {
        n,
        mean_x: mx,
        mean_z: mz,
        mean_n: mn,
        var_x: acc[0] / d,
        var_z: acc[1] / d,
        var_n: acc[2] / d,
        cov_xn: acc[3] / d,
        cov_zn: acc[4] / d,
    })
}

/// Second-order statistics estimated from a batch. A constant interference
/// column gives `ρ_ZN = 0`; a constant input or noise column is an error.
pub fn empirical_stats(b: &SampleBatch) -> Result<SecondOrderStats, SamplingError> {
    let m = batch_moments(b)?;
    if !(m.var_x > 0.0) {
        return Err(SamplingError::DegenerateColumn("x"));
    }
    if !(m.var_n > 0.0) {
        return Err(SamplingError::DegenerateColumn("noise"));
    }
    let rho_xn = m.cov_xn / (m.var_x * m.var_n).sqrt();
    let rho_zn = if m.var_z > 0.0 {
        m.cov_zn / (m.var_z * m.var_n).sqrt()
    } else {
        0.0
    };
    SecondOrderStats::new(m.var_x, m.var_n, rho_xn, rho_zn)
        .map_err(|_| SamplingError::NearlyDegenerate { rho_xn, rho_zn })
}
