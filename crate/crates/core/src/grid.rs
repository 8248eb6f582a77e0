//! Uniform-grid sampled functions, dataset containers, noise injection and
//! elementary norms/supports.
//!
//! All spatial integrals use the same Riemann convention: weight `dx` on
//! every node. Everything here is immutable value data after construction.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform 1-D grid: nodes `x0 + j*dx` for `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub x0: f64,
    pub dx: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(x0: f64, dx: f64, count: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || !x0.is_finite() {
            return Err(Error::InvalidGrid(format!("dx = {dx}, x0 = {x0}")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("count = {count} < 2")));
        }
        Ok(Self { x0, dx, count })
    }

    /// Symmetric grid on `[-half_width, half_width]` with mesh size `dx`.
    ///
    /// The right endpoint is included when `2*half_width` is an integer
    /// multiple of `dx`, which is the case for all experiment settings.
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        let count = (2.0 * half_width / dx + 0.5).floor() as usize + 1;
        Self::new(-half_width, dx, count)
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |j| self.node(j))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Real values sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::InvalidData(format!(
                "{} values on a grid of {} nodes",
                values.len(),
                grid.count
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite sample value".into()));
        }
        Ok(Self { grid, values })
    }

    /// Sample a scalar function at the grid nodes.
    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }
}

/// One observation pair `(u, f)` on a shared grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataPair {
    pub u: SampledFunction,
    pub f: SampledFunction,
}

impl DataPair {
    pub fn new(u: SampledFunction, f: SampledFunction) -> Result<Self> {
        if u.grid != f.grid {
            return Err(Error::InvalidData("u and f live on different grids".into()));
        }
        Ok(Self { u, f })
    }
}

/// A collection of data pairs sharing one grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub pairs: Vec<DataPair>,
}

impl Dataset {
    pub fn new(pairs: Vec<DataPair>) -> Result<Self> {
        if let Some(first) = pairs.first() {
            let g = first.u.grid;
            if pairs.iter().any(|p| p.u.grid != g) {
                return Err(Error::InvalidData("pairs on mismatched grids".into()));
            }
        }
        Ok(Self { pairs })
    }

    pub fn grid(&self) -> Option<UniformGrid> {
        self.pairs.first().map(|p| p.u.grid)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Noise model: i.i.d. centered Gaussian per mesh point with
/// `sigma = nsr * mean L2 norm of the f_i`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub nsr: f64,
    pub seed: u64,
}

/// Riemann approximation of the L2 norm: `sqrt(sum_j f(x_j)^2 * dx)`.
pub fn l2_norm(f: &SampledFunction) -> f64 {
    let s: f64 = f.values.iter().map(|v| v * v).sum();
    (s * f.grid.dx).sqrt()
}

/// Standard normal draw via Box-Muller on two uniforms.
///
/// Kept explicit (rather than a distribution crate) so the byte stream is a
/// documented function of the ChaCha8 seed.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // gen range (0,1]: avoids ln(0)
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Add i.i.d. Gaussian noise to the f-values of every pair.
///
/// `u` values are left untouched. Deterministic for a fixed seed.
pub fn add_noise(data: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    if spec.nsr < 0.0 || !spec.nsr.is_finite() {
        return Err(Error::InvalidData(format!("nsr = {}", spec.nsr)));
    }
    if spec.nsr == 0.0 || data.is_empty() {
        return Ok(data.clone());
    }
    let mean_norm =
        data.pairs.iter().map(|p| l2_norm(&p.f)).sum::<f64>() / data.pairs.len() as f64;
    let sigma = spec.nsr * mean_norm;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pairs = data
        .pairs
        .iter()
        .map(|p| {
            let values = p
                .f
                .values
                .iter()
                .map(|v| v + sigma * standard_normal(&mut rng))
                .collect();
            DataPair {
                u: p.u.clone(),
                f: SampledFunction {
                    grid: p.f.grid,
                    values,
                },
            }
        })
        .collect();
    Ok(Dataset { pairs })
}

/// Positions of the first and last node with `|f| > threshold`.
pub fn support_bounds(f: &SampledFunction, threshold: f64) -> Result<(f64, f64)> {
    let first = f.values.iter().position(|v| v.abs() > threshold);
    let last = f.values.iter().rposition(|v| v.abs() > threshold);
    match (first, last) {
        (Some(a), Some(b)) => Ok((f.grid.node(a), f.grid.node(b))),
        _ => Err(Error::EmptySupport),
    }
}

/// Serialize a dataset to the JSON interchange format
/// `{x0, dx, count, pairs: [{u: [...], f: [...]}]}`.
pub fn dataset_to_json(data: &Dataset) -> Result<String> {
    #[derive(Serialize)]
    struct PairRepr<'a> {
        u: &'a [f64],
        f: &'a [f64],
    }
    #[derive(Serialize)]
    struct DatasetRepr<'a> {
        x0: f64,
        dx: f64,
        count: usize,
        pairs: Vec<PairRepr<'a>>,
    }
    let grid = data
        .grid()
        .ok_or_else(|| Error::InvalidData("empty dataset has no grid".into()))?;
    let repr = DatasetRepr {
        x0: grid.x0,
        dx: grid.dx,
        count: grid.count,
        pairs: data
            .pairs
            .iter()
            .map(|p| PairRepr {
                u: &p.u.values,
                f: &p.f.values,
            })
            .collect(),
    };
    Ok(serde_json::to_string(&repr)?)
}

/// Parse the JSON interchange format produced by [`dataset_to_json`].
pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    #[derive(Deserialize)]
    struct PairRepr {
        u: Vec<f64>,
        f: Vec<f64>,
    }
    #[derive(Deserialize)]
    struct DatasetRepr {
        x0: f64,
        dx: f64,
        count: usize,
        pairs: Vec<PairRepr>,
    }
    let repr: DatasetRepr = serde_json::from_str(text)?;
    let grid = UniformGrid::new(repr.x0, repr.dx, repr.count)?;
    let pairs = repr
        .pairs
        .into_iter()
        .map(|p| {
            Ok(DataPair::new(
                SampledFunction::new(grid, p.u)?,
                SampledFunction::new(grid, p.f)?,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(pairs)
}
