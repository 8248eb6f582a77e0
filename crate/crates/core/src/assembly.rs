//! One-pass extraction of the regression data `{G(r_k,r_l), g^f(r_k), rho}`
//! and construction of the triplet `(A_n, b_n, B_n)` for any hypothesis
//! space.
//!
//! Shifted differences use zero-extension of `u` outside the grid, the same
//! convention as [`crate::operator::apply_riemann_mode`] with
//! [`crate::operator::BoundaryMode::ZeroExtension`]; the bilinear-form
//! oracle test pins the two to each other.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{basis_gram, collocation_matrix, HypothesisSpace};
use crate::error::{Error, Result};
use crate::explore::ExplorationMeasure;
use crate::grid::{l2_norm, Dataset};

/// Everything the solve stage needs, extracted from the data in one pass.
#[derive(Debug, Clone)]
pub struct RegressionData {
    /// Distance bins `r_k = k dx`, `k = 1..=K`.
    pub r: Vec<f64>,
    /// `G(r_k, r_l)`, symmetric positive semi-definite.
    pub g: DMatrix<f64>,
    /// `g^f(r_k)`.
    pub gf: DVector<f64>,
    /// Exploration measure truncated to `[0, K dx]`.
    pub rho: ExplorationMeasure,
    /// Mesh size of the underlying grid.
    pub dx: f64,
    /// Data constant `(1/N) sum_i ||f_i||^2`.
    pub cf: f64,
}

/// Normal matrix, right-hand vector, basis Gram matrix and data constant
/// for one hypothesis space.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub gram: DMatrix<f64>,
    pub cf: f64,
}

/// Relative condition threshold for the basis-rank check.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Shifted-difference matrix `D(j,k) = u(x_{j+k}) + u(x_{j-k}) - 2 u(x_j)`
/// with zero-extension outside the grid.
fn difference_matrix(u: &[f64], k_bins: usize) -> DMatrix<f64> {
    let n = u.len();
    let mut d = DMatrix::zeros(n, k_bins);
    for k in 1..=k_bins {
        for j in 0..n {
            let up = if j + k < n { u[j + k] } else { 0.0 };
            let um = if j >= k { u[j - k] } else { 0.0 };
            d[(j, k - 1)] = up + um - 2.0 * u[j];
        }
    }
    d
}

/// `G(k,l) = (1/N) sum_i sum_j D_i(j,k) D_i(j,l) dx`.
pub fn compute_g(data: &Dataset, k_bins: usize) -> Result<DMatrix<f64>> {
    let grid = data
        .grid()
        .ok_or_else(|| Error::DegenerateData("empty dataset".into()))?;
    let n = data.len() as f64;
    let partials: Vec<DMatrix<f64>> = data
        .pairs
        .par_iter()
        .map(|p| {
            let d = difference_matrix(&p.u.values, k_bins);
            let mut g = DMatrix::zeros(k_bins, k_bins);
            g.gemm_tr(1.0, &d, &d, 0.0);
            g
        })
        .collect();
    let mut g = DMatrix::zeros(k_bins, k_bins);
    for p in partials {
        g += p;
    }
    g *= grid.dx / n;
    Ok(g)
}

/// `g^f(k) = (1/N) sum_i sum_j D_i(j,k) f_i(x_j) dx`.
pub fn compute_gf(data: &Dataset, k_bins: usize) -> Result<DVector<f64>> {
    let grid = data
        .grid()
        .ok_or_else(|| Error::DegenerateData("empty dataset".into()))?;
    let n = data.len() as f64;
    let partials: Vec<DVector<f64>> = data
        .pairs
        .par_iter()
        .map(|p| {
            let d = difference_matrix(&p.u.values, k_bins);
            let f = DVector::from_column_slice(&p.f.values);
            d.transpose() * f
        })
        .collect();
    let mut gf = DVector::zeros(k_bins);
    for p in partials {
        gf += p;
    }
    gf *= grid.dx / n;
    Ok(gf)
}

/// One-pass extraction of the regression data for support radius `radius`.
///
/// `rho` is the full-range exploration measure; it is truncated to the bin
/// range here.
pub fn compute_regression_data(
    data: &Dataset,
    rho: &ExplorationMeasure,
    radius: f64,
) -> Result<RegressionData> {
    let grid = data
        .grid()
        .ok_or_else(|| Error::DegenerateData("empty dataset".into()))?;
    let dx = grid.dx;
    let k_bins = crate::operator::bins_within(radius, dx);
    if k_bins == 0 {
        return Err(Error::DegenerateSupport);
    }
    let g = compute_g(data, k_bins)?;
    let gf = compute_gf(data, k_bins)?;
    let rho = rho.truncated(k_bins as f64 * dx)?;
    let cf = data
        .pairs
        .iter()
        .map(|p| {
            let n = l2_norm(&p.f);
            n * n
        })
        .sum::<f64>()
        / data.len() as f64;
    Ok(RegressionData {
        r: (1..=k_bins).map(|k| k as f64 * dx).collect(),
        g,
        gf,
        rho,
        dx,
        cf,
    })
}

/// Assemble `(A, b, B)` for a hypothesis space:
/// `A = Phi^T G Phi dx^2`, `b = Phi^T g^f dx`, `B` the Gram matrix in
/// `L2(rho)`. Fails with `SingularBasis` when `B` flunks the rank check.
pub fn assemble_triplet(reg: &RegressionData, space: &HypothesisSpace) -> Result<Triplet> {
    let k_bins = reg.r.len();
    let phi = collocation_matrix(space, k_bins, reg.dx);
    let gram = basis_gram(space, &reg.rho);

    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || max / min > GRAM_CONDITION_LIMIT {
        return Err(Error::SingularBasis {
            cond: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }

    let gphi = &reg.g * &phi;
    let mut a = DMatrix::zeros(space.dimension(), space.dimension());
    a.gemm_tr(reg.dx * reg.dx, &phi, &gphi, 0.0);
    // enforce exact symmetry against rounding in the two gemms
    let at = a.transpose();
    a = (a + at) * 0.5;
    let b = phi.transpose() * &reg.gf * reg.dx;
    Ok(Triplet {
        a,
        b,
        gram,
        cf: reg.cf,
    })
}

/// Quadratic loss `E(c) = c^T A c - 2 c^T b + C_f`.
pub fn loss(t: &Triplet, c: &DVector<f64>) -> f64 {
    (c.transpose() * &t.a * c)[(0, 0)] - 2.0 * c.dot(&t.b) + t.cf
}
