//! Hyper-parameter selection by the L-curve method: maximize the
//! three-point curvature of the (log data-fit, log penalty) curve over a
//! log-spaced lambda grid.

use nalgebra::DVector;
use serde::Serialize;

use crate::assembly::Triplet;
use crate::error::{Error, Result};
use crate::solve::{GenEig, PathSolver, RegularizerKind, RANK_RTOL};

/// Floor applied before taking logs of the fit or the penalty.
const LOG_CLAMP: f64 = 1e-300;

/// How far below the smallest positive generalized eigenvalue the search
/// grid extends. The spectral range alone cannot express "no
/// regularization needed", which exact-fit data demands.
const GRID_UNDERSHOOT: f64 = 1e-8;

pub const DEFAULT_GRID_SIZE: usize = 60;

/// The evaluated L-curve.
#[derive(Debug, Clone, Serialize)]
pub struct LCurve {
    pub lambdas: Vec<f64>,
    /// `(log E(c_lambda), log R(c_lambda))` per grid point.
    pub points: Vec<(f64, f64)>,
    /// Signed three-point curvature; endpoints carry 0.
    pub curvature: Vec<f64>,
    /// True when no positive-curvature corner existed and `lambda_min`
    /// was returned instead.
    pub degenerate: bool,
}

impl LCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,log_fit,log_penalty,curvature\n");
        for i in 0..self.lambdas.len() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.lambdas[i], self.points[i].0, self.points[i].1, self.curvature[i]
            ));
        }
        out
    }
}

/// Spectral lambda range `(max(smallest positive eigenvalue,
/// rtol * lambda_max), lambda_max)`.
pub fn lambda_range(e: &GenEig) -> Result<(f64, f64)> {
    let lmax = e.eigenvalues.amax();
    let smallest_pos = e
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&l| l > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(lmax > 0.0) || !smallest_pos.is_finite() {
        return Err(Error::NoPositiveSpectrum);
    }
    Ok((smallest_pos.max(RANK_RTOL * lmax), lmax))
}

/// Signed curvature through three points: reciprocal circumradius with the
/// sign of the turn (positive for the L-corner orientation when points are
/// ordered by increasing lambda). Collinear points give 0.
pub fn curvature_three_point(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64)) -> f64 {
    let (ax, ay) = (p2.0 - p1.0, p2.1 - p1.1);
    let (bx, by) = (p3.0 - p2.0, p3.1 - p2.1);
    let cross = ax * by - ay * bx;
    let la = (ax * ax + ay * ay).sqrt();
    let lb = (bx * bx + by * by).sqrt();
    let lc = ((p3.0 - p1.0).powi(2) + (p3.1 - p1.1).powi(2)).sqrt();
    let denom = la * lb * lc;
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * cross / denom
}

/// Evaluate the regularization path on a log-spaced grid and return the
/// lambda maximizing the curvature (interior grid points only; ties break
/// toward larger lambda).
///
/// The grid spans from `GRID_UNDERSHOOT` times the smallest positive
/// generalized eigenvalue (floored at the rank cutoff) up to the largest
/// eigenvalue; exact-fit data pushes the corner to the very small end,
/// which the purely spectral range cannot reach.
pub fn select_lambda(
    t: &Triplet,
    kind: RegularizerKind,
    e: &GenEig,
    grid_size: usize,
) -> Result<(f64, LCurve)> {
    let grid_size = grid_size.max(5);
    let (spec_min, spec_max) = lambda_range(e)?;
    let lo = (spec_min * GRID_UNDERSHOOT).max(RANK_RTOL * spec_max);
    let hi = spec_max;

    let solver = PathSolver::new(t, kind, e);
    let (lambdas, points): (Vec<f64>, Vec<(f64, f64)>) = if lo >= hi {
        // degenerate spectral range: single point
        let (_, fit, pen) = solver.solve(hi);
        (
            vec![hi],
            vec![(fit.max(LOG_CLAMP).ln(), pen.max(LOG_CLAMP).ln())],
        )
    } else {
        let log_lo = lo.ln();
        let log_hi = hi.ln();
        let mut ls = Vec::with_capacity(grid_size);
        let mut ps = Vec::with_capacity(grid_size);
        for i in 0..grid_size {
            let t01 = i as f64 / (grid_size - 1) as f64;
            let lam = (log_lo + t01 * (log_hi - log_lo)).exp();
            let (_, fit, pen) = solver.solve(lam);
            ls.push(lam);
            ps.push((fit.max(LOG_CLAMP).ln(), pen.max(LOG_CLAMP).ln()));
        }
        (ls, ps)
    };

    let n = lambdas.len();
    let mut curvature = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        curvature[i] = curvature_three_point(points[i - 1], points[i], points[i + 1]);
    }

    let mut best: Option<usize> = None;
    for i in 1..n.saturating_sub(1) {
        if curvature[i] > 0.0 && best.map_or(true, |b| curvature[i] >= curvature[b]) {
            best = Some(i);
        }
    }
    let (lambda0, degenerate) = match best {
        Some(i) => (lambdas[i], false),
        None => (lambdas[0], true),
    };
    Ok((
        lambda0,
        LCurve {
            lambdas,
            points,
            curvature,
            degenerate,
        },
    ))
}

/// Solve at the selected lambda, returning coefficients and the data-fit
/// loss.
pub fn solve_at(
    t: &Triplet,
    kind: RegularizerKind,
    e: &GenEig,
    lambda: f64,
) -> (DVector<f64>, f64) {
    let solver = PathSolver::new(t, kind, e);
    let (c, fit, _) = solver.solve(lambda);
    (c, fit)
}
