//! Least squares with the three Tikhonov regularizers (l2, L2(rho) and the
//! data-adaptive RKHS norm), the generalized eigendecomposition behind the
//! RKHS norm, and spectral identifiability diagnostics.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::Triplet;
use crate::basis::HypothesisSpace;
use crate::error::{Error, Result};
use crate::explore::ExplorationMeasure;
use crate::operator::RadialKernel;

/// Relative cutoff below which generalized eigenvalues count as zero.
pub const RANK_RTOL: f64 = 1e-12;

/// Generalized eigendecomposition of the pencil `(A, B)` with
/// `V^T B V = I` and eigenvalues sorted nonincreasing (clipped at zero).
#[derive(Debug, Clone)]
pub struct GenEig {
    pub eigenvalues: DVector<f64>,
    pub vectors: DMatrix<f64>,
    /// The basis Gram matrix `B`, kept so `V^{-1} = V^T B` is available.
    pub gram: DMatrix<f64>,
}

/// Which Tikhonov penalty multiplies lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularizerKind {
    /// `R(c) = sum c_i^2`
    #[serde(rename = "l2")]
    L2Small,
    /// `R(c) = c^T B c`
    #[serde(rename = "L2")]
    L2Rho,
    /// `R(c) = c^T B_rkhs c`
    #[serde(rename = "rkhs")]
    Rkhs,
}

impl RegularizerKind {
    pub fn label(&self) -> &'static str {
        match self {
            RegularizerKind::L2Small => "l2",
            RegularizerKind::L2Rho => "L2",
            RegularizerKind::Rkhs => "rkhs",
        }
    }

    pub const ALL: [RegularizerKind; 3] = [
        RegularizerKind::L2Small,
        RegularizerKind::L2Rho,
        RegularizerKind::Rkhs,
    ];
}

/// Solve `A V = B V Lambda` by symmetric-definite reduction: factor
/// `B = L L^T`, eigendecompose `L^{-1} A L^{-T}`, map back.
pub fn gen_eig(t: &Triplet) -> Result<GenEig> {
    let chol = Cholesky::new(t.gram.clone()).ok_or(Error::FactorizationFailure)?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let mut c = t.a.clone();
    l.solve_lower_triangular_mut(&mut c);
    c.transpose_mut();
    l.solve_lower_triangular_mut(&mut c);
    // enforce symmetry before the symmetric eigensolver
    let ct = c.transpose();
    let c = (c + ct) * 0.5;
    let eig = c.symmetric_eigen();

    let n = t.a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());

    let mut values = DVector::zeros(n);
    let mut w = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        values[col] = eig.eigenvalues[src].max(0.0);
        w.set_column(col, &eig.eigenvectors.column(src));
    }
    // V = L^{-T} W
    let mut v = w;
    l.transpose().solve_upper_triangular_mut(&mut v);
    Ok(GenEig {
        eigenvalues: values,
        vectors: v,
        gram: t.gram.clone(),
    })
}

impl GenEig {
    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Coordinates of `c` in the B-orthonormal eigenbasis: `V^{-1} c = V^T B c`.
    pub fn coordinates(&self, c: &DVector<f64>) -> DVector<f64> {
        self.vectors.transpose() * (&self.gram * c)
    }
}

/// RKHS norm matrix `B_rkhs = (V Lambda V^T)^+` computed through the
/// B-orthogonality identity `V^{-1} = V^T B`, so
/// `B_rkhs = B V Lambda^+ V^T B`.
pub fn rkhs_norm_matrix(e: &GenEig) -> DMatrix<f64> {
    let n = e.dimension();
    let lmax = e.eigenvalues.amax();
    let bv = &e.gram * &e.vectors;
    let mut scaled = bv.clone();
    for j in 0..n {
        let lam = e.eigenvalues[j];
        let inv = if lam > RANK_RTOL * lmax { 1.0 / lam } else { 0.0 };
        scaled.column_mut(j).scale_mut(inv);
    }
    let mut out = DMatrix::zeros(n, n);
    out.gemm(1.0, &scaled, &bv.transpose(), 0.0);
    let ot = out.transpose();
    (out + ot) * 0.5
}

/// Number of eigenvalues above `rtol * max` plus the retained spectrum.
pub fn fsoi_spectrum(e: &GenEig, rtol: f64) -> (usize, Vec<f64>) {
    let lmax = e.eigenvalues.amax();
    let kept: Vec<f64> = e
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&l| l > rtol * lmax && l > 0.0)
        .collect();
    (kept.len(), kept)
}

/// Minimize `c^T (A + lambda * B_reg) c - 2 c^T b` by Cholesky, falling
/// back to a minimum-norm pseudo-inverse solve via symmetric
/// eigendecomposition when the shifted matrix is singular.
pub fn solve_regularized(
    t: &Triplet,
    kind: RegularizerKind,
    lambda: f64,
    e: &GenEig,
) -> Result<DVector<f64>> {
    let n = t.a.nrows();
    let mut m = t.a.clone();
    match kind {
        RegularizerKind::L2Small => {
            for i in 0..n {
                m[(i, i)] += lambda;
            }
        }
        RegularizerKind::L2Rho => m += t.gram.scale(lambda),
        RegularizerKind::Rkhs => m += rkhs_norm_matrix(e).scale(lambda),
    }
    if lambda > 0.0 {
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(chol.solve(&t.b));
        }
    }
    // pseudo-inverse solve
    let eig = m.symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let qtb = eig.eigenvectors.transpose() * &t.b;
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let lam = eig.eigenvalues[i];
        if lam.abs() > RANK_RTOL * lmax {
            y[i] = qtb[i] / lam;
        }
    }
    Ok(&eig.eigenvectors * y)
}

/// Fast solver for many lambdas on a fixed triplet, diagonalizing once.
///
/// In the B-orthonormal eigenbasis the three penalties act diagonally
/// (`l2` uses the eigenbasis of `A` itself), so each lambda costs one
/// matrix-vector product.
pub struct PathSolver {
    kind: RegularizerKind,
    // for L2Rho / Rkhs: generalized eigen data
    lam: DVector<f64>,
    v: DMatrix<f64>,
    vtb: DVector<f64>,
    positive: Vec<bool>,
    // for L2Small: eigen data of A
    qa: Option<(DVector<f64>, DMatrix<f64>, DVector<f64>)>,
    pub cf: f64,
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
}

impl PathSolver {
    pub fn new(t: &Triplet, kind: RegularizerKind, e: &GenEig) -> Self {
        let lmax = e.eigenvalues.amax();
        let positive = e
            .eigenvalues
            .iter()
            .map(|&l| l > RANK_RTOL * lmax)
            .collect();
        let vtb = e.vectors.transpose() * &t.b;
        let qa = if kind == RegularizerKind::L2Small {
            let eig = t.a.clone().symmetric_eigen();
            let qtb = eig.eigenvectors.transpose() * &t.b;
            Some((eig.eigenvalues.map(|l| l.max(0.0)), eig.eigenvectors, qtb))
        } else {
            None
        };
        Self {
            kind,
            lam: e.eigenvalues.clone(),
            v: e.vectors.clone(),
            vtb,
            positive,
            qa,
            cf: t.cf,
            a: t.a.clone(),
            b: t.b.clone(),
            gram: t.gram.clone(),
        }
    }

    /// Coefficients, data-fit loss `E(c)` and penalty `R(c)` at `lambda`.
    pub fn solve(&self, lambda: f64) -> (DVector<f64>, f64, f64) {
        let n = self.lam.len();
        let (c, penalty) = match self.kind {
            RegularizerKind::L2Small => {
                let (ma, qa, qtb) = self.qa.as_ref().unwrap();
                let mut y = DVector::zeros(n);
                let mmax = ma.amax();
                for i in 0..n {
                    let d = ma[i] + lambda;
                    if d > RANK_RTOL * mmax {
                        y[i] = qtb[i] / d;
                    }
                }
                let c = qa * y;
                let r = c.dot(&c);
                (c, r)
            }
            RegularizerKind::L2Rho => {
                let mut y = DVector::zeros(n);
                for i in 0..n {
                    y[i] = self.vtb[i] / (self.lam[i] + lambda);
                }
                let r = y.dot(&y);
                (&self.v * y, r)
            }
            RegularizerKind::Rkhs => {
                let mut y = DVector::zeros(n);
                let mut r = 0.0;
                for i in 0..n {
                    if self.positive[i] {
                        let li = self.lam[i];
                        y[i] = self.vtb[i] / (li + lambda / li);
                        r += y[i] * y[i] / li;
                    }
                }
                (&self.v * y, r)
            }
        };
        let fit = (c.transpose() * &self.a * &c)[(0, 0)] - 2.0 * c.dot(&self.b) + self.cf;
        (c, fit, penalty)
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

/// A fitted kernel: spline space, coefficients and solve diagnostics.
#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub space: HypothesisSpace,
    pub coefficients: DVector<f64>,
    pub lambda: f64,
    pub loss: f64,
    pub regularizer: RegularizerKind,
    /// Generalized eigenvalues of the winning space, for diagnostics.
    pub spectrum: Vec<f64>,
}

impl KernelEstimate {
    pub fn evaluate(&self, r: f64) -> f64 {
        let coeff: Vec<f64> = self.coefficients.iter().cloned().collect();
        self.space.basis.eval_combination(&coeff, r)
    }

    pub fn support_radius(&self) -> f64 {
        self.space.basis.knots.last()
    }

    /// View the estimate as a radial kernel.
    pub fn as_kernel(&self) -> RadialKernel {
        let space = self.space.clone();
        let coeff: Vec<f64> = self.coefficients.iter().cloned().collect();
        RadialKernel::new(self.support_radius(), vec![], move |r| {
            space.basis.eval_combination(&coeff, r)
        })
    }

    /// JSON export `{knots, degree, coefficients, lambda, regularizer,
    /// loss, eigenvalues}`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Repr<'a> {
            knots: &'a [f64],
            degree: usize,
            coefficients: Vec<f64>,
            lambda: f64,
            regularizer: &'static str,
            loss: f64,
            eigenvalues: &'a [f64],
        }
        Ok(serde_json::to_string_pretty(&Repr {
            knots: self.space.basis.knots.as_slice(),
            degree: self.space.basis.degree,
            coefficients: self.coefficients.iter().cloned().collect(),
            lambda: self.lambda,
            regularizer: self.regularizer.label(),
            loss: self.loss,
            eigenvalues: &self.spectrum,
        })?)
    }
}

/// Discrete Riesz representative of the data functional, for diagnostics
/// only: `gf(k) / w_k` on bins with positive mass.
#[derive(Debug, Clone)]
pub struct RieszData {
    pub values: Vec<Option<f64>>,
}

pub fn riesz_representative(gf: &DVector<f64>, rho: &ExplorationMeasure) -> RieszData {
    let values = gf
        .iter()
        .zip(&rho.weights)
        .map(|(g, w)| if *w > 0.0 { Some(g / w) } else { None })
        .collect();
    RieszData { values }
}

/// Relative `L2(rho)` distance between an estimate and the true kernel on
/// the measure's bins.
pub fn relative_l2rho_error(
    est: &KernelEstimate,
    truth: &RadialKernel,
    rho: &ExplorationMeasure,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..rho.bins() {
        let r = rho.r(k);
        let w = rho.weights[k];
        if w == 0.0 {
            continue;
        }
        let t = truth.evaluate(r);
        let d = est.evaluate(r) - t;
        num += d * d * w;
        den += t * t * w;
    }
    if den <= 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok((num / den).sqrt())
}
