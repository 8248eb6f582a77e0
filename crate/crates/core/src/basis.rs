//! B-spline hypothesis spaces on `[0, R]` and the basis Gram matrix in
//! `L2(rho)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explore::ExplorationMeasure;
use crate::operator::bins_within;

/// Nondecreasing knot sequence `r_0 <= ... <= r_m` with `r_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidRange("need at least two knots".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidRange("knots must be nondecreasing".into()));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidRange("first knot must be 0".into()));
        }
        Ok(Self { knots })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    pub fn last(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// B-spline basis of degree `p` over a knot vector; dimension is
/// `m - p` where `m + 1` is the number of knots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub knots: KnotVector,
    pub degree: usize,
}

impl BSplineBasis {
    pub fn new(knots: KnotVector, degree: usize) -> Result<Self> {
        let m = knots.len() - 1;
        if m < degree + 1 {
            return Err(Error::InvalidRange(format!(
                "{} knots cannot support degree {degree}",
                knots.len()
            )));
        }
        Ok(Self { knots, degree })
    }

    pub fn dimension(&self) -> usize {
        self.knots.len() - 1 - self.degree
    }

    /// Cox-de Boor evaluation of basis function `i` at `r`, with the 0/0 := 0
    /// convention for repeated knots. The right endpoint belongs to the last
    /// interval.
    pub fn eval(&self, i: usize, r: f64) -> f64 {
        debug_assert!(i < self.dimension());
        let t = self.knots.as_slice();
        cox_de_boor(t, i, self.degree, r)
    }

    /// Value of `sum_i c_i N_{i,p}(r)`.
    pub fn eval_combination(&self, coeff: &[f64], r: f64) -> f64 {
        debug_assert_eq!(coeff.len(), self.dimension());
        let mut acc = 0.0;
        for (i, c) in coeff.iter().enumerate() {
            if *c != 0.0 {
                let lo = self.knots.as_slice()[i];
                let hi = self.knots.as_slice()[i + self.degree + 1];
                if r >= lo && r <= hi {
                    acc += c * self.eval(i, r);
                }
            }
        }
        acc
    }
}

fn cox_de_boor(t: &[f64], i: usize, p: usize, r: f64) -> f64 {
    let m = t.len() - 1;
    if p == 0 {
        if t[i] <= r && r < t[i + 1] {
            return 1.0;
        }
        // close the last nonempty interval at r = r_m
        if r == t[m] && t[i] < t[i + 1] && t[i + 1] == t[m] {
            return 1.0;
        }
        return 0.0;
    }
    let mut acc = 0.0;
    let d1 = t[i + p] - t[i];
    if d1 > 0.0 {
        acc += (r - t[i]) / d1 * cox_de_boor(t, i, p - 1, r);
    }
    let d2 = t[i + p + 1] - t[i + 1];
    if d2 > 0.0 {
        acc += (t[i + p + 1] - r) / d2 * cox_de_boor(t, i + 1, p - 1, r);
    }
    acc
}

/// A named hypothesis space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisSpace {
    pub basis: BSplineBasis,
    pub label: String,
}

impl HypothesisSpace {
    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }
}

/// Evenly spaced knots on `[0, R]` for a target dimension `n`, with one
/// extra knot at 0 for degree >= 1 so the first basis function rises
/// immediately at the origin. For degree 0 the plain partition is used.
pub fn uniform_space(radius: f64, n: usize, degree: usize) -> Result<HypothesisSpace> {
    if !(radius > 0.0) {
        return Err(Error::InvalidRange(format!("R = {radius}")));
    }
    let m = n + degree; // knots r_0..r_m
    let uniform_count = if degree >= 1 { m } else { m + 1 };
    if uniform_count < 2 {
        return Err(Error::InvalidRange(format!("dimension {n} too small")));
    }
    let h = radius / (uniform_count - 1) as f64;
    let mut knots = Vec::with_capacity(m + 1);
    if degree >= 1 {
        knots.push(0.0);
    }
    for j in 0..uniform_count {
        knots.push(j as f64 * h);
    }
    *knots.last_mut().unwrap() = radius;
    let basis = BSplineBasis::new(KnotVector::new(knots)?, degree)?;
    debug_assert_eq!(basis.dimension(), n);
    Ok(HypothesisSpace {
        basis,
        label: format!("bspline-p{degree}-n{n}"),
    })
}

/// Ladder of hypothesis spaces with dimensions spanning
/// `[0.2, 1] * floor(R / dx)`, by default 8 linearly spaced values.
pub fn make_hypothesis_spaces(
    radius: f64,
    dx: f64,
    degree: usize,
    count: usize,
) -> Result<Vec<HypothesisSpace>> {
    if degree > 3 {
        return Err(Error::InvalidRange(format!("degree {degree} > 3")));
    }
    let kmax = bins_within(radius, dx);
    let n_max = kmax;
    let n_min = ((0.2 * kmax as f64).ceil() as usize).max(degree + 1);
    if (0.2 * kmax as f64) < (degree + 1) as f64 {
        return Err(Error::InvalidRange(format!(
            "floor(R/dx) * 0.2 = {:.1} below degree + 1 = {}",
            0.2 * kmax as f64,
            degree + 1
        )));
    }
    let count = count.max(1);
    let mut dims: Vec<usize> = (0..count)
        .map(|i| {
            let t = if count == 1 {
                1.0
            } else {
                i as f64 / (count - 1) as f64
            };
            (n_min as f64 + t * (n_max - n_min) as f64).round() as usize
        })
        .collect();
    dims.dedup();
    dims.iter()
        .map(|&n| uniform_space(radius, n, degree))
        .collect()
}

pub const DEFAULT_SPACE_COUNT: usize = 8;

/// Gram matrix `B_n(i,j) = sum_k phi_i(r_k) phi_j(r_k) w_k` in `L2(rho)`.
///
/// The normalized bin masses already absorb the mesh factor, so no extra
/// `dx` appears here.
pub fn basis_gram(space: &HypothesisSpace, rho: &ExplorationMeasure) -> DMatrix<f64> {
    let n = space.dimension();
    let k_bins = rho.bins();
    // tabulate basis values once per bin
    let mut table = DMatrix::zeros(k_bins, n);
    for k in 0..k_bins {
        let r = rho.r(k);
        for i in 0..n {
            table[(k, i)] = space.basis.eval(i, r);
        }
    }
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..k_bins {
                let v = table[(k, i)] * table[(k, j)];
                if v != 0.0 {
                    acc += v * rho.weights[k];
                }
            }
            gram[(i, j)] = acc;
            gram[(j, i)] = acc;
        }
    }
    gram
}

/// Evaluate every basis function on the distance bins `r_k = k dx`,
/// returning the `K x n` collocation matrix used by the assembly stage.
pub fn collocation_matrix(space: &HypothesisSpace, k_bins: usize, dx: f64) -> DMatrix<f64> {
    let n = space.dimension();
    let mut phi = DMatrix::zeros(k_bins, n);
    for k in 0..k_bins {
        let r = (k + 1) as f64 * dx;
        for i in 0..n {
            phi[(k, i)] = space.basis.eval(i, r);
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn degree0_indicator() {
        let b = BSplineBasis::new(KnotVector::new(vec![0.0, 1.0, 2.0]).unwrap(), 0).unwrap();
        assert_eq!(b.dimension(), 2);
        assert_eq!(b.eval(0, 0.5), 1.0);
        assert_eq!(b.eval(0, 1.5), 0.0);
        assert_eq!(b.eval(1, 1.5), 1.0);
        // right endpoint closes the last interval
        assert_eq!(b.eval(1, 2.0), 1.0);
        assert_eq!(b.eval(0, 2.0), 0.0);
    }

    #[test]
    fn degree1_hat_peak() {
        let b = BSplineBasis::new(KnotVector::new(vec![0.0, 1.0, 2.0]).unwrap(), 1).unwrap();
        assert_eq!(b.dimension(), 1);
        assert_relative_eq!(b.eval(0, 1.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(b.eval(0, 0.5), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn partition_of_unity_uniform_knots() {
        // degree 2, uniform knots: sum of basis functions is 1 on [r_p, r_{m-p}]
        let knots: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let b = BSplineBasis::new(KnotVector::new(knots).unwrap(), 2).unwrap();
        let (lo, hi) = (2.0, 8.0);
        for s in 0..100 {
            let r = lo + (hi - lo) * (s as f64 + 0.31) / 100.0;
            let sum: f64 = (0..b.dimension()).map(|i| b.eval(i, r)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "r = {r}: sum = {sum}");
        }
    }

    #[test]
    fn extra_knot_at_zero_lifts_first_basis() {
        let space = uniform_space(5.0, 8, 2).unwrap();
        let t = space.basis.knots.as_slice();
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1], 0.0);
        assert!(t[2] > 0.0);
        // nonzero immediately right of the origin
        assert!(space.basis.eval(0, 1e-6) > 0.0);
    }

    #[test]
    fn ladder_dimension_ranges() {
        let spaces = make_hypothesis_spaces(10.0, 1.0, 2, 8).unwrap();
        for s in &spaces {
            let n = s.dimension();
            assert!((2..=10).contains(&n), "n = {n}");
        }
        assert_eq!(spaces.last().unwrap().dimension(), 10);

        let spaces = make_hypothesis_spaces(11.02, 0.0125, 2, 8).unwrap();
        assert_eq!(spaces.last().unwrap().dimension(), 881);
    }

    #[test]
    fn ladder_rejects_too_small_range() {
        assert!(matches!(
            make_hypothesis_spaces(1.0, 0.5, 3, 8),
            Err(Error::InvalidRange(_))
        ));
    }

    #[test]
    fn gram_is_diagonal_for_aligned_degree0_cells() {
        // one cell per bin: knots (0, 1.5dx, 2.5dx, ..., R) so that cell i
        // contains exactly the bin r_{i+1}
        let dx = 0.5;
        let kbins = 6;
        let radius = kbins as f64 * dx;
        let mut knots = vec![0.0];
        for i in 1..kbins {
            knots.push((i as f64 + 0.5) * dx);
        }
        knots.push(radius);
        let basis = BSplineBasis::new(KnotVector::new(knots).unwrap(), 0).unwrap();
        let space = HypothesisSpace {
            basis,
            label: "cells".into(),
        };
        let weights = vec![0.05, 0.2, 0.25, 0.3, 0.1, 0.1];
        let rho = ExplorationMeasure {
            dr: dx,
            weights: weights.clone(),
            truncated_to: radius,
            total_mass: 1.0,
        };
        let gram = basis_gram(&space, &rho);
        for i in 0..kbins {
            for j in 0..kbins {
                let want = if i == j { weights[i] } else { 0.0 };
                assert_relative_eq!(gram[(i, j)], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gram_symmetric_psd() {
        let space = uniform_space(4.0, 9, 2).unwrap();
        let k = 40;
        let rho = ExplorationMeasure {
            dr: 0.1,
            weights: (0..k).map(|i| (i as f64 + 1.0) / (k * (k + 1) / 2) as f64).collect(),
            truncated_to: 4.0,
            total_mass: 1.0,
        };
        let gram = basis_gram(&space, &rho);
        let sym = (&gram - gram.transpose()).abs().max();
        assert_eq!(sym, 0.0);
        let eig = gram.clone().symmetric_eigen();
        let max = eig.eigenvalues.amax();
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12 * max));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn basis_nonnegative_local_unity(degree in 0usize..=3, seed in 0u64..1000) {
            let n = 9usize;
            let space = uniform_space(6.0, n, degree).unwrap();
            let b = &space.basis;
            let t = b.knots.as_slice();
            let m = t.len() - 1;
            let (lo, hi) = (t[degree], t[m - degree]);
            let mut x = seed as f64 * 0.001;
            for step in 0..25 {
                x = (x + 0.137 * (step as f64 + 1.0)) % 1.0;
                let r = 6.0 * x;
                let mut sum = 0.0;
                for i in 0..b.dimension() {
                    let v = b.eval(i, r);
                    prop_assert!(v >= 0.0);
                    // local support
                    if r < t[i] - 1e-14 || r > t[i + degree + 1] + 1e-14 {
                        prop_assert!(v == 0.0, "i={} r={} v={}", i, r, v);
                    }
                    sum += v;
                }
                if r >= lo && r <= hi {
                    prop_assert!((sum - 1.0).abs() < 1e-12, "r={} sum={}", r, sum);
                }
            }
        }
    }
}
