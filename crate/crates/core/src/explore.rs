//! Exploration measure on pairwise distances and the data-adaptive kernel
//! support estimate (step 1 of the learning pipeline).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{support_bounds, Dataset};
use crate::operator::bins_within;

/// Discrete probability measure on distance bins `r_k = k dr`, `k = 1..=K`.
///
/// `weights[k-1]` is the normalized mass at `r_k`. `total_mass` keeps the
/// unnormalized sum of `|u_i(x_j) - u_i(x_k)|` over ordered pairs so scale
/// covariance stays checkable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplorationMeasure {
    pub dr: f64,
    pub weights: Vec<f64>,
    pub truncated_to: f64,
    pub total_mass: f64,
}

impl ExplorationMeasure {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn r(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.dr
    }

    /// Largest bin radius carrying positive mass.
    pub fn support_radius(&self) -> f64 {
        self.weights
            .iter()
            .rposition(|w| *w > 0.0)
            .map(|k| self.r(k))
            .unwrap_or(0.0)
    }

    /// Restrict to `[0, radius]` and renormalize to a probability measure.
    pub fn truncated(&self, radius: f64) -> Result<ExplorationMeasure> {
        let keep = bins_within(radius, self.dr).min(self.bins());
        if keep == 0 {
            return Err(Error::DegenerateSupport);
        }
        let mut weights: Vec<f64> = self.weights[..keep].to_vec();
        let mass: f64 = weights.iter().sum();
        if mass <= 0.0 {
            return Err(Error::DegenerateSupport);
        }
        for w in &mut weights {
            *w /= mass;
        }
        Ok(ExplorationMeasure {
            dr: self.dr,
            weights,
            truncated_to: radius,
            total_mass: self.total_mass * mass,
        })
    }

    /// CSV export with columns `(r_k, weight)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,weight\n");
        for (k, w) in self.weights.iter().enumerate() {
            out.push_str(&format!("{:.12e},{:.12e}\n", self.r(k), w));
        }
        out
    }
}

/// Data-adaptive kernel support estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportEstimate {
    /// `R = 1.1 min(R_rho, max pair range)`.
    pub radius: f64,
    /// Maximum of the support of the exploration measure.
    pub rho_max: f64,
    /// Per-pair `(|L^f - L^u|, |R^f - R^u|)`.
    pub per_pair_ranges: Vec<(f64, f64)>,
}

/// Build the exploration measure from all ordered node pairs within
/// `r0cap`, weighting bin `|x_j - x_k|` by `|u_i(x_j) - u_i(x_k)|`.
pub fn exploration_measure(data: &Dataset, r0cap: f64) -> Result<ExplorationMeasure> {
    let grid = data
        .grid()
        .ok_or_else(|| Error::DegenerateData("empty dataset".into()))?;
    if !(r0cap > 0.0) {
        return Err(Error::InvalidData(format!("r0cap = {r0cap}")));
    }
    let kmax = bins_within(r0cap, grid.dx).min(grid.count - 1);
    if kmax == 0 {
        return Err(Error::DegenerateData("r0cap below one mesh cell".into()));
    }

    // per-pair partial histograms, merged in pair order
    let partials: Vec<Vec<f64>> = data
        .pairs
        .par_iter()
        .map(|p| {
            let u = &p.u.values;
            let n = u.len();
            let mut h = vec![0.0f64; kmax];
            for (k, slot) in h.iter_mut().enumerate() {
                let off = k + 1;
                let mut acc = 0.0;
                for j in 0..n - off {
                    acc += (u[j] - u[j + off]).abs();
                }
                // ordered pairs double-count each unordered pair
                *slot = 2.0 * acc;
            }
            h
        })
        .collect();

    let mut weights = vec![0.0f64; kmax];
    for h in &partials {
        for (w, v) in weights.iter_mut().zip(h) {
            *w += v;
        }
    }
    let total_mass: f64 = weights.iter().sum();
    if total_mass <= 0.0 {
        return Err(Error::DegenerateData(
            "all u_i constant: no pair carries weight".into(),
        ));
    }
    for w in &mut weights {
        *w /= total_mass;
    }
    Ok(ExplorationMeasure {
        dr: grid.dx,
        weights,
        truncated_to: kmax as f64 * grid.dx,
        total_mass,
    })
}

/// Estimate the kernel support `R = 1.1 min(R_rho, max_i max(|L^f_i - L^u_i|,
/// |R^f_i - R^u_i|))` from thresholded supports of the data.
///
/// Callers should then restrict the measure via
/// [`ExplorationMeasure::truncated`].
pub fn estimate_support(
    data: &Dataset,
    rho: &ExplorationMeasure,
    threshold: f64,
) -> Result<SupportEstimate> {
    if data.is_empty() {
        return Err(Error::DegenerateData("empty dataset".into()));
    }
    let rho_max = rho.support_radius();
    let mut per_pair_ranges = Vec::with_capacity(data.len());
    let mut pair_range = 0.0f64;
    for p in &data.pairs {
        let (lu, ru) = support_bounds(&p.u, threshold)?;
        let (lf, rf) = support_bounds(&p.f, threshold)?;
        let left = (lf - lu).abs();
        let right = (rf - ru).abs();
        per_pair_ranges.push((left, right));
        pair_range = pair_range.max(left.max(right));
    }
    let radius = 1.1 * rho_max.min(pair_range);
    if radius <= 0.0 {
        return Err(Error::DegenerateSupport);
    }
    Ok(SupportEstimate {
        radius,
        rho_max,
        per_pair_ranges,
    })
}

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DataPair, SampledFunction, UniformGrid};
    use approx::assert_relative_eq;

    fn pair(grid: UniformGrid, u: Vec<f64>, f: Vec<f64>) -> DataPair {
        DataPair::new(
            SampledFunction::new(grid, u).unwrap(),
            SampledFunction::new(grid, f).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_u_is_degenerate() {
        let g = UniformGrid::new(0.0, 1.0, 4).unwrap();
        let d = Dataset::new(vec![pair(g, vec![2.0; 4], vec![0.0; 4])]).unwrap();
        assert!(matches!(
            exploration_measure(&d, 2.0),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn hand_enumerated_weights() {
        // u = (0,1,0) on dx=1, r0cap=2: ordered pairs at distance 1 carry
        // total mass 4, distance 2 carries 0.
        let g = UniformGrid::new(0.0, 1.0, 3).unwrap();
        let d = Dataset::new(vec![pair(g, vec![0.0, 1.0, 0.0], vec![0.0; 3])]).unwrap();
        let m = exploration_measure(&d, 2.0).unwrap();
        assert_eq!(m.bins(), 2);
        assert_relative_eq!(m.total_mass, 4.0, max_relative = 1e-15);
        assert_relative_eq!(m.weights[0], 1.0, max_relative = 1e-15);
        assert_eq!(m.weights[1], 0.0);
    }

    /// Brute-force oracle: enumerate every ordered pair directly from the
    /// definition, independent of the binned implementation.
    fn brute_force_measure(d: &Dataset, r0cap: f64) -> Vec<f64> {
        let g = d.grid().unwrap();
        let kmax = bins_within(r0cap, g.dx).min(g.count - 1);
        let mut mass = vec![0.0f64; kmax];
        for p in &d.pairs {
            for j in 0..g.count {
                for k in 0..g.count {
                    if j == k {
                        continue;
                    }
                    let bin = (j as i64 - k as i64).unsigned_abs() as usize;
                    if bin <= kmax {
                        mass[bin - 1] += (p.u.values[j] - p.u.values[k]).abs();
                    }
                }
            }
        }
        let t: f64 = mass.iter().sum();
        mass.iter().map(|m| m / t).collect()
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let g = UniformGrid::symmetric(8.0, 0.25).unwrap();
        let pi = std::f64::consts::PI;
        let u1 = SampledFunction::from_fn(g, |x| if x.abs() <= pi { x.sin() } else { 0.0 });
        let u2 = SampledFunction::from_fn(g, |x| if x.abs() <= pi { x.cos() } else { 0.0 });
        let z = SampledFunction::from_fn(g, |_| 0.0);
        let d = Dataset::new(vec![
            DataPair::new(u1, z.clone()).unwrap(),
            DataPair::new(u2, z).unwrap(),
        ])
        .unwrap();
        let m = exploration_measure(&d, 6.0).unwrap();
        let oracle = brute_force_measure(&d, 6.0);
        assert_eq!(m.bins(), oracle.len());
        for (a, b) in m.weights.iter().zip(&oracle) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn truncated_u_explores_beyond_its_own_width() {
        // pairs with one point inside [-pi,pi] and one outside carry weight,
        // so the measure keeps mass at distances well beyond 2 pi
        let g = UniformGrid::symmetric(40.0, 0.1).unwrap();
        let pi = std::f64::consts::PI;
        let u = SampledFunction::from_fn(g, |x| if x.abs() <= pi { x.sin() } else { 0.0 });
        let z = SampledFunction::from_fn(g, |_| 0.0);
        let d = Dataset::new(vec![DataPair::new(u, z).unwrap()]).unwrap();
        let m = exploration_measure(&d, 40.0).unwrap();
        let k10 = bins_within(10.0, 0.1) - 1;
        assert!(m.weights[k10] > 0.0, "mass at r = 10 must be positive");
        let oracle = brute_force_measure(&d, 40.0);
        assert_relative_eq!(m.weights[k10], oracle[k10], max_relative = 1e-12);
    }

    #[test]
    fn normalization_survives_truncation() {
        let g = UniformGrid::symmetric(10.0, 0.125).unwrap();
        let u = SampledFunction::from_fn(g, |x| (-x * x).exp());
        let z = SampledFunction::from_fn(g, |_| 0.0);
        let d = Dataset::new(vec![DataPair::new(u, z).unwrap()]).unwrap();
        let m = exploration_measure(&d, 10.0).unwrap();
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let t = m.truncated(3.0).unwrap();
        assert!((t.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.bins() == bins_within(3.0, 0.125));
    }

    #[test]
    fn permutation_invariance() {
        let g = UniformGrid::symmetric(5.0, 0.5).unwrap();
        let a = SampledFunction::from_fn(g, |x| x.sin());
        let b = SampledFunction::from_fn(g, |x| x * x);
        let z = SampledFunction::from_fn(g, |_| 0.0);
        let d1 = Dataset::new(vec![
            DataPair::new(a.clone(), z.clone()).unwrap(),
            DataPair::new(b.clone(), z.clone()).unwrap(),
        ])
        .unwrap();
        let d2 = Dataset::new(vec![
            DataPair::new(b, z.clone()).unwrap(),
            DataPair::new(a, z).unwrap(),
        ])
        .unwrap();
        let m1 = exploration_measure(&d1, 5.0).unwrap();
        let m2 = exploration_measure(&d2, 5.0).unwrap();
        assert_eq!(m1.weights, m2.weights);
    }

    #[test]
    fn scale_covariance() {
        let g = UniformGrid::symmetric(5.0, 0.5).unwrap();
        let u = SampledFunction::from_fn(g, |x| x.sin());
        let cu = SampledFunction::from_fn(g, |x| -3.0 * x.sin());
        let z = SampledFunction::from_fn(g, |_| 0.0);
        let d1 = Dataset::new(vec![DataPair::new(u, z.clone()).unwrap()]).unwrap();
        let d2 = Dataset::new(vec![DataPair::new(cu, z).unwrap()]).unwrap();
        let m1 = exploration_measure(&d1, 5.0).unwrap();
        let m2 = exploration_measure(&d2, 5.0).unwrap();
        assert_relative_eq!(m2.total_mass, 3.0 * m1.total_mass, max_relative = 1e-12);
        for (a, b) in m1.weights.iter().zip(&m2.weights) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-16);
        }
    }

    #[test]
    fn identical_supports_are_degenerate() {
        let g = UniformGrid::symmetric(5.0, 0.1).unwrap();
        let u = SampledFunction::from_fn(g, |x| (-x * x).exp());
        let d = Dataset::new(vec![DataPair::new(u.clone(), u).unwrap()]).unwrap();
        let m = exploration_measure(&d, 5.0).unwrap();
        let r = estimate_support(&d, &m, 1e-8);
        assert!(matches!(r, Err(Error::DegenerateSupport)));
    }

    #[test]
    fn support_estimate_indicator_shift() {
        // u supported on [-1,1], f supported on [-3,3]: pair range = 2,
        // rho_max is larger, so R = 1.1 * 2.
        let g = UniformGrid::symmetric(10.0, 0.1).unwrap();
        let u = SampledFunction::from_fn(g, |x| if x.abs() <= 1.0 { 1.0 + x } else { 0.0 });
        let f = SampledFunction::from_fn(g, |x| if x.abs() <= 3.0 { 1.0 } else { 0.0 });
        let d = Dataset::new(vec![DataPair::new(u, f).unwrap()]).unwrap();
        let m = exploration_measure(&d, 10.0).unwrap();
        let s = estimate_support(&d, &m, 1e-8).unwrap();
        assert_relative_eq!(s.radius, 1.1 * 2.0, max_relative = 1e-12);
    }
}
