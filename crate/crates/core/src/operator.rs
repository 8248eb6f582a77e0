//! The forward nonlocal operator at two accuracies (grid Riemann sum for the
//! learning stage, adaptive quadrature for ground-truth generation) and the
//! three synthetic benchmark kernels.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SampledFunction;
use crate::quad;

/// Radial interaction kernel `phi(r)`, zero beyond `support_radius`.
#[derive(Clone)]
pub struct RadialKernel {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support_radius: f64,
    /// Radii where `phi` is discontinuous or non-smooth; quadrature panels
    /// are split at `x +- r` for each of these.
    pub breakpoints: Vec<f64>,
}

impl RadialKernel {
    pub fn new(
        support_radius: f64,
        breakpoints: Vec<f64>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            support_radius,
            breakpoints,
        }
    }

    #[inline]
    pub fn evaluate(&self, r: f64) -> f64 {
        if r > self.support_radius {
            0.0
        } else {
            (self.eval)(r)
        }
    }
}

impl std::fmt::Debug for RadialKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialKernel")
            .field("support_radius", &self.support_radius)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

/// The three ground-truth kernels of the synthetic benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueKernelSpec {
    /// `sin(6r) 1_{[0,10]}(r)`
    Sine,
    /// Gaussian density centered at 5 with unit standard deviation.
    Gaussian,
    /// `|c_{d,s}| r^{-(d+2s)} 1_{[0.1,6]} + 10^{d+2s} 1_{[0,0.1)}` with d = 1.
    FractionalLaplacian { s: f64 },
}

impl TrueKernelSpec {
    pub fn fractional() -> Self {
        TrueKernelSpec::FractionalLaplacian { s: 0.5 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TrueKernelSpec::Sine => "sine",
            TrueKernelSpec::Gaussian => "gaussian",
            TrueKernelSpec::FractionalLaplacian { .. } => "fractional",
        }
    }
}

/// Lanczos approximation of the gamma function, good to ~1e-13 for the
/// arguments used here.
fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, &g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Build the closed-form benchmark kernel for `spec`.
pub fn make_true_kernel(spec: &TrueKernelSpec) -> Result<RadialKernel> {
    match *spec {
        TrueKernelSpec::Sine => Ok(RadialKernel::new(10.0, vec![10.0], |r| {
            if r <= 10.0 {
                (6.0 * r).sin()
            } else {
                0.0
            }
        })),
        TrueKernelSpec::Gaussian => {
            // support cut at center + 8 sigma: mass loss below 1e-14
            let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
            Ok(RadialKernel::new(13.0, vec![], move |r| {
                norm * (-(r - 5.0) * (r - 5.0) / 2.0).exp()
            }))
        }
        TrueKernelSpec::FractionalLaplacian { s } => {
            if !(0.0 < s && s < 1.0) {
                return Err(Error::InvalidSpec(format!("fractional exponent s = {s}")));
            }
            let d = 1.0;
            // c_{d,s} = 4^s pi^{-d/2} Gamma(d/2+s) Gamma(-s); negative for
            // s = 1/2, so the magnitude is used (nonnegative kernel).
            let c = (4.0f64.powf(s) * std::f64::consts::PI.powf(-d / 2.0)
                * gamma(d / 2.0 + s)
                * gamma(-s))
            .abs();
            let plateau = 10.0f64.powf(d + 2.0 * s);
            Ok(RadialKernel::new(6.0, vec![0.1, 6.0], move |r| {
                if r < 0.1 {
                    plateau
                } else if r <= 6.0 {
                    c * r.powf(-(d + 2.0 * s))
                } else {
                    0.0
                }
            }))
        }
    }
}

/// Boundary rule for the grid forward operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Sum only over neighbors that exist on the grid.
    InGrid,
    /// Treat `u` as zero outside the grid; this is the convention shared
    /// with the regression assembly.
    ZeroExtension,
}

/// Riemann-sum forward operator on the grid:
/// `g(x_j) = sum_k phi(r_k) (u(x_{j+k}) + u(x_{j-k}) - 2 u(x_j)) dx`
/// over distance bins `r_k = k dx <= support_radius`.
pub fn apply_riemann_mode(
    phi: &RadialKernel,
    u: &SampledFunction,
    mode: BoundaryMode,
) -> SampledFunction {
    let grid = u.grid;
    let n = grid.count;
    let dx = grid.dx;
    let kmax = bins_within(phi.support_radius, dx).min(n.saturating_sub(1));
    let mut out = vec![0.0; n];
    for k in 1..=kmax {
        let w = phi.evaluate(k as f64 * dx);
        if w == 0.0 {
            continue;
        }
        for j in 0..n {
            let uj = u.values[j];
            let mut acc = 0.0;
            let mut present = false;
            if j + k < n {
                acc += u.values[j + k] - uj;
                present = true;
            } else if mode == BoundaryMode::ZeroExtension {
                acc += -uj;
                present = true;
            }
            if j >= k {
                acc += u.values[j - k] - uj;
                present = true;
            } else if mode == BoundaryMode::ZeroExtension {
                acc += -uj;
                present = true;
            }
            if present {
                out[j] += w * acc;
            }
        }
    }
    for v in &mut out {
        *v *= dx;
    }
    SampledFunction {
        grid,
        values: out,
    }
}

/// [`apply_riemann_mode`] with the default in-grid boundary rule.
pub fn apply_riemann(phi: &RadialKernel, u: &SampledFunction) -> SampledFunction {
    apply_riemann_mode(phi, u, BoundaryMode::InGrid)
}

/// Number of whole distance bins `k dx` inside radius `r0`, tolerant of the
/// usual floating-point slop when `r0` is itself a bin multiple.
pub fn bins_within(r0: f64, dx: f64) -> usize {
    ((r0 / dx) * (1.0 + 1e-12)).floor() as usize
}

/// High-accuracy forward operator at a single point:
/// `int_{x-R0}^{x+R0} phi(|y-x|) (u(y) - u(x)) dy` by adaptive quadrature.
///
/// `u_breakpoints` are points where `u` is non-smooth (in `u` coordinates);
/// the kernel's own breakpoints and the kink at `y = x` are added
/// automatically.
pub fn apply_quadrature(
    phi: &RadialKernel,
    u: impl Fn(f64) -> f64,
    x: f64,
    tol: f64,
    u_breakpoints: &[f64],
) -> Result<f64> {
    let r0 = phi.support_radius;
    let ux = u(x);
    let mut bps: Vec<f64> = vec![x];
    for &rb in &phi.breakpoints {
        bps.push(x - rb);
        bps.push(x + rb);
    }
    bps.extend_from_slice(u_breakpoints);
    quad::integrate(
        |y| phi.evaluate((y - x).abs()) * (u(y) - ux),
        x - r0,
        x + r0,
        tol,
        &bps,
        4000,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid;
    use approx::assert_relative_eq;

    fn indicator_kernel() -> RadialKernel {
        RadialKernel::new(1.0, vec![1.0], |_| 1.0)
    }

    #[test]
    fn riemann_constant_u_is_zero() {
        let g = UniformGrid::new(0.0, 0.5, 9).unwrap();
        let u = SampledFunction::from_fn(g, |_| 3.0);
        let phi = indicator_kernel();
        for mode in [BoundaryMode::InGrid, BoundaryMode::ZeroExtension] {
            let out = apply_riemann_mode(&phi, &u, mode);
            if mode == BoundaryMode::InGrid {
                assert!(out.values.iter().all(|v| v.abs() < 1e-14));
            }
        }
    }

    #[test]
    fn riemann_zero_kernel_is_zero() {
        let g = UniformGrid::new(0.0, 0.5, 9).unwrap();
        let u = SampledFunction::from_fn(g, |x| x * x);
        let phi = RadialKernel::new(1.0, vec![], |_| 0.0);
        let out = apply_riemann(&phi, &u);
        assert!(out.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn riemann_hand_sum() {
        // phi = 1_[0,1], u(x) = x on x0=0, dx=0.5, 5 nodes.
        let g = UniformGrid::new(0.0, 0.5, 5).unwrap();
        let u = SampledFunction::from_fn(g, |x| x);
        let out = apply_riemann(&indicator_kernel(), &u);
        // center node: symmetric neighbors cancel
        assert_relative_eq!(out.values[2], 0.0, epsilon = 1e-14);
        // left edge: only right neighbors exist: ((0.5-0)+(1.0-0))*0.5
        assert_relative_eq!(out.values[0], 0.75, max_relative = 1e-14);
    }

    #[test]
    fn riemann_linearity() {
        let g = UniformGrid::new(-2.0, 0.05, 81).unwrap();
        let u = SampledFunction::from_fn(g, |x| (3.0 * x).sin());
        let p1 = RadialKernel::new(1.0, vec![], |r| r);
        let p2 = RadialKernel::new(1.0, vec![], |r| (r * 2.0).cos());
        let comb = RadialKernel::new(1.0, vec![], |r| 2.0 * r - 0.5 * (r * 2.0).cos());
        let a = apply_riemann(&p1, &u);
        let b = apply_riemann(&p2, &u);
        let c = apply_riemann(&comb, &u);
        for j in 0..g.count {
            let want = 2.0 * a.values[j] - 0.5 * b.values[j];
            assert_relative_eq!(c.values[j], want, max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn riemann_discrete_maximum_principle() {
        let g = UniformGrid::new(-4.0, 0.1, 81).unwrap();
        let u = SampledFunction::from_fn(g, |x| (-x * x).exp());
        let phi = RadialKernel::new(2.0, vec![], |r| 1.0 + r);
        let out = apply_riemann(&phi, &u);
        // strict interior maximum at x = 0 (node 40)
        assert!(out.values[40] <= 0.0);
    }

    #[test]
    fn quadrature_constant_u() {
        let phi = make_true_kernel(&TrueKernelSpec::Gaussian).unwrap();
        let v = apply_quadrature(&phi, |_| 5.0, 1.0, 1e-12, &[]).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn quadrature_odd_integrand() {
        let phi = indicator_kernel();
        let v = apply_quadrature(&phi, |y| y, 0.25, 1e-12, &[]).unwrap();
        assert!(v.abs() < 1e-11);
    }

    /// Composite Simpson reference, used as an independent oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn quadrature_matches_simpson_reference() {
        let phi = make_true_kernel(&TrueKernelSpec::Gaussian).unwrap();
        let pi = std::f64::consts::PI;
        let u = |y: f64| if y.abs() <= pi { y.sin() } else { 0.0 };
        for &x in &[0.0, 1.0, 2.5] {
            let v = apply_quadrature(&phi, u, x, 1e-12, &[-pi, pi]).unwrap();
            // reference integrates the same integrand over the kernel window,
            // split at the u truncation points to keep Simpson honest
            let ux = u(x);
            let g = |y: f64| phi.evaluate((y - x).abs()) * (u(y) - ux);
            let mut edges = vec![x - 13.0, x + 13.0, -pi, pi];
            edges.retain(|e| *e >= x - 13.0 && *e <= x + 13.0);
            edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
            edges.dedup();
            let reference: f64 = edges
                .windows(2)
                .map(|w| simpson(g, w[0], w[1], 400_000))
                .sum();
            assert!(
                (v - reference).abs() < 1e-8,
                "x = {x}: {v} vs {reference}"
            );
        }
    }

    #[test]
    fn true_kernel_closed_forms() {
        let sine = make_true_kernel(&TrueKernelSpec::Sine).unwrap();
        assert_eq!(sine.evaluate(0.0), 0.0);
        assert_relative_eq!(
            sine.evaluate(std::f64::consts::PI / 12.0),
            1.0,
            max_relative = 1e-14
        );
        assert_eq!(sine.evaluate(10.5), 0.0);

        let gauss = make_true_kernel(&TrueKernelSpec::Gaussian).unwrap();
        assert_relative_eq!(gauss.evaluate(5.0), 0.3989422804014327, max_relative = 1e-12);

        let frac = make_true_kernel(&TrueKernelSpec::fractional()).unwrap();
        // plateau value 10^{d+2s} = 100
        assert_relative_eq!(frac.evaluate(0.05), 100.0, max_relative = 1e-12);
        // |c_{1,1/2}| = |2/sqrt(pi) * Gamma(1) * Gamma(-1/2)| = 4
        assert_relative_eq!(frac.evaluate(1.0), 4.0, max_relative = 1e-12);
        assert_relative_eq!(frac.evaluate(0.5), 16.0, max_relative = 1e-12);
        assert_eq!(frac.evaluate(6.5), 0.0);
    }

    #[test]
    fn fractional_invalid_exponent() {
        assert!(make_true_kernel(&TrueKernelSpec::FractionalLaplacian { s: 1.5 }).is_err());
        assert!(make_true_kernel(&TrueKernelSpec::FractionalLaplacian { s: 0.0 }).is_err());
    }

    #[test]
    fn riemann_approaches_quadrature_for_smooth_kernel() {
        // halving dx should at least halve the max discrepancy
        let phi = RadialKernel::new(2.0, vec![], |r| (-(r - 1.0) * (r - 1.0) * 4.0).exp());
        let pi = std::f64::consts::PI;
        let uf = |y: f64| if y.abs() <= pi { y.cos() } else { 0.0 };
        let mut max_err = Vec::new();
        for &dx in &[0.1, 0.05] {
            let g = UniformGrid::symmetric(8.0, dx).unwrap();
            let u = SampledFunction::from_fn(g, uf);
            let num = apply_riemann_mode(&phi, &u, BoundaryMode::ZeroExtension);
            let mut worst = 0.0f64;
            for j in (0..g.count).step_by(7) {
                let x = g.node(j);
                let exact = apply_quadrature(&phi, uf, x, 1e-11, &[-pi, pi]).unwrap();
                worst = worst.max((num.values[j] - exact).abs());
            }
            max_err.push(worst);
        }
        assert!(
            max_err[1] <= 0.5 * max_err[0] * 1.2,
            "errors: {max_err:?}"
        );
    }
}
