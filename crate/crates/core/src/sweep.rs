//! Convergence-sweep driver: (dx, nsr, kernel, regularizer, replicate)
//! cells, incremental per-cell persistence, and the aggregated report with
//! fitted log-log convergence rates.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::explore::{estimate_support, exploration_measure};
use crate::grid::{add_noise, Dataset, NoiseSpec};
use crate::operator::{make_true_kernel, TrueKernelSpec};
use crate::pipeline::{generate_synthetic, run_algorithm1, AlgorithmOptions, GROUND_TRUTH_TOL};
use crate::solve::{relative_l2rho_error, RegularizerKind};

/// Full sweep configuration; serializable as the experiment JSON config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel: TrueKernelSpec,
    pub dx_ladder: Vec<f64>,
    pub nsr_ladder: Vec<f64>,
    pub replicates: usize,
    pub degree: usize,
    pub regularizers: Vec<RegularizerKind>,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_domain")]
    pub domain_half_width: f64,
}

fn default_domain() -> f64 {
    40.0
}

impl ExperimentConfig {
    /// The benchmark ladder: dx in 0.0125 * {1,2,4,8,16}, nsr in
    /// {0, 0.5, 1, 2}, 100 replicates.
    pub fn paper_defaults(kernel: TrueKernelSpec, output_dir: PathBuf) -> Self {
        Self {
            kernel,
            dx_ladder: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
            nsr_ladder: vec![0.0, 0.5, 1.0, 2.0],
            replicates: 100,
            degree: 2,
            regularizers: RegularizerKind::ALL.to_vec(),
            seed: 0,
            output_dir,
            domain_half_width: 40.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dx_ladder.is_empty() || self.dx_ladder.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidData("dx ladder must be positive".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidData("replicates must be >= 1".into()));
        }
        if self.regularizers.is_empty() {
            return Err(Error::InvalidData("no regularizers configured".into()));
        }
        Ok(())
    }
}

/// One completed sweep cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub kernel: String,
    pub dx: f64,
    pub nsr: f64,
    pub regularizer: String,
    pub replicate: usize,
    pub dimension: usize,
    pub lambda: f64,
    pub loss: f64,
    pub error: f64,
    pub support_radius: f64,
    /// Set when the cell failed; the error field is NaN then.
    #[serde(default)]
    pub failure: Option<String>,
}

/// Fitted log-log slope of mean error against dx for one (nsr, regularizer)
/// curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRecord {
    pub kernel: String,
    pub nsr: f64,
    pub regularizer: String,
    /// (dx, mean error, std of error) per ladder rung.
    pub curve: Vec<(f64, f64, f64)>,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub cells: Vec<CellRecord>,
    pub rates: Vec<RateRecord>,
}

/// Stable per-cell seed: digest of the master seed and the cell key.
pub fn cell_seed(master: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn cell_key(cfg: &ExperimentConfig, dx: f64, nsr: f64, reg: RegularizerKind, rep: usize) -> String {
    format!(
        "{}-dx{:e}-nsr{:e}-{}-rep{:03}",
        cfg.kernel.label(),
        dx,
        nsr,
        reg.label(),
        rep
    )
}

/// Run (or resume) the full sweep. Ground truth per dx is generated once;
/// the support radius is estimated from the clean data and reused for the
/// noisy replicates, matching the benchmark's per-kernel support values.
pub fn run_convergence_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let cells_dir = cfg.output_dir.join("cells");
    fs::create_dir_all(&cells_dir)
        .map_err(|e| Error::io(cells_dir.display().to_string(), e))?;

    let mut cells: Vec<CellRecord> = Vec::new();
    for &dx in &cfg.dx_ladder {
        let clean = generate_synthetic(&cfg.kernel, dx, cfg.domain_half_width, GROUND_TRUTH_TOL)?;
        let rho = exploration_measure(&clean, cfg.domain_half_width)?;
        let support = estimate_support(&clean, &rho, crate::explore::DEFAULT_SUPPORT_THRESHOLD)?;
        let radius = support.radius;

        // all (nsr, regularizer, replicate) cells at this resolution
        let mut todo: Vec<(f64, RegularizerKind, usize)> = Vec::new();
        for &nsr in &cfg.nsr_ladder {
            for &reg in &cfg.regularizers {
                for rep in 0..cfg.replicates {
                    todo.push((nsr, reg, rep));
                }
            }
        }

        let done: Vec<CellRecord> = todo
            .par_iter()
            .map(|&(nsr, reg, rep)| {
                let key = cell_key(cfg, dx, nsr, reg, rep);
                let path = cells_dir.join(format!("{key}.json"));
                if let Ok(text) = fs::read_to_string(&path) {
                    if let Ok(cell) = serde_json::from_str::<CellRecord>(&text) {
                        return Ok(cell);
                    }
                }
                let cell = run_cell(cfg, &clean, radius, dx, nsr, reg, rep, &key);
                let cell = match cell {
                    Ok(c) => c,
                    Err(e) => CellRecord {
                        kernel: cfg.kernel.label().to_string(),
                        dx,
                        nsr,
                        regularizer: reg.label().to_string(),
                        replicate: rep,
                        dimension: 0,
                        lambda: f64::NAN,
                        loss: f64::NAN,
                        error: f64::NAN,
                        support_radius: radius,
                        failure: Some(e.to_string()),
                    },
                };
                let text = serde_json::to_string_pretty(&cell)?;
                fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
                Ok(cell)
            })
            .collect::<Result<Vec<_>>>()?;
        cells.extend(done);
    }

    let rates = fit_rates(cfg, &cells);
    let report = RunReport { cells, rates };
    write_report_csv(&report, &cfg.output_dir)?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &ExperimentConfig,
    clean: &Dataset,
    radius: f64,
    dx: f64,
    nsr: f64,
    reg: RegularizerKind,
    rep: usize,
    key: &str,
) -> Result<CellRecord> {
    let seed = cell_seed(cfg.seed, key);
    let noisy = add_noise(clean, &NoiseSpec { nsr, seed })?;
    let mut opts = AlgorithmOptions::with_regularizer(reg);
    opts.degree = cfg.degree;
    opts.support_radius = Some(radius);
    let out = run_algorithm1(&noisy, &opts)?;
    let truth = make_true_kernel(&cfg.kernel)?;
    let error = relative_l2rho_error(&out.estimate, &truth, &out.rho)?;
    Ok(CellRecord {
        kernel: cfg.kernel.label().to_string(),
        dx,
        nsr,
        regularizer: reg.label().to_string(),
        replicate: rep,
        dimension: out.estimate.space.dimension(),
        lambda: out.estimate.lambda,
        loss: out.estimate.loss,
        error,
        support_radius: radius,
        failure: None,
    })
}

/// Least-squares slope of `ln(mean error)` against `ln(dx)` per
/// (nsr, regularizer) group.
fn fit_rates(cfg: &ExperimentConfig, cells: &[CellRecord]) -> Vec<RateRecord> {
    let mut groups: BTreeMap<(String, String), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for c in cells {
        if c.failure.is_some() || !c.error.is_finite() {
            continue;
        }
        groups
            .entry((format!("{:e}", c.nsr), c.regularizer.clone()))
            .or_default()
            .entry(c.dx.to_bits())
            .or_default()
            .push(c.error);
    }
    let mut rates = Vec::new();
    for ((nsr_key, reg), by_dx) in groups {
        let mut curve: Vec<(f64, f64, f64)> = by_dx
            .into_iter()
            .map(|(bits, errs)| {
                let dx = f64::from_bits(bits);
                let n = errs.len() as f64;
                let mean = errs.iter().sum::<f64>() / n;
                let var = if errs.len() > 1 {
                    errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                (dx, mean, var.sqrt())
            })
            .collect();
        curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let rate = slope(
            &curve.iter().map(|(dx, ..)| dx.ln()).collect::<Vec<_>>(),
            &curve
                .iter()
                .map(|(_, e, _)| e.max(1e-300).ln())
                .collect::<Vec<_>>(),
        );
        rates.push(RateRecord {
            kernel: cfg.kernel.label().to_string(),
            nsr: nsr_key.parse().unwrap_or(f64::NAN),
            regularizer: reg,
            curve,
            rate,
        });
    }
    rates
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    sxy / sxx
}

/// Deterministic CSV reports: one row per cell plus one per rate record.
pub fn write_report_csv(report: &RunReport, outdir: &Path) -> Result<()> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir.display().to_string(), e))?;
    let mut cells = String::from(
        "kernel,dx,nsr,regularizer,replicate,dimension,lambda,loss,error,support_radius,failure\n",
    );
    let mut sorted: Vec<&CellRecord> = report.cells.iter().collect();
    sorted.sort_by(|a, b| {
        a.kernel
            .cmp(&b.kernel)
            .then(a.dx.total_cmp(&b.dx))
            .then(a.nsr.total_cmp(&b.nsr))
            .then(a.regularizer.cmp(&b.regularizer))
            .then(a.replicate.cmp(&b.replicate))
    });
    for c in sorted {
        cells.push_str(&format!(
            "{},{:.12e},{:.12e},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
            c.kernel,
            c.dx,
            c.nsr,
            c.regularizer,
            c.replicate,
            c.dimension,
            c.lambda,
            c.loss,
            c.error,
            c.support_radius,
            c.failure.as_deref().unwrap_or("")
        ));
    }
    let cells_path = outdir.join("cells.csv");
    fs::write(&cells_path, cells).map_err(|e| Error::io(cells_path.display().to_string(), e))?;

    let mut rates = String::from("kernel,nsr,regularizer,rate,curve_dx,curve_mean,curve_std\n");
    for r in &report.rates {
        for (dx, mean, std) in &r.curve {
            rates.push_str(&format!(
                "{},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.kernel, r.nsr, r.regularizer, r.rate, dx, mean, std
            ));
        }
    }
    let rates_path = outdir.join("rates.csv");
    fs::write(&rates_path, rates).map_err(|e| Error::io(rates_path.display().to_string(), e))?;
    Ok(())
}
