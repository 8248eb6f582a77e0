//! Static SVG/CSV figure emission for sweep reports, estimator overlays,
//! L-curves and dispersion curves. Output is byte-deterministic for a
//! fixed input.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lcurve::LCurve;
use crate::operator::RadialKernel;
use crate::solve::KernelEstimate;
use crate::sweep::RunReport;
use crate::wave::dispersion_omega2;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// A single polyline series.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Minimal line plot; log axes are handled by transforming the data before
/// calling.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax - xmin).abs() < 1e-300 {
        xmax = xmin + 1.0;
    }
    if (ymax - ymin).abs() < 1e-300 {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - xmin) / (xmax - xmin) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - ymin) / (ymax - ymin) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        title
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            sx(fx),
            HEIGHT - MARGIN + 18.0,
            fmt(fx)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            MARGIN - 6.0,
            sy(fy) + 4.0,
            fmt(fy)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        xlabel
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        ylabel
    ));
    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            color,
            pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            WIDTH - MARGIN + 4.0,
            MARGIN + 16.0 * si as f64,
            color,
            s.label
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Error-decay figures (log-log error vs dx, one series per regularizer,
/// one file per nsr) plus backing CSV tables. Returns the written paths.
pub fn emit_report_plots(report: &RunReport, outdir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut by_nsr: std::collections::BTreeMap<u64, Vec<&crate::sweep::RateRecord>> =
        Default::default();
    for r in &report.rates {
        by_nsr.entry(r.nsr.to_bits()).or_default().push(r);
    }
    for (bits, rates) in by_nsr {
        let nsr = f64::from_bits(bits);
        let kernel = rates
            .first()
            .map(|r| r.kernel.clone())
            .unwrap_or_default();
        let series: Vec<Series> = rates
            .iter()
            .map(|r| Series {
                label: format!("{} (rate {:.2})", r.regularizer, r.rate),
                points: r
                    .curve
                    .iter()
                    .map(|(dx, e, _)| (dx.ln() / std::f64::consts::LN_10, e.max(1e-300).ln() / std::f64::consts::LN_10))
                    .collect(),
            })
            .collect();
        let svg = line_plot(
            &format!("{kernel} error decay, nsr = {nsr}"),
            "log10 dx",
            "log10 relative error",
            &series,
        );
        let path = outdir.join(format!("error_decay_{kernel}_nsr{nsr:e}.svg"));
        write(&path, &svg)?;
        written.push(path);

        let mut csv = String::from("regularizer,dx,mean_error,std_error,rate\n");
        for r in &rates {
            for (dx, mean, std) in &r.curve {
                csv.push_str(&format!(
                    "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                    r.regularizer, dx, mean, std, r.rate
                ));
            }
        }
        let path = outdir.join(format!("error_decay_{kernel}_nsr{nsr:e}.csv"));
        write(&path, &csv)?;
        written.push(path);
    }
    Ok(written)
}

/// Estimator-vs-truth overlay on a radius grid.
pub fn emit_estimate_plot(
    estimate: &KernelEstimate,
    truth: Option<&RadialKernel>,
    outdir: &Path,
    tag: &str,
) -> Result<Vec<PathBuf>> {
    let radius = estimate.support_radius();
    let m = 400;
    let rs: Vec<f64> = (0..=m).map(|i| radius * i as f64 / m as f64).collect();
    let mut series = vec![Series {
        label: "estimate".into(),
        points: rs.iter().map(|&r| (r, estimate.evaluate(r))).collect(),
    }];
    if let Some(t) = truth {
        series.push(Series {
            label: "truth".into(),
            points: rs.iter().map(|&r| (r, t.evaluate(r))).collect(),
        });
    }
    let svg = line_plot(&format!("kernel estimate ({tag})"), "r", "phi(r)", &series);
    let svg_path = outdir.join(format!("estimate_{tag}.svg"));
    write(&svg_path, &svg)?;

    let mut csv = String::from("r,estimate,truth\n");
    for &r in &rs {
        let tv = truth.map(|t| t.evaluate(r)).unwrap_or(f64::NAN);
        csv.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", r, estimate.evaluate(r), tv));
    }
    let csv_path = outdir.join(format!("estimate_{tag}.csv"));
    write(&csv_path, &csv)?;
    Ok(vec![svg_path, csv_path])
}

/// L-curve figure plus CSV.
pub fn emit_lcurve_plot(curve: &LCurve, outdir: &Path, tag: &str) -> Result<Vec<PathBuf>> {
    let series = [Series {
        label: "l-curve".into(),
        points: curve.points.clone(),
    }];
    let svg = line_plot(
        &format!("L-curve ({tag})"),
        "log fit",
        "log penalty",
        &series,
    );
    let svg_path = outdir.join(format!("lcurve_{tag}.svg"));
    write(&svg_path, &svg)?;
    let csv_path = outdir.join(format!("lcurve_{tag}.csv"));
    write(&csv_path, &curve.to_csv())?;
    Ok(vec![svg_path, csv_path])
}

/// Dispersion and group-velocity curves of a kernel.
pub fn emit_dispersion_plot(
    phi: &RadialKernel,
    dr: f64,
    k_max: f64,
    outdir: &Path,
    tag: &str,
) -> Result<Vec<PathBuf>> {
    let m = 200;
    let ks: Vec<f64> = (0..=m).map(|i| k_max * i as f64 / m as f64).collect();
    let om2: Vec<f64> = ks.iter().map(|&k| dispersion_omega2(phi, k, dr)).collect();
    let omega: Vec<f64> = om2.iter().map(|&w| w.max(0.0).sqrt()).collect();
    // centered-difference group velocity
    let dk = k_max / m as f64;
    let vg: Vec<f64> = (0..=m)
        .map(|i| {
            if i == 0 || i == m {
                f64::NAN
            } else {
                (omega[i + 1] - omega[i - 1]) / (2.0 * dk)
            }
        })
        .collect();
    let series = [
        Series {
            label: "omega^2".into(),
            points: ks.iter().cloned().zip(om2.iter().cloned()).collect(),
        },
        Series {
            label: "group velocity".into(),
            points: ks.iter().cloned().zip(vg.iter().cloned()).collect(),
        },
    ];
    let svg = line_plot(&format!("dispersion ({tag})"), "k", "", &series);
    let svg_path = outdir.join(format!("dispersion_{tag}.svg"));
    write(&svg_path, &svg)?;
    let mut csv = String::from("k,omega2,omega,group_velocity\n");
    for i in 0..=m {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e}\n",
            ks[i], om2[i], omega[i], vg[i]
        ));
    }
    let csv_path = outdir.join(format!("dispersion_{tag}.csv"));
    write(&csv_path, &csv)?;
    Ok(vec![svg_path, csv_path])
}
