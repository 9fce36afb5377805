//! Deterministic file emission: CSV with 17-significant-digit decimals,
//! JSON estimate records, and minimal SVG line plots rendered purely from
//! the emitted data.

use std::io::Write;
use std::path::Path;

use spinstar_core::estimator::FieldEstimate;
use spinstar_core::spectro::{PeakMeasurement, Spectrum};

use crate::config::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Numeric(format!("io: {e}"))
}

pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> Result<(), CliError> {
    let mut out = String::from("freq_hz,re,im\n");
    for (f, a) in spectrum.freq_hz.iter().zip(spectrum.amps.iter()) {
        out.push_str(&format!("{},{},{}\n", fmt_f64(*f), fmt_f64(a.re), fmt_f64(a.im)));
    }
    std::fs::write(path, out).map_err(io_err)
}

pub fn write_peaks_csv(path: &Path, peaks: &[PeakMeasurement]) -> Result<(), CliError> {
    let mut out = String::from("ell,amp_re,amp_im,phase_rad,freq_hz\n");
    for p in peaks {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.ell.0,
            fmt_f64(p.amplitude.re),
            fmt_f64(p.amplitude.im),
            fmt_f64(p.phase_rad),
            fmt_f64(p.frequency_hz)
        ));
    }
    std::fs::write(path, out).map_err(io_err)
}

pub fn write_peak_estimates_csv(path: &Path, estimate: &FieldEstimate) -> Result<(), CliError> {
    let mut out = String::from("ell,phase_rad,k,b0_tesla,weight,sigma_tesla\n");
    for r in &estimate.peaks {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.ell,
            fmt_f64(r.phase_rad),
            r.branch_k,
            fmt_f64(r.b0_tesla),
            fmt_f64(r.weight),
            fmt_f64(r.sigma_tesla)
        ));
    }
    std::fs::write(path, out).map_err(io_err)
}

#[derive(serde::Serialize)]
struct PeakJson {
    ell: i32,
    phase_rad: f64,
    k: i64,
    weight: f64,
}

#[derive(serde::Serialize)]
struct EstimateJson<'a> {
    b0_tesla: f64,
    sigma_tesla: f64,
    peaks: Vec<PeakJson>,
    flags: &'a [String],
}

pub fn write_estimate_json(path: &Path, estimate: &FieldEstimate) -> Result<(), CliError> {
    let record = EstimateJson {
        b0_tesla: estimate.b0_tesla,
        sigma_tesla: estimate.sigma_tesla,
        peaks: estimate
            .peaks
            .iter()
            .map(|r| PeakJson { ell: r.ell, phase_rad: r.phase_rad, k: r.branch_k, weight: r.weight })
            .collect(),
        flags: &estimate.flags,
    };
    let text = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::Numeric(format!("json: {e}")))?;
    std::fs::write(path, text + "\n").map_err(io_err)
}

pub fn write_sweep_csv(
    path: &Path,
    rows: &[(f64, Option<(f64, f64)>, String)],
) -> Result<(), CliError> {
    let mut out = String::from("value,b0_tesla,sigma_tesla,flags\n");
    for (value, est, flags) in rows {
        match est {
            Some((b0, sigma)) => out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(*value),
                fmt_f64(*b0),
                fmt_f64(*sigma),
                flags
            )),
            None => out.push_str(&format!("{},,,{}\n", fmt_f64(*value), flags)),
        }
    }
    std::fs::write(path, out).map_err(io_err)
}

const PALETTE: [&str; 6] = ["#1f6fb2", "#d1452c", "#3a8f4e", "#8555a5", "#b8860b", "#3b3b3b"];

/// Minimal line/scatter plot: one polyline (with point markers) per series.
pub fn svg_line_plot(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, Vec<(f64, f64)>)],
) -> Result<(), CliError> {
    let (w, h) = (860.0, 520.0);
    let (ml, mr, mt, mb) = (80.0, 30.0, 50.0, 60.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (_, pts) in series {
        for (x, y) in pts {
            if x.is_finite() && y.is_finite() {
                xs.push(*x);
                ys.push(*y);
            }
        }
    }
    let (xmin, xmax) = bounds(&xs);
    let (ymin, ymax) = bounds(&ys);
    let sx = move |x: f64| ml + (x - xmin) / (xmax - xmin) * pw;
    let sy = move |y: f64| mt + ph - (y - ymin) / (ymax - ymin) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw,
        mt + ph
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    // ticks
    for i in 0..=5 {
        let fx = xmin + (xmax - xmin) * i as f64 / 5.0;
        let px = sx(fx);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            mt + ph,
            mt + ph + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{:.3e}</text>\n",
            mt + ph + 20.0,
            fx
        ));
        let fy = ymin + (ymax - ymin) * i as f64 / 5.0;
        let py = sy(fy);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{ml}\" y2=\"{py}\" stroke=\"black\"/>\n",
            ml - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{:.3e}</text>\n",
            ml - 8.0,
            py + 4.0,
            fy
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        h - 14.0,
        escape(xlabel)
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>\n",
        mt + ph / 2.0,
        mt + ph / 2.0,
        escape(ylabel)
    ));
    for (si, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        if coords.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1.2\"/>\n",
                coords.join(" ")
            ));
        }
        if coords.len() <= 64 {
            for c in &coords {
                let mut it = c.split(',');
                let (px, py) = (it.next().unwrap(), it.next().unwrap());
                svg.push_str(&format!(
                    "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"{color}\"/>\n"
                ));
            }
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{}</text>\n",
            ml + pw - 150.0,
            mt + 16.0 * (si as f64 + 1.0),
            escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(svg.as_bytes()).map_err(io_err)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
