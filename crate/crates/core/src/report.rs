//! Report files: metrics JSON, score histograms and an optional SVG overlay.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::format::{csv_float, to_json_string};
use crate::metrics::MetricReport;
use crate::protocol::{Protocol, ScoreSet};
use crate::synth::SymmetryReport;

pub const DEFAULT_BINS: usize = 50;
pub const METRICS_NAME: &str = "metrics.json";
pub const SVG_NAME: &str = "fig5.svg";

/// Uniform-bin counts of genuine and impostor scores. Values outside the range
/// land in the edge bins so every score is counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub genuine: Vec<u64>,
    pub impostor: Vec<u64>,
}

impl Histogram {
    pub fn new(genuine: &[f64], impostor: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 || lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "histogram {bins} bins over [{lo}, {hi}]"
            )));
        }
        let count = |values: &[f64]| {
            let mut counts = vec![0u64; bins];
            for &v in values {
                let t = ((v - lo) / (hi - lo) * bins as f64).floor();
                let i = if t.is_nan() {
                    0
                } else {
                    t.clamp(0.0, (bins - 1) as f64) as usize
                };
                counts[i] += 1;
            }
            counts
        };
        Ok(Self {
            lo,
            hi,
            genuine: count(genuine),
            impostor: count(impostor),
        })
    }

    /// 50 bins over [-1, 1].
    pub fn of_scores(scores: &ScoreSet) -> Self {
        Self::new(&scores.genuine(), &scores.impostor(), DEFAULT_BINS, -1.0, 1.0).expect("valid default bins")
    }

    pub fn bins(&self) -> usize {
        self.genuine.len()
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.bins() as f64;
        let lo = self.lo + w * i as f64;
        let hi = if i + 1 == self.bins() {
            self.hi
        } else {
            self.lo + w * (i + 1) as f64
        };
        (lo, hi)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["bin_lo", "bin_hi", "genuine_count", "impostor_count"])?;
        for i in 0..self.bins() {
            let (lo, hi) = self.edges(i);
            w.write_record([
                csv_float(lo),
                csv_float(hi),
                self.genuine[i].to_string(),
                self.impostor[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What to emit.
#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Metrics {
        report: &'a MetricReport,
        scores: &'a ScoreSet,
    },
    Symmetry(&'a SymmetryReport),
}

fn histogram_name(protocol: Protocol) -> String {
    match protocol {
        Protocol::SameSide => "hist_same.csv".into(),
        Protocol::OppositeSide => "hist_opposite.csv".into(),
        p => format!("hist_{}.csv", p.name()),
    }
}

fn write_histogram(dir: &Path, name: &str, scores: &ScoreSet) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    Histogram::of_scores(scores).write_csv(&mut buf)?;
    fs::write(&path, buf)?;
    Ok(path)
}

/// Writes the report files into `dir` and returns their paths.
pub fn emit_report(report: Report<'_>, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let metrics_path = dir.join(METRICS_NAME);
    match report {
        Report::Metrics { report, scores } => {
            fs::write(&metrics_path, to_json_string(report)?)?;
            written.push(metrics_path);
            written.push(write_histogram(dir, &histogram_name(scores.protocol), scores)?);
            if svg {
                let path = dir.join(SVG_NAME);
                fs::write(&path, render_svg(&[(scores.protocol.name(), scores, report.dprime)]))?;
                written.push(path);
            }
        }
        Report::Symmetry(r) => {
            let (same, opposite) = match (&r.scores_same, &r.scores_opposite) {
                (Some(s), Some(o)) => (s, o),
                _ => return Err(Error::InvalidParameter("symmetry report carries no scores".into())),
            };
            fs::write(&metrics_path, to_json_string(r)?)?;
            written.push(metrics_path);
            written.push(write_histogram(dir, "hist_same.csv", same)?);
            written.push(write_histogram(dir, "hist_opposite.csv", opposite)?);
            if svg {
                let path = dir.join(SVG_NAME);
                let panels = [
                    ("same-side", same, r.same_side.dprime),
                    ("opposite-side", opposite, r.opposite_side.dprime),
                ];
                fs::write(&path, render_svg(&panels))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 30.0;

fn polyline(counts: &[u64], total: u64, peak: f64, x0: f64, y0: f64) -> String {
    let bins = counts.len() as f64;
    let mut points = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let density = if total == 0 { 0.0 } else { c as f64 / total as f64 };
        let y = y0 + PANEL_H - density / peak * (PANEL_H - 20.0);
        let xa = x0 + PANEL_W * i as f64 / bins;
        let xb = x0 + PANEL_W * (i + 1) as f64 / bins;
        let _ = write!(points, "{xa:.2},{y:.2} {xb:.2},{y:.2} ");
    }
    points.trim_end().to_string()
}

/// Side-by-side panels, genuine (blue) over impostor (red), score axis [-1, 1].
fn render_svg(panels: &[(&str, &ScoreSet, f64)]) -> String {
    let width = MARGIN + panels.len() as f64 * (PANEL_W + MARGIN);
    let height = PANEL_H + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    for (k, (name, scores, dprime)) in panels.iter().enumerate() {
        let hist = Histogram::of_scores(scores);
        let (ng, ni) = (hist.genuine.iter().sum::<u64>(), hist.impostor.iter().sum::<u64>());
        let frac = |c: &[u64], n: u64| {
            c.iter()
                .map(|&x| if n == 0 { 0.0 } else { x as f64 / n as f64 })
                .fold(0.0, f64::max)
        };
        let peak = frac(&hist.genuine, ng).max(frac(&hist.impostor, ni)).max(1e-12);
        let x0 = MARGIN + k as f64 * (PANEL_W + MARGIN);
        let y0 = MARGIN;
        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(svg, r#"<text x="{x0}" y="{}">{name}</text>"#, y0 - 8.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">d'={}</text>"#,
            x0 + PANEL_W - 6.0,
            y0 + 16.0,
            csv_float(*dprime)
        );
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="red" points="{}"/>"#,
            polyline(&hist.impostor, ni, peak, x0, y0)
        );
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="blue" points="{}"/>"#,
            polyline(&hist.genuine, ng, peak, x0, y0)
        );
        for (label, frac) in [("-1", 0.0), ("0", 0.5), ("1", 1.0)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{label}</text>"#,
                x0 + PANEL_W * frac,
                y0 + PANEL_H + 16.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
