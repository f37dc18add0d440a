//! Files written by a run: report.json, trace.csv, trace.svg, manifest.json.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use riskgrad::{EstimateReport, EvarConfig, EvarReport, GaussianSpec, PathPoint, SgldConfig};
use riskgrad::{PayoffKind, PenaltyMode, SampleMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const REPORT_SCHEMA: &str = "riskgrad.report/1";
pub const MANIFEST_SCHEMA: &str = "riskgrad.manifest/1";
pub const TRACE_HEADER: &str = "step,avar,var,loss_std";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSource {
    Gaussian {
        marginals: Vec<GaussianSpec>,
        seed: u64,
    },
    Data {
        path: String,
        sha256: String,
        columns: Vec<String>,
        /// Increments available in the file.
        increments: usize,
    },
}

/// Objective parameters shared by both estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEcho {
    pub payoff: PayoffKind,
    pub dim: usize,
    pub u: f64,
    pub gamma: f64,
    pub penalty_mode: PenaltyMode,
    pub sample_mode: SampleMode,
    pub samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AvarReportFile {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub source: SampleSource,
    pub estimate: EstimateReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvarReportFile {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub source: SampleSource,
    pub objective: ObjectiveEcho,
    pub sgld: SgldConfig,
    pub search: EvarConfig,
    pub result: EvarReport,
    pub assumption_flags: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_seconds: f64,
    pub elapsed_seconds: f64,
}

/// Everything needed to rerun a command; written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub resolved: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<InputDigest>,
    pub wall_clock: WallClock,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_of: Option<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let mut file = fs::File::open(path)
        .map_err(|e| Failure::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Collects written files so the manifest can list them.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), Failure> {
        let path = self.root.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::Io(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

pub fn trace_csv(path: &[PathPoint]) -> String {
    let mut out = String::with_capacity(32 * (path.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for p in path {
        let _ = writeln!(out, "{},{},{},{}", p.step, p.avar, p.var, p.loss_std);
    }
    out
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Running AVaR (solid) and VaR (dashed) against the step number.
pub fn trace_svg(path: &[PathPoint]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;

    let (x0, x1) = bounds(path.iter().map(|p| p.step as f64));
    let (y0, y1) = bounds(path.iter().flat_map(|p| [p.avar, p.var]));
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);
    let polyline = |ys: &dyn Fn(&PathPoint) -> f64| {
        path.iter()
            .filter(|p| ys(p).is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.step as f64), sy(ys(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (ax, ay) = (LEFT, H - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<path d="M{ax},{TOP} L{ax},{ay} L{},{ay}" stroke="black" fill="none"/>"#,
        W - RIGHT
    );
    for (value, anchor_x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x:.2}" y="{:.2}" text-anchor="middle">{value}</text>"#,
            ay + 18.0
        );
    }
    for value in [y0, y1] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{value:.4}</text>"#,
            ax - 6.0,
            sy(value) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#,
        polyline(&|p| p.avar)
    );
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" stroke="darkorange" stroke-width="1.5" stroke-dasharray="6 4" fill="none"/>"#,
        polyline(&|p| p.var)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" fill="steelblue">AVaR</text>"#,
        W - RIGHT - 90.0,
        TOP + 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" fill="darkorange">VaR</text>"#,
        W - RIGHT - 40.0,
        TOP + 14.0
    );
    svg.push_str("</svg>\n");
    svg
}
