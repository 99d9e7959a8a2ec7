//! Deterministic artifact handling: atomic file placement, content hashing,
//! the JSON sidecar formats (manifest, ground truth, reports, prediction
//! records) and dependency-free SVG plots. Nothing here embeds timestamps,
//! hostnames or environment details, so rerunning a configuration
//! reproduces every artifact byte for byte.

use pidmd::io::MatData;
use pidmd::metrics::{EvalEntry, EvalReport, MethodSummary};
use pidmd::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

pub const MANIFEST_FORMAT: &str = "pidmd-manifest";
pub const GROUND_TRUTH_FORMAT: &str = "pidmd-ground-truth";
pub const REPORT_FORMAT: &str = "pidmd-report";
pub const RECORD_FORMAT: &str = "pidmd-prediction-record";
pub const ARTIFACT_VERSION: u32 = 1;

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let mut hex = String::with_capacity(64);
    for b in hasher.finalize() {
        write!(hex, "{b:02x}").unwrap();
    }
    hex
}

/// Write to a unique temporary name in the target directory, then rename
/// into place, so concurrent or interrupted runs never expose partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .ok_or_else(|| Error::InvalidInput(format!("'{}' has no parent directory", path.display())))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("'{}' has no file name", path.display())))?;
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::SeqCst)
    ));
    std::fs::write(&tmp, bytes)?;
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

fn check_marker(what: &str, format: &str, version: u32) -> Result<()> {
    let expected = match what {
        "manifest" => MANIFEST_FORMAT,
        "ground truth" => GROUND_TRUTH_FORMAT,
        "report" => REPORT_FORMAT,
        "prediction record" => RECORD_FORMAT,
        _ => unreachable!("unknown artifact kind"),
    };
    if format != expected {
        return Err(Error::Format(format!("{what} format marker '{format}'")));
    }
    if version != ARTIFACT_VERSION {
        return Err(Error::Format(format!("unsupported {what} version {version}")));
    }
    Ok(())
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{what} parse: {e}")))
}

fn to_pretty<T: Serialize>(value: &T, what: &str) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format(format!("{what} serialization: {e}")))
}

/// One generated data file, hashed at write time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Path relative to the run root, so the tree can be relocated.
    pub path: String,
    /// `"train"` or `"test"`.
    pub role: String,
    pub label: String,
    pub theta: Vec<f64>,
    pub sha256: String,
}

/// Index of everything the generate stage wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(config_hash: String, files: Vec<ManifestEntry>) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: ARTIFACT_VERSION,
            config_hash,
            files,
        }
    }

    pub fn entries(&self, role: &str) -> Vec<&ManifestEntry> {
        self.files.iter().filter(|f| f.role == role).collect()
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_atomic(path, to_pretty(manifest, "manifest")?.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let m: Manifest = parse_json(path, "manifest")?;
    check_marker("manifest", &m.format, m.version)?;
    Ok(m)
}

/// The exact operator blocks behind a generated affine data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub a: MatData,
    pub b: Vec<MatData>,
}

impl GroundTruthFile {
    pub fn new(config_hash: String, a: MatData, b: Vec<MatData>) -> Self {
        Self {
            format: GROUND_TRUTH_FORMAT.into(),
            version: ARTIFACT_VERSION,
            config_hash,
            a,
            b,
        }
    }
}

pub fn write_ground_truth(path: &Path, truth: &GroundTruthFile) -> Result<()> {
    write_atomic(path, to_pretty(truth, "ground truth")?.as_bytes())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruthFile> {
    let g: GroundTruthFile = parse_json(path, "ground truth")?;
    check_marker("ground truth", &g.format, g.version)?;
    Ok(g)
}

/// Evaluation report on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub report: EvalReport,
}

impl ReportFile {
    pub fn new(report: EvalReport) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: ARTIFACT_VERSION,
            report,
        }
    }
}

pub fn write_report(path: &Path, file: &ReportFile) -> Result<()> {
    write_atomic(path, to_pretty(file, "report")?.as_bytes())
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let r: ReportFile = parse_json(path, "report")?;
    check_marker("report", &r.format, r.version)?;
    Ok(r)
}

/// Outcome of a single prediction, including refusals: a divergent or
/// numerically failed prediction still leaves a structured record behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub method: String,
    pub steps: usize,
    /// Error kind when the prediction was refused (`"divergence"`,
    /// `"numerical"`); absent on success.
    pub error: Option<String>,
    pub entry: EvalEntry,
}

impl PredictionRecord {
    pub fn new(
        config_hash: String,
        method: String,
        steps: usize,
        error: Option<String>,
        entry: EvalEntry,
    ) -> Self {
        Self {
            format: RECORD_FORMAT.into(),
            version: ARTIFACT_VERSION,
            config_hash,
            method,
            steps,
            error,
            entry,
        }
    }
}

pub fn write_record(path: &Path, record: &PredictionRecord) -> Result<()> {
    write_atomic(path, to_pretty(record, "prediction record")?.as_bytes())
}

pub fn read_record(path: &Path) -> Result<PredictionRecord> {
    let r: PredictionRecord = parse_json(path, "prediction record")?;
    check_marker("prediction record", &r.format, r.version)?;
    Ok(r)
}

/// Shortest round-trip decimal form of a float (what `Display` prints).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Quote a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One curve of a line plot: x positions with optional heights. `None`
/// marks a refused prediction, drawn as a cross on the top border.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub name: String,
    pub color: String,
    pub points: Vec<(f64, Option<f64>)>,
}

/// Fixed palette keyed by method name so rerenders never shuffle colors.
pub fn method_color(name: &str) -> &'static str {
    match name {
        "dmd" => "#1f77b4",
        "pidmd" => "#d62728",
        "stacked" => "#2ca02c",
        "rkoi" => "#9467bd",
        _ => "#7f7f7f",
    }
}

const SVG_W: f64 = 840.0;
const SVG_H: f64 = 520.0;
const PLOT_L: f64 = 90.0;
const PLOT_R: f64 = 800.0;
const PLOT_T: f64 = 60.0;
const PLOT_B: f64 = 440.0;
/// Floor for the log axis; exact zeros plot here.
const LOG_FLOOR: f64 = 1e-16;

fn log10_clamped(v: f64) -> f64 {
    v.max(LOG_FLOOR).log10()
}

struct LogAxis {
    lo: i64,
    hi: i64,
}

impl LogAxis {
    /// Decade range covering the data, at least one decade wide.
    fn covering(values: impl Iterator<Item = f64>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            let l = log10_clamped(v);
            lo = lo.min(l);
            hi = hi.max(l);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Self { lo: -1, hi: 1 };
        }
        let (mut lo, mut hi) = (lo.floor() as i64, hi.ceil() as i64);
        if lo == hi {
            lo -= 1;
            hi += 1;
        }
        Self { lo, hi }
    }

    fn y(&self, v: f64) -> f64 {
        let frac = (log10_clamped(v) - self.lo as f64) / (self.hi - self.lo) as f64;
        PLOT_B - frac * (PLOT_B - PLOT_T)
    }

    fn ticks(&self) -> Vec<i64> {
        let span = self.hi - self.lo;
        let step = (span as f64 / 8.0).ceil().max(1.0) as i64;
        (0..=span / step).map(|k| self.lo + k * step).collect()
    }
}

fn svg_header(out: &mut String, title: &str, config_hash: &str) {
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\" \
         font-family=\"monospace\" font-size=\"13\">"
    )
    .unwrap();
    writeln!(out, "<desc>config_hash={config_hash}</desc>").unwrap();
    writeln!(out, "<rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>").unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        (PLOT_L + PLOT_R) / 2.0,
        xml_escape(title)
    )
    .unwrap();
}

fn svg_frame(out: &mut String, x_label: &str, y_label: &str) {
    writeln!(
        out,
        "<rect x=\"{PLOT_L}\" y=\"{PLOT_T}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#333333\"/>",
        PLOT_R - PLOT_L,
        PLOT_B - PLOT_T
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (PLOT_L + PLOT_R) / 2.0,
        PLOT_B + 45.0,
        xml_escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"22\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 22 {:.1})\">{}</text>",
        (PLOT_T + PLOT_B) / 2.0,
        (PLOT_T + PLOT_B) / 2.0,
        xml_escape(y_label)
    )
    .unwrap();
}

fn svg_y_ticks(out: &mut String, axis: &LogAxis) {
    for t in axis.ticks() {
        let y = axis.y(10f64.powi(t as i32));
        writeln!(
            out,
            "<line x1=\"{PLOT_L}\" y1=\"{y:.2}\" x2=\"{PLOT_R}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\"/>"
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\">1e{t}</text>",
            PLOT_L - 8.0,
            y + 4.0
        )
        .unwrap();
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Per-parameter error curves on a log scale, one series per method.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[PlotSeries],
    config_hash: &str,
) -> String {
    let mut out = String::new();
    svg_header(&mut out, title, config_hash);

    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in &xs {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    }
    if xs.is_empty() || !xmin.is_finite() {
        writeln!(&mut out, "<text x=\"420\" y=\"260\" text-anchor=\"middle\">no data</text>").unwrap();
        out.push_str("</svg>\n");
        return out;
    }
    if xmax == xmin {
        let pad = if xmin == 0.0 { 0.5 } else { xmin.abs() * 0.1 };
        xmin -= pad;
        xmax += pad;
    }
    let px = |x: f64| PLOT_L + (x - xmin) / (xmax - xmin) * (PLOT_R - PLOT_L);
    let axis = LogAxis::covering(series.iter().flat_map(|s| s.points.iter().filter_map(|p| p.1)));

    svg_y_ticks(&mut out, &axis);
    let mut tick_xs: Vec<f64> = xs.clone();
    tick_xs.sort_by(f64::total_cmp);
    tick_xs.dedup();
    if tick_xs.len() > 10 {
        tick_xs = (0..6).map(|k| xmin + k as f64 * (xmax - xmin) / 5.0).collect();
    }
    for &x in &tick_xs {
        let p = px(x);
        writeln!(
            &mut out,
            "<line x1=\"{p:.2}\" y1=\"{PLOT_B}\" x2=\"{p:.2}\" y2=\"{:.1}\" stroke=\"#333333\"/>",
            PLOT_B + 5.0
        )
        .unwrap();
        writeln!(
            &mut out,
            "<text x=\"{p:.2}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            PLOT_B + 22.0,
            fmt_f64(x)
        )
        .unwrap();
    }
    svg_frame(&mut out, x_label, y_label);

    for s in series {
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() >= 2 {
                writeln!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                    seg.join(" "),
                    s.color
                )
                .unwrap();
            }
            seg.clear();
        };
        for &(x, y) in &s.points {
            match y {
                Some(v) => segment.push(format!("{:.2},{:.2}", px(x), axis.y(v))),
                None => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
        for &(x, y) in &s.points {
            match y {
                Some(v) => writeln!(
                    &mut out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
                    px(x),
                    axis.y(v),
                    s.color
                )
                .unwrap(),
                None => {
                    // Refused prediction: cross on the top border.
                    let (cx, cy) = (px(x), PLOT_T + 8.0);
                    writeln!(
                        &mut out,
                        "<path d=\"M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}\" \
                         stroke=\"{}\" stroke-width=\"2\"/>",
                        cx - 4.0,
                        cy - 4.0,
                        cx + 4.0,
                        cy + 4.0,
                        cx - 4.0,
                        cy + 4.0,
                        cx + 4.0,
                        cy - 4.0,
                        s.color
                    )
                    .unwrap();
                }
            }
        }
    }

    for (i, s) in series.iter().enumerate() {
        let y = PLOT_T + 16.0 + 18.0 * i as f64;
        writeln!(
            &mut out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{}\" stroke-width=\"2\"/>",
            PLOT_R - 150.0,
            PLOT_R - 120.0,
            s.color
        )
        .unwrap();
        writeln!(
            &mut out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            PLOT_R - 112.0,
            y + 4.0,
            xml_escape(&s.name)
        )
        .unwrap();
    }

    out.push_str("</svg>\n");
    out
}

/// Five-number summaries as box-and-whisker glyphs, one slot per method.
pub fn box_plot_svg(title: &str, y_label: &str, rows: &[MethodSummary], config_hash: &str) -> String {
    let mut out = String::new();
    svg_header(&mut out, title, config_hash);

    let axis = LogAxis::covering(
        rows.iter()
            .flat_map(|r| [r.min, r.q1, r.median, r.q3, r.max])
            .flatten(),
    );
    svg_y_ticks(&mut out, &axis);
    svg_frame(&mut out, "method", y_label);

    let slot = (PLOT_R - PLOT_L) / rows.len().max(1) as f64;
    for (i, row) in rows.iter().enumerate() {
        let cx = PLOT_L + slot * (i as f64 + 0.5);
        let color = method_color(&row.method);
        writeln!(
            &mut out,
            "<text x=\"{cx:.2}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            PLOT_B + 22.0,
            xml_escape(&row.method)
        )
        .unwrap();
        writeln!(
            &mut out,
            "<text x=\"{cx:.2}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">n={} diverged={}</text>",
            PLOT_B + 38.0,
            row.count,
            row.diverged
        )
        .unwrap();
        let (Some(min), Some(q1), Some(med), Some(q3), Some(max)) =
            (row.min, row.q1, row.median, row.q3, row.max)
        else {
            writeln!(
                &mut out,
                "<text x=\"{cx:.2}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{color}\">all diverged</text>",
                (PLOT_T + PLOT_B) / 2.0
            )
            .unwrap();
            continue;
        };
        let half = (slot * 0.3).min(50.0);
        let (ymin, yq1, ymed, yq3, ymax) =
            (axis.y(min), axis.y(q1), axis.y(med), axis.y(q3), axis.y(max));
        writeln!(
            &mut out,
            "<line x1=\"{cx:.2}\" y1=\"{ymin:.2}\" x2=\"{cx:.2}\" y2=\"{yq1:.2}\" stroke=\"{color}\"/>"
        )
        .unwrap();
        writeln!(
            &mut out,
            "<line x1=\"{cx:.2}\" y1=\"{yq3:.2}\" x2=\"{cx:.2}\" y2=\"{ymax:.2}\" stroke=\"{color}\"/>"
        )
        .unwrap();
        for y in [ymin, ymax] {
            writeln!(
                &mut out,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\"/>",
                cx - half / 2.0,
                cx + half / 2.0
            )
            .unwrap();
        }
        writeln!(
            &mut out,
            "<rect x=\"{:.2}\" y=\"{yq3:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"{color}\" fill-opacity=\"0.25\" stroke=\"{color}\"/>",
            cx - half,
            2.0 * half,
            yq1 - yq3
        )
        .unwrap();
        writeln!(
            &mut out,
            "<line x1=\"{:.2}\" y1=\"{ymed:.2}\" x2=\"{:.2}\" y2=\"{ymed:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            cx - half,
            cx + half
        )
        .unwrap();
    }

    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_known_vector() {
        // SHA-256 of the empty string, a fixed public test vector.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("file.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        let leftovers: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(leftovers.len(), 1, "temp files left behind: {leftovers:?}");
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn manifest_round_trips_and_rejects_bad_markers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let m = Manifest::new(
            "hash".into(),
            vec![ManifestEntry {
                path: "data/train_000.pdmd".into(),
                role: "train".into(),
                label: "affine_0".into(),
                theta: vec![0.25],
                sha256: "00".into(),
            }],
        );
        write_manifest(&path, &m).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);

        let mut bad = m.clone();
        bad.format = "other".into();
        write_atomic(&path, serde_json::to_string(&bad).unwrap().as_bytes()).unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Format(_))));

        let mut wrong_version = m;
        wrong_version.version = 99;
        write_atomic(&path, serde_json::to_string(&wrong_version).unwrap().as_bytes()).unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Format(_))));
    }

    #[test]
    fn plots_are_deterministic_and_carry_the_hash() {
        let series = vec![
            PlotSeries {
                name: "pidmd".into(),
                color: method_color("pidmd").into(),
                points: vec![(0.01, Some(1e-3)), (0.02, Some(2e-4)), (0.03, None)],
            },
            PlotSeries {
                name: "dmd".into(),
                color: method_color("dmd").into(),
                points: vec![(0.01, Some(5e-4)), (0.02, Some(1e-4)), (0.03, Some(9e-5))],
            },
        ];
        let a = line_plot_svg("errors", "viscosity", "relative error", &series, "abc123");
        let b = line_plot_svg("errors", "viscosity", "relative error", &series, "abc123");
        assert_eq!(a, b);
        assert!(a.contains("config_hash=abc123"));
        assert!(a.contains("<polyline"));
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));

        let rows = vec![
            MethodSummary {
                method: "pidmd".into(),
                count: 4,
                diverged: 0,
                min: Some(1e-5),
                q1: Some(2e-5),
                median: Some(3e-5),
                q3: Some(5e-5),
                max: Some(8e-5),
            },
            MethodSummary {
                method: "rkoi".into(),
                count: 0,
                diverged: 4,
                min: None,
                q1: None,
                median: None,
                q3: None,
                max: None,
            },
        ];
        let box_a = box_plot_svg("summary", "relative error", &rows, "abc123");
        let box_b = box_plot_svg("summary", "relative error", &rows, "abc123");
        assert_eq!(box_a, box_b);
        assert!(box_a.contains("all diverged"));
        assert!(!box_a.contains("timestamp"));
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-12, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
