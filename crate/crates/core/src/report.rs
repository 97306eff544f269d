//! Report tables (CSV), figures (SVG) and run manifests.
//!
//! Numbers in tables use six significant digits (shares excepted) so
//! re-runs are byte identical. Figures are plain SVG text with fixed colors and layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ReportError;
use crate::hint_metrics::{GroupedProportion, Metric};
use crate::progression::{Label, Rq1Aggregate};

pub const RQ1_ABSOLUTE_FILE: &str = "rq1_absolute.csv";
pub const RQ1_PROPORTIONAL_FILE: &str = "rq1_proportional.csv";
pub const RQ1_GREEN_STATS_FILE: &str = "rq1_green_stats.json";
pub const RQ2_FILE: &str = "rq2_overlap.csv";
pub const RQ3_FILE: &str = "rq3_resolution.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const GREEN: &str = "#4caf50";
pub const YELLOW: &str = "#ffc107";
pub const RED: &str = "#f44336";

pub fn label_color(label: Label) -> &'static str {
    match label {
        Label::Green => GREEN,
        Label::Yellow => YELLOW,
        Label::Red => RED,
    }
}

/// Formats like C's `%.6g`.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let fixed = format!("{:.*}", (5 - exp) as usize, x);
    trim_zeros(&fixed).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

/// Shares are written at full round-trip precision so each group of three
/// still sums to 1 after parsing; six digits would leave errors near 1e-6.
fn fmt_share(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn table_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Table {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| table_err(path, e))?;
    writer.write_record(header).map_err(|e| table_err(path, e))?;
    for row in rows {
        writer.write_record(&row).map_err(|e| table_err(path, e))?;
    }
    writer.flush().map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ReportError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| table_err(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| table_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1AbsoluteRow {
    pub term: String,
    pub problem: String,
    pub label: Label,
    pub avg_time_s: f64,
    pub avg_submissions: f64,
    pub n_students: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1ProportionalRow {
    pub term: String,
    pub problem: String,
    pub label: Label,
    pub time_share: Option<f64>,
    pub submission_share: Option<f64>,
    pub n_students: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub term: String,
    pub assignment: String,
    pub bucket: String,
    pub numerator: usize,
    pub denominator: usize,
    pub proportion: Option<f64>,
}

pub fn write_rq1_tables(aggregates: &[Rq1Aggregate], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut absolute = Vec::new();
    let mut proportional = Vec::new();
    for agg in aggregates {
        for l in &agg.labels {
            absolute.push(vec![
                agg.term_label.clone(),
                agg.problem_id.clone(),
                l.label.to_string(),
                fmt_sig6(l.avg_time_s),
                fmt_sig6(l.avg_submissions),
                agg.n_students.to_string(),
            ]);
            proportional.push(vec![
                agg.term_label.clone(),
                agg.problem_id.clone(),
                l.label.to_string(),
                fmt_share(l.time_share),
                fmt_share(l.submission_share),
                agg.n_students.to_string(),
            ]);
        }
    }
    let abs_path = dir.join(RQ1_ABSOLUTE_FILE);
    write_rows(
        &abs_path,
        &["term", "problem", "label", "avg_time_s", "avg_submissions", "n_students"],
        absolute,
    )?;
    let prop_path = dir.join(RQ1_PROPORTIONAL_FILE);
    write_rows(
        &prop_path,
        &["term", "problem", "label", "time_share", "submission_share", "n_students"],
        proportional,
    )?;
    Ok(vec![abs_path, prop_path])
}

pub fn write_bucket_table(
    term: &str,
    assignment: &str,
    buckets: &[GroupedProportion],
    path: &Path,
) -> Result<(), ReportError> {
    let rows = buckets
        .iter()
        .map(|b| {
            vec![
                term.to_string(),
                assignment.to_string(),
                b.bucket.clone(),
                b.numerator.to_string(),
                b.denominator.to_string(),
                fmt_opt(b.proportion),
            ]
        })
        .collect();
    write_rows(
        path,
        &["term", "assignment", "bucket", "numerator", "denominator", "proportion"],
        rows,
    )
}

pub fn read_rq1_absolute(path: &Path) -> Result<Vec<Rq1AbsoluteRow>, ReportError> {
    read_rows(path)
}

pub fn read_rq1_proportional(path: &Path) -> Result<Vec<Rq1ProportionalRow>, ReportError> {
    read_rows(path)
}

pub fn read_bucket_table(path: &Path) -> Result<Vec<BucketRow>, ReportError> {
    read_rows(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartMode {
    Absolute,
    Proportional,
}

impl ChartMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartMode::Absolute => "absolute",
            ChartMode::Proportional => "proportional",
        }
    }
}

/// One problem's stacked bar values, indexed green, yellow, red. A `None`
/// panel value means the bar is not drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedBar {
    pub problem: String,
    pub time: Option<[f64; 3]>,
    pub submissions: Option<[f64; 3]>,
}

/// Groups RQ1 table rows into per-term bars.
pub fn bars_from_absolute(rows: &[Rq1AbsoluteRow]) -> BTreeMap<String, Vec<StackedBar>> {
    let mut grouped: BTreeMap<String, BTreeMap<String, ([f64; 3], [f64; 3])>> = BTreeMap::new();
    for row in rows {
        let entry = grouped
            .entry(row.term.clone())
            .or_default()
            .entry(row.problem.clone())
            .or_default();
        entry.0[row.label.index()] = row.avg_time_s;
        entry.1[row.label.index()] = row.avg_submissions;
    }
    grouped
        .into_iter()
        .map(|(term, problems)| {
            let bars = problems
                .into_iter()
                .map(|(problem, (time, subs))| StackedBar {
                    problem,
                    time: Some(time),
                    submissions: Some(subs),
                })
                .collect();
            (term, bars)
        })
        .collect()
}

pub fn bars_from_proportional(rows: &[Rq1ProportionalRow]) -> BTreeMap<String, Vec<StackedBar>> {
    type Shares = [Option<f64>; 3];
    let mut grouped: BTreeMap<String, BTreeMap<String, (Shares, Shares)>> = BTreeMap::new();
    for row in rows {
        let entry = grouped
            .entry(row.term.clone())
            .or_default()
            .entry(row.problem.clone())
            .or_default();
        entry.0[row.label.index()] = row.time_share;
        entry.1[row.label.index()] = row.submission_share;
    }
    let complete = |s: Shares| -> Option<[f64; 3]> { Some([s[0]?, s[1]?, s[2]?]) };
    grouped
        .into_iter()
        .map(|(term, problems)| {
            let bars = problems
                .into_iter()
                .map(|(problem, (time, subs))| StackedBar {
                    problem,
                    time: complete(time),
                    submissions: complete(subs),
                })
                .collect();
            (term, bars)
        })
        .collect()
}

pub fn bars_from_aggregates(aggregates: &[Rq1Aggregate], mode: ChartMode) -> Vec<StackedBar> {
    aggregates
        .iter()
        .map(|agg| match mode {
            ChartMode::Absolute => StackedBar {
                problem: agg.problem_id.clone(),
                time: Some(agg.labels.clone().map(|l| l.avg_time_s)),
                submissions: Some(agg.labels.clone().map(|l| l.avg_submissions)),
            },
            ChartMode::Proportional => {
                let pick = |f: fn(&crate::progression::LabelAggregate) -> Option<f64>| {
                    Some([f(&agg.labels[0])?, f(&agg.labels[1])?, f(&agg.labels[2])?])
                };
                StackedBar {
                    problem: agg.problem_id.clone(),
                    time: pick(|l| l.time_share),
                    submissions: pick(|l| l.submission_share),
                }
            }
        })
        .collect()
}

const PLOT_HEIGHT: f64 = 200.0;
const TOP: f64 = 50.0;
const LEFT: f64 = 60.0;
const BAR_WIDTH: f64 = 36.0;
const BAR_STEP: f64 = 56.0;
const STACK_STEP: f64 = 90.0;
const MIN_WIDTH: f64 = 520.0;

fn px(x: f64) -> String {
    let s = format!("{x:.2}");
    trim_zeros(&s).to_string()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="11">"#,
        px(width),
        px(height),
        px(width),
        px(height)
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
}

/// Stacked green/yellow/red bars for time and submissions, one bar per
/// problem. Returns `None` when there is nothing to draw.
pub fn render_stacked_bars(term: &str, bars: &[StackedBar], mode: ChartMode) -> Option<String> {
    if bars.is_empty() {
        return None;
    }
    let panel_width = (LEFT + STACK_STEP * bars.len() as f64 + 20.0).max(MIN_WIDTH / 2.0);
    let width = 2.0 * panel_width;
    let missing = bars.iter().map(|b| usize::from(b.time.is_none()) + usize::from(b.submissions.is_none())).sum::<usize>();
    let height = TOP + PLOT_HEIGHT + 60.0 + 12.0 * missing as f64;
    let mut out = String::new();
    svg_open(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{} ({})</text>"#,
        px(width / 2.0),
        escape(term),
        mode.as_str()
    );
    let mut footnotes = Vec::new();
    let panels: [(&str, fn(&StackedBar) -> Option<[f64; 3]>); 2] =
        [("Time spent", |b| b.time), ("Submissions", |b| b.submissions)];
    for (p, (title, get)) in panels.iter().enumerate() {
        let x0 = p as f64 * panel_width;
        let base = TOP + PLOT_HEIGHT;
        let scale_max = match mode {
            ChartMode::Proportional => 1.0,
            ChartMode::Absolute => bars
                .iter()
                .filter_map(|b| get(b))
                .map(|v| v.iter().sum::<f64>())
                .fold(0.0, f64::max),
        };
        let _ = writeln!(out, r#"<g class="panel" data-panel="{}">"#, title.to_lowercase().replace(' ', "-"));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(x0 + panel_width / 2.0),
            px(TOP - 12.0),
            title
        );
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#333333"/>"##,
            px(x0 + LEFT - 6.0),
            px(base),
            px(x0 + panel_width - 10.0),
            px(base)
        );
        let top_label = match mode {
            ChartMode::Proportional => "1".to_string(),
            ChartMode::Absolute => fmt_sig6(scale_max),
        };
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            px(x0 + LEFT - 8.0),
            px(TOP + 4.0),
            top_label
        );
        for (i, bar) in bars.iter().enumerate() {
            let x = x0 + LEFT + STACK_STEP * i as f64;
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                px(x + BAR_WIDTH / 2.0),
                px(base + 16.0),
                escape(&bar.problem)
            );
            let Some(values) = get(bar) else {
                footnotes.push(format!("{}: {} not drawn (no data)", bar.problem, title.to_lowercase()));
                continue;
            };
            let mut y = base;
            for label in Label::ALL {
                let v = values[label.index()];
                if v <= 0.0 || scale_max <= 0.0 {
                    continue;
                }
                let h = v / scale_max * PLOT_HEIGHT;
                y -= h;
                let _ = writeln!(
                    out,
                    r#"<rect class="segment" data-label="{}" x="{}" y="{}" width="{}" height="{}" fill="{}"><title>{} {}: {}</title></rect>"#,
                    label,
                    px(x),
                    px(y),
                    px(BAR_WIDTH),
                    px(h),
                    label_color(label),
                    escape(&bar.problem),
                    label,
                    fmt_sig6(v)
                );
            }
        }
        let _ = writeln!(out, "</g>");
    }
    let legend_y = TOP + PLOT_HEIGHT + 30.0;
    for (i, (label, text)) in [
        (Label::Green, "fewer missing KCs"),
        (Label::Yellow, "same"),
        (Label::Red, "more missing KCs"),
    ]
    .iter()
    .enumerate()
    {
        let x = 20.0 + 160.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            px(x),
            px(legend_y),
            label_color(*label),
            px(x + 14.0),
            px(legend_y + 9.0),
            text
        );
    }
    for (i, note) in footnotes.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text class="footnote" x="{}" y="{}">{}</text>"#,
            px(LEFT),
            px(legend_y + 26.0 + 12.0 * i as f64),
            escape(note)
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}

/// One bar per length bucket at height = proportion, annotated with the
/// denominator. Buckets with no applicable hints are omitted with a
/// footnote. Returns `None` when no bucket has data.
pub fn render_grouped_bars(term: &str, buckets: &[GroupedProportion], metric: Metric) -> Option<String> {
    if buckets.iter().all(|b| b.proportion.is_none()) {
        return None;
    }
    let title = match metric {
        Metric::Top3 => "Hints addressing at least 1 of the top-3 missing KCs",
        Metric::Resolved => "Hints addressing at least 1 KC resolved next",
    };
    let width = (LEFT + BAR_STEP * buckets.len() as f64 + 30.0).max(MIN_WIDTH);
    let empty = buckets.iter().filter(|b| b.proportion.is_none()).count();
    let height = TOP + PLOT_HEIGHT + 50.0 + 12.0 * empty as f64;
    let base = TOP + PLOT_HEIGHT;
    let mut out = String::new();
    svg_open(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{} ({})</text>"#,
        px(width / 2.0),
        title,
        escape(term)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#333333"/>"##,
        px(LEFT - 6.0),
        px(base),
        px(width - 10.0),
        px(base)
    );
    for (tick, y) in [("0", base), ("0.5", base - PLOT_HEIGHT / 2.0), ("1", TOP)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            px(LEFT - 8.0),
            px(y + 4.0),
            tick
        );
    }
    let mut footnotes = Vec::new();
    for (i, b) in buckets.iter().enumerate() {
        let x = LEFT + BAR_STEP * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(x + BAR_WIDTH / 2.0),
            px(base + 16.0),
            escape(&b.bucket)
        );
        let Some(p) = b.proportion else {
            footnotes.push(format!("bucket {}: no applicable hints", b.bucket));
            continue;
        };
        let h = p.clamp(0.0, 1.0) * PLOT_HEIGHT;
        let _ = writeln!(
            out,
            r##"<rect class="bar" data-bucket="{}" x="{}" y="{}" width="{}" height="{}" fill="#3f6fb5"><title>{}/{}</title></rect>"##,
            escape(&b.bucket),
            px(x),
            px(base - h),
            px(BAR_WIDTH),
            px(h),
            b.numerator,
            b.denominator
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">n={}</text>"#,
            px(x + BAR_WIDTH / 2.0),
            px(base - h - 4.0),
            b.denominator
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">hint KC-list length</text>"#,
        px(width / 2.0),
        px(base + 32.0)
    );
    for (i, note) in footnotes.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text class="footnote" x="{}" y="{}">{}</text>"#,
            px(LEFT),
            px(base + 46.0 + 12.0 * i as f64),
            escape(note)
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn file_sha256(path: &Path) -> Result<String, ReportError> {
    let bytes = std::fs::read(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance record written next to every set of analysis outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub config_hashes: Vec<FileDigest>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>, ReportError> {
        let mut out = Vec::new();
        for path in paths {
            if path.is_dir() {
                let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                    .map_err(|source| ReportError::Io {
                        path: path.clone(),
                        source,
                    })?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file())
                    .collect();
                entries.sort();
                out.extend(Self::digests(&entries)?);
            } else {
                out.push(FileDigest {
                    path: path.display().to_string(),
                    sha256: file_sha256(path)?,
                });
            }
        }
        Ok(out)
    }

    /// Writes `manifest.json` into `dir`, replacing any earlier one.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, ReportError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progression::{aggregate_rq1, ProgressionPair, DEFAULT_IDLE_CAP_SECONDS};

    #[test]
    fn sig6_matches_printf() {
        let cases = [
            (300.0, "300"),
            (0.5, "0.5"),
            (1.0 / 3.0, "0.333333"),
            (1_234_567.0, "1.23457e+06"),
            (0.000_123_4, "0.0001234"),
            (1e-5, "1e-05"),
            (2.0 / 3.0, "0.666667"),
            (123_456.7, "123457"),
            (-0.5, "-0.5"),
            (999_999.5, "1e+06"),
            (0.1 + 0.2, "0.3"),
            (1e16, "1e+16"),
            (1.0, "1"),
            (100_000.0, "100000"),
            (1e-4, "0.0001"),
            (9.999_995e-5, "0.0001"),
            (0.0, "0"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_sig6(x), want, "{x}");
        }
    }

    fn example_aggregates() -> Vec<Rq1Aggregate> {
        let pairs = [
            ProgressionPair::new("s", "p1", "a", "b", 2, 1, 300.0, DEFAULT_IDLE_CAP_SECONDS),
            ProgressionPair::new("s", "p1", "b", "c", 1, 1, 420.0, DEFAULT_IDLE_CAP_SECONDS),
        ];
        aggregate_rq1(&pairs, &[], "F23").aggregates
    }

    fn rect_heights(svg: &str, panel: &str) -> Vec<f64> {
        let start = svg.find(&format!(r#"data-panel="{panel}""#)).unwrap();
        let end = start + svg[start..].find("</g>").unwrap();
        svg[start..end]
            .match_indices(r#"class="segment""#)
            .map(|(i, _)| {
                let rest = &svg[start + i..];
                let h = rest.find("height=\"").unwrap() + 8;
                let len = rest[h..].find('"').unwrap();
                rest[h..h + len].parse().unwrap()
            })
            .collect()
    }

    #[test]
    fn absolute_bar_segments_follow_values() {
        let bars = bars_from_aggregates(&example_aggregates(), ChartMode::Absolute);
        let svg = render_stacked_bars("F23", &bars, ChartMode::Absolute).unwrap();
        let heights = rect_heights(&svg, "time-spent");
        assert_eq!(heights.len(), 2);
        assert!((heights[0] / heights[1] - 300.0 / 420.0).abs() < 1e-3);
        assert!(svg.contains(GREEN) && svg.contains(YELLOW));
        assert_eq!(svg, render_stacked_bars("F23", &bars, ChartMode::Absolute).unwrap());
    }

    #[test]
    fn proportional_bars_fill_the_plot() {
        let bars = bars_from_aggregates(&example_aggregates(), ChartMode::Proportional);
        let svg = render_stacked_bars("F23", &bars, ChartMode::Proportional).unwrap();
        for panel in ["time-spent", "submissions"] {
            let total: f64 = rect_heights(&svg, panel).iter().sum();
            assert!((total - PLOT_HEIGHT).abs() < 0.02, "{panel}: {total}");
        }
        assert_eq!(render_stacked_bars("F23", &[], ChartMode::Absolute), None);
    }

    #[test]
    fn grouped_bars_omit_empty_buckets() {
        let buckets = vec![
            GroupedProportion {
                bucket: "1".into(),
                numerator: 1,
                denominator: 2,
                proportion: Some(0.5),
            },
            GroupedProportion {
                bucket: "2".into(),
                numerator: 3,
                denominator: 3,
                proportion: Some(1.0),
            },
            GroupedProportion {
                bucket: "3".into(),
                numerator: 0,
                denominator: 0,
                proportion: None,
            },
        ];
        let svg = render_grouped_bars("F23", &buckets, Metric::Top3).unwrap();
        assert_eq!(svg.matches(r#"class="bar""#).count(), 2);
        assert!(svg.contains(r#"height="100""#) && svg.contains(r#"height="200""#));
        assert!(svg.contains("bucket 3: no applicable hints"));
        assert!(svg.contains("n=2") && svg.contains("n=3"));
        assert_eq!(svg, render_grouped_bars("F23", &buckets, Metric::Top3).unwrap());
        assert_eq!(render_grouped_bars("F23", &buckets[2..], Metric::Top3), None);
    }

    #[test]
    fn tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let aggs = example_aggregates();
        write_rq1_tables(&aggs, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(RQ1_ABSOLUTE_FILE)).unwrap();
        assert_eq!(
            text,
            "term,problem,label,avg_time_s,avg_submissions,n_students\n\
             F23,p1,green,300,1,1\nF23,p1,yellow,420,1,1\nF23,p1,red,0,0,1\n"
        );
        let rows = read_rq1_proportional(&dir.path().join(RQ1_PROPORTIONAL_FILE)).unwrap();
        assert_eq!(rows[0].submission_share, Some(0.5));
        assert_eq!(rows[0].label, Label::Green);
        let from_csv = bars_from_absolute(&read_rq1_absolute(&dir.path().join(RQ1_ABSOLUTE_FILE)).unwrap());
        assert_eq!(from_csv["F23"], bars_from_aggregates(&aggs, ChartMode::Absolute));

        let path = dir.path().join(RQ2_FILE);
        let buckets = [GroupedProportion {
            bucket: "5+".into(),
            numerator: 0,
            denominator: 0,
            proportion: None,
        }];
        write_bucket_table("F23", "hw01", &buckets, &path).unwrap();
        let rows = read_bucket_table(&path).unwrap();
        assert_eq!(rows[0].proportion, None);
        assert_eq!(rows[0].bucket, "5+");
    }
}
