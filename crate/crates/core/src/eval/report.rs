//! Report files: a CSV of error statistics, a paper-style text table and
//! one SVG overlay per evaluated trajectory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::align::AlignedPairSet;
use super::stats::ErrorStats;
use crate::error::{Error, Result};

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TABLE: &str = "report.txt";
pub const CSV_HEADER: &str = "trajectory,sensor,mean_cm,sd_cm,median_cm,count,drops";

/// One scored trajectory of one sensor.
#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub trajectory: String,
    pub sensor: String,
    pub stats: ErrorStats,
    pub drops: usize,
    /// Aligned estimate and ground truth to draw, if any.
    pub overlay: Option<AlignedPairSet>,
}

/// Rounds to two significant figures but never drops integer digits:
/// 6.43 → "6.4", 0.0712 → "0.071", 127.4 → "127".
pub fn format_sig2(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.1}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn validate(entries: &[ReportEntry]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::Input("report needs at least one result".into()));
    }
    for (i, e) in entries.iter().enumerate() {
        for (field, v) in [("trajectory", &e.trajectory), ("sensor", &e.sensor)] {
            if v.trim().is_empty() {
                return Err(Error::Input(format!("entry {i}: empty {field} label")));
            }
            if v.contains([',', '\n', '"']) {
                return Err(Error::Input(format!("entry {i}: {field} label {v:?} contains a CSV delimiter")));
            }
        }
    }
    Ok(())
}

pub fn report_csv(entries: &[ReportEntry]) -> Result<String> {
    validate(entries)?;
    let mut out = format!("{CSV_HEADER}\n");
    for e in entries {
        let s = &e.stats;
        writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{},{}",
            e.trajectory,
            e.sensor,
            100.0 * s.mean,
            100.0 * s.sd,
            100.0 * s.median,
            s.count,
            e.drops
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// Table rows grouped by sensor in first-appearance order, formatted like
/// `RM3 & 6.4 & 4.9 & 5.2 \\`.
pub fn report_table(entries: &[ReportEntry]) -> Result<String> {
    validate(entries)?;
    let mut sensors: Vec<&str> = vec![];
    for e in entries {
        if !sensors.contains(&e.sensor.as_str()) {
            sensors.push(&e.sensor);
        }
    }
    let mut out = String::new();
    for sensor in sensors {
        writeln!(out, "% {sensor}").expect("writing to a String");
        out.push_str("Trajectory Name & Mean (cm) & SD (cm) & Median (cm) \\\\\n");
        for e in entries.iter().filter(|e| e.sensor == sensor) {
            let s = &e.stats;
            writeln!(
                out,
                "{} & {} & {} & {} \\\\",
                e.trajectory,
                format_sig2(100.0 * s.mean),
                format_sig2(100.0 * s.sd),
                format_sig2(100.0 * s.median)
            )
            .expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Top-view SVG of the ground truth (black) and the aligned estimate (red).
pub fn overlay_svg(title: &str, pairs: &AlignedPairSet) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 20.0;
    let all = pairs.est.iter().chain(&pairs.gt);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let k = (SIZE - 2.0 * PAD) / span;
    let polyline = |ps: &[crate::types::Position], color: &str| {
        let pts: Vec<String> = ps
            .iter()
            .map(|p| format!("{:.2},{:.2}", PAD + k * (p.x - x0), SIZE - PAD - k * (p.y - y0)))
            .collect();
        format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        )
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n  <title>{}</title>\n",
        xml_escape(title)
    );
    svg.push_str(&polyline(&pairs.gt, "black"));
    svg.push_str(&polyline(&pairs.est, "red"));
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Writes `report.csv`, `report.txt` and `overlay_<trajectory>_<sensor>.svg`
/// for every entry carrying overlay data. Returns the written paths.
pub fn write_report(dir: &Path, entries: &[ReportEntry]) -> Result<Vec<PathBuf>> {
    let csv = report_csv(entries)?;
    let table = report_table(entries)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![];
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    put(REPORT_CSV.into(), &csv)?;
    put(REPORT_TABLE.into(), &table)?;
    for e in entries {
        if let Some(pairs) = &e.overlay {
            let title = format!("{} / {}", e.trajectory, e.sensor);
            put(
                format!("overlay_{}_{}.svg", file_stem(&e.trajectory), file_stem(&e.sensor)),
                &overlay_svg(&title, pairs),
            )?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::align::Transform;
    use crate::eval::stats::Projection;
    use crate::types::Position;

    fn entry(name: &str, sensor: &str, cm: [f64; 3]) -> ReportEntry {
        ReportEntry {
            trajectory: name.into(),
            sensor: sensor.into(),
            stats: ErrorStats {
                mean: cm[0] / 100.0,
                sd: cm[1] / 100.0,
                median: cm[2] / 100.0,
                count: 10,
                projection: Projection::TwoD,
            },
            drops: 0,
            overlay: None,
        }
    }

    #[test]
    fn table_row_matches_the_paper_format() {
        let t = report_table(&[entry("RM3", "audio", [6.4, 4.9, 5.2])]).unwrap();
        assert!(t.lines().any(|l| l == "RM3 & 6.4 & 4.9 & 5.2 \\\\"), "{t}");
    }

    #[test]
    fn significant_figures() {
        assert_eq!(format_sig2(6.43), "6.4");
        assert_eq!(format_sig2(0.0712), "0.071");
        assert_eq!(format_sig2(14.6), "15");
        assert_eq!(format_sig2(127.4), "127");
        assert_eq!(format_sig2(0.0), "0.0");
    }

    #[test]
    fn csv_rows_keep_input_order() {
        let csv = report_csv(&[entry("b", "radio", [1.0, 0.0, 1.0]), entry("a", "radio", [2.0, 0.0, 2.0])]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("b,radio,1.0000,"));
        assert!(lines[2].starts_with("a,radio,2.0000,"));
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn empty_labels_are_rejected() {
        assert!(matches!(report_csv(&[entry("RM3", "", [1.0; 3])]), Err(Error::Input(_))));
        assert!(matches!(report_csv(&[entry(" ", "audio", [1.0; 3])]), Err(Error::Input(_))));
        assert!(matches!(report_csv(&[entry("a,b", "audio", [1.0; 3])]), Err(Error::Input(_))));
        assert!(matches!(report_csv(&[]), Err(Error::Input(_))));
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = entry("RM 3", "audio", [6.4, 4.9, 5.2]);
        let ps = vec![Position::new(0.0, 0.0, 0.0), Position::new(1.0, 1.0, 0.0)];
        e.overlay = Some(AlignedPairSet {
            t: vec![0.0, 1.0],
            est: ps.clone(),
            gt: ps,
            transform: Transform::identity(),
            drops: 0,
        });
        let paths = write_report(dir.path(), &[e]).unwrap();
        assert_eq!(paths.len(), 3);
        let svg = std::fs::read_to_string(dir.path().join("overlay_RM_3_audio.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
        // unwritable target surfaces the path
        let file = dir.path().join("report.csv");
        assert!(matches!(write_report(&file, &[entry("x", "y", [1.0; 3])]), Err(Error::Io { .. })));
    }
}
