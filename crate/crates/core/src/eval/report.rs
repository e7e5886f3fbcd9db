//! Cross-run reporting: per-dimension loss and informativity curves,
//! smoothed summaries, and small standalone SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{S2iError, S2iResult};
use crate::eval::metrics::{epoch_metrics, range_average, MaskRule};

/// One embedding width's training history.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionReport {
    pub f: usize,
    /// Per-epoch generator pixel loss.
    pub pixel_loss: Vec<f64>,
    /// Per class: (name, per-epoch informativity rate).
    pub informativity: Vec<(String, Vec<f64>)>,
    /// Epochs whose following epochs the mask rule may exclude.
    pub d_update_epochs: Vec<usize>,
}

fn write_series_csv(path: &Path, header: &str, series: &[(String, &[f64])]) -> S2iResult<()> {
    let epochs = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for e in 0..epochs {
        write!(out, "{}", e + 1).unwrap();
        for (_, v) in series {
            match v.get(e) {
                Some(x) => write!(out, ",{x}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| S2iError::io(path.display().to_string(), e))
}

/// Polyline plot of one or more series. One vertex per epoch per series;
/// fixed 640x360 canvas with a shared y-range.
pub fn svg_lines(series: &[(String, &[f64])]) -> S2iResult<String> {
    if series.is_empty() || series.iter().all(|(_, v)| v.is_empty()) {
        return Err(S2iError::Data("svg needs at least one non-empty series".into()));
    }
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut max_len = 0usize;
    for (_, v) in series {
        for &x in *v {
            if !x.is_finite() {
                return Err(S2iError::Data("svg series contains non-finite value".into()));
            }
            lo = lo.min(x);
            hi = hi.max(x);
        }
        max_len = max_len.max(v.len());
    }
    if hi == lo {
        hi = lo + 1.0;
    }
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    for (si, (name, v)) in series.iter().enumerate() {
        if v.is_empty() {
            continue;
        }
        let color = colors[si % colors.len()];
        let mut points = String::new();
        for (i, &x) in v.iter().enumerate() {
            let px = if max_len == 1 {
                pad
            } else {
                pad + (w - 2.0 * pad) * i as f64 / (max_len - 1) as f64
            };
            let py = h - pad - (h - 2.0 * pad) * (x - lo) / (hi - lo);
            write!(points, "{px:.2},{py:.2} ").unwrap();
        }
        write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            points.trim_end(),
            pad,
            14.0 + 14.0 * si as f64,
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes summary.csv plus per-dimension curve CSVs and SVGs.
///
/// The summary row per (f, class) carries the range-averaged informativity
/// and the peak of its trailing moving average, both computed on the masked
/// series.
pub fn emit_report(
    reports: &[DimensionReport],
    window: usize,
    range: (usize, usize),
    rule: &MaskRule,
    out_dir: &Path,
) -> S2iResult<()> {
    if reports.is_empty() {
        return Err(S2iError::Data("report needs at least one ledger".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| S2iError::io(out_dir.display().to_string(), e))?;

    let mut summary = String::from("f,class,general_avg,max_ma50\n");
    for rep in reports {
        if !rep.pixel_loss.is_empty() {
            write_series_csv(
                &out_dir.join(format!("pixel_f{:03}.csv", rep.f)),
                "epoch,l_g_pixel",
                &[("pixel".into(), rep.pixel_loss.as_slice())],
            )?;
            let svg = svg_lines(&[("pixel".into(), rep.pixel_loss.as_slice())])?;
            let path = out_dir.join(format!("pixel_f{:03}.svg", rep.f));
            fs::write(&path, svg).map_err(|e| S2iError::io(path.display().to_string(), e))?;
        }

        if rep.informativity.is_empty() {
            continue;
        }
        let mut curve_cols = Vec::new();
        let mut smoothed_cols: Vec<(String, Vec<f64>)> = Vec::new();
        for (class, rates) in &rep.informativity {
            let series = epoch_metrics(rates, window, &rep.d_update_epochs, rule)?;
            let avg = range_average(&series, range.0, range.1)?;
            let peak = series
                .smoothed
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            writeln!(summary, "{},{},{},{}", rep.f, class, avg, peak).unwrap();
            smoothed_cols.push((format!("{class}_ma"), series.smoothed));
            curve_cols.push((class.clone(), rates.as_slice()));
        }

        let mut header = String::from("epoch");
        for (name, _) in &curve_cols {
            write!(header, ",{name}").unwrap();
        }
        for (name, _) in &smoothed_cols {
            write!(header, ",{name}").unwrap();
        }
        let mut all_cols = curve_cols.clone();
        for (name, v) in &smoothed_cols {
            all_cols.push((name.clone(), v.as_slice()));
        }
        write_series_csv(
            &out_dir.join(format!("informativity_f{:03}.csv", rep.f)),
            &header,
            &all_cols,
        )?;
        let svg = svg_lines(&all_cols)?;
        let path = out_dir.join(format!("informativity_f{:03}.svg", rep.f));
        fs::write(&path, svg).map_err(|e| S2iError::io(path.display().to_string(), e))?;
    }

    let path = out_dir.join("summary.csv");
    fs::write(&path, summary).map_err(|e| S2iError::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(f: usize, epochs: usize) -> DimensionReport {
        DimensionReport {
            f,
            pixel_loss: (0..epochs).map(|e| 1.0 / (e + 1) as f64).collect(),
            informativity: vec![
                ("alarm".into(), (0..epochs).map(|e| e as f64 / epochs as f64).collect()),
                ("dog".into(), vec![0.5; epochs]),
            ],
            d_update_epochs: vec![],
        }
    }

    #[test]
    fn summary_has_expected_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let reports = [report(2, 20), report(8, 20)];
        emit_report(&reports, 5, (1, 20), &MaskRule::disabled(), dir.path()).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines[0], "f,class,general_avg,max_ma50");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("2,alarm,"));
        assert!(lines[4].starts_with("8,dog,"));
        // Constant 0.5 series: both stats collapse to 0.5 exactly.
        let dog: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(dog[2], "0.5");
        assert_eq!(dog[3], "0.5");
    }

    #[test]
    fn svg_vertex_count_matches_epochs() {
        let v: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let svg = svg_lines(&[("s".into(), v.as_slice())]).unwrap();
        let points = svg.split("points=\"").nth(1).unwrap();
        let points = points.split('"').next().unwrap();
        assert_eq!(points.split_whitespace().count(), 37);
    }

    #[test]
    fn empty_reports_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(&[], 5, (1, 10), &MaskRule::disabled(), dir.path())
            .err()
            .unwrap();
        assert!(err.to_string().contains("at least one ledger"), "{err}");
    }

    #[test]
    fn report_without_rates_still_writes_header_only_summary() {
        let dir = tempfile::tempdir().unwrap();
        let rep = DimensionReport {
            f: 4,
            pixel_loss: vec![1.0, 0.5],
            informativity: vec![],
            d_update_epochs: vec![],
        };
        emit_report(&[rep], 5, (1, 2), &MaskRule::disabled(), dir.path()).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary, "f,class,general_avg,max_ma50\n");
        assert!(dir.path().join("pixel_f004.csv").exists());
        assert!(dir.path().join("pixel_f004.svg").exists());
    }

    #[test]
    fn masking_flows_into_summary_statistics() {
        // One d-update epoch masks its successors, changing the averages.
        let rep = DimensionReport {
            f: 2,
            pixel_loss: vec![],
            informativity: vec![("c".into(), vec![0.1, 0.2, 0.9, 0.9, 0.3])],
            d_update_epochs: vec![2],
        };
        let dir = tempfile::tempdir().unwrap();
        emit_report(&[rep.clone()], 1, (1, 5), &MaskRule::epoch_cadence(), dir.path()).unwrap();
        let masked = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        emit_report(&[rep], 1, (1, 5), &MaskRule::disabled(), dir2.path()).unwrap();
        let unmasked = std::fs::read_to_string(dir2.path().join("summary.csv")).unwrap();
        assert_ne!(masked, unmasked);
        // Masked epochs 3 and 4 get the mean of epochs 1..2 = 0.15.
        // Series becomes [.1, .2, .15, .15, .3]; mean = 0.18.
        let row: Vec<&str> = masked.lines().nth(1).unwrap().split(',').collect();
        let avg: f64 = row[2].parse().unwrap();
        assert!((avg - 0.18).abs() < 1e-12, "avg {avg}");
    }
}
