//! Metrics files, figures and per-frame search spaces.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::Value;

use super::pipeline::{validate_report, MetricsReport, RunOutput};
use crate::beamnet::write_history_csv;
use crate::error::Result;
use crate::geometry::regions_svg;

/// Flatten a JSON value into dotted `(key, value)` rows in document order.
/// Array elements are keyed by their `name` field when they have one.
pub fn flatten_metrics(v: &Value) -> Vec<(String, String)> {
    fn go(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => {
                for (k, v) in m {
                    go(&key(k), v, out);
                }
            }
            Value::Array(a) => {
                for (i, v) in a.iter().enumerate() {
                    let k = match v.get("name").and_then(Value::as_str) {
                        Some(n) => n.to_string(),
                        None => i.to_string(),
                    };
                    go(&key(&k), v, out);
                }
            }
            Value::String(s) if !prefix.ends_with(".name") => out.push((prefix.to_string(), s.clone())),
            Value::String(_) => {}
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    go("", v, &mut out);
    out
}

/// Horizontal bar chart of named rates in [0, 1].
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)]) -> String {
    let (w, row, left) = (480.0, 22.0, 170.0);
    let h = 40.0 + row * bars.len() as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    s.push_str(&format!("<text x=\"8\" y=\"18\" font-size=\"13\">{title}</text>\n"));
    let span = w - left - 50.0;
    for (i, (name, v)) in bars.iter().enumerate() {
        let y = 30.0 + row * i as f64;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{name}</text>\n",
            left - 6.0,
            y + 13.0
        ));
        s.push_str(&format!(
            "<rect x=\"{left}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"16\" fill=\"#4a7ab5\"/>\n",
            span * v.clamp(0.0, 1.0)
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{v:.3}</text>\n",
            left + span * v.clamp(0.0, 1.0) + 4.0,
            y + 13.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn accuracy_bars(r: &MetricsReport) -> Vec<(String, f64)> {
    let mut bars = vec![
        ("gt top-1".to_string(), r.beam_gt.top1),
        ("gt top-5".to_string(), r.beam_gt.top5),
        ("transfer top-1".to_string(), r.beam_gt_transfer.top1),
        ("transfer top-5".to_string(), r.beam_gt_transfer.top5),
        ("end-to-end top-1".to_string(), r.end_to_end.all.top1),
        ("end-to-end top-5".to_string(), r.end_to_end.all.top5),
        ("identification m=5".to_string(), r.identification.m5),
    ];
    for a in &r.ablations {
        bars.push((format!("ablation {} top-1", a.name), a.top1));
    }
    for a in &r.id_ablations {
        bars.push((a.name.clone(), a.accuracy));
    }
    bars
}

/// Write metrics.json, metrics.csv, history.csv, searchspaces.jsonl and the SVG figures.
pub fn emit_report(out: &Path, run: &RunOutput) -> Result<()> {
    validate_report(&run.report)?;
    fs::create_dir_all(out)?;
    let value = serde_json::to_value(&run.report)?;
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&value)? + "\n")?;

    let mut w = BufWriter::new(File::create(out.join("metrics.csv"))?);
    writeln!(w, "metric,value")?;
    for (k, v) in flatten_metrics(&value) {
        writeln!(w, "{k},{v}")?;
    }
    w.flush()?;

    write_history_csv(BufWriter::new(File::create(out.join("history.csv"))?), &run.history)?;

    let mut w = BufWriter::new(File::create(out.join("searchspaces.jsonl"))?);
    for s in &run.test_spaces {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    fs::write(out.join("accuracy.svg"), bar_chart_svg("Beam and identification accuracy", &accuracy_bars(&run.report)))?;
    let cam = &run.world_a.config.camera;
    let fill = run.test_spaces.first().map(|s| s.bits.clone()).unwrap_or_default();
    fs::write(
        out.join("regions_fan.svg"),
        regions_svg(&run.world_a.fan, cam.width_px, cam.height_px, &fill),
    )?;
    fs::write(
        out.join("regions_strip.svg"),
        regions_svg(&run.world_a.strip, cam.width_px, cam.height_px, &[]),
    )?;
    Ok(())
}
