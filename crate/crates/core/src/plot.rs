//! Deterministic SVG charts for run artifacts.
//!
//! Every run yields three time-series charts per segment (flow, occupancy,
//! speed) and three per ramp (green duration, queue length, demand vs
//! admitted flow); a comparison adds one bar panel with TTS/TTD/MS per
//! run. The SVG is rendered by hand, with fixed canvas geometry and fixed
//! numeric formatting, so identical inputs give byte-identical files.

use crate::log::TrajectoryLog;
use crate::metrics::Comparison;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 780.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 360.0;
/// Long runs are thinned to at most this many points per series.
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = points.iter().copied().step_by(stride).collect();
    if let Some(&last) = points.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

fn fmt_tick(v: f64, range: f64) -> String {
    if range < 0.1 {
        format!("{v:.4}")
    } else if range < 10.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.1}")
    }
}

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<(String, Vec<(f64, f64)>)>,
}

impl Chart {
    fn render(&self) -> String {
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for (_, pts) in &self.series {
            for &(x, y) in pts {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
        if !xmin.is_finite() {
            (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
        }
        if xmax - xmin < 1e-12 {
            xmax = xmin + 1.0;
        }
        // Flat series still get a visible band around the value.
        if ymax - ymin < 1e-12 {
            ymin -= 1.0;
            ymax += 1.0;
        } else {
            let pad = (ymax - ymin) * 0.05;
            ymin -= pad;
            ymax += pad;
        }
        let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * (RIGHT - LEFT);
        let sy = |y: f64| BOTTOM - (y - ymin) / (ymax - ymin) * (BOTTOM - TOP);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        );
        let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
            esc(&self.title)
        );
        // Axes.
        let _ = writeln!(
            svg,
            "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"#333\"/>"
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"#333\"/>"
        );
        // Y ticks and grid.
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let v = ymin + f * (ymax - ymin);
            let y = sy(v);
            let _ = writeln!(
                svg,
                "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{RIGHT}\" y2=\"{y:.2}\" stroke=\"#ddd\" stroke-width=\"0.5\"/>"
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(v, ymax - ymin)
            );
        }
        // X ticks.
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let v = xmin + f * (xmax - xmin);
            let x = sx(v);
            let _ = writeln!(
                svg,
                "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.0}</text>",
                BOTTOM + 16.0,
                v
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"425\" y=\"392\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            esc(&self.x_label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"16\" y=\"200\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 200)\">{}</text>",
            esc(&self.y_label)
        );
        for (s, (label, pts)) in self.series.iter().enumerate() {
            let color = PALETTE[s % PALETTE.len()];
            let mut attr = String::new();
            for &(x, y) in &thin(pts) {
                let _ = write!(attr, "{:.2},{:.2} ", sx(x), sy(y));
            }
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                attr.trim_end()
            );
            if self.series.len() > 1 {
                let ly = TOP + 14.0 * s as f64;
                let _ = writeln!(
                    svg,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
                    RIGHT - 120.0,
                    ly
                );
                let _ = writeln!(
                    svg,
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                    RIGHT - 106.0,
                    ly + 9.0,
                    esc(label)
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), PlotError> {
    std::fs::write(path, content).map_err(|source| PlotError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Number of files [`emit_run_plots`] produces for a log of this shape.
pub fn expected_plot_count(n_segments: usize, n_ramps: usize) -> usize {
    3 * n_segments + 3 * n_ramps
}

/// Writes the per-entity time-series charts for one run into `dir`.
/// Returns the created paths in a fixed order.
pub fn emit_run_plots(log: &TrajectoryLog, dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let mut paths = Vec::new();
    let t: Vec<f64> = log.steps.iter().map(|s| s.t_s).collect();
    let series_of = |f: &dyn Fn(usize) -> f64| -> Vec<(f64, f64)> {
        t.iter().copied().zip((0..log.steps.len()).map(f)).collect()
    };
    for i in 0..log.n_segments() {
        let charts = [
            (
                format!("segment-{}-flow.svg", i + 1),
                format!("Segment {} outflow", i + 1),
                "flow [Veh/min]",
                series_of(&|k| log.steps[k].segments[i].q_out_vpm),
            ),
            (
                format!("segment-{}-occupancy.svg", i + 1),
                format!("Segment {} occupancy", i + 1),
                "occupancy [%]",
                series_of(&|k| log.steps[k].segments[i].to_pct),
            ),
            (
                format!("segment-{}-speed.svg", i + 1),
                format!("Segment {} speed", i + 1),
                "speed [km/h]",
                series_of(&|k| log.steps[k].segments[i].v_kmh),
            ),
        ];
        for (file, title, y_label, pts) in charts {
            let chart = Chart {
                title,
                x_label: "time [s]".into(),
                y_label: y_label.into(),
                series: vec![(String::new(), pts)],
            };
            let path = dir.join(file);
            write_file(&path, &chart.render())?;
            paths.push(path);
        }
    }
    for j in 0..log.n_ramps() {
        let green = Chart {
            title: format!("Ramp {} green duration", j + 1),
            x_label: "time [s]".into(),
            y_label: "green [s]".into(),
            series: vec![(String::new(), series_of(&|k| log.steps[k].ramps[j].gd_s))],
        };
        let queue = Chart {
            title: format!("Ramp {} queue", j + 1),
            x_label: "time [s]".into(),
            y_label: "queue [m]".into(),
            series: vec![(String::new(), series_of(&|k| log.steps[k].ramps[j].queue_m))],
        };
        let demand = Chart {
            title: format!("Ramp {} demand vs admitted", j + 1),
            x_label: "time [s]".into(),
            y_label: "flow [Veh/min]".into(),
            series: vec![
                (
                    "demand".into(),
                    series_of(&|k| log.steps[k].ramps[j].demand_vpm),
                ),
                (
                    "admitted".into(),
                    series_of(&|k| log.steps[k].ramps[j].admitted_vpm),
                ),
            ],
        };
        for (file, chart) in [
            (format!("ramp-{}-green.svg", j + 1), green),
            (format!("ramp-{}-queue.svg", j + 1), queue),
            (format!("ramp-{}-demand.svg", j + 1), demand),
        ] {
            let path = dir.join(file);
            write_file(&path, &chart.render())?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// One bar panel per metric (TTS, TTD, MS), one bar per run.
pub fn emit_comparison_plot(cmp: &Comparison, dir: &Path) -> Result<PathBuf, PlotError> {
    let panels = [
        ("TTS [Veh.h]", cmp.rows.iter().map(|r| r.tts_veh_h).collect::<Vec<_>>()),
        ("TTD [Veh.km]", cmp.rows.iter().map(|r| r.ttd_veh_km).collect()),
        ("MS [km/h]", cmp.rows.iter().map(|r| r.ms_kmh).collect()),
    ];
    let labels: Vec<&str> = cmp.rows.iter().map(|r| r.label.as_str()).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"320\" viewBox=\"0 0 960 320\">"
    );
    let _ = writeln!(svg, "<rect width=\"960\" height=\"320\" fill=\"white\"/>");
    for (p, (title, values)) in panels.iter().enumerate() {
        let x0 = 20.0 + p as f64 * 320.0;
        let plot_w = 280.0;
        let base_y = 270.0;
        let top_y = 50.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"32\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
            x0 + plot_w / 2.0,
            esc(title)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{x0}\" y1=\"{base_y}\" x2=\"{:.2}\" y2=\"{base_y}\" stroke=\"#333\"/>",
            x0 + plot_w
        );
        let vmax = values.iter().copied().fold(0.0_f64, f64::max);
        let n = values.len() as f64;
        let slot = plot_w / n;
        let bar_w = slot * 0.6;
        for (k, &v) in values.iter().enumerate() {
            let h = if vmax > 0.0 {
                (v / vmax) * (base_y - top_y)
            } else {
                0.0
            };
            let bx = x0 + k as f64 * slot + (slot - bar_w) / 2.0;
            let by = base_y - h;
            let color = PALETTE[k % PALETTE.len()];
            let _ = writeln!(
                svg,
                "<rect x=\"{bx:.2}\" y=\"{by:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" fill=\"{color}\"/>"
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.1}</text>",
                bx + bar_w / 2.0,
                by - 5.0,
                v
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                bx + bar_w / 2.0,
                base_y + 16.0,
                esc(labels[k])
            );
        }
    }
    svg.push_str("</svg>\n");
    let path = dir.join("comparison.svg");
    write_file(&path, &svg)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::{BoundarySample, RampSample, SegmentSample, StepRecord};
    use crate::metrics::{compare_runs, MetricsReport};

    fn demo_log(n_steps: usize, n_segments: usize, n_ramps: usize) -> TrajectoryLog {
        let steps = (0..n_steps)
            .map(|k| StepRecord {
                t_s: k as f64,
                segments: (0..n_segments)
                    .map(|i| SegmentSample {
                        rho_vpkm: 10.0 + (k + i) as f64 % 7.0,
                        q_out_vpm: 20.0 + k as f64 % 5.0,
                        to_pct: 5.0,
                        v_kmh: 90.0,
                    })
                    .collect(),
                ramps: (0..n_ramps)
                    .map(|_| RampSample {
                        gd_s: 29.0,
                        queue_m: k as f64,
                        admitted_vpm: 8.0,
                        demand_vpm: 9.0,
                    })
                    .collect(),
                boundary: BoundarySample {
                    inflow_demand_vpm: 40.0,
                    inflow_accepted_vpm: 40.0,
                    outflow_vpm: 40.0,
                },
            })
            .collect();
        TrajectoryLog {
            dt_s: 1.0,
            veh_size_km: 0.0055,
            segment_lengths_km: vec![1.0; n_segments],
            steps,
        }
    }

    #[test]
    fn run_plot_count_matches_the_formula() {
        let dir = tempfile::tempdir().unwrap();
        let log = demo_log(50, 3, 2);
        let paths = emit_run_plots(&log, dir.path()).unwrap();
        assert_eq!(paths.len(), expected_plot_count(3, 2));
        for p in &paths {
            let text = std::fs::read_to_string(p).unwrap();
            assert!(text.starts_with("<svg"), "{p:?}");
            assert!(text.trim_end().ends_with("</svg>"), "{p:?}");
            assert!(text.contains("<polyline"), "{p:?}");
            assert!(!text.contains("NaN"), "{p:?}");
        }
    }

    #[test]
    fn flat_series_still_renders() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = demo_log(20, 1, 1);
        for s in &mut log.steps {
            s.segments[0].q_out_vpm = 0.0;
            s.segments[0].rho_vpkm = 0.0;
            s.ramps[0].queue_m = 0.0;
        }
        let paths = emit_run_plots(&log, dir.path()).unwrap();
        assert_eq!(paths.len(), 6);
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(!text.contains("NaN"), "flat data must not divide by zero");
    }

    #[test]
    fn long_runs_are_thinned() {
        let dir = tempfile::tempdir().unwrap();
        let log = demo_log(10_000, 1, 0);
        let paths = emit_run_plots(&log, dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let points_attr = text
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let n_points = points_attr.split(' ').count();
        assert!(n_points <= MAX_POINTS + 1, "{n_points} points rendered");
    }

    #[test]
    fn identical_logs_render_identical_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let log = demo_log(123, 2, 1);
        let a = emit_run_plots(&log, dir_a.path()).unwrap();
        let b = emit_run_plots(&log, dir_b.path()).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(
                std::fs::read(pa).unwrap(),
                std::fs::read(pb).unwrap(),
                "plots must be deterministic"
            );
        }
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("not-a-dir");
        std::fs::write(&file, "x").unwrap();
        let log = demo_log(5, 1, 0);
        let err = emit_run_plots(&log, &file).unwrap_err();
        assert!(err.to_string().contains("not-a-dir"), "{err}");
    }

    #[test]
    fn comparison_panel_shows_each_run() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |label: &str, tts: f64| MetricsReport {
            label: label.into(),
            horizon_s: 100.0,
            tts_veh_h: tts,
            ttd_veh_km: 2.0 * tts,
            ms_kmh: 2.0,
            ramp_queue_max_m: vec![],
            ramp_queue_mean_m: vec![],
            seg_time_above_critical_min: vec![],
        };
        let cmp = compare_runs(&[mk("none", 10.0), mk("alinea", 8.0), mk("ip", 7.0)]).unwrap();
        let path = emit_comparison_plot(&cmp, dir.path()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for label in ["none", "alinea", "ip", "TTS", "TTD", "MS"] {
            assert!(text.contains(label), "missing {label}");
        }
        let rects = text.matches("<rect").count();
        // 1 background + 3 panels x 3 bars.
        assert_eq!(rects, 10);
    }
}
