//! Run metrics computed from trajectory logs.
//!
//! Three headline numbers summarize a run: Total Time Spent (TTS, Veh·h,
//! the time-integral of every vehicle stored on the mainline or waiting in
//! a ramp queue), Total Travel Distance (TTD, Veh·km, outflow times
//! segment length integrated over the run) and Mean Speed (MS = TTD/TTS,
//! km/h). The report also carries per-ramp queue statistics and, per
//! segment, the time spent above critical occupancy.

use crate::log::TrajectoryLog;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("log has no steps; nothing to report")]
    EmptyLog,
    #[error("expected {expected} critical-occupancy thresholds, got {got}")]
    ThresholdCount { expected: usize, got: usize },
    #[error("comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
}

/// Total Time Spent in Veh·h: vehicles on segments plus vehicles queued
/// at ramps, integrated over the run.
pub fn compute_tts(log: &TrajectoryLog) -> Result<f64, MetricsError> {
    if log.steps.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let dt_h = log.dt_s / 3600.0;
    let veh_per_m = 1.0 / (log.veh_size_km * 1000.0);
    let mut tts = 0.0;
    for step in &log.steps {
        let mut stored = 0.0;
        for (seg, length) in step.segments.iter().zip(&log.segment_lengths_km) {
            stored += seg.rho_vpkm * length;
        }
        for ramp in &step.ramps {
            stored += ramp.queue_m * veh_per_m;
        }
        tts += stored * dt_h;
    }
    Ok(tts)
}

/// Total Travel Distance in Veh·km: flow leaving each segment times the
/// segment length, integrated over the run.
pub fn compute_ttd(log: &TrajectoryLog) -> Result<f64, MetricsError> {
    if log.steps.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let dt_min = log.dt_s / 60.0;
    let mut ttd = 0.0;
    for step in &log.steps {
        for (seg, length) in step.segments.iter().zip(&log.segment_lengths_km) {
            ttd += seg.q_out_vpm * dt_min * length;
        }
    }
    Ok(ttd)
}

/// Mean speed in km/h; zero for an empty (TTS = 0) run by convention.
pub fn compute_ms(tts_veh_h: f64, ttd_veh_km: f64) -> f64 {
    if tts_veh_h > 0.0 {
        ttd_veh_km / tts_veh_h
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub label: String,
    pub horizon_s: f64,
    pub tts_veh_h: f64,
    pub ttd_veh_km: f64,
    pub ms_kmh: f64,
    /// Per ramp, largest queue seen during the run [m].
    pub ramp_queue_max_m: Vec<f64>,
    /// Per ramp, time-average queue [m].
    pub ramp_queue_mean_m: Vec<f64>,
    /// Per segment, minutes spent above critical occupancy.
    pub seg_time_above_critical_min: Vec<f64>,
}

impl MetricsReport {
    /// Summarizes a log. `critical_to_pct` holds one critical-occupancy
    /// threshold per segment, in the segment order of the log.
    pub fn from_log(
        label: &str,
        log: &TrajectoryLog,
        critical_to_pct: &[f64],
    ) -> Result<MetricsReport, MetricsError> {
        if log.steps.is_empty() {
            return Err(MetricsError::EmptyLog);
        }
        if critical_to_pct.len() != log.n_segments() {
            return Err(MetricsError::ThresholdCount {
                expected: log.n_segments(),
                got: critical_to_pct.len(),
            });
        }
        let tts = compute_tts(log)?;
        let ttd = compute_ttd(log)?;
        let n_ramps = log.n_ramps();
        let n_segs = log.n_segments();
        let mut queue_max = vec![0.0_f64; n_ramps];
        let mut queue_sum = vec![0.0_f64; n_ramps];
        let mut above = vec![0.0_f64; n_segs];
        for step in &log.steps {
            for (j, ramp) in step.ramps.iter().enumerate() {
                queue_max[j] = queue_max[j].max(ramp.queue_m);
                queue_sum[j] += ramp.queue_m;
            }
            for (i, seg) in step.segments.iter().enumerate() {
                if seg.to_pct > critical_to_pct[i] {
                    above[i] += log.dt_s / 60.0;
                }
            }
        }
        let n_steps = log.steps.len() as f64;
        Ok(MetricsReport {
            label: label.to_string(),
            horizon_s: log.horizon_s(),
            tts_veh_h: tts,
            ttd_veh_km: ttd,
            ms_kmh: compute_ms(tts, ttd),
            ramp_queue_max_m: queue_max,
            ramp_queue_mean_m: queue_sum.iter().map(|s| s / n_steps).collect(),
            seg_time_above_critical_min: above,
        })
    }

    /// Plain-text rendering of a single report.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("run: {}\n", self.label));
        out.push_str(&format!("horizon: {:.0} s\n", self.horizon_s));
        out.push_str(&format!("TTS: {:.3} Veh.h\n", self.tts_veh_h));
        out.push_str(&format!("TTD: {:.3} Veh.km\n", self.ttd_veh_km));
        out.push_str(&format!("MS:  {:.3} km/h\n", self.ms_kmh));
        for (j, (max, mean)) in self
            .ramp_queue_max_m
            .iter()
            .zip(&self.ramp_queue_mean_m)
            .enumerate()
        {
            out.push_str(&format!(
                "ramp {}: max queue {:.1} m, mean queue {:.1} m\n",
                j + 1,
                max,
                mean
            ));
        }
        for (i, minutes) in self.seg_time_above_critical_min.iter().enumerate() {
            out.push_str(&format!(
                "segment {}: {:.1} min above critical occupancy\n",
                i + 1,
                minutes
            ));
        }
        out
    }

    /// One CSV document per report: a metric per row.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("metric,entity,value\n");
        out.push_str(&format!("horizon_s,,{}\n", self.horizon_s));
        out.push_str(&format!("tts_veh_h,,{}\n", self.tts_veh_h));
        out.push_str(&format!("ttd_veh_km,,{}\n", self.ttd_veh_km));
        out.push_str(&format!("ms_kmh,,{}\n", self.ms_kmh));
        for (j, v) in self.ramp_queue_max_m.iter().enumerate() {
            out.push_str(&format!("queue_max_m,ramp {},{}\n", j + 1, v));
        }
        for (j, v) in self.ramp_queue_mean_m.iter().enumerate() {
            out.push_str(&format!("queue_mean_m,ramp {},{}\n", j + 1, v));
        }
        for (i, v) in self.seg_time_above_critical_min.iter().enumerate() {
            out.push_str(&format!("time_above_critical_min,segment {},{}\n", i + 1, v));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub tts_veh_h: f64,
    pub ttd_veh_km: f64,
    pub ms_kmh: f64,
    /// Percentage deltas against the baseline; `None` on the baseline row
    /// or when the baseline value is zero.
    pub d_tts_pct: Option<f64>,
    pub d_ttd_pct: Option<f64>,
    pub d_ms_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

fn pct_delta(baseline: f64, value: f64) -> Option<f64> {
    if baseline != 0.0 {
        Some((value - baseline) / baseline * 100.0)
    } else {
        None
    }
}

/// Side-by-side table of runs; the first report is the baseline the
/// percentage deltas refer to. Mismatched horizons do not abort the
/// comparison but are flagged in `warnings`.
pub fn compare_runs(reports: &[MetricsReport]) -> Result<Comparison, MetricsError> {
    if reports.len() < 2 {
        return Err(MetricsError::TooFewReports(reports.len()));
    }
    let base = &reports[0];
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(reports.len());
    for (k, r) in reports.iter().enumerate() {
        if (r.horizon_s - base.horizon_s).abs() > 1e-9 {
            warnings.push(format!(
                "horizon mismatch: {} covers {:.0} s but baseline {} covers {:.0} s",
                r.label, r.horizon_s, base.label, base.horizon_s
            ));
        }
        let (d_tts, d_ttd, d_ms) = if k == 0 {
            (None, None, None)
        } else {
            (
                pct_delta(base.tts_veh_h, r.tts_veh_h),
                pct_delta(base.ttd_veh_km, r.ttd_veh_km),
                pct_delta(base.ms_kmh, r.ms_kmh),
            )
        };
        rows.push(ComparisonRow {
            label: r.label.clone(),
            tts_veh_h: r.tts_veh_h,
            ttd_veh_km: r.ttd_veh_km,
            ms_kmh: r.ms_kmh,
            d_tts_pct: d_tts,
            d_ttd_pct: d_ttd,
            d_ms_pct: d_ms,
        });
    }
    Ok(Comparison {
        baseline: base.label.clone(),
        rows,
        warnings,
    })
}

fn fmt_delta(d: Option<f64>) -> String {
    match d {
        Some(v) => format!("{v:+.2}%"),
        None => "-".to_string(),
    }
}

impl Comparison {
    pub fn render_text(&self) -> String {
        let mut out = format!("baseline: {}\n", self.baseline);
        out.push_str(&format!(
            "{:<12} {:>12} {:>9} {:>12} {:>9} {:>9} {:>9}\n",
            "run", "TTS[Veh.h]", "dTTS", "TTD[Veh.km]", "dTTD", "MS[km/h]", "dMS"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<12} {:>12.3} {:>9} {:>12.3} {:>9} {:>9.3} {:>9}\n",
                r.label,
                r.tts_veh_h,
                fmt_delta(r.d_tts_pct),
                r.ttd_veh_km,
                fmt_delta(r.d_ttd_pct),
                r.ms_kmh,
                fmt_delta(r.d_ms_pct),
            ));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out =
            String::from("run,tts_veh_h,d_tts_pct,ttd_veh_km,d_ttd_pct,ms_kmh,d_ms_pct\n");
        for r in &self.rows {
            let d = |o: Option<f64>| o.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.label,
                r.tts_veh_h,
                d(r.d_tts_pct),
                r.ttd_veh_km,
                d(r.d_ttd_pct),
                r.ms_kmh,
                d(r.d_ms_pct),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::{BoundarySample, RampSample, SegmentSample, StepRecord, TrajectoryLog};

    fn uniform_log(
        n_steps: usize,
        dt_s: f64,
        rho: f64,
        q_out: f64,
        queue_m: f64,
    ) -> TrajectoryLog {
        let steps = (0..n_steps)
            .map(|k| StepRecord {
                t_s: k as f64 * dt_s,
                segments: vec![SegmentSample {
                    rho_vpkm: rho,
                    q_out_vpm: q_out,
                    to_pct: rho / 545.4545 * 100.0,
                    v_kmh: if rho > 0.0 { q_out * 60.0 / rho } else { 0.0 },
                }],
                ramps: vec![RampSample {
                    gd_s: 29.0,
                    queue_m,
                    admitted_vpm: 0.0,
                    demand_vpm: 0.0,
                }],
                boundary: BoundarySample {
                    inflow_demand_vpm: 0.0,
                    inflow_accepted_vpm: 0.0,
                    outflow_vpm: q_out,
                },
            })
            .collect();
        TrajectoryLog {
            dt_s,
            veh_size_km: 0.0055,
            segment_lengths_km: vec![1.0],
            steps,
        }
    }

    #[test]
    fn empty_traffic_scores_zero() {
        let log = uniform_log(10, 1.0, 0.0, 0.0, 0.0);
        assert_eq!(compute_tts(&log).unwrap(), 0.0);
        assert_eq!(compute_ttd(&log).unwrap(), 0.0);
        assert_eq!(compute_ms(0.0, 0.0), 0.0);
    }

    #[test]
    fn empty_log_is_an_error() {
        let log = TrajectoryLog {
            dt_s: 1.0,
            veh_size_km: 0.0055,
            segment_lengths_km: vec![1.0],
            steps: vec![],
        };
        assert!(matches!(compute_tts(&log), Err(MetricsError::EmptyLog)));
        assert!(matches!(compute_ttd(&log), Err(MetricsError::EmptyLog)));
    }

    #[test]
    fn hundred_vehicles_for_an_hour_is_hundred_veh_hours() {
        // 100 Veh on a 1 km segment (rho = 100), held for 3600 steps of 1 s.
        let log = uniform_log(3600, 1.0, 100.0, 0.0, 0.0);
        let tts = compute_tts(&log).unwrap();
        assert!((tts - 100.0).abs() < 1e-9, "{tts}");
    }

    #[test]
    fn steady_flow_accumulates_distance() {
        // 60 Veh/min through 1 km for 60 min -> 3600 Veh.km.
        let log = uniform_log(3600, 1.0, 60.0, 60.0, 0.0);
        let ttd = compute_ttd(&log).unwrap();
        assert!((ttd - 3600.0).abs() < 1e-9, "{ttd}");
    }

    #[test]
    fn mean_speed_examples() {
        assert_eq!(compute_ms(100.0, 6000.0), 60.0);
        assert_eq!(compute_ms(0.0, 0.0), 0.0);
    }

    #[test]
    fn constant_speed_log_reports_that_speed() {
        // rho = 50, v = 80 -> q_out = rho*v/60; MS must equal v.
        let q = 50.0 * 80.0 / 60.0;
        let log = uniform_log(600, 1.0, 50.0, q, 0.0);
        let tts = compute_tts(&log).unwrap();
        let ttd = compute_ttd(&log).unwrap();
        assert!((compute_ms(tts, ttd) - 80.0).abs() < 1e-9);
    }

    #[test]
    fn three_step_log_matches_hand_sum() {
        // Hand spreadsheet: dt = 30 s, one segment of 2 km, one ramp.
        // step | rho | q_out | queue_m
        //    0 |  10 |  12.0 |    0.0
        //    1 |  20 |  18.0 |   55.0  (= 10 Veh at 5.5 m)
        //    2 |  15 |  24.0 |  110.0  (= 20 Veh)
        // TTS = [(10*2+0) + (20*2+10) + (15*2+20)]*30/3600
        //     = [20 + 50 + 50]/120 = 1.0 Veh.h
        // TTD = (12+18+24)*0.5*2 = 54 Veh.km
        let rows = [(10.0, 12.0, 0.0), (20.0, 18.0, 55.0), (15.0, 24.0, 110.0)];
        let steps = rows
            .iter()
            .enumerate()
            .map(|(k, &(rho, q, queue_m))| StepRecord {
                t_s: k as f64 * 30.0,
                segments: vec![SegmentSample {
                    rho_vpkm: rho,
                    q_out_vpm: q,
                    to_pct: 10.0,
                    v_kmh: 50.0,
                }],
                ramps: vec![RampSample {
                    gd_s: 20.0,
                    queue_m,
                    admitted_vpm: 1.0,
                    demand_vpm: 2.0,
                }],
                boundary: BoundarySample {
                    inflow_demand_vpm: 0.0,
                    inflow_accepted_vpm: 0.0,
                    outflow_vpm: q,
                },
            })
            .collect();
        let log = TrajectoryLog {
            dt_s: 30.0,
            veh_size_km: 0.0055,
            segment_lengths_km: vec![2.0],
            steps,
        };
        let tts = compute_tts(&log).unwrap();
        let ttd = compute_ttd(&log).unwrap();
        assert!((tts - 1.0).abs() < 1e-12, "{tts}");
        assert!((ttd - 54.0).abs() < 1e-12, "{ttd}");
    }

    #[test]
    fn report_tracks_queues_and_critical_time() {
        let mut log = uniform_log(4, 60.0, 100.0, 30.0, 0.0);
        log.steps[1].ramps[0].queue_m = 40.0;
        log.steps[2].ramps[0].queue_m = 100.0;
        log.steps[2].segments[0].to_pct = 25.0;
        log.steps[3].segments[0].to_pct = 30.0;
        let report = MetricsReport::from_log("unit", &log, &[20.0]).unwrap();
        assert_eq!(report.ramp_queue_max_m, vec![100.0]);
        assert_eq!(report.ramp_queue_mean_m, vec![35.0]);
        assert_eq!(report.seg_time_above_critical_min, vec![2.0]);
        assert!((report.ms_kmh * report.tts_veh_h - report.ttd_veh_km).abs() < 1e-9);
    }

    #[test]
    fn appending_queue_only_records_increases_tts() {
        let log = uniform_log(10, 1.0, 5.0, 3.0, 0.0);
        let base = compute_tts(&log).unwrap();
        let mut longer = log.clone();
        for k in 0..5 {
            longer.steps.push(StepRecord {
                t_s: (10 + k) as f64,
                segments: vec![SegmentSample {
                    rho_vpkm: 0.0,
                    q_out_vpm: 0.0,
                    to_pct: 0.0,
                    v_kmh: 0.0,
                }],
                ramps: vec![RampSample {
                    gd_s: 15.0,
                    queue_m: 50.0,
                    admitted_vpm: 0.0,
                    demand_vpm: 5.0,
                }],
                boundary: BoundarySample {
                    inflow_demand_vpm: 0.0,
                    inflow_accepted_vpm: 0.0,
                    outflow_vpm: 0.0,
                },
            });
        }
        let grown = compute_tts(&longer).unwrap();
        assert!(grown > base, "queue time must add to TTS");
    }

    #[test]
    fn comparison_reports_deltas_against_first() {
        let mk = |label: &str, tts: f64, ttd: f64| MetricsReport {
            label: label.into(),
            horizon_s: 600.0,
            tts_veh_h: tts,
            ttd_veh_km: ttd,
            ms_kmh: compute_ms(tts, ttd),
            ramp_queue_max_m: vec![],
            ramp_queue_mean_m: vec![],
            seg_time_above_critical_min: vec![],
        };
        let cmp = compare_runs(&[mk("none", 100.0, 5000.0), mk("ip", 80.0, 5000.0)]).unwrap();
        assert_eq!(cmp.baseline, "none");
        assert_eq!(cmp.rows[0].d_tts_pct, None);
        let d = cmp.rows[1].d_tts_pct.unwrap();
        assert!((d + 20.0).abs() < 1e-12, "{d}");
        assert!(cmp.warnings.is_empty());

        let identical = compare_runs(&[mk("a", 50.0, 100.0), mk("b", 50.0, 100.0)]).unwrap();
        assert_eq!(identical.rows[1].d_tts_pct, Some(0.0));
        assert_eq!(identical.rows[1].d_ms_pct, Some(0.0));

        let mut late = mk("late", 50.0, 100.0);
        late.horizon_s = 1200.0;
        let warned = compare_runs(&[mk("a", 50.0, 100.0), late]).unwrap();
        assert_eq!(warned.warnings.len(), 1);
        assert!(warned.warnings[0].contains("horizon"), "{:?}", warned.warnings);

        assert!(matches!(
            compare_runs(&[mk("solo", 1.0, 1.0)]),
            Err(MetricsError::TooFewReports(1))
        ));
    }

    #[test]
    fn renderings_contain_the_numbers() {
        let report = MetricsReport {
            label: "demo".into(),
            horizon_s: 120.0,
            tts_veh_h: 12.5,
            ttd_veh_km: 625.0,
            ms_kmh: 50.0,
            ramp_queue_max_m: vec![80.0],
            ramp_queue_mean_m: vec![12.0],
            seg_time_above_critical_min: vec![3.5],
        };
        let text = report.render_text();
        assert!(text.contains("TTS: 12.500"), "{text}");
        assert!(text.contains("MS:  50.000"), "{text}");
        let csv = report.render_csv();
        assert!(csv.starts_with("metric,entity,value\n"), "{csv}");
        assert!(csv.contains("queue_max_m,ramp 1,80"), "{csv}");

        let cmp = compare_runs(&[report.clone(), report]).unwrap();
        let table = cmp.render_text();
        assert!(table.contains("baseline: demo"), "{table}");
        let csv = cmp.render_csv();
        assert!(csv.contains("demo,12.5,"), "{csv}");
    }
}
