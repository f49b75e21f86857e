//! Reliability, accuracy and latency of a recorded run.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::pipeline::{FrameRecord, Trace};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trace has no laser-on frames")]
    NoLaserFrames,
    #[error("trace has no frames with both ground truth and a mapped position")]
    NoGroundTruth,
    #[error("trace has no laser activations")]
    NoActivations,
}

/// Fraction of laser-on frames in which a spot was detected.
pub fn reliability(trace: &Trace) -> Result<f64, MetricsError> {
    let on = trace.records.iter().filter(|r| r.laser_on).count();
    if on == 0 {
        return Err(MetricsError::NoLaserFrames);
    }
    let hit = trace
        .records
        .iter()
        .filter(|r| r.laser_on && r.detected())
        .count();
    Ok(hit as f64 / on as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub max: f64,
}

impl ErrorStats {
    fn add(&mut self, e: f64) {
        self.mean = (self.mean * self.count as f64 + e) / (self.count + 1) as f64;
        self.count += 1;
        self.max = self.max.max(e);
    }
}

/// Mapping error against ground truth, overall and per cell of a 3x3
/// screen grid (row-major, top-left first).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub global: ErrorStats,
    pub regions: [ErrorStats; 9],
}

impl AccuracyReport {
    /// Largest per-region maximum.
    pub fn worst(&self) -> f64 {
        self.global.max
    }
}

fn grid_cell(trace: &Trace, x: f64, y: f64) -> usize {
    let col = ((x / (trace.screen.w() / 3.0)).floor() as i64).clamp(0, 2) as usize;
    let row = ((y / (trace.screen.h() / 3.0)).floor() as i64).clamp(0, 2) as usize;
    row * 3 + col
}

pub fn accuracy(trace: &Trace) -> Result<AccuracyReport, MetricsError> {
    let mut global = ErrorStats::default();
    let mut regions = [ErrorStats::default(); 9];
    for r in &trace.records {
        let (Some(truth), Some(mapped)) = (r.truth_screen, r.mapped) else {
            continue;
        };
        let e = truth.distance(&mapped);
        global.add(e);
        regions[grid_cell(trace, truth.x, truth.y)].add(e);
    }
    if global.count == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    Ok(AccuracyReport { global, regions })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    /// Frames from activation to arrival, one per completed activation.
    pub samples: Vec<u64>,
    /// Activations where the cursor never arrived while the laser stayed on.
    pub timeouts: usize,
    pub min_frames: Option<u64>,
    pub max_frames: Option<u64>,
    pub mean_frames: Option<f64>,
    pub min_ms: Option<f64>,
    pub max_ms: Option<f64>,
    pub mean_ms: Option<f64>,
}

fn arrived(r: &FrameRecord, vicinity: (f64, f64)) -> bool {
    match (r.truth_screen, r.mapped) {
        (Some(t), Some(m)) => (t.x - m.x).abs() <= vicinity.0 && (t.y - m.y).abs() <= vicinity.1,
        _ => false,
    }
}

/// Frames from each laser activation until the mapped cursor enters the
/// vicinity box around the true spot.
pub fn latency(trace: &Trace) -> Result<LatencyReport, MetricsError> {
    let mut samples = Vec::new();
    let mut timeouts = 0;
    let mut activations = 0;
    let mut pending: Option<u64> = None;
    let mut prev_on = false;

    for r in &trace.records {
        if r.laser_on && !prev_on {
            activations += 1;
            pending = Some(r.frame);
        }
        if !r.laser_on && pending.take().is_some() {
            timeouts += 1;
        }
        if let Some(start) = pending {
            if arrived(r, trace.vicinity) {
                samples.push(r.frame - start);
                pending = None;
            }
        }
        prev_on = r.laser_on;
    }
    if pending.is_some() {
        timeouts += 1;
    }
    if activations == 0 {
        return Err(MetricsError::NoActivations);
    }

    let ms = |f: f64| f * 1000.0 / trace.fps;
    let min = samples.iter().copied().min();
    let max = samples.iter().copied().max();
    let mean = (!samples.is_empty())
        .then(|| samples.iter().sum::<u64>() as f64 / samples.len() as f64);
    Ok(LatencyReport {
        timeouts,
        min_frames: min,
        max_frames: max,
        mean_frames: mean,
        min_ms: min.map(|v| ms(v as f64)),
        max_ms: max.map(|v| ms(v as f64)),
        mean_ms: mean.map(ms),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComputeTiming {
    pub frames: usize,
    pub median_ms: f64,
    pub max_ms: f64,
}

/// Summary of one run. A criterion that cannot be computed for this trace
/// (say, latency with no activations) is `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub reliability: Option<f64>,
    pub accuracy: Option<AccuracyReport>,
    pub latency: Option<LatencyReport>,
    pub compute: Option<ComputeTiming>,
}

pub fn compute_timing(trace: &Trace) -> Option<ComputeTiming> {
    let mut ms: Vec<f64> = trace
        .records
        .iter()
        .map(|r| r.compute_ns as f64 / 1e6)
        .collect();
    if ms.is_empty() {
        return None;
    }
    ms.sort_by(f64::total_cmp);
    let mid = ms.len() / 2;
    let median = if ms.len().is_multiple_of(2) {
        (ms[mid - 1] + ms[mid]) / 2.0
    } else {
        ms[mid]
    };
    Some(ComputeTiming {
        frames: ms.len(),
        median_ms: median,
        max_ms: *ms.last().unwrap(),
    })
}

impl MetricsReport {
    pub fn from_trace(trace: &Trace) -> Self {
        Self {
            frames: trace.records.len(),
            reliability: reliability(trace).ok(),
            accuracy: accuracy(trace).ok(),
            latency: latency(trace).ok(),
            compute: compute_timing(trace),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table: one row per criterion, then the accuracy grid.
    pub fn to_table(&self) -> String {
        let na = || "n/a".to_string();
        let rel = self
            .reliability
            .map(|r| format!("{:.1} %", r * 100.0))
            .unwrap_or_else(na);
        let acc = self
            .accuracy
            .as_ref()
            .map(|a| {
                format!(
                    "{:.2} screen pixels (worst case), {:.2} mean",
                    a.global.max, a.global.mean
                )
            })
            .unwrap_or_else(na);
        let lat = self
            .latency
            .as_ref()
            .and_then(|l| {
                Some(format!(
                    "{:.0}/{:.0}/{:.0} ms (min/max/average), {} timeouts",
                    l.min_ms?, l.max_ms?, l.mean_ms?, l.timeouts
                ))
            })
            .unwrap_or_else(na);
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} Results", "Criteria");
        let _ = writeln!(s, "{:<12} {}", "Reliability", rel);
        let _ = writeln!(s, "{:<12} {}", "Accuracy", acc);
        let _ = writeln!(s, "{:<12} {}", "Latency", lat);
        if let Some(c) = &self.compute {
            let _ = writeln!(
                s,
                "{:<12} {:.3} ms median, {:.3} ms max over {} frames",
                "Compute", c.median_ms, c.max_ms, c.frames
            );
        }
        if let Some(a) = &self.accuracy {
            let _ = writeln!(s, "\nAccuracy by screen region (max / mean px):");
            for row in 0..3 {
                let cells: Vec<String> = (0..3)
                    .map(|col| {
                        let r = &a.regions[row * 3 + col];
                        if r.count == 0 {
                            format!("{:>15}", "-")
                        } else {
                            format!("{:>7.2} / {:<5.2}", r.max, r.mean)
                        }
                    })
                    .collect();
                let _ = writeln!(s, "  {}", cells.join("  "));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Mode;
    use crate::geom::{ScreenPoint, Size};

    fn rec(frame: u64, on: bool, detected: bool, truth: Option<(f64, f64)>, mapped: Option<(f64, f64)>) -> FrameRecord {
        use crate::geom::CameraPoint;
        use crate::spot::{BoundingBox, SpotDetection};
        FrameRecord {
            frame,
            laser_on: on,
            truth_screen: truth.map(ScreenPoint::from),
            truth_camera: None,
            detection: detected.then_some(SpotDetection {
                centroid: CameraPoint::new(0.0, 0.0),
                n: 1,
                bbox: BoundingBox { min_col: 0, min_row: 0, max_col: 0, max_row: 0 },
            }),
            in_roi: mapped.is_some(),
            mapped: mapped.map(ScreenPoint::from),
            region: None,
            mode: Mode::Normal,
            events: vec![],
            compute_ns: 1000 * frame,
        }
    }

    fn trace(records: Vec<FrameRecord>) -> Trace {
        Trace {
            screen: Size::new(1024, 768),
            fps: 30.0,
            vicinity: (20.48, 15.36),
            records,
        }
    }

    #[test]
    fn reliability_counts() {
        let all: Vec<_> = (0..10).map(|f| rec(f, true, true, None, None)).collect();
        assert_eq!(reliability(&trace(all)).unwrap(), 1.0);
        let nine: Vec<_> = (0..10).map(|f| rec(f, true, f != 3, None, None)).collect();
        assert_eq!(reliability(&trace(nine)).unwrap(), 0.9);
        let off: Vec<_> = (0..3).map(|f| rec(f, false, true, None, None)).collect();
        assert_eq!(reliability(&trace(off)), Err(MetricsError::NoLaserFrames));
    }

    #[test]
    fn reliability_of_doubled_trace_is_unchanged() {
        let recs: Vec<_> = (0..7).map(|f| rec(f, f % 3 != 0, f % 2 == 0, None, None)).collect();
        let once = reliability(&trace(recs.clone())).unwrap();
        let twice = reliability(&trace(recs.iter().chain(recs.iter()).cloned().collect())).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn accuracy_grid() {
        let t = trace(vec![
            rec(0, true, true, Some((10.0, 10.0)), Some((13.0, 14.0))),
            rec(1, true, true, Some((1000.0, 700.0)), Some((1000.0, 701.0))),
            rec(2, true, true, Some((1000.0, 700.0)), Some((1000.0, 703.0))),
            rec(3, true, false, Some((500.0, 400.0)), None),
        ]);
        let a = accuracy(&t).unwrap();
        assert_eq!(a.global.count, 3);
        assert_eq!(a.global.max, 5.0);
        assert!((a.global.mean - 3.0).abs() < 1e-12);
        assert_eq!(a.regions[0].count, 1);
        assert_eq!(a.regions[8].count, 2);
        assert_eq!(a.regions[8].mean, 2.0);
        assert_eq!(a.regions[4].count, 0);
        assert_eq!(accuracy(&trace(vec![])), Err(MetricsError::NoGroundTruth));
    }

    #[test]
    fn latency_examples() {
        // arrival on the activation frame
        let t = trace(vec![rec(0, true, true, Some((100.0, 100.0)), Some((101.0, 99.0)))]);
        let l = latency(&t).unwrap();
        assert_eq!(l.samples, vec![0]);
        assert_eq!(l.mean_ms, Some(0.0));

        // detected one frame later
        let t = trace(vec![
            rec(0, false, false, None, None),
            rec(1, true, false, Some((100.0, 100.0)), None),
            rec(2, true, true, Some((100.0, 100.0)), Some((100.0, 100.0))),
        ]);
        let l = latency(&t).unwrap();
        assert_eq!(l.samples, vec![1]);
        assert!((l.mean_ms.unwrap() - 33.333333).abs() < 1e-3);
        assert_eq!(l.timeouts, 0);
    }

    #[test]
    fn latency_timeouts_and_ordering() {
        let t = trace(vec![
            rec(0, true, false, Some((0.0, 0.0)), None),
            rec(1, false, false, None, None),
            rec(2, true, true, Some((0.0, 0.0)), Some((0.0, 0.0))),
            rec(3, true, true, Some((0.0, 0.0)), Some((0.0, 0.0))),
            rec(4, false, false, None, None),
            rec(5, true, true, Some((0.0, 0.0)), Some((90.0, 0.0))),
        ]);
        let l = latency(&t).unwrap();
        assert_eq!(l.samples, vec![0]);
        assert_eq!(l.timeouts, 2);
        assert!(l.min_frames <= l.max_frames);
        assert_eq!(latency(&trace(vec![rec(0, false, false, None, None)])), Err(MetricsError::NoActivations));
    }

    #[test]
    fn report_table_has_three_criteria() {
        let t = trace(vec![
            rec(0, true, true, Some((100.0, 100.0)), Some((101.0, 100.0))),
            rec(1, true, true, Some((100.0, 100.0)), Some((100.0, 100.0))),
        ]);
        let r = MetricsReport::from_trace(&t);
        let table = r.to_table();
        assert!(table.contains("Reliability  100.0 %"));
        assert!(table.contains("Accuracy     1.00 screen pixels (worst case)"));
        assert!(table.contains("Latency      0/0/0 ms"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["reliability"], 1.0);
        assert_eq!(r.compute.unwrap().median_ms, 0.0005);
    }
}
