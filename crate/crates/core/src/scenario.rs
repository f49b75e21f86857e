//! Scripted laser sessions.
//!
//! A script is a JSON document:
//!
//! ```json
//! {"scene":{...},"background":{"kind":"multi","seed":1},
//!  "steps":[{"f":0,"on":true,"x":100,"y":700}],
//!  "expect":[{"f":8,"kind":"NextSlide"}],
//!  "require":{"reliability_min":0.9}}
//! ```
//!
//! Each step sets the laser for frame `f` (through frame `until`, when
//! given). Frames not covered by any step have the laser off. The runner
//! first calibrates by holding the laser on the four screen corners, then
//! plays frames `0..=last` through the pipeline.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::Calibration;
use crate::control::{CommandEvent, ControllerConfig};
use crate::geom::ScreenPoint;
use crate::metrics::MetricsReport;
use crate::pipeline::{CalibrationSpec, Pipeline, PipelineError, Trace};
use crate::simcam::{make_background, BackgroundKind, SceneConfig, SimError};
use crate::spot::DetectorConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub kind: BackgroundKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self {
            kind: BackgroundKind::Multi,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub f: u64,
    pub on: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    /// Last frame (inclusive) this step holds for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<u64>,
}

impl Step {
    pub fn on(f: u64, x: f64, y: f64) -> Self {
        Self {
            f,
            on: true,
            x: Some(x),
            y: Some(y),
            until: None,
        }
    }

    pub fn hold(f: u64, until: u64, x: f64, y: f64) -> Self {
        Self {
            until: Some(until),
            ..Self::on(f, x, y)
        }
    }

    pub fn last(&self) -> u64 {
        self.until.unwrap_or(self.f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub f: u64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

/// Bounds on the run's metrics. Unset fields are not checked.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Requirements {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliability_min: Option<f64>,
    /// Worst-case mapping error bounds, in screen pixels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_mean_ms_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeouts_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default)]
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Vec<Expectation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub require: Option<Requirements>,
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: ScenarioScript = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        self.scene.validate()?;
        let (w, h) = (self.scene.screen.w(), self.scene.screen.h());
        let mut next_free = 0u64;
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 && s.f < next_free {
                return invalid(format!("step {i}: frame {} overlaps or precedes the previous step", s.f));
            }
            if s.last() < s.f {
                return invalid(format!("step {i}: until {} is before f {}", s.last(), s.f));
            }
            if s.on {
                let (Some(x), Some(y)) = (s.x, s.y) else {
                    return invalid(format!("step {i}: laser on without x/y"));
                };
                if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
                    return invalid(format!("step {i}: ({x}, {y}) is off screen"));
                }
            }
            next_free = s.last() + 1;
        }
        Ok(())
    }

    /// Laser state for every frame `0..=last`.
    pub fn frames(&self) -> Vec<(u64, bool, ScreenPoint)> {
        let Some(last) = self.steps.iter().map(Step::last).max() else {
            return Vec::new();
        };
        let mut out: Vec<(u64, bool, ScreenPoint)> =
            (0..=last).map(|f| (f, false, ScreenPoint::default())).collect();
        for s in &self.steps {
            let pos = ScreenPoint::new(s.x.unwrap_or(0.0), s.y.unwrap_or(0.0));
            for f in s.f..=s.last() {
                out[f as usize] = (f, s.on, pos);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub calibration: Calibration,
    pub trace: Trace,
}

impl ScenarioRun {
    pub fn events(&self) -> Vec<CommandEvent> {
        self.trace.events().cloned().collect()
    }
}

pub fn build_pipeline(script: &ScenarioScript) -> Result<Pipeline, ScenarioError> {
    let bg = make_background(script.background.kind, script.background.seed, script.scene.screen)?;
    Ok(Pipeline::new(
        script.scene.clone(),
        &bg,
        script.detector,
        script.controller,
    )?)
}

/// Calibrates, then plays every scripted frame through the pipeline.
pub fn run_scenario(script: &ScenarioScript) -> Result<ScenarioRun, ScenarioError> {
    script.validate()?;
    let mut pipeline = build_pipeline(script)?;
    let calibration = pipeline.auto_calibrate(script.calibration)?;
    let mut trace = pipeline.new_trace();
    for (f, on, pos) in script.frames() {
        trace.records.push(pipeline.process(f, on, pos));
    }
    Ok(ScenarioRun { calibration, trace })
}

/// Compares an event log with a golden list.
///
/// Cursor moves and info text are only compared when the golden list
/// mentions that kind. Frame and kind must match exactly; positions, when
/// the expectation gives them, within one pixel. Returns a line-per-item
/// diff on mismatch.
pub fn check_expectations(expect: &[Expectation], events: &[CommandEvent]) -> Result<(), Vec<String>> {
    let include_stream = |name: &str| expect.iter().any(|e| e.kind == name);
    let actual: Vec<&CommandEvent> = events
        .iter()
        .filter(|e| !e.kind.is_stream() || include_stream(e.kind.name()))
        .collect();

    let mut diff = Vec::new();
    let n = expect.len().max(actual.len());
    for i in 0..n {
        match (expect.get(i), actual.get(i)) {
            (Some(want), Some(got)) => {
                let pos_ok = match got.kind.position() {
                    Some(p) => {
                        want.x.is_none_or(|x| (x - p.x).abs() <= 1.0)
                            && want.y.is_none_or(|y| (y - p.y).abs() <= 1.0)
                    }
                    None => want.x.is_none() && want.y.is_none(),
                };
                if want.f != got.frame || want.kind != got.kind.name() || !pos_ok {
                    diff.push(format!(
                        "#{i}: expected {} @{}, got {}",
                        want.kind,
                        want.f,
                        describe(got)
                    ));
                }
            }
            (Some(want), None) => diff.push(format!("#{i}: missing {} @{}", want.kind, want.f)),
            (None, Some(got)) => diff.push(format!("#{i}: unexpected {}", describe(got))),
            (None, None) => unreachable!(),
        }
    }
    if diff.is_empty() {
        Ok(())
    } else {
        Err(diff)
    }
}

pub fn check_requirements(req: &Requirements, report: &MetricsReport) -> Result<(), Vec<String>> {
    let mut diff = Vec::new();
    let worst = report.accuracy.as_ref().map(|a| a.worst());
    let mut bound = |name: &str, value: Option<f64>, limit: Option<f64>, below: bool| {
        let Some(limit) = limit else { return };
        match value {
            None => diff.push(format!("{name}: not measurable in this run")),
            Some(v) if below && v > limit => diff.push(format!("{name}: {v:.4} above {limit}")),
            Some(v) if !below && v < limit => diff.push(format!("{name}: {v:.4} below {limit}")),
            _ => {}
        }
    };
    bound("reliability", report.reliability, req.reliability_min, false);
    bound("accuracy worst case", worst, req.accuracy_max, true);
    bound("accuracy worst case", worst, req.accuracy_min, false);
    let lat = report.latency.as_ref();
    bound("mean latency", lat.and_then(|l| l.mean_ms), req.latency_mean_ms_max, true);
    bound(
        "latency timeouts",
        lat.map(|l| l.timeouts as f64),
        req.timeouts_max.map(|t| t as f64),
        true,
    );
    if diff.is_empty() {
        Ok(())
    } else {
        Err(diff)
    }
}

fn describe(e: &CommandEvent) -> String {
    match e.kind.position() {
        Some(p) => format!("{} @{} ({:.1}, {:.1})", e.kind.name(), e.frame, p.x, p.y),
        None => format!("{} @{}", e.kind.name(), e.frame),
    }
}
