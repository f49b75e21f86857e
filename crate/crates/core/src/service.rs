//! Interactive sessions.
//!
//! A client sends the true (normalized) laser position; the session renders
//! the camera frame itself and runs the real detection, calibration and
//! gesture code on it. Messages are JSON objects tagged by `type`.
//!
//! Client to server:
//! - `{"type":"laser","on":true,"x":0.5,"y":0.5,"seq":1}`
//! - `{"type":"start_calibration"}`
//! - `{"type":"reset"}`
//! - `{"type":"config","controller":{..},"detector":{..},"scene":{..}}`
//!
//! Server to client: `frame_result`, `event`, `calibration`, `info`, and
//! `error` for rejected messages.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calib::{CalibrationProgress, CalibrationSession, CORNER_NAMES};
use crate::control::{Controller, ControllerConfig, EventKind, Mode};
use crate::geom::ScreenPoint;
use crate::pipeline::{Pipeline, PipelineError};
use crate::scenario::BackgroundSpec;
use crate::simcam::{make_background, SceneConfig};
use crate::spot::{detect, DetectorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionMessage {
    Laser {
        on: bool,
        #[serde(default)]
        x: f64,
        #[serde(default)]
        y: f64,
        seq: u64,
    },
    StartCalibration,
    Reset,
    Config {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        controller: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detector: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scene: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        background: Option<Value>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionUpdate {
    FrameResult {
        seq: u64,
        detected: bool,
        camera: Option<[f64; 2]>,
        screen: Option<[f64; 2]>,
        mode: String,
        region: Option<String>,
    },
    Event {
        kind: String,
        frame: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<f64>,
    },
    Calibration {
        corner: usize,
        samples: usize,
        done: bool,
    },
    Info {
        text: String,
    },
    Error {
        message: String,
    },
}

impl SessionUpdate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("update serializes")
    }

    fn error(message: impl Into<String>) -> Self {
        SessionUpdate::Error {
            message: message.into(),
        }
    }

    fn info(text: impl Into<String>) -> Self {
        SessionUpdate::Info { text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SessionConfig {
    pub scene: SceneConfig,
    pub background: BackgroundSpec,
    pub detector: DetectorConfig,
    pub controller: ControllerConfig,
}

/// One client's pipeline. Messages are processed strictly in order.
#[derive(Debug)]
pub struct Session {
    config: SessionConfig,
    pipeline: Pipeline,
    calibrating: Option<CalibrationSession>,
    last_seq: Option<u64>,
    frame: u64,
}

fn build(config: &SessionConfig) -> Result<Pipeline, PipelineError> {
    let bg = make_background(config.background.kind, config.background.seed, config.scene.screen)?;
    Pipeline::new(config.scene.clone(), &bg, config.detector, config.controller)
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn patched<T: Serialize + for<'de> Deserialize<'de>>(current: &T, patch: &Option<Value>) -> Result<T, String> {
    let Some(patch) = patch else {
        return serde_json::to_value(current)
            .and_then(serde_json::from_value)
            .map_err(|e| e.to_string());
    };
    let mut v = serde_json::to_value(current).map_err(|e| e.to_string())?;
    merge(&mut v, patch);
    serde_json::from_value(v).map_err(|e| e.to_string())
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, PipelineError> {
        let pipeline = build(&config)?;
        Ok(Self {
            config,
            pipeline,
            calibrating: None,
            last_seq: None,
            frame: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn is_calibrated(&self) -> bool {
        self.pipeline.calibration().is_some()
    }

    /// Parses and handles one text message.
    pub fn handle_text(&mut self, text: &str) -> Vec<SessionUpdate> {
        match serde_json::from_str::<SessionMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![SessionUpdate::error(format!("malformed message: {e}"))],
        }
    }

    pub fn handle(&mut self, msg: SessionMessage) -> Vec<SessionUpdate> {
        match msg {
            SessionMessage::Laser { on, x, y, seq } => self.laser(on, x, y, seq),
            SessionMessage::StartCalibration => {
                let screen = self.config.scene.screen;
                self.calibrating = Some(CalibrationSession::new(screen));
                self.pipeline.set_calibration(None);
                self.pipeline.controller_mut().reset();
                vec![
                    SessionUpdate::Calibration {
                        corner: 0,
                        samples: 0,
                        done: false,
                    },
                    SessionUpdate::info(format!("Point the laser at the {} corner", CORNER_NAMES[0])),
                ]
            }
            SessionMessage::Reset => {
                self.pipeline.controller_mut().reset();
                let text = if self.calibrating.is_some() {
                    "Calibration in progress".to_string()
                } else if self.is_calibrated() {
                    self.pipeline.controller().state().info_text().to_string()
                } else {
                    "Application active".to_string()
                };
                vec![SessionUpdate::info(text)]
            }
            SessionMessage::Config {
                controller,
                detector,
                scene,
                background,
            } => self.reconfigure(controller, detector, scene, background),
        }
    }

    fn reconfigure(
        &mut self,
        controller: Option<Value>,
        detector: Option<Value>,
        scene: Option<Value>,
        background: Option<Value>,
    ) -> Vec<SessionUpdate> {
        let next = (|| -> Result<SessionConfig, String> {
            Ok(SessionConfig {
                scene: patched(&self.config.scene, &scene)?,
                background: patched(&self.config.background, &background)?,
                detector: patched(&self.config.detector, &detector)?,
                controller: patched(&self.config.controller, &controller)?,
            })
        })();
        let next = match next {
            Ok(n) => n,
            Err(e) => return vec![SessionUpdate::error(format!("invalid config: {e}"))],
        };
        let rebuild = next.scene != self.config.scene || next.background != self.config.background;
        if rebuild {
            match build(&next) {
                Ok(p) => {
                    self.pipeline = p;
                    self.calibrating = None;
                }
                Err(e) => return vec![SessionUpdate::error(format!("invalid config: {e}"))],
            }
            self.config = next;
            return vec![SessionUpdate::info("Scene changed; calibration required")];
        }
        if let Err(e) = next.detector.validate() {
            return vec![SessionUpdate::error(format!("invalid config: {e}"))];
        }
        let controller = match Controller::new(next.controller, next.scene.screen) {
            Ok(c) => c,
            Err(e) => return vec![SessionUpdate::error(format!("invalid config: {e}"))],
        };
        self.pipeline
            .set_detector(next.detector)
            .expect("validated above");
        if next.controller != self.config.controller {
            *self.pipeline.controller_mut() = controller;
        }
        self.config = next;
        vec![SessionUpdate::info("Configuration updated")]
    }

    fn laser(&mut self, on: bool, x: f64, y: f64, seq: u64) -> Vec<SessionUpdate> {
        if let Some(last) = self.last_seq {
            if seq <= last {
                return vec![SessionUpdate::error(format!(
                    "out-of-order seq {seq} (last was {last})"
                ))];
            }
        }
        if on && !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return vec![SessionUpdate::error(format!(
                "laser position ({x}, {y}) outside [0, 1]"
            ))];
        }
        self.last_seq = Some(seq);
        let screen = self.config.scene.screen;
        let pos = ScreenPoint::new(x * screen.w(), y * screen.h());

        if let Some(mut cal) = self.calibrating.take() {
            return self.calibration_frame(&mut cal, on, pos, seq);
        }

        if !self.is_calibrated() {
            let cap = self.pipeline.capture(on, pos);
            let det = detect(&cap.frame, self.pipeline.detector());
            return vec![SessionUpdate::FrameResult {
                seq,
                detected: det.is_some(),
                camera: det.map(|d| [d.centroid.x, d.centroid.y]),
                screen: None,
                mode: Mode::Normal.name().into(),
                region: None,
            }];
        }

        let rec = self.pipeline.process(self.frame, on, pos);
        self.frame += 1;
        let mut out = vec![SessionUpdate::FrameResult {
            seq,
            detected: rec.detected(),
            camera: rec.detection.map(|d| [d.centroid.x, d.centroid.y]),
            screen: rec.mapped.map(|p| [p.x, p.y]),
            mode: rec.mode.name().into(),
            region: rec.region.map(|r| r.name().into()),
        }];
        for e in &rec.events {
            out.push(match &e.kind {
                EventKind::InfoText(t) => SessionUpdate::info(t.clone()),
                k => {
                    let p = k.position();
                    SessionUpdate::Event {
                        kind: k.name().into(),
                        frame: e.frame,
                        x: p.map(|p| p.x),
                        y: p.map(|p| p.y),
                    }
                }
            });
        }
        out
    }

    fn calibration_frame(
        &mut self,
        cal: &mut CalibrationSession,
        on: bool,
        pos: ScreenPoint,
        seq: u64,
    ) -> Vec<SessionUpdate> {
        let cap = self.pipeline.capture(on, pos);
        let det = detect(&cap.frame, self.pipeline.detector());
        let mut out = vec![SessionUpdate::FrameResult {
            seq,
            detected: det.is_some(),
            camera: det.map(|d| [d.centroid.x, d.centroid.y]),
            screen: None,
            mode: Mode::Normal.name().into(),
            region: None,
        }];
        let corner_before = cal.current_corner();
        match cal.feed(det.as_ref()) {
            Ok(CalibrationProgress::Collecting { corner, samples }) => {
                out.push(SessionUpdate::Calibration {
                    corner,
                    samples,
                    done: false,
                });
                if corner != corner_before {
                    // the pointer travels to the next corner
                    self.pipeline.break_motion();
                    out.push(SessionUpdate::info(format!(
                        "Point the laser at the {} corner",
                        CORNER_NAMES[corner]
                    )));
                }
                self.calibrating = Some(cal.clone());
            }
            Ok(CalibrationProgress::Complete(result)) => {
                self.pipeline.break_motion();
                self.pipeline.set_calibration(Some(result));
                self.pipeline.controller_mut().reset();
                out.push(SessionUpdate::Calibration {
                    corner: 4,
                    samples: cal.samples_per_corner(),
                    done: true,
                });
                out.push(SessionUpdate::info(
                    self.pipeline.controller().state().info_text().to_string(),
                ));
            }
            Ok(CalibrationProgress::Failed(e)) => {
                self.pipeline.break_motion();
                out.push(SessionUpdate::Calibration {
                    corner: 0,
                    samples: 0,
                    done: false,
                });
                out.push(SessionUpdate::info(format!(
                    "Calibration failed ({e}); point the laser at the {} corner",
                    CORNER_NAMES[0]
                )));
                self.calibrating = Some(cal.clone());
            }
            Err(e) => out.push(SessionUpdate::error(e.to_string())),
        }
        out
    }
}
