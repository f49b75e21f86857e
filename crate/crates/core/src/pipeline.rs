//! The per-frame processing chain shared by the scenario runner and the
//! session service: capture, detect, ROI check, map, gesture step.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{Calibration, CalibrationProgress, CalibrationSession, CalibError};
use crate::control::{CommandEvent, ConfigError, Controller, ControllerConfig, Mode, Region};
use crate::geom::{CameraPoint, ScreenPoint, Size};
use crate::imaging::Frame;
use crate::simcam::{Capture, LaserState, SceneConfig, SimCamera, SimError};
use crate::spot::{detect, DetectorConfig, SpotDetection, SpotError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Detector(#[from] SpotError),
    #[error(transparent)]
    Controller(#[from] ConfigError),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error(transparent)]
    Calib(#[from] CalibError),
}

/// Everything observed and decided for one processed frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub laser_on: bool,
    pub truth_screen: Option<ScreenPoint>,
    pub truth_camera: Option<CameraPoint>,
    pub detection: Option<SpotDetection>,
    pub in_roi: bool,
    pub mapped: Option<ScreenPoint>,
    pub region: Option<Region>,
    pub mode: Mode,
    pub events: Vec<CommandEvent>,
    /// Wall time of detect + map + step, in nanoseconds.
    pub compute_ns: u64,
}

impl FrameRecord {
    pub fn detected(&self) -> bool {
        self.detection.is_some()
    }
}

/// A recorded run, the input to the metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub screen: Size,
    pub fps: f64,
    /// Dwell vicinity half-widths used to decide cursor arrival.
    pub vicinity: (f64, f64),
    pub records: Vec<FrameRecord>,
}

impl Trace {
    pub fn new(screen: Size, fps: f64, vicinity: (f64, f64)) -> Self {
        Self {
            screen,
            fps,
            vicinity,
            records: Vec::new(),
        }
    }

    pub fn events(&self) -> impl Iterator<Item = &CommandEvent> {
        self.records.iter().flat_map(|r| r.events.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSpec {
    pub samples_per_corner: usize,
    /// Give up after this many frames per corner without completing it.
    pub max_frames_per_corner: usize,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            samples_per_corner: CalibrationSession::DEFAULT_SAMPLES,
            max_frames_per_corner: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    camera: SimCamera,
    detector: DetectorConfig,
    controller: Controller,
    calibration: Option<Calibration>,
    captures: u64,
    last_on: Option<ScreenPoint>,
}

impl Pipeline {
    pub fn new(
        scene: SceneConfig,
        background: &Frame,
        detector: DetectorConfig,
        controller: ControllerConfig,
    ) -> Result<Self, PipelineError> {
        detector.validate()?;
        let screen = scene.screen;
        Ok(Self {
            camera: SimCamera::new(scene, background)?,
            detector,
            controller: Controller::new(controller, screen)?,
            calibration: None,
            captures: 0,
            last_on: None,
        })
    }

    pub fn camera(&self) -> &SimCamera {
        &self.camera
    }

    pub fn scene(&self) -> &SceneConfig {
        self.camera.scene()
    }

    pub fn detector(&self) -> &DetectorConfig {
        &self.detector
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut Controller {
        &mut self.controller
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.calibration.as_ref()
    }

    pub fn set_calibration(&mut self, cal: Option<Calibration>) {
        self.calibration = cal;
    }

    pub fn set_detector(&mut self, detector: DetectorConfig) -> Result<(), PipelineError> {
        detector.validate()?;
        self.detector = detector;
        Ok(())
    }

    /// Renders the next camera frame. Consecutive laser-on frames blur
    /// along the path between them.
    pub fn capture(&mut self, on: bool, pos: ScreenPoint) -> Capture {
        let laser = if on {
            LaserState {
                on,
                pos,
                prev: self.last_on,
            }
        } else {
            LaserState::off()
        };
        self.last_on = on.then_some(pos);
        let index = self.captures;
        self.captures += 1;
        self.camera.capture(laser, index)
    }

    /// Forgets the previous laser position, so the next capture has no
    /// motion blur.
    pub fn break_motion(&mut self) {
        self.last_on = None;
    }

    /// Holds the laser on each screen corner in turn until the calibration
    /// session completes.
    pub fn auto_calibrate(&mut self, spec: CalibrationSpec) -> Result<Calibration, PipelineError> {
        let screen = self.scene().screen;
        let mut session = CalibrationSession::with_targets(
            screen,
            crate::calib::screen_corners(screen),
            spec.samples_per_corner,
        );
        let mut frames_on_corner = 0;
        let mut corner = 0;
        loop {
            let target = session.target(session.current_corner());
            let cap = self.capture(true, target);
            let det = detect(&cap.frame, &self.detector);
            match session.feed(det.as_ref())? {
                CalibrationProgress::Complete(cal) => {
                    self.last_on = None;
                    self.calibration = Some(cal.clone());
                    return Ok(cal);
                }
                CalibrationProgress::Failed(e) => {
                    return Err(PipelineError::CalibrationFailed(e.to_string()));
                }
                CalibrationProgress::Collecting { corner: c, .. } => {
                    if c != corner {
                        corner = c;
                        frames_on_corner = 0;
                        // the pointer jumps to the next corner
                        self.last_on = None;
                    } else {
                        frames_on_corner += 1;
                        if frames_on_corner > spec.max_frames_per_corner {
                            return Err(PipelineError::CalibrationFailed(format!(
                                "no usable spot at the {} corner",
                                crate::calib::CORNER_NAMES[corner]
                            )));
                        }
                    }
                }
            }
        }
    }

    /// Runs detection through the controller on an already captured frame.
    pub fn process_frame(&mut self, frame: u64, image: &Frame) -> FrameRecord {
        let started = Instant::now();
        let detection = detect(image, &self.detector);
        let (in_roi, mapped) = match (&detection, &self.calibration) {
            (Some(d), Some(cal)) => match cal.locate(d.centroid) {
                Some(p) => (true, Some(p)),
                None => (false, None),
            },
            _ => (false, None),
        };
        let events = if self.calibration.is_some() {
            self.controller.step(mapped, frame)
        } else {
            Vec::new()
        };
        let compute_ns = started.elapsed().as_nanos() as u64;
        FrameRecord {
            frame,
            laser_on: false,
            truth_screen: None,
            truth_camera: None,
            detection,
            in_roi,
            mapped,
            region: mapped.map(|p| self.controller.geom.classify(p)),
            mode: self.controller.mode(),
            events,
            compute_ns,
        }
    }

    /// Captures and processes one frame of virtual laser input.
    pub fn process(&mut self, frame: u64, on: bool, pos: ScreenPoint) -> FrameRecord {
        let cap = self.capture(on, pos);
        let mut rec = self.process_frame(frame, &cap.frame);
        rec.laser_on = on;
        rec.truth_screen = cap.truth.screen;
        rec.truth_camera = cap.truth.camera;
        rec
    }

    pub fn new_trace(&self) -> Trace {
        let screen = self.scene().screen;
        Trace::new(screen, self.scene().fps, self.controller.cfg.vicinity(screen))
    }
}
