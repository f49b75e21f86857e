//! Laser-pointer presentation control.
//!
//! The processing chain is: [`imaging`] frames, blue-plane spot
//! detection in [`spot`], four-corner projective calibration in [`calib`],
//! and the gesture state machine in [`control`]. [`simcam`] replaces the
//! physical camera, [`scenario`] scripts whole sessions, [`metrics`] scores
//! them, and [`service`] exposes the live chain to interactive clients.

pub mod calib;
pub mod control;
pub mod geom;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod scenario;
pub mod service;
pub mod simcam;
pub mod spot;

pub use calib::{
    in_roi, map_point, solve_homography, CalibError, Calibration, CalibrationProgress,
    CalibrationSession, Homography,
};
pub use control::{
    classify_region, CommandEvent, Controller, ControllerConfig, ControllerState, EventKind, Mode,
    Region, RegionGeometry,
};
pub use geom::{CameraPoint, ScreenPoint, Size};
pub use imaging::{directory_source, load_frame, save_frame, Frame, FrameSource, ImagingError};
pub use metrics::{accuracy, latency, reliability, MetricsReport};
pub use pipeline::{FrameRecord, Pipeline, PipelineError, Trace};
pub use scenario::{
    check_expectations, check_requirements, run_scenario, ScenarioError, ScenarioRun, ScenarioScript,
};
pub use service::{Session, SessionConfig, SessionMessage, SessionUpdate};
pub use simcam::{
    make_background, render, BackgroundKind, GroundTruth, LaserState, SceneConfig, SimCamera,
    SimError,
};
pub use spot::{detect, DetectorConfig, SpotDetection};
