//! Gesture state machine.
//!
//! Observations are screen-space laser positions, one per processed frame
//! (`None` when no spot was found). In presentation mode the controller
//! watches for timed region sequences:
//!
//! | gesture        | start        | then             | then                 |
//! |----------------|--------------|------------------|----------------------|
//! | next slide     | lower left   | middle (<= w1)   | upper right (<= w2)  |
//! | previous slide | lower right  | middle (<= w1)   | upper left (<= w2)   |
//! | mouse mode on  | lower middle | any upper (<= mouse_arm_window) |       |
//!
//! Windows are measured in processed frames from the most recent hit of the
//! preceding region, and keep running while the spot is absent.
//!
//! In mouse mode the cursor follows the spot. Dwelling inside the vicinity
//! box clicks (then double-clicks), a vertical stroke arms drag-and-drop and
//! a horizontal stroke arms right click. Switching the laser off disarms, and
//! a longer absence leaves mouse mode.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{ScreenPoint, Size};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    LowerLeft,
    LowerMiddle,
    LowerRight,
    Middle,
    UpperLeft,
    UpperRight,
    Outside,
}

impl Region {
    pub fn is_upper(self) -> bool {
        matches!(self, Region::UpperLeft | Region::UpperRight)
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::LowerLeft => "LowerLeft",
            Region::LowerMiddle => "LowerMiddle",
            Region::LowerRight => "LowerRight",
            Region::Middle => "Middle",
            Region::UpperLeft => "UpperLeft",
            Region::UpperRight => "UpperRight",
            Region::Outside => "Outside",
        }
    }
}

/// Screen partition: three horizontal bands; the lower band split in
/// thirds, the upper band in halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGeometry {
    pub screen: Size,
}

impl RegionGeometry {
    pub fn new(screen: Size) -> Self {
        Self { screen }
    }

    pub fn classify(&self, p: ScreenPoint) -> Region {
        let (w, h) = (self.screen.w(), self.screen.h());
        if !p.is_finite() || p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
            return Region::Outside;
        }
        if p.y < h / 3.0 {
            if p.x < w / 2.0 {
                Region::UpperLeft
            } else {
                Region::UpperRight
            }
        } else if p.y < 2.0 * h / 3.0 {
            Region::Middle
        } else if p.x < w / 3.0 {
            Region::LowerLeft
        } else if p.x > 2.0 * w / 3.0 {
            Region::LowerRight
        } else {
            Region::LowerMiddle
        }
    }
}

pub fn classify_region(geom: &RegionGeometry, p: ScreenPoint) -> Region {
    geom.classify(p)
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("dwell_double ({double}) must exceed dwell_click ({click})")]
    DwellOrder { click: u32, double: u32 },
    #[error("stroke fractions must satisfy 0 < minor ({minor}) < major ({major})")]
    StrokeFractions { minor: f64, major: f64 },
    #[error("vicinity_frac must be positive, got {0}")]
    Vicinity(f64),
}

/// Frame counts and screen fractions driving the gesture machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub w1: u32,
    pub w2: u32,
    pub mouse_arm_window: u32,
    pub mouse_off_frames: u32,
    pub dwell_click: u32,
    pub dwell_double: u32,
    pub vicinity_frac: f64,
    pub stroke_major_frac: f64,
    pub stroke_minor_frac: f64,
    pub stroke_window: u32,
    pub disarm_absent_frames: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            w1: 5,
            w2: 10,
            mouse_arm_window: 10,
            mouse_off_frames: 5,
            dwell_click: 5,
            dwell_double: 10,
            vicinity_frac: 0.02,
            stroke_major_frac: 0.20,
            stroke_minor_frac: 0.10,
            stroke_window: 15,
            disarm_absent_frames: 2,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("w1", self.w1),
            ("w2", self.w2),
            ("mouse_arm_window", self.mouse_arm_window),
            ("mouse_off_frames", self.mouse_off_frames),
            ("dwell_click", self.dwell_click),
            ("dwell_double", self.dwell_double),
            ("stroke_window", self.stroke_window),
            ("disarm_absent_frames", self.disarm_absent_frames),
        ] {
            if v == 0 {
                return Err(ConfigError::ZeroCount(name));
            }
        }
        if self.dwell_double <= self.dwell_click {
            return Err(ConfigError::DwellOrder {
                click: self.dwell_click,
                double: self.dwell_double,
            });
        }
        if !(self.stroke_minor_frac > 0.0 && self.stroke_minor_frac < self.stroke_major_frac) {
            return Err(ConfigError::StrokeFractions {
                minor: self.stroke_minor_frac,
                major: self.stroke_major_frac,
            });
        }
        if !(self.vicinity_frac > 0.0) {
            return Err(ConfigError::Vicinity(self.vicinity_frac));
        }
        Ok(())
    }

    /// Half-widths of the dwell vicinity box.
    pub fn vicinity(&self, screen: Size) -> (f64, f64) {
        (self.vicinity_frac * screen.w(), self.vicinity_frac * screen.h())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Normal,
    MouseControl,
    DragArmed,
    DragActive,
    RightClickArmed,
}

impl Mode {
    pub fn is_mouse(self) -> bool {
        self != Mode::Normal
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Normal => "Normal",
            Mode::MouseControl => "MouseControl",
            Mode::DragArmed => "DragArmed",
            Mode::DragActive => "DragActive",
            Mode::RightClickArmed => "RightClickArmed",
        }
    }

    /// Status line shown in the info box.
    pub fn info_text(self) -> &'static str {
        match self {
            Mode::Normal => "Presentation mode active",
            Mode::MouseControl => "Mouse controlling mode active",
            Mode::DragArmed => "Drag and drop enabled",
            Mode::DragActive => "Dragging",
            Mode::RightClickArmed => "Right click enabled",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    NextSlide,
    PrevSlide,
    MouseModeOn,
    MouseModeOff,
    MouseMove(ScreenPoint),
    LeftClick(ScreenPoint),
    DoubleClick(ScreenPoint),
    RightClickArmed,
    RightClick(ScreenPoint),
    DragArmed,
    DragStart(ScreenPoint),
    DragEnd(ScreenPoint),
    InfoText(String),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::NextSlide => "NextSlide",
            EventKind::PrevSlide => "PrevSlide",
            EventKind::MouseModeOn => "MouseModeOn",
            EventKind::MouseModeOff => "MouseModeOff",
            EventKind::MouseMove(_) => "MouseMove",
            EventKind::LeftClick(_) => "LeftClick",
            EventKind::DoubleClick(_) => "DoubleClick",
            EventKind::RightClickArmed => "RightClickArmed",
            EventKind::RightClick(_) => "RightClick",
            EventKind::DragArmed => "DragArmed",
            EventKind::DragStart(_) => "DragStart",
            EventKind::DragEnd(_) => "DragEnd",
            EventKind::InfoText(_) => "InfoText",
        }
    }

    pub fn position(&self) -> Option<ScreenPoint> {
        match self {
            EventKind::MouseMove(p)
            | EventKind::LeftClick(p)
            | EventKind::DoubleClick(p)
            | EventKind::RightClick(p)
            | EventKind::DragStart(p)
            | EventKind::DragEnd(p) => Some(*p),
            _ => None,
        }
    }

    /// Cursor motion and status text, as opposed to discrete commands.
    pub fn is_stream(&self) -> bool {
        matches!(self, EventKind::MouseMove(_) | EventKind::InfoText(_))
    }
}

/// A controller output tagged with the frame that produced it. Serializes
/// as `{"frame":N,"kind":"...","x":..,"y":..}`; `x`/`y` only for positioned
/// events, `text` only for info text.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandEvent {
    pub frame: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub frame: u64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl From<&CommandEvent> for EventRecord {
    fn from(e: &CommandEvent) -> Self {
        let pos = e.kind.position();
        EventRecord {
            frame: e.frame,
            kind: e.kind.name().to_owned(),
            x: pos.map(|p| p.x),
            y: pos.map(|p| p.y),
            text: match &e.kind {
                EventKind::InfoText(t) => Some(t.clone()),
                _ => None,
            },
        }
    }
}

impl Serialize for CommandEvent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        EventRecord::from(self).serialize(s)
    }
}

impl CommandEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serialization is infallible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GestureKind {
    NextSlide,
    PrevSlide,
    MouseMode,
}

/// An in-progress presentation-mode gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GestureProgress {
    kind: GestureKind,
    /// 1 = waiting for the second region, 2 = waiting for the third.
    step: u8,
    /// Frame of the latest hit of the region preceding the awaited one.
    anchor: u64,
}

impl GestureProgress {
    fn window(&self, cfg: &ControllerConfig) -> u32 {
        match (self.kind, self.step) {
            (GestureKind::MouseMode, _) => cfg.mouse_arm_window,
            (_, 1) => cfg.w1,
            _ => cfg.w2,
        }
    }

    /// Frames left before the current window closes.
    pub fn frames_remaining(&self, frame: u64, cfg: &ControllerConfig) -> u32 {
        let elapsed = frame.saturating_sub(self.anchor);
        (self.window(cfg) as u64).saturating_sub(elapsed) as u32
    }

    pub fn step(&self) -> u8 {
        self.step
    }

    pub fn anchor(&self) -> u64 {
        self.anchor
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dwell {
    anchor: ScreenPoint,
    count: u32,
    /// Set once this dwell has produced its final event; the spot has to
    /// leave the vicinity before it can trigger again.
    spent: bool,
}

/// Mutable state of one controller session.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    mode: Mode,
    gesture: Option<GestureProgress>,
    dwell: Option<Dwell>,
    trail: VecDeque<ScreenPoint>,
    absent: u32,
    last_frame: Option<u64>,
    cursor: Option<ScreenPoint>,
    info_text: String,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self {
            mode: Mode::Normal,
            gesture: None,
            dwell: None,
            trail: VecDeque::new(),
            absent: 0,
            last_frame: None,
            cursor: None,
            info_text: Mode::Normal.info_text().to_owned(),
        }
    }
}

struct Out<'a> {
    frame: u64,
    events: &'a mut Vec<CommandEvent>,
}

impl Out<'_> {
    fn push(&mut self, kind: EventKind) {
        self.events.push(CommandEvent {
            frame: self.frame,
            kind,
        });
    }
}

impl ControllerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn info_text(&self) -> &str {
        &self.info_text
    }

    pub fn gesture(&self) -> Option<&GestureProgress> {
        self.gesture.as_ref()
    }

    pub fn dwell_count(&self) -> u32 {
        self.dwell.map(|d| d.count).unwrap_or(0)
    }

    pub fn dwell_anchor(&self) -> Option<ScreenPoint> {
        self.dwell.map(|d| d.anchor)
    }

    pub fn trail(&self) -> impl Iterator<Item = &ScreenPoint> {
        self.trail.iter()
    }

    pub fn absent_frames(&self) -> u32 {
        self.absent
    }

    fn set_mode(&mut self, mode: Mode, out: &mut Out<'_>) {
        if self.mode == mode {
            return;
        }
        self.mode = mode;
        self.dwell = None;
        self.trail.clear();
        self.info_text = mode.info_text().to_owned();
        out.push(EventKind::InfoText(self.info_text.clone()));
    }

    /// Advances the machine by one processed frame.
    ///
    /// Frame indices must strictly increase between calls.
    pub fn step(
        &mut self,
        obs: Option<ScreenPoint>,
        frame: u64,
        cfg: &ControllerConfig,
        geom: &RegionGeometry,
    ) -> Vec<CommandEvent> {
        debug_assert!(
            self.last_frame.is_none_or(|f| frame > f),
            "frame indices must increase"
        );
        // A skipped frame breaks the consecutive-detection trail.
        if self.last_frame.is_some_and(|f| frame != f + 1) {
            self.trail.clear();
        }
        self.last_frame = Some(frame);

        let mut events = Vec::new();
        let mut out = Out {
            frame,
            events: &mut events,
        };
        if self.mode == Mode::Normal {
            self.step_presentation(obs, frame, cfg, geom, &mut out);
        } else {
            self.step_mouse(obs, cfg, geom, &mut out);
        }
        events
    }

    fn step_presentation(
        &mut self,
        obs: Option<ScreenPoint>,
        frame: u64,
        cfg: &ControllerConfig,
        geom: &RegionGeometry,
        out: &mut Out<'_>,
    ) {
        if let Some(g) = self.gesture {
            if frame - g.anchor > g.window(cfg) as u64 {
                self.gesture = None;
            }
        }
        let Some(p) = obs else { return };
        let region = geom.classify(p);

        let Some(mut g) = self.gesture else {
            let kind = match region {
                Region::LowerLeft => GestureKind::NextSlide,
                Region::LowerRight => GestureKind::PrevSlide,
                Region::LowerMiddle => GestureKind::MouseMode,
                _ => return,
            };
            self.gesture = Some(GestureProgress {
                kind,
                step: 1,
                anchor: frame,
            });
            return;
        };

        let (start, target) = match g.kind {
            GestureKind::NextSlide => (Region::LowerLeft, Region::UpperRight),
            GestureKind::PrevSlide => (Region::LowerRight, Region::UpperLeft),
            GestureKind::MouseMode => (Region::LowerMiddle, Region::Outside),
        };

        match (g.kind, g.step) {
            (GestureKind::MouseMode, _) => {
                if region == start {
                    g.anchor = frame;
                } else if region.is_upper() {
                    self.gesture = None;
                    out.push(EventKind::MouseModeOn);
                    self.absent = 0;
                    self.set_mode(Mode::MouseControl, out);
                    return;
                }
            }
            (_, 1) => {
                if region == start {
                    g.anchor = frame;
                } else if region == Region::Middle {
                    g.step = 2;
                    g.anchor = frame;
                }
            }
            _ => {
                if region == Region::Middle {
                    g.anchor = frame;
                } else if region == target {
                    self.gesture = None;
                    out.push(if g.kind == GestureKind::NextSlide {
                        EventKind::NextSlide
                    } else {
                        EventKind::PrevSlide
                    });
                    return;
                }
            }
        }
        self.gesture = Some(g);
    }

    fn step_mouse(
        &mut self,
        obs: Option<ScreenPoint>,
        cfg: &ControllerConfig,
        geom: &RegionGeometry,
        out: &mut Out<'_>,
    ) {
        let Some(p) = obs else {
            self.absent = self.absent.saturating_add(1);
            self.trail.clear();
            self.dwell = None;
            if self.absent >= cfg.mouse_off_frames {
                self.release_drag(out);
                out.push(EventKind::MouseModeOff);
                self.gesture = None;
                self.set_mode(Mode::Normal, out);
            } else if self.absent >= cfg.disarm_absent_frames
                && matches!(
                    self.mode,
                    Mode::DragArmed | Mode::DragActive | Mode::RightClickArmed
                )
            {
                self.release_drag(out);
                self.set_mode(Mode::MouseControl, out);
            }
            return;
        };

        self.absent = 0;
        self.cursor = Some(p);
        out.push(EventKind::MouseMove(p));

        let (vx, vy) = cfg.vicinity(geom.screen);
        let dwell = match self.dwell {
            Some(mut d) if (p.x - d.anchor.x).abs() <= vx && (p.y - d.anchor.y).abs() <= vy => {
                d.count = (d.count + 1).min(cfg.dwell_double);
                d
            }
            _ => Dwell {
                anchor: p,
                count: 1,
                spent: false,
            },
        };
        self.dwell = Some(dwell);

        match self.mode {
            Mode::Normal => unreachable!("presentation mode handled separately"),
            Mode::MouseControl => {
                if !dwell.spent {
                    if dwell.count == cfg.dwell_click {
                        out.push(EventKind::LeftClick(dwell.anchor));
                    }
                    if dwell.count == cfg.dwell_double {
                        out.push(EventKind::DoubleClick(dwell.anchor));
                        self.spend_dwell();
                    }
                }
                self.trail.push_back(p);
                while self.trail.len() > cfg.stroke_window as usize {
                    self.trail.pop_front();
                }
                match self.stroke(cfg, geom.screen) {
                    Some(Stroke::Vertical) => {
                        out.push(EventKind::DragArmed);
                        self.set_mode(Mode::DragArmed, out);
                    }
                    Some(Stroke::Horizontal) => {
                        out.push(EventKind::RightClickArmed);
                        self.set_mode(Mode::RightClickArmed, out);
                    }
                    None => {}
                }
            }
            Mode::DragArmed => {
                if !dwell.spent && dwell.count == cfg.dwell_click {
                    out.push(EventKind::DragStart(dwell.anchor));
                    self.set_mode(Mode::DragActive, out);
                    // Re-seat the dwell so the press position cannot also drop.
                    self.dwell = Some(dwell);
                    self.spend_dwell();
                }
            }
            Mode::DragActive => {
                if !dwell.spent && dwell.count == cfg.dwell_click {
                    out.push(EventKind::DragEnd(dwell.anchor));
                    self.set_mode(Mode::MouseControl, out);
                    self.dwell = Some(dwell);
                    self.spend_dwell();
                }
            }
            Mode::RightClickArmed => {
                if !dwell.spent && dwell.count == cfg.dwell_click {
                    out.push(EventKind::RightClick(dwell.anchor));
                    self.set_mode(Mode::MouseControl, out);
                    self.dwell = Some(dwell);
                    self.spend_dwell();
                }
            }
        }
    }

    fn spend_dwell(&mut self) {
        if let Some(d) = self.dwell.as_mut() {
            d.spent = true;
        }
    }

    fn release_drag(&mut self, out: &mut Out<'_>) {
        if self.mode == Mode::DragActive {
            let at = self.cursor.unwrap_or_default();
            out.push(EventKind::DragEnd(at));
        }
    }

    fn stroke(&self, cfg: &ControllerConfig, screen: Size) -> Option<Stroke> {
        if self.trail.len() < 2 {
            return None;
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &self.trail {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        let (dx, dy) = (x1 - x0, y1 - y0);
        let (w, h) = (screen.w(), screen.h());
        if dy > cfg.stroke_major_frac * h && dx < cfg.stroke_minor_frac * w {
            Some(Stroke::Vertical)
        } else if dx > cfg.stroke_major_frac * w && dy < cfg.stroke_minor_frac * h {
            Some(Stroke::Horizontal)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stroke {
    Vertical,
    Horizontal,
}

/// Functional form of [`ControllerState::step`].
pub fn step(
    mut state: ControllerState,
    obs: Option<ScreenPoint>,
    frame: u64,
    cfg: &ControllerConfig,
    geom: &RegionGeometry,
) -> (ControllerState, Vec<CommandEvent>) {
    let events = state.step(obs, frame, cfg, geom);
    (state, events)
}

/// A controller bundled with its configuration.
#[derive(Debug, Clone)]
pub struct Controller {
    pub cfg: ControllerConfig,
    pub geom: RegionGeometry,
    state: ControllerState,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, screen: Size) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            geom: RegionGeometry::new(screen),
            state: ControllerState::new(),
        })
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn step(&mut self, obs: Option<ScreenPoint>, frame: u64) -> Vec<CommandEvent> {
        self.state.step(obs, frame, &self.cfg, &self.geom)
    }

    pub fn reset(&mut self) {
        let last = self.state.last_frame;
        self.state = ControllerState::new();
        self.state.last_frame = last;
    }
}
