//! Synthetic camera.
//!
//! Stands in for the webcam, red filter and projector: a screen image is
//! warped into camera space through a known homography, green and blue are
//! attenuated the way the red filter suppresses them, and the laser is drawn
//! as an over-exposed Gaussian spot that saturates the blue plane. Optional
//! single-coefficient radial distortion and per-pixel Gaussian noise make the
//! failure modes measurable.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{solve_raw, CalibError, Homography};
use crate::geom::{CameraPoint, ScreenPoint, Size};
use crate::imaging::Frame;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{kind:?} backgrounds need a 1024x768 screen, got {width}x{height}")]
    UnsupportedResolution {
        kind: BackgroundKind,
        width: u32,
        height: u32,
    },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Calib(#[from] CalibError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundKind {
    Red,
    Green,
    Blue,
    Multi,
    Slides,
}

impl std::str::FromStr for BackgroundKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "red" => Ok(Self::Red),
            "green" => Ok(Self::Green),
            "blue" => Ok(Self::Blue),
            "multi" => Ok(Self::Multi),
            "slides" => Ok(Self::Slides),
            other => Err(format!(
                "unknown background kind {other:?} (expected red, green, blue, multi or slides)"
            )),
        }
    }
}

pub const BLOCK: u32 = 256;
pub const BLOCK_COLS: u32 = 4;
pub const BLOCK_ROWS: u32 = 3;

fn fill_rect(img: &mut Frame, x0: u32, y0: u32, w: u32, h: u32, rgb: [u8; 3]) {
    let x1 = (x0 + w).min(img.width());
    let y1 = (y0 + h).min(img.height());
    for r in y0..y1 {
        for c in x0..x1 {
            img.set_pixel(c, r, rgb);
        }
    }
}

/// Deterministic screen image for the given seed.
///
/// The single-channel kinds fill eleven of the twelve 256x256 blocks with
/// distinct intensities of that channel and one randomly placed block with
/// white; `multi` fills every block with a random colour; `slides` draws a
/// title bar and text-like bars on a light page.
pub fn make_background(kind: BackgroundKind, seed: u64, screen: Size) -> Result<Frame, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block_kind = kind != BackgroundKind::Slides;
    if block_kind && (screen.width != BLOCK * BLOCK_COLS || screen.height != BLOCK * BLOCK_ROWS) {
        return Err(SimError::UnsupportedResolution {
            kind,
            width: screen.width,
            height: screen.height,
        });
    }
    if screen.width == 0 || screen.height == 0 {
        return Err(SimError::InvalidScene("empty screen".into()));
    }
    let mut img = Frame::black(screen.width, screen.height);
    let n_blocks = (BLOCK_COLS * BLOCK_ROWS) as usize;
    let block_origin = |i: usize| ((i as u32 % BLOCK_COLS) * BLOCK, (i as u32 / BLOCK_COLS) * BLOCK);

    match kind {
        BackgroundKind::Red | BackgroundKind::Green | BackgroundKind::Blue => {
            let channel = match kind {
                BackgroundKind::Red => 0,
                BackgroundKind::Green => 1,
                _ => 2,
            };
            let white = rng.random_range(0..n_blocks);
            let mut levels = index::sample(&mut rng, 255, n_blocks - 1)
                .into_iter()
                .map(|v| v as u8 + 1);
            for i in 0..n_blocks {
                let (x, y) = block_origin(i);
                let rgb = if i == white {
                    [255, 255, 255]
                } else {
                    let mut c = [0u8; 3];
                    c[channel] = levels.next().expect("eleven levels");
                    c
                };
                fill_rect(&mut img, x, y, BLOCK, BLOCK, rgb);
            }
        }
        BackgroundKind::Multi => {
            for i in 0..n_blocks {
                let (x, y) = block_origin(i);
                let rgb: [u8; 3] = rng.random();
                fill_rect(&mut img, x, y, BLOCK, BLOCK, rgb);
            }
        }
        BackgroundKind::Slides => {
            let (w, h) = (screen.width, screen.height);
            fill_rect(&mut img, 0, 0, w, h, [248, 248, 242]);
            let title: [u8; 3] = [rng.random_range(20..120), rng.random_range(40..140), rng.random_range(120..220)];
            fill_rect(&mut img, 0, 0, w, h / 7, title);
            // title text
            fill_rect(&mut img, w / 12, h / 28, w / 2, h / 14, [255, 255, 255]);
            let line_h = (h / 32).max(1);
            let mut y = h / 7 + h / 12;
            while y + line_h < h - h / 12 {
                let indent = if rng.random_bool(0.3) { w / 8 } else { w / 14 };
                let len = rng.random_range(w / 5..w * 3 / 4);
                fill_rect(&mut img, indent, y, len, line_h, [40, 40, 48]);
                y += line_h * 2 + rng.random_range(0..line_h);
            }
            if rng.random_bool(0.5) {
                let pic: [u8; 3] = rng.random();
                fill_rect(&mut img, w * 2 / 3, h / 3, w / 4, h / 3, pic);
            }
        }
    }
    Ok(img)
}

/// Laser spot appearance in camera space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpotModel {
    /// Saturation level of the spot in the blue plane.
    pub peak: u8,
    /// Gaussian radius in camera pixels.
    pub sigma: f64,
    /// Over-exposure factor: the unclipped profile peaks at `gain * peak`.
    pub gain: f64,
    /// Red and green response relative to blue.
    pub red_bleed: f64,
    pub green_bleed: f64,
}

impl Default for SpotModel {
    fn default() -> Self {
        Self {
            peak: 255,
            sigma: 1.2,
            gain: 8.0,
            red_bleed: 0.5,
            green_bleed: 0.3,
        }
    }
}

/// Noise level at which the lowest per-frame spot minimum over the
/// reference sweep lands just above the default threshold.
pub const REFERENCE_NOISE_SIGMA: f64 = 12.0;

/// Barrel distortion that puts the worst grid-region mapping error near
/// 10 screen pixels with the default keystone.
pub const REFERENCE_K1: f64 = -3.3e-7;

/// Camera-space corners of the projected display, as fractions of the
/// camera frame, used when no explicit warp is configured.
const DEFAULT_KEYSTONE: [[f64; 2]; 4] = [
    [62.0 / 640.0, 48.0 / 480.0],
    [590.0 / 640.0, 36.0 / 480.0],
    [608.0 / 640.0, 446.0 / 480.0],
    [40.0 / 640.0, 430.0 / 480.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    #[serde(with = "size_pair")]
    pub screen: Size,
    #[serde(with = "size_pair")]
    pub camera: Size,
    /// Screen-to-camera map; a mild keystone when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warp: Option<Homography>,
    /// Radial distortion coefficient, per squared camera pixel.
    pub k1: f64,
    pub noise_sigma: f64,
    /// Per-channel gain applied to the screen image (red filter).
    pub ambient: [f64; 3],
    pub spot: SpotModel,
    /// Fraction of the frame interval the shutter is open.
    pub exposure: f64,
    pub seed: u64,
    pub fps: f64,
}

mod size_pair {
    use super::Size;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: &Size, ser: S) -> Result<S::Ok, S::Error> {
        [s.width, s.height].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Size, D::Error> {
        let [w, h] = <[u32; 2]>::deserialize(de)?;
        Ok(Size::new(w, h))
    }
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            screen: Size::new(1024, 768),
            camera: Size::new(640, 480),
            warp: None,
            k1: 0.0,
            noise_sigma: 0.0,
            ambient: [1.0, 0.15, 0.15],
            spot: SpotModel::default(),
            exposure: 0.5,
            seed: 0,
            fps: 30.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScene(m.to_owned()));
        if self.screen.width == 0 || self.screen.height == 0 {
            return bad("screen must be non-empty");
        }
        if self.camera.width == 0 || self.camera.height == 0 {
            return bad("camera must be non-empty");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be a finite non-negative number");
        }
        if !(self.spot.sigma > 0.0 && self.spot.gain >= 1.0) {
            return bad("spot sigma must be positive and gain at least 1");
        }
        if !(0.0..=1.0).contains(&self.exposure) {
            return bad("exposure must lie in [0, 1]");
        }
        if self.ambient.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("ambient scales must lie in [0, 1]");
        }
        if !(self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if !self.k1.is_finite() {
            return bad("k1 must be finite");
        }
        self.true_warp()?.inverse()?;
        Ok(())
    }

    /// The configured screen-to-camera homography.
    pub fn true_warp(&self) -> Result<Homography, SimError> {
        if let Some(h) = self.warp {
            return Ok(h);
        }
        let (sw, sh) = (self.screen.w(), self.screen.h());
        let src = [[0.0, 0.0], [sw, 0.0], [sw, sh], [0.0, sh]];
        let dst = DEFAULT_KEYSTONE.map(|[fx, fy]| [fx * self.camera.w(), fy * self.camera.h()]);
        Ok(solve_raw(&src, &dst)?)
    }

    /// Screen == camera space with an identity warp.
    pub fn identity(size: Size) -> Self {
        Self {
            screen: size,
            camera: size,
            warp: Some(Homography::IDENTITY),
            ..Self::default()
        }
    }

    pub fn camera_center(&self) -> (f64, f64) {
        ((self.camera.w() - 1.0) / 2.0, (self.camera.h() - 1.0) / 2.0)
    }
}

/// Radial distortion about the camera center, `r' = r (1 + k1 r^2)`.
#[derive(Debug, Clone, Copy)]
pub struct RadialDistortion {
    pub k1: f64,
    pub cx: f64,
    pub cy: f64,
}

impl RadialDistortion {
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let s = 1.0 + self.k1 * (dx * dx + dy * dy);
        (self.cx + dx * s, self.cy + dy * s)
    }

    /// Inverse of [`distort`](Self::distort) by Newton iteration on the radius.
    pub fn undistort(&self, x: f64, y: f64) -> (f64, f64) {
        if self.k1 == 0.0 {
            return (x, y);
        }
        let (dx, dy) = (x - self.cx, y - self.cy);
        let rd = dx.hypot(dy);
        if rd == 0.0 {
            return (x, y);
        }
        let mut r = rd;
        for _ in 0..20 {
            let f = r * (1.0 + self.k1 * r * r) - rd;
            let df = 1.0 + 3.0 * self.k1 * r * r;
            let step = f / df;
            r -= step;
            if step.abs() < 1e-12 {
                break;
            }
        }
        let s = r / rd;
        (self.cx + dx * s, self.cy + dy * s)
    }
}

/// Laser input for one captured frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaserState {
    pub on: bool,
    pub pos: ScreenPoint,
    /// Position at the previous frame, when the laser was on then; the spot
    /// is smeared along the path covered while the shutter is open.
    pub prev: Option<ScreenPoint>,
}

impl LaserState {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn at(x: f64, y: f64) -> Self {
        Self {
            on: true,
            pos: ScreenPoint::new(x, y),
            prev: None,
        }
    }

    pub fn moving(from: ScreenPoint, to: ScreenPoint) -> Self {
        Self {
            on: true,
            pos: to,
            prev: Some(from),
        }
    }
}

/// What the renderer knows about a frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub laser_on: bool,
    /// True screen position of the laser.
    pub screen: Option<ScreenPoint>,
    /// Where that position lands in the (distorted) camera image.
    pub camera: Option<CameraPoint>,
    /// Pixels `[col, row]` where the noise-free spot saturates, or its
    /// single brightest pixel when none does.
    pub region: Vec<[u32; 2]>,
}

#[derive(Debug, Clone)]
pub struct Capture {
    pub frame: Frame,
    pub truth: GroundTruth,
}

/// A camera looking at a fixed screen image. The warped background is
/// computed once; each capture adds the spot and noise.
#[derive(Debug, Clone)]
pub struct SimCamera {
    scene: SceneConfig,
    warp: Homography,
    distortion: RadialDistortion,
    base: Frame,
}

fn bilinear(img: &Frame, x: f64, y: f64) -> Option<[f64; 3]> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if x < -0.5 || y < -0.5 || x > w - 0.5 || y > h - 0.5 {
        return None;
    }
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let (x0, y0) = (x.floor() as u32, y.floor() as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let mut out = [0.0; 3];
    for (ch, plane) in [img.red(), img.green(), img.blue()].into_iter().enumerate() {
        let at = |c: u32, r: u32| plane[img.offset(c, r)] as f64;
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        out[ch] = top * (1.0 - fy) + bot * fy;
    }
    Some(out)
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

impl SimCamera {
    pub fn new(scene: SceneConfig, background: &Frame) -> Result<Self, SimError> {
        scene.validate()?;
        if (background.width(), background.height()) != (scene.screen.width, scene.screen.height) {
            return Err(SimError::InvalidScene(format!(
                "background is {}x{}, screen is {}x{}",
                background.width(),
                background.height(),
                scene.screen.width,
                scene.screen.height
            )));
        }
        let warp = scene.true_warp()?;
        let inv = warp.inverse()?;
        let (cx, cy) = scene.camera_center();
        let distortion = RadialDistortion { k1: scene.k1, cx, cy };

        let mut base = Frame::black(scene.camera.width, scene.camera.height);
        for row in 0..scene.camera.height {
            for col in 0..scene.camera.width {
                let (ux, uy) = distortion.undistort(col as f64, row as f64);
                // behind the camera plane or at infinity: nothing projected there
                if inv.w_at(ux, uy) <= 0.0 {
                    continue;
                }
                let Ok((sx, sy)) = inv.apply(ux, uy) else { continue };
                if let Some(rgb) = bilinear(background, sx, sy) {
                    base.set_pixel(
                        col,
                        row,
                        [
                            to_u8(rgb[0] * scene.ambient[0]),
                            to_u8(rgb[1] * scene.ambient[1]),
                            to_u8(rgb[2] * scene.ambient[2]),
                        ],
                    );
                }
            }
        }
        Ok(Self {
            scene,
            warp,
            distortion,
            base,
        })
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    /// The noise-free frame with the laser off.
    pub fn base(&self) -> &Frame {
        &self.base
    }

    /// Where a screen point appears in the camera image.
    pub fn project(&self, p: ScreenPoint) -> Option<CameraPoint> {
        let (x, y) = self.warp.apply(p.x, p.y).ok()?;
        let (x, y) = self.distortion.distort(x, y);
        Some(CameraPoint::new(x, y))
    }

    /// Renders one frame. `index` selects the noise stream, so the same
    /// index always yields the same noise.
    pub fn capture(&self, laser: LaserState, index: u64) -> Capture {
        let mut frame = self.base.clone().with_index(index);
        let mut truth = GroundTruth {
            laser_on: laser.on,
            ..Default::default()
        };
        if laser.on {
            truth.screen = Some(laser.pos);
            truth.camera = self.project(laser.pos);
            truth.region = self.draw_spot(&mut frame, laser);
        }
        if self.scene.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.scene.seed);
            rng.set_stream(index);
            let normal = Normal::new(0.0, self.scene.noise_sigma).expect("validated sigma");
            for plane in frame.planes_mut() {
                for v in plane.iter_mut() {
                    *v = to_u8(*v as f64 + normal.sample(&mut rng));
                }
            }
        }
        Capture { frame, truth }
    }

    fn draw_spot(&self, frame: &mut Frame, laser: LaserState) -> Vec<[u32; 2]> {
        let spot = self.scene.spot;
        let exposure = self.scene.exposure;
        let centers: Vec<(f64, f64)> = match laser.prev {
            Some(prev) if exposure > 0.0 => {
                let a = self.project(prev);
                let b = self.project(laser.pos);
                let len = match (a, b) {
                    (Some(a), Some(b)) => (a.x - b.x).hypot(a.y - b.y) * exposure,
                    _ => 0.0,
                };
                let k = ((len / 0.25).ceil() as usize).clamp(1, 512);
                (0..k)
                    .filter_map(|i| {
                        let t = 1.0 - exposure * (1.0 - (i as f64 + 0.5) / k as f64);
                        let p = ScreenPoint::new(
                            prev.x + (laser.pos.x - prev.x) * t,
                            prev.y + (laser.pos.y - prev.y) * t,
                        );
                        self.project(p).map(|c| (c.x, c.y))
                    })
                    .collect()
            }
            _ => self.project(laser.pos).map(|c| (c.x, c.y)).into_iter().collect(),
        };
        if centers.is_empty() {
            return Vec::new();
        }

        let reach = 5.0 * spot.sigma + 1.0;
        let (w, h) = (frame.width() as f64, frame.height() as f64);
        let x0 = centers.iter().map(|c| c.0).fold(f64::MAX, f64::min) - reach;
        let x1 = centers.iter().map(|c| c.0).fold(f64::MIN, f64::max) + reach;
        let y0 = centers.iter().map(|c| c.1).fold(f64::MAX, f64::min) - reach;
        let y1 = centers.iter().map(|c| c.1).fold(f64::MIN, f64::max) + reach;
        if x1 < 0.0 || y1 < 0.0 || x0 > w - 1.0 || y0 > h - 1.0 {
            return Vec::new();
        }
        let (c0, c1) = (x0.max(0.0).ceil() as u32, x1.min(w - 1.0).floor() as u32);
        let (r0, r1) = (y0.max(0.0).ceil() as u32, y1.min(h - 1.0).floor() as u32);

        let inv2s2 = 1.0 / (2.0 * spot.sigma * spot.sigma);
        let amp = spot.peak as f64 * spot.gain;
        let n = centers.len() as f64;
        let mut region = Vec::new();
        let mut brightest = (0.0, [0u32; 2]);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let profile = centers
                    .iter()
                    .map(|&(cx, cy)| {
                        let d2 = (col as f64 - cx).powi(2) + (row as f64 - cy).powi(2);
                        (-d2 * inv2s2).exp()
                    })
                    .sum::<f64>()
                    / n;
                if profile * spot.gain >= 1.0 {
                    region.push([col, row]);
                }
                if profile > brightest.0 {
                    brightest = (profile, [col, row]);
                }
                let add = amp * profile;
                if add < 0.5 {
                    continue;
                }
                let i = frame.offset(col, row);
                let px = [frame.red()[i], frame.green()[i], frame.blue()[i]];
                let peak = spot.peak as f64;
                let blue = (px[2] as f64 + add).min(peak.max(px[2] as f64));
                let red = px[0] as f64 + add * spot.red_bleed;
                let green = px[1] as f64 + add * spot.green_bleed;
                frame.set_pixel(col, row, [to_u8(red), to_u8(green), to_u8(blue)]);
            }
        }
        // a fast streak may never saturate; its peak pixel stands in
        if region.is_empty() && brightest.0 > 0.0 {
            region.push(brightest.1);
        }
        region
    }
}

/// One-shot render without keeping the camera around.
pub fn render(
    scene: &SceneConfig,
    background: &Frame,
    laser: LaserState,
    index: u64,
) -> Result<Capture, SimError> {
    Ok(SimCamera::new(scene.clone(), background)?.capture(laser, index))
}
