//! Four-corner calibration and the camera-to-screen projective map.
//!
//! The presenter holds the laser on each screen corner in turn. The mean
//! detected camera position of each corner forms a quadrilateral (the region
//! of interest), and the homography taking those four points to the screen
//! corners maps every later detection into screen pixels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{cross, CameraPoint, ScreenPoint, Size};
use crate::spot::SpotDetection;

/// Smallest determinant magnitude (after normalization) of an accepted matrix.
pub const MIN_DETERMINANT: f64 = 1e-12;
/// Smallest |W'| for which a point is mapped.
pub const MIN_W: f64 = 1e-12;
/// Distance below which a corner counts as lying on the line through two others.
pub const COLLINEAR_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("matrix is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("point maps to infinity (W' = {0:e})")]
    PointAtInfinity(f64),
    #[error("quadrilateral is degenerate: {0}")]
    DegenerateQuad(&'static str),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("calibration is already complete")]
    AlreadyComplete,
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A 3x3 projective map, row-major, normalized so the last entry is 1
/// whenever it is non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    p: [f64; 9],
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = CalibError;

    fn try_from(p: [f64; 9]) -> Result<Self, Self::Error> {
        Homography::new(p)
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        h.p
    }
}

fn det3(p: &[f64; 9]) -> f64 {
    p[0] * (p[4] * p[8] - p[5] * p[7]) - p[1] * (p[3] * p[8] - p[5] * p[6])
        + p[2] * (p[3] * p[7] - p[4] * p[6])
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        p: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };

    pub fn new(mut p: [f64; 9]) -> Result<Self, CalibError> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::NonFinite);
        }
        if p[8] != 0.0 {
            let s = p[8];
            p.iter_mut().for_each(|v| *v /= s);
        }
        let det = det3(&p);
        if det.abs() <= MIN_DETERMINANT {
            return Err(CalibError::Singular(det));
        }
        Ok(Self { p })
    }

    pub fn scale(sx: f64, sy: f64) -> Result<Self, CalibError> {
        Self::new([sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn entries(&self) -> &[f64; 9] {
        &self.p
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.p)
    }

    /// Applies the map to raw coordinates.
    pub fn apply(&self, x: f64, y: f64) -> Result<(f64, f64), CalibError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(CalibError::NonFinite);
        }
        let p = &self.p;
        let xp = p[0] * x + p[1] * y + p[2];
        let yp = p[3] * x + p[4] * y + p[5];
        let wp = p[6] * x + p[7] * y + p[8];
        if wp.abs() < MIN_W {
            return Err(CalibError::PointAtInfinity(wp));
        }
        Ok((xp / wp, yp / wp))
    }

    /// Homogeneous denominator W' at (x, y).
    pub fn w_at(&self, x: f64, y: f64) -> f64 {
        self.p[6] * x + self.p[7] * y + self.p[8]
    }

    pub fn inverse(&self) -> Result<Homography, CalibError> {
        let p = &self.p;
        let det = self.determinant();
        if det.abs() <= MIN_DETERMINANT {
            return Err(CalibError::Singular(det));
        }
        // adjugate / det
        let adj = [
            p[4] * p[8] - p[5] * p[7],
            p[2] * p[7] - p[1] * p[8],
            p[1] * p[5] - p[2] * p[4],
            p[5] * p[6] - p[3] * p[8],
            p[0] * p[8] - p[2] * p[6],
            p[2] * p[3] - p[0] * p[5],
            p[3] * p[7] - p[4] * p[6],
            p[1] * p[6] - p[0] * p[7],
            p[0] * p[4] - p[1] * p[3],
        ];
        Homography::new(adj.map(|v| v / det))
    }

    /// `self` after `first`: maps x to self(first(x)).
    pub fn compose(&self, first: &Homography) -> Result<Homography, CalibError> {
        let (a, b) = (&self.p, &first.p);
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = (0..3).map(|k| a[r * 3 + k] * b[k * 3 + c]).sum();
            }
        }
        Homography::new(out)
    }
}

/// Maps a camera point to screen coordinates.
pub fn map_point(h: &Homography, p: CameraPoint) -> Result<ScreenPoint, CalibError> {
    h.apply(p.x, p.y).map(ScreenPoint::from)
}

/// Checks that four points, in order, form a convex non-degenerate quad.
pub fn check_quad(q: &[[f64; 2]; 4]) -> Result<(), CalibError> {
    if q.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CalibError::NonFinite);
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            for k in (j + 1)..4 {
                let (a, b, c) = (q[i], q[j], q[k]);
                // distance from each point to the line through the other two
                let area2 = cross(a, b, c).abs();
                let longest = [(a, b), (b, c), (a, c)]
                    .iter()
                    .map(|(u, v)| (u[0] - v[0]).hypot(u[1] - v[1]))
                    .fold(0.0f64, f64::max);
                if longest == 0.0 || area2 / longest < COLLINEAR_TOL {
                    return Err(CalibError::DegenerateQuad("three corners are collinear"));
                }
            }
        }
    }
    let signs: Vec<f64> = (0..4)
        .map(|i| cross(q[i], q[(i + 1) % 4], q[(i + 2) % 4]))
        .collect();
    let all_pos = signs.iter().all(|&s| s > 0.0);
    let all_neg = signs.iter().all(|&s| s < 0.0);
    if !(all_pos || all_neg) {
        return Err(CalibError::DegenerateQuad("quadrilateral is not convex"));
    }
    Ok(())
}

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
fn solve_linear<const N: usize>(
    mut a: [[f64; N]; N],
    mut b: [f64; N],
) -> Result<[f64; N], CalibError> {
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= scale * 1e-14 {
            return Err(CalibError::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..N {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = ((row + 1)..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Solves the homography taking each `src[i]` to `dst[i]`, with the last
/// matrix entry fixed to 1.
pub fn solve_raw(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Homography, CalibError> {
    check_quad(src)?;
    check_quad(dst)?;
    let mut a = [[0.0; 8]; 8];
    let mut b = [0.0; 8];
    for i in 0..4 {
        let [x, y] = src[i];
        let [u, v] = dst[i];
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u];
        b[2 * i] = u;
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v];
        b[2 * i + 1] = v;
    }
    let h = solve_linear(a, b)?;
    Homography::new([h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0])
}

pub fn solve_homography(
    src: &[CameraPoint; 4],
    dst: &[ScreenPoint; 4],
) -> Result<Homography, CalibError> {
    solve_raw(&src.map(|p| [p.x, p.y]), &dst.map(|p| [p.x, p.y]))
}

/// Inside-or-on-boundary test against a convex quad.
pub fn in_roi(quad: &[CameraPoint; 4], p: CameraPoint) -> bool {
    let q = quad.map(|c| [c.x, c.y]);
    let pt = [p.x, p.y];
    let mut pos = false;
    let mut neg = false;
    for i in 0..4 {
        let c = cross(q[i], q[(i + 1) % 4], pt);
        pos |= c > 0.0;
        neg |= c < 0.0;
    }
    !(pos && neg)
}

/// Prescribed corner sequence: top-left, top-right, bottom-right, bottom-left.
pub fn screen_corners(screen: Size) -> [ScreenPoint; 4] {
    let (w, h) = (screen.w(), screen.h());
    [
        ScreenPoint::new(0.0, 0.0),
        ScreenPoint::new(w, 0.0),
        ScreenPoint::new(w, h),
        ScreenPoint::new(0.0, h),
    ]
}

pub const CORNER_NAMES: [&str; 4] = ["top left", "top right", "bottom right", "bottom left"];

/// A finished calibration. Serializes as
/// `{"p":[9 reals],"quad":[[x,y]x4],"screen":[w,h]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CalibrationDoc", into = "CalibrationDoc")]
pub struct Calibration {
    pub homography: Homography,
    pub quad: [CameraPoint; 4],
    pub screen: Size,
}

#[derive(Serialize, Deserialize)]
struct CalibrationDoc {
    p: [f64; 9],
    quad: [[f64; 2]; 4],
    screen: [u32; 2],
}

impl TryFrom<CalibrationDoc> for Calibration {
    type Error = CalibError;

    fn try_from(d: CalibrationDoc) -> Result<Self, Self::Error> {
        Ok(Calibration {
            homography: Homography::new(d.p)?,
            quad: d.quad.map(|[x, y]| CameraPoint::new(x, y)),
            screen: Size::new(d.screen[0], d.screen[1]),
        })
    }
}

impl From<Calibration> for CalibrationDoc {
    fn from(c: Calibration) -> Self {
        CalibrationDoc {
            p: *c.homography.entries(),
            quad: c.quad.map(|p| [p.x, p.y]),
            screen: [c.screen.width, c.screen.height],
        }
    }
}

impl Calibration {
    pub fn from_quad(quad: [CameraPoint; 4], screen: Size) -> Result<Self, CalibError> {
        let homography = solve_homography(&quad, &screen_corners(screen))?;
        Ok(Self {
            homography,
            quad,
            screen,
        })
    }

    pub fn in_roi(&self, p: CameraPoint) -> bool {
        in_roi(&self.quad, p)
    }

    /// ROI check then projection; `None` for points outside the ROI.
    pub fn locate(&self, p: CameraPoint) -> Option<ScreenPoint> {
        if !self.in_roi(p) {
            return None;
        }
        map_point(&self.homography, p).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationProgress {
    /// Still collecting the given corner.
    Collecting { corner: usize, samples: usize },
    Complete(Calibration),
    /// The four means did not form a usable quad; collection restarts.
    Failed(CalibError),
}

/// Collects per-corner laser detections and solves the homography.
#[derive(Debug, Clone)]
pub struct CalibrationSession {
    targets: [ScreenPoint; 4],
    screen: Size,
    samples_per_corner: usize,
    corner: usize,
    collected: Vec<CameraPoint>,
    means: Vec<CameraPoint>,
    result: Option<Calibration>,
}

impl CalibrationSession {
    pub const DEFAULT_SAMPLES: usize = 10;

    pub fn new(screen: Size) -> Self {
        Self::with_targets(screen, screen_corners(screen), Self::DEFAULT_SAMPLES)
    }

    pub fn with_targets(screen: Size, targets: [ScreenPoint; 4], samples_per_corner: usize) -> Self {
        Self {
            targets,
            screen,
            samples_per_corner: samples_per_corner.max(1),
            corner: 0,
            collected: Vec::with_capacity(samples_per_corner),
            means: Vec::with_capacity(4),
            result: None,
        }
    }

    pub fn current_corner(&self) -> usize {
        self.corner
    }

    pub fn samples(&self) -> &[CameraPoint] {
        &self.collected
    }

    pub fn corner_means(&self) -> &[CameraPoint] {
        &self.means
    }

    pub fn samples_per_corner(&self) -> usize {
        self.samples_per_corner
    }

    pub fn target(&self, corner: usize) -> ScreenPoint {
        self.targets[corner]
    }

    pub fn is_complete(&self) -> bool {
        self.result.is_some()
    }

    pub fn result(&self) -> Option<&Calibration> {
        self.result.as_ref()
    }

    fn restart(&mut self) {
        self.corner = 0;
        self.collected.clear();
        self.means.clear();
    }

    pub fn feed(&mut self, det: Option<&SpotDetection>) -> Result<CalibrationProgress, CalibError> {
        if self.result.is_some() {
            return Err(CalibError::AlreadyComplete);
        }
        let Some(det) = det else {
            return Ok(CalibrationProgress::Collecting {
                corner: self.corner,
                samples: self.collected.len(),
            });
        };
        self.collected.push(det.centroid);
        if self.collected.len() < self.samples_per_corner {
            return Ok(CalibrationProgress::Collecting {
                corner: self.corner,
                samples: self.collected.len(),
            });
        }

        let n = self.collected.len() as f64;
        let mean = CameraPoint::new(
            self.collected.iter().map(|p| p.x).sum::<f64>() / n,
            self.collected.iter().map(|p| p.y).sum::<f64>() / n,
        );
        self.means.push(mean);
        self.collected.clear();
        self.corner += 1;
        if self.corner < 4 {
            return Ok(CalibrationProgress::Collecting {
                corner: self.corner,
                samples: 0,
            });
        }

        let quad = [self.means[0], self.means[1], self.means[2], self.means[3]];
        match solve_homography(&quad, &self.targets) {
            Ok(homography) => {
                let cal = Calibration {
                    homography,
                    quad,
                    screen: self.screen,
                };
                self.result = Some(cal.clone());
                Ok(CalibrationProgress::Complete(cal))
            }
            Err(e) => {
                self.restart();
                Ok(CalibrationProgress::Failed(e))
            }
        }
    }
}

/// Functional form of [`CalibrationSession::feed`].
pub fn feed_calibration(
    mut session: CalibrationSession,
    det: Option<&SpotDetection>,
) -> Result<(CalibrationSession, CalibrationProgress), CalibError> {
    let progress = session.feed(det)?;
    Ok((session, progress))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spot::BoundingBox;

    fn det(x: f64, y: f64) -> SpotDetection {
        SpotDetection {
            centroid: CameraPoint::new(x, y),
            n: 1,
            bbox: BoundingBox {
                min_col: x as u32,
                min_row: y as u32,
                max_col: x as u32,
                max_row: y as u32,
            },
        }
    }

    fn pts<P: From<(f64, f64)>>(v: [(f64, f64); 4]) -> [P; 4] {
        v.map(P::from)
    }

    #[test]
    fn identity_when_src_equals_dst() {
        let q = [(3.0, 4.0), (200.0, 10.0), (220.0, 150.0), (5.0, 170.0)];
        let h = solve_homography(&pts(q), &pts(q)).unwrap();
        for (a, b) in h.entries().iter().zip(Homography::IDENTITY.entries()) {
            assert!((a - b).abs() < 1e-12, "{:?}", h);
        }
    }

    #[test]
    fn unit_square_to_screen_is_pure_scale() {
        let src = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let dst = [(0.0, 0.0), (1024.0, 0.0), (1024.0, 768.0), (0.0, 768.0)];
        let h = solve_homography(&pts(src), &pts(dst)).unwrap();
        let want = [1024.0, 0.0, 0.0, 0.0, 768.0, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in h.entries().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12, "{:?}", h);
        }
    }

    #[test]
    fn map_point_examples() {
        let p = map_point(&Homography::IDENTITY, CameraPoint::new(100.0, 200.0)).unwrap();
        assert_eq!(p, ScreenPoint::new(100.0, 200.0));
        let s = Homography::scale(1024.0, 768.0).unwrap();
        let p = map_point(&s, CameraPoint::new(0.5, 0.5)).unwrap();
        assert_eq!(p, ScreenPoint::new(512.0, 384.0));
    }

    #[test]
    fn point_at_infinity_is_an_error() {
        let h = Homography::new([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            map_point(&h, CameraPoint::new(-1.0, 3.0)),
            Err(CalibError::PointAtInfinity(_))
        ));
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(matches!(
            Homography::new([1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]),
            Err(CalibError::Singular(_))
        ));
    }

    #[test]
    fn scaling_all_entries_changes_nothing() {
        let q = [(10.0, 20.0), (600.0, 35.0), (630.0, 460.0), (25.0, 440.0)];
        let dst = [(0.0, 0.0), (1024.0, 0.0), (1024.0, 768.0), (0.0, 768.0)];
        let h = solve_homography(&pts(q), &pts(dst)).unwrap();
        let scaled = Homography::new(h.entries().map(|v| v * 7.3)).unwrap();
        for &(x, y) in &[(100.0, 100.0), (320.0, 240.0), (500.0, 400.0)] {
            let a = map_point(&h, CameraPoint::new(x, y)).unwrap();
            let b = map_point(&scaled, CameraPoint::new(x, y)).unwrap();
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_quads_rejected() {
        let dst = pts::<ScreenPoint>([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let collinear = pts::<CameraPoint>([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.0, 5.0)]);
        assert!(matches!(
            solve_homography(&collinear, &dst),
            Err(CalibError::DegenerateQuad(_))
        ));
        // bow-tie
        let twisted = pts::<CameraPoint>([(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]);
        assert!(matches!(
            solve_homography(&twisted, &dst),
            Err(CalibError::DegenerateQuad(_))
        ));
        // reflex vertex
        let dart = pts::<CameraPoint>([(0.0, 0.0), (10.0, 0.0), (2.0, 2.0), (0.0, 10.0)]);
        assert!(solve_homography(&dart, &dst).is_err());
    }

    #[test]
    fn roi_membership() {
        let q = pts::<CameraPoint>([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        assert!(in_roi(&q, CameraPoint::new(5.0, 5.0)));
        assert!(!in_roi(&q, CameraPoint::new(11.0, 5.0)));
        assert!(in_roi(&q, CameraPoint::new(10.0, 5.0)));
        assert!(in_roi(&q, CameraPoint::new(0.0, 0.0)));
        // counter-clockwise order works too
        let mut rev = q;
        rev.reverse();
        assert!(in_roi(&rev, CameraPoint::new(5.0, 5.0)));
        assert!(!in_roi(&rev, CameraPoint::new(-0.1, 5.0)));
    }

    #[test]
    fn constant_corner_samples_average_exactly() {
        let mut s = CalibrationSession::new(Size::new(1024, 768));
        for i in 0..10 {
            let p = s.feed(Some(&det(50.0, 40.0))).unwrap();
            if i < 9 {
                assert_eq!(p, CalibrationProgress::Collecting { corner: 0, samples: i + 1 });
            } else {
                assert_eq!(p, CalibrationProgress::Collecting { corner: 1, samples: 0 });
            }
        }
        assert_eq!(s.corner_means(), &[CameraPoint::new(50.0, 40.0)]);
    }

    #[test]
    fn two_point_mean() {
        let mut s = CalibrationSession::new(Size::new(1024, 768));
        for _ in 0..5 {
            s.feed(Some(&det(10.0, 10.0))).unwrap();
            s.feed(Some(&det(12.0, 14.0))).unwrap();
        }
        assert_eq!(s.corner_means(), &[CameraPoint::new(11.0, 12.0)]);
    }

    #[test]
    fn absent_detection_is_a_no_op() {
        let s = CalibrationSession::new(Size::new(1024, 768));
        let (s, p) = feed_calibration(s, Some(&det(1.0, 1.0))).unwrap();
        let before = s.samples().to_vec();
        let (s, p2) = feed_calibration(s, None).unwrap();
        assert_eq!(p, p2);
        assert_eq!(s.samples(), &before[..]);
        assert_eq!(s.current_corner(), 0);
    }

    #[test]
    fn full_session_yields_scale_homography() {
        let targets = pts::<ScreenPoint>([(0.0, 0.0), (1023.0, 0.0), (1023.0, 767.0), (0.0, 767.0)]);
        let corners = [(0.0, 0.0), (639.0, 0.0), (639.0, 479.0), (0.0, 479.0)];
        let mut s = CalibrationSession::with_targets(Size::new(1024, 768), targets, 10);
        let mut last = None;
        for &(x, y) in &corners {
            for _ in 0..10 {
                last = Some(s.feed(Some(&det(x, y))).unwrap());
            }
        }
        let Some(CalibrationProgress::Complete(cal)) = last else {
            panic!("expected completion, got {last:?}");
        };
        for (c, t) in corners.iter().zip(targets.iter()) {
            let m = map_point(&cal.homography, CameraPoint::new(c.0, c.1)).unwrap();
            assert!((m.x - t.x).abs() < 1e-9 && (m.y - t.y).abs() < 1e-9);
        }
        let e = cal.homography.entries();
        assert!((e[0] - 1023.0 / 639.0).abs() < 1e-12);
        assert!((e[4] - 767.0 / 479.0).abs() < 1e-12);
        assert!(e[1].abs() < 1e-12 && e[6].abs() < 1e-15 && e[7].abs() < 1e-15);
        assert!(matches!(s.feed(None), Err(CalibError::AlreadyComplete)));
    }

    #[test]
    fn degenerate_corners_reset_the_session() {
        let mut s = CalibrationSession::with_targets(
            Size::new(1024, 768),
            screen_corners(Size::new(1024, 768)),
            1,
        );
        for &(x, y) in &[(0.0, 0.0), (10.0, 10.0), (20.0, 20.0)] {
            s.feed(Some(&det(x, y))).unwrap();
        }
        let p = s.feed(Some(&det(0.0, 50.0))).unwrap();
        assert!(matches!(p, CalibrationProgress::Failed(CalibError::DegenerateQuad(_))));
        assert_eq!(s.current_corner(), 0);
        assert!(s.corner_means().is_empty());
        assert!(!s.is_complete());
    }

    #[test]
    fn calibration_json_uses_exact_field_names() {
        let quad = pts::<CameraPoint>([(10.0, 20.0), (600.0, 35.0), (630.0, 460.0), (25.0, 440.0)]);
        let cal = Calibration::from_quad(quad, Size::new(1024, 768)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&cal).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["p", "quad", "screen"]);
        assert_eq!(obj["p"].as_array().unwrap().len(), 9);
        assert_eq!(obj["screen"], serde_json::json!([1024, 768]));
        let back: Calibration = serde_json::from_value(v).unwrap();
        assert_eq!(back, cal);
    }
}
