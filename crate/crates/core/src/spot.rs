//! Laser spot detection on the blue plane.
//!
//! Under a red filter the laser spot is the only thing in view whose blue
//! intensity exceeds the threshold, so detection is a single pass over the
//! blue plane: every pixel strictly brighter than the threshold is taken to
//! belong to the spot, and the spot center is the unweighted mean of their
//! coordinates. Red and green planes are never read.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::CameraPoint;
use crate::imaging::Frame;

#[derive(Debug, Error, PartialEq)]
pub enum SpotError {
    #[error("min_pixels ({min}) must be >= 1 and <= max_pixels ({max})")]
    PixelBounds { min: u32, max: u32 },
    #[error("frame {0} has no ground-truth spot region")]
    MissingTruth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Blue intensity a pixel must strictly exceed.
    pub threshold: u8,
    pub min_pixels: u32,
    /// More above-threshold pixels than this means a washed-out frame, not a spot.
    pub max_pixels: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 200,
            min_pixels: 1,
            max_pixels: 400,
        }
    }
}

impl DetectorConfig {
    pub fn with_threshold(threshold: u8) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SpotError> {
        if self.min_pixels == 0 || self.min_pixels > self.max_pixels {
            return Err(SpotError::PixelBounds {
                min: self.min_pixels,
                max: self.max_pixels,
            });
        }
        Ok(())
    }
}

/// Inclusive pixel bounds of the above-threshold set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_col: u32,
    pub min_row: u32,
    pub max_col: u32,
    pub max_row: u32,
}

impl BoundingBox {
    pub fn contains(&self, p: CameraPoint) -> bool {
        p.x >= self.min_col as f64
            && p.x <= self.max_col as f64
            && p.y >= self.min_row as f64
            && p.y <= self.max_row as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotDetection {
    pub centroid: CameraPoint,
    pub n: u32,
    pub bbox: BoundingBox,
}

/// Finds the laser spot, or `None` when the above-threshold pixel count is
/// outside `[min_pixels, max_pixels]`.
pub fn detect(frame: &Frame, cfg: &DetectorConfig) -> Option<SpotDetection> {
    let width = frame.width() as usize;
    let blue = frame.blue();
    let t = cfg.threshold;

    let mut n: u64 = 0;
    let mut sum_x: u64 = 0;
    let mut sum_y: u64 = 0;
    let (mut min_c, mut min_r, mut max_c, mut max_r) = (u32::MAX, u32::MAX, 0u32, 0u32);

    for (row, line) in blue.chunks_exact(width).enumerate() {
        for (col, &v) in line.iter().enumerate() {
            if v > t {
                n += 1;
                sum_x += col as u64;
                sum_y += row as u64;
                let (c, r) = (col as u32, row as u32);
                min_c = min_c.min(c);
                max_c = max_c.max(c);
                min_r = min_r.min(r);
                max_r = max_r.max(r);
            }
        }
        // Bail out early on washed-out frames.
        if n > cfg.max_pixels as u64 {
            return None;
        }
    }

    if n < cfg.min_pixels.max(1) as u64 {
        return None;
    }
    Some(SpotDetection {
        centroid: CameraPoint::new(sum_x as f64 / n as f64, sum_y as f64 / n as f64),
        n: n as u32,
        bbox: BoundingBox {
            min_col: min_c,
            min_row: min_r,
            max_col: max_c,
            max_row: max_r,
        },
    })
}

pub const HISTOGRAM_BIN_WIDTH: u32 = 5;
pub const HISTOGRAM_BINS: usize = 256usize.div_ceil(HISTOGRAM_BIN_WIDTH as usize);

/// Histogram of per-frame minimum blue intensity inside the true spot region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdHistogram {
    pub bin_width: u32,
    pub counts: Vec<u64>,
    pub threshold: u8,
}

impl ThresholdHistogram {
    fn empty(threshold: u8) -> Self {
        Self {
            bin_width: HISTOGRAM_BIN_WIDTH,
            counts: vec![0; HISTOGRAM_BINS],
            threshold,
        }
    }

    pub fn bin_of(value: u8) -> usize {
        value as usize / HISTOGRAM_BIN_WIDTH as usize
    }

    /// `[lo, hi)` intensity range of bin `i`.
    pub fn bin_range(i: usize) -> (u32, u32) {
        let lo = i as u32 * HISTOGRAM_BIN_WIDTH;
        (lo, lo + HISTOGRAM_BIN_WIDTH)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lowest bin with a nonzero count.
    pub fn lowest_bin(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c > 0)
    }

    /// True when every sample lies in a bin strictly above the one holding
    /// the detector threshold.
    pub fn all_mass_above_threshold_bin(&self) -> bool {
        let tb = Self::bin_of(self.threshold);
        self.counts[..=tb].iter().all(|&c| c == 0)
    }
}

/// Builds the spot-minimum histogram. Each sample pairs a frame with the
/// pixel coordinates `[col, row]` of its true spot region.
pub fn threshold_histogram<'a, I>(
    samples: I,
    cfg: &DetectorConfig,
) -> Result<ThresholdHistogram, SpotError>
where
    I: IntoIterator<Item = (&'a Frame, Option<&'a [[u32; 2]]>)>,
{
    let mut hist = ThresholdHistogram::empty(cfg.threshold);
    for (i, (frame, region)) in samples.into_iter().enumerate() {
        let region = match region {
            Some(r) if !r.is_empty() => r,
            _ => return Err(SpotError::MissingTruth(i)),
        };
        let min = region
            .iter()
            .filter(|[c, r]| *c < frame.width() && *r < frame.height())
            .map(|&[c, r]| frame.blue()[frame.offset(c, r)])
            .min()
            .ok_or(SpotError::MissingTruth(i))?;
        hist.counts[ThresholdHistogram::bin_of(min)] += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank() -> Frame {
        Frame::black(640, 480)
    }

    #[test]
    fn all_zero_blue_is_absent() {
        assert!(detect(&blank(), &DetectorConfig::default()).is_none());
    }

    #[test]
    fn singleton_spot() {
        let mut f = blank();
        f.set_pixel(100, 200, [0, 0, 255]);
        let d = detect(&f, &DetectorConfig::default()).unwrap();
        assert_eq!(d.centroid, CameraPoint::new(100.0, 200.0));
        assert_eq!(d.n, 1);
        assert_eq!(
            d.bbox,
            BoundingBox {
                min_col: 100,
                min_row: 200,
                max_col: 100,
                max_row: 200
            }
        );
    }

    #[test]
    fn two_by_two_block() {
        let mut f = blank();
        for c in 10..12 {
            for r in 20..22 {
                f.set_pixel(c, r, [0, 0, 255]);
            }
        }
        let d = detect(&f, &DetectorConfig::default()).unwrap();
        assert_eq!(d.centroid, CameraPoint::new(10.5, 20.5));
        assert_eq!(d.n, 4);
    }

    #[test]
    fn threshold_is_strict() {
        let f = Frame::filled(640, 480, [0, 0, 200]);
        assert!(detect(&f, &DetectorConfig::default()).is_none());

        let mut f = blank();
        f.set_pixel(5, 5, [0, 0, 200]);
        assert!(detect(&f, &DetectorConfig::default()).is_none());
        f.set_pixel(5, 5, [0, 0, 201]);
        assert!(detect(&f, &DetectorConfig::default()).is_some());
    }

    #[test]
    fn washed_out_frame_is_absent() {
        let f = Frame::filled(640, 480, [0, 0, 255]);
        assert!(detect(&f, &DetectorConfig::default()).is_none());
    }

    #[test]
    fn min_pixels_rejects_specks() {
        let mut f = blank();
        f.set_pixel(5, 5, [0, 0, 255]);
        let cfg = DetectorConfig {
            min_pixels: 2,
            ..Default::default()
        };
        assert!(detect(&f, &cfg).is_none());
    }

    #[test]
    fn impossible_threshold_never_fires() {
        let f = Frame::filled(8, 8, [255, 255, 255]);
        assert!(detect(&f, &DetectorConfig::with_threshold(255)).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = DetectorConfig {
            min_pixels: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorConfig {
            min_pixels: 10,
            max_pixels: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn histogram_constant_input_fills_one_bin() {
        let mut frames = Vec::new();
        for _ in 0..4 {
            let mut f = blank();
            f.set_pixel(3, 3, [0, 0, 230]);
            f.set_pixel(4, 3, [0, 0, 250]);
            frames.push(f);
        }
        let region: &[[u32; 2]] = &[[3, 3], [4, 3]];
        let h =
            threshold_histogram(frames.iter().map(|f| (f, Some(region))), &Default::default())
                .unwrap();
        let nonzero: Vec<usize> = (0..HISTOGRAM_BINS).filter(|&i| h.counts[i] > 0).collect();
        assert_eq!(nonzero, vec![46]);
        assert_eq!(ThresholdHistogram::bin_range(46), (230, 235));
        assert_eq!(h.counts[46], 4);
        assert!(h.all_mass_above_threshold_bin());
    }

    #[test]
    fn histogram_of_nothing_is_zero() {
        let h = threshold_histogram(std::iter::empty(), &Default::default()).unwrap();
        assert_eq!(h.counts.len(), 52);
        assert_eq!(h.total(), 0);
        assert_eq!(h.lowest_bin(), None);
    }

    #[test]
    fn histogram_requires_truth() {
        let f = blank();
        let err = threshold_histogram([(&f, None)], &Default::default()).unwrap_err();
        assert_eq!(err, SpotError::MissingTruth(0));
    }
}
