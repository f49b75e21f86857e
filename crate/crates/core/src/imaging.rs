//! Frames and frame sources.
//!
//! A [`Frame`] is one captured RGB image stored as three separate 8-bit
//! planes. Frames are read from and written to binary PPM (P6) or 8-bit
//! RGB PNG; PPM is the canonical interchange format.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use thiserror::Error;

pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 480;
pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("plane length {got} does not match {width}x{height}")]
    PlaneSize { width: u32, height: u32, got: usize },
    #[error("frame dimensions must be non-zero")]
    EmptyFrame,
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: expected 8-bit RGB image, found {found}")]
    UnsupportedPixelFormat { path: PathBuf, found: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no frames found in {0}")]
    EmptyDirectory(PathBuf),
    #[error("{path}: frame is {got_w}x{got_h}, source is {want_w}x{want_h}")]
    DimensionMismatch {
        path: PathBuf,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
}

/// One RGB image, stored planar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    red: Vec<u8>,
    green: Vec<u8>,
    blue: Vec<u8>,
    pub index: u64,
}

impl Frame {
    pub fn new(
        width: u32,
        height: u32,
        red: Vec<u8>,
        green: Vec<u8>,
        blue: Vec<u8>,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyFrame);
        }
        let n = width as usize * height as usize;
        for plane in [&red, &green, &blue] {
            if plane.len() != n {
                return Err(ImagingError::PlaneSize {
                    width,
                    height,
                    got: plane.len(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            red,
            green,
            blue,
            index: 0,
        })
    }

    /// A frame with every sample of every plane set to `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, value: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            red: vec![value[0]; n],
            green: vec![value[1]; n],
            blue: vec![value[2]; n],
            index: 0,
        }
    }

    pub fn black(width: u32, height: u32) -> Self {
        Self::filled(width, height, [0, 0, 0])
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn red(&self) -> &[u8] {
        &self.red
    }

    pub fn green(&self) -> &[u8] {
        &self.green
    }

    pub fn blue(&self) -> &[u8] {
        &self.blue
    }

    pub fn red_mut(&mut self) -> &mut [u8] {
        &mut self.red
    }

    pub fn green_mut(&mut self) -> &mut [u8] {
        &mut self.green
    }

    pub fn blue_mut(&mut self) -> &mut [u8] {
        &mut self.blue
    }

    pub fn planes_mut(&mut self) -> [&mut [u8]; 3] {
        [&mut self.red, &mut self.green, &mut self.blue]
    }

    #[inline]
    pub fn offset(&self, col: u32, row: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    pub fn pixel(&self, col: u32, row: u32) -> [u8; 3] {
        let i = self.offset(col, row);
        [self.red[i], self.green[i], self.blue[i]]
    }

    pub fn set_pixel(&mut self, col: u32, row: u32, rgb: [u8; 3]) {
        let i = self.offset(col, row);
        self.red[i] = rgb[0];
        self.green[i] = rgb[1];
        self.blue[i] = rgb[2];
    }

    fn to_rgb_image(&self) -> RgbImage {
        let mut buf = Vec::with_capacity(self.red.len() * 3);
        for i in 0..self.red.len() {
            buf.extend_from_slice(&[self.red[i], self.green[i], self.blue[i]]);
        }
        RgbImage::from_raw(self.width, self.height, buf).expect("buffer sized from planes")
    }

    fn from_rgb_image(img: &RgbImage) -> Result<Self, ImagingError> {
        let (w, h) = img.dimensions();
        let n = w as usize * h as usize;
        let (mut r, mut g, mut b) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for px in img.as_raw().chunks_exact(3) {
            r.push(px[0]);
            g.push(px[1]);
            b.push(px[2]);
        }
        Frame::new(w, h, r, g, b)
    }
}

/// Reads an 8-bit RGB frame from a PPM (P6) or PNG file.
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame, ImagingError> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|source| ImagingError::Io {
            path: path.to_owned(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| ImagingError::Io {
            path: path.to_owned(),
            source,
        })?;
    let img = reader.decode().map_err(|source| ImagingError::Read {
        path: path.to_owned(),
        source,
    })?;
    match img {
        image::DynamicImage::ImageRgb8(rgb) => Frame::from_rgb_image(&rgb),
        other => Err(ImagingError::UnsupportedPixelFormat {
            path: path.to_owned(),
            found: format!("{:?}", other.color()),
        }),
    }
}

/// Writes a frame. `.png` paths get PNG, everything else binary PPM.
pub fn save_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => ImageFormat::Png,
        _ => ImageFormat::Pnm,
    };
    frame
        .to_rgb_image()
        .save_with_format(path, format)
        .map_err(|source| ImagingError::Write {
            path: path.to_owned(),
            source,
        })
}

/// A single-consumer stream of frames in index order.
pub trait FrameSource {
    fn next_frame(&mut self) -> Option<Result<Frame, ImagingError>>;

    fn nominal_fps(&self) -> f64 {
        DEFAULT_FPS
    }
}

/// Replays a directory of `NNNNN.ppm` / `.png` frames in lexicographic order.
#[derive(Debug)]
pub struct DirectorySource {
    files: Vec<PathBuf>,
    cursor: usize,
    dims: Option<(u32, u32)>,
    fps: f64,
}

pub fn directory_source(dir: impl AsRef<Path>) -> Result<DirectorySource, ImagingError> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| ImagingError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| ImagingError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let path = entry.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("png"))
            .unwrap_or(false);
        if is_frame && path.is_file() {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(ImagingError::EmptyDirectory(dir.to_owned()));
    }
    files.sort();
    Ok(DirectorySource {
        files,
        cursor: 0,
        dims: None,
        fps: DEFAULT_FPS,
    })
}

impl DirectorySource {
    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = fps;
        self
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl FrameSource for DirectorySource {
    fn next_frame(&mut self) -> Option<Result<Frame, ImagingError>> {
        let path = self.files.get(self.cursor)?;
        let index = self.cursor as u64;
        self.cursor += 1;
        let frame = match load_frame(path) {
            Ok(f) => f.with_index(index),
            Err(e) => return Some(Err(e)),
        };
        let dims = (frame.width(), frame.height());
        match self.dims {
            None => self.dims = Some(dims),
            Some((want_w, want_h)) if (want_w, want_h) != dims => {
                return Some(Err(ImagingError::DimensionMismatch {
                    path: path.clone(),
                    got_w: dims.0,
                    got_h: dims.1,
                    want_w,
                    want_h,
                }))
            }
            Some(_) => {}
        }
        Some(Ok(frame))
    }

    fn nominal_fps(&self) -> f64 {
        self.fps
    }
}

impl Iterator for DirectorySource {
    type Item = Result<Frame, ImagingError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame()
    }
}
