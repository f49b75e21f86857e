use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use laps_core::metrics::MetricsReport;
use laps_core::scenario::check_requirements;
use laps_core::simcam::SpotModel;
use laps_core::spot::{threshold_histogram, ThresholdHistogram};
use laps_core::{
    check_expectations, directory_source, make_background, run_scenario, save_frame, BackgroundKind,
    DetectorConfig, Frame, LaserState, ScenarioScript, SceneConfig, SimCamera,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Name of the ground-truth sidecar written next to a generated corpus.
pub const TRUTH_FILE: &str = "truth.jsonl";

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub kind: BackgroundKind,
    pub count: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Noise sigma, or the final sigma of a ramp.
    pub noise: f64,
    /// Ramp noise linearly from 0 to `noise` across the corpus.
    pub noise_ramp: bool,
    pub k1: f64,
    /// Render in screen space: identity warp, no colour filter.
    pub ideal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub file: String,
    pub index: u64,
    pub background_seed: u64,
    pub noise_sigma: f64,
    pub laser_on: bool,
    pub screen: Option<[f64; 2]>,
    pub camera: Option<[f64; 2]>,
    /// Saturated spot pixels `[col, row]`.
    pub region: Vec<[u32; 2]>,
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

fn gen_scene(opts: &GenOptions, noise: f64) -> SceneConfig {
    let base = if opts.ideal {
        SceneConfig {
            ambient: [1.0, 1.0, 1.0],
            ..SceneConfig::identity(SceneConfig::default().screen)
        }
    } else {
        SceneConfig::default()
    };
    SceneConfig {
        k1: opts.k1,
        noise_sigma: noise,
        seed: opts.seed,
        spot: SpotModel::default(),
        ..base
    }
}

/// Renders a corpus of `count` frames, each over a fresh background and
/// with the laser at a random on-screen position.
pub fn gen(opts: &GenOptions) -> Result<Vec<TruthRecord>> {
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut truth = Vec::with_capacity(opts.count);
    for i in 0..opts.count {
        let noise = if opts.noise_ramp && opts.count > 1 {
            opts.noise * i as f64 / (opts.count - 1) as f64
        } else {
            opts.noise
        };
        let scene = gen_scene(opts, noise);
        let bg_seed = opts.seed.wrapping_add(i as u64);
        let bg = make_background(opts.kind, bg_seed, scene.screen)?;
        let cam = SimCamera::new(scene.clone(), &bg)?;
        let (w, h) = (scene.screen.w(), scene.screen.h());
        let x = rng.random_range(0.05 * w..0.95 * w);
        let y = rng.random_range(0.05 * h..0.95 * h);
        let cap = cam.capture(LaserState::at(x, y), i as u64);
        let file = format!("{i:05}.ppm");
        save_frame(&cap.frame, opts.out.join(&file))?;
        truth.push(TruthRecord {
            file,
            index: i as u64,
            background_seed: bg_seed,
            noise_sigma: noise,
            laser_on: true,
            screen: cap.truth.screen.map(|p| [p.x, p.y]),
            camera: cap.truth.camera.map(|p| [p.x, p.y]),
            region: cap.truth.region,
        });
    }
    let mut w = BufWriter::new(File::create(opts.out.join(TRUTH_FILE))?);
    for t in &truth {
        writeln!(w, "{}", serde_json::to_string(t)?)?;
    }
    w.flush()?;
    Ok(truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub file: String,
    pub index: u64,
    pub detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramDump {
    pub threshold: u8,
    pub bin_width: u32,
    pub frames: u64,
    /// Nonzero bins as `[lo, hi, count]`, `lo` inclusive.
    pub bins: Vec<[u64; 3]>,
    pub lowest_bin: Option<[u32; 2]>,
    pub all_mass_above_threshold_bin: bool,
}

impl HistogramDump {
    fn new(h: &ThresholdHistogram) -> Self {
        let bins = h
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| {
                let (lo, hi) = ThresholdHistogram::bin_range(i);
                [lo as u64, hi as u64, c]
            })
            .collect();
        Self {
            threshold: h.threshold,
            bin_width: h.bin_width,
            frames: h.total(),
            bins,
            lowest_bin: h.lowest_bin().map(|i| {
                let (lo, hi) = ThresholdHistogram::bin_range(i);
                [lo, hi]
            }),
            all_mass_above_threshold_bin: h.all_mass_above_threshold_bin(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub input: PathBuf,
    pub threshold: u8,
    /// JSON-lines output; stdout when absent.
    pub out: Option<PathBuf>,
    /// Also write the spot-minimum histogram, which needs the truth sidecar.
    pub histogram: Option<PathBuf>,
}

pub fn detect_dir(opts: &DetectOptions) -> Result<Vec<DetectionRecord>> {
    let cfg = DetectorConfig {
        threshold: opts.threshold,
        ..DetectorConfig::default()
    };
    let source = directory_source(&opts.input)?;
    let paths = source.paths().to_vec();
    let mut frames: Vec<Frame> = Vec::new();
    let mut records = Vec::with_capacity(paths.len());
    for (path, frame) in paths.iter().zip(source) {
        let frame = frame?;
        let d = laps_core::detect(&frame, &cfg);
        records.push(DetectionRecord {
            file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            index: frame.index,
            detected: d.is_some(),
            x: d.map(|d| d.centroid.x),
            y: d.map(|d| d.centroid.y),
            n: d.map(|d| d.n),
        });
        if opts.histogram.is_some() {
            frames.push(frame);
        }
    }

    let mut out: Box<dyn Write> = match &opts.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for r in &records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    out.flush()?;

    if let Some(hist_path) = &opts.histogram {
        let truth_path = opts.input.join(TRUTH_FILE);
        if !truth_path.exists() {
            bail!("--histogram needs the ground-truth sidecar {}", truth_path.display());
        }
        let truth = read_truth(&truth_path)?;
        let regions: Vec<Option<&[[u32; 2]]>> = records
            .iter()
            .map(|r| {
                truth
                    .iter()
                    .find(|t| t.file == r.file)
                    .filter(|t| !t.region.is_empty())
                    .map(|t| t.region.as_slice())
            })
            .collect();
        let h = threshold_histogram(frames.iter().zip(regions), &cfg)?;
        fs::write(hist_path, serde_json::to_string_pretty(&HistogramDump::new(&h))?)?;
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub scenario: PathBuf,
    pub report: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: MetricsReport,
    /// Golden-list and requirement mismatches, one line each.
    pub mismatches: Vec<String>,
}

pub fn run(opts: &RunOptions) -> Result<RunOutcome> {
    let script = ScenarioScript::load(&opts.scenario)?;
    let result = run_scenario(&script)?;
    let events = result.events();
    let report = MetricsReport::from_trace(&result.trace);

    if let Some(p) = &opts.events {
        let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        for e in &events {
            writeln!(w, "{}", e.to_json_line())?;
        }
        w.flush()?;
    }
    if let Some(p) = &opts.report {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }

    let mut mismatches = Vec::new();
    if let Some(expect) = &script.expect {
        if let Err(diff) = check_expectations(expect, &events) {
            mismatches.extend(diff);
        }
    }
    if let Some(req) = &script.require {
        if let Err(diff) = check_requirements(req, &report) {
            mismatches.extend(diff);
        }
    }
    Ok(RunOutcome { report, mismatches })
}
