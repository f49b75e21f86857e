use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use laps_core::pipeline::CalibrationSpec;
use laps_core::{
    detect, make_background, solve_homography, BackgroundKind, CameraPoint, ControllerConfig, DetectorConfig,
    LaserState, Pipeline, SceneConfig, ScreenPoint, SimCamera,
};

fn scene() -> SceneConfig {
    SceneConfig::default()
}

fn bench_detect(c: &mut Criterion) {
    let scene = scene();
    let bg = make_background(BackgroundKind::Multi, 1, scene.screen).unwrap();
    let cam = SimCamera::new(scene, &bg).unwrap();
    let cfg = DetectorConfig::default();
    let hit = cam.capture(LaserState::at(400.0, 300.0), 0).frame;
    let miss = cam.capture(LaserState::default(), 1).frame;
    c.bench_function("detect/spot", |b| b.iter(|| detect(black_box(&hit), &cfg)));
    c.bench_function("detect/empty", |b| b.iter(|| detect(black_box(&miss), &cfg)));
}

fn bench_homography(c: &mut Criterion) {
    let src = [
        CameraPoint::new(64.0, 48.0),
        CameraPoint::new(590.0, 60.0),
        CameraPoint::new(600.0, 440.0),
        CameraPoint::new(40.0, 420.0),
    ];
    let dst = [
        ScreenPoint::new(0.0, 0.0),
        ScreenPoint::new(1024.0, 0.0),
        ScreenPoint::new(1024.0, 768.0),
        ScreenPoint::new(0.0, 768.0),
    ];
    c.bench_function("solve_homography", |b| {
        b.iter(|| solve_homography(black_box(&src), black_box(&dst)))
    });
}

fn bench_render(c: &mut Criterion) {
    let scene = scene();
    let bg = make_background(BackgroundKind::Slides, 2, scene.screen).unwrap();
    let cam = SimCamera::new(scene, &bg).unwrap();
    let mut i = 0;
    c.bench_function("simcam/capture", |b| {
        b.iter(|| {
            i += 1;
            cam.capture(LaserState::at(500.0, 380.0), i)
        })
    });
}

fn bench_process(c: &mut Criterion) {
    let scene = scene();
    let bg = make_background(BackgroundKind::Multi, 3, scene.screen).unwrap();
    let mut p = Pipeline::new(scene, &bg, DetectorConfig::default(), ControllerConfig::default()).unwrap();
    p.auto_calibrate(CalibrationSpec::default()).unwrap();
    let cap = p.capture(true, ScreenPoint::new(512.0, 384.0));
    let mut frame = 0;
    c.bench_function("pipeline/process_frame", |b| {
        b.iter(|| {
            frame += 1;
            p.process_frame(frame, black_box(&cap.frame))
        })
    });
}

criterion_group!(benches, bench_detect, bench_homography, bench_render, bench_process);
criterion_main!(benches);
