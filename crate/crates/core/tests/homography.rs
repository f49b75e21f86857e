use laps_core::calib::{check_quad, screen_corners, solve_raw};
use laps_core::{in_roi, map_point, solve_homography, CameraPoint, Homography, ScreenPoint, Size};
use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCREEN: Size = Size {
    width: 1024,
    height: 768,
};

fn random_convex_quad(rng: &mut ChaCha8Rng) -> [CameraPoint; 4] {
    loop {
        let j = |rng: &mut ChaCha8Rng| rng.random_range(-120.0..120.0);
        let q = [
            [100.0 + j(rng), 80.0 + j(rng)],
            [540.0 + j(rng), 80.0 + j(rng)],
            [540.0 + j(rng), 400.0 + j(rng)],
            [100.0 + j(rng), 400.0 + j(rng)],
        ];
        if check_quad(&q).is_ok() {
            return q.map(|[x, y]| CameraPoint::new(x, y));
        }
    }
}

/// Homography via the SVD null space of the 8x9 system, independent of the
/// elimination used by the solver.
fn dlt_oracle(src: &[CameraPoint; 4], dst: &[ScreenPoint; 4]) -> Matrix3<f64> {
    let mut a = DMatrix::<f64>::zeros(9, 9);
    for i in 0..4 {
        let (x, y, u, v) = (src[i].x, src[i].y, dst[i].x, dst[i].y);
        let r = [
            [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u],
            [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v],
        ];
        for (k, row) in r.iter().enumerate() {
            for (c, val) in row.iter().enumerate() {
                a[(2 * i + k, c)] = *val;
            }
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.unwrap();
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let h = vt.row(min_idx);
    Matrix3::from_row_slice(&h.iter().copied().collect::<Vec<_>>()) / h[8]
}

fn apply(m: &Matrix3<f64>, x: f64, y: f64) -> (f64, f64) {
    let v = m * Vector3::new(x, y, 1.0);
    (v[0] / v[2], v[1] / v[2])
}

#[test]
fn random_quads_reproduce_corners_and_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dst = screen_corners(SCREEN);
    for _ in 0..1000 {
        let src = random_convex_quad(&mut rng);
        let h = solve_homography(&src, &dst).unwrap();
        for i in 0..4 {
            let p = map_point(&h, src[i]).unwrap();
            assert!(p.distance(&dst[i]) < 1e-9, "corner {i}: {p:?} vs {:?}", dst[i]);
        }
        // inverse from nalgebra, not from Homography::inverse
        let m = Matrix3::from_row_slice(h.entries());
        let inv = m.try_inverse().unwrap();
        for _ in 0..100 {
            let (u, v) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let top = (src[0].x + (src[1].x - src[0].x) * u, src[0].y + (src[1].y - src[0].y) * u);
            let bot = (src[3].x + (src[2].x - src[3].x) * u, src[3].y + (src[2].y - src[3].y) * u);
            let p = CameraPoint::new(top.0 + (bot.0 - top.0) * v, top.1 + (bot.1 - top.1) * v);
            let s = map_point(&h, p).unwrap();
            let back = apply(&inv, s.x, s.y);
            assert!((back.0 - p.x).abs() < 1e-6 && (back.1 - p.y).abs() < 1e-6);
        }
    }
}

#[test]
fn solver_agrees_with_svd_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dst = screen_corners(SCREEN);
    for _ in 0..200 {
        let src = random_convex_quad(&mut rng);
        let h = solve_homography(&src, &dst).unwrap();
        let oracle = dlt_oracle(&src, &dst);
        for (a, b) in h.entries().iter().zip(oracle.transpose().iter()) {
            assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn analytic_cases() {
    let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let dst = [[0.0, 0.0], [1024.0, 0.0], [1024.0, 768.0], [0.0, 768.0]];
    let h = solve_raw(&sq, &dst).unwrap();
    let expected = [1024.0, 0.0, 0.0, 0.0, 768.0, 0.0, 0.0, 0.0, 1.0];
    for (a, b) in h.entries().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    let h = solve_raw(&dst, &dst).unwrap();
    for (a, b) in h.entries().iter().zip(Homography::IDENTITY.entries()) {
        assert!((a - b).abs() < 1e-12);
    }
}

/// Even-odd ray casting; shares nothing with the edge-sign test.
fn ray_cast(quad: &[CameraPoint; 4], p: CameraPoint) -> bool {
    let mut inside = false;
    for i in 0..4 {
        let (a, b) = (quad[i], quad[(i + 1) % 4]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

#[test]
fn roi_matches_ray_casting() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let quad = random_convex_quad(&mut rng);
        for _ in 0..1000 {
            let p = CameraPoint::new(rng.random_range(-20.0..660.0), rng.random_range(-20.0..500.0));
            assert_eq!(in_roi(&quad, p), ray_cast(&quad, p), "{p:?} in {quad:?}");
        }
    }
}

proptest! {
    #[test]
    fn strictly_inside_maps_onto_screen(
        seed in any::<u64>(),
        u in 0.001f64..0.999,
        v in 0.001f64..0.999,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_convex_quad(&mut rng);
        let h = solve_homography(&src, &screen_corners(SCREEN)).unwrap();
        let top = (src[0].x + (src[1].x - src[0].x) * u, src[0].y + (src[1].y - src[0].y) * u);
        let bot = (src[3].x + (src[2].x - src[3].x) * u, src[3].y + (src[2].y - src[3].y) * u);
        let p = CameraPoint::new(top.0 + (bot.0 - top.0) * v, top.1 + (bot.1 - top.1) * v);
        prop_assert!(in_roi(&src, p));
        let s = map_point(&h, p).unwrap();
        prop_assert!(s.x >= -1e-6 && s.x <= 1024.0 + 1e-6);
        prop_assert!(s.y >= -1e-6 && s.y <= 768.0 + 1e-6);
    }

    #[test]
    fn inverse_round_trips(seed in any::<u64>(), x in 0.0f64..640.0, y in 0.0f64..480.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_convex_quad(&mut rng);
        let h = solve_homography(&src, &screen_corners(SCREEN)).unwrap();
        prop_assume!(h.w_at(x, y).abs() > 1e-6);
        let inv = h.inverse().unwrap();
        let s = map_point(&h, CameraPoint::new(x, y)).unwrap();
        let back = map_point(&inv, CameraPoint::new(s.x, s.y)).unwrap();
        prop_assert!((back.x - x).abs() < 1e-6 && (back.y - y).abs() < 1e-6);
    }
}
