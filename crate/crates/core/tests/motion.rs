use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rrpipe::io::TrackRow;
use rrpipe::motion::{
    estimate_affine, fit_affine, propagate_roi, residual, track_roi, AffineTransform, PointSet, RoiPolygon,
};
use rrpipe::synth::{gen_point_tracks, smooth_motion};
use rrpipe::Error;

fn params(a: &AffineTransform) -> [f64; 6] {
    let l = a.linear();
    let t = a.translation();
    [l[0][0], l[0][1], l[1][0], l[1][1], t[0], t[1]]
}

/// Per output coordinate, the 3×3 normal equations in homogeneous form
/// `[x y 1]ᵀ[x y 1] · θ = [x y 1]ᵀ q`, solved independently.
fn homogeneous_oracle(src: &[[f64; 2]], dst: &[[f64; 2]]) -> [f64; 6] {
    let mut m = Matrix3::<f64>::zeros();
    let mut bx = Vector3::<f64>::zeros();
    let mut by = Vector3::<f64>::zeros();
    for (p, q) in src.iter().zip(dst) {
        let h = Vector3::new(p[0], p[1], 1.0);
        m += h * h.transpose();
        bx += h * q[0];
        by += h * q[1];
    }
    let inv = m.try_inverse().expect("non-degenerate points");
    let rx = inv * bx;
    let ry = inv * by;
    [rx[0], rx[1], ry[0], ry[1], rx[2], ry[2]]
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect()
}

#[test]
fn noisy_known_transform_matches_oracle() {
    let a = AffineTransform::new([[1.02, -0.05], [0.04, 0.98]], [1.5, -0.7]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let src = random_points(&mut rng, 20);
    let exact: Vec<[f64; 2]> = src.iter().map(|p| a.apply(*p)).collect();
    let fit = fit_affine(&src, &exact).unwrap();
    for (x, y) in params(&fit.transform).iter().zip(params(&a)) {
        assert!((x - y).abs() <= 1e-9);
    }

    let noise = Normal::new(0.0, 0.1).unwrap();
    let noisy: Vec<[f64; 2]> = exact
        .iter()
        .map(|q| [q[0] + noise.sample(&mut rng), q[1] + noise.sample(&mut rng)])
        .collect();
    let fit = fit_affine(&src, &noisy).unwrap();
    for (x, y) in params(&fit.transform).iter().zip(homogeneous_oracle(&src, &noisy)) {
        assert!((x - y).abs() <= 1e-9);
    }
    assert!((fit.residual - residual(&fit.transform, &src, &noisy)).abs() < 1e-12);
}

#[test]
fn fit_is_locally_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let src = random_points(&mut rng, 25);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let dst: Vec<[f64; 2]> = src
        .iter()
        .map(|p| [0.9 * p[0] + 0.1 * p[1] + 3.0 + noise.sample(&mut rng), p[1] - 2.0 + noise.sample(&mut rng)])
        .collect();
    let fit = fit_affine(&src, &dst).unwrap();
    let best = fit.residual;
    for _ in 0..100 {
        let mut p = params(&fit.transform);
        for v in &mut p {
            *v += rng.random_range(-1e-3..1e-3);
        }
        let other = AffineTransform::new([[p[0], p[1]], [p[2], p[3]]], [p[4], p[5]]).unwrap();
        assert!(best <= residual(&other, &src, &dst));
    }
}

#[test]
fn propagate_examples() {
    let tri = RoiPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
    assert_eq!(propagate_roi(&tri, &AffineTransform::identity()), tri);
    let moved = propagate_roi(&tri, &AffineTransform::translation_only(2.0, 3.0));
    assert_eq!(moved.vertices(), &[[2.0, 3.0], [3.0, 3.0], [2.0, 4.0]]);
}

#[test]
fn propagate_then_inverse_restores() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let poly = RoiPolygon::new(vec![[10.0, 10.0], [60.0, 12.0], [70.0, 55.0], [35.0, 80.0], [8.0, 50.0]]).unwrap();
    for _ in 0..50 {
        let a = AffineTransform::new(
            [[rng.random_range(0.5..1.5), rng.random_range(-0.3..0.3)], [
                rng.random_range(-0.3..0.3),
                rng.random_range(0.5..1.5),
            ]],
            [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)],
        )
        .unwrap();
        let back = propagate_roi(&propagate_roi(&poly, &a), &a.inverse());
        for (u, v) in back.vertices().iter().zip(poly.vertices()) {
            assert!((u[0] - v[0]).abs() <= 1e-9 && (u[1] - v[1]).abs() <= 1e-9);
        }
    }
}

fn square_roi() -> RoiPolygon {
    RoiPolygon::new(vec![[30.0, 30.0], [70.0, 30.0], [70.0, 70.0], [30.0, 70.0]]).unwrap()
}

#[test]
fn static_tracks_keep_roi() {
    let motion = vec![AffineTransform::identity(); 9];
    let (rows, _) = gen_point_tracks(12, 10, &motion, 0.0, 4).unwrap();
    let track = track_roi(&square_roi(), &rows).unwrap();
    assert_eq!(track.polygons.len(), 10);
    for p in &track.polygons {
        for (u, v) in p.vertices().iter().zip(square_roi().vertices()) {
            assert!((u[0] - v[0]).abs() < 1e-9 && (u[1] - v[1]).abs() < 1e-9);
        }
    }
}

#[test]
fn smooth_motion_is_recovered() {
    let n_frames = 60;
    let motion = smooth_motion(n_frames, 5);
    let (rows, truth) = gen_point_tracks(20, n_frames, &motion, 0.0, 6).unwrap();
    let track = track_roi(&square_roi(), &rows).unwrap();
    assert_eq!(track.frames.len(), n_frames);
    for (pair, a) in track.pairs.iter().zip(&truth) {
        for (x, y) in params(&pair.transform).iter().zip(params(a)) {
            assert!((x - y).abs() <= 1e-9);
        }
        assert_eq!(pair.n_points, 20);
    }
    let mut expected = square_roi();
    for (f, poly) in track.polygons.iter().enumerate() {
        if f > 0 {
            expected = propagate_roi(&expected, &truth[f - 1]);
        }
        for (u, v) in poly.vertices().iter().zip(expected.vertices()) {
            assert!((u[0] - v[0]).abs() <= 1e-6 && (u[1] - v[1]).abs() <= 1e-6);
        }
    }
}

#[test]
fn frame_composition_matches_chain() {
    let motion = smooth_motion(15, 7);
    let (rows, truth) = gen_point_tracks(10, 15, &motion, 0.0, 8).unwrap();
    let track = track_roi(&square_roi(), &rows).unwrap();
    let mut composed = AffineTransform::identity();
    for a in &truth {
        composed = a.compose(&composed);
    }
    let direct = propagate_roi(&square_roi(), &composed);
    for (u, v) in track.polygons.last().unwrap().vertices().iter().zip(direct.vertices()) {
        assert!((u[0] - v[0]).abs() <= 1e-6 && (u[1] - v[1]).abs() <= 1e-6);
    }
}

#[test]
fn lost_points_name_the_frame_pair() {
    let motion = vec![AffineTransform::translation_only(1.0, 0.0); 4];
    let (mut rows, _) = gen_point_tracks(5, 5, &motion, 0.0, 9).unwrap();
    // frame 3 keeps only two of the five points
    rows.retain(|r| r.frame != 3 || r.point_id < 2);
    let err = track_roi(&square_roi(), &rows).unwrap_err();
    match err {
        Error::DegenerateGeometry { frame_pair, .. } => assert_eq!(frame_pair, Some((2, 3))),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn collinear_points_are_degenerate() {
    let src: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, 2.0 * i as f64 + 1.0]).collect();
    let err = fit_affine(&src, &src).unwrap_err();
    assert!(matches!(err, Error::DegenerateGeometry { .. }));
}

#[test]
fn missing_points_are_dropped_per_pair() {
    let a = PointSet::new(vec![1, 2, 3, 4], vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]).unwrap();
    let b = PointSet::new(vec![1, 2, 3, 9], vec![[1.0, 1.0], [2.0, 1.0], [1.0, 2.0], [0.0, 0.0]]).unwrap();
    let fit = estimate_affine(&a, &b).unwrap();
    assert_eq!(fit.n_points, 3);
    assert!((fit.transform.translation()[0] - 1.0).abs() < 1e-12);
}

#[test]
fn non_consecutive_frames_rejected() {
    let rows = vec![
        TrackRow { frame: 0, point_id: 0, x: 0.0, y: 0.0 },
        TrackRow { frame: 2, point_id: 0, x: 0.0, y: 0.0 },
    ];
    assert!(track_roi(&square_roi(), &rows).unwrap_err().is_validation());
}

fn affine_strategy() -> impl Strategy<Value = AffineTransform> {
    (prop::array::uniform4(-3.0f64..3.0), prop::array::uniform2(-100.0f64..100.0))
        .prop_filter("invertible", |(l, _)| (l[0] * l[3] - l[1] * l[2]).abs() > 0.05)
        .prop_map(|(l, t)| AffineTransform::new([[l[0], l[1]], [l[2], l[3]]], t).unwrap())
}

proptest! {
    #[test]
    fn exact_images_are_recovered(a in affine_strategy(), seed in 0u64..10_000, n in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_points(&mut rng, n);
        let dst: Vec<[f64; 2]> = src.iter().map(|p| a.apply(*p)).collect();
        if let Ok(fit) = fit_affine(&src, &dst) {
            for (x, y) in params(&fit.transform).iter().zip(params(&a)) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn translation_equivariance(seed in 0u64..10_000, d in prop::array::uniform2(-50.0f64..50.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_points(&mut rng, 15);
        let dst: Vec<[f64; 2]> = src
            .iter()
            .map(|p| [1.1 * p[0] - 0.2 * p[1] + rng.random_range(-1.0..1.0), 0.3 * p[0] + p[1] + rng.random_range(-1.0..1.0)])
            .collect();
        let shift = |v: &[[f64; 2]]| v.iter().map(|p| [p[0] + d[0], p[1] + d[1]]).collect::<Vec<_>>();
        let base = fit_affine(&src, &dst).unwrap().transform;
        let moved = fit_affine(&shift(&src), &shift(&dst)).unwrap().transform;
        let l = base.linear();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((moved.linear()[i][j] - l[i][j]).abs() <= 1e-9);
            }
        }
        // t' = t + (I − L)·d
        let expect = [
            base.translation()[0] + d[0] - (l[0][0] * d[0] + l[0][1] * d[1]),
            base.translation()[1] + d[1] - (l[1][0] * d[0] + l[1][1] * d[1]),
        ];
        prop_assert!((moved.translation()[0] - expect[0]).abs() <= 1e-8);
        prop_assert!((moved.translation()[1] - expect[1]).abs() <= 1e-8);
    }
}
