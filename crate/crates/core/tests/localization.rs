use ivsr_core::camera::{CameraError, CameraPose};
use ivsr_core::geometry::{PatchedScene, Scene, Surface, SurfaceKind};
use ivsr_core::incident::{DetectionRecord, Timestamp};
use ivsr_core::localization::{localize, pixel_to_ray, LocalizationError};
use ivsr_core::Vec3;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// World direction of pixel `(col, row)` from explicit rotation matrices:
/// `Rz(yaw) * Ry(-pitch) * Rx(-roll)` applied to the camera-frame vector
/// `(1, -x * tan(h/2), y * tan(v/2))` (forward +X, right -Y, up +Z).
fn oracle_direction(cam: &CameraPose, col: u32, row: u32) -> Vec3 {
    let x = (f64::from(col) + 0.5) / f64::from(cam.pixel_cols) * 2.0 - 1.0;
    let y = 1.0 - (f64::from(row) + 0.5) / f64::from(cam.pixel_rows) * 2.0;
    let tx = (cam.h_fov.to_radians() / 2.0).tan();
    let ty = (cam.v_fov.to_radians() / 2.0).tan();
    let v = [1.0, -x * tx, y * ty];
    let (a, b, c) = (-cam.roll.to_radians(), -cam.pitch.to_radians(), cam.yaw.to_radians());
    let rx = [[1.0, 0.0, 0.0], [0.0, a.cos(), -a.sin()], [0.0, a.sin(), a.cos()]];
    let ry = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
    let rz = [[c.cos(), -c.sin(), 0.0], [c.sin(), c.cos(), 0.0], [0.0, 0.0, 1.0]];
    let mul = |m: [[f64; 3]; 3], v: [f64; 3]| {
        [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
    };
    let w = mul(rz, mul(ry, mul(rx, v)));
    let d = Vec3::new(w[0], w[1], w[2]);
    d / d.length()
}

fn record(column: u32, row: u32) -> DetectionRecord {
    DetectionRecord {
        fire_threat_level: "probable fire".into(),
        start_datetime: Timestamp::from_micros(1_710_659_136_137_095),
        cpu_temperature: 50.1,
        sensor_id: String::new(),
        column,
        row,
        temperature: 107,
        number: 400,
        extra: Vec::new(),
    }
}

fn random_camera(rng: &mut StdRng, w: f64, d: f64, h: f64) -> CameraPose {
    CameraPose::new(
        Vec3::new(rng.gen_range(0.3..w - 0.3), rng.gen_range(0.3..d - 0.3), rng.gen_range(0.3..h - 0.3)),
        rng.gen_range(0.0..360.0),
        rng.gen_range(-80.0..80.0),
        rng.gen_range(-30.0..30.0),
        rng.gen_range(40.0..110.0),
        rng.gen_range(30.0..90.0),
    )
}

#[test]
fn sample_pixel_matches_closed_form_frustum() {
    let cam = CameraPose::new(Vec3::ZERO, 0.0, 0.0, 0.0, 90.0, 2.0 * 0.75f64.atan().to_degrees());
    let ray = pixel_to_ray(&cam, 107, 67).unwrap();
    // x = 107.5 / 160 * 2 - 1, y = 1 - 67.5 / 120 * 2, tan(45) = 1, tan(v/2) = 0.75
    let expected = Vec3::new(1.0, -0.34375, -0.125 * 0.75);
    let expected = expected / expected.length();
    assert!((ray.direction - expected).length() < 1e-12);
    assert!((ray.direction - oracle_direction(&cam, 107, 67)).length() < 1e-12);
}

#[test]
fn pixel_bounds_are_enforced() {
    let cam = CameraPose::new(Vec3::ZERO, 0.0, 0.0, 0.0, 90.0, 70.0);
    assert!(matches!(pixel_to_ray(&cam, 160, 0), Err(CameraError::PixelOutOfRange { .. })));
    assert!(matches!(pixel_to_ray(&cam, 0, 120), Err(CameraError::PixelOutOfRange { .. })));
    let odd = cam.with_pixels(81, 61);
    let axis = pixel_to_ray(&odd, 40, 30).unwrap().direction;
    assert!((axis - Vec3::X).length() < 1e-12);
}

#[test]
fn sample_record_localizes_with_carried_fields() {
    let scene = PatchedScene::new(Scene::room(10.0, 10.0, 3.0, "c").unwrap(), 0.5).unwrap();
    let cam = CameraPose::new(Vec3::new(0.2, 0.2, 2.8), 45.0, -25.0, 0.0, 90.0, 70.0);
    let e = localize(&scene, &cam, &record(107, 67), 1).unwrap();
    assert_eq!(e.peak_temp, 107.0);
    assert_eq!(e.pixel_count, 400);
    assert_eq!(e.threat_level, "probable fire");
    assert_eq!(e.timestamp, Timestamp::from_micros(1_710_659_136_137_095));
}

#[test]
fn analytic_ray_plane_hits() {
    // floor-only scene: the hit is the ray's intersection with z = 0
    let floor = Surface::axis_rect(0, SurfaceKind::Floor, 2, 0.0, (-500.0, -500.0), (500.0, 500.0), true, "c");
    let scene = PatchedScene::new(Scene::new(vec![floor], None).unwrap(), 5.0).unwrap();
    let mut rng = StdRng::seed_from_u64(41);
    let mut checked = 0;
    while checked < 200 {
        let cam = CameraPose::new(
            Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.5..6.0)),
            rng.gen_range(0.0..360.0),
            rng.gen_range(-89.0..-35.0),
            rng.gen_range(-20.0..20.0),
            rng.gen_range(40.0..90.0),
            rng.gen_range(30.0..60.0),
        );
        let (c, r) = (rng.gen_range(0..cam.pixel_cols), rng.gen_range(0..cam.pixel_rows));
        let d = oracle_direction(&cam, c, r);
        if d.z > -1e-3 {
            continue;
        }
        let t = -cam.position.z / d.z;
        let expected = cam.position + d * t;
        if expected.x.abs() > 499.0 || expected.y.abs() > 499.0 {
            continue;
        }
        let e = localize(&scene, &cam, &record(c, r), 0).unwrap();
        assert!((e.position - expected).length() < 1e-6, "{:?} vs {expected:?}", e.position);
        checked += 1;
    }
}

#[test]
fn thousand_pixels_reproject_within_one_pixel() {
    let mut rng = StdRng::seed_from_u64(1000);
    let (w, d, h) = (12.0, 9.0, 3.5);
    let scene = PatchedScene::new(Scene::room(w, d, h, "c").unwrap(), 0.5).unwrap();
    for _ in 0..1000 {
        let cam = random_camera(&mut rng, w, d, h);
        let (c, r) = (rng.gen_range(0..cam.pixel_cols), rng.gen_range(0..cam.pixel_rows));
        let e = localize(&scene, &cam, &record(c, r), 0).unwrap();
        let ray = pixel_to_ray(&cam, c, r).unwrap();
        let t = (e.position - ray.origin).dot(ray.direction);
        assert!((ray.origin + ray.direction * t - e.position).length() < 1e-9);
        let (pc, pr) = cam.project_to_pixel(e.position).expect("hit left the frustum");
        assert!(pc.abs_diff(c) <= 1 && pr.abs_diff(r) <= 1, "({c},{r}) -> ({pc},{pr})");
    }
}

#[test]
fn sky_is_a_miss() {
    let floor = Surface::axis_rect(0, SurfaceKind::Floor, 2, 0.0, (0.0, 0.0), (10.0, 10.0), true, "c");
    let scene = PatchedScene::new(Scene::new(vec![floor], None).unwrap(), 1.0).unwrap();
    let cam = CameraPose::new(Vec3::new(5.0, 5.0, 2.0), 0.0, 45.0, 0.0, 60.0, 45.0);
    assert!(matches!(
        localize(&scene, &cam, &record(107, 67), 0),
        Err(LocalizationError::LocalizationMiss { .. })
    ));
}

proptest! {
    #[test]
    fn pixel_rays_match_rotation_oracle(
        yaw in 0.0f64..360.0, pitch in -85.0f64..85.0, roll in -180.0f64..180.0,
        h in 10.0f64..150.0, v in 10.0f64..150.0, c in 0u32..160, r in 0u32..120,
    ) {
        let cam = CameraPose::new(Vec3::new(1.0, 2.0, 3.0), yaw, pitch, roll, h, v);
        let ray = pixel_to_ray(&cam, c, r).unwrap();
        prop_assert!((ray.direction - oracle_direction(&cam, c, r)).length() < 1e-9);
    }

    #[test]
    fn localization_is_deterministic(seed in 0u64..5000) {
        let mut rng = StdRng::seed_from_u64(seed);
        let scene = PatchedScene::new(Scene::room(6.0, 6.0, 3.0, "c").unwrap(), 0.5).unwrap();
        let cam = random_camera(&mut rng, 6.0, 6.0, 3.0);
        let rec = record(rng.gen_range(0..160), rng.gen_range(0..120));
        let a = localize(&scene, &cam, &rec, 0).unwrap();
        let b = localize(&scene, &cam, &rec, 0).unwrap();
        prop_assert_eq!(a, b);
    }
}
