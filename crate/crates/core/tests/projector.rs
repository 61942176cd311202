mod common;

use pcct::projector::joseph_ray;
use pcct::{
    forward_project, make_geometry, project_phantom_analytic, Channel, Ellipse, FanBeamGeometry, GeometryOverrides,
    ImageGrid, Phantom, SpectralModel, Units,
};

fn small_geometry() -> FanBeamGeometry {
    FanBeamGeometry {
        num_detectors: 96,
        detector_pitch: 0.5,
        num_views: 60,
        ..Default::default()
    }
}

#[test]
fn geometry_examples() {
    let g = make_geometry(&GeometryOverrides::default()).unwrap();
    assert!((g.half_fan_angle() - (25.6f64 / 180.0).atan()).abs() < 1e-15);
    let four = make_geometry(&GeometryOverrides {
        num_views: Some(4),
        ..Default::default()
    })
    .unwrap();
    let want = [0.0, 0.5, 1.0, 1.5].map(|f| f * std::f64::consts::PI);
    for (a, b) in four.view_angles().iter().zip(want) {
        assert!((a - b).abs() < 1e-15);
    }
    let bad = make_geometry(&GeometryOverrides {
        source_to_origin: Some(200.0),
        ..Default::default()
    });
    assert_eq!(bad.unwrap_err().exit_code(), 2);
}

#[test]
fn forward_projection_is_linear() {
    let g = small_geometry();
    let n = 64;
    let x = common::random_vec(1, n * n, 0.0, 0.5);
    let y = common::random_vec(2, n * n, -0.2, 0.3);
    let img = |d: Vec<f64>| ImageGrid::from_data(n, 0.5, d, Units::Attenuation, Channel::Bin(0)).unwrap();
    let (a, b) = (1.7, -0.6);
    let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
    let px = forward_project(&img(x), &g);
    let py = forward_project(&img(y), &g);
    let pc = forward_project(&img(combo), &g);
    let lin: Vec<f64> = px.data.iter().zip(&py.data).map(|(p, q)| a * p + b * q).collect();
    assert!(common::max_rel(&pc.data, &lin) < 1e-6);
}

#[test]
fn empty_phantom_projects_to_zero() {
    let (s, m) = (SpectralModel::default(), common::materials());
    let sino = project_phantom_analytic(&Phantom::empty(51.2), &small_geometry(), 0, &s, &m).unwrap();
    assert!(sino.data.iter().all(|&v| v == 0.0));
}

#[test]
fn analytic_sinogram_entries_are_single_ray_integrals() {
    let (s, m) = (SpectralModel::default(), common::materials());
    let g = small_geometry();
    let p = pcct::PhantomFamily::default().generate(5, 0, 51.2).unwrap();
    let sino = project_phantom_analytic(&p, &g, 2, &s, &m).unwrap();
    for (v, d) in [(0, 0), (7, 48), (33, 20), (59, 95)] {
        assert_eq!(sino.get(v, d), p.analytic_line_integral(&g.ray(v, d), 2, &s, &m).unwrap());
    }
}

#[test]
fn centred_symmetric_phantom_is_constant_across_views() {
    let (s, m) = (SpectralModel::default(), common::materials());
    let p = Phantom::new(
        vec![
            Ellipse::circle((0.0, 0.0), 12.0, "water", 1.0),
            Ellipse::circle((0.0, 0.0), 4.0, "bone", 1.5),
        ],
        51.2,
    )
    .unwrap();
    let g = FanBeamGeometry::default();
    let sino = project_phantom_analytic(&p, &g, 0, &s, &m).unwrap();
    let first = sino.row(0).to_vec();
    let mut worst = 0.0f64;
    for v in 1..g.num_views {
        for (a, b) in sino.row(v).iter().zip(&first) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-10, "max deviation {worst}");
}

/// Detector coordinates of the two rays tangent to a circle, from the
/// source-to-centre angle and the tangent half-angle asin(r / |S - c|).
fn tangent_positions(g: &FanBeamGeometry, view: usize, c: [f64; 2], r: f64) -> (f64, f64) {
    let beta = g.view_angle(view);
    let src = [g.source_to_origin * beta.cos(), g.source_to_origin * beta.sin()];
    let central = [-beta.cos(), -beta.sin()];
    let u = [-beta.sin(), beta.cos()];
    let to_c = [c[0] - src[0], c[1] - src[1]];
    let dist = to_c[0].hypot(to_c[1]);
    let phi = (to_c[0] * u[0] + to_c[1] * u[1]).atan2(to_c[0] * central[0] + to_c[1] * central[1]);
    let alpha = (r / dist).asin();
    let d = g.source_to_detector;
    (d * (phi - alpha).tan(), d * (phi + alpha).tan())
}

#[test]
fn translated_disk_edges_follow_the_fan_geometry() {
    let (s, m) = (SpectralModel::default(), common::materials());
    let g = FanBeamGeometry::default();
    let c = [6.0, -4.0];
    let r = 3.0;
    let p = Phantom::new(vec![Ellipse::circle((c[0], c[1]), r, "flat", 1.0)], 51.2).unwrap();
    let sino = project_phantom_analytic(&p, &g, 0, &s, &m).unwrap();
    let raster = p.rasterize(512, 0, &s, &m).unwrap();
    let joseph = forward_project(&raster, &g);
    for view in [0, 128, 301] {
        let (lo, hi) = tangent_positions(&g, view, c, r);
        let hit: Vec<usize> = (0..g.num_detectors).filter(|&d| sino.get(view, d) > 0.0).collect();
        let first = g.detector_coord(hit[0] as f64);
        let last = g.detector_coord(*hit.last().unwrap() as f64);
        let pitch = g.detector_pitch;
        assert!(first >= lo && first - lo < pitch, "view {view}: first {first}, tangent {lo}");
        assert!(last <= hi && hi - last < pitch, "view {view}: last {last}, tangent {hi}");
        // The projected width is the magnified diameter to first order.
        let width = hi - lo;
        let mag = g.source_to_detector / (g.source_to_origin - (c[0] * g.view_angle(view).cos() + c[1] * g.view_angle(view).sin()));
        assert!((width - 2.0 * r * mag).abs() / width < 0.01);
        // The Joseph path puts its support at the same place, within a pixel's footprint.
        let jhit: Vec<usize> = (0..g.num_detectors).filter(|&d| joseph.get(view, d) > 1e-9).collect();
        assert!((jhit[0] as i64 - hit[0] as i64).abs() <= 2);
        assert!((*jhit.last().unwrap() as i64 - *hit.last().unwrap() as i64).abs() <= 2);
    }
}

#[test]
fn joseph_matches_analytic_on_a_supersampled_disk() {
    let (s, m) = (SpectralModel::default(), common::materials());
    let g = FanBeamGeometry::default();
    let radius = 5.0;
    let p = common::disk(radius, "flat");
    let raster = p.rasterize_supersampled(512, 8, 0, &s, &m).unwrap();
    let pitch = raster.pitch();
    let mut worst_deep = 0.0f64;
    let mut worst_peak = 0.0f64;
    for v in (0..g.num_views).step_by(4) {
        for d in 0..g.num_detectors {
            let ray = g.ray(v, d);
            let dist = ray.distance_to([0.0, 0.0]);
            let exact = p.analytic_line_integral(&ray, 0, &s, &m).unwrap();
            let got = joseph_ray(&raster, &ray);
            if dist <= radius - 2.0 * pitch {
                worst_peak = worst_peak.max((got - exact).abs() / (2.0 * radius * 0.2));
            }
            if dist <= radius - 6.0 * pitch {
                worst_deep = worst_deep.max((got - exact).abs() / exact);
            }
        }
    }
    assert!(worst_deep < 0.01, "rays >= 6 px inside: {worst_deep}");
    assert!(worst_peak < 0.01, "peak-normalised: {worst_peak}");
}

#[test]
fn joseph_on_a_point_sampled_disk_stays_within_the_staircase_bound() {
    // Pixel-centre sampling moves each boundary by up to about one pitch,
    // so the chord error is bounded by roughly 2 * pitch / chord.
    let (s, m) = (SpectralModel::default(), common::materials());
    let g = FanBeamGeometry::default();
    let radius = 5.0;
    let p = common::disk(radius, "flat");
    let raster = p.rasterize(512, 0, &s, &m).unwrap();
    let pitch = raster.pitch();
    for v in (0..g.num_views).step_by(8) {
        for d in 0..g.num_detectors {
            let ray = g.ray(v, d);
            let dist = ray.distance_to([0.0, 0.0]);
            if dist <= radius - 2.0 * pitch {
                let exact = p.analytic_line_integral(&ray, 0, &s, &m).unwrap();
                let chord = exact / 0.2;
                let got = joseph_ray(&raster, &ray);
                assert!((got - exact).abs() / exact < 2.0 * pitch / chord, "view {v} det {d}");
            }
        }
    }
}

#[test]
fn oversampling_averages_sub_rays() {
    let (s, m) = (SpectralModel::default(), common::materials());
    let g = FanBeamGeometry {
        oversample: 4,
        ..small_geometry()
    };
    let p = common::disk(8.0, "flat");
    let raster = p.rasterize(128, 0, &s, &m).unwrap();
    let sino = forward_project(&raster, &g);
    for (v, d) in [(0, 48), (13, 30), (40, 60)] {
        let want = g.element_rays(v, d).map(|r| joseph_ray(&raster, &r)).sum::<f64>() / 4.0;
        assert!((sino.get(v, d) - want).abs() < 1e-12);
    }
}
