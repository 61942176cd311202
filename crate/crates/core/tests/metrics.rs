mod common;

use pcct::metrics::{mse, rmse, roi, ssim, ssim_map};
use pcct::{Plane, RoiSpec, SsimParams};
use proptest::prelude::*;

fn plane(seed: u64, w: usize, h: usize) -> Plane {
    Plane::new(w, h, common::random_vec(seed, w * h, 0.0, 1.0)).unwrap()
}

#[test]
fn mse_matches_a_double_loop_exactly() {
    for seed in 0..20 {
        let x = plane(seed, 8, 8);
        let y = plane(seed + 100, 8, 8);
        let want = common::mse_oracle(&x.data, &y.data, 8, 8);
        assert!((mse(&x, &y).unwrap() - want).abs() <= 1e-15);
    }
}

#[test]
fn mse_and_rmse_examples() {
    let x = plane(1, 8, 8);
    let y = x.map(|v| v + 0.5);
    assert_eq!(mse(&x, &x).unwrap(), 0.0);
    assert!((mse(&x, &y).unwrap() - 0.25).abs() < 1e-15);
    assert!((rmse(&x, &y).unwrap() - 0.5).abs() < 1e-15);
    assert!(mse(&x, &plane(1, 8, 9)).is_err());
}

#[test]
fn ssim_matches_the_direct_sliding_window_formula() {
    for seed in 0..10 {
        let x = plane(seed, 16, 16);
        let y = plane(seed + 50, 16, 16);
        for range in [1.0, 0.35] {
            let want = common::ssim_oracle(&x.data, &y.data, 16, 16, range);
            let got = ssim(&x, &y, &SsimParams::with_range(range)).unwrap();
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }
    // Correlated pair, so the structure term is far from zero.
    let x = plane(3, 20, 17);
    let y = x.map(|v| 0.8 * v + 0.05);
    let want = common::ssim_oracle(&x.data, &y.data, 20, 17, 1.0);
    assert!((ssim(&x, &y, &SsimParams::with_range(1.0)).unwrap() - want).abs() < 1e-10);
}

#[test]
fn ssim_edge_cases() {
    let x = plane(4, 16, 16);
    assert_eq!(ssim(&x, &x, &SsimParams::with_range(0.4)).unwrap(), 1.0);
    let small = plane(4, 10, 10);
    assert!(ssim(&small, &small, &SsimParams::with_range(1.0)).is_err());
    assert!(ssim(&x, &x, &SsimParams::with_range(0.0)).is_err());
    assert_eq!(ssim_map(&x, &x, &SsimParams::with_range(1.0)).unwrap().width, 6);
    // Zero-mean texture against its negation.
    let check = Plane::new(16, 16, (0..256).map(|i| if (i % 16 + i / 16) % 2 == 0 { 0.3 } else { -0.3 }).collect()).unwrap();
    assert!(ssim(&check, &check.map(|v| -v), &SsimParams::with_range(0.6)).unwrap() <= 0.0);
}

#[test]
fn roi_examples() {
    let img = plane(5, 512, 512);
    assert_eq!(roi(&img, 0, 0, 512, 512).unwrap(), img);
    let (x0, y0, w, h) = RoiSpec::Centered(200).resolve(512, 512).unwrap();
    assert_eq!((x0, y0, w, h), (156, 156, 200, 200));
    let c = RoiSpec::Auto.apply(&img).unwrap();
    assert_eq!((c.width, c.height), (200, 200));
    assert_eq!(c.get(0, 0), img.get(156, 156));
    assert!(roi(&img, 400, 0, 200, 10).is_err());
    assert_eq!(RoiSpec::Auto.resolve(128, 128).unwrap(), (39, 39, 50, 50));
    assert_eq!("center:64".parse::<RoiSpec>().unwrap(), RoiSpec::Centered(64));
    assert_eq!(
        "1,2,3,4".parse::<RoiSpec>().unwrap(),
        RoiSpec::Window {
            x0: 1,
            y0: 2,
            w: 3,
            h: 4
        }
    );
    assert!("1,2,3".parse::<RoiSpec>().is_err());
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-0.5..1.5f64, 16 * 16),
        prop::collection::vec(-0.5..1.5f64, 16 * 16),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ssim_is_symmetric_and_bounded((x, y) in pair(), range in 0.1..2.0f64) {
        let px = Plane::new(16, 16, x).unwrap();
        let py = Plane::new(16, 16, y).unwrap();
        let p = SsimParams::with_range(range);
        let a = ssim(&px, &py, &p).unwrap();
        let b = ssim(&py, &px, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a <= 1.0);
        prop_assert!(a < 1.0 - 1e-12, "distinct random images must score below 1");
    }

    #[test]
    fn rmse_squared_is_mse((x, y) in pair()) {
        let px = Plane::new(16, 16, x).unwrap();
        let py = Plane::new(16, 16, y).unwrap();
        let m = mse(&px, &py).unwrap();
        let r = rmse(&px, &py).unwrap();
        // sqrt is correctly rounded, so squaring it back is within one ulp.
        prop_assert!((r * r - m).abs() <= m * f64::EPSILON);
    }

    #[test]
    fn ssim_matches_oracle_on_random_pairs((x, y) in pair()) {
        let got = ssim(&Plane::new(16, 16, x.clone()).unwrap(), &Plane::new(16, 16, y.clone()).unwrap(), &SsimParams::with_range(2.0)).unwrap();
        prop_assert!((got - common::ssim_oracle(&x, &y, 16, 16, 2.0)).abs() < 1e-10);
    }
}
