use twistspec::geometry::{CrossSection, ShapeSpec};
use twistspec_wasm_demo::compute::{band, ground_image, threshold_curve};

#[test]
fn disk_threshold_is_flat_in_beta0() {
    let c = threshold_curve(1.0, 1.0, 1.0 / 16.0, 1.0, 3).unwrap();
    assert_eq!(c.len(), 3);
    assert!((c[2].1 - c[0].1).abs() / c[0].1 < 0.03);
}

#[test]
fn ellipse_threshold_grows_and_band_is_symmetric() {
    let c = threshold_curve(1.0, 0.6, 1.0 / 16.0, 1.0, 3).unwrap();
    assert!(c[0].1 < c[1].1 && c[1].1 < c[2].1);
    let b = band(1.0, 0.6, 1.0 / 16.0, 1.0, 2.0, 5).unwrap();
    assert!((b[0].1 - b[4].1).abs() < 1e-6 * b[0].1);
    assert!(b[2].1 <= b[1].1 && (b[2].1 - c[2].1).abs() < 1e-6 * c[2].1);
}

#[test]
fn ground_image_covers_the_mask() {
    let g = ground_image(1.0, 0.6, 1.0 / 16.0, 1.0).unwrap();
    let inside = g.values.iter().filter(|v| !v.is_nan()).count();
    let cs = CrossSection::build(ShapeSpec::ellipse(1.0, 0.6), 1.0 / 16.0).unwrap();
    assert_eq!(inside, cs.len());
    let max = g.values.iter().cloned().filter(|v| !v.is_nan()).fold(0.0f64, f64::max);
    assert_eq!(max, 1.0);
    assert_eq!(g.values.len(), g.width * g.height);
}

#[test]
fn bad_arguments_are_errors() {
    assert!(threshold_curve(1.0, 0.6, 0.5, 1.0, 3).is_err());
    assert!(band(1.0, 0.6, 1.0 / 16.0, 1.0, 2.0, 4).is_err());
    assert!(ground_image(1.0, 0.6, 1e-3, 1.0).is_err());
}
