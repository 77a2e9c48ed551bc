//! Plain-Rust entry points behind the bindings.

use twistspec::cross_section::{band_function, threshold_e};
use twistspec::geometry::{CrossSection, ShapeSpec};

const TOL: f64 = 1e-8;
/// Keeps each call interactive.
const MAX_POINTS: usize = 20_000;

fn section(a: f64, b: f64, h: f64) -> Result<CrossSection, String> {
    let shape = ShapeSpec::from_kind_params("ellipse", &[a, b]).map_err(|e| e.to_string())?;
    let cs = CrossSection::build(shape, h).map_err(|e| e.to_string())?;
    if cs.len() > MAX_POINTS {
        return Err(format!("{} grid points; use a coarser h (limit {MAX_POINTS})", cs.len()));
    }
    Ok(cs)
}

pub fn threshold_curve(a: f64, b: f64, h: f64, beta_max: f64, n: usize) -> Result<Vec<(f64, f64)>, String> {
    if n < 2 || !(beta_max > 0.0) {
        return Err("need n >= 2 and beta_max > 0".into());
    }
    let cs = section(a, b, h)?;
    (0..n)
        .map(|i| {
            let beta0 = beta_max * i as f64 / (n - 1) as f64;
            threshold_e(&cs, beta0, TOL).map(|t| (beta0, t.e)).map_err(|e| e.to_string())
        })
        .collect()
}

pub fn band(a: f64, b: f64, h: f64, beta0: f64, p_max: f64, n: usize) -> Result<Vec<(f64, f64)>, String> {
    if n < 3 || n % 2 == 0 || !(p_max > 0.0) {
        return Err("need an odd n >= 3 and p_max > 0".into());
    }
    let cs = section(a, b, h)?;
    let m = (n / 2) as i64;
    let grid: Vec<f64> = (-m..=m).map(|i| p_max * i as f64 / m as f64).collect();
    band_function(&cs, beta0, &grid, TOL).map(|d| d.points).map_err(|e| e.to_string())
}

pub struct GroundImage {
    pub width: usize,
    pub height: usize,
    pub e: f64,
    pub values: Vec<f64>,
}

pub fn ground_image(a: f64, b: f64, h: f64, beta0: f64) -> Result<GroundImage, String> {
    let cs = section(a, b, h)?;
    let td = threshold_e(&cs, beta0, TOL).map_err(|e| e.to_string())?;
    let idx = cs.grid_indices();
    let (i0, j0) = idx.iter().fold((i64::MAX, i64::MAX), |m, &(i, j)| (m.0.min(i), m.1.min(j)));
    let (i1, j1) = idx.iter().fold((i64::MIN, i64::MIN), |m, &(i, j)| (m.0.max(i), m.1.max(j)));
    let width = (i1 - i0 + 1) as usize;
    let height = (j1 - j0 + 1) as usize;
    let fmax = td.f.iter().cloned().fold(0.0f64, f64::max);
    let mut values = vec![f64::NAN; width * height];
    for (&(i, j), &f) in idx.iter().zip(&td.f) {
        values[(j - j0) as usize * width + (i - i0) as usize] = f / fmax;
    }
    Ok(GroundImage { width, height, e: td.e, values })
}
