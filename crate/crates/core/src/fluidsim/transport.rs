use super::Grid2D;

/// Bilinear periodic interpolation at fractional pixel coordinates.
#[inline]
fn sample(grid: &Grid2D, field: &[f64], stride: usize, offset: usize, col: f64, row: f64) -> f64 {
    let (w, h) = (grid.width as f64, grid.height as f64);
    let c = col.rem_euclid(w);
    let r = row.rem_euclid(h);
    let c0 = c.floor();
    let r0 = r.floor();
    let fc = c - c0;
    let fr = r - r0;
    let c0 = c0 as usize % grid.width;
    let r0 = r0 as usize % grid.height;
    let c1 = (c0 + 1) % grid.width;
    let r1 = (r0 + 1) % grid.height;
    let at = |cc: usize, rr: usize| field[stride * grid.index(cc, rr) + offset];
    (1.0 - fr) * ((1.0 - fc) * at(c0, r0) + fc * at(c1, r0))
        + fr * ((1.0 - fc) * at(c0, r1) + fc * at(c1, r1))
}

/// `I+(p) = I(p - dt x(p - dt/2 x(p)))`: midpoint backtrace, bilinear
/// lookup. Every output value is a convex combination of input values.
pub(super) fn semi_lagrangian(grid: &Grid2D, dt: f64, image: &[f64], x: &[f64]) -> Vec<f64> {
    let scale = dt / grid.spacing;
    (0..grid.pixels())
        .map(|s| {
            let col = (s % grid.width) as f64;
            let row = (s / grid.width) as f64;
            let mid_c = col - 0.5 * scale * x[2 * s];
            let mid_r = row - 0.5 * scale * x[2 * s + 1];
            let u = sample(grid, x, 2, 0, mid_c, mid_r);
            let v = sample(grid, x, 2, 1, mid_c, mid_r);
            sample(grid, image, 1, 0, col - scale * u, row - scale * v)
        })
        .collect()
}
