//! Uniform one-dimensional grids and functions sampled on them.

use std::fmt;

/// Uniform grid `start + i * step` for `i in 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        assert!(step > 0.0 && step.is_finite(), "grid step must be positive");
        assert!(len >= 2, "grid needs at least two points");
        Self { start, step, len }
    }

    /// Grid on `[a, b]` including both endpoints, with step as close to `step` as fits.
    pub fn covering(a: f64, b: f64, step: f64) -> Self {
        assert!(b > a);
        let cells = ((b - a) / step).round().max(1.0) as usize;
        Self::new(a, (b - a) / cells as f64, cells + 1)
    }

    /// Interior nodes of `[-half_width, half_width]` (Dirichlet nodes at `±half_width` dropped).
    ///
    /// `half_width / step` is rounded to an integer so that `0` is always a node.
    pub fn symmetric_interior(half_width: f64, step: f64) -> Self {
        let m = (half_width / step).round() as usize;
        assert!(m >= 1);
        let h = half_width / m as f64;
        Self::new(-half_width + h, h, 2 * m - 1)
    }

    /// Symmetric grid on `[-half_width, half_width]` including the endpoints.
    pub fn symmetric_closed(half_width: f64, step: f64) -> Self {
        let m = (half_width / step).round() as usize;
        assert!(m >= 1);
        let h = half_width / m as f64;
        Self::new(-half_width, h, 2 * m + 1)
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.step
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    /// Grid with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.start * factor, self.step * factor, self.len)
    }

    /// Index of the node nearest to `x`, if `x` is within half a step of the grid.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let r = (x - self.start) / self.step;
        let i = r.round();
        if i < 0.0 || i > (self.len - 1) as f64 || (r - i).abs() > 0.5 + 1e-9 {
            None
        } else {
            Some(i as usize)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start - 1e-12 * self.step && x <= self.end() + 1e-12 * self.step
    }
}

impl fmt::Display for UniformGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}] step {:.3e} ({} nodes)", self.start, self.end(), self.step, self.len)
    }
}

/// Values of a real function on a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "grid/value length mismatch");
        Self { grid, values }
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.grid == other.grid
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Piecewise-cubic (4-point Lagrange) interpolation; zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        cubic_lagrange(&self.grid, &self.values, x)
    }

    /// Trapezoid rule over the whole grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step())
    }
}

pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            step * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// 4-point Lagrange interpolation of grid samples; returns 0 outside the grid.
pub fn cubic_lagrange(grid: &UniformGrid, values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if !grid.contains(x) {
        return 0.0;
    }
    let r = ((x - grid.start()) / grid.step()).clamp(0.0, (n - 1) as f64);
    let i = (r.floor() as usize).min(n - 2);
    let frac = r - i as f64;
    if frac.abs() < 1e-13 {
        return values[i];
    }
    if n < 4 {
        return values[i] * (1.0 - frac) + values[i + 1] * frac;
    }
    let i0 = i.saturating_sub(1).min(n - 4);
    let t = r - i0 as f64;
    let y = &values[i0..i0 + 4];
    let (t0, t1, t2, t3) = (t, t - 1.0, t - 2.0, t - 3.0);
    -y[0] * t1 * t2 * t3 / 6.0 + y[1] * t0 * t2 * t3 / 2.0 - y[2] * t0 * t1 * t3 / 2.0
        + y[3] * t0 * t1 * t2 / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_interior_contains_zero() {
        let g = UniformGrid::symmetric_interior(12.0, 1.0 / 400.0);
        let i = g.nearest(0.0).unwrap();
        assert!(g.point(i).abs() < 1e-12);
        assert_eq!(g.len(), 2 * 4800 - 1);
        assert!((g.start() + 12.0 - 1.0 / 400.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = UniformGrid::covering(-1.0, 2.0, 0.1);
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - x * x * x;
        let gf = GridFunction::from_fn(g, f);
        for &x in &[-0.95, -0.33, 0.0, 0.71, 1.999, 1.95] {
            assert!((gf.interpolate(x) - f(x)).abs() < 1e-12, "x={x}");
        }
        assert_eq!(gf.interpolate(2.5), 0.0);
    }

    #[test]
    fn trapezoid_is_exact_on_lines() {
        let g = UniformGrid::covering(0.0, 3.0, 0.25);
        let gf = GridFunction::from_fn(g, |x| 2.0 * x + 1.0);
        assert!((gf.integral() - 12.0).abs() < 1e-12);
    }
}
