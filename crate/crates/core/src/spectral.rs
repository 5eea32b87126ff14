//! Spectrum of the Ornstein-Uhlenbeck generator `L g = g''/2 - x g'/2` killed at rate `phi`,
//! acting on `L^2(m)` with `m` the standard Gaussian measure.
//!
//! The substitution `g = (2π)^{-1/4} e^{-x^2/4} ψ` is an isometry `L^2(m) -> L^2(dx)` that turns
//! `-(L - phi)` into the Schrödinger operator `-g''/2 + q g`, `q = x^2/8 - 1/4 + phi`. That operator
//! is discretised by central differences on `(-L, L)` with Dirichlet ends and diagonalised with
//! Sturm bisection plus inverse iteration. All integrals against `m` are done on the `g` side,
//! where the functions decay, instead of on `ψ`, which grows like `e^{x^2/4}`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::grid::{cubic_lagrange, GridFunction, UniformGrid};
use crate::linalg::{LinalgError, SymTridiag};
use crate::profile::ProfileF;

/// Default relative boundary amplitude above which the box is declared too small.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("killing function is negative ({value:.3e}) at x = {x}")]
    NegativeKilling { x: f64, value: f64 },
    #[error("grid {0} is not symmetric about the origin")]
    AsymmetricGrid(UniformGrid),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("eigenfunction {n} reaches relative amplitude {amplitude:.3e} near the box edge; enlarge L")]
    BoxTooSmall { n: usize, amplitude: f64 },
    #[error("requested {requested} terms but only {available} eigenpairs were computed")]
    TooManyTerms { requested: usize, available: usize },
    #[error("leading eigenfunction is numerically zero at x = {0}")]
    DivisionNearZero(f64),
    #[error("delta must lie in (0, 1/4), got {0}")]
    InvalidDelta(f64),
    #[error("killing tag {0:?} needs a profile")]
    MissingProfile(PhiTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiTag {
    Zero,
    HalfF,
    FullF,
    Custom,
}

impl PhiTag {
    /// Samples the killing function on `grid`. `Custom` has no canonical samples and yields zero.
    pub fn sample(self, grid: UniformGrid, profile: Option<&ProfileF>) -> Result<GridFunction, SpectralError> {
        let factor = match self {
            PhiTag::Zero | PhiTag::Custom => return Ok(GridFunction::zeros(grid)),
            PhiTag::HalfF => 0.5,
            PhiTag::FullF => 1.0,
        };
        let f = profile.ok_or(SpectralError::MissingProfile(self))?;
        Ok(GridFunction::from_fn(grid, |x| factor * f.eval(x)))
    }
}

/// `q(x) = x^2/8 - 1/4 + phi(x)`.
pub fn schrodinger_potential(phi: &GridFunction) -> Result<GridFunction, SpectralError> {
    if let Some((i, &v)) = phi.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(SpectralError::NegativeKilling { x: phi.grid.point(i), value: v });
    }
    let values = phi.grid.points().zip(&phi.values).map(|(x, p)| x * x / 8.0 - 0.25 + p).collect();
    Ok(GridFunction::new(phi.grid, values))
}

#[derive(Debug, Clone)]
pub struct SpectralSystem {
    pub phi_tag: PhiTag,
    pub domain_l: f64,
    pub grid_step: f64,
    /// Interior nodes of `(-L, L)`.
    pub grid: UniformGrid,
    pub phi: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Row `n` is `ψ_n` on the grid, `∫ψ_n^2 dm = 1`, `ψ_0 > 0`.
    pub eigenfunctions_psi: Vec<Vec<f64>>,
    /// Row `n` is the transformed eigenfunction `g_n`, `∫g_n^2 dx = 1`.
    pub eigenfunctions_g: Vec<Vec<f64>>,
    /// `∫ψ_0 dm`.
    pub theta: f64,
    /// `∫ψ_n dm` for every computed `n`.
    pub masses: Vec<f64>,
}

#[inline]
fn psi_weight(x: f64) -> f64 {
    (0.25 * x * x).exp() * (2.0 * PI).powf(0.25)
}

/// Lowest `n_max + 1` eigenpairs of the killed generator with the default boundary tolerance.
pub fn eigensystem(phi: &GridFunction, phi_tag: PhiTag, n_max: usize) -> Result<SpectralSystem, SpectralError> {
    eigensystem_with(phi, phi_tag, n_max, BOUNDARY_TOL)
}

pub fn eigensystem_with(
    phi: &GridFunction,
    phi_tag: PhiTag,
    n_max: usize,
    boundary_tol: f64,
) -> Result<SpectralSystem, SpectralError> {
    let grid = phi.grid;
    let h = grid.step();
    if (grid.start() + grid.end()).abs() > 1e-9 * h {
        return Err(SpectralError::AsymmetricGrid(grid));
    }
    let q = schrodinger_potential(phi)?;
    let n = grid.len();
    let diag: Vec<f64> = q.values.iter().map(|v| 1.0 / (h * h) + v).collect();
    let off = vec![-0.5 / (h * h); n - 1];
    let matrix = SymTridiag::new(diag, off)?;
    let (eigenvalues, vectors) = matrix.lowest_eigenpairs(n_max + 1)?;

    let edge = (0.01 * n as f64).ceil() as usize;
    let inv_sqrt_h = 1.0 / h.sqrt();
    let mut eigenfunctions_g = Vec::with_capacity(vectors.len());
    for (k, mut v) in vectors.into_iter().enumerate() {
        let peak = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let rim = v[..edge].iter().chain(&v[n - edge..]).fold(0.0_f64, |m, a| m.max(a.abs()));
        if rim > boundary_tol * peak {
            return Err(SpectralError::BoxTooSmall { n: k, amplitude: rim / peak });
        }
        // orient every mode so that its value at the rightmost peak region is positive;
        // for the ground state this makes it positive everywhere
        let sign = if k == 0 {
            v.iter().sum::<f64>().signum()
        } else {
            let i = v.iter().enumerate().rev().find(|(_, a)| a.abs() > 1e-3 * peak).map_or(0, |(i, _)| i);
            v[i].signum()
        };
        v.iter_mut().for_each(|a| *a *= sign * inv_sqrt_h);
        eigenfunctions_g.push(v);
    }
    let eigenfunctions_psi: Vec<Vec<f64>> = eigenfunctions_g
        .iter()
        .map(|g| grid.points().zip(g).map(|(x, a)| psi_weight(x) * a).collect())
        .collect();
    let gauss_root: Vec<f64> = grid.points().map(|x| (-0.25 * x * x).exp() * (2.0 * PI).powf(-0.25)).collect();
    let masses: Vec<f64> = eigenfunctions_g
        .iter()
        .map(|g| h * g.iter().zip(&gauss_root).map(|(a, w)| a * w).sum::<f64>())
        .collect();
    Ok(SpectralSystem {
        phi_tag,
        domain_l: grid.end() + h,
        grid_step: h,
        grid,
        phi: phi.values.clone(),
        eigenvalues,
        eigenfunctions_psi,
        eigenfunctions_g,
        theta: masses[0],
        masses,
    })
}

/// Builds the interior grid of `(-l, l)` with step `h`, samples `phi` on it and solves.
pub fn eigensystem_on(
    phi: impl Fn(f64) -> f64,
    phi_tag: PhiTag,
    l: f64,
    h: f64,
    n_max: usize,
) -> Result<SpectralSystem, SpectralError> {
    let grid = UniformGrid::symmetric_interior(l, h);
    eigensystem(&GridFunction::from_fn(grid, phi), phi_tag, n_max)
}

/// Eigenvalues at steps `h` and `h/2` combined as `(4 λ(h/2) - λ(h)) / 3`,
/// cancelling the `O(h^2)` discretisation error.
pub fn richardson_eigenvalues(
    phi: impl Fn(f64) -> f64,
    l: f64,
    h: f64,
    n_max: usize,
) -> Result<Vec<f64>, SpectralError> {
    let coarse = eigensystem_on(&phi, PhiTag::Custom, l, h, n_max)?;
    let fine = eigensystem_on(&phi, PhiTag::Custom, l, 0.5 * h, n_max)?;
    Ok(coarse.eigenvalues.iter().zip(&fine.eigenvalues).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

impl SpectralSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `g_n(x)`, interpolated; zero outside the box.
    pub fn g(&self, n: usize, x: f64) -> f64 {
        cubic_lagrange(&self.grid, &self.eigenfunctions_g[n], x)
    }

    /// `ψ_n(x)`, interpolated on the `g` side and mapped back.
    pub fn psi(&self, n: usize, x: f64) -> f64 {
        psi_weight(x) * self.g(n, x)
    }

    /// `max_{i,j < count} |∫ψ_i ψ_j dm - δ_ij|`.
    pub fn orthonormality_defect(&self, count: usize) -> f64 {
        let h = self.grid_step;
        let count = count.min(self.len());
        let mut worst = 0.0_f64;
        for i in 0..count {
            for j in 0..=i {
                let d = h * crate::linalg::dot(&self.eigenfunctions_g[i], &self.eigenfunctions_g[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - e).abs());
            }
        }
        worst
    }

    fn check_terms(&self, n_terms: usize) -> Result<(), SpectralError> {
        if n_terms > self.len() {
            return Err(SpectralError::TooManyTerms { requested: n_terms, available: self.len() });
        }
        Ok(())
    }

    /// Is `x` inside the region where `ψ_0` is resolved (relative `g_0` above `1e-8`)?
    pub fn in_reliable_support(&self, x: f64) -> bool {
        let peak = self.eigenfunctions_g[0].iter().fold(0.0_f64, |m, a| m.max(*a));
        self.g(0, x) > 1e-8 * peak
    }
}

/// Gaussian measure weights `h (2π)^{-1/2} e^{-x^2/2}` on the grid, for quadrature against `m`.
pub fn gaussian_weights(grid: &UniformGrid) -> Vec<f64> {
    let c = grid.step() / (2.0 * PI).sqrt();
    grid.points().map(|x| c * (-0.5 * x * x).exp()).collect()
}

/// Rayleigh-type bounds on `λ_0(F)`: `1/2 + (1/2)∫F ψ_0^2 dm` from below and
/// `1 - (1/2)∫((c e^{x^2/2} F)')^2 dm` from above, `c` normalising `c e^{x^2/2} F` in `L^2(m)`.
pub fn variational_bounds(f: &ProfileF, sys_f: &SpectralSystem) -> (f64, f64) {
    let h = sys_f.grid_step;
    let lower = 0.5
        + 0.5 * h * sys_f.grid.points().zip(&sys_f.eigenfunctions_g[0]).map(|(x, g)| f.eval(x) * g * g).sum::<f64>();

    // both integrands are even; integrate on the profile's own half-line nodes
    let dh = f.grid_step;
    let half_norm: Vec<f64> = f.abscissae().zip(&f.values).map(|(y, v)| (0.5 * y * y).exp() * v * v).collect();
    let half_grad: Vec<f64> = f
        .abscissae()
        .zip(f.values.iter().zip(&f.derivs))
        .map(|(y, (v, d))| (0.5 * y * y).exp() * (y * v + d).powi(2))
        .collect();
    let norm = 2.0 * crate::grid::trapezoid(&half_norm, dh);
    let grad = 2.0 * crate::grid::trapezoid(&half_grad, dh);
    let upper = 1.0 - 0.5 * grad / norm;
    (lower, upper)
}

/// Closed-form Ornstein-Uhlenbeck transition density with respect to `m`.
pub fn ou_kernel_exact(t: f64, x: f64, y: f64) -> f64 {
    let em1 = t.exp_m1();
    (-(-t).exp_m1()).powf(-0.5) * ((-x * x - y * y + 2.0 * x * y * (0.5 * t).exp()) / (2.0 * em1)).exp()
}

/// Partial sum `Σ_{n < n_terms} e^{-λ_n t} ψ_n(x) ψ_n(y)`.
pub fn heat_kernel(sys: &SpectralSystem, t: f64, x: f64, y: f64, n_terms: usize) -> Result<f64, SpectralError> {
    sys.check_terms(n_terms)?;
    Ok((0..n_terms).map(|n| (-sys.eigenvalues[n] * t).exp() * (sys.psi(n, x) * sys.psi(n, y))).sum())
}

/// `P_x(no killing by time t)` from the eigen-expansion, and its leading term `e^{-λ_0 t} θ ψ_0(x)`.
pub fn survival_probability(sys: &SpectralSystem, x: f64, t: f64) -> (f64, f64) {
    let p = (0..sys.len()).map(|n| (-sys.eigenvalues[n] * t).exp() * sys.psi(n, x) * sys.masses[n]).sum();
    let leading = (-sys.eigenvalues[0] * t).exp() * sys.theta * sys.psi(0, x);
    (p, leading)
}

/// Transition density of the killed process conditioned to survive forever,
/// `q(t,x,y) ψ_0(y) e^{λ_0 t} / ψ_0(x)`, using every computed mode.
pub fn conditioned_kernel(sys: &SpectralSystem, t: f64, x: f64, y: f64) -> Result<f64, SpectralError> {
    if !sys.in_reliable_support(x) {
        return Err(SpectralError::DivisionNearZero(x));
    }
    let lam0 = sys.eigenvalues[0];
    // ψ_n(x)/ψ_0(x) = g_n(x)/g_0(x): the Gaussian factors cancel
    let g0x = sys.g(0, x);
    let sum: f64 = (0..sys.len())
        .map(|n| (-(sys.eigenvalues[n] - lam0) * t).exp() * sys.g(n, x) / g0x * sys.psi(n, y))
        .sum();
    Ok(sum * sys.psi(0, y))
}

/// Solves `2δ = (e^{-s/2} - e^{-s}) / (1 - e^{-s})` for `s > 0`. With `u = e^{-s/2}` the right side
/// is `u / (1 + u)`, so `s = 2 ln((1 - 2δ) / (2δ))`, defined for `δ ∈ (0, 1/4)`.
pub fn s_star(delta: f64) -> Result<f64, SpectralError> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(SpectralError::InvalidDelta(delta));
    }
    Ok(2.0 * ((1.0 - 2.0 * delta) / (2.0 * delta)).ln())
}
