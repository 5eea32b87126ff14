//! The semilinear heat equation `V_t = V''/2 - V^2/2` on the line.
//!
//! Every solver uses Strang splitting: an exact half step of `v' = -v^2/2`, a Crank-Nicolson step
//! of the linear part, another exact half step. The first two Crank-Nicolson steps are replaced by
//! four backward Euler steps of half size to damp the high-frequency content of rough data.
//!
//! Delta-type data are handled in self-similar variables `V(σ, x) = σ^{-1} W(ln σ, x/√σ)`, in which
//! the equation becomes `W_s = W''/2 + y W'/2 + W - W^2/2` on a fixed `y` window, so that the tiny
//! initial width of a mollified delta and the final width cost the same number of nodes.

use thiserror::Error;

use crate::grid::{GridFunction, UniformGrid};
use crate::linalg::{LinalgError, ThomasFactor};
use crate::stats::{linear_fit, LinearFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("maximum grew from {before:.6e} to {after:.6e} at step {step}")]
    StabilityViolation { step: usize, before: f64, after: f64 },
    #[error("solution reaches {value:.3e} (relative) at the domain boundary")]
    DomainTooSmall { value: f64 },
    #[error("initial data must be non-negative and finite")]
    InvalidData,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lambda ladder exhausted at {lambda:.3e} with last change {last_change:.3e}")]
    NoConvergence { lambda: f64, last_change: f64 },
    #[error("need at least 4 lambda values, got {0}")]
    LadderTooShort(usize),
    #[error("bound {bound:.6e} exceeded by {value:.6e}")]
    BoundViolated { bound: f64, value: f64 },
    #[error("non-finite value in solution")]
    NonFinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    Bounded,
    /// `lambda` times the centred Gaussian density of variance `eps`.
    DeltaMass { lambda: f64, eps: f64 },
    /// `b` times the indicator of `[0, width]`.
    Indicator { b: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub dt: f64,
    pub dx: f64,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub x_grid: UniformGrid,
    pub t_final: f64,
    pub values: Vec<f64>,
    pub init_tag: InitialData,
    pub scheme_params: SchemeParams,
}

impl PdeSolution {
    /// `V(t_final, x)` by cubic interpolation; zero outside the grid.
    pub fn at(&self, x: f64) -> f64 {
        crate::grid::cubic_lagrange(&self.x_grid, &self.values, x)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_grid_function(&self) -> GridFunction {
        GridFunction::new(self.x_grid, self.values.clone())
    }
}

/// Tridiagonal operator with rows `sub[i-1] v[i-1] + diag[i] v[i] + sup[i] v[i+1]`.
#[derive(Debug, Clone)]
struct TridiagOp {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagOp {
    /// `v''/2 + drift(x) v' + react(x) v`, with zero-flux (mirror ghost) ends or, if `dirichlet`,
    /// end values frozen at their initial value.
    fn diffusion(grid: &UniformGrid, drift: impl Fn(f64) -> f64, react: impl Fn(f64) -> f64, dirichlet: bool) -> Self {
        let n = grid.len();
        let h = grid.step();
        let a = 0.5 / (h * h);
        let mut sub = vec![0.0; n - 1];
        let mut sup = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let x = grid.point(i);
            let b = drift(x) / (2.0 * h);
            diag[i] = -2.0 * a + react(x);
            if dirichlet && (i == 0 || i == n - 1) {
                diag[i] = 0.0;
            } else if i == 0 {
                sup[0] = 2.0 * a;
            } else if i == n - 1 {
                sub[n - 2] = 2.0 * a;
            } else {
                sub[i - 1] = a - b;
                sup[i] = a + b;
            }
            if dirichlet && i == 1 {
                sub[0] = 0.0;
            }
            if dirichlet && i == n - 2 {
                sup[n - 2] = 0.0;
            }
        }
        Self { sub, diag, sup }
    }

    /// Factor of `I - c A`.
    fn implicit(&self, c: f64) -> Result<ThomasFactor, LinalgError> {
        let sub: Vec<f64> = self.sub.iter().map(|v| -c * v).collect();
        let sup: Vec<f64> = self.sup.iter().map(|v| -c * v).collect();
        let diag: Vec<f64> = self.diag.iter().map(|v| 1.0 - c * v).collect();
        ThomasFactor::new(&sub, &diag, &sup)
    }

    /// `out = (I + c A) v`.
    fn explicit(&self, c: f64, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            let mut s = (1.0 + c * self.diag[i]) * v[i];
            if i > 0 {
                s += c * self.sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += c * self.sup[i] * v[i + 1];
            }
            out[i] = s;
        }
    }
}

#[inline]
fn logistic_flow(v: &mut [f64], tau: f64) {
    v.iter_mut().for_each(|a| *a /= 1.0 + 0.5 * *a * tau);
}

/// Strang-split stepper for `v_s = A v - v^2/2` over `[0, duration]`.
struct Stepper {
    op: TridiagOp,
    steps: usize,
    ds: f64,
    cn: ThomasFactor,
    be: ThomasFactor,
}

impl Stepper {
    fn new(op: TridiagOp, duration: f64, ds_target: f64) -> Result<Self, PdeError> {
        if !(duration > 0.0) || !(ds_target > 0.0) {
            return Err(PdeError::InvalidParameter(format!("duration {duration}, step {ds_target}")));
        }
        let steps = ((duration / ds_target).ceil() as usize).max(2);
        let ds = duration / steps as f64;
        let cn = op.implicit(0.5 * ds)?;
        let be = op.implicit(0.5 * ds)?;
        Ok(Self { op, steps, ds, cn, be })
    }

    /// Runs the scheme; `on_step(k, v)` may veto a step with an error.
    fn run(&self, v: &mut [f64], mut on_step: impl FnMut(usize, &[f64]) -> Result<(), PdeError>) -> Result<(), PdeError> {
        let mut scratch = vec![0.0; v.len()];
        let ds = self.ds;
        for k in 0..self.steps {
            logistic_flow(v, 0.5 * ds);
            if k < 2 {
                // two backward Euler half steps
                for _ in 0..2 {
                    self.be.solve_in_place(v);
                }
            } else {
                self.op.explicit(0.5 * ds, v, &mut scratch);
                self.cn.solve_in_place(&mut scratch);
                v.copy_from_slice(&scratch);
            }
            logistic_flow(v, 0.5 * ds);
            on_step(k, v)?;
        }
        if v.iter().any(|a| !a.is_finite()) {
            return Err(PdeError::NonFinite);
        }
        Ok(())
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
}

/// Relative boundary amplitude above which localized data report [`PdeError::DomainTooSmall`].
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Evolves `phi0` for time `t` in physical variables with zero-flux ends on `phi0`'s grid.
///
/// Data that vanish at both ends are treated as localized and must still be negligible at the
/// boundary at time `t`.
pub fn evolve(phi0: &GridFunction, t: f64, dt: f64) -> Result<PdeSolution, PdeError> {
    evolve_tagged(phi0, t, dt, InitialData::Bounded, None)
}

fn evolve_tagged(
    phi0: &GridFunction,
    t: f64,
    dt: f64,
    tag: InitialData,
    eps: Option<f64>,
) -> Result<PdeSolution, PdeError> {
    if phi0.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(PdeError::InvalidData);
    }
    let grid = phi0.grid;
    let n = grid.len();
    let peak0 = sup_norm(&phi0.values);
    let localized = peak0 == 0.0 || (phi0.values[0] <= BOUNDARY_TOL * peak0 && phi0.values[n - 1] <= BOUNDARY_TOL * peak0);
    let stepper = Stepper::new(TridiagOp::diffusion(&grid, |_| 0.0, |_| 0.0, false), t, dt)?;
    let mut v = phi0.values.clone();
    let mut before = peak0;
    stepper.run(&mut v, |k, v| {
        let after = sup_norm(v);
        if after > before * (1.0 + 1e-10) + 1e-300 {
            return Err(PdeError::StabilityViolation { step: k, before, after });
        }
        before = after;
        Ok(())
    })?;
    if localized && peak0 > 0.0 {
        let rim = v[0].max(v[n - 1]);
        let peak = sup_norm(&v);
        if rim > BOUNDARY_TOL * peak {
            return Err(PdeError::DomainTooSmall { value: rim / peak });
        }
    }
    Ok(PdeSolution {
        x_grid: grid,
        t_final: t,
        values: v,
        init_tag: tag,
        scheme_params: SchemeParams { dt: stepper.ds, dx: grid.step(), eps },
    })
}

/// Grid and step controls for physical-variable solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub dx: f64,
    pub dt: f64,
    /// Domain half-width; `None` means `max(10 √t, 10)`.
    pub half_width: Option<f64>,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { dx: 0.01, dt: 1e-3, half_width: None }
    }
}

impl PhysicalParams {
    pub fn grid(&self, t: f64) -> UniformGrid {
        let half = self.half_width.unwrap_or_else(|| (10.0 * t.sqrt()).max(10.0));
        UniformGrid::symmetric_closed(half, self.dx)
    }
}

#[inline]
fn gaussian_density(var: f64, x: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// `V` for data `lambda p_eps` evolved for time `t` in physical variables.
/// The mollifier has to be resolved by the grid (`√eps` several times `dx`).
pub fn v_lambda_physical(lambda: f64, t: f64, eps: f64, params: &PhysicalParams) -> Result<PdeSolution, PdeError> {
    if !(lambda > 0.0 && eps > 0.0) {
        return Err(PdeError::InvalidParameter(format!("lambda {lambda}, eps {eps}")));
    }
    let phi0 = GridFunction::from_fn(params.grid(t), |x| lambda * gaussian_density(eps, x));
    evolve_tagged(&phi0, t, params.dt, InitialData::DeltaMass { lambda, eps }, Some(eps))
}

/// Controls for self-similar solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarParams {
    pub dy: f64,
    pub ds: f64,
    pub y_max: f64,
    /// Mollifier variance is `eps_factor * min(t, 1/lambda^2)` unless given explicitly.
    pub eps_factor: f64,
}

impl Default for SelfSimilarParams {
    fn default() -> Self {
        Self { dy: 0.02, ds: 0.01, y_max: 10.0, eps_factor: 1e-4 }
    }
}

impl SelfSimilarParams {
    pub fn default_eps(&self, lambda: f64, t: f64) -> f64 {
        self.eps_factor * t.min(1.0 / (lambda * lambda))
    }

    fn y_grid(&self) -> UniformGrid {
        UniformGrid::symmetric_closed(self.y_max, self.dy)
    }
}

/// `V^λ(t, ·)` for delta data `λ δ_0`, started as `λ p_eps` at time `eps` and run to time `t`
/// (the heat flow carries `δ_0` to `p_eps` in time `eps`). The output grid is `√t` times the
/// `y` grid, so it is the same for every `λ`.
pub fn v_lambda(lambda: f64, t: f64, eps: Option<f64>) -> Result<PdeSolution, PdeError> {
    v_lambda_with(lambda, t, eps, &SelfSimilarParams::default())
}

pub fn v_lambda_with(
    lambda: f64,
    t: f64,
    eps: Option<f64>,
    params: &SelfSimilarParams,
) -> Result<PdeSolution, PdeError> {
    if !(lambda > 0.0) || !(t > 0.0) {
        return Err(PdeError::InvalidParameter(format!("lambda {lambda}, t {t}")));
    }
    let eps = eps.unwrap_or_else(|| params.default_eps(lambda, t));
    if !(eps > 0.0 && eps < t) {
        return Err(PdeError::InvalidParameter(format!("need 0 < eps < t, got eps {eps}, t {t}")));
    }
    let y = params.y_grid();
    // the drift carries boundary values inward, and W = 2 is an unstable equilibrium reached
    // from any positive seed; the ends are pinned at zero
    let op = TridiagOp::diffusion(&y, |y| 0.5 * y, |_| 1.0, true);
    let stepper = Stepper::new(op, (t / eps).ln(), params.ds)?;
    let amp = lambda * eps.sqrt();
    let mut w: Vec<f64> = y.points().map(|y| amp * gaussian_density(1.0, y)).collect();
    let last = w.len() - 1;
    w[0] = 0.0;
    w[last] = 0.0;
    stepper.run(&mut w, |_, _| Ok(()))?;
    let values = w.iter().map(|a| a / t).collect();
    Ok(PdeSolution {
        x_grid: y.scaled(t.sqrt()),
        t_final: t,
        values,
        init_tag: InitialData::DeltaMass { lambda, eps },
        scheme_params: SchemeParams { dt: stepper.ds, dx: params.dy * t.sqrt(), eps: Some(eps) },
    })
}

/// Ladder controls for [`v_infinity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderParams {
    /// First rung is `start / √t`.
    pub start: f64,
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for LadderParams {
    fn default() -> Self {
        Self { start: 16.0, tol: 1e-6, max_doublings: 60 }
    }
}

/// `V^∞(t, ·)` as the limit of `V^λ` along `λ, 2λ, 4λ, …` until successive sup-differences fall
/// below the tolerance.
pub fn v_infinity(t: f64) -> Result<PdeSolution, PdeError> {
    v_infinity_with(t, &SelfSimilarParams::default(), &LadderParams::default())
}

pub fn v_infinity_with(t: f64, params: &SelfSimilarParams, ladder: &LadderParams) -> Result<PdeSolution, PdeError> {
    let mut lambda = ladder.start / t.sqrt();
    let mut prev = v_lambda_with(lambda, t, None, params)?;
    let mut last_change = f64::INFINITY;
    for _ in 0..ladder.max_doublings {
        lambda *= 2.0;
        let next = v_lambda_with(lambda, t, None, params)?;
        last_change = next.values.iter().zip(&prev.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        // compare in the scale-free form t V so that the tolerance means the same for every t
        if t * last_change < ladder.tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(PdeError::NoConvergence { lambda, last_change })
}

/// `H_u(x) = V^{√u}(1, x)`.
pub fn h_u(u: f64, x: f64) -> Result<f64, PdeError> {
    if !(u >= 1.0) {
        return Err(PdeError::InvalidParameter(format!("u must be >= 1, got {u}")));
    }
    Ok(v_lambda(u.sqrt(), 1.0, None)?.at(x))
}

/// The other side of the scaling identity: `u V^1(u, √u x)`.
pub fn h_u_rescaled(u: f64, x: f64) -> Result<f64, PdeError> {
    if !(u >= 1.0) {
        return Err(PdeError::InvalidParameter(format!("u must be >= 1, got {u}")));
    }
    Ok(u * v_lambda(1.0, u, None)?.at(u.sqrt() * x))
}

/// `Ṽ^{b,ε}(t, ·)`: data `b 1_{[0, width]}` on a grid aligned with both ends of the interval
/// (end nodes carry `b/2`, so the discrete mass is exactly `b width`).
pub fn tilde_v(b: f64, width: f64, t: f64) -> Result<PdeSolution, PdeError> {
    tilde_v_with(b, width, t, &PhysicalParams::default())
}

pub fn tilde_v_with(b: f64, width: f64, t: f64, params: &PhysicalParams) -> Result<PdeSolution, PdeError> {
    if !(b > 0.0 && width > 0.0) {
        return Err(PdeError::InvalidParameter(format!("b {b}, width {width}")));
    }
    let cells = (width / params.dx).ceil().max(4.0);
    let dx = width / cells;
    let half = params.half_width.unwrap_or_else(|| (10.0 * t.sqrt()).max(10.0));
    let grid = UniformGrid::symmetric_closed((half / dx).ceil() * dx, dx);
    let values = grid
        .points()
        .map(|x| {
            let r = x / dx;
            if r < -1e-9 || r > cells + 1e-9 {
                0.0
            } else if r.abs() < 1e-9 || (r - cells).abs() < 1e-9 {
                0.5 * b
            } else {
                b
            }
        })
        .collect();
    let mut sol = evolve_tagged(&GridFunction::new(grid, values), t, params.dt, InitialData::Indicator { b, width }, None)?;
    let bound = b / (1.0 + 0.5 * b * t);
    let top = sol.max();
    if top > bound * (1.0 + 1e-10) {
        return Err(PdeError::BoundViolated { bound, value: top });
    }
    sol.init_tag = InitialData::Indicator { b, width };
    Ok(sol)
}

/// One case of the delta scaling law `V^{λr}(s, x) = λ^2 V^r(λ^2 s, λx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCase {
    pub r: f64,
    pub lambda: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport {
    pub case: ScalingCase,
    /// `max_x |left - right| / max_x left`.
    pub violation: f64,
    /// Largest relative change of either side when `dx` and `dt` are halved.
    pub truncation: f64,
}

/// Checks the scaling law in physical variables with matched mollifiers (`eps` on the left,
/// `λ^2 eps` on the right) and the same `dx`, `dt` on both sides.
pub fn scaling_check(cases: &[ScalingCase], eps: f64, params: &PhysicalParams) -> Result<Vec<ScalingReport>, PdeError> {
    cases
        .iter()
        .map(|&case| {
            let ScalingCase { r, lambda, s } = case;
            let left = v_lambda_physical(lambda * r, s, eps, params)?;
            let right = v_lambda_physical(r, lambda * lambda * s, lambda * lambda * eps, params)?;
            let fine_params = PhysicalParams { dx: 0.5 * params.dx, dt: 0.5 * params.dt, ..*params };
            let left_fine = v_lambda_physical(lambda * r, s, eps, &fine_params)?;
            let right_fine = v_lambda_physical(r, lambda * lambda * s, lambda * lambda * eps, &fine_params)?;
            let scale = left.max();
            let mut violation = 0.0_f64;
            let mut truncation = 0.0_f64;
            for (x, l) in left.x_grid.points().zip(&left.values) {
                if !right.x_grid.contains(lambda * x) {
                    continue;
                }
                let rv = lambda * lambda * right.at(lambda * x);
                violation = violation.max((l - rv).abs());
                let rv_fine = lambda * lambda * right_fine.at(lambda * x);
                truncation = truncation.max((l - left_fine.at(x)).abs()).max((rv - rv_fine).abs());
            }
            Ok(ScalingReport { case, violation: violation / scale, truncation: truncation / scale })
        })
        .collect()
}

/// Output of [`rate_experiment`].
#[derive(Debug, Clone)]
pub struct RateReport {
    pub t: f64,
    pub lambdas: Vec<f64>,
    pub v_infinity: f64,
    /// `D(λ) = V^∞(t, 0) - V^λ(t, 0)`.
    pub d: Vec<f64>,
    pub log_d: Vec<f64>,
    /// `log D` against `log λ`.
    pub fit: LinearFit,
    /// Largest violation of `e^{-V^λ} - e^{-V^∞} <= V^∞ - V^λ <= e^{2/t}(e^{-V^λ} - e^{-V^∞})`
    /// over all grid points and ladder members (non-positive when the sandwich holds).
    pub sandwich_violation: f64,
    /// Smallest `V^∞ - V^λ` over interior grid points and ladder members.
    pub min_gap: f64,
}

pub fn rate_experiment(t: f64, lambda_ladder: &[f64]) -> Result<RateReport, PdeError> {
    rate_experiment_with(t, lambda_ladder, &SelfSimilarParams::default(), &LadderParams::default())
}

pub fn rate_experiment_with(
    t: f64,
    lambda_ladder: &[f64],
    params: &SelfSimilarParams,
    ladder: &LadderParams,
) -> Result<RateReport, PdeError> {
    if lambda_ladder.len() < 4 {
        return Err(PdeError::LadderTooShort(lambda_ladder.len()));
    }
    let min_lambda = 1.0 / t.sqrt();
    if let Some(&l) = lambda_ladder.iter().find(|&&l| l < min_lambda * (1.0 - 1e-12)) {
        return Err(PdeError::InvalidParameter(format!("lambda {l} below t^(-1/2) = {min_lambda}")));
    }
    let vinf = v_infinity_with(t, params, ladder)?;
    let solutions: Vec<PdeSolution> = {
        use rayon::prelude::*;
        lambda_ladder.par_iter().map(|&l| v_lambda_with(l, t, None, params)).collect::<Result<_, _>>()?
    };
    let centre = vinf.x_grid.nearest(0.0).expect("grid contains the origin");
    let growth = (2.0 / t).exp();
    let mut sandwich_violation = f64::NEG_INFINITY;
    let mut min_gap = f64::INFINITY;
    let interior = 1..vinf.values.len() - 1;
    for sol in &solutions {
        for (a, b) in sol.values[interior.clone()].iter().zip(&vinf.values[interior.clone()]) {
            let gap = b - a;
            let exp_gap = (-a).exp() - (-b).exp();
            sandwich_violation = sandwich_violation.max(exp_gap - gap).max(gap - growth * exp_gap);
            min_gap = min_gap.min(gap);
        }
    }
    let d: Vec<f64> = solutions.iter().map(|s| vinf.values[centre] - s.values[centre]).collect();
    let log_d: Vec<f64> = d.iter().map(|v| v.ln()).collect();
    let log_l: Vec<f64> = lambda_ladder.iter().map(|l| l.ln()).collect();
    let fit = linear_fit(&log_l, &log_d).ok_or_else(|| PdeError::InvalidParameter("degenerate lambda ladder".into()))?;
    Ok(RateReport {
        t,
        lambdas: lambda_ladder.to_vec(),
        v_infinity: vinf.values[centre],
        d,
        log_d,
        fit,
        sandwich_violation,
        min_gap,
    })
}

/// Time exponent of `D(t) = V^∞(t, 0) - V^λ(t, 0)`.
#[derive(Debug, Clone)]
pub struct TimeExponentReport {
    pub ts: Vec<f64>,
    /// `D` at fixed `λ`; its log-log slope estimates `-(1/2 + λ_0)`.
    pub d_fixed_lambda: Vec<f64>,
    pub fit_fixed_lambda: LinearFit,
    /// `D` at fixed `λ √t`; exact scaling makes this slope `-1`.
    pub d_fixed_product: Vec<f64>,
    pub fit_fixed_product: LinearFit,
}

pub fn time_exponent(lambda: f64, ts: &[f64]) -> Result<TimeExponentReport, PdeError> {
    time_exponent_with(lambda, ts, &SelfSimilarParams::default(), &LadderParams::default())
}

pub fn time_exponent_with(
    lambda: f64,
    ts: &[f64],
    params: &SelfSimilarParams,
    ladder: &LadderParams,
) -> Result<TimeExponentReport, PdeError> {
    if ts.len() < 2 {
        return Err(PdeError::InvalidParameter("need at least two times".into()));
    }
    let mut fixed_l = Vec::with_capacity(ts.len());
    let mut fixed_p = Vec::with_capacity(ts.len());
    for &t in ts {
        let vinf = v_infinity_with(t, params, ladder)?;
        let c = vinf.x_grid.nearest(0.0).expect("grid contains the origin");
        let at = |l: f64| -> Result<f64, PdeError> { Ok(vinf.values[c] - v_lambda_with(l, t, None, params)?.values[c]) };
        fixed_l.push(at(lambda)?);
        fixed_p.push(at(lambda / t.sqrt())?);
    }
    let log_t: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let fit = |d: &[f64]| {
        let log_d: Vec<f64> = d.iter().map(|v| v.ln()).collect();
        linear_fit(&log_t, &log_d).ok_or_else(|| PdeError::InvalidParameter("degenerate time ladder".into()))
    };
    Ok(TimeExponentReport {
        ts: ts.to_vec(),
        fit_fixed_lambda: fit(&fixed_l)?,
        d_fixed_lambda: fixed_l,
        fit_fixed_product: fit(&fixed_p)?,
        d_fixed_product: fixed_p,
    })
}
