//! The self-similar profile `F`: the positive, even, decaying solution of
//!
//! ```text
//! F''/2 + y F'/2 + F - F^2/2 = 0,   F'(0) = 0,   F(y) ~ c0 y exp(-y^2/2)
//! ```
//!
//! found by shooting on `F(0)` with a fixed-step RK4 integrator and bisection.
//! Away from the origin the linearised equation `F'' + y F' + 2F = 0` has the
//! exact decaying solution `c y exp(-y^2/2)` and an algebraic branch `~ C / y^2`.
//! Trial values of `F(0)` that are too small pick up a negative algebraic part
//! and cross zero; values that are too large keep a positive one and decay
//! slower than a Gaussian. Those two events drive the bisection.

use thiserror::Error;

/// Log-derivative test for an algebraic tail only runs beyond this abscissa.
const TAIL_TRIGGER_FROM: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("initial value must be positive, got {0}")]
    InvalidInitialValue(f64),
    #[error("state became non-finite at y = {0}")]
    NonFinite(f64),
    #[error("bracket [{lo}, {hi}] does not separate undershoot from overshoot ({lo_class:?} / {hi_class:?})")]
    BracketInvalid { lo: f64, hi: f64, lo_class: ShotClass, hi_class: ShotClass },
    #[error("ODE residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotClass {
    /// The trajectory crossed zero.
    Undershoot,
    /// The trajectory turned upward, or decays slower than a Gaussian.
    Overshoot,
    /// Neither event happened before `y_max`.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotOutcome {
    pub classification: ShotClass,
    /// Abscissa of the zero crossing (undershoot) or of the overshoot trigger.
    pub crossing_y: Option<f64>,
}

/// Samples `F(k h)`, `F'(k h)` of one shot, truncated at the classification event.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub step: f64,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn y(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
}

#[inline]
fn rhs(y: f64, f: f64, fp: f64) -> (f64, f64) {
    (fp, -y * fp - 2.0 * f + f * f)
}

/// Integrates the profile ODE from `y = 0` with `F(0) = f0_trial`, `F'(0) = 0`.
pub fn integrate_shot(f0_trial: f64, h: f64, y_max: f64) -> Result<(Trajectory, ShotOutcome), ProfileError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(ProfileError::InvalidStep(h));
    }
    if !(f0_trial > 0.0) {
        return Err(ProfileError::InvalidInitialValue(f0_trial));
    }
    let steps = (y_max / h).round() as usize;
    let mut traj = Trajectory { step: h, f: Vec::with_capacity(steps + 1), fp: Vec::with_capacity(steps + 1) };
    let (mut f, mut fp) = (f0_trial, 0.0);
    traj.f.push(f);
    traj.fp.push(fp);
    for k in 0..steps {
        let y = k as f64 * h;
        let (k1f, k1p) = rhs(y, f, fp);
        let (k2f, k2p) = rhs(y + 0.5 * h, f + 0.5 * h * k1f, fp + 0.5 * h * k1p);
        let (k3f, k3p) = rhs(y + 0.5 * h, f + 0.5 * h * k2f, fp + 0.5 * h * k2p);
        let (k4f, k4p) = rhs(y + h, f + h * k3f, fp + h * k3p);
        let nf = f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        let nfp = fp + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        let ny = y + h;
        if !nf.is_finite() || !nfp.is_finite() {
            return Err(ProfileError::NonFinite(ny));
        }
        if nf <= 0.0 {
            let crossing = y + h * f / (f - nf);
            return Ok((traj, ShotOutcome { classification: ShotClass::Undershoot, crossing_y: Some(crossing) }));
        }
        let turned_up = nfp > 0.0;
        let algebraic_tail = ny >= TAIL_TRIGGER_FROM && nfp > -0.5 * ny * nf;
        if turned_up || algebraic_tail {
            return Ok((traj, ShotOutcome { classification: ShotClass::Overshoot, crossing_y: Some(ny) }));
        }
        f = nf;
        fp = nfp;
        traj.f.push(f);
        traj.fp.push(fp);
    }
    Ok((traj, ShotOutcome { classification: ShotClass::Converged, crossing_y: None }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub step: f64,
    pub y_max: f64,
    pub bracket_tol: f64,
    /// Below this value the tabulated solution is replaced by the exact linear tail.
    pub tail_floor: f64,
    pub residual_tol: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { step: 1e-4, y_max: 8.0, bracket_tol: 1e-13, tail_floor: 1e-10, residual_tol: 1e-6 }
    }
}

/// Tabulated profile on `[0, y_max]`, evaluated on the line by even extension.
#[derive(Debug, Clone)]
pub struct ProfileF {
    pub grid_step: f64,
    pub y_max: f64,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub f0: f64,
    pub c0: f64,
    pub ode_residual_sup: f64,
    /// Last abscissa taken from the shooting trajectory; beyond it the tail formula is used.
    pub reliable_until: f64,
    /// `|F(0; h) - F(0; h/2)|`, the step-halving check on the initial value.
    pub f0_halving_delta: f64,
}

/// Bisection on `F(0) ∈ [1, 2]` between undershooting and overshooting shots.
pub fn solve_profile(bracket_tol: f64, h: f64, y_max: f64) -> Result<ProfileF, ProfileError> {
    let config = ProfileConfig { step: h, y_max, bracket_tol, ..ProfileConfig::default() };
    solve_profile_with(&config)
}

pub fn solve_profile_with(config: &ProfileConfig) -> Result<ProfileF, ProfileError> {
    let f0 = bisect_initial_value(config.bracket_tol, config.step, config.y_max)?;
    let f0_half = bisect_initial_value(config.bracket_tol, 0.5 * config.step, config.y_max)?;
    let mut profile = tabulate(f0, config)?;
    profile.f0_halving_delta = (f0 - f0_half).abs();
    if profile.ode_residual_sup > config.residual_tol {
        return Err(ProfileError::ResidualTooLarge { residual: profile.ode_residual_sup, tol: config.residual_tol });
    }
    Ok(profile)
}

fn bisect_initial_value(bracket_tol: f64, h: f64, y_max: f64) -> Result<f64, ProfileError> {
    let (mut lo, mut hi) = (1.0, 2.0);
    let lo_class = integrate_shot(lo, h, y_max)?.1.classification;
    let hi_class = integrate_shot(hi, h, y_max)?.1.classification;
    if lo_class != ShotClass::Undershoot || hi_class != ShotClass::Overshoot {
        return Err(ProfileError::BracketInvalid { lo, hi, lo_class, hi_class });
    }
    while hi - lo > bracket_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match integrate_shot(mid, h, y_max)?.1.classification {
            ShotClass::Undershoot => lo = mid,
            ShotClass::Overshoot => hi = mid,
            ShotClass::Converged => return Ok(mid),
        }
    }
    Ok(0.5 * (lo + hi))
}

fn tabulate(f0: f64, config: &ProfileConfig) -> Result<ProfileF, ProfileError> {
    let h = config.step;
    let (traj, _) = integrate_shot(f0, h, config.y_max)?;
    let steps = (config.y_max / h).round() as usize;
    // the shot is trusted until it falls below the floor or its event fires
    let mut last = traj.len() - 1;
    if let Some(k) = traj.f.iter().position(|&v| v < config.tail_floor) {
        last = last.min(k);
    }
    let y_last = traj.y(last);
    let c0 = tail_constant(y_last, traj.fp[last]);
    let mut values = Vec::with_capacity(steps + 1);
    let mut derivs = Vec::with_capacity(steps + 1);
    values.extend_from_slice(&traj.f[..=last]);
    derivs.extend_from_slice(&traj.fp[..=last]);
    for k in last + 1..=steps {
        let y = k as f64 * h;
        values.push(tail_value(c0, y));
        derivs.push(tail_deriv(c0, y));
    }
    let residual_sup = ode_residual(&values, &derivs, h).iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    Ok(ProfileF {
        grid_step: h,
        y_max: steps as f64 * h,
        values,
        derivs,
        f0,
        c0,
        ode_residual_sup: residual_sup,
        reliable_until: y_last,
        f0_halving_delta: 0.0,
    })
}

/// `c0` from the derivative at `y`, using the exact linear tail `c y e^{-y^2/2}`,
/// whose derivative is `c (1 - y^2) e^{-y^2/2}`.
fn tail_constant(y: f64, fp: f64) -> f64 {
    -(0.5 * y * y).exp() * fp / (y * y - 1.0)
}

#[inline]
fn tail_value(c0: f64, y: f64) -> f64 {
    c0 * y * (-0.5 * y * y).exp()
}

#[inline]
fn tail_deriv(c0: f64, y: f64) -> f64 {
    c0 * (1.0 - y * y) * (-0.5 * y * y).exp()
}

/// Pointwise residual `F''/2 + y F'/2 + F - F^2/2` at interior nodes, with
/// `F''` taken as the central difference of the tabulated `F'`.
pub fn ode_residual(f: &[f64], fp: &[f64], h: f64) -> Vec<f64> {
    let n = f.len().min(fp.len());
    (1..n.saturating_sub(1))
        .map(|k| {
            let y = k as f64 * h;
            (fp[k + 1] - fp[k - 1]) / (4.0 * h) + 0.5 * y * fp[k] + f[k] - 0.5 * f[k] * f[k]
        })
        .collect()
}

impl ProfileF {
    /// `F(x)` on the real line (even extension, cubic Hermite between nodes).
    pub fn eval(&self, x: f64) -> f64 {
        let y = x.abs();
        if y >= self.y_max {
            return tail_value(self.c0, y);
        }
        let (k, t) = self.locate(y);
        let h = self.grid_step;
        let (f0, f1, d0, d1) = (self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * h * d1
    }

    /// `F'(x)` on the real line (odd extension).
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let y = x.abs();
        let d = if y >= self.y_max {
            tail_deriv(self.c0, y)
        } else {
            let (k, t) = self.locate(y);
            let h = self.grid_step;
            let (f0, f1, d0, d1) = (self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1]);
            let t2 = t * t;
            ((6.0 * t2 - 6.0 * t) * f0 + (-6.0 * t2 + 6.0 * t) * f1) / h
                + (3.0 * t2 - 4.0 * t + 1.0) * d0
                + (3.0 * t2 - 2.0 * t) * d1
        };
        if x < 0.0 {
            -d
        } else {
            d
        }
    }

    fn locate(&self, y: f64) -> (usize, f64) {
        let r = y / self.grid_step;
        let k = (r.floor() as usize).min(self.values.len() - 2);
        (k, r - k as f64)
    }

    pub fn abscissae(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.grid_step)
    }

    fn reliable_index(&self) -> usize {
        ((self.reliable_until / self.grid_step).round() as usize).min(self.values.len() - 1)
    }

    /// `F'(y)` from the integrated form of the ODE,
    /// `F'(y) = e^{(x0^2 - y^2)/2} F'(x0) + ∫_{x0}^{y} e^{(z^2 - y^2)/2} F(z)(F(z) - 2) dz`,
    /// with both ends snapped to the grid and the integral done by trapezoid.
    pub fn fprime_by_integral(&self, x0: f64, y: f64) -> f64 {
        let h = self.grid_step;
        let i0 = (x0 / h).round() as usize;
        let i1 = (y / h).round() as usize;
        assert!(i1 >= i0 && i1 < self.values.len());
        let ya = i0 as f64 * h;
        let yb = i1 as f64 * h;
        let integrand: Vec<f64> = (i0..=i1)
            .map(|k| {
                let z = k as f64 * h;
                let f = self.values[k];
                (0.5 * (z * z - yb * yb)).exp() * f * (f - 2.0)
            })
            .collect();
        (0.5 * (ya * ya - yb * yb)).exp() * self.derivs[i0] + crate::grid::trapezoid(&integrand, h)
    }
}

/// Integral identities and consistency measures of a computed profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileIdentities {
    /// `∫_R F`
    pub int_f: f64,
    /// `∫_R F^2`
    pub int_f2: f64,
    /// `F(y) / (c0 y e^{-y^2/2})` at the last reliable node.
    pub tail_ratio: f64,
    pub residual_sup: f64,
    /// Largest discrepancy of [`ProfileF::fprime_by_integral`] against the tabulated `F'`.
    pub fprime_formula_err: f64,
}

pub fn profile_identities(profile: &ProfileF) -> ProfileIdentities {
    let h = profile.grid_step;
    let y_end = profile.y_max;
    let c0 = profile.c0;
    let half_f = crate::grid::trapezoid(&profile.values, h) + c0 * (-0.5 * y_end * y_end).exp();
    let squares: Vec<f64> = profile.values.iter().map(|v| v * v).collect();
    let gauss = (-y_end * y_end).exp();
    let tail_f2 = c0 * c0 * (0.5 * y_end * gauss + 0.25 * gauss / y_end);
    let half_f2 = crate::grid::trapezoid(&squares, h) + tail_f2;

    let k = profile.reliable_index();
    let y = k as f64 * h;
    let tail_ratio = profile.values[k] / tail_value(c0, y);

    let reliable = profile.reliable_until.min(5.0);
    let mut err = 0.0_f64;
    for &x0 in &[0.0, 0.5, 1.0, 2.0, 3.0] {
        let mut yy = x0;
        while yy <= reliable {
            let kk = (yy / h).round() as usize;
            err = err.max((profile.fprime_by_integral(x0, yy) - profile.derivs[kk]).abs());
            yy += 0.25;
        }
    }
    ProfileIdentities {
        int_f: 2.0 * half_f,
        int_f2: 2.0 * half_f2,
        tail_ratio,
        residual_sup: profile.ode_residual_sup,
        fprime_formula_err: err,
    }
}
