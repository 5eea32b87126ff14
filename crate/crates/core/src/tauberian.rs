//! Two-sided power bounds on a distribution function from power bounds on its Laplace transform.
//!
//! If `U` is the distribution function of a sub-probability on `[0, ∞)` with
//! `Û(λ) = ∫ e^{-λa} U(da)`, then `Û(λ) <= C2 λ^{-p}` for all `λ > 0` gives `U(a) <= e C2 a^p`, and
//! additionally `Û(λ) >= C1 λ^{-p}` for `λ >= λ̲` gives `U(a) >= d1 a^p` for `a <= 1`.

use std::f64::consts::E;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TauberianError {
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("{bound} bound violated at a = {a}: U(a) = {u}, bound {value}")]
    BoundViolated { bound: &'static str, a: f64, u: f64, value: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Constants of the two Laplace-transform bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBoundInput {
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
    pub under_lambda: f64,
}

impl TailBoundInput {
    pub fn validate(&self) -> Result<(), TauberianError> {
        let bad = |m: String| Err(TauberianError::InvalidConstants(m));
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return bad(format!("C2 must be positive, got {}", self.c2));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return bad(format!("p must be positive, got {}", self.p));
        }
        if !(self.c1 >= 0.0) {
            return bad(format!("C1 must be nonnegative, got {}", self.c1));
        }
        if !(self.under_lambda >= 0.0 && self.under_lambda.is_finite()) {
            return bad(format!("lower threshold must be nonnegative, got {}", self.under_lambda));
        }
        if self.c1 > self.c2 {
            return bad(format!("C1 = {} exceeds C2 = {}", self.c1, self.c2));
        }
        Ok(())
    }
}

/// `e C2 a^p`.
pub fn upper_bound_u(c2: f64, p: f64, a: f64) -> f64 {
    E * c2 * a.powf(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerCoeff {
    pub d1: f64,
    /// `(C1/4) / log(4 e C2 / C1)`, offered when `p <= 1` and `λ̲ <= 4`.
    pub simplified: Option<f64>,
}

/// `d1 = (C1/2) · max(2 log((2p/e)^p · 4 e C2 / C1), 2p, λ̲)^{-p}`.
pub fn lower_coeff_d1(c1: f64, c2: f64, p: f64, under_lambda: f64) -> Result<LowerCoeff, TauberianError> {
    TailBoundInput { c1, c2, p, under_lambda }.validate()?;
    if !(c1 > 0.0) {
        return Err(TauberianError::InvalidConstants("C1 must be positive".into()));
    }
    let ratio = 4.0 * E * c2 / c1;
    if ratio <= 1.0 {
        return Err(TauberianError::InvalidConstants(format!("C1 = {c1} >= 4e C2 = {}", 4.0 * E * c2)));
    }
    let log_term = 2.0 * (p * (2.0 * p / E).ln() + ratio.ln());
    let m = log_term.max(2.0 * p).max(under_lambda);
    let d1 = 0.5 * c1 * m.powf(-p);
    let simplified = (p <= 1.0 && under_lambda <= 4.0).then(|| 0.25 * c1 / ratio.ln());
    Ok(LowerCoeff { d1, simplified })
}

/// A sub-probability on `[0, ∞)` through its distribution function and Laplace transform.
pub trait TailFamily {
    fn u(&self, a: f64) -> f64;
    fn laplace(&self, lambda: f64) -> f64;
    fn label(&self) -> String;
}

/// `U(a) = min(a, 1)^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub p: f64,
}

impl TailFamily for PowerLaw {
    fn u(&self, a: f64) -> f64 {
        a.clamp(0.0, 1.0).powf(self.p)
    }

    /// `∫_0^1 e^{-λ v^{1/p}} dv`.
    fn laplace(&self, lambda: f64) -> f64 {
        let q = 1.0 / self.p;
        let f = |v: f64| (-lambda * v.powf(q)).exp();
        // split where the integrand has decayed by e^{-1}, e^{-2}, ...
        let mut edges = vec![0.0];
        let mut k = 1.0_f64;
        loop {
            let v = (k / lambda.max(1e-300)).powf(self.p);
            if v >= 1.0 || k > 800.0 {
                break;
            }
            edges.push(v);
            k *= 2.0;
        }
        edges.push(1.0);
        edges.windows(2).map(|e| adaptive_simpson(&f, e[0], e[1], 1e-15)).sum()
    }

    fn label(&self) -> String {
        format!("power law p={}", self.p)
    }
}

/// Unit mass at `at > 0`: `Û(λ) = e^{-λ at}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub at: f64,
}

impl TailFamily for PointMass {
    fn u(&self, a: f64) -> f64 {
        if a >= self.at {
            1.0
        } else {
            0.0
        }
    }

    fn laplace(&self, lambda: f64) -> f64 {
        (-lambda * self.at).exp()
    }

    fn label(&self) -> String {
        format!("point mass at {}", self.at)
    }
}

/// `U(a) = #{i: 0 < x_i <= a} / n`; zero samples carry no mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    positive: Vec<f64>,
    n: usize,
}

impl Empirical {
    pub fn new(samples: &[f64]) -> Self {
        let mut positive: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
        positive.sort_by(f64::total_cmp);
        Self { positive, n: samples.len() }
    }
}

impl TailFamily for Empirical {
    fn u(&self, a: f64) -> f64 {
        self.positive.partition_point(|&x| x <= a) as f64 / self.n as f64
    }

    fn laplace(&self, lambda: f64) -> f64 {
        self.positive.iter().map(|x| (-lambda * x).exp()).sum::<f64>() / self.n as f64
    }

    fn label(&self) -> String {
        format!("empirical, {} samples", self.n)
    }
}

    #[allow(clippy::too_many_arguments)]
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowerStatus {
    Holds,
    /// `λ^p Û(λ)` is still decreasing at the top of the grid, so no power lower bound is certified.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauberianRow {
    pub a: f64,
    pub u: f64,
    pub lower: Option<f64>,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauberianReport {
    pub family: String,
    pub p: f64,
    pub under_lambda: f64,
    pub c2: f64,
    pub c1: Option<f64>,
    pub d1: Option<LowerCoeff>,
    pub lower_status: LowerStatus,
    pub rows: Vec<TauberianRow>,
}

/// Estimates `C2 = sup λ^p Û(λ)` over `lambda_grid` and `C1 = inf` over the grid points `>= λ̲`, then
/// checks `d1 a^p <= U(a) <= e C2 a^p` at every `a` of `a_grid` in `(0, 1]`.
pub fn verify_on_family(
    family: &dyn TailFamily,
    p: f64,
    lambda_grid: &[f64],
    a_grid: &[f64],
    under_lambda: f64,
) -> Result<TauberianReport, TauberianError> {
    if lambda_grid.len() < 2 || lambda_grid.iter().any(|&l| !(l > 0.0)) || lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TauberianError::InvalidGrid("lambda grid must be positive and increasing".into()));
    }
    let scaled: Vec<f64> = lambda_grid.iter().map(|&l| l.powf(p) * family.laplace(l)).collect();
    let c2 = scaled.iter().copied().fold(0.0, f64::max);
    let active: Vec<f64> =
        lambda_grid.iter().zip(&scaled).filter(|(&l, _)| l >= under_lambda).map(|(_, &s)| s).collect();
    let (mut c1, mut lower_status) = (None, LowerStatus::Inapplicable);
    if active.len() >= 2 {
        let (arg, min) = active.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let falling_at_end = arg == active.len() - 1 && active[arg] < active[arg - 1];
        if min > 0.0 && !falling_at_end {
            c1 = Some(min);
            lower_status = LowerStatus::Holds;
        }
    }
    let d1 = match c1 {
        Some(c1) => Some(lower_coeff_d1(c1, c2, p, under_lambda)?),
        None => None,
    };
    let mut rows = Vec::new();
    for &a in a_grid.iter().filter(|&&a| a > 0.0 && a <= 1.0) {
        let u = family.u(a);
        let upper = upper_bound_u(c2, p, a);
        if u > upper {
            return Err(TauberianError::BoundViolated { bound: "upper", a, u, value: upper });
        }
        let lower = d1.map(|d| d.d1 * a.powf(p));
        if let Some(l) = lower {
            if u < l {
                return Err(TauberianError::BoundViolated { bound: "lower", a, u, value: l });
            }
        }
        rows.push(TauberianRow { a, u, lower, upper });
    }
    Ok(TauberianReport { family: family.label(), p, under_lambda, c2, c1, d1, lower_status, rows })
}

/// `count` points from `lo` to `hi` evenly spaced in log scale.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..count).map(|i| (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp()).collect()
}
