//! Box-counting dimension, Riesz energies and a subordinator range sampler for point sets on the line.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::particles::replicate_rng;
use crate::stats::linear_fit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error("point set is empty")]
    EmptySet,
    #[error("non-finite point {0}")]
    NonFinite(f64),
    #[error("all {0} points coincide")]
    DegenerateSet(usize),
    #[error("need at least two distinct positive scales")]
    TooFewScales,
    #[error("coincident points at {0}")]
    CoincidentPoints(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot invert the jump tail at level {0:.3e}")]
    InversionFailure(f64),
}

/// Sorted finite points with a note on where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<f64>,
    pub source: String,
}

impl PointSet {
    pub fn new(mut points: Vec<f64>, source: impl Into<String>) -> Result<Self, DimensionError> {
        if let Some(&x) = points.iter().find(|x| !x.is_finite()) {
            return Err(DimensionError::NonFinite(x));
        }
        points.sort_by(f64::total_cmp);
        Ok(Self { points, source: source.into() })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxReport {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    /// Slope of `log N(ε)` against `log(1/ε)`.
    pub slope: f64,
    pub intercept: f64,
}

/// Number of occupied cells `[iε, (i+1)ε)` at each scale and the log-log slope.
pub fn box_dimension(points: &PointSet, scale_ladder: &[f64]) -> Result<BoxReport, DimensionError> {
    let p = points.points();
    if p.is_empty() {
        return Err(DimensionError::EmptySet);
    }
    if p.len() > 1 && p[0] == p[p.len() - 1] {
        return Err(DimensionError::DegenerateSet(p.len()));
    }
    let mut distinct: Vec<f64> = scale_ladder.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 || distinct[0] <= 0.0 {
        return Err(DimensionError::TooFewScales);
    }
    let counts: Vec<usize> = scale_ladder
        .iter()
        .map(|&eps| {
            let mut n = 0;
            let mut last = i64::MIN;
            for &x in p {
                let cell = (x / eps).floor() as i64;
                if cell != last {
                    n += 1;
                    last = cell;
                }
            }
            n
        })
        .collect();
    let x: Vec<f64> = scale_ladder.iter().map(|e| (1.0 / e).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let fit = linear_fit(&x, &y).ok_or(DimensionError::TooFewScales)?;
    Ok(BoxReport { scales: scale_ladder.to_vec(), counts, slope: fit.slope, intercept: fit.intercept })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledBoxReport {
    pub scales: Vec<f64>,
    /// Mean of `log N(ε)` over the sets used.
    pub mean_log_counts: Vec<f64>,
    pub slope: f64,
    /// Sets with at least two distinct points.
    pub used: usize,
}

/// Box dimension from the average of `log N(ε)` over many small sets; sets with fewer than two
/// distinct points are skipped.
pub fn pooled_box_dimension(sets: &[PointSet], scale_ladder: &[f64]) -> Result<PooledBoxReport, DimensionError> {
    let mut sum = vec![0.0; scale_ladder.len()];
    let mut used = 0;
    for set in sets {
        let p = set.points();
        if p.len() < 2 || p[0] == p[p.len() - 1] {
            continue;
        }
        let r = box_dimension(set, scale_ladder)?;
        for (acc, &c) in sum.iter_mut().zip(&r.counts) {
            *acc += (c as f64).ln();
        }
        used += 1;
    }
    if used == 0 {
        return Err(DimensionError::EmptySet);
    }
    let mean_log_counts: Vec<f64> = sum.iter().map(|s| s / used as f64).collect();
    let x: Vec<f64> = scale_ladder.iter().map(|e| (1.0 / e).ln()).collect();
    let fit = linear_fit(&x, &mean_log_counts).ok_or(DimensionError::TooFewScales)?;
    Ok(PooledBoxReport { scales: scale_ladder.to_vec(), mean_log_counts, slope: fit.slope, used })
}

fn check_beta(beta: f64) -> Result<(), DimensionError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DimensionError::InvalidParameter(format!("beta must be in (0,1), got {beta}")));
    }
    Ok(())
}

/// `(1/(N(N-1))) Σ_{i≠j} |x_i - x_j|^{-β}`.
pub fn riesz_energy(points: &PointSet, beta: f64) -> Result<f64, DimensionError> {
    let n = points.len();
    let w = vec![1.0 / n as f64; n];
    riesz_energy_weighted(points.points(), &w, beta)
}

/// `Σ_{i≠j} w_i w_j |x_i - x_j|^{-β} / (1 - Σ w_i^2)` for `x` sorted ascending; with equal weights
/// this is the plain pair average of [`riesz_energy`].
pub fn riesz_energy_weighted(x: &[f64], weights: &[f64], beta: f64) -> Result<f64, DimensionError> {
    check_beta(beta)?;
    if x.len() < 2 || weights.len() != x.len() {
        return Err(DimensionError::InvalidParameter("need at least two points with one weight each".into()));
    }
    if let Some(p) = x.windows(2).find(|p| !(p[1] > p[0])) {
        return Err(if p[1] == p[0] {
            DimensionError::CoincidentPoints(p[0])
        } else {
            DimensionError::InvalidParameter("points must be sorted".into())
        });
    }
    // one partial sum per row, summed in row order: independent of the thread count
    let rows: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let xi = x[i];
            weights[i] * x[i + 1..].iter().zip(&weights[i + 1..]).map(|(xj, wj)| wj * (xj - xi).powf(-beta)).sum::<f64>()
        })
        .collect();
    let pair_sum = 2.0 * rows.iter().sum::<f64>();
    let self_mass: f64 = weights.iter().map(|w| w * w).sum();
    let total: f64 = weights.iter().sum();
    Ok(pair_sum / (total * total - self_mass))
}

/// `∫∫_{[0,1]^2} |x - y|^{-β} dx dy = 2 / ((1 - β)(2 - β))`.
pub fn uniform_energy(beta: f64) -> f64 {
    2.0 / ((1.0 - beta) * (2.0 - beta))
}

/// Midpoints of the `2^depth` intervals of the middle-thirds construction at level `depth`.
pub fn cantor_points(depth: u32) -> PointSet {
    let mut left = vec![0.0_f64];
    let mut len = 1.0;
    for _ in 0..depth {
        len /= 3.0;
        left = left.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
    }
    let points = left.into_iter().map(|a| a + 0.5 * len).collect();
    PointSet { points, source: format!("cantor depth {depth}") }
}

/// Tail `H(x) = ν([x, ∞))` of the subordinator's Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyTail {
    /// `x^{-α} (log(1/x + 1))^2`.
    LogCorrected,
    /// `x^{-α}`, the α-stable subordinator.
    PureStable,
}

impl LevyTail {
    pub fn eval(self, alpha: f64, x: f64) -> f64 {
        self.log_eval(alpha, x.ln()).exp()
    }

    /// `log H(e^y)`.
    fn log_eval(self, alpha: f64, y: f64) -> f64 {
        match self {
            LevyTail::PureStable => -alpha * y,
            LevyTail::LogCorrected => -alpha * y + 2.0 * (-y).exp().ln_1p().ln(),
        }
    }

    /// `d/dy log H(e^y)`.
    fn log_slope(self, alpha: f64, y: f64) -> f64 {
        match self {
            LevyTail::PureStable => -alpha,
            LevyTail::LogCorrected => {
                let l = (-y).exp().ln_1p();
                // d/dy log(log(1 + e^{-y})) = -1 / ((1 + e^{y}) log(1 + e^{-y}))
                -alpha - 2.0 / ((1.0 + y.exp()) * l)
            }
        }
    }

    /// Mean of the jumps below `a`, `∫_0^a x ν(dx) = ∫_0^a (H(x) - H(a)) dx`, by Simpson's rule
    /// after `x = a e^{-s}`.
    pub fn small_jump_mean(self, alpha: f64, a: f64) -> f64 {
        let ha = self.eval(alpha, a);
        let f = |s: f64| (self.eval(alpha, a * (-s).exp()) - ha) * a * (-s).exp();
        let s_max = 60.0 / (1.0 - alpha);
        let m = ((s_max / 0.005).ceil() as usize).next_multiple_of(2);
        let ds = s_max / m as f64;
        let mut sum = f(0.0) + f(s_max);
        for k in 1..m {
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * ds);
        }
        sum * ds / 3.0
    }

    /// Solves `H(x) = level` for `x >= floor` by safeguarded Newton on `log H(e^y)`.
    pub fn invert(self, alpha: f64, level: f64, floor: f64) -> Result<f64, DimensionError> {
        let target = level.ln();
        let mut lo = floor.ln();
        if !(self.log_eval(alpha, lo) >= target) {
            return Err(DimensionError::InversionFailure(level));
        }
        let mut hi = lo + 1.0;
        while self.log_eval(alpha, hi) > target {
            hi = lo + 2.0 * (hi - lo);
            if hi > 700.0 {
                return Err(DimensionError::InversionFailure(level));
            }
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.log_eval(alpha, y) - target;
            if g.abs() < 1e-14 {
                return Ok(y.exp());
            }
            if g > 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let newton = y - g / self.log_slope(alpha, y);
            y = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-14 * (1.0 + y.abs()) {
                break;
            }
        }
        Ok(y.exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorSample {
    /// Left and right limits at every jump plus the endpoints.
    pub range: PointSet,
    pub jump_count: usize,
    /// Compensating drift for the jumps below the floor.
    pub drift: f64,
    /// `t_horizon · H(jump_floor)`, the mean jump count.
    pub expected_jumps: f64,
}

/// Samples the subordinator with Lévy tail `H` on `[0, t_horizon]`: jumps of size `>= jump_floor`
/// from a Poisson point process (sizes by inverting `H`), smaller jumps replaced by their mean drift.
pub fn subordinator_range(
    alpha: f64,
    t_horizon: f64,
    jump_floor: f64,
    seed: u64,
    tail: LevyTail,
) -> Result<SubordinatorSample, DimensionError> {
    subordinator_replicate(alpha, t_horizon, jump_floor, seed, 0, tail)
}

pub fn subordinator_replicate(
    alpha: f64,
    t_horizon: f64,
    jump_floor: f64,
    seed: u64,
    replicate_id: u64,
    tail: LevyTail,
) -> Result<SubordinatorSample, DimensionError> {
    if !(alpha > 0.0 && alpha < 1.0) || !(t_horizon > 0.0) || !(jump_floor > 0.0) {
        return Err(DimensionError::InvalidParameter(format!(
            "alpha {alpha}, horizon {t_horizon}, floor {jump_floor}"
        )));
    }
    let mut rng = replicate_rng(seed, replicate_id);
    let h_floor = tail.eval(alpha, jump_floor);
    let expected = t_horizon * h_floor;
    let count = Poisson::new(expected)
        .map_err(|e| DimensionError::InvalidParameter(e.to_string()))?
        .sample(&mut rng) as usize;
    let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(count);
    for _ in 0..count {
        let time = t_horizon * rng.random::<f64>();
        // 1 - U lies in (0, 1], so the level never exceeds H(floor)
        let level = h_floor * (1.0 - rng.random::<f64>());
        jumps.push((time, tail.invert(alpha, level, jump_floor)?));
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let drift = tail.small_jump_mean(alpha, jump_floor);
    let mut points = Vec::with_capacity(2 * count + 2);
    points.push(0.0);
    let mut level = 0.0;
    let mut last_time = 0.0;
    for &(time, size) in &jumps {
        level += drift * (time - last_time);
        points.push(level);
        level += size;
        points.push(level);
        last_time = time;
    }
    points.push(level + drift * (t_horizon - last_time));
    Ok(SubordinatorSample {
        range: PointSet::new(points, format!("subordinator alpha {alpha} floor {jump_floor} seed {seed}"))?,
        jump_count: count,
        drift,
        expected_jumps: expected,
    })
}
