//! Critical binary branching Brownian particles of mass `1/N`, branching at rate `N`.
//!
//! Only particles alive at the final time matter for every statistic here, so the default sampler
//! draws the reduced tree directly. A single particle's family survives to `t` with probability
//! `1/(1 + bt)`, `b = N/2`, and conditioned on survival the lineages with descendants alive at `t`
//! form a pure-birth tree whose lineages split at rate `b / (1 + b(t - s))` at time `s`. Brownian
//! displacements are Gaussian along the branches of that tree. The event-by-event simulator
//! [`simulate_full`] samples the same law and is kept as a cross-check.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::stats::{linear_fit, mean_and_se, quantile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParticleError {
    #[error("population exceeded the cap of {cap} particles")]
    PopulationOverflow { cap: usize },
    #[error("cannot parse initial measure {0:?}; expected \"delta:x[:mass]\" or \"lebesgue:[a,b]:mass\"")]
    BadMeasure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("level a = {a} has only {hits} hits (need {min})")]
    TooFewHits { a: f64, hits: usize, min: usize },
    #[error("only {found} increment pairs in class {class} at lag {lag} (need {min})")]
    InsufficientPoints { class: &'static str, lag: usize, found: usize, min: usize },
}

/// Finite initial measure as weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialMeasure {
    pub atoms: Vec<(f64, f64)>,
    /// Original description, kept for output metadata.
    pub label: String,
}

impl InitialMeasure {
    pub fn delta(x: f64, mass: f64) -> Self {
        Self { atoms: vec![(x, mass)], label: format!("delta:{x}:{mass}") }
    }

    /// Mass spread uniformly over `[a, b]`; the particles of the initial cloud sit at the midpoints
    /// of an even partition.
    pub fn lebesgue(a: f64, b: f64, mass: f64) -> Self {
        Self { atoms: vec![(a, mass), (b, 0.0)], label: format!("lebesgue:[{a},{b}]:{mass}") }
    }

    pub fn total_mass(&self) -> f64 {
        if self.is_interval() {
            self.atoms[0].1
        } else {
            self.atoms.iter().map(|a| a.1).sum()
        }
    }

    fn is_interval(&self) -> bool {
        self.label.starts_with("lebesgue:")
    }

    /// Initial particle positions for `n` particles per unit mass (`⌈n·mass⌉` per atom).
    pub fn particles(&self, n: usize) -> Vec<f64> {
        if self.is_interval() {
            let (a, mass) = self.atoms[0];
            let b = self.atoms[1].0;
            let k = (n as f64 * mass).ceil() as usize;
            return (0..k).map(|i| a + (b - a) * (i as f64 + 0.5) / k as f64).collect();
        }
        self.atoms
            .iter()
            .flat_map(|&(x, m)| std::iter::repeat_n(x, (n as f64 * m).ceil() as usize))
            .collect()
    }
}

impl FromStr for InitialMeasure {
    type Err = ParticleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParticleError::BadMeasure(s.to_string());
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        if let Some(rest) = s.strip_prefix("delta:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let (x, m) = match parts.as_slice() {
                [x] => (num(x)?, 1.0),
                [x, m] => (num(x)?, num(m)?),
                _ => return Err(bad()),
            };
            if !(m >= 0.0) || !x.is_finite() {
                return Err(bad());
            }
            let mut d = Self::delta(x, m);
            d.label = s.to_string();
            return Ok(d);
        }
        if let Some(rest) = s.strip_prefix("lebesgue:[") {
            let (interval, mass) = rest.split_once("]:").ok_or_else(bad)?;
            let (a, b) = interval.split_once(',').ok_or_else(bad)?;
            let (a, b, m) = (num(a)?, num(b)?, num(mass)?);
            if !(b > a) || !(m >= 0.0) {
                return Err(bad());
            }
            let mut l = Self::lebesgue(a, b, m);
            l.label = s.to_string();
            return Ok(l);
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Particles per unit mass; branching rate.
    pub n: usize,
    /// Multiplies the branching rate (0 disables branching).
    pub rate_multiplier: f64,
    /// Maximum number of particles; `None` means `100·N·mass + 10^4`.
    pub population_cap: Option<usize>,
}

impl SimConfig {
    pub fn new(n: usize) -> Self {
        Self { n, rate_multiplier: 1.0, population_cap: None }
    }

    fn cap(&self, mass: f64) -> usize {
        self.population_cap.unwrap_or_else(|| (100.0 * self.n as f64 * mass) as usize + 10_000)
    }

    fn validate(&self, t: f64) -> Result<(), ParticleError> {
        if self.n == 0 || !(t > 0.0) || !(self.rate_multiplier >= 0.0) {
            return Err(ParticleError::InvalidParameter(format!(
                "N = {}, t = {t}, rate multiplier = {}",
                self.n, self.rate_multiplier
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub positions: Vec<f64>,
    pub particle_mass: f64,
    pub time: f64,
    pub rng_seed: u64,
    pub replicate_id: u64,
    /// Initial particles whose families are alive at `time`.
    pub surviving_founders: usize,
}

impl ParticleCloud {
    pub fn total_mass(&self) -> f64 {
        self.positions.len() as f64 * self.particle_mass
    }

    pub fn is_extinct(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Independent stream for one replicate.
pub fn replicate_rng(seed: u64, replicate_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate_id);
    rng
}

/// Replicate 0 of the particle system at time `t`.
pub fn simulate(x0: &InitialMeasure, t: f64, n: usize, seed: u64) -> Result<ParticleCloud, ParticleError> {
    simulate_replicate(x0, t, &SimConfig::new(n), seed, 0)
}

/// Reduced-tree sample of the particle positions at time `t`.
pub fn simulate_replicate(
    x0: &InitialMeasure,
    t: f64,
    config: &SimConfig,
    seed: u64,
    replicate_id: u64,
) -> Result<ParticleCloud, ParticleError> {
    config.validate(t)?;
    let mut rng = replicate_rng(seed, replicate_id);
    let b = 0.5 * config.n as f64 * config.rate_multiplier;
    let survive = 1.0 / (1.0 + b * t);
    let cap = config.cap(x0.total_mass());
    let start = x0.particles(config.n);

    // founders grouped by position so a single binomial draw thins each group
    let mut founders = Vec::new();
    let mut i = 0;
    while i < start.len() {
        let mut j = i;
        while j < start.len() && start[j] == start[i] {
            j += 1;
        }
        let k = Binomial::new((j - i) as u64, survive)
            .map_err(|e| ParticleError::InvalidParameter(e.to_string()))?
            .sample(&mut rng);
        founders.extend(std::iter::repeat_n(start[i], k as usize));
        i = j;
    }

    let mut positions = Vec::new();
    let mut stack: Vec<(f64, f64)> = Vec::new();
    for &x in &founders {
        stack.push((0.0, x));
        while let Some((s, x)) = stack.pop() {
            let u: f64 = rng.random();
            let wait = if b > 0.0 { (1.0 + b * (t - s)) * u / b } else { f64::INFINITY };
            let z: f64 = rng.sample(StandardNormal);
            if s + wait >= t {
                positions.push(x + (t - s).sqrt() * z);
                if positions.len() > cap {
                    return Err(ParticleError::PopulationOverflow { cap });
                }
            } else {
                let y = x + wait.sqrt() * z;
                stack.push((s + wait, y));
                stack.push((s + wait, y));
            }
        }
    }
    Ok(ParticleCloud {
        positions,
        particle_mass: 1.0 / config.n as f64,
        time: t,
        rng_seed: seed,
        replicate_id,
        surviving_founders: founders.len(),
    })
}

/// Branching events seen by [`simulate_full`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BranchingStats {
    pub births: u64,
    pub deaths: u64,
}

impl BranchingStats {
    /// Mean offspring number per event (2 per birth, 0 per death).
    pub fn mean_offspring(&self) -> f64 {
        2.0 * self.births as f64 / (self.births + self.deaths) as f64
    }
}

/// Event-driven simulation of every particle: exponential clocks of total rate `N·count`, at each
/// ring a uniformly chosen particle dies or splits with probability 1/2; positions are advanced by
/// exact Gaussian increments only when a particle is touched.
pub fn simulate_full(
    x0: &InitialMeasure,
    t: f64,
    config: &SimConfig,
    seed: u64,
    replicate_id: u64,
) -> Result<(ParticleCloud, BranchingStats), ParticleError> {
    config.validate(t)?;
    let mut rng = replicate_rng(seed, replicate_id);
    let rate = config.n as f64 * config.rate_multiplier;
    let cap = config.cap(x0.total_mass());
    let initial = x0.particles(config.n);
    let founders = initial.len();
    let mut particles: Vec<(f64, f64)> = initial.into_iter().map(|x| (x, 0.0)).collect();
    let mut stats = BranchingStats::default();
    let mut now = 0.0;
    while !particles.is_empty() && rate > 0.0 {
        let total = rate * particles.len() as f64;
        now += Exp::new(total).expect("positive rate").sample(&mut rng);
        if now >= t {
            break;
        }
        let i = rng.random_range(0..particles.len());
        let (x, last) = particles[i];
        let z: f64 = rng.sample(StandardNormal);
        let x = x + (now - last).sqrt() * z;
        if rng.random::<bool>() {
            particles[i] = (x, now);
            particles.push((x, now));
            stats.births += 1;
            if particles.len() > cap {
                return Err(ParticleError::PopulationOverflow { cap });
            }
        } else {
            particles.swap_remove(i);
            stats.deaths += 1;
        }
    }
    let positions = particles
        .iter()
        .map(|&(x, last)| {
            let z: f64 = rng.sample(StandardNormal);
            x + (t - last).sqrt() * z
        })
        .collect();
    Ok((
        ParticleCloud {
            positions,
            particle_mass: 1.0 / config.n as f64,
            time: t,
            rng_seed: seed,
            replicate_id,
            surviving_founders: founders,
        },
        stats,
    ))
}

/// Runs `reps` independent replicates in parallel and maps each cloud through `f`; results come
/// back in replicate order, so they do not depend on the thread count.
pub fn run_replicates<T: Send>(
    x0: &InitialMeasure,
    t: f64,
    config: &SimConfig,
    seed: u64,
    reps: usize,
    f: impl Fn(ParticleCloud) -> T + Sync,
) -> Result<Vec<T>, ParticleError> {
    (0..reps as u64)
        .into_par_iter()
        .map(|id| simulate_replicate(x0, t, config, seed, id).map(&f))
        .collect()
}

/// Histogram density: bin `k` covers `[(k - 1/2) w, (k + 1/2) w)` and carries `counts[k - first]`
/// particles of mass `particle_mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub w: f64,
    pub first_bin: i64,
    pub counts: Vec<u64>,
    pub particle_mass: f64,
    pub n: usize,
    pub replicate_id: u64,
}

/// Default bandwidth `N^{-1/3} √t`.
pub fn default_bandwidth(n: usize, t: f64) -> f64 {
    (n as f64).powf(-1.0 / 3.0) * t.sqrt()
}

#[inline]
fn bin_of(x: f64, w: f64) -> i64 {
    (x / w + 0.5).floor() as i64
}

impl DensityField {
    pub fn from_cloud(cloud: &ParticleCloud, w: f64) -> Self {
        let n = (1.0 / cloud.particle_mass).round() as usize;
        if cloud.positions.is_empty() {
            return Self { w, first_bin: 0, counts: Vec::new(), particle_mass: cloud.particle_mass, n, replicate_id: cloud.replicate_id };
        }
        let bins: Vec<i64> = cloud.positions.iter().map(|&x| bin_of(x, w)).collect();
        let lo = *bins.iter().min().unwrap();
        let hi = *bins.iter().max().unwrap();
        let mut counts = vec![0u64; (hi - lo + 1) as usize];
        for b in bins {
            counts[(b - lo) as usize] += 1;
        }
        Self { w, first_bin: lo, counts, particle_mass: cloud.particle_mass, n, replicate_id: cloud.replicate_id }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn center(&self, i: usize) -> f64 {
        (self.first_bin + i as i64) as f64 * self.w
    }

    pub fn density(&self, i: usize) -> f64 {
        self.counts[i] as f64 * self.particle_mass / self.w
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.density(i)).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 * self.particle_mass
    }

    /// `X̂(t, x)` for the bin containing `x`.
    pub fn at(&self, x: f64) -> f64 {
        let k = bin_of(x, self.w) - self.first_bin;
        if k < 0 || k as usize >= self.len() {
            0.0
        } else {
            self.density(k as usize)
        }
    }
}

/// `X̂(t, 0)` straight from the positions (bin `[-w/2, w/2)`).
pub fn density_at_origin(cloud: &ParticleCloud, w: f64) -> f64 {
    let count = cloud.positions.iter().filter(|&&x| bin_of(x, w) == 0).count();
    count as f64 * cloud.particle_mass / w
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionReport {
    pub t: f64,
    pub fraction: f64,
    pub standard_error: f64,
    /// `e^{-2 m/t}` for initial mass `m`.
    pub limit: f64,
    /// `(1 - 1/(1 + Nt/2))^{⌈N m⌉}`, exact for the particle system.
    pub finite_n: f64,
}

pub fn extinction_experiment(
    x0: &InitialMeasure,
    t: f64,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<ExtinctionReport, ParticleError> {
    let extinct = run_replicates(x0, t, &SimConfig::new(n), seed, reps, |c| if c.is_extinct() { 1.0 } else { 0.0 })?;
    let (fraction, se) = mean_and_se(&extinct);
    let b = 0.5 * n as f64;
    let count = x0.particles(n).len() as f64;
    Ok(ExtinctionReport {
        t,
        fraction,
        standard_error: se,
        limit: (-2.0 * x0.total_mass() / t).exp(),
        finite_n: (b * t / (1.0 + b * t)).powf(count),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceReport {
    pub lambda: f64,
    pub bandwidth: f64,
    /// Mean of `exp(-λ X̂(t, 0))` over replicates.
    pub mc_value: f64,
    pub mc_standard_error: f64,
    /// Exact dual for the particle system: `Π_atoms (1 - v(t, -x_i)/N)^{⌈N m_i⌉}` where `v` solves the
    /// PDE from `N(1 - e^{-λ 1_bin / (N w)})`.
    pub pde_value: f64,
    /// Superprocess limit of the same dual, `exp(-∫ v(t, -y) dX_0(y))` with data `(λ/w) 1_bin`.
    pub pde_value_limit: f64,
    /// The delta-data value `exp(-∫ V^λ(t, -y) dX_0(y))` that the bin dual approaches as `w → 0`.
    pub pde_value_delta: f64,
    pub z_score: f64,
}

/// Compares the Monte Carlo Laplace functional of the bin density at the origin with its PDE dual.
#[allow(clippy::too_many_arguments)]
pub fn laplace_check(
    x0: &InitialMeasure,
    t: f64,
    lambda: f64,
    n: usize,
    reps: usize,
    seed: u64,
    bandwidth: Option<f64>,
    pde: &crate::pde::PhysicalParams,
) -> Result<LaplaceReport, ParticleError> {
    let w = bandwidth.unwrap_or_else(|| default_bandwidth(n, t));
    let pde_err = |e: crate::pde::PdeError| ParticleError::InvalidParameter(e.to_string());
    let samples = run_replicates(x0, t, &SimConfig::new(n), seed, reps, |c| (-lambda * density_at_origin(&c, w)).exp())?;
    let (mc_value, mc_se) = mean_and_se(&samples);
    if lambda == 0.0 {
        return Ok(LaplaceReport {
            lambda,
            bandwidth: w,
            mc_value,
            mc_standard_error: mc_se,
            pde_value: 1.0,
            pde_value_limit: 1.0,
            pde_value_delta: 1.0,
            z_score: 0.0,
        });
    }
    let nf = n as f64;
    let b_finite = nf * (-(-lambda / (nf * w)).exp_m1());
    let max_shift = x0.atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max);
    let params = crate::pde::PhysicalParams {
        half_width: Some(pde.half_width.unwrap_or(10.0 * t.sqrt()).max(10.0) + max_shift),
        ..*pde
    };
    // bin [-w/2, w/2) is the indicator of [0, w] shifted by -w/2
    let v_finite = crate::pde::tilde_v_with(b_finite, w, t, &params).map_err(pde_err)?;
    let v_limit = crate::pde::tilde_v_with(lambda / w, w, t, &params).map_err(pde_err)?;
    let v_delta = crate::pde::v_lambda(lambda, t, None).map_err(pde_err)?;
    let mut log_finite = 0.0;
    let mut log_limit = 0.0;
    let mut log_delta = 0.0;
    let starts = x0.particles(n);
    for &y in &starts {
        log_finite += (1.0 - v_finite.at(0.5 * w - y) / nf).ln();
    }
    let atoms: Vec<(f64, f64)> = if x0.is_interval() {
        starts.iter().map(|&y| (y, 1.0 / nf)).collect()
    } else {
        x0.atoms.clone()
    };
    for &(y, m) in &atoms {
        log_limit -= m * v_limit.at(0.5 * w - y);
        log_delta -= m * v_delta.at(-y);
    }
    let pde_value = log_finite.exp();
    Ok(LaplaceReport {
        lambda,
        bandwidth: w,
        mc_value,
        mc_standard_error: mc_se,
        pde_value,
        pde_value_limit: log_limit.exp(),
        pde_value_delta: log_delta.exp(),
        z_score: if mc_se > 0.0 { (mc_value - pde_value) / mc_se } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub a_ladder: Vec<f64>,
    pub bandwidth: f64,
    pub replicates: usize,
    /// Replicates with `0 < X̂(t, 0) <= a`.
    pub hits: Vec<usize>,
    pub probabilities: Vec<f64>,
    /// `log P` against `log a`.
    pub slope: f64,
    pub intercept: f64,
    /// Percentile bootstrap interval for the slope.
    pub slope_ci: (f64, f64),
}

/// Minimum number of hits per level for [`tail_from_samples`].
pub const MIN_TAIL_HITS: usize = 100;

/// Left-tail probabilities of `X̂(t, 0)` from fresh replicates.
#[allow(clippy::too_many_arguments)]
pub fn left_tail(
    x0: &InitialMeasure,
    t: f64,
    a_ladder: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
    bandwidth: Option<f64>,
    bootstrap: usize,
) -> Result<TailReport, ParticleError> {
    let w = bandwidth.unwrap_or_else(|| default_bandwidth(n, t));
    let samples = run_replicates(x0, t, &SimConfig::new(n), seed, reps, |c| density_at_origin(&c, w))?;
    tail_from_samples(&samples, a_ladder, w, seed, bootstrap)
}

/// Tail fit from precomputed `X̂(t, 0)` samples.
pub fn tail_from_samples(
    samples: &[f64],
    a_ladder: &[f64],
    bandwidth: f64,
    seed: u64,
    bootstrap: usize,
) -> Result<TailReport, ParticleError> {
    if a_ladder.len() < 2 || a_ladder.windows(2).any(|p| !(p[1] > p[0])) || a_ladder[0] <= 0.0 {
        return Err(ParticleError::InvalidParameter("a ladder must be positive and increasing".into()));
    }
    let mut positive: Vec<f64> = samples.iter().copied().filter(|&v| v > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    let hits: Vec<usize> = a_ladder.iter().map(|&a| positive.partition_point(|&v| v <= a)).collect();
    for (&a, &h) in a_ladder.iter().zip(&hits) {
        if h < MIN_TAIL_HITS {
            return Err(ParticleError::TooFewHits { a, hits: h, min: MIN_TAIL_HITS });
        }
    }
    let reps = samples.len();
    let log_a: Vec<f64> = a_ladder.iter().map(|a| a.ln()).collect();
    let fit_of = |hits: &[usize]| {
        let log_p: Vec<f64> = hits.iter().map(|&h| (h as f64 / reps as f64).ln()).collect();
        linear_fit(&log_a, &log_p).expect("distinct levels")
    };
    let fit = fit_of(&hits);

    // bootstrap over replicates: resample, recount
    let mut rng = replicate_rng(seed, u64::MAX);
    let mut slopes = Vec::with_capacity(bootstrap);
    let mut resampled = Vec::with_capacity(reps);
    for _ in 0..bootstrap {
        resampled.clear();
        resampled.extend((0..reps).map(|_| samples[rng.random_range(0..reps)]));
        let bh: Vec<usize> =
            a_ladder.iter().map(|&a| resampled.iter().filter(|&&v| v > 0.0 && v <= a).count().max(1)).collect();
        slopes.push(fit_of(&bh).slope);
    }
    slopes.sort_by(f64::total_cmp);
    let slope_ci = if slopes.is_empty() { (fit.slope, fit.slope) } else { (quantile(&slopes, 0.025), quantile(&slopes, 0.975)) };
    Ok(TailReport {
        a_ladder: a_ladder.to_vec(),
        bandwidth,
        replicates: reps,
        probabilities: hits.iter().map(|&h| h as f64 / reps as f64).collect(),
        hits,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci,
    })
}

/// Thresholded proxy for the boundary of the zero set.
#[derive(Debug, Clone, PartialEq)]
pub struct BzPoints {
    pub points: Vec<f64>,
    pub eta: f64,
    pub delta_nbhd: f64,
    pub w: f64,
    pub n: usize,
}

/// Default threshold: half of one particle's bin density, `1/(2 N w)`.
pub fn default_eta(field: &DensityField) -> f64 {
    0.5 * field.particle_mass / field.w
}

/// Bin centres with density `<= eta` that have a bin with positive mass within `delta_nbhd`
/// (default `w`, i.e. adjacent bins). Empty bins just outside the occupied range are included.
pub fn extract_bz(field: &DensityField, eta: Option<f64>, delta_nbhd: Option<f64>) -> BzPoints {
    let eta = eta.unwrap_or_else(|| default_eta(field));
    let delta = delta_nbhd.unwrap_or(field.w);
    let mut out = BzPoints { points: Vec::new(), eta, delta_nbhd: delta, w: field.w, n: field.n };
    if field.is_empty() {
        return out;
    }
    let reach = (delta / field.w + 1e-9).floor() as i64;
    let len = field.len() as i64;
    let occupied = |k: i64| k >= 0 && k < len && field.counts[k as usize] > 0;
    for k in -reach..len + reach {
        let density = if k >= 0 && k < len { field.density(k as usize) } else { 0.0 };
        if density > eta {
            continue;
        }
        if (k - reach..=k + reach).any(|j| j != k && occupied(j)) {
            out.points.push((field.first_bin + k) as f64 * field.w);
        }
    }
    out
}

/// Noise-corrected increment regression of the density.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderReport {
    pub lags: Vec<usize>,
    pub bulk_ms: Vec<f64>,
    pub near_zero_ms: Vec<f64>,
    pub bulk_pairs: Vec<usize>,
    pub near_zero_pairs: Vec<usize>,
    pub bulk_exponent: f64,
    pub near_zero_exponent: f64,
}

/// Minimum number of increment pairs per lag and class in [`holder_scan`].
pub const MIN_HOLDER_PAIRS: usize = 30;

/// For each lag `k` (in bins) the mean of `(X̂_{i+k} - X̂_i)^2 - m (X̂_i + X̂_{i+k}) / w`, the second
/// term removing the counting noise of the histogram, over two classes of base points: bulk
/// (`X̂_i` above the median of the positive densities of its field) and near-zero (bin `i` is in the
/// boundary proxy or adjacent to it). The exponent is half the log-log slope in `h = k w`.
pub fn holder_scan(fields: &[DensityField], lags: &[usize], eta: Option<f64>) -> Result<HolderReport, ParticleError> {
    if lags.len() < 2 {
        return Err(ParticleError::InvalidParameter("need at least two lags".into()));
    }
    let mut bulk_sum = vec![0.0; lags.len()];
    let mut near_sum = vec![0.0; lags.len()];
    let mut bulk_pairs = vec![0usize; lags.len()];
    let mut near_pairs = vec![0usize; lags.len()];
    let mut w = f64::NAN;
    for field in fields {
        if field.is_empty() {
            continue;
        }
        w = field.w;
        let d = field.densities();
        let mut pos: Vec<f64> = d.iter().copied().filter(|&v| v > 0.0).collect();
        if pos.is_empty() {
            continue;
        }
        pos.sort_by(f64::total_cmp);
        let median = quantile(&pos, 0.5);
        let bz = extract_bz(field, eta, None);
        let near: Vec<bool> = (0..d.len())
            .map(|i| {
                let x = field.center(i);
                bz.points.iter().any(|&z| (z - x).abs() <= 1.5 * field.w)
            })
            .collect();
        let noise = field.particle_mass / field.w;
        for (li, &k) in lags.iter().enumerate() {
            for i in 0..d.len().saturating_sub(k) {
                let inc = (d[i + k] - d[i]).powi(2) - noise * (d[i] + d[i + k]);
                if d[i] > median {
                    bulk_sum[li] += inc;
                    bulk_pairs[li] += 1;
                }
                if near[i] {
                    near_sum[li] += inc;
                    near_pairs[li] += 1;
                }
            }
        }
    }
    for (li, &k) in lags.iter().enumerate() {
        for (class, count) in [("bulk", bulk_pairs[li]), ("near-zero", near_pairs[li])] {
            if count < MIN_HOLDER_PAIRS {
                return Err(ParticleError::InsufficientPoints { class, lag: k, found: count, min: MIN_HOLDER_PAIRS });
            }
        }
    }
    let bulk_ms: Vec<f64> = bulk_sum.iter().zip(&bulk_pairs).map(|(s, c)| s / *c as f64).collect();
    let near_ms: Vec<f64> = near_sum.iter().zip(&near_pairs).map(|(s, c)| s / *c as f64).collect();
    let log_h: Vec<f64> = lags.iter().map(|&k| (k as f64 * w).ln()).collect();
    let exponent = |ms: &[f64]| {
        let y: Vec<f64> = ms.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
        0.5 * linear_fit(&log_h, &y).map_or(f64::NAN, |f| f.slope)
    };
    Ok(HolderReport {
        lags: lags.to_vec(),
        bulk_exponent: exponent(&bulk_ms),
        near_zero_exponent: exponent(&near_ms),
        bulk_ms,
        near_zero_ms: near_ms,
        bulk_pairs,
        near_zero_pairs: near_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_measures() {
        let d: InitialMeasure = "delta:0".parse().unwrap();
        assert_eq!(d.atoms, vec![(0.0, 1.0)]);
        assert_eq!(d.particles(10), vec![0.0; 10]);
        let d: InitialMeasure = "delta:1.5:0.25".parse().unwrap();
        assert_eq!(d.particles(8).len(), 2);
        let l: InitialMeasure = "lebesgue:[-1,1]:2".parse().unwrap();
        assert_eq!(l.total_mass(), 2.0);
        let p = l.particles(5);
        assert_eq!(p.len(), 10);
        assert!((p[0] + 0.9).abs() < 1e-12 && (p[9] - 0.9).abs() < 1e-12);
        for bad in ["delta", "delta:x", "lebesgue:[1,0]:1", "gauss:0", "lebesgue:[0,1]"] {
            assert!(bad.parse::<InitialMeasure>().is_err(), "{bad}");
        }
    }

    #[test]
    fn deterministic_per_seed_and_replicate() {
        let x0 = InitialMeasure::delta(0.0, 1.0);
        let c = SimConfig::new(200);
        let a = simulate_replicate(&x0, 1.0, &c, 7, 3).unwrap();
        let b = simulate_replicate(&x0, 1.0, &c, 7, 3).unwrap();
        assert_eq!(a, b);
        let other = simulate_replicate(&x0, 1.0, &c, 7, 4).unwrap();
        assert_ne!(a.positions, other.positions);
    }

    #[test]
    fn unbranched_particle_is_brownian() {
        let x0 = InitialMeasure::delta(0.0, 1.0);
        let c = SimConfig { n: 1, rate_multiplier: 0.0, population_cap: None };
        let xs = run_replicates(&x0, 2.0, &c, 11, 20_000, |cl| cl.positions[0]).unwrap();
        let (m, _) = mean_and_se(&xs);
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        // standard error of the sample variance is about var * sqrt(2/n) = 0.02
        assert!((var - 2.0).abs() < 0.06, "{var}");
        let (full, stats) = simulate_full(&x0, 2.0, &c, 11, 0).unwrap();
        assert_eq!(full.positions.len(), 1);
        assert_eq!(stats, BranchingStats::default());
    }

    #[test]
    fn mass_is_conserved_in_mean() {
        let x0 = InitialMeasure::delta(0.0, 1.0);
        let masses = run_replicates(&x0, 1.0, &SimConfig::new(100), 5, 20_000, |c| c.total_mass()).unwrap();
        let (m, se) = mean_and_se(&masses);
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn full_simulator_agrees_with_reduced_tree() {
        let x0 = InitialMeasure::delta(0.0, 1.0);
        let c = SimConfig::new(20);
        let reps = 4000;
        let mut births = 0;
        let mut events = 0;
        let mut full_ext = Vec::new();
        let mut full_var = Vec::new();
        for id in 0..reps {
            let (cloud, s) = simulate_full(&x0, 1.0, &c, 9, id).unwrap();
            births += s.births;
            events += s.births + s.deaths;
            full_ext.push(if cloud.is_extinct() { 1.0 } else { 0.0 });
            full_var.extend(cloud.positions.iter().map(|x| x * x));
        }
        let p = births as f64 / events as f64;
        let se = (0.25 / events as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * se);
        let stats = BranchingStats { births, deaths: events - births };
        assert!((stats.mean_offspring() - 1.0).abs() < 6.0 * se);

        let reduced = run_replicates(&x0, 1.0, &c, 9, reps as usize, |c| c).unwrap();
        let red_ext: Vec<f64> = reduced.iter().map(|c| if c.is_extinct() { 1.0 } else { 0.0 }).collect();
        let (fa, sa) = mean_and_se(&full_ext);
        let (fb, sb) = mean_and_se(&red_ext);
        assert!((fa - fb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "{fa} vs {fb}");
        // second moment of positions: each particle alive at t has variance t
        let red_var: Vec<f64> = reduced.iter().flat_map(|c| c.positions.iter().map(|x| x * x).collect::<Vec<_>>()).collect();
        let (va, _) = mean_and_se(&full_var);
        let (vb, _) = mean_and_se(&red_var);
        assert!((va - 1.0).abs() < 0.05 && (vb - 1.0).abs() < 0.05, "{va} {vb}");
    }

    #[test]
    fn overflow_is_reported() {
        let x0 = InitialMeasure::delta(0.0, 1.0);
        let c = SimConfig { n: 100, rate_multiplier: 1.0, population_cap: Some(5) };
        let r: Result<Vec<_>, _> = (0..50).map(|id| simulate_replicate(&x0, 1.0, &c, 1, id)).collect();
        assert_eq!(r.unwrap_err(), ParticleError::PopulationOverflow { cap: 5 });
    }

    #[test]
    fn density_integrates_to_cloud_mass() {
        let x0 = InitialMeasure::delta(0.0, 1.0);
        for id in 0..20 {
            let c = simulate_replicate(&x0, 1.0, &SimConfig::new(300), 2, id).unwrap();
            let f = DensityField::from_cloud(&c, 0.07);
            assert_eq!(f.counts.iter().sum::<u64>() as usize, c.positions.len());
            let integral: f64 = f.densities().iter().map(|d| d * f.w).sum();
            assert!((integral - c.total_mass()).abs() < 1e-12);
            assert_eq!(f.at(0.0), density_at_origin(&c, 0.07));
        }
    }

    fn field(counts: Vec<u64>, mass: f64) -> DensityField {
        DensityField { w: 0.1, first_bin: -5, counts, particle_mass: mass, n: (1.0 / mass) as usize, replicate_id: 0 }
    }

    #[test]
    fn bz_trivial_cases() {
        let empty = field(Vec::new(), 0.01);
        assert!(extract_bz(&empty, None, None).points.is_empty());
        let flat = field(vec![5; 11], 0.01);
        let bz = extract_bz(&flat, Some(1e-9), Some(0.0));
        assert!(bz.points.is_empty());
        // default neighbourhood adds the two empty bins just outside the support
        let bz = extract_bz(&flat, None, None);
        assert_eq!(bz.points.len(), 2);
        assert!((bz.points[0] + 0.6).abs() < 1e-12 && (bz.points[1] - 0.6).abs() < 1e-12);
        let gappy = field(vec![3, 0, 0, 0, 2], 0.01);
        let bz = extract_bz(&gappy, None, None);
        let expect = [-0.6, -0.4, -0.2, 0.0];
        assert_eq!(bz.points.len(), expect.len());
        for (a, b) in bz.points.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_field_is_lipschitz() {
        // max(0, sin 5x) on [-6, 6]: Lipschitz, with many zero edges; almost noiseless (tiny particle mass)
        let m = 1e-9;
        let w = 0.005;
        let counts: Vec<u64> = (-1200..=1200)
            .map(|k| {
                let x = k as f64 * w;
                ((5.0 * x).sin().max(0.0) * w / m).round() as u64
            })
            .collect();
        let f = DensityField { w, first_bin: -1200, counts, particle_mass: m, n: 1_000_000_000, replicate_id: 0 };
        let r = holder_scan(&[f], &[2, 4, 8, 16], None).unwrap();
        assert!((r.bulk_exponent - 1.0).abs() < 0.05, "{r:?}");
        assert!((r.near_zero_exponent - 1.0).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn holder_needs_points() {
        let f = field(vec![1, 2, 3], 0.01);
        assert!(matches!(holder_scan(&[f], &[2, 4], None), Err(ParticleError::InsufficientPoints { .. })));
    }

    #[test]
    fn tail_fit_on_power_law_samples() {
        // X with P(X <= a) = a^0.7 on (0, 1]
        let mut rng = replicate_rng(3, 0);
        let samples: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>().powf(1.0 / 0.7)).collect();
        let r = tail_from_samples(&samples, &[0.01, 0.03, 0.1, 0.3], 0.01, 3, 50).unwrap();
        assert!((r.slope - 0.7).abs() < 0.03, "{r:?}");
        assert!(r.slope_ci.0 < r.slope && r.slope < r.slope_ci.1);
        assert!(r.probabilities.windows(2).all(|p| p[0] <= p[1]));
        assert!(matches!(
            tail_from_samples(&samples, &[1e-6, 0.1], 0.01, 3, 0),
            Err(ParticleError::TooFewHits { .. })
        ));
    }

    #[test]
    fn zero_lambda_laplace_is_one() {
        let x0 = InitialMeasure::delta(0.0, 1.0);
        let r = laplace_check(&x0, 1.0, 0.0, 50, 100, 1, None, &Default::default()).unwrap();
        assert_eq!(r.mc_value, 1.0);
        assert_eq!(r.pde_value, 1.0);
    }
}
