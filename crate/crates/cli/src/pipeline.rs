//! Experiment stages. Each stage adds tables and JSON documents to an in-memory [`Outputs`]; nothing
//! touches the disk until the whole experiment has succeeded.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use sbmlab::dimension::{
    box_dimension, cantor_points, pooled_box_dimension, riesz_energy, subordinator_range, LevyTail, PointSet,
};
use sbmlab::grid::UniformGrid;
use sbmlab::particles::{
    default_bandwidth, density_at_origin, extract_bz, holder_scan, left_tail, run_replicates, DensityField,
    InitialMeasure, SimConfig,
};
use sbmlab::pde::{rate_experiment_with, LadderParams, SelfSimilarParams};
use sbmlab::profile::{profile_identities, solve_profile_with, ProfileConfig, ProfileF};
use sbmlab::spectral::{eigensystem, variational_bounds, PhiTag, SpectralSystem};
use sbmlab::tauberian::{log_grid, lower_coeff_d1, verify_on_family, PowerLaw, TauberianError};

use crate::config::{DimensionSource, Experiment, ExperimentConfig, PhiChoice};
use crate::table::{emit_plot_data, Column, PlotKind, ResultTable};
use crate::CliError;

/// Largest point set accepted for the quadratic pair energy.
pub const MAX_ENERGY_POINTS: usize = 50_000;

/// Provenance embedded in every emitted file.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub version: String,
    pub git: String,
    pub config_hash: String,
}

impl Meta {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            git: env!("SBMLAB_GIT_DESCRIBE").into(),
            config_hash: cfg.hash(),
        }
    }

    fn json(&self) -> Value {
        json!({ "version": self.version, "git": self.git, "config_hash": self.config_hash })
    }
}

/// Files produced by a run, in creation order.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub meta: Meta,
    pub files: Vec<(String, Vec<u8>)>,
    /// Short human-readable lines for the terminal.
    pub notes: Vec<String>,
    started: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Outputs {
    pub fn new(meta: Meta) -> Self {
        Self { meta, files: Vec::new(), notes: Vec::new(), started: unix_now() }
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) {
        match self.files.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = bytes,
            None => self.files.push((name.into(), bytes)),
        }
    }

    fn table(&mut self, file: &str, table: ResultTable) {
        let table = table.meta("version", &self.meta.version).meta("git", &self.meta.git).meta("config_hash", &self.meta.config_hash);
        self.put(file, table.to_csv().into_bytes());
    }

    fn json(&mut self, file: &str, mut value: Value) {
        value["meta"] = self.meta.json();
        let mut text = serde_json::to_string_pretty(&value).expect("json serializes");
        text.push('\n');
        self.put(file, text.into_bytes());
    }

    fn text(&mut self, file: &str, body: String) {
        let header = format!("# config_hash={}\n", self.meta.config_hash);
        self.put(file, (header + &body).into_bytes());
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file into `dir` plus `manifest.json`, which alone carries timestamps.
    pub fn write_all(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        let mut listing = Vec::new();
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
            listing.push(json!({ "name": name, "bytes": bytes.len(), "sha256": hex::encode(Sha256::digest(bytes)) }));
        }
        let manifest = json!({
            "meta": self.meta.json(),
            "started_unix": self.started,
            "finished_unix": unix_now(),
            "files": listing,
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
        Ok(())
    }
}

fn module<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Module { module: name, message: e.to_string() }
}

fn parse_measure(text: &str) -> Result<InitialMeasure, CliError> {
    text.parse().map_err(|e| CliError::Config(format!("{text}: {e}")))
}

/// Shared state of one experiment: configuration, outputs and cached upstream results.
pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: Outputs,
    profile: Option<ProfileF>,
    lambda0: Option<f64>,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Self { cfg, out: Outputs::new(Meta::for_config(cfg)), profile: None, lambda0: None }
    }

    fn profile(&mut self) -> Result<&ProfileF, CliError> {
        if self.profile.is_none() {
            let p = &self.cfg.profile;
            let config = ProfileConfig { step: p.step, y_max: p.y_max, bracket_tol: p.bracket_tol, ..ProfileConfig::default() };
            self.profile = Some(solve_profile_with(&config).map_err(module("profile"))?);
        }
        Ok(self.profile.as_ref().expect("just computed"))
    }

    fn spectrum(&mut self, phi: PhiChoice) -> Result<SpectralSystem, CliError> {
        let s = self.cfg.spectrum.clone();
        let grid = UniformGrid::symmetric_interior(s.domain_l, s.grid_step);
        let tag = match phi {
            PhiChoice::Zero => PhiTag::Zero,
            PhiChoice::HalfF => PhiTag::HalfF,
            PhiChoice::FullF => PhiTag::FullF,
        };
        let profile = if phi == PhiChoice::Zero { None } else { Some(self.profile()?) };
        let sampled = tag.sample(grid, profile).map_err(module("spectrum"))?;
        let sys = eigensystem(&sampled, tag, s.n_max).map_err(module("spectrum"))?;
        if phi == PhiChoice::FullF {
            self.lambda0 = Some(sys.eigenvalues[0]);
        }
        Ok(sys)
    }

    /// `λ0` of the generator killed by `F`.
    fn lambda0(&mut self) -> Result<f64, CliError> {
        match self.lambda0 {
            Some(l) => Ok(l),
            None => Ok(self.spectrum(PhiChoice::FullF)?.eigenvalues[0]),
        }
    }

    pub fn profile_stage(&mut self) -> Result<(f64, f64), CliError> {
        let stride = self.cfg.profile.output_stride;
        let f = self.profile()?.clone();
        let id = profile_identities(&f);
        let idx: Vec<usize> = (0..f.values.len()).step_by(stride).collect();
        let table = ResultTable::new("profile")
            .meta("step", f.grid_step)
            .meta("stride", stride)
            .with_column("y", Column::Float(idx.iter().map(|&k| k as f64 * f.grid_step).collect()))
            .and_then(|t| t.with_column("f", Column::Float(idx.iter().map(|&k| f.values[k]).collect())))
            .and_then(|t| t.with_column("fprime", Column::Float(idx.iter().map(|&k| f.derivs[k]).collect())))
            .map_err(module("profile"))?;
        self.out.table("profile.csv", table);
        self.out.json(
            "profile.json",
            json!({
                "f0": f.f0,
                "c0": f.c0,
                "ode_residual_sup": f.ode_residual_sup,
                "f0_halving_delta": f.f0_halving_delta,
                "reliable_until": f.reliable_until,
                "int_f": id.int_f,
                "int_f2": id.int_f2,
                "mass_identity_rel": (id.int_f - id.int_f2).abs() / id.int_f,
                "tail_ratio": id.tail_ratio,
            }),
        );
        self.out.note(format!("profile: F(0) = {:.12}, c0 = {:.10}", f.f0, f.c0));
        Ok((f.f0, f.c0))
    }

    /// Returns `λ0` for each requested killing function.
    pub fn spectrum_stage(&mut self, phis: &[PhiChoice]) -> Result<Vec<f64>, CliError> {
        let stride = self.cfg.spectrum.output_stride;
        let mut rows_phi = Vec::new();
        let mut rows_n = Vec::new();
        let mut rows_lambda = Vec::new();
        let mut rows_mass = Vec::new();
        let mut psi = ResultTable::new("psi0");
        let mut summary = serde_json::Map::new();
        let mut lambda0s = Vec::new();
        for &phi in phis {
            let sys = self.spectrum(phi)?;
            for (n, (&l, &m)) in sys.eigenvalues.iter().zip(&sys.masses).enumerate() {
                rows_phi.push(phi.name().to_string());
                rows_n.push(n as i64);
                rows_lambda.push(l);
                rows_mass.push(m);
            }
            if psi.rows() == 0 {
                psi.push_column("x", Column::Float(sys.grid.points().step_by(stride).collect())).map_err(module("spectrum"))?;
            }
            psi.push_column(
                &format!("psi0_{}", phi.name()),
                Column::Float(sys.eigenfunctions_psi[0].iter().step_by(stride).copied().collect()),
            )
            .map_err(module("spectrum"))?;
            let mut entry = json!({
                "lambda0": sys.eigenvalues[0],
                "lambda1": sys.eigenvalues.get(1),
                "theta": sys.theta,
                "orthonormality_defect": sys.orthonormality_defect(sys.len().min(11)),
            });
            if phi == PhiChoice::FullF {
                let f = self.profile()?.clone();
                let (lo, hi) = variational_bounds(&f, &sys);
                entry["variational_lower"] = json!(lo);
                entry["variational_upper"] = json!(hi);
                entry["tail_exponent"] = json!(2.0 * sys.eigenvalues[0] - 1.0);
                entry["dimension_exponent"] = json!(2.0 - 2.0 * sys.eigenvalues[0]);
            }
            summary.insert(phi.name().into(), entry);
            self.out.note(format!("spectrum {}: lambda0 = {:.8}", phi.name(), sys.eigenvalues[0]));
            lambda0s.push(sys.eigenvalues[0]);
        }
        let table = ResultTable::new("spectrum")
            .meta("domain_l", self.cfg.spectrum.domain_l)
            .meta("grid_step", self.cfg.spectrum.grid_step)
            .with_column("phi", Column::Text(rows_phi))
            .and_then(|t| t.with_column("n", Column::Int(rows_n)))
            .and_then(|t| t.with_column("lambda", Column::Float(rows_lambda)))
            .and_then(|t| t.with_column("mass", Column::Float(rows_mass)))
            .map_err(module("spectrum"))?;
        self.out.table("spectrum.csv", table);
        self.out.table("psi0.csv", psi.meta("stride", stride));
        self.out.json("spectrum.json", json!({ "lambda0": lambda0s[0], "spectra": summary }));
        Ok(lambda0s)
    }

    pub fn pde_rate_stage(&mut self) -> Result<f64, CliError> {
        let r = self.cfg.pde_rate.clone();
        let params = SelfSimilarParams { dy: r.dy, ds: r.ds, y_max: r.y_max, ..SelfSimilarParams::default() };
        let report = rate_experiment_with(r.t, &r.lambdas, &params, &LadderParams::default()).map_err(module("pde"))?;
        let lambda0 = self.lambda0()?;
        let table = ResultTable::new("rate")
            .meta("t", r.t)
            .meta("v_infinity_at_0", report.v_infinity)
            .with_column("lambda", Column::Float(report.lambdas.clone()))
            .and_then(|t| t.with_column("d", Column::Float(report.d.clone())))
            .and_then(|t| t.with_column("log_lambda", Column::Float(report.lambdas.iter().map(|l| l.ln()).collect())))
            .and_then(|t| t.with_column("log_d", Column::Float(report.log_d.clone())))
            .map_err(module("pde"))?;
        let plot = emit_plot_data(&table, PlotKind::Rate).map_err(module("pde"))?;
        self.out.table("rate.csv", table);
        self.out.text("rate_plot.dat", plot.points);
        self.out.text("rate_fit.dat", plot.fit_line);
        self.out.json(
            "fit.json",
            json!({
                "t": r.t,
                "slope": report.fit.slope,
                "slope_stderr": report.fit.slope_stderr,
                "intercept": report.fit.intercept,
                "predicted_slope": -(2.0 * lambda0 - 1.0),
                "v_infinity_at_0": report.v_infinity,
                "sandwich_violation": report.sandwich_violation,
                "min_gap": report.min_gap,
            }),
        );
        self.out.note(format!(
            "pde-rate: slope {:.5} (se {:.1e}), predicted {:.5}",
            report.fit.slope,
            report.fit.slope_stderr,
            -(2.0 * lambda0 - 1.0)
        ));
        Ok(report.fit.slope)
    }

    pub fn simulate_stage(&mut self, tail_counts: bool) -> Result<(), CliError> {
        let s = self.cfg.simulate.clone();
        let seed = self.cfg.seed;
        let x0 = parse_measure(&s.x0)?;
        let w = s.bandwidth.unwrap_or_else(|| default_bandwidth(s.n, s.t));
        let sim = SimConfig::new(s.n);
        let per_rep = run_replicates(&x0, s.t, &sim, seed, s.reps, |c| {
            let field = DensityField::from_cloud(&c, w);
            let bz = extract_bz(&field, None, None);
            (c.is_extinct(), density_at_origin(&c, w), bz, (c.replicate_id == 0).then_some(field))
        })
        .map_err(module("particles"))?;

        let field = per_rep[0].3.clone().expect("replicate 0 keeps its field");
        let density = ResultTable::new("density")
            .meta("x0", &s.x0)
            .meta("t", s.t)
            .meta("n", s.n)
            .meta("w", w)
            .meta("replicate", 0)
            .with_column("x", Column::Float((0..field.len()).map(|i| field.center(i)).collect()))
            .and_then(|t| t.with_column("density", Column::Float(field.densities())))
            .map_err(module("particles"))?;
        self.out.table("density.csv", density);

        let (mut reps_col, mut x_col) = (Vec::new(), Vec::new());
        for (id, (_, _, bz, _)) in per_rep.iter().enumerate() {
            for &x in &bz.points {
                reps_col.push(id as i64);
                x_col.push(x);
            }
        }
        let bz0 = &per_rep[0].2;
        let bz_table = ResultTable::new("bz_points")
            .meta("eta", bz0.eta)
            .meta("delta_nbhd", bz0.delta_nbhd)
            .meta("w", w)
            .meta("n", s.n)
            .meta("t", s.t)
            .with_column("replicate", Column::Int(reps_col))
            .and_then(|t| t.with_column("x", Column::Float(x_col)))
            .map_err(module("particles"))?;
        self.out.table("bz_points.csv", bz_table);

        let at0: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
        if tail_counts {
            let hits: Vec<i64> =
                s.a_levels.iter().map(|&a| at0.iter().filter(|&&v| v > 0.0 && v <= a).count() as i64).collect();
            let probs: Vec<f64> = hits.iter().map(|&h| h as f64 / s.reps as f64).collect();
            let tail = ResultTable::new("tail_counts")
                .meta("w", w)
                .meta("replicates", s.reps)
                .with_column("a", Column::Float(s.a_levels.clone()))
                .and_then(|t| t.with_column("hits", Column::Int(hits)))
                .and_then(|t| t.with_column("probability", Column::Float(probs)))
                .map_err(module("particles"))?;
            self.out.table("tail.csv", tail);
        }

        let extinct: Vec<f64> = per_rep.iter().map(|r| if r.0 { 1.0 } else { 0.0 }).collect();
        let (ext, ext_se) = sbmlab::stats::mean_and_se(&extinct);
        let (mean0, mean0_se) = sbmlab::stats::mean_and_se(&at0);
        let fields = run_replicates(&x0, s.t, &sim, seed, s.holder_reps, |c| DensityField::from_cloud(&c, s.holder_bandwidth))
            .map_err(module("particles"))?;
        let holder = match holder_scan(&fields, &s.holder_lags, None) {
            Ok(h) => json!({
                "bandwidth": s.holder_bandwidth,
                "lags": h.lags,
                "bulk_exponent": h.bulk_exponent,
                "near_zero_exponent": h.near_zero_exponent,
                "bulk_pairs": h.bulk_pairs,
                "near_zero_pairs": h.near_zero_pairs,
            }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        self.out.json(
            "simulate.json",
            json!({
                "x0": s.x0,
                "t": s.t,
                "n": s.n,
                "replicates": s.reps,
                "w": w,
                "eta": bz0.eta,
                "delta_nbhd": bz0.delta_nbhd,
                "extinct_fraction": ext,
                "extinct_standard_error": ext_se,
                "extinct_limit": (-2.0 * x0.total_mass() / s.t).exp(),
                "mean_density_at_0": mean0,
                "mean_density_at_0_se": mean0_se,
                "holder": holder,
            }),
        );
        self.out.note(format!("simulate: {} replicates, extinct fraction {:.4} (+/- {:.4})", s.reps, ext, ext_se));
        Ok(())
    }

    pub fn tail_stage(&mut self) -> Result<f64, CliError> {
        let t = self.cfg.tail.clone();
        let x0 = parse_measure(&t.x0)?;
        let report = left_tail(&x0, t.t, &t.a_ladder, t.n, t.reps, self.cfg.seed, t.bandwidth, t.bootstrap)
            .map_err(module("particles"))?;
        let lambda0 = self.lambda0()?;
        let table = ResultTable::new("tail")
            .meta("x0", &t.x0)
            .meta("t", t.t)
            .meta("n", t.n)
            .meta("w", report.bandwidth)
            .meta("replicates", report.replicates)
            .with_column("a", Column::Float(report.a_ladder.clone()))
            .and_then(|tb| tb.with_column("hits", Column::Int(report.hits.iter().map(|&h| h as i64).collect())))
            .and_then(|tb| tb.with_column("probability", Column::Float(report.probabilities.clone())))
            .map_err(module("particles"))?;
        let plot = emit_plot_data(&table, PlotKind::Tail).map_err(module("particles"))?;
        self.out.table("tail.csv", table);
        self.out.text("tail_plot.dat", plot.points);
        self.out.text("tail_fit.dat", plot.fit_line);
        self.out.json(
            "tail.json",
            json!({
                "slope": report.slope,
                "intercept": report.intercept,
                "slope_ci": [report.slope_ci.0, report.slope_ci.1],
                "predicted": 2.0 * lambda0 - 1.0,
                "replicates": report.replicates,
                "w": report.bandwidth,
            }),
        );
        self.out.note(format!(
            "tail: slope {:.4} (95% CI {:.4}..{:.4}), predicted {:.4}",
            report.slope,
            report.slope_ci.0,
            report.slope_ci.1,
            2.0 * lambda0 - 1.0
        ));
        Ok(report.slope)
    }

    fn bz_sets(&self, n: usize) -> Result<(f64, Vec<PointSet>), CliError> {
        let b = &self.cfg.dimension.bz;
        let x0 = parse_measure(&b.x0)?;
        let w = default_bandwidth(n, b.t);
        let sets = run_replicates(&x0, b.t, &SimConfig::new(n), self.cfg.seed, b.reps, |c| {
            extract_bz(&DensityField::from_cloud(&c, w), None, None).points
        })
        .map_err(module("particles"))?
        .into_iter()
        .map(|p| PointSet::new(p, format!("bz n={n}")))
        .collect::<Result<Vec<_>, _>>()
        .map_err(module("dimension"))?;
        Ok((w, sets))
    }

    fn energy(&self, points: &PointSet) -> Result<Option<f64>, CliError> {
        let Some(beta) = self.cfg.dimension.beta else { return Ok(None) };
        if points.len() > MAX_ENERGY_POINTS {
            return Err(CliError::Module {
                module: "dimension",
                message: format!("{} points exceed the pair-energy limit {MAX_ENERGY_POINTS}", points.len()),
            });
        }
        riesz_energy(points, beta).map(Some).map_err(module("dimension"))
    }

    /// Box dimension of the configured source; `force_bz` overrides the source.
    pub fn dimension_stage(&mut self, force_bz: bool) -> Result<f64, CliError> {
        let d = self.cfg.dimension.clone();
        let source = if force_bz { DimensionSource::Bz } else { d.source };
        let lambda0 = self.lambda0()?;
        let mut doc = json!({ "source": format!("{source:?}").to_lowercase() });
        let (scales, counts_col, slope) = match source {
            DimensionSource::Bz => {
                let b = d.bz.clone();
                let mut drift = Vec::new();
                let mut base = None;
                for k in 0..=b.doublings {
                    let n = b.n << k;
                    let (w, sets) = self.bz_sets(n)?;
                    let scales =
                        d.scales.clone().unwrap_or_else(|| (0..b.scale_count).map(|j| w * 2f64.powi(j as i32)).collect());
                    let r = pooled_box_dimension(&sets, &scales).map_err(module("dimension"))?;
                    drift.push(json!({ "n": n, "w": w, "slope": r.slope, "sets_used": r.used }));
                    if k == 0 {
                        let energies: Vec<f64> = sets
                            .iter()
                            .filter(|s| s.len() >= 2)
                            .map(|s| self.energy(s))
                            .collect::<Result<Vec<_>, _>>()?
                            .into_iter()
                            .flatten()
                            .collect();
                        if !energies.is_empty() {
                            doc["mean_energy"] = json!(energies.iter().sum::<f64>() / energies.len() as f64);
                        }
                        doc["w"] = json!(w);
                        doc["eta"] = json!(0.5 / (n as f64 * w));
                        doc["delta_nbhd"] = json!(w);
                        doc["n"] = json!(n);
                        doc["x0"] = json!(b.x0);
                        base = Some((r.scales.clone(), Column::Float(r.mean_log_counts.clone()), r.slope));
                    }
                }
                doc["n_doubling_drift"] = json!(drift);
                doc["predicted"] = json!(2.0 - 2.0 * lambda0);
                base.expect("k = 0 always runs")
            }
            DimensionSource::Cantor => {
                let set = cantor_points(d.cantor_depth);
                let scales = d
                    .scales
                    .clone()
                    .unwrap_or_else(|| (1..=d.cantor_depth.saturating_sub(2).max(2)).map(|k| 3f64.powi(-(k as i32))).collect());
                doc["depth"] = json!(d.cantor_depth);
                doc["predicted"] = json!(2f64.ln() / 3f64.ln());
                doc["energy"] = json!(self.energy(&set)?);
                self.single_set(&set, scales)?
            }
            DimensionSource::Subordinator => {
                let alpha = d.alpha.unwrap_or(2.0 * lambda0 - 1.0);
                let sample = subordinator_range(alpha, d.horizon, d.jump_floor, self.cfg.seed, LevyTail::LogCorrected)
                    .map_err(module("dimension"))?;
                let scales = d.scales.clone().unwrap_or_else(|| (6..=16).map(|k| 2f64.powi(-k)).collect());
                doc["alpha"] = json!(alpha);
                doc["jump_floor"] = json!(d.jump_floor);
                doc["jump_count"] = json!(sample.jump_count);
                doc["expected_jumps"] = json!(sample.expected_jumps);
                doc["drift"] = json!(sample.drift);
                doc["predicted"] = json!(alpha);
                doc["energy"] = json!(self.energy(&sample.range)?);
                self.single_set(&sample.range, scales)?
            }
            DimensionSource::Input => {
                let path = d.input.clone().expect("validated");
                let set = read_points(&path)?;
                let p = set.points();
                let span = p[p.len() - 1] - p[0];
                // coarsest boxes always catch an extra cell at the set's edge; stop near four points per box
                let finest = ((p.len() as f64).log2().floor() as i32 - 2).max(5);
                let scales = d.scales.clone().unwrap_or_else(|| (3..=finest).map(|k| span * 2f64.powi(-k)).collect());
                doc["input"] = json!(path.display().to_string());
                doc["energy"] = json!(self.energy(&set)?);
                self.single_set(&set, scales)?
            }
        };
        doc["slope"] = json!(slope);
        doc["scales"] = json!(scales);
        let (count_name, count_col) = match counts_col {
            Column::Int(v) => {
                doc["counts"] = json!(v);
                ("count", Column::Int(v))
            }
            other => {
                if let Column::Float(v) = &other {
                    doc["mean_log_counts"] = json!(v);
                }
                ("mean_log_count", other)
            }
        };
        let table = ResultTable::new("box_counts")
            .meta("source", doc["source"].as_str().unwrap_or_default())
            .with_column("scale", Column::Float(scales))
            .and_then(|t| t.with_column(count_name, count_col))
            .map_err(module("dimension"))?;
        self.out.table("dim_counts.csv", table);
        self.out.json("dim.json", doc);
        self.out.note(format!("dimension: box slope {slope:.4}"));
        Ok(slope)
    }

    fn single_set(&self, set: &PointSet, scales: Vec<f64>) -> Result<(Vec<f64>, Column, f64), CliError> {
        let r = box_dimension(set, &scales).map_err(module("dimension"))?;
        Ok((r.scales, Column::Int(r.counts.iter().map(|&c| c as i64).collect()), r.slope))
    }

    pub fn tauberian_stage(&mut self) -> Result<(), CliError> {
        let q = self.cfg.tauberian.clone();
        let coeff = lower_coeff_d1(q.c1, q.c2, q.p, q.ulambda).map_err(|e| match e {
            TauberianError::InvalidConstants(m) => CliError::Config(m),
            other => module("tauberian")(other),
        })?;
        let upper = std::f64::consts::E * q.c2;
        let lambdas = log_grid(1.0, 1e6, 61);
        let a_grid = log_grid(1e-6, 1.0, 49);
        let mut families = Vec::new();
        for p in [0.5, 1.0] {
            let r = verify_on_family(&PowerLaw { p }, p, &lambdas, &a_grid, 1.0).map_err(module("tauberian"))?;
            families.push(json!({
                "family": r.family,
                "c1": r.c1,
                "c2": r.c2,
                "d1": r.d1.map(|d| d.d1),
                "lower": format!("{:?}", r.lower_status).to_lowercase(),
                "points_checked": r.rows.len(),
            }));
        }
        self.out.json(
            "tauberian.json",
            json!({
                "c1": q.c1, "c2": q.c2, "p": q.p, "ulambda": q.ulambda,
                "d1": coeff.d1,
                "d1_simplified": coeff.simplified,
                "upper_coefficient": upper,
                "families": families,
            }),
        );
        self.out.note(format!("d1 = {:.15e}", coeff.d1));
        if let Some(s) = coeff.simplified {
            self.out.note(format!("d1 (simplified) = {s:.15e}"));
        }
        self.out.note(format!("upper coefficient e*C2 = {upper:.15e}"));
        Ok(())
    }

    /// profile, spectrum of `F/2` and `F`, rate fit, simulation and tail fit, boundary dimension,
    /// then summary.json.
    pub fn full_pipeline(&mut self) -> Result<(), CliError> {
        let (f0, c0) = self.profile_stage()?;
        let l = self.spectrum_stage(&[PhiChoice::HalfF, PhiChoice::FullF])?;
        let (half, full) = (l[0], l[1]);
        let rate_slope = self.pde_rate_stage()?;
        self.simulate_stage(false)?;
        let tail_slope = self.tail_stage()?;
        let bz_dim = self.dimension_stage(true)?;
        self.out.json(
            "summary.json",
            json!({
                "f0": f0,
                "c0": c0,
                "lambda0_halfF": half,
                "lambda0_F": full,
                "rate_slope": rate_slope,
                "tail_slope": tail_slope,
                "bz_box_dim": bz_dim,
                "predicted_tail": 2.0 * full - 1.0,
                "predicted_dim": 2.0 - 2.0 * full,
            }),
        );
        Ok(())
    }
}

/// One number per line (first comma-separated field); `#` lines and a non-numeric header are skipped.
pub fn read_points(path: &Path) -> Result<PointSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => points.push(v),
            Err(_) if points.is_empty() && i == 0 => continue,
            Err(_) => return Err(CliError::Config(format!("{}:{}: not a number: {field}", path.display(), i + 1))),
        }
    }
    if points.is_empty() {
        return Err(CliError::Config(format!("{} holds no points", path.display())));
    }
    PointSet::new(points, path.display().to_string()).map_err(|e| CliError::Config(e.to_string()))
}

/// Runs `experiment` and returns its outputs without writing them.
pub fn run(cfg: &ExperimentConfig, experiment: Experiment) -> Result<Outputs, CliError> {
    cfg.validate()?;
    let mut r = Run::new(cfg);
    match experiment {
        Experiment::Profile => {
            r.profile_stage()?;
        }
        Experiment::Spectrum => {
            r.spectrum_stage(&[cfg.spectrum.phi])?;
        }
        Experiment::PdeRate => {
            r.pde_rate_stage()?;
        }
        Experiment::Simulate => r.simulate_stage(true)?,
        Experiment::Tail => {
            r.tail_stage()?;
        }
        Experiment::Dimension => {
            r.dimension_stage(false)?;
        }
        Experiment::Tauberian => r.tauberian_stage()?,
        Experiment::FullPipeline => r.full_pipeline()?,
    }
    Ok(r.out)
}
