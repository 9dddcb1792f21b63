//! End-to-end experiments: simulate a truth, fit competitors, calibrate each
//! model against the same observed pattern, and write all artefacts.
//!
//! Configurations are JSON:
//!
//! ```json
//! {
//!   "name": "geyer",
//!   "truth": {"family": "geyer", "beta": 54.598, "gamma": 1.4918, "r": 0.05, "alpha": 4.5},
//!   "competitors": [
//!     {"label": "true", "source": "truth"},
//!     {"label": "fitted", "source": "fit", "family": "geyer", "basis": "1", "r": 0.05, "alpha": 4.5},
//!     {"label": "poisson", "source": "fit", "family": "poisson", "basis": "1"}
//!   ],
//!   "window": [0, 1, 0, 1],
//!   "nx": 20, "ny": 20, "k": 499, "bins": 5, "level": 0.9,
//!   "method": "empirical", "band": "bootstrap", "n_boot": 500,
//!   "mcmc": {"n_iterations": 100000, "p_birth": 0.5, "initial_state": "poisson_matched"},
//!   "seed": 1
//! }
//! ```
//!
//! A competitor with `"source": "fixed"` carries its own `"model"` object.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calib::{
    binomial_null_band, bootstrap_band, calibrate, Band, BandChoice, BootstrapSettings,
    CalibrationReport, CalibrationSettings, PitMethod,
};
use crate::error::{Error, Result};
use crate::fit::{FitOptions, FitResult};
use crate::geometry::{PixelGrid, PointPattern, Window};
use crate::io::{pixel_rows, save_pattern, write_json, write_pixel_csv, Summary};
use crate::models::{parse_basis, ModelParams, ModelSpec};
use crate::registry::{FamilyRegistry, FitRequest};
use crate::rng::{derive_seed, RngStream};
use crate::sim::{sampler_for, McmcConfig};
use crate::svg::{histogram_svg, spatial_map_svg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSpec {
    None,
    Binomial,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ModelSource {
    Truth,
    Fit {
        family: String,
        #[serde(default = "default_basis_spec")]
        basis: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    Fixed {
        model: ModelParams,
    },
}

fn default_basis_spec() -> String {
    "1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Competitor {
    pub label: String,
    #[serde(flatten)]
    pub source: ModelSource,
}

impl Competitor {
    fn new(label: &str, source: ModelSource) -> Self {
        Self {
            label: label.into(),
            source,
        }
    }

    fn fit(label: &str, family: &str, basis: &str, r: Option<f64>, alpha: Option<f64>) -> Self {
        Self::new(
            label,
            ModelSource::Fit {
                family: family.into(),
                basis: basis.into(),
                r,
                alpha,
            },
        )
    }

    fn fixed(label: &str, model: &ModelSpec) -> Self {
        Self::new(
            label,
            ModelSource::Fixed {
                model: ModelParams::from(model),
            },
        )
    }
}

fn default_nx() -> usize {
    20
}
fn default_k() -> usize {
    499
}
fn default_bins() -> usize {
    5
}
fn default_level() -> f64 {
    0.9
}
fn default_n_boot() -> usize {
    500
}
fn default_method() -> PitMethod {
    PitMethod::Auto
}
fn default_band() -> BandSpec {
    BandSpec::Binomial
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub truth: ModelParams,
    pub competitors: Vec<Competitor>,
    /// `[x_min, x_max, y_min, y_max]`
    pub window: [f64; 4],
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_nx")]
    pub ny: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_method")]
    pub method: PitMethod,
    #[serde(default = "default_band")]
    pub band: BandSpec,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub seed: u64,
    /// Free-text remarks, e.g. how literature estimates were interpreted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub const BUILTIN_EXPERIMENTS: [&str; 3] = ["inhom_poisson", "strauss", "geyer"];

fn params(family: &str) -> ModelParams {
    ModelParams::new(family)
}

fn poisson_truth() -> ModelParams {
    let mut p = params("poisson");
    p.basis = Some(vec!["1".into(), "u1".into()]);
    p.theta = Some(vec![300f64.ln(), -3.0]);
    p
}

fn strauss_truth() -> ModelParams {
    let mut p = params("strauss");
    p.basis = Some(["1", "u1", "u2", "u1^2"].iter().map(|s| s.to_string()).collect());
    p.theta = Some(vec![200f64.ln(), 2.0, 2.0, 3.0]);
    p.gamma = Some(0.1);
    p.r = Some(0.05);
    p
}

fn geyer_truth() -> ModelParams {
    let mut p = params("geyer");
    p.beta = Some(4f64.exp());
    p.gamma = Some(0.4f64.exp());
    p.r = Some(0.05);
    p.alpha = Some(4.5);
    p
}

fn poisson_fixed(basis: &str, theta: Vec<f64>) -> Result<ModelSpec> {
    let mut p = params("poisson");
    p.set_basis(basis)?;
    p.theta = Some(theta);
    p.build()
}

impl ExperimentConfig {
    /// One of the built-in designs. With `reference_estimates`, competitors
    /// use published point estimates instead of being refitted to the
    /// simulated pattern.
    pub fn builtin(name: &str, reference_estimates: bool) -> Result<Self> {
        let base = |truth: ModelParams, competitors, method, band| ExperimentConfig {
            name: name.to_string(),
            truth,
            competitors,
            window: [0.0, 1.0, 0.0, 1.0],
            nx: 20,
            ny: 20,
            k: 499,
            bins: 5,
            level: 0.9,
            method,
            band,
            n_boot: 500,
            mcmc: McmcConfig::default(),
            seed: 0,
            notes: Vec::new(),
        };
        let truth = Competitor::new("true", ModelSource::Truth);
        let mut cfg = match name {
            "inhom_poisson" => {
                let competitors = if reference_estimates {
                    vec![
                        truth,
                        Competitor::fixed("fitted", &poisson_fixed("1,u1", vec![223f64.ln(), -2.89])?),
                        Competitor::fixed("homogeneous", &poisson_fixed("1", vec![73f64.ln()])?),
                    ]
                } else {
                    vec![
                        truth,
                        Competitor::fit("fitted", "poisson", "1,u1", None, None),
                        Competitor::fit("homogeneous", "poisson", "1", None, None),
                    ]
                };
                base(poisson_truth(), competitors, PitMethod::Exact, BandSpec::Binomial)
            }
            "strauss" => {
                let competitors = if reference_estimates {
                    let mut refit = strauss_truth();
                    refit.theta = Some(vec![179f64.ln(), 1.53, 1.89, 1.34]);
                    refit.gamma = Some(0.24);
                    let mut homog = params("strauss");
                    homog.theta = Some(vec![1099f64.ln()]);
                    homog.gamma = Some(0.34);
                    homog.r = Some(0.05);
                    vec![
                        truth,
                        Competitor::new("refit", ModelSource::Fixed { model: refit }),
                        Competitor::new("homogeneous_strauss", ModelSource::Fixed { model: homog }),
                        Competitor::fixed("homogeneous_poisson", &poisson_fixed("1", vec![271f64.ln()])?),
                    ]
                } else {
                    vec![
                        truth,
                        Competitor::fit("refit", "strauss", "1,u1,u2,u1^2", Some(0.05), None),
                        Competitor::fit("homogeneous_strauss", "strauss", "1", Some(0.05), None),
                        Competitor::fit("homogeneous_poisson", "poisson", "1", None, None),
                    ]
                };
                let mut cfg = base(strauss_truth(), competitors, PitMethod::Empirical, BandSpec::Bootstrap);
                if reference_estimates {
                    cfg.notes.push(
                        "homogeneous Strauss estimates read as activity 1099, interaction 0.34 \
                         (the literal pair has the interaction parameter above 1)"
                            .into(),
                    );
                }
                cfg
            }
            "geyer" => {
                let competitors = if reference_estimates {
                    let mut fitted = geyer_truth();
                    fitted.beta = Some(4.12f64.exp());
                    fitted.gamma = Some(1.46);
                    vec![
                        truth,
                        Competitor::new("fitted", ModelSource::Fixed { model: fitted }),
                        Competitor::fixed("poisson", &poisson_fixed("1", vec![376f64.ln()])?),
                    ]
                } else {
                    vec![
                        truth,
                        Competitor::fit("fitted", "geyer", "1", Some(0.05), Some(4.5)),
                        Competitor::fit("poisson", "poisson", "1", None, None),
                    ]
                };
                base(geyer_truth(), competitors, PitMethod::Empirical, BandSpec::Bootstrap)
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown experiment `{other}`; expected one of {}",
                    BUILTIN_EXPERIMENTS.join(", ")
                )))
            }
        };
        cfg.seed = 1;
        Ok(cfg)
    }

    pub fn window(&self) -> Result<Window> {
        let [a, b, c, d] = self.window;
        Window::new(a, b, c, d)
    }

    pub fn validate(&self) -> Result<()> {
        self.window()?;
        PixelGrid::new(self.window()?, self.nx, self.ny)?;
        self.mcmc.validate()?;
        if self.bins == 0 {
            return Err(Error::InvalidConfig("bins must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let truth = self.truth.build()?;
        let mut families = vec![truth.family().name().to_string()];
        for c in &self.competitors {
            match &c.source {
                ModelSource::Truth => {}
                ModelSource::Fit { family, .. } => families.push(family.to_ascii_lowercase()),
                ModelSource::Fixed { model } => families.push(model.build()?.family().name().to_string()),
            }
        }
        let ranks_needed = match self.method {
            PitMethod::Empirical => true,
            PitMethod::Exact => false,
            PitMethod::Auto => families.iter().any(|f| f != "poisson"),
        };
        if ranks_needed && !(self.k + 1).is_multiple_of(self.bins) {
            return Err(Error::BinMisalignment {
                bins: self.bins,
                scale: self.k as u64 + 1,
            });
        }
        if self.competitors.is_empty() {
            return Err(Error::InvalidConfig("competitors: at least one model is required".into()));
        }
        let mut labels: Vec<&str> = self.competitors.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.competitors.len() {
            return Err(Error::InvalidConfig("competitors: labels must be unique".into()));
        }
        Ok(())
    }

    pub fn settings(&self, band: BandChoice, seed: u64) -> CalibrationSettings {
        CalibrationSettings {
            nx: self.nx,
            ny: self.ny,
            bins: self.bins,
            level: self.level,
            k: self.k,
            method: self.method,
            band,
            mcmc: self.mcmc,
            seed,
        }
    }

    /// The shared band for all models of this experiment; bootstrap bands
    /// are drawn from the true model.
    pub fn band(&self, truth: &ModelSpec) -> Result<Option<Band>> {
        let window = self.window()?;
        let grid = PixelGrid::new(window, self.nx, self.ny)?;
        Ok(match self.band {
            BandSpec::None => None,
            BandSpec::Binomial => Some(binomial_null_band(grid.n_pixels(), self.bins, self.level)?),
            BandSpec::Bootstrap => Some(bootstrap_band(
                truth,
                window,
                &grid,
                &BootstrapSettings {
                    k: self.k,
                    bins: self.bins,
                    n_boot: self.n_boot,
                    level: self.level,
                    mcmc: self.mcmc,
                    seed: derive_seed(self.seed, "bootstrap"),
                },
            )?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub label: String,
    pub model: ModelSpec,
    pub fit: Option<FitResult>,
    pub report: CalibrationReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub observed: PointPattern,
    pub band: Option<Band>,
    pub models: Vec<ModelOutcome>,
}

/// Draws the observed pattern from the truth with the experiment seed.
pub fn observe(cfg: &ExperimentConfig, truth: &ModelSpec) -> Result<PointPattern> {
    let sampler = sampler_for(truth, cfg.window()?, &cfg.mcmc)?;
    Ok(sampler.sample_stream(RngStream::new(derive_seed(cfg.seed, "observed"), 0)))
}

pub fn resolve_model(
    source: &ModelSource,
    truth: &ModelSpec,
    observed: &PointPattern,
) -> Result<(ModelSpec, Option<FitResult>)> {
    Ok(match source {
        ModelSource::Truth => (truth.clone(), None),
        ModelSource::Fixed { model } => (model.build()?, None),
        ModelSource::Fit {
            family,
            basis,
            r,
            alpha,
        } => {
            let request = FitRequest {
                basis: parse_basis(basis)?,
                r: *r,
                alpha: *alpha,
            };
            let fit = FamilyRegistry::builtin().fit(family, observed, &request, &FitOptions::default())?;
            (fit.model.clone(), Some(fit))
        }
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let truth = cfg.truth.build()?;
    let observed = observe(cfg, &truth)?;
    let band = cfg.band(&truth)?;
    let choice = band.clone().map_or(BandChoice::None, BandChoice::Given);
    let mut models = Vec::with_capacity(cfg.competitors.len());
    for c in &cfg.competitors {
        let (model, fit) = resolve_model(&c.source, &truth, &observed)?;
        let settings = cfg.settings(choice.clone(), derive_seed(cfg.seed, &c.label));
        let report = calibrate(&observed, &model, &settings)?;
        models.push(ModelOutcome {
            label: c.label.clone(),
            model,
            fit,
            report,
        });
    }
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        observed,
        band,
        models,
    })
}

/// Writes `<label>.pixels.csv`, `<label>.summary.json`,
/// `<label>.histogram.svg` and `<label>.map.svg` into `dir`.
pub fn write_report(
    dir: &Path,
    label: &str,
    report: &CalibrationReport,
    model: &ModelSpec,
    pattern: &PointPattern,
) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let rows = pixel_rows(report);
    write_pixel_csv(&rows, fs::File::create(dir.join(format!("{label}.pixels.csv")))?)?;
    let summary = Summary::new(report, ModelParams::from(model));
    write_json(&summary, &dir.join(format!("{label}.summary.json")))?;
    let title = format!("{label} ({})", model.family());
    fs::write(
        dir.join(format!("{label}.histogram.svg")),
        histogram_svg(&report.histogram, &title),
    )?;
    fs::write(
        dir.join(format!("{label}.map.svg")),
        spatial_map_svg(&report.pit, Some(pattern), &title),
    )?;
    Ok(summary)
}

/// Writes the observed pattern, the configuration, per-model reports and a
/// plain-text table.
pub fn write_experiment(outcome: &ExperimentOutcome, dir: &Path) -> Result<String> {
    fs::create_dir_all(dir)?;
    save_pattern(&outcome.observed, &dir.join("observed.csv"))?;
    write_json(&outcome.config, &dir.join("experiment.json"))?;
    let mut table = String::new();
    let _ = writeln!(
        table,
        "experiment {} | seed {} | observed points {}",
        outcome.config.name,
        outcome.config.seed,
        outcome.observed.len()
    );
    let _ = writeln!(
        table,
        "{:<22} {:<8} {:>6} {:>7} {:>8} {:>8}  {:<28} flags",
        "model", "family", "delta", "rho_x", "chi2_p", "ks_p", "bins"
    );
    for m in &outcome.models {
        if let Some(fit) = &m.fit {
            write_json(fit, &dir.join(format!("{}.fit.json", m.label)))?;
        }
        write_json(&m.model, &dir.join(format!("{}.model.json", m.label)))?;
        let s = write_report(dir, &m.label, &m.report, &m.model, &outcome.observed)?;
        let bins: Vec<String> = s.bin_counts.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            table,
            "{:<22} {:<8} {:>6.3} {:>7.3} {:>8.4} {:>8.4}  {:<28} {}",
            m.label,
            m.model.family().name(),
            s.delta,
            s.column_trend_rho,
            s.chi_square_p,
            s.ks_p,
            bins.join(" "),
            s.flags.join(",")
        );
    }
    if let Some(b) = &outcome.band {
        let _ = writeln!(table, "band ({:?}, level {}): lower {:?} upper {:?}", b.kind, b.level, b.lower, b.upper);
    }
    fs::write(dir.join("summary.txt"), &table)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_round_trip() {
        for name in BUILTIN_EXPERIMENTS {
            for reference in [false, true] {
                let cfg = ExperimentConfig::builtin(name, reference).unwrap();
                cfg.validate().unwrap();
                let text = serde_json::to_string_pretty(&cfg).unwrap();
                let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
                assert_eq!(back, cfg);
            }
        }
        assert_eq!(ExperimentConfig::builtin("strauss", false).unwrap().competitors.len(), 4);
        assert_eq!(ExperimentConfig::builtin("geyer", false).unwrap().competitors.len(), 3);
        assert!(ExperimentConfig::builtin("cox", false).is_err());
    }

    #[test]
    fn documented_schema_parses() {
        let text = r#"{
          "name": "g",
          "truth": {"family": "geyer", "beta": 54.598, "gamma": 1.4918, "r": 0.05, "alpha": 4.5},
          "competitors": [
            {"label": "true", "source": "truth"},
            {"label": "fitted", "source": "fit", "family": "geyer", "basis": "1", "r": 0.05, "alpha": 4.5},
            {"label": "p", "source": "fixed", "model": {"family": "poisson", "theta": [5.9]}}
          ],
          "window": [0, 1, 0, 1],
          "k": 99, "method": "empirical", "band": "none"
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.nx, 20);
        assert_eq!(cfg.mcmc, McmcConfig::default());
        cfg.validate().unwrap();
        let bad = ExperimentConfig { k: 98, ..cfg };
        assert!(matches!(bad.validate(), Err(Error::BinMisalignment { .. })));
    }

    #[test]
    fn small_poisson_experiment_runs() {
        let mut cfg = ExperimentConfig::builtin("inhom_poisson", false).unwrap();
        cfg.seed = 4;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.models.len(), 3);
        let fitted = out.models[1].fit.as_ref().unwrap();
        assert!(fitted.converged);
        let dir = tempfile::tempdir().unwrap();
        let table = write_experiment(&out, dir.path()).unwrap();
        assert!(table.contains("homogeneous"));
        for label in ["true", "fitted", "homogeneous"] {
            for ext in ["pixels.csv", "summary.json", "histogram.svg", "map.svg", "model.json"] {
                assert!(dir.path().join(format!("{label}.{ext}")).exists(), "{label}.{ext}");
            }
        }
    }
}
