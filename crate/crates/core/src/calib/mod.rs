//! PIT and rank calibration diagnostics.

mod diagnostics;
mod histogram;
mod pit;

use serde::{Deserialize, Serialize};

pub use diagnostics::{
    column_trend, dispersion, n_test, n_test_from_totals, n_test_poisson, row_trend, spatial_map,
    uniformity_tests, Dispersion, DispersionVerdict, NTest, Uniformity, N_TEST_TAIL,
};
pub use histogram::{
    binomial_null_band, bootstrap_band, histogram, Band, BandKind, BootstrapSettings,
    HistogramReport,
};
pub use pit::{
    empirical_ranks, exact_poisson_pit, randomized_pit, PitKind, PitVector, ReplicateCounts,
};

use crate::error::{Error, Result};
use crate::geometry::{PixelGrid, PointPattern};
use crate::models::{integrate_log_linear, ModelSpec};
use crate::rng::{derive_seed, RngStream};
use crate::sim::{sample_batch, McmcConfig};
use crate::stats::TestResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitMethod {
    /// Exact PITs for Poisson models, simulation ranks otherwise.
    Auto,
    Exact,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandChoice {
    None,
    Binomial,
    Bootstrap { n_boot: usize },
    Given(Band),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub nx: usize,
    pub ny: usize,
    pub bins: usize,
    pub level: f64,
    pub k: usize,
    pub method: PitMethod,
    pub band: BandChoice,
    pub mcmc: McmcConfig,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            nx: 20,
            ny: 20,
            bins: 5,
            level: 0.9,
            k: 499,
            method: PitMethod::Auto,
            band: BandChoice::Binomial,
            mcmc: McmcConfig::default(),
            seed: 0,
        }
    }
}

impl CalibrationSettings {
    pub fn uses_ranks(&self, model: &ModelSpec) -> bool {
        match self.method {
            PitMethod::Auto => model.as_poisson().is_none(),
            PitMethod::Exact => false,
            PitMethod::Empirical => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub pit: PitVector,
    pub histogram: HistogramReport,
    pub n_test: NTest,
    pub uniformity: Uniformity,
    pub dispersion: Option<Dispersion>,
    pub column_trend: TestResult,
    pub row_trend: TestResult,
    pub seed: u64,
}

/// Runs the full diagnostic for one model against one observed pattern.
///
/// Every random choice is drawn from a stream derived from `settings.seed`.
pub fn calibrate(
    pattern: &PointPattern,
    model: &ModelSpec,
    settings: &CalibrationSettings,
) -> Result<CalibrationReport> {
    let window = *pattern.window();
    let grid = PixelGrid::new(window, settings.nx, settings.ny)?;
    let randomization = RngStream::new(derive_seed(settings.seed, "pit"), 0);
    let (pit, ntest) = if settings.uses_ranks(model) {
        if !(settings.k as u64 + 1).is_multiple_of(settings.bins as u64) {
            return Err(Error::BinMisalignment {
                bins: settings.bins,
                scale: settings.k as u64 + 1,
            });
        }
        let reps = sample_batch(
            model,
            window,
            settings.k,
            &settings.mcmc,
            derive_seed(settings.seed, "replicates"),
        )?;
        let pool = ReplicateCounts::new(&reps, &grid)?;
        let pit = pool
            .rank(pattern, randomization)?
            .with_dependence(model.family().is_gibbs());
        let nt = n_test_from_totals(pattern.len() as u64, pool.totals());
        (pit, nt)
    } else {
        let pit = exact_poisson_pit(pattern, model, &grid, randomization)?;
        let mean = integrate_log_linear(&model.activity(), &window);
        (pit, n_test_poisson(pattern.len() as u64, mean))
    };
    let hist = histogram(&pit, settings.bins)?;
    let band = match &settings.band {
        BandChoice::None => None,
        BandChoice::Binomial => Some(binomial_null_band(pit.len(), settings.bins, settings.level)?),
        BandChoice::Bootstrap { n_boot } => Some(bootstrap_band(
            model,
            window,
            &grid,
            &BootstrapSettings {
                k: settings.k,
                bins: settings.bins,
                n_boot: *n_boot,
                level: settings.level,
                mcmc: settings.mcmc,
                seed: derive_seed(settings.seed, "bootstrap"),
            },
        )?),
        BandChoice::Given(b) => Some(b.clone()),
    };
    let hist = match band {
        Some(b) => hist.with_band(b)?,
        None => hist,
    };
    let uniformity = uniformity_tests(&pit, &hist);
    let disp = if settings.bins >= 3 { Some(dispersion(&hist)?) } else { None };
    Ok(CalibrationReport {
        column_trend: column_trend(&pit),
        row_trend: row_trend(&pit),
        pit,
        histogram: hist,
        n_test: ntest,
        uniformity,
        dispersion: disp,
        seed: settings.seed,
    })
}
