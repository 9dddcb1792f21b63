use serde::{Deserialize, Serialize};

use super::pit::{PitKind, PitVector, ReplicateCounts};
use crate::error::{Error, Result};
use crate::geometry::{PixelGrid, Window};
use crate::models::ModelSpec;
use crate::rng::{derive_seed, RngStream};
use crate::sim::{sample_batch, McmcConfig};
use crate::stats::{binomial_quantile, empirical_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    #[serde(rename = "binomial_null")]
    Binomial,
    Bootstrap,
}

/// Pointwise band for the bin counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub kind: BandKind,
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Band {
    pub fn contains(&self, bin: usize, count: u64) -> bool {
        let c = count as f64;
        c >= self.lower[bin] && c <= self.upper[bin]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub bin_counts: Vec<u64>,
    pub bin_edges: Vec<f64>,
    pub band: Option<Band>,
}

impl HistogramReport {
    pub fn n_bins(&self) -> usize {
        self.bin_counts.len()
    }

    pub fn total(&self) -> u64 {
        self.bin_counts.iter().sum()
    }

    pub fn with_band(mut self, band: Band) -> Result<Self> {
        if band.lower.len() != self.n_bins() || band.upper.len() != self.n_bins() {
            return Err(Error::InvalidConfig(format!(
                "band has {} bins, histogram has {}",
                band.lower.len(),
                self.n_bins()
            )));
        }
        self.band = Some(band);
        Ok(self)
    }

    /// Bins whose count falls outside the band; empty when no band is set.
    pub fn bins_outside(&self) -> Vec<usize> {
        match &self.band {
            Some(b) => (0..self.n_bins())
                .filter(|&i| !b.contains(i, self.bin_counts[i]))
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Equal-width histogram of the PIT values on `[0, 1]`.
///
/// Rank-based values are binned by rank so each bin holds exactly
/// `(K + 1) / B` rank levels; `B` must divide `K + 1`.
pub fn histogram(pit: &PitVector, bins: usize) -> Result<HistogramReport> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be at least 1".into()));
    }
    let mut counts = vec![0u64; bins];
    match (pit.kind, &pit.ranks, pit.rank_scale) {
        (PitKind::EmpiricalRank, Some(ranks), Some(scale)) => {
            if scale % bins as u64 != 0 {
                return Err(Error::BinMisalignment { bins, scale });
            }
            let width = scale / bins as u64;
            for &r in ranks {
                counts[((r - 1) / width) as usize] += 1;
            }
        }
        _ => {
            for &v in &pit.values {
                let b = ((v * bins as f64) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
    }
    Ok(HistogramReport {
        bin_counts: counts,
        bin_edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        band: None,
    })
}

/// Equal-tailed band from the `Binomial(S, 1/B)` law of each bin count.
pub fn binomial_null_band(n_pixels: usize, bins: usize, level: f64) -> Result<Band> {
    check_level(level)?;
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be at least 1".into()));
    }
    let p = 1.0 / bins as f64;
    let lo = binomial_quantile(n_pixels as u64, p, (1.0 - level) / 2.0) as f64;
    let hi = binomial_quantile(n_pixels as u64, p, (1.0 + level) / 2.0) as f64;
    Ok(Band {
        kind: BandKind::Binomial,
        level,
        lower: vec![lo; bins],
        upper: vec![hi; bins],
    })
}

fn check_level(level: f64) -> Result<()> {
    if (0.0..1.0).contains(&level) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("level: must lie in [0, 1), got {level}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSettings {
    pub k: usize,
    pub bins: usize,
    pub n_boot: usize,
    pub level: f64,
    pub mcmc: McmcConfig,
    pub seed: u64,
}

/// Band from the bin counts of `n_boot` fresh model draws, each ranked
/// against one shared pool of `K` draws.
pub fn bootstrap_band(
    model: &ModelSpec,
    window: Window,
    grid: &PixelGrid,
    settings: &BootstrapSettings,
) -> Result<Band> {
    check_level(settings.level)?;
    if settings.n_boot == 0 {
        return Err(Error::InvalidConfig("n_boot must be at least 1".into()));
    }
    let pool = sample_batch(model, window, settings.k, &settings.mcmc, derive_seed(settings.seed, "pool"))?;
    let pool = ReplicateCounts::new(&pool, grid)?;
    let fresh = sample_batch(
        model,
        window,
        settings.n_boot,
        &settings.mcmc,
        derive_seed(settings.seed, "fresh"),
    )?;
    let ties = derive_seed(settings.seed, "ties");
    let mut per_bin = vec![Vec::with_capacity(settings.n_boot); settings.bins];
    for (b, pattern) in fresh.iter().enumerate() {
        let pit = pool.rank(pattern, RngStream::new(ties, b as u64))?;
        let h = histogram(&pit, settings.bins)?;
        for (i, c) in h.bin_counts.into_iter().enumerate() {
            per_bin[i].push(c as f64);
        }
    }
    let mut lower = Vec::with_capacity(settings.bins);
    let mut upper = Vec::with_capacity(settings.bins);
    for mut v in per_bin {
        v.sort_by(f64::total_cmp);
        lower.push(empirical_quantile(&v, (1.0 - settings.level) / 2.0));
        upper.push(empirical_quantile(&v, (1.0 + settings.level) / 2.0));
    }
    Ok(Band {
        kind: BandKind::Bootstrap,
        level: settings.level,
        lower,
        upper,
    })
}
