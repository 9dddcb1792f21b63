use serde::{Deserialize, Serialize};

use super::histogram::HistogramReport;
use super::pit::{PitKind, PitVector};
use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::stats::{binomial_quantile, chi_square_uniform, ks_uniform, poisson_cdf, spearman, TestResult};

/// Two-sided tail below which `δ` marks the total count as inconsistent.
pub const N_TEST_TAIL: f64 = 0.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NTest {
    pub observed: u64,
    /// Probability (or replicate fraction) of fewer points than observed.
    pub delta: f64,
    pub replicates: Option<usize>,
    pub inconsistent: bool,
}

impl NTest {
    fn new(observed: u64, delta: f64, replicates: Option<usize>) -> Self {
        Self {
            observed,
            delta,
            replicates,
            inconsistent: delta <= N_TEST_TAIL || delta >= 1.0 - N_TEST_TAIL,
        }
    }
}

/// Fraction of replicates with strictly fewer points than the observation.
pub fn n_test(pattern: &PointPattern, replicates: &[PointPattern]) -> Result<NTest> {
    if replicates.is_empty() {
        return Err(Error::InvalidConfig("the N-test needs at least one replicate".into()));
    }
    let totals: Vec<u64> = replicates.iter().map(|p| p.len() as u64).collect();
    Ok(n_test_from_totals(pattern.len() as u64, &totals))
}

pub fn n_test_from_totals(observed: u64, totals: &[u64]) -> NTest {
    let below = totals.iter().filter(|&&t| t < observed).count();
    NTest::new(observed, below as f64 / totals.len() as f64, Some(totals.len()))
}

/// `P(N < n)` for `N ~ Poisson(mean)`.
pub fn n_test_poisson(observed: u64, mean: f64) -> NTest {
    let delta = if observed == 0 { 0.0 } else { poisson_cdf(mean, observed - 1) };
    NTest::new(observed, delta, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    pub chi_square: TestResult,
    pub ks: TestResult,
    /// Pixel values are dependent, so the p-values are only indicative.
    pub dependence_caveat: bool,
}

/// Chi-square on the bin counts and Kolmogorov-Smirnov on the values.
///
/// Ranks are compared at the centres of their levels, `(rank - 1/2)/(K + 1)`.
pub fn uniformity_tests(pit: &PitVector, hist: &HistogramReport) -> Uniformity {
    let ks = match (pit.kind, &pit.ranks, pit.rank_scale) {
        (PitKind::EmpiricalRank, Some(ranks), Some(scale)) => {
            let centred: Vec<f64> = ranks.iter().map(|&r| (r as f64 - 0.5) / scale as f64).collect();
            ks_uniform(&centred)
        }
        _ => ks_uniform(&pit.values),
    };
    Uniformity {
        chi_square: chi_square_uniform(&hist.bin_counts),
        ks,
        dependence_caveat: pit.dependent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionVerdict {
    /// Too many extreme values: the model is under-dispersed relative to the data (U shape).
    Underdispersed,
    /// Too few extreme values: the model is over-dispersed (inverted U).
    Overdispersed,
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub outer_count: u64,
    pub lower: u64,
    pub upper: u64,
    pub verdict: DispersionVerdict,
}

/// Compares the first plus last bin count with its `Binomial(S, 2/B)` null
/// 5% and 95% quantiles.
pub fn dispersion(hist: &HistogramReport) -> Result<Dispersion> {
    let b = hist.n_bins();
    if b < 3 {
        return Err(Error::InvalidConfig("dispersion check needs at least 3 bins".into()));
    }
    let s = hist.total();
    let outer = hist.bin_counts[0] + hist.bin_counts[b - 1];
    let p = 2.0 / b as f64;
    let lower = binomial_quantile(s, p, 0.05);
    let upper = binomial_quantile(s, p, 0.95);
    let verdict = if outer > upper {
        DispersionVerdict::Underdispersed
    } else if outer < lower {
        DispersionVerdict::Overdispersed
    } else {
        DispersionVerdict::Consistent
    };
    Ok(Dispersion {
        outer_count: outer,
        lower,
        upper,
        verdict,
    })
}

/// PIT values arranged as `ny` rows of `nx`, row 0 at the bottom.
pub fn spatial_map(pit: &PitVector) -> Vec<Vec<f64>> {
    pit.values.chunks(pit.grid.nx).map(|r| r.to_vec()).collect()
}

/// Spearman correlation between pixel column index and PIT value; a strong
/// correlation signals a missed trend along the first coordinate.
pub fn column_trend(pit: &PitVector) -> TestResult {
    let cols: Vec<f64> = (0..pit.len()).map(|s| pit.grid.column(s) as f64).collect();
    spearman(&cols, &pit.values)
}

pub fn row_trend(pit: &PitVector) -> TestResult {
    let rows: Vec<f64> = (0..pit.len()).map(|s| pit.grid.row(s) as f64).collect();
    spearman(&rows, &pit.values)
}
