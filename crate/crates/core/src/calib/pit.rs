use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pixel_counts, PixelGrid, PointPattern};
use crate::models::{integrate_log_linear, ModelSpec};
use crate::rng::RngStream;
use crate::stats::PoissonCdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitKind {
    ExactRandomized,
    EmpiricalRank,
}

/// Per-pixel PIT values in `[0, 1]`.
///
/// For empirical ranks the values are `rank / (K + 1)` with ranks in `1..=K+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitVector {
    pub kind: PitKind,
    pub grid: PixelGrid,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
    pub ranks: Option<Vec<u64>>,
    pub rank_scale: Option<u64>,
    /// Stream that supplied the randomisation (V variates or tie breaks).
    pub randomization: RngStream,
    /// Pixel values are dependent (interacting model), so formal tests are approximate.
    pub dependent: bool,
}

impl PitVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_dependence(mut self, dependent: bool) -> Self {
        self.dependent = dependent;
        self
    }
}

/// `F(z - 1) + v (F(z) - F(z - 1))` for a count CDF with `F(-1) = 0`.
pub fn randomized_pit(cdf: impl Fn(i64) -> f64, z: u64, v: f64) -> f64 {
    let z = z as i64;
    let below = if z == 0 { 0.0 } else { cdf(z - 1) };
    let at = cdf(z);
    (below + v * (at - below)).clamp(0.0, 1.0)
}

/// Randomised PIT of each pixel count under the Poisson law with mean
/// `Λ(A_s)`.
pub fn exact_poisson_pit(
    pattern: &PointPattern,
    model: &ModelSpec,
    grid: &PixelGrid,
    stream: RngStream,
) -> Result<PitVector> {
    let poisson = model.as_poisson().ok_or_else(|| {
        Error::InvalidModel(format!(
            "exact PITs need a Poisson model, got {}; use empirical ranks",
            model.family()
        ))
    })?;
    let counts = pixel_counts(pattern, grid)?.counts;
    let mut rng = stream.rng();
    let values = counts
        .iter()
        .enumerate()
        .map(|(s, &z)| {
            let mean = integrate_log_linear(&poisson.intensity, &grid.pixel_window(s));
            let f = PoissonCdf::new(mean);
            randomized_pit(|k| f.cdf(k), z, rng.random::<f64>())
        })
        .collect();
    Ok(PitVector {
        kind: PitKind::ExactRandomized,
        grid: *grid,
        values,
        counts,
        ranks: None,
        rank_scale: None,
        randomization: stream,
        dependent: false,
    })
}

/// Pixel counts of a replicate pool, sorted per pixel for rank queries.
#[derive(Debug, Clone)]
pub struct ReplicateCounts {
    grid: PixelGrid,
    k: usize,
    sorted: Vec<Vec<u64>>,
    totals: Vec<u64>,
}

impl ReplicateCounts {
    pub fn new(replicates: &[PointPattern], grid: &PixelGrid) -> Result<Self> {
        if replicates.is_empty() {
            return Err(Error::InvalidConfig("at least one replicate is required".into()));
        }
        let mut sorted = vec![Vec::with_capacity(replicates.len()); grid.n_pixels()];
        let mut totals = Vec::with_capacity(replicates.len());
        for rep in replicates {
            let c = pixel_counts(rep, grid)?;
            totals.push(c.total());
            for (s, v) in c.counts.into_iter().enumerate() {
                sorted[s].push(v);
            }
        }
        for v in &mut sorted {
            v.sort_unstable();
        }
        Ok(Self {
            grid: *grid,
            k: replicates.len(),
            sorted,
            totals,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// `(#replicates below z, #replicates equal to z)` in pixel `s`.
    pub fn below_and_ties(&self, s: usize, z: u64) -> (usize, usize) {
        let v = &self.sorted[s];
        let below = v.partition_point(|&c| c < z);
        let upto = v.partition_point(|&c| c <= z);
        (below, upto - below)
    }

    /// Ranks of the observed pattern; ties are broken uniformly at random.
    pub fn rank(&self, pattern: &PointPattern, stream: RngStream) -> Result<PitVector> {
        let counts = pixel_counts(pattern, &self.grid)?.counts;
        let mut rng = stream.rng();
        let scale = self.k as u64 + 1;
        let ranks: Vec<u64> = counts
            .iter()
            .enumerate()
            .map(|(s, &z)| {
                let (below, ties) = self.below_and_ties(s, z);
                1 + below as u64 + rng.random_range(0..=ties as u64)
            })
            .collect();
        Ok(PitVector {
            kind: PitKind::EmpiricalRank,
            grid: self.grid,
            values: ranks.iter().map(|&r| r as f64 / scale as f64).collect(),
            counts,
            ranks: Some(ranks),
            rank_scale: Some(scale),
            randomization: stream,
            dependent: false,
        })
    }
}

/// Rank of each observed pixel count among the replicate counts.
pub fn empirical_ranks(
    pattern: &PointPattern,
    replicates: &[PointPattern],
    grid: &PixelGrid,
    stream: RngStream,
) -> Result<PitVector> {
    ReplicateCounts::new(replicates, grid)?.rank(pattern, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Window};
    use crate::models::{LogLinearIntensity, PoissonModel, Term};

    fn single_pixel_pattern(n: usize) -> PointPattern {
        PointPattern::new(Window::unit_square(), vec![Point::new(0.5, 0.5); n]).unwrap()
    }

    #[test]
    fn pit_of_degenerate_law_is_v() {
        let f = PoissonCdf::new(0.0);
        for v in [0.0, 0.3, 1.0] {
            assert_eq!(randomized_pit(|k| f.cdf(k), 0, v), v);
        }
    }

    #[test]
    fn pit_poisson_one_at_zero() {
        let f = PoissonCdf::new(1.0);
        let got = randomized_pit(|k| f.cdf(k), 0, 0.5);
        // 0.5 * e^-1
        assert!((got - 0.183_939_720_585_721_16).abs() < 1e-15);
        let got = randomized_pit(|k| f.cdf(k), 2, 0.25);
        let want = (1.0 + 1.0) * (-1f64).exp() + 0.25 * 0.5 * (-1f64).exp();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn zero_intensity_model_gives_raw_v() {
        let m: ModelSpec = PoissonModel::new(
            LogLinearIntensity::new(vec![Term::CONSTANT], vec![f64::NEG_INFINITY]).unwrap(),
        )
        .into();
        let grid = PixelGrid::new(Window::unit_square(), 4, 4).unwrap();
        let stream = RngStream::new(8, 0);
        let pit = exact_poisson_pit(&PointPattern::empty(Window::unit_square()), &m, &grid, stream).unwrap();
        let mut rng = stream.rng();
        for v in &pit.values {
            assert_eq!(*v, rng.random::<f64>());
        }
    }

    #[test]
    fn rank_without_ties() {
        let reps: Vec<PointPattern> = [0, 1, 3, 5].iter().map(|&n| single_pixel_pattern(n)).collect();
        let grid = PixelGrid::new(Window::unit_square(), 1, 1).unwrap();
        let pit = empirical_ranks(&single_pixel_pattern(2), &reps, &grid, RngStream::new(0, 0)).unwrap();
        assert_eq!(pit.ranks.as_deref(), Some(&[3u64][..]));
        assert_eq!(pit.rank_scale, Some(5));
        assert_eq!(pit.values, vec![0.6]);
    }

    #[test]
    fn all_ties_rank_is_uniform() {
        let reps: Vec<PointPattern> = (0..4).map(|_| single_pixel_pattern(1)).collect();
        let grid = PixelGrid::new(Window::unit_square(), 1, 1).unwrap();
        let pool = ReplicateCounts::new(&reps, &grid).unwrap();
        let obs = single_pixel_pattern(1);
        let mut freq = [0u32; 5];
        for i in 0..5000 {
            let r = pool.rank(&obs, RngStream::new(1, i)).unwrap().ranks.unwrap()[0];
            freq[(r - 1) as usize] += 1;
        }
        for f in freq {
            assert!((f as f64 - 1000.0).abs() < 150.0, "{freq:?}");
        }
    }

    #[test]
    fn mismatched_replicate_window_rejected() {
        let grid = PixelGrid::new(Window::unit_square(), 2, 2).unwrap();
        let other = PointPattern::empty(Window::new(0.0, 2.0, 0.0, 1.0).unwrap());
        assert!(empirical_ranks(&single_pixel_pattern(1), &[other], &grid, RngStream::new(0, 0)).is_err());
        assert!(empirical_ranks(&single_pixel_pattern(1), &[], &grid, RngStream::new(0, 0)).is_err());
    }
}
