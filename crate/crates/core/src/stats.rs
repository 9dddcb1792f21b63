//! Distribution functions and goodness-of-fit tests used by the diagnostics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

/// Cumulative distribution function of a Poisson law.
#[derive(Debug, Clone)]
pub struct PoissonCdf {
    mean: f64,
    /// `cdf[k] = P(N <= k)`, extended lazily up to where it reaches 1.
    table: Vec<f64>,
}

/// Means above this are summed in log space (`exp(-mean)` underflows near 745).
const LOG_SPACE_THRESHOLD: f64 = 700.0;

impl PoissonCdf {
    pub fn new(mean: f64) -> Self {
        assert!(mean >= 0.0 && mean.is_finite(), "Poisson mean must be finite and nonnegative");
        Self {
            mean,
            table: Vec::new(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `P(N <= k)`, with `P(N <= -1) = 0`.
    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        if let Some(v) = self.table.get(k as usize) {
            return *v;
        }
        poisson_cdf(self.mean, k as u64)
    }

    /// Precomputes the table up to `k_max`, making later lookups O(1).
    pub fn with_table(mut self, k_max: u64) -> Self {
        self.table = (0..=k_max).map(|k| poisson_cdf(self.mean, k)).collect();
        self
    }
}

/// `P(N <= k)` for `N ~ Poisson(mean)`.
pub fn poisson_cdf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return 1.0;
    }
    if mean <= LOG_SPACE_THRESHOLD {
        let mut term = (-mean).exp();
        let mut acc = term;
        for j in 1..=k {
            term *= mean / j as f64;
            acc += term;
        }
        acc.min(1.0)
    } else {
        // log-sum-exp over log p_j = -mean + j ln(mean) - ln j!
        let ln_mean = mean.ln();
        let log_p = |j: u64| -mean + j as f64 * ln_mean - ln_gamma(j as f64 + 1.0);
        let mode = (mean.floor() as u64).min(k);
        let peak = log_p(mode);
        let mut acc = 0.0;
        for j in 0..=k {
            let lp = log_p(j) - peak;
            if lp > -745.0 {
                acc += lp.exp();
            }
        }
        (peak.exp() * acc).min(1.0)
    }
}

/// Smallest `k` with `P(X <= k) >= q` for `X ~ Binomial(n, p)`.
pub fn binomial_quantile(n: u64, p: f64, q: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let ln_choose = |k: u64| ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut acc = 0.0;
    for k in 0..=n {
        acc += (ln_choose(k) + k as f64 * lp + (n - k) as f64 * lq).exp();
        // relative slack absorbs rounding in the running sum
        if acc >= q * (1.0 - 1e-12) {
            return k;
        }
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of `counts` against equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> TestResult {
    let total: u64 = counts.iter().sum();
    let b = counts.len();
    if b < 2 || total == 0 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let expected = total as f64 / b as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((b - 1) as f64).expect("positive degrees of freedom");
    TestResult {
        statistic,
        p_value: dist.sf(statistic),
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut acc = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        acc += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample Kolmogorov–Smirnov test against an arbitrary continuous CDF.
pub fn ks_one_sample(values: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let n = values.len();
    if n == 0 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    TestResult {
        statistic: d,
        p_value: ks_p_value(d, nf),
    }
}

pub fn ks_uniform(values: &[f64]) -> TestResult {
    ks_one_sample(values, |x| x.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov–Smirnov test (conservative for discrete data).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    if a.is_empty() || b.is_empty() {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    TestResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    }
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman rank correlation with a two-sided p-value from the t approximation.
pub fn spearman(x: &[f64], y: &[f64]) -> TestResult {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 3 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y));
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
        2.0 * dist.sf(t.abs())
    };
    TestResult {
        statistic: rho,
        p_value,
    }
}

/// Type-1 empirical quantile: smallest sample value whose ECDF reaches `q`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}
