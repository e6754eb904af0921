//! Descriptive statistics, margin-likelihood tables and the Wilcoxon
//! rank-sum test. Always `f64`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::findings::{Finding, FindingKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub mean: f64,
    /// Sample SD (n − 1 denominator); 0 for a single sample.
    pub sd: f64,
    pub max: f64,
    pub min: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<Finding>,
}

pub fn describe(samples: &[f64]) -> Result<CohortSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let (findings, sd) = if n == 1 {
        (
            vec![Finding::new(FindingKind::SingleSample, "n=1: sd reported as 0")],
            0.0,
        )
    } else {
        let ss = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        (Vec::new(), (ss / (n - 1) as f64).sqrt())
    };
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CohortSummary {
        // Rounding can put the mean of equal values a hair outside [min, max].
        mean: mean.clamp(min, max),
        sd,
        max,
        min,
        n,
        findings,
    })
}

/// Default margin thresholds (mm).
pub const MARGIN_THRESHOLDS: [f64; 3] = [1.0, 3.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub method: String,
    pub n: usize,
    /// Percentage of planes with deviation strictly below each threshold.
    pub percent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginTable {
    pub thresholds: Vec<f64>,
    pub rows: Vec<MarginRow>,
}

/// Percent of `deviations` strictly below each threshold.
pub fn margin_percentages(deviations: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if deviations.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let below = deviations.iter().filter(|&&d| d < t).count();
            100.0 * below as f64 / deviations.len() as f64
        })
        .collect())
}

pub fn margin_table(methods: &[(&str, &[f64])], thresholds: &[f64]) -> Result<MarginTable> {
    if methods.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = methods
        .iter()
        .map(|(name, devs)| {
            Ok(MarginRow {
                method: name.to_string(),
                n: devs.len(),
                percent: margin_percentages(devs, &sorted)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginTable {
        thresholds: sorted,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Rank sum of the first sample.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: WilcoxonMethod,
    pub n1: usize,
    pub n2: usize,
}

/// Largest sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 10;

/// Midranks of the pooled sample, and the tie-group sizes.
fn ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut r = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // Ranks are 1-based: positions i..=j share (i+1 + j+1)/2.
        let mid = (i + j + 2) as f64 / 2.0;
        for item in &pooled[i..=j] {
            r[item.1] = mid;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (r, ties)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    Ok(())
}

fn rank_sum(a: &[f64], b: &[f64]) -> (f64, Vec<usize>) {
    let (r, ties) = ranks(a, b);
    (r[..a.len()].iter().sum(), ties)
}

/// Number of `n1`-subsets of {1..n} with each rank sum, by dynamic
/// programming over the ranks.
pub fn rank_sum_counts(n1: usize, n: usize) -> Vec<u128> {
    let max_sum = n * (n + 1) / 2;
    // table[k][s]: subsets of size k with sum s among ranks seen so far.
    let mut table = vec![vec![0u128; max_sum + 1]; n1 + 1];
    table[0][0] = 1;
    for rank in 1..=n {
        for k in (1..=n1.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                table[k][s] += table[k - 1][s - rank];
            }
        }
    }
    table.swap_remove(n1)
}

/// Two-sided exact p from tail counts: `min(1, 2·min(lower, upper) / total)`.
pub fn two_sided_from_counts(lower: u128, upper: u128, total: u128) -> f64 {
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

/// Exact test; requires untied data.
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    check(a, b)?;
    let (w, ties) = rank_sum(a, b);
    if ties.iter().any(|&t| t > 1) {
        return Err(Error::InvalidParameter("exact rank-sum test needs untied data".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let counts = rank_sum_counts(n1, n1 + n2);
    let w = w.round() as usize;
    let lower: u128 = counts[..=w].iter().sum();
    let upper: u128 = counts[w..].iter().sum();
    let total: u128 = counts.iter().sum();
    Ok(WilcoxonResult {
        statistic: w as f64,
        p_value: two_sided_from_counts(lower, upper, total),
        method: WilcoxonMethod::Exact,
        n1,
        n2,
    })
}

/// Normal approximation with tie and continuity corrections.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    check(a, b)?;
    let (w, ties) = rank_sum(a, b);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let mean = n1 * (n + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = if n > 1.0 {
        n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let unit = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * unit.sf(z)).min(1.0)
    };
    Ok(WilcoxonResult {
        statistic: w,
        p_value,
        method: WilcoxonMethod::NormalApproximation,
        n1: a.len(),
        n2: b.len(),
    })
}

/// Exact when both samples have at most [`EXACT_LIMIT`] values and there
/// are no ties, the normal approximation otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    check(a, b)?;
    let (_, ties) = rank_sum(a, b);
    if a.len() <= EXACT_LIMIT && b.len() <= EXACT_LIMIT && ties.iter().all(|&t| t == 1) {
        wilcoxon_exact(a, b)
    } else {
        wilcoxon_normal(a, b)
    }
}
