//! Nonparametric experiment statistics: Friedman test over paired
//! repetitions, Dunn post-hoc with Bonferroni adjustment, min-max normalized
//! area under a timeline, and summary descriptors.
//!
//! Tail probabilities come from an in-repo regularized incomplete gamma
//! (series/continued-fraction) rather than an external statistics crate.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `n` blocks (paired repetitions) by `k` treatments (techniques).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMatrix {
    /// Row-major block values.
    pub data: Vec<f64>,
    pub blocks: usize,
    pub treatments: usize,
}

impl ResultMatrix {
    pub fn new(blocks: usize, treatments: usize, data: Vec<f64>) -> Result<ResultMatrix> {
        if blocks < 2 || treatments < 2 {
            return Err(Error::config("result matrix needs >= 2 blocks and >= 2 treatments"));
        }
        if data.len() != blocks * treatments {
            return Err(Error::config("result matrix data is not rectangular"));
        }
        Ok(ResultMatrix {
            data,
            blocks,
            treatments,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.treatments..(i + 1) * self.treatments]
    }
}

/// Which side of a pairwise comparison ranks higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    First,
    Second,
    Tied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    /// Treatment indices into the matrix columns.
    pub pair: (usize, usize),
    pub z: f64,
    /// Bonferroni-adjusted two-sided p, clamped to [0, 1].
    pub p_adjusted: f64,
    /// Points to the treatment with the higher mean rank.
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Mean rank per treatment (rank 1 = smallest value).
    pub mean_ranks: Vec<f64>,
    /// Present for the post-hoc test only.
    pub pairwise: Vec<PairwiseComparison>,
    /// Human-readable description of the exact variant computed.
    pub method: String,
}

/// Within-block average ranks; tied values share the mean of their ranks.
fn block_ranks(row: &[f64]) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("no NaN in result matrix"));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average 1-based rank
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &col in &order[i..=j] {
            ranks[col] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn rank_table(m: &ResultMatrix) -> Vec<Vec<f64>> {
    (0..m.blocks).map(|i| block_ranks(m.row(i))).collect()
}

fn mean_ranks(ranks: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = ranks.len() as f64;
    (0..k)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect()
}

/// Tie-corrected Friedman test; the upper tail of the chi-square
/// distribution with `k - 1` degrees of freedom gives the p-value.
///
/// A matrix whose blocks are all internally tied carries no information:
/// statistic 0, p = 1.
pub fn friedman(m: &ResultMatrix) -> TestReport {
    let (n, k) = (m.blocks, m.treatments);
    let ranks = rank_table(m);
    let means = mean_ranks(&ranks, k);

    let rank_sums: Vec<f64> = (0..k)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>())
        .collect();
    let nf = n as f64;
    let kf = k as f64;
    let base = 12.0 / (nf * kf * (kf + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>()
        - 3.0 * nf * (kf + 1.0);

    // tie correction: divide by 1 - sum(t^3 - t) / (n k (k^2 - 1))
    let mut tie_sum = 0.0;
    for i in 0..n {
        let mut row: Vec<f64> = m.row(i).to_vec();
        row.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut j = 0;
        while j < k {
            let mut t = 1usize;
            while j + t < k && row[j + t] == row[j] {
                t += 1;
            }
            tie_sum += (t * t * t - t) as f64;
            j += t;
        }
    }
    let correction = 1.0 - tie_sum / (nf * kf * (kf * kf - 1.0));
    let (statistic, p_value) = if correction <= 0.0 {
        (0.0, 1.0)
    } else {
        let stat = base / correction;
        let stat = if stat.abs() < 1e-12 { 0.0 } else { stat };
        (stat, chi_square_sf(stat, k - 1))
    };

    TestReport {
        statistic,
        degrees_of_freedom: k - 1,
        p_value: p_value.clamp(0.0, 1.0),
        mean_ranks: means,
        pairwise: Vec::new(),
        method: "friedman, tie-corrected (divisor form), chi-square upper tail".into(),
    }
}

/// Dunn post-hoc over the Friedman mean ranks with Bonferroni adjustment
/// over all `k(k-1)/2` pairs.
pub fn dunn(m: &ResultMatrix) -> TestReport {
    let (n, k) = (m.blocks, m.treatments);
    let base = friedman(m);
    let means = &base.mean_ranks;
    let denom = (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt();
    let pairs = k * (k - 1) / 2;
    let mut pairwise = Vec::with_capacity(pairs);
    for i in 0..k {
        for j in i + 1..k {
            let z = (means[i] - means[j]) / denom;
            let p = normal_two_sided(z);
            let p_adjusted = (p * pairs as f64).clamp(0.0, 1.0);
            let direction = if means[i] > means[j] {
                Direction::First
            } else if means[j] > means[i] {
                Direction::Second
            } else {
                Direction::Tied
            };
            pairwise.push(PairwiseComparison {
                pair: (i, j),
                z,
                p_adjusted,
                direction,
            });
        }
    }
    TestReport {
        statistic: base.statistic,
        degrees_of_freedom: base.degrees_of_freedom,
        p_value: base.p_value,
        mean_ranks: means.clone(),
        pairwise,
        method: "dunn on friedman mean ranks, bonferroni-adjusted two-sided normal p".into(),
    }
}

/// Min-max normalized area under a timeline sampled at the midpoints of
/// equal windows spanning `[0, t_max]`: trapezoid between samples with
/// constant extension to both ends, divided by `t_max * v_max`.
pub fn auc_normalized(series: &[f64], t_max: f64, v_max: f64) -> f64 {
    if series.is_empty() || t_max <= 0.0 || v_max <= 0.0 {
        return 0.0;
    }
    let m = series.len();
    let dt = t_max / m as f64;
    let mut area = 0.5 * dt * (series[0] + series[m - 1]);
    for w in series.windows(2) {
        area += 0.5 * dt * (w[0] + w[1]);
    }
    area / (t_max * v_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); absent for a single value.
    pub std: Option<f64>,
    /// Standard error of the mean, s / sqrt(n); absent for a single value.
    pub sem: Option<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    /// Quartile method used.
    pub quartile_method: String,
}

/// Linearly interpolated quantile over sorted data (type-7).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n == 0 {
        return Err(Error::config("cannot summarize an empty sample"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (std, sem) = if n >= 2 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let s = var.sqrt();
        (Some(s), Some(s / (n as f64).sqrt()))
    } else {
        (None, None)
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(Summary {
        n,
        mean,
        std,
        sem,
        median,
        q1,
        q3,
        iqr: q3 - q1,
        quartile_method: "linear interpolation (type 7)".into(),
    })
}

// ---------------------------------------------------------------------------
// tail probabilities

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

/// Two-sided normal tail probability for a z-score.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Complementary error function via the regularized incomplete gamma.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x == 0.0 {
        1.0
    } else {
        gamma_q(0.5, x * x)
    }
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x): series for x < a + 1,
/// Lentz continued fraction otherwise. Relative accuracy well below 1e-10
/// over the ranges used here.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut term = sum;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}
