#![allow(dead_code)]

//! Independent brute-force oracles for the statistics module. Everything in
//! here is computed by a different route than the implementation: ranks by
//! counting, the Friedman statistic in its deviation form, and tail
//! probabilities by Simpson quadrature over explicit densities.

/// Midrank of element `j` within `row`, by counting.
fn counted_rank(row: &[f64], j: usize) -> f64 {
    let mut less = 0;
    let mut equal = 0;
    for v in row {
        if *v < row[j] {
            less += 1;
        } else if *v == row[j] {
            equal += 1;
        }
    }
    less as f64 + (equal as f64 + 1.0) / 2.0
}

pub fn rank_sums(data: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let row = &data[i * k..(i + 1) * k];
        for j in 0..k {
            sums[j] += counted_rank(row, j);
        }
    }
    sums
}

/// Tie-corrected Friedman statistic in the deviation form
/// `(k-1) * sum_j (R_j - n(k+1)/2)^2 / (sum_ij r_ij^2 - n k (k+1)^2 / 4)`.
pub fn friedman_statistic(data: &[f64], n: usize, k: usize) -> f64 {
    let sums = rank_sums(data, n, k);
    let mu = n as f64 * (k as f64 + 1.0) / 2.0;
    let numerator: f64 = (k as f64 - 1.0) * sums.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>();
    let mut sq = 0.0;
    for i in 0..n {
        let row = &data[i * k..(i + 1) * k];
        for j in 0..k {
            let r = counted_rank(row, j);
            sq += r * r;
        }
    }
    let denominator = sq - n as f64 * k as f64 * (k as f64 + 1.0) * (k as f64 + 1.0) / 4.0;
    if denominator <= 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

/// Gamma function at integer or half-integer arguments, by recursion from
/// Gamma(1) = 1 and Gamma(1/2) = sqrt(pi).
fn gamma_half(two_a: u64) -> f64 {
    match two_a {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (two_a as f64 / 2.0 - 1.0) * gamma_half(two_a - 2),
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, steps: usize) -> f64 {
    let steps = steps + steps % 2;
    let h = (b - a) / steps as f64;
    let mut acc = f(a) + f(b);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Upper chi-square tail by quadrature over the density.
pub fn chi_square_sf_quadrature(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let a = df as f64 / 2.0;
    let norm = 2f64.powf(a) * gamma_half(df as u64);
    let pdf = |t: f64| t.powf(a - 1.0) * (-t / 2.0).exp() / norm;
    let upper = x + 60.0 * (2.0 * df as f64).sqrt().max(4.0);
    simpson(pdf, x, upper, 400_000)
}

/// Two-sided normal tail by quadrature over the density.
pub fn normal_two_sided_quadrature(z: f64) -> f64 {
    let z = z.abs();
    let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (2.0 * simpson(pdf, z, z + 14.0, 200_000)).min(1.0)
}

/// Dunn z-scores for every pair from counted rank sums.
pub fn dunn_z(data: &[f64], n: usize, k: usize) -> Vec<((usize, usize), f64)> {
    let sums = rank_sums(data, n, k);
    let denom = (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt();
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            out.push(((i, j), (sums[i] / n as f64 - sums[j] / n as f64) / denom));
        }
    }
    out
}

/// A timeline sampled at window midpoints integrates to its plain mean.
pub fn auc_by_mean(series: &[f64], v_max: f64) -> f64 {
    if series.is_empty() || v_max <= 0.0 {
        return 0.0;
    }
    series.iter().sum::<f64>() / series.len() as f64 / v_max
}

pub fn naive_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn naive_std(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = naive_mean(values);
    Some(
        (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt(),
    )
}

/// Type-7 quantile written out longhand.
pub fn naive_quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p * (sorted.len() as f64 - 1.0);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}
