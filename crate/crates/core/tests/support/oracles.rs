//! Independent reference implementations used to freeze and check expected
//! values. Nothing here calls into the code under test.

#![allow(dead_code)]

/// erf via the all-positive series
/// erf(x) = 2/√π · e^{−x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1)),
/// which has no cancellation for moderate |x|.
pub fn erf_series(x: f64) -> f64 {
    if x < 0.0 {
        return -erf_series(-x);
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-18 * sum {
        n += 1.0;
        term *= 2.0 * x * x / (2.0 * n + 1.0);
        sum += term;
        if n > 10_000.0 {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum
}

pub fn phi(x: f64) -> f64 {
    0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
}

/// Quantile by bisection on the series CDF.
pub fn quantile_bisect(p: f64) -> f64 {
    let (mut lo, mut hi) = (-12.0f64, 12.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn sdt(h: f64, f: f64) -> (f64, f64) {
    let (zh, zf) = (quantile_bisect(h), quantile_bisect(f));
    (zh - zf, -(zh + zf) / 2.0)
}

/// Rank by pairwise counting: #{less} + (#{equal} + 1)/2.
pub fn ranks_pairwise(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&a| {
            let less = xs.iter().filter(|&&b| b < a).count() as f64;
            let equal = xs.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_brute(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks_pairwise(x), ranks_pairwise(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

/// Fraction of (positive, negative) pairs ordered correctly, ties = ½.
pub fn auc_brute(scores: &[f64], labels: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li < 0.5 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj >= 0.5 {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

/// Receptivity metrics straight from the definitions: raw measures, then
/// division by the analytic width of each raw range.
pub fn metrics_by_definition(ai: f64, belief: f64, diss: f64) -> (f64, f64, f64) {
    let trust_raw = belief - ai; // in [-1, 1]
    let impact_raw = belief + diss; // in [0, 2]
    let trust = (trust_raw - (-1.0)) / (1.0 - (-1.0));
    let impact = (impact_raw - 0.0) / (2.0 - 0.0);
    let openness_raw = (ai + 1.0) * impact; // in [0, 2]
    let openness = (openness_raw - 0.0) / (2.0 - 0.0);
    (trust, impact, openness)
}
