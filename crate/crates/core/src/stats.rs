//! Rank metrics, signal detection measures and one-way ANOVA.

use libm::erfc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: input is constant")]
    ConstantInput,
    #[error("degenerate labels: only one class after binarization at 0.5")]
    DegenerateLabels,
    #[error("label {0} outside [0, 1]")]
    LabelOutOfRange(f64),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("{0}")]
    Parameter(String),
    #[error("zero within-group variance in every group")]
    ZeroWithinVariance,
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Labels at or above this value count as positive.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Fractional ranks starting at 1; tied values share their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean of (i+1)..=(j+1)
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: x.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// ROC AUC of `scores` against labels binarized at [`BINARIZE_THRESHOLD`],
/// via the Mann–Whitney U statistic. Tied scores count one half.
pub fn auc(scores: &[f64], labels_raw: &[f64]) -> Result<f64> {
    if scores.len() != labels_raw.len() {
        return Err(StatsError::LengthMismatch(scores.len(), labels_raw.len()));
    }
    check_finite(scores)?;
    if let Some(&bad) = labels_raw.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(StatsError::LabelOutOfRange(bad));
    }
    let positive: Vec<bool> = labels_raw.iter().map(|&l| l >= BINARIZE_THRESHOLD).collect();
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::DegenerateLabels);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let u = rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
///
/// Acklam's rational approximation (relative error about 1.15e-9) refined
/// by one Newton step on `normal_cdf`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Parameter(format!("quantile needs p in (0, 1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    Ok(x - (normal_cdf(x) - p) / normal_pdf(x))
}

/// Sensitivity and bias from a 2×2 outcome table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdtResult {
    pub d_prime: f64,
    pub c_prime: f64,
    pub hit_rate: f64,
    pub false_alarm_rate: f64,
}

/// Rate `k / n` with 0 and 1 replaced by `1/(2n)` and `1 − 1/(2n)`.
pub fn corrected_rate(k: u64, n: u64) -> f64 {
    let half = 1.0 / (2.0 * n as f64);
    match k {
        0 => half,
        k if k == n => 1.0 - half,
        k => k as f64 / n as f64,
    }
}

/// d′ = z(H) − z(F) and c′ = −(z(H) + z(F)) / 2 with half-count correction.
pub fn d_prime_c_prime(hits: u64, misses: u64, false_alarms: u64, correct_rejections: u64) -> Result<SdtResult> {
    let signal = hits + misses;
    let noise = false_alarms + correct_rejections;
    if signal == 0 || noise == 0 {
        return Err(StatsError::Parameter(format!(
            "need signal and noise trials, got {signal} and {noise}"
        )));
    }
    let h = corrected_rate(hits, signal);
    let f = corrected_rate(false_alarms, noise);
    let (zh, zf) = (normal_quantile(h)?, normal_quantile(f)?);
    Ok(SdtResult {
        d_prime: zh - zf,
        c_prime: -(zh + zf) / 2.0,
        hit_rate: h,
        false_alarm_rate: f,
    })
}

/// d′ and c′ directly from (already corrected) rates.
pub fn d_prime_from_rates(hit_rate: f64, false_alarm_rate: f64) -> Result<(f64, f64)> {
    let (zh, zf) = (normal_quantile(hit_rate)?, normal_quantile(false_alarm_rate)?);
    Ok((zh - zf, -(zh + zf) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
}

/// One-way ANOVA F statistic over independent groups.
pub fn oneway_anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: groups.len(),
        });
    }
    for g in groups {
        if g.len() < 2 {
            return Err(StatsError::TooFew {
                needed: 2,
                got: g.len(),
            });
        }
        check_finite(g)?;
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(StatsError::ZeroWithinVariance);
    }
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        ss_between,
        ss_within,
    })
}
