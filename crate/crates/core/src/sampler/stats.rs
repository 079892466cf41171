//! Summary statistics for sampler output series.

/// Pairs of autocovariance lags to examine before giving up; beyond this the
/// remaining mass cannot move the estimate for chains of realistic length.
const MAX_LAG_PAIRS: usize = 128;

/// Sample mean and unbiased variance; variance is zero for fewer than two
/// points.
pub fn mean_and_variance(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Effective sample size of a single chain via the initial positive sequence
/// estimator: sum autocovariances in adjacent-lag pairs while the pair sums
/// stay positive, enforce that they decrease, and divide the chain length by
/// the resulting autocorrelation time. Clamped to [1, n]; a (numerically)
/// constant series counts as one effective draw.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n == 0 {
        return 0.0;
    }
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let gamma = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - lag {
            acc += (series[i] - mean) * (series[i + lag] - mean);
        }
        acc / n as f64
    };
    let g0 = gamma(0);
    if g0 < 1e-14 {
        return 1.0;
    }
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    for k in 0..MAX_LAG_PAIRS {
        let (even, odd) = (2 * k, 2 * k + 1);
        if odd >= n {
            break;
        }
        let mut pair = gamma(even) + gamma(odd);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        prev = pair;
        sum_pairs += pair / g0;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1e-12);
    (n as f64 / tau).clamp(1.0, n as f64)
}
