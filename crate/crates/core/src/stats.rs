//! Sample-mean statistics for the Monte Carlo estimators.

use num_complex::Complex64;

/// Mean and standard error of the mean. A single sample yields an infinite
/// standard error marker rather than a spurious zero.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0, "mean of an empty sample");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Complex sample mean with a scalar standard error combining both
/// components: sqrt((var_re + var_im) / n).
pub fn complex_mean_stderr(values: &[Complex64]) -> (Complex64, f64) {
    let n = values.len();
    assert!(n > 0, "mean of an empty sample");
    let mean = values.iter().sum::<Complex64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = values
        .iter()
        .map(|v| (v - mean).norm_sqr())
        .sum::<f64>()
        / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Standard error of an empirical frequency p over n Bernoulli trials.
pub fn binomial_stderr(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}
