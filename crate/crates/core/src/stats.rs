//! Small statistical helpers: Kolmogorov–Smirnov tests and least-squares fits.

/// Two-sample Kolmogorov–Smirnov statistic (max distance between the two
/// empirical CDFs). Ignores NaNs by total ordering; inputs need not be sorted.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut max_diff = 0.0f64;
    while ia < a.len() && ib < b.len() {
        let t = a[ia].min(b[ib]);
        while ia < a.len() && a[ia] <= t {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= t {
            ib += 1;
        }
        let diff = (ia as f64 / na - ib as f64 / nb).abs();
        max_diff = max_diff.max(diff);
    }
    max_diff
}

/// One-sample Kolmogorov–Smirnov statistic against a reference CDF.
pub fn ks_statistic_against_cdf<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut max_diff = 0.0f64;
    for (k, &x) in s.iter().enumerate() {
        let f = cdf(x);
        let lo = k as f64 / n;
        let hi = (k + 1) as f64 / n;
        max_diff = max_diff.max((f - lo).abs()).max((hi - f).abs());
    }
    max_diff
}

/// Asymptotic critical value for the two-sample statistic at the given
/// significance level: c(alpha) * sqrt((n+m)/(n*m)) with
/// c(alpha) = sqrt(ln(2/alpha)/2).
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = ((2.0 / alpha).ln() / 2.0).sqrt();
    c * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// Asymptotic one-sample critical value: c(alpha)/sqrt(n).
pub fn ks_critical_value_one_sample(n: usize, alpha: f64) -> f64 {
    let c = ((2.0 / alpha).ln() / 2.0).sqrt();
    c / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Two-sample KS test at the given significance level.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsOutcome {
    let statistic = ks_statistic(a, b);
    let critical = ks_critical_value(a.len(), b.len(), alpha);
    KsOutcome {
        statistic,
        critical,
        pass: statistic < critical,
    }
}

/// Least-squares slope of y on x through the origin: Σxy / Σx².
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|a| a * a).sum();
    num / den
}

/// Ordinary least squares: returns (slope, intercept) of y on x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
