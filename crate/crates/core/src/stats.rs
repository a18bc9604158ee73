//! Goodness-of-fit and interval helpers.

/// Kolmogorov–Smirnov distance between a discrete distribution (sorted atoms
/// with weights) and a continuous CDF. The empirical CDF is compared on both
/// sides of every atom, so ties and lattice supports are handled exactly.
pub fn ks_discrete<F: Fn(f64) -> f64>(atoms: &[(f64, f64)], cdf: F) -> f64 {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let mut acc = 0.0;
    let mut d: f64 = 0.0;
    for &(v, w) in atoms {
        let c = cdf(v);
        d = d.max((acc / total - c).abs());
        acc += w;
        d = d.max((acc / total - c).abs());
    }
    d
}

/// KS distance of a sample against a continuous CDF.
pub fn ks_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match atoms.last_mut() {
            Some(last) if last.0 == v => last.1 += 1.0,
            _ => atoms.push((v, 1.0)),
        }
    }
    ks_discrete(&atoms, cdf)
}

/// Wilson score interval for a binomial proportion at `z` standard errors.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_point_mass_against_uniform() {
        // point mass at 0.5 vs U(0,1): the CDF jumps from 0 to 1 at 0.5
        let d = ks_discrete(&[(0.5, 1.0)], |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_sample_matches_textbook_formula() {
        let xs = [0.1, 0.4, 0.7];
        let cdf = |x: f64| x;
        // max over i of max(i/n - x_i, x_i - (i-1)/n)
        let expected: f64 = [0.1f64 - 0.0, 1.0 / 3.0 - 0.1, 0.4 - 1.0 / 3.0, 2.0 / 3.0 - 0.4, 0.7 - 2.0 / 3.0, 1.0 - 0.7]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        assert!((ks_sample(&xs, cdf) - expected).abs() < 1e-15);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
    }
}
