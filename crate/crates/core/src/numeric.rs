//! Small numerical toolkit shared by the modules: special functions,
//! binomial weights, quadrature, root bracketing and least squares.

use std::f64::consts::PI;

pub use libm::{erf, erfc};

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Below this, binomial coefficients are formed from exact integers.
const EXACT_BINOM_MAX: u64 = 30;

pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn binom_u64(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut c = 1u64;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// C(n,k) 2^{-n}.
pub fn binom_half(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_BINOM_MAX {
        binom_u64(n, k) as f64 / (1u64 << n) as f64
    } else {
        (ln_binom(n, k) - n as f64 * std::f64::consts::LN_2).exp()
    }
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on [a, b].
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
}

impl Quadrature {
    pub fn new(order: usize, panels: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Quadrature { nodes, weights, panels }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / self.panels as f64;
        let mut s = 0.0;
        for p in 0..self.panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            for (t, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * t);
            }
        }
        s * 0.5 * h
    }
}

/// Bisection assuming f(lo) < 0 <= f(hi). Returns the upper bracket end, so
/// the result always satisfies f >= 0.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest point in [lo, hi] (up to `tol`) where a monotone predicate turns
/// true; `None` if it is false at `hi`.
pub fn threshold<P: Fn(f64) -> bool>(pred: P, lo: f64, hi: f64, tol: f64) -> Option<f64> {
    if !pred(hi) {
        return None;
    }
    if pred(lo) {
        return Some(lo);
    }
    Some(bisect(|x| if pred(x) { 1.0 } else { -1.0 }, lo, hi, tol))
}

/// Ordinary least squares y = a + b x; returns (a, b).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Log-spaced grid from `lo` to `hi` (inclusive, both > 0).
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binomial_switchover_agrees() {
        for n in 20..=30u64 {
            for k in 0..=n {
                let exact = binom_half(n, k);
                let lg = (ln_binom(n, k) - n as f64 * std::f64::consts::LN_2).exp();
                assert_relative_eq!(exact, lg, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn erf_reference_points() {
        // values from high-precision tables
        assert_relative_eq!(erf(0.5), 0.520_499_877_813_046_5, max_relative = 1e-15);
        assert_relative_eq!(erf(1.0), 0.842_700_792_949_714_9, max_relative = 1e-15);
        assert_relative_eq!(erfc(3.0), 2.209_049_699_858_544e-5, max_relative = 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = Quadrature::new(8, 1);
        // degree 15 is exact with 8 nodes
        let v = q.integrate(|x| x.powi(15) + 3.0 * x.powi(4), 0.0, 1.0);
        assert_relative_eq!(v, 1.0 / 16.0 + 3.0 / 5.0, max_relative = 1e-14);
        let (_, w) = gauss_legendre(21);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn threshold_finds_monotone_switch() {
        let t = threshold(|x| x * x >= 2.0, 0.0, 4.0, 1e-14).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-12 && t * t >= 2.0);
        assert!(threshold(|x| x > 10.0, 0.0, 4.0, 1e-12).is_none());
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (a, b) = linear_fit(&xs, &ys);
        assert_relative_eq!(a, 2.0, epsilon = 1e-12);
        assert_relative_eq!(b, -0.5, epsilon = 1e-12);
    }
}
