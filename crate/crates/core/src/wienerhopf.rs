//! Truncated power series, Spitzer/Wiener–Hopf identities, path duality,
//! the space–time factorisation on the lattice, ladder heights and the
//! renewal function H.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactdp::{KilledWalk, Window};
use crate::numeric::{binom_half, linear_fit, log_grid};
use crate::steplaw::{Pmf, StepLaw};

/// Coefficients c_0..c_N of a power series in u.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedSeries {
    pub coeffs: Vec<f64>,
}

impl TruncatedSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least c_0");
        TruncatedSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(vec![0.0; order + 1])
    }

    pub fn one(order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = 1.0;
        Self::new(c)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        Self::new((0..=n).map(|i| self.coeffs[i] + other.coeffs[i]).collect())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// 1 - self
    pub fn one_minus(&self) -> Self {
        let mut c: Vec<f64> = self.coeffs.iter().map(|c| -c).collect();
        c[0] += 1.0;
        Self::new(c)
    }

    /// Truncated Cauchy product; the order is the smaller of the two.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let mut c = vec![0.0; n + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(n + 1) {
            for (j, b) in other.coeffs.iter().enumerate().take(n + 1 - i) {
                c[i + j] += a * b;
            }
        }
        Self::new(c)
    }

    /// exp via f' = g' f.
    pub fn exp(&self) -> Self {
        let g = &self.coeffs;
        let n = self.order();
        let mut f = vec![0.0; n + 1];
        f[0] = g[0].exp();
        for m in 1..=n {
            let mut s = 0.0;
            for k in 1..=m {
                s += k as f64 * g[k] * f[m - k];
            }
            f[m] = s / m as f64;
        }
        Self::new(f)
    }

    /// log via g' = f'/f; needs c_0 > 0.
    pub fn log(&self) -> Result<Self> {
        let f = &self.coeffs;
        if f[0] <= 0.0 {
            return Err(Error::SeriesDomain(f[0]));
        }
        let n = self.order();
        let mut g = vec![0.0; n + 1];
        g[0] = f[0].ln();
        for m in 1..=n {
            let mut s = 0.0;
            for k in 1..m {
                s += k as f64 * g[k] * f[m - k];
            }
            g[m] = (f[m] - s / m as f64) / f[0];
        }
        Ok(Self::new(g))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.order().min(other.order());
        (0..=n).map(|i| (self.coeffs[i] - other.coeffs[i]).abs()).fold(0.0, f64::max)
    }
}

pub fn series_exp(a: &TruncatedSeries) -> TruncatedSeries {
    a.exp()
}

pub fn series_log(a: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.log()
}

pub fn series_mul(a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
    a.mul(b)
}

fn spitzer(probs: &[f64]) -> TruncatedSeries {
    let mut c = vec![0.0; probs.len() + 1];
    for (i, p) in probs.iter().enumerate() {
        let n = i + 1;
        c[n] = -p / n as f64;
    }
    TruncatedSeries::new(c).exp().one_minus()
}

/// E[u^{tau_0}] = 1 - exp(-sum u^n/n P(S(n) <= 0)); `neg_probs[i]` is P(S(i+1) <= 0).
pub fn spitzer_tau0(neg_probs: &[f64]) -> TruncatedSeries {
    spitzer(neg_probs)
}

/// E[u^{tau+}] = 1 - exp(-sum u^n/n P(S(n) > 0)); `pos_probs[i]` is P(S(i+1) > 0).
pub fn spitzer_tauplus(pos_probs: &[f64]) -> TruncatedSeries {
    spitzer(pos_probs)
}

/// (P(S(n) <= 0), P(S(n) > 0)) for n = 1..=order.
pub fn sign_probs(law: &StepLaw, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let atoms = law.int_atoms()?;
    let mut p = Pmf::delta(0);
    let (mut neg, mut pos) = (Vec::with_capacity(order), Vec::with_capacity(order));
    for _ in 0..order {
        p = p.convolve_atoms(&atoms);
        let up = p.tail_gt(0);
        pos.push(up);
        neg.push(p.iter().filter(|&(y, _)| y <= 0).map(|(_, m)| m).sum());
    }
    Ok((neg, pos))
}

/// max_n |[u^n] (1 - f0)(1 - fp) - [u^n](1 - u)|.
pub fn wh_identity_residual(f0: &TruncatedSeries, fp: &TruncatedSeries) -> f64 {
    let prod = f0.one_minus().mul(&fp.one_minus());
    let mut target = vec![0.0; prod.order() + 1];
    target[0] = 1.0;
    if target.len() > 1 {
        target[1] = -1.0;
    }
    prod.max_abs_diff(&TruncatedSeries::new(target))
}

/// E[s^{tau_0}] = 1 - sqrt(1 - s) for symmetric walks with continuous steps.
pub fn symmetric_continuous_tau0(order: usize) -> TruncatedSeries {
    let mut c = vec![0.0; order + 1];
    for (n, cn) in c.iter_mut().enumerate().skip(1) {
        *cn = binom_half(2 * n as u64, n as u64) / (2 * n - 1) as f64;
    }
    TruncatedSeries::new(c)
}

/// P(tau > n) = 1 - sum_{k <= n} c_k from a first-passage series.
pub fn survival_coefficients(f: &TruncatedSeries) -> Vec<f64> {
    let mut acc = 0.0;
    f.coeffs
        .iter()
        .map(|c| {
            acc += c;
            1.0 - acc
        })
        .collect()
}

/// Layers of a walk from 0 killed either on S <= 0 (`kill_positive` false,
/// i.e. tau_0) or on S > 0 (tau+). Returns (absorbed[n], surviving[n]).
fn stopped_layers(atoms: &[(i64, f64)], kill_positive: bool, n_max: usize) -> (Vec<Pmf>, Vec<Pmf>) {
    let mut absorbed = vec![Pmf::empty()];
    let mut alive = vec![Pmf::delta(0)];
    for n in 1..=n_max {
        let moved = alive[n - 1].convolve_atoms(atoms);
        let (mut a, mut s) = (moved.clone(), moved);
        for (y, pa) in a.probs.iter_mut().enumerate() {
            let pos = a.offset + y as i64 > 0;
            if pos != kill_positive {
                *pa = 0.0;
            }
        }
        for (y, ps) in s.probs.iter_mut().enumerate() {
            let pos = s.offset + y as i64 > 0;
            if pos == kill_positive {
                *ps = 0.0;
            }
        }
        absorbed.push(a);
        alive.push(s);
    }
    (absorbed, alive)
}

/// P(tau+ = n) for n = 0..=n_max by direct DP.
pub fn first_ascent_pmf(law: &StepLaw, n_max: usize) -> Result<Vec<f64>> {
    let (a, _) = stopped_layers(&law.int_atoms()?, true, n_max);
    Ok(a.iter().map(Pmf::mass).collect())
}

/// P(tau_0 = n) for n = 0..=n_max by direct DP.
pub fn first_descent_pmf(law: &StepLaw, n_max: usize) -> Result<Vec<f64>> {
    let (a, _) = stopped_layers(&law.int_atoms()?, false, n_max);
    Ok(a.iter().map(Pmf::mass).collect())
}

fn add_into(acc: &mut Vec<f64>, acc_off: i64, p: &Pmf, w: f64) {
    for (y, m) in p.iter() {
        let i = (y - acc_off) as usize;
        if i >= acc.len() {
            acc.resize(i + 1, 0.0);
        }
        acc[i] += w * m;
    }
}

/// Path-wise duality: n is a strict ascending ladder epoch of the path iff
/// every suffix sum X_n + ... + X_k (k <= n) is positive; and the ladder
/// renewal mass at n equals P(tau_0 > n). Exhaustive over all paths.
pub fn duality_path_check(law: &StepLaw, n_max: usize) -> Result<bool> {
    let atoms = law.atoms();
    let paths = (atoms.len() as u128).checked_pow(n_max as u32).unwrap_or(u128::MAX);
    if paths > 10_000_000 {
        return Err(Error::EnumerationTooLarge(paths));
    }
    struct Acc {
        ok: bool,
        ladder: Vec<f64>,
        positive: Vec<f64>,
    }
    fn rec(atoms: &[(f64, f64)], steps: &mut Vec<f64>, sums: &mut Vec<f64>, w: f64, n_max: usize, acc: &mut Acc) {
        let n = steps.len();
        if n > 0 {
            let s = sums[n];
            let prev_max = sums[..n].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ladder = s > prev_max;
            let mut suffix = 0.0;
            let mut all_pos = true;
            for k in (0..n).rev() {
                suffix += steps[k];
                if suffix <= 0.0 {
                    all_pos = false;
                    break;
                }
            }
            if ladder != all_pos {
                acc.ok = false;
            }
            if ladder {
                acc.ladder[n] += w;
            }
            if sums[1..=n].iter().all(|&v| v > 0.0) {
                acc.positive[n] += w;
            }
        }
        if n == n_max {
            return;
        }
        for &(v, p) in atoms {
            steps.push(v);
            sums.push(sums[n] + v);
            rec(atoms, steps, sums, w * p, n_max, acc);
            steps.pop();
            sums.pop();
        }
    }
    let mut acc = Acc { ok: true, ladder: vec![0.0; n_max + 1], positive: vec![0.0; n_max + 1] };
    rec(atoms, &mut Vec::new(), &mut vec![0.0], 1.0, n_max, &mut acc);
    let weights_ok = (1..=n_max).all(|n| (acc.ladder[n] - acc.positive[n]).abs() < 1e-12);
    Ok(acc.ok && weights_ok)
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorisationReport {
    pub u: f64,
    pub order: usize,
    /// max_y |(delta_0 - uF)(y) - ((delta_0 - H_eta) * (delta_0 - H_tau))(y)| with truncated H's
    pub discrepancy: f64,
    /// bound on the contribution of the omitted layers n > order
    pub defect: f64,
    /// discrepancy - defect; the identity holds when this is <= 0 up to rounding
    pub excess: f64,
    /// max over layers n <= order of the coefficient identity in u^n
    pub layer_residual: f64,
    /// max over layers of (delta_0 - H_eta) * G_tau - delta_0
    pub green_residual: f64,
}

/// Space–time factorisation delta_0 - uF = (delta_0 - H_{eta,u}) * (delta_0 - H_{tau,u})
/// for tau = tau_0 (weak descent) and its dual eta = tau+ (strict ascent),
/// checked on the lattice, both u-weighted and layer by layer in u^n.
pub fn dual_factorisation_check(law: &StepLaw, u: f64, order: usize, window: i64) -> Result<FactorisationReport> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("u = {u} not in [0, 1)")));
    }
    let atoms = law.int_atoms()?;
    let reach = order as i64 * atoms.iter().map(|a| a.0.abs()).max().unwrap_or(0);
    if reach > window {
        return Err(Error::WindowTooSmall { loss: f64::NAN, tol: window as f64 });
    }
    let (a, _) = stopped_layers(&atoms, true, order);
    let (b, g) = stopped_layers(&atoms, false, order);

    // u-weighted identity
    let off = -2 * reach - 1;
    let mut lhs = vec![0.0; (4 * reach + 3) as usize];
    let zero = (-off) as usize;
    lhs[zero] += 1.0;
    for &(v, p) in &atoms {
        lhs[(v - off) as usize] -= u * p;
    }
    let mut at = Vec::new();
    let mut bt = Vec::new();
    let mut rhs = vec![0.0; lhs.len()];
    rhs[zero] += 1.0;
    let mut un = 1.0;
    for n in 1..=order {
        un *= u;
        add_into(&mut at, off, &a[n], un);
        add_into(&mut bt, off, &b[n], un);
    }
    at.resize(lhs.len(), 0.0);
    bt.resize(lhs.len(), 0.0);
    let at_p = Pmf { offset: off, probs: at };
    let bt_p = Pmf { offset: off, probs: bt };
    for i in 0..rhs.len() {
        rhs[i] -= at_p.probs[i] + bt_p.probs[i];
    }
    let cross = crate::steplaw::convolve(&at_p, &bt_p);
    for (y, m) in cross.iter() {
        let i = y - off;
        if i >= 0 && (i as usize) < rhs.len() {
            rhs[i as usize] += m;
        } else if m.abs() > 0.0 {
            return Err(Error::WindowTooSmall { loss: m, tol: 0.0 });
        }
    }
    let discrepancy = lhs.iter().zip(&rhs).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max);
    let tail_a: f64 = 1.0 - a.iter().map(Pmf::mass).sum::<f64>();
    let tail_b: f64 = 1.0 - b.iter().map(Pmf::mass).sum::<f64>();
    let u_next = u.powi(order as i32 + 1);
    let defect = 2.0 * u_next * (tail_a.max(0.0) + tail_b.max(0.0));

    // exact layer identities
    let mut layer_residual: f64 = 0.0;
    let mut green_residual: f64 = 0.0;
    for n in 1..=order {
        let mut acc = vec![0.0; lhs.len()];
        if n == 1 {
            for &(v, p) in &atoms {
                acc[(v - off) as usize] -= p;
            }
        }
        let mut rhs_n = vec![0.0; lhs.len()];
        add_into(&mut rhs_n, off, &a[n], -1.0);
        add_into(&mut rhs_n, off, &b[n], -1.0);
        let mut green = vec![0.0; lhs.len()];
        add_into(&mut green, off, &g[n], 1.0);
        for k in 1..n {
            add_into(&mut rhs_n, off, &crate::steplaw::convolve(&a[k], &b[n - k]), 1.0);
        }
        for k in 1..=n {
            add_into(&mut green, off, &crate::steplaw::convolve(&a[k], &g[n - k]), -1.0);
        }
        for i in 0..acc.len() {
            layer_residual = layer_residual.max((acc[i] - rhs_n[i]).abs());
            green_residual = green_residual.max(green[i].abs());
        }
    }
    Ok(FactorisationReport {
        u,
        order,
        discrepancy,
        defect,
        excess: discrepancy - defect,
        layer_residual,
        green_residual,
    })
}

/// Law of the first weak descending ladder height magnitude -S(tau_0).
#[derive(Clone, Debug, Serialize)]
pub struct LadderLaw {
    /// pmf[k] = P(-S(tau_0) = k, tau_0 <= horizon)
    pub pmf: Vec<f64>,
    pub horizon: u64,
    /// unobserved mass P(tau_0 > horizon) plus window loss
    pub defect: f64,
    /// largest downward jump of the step law
    pub max_down: i64,
}

pub fn ladder_height_law(law: &StepLaw, horizon: u64) -> Result<LadderLaw> {
    let max_down = law.max_down() as i64;
    let mut walk = KilledWalk::new(law, 0, Window::default())?;
    let mut pmf = vec![0.0; max_down as usize + 1];
    let atoms = law.int_atoms()?;
    for _ in 0..horizon {
        // absorbed sites are recovered from the pre-step law
        let before = walk.pmf().clone();
        let moved = before.convolve_atoms(&atoms);
        walk.step()?;
        for (y, m) in moved.iter() {
            if y <= 0 && m > 0.0 {
                pmf[(-y) as usize] += m;
            }
        }
    }
    let defect = walk.pmf().mass() + walk.lost();
    Ok(LadderLaw { pmf, horizon, defect, max_down })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenewalValue {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// H(x) = 1 + sum_{m >= 1} P(chi_1 + ... + chi_m < x) on the integers,
/// bracketed by placing the unobserved ladder mass at the smallest (upper
/// bound) and largest (lower bound) possible magnitude.
#[derive(Clone, Debug, Serialize)]
pub struct RenewalFunction {
    /// cumulative sums: h_lo[x], h_hi[x] = H(x) for integer x
    h_lo: Vec<f64>,
    h_hi: Vec<f64>,
}

fn renewal_cumsum(q: &[f64], x_max: usize) -> Result<Vec<f64>> {
    let q0 = q[0];
    if q0 >= 1.0 - 1e-15 {
        return Err(Error::NonSummable);
    }
    let mut u = vec![0.0; x_max + 1];
    u[0] = 1.0 / (1.0 - q0);
    for k in 1..=x_max {
        let mut s = 0.0;
        for j in 1..=k.min(q.len() - 1) {
            s += q[j] * u[k - j];
        }
        u[k] = s / (1.0 - q0);
    }
    let mut h = vec![1.0; x_max + 1];
    let mut acc = 0.0;
    for x in 1..=x_max {
        acc += u[x - 1];
        h[x] = acc;
    }
    Ok(h)
}

impl RenewalFunction {
    pub fn new(ladder: &LadderLaw, x_max: usize) -> Result<Self> {
        let mut hi_q = ladder.pmf.clone();
        hi_q[0] += ladder.defect;
        let mut lo_q = ladder.pmf.clone();
        // a ladder epoch after the first step overshoots by at most max_down - 1
        let late = (ladder.max_down - 1).max(0) as usize;
        lo_q[late] += ladder.defect;
        Ok(RenewalFunction { h_lo: renewal_cumsum(&lo_q, x_max)?, h_hi: renewal_cumsum(&hi_q, x_max)? })
    }

    pub fn x_max(&self) -> usize {
        self.h_lo.len() - 1
    }

    pub fn eval(&self, x: f64) -> Result<RenewalValue> {
        if x < 0.0 {
            return Ok(RenewalValue { value: 0.0, lower: 0.0, upper: 0.0 });
        }
        // H(x) = sum_{k < x} u(k): integer index ceil(x)
        let i = x.ceil() as usize;
        if i > self.x_max() {
            return Err(Error::GridTooCoarse(x));
        }
        let (lower, upper) = (self.h_lo[i], self.h_hi[i]);
        Ok(RenewalValue { value: 0.5 * (lower + upper), lower, upper })
    }
}

pub fn renewal_h(ladder: &LadderLaw, x: f64) -> Result<RenewalValue> {
    RenewalFunction::new(ladder, x.max(0.0).ceil() as usize)?.eval(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct RhoFit {
    pub rho_hat: f64,
    pub slope: f64,
    /// Cesaro average of P(S(n) > 0), an independent estimate of rho
    pub cesaro: f64,
    /// l(n_hi) / l(n_hi / 2) with l(n) = P(tau_0 > n) n^{1 - rho_hat}
    pub slow_variation_ratio: f64,
    pub n_lo: u64,
    pub n_hi: u64,
}

/// Log-log fit of P(tau_0 > n) = n^{rho - 1} l(n); `survival[n]` indexed by n.
pub fn rho_tail_fit(survival: &[f64], pos_probs: &[f64]) -> Result<RhoFit> {
    let n_hi = survival.len() as u64 - 1;
    let n_lo = 10u64;
    if n_hi < 1000 * n_lo {
        return Err(Error::InsufficientRange(format!("need n up to {}, have {n_hi}", 1000 * n_lo)));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for t in log_grid(n_lo as f64, n_hi as f64, 80) {
        let n = t.round() as usize;
        if survival[n] > 0.0 {
            xs.push((n as f64).ln());
            ys.push(survival[n].ln());
        }
    }
    let (_, slope) = linear_fit(&xs, &ys);
    let rho_hat = 1.0 + slope;
    let cesaro = pos_probs.iter().sum::<f64>() / pos_probs.len() as f64;
    let ell = |n: u64| survival[n as usize] * (n as f64).powf(1.0 - rho_hat);
    Ok(RhoFit { rho_hat, slope, cesaro, slow_variation_ratio: ell(n_hi) / ell(n_hi / 2), n_lo, n_hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn series_basics() {
        let z = TruncatedSeries::zero(5);
        assert_eq!(z.exp(), TruncatedSeries::one(5));
        let a = TruncatedSeries::new(vec![1.0, -1.0, 0.0, 0.0]);
        let b = TruncatedSeries::new(vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(a.mul(&b).coeffs, vec![1.0, 0.0, -1.0, 0.0]);
        assert!(matches!(TruncatedSeries::new(vec![0.0, 1.0]).log(), Err(Error::SeriesDomain(_))));
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c: Vec<f64> = (0..=50).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = TruncatedSeries::new(c);
            let back = a.exp().log().unwrap();
            assert!(back.max_abs_diff(&a) < 1e-12 * a.exp().coeffs.iter().fold(1.0, |m: f64, c| m.max(c.abs())));
        }
    }

    #[test]
    fn spitzer_small_orders() {
        let (neg, pos) = sign_probs(&StepLaw::ssrw(), 4).unwrap();
        let f0 = spitzer_tau0(&neg);
        assert!((f0.coeffs[1] - 0.5).abs() < 1e-15 && (f0.coeffs[2] - 0.25).abs() < 1e-15);
        let fp = spitzer_tauplus(&pos);
        assert!((fp.coeffs[1] - 0.5).abs() < 1e-15);
        assert!(spitzer_tau0(&[0.0; 6]).coeffs.iter().all(|&c| c == 0.0));
        let all = spitzer_tauplus(&[1.0; 6]);
        assert!((all.coeffs[1] - 1.0).abs() < 1e-15 && all.coeffs[2..].iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn tauplus_matches_ascent_dp() {
        let law = StepLaw::left_skew();
        let (_, pos) = sign_probs(&law, 100).unwrap();
        let fp = spitzer_tauplus(&pos);
        let dp = first_ascent_pmf(&law, 100).unwrap();
        for n in 1..=100 {
            assert!((fp.coeffs[n] - dp[n]).abs() < 1e-10);
        }
    }

    #[test]
    fn broken_inputs_give_unit_residual() {
        let z = TruncatedSeries::zero(10);
        assert_eq!(wh_identity_residual(&z, &z), 1.0);
    }

    #[test]
    fn symmetric_continuous_closed_form() {
        let f = symmetric_continuous_tau0(100);
        let surv = survival_coefficients(&f);
        assert!((surv[1] - 0.5).abs() < 1e-15 && (surv[2] - 0.375).abs() < 1e-15);
        for n in 1..=100u64 {
            assert!((surv[n as usize] - binom_half(2 * n, n)).abs() < 1e-12);
        }
        // (1 - f)^2 = 1 - s
        let g = f.one_minus();
        let sq = g.mul(&g);
        let mut target = vec![0.0; 101];
        target[0] = 1.0;
        target[1] = -1.0;
        assert!(sq.max_abs_diff(&TruncatedSeries::new(target)) < 1e-12);
    }

    #[test]
    fn duality_examples() {
        assert!(duality_path_check(&StepLaw::ssrw(), 12).unwrap());
        assert!(duality_path_check(&StepLaw::uniform3(), 8).unwrap());
        assert!(duality_path_check(&StepLaw::lattice(&[(1, 1.0)]).unwrap(), 10).unwrap());
        assert!(matches!(duality_path_check(&StepLaw::uniform3(), 20), Err(Error::EnumerationTooLarge(_))));
    }

    #[test]
    fn factorisation_near_zero_u() {
        let r = dual_factorisation_check(&StepLaw::ssrw(), 0.0, 10, 100).unwrap();
        assert_eq!(r.discrepancy, 0.0);
        assert!(r.layer_residual < 1e-15 && r.green_residual < 1e-15);
    }

    #[test]
    fn ladder_examples() {
        let l = ladder_height_law(&StepLaw::ssrw(), 2000).unwrap();
        assert!((l.pmf[0] + l.defect - 0.5).abs() < 1e-12);
        assert_eq!(l.pmf[1], 0.5);
        let k = ladder_height_law(&StepLaw::left_skew(), 500).unwrap();
        assert_eq!(k.pmf.len(), 2);
        assert!((k.pmf[1] - 2.0 / 3.0).abs() < 1e-15);
        let k2 = ladder_height_law(&StepLaw::left_skew(), 5000).unwrap();
        assert!(k2.defect < k.defect);
    }

    #[test]
    fn renewal_examples() {
        let l = ladder_height_law(&StepLaw::ssrw(), 100).unwrap();
        let h = RenewalFunction::new(&l, 10).unwrap();
        assert_eq!(h.eval(0.0).unwrap().value, 1.0);
        let h1 = h.eval(1.0).unwrap();
        assert!((h1.lower - 2.0).abs() < 1e-12 && (h1.upper - 2.0).abs() < 1e-12);
        assert!((h.eval(2.0).unwrap().value - 4.0).abs() < 1e-12);
        let stuck = LadderLaw { pmf: vec![1.0], horizon: 1, defect: 0.0, max_down: 1 };
        assert!(matches!(RenewalFunction::new(&stuck, 3), Err(Error::NonSummable)));
    }

    #[test]
    fn rho_needs_three_decades() {
        assert!(matches!(rho_tail_fit(&[1.0; 500], &[0.5; 500]), Err(Error::InsufficientRange(_))));
        let surv: Vec<f64> = (0..=10_000).map(|n| 1.0 / (1.0 + n as f64).sqrt()).collect();
        let fit = rho_tail_fit(&surv, &[0.5; 100]).unwrap();
        assert!((fit.rho_hat - 0.5).abs() < 0.02);
        assert_eq!(fit.cesaro, 0.5);
    }
}
