//! Superharmonic majorant W and harmonic function V for i.i.d. walks killed
//! at <= 0, with V/H consistency and the uniform survival bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactdp::{survival_profile, survival_table, KilledWalk, Window};
use crate::numeric::{bisect, log_grid};
use crate::steplaw::{unconditional_pmf, Pmf, StepLaw};
use crate::wienerhopf::RenewalFunction;

/// a, a-bar, b, m of a finite-atom law in closed piecewise-polynomial form.
#[derive(Clone, Debug, Serialize)]
pub struct TailFunctions {
    /// (|v|, p) over negative atoms
    neg: Vec<(f64, f64)>,
    /// (v, p) over positive atoms
    pos: Vec<(f64, f64)>,
}

impl TailFunctions {
    /// a(x) = int_x^inf P(X <= -y) dy
    pub fn a(&self, x: f64) -> f64 {
        self.neg.iter().map(|&(w, p)| p * (w - x).max(0.0)).sum()
    }

    /// a-bar(x) = int_x^inf P(X > y) dy
    pub fn abar(&self, x: f64) -> f64 {
        self.pos.iter().map(|&(v, p)| p * (v - x).max(0.0)).sum()
    }

    /// b(x) = int_x^inf a(y) dy
    pub fn b(&self, x: f64) -> f64 {
        self.neg.iter().map(|&(w, p)| 0.5 * p * (w - x).max(0.0).powi(2)).sum()
    }

    /// m(x) = int_0^x b(y) dy
    pub fn m(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        self.neg.iter().map(|&(w, p)| p * (w.powi(3) - (w - x).max(0.0).powi(3)) / 6.0).sum()
    }

    /// P(X <= -x)
    pub fn neg_cdf(&self, x: f64) -> f64 {
        self.neg.iter().filter(|a| a.0 >= x).map(|a| a.1).sum()
    }

    pub fn max_down(&self) -> f64 {
        self.neg.iter().map(|a| a.0).fold(0.0, f64::max)
    }
}

pub fn tail_functions(law: &StepLaw) -> Result<TailFunctions> {
    law.require_centered()?;
    let neg = law.atoms().iter().filter(|a| a.0 < 0.0).map(|&(v, p)| (-v, p)).collect();
    let pos = law.atoms().iter().filter(|a| a.0 > 0.0).copied().collect();
    Ok(TailFunctions { neg, pos })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RBranch {
    /// R = 3 a(0) / F(-x0)
    Atom,
    /// R = 3 x0, used when P(X <= -x0) = 0
    Bounded,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperharmonicW {
    pub a: f64,
    pub r: f64,
    pub x0: f64,
    pub branch: RBranch,
    pub tail: TailFunctions,
}

impl SuperharmonicW {
    pub fn eval(&self, x: f64) -> f64 {
        x + self.a * self.tail.m(x) + self.r
    }
}

/// R for a given x0.
pub fn select_r(tail: &TailFunctions, x0: f64) -> (f64, RBranch) {
    let f = tail.neg_cdf(x0);
    if f > 0.0 {
        (3.0 * tail.a(0.0) / f, RBranch::Atom)
    } else {
        (3.0 * x0, RBranch::Bounded)
    }
}

/// Delta(x) = E[W(x + X); x + X > 0] - W(x), arranged to avoid cancellation.
pub fn drift<F: Fn(f64) -> f64>(law: &StepLaw, w: F, x: f64) -> f64 {
    let wx = w(x);
    law.atoms()
        .iter()
        .map(|&(v, p)| if x + v > 0.0 { p * (w(x + v) - wx) } else { -p * wx })
        .sum()
}

/// Probe points: log grid on [0, 1e3] plus the atoms and x0, each +-eps.
pub fn probe_grid(law: &StepLaw, extra: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_grid(1e-6, 1e3, 400));
    let eps = 1e-9;
    for &(v, _) in law.atoms() {
        let w = v.abs();
        g.extend([w, w + eps, (w - eps).max(0.0), 0.5 * w]);
    }
    for &e in extra {
        g.extend([e, e + eps, (e - eps).max(0.0)]);
    }
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup();
    g
}

pub const DRIFT_TOL: f64 = 1e-10;

/// W = x + A m(x) + R with A = 2/b(0), x0 solving 2A b(x0/2) = 1 and R from
/// [`select_r`]; superharmonicity is verified on [`probe_grid`].
pub fn build_w(law: &StepLaw) -> Result<SuperharmonicW> {
    let tail = tail_functions(law)?;
    let b0 = tail.b(0.0);
    if b0 <= 0.0 {
        return Err(Error::AssumptionViolated("law has no negative atoms".into()));
    }
    let a = 2.0 / b0;
    let hi = 2.0 * tail.max_down();
    let x0 = bisect(|x| 1.0 - 2.0 * a * tail.b(0.5 * x), 0.0, hi, 1e-14);
    let (r, branch) = select_r(&tail, x0);
    let w = SuperharmonicW { a, r, x0, branch, tail };
    let (x, d) = max_drift(law, &w);
    if d > DRIFT_TOL {
        return Err(Error::SuperharmonicityViolated { x, delta: d });
    }
    Ok(w)
}

/// (argmax, max) of Delta over the probe grid.
pub fn max_drift(law: &StepLaw, w: &SuperharmonicW) -> (f64, f64) {
    probe_grid(law, &[w.x0, 0.5 * w.x0])
        .into_iter()
        .map(|x| (x, drift(law, |y| w.eval(y), x)))
        .fold((0.0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc })
}

/// Certified bracket for V(x) = x - E[x + S(tau_x)].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VEstimate {
    pub x: f64,
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub n: u64,
}

impl VEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Lower bound E[x + S(n); tau_x > n] (monotone in n); upper bound adds the
/// largest possible late overshoot (max_down - 1) for all unabsorbed mass,
/// capped by W(x).
pub fn estimate_v(law: &StepLaw, x: i64, n_max: u64) -> Result<VEstimate> {
    let p = survival_profile(law, x, n_max, Window::default())?;
    let n = n_max as usize;
    let lower = x as f64 + p.cumulative_overshoot()[n];
    let late = (law.max_down() - 1.0).max(0.0);
    let pending = if n_max == 0 { law.max_down() } else { late };
    let mut upper = lower + pending * (p.survival[n] + p.loss[n]);
    if let Ok(w) = build_w(law) {
        upper = upper.min(w.eval(x as f64));
    }
    Ok(VEstimate { x: x as f64, lower, upper, value: 0.5 * (lower + upper), n: n_max })
}

/// V on the integers 0..=x_max.
#[derive(Clone, Debug, Serialize)]
pub struct VTable {
    pub entries: Vec<VEstimate>,
}

impl VTable {
    pub fn build(law: &StepLaw, x_max: i64, n_max: u64) -> Result<Self> {
        let entries = (0..=x_max).map(|x| estimate_v(law, x, n_max)).collect::<Result<_>>()?;
        Ok(VTable { entries })
    }

    pub fn get(&self, x: i64) -> Result<&VEstimate> {
        if x < 0 || x as usize >= self.entries.len() {
            return Err(Error::GridTooCoarse(x as f64));
        }
        Ok(&self.entries[x as usize])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub x: f64,
    pub residual: f64,
    /// what the residual may be from V-truncation alone
    pub bound: f64,
}

/// |E[V(x + X); x + X > 0] - V(x)| with its truncation bound.
pub fn harmonicity_residual(law: &StepLaw, v: &VTable, x: i64) -> Result<Residual> {
    let vx = v.get(x)?;
    let mut s = 0.0;
    let mut bound = vx.half_width();
    for (step, p) in law.int_atoms()? {
        let y = x + step;
        if y > 0 {
            let vy = v.get(y)?;
            s += p * vy.value;
            bound += p * vy.half_width();
        }
    }
    Ok(Residual { x: x as f64, residual: (s - vx.value).abs(), bound })
}

#[derive(Clone, Debug, Serialize)]
pub struct HHarmonicReport {
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
    /// E[H(S(1)); S(1) > 0], which equals P(tau+ < infinity)
    pub e_h_first_step: f64,
    pub e_h_bound: f64,
}

pub fn h_harmonicity_check(law: &StepLaw, h: &RenewalFunction, xs: &[i64]) -> Result<HHarmonicReport> {
    let atoms = law.int_atoms()?;
    let mut residuals = Vec::new();
    for &x in xs {
        let hx = h.eval(x as f64)?;
        let mut s = 0.0;
        let mut bound = hx.upper - hx.lower;
        for &(v, p) in &atoms {
            if x + v > 0 {
                let hy = h.eval((x + v) as f64)?;
                s += p * hy.value;
                bound += p * (hy.upper - hy.lower);
            }
        }
        residuals.push(Residual { x: x as f64, residual: (s - hx.value).abs(), bound });
    }
    let mut e = 0.0;
    let mut eb = 0.0;
    for &(v, p) in &atoms {
        if v > 0 {
            let hv = h.eval(v as f64)?;
            e += p * hv.value;
            eb += p * (hv.upper - hv.lower);
        }
    }
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(HHarmonicReport { residuals, max_residual, e_h_first_step: e, e_h_bound: eb })
}

#[derive(Clone, Debug, Serialize)]
pub struct VhRow {
    pub x: i64,
    pub ratio: f64,
    pub h: f64,
    pub diff: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VhReport {
    pub rows: Vec<VhRow>,
    pub max_diff: f64,
    pub max_bound: f64,
}

/// max |V(x)/V(0) - H(x)| with interval bounds from both sides.
pub fn vh_ratio_check(law: &StepLaw, h: &RenewalFunction, x_max: i64, n_max: u64) -> Result<VhReport> {
    let table = VTable::build(law, x_max, n_max)?;
    let v0 = table.get(0)?;
    let mut rows = Vec::new();
    for x in 0..=x_max {
        let vx = table.get(x)?;
        let ratio = vx.value / v0.value;
        let r_lo = vx.lower / v0.upper;
        let r_hi = vx.upper / v0.lower;
        let hv = h.eval(x as f64)?;
        // truncation on both sides plus a relative allowance for rounding in
        // the renewal recursion
        let bound = 0.5 * (r_hi - r_lo) + 0.5 * (hv.upper - hv.lower) + 1e-13 * hv.value.max(1.0);
        rows.push(VhRow { x, ratio, h: hv.value, diff: (ratio - hv.value).abs(), bound });
    }
    let max_diff = rows.iter().map(|r| r.diff).fold(0.0, f64::max);
    let max_bound = rows.iter().map(|r| r.bound).fold(0.0, f64::max);
    Ok(VhReport { rows, max_diff, max_bound })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformBoundReport {
    /// violations of P(tau_x > n) <= H(x) / E[H(S(n)); S(n) > 0]
    pub h_form_violations: usize,
    pub h_form_checked: usize,
    /// largest P(tau_x > n) E[H(S(n)); S(n) > 0] / H(x); must stay <= 1
    pub h_form_max_ratio: f64,
    /// per n: minimal C with P(tau_x > n) <= C V(x) / sqrt(n)
    pub c_v: Vec<(u64, f64)>,
    /// per n: minimal C with P(tau_x > n) <= C H(x) P(tau_0 > n)
    pub c_h: Vec<(u64, f64)>,
    /// per n: minimal C with P(tau_x > n) <= C (x + 1) / sqrt(n)
    pub c_plus1: Vec<(u64, f64)>,
}

pub fn uniform_bound_check(law: &StepLaw, x_max: i64, ns: &[u64], v: &VTable, h: &RenewalFunction) -> Result<UniformBoundReport> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let rows = survival_table(law, x_max, &ns)?;
    let mut rep = UniformBoundReport {
        h_form_violations: 0,
        h_form_checked: 0,
        h_form_max_ratio: 0.0,
        c_v: Vec::new(),
        c_h: Vec::new(),
        c_plus1: Vec::new(),
    };
    for (row, &n) in rows.iter().zip(&ns) {
        let s = unconditional_pmf(law, n)?;
        let mut e_h = 0.0;
        for (y, p) in s.iter() {
            if y > 0 && p > 0.0 {
                e_h += p * h.eval(y as f64)?.value;
            }
        }
        let sq = (n.max(1) as f64).sqrt();
        let (mut cv, mut ch, mut c1) = (0.0f64, 0.0f64, 0.0f64);
        for x in 0..=x_max {
            let p = row[x as usize];
            let hx = h.eval(x as f64)?.value;
            if e_h > 0.0 {
                let ratio = p * e_h / hx;
                rep.h_form_max_ratio = rep.h_form_max_ratio.max(ratio);
                rep.h_form_checked += 1;
                if ratio > 1.0 + 1e-12 {
                    rep.h_form_violations += 1;
                }
            }
            if n > 0 {
                cv = cv.max(p * sq / v.get(x)?.value);
                ch = ch.max(p / (hx * row[0]));
                c1 = c1.max(p * sq / (x as f64 + 1.0));
            }
        }
        if n > 0 {
            rep.c_v.push((n, cv));
            rep.c_h.push((n, ch));
            rep.c_plus1.push((n, c1));
        }
    }
    Ok(rep)
}

/// Count of (n, y) with P(x + S(n) > y | tau_x > n) < P(S(n) > y), n <= n_max.
pub fn cond_cdf_domination_violations(law: &StepLaw, x: i64, n_max: u64) -> Result<usize> {
    let atoms = law.int_atoms()?;
    let mut walk = KilledWalk::new(law, x, Window::default())?;
    let mut free = Pmf::delta(0);
    let mut bad = 0;
    for _ in 0..n_max {
        walk.step()?;
        free = free.convolve_atoms(&atoms);
        let k = walk.pmf();
        let surv = k.mass();
        if surv <= 0.0 {
            break;
        }
        let lo = free.offset.min(k.offset) - 1;
        let hi = free.top().max(k.top());
        let (mut tk, mut tf) = (0.0, 0.0);
        for y in (lo..=hi).rev() {
            // tails P(. > y) accumulate from the top
            let cond = tk / surv;
            if cond < tf - 1e-12 {
                bad += 1;
            }
            tk += k.at(y);
            tf += free.at(y);
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wienerhopf::ladder_height_law;

    #[test]
    fn tail_function_examples() {
        let t = tail_functions(&StepLaw::ssrw()).unwrap();
        assert_eq!(t.a(0.0), 0.5);
        assert_eq!(t.a(0.25), 0.375);
        assert_eq!(t.a(2.0), 0.0);
        assert_eq!(t.b(0.0), 0.25);
        assert_eq!(t.abar(0.0), t.a(0.0));
        // m(1) = int_0^1 (1-y)^2/4 dy = 1/12
        assert!((t.m(1.0) - 1.0 / 12.0).abs() < 1e-15);
        let k = tail_functions(&StepLaw::left_skew()).unwrap();
        assert!((k.b(0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((k.a(0.0) - k.abar(0.0)).abs() < 1e-15);
        assert!(matches!(tail_functions(&StepLaw::drift()), Err(Error::NonCentered(_))));
    }

    #[test]
    fn tail_functions_by_quadrature() {
        let law = StepLaw::real(&[(-1.5, 0.4), (1.0, 0.6)]).unwrap();
        let t = tail_functions(&law).unwrap();
        let q = crate::numeric::Quadrature::new(10, 200);
        for x in [0.0, 0.3, 0.9, 1.4, 2.0] {
            let b = q.integrate(|y| t.a(y), x, 1.5f64.max(x));
            assert!((b - t.b(x)).abs() < 1e-12);
            let m = q.integrate(|y| t.b(y), 0.0, x);
            assert!((m - t.m(x)).abs() < 1e-12);
        }
        assert!((t.b(0.0) - 0.5 * 0.4 * 2.25).abs() < 1e-15);
    }

    #[test]
    fn w_constants_for_ssrw() {
        let w = build_w(&StepLaw::ssrw()).unwrap();
        assert_eq!(w.a, 8.0);
        assert!((w.x0 - 1.0).abs() < 1e-12);
        assert_eq!(w.branch, RBranch::Atom);
        assert!((w.r - 3.0).abs() < 1e-10);
    }

    #[test]
    fn bounded_branch_selected_past_support() {
        let t = tail_functions(&StepLaw::ssrw()).unwrap();
        assert_eq!(select_r(&t, 1.5), (4.5, RBranch::Bounded));
        assert_eq!(select_r(&t, 1.0).1, RBranch::Atom);
    }

    #[test]
    fn w_is_superharmonic_for_builtins() {
        let real = StepLaw::real(&[(-1.5, 0.4), (1.0, 0.6)]).unwrap();
        for law in [StepLaw::ssrw(), StepLaw::uniform3(), StepLaw::left_skew(), StepLaw::sym2(), real] {
            let w = build_w(&law).unwrap();
            assert!(max_drift(&law, &w).1 <= DRIFT_TOL, "{law}");
        }
    }

    #[test]
    fn v_examples() {
        let s = StepLaw::ssrw();
        for x in 1..=5 {
            let v = estimate_v(&s, x, 50).unwrap();
            assert_eq!((v.lower, v.upper), (x as f64, x as f64));
        }
        let v0 = estimate_v(&s, 0, 50).unwrap();
        assert_eq!(v0.value, 0.5);
        let k = estimate_v(&StepLaw::left_skew(), 1, 50).unwrap();
        assert_eq!(k.value, 1.0);
        let sym = StepLaw::sym2();
        let mut last = 0.0;
        for n in [10, 100, 1000] {
            let v = estimate_v(&sym, 3, n).unwrap();
            assert!(v.lower >= last && v.lower >= 3.0 && v.upper <= build_w(&sym).unwrap().eval(3.0));
            last = v.lower;
        }
    }

    #[test]
    fn harmonicity_examples() {
        let s = StepLaw::ssrw();
        let t = VTable::build(&s, 12, 20).unwrap();
        assert_eq!(harmonicity_residual(&s, &t, 2).unwrap().residual, 0.0);
        assert_eq!(harmonicity_residual(&s, &t, 1).unwrap().residual, 0.0);
        assert!(matches!(harmonicity_residual(&s, &t, 12), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn h_harmonic_and_drift_contrast() {
        let s = StepLaw::ssrw();
        let h = RenewalFunction::new(&ladder_height_law(&s, 10).unwrap(), 40).unwrap();
        let xs: Vec<i64> = (1..=20).collect();
        let r = h_harmonicity_check(&s, &h, &xs).unwrap();
        assert!(r.max_residual < 1e-9);
        assert!((r.e_h_first_step - 1.0).abs() < 1e-12);
        let d = StepLaw::drift();
        let hd = RenewalFunction::new(&ladder_height_law(&d, 2000).unwrap(), 10).unwrap();
        let rd = h_harmonicity_check(&d, &hd, &[1, 2]).unwrap();
        assert!(rd.e_h_first_step + rd.e_h_bound < 1.0);
    }

    #[test]
    fn domination_holds() {
        for law in [StepLaw::ssrw(), StepLaw::sym2()] {
            assert_eq!(cond_cdf_domination_violations(&law, 2, 100).unwrap(), 0);
        }
    }
}
