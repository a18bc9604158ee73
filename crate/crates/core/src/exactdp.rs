//! Exact dynamic programming for lattice walks killed on entering the
//! half-line (-inf, level(n)].
//!
//! Positions are tracked directly: a walk started at `x` killed at `<= 0`
//! uses level 0, a walk from 0 with a moving boundary `g` uses level g(n).
//! The window above is clipped at roughly `x + c * B_n * sqrt(log n)`; every
//! bit of mass pushed over the clip is accumulated in `loss`, so reported
//! survivals are exact up to `[value, value + loss]`.

use std::io::{self, Write};

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::steplaw::{period_shift, unconditional_pmf, Pmf, StepLaw};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Never clip; the support grows by the maximal up-jump each step.
    Full,
    /// Clip at `start + c * B_n * sqrt(max(1, ln n))`, fail if more than
    /// `tol` is lost in total.
    Clip { c: f64, tol: f64 },
}

impl Default for Window {
    fn default() -> Self {
        Window::Clip { c: 12.0, tol: 1e-12 }
    }
}

impl Window {
    fn cap(&self, start: i64, level: i64, b2: f64, n: u64, max_up: i64) -> Option<i64> {
        match *self {
            Window::Full => None,
            Window::Clip { c, .. } => {
                let spread = c * (b2 * (n.max(3) as f64).ln()).sqrt();
                Some(start.max(level) + spread.ceil() as i64 + max_up)
            }
        }
    }

    fn tol(&self) -> f64 {
        match *self {
            Window::Full => f64::INFINITY,
            Window::Clip { tol, .. } => tol,
        }
    }
}

/// A boundary n -> g(n). Non-integer values are floored for the lattice DP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundarySpec {
    Constant { value: f64 },
    /// g(n) = scale * n^exponent + offset
    Power { scale: f64, exponent: f64, offset: f64 },
    /// g(1), g(2), ...; the last value repeats.
    Table { values: Vec<f64> },
}

impl BoundarySpec {
    pub fn constant(value: f64) -> Self {
        BoundarySpec::Constant { value }
    }

    pub fn eval(&self, n: u64) -> f64 {
        match self {
            BoundarySpec::Constant { value } => *value,
            BoundarySpec::Power { scale, exponent, offset } => scale * (n as f64).powf(*exponent) + offset,
            BoundarySpec::Table { values } => {
                if values.is_empty() {
                    0.0
                } else {
                    values[(n.max(1) as usize - 1).min(values.len() - 1)]
                }
            }
        }
    }

    /// Integer kill level; the small guard absorbs powf rounding at exact
    /// integer powers such as 32^0.2.
    pub fn level(&self, n: u64) -> i64 {
        (self.eval(n) + 1e-9).floor() as i64
    }

    /// True when some g(k), k <= n_max, had to be floored.
    pub fn floored(&self, n_max: u64) -> bool {
        (1..=n_max.min(100_000)).any(|k| {
            let g = self.eval(k);
            (g - (g + 1e-9).floor()).abs() > 1e-9
        })
    }

    /// G(n) = max_{k <= n} |g(k)|.
    pub fn running_max(&self, n_max: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n_max as usize + 1);
        out.push(0.0);
        let mut g: f64 = 0.0;
        for k in 1..=n_max {
            g = g.max(self.eval(k).abs());
            out.push(g);
        }
        out
    }

    pub fn id(&self) -> String {
        match self {
            BoundarySpec::Constant { value } => format!("const({value})"),
            BoundarySpec::Power { scale, exponent, offset } => format!("{scale}*n^{exponent}+{offset}"),
            BoundarySpec::Table { values } => format!("table[{}]", values.len()),
        }
    }
}

enum Steps<'a> {
    Iid(Vec<(i64, f64)>, f64),
    Seq(&'a dyn Fn(u64) -> StepLaw),
}

/// Forward stepper for a killed lattice walk.
pub struct KilledWalk<'a> {
    steps: Steps<'a>,
    level: Box<dyn Fn(u64) -> i64 + 'a>,
    window: Window,
    start: i64,
    n: u64,
    b2: f64,
    pmf: Pmf,
    lost: f64,
    last: StepRecord,
}

/// What happened during the most recent step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepRecord {
    pub absorbed: f64,
    /// sum of position * mass over killed sites
    pub absorbed_pos: f64,
    pub level: i64,
    pub lost: f64,
}

impl<'a> KilledWalk<'a> {
    /// Walk x + S(n) killed at <= 0.
    pub fn new(law: &StepLaw, x: i64, window: Window) -> Result<Self> {
        let atoms = law.int_atoms()?;
        Ok(Self::with_parts(Steps::Iid(atoms, law.variance()), Box::new(|_| 0), x, window))
    }

    /// Walk S(n) from 0 killed at S(n) <= g(n).
    pub fn with_boundary(law: &StepLaw, boundary: &'a BoundarySpec, window: Window) -> Result<Self> {
        let atoms = law.int_atoms()?;
        Ok(Self::with_parts(Steps::Iid(atoms, law.variance()), Box::new(move |n| boundary.level(n)), 0, window))
    }

    pub fn with_sequence(
        laws: &'a dyn Fn(u64) -> StepLaw,
        boundary: &'a BoundarySpec,
        window: Window,
    ) -> Result<Self> {
        laws(1).int_atoms()?;
        Ok(Self::with_parts(Steps::Seq(laws), Box::new(move |n| boundary.level(n)), 0, window))
    }

    fn with_parts(steps: Steps<'a>, level: Box<dyn Fn(u64) -> i64 + 'a>, start: i64, window: Window) -> Self {
        KilledWalk { steps, level, window, start, n: 0, b2: 0.0, pmf: Pmf::delta(start), lost: 0.0, last: StepRecord::default() }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Sub-probability law of the surviving positions.
    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    pub fn lost(&self) -> f64 {
        self.lost
    }

    pub fn last(&self) -> StepRecord {
        self.last
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        self.n += 1;
        let n = self.n;
        let owned;
        let (atoms, var): (&[(i64, f64)], f64) = match &self.steps {
            Steps::Iid(a, v) => (a, *v),
            Steps::Seq(f) => {
                let law = f(n);
                owned = law.int_atoms()?;
                (&owned, law.variance())
            }
        };
        self.b2 += var;
        let moved = self.pmf.convolve_atoms(atoms);
        let level = (self.level)(n);
        let max_up = atoms[atoms.len() - 1].0.max(0);
        let cap = self.window.cap(self.start, level, self.b2, n, max_up);
        let mut rec = StepRecord { level, ..Default::default() };
        let lo = level + 1;
        let hi = match cap {
            Some(c) => c.min(moved.top()),
            None => moved.top(),
        };
        for (y, p) in moved.iter() {
            if y <= level {
                rec.absorbed += p;
                rec.absorbed_pos += y as f64 * p;
            } else if y > hi {
                rec.lost += p;
            }
        }
        let probs: Vec<f64> = if hi >= lo { (lo..=hi).map(|y| moved.at(y)).collect() } else { Vec::new() };
        self.pmf = Pmf { offset: lo, probs };
        self.lost += rec.lost;
        if self.lost > self.window.tol() {
            return Err(Error::WindowTooSmall { loss: self.lost, tol: self.window.tol() });
        }
        self.last = rec;
        Ok(rec)
    }

    pub fn run_to(&mut self, n: u64) -> Result<()> {
        while self.n < n {
            self.step()?;
        }
        Ok(())
    }
}

/// Per-step survival, absorption ledger and partial harmonic sums.
#[derive(Clone, Debug, Serialize)]
pub struct KilledProfile {
    pub x0: i64,
    /// P(tau > n), n = 0..=n_max
    pub survival: Vec<f64>,
    /// P(tau = n)
    pub absorbed: Vec<f64>,
    /// E[level(n) - position; tau = n] >= 0
    pub overshoot: Vec<f64>,
    /// E[position; tau = n]
    pub absorbed_pos: Vec<f64>,
    /// E[position - level(n); tau > n]; U_g for moving boundaries
    pub partial_v: Vec<f64>,
    /// cumulative mass lost off the window after step n
    pub loss: Vec<f64>,
    pub levels: Vec<i64>,
    /// killed pmf at n_max
    pub final_pmf: Pmf,
    /// the boundary had non-integer values that were floored
    pub floored: bool,
}

impl KilledProfile {
    fn collect(mut walk: KilledWalk<'_>, x0: i64, level0: i64, n_max: u64) -> Result<Self> {
        let cap = n_max as usize + 1;
        let mut p = KilledProfile {
            x0,
            survival: Vec::with_capacity(cap),
            absorbed: Vec::with_capacity(cap),
            overshoot: Vec::with_capacity(cap),
            absorbed_pos: Vec::with_capacity(cap),
            partial_v: Vec::with_capacity(cap),
            loss: Vec::with_capacity(cap),
            levels: Vec::with_capacity(cap),
            final_pmf: Pmf::empty(),
            floored: false,
        };
        p.survival.push(1.0);
        p.absorbed.push(0.0);
        p.overshoot.push(0.0);
        p.absorbed_pos.push(0.0);
        p.partial_v.push((walk.start - level0) as f64);
        p.loss.push(0.0);
        p.levels.push(level0);
        for _ in 0..n_max {
            let r = walk.step()?;
            let pmf = walk.pmf();
            p.survival.push(pmf.mass());
            p.absorbed.push(r.absorbed);
            p.overshoot.push(r.level as f64 * r.absorbed - r.absorbed_pos);
            p.absorbed_pos.push(r.absorbed_pos);
            p.partial_v.push(pmf.iter().map(|(y, m)| (y - r.level) as f64 * m).sum());
            p.loss.push(walk.lost());
            p.levels.push(r.level);
        }
        p.final_pmf = walk.pmf().clone();
        Ok(p)
    }

    pub fn n_max(&self) -> u64 {
        self.survival.len() as u64 - 1
    }

    /// max_n |survival + absorbed so far + loss - 1|
    pub fn mass_residual(&self) -> f64 {
        let mut cum = 0.0;
        let mut worst: f64 = 0.0;
        for n in 0..self.survival.len() {
            cum += self.absorbed[n];
            worst = worst.max((self.survival[n] + cum + self.loss[n] - 1.0).abs());
        }
        worst
    }

    /// E[-(x + S(tau)); tau <= n] for n = 0..=n_max.
    pub fn cumulative_overshoot(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.overshoot
            .iter()
            .map(|o| {
                acc += o;
                acc
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,survival,absorbed,E_partial_V,U_g,loss_bound")?;
        let cum = self.cumulative_overshoot();
        for n in 0..self.survival.len() {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e}",
                n, self.survival[n], self.absorbed[n], cum[n], self.partial_v[n], self.loss[n]
            )?;
        }
        Ok(())
    }
}

pub fn survival_profile(law: &StepLaw, x: i64, n_max: u64, window: Window) -> Result<KilledProfile> {
    if x < 0 {
        return Err(Error::InvalidArgument(format!("start {x} < 0")));
    }
    KilledProfile::collect(KilledWalk::new(law, x, window)?, x, 0, n_max)
}

/// Profile of T_g = inf{n >= 1 : S(n) <= g(n)} for an i.i.d. lattice walk.
pub fn boundary_profile(law: &StepLaw, boundary: &BoundarySpec, n_max: u64, window: Window) -> Result<KilledProfile> {
    let walk = KilledWalk::with_boundary(law, boundary, window)?;
    let mut p = KilledProfile::collect(walk, 0, boundary.level(0), n_max)?;
    p.floored = boundary.floored(n_max);
    Ok(p)
}

/// Same as [`boundary_profile`] for time-inhomogeneous lattice steps.
pub fn moving_boundary_profile(
    laws: &dyn Fn(u64) -> StepLaw,
    boundary: &BoundarySpec,
    n_max: u64,
    window: Window,
) -> Result<KilledProfile> {
    let walk = KilledWalk::with_sequence(laws, boundary, window)?;
    let mut p = KilledProfile::collect(walk, 0, boundary.level(0), n_max)?;
    p.floored = boundary.floored(n_max);
    Ok(p)
}

pub fn killed_pmf(law: &StepLaw, x: i64, n: u64, window: Window) -> Result<Pmf> {
    let mut w = KilledWalk::new(law, x, window)?;
    w.run_to(n)?;
    Ok(w.pmf().clone())
}

/// Law of x + S(n) given tau_x > n.
pub fn conditional_pmf(law: &StepLaw, x: i64, n: u64) -> Result<Pmf> {
    killed_pmf(law, x, n, Window::default())?.normalized()
}

/// (E[-S(tau_x); tau_x <= n], E[x + S(n); tau_x > n]).
pub fn partial_v(law: &StepLaw, x: i64, n: u64) -> Result<(f64, f64)> {
    let p = survival_profile(law, x, n, Window::default())?;
    let neg_s: f64 = (1..=n as usize).map(|k| p.overshoot[k] + x as f64 * p.absorbed[k]).sum();
    Ok((neg_s, p.partial_v[n as usize]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalLimitError {
    pub error: f64,
    pub argmax: i64,
}

/// sup over y (y - x in D_n) of
/// |sqrt(n) P(x+S(n)=y | tau_x>n) - d y/(sigma^2 sqrt n) exp(-y^2/(2 sigma^2 n))|.
pub fn local_limit_error(law: &StepLaw, x: i64, n: u64) -> Result<LocalLimitError> {
    let per = period_shift(law)?;
    let cond = conditional_pmf(law, x, n)?;
    let s2 = law.variance();
    let nf = n as f64;
    let mut best = LocalLimitError { error: 0.0, argmax: x };
    for (y, p) in cond.iter() {
        if !per.contains(n, y - x) {
            debug_assert!(p == 0.0);
            continue;
        }
        let yf = y as f64;
        let pred = per.d as f64 * yf / (s2 * nf.sqrt()) * (-yf * yf / (2.0 * s2 * nf)).exp();
        let e = (nf.sqrt() * p - pred).abs();
        if e > best.error {
            best = LocalLimitError { error: e, argmax: y };
        }
    }
    Ok(best)
}

/// Delta_j = sup_y |P(S(j+1) >= y) - P(S(j) >= y)|.
pub fn smoothing_delta(law: &StepLaw, j: u64) -> Result<f64> {
    let a = unconditional_pmf(law, j)?;
    let b = a.convolve_atoms(&law.int_atoms()?);
    let lo = a.offset.min(b.offset);
    let hi = a.top().max(b.top());
    let (mut ta, mut tb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    for y in (lo..=hi).rev() {
        ta += a.at(y);
        tb += b.at(y);
        d = d.max((ta - tb).abs());
    }
    Ok(d)
}

/// Backward DP for P(tau_x > n) for all x in 0..=x_max simultaneously;
/// returns one row per requested n (sorted ascending).
pub fn survival_table(law: &StepLaw, x_max: i64, ns: &[u64]) -> Result<Vec<Vec<f64>>> {
    let atoms = law.int_atoms()?;
    let n_top = ns.iter().copied().max().unwrap_or(0);
    let up = atoms[atoms.len() - 1].0.max(0);
    let top = |m: u64| x_max + (n_top - m) as i64 * up;
    let mut s = vec![1.0; top(0) as usize + 1];
    let mut out = Vec::with_capacity(ns.len());
    if ns.contains(&0) {
        out.push(s[..=x_max as usize].to_vec());
    }
    for m in 1..=n_top {
        let t = top(m);
        let mut next = vec![0.0; t as usize + 1];
        for (x, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(v, p) in &atoms {
                let y = x as i64 + v;
                if y > 0 {
                    acc += p * s[y as usize];
                }
            }
            *slot = acc;
        }
        s = next;
        if ns.contains(&m) {
            out.push(s[..=x_max as usize].to_vec());
        }
    }
    Ok(out)
}

/// Exact killed pmfs K_n for n = 0..=n_max in rational arithmetic;
/// entry n is (offset, masses) with offset 1.
pub fn killed_layers_exact(law: &StepLaw, x: i64, n_max: u64) -> Result<Vec<(i64, Vec<BigRational>)>> {
    let atoms = law.exact_int_atoms()?;
    let lo = atoms[0].0;
    let hi = atoms[atoms.len() - 1].0;
    let mut layers = Vec::with_capacity(n_max as usize + 1);
    let mut off = x;
    let mut cur = vec![BigRational::one()];
    layers.push((off, cur.clone()));
    for _ in 0..n_max {
        let mut moved = vec![BigRational::zero(); cur.len() + (hi - lo) as usize];
        for (v, p) in &atoms {
            let s = (v - lo) as usize;
            for (i, q) in cur.iter().enumerate() {
                if !q.is_zero() {
                    moved[s + i] += p * q;
                }
            }
        }
        let moff = off + lo;
        // keep sites >= 1
        let skip = (1 - moff).max(0) as usize;
        cur = moved.into_iter().skip(skip).collect();
        off = moff + skip as i64;
        layers.push((off, cur.clone()));
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ssrw() -> StepLaw {
        StepLaw::ssrw()
    }

    #[test]
    fn survival_examples() {
        let p = survival_profile(&ssrw(), 1, 3, Window::Full).unwrap();
        assert_eq!(p.survival[1], 0.5);
        assert_eq!(p.survival[3], 0.375);
        let p0 = survival_profile(&ssrw(), 0, 3, Window::Full).unwrap();
        assert_eq!(p0.survival[3], 0.25);
        assert!(p.mass_residual() < 1e-15);
    }

    #[test]
    fn conditional_examples() {
        let c = conditional_pmf(&ssrw(), 1, 2).unwrap();
        assert_eq!((c.at(1), c.at(3)), (0.5, 0.5));
        assert_eq!(conditional_pmf(&ssrw(), 1, 1).unwrap().at(2), 1.0);
        let c2 = conditional_pmf(&ssrw(), 2, 2).unwrap();
        assert!((c2.at(2) - 2.0 / 3.0).abs() < 1e-15 && (c2.at(4) - 1.0 / 3.0).abs() < 1e-15);
        let drift_only = StepLaw::lattice(&[(-1, 1.0)]).unwrap();
        assert!(matches!(conditional_pmf(&drift_only, 1, 1), Err(Error::ZeroSurvival)));
    }

    #[test]
    fn partial_v_examples() {
        let (neg, surv) = partial_v(&ssrw(), 0, 1).unwrap();
        assert_eq!(neg, 0.5);
        assert_eq!(surv, 0.5);
        assert_eq!(partial_v(&StepLaw::left_skew(), 3, 0).unwrap(), (0.0, 3.0));
        let mut last = 0.0;
        for n in [1, 5, 25, 125, 625] {
            let (neg, _) = partial_v(&ssrw(), 1, n).unwrap();
            assert!(neg >= last && neg <= 1.0);
            last = neg;
        }
        assert!(last > 0.95);
    }

    #[test]
    fn optional_stopping_identity() {
        for law in [ssrw(), StepLaw::sym2(), StepLaw::left_skew()] {
            for x in [0, 1, 4] {
                let p = survival_profile(&law, x, 300, Window::default()).unwrap();
                let cum = p.cumulative_overshoot();
                for n in 0..=300 {
                    // E[x+S(n); tau>n] = x - E[x+S(tau); tau<=n]
                    assert!((p.partial_v[n] - (x as f64 + cum[n])).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn boundary_examples() {
        let g0 = BoundarySpec::constant(0.0);
        let p = boundary_profile(&ssrw(), &g0, 2, Window::Full).unwrap();
        assert_eq!(p.survival[2], 0.25);
        let g = BoundarySpec::constant(-1.0);
        let pb = boundary_profile(&ssrw(), &g, 3, Window::Full).unwrap();
        let px = survival_profile(&ssrw(), 1, 3, Window::Full).unwrap();
        assert_eq!(pb.survival, px.survival);
        assert_eq!(pb.partial_v, px.partial_v);
        assert_eq!(pb.partial_v[3], 1.0);
        let frac = BoundarySpec::constant(-0.5);
        assert!(boundary_profile(&ssrw(), &frac, 3, Window::Full).unwrap().floored);
    }

    #[test]
    fn local_limit_small_case() {
        let e = local_limit_error(&ssrw(), 1, 2).unwrap();
        // K_2 = {1: 1/4, 3: 1/4} normalised to 1/2 each
        let s2 = 2f64.sqrt();
        let pred = |y: f64| 2.0 * y / s2 * (-y * y / 4.0).exp();
        let want = (s2 * 0.5 - pred(1.0)).abs().max((s2 * 0.5 - pred(3.0)).abs());
        assert!((e.error - want).abs() < 1e-15);
    }

    #[test]
    fn smoothing_examples() {
        let u = StepLaw::uniform3();
        assert!((smoothing_delta(&u, 1).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((smoothing_delta(&u, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for j in [10, 100, 1000] {
            assert!(j as f64 * smoothing_delta(&u, j).unwrap() < 1.0);
        }
    }

    #[test]
    fn survival_table_matches_forward() {
        let law = StepLaw::sym2();
        let rows = survival_table(&law, 6, &[0, 7, 40]).unwrap();
        for x in 0..=6 {
            let p = survival_profile(&law, x, 40, Window::Full).unwrap();
            assert_eq!(rows[0][x as usize], 1.0);
            assert!((rows[1][x as usize] - p.survival[7]).abs() < 1e-14);
            assert!((rows[2][x as usize] - p.survival[40]).abs() < 1e-14);
        }
    }

    #[test]
    fn clip_reports_loss() {
        let p = survival_profile(&ssrw(), 1, 2000, Window::Clip { c: 1.0, tol: 1.0 }).unwrap();
        assert!(p.loss[2000] > 0.0);
        assert!(p.mass_residual() < 1e-12);
        assert!(matches!(
            survival_profile(&ssrw(), 1, 2000, Window::Clip { c: 1.0, tol: 1e-12 }),
            Err(Error::WindowTooSmall { .. })
        ));
    }
}
