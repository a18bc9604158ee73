//! Time-homogeneous Markov chains on the grid h*Z with state-dependent,
//! centered, unit-variance jumps: kernel validation against a majorant Y,
//! the superharmonic W, V(x) = x - E_x X(tau), survival and the Doob chain.
//!
//! States and jumps are kept in integer ticks of size `h`.

use std::f64::consts::FRAC_2_PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, log_grid, std_normal_cdf, threshold, Quadrature};
use crate::oracles::meander_square_cdf;
use crate::rng::{trial_rng, AtomSampler};
use crate::stats::{ks_discrete, ks_sample, wilson};
use crate::steplaw::{Pmf, StepLaw};

/// Jump law x -> xi(x), in ticks, chosen by region.
#[derive(Clone, Debug, Serialize)]
pub struct ChainKernel {
    name: String,
    h: f64,
    /// jump laws (tick offset, prob), sorted by offset
    regimes: Vec<Vec<(i64, f64)>>,
    /// regime index is floor(x / band) mod regimes.len()
    band: f64,
}

/// Scale s with sum_j (jh)^2 w_j = 1 for w_j proportional to exp(-(jh)^2/(2 s^2)).
fn discretized_normal(h: f64, half_width: i64) -> Vec<(i64, f64)> {
    let law = |s: f64| {
        let w: Vec<f64> = (-half_width..=half_width).map(|j| (-(j as f64 * h).powi(2) / (2.0 * s * s)).exp()).collect();
        let z: f64 = w.iter().sum();
        (-half_width..=half_width).zip(w).map(|(j, p)| (j, p / z)).collect::<Vec<_>>()
    };
    let var = |s: f64| law(s).iter().map(|&(j, p)| (j as f64 * h).powi(2) * p).sum::<f64>();
    let s = bisect(|s| var(s) - 1.0, 0.5, 2.0, 1e-15);
    law(s)
}

impl ChainKernel {
    pub fn new(name: &str, h: f64, band: f64, regimes: Vec<Vec<(i64, f64)>>) -> Result<Self> {
        if !(h > 0.0) || !(band > 0.0) || regimes.is_empty() || regimes.iter().any(|r| r.is_empty()) {
            return Err(Error::InvalidArgument("kernel needs h > 0, band > 0 and non-empty regimes".into()));
        }
        let regimes = regimes
            .into_iter()
            .map(|mut r| {
                r.sort_by_key(|a| a.0);
                r
            })
            .collect();
        Ok(ChainKernel { name: name.into(), h, regimes, band })
    }

    /// An i.i.d. lattice walk seen as a chain on Z.
    pub fn iid(law: &StepLaw) -> Result<Self> {
        Self::new(&format!("iid({})", law.name()), 1.0, 1.0, vec![law.int_atoms()?])
    }

    /// On 1/2 Z: discretized standard normal (ticks -12..=12) where floor(x)
    /// is even, {-3/2: 2/9, 0: 5/9, 3/2: 2/9} where it is odd. The odd jumps
    /// cross band edges, so paths keep switching regimes.
    pub fn region_switched() -> Self {
        let three = vec![(-3, 2.0 / 9.0), (0, 5.0 / 9.0), (3, 2.0 / 9.0)];
        Self::new("region-switched", 0.5, 1.0, vec![discretized_normal(0.5, 12), three]).expect("valid kernel")
    }

    /// Negative control: variance 2 where floor(x) is odd.
    pub fn region_switched_var2() -> Self {
        let wide = vec![(-3, 4.0 / 9.0), (0, 1.0 / 9.0), (3, 4.0 / 9.0)];
        Self::new("region-switched-var2", 0.5, 1.0, vec![discretized_normal(0.5, 12), wide]).expect("valid kernel")
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "region-switched" => Ok(Self::region_switched()),
            "region-switched-var2" => Ok(Self::region_switched_var2()),
            other => Self::iid(&StepLaw::builtin(other)?),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tick(&self, x: f64) -> Result<i64> {
        let t = (x / self.h).round();
        if (t * self.h - x).abs() > 1e-9 || t < 0.0 {
            return Err(Error::InvalidArgument(format!("state {x} is not on the grid {}Z+", self.h)));
        }
        Ok(t as i64)
    }

    pub fn jumps(&self, tick: i64) -> &[(i64, f64)] {
        let x = tick as f64 * self.h;
        let k = self.regimes.len() as i64;
        &self.regimes[(x / self.band).floor().rem_euclid(k as f64) as usize % k as usize]
    }

    pub fn max_up(&self) -> i64 {
        self.regimes.iter().map(|r| r[r.len() - 1].0).max().unwrap().max(0)
    }

    fn max_down(&self) -> i64 {
        self.regimes.iter().map(|r| -r[0].0).max().unwrap().max(0)
    }

    /// Largest possible E[-X(tau)] contribution of one absorption.
    pub fn max_overshoot(&self) -> f64 {
        ((self.max_down() - 1).max(0)) as f64 * self.h
    }

    /// (mean, second moment) of xi at a tick.
    pub fn moments(&self, tick: i64) -> (f64, f64) {
        let j = self.jumps(tick);
        let m = j.iter().map(|&(v, p)| v as f64 * self.h * p).sum();
        let s = j.iter().map(|&(v, p)| (v as f64 * self.h).powi(2) * p).sum();
        (m, s)
    }

    /// Ticks that exercise every regime plus far-out states.
    pub fn probe_ticks(&self) -> Vec<i64> {
        let mut t: Vec<i64> = (0..=(20.0 / self.h) as i64).collect();
        for x in [100.0, 1000.0, 1000.5, 1001.0] {
            if let Ok(k) = self.tick(x) {
                t.push(k);
            }
        }
        t
    }
}

/// Majorant: P(|xi(x)| > y) <= P(Y > y) for all x, y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MajorantY {
    /// Y = M almost surely.
    Bounded { m: f64 },
    /// P(Y > y) = 1 below y0, (y0/y)^2 / (1 + ln(y/y0))^2 above:
    /// index -2 with E Y^2 = 3 y0^2.
    LogPareto { y0: f64 },
    /// P(Y > y) = min(1, 1/y^2); E Y^2 is infinite, so it is rejected.
    InverseSquare,
}

fn quad() -> Quadrature {
    Quadrature::new(20, 16)
}

/// int_{t1}^inf e^{-t} / (1+t)^2 dt
fn q0(t1: f64) -> f64 {
    (-t1).exp() * quad().integrate(|s| (-s).exp() / (1.0 + t1 + s).powi(2), 0.0, 45.0)
}

impl MajorantY {
    pub fn tail(&self, y: f64) -> f64 {
        match *self {
            MajorantY::Bounded { m } => (y < m) as u8 as f64,
            MajorantY::LogPareto { y0 } => {
                if y < y0 {
                    1.0
                } else {
                    (y0 / y).powi(2) / (1.0 + (y / y0).ln()).powi(2)
                }
            }
            MajorantY::InverseSquare => (1.0 / (y * y)).min(1.0),
        }
    }

    /// Finite second moment and a usable tail.
    pub fn validate(&self) -> Result<()> {
        match *self {
            MajorantY::Bounded { m } if m > 0.0 => Ok(()),
            MajorantY::LogPareto { y0 } if y0 > 0.0 => Ok(()),
            MajorantY::InverseSquare => Err(Error::AssumptionViolated("majorant min(1, 1/y^2) has E Y^2 = infinity".into())),
            _ => Err(Error::InvalidArgument("majorant scale must be positive".into())),
        }
    }

    /// (int_x^inf T, int_x^inf y T, int_0^x y^2 T) for x >= 0.
    fn integrals(&self, x: f64) -> (f64, f64, f64) {
        let x = x.max(0.0);
        match *self {
            MajorantY::Bounded { m } => ((m - x).max(0.0), (m * m - x * x).max(0.0) / 2.0, x.min(m).powi(3) / 3.0),
            MajorantY::LogPareto { y0 } => {
                let t1 = (x / y0).ln().max(0.0);
                let j0 = (y0 - x).max(0.0) + y0 * q0(t1);
                let j1 = (y0 * y0 - x * x).max(0.0) / 2.0 + y0 * y0 / (1.0 + t1);
                let k2 = x.min(y0).powi(3) / 3.0 + y0.powi(3) * quad().integrate(|t| t.exp() / (1.0 + t).powi(2), 0.0, t1);
                (j0, j1, k2)
            }
            MajorantY::InverseSquare => (f64::INFINITY, f64::INFINITY, f64::INFINITY),
        }
    }

    pub fn a(&self, x: f64) -> f64 {
        self.integrals(x).0
    }

    pub fn b(&self, x: f64) -> f64 {
        let (j0, j1, _) = self.integrals(x);
        (j1 - x * j0).max(0.0)
    }

    pub fn m(&self, x: f64) -> f64 {
        let (j0, j1, k2) = self.integrals(x);
        0.5 * k2 + x * j1 - 0.5 * x * x * j0
    }

    pub fn second_moment(&self) -> f64 {
        2.0 * self.integrals(0.0).1
    }

    /// E[Y^2; Y >= r]
    pub fn second_moment_above(&self, r: f64) -> f64 {
        match *self {
            MajorantY::Bounded { m } => {
                if r <= m {
                    m * m
                } else {
                    0.0
                }
            }
            _ => r * r * self.tail(r) + 2.0 * self.integrals(r).1,
        }
    }

    /// P(Y > 2y) / P(Y > y); tends to 1/4 for index -2.
    pub fn tail_ratio(&self, y: f64) -> f64 {
        self.tail(2.0 * y) / self.tail(y)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub probes: usize,
    pub max_mean_error: f64,
    pub max_variance_error: f64,
    /// (x, y) where P(|xi(x)| > y) > P(Y > y)
    pub domination_failures: Vec<(f64, f64)>,
    /// (x, mean, second moment) outside 1e-10
    pub moment_failures: Vec<(f64, f64, f64)>,
}

/// Moment and domination checks over the probe grid.
pub fn kernel_validate(kernel: &ChainKernel, majorant: &MajorantY, probes: &[i64]) -> Result<KernelReport> {
    majorant.validate()?;
    let mut rep = KernelReport {
        probes: probes.len(),
        max_mean_error: 0.0,
        max_variance_error: 0.0,
        domination_failures: Vec::new(),
        moment_failures: Vec::new(),
    };
    let mut ys = log_grid(1e-3, 1e4, 200);
    for &t in probes {
        let x = t as f64 * kernel.h;
        let (m, s) = kernel.moments(t);
        rep.max_mean_error = rep.max_mean_error.max(m.abs());
        rep.max_variance_error = rep.max_variance_error.max((s - 1.0).abs());
        if m.abs() > 1e-10 || (s - 1.0).abs() > 1e-10 {
            rep.moment_failures.push((x, m, s));
        }
        let jumps = kernel.jumps(t);
        ys.extend(jumps.iter().flat_map(|&(v, _)| {
            let a = (v.abs() as f64) * kernel.h;
            [a, (a - 1e-9).max(0.0)]
        }));
        for &y in &ys {
            let p: f64 = jumps.iter().filter(|a| (a.0.abs() as f64) * kernel.h > y).map(|a| a.1).sum();
            if p > majorant.tail(y) + 1e-12 {
                rep.domination_failures.push((x, y));
            }
        }
    }
    if let Some(&(x, m, s)) = rep.moment_failures.first() {
        return Err(Error::AssumptionViolated(format!("kernel {} at x = {x}: mean {m}, second moment {s}", kernel.name)));
    }
    if let Some(&(x, y)) = rep.domination_failures.first() {
        return Err(Error::AssumptionViolated(format!("kernel {} at x = {x}: P(|xi| > {y}) exceeds the majorant", kernel.name)));
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainW {
    pub a: f64,
    pub r: f64,
    pub majorant: MajorantY,
}

impl ChainW {
    pub fn eval(&self, x: f64) -> f64 {
        x + self.r + self.a * self.majorant.m(x + self.r)
    }

    /// R + A m(x + R): the bound on E_x[-X(tau)].
    pub fn overshoot_bound(&self, x: f64) -> f64 {
        self.eval(x) - x
    }
}

pub const CHAIN_A: f64 = 64.0;
const R_SEARCH_MAX: f64 = 1e8;

/// Smallest R satisfying a(2y) >= a(y)/4 for y >= R (on a grid),
/// E[Y^2; Y >= R] <= 1/2 and b(R) < 1/64; A = 64.
pub fn build_chain_w(majorant: &MajorantY) -> Result<ChainW> {
    majorant.validate()?;
    let doubling = |r: f64| {
        log_grid(r.max(1e-6), r.max(1.0) * 1e6, 240).into_iter().all(|y| majorant.a(2.0 * y) >= majorant.a(y) / 4.0 - 1e-15)
    };
    let r1 = threshold(doubling, 0.0, R_SEARCH_MAX, 1e-10);
    let r2 = threshold(|r| majorant.second_moment_above(r) <= 0.5, 0.0, R_SEARCH_MAX, 1e-12);
    let r3 = threshold(|r| majorant.b(r) < 1.0 / 64.0, 0.0, R_SEARCH_MAX, 1e-12);
    match (r1, r2, r3) {
        (Some(a), Some(b), Some(c)) => Ok(ChainW { a: CHAIN_A, r: a.max(b).max(c), majorant: *majorant }),
        _ => Err(Error::NoValidR(R_SEARCH_MAX)),
    }
}

/// Delta(x) = E[W(x + xi); x + xi > 0] - W(x) at a tick.
pub fn chain_drift(kernel: &ChainKernel, w: &ChainW, tick: i64) -> f64 {
    let x = tick as f64 * kernel.h;
    let wx = w.eval(x);
    kernel
        .jumps(tick)
        .iter()
        .map(|&(j, p)| if tick + j > 0 { p * (w.eval((tick + j) as f64 * kernel.h) - wx) } else { -p * wx })
        .sum()
}

pub const CHAIN_DRIFT_TOL: f64 = 1e-10;

/// (argmax tick, max drift) over the kernel's probes; errors above tolerance.
pub fn verify_chain_w(kernel: &ChainKernel, w: &ChainW) -> Result<(i64, f64)> {
    let worst = kernel
        .probe_ticks()
        .into_iter()
        .map(|t| (t, chain_drift(kernel, w, t)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    if worst.1 > CHAIN_DRIFT_TOL {
        return Err(Error::SuperharmonicityViolated { x: worst.0 as f64 * kernel.h, delta: worst.1 });
    }
    Ok(worst)
}

/// Forward DP of the chain killed at <= 0, per-step ledger.
#[derive(Clone, Debug, Serialize)]
pub struct ChainProfile {
    pub x: f64,
    pub survival: Vec<f64>,
    pub absorbed: Vec<f64>,
    /// E[-X(tau); tau = n]
    pub overshoot: Vec<f64>,
    pub loss: Vec<f64>,
    #[serde(skip)]
    pub final_pmf: Pmf,
}

const CLIP_C: f64 = 12.0;
const CLIP_TOL: f64 = 1e-12;

fn chain_step(kernel: &ChainKernel, pmf: &Pmf, cap: Option<i64>, kill: bool) -> (Pmf, f64, f64, f64) {
    let lo_shift = -kernel.max_down();
    let hi_shift = kernel.max_up();
    let offset = pmf.offset + lo_shift;
    let mut next = vec![0.0; pmf.probs.len() + (hi_shift - lo_shift) as usize];
    for (t, p) in pmf.iter() {
        if p == 0.0 {
            continue;
        }
        for &(j, q) in kernel.jumps(t) {
            next[(t + j - offset) as usize] += p * q;
        }
    }
    let (mut absorbed, mut over, mut lost) = (0.0, 0.0, 0.0);
    let mut lo = offset;
    if kill {
        for (i, &p) in next.iter().enumerate() {
            let t = offset + i as i64;
            if t > 0 {
                break;
            }
            absorbed += p;
            over += -(t as f64) * kernel.h * p;
        }
        lo = lo.max(1);
    }
    let mut hi = offset + next.len() as i64 - 1;
    if let Some(c) = cap {
        for t in (c + 1)..=hi {
            lost += next[(t - offset) as usize];
        }
        hi = hi.min(c);
    }
    let probs = if hi >= lo { next[(lo - offset) as usize..=(hi - offset) as usize].to_vec() } else { Vec::new() };
    (Pmf { offset: lo, probs }, absorbed, over, lost)
}

fn clip(kernel: &ChainKernel, start: i64, n: u64) -> i64 {
    start + (CLIP_C * ((n.max(3) as f64).ln() * n as f64).sqrt() / kernel.h).ceil() as i64 + kernel.max_up()
}

pub fn chain_profile(kernel: &ChainKernel, x: f64, n_max: u64) -> Result<ChainProfile> {
    let start = kernel.tick(x)?;
    let mut pmf = Pmf::delta(start);
    let mut p = ChainProfile { x, survival: vec![1.0], absorbed: vec![0.0], overshoot: vec![0.0], loss: vec![0.0], final_pmf: Pmf::empty() };
    let mut lost = 0.0;
    for n in 1..=n_max {
        let (next, ab, ov, l) = chain_step(kernel, &pmf, Some(clip(kernel, start, n)), true);
        lost += l;
        if lost > CLIP_TOL {
            return Err(Error::WindowTooSmall { loss: lost, tol: CLIP_TOL });
        }
        pmf = next;
        p.survival.push(pmf.mass());
        p.absorbed.push(ab);
        p.overshoot.push(ov);
        p.loss.push(lost);
    }
    p.final_pmf = pmf;
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainV {
    pub x: f64,
    pub n: u64,
    /// x + E[-X(tau); tau <= n]
    pub lower: f64,
    /// lower + largest overshoot times the unabsorbed mass, capped by W
    pub upper: f64,
    /// lower + (mean late overshoot per absorbed unit) * P(tau > n)
    pub estimate: f64,
}

/// V(x) = x - E_x X(tau) from the forward DP. The remainder
/// E[-X(tau); tau > n] is extrapolated from the overshoot per unit of
/// absorbed mass over (n/2, n]; certified bounds are reported alongside.
pub fn chain_v(kernel: &ChainKernel, x: f64, n_max: u64, w: Option<&ChainW>) -> Result<ChainV> {
    let p = chain_profile(kernel, x, n_max)?;
    Ok(chain_v_from(kernel, &p, w))
}

pub fn chain_v_from(kernel: &ChainKernel, p: &ChainProfile, w: Option<&ChainW>) -> ChainV {
    let n = p.survival.len() - 1;
    let lower = p.x + p.overshoot.iter().sum::<f64>();
    let rest = p.survival[n] + p.loss[n];
    let mut upper = lower + kernel.max_overshoot() * rest;
    if let Some(w) = w {
        upper = upper.min(w.eval(p.x));
    }
    let (ov, ab) = ((n / 2 + 1)..=n).fold((0.0, 0.0), |acc, k| (acc.0 + p.overshoot[k], acc.1 + p.absorbed[k]));
    let rate = if ab > 0.0 { ov / ab } else { 0.0 };
    let estimate = (lower + rate * p.survival[n]).min(upper);
    ChainV { x: p.x, n: n as u64, lower, upper, estimate }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainSurvival {
    pub x: f64,
    pub n: u64,
    pub p: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
    pub trials: u64,
    pub v: ChainV,
    /// sqrt(n) p / (sqrt(2/pi) V(x))
    pub ratio: f64,
    pub ratio_sigma: f64,
}

struct KernelSampler<'a> {
    kernel: &'a ChainKernel,
    samplers: Vec<AtomSampler>,
}

impl<'a> KernelSampler<'a> {
    fn new(kernel: &'a ChainKernel) -> Result<Self> {
        let samplers = kernel
            .regimes
            .iter()
            .map(|r| AtomSampler::new(&r.iter().map(|&(j, p)| (j as f64, p)).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        Ok(KernelSampler { kernel, samplers })
    }

    fn step<R: Rng>(&self, t: i64, rng: &mut R) -> i64 {
        let x = t as f64 * self.kernel.h;
        let k = self.samplers.len();
        let i = (x / self.kernel.band).floor().rem_euclid(k as f64) as usize % k;
        t + self.samplers[i].sample(rng) as i64
    }
}

/// Monte Carlo P_x(tau > n) compared with sqrt(2/pi) V(x) / sqrt(n).
pub fn chain_survival(kernel: &ChainKernel, x: f64, n: u64, trials: u64, seed: u64, v: ChainV) -> Result<ChainSurvival> {
    let start = kernel.tick(x)?;
    let sampler = KernelSampler::new(kernel)?;
    let exp = format!("chain:{}:{x}:{n}", kernel.name);
    let alive: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, &exp, i);
            let mut t = start;
            for _ in 0..n {
                t = sampler.step(t, &mut rng);
                if t <= 0 {
                    return 0u64;
                }
            }
            1
        })
        .sum();
    let p = alive as f64 / trials as f64;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let (lo, hi) = wilson(alive, trials, 1.96);
    let scale = (n as f64).sqrt() / (FRAC_2_PI.sqrt() * v.estimate);
    Ok(ChainSurvival { x, n, p, sigma, lo, hi, trials, v, ratio: p * scale, ratio_sigma: sigma * scale })
}

/// Lower/upper V on ticks 0..=t_max from n_v backward steps of
/// V_m(t) = E_t[V_{m-1}(X(1)); X(1) > 0], V_0(t) = t h.
#[derive(Clone, Debug, Serialize)]
pub struct ChainVTable {
    pub h: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ChainVTable {
    pub fn build(kernel: &ChainKernel, t_max: i64, n_v: u64) -> Self {
        let up = kernel.max_up();
        let top = |m: u64| t_max + (n_v - m) as i64 * up;
        let mut v: Vec<f64> = (0..=top(0)).map(|t| t as f64 * kernel.h).collect();
        let mut s: Vec<f64> = (0..=top(0)).map(|t| (t > 0) as u8 as f64).collect();
        for m in 1..=n_v {
            let t_top = top(m);
            let mut nv = vec![0.0; t_top as usize + 1];
            let mut ns = vec![0.0; t_top as usize + 1];
            for t in 0..=t_top {
                for &(j, p) in kernel.jumps(t) {
                    let y = t + j;
                    if y > 0 {
                        nv[t as usize] += p * v[y as usize];
                        ns[t as usize] += p * s[y as usize];
                    }
                }
            }
            v = nv;
            s = ns;
        }
        let over = kernel.max_overshoot();
        let lower: Vec<f64> = v[..=t_max as usize].to_vec();
        let upper = lower.iter().zip(&s).map(|(l, s)| l + over * s).collect();
        ChainVTable { h: kernel.h, lower, upper }
    }

    pub fn value(&self, tick: i64) -> Result<f64> {
        if tick < 0 || tick as usize >= self.lower.len() {
            return Err(Error::VUnavailable(tick as f64 * self.h));
        }
        Ok(0.5 * (self.lower[tick as usize] + self.upper[tick as usize]))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DoobStep {
    /// (target tick, probability)
    pub law: Vec<(i64, f64)>,
    /// |sum of weights - 1|, i.e. the harmonicity residual of V at x
    pub normalization_residual: f64,
}

/// P-hat(x, y) = V(y)/V(x) P_x(X(1) = y, tau > 1).
pub fn doob_chain_step(kernel: &ChainKernel, v: &ChainVTable, tick: i64) -> Result<DoobStep> {
    let vx = v.value(tick)?;
    if vx <= 0.0 {
        return Err(Error::VUnavailable(tick as f64 * kernel.h));
    }
    let mut law = Vec::new();
    for &(j, p) in kernel.jumps(tick) {
        let y = tick + j;
        if y > 0 {
            law.push((y, p * v.value(y)? / vx));
        }
    }
    let total: f64 = law.iter().map(|a| a.1).sum();
    Ok(DoobStep { law, normalization_residual: (total - 1.0).abs() })
}

/// Paths of the Doob chain; every visited state is checked to be positive.
pub fn simulate_doob(kernel: &ChainKernel, v: &ChainVTable, x: f64, n: u64, trials: u64, seed: u64) -> Result<Vec<f64>> {
    let start = kernel.tick(x)?;
    let exp = format!("doob:{}:{x}:{n}", kernel.name);
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, &exp, i);
            let mut t = start;
            for _ in 0..n {
                let step = doob_chain_step(kernel, v, t)?;
                let u: f64 = rng.random::<f64>() * step.law.iter().map(|a| a.1).sum::<f64>();
                let mut acc = 0.0;
                let mut next = step.law[step.law.len() - 1].0;
                for &(y, p) in &step.law {
                    acc += p;
                    if u < acc {
                        next = y;
                        break;
                    }
                }
                if next <= 0 {
                    return Err(Error::AssumptionViolated(format!("Doob chain left the half-line at step from {t}")));
                }
                t = next;
            }
            Ok(t as f64 * kernel.h)
        })
        .collect()
}

/// Law of the Doob chain at time n: K_n(y) V(y) / V(x).
pub fn doob_endpoint_law(kernel: &ChainKernel, v: &ChainVTable, x: f64, n: u64) -> Result<Pmf> {
    let p = chain_profile(kernel, x, n)?;
    let vx = v.value(kernel.tick(x)?)?;
    let mut out = p.final_pmf.clone();
    for (i, q) in out.probs.iter_mut().enumerate() {
        *q *= v.value(p.final_pmf.offset + i as i64)? / vx;
    }
    Ok(out)
}

/// KS distance of X-hat(n)/sqrt(n) against the meander-square CDF.
pub fn doob_limit_check(kernel: &ChainKernel, v: &ChainVTable, x: f64, n: u64) -> Result<f64> {
    let law = doob_endpoint_law(kernel, v, x, n)?;
    let s = (n as f64).sqrt();
    let atoms: Vec<(f64, f64)> = law.iter().filter(|a| a.1 > 0.0).map(|(t, p)| (t as f64 * kernel.h / s, p)).collect();
    Ok(ks_discrete(&atoms, meander_square_cdf))
}

/// P_t(tau > m) for ticks 0..=t_max, backward.
pub fn chain_survival_table(kernel: &ChainKernel, t_max: i64, m: u64) -> Vec<f64> {
    let up = kernel.max_up();
    let top = |k: u64| t_max + (m - k) as i64 * up;
    let mut s: Vec<f64> = (0..=top(0)).map(|t| (t > 0) as u8 as f64).collect();
    for k in 1..=m {
        let t_top = top(k);
        let mut ns = vec![0.0; t_top as usize + 1];
        for t in 0..=t_top {
            for &(j, p) in kernel.jumps(t) {
                let y = t + j;
                if y > 0 {
                    ns[t as usize] += p * s[y as usize];
                }
            }
        }
        s = ns;
    }
    s.truncate(t_max as usize + 1);
    s
}

/// Total variation between P_x(X(k) in . | tau > n) and the Doob law at k.
pub fn conditioned_vs_doob_tv(kernel: &ChainKernel, v: &ChainVTable, x: f64, k: u64, n: u64) -> Result<f64> {
    if n < k {
        return Err(Error::InvalidArgument("need n >= k".into()));
    }
    let p = chain_profile(kernel, x, k)?;
    let kk = &p.final_pmf;
    let surv = chain_survival_table(kernel, kk.top().max(1), n - k);
    let cond: Vec<f64> = kk.iter().map(|(t, q)| q * surv[t as usize]).collect();
    let doob: Vec<f64> = kk.iter().map(|(t, q)| v.value(t).map(|vt| q * vt)).collect::<Result<_>>()?;
    let (zc, zd): (f64, f64) = (cond.iter().sum(), doob.iter().sum());
    if zc <= 0.0 {
        return Err(Error::ZeroSurvival);
    }
    Ok(0.5 * cond.iter().zip(&doob).map(|(c, d)| (c / zc - d / zd).abs()).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CltDiagnostic {
    pub n: u64,
    pub ks: f64,
    /// Var(X(n) - x) / n
    pub var_ratio: f64,
    /// MC standard error of var_ratio (0 for the exact version)
    pub var_sigma: f64,
}

/// Unconditioned (X(n) - x)/sqrt(n) against N(0,1), by simulation.
pub fn clt_diagnostic(kernel: &ChainKernel, x: f64, n: u64, trials: u64, seed: u64) -> Result<CltDiagnostic> {
    let start = kernel.tick(x)?;
    let sampler = KernelSampler::new(kernel)?;
    let exp = format!("clt:{}:{x}:{n}", kernel.name);
    let z: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, &exp, i);
            let mut t = start;
            for _ in 0..n {
                t = sampler.step(t, &mut rng);
            }
            (t - start) as f64 * kernel.h / (n as f64).sqrt()
        })
        .collect();
    let nf = z.len() as f64;
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / nf;
    let m4 = z.iter().map(|v| v.powi(4)).sum::<f64>() / nf;
    Ok(CltDiagnostic { n, ks: ks_sample(&z, std_normal_cdf), var_ratio: m2, var_sigma: ((m4 - m2 * m2) / nf).sqrt() })
}

/// Exact version of [`clt_diagnostic`] by forward DP without killing.
pub fn clt_exact(kernel: &ChainKernel, x: f64, n: u64) -> Result<CltDiagnostic> {
    let start = kernel.tick(x)?;
    let mut pmf = Pmf::delta(start);
    for _ in 0..n {
        pmf = chain_step(kernel, &pmf, None, false).0;
    }
    let s = (n as f64).sqrt();
    let atoms: Vec<(f64, f64)> = pmf.iter().filter(|a| a.1 > 0.0).map(|(t, p)| ((t - start) as f64 * kernel.h / s, p)).collect();
    let var = atoms.iter().map(|&(z, p)| z * z * p).sum();
    Ok(CltDiagnostic { n, ks: ks_discrete(&atoms, std_normal_cdf), var_ratio: var, var_sigma: 0.0 })
}
