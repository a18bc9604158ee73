//! Independent, non-identically distributed steps and moving boundaries:
//! Lindeberg diagnostics, the example with E[-S(tau)] = infinity, Monte Carlo
//! for T_g (with splitting for rare survival) and the exact inequality suites
//! on lattice profiles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdp::{boundary_profile, conditional_pmf, moving_boundary_profile, BoundarySpec, KilledProfile, KilledWalk, Window};
use crate::numeric::{linear_fit, threshold};
use crate::oracles::rayleigh_cdf;
use crate::rng::{sample_atoms, trial_rng, AtomSampler};
use crate::stats::{ks_discrete, ks_sample, wilson};
use crate::steplaw::{Pmf, StepLaw};

/// k -> law of X_k, k >= 1.
#[derive(Clone, Debug)]
pub enum LawSequence {
    Iid(StepLaw),
    /// P(X_n = +-sqrt n) = p_n/2, P(X_n = +-a_n) = (1-p_n)/2.
    Counterexample,
    /// i.i.d. `base` except step `at`, which is `base` scaled by `scale`.
    Spiked { base: StepLaw, at: u64, scale: f64 },
}

/// p_n = 1/(n ln(n+2)), a_n = sqrt((1 - n p_n)/(1 - p_n)).
pub fn counterexample_params(n: u64) -> (f64, f64) {
    let nf = n as f64;
    let p = 1.0 / (nf * (nf + 2.0).ln());
    (p, ((1.0 - nf * p) / (1.0 - p)).sqrt())
}

fn counterexample_atoms(n: u64) -> Vec<(f64, f64)> {
    let (p, a) = counterexample_params(n);
    let r = (n as f64).sqrt();
    vec![(-r, 0.5 * p), (-a, 0.5 * (1.0 - p)), (a, 0.5 * (1.0 - p)), (r, 0.5 * p)]
}

pub fn counterexample_family(n: u64) -> Result<StepLaw> {
    if n < 1 {
        return Err(Error::InvalidArgument("counterexample family starts at n = 1".into()));
    }
    Ok(StepLaw::real(&counterexample_atoms(n))?.named(&format!("counterexample({n})")))
}

impl LawSequence {
    pub fn spiked(base: StepLaw, at: u64, scale: f64) -> Result<Self> {
        base.require_centered()?;
        if !(scale > 0.0) || at < 1 {
            return Err(Error::InvalidArgument("spike needs at >= 1 and scale > 0".into()));
        }
        Ok(LawSequence::Spiked { base, at, scale })
    }

    pub fn atoms(&self, k: u64) -> Vec<(f64, f64)> {
        match self {
            LawSequence::Iid(l) => l.atoms().to_vec(),
            LawSequence::Counterexample => counterexample_atoms(k),
            LawSequence::Spiked { base, at, scale } => {
                let s = if k == *at { *scale } else { 1.0 };
                base.atoms().iter().map(|&(v, p)| (v * s, p)).collect()
            }
        }
    }

    pub fn law(&self, k: u64) -> StepLaw {
        match self {
            LawSequence::Iid(l) => l.clone(),
            _ => {
                let atoms = self.atoms(k);
                let lattice = self.is_lattice();
                let law = if lattice {
                    let ints: Vec<(i64, f64)> = atoms.iter().map(|&(v, p)| (v as i64, p)).collect();
                    StepLaw::lattice(&ints)
                } else {
                    StepLaw::real(&atoms)
                };
                law.expect("sequence atoms are validated on construction")
            }
        }
    }

    pub fn is_lattice(&self) -> bool {
        match self {
            LawSequence::Iid(l) => l.int_atoms().is_ok(),
            LawSequence::Counterexample => false,
            LawSequence::Spiked { base, scale, .. } => base.int_atoms().is_ok() && scale.fract() == 0.0,
        }
    }

    pub fn variance(&self, k: u64) -> f64 {
        match self {
            LawSequence::Iid(l) => l.variance(),
            LawSequence::Counterexample => 1.0,
            LawSequence::Spiked { base, at, scale } => base.variance() * if k == *at { scale * scale } else { 1.0 },
        }
    }

    /// B_k^2 for k = 0..=n.
    pub fn b2(&self, n: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n as usize + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..=n {
            acc += self.variance(k);
            out.push(acc);
        }
        out
    }

    pub fn id(&self) -> String {
        match self {
            LawSequence::Iid(l) => format!("iid({})", l.name()),
            LawSequence::Counterexample => "counterexample".into(),
            LawSequence::Spiked { base, at, scale } => format!("spiked({},{at},{scale})", base.name()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LindebergReport {
    pub n: u64,
    pub b_n: f64,
    pub eps: Vec<f64>,
    pub l: Vec<f64>,
    /// inf{eps : L_n(eps) <= eps}
    pub eps_n: f64,
}

/// L_n(eps) = B_n^{-2} sum_{k <= n} E[X_k^2; |X_k| >= eps B_n].
pub struct Lindeberg {
    b_n: f64,
    /// (|v|, cumulative share of sum v^2 p over atoms with magnitude >= |v|)
    tail: Vec<(f64, f64)>,
}

impl Lindeberg {
    pub fn new(seq: &LawSequence, n: u64) -> Self {
        let b2 = *seq.b2(n).last().unwrap();
        let mut pts: Vec<(f64, f64)> = (1..=n).flat_map(|k| seq.atoms(k)).map(|(v, p)| (v.abs(), v * v * p / b2)).collect();
        pts.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = 0.0;
        let tail = pts
            .into_iter()
            .map(|(m, w)| {
                acc += w;
                (m, acc)
            })
            .collect();
        Lindeberg { b_n: b2.sqrt(), tail }
    }

    pub fn eval(&self, eps: f64) -> f64 {
        let cut = eps * self.b_n;
        // number of atoms with magnitude >= cut (tail sorted descending)
        let k = self.tail.partition_point(|a| a.0 >= cut);
        if k == 0 {
            0.0
        } else {
            self.tail[k - 1].1
        }
    }

    pub fn eps_n(&self) -> f64 {
        threshold(|e| self.eval(e) <= e, 0.0, 1.0, 1e-13).unwrap_or(1.0)
    }
}

pub fn lindeberg_profile(seq: &LawSequence, n: u64, eps_grid: &[f64]) -> LindebergReport {
    let lb = Lindeberg::new(seq, n);
    LindebergReport { n, b_n: lb.b_n, eps: eps_grid.to_vec(), l: eps_grid.iter().map(|&e| lb.eval(e)).collect(), eps_n: lb.eps_n() }
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceReport {
    pub eps: f64,
    /// (N, partial sum) at powers of ten and at the final N
    pub checkpoints: Vec<(u64, f64)>,
    /// slope c of the fit partial sum ~ c0 + c ln ln N over the checkpoints
    pub loglog_slope: f64,
    /// largest single term with index beyond 10^5
    pub max_late_term: f64,
}

impl DivergenceReport {
    pub fn at(&self, n: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.0 == n).map(|c| c.1)
    }
}

/// Partial sums of (1/B_n) E[-X_n; -X_n > eps B_n].
pub fn divergence_diagnostic(seq: &LawSequence, n_max: u64, eps: f64) -> Result<DivergenceReport> {
    if n_max < 10 {
        return Err(Error::InvalidArgument("need N >= 10".into()));
    }
    let mut b2 = 0.0;
    let mut s = 0.0;
    let mut checkpoints = Vec::new();
    let mut next_pow = 10u64;
    let mut max_late_term: f64 = 0.0;
    for n in 1..=n_max {
        b2 += seq.variance(n);
        let b = b2.sqrt();
        let term: f64 = seq.atoms(n).iter().filter(|a| -a.0 > eps * b).map(|&(v, p)| -v * p).sum::<f64>() / b;
        s += term;
        if n > 100_000 {
            max_late_term = max_late_term.max(term);
        }
        if n == next_pow {
            checkpoints.push((n, s));
            next_pow = next_pow.saturating_mul(10);
        }
    }
    if checkpoints.last().map(|c| c.0) != Some(n_max) {
        checkpoints.push((n_max, s));
    }
    let xs: Vec<f64> = checkpoints.iter().map(|c| (c.0 as f64).ln().ln()).collect();
    let ys: Vec<f64> = checkpoints.iter().map(|c| c.1).collect();
    let loglog_slope = if xs.len() >= 2 { linear_fit(&xs, &ys).1 } else { f64::NAN };
    Ok(DivergenceReport { eps, checkpoints, loglog_slope, max_late_term })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub survived: bool,
    /// T_g, or n when censored
    pub time: u64,
    /// S(n) - g(n) when surviving, g(T) - S(T) when absorbed
    pub endpoint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub seed: u64,
    pub law: String,
    pub boundary: String,
    pub n: u64,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialBatch {
    pub meta: BatchMeta,
    pub records: Vec<TrialRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub p: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
    pub survivors: u64,
    pub trials: u64,
}

impl TrialBatch {
    pub fn survivors(&self) -> u64 {
        self.records.iter().filter(|r| r.survived).count() as u64
    }

    /// Estimate of P(T_g > n) with a 95% Wilson interval.
    pub fn survival(&self) -> SurvivalEstimate {
        let k = self.survivors();
        let t = self.records.len() as u64;
        let p = k as f64 / t.max(1) as f64;
        let (lo, hi) = wilson(k, t, 1.96);
        SurvivalEstimate { p, sigma: (p * (1.0 - p) / t.max(1) as f64).sqrt(), lo, hi, survivors: k, trials: t }
    }

    pub fn endpoints(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.survived).map(|r| r.endpoint).collect()
    }
}

const BATCH_MAGIC: &[u8; 8] = b"FLBATCH1";

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Binary records (little endian: u64 index, u8 flag, u64 time, f64
/// endpoint) after a magic and a count; metadata goes to a JSON sidecar.
pub fn write_batch(path: &Path, batch: &TrialBatch) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(BATCH_MAGIC).map_err(io)?;
    w.write_all(&(batch.records.len() as u64).to_le_bytes()).map_err(io)?;
    for r in &batch.records {
        w.write_all(&r.index.to_le_bytes()).map_err(io)?;
        w.write_all(&[r.survived as u8]).map_err(io)?;
        w.write_all(&r.time.to_le_bytes()).map_err(io)?;
        w.write_all(&r.endpoint.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)?;
    let meta = serde_json::to_string_pretty(&batch.meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(sidecar(path), meta + "\n").map_err(io)?;
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<TrialBatch> {
    let io = |e: std::io::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != BATCH_MAGIC {
        return Err(Error::Parse(format!("{}: not a trial batch", path.display())));
    }
    let mut u = [0u8; 8];
    r.read_exact(&mut u).map_err(io)?;
    let count = u64::from_le_bytes(u);
    let mut records = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let mut buf = [0u8; 25];
        r.read_exact(&mut buf).map_err(io)?;
        records.push(TrialRecord {
            index: u64::from_le_bytes(buf[0..8].try_into().unwrap()),
            survived: buf[8] != 0,
            time: u64::from_le_bytes(buf[9..17].try_into().unwrap()),
            endpoint: f64::from_le_bytes(buf[17..25].try_into().unwrap()),
        });
    }
    let text = std::fs::read_to_string(sidecar(path)).map_err(io)?;
    let meta = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(TrialBatch { meta, records })
}

enum Sampler<'a> {
    Fixed(AtomSampler),
    Varying(&'a LawSequence),
}

impl Sampler<'_> {
    fn new(seq: &LawSequence) -> Result<Sampler<'_>> {
        Ok(match seq {
            LawSequence::Iid(l) => Sampler::Fixed(AtomSampler::new(l.atoms())?),
            other => Sampler::Varying(other),
        })
    }

    fn draw<R: Rng>(&self, k: u64, rng: &mut R) -> f64 {
        match self {
            Sampler::Fixed(s) => s.sample(rng),
            Sampler::Varying(seq) => sample_atoms(&seq.atoms(k), rng),
        }
    }
}

/// Integer-valued paths are compared with the same guard as the DP levels.
const LEVEL_GUARD: f64 = 1e-9;

/// Advance (k, s) to time `until` or absorption; true if still alive.
fn advance<R: Rng>(sampler: &Sampler<'_>, g: &[f64], k: &mut u64, s: &mut f64, until: u64, rng: &mut R) -> bool {
    while *k < until {
        *k += 1;
        *s += sampler.draw(*k, rng);
        if *s <= g[*k as usize] + LEVEL_GUARD {
            return false;
        }
    }
    true
}

fn boundary_values(boundary: &BoundarySpec, n: u64) -> Vec<f64> {
    (0..=n).map(|k| boundary.eval(k)).collect()
}

/// Independent paths of S from 0 until T_g or n.
pub fn simulate_tg(seq: &LawSequence, boundary: &BoundarySpec, n: u64, trials: u64, seed: u64) -> Result<TrialBatch> {
    let sampler = Sampler::new(seq)?;
    let g = boundary_values(boundary, n);
    let exp = format!("tg:{}:{}:{n}", seq.id(), boundary.id());
    let records = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, &exp, i);
            let (mut k, mut s) = (0u64, 0.0f64);
            let alive = advance(&sampler, &g, &mut k, &mut s, n, &mut rng);
            let endpoint = if alive { s - g[n as usize] } else { g[k as usize] - s };
            TrialRecord { index: i, survived: alive, time: k, endpoint }
        })
        .collect();
    let meta = BatchMeta { seed, law: seq.id(), boundary: boundary.id(), n, trials };
    Ok(TrialBatch { meta, records })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditioningMethod {
    Rejection,
    Splitting,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionedSample {
    pub method: ConditioningMethod,
    /// S(n) - g(n) for the surviving population
    pub endpoints: Vec<f64>,
    pub survival: f64,
    /// approximate standard error of `survival`
    pub survival_se: f64,
    pub checkpoints: Vec<u64>,
}

/// Threshold below which plain rejection is abandoned for splitting.
pub const REJECTION_FLOOR: f64 = 1e-3;

/// Samples from the law of S(n) - g(n) given T_g > n. A pilot run of
/// `particles` paths is used directly if its survival is at least
/// [`REJECTION_FLOOR`]; otherwise a fixed-size population is pushed through
/// checkpoints 4, 16, 64, ... (B doubles between them) and resampled from
/// the survivors at each one.
pub fn conditioned_endpoints(seq: &LawSequence, boundary: &BoundarySpec, n: u64, particles: u64, seed: u64) -> Result<ConditionedSample> {
    let pilot = simulate_tg(seq, boundary, n, particles, seed)?;
    let est = pilot.survival();
    if est.p >= REJECTION_FLOOR {
        return Ok(ConditionedSample {
            method: ConditioningMethod::Rejection,
            endpoints: pilot.endpoints(),
            survival: est.p,
            survival_se: est.sigma,
            checkpoints: vec![n],
        });
    }
    split_endpoints(seq, boundary, n, particles, seed)
}

/// Fixed-effort splitting at checkpoints 4^j (see [`conditioned_endpoints`]).
pub fn split_endpoints(seq: &LawSequence, boundary: &BoundarySpec, n: u64, particles: u64, seed: u64) -> Result<ConditionedSample> {
    let sampler = Sampler::new(seq)?;
    let g = boundary_values(boundary, n);
    let mut checkpoints: Vec<u64> = std::iter::successors(Some(4u64), |t| t.checked_mul(4)).take_while(|&t| t < n).collect();
    checkpoints.push(n);
    let exp = format!("split:{}:{}:{n}", seq.id(), boundary.id());
    let p = particles as usize;
    let mut pop: Vec<(u64, f64)> = vec![(0, 0.0); p];
    let mut survival = 1.0;
    let mut rel_var = 0.0;
    for (stage, &t) in checkpoints.iter().enumerate() {
        let alive: Vec<(u64, f64)> = pop
            .par_iter()
            .enumerate()
            .filter_map(|(i, &(k0, s0))| {
                let mut rng = trial_rng(seed, &exp, (stage * p + i) as u64);
                let (mut k, mut s) = (k0, s0);
                advance(&sampler, &g, &mut k, &mut s, t, &mut rng).then_some((k, s))
            })
            .collect();
        if alive.is_empty() {
            return Err(Error::TooFewSurvivors(0));
        }
        let f = alive.len() as f64 / p as f64;
        survival *= f;
        rel_var += (1.0 - f) / (f * p as f64);
        if t == n {
            pop = alive;
            break;
        }
        let mut rng = trial_rng(seed, &format!("{exp}:resample"), stage as u64);
        pop = (0..p).map(|_| alive[rng.random_range(0..alive.len())]).collect();
    }
    Ok(ConditionedSample {
        method: ConditioningMethod::Splitting,
        endpoints: pop.iter().map(|&(_, s)| s - g[n as usize]).collect(),
        survival,
        survival_se: survival * rel_var.sqrt(),
        checkpoints,
    })
}

/// KS distance of endpoint / B_n against the Rayleigh CDF 1 - exp(-v^2/2).
pub fn ks_rayleigh(endpoints: &[f64], b_n: f64) -> Result<f64> {
    if endpoints.len() < 100 {
        return Err(Error::TooFewSurvivors(endpoints.len()));
    }
    let v: Vec<f64> = endpoints.iter().map(|e| e / b_n).collect();
    Ok(ks_sample(&v, rayleigh_cdf))
}

/// The same statistic for the exact conditional law of x + S(n) given tau_x > n.
pub fn ks_rayleigh_exact(law: &StepLaw, x: i64, n: u64) -> Result<f64> {
    let c = conditional_pmf(law, x, n)?;
    let b = law.sigma() * (n as f64).sqrt();
    let atoms: Vec<(f64, f64)> = c.iter().filter(|a| a.1 > 0.0).map(|(y, p)| (y as f64 / b, p)).collect();
    Ok(ks_discrete(&atoms, rayleigh_cdf))
}

/// DP profile of T_g for a lattice law sequence.
pub fn sequence_profile(seq: &LawSequence, boundary: &BoundarySpec, n_max: u64) -> Result<KilledProfile> {
    match seq {
        LawSequence::Iid(l) => boundary_profile(l, boundary, n_max, Window::default()),
        other => {
            if !other.is_lattice() {
                return Err(Error::NonLattice);
            }
            let f = |k: u64| other.law(k);
            moving_boundary_profile(&f, boundary, n_max, Window::default())
        }
    }
}

/// m(n) = floor(n / ln n).
pub fn window_start(n: u64) -> u64 {
    if n < 3 {
        return 1;
    }
    ((n as f64) / (n as f64).ln()).floor().max(1.0) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlowVariation {
    pub n: u64,
    pub m: u64,
    pub u_n: f64,
    /// max_{m <= k <= n} |U_g(B_k^2) / U_g(B_n^2) - 1|
    pub statistic: f64,
}

pub fn ug_slow_variation(seq: &LawSequence, boundary: &BoundarySpec, n: u64) -> Result<SlowVariation> {
    let p = sequence_profile(seq, boundary, n)?;
    Ok(slow_variation_from(&p, n))
}

pub fn slow_variation_from(p: &KilledProfile, n: u64) -> SlowVariation {
    let m = window_start(n);
    let u_n = p.partial_v[n as usize];
    let statistic = (m..=n).map(|k| (p.partial_v[k as usize] / u_n - 1.0).abs()).fold(0.0, f64::max);
    SlowVariation { n, m, u_n, statistic }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub n: u64,
    pub survival: f64,
    pub u_g: f64,
    pub b_n: f64,
    /// B_n P(T_g > n) / (sqrt(2/pi) U_g(B_n^2))
    pub ratio: f64,
    pub loss: f64,
}

pub fn tail_vs_theorem(seq: &LawSequence, boundary: &BoundarySpec, ns: &[u64]) -> Result<Vec<TailRow>> {
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let p = sequence_profile(seq, boundary, n_max)?;
    let b2 = seq.b2(n_max);
    let c = std::f64::consts::FRAC_2_PI.sqrt();
    Ok(ns
        .iter()
        .map(|&n| {
            let i = n as usize;
            let b_n = b2[i].sqrt();
            TailRow { n, survival: p.survival[i], u_g: p.partial_v[i], b_n, ratio: b_n * p.survival[i] / (c * p.partial_v[i]), loss: p.loss[i] }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InequalityReport {
    pub checked: u64,
    pub violations: u64,
    /// most negative slack seen (>= 0 when there are no violations)
    pub worst_slack: f64,
}

impl InequalityReport {
    fn record(&mut self, slack: f64, tol: f64) {
        if self.checked == 0 || slack < self.worst_slack {
            self.worst_slack = slack;
        }
        self.checked += 1;
        if slack < -tol {
            self.violations += 1;
        }
    }
}

/// P(S(n) > y, T_g > n) >= P(S(n) > y) P(T_g > n) for all y and n <= n_max.
pub fn fkg_check(law: &StepLaw, boundary: &BoundarySpec, n_max: u64) -> Result<InequalityReport> {
    let atoms = law.int_atoms()?;
    let mut walk = KilledWalk::with_boundary(law, boundary, Window::Full)?;
    let mut free = Pmf::delta(0);
    let mut rep = InequalityReport::default();
    for _ in 0..n_max {
        walk.step()?;
        free = free.convolve_atoms(&atoms);
        let k = walk.pmf();
        let surv = k.mass();
        let (mut tk, mut tf) = (0.0, 0.0);
        for y in (free.offset - 1..=free.top()).rev() {
            rep.record(tk - tf * surv, 1e-14);
            tk += k.at(y);
            tf += free.at(y);
        }
    }
    Ok(rep)
}

/// max_m |E[S(m) - g(m); T > m] + E[S(T); T <= m] + g(m) P(T > m)|.
pub fn martingale_residual(p: &KilledProfile) -> f64 {
    let mut stopped = 0.0;
    let mut worst: f64 = 0.0;
    for m in 0..p.survival.len() {
        stopped += p.absorbed_pos[m];
        let r = p.partial_v[m] + stopped + p.levels[m] as f64 * p.survival[m];
        worst = worst.max(r.abs());
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OvershootReport {
    pub n: u64,
    pub m: u64,
    /// E[g(T) - S(T); m < T <= n]
    pub overshoot: f64,
    /// 2 (G(n) + eps_n B_n) P(T > m)
    pub bound: f64,
}

pub fn overshoot_check(seq: &LawSequence, boundary: &BoundarySpec, n: u64, m: u64) -> Result<OvershootReport> {
    let p = sequence_profile(seq, boundary, n)?;
    let lb = Lindeberg::new(seq, n);
    let g_n = boundary.running_max(n)[n as usize];
    let overshoot = ((m + 1)..=n).map(|k| p.overshoot[k as usize]).sum();
    let bound = 2.0 * (g_n + lb.eps_n() * lb.b_n) * p.survival[m as usize];
    Ok(OvershootReport { n, m, overshoot, bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_moments() {
        for n in [1u64, 2, 3, 10, 1000, 1_000_000] {
            let law = counterexample_family(n).unwrap();
            assert!(law.mean().abs() < 1e-12);
            assert!((law.variance() - 1.0).abs() < 1e-12, "{n}");
            let (p, a) = counterexample_params(n);
            assert!((n as f64 * p + a * a * (1.0 - p) - 1.0).abs() < 1e-12);
            assert!(a > 0.0 && a <= 1.0);
        }
        let (p1, a1) = counterexample_params(1);
        assert!((p1 - 1.0 / 3f64.ln()).abs() < 1e-15);
        assert!((a1 - 1.0).abs() < 1e-15);
        assert_eq!(counterexample_family(1).unwrap().atoms(), &[(-1.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn lindeberg_examples() {
        let ssrw = LawSequence::Iid(StepLaw::ssrw());
        let r = lindeberg_profile(&ssrw, 100, &[0.05, 0.1, 0.11, 0.5]);
        for (got, want) in r.l.iter().zip([1.0, 1.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(r.eps_n <= 0.1 + 1e-12);
        let spike = LawSequence::spiked(StepLaw::ssrw(), 5, 100.0).unwrap();
        let s = lindeberg_profile(&spike, 100, &[0.01, 0.5]);
        assert!(s.l[0] > 0.99 && s.l[1] > 0.99);
        let ce = LawSequence::Counterexample;
        let a = lindeberg_profile(&ce, 1000, &[0.5]).l[0];
        let b = lindeberg_profile(&ce, 10_000, &[0.5]).l[0];
        assert!(b < a && b > 0.0);
    }

    #[test]
    fn divergence_terms() {
        let r = divergence_diagnostic(&LawSequence::Counterexample, 1000, 0.5).unwrap();
        // n = 1 is the merged law {+-1: 1/2}; afterwards each term is p_n / 2
        let direct: f64 = 0.5 + (2..=1000u64).map(|n| 0.5 * counterexample_params(n).0).sum::<f64>();
        assert!((r.at(1000).unwrap() - direct).abs() < 1e-12);
        let iid = divergence_diagnostic(&LawSequence::Iid(StepLaw::ssrw()), 1000, 0.5).unwrap();
        let first3 = 0.5 + 0.5 / 2f64.sqrt() + 0.5 / 3f64.sqrt();
        assert!((iid.at(1000).unwrap() - first3).abs() < 1e-15);
    }

    #[test]
    fn mc_matches_dp() {
        let seq = LawSequence::Iid(StepLaw::ssrw());
        let g0 = BoundarySpec::constant(0.0);
        let b = simulate_tg(&seq, &g0, 2, 100_000, 3).unwrap();
        let e = b.survival();
        assert!((e.p - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / 1e5).sqrt());
        let absorbed = b.records.iter().filter(|r| !r.survived).count() as u64;
        assert_eq!(absorbed + e.survivors, 100_000);
        let z = simulate_tg(&seq, &g0, 0, 10, 3).unwrap();
        assert_eq!(z.survivors(), 10);
    }

    #[test]
    fn batch_is_worker_count_independent() {
        let seq = LawSequence::Iid(StepLaw::sym2());
        let g = BoundarySpec::constant(-2.0);
        let a = simulate_tg(&seq, &g, 50, 2000, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_tg(&seq, &g, 50, 2000, 11).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn batch_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.bin");
        let seq = LawSequence::Iid(StepLaw::ssrw());
        let b = simulate_tg(&seq, &BoundarySpec::constant(-1.0), 20, 500, 1).unwrap();
        write_batch(&path, &b).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16 + 25 * 500);
        assert_eq!(read_batch(&path).unwrap(), b);
    }

    #[test]
    fn splitting_agrees_with_dp() {
        let law = StepLaw::ssrw();
        let seq = LawSequence::Iid(law.clone());
        let g = BoundarySpec::constant(0.0);
        let n = 4000;
        let exact = boundary_profile(&law, &g, n, Window::default()).unwrap().survival[n as usize];
        let c = split_endpoints(&seq, &g, n, 4000, 5).unwrap();
        assert_eq!(c.method, ConditioningMethod::Splitting);
        assert!(conditioned_endpoints(&seq, &g, 200, 1000, 5).unwrap().method == ConditioningMethod::Rejection);
        assert!((c.survival - exact).abs() < 4.0 * c.survival_se, "{} vs {exact}", c.survival);
    }

    #[test]
    fn ug_examples() {
        let ssrw = LawSequence::Iid(StepLaw::ssrw());
        let s = ug_slow_variation(&ssrw, &BoundarySpec::constant(-1.0), 1000).unwrap();
        assert!(s.statistic < 1e-12 && (s.u_n - 1.0).abs() < 1e-12);
        let g0 = BoundarySpec::constant(0.0);
        // only the first step can overshoot 0, so U_g is 1/2 from n = 1 on
        let a = ug_slow_variation(&ssrw, &g0, 10_000).unwrap();
        assert!(a.statistic < 1e-12 && (a.u_n - 0.5).abs() < 1e-12);
        let sym = LawSequence::Iid(StepLaw::sym2());
        let a = ug_slow_variation(&sym, &g0, 1000).unwrap();
        let b = ug_slow_variation(&sym, &g0, 10_000).unwrap();
        assert!(b.statistic < a.statistic);
    }

    #[test]
    fn tail_ratio_trends() {
        let ssrw = LawSequence::Iid(StepLaw::ssrw());
        let rows = tail_vs_theorem(&ssrw, &BoundarySpec::constant(-1.0), &[100, 10_000]).unwrap();
        assert!((rows[1].ratio - 1.0).abs() < 0.02);
        assert!((rows[1].ratio - 1.0).abs() < (rows[0].ratio - 1.0).abs());
        let g = BoundarySpec::Power { scale: 1.0, exponent: 0.2, offset: -1.0 };
        let rows = tail_vs_theorem(&ssrw, &g, &[10_000]).unwrap();
        assert!((rows[0].ratio - 1.0).abs() < 0.05, "{}", rows[0].ratio);
    }

    #[test]
    fn exact_suites_on_small_profiles() {
        for law in [StepLaw::ssrw(), StepLaw::left_skew()] {
            for g in [BoundarySpec::constant(0.0), BoundarySpec::constant(-3.0)] {
                assert_eq!(fkg_check(&law, &g, 200).unwrap().violations, 0);
                let p = boundary_profile(&law, &g, 200, Window::Full).unwrap();
                assert!(martingale_residual(&p) < 1e-10);
            }
        }
        let seq = LawSequence::Iid(StepLaw::sym2());
        let o = overshoot_check(&seq, &BoundarySpec::constant(0.0), 400, 50).unwrap();
        assert!(o.overshoot > 0.0 && o.overshoot <= o.bound);
    }
}
