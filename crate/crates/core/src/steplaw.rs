//! Increment distributions with finitely many atoms, lattice periodicity,
//! convolution and the unconditional local limit predictor.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    Lattice,
    RealAtomic,
}

/// A finite-support increment law. Atoms are sorted by value, merged and
/// strictly positive.
#[derive(Clone, Debug)]
pub struct StepLaw {
    kind: LawKind,
    atoms: Vec<(f64, f64)>,
    exact: Option<Vec<BigRational>>,
    mean: f64,
    var: f64,
    name: String,
}

impl StepLaw {
    pub fn lattice(atoms: &[(i64, f64)]) -> Result<Self> {
        let a: Vec<(f64, f64)> = atoms.iter().map(|&(v, p)| (v as f64, p)).collect();
        Self::build(LawKind::Lattice, a, None)
    }

    pub fn real(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::build(LawKind::RealAtomic, atoms.to_vec(), None)
    }

    /// Lattice law with exact rational probabilities (enables exact DP).
    pub fn lattice_exact(atoms: &[(i64, BigRational)]) -> Result<Self> {
        let a: Vec<(f64, f64)> = atoms
            .iter()
            .map(|(v, p)| (*v as f64, p.to_f64().unwrap_or(f64::NAN)))
            .collect();
        let ex: Vec<BigRational> = atoms.iter().map(|(_, p)| p.clone()).collect();
        Self::build(LawKind::Lattice, a, Some(ex))
    }

    fn build(kind: LawKind, raw: Vec<(f64, f64)>, exact: Option<Vec<BigRational>>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidLaw("no atoms".into()));
        }
        let mut idx: Vec<usize> = (0..raw.len()).collect();
        for &(v, p) in &raw {
            if !v.is_finite() || !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidLaw(format!("bad atom ({v}, {p})")));
            }
            if kind == LawKind::Lattice && v.fract() != 0.0 {
                return Err(Error::InvalidLaw(format!("lattice atom {v} is not an integer")));
            }
        }
        idx.sort_by(|&i, &j| raw[i].0.total_cmp(&raw[j].0));
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut ex: Vec<BigRational> = Vec::new();
        for i in idx {
            let (v, p) = raw[i];
            let q = exact.as_ref().map(|e| e[i].clone());
            if let Some(q) = &q {
                if *q < BigRational::zero() {
                    return Err(Error::InvalidLaw("negative probability".into()));
                }
            }
            match atoms.last_mut() {
                Some(last) if last.0 == v => {
                    last.1 += p;
                    if let Some(q) = q {
                        let l = ex.last_mut().unwrap();
                        *l = &*l + q;
                    }
                }
                _ => {
                    atoms.push((v, p));
                    if let Some(q) = q {
                        ex.push(q);
                    }
                }
            }
        }
        // drop null atoms; they are not part of the support
        let keep: Vec<bool> = atoms.iter().map(|a| a.1 > 0.0).collect();
        let atoms: Vec<(f64, f64)> = atoms.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(a, _)| a).collect();
        let exact = if exact.is_some() {
            let ex: Vec<BigRational> = ex.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(a, _)| a).collect();
            let s: BigRational = ex.iter().fold(BigRational::zero(), |s, q| s + q);
            if !s.is_one() {
                return Err(Error::InvalidLaw(format!("exact probabilities sum to {s}")));
            }
            Some(ex)
        } else {
            None
        };
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("no atom with positive mass".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        let mean = atoms.iter().map(|&(v, p)| v * p).sum::<f64>();
        let var = atoms.iter().map(|&(v, p)| (v - mean) * (v - mean) * p).sum::<f64>();
        let name = atoms
            .iter()
            .map(|(v, p)| format!("{v}:{p}"))
            .collect::<Vec<_>>()
            .join(",");
        Ok(StepLaw { kind, atoms, exact, mean, var, name })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn exact_probs(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn int_atoms(&self) -> Result<Vec<(i64, f64)>> {
        if self.kind != LawKind::Lattice {
            return Err(Error::NonLattice);
        }
        Ok(self.atoms.iter().map(|&(v, p)| (v as i64, p)).collect())
    }

    pub fn exact_int_atoms(&self) -> Result<Vec<(i64, BigRational)>> {
        let ex = self
            .exact
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("law has no exact probabilities".into()))?;
        Ok(self.atoms.iter().zip(ex).map(|(a, q)| (a.0 as i64, q.clone())).collect())
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.var
    }

    pub fn sigma(&self) -> f64 {
        self.var.sqrt()
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// Largest downward jump magnitude (0 if the law has no negative atom).
    pub fn max_down(&self) -> f64 {
        (-self.min_value()).max(0.0)
    }

    pub fn max_up(&self) -> f64 {
        self.max_value().max(0.0)
    }

    pub fn is_left_continuous(&self) -> bool {
        self.kind == LawKind::Lattice && self.min_value() >= -1.0
    }

    pub fn require_centered(&self) -> Result<()> {
        let scale = self.atoms.iter().map(|a| a.0.abs()).fold(1.0, f64::max);
        if self.mean.abs() > 1e-12 * scale {
            return Err(Error::NonCentered(self.mean));
        }
        Ok(())
    }

    pub fn pmf(&self) -> Result<Pmf> {
        let ia = self.int_atoms()?;
        let lo = ia[0].0;
        let hi = ia[ia.len() - 1].0;
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        for (v, p) in ia {
            probs[(v - lo) as usize] = p;
        }
        Ok(Pmf { offset: lo, probs })
    }

    /// P(X <= t).
    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 <= t).map(|a| a.1).sum()
    }

    pub fn ssrw() -> Self {
        exact_builtin(&[(-1, 1, 2), (1, 1, 2)], "ssrw")
    }

    /// Uniform on {-1, 0, 1}.
    pub fn uniform3() -> Self {
        exact_builtin(&[(-1, 1, 3), (0, 1, 3), (1, 1, 3)], "uniform3")
    }

    /// {-1: 2/3, +2: 1/3}, left-continuous with period 3.
    pub fn left_skew() -> Self {
        exact_builtin(&[(-1, 2, 3), (2, 1, 3)], "leftskew")
    }

    /// Uniform on {-2, -1, 1, 2}: overshoots below 0 of size up to 1.
    pub fn sym2() -> Self {
        exact_builtin(&[(-2, 1, 4), (-1, 1, 4), (1, 1, 4), (2, 1, 4)], "sym2")
    }

    /// {-1: 3/5, +1: 2/5}, negative drift.
    pub fn drift() -> Self {
        exact_builtin(&[(-1, 3, 5), (1, 2, 5)], "drift")
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "ssrw" => Ok(Self::ssrw()),
            "uniform3" => Ok(Self::uniform3()),
            "leftskew" => Ok(Self::left_skew()),
            "sym2" => Ok(Self::sym2()),
            "drift" => Ok(Self::drift()),
            _ => Err(Error::InvalidLaw(format!("unknown built-in law '{name}'"))),
        }
    }
}

pub const BUILTIN_LAWS: [&str; 5] = ["ssrw", "uniform3", "leftskew", "sym2", "drift"];

fn exact_builtin(spec: &[(i64, i64, i64)], name: &str) -> StepLaw {
    let atoms: Vec<(i64, BigRational)> = spec
        .iter()
        .map(|&(v, n, d)| (v, BigRational::new(BigInt::from(n), BigInt::from(d))))
        .collect();
    StepLaw::lattice_exact(&atoms).expect("built-in law is valid").named(name)
}

impl fmt::Display for StepLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn moments(law: &StepLaw) -> (f64, f64) {
    (law.mean(), law.variance())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodInfo {
    pub d: i64,
    pub a: i64,
}

impl PeriodInfo {
    /// Membership in D_n = {x : (x - a n)/d is an integer}.
    pub fn contains(&self, n: u64, x: i64) -> bool {
        (x as i128 - self.a as i128 * n as i128).rem_euclid(self.d as i128) == 0
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn period_shift(law: &StepLaw) -> Result<PeriodInfo> {
    let ia = law.int_atoms()?;
    let v0 = ia[0].0;
    if ia.len() == 1 {
        if v0 == 0 {
            return Err(Error::DegenerateLaw);
        }
        return Ok(PeriodInfo { d: v0.abs(), a: 0 });
    }
    let d = ia.iter().fold(0, |g, &(v, _)| gcd(g, v - v0));
    Ok(PeriodInfo { d, a: v0.rem_euclid(d) })
}

/// Dense sub-probability mass function on a window of the integers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pmf {
    pub offset: i64,
    pub probs: Vec<f64>,
}

impl Pmf {
    pub fn delta(x: i64) -> Self {
        Pmf { offset: x, probs: vec![1.0] }
    }

    pub fn empty() -> Self {
        Pmf { offset: 0, probs: Vec::new() }
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn at(&self, x: i64) -> f64 {
        let i = x - self.offset;
        if i < 0 || i >= self.probs.len() as i64 {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    /// Largest site covered by the window (offset - 1 when empty).
    pub fn top(&self) -> i64 {
        self.offset + self.probs.len() as i64 - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.offset + i as i64, p))
    }

    pub fn mean_mass(&self) -> f64 {
        self.iter().map(|(x, p)| x as f64 * p).sum()
    }

    /// P(X > y).
    pub fn tail_gt(&self, y: i64) -> f64 {
        self.iter().filter(|&(x, _)| x > y).map(|(_, p)| p).sum()
    }

    pub fn normalized(&self) -> Result<Pmf> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(Error::ZeroSurvival);
        }
        Ok(Pmf { offset: self.offset, probs: self.probs.iter().map(|p| p / m).collect() })
    }

    pub fn convolve_atoms(&self, atoms: &[(i64, f64)]) -> Pmf {
        if self.probs.is_empty() {
            return Pmf::empty();
        }
        let lo = atoms[0].0;
        let hi = atoms[atoms.len() - 1].0;
        let mut out = vec![0.0; self.probs.len() + (hi - lo) as usize];
        for &(v, p) in atoms {
            let shift = (v - lo) as usize;
            for (o, &q) in out[shift..shift + self.probs.len()].iter_mut().zip(&self.probs) {
                *o += p * q;
            }
        }
        Pmf { offset: self.offset + lo, probs: out }
    }
}

pub fn convolve(p: &Pmf, q: &Pmf) -> Pmf {
    if p.probs.is_empty() || q.probs.is_empty() {
        return Pmf::empty();
    }
    let mut out = vec![0.0; p.probs.len() + q.probs.len() - 1];
    for (i, &a) in p.probs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, &b) in q.probs.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    Pmf { offset: p.offset + q.offset, probs: out }
}

pub fn unconditional_pmf(law: &StepLaw, n: u64) -> Result<Pmf> {
    let ia = law.int_atoms()?;
    let mut p = Pmf::delta(0);
    for _ in 0..n {
        p = p.convolve_atoms(&ia);
    }
    Ok(p)
}

/// Exact pmf of S(n) with rational arithmetic; returns (offset, masses).
pub fn unconditional_pmf_exact(law: &StepLaw, n: u64) -> Result<(i64, Vec<BigRational>)> {
    let ia = law.exact_int_atoms()?;
    let lo = ia[0].0;
    let hi = ia[ia.len() - 1].0;
    let mut probs = vec![BigRational::one()];
    for _ in 0..n {
        let mut out = vec![BigRational::zero(); probs.len() + (hi - lo) as usize];
        for (v, p) in &ia {
            let s = (v - lo) as usize;
            for (i, q) in probs.iter().enumerate() {
                if !q.is_zero() {
                    out[s + i] += p * q;
                }
            }
        }
        probs = out;
    }
    Ok((lo * n as i64, probs))
}

/// Local CLT approximation of P(S(n) = x).
pub fn lclt_predictor(law: &StepLaw, n: u64, x: i64) -> Result<f64> {
    let per = period_shift(law)?;
    if !per.contains(n, x) {
        return Ok(0.0);
    }
    let nv = n as f64 * law.variance();
    let z = x as f64 - n as f64 * law.mean();
    Ok(per.d as f64 / (2.0 * PI * nv).sqrt() * (-z * z / (2.0 * nv)).exp())
}

/// Config representation of a law: either a built-in name or explicit atoms,
/// with probabilities given as numbers or exact fractions such as "2/3".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    Named(String),
    Atoms {
        kind: LawKind,
        atoms: Vec<AtomSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub value: f64,
    pub prob: ProbSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbSpec {
    Number(f64),
    Text(String),
}

pub fn parse_fraction(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("'{s}' is not a fraction"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(n, d))
    } else if let Ok(i) = s.parse::<BigInt>() {
        Ok(BigRational::from_integer(i))
    } else {
        // finite decimal: "0.25" -> 25/100
        let (int, frac) = s.split_once('.').ok_or_else(bad)?;
        let digits = format!("{int}{frac}");
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        Ok(BigRational::new(n, d))
    }
}

impl ProbSpec {
    fn exact(&self) -> Result<Option<BigRational>> {
        match self {
            ProbSpec::Number(_) => Ok(None),
            ProbSpec::Text(s) => parse_fraction(s).map(Some),
        }
    }

    fn value(&self) -> Result<f64> {
        match self {
            ProbSpec::Number(x) => Ok(*x),
            ProbSpec::Text(s) => Ok(parse_fraction(s)?.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

impl LawSpec {
    pub fn build(&self) -> Result<StepLaw> {
        match self {
            LawSpec::Named(n) => StepLaw::builtin(n),
            LawSpec::Atoms { kind, atoms } => {
                let exact: Vec<Option<BigRational>> =
                    atoms.iter().map(|a| a.prob.exact()).collect::<Result<_>>()?;
                if *kind == LawKind::Lattice && exact.iter().all(Option::is_some) {
                    let ia = atoms
                        .iter()
                        .zip(exact)
                        .map(|(a, q)| {
                            if a.value.fract() != 0.0 {
                                return Err(Error::InvalidLaw(format!("lattice atom {} is not an integer", a.value)));
                            }
                            Ok((a.value as i64, q.unwrap()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    return StepLaw::lattice_exact(&ia);
                }
                let fa = atoms.iter().map(|a| Ok((a.value, a.prob.value()?))).collect::<Result<Vec<_>>>()?;
                match kind {
                    LawKind::Lattice => {
                        StepLaw::build(LawKind::Lattice, fa, None)
                    }
                    LawKind::RealAtomic => StepLaw::real(&fa),
                }
            }
        }
    }
}

/// Inline syntax for the command line: a built-in name, or
/// `value:prob,value:prob,...` (lattice if every value is an integer).
impl FromStr for LawSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.contains(':') {
            return Ok(LawSpec::Named(s.to_string()));
        }
        let mut atoms = Vec::new();
        for part in s.split(',') {
            let (v, p) = part
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("atom '{part}' is not value:prob")))?;
            let value: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("bad value '{v}'")))?;
            atoms.push(AtomSpec { value, prob: ProbSpec::Text(p.trim().to_string()) });
        }
        let kind = if atoms.iter().all(|a| a.value.fract() == 0.0) {
            LawKind::Lattice
        } else {
            LawKind::RealAtomic
        };
        Ok(LawSpec::Atoms { kind, atoms })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn moments_of_builtins() {
        assert_eq!(moments(&StepLaw::ssrw()), (0.0, 1.0));
        let (m, v) = moments(&StepLaw::left_skew());
        assert!(m.abs() < 1e-15 && (v - 2.0).abs() < 1e-15);
        assert_eq!(moments(&StepLaw::lattice(&[(0, 1.0)]).unwrap()), (0.0, 0.0));
    }

    #[test]
    fn period_examples() {
        assert_eq!(period_shift(&StepLaw::ssrw()).unwrap(), PeriodInfo { d: 2, a: 1 });
        assert_eq!(period_shift(&StepLaw::uniform3()).unwrap(), PeriodInfo { d: 1, a: 0 });
        assert_eq!(period_shift(&StepLaw::left_skew()).unwrap(), PeriodInfo { d: 3, a: 2 });
        let single = StepLaw::lattice(&[(3, 1.0)]).unwrap();
        assert_eq!(period_shift(&single).unwrap(), PeriodInfo { d: 3, a: 0 });
        let zero = StepLaw::lattice(&[(0, 1.0)]).unwrap();
        assert!(matches!(period_shift(&zero), Err(Error::DegenerateLaw)));
    }

    #[test]
    fn convolution_examples() {
        let s = StepLaw::ssrw().pmf().unwrap();
        assert_eq!(convolve(&Pmf::delta(0), &s), s);
        let two = convolve(&s, &s);
        assert_eq!(two.offset, -2);
        assert_eq!(two.probs, vec![0.25, 0.0, 0.5, 0.0, 0.25]);
        let k = StepLaw::left_skew().pmf().unwrap();
        assert_eq!(convolve(&k, &Pmf::delta(0)), k);
    }

    #[test]
    fn unconditional_examples() {
        let law = StepLaw::ssrw();
        assert_eq!(unconditional_pmf(&law, 0).unwrap(), Pmf::delta(0));
        assert_eq!(unconditional_pmf(&law, 3).unwrap().at(1), 0.375);
        let (off, ex) = unconditional_pmf_exact(&law, 3).unwrap();
        assert_eq!(ex[(1 - off) as usize], q(3, 8));
    }

    #[test]
    fn lclt_examples() {
        let law = StepLaw::ssrw();
        let n = 100;
        assert!((lclt_predictor(&law, n, 0).unwrap() - 2.0 / (2.0 * PI * n as f64).sqrt()).abs() < 1e-15);
        assert_eq!(lclt_predictor(&law, n, 1).unwrap(), 0.0);
        let u = StepLaw::uniform3();
        let want = 1.0 / (2.0 * PI * 100.0 * (2.0 / 3.0)).sqrt();
        assert!((lclt_predictor(&u, 100, 0).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn support_lies_in_residue_class() {
        for law in [StepLaw::ssrw(), StepLaw::left_skew(), StepLaw::sym2()] {
            let per = period_shift(&law).unwrap();
            for n in 0..=40u64 {
                let p = unconditional_pmf(&law, n).unwrap();
                for (x, m) in p.iter() {
                    if !per.contains(n, x) {
                        assert_eq!(m, 0.0, "{law} n={n} x={x}");
                    }
                }
                assert!((p.mass() - 1.0).abs() < 1e-12 * (n.max(1)) as f64);
            }
        }
    }

    #[test]
    fn rejects_invalid_laws() {
        assert!(StepLaw::lattice(&[(1, 0.5)]).is_err());
        assert!(StepLaw::lattice(&[(1, -0.5), (2, 1.5)]).is_err());
        assert!(StepLaw::real(&[]).is_err());
        assert!(StepLaw::lattice_exact(&[(1, q(1, 3)), (-1, q(1, 3))]).is_err());
    }

    #[test]
    fn spec_parsing() {
        let spec: LawSpec = "-1:2/3, 2:1/3".parse().unwrap();
        let law = spec.build().unwrap();
        assert_eq!(law.exact_probs().unwrap()[0], q(2, 3));
        assert_eq!(law.kind(), LawKind::Lattice);
        let spec: LawSpec = "-1.5:0.4,1:0.6".parse().unwrap();
        assert_eq!(spec.build().unwrap().kind(), LawKind::RealAtomic);
        let named: LawSpec = "ssrw".parse().unwrap();
        assert_eq!(named.build().unwrap().variance(), 1.0);
        assert_eq!(parse_fraction("0.25").unwrap(), q(1, 4));
        assert!(parse_fraction("1/0").is_err());
    }

    #[test]
    fn merges_duplicate_atoms() {
        let law = StepLaw::lattice(&[(1, 0.25), (-1, 0.5), (1, 0.25)]).unwrap();
        assert_eq!(law.atoms(), &[(-1.0, 0.5), (1.0, 0.5)]);
    }
}
