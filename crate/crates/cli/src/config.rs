use std::path::{Path, PathBuf};

use fluctlab::chain::{ChainKernel, MajorantY};
use fluctlab::exactdp::{BoundarySpec, Window};
use fluctlab::steplaw::LawSpec;
use fluctlab::universal::LawSequence;
use fluctlab::{Error, Result, StepLaw};
use serde::{Deserialize, Serialize};

/// One experiment: what to run, on which law or kernel, with which
/// parameters. Command-line invocations are translated into this form, so a
/// stored record can always be replayed with `fluctlab run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operation: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majorant: Option<MajorantY>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// several horizons, for tables over n
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// truncation order N of power series
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    /// DP horizon used to estimate harmonic functions
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u8>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    /// append-only JSON-lines result store
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store: Option<PathBuf>,
    /// binary trial batch (simulate tg)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Named(String),
    Tabulated(TabulatedKernel),
}

/// Custom kernel: regime i applies where floor(x / band) mod #regimes == i;
/// jumps are in ticks of size h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedKernel {
    pub name: String,
    pub h: f64,
    pub band: f64,
    pub regimes: Vec<Vec<(i64, f64)>>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<ChainKernel> {
        match self {
            KernelSpec::Named(n) => ChainKernel::builtin(n),
            KernelSpec::Tabulated(t) => ChainKernel::new(&t.name, t.h, t.band, t.regimes.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceSpec {
    /// i.i.d. copies of the configured law
    Iid,
    Counterexample,
    /// the configured law, with step `at` scaled by `scale`
    Spiked { at: u64, scale: f64 },
}

impl ExperimentConfig {
    pub fn new(operation: &str) -> Self {
        ExperimentConfig {
            operation: operation.to_string(),
            seed: 0,
            law: None,
            kernel: None,
            sequence: None,
            boundary: None,
            majorant: None,
            params: Params::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn law(&self) -> Result<StepLaw> {
        self.law.as_ref().map_or_else(|| Ok(StepLaw::ssrw()), LawSpec::build)
    }

    pub fn kernel(&self) -> Result<ChainKernel> {
        self.kernel.as_ref().map_or_else(|| Ok(ChainKernel::region_switched()), KernelSpec::build)
    }

    pub fn sequence(&self) -> Result<LawSequence> {
        match self.sequence.as_ref().unwrap_or(&SequenceSpec::Iid) {
            SequenceSpec::Iid => Ok(LawSequence::Iid(self.law()?)),
            SequenceSpec::Counterexample => Ok(LawSequence::Counterexample),
            SequenceSpec::Spiked { at, scale } => LawSequence::spiked(self.law()?, *at, *scale),
        }
    }

    pub fn boundary(&self) -> BoundarySpec {
        self.boundary.clone().unwrap_or(BoundarySpec::Constant { value: 0.0 })
    }

    pub fn majorant(&self) -> MajorantY {
        self.majorant.unwrap_or(MajorantY::Bounded { m: 6.0 })
    }

    pub fn window(&self) -> Window {
        self.params.window.unwrap_or_default()
    }
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("missing parameter '{name}'")))
}

impl Params {
    pub fn x_int(&self) -> Result<i64> {
        let x = need(self.x, "x")?;
        if x.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!("x = {x} must be an integer for lattice walks")));
        }
        Ok(x as i64)
    }

    pub fn x(&self) -> Result<f64> {
        need(self.x, "x")
    }

    pub fn n(&self) -> Result<u64> {
        need(self.n, "n")
    }

    pub fn trials(&self) -> Result<u64> {
        need(self.trials, "trials")
    }
}

/// `const:V`, `power:SCALE,EXP,OFFSET` or `table:g1,g2,...`.
pub fn parse_boundary(s: &str) -> Result<BoundarySpec> {
    let bad = || Error::Parse(format!("bad boundary '{s}'"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = rest.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    match (kind, nums.as_slice()) {
        ("const", [v]) => Ok(BoundarySpec::Constant { value: *v }),
        ("power", [scale, exponent, offset]) => Ok(BoundarySpec::Power { scale: *scale, exponent: *exponent, offset: *offset }),
        ("table", values) if !values.is_empty() => Ok(BoundarySpec::Table { values: values.to_vec() }),
        _ => Err(bad()),
    }
}

/// `bounded:M`, `log-pareto:Y0` or `inverse-square`.
pub fn parse_majorant(s: &str) -> Result<MajorantY> {
    let bad = || Error::Parse(format!("bad majorant '{s}'"));
    match s.split_once(':') {
        Some(("bounded", m)) => Ok(MajorantY::Bounded { m: m.parse().map_err(|_| bad())? }),
        Some(("log-pareto", y0)) => Ok(MajorantY::LogPareto { y0: y0.parse().map_err(|_| bad())? }),
        None if s == "inverse-square" => Ok(MajorantY::InverseSquare),
        _ => Err(bad()),
    }
}

/// `iid`, `counterexample` or `spiked:AT,SCALE`.
pub fn parse_sequence(s: &str) -> Result<SequenceSpec> {
    let bad = || Error::Parse(format!("bad sequence '{s}'"));
    match s.split_once(':') {
        None if s == "iid" => Ok(SequenceSpec::Iid),
        None if s == "counterexample" => Ok(SequenceSpec::Counterexample),
        Some(("spiked", rest)) => {
            let (at, scale) = rest.split_once(',').ok_or_else(bad)?;
            Ok(SequenceSpec::Spiked { at: at.parse().map_err(|_| bad())?, scale: scale.parse().map_err(|_| bad())? })
        }
        _ => Err(bad()),
    }
}

pub fn parse_window(s: &str) -> Result<Window> {
    match s {
        "full" => Ok(Window::Full),
        "clip" => Ok(Window::default()),
        _ => Err(Error::Parse(format!("bad window '{s}' (full or clip)"))),
    }
}
