//! TOML system descriptions.
//!
//! A config names its `kind` and carries one block of the same name:
//!
//! ```toml
//! kind = "complex"
//!
//! [experiment]
//! modes = 32
//! t_final = 0.01
//!
//! [complex.a]
//! m11 = [[0, 0.0, 0.01]]   # (k, re, im) triples
//! ```
//!
//! Coefficient blocks are tables of `m11`, `m12`, `m21`, `m22` triple lists;
//! missing entries are zero.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use dispersive_core::evolve::DEFAULT_LADDER;
use dispersive_core::frame::FrameState;
use dispersive_core::periodic::PeriodicScalar;
use dispersive_core::wellposed::{ComplexSystem, RealSystem, SingleEquation};
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Complex,
    Real,
    Single,
    Frame,
    RealTimeDependent,
    Dichotomy,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Complex => "complex",
            Kind::Real => "real",
            Kind::Single => "single",
            Kind::Frame => "frame",
            Kind::RealTimeDependent => "real_time_dependent",
            Kind::Dichotomy => "dichotomy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Expm,
    Step,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    /// Truncation for single-N runs.
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// N-ladder for growth studies.
    #[serde(default = "default_ladder")]
    pub ladder: Vec<usize>,
    #[serde(default = "default_t")]
    pub t_final: f64,
    pub r: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_method")]
    pub method: MethodName,
    pub dt: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_modes() -> usize {
    32
}

fn default_ladder() -> Vec<usize> {
    DEFAULT_LADDER.to_vec()
}

fn default_t() -> f64 {
    0.01
}

fn default_tolerance() -> f64 {
    dispersive_core::wellposed::DEFAULT_TOLERANCE
}

fn default_method() -> MethodName {
    MethodName::Expm
}

fn default_samples() -> usize {
    dispersive_core::evolve::MIN_SAMPLES
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            modes: default_modes(),
            ladder: default_ladder(),
            t_final: default_t(),
            r: None,
            tolerance: default_tolerance(),
            method: default_method(),
            dt: None,
            samples: default_samples(),
        }
    }
}

/// Initial data for `evolve`; components default to `1 + cos x` and `sin x`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    #[serde(default = "default_u1")]
    pub u1: PeriodicScalar,
    #[serde(default = "default_u2")]
    pub u2: PeriodicScalar,
}

fn default_u1() -> PeriodicScalar {
    &PeriodicScalar::real_constant(1.0) + &PeriodicScalar::cos(1)
}

fn default_u2() -> PeriodicScalar {
    PeriodicScalar::sin(1)
}

impl Default for Initial {
    fn default() -> Self {
        Self { u1: default_u1(), u2: default_u2() }
    }
}

/// One snapshot of a time-dependent real system.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    #[serde(flatten)]
    pub system: RealSystem,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesBlock {
    pub label: String,
    pub kind: Spanned<Kind>,
    pub complex: Option<ComplexSystem>,
    pub real: Option<Spanned<RealSystem>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Spanned<Kind>,
    #[serde(default)]
    experiment: Experiment,
    #[serde(default)]
    initial: Initial,
    complex: Option<ComplexSystem>,
    real: Option<Spanned<RealSystem>>,
    single: Option<SingleEquation>,
    frame: Option<Spanned<FrameState>>,
    real_time_dependent: Option<Vec<Spanned<Snapshot>>>,
    dichotomy: Option<Vec<SeriesBlock>>,
}

/// The system a config describes, validated for its kind.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    Complex(ComplexSystem),
    Real(RealSystem),
    Single(SingleEquation),
    Frame(FrameState),
    RealTimeDependent(Vec<Snapshot>),
    Dichotomy(Vec<(String, SystemSpec)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub kind: Kind,
    pub system: SystemSpec,
    pub experiment: Experiment,
    pub initial: Initial,
}

/// A config problem, anchored to a line when the source position is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path.display(), l, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Anchor<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Anchor<'_> {
    fn at(&self, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: self.path.to_path_buf(),
            line: span.map(|s| line_of(self.src, s.start)),
            message: message.into(),
        }
    }

    fn missing(&self, kind: &Spanned<Kind>, block: &str) -> ConfigError {
        self.at(
            Some(kind.span()),
            format!("kind `{}` needs a `[{block}]` block, none found", kind.get_ref().name()),
        )
    }

    fn real(&self, sys: Spanned<RealSystem>, block: &str) -> Result<RealSystem, ConfigError> {
        let span = sys.span();
        let sys = sys.into_inner();
        sys.validate().map_err(|e| self.at(Some(span), format!("block `{block}`: {e}")))?;
        Ok(sys)
    }
}

pub fn load(path: &Path) -> Result<Config, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse(path, &src)
}

pub fn parse(path: &Path, src: &str) -> Result<Config, ConfigError> {
    let anchor = Anchor { path, src };
    let raw: RawConfig = toml::from_str(src).map_err(|e| anchor.at(e.span(), e.message().trim_end()))?;
    let kind = *raw.kind.get_ref();
    let system = match kind {
        Kind::Complex => SystemSpec::Complex(raw.complex.ok_or_else(|| anchor.missing(&raw.kind, "complex"))?),
        Kind::Real => {
            let block = raw.real.ok_or_else(|| anchor.missing(&raw.kind, "real"))?;
            SystemSpec::Real(anchor.real(block, "real")?)
        }
        Kind::Single => SystemSpec::Single(raw.single.ok_or_else(|| anchor.missing(&raw.kind, "single"))?),
        Kind::Frame => {
            let block = raw.frame.ok_or_else(|| anchor.missing(&raw.kind, "frame"))?;
            let span = block.span();
            let state = block.into_inner();
            state.validate().map_err(|e| anchor.at(Some(span), format!("block `frame`: {e}")))?;
            SystemSpec::Frame(state)
        }
        Kind::RealTimeDependent => {
            let blocks = raw
                .real_time_dependent
                .filter(|b| !b.is_empty())
                .ok_or_else(|| anchor.missing(&raw.kind, "[real_time_dependent]"))?;
            let mut snaps = Vec::with_capacity(blocks.len());
            for b in blocks {
                let span = b.span();
                let snap = b.into_inner();
                snap.system.validate().map_err(|e| anchor.at(Some(span.clone()), format!("snapshot t = {}: {e}", snap.t)))?;
                if snaps.last().is_some_and(|p: &Snapshot| p.t >= snap.t) {
                    return Err(anchor.at(Some(span), "snapshot times must increase"));
                }
                snaps.push(snap);
            }
            SystemSpec::RealTimeDependent(snaps)
        }
        Kind::Dichotomy => {
            let blocks =
                raw.dichotomy.filter(|b| !b.is_empty()).ok_or_else(|| anchor.missing(&raw.kind, "[dichotomy]"))?;
            let mut series = Vec::with_capacity(blocks.len());
            for b in blocks {
                let sys = match b.kind.get_ref() {
                    Kind::Complex => SystemSpec::Complex(b.complex.ok_or_else(|| anchor.missing(&b.kind, "complex"))?),
                    Kind::Real => {
                        let block = b.real.ok_or_else(|| anchor.missing(&b.kind, "real"))?;
                        SystemSpec::Real(anchor.real(block, "real")?)
                    }
                    other => {
                        return Err(anchor.at(
                            Some(b.kind.span()),
                            format!("dichotomy series must be complex or real, got `{}`", other.name()),
                        ))
                    }
                };
                series.push((b.label, sys));
            }
            SystemSpec::Dichotomy(series)
        }
    };
    check_experiment(&anchor, &raw.experiment)?;
    Ok(Config { kind, system, experiment: raw.experiment, initial: raw.initial })
}

fn check_experiment(anchor: &Anchor<'_>, e: &Experiment) -> Result<(), ConfigError> {
    let bad = |m: String| Err(anchor.at(None, format!("experiment: {m}")));
    if e.modes == 0 {
        return bad("modes must be positive".into());
    }
    if e.ladder.is_empty() || e.ladder.contains(&0) {
        return bad("ladder must be a nonempty list of positive mode counts".into());
    }
    if !(e.t_final.is_finite() && e.t_final >= 0.0) {
        return bad(format!("t_final = {} is not a nonnegative number", e.t_final));
    }
    if !(e.tolerance.is_finite() && e.tolerance >= 0.0) {
        return bad(format!("tolerance = {} is not a nonnegative number", e.tolerance));
    }
    if e.r.is_some_and(|r| !(r.is_finite() && r > 0.0)) {
        return bad("r must be positive".into());
    }
    if e.dt.is_some_and(|dt| !(dt.is_finite() && dt > 0.0)) {
        return bad("dt must be positive".into());
    }
    Ok(())
}
