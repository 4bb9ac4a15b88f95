//! Declarative parameter sweeps, figure presets and CSV output.
//!
//! A scenario is a small TOML document:
//!
//! ```toml
//! kind = "rabi_inversion"
//! units = "inverse_g"
//! tag = "example"
//!
//! [params]
//! theta = "pi/4"
//! n = 0
//! g = 1.0
//! t_m = "pi/2"
//! t = { start = 0.0, stop = 20.0, steps = 201 }
//! ```
//!
//! Every parameter is either a fixed value or an inclusive grid
//! `{ start, stop, steps }`. Values may be numbers or products and quotients
//! of numbers with `pi`, such as `"64*pi/5"`. Swept parameters become the
//! leading CSV columns, in the order the scenario kind lists them, and the
//! last one varies fastest.
//!
//! `units` says how time-valued parameters are read. With `"seconds"` they are
//! taken as they are; with `"inverse_g"` a value `x` means `t = x/g`, so the
//! numbers are `gt`. Frequencies are always angular frequencies.

use std::collections::BTreeMap;
use std::fmt;
use std::f64::consts::{PI, TAU};
use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytic::{
    inversion, inversion_resonant, inversion_single_cavity, photon_average, rabi_initial_state,
    shuttle_probability, simulate_rabi, xi_coefficients, AnalyticError, RabiScenario,
};
use crate::dispersive::{
    conditioned_state, double_cat_probability, double_cat_probability_from_states,
    interaction_time, joint_probability, n_max_estimate, pipeline_conditioned,
    schedule_sign, simulate_dispersive, time_for_signed_theta, validate_regime, AtomOutcome, ControlOutcome,
    DispersiveError, DispersiveScenario, RegimeReport,
};
use crate::dynamics::{
    inversion_of, photon_number_of, Cavity, ClosedFormEvolution, Evolver, SystemParams,
};
use crate::hilbert::{fidelity, C64};
use crate::measurement::{
    atom_z_basis, control_basis, measure_index, probabilities, MeasurementError,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest accepted `|analytic − simulated|` in an oracle check.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    RabiInversion,
    PhotonAverage,
    ExchangeProbability,
    XiTable,
    DispersiveCatprob,
    DispersiveStates,
    OracleCheck,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::RabiInversion => "rabi_inversion",
            Self::PhotonAverage => "photon_average",
            Self::ExchangeProbability => "exchange_probability",
            Self::XiTable => "xi_table",
            Self::DispersiveCatprob => "dispersive_catprob",
            Self::DispersiveStates => "dispersive_states",
            Self::OracleCheck => "oracle_check",
        }
    }

    fn is_rabi(self) -> bool {
        !matches!(self, Self::DispersiveCatprob | Self::DispersiveStates)
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Seconds,
    InverseG,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomBasisKind {
    Z,
    X,
}

/// A number, or a product and quotient of numbers and `pi`/`tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn eval(&self) -> Result<f64, String> {
        match self {
            Self::Number(x) => Ok(*x),
            Self::Expr(s) => eval_expr(s),
        }
    }
}

fn eval_expr(src: &str) -> Result<f64, String> {
    let body = src.trim();
    let (sign, mut rest) = match body.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, body),
    };
    let mut acc = sign;
    let mut op = '*';
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let token = rest[..end].trim();
        let value = match token {
            "pi" => PI,
            "tau" => TAU,
            _ => token
                .parse::<f64>()
                .map_err(|_| format!("cannot read `{token}` in `{src}`"))?,
        };
        acc = if op == '*' { acc * value } else { acc / value };
        if end == rest.len() {
            break;
        }
        op = rest.as_bytes()[end] as char;
        rest = &rest[end + 1..];
    }
    if !acc.is_finite() {
        return Err(format!("`{src}` is not finite"));
    }
    Ok(acc)
}

/// Inclusive grid of `steps` evenly spaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: Scalar,
    pub stop: Scalar,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Fixed(Scalar),
    Range(GridRange),
}

impl ParamSpec {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Self::Fixed(x) => Ok(vec![x.eval()?]),
            Self::Range(r) => {
                if r.steps == 0 {
                    return Err("a grid needs steps >= 1".into());
                }
                let (a, b) = (r.start.eval()?, r.stop.eval()?);
                if r.steps == 1 {
                    return Ok(vec![a]);
                }
                let h = (b - a) / (r.steps - 1) as f64;
                Ok((0..r.steps)
                    .map(|i| if i + 1 == r.steps { b } else { a + h * i as f64 })
                    .collect())
            }
        }
    }

    fn is_swept(&self) -> bool {
        matches!(self, Self::Range(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_basis: Option<AtomBasisKind>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ScenarioKind,
    units: Option<Units>,
    tag: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    params: BTreeMap<String, toml::Spanned<ParamSpec>>,
    #[serde(default)]
    output: OutputSpec,
    #[serde(default)]
    sampling: SamplingSpec,
}

/// One validated sweep description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub params: BTreeMap<String, ParamSpec>,
    pub output: OutputSpec,
    pub sampling: SamplingSpec,
    #[serde(skip)]
    lines: BTreeMap<String, usize>,
}

/// Parse or validation failure, located where possible.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "`{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("refusing to run outside the dispersive regime at {point}: {report}")]
    Regime { point: String, report: RegimeReport },

    #[error("at {point}: {source}")]
    Analytic {
        point: String,
        source: AnalyticError,
    },

    #[error("at {point}: {source}")]
    Dispersive {
        point: String,
        source: DispersiveError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type ScenarioResult<T> = Result<T, ScenarioError>;

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(src, s.start)),
            field: None,
            message: e.message().trim().to_string(),
        })?;
        let mut lines = BTreeMap::new();
        let mut params = BTreeMap::new();
        for (name, spanned) in raw.params {
            lines.insert(name.clone(), line_of(src, spanned.span().start));
            params.insert(name, spanned.into_inner());
        }
        let config = Self {
            kind: raw.kind,
            units: raw.units,
            tag: raw.tag,
            seed: raw.seed,
            params,
            output: raw.output,
            sampling: raw.sampling,
            lines,
        };
        Plan::new(&config)?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> ScenarioResult<Self> {
        let src = std::fs::read_to_string(path)?;
        Ok(Self::from_toml(&src)?)
    }

    /// Canonical TOML form; independent of layout and comments in the source.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// SHA-256 of [`canonical`](Self::canonical), in hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn error(&self, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.lines.get(field).copied(),
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

#[derive(Debug, Copy, Clone, PartialEq)]
enum Default {
    Required,
    Value(f64),
    Optional,
}

#[derive(Debug, Copy, Clone)]
struct ParamDef {
    name: &'static str,
    default: Default,
    integer: bool,
    time: bool,
}

const fn def(name: &'static str, default: Default, integer: bool, time: bool) -> ParamDef {
    ParamDef {
        name,
        default,
        integer,
        time,
    }
}

const RABI_PARAMS: &[ParamDef] = &[
    def("theta", Default::Required, false, false),
    def("phi", Default::Value(0.0), false, false),
    def("n0", Default::Required, true, false),
    def("n1", Default::Required, true, false),
    def("g0", Default::Required, false, false),
    def("g1", Default::Required, false, false),
    def("delta0", Default::Value(0.0), false, false),
    def("delta1", Default::Value(0.0), false, false),
    def("omega0", Default::Value(1.0), false, false),
    def("omega1", Default::Value(1.0), false, false),
    def("t_m", Default::Required, false, true),
    def("t", Default::Required, false, true),
    def("n_max", Default::Optional, true, false),
];

const RABI_ALIASES: &[(&str, [&str; 2])] = &[
    ("n", ["n0", "n1"]),
    ("g", ["g0", "g1"]),
    ("delta", ["delta0", "delta1"]),
    ("omega", ["omega0", "omega1"]),
];

const CATPROB_PARAMS: &[ParamDef] = &[
    def("theta", Default::Required, false, false),
    def("alpha_sq", Default::Required, false, false),
    def("omega", Default::Optional, false, false),
    def("delta", Default::Optional, false, false),
    def("g", Default::Optional, false, false),
];

const STATES_PARAMS: &[ParamDef] = &[
    def("alpha_sq", Default::Required, false, false),
    def("alpha_phase", Default::Value(0.0), false, false),
    def("chi", Default::Required, false, false),
    def("m", Default::Value(1.0), true, false),
    def("omega", Default::Required, false, false),
    def("delta", Default::Required, false, false),
    def("g", Default::Required, false, false),
    def("t0", Default::Value(0.0), false, true),
    def("t", Default::Optional, false, true),
    def("theta", Default::Optional, false, false),
    def("n_max", Default::Optional, true, false),
];

fn schema(kind: ScenarioKind) -> (&'static [ParamDef], &'static [(&'static str, [&'static str; 2])]) {
    match kind {
        ScenarioKind::DispersiveCatprob => (CATPROB_PARAMS, &[]),
        ScenarioKind::DispersiveStates => (STATES_PARAMS, &[]),
        _ => (RABI_PARAMS, RABI_ALIASES),
    }
}

#[derive(Debug, Clone)]
struct Axis {
    name: String,
    targets: Vec<&'static str>,
    values: Vec<f64>,
    swept: bool,
}

/// Resolved grid axes of a config.
#[derive(Debug, Clone)]
struct Plan {
    axes: Vec<Axis>,
    defaults: Vec<(&'static str, f64)>,
    time_names: Vec<&'static str>,
    units: Units,
}

/// Parameter values at one grid point, with times in seconds.
#[derive(Debug, Clone)]
pub struct Point {
    pub index: usize,
    values: BTreeMap<&'static str, f64>,
}

impl Point {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    fn req(&self, name: &str) -> f64 {
        self.values[name]
    }

    fn int(&self, name: &str) -> usize {
        self.values[name] as usize
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.values.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        format!("point {} ({})", self.index, parts.join(", "))
    }
}

impl Plan {
    fn new(config: &ScenarioConfig) -> Result<Self, ConfigError> {
        let (defs, aliases) = schema(config.kind);
        let mut covered: BTreeMap<&'static str, String> = BTreeMap::new();
        let mut axes = Vec::new();
        for (name, spec) in &config.params {
            let targets: Vec<&'static str> =
                if let Some((_, t)) = aliases.iter().find(|(a, _)| a == name) {
                    t.to_vec()
                } else if let Some(d) = defs.iter().find(|d| d.name == name) {
                    vec![d.name]
                } else {
                    return Err(config.error(
                        name,
                        format!("unknown parameter for kind {}", config.kind.name()),
                    ));
                };
            for t in &targets {
                if let Some(prev) = covered.insert(t, name.clone()) {
                    return Err(config.error(
                        name,
                        format!("`{t}` is already defined through `{prev}`"),
                    ));
                }
            }
            let values = spec.values().map_err(|m| config.error(name, m))?;
            for t in &targets {
                let d = defs.iter().find(|d| d.name == *t).expect("schema target");
                if d.integer && values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                    return Err(config.error(name, "must be a non-negative integer"));
                }
            }
            axes.push(Axis {
                name: name.clone(),
                targets,
                values,
                swept: spec.is_swept(),
            });
        }
        let position = |a: &Axis| defs.iter().position(|d| d.name == a.targets[0]);
        axes.sort_by_key(position);

        let mut defaults = Vec::new();
        for d in defs {
            if covered.contains_key(d.name) {
                continue;
            }
            match d.default {
                Default::Required => {
                    return Err(ConfigError {
                        line: None,
                        field: Some(format!("params.{}", d.name)),
                        message: format!("required by kind {}", config.kind.name()),
                    })
                }
                Default::Value(v) => defaults.push((d.name, v)),
                Default::Optional => {}
            }
        }

        let time_names: Vec<&'static str> = defs
            .iter()
            .filter(|d| d.time && covered.contains_key(d.name))
            .map(|d| d.name)
            .collect();
        let units = match config.units {
            Some(u) => u,
            None if time_names.is_empty() => Units::Seconds,
            None => {
                return Err(ConfigError {
                    line: None,
                    field: Some("units".into()),
                    message: format!(
                        "time-valued parameters ({}) need units = \"seconds\" or \"inverse_g\"",
                        time_names.join(", ")
                    ),
                })
            }
        };

        let plan = Self {
            axes,
            defaults,
            time_names,
            units,
        };
        plan.check_kind(config)?;
        Ok(plan)
    }

    fn check_kind(&self, config: &ScenarioConfig) -> Result<(), ConfigError> {
        let has = |n: &str| self.axes.iter().any(|a| a.targets.contains(&n));
        match config.kind {
            ScenarioKind::DispersiveCatprob => {
                let given = ["omega", "delta", "g"].iter().filter(|n| has(n)).count();
                if given != 0 && given != 3 {
                    return Err(config.error(
                        "g",
                        "omega, delta and g go together: give all three or none",
                    ));
                }
            }
            ScenarioKind::DispersiveStates => {
                if has("t") == has("theta") {
                    return Err(ConfigError {
                        line: None,
                        field: Some("params.t".into()),
                        message: "give exactly one of t and theta".into(),
                    });
                }
            }
            _ => {}
        }
        if let Some(cols) = &config.output.columns {
            let known = self.columns(config.kind, config.sampling.atom_basis, false);
            let sampled = self.columns(config.kind, config.sampling.atom_basis, true);
            for c in cols {
                if !known.contains(c) && !sampled.contains(c) && c != "valid" {
                    return Err(ConfigError {
                        line: None,
                        field: Some("output.columns".into()),
                        message: format!("unknown column `{c}`"),
                    });
                }
            }
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    fn swept(&self) -> impl Iterator<Item = &Axis> {
        self.axes.iter().filter(|a| a.swept)
    }

    /// Axis values at `index`, in config units.
    fn raw(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[k] = axis.values[rem % n];
            rem /= n;
        }
        out
    }

    fn point(&self, kind: ScenarioKind, index: usize) -> Point {
        let mut values = BTreeMap::new();
        for (axis, v) in self.axes.iter().zip(self.raw(index)) {
            for t in &axis.targets {
                values.insert(*t, v);
            }
        }
        for (name, v) in &self.defaults {
            values.insert(*name, *v);
        }
        if self.units == Units::InverseG {
            let g = if kind.is_rabi() { values["g0"] } else { values["g"] };
            for name in &self.time_names {
                if let Some(v) = values.get_mut(name) {
                    *v /= g;
                }
            }
        }
        Point { index, values }
    }

    fn swept_row(&self, index: usize) -> Vec<f64> {
        self.axes
            .iter()
            .zip(self.raw(index))
            .filter(|(a, _)| a.swept)
            .map(|(_, v)| v)
            .collect()
    }

    fn columns(&self, kind: ScenarioKind, basis: Option<AtomBasisKind>, sampled: bool) -> Vec<String> {
        let mut cols: Vec<String> = self.swept().map(|a| a.name.clone()).collect();
        let obs: Vec<String> = if sampled {
            sample_columns(kind, basis)
        } else {
            observable_columns(kind)
        };
        cols.extend(obs);
        cols
    }
}

const OUTCOME_PAIRS: [(ControlOutcome, AtomOutcome); 8] = [
    (ControlOutcome::Plus, AtomOutcome::Excited),
    (ControlOutcome::Plus, AtomOutcome::Ground),
    (ControlOutcome::Minus, AtomOutcome::Excited),
    (ControlOutcome::Minus, AtomOutcome::Ground),
    (ControlOutcome::Plus, AtomOutcome::PlusX),
    (ControlOutcome::Plus, AtomOutcome::MinusX),
    (ControlOutcome::Minus, AtomOutcome::PlusX),
    (ControlOutcome::Minus, AtomOutcome::MinusX),
];

fn pair_column(c: ControlOutcome, a: AtomOutcome) -> String {
    let c = match c {
        ControlOutcome::Plus => "plus",
        ControlOutcome::Minus => "minus",
    };
    let a = match a {
        AtomOutcome::Excited => "e",
        AtomOutcome::Ground => "g",
        AtomOutcome::PlusX => "px",
        AtomOutcome::MinusX => "mx",
    };
    format!("p_{c}_{a}")
}

fn observable_columns(kind: ScenarioKind) -> Vec<String> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    match kind {
        ScenarioKind::RabiInversion => s(&["inversion", "single_cavity"]),
        ScenarioKind::PhotonAverage => s(&["photon_average_0", "photon_average_1", "single_cavity"]),
        ScenarioKind::ExchangeProbability => s(&["exchange_probability"]),
        ScenarioKind::XiTable => {
            let mut v = s(&["norm_n0"]);
            for j in 1..=8 {
                v.push(format!("xi{j}_re"));
                v.push(format!("xi{j}_im"));
            }
            v
        }
        ScenarioKind::DispersiveCatprob => s(&["probability"]),
        ScenarioKind::DispersiveStates => {
            let mut v = s(&["big_theta", "p_plus", "p_minus"]);
            v.extend(OUTCOME_PAIRS.iter().map(|(c, a)| pair_column(*c, *a)));
            v.extend(s(&[
                "catprob",
                "catprob_states",
                "fidelity_min",
                "cat_norm",
                "cat_overlap",
                "lambda",
                "photon_load",
            ]));
            v
        }
        ScenarioKind::OracleCheck => s(&[
            "inversion_diff",
            "photon_0_diff",
            "photon_1_diff",
            "xi_diff",
            "closed_form_diff",
            "max_abs_diff",
        ]),
    }
}

fn sample_columns(kind: ScenarioKind, basis: Option<AtomBasisKind>) -> Vec<String> {
    let mut v: Vec<String> = ["control", "atom", "probability", "count", "frequency"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if kind == ScenarioKind::DispersiveStates && basis == Some(AtomBasisKind::X) {
        v.extend(
            ["catcat_probability", "catcat_count", "catcat_frequency"]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    v
}

/// Named columns of real values with a provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Vec<(String, String)>,
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Largest finite entry of a column.
    pub fn max_of(&self, name: &str) -> Option<f64> {
        self.column(name)?
            .into_iter()
            .filter(|x| x.is_finite())
            .reduce(f64::max)
    }

    pub fn provenance_value(&self, key: &str) -> Option<&str> {
        self.provenance
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn select(&mut self, wanted: &[String]) -> Result<(), ConfigError> {
        let mut wanted = wanted.to_vec();
        let has_nan = self.rows.iter().any(|r| r.iter().any(|x| x.is_nan()));
        if has_nan && self.columns.iter().any(|c| c == "valid") && !wanted.iter().any(|c| c == "valid") {
            wanted.push("valid".into());
        }
        let mut idx = Vec::new();
        for w in &wanted {
            match self.columns.iter().position(|c| c == w) {
                Some(k) => idx.push(k),
                None => {
                    return Err(ConfigError {
                        line: None,
                        field: Some("output.columns".into()),
                        message: format!("column `{w}` is not produced by this run"),
                    })
                }
            }
        }
        self.rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|k| r[*k]).collect())
            .collect();
        self.columns = wanted;
        Ok(())
    }

    /// `# `-prefixed provenance lines, a header row and one row per grid
    /// point, numbers with 17 significant digits.
    pub fn to_csv(&self) -> ScenarioResult<String> {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
        }
        let body = w.into_inner().map_err(|e| e.into_error())?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is ASCII"));
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> ScenarioResult<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

fn provenance(config: &ScenarioConfig, plan: &Plan) -> Vec<(String, String)> {
    let mut p = vec![
        ("generator".to_string(), format!("jcpath {VERSION}")),
        ("kind".to_string(), config.kind.name().to_string()),
    ];
    if let Some(tag) = &config.tag {
        p.push(("tag".into(), tag.clone()));
    }
    let units = match plan.units {
        Units::Seconds => "seconds",
        Units::InverseG => "inverse_g",
    };
    p.push(("units".into(), units.into()));
    p.push(("config_sha256".into(), config.hash()));
    p
}

fn analytic_err(p: &Point) -> impl Fn(AnalyticError) -> ScenarioError + '_ {
    move |source| ScenarioError::Analytic {
        point: p.describe(),
        source,
    }
}

fn dispersive_err(p: &Point) -> impl Fn(DispersiveError) -> ScenarioError + '_ {
    move |source| match source {
        DispersiveError::Regime(report) => ScenarioError::Regime {
            point: p.describe(),
            report,
        },
        source => ScenarioError::Dispersive {
            point: p.describe(),
            source,
        },
    }
}

fn rabi_scenario(p: &Point) -> RabiScenario {
    RabiScenario {
        theta: p.req("theta"),
        phi: p.req("phi"),
        n0: p.int("n0"),
        n1: p.int("n1"),
        g0: p.req("g0"),
        g1: p.req("g1"),
        delta0: p.req("delta0"),
        delta1: p.req("delta1"),
        omega0: p.req("omega0"),
        omega1: p.req("omega1"),
        t_m: p.req("t_m"),
        t: p.req("t"),
    }
}

fn rabi_n_max(p: &Point, s: &RabiScenario) -> usize {
    p.get("n_max")
        .map(|v| v as usize)
        .unwrap_or(s.n0.max(s.n1) + 1)
}

fn dispersive_scenario(p: &Point) -> ScenarioResult<DispersiveScenario> {
    let (omega, delta, g) = (p.req("omega"), p.req("delta"), p.req("g"));
    let alpha_sq = p.req("alpha_sq");
    let n_max = p
        .get("n_max")
        .map(|v| v as usize)
        .unwrap_or_else(|| n_max_estimate(alpha_sq));
    let params = SystemParams::identical(omega + delta, omega, g, n_max)
        .map_err(|e| dispersive_err(p)(e.into()))?;
    let m = p.int("m");
    let t0 = p.req("t0");
    let t = match p.get("t") {
        Some(t) => t,
        None => {
            let t_m = interaction_time(m, &params).map_err(dispersive_err(p))?;
            let sigma = schedule_sign(m, delta);
            time_for_signed_theta(sigma, p.req("chi"), params.omega_a, p.req("theta"), t0 + t_m)
        }
    };
    Ok(DispersiveScenario {
        alpha: C64::from_polar(alpha_sq.sqrt(), p.req("alpha_phase")),
        chi: p.req("chi"),
        m,
        t0,
        t,
        params,
    })
}

fn catprob_regime(p: &Point) -> Option<RegimeReport> {
    let (omega, delta, g) = (p.get("omega")?, p.get("delta")?, p.get("g")?);
    let alpha_sq = p.req("alpha_sq");
    let params = SystemParams::identical(omega + delta, omega, g, n_max_estimate(alpha_sq)).ok()?;
    Some(validate_regime(&DispersiveScenario {
        alpha: C64::new(alpha_sq.sqrt(), 0.0),
        chi: 0.0,
        m: 1,
        t0: 0.0,
        t: 0.0,
        params,
    }))
}

fn point_params(kind: ScenarioKind, p: &Point) -> Option<SystemParams> {
    let params = if kind.is_rabi() {
        rabi_scenario(p).system_params(1).ok()?
    } else {
        let (omega, delta, g) = (p.get("omega")?, p.get("delta")?, p.get("g")?);
        SystemParams::identical(omega + delta, omega, g, 1).ok()?
    };
    Some(params)
}

/// One warning per run for grid points where the rotating-wave
/// approximation is doubtful.
fn warn_rwa(kind: ScenarioKind, plan: &Plan) {
    let mut first = None;
    let mut count = 0;
    for i in 0..plan.len() {
        let p = plan.point(kind, i);
        if let Some(w) = point_params(kind, &p).and_then(|s| s.rwa_warnings().into_iter().next()) {
            count += 1;
            first.get_or_insert_with(|| format!("{w} at {}", p.describe()));
        }
    }
    if let Some(first) = first {
        warn!(
            "rotating-wave approximation questionable at {count} of {} grid points; first: {first}",
            plan.len()
        );
    }
}

fn check_regimes(kind: ScenarioKind, plan: &Plan) -> ScenarioResult<()> {
    warn_rwa(kind, plan);
    for i in 0..plan.len() {
        let p = plan.point(kind, i);
        let report = match kind {
            ScenarioKind::DispersiveCatprob => catprob_regime(&p),
            ScenarioKind::DispersiveStates => Some(validate_regime(&dispersive_scenario(&p)?)),
            _ => None,
        };
        if let Some(report) = report {
            if !report.passes() {
                return Err(ScenarioError::Regime {
                    point: p.describe(),
                    report,
                });
            }
        }
    }
    Ok(())
}

/// Observables at one point, or `None` when the times are out of order.
fn evaluate(kind: ScenarioKind, p: &Point) -> ScenarioResult<Option<Vec<f64>>> {
    if kind.is_rabi() && p.req("t") < p.req("t_m") {
        return Ok(None);
    }
    let values = match kind {
        ScenarioKind::RabiInversion => {
            let s = rabi_scenario(p);
            vec![
                inversion(&s).map_err(analytic_err(p))?,
                inversion_single_cavity(s.g0, s.delta0, s.n0, s.t),
            ]
        }
        ScenarioKind::PhotonAverage => {
            let s = rabi_scenario(p);
            let single = s.n0 as f64 + (1.0 - inversion_single_cavity(s.g0, s.delta0, s.n0, s.t)) / 2.0;
            vec![
                photon_average(&s, Cavity::Zero).map_err(analytic_err(p))?,
                photon_average(&s, Cavity::One).map_err(analytic_err(p))?,
                single,
            ]
        }
        ScenarioKind::ExchangeProbability => {
            vec![shuttle_probability(&rabi_scenario(p)).map_err(analytic_err(p))?]
        }
        ScenarioKind::XiTable => {
            let xi = xi_coefficients(&rabi_scenario(p)).map_err(analytic_err(p))?;
            let mut v = vec![xi.norm_n0];
            for z in xi.xi {
                v.push(z.re);
                v.push(z.im);
            }
            v
        }
        ScenarioKind::OracleCheck => oracle_row(p)?,
        ScenarioKind::DispersiveCatprob => {
            vec![double_cat_probability(p.req("theta"), p.req("alpha_sq"))]
        }
        ScenarioKind::DispersiveStates => {
            let s = dispersive_scenario(p)?;
            if s.t < s.t0 + s.interaction_time().map_err(dispersive_err(p))? {
                return Ok(None);
            }
            states_row(p, &s)?
        }
    };
    Ok(Some(values))
}

fn oracle_row(p: &Point) -> ScenarioResult<Vec<f64>> {
    let s = rabi_scenario(p);
    let err = analytic_err(p);
    let sim = simulate_rabi(&s, rabi_n_max(p, &s)).map_err(&err)?;
    let psi = &sim.final_state;
    let d_inv = (inversion(&s).map_err(&err)? - inversion_of(psi)).abs();
    let d0 = (photon_average(&s, Cavity::Zero).map_err(&err)? - photon_number_of(psi, Cavity::Zero)).abs();
    let d1 = (photon_average(&s, Cavity::One).map_err(&err)? - photon_number_of(psi, Cavity::One)).abs();
    let xi = xi_coefficients(&s).map_err(&err)?;
    let d_xi = xi
        .components(&s)
        .iter()
        .map(|(b, z)| (psi.amplitude(b) - z).norm())
        .fold(0.0, f64::max);
    let d_closed = if s.is_resonant() {
        (inversion_resonant(&s).map_err(&err)? - inversion_of(psi)).abs()
    } else {
        0.0
    };
    let max = [d_inv, d0, d1, d_xi, d_closed].into_iter().fold(0.0, f64::max);
    Ok(vec![d_inv, d0, d1, d_xi, d_closed, max])
}

fn states_row(p: &Point, s: &DispersiveScenario) -> ScenarioResult<Vec<f64>> {
    let err = dispersive_err(p);
    let psi = simulate_dispersive(s).map_err(&err)?;
    let mut probs = Vec::new();
    let mut fid_min = 1.0f64;
    for (c, a) in OUTCOME_PAIRS {
        let prob = joint_probability(&psi, c, a).map_err(&err)?;
        probs.push(prob);
        if let (Ok(built), Ok(piped)) = (conditioned_state(s, c, a), pipeline_conditioned(&psi, c, a)) {
            let f = fidelity(&built.state, &piped.state).map_err(|e| err(e.into()))?;
            fid_min = fid_min.min(f);
        }
    }
    let a2 = s.alpha_sq();
    let states = crate::dispersive::build_states(s).map_err(&err)?;
    let report = validate_regime(s);
    let mut row = vec![s.theta(), probs[0] + probs[1], probs[2] + probs[3]];
    row.extend(&probs);
    row.extend([
        double_cat_probability(s.theta(), a2),
        double_cat_probability_from_states(s, ControlOutcome::Plus, AtomOutcome::PlusX)
            .map_err(&err)?,
        fid_min,
        states.cat_norm,
        states.guards.cat_overlap,
        report.lambda,
        report.photon_load,
    ]);
    Ok(row)
}

fn finish(
    config: &ScenarioConfig,
    plan: &Plan,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    extra: Vec<(String, String)>,
) -> ScenarioResult<ResultTable> {
    let mut table = ResultTable {
        columns,
        rows,
        provenance: provenance(config, plan),
    };
    table.provenance.extend(extra);
    if let Some(cols) = &config.output.columns {
        table.select(cols)?;
    }
    Ok(table)
}

/// Evaluates every grid point. Rows follow grid order whatever the number of
/// worker threads.
pub fn run_scenario(config: &ScenarioConfig) -> ScenarioResult<ResultTable> {
    let plan = Plan::new(config)?;
    let kind = config.kind;
    check_regimes(kind, &plan)?;
    let results: Vec<ScenarioResult<Option<Vec<f64>>>> = (0..plan.len())
        .into_par_iter()
        .map(|i| evaluate(kind, &plan.point(kind, i)))
        .collect();
    let width = observable_columns(kind).len();
    let mut rows = Vec::with_capacity(results.len());
    let mut any_invalid = false;
    for (i, r) in results.into_iter().enumerate() {
        let mut row = plan.swept_row(i);
        match r? {
            Some(v) => {
                row.extend(v);
                row.push(1.0);
            }
            None => {
                any_invalid = true;
                row.extend(std::iter::repeat(f64::NAN).take(width));
                row.push(0.0);
            }
        }
        rows.push(row);
    }
    let mut columns = plan.columns(kind, None, false);
    if any_invalid {
        columns.push("valid".into());
    } else {
        for row in &mut rows {
            row.pop();
        }
    }
    finish(config, &plan, columns, rows, Vec::new())
}

/// One measurement outcome tree at a grid point: first outcome probabilities
/// and conditional second outcome probabilities, plus an optional third yes/no
/// test on selected leaves.
struct OutcomeTree {
    first: [f64; 2],
    second: [[f64; 2]; 2],
    third: Option<[[f64; 2]; 2]>,
}

fn rabi_tree(p: &Point) -> ScenarioResult<OutcomeTree> {
    let s = rabi_scenario(p);
    let err = analytic_err(p);
    let n_max = rabi_n_max(p, &s);
    let evolver = ClosedFormEvolution::new(s.system_params(n_max).map_err(&err)?);
    let psi0 = rabi_initial_state(&s, n_max).map_err(&err)?;
    let at_tm = evolver.evolve(&psi0, s.t_m).map_err(|e| err(e.into()))?;
    let basis = control_basis(s.theta, s.phi);
    let mut first = [0.0; 2];
    let mut second = [[0.0; 2]; 2];
    for k in 0..2 {
        match measure_index(&at_tm, &basis, k) {
            Ok(r) => {
                first[k] = r.probability;
                let late = evolver.evolve(&r.post_state, s.tau()).map_err(|e| err(e.into()))?;
                second[k] = probabilities(&late, &atom_z_basis()).map_err(|e| err(e.into()))?;
            }
            Err(MeasurementError::ZeroProbability { .. }) => {}
            Err(e) => return Err(err(e.into())),
        }
    }
    Ok(OutcomeTree {
        first,
        second,
        third: None,
    })
}

fn dispersive_tree(p: &Point, basis: AtomBasisKind) -> ScenarioResult<OutcomeTree> {
    let s = dispersive_scenario(p)?;
    let err = dispersive_err(p);
    let psi = simulate_dispersive(&s).map_err(&err)?;
    let atoms = match basis {
        AtomBasisKind::Z => [AtomOutcome::Excited, AtomOutcome::Ground],
        AtomBasisKind::X => [AtomOutcome::PlusX, AtomOutcome::MinusX],
    };
    let mut first = [0.0; 2];
    let mut second = [[0.0; 2]; 2];
    let mut third = [[0.0; 2]; 2];
    for (i, c) in ControlOutcome::ALL.into_iter().enumerate() {
        let joint = [
            joint_probability(&psi, c, atoms[0]).map_err(&err)?,
            joint_probability(&psi, c, atoms[1]).map_err(&err)?,
        ];
        first[i] = joint[0] + joint[1];
        for j in 0..2 {
            if first[i] > 0.0 {
                second[i][j] = joint[j] / first[i];
            }
            if basis == AtomBasisKind::X && joint[j] > 0.0 {
                third[i][j] = double_cat_probability_from_states(&s, c, atoms[j]).unwrap_or(0.0);
            }
        }
    }
    Ok(OutcomeTree {
        first,
        second,
        third: (basis == AtomBasisKind::X).then_some(third),
    })
}

fn pick(rng: &mut ChaCha8Rng, probs: [f64; 2]) -> usize {
    let u: f64 = rng.random();
    if u * (probs[0] + probs[1]) < probs[0] {
        0
    } else {
        1
    }
}

/// Draws `shots` sequential measurement records at every grid point with
/// ChaCha8 seeded by `seed`; grid point `i` uses stream `i`, so the result
/// does not depend on the number of threads.
///
/// Rabi kinds measure the control in `{|θ,φ⟩, |θ,φ⟩⊥}` at `t_m` and the atom
/// in `{e, g}` at `t`. `dispersive_states` measures the control in `{+, −}`
/// and the atom in the basis named by `sampling.atom_basis`; in the `x` basis
/// each branch is followed by a yes/no test for `|cat⟩|cat⟩`.
pub fn sample_measurements(config: &ScenarioConfig, shots: u64) -> ScenarioResult<ResultTable> {
    let plan = Plan::new(config)?;
    let kind = config.kind;
    let seed = config.seed.ok_or_else(|| ConfigError {
        line: None,
        field: Some("seed".into()),
        message: "sampling needs a seed".into(),
    })?;
    if shots == 0 {
        return Err(ConfigError {
            line: None,
            field: Some("sampling.shots".into()),
            message: "shots must be at least 1".into(),
        }
        .into());
    }
    if kind == ScenarioKind::DispersiveCatprob {
        return Err(ConfigError {
            line: None,
            field: Some("kind".into()),
            message: "dispersive_catprob has no state to sample".into(),
        }
        .into());
    }
    check_regimes(kind, &plan)?;
    let basis = config.sampling.atom_basis.unwrap_or(AtomBasisKind::Z);
    let trees: Vec<ScenarioResult<(OutcomeTree, [[u64; 2]; 2], [[u64; 2]; 2])>> = (0..plan.len())
        .into_par_iter()
        .map(|i| {
            let p = plan.point(kind, i);
            if kind.is_rabi() && p.req("t") < p.req("t_m") {
                return Err(ConfigError {
                    line: config.lines.get("t").copied(),
                    field: Some("t".into()),
                    message: format!("sampling needs t >= t_m at {}", p.describe()),
                }
                .into());
            }
            let tree = if kind.is_rabi() {
                rabi_tree(&p)?
            } else {
                dispersive_tree(&p, basis)?
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut counts = [[0u64; 2]; 2];
            let mut hits = [[0u64; 2]; 2];
            for _ in 0..shots {
                let a = pick(&mut rng, tree.first);
                let b = pick(&mut rng, tree.second[a]);
                counts[a][b] += 1;
                if let Some(third) = &tree.third {
                    let y = third[a][b];
                    if pick(&mut rng, [y, 1.0 - y]) == 0 {
                        hits[a][b] += 1;
                    }
                }
            }
            Ok((tree, counts, hits))
        })
        .collect();

    let mut rows = Vec::new();
    for (i, r) in trees.into_iter().enumerate() {
        let (tree, counts, hits) = r?;
        let swept = plan.swept_row(i);
        for a in 0..2 {
            for b in 0..2 {
                let mut row = swept.clone();
                let prob = tree.first[a] * tree.second[a][b];
                let n = counts[a][b];
                row.extend([a as f64, b as f64, prob, n as f64, n as f64 / shots as f64]);
                if let Some(third) = &tree.third {
                    let freq = if n == 0 { 0.0 } else { hits[a][b] as f64 / n as f64 };
                    row.extend([third[a][b], hits[a][b] as f64, freq]);
                }
                rows.push(row);
            }
        }
    }
    let columns = plan.columns(kind, Some(basis), true);
    let labels = if kind.is_rabi() {
        "control 0 = theta, 1 = theta_perp; atom 0 = e, 1 = g".to_string()
    } else {
        let atoms = match basis {
            AtomBasisKind::Z => "atom 0 = e, 1 = g",
            AtomBasisKind::X => "atom 0 = +x, 1 = -x",
        };
        format!("control 0 = +, 1 = -; {atoms}")
    };
    let extra = vec![
        ("rng".to_string(), "ChaCha8, stream = grid point index".to_string()),
        ("seed".to_string(), seed.to_string()),
        ("shots".to_string(), shots.to_string()),
        ("outcomes".to_string(), labels),
    ];
    finish(config, &plan, columns, rows, extra)
}

/// Sizes the global worker pool used by sweeps. Call once, before any run.
pub fn set_threads(n: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()
}

/// Runs `config`, sampling when it asks for shots.
pub fn execute(config: &ScenarioConfig) -> ScenarioResult<ResultTable> {
    match config.sampling.shots {
        Some(shots) => sample_measurements(config, shots),
        None => run_scenario(config),
    }
}

/// Outcome of an oracle-check run.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub table: ResultTable,
    pub max_abs_diff: f64,
}

impl OracleReport {
    pub fn passes(&self) -> bool {
        self.max_abs_diff <= ORACLE_TOLERANCE
    }
}

/// Runs an `oracle_check` config and reduces it to its largest discrepancy.
/// A NaN anywhere counts as a failure.
pub fn oracle_check(config: &ScenarioConfig) -> ScenarioResult<OracleReport> {
    if config.kind != ScenarioKind::OracleCheck {
        return Err(ConfigError {
            line: None,
            field: Some("kind".into()),
            message: "expected kind = \"oracle_check\"".into(),
        }
        .into());
    }
    let table = run_scenario(config)?;
    let max_abs_diff = table
        .column("max_abs_diff")
        .map(|c| {
            let valid = table.column("valid");
            c.iter()
                .enumerate()
                .filter(|(i, _)| valid.as_ref().is_none_or(|v| v[*i] == 1.0))
                .map(|(_, x)| if x.is_nan() { f64::INFINITY } else { *x })
                .fold(0.0, f64::max)
        })
        .unwrap_or(f64::INFINITY);
    Ok(OracleReport {
        table,
        max_abs_diff,
    })
}

const ORACLE_SUITE: &[(&str, &str)] = &[
    (
        "resonant_identical",
        r#"
kind = "oracle_check"
units = "inverse_g"
tag = "resonant_identical"

[params]
theta = { start = 0.0, stop = "pi/2", steps = 5 }
n = { start = 0, stop = 5, steps = 6 }
g = 1.0
omega = 20.0
t_m = { start = 0.0, stop = 6.0, steps = 7 }
t = { start = 0.0, stop = 20.0, steps = 11 }
"#,
    ),
    (
        "detuned_mixed",
        r#"
kind = "oracle_check"
units = "seconds"
tag = "detuned_mixed"

[params]
theta = { start = 0.1, stop = 1.4, steps = 4 }
phi = 0.7
n0 = { start = 0, stop = 3, steps = 4 }
n1 = 2
g0 = 0.8
g1 = 0.5
omega0 = 5.0
omega1 = 4.9
delta0 = 0.24
delta1 = 0.34
t_m = { start = 0.5, stop = 5.0, steps = 4 }
t = { start = 5.0, stop = 12.0, steps = 5 }
"#,
    ),
];

/// Configs run by `jcpath check`.
pub fn oracle_suite() -> Vec<(&'static str, ScenarioConfig)> {
    ORACLE_SUITE
        .iter()
        .map(|(name, src)| (*name, ScenarioConfig::from_toml(src).expect("built-in config")))
        .collect()
}

/// Θ grid of the double-cat contour.
pub const FIG8_THETA_STEPS: usize = 91;
/// `|α|²` grid of the double-cat contour, from 0.05 to 5.
pub const FIG8_ALPHA_SQ_STEPS: usize = 100;

const PRESETS: &[(&str, &str)] = &[
    (
        "fig2a",
        r#"
kind = "rabi_inversion"
units = "inverse_g"
tag = "fig2a"

[params]
theta = { start = 0.0, stop = "pi/4", steps = 3 }
n = 0
g = 1.0
omega = 20.0
t_m = "pi/2"
t = { start = "pi/2", stop = 20.0, steps = 401 }
"#,
    ),
    (
        "fig2b",
        r#"
kind = "rabi_inversion"
units = "inverse_g"
tag = "fig2b"

[params]
theta = "pi/4"
n = 0
g = 1.0
omega = 20.0
t_m = { start = 0.0, stop = "pi", steps = 5 }
t = { start = 0.0, stop = 20.0, steps = 401 }
"#,
    ),
    (
        "fig3a",
        r#"
kind = "rabi_inversion"
units = "inverse_g"
tag = "fig3a"

[params]
theta = "pi/4"
n = 1
g = 1.0
omega = 20.0
t_m = "pi"
t = { start = "pi", stop = 40.0, steps = 601 }
"#,
    ),
    (
        "fig3b",
        r#"
kind = "rabi_inversion"
units = "inverse_g"
tag = "fig3b"

[params]
theta = "pi/4"
n = 5
g = 1.0
omega = 20.0
t_m = "pi"
t = { start = "pi", stop = 40.0, steps = 601 }
"#,
    ),
    (
        "fig4ab",
        r#"
kind = "photon_average"
units = "seconds"
tag = "fig4ab"

[params]
theta = { start = 0.0, stop = "pi/2", steps = 5 }
n = 0
g = 0.5
omega = 10.0
t_m = "pi/2"
t = { start = "pi/2", stop = 40.0, steps = 401 }
"#,
    ),
    (
        "fig4cd",
        r#"
kind = "photon_average"
units = "seconds"
tag = "fig4cd"

[params]
theta = { start = 0.0, stop = "pi/2", steps = 5 }
n = 10
g = 0.5
omega = 10.0
t_m = "pi/2"
t = { start = "pi/2", stop = 40.0, steps = 401 }
"#,
    ),
    (
        "fig5",
        r#"
kind = "photon_average"
units = "seconds"
tag = "fig5"

[params]
theta = "pi/4"
n = 1
g = 0.2
omega = 5.0
t_m = { start = 0.0, stop = 30.0, steps = 61 }
t = { start = 0.0, stop = 60.0, steps = 61 }
"#,
    ),
    (
        "fig6a",
        r#"
kind = "exchange_probability"
units = "seconds"
tag = "fig6a"

[params]
theta = "pi/4"
n0 = 1
n1 = 0
g = 0.2
omega = 5.0
t = "64*pi/5"
t_m = { start = 0.0, stop = "64*pi/5", steps = 401 }
"#,
    ),
    (
        "fig6b",
        r#"
kind = "exchange_probability"
units = "seconds"
tag = "fig6b"

[params]
theta = "pi/4"
n0 = 10
n1 = 0
g = 0.2
omega = 5.0
t = "64*pi/5"
t_m = { start = 0.0, stop = "64*pi/5", steps = 401 }
"#,
    ),
    (
        "fig6c",
        r#"
kind = "exchange_probability"
units = "seconds"
tag = "fig6c"

[params]
theta = "pi/4"
n = 1
g = 0.2
omega = 5.0
t = "64*pi/5"
t_m = { start = 0.0, stop = "64*pi/5", steps = 401 }
"#,
    ),
    (
        "fig6d",
        r#"
kind = "exchange_probability"
units = "seconds"
tag = "fig6d"

[params]
theta = "pi/4"
n = 10
g = 0.2
omega = 5.0
t = "64*pi/5"
t_m = { start = 0.0, stop = "64*pi/5", steps = 401 }
"#,
    ),
    (
        "fig7",
        r#"
kind = "exchange_probability"
units = "seconds"
tag = "fig7"

[params]
theta = "pi/4"
n = 1
g = 0.2
omega = 5.0
t_m = { start = 0.0, stop = 30.0, steps = 61 }
t = { start = 0.0, stop = 60.0, steps = 61 }
"#,
    ),
    (
        "fig8",
        r#"
kind = "dispersive_catprob"
tag = "fig8"

[params]
theta = { start = 0.0, stop = "2*pi", steps = 91 }
alpha_sq = { start = 0.05, stop = 5.0, steps = 100 }
omega = 10.0
delta = 1.0
g = 0.015
"#,
    ),
];

/// Source text of a figure preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| s.trim_start())
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// The figure presets, in figure order.
pub fn figure_presets() -> Vec<(&'static str, ScenarioConfig)> {
    PRESETS
        .iter()
        .map(|(name, src)| (*name, ScenarioConfig::from_toml(src).expect("built-in preset")))
        .collect()
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    preset_source(name).map(|src| ScenarioConfig::from_toml(src).expect("built-in preset"))
}
