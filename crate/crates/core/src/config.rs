//! Run configuration: schema, parsing (TOML or JSON) and validation.
//!
//! ```toml
//! experiment = "sweep"
//! samples = 200
//! seed = 7
//! output_dir = "out/sweep"
//! lambda_grid = { start = 0.01, stop = 1e6, points = 25, spacing = "log" }
//!
//! [[ensemble]]
//! family = "BE"
//! l_a = 8
//! l_b = 8
//! gamma = 0.5
//! mu = 1.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensembles::{singular_cells, EnsembleSpec, Family, FamilyParams, ParamBounds};
use crate::experiments::Amplitude;
use crate::measures::LogBase;
use crate::theory::DModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sweep,
    FitD,
    Fss,
    Cutscan,
    Theory,
    OracleCheck,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::FitD => "fit-d",
            Experiment::Fss => "fss",
            Experiment::Cutscan => "cutscan",
            Experiment::Theory => "theory",
            Experiment::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Either an explicit list or an evenly spaced range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Range { start, stop, points, spacing } => {
                if points == 1 {
                    return vec![start];
                }
                (0..points)
                    .map(|i| {
                        let t = i as f64 / (points - 1) as f64;
                        match spacing {
                            Spacing::Linear => start + t * (stop - start),
                            Spacing::Log => (start.ln() + t * (stop.ln() - start.ln())).exp(),
                        }
                    })
                    .collect()
            }
        }
    }
}

/// One `[[ensemble]]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub family: Family,
    #[serde(default = "default_l")]
    pub l_a: u32,
    #[serde(default = "default_l")]
    pub l_b: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub mu: Option<f64>,
    pub w: Option<f64>,
    pub w_s: Option<f64>,
    pub hamming_radius: Option<u32>,
}

fn default_l() -> u32 {
    4
}

fn default_gamma() -> f64 {
    EnsembleSpec::DEFAULT_GAMMA
}

impl EnsembleSection {
    pub fn to_spec(&self, ee_squared: bool) -> Result<EnsembleSpec, String> {
        let params = match self.family {
            Family::Se => FamilyParams::Sparse {
                w: self.w.ok_or("SE needs `w`")?,
                w_s: self.w_s.ok_or("SE needs `w_s`")?,
                hamming_radius: self.hamming_radius.ok_or("SE needs `hamming_radius`")?,
            },
            _ => FamilyParams::Decay { mu: self.mu.unwrap_or(1.0) },
        };
        let spec = EnsembleSpec::new(self.family, self.l_a, self.l_b, params)
            .and_then(|s| s.with_gamma(self.gamma))
            .map_err(|e| e.to_string())?;
        Ok(spec.with_ee_squared(ee_squared))
    }
}

/// Parameters of the `theory` experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    pub d1: DModel,
    pub d2: DModel,
    pub tau: Option<f64>,
    /// Limiting `<R0>`; calibrated by Monte Carlo when absent.
    pub r0_inf: Option<f64>,
    /// `<Q^2>` estimate; `N^2` when absent.
    pub q2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub ensemble: Vec<EnsembleSection>,
    pub lambda_grid: Option<Grid>,
    pub alpha_grid: Option<Grid>,
    pub target_lambdas: Option<Grid>,
    /// `fit-d`: subsystem exponents (`l_a = l_b`); `fss`: total sizes `L`.
    pub sizes: Option<Vec<u32>>,
    /// `cutscan`: total size `L`.
    pub total: Option<u32>,
    /// `fss`: decay prefactor.
    pub c: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub calibration_samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(default)]
    pub ee_squared: bool,
    /// Use the shifted bracket in the `R0` interpolation.
    #[serde(default, rename = "eq16_variant")]
    pub shifted_bracket: bool,
    #[serde(default)]
    pub amplitude: Amplitude,
    pub param_bounds: Option<ParamBounds>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// `oracle-check`: number of random specs.
    #[serde(default = "default_oracle_specs")]
    pub oracle_specs: usize,
    #[serde(default)]
    pub dump_samples: bool,
    pub theory: Option<TheorySection>,
}

fn default_samples() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_bootstrap() -> usize {
    200
}

fn default_oracle_specs() -> usize {
    200
}

/// A parse failure with its location in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ParseError {}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ParseError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => {
                    let before = &text[..span.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                    (Some(line), Some(col))
                }
                None => (None, None),
            };
            ParseError { line, column, message: e.message().to_string() }
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, ParseError> {
        serde_json::from_str(text).map_err(|e| ParseError {
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        })
    }

    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError {
            line: None,
            column: None,
            message: format!("{}: {e}", path.display()),
        })?;
        if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn bounds(&self) -> ParamBounds {
        self.param_bounds.unwrap_or_default()
    }

    pub fn specs(&self) -> Result<Vec<EnsembleSpec>, String> {
        self.ensemble.iter().map(|s| s.to_spec(self.ee_squared)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.field, self.message)
    }
}

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn error(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic { severity: Severity::Error, field: field.into(), message: message.into() });
    }

    fn warn(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic { severity: Severity::Warning, field: field.into(), message: message.into() });
    }

    fn grid(&mut self, field: &str, grid: &Option<Grid>, positive: bool) -> Option<Vec<f64>> {
        let Some(g) = grid else {
            self.error(field, "required for this experiment");
            return None;
        };
        if let Grid::Range { start, stop, points, spacing } = g {
            if *points == 0 {
                self.error(field, "grid is empty");
                return None;
            }
            if *spacing == Spacing::Log && !(*start > 0.0 && *stop > 0.0) {
                self.error(field, "log spacing needs positive start and stop");
                return None;
            }
        }
        let v = g.values();
        if v.is_empty() {
            self.error(field, "grid is empty");
            return None;
        }
        if v.iter().any(|x| !x.is_finite()) {
            self.error(field, "grid values must be finite");
        }
        if v.windows(2).any(|w| !(w[0] < w[1])) {
            self.error(field, "grid must be strictly increasing");
        }
        if positive && v.iter().any(|&x| !(x > 0.0)) {
            self.error(field, "grid values must be positive");
        }
        Some(v)
    }
}

/// Every problem that would stop `run`, plus warnings. Empty means the
/// configuration is clean.
pub fn validate(config: &RunConfig) -> Vec<Diagnostic> {
    let mut d = Diags(Vec::new());
    let Some(exp) = config.experiment else {
        d.error("experiment", "no experiment selected");
        return d.0;
    };
    if config.samples < 2 {
        d.error("samples", format!("need at least 2 samples, got {}", config.samples));
    }
    if config.workers == Some(0) {
        d.error("workers", "worker count must be positive");
    }
    if let Some(b) = config.param_bounds {
        if !(b.lo > 0.0 && b.lo < b.hi) {
            d.error("param_bounds", "need 0 < lo < hi");
        }
    }
    let needs_ensemble = !matches!(exp, Experiment::OracleCheck);
    if needs_ensemble && config.ensemble.is_empty() {
        d.error("ensemble", "at least one [[ensemble]] section is required");
    }
    for (i, sec) in config.ensemble.iter().enumerate() {
        let field = format!("ensemble[{i}]");
        match sec.to_spec(config.ee_squared) {
            Ok(spec) => {
                let cells = singular_cells(&spec);
                if !cells.is_empty() {
                    let shown: Vec<String> =
                        cells.iter().take(8).map(|(k, l)| format!("({k},{l})")).collect();
                    d.warn(
                        field,
                        format!(
                            "{} cell(s) with 1 - 2*gamma*h = 0: {}{}",
                            cells.len(),
                            shown.join(", "),
                            if cells.len() > 8 { ", ..." } else { "" }
                        ),
                    );
                }
            }
            Err(e) => d.error(field, e),
        }
    }
    match exp {
        Experiment::Sweep => {
            d.grid("lambda_grid", &config.lambda_grid, true);
            if config.samples < 100 {
                d.warn("samples", "fewer than 100 samples per point; curves will be noisy");
            }
        }
        Experiment::FitD => {
            d.grid("lambda_grid", &config.lambda_grid, true);
            match &config.sizes {
                Some(s) if s.len() >= 3 => {
                    if s.iter().any(|&l| l < 2) {
                        d.error("sizes", "subsystem exponents must be >= 2");
                    }
                }
                _ => d.error("sizes", "need at least 3 sizes"),
            }
        }
        Experiment::Fss => {
            if let Some(v) = d.grid("alpha_grid", &config.alpha_grid, true) {
                if v.iter().any(|&a| !(a > 0.0 && a < 2.0)) {
                    d.error("alpha_grid", "alpha must lie in (0, 2)");
                }
            }
            match &config.sizes {
                Some(s) if s.len() >= 2 => {
                    if s.iter().any(|&l| l % 2 != 0 || l < 2) {
                        d.error("sizes", "total sizes must be even");
                    }
                }
                _ => d.error("sizes", "need at least 2 total sizes"),
            }
            if !config.c.is_some_and(|c| c > 0.0) {
                d.error("c", "positive prefactor required");
            }
            if config.ensemble.iter().any(|s| s.family == Family::Se) {
                d.error("ensemble", "the criticality study covers BE, PE and EE only");
            }
        }
        Experiment::Cutscan => {
            d.grid("target_lambdas", &config.target_lambdas, true);
            match config.total {
                Some(l) if l >= 2 && l % 2 == 0 => {}
                _ => d.error("total", "even total size L required"),
            }
        }
        Experiment::Theory => {
            d.grid("lambda_grid", &config.lambda_grid, false);
            match &config.theory {
                None => d.error("theory", "[theory] section with d1 and d2 required"),
                Some(t) => {
                    for (name, m) in [("theory.d1", t.d1), ("theory.d2", t.d2)] {
                        if !(m.a > 0.0 && m.b >= 0.0) {
                            d.error(name, "need a > 0 and b >= 0");
                        }
                    }
                }
            }
            if let Some(sec) = config.ensemble.first() {
                if sec.l_a < 2 {
                    d.error("ensemble[0].l_a", "theory curves need l_a >= 2");
                }
            }
        }
        Experiment::OracleCheck => {
            if config.oracle_specs == 0 {
                d.error("oracle_specs", "need at least one spec");
            }
        }
    }
    d.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "sweep"
samples = 100
lambda_grid = [0.1, 1.0, 10.0]

[[ensemble]]
family = "BE"
l_a = 3
l_b = 3
mu = 2.0
"#;

    #[test]
    fn minimal_config_is_clean() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(validate(&c), vec![]);
        assert_eq!(c.specs().unwrap()[0].gamma, 1.0);
    }

    #[test]
    fn one_sample_flagged() {
        let mut c = RunConfig::from_toml_str(MINIMAL).unwrap();
        c.samples = 1;
        let d = validate(&c);
        assert!(d.iter().any(|x| x.severity == Severity::Error && x.field == "samples"));
    }

    #[test]
    fn empty_grid_names_field() {
        let text = MINIMAL.replace("[0.1, 1.0, 10.0]", "[]");
        let c = RunConfig::from_toml_str(&text).unwrap();
        let d = validate(&c);
        assert!(d.iter().any(|x| x.severity == Severity::Error && x.field == "lambda_grid"));
    }

    #[test]
    fn singular_pe_cell_warned() {
        // gamma = 1: h_12 = mu / (mu + 1) equals 1/2 at mu = 1.
        let text = MINIMAL.replace("family = \"BE\"", "family = \"PE\"").replace("mu = 2.0", "mu = 1.0");
        let c = RunConfig::from_toml_str(&text).unwrap();
        let d = validate(&c);
        let w: Vec<_> = d.iter().filter(|x| x.severity == Severity::Warning).collect();
        assert_eq!(w.len(), 1, "{d:?}");
        assert!(w[0].message.contains("(1,2)"), "{}", w[0].message);
    }

    #[test]
    fn parse_error_has_line() {
        let err = RunConfig::from_toml_str("experiment = \"sweep\"\nsamples = \"many\"\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = RunConfig::from_toml_str("bogus_key = 1\n").unwrap_err();
        assert!(err.message.contains("bogus_key"));
    }

    #[test]
    fn json_is_equivalent() {
        let json = r#"{"experiment":"sweep","samples":100,"lambda_grid":[0.1,1.0,10.0],
            "ensemble":[{"family":"BE","l_a":3,"l_b":3,"mu":2.0}]}"#;
        assert_eq!(RunConfig::from_json_str(json).unwrap(), RunConfig::from_toml_str(MINIMAL).unwrap());
    }

    #[test]
    fn range_grids() {
        let g = Grid::Range { start: 1.0, stop: 100.0, points: 3, spacing: Spacing::Log };
        let v = g.values();
        assert!((v[1] - 10.0).abs() < 1e-12);
        let g = Grid::Range { start: 0.0, stop: 1.0, points: 5, spacing: Spacing::Linear };
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
