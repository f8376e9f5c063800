//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [window]
//! preset = "half-box-sqrt2"   # or: file = "window.csv" (columns re,im)
//! n = 4096
//! support = [0.0, 1.0]
//!
//! [lattice]
//! a = 1.0
//! b = 2.0
//! k_max = 4
//!
//! [field]
//! t = 0.55
//! partner_scale = "sigma^-1"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use hgframe_core::grid::{window_preset, LatticeSpec, SampledWindow, TorusGrid, WindowPreset};
use hgframe_core::operator::{build_ht, OperatorField, ScaleExpr};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_WINDOW_SAMPLES: usize = 1024;
pub const DEFAULT_N_ALPHA: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub window: Option<WindowSpec>,
    /// Window of the partner field; the primary window when absent.
    pub partner_window: Option<WindowSpec>,
    pub lattice: Option<LatticeConfig>,
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub scan: Option<ScanConfig>,
    pub classify: Option<ClassifyConfig>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// `box`, `half-box-sqrt2`, `gaussian`, `hat` or `zero`.
    pub preset: Option<String>,
    /// CSV file with columns `re,im`, one row per sample.
    pub file: Option<PathBuf>,
    #[serde(default = "default_window_samples")]
    pub n: usize,
    /// Sampled interval `[lo, hi)`; presets pick a sensible default.
    pub support: Option<[f64; 2]>,
}

fn default_window_samples() -> usize {
    DEFAULT_WINDOW_SAMPLES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_k_max")]
    pub k_max: i64,
    #[serde(default = "default_central_range")]
    pub central_range: i64,
}

fn default_k_max() -> i64 {
    4
}

fn default_central_range() -> i64 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub t: f64,
    #[serde(default = "default_scale")]
    pub scale: String,
    #[serde(default = "default_scale")]
    pub partner_scale: String,
}

fn default_scale() -> String {
    "1".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_alpha: Option<usize>,
    /// Explicit points in `(0, 1]`; takes precedence over `n_alpha`.
    pub points: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(default = "default_m")]
    pub m: i64,
}

fn default_m() -> i64 {
    1
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { m: default_m() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Absolute threshold for the support set of the self-bracket.
    pub epsilon: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_tol() -> f64 {
    hgframe_core::bracket::DEFAULT_TOLERANCE
}

fn default_trials() -> usize {
    20
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            epsilon: None,
            trials: default_trials(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub t_list: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    /// JSON instance file, see [`crate::commands::ClassifyInstance`].
    pub instance: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(n) = o.grid {
            self.grid.n_alpha = Some(n);
            self.grid.points = None;
        }
        if let Some(t) = o.tol {
            self.tolerances.tol = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> CliResult<()> {
        for (key, w) in [("window", &self.window), ("partner_window", &self.partner_window)] {
            if let Some(w) = w {
                w.validate(key)?;
            }
        }
        if let Some(l) = &self.lattice {
            LatticeSpec::new(l.a, l.b, l.k_max, l.central_range).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(f) = &self.field {
            if !(f.t > 0.0 && f.t < 1.0) {
                return Err(invalid("field.t", format!("{} is not in (0, 1)", f.t)));
            }
            parse_scale(&f.scale).map_err(|r| invalid("field.scale", r))?;
            parse_scale(&f.partner_scale).map_err(|r| invalid("field.partner_scale", r))?;
        }
        if self.grid.n_alpha == Some(0) {
            return Err(invalid("grid.n_alpha", "must be positive"));
        }
        if let Some(p) = &self.grid.points {
            TorusGrid::from_points(p.clone()).map_err(|e| invalid("grid.points", e))?;
        }
        if self.truncation.m < 0 {
            return Err(invalid("truncation.m", "must be nonnegative"));
        }
        let tol = &self.tolerances;
        if !(tol.tol > 0.0 && tol.tol.is_finite()) {
            return Err(invalid("tolerances.tol", format!("{} is not a positive number", tol.tol)));
        }
        if let Some(e) = tol.epsilon {
            if !(e >= 0.0) {
                return Err(invalid("tolerances.epsilon", "must be nonnegative"));
            }
        }
        if let Some(s) = &self.scan {
            if s.t_list.is_empty() {
                return Err(invalid("scan.t_list", "must not be empty"));
            }
            if let Some(t) = s.t_list.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
                return Err(invalid("scan.t_list", format!("{t} is not in (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn require<'a, T>(value: &'a Option<T>, key: &str) -> CliResult<&'a T> {
        value.as_ref().ok_or_else(|| CliError::Config(format!("missing section [{key}]")))
    }

    pub fn lattice_spec(&self) -> CliResult<LatticeSpec> {
        let l = Self::require(&self.lattice, "lattice")?;
        LatticeSpec::new(l.a, l.b, l.k_max, l.central_range).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn torus_grid(&self) -> CliResult<TorusGrid> {
        let g = match &self.grid.points {
            Some(p) => TorusGrid::from_points(p.clone()),
            None => TorusGrid::midpoint(self.grid.n_alpha.unwrap_or(DEFAULT_N_ALPHA)),
        };
        g.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn field_config(&self) -> CliResult<&FieldConfig> {
        Self::require(&self.field, "field")
    }

    pub fn primary_window(&self) -> CliResult<SampledWindow> {
        Self::require(&self.window, "window")?.build(self, "window")
    }

    pub fn partner(&self) -> CliResult<SampledWindow> {
        match &self.partner_window {
            Some(w) => w.build(self, "partner_window"),
            None => self.primary_window(),
        }
    }

    /// `(𝓗_t(v), 𝓖_t(w))` with the configured scale expressions.
    pub fn fields(&self) -> CliResult<(OperatorField, OperatorField)> {
        let f = self.field_config()?;
        let phi = build_ht(self.primary_window()?, f.t, Some(self.scale()?))?;
        let psi = build_ht(self.partner()?, f.t, Some(self.partner_scale()?))?;
        Ok((phi, psi))
    }

    pub fn scale(&self) -> CliResult<ScaleExpr> {
        parse_scale(&self.field_config()?.scale).map_err(|r| invalid("field.scale", r))
    }

    pub fn partner_scale(&self) -> CliResult<ScaleExpr> {
        parse_scale(&self.field_config()?.partner_scale).map_err(|r| invalid("field.partner_scale", r))
    }
}

impl WindowSpec {
    fn validate(&self, key: &str) -> CliResult<()> {
        match (&self.preset, &self.file) {
            (Some(_), Some(_)) => return Err(invalid(key, "give either `preset` or `file`, not both")),
            (None, None) => return Err(invalid(key, "needs `preset` or `file`")),
            (Some(p), None) if p != "zero" => {
                p.parse::<WindowPreset>().map_err(|e| invalid(&format!("{key}.preset"), e))?;
            }
            _ => {}
        }
        if self.n == 0 {
            return Err(invalid(&format!("{key}.n"), "must be positive"));
        }
        if let Some([lo, hi]) = self.support {
            if !(hi > lo) {
                return Err(invalid(&format!("{key}.support"), format!("[{lo}, {hi}) is empty")));
            }
        }
        Ok(())
    }

    fn support_or(&self, default: (f64, f64)) -> (f64, f64) {
        self.support.map_or(default, |[lo, hi]| (lo, hi))
    }

    pub fn build(&self, cfg: &RunConfig, key: &str) -> CliResult<SampledWindow> {
        if let Some(file) = &self.file {
            let (lo, hi) = self.support_or((0.0, 1.0));
            let samples = read_window_csv(&cfg.resolve(file))?;
            let dx = (hi - lo) / samples.len() as f64;
            return Ok(SampledWindow::new(samples, lo, dx)?);
        }
        let name = self.preset.as_deref().unwrap_or_default();
        if name == "zero" {
            let (lo, hi) = self.support_or((0.0, 1.0));
            return Ok(SampledWindow::from_fn(self.n, lo, hi, |_| Complex64::new(0.0, 0.0))?);
        }
        let preset: WindowPreset = name.parse().map_err(|e| invalid(&format!("{key}.preset"), e))?;
        Ok(window_preset(preset, self.n, self.support_or(default_support(preset)))?)
    }
}

/// Support on which a preset is sampled when none is configured.
pub fn default_support(preset: WindowPreset) -> (f64, f64) {
    match preset {
        WindowPreset::Gaussian => (-8.0, 8.0),
        _ => (0.0, 1.0),
    }
}

#[derive(Deserialize)]
struct SampleRow {
    re: f64,
    im: f64,
}

fn read_window_csv(path: &Path) -> CliResult<Vec<Complex64>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read window file {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SampleRow>().enumerate() {
        let row = row.map_err(|e| CliError::Config(format!("{} row {}: {e}", path.display(), i + 1)))?;
        out.push(Complex64::new(row.re, row.im));
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("window file {} has no samples", path.display())));
    }
    Ok(out)
}

/// Parses the scale whitelist: a constant `c`, or `sigma^p`, `|sigma|^p`,
/// `c*sigma^p`.
pub fn parse_scale(text: &str) -> Result<ScaleExpr, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let number = |x: &str| x.parse::<f64>().ok().filter(|v| v.is_finite());
    if let Some(v) = number(&s) {
        return Ok(ScaleExpr::constant(v));
    }
    let (coeff, rest) = match s.split_once('*') {
        Some((c, r)) => (number(c).ok_or_else(|| format!("bad coefficient in `{text}`"))?, r),
        None => (1.0, s.as_str()),
    };
    let exponent = ["sigma^", "|sigma|^", "σ^", "|σ|^"]
        .iter()
        .find_map(|head| rest.strip_prefix(head))
        .ok_or_else(|| format!("`{text}` is not a constant or a power of sigma"))?;
    let p = number(exponent).ok_or_else(|| format!("bad exponent in `{text}`"))?;
    Ok(ScaleExpr::Power { coeff, p })
}
