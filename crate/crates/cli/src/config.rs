//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use calr_core::engine::log_grid;
use calr_core::material::{contrast_for_resonance, CoatedDiskConfig, Material, ResonanceSign};
use calr_core::potentials::DipoleSource;
use calr_core::source::InnerMethod;
use calr_core::CalrError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContrastMode {
    Explicit(f64),
    Resonant(ResonanceSign),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    Single(f64),
    Grid { start: f64, stop: f64, count: usize },
}

/// Every input of a run, after defaults and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub mu: f64,
    pub r_i: f64,
    pub r_e: f64,
    pub contrast: ContrastMode,
    pub loss: LossSpec,
    pub source_z: [f64; 2],
    pub source_a: [f64; 2],
    pub source_b: [f64; 2],
    /// Fixed truncation order (solve) or spectrum range.
    pub n_max: Option<usize>,
    pub cap: usize,
    pub inner_method: InnerMethod,
    pub field_extent: Option<f64>,
    pub field_points: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            r_i: 1.0,
            r_e: 2.0,
            contrast: ContrastMode::Resonant(ResonanceSign::Plus),
            loss: LossSpec::Single(1e-3),
            source_z: [3.0, 0.0],
            source_a: [1.0, 0.0],
            source_b: [1.0, 0.0],
            n_max: None,
            cap: calr_core::engine::DEFAULT_CAP,
            inner_method: InnerMethod::Quadrature,
            field_extent: None,
            field_points: 41,
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<CalrError> for ConfigError {
    fn from(e: CalrError) -> Self {
        ConfigError(e.to_string())
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(format!("`{key}`: expected a finite number, got `{v}`")),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse::<usize>().or_else(|_| {
        err(format!(
            "`{key}`: expected a non-negative integer, got `{v}`"
        ))
    })
}

fn parse_pair(key: &str, v: &str) -> Result<[f64; 2], ConfigError> {
    let parts: Vec<&str> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    match parts.as_slice() {
        [a, b] => Ok([parse_f64(key, a)?, parse_f64(key, b)?]),
        _ => err(format!("`{key}`: expected two numbers, got `{v}`")),
    }
}

/// Splits text into `key -> value`, rejecting malformed and duplicate lines.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected `key = value`", i + 1));
        };
        let k = k.trim().to_string();
        if k.is_empty() {
            return err(format!("line {}: empty key", i + 1));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return err(format!("line {}: duplicate key `{k}`", i + 1));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(text)?;
        let mut c = RunConfig::default();
        let mut contrast = None;
        let mut resonance = None;
        let mut delta = None;
        let mut grid = None;
        for (k, v) in &pairs {
            match k.as_str() {
                "lambda" => c.lambda = parse_f64(k, v)?,
                "mu" => c.mu = parse_f64(k, v)?,
                "r_i" => c.r_i = parse_f64(k, v)?,
                "r_e" => c.r_e = parse_f64(k, v)?,
                "contrast" => contrast = Some(parse_f64(k, v)?),
                "resonance" => resonance = Some(v.parse::<ResonanceSign>()?),
                "delta" => delta = Some(parse_f64(k, v)?),
                "delta_grid" => grid = Some(parse_grid(v)?),
                "source_z" => c.source_z = parse_pair(k, v)?,
                "source_a" => c.source_a = parse_pair(k, v)?,
                "source_b" => c.source_b = parse_pair(k, v)?,
                "n_max" => c.n_max = Some(parse_usize(k, v)?),
                "cap" => c.cap = parse_usize(k, v)?,
                "inner_method" => {
                    c.inner_method = match v.as_str() {
                        "quadrature" => InnerMethod::Quadrature,
                        "closed_form" => InnerMethod::ClosedForm,
                        _ => return err(format!("`inner_method`: unknown value `{v}`")),
                    }
                }
                "field_extent" => c.field_extent = Some(parse_f64(k, v)?),
                "field_points" => c.field_points = parse_usize(k, v)?,
                "out_dir" => c.out_dir = PathBuf::from(v),
                other => return err(format!("unknown configuration key `{other}`")),
            }
        }
        match (contrast, resonance) {
            (Some(_), Some(_)) => return err("set either `contrast` or `resonance`, not both"),
            (Some(x), None) => c.contrast = ContrastMode::Explicit(x),
            (None, Some(s)) => c.contrast = ContrastMode::Resonant(s),
            (None, None) => {}
        }
        match (delta, grid) {
            (Some(_), Some(_)) => return err("set either `delta` or `delta_grid`, not both"),
            (Some(d), None) => c.loss = LossSpec::Single(d),
            (None, Some(g)) => c.loss = g,
            (None, None) => {}
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn material(&self) -> Result<Material, ConfigError> {
        Ok(Material::new(self.lambda, self.mu)?)
    }

    pub fn contrast_c(&self) -> Result<f64, ConfigError> {
        match self.contrast {
            ContrastMode::Explicit(c) => Ok(c),
            ContrastMode::Resonant(s) => Ok(contrast_for_resonance(s, self.material()?.k0())?),
        }
    }

    /// Geometry carrying the single loss value (or the first grid value).
    pub fn geometry(&self) -> Result<CoatedDiskConfig, ConfigError> {
        let delta = match &self.loss {
            LossSpec::Single(d) => *d,
            LossSpec::Grid { start, .. } => *start,
        };
        Ok(CoatedDiskConfig::new(
            self.r_i,
            self.r_e,
            self.contrast_c()?,
            delta,
        )?)
    }

    pub fn source(&self) -> Result<DipoleSource, ConfigError> {
        Ok(DipoleSource::new(
            self.source_z,
            self.source_a,
            self.source_b,
        )?)
    }

    pub fn delta(&self) -> Result<f64, ConfigError> {
        match &self.loss {
            LossSpec::Single(d) => Ok(*d),
            LossSpec::Grid { .. } => err("this command takes a single `delta`, not a grid"),
        }
    }

    pub fn delta_grid(&self) -> Result<Vec<f64>, ConfigError> {
        match &self.loss {
            LossSpec::Grid { start, stop, count } => Ok(log_grid(*start, *stop, *count)?),
            LossSpec::Single(_) => err("the sweep needs `delta_grid` or `--delta-grid`"),
        }
    }

    /// Re-validates every module-level constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = self.geometry()?;
        let s = self.source()?;
        s.check_outside(g.r_e)?;
        if let LossSpec::Grid { .. } = self.loss {
            self.delta_grid()?;
        }
        if self.cap < 2 {
            return err("`cap` must be at least 2");
        }
        if let Some(n) = self.n_max {
            if n > self.cap {
                return err(format!("`n_max` = {n} exceeds `cap` = {}", self.cap));
            }
        }
        if self.field_points < 2 {
            return err("`field_points` must be at least 2");
        }
        if let Some(e) = self.field_extent {
            if e.is_nan() || e <= 0.0 {
                return err("`field_extent` must be positive");
            }
        }
        Ok(())
    }

    /// Resolved inputs as `(key, value)` pairs, in a fixed order.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        use calr_core::validation::format_f64 as f;
        let pair = |p: [f64; 2]| format!("{}, {}", f(p[0]), f(p[1]));
        let mut out = vec![
            ("lambda".to_string(), f(self.lambda)),
            ("mu".to_string(), f(self.mu)),
            ("r_i".to_string(), f(self.r_i)),
            ("r_e".to_string(), f(self.r_e)),
        ];
        match self.contrast {
            ContrastMode::Explicit(c) => out.push(("contrast".into(), f(c))),
            ContrastMode::Resonant(s) => out.push(("resonance".into(), s.symbol().into())),
        }
        if let Ok(c) = self.contrast_c() {
            out.push(("contrast_c".into(), f(c)));
        }
        match &self.loss {
            LossSpec::Single(d) => out.push(("delta".into(), f(*d))),
            LossSpec::Grid { start, stop, count } => out.push((
                "delta_grid".into(),
                format!("{} {} {count}", f(*start), f(*stop)),
            )),
        }
        out.push(("source_z".into(), pair(self.source_z)));
        out.push(("source_a".into(), pair(self.source_a)));
        out.push(("source_b".into(), pair(self.source_b)));
        if let Some(n) = self.n_max {
            out.push(("n_max".into(), n.to_string()));
        }
        out.push(("cap".into(), self.cap.to_string()));
        out.push((
            "inner_method".into(),
            match self.inner_method {
                InnerMethod::Quadrature => "quadrature",
                InnerMethod::ClosedForm => "closed_form",
            }
            .into(),
        ));
        if let Some(e) = self.field_extent {
            out.push(("field_extent".into(), f(e)));
        }
        out.push(("field_points".into(), self.field_points.to_string()));
        out
    }
}

fn parse_grid(v: &str) -> Result<LossSpec, ConfigError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    match parts.as_slice() {
        [a, b, n] => Ok(LossSpec::Grid {
            start: parse_f64("delta_grid", a)?,
            stop: parse_f64("delta_grid", b)?,
            count: parse_usize("delta_grid", n)?,
        }),
        _ => err(format!(
            "`delta_grid`: expected `START STOP COUNT`, got `{v}`"
        )),
    }
}
