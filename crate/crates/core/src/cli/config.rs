//! Line-oriented run configuration: `key = value`, `#` starts a comment.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    /// Brightness-constancy observations of a transported scalar field.
    OpticFlow,
    /// Noisy copies of the velocity field itself (`H = I`).
    Direct,
}

impl ObservationKind {
    fn as_str(self) -> &'static str {
        match self {
            ObservationKind::OpticFlow => "optic_flow",
            ObservationKind::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Gradient,
}

/// Everything a run needs. Optional fields are resolved from the data when
/// left unset (see the module docs of `cli` for the rules).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub width: usize,
    pub height: usize,
    pub steps: usize,
    pub replicas: usize,
    pub alpha: f64,
    pub dt: f64,
    /// Peak speed of the initial velocity field, in cells per time unit.
    pub max_speed: f64,
    pub forcing_band: (f64, f64),
    pub image_band: (f64, f64),
    /// Images are `max(g - threshold, 0)^2` of a unit-RMS random texture `g`,
    /// leaving flat regions where the image carries no motion information.
    /// `none` keeps the raw texture.
    pub image_threshold: Option<f64>,
    pub observation: ObservationKind,
    /// Observation noise variance; derived from `snr` when unset.
    pub sigma2: Option<f64>,
    /// Signal-to-noise power ratio used when `sigma2` is unset.
    pub snr: f64,
    pub prior: PriorKind,
    /// Prior weight; derived from `prior_scale` when unset.
    pub lambda: Option<f64>,
    pub prior_scale: f64,
    pub k_max: usize,
    pub krylov_dim: usize,
    pub lanczos_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: Option<usize>,
    pub trace_probes: usize,
    pub seed: u64,
    /// 1-based time index of the diagnostic maps; defaults to `T / 2`.
    pub fig1_t: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            steps: 20,
            replicas: 1,
            alpha: 0.1,
            dt: 1.0,
            max_speed: 0.5,
            forcing_band: (1.0, 4.0),
            image_band: (2.0, 6.0),
            image_threshold: Some(1.0),
            observation: ObservationKind::OpticFlow,
            sigma2: None,
            snr: 10.0,
            prior: PriorKind::Gradient,
            lambda: None,
            prior_scale: 0.1,
            k_max: 20,
            krylov_dim: 60,
            lanczos_tol: 1e-6,
            cg_tol: 1e-8,
            cg_max_iter: None,
            trace_probes: 64,
            seed: 0,
            fig1_t: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{raw}` as a value for `{key}`"),
    })
}

fn parse_band(line: usize, key: &str, raw: &str) -> Result<(f64, f64)> {
    let (lo, hi) = raw.split_once(',').ok_or_else(|| Error::Parse {
        line,
        message: format!("`{key}` expects `low, high`"),
    })?;
    Ok((
        parse_value(line, key, lo.trim())?,
        parse_value(line, key, hi.trim())?,
    ))
}

fn parse_optional<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Option<T>> {
    if raw == "auto" {
        Ok(None)
    } else {
        parse_value(line, key, raw).map(Some)
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// Parses and validates a configuration. Missing keys keep their defaults;
/// unknown or repeated keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        match key {
            "width" => c.width = parse_value(line, key, value)?,
            "height" => c.height = parse_value(line, key, value)?,
            "T" => c.steps = parse_value(line, key, value)?,
            "M" => c.replicas = parse_value(line, key, value)?,
            "alpha" => c.alpha = parse_value(line, key, value)?,
            "dt" => c.dt = parse_value(line, key, value)?,
            "max_speed" => c.max_speed = parse_value(line, key, value)?,
            "forcing_band" => c.forcing_band = parse_band(line, key, value)?,
            "image_band" => c.image_band = parse_band(line, key, value)?,
            "image_threshold" => {
                c.image_threshold = if value == "none" {
                    None
                } else {
                    Some(parse_value(line, key, value)?)
                }
            }
            "observation" => {
                c.observation = match value {
                    "optic_flow" => ObservationKind::OpticFlow,
                    "direct" => ObservationKind::Direct,
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown observation kind `{other}`"),
                        })
                    }
                }
            }
            "sigma2" => c.sigma2 = parse_optional(line, key, value)?,
            "snr" => c.snr = parse_value(line, key, value)?,
            "prior" => {
                c.prior = match value {
                    "gradient" => PriorKind::Gradient,
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown prior `{other}`"),
                        })
                    }
                }
            }
            "lambda" => c.lambda = parse_optional(line, key, value)?,
            "prior_scale" => c.prior_scale = parse_value(line, key, value)?,
            "k_max" => c.k_max = parse_value(line, key, value)?,
            "krylov_dim" => c.krylov_dim = parse_value(line, key, value)?,
            "lanczos_tol" => c.lanczos_tol = parse_value(line, key, value)?,
            "cg_tol" => c.cg_tol = parse_value(line, key, value)?,
            "cg_max_iter" => c.cg_max_iter = parse_optional(line, key, value)?,
            "trace_probes" => c.trace_probes = parse_value(line, key, value)?,
            "seed" => c.seed = parse_value(line, key, value)?,
            "fig1_t" => c.fig1_t = parse_optional(line, key, value)?,
            "output_dir" => c.output_dir = PathBuf::from(value),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }
    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn state_dim(&self) -> usize {
        2 * self.width * self.height
    }

    /// 1-based index of the diagnostic time step.
    pub fn fig1_index(&self) -> usize {
        self.fig1_t.unwrap_or((self.steps / 2).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {v}")))
            }
        };
        if self.width < 4 {
            return Err(invalid("width", "must be at least 4"));
        }
        if self.height < 4 {
            return Err(invalid("height", "must be at least 4"));
        }
        if self.steps < 1 {
            return Err(invalid("T", "must be at least 1"));
        }
        if self.replicas < 1 {
            return Err(invalid("M", "must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(
                "alpha",
                format!("must be non-negative, got {}", self.alpha),
            ));
        }
        positive("dt", self.dt)?;
        positive("max_speed", self.max_speed)?;
        if let Some(c) = self.image_threshold {
            if !c.is_finite() {
                return Err(invalid("image_threshold", "must be finite"));
            }
        }
        for (name, band) in [
            ("forcing_band", self.forcing_band),
            ("image_band", self.image_band),
        ] {
            if !(band.0 >= 0.0 && band.1 >= band.0 && band.1 > 0.0) {
                return Err(invalid(name, "needs 0 <= low <= high, high > 0"));
            }
        }
        if let Some(s2) = self.sigma2 {
            positive("sigma2", s2)?;
        }
        positive("snr", self.snr)?;
        if let Some(l) = self.lambda {
            positive("lambda", l)?;
        }
        positive("prior_scale", self.prior_scale)?;
        positive("lanczos_tol", self.lanczos_tol)?;
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(invalid("cg_tol", "must lie in (0, 1)"));
        }
        if self.cg_max_iter == Some(0) {
            return Err(invalid("cg_max_iter", "must be at least 1"));
        }
        if self.trace_probes < 2 {
            return Err(invalid("trace_probes", "must be at least 2"));
        }
        if self.k_max < 1 {
            return Err(invalid("k_max", "must be at least 1"));
        }
        if self.krylov_dim < self.k_max {
            return Err(invalid("krylov_dim", "must be at least k_max"));
        }
        if self.krylov_dim > self.state_dim() {
            return Err(invalid(
                "krylov_dim",
                format!("must not exceed n = {}", self.state_dim()),
            ));
        }
        if let Some(t) = self.fig1_t {
            if t < 1 || t > self.steps {
                return Err(invalid("fig1_t", format!("must lie in 1..={}", self.steps)));
            }
        }
        Ok(())
    }

    /// Serializes every field, in a form `parse_config` accepts.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("width", self.width.to_string());
        put("height", self.height.to_string());
        put("T", self.steps.to_string());
        put("M", self.replicas.to_string());
        put("alpha", format!("{:?}", self.alpha));
        put("dt", format!("{:?}", self.dt));
        put("max_speed", format!("{:?}", self.max_speed));
        put(
            "forcing_band",
            format!("{:?}, {:?}", self.forcing_band.0, self.forcing_band.1),
        );
        put(
            "image_band",
            format!("{:?}, {:?}", self.image_band.0, self.image_band.1),
        );
        put(
            "image_threshold",
            opt(self.image_threshold.map(|v| format!("{v:?}"))),
        );
        put("observation", self.observation.as_str().into());
        put("sigma2", opt(self.sigma2.map(|v| format!("{v:?}"))));
        put("snr", format!("{:?}", self.snr));
        put("prior", "gradient".into());
        put("lambda", opt(self.lambda.map(|v| format!("{v:?}"))));
        put("prior_scale", format!("{:?}", self.prior_scale));
        put("k_max", self.k_max.to_string());
        put("krylov_dim", self.krylov_dim.to_string());
        put("lanczos_tol", format!("{:?}", self.lanczos_tol));
        put("cg_tol", format!("{:?}", self.cg_tol));
        put("cg_max_iter", opt(self.cg_max_iter.map(|v| v.to_string())));
        put("trace_probes", self.trace_probes.to_string());
        put("seed", self.seed.to_string());
        put("fig1_t", opt(self.fig1_t.map(|v| v.to_string())));
        put("output_dir", self.output_dir.display().to_string());
        s
    }
}
