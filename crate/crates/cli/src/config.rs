//! Plain-text `key = value` scenario configuration with `[section]` headers.
//! Parsing is strict: unknown sections, unknown keys, duplicate keys and
//! keys that do not apply to the chosen kind are all rejected. A parsed
//! configuration serializes back to a canonical form that re-parses to the
//! same value.

use qpot_core::error::{Error as CoreError, Result as CoreResult};
use qpot_core::grid::Grid;
use qpot_core::scenario::Potential;
use qpot_core::PhysicalConstants;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Gaussian { mean: f64, sigma: f64 },
    GroundState,
    CustomCsv { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub mass: f64,
    pub diffusion: f64,
    pub beta: f64,
    pub potential: Potential,
    pub initial: Initial,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub outputs: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            x_min: -8.0,
            x_max: 8.0,
            n_points: 2001,
            mass: 1.0,
            diffusion: 0.5,
            beta: 1.0,
            potential: Potential::RescaledOscillator,
            initial: Initial::Gaussian {
                mean: 0.0,
                sigma: 1.0,
            },
            dt: 1e-3,
            horizon: 1.0,
            seed: 42,
            outputs: "out".into(),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn split_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError(format!("line {}: unterminated section", line_no + 1)))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(ConfigError(format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected `key = value`, got `{line}`",
                line_no + 1
            )));
        };
        let section = current
            .as_ref()
            .ok_or_else(|| ConfigError(format!("line {}: key outside any section", line_no + 1)))?;
        let key = key.trim().to_string();
        let map = sections.get_mut(section).expect("section exists");
        if map.contains_key(&key) {
            return Err(ConfigError(format!("duplicate key `{key}` in [{section}]")));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(sections)
}

struct SectionReader {
    name: &'static str,
    map: BTreeMap<String, String>,
}

impl SectionReader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("[{}] {key} = `{v}` is not a number", self.name))),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(key) = self.map.keys().next() {
            return Err(ConfigError(format!(
                "unknown key `{key}` in [{}]",
                self.name
            )));
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut sections = split_sections(text)?;
    let mut reader = |name: &'static str| -> SectionReader {
        SectionReader {
            name,
            map: sections.remove(name).unwrap_or_default(),
        }
    };
    let defaults = ScenarioConfig::default();

    let mut grid = reader("grid");
    let x_min = grid.f64("x_min", defaults.x_min)?;
    let x_max = grid.f64("x_max", defaults.x_max)?;
    let n_points = grid.f64("n_points", defaults.n_points as f64)? as usize;
    grid.finish()?;

    let mut constants = reader("constants");
    let mass = constants.f64("mass", defaults.mass)?;
    let diffusion = constants.f64("diffusion", defaults.diffusion)?;
    let beta = constants.f64("beta", defaults.beta)?;
    constants.finish()?;

    let mut potential = reader("potential");
    let kind = potential
        .take("kind")
        .unwrap_or_else(|| "rescaled_oscillator".into());
    let pot = match kind.as_str() {
        "free" => Potential::Free,
        "rescaled_oscillator" => Potential::RescaledOscillator,
        "harmonic" => {
            let omega = potential.f64("omega", 1.0)?;
            Potential::Harmonic { omega }
        }
        "polynomial" => {
            let raw = potential
                .take("coefficients")
                .ok_or_else(|| ConfigError("[potential] polynomial needs `coefficients`".into()))?;
            let coefficients = raw
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| ConfigError(format!("bad polynomial coefficient `{tok}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Potential::Polynomial { coefficients }
        }
        other => {
            return Err(ConfigError(format!("unknown potential kind `{other}`")));
        }
    };
    potential.finish()?;

    let mut initial = reader("initial");
    let kind = initial.take("kind").unwrap_or_else(|| "gaussian".into());
    let init = match kind.as_str() {
        "gaussian" => {
            let mean = initial.f64("mean", 0.0)?;
            let sigma = initial.f64("sigma", 1.0)?;
            Initial::Gaussian { mean, sigma }
        }
        "ground_state" => Initial::GroundState,
        "custom_csv" => {
            let path = initial
                .take("path")
                .ok_or_else(|| ConfigError("[initial] custom_csv needs `path`".into()))?;
            Initial::CustomCsv { path }
        }
        other => return Err(ConfigError(format!("unknown initial kind `{other}`"))),
    };
    initial.finish()?;

    let mut run = reader("run");
    let dt = run.f64("dt", defaults.dt)?;
    let horizon = run.f64("horizon", defaults.horizon)?;
    let seed = run.f64("seed", defaults.seed as f64)? as u64;
    let outputs = run
        .take("outputs")
        .unwrap_or_else(|| defaults.outputs.clone());
    run.finish()?;

    if let Some(section) = sections.keys().next() {
        return Err(ConfigError(format!("unknown section [{section}]")));
    }

    let config = ScenarioConfig {
        x_min,
        x_max,
        n_points,
        mass,
        diffusion,
        beta,
        potential: pot,
        initial: init,
        dt,
        horizon,
        seed,
        outputs,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ScenarioConfig) -> Result<(), ConfigError> {
    if config.x_min >= config.x_max || config.x_min.is_nan() || config.x_max.is_nan() {
        return Err(ConfigError("x_min must be below x_max".into()));
    }
    if config.n_points < Grid::MIN_POINTS {
        return Err(ConfigError(format!(
            "n_points must be at least {}",
            Grid::MIN_POINTS
        )));
    }
    for (name, v) in [
        ("mass", config.mass),
        ("diffusion", config.diffusion),
        ("beta", config.beta),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ConfigError(format!("{name} must be positive")));
        }
    }
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(ConfigError("dt must be positive".into()));
    }
    if !(config.horizon.is_finite() && config.horizon > 0.0) {
        return Err(ConfigError("horizon must be positive".into()));
    }
    if let Initial::Gaussian { sigma, .. } = config.initial {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ConfigError("sigma must be positive".into()));
        }
    }
    Ok(())
}

pub fn serialize(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[grid]");
    let _ = writeln!(out, "x_min = {}", config.x_min);
    let _ = writeln!(out, "x_max = {}", config.x_max);
    let _ = writeln!(out, "n_points = {}", config.n_points);
    let _ = writeln!(out, "\n[constants]");
    let _ = writeln!(out, "mass = {}", config.mass);
    let _ = writeln!(out, "diffusion = {}", config.diffusion);
    let _ = writeln!(out, "beta = {}", config.beta);
    let _ = writeln!(out, "\n[potential]");
    match &config.potential {
        Potential::Free => {
            let _ = writeln!(out, "kind = free");
        }
        Potential::RescaledOscillator => {
            let _ = writeln!(out, "kind = rescaled_oscillator");
        }
        Potential::Harmonic { omega } => {
            let _ = writeln!(out, "kind = harmonic");
            let _ = writeln!(out, "omega = {omega}");
        }
        Potential::Polynomial { coefficients } => {
            let _ = writeln!(out, "kind = polynomial");
            let list = coefficients
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "coefficients = {list}");
        }
    }
    let _ = writeln!(out, "\n[initial]");
    match &config.initial {
        Initial::Gaussian { mean, sigma } => {
            let _ = writeln!(out, "kind = gaussian");
            let _ = writeln!(out, "mean = {mean}");
            let _ = writeln!(out, "sigma = {sigma}");
        }
        Initial::GroundState => {
            let _ = writeln!(out, "kind = ground_state");
        }
        Initial::CustomCsv { path } => {
            let _ = writeln!(out, "kind = custom_csv");
            let _ = writeln!(out, "path = {path}");
        }
    }
    let _ = writeln!(out, "\n[run]");
    let _ = writeln!(out, "dt = {}", config.dt);
    let _ = writeln!(out, "horizon = {}", config.horizon);
    let _ = writeln!(out, "seed = {}", config.seed);
    let _ = writeln!(out, "outputs = {}", config.outputs);
    out
}

impl ScenarioConfig {
    pub fn grid(&self) -> CoreResult<Grid> {
        Grid::new(self.x_min, self.x_max, self.n_points)
    }

    pub fn constants(&self) -> CoreResult<PhysicalConstants> {
        PhysicalConstants::with_friction(self.mass, self.diffusion, self.beta)
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    /// Stride keeping at most ~100 stored snapshots.
    pub fn snapshot_stride(&self) -> usize {
        (self.n_steps() / 100).max(1)
    }

    pub fn potential_field(&self) -> CoreResult<qpot_core::GridField> {
        self.potential.sample(self.grid()?, &self.constants()?)
    }

    pub fn initial_density(&self) -> CoreResult<qpot_core::GridPdf> {
        let grid = self.grid()?;
        match &self.initial {
            Initial::Gaussian { mean, sigma } => {
                qpot_core::scenario::gaussian_pdf(grid, *mean, *sigma)
            }
            Initial::GroundState => {
                let v = self.potential_field()?;
                let (_, psi) = qpot_core::quantum::ground_state(grid, &v, self.constants()?)?;
                psi.density()
            }
            Initial::CustomCsv { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CoreError::Domain(format!("cannot read initial density {path}: {e}"))
                })?;
                let mut values = Vec::with_capacity(grid.len());
                for (i, line) in text.lines().enumerate() {
                    if i == 0 && line.trim().starts_with(|c: char| c.is_alphabetic()) {
                        continue; // header row
                    }
                    let last = line
                        .split(',')
                        .next_back()
                        .ok_or_else(|| CoreError::Domain(format!("bad row {} in {path}", i + 1)))?;
                    values.push(last.trim().parse::<f64>().map_err(|_| {
                        CoreError::Domain(format!("bad density value in {path} row {}", i + 1))
                    })?);
                }
                qpot_core::GridPdf::normalized(grid, values)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let config = ScenarioConfig {
            potential: Potential::Polynomial {
                coefficients: vec![0.0, 0.0, 0.5],
            },
            initial: Initial::Gaussian {
                mean: 0.25,
                sigma: 0.75,
            },
            ..ScenarioConfig::default()
        };
        let text = serialize(&config);
        let reparsed = parse(&text).unwrap();
        assert_eq!(config, reparsed);
        assert_eq!(text, serialize(&reparsed));
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(parse("[grid]\nx_min = 0\nbogus = 1\n").is_err());
        assert!(parse("[mystery]\nx = 1\n").is_err());
        assert!(parse("[potential]\nkind = harmonic\ncoefficients = 1 2\n").is_err());
    }

    #[test]
    fn rejects_negative_dt_with_message() {
        let err = parse("[run]\ndt = -0.5\n").unwrap_err();
        assert!(err.0.contains("dt must be positive"), "{}", err.0);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let config = parse("[grid]\nn_points = 501\n").unwrap();
        assert_eq!(config.n_points, 501);
        assert_eq!(config.x_min, -8.0);
        assert_eq!(config.seed, 42);
    }

    #[test]
    fn comments_are_ignored() {
        let config = parse("# top\n[run]\ndt = 0.01 # fine\n").unwrap();
        assert_eq!(config.dt, 0.01);
    }
}
