//! Experiment configuration: TOML with `--set` overrides, validated against the module
//! preconditions at load time.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use waveinv_core::forward::{AdmissibleWindow, PicardSettings, Potential};
use waveinv_core::inversion::{schedule_parameters, NoiseKind, NoiseModel};
use waveinv_core::probes::{measurement_function, MeasurementFunction};
use waveinv_core::{Error as CoreError, Grid, GridSpec};

use crate::binfmt;

/// A configuration problem, with the dotted key it concerns.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: &str, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }

    fn core(path: &str, e: CoreError) -> Self {
        ConfigError { path: path.into(), message: format!("{} ({})", e, e.kind()) }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Spatial dimension, 1 or 2.
    pub n: usize,
    /// Interval length or square side.
    pub extent: f64,
    pub final_time: f64,
    /// λ of the admissible window; 0.05·T when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nt: usize,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
}

fn default_cfl() -> f64 {
    waveinv_core::grid::DEFAULT_CFL_SAFETY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Zero,
    Bump,
    Peaked,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub preset: Preset,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Spatial centre; the box centre when absent.
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    /// Time centre; the middle of the admissible window when absent.
    #[serde(default)]
    pub t_center: Option<f64>,
    /// Bump: spatial and temporal radii.
    #[serde(default)]
    pub radius_x: Option<f64>,
    #[serde(default)]
    pub radius_t: Option<f64>,
    /// Peaked: support radius, decay length and core radius.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub core: Option<f64>,
    /// File preset: space-time array in the binary format, sampled on the same grid.
    #[serde(default)]
    pub path: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(rename = "M", default = "one")]
    pub big_m: f64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
}

fn default_kappa() -> f64 {
    0.3
}

fn default_deltas() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5]
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { kappa: default_kappa(), big_m: 1.0, deltas: default_deltas() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub r: u32,
    #[serde(default)]
    pub seed: u64,
}

/// Dirichlet data for `forward` and `dn`: A·sin⁴(π(t − start)/duration) on every lateral node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_data_amp")]
    pub amplitude: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
}

fn default_data_amp() -> f64 {
    0.1
}

fn default_duration() -> f64 {
    0.5
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { amplitude: default_data_amp(), start: 0.0, duration: default_duration() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(default = "default_tol")]
    pub tol_rel: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    PicardSettings::default().tol_rel
}

fn default_max_iter() -> usize {
    PicardSettings::default().max_iter
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { tol_rel: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// 1D query points (x₀, t₀).
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    /// Fixed τ (and ε) instead of the schedule; noise is then off.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Taper width of v₀; λ/4 when absent.
    #[serde(default)]
    pub smooth_width: Option<f64>,
    /// 2D: time slice; the window middle when absent.
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default = "default_angles")]
    pub angles: usize,
    /// 2D: number of equally spaced line offsets in [−offset_range, offset_range].
    #[serde(default = "default_offsets")]
    pub offsets: usize,
    /// Half-width of the offset range; half the box diagonal when absent.
    #[serde(default)]
    pub offset_range: Option<f64>,
}

fn default_angles() -> usize {
    waveinv_core::radon::MIN_ANGLES
}

fn default_offsets() -> usize {
    9
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            points: Vec::new(),
            tau: None,
            eps: None,
            alpha: None,
            smooth_width: None,
            t0: None,
            angles: default_angles(),
            offsets: default_offsets(),
            offset_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    #[serde(default = "default_identity_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_identity_tau")]
    pub tau: f64,
}

fn default_identity_eps() -> Vec<f64> {
    vec![4e-2, 2e-2, 1e-2]
}

fn default_identity_tau() -> f64 {
    100.0
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig { eps: default_identity_eps(), tau: default_identity_tau() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Bin,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> String {
    "out".into()
}

impl Format {
    pub fn all() -> Vec<Format> {
        vec![Format::Csv, Format::Json, Format::Bin, Format::Svg]
    }
}

fn default_formats() -> Vec<Format> {
    Format::all()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), formats: default_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub reconstruction: ReconstructionConfig,
    #[serde(default)]
    pub identity: IdentityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_m() -> u32 {
    2
}

/// Everything built from a valid configuration.
pub struct Setup {
    pub grid: Arc<Grid>,
    pub window: AdmissibleWindow,
    pub potential: Potential,
    pub mf: MeasurementFunction,
    pub picard: PicardSettings,
}

/// Parses a `--set` value as a TOML value, falling back to a plain string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key was just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `key.sub=value` to the table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| ConfigError::new(spec, "override must look like key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::new(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("<file>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::new("<config>", e.message().to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    /// SHA-256 of the canonical JSON form; independent of key order in the file.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex(&Sha256::digest(json))
    }

    pub fn grid_spec(&self) -> GridSpec {
        let d = &self.domain;
        let mut spec = match d.n {
            2 => GridSpec::square(d.extent, d.final_time, self.grid.nx, self.grid.nt),
            _ => GridSpec::interval(d.extent, d.final_time, self.grid.nx, self.grid.nt),
        };
        spec.cfl_safety = self.grid.cfl_safety;
        spec
    }

    pub fn picard(&self) -> PicardSettings {
        PicardSettings { tol_rel: self.picard.tol_rel, max_iter: self.picard.max_iter }
    }

    pub fn noise_model(&self, delta: f64) -> Result<NoiseModel, CoreError> {
        NoiseModel::new(self.noise.kind, delta, self.noise.r, self.noise.seed)
    }

    /// Checks every module precondition and builds grid, window, potential and v₀.
    pub fn validate(&self) -> Result<Setup, ConfigError> {
        let d = &self.domain;
        if d.n != 1 && d.n != 2 {
            return Err(ConfigError::new("domain.n", format!("spatial dimension must be 1 or 2, got {}", d.n)));
        }
        if !(d.extent > 0.0 && d.final_time > 0.0) {
            return Err(ConfigError::new("domain", "extent and final_time must be positive"));
        }
        if self.grid.nx < 4 || self.grid.nt < 3 {
            return Err(ConfigError::new("grid", "need nx >= 4 and nt >= 3"));
        }
        let spec = self.grid_spec();
        let dx = d.extent / (self.grid.nx - 1) as f64;
        let dt = d.final_time / (self.grid.nt - 1) as f64;
        let limit = self.grid.cfl_safety * dx / (d.n as f64).sqrt();
        if dt > limit * (1.0 + 1e-12) {
            let need = (d.final_time / limit).ceil() as usize + 1;
            return Err(ConfigError::new(
                "grid.nt",
                format!("CFL invariant dt <= cfl_safety*dx/sqrt(n) violated: dt = {dt:.6e} > {limit:.6e}; need nt >= {need}"),
            ));
        }
        let grid = Arc::new(spec.build().map_err(|e| ConfigError::core("grid", e))?);
        let lam = d.lambda.unwrap_or(0.05 * d.final_time);
        let window = AdmissibleWindow::new(&grid, lam).map_err(|e| ConfigError::core("domain.final_time", e))?;
        if self.m < 2 {
            return Err(ConfigError::new("m", "nonlinearity power must be >= 2"));
        }
        if !(self.s >= 0.0) {
            return Err(ConfigError::new("s", "regularity index must be >= 0"));
        }
        let potential = self.build_potential(&grid, window)?;
        let sw = self.reconstruction.smooth_width.unwrap_or(0.25 * lam);
        let mf = measurement_function(&grid, &window, [1.0, 0.0], sw)
            .map_err(|e| ConfigError::core("reconstruction.smooth_width", e))?;
        let sc = &self.schedule;
        for (k, delta) in sc.deltas.iter().enumerate() {
            schedule_parameters(*delta, sc.kappa, sc.big_m, self.s, self.m, d.n)
                .map_err(|e| ConfigError::core(&format!("schedule.deltas[{k}]"), e))?;
        }
        if let Some(tau) = self.reconstruction.tau {
            if !(tau >= 1.0) {
                return Err(ConfigError::new("reconstruction.tau", "tau must be >= 1"));
            }
        }
        let (t1, t2) = (window.t1, window.t2);
        for (k, p) in self.reconstruction.points.iter().enumerate() {
            if d.n != 1 {
                return Err(ConfigError::new("reconstruction.points", "point queries need n = 1"));
            }
            if p[0] < 0.0 || p[0] > d.extent || p[1] < t1 || p[1] > t2 {
                return Err(ConfigError::new(
                    &format!("reconstruction.points[{k}]"),
                    format!("({}, {}) outside Ω × [{t1}, {t2}]", p[0], p[1]),
                ));
            }
        }
        if self.picard.tol_rel <= 0.0 || self.picard.max_iter == 0 {
            return Err(ConfigError::new("picard", "tol_rel > 0 and max_iter >= 1 required"));
        }
        if self.data.duration <= 0.0 || self.data.start < 0.0 {
            return Err(ConfigError::new("data", "duration must be positive and start >= 0"));
        }
        self.noise_model(0.0).map_err(|e| ConfigError::core("noise", e))?;
        Ok(Setup { grid, window, potential, mf, picard: self.picard() })
    }

    fn build_potential(&self, grid: &Arc<Grid>, window: AdmissibleWindow) -> Result<Potential, ConfigError> {
        let p = &self.potential;
        let c = grid.center();
        let center = p.center.unwrap_or(c);
        let tc = p.t_center.unwrap_or(0.5 * (window.t1 + window.t2));
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError::new(&format!("potential.{key}"), "required by this preset"));
        let built = match p.preset {
            Preset::Zero => Potential::zero(grid, self.m, window),
            Preset::Bump => Potential::bump(
                grid,
                self.m,
                window,
                p.amplitude,
                center,
                need(p.radius_x, "radius_x")?,
                tc,
                need(p.radius_t, "radius_t")?,
            ),
            Preset::Peaked => Potential::peaked(
                grid,
                self.m,
                window,
                p.amplitude,
                center,
                tc,
                need(p.radius, "radius")?,
                need(p.length, "length")?,
                need(p.core, "core")?,
            ),
            Preset::File => {
                let path = p.path.as_ref().ok_or_else(|| ConfigError::new("potential.path", "required by this preset"))?;
                let arr = binfmt::read(Path::new(path)).map_err(|e| ConfigError::new("potential.path", e.to_string()))?;
                if arr.data.len() != grid.sample_count() {
                    return Err(ConfigError::new(
                        "potential.path",
                        format!("file holds {} samples, grid needs {}", arr.data.len(), grid.sample_count()),
                    ));
                }
                let data = arr.data;
                let g = grid.clone();
                let amp = p.amplitude;
                Potential::from_fn(grid, self.m, window, None, None, move |x, y, t| {
                    let n = (t / g.dt()).round() as usize;
                    let i = ((x - g.lower(0)) / g.dx_axis(0)).round() as usize;
                    let j = if g.dim() == 2 { ((y - g.lower(1)) / g.dx_axis(1)).round() as usize } else { 0 };
                    amp * data[n * g.node_count() + j * g.nx() + i]
                })
            }
        };
        built.map_err(|e| ConfigError::core("potential", e))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        m = 2
        [domain]
        n = 1
        extent = 1.0
        final_time = 3.5
        [grid]
        nx = 101
        nt = 401
        [potential]
        preset = "bump"
        radius_x = 0.3
        radius_t = 0.4
    "#;

    #[test]
    fn overrides_and_hash() {
        let a = ExperimentConfig::from_toml(BASE, &["grid.nx=51".into(), "noise.kind=\"deterministic_profile\"".into()]).unwrap();
        assert_eq!(a.grid.nx, 51);
        assert_eq!(a.noise.kind, NoiseKind::DeterministicProfile);
        let reordered = r#"
            [potential]
            radius_t = 0.4
            radius_x = 0.3
            preset = "bump"
            [grid]
            nt = 401
            nx = 51
            [domain]
            final_time = 3.5
            extent = 1.0
            n = 1
            [noise]
            kind = "deterministic_profile"
        "#;
        let b = ExperimentConfig::from_toml(reordered, &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert!(a.validate().is_ok());
    }

    #[test]
    fn unknown_keys_and_cfl() {
        assert!(ExperimentConfig::from_toml(BASE, &["grid.bogus=1".into()]).is_err());
        let c = ExperimentConfig::from_toml(BASE, &["grid.nt=101".into()]).unwrap();
        let e = c.validate().err().unwrap();
        assert_eq!(e.path, "grid.nt");
        assert!(e.message.contains("CFL"));
    }
}
