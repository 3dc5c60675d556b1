//! Run configuration: flat `key = value` text with dotted sections, parsed
//! as TOML. Every field has a default, so an empty file is a valid config.

use nahm::grid::Discretization;
use nahm::models::{builtin_disc, builtin_model, make_abelian_path, perturb, Profile};
use nahm::path::ConnectionPath;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
#[error("{location}: {message}")]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn field(text: &str, key: &str, message: impl Into<String>) -> Self {
        let location = match line_of(text, key) {
            Some(l) => format!("line {l}, field `{key}`"),
            None => format!("field `{key}`"),
        };
        ConfigError { location, message: message.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelCfg {
    /// `builtin`, `abelian` or `file`
    pub kind: String,
    pub w_minus: [f64; 3],
    pub w_plus: [f64; 3],
    pub profile: String,
    pub t_flat: f64,
    pub perturb_amplitude: f64,
    pub perturb_beta: f64,
    pub seed: u64,
    /// stem of a saved path (`<stem>.json` + `<stem>.nahm`)
    pub path: String,
}

impl Default for ModelCfg {
    fn default() -> Self {
        let b = builtin_model();
        ModelCfg {
            kind: "builtin".into(),
            w_minus: b.w_minus,
            w_plus: b.w_plus,
            profile: "linear_smoothed".into(),
            t_flat: b.t_flat,
            perturb_amplitude: 0.0,
            perturb_beta: 2.0,
            seed: 1,
            path: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscCfg {
    pub t_max: f64,
    pub n_t: usize,
    pub fourier_cut: usize,
    pub fd_order: usize,
    pub k_max: usize,
}

impl Default for DiscCfg {
    fn default() -> Self {
        let d = builtin_disc();
        DiscCfg { t_max: d.t_max, n_t: d.n_t, fourier_cut: d.fourier_cut, fd_order: d.fd_order, k_max: 4 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightCfg {
    pub delta_minus: f64,
    pub delta_plus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumCfg {
    pub w: [f64; 3],
    pub z: [f64; 3],
    pub cutoff: f64,
}

impl Default for SpectrumCfg {
    fn default() -> Self {
        SpectrumCfg { w: [0.3, 0.0, 0.0], z: [0.1, 0.0, 0.0], cutoff: 3.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridCfg {
    /// `z` (wall map over twists) or `delta` (weight plane at one twist)
    pub mode: String,
    pub origin: [f64; 3],
    pub step: f64,
    pub n: [usize; 3],
    pub z: [f64; 3],
    /// `[lo, hi, count]`
    pub delta_minus: [f64; 3],
    pub delta_plus: [f64; 3],
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg {
            mode: "z".into(),
            // eight points a side on the 1/16 lattice, through the minus-end singular point
            origin: [-3.0 / 32.0, 1.0 / 32.0, -4.0 / 32.0],
            step: 1.0 / 16.0,
            n: [8, 8, 8],
            z: [0.25, 0.1, 0.2],
            delta_minus: [-1.5, 1.5, 7.0],
            delta_plus: [-1.5, 1.5, 7.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexCfg {
    pub twists: Vec<[f64; 3]>,
}

impl Default for IndexCfg {
    fn default() -> Self {
        let b = builtin_model();
        let mid = [0, 1, 2].map(|i| 0.5 * (b.w_minus[i] + b.w_plus[i]));
        IndexCfg { twists: vec![mid, [0.2, -0.3, 0.4]] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanCfg {
    pub origin: [f64; 3],
    pub step: f64,
    pub n: [usize; 3],
    /// `xyz` or `zyx`
    pub tree_order: String,
    /// minimum distance of every box point from the singular set
    pub margin: f64,
}

impl Default for ScanCfg {
    fn default() -> Self {
        ScanCfg {
            origin: [-0.45, 0.3, 0.05],
            step: 1.0 / 32.0,
            n: [3, 3, 3],
            tree_order: "xyz".into(),
            margin: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingularityCfg {
    /// `plus` or `minus`: which flat limit supplies `w`
    pub end: String,
    pub rays: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
}

impl Default for SingularityCfg {
    fn default() -> Self {
        SingularityCfg {
            end: "plus".into(),
            rays: vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
            radii: vec![0.04, 0.02, 0.01],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditCfg {
    /// radii as fractions of the safe radius
    pub fractions: Vec<f64>,
    pub direction: [f64; 3],
}

impl Default for AuditCfg {
    fn default() -> Self {
        AuditCfg { fractions: vec![0.2, 0.35, 0.5, 0.65, 0.8], direction: [0.6, -0.48, 0.64] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputCfg {
    pub dir: String,
    /// `json` or `csv`
    pub format: String,
}

impl Default for OutputCfg {
    fn default() -> Self {
        OutputCfg { dir: "out".into(), format: "json".into() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunCfg {
    /// worker threads; 0 uses the available parallelism
    pub workers: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelCfg,
    pub disc: DiscCfg,
    pub weight: WeightCfg,
    pub spectrum: SpectrumCfg,
    pub grid: GridCfg,
    pub index: IndexCfg,
    pub scan: ScanCfg,
    pub singularity: SingularityCfg,
    pub audit: AuditCfg,
    pub output: OutputCfg,
    /// thread count does not change results, so it stays out of the echo
    #[serde(skip_serializing)]
    pub run: RunCfg,
}

/// Line (1-based) where the dotted `key` is assigned, either written out in
/// full or under a `[section]` header.
pub fn line_of(text: &str, key: &str) -> Option<usize> {
    let (sec, leaf) = key.rsplit_once('.').unwrap_or(("", key));
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k: String = k.split('.').map(str::trim).collect::<Vec<_>>().join(".");
        let full = if current.is_empty() { k.clone() } else { format!("{current}.{k}") };
        if full == key || (current == sec && k == leaf) {
            return Some(i + 1);
        }
    }
    None
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

fn spanned(text: &str, e: &toml::de::Error) -> ConfigError {
    let location = match e.span() {
        Some(s) => {
            let (l, c) = line_col(text, s.start);
            match text.lines().nth(l - 1).and_then(|x| x.split_once('=')) {
                Some((k, _)) => format!("line {l}, field `{}`", k.trim()),
                None => format!("line {l}, column {c}"),
            }
        }
        None => "config".into(),
    };
    ConfigError { location, message: e.message().trim().to_string() }
}

/// Parse config text, then apply `key=value` overrides given inline.
pub fn parse(text: &str, overrides: &[String]) -> Result<Config, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| spanned(text, &e))?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError {
            location: format!("--set {o}"),
            message: "expected KEY=VALUE".into(),
        })?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {}", v.trim()))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(v.trim().to_string()));
        let mut node = &mut table;
        let parts: Vec<&str> = k.trim().split('.').collect();
        for p in &parts[..parts.len() - 1] {
            node = node
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()))
                .as_table_mut()
                .ok_or_else(|| ConfigError { location: format!("--set {k}"), message: format!("`{p}` is not a section") })?;
        }
        node.insert(parts[parts.len() - 1].to_string(), value);
    }
    Config::deserialize(toml::Value::Table(table)).map_err(|e| match toml::from_str::<Config>(text) {
        // the file alone is at fault: its own error carries a span
        Err(fe) => spanned(text, &fe),
        Ok(_) => ConfigError { location: "--set overrides".into(), message: e.message().to_string() },
    })
}

/// Everything a subcommand needs, validated.
pub struct Resolved {
    pub cfg: Config,
    pub text: String,
    pub path: ConnectionPath,
    pub disc: Discretization,
    pub out: PathBuf,
}

/// False for NaN as well.
fn positive(x: f64) -> bool {
    x > 0.0
}

fn check_in(text: &str, key: &str, v: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    if allowed.contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::field(text, key, format!("`{v}` is not one of {allowed:?}")))
    }
}

fn build_path(cfg: &Config, text: &str) -> Result<(ConnectionPath, Discretization), ConfigError> {
    let m = &cfg.model;
    if m.kind == "file" {
        if m.path.is_empty() {
            return Err(ConfigError::field(text, "model.path", "required when model.kind = \"file\""));
        }
        let p = nahm::cache::load_path(Path::new(&m.path))
            .map_err(|e| ConfigError::field(text, "model.path", format!("cannot load path: {e}")))?;
        let d = p.disc;
        return Ok((p, d));
    }
    let d = &cfg.disc;
    let disc = Discretization::new(d.t_max, d.n_t, d.fourier_cut, d.fd_order).map_err(|e| {
        let key = if d.n_t < 16 {
            "disc.n_t"
        } else if d.fd_order != 2 && d.fd_order != 4 {
            "disc.fd_order"
        } else if d.fourier_cut < 1 {
            "disc.fourier_cut"
        } else {
            "disc.t_max"
        };
        ConfigError::field(text, key, e.to_string())
    })?;
    let profile: Profile = m.profile.parse().map_err(|e: nahm::Error| ConfigError::field(text, "model.profile", e.to_string()))?;
    let ab = if m.kind == "builtin" { builtin_model() } else { make_abelian_path(m.w_minus, m.w_plus, profile, m.t_flat) };
    if !positive(ab.t_flat) || ab.t_flat >= disc.t_max {
        return Err(ConfigError::field(text, "model.t_flat", format!("must lie in (0, t_max = {})", disc.t_max)));
    }
    let mut path = ab.to_connection(&disc).map_err(|e| ConfigError::field(text, "model.kind", e.to_string()))?;
    if m.perturb_amplitude != 0.0 {
        if !positive(m.perturb_beta) {
            return Err(ConfigError::field(text, "model.perturb_beta", "must be positive"));
        }
        path = perturb(&path, m.perturb_amplitude, m.perturb_beta, m.seed)
            .map_err(|e| ConfigError::field(text, "model.perturb_amplitude", e.to_string()))?;
    }
    Ok((path, disc))
}

/// Validate a parsed config and build the connection path. `out` has
/// already been resolved from the flag, `OUTPUT_DIR` and `output.dir`.
pub fn resolve(cfg: Config, text: String, out: PathBuf) -> Result<Resolved, ConfigError> {
    let t = &text;
    check_in(t, "model.kind", &cfg.model.kind, &["builtin", "abelian", "file"])?;
    check_in(t, "output.format", &cfg.output.format, &["json", "csv"])?;
    check_in(t, "grid.mode", &cfg.grid.mode, &["z", "delta"])?;
    check_in(t, "scan.tree_order", &cfg.scan.tree_order, &["xyz", "zyx"])?;
    check_in(t, "singularity.end", &cfg.singularity.end, &["plus", "minus"])?;
    if !positive(cfg.spectrum.cutoff) {
        return Err(ConfigError::field(t, "spectrum.cutoff", "must be positive"));
    }
    if cfg.disc.k_max == 0 {
        return Err(ConfigError::field(t, "disc.k_max", "must be at least 1"));
    }
    for (key, step) in [("grid.step", cfg.grid.step), ("scan.step", cfg.scan.step)] {
        if !positive(step) {
            return Err(ConfigError::field(t, key, "must be positive"));
        }
    }
    for key in ["grid.delta_minus", "grid.delta_plus"] {
        let r = if key == "grid.delta_minus" { cfg.grid.delta_minus } else { cfg.grid.delta_plus };
        if r[2] < 1.0 || r[2].fract() != 0.0 || r[1] < r[0] {
            return Err(ConfigError::field(t, key, "expected [lo, hi, count] with lo <= hi and a positive integer count"));
        }
    }
    if cfg.singularity.radii.len() < 3 || cfg.singularity.radii.iter().any(|r| !positive(*r)) {
        return Err(ConfigError::field(t, "singularity.radii", "need at least three positive radii"));
    }
    if cfg.singularity.rays.is_empty() || cfg.singularity.rays.iter().any(|r| r.iter().all(|x| *x == 0.0)) {
        return Err(ConfigError::field(t, "singularity.rays", "need nonzero ray directions"));
    }
    if cfg.audit.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(ConfigError::field(t, "audit.fractions", "fractions of the safe radius must lie in (0, 1)"));
    }
    let (path, disc) = build_path(&cfg, t)?;
    if disc.t_max * path.decay_rate < 3.0 {
        return Err(ConfigError::field(
            t,
            "disc.t_max",
            format!("t_max·β = {} < 3: truncation error would dominate", disc.t_max * path.decay_rate),
        ));
    }
    std::fs::create_dir_all(&out)
        .and_then(|_| {
            let probe = out.join(".write_probe");
            std::fs::write(&probe, b"")?;
            std::fs::remove_file(probe)
        })
        .map_err(|e| ConfigError::field(t, "output.dir", format!("{} is not writable: {e}", out.display())))?;
    Ok(Resolved { cfg, text, path, disc, out })
}
