//! Run configuration.
//!
//! Configuration files are TOML. Every table rejects unknown keys, so a
//! misspelt option is an error rather than a silently ignored default.
//! A minimal file:
//!
//! ```toml
//! [kernel]
//! terms = [{ coefficient = 1.0, alpha = 2.0 }]
//!
//! [grid]
//! d = 1
//! nx = 64
//! nv = 128
//! v_max = 8.0
//!
//! [initial]
//! kind = "perturbed_maxwellian"
//! amplitude = 0.01
//! mode = [1]
//!
//! [time]
//! dt = 0.05
//! t_final = 1.0
//! ```
//!
//! Optional tables: `[mode]` (`kind = "limit"` or `kind = "regularized"`
//! with `eps`), `[diagnostics]`, `[blowup]`, `[output]` and `[study]`.
//! See the README for every key and its default.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::kernel::{Interaction, KernelSpec, KernelTerm};
use crate::phase_space::{regularity_thresholds, Distribution, NormKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    pub grid: GridGeometry,
    pub initial: InitialCondition,
    pub time: TimeConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub blowup: BlowupConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
}

fn default_format_version() -> u32 {
    crate::FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub terms: Vec<KernelTerm>,
    /// `attractive` negates every coefficient; the default leaves them as written.
    #[serde(default = "default_interaction")]
    pub interaction: Interaction,
}

fn default_interaction() -> Interaction {
    Interaction::Repulsive
}

impl KernelConfig {
    pub fn spec(&self) -> Result<KernelSpec> {
        let s = self.interaction.sign();
        KernelSpec::new(
            self.terms
                .iter()
                .map(|t| KernelTerm { coefficient: s * t.coefficient, alpha: t.alpha })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    #[default]
    Limit,
    Regularized { eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Maxwellian {
        #[serde(default = "one")]
        thermal: f64,
    },
    PerturbedMaxwellian {
        amplitude: f64,
        mode: Vec<i64>,
        #[serde(default = "one")]
        thermal: f64,
    },
    TwoBump {
        separation: f64,
        width: f64,
        #[serde(default)]
        amplitude: f64,
        #[serde(default)]
        mode: Option<Vec<i64>>,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyQuantityConfig {
    pub m: u32,
    /// Literal weight exponent (the `2r` of `H^m_{2r}`).
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Steps between diagnostic reports.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub sobolev: Vec<NormKey>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_quantity: Option<KeyQuantityConfig>,
}

fn default_cadence() -> usize {
    10
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { cadence: default_cadence(), sobolev: Vec::new(), rho: Vec::new(), key_quantity: None }
    }
}

impl DiagnosticsConfig {
    /// Requested weighted norms plus those needed by the key quantity.
    pub fn sobolev_keys(&self) -> Vec<NormKey> {
        let mut keys = self.sobolev.clone();
        if let Some(kq) = self.key_quantity {
            let key = NormKey { k: kq.m - 1, weight: kq.weight };
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys
    }

    pub fn rho_orders(&self) -> Vec<f64> {
        let mut orders = self.rho.clone();
        if let Some(kq) = self.key_quantity {
            if !orders.contains(&(kq.m as f64)) {
                orders.push(kq.m as f64);
            }
        }
        orders
    }
}

/// Termination thresholds for blow-up and velocity-box contamination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupConfig {
    /// `||f||_inf` growth factor over its initial value.
    #[serde(default = "default_growth")]
    pub linf_growth: f64,
    /// Largest tolerated share of `sum |rho_k|^2` in the upper half of the
    /// dealiased band, `nx/6 < |k|_inf <= nx/3`: the density has concentrated
    /// to the grid scale once it is exceeded.
    #[serde(default = "default_tail")]
    pub spectral_tail: f64,
    /// Largest tolerated fraction of `|f|` within 10% of the velocity box edge.
    #[serde(default = "default_boundary")]
    pub boundary_tolerance: f64,
}

fn default_growth() -> f64 {
    1e6
}

fn default_tail() -> f64 {
    1e-3
}

fn default_boundary() -> f64 {
    1e-8
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            linf_growth: default_growth(),
            spectral_tail: default_tail(),
            boundary_tolerance: default_boundary(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub snapshots: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), snapshots: false }
    }
}

/// Parameters of the epsilon studies and the small-time probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default = "default_study_m")]
    pub m: u32,
    #[serde(default = "default_study_weight")]
    pub weight: f64,
    /// Bound `R` that no member's key quantity may exceed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default)]
    pub t_list: Vec<f64>,
}

fn default_study_m() -> u32 {
    5
}

fn default_study_weight() -> f64 {
    6.0
}

impl RunConfig {
    /// Parses and validates a configuration file's text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate_with_source(Some(text))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// SHA-256 of the canonical serialisation, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source(None)
    }

    fn validate_with_source(&self, source: Option<&str>) -> Result<()> {
        let fail = |key: &str, msg: String| -> Error {
            match source.and_then(|s| locate(s, key)) {
                Some(line) => Error::Config(format!("line {line}: {key}: {msg}")),
                None => Error::Config(format!("{key}: {msg}")),
            }
        };
        if self.format_version != crate::FORMAT_VERSION {
            return Err(fail("format_version", format!("unsupported version {}", self.format_version)));
        }
        self.kernel.spec().map_err(|e| fail("alpha", e.to_string()))?;
        self.grid.validate().map_err(|e| fail("nx", e.to_string()))?;
        let d = self.grid.d;
        if let ModeConfig::Regularized { eps } = self.mode {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(fail("eps", format!("eps = {eps} must be >= 0")));
            }
        }
        match &self.initial {
            InitialCondition::Maxwellian { thermal } => positive(*thermal).map_err(|m| fail("thermal", m))?,
            InitialCondition::PerturbedMaxwellian { amplitude, mode, thermal } => {
                positive(*thermal).map_err(|m| fail("thermal", m))?;
                finite(*amplitude).map_err(|m| fail("amplitude", m))?;
                check_mode(mode, d, self.grid.nx).map_err(|m| fail("mode", m))?;
            }
            InitialCondition::TwoBump { separation, width, amplitude, mode } => {
                finite(*separation).map_err(|m| fail("separation", m))?;
                positive(*width).map_err(|m| fail("width", m))?;
                finite(*amplitude).map_err(|m| fail("amplitude", m))?;
                if let Some(mode) = mode {
                    check_mode(mode, d, self.grid.nx).map_err(|m| fail("mode", m))?;
                }
            }
            InitialCondition::File { .. } => {}
        }
        let TimeConfig { dt, t_final } = self.time;
        positive(dt).map_err(|m| fail("dt", m))?;
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(fail("t_final", format!("t_final = {t_final} must be >= 0")));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
            return Err(fail("t_final", format!("t_final = {t_final} is not a multiple of dt = {dt}")));
        }
        if dt * self.grid.v_max > 2.0 * std::f64::consts::PI {
            return Err(fail("dt", format!("dt * v_max = {} exceeds the x period", dt * self.grid.v_max)));
        }
        if self.diagnostics.cadence == 0 {
            return Err(fail("cadence", "cadence must be >= 1".into()));
        }
        for key in &self.diagnostics.sobolev {
            if !(key.weight.is_finite() && key.weight >= 0.0) {
                return Err(fail("sobolev", format!("weight {} must be >= 0", key.weight)));
            }
        }
        if let Some(kq) = self.diagnostics.key_quantity {
            if kq.m == 0 {
                return Err(fail("key_quantity", "m must be >= 1".into()));
            }
        }
        let b = self.blowup;
        positive(b.linf_growth).map_err(|m| fail("linf_growth", m))?;
        positive(b.spectral_tail).map_err(|m| fail("spectral_tail", m))?;
        positive(b.boundary_tolerance).map_err(|m| fail("boundary_tolerance", m))?;
        if let Some(study) = &self.study {
            for &e in &study.eps {
                if !(e.is_finite() && e >= 0.0) {
                    return Err(fail("eps", format!("study eps {e} must be >= 0")));
                }
            }
            if study.m == 0 {
                return Err(fail("m", "m must be >= 1".into()));
            }
            for &t in &study.t_list {
                positive(t).map_err(|m| fail("t_list", m))?;
            }
        }
        Ok(())
    }

    /// Regularity warnings: orders at or below the thresholds `m0`, `r0`.
    pub fn warnings(&self) -> Vec<String> {
        let (m0, _, r0) = regularity_thresholds(self.grid.d);
        let mut out = Vec::new();
        let mut check = |what: &str, m: u32, weight: f64| {
            if m as f64 <= m0 {
                out.push(format!("{what}: m = {m} <= m0 = {m0}; the well-posedness regime needs m > m0"));
            }
            if weight <= r0 {
                out.push(format!("{what}: 2r = {weight} <= r0 = {r0}; the well-posedness regime needs 2r > r0"));
            }
        };
        if let Some(kq) = self.diagnostics.key_quantity {
            check("diagnostics.key_quantity", kq.m, kq.weight);
        }
        if let Some(study) = &self.study {
            check("study", study.m, study.weight);
        }
        out
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel.spec()
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.dt).round() as usize
    }

    /// Samples the initial distribution on the configured grid.
    pub fn initial_distribution(&self) -> Result<Distribution> {
        let g = self.grid;
        match &self.initial {
            InitialCondition::Maxwellian { thermal } => {
                separable(&g, |_| 1.0, &normalised_profile(&g, |v| maxwellian(v, *thermal)))
            }
            InitialCondition::PerturbedMaxwellian { amplitude, mode, thermal } => {
                let prof = normalised_profile(&g, |v| maxwellian(v, *thermal));
                separable(&g, |x| 1.0 + amplitude * dot(mode, x).cos(), &prof)
            }
            InitialCondition::TwoBump { separation, width, amplitude, mode } => {
                let s = separation / 2.0;
                let prof = normalised_profile(&g, |v| {
                    let mut a = v;
                    let mut b = v;
                    a[0] -= s;
                    b[0] += s;
                    0.5 * (maxwellian(a, *width) + maxwellian(b, *width))
                });
                let default_mode = vec![1; g.d];
                let mode = mode.as_ref().unwrap_or(&default_mode);
                separable(&g, |x| 1.0 + amplitude * dot(mode, x).cos(), &prof)
            }
            InitialCondition::File { path } => {
                let snap = crate::output::read_snapshot(path)?;
                if snap.geometry != g {
                    return Err(Error::Config(format!(
                        "snapshot {} has geometry {:?}, config has {:?}",
                        path.display(),
                        snap.geometry,
                        g
                    )));
                }
                Ok(snap)
            }
        }
    }
}

fn positive(v: f64) -> std::result::Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn finite(v: f64) -> std::result::Result<(), String> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(format!("{v} must be finite"))
    }
}

fn check_mode(mode: &[i64], d: usize, nx: usize) -> std::result::Result<(), String> {
    if mode.len() != d {
        return Err(format!("mode {mode:?} must have {d} components"));
    }
    if mode.iter().any(|k| k.unsigned_abs() as usize >= nx / 3) {
        return Err(format!("mode {mode:?} is not resolved below the dealiasing cut nx/3"));
    }
    Ok(())
}

/// First line (1-based) whose first token is `key`.
fn locate(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|line| {
        let line = line.trim_start();
        line.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
            || line.contains(&format!("{key} ="))
            || line.contains(&format!("{key}="))
    })
    .map(|i| i + 1)
}

fn dot(mode: &[i64], x: [f64; 2]) -> f64 {
    mode.iter().zip(x).map(|(&k, xi)| k as f64 * xi).sum()
}

fn maxwellian(v: [f64; 2], thermal: f64) -> f64 {
    (-(v[0] * v[0] + v[1] * v[1]) / (2.0 * thermal * thermal)).exp()
}

/// Velocity profile scaled to unit discrete mass.
fn normalised_profile(g: &GridGeometry, shape: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let prof: Vec<f64> = (0..g.v_len()).map(|j| shape(g.velocity(j))).collect();
    let mass: f64 = prof.iter().sum::<f64>() * g.v_cell();
    prof.into_iter().map(|p| p / mass).collect()
}

fn separable(g: &GridGeometry, fx: impl Fn([f64; 2]) -> f64, prof: &[f64]) -> Result<Distribution> {
    let mut values = Vec::with_capacity(g.len());
    for ix in 0..g.x_len() {
        let a = fx(g.position(ix));
        values.extend(prof.iter().map(|p| a * p));
    }
    Distribution::new(*g, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[kernel]
terms = [{ coefficient = 1.0, alpha = 2.0 }]

[grid]
d = 1
nx = 32
nv = 64
v_max = 8.0

[initial]
kind = "perturbed_maxwellian"
amplitude = 0.01
mode = [1]

[time]
dt = 0.05
t_final = 1.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.mode, ModeConfig::Limit);
        assert_eq!(cfg.diagnostics.cadence, 10);
        assert_eq!(cfg.blowup, BlowupConfig::default());
        assert_eq!(cfg.steps(), 20);
        assert_eq!(cfg.format_version, 1);
        match cfg.initial {
            InitialCondition::PerturbedMaxwellian { thermal, .. } => assert_eq!(thermal, 1.0),
            _ => panic!("wrong initial condition"),
        }
        assert!(cfg.warnings().is_empty());
    }

    #[test]
    fn negative_alpha_cites_a1() {
        let text = MINIMAL.replace("alpha = 2.0", "alpha = -1.0");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("(A1)"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = MINIMAL.replace("dt = 0.05", "dt = 0.05\ndtt = 0.1");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("dtt"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_key_in_tagged_table() {
        let text = MINIMAL.replace("mode = [1]", "mode = [1]\nwidth = 3.0");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn low_order_warns_against_m0() {
        let text = format!("{MINIMAL}\n[diagnostics]\nkey_quantity = {{ m = 4, weight = 6.0 }}\n");
        let cfg = RunConfig::parse(&text).unwrap();
        let w = cfg.warnings();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("m0 = 4.5"), "{w:?}");
    }

    #[test]
    fn rejects_non_multiple_final_time() {
        let text = MINIMAL.replace("t_final = 1.0", "t_final = 1.03");
        assert!(RunConfig::parse(&text).unwrap_err().to_string().contains("multiple"));
    }

    #[test]
    fn round_trip_and_hash() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn attractive_flag_negates() {
        let text = MINIMAL.replace("terms = [{ coefficient = 1.0, alpha = 2.0 }]", "terms = [{ coefficient = 1.0, alpha = 0.5 }]\ninteraction = \"attractive\"");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.kernel_spec().unwrap().multiplier(&[1]), -1.0);
    }

    #[test]
    fn initial_density_is_normalised() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let f = cfg.initial_distribution().unwrap();
        assert!((f.rho0 - 1.0).abs() < 1e-14);
        let rho = f.density();
        assert!((rho[0] - 1.01).abs() < 1e-14);
    }
}
