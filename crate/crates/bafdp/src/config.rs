//! Run configuration: TOML sections with typed fields, defaults for every
//! key, and validation that reports every problem with its key path.

use std::fmt;
use std::path::{Path, PathBuf};

use bafdp_core::adversary::{AttackKind, AttackSpec};
use bafdp_core::data::{PartitionScheme, SyntheticProfile, WindowConfig};
use bafdp_core::objective::HyperParams;
use bafdp_core::privacy::{Issue, PrivacyConfig};
use bafdp_core::protocol::{DelayModel, Method, ProtocolConfig, TraceDetail};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub kappa: f64,
    pub power_iters: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            kappa: 1.0,
            power_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacySection {
    pub delta: f64,
    pub sensitivity: f64,
    pub budget_a: f64,
    pub epsilon_min: f64,
    pub gamma: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PrivacySection {
    fn default() -> Self {
        let p = PrivacyConfig::default();
        Self {
            delta: p.delta,
            sensitivity: p.sensitivity,
            budget_a: p.budget_cap,
            epsilon_min: p.epsilon_min,
            gamma: p.gamma,
            beta: p.beta,
            c1: p.c1,
            c2: p.c2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub method: Method,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub psi: f64,
    pub step_omega: f64,
    pub step_eps: f64,
    pub step_z: f64,
    pub step_lambda: f64,
    pub step_phi: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub reg_floor_lambda: f64,
    pub reg_floor_phi: f64,
    /// 0 uses every local sample.
    pub batch_size: usize,
    pub eval_every: u64,
    /// 0 disables stationarity measurement.
    pub gap_every: u64,
    /// Stop early once the gap reaches this value.
    pub gap_target: Option<f64>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let hp = HyperParams::default();
        Self {
            method: Method::Bafdp,
            r: 10,
            s: 4,
            t: 20_000,
            psi: hp.psi,
            step_omega: hp.step_omega,
            step_eps: hp.step_eps,
            step_z: hp.step_z,
            step_lambda: hp.step_lambda,
            step_phi: hp.step_phi,
            mu1: hp.mu1,
            mu2: hp.mu2,
            mu3: hp.mu3,
            mu4: hp.mu4,
            reg_floor_lambda: hp.reg_floor_lambda,
            reg_floor_phi: hp.reg_floor_phi,
            batch_size: 32,
            eval_every: 100,
            gap_every: 100,
            gap_target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub kind: AttackKind,
    pub ratio: f64,
    pub scale: f64,
    pub collusion_seed: u64,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: AttackKind::LargeConstant,
            ratio: 0.0,
            scale: 1e6,
            collusion_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// `synthetic` or a path to a `cell_id,timestamp,traffic` CSV file.
    pub source: String,
    pub n_cells: usize,
    pub n_days: usize,
    pub n_c: usize,
    pub n_p: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub partition: PartitionScheme,
    /// `YYYY-MM-DD` dates.
    pub holidays: Vec<String>,
    pub profile: SyntheticProfile,
}

impl Default for DataSection {
    fn default() -> Self {
        let w = WindowConfig::default();
        Self {
            source: "synthetic".into(),
            n_cells: 10,
            n_days: 30,
            n_c: w.n_c,
            n_p: w.n_p,
            h: w.horizon,
            partition: PartitionScheme::ByCell,
            holidays: Vec::new(),
            profile: SyntheticProfile::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub seed: u64,
    pub delay_log_mean: f64,
    pub delay_log_std: f64,
    /// Client ids whose delays are multiplied by `straggler_multiplier`.
    pub stragglers: Vec<usize>,
    pub straggler_multiplier: f64,
    pub detail: TraceDetail,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = DelayModel::default();
        Self {
            seed: 7,
            delay_log_mean: d.log_mean,
            delay_log_std: d.log_std,
            stragglers: Vec::new(),
            straggler_multiplier: 10.0,
            detail: TraceDetail::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub privacy: PrivacySection,
    pub protocol: ProtocolSection,
    pub attack: AttackSection,
    pub data: DataSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

/// One failed check, addressed by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid configuration:\n{}", render(.0))]
    Invalid(Vec<ConfigIssue>),
}

fn render(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn issue(path: &str, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        path: path.into(),
        message: message.into(),
    }
}

/// Key path of a field reported by a core validator.
fn core_path(field: &str) -> String {
    match field {
        "budget_a" | "epsilon_min" | "delta" | "sensitivity" | "gamma" | "beta" | "c1" | "c2" => {
            format!("privacy.{field}")
        }
        "dim" => "data".into(),
        "hidden" | "kappa" | "power_iters" => format!("model.{field}"),
        "delays" => "sim".into(),
        other => format!("protocol.{other}"),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    /// Fully materialized configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 over the canonical JSON form, excluding the output section.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("configuration serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn n_byzantine(&self) -> usize {
        (self.attack.ratio * self.protocol.r as f64).round() as usize
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig {
            n_c: self.data.n_c,
            n_p: self.data.n_p,
            horizon: self.data.h,
            test_hours: 7 * 24,
        }
    }

    pub fn hyper_params(&self) -> HyperParams {
        let p = &self.protocol;
        HyperParams {
            psi: p.psi,
            step_omega: p.step_omega,
            step_eps: p.step_eps,
            step_z: p.step_z,
            step_lambda: p.step_lambda,
            step_phi: p.step_phi,
            mu1: p.mu1,
            mu2: p.mu2,
            mu3: p.mu3,
            mu4: p.mu4,
            budget: self.privacy.budget_a,
            epsilon_min: self.privacy.epsilon_min,
            reg_floor_lambda: p.reg_floor_lambda,
            reg_floor_phi: p.reg_floor_phi,
        }
    }

    pub fn privacy_config(&self) -> PrivacyConfig {
        let p = &self.privacy;
        let w = self.window();
        PrivacyConfig {
            delta: p.delta,
            sensitivity: p.sensitivity,
            budget_cap: p.budget_a,
            epsilon_min: p.epsilon_min,
            dim: w.d_x() + w.d_y(),
            gamma: p.gamma,
            beta: p.beta,
            c1: p.c1,
            c2: p.c2,
        }
    }

    pub fn delays(&self) -> Vec<DelayModel> {
        let s = &self.sim;
        (0..self.protocol.r)
            .map(|id| DelayModel {
                log_mean: s.delay_log_mean,
                log_std: s.delay_log_std,
                multiplier: if s.stragglers.contains(&id) {
                    s.straggler_multiplier
                } else {
                    1.0
                },
            })
            .collect()
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let b = self.n_byzantine();
        ProtocolConfig {
            method: self.protocol.method,
            n_clients: self.protocol.r,
            n_byzantine: b,
            quorum: self.protocol.s,
            iterations: self.protocol.t,
            hp: self.hyper_params(),
            privacy: self.privacy_config(),
            hidden: self.model.hidden.clone(),
            kappa: self.model.kappa,
            power_iters: self.model.power_iters,
            batch_size: self.protocol.batch_size,
            eval_every: self.protocol.eval_every,
            gap_every: self.protocol.gap_every,
            gap_target: self.protocol.gap_target,
            attack: (b > 0).then_some(AttackSpec {
                kind: self.attack.kind,
                scale: self.attack.scale,
                collusion_seed: self.attack.collusion_seed,
            }),
            delays: self.delays(),
            detail: self.sim.detail,
        }
    }

    pub fn holiday_days(&self) -> Result<Vec<i64>, Vec<ConfigIssue>> {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        let mut days = Vec::new();
        let mut bad = Vec::new();
        for (k, h) in self.data.holidays.iter().enumerate() {
            match NaiveDate::parse_from_str(h, "%Y-%m-%d") {
                Ok(d) => days.push((d - epoch).num_days()),
                Err(_) => bad.push(issue(
                    &format!("data.holidays[{k}]"),
                    format!("`{h}` is not a YYYY-MM-DD date"),
                )),
            }
        }
        if bad.is_empty() {
            Ok(days)
        } else {
            Err(bad)
        }
    }

    /// Every violated constraint, in a stable order.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let p = &self.protocol;
        if p.r == 0 {
            out.push(issue("protocol.R", "need at least one client"));
        }
        if p.s == 0 || p.s > p.r {
            out.push(issue("protocol.S", format!("quorum must satisfy 1 <= S <= R (S = {}, R = {})", p.s, p.r)));
        }
        if p.t == 0 {
            out.push(issue("protocol.T", "need at least one iteration"));
        }
        if !(0.0..1.0).contains(&self.attack.ratio) {
            out.push(issue("attack.ratio", "must lie in [0, 1)"));
        } else if p.r > 0 && self.n_byzantine() >= p.r {
            out.push(issue("attack.ratio", "leaves no honest client"));
        }
        if !self.attack.scale.is_finite() {
            out.push(issue("attack.scale", "must be finite"));
        }
        let d = &self.data;
        if d.h != 1 && d.h != 24 {
            out.push(issue("data.H", "horizon must be 1 or 24"));
        }
        if d.n_c == 0 {
            out.push(issue("data.n_c", "must be positive"));
        }
        if d.source == "synthetic" {
            if d.n_cells == 0 {
                out.push(issue("data.n_cells", "must be positive"));
            }
            if d.n_days < d.n_p + 8 {
                out.push(issue("data.n_days", format!("need at least n_p + 8 = {} days", d.n_p + 8)));
            }
            if let Err(e) = d.profile.validate() {
                out.push(issue("data.profile", e.to_string()));
            }
            if d.partition == PartitionScheme::ByCell && p.r > d.n_cells {
                out.push(issue("data.partition", format!("by_cell needs R <= n_cells ({} > {})", p.r, d.n_cells)));
            }
        } else if !Path::new(&d.source).is_file() {
            out.push(issue("data.source", format!("`{}` is neither `synthetic` nor a readable file", d.source)));
        }
        if let Err(bad) = self.holiday_days() {
            out.extend(bad);
        }
        let s = &self.sim;
        if let Some(&id) = s.stragglers.iter().find(|&&id| id >= p.r) {
            out.push(issue("sim.stragglers", format!("client {id} does not exist")));
        }
        for (path, v) in [("sim.delay_log_mean", s.delay_log_mean), ("sim.delay_log_std", s.delay_log_std)] {
            if !v.is_finite() {
                out.push(issue(path, "must be finite"));
            }
        }
        if !(s.delay_log_std >= 0.0) {
            out.push(issue("sim.delay_log_std", "must be nonnegative"));
        }
        if !(s.straggler_multiplier > 0.0 && s.straggler_multiplier.is_finite()) {
            out.push(issue("sim.straggler_multiplier", "must be positive"));
        }
        let core = self.protocol_config();
        let mut core_issues: Vec<Issue> = core.issues();
        // already reported above with friendlier messages
        core_issues.retain(|i| !matches!(i.field, "R" | "S" | "T" | "B" | "attack" | "attack.scale" | "delays"));
        for i in core_issues {
            let path = core_path(i.field);
            if !out.iter().any(|o| o.path == path) {
                out.push(issue(&path, i.message));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }
}
