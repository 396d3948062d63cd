//! Versioned JSON experiment configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use xisim_core::pathspace::InitialKind;
use xisim_core::splitting::estimators::{BURN_IN, DEFAULT_XI_REF};
use xisim_core::splitting::Functional;
use xisim_core::walks::ShellConfig;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Validate,
    Survival,
    Tuple,
    Pathspace,
    Splitting,
    Mixing,
    Cone,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Validate,
        ExperimentKind::Survival,
        ExperimentKind::Tuple,
        ExperimentKind::Pathspace,
        ExperimentKind::Splitting,
        ExperimentKind::Mixing,
        ExperimentKind::Cone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Validate => "validate",
            ExperimentKind::Survival => "survival",
            ExperimentKind::Tuple => "tuple",
            ExperimentKind::Pathspace => "pathspace",
            ExperimentKind::Splitting => "splitting",
            ExperimentKind::Mixing => "mixing",
            ExperimentKind::Cone => "cone",
        }
    }
}

/// Pair and tuple survival experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurvivalSection {
    pub pairs: u64,
    pub max_steps: u64,
    pub checkpoints: Vec<u64>,
    /// Group sizes `(m, n)`; `[1, 1]` is the pair experiment.
    pub groups: [u32; 2],
    pub h_lag: u64,
}

impl Default for SurvivalSection {
    fn default() -> Self {
        Self {
            pairs: 100_000,
            max_steps: 10_000,
            checkpoints: (1..=10).map(|i| i * 1000).collect(),
            groups: [1, 1],
            h_lag: 1000,
        }
    }
}

/// Curve-pair experiments: direct survival, splitting and mixing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub base_radius: f64,
    pub min_base_radius: f64,
    pub initial: Vec<InitialKind>,
    pub shells: u32,
    /// Independent trials of the direct estimate.
    pub trials: u64,
    pub particles: usize,
    pub replicates: u64,
    /// Shell window `[n0, n1]` for exponent estimates and mixing distances.
    pub window: [u32; 2],
    pub xi_ref: f64,
    pub functionals: Vec<Functional>,
    /// Seed of the second ensemble in a mixing run; derived from `seed` when
    /// absent.
    pub second_seed: Option<u64>,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            base_radius: 16.0,
            min_base_radius: 8.0,
            initial: vec![InitialKind::DiametricLines],
            shells: 8,
            trials: 100_000,
            particles: 10_000,
            replicates: 20,
            window: [BURN_IN, 8],
            xi_ref: DEFAULT_XI_REF,
            functionals: Functional::ALL.to_vec(),
            second_seed: None,
        }
    }
}

impl PathsSection {
    pub fn shell_config(&self) -> Result<ShellConfig, CliError> {
        ShellConfig::with_minimum(self.base_radius, self.min_base_radius)
            .map_err(|e| field("paths.base_radius", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeSection {
    pub half_angles: Vec<f64>,
    pub shells: u32,
    pub particles: usize,
    pub replicates: u64,
}

impl Default for ConeSection {
    fn default() -> Self {
        Self {
            half_angles: vec![PI, PI / 2.0, PI / 3.0, PI / 4.0],
            shells: 5,
            particles: 1000,
            replicates: 20,
        }
    }
}

/// Exact-law checks run by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub ruin_sizes: Vec<u32>,
    pub ruin_trials: u64,
    pub hitting_k: Vec<f64>,
    pub hitting_trials: u64,
    pub escape_radius: f64,
    pub enumeration_steps: Vec<u32>,
    pub enumeration_pairs: u64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            ruin_sizes: vec![2, 4, 8, 16],
            ruin_trials: 1_000_000,
            hitting_k: vec![1.0, 2.0],
            hitting_trials: 100_000,
            escape_radius: 6f64.exp(),
            enumeration_steps: vec![1, 2, 3],
            enumeration_pairs: 1_000_000,
        }
    }
}

/// Execution settings; never part of artifacts or the config hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeSection {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Seconds between checkpoint writes.
    pub checkpoint_every: Option<f64>,
}

impl RuntimeSection {
    pub fn is_unset(&self) -> bool {
        *self == RuntimeSection::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub survival: SurvivalSection,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub cone: ConeSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default, skip_serializing_if = "RuntimeSection::is_unset")]
    pub runtime: RuntimeSection,
}

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: kind,
            seed: 1,
            survival: SurvivalSection::default(),
            paths: PathsSection::default(),
            cone: ConeSection::default(),
            validate: ValidateSection::default(),
            runtime: RuntimeSection::default(),
        };
        match kind {
            ExperimentKind::Tuple => c.survival.groups = [2, 1],
            ExperimentKind::Splitting => {
                c.paths.initial = vec![
                    InitialKind::DiametricLines,
                    InitialKind::AngularGap { gap: 0.1 * PI },
                    InitialKind::AngularGap { gap: 0.01 * PI },
                ]
            }
            ExperimentKind::Mixing => {
                c.paths.initial = vec![InitialKind::DiametricLines, InitialKind::AngularGap { gap: 0.01 * PI }]
            }
            ExperimentKind::Pathspace => c.paths.shells = 2,
            _ => {}
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Copy without the runtime section, as embedded in artifacts.
    pub fn without_runtime(&self) -> Self {
        Self {
            runtime: RuntimeSection::default(),
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON of the config without its runtime
    /// section.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.without_runtime()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Checks every field the selected experiment reads.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if let Some(t) = self.runtime.threads {
            if t == 0 {
                return Err(field("runtime.threads", "must be at least 1"));
            }
        }
        if let Some(s) = self.runtime.checkpoint_every {
            if !(s > 0.0 && s.is_finite()) {
                return Err(field("runtime.checkpoint_every", "must be a positive number of seconds"));
            }
        }
        match self.experiment {
            ExperimentKind::Survival | ExperimentKind::Tuple => self.validate_survival(),
            ExperimentKind::Pathspace | ExperimentKind::Splitting | ExperimentKind::Mixing => self.validate_paths(),
            ExperimentKind::Cone => self.validate_cone(),
            ExperimentKind::Validate => self.validate_checks(),
        }
    }

    fn validate_survival(&self) -> Result<(), CliError> {
        let s = &self.survival;
        if s.pairs == 0 {
            return Err(field("survival.pairs", "must be positive"));
        }
        if s.max_steps == 0 {
            return Err(field("survival.max_steps", "must be positive"));
        }
        if s.checkpoints.is_empty() {
            return Err(field("survival.checkpoints", "must not be empty"));
        }
        if !s.checkpoints.windows(2).all(|w| w[0] < w[1]) || s.checkpoints[0] == 0 {
            return Err(field("survival.checkpoints", "must be strictly increasing and positive"));
        }
        if *s.checkpoints.last().unwrap() > s.max_steps {
            return Err(field("survival.checkpoints", format!("exceed max_steps = {}", s.max_steps)));
        }
        if s.groups.contains(&0) {
            return Err(field("survival.groups", "group sizes must be at least 1"));
        }
        if self.experiment == ExperimentKind::Survival && s.groups != [1, 1] {
            return Err(field("survival.groups", "the pair experiment uses [1, 1]; use `tuple`"));
        }
        if s.h_lag == 0 {
            return Err(field("survival.h_lag", "must be positive"));
        }
        Ok(())
    }

    fn validate_paths(&self) -> Result<(), CliError> {
        let p = &self.paths;
        p.shell_config()?;
        if p.shells == 0 {
            return Err(field("paths.shells", "must be positive"));
        }
        if p.initial.is_empty() {
            return Err(field("paths.initial", "must list at least one initial pair"));
        }
        for (i, kind) in p.initial.iter().enumerate() {
            xisim_core::pathspace::initial_pair(kind, p.shell_config()?)
                .map_err(|e| field(&format!("paths.initial[{i}]"), e))?;
        }
        match self.experiment {
            ExperimentKind::Pathspace => {
                if p.trials == 0 {
                    return Err(field("paths.trials", "must be positive"));
                }
            }
            _ => {
                if p.particles == 0 {
                    return Err(field("paths.particles", "must be positive"));
                }
                if p.replicates < 2 {
                    return Err(field("paths.replicates", "need at least 2 for intervals"));
                }
                let [n0, n1] = p.window;
                if n0 < BURN_IN || n1 < n0 + 3 || n1 > p.shells {
                    return Err(field(
                        "paths.window",
                        format!("need {BURN_IN} <= n0, n0 + 3 <= n1 <= shells = {}", p.shells),
                    ));
                }
            }
        }
        if self.experiment == ExperimentKind::Mixing {
            if p.initial.len() != 2 {
                return Err(field("paths.initial", "mixing compares exactly two initial pairs"));
            }
            if p.functionals.is_empty() {
                return Err(field("paths.functionals", "must not be empty"));
            }
        }
        if !p.xi_ref.is_finite() {
            return Err(field("paths.xi_ref", "must be finite"));
        }
        Ok(())
    }

    fn validate_cone(&self) -> Result<(), CliError> {
        let c = &self.cone;
        if c.half_angles.is_empty() {
            return Err(field("cone.half_angles", "must not be empty"));
        }
        for (i, &a) in c.half_angles.iter().enumerate() {
            xisim_core::walks::ConeSpec::around_x(a).map_err(|e| field(&format!("cone.half_angles[{i}]"), e))?;
        }
        if c.shells < 2 {
            return Err(field("cone.shells", "need at least 2 for a slope"));
        }
        if c.particles == 0 {
            return Err(field("cone.particles", "must be positive"));
        }
        if c.replicates < 2 {
            return Err(field("cone.replicates", "need at least 2 for intervals"));
        }
        Ok(())
    }

    fn validate_checks(&self) -> Result<(), CliError> {
        let v = &self.validate;
        if v.ruin_sizes.iter().any(|&n| n < 2) {
            return Err(field("validate.ruin_sizes", "sizes must be at least 2"));
        }
        if v.hitting_k.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
            return Err(field("validate.hitting_k", "must be finite and non-negative"));
        }
        if !(v.escape_radius >= 5f64.exp()) {
            return Err(field("validate.escape_radius", "must be at least e^5"));
        }
        if v.enumeration_steps.iter().any(|&n| n == 0 || n > 4) {
            return Err(field("validate.enumeration_steps", "steps must lie in 1..=4"));
        }
        let counts = [
            ("validate.ruin_trials", v.ruin_trials),
            ("validate.hitting_trials", v.hitting_trials),
            ("validate.enumeration_pairs", v.enumeration_pairs),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(field(name, "must be positive"));
            }
        }
        Ok(())
    }
}
