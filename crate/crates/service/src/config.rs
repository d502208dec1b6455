//! `forgespark.json` settings with dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const CONFIG_FILE: &str = "forgespark.json";
pub const TOKEN_ENV: &str = "FORGESPARK_LLM_TOKEN";
const ENV_PREFIX: &str = "FORGESPARK_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {message}")]
    BadValue { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// `openai` or `scripted`.
    pub provider: String,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Name of the environment variable holding the API token.
    pub token_env: String,
    pub max_iterations: u32,
    pub token_budget: usize,
    pub input_depth: u32,
    pub polymorphism_depth: u32,
    pub prompt_template_path: Option<PathBuf>,
    pub scripted_dir: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            provider: "openai".to_string(),
            base_url: "https://api.openai.com".to_string(),
            model: "gpt-4o".to_string(),
            temperature: 0.2,
            token_env: TOKEN_ENV.to_string(),
            max_iterations: 3,
            token_budget: 4_000,
            input_depth: 2,
            polymorphism_depth: 2,
            prompt_template_path: None,
            scripted_dir: None,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbstSettings {
    pub population: usize,
    pub max_evaluations: u64,
    /// Unset means a fresh seed per run.
    pub seed: Option<u64>,
}

impl Default for SbstSettings {
    fn default() -> Self {
        SbstSettings {
            population: 50,
            max_evaluations: 10_000,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeSettings {
    pub step_budget: u64,
}

impl Default for RuntimeSettings {
    fn default() -> Self {
        RuntimeSettings {
            step_budget: minilang::DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub port: u16,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings { port: 8642 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetrySettings {
    pub enabled: bool,
}

impl Default for TelemetrySettings {
    fn default() -> Self {
        TelemetrySettings { enabled: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeConfig {
    pub llm: LlmSettings,
    pub sbst: SbstSettings,
    pub runtime: RuntimeSettings,
    pub service: ServiceSettings,
    pub telemetry: TelemetrySettings,
}

impl ForgeConfig {
    /// Every settable dotted key, in section order.
    pub fn keys() -> Vec<String> {
        let value = serde_json::to_value(ForgeConfig::default()).expect("serializable");
        let mut out = Vec::new();
        for (section, fields) in value.as_object().expect("object") {
            for field in fields.as_object().expect("object").keys() {
                out.push(format!("{section}.{field}"));
            }
        }
        out
    }

    /// Reads `forgespark.json` from `root`; a missing file yields defaults.
    /// The file may use nested sections, dotted keys, or both.
    pub fn load(root: &Path) -> Result<ForgeConfig, ConfigError> {
        let path = root.join(CONFIG_FILE);
        if !path.exists() {
            return Ok(ForgeConfig::default());
        }
        let io = |e: std::io::Error| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let text = std::fs::read_to_string(&path).map_err(io)?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(ConfigError::Invalid("expected a JSON object".to_string()));
        };
        let mut config = ForgeConfig::default();
        let mut nested = Map::new();
        for (k, v) in map {
            if k.contains('.') {
                config.set_json(&k, v)?;
            } else {
                nested.insert(k, v);
            }
        }
        let mut base = serde_json::to_value(&config).expect("serializable");
        for (section, fields) in nested {
            let Some(target) = base.get_mut(&section).and_then(Value::as_object_mut) else {
                return Err(ConfigError::UnknownKey(section));
            };
            let Value::Object(fields) = fields else {
                return Err(ConfigError::Invalid(format!(
                    "section '{section}' must be an object"
                )));
            };
            for (k, v) in fields {
                if !target.contains_key(&k) {
                    return Err(ConfigError::UnknownKey(format!("{section}.{k}")));
                }
                target.insert(k, v);
            }
        }
        serde_json::from_value(base).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn set_json(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        let mut base = serde_json::to_value(&*self).expect("serializable");
        let slot = base
            .get_mut(section)
            .and_then(|s| s.get_mut(field))
            .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        *slot = value;
        *self = serde_json::from_value(base).map_err(|e| ConfigError::BadValue {
            key: key.to_string(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    /// Sets a key from text, interpreted according to the key's current
    /// type. Optional keys accept an empty string to unset.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let current = serde_json::to_value(&*self)
            .expect("serializable")
            .pointer(&format!("/{}", key.replacen('.', "/", 1)))
            .cloned()
            .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        let value = match current {
            Value::String(_) => Value::String(raw.to_string()),
            Value::Null if raw.is_empty() => Value::Null,
            _ => serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())),
        };
        self.set_json(key, value)
    }

    /// Environment variable consulted for `key`, e.g. `sbst.seed` →
    /// `FORGESPARK_SBST_SEED`.
    pub fn env_name(key: &str) -> String {
        format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
    }

    /// Applies every `FORGESPARK_*` variable that names a config key.
    pub fn apply_env(
        &mut self,
        lookup: &dyn Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        for key in Self::keys() {
            if let Some(v) = lookup(&Self::env_name(&key)) {
                self.set(&key, &v)?;
            }
        }
        Ok(())
    }

    pub fn token(&self) -> Option<String> {
        std::env::var(&self.llm.token_env)
            .ok()
            .filter(|t| !t.is_empty())
    }

    /// Resolves a possibly relative path against the project root.
    pub fn project_path(root: &Path, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            root.join(path)
        }
    }
}
