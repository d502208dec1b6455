//! One flag per config key: `llm.max_iterations` → `--llm-max-iterations`.

use clap::{Arg, ArgMatches, Args, Command, FromArgMatches};
use forgespark_service::ForgeConfig;

/// Short spellings kept alongside the mirrored names.
const ALIASES: &[(&str, &str)] = &[
    ("sbst.seed", "seed"),
    ("llm.max_iterations", "max-repair-iters"),
    ("llm.token_budget", "token-budget"),
    ("llm.input_depth", "input-depth"),
    ("llm.polymorphism_depth", "poly-depth"),
    ("service.port", "port"),
];

pub fn flag_name(key: &str) -> String {
    key.replace(['.', '_'], "-")
}

/// Config overrides given on the command line, as `(key, raw value)`.
#[derive(Debug, Clone, Default)]
pub struct ConfigFlags {
    pub values: Vec<(String, String)>,
}

impl ConfigFlags {
    pub fn apply(&self, config: &mut ForgeConfig) -> Result<(), String> {
        for (key, raw) in &self.values {
            config
                .set(key, raw)
                .map_err(|e| format!("--{}: {e}", flag_name(key)))?;
        }
        Ok(())
    }
}

impl FromArgMatches for ConfigFlags {
    fn from_arg_matches(matches: &ArgMatches) -> Result<Self, clap::Error> {
        let values = ForgeConfig::keys()
            .into_iter()
            .filter_map(|key| {
                matches
                    .get_one::<String>(&key)
                    .map(|v| (key.clone(), v.clone()))
            })
            .collect();
        Ok(ConfigFlags { values })
    }

    fn update_from_arg_matches(&mut self, matches: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(matches)?;
        Ok(())
    }
}

impl Args for ConfigFlags {
    fn augment_args(mut cmd: Command) -> Command {
        for key in ForgeConfig::keys() {
            let mut arg = Arg::new(key.clone())
                .long(flag_name(&key))
                .value_name("VALUE")
                .help(format!("Overrides {key}"))
                .help_heading("Configuration");
            if let Some((_, alias)) = ALIASES.iter().find(|(k, _)| *k == key) {
                arg = arg.visible_alias(*alias);
            }
            cmd = cmd.arg(arg);
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

/// File, then `FORGESPARK_*` environment, then flags.
pub fn resolve_config(
    root: &std::path::Path,
    env: &dyn Fn(&str) -> Option<String>,
    flags: &ConfigFlags,
) -> Result<ForgeConfig, String> {
    let mut config = ForgeConfig::load(root).map_err(|e| e.to_string())?;
    config
        .apply_env(env)
        .map_err(|e| format!("environment: {e}"))?;
    flags.apply(&mut config)?;
    Ok(config)
}
