use std::fs;
use std::path::{Path, PathBuf};

use ncauth::adversary::SubstitutionParams;
use ncauth::authcode::SchemeParams;
use ncauth::filedist::Accounting;
use ncauth::gf::ExtElem;
use ncauth::netcode::{CorruptMode, Network};
use ncauth::topologies;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub p: u64,
    #[serde(default = "one")]
    pub e: u32,
    pub l: u32,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptSpec {
    pub node: String,
    #[serde(default = "random_data")]
    pub mode: CorruptMode,
}

fn random_data() -> CorruptMode {
    CorruptMode::RandomData
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Run the checks at verifying nodes.
    #[serde(default = "yes")]
    pub verify: bool,
    /// Mark every relay and destination as verifying.
    #[serde(default)]
    pub verify_all: bool,
    #[serde(default)]
    pub corrupt: Vec<CorruptSpec>,
    /// Source messages as GF(q^l) codes; drawn from the seed when absent.
    pub messages: Option<Vec<ExtElem>>,
    /// In-edges an adversary is expected to observe, for the `H <= M` check.
    pub coalition_edges: Option<usize>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { verify: true, verify_all: false, corrupt: Vec::new(), messages: None, coalition_edges: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodputConfig {
    /// Built-in name or path.
    pub topology: Option<String>,
    #[serde(default)]
    pub simulate: bool,
    #[serde(default)]
    pub csv: bool,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiledistConfig {
    #[serde(default)]
    pub sizes: Vec<String>,
    #[serde(default)]
    pub accounting: Accounting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub field: Option<FieldConfig>,
    pub scheme: Option<SchemeParams>,
    /// Built-in name or path, relative to the config file.
    pub network: Option<String>,
    #[serde(default)]
    pub simulate: SimulateConfig,
    pub attack: Option<SubstitutionParams>,
    #[serde(default)]
    pub goodput: GoodputConfig,
    #[serde(default)]
    pub filedist: FiledistConfig,
    pub output: Option<OutputFormat>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ScenarioConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn field(&self) -> Result<FieldConfig, CliError> {
        self.field.ok_or_else(|| CliError::Config("config has no \"field\" section".into()))
    }

    pub fn scheme(&self) -> Result<SchemeParams, CliError> {
        self.scheme.ok_or_else(|| CliError::Config("config has no \"scheme\" section".into()))
    }

    pub fn network(&self) -> Result<Network, CliError> {
        let name = self.network.as_deref().ok_or_else(|| CliError::Config("config has no \"network\" entry".into()))?;
        load_network(name, &self.base_dir)
    }
}

/// Reads a built-in topology by name or a network file by path.
pub fn load_network(name: &str, base: &Path) -> Result<Network, CliError> {
    let text = match topologies::builtin(name) {
        Some(t) => t.to_string(),
        None => {
            let path = base.join(name);
            fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    Network::from_json(&text).map_err(|e| CliError::Config(format!("{name}: {e}")))
}
