//! Project configuration: one JSON document, every section optional.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicParams, HandImpedance};
use crate::handlemount::MountConfig;
use crate::kinematics::MechanismConfig;
use crate::penholder::GripperGeometry;
use crate::signals::{IntentPath, TremorSpec};
use crate::InvalidParam;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectConfig {
    pub mechanism: MechanismConfig,
    pub dynamics: DynamicParams,
    pub hand: HandImpedance,
    pub tremor: TremorSpec,
    pub intent: IntentPath,
    pub gripper: GripperGeometry,
    pub mount: MountConfig,
    pub output: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            mechanism: MechanismConfig::default(),
            dynamics: DynamicParams::default(),
            hand: HandImpedance::default(),
            tremor: TremorSpec::default(),
            intent: IntentPath::default(),
            gripper: GripperGeometry::default(),
            mount: MountConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    /// Syntax or type error; `path` is the dotted location, empty at the root.
    Parse { path: String, message: String },
    Invalid(InvalidParam),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse { path, message } if path.is_empty() || path == "." => {
                write!(f, "{message}")
            }
            ConfigError::Parse { path, message } => write!(f, "{path}: {message}"),
            ConfigError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<InvalidParam> for ConfigError {
    fn from(e: InvalidParam) -> Self {
        ConfigError::Invalid(e)
    }
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ProjectConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        self.mechanism.validate().map_err(|e| e.within("mechanism"))?;
        self.dynamics.validate().map_err(|e| e.within("dynamics"))?;
        self.hand.validate().map_err(|e| e.within("hand"))?;
        self.tremor.validate().map_err(|e| e.within("tremor"))?;
        self.intent.validate().map_err(|e| e.within("intent"))?;
        self.gripper.validate().map_err(|e| e.within("gripper"))?;
        self.mount.validate().map_err(|e| e.within("mount"))?;
        Ok(())
    }
}
