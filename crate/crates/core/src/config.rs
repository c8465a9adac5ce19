//! Experiment configuration.
//!
//! Configs are TOML. Every key is optional; omitted keys take the defaults
//! below. A complete file looks like:
//!
//! ```toml
//! seed = 1
//! dim = 2048
//! mode = "binary"          # binary | multibit
//! backend = "ideal"        # ideal | analog
//! profile = "calibrated"   # uniform | calibrated (analog backend only)
//! retrain_epochs = 3
//! train_fraction = 0.8
//! dims = [512, 1024, 2048] # dim-sweep only
//! # cost_table = "table.toml"
//!
//! [encoding]
//! scheme = "record"        # record | ngram
//! n = 3
//! levels = 16
//! permute_mode = "shift"   # shift | drop
//! drop_width = 8
//!
//! [cluster]
//! k = 2
//! threshold = 1
//! max_epochs = 20
//!
//! [data]
//! source = "records"       # file | records | language | blobs
//! # path = "data.csv"      # source = "file"
//! # kind = "feature_csv"   # source = "file": feature_csv | text_corpus | synthetic_blobs
//!
//! [analog]                 # match-line model
//! [sensing]                # LTA comparator
//! [records]                # synthetic record generator
//! [language]               # synthetic language generator
//! [blobs]                  # synthetic blob generator
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cam::AnalogParams;
use crate::dataset::{BlobSpec, DatasetKind, LanguageSpec, RecordSpec};
use crate::encoder::EncodingConfig;
use crate::error::{Error, Result};
use crate::hv::check_dim;
use crate::learner::HvMode;
use crate::lta::SensingSpec;
use crate::rng::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Ideal,
    Analog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    #[default]
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    File,
    #[default]
    Records,
    Language,
    Blobs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    pub kind: Option<DatasetKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub k: usize,
    /// Stop once every center moves by fewer than this many bits.
    pub threshold: usize,
    pub max_epochs: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 2,
            threshold: 1,
            max_epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dim: usize,
    pub mode: HvMode,
    pub backend: BackendKind,
    pub profile: ProfileKind,
    pub retrain_epochs: usize,
    pub train_fraction: f64,
    pub dims: Vec<usize>,
    pub cost_table: Option<PathBuf>,
    pub encoding: EncodingConfig,
    pub cluster: ClusterConfig,
    pub data: DataConfig,
    pub analog: AnalogParams,
    pub sensing: SensingSpec,
    pub records: RecordSpec,
    pub language: LanguageSpec,
    pub blobs: BlobSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            dim: 2048,
            mode: HvMode::Binary,
            backend: BackendKind::Ideal,
            profile: ProfileKind::Calibrated,
            retrain_epochs: 3,
            train_fraction: 0.8,
            dims: vec![512, 1024, 2048],
            cost_table: None,
            encoding: EncodingConfig::default(),
            cluster: ClusterConfig::default(),
            data: DataConfig::default(),
            analog: AnalogParams::default(),
            sensing: SensingSpec::default(),
            records: RecordSpec::default(),
            language: LanguageSpec::default(),
            blobs: BlobSpec::default(),
        }
    }
}

/// Independent seed streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub data: u64,
    pub split: u64,
    pub item_memory: u64,
    pub encoding: u64,
    pub lta: u64,
    pub cluster: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            master,
            data: mix(master, 1),
            split: mix(master, 2),
            item_memory: mix(master, 3),
            encoding: mix(master, 4),
            lta: mix(master, 5),
            cluster: mix(master, 6),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg.resolved())
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = cfg.data.path.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        if let Some(p) = cfg.cost_table.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    /// Copies the top-level dimension into the nested sections that carry one.
    pub fn resolved(mut self) -> Self {
        self.encoding.dim = self.dim;
        self.blobs.dim = self.dim;
        self
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_master(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        self.encoding.validate()?;
        if self.encoding.dim != self.dim {
            return Err(Error::Config("encoding.dim disagrees with dim".into()));
        }
        for &d in &self.dims {
            check_dim(d)?;
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must be in (0, 1)".into()));
        }
        self.analog.validate()?;
        self.sensing.validate()?;
        if self.data.source == DataSource::File {
            let path =
                self.data.path.as_ref().ok_or_else(|| {
                    Error::Config("data.source = \"file\" needs data.path".into())
                })?;
            if !path.exists() {
                return Err(Error::Config(format!(
                    "data file {} does not exist",
                    path.display()
                )));
            }
        }
        if let Some(p) = &self.cost_table {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "cost table {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
