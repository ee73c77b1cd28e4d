//! Serializable training configuration shared by the library and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Construction;
use crate::isgr::IsgrConfig;
use crate::tensor::{AdamConfig, PlateauConfig};

/// How graphs are connected before any rewiring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Knn { k: usize },
    Fc,
    RBall { radius: f64 },
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Knn { k: 8 }
    }
}

impl GraphSpec {
    pub fn construction(self) -> Construction {
        match self {
            GraphSpec::Knn { k } => Construction::Knn(k),
            GraphSpec::Fc => Construction::Fc,
            GraphSpec::RBall { radius } => Construction::RBall(radius),
        }
    }
}

/// Connectivity change applied during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewireMode {
    #[default]
    None,
    /// Interaction-strength guided KNN retuning.
    Isgr,
    /// Fully connected final layer.
    Fa,
    /// Diffusion rewiring, applied once before training.
    Digl,
}

impl std::str::FromStr for RewireMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RewireMode::None),
            "isgr" => Ok(RewireMode::Isgr),
            "fa" => Ok(RewireMode::Fa),
            "digl" => Ok(RewireMode::Digl),
            other => Err(Error::invalid(format!("unknown rewiring mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiglConfig {
    pub alpha: f64,
    pub top_k: Option<usize>,
    pub eps: Option<f64>,
}

impl Default for DiglConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            top_k: Some(8),
            eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub plateau: PlateauConfig,
    /// Epochs without validation improvement before stopping.
    pub early_stopping: usize,
    pub graph: GraphSpec,
    pub rewire: RewireMode,
    pub isgr: IsgrConfig,
    pub digl: DiglConfig,
    /// Seeds shuffling and dropout.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            adam: AdamConfig::default(),
            plateau: PlateauConfig::default(),
            early_stopping: 30,
            graph: GraphSpec::default(),
            rewire: RewireMode::None,
            isgr: IsgrConfig::default(),
            digl: DiglConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        match self.graph {
            GraphSpec::Knn { k: 0 } => return Err(Error::invalid("k must be at least 1")),
            GraphSpec::RBall { radius } if !(radius > 0.0) => {
                return Err(Error::invalid("radius must be positive"))
            }
            _ => {}
        }
        if self.rewire == RewireMode::Isgr {
            self.isgr.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json() {
        let cfg = TrainConfig {
            rewire: RewireMode::Isgr,
            graph: GraphSpec::RBall { radius: 1.5 },
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), cfg);
        let partial: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.batch_size, 32);
    }

    #[test]
    fn desk_defaults() {
        let cfg = TrainConfig::default();
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.adam.lr), (200, 32, 1e-4));
        assert_eq!(cfg.graph, GraphSpec::Knn { k: 8 });
        assert!("digl".parse::<RewireMode>().is_ok());
        assert!("sdrf".parse::<RewireMode>().is_err());
    }
}
