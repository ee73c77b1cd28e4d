//! Multi-order interaction analysis for geometric graph predictors.
//!
//! The crate measures which contextual complexity of pairwise node
//! interactions a model encodes (the per-order strength profile), and uses
//! the change of that profile during training to retune KNN connectivity.
//!
//! Layout:
//! - [`graph`]: geometric graphs, KNN / FC / r-ball construction, node
//!   removal and the +FA / DIGL rewiring baselines.
//! - [`tensor`]: a small reverse-mode autodiff tape plus Adam and the
//!   plateau scheduler.
//! - [`models`]: an equivariant message-passing network and an attention
//!   message-passing network with binary checkpoints.
//! - [`interactions`]: exact and Monte-Carlo multi-order interactions,
//!   strength profiles, game-theoretic property checks and the normality test.
//! - [`isgr`]: the interaction-strength rewiring controller and training loop.
//! - [`data`]: spring-system simulation and the JSON-lines dataset format.
//! - [`train`]: the supervised training loop with optional rewiring.

pub mod config;
pub mod data;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod interactions;
pub mod isgr;
pub mod models;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use geometry::Vec3;
pub use graph::{Construction, GeometricGraph, GraphView, Subgraph};
pub use interactions::{
    Coalition, Level, NodeSetFunction, PairInteractionEstimate, SetFunction, StrengthProfile,
};
pub use isgr::{IsgrConfig, IsgrState};
pub use models::{Head, Model, ModelConfig};
