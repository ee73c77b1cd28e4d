//! Interaction-strength guided rewiring of KNN connectivity.
//!
//! Every `interval` epochs the trainer measures a strength profile on a small
//! random batch of training graphs. When some order's strength grew by at
//! least the threshold since the previous checkpoint, the neighbor count `k`
//! moves halfway toward the fastest-growing order and every graph is rebuilt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interactions::{Level, StrengthProfile};

/// What a new profile is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// The profile measured at the previous checkpoint.
    #[default]
    Previous,
    /// The first profile, measured before training.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsgrConfig {
    pub k0: usize,
    /// Minimum growth of one order's strength that triggers a rewiring.
    /// `inf` disables the controller.
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    /// Epochs between checkpoints.
    pub interval: usize,
    /// Training graphs per profile measurement.
    pub batch_graphs: usize,
    pub context_budget: usize,
    pub pair_budget: Option<usize>,
    pub baseline: Baseline,
    /// Profile level; defaults to the level of the model's head.
    pub level: Option<Level>,
    /// Treat fully connected graphs as KNN with `k = n - 1` so the
    /// controller may thin them.
    pub allow_fc: bool,
}

impl Default for IsgrConfig {
    fn default() -> Self {
        Self {
            k0: 8,
            threshold: 0.05,
            interval: 10,
            batch_graphs: 8,
            context_budget: 32,
            pair_budget: None,
            baseline: Baseline::Previous,
            level: None,
            allow_fc: false,
        }
    }
}

impl IsgrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k0 == 0 || self.interval == 0 || self.batch_graphs == 0 || self.context_budget == 0
        {
            return Err(Error::invalid(
                "k0, interval, batch size and context budget must be positive",
            ));
        }
        if self.threshold.is_nan() {
            return Err(Error::invalid("threshold must not be NaN"));
        }
        Ok(())
    }
}

mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One controller checkpoint, as written to the JSON-lines log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsgrRecord {
    pub epoch: usize,
    pub k_before: usize,
    pub k: usize,
    /// Order with the largest strength growth; absent at the first checkpoint.
    pub m_star: Option<usize>,
    pub max_delta: Option<f64>,
    pub fired: bool,
    pub orders: Vec<usize>,
    pub j: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsgrState {
    pub k: usize,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub interval: usize,
    pub baseline: Baseline,
    pub last_profile: Option<StrengthProfile>,
    pub initial_profile: Option<StrengthProfile>,
    pub history: Vec<IsgrRecord>,
}

impl IsgrState {
    pub fn new(k0: usize, threshold: f64, interval: usize) -> Self {
        Self {
            k: k0,
            threshold,
            interval,
            baseline: Baseline::Previous,
            last_profile: None,
            initial_profile: None,
            history: Vec::new(),
        }
    }

    pub fn from_config(cfg: &IsgrConfig) -> Self {
        Self {
            baseline: cfg.baseline,
            ..Self::new(cfg.k0, cfg.threshold, cfg.interval)
        }
    }

    /// Neighbor counts after each checkpoint, starting from the initial one.
    pub fn k_trajectory(&self) -> Vec<usize> {
        self.history.iter().map(|r| r.k).collect()
    }
}

/// Moves `k` halfway toward `m_star`; a half-integer midpoint rounds toward
/// `m_star`. The result is clamped to `[1, n - 1]`.
pub fn updated_k(k: usize, m_star: usize, n: usize) -> usize {
    let sum = k + m_star;
    let mid = if sum % 2 == 0 {
        sum / 2
    } else if m_star > k {
        sum / 2 + 1
    } else {
        sum / 2
    };
    mid.clamp(1, n.saturating_sub(1).max(1))
}

/// Feeds one checkpoint profile to the controller and returns whether the
/// graphs need rebuilding with the new `state.k`. The first call only records
/// the profile.
pub fn isgr_step(state: &mut IsgrState, profile: StrengthProfile, epoch: usize) -> Result<bool> {
    if let Some(last) = state.history.last() {
        if epoch <= last.epoch {
            return Err(Error::invalid(format!(
                "checkpoint epoch {epoch} does not follow {}",
                last.epoch
            )));
        }
    }
    let reference = match state.baseline {
        Baseline::Previous => state.last_profile.as_ref(),
        Baseline::Initial => state.initial_profile.as_ref(),
    };
    let k_before = state.k;
    let mut record = IsgrRecord {
        epoch,
        k_before,
        k: k_before,
        m_star: None,
        max_delta: None,
        fired: false,
        orders: profile.orders.clone(),
        j: profile.j.clone(),
    };
    if let Some(prev) = reference {
        if prev.orders != profile.orders || prev.level != profile.level {
            return Err(Error::invalid("profile order grids differ between checkpoints"));
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (slot, (now, before)) in profile.j.iter().zip(&prev.j).enumerate() {
            let delta = now - before;
            if delta > best.1 {
                best = (slot, delta);
            }
        }
        let m_star = profile.orders[best.0];
        record.m_star = Some(m_star);
        record.max_delta = Some(best.1);
        if best.1 >= state.threshold {
            state.k = updated_k(state.k, m_star, profile.n);
            record.k = state.k;
            record.fired = true;
        }
    }
    if state.initial_profile.is_none() {
        state.initial_profile = Some(profile.clone());
    }
    state.last_profile = Some(profile);
    let fired = record.fired;
    state.history.push(record);
    Ok(fired)
}
