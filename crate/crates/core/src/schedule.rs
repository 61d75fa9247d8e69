//! Plateau learning-rate schedule driven by validation F1.
//!
//! After `patience` epochs without a strictly higher validation F1 the rate
//! is halved; training stops once it falls below `floor`.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub initial_lr: f64,
    pub patience: u32,
    pub floor: f64,
    pub factor: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { initial_lr: 2e-5, patience: 10, floor: 1e-7, factor: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub lr: f64,
    /// Epochs consumed so far.
    pub epoch: u32,
    pub epochs_since_improvement: u32,
    /// Starts at 0, so the first epoch must beat an F1 of zero to count.
    pub best_val_f1: f64,
    pub halvings: u32,
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlreadyStopped {
    pub epoch: u32,
}

impl fmt::Display for AlreadyStopped {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "schedule already stopped at epoch {}", self.epoch)
    }
}

impl core::error::Error for AlreadyStopped {}

impl ScheduleState {
    pub fn new(cfg: &ScheduleConfig) -> Self {
        ScheduleState {
            lr: cfg.initial_lr,
            epoch: 0,
            epochs_since_improvement: 0,
            best_val_f1: 0.0,
            halvings: 0,
            stopped: false,
        }
    }

    /// Consumes one epoch's validation F1.
    pub fn step(&self, cfg: &ScheduleConfig, val_f1: f64) -> Result<ScheduleState, AlreadyStopped> {
        if self.stopped {
            return Err(AlreadyStopped { epoch: self.epoch });
        }
        let mut next = *self;
        next.epoch += 1;
        if val_f1 > self.best_val_f1 {
            next.best_val_f1 = val_f1;
            next.epochs_since_improvement = 0;
        } else {
            next.epochs_since_improvement += 1;
        }
        if next.epochs_since_improvement >= cfg.patience {
            next.lr *= cfg.factor;
            next.epochs_since_improvement = 0;
            next.halvings += 1;
        }
        if next.lr < cfg.floor {
            next.stopped = true;
        }
        Ok(next)
    }
}

/// States after each consumed F1 value, ending early at the stopping epoch.
pub fn trace(cfg: &ScheduleConfig, val_f1s: impl IntoIterator<Item = f64>) -> Vec<ScheduleState> {
    let mut state = ScheduleState::new(cfg);
    let mut out = Vec::new();
    for f1 in val_f1s {
        state = state.step(cfg, f1).expect("loop exits on stop");
        out.push(state);
        if state.stopped {
            break;
        }
    }
    out
}
