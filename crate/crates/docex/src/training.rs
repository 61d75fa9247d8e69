//! Drives a training server's learning-rate schedule over the control channel.
//!
//! The harness sends `schedule` (the lr to use for the next epoch); the server
//! trains one epoch and answers `validation_f1`. Once the schedule stops, a
//! final `schedule` with `stopped: true` is sent and acknowledged with `ack`.

use docex_core::schedule::{ScheduleConfig, ScheduleState};

use crate::protocol::{BridgeError, Message, ScheduleDecision};
use crate::scorer::{kind, Control};

/// Runs epochs until the schedule stops or `max_epochs` is reached; returns
/// the state after every epoch.
pub fn drive_schedule(
    control: &dyn Control,
    cfg: &ScheduleConfig,
    max_epochs: Option<u32>,
) -> Result<Vec<ScheduleState>, BridgeError> {
    let mut state = ScheduleState::new(cfg);
    let mut trace = Vec::new();
    while !state.stopped && max_epochs.is_none_or(|m| state.epoch < m) {
        let reply = control.exchange(&Message::Schedule(ScheduleDecision::from(&state)))?;
        let f1 = match reply {
            Message::ValidationF1(v) if v.epoch == state.epoch + 1 => v.f1,
            Message::ValidationF1(v) => {
                return Err(BridgeError::Schema(format!("validation_f1 for epoch {}, expected {}", v.epoch, state.epoch + 1)))
            }
            Message::Error(e) => return Err(BridgeError::Remote(e.message)),
            other => return Err(BridgeError::Schema(format!("expected validation_f1, got {}", kind(&other)))),
        };
        if !f1.is_finite() {
            return Err(BridgeError::Schema(format!("non-finite validation f1 {f1}")));
        }
        state = state.step(cfg, f1).expect("loop guards on stopped");
        trace.push(state);
    }
    let mut last = ScheduleDecision::from(&state);
    last.stopped = true;
    match control.exchange(&Message::Schedule(last))? {
        Message::Ack => Ok(trace),
        Message::Error(e) => Err(BridgeError::Remote(e.message)),
        other => Err(BridgeError::Schema(format!("expected ack, got {}", kind(&other)))),
    }
}
