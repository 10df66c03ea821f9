//! Compact uplink payloads, LoRaWAN 1.0.x ABP framing, LoRa airtime and
//! duty-cycle governance.
//!
//! Only the subset a duty-cycled weather transponder needs: unconfirmed
//! uplinks with empty FOpts, no ADR, no downlinks, no OTAA.

pub mod airtime;
pub mod duty;
pub mod frame;
pub mod payload;

pub use airtime::{airtime, RadioError, RadioParams};
pub use duty::{
    duty_cycle_wait, governor_check, max_window_airtime, DutyCycleGovernor, GovernorDecision,
};
pub use frame::{
    AbpSession, AesKey, DevAddr, FrameError, ReceivedUplink, UplinkFrame, UplinkReceiver,
};
pub use payload::{payload_decode, payload_encode, PayloadError, UplinkMeta};

/// Fixed LoRaWAN overhead around an application payload:
/// MHDR(1) + FHDR(7) + FPort(1) + MIC(4).
pub const FRAME_OVERHEAD: usize = 13;

/// Builds one uplink and advances the session counter.
pub fn frame_build(session: &mut AbpSession, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    session.frame_build(payload)
}

/// Verifies and decrypts one uplink against the receiver's state.
pub fn frame_parse(
    bytes: &[u8],
    receiver: &mut UplinkReceiver,
) -> Result<ReceivedUplink, FrameError> {
    receiver.frame_parse(bytes)
}
