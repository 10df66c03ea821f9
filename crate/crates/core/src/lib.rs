//! Software twin of a weather-station-to-LoRaWAN transponder.
//!
//! * [`rfdecode`] turns demodulated 433 MHz pulse captures into validated
//!   sensor frames and [`record::WeatherRecord`]s (and back).
//! * [`lorawan`] packs records into compact uplink payloads, wraps them in
//!   LoRaWAN 1.0.x ABP frames, and computes airtime and duty-cycle limits.
//! * [`energy`] is the closed-form cycle energy and battery-life model.
//! * [`sim`] runs the transponder's receive/sleep/transmit loop as a
//!   deterministic discrete-event simulation.

pub mod energy;
pub mod lorawan;
pub mod record;
pub mod rfdecode;
pub mod sim;

pub use record::{merge_partial, Field, Protocol, StationId, ValidityFlags, WeatherRecord};
