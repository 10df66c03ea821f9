//! Demodulated OOK captures to validated protocol frames and weather records.
//!
//! Two station families are supported, A5N1 (8-byte PWM frames with a sync
//! preamble) and LCW (13-nibble pulse-width frames). Each has a decoder that
//! verifies integrity before extracting values, and an encoder that produces
//! captures for simulation and round-trip testing.

use thiserror::Error;

use crate::record::{Protocol, RecordError, WeatherRecord};

pub mod a5n1;
pub mod bits;
pub mod framer;
pub mod lcw;
pub mod pulses;
pub mod rain;
pub mod timing;

pub use a5n1::{decode_a5n1, encode_a5n1, A5n1Frame, A5n1MessageType};
pub use bits::BitString;
pub use framer::frame_pulses;
pub use lcw::{decode_lcw, encode_lcw, LcwFrame, LcwQuantity};
pub use pulses::{Level, Pulse, PulseTrain};
pub use rain::{rain_counter_delta, RainGauge, RainSession};
pub use timing::TimingSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("line {line}: {reason}")]
    Capture { line: usize, reason: String },
    #[error("{0}")]
    Format(String),
    #[error("invalid timing: {0}")]
    Timing(String),
    #[error("expected {expected} bits, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("checksum mismatch (computed {expected:#04x}, frame carries {actual:#04x})")]
    Checksum { expected: u8, actual: u8 },
    #[error("parity failure in byte {byte}")]
    Parity { byte: usize },
    #[error("unknown message type {0:#04x}")]
    UnknownMessageType(u8),
    #[error("bad sync nibble {0:#x}")]
    Sync(u8),
    #[error("digit-repeat mismatch at nibble {nibble}")]
    DigitRepeat { nibble: usize },
    #[error("non-BCD digit {digit:#x} at nibble {nibble}")]
    NonBcd { nibble: usize, digit: u8 },
    #[error("unknown quantity type {0}")]
    UnknownQuantity(u8),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// A decoded frame of either family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorFrame {
    A5n1(A5n1Frame),
    Lcw(LcwFrame),
}

impl SensorFrame {
    pub fn to_bits(&self) -> BitString {
        match self {
            SensorFrame::A5n1(f) => f.to_bits(),
            SensorFrame::Lcw(f) => f.to_bits(),
        }
    }
}

/// Runs the protocol's decoder over one raw bit string.
pub fn decode_bits(
    protocol: Protocol,
    bits: &BitString,
) -> Result<(SensorFrame, WeatherRecord), DecodeError> {
    match protocol {
        Protocol::A5n1 => decode_a5n1(bits).map(|(f, r)| (SensorFrame::A5n1(f), r)),
        Protocol::Lcw => decode_lcw(bits).map(|(f, r)| (SensorFrame::Lcw(f), r)),
    }
}

/// Frames a capture and decodes every run, keeping failures alongside.
pub fn decode_capture(
    train: &PulseTrain,
    timing: &TimingSpec,
    protocol: Protocol,
) -> Vec<Result<(SensorFrame, WeatherRecord), DecodeError>> {
    frame_pulses(train, timing, protocol)
        .iter()
        .map(|bits| decode_bits(protocol, bits))
        .collect()
}

/// Encodes a partial record as one frame per message it needs.
///
/// A5N1 gets a 0x31 frame when direction or rain is valid and a 0x38 frame
/// when temperature or humidity is valid. LCW gets one frame per valid
/// quantity.
pub fn frames_for_record(record: &WeatherRecord) -> Result<Vec<SensorFrame>, DecodeError> {
    use crate::record::Field;
    let mut out = Vec::new();
    match record.station.protocol() {
        Protocol::A5n1 => {
            let wants = [
                (A5n1MessageType::WindRain, [Field::WindDir, Field::Rain]),
                (
                    A5n1MessageType::WindTempHumidity,
                    [Field::Temperature, Field::Humidity],
                ),
            ];
            for (mt, fields) in wants {
                if fields.iter().any(|&f| record.is_valid(f)) {
                    let raw = a5n1::raw_from_record(record, mt)?;
                    out.push(SensorFrame::A5n1(A5n1Frame::assemble(&raw)?));
                }
            }
        }
        Protocol::Lcw => {
            for q in LcwQuantity::ALL {
                let (field, value) = match q {
                    LcwQuantity::Temperature => (Field::Temperature, record.temperature_c),
                    LcwQuantity::Humidity => (Field::Humidity, record.humidity_pct),
                    LcwQuantity::Rain => (Field::Rain, record.rain_mm),
                    LcwQuantity::WindSpeed => (Field::WindSpeed, record.wind_speed_kph),
                    LcwQuantity::WindDir => (Field::WindDir, record.wind_dir_deg),
                };
                if record.is_valid(field) {
                    out.push(SensorFrame::Lcw(LcwFrame::assemble(
                        q,
                        q.from_physical(value)?,
                        record.station.id(),
                        record.sensor_battery_ok(),
                    )?));
                }
            }
        }
    }
    Ok(out)
}

/// Pulse train for a frame of either family.
pub fn frame_to_pulses(frame: &SensorFrame, timing: &TimingSpec) -> PulseTrain {
    match frame {
        SensorFrame::A5n1(f) => f.to_pulses(timing),
        SensorFrame::Lcw(f) => f.to_pulses(timing),
    }
}

/// Pulse train for an arbitrary bit string laid out as `protocol` symbols.
pub fn bits_to_pulses(protocol: Protocol, bits: &BitString, timing: &TimingSpec) -> PulseTrain {
    match protocol {
        Protocol::A5n1 => a5n1::bits_to_pulses(bits, timing),
        Protocol::Lcw => lcw::bits_to_pulses(bits, timing),
    }
}
