//! AcuRite 5-in-1 style frames.
//!
//! Eight bytes, MSB first:
//!
//! ```text
//! byte0  [7:6] channel  [5:0] id high bits
//! byte1  id low byte
//! byte2  [7] parity  [6] battery ok  [5:0] message type (0x31 | 0x38)
//! byte3  [7] parity  [6:0] wind speed raw
//! byte4  [7] parity  0x31: [3:0] wind direction code   0x38: [6:0] temp raw high
//! byte5  [7] parity  0x31: [6:0] rain counter high     0x38: [6:3] temp raw low
//! byte6  [7] parity  0x31: [6:0] rain counter low      0x38: [6:0] humidity
//! byte7  sum(byte0..=byte6) mod 256
//! ```
//!
//! Parity is even over the whole byte.

use crate::record::{Field, Protocol, StationId, WeatherRecord};

use super::bits::BitString;
use super::pulses::{Level, PulseTrain};
use super::timing::TimingSpec;
use super::DecodeError;

pub const FRAME_BITS: usize = 64;

pub const WIND_SLOPE_KPH: f64 = 0.8278;
pub const WIND_OFFSET_KPH: f64 = 1.0;
pub const DIR_STEP_DEG: f64 = 22.5;
pub const RAIN_MM_PER_TIP: f64 = 0.254;
pub const RAIN_COUNTER_MODULUS: u32 = 1 << 14;
const TEMP_RAW_MAX: u16 = (1 << 11) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum A5n1MessageType {
    /// Wind speed, wind direction, rain counter.
    WindRain,
    /// Wind speed, temperature, humidity.
    WindTempHumidity,
}

impl A5n1MessageType {
    pub const fn code(self) -> u8 {
        match self {
            A5n1MessageType::WindRain => 0x31,
            A5n1MessageType::WindTempHumidity => 0x38,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, DecodeError> {
        match code {
            0x31 => Ok(A5n1MessageType::WindRain),
            0x38 => Ok(A5n1MessageType::WindTempHumidity),
            other => Err(DecodeError::UnknownMessageType(other)),
        }
    }

    pub fn other(self) -> Self {
        match self {
            A5n1MessageType::WindRain => A5n1MessageType::WindTempHumidity,
            A5n1MessageType::WindTempHumidity => A5n1MessageType::WindRain,
        }
    }
}

/// A checksum- and parity-verified frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct A5n1Frame {
    bytes: [u8; 8],
}

fn with_parity(data7: u8) -> u8 {
    let data = data7 & 0x7F;
    data | ((data.count_ones() as u8 & 1) << 7)
}

fn parity_ok(byte: u8) -> bool {
    byte.count_ones().is_multiple_of(2)
}

fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |acc, &b| acc.wrapping_add(b))
}

/// Sensor values in the station's native units and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct A5n1Raw {
    pub channel: u8,
    pub id: u16,
    pub battery_ok: bool,
    pub message_type: A5n1MessageType,
    pub wind_raw: u8,
    pub dir_code: u8,
    pub rain_counter: u16,
    pub temp_raw: u16,
    pub humidity: u8,
}

impl A5n1Frame {
    pub fn from_bytes(bytes: [u8; 8]) -> Result<Self, DecodeError> {
        let expected = checksum(&bytes[..7]);
        if expected != bytes[7] {
            return Err(DecodeError::Checksum {
                expected,
                actual: bytes[7],
            });
        }
        if let Some(byte) = (2..7).find(|&i| !parity_ok(bytes[i])) {
            return Err(DecodeError::Parity { byte });
        }
        A5n1MessageType::from_code(bytes[2] & 0x3F)?;
        Ok(A5n1Frame { bytes })
    }

    pub fn from_bits(bits: &BitString) -> Result<Self, DecodeError> {
        if bits.len() != FRAME_BITS {
            return Err(DecodeError::Length {
                expected: FRAME_BITS,
                actual: bits.len(),
            });
        }
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&bits.to_bytes());
        Self::from_bytes(bytes)
    }

    /// Builds a frame from native values; parity and checksum are computed.
    pub fn assemble(raw: &A5n1Raw) -> Result<Self, DecodeError> {
        if raw.channel > 3 || raw.id > StationId::MAX_ID {
            return Err(DecodeError::OutOfRange(format!(
                "channel {} / id {}",
                raw.channel, raw.id
            )));
        }
        if raw.wind_raw > 0x7F {
            return Err(DecodeError::OutOfRange(format!(
                "wind raw {}",
                raw.wind_raw
            )));
        }
        let mut b = [0u8; 8];
        b[0] = raw.channel << 6 | (raw.id >> 8) as u8 & 0x3F;
        b[1] = raw.id as u8;
        b[2] = with_parity((raw.battery_ok as u8) << 6 | raw.message_type.code());
        b[3] = with_parity(raw.wind_raw);
        match raw.message_type {
            A5n1MessageType::WindRain => {
                if raw.dir_code > 15 {
                    return Err(DecodeError::OutOfRange(format!(
                        "direction code {}",
                        raw.dir_code
                    )));
                }
                if raw.rain_counter as u32 >= RAIN_COUNTER_MODULUS {
                    return Err(DecodeError::OutOfRange(format!(
                        "rain counter {}",
                        raw.rain_counter
                    )));
                }
                b[4] = with_parity(raw.dir_code);
                b[5] = with_parity((raw.rain_counter >> 7) as u8);
                b[6] = with_parity(raw.rain_counter as u8 & 0x7F);
            }
            A5n1MessageType::WindTempHumidity => {
                if raw.temp_raw > TEMP_RAW_MAX {
                    return Err(DecodeError::OutOfRange(format!(
                        "temperature raw {}",
                        raw.temp_raw
                    )));
                }
                if raw.humidity > 100 {
                    return Err(DecodeError::OutOfRange(format!(
                        "humidity {}",
                        raw.humidity
                    )));
                }
                b[4] = with_parity((raw.temp_raw >> 4) as u8);
                b[5] = with_parity(((raw.temp_raw & 0x0F) as u8) << 3);
                b[6] = with_parity(raw.humidity);
            }
        }
        b[7] = checksum(&b[..7]);
        Ok(A5n1Frame { bytes: b })
    }

    pub fn bytes(&self) -> [u8; 8] {
        self.bytes
    }

    pub fn to_bits(&self) -> BitString {
        BitString::from_bytes(&self.bytes)
    }

    pub fn message_type(&self) -> A5n1MessageType {
        A5n1MessageType::from_code(self.bytes[2] & 0x3F).expect("validated on construction")
    }

    pub fn raw(&self) -> A5n1Raw {
        let b = &self.bytes;
        let message_type = self.message_type();
        let mut raw = A5n1Raw {
            channel: b[0] >> 6,
            id: ((b[0] & 0x3F) as u16) << 8 | b[1] as u16,
            battery_ok: b[2] & 0x40 != 0,
            message_type,
            wind_raw: b[3] & 0x7F,
            dir_code: 0,
            rain_counter: 0,
            temp_raw: 0,
            humidity: 0,
        };
        match message_type {
            A5n1MessageType::WindRain => {
                raw.dir_code = b[4] & 0x0F;
                raw.rain_counter = ((b[5] & 0x7F) as u16) << 7 | (b[6] & 0x7F) as u16;
            }
            A5n1MessageType::WindTempHumidity => {
                raw.temp_raw = ((b[4] & 0x7F) as u16) << 4 | ((b[5] & 0x7F) >> 3) as u16;
                raw.humidity = b[6] & 0x7F;
            }
        }
        raw
    }

    pub fn rain_counter(&self) -> Option<u16> {
        (self.message_type() == A5n1MessageType::WindRain).then(|| self.raw().rain_counter)
    }

    /// Physical values as a partial record (sequence number 0).
    pub fn to_record(&self) -> Result<WeatherRecord, DecodeError> {
        let raw = self.raw();
        let station = StationId::new(Protocol::A5n1, raw.id, raw.channel)?;
        let mut rec = WeatherRecord::empty(station);
        rec.set_sensor_battery_ok(raw.battery_ok);
        rec.set_wind_speed(wind_kph(raw.wind_raw));
        match raw.message_type {
            A5n1MessageType::WindRain => {
                rec.set_wind_dir(raw.dir_code as f64 * DIR_STEP_DEG);
                rec.set_rain(raw.rain_counter as f64 * RAIN_MM_PER_TIP);
            }
            A5n1MessageType::WindTempHumidity => {
                if raw.humidity > 100 {
                    return Err(DecodeError::OutOfRange(format!(
                        "humidity {}",
                        raw.humidity
                    )));
                }
                rec.set_temperature(fahrenheit_to_celsius(raw.temp_raw as f64 / 10.0 - 40.0));
                rec.set_humidity(raw.humidity as f64);
            }
        }
        Ok(rec)
    }

    pub fn to_pulses(&self, timing: &TimingSpec) -> PulseTrain {
        bits_to_pulses(&self.to_bits(), timing)
    }
}

/// Sync preamble followed by PWM symbols for an arbitrary bit string.
pub fn bits_to_pulses(bits: &BitString, timing: &TimingSpec) -> PulseTrain {
    let t = &timing.a5n1;
    let mut train = PulseTrain::new();
    for _ in 0..t.sync_pairs {
        train.push(Level::High, t.sync_high);
        train.push(Level::Low, t.sync_low);
    }
    for bit in bits.iter() {
        let (h, l) = if bit {
            (t.one_high, t.one_low)
        } else {
            (t.zero_high, t.zero_low)
        };
        train.push(Level::High, h);
        train.push(Level::Low, l);
    }
    train
}

pub fn wind_kph(raw: u8) -> f64 {
    if raw == 0 {
        0.0
    } else {
        WIND_SLOPE_KPH * raw as f64 + WIND_OFFSET_KPH
    }
}

/// Nearest representable raw wind value.
pub fn wind_raw(kph: f64) -> Result<u8, DecodeError> {
    let max = wind_kph(0x7F) + WIND_SLOPE_KPH / 2.0;
    if !(0.0..=max).contains(&kph) {
        return Err(DecodeError::OutOfRange(format!("wind speed {kph} km/h")));
    }
    let k = ((kph - WIND_OFFSET_KPH) / WIND_SLOPE_KPH)
        .round()
        .clamp(1.0, 127.0) as u8;
    Ok(if kph.abs() <= (wind_kph(k) - kph).abs() {
        0
    } else {
        k
    })
}

pub fn fahrenheit_to_celsius(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}

pub fn celsius_to_fahrenheit(c: f64) -> f64 {
    c * 9.0 / 5.0 + 32.0
}

/// Worst-case error of the native A5N1 resolution per field, canonical units.
pub mod resolution {
    /// 0.1 °F step.
    pub const TEMPERATURE_C: f64 = 0.05 * 5.0 / 9.0;
    pub const HUMIDITY_PCT: f64 = 0.5;
    /// Half the widest gap between representable speeds (0 and 1.8278).
    pub const WIND_SPEED_KPH: f64 = (super::WIND_SLOPE_KPH + super::WIND_OFFSET_KPH) / 2.0;
    pub const WIND_DIR_DEG: f64 = super::DIR_STEP_DEG / 2.0;
    pub const RAIN_MM: f64 = super::RAIN_MM_PER_TIP / 2.0;
}

/// Maps the record's fields for `message_type` onto native values.
pub fn raw_from_record(
    record: &WeatherRecord,
    message_type: A5n1MessageType,
) -> Result<A5n1Raw, DecodeError> {
    if record.station.protocol() != Protocol::A5n1 {
        return Err(DecodeError::OutOfRange(format!(
            "station {} is not an a5n1 station",
            record.station
        )));
    }
    let need = |field: Field, name: &'static str| {
        if record.is_valid(field) {
            Ok(())
        } else {
            Err(DecodeError::MissingField(name))
        }
    };
    need(Field::WindSpeed, "wind_speed_kph")?;
    let mut raw = A5n1Raw {
        channel: record.station.channel(),
        id: record.station.id(),
        battery_ok: record.sensor_battery_ok(),
        message_type,
        wind_raw: wind_raw(record.wind_speed_kph)?,
        dir_code: 0,
        rain_counter: 0,
        temp_raw: 0,
        humidity: 0,
    };
    match message_type {
        A5n1MessageType::WindRain => {
            need(Field::WindDir, "wind_dir_deg")?;
            need(Field::Rain, "rain_mm")?;
            let deg = record.wind_dir_deg;
            if !(0.0..360.0).contains(&deg) {
                return Err(DecodeError::OutOfRange(format!("wind direction {deg}")));
            }
            raw.dir_code = ((deg / DIR_STEP_DEG).round() as u32 % 16) as u8;
            let tips = (record.rain_mm / RAIN_MM_PER_TIP).round();
            if !(0.0..RAIN_COUNTER_MODULUS as f64).contains(&tips) {
                return Err(DecodeError::OutOfRange(format!(
                    "rain {} mm",
                    record.rain_mm
                )));
            }
            raw.rain_counter = tips as u16;
        }
        A5n1MessageType::WindTempHumidity => {
            need(Field::Temperature, "temperature_c")?;
            need(Field::Humidity, "humidity_pct")?;
            let t = ((celsius_to_fahrenheit(record.temperature_c) + 40.0) * 10.0).round();
            if !(0.0..=TEMP_RAW_MAX as f64).contains(&t) {
                return Err(DecodeError::OutOfRange(format!(
                    "temperature {} °C",
                    record.temperature_c
                )));
            }
            raw.temp_raw = t as u16;
            let h = record.humidity_pct.round();
            if !(0.0..=100.0).contains(&h) {
                return Err(DecodeError::OutOfRange(format!(
                    "humidity {}",
                    record.humidity_pct
                )));
            }
            raw.humidity = h as u8;
        }
    }
    Ok(raw)
}

/// Encodes the record's fields for one message type as a pulse train.
pub fn encode_a5n1(
    record: &WeatherRecord,
    message_type: A5n1MessageType,
    timing: &TimingSpec,
) -> Result<PulseTrain, DecodeError> {
    let frame = A5n1Frame::assemble(&raw_from_record(record, message_type)?)?;
    Ok(frame.to_pulses(timing))
}

/// Verifies a 64-bit frame and extracts its partial record.
pub fn decode_a5n1(bits: &BitString) -> Result<(A5n1Frame, WeatherRecord), DecodeError> {
    let frame = A5n1Frame::from_bits(bits)?;
    let record = frame.to_record()?;
    Ok((frame, record))
}
