//! La Crosse WS-2300 style frames: 13 nibbles, one quantity per frame.
//!
//! ```text
//! n0      sync, always 0x9
//! n1      quantity type
//! n2 n3   7-bit station id (n2 * 8 + n3[3:1]), n3[0] battery ok
//! n4..n6  BCD value digits, hundreds first
//! n7..n9  bitwise complement of n4..n6
//! n10 n11 repeat of n4 n5
//! n12     sum(n0..=n11) mod 16
//! ```

use crate::record::{Protocol, StationId, WeatherRecord};

use super::bits::BitString;
use super::pulses::{Level, PulseTrain};
use super::timing::TimingSpec;
use super::DecodeError;

pub const FRAME_BITS: usize = 52;
pub const SYNC: u8 = 0x9;
pub const MAX_ID: u16 = 0x7F;
pub const MAX_VALUE: u16 = 999;
pub const RAIN_MM_PER_COUNT: f64 = 0.518;
pub const RAIN_COUNTER_MODULUS: u32 = 1000;
pub const DIR_STEP_DEG: f64 = 22.5;
const KPH_PER_MPS: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LcwQuantity {
    Temperature,
    Humidity,
    Rain,
    WindSpeed,
    WindDir,
}

impl LcwQuantity {
    pub const ALL: [LcwQuantity; 5] = [
        LcwQuantity::Temperature,
        LcwQuantity::Humidity,
        LcwQuantity::Rain,
        LcwQuantity::WindSpeed,
        LcwQuantity::WindDir,
    ];

    pub const fn code(self) -> u8 {
        match self {
            LcwQuantity::Temperature => 0,
            LcwQuantity::Humidity => 1,
            LcwQuantity::Rain => 2,
            LcwQuantity::WindSpeed => 3,
            LcwQuantity::WindDir => 4,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, DecodeError> {
        LcwQuantity::ALL
            .into_iter()
            .find(|q| q.code() == code)
            .ok_or(DecodeError::UnknownQuantity(code))
    }

    /// Physical value (canonical record units) of a BCD value.
    pub fn to_physical(self, value: u16) -> Result<f64, DecodeError> {
        let v = value as f64;
        Ok(match self {
            LcwQuantity::Temperature => v / 10.0 - 40.0,
            LcwQuantity::Humidity => v / 10.0,
            LcwQuantity::Rain => v * RAIN_MM_PER_COUNT,
            LcwQuantity::WindSpeed => v / 10.0 * KPH_PER_MPS,
            LcwQuantity::WindDir => {
                if value > 15 {
                    return Err(DecodeError::OutOfRange(format!("direction code {value}")));
                }
                v * DIR_STEP_DEG
            }
        })
    }

    /// Nearest BCD value for a physical value in canonical units.
    pub fn from_physical(self, physical: f64) -> Result<u16, DecodeError> {
        let v = match self {
            LcwQuantity::Temperature => ((physical + 40.0) * 10.0).round(),
            LcwQuantity::Humidity => (physical * 10.0).round(),
            LcwQuantity::Rain => (physical / RAIN_MM_PER_COUNT).round(),
            LcwQuantity::WindSpeed => (physical / KPH_PER_MPS * 10.0).round(),
            LcwQuantity::WindDir => {
                if !(0.0..360.0).contains(&physical) {
                    return Err(DecodeError::OutOfRange(format!(
                        "wind direction {physical}"
                    )));
                }
                ((physical / DIR_STEP_DEG).round() as u32 % 16) as f64
            }
        };
        if !(0.0..=MAX_VALUE as f64).contains(&v) {
            return Err(DecodeError::OutOfRange(format!(
                "{self:?} value {physical} not representable"
            )));
        }
        Ok(v as u16)
    }

    /// Worst-case error of the native resolution, canonical units.
    pub fn resolution(self) -> f64 {
        match self {
            LcwQuantity::Temperature | LcwQuantity::Humidity => 0.05,
            LcwQuantity::Rain => RAIN_MM_PER_COUNT / 2.0,
            LcwQuantity::WindSpeed => 0.05 * KPH_PER_MPS,
            LcwQuantity::WindDir => DIR_STEP_DEG / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LcwFrame {
    nibbles: [u8; 13],
}

fn nibble_sum(nibbles: &[u8]) -> u8 {
    nibbles.iter().fold(0u8, |acc, &n| acc.wrapping_add(n)) & 0x0F
}

impl LcwFrame {
    pub fn from_nibbles(nibbles: [u8; 13]) -> Result<Self, DecodeError> {
        if nibbles.iter().any(|&n| n > 0x0F) {
            return Err(DecodeError::Format("nibble value above 0xf".into()));
        }
        if nibbles[0] != SYNC {
            return Err(DecodeError::Sync(nibbles[0]));
        }
        let expected = nibble_sum(&nibbles[..12]);
        if nibbles[12] != expected {
            return Err(DecodeError::Checksum {
                expected,
                actual: nibbles[12],
            });
        }
        for k in 0..3 {
            if nibbles[7 + k] != !nibbles[4 + k] & 0x0F {
                return Err(DecodeError::DigitRepeat { nibble: 7 + k });
            }
        }
        for k in 0..2 {
            if nibbles[10 + k] != nibbles[4 + k] {
                return Err(DecodeError::DigitRepeat { nibble: 10 + k });
            }
        }
        if let Some(k) = (4..7).find(|&k| nibbles[k] > 9) {
            return Err(DecodeError::NonBcd {
                nibble: k,
                digit: nibbles[k],
            });
        }
        LcwQuantity::from_code(nibbles[1])?;
        Ok(LcwFrame { nibbles })
    }

    pub fn from_bits(bits: &BitString) -> Result<Self, DecodeError> {
        if bits.len() != FRAME_BITS {
            return Err(DecodeError::Length {
                expected: FRAME_BITS,
                actual: bits.len(),
            });
        }
        let mut nibbles = [0u8; 13];
        nibbles.copy_from_slice(&bits.to_nibbles());
        Self::from_nibbles(nibbles)
    }

    pub fn assemble(
        quantity: LcwQuantity,
        value: u16,
        id: u16,
        battery_ok: bool,
    ) -> Result<Self, DecodeError> {
        if value > MAX_VALUE {
            return Err(DecodeError::OutOfRange(format!(
                "value {value} exceeds {MAX_VALUE}"
            )));
        }
        if id > MAX_ID {
            return Err(DecodeError::OutOfRange(format!(
                "lcw station id {id} exceeds {MAX_ID}"
            )));
        }
        let digits = [
            (value / 100) as u8,
            (value / 10 % 10) as u8,
            (value % 10) as u8,
        ];
        let mut n = [0u8; 13];
        n[0] = SYNC;
        n[1] = quantity.code();
        n[2] = (id >> 3) as u8;
        n[3] = ((id & 0x7) as u8) << 1 | battery_ok as u8;
        n[4..7].copy_from_slice(&digits);
        for k in 0..3 {
            n[7 + k] = !digits[k] & 0x0F;
        }
        n[10] = digits[0];
        n[11] = digits[1];
        n[12] = nibble_sum(&n[..12]);
        Ok(LcwFrame { nibbles: n })
    }

    pub fn nibbles(&self) -> [u8; 13] {
        self.nibbles
    }

    pub fn to_bits(&self) -> BitString {
        BitString::from_nibbles(&self.nibbles)
    }

    pub fn quantity(&self) -> LcwQuantity {
        LcwQuantity::from_code(self.nibbles[1]).expect("validated on construction")
    }

    pub fn station_id(&self) -> u16 {
        (self.nibbles[2] as u16) << 3 | (self.nibbles[3] >> 1) as u16
    }

    pub fn battery_ok(&self) -> bool {
        self.nibbles[3] & 1 == 1
    }

    pub fn value(&self) -> u16 {
        let n = &self.nibbles;
        n[4] as u16 * 100 + n[5] as u16 * 10 + n[6] as u16
    }

    pub fn to_record(&self) -> Result<WeatherRecord, DecodeError> {
        let station = StationId::new(Protocol::Lcw, self.station_id(), 0)?;
        let mut rec = WeatherRecord::empty(station);
        rec.set_sensor_battery_ok(self.battery_ok());
        let v = self.quantity().to_physical(self.value())?;
        match self.quantity() {
            LcwQuantity::Temperature => rec.set_temperature(v),
            LcwQuantity::Humidity => rec.set_humidity(v),
            LcwQuantity::Rain => rec.set_rain(v),
            LcwQuantity::WindSpeed => rec.set_wind_speed(v),
            LcwQuantity::WindDir => rec.set_wind_dir(v),
        }
        Ok(rec)
    }

    pub fn to_pulses(&self, timing: &TimingSpec) -> PulseTrain {
        bits_to_pulses(&self.to_bits(), timing)
    }
}

pub fn bits_to_pulses(bits: &BitString, timing: &TimingSpec) -> PulseTrain {
    let t = &timing.lcw;
    let mut train = PulseTrain::new();
    for bit in bits.iter() {
        train.push(Level::High, if bit { t.one_high } else { t.zero_high });
        train.push(Level::Low, t.gap);
    }
    train
}

/// Encodes one quantity (canonical units) as a pulse train.
pub fn encode_lcw(
    quantity: LcwQuantity,
    value: f64,
    station: StationId,
    battery_ok: bool,
    timing: &TimingSpec,
) -> Result<PulseTrain, DecodeError> {
    if station.protocol() != Protocol::Lcw {
        return Err(DecodeError::OutOfRange(format!(
            "station {station} is not an lcw station"
        )));
    }
    let frame = LcwFrame::assemble(
        quantity,
        quantity.from_physical(value)?,
        station.id(),
        battery_ok,
    )?;
    Ok(frame.to_pulses(timing))
}

pub fn decode_lcw(bits: &BitString) -> Result<(LcwFrame, WeatherRecord), DecodeError> {
    let frame = LcwFrame::from_bits(bits)?;
    let record = frame.to_record()?;
    Ok((frame, record))
}
