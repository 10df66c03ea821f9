//! Compact uplink payload: 29 bytes for A5N1 stations, 27 for LCW.
//!
//! All multi-byte fields are big-endian.
//!
//! | offset | size | field                                  |
//! |-------:|-----:|----------------------------------------|
//! | 0      | 1    | version (0x01)                         |
//! | 1      | 1    | station type (0x01 A5N1, 0x02 LCW)     |
//! | 2      | 2    | channel << 14 \| station id            |
//! | 4      | 2    | sequence number                        |
//! | 6      | 1    | validity flags                         |
//! | 7      | 2    | temperature °C × 100 (signed)          |
//! | 9      | 1    | humidity % × 2                         |
//! | 10     | 2    | wind speed km/h × 10                   |
//! | 12     | 2    | wind direction ° × 10                  |
//! | 14     | 4    | rain mm × 100                          |
//! | 18     | 4    | pressure Pa                            |
//! | 22     | 2    | board temperature °C × 100 (A5N1 only) |
//! | +0     | 2    | battery mV                             |
//! | +2     | 1    | frames received this cycle             |
//! | +3     | 2    | cycle time s                           |

use thiserror::Error;

use crate::record::{Field, Protocol, RecordError, StationId, ValidityFlags, WeatherRecord};

pub const VERSION: u8 = 0x01;
pub const A5N1_LEN: usize = 29;
pub const LCW_LEN: usize = 27;
const HUMIDITY_MAX_RAW: u8 = 200;
const DIR_MODULUS: u32 = 3600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayloadError {
    #[error("payload length {actual} does not match the {expected}-byte layout")]
    Length { expected: usize, actual: usize },
    #[error("empty payload")]
    Empty,
    #[error("unknown payload version {0:#04x}")]
    Version(u8),
    #[error("unknown station type {0:#04x}")]
    StationType(u8),
    #[error("humidity byte {0} above 200")]
    Humidity(u8),
    #[error("wind direction {0} (tenths of a degree) outside [0, 3600)")]
    WindDir(u16),
    #[error("field {0} is flagged invalid but not zero")]
    InvalidFieldNotZero(&'static str),
    #[error("{field} value {value} not representable")]
    Range { field: &'static str, value: f64 },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Transponder bookkeeping carried alongside the measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UplinkMeta {
    pub frames_received: u8,
    pub cycle_time_s: u16,
}

pub fn station_type(protocol: Protocol) -> u8 {
    match protocol {
        Protocol::A5n1 => 0x01,
        Protocol::Lcw => 0x02,
    }
}

pub fn layout_len(protocol: Protocol) -> usize {
    match protocol {
        Protocol::A5n1 => A5N1_LEN,
        Protocol::Lcw => LCW_LEN,
    }
}

fn scaled(
    field: &'static str,
    value: f64,
    scale: f64,
    min: f64,
    max: f64,
) -> Result<i64, PayloadError> {
    let v = (value * scale).round();
    if !(min..=max).contains(&v) {
        return Err(PayloadError::Range { field, value });
    }
    Ok(v as i64)
}

/// Packs a record. Invalid fields are written as zero with their bit clear.
pub fn payload_encode(record: &WeatherRecord, meta: UplinkMeta) -> Result<Vec<u8>, PayloadError> {
    let protocol = record.station.protocol();
    let valid = |f: Field| record.is_valid(f);
    let mut out = Vec::with_capacity(layout_len(protocol));
    out.push(VERSION);
    out.push(station_type(protocol));
    let station = (record.station.channel() as u16) << 14 | record.station.id();
    out.extend_from_slice(&station.to_be_bytes());
    out.extend_from_slice(&record.seq.to_be_bytes());
    out.push(record.flags.to_byte());

    let temp = if valid(Field::Temperature) {
        scaled(
            "temperature_c",
            record.temperature_c,
            100.0,
            i16::MIN as f64,
            i16::MAX as f64,
        )?
    } else {
        0
    };
    out.extend_from_slice(&(temp as i16).to_be_bytes());
    let hum = if valid(Field::Humidity) {
        scaled(
            "humidity_pct",
            record.humidity_pct,
            2.0,
            0.0,
            HUMIDITY_MAX_RAW as f64,
        )?
    } else {
        0
    };
    out.push(hum as u8);
    let wind = if valid(Field::WindSpeed) {
        scaled(
            "wind_speed_kph",
            record.wind_speed_kph,
            10.0,
            0.0,
            u16::MAX as f64,
        )?
    } else {
        0
    };
    out.extend_from_slice(&(wind as u16).to_be_bytes());
    let dir = if valid(Field::WindDir) {
        if !(0.0..360.0).contains(&record.wind_dir_deg) {
            return Err(PayloadError::Range {
                field: "wind_dir_deg",
                value: record.wind_dir_deg,
            });
        }
        scaled(
            "wind_dir_deg",
            record.wind_dir_deg,
            10.0,
            0.0,
            DIR_MODULUS as f64,
        )? as u32
            % DIR_MODULUS
    } else {
        0
    };
    out.extend_from_slice(&(dir as u16).to_be_bytes());
    let rain = if valid(Field::Rain) {
        scaled("rain_mm", record.rain_mm, 100.0, 0.0, u32::MAX as f64)?
    } else {
        0
    };
    out.extend_from_slice(&(rain as u32).to_be_bytes());
    let (pressure, board) = if valid(Field::Pressure) {
        (
            record.pressure_pa,
            scaled(
                "board_temp_c",
                record.board_temp_c,
                100.0,
                i16::MIN as f64,
                i16::MAX as f64,
            )?,
        )
    } else {
        (0, 0)
    };
    out.extend_from_slice(&pressure.to_be_bytes());
    if protocol == Protocol::A5n1 {
        out.extend_from_slice(&(board as i16).to_be_bytes());
    }
    out.extend_from_slice(&record.battery_mv.to_be_bytes());
    out.push(meta.frames_received);
    out.extend_from_slice(&meta.cycle_time_s.to_be_bytes());
    debug_assert_eq!(out.len(), layout_len(protocol));
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        buf
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_be_bytes(self.take())
    }
    fn i16(&mut self) -> i16 {
        i16::from_be_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_be_bytes(self.take())
    }
}

/// Unpacks a well-formed payload: reserved flag bit clear, invalid fields
/// zero, values inside their domains.
pub fn payload_decode(bytes: &[u8]) -> Result<(WeatherRecord, UplinkMeta), PayloadError> {
    if bytes.is_empty() {
        return Err(PayloadError::Empty);
    }
    if bytes[0] != VERSION {
        return Err(PayloadError::Version(bytes[0]));
    }
    if bytes.len() < 2 {
        return Err(PayloadError::Length {
            expected: A5N1_LEN,
            actual: bytes.len(),
        });
    }
    let protocol = match bytes[1] {
        0x01 => Protocol::A5n1,
        0x02 => Protocol::Lcw,
        other => return Err(PayloadError::StationType(other)),
    };
    let expected = layout_len(protocol);
    if bytes.len() != expected {
        return Err(PayloadError::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let mut r = Reader { bytes, pos: 2 };
    let station_word = r.u16();
    let station = StationId::new(protocol, station_word & 0x3FFF, (station_word >> 14) as u8)?;
    let mut rec = WeatherRecord::empty(station);
    rec.seq = r.u16();
    let flags = ValidityFlags::from_byte(r.u8())?;
    let temp = r.i16();
    let hum = r.u8();
    let wind = r.u16();
    let dir = r.u16();
    let rain = r.u32();
    let pressure = r.u32();
    let board = if protocol == Protocol::A5n1 {
        r.i16()
    } else {
        0
    };
    rec.battery_mv = r.u16();
    let meta = UplinkMeta {
        frames_received: r.u8(),
        cycle_time_s: r.u16(),
    };

    if hum > HUMIDITY_MAX_RAW {
        return Err(PayloadError::Humidity(hum));
    }
    if dir as u32 >= DIR_MODULUS {
        return Err(PayloadError::WindDir(dir));
    }
    let check_zero = |bit: u8, name: &'static str, is_zero: bool| {
        if !flags.contains(bit) && !is_zero {
            Err(PayloadError::InvalidFieldNotZero(name))
        } else {
            Ok(())
        }
    };
    check_zero(ValidityFlags::TEMP, "temperature_c", temp == 0)?;
    check_zero(ValidityFlags::HUMIDITY, "humidity_pct", hum == 0)?;
    check_zero(ValidityFlags::WIND_SPEED, "wind_speed_kph", wind == 0)?;
    check_zero(ValidityFlags::WIND_DIR, "wind_dir_deg", dir == 0)?;
    check_zero(ValidityFlags::RAIN, "rain_mm", rain == 0)?;
    check_zero(
        ValidityFlags::PRESSURE,
        "pressure_pa",
        pressure == 0 && board == 0,
    )?;

    rec.set_sensor_battery_ok(flags.contains(ValidityFlags::BATTERY_OK));
    if flags.contains(ValidityFlags::TEMP) {
        rec.set_temperature(temp as f64 / 100.0);
    }
    if flags.contains(ValidityFlags::HUMIDITY) {
        rec.set_humidity(hum as f64 / 2.0);
    }
    if flags.contains(ValidityFlags::WIND_SPEED) {
        rec.set_wind_speed(wind as f64 / 10.0);
    }
    if flags.contains(ValidityFlags::WIND_DIR) {
        rec.set_wind_dir(dir as f64 / 10.0);
    }
    if flags.contains(ValidityFlags::RAIN) {
        rec.set_rain(rain as f64 / 100.0);
    }
    if flags.contains(ValidityFlags::PRESSURE) {
        rec.set_barometer(pressure, board as f64 / 100.0);
    }
    Ok((rec, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a5n1_station() -> StationId {
        StationId::new(Protocol::A5n1, 0x123, 2).unwrap()
    }

    #[test]
    fn temperature_scaling() {
        let mut r = WeatherRecord::empty(a5n1_station());
        r.set_temperature(21.94);
        let b = payload_encode(&r, UplinkMeta::default()).unwrap();
        assert_eq!(&b[7..9], &[0x08, 0x92]);
        r.set_temperature(-5.5);
        let b = payload_encode(&r, UplinkMeta::default()).unwrap();
        assert_eq!(i16::from_be_bytes([b[7], b[8]]), -550);
    }

    #[test]
    fn all_invalid_record() {
        let mut r = WeatherRecord::empty(a5n1_station());
        r.set_sensor_battery_ok(true);
        let b = payload_encode(&r, UplinkMeta::default()).unwrap();
        assert_eq!(b.len(), 29);
        assert_eq!(b[6], ValidityFlags::BATTERY_OK);
        assert!(b[7..24].iter().all(|&x| x == 0));
    }

    #[test]
    fn lcw_layout_drops_board_temperature() {
        let station = StationId::new(Protocol::Lcw, 17, 0).unwrap();
        let mut r = WeatherRecord::empty(station);
        r.set_barometer(101_325, 22.5);
        r.battery_mv = 3700;
        let meta = UplinkMeta {
            frames_received: 2,
            cycle_time_s: 900,
        };
        let b = payload_encode(&r, meta).unwrap();
        assert_eq!(b.len(), 27);
        assert_eq!(&b[18..22], &101_325u32.to_be_bytes());
        // battery directly after pressure, two bytes earlier than A5N1
        assert_eq!(&b[22..24], &3700u16.to_be_bytes());
        assert_eq!(b[24], 2);
        assert_eq!(&b[25..27], &900u16.to_be_bytes());
        let (back, m) = payload_decode(&b).unwrap();
        assert_eq!(m, meta);
        assert_eq!(back.pressure_pa, 101_325);
        assert_eq!(back.board_temp_c, 0.0);
    }

    #[test]
    fn decode_errors() {
        let r = WeatherRecord::empty(a5n1_station());
        let good = payload_encode(&r, UplinkMeta::default()).unwrap();
        assert!(matches!(
            payload_decode(&good[..28]),
            Err(PayloadError::Length {
                expected: 29,
                actual: 28
            })
        ));
        let mut b = good.clone();
        b[0] = 2;
        assert_eq!(payload_decode(&b), Err(PayloadError::Version(2)));
        let mut b = good.clone();
        b[1] = 9;
        assert_eq!(payload_decode(&b), Err(PayloadError::StationType(9)));
        let mut b = good.clone();
        b[6] |= ValidityFlags::HUMIDITY;
        b[9] = 201;
        assert_eq!(payload_decode(&b), Err(PayloadError::Humidity(201)));
        let mut b = good.clone();
        b[9] = 10;
        assert_eq!(
            payload_decode(&b),
            Err(PayloadError::InvalidFieldNotZero("humidity_pct"))
        );
        let mut b = good;
        b[6] = 0x80;
        assert!(matches!(payload_decode(&b), Err(PayloadError::Record(_))));
    }

    #[test]
    fn direction_rounding_wraps() {
        let mut r = WeatherRecord::empty(a5n1_station());
        r.set_wind_dir(359.97);
        let b = payload_encode(&r, UplinkMeta::default()).unwrap();
        assert_eq!(&b[12..14], &[0, 0]);
    }

    #[test]
    fn out_of_range_values_rejected() {
        let mut r = WeatherRecord::empty(a5n1_station());
        r.set_temperature(400.0);
        assert!(matches!(
            payload_encode(&r, UplinkMeta::default()),
            Err(PayloadError::Range {
                field: "temperature_c",
                ..
            })
        ));
    }
}
