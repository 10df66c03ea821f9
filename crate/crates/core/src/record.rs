//! Station identity, validity flags and the unified weather record.
//!
//! Every other module speaks [`WeatherRecord`]. Values are kept in
//! canonical units (°C, %, km/h, degrees, mm, Pa) regardless of what the
//! station reports natively; conversion happens in the protocol codecs.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("station id {0} does not fit in 14 bits")]
    IdOutOfRange(u16),
    #[error("channel {0} does not fit in 2 bits")]
    ChannelOutOfRange(u8),
    #[error("{protocol} stations only use channel 0 (got {channel})")]
    ChannelNotSupported { protocol: Protocol, channel: u8 },
    #[error("reserved validity bit is set in {0:#04x}")]
    ReservedBit(u8),
    #[error("records belong to different stations ({existing} vs {incoming})")]
    StationMismatch {
        existing: StationId,
        incoming: StationId,
    },
}

/// Supported station families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// AcuRite 5-in-1 style 8-byte PWM frames.
    A5n1,
    /// La Crosse WS-2300 style 13-nibble frames.
    Lcw,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::A5n1 => "a5n1",
            Protocol::Lcw => "lcw",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a5n1" => Ok(Protocol::A5n1),
            "lcw" => Ok(Protocol::Lcw),
            other => Err(format!("unknown protocol '{other}' (expected a5n1 or lcw)")),
        }
    }
}

#[derive(Deserialize)]
struct RawStationId {
    protocol: Protocol,
    id: u16,
    channel: u8,
}

/// Identity of one outdoor sensor unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawStationId")]
pub struct StationId {
    protocol: Protocol,
    id: u16,
    channel: u8,
}

impl StationId {
    pub const MAX_ID: u16 = 0x3FFF;
    pub const MAX_CHANNEL: u8 = 3;

    pub fn new(protocol: Protocol, id: u16, channel: u8) -> Result<Self, RecordError> {
        if id > Self::MAX_ID {
            return Err(RecordError::IdOutOfRange(id));
        }
        if channel > Self::MAX_CHANNEL {
            return Err(RecordError::ChannelOutOfRange(channel));
        }
        if protocol == Protocol::Lcw && channel != 0 {
            return Err(RecordError::ChannelNotSupported { protocol, channel });
        }
        Ok(StationId {
            protocol,
            id,
            channel,
        })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }
}

impl TryFrom<RawStationId> for StationId {
    type Error = RecordError;

    fn try_from(raw: RawStationId) -> Result<Self, Self::Error> {
        StationId::new(raw.protocol, raw.id, raw.channel)
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}/{}", self.protocol, self.id, self.channel)
    }
}

/// One-byte validity bitset.
///
/// Bit 0 carries the sensor battery status itself; bits 1..=6 say whether
/// the matching measurement is present. Bit 7 is reserved and always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ValidityFlags(u8);

impl ValidityFlags {
    pub const BATTERY_OK: u8 = 1 << 0;
    pub const TEMP: u8 = 1 << 1;
    pub const HUMIDITY: u8 = 1 << 2;
    pub const WIND_SPEED: u8 = 1 << 3;
    pub const WIND_DIR: u8 = 1 << 4;
    pub const RAIN: u8 = 1 << 5;
    pub const PRESSURE: u8 = 1 << 6;
    pub const RESERVED: u8 = 1 << 7;

    /// Bits that describe outdoor-sensor measurements.
    pub const SENSOR_FIELDS: u8 =
        Self::TEMP | Self::HUMIDITY | Self::WIND_SPEED | Self::WIND_DIR | Self::RAIN;
    /// All measurement bits (sensor fields plus the barometer).
    pub const MEASUREMENTS: u8 = Self::SENSOR_FIELDS | Self::PRESSURE;

    pub const fn empty() -> Self {
        ValidityFlags(0)
    }

    pub fn from_byte(byte: u8) -> Result<Self, RecordError> {
        if byte & Self::RESERVED != 0 {
            return Err(RecordError::ReservedBit(byte));
        }
        Ok(ValidityFlags(byte))
    }

    pub const fn to_byte(self) -> u8 {
        self.0
    }

    pub const fn contains(self, bits: u8) -> bool {
        self.0 & bits == bits
    }

    pub fn set(&mut self, bits: u8, on: bool) {
        let bits = bits & !Self::RESERVED;
        if on {
            self.0 |= bits;
        } else {
            self.0 &= !bits;
        }
    }

    pub const fn measurements(self) -> u8 {
        self.0 & Self::MEASUREMENTS
    }
}

/// Unified weather measurement record.
///
/// Fields whose validity bit is clear hold zero and must be ignored.
/// `board_temp_c` comes from the transponder's barometer and shares the
/// pressure bit. `battery_mv` is the transponder supply; zero means unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherRecord {
    pub station: StationId,
    pub seq: u16,
    pub temperature_c: f64,
    pub humidity_pct: f64,
    pub wind_speed_kph: f64,
    pub wind_dir_deg: f64,
    pub rain_mm: f64,
    pub pressure_pa: u32,
    pub board_temp_c: f64,
    pub battery_mv: u16,
    pub flags: ValidityFlags,
}

/// A single measurement slot of a [`WeatherRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Temperature,
    Humidity,
    WindSpeed,
    WindDir,
    Rain,
    Pressure,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Temperature,
        Field::Humidity,
        Field::WindSpeed,
        Field::WindDir,
        Field::Rain,
        Field::Pressure,
    ];

    pub const fn bit(self) -> u8 {
        match self {
            Field::Temperature => ValidityFlags::TEMP,
            Field::Humidity => ValidityFlags::HUMIDITY,
            Field::WindSpeed => ValidityFlags::WIND_SPEED,
            Field::WindDir => ValidityFlags::WIND_DIR,
            Field::Rain => ValidityFlags::RAIN,
            Field::Pressure => ValidityFlags::PRESSURE,
        }
    }
}

impl WeatherRecord {
    /// A record with every measurement invalid.
    pub fn empty(station: StationId) -> Self {
        WeatherRecord {
            station,
            seq: 0,
            temperature_c: 0.0,
            humidity_pct: 0.0,
            wind_speed_kph: 0.0,
            wind_dir_deg: 0.0,
            rain_mm: 0.0,
            pressure_pa: 0,
            board_temp_c: 0.0,
            battery_mv: 0,
            flags: ValidityFlags::empty(),
        }
    }

    pub fn is_valid(&self, field: Field) -> bool {
        self.flags.contains(field.bit())
    }

    pub fn sensor_battery_ok(&self) -> bool {
        self.flags.contains(ValidityFlags::BATTERY_OK)
    }

    pub fn set_sensor_battery_ok(&mut self, ok: bool) {
        self.flags.set(ValidityFlags::BATTERY_OK, ok);
    }

    pub fn set_temperature(&mut self, c: f64) {
        self.temperature_c = c;
        self.flags.set(ValidityFlags::TEMP, true);
    }

    pub fn set_humidity(&mut self, pct: f64) {
        self.humidity_pct = pct;
        self.flags.set(ValidityFlags::HUMIDITY, true);
    }

    pub fn set_wind_speed(&mut self, kph: f64) {
        self.wind_speed_kph = kph;
        self.flags.set(ValidityFlags::WIND_SPEED, true);
    }

    pub fn set_wind_dir(&mut self, deg: f64) {
        self.wind_dir_deg = deg;
        self.flags.set(ValidityFlags::WIND_DIR, true);
    }

    pub fn set_rain(&mut self, mm: f64) {
        self.rain_mm = mm;
        self.flags.set(ValidityFlags::RAIN, true);
    }

    pub fn set_barometer(&mut self, pressure_pa: u32, board_temp_c: f64) {
        self.pressure_pa = pressure_pa;
        self.board_temp_c = board_temp_c;
        self.flags.set(ValidityFlags::PRESSURE, true);
    }

    /// Clears the given measurement bits and zeroes the matching values.
    pub fn invalidate(&mut self, bits: u8) {
        self.flags.set(bits & ValidityFlags::MEASUREMENTS, false);
        self.zero_invalid();
    }

    /// Overwrites every field whose bit is clear with zero.
    pub fn zero_invalid(&mut self) {
        if !self.is_valid(Field::Temperature) {
            self.temperature_c = 0.0;
        }
        if !self.is_valid(Field::Humidity) {
            self.humidity_pct = 0.0;
        }
        if !self.is_valid(Field::WindSpeed) {
            self.wind_speed_kph = 0.0;
        }
        if !self.is_valid(Field::WindDir) {
            self.wind_dir_deg = 0.0;
        }
        if !self.is_valid(Field::Rain) {
            self.rain_mm = 0.0;
        }
        if !self.is_valid(Field::Pressure) {
            self.pressure_pa = 0;
            self.board_temp_c = 0.0;
        }
    }

    /// Checks the range invariants for every valid field.
    pub fn check_ranges(&self) -> Result<(), String> {
        if self.is_valid(Field::Humidity) && !(0.0..=100.0).contains(&self.humidity_pct) {
            return Err(format!("humidity {} outside [0, 100]", self.humidity_pct));
        }
        if self.is_valid(Field::WindDir) && !(0.0..360.0).contains(&self.wind_dir_deg) {
            return Err(format!(
                "wind direction {} outside [0, 360)",
                self.wind_dir_deg
            ));
        }
        if self.is_valid(Field::WindSpeed)
            && (self.wind_speed_kph.is_nan() || self.wind_speed_kph < 0.0)
        {
            return Err(format!("wind speed {} is negative", self.wind_speed_kph));
        }
        if self.is_valid(Field::Rain) && (self.rain_mm.is_nan() || self.rain_mm < 0.0) {
            return Err(format!("rain {} is negative", self.rain_mm));
        }
        Ok(())
    }
}

/// Folds a newer partial record into the one held in memory.
///
/// Validity is the union of both inputs; where both carry a field the
/// incoming value wins. The sequence number always comes from `incoming`.
/// The sensor battery bit follows the newest record that carries any
/// measurement, and a zero `battery_mv` never overwrites a known value.
pub fn merge_partial(
    existing: &WeatherRecord,
    incoming: &WeatherRecord,
) -> Result<WeatherRecord, RecordError> {
    if existing.station != incoming.station {
        return Err(RecordError::StationMismatch {
            existing: existing.station,
            incoming: incoming.station,
        });
    }
    let mut out = existing.clone();
    out.seq = incoming.seq;
    let inc = incoming.flags;
    if inc.contains(ValidityFlags::TEMP) {
        out.set_temperature(incoming.temperature_c);
    }
    if inc.contains(ValidityFlags::HUMIDITY) {
        out.set_humidity(incoming.humidity_pct);
    }
    if inc.contains(ValidityFlags::WIND_SPEED) {
        out.set_wind_speed(incoming.wind_speed_kph);
    }
    if inc.contains(ValidityFlags::WIND_DIR) {
        out.set_wind_dir(incoming.wind_dir_deg);
    }
    if inc.contains(ValidityFlags::RAIN) {
        out.set_rain(incoming.rain_mm);
    }
    if inc.contains(ValidityFlags::PRESSURE) {
        out.set_barometer(incoming.pressure_pa, incoming.board_temp_c);
    }
    if inc.measurements() != 0 {
        out.set_sensor_battery_ok(incoming.sensor_battery_ok());
    }
    if incoming.battery_mv != 0 {
        out.battery_mv = incoming.battery_mv;
    }
    out.zero_invalid();
    Ok(out)
}

/// Worst-case absolute error each valid field picks up through the compact
/// uplink payload. `None` for fields that are not valid in the record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuantizationBounds {
    pub temperature_c: Option<f64>,
    pub humidity_pct: Option<f64>,
    pub wind_speed_kph: Option<f64>,
    pub wind_dir_deg: Option<f64>,
    pub rain_mm: Option<f64>,
    pub pressure_pa: Option<f64>,
    pub board_temp_c: Option<f64>,
}

/// Half of the payload step for each field.
pub mod payload_step {
    pub const TEMPERATURE_C: f64 = 0.01;
    pub const HUMIDITY_PCT: f64 = 0.5;
    pub const WIND_SPEED_KPH: f64 = 0.1;
    pub const WIND_DIR_DEG: f64 = 0.1;
    pub const RAIN_MM: f64 = 0.01;
    pub const PRESSURE_PA: f64 = 1.0;
    pub const BOARD_TEMP_C: f64 = 0.01;
}

pub fn quantize_roundtrip_bounds(record: &WeatherRecord) -> QuantizationBounds {
    let half = |field: Field, step: f64| record.is_valid(field).then_some(step / 2.0);
    QuantizationBounds {
        temperature_c: half(Field::Temperature, payload_step::TEMPERATURE_C),
        humidity_pct: half(Field::Humidity, payload_step::HUMIDITY_PCT),
        wind_speed_kph: half(Field::WindSpeed, payload_step::WIND_SPEED_KPH),
        wind_dir_deg: half(Field::WindDir, payload_step::WIND_DIR_DEG),
        rain_mm: half(Field::Rain, payload_step::RAIN_MM),
        pressure_pa: half(Field::Pressure, payload_step::PRESSURE_PA),
        // LCW uplinks do not carry the board temperature
        board_temp_c: (record.station.protocol() == Protocol::A5n1)
            .then(|| half(Field::Pressure, payload_step::BOARD_TEMP_C))
            .flatten(),
    }
}

impl QuantizationBounds {
    /// True when `other` matches `reference` field-wise within these bounds
    /// and carries the same validity bits.
    pub fn admits(&self, reference: &WeatherRecord, other: &WeatherRecord) -> bool {
        fn within(bound: Option<f64>, a: f64, b: f64) -> bool {
            bound.is_none_or(|eps| (a - b).abs() <= eps + 1e-9)
        }
        reference.station == other.station
            && reference.flags == other.flags
            && within(
                self.temperature_c,
                reference.temperature_c,
                other.temperature_c,
            )
            && within(
                self.humidity_pct,
                reference.humidity_pct,
                other.humidity_pct,
            )
            && within(
                self.wind_speed_kph,
                reference.wind_speed_kph,
                other.wind_speed_kph,
            )
            && within(
                self.wind_dir_deg,
                0.0,
                angular_distance(reference.wind_dir_deg, other.wind_dir_deg),
            )
            && within(self.rain_mm, reference.rain_mm, other.rain_mm)
            && within(
                self.pressure_pa,
                reference.pressure_pa as f64,
                other.pressure_pa as f64,
            )
            && within(
                self.board_temp_c,
                reference.board_temp_c,
                other.board_temp_c,
            )
    }
}

/// Smallest absolute difference between two bearings in degrees.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Serialize, Deserialize)]
struct RecordFieldsJson {
    temperature_c: Option<f64>,
    humidity_pct: Option<f64>,
    wind_speed_kph: Option<f64>,
    wind_dir_deg: Option<f64>,
    rain_mm: Option<f64>,
    pressure_pa: Option<u32>,
    board_temp_c: Option<f64>,
    battery_mv: Option<u16>,
    sensor_battery_ok: bool,
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    station: StationId,
    seq: u16,
    fields: RecordFieldsJson,
}

impl Serialize for WeatherRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let opt = |field: Field, v: f64| self.is_valid(field).then_some(v);
        RecordJson {
            station: self.station,
            seq: self.seq,
            fields: RecordFieldsJson {
                temperature_c: opt(Field::Temperature, self.temperature_c),
                humidity_pct: opt(Field::Humidity, self.humidity_pct),
                wind_speed_kph: opt(Field::WindSpeed, self.wind_speed_kph),
                wind_dir_deg: opt(Field::WindDir, self.wind_dir_deg),
                rain_mm: opt(Field::Rain, self.rain_mm),
                pressure_pa: self.is_valid(Field::Pressure).then_some(self.pressure_pa),
                board_temp_c: opt(Field::Pressure, self.board_temp_c),
                battery_mv: (self.battery_mv != 0).then_some(self.battery_mv),
                sensor_battery_ok: self.sensor_battery_ok(),
            },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WeatherRecord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = RecordJson::deserialize(deserializer)?;
        let f = json.fields;
        let mut record = WeatherRecord::empty(json.station);
        record.seq = json.seq;
        if let Some(v) = f.temperature_c {
            record.set_temperature(v);
        }
        if let Some(v) = f.humidity_pct {
            record.set_humidity(v);
        }
        if let Some(v) = f.wind_speed_kph {
            record.set_wind_speed(v);
        }
        if let Some(v) = f.wind_dir_deg {
            record.set_wind_dir(v);
        }
        if let Some(v) = f.rain_mm {
            record.set_rain(v);
        }
        if let Some(p) = f.pressure_pa {
            record.set_barometer(p, f.board_temp_c.unwrap_or(0.0));
        }
        record.battery_mv = f.battery_mv.unwrap_or(0);
        record.set_sensor_battery_ok(f.sensor_battery_ok);
        record.check_ranges().map_err(serde::de::Error::custom)?;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn station() -> StationId {
        StationId::new(Protocol::A5n1, 1234, 2).unwrap()
    }

    #[test]
    fn station_id_limits() {
        assert!(StationId::new(Protocol::A5n1, 0x3FFF, 3).is_ok());
        assert_eq!(
            StationId::new(Protocol::A5n1, 0x4000, 0),
            Err(RecordError::IdOutOfRange(0x4000))
        );
        assert_eq!(
            StationId::new(Protocol::A5n1, 1, 4),
            Err(RecordError::ChannelOutOfRange(4))
        );
        assert!(matches!(
            StationId::new(Protocol::Lcw, 1, 1),
            Err(RecordError::ChannelNotSupported { .. })
        ));
    }

    #[test]
    fn merge_disjoint_fields() {
        let mut a = WeatherRecord::empty(station());
        a.set_temperature(20.0);
        let mut b = WeatherRecord::empty(station());
        b.set_humidity(55.0);
        let m = merge_partial(&a, &b).unwrap();
        assert!(m.is_valid(Field::Temperature) && m.is_valid(Field::Humidity));
        assert_eq!(m.temperature_c, 20.0);
        assert_eq!(m.humidity_pct, 55.0);
    }

    #[test]
    fn merge_incoming_wins() {
        let mut a = WeatherRecord::empty(station());
        a.set_temperature(20.0);
        let mut b = WeatherRecord::empty(station());
        b.set_temperature(21.0);
        b.seq = 9;
        let m = merge_partial(&a, &b).unwrap();
        assert_eq!(m.temperature_c, 21.0);
        assert_eq!(m.seq, 9);
    }

    #[test]
    fn merge_all_invalid() {
        let a = WeatherRecord::empty(station());
        let b = WeatherRecord::empty(station());
        let m = merge_partial(&a, &b).unwrap();
        assert_eq!(m.flags.measurements(), 0);
        assert_eq!(m, b);
    }

    #[test]
    fn merge_rejects_other_station() {
        let a = WeatherRecord::empty(station());
        let b = WeatherRecord::empty(StationId::new(Protocol::A5n1, 1235, 2).unwrap());
        assert!(matches!(
            merge_partial(&a, &b),
            Err(RecordError::StationMismatch { .. })
        ));
    }

    #[test]
    fn quantization_bounds_per_field() {
        let mut r = WeatherRecord::empty(station());
        r.set_temperature(1.0);
        r.set_humidity(1.0);
        r.set_barometer(100_000, 20.0);
        let b = quantize_roundtrip_bounds(&r);
        assert_eq!(b.temperature_c, Some(0.005));
        assert_eq!(b.humidity_pct, Some(0.25));
        assert_eq!(b.pressure_pa, Some(0.5));
        assert_eq!(b.wind_speed_kph, None);
        r.set_wind_speed(1.0);
        r.set_wind_dir(1.0);
        r.set_rain(1.0);
        let b = quantize_roundtrip_bounds(&r);
        assert_eq!(b.wind_speed_kph, Some(0.05));
        assert_eq!(b.wind_dir_deg, Some(0.05));
        assert_eq!(b.rain_mm, Some(0.005));
    }

    #[test]
    fn json_uses_nulls_for_invalid_fields() {
        let mut r = WeatherRecord::empty(station());
        r.set_temperature(21.5);
        r.set_sensor_battery_ok(true);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"humidity_pct\":null"), "{text}");
        assert!(text.contains("\"temperature_c\":21.5"), "{text}");
        let back: WeatherRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn json_rejects_bad_station() {
        let text = r#"{"station":{"protocol":"lcw","id":3,"channel":2},"seq":0,"fields":{"temperature_c":null,"humidity_pct":null,"wind_speed_kph":null,"wind_dir_deg":null,"rain_mm":null,"pressure_pa":null,"board_temp_c":null,"battery_mv":null,"sensor_battery_ok":false}}"#;
        assert!(serde_json::from_str::<WeatherRecord>(text).is_err());
    }

    #[test]
    fn validity_byte_roundtrip_all_legal_values() {
        for b in 0u8..=0x7F {
            assert_eq!(ValidityFlags::from_byte(b).unwrap().to_byte(), b);
        }
        for b in 0x80u8..=0xFF {
            assert!(ValidityFlags::from_byte(b).is_err());
        }
    }

    fn arb_partial() -> impl Strategy<Value = WeatherRecord> {
        (
            0u8..0x80,
            any::<u16>(),
            -40.0f64..60.0,
            0.0f64..100.0,
            0.0f64..200.0,
            0u16..=4000,
        )
            .prop_map(|(bits, seq, t, h, w, mv)| {
                let mut r = WeatherRecord::empty(station());
                r.seq = seq;
                r.temperature_c = t;
                r.humidity_pct = h;
                r.wind_speed_kph = w;
                r.wind_dir_deg = w;
                r.rain_mm = w;
                r.pressure_pa = 100_000 + mv as u32;
                r.board_temp_c = t;
                r.battery_mv = mv;
                r.flags = ValidityFlags::from_byte(bits).unwrap();
                r.zero_invalid();
                r
            })
    }

    proptest! {
        #[test]
        fn merge_is_associative(a in arb_partial(), b in arb_partial(), c in arb_partial()) {
            let left = merge_partial(&merge_partial(&a, &b).unwrap(), &c).unwrap();
            let right = merge_partial(&a, &merge_partial(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }
    }
}
