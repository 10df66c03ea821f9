#![allow(dead_code)]

use rand::Rng;
use wxkit::merge_partial;
use wxkit::record::{angular_distance, Protocol, StationId, WeatherRecord};
use wxkit::rfdecode::a5n1::resolution;
use wxkit::rfdecode::{
    decode_bits, frame_pulses, frame_to_pulses, frames_for_record, LcwQuantity, TimingSpec,
};

/// A record with every sensor field valid and inside the protocol's range.
pub fn random_record<R: Rng>(rng: &mut R, protocol: Protocol) -> WeatherRecord {
    let station = match protocol {
        Protocol::A5n1 => StationId::new(protocol, rng.gen_range(0..=0x3FFF), rng.gen_range(0..4)),
        Protocol::Lcw => StationId::new(protocol, rng.gen_range(0..=127), 0),
    }
    .unwrap();
    let mut r = WeatherRecord::empty(station);
    r.set_sensor_battery_ok(rng.gen_bool(0.5));
    r.set_wind_dir(rng.gen_range(0.0..360.0));
    match protocol {
        Protocol::A5n1 => {
            r.set_temperature(rng.gen_range(-40.0..73.7));
            r.set_humidity(rng.gen_range(0.0..=100.0));
            r.set_wind_speed(rng.gen_range(0.0..106.0));
            r.set_rain(rng.gen_range(0.0..4161.0));
        }
        Protocol::Lcw => {
            r.set_temperature(rng.gen_range(-40.0..59.9));
            r.set_humidity(rng.gen_range(0.0..99.9));
            r.set_wind_speed(rng.gen_range(0.0..359.6));
            r.set_rain(rng.gen_range(0.0..517.0));
        }
    }
    r
}

/// Encodes every frame the record needs, scales the captures, frames and
/// decodes them, and folds the partial records back together.
pub fn through_the_air(record: &WeatherRecord, scale: f64) -> Result<WeatherRecord, String> {
    let timing = TimingSpec::default();
    let protocol = record.station.protocol();
    let mut out = WeatherRecord::empty(record.station);
    for frame in frames_for_record(record).map_err(|e| e.to_string())? {
        let train = frame_to_pulses(&frame, &timing).scaled(scale);
        let runs = frame_pulses(&train, &timing, protocol);
        if runs.len() != 1 {
            return Err(format!("{} runs framed", runs.len()));
        }
        let (_, partial) = decode_bits(protocol, &runs[0]).map_err(|e| e.to_string())?;
        out = merge_partial(&out, &partial).map_err(|e| e.to_string())?;
    }
    Ok(out)
}

/// Field-wise comparison against the native resolution of the protocol.
pub fn within_native_resolution(a: &WeatherRecord, b: &WeatherRecord) -> Result<(), String> {
    if a.station != b.station || a.flags != b.flags {
        return Err(format!(
            "station/flags differ: {:?} vs {:?}",
            a.flags, b.flags
        ));
    }
    let eps = 1e-9;
    let (t, h, w, d, r) = match a.station.protocol() {
        Protocol::A5n1 => (
            resolution::TEMPERATURE_C,
            resolution::HUMIDITY_PCT,
            resolution::WIND_SPEED_KPH,
            resolution::WIND_DIR_DEG,
            resolution::RAIN_MM,
        ),
        Protocol::Lcw => (
            LcwQuantity::Temperature.resolution(),
            LcwQuantity::Humidity.resolution(),
            LcwQuantity::WindSpeed.resolution(),
            LcwQuantity::WindDir.resolution(),
            LcwQuantity::Rain.resolution(),
        ),
    };
    let checks = [
        ("temperature", (a.temperature_c - b.temperature_c).abs(), t),
        ("humidity", (a.humidity_pct - b.humidity_pct).abs(), h),
        ("wind speed", (a.wind_speed_kph - b.wind_speed_kph).abs(), w),
        (
            "wind dir",
            angular_distance(a.wind_dir_deg, b.wind_dir_deg),
            d,
        ),
        ("rain", (a.rain_mm - b.rain_mm).abs(), r),
    ];
    for (name, err, bound) in checks {
        if err > bound + eps {
            return Err(format!("{name} off by {err} (bound {bound})"));
        }
    }
    Ok(())
}
