//! Simulated weather stations.
//!
//! Values wander on the station's native grid, so every emitted frame has an
//! exact ground-truth record next to it.

use rand::Rng;

use crate::record::{StationId, WeatherRecord};
use crate::rfdecode::a5n1::{self, A5n1Raw};
use crate::rfdecode::{A5n1Frame, A5n1MessageType, LcwFrame, LcwQuantity, SensorFrame};

use super::SimError;

/// One transmission and what it is supposed to say.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub frame: SensorFrame,
    /// Partial record holding exactly the fields this frame carries, with
    /// rain as the station's cumulative total rather than its counter.
    pub truth: WeatherRecord,
}

fn walk<R: Rng + ?Sized>(rng: &mut R, v: u32, step: u32, lo: u32, hi: u32) -> u32 {
    let d = rng.gen_range(0..=2 * step) as i64 - step as i64;
    (v as i64 + d).clamp(lo as i64, hi as i64) as u32
}

#[derive(Debug, Clone)]
pub struct A5n1Station {
    station: StationId,
    next_type: A5n1MessageType,
    wind_raw: u8,
    dir_code: u8,
    rain_tips: u64,
    temp_raw: u16,
    humidity: u8,
}

impl A5n1Station {
    pub fn new<R: Rng + ?Sized>(station: StationId, rng: &mut R) -> Self {
        A5n1Station {
            station,
            next_type: if rng.gen_bool(0.5) {
                A5n1MessageType::WindRain
            } else {
                A5n1MessageType::WindTempHumidity
            },
            wind_raw: rng.gen_range(0..20),
            dir_code: rng.gen_range(0..16),
            rain_tips: rng.gen_range(0..a5n1::RAIN_COUNTER_MODULUS as u64),
            temp_raw: rng.gen_range(800..1100),
            humidity: rng.gen_range(30..90),
        }
    }

    fn drift<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.wind_raw = walk(rng, self.wind_raw as u32, 3, 0, 60) as u8;
        self.dir_code = ((self.dir_code as i32 + rng.gen_range(-1..=1)).rem_euclid(16)) as u8;
        if rng.gen_bool(0.2) {
            self.rain_tips += rng.gen_range(1..=3);
        }
        self.temp_raw = walk(rng, self.temp_raw as u32, 2, 400, 1300) as u16;
        self.humidity = walk(rng, self.humidity as u32, 1, 5, 100) as u8;
    }

    pub fn emit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Emission, SimError> {
        self.drift(rng);
        let mt = self.next_type;
        self.next_type = mt.other();
        let counter = (self.rain_tips % a5n1::RAIN_COUNTER_MODULUS as u64) as u16;
        let raw = A5n1Raw {
            channel: self.station.channel(),
            id: self.station.id(),
            battery_ok: true,
            message_type: mt,
            wind_raw: self.wind_raw,
            dir_code: self.dir_code,
            rain_counter: counter,
            temp_raw: self.temp_raw,
            humidity: self.humidity,
        };
        let frame = A5n1Frame::assemble(&raw)?;

        let mut truth = WeatherRecord::empty(self.station);
        truth.set_sensor_battery_ok(true);
        truth.set_wind_speed(a5n1::wind_kph(self.wind_raw));
        match mt {
            A5n1MessageType::WindRain => {
                truth.set_wind_dir(self.dir_code as f64 * a5n1::DIR_STEP_DEG);
                truth.set_rain(self.rain_tips as f64 * a5n1::RAIN_MM_PER_TIP);
            }
            A5n1MessageType::WindTempHumidity => {
                truth.set_temperature(a5n1::fahrenheit_to_celsius(
                    self.temp_raw as f64 / 10.0 - 40.0,
                ));
                truth.set_humidity(self.humidity as f64);
            }
        }
        Ok(Emission {
            frame: SensorFrame::A5n1(frame),
            truth,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LcwStation {
    station: StationId,
    next: usize,
    values: [u16; 5],
    rain_counts: u64,
}

impl LcwStation {
    pub fn new<R: Rng + ?Sized>(station: StationId, rng: &mut R) -> Self {
        LcwStation {
            station,
            next: rng.gen_range(0..5),
            values: [
                rng.gen_range(400..700),
                rng.gen_range(300..900),
                0,
                rng.gen_range(0..100),
                rng.gen_range(0..16),
            ],
            rain_counts: rng.gen_range(0..1000),
        }
    }

    fn drift<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let v = &mut self.values;
        v[0] = walk(rng, v[0] as u32, 2, 0, 999) as u16;
        v[1] = walk(rng, v[1] as u32, 3, 0, 1000) as u16;
        v[3] = walk(rng, v[3] as u32, 5, 0, 400) as u16;
        v[4] = ((v[4] as i32 + rng.gen_range(-1..=1)).rem_euclid(16)) as u16;
        if rng.gen_bool(0.2) {
            self.rain_counts += rng.gen_range(1..=3);
        }
    }

    pub fn emit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Emission, SimError> {
        self.drift(rng);
        let q = LcwQuantity::ALL[self.next];
        self.next = (self.next + 1) % LcwQuantity::ALL.len();
        let value = match q {
            LcwQuantity::Rain => {
                (self.rain_counts % crate::rfdecode::lcw::RAIN_COUNTER_MODULUS as u64) as u16
            }
            // humidity frames top out at 99.9 %
            LcwQuantity::Humidity => self.values[1].min(999),
            _ => self.values[q.code() as usize],
        };
        let frame = LcwFrame::assemble(q, value, self.station.id(), true)?;

        let mut truth = WeatherRecord::empty(self.station);
        truth.set_sensor_battery_ok(true);
        let physical = q.to_physical(value)?;
        match q {
            LcwQuantity::Temperature => truth.set_temperature(physical),
            LcwQuantity::Humidity => truth.set_humidity(physical),
            LcwQuantity::Rain => {
                truth.set_rain(self.rain_counts as f64 * crate::rfdecode::lcw::RAIN_MM_PER_COUNT)
            }
            LcwQuantity::WindSpeed => truth.set_wind_speed(physical),
            LcwQuantity::WindDir => truth.set_wind_dir(physical),
        }
        Ok(Emission {
            frame: SensorFrame::Lcw(frame),
            truth,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Emitter {
    A5n1(A5n1Station),
    Lcw(LcwStation),
}

impl Emitter {
    pub fn new<R: Rng + ?Sized>(station: StationId, rng: &mut R) -> Self {
        match station.protocol() {
            crate::record::Protocol::A5n1 => Emitter::A5n1(A5n1Station::new(station, rng)),
            crate::record::Protocol::Lcw => Emitter::Lcw(LcwStation::new(station, rng)),
        }
    }

    pub fn emit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Emission, SimError> {
        match self {
            Emitter::A5n1(s) => s.emit(rng),
            Emitter::Lcw(s) => s.emit(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Protocol;
    use crate::rfdecode::decode_bits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn a5n1_alternates_and_decodes_to_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = StationId::new(Protocol::A5n1, 0x0A5, 1).unwrap();
        let mut e = Emitter::new(st, &mut rng);
        let mut last = None;
        for _ in 0..200 {
            let em = e.emit(&mut rng).unwrap();
            let SensorFrame::A5n1(f) = em.frame else {
                panic!()
            };
            assert_ne!(Some(f.message_type()), last);
            last = Some(f.message_type());
            let (_, rec) = decode_bits(Protocol::A5n1, &f.to_bits()).unwrap();
            assert_eq!(rec.flags, em.truth.flags);
            assert_eq!(rec.temperature_c, em.truth.temperature_c);
            assert_eq!(rec.wind_speed_kph, em.truth.wind_speed_kph);
        }
    }

    #[test]
    fn lcw_round_robin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = StationId::new(Protocol::Lcw, 17, 0).unwrap();
        let mut e = Emitter::new(st, &mut rng);
        let mut seen = 0u8;
        for _ in 0..5 {
            let em = e.emit(&mut rng).unwrap();
            seen |= em.truth.flags.measurements();
            let (_, rec) = decode_bits(Protocol::Lcw, &em.frame.to_bits()).unwrap();
            assert_eq!(rec.flags, em.truth.flags);
        }
        assert_eq!(seen, crate::record::ValidityFlags::SENSOR_FIELDS);
    }
}
