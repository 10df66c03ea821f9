//! Simulation configuration, read from JSON with defaults for every field.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyProfile;
use crate::lorawan::{AesKey, DevAddr, RadioParams};
use crate::record::{Protocol, StationId};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub duration_s: f64,
    pub seed: u64,
    pub station: StationSpec,
    pub channel: ChannelSpec,
    pub transponder: TransponderSpec,
    pub barometer: BarometerSpec,
    pub gateway: GatewaySpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_s: 86_400.0,
            seed: 1,
            station: StationSpec::default(),
            channel: ChannelSpec::default(),
            transponder: TransponderSpec::default(),
            barometer: BarometerSpec::default(),
            gateway: GatewaySpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationSpec {
    pub protocol: Protocol,
    pub id: u16,
    pub channel: u8,
    /// Seconds between transmissions; 18 for A5N1 and 8 for LCW if absent.
    pub period_s: Option<f64>,
}

impl Default for StationSpec {
    fn default() -> Self {
        StationSpec {
            protocol: Protocol::A5n1,
            id: 0x0A5,
            channel: 1,
            period_s: None,
        }
    }
}

impl StationSpec {
    pub fn period(&self) -> f64 {
        self.period_s.unwrap_or(match self.protocol {
            Protocol::A5n1 => 18.0,
            Protocol::Lcw => 8.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpec {
    /// Probability that a whole frame is lost.
    pub loss: f64,
    /// Independent per-bit flip probability for frames that get through.
    pub bit_flip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransponderSpec {
    pub profile: String,
    pub t_cycle_s: f64,
    pub rx_timeout_s: f64,
    pub inter_sleep_s: f64,
    pub baro_read_s: f64,
    pub build_s: f64,
    pub sf: u8,
    pub bandwidth_hz: u32,
    pub duty_limit: f64,
    pub fport: u8,
    pub dev_addr: String,
    pub nwk_skey: String,
    pub app_skey: String,
}

impl Default for TransponderSpec {
    fn default() -> Self {
        TransponderSpec {
            profile: "bsf32".into(),
            t_cycle_s: 900.0,
            rx_timeout_s: 60.0,
            inter_sleep_s: 10.0,
            baro_read_s: 0.05,
            build_s: 0.01,
            sf: 9,
            bandwidth_hz: 125_000,
            duty_limit: 0.01,
            fport: 1,
            dev_addr: "260B1F3C".into(),
            nwk_skey: "2B7E151628AED2A6ABF7158809CF4F3C".into(),
            app_skey: "000102030405060708090A0B0C0D0E0F".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarometerSpec {
    pub pressure_pa: u32,
    pub pressure_noise_pa: f64,
    pub temp_c: f64,
    pub temp_noise_c: f64,
}

impl Default for BarometerSpec {
    fn default() -> Self {
        BarometerSpec {
            pressure_pa: 101_325,
            pressure_noise_pa: 40.0,
            temp_c: 21.0,
            temp_noise_c: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySpec {
    pub loss: f64,
}

/// A configuration that passed validation, with parsed keys and profile.
#[derive(Debug, Clone)]
pub struct ValidConfig {
    pub raw: SimConfig,
    pub station: StationId,
    pub profile: EnergyProfile,
    pub radio: RadioParams,
    pub dev_addr: DevAddr,
    pub nwk_skey: AesKey,
    pub app_skey: AesKey,
}

fn probability(errors: &mut Vec<String>, name: &str, p: f64) {
    if !(0.0..=1.0).contains(&p) {
        errors.push(format!("{name} = {p} is not a probability in [0, 1]"));
    }
}

fn positive(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{name} = {v} must be positive"));
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<SimConfig, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(vec![e.to_string()]))
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<ValidConfig, SimError> {
        let mut errors = Vec::new();
        positive(&mut errors, "duration_s", self.duration_s);
        positive(&mut errors, "station.period_s", self.station.period());
        probability(&mut errors, "channel.loss", self.channel.loss);
        probability(&mut errors, "channel.bit_flip", self.channel.bit_flip);
        probability(&mut errors, "gateway.loss", self.gateway.loss);

        let t = &self.transponder;
        positive(&mut errors, "transponder.rx_timeout_s", t.rx_timeout_s);
        positive(&mut errors, "transponder.t_cycle_s", t.t_cycle_s);
        if !(t.inter_sleep_s >= 0.0 && t.baro_read_s >= 0.0 && t.build_s >= 0.0) {
            errors.push("transponder phase durations must be non-negative".into());
        }
        if !(t.duty_limit > 0.0 && t.duty_limit <= 1.0) {
            errors.push(format!(
                "transponder.duty_limit = {} outside (0, 1]",
                t.duty_limit
            ));
        }
        if !(1..=223).contains(&t.fport) {
            errors.push(format!("transponder.fport = {} outside 1..=223", t.fport));
        }
        let profile = match EnergyProfile::builtin(&t.profile) {
            Ok(p) => {
                if t.t_cycle_s < p.t_active_s {
                    errors.push(format!(
                        "transponder.t_cycle_s = {} shorter than the {} s active phase of {}",
                        t.t_cycle_s, p.t_active_s, p.name
                    ));
                }
                Some(p)
            }
            Err(e) => {
                errors.push(format!("transponder.profile: {e}"));
                None
            }
        };
        let radio = RadioParams {
            sf: t.sf,
            bandwidth_hz: t.bandwidth_hz,
            ..RadioParams::default()
        };
        if let Err(e) = radio.validate() {
            errors.push(format!("transponder radio: {e}"));
        }
        let dev_addr = DevAddr::from_hex(&t.dev_addr)
            .map_err(|e| errors.push(format!("transponder.dev_addr: {e}")))
            .ok();
        let nwk = AesKey::from_hex(&t.nwk_skey)
            .map_err(|e| errors.push(format!("transponder.nwk_skey: {e}")))
            .ok();
        let app = AesKey::from_hex(&t.app_skey)
            .map_err(|e| errors.push(format!("transponder.app_skey: {e}")))
            .ok();
        let station = StationId::new(self.station.protocol, self.station.id, self.station.channel)
            .map_err(|e| errors.push(format!("station: {e}")))
            .ok();
        if self.station.protocol == Protocol::Lcw && self.station.id > crate::rfdecode::lcw::MAX_ID
        {
            errors.push(format!(
                "station.id = {} exceeds the LCW maximum 127",
                self.station.id
            ));
        }
        let b = &self.barometer;
        if !(b.pressure_noise_pa >= 0.0 && b.temp_noise_c >= 0.0) {
            errors.push("barometer noise must be non-negative".into());
        }

        match (errors.is_empty(), profile, dev_addr, nwk, app, station) {
            (
                true,
                Some(profile),
                Some(dev_addr),
                Some(nwk_skey),
                Some(app_skey),
                Some(station),
            ) => Ok(ValidConfig {
                raw: self.clone(),
                station,
                profile,
                radio,
                dev_addr,
                nwk_skey,
                app_skey,
            }),
            _ => Err(SimError::Config(errors)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let v = SimConfig::default().validate().unwrap();
        assert_eq!(v.profile.name, "bsf32");
        assert_eq!(v.raw.station.period(), 18.0);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = SimConfig::from_json(r#"{"seed": 7, "channel": {"loss": 0.25}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.channel.loss, 0.25);
        assert_eq!(c.transponder.t_cycle_s, 900.0);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(SimConfig::from_json(r#"{"sede": 7}"#).is_err());
    }

    #[test]
    fn all_errors_reported_together() {
        let mut c = SimConfig::default();
        c.channel.loss = 1.5;
        c.gateway.loss = -0.1;
        c.transponder.t_cycle_s = 10.0;
        c.transponder.profile = "esp8266".into();
        c.transponder.nwk_skey = "zz".into();
        let SimError::Config(errs) = c.validate().unwrap_err() else {
            panic!()
        };
        assert_eq!(errs.len(), 4, "{errs:?}");

        let mut c = SimConfig::default();
        c.transponder.t_cycle_s = 30.0;
        c.transponder.sf = 13;
        let SimError::Config(errs) = c.validate().unwrap_err() else {
            panic!()
        };
        assert_eq!(errs.len(), 2, "{errs:?}");
    }
}
