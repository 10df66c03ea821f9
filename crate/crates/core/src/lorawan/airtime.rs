//! LoRa time-on-air.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("spreading factor {0} outside 7..=12")]
    SpreadingFactor(u8),
    #[error("bandwidth {0} Hz not one of 125000, 250000, 500000")]
    Bandwidth(u32),
    #[error("coding rate index {0} outside 1..=4 (4/5..4/8)")]
    CodingRate(u8),
    #[error("PHY payload of {0} bytes exceeds 255")]
    PayloadLength(usize),
    #[error("preamble of {0} symbols is too short (minimum 6)")]
    Preamble(u16),
}

/// Modulation settings that determine airtime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub sf: u8,
    pub bandwidth_hz: u32,
    /// 1..=4 for 4/5..4/8.
    pub coding_rate: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    /// `None` applies the transceiver rule: on for SF11/SF12 at 125 kHz.
    pub low_dr_optimize: Option<bool>,
    /// Carried for energy bookkeeping only.
    pub tx_power_dbm: i8,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            sf: 7,
            bandwidth_hz: 125_000,
            coding_rate: 1,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            low_dr_optimize: None,
            tx_power_dbm: 14,
        }
    }
}

impl RadioParams {
    pub fn with_sf(sf: u8) -> Self {
        RadioParams {
            sf,
            ..RadioParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), RadioError> {
        if !(7..=12).contains(&self.sf) {
            return Err(RadioError::SpreadingFactor(self.sf));
        }
        if ![125_000, 250_000, 500_000].contains(&self.bandwidth_hz) {
            return Err(RadioError::Bandwidth(self.bandwidth_hz));
        }
        if !(1..=4).contains(&self.coding_rate) {
            return Err(RadioError::CodingRate(self.coding_rate));
        }
        if self.preamble_symbols < 6 {
            return Err(RadioError::Preamble(self.preamble_symbols));
        }
        Ok(())
    }

    pub fn low_dr_optimize_active(&self) -> bool {
        self.low_dr_optimize
            .unwrap_or(self.sf >= 11 && self.bandwidth_hz == 125_000)
    }

    pub fn symbol_time_s(&self) -> f64 {
        (1u32 << self.sf) as f64 / self.bandwidth_hz as f64
    }
}

/// Symbols in the payload part of a packet (including the 8 fixed ones).
pub fn payload_symbols(params: &RadioParams, phy_payload_len: usize) -> u32 {
    let sf = params.sf as i64;
    let de = params.low_dr_optimize_active() as i64;
    let ih = !params.explicit_header as i64;
    let crc = params.crc_on as i64;
    let num = 8 * phy_payload_len as i64 - 4 * sf + 28 + 16 * crc - 20 * ih;
    let den = 4 * (sf - 2 * de);
    let blocks = if num > 0 { (num + den - 1) / den } else { 0 };
    8 + (blocks * (params.coding_rate as i64 + 4)) as u32
}

/// Time on air in seconds.
pub fn airtime(params: &RadioParams, phy_payload_len: usize) -> Result<f64, RadioError> {
    params.validate()?;
    if phy_payload_len > 255 {
        return Err(RadioError::PayloadLength(phy_payload_len));
    }
    let t_sym = params.symbol_time_s();
    let preamble = (params.preamble_symbols as f64 + 4.25) * t_sym;
    Ok(preamble + payload_symbols(params, phy_payload_len) as f64 * t_sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sf9_42_bytes() {
        let t = airtime(&RadioParams::with_sf(9), 42).unwrap();
        assert_abs_diff_eq!(t * 1e3, 287.744, epsilon = 1e-9);
    }

    #[test]
    fn sf7_one_byte() {
        let t = airtime(&RadioParams::with_sf(7), 1).unwrap();
        assert_abs_diff_eq!(t * 1e3, 25.856, epsilon = 1e-9);
    }

    #[test]
    fn sf12_empty_without_crc_clamps() {
        let p = RadioParams {
            crc_on: false,
            ..RadioParams::with_sf(12)
        };
        assert_eq!(payload_symbols(&p, 0), 8);
        assert_abs_diff_eq!(airtime(&p, 0).unwrap() * 1e3, 663.552, epsilon = 1e-9);
    }

    #[test]
    fn low_dr_rule() {
        assert!(RadioParams::with_sf(11).low_dr_optimize_active());
        assert!(!RadioParams::with_sf(10).low_dr_optimize_active());
        let p = RadioParams {
            bandwidth_hz: 250_000,
            ..RadioParams::with_sf(12)
        };
        assert!(!p.low_dr_optimize_active());
        let p = RadioParams {
            low_dr_optimize: Some(false),
            ..RadioParams::with_sf(12)
        };
        assert!(!p.low_dr_optimize_active());
    }

    #[test]
    fn domain_errors() {
        assert_eq!(
            airtime(&RadioParams::with_sf(13), 10),
            Err(RadioError::SpreadingFactor(13))
        );
        let p = RadioParams {
            bandwidth_hz: 200_000,
            ..RadioParams::default()
        };
        assert_eq!(airtime(&p, 10), Err(RadioError::Bandwidth(200_000)));
        let p = RadioParams {
            coding_rate: 5,
            ..RadioParams::default()
        };
        assert_eq!(airtime(&p, 10), Err(RadioError::CodingRate(5)));
        assert_eq!(
            airtime(&RadioParams::default(), 256),
            Err(RadioError::PayloadLength(256))
        );
    }
}
