//! Rain gauge tip counters and their wrap-around.

use super::{a5n1, lcw};

/// Rainfall between two A5N1 14-bit counter readings.
pub fn rain_counter_delta(prev: u16, curr: u16) -> f64 {
    RainGauge::A5N1.delta_mm(prev as u32, curr as u32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainGauge {
    pub modulus: u32,
    pub mm_per_count: f64,
}

impl RainGauge {
    pub const A5N1: RainGauge = RainGauge {
        modulus: a5n1::RAIN_COUNTER_MODULUS,
        mm_per_count: a5n1::RAIN_MM_PER_TIP,
    };
    pub const LCW: RainGauge = RainGauge {
        modulus: lcw::RAIN_COUNTER_MODULUS,
        mm_per_count: lcw::RAIN_MM_PER_COUNT,
    };

    pub fn delta_counts(&self, prev: u32, curr: u32) -> u32 {
        (curr % self.modulus + self.modulus - prev % self.modulus) % self.modulus
    }

    pub fn delta_mm(&self, prev: u32, curr: u32) -> f64 {
        self.delta_counts(prev, curr) as f64 * self.mm_per_count
    }
}

/// Cumulative rainfall over one decoding session.
///
/// The first reading sets the baseline at the counter's own value, later
/// readings add the wrapped difference, so the total never decreases.
#[derive(Debug, Clone, PartialEq)]
pub struct RainSession {
    gauge: RainGauge,
    last: Option<u32>,
    counts: u64,
}

impl RainSession {
    pub fn new(gauge: RainGauge) -> Self {
        RainSession {
            gauge,
            last: None,
            counts: 0,
        }
    }

    /// Feeds a counter reading and returns the session total in mm.
    pub fn update(&mut self, counter: u32) -> f64 {
        let counter = counter % self.gauge.modulus;
        self.counts += match self.last {
            None => counter as u64,
            Some(prev) => self.gauge.delta_counts(prev, counter) as u64,
        };
        self.last = Some(counter);
        self.total_mm()
    }

    pub fn total_mm(&self) -> f64 {
        self.counts as f64 * self.gauge.mm_per_count
    }
}
