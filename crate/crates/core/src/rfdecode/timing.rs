use super::DecodeError;

/// Nominal A5N1 durations in µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A5n1Timing {
    pub sync_high: u32,
    pub sync_low: u32,
    pub one_high: u32,
    pub one_low: u32,
    pub zero_high: u32,
    pub zero_low: u32,
    pub sync_pairs: usize,
}

impl Default for A5n1Timing {
    fn default() -> Self {
        A5n1Timing {
            sync_high: 600,
            sync_low: 600,
            one_high: 400,
            one_low: 200,
            zero_high: 200,
            zero_low: 400,
            sync_pairs: 4,
        }
    }
}

/// Nominal LCW durations in µs. Every bit is a high pulse followed by a
/// fixed low gap; the high width carries the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcwTiming {
    pub zero_high: u32,
    pub one_high: u32,
    pub gap: u32,
}

impl Default for LcwTiming {
    fn default() -> Self {
        LcwTiming {
            zero_high: 1300,
            one_high: 550,
            gap: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSpec {
    pub a5n1: A5n1Timing,
    pub lcw: LcwTiming,
    /// Accepted relative deviation from a nominal duration.
    pub tolerance: f64,
}

impl Default for TimingSpec {
    fn default() -> Self {
        TimingSpec {
            a5n1: A5n1Timing::default(),
            lcw: LcwTiming::default(),
            tolerance: 0.35,
        }
    }
}

impl TimingSpec {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(self.tolerance > 0.0 && self.tolerance < 0.5) {
            return Err(DecodeError::Timing(format!(
                "tolerance {} outside (0, 0.5)",
                self.tolerance
            )));
        }
        let a = &self.a5n1;
        let l = &self.lcw;
        let all = [
            a.sync_high,
            a.sync_low,
            a.one_high,
            a.one_low,
            a.zero_high,
            a.zero_low,
            l.zero_high,
            l.one_high,
            l.gap,
        ];
        if all.contains(&0) || a.sync_pairs == 0 {
            return Err(DecodeError::Timing(
                "nominal durations must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Relative deviation of `measured` from `nominal`.
    pub(crate) fn deviation(measured: f64, nominal: u32) -> f64 {
        (measured - nominal as f64).abs() / nominal as f64
    }

    pub(crate) fn within(&self, measured: f64, nominal: u32) -> bool {
        Self::deviation(measured, nominal) <= self.tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        TimingSpec::default().validate().unwrap();
    }

    #[test]
    fn tolerance_domain() {
        for bad in [0.0, 0.5, -0.1, f64::NAN] {
            let t = TimingSpec {
                tolerance: bad,
                ..TimingSpec::default()
            };
            assert!(t.validate().is_err(), "{bad}");
        }
    }
}
