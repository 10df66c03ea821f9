//! Single sub-band duty-cycle governance.

use std::collections::VecDeque;

/// Off-time required after a transmission of `t_air_s` seconds.
pub fn duty_cycle_wait(t_air_s: f64, duty_limit: f64) -> f64 {
    debug_assert!(duty_limit > 0.0 && duty_limit <= 1.0);
    t_air_s * (1.0 / duty_limit - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorDecision {
    pub allowed: bool,
    pub next_allowed_s: f64,
}

/// Decides whether a new transmission may start at `now_s` given the end
/// time and airtime of the previous one.
pub fn governor_check(
    last_tx_end_s: Option<f64>,
    last_t_air_s: f64,
    now_s: f64,
    duty_limit: f64,
) -> GovernorDecision {
    let next = last_tx_end_s.map_or(f64::NEG_INFINITY, |end| {
        end + duty_cycle_wait(last_t_air_s, duty_limit)
    });
    GovernorDecision {
        allowed: now_s >= next,
        next_allowed_s: next.max(now_s),
    }
}

/// Stateful governor for one sub-band.
///
/// Applies the per-transmission off-time and additionally keeps the total
/// airtime of every sliding window of `window_s` within `duty_limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct DutyCycleGovernor {
    duty_limit: f64,
    window_s: f64,
    history: VecDeque<(f64, f64)>,
}

impl DutyCycleGovernor {
    pub const HOUR_S: f64 = 3600.0;

    pub fn new(duty_limit: f64) -> Self {
        assert!(
            duty_limit > 0.0 && duty_limit <= 1.0,
            "duty limit {duty_limit} outside (0, 1]"
        );
        DutyCycleGovernor {
            duty_limit,
            window_s: Self::HOUR_S,
            history: VecDeque::new(),
        }
    }

    pub fn duty_limit(&self) -> f64 {
        self.duty_limit
    }

    fn window_use(&self, window_start: f64) -> f64 {
        self.history
            .iter()
            .map(|&(s, d)| (s + d - s.max(window_start)).max(0.0))
            .sum()
    }

    /// Whether a transmission of `t_air_s` may start at `now_s`, and the
    /// earliest time it could.
    pub fn check(&self, now_s: f64, t_air_s: f64) -> GovernorDecision {
        let off = match self.history.back() {
            Some(&(start, air)) => governor_check(Some(start + air), air, now_s, self.duty_limit),
            None => governor_check(None, 0.0, now_s, self.duty_limit),
        };
        let budget = self.duty_limit * self.window_s;
        if t_air_s > budget {
            return GovernorDecision {
                allowed: false,
                next_allowed_s: f64::INFINITY,
            };
        }
        let fits =
            |t: f64| self.window_use(t + t_air_s - self.window_s) + t_air_s <= budget + 1e-12;
        let earliest = off.next_allowed_s;
        let next = if fits(earliest) {
            earliest
        } else {
            self.history
                .iter()
                .map(|&(s, d)| s + d + self.window_s - t_air_s)
                .filter(|&t| t > earliest)
                .find(|&t| fits(t))
                .unwrap_or(f64::INFINITY)
        };
        GovernorDecision {
            allowed: next <= now_s,
            next_allowed_s: next,
        }
    }

    pub fn record(&mut self, start_s: f64, t_air_s: f64) {
        while self
            .history
            .front()
            .is_some_and(|&(s, d)| s + d < start_s - 2.0 * self.window_s)
        {
            self.history.pop_front();
        }
        self.history.push_back((start_s, t_air_s));
    }
}

/// Largest total airtime inside any window of `window_s` seconds, for
/// non-overlapping transmissions given as (start, duration) sorted by start.
pub fn max_window_airtime(transmissions: &[(f64, f64)], window_s: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut k = 0;
    let mut full = 0.0;
    for i in 0..transmissions.len() {
        let ws = transmissions[i].0;
        let we = ws + window_s;
        if k < i {
            k = i;
            full = 0.0;
        }
        while k < transmissions.len() && transmissions[k].0 + transmissions[k].1 <= we {
            full += transmissions[k].1;
            k += 1;
        }
        let partial = transmissions
            .get(k)
            .filter(|t| t.0 < we)
            .map_or(0.0, |t| we - t.0);
        best = best.max(full + partial);
        if k > i {
            full -= transmissions[i].1;
        }
    }
    best
}
