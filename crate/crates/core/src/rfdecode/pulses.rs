//! Demodulated OOK captures as alternating (level, duration) entries.

use std::fmt;

use super::DecodeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    High,
    Low,
}

impl Level {
    fn symbol(self) -> char {
        match self {
            Level::High => 'H',
            Level::Low => 'L',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub level: Level,
    pub duration_us: u32,
}

/// A capture whose levels strictly alternate and whose durations are positive.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PulseTrain {
    entries: Vec<Pulse>,
}

impl PulseTrain {
    pub fn new() -> Self {
        PulseTrain::default()
    }

    pub fn from_entries(entries: Vec<Pulse>) -> Result<Self, DecodeError> {
        for (i, p) in entries.iter().enumerate() {
            if p.duration_us == 0 {
                return Err(DecodeError::Capture {
                    line: i + 1,
                    reason: "duration must be positive".into(),
                });
            }
            if i > 0 && entries[i - 1].level == p.level {
                return Err(DecodeError::Capture {
                    line: i + 1,
                    reason: "levels must alternate".into(),
                });
            }
        }
        Ok(PulseTrain { entries })
    }

    pub fn entries(&self) -> &[Pulse] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a pulse; a pulse at the same level as the last one extends it.
    pub fn push(&mut self, level: Level, duration_us: u32) {
        if duration_us == 0 {
            return;
        }
        match self.entries.last_mut() {
            Some(last) if last.level == level => {
                last.duration_us = last.duration_us.saturating_add(duration_us)
            }
            _ => self.entries.push(Pulse { level, duration_us }),
        }
    }

    pub fn append(&mut self, other: &PulseTrain) {
        for p in &other.entries {
            self.push(p.level, p.duration_us);
        }
    }

    /// Total duration of the capture.
    pub fn duration_us(&self) -> u64 {
        self.entries.iter().map(|p| p.duration_us as u64).sum()
    }

    /// Every duration multiplied by `factor`, rounded, never below 1 µs.
    pub fn scaled(&self, factor: f64) -> PulseTrain {
        PulseTrain {
            entries: self
                .entries
                .iter()
                .map(|p| Pulse {
                    level: p.level,
                    duration_us: ((p.duration_us as f64 * factor).round() as u32).max(1),
                })
                .collect(),
        }
    }

    /// Parses the line-oriented capture format: `H <µs>` or `L <µs>`, with
    /// `#` starting a comment.
    pub fn parse(text: &str) -> Result<Self, DecodeError> {
        let mut entries: Vec<Pulse> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let bad = |reason: &str| DecodeError::Capture {
                line: line_no,
                reason: reason.to_string(),
            };
            let mut parts = content.split_ascii_whitespace();
            let level = match parts.next() {
                Some("H") => Level::High,
                Some("L") => Level::Low,
                _ => return Err(bad("expected 'H' or 'L'")),
            };
            let duration: u32 = parts
                .next()
                .ok_or_else(|| bad("missing duration"))?
                .parse()
                .map_err(|_| bad("duration is not a decimal integer"))?;
            if parts.next().is_some() {
                return Err(bad("trailing content"));
            }
            if duration == 0 {
                return Err(bad("duration must be positive"));
            }
            if entries.last().is_some_and(|p| p.level == level) {
                return Err(bad("levels must alternate"));
            }
            entries.push(Pulse {
                level,
                duration_us: duration,
            });
        }
        Ok(PulseTrain { entries })
    }
}

impl fmt::Display for PulseTrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.entries {
            writeln!(f, "{} {}", p.level.symbol(), p.duration_us)?;
        }
        Ok(())
    }
}
