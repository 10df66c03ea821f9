//! Pulse-train framing: locate sync, estimate the capture's time scale and
//! classify PWM symbols into bits.

use crate::record::Protocol;

use super::bits::BitString;
use super::pulses::{Level, Pulse, PulseTrain};
use super::timing::TimingSpec;

const LCW_SYNC: [bool; 4] = [true, false, false, true];

/// Splits a capture into raw bit runs for `protocol`.
///
/// Runs that cannot be classified are skipped. Durations are normalised by
/// the time scale measured on the sync (A5N1) or gap (LCW) pulses, so a
/// uniformly stretched or compressed capture frames identically as long as
/// the reference pulses stay within tolerance.
pub fn frame_pulses(train: &PulseTrain, timing: &TimingSpec, protocol: Protocol) -> Vec<BitString> {
    match protocol {
        Protocol::A5n1 => frame_a5n1(train.entries(), timing),
        Protocol::Lcw => frame_lcw(train.entries(), timing),
    }
}

fn frame_a5n1(e: &[Pulse], timing: &TimingSpec) -> Vec<BitString> {
    let t = &timing.a5n1;
    let tol = timing.tolerance;
    let max_low = t.one_low.max(t.zero_low) as f64 * (1.0 + tol);
    let classes = [
        (t.one_high, t.one_low, true),
        (t.zero_high, t.zero_low, false),
    ];

    let mut out = Vec::new();
    let mut i = 0;
    while i < e.len() {
        if e[i].level != Level::High {
            i += 1;
            continue;
        }
        let mut pairs = 0;
        let mut sync_sum = 0.0;
        while i + 2 * pairs + 1 < e.len()
            && timing.within(e[i + 2 * pairs].duration_us as f64, t.sync_high)
            && timing.within(e[i + 2 * pairs + 1].duration_us as f64, t.sync_low)
        {
            sync_sum += (e[i + 2 * pairs].duration_us + e[i + 2 * pairs + 1].duration_us) as f64;
            pairs += 1;
        }
        if pairs < t.sync_pairs {
            i += 2 * pairs.max(1);
            continue;
        }
        let scale = sync_sum / (pairs as f64 * (t.sync_high + t.sync_low) as f64);

        let mut j = i + 2 * pairs;
        let mut bits = BitString::new();
        while j < e.len() {
            let high = e[j].duration_us as f64 / scale;
            let low = e.get(j + 1).map(|p| p.duration_us as f64 / scale);
            let terminal = low.is_none_or(|l| l > max_low);
            let best = classes
                .iter()
                .map(|&(h, l, bit)| {
                    let mut d = TimingSpec::deviation(high, h);
                    if !terminal {
                        d = d.max(TimingSpec::deviation(low.unwrap(), l));
                    }
                    (d, bit)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            if best.0 > tol {
                break;
            }
            bits.push(best.1);
            j += 2;
            if terminal {
                break;
            }
        }
        if !bits.is_empty() {
            out.push(bits);
        }
        i = j.max(i + 2 * pairs);
    }
    out
}

fn frame_lcw(e: &[Pulse], timing: &TimingSpec) -> Vec<BitString> {
    let t = &timing.lcw;
    let tol = timing.tolerance;
    let gap_max = t.gap as f64 * (1.0 + tol);

    let mut out = Vec::new();
    let mut i = 0;
    while i < e.len() {
        if e[i].level != Level::High {
            i += 1;
            continue;
        }
        // Candidate extent: consecutive (high, gap) pairs, closed by a long
        // low or the end of the capture.
        let mut highs = Vec::new();
        let mut gap_sum = 0.0;
        let mut gaps = 0usize;
        let mut j = i;
        while j < e.len() {
            let high = e[j].duration_us as f64;
            match e.get(j + 1).map(|p| p.duration_us as f64) {
                None => {
                    highs.push(high);
                    j += 1;
                    break;
                }
                Some(low) if timing.within(low, t.gap) => {
                    highs.push(high);
                    gap_sum += low;
                    gaps += 1;
                    j += 2;
                }
                Some(low) if low > gap_max => {
                    highs.push(high);
                    j += 2;
                    break;
                }
                Some(_) => break,
            }
        }
        if highs.is_empty() {
            i += 2;
            continue;
        }
        let scale = if gaps > 0 {
            gap_sum / (gaps as f64 * t.gap as f64)
        } else {
            1.0
        };

        let mut bits = BitString::new();
        let mut failed_at = None;
        for (k, &h) in highs.iter().enumerate() {
            let h = h / scale;
            let d1 = TimingSpec::deviation(h, t.one_high);
            let d0 = TimingSpec::deviation(h, t.zero_high);
            let (d, bit) = if d1 <= d0 { (d1, true) } else { (d0, false) };
            if d > tol {
                failed_at = Some(k);
                break;
            }
            bits.push(bit);
        }
        if let Some(start) = bits
            .as_slice()
            .windows(LCW_SYNC.len())
            .position(|w| w == LCW_SYNC)
        {
            out.push(bits.tail(start));
        }
        i = match failed_at {
            Some(0) => i + 2,
            Some(k) => i + 2 * k,
            None => j,
        };
    }
    out
}
