//! Time-stamped event log and run summary.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::record::WeatherRecord;

use super::transponder::State;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    FrameEmitted {
        hex: String,
    },
    FrameLost,
    FrameCorrupted {
        flipped_bits: u32,
    },
    FrameMissed {
        state: State,
    },
    FrameAccepted {
        fields: u8,
    },
    FrameRejected {
        reason: String,
    },
    State {
        from: State,
        to: State,
    },
    FieldsExpired {
        fields: u8,
    },
    BarometerRead {
        pressure_pa: u32,
        board_temp_c: f64,
    },
    GovernorWait {
        until_s: f64,
    },
    UplinkSent {
        fcnt: u32,
        bytes: usize,
        airtime_s: f64,
    },
    UplinkLost {
        fcnt: u32,
    },
    UplinkReceived {
        fcnt: u32,
        record: WeatherRecord,
    },
    UplinkRejected {
        fcnt: u32,
        reason: String,
    },
    FidelityMismatch {
        seq: u16,
        detail: String,
    },
    EnergyOverrun {
        excess_uwh: f64,
    },
    Energy {
        state: State,
        start_s: f64,
        duration_s: f64,
        power_uw: f64,
        energy_uwh: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariants {
    pub events_ordered: bool,
    pub ledger_consistent: bool,
    pub duty_cycle_ok: bool,
    pub uplinks_decoded: bool,
    /// Only checked when the channel does not corrupt bits.
    pub fidelity_ok: Option<bool>,
}

impl Invariants {
    pub fn all_held(&self) -> bool {
        self.events_ordered
            && self.ledger_consistent
            && self.duty_cycle_ok
            && self.uplinks_decoded
            && self.fidelity_ok != Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub cycles: u64,
    pub end_time_s: f64,
    pub frames_emitted: u64,
    pub frames_lost: u64,
    pub frames_accepted: u64,
    pub frames_rejected: u64,
    pub uplinks_attempted: u64,
    pub uplinks_delivered: u64,
    pub records_decoded: u64,
    pub complete_records: u64,
    pub total_energy_uwh: f64,
    pub energy_by_state_uwh: BTreeMap<String, f64>,
    pub airtime_total_s: f64,
    pub duty_cycle_utilization: f64,
    pub max_hour_airtime_s: f64,
    pub invariants: Invariants,
    pub invariants_held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub events: Vec<Event>,
    pub summary: Summary,
    /// Records decoded at the server, in arrival order.
    #[serde(skip)]
    pub server_records: Vec<WeatherRecord>,
}

impl SimTrace {
    /// One JSON object per event followed by `{"summary": ...}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out.push_str(
            &serde_json::to_string(&serde_json::json!({ "summary": &self.summary }))
                .expect("summary serializes"),
        );
        out.push('\n');
        out
    }

    /// Sum of all energy entries in µWh.
    pub fn ledger_total_uwh(&self) -> f64 {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Energy { energy_uwh, .. } => Some(energy_uwh),
                _ => None,
            })
            .sum()
    }
}
