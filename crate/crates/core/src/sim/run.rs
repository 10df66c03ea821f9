use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lorawan::{max_window_airtime, payload_decode, UplinkReceiver};
use crate::record::{merge_partial, quantize_roundtrip_bounds, ValidityFlags, WeatherRecord};
use crate::rfdecode::{bits_to_pulses, TimingSpec};

use super::channel::channel_apply;
use super::config::SimConfig;
use super::emitter::Emitter;
use super::trace::{Event, EventKind, Invariants, SimTrace, Summary};
use super::transponder::{Action, Input, Transponder};
use super::{SimError, STREAM_CHANNEL, STREAM_EMITTER, STREAM_GATEWAY};

enum Pending {
    Start,
    Emission,
    Timer(u64),
    GatewayRx {
        fcnt: u32,
        bytes: Vec<u8>,
        sent: WeatherRecord,
        expected: WeatherRecord,
    },
}

struct Queued {
    t: f64,
    seq: u64,
    what: Pending,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest (time, insertion) first.
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Queued>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, t: f64, what: Pending) {
        self.heap.push(Queued {
            t,
            seq: self.seq,
            what,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Queued> {
        self.heap.pop()
    }
}

fn stream(seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Runs one simulation to completion.
///
/// Transponder cycles start every `t_cycle_s` (later if an active phase
/// overruns) while the start time is below `duration_s`; the last cycle
/// always finishes.
pub fn run(config: &SimConfig) -> Result<SimTrace, SimError> {
    let cfg = config.validate()?;
    let protocol = cfg.station.protocol();
    let timing = TimingSpec::default();
    let period = cfg.raw.station.period();
    let check_fidelity = cfg.raw.channel.bit_flip == 0.0;

    let mut rng_emit = stream(cfg.raw.seed, STREAM_EMITTER);
    let mut rng_chan = stream(cfg.raw.seed, STREAM_CHANNEL);
    let mut rng_gw = stream(cfg.raw.seed, STREAM_GATEWAY);

    let mut emitter = Emitter::new(cfg.station, &mut rng_emit);
    let mut transponder = Some(Transponder::new(&cfg)?);
    let mut receiver = UplinkReceiver::new(cfg.dev_addr, cfg.nwk_skey, cfg.app_skey);

    let mut queue = Queue::default();
    queue.push(0.0, Pending::Start);
    queue.push(rng_emit.gen_range(0.0..period), Pending::Emission);

    let mut events: Vec<Event> = Vec::new();
    let mut cancelled = BTreeSet::new();
    let mut shadow = WeatherRecord::empty(cfg.station);
    let mut current_truth: Option<WeatherRecord> = None;
    let mut server_records = Vec::new();
    let mut uplinks: Vec<(f64, f64)> = Vec::new();

    let mut s = Summary {
        seed: cfg.raw.seed,
        cycles: 0,
        end_time_s: 0.0,
        frames_emitted: 0,
        frames_lost: 0,
        frames_accepted: 0,
        frames_rejected: 0,
        uplinks_attempted: 0,
        uplinks_delivered: 0,
        records_decoded: 0,
        complete_records: 0,
        total_energy_uwh: 0.0,
        energy_by_state_uwh: BTreeMap::new(),
        airtime_total_s: 0.0,
        duty_cycle_utilization: 0.0,
        max_hour_airtime_s: 0.0,
        invariants: Invariants {
            events_ordered: true,
            ledger_consistent: true,
            duty_cycle_ok: true,
            uplinks_decoded: true,
            fidelity_ok: check_fidelity.then_some(true),
        },
        invariants_held: false,
    };
    let mut overrun_uwh = 0.0;
    let mut sleep_uwh = 0.0;
    let mut finished = false;

    while let Some(Queued { t: now, what, .. }) = queue.pop() {
        let mut input = None;
        match what {
            Pending::Start => input = Some(Input::Start),
            Pending::Timer(token) => {
                if !cancelled.remove(&token) {
                    input = Some(Input::Timer(token));
                }
            }
            Pending::Emission => {
                if finished {
                    continue;
                }
                let em = emitter.emit(&mut rng_emit)?;
                let bits = em.frame.to_bits();
                s.frames_emitted += 1;
                events.push(Event {
                    t: now,
                    kind: EventKind::FrameEmitted { hex: bits.to_hex() },
                });
                match channel_apply(&bits, &cfg.raw.channel, &mut rng_chan) {
                    None => {
                        s.frames_lost += 1;
                        events.push(Event {
                            t: now,
                            kind: EventKind::FrameLost,
                        });
                    }
                    Some(rx) => {
                        let flipped = rx.iter().zip(bits.iter()).filter(|(a, b)| a != b).count();
                        if flipped > 0 {
                            events.push(Event {
                                t: now,
                                kind: EventKind::FrameCorrupted {
                                    flipped_bits: flipped as u32,
                                },
                            });
                        }
                        current_truth = Some(em.truth);
                        input = Some(Input::Capture(bits_to_pulses(protocol, &rx, &timing)));
                    }
                }
                queue.push(now + period, Pending::Emission);
            }
            Pending::GatewayRx {
                fcnt,
                bytes,
                sent,
                expected,
            } => {
                if cfg.raw.gateway.loss > 0.0 && rng_gw.gen_bool(cfg.raw.gateway.loss) {
                    events.push(Event {
                        t: now,
                        kind: EventKind::UplinkLost { fcnt },
                    });
                    continue;
                }
                let decoded = receiver
                    .frame_parse(&bytes)
                    .map_err(|e| e.to_string())
                    .and_then(|up| payload_decode(&up.payload).map_err(|e| e.to_string()));
                match decoded {
                    Ok((record, _meta)) => {
                        s.uplinks_delivered += 1;
                        s.records_decoded += 1;
                        if record.flags.measurements() == ValidityFlags::MEASUREMENTS {
                            s.complete_records += 1;
                        }
                        let mut mismatch = None;
                        if !quantize_roundtrip_bounds(&sent).admits(&sent, &record) {
                            mismatch = Some("server record differs from the transmitted one");
                        } else if check_fidelity
                            && !quantize_roundtrip_bounds(&expected).admits(&expected, &record)
                        {
                            mismatch = Some("server record differs from station ground truth");
                        }
                        if let Some(detail) = mismatch {
                            s.invariants.fidelity_ok = Some(false);
                            events.push(Event {
                                t: now,
                                kind: EventKind::FidelityMismatch {
                                    seq: record.seq,
                                    detail: detail.to_string(),
                                },
                            });
                        }
                        events.push(Event {
                            t: now,
                            kind: EventKind::UplinkReceived {
                                fcnt,
                                record: record.clone(),
                            },
                        });
                        server_records.push(record);
                    }
                    Err(reason) => {
                        s.invariants.uplinks_decoded = false;
                        events.push(Event {
                            t: now,
                            kind: EventKind::UplinkRejected { fcnt, reason },
                        });
                    }
                }
            }
        }

        let Some(input) = input else { continue };
        let machine = transponder.take().expect("transponder present");
        let (machine, actions) = machine.step(now, input)?;
        transponder = Some(machine);

        for action in actions {
            match action {
                Action::Schedule { at, token } => queue.push(at, Pending::Timer(token)),
                Action::Cancel { token } => {
                    cancelled.insert(token);
                }
                Action::Accepted { .. } => {
                    s.frames_accepted += 1;
                    if let Some(truth) = current_truth.take() {
                        shadow = merge_partial(&shadow, &truth)?;
                    }
                }
                Action::Uplink {
                    fcnt,
                    bytes,
                    airtime_s,
                    record,
                } => {
                    s.uplinks_attempted += 1;
                    s.airtime_total_s += airtime_s;
                    uplinks.push((now, airtime_s));
                    shadow.seq = record.seq;
                    shadow.battery_mv = record.battery_mv;
                    events.push(Event {
                        t: now,
                        kind: EventKind::UplinkSent {
                            fcnt,
                            bytes: bytes.len(),
                            airtime_s,
                        },
                    });
                    queue.push(
                        now + airtime_s,
                        Pending::GatewayRx {
                            fcnt,
                            bytes,
                            sent: record,
                            expected: shadow.clone(),
                        },
                    );
                }
                Action::Finished => finished = true,
                Action::Log(kind) => {
                    match &kind {
                        EventKind::FrameRejected { .. } => s.frames_rejected += 1,
                        EventKind::FieldsExpired { fields } => shadow.invalidate(*fields),
                        EventKind::BarometerRead {
                            pressure_pa,
                            board_temp_c,
                        } => shadow.set_barometer(*pressure_pa, *board_temp_c),
                        EventKind::EnergyOverrun { excess_uwh } => overrun_uwh += excess_uwh,
                        EventKind::Energy {
                            state,
                            duration_s,
                            power_uw,
                            energy_uwh,
                            ..
                        } => {
                            if !rel_eq(*energy_uwh, power_uw * duration_s / 3600.0) {
                                s.invariants.ledger_consistent = false;
                            }
                            if *state == super::State::DeepSleep {
                                sleep_uwh += energy_uwh;
                            }
                            *s.energy_by_state_uwh
                                .entry(state.name().to_string())
                                .or_insert(0.0) += energy_uwh;
                            s.total_energy_uwh += energy_uwh;
                        }
                        _ => {}
                    }
                    events.push(Event { t: now, kind });
                }
            }
        }
        current_truth = None;
    }

    let machine = transponder.expect("transponder present");
    s.cycles = machine.cycles_completed();
    s.end_time_s = events.last().map_or(0.0, |e| e.t);
    s.invariants.events_ordered = events.windows(2).all(|w| w[0].t <= w[1].t);
    let expected_total = s.cycles as f64 * cfg.profile.e_active_uwh + overrun_uwh + sleep_uwh;
    if !rel_eq(s.total_energy_uwh, expected_total) {
        s.invariants.ledger_consistent = false;
    }
    s.max_hour_airtime_s = max_window_airtime(&uplinks, 3600.0);
    s.invariants.duty_cycle_ok =
        s.max_hour_airtime_s <= cfg.raw.transponder.duty_limit * 3600.0 + 1e-9;
    if s.end_time_s > 0.0 {
        s.duty_cycle_utilization = s.airtime_total_s / s.end_time_s;
    }
    s.invariants_held = s.invariants.all_held();

    Ok(SimTrace {
        events,
        summary: s,
        server_records,
    })
}
