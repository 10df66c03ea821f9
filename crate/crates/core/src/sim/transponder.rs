//! Transponder state machine.
//!
//! One cycle: Init, Rx1 (receiver on until a frame decodes or the timeout),
//! InterSleep with the receiver off, Rx2 until every sensor field has been
//! refreshed or the timeout, ReadBaro, BuildTx (waits for the duty-cycle
//! governor), Transmit for the frame's airtime, DeepSleep until the next
//! cycle. The machine is driven by [`Transponder::step`] and never touches
//! the event queue itself; it returns [`Action`]s for the runner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{fit_component_power, ActiveTiming, EnergyError, EnergyProfile};
use crate::lorawan::{
    airtime, payload_encode, AbpSession, DutyCycleGovernor, RadioParams, UplinkMeta,
};
use crate::record::{merge_partial, Field, Protocol, StationId, ValidityFlags, WeatherRecord};
use crate::rfdecode::{decode_capture, PulseTrain, RainGauge, RainSession, TimingSpec};

use super::config::{BarometerSpec, ValidConfig};
use super::trace::EventKind;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Reset,
    Init,
    Rx1,
    InterSleep,
    Rx2,
    ReadBaro,
    BuildTx,
    Transmit,
    DeepSleep,
}

impl State {
    pub fn name(self) -> &'static str {
        match self {
            State::Reset => "reset",
            State::Init => "init",
            State::Rx1 => "rx1",
            State::InterSleep => "inter_sleep",
            State::Rx2 => "rx2",
            State::ReadBaro => "read_baro",
            State::BuildTx => "build_tx",
            State::Transmit => "transmit",
            State::DeepSleep => "deep_sleep",
        }
    }

    pub fn receiver_on(self) -> bool {
        matches!(self, State::Rx1 | State::Rx2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    /// Power-on; only valid in `Reset`.
    Start,
    /// A timer previously requested with [`Action::Schedule`] fired.
    Timer(u64),
    /// A demodulated capture reached the antenna.
    Capture(PulseTrain),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Schedule {
        at: f64,
        token: u64,
    },
    Cancel {
        token: u64,
    },
    Log(EventKind),
    /// A frame decoded and was folded into the in-memory record.
    Accepted {
        partial: WeatherRecord,
    },
    /// Transmission starts now.
    Uplink {
        fcnt: u32,
        bytes: Vec<u8>,
        airtime_s: f64,
        record: WeatherRecord,
    },
    /// The last cycle ended; no further timers will be requested.
    Finished,
}

#[derive(Debug, Clone)]
struct Params {
    station: StationId,
    profile: EnergyProfile,
    radio: RadioParams,
    timing: TimingSpec,
    t_cycle_s: f64,
    rx_timeout_s: f64,
    inter_sleep_s: f64,
    baro_read_s: f64,
    build_s: f64,
    barometer: BarometerSpec,
    /// No cycle starts at or after this time.
    horizon_s: f64,
}

#[derive(Debug, Clone)]
struct PendingTx {
    fcnt: u32,
    bytes: Vec<u8>,
    airtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct Transponder {
    params: Params,
    state: State,
    since: f64,
    record: WeatherRecord,
    session: AbpSession,
    governor: DutyCycleGovernor,
    rain: RainSession,
    rng: ChaCha8Rng,
    timer: Option<u64>,
    next_token: u64,
    cycle: u64,
    cycle_start: f64,
    refreshed: u8,
    frames_this_cycle: u8,
    intervals: Vec<(State, f64, f64)>,
    pending: Option<PendingTx>,
    finished: bool,
}

impl Transponder {
    pub fn new(cfg: &ValidConfig) -> Result<Self, SimError> {
        let t = &cfg.raw.transponder;
        let session = AbpSession::new(cfg.dev_addr, cfg.nwk_skey, cfg.app_skey, t.fport)?;
        let gauge = match cfg.station.protocol() {
            Protocol::A5n1 => RainGauge::A5N1,
            Protocol::Lcw => RainGauge::LCW,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.raw.seed);
        rng.set_stream(super::STREAM_BAROMETER);
        Ok(Transponder {
            params: Params {
                station: cfg.station,
                profile: cfg.profile.clone(),
                radio: cfg.radio,
                timing: TimingSpec::default(),
                t_cycle_s: t.t_cycle_s,
                rx_timeout_s: t.rx_timeout_s,
                inter_sleep_s: t.inter_sleep_s,
                baro_read_s: t.baro_read_s,
                build_s: t.build_s,
                barometer: cfg.raw.barometer,
                horizon_s: cfg.raw.duration_s,
            },
            state: State::Reset,
            since: 0.0,
            record: WeatherRecord::empty(cfg.station),
            session,
            governor: DutyCycleGovernor::new(t.duty_limit),
            rain: RainSession::new(gauge),
            rng,
            timer: None,
            next_token: 0,
            cycle: 0,
            cycle_start: 0.0,
            refreshed: 0,
            frames_this_cycle: 0,
            intervals: Vec::new(),
            pending: None,
            finished: false,
        })
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn record(&self) -> &WeatherRecord {
        &self.record
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn cycles_completed(&self) -> u64 {
        self.cycle
    }

    /// Advances the machine by one input.
    pub fn step(mut self, now: f64, input: Input) -> Result<(Self, Vec<Action>), SimError> {
        let mut out = Vec::new();
        match input {
            Input::Start => {
                if self.state != State::Reset || self.finished {
                    return Err(SimError::ProtocolViolation(format!(
                        "start while in {}",
                        self.state.name()
                    )));
                }
                self.since = now;
                self.enter(now, State::Init, &mut out)?;
            }
            Input::Timer(token) => {
                if self.timer != Some(token) {
                    return Err(SimError::ProtocolViolation(format!(
                        "timer {token} fired in {} (expected {:?})",
                        self.state.name(),
                        self.timer
                    )));
                }
                self.timer = None;
                self.on_timer(now, &mut out)?;
            }
            Input::Capture(train) => self.on_capture(now, &train, &mut out)?,
        }
        Ok((self, out))
    }

    fn schedule(&mut self, at: f64, out: &mut Vec<Action>) {
        let token = self.next_token;
        self.next_token += 1;
        self.timer = Some(token);
        out.push(Action::Schedule { at, token });
    }

    fn enter(&mut self, now: f64, to: State, out: &mut Vec<Action>) -> Result<(), SimError> {
        if let Some(token) = self.timer.take() {
            out.push(Action::Cancel { token });
        }
        let from = self.state;
        self.leave(now, from, out)?;
        out.push(Action::Log(EventKind::State { from, to }));
        self.state = to;
        self.since = now;
        let p = self.params.clone();
        match to {
            State::Reset => {}
            State::Init => {
                self.cycle_start = now;
                self.refreshed = 0;
                self.frames_this_cycle = 0;
                self.intervals.clear();
                return self.enter(now, State::Rx1, out);
            }
            State::Rx1 | State::Rx2 => {
                let at = now + p.rx_timeout_s;
                self.schedule(at, out);
            }
            State::InterSleep => {
                let at = now + p.inter_sleep_s;
                self.schedule(at, out);
            }
            State::ReadBaro => {
                let at = now + p.baro_read_s;
                self.schedule(at, out);
            }
            State::BuildTx => {
                self.build_uplink()?;
                let at = now + p.build_s;
                self.schedule(at, out);
            }
            State::Transmit => {
                let tx = self.pending.clone().ok_or_else(|| {
                    SimError::ProtocolViolation("transmit without a frame".into())
                })?;
                self.governor.record(now, tx.airtime_s);
                out.push(Action::Uplink {
                    fcnt: tx.fcnt,
                    bytes: tx.bytes,
                    airtime_s: tx.airtime_s,
                    record: self.record.clone(),
                });
                self.schedule(now + tx.airtime_s, out);
            }
            State::DeepSleep => {
                self.account_active_phase(now, out)?;
                let active = now - self.cycle_start;
                let at = now + (self.params.t_cycle_s - active).max(0.0);
                self.schedule(at, out);
            }
        }
        Ok(())
    }

    fn leave(&mut self, now: f64, from: State, out: &mut Vec<Action>) -> Result<(), SimError> {
        match from {
            State::DeepSleep => {
                let dur = now - self.since;
                let power = self.params.profile.sleep_power_uw();
                out.push(energy_entry(State::DeepSleep, self.since, dur, power));
            }
            s => self.intervals.push((s, self.since, now - self.since)),
        }
        Ok(())
    }

    fn on_timer(&mut self, now: f64, out: &mut Vec<Action>) -> Result<(), SimError> {
        match self.state {
            State::Rx1 => self.enter(now, State::InterSleep, out),
            State::InterSleep => self.enter(now, State::Rx2, out),
            State::Rx2 => {
                let expired =
                    ValidityFlags::SENSOR_FIELDS & !self.refreshed & self.record.flags.to_byte();
                if expired != 0 {
                    self.record.invalidate(expired);
                    out.push(Action::Log(EventKind::FieldsExpired { fields: expired }));
                }
                self.enter(now, State::ReadBaro, out)
            }
            State::ReadBaro => {
                self.read_barometer(out);
                self.enter(now, State::BuildTx, out)
            }
            State::BuildTx => {
                let air = self.pending.as_ref().map_or(0.0, |p| p.airtime_s);
                let d = self.governor.check(now, air);
                if d.allowed {
                    self.enter(now, State::Transmit, out)
                } else if d.next_allowed_s.is_finite() {
                    out.push(Action::Log(EventKind::GovernorWait {
                        until_s: d.next_allowed_s,
                    }));
                    self.schedule(d.next_allowed_s, out);
                    Ok(())
                } else {
                    Err(SimError::ProtocolViolation(format!(
                        "a {air} s frame can never fit the duty-cycle budget"
                    )))
                }
            }
            State::Transmit => self.enter(now, State::DeepSleep, out),
            State::DeepSleep => {
                let next_start = now;
                self.cycle += 1;
                if next_start >= self.params.horizon_s {
                    self.leave(now, State::DeepSleep, out)?;
                    self.since = now;
                    self.finished = true;
                    out.push(Action::Finished);
                    Ok(())
                } else {
                    self.enter(now, State::Init, out)
                }
            }
            s => Err(SimError::ProtocolViolation(format!(
                "timer fired in {} which has no timer",
                s.name()
            ))),
        }
    }

    fn on_capture(
        &mut self,
        now: f64,
        train: &PulseTrain,
        out: &mut Vec<Action>,
    ) -> Result<(), SimError> {
        if !self.state.receiver_on() || self.finished {
            out.push(Action::Log(EventKind::FrameMissed { state: self.state }));
            return Ok(());
        }
        let protocol = self.params.station.protocol();
        let mut reason = String::from("no frame found");
        let mut accepted = None;
        for result in decode_capture(train, &self.params.timing, protocol) {
            match result {
                Ok((_, rec)) if rec.station == self.params.station => {
                    accepted = Some(rec);
                    break;
                }
                Ok((_, rec)) => reason = format!("foreign station {}", rec.station),
                Err(e) => reason = e.to_string(),
            }
        }
        let Some(mut partial) = accepted else {
            out.push(Action::Log(EventKind::FrameRejected { reason }));
            return Ok(());
        };
        if partial.is_valid(Field::Rain) {
            let counts = (partial.rain_mm / self.rain_mm_per_count()).round() as u32;
            partial.rain_mm = self.rain.update(counts);
        }
        self.record = merge_partial(&self.record, &partial)?;
        let fields = partial.flags.measurements();
        self.refreshed |= fields;
        self.frames_this_cycle = self.frames_this_cycle.saturating_add(1);
        out.push(Action::Log(EventKind::FrameAccepted { fields }));
        out.push(Action::Accepted { partial });
        match self.state {
            State::Rx1 => self.enter(now, State::InterSleep, out),
            State::Rx2
                if self.refreshed & ValidityFlags::SENSOR_FIELDS
                    == ValidityFlags::SENSOR_FIELDS =>
            {
                self.enter(now, State::ReadBaro, out)
            }
            _ => Ok(()),
        }
    }

    fn rain_mm_per_count(&self) -> f64 {
        match self.params.station.protocol() {
            Protocol::A5n1 => RainGauge::A5N1.mm_per_count,
            Protocol::Lcw => RainGauge::LCW.mm_per_count,
        }
    }

    fn read_barometer(&mut self, out: &mut Vec<Action>) {
        let b = self.params.barometer;
        let p = b.pressure_pa as f64 + self.rng.gen_range(-1.0..=1.0) * b.pressure_noise_pa;
        let pressure = p.round().max(0.0) as u32;
        let t = b.temp_c + self.rng.gen_range(-1.0..=1.0) * b.temp_noise_c;
        let board_temp = (t * 10.0).round() / 10.0;
        self.record.set_barometer(pressure, board_temp);
        self.record.battery_mv = (self.params.profile.supply_v * 1000.0).round() as u16;
        out.push(Action::Log(EventKind::BarometerRead {
            pressure_pa: pressure,
            board_temp_c: board_temp,
        }));
    }

    fn build_uplink(&mut self) -> Result<(), SimError> {
        self.record.seq = self.cycle as u16;
        self.record.zero_invalid();
        let meta = UplinkMeta {
            frames_received: self.frames_this_cycle,
            cycle_time_s: self.params.t_cycle_s.round().min(u16::MAX as f64) as u16,
        };
        let payload = payload_encode(&self.record, meta)?;
        let fcnt = self
            .session
            .fcnt_up()
            .ok_or(crate::lorawan::FrameError::CounterExhausted)?;
        let bytes = self.session.frame_build(&payload)?;
        let airtime_s = airtime(&self.params.radio, bytes.len())?;
        self.pending = Some(PendingTx {
            fcnt,
            bytes,
            airtime_s,
        });
        Ok(())
    }

    /// Splits the profile's active energy over this cycle's states.
    fn account_active_phase(&mut self, now: f64, out: &mut Vec<Action>) -> Result<(), SimError> {
        let t_active = now - self.cycle_start;
        let sum = |pred: fn(State) -> bool| -> f64 {
            self.intervals
                .iter()
                .filter(|(s, _, _)| pred(*s))
                .map(|(_, _, d)| d)
                .sum()
        };
        let t_shr = sum(State::receiver_on);
        let t_tx = sum(|s| s == State::Transmit);
        let timing = ActiveTiming {
            t_active_s: t_active,
            t_shr_s: t_shr,
            t_tx_s: t_tx,
        };
        let profile = &self.params.profile;
        let comps = profile.components.ok_or(EnergyError::NoComponents)?;
        let (mcu, shr, tx) = match fit_component_power(profile, &timing) {
            Ok(f) => (f.mcu_power_uw, f.shr_power_uw, f.tx_power_uw),
            Err(EnergyError::NegativeResidual { residual_uwh }) => {
                out.push(Action::Log(EventKind::EnergyOverrun {
                    excess_uwh: -residual_uwh,
                }));
                let v = profile.supply_v;
                (0.0, comps.i_shr_ma * 1000.0 * v, comps.i_tx_ma * 1000.0 * v)
            }
            Err(e) => return Err(e.into()),
        };
        for &(state, start, dur) in &self.intervals {
            if dur <= 0.0 {
                continue;
            }
            let power = match state {
                State::Rx1 | State::Rx2 => shr + mcu,
                State::Transmit => tx + mcu,
                _ => mcu,
            };
            out.push(energy_entry(state, start, dur, power));
        }
        Ok(())
    }
}

fn energy_entry(state: State, start_s: f64, duration_s: f64, power_uw: f64) -> Action {
    Action::Log(EventKind::Energy {
        state,
        start_s,
        duration_s,
        power_uw,
        energy_uwh: power_uw * duration_s / 3600.0,
    })
}
