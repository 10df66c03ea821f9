//! `wxkit` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O error, 2 no usable data in the input,
//! 3 validation or usage error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use wxkit::energy::{self, EnergyProfile, LOPY4_DAILY_NOTE};
use wxkit::lorawan::{self, AbpSession, AesKey, DevAddr, RadioParams, UplinkMeta, UplinkReceiver};
use wxkit::rfdecode::{self, BitString, Level, PulseTrain, TimingSpec};
use wxkit::sim::{self, SimConfig, SimError};
use wxkit::{merge_partial, Protocol, WeatherRecord};

/// Gap written between frames in an encoded pulse capture.
const FRAME_GAP_US: u32 = 10_000;

#[derive(Parser)]
#[command(
    name = "wxkit",
    version,
    about = "Weather-station RF frames, LoRaWAN uplinks, energy and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode captured frames into weather records (JSON lines).
    Decode(DecodeArgs),
    /// Encode JSON records into station frames.
    Encode(EncodeArgs),
    /// Compact uplink payload codec.
    #[command(subcommand)]
    Payload(PayloadCommand),
    /// LoRaWAN ABP uplink framing.
    #[command(subcommand)]
    Frame(FrameCommand),
    /// LoRa time on air in milliseconds.
    Airtime(AirtimeArgs),
    /// Battery lifetime estimates.
    Battery(BatteryArgs),
    /// Run the transponder simulation and print its summary.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    A5n1,
    Lcw,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::A5n1 => Protocol::A5n1,
            ProtocolArg::Lcw => Protocol::Lcw,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrameFormat {
    /// `H <µs>` / `L <µs>` lines.
    Pulses,
    /// One frame per line as 0/1 characters.
    Bits,
    /// One frame per line as hex digits.
    Hex,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    #[arg(long, value_enum, default_value = "pulses")]
    format: FrameFormat,
    /// Relative timing tolerance for pulse captures.
    #[arg(long, default_value_t = 0.35)]
    tolerance: f64,
    /// Print one merged record per station instead of one per frame.
    #[arg(long)]
    merge: bool,
    /// Input files; stdin when omitted or `-`.
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_enum, default_value = "pulses")]
    format: FrameFormat,
    /// JSON-lines record files; stdin when omitted or `-`.
    files: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum PayloadCommand {
    /// JSON records to payload hex, one per line.
    Encode {
        #[arg(long, default_value_t = 1)]
        frames_received: u8,
        #[arg(long, default_value_t = 900)]
        cycle_time_s: u16,
        files: Vec<PathBuf>,
    },
    /// Payload hex lines to JSON.
    Decode { files: Vec<PathBuf> },
}

#[derive(Args)]
struct Keys {
    #[arg(long, env = "WXKIT_DEVADDR")]
    devaddr: String,
    #[arg(long, env = "WXKIT_NWKSKEY", hide_env_values = true)]
    nwkskey: String,
    #[arg(long, env = "WXKIT_APPSKEY", hide_env_values = true)]
    appskey: String,
}

impl Keys {
    fn parse(&self) -> Result<(DevAddr, AesKey, AesKey), CliError> {
        let bad = |what: &str, e: lorawan::FrameError| CliError::Invalid(format!("{what}: {e}"));
        Ok((
            DevAddr::from_hex(&self.devaddr).map_err(|e| bad("devaddr", e))?,
            AesKey::from_hex(&self.nwkskey).map_err(|e| bad("nwkskey", e))?,
            AesKey::from_hex(&self.appskey).map_err(|e| bad("appskey", e))?,
        ))
    }
}

#[derive(Subcommand)]
enum FrameCommand {
    /// Payload hex lines to uplink hex, counters counting up from `--fcnt`.
    Build {
        #[command(flatten)]
        keys: Keys,
        #[arg(long, default_value_t = 0)]
        fcnt: u32,
        #[arg(long, default_value_t = 1)]
        fport: u8,
        files: Vec<PathBuf>,
    },
    /// Uplink hex lines to JSON after MIC and counter checks.
    Parse {
        #[command(flatten)]
        keys: Keys,
        /// Most recently accepted counter.
        #[arg(long)]
        last_fcnt: Option<u32>,
        files: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Ldro {
    Auto,
    On,
    Off,
}

#[derive(Args)]
struct AirtimeArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(7..=12))]
    sf: u8,
    #[arg(long, default_value_t = 125_000)]
    bw: u32,
    /// Coding rate denominator, 4/5 through 4/8.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(5..=8))]
    cr: u8,
    /// PHY payload length in bytes.
    #[arg(long)]
    payload: usize,
    #[arg(long, default_value_t = 8)]
    preamble: u16,
    #[arg(long)]
    no_crc: bool,
    #[arg(long)]
    implicit_header: bool,
    #[arg(long, value_enum, default_value = "auto")]
    ldro: Ldro,
}

#[derive(Clone, Copy, ValueEnum)]
enum Platform {
    Bsf32,
    Lopy4,
}

impl Platform {
    fn profile(self) -> &'static EnergyProfile {
        match self {
            Platform::Bsf32 => &energy::BSF32,
            Platform::Lopy4 => &energy::LOPY4,
        }
    }
}

#[derive(Args)]
struct BatteryArgs {
    #[arg(long, value_enum, required_unless_present = "table")]
    platform: Option<Platform>,
    #[arg(long, required_unless_present = "table")]
    interval_s: Option<f64>,
    /// Model values next to the published table.
    #[arg(long, conflicts_with_all = ["platform", "interval_s"])]
    table: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON configuration; defaults apply to anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration_s: Option<f64>,
    /// Write the event trace here as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Io(String),
    NoData,
    Invalid(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::NoData => 2,
            CliError::Invalid(_) => 3,
        }
    }
}

/// Tally for commands that process many inputs and keep going past bad ones.
#[derive(Default)]
struct Outcome {
    produced: usize,
    invalid: usize,
    io_failed: bool,
}

impl Outcome {
    fn finish(self) -> Result<(), CliError> {
        if self.io_failed {
            Err(CliError::Io("one or more inputs could not be read".into()))
        } else if self.produced > 0 {
            Ok(())
        } else if self.invalid > 0 {
            Err(CliError::Invalid("no input was valid".into()))
        } else {
            Err(CliError::NoData)
        }
    }
}

struct Source {
    name: String,
    text: String,
}

fn read_sources(files: &[PathBuf], outcome: &mut Outcome) -> Vec<Source> {
    if files.is_empty() {
        return read_sources(&[PathBuf::from("-")], outcome);
    }
    let mut out = Vec::new();
    for path in files {
        let (name, read) = if path.as_os_str() == "-" {
            let mut text = String::new();
            (
                "<stdin>".to_string(),
                io::stdin().read_to_string(&mut text).map(|_| text),
            )
        } else {
            (path.display().to_string(), fs::read_to_string(path))
        };
        match read {
            Ok(text) => out.push(Source { name, text }),
            Err(e) => {
                eprintln!("{name}: {e}");
                outcome.io_failed = true;
            }
        }
    }
    out
}

/// Non-blank lines with `#` comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_bits(line: &str) -> Result<BitString, String> {
    line.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("unexpected character '{other}' in bit string")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(BitString::from_bools)
}

fn emit(out: &mut impl Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("output types serialize")
}

fn cmd_decode(args: DecodeArgs) -> Result<(), CliError> {
    let protocol = Protocol::from(args.protocol);
    let timing = TimingSpec {
        tolerance: args.tolerance,
        ..TimingSpec::default()
    };
    timing
        .validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut outcome = Outcome::default();
    let mut out = io::stdout().lock();
    let mut merged: BTreeMap<String, WeatherRecord> = BTreeMap::new();

    for src in read_sources(&args.files, &mut outcome) {
        // (location, frame result) pairs for this source
        let mut results = Vec::new();
        match args.format {
            FrameFormat::Pulses => match PulseTrain::parse(&src.text) {
                Ok(train) => {
                    for (i, r) in rfdecode::decode_capture(&train, &timing, protocol)
                        .into_iter()
                        .enumerate()
                    {
                        results.push((format!("frame {}", i + 1), r.map_err(|e| e.to_string())));
                    }
                }
                Err(e) => {
                    eprintln!("{}: malformed capture, {e}", src.name);
                    outcome.invalid += 1;
                    continue;
                }
            },
            FrameFormat::Bits | FrameFormat::Hex => {
                for (line_no, line) in content_lines(&src.text) {
                    let bits = if args.format == FrameFormat::Bits {
                        parse_bits(line)
                    } else {
                        BitString::from_hex(line).map_err(|e| e.to_string())
                    };
                    let r = bits.and_then(|b| {
                        rfdecode::decode_bits(protocol, &b).map_err(|e| e.to_string())
                    });
                    results.push((format!("line {line_no}"), r));
                }
            }
        }
        if results.is_empty() {
            eprintln!("{}: no frames found", src.name);
        }
        for (loc, r) in results {
            match r {
                Ok((_, record)) => {
                    outcome.produced += 1;
                    if args.merge {
                        let key = record.station.to_string();
                        let next = match merged.get(&key) {
                            Some(prev) => merge_partial(prev, &record).expect("same station key"),
                            None => record,
                        };
                        merged.insert(key, next);
                    } else {
                        emit(&mut out, &to_json(&record))?;
                    }
                }
                // A frame that fails its checks is reported but is not malformed input.
                Err(reason) => eprintln!("{}: {loc}: {reason}", src.name),
            }
        }
    }
    for record in merged.values() {
        emit(&mut out, &to_json(record))?;
    }
    outcome.finish()
}

fn read_records(files: &[PathBuf], outcome: &mut Outcome) -> Vec<(String, WeatherRecord)> {
    let mut records = Vec::new();
    for src in read_sources(files, outcome) {
        for (line_no, line) in content_lines(&src.text) {
            match serde_json::from_str::<WeatherRecord>(line) {
                Ok(r) => records.push((format!("{}: line {line_no}", src.name), r)),
                Err(e) => {
                    eprintln!("{}: line {line_no}: {e}", src.name);
                    outcome.invalid += 1;
                }
            }
        }
    }
    records
}

fn cmd_encode(args: EncodeArgs) -> Result<(), CliError> {
    let timing = TimingSpec::default();
    let mut outcome = Outcome::default();
    let mut out = io::stdout().lock();
    for (loc, record) in read_records(&args.files, &mut outcome) {
        let frames = match rfdecode::frames_for_record(&record) {
            Ok(f) if f.is_empty() => {
                eprintln!("{loc}: record has no field a station frame carries");
                outcome.invalid += 1;
                continue;
            }
            Ok(f) => f,
            Err(e) => {
                eprintln!("{loc}: {e}");
                outcome.invalid += 1;
                continue;
            }
        };
        for frame in &frames {
            let text = match args.format {
                FrameFormat::Pulses => {
                    let mut train = rfdecode::frame_to_pulses(frame, &timing);
                    train.push(Level::Low, FRAME_GAP_US);
                    train.to_string()
                }
                FrameFormat::Bits => {
                    let bits: String = frame
                        .to_bits()
                        .iter()
                        .map(|b| if b { '1' } else { '0' })
                        .collect();
                    bits + "\n"
                }
                FrameFormat::Hex => frame.to_bits().to_hex() + "\n",
            };
            write!(out, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))?;
            outcome.produced += 1;
        }
    }
    outcome.finish()
}

/// Hex lines from the inputs, each decoded to bytes.
fn hex_lines(files: &[PathBuf], outcome: &mut Outcome) -> Vec<(String, Vec<u8>)> {
    let mut lines = Vec::new();
    for src in read_sources(files, outcome) {
        for (line_no, line) in content_lines(&src.text) {
            let loc = format!("{}: line {line_no}", src.name);
            match hex::decode(line) {
                Ok(bytes) => lines.push((loc, bytes)),
                Err(e) => {
                    eprintln!("{loc}: {e}");
                    outcome.invalid += 1;
                }
            }
        }
    }
    lines
}

fn cmd_payload(cmd: PayloadCommand) -> Result<(), CliError> {
    let mut outcome = Outcome::default();
    let mut out = io::stdout().lock();
    match cmd {
        PayloadCommand::Encode {
            frames_received,
            cycle_time_s,
            files,
        } => {
            let meta = UplinkMeta {
                frames_received,
                cycle_time_s,
            };
            for (loc, record) in read_records(&files, &mut outcome) {
                match lorawan::payload_encode(&record, meta) {
                    Ok(bytes) => {
                        emit(&mut out, &hex::encode(bytes))?;
                        outcome.produced += 1;
                    }
                    Err(e) => {
                        eprintln!("{loc}: {e}");
                        outcome.invalid += 1;
                    }
                }
            }
        }
        PayloadCommand::Decode { files } => {
            for (loc, bytes) in hex_lines(&files, &mut outcome) {
                match lorawan::payload_decode(&bytes) {
                    Ok((record, meta)) => {
                        let v = json!({
                            "record": record,
                            "frames_received": meta.frames_received,
                            "cycle_time_s": meta.cycle_time_s,
                        });
                        emit(&mut out, &v.to_string())?;
                        outcome.produced += 1;
                    }
                    Err(e) => {
                        eprintln!("{loc}: {e}");
                        outcome.invalid += 1;
                    }
                }
            }
        }
    }
    outcome.finish()
}

fn cmd_frame(cmd: FrameCommand) -> Result<(), CliError> {
    let mut outcome = Outcome::default();
    let mut out = io::stdout().lock();
    match cmd {
        FrameCommand::Build {
            keys,
            fcnt,
            fport,
            files,
        } => {
            let (addr, nwk, app) = keys.parse()?;
            let mut session = AbpSession::new(addr, nwk, app, fport)
                .map_err(|e| CliError::Invalid(e.to_string()))?
                .with_fcnt(fcnt);
            for (loc, payload) in hex_lines(&files, &mut outcome) {
                match lorawan::frame_build(&mut session, &payload) {
                    Ok(bytes) => {
                        emit(&mut out, &hex::encode(bytes))?;
                        outcome.produced += 1;
                    }
                    Err(e) => {
                        eprintln!("{loc}: {e}");
                        outcome.invalid += 1;
                    }
                }
            }
        }
        FrameCommand::Parse {
            keys,
            last_fcnt,
            files,
        } => {
            let (addr, nwk, app) = keys.parse()?;
            let mut receiver = UplinkReceiver::new(addr, nwk, app);
            if let Some(last) = last_fcnt {
                receiver = receiver.with_last_fcnt(last);
            }
            for (loc, bytes) in hex_lines(&files, &mut outcome) {
                match lorawan::frame_parse(&bytes, &mut receiver) {
                    Ok(up) => {
                        let v = json!({
                            "fcnt": up.fcnt,
                            "fport": up.fport,
                            "payload": hex::encode(&up.payload),
                        });
                        emit(&mut out, &v.to_string())?;
                        outcome.produced += 1;
                    }
                    Err(e) => {
                        eprintln!("{loc}: {e}");
                        outcome.invalid += 1;
                    }
                }
            }
        }
    }
    outcome.finish()
}

fn cmd_airtime(args: AirtimeArgs) -> Result<(), CliError> {
    let params = RadioParams {
        sf: args.sf,
        bandwidth_hz: args.bw,
        coding_rate: args.cr - 4,
        preamble_symbols: args.preamble,
        explicit_header: !args.implicit_header,
        crc_on: !args.no_crc,
        low_dr_optimize: match args.ldro {
            Ldro::Auto => None,
            Ldro::On => Some(true),
            Ldro::Off => Some(false),
        },
        ..RadioParams::default()
    };
    let t =
        lorawan::airtime(&params, args.payload).map_err(|e| CliError::Invalid(e.to_string()))?;
    emit(&mut io::stdout().lock(), &format!("{:.3}", t * 1000.0))
}

fn cmd_battery(args: BatteryArgs) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    if args.table {
        for row in energy::battery_table() {
            if args.json {
                let mut v = serde_json::to_value(&row).expect("row serializes");
                v["relative_gap"] = json!(row.relative_gap());
                emit(&mut out, &v.to_string())?;
            } else {
                emit(
                    &mut out,
                    &format!(
                        "{:<6} {:>3} min  model {:>7.1} d  published {:>6.0} d  {:>+6.1}%{}",
                        row.platform,
                        row.interval_min,
                        row.model_days,
                        row.published_days,
                        row.relative_gap() * 100.0,
                        row.note.map(|n| format!("  ({n})")).unwrap_or_default(),
                    ),
                )?;
            }
        }
        return Ok(());
    }
    let platform = args
        .platform
        .expect("clap requires --platform without --table");
    let interval = args
        .interval_s
        .expect("clap requires --interval-s without --table");
    let profile = platform.profile();
    let invalid = |e: energy::EnergyError| CliError::Invalid(e.to_string());
    let days = energy::battery_life_days(profile, interval).map_err(invalid)?;
    let note = matches!(platform, Platform::Lopy4).then_some(LOPY4_DAILY_NOTE);
    if args.json {
        let v = json!({
            "platform": profile.name,
            "interval_s": interval,
            "cycle_energy_uwh": energy::cycle_energy(profile, interval).map_err(invalid)?,
            "daily_energy_uwh": energy::daily_energy(profile, interval).map_err(invalid)?,
            "battery_uwh": profile.battery_uwh,
            "days": days,
            "note": note,
        });
        emit(&mut out, &v.to_string())
    } else {
        if let Some(n) = note {
            eprintln!("note: {n}");
        }
        emit(&mut out, &format!("{days:.1}"))
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            SimConfig::from_json(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(d) = args.duration_s {
        config.duration_s = d;
    }
    let trace = match sim::run(&config) {
        Ok(t) => t,
        Err(SimError::Config(errors)) => {
            for e in &errors {
                eprintln!("config: {e}");
            }
            return Err(CliError::Invalid(format!(
                "{} configuration error(s)",
                errors.len()
            )));
        }
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    if let Some(path) = &args.out {
        fs::write(path, trace.to_jsonl())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    emit(&mut io::stdout().lock(), &to_json(&trace.summary))?;
    if trace.summary.invariants_held {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "run invariants violated: {}",
            to_json(&trace.summary.invariants)
        )))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(3),
            };
        }
    };
    let result = match cli.command {
        Command::Decode(a) => cmd_decode(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Payload(c) => cmd_payload(c),
        Command::Frame(c) => cmd_frame(c),
        Command::Airtime(a) => cmd_airtime(a),
        Command::Battery(a) => cmd_battery(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Io(m) | CliError::Invalid(m) => eprintln!("wxkit: {m}"),
                CliError::NoData => eprintln!("wxkit: no frames decoded"),
            }
            ExitCode::from(e.code())
        }
    }
}
