//! Tag table, roll feed and the line protocol.
//!
//! Requests and responses are single ASCII lines:
//!
//! ```text
//! READ <addr>            -> OK <value> <GOOD|BAD> <unix_ms>
//! WRITE <addr> <uint16>  -> OK
//! ADVANCE                -> OK <roll_counter>
//! anything else          -> ERR <UNKNOWN_TAG|BAD_SYNTAX|RANGE> <message>
//! ```
//!
//! [`handle_command`] is a pure function of the state, the line and the
//! clock reading, so a transcript replayed against a cloned state gives the
//! same responses.

use std::collections::BTreeMap;
use std::fmt;

use grammage_core::rng::{self, Purpose};
use grammage_core::synthgen::{GrossFault, RollStream};
use grammage_core::{GeneratorConfig, Measurement};
use rand::Rng as _;

use crate::tags::{Quality, TagAddress, TagEntry};
use crate::SimError;

/// Longest request line accepted, excluding the terminator.
pub const MAX_LINE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    UnknownTag,
    BadSyntax,
    Range,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnknownTag => "UNKNOWN_TAG",
            ErrorCode::BadSyntax => "BAD_SYNTAX",
            ErrorCode::Range => "RANGE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "UNKNOWN_TAG" => Some(ErrorCode::UnknownTag),
            "BAD_SYNTAX" => Some(ErrorCode::BadSyntax),
            "RANGE" => Some(ErrorCode::Range),
            _ => None,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What happened on one [`advance_roll`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollEvent {
    pub counter: u64,
    /// Sensor values before rounding and before any fault.
    pub measured: Measurement,
    pub fault: Option<GrossFault>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    tags: BTreeMap<TagAddress, TagEntry>,
    roll_counter: u64,
    stream: RollStreamHandle,
    fault_rate: f64,
}

/// `RollStream` has no `PartialEq`; rolls are a function of the config.
#[derive(Debug, Clone)]
struct RollStreamHandle(RollStream);

impl PartialEq for RollStreamHandle {
    fn eq(&self, other: &Self) -> bool {
        self.0.config() == other.0.config()
    }
}

impl SimState {
    pub fn new(generator: GeneratorConfig, fault_rate: f64, now: u64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&fault_rate) {
            return Err(SimError::Config(format!("fault rate must be in [0, 1], got {fault_rate}")));
        }
        let stream = RollStream::new(generator).map_err(|e| SimError::Config(e.to_string()))?;
        let tags = TagAddress::ALL
            .iter()
            .map(|&a| {
                (
                    a,
                    TagEntry {
                        value: 0,
                        quality: Quality::Good,
                        timestamp: now,
                    },
                )
            })
            .collect();
        Ok(SimState {
            tags,
            roll_counter: 0,
            stream: RollStreamHandle(stream),
            fault_rate,
        })
    }

    pub fn roll_counter(&self) -> u64 {
        self.roll_counter
    }

    pub fn fault_rate(&self) -> f64 {
        self.fault_rate
    }

    pub fn generator(&self) -> &GeneratorConfig {
        self.stream.0.config()
    }

    pub fn tag(&self, addr: TagAddress) -> Option<&TagEntry> {
        self.tags.get(&addr)
    }

    pub fn tags(&self) -> impl Iterator<Item = (&TagAddress, &TagEntry)> {
        self.tags.iter()
    }

    /// Sets a tag, keeping its timestamp monotone.
    fn set(&mut self, addr: TagAddress, value: u16, quality: Quality, now: u64) {
        let entry = self.tags.get_mut(&addr).expect("fixed tag table");
        *entry = TagEntry {
            value,
            quality,
            timestamp: now.max(entry.timestamp),
        };
    }

    /// Puts a given roll on the measurement tags as if a new roll had
    /// arrived: all three GOOD, manual grammage cleared, counter bumped.
    pub fn load_roll(&mut self, m: &Measurement, now: u64) -> u64 {
        self.roll_counter += 1;
        for (addr, v) in TagAddress::MEASUREMENTS.iter().zip(m.features()) {
            self.set(*addr, to_word(v), Quality::Good, now);
        }
        self.set(TagAddress::MANUAL, 0, Quality::Good, now);
        self.set(TagAddress::COUNTER, (self.roll_counter % 65536) as u16, Quality::Good, now);
        self.roll_counter
    }
}

/// Rounds a sensor reading to a 16-bit word.
fn to_word(v: f64) -> u16 {
    v.round().clamp(0.0, f64::from(u16::MAX)) as u16
}

/// Feeds the next roll of the stream onto the tags. With probability
/// `fault_rate` one measurement channel carries a gross fault and is flagged
/// BAD in the same update.
pub fn advance_roll(state: &mut SimState, now: u64) -> RollEvent {
    let index = state.roll_counter;
    let roll = state.stream.0.roll::<f64>(index);
    let cfg_seed = state.generator().seed;
    let mut r = rng::stream(cfg_seed, Purpose::PlcFault, index);
    let fault = (state.fault_rate > 0.0 && r.random_bool(state.fault_rate)).then(|| GrossFault::draw(&mut r));
    let shown = fault.map_or(roll.measured, |f| f.apply(&roll.measured));

    let counter = state.load_roll(&shown, now);
    if let Some(f) = fault {
        let addr = TagAddress::MEASUREMENTS[f.channel];
        let value = state.tags[&addr].value;
        state.set(addr, value, Quality::Bad, now);
    }
    RollEvent {
        counter,
        measured: roll.measured,
        fault,
    }
}

fn err(code: ErrorCode, message: impl fmt::Display) -> String {
    format!("ERR {code} {message}")
}

fn lookup(state: &SimState, token: &str) -> Result<TagAddress, String> {
    let addr: TagAddress = token
        .parse()
        .map_err(|_| err(ErrorCode::BadSyntax, format!("malformed address {token}")))?;
    if state.tags.contains_key(&addr) {
        Ok(addr)
    } else {
        Err(err(ErrorCode::UnknownTag, addr))
    }
}

/// Executes one request line (without its terminator) and returns the
/// response line (without its terminator).
pub fn handle_command(state: &mut SimState, line: &str, now: u64) -> String {
    if line.len() > MAX_LINE {
        return err(ErrorCode::BadSyntax, format!("line longer than {MAX_LINE} bytes"));
    }
    let words: Vec<&str> = line.split_ascii_whitespace().collect();
    let outcome = match words.as_slice() {
        ["READ", addr] => lookup(state, addr).map(|a| {
            let t = state.tags[&a];
            format!("OK {} {} {}", t.value, t.quality, t.timestamp)
        }),
        ["WRITE", addr, value] => lookup(state, addr).and_then(|a| {
            if !value.bytes().all(|b| b.is_ascii_digit() || b == b'-') || value.is_empty() {
                return Err(err(ErrorCode::BadSyntax, format!("not an integer: {value}")));
            }
            let v: i64 = value
                .parse()
                .map_err(|_| err(ErrorCode::Range, format!("{value} outside 0..=65535")))?;
            let v = u16::try_from(v).map_err(|_| err(ErrorCode::Range, format!("{value} outside 0..=65535")))?;
            if a == TagAddress::COUNTER {
                return Err(err(ErrorCode::Range, format!("{a} is read-only")));
            }
            state.set(a, v, Quality::Good, now);
            Ok("OK".to_string())
        }),
        ["ADVANCE"] => Ok(format!("OK {}", advance_roll(state, now).counter % 65536)),
        [] => Err(err(ErrorCode::BadSyntax, "empty request")),
        [cmd, ..] if matches!(*cmd, "READ" | "WRITE" | "ADVANCE") => {
            Err(err(ErrorCode::BadSyntax, format!("wrong argument count for {cmd}")))
        }
        [cmd, ..] => Err(err(ErrorCode::BadSyntax, format!("unknown command {cmd}"))),
    };
    outcome.unwrap_or_else(|e| e)
}
