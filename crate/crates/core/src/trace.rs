//! Memory access traces: the record model, the text file format, and
//! deterministic synthetic generators.
//!
//! A trace file holds one record per line:
//!
//! ```text
//! # core  timestamp  kind  address
//! 0 100 LD 0x7f00
//! 1 104 ST 0x1040
//! ```
//!
//! `kind` is one of `IF` (instruction fetch), `LD` or `ST`. Timestamps are core
//! clock cycles and must be non-decreasing per core.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: timestamp {timestamp} on core {core} precedes earlier timestamp {previous}")]
    TimestampRegression {
        line: usize,
        core: u32,
        timestamp: u64,
        previous: u64,
    },
    #[error("invalid synthetic trace spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessKind {
    InstrFetch,
    Load,
    Store,
}

impl AccessKind {
    pub fn mnemonic(self) -> &'static str {
        match self {
            AccessKind::InstrFetch => "IF",
            AccessKind::Load => "LD",
            AccessKind::Store => "ST",
        }
    }

    pub fn is_write(self) -> bool {
        matches!(self, AccessKind::Store)
    }

    pub fn is_data(self) -> bool {
        !matches!(self, AccessKind::InstrFetch)
    }
}

impl std::str::FromStr for AccessKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IF" => Ok(AccessKind::InstrFetch),
            "LD" => Ok(AccessKind::Load),
            "ST" => Ok(AccessKind::Store),
            other => Err(format!("unknown access kind `{other}` (expected IF, LD or ST)")),
        }
    }
}

/// One memory reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRecord {
    pub core: u32,
    /// Core clock cycles since trace start.
    pub timestamp: u64,
    pub kind: AccessKind,
    pub address: u64,
}

impl AccessRecord {
    pub fn new(core: u32, timestamp: u64, kind: AccessKind, address: u64) -> Self {
        Self {
            core,
            timestamp,
            kind,
            address,
        }
    }
}

impl fmt::Display for AccessRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {:#x}",
            self.core,
            self.timestamp,
            self.kind.mnemonic(),
            self.address
        )
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<AccessRecord>, TraceError> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let err = |msg: String| TraceError::Parse { line: lineno, msg };
    let fields: Vec<&str> = trimmed.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    }
    let core = fields[0]
        .parse::<u32>()
        .map_err(|e| err(format!("bad core id `{}`: {e}", fields[0])))?;
    let timestamp = fields[1]
        .parse::<u64>()
        .map_err(|e| err(format!("bad timestamp `{}`: {e}", fields[1])))?;
    let kind = fields[2].parse::<AccessKind>().map_err(err)?;
    let hex = fields[3]
        .strip_prefix("0x")
        .or_else(|| fields[3].strip_prefix("0X"))
        .ok_or_else(|| err(format!("address `{}` must be 0x-prefixed hex", fields[3])))?;
    let address =
        u64::from_str_radix(hex, 16).map_err(|e| err(format!("bad address `{}`: {e}", fields[3])))?;
    Ok(Some(AccessRecord {
        core,
        timestamp,
        kind,
        address,
    }))
}

/// Parses a trace from any reader, validating per-core timestamp order.
pub fn parse_trace<R: Read>(reader: R) -> Result<Vec<AccessRecord>, TraceError> {
    let mut records = Vec::new();
    let mut last: HashMap<u32, u64> = HashMap::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let Some(rec) = parse_line(&line, lineno)? else {
            continue;
        };
        if let Some(&previous) = last.get(&rec.core) {
            if rec.timestamp < previous {
                return Err(TraceError::TimestampRegression {
                    line: lineno,
                    core: rec.core,
                    timestamp: rec.timestamp,
                    previous,
                });
            }
        }
        last.insert(rec.core, rec.timestamp);
        records.push(rec);
    }
    Ok(records)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<AccessRecord>, TraceError> {
    let file = std::fs::File::open(path)?;
    parse_trace(file)
}

/// Writes records in the canonical single-space form.
pub fn write_trace<W: Write>(mut out: W, records: &[AccessRecord]) -> std::io::Result<()> {
    for rec in records {
        writeln!(out, "{rec}")?;
    }
    Ok(())
}

/// Inter-access gap distribution, in cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapDistribution {
    Constant(u64),
    /// Log-uniform over `[lo, hi]`.
    LogUniform { lo: u64, hi: u64 },
}

impl GapDistribution {
    fn validate(&self) -> Result<(), TraceError> {
        match *self {
            GapDistribution::Constant(0) => {
                Err(TraceError::InvalidSpec("constant gap must be at least 1 cycle".into()))
            }
            GapDistribution::LogUniform { lo, hi } if lo == 0 || hi < lo => Err(TraceError::InvalidSpec(
                format!("log-uniform gap needs 1 <= lo <= hi, got [{lo}, {hi}]"),
            )),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            GapDistribution::Constant(g) => g,
            GapDistribution::LogUniform { lo, hi } => {
                if lo == hi {
                    return lo;
                }
                let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
                let g = rng.random_range(a..=b).exp().round() as u64;
                g.clamp(lo, hi)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AddressPattern {
    SequentialLoop,
    UniformRandom,
    /// Zipf-distributed block popularity with exponent `s`.
    Zipf(f64),
}

/// Parameters of the per-core synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTraceSpec {
    pub seed: u64,
    pub num_cores: u32,
    pub accesses_per_core: u64,
    /// Loads / (loads + stores) among data accesses.
    pub read_fraction: f64,
    pub working_set_blocks: u64,
    pub gap: GapDistribution,
    pub pattern: AddressPattern,
    pub line_size: u64,
    /// Fraction of accesses that are instruction fetches (sequential loop over
    /// a separate code region of `working_set_blocks` blocks).
    pub instr_fraction: f64,
}

impl Default for SyntheticTraceSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            num_cores: 1,
            accesses_per_core: 10_000,
            read_fraction: 0.67,
            working_set_blocks: 256,
            gap: GapDistribution::Constant(10),
            pattern: AddressPattern::UniformRandom,
            line_size: 64,
            instr_fraction: 0.0,
        }
    }
}

/// Base address of the per-core data region; cores do not share data blocks.
const CORE_REGION_STRIDE: u64 = 1 << 32;
const CODE_REGION_OFFSET: u64 = 1 << 31;

impl SyntheticTraceSpec {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::InvalidSpec(m));
        if self.num_cores == 0 {
            return bad("num_cores must be at least 1".into());
        }
        if self.working_set_blocks == 0 {
            return bad("working_set_blocks must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return bad(format!("read_fraction {} outside [0, 1]", self.read_fraction));
        }
        if !(0.0..=1.0).contains(&self.instr_fraction) {
            return bad(format!("instr_fraction {} outside [0, 1]", self.instr_fraction));
        }
        if self.line_size == 0 || !self.line_size.is_power_of_two() {
            return bad(format!("line_size {} must be a power of two", self.line_size));
        }
        if let AddressPattern::Zipf(s) = self.pattern {
            if s.is_nan() || s <= 0.0 {
                return bad(format!("zipf exponent {s} must be positive"));
            }
        }
        if self.working_set_blocks.saturating_mul(self.line_size) >= CODE_REGION_OFFSET {
            return bad("working set does not fit in a per-core region".into());
        }
        self.gap.validate()
    }
}

/// Generates the trace described by `spec`. Output is sorted by timestamp,
/// ties broken by core id.
pub fn generate_trace(spec: &SyntheticTraceSpec) -> Result<Vec<AccessRecord>, TraceError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let is_read = Bernoulli::new(spec.read_fraction).expect("validated");
    let is_instr = Bernoulli::new(spec.instr_fraction).expect("validated");
    let zipf = match spec.pattern {
        AddressPattern::Zipf(s) => Some(Zipf::new(spec.working_set_blocks as f64, s).map_err(|e| {
            TraceError::InvalidSpec(format!("zipf distribution: {e}"))
        })?),
        _ => None,
    };

    let mut per_core = Vec::with_capacity(spec.num_cores as usize);
    for core in 0..spec.num_cores {
        let base = core as u64 * CORE_REGION_STRIDE;
        let mut records = Vec::with_capacity(spec.accesses_per_core as usize);
        let mut now = 0u64;
        let mut data_cursor = 0u64;
        let mut code_cursor = 0u64;
        for i in 0..spec.accesses_per_core {
            if i > 0 {
                now += spec.gap.sample(&mut rng);
            }
            let instr = spec.instr_fraction > 0.0 && is_instr.sample(&mut rng);
            let (kind, block) = if instr {
                let b = code_cursor % spec.working_set_blocks;
                code_cursor += 1;
                (AccessKind::InstrFetch, CODE_REGION_OFFSET / spec.line_size + b)
            } else {
                let b = match spec.pattern {
                    AddressPattern::SequentialLoop => {
                        let b = data_cursor % spec.working_set_blocks;
                        data_cursor += 1;
                        b
                    }
                    AddressPattern::UniformRandom => rng.random_range(0..spec.working_set_blocks),
                    AddressPattern::Zipf(_) => {
                        let rank = zipf.as_ref().expect("zipf").sample(&mut rng) as u64;
                        rank.clamp(1, spec.working_set_blocks) - 1
                    }
                };
                let kind = if is_read.sample(&mut rng) {
                    AccessKind::Load
                } else {
                    AccessKind::Store
                };
                (kind, b)
            };
            records.push(AccessRecord::new(core, now, kind, base + block * spec.line_size));
        }
        per_core.push(records);
    }
    Ok(merge_by_time(per_core))
}

/// Merges per-core streams into one sequence ordered by (timestamp, core).
/// Each input stream must already be ordered by timestamp.
pub fn merge_by_time(streams: Vec<Vec<AccessRecord>>) -> Vec<AccessRecord> {
    let mut all: Vec<AccessRecord> = streams.into_iter().flatten().collect();
    all.sort_by_key(|r| (r.timestamp, r.core));
    all
}

/// A generator that controls per-block re-reference gaps directly, rather than
/// per-core inter-access gaps. Every block in the working set is first touched
/// at a random offset within the first gap and then re-referenced after
/// independently sampled gaps until `duration_cycles` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct ReuseGapSpec {
    pub seed: u64,
    pub core: u32,
    pub blocks: u64,
    pub base_address: u64,
    pub line_size: u64,
    pub reuse_gap: GapDistribution,
    pub duration_cycles: u64,
    /// Probability that a reference is a store (the rest are loads).
    pub write_fraction: f64,
}

pub fn generate_reuse_trace(spec: &ReuseGapSpec) -> Result<Vec<AccessRecord>, TraceError> {
    spec.reuse_gap.validate()?;
    if spec.blocks == 0 {
        return Err(TraceError::InvalidSpec("blocks must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.write_fraction) {
        return Err(TraceError::InvalidSpec(format!(
            "write_fraction {} outside [0, 1]",
            spec.write_fraction
        )));
    }
    if spec.line_size == 0 || !spec.base_address.is_multiple_of(spec.line_size) {
        return Err(TraceError::InvalidSpec("base address must be line aligned".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let is_write = Bernoulli::new(spec.write_fraction).expect("validated");
    let mut events = Vec::new();
    for b in 0..spec.blocks {
        let addr = spec.base_address + b * spec.line_size;
        let first = spec.reuse_gap.sample(&mut rng);
        let mut t = rng.random_range(0..first);
        while t < spec.duration_cycles {
            let kind = if is_write.sample(&mut rng) {
                AccessKind::Store
            } else {
                AccessKind::Load
            };
            events.push(AccessRecord::new(spec.core, t, kind, addr));
            t += spec.reuse_gap.sample(&mut rng);
        }
    }
    events.sort_by_key(|r| (r.timestamp, r.address));
    Ok(events)
}
