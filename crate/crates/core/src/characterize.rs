//! Workload characterization: read/write mix, cache block lifetimes, block
//! persistence and expiration misses across retention times.
//!
//! Lifetime and persistence analyses replay a single access stream through
//! one cache unit with unbounded retention. Use [`unit_streams`] to split a
//! multi-core trace into the per-core instruction and data streams.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::cache::{CacheError, CacheUnit, CacheUnitConfig, Lookup, MissClass, Op, Residency, Technology, UnitCounters};
use crate::trace::{AccessKind, AccessRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReadWriteCounts {
    pub loads: u64,
    pub stores: u64,
}

impl ReadWriteCounts {
    /// Loads over data accesses; `None` without data accesses.
    pub fn read_fraction(&self) -> Option<f64> {
        let total = self.loads + self.stores;
        (total > 0).then(|| self.loads as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReadWriteRatio {
    pub per_core: BTreeMap<u32, ReadWriteCounts>,
    pub aggregate: ReadWriteCounts,
}

/// Read fraction of data accesses, per core and overall. Instruction fetches
/// are excluded.
pub fn read_write_ratio(trace: &[AccessRecord]) -> ReadWriteRatio {
    let mut out = ReadWriteRatio::default();
    for r in trace {
        let entry = out.per_core.entry(r.core).or_default();
        match r.kind {
            AccessKind::Load => {
                entry.loads += 1;
                out.aggregate.loads += 1;
            }
            AccessKind::Store => {
                entry.stores += 1;
                out.aggregate.stores += 1;
            }
            AccessKind::InstrFetch => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamKind {
    Instr,
    Data,
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamKind::Instr => "l1i",
            StreamKind::Data => "l1d",
        })
    }
}

/// Splits a trace into the streams seen by each core's L1I and L1D.
pub fn unit_streams(trace: &[AccessRecord]) -> BTreeMap<(u32, StreamKind), Vec<AccessRecord>> {
    let mut out: BTreeMap<(u32, StreamKind), Vec<AccessRecord>> = BTreeMap::new();
    for r in trace {
        let kind = if r.kind.is_data() { StreamKind::Data } else { StreamKind::Instr };
        out.entry((r.core, kind)).or_default().push(*r);
    }
    out
}

/// Result of replaying one stream through one unit.
#[derive(Debug, Clone)]
pub struct UnitRun {
    pub counters: UnitCounters,
    pub outcomes: Vec<Lookup>,
    pub residencies: Vec<Residency>,
    pub resident_at_end: u64,
    /// Cycle of the last access.
    pub end_time: u64,
}

/// Replays `stream` (time-ordered) through a fresh unit; addresses are
/// aligned down to the line size.
pub fn replay(stream: &[AccessRecord], cfg: &CacheUnitConfig, clock_hz: f64) -> Result<UnitRun, CacheError> {
    let mut unit = CacheUnit::new(cfg.clone(), clock_hz)?.with_residency_log();
    let mask = !(cfg.line_size - 1);
    let mut outcomes = Vec::with_capacity(stream.len());
    for r in stream {
        let op = if r.kind.is_write() { Op::Write } else { Op::Read };
        outcomes.push(unit.access(r.address & mask, op, r.timestamp)?.lookup);
    }
    let end_time = stream.last().map_or(0, |r| r.timestamp);
    unit.tick_expirations(end_time);
    Ok(UnitRun {
        counters: *unit.counters(),
        outcomes,
        residencies: unit.take_residencies(),
        resident_at_end: unit.valid_blocks(),
        end_time,
    })
}

fn unbounded(cfg: &CacheUnitConfig) -> CacheUnitConfig {
    cfg.clone().with_technology(Technology::Sram, f64::INFINITY)
}

pub const LIFETIME_BUCKETS: usize = 8;

/// Log-decade histogram over `[1us, 1s)` plus underflow and overflow.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifetimeHistogram {
    /// `[<1us, 1-10us, 10-100us, 100us-1ms, 1-10ms, 10-100ms, 100ms-1s, >=1s]`
    pub counts: [u64; LIFETIME_BUCKETS],
    pub p50_s: Option<f64>,
    pub p90_s: Option<f64>,
    pub p99_s: Option<f64>,
}

impl LifetimeHistogram {
    pub const LABELS: [&'static str; LIFETIME_BUCKETS] = [
        "<1us", "1us-10us", "10us-100us", "100us-1ms", "1ms-10ms", "10ms-100ms", "100ms-1s", ">=1s",
    ];

    /// Bucket of a lifetime of `cycles` at `clock_hz`.
    pub fn bucket(cycles: u64, clock_hz: f64) -> usize {
        // lifetime >= 10^(i-6) s  <=>  cycles * 1e6 >= 10^i * clock_hz
        let scaled = cycles as f64 * 1e6;
        (0..7).filter(|&i| scaled >= 10f64.powi(i) * clock_hz).count()
    }

    pub fn from_cycles(lifetimes: &[u64], clock_hz: f64) -> Self {
        let mut h = Self::default();
        for &c in lifetimes {
            h.counts[Self::bucket(c, clock_hz)] += 1;
        }
        let mut sorted = lifetimes.to_vec();
        sorted.sort_unstable();
        let q = |p: f64| {
            (!sorted.is_empty()).then(|| {
                let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                sorted[rank - 1] as f64 / clock_hz
            })
        };
        h.p50_s = q(0.50);
        h.p90_s = q(0.90);
        h.p99_s = q(0.99);
        h
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeReport {
    /// Fill to last hit; residencies without hits count as zero.
    pub until_last_hit: LifetimeHistogram,
    /// Fill to eviction.
    pub until_eviction: LifetimeHistogram,
    pub residencies: u64,
    pub fills: u64,
    pub still_resident: u64,
}

/// Lifetimes of every completed residency of `stream` in an
/// unbounded-retention version of `cfg`.
pub fn block_lifetimes(stream: &[AccessRecord], cfg: &CacheUnitConfig, clock_hz: f64) -> Result<LifetimeReport, CacheError> {
    let run = replay(stream, &unbounded(cfg), clock_hz)?;
    let last_hit: Vec<u64> = run
        .residencies
        .iter()
        .map(|r| r.last_hit.map_or(0, |h| h - r.fill_time))
        .collect();
    let eviction: Vec<u64> = run.residencies.iter().map(|r| r.end_time - r.fill_time).collect();
    Ok(LifetimeReport {
        until_last_hit: LifetimeHistogram::from_cycles(&last_hit, clock_hz),
        until_eviction: LifetimeHistogram::from_cycles(&eviction, clock_hz),
        residencies: run.residencies.len() as u64,
        fills: run.counters.fills,
        still_resident: run.resident_at_end,
    })
}

pub const PERSISTENCE_THRESHOLDS: [u64; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceReport {
    /// `(thd, fraction of unique blocks reloaded at least thd times)`.
    pub fractions: Vec<(u64, f64)>,
    pub unique_blocks: u64,
    /// Fills, including first loads.
    pub total_loads: u64,
}

/// Counts, per block address, the fills that follow an eviction of that
/// block, and reports the fraction of blocks reaching each threshold.
pub fn persistence(stream: &[AccessRecord], cfg: &CacheUnitConfig, clock_hz: f64) -> Result<PersistenceReport, CacheError> {
    let cfg = unbounded(cfg);
    let run = replay(stream, &cfg, clock_hz)?;
    let mask = !(cfg.line_size - 1);
    let mut reloads: HashMap<u64, u64> = HashMap::new();
    for (r, lookup) in stream.iter().zip(&run.outcomes) {
        match lookup {
            Lookup::Hit => {}
            Lookup::Miss(MissClass::Compulsory) => {
                reloads.entry(r.address & mask).or_insert(0);
            }
            Lookup::Miss(_) => *reloads.entry(r.address & mask).or_insert(0) += 1,
        }
    }
    let unique = reloads.len() as u64;
    let fractions = PERSISTENCE_THRESHOLDS
        .iter()
        .map(|&thd| {
            let n = reloads.values().filter(|&&c| c >= thd).count() as u64;
            (thd, if unique == 0 { 0.0 } else { n as f64 / unique as f64 })
        })
        .collect();
    Ok(PersistenceReport {
        fractions,
        unique_blocks: unique,
        total_loads: run.counters.fills,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpirationPoint {
    pub retention_s: f64,
    pub expiration_misses: u64,
    pub total_misses: u64,
    /// Total misses over the unbounded-retention miss count.
    pub ratio_to_unbounded: f64,
    /// Total misses minus unbounded-retention misses.
    pub differential_misses: i64,
}

/// One simulation of `stream` per retention time (sorted ascending in the
/// output), each compared against the unbounded-retention run.
pub fn expiration_curve(
    stream: &[AccessRecord],
    base: &CacheUnitConfig,
    clock_hz: f64,
    retentions: &[f64],
) -> Result<Vec<ExpirationPoint>, CacheError> {
    let baseline = replay(stream, &unbounded(base), clock_hz)?.counters.misses();
    let mut sorted = retentions.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite retention"));
    sorted
        .par_iter()
        .map(|&ret| {
            let cfg = base.clone().with_technology(Technology::SttRam, ret);
            let c = replay(stream, &cfg, clock_hz)?.counters;
            Ok(ExpirationPoint {
                retention_s: ret,
                expiration_misses: c.miss_expiration,
                total_misses: c.misses(),
                ratio_to_unbounded: if baseline == 0 {
                    if c.misses() == 0 { 1.0 } else { f64::INFINITY }
                } else {
                    c.misses() as f64 / baseline as f64
                },
                differential_misses: c.misses() as i64 - baseline as i64,
            })
        })
        .collect()
}
