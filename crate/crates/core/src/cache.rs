//! A single set-associative, write-back, write-allocate cache unit with
//! optional STT-RAM retention expiry.
//!
//! Retention is enforced by a per-block counter clocked by one shared tick
//! clock per unit with period `retention / N`. Ticks fire at `T, 2T, 3T, ...`;
//! every valid block's counter advances on each tick, and a block whose
//! counter has seen `N` ticks since its last reset is evicted (with a
//! writeback if dirty). Fills and write hits reset the counter. The resulting
//! residency of a block reset at `r` always lies in `((N-1)/N * t_ret, t_ret]`.
//!
//! Time is an integer count of clock cycles at the unit's clock frequency. The
//! tick schedule is computed with exact rational arithmetic, so tick `k` fires
//! at `ceil(k * R / N)` for a retention of `R` cycles.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CacheError {
    #[error("invalid cache configuration: {0}")]
    InvalidConfig(String),
    #[error("address {addr:#x} is not aligned to the {line}-byte line size")]
    Unaligned { addr: u64, line: u64 },
    #[error("access at cycle {now} precedes previous access at cycle {last}")]
    TimeRegression { now: u64, last: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Technology {
    Sram,
    SttRam,
}

impl Technology {
    pub fn name(self) -> &'static str {
        match self {
            Technology::Sram => "SRAM",
            Technology::SttRam => "STTRAM",
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Technology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SRAM" => Ok(Technology::Sram),
            "STTRAM" | "STT-RAM" => Ok(Technology::SttRam),
            _ => Err(format!("unknown technology `{s}` (expected SRAM or STTRAM)")),
        }
    }
}

/// Which hits restart the retention counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefreshPolicy {
    /// Only fills and write hits rewrite the cells.
    #[default]
    WritesOnly,
    /// Every hit restarts the counter.
    AnyAccess,
}

/// When expirations are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpiryMode {
    /// All blocks whose deadline has passed are expired at every access,
    /// in deadline order, as a hardware tick clock would.
    #[default]
    Eager,
    /// Only the blocks of the accessed set are checked at each access;
    /// other sets are settled by an explicit `tick_expirations` call.
    Lazy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheUnitConfig {
    pub size_bytes: u64,
    pub associativity: u32,
    pub line_size: u64,
    pub technology: Technology,
    /// Seconds; ignored for SRAM.
    pub retention_s: f64,
    /// Number of counter states `N`.
    pub counter_states: u32,
    pub refresh: RefreshPolicy,
}

impl CacheUnitConfig {
    pub fn sram(size_bytes: u64, associativity: u32, line_size: u64) -> Self {
        Self {
            size_bytes,
            associativity,
            line_size,
            technology: Technology::Sram,
            retention_s: f64::INFINITY,
            counter_states: 4,
            refresh: RefreshPolicy::WritesOnly,
        }
    }

    pub fn sttram(size_bytes: u64, associativity: u32, line_size: u64, retention_s: f64) -> Self {
        Self {
            technology: Technology::SttRam,
            retention_s,
            ..Self::sram(size_bytes, associativity, line_size)
        }
    }

    /// 32KB, 4-way, 64B lines.
    pub fn default_l1() -> Self {
        Self::sram(32 * 1024, 4, 64)
    }

    /// 2MB, 16-way, 64B lines.
    pub fn default_l2() -> Self {
        Self::sram(2 * 1024 * 1024, 16, 64)
    }

    pub fn with_technology(mut self, technology: Technology, retention_s: f64) -> Self {
        self.technology = technology;
        self.retention_s = retention_s;
        self
    }

    pub fn with_counter_states(mut self, n: u32) -> Self {
        self.counter_states = n;
        self
    }

    pub fn with_refresh(mut self, refresh: RefreshPolicy) -> Self {
        self.refresh = refresh;
        self
    }

    pub fn num_blocks(&self) -> u64 {
        self.size_bytes / self.line_size
    }

    pub fn num_sets(&self) -> u64 {
        self.num_blocks() / self.associativity as u64
    }

    /// Retention in seconds, `None` for SRAM.
    pub fn retention(&self) -> Option<f64> {
        match self.technology {
            Technology::Sram => None,
            Technology::SttRam => Some(self.retention_s),
        }
    }

    /// Bits of counter state per block: `ceil(log2(N))`.
    pub fn counter_bits_per_block(&self) -> u32 {
        match self.technology {
            Technology::Sram => 0,
            Technology::SttRam => u32::BITS - (self.counter_states - 1).leading_zeros(),
        }
    }

    pub fn counter_overhead_bits(&self) -> u64 {
        self.counter_bits_per_block() as u64 * self.num_blocks()
    }

    pub fn validate(&self) -> Result<(), CacheError> {
        let bad = |m: String| Err(CacheError::InvalidConfig(m));
        if self.line_size == 0 || !self.line_size.is_power_of_two() {
            return bad(format!("line size {} must be a power of two", self.line_size));
        }
        if self.associativity == 0 {
            return bad("associativity must be at least 1".into());
        }
        let way_bytes = self.line_size * self.associativity as u64;
        if self.size_bytes == 0 || !self.size_bytes.is_multiple_of(way_bytes) {
            return bad(format!(
                "size {} is not a multiple of associativity x line size ({way_bytes})",
                self.size_bytes
            ));
        }
        if !self.num_sets().is_power_of_two() {
            return bad(format!("set count {} must be a power of two", self.num_sets()));
        }
        if self.technology == Technology::SttRam {
            if !(self.retention_s.is_finite() && self.retention_s > 0.0) {
                return bad(format!("STTRAM retention {} must be positive and finite", self.retention_s));
            }
            if self.counter_states < 2 {
                return bad(format!("counter needs at least 2 states, got {}", self.counter_states));
            }
        }
        Ok(())
    }
}

/// The shared per-unit tick clock of the retention counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetentionClock {
    /// Retention time in cycles.
    pub retention_cycles: u64,
    /// Counter states `N`; the tick period is `retention_cycles / N`.
    pub states: u64,
}

impl RetentionClock {
    pub fn new(retention_s: f64, clock_hz: f64, states: u32) -> Self {
        let retention_cycles = ((retention_s * clock_hz).round() as u64).max(1);
        Self {
            retention_cycles,
            states: states as u64,
        }
    }

    /// Number of ticks that have fired at or before `t`.
    pub fn tick_index(&self, t: u64) -> u64 {
        ((t as u128 * self.states as u128) / self.retention_cycles as u128) as u64
    }

    /// Cycle at which tick `k` fires.
    pub fn tick_time(&self, k: u64) -> u64 {
        let num = k as u128 * self.retention_cycles as u128;
        num.div_ceil(self.states as u128) as u64
    }

    /// Expiry time of a block whose counter was reset at `reset_at`: the
    /// instant of the `N`-th tick after the reset.
    pub fn deadline(&self, reset_at: u64) -> u64 {
        self.tick_time(self.tick_index(reset_at) + self.states)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockState {
    pub tag: u64,
    pub valid: bool,
    pub dirty: bool,
    /// Tick index at the last counter reset; the counter value is the
    /// number of ticks since.
    pub reset_tick: u64,
    /// Cycle of the last counter reset.
    pub reset_at: u64,
    /// Cycle at which the block expires (`u64::MAX` if never).
    pub deadline: u64,
    pub lru_stamp: u64,
    pub fill_time: u64,
    pub last_hit: Option<u64>,
    generation: u32,
}

impl BlockState {
    /// Counter state at time `now`, saturating at `N - 1`.
    pub fn counter(&self, clock: &RetentionClock, now: u64) -> u64 {
        clock
            .tick_index(now)
            .saturating_sub(self.reset_tick)
            .min(clock.states - 1)
    }

    /// Restarts the retention counter at `now`.
    pub fn reset_counter(&mut self, clock: Option<&RetentionClock>, now: u64) {
        self.reset_at = now;
        match clock {
            Some(c) => {
                self.reset_tick = c.tick_index(now);
                self.deadline = c.deadline(now);
            }
            None => {
                self.reset_tick = 0;
                self.deadline = u64::MAX;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LedgerState {
    #[default]
    NeverResident,
    EvictedByReplacement,
    EvictedByExpiration,
    Resident,
}

/// Last known residency state of every block address ever referenced.
#[derive(Debug, Clone, Default)]
pub struct EvictionLedger {
    states: HashMap<u64, LedgerState>,
}

impl EvictionLedger {
    pub fn state(&self, block_addr: u64) -> LedgerState {
        self.states.get(&block_addr).copied().unwrap_or_default()
    }

    fn set(&mut self, block_addr: u64, state: LedgerState) {
        self.states.insert(block_addr, state);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, LedgerState)> + '_ {
        self.states.iter().map(|(&a, &s)| (a, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MissClass {
    Compulsory,
    Replacement,
    Expiration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lookup {
    Hit,
    Miss(MissClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AccessOutcome {
    pub lookup: Lookup,
    /// The replaced victim was dirty and must be written to the next level.
    pub writeback_issued: bool,
    pub victim_address: Option<u64>,
}

impl AccessOutcome {
    pub fn is_hit(&self) -> bool {
        self.lookup == Lookup::Hit
    }

    pub fn miss_class(&self) -> Option<MissClass> {
        match self.lookup {
            Lookup::Hit => None,
            Lookup::Miss(c) => Some(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Read,
    Write,
}

/// A block removed by its retention counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpiredBlock {
    pub address: u64,
    pub dirty: bool,
    pub deadline: u64,
    pub reset_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionCause {
    Replacement,
    Expiration,
}

/// One completed stay of a block in the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Residency {
    pub address: u64,
    pub fill_time: u64,
    pub last_hit: Option<u64>,
    pub end_time: u64,
    pub cause: EvictionCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UnitCounters {
    pub accesses: u64,
    pub reads: u64,
    pub writes: u64,
    pub read_hits: u64,
    pub write_hits: u64,
    pub miss_compulsory: u64,
    pub miss_replacement: u64,
    pub miss_expiration: u64,
    pub fills: u64,
    /// Dirty blocks written to the next level, by replacement or expiry.
    pub writebacks: u64,
    pub expiration_writebacks: u64,
    pub evictions_replacement: u64,
    pub evictions_expiration: u64,
}

impl UnitCounters {
    pub fn hits(&self) -> u64 {
        self.read_hits + self.write_hits
    }

    pub fn misses(&self) -> u64 {
        self.miss_compulsory + self.miss_replacement + self.miss_expiration
    }

    pub fn merge(&mut self, o: &UnitCounters) {
        self.accesses += o.accesses;
        self.reads += o.reads;
        self.writes += o.writes;
        self.read_hits += o.read_hits;
        self.write_hits += o.write_hits;
        self.miss_compulsory += o.miss_compulsory;
        self.miss_replacement += o.miss_replacement;
        self.miss_expiration += o.miss_expiration;
        self.fills += o.fills;
        self.writebacks += o.writebacks;
        self.expiration_writebacks += o.expiration_writebacks;
        self.evictions_replacement += o.evictions_replacement;
        self.evictions_expiration += o.evictions_expiration;
    }
}

#[derive(Debug, Clone)]
pub struct CacheUnit {
    cfg: CacheUnitConfig,
    clock: Option<RetentionClock>,
    mode: ExpiryMode,
    num_sets: u64,
    ways: usize,
    line_shift: u32,
    blocks: Vec<BlockState>,
    ledger: EvictionLedger,
    /// (deadline, slot, generation); entries whose generation no longer
    /// matches the slot are stale.
    deadlines: BinaryHeap<Reverse<(u64, usize, u32)>>,
    last_time: u64,
    lru_clock: u64,
    counters: UnitCounters,
    pending: Vec<ExpiredBlock>,
    residencies: Option<Vec<Residency>>,
}

impl CacheUnit {
    pub fn new(cfg: CacheUnitConfig, clock_hz: f64) -> Result<Self, CacheError> {
        Self::with_mode(cfg, clock_hz, ExpiryMode::Eager)
    }

    pub fn with_mode(cfg: CacheUnitConfig, clock_hz: f64, mode: ExpiryMode) -> Result<Self, CacheError> {
        cfg.validate()?;
        if clock_hz.is_nan() || clock_hz <= 0.0 {
            return Err(CacheError::InvalidConfig(format!("clock {clock_hz} Hz must be positive")));
        }
        let clock = cfg
            .retention()
            .map(|r| RetentionClock::new(r, clock_hz, cfg.counter_states));
        let num_sets = cfg.num_sets();
        let ways = cfg.associativity as usize;
        Ok(Self {
            clock,
            mode,
            num_sets,
            ways,
            line_shift: cfg.line_size.trailing_zeros(),
            blocks: vec![BlockState::default(); num_sets as usize * ways],
            ledger: EvictionLedger::default(),
            deadlines: BinaryHeap::new(),
            last_time: 0,
            lru_clock: 0,
            counters: UnitCounters::default(),
            pending: Vec::new(),
            residencies: None,
            cfg,
        })
    }

    /// Records every completed residency; read them back with
    /// [`CacheUnit::take_residencies`].
    pub fn with_residency_log(mut self) -> Self {
        self.residencies = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &CacheUnitConfig {
        &self.cfg
    }

    pub fn clock(&self) -> Option<&RetentionClock> {
        self.clock.as_ref()
    }

    pub fn counters(&self) -> &UnitCounters {
        &self.counters
    }

    pub fn ledger(&self) -> &EvictionLedger {
        &self.ledger
    }

    pub fn valid_blocks(&self) -> u64 {
        self.blocks.iter().filter(|b| b.valid).count() as u64
    }

    pub fn take_residencies(&mut self) -> Vec<Residency> {
        self.residencies.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn split(&self, addr: u64) -> (usize, u64) {
        let line = addr >> self.line_shift;
        ((line % self.num_sets) as usize, line / self.num_sets)
    }

    fn slot_address(&self, slot: usize) -> u64 {
        let set = (slot / self.ways) as u64;
        (self.blocks[slot].tag * self.num_sets + set) << self.line_shift
    }

    /// The resident block holding `addr`, if any. Does not apply expirations.
    pub fn block(&self, addr: u64) -> Option<&BlockState> {
        let (set, tag) = self.split(addr);
        self.blocks[set * self.ways..(set + 1) * self.ways]
            .iter()
            .find(|b| b.valid && b.tag == tag)
    }

    /// Applies every expiration with deadline `<= now` and returns all blocks
    /// expired since the previous call, in deadline order.
    pub fn tick_expirations(&mut self, now: u64) -> Vec<ExpiredBlock> {
        if self.clock.is_some() {
            match self.mode {
                ExpiryMode::Eager => self.expire_due(now),
                ExpiryMode::Lazy => {
                    let mut due: Vec<(u64, usize)> = self
                        .blocks
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| b.valid && b.deadline <= now)
                        .map(|(i, b)| (b.deadline, i))
                        .collect();
                    due.sort_unstable();
                    for (_, slot) in due {
                        self.expire(slot);
                    }
                }
            }
        }
        std::mem::take(&mut self.pending)
    }

    fn expire_due(&mut self, now: u64) {
        while let Some(&Reverse((deadline, slot, generation))) = self.deadlines.peek() {
            if deadline > now {
                break;
            }
            self.deadlines.pop();
            let b = &self.blocks[slot];
            if b.valid && b.generation == generation {
                self.expire(slot);
            }
        }
    }

    fn expire_in_set(&mut self, set: usize, now: u64) {
        let base = set * self.ways;
        let mut due: Vec<(u64, usize)> = (base..base + self.ways)
            .filter(|&i| self.blocks[i].valid && self.blocks[i].deadline <= now)
            .map(|i| (self.blocks[i].deadline, i))
            .collect();
        due.sort_unstable();
        for (_, slot) in due {
            self.expire(slot);
        }
    }

    fn expire(&mut self, slot: usize) {
        let address = self.slot_address(slot);
        let b = self.blocks[slot];
        if b.dirty {
            self.counters.writebacks += 1;
            self.counters.expiration_writebacks += 1;
        }
        self.counters.evictions_expiration += 1;
        self.ledger.set(address, LedgerState::EvictedByExpiration);
        if let Some(log) = self.residencies.as_mut() {
            log.push(Residency {
                address,
                fill_time: b.fill_time,
                last_hit: b.last_hit,
                end_time: b.deadline,
                cause: EvictionCause::Expiration,
            });
        }
        self.pending.push(ExpiredBlock {
            address,
            dirty: b.dirty,
            deadline: b.deadline,
            reset_at: b.reset_at,
        });
        let blk = &mut self.blocks[slot];
        blk.valid = false;
        blk.dirty = false;
        blk.generation = blk.generation.wrapping_add(1);
    }

    fn refresh(&mut self, slot: usize, now: u64) {
        let clock = self.clock;
        let blk = &mut self.blocks[slot];
        blk.reset_counter(clock.as_ref(), now);
        blk.generation = blk.generation.wrapping_add(1);
        if self.mode == ExpiryMode::Eager && clock.is_some() {
            self.deadlines.push(Reverse((blk.deadline, slot, blk.generation)));
        }
    }

    pub fn access(&mut self, addr: u64, op: Op, now: u64) -> Result<AccessOutcome, CacheError> {
        if addr & (self.cfg.line_size - 1) != 0 {
            return Err(CacheError::Unaligned {
                addr,
                line: self.cfg.line_size,
            });
        }
        if now < self.last_time {
            return Err(CacheError::TimeRegression {
                now,
                last: self.last_time,
            });
        }
        self.last_time = now;

        let (set, tag) = self.split(addr);
        if self.clock.is_some() {
            match self.mode {
                ExpiryMode::Eager => self.expire_due(now),
                ExpiryMode::Lazy => self.expire_in_set(set, now),
            }
        }

        self.counters.accesses += 1;
        match op {
            Op::Read => self.counters.reads += 1,
            Op::Write => self.counters.writes += 1,
        }
        self.lru_clock += 1;
        let base = set * self.ways;

        if let Some(way) = (0..self.ways).find(|&w| {
            let b = &self.blocks[base + w];
            b.valid && b.tag == tag
        }) {
            let slot = base + way;
            let blk = &mut self.blocks[slot];
            blk.lru_stamp = self.lru_clock;
            blk.last_hit = Some(now);
            match op {
                Op::Read => self.counters.read_hits += 1,
                Op::Write => {
                    self.counters.write_hits += 1;
                    blk.dirty = true;
                }
            }
            if op == Op::Write || self.cfg.refresh == RefreshPolicy::AnyAccess {
                self.refresh(slot, now);
            }
            return Ok(AccessOutcome {
                lookup: Lookup::Hit,
                writeback_issued: false,
                victim_address: None,
            });
        }

        let class = match self.ledger.state(addr) {
            LedgerState::NeverResident => MissClass::Compulsory,
            LedgerState::EvictedByExpiration => MissClass::Expiration,
            LedgerState::EvictedByReplacement => MissClass::Replacement,
            LedgerState::Resident => {
                unreachable!("ledger says {addr:#x} is resident but lookup missed")
            }
        };
        match class {
            MissClass::Compulsory => self.counters.miss_compulsory += 1,
            MissClass::Replacement => self.counters.miss_replacement += 1,
            MissClass::Expiration => self.counters.miss_expiration += 1,
        }

        let way = (0..self.ways)
            .find(|&w| !self.blocks[base + w].valid)
            .unwrap_or_else(|| {
                (0..self.ways)
                    .min_by_key(|&w| self.blocks[base + w].lru_stamp)
                    .expect("at least one way")
            });
        let slot = base + way;
        let mut writeback_issued = false;
        let mut victim_address = None;
        if self.blocks[slot].valid {
            let victim = self.slot_address(slot);
            let b = self.blocks[slot];
            writeback_issued = b.dirty;
            victim_address = Some(victim);
            if b.dirty {
                self.counters.writebacks += 1;
            }
            self.counters.evictions_replacement += 1;
            self.ledger.set(victim, LedgerState::EvictedByReplacement);
            if let Some(log) = self.residencies.as_mut() {
                log.push(Residency {
                    address: victim,
                    fill_time: b.fill_time,
                    last_hit: b.last_hit,
                    end_time: now,
                    cause: EvictionCause::Replacement,
                });
            }
        }

        let generation = self.blocks[slot].generation;
        self.blocks[slot] = BlockState {
            tag,
            valid: true,
            dirty: op == Op::Write,
            lru_stamp: self.lru_clock,
            fill_time: now,
            last_hit: None,
            generation,
            ..BlockState::default()
        };
        self.refresh(slot, now);
        self.counters.fills += 1;
        self.ledger.set(addr, LedgerState::Resident);

        Ok(AccessOutcome {
            lookup: Lookup::Miss(class),
            writeback_issued,
            victim_address,
        })
    }
}

/// Converts a cycle count to seconds.
pub fn time_to_seconds(cycles: u64, clock_hz: f64) -> f64 {
    cycles as f64 / clock_hz
}
