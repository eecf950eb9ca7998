//! Single- and multi-core cache hierarchies: private L1 instruction and data
//! caches per core, an optional shared unified L2, and a fixed-latency main
//! memory.
//!
//! Cache state is driven by trace time: records are replayed in global
//! `(timestamp, core)` order and every unit sees the record's timestamp. Core
//! timing is a separate blocking in-order model: a record issues at
//! `max(timestamp, previous completion)` and completes after the summed
//! latency of every level it touched.
//!
//! Before each record, every unit's retention clock is advanced to the record
//! time. Dirty L1 blocks that expired in the meantime are written to the L2 at
//! their expiry instants, in deadline order.

use std::fmt;

use thiserror::Error;

use crate::cache::{CacheError, CacheUnit, CacheUnitConfig, Op, Technology, UnitCounters};
use crate::energy::{unit_energy, EnergyBreakdown, TechParams, TechTable, TechTableError};
use crate::trace::{AccessKind, AccessRecord};

pub use crate::cache::time_to_seconds;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid hierarchy configuration: {0}")]
    Config(String),
    #[error("trace record {index} references core {core}, but only {num_cores} cores are configured")]
    CoreOutOfRange { index: usize, core: u32, num_cores: u32 },
    /// The table error is part of the message rather than the source chain.
    #[error("{unit}: {error}")]
    Tech { unit: UnitId, error: TechTableError },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnitId {
    L1I(u32),
    L1D(u32),
    L2,
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitId::L1I(c) => write!(f, "core{c}.l1i"),
            UnitId::L1D(c) => write!(f, "core{c}.l1d"),
            UnitId::L2 => f.write_str("l2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    pub num_cores: u32,
    pub clock_hz: f64,
    /// One entry per core.
    pub l1i: Vec<CacheUnitConfig>,
    /// One entry per core.
    pub l1d: Vec<CacheUnitConfig>,
    pub l2: Option<CacheUnitConfig>,
    pub mem_latency_cycles: u64,
    /// Joules per memory read or write.
    pub mem_energy_per_access: f64,
}

pub const DEFAULT_CLOCK_HZ: f64 = 1.9e9;
pub const DEFAULT_MEM_LATENCY_CYCLES: u64 = 100;
pub const DEFAULT_MEM_ENERGY_J: f64 = 2.0e-9;

impl HierarchyConfig {
    /// `num_cores` cores with identical private L1I/L1D caches and no L2.
    pub fn new(num_cores: u32, l1: CacheUnitConfig) -> Self {
        Self {
            num_cores,
            clock_hz: DEFAULT_CLOCK_HZ,
            l1i: vec![l1.clone(); num_cores as usize],
            l1d: vec![l1; num_cores as usize],
            l2: None,
            mem_latency_cycles: DEFAULT_MEM_LATENCY_CYCLES,
            mem_energy_per_access: DEFAULT_MEM_ENERGY_J,
        }
    }

    pub fn with_l2(mut self, l2: CacheUnitConfig) -> Self {
        self.l2 = Some(l2);
        self
    }

    pub fn without_l2(mut self) -> Self {
        self.l2 = None;
        self
    }

    /// Every cache unit switched to `technology` with `retention_s`.
    pub fn with_uniform_technology(&self, technology: Technology, retention_s: f64) -> Self {
        let mut cfg = self.clone();
        for u in cfg.l1i.iter_mut().chain(cfg.l1d.iter_mut()).chain(cfg.l2.iter_mut()) {
            *u = u.clone().with_technology(technology, retention_s);
        }
        cfg
    }

    /// Both L1 caches of `core` switched to `technology` with `retention_s`.
    pub fn with_core_l1(&self, core: u32, technology: Technology, retention_s: f64) -> Self {
        let mut cfg = self.clone();
        let c = core as usize;
        cfg.l1i[c] = cfg.l1i[c].clone().with_technology(technology, retention_s);
        cfg.l1d[c] = cfg.l1d[c].clone().with_technology(technology, retention_s);
        cfg
    }

    pub fn units(&self) -> Vec<(UnitId, &CacheUnitConfig)> {
        let mut out = Vec::new();
        for c in 0..self.num_cores {
            out.push((UnitId::L1I(c), &self.l1i[c as usize]));
            out.push((UnitId::L1D(c), &self.l1d[c as usize]));
        }
        if let Some(l2) = &self.l2 {
            out.push((UnitId::L2, l2));
        }
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.num_cores == 0 {
            return bad("at least one core is required".into());
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return bad(format!("clock {} Hz must be positive", self.clock_hz));
        }
        if self.l1i.len() != self.num_cores as usize || self.l1d.len() != self.num_cores as usize {
            return bad(format!(
                "expected {} L1 configurations per cache type, found {} L1I and {} L1D",
                self.num_cores,
                self.l1i.len(),
                self.l1d.len()
            ));
        }
        if self.mem_energy_per_access.is_nan() || self.mem_energy_per_access < 0.0 {
            return bad("memory energy per access must be non-negative".into());
        }
        for (id, u) in self.units() {
            u.validate().map_err(|e| SimError::Config(format!("{id}: {e}")))?;
        }
        let same_geometry = |a: &CacheUnitConfig, b: &CacheUnitConfig| {
            a.size_bytes == b.size_bytes && a.associativity == b.associativity && a.line_size == b.line_size
        };
        for per_core in [&self.l1i, &self.l1d] {
            if per_core.iter().any(|u| !same_geometry(u, &per_core[0])) {
                return bad("per-core L1 caches may differ only in technology and retention".into());
            }
        }
        if self.l1i[0].line_size != self.l1d[0].line_size {
            return bad("L1I and L1D line sizes differ".into());
        }
        if let Some(l2) = &self.l2 {
            if l2.line_size != self.l1d[0].line_size {
                return bad(format!(
                    "L2 line size {} differs from L1 line size {}",
                    l2.line_size, self.l1d[0].line_size
                ));
            }
        }
        Ok(())
    }
}

/// Parameter tables for the L1 caches and, optionally, a separate one for
/// the L2 (whose per-access costs differ with its size).
#[derive(Debug, Clone)]
pub struct TechTables {
    pub l1: TechTable,
    pub l2: Option<TechTable>,
}

impl TechTables {
    pub fn single(table: TechTable) -> Self {
        Self { l1: table, l2: None }
    }

    pub fn for_unit(&self, id: UnitId) -> &TechTable {
        match id {
            UnitId::L2 => self.l2.as_ref().unwrap_or(&self.l1),
            _ => &self.l1,
        }
    }

    pub fn resolve(&self, id: UnitId, cfg: &CacheUnitConfig) -> Result<TechParams, SimError> {
        self.for_unit(id)
            .lookup(cfg.technology, cfg.retention())
            .map_err(|error| SimError::Tech { unit: id, error })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            l1: self.l1.scaled(k),
            l2: self.l2.as_ref().map(|t| t.scaled(k)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitReport {
    pub id: UnitId,
    pub config: CacheUnitConfig,
    pub params: TechParams,
    pub counters: UnitCounters,
    /// Cycles of access latency charged at this unit.
    pub busy_cycles: u64,
    /// Valid blocks when the trace ended.
    pub resident_blocks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MemoryCounters {
    pub reads: u64,
    pub writes: u64,
}

impl MemoryCounters {
    pub fn accesses(&self) -> u64 {
        self.reads + self.writes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub clock_hz: f64,
    pub units: Vec<UnitReport>,
    pub memory: MemoryCounters,
    pub mem_energy_per_access: f64,
    /// Cycle at which each core's last access completed.
    pub core_completion_cycles: Vec<u64>,
    pub last_timestamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub per_unit: Vec<(UnitId, EnergyBreakdown)>,
    /// Sum over all cache units.
    pub caches: EnergyBreakdown,
    pub memory_j: f64,
}

impl SimReport {
    pub fn unit(&self, id: UnitId) -> Option<&UnitReport> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn execution_cycles(&self) -> u64 {
        self.core_completion_cycles.iter().copied().max().unwrap_or(0)
    }

    pub fn execution_time_s(&self) -> f64 {
        time_to_seconds(self.execution_cycles(), self.clock_hz)
    }

    pub fn core_completion_s(&self) -> Vec<f64> {
        self.core_completion_cycles
            .iter()
            .map(|&c| time_to_seconds(c, self.clock_hz))
            .collect()
    }

    /// Per-unit energy over the whole execution time.
    pub fn energy(&self) -> EnergyReport {
        let wall = self.execution_time_s();
        let per_unit: Vec<(UnitId, EnergyBreakdown)> = self
            .units
            .iter()
            .map(|u| (u.id, unit_energy(&u.params, &u.counters, wall)))
            .collect();
        let caches = EnergyBreakdown::sum(per_unit.iter().map(|(_, e)| e));
        EnergyReport {
            per_unit,
            caches,
            memory_j: self.memory.accesses() as f64 * self.mem_energy_per_access,
        }
    }

    /// Counters summed over all units matching `pred`.
    pub fn aggregate(&self, pred: impl Fn(UnitId) -> bool) -> UnitCounters {
        let mut total = UnitCounters::default();
        for u in self.units.iter().filter(|u| pred(u.id)) {
            total.merge(&u.counters);
        }
        total
    }
}

struct Level {
    id: UnitId,
    unit: CacheUnit,
    params: TechParams,
    busy: u64,
}

impl Level {
    fn new(id: UnitId, cfg: &CacheUnitConfig, clock_hz: f64, tables: &TechTables) -> Result<Self, SimError> {
        Ok(Self {
            id,
            params: tables.resolve(id, cfg)?,
            unit: CacheUnit::new(cfg.clone(), clock_hz)?,
            busy: 0,
        })
    }

    fn latency(&self, op: Op) -> u64 {
        match op {
            Op::Read => self.params.t_read,
            Op::Write => self.params.t_write,
        }
    }

    fn report(&self) -> UnitReport {
        UnitReport {
            id: self.id,
            config: self.unit.config().clone(),
            params: self.params,
            counters: *self.unit.counters(),
            busy_cycles: self.busy,
            resident_blocks: self.unit.valid_blocks(),
        }
    }
}

struct Simulator {
    l1i: Vec<Level>,
    l1d: Vec<Level>,
    l2: Option<Level>,
    memory: MemoryCounters,
    mem_latency: u64,
    line_mask: u64,
    ready: Vec<u64>,
}

impl Simulator {
    fn new(cfg: &HierarchyConfig, tables: &TechTables) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut l1i = Vec::new();
        let mut l1d = Vec::new();
        for c in 0..cfg.num_cores {
            l1i.push(Level::new(UnitId::L1I(c), &cfg.l1i[c as usize], cfg.clock_hz, tables)?);
            l1d.push(Level::new(UnitId::L1D(c), &cfg.l1d[c as usize], cfg.clock_hz, tables)?);
        }
        let l2 = cfg
            .l2
            .as_ref()
            .map(|u| Level::new(UnitId::L2, u, cfg.clock_hz, tables))
            .transpose()?;
        Ok(Self {
            l1i,
            l1d,
            l2,
            memory: MemoryCounters::default(),
            mem_latency: cfg.mem_latency_cycles,
            line_mask: !(cfg.l1d[0].line_size - 1),
            ready: vec![0; cfg.num_cores as usize],
        })
    }

    fn drain_l2_expirations(&mut self, now: u64) {
        if let Some(l2) = self.l2.as_mut() {
            let dirty = l2.unit.tick_expirations(now).iter().filter(|e| e.dirty).count();
            self.memory.writes += dirty as u64;
        }
    }

    /// A dirty block leaving an L1 at `now`.
    fn writeback_from_l1(&mut self, addr: u64, now: u64) -> Result<(), SimError> {
        match self.l2.as_mut() {
            Some(l2) => {
                let o = l2.unit.access(addr, Op::Write, now)?;
                l2.busy += l2.params.t_write;
                // A full-line writeback allocates without fetching from memory.
                if o.writeback_issued {
                    self.memory.writes += 1;
                }
                self.drain_l2_expirations(now);
            }
            None => self.memory.writes += 1,
        }
        Ok(())
    }

    fn settle(&mut self, now: u64) -> Result<(), SimError> {
        let mut due = Vec::new();
        for (c, (i, d)) in self.l1i.iter_mut().zip(self.l1d.iter_mut()).enumerate() {
            for (kind, level) in [(0u8, i), (1u8, d)] {
                for e in level.unit.tick_expirations(now) {
                    if e.dirty {
                        due.push((e.deadline, c, kind, e.address));
                    }
                }
            }
        }
        due.sort_unstable();
        for (deadline, _, _, addr) in due {
            self.writeback_from_l1(addr, deadline)?;
        }
        self.drain_l2_expirations(now);
        Ok(())
    }

    fn step(&mut self, rec: &AccessRecord) -> Result<(), SimError> {
        let now = rec.timestamp;
        self.settle(now)?;
        let addr = rec.address & self.line_mask;
        let op = if rec.kind.is_write() { Op::Write } else { Op::Read };
        let core = rec.core as usize;
        let l1 = match rec.kind {
            AccessKind::InstrFetch => &mut self.l1i[core],
            AccessKind::Load | AccessKind::Store => &mut self.l1d[core],
        };
        let outcome = l1.unit.access(addr, op, now)?;
        let mut latency = l1.latency(op);
        l1.busy += latency;

        if !outcome.is_hit() {
            let from_memory = match self.l2.as_mut() {
                Some(l2) => {
                    let o = l2.unit.access(addr, Op::Read, now)?;
                    latency += l2.params.t_read;
                    l2.busy += l2.params.t_read;
                    if o.writeback_issued {
                        self.memory.writes += 1;
                    }
                    !o.is_hit()
                }
                None => true,
            };
            if from_memory {
                self.memory.reads += 1;
                latency += self.mem_latency;
            }
            self.drain_l2_expirations(now);
        }
        // The victim leaves once the demand fill has been requested.
        if outcome.writeback_issued {
            let victim = outcome.victim_address.expect("writeback implies a victim");
            self.writeback_from_l1(victim, now)?;
        }

        let issue = now.max(self.ready[core]);
        self.ready[core] = issue + latency;
        Ok(())
    }
}

/// Replays `trace` through the hierarchy described by `cfg`.
pub fn simulate(cfg: &HierarchyConfig, tables: &TechTables, trace: &[AccessRecord]) -> Result<SimReport, SimError> {
    let mut sim = Simulator::new(cfg, tables)?;
    if let Some((index, rec)) = trace.iter().enumerate().find(|(_, r)| r.core >= cfg.num_cores) {
        return Err(SimError::CoreOutOfRange {
            index,
            core: rec.core,
            num_cores: cfg.num_cores,
        });
    }
    let mut order: Vec<usize> = (0..trace.len()).collect();
    order.sort_by_key(|&i| (trace[i].timestamp, trace[i].core));
    for &i in &order {
        sim.step(&trace[i])?;
    }

    let mut units = Vec::new();
    for (i, d) in sim.l1i.iter().zip(sim.l1d.iter()) {
        units.push(i.report());
        units.push(d.report());
    }
    if let Some(l2) = &sim.l2 {
        units.push(l2.report());
    }
    Ok(SimReport {
        clock_hz: cfg.clock_hz,
        units,
        memory: sim.memory,
        mem_energy_per_access: cfg.mem_energy_per_access,
        core_completion_cycles: sim.ready,
        last_timestamp: trace.iter().map(|r| r.timestamp).max().unwrap_or(0),
    })
}
