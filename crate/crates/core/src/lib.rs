//! Trace-driven simulation of reduced-retention STT-RAM caches.
//!
//! The crate is organised bottom-up:
//!
//! * [`trace`]: access records, the text trace format and synthetic generators.
//! * [`cache`]: one set-associative cache unit with per-block retention
//!   counters and compulsory / replacement / expiration miss classification.
//! * [`energy`]: technology parameter tables and per-unit energy.
//! * [`hierarchy`]: private L1s, an optional shared L2 and memory.
//! * [`characterize`]: workload analyses (read/write mix, block lifetimes,
//!   persistence, expiration misses across retention times).
//! * [`explore`]: retention sweeps, sampling-based specialization and
//!   asymmetric-retention thread assignment.

pub mod cache;
pub mod characterize;
pub mod energy;
pub mod explore;
pub mod hierarchy;
pub mod trace;

pub use cache::{
    time_to_seconds, AccessOutcome, CacheError, CacheUnit, CacheUnitConfig, ExpiryMode, Lookup, MissClass, Op,
    RefreshPolicy, Technology, UnitCounters,
};
pub use energy::{load_tech_table, unit_energy, EnergyBreakdown, TechParams, TechTable, TechTableError};
pub use hierarchy::{simulate, HierarchyConfig, SimError, SimReport, TechTables, UnitId};
pub use trace::{
    generate_trace, read_trace, write_trace, AccessKind, AccessRecord, AddressPattern, GapDistribution,
    SyntheticTraceSpec, TraceError,
};
