//! Shared workloads for the criterion benchmarks.

use sttsim::{
    generate_trace, AccessRecord, AddressPattern, CacheUnitConfig, GapDistribution, SyntheticTraceSpec, TechParams,
    TechTable, TechTables, Technology,
};

/// A multi-core synthetic trace with mixed reuse.
pub fn workload(cores: u32, accesses_per_core: u64, seed: u64) -> Vec<AccessRecord> {
    generate_trace(&SyntheticTraceSpec {
        seed,
        num_cores: cores,
        accesses_per_core,
        read_fraction: 0.7,
        working_set_blocks: 4096,
        gap: GapDistribution::LogUniform { lo: 1, hi: 20_000 },
        pattern: AddressPattern::Zipf(0.9),
        line_size: 64,
        instr_fraction: 0.2,
    })
    .expect("valid spec")
}

/// SRAM plus STT-RAM rows for every retention in `retentions`.
pub fn tables(retentions: &[f64]) -> TechTables {
    let mut rows = vec![TechParams {
        technology: Technology::Sram,
        retention_s: None,
        e_read: 12e-12,
        e_write: 12e-12,
        p_leak: 15e-3,
        t_read: 2,
        t_write: 2,
    }];
    for (i, &r) in retentions.iter().enumerate() {
        rows.push(TechParams {
            technology: Technology::SttRam,
            retention_s: Some(r),
            e_read: 8e-12,
            e_write: 10e-12 + i as f64 * 3e-12,
            p_leak: 1.5e-3,
            t_read: 2,
            t_write: 2 + i as u64,
        });
    }
    TechTables::single(TechTable::from_rows(rows).expect("distinct rows"))
}

pub fn l1() -> CacheUnitConfig {
    CacheUnitConfig::default_l1()
}
