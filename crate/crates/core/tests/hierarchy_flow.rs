#[path = "support/tables.rs"]
mod tables;

use proptest::prelude::*;
use sttsim::hierarchy::UnitId;
use sttsim::{simulate, AccessKind, AccessRecord, CacheUnitConfig, HierarchyConfig, Technology};

fn small_l1() -> CacheUnitConfig {
    CacheUnitConfig::sram(8 * 2 * 64, 2, 64)
}

fn small_l2() -> CacheUnitConfig {
    CacheUnitConfig::sram(32 * 4 * 64, 4, 64)
}

fn trace() -> impl Strategy<Value = Vec<AccessRecord>> {
    prop::collection::vec((0u32..4, 0u64..20_000, 0u8..3, 0u64..96), 1..600).prop_map(|raw| {
        let mut t: Vec<AccessRecord> = raw
            .into_iter()
            .map(|(core, ts, k, block)| {
                let kind = [AccessKind::InstrFetch, AccessKind::Load, AccessKind::Store][k as usize];
                // Half the blocks are shared between cores.
                let addr = if block < 48 { block * 64 } else { ((core as u64 + 1) << 20) + block * 64 };
                AccessRecord::new(core, ts * 50, kind, addr)
            })
            .collect();
        t.sort_by_key(|r| (r.core, r.timestamp));
        t
    })
}

fn hierarchy(retention: Option<f64>) -> HierarchyConfig {
    let h = HierarchyConfig::new(4, small_l1()).with_l2(small_l2());
    match retention {
        Some(r) => h.with_uniform_technology(Technology::SttRam, r),
        None => h,
    }
}

fn l1s(h: &HierarchyConfig) -> impl Iterator<Item = UnitId> {
    (0..h.num_cores).flat_map(|c| [UnitId::L1I(c), UnitId::L1D(c)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn level_flow_is_conserved(
        t in trace(),
        retention in prop::sample::select(vec![None, Some(1e-6), Some(1e-5), Some(1e-4)]),
    ) {
        let cfg = hierarchy(retention);
        let r = simulate(&cfg, &tables::tables(), &t).unwrap();
        for u in &r.units {
            let c = &u.counters;
            prop_assert_eq!(c.hits() + c.misses(), c.accesses, "{}", u.id);
            prop_assert_eq!(c.miss_compulsory + c.miss_replacement + c.miss_expiration, c.misses());
            if retention.is_none() {
                prop_assert_eq!(c.miss_expiration, 0);
            }
        }
        let l1 = r.aggregate(|id| id != UnitId::L2);
        prop_assert_eq!(l1.accesses as usize, t.len());
        let l2 = r.unit(UnitId::L2).unwrap().counters;
        prop_assert_eq!(l2.accesses, l1.misses() + l1.writebacks);
        prop_assert_eq!(r.memory.writes, l2.writebacks);
        prop_assert!(r.memory.reads <= l2.misses());
    }

    #[test]
    fn l1_behaviour_does_not_depend_on_l2(
        t in trace(),
        retention in prop::sample::select(vec![None, Some(1e-6), Some(1e-5)]),
    ) {
        let with = hierarchy(retention);
        let without = with.clone().without_l2();
        let a = simulate(&with, &tables::tables(), &t).unwrap();
        let b = simulate(&without, &tables::tables(), &t).unwrap();
        for id in l1s(&with) {
            prop_assert_eq!(a.unit(id).unwrap().counters, b.unit(id).unwrap().counters, "{}", id);
        }
        let l1 = b.aggregate(|_| true);
        prop_assert_eq!(b.memory.reads, l1.misses());
        prop_assert_eq!(b.memory.writes, l1.writebacks);
        // A shared L2 only filters traffic to memory.
        prop_assert!(a.memory.reads <= b.memory.reads);
    }

    #[test]
    fn completion_times_cover_the_trace(t in trace()) {
        let cfg = hierarchy(Some(1e-5));
        let r = simulate(&cfg, &tables::tables(), &t).unwrap();
        for core in 0..4u32 {
            let last = t.iter().filter(|x| x.core == core).map(|x| x.timestamp).max();
            if let Some(last) = last {
                prop_assert!(r.core_completion_cycles[core as usize] > last);
            }
        }
        prop_assert_eq!(r.execution_cycles(), *r.core_completion_cycles.iter().max().unwrap());
    }
}

#[test]
fn shorter_retention_costs_less_energy_than_sram_on_a_dense_stream() {
    // Dense reuse: everything fits and is touched well within 1us.
    let mut t = Vec::new();
    for i in 0..20_000u64 {
        let kind = if i % 3 == 0 { AccessKind::Store } else { AccessKind::Load };
        t.push(AccessRecord::new(0, i * 2, kind, (i % 64) * 64));
    }
    let base = HierarchyConfig::new(1, CacheUnitConfig::default_l1());
    let tables = tables::tables();
    let sram = simulate(&base, &tables, &t).unwrap();
    let stt = simulate(&base.with_uniform_technology(Technology::SttRam, 1e-6), &tables, &t).unwrap();
    let (es, et) = (sram.energy().caches.total, stt.energy().caches.total);
    assert!(et < es, "sttram {et} vs sram {es}");
}
