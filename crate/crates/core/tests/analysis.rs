#[path = "support/oracle.rs"]
mod oracle;
#[path = "support/tables.rs"]
mod tables;

use std::collections::HashMap;

use oracle::{Oracle, Outcome};
use proptest::prelude::*;
use sttsim::characterize::{block_lifetimes, expiration_curve, persistence, LifetimeHistogram};
use sttsim::explore::{best_assignment, specialize, sweep, total_cost, Objective};
use sttsim::trace::{generate_reuse_trace, ReuseGapSpec};
use sttsim::{
    generate_trace, AccessKind, AccessRecord, AddressPattern, CacheUnitConfig, GapDistribution, HierarchyConfig,
    SyntheticTraceSpec, TechTables,
};

const HZ: f64 = 1e9;

fn stream() -> impl Strategy<Value = Vec<AccessRecord>> {
    prop::collection::vec((0u64..40, any::<bool>(), 1u64..500), 1..800).prop_map(|raw| {
        let mut t = 0;
        raw.into_iter()
            .map(|(b, w, gap)| {
                t += gap;
                let kind = if w { AccessKind::Store } else { AccessKind::Load };
                AccessRecord::new(0, t, kind, b * 64)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persistence_matches_recount(s in stream(), sets in prop::sample::select(vec![1usize, 4])) {
        let cfg = CacheUnitConfig::sram(sets as u64 * 2 * 64, 2, 64);
        let p = persistence(&s, &cfg, HZ).unwrap();
        let mut o = Oracle::new(sets, 2, 64, None, false);
        let mut reloads: HashMap<u64, u64> = HashMap::new();
        for r in &s {
            let (out, _) = o.access(r.address, r.kind.is_write(), r.timestamp);
            let e = reloads.entry(r.address).or_insert(0);
            if out != Outcome::Hit && out != Outcome::Compulsory {
                *e += 1;
            }
        }
        prop_assert_eq!(p.unique_blocks as usize, reloads.len());
        prop_assert_eq!(p.total_loads, o.totals.fills);
        for (thd, frac) in p.fractions {
            let n = reloads.values().filter(|&&c| c >= thd).count();
            prop_assert_eq!(frac, n as f64 / reloads.len() as f64);
        }
    }

    #[test]
    fn expiration_curve_reports_every_retention(s in stream()) {
        let cfg = CacheUnitConfig::sram(4 * 2 * 64, 2, 64);
        let rets = [1e-4, 1e-7, 1e-6];
        let pts = expiration_curve(&s, &cfg, HZ, &rets).unwrap();
        prop_assert_eq!(pts.iter().map(|p| p.retention_s).collect::<Vec<_>>(), vec![1e-7, 1e-6, 1e-4]);
        for p in &pts {
            prop_assert!(p.expiration_misses <= p.total_misses);
        }
    }

    #[test]
    fn exhaustive_assignment_is_optimal(
        cost in (1usize..=6).prop_flat_map(|cores| {
            (1..=cores).prop_flat_map(move |threads| {
                prop::collection::vec(prop::collection::vec(0u32..1000, cores), threads)
            })
        })
    ) {
        let cost: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|&v| v as f64 * 0.125).collect()).collect();
        let chosen = best_assignment(&cost);
        let cores = cost[0].len();
        let mut seen = chosen.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), cost.len(), "mapping must be injective");
        let best = total_cost(&cost, &chosen);
        for m in injections(cost.len(), cores) {
            prop_assert!(best <= total_cost(&cost, &m));
        }
    }
}

/// Every injective map from `threads` to `cores`, independently enumerated
/// by counting in base `cores`.
fn injections(threads: usize, cores: usize) -> Vec<Vec<u32>> {
    let total = (cores as u64).pow(threads as u32);
    (0..total)
        .map(|mut n| {
            (0..threads)
                .map(|_| {
                    let d = (n % cores as u64) as u32;
                    n /= cores as u64;
                    d
                })
                .collect::<Vec<u32>>()
        })
        .filter(|m| {
            let mut s = m.clone();
            s.sort_unstable();
            s.dedup();
            s.len() == m.len()
        })
        .collect()
}

#[test]
fn loop_lifetimes_land_in_one_bucket() {
    // 1024 blocks cycled through a 512-block 4-way cache: every residency ends
    // after 512 accesses, i.e. 51.2us at 100 cycles per access.
    let cfg = CacheUnitConfig::default_l1();
    let trace: Vec<AccessRecord> = (0..8192u64)
        .map(|i| AccessRecord::new(0, i * 100, AccessKind::Load, (i % 1024) * 64))
        .collect();
    let r = block_lifetimes(&trace, &cfg, HZ).unwrap();
    assert_eq!(r.fills, 8192);
    assert_eq!(r.residencies, 8192 - 512);
    assert_eq!(r.still_resident, 512);
    assert_eq!(r.until_eviction.counts[2], r.residencies);
    assert_eq!(r.until_eviction.p50_s, Some(51_200.0 / HZ));
    assert_eq!(r.until_last_hit.counts[0], r.residencies);
    assert_eq!(LifetimeHistogram::LABELS[2], "10us-100us");
}

#[test]
fn reuse_gap_curve_is_non_increasing() {
    let trace = generate_reuse_trace(&ReuseGapSpec {
        seed: 5,
        core: 0,
        blocks: 256,
        base_address: 0,
        line_size: 64,
        reuse_gap: GapDistribution::LogUniform { lo: 190_000, hi: 95_000_000 },
        duration_cycles: 120_000_000,
        write_fraction: 0.3,
    })
    .unwrap();
    let rets = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
    let pts = expiration_curve(&trace, &CacheUnitConfig::default_l1(), 1.9e9, &rets).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].expiration_misses <= w[0].expiration_misses, "{:?}", pts);
    }
    assert!(pts[0].expiration_misses > 0);
}

fn synthetic(seed: u64) -> Vec<AccessRecord> {
    generate_trace(&SyntheticTraceSpec {
        seed,
        num_cores: 2,
        accesses_per_core: 3000,
        read_fraction: 0.6,
        working_set_blocks: 600,
        gap: GapDistribution::LogUniform { lo: 1, hi: 100_000 },
        pattern: AddressPattern::Zipf(0.8),
        line_size: 64,
        instr_fraction: 0.2,
    })
    .unwrap()
}

#[test]
fn full_length_sample_picks_the_sweep_optimum() {
    let tables = tables::tables();
    let template = HierarchyConfig::new(2, CacheUnitConfig::default_l1()).with_l2(CacheUnitConfig::default_l2());
    for seed in 1..=3 {
        let trace = synthetic(seed);
        let s = sweep(&trace, &template, &tables, &tables::RETENTIONS).unwrap();
        for obj in Objective::ALL {
            let r = specialize(&trace, &template, &tables, &tables::RETENTIONS, 1e-3, trace.len(), obj).unwrap();
            assert_eq!(Some(r.chosen_retention), s.best(obj), "seed {seed} {obj}");
            let best = s.best_row(obj).unwrap();
            assert_eq!(r.chosen.metric(obj), best.eval.metric(obj));
            assert!(r.savings() >= 0.0);
        }
    }
}

#[test]
fn sweep_normalizes_against_sram() {
    let trace = synthetic(9);
    let template = HierarchyConfig::new(2, CacheUnitConfig::default_l1());
    let tables = TechTables::single(tables::l1_table());
    let s = sweep(&trace, &template, &tables, &[1e-3, 1e-6, 1e-3]).unwrap();
    assert_eq!(s.rows.len(), 3);
    assert_eq!(s.baseline().normalized_energy, 1.0);
    assert_eq!(s.baseline().normalized_edp, 1.0);
    assert_eq!(s.rows[1].eval.retention_s, Some(1e-6));
    let sram_e = s.baseline().eval.cache_energy();
    for r in &s.rows[1..] {
        assert_eq!(r.normalized_energy, r.eval.cache_energy() / sram_e);
    }
}

fn l1_only(cores: u32) -> HierarchyConfig {
    HierarchyConfig::new(cores, CacheUnitConfig::default_l1()).without_l2()
}

fn reuse(seed: u64, base_address: u64, blocks: u64, lo_s: f64, hi_s: f64, duration_s: f64, write_fraction: f64) -> Vec<AccessRecord> {
    let c = |s: f64| (s * 1.9e9) as u64;
    generate_reuse_trace(&ReuseGapSpec {
        seed,
        core: 0,
        blocks,
        base_address,
        line_size: 64,
        reuse_gap: GapDistribution::LogUniform { lo: c(lo_s), hi: c(hi_s) },
        duration_cycles: c(duration_s),
        write_fraction,
    })
    .unwrap()
}

fn merged(mut parts: Vec<AccessRecord>) -> Vec<AccessRecord> {
    parts.sort_by_key(|r| (r.timestamp, r.address));
    parts
}

#[test]
fn two_and_twenty_ms_reuse_prefers_long_retention() {
    let tables = tables::tables();
    for seed in 1..=3 {
        let mut t = reuse(seed, 0, 128, 1.8e-3, 2.2e-3, 0.3, 0.3);
        t.extend(reuse(seed + 100, 128 * 64, 128, 18e-3, 22e-3, 0.3, 0.3));
        let t = merged(t);
        // Every L1 miss pays for an L2 access here, so refills are not free.
        {
            let template = l1_only(1).with_l2(CacheUnitConfig::default_l2());
            let s = sweep(&t, &template, &tables, &tables::RETENTIONS[..6]).unwrap();
            let best = s.best(Objective::Energy).unwrap();
            assert!(best == 1e-2 || best == 1e-1, "seed {seed}: best {best}");
        }
    }
}

#[test]
fn representative_profile_matches_full_trace_argmin() {
    let tables = tables::tables();
    let template = l1_only(1).with_l2(CacheUnitConfig::default_l2());
    let t = merged(reuse(4, 0, 256, 1e-3, 4e-3, 0.1, 0.4));
    let full = sweep(&t, &template, &tables, &tables::RETENTIONS).unwrap();
    let r = specialize(&t, &template, &tables, &tables::RETENTIONS, 1e-1, t.len() * 3 / 10, Objective::Energy).unwrap();
    assert_eq!(Some(r.chosen_retention), full.best(Objective::Energy));
}

#[test]
fn phase_change_can_mislead_sampling() {
    // Phase 1 (first 3ms): dense stores, cheapest at 1ms. Phase 2: sparse
    // loads with ~30ms reuse, cheapest at 100ms, and it dominates the run.
    let tables = tables::tables();
    let template = l1_only(1);
    let candidates = [1e-3, 1e-2, 1e-1];
    let mut phase1 = Vec::new();
    for k in 0..15u64 {
        for b in 0..64u64 {
            phase1.push(AccessRecord::new(0, k * 380_000 + b * 100, AccessKind::Store, b * 64));
        }
    }
    let sample_len = phase1.len();
    let shift = 3 * 1_900_000;
    let phase2 = reuse(7, 64 * 64, 320, 25e-3, 35e-3, 0.57, 0.0)
        .into_iter()
        .map(|r| AccessRecord { timestamp: r.timestamp + shift, ..r });
    let t = merged(phase1.into_iter().chain(phase2).collect());

    let full = sweep(&t, &template, &tables, &candidates).unwrap();
    assert_eq!(full.best(Objective::Energy), Some(1e-1));
    let r = specialize(&t, &template, &tables, &candidates, 1e-1, sample_len, Objective::Energy).unwrap();
    assert_eq!(r.chosen_retention, 1e-3);
    assert!(r.savings() < 0.0, "savings {}", r.savings());
}

#[test]
fn expiring_writes_can_cost_more_than_sram() {
    // Leakage is equal for both technologies so refill cost decides.
    let leak = 1e-3;
    let table = sttsim::TechTable::from_rows(vec![
        sttsim::TechParams {
            technology: sttsim::Technology::Sram,
            retention_s: None,
            e_read: 12e-12,
            e_write: 12e-12,
            p_leak: leak,
            t_read: 2,
            t_write: 2,
        },
        sttsim::TechParams {
            technology: sttsim::Technology::SttRam,
            retention_s: Some(1e-6),
            e_read: 8e-12,
            e_write: 10e-12,
            p_leak: leak,
            t_read: 2,
            t_write: 2,
        },
    ])
    .unwrap();
    let tables = TechTables::single(table);
    // Every block is rewritten every 5us, so each store at 1us is a refill
    // that also writes back the expired dirty copy.
    let t: Vec<AccessRecord> = (0..20_000u64)
        .map(|i| AccessRecord::new(0, i * 150, AccessKind::Store, (i % 64) * 64))
        .collect();
    let s = sweep(&t, &l1_only(1), &tables, &[1e-6]).unwrap();
    let stt = &s.rows[1];
    assert!(stt.eval.report.aggregate(|_| true).miss_expiration > 19_000);
    assert!(stt.normalized_energy > 1.0, "normalized {}", stt.normalized_energy);
}
