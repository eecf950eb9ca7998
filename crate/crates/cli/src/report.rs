//! CSV report builders. Floats are printed in scientific notation with nine
//! significant digits so reports are byte-stable across platforms.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sttsim::characterize::{ExpirationPoint, LifetimeHistogram, LifetimeReport, PersistenceReport, ReadWriteRatio};
use sttsim::explore::{AsymmetricResult, Objective, SpecializeResult, SweepResult};
use sttsim::hierarchy::SimReport;

pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn retention(x: Option<f64>) -> String {
    opt_num(x)
}

/// In-memory CSV table with a fixed header.
pub struct Table {
    name: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self {
            name: name.to_string(),
            writer,
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    /// Writes the table to `dir/<name>` through a temporary file and rename.
    pub fn write_to(self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(&self.name);
        write_atomic(&path, &self.into_bytes())?;
        Ok(path)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn simulate_tables(report: &SimReport) -> Vec<Table> {
    let energy = report.energy();
    let time = num(report.execution_time_s());
    let mut units = Table::new(
        "simulate.csv",
        &[
            "unit",
            "accesses",
            "hits",
            "miss_compulsory",
            "miss_replacement",
            "miss_expiration",
            "writebacks",
            "e_read_J",
            "e_write_J",
            "e_leak_J",
            "e_total_J",
            "time_s",
        ],
    );
    for (u, (_, e)) in report.units.iter().zip(&energy.per_unit) {
        let c = &u.counters;
        units.row([
            u.id.to_string(),
            c.accesses.to_string(),
            c.hits().to_string(),
            c.miss_compulsory.to_string(),
            c.miss_replacement.to_string(),
            c.miss_expiration.to_string(),
            c.writebacks.to_string(),
            num(e.dynamic_read),
            num(e.dynamic_write),
            num(e.leakage),
            num(e.total),
            time.clone(),
        ]);
    }
    let m = report.memory;
    let per = report.mem_energy_per_access;
    units.row([
        "memory".to_string(),
        m.accesses().to_string(),
        "0".into(),
        "0".into(),
        "0".into(),
        "0".into(),
        "0".into(),
        num(m.reads as f64 * per),
        num(m.writes as f64 * per),
        num(0.0),
        num(energy.memory_j),
        time,
    ]);

    let mut cores = Table::new("simulate_cores.csv", &["core", "completion_cycles", "completion_s"]);
    for (i, (&cyc, s)) in report
        .core_completion_cycles
        .iter()
        .zip(report.core_completion_s())
        .enumerate()
    {
        cores.row([i.to_string(), cyc.to_string(), num(s)]);
    }
    let mut capacity = Table::new(
        "simulate_capacity.csv",
        &["unit", "size_bytes", "blocks", "counter_bits_per_block", "counter_overhead_bits"],
    );
    for u in &report.units {
        let c = &u.config;
        capacity.row([
            u.id.to_string(),
            c.size_bytes.to_string(),
            c.num_blocks().to_string(),
            c.counter_bits_per_block().to_string(),
            c.counter_overhead_bits().to_string(),
        ]);
    }
    vec![units, cores, capacity]
}

pub fn rwratio_table(ratio: &ReadWriteRatio) -> Table {
    let mut t = Table::new("rwratio.csv", &["scope", "loads", "stores", "read_fraction"]);
    let rows = ratio
        .per_core
        .iter()
        .map(|(c, v)| (format!("core{c}"), *v))
        .chain(std::iter::once(("all".to_string(), ratio.aggregate)));
    for (scope, v) in rows {
        t.row([scope, v.loads.to_string(), v.stores.to_string(), opt_num(v.read_fraction())]);
    }
    t
}

pub fn lifetimes_table(rows: &[(String, LifetimeReport)]) -> Table {
    let mut header = vec!["unit", "measure", "residencies"];
    header.extend(LifetimeHistogram::LABELS);
    header.extend(["p50_s", "p90_s", "p99_s"]);
    let mut t = Table::new("lifetimes.csv", &header);
    for (unit, r) in rows {
        for (measure, h) in [("last_hit", &r.until_last_hit), ("eviction", &r.until_eviction)] {
            let mut fields = vec![unit.clone(), measure.to_string(), r.residencies.to_string()];
            fields.extend(h.counts.iter().map(|c| c.to_string()));
            fields.extend([opt_num(h.p50_s), opt_num(h.p90_s), opt_num(h.p99_s)]);
            t.row(fields);
        }
    }
    t
}

pub fn persistence_table(rows: &[(String, PersistenceReport)]) -> Table {
    let mut t = Table::new("persistence.csv", &["unit", "thd", "fraction", "unique_blocks", "total_loads"]);
    for (unit, p) in rows {
        for &(thd, f) in &p.fractions {
            t.row([
                unit.clone(),
                thd.to_string(),
                num(f),
                p.unique_blocks.to_string(),
                p.total_loads.to_string(),
            ]);
        }
    }
    t
}

pub fn expiration_table(rows: &[(String, Vec<ExpirationPoint>)]) -> Table {
    let mut t = Table::new(
        "expiration_curve.csv",
        &[
            "unit",
            "retention_s",
            "expiration_misses",
            "total_misses",
            "ratio_to_unbounded",
            "differential_misses",
        ],
    );
    for (unit, points) in rows {
        for p in points {
            t.row([
                unit.clone(),
                num(p.retention_s),
                p.expiration_misses.to_string(),
                p.total_misses.to_string(),
                num(p.ratio_to_unbounded),
                p.differential_misses.to_string(),
            ]);
        }
    }
    t
}

pub fn sweep_tables(result: &SweepResult) -> Vec<Table> {
    let mut t = Table::new(
        "sweep.csv",
        &[
            "config",
            "technology",
            "retention_s",
            "accesses",
            "misses",
            "miss_expiration",
            "writebacks",
            "mem_accesses",
            "e_cache_J",
            "e_mem_J",
            "time_s",
            "normalized_energy",
            "normalized_time",
            "normalized_edp",
        ],
    );
    for row in &result.rows {
        let e = &row.eval;
        let c = e.report.aggregate(|_| true);
        t.row([
            e.label(),
            e.technology.to_string(),
            retention(e.retention_s),
            c.accesses.to_string(),
            c.misses().to_string(),
            c.miss_expiration.to_string(),
            c.writebacks.to_string(),
            e.report.memory.accesses().to_string(),
            num(e.cache_energy()),
            num(e.energy.memory_j),
            num(e.time_s()),
            num(row.normalized_energy),
            num(row.normalized_time),
            num(row.normalized_edp),
        ]);
    }
    let mut best = Table::new("sweep_best.csv", &["objective", "best_retention_s", "normalized_value"]);
    for obj in Objective::ALL {
        let row = result.best_row(obj);
        best.row([
            obj.to_string(),
            retention(row.and_then(|r| r.eval.retention_s)),
            opt_num(row.map(|r| r.normalized(obj))),
        ]);
    }
    vec![t, best]
}

pub fn specialize_tables(results: &[SpecializeResult]) -> Vec<Table> {
    let mut summary = Table::new(
        "specialize.csv",
        &[
            "base_retention_s",
            "objective",
            "sample_len",
            "chosen_retention_s",
            "chosen_metric",
            "base_metric",
            "savings",
        ],
    );
    for r in results {
        summary.row([
            num(r.base_retention),
            r.objective.to_string(),
            r.sample_len.to_string(),
            num(r.chosen_retention),
            num(r.chosen.metric(r.objective)),
            num(r.base.metric(r.objective)),
            num(r.savings()),
        ]);
    }
    let mut tables = vec![summary];
    if let Some(first) = results.first() {
        let mut sample = sweep_tables(&first.sample).swap_remove(0);
        sample.name = "specialize_sample.csv".into();
        tables.push(sample);
    }
    tables
}

pub fn asym_tables(result: &AsymmetricResult, core_retentions: &[Option<f64>]) -> Vec<Table> {
    let obj = result.plan.objective;
    let mut matrix = Table::new(
        "asym_matrix.csv",
        &["thread", "core", "core_retention_s", &format!("profiled_{obj}")],
    );
    for (t, row) in result.plan.cost.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            matrix.row([t.to_string(), c.to_string(), retention(core_retentions[c]), num(*v)]);
        }
    }
    let mut plan = Table::new("asym_plan.csv", &["thread", "core", "core_retention_s"]);
    for (t, &c) in result.plan.mapping.iter().enumerate() {
        plan.row([t.to_string(), c.to_string(), retention(core_retentions[c as usize])]);
    }
    let mut summary = Table::new(
        "asym.csv",
        &["config", "retention_s", "e_cache_J", "time_s", "metric", "normalized", "migration_cost"],
    );
    let best = result.best_homogeneous().metric(obj);
    let norm = |v: f64| if v == best { 1.0 } else { v / best };
    let a = &result.asymmetric;
    summary.row([
        "asymmetric".to_string(),
        String::new(),
        num(a.cache_energy()),
        num(a.time_s()),
        num(a.metric(obj)),
        num(norm(a.metric(obj))),
        "not modeled".to_string(),
    ]);
    for h in &result.homogeneous {
        summary.row([
            format!("homogeneous {}", h.label()),
            retention(h.retention_s),
            num(h.cache_energy()),
            num(h.time_s()),
            num(h.metric(obj)),
            num(norm(h.metric(obj))),
            String::new(),
        ]);
    }
    vec![matrix, plan, summary]
}
