//! Design-space exploration over retention times.
//!
//! * [`sweep`] simulates an SRAM baseline and one homogeneous STT-RAM
//!   configuration per retention time and normalizes against the baseline.
//! * [`specialize`] picks a retention from a short profiling prefix and
//!   reports what that choice saves over a fixed base retention.
//! * [`assign_asymmetric`] maps threads onto cores whose L1 caches have
//!   different retention times, using profiled per-pair costs and an
//!   exhaustive search over assignments.
//!
//! Candidate simulations are independent and run on the rayon pool; results
//! are always assembled in a fixed order.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::cache::Technology;
use crate::hierarchy::{simulate, EnergyReport, HierarchyConfig, SimError, SimReport, TechTables};
use crate::trace::AccessRecord;

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Objective {
    #[default]
    Energy,
    Time,
    /// Energy-delay product.
    Edp,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Energy, Objective::Time, Objective::Edp];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Energy => "energy",
            Objective::Time => "time",
            Objective::Edp => "edp",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(Objective::Energy),
            "time" | "latency" => Ok(Objective::Time),
            "edp" => Ok(Objective::Edp),
            other => Err(format!("unknown objective `{other}` (expected energy, time or edp)")),
        }
    }
}

/// One simulated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub technology: Technology,
    /// `None` for SRAM.
    pub retention_s: Option<f64>,
    pub report: SimReport,
    pub energy: EnergyReport,
}

impl Evaluation {
    fn run(
        cfg: &HierarchyConfig,
        tables: &TechTables,
        trace: &[AccessRecord],
        technology: Technology,
        retention_s: Option<f64>,
    ) -> Result<Self, SimError> {
        let report = simulate(cfg, tables, trace)?;
        let energy = report.energy();
        Ok(Self {
            technology,
            retention_s,
            report,
            energy,
        })
    }

    /// Total energy of all cache units, in joules.
    pub fn cache_energy(&self) -> f64 {
        self.energy.caches.total
    }

    pub fn time_s(&self) -> f64 {
        self.report.execution_time_s()
    }

    pub fn metric(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Energy => self.cache_energy(),
            Objective::Time => self.time_s(),
            Objective::Edp => self.cache_energy() * self.time_s(),
        }
    }

    pub fn label(&self) -> String {
        match self.retention_s {
            Some(r) => format!("{}@{r:e}", self.technology),
            None => self.technology.to_string(),
        }
    }
}

fn ratio(value: f64, baseline: f64) -> f64 {
    if value == baseline {
        1.0
    } else {
        value / baseline
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eval: Evaluation,
    pub normalized_energy: f64,
    pub normalized_time: f64,
    pub normalized_edp: f64,
}

impl SweepRow {
    pub fn normalized(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Energy => self.normalized_energy,
            Objective::Time => self.normalized_time,
            Objective::Edp => self.normalized_edp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// SRAM baseline first, then retentions in ascending order.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn baseline(&self) -> &SweepRow {
        &self.rows[0]
    }

    /// Retention minimizing `objective`; ties go to the longer retention.
    pub fn best(&self, objective: Objective) -> Option<f64> {
        self.best_row(objective).and_then(|r| r.eval.retention_s)
    }

    pub fn best_row(&self, objective: Objective) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for row in self.rows.iter().filter(|r| r.eval.retention_s.is_some()) {
            if best.is_none_or(|b| row.eval.metric(objective) <= b.eval.metric(objective)) {
                best = Some(row);
            }
        }
        best
    }
}

/// Sorted, de-duplicated copy of `retentions`.
pub fn normalize_retentions(retentions: &[f64]) -> Result<Vec<f64>, ExploreError> {
    if let Some(bad) = retentions.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(ExploreError::Invalid(format!("retention {bad} must be positive and finite")));
    }
    let mut out = retentions.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out.dedup();
    Ok(out)
}

/// Simulates the SRAM version of `template` and one homogeneous STT-RAM
/// version per retention (every cache level at that retention).
pub fn sweep(
    trace: &[AccessRecord],
    template: &HierarchyConfig,
    tables: &TechTables,
    retentions: &[f64],
) -> Result<SweepResult, ExploreError> {
    let retentions = normalize_retentions(retentions)?;
    let mut configs = vec![(Technology::Sram, None)];
    configs.extend(retentions.iter().map(|&r| (Technology::SttRam, Some(r))));
    let evals: Vec<Evaluation> = configs
        .par_iter()
        .map(|&(tech, ret)| {
            let cfg = template.with_uniform_technology(tech, ret.unwrap_or(f64::INFINITY));
            Evaluation::run(&cfg, tables, trace, tech, ret)
        })
        .collect::<Result<_, _>>()?;
    let base_e = evals[0].metric(Objective::Energy);
    let base_t = evals[0].metric(Objective::Time);
    let base_edp = evals[0].metric(Objective::Edp);
    let rows = evals
        .into_iter()
        .map(|eval| SweepRow {
            normalized_energy: ratio(eval.metric(Objective::Energy), base_e),
            normalized_time: ratio(eval.metric(Objective::Time), base_t),
            normalized_edp: ratio(eval.metric(Objective::Edp), base_edp),
            eval,
        })
        .collect();
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecializeResult {
    pub objective: Objective,
    pub sample_len: usize,
    /// Sweep over the profiling prefix.
    pub sample: SweepResult,
    pub chosen_retention: f64,
    pub chosen: Evaluation,
    pub base_retention: f64,
    pub base: Evaluation,
}

impl SpecializeResult {
    /// Fractional improvement of the chosen retention over the base on the
    /// full trace; negative when sampling picked worse than the base.
    pub fn savings(&self) -> f64 {
        let base = self.base.metric(self.objective);
        if base == 0.0 {
            return 0.0;
        }
        (base - self.chosen.metric(self.objective)) / base
    }
}

/// Records in global replay order, `(timestamp, core)`.
fn replay_order(trace: &[AccessRecord]) -> Vec<AccessRecord> {
    let mut sorted = trace.to_vec();
    sorted.sort_by_key(|r| (r.timestamp, r.core));
    sorted
}

/// Chooses a retention from the first `sample_len` accesses (cold caches
/// per candidate), then runs the full trace at the chosen retention and at
/// `base_retention`.
pub fn specialize(
    trace: &[AccessRecord],
    template: &HierarchyConfig,
    tables: &TechTables,
    retentions: &[f64],
    base_retention: f64,
    sample_len: usize,
    objective: Objective,
) -> Result<SpecializeResult, ExploreError> {
    if sample_len == 0 {
        return Err(ExploreError::Invalid("sample length must be at least 1".into()));
    }
    if sample_len > trace.len() {
        return Err(ExploreError::Invalid(format!(
            "sample length {sample_len} exceeds trace length {}",
            trace.len()
        )));
    }
    if retentions.is_empty() {
        return Err(ExploreError::Invalid("no candidate retentions".into()));
    }
    let ordered = replay_order(trace);
    let sample = sweep(&ordered[..sample_len], template, tables, retentions)?;
    let chosen_retention = sample.best(objective).expect("at least one candidate");
    let run = |r: f64| {
        let cfg = template.with_uniform_technology(Technology::SttRam, r);
        Evaluation::run(&cfg, tables, &ordered, Technology::SttRam, Some(r))
    };
    let (chosen, base) = rayon::join(|| run(chosen_retention), || run(base_retention));
    Ok(SpecializeResult {
        objective,
        sample_len,
        sample,
        chosen_retention,
        chosen: chosen?,
        base_retention,
        base: base?,
    })
}

pub const MAX_ASYMMETRIC_CORES: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentPlan {
    /// `mapping[thread] = core`.
    pub mapping: Vec<u32>,
    /// `cost[thread][core]`, profiled under `objective`.
    pub cost: Vec<Vec<f64>>,
    pub objective: Objective,
}

impl AssignmentPlan {
    pub fn profiled_total(&self) -> f64 {
        total_cost(&self.cost, &self.mapping)
    }
}

/// Sum of `cost[t][mapping[t]]` in thread order.
pub fn total_cost(cost: &[Vec<f64>], mapping: &[u32]) -> f64 {
    mapping.iter().enumerate().map(|(t, &c)| cost[t][c as usize]).sum()
}

/// Minimum-cost injective assignment of threads (rows) to cores (columns) by
/// exhaustive search. Among equal-cost assignments the lexicographically
/// smallest mapping wins.
pub fn best_assignment(cost: &[Vec<f64>]) -> Vec<u32> {
    fn search(
        cost: &[Vec<f64>],
        thread: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<u32>,
        best: &mut Option<(f64, Vec<u32>)>,
    ) {
        if thread == cost.len() {
            let total = total_cost(cost, current);
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((total, current.clone()));
            }
            return;
        }
        for core in 0..used.len() {
            if used[core] {
                continue;
            }
            used[core] = true;
            current.push(core as u32);
            search(cost, thread + 1, used, current, best);
            current.pop();
            used[core] = false;
        }
    }

    let cores = cost.first().map_or(0, |r| r.len());
    let mut best = None;
    search(cost, 0, &mut vec![false; cores], &mut Vec::new(), &mut best);
    best.map(|(_, m)| m).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetricResult {
    pub plan: AssignmentPlan,
    pub asymmetric: Evaluation,
    /// One run per distinct core retention, all cores at that retention.
    pub homogeneous: Vec<Evaluation>,
    /// Index into `homogeneous` of the lowest-cost run.
    pub best_homogeneous: usize,
}

impl AsymmetricResult {
    pub fn best_homogeneous(&self) -> &Evaluation {
        &self.homogeneous[self.best_homogeneous]
    }

    /// Asymmetric cost over the best homogeneous cost.
    pub fn normalized(&self) -> f64 {
        ratio(
            self.asymmetric.metric(self.plan.objective),
            self.best_homogeneous().metric(self.plan.objective),
        )
    }
}

fn retarget(trace: &[AccessRecord], core: u32) -> Vec<AccessRecord> {
    trace.iter().map(|r| AccessRecord { core, ..*r }).collect()
}

fn combine(threads: &[Vec<AccessRecord>], mapping: &[u32]) -> Vec<AccessRecord> {
    let mut all: Vec<AccessRecord> = threads
        .iter()
        .zip(mapping)
        .flat_map(|(t, &c)| retarget(t, c))
        .collect();
    all.sort_by_key(|r| (r.timestamp, r.core));
    all
}

/// Profiles every thread on every core's L1 caches, assigns threads to
/// cores, and compares the full run against the best homogeneous retention.
///
/// `template` carries the per-core L1 configurations; its L2 (if any) is
/// shared by all runs but excluded from profiling. Thread traces ignore
/// their recorded core ids.
pub fn assign_asymmetric(
    threads: &[Vec<AccessRecord>],
    template: &HierarchyConfig,
    tables: &TechTables,
    profile_len: usize,
    objective: Objective,
) -> Result<AsymmetricResult, ExploreError> {
    template.validate()?;
    let cores = template.num_cores;
    if cores > MAX_ASYMMETRIC_CORES {
        return Err(ExploreError::Invalid(format!(
            "exhaustive assignment supports at most {MAX_ASYMMETRIC_CORES} cores, got {cores}"
        )));
    }
    if threads.is_empty() || threads.len() > cores as usize {
        return Err(ExploreError::Invalid(format!(
            "need between 1 and {cores} threads (one per core), got {}",
            threads.len()
        )));
    }
    if profile_len == 0 {
        return Err(ExploreError::Invalid("profile length must be at least 1".into()));
    }

    let pairs: Vec<(usize, u32)> = (0..threads.len())
        .flat_map(|t| (0..cores).map(move |c| (t, c)))
        .collect();
    let costs: Vec<f64> = pairs
        .par_iter()
        .map(|&(t, c)| {
            let mut cfg = HierarchyConfig::new(1, template.l1d[c as usize].clone()).without_l2();
            cfg.l1i = vec![template.l1i[c as usize].clone()];
            cfg.clock_hz = template.clock_hz;
            cfg.mem_latency_cycles = template.mem_latency_cycles;
            cfg.mem_energy_per_access = template.mem_energy_per_access;
            let prefix = &threads[t][..profile_len.min(threads[t].len())];
            let l1 = cfg.l1d[0].clone();
            Evaluation::run(&cfg, tables, &retarget(prefix, 0), l1.technology, l1.retention())
                .map(|e| e.metric(objective))
        })
        .collect::<Result<_, _>>()?;
    let cost: Vec<Vec<f64>> = costs.chunks(cores as usize).map(|c| c.to_vec()).collect();
    let mapping = best_assignment(&cost);
    let plan = AssignmentPlan {
        mapping,
        cost,
        objective,
    };

    let mut kinds: Vec<(Technology, Option<f64>)> = Vec::new();
    for u in &template.l1d {
        let k = (u.technology, u.retention());
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    kinds.sort_by(|a, b| a.partial_cmp(b).expect("finite retention"));

    let identity: Vec<u32> = (0..threads.len() as u32).collect();
    let asym_trace = combine(threads, &plan.mapping);
    let homo_trace = combine(threads, &identity);
    let (asymmetric, homogeneous) = rayon::join(
        || {
            let l1 = &template.l1d[0];
            Evaluation::run(template, tables, &asym_trace, l1.technology, None)
        },
        || {
            kinds
                .par_iter()
                .map(|&(tech, ret)| {
                    let mut cfg = template.clone();
                    for c in 0..cores {
                        cfg = cfg.with_core_l1(c, tech, ret.unwrap_or(f64::INFINITY));
                    }
                    Evaluation::run(&cfg, tables, &homo_trace, tech, ret)
                })
                .collect::<Result<Vec<_>, _>>()
        },
    );
    let asymmetric = asymmetric?;
    let homogeneous = homogeneous?;
    let mut best_homogeneous = 0;
    for (i, e) in homogeneous.iter().enumerate() {
        if e.metric(objective) <= homogeneous[best_homogeneous].metric(objective) {
            best_homogeneous = i;
        }
    }
    Ok(AsymmetricResult {
        plan,
        asymmetric,
        homogeneous,
        best_homogeneous,
    })
}
