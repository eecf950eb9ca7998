//! Experiment configuration file.
//!
//! A sectioned key-value (TOML) file. Every key is optional; omitted keys take
//! the defaults below. Relative paths are resolved against the directory
//! holding the config file.
//!
//! ```toml
//! [experiment]
//! trace = "trace.txt"            # or a [synthetic] section, not both
//! tech_table = "tech_l1.txt"
//! l2_tech_table = "tech_l2.txt"  # defaults to tech_table
//! retentions = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
//! objective = "energy"           # energy | time | edp
//! profile_len = 10000
//! base_retentions = [1e-3, 1e-2, 1e-1]
//! out_dir = "out"
//!
//! [hierarchy]
//! num_cores = 1                  # default: taken from the trace
//! clock_hz = 1.9e9
//! mem_latency_cycles = 100
//! mem_energy_per_access = 2e-9
//!
//! [l1]                           # shared by L1I and L1D; [l1i]/[l1d] override
//! size_bytes = 32768
//! associativity = 4
//! line_size = 64
//! technology = "STTRAM"
//! retention = 1e-3
//! counter_states = 4
//! refresh = "writes"             # writes | any
//!
//! [l2]                           # present => shared L2 (2MB, 16-way defaults)
//!
//! [asym]
//! core_retentions = [1e-3, 1e-2, 1e-1, 1e-3]
//! threads = ["t0.txt", "t1.txt"] # default: one thread per core of the trace
//!
//! [synthetic]
//! seed = 1
//! num_cores = 1
//! accesses_per_core = 10000
//! read_fraction = 0.67
//! working_set_blocks = 256
//! gap = 10                       # or gap_lo / gap_hi for log-uniform
//! pattern = "uniform"            # sequential | uniform | zipf
//! zipf_s = 1.0
//! instr_fraction = 0.0
//! line_size = 64
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sttsim::cache::RefreshPolicy;
use sttsim::explore::Objective;
use sttsim::hierarchy::{DEFAULT_CLOCK_HZ, DEFAULT_MEM_ENERGY_J, DEFAULT_MEM_LATENCY_CYCLES};
use sttsim::{AddressPattern, CacheUnitConfig, GapDistribution, HierarchyConfig, SyntheticTraceSpec, Technology};

pub const DEFAULT_RETENTIONS: [f64; 6] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
pub const DEFAULT_PROFILE_LEN: usize = 10_000;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    hierarchy: RawHierarchy,
    #[serde(default)]
    l1: RawUnit,
    l1i: Option<RawUnit>,
    l1d: Option<RawUnit>,
    l2: Option<RawUnit>,
    asym: Option<RawAsym>,
    synthetic: Option<RawSynthetic>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    trace: Option<PathBuf>,
    tech_table: Option<PathBuf>,
    l2_tech_table: Option<PathBuf>,
    retentions: Option<Vec<f64>>,
    objective: Option<String>,
    profile_len: Option<usize>,
    base_retentions: Option<Vec<f64>>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHierarchy {
    num_cores: Option<u32>,
    clock_hz: Option<f64>,
    mem_latency_cycles: Option<u64>,
    mem_energy_per_access: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnit {
    size_bytes: Option<u64>,
    associativity: Option<u32>,
    line_size: Option<u64>,
    technology: Option<String>,
    retention: Option<f64>,
    counter_states: Option<u32>,
    refresh: Option<String>,
}

impl RawUnit {
    fn overlay(&self, over: &RawUnit) -> RawUnit {
        RawUnit {
            size_bytes: over.size_bytes.or(self.size_bytes),
            associativity: over.associativity.or(self.associativity),
            line_size: over.line_size.or(self.line_size),
            technology: over.technology.clone().or_else(|| self.technology.clone()),
            retention: over.retention.or(self.retention),
            counter_states: over.counter_states.or(self.counter_states),
            refresh: over.refresh.clone().or_else(|| self.refresh.clone()),
        }
    }

    fn build(&self, section: &str, default: CacheUnitConfig) -> Result<CacheUnitConfig> {
        let technology = match &self.technology {
            Some(t) => t
                .parse::<Technology>()
                .map_err(|e| anyhow::anyhow!("[{section}] technology: {e}"))?,
            None => default.technology,
        };
        let refresh = match self.refresh.as_deref() {
            None | Some("writes") => RefreshPolicy::WritesOnly,
            Some("any") => RefreshPolicy::AnyAccess,
            Some(other) => bail!("[{section}] refresh: unknown policy `{other}` (expected writes or any)"),
        };
        let retention_s = match technology {
            Technology::Sram => f64::INFINITY,
            Technology::SttRam => self
                .retention
                .with_context(|| format!("[{section}] retention is required for STTRAM"))?,
        };
        let cfg = CacheUnitConfig {
            size_bytes: self.size_bytes.unwrap_or(default.size_bytes),
            associativity: self.associativity.unwrap_or(default.associativity),
            line_size: self.line_size.unwrap_or(default.line_size),
            technology,
            retention_s,
            counter_states: self.counter_states.unwrap_or(default.counter_states),
            refresh,
        };
        cfg.validate().with_context(|| format!("[{section}]"))?;
        Ok(cfg)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAsym {
    core_retentions: Option<Vec<f64>>,
    threads: Option<Vec<PathBuf>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSynthetic {
    pub seed: Option<u64>,
    pub num_cores: Option<u32>,
    pub accesses_per_core: Option<u64>,
    pub read_fraction: Option<f64>,
    pub working_set_blocks: Option<u64>,
    pub gap: Option<u64>,
    pub gap_lo: Option<u64>,
    pub gap_hi: Option<u64>,
    pub pattern: Option<String>,
    pub zipf_s: Option<f64>,
    pub instr_fraction: Option<f64>,
    pub line_size: Option<u64>,
}

impl RawSynthetic {
    pub fn build(&self) -> Result<SyntheticTraceSpec> {
        let d = SyntheticTraceSpec::default();
        let gap = match (self.gap, self.gap_lo, self.gap_hi) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                bail!("[synthetic] give either gap or gap_lo/gap_hi, not both")
            }
            (None, Some(lo), Some(hi)) => GapDistribution::LogUniform { lo, hi },
            (None, Some(_), None) | (None, None, Some(_)) => {
                bail!("[synthetic] gap_lo and gap_hi must be given together")
            }
            (Some(g), None, None) => GapDistribution::Constant(g),
            (None, None, None) => d.gap,
        };
        let pattern = parse_pattern(self.pattern.as_deref(), self.zipf_s)?.unwrap_or(d.pattern);
        let spec = SyntheticTraceSpec {
            seed: self.seed.unwrap_or(d.seed),
            num_cores: self.num_cores.unwrap_or(d.num_cores),
            accesses_per_core: self.accesses_per_core.unwrap_or(d.accesses_per_core),
            read_fraction: self.read_fraction.unwrap_or(d.read_fraction),
            working_set_blocks: self.working_set_blocks.unwrap_or(d.working_set_blocks),
            gap,
            pattern,
            line_size: self.line_size.unwrap_or(d.line_size),
            instr_fraction: self.instr_fraction.unwrap_or(d.instr_fraction),
        };
        spec.validate().context("[synthetic]")?;
        Ok(spec)
    }
}

pub fn parse_pattern(name: Option<&str>, zipf_s: Option<f64>) -> Result<Option<AddressPattern>> {
    Ok(match name {
        None => None,
        Some("sequential") => Some(AddressPattern::SequentialLoop),
        Some("uniform") => Some(AddressPattern::UniformRandom),
        Some("zipf") => Some(AddressPattern::Zipf(zipf_s.unwrap_or(1.0))),
        Some(other) => bail!("unknown address pattern `{other}` (expected sequential, uniform or zipf)"),
    })
}

#[derive(Debug, Clone)]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SyntheticTraceSpec),
}

#[derive(Debug, Clone)]
pub struct AsymConfig {
    pub core_retentions: Option<Vec<f64>>,
    pub threads: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub hierarchy: HierarchyConfig,
    /// False when `num_cores` was left out and may follow the workload.
    pub cores_explicit: bool,
    pub tech_table: Option<PathBuf>,
    pub l2_tech_table: Option<PathBuf>,
    pub trace: Option<TraceSource>,
    pub retentions: Vec<f64>,
    pub objective: Objective,
    pub profile_len: usize,
    pub base_retentions: Vec<f64>,
    pub out_dir: PathBuf,
    pub asym: AsymConfig,
}

fn check_retentions(field: &str, values: &[f64]) -> Result<()> {
    for (i, r) in values.iter().enumerate() {
        if !(r.is_finite() && *r > 0.0) {
            bail!("{field}: retention {r} must be positive");
        }
        if values[..i].contains(r) {
            bail!("{field}: duplicate retention {r}");
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("config {}", path.display()))
    }

    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        Self::from_raw(raw, base)
    }

    fn from_raw(raw: RawConfig, base: &Path) -> Result<Self> {
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let e = raw.experiment;
        let trace = match (e.trace, raw.synthetic) {
            (Some(_), Some(_)) => bail!("[experiment] trace and [synthetic] are mutually exclusive"),
            (Some(p), None) => Some(TraceSource::File(resolve(p))),
            (None, Some(s)) => Some(TraceSource::Synthetic(s.build()?)),
            (None, None) => None,
        };
        let retentions = e.retentions.unwrap_or_else(|| DEFAULT_RETENTIONS.to_vec());
        check_retentions("[experiment] retentions", &retentions)?;
        let base_retentions = e.base_retentions.unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]);
        check_retentions("[experiment] base_retentions", &base_retentions)?;
        let objective = match e.objective {
            Some(o) => o
                .parse::<Objective>()
                .map_err(|err| anyhow::anyhow!("[experiment] objective: {err}"))?,
            None => Objective::Energy,
        };

        let h = raw.hierarchy;
        let num_cores = h.num_cores.unwrap_or(1);
        let l1i = raw.l1.overlay(raw.l1i.as_ref().unwrap_or(&RawUnit::default())).build("l1i", CacheUnitConfig::default_l1())?;
        let l1d = raw.l1.overlay(raw.l1d.as_ref().unwrap_or(&RawUnit::default())).build("l1d", CacheUnitConfig::default_l1())?;
        let l2 = raw
            .l2
            .as_ref()
            .map(|u| u.build("l2", CacheUnitConfig::default_l2()))
            .transpose()?;
        let hierarchy = HierarchyConfig {
            num_cores,
            clock_hz: h.clock_hz.unwrap_or(DEFAULT_CLOCK_HZ),
            l1i: vec![l1i; num_cores as usize],
            l1d: vec![l1d; num_cores as usize],
            l2,
            mem_latency_cycles: h.mem_latency_cycles.unwrap_or(DEFAULT_MEM_LATENCY_CYCLES),
            mem_energy_per_access: h.mem_energy_per_access.unwrap_or(DEFAULT_MEM_ENERGY_J),
        };
        hierarchy.validate().context("[hierarchy]")?;

        let asym = match raw.asym {
            Some(a) => {
                if let Some(r) = &a.core_retentions {
                    check_retentions_allow_repeats("[asym] core_retentions", r)?;
                }
                AsymConfig {
                    core_retentions: a.core_retentions,
                    threads: a.threads.map(|ts| ts.into_iter().map(resolve).collect()),
                }
            }
            None => AsymConfig {
                core_retentions: None,
                threads: None,
            },
        };

        Ok(Self {
            hierarchy,
            cores_explicit: h.num_cores.is_some(),
            tech_table: e.tech_table.map(resolve),
            l2_tech_table: e.l2_tech_table.map(resolve),
            trace,
            retentions,
            objective,
            profile_len: e.profile_len.unwrap_or(DEFAULT_PROFILE_LEN),
            base_retentions,
            out_dir: e.out_dir.map(resolve).unwrap_or_else(|| PathBuf::from(".")),
            asym,
        })
    }

    /// Sets the core count unless the config fixed it. Cores copy core 0's L1s.
    pub fn fit_cores(&mut self, n: u32) {
        if self.cores_explicit || n == 0 {
            return;
        }
        let h = &mut self.hierarchy;
        h.num_cores = n;
        h.l1i.resize(n as usize, h.l1i[0].clone());
        h.l1d.resize(n as usize, h.l1d[0].clone());
    }

    /// Defaults only: single core, 32KB 4-way L1s, no L2.
    pub fn defaults() -> Self {
        Self::from_raw(RawConfig::default(), Path::new(".")).expect("defaults are valid")
    }
}

fn check_retentions_allow_repeats(field: &str, values: &[f64]) -> Result<()> {
    if let Some(r) = values.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        bail!("{field}: retention {r} must be positive");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_system() {
        let c = ExperimentConfig::defaults();
        assert_eq!(c.hierarchy.clock_hz, 1.9e9);
        assert_eq!(c.hierarchy.l1d[0], CacheUnitConfig::default_l1());
        assert!(c.hierarchy.l2.is_none());
        assert_eq!(c.retentions, DEFAULT_RETENTIONS.to_vec());
        assert_eq!(c.profile_len, 10_000);
    }

    #[test]
    fn core_count_follows_the_workload_unless_set() {
        let mut c = ExperimentConfig::defaults();
        c.fit_cores(3);
        assert_eq!((c.hierarchy.num_cores, c.hierarchy.l1d.len()), (3, 3));
        let mut c = ExperimentConfig::parse("[hierarchy]\nnum_cores = 2\n", Path::new(".")).unwrap();
        c.fit_cores(3);
        assert_eq!(c.hierarchy.num_cores, 2);
    }

    #[test]
    fn l2_section_enables_shared_cache() {
        let c = ExperimentConfig::parse("[hierarchy]\nnum_cores = 4\n[l2]\n", Path::new(".")).unwrap();
        assert_eq!(c.hierarchy.l2, Some(CacheUnitConfig::default_l2()));
        assert_eq!(c.hierarchy.l1i.len(), 4);
    }

    #[test]
    fn per_type_sections_override_l1() {
        let text = "[l1]\ntechnology = \"STTRAM\"\nretention = 1e-3\n[l1i]\nretention = 1e-2\n";
        let c = ExperimentConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(c.hierarchy.l1i[0].retention(), Some(1e-2));
        assert_eq!(c.hierarchy.l1d[0].retention(), Some(1e-3));
    }

    #[test]
    fn trace_and_synthetic_are_exclusive() {
        let text = "[experiment]\ntrace = \"t.txt\"\n[synthetic]\nseed = 3\n";
        assert!(ExperimentConfig::parse(text, Path::new(".")).is_err());
    }

    #[test]
    fn rejects_duplicate_and_nonpositive_retentions() {
        for bad in ["[1e-3, 1e-3]", "[0.0]", "[-1e-3]"] {
            let text = format!("[experiment]\nretentions = {bad}\n");
            let err = ExperimentConfig::parse(&text, Path::new(".")).unwrap_err();
            assert!(format!("{err:#}").contains("retentions"), "{err:#}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("[l1]\nsize = 4\n", Path::new(".")).unwrap_err();
        assert!(format!("{err:#}").contains("size"), "{err:#}");
    }

    #[test]
    fn sttram_without_retention_names_the_section() {
        let err = ExperimentConfig::parse("[l2]\ntechnology = \"STTRAM\"\n", Path::new(".")).unwrap_err();
        assert!(format!("{err:#}").contains("[l2] retention"), "{err:#}");
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let text = "[experiment]\ntrace = \"t.txt\"\ntech_table = \"/abs/tech.txt\"\n";
        let c = ExperimentConfig::parse(text, Path::new("/cfg")).unwrap();
        assert!(matches!(c.trace, Some(TraceSource::File(ref p)) if p == Path::new("/cfg/t.txt")));
        assert_eq!(c.tech_table.as_deref(), Some(Path::new("/abs/tech.txt")));
    }

    #[test]
    fn synthetic_gap_forms() {
        let c = ExperimentConfig::parse("[synthetic]\ngap_lo = 5\ngap_hi = 50\npattern = \"zipf\"\n", Path::new("."))
            .unwrap();
        let Some(TraceSource::Synthetic(spec)) = c.trace else {
            panic!("expected synthetic source")
        };
        assert_eq!(spec.gap, GapDistribution::LogUniform { lo: 5, hi: 50 });
        assert_eq!(spec.pattern, AddressPattern::Zipf(1.0));
        assert!(ExperimentConfig::parse("[synthetic]\ngap = 3\ngap_lo = 1\n", Path::new(".")).is_err());
    }
}
