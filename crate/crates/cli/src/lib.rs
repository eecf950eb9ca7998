//! Command-line front end for the `sttsim` simulator.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sttsim::characterize::{self, StreamKind};
use sttsim::explore::{self, Objective};
use sttsim::{
    generate_trace, load_tech_table, read_trace, simulate, write_trace, AccessRecord, CacheUnitConfig,
    GapDistribution, TechTables, Technology,
};

use config::{parse_pattern, ExperimentConfig, RawSynthetic, TraceSource};
use report::Table;

#[derive(Debug, Parser)]
#[command(name = "sttsim", version, about = "Trace-driven STT-RAM cache simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Technology parameter table; overrides the config.
    #[arg(long, global = true)]
    pub tech_table: Option<PathBuf>,
    /// Trace file; overrides the config.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Directory for CSV reports; overrides the config.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for synthetic traces; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic trace.
    GenTrace(GenTraceArgs),
    /// Simulate the configured hierarchy once.
    Simulate,
    /// Read/write mix, block lifetimes, persistence and expiration curves.
    Characterize,
    /// SRAM baseline plus one homogeneous STT-RAM run per retention.
    Sweep,
    /// Pick a retention from a trace prefix and compare against base retentions.
    Specialize(SpecializeArgs),
    /// Assign threads to cores with different L1 retention times.
    Asym(AsymArgs),
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    /// Number of cores, each with its own address region.
    #[arg(long)]
    pub cores: Option<u32>,
    /// Records generated per core.
    #[arg(long)]
    pub accesses_per_core: Option<u64>,
    /// Fraction of data accesses that are loads.
    #[arg(long)]
    pub read_fraction: Option<f64>,
    /// Distinct data blocks per core.
    #[arg(long)]
    pub working_set_blocks: Option<u64>,
    /// Constant gap between a core's accesses, in cycles.
    #[arg(long, conflicts_with_all = ["gap_lo", "gap_hi"])]
    pub gap: Option<u64>,
    /// Log-uniform gap lower bound, in cycles.
    #[arg(long, requires = "gap_hi")]
    pub gap_lo: Option<u64>,
    /// Log-uniform gap upper bound, in cycles.
    #[arg(long, requires = "gap_lo")]
    pub gap_hi: Option<u64>,
    /// sequential, uniform or zipf.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Zipf exponent.
    #[arg(long)]
    pub zipf_s: Option<f64>,
    /// Block size in bytes.
    #[arg(long)]
    pub line_size: Option<u64>,
    /// Fraction of records that are instruction fetches.
    #[arg(long)]
    pub instr_fraction: Option<f64>,
    /// Output trace file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpecializeArgs {
    /// Accesses used for profiling.
    #[arg(long)]
    pub profile_len: Option<usize>,
    /// energy, time or edp.
    #[arg(long)]
    pub objective: Option<Objective>,
}

#[derive(Debug, Args)]
pub struct AsymArgs {
    /// Per-core L1 retention times in seconds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub core_retentions: Option<Vec<f64>>,
    /// One trace per thread; defaults to splitting the main trace by core.
    #[arg(long = "thread-trace")]
    pub threads: Vec<PathBuf>,
    /// Accesses per thread used for profiling.
    #[arg(long)]
    pub profile_len: Option<usize>,
    /// energy, time or edp.
    #[arg(long)]
    pub objective: Option<Objective>,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().context("starting worker pool")?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::defaults(),
    };
    let out_dir = g.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    match &cli.command {
        Command::GenTrace(args) => gen_trace(g, &cfg, args),
        Command::Simulate => {
            let (trace, tables) = (load_trace(g, &mut cfg)?, load_tables(g, &cfg)?);
            let r = simulate(&cfg.hierarchy, &tables, &trace)?;
            emit(&out_dir, report::simulate_tables(&r))
        }
        Command::Characterize => {
            let trace = load_trace(g, &mut cfg)?;
            characterize_cmd(&cfg, &trace, &out_dir)
        }
        Command::Sweep => {
            let (trace, tables) = (load_trace(g, &mut cfg)?, load_tables(g, &cfg)?);
            let r = explore::sweep(&trace, &cfg.hierarchy, &tables, &cfg.retentions)?;
            emit(&out_dir, report::sweep_tables(&r))
        }
        Command::Specialize(args) => {
            let (trace, tables) = (load_trace(g, &mut cfg)?, load_tables(g, &cfg)?);
            let objective = args.objective.unwrap_or(cfg.objective);
            let sample_len = args.profile_len.unwrap_or(cfg.profile_len).min(trace.len());
            let results = cfg
                .base_retentions
                .iter()
                .map(|&base| {
                    explore::specialize(&trace, &cfg.hierarchy, &tables, &cfg.retentions, base, sample_len, objective)
                })
                .collect::<Result<Vec<_>, _>>()?;
            emit(&out_dir, report::specialize_tables(&results))
        }
        Command::Asym(args) => asym_cmd(g, &mut cfg, args, &out_dir),
    }
}

fn emit(dir: &Path, tables: Vec<Table>) -> Result<()> {
    for t in tables {
        let path = t.write_to(dir)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn gen_trace(g: &GlobalArgs, cfg: &ExperimentConfig, a: &GenTraceArgs) -> Result<()> {
    let mut spec = match &cfg.trace {
        Some(TraceSource::Synthetic(s)) => s.clone(),
        _ => RawSynthetic::default().build()?,
    };
    if let Some(v) = g.seed {
        spec.seed = v;
    }
    if let Some(v) = a.cores {
        spec.num_cores = v;
    }
    if let Some(v) = a.accesses_per_core {
        spec.accesses_per_core = v;
    }
    if let Some(v) = a.read_fraction {
        spec.read_fraction = v;
    }
    if let Some(v) = a.working_set_blocks {
        spec.working_set_blocks = v;
    }
    if let Some(v) = a.gap {
        spec.gap = GapDistribution::Constant(v);
    }
    if let (Some(lo), Some(hi)) = (a.gap_lo, a.gap_hi) {
        spec.gap = GapDistribution::LogUniform { lo, hi };
    }
    if let Some(p) = parse_pattern(a.pattern.as_deref(), a.zipf_s)? {
        spec.pattern = p;
    }
    if let Some(v) = a.line_size {
        spec.line_size = v;
    }
    if let Some(v) = a.instr_fraction {
        spec.instr_fraction = v;
    }
    let trace = generate_trace(&spec)?;
    let mut buf = Vec::new();
    write_trace(&mut buf, &trace)?;
    report::write_atomic(&a.out, &buf)?;
    eprintln!("wrote {} ({} records)", a.out.display(), trace.len());
    Ok(())
}

/// Loads the trace and sizes an unpinned hierarchy to its cores.
fn load_trace(g: &GlobalArgs, cfg: &mut ExperimentConfig) -> Result<Vec<AccessRecord>> {
    let trace = read_any_trace(g, cfg)?;
    if let Some(max) = trace.iter().map(|r| r.core).max() {
        cfg.fit_cores(max + 1);
    }
    Ok(trace)
}

fn read_any_trace(g: &GlobalArgs, cfg: &ExperimentConfig) -> Result<Vec<AccessRecord>> {
    if let Some(p) = &g.trace {
        return read_trace(p).with_context(|| format!("trace {}", p.display()));
    }
    match &cfg.trace {
        Some(TraceSource::File(p)) => read_trace(p).with_context(|| format!("trace {}", p.display())),
        Some(TraceSource::Synthetic(spec)) => {
            let mut spec = spec.clone();
            if let Some(s) = g.seed {
                spec.seed = s;
            }
            Ok(generate_trace(&spec)?)
        }
        None => bail!("no trace: pass --trace or set [experiment] trace or [synthetic] in the config"),
    }
}

fn load_table(path: &Path) -> Result<sttsim::TechTable> {
    let t = load_tech_table(path).with_context(|| format!("tech table {}", path.display()))?;
    for w in t.warnings() {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(t)
}

fn load_tables(g: &GlobalArgs, cfg: &ExperimentConfig) -> Result<TechTables> {
    let Some(l1) = g.tech_table.as_ref().or(cfg.tech_table.as_ref()) else {
        bail!("no technology table: pass --tech-table or set [experiment] tech_table in the config");
    };
    let l1 = load_table(l1)?;
    let l2 = cfg.l2_tech_table.as_deref().map(load_table).transpose()?;
    Ok(TechTables { l1, l2 })
}

fn characterize_cmd(cfg: &ExperimentConfig, trace: &[AccessRecord], out_dir: &Path) -> Result<()> {
    let h = &cfg.hierarchy;
    let streams: Vec<_> = characterize::unit_streams(trace).into_iter().collect();
    let unit_cfg = |core: u32, kind: StreamKind| -> Result<&CacheUnitConfig> {
        let list = match kind {
            StreamKind::Instr => &h.l1i,
            StreamKind::Data => &h.l1d,
        };
        list.get(core as usize)
            .with_context(|| format!("trace core {core} outside the configured {} cores", h.num_cores))
    };
    let results = streams
        .par_iter()
        .map(|((core, kind), stream)| -> Result<_> {
            let ucfg = unit_cfg(*core, *kind)?;
            let name = format!("core{core}.{kind}");
            let lifetimes = characterize::block_lifetimes(stream, ucfg, h.clock_hz)?;
            let persistence = characterize::persistence(stream, ucfg, h.clock_hz)?;
            let curve = characterize::expiration_curve(stream, ucfg, h.clock_hz, &cfg.retentions)?;
            Ok((name, lifetimes, persistence, curve))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lifetimes = Vec::new();
    let mut persistence = Vec::new();
    let mut curves = Vec::new();
    for (name, l, p, c) in results {
        lifetimes.push((name.clone(), l));
        persistence.push((name.clone(), p));
        curves.push((name, c));
    }
    emit(
        out_dir,
        vec![
            report::rwratio_table(&characterize::read_write_ratio(trace)),
            report::lifetimes_table(&lifetimes),
            report::persistence_table(&persistence),
            report::expiration_table(&curves),
        ],
    )
}

fn asym_cmd(g: &GlobalArgs, cfg: &mut ExperimentConfig, a: &AsymArgs, out_dir: &Path) -> Result<()> {
    let tables = load_tables(g, cfg)?;
    let Some(rets) = a.core_retentions.clone().or_else(|| cfg.asym.core_retentions.clone()) else {
        bail!("asym needs per-core retentions: pass --core-retentions or set [asym] core_retentions");
    };
    cfg.fit_cores(rets.len() as u32);
    let h = &cfg.hierarchy;
    if rets.len() != h.num_cores as usize {
        bail!("{} core retentions given for {} cores", rets.len(), h.num_cores);
    }
    if let Some(r) = rets.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        bail!("core retention {r} must be positive");
    }
    let template = rets
        .iter()
        .enumerate()
        .fold(h.clone(), |acc, (c, &r)| acc.with_core_l1(c as u32, Technology::SttRam, r));

    let paths = if a.threads.is_empty() {
        cfg.asym.threads.clone().unwrap_or_default()
    } else {
        a.threads.clone()
    };
    let threads: Vec<Vec<AccessRecord>> = if paths.is_empty() {
        split_by_core(&read_any_trace(g, cfg)?)
    } else {
        paths
            .iter()
            .map(|p| read_trace(p).with_context(|| format!("thread trace {}", p.display())))
            .collect::<Result<_>>()?
    };
    let objective = a.objective.unwrap_or(cfg.objective);
    let profile_len = a.profile_len.unwrap_or(cfg.profile_len);
    let result = explore::assign_asymmetric(&threads, &template, &tables, profile_len, objective)?;
    let core_rets: Vec<Option<f64>> = rets.into_iter().map(Some).collect();
    emit(out_dir, report::asym_tables(&result, &core_rets))
}

/// Splits a multi-core trace into one thread per core id (ascending).
pub fn split_by_core(trace: &[AccessRecord]) -> Vec<Vec<AccessRecord>> {
    let mut by_core = std::collections::BTreeMap::<u32, Vec<AccessRecord>>::new();
    for r in trace {
        by_core.entry(r.core).or_default().push(*r);
    }
    by_core.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn split_by_core_keeps_order() {
        let t = sttsim::trace::parse_trace("1 0 LD 0x0\n0 5 ST 0x40\n1 9 LD 0x80\n".as_bytes()).unwrap();
        let s = split_by_core(&t);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].len(), 1);
        assert_eq!(s[1].iter().map(|r| r.timestamp).collect::<Vec<_>>(), [0, 9]);
    }
}
