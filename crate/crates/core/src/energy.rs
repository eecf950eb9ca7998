//! Energy accounting from simulation counters and per-(technology, retention)
//! parameter tables.
//!
//! Table rows look like
//!
//! ```text
//! # tech   retention_s  e_read_J  e_write_J  p_leak_W  t_read  t_write
//! SRAM     -            1.2e-11   1.2e-11    1.5e-2    2       2
//! STTRAM   1e-3         8.0e-12   2.0e-11    1.5e-3    2       4
//! ```

use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::cache::{Technology, UnitCounters};

#[derive(Debug, Error)]
pub enum TechTableError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate entry for {key}")]
    Duplicate { line: usize, key: TechKey },
    #[error("no tech-table entry for {0}")]
    Missing(TechKey),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lookup key of a table row. SRAM rows carry no retention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TechKey {
    pub technology: Technology,
    pub retention_s: Option<f64>,
}

impl TechKey {
    pub fn new(technology: Technology, retention_s: Option<f64>) -> Self {
        let retention_s = match technology {
            Technology::Sram => None,
            Technology::SttRam => retention_s,
        };
        Self {
            technology,
            retention_s,
        }
    }

    fn matches(&self, other: &TechKey) -> bool {
        self.technology == other.technology
            && match (self.retention_s, other.retention_s) {
                (None, None) => true,
                (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * a.abs().max(b.abs()),
                _ => false,
            }
    }
}

impl fmt::Display for TechKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.retention_s {
            Some(r) => write!(f, "({}, retention {r:e} s)", self.technology),
            None => write!(f, "({})", self.technology),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TechParams {
    pub technology: Technology,
    pub retention_s: Option<f64>,
    /// Joules per read access.
    pub e_read: f64,
    /// Joules per write access (write hit or fill).
    pub e_write: f64,
    /// Watts.
    pub p_leak: f64,
    pub t_read: u64,
    pub t_write: u64,
}

impl TechParams {
    pub fn key(&self) -> TechKey {
        TechKey::new(self.technology, self.retention_s)
    }

    /// Every energy field multiplied by `k`; latencies unchanged.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            e_read: self.e_read * k,
            e_write: self.e_write * k,
            p_leak: self.p_leak * k,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TechTable {
    rows: Vec<TechParams>,
    warnings: Vec<String>,
}

impl TechTable {
    pub fn from_rows(rows: Vec<TechParams>) -> Result<Self, TechTableError> {
        let mut table = TechTable::default();
        for (i, row) in rows.into_iter().enumerate() {
            table.insert(row, i + 1)?;
        }
        table.check_monotone();
        Ok(table)
    }

    fn insert(&mut self, row: TechParams, line: usize) -> Result<(), TechTableError> {
        let key = row.key();
        if self.rows.iter().any(|r| r.key().matches(&key)) {
            return Err(TechTableError::Duplicate { line, key });
        }
        self.rows.push(row);
        Ok(())
    }

    fn check_monotone(&mut self) {
        let mut stt: Vec<&TechParams> = self
            .rows
            .iter()
            .filter(|r| r.technology == Technology::SttRam)
            .collect();
        stt.sort_by(|a, b| a.retention_s.partial_cmp(&b.retention_s).expect("finite retention"));
        for pair in stt.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b.e_write < a.e_write || b.t_write < a.t_write {
                self.warnings.push(format!(
                    "STTRAM write cost decreases from retention {:e} s to {:e} s",
                    a.retention_s.unwrap_or_default(),
                    b.retention_s.unwrap_or_default()
                ));
            }
        }
    }

    /// Non-fatal validation findings, such as a non-monotone write cost.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rows(&self) -> &[TechParams] {
        &self.rows
    }

    pub fn lookup(&self, technology: Technology, retention_s: Option<f64>) -> Result<TechParams, TechTableError> {
        let key = TechKey::new(technology, retention_s);
        self.rows
            .iter()
            .find(|r| r.key().matches(&key))
            .copied()
            .ok_or(TechTableError::Missing(key))
    }

    /// Copy of the table with every energy value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            rows: self.rows.iter().map(|r| r.scaled(k)).collect(),
            warnings: self.warnings.clone(),
        }
    }
}

fn parse_row(line: &str, lineno: usize) -> Result<Option<TechParams>, TechTableError> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let err = |msg: String| TechTableError::Parse { line: lineno, msg };
    let f: Vec<&str> = trimmed.split_whitespace().collect();
    if f.len() != 7 {
        return Err(err(format!("expected 7 fields, found {}", f.len())));
    }
    let technology: Technology = f[0].parse().map_err(err)?;
    let real = |name: &str, s: &str| -> Result<f64, TechTableError> {
        let v: f64 = s.parse().map_err(|e| err(format!("bad {name} `{s}`: {e}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(err(format!("{name} must be a non-negative number, got `{s}`")));
        }
        Ok(v)
    };
    let cycles = |name: &str, s: &str| -> Result<u64, TechTableError> {
        s.parse::<u64>()
            .map_err(|e| err(format!("bad {name} `{s}` (non-negative integer cycles): {e}")))
    };
    let retention_s = match (technology, f[1]) {
        (Technology::Sram, "-") => None,
        (Technology::Sram, other) => {
            return Err(err(format!("SRAM rows take `-` as retention, got `{other}`")));
        }
        (Technology::SttRam, "-") => return Err(err("STTRAM rows need a retention time".into())),
        (Technology::SttRam, s) => {
            let r = real("retention", s)?;
            if r == 0.0 {
                return Err(err("retention must be positive".into()));
            }
            Some(r)
        }
    };
    Ok(Some(TechParams {
        technology,
        retention_s,
        e_read: real("e_read", f[2])?,
        e_write: real("e_write", f[3])?,
        p_leak: real("p_leak", f[4])?,
        t_read: cycles("t_read", f[5])?,
        t_write: cycles("t_write", f[6])?,
    }))
}

pub fn parse_tech_table<R: Read>(reader: R) -> Result<TechTable, TechTableError> {
    let mut table = TechTable::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        if let Some(row) = parse_row(&line?, idx + 1)? {
            table.insert(row, idx + 1)?;
        }
    }
    table.check_monotone();
    Ok(table)
}

pub fn load_tech_table(path: impl AsRef<Path>) -> Result<TechTable, TechTableError> {
    parse_tech_table(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub dynamic_read: f64,
    pub dynamic_write: f64,
    pub leakage: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(dynamic_read: f64, dynamic_write: f64, leakage: f64) -> Self {
        Self {
            dynamic_read,
            dynamic_write,
            leakage,
            total: dynamic_read + dynamic_write + leakage,
        }
    }

    /// Component-wise sum, with `total` recomputed from the summed parts.
    pub fn sum<'a>(parts: impl IntoIterator<Item = &'a EnergyBreakdown>) -> Self {
        let (mut r, mut w, mut l) = (0.0, 0.0, 0.0);
        for p in parts {
            r += p.dynamic_read;
            w += p.dynamic_write;
            l += p.leakage;
        }
        Self::new(r, w, l)
    }
}

/// Energy of one cache unit.
///
/// Reads are charged for read hits and for every dirty eviction (the array is
/// read to produce the writeback); writes are charged for write hits and for
/// every fill. Misses are not charged a separate lookup.
pub fn unit_energy(params: &TechParams, counters: &UnitCounters, wall_time_s: f64) -> EnergyBreakdown {
    debug_assert!(wall_time_s >= 0.0);
    let reads = counters.read_hits + counters.writebacks;
    let writes = counters.write_hits + counters.fills;
    EnergyBreakdown::new(
        params.e_read * reads as f64,
        params.e_write * writes as f64,
        params.p_leak * wall_time_s,
    )
}
