#![allow(dead_code)]

use sttsim::{TechParams, TechTable, TechTables, Technology};

pub const RETENTIONS: [f64; 7] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

fn row(technology: Technology, retention_s: Option<f64>, e_read: f64, e_write: f64, p_leak: f64, t_write: u64) -> TechParams {
    TechParams {
        technology,
        retention_s,
        e_read,
        e_write,
        p_leak,
        t_read: 2,
        t_write,
    }
}

/// SRAM plus STT-RAM rows with write energy rising with retention.
pub fn l1_table() -> TechTable {
    let e_write = [10e-12, 13e-12, 16e-12, 20e-12, 25e-12, 31e-12, 38e-12];
    let t_write = [2, 3, 3, 4, 5, 6, 7];
    let mut rows = vec![row(Technology::Sram, None, 12e-12, 12e-12, 15e-3, 2)];
    for i in 0..RETENTIONS.len() {
        rows.push(row(Technology::SttRam, Some(RETENTIONS[i]), 8e-12, e_write[i], 1.5e-3, t_write[i]));
    }
    TechTable::from_rows(rows).unwrap()
}

pub fn l2_table() -> TechTable {
    let mut rows = vec![row(Technology::Sram, None, 120e-12, 120e-12, 0.4, 10)];
    for (i, &r) in RETENTIONS.iter().enumerate() {
        rows.push(row(Technology::SttRam, Some(r), 90e-12, 150e-12 + 50e-12 * i as f64, 0.04, 12 + 2 * i as u64));
    }
    TechTable::from_rows(rows).unwrap()
}

pub fn tables() -> TechTables {
    TechTables {
        l1: l1_table(),
        l2: Some(l2_table()),
    }
}
