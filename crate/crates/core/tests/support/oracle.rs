//! Brute-force reference cache used by the integration and acceptance tests.
//!
//! Every line keeps the exact cycle of its last counter reset, and expiry is
//! decided arithmetically from the number of clock ticks elapsed since then:
//! a block reset at `r` is gone at `t` once `floor(t*N/R) - floor(r*N/R) >= N`.
//! Every access scans the whole array for expired lines first.

#![allow(dead_code)]

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    Compulsory,
    Replacement,
    Expiration,
}

#[derive(Debug, Clone, Copy)]
struct Line {
    addr: u64,
    dirty: bool,
    last_use: u64,
    reset_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Gone {
    Replaced,
    Expired,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub hits: u64,
    pub compulsory: u64,
    pub replacement: u64,
    pub expiration: u64,
    pub fills: u64,
    pub writebacks: u64,
}

#[derive(Debug, Clone)]
pub struct Oracle {
    sets: Vec<Vec<Line>>,
    ways: usize,
    line: u64,
    /// (retention cycles, counter states) for STT-RAM; `None` for SRAM.
    retention: Option<(u64, u64)>,
    refresh_on_read: bool,
    gone: HashMap<u64, Gone>,
    use_clock: u64,
    pub totals: Totals,
}

impl Oracle {
    pub fn new(num_sets: usize, ways: usize, line: u64, retention: Option<(u64, u64)>, refresh_on_read: bool) -> Self {
        Self {
            sets: vec![Vec::new(); num_sets],
            ways,
            line,
            retention,
            refresh_on_read,
            gone: HashMap::new(),
            use_clock: 0,
            totals: Totals::default(),
        }
    }

    /// Retention in cycles as `round(seconds * hz)`, at least one cycle.
    pub fn cycles(retention_s: f64, clock_hz: f64) -> u64 {
        let c = (retention_s * clock_hz).round();
        if c < 1.0 {
            1
        } else {
            c as u64
        }
    }

    fn ticks_between(&self, from: u64, to: u64) -> u64 {
        let (r, n) = self.retention.expect("sttram");
        let k = |t: u64| (t as u128 * n as u128 / r as u128) as u64;
        k(to) - k(from)
    }

    fn expired(&self, l: &Line, now: u64) -> bool {
        match self.retention {
            None => false,
            Some((_, n)) => self.ticks_between(l.reset_at, now) >= n,
        }
    }

    /// Removes every expired line; returns how many were dirty.
    pub fn expire_all(&mut self, now: u64) -> u64 {
        let mut dirty = 0;
        for s in 0..self.sets.len() {
            let mut kept = Vec::new();
            for l in std::mem::take(&mut self.sets[s]) {
                if self.expired(&l, now) {
                    if l.dirty {
                        dirty += 1;
                    }
                    self.gone.insert(l.addr, Gone::Expired);
                } else {
                    kept.push(l);
                }
            }
            self.sets[s] = kept;
        }
        self.totals.writebacks += dirty;
        dirty
    }

    /// Returns the outcome and whether a dirty victim was replaced.
    pub fn access(&mut self, addr: u64, write: bool, now: u64) -> (Outcome, bool) {
        assert_eq!(addr % self.line, 0);
        self.expire_all(now);
        self.use_clock += 1;
        let set = ((addr / self.line) % self.sets.len() as u64) as usize;
        let refresh = write || self.refresh_on_read;
        if let Some(l) = self.sets[set].iter_mut().find(|l| l.addr == addr) {
            l.last_use = self.use_clock;
            if write {
                l.dirty = true;
            }
            if refresh {
                l.reset_at = now;
            }
            self.totals.hits += 1;
            return (Outcome::Hit, false);
        }
        let outcome = match self.gone.get(&addr) {
            None => Outcome::Compulsory,
            Some(Gone::Replaced) => Outcome::Replacement,
            Some(Gone::Expired) => Outcome::Expiration,
        };
        match outcome {
            Outcome::Compulsory => self.totals.compulsory += 1,
            Outcome::Replacement => self.totals.replacement += 1,
            Outcome::Expiration => self.totals.expiration += 1,
            Outcome::Hit => unreachable!(),
        }
        let mut dirty_victim = false;
        if self.sets[set].len() == self.ways {
            let (i, _) = self.sets[set]
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| l.last_use)
                .unwrap();
            let victim = self.sets[set].remove(i);
            dirty_victim = victim.dirty;
            if victim.dirty {
                self.totals.writebacks += 1;
            }
            self.gone.insert(victim.addr, Gone::Replaced);
        }
        self.sets[set].push(Line {
            addr,
            dirty: write,
            last_use: self.use_clock,
            reset_at: now,
        });
        self.totals.fills += 1;
        (outcome, dirty_victim)
    }

    pub fn resident(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }
}
