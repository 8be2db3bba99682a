// SPDX-License-Identifier: Apache-2.0

//! Random VCD traces written as plain text, and linear-scan oracles over them.

#![allow(dead_code)]

use std::fmt::Write as _;

use rand::Rng;

pub struct RandomTrace {
    pub text: String,
    /// `(id_code, width)` per variable.
    pub vars: Vec<(String, u32)>,
    /// `(time, var index, bits)` in file order; bits uppercase, full width.
    pub changes: Vec<(u64, usize, String)>,
    pub last_time: u64,
}

fn random_bits<R: Rng>(rng: &mut R, width: u32) -> String {
    // one draw for the values, one for the rare X/Z positions
    let values: u64 = rng.gen();
    let unknown: u64 = rng.gen::<u64>() & rng.gen::<u64>() & rng.gen::<u64>();
    (0..width)
        .map(|i| match ((unknown >> i) & 1 == 1, (values >> i) & 1 == 1) {
            (true, false) => 'X',
            (true, true) => 'Z',
            (false, false) => '0',
            (false, true) => '1',
        })
        .collect()
}

/// A trace with up to `max_changes` value changes. Several changes of one
/// variable may share a timestamp; the last one must win.
pub fn random_trace<R: Rng>(rng: &mut R, max_changes: usize) -> RandomTrace {
    let n_vars = rng.gen_range(1..=6);
    let vars: Vec<(String, u32)> = (0..n_vars)
        .map(|i| (format!("v{i}"), rng.gen_range(1..=12)))
        .collect();
    let n_changes = rng.gen_range(0..=max_changes);
    let mut text = String::from("$timescale 1ns $end\n$scope module top $end\n");
    for (i, (id, w)) in vars.iter().enumerate() {
        let _ = writeln!(text, "$var wire {w} {id} sig{i} $end");
    }
    text.push_str("$upscope $end\n$enddefinitions $end\n");
    let mut changes = Vec::with_capacity(n_changes);
    let mut t = 0u64;
    let mut last_written: Option<u64> = None;
    for _ in 0..n_changes {
        if rng.gen_bool(0.7) {
            t += rng.gen_range(1..50);
        }
        if last_written != Some(t) {
            let _ = writeln!(text, "#{t}");
            last_written = Some(t);
        }
        let v = rng.gen_range(0..vars.len());
        let (id, w) = &vars[v];
        let bits = random_bits(rng, *w);
        if *w == 1 {
            let _ = writeln!(text, "{}{id}", bits.to_lowercase());
        } else {
            let _ = writeln!(text, "b{} {id}", bits.to_lowercase());
        }
        changes.push((t, v, bits));
    }
    RandomTrace {
        text,
        vars,
        changes,
        last_time: t,
    }
}

impl RandomTrace {
    pub fn oracle_value_at(&self, var: usize, time: u64) -> String {
        let mut value = "X".repeat(self.vars[var].1 as usize);
        for (t, v, bits) in &self.changes {
            if *v == var && *t <= time {
                value = bits.clone();
            }
        }
        value
    }

    pub fn oracle_changes_in(&self, var: usize, t0: u64, t1: u64) -> Vec<(u64, String)> {
        let mut out: Vec<(u64, String)> = Vec::new();
        for (t, v, bits) in &self.changes {
            if *v == var && *t >= t0 && *t <= t1 {
                match out.last_mut() {
                    Some((lt, lb)) if lt == t => *lb = bits.clone(),
                    _ => out.push((*t, bits.clone())),
                }
            }
        }
        out
    }
}
