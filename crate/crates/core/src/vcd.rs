// SPDX-License-Identifier: Apache-2.0

//! Value change dump (VCD) reader, writer and point-in-time queries.
//!
//! The accepted input is the logic-only subset of IEEE 1364 VCD: scopes of kind
//! `module`/`begin`, variables of kind `wire`/`reg`/`integer`/`parameter`,
//! scalar and `b` vector changes. Real-valued changes are rejected.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use thiserror::Error;

use crate::bits::{BitString, BitsError, Logic};

#[derive(Debug, Error)]
pub enum VcdError {
    #[error("[vcd] line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("[vcd] value change references undeclared id `{0}`")]
    UndeclaredId(String),
    #[error("[vcd] timestamp #{0} is smaller than the previous one")]
    NonMonotonicTime(u64),
    #[error("[vcd] unknown id `{0}`")]
    UnknownId(String),
    #[error("[vcd] invalid time range [{t0}, {t1}]")]
    InvalidRange { t0: u64, t1: u64 },
    #[error("[vcd] I/O operation failed")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VcdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Wire,
    Reg,
    Integer,
    Parameter,
}

impl VarKind {
    fn parse(s: &str) -> Option<VarKind> {
        match s {
            "wire" => Some(VarKind::Wire),
            "reg" => Some(VarKind::Reg),
            "integer" => Some(VarKind::Integer),
            "parameter" => Some(VarKind::Parameter),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Wire => "wire",
            VarKind::Reg => "reg",
            VarKind::Integer => "integer",
            VarKind::Parameter => "parameter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScopeKind {
    Module,
    Begin,
}

impl ScopeKind {
    fn parse(s: &str) -> Option<ScopeKind> {
        match s {
            "module" => Some(ScopeKind::Module),
            "begin" => Some(ScopeKind::Begin),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScopeKind::Module => "module",
            ScopeKind::Begin => "begin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcdVar {
    pub id_code: String,
    pub name: String,
    pub width: u32,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcdScope {
    pub name: String,
    pub kind: ScopeKind,
    pub children: Vec<VcdScope>,
    pub vars: Vec<VcdVar>,
}

impl VcdScope {
    pub fn new(name: impl Into<String>, kind: ScopeKind) -> Self {
        VcdScope {
            name: name.into(),
            kind,
            children: Vec::new(),
            vars: Vec::new(),
        }
    }

    pub fn child(&self, name: &str) -> Option<&VcdScope> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn var(&self, name: &str) -> Option<&VcdVar> {
        self.vars.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    S,
    Ms,
    Us,
    Ns,
    Ps,
    Fs,
}

impl TimeUnit {
    fn parse(s: &str) -> Option<TimeUnit> {
        match s {
            "s" => Some(TimeUnit::S),
            "ms" => Some(TimeUnit::Ms),
            "us" => Some(TimeUnit::Us),
            "ns" => Some(TimeUnit::Ns),
            "ps" => Some(TimeUnit::Ps),
            "fs" => Some(TimeUnit::Fs),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::S => "s",
            TimeUnit::Ms => "ms",
            TimeUnit::Us => "us",
            TimeUnit::Ns => "ns",
            TimeUnit::Ps => "ps",
            TimeUnit::Fs => "fs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timescale {
    pub magnitude: u32,
    pub unit: TimeUnit,
}

impl Default for Timescale {
    fn default() -> Self {
        Timescale {
            magnitude: 1,
            unit: TimeUnit::Ns,
        }
    }
}

impl fmt::Display for Timescale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.magnitude, self.unit.as_str())
    }
}

/// Time-ordered value changes of one signal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeList {
    times: Vec<u64>,
    values: Vec<BitString>,
}

impl ChangeList {
    /// Appends a change. A change at the same time as the last entry replaces it.
    fn push(&mut self, time: u64, value: BitString) {
        if self.times.last() == Some(&time) {
            *self.values.last_mut().unwrap() = value;
        } else {
            debug_assert!(self.times.last().is_none_or(|&t| t < time));
            self.times.push(time);
            self.values.push(value);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &BitString)> + '_ {
        self.times.iter().copied().zip(self.values.iter())
    }

    /// Latest value with change time `<= time`, or `None` before the first change.
    pub fn at(&self, time: u64) -> Option<&BitString> {
        let idx = self.times.partition_point(|&t| t <= time);
        idx.checked_sub(1).map(|i| &self.values[i])
    }

    /// Entries with `t0 <= time <= t1`.
    pub fn range(&self, t0: u64, t1: u64) -> impl Iterator<Item = (u64, &BitString)> + '_ {
        let start = self.times.partition_point(|&t| t < t0);
        let end = self.times.partition_point(|&t| t <= t1);
        self.times[start..end]
            .iter()
            .copied()
            .zip(self.values[start..end].iter())
    }
}

/// A fully parsed trace. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcdDocument {
    timescale: Timescale,
    root_scopes: Vec<VcdScope>,
    widths: HashMap<String, u32>,
    changes: HashMap<String, ChangeList>,
    times: Vec<u64>,
    end_time: u64,
}

impl VcdDocument {
    pub fn timescale(&self) -> Timescale {
        self.timescale
    }

    pub fn root_scopes(&self) -> &[VcdScope] {
        &self.root_scopes
    }

    pub fn end_time(&self) -> u64 {
        self.end_time
    }

    /// Every time at which at least one signal changed, ascending.
    pub fn change_times(&self) -> &[u64] {
        &self.times
    }

    pub fn width_of(&self, id_code: &str) -> Option<u32> {
        self.widths.get(id_code).copied()
    }

    pub fn changes(&self, id_code: &str) -> Result<&ChangeList> {
        self.changes
            .get(id_code)
            .ok_or_else(|| VcdError::UnknownId(id_code.to_string()))
    }

    /// Value of `id_code` at `time`; all-`X` before the first change.
    pub fn value_at(&self, id_code: &str, time: u64) -> Result<BitString> {
        let list = self.changes(id_code)?;
        Ok(match list.at(time) {
            Some(v) => v.clone(),
            None => BitString::unknown(self.widths[id_code]),
        })
    }

    pub fn changes_in(&self, id_code: &str, t0: u64, t1: u64) -> Result<Vec<(u64, BitString)>> {
        let list = self.changes(id_code)?;
        if t0 > t1 {
            return Err(VcdError::InvalidRange { t0, t1 });
        }
        Ok(list.range(t0, t1).map(|(t, v)| (t, v.clone())).collect())
    }

    /// Depth-first pre-order list of `(dotted.path, var)`.
    pub fn flatten_hierarchy(&self) -> Vec<(String, &VcdVar)> {
        fn walk<'a>(scope: &'a VcdScope, prefix: &str, out: &mut Vec<(String, &'a VcdVar)>) {
            let path = if prefix.is_empty() {
                scope.name.clone()
            } else {
                format!("{prefix}.{}", scope.name)
            };
            for v in &scope.vars {
                out.push((format!("{path}.{}", v.name), v));
            }
            for c in &scope.children {
                walk(c, &path, out);
            }
        }
        let mut out = Vec::new();
        for s in &self.root_scopes {
            walk(s, "", &mut out);
        }
        out
    }

    /// Serializes the document back to VCD text.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "$timescale {} $end", self.timescale)?;
        fn scope<W: Write>(w: &mut W, s: &VcdScope) -> std::io::Result<()> {
            writeln!(w, "$scope {} {} $end", s.kind.as_str(), s.name)?;
            for v in &s.vars {
                writeln!(
                    w,
                    "$var {} {} {} {} $end",
                    v.kind.as_str(),
                    v.width,
                    v.id_code,
                    v.name
                )?;
            }
            for c in &s.children {
                scope(w, c)?;
            }
            writeln!(w, "$upscope $end")
        }
        for s in &self.root_scopes {
            scope(&mut w, s)?;
        }
        writeln!(w, "$enddefinitions $end")?;

        // declaration order keeps the output byte-stable
        let mut ids: Vec<&str> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (_, v) in self.flatten_hierarchy() {
            if seen.insert(v.id_code.as_str()) {
                ids.push(&v.id_code);
            }
        }
        let mut cursors = vec![0usize; ids.len()];
        for &t in &self.times {
            writeln!(w, "#{t}")?;
            for (i, id) in ids.iter().enumerate() {
                let list = &self.changes[*id];
                if let Some(&ct) = list.times.get(cursors[i]) {
                    if ct == t {
                        let v = &list.values[cursors[i]];
                        if self.widths[*id] == 1 {
                            writeln!(w, "{}{}", v.to_lowercase_string(), id)?;
                        } else {
                            writeln!(w, "b{} {}", v.to_lowercase_string(), id)?;
                        }
                        cursors[i] += 1;
                    }
                }
            }
        }
        if self.times.last().is_none_or(|&t| t < self.end_time) {
            writeln!(w, "#{}", self.end_time)?;
        }
        Ok(())
    }

    pub fn to_vcd_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("VCD output is UTF-8")
    }
}

struct Tokens<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    current: Option<(usize, std::str::SplitWhitespace<'a>)>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens {
            lines: text.lines().enumerate(),
            current: None,
            line: 0,
        }
    }

    fn next(&mut self) -> Option<&'a str> {
        loop {
            if let Some((n, words)) = &mut self.current {
                if let Some(tok) = words.next() {
                    self.line = *n;
                    return Some(tok);
                }
            }
            let (n, l) = self.lines.next()?;
            self.current = Some((n + 1, l.split_whitespace()));
        }
    }

    fn err(&self, message: impl Into<String>) -> VcdError {
        VcdError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        self.next()
            .ok_or_else(|| self.err(format!("unexpected end of input, expected {what}")))
    }

    /// Collects tokens up to the closing `$end`.
    fn until_end(&mut self, cmd: &str) -> Result<Vec<&'a str>> {
        let mut out = Vec::new();
        loop {
            match self.next() {
                Some("$end") => return Ok(out),
                Some(t) => out.push(t),
                None => return Err(self.err(format!("unterminated {cmd}"))),
            }
        }
    }
}

pub fn parse_vcd<R: Read>(mut input: R) -> Result<VcdDocument> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_vcd_str(&String::from_utf8_lossy(&bytes))
}

pub fn parse_vcd_str(text: &str) -> Result<VcdDocument> {
    let mut toks = Tokens::new(text);
    let mut timescale = Timescale::default();
    let mut stack: Vec<VcdScope> = Vec::new();
    let mut roots: Vec<VcdScope> = Vec::new();
    let mut widths: HashMap<String, u32> = HashMap::new();

    // header
    loop {
        let Some(tok) = toks.next() else {
            // header-only file without $enddefinitions
            if !stack.is_empty() {
                return Err(toks.err("unterminated $scope"));
            }
            break;
        };
        match tok {
            "$date" | "$version" | "$comment" => {
                toks.until_end(tok)?;
            }
            "$timescale" => {
                let parts = toks.until_end(tok)?;
                timescale = parse_timescale(&parts.concat()).ok_or_else(|| {
                    toks.err(format!("invalid timescale `{}`", parts.join(" ")))
                })?;
            }
            "$scope" => {
                let parts = toks.until_end(tok)?;
                if parts.len() != 2 {
                    return Err(toks.err("expected `$scope <kind> <name> $end`"));
                }
                let kind = ScopeKind::parse(parts[0])
                    .ok_or_else(|| toks.err(format!("unsupported scope kind `{}`", parts[0])))?;
                stack.push(VcdScope::new(parts[1], kind));
            }
            "$upscope" => {
                toks.until_end(tok)?;
                let done = stack
                    .pop()
                    .ok_or_else(|| toks.err("$upscope without matching $scope"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => roots.push(done),
                }
            }
            "$var" => {
                let parts = toks.until_end(tok)?;
                if parts.len() < 4 {
                    return Err(toks.err("expected `$var <kind> <width> <id> <name> $end`"));
                }
                let kind = VarKind::parse(parts[0])
                    .ok_or_else(|| toks.err(format!("unsupported var kind `{}`", parts[0])))?;
                let width: u32 = parts[1]
                    .parse()
                    .ok()
                    .filter(|w| *w >= 1)
                    .ok_or_else(|| toks.err(format!("invalid width `{}`", parts[1])))?;
                let id = parts[2];
                if !id.bytes().all(|b| (33..=126).contains(&b)) {
                    return Err(toks.err(format!("invalid id code `{id}`")));
                }
                // trailing bit-range annotation such as `[3:0]` is not part of the name
                let name_parts = match parts.len() {
                    4 => &parts[3..],
                    _ if parts[parts.len() - 1].starts_with('[') => &parts[3..parts.len() - 1],
                    _ => &parts[3..],
                };
                let name = name_parts.join(" ");
                let scope = stack
                    .last_mut()
                    .ok_or_else(|| toks.err("$var outside of any $scope"))?;
                if let Some(prev) = widths.insert(id.to_string(), width) {
                    if prev != width {
                        return Err(toks.err(format!(
                            "id `{id}` redeclared with width {width} (was {prev})"
                        )));
                    }
                }
                scope.vars.push(VcdVar {
                    id_code: id.to_string(),
                    name,
                    width,
                    kind,
                });
            }
            "$enddefinitions" => {
                toks.until_end(tok)?;
                if !stack.is_empty() {
                    return Err(toks.err("unterminated $scope before $enddefinitions"));
                }
                break;
            }
            other => return Err(toks.err(format!("unexpected token `{other}` in header"))),
        }
    }

    // ids are resolved once per change through a dense index
    let ids: Vec<&String> = widths.keys().collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let id_widths: Vec<u32> = ids.iter().map(|k| widths[*k]).collect();
    let mut lists: Vec<ChangeList> = vec![ChangeList::default(); ids.len()];
    let mut times: Vec<u64> = Vec::new();
    let mut now: u64 = 0;
    let mut end_time: u64 = 0;
    let lookup = |id: &str| index.get(id).copied().ok_or_else(|| VcdError::UndeclaredId(id.to_string()));

    while let Some(tok) = toks.next() {
        let first = tok.as_bytes()[0];
        let (slot, value) = match first {
            b'#' => {
                let t: u64 = tok[1..]
                    .parse()
                    .map_err(|_| toks.err(format!("invalid timestamp `{tok}`")))?;
                if t < now {
                    return Err(VcdError::NonMonotonicTime(t));
                }
                now = t;
                end_time = end_time.max(t);
                continue;
            }
            b'$' => match tok {
                "$dumpvars" | "$dumpall" | "$dumpon" | "$dumpoff" | "$end" => continue,
                "$comment" => {
                    toks.until_end(tok)?;
                    continue;
                }
                other => return Err(toks.err(format!("unexpected command `{other}` in body"))),
            },
            b'0' | b'1' | b'x' | b'X' | b'z' | b'Z' => {
                let id = &tok[1..];
                if id.is_empty() {
                    return Err(toks.err(format!("scalar change `{tok}` without id")));
                }
                let sym = Logic::from_char(first as char).unwrap();
                let slot = lookup(id)?;
                let value = BitString::filled(sym, 1)
                    .extend_to(id_widths[slot])
                    .map_err(|e| toks.err(e.to_string()))?;
                (slot, value)
            }
            b'b' | b'B' => {
                let bits: BitString = tok[1..]
                    .parse()
                    .map_err(|e: BitsError| toks.err(format!("bad vector `{tok}`: {e}")))?;
                let id = toks.expect("id code after vector value")?;
                let slot = lookup(id)?;
                let value = if bits.width() == id_widths[slot] {
                    bits
                } else {
                    bits.extend_to(id_widths[slot])
                        .map_err(|e| toks.err(format!("vector `{tok}` too wide for `{id}`: {e}")))?
                };
                (slot, value)
            }
            b'r' | b'R' => {
                return Err(toks.err("real-valued changes are not supported"));
            }
            _ => return Err(toks.err(format!("unexpected token `{tok}` in body"))),
        };
        lists[slot].push(now, value);
        if times.last() != Some(&now) {
            times.push(now);
        }
    }
    let changes: HashMap<String, ChangeList> = ids.into_iter().cloned().zip(lists).collect();

    Ok(VcdDocument {
        timescale,
        root_scopes: roots,
        widths,
        changes,
        times,
        end_time,
    })
}

fn parse_timescale(s: &str) -> Option<Timescale> {
    let split = s.find(|c: char| !c.is_ascii_digit())?;
    let (mag, unit) = s.split_at(split);
    let magnitude: u32 = mag.parse().ok()?;
    if !matches!(magnitude, 1 | 10 | 100) {
        return None;
    }
    Some(Timescale {
        magnitude,
        unit: TimeUnit::parse(unit)?,
    })
}

/// Short printable id code for the `n`-th declared signal.
pub fn id_code(mut n: usize) -> String {
    const FIRST: u8 = b'!';
    const RADIX: usize = 94;
    let mut out = Vec::new();
    loop {
        out.push(FIRST + (n % RADIX) as u8);
        n /= RADIX;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    String::from_utf8(out).unwrap()
}

/// Incremental construction of a [`VcdDocument`], used by generators and tests.
#[derive(Debug)]
pub struct VcdBuilder {
    timescale: Timescale,
    stack: Vec<VcdScope>,
    roots: Vec<VcdScope>,
    widths: HashMap<String, u32>,
    order: Vec<String>,
    pending: Vec<(u64, usize, String, BitString)>,
}

impl VcdBuilder {
    pub fn new(timescale: Timescale) -> Self {
        VcdBuilder {
            timescale,
            stack: Vec::new(),
            roots: Vec::new(),
            widths: HashMap::new(),
            order: Vec::new(),
            pending: Vec::new(),
        }
    }

    pub fn open_scope(&mut self, kind: ScopeKind, name: &str) -> &mut Self {
        self.stack.push(VcdScope::new(name, kind));
        self
    }

    pub fn close_scope(&mut self) -> &mut Self {
        let done = self.stack.pop().expect("close_scope without open_scope");
        match self.stack.last_mut() {
            Some(p) => p.children.push(done),
            None => self.roots.push(done),
        }
        self
    }

    /// Declares a variable in the innermost open scope and returns its id code.
    pub fn var(&mut self, kind: VarKind, width: u32, name: &str) -> String {
        assert!(width >= 1);
        let id = id_code(self.order.len());
        self.order.push(id.clone());
        self.widths.insert(id.clone(), width);
        self.stack
            .last_mut()
            .expect("var outside of scope")
            .vars
            .push(VcdVar {
                id_code: id.clone(),
                name: name.to_string(),
                width,
                kind,
            });
        id
    }

    pub fn change(&mut self, time: u64, id: &str, value: BitString) -> &mut Self {
        let seq = self.pending.len();
        self.pending.push((time, seq, id.to_string(), value));
        self
    }

    pub fn finish(mut self, end_time: u64) -> Result<VcdDocument> {
        while !self.stack.is_empty() {
            self.close_scope();
        }
        self.pending.sort_by_key(|(t, seq, _, _)| (*t, *seq));
        let mut changes: HashMap<String, ChangeList> = self
            .order
            .iter()
            .map(|k| (k.clone(), ChangeList::default()))
            .collect();
        let mut times = Vec::new();
        let mut end = end_time;
        for (t, _, id, v) in self.pending {
            let width = *self
                .widths
                .get(&id)
                .ok_or_else(|| VcdError::UndeclaredId(id.clone()))?;
            let v = v.extend_to(width).map_err(|e| VcdError::Syntax {
                line: 0,
                message: e.to_string(),
            })?;
            changes.get_mut(&id).unwrap().push(t, v);
            if times.last() != Some(&t) {
                times.push(t);
            }
            end = end.max(t);
        }
        Ok(VcdDocument {
            timescale: self.timescale,
            root_scopes: self.roots,
            widths: self.widths,
            changes,
            times,
            end_time: end,
        })
    }
}
