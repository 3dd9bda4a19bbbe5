//! Decision procedure for first-order formulas over (naturals, +, <, =)
//! with base-2 automatic sequences: formulas compile to multi-track
//! automata whose accepted tuples are exactly the satisfying assignments.
//!
//! Conventions: digits are read most-significant first; every tuple is
//! zero-padded on the left to a common length, and every automaton built
//! here accepts independently of the amount of padding. Each track carries
//! one variable; tracks are kept sorted by name, so the compiled automaton
//! of a formula has one track per free variable, in sorted order. That
//! order is also the parameter order of a stored predicate.
//!
//! Addition is intrinsically deterministic least-significant-digit first,
//! so the sum relation is built lsd with a two-state carry and then
//! reversed (subset construction) into the msd convention. All other base
//! automata are built msd directly. Automata are re-minimized after every
//! product, complement, and projection, and a configurable state ceiling
//! aborts runaway constructions.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::dfao::{msd2, vtm_dfao, thue_morse, Dfao, DigitOrder};
use crate::formula::{parse_formula, Cmp, Formula, FormulaError, Term};
use crate::partition::{self, CompleteDfa};

/// Default bound on intermediate automaton sizes.
pub const DEFAULT_STATE_CEILING: usize = 1_000_000;

/// Command defining the predicate `dispo_pos(j)`: position j of vtm can be
/// deleted without creating a square.
pub const DISPO_POS_COMMAND: &str = r#"eval dispo_pos "?msd_2 Ai,n (i < j & j < i+2*n) => (Ek i <=
  k & ((j < i+n & k <= i+n) | (j >= i+n & k < i+n)) & (((j < k | j >
  k+n) & VTM[k] != VTM[k+n]) | ((k < j & j <= k+n) & VTM[k] !=
  VTM[k+n+1])))";"#;

/// Command defining `dispo_delta(l)`: l is a gap between consecutive
/// disposable positions of vtm beyond the initial one.
pub const DISPO_DELTA_COMMAND: &str = r#"eval dispo_delta "?msd_2 Ei,j i >=2 & j > i & j = i+l &
$dispo_pos(i) & $dispo_pos(j) & (Ak (i<k & k<j) =>
~$dispo_pos(k))";"#;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("state count {states} exceeds ceiling {ceiling} during {phase}")]
    StateCeiling {
        states: usize,
        ceiling: usize,
        phase: &'static str,
    },
    #[error("unknown sequence {0}")]
    UnknownSequence(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("predicate {name} takes {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("sequence {name} must read msd digits with a zero-stable initial state")]
    BadSequence { name: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("cannot parse command: {0}")]
    Command(String),
    #[error("operation needs a single-track automaton, got {0} tracks")]
    NotSingleTrack(usize),
    #[error("cannot parse automaton line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A complete, deterministic, minimized automaton over tuples of base-2
/// digits, one track per named variable. Symbol bit t is the digit of
/// `tracks[t]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackAutomaton {
    tracks: Vec<String>,
    dfa: CompleteDfa,
}

impl TrackAutomaton {
    fn new(tracks: Vec<String>, dfa: CompleteDfa) -> Self {
        debug_assert!(tracks.windows(2).all(|w| w[0] < w[1]), "tracks sorted");
        debug_assert_eq!(dfa.num_symbols, 1 << tracks.len());
        TrackAutomaton { tracks, dfa }
    }

    /// Accept-all or reject-all over the given tracks.
    pub fn trivial(mut tracks: Vec<String>, accept: bool) -> Self {
        tracks.sort();
        tracks.dedup();
        let k = 1usize << tracks.len();
        TrackAutomaton::new(
            tracks,
            CompleteDfa {
                num_symbols: k,
                delta: vec![0; k],
                labels: vec![accept as u32],
                initial: 0,
            },
        )
    }

    pub fn tracks(&self) -> &[String] {
        &self.tracks
    }

    pub fn num_states(&self) -> usize {
        self.dfa.num_states()
    }

    fn symbol_count(&self) -> usize {
        self.dfa.num_symbols
    }

    pub fn is_accepting(&self, state: u32) -> bool {
        self.dfa.labels[state as usize] == 1
    }

    pub fn initial(&self) -> u32 {
        self.dfa.initial
    }

    pub fn step(&self, state: u32, symbol: usize) -> u32 {
        self.dfa.step(state, symbol)
    }

    /// Runs a raw symbol string (already tuple-encoded).
    pub fn accepts_digits(&self, symbols: &[usize]) -> bool {
        let end = self.dfa.run(symbols.iter().copied());
        self.dfa.labels[end as usize] == 1
    }

    /// Acceptance of a value tuple, components in track order.
    pub fn eval(&self, values: &[u64]) -> bool {
        assert_eq!(values.len(), self.tracks.len(), "one value per track");
        self.accepts_digits(&tuple_symbols(values))
    }

    /// All accepted tuples with every component <= bound, sorted
    /// lexicographically.
    pub fn accepted_values(&self, bound: u64) -> Vec<Vec<u64>> {
        let k = self.tracks.len();
        if k == 0 {
            return if self.eval(&[]) { vec![vec![]] } else { vec![] };
        }
        let mut out = Vec::new();
        let mut tuple = vec![0u64; k];
        loop {
            if self.eval(&tuple) {
                out.push(tuple.clone());
            }
            // Lexicographic odometer, rightmost component fastest.
            let mut pos = k;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if tuple[pos] < bound {
                    tuple[pos] += 1;
                    break;
                }
                tuple[pos] = 0;
            }
        }
    }

    /// The full accepted set when it is finite: absent when the trimmed
    /// automaton has any cycle besides the initial zero-padding loop.
    pub fn accepted_set_if_finite(&self) -> Result<Option<Vec<u64>>, EngineError> {
        if self.tracks.len() != 1 {
            return Err(EngineError::NotSingleTrack(self.tracks.len()));
        }
        let m = self.minimize();
        let n = m.num_states();
        let dfa = &m.dfa;
        // Canonical minimization puts the initial state at 0 and merges it
        // with its zero successor (padding invariance).
        assert_eq!(dfa.initial, 0);
        assert_eq!(dfa.step(0, 0), 0, "initial state must absorb leading zeros");

        // Trim to states that can still reach a final state.
        let mut co = vec![false; n];
        let mut queue: VecDeque<u32> = (0..n as u32)
            .filter(|&s| dfa.labels[s as usize] == 1)
            .inspect(|&s| co[s as usize] = true)
            .collect();
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        for s in 0..n as u32 {
            for c in 0..2 {
                preds[dfa.step(s, c) as usize].push(s);
            }
        }
        while let Some(t) = queue.pop_front() {
            for &p in &preds[t as usize] {
                if !co[p as usize] {
                    co[p as usize] = true;
                    queue.push_back(p);
                }
            }
        }
        if !co[0] {
            return Ok(Some(Vec::new()));
        }

        // Cycle check over trimmed transitions, ignoring the padding loop.
        let co_ref = &co;
        let edges = move |s: u32| {
            (0..2usize).filter_map(move |c| {
                let t = dfa.step(s, c);
                if (s == 0 && c == 0) || !co_ref[t as usize] {
                    None
                } else {
                    Some((c, t))
                }
            })
        };
        type EdgeIter<'a> = Box<dyn Iterator<Item = (usize, u32)> + 'a>;
        let mut color = vec![0u8; n]; // 0 unvisited, 1 on stack, 2 done
        let mut stack: Vec<(u32, EdgeIter)> = Vec::new();
        color[0] = 1;
        stack.push((0, Box::new(edges(0))));
        while let Some((_, it)) = stack.last_mut() {
            match it.next() {
                Some((_, t)) => match color[t as usize] {
                    0 => {
                        color[t as usize] = 1;
                        stack.push((t, Box::new(edges(t))));
                    }
                    1 => return Ok(None),
                    _ => {}
                },
                None => {
                    let (s, _) = stack.pop().unwrap();
                    color[s as usize] = 2;
                }
            }
        }

        // Acyclic: enumerate every path from the initial state.
        let mut values = Vec::new();
        if dfa.labels[0] == 1 {
            values.push(0u64);
        }
        let mut path: Vec<(u32, u128)> = vec![(0, 0)];
        let mut iters: Vec<Box<dyn Iterator<Item = (usize, u32)> + '_>> = vec![Box::new(edges(0))];
        while let Some(it) = iters.last_mut() {
            match it.next() {
                Some((c, t)) => {
                    let v = path.last().unwrap().1 * 2 + c as u128;
                    if dfa.labels[t as usize] == 1 {
                        values.push(u64::try_from(v).expect("accepted value fits u64"));
                    }
                    path.push((t, v));
                    iters.push(Box::new(edges(t)));
                }
                None => {
                    iters.pop();
                    path.pop();
                }
            }
        }
        values.sort_unstable();
        values.dedup();
        Ok(Some(values))
    }

    /// Minimal automaton with canonical state numbering.
    pub fn minimize(&self) -> TrackAutomaton {
        TrackAutomaton::new(self.tracks.clone(), partition::minimize(&self.dfa))
    }

    pub fn complement(&self) -> TrackAutomaton {
        let mut dfa = self.dfa.clone();
        for l in &mut dfa.labels {
            *l = 1 - *l;
        }
        TrackAutomaton::new(self.tracks.clone(), partition::minimize(&dfa))
    }

    /// Boolean combination over the union of the two track sets.
    pub fn product_with(
        &self,
        other: &TrackAutomaton,
        op: impl Fn(bool, bool) -> bool,
        ceiling: usize,
    ) -> Result<TrackAutomaton, EngineError> {
        let mut union: Vec<String> = self.tracks.iter().chain(&other.tracks).cloned().collect();
        union.sort();
        union.dedup();
        let a = self.expand(&union);
        let b = other.expand(&union);
        let k = 1usize << union.len();

        let mut index: HashMap<(u32, u32), u32> = HashMap::new();
        let mut pairs: Vec<(u32, u32)> = vec![(a.initial, b.initial)];
        index.insert((a.initial, b.initial), 0);
        let mut delta = Vec::new();
        let mut labels = Vec::new();
        let mut head = 0;
        while head < pairs.len() {
            let (sa, sb) = pairs[head];
            head += 1;
            labels.push(
                op(a.labels[sa as usize] == 1, b.labels[sb as usize] == 1) as u32,
            );
            for c in 0..k {
                let succ = (a.step(sa, c), b.step(sb, c));
                let id = *index.entry(succ).or_insert_with(|| {
                    pairs.push(succ);
                    (pairs.len() - 1) as u32
                });
                delta.push(id);
            }
            if pairs.len() > ceiling {
                return Err(EngineError::StateCeiling {
                    states: pairs.len(),
                    ceiling,
                    phase: "product",
                });
            }
        }
        let dfa = CompleteDfa {
            num_symbols: k,
            delta,
            labels,
            initial: 0,
        };
        Ok(TrackAutomaton::new(union, partition::minimize(&dfa)))
    }

    /// Existential quantification: delete the track, determinize, minimize.
    /// A missing track is a no-op (the variable does not occur).
    pub fn project(&self, track: &str, ceiling: usize) -> Result<TrackAutomaton, EngineError> {
        let Some(p) = self.tracks.iter().position(|t| t == track) else {
            return Ok(self.clone());
        };
        let new_tracks: Vec<String> = self
            .tracks
            .iter()
            .filter(|t| *t != track)
            .cloned()
            .collect();
        let k_new = 1usize << new_tracks.len();
        let lift = |sym: usize, bit: usize| -> usize {
            let low = sym & ((1 << p) - 1);
            let high = sym >> p;
            low | (bit << p) | (high << (p + 1))
        };

        // The witness for the deleted track may have a longer representation
        // than the remaining tracks, so the start set must absorb leading
        // symbols that are zero on every remaining track.
        let mut initial = vec![self.dfa.initial];
        let mut seen: Vec<bool> = vec![false; self.num_states()];
        seen[self.dfa.initial as usize] = true;
        let mut head = 0;
        while head < initial.len() {
            let s = initial[head];
            head += 1;
            for bit in 0..2 {
                let t = self.dfa.step(s, lift(0, bit));
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    initial.push(t);
                }
            }
        }
        initial.sort_unstable();

        let dfa = determinize(
            k_new,
            initial,
            |s, sym, buf| {
                buf.push(self.dfa.step(s, lift(sym, 0)));
                buf.push(self.dfa.step(s, lift(sym, 1)));
            },
            |s| self.dfa.labels[s as usize] == 1,
            ceiling,
            "projection",
        )?;
        Ok(TrackAutomaton::new(new_tracks, partition::minimize(&dfa)))
    }

    /// Renames tracks (used to wire predicate parameters to call sites).
    /// The renaming must keep names distinct.
    pub fn rename_tracks(&self, mapping: &[(String, String)]) -> TrackAutomaton {
        let renamed: Vec<String> = self
            .tracks
            .iter()
            .map(|t| {
                mapping
                    .iter()
                    .find(|(old, _)| old == t)
                    .map(|(_, new)| new.clone())
                    .unwrap_or_else(|| t.clone())
            })
            .collect();
        let mut order: Vec<usize> = (0..renamed.len()).collect();
        order.sort_by(|&a, &b| renamed[a].cmp(&renamed[b]));
        let new_tracks: Vec<String> = order.iter().map(|&i| renamed[i].clone()).collect();
        assert!(
            new_tracks.windows(2).all(|w| w[0] != w[1]),
            "track renaming must keep names distinct"
        );
        let k = self.symbol_count();
        let n = self.num_states();
        let mut delta = vec![0u32; n * k];
        for sym in 0..k {
            // Bit j of the new symbol is the digit of old track order[j].
            let old_sym = order
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, &old)| acc | (((sym >> j) & 1) << old));
            for s in 0..n {
                delta[s * k + sym] = self.dfa.delta[s * k + old_sym];
            }
        }
        TrackAutomaton::new(
            new_tracks,
            CompleteDfa {
                num_symbols: k,
                delta,
                labels: self.dfa.labels.clone(),
                initial: self.dfa.initial,
            },
        )
    }

    /// Same states, alphabet widened to the given superset of tracks.
    fn expand(&self, union: &[String]) -> CompleteDfa {
        if union == self.tracks.as_slice() {
            return self.dfa.clone();
        }
        let positions: Vec<usize> = self
            .tracks
            .iter()
            .map(|t| union.iter().position(|u| u == t).expect("track in union"))
            .collect();
        let uk = 1usize << union.len();
        let ok = self.symbol_count();
        let n = self.num_states();
        let mut delta = vec![0u32; n * uk];
        for sym in 0..uk {
            let old_sym = positions
                .iter()
                .enumerate()
                .fold(0usize, |acc, (ot, &ut)| acc | (((sym >> ut) & 1) << ot));
            for s in 0..n {
                delta[s * uk + sym] = self.dfa.delta[s * ok + old_sym];
            }
        }
        CompleteDfa {
            num_symbols: uk,
            delta,
            labels: self.dfa.labels.clone(),
            initial: self.dfa.initial,
        }
    }

    /// Text form: a `tracks` line, a header, transitions with the symbol
    /// written as one digit per track, then 0/1 outputs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.tracks.is_empty() {
            out.push_str("tracks -\n");
        } else {
            out.push_str(&format!("tracks {}\n", self.tracks.join(",")));
        }
        out.push_str(&format!(
            "states {}, initial {}, order msd\n",
            self.num_states(),
            self.dfa.initial
        ));
        for s in 0..self.num_states() as u32 {
            for sym in 0..self.symbol_count() {
                let digits: String = (0..self.tracks.len())
                    .map(|t| if (sym >> t) & 1 == 1 { '1' } else { '0' })
                    .collect();
                let digits = if digits.is_empty() { "-".to_string() } else { digits };
                out.push_str(&format!("{s} {digits} -> {}\n", self.dfa.step(s, sym)));
            }
        }
        for s in 0..self.num_states() as u32 {
            out.push_str(&format!("output {s} = {}\n", self.dfa.labels[s as usize]));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, EngineError> {
        let err = |line: usize, reason: &str| EngineError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (tline, tracks_line) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let tracks: Vec<String> = match tracks_line.strip_prefix("tracks") {
            Some(rest) => {
                let rest = rest.trim();
                if rest == "-" {
                    Vec::new()
                } else {
                    rest.split(',').map(|t| t.trim().to_string()).collect()
                }
            }
            None => return Err(err(tline, "expected `tracks ...`")),
        };
        if !tracks.windows(2).all(|w| w[0] < w[1]) {
            return Err(err(tline, "tracks must be sorted and distinct"));
        }
        let k = 1usize << tracks.len();

        let (hline, header) = lines.next().ok_or_else(|| err(2, "missing header"))?;
        let mut states = None;
        let mut initial = None;
        for field in header.split(',') {
            let mut it = field.split_whitespace();
            match (it.next(), it.next()) {
                (Some("states"), Some(v)) => {
                    states = Some(v.parse::<usize>().map_err(|_| err(hline, "bad state count"))?)
                }
                (Some("initial"), Some(v)) => {
                    initial = Some(v.parse::<u32>().map_err(|_| err(hline, "bad initial"))?)
                }
                (Some("order"), Some("msd")) => {}
                _ => return Err(err(hline, "expected `states k, initial i, order msd`")),
            }
        }
        let (states, initial) = match (states, initial) {
            (Some(s), Some(i)) if (i as usize) < s => (s, i),
            _ => return Err(err(hline, "incomplete or inconsistent header")),
        };

        let mut delta = vec![u32::MAX; states * k];
        let mut labels = vec![u32::MAX; states];
        for (lineno, line) in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                ["output", s, "=", l] => {
                    let s: usize = s.parse().map_err(|_| err(lineno, "bad state"))?;
                    let l: u32 = l.parse().map_err(|_| err(lineno, "bad output"))?;
                    if s >= states || l > 1 {
                        return Err(err(lineno, "state or output out of range"));
                    }
                    labels[s] = l;
                }
                [s, digits, "->", t] => {
                    let s: usize = s.parse().map_err(|_| err(lineno, "bad state"))?;
                    let t: u32 = t.parse().map_err(|_| err(lineno, "bad target"))?;
                    let sym = if tracks.is_empty() {
                        if *digits != "-" {
                            return Err(err(lineno, "expected `-` symbol"));
                        }
                        0
                    } else {
                        if digits.len() != tracks.len() {
                            return Err(err(lineno, "symbol width != track count"));
                        }
                        digits.chars().enumerate().try_fold(0usize, |acc, (t, c)| {
                            match c {
                                '0' => Ok(acc),
                                '1' => Ok(acc | (1 << t)),
                                _ => Err(err(lineno, "symbol digits must be 0/1")),
                            }
                        })?
                    };
                    if s >= states || t as usize >= states {
                        return Err(err(lineno, "state out of range"));
                    }
                    delta[s * k + sym] = t;
                }
                _ => return Err(err(lineno, "expected transition or output line")),
            }
        }
        if delta.contains(&u32::MAX) {
            return Err(err(0, "missing transitions"));
        }
        if labels.contains(&u32::MAX) {
            return Err(err(0, "missing outputs"));
        }
        Ok(TrackAutomaton::new(
            tracks,
            CompleteDfa {
                num_symbols: k,
                delta,
                labels,
                initial,
            },
        ))
    }
}

/// Tuple-encoded msd symbols for a value tuple, canonical common length.
fn tuple_symbols(values: &[u64]) -> Vec<usize> {
    let len = values
        .iter()
        .map(|&v| (64 - v.leading_zeros()) as usize)
        .max()
        .unwrap_or(0);
    (0..len)
        .map(|pos| {
            values.iter().enumerate().fold(0usize, |acc, (t, &v)| {
                acc | ((((v >> (len - 1 - pos)) & 1) as usize) << t)
            })
        })
        .collect()
}

/// Subset construction. `next` appends the successors of (state, symbol).
fn determinize(
    num_symbols: usize,
    initial: Vec<u32>,
    mut next: impl FnMut(u32, usize, &mut Vec<u32>),
    is_final: impl Fn(u32) -> bool,
    ceiling: usize,
    phase: &'static str,
) -> Result<CompleteDfa, EngineError> {
    let mut index: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut subsets: Vec<Vec<u32>> = vec![initial.clone()];
    index.insert(initial, 0);
    let mut delta = Vec::new();
    let mut labels = Vec::new();
    let mut head = 0;
    let mut buf = Vec::new();
    while head < subsets.len() {
        let subset = subsets[head].clone();
        head += 1;
        labels.push(subset.iter().any(|&s| is_final(s)) as u32);
        for sym in 0..num_symbols {
            buf.clear();
            for &s in &subset {
                next(s, sym, &mut buf);
            }
            buf.sort_unstable();
            buf.dedup();
            let id = match index.get(&buf) {
                Some(&id) => id,
                None => {
                    let id = subsets.len() as u32;
                    subsets.push(buf.clone());
                    index.insert(buf.clone(), id);
                    id
                }
            };
            delta.push(id);
        }
        if subsets.len() > ceiling {
            return Err(EngineError::StateCeiling {
                states: subsets.len(),
                ceiling,
                phase,
            });
        }
    }
    Ok(CompleteDfa {
        num_symbols,
        delta,
        labels,
        initial: 0,
    })
}

// -------------------------------------------------------- base automata

/// Truth of `cmp` when both sides are the same value.
fn reflexive(cmp: Cmp) -> bool {
    matches!(cmp, Cmp::Eq | Cmp::Le | Cmp::Ge)
}

/// Comparison x cmp y as a 3-state msd machine (undecided / less / greater).
fn compare_vars(x: &str, y: &str, cmp: Cmp) -> TrackAutomaton {
    if x == y {
        return TrackAutomaton::trivial(vec![x.to_string()], reflexive(cmp));
    }
    let mut tracks = vec![x.to_string(), y.to_string()];
    tracks.sort();
    let bx = tracks.iter().position(|t| t == x).unwrap();
    let by = 1 - bx;
    let mut delta = vec![0u32; 3 * 4];
    for sym in 0..4usize {
        let dx = (sym >> bx) & 1;
        let dy = (sym >> by) & 1;
        delta[sym] = match dx.cmp(&dy) {
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Less => 1,
            std::cmp::Ordering::Greater => 2,
        };
        delta[4 + sym] = 1;
        delta[8 + sym] = 2;
    }
    let labels = vec![
        reflexive(cmp) as u32,
        matches!(cmp, Cmp::Lt | Cmp::Le | Cmp::Ne) as u32,
        matches!(cmp, Cmp::Gt | Cmp::Ge | Cmp::Ne) as u32,
    ];
    let dfa = CompleteDfa {
        num_symbols: 4,
        delta,
        labels,
        initial: 0,
    };
    TrackAutomaton::new(tracks, partition::minimize(&dfa))
}

/// x = k over the single track x, msd digit chain after leading padding.
fn var_equals_const(x: &str, k: u64) -> TrackAutomaton {
    let digits = msd2(k);
    let m = digits.len();
    // States: 0 = padding, 1..=m = matched that many digits, m+1 = dead.
    let n = m + 2;
    let dead = (m + 1) as u32;
    let mut delta = vec![dead; n * 2];
    delta[0] = 0;
    if m > 0 {
        delta[1] = 1; // first significant digit is always 1
        for (i, &d) in digits.iter().enumerate().skip(1) {
            delta[i * 2 + d as usize] = (i + 1) as u32;
        }
    }
    let mut labels = vec![0u32; n];
    labels[m] = 1;
    let dfa = CompleteDfa {
        num_symbols: 2,
        delta,
        labels,
        initial: 0,
    };
    TrackAutomaton::new(vec![x.to_string()], partition::minimize(&dfa))
}

/// The relation x + y = z (z distinct from x and y; x may equal y, which
/// gives the doubling relation). Built lsd-first with a carry state, then
/// reversed into msd.
fn sum_automaton(x: &str, y: &str, z: &str, ceiling: usize) -> Result<TrackAutomaton, EngineError> {
    assert!(z != x && z != y, "sum target track must be fresh");
    let mut tracks: Vec<String> = vec![x.to_string(), z.to_string()];
    if x != y {
        tracks.push(y.to_string());
    }
    tracks.sort();
    let bx = tracks.iter().position(|t| t == x).unwrap();
    let by = tracks.iter().position(|t| t == y).unwrap();
    let bz = tracks.iter().position(|t| t == z).unwrap();
    let k = 1usize << tracks.len();

    // States: carry 0 (accepting), carry 1, dead.
    let mut delta = vec![2u32; 3 * k];
    for sym in 0..k {
        let dx = (sym >> bx) & 1;
        let dy = (sym >> by) & 1;
        let dz = (sym >> bz) & 1;
        for carry in 0..2usize {
            let t = dx + dy + carry;
            if t & 1 == dz {
                delta[carry * k + sym] = (t >> 1) as u32;
            }
        }
    }
    let lsd = CompleteDfa {
        num_symbols: k,
        delta,
        labels: vec![1, 0, 0],
        initial: 0,
    };

    // Reverse: initial set = accepting states, finals = old initial.
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); 3 * k];
    for s in 0..3u32 {
        for sym in 0..k {
            preds[lsd.step(s, sym) as usize * k + sym].push(s);
        }
    }
    let initial: Vec<u32> = (0..3u32).filter(|&s| lsd.labels[s as usize] == 1).collect();
    let dfa = determinize(
        k,
        initial,
        |s, sym, buf| buf.extend_from_slice(&preds[s as usize * k + sym]),
        |s| s == lsd.initial,
        ceiling,
        "sum reversal",
    )?;
    Ok(TrackAutomaton::new(tracks, partition::minimize(&dfa)))
}

/// left_d[x] cmp right_d[y] for distinct variables x, y: run both automata
/// in product and accept by comparing their outputs.
fn sequence_pair(
    left_d: &Dfao,
    right_d: &Dfao,
    x: &str,
    cmp: Cmp,
    y: &str,
) -> TrackAutomaton {
    assert_ne!(x, y);
    let mut tracks = vec![x.to_string(), y.to_string()];
    tracks.sort();
    let bx = tracks.iter().position(|t| t == x).unwrap();
    let by = 1 - bx;
    let nr = right_d.state_count() as u32;
    let encode = |a: u32, b: u32| a * nr + b;
    let n = left_d.state_count() * right_d.state_count();
    let mut delta = vec![0u32; n * 4];
    let mut labels = vec![0u32; n];
    for a in 0..left_d.state_count() as u32 {
        for b in 0..nr {
            let s = encode(a, b) as usize;
            labels[s] = cmp.holds(left_d.output(a), right_d.output(b)) as u32;
            for sym in 0..4usize {
                let dx = ((sym >> bx) & 1) as u8;
                let dy = ((sym >> by) & 1) as u8;
                delta[s * 4 + sym] = encode(left_d.step(a, dx), right_d.step(b, dy));
            }
        }
    }
    let dfa = CompleteDfa {
        num_symbols: 4,
        delta,
        labels,
        initial: encode(left_d.initial(), right_d.initial()),
    };
    TrackAutomaton::new(tracks, partition::minimize(&dfa))
}

/// left_d[x] cmp right_d[x]: both automata run on the same track.
fn sequence_pair_same_var(left_d: &Dfao, right_d: &Dfao, x: &str, cmp: Cmp) -> TrackAutomaton {
    let nr = right_d.state_count() as u32;
    let encode = |a: u32, b: u32| a * nr + b;
    let n = left_d.state_count() * right_d.state_count();
    let mut delta = vec![0u32; n * 2];
    let mut labels = vec![0u32; n];
    for a in 0..left_d.state_count() as u32 {
        for b in 0..nr {
            let s = encode(a, b) as usize;
            labels[s] = cmp.holds(left_d.output(a), right_d.output(b)) as u32;
            for d in 0..2u8 {
                delta[s * 2 + d as usize] = encode(left_d.step(a, d), right_d.step(b, d));
            }
        }
    }
    let dfa = CompleteDfa {
        num_symbols: 2,
        delta,
        labels,
        initial: encode(left_d.initial(), right_d.initial()),
    };
    TrackAutomaton::new(vec![x.to_string()], partition::minimize(&dfa))
}

// ------------------------------------------------------------- compiler

struct Compiler<'e> {
    env: &'e PredicateEnv,
    fresh: usize,
}

impl Compiler<'_> {
    fn ceiling(&self) -> usize {
        self.env.ceiling
    }

    fn fresh_var(&mut self) -> String {
        self.fresh += 1;
        // '~' cannot appear in parsed identifiers, so this never collides.
        format!("~t{}", self.fresh)
    }

    fn compile(&mut self, f: &Formula) -> Result<TrackAutomaton, EngineError> {
        match f {
            Formula::Compare(a, cmp, b) => {
                let mut atom = AtomParts::default();
                let va = self.term_var(a, &mut atom)?;
                let vb = self.term_var(b, &mut atom)?;
                self.finish_atom(compare_vars(&va, &vb, *cmp), atom)
            }
            Formula::SeqCmp {
                left_seq,
                left,
                cmp,
                right_seq,
                right,
            } => {
                let ld = self.env.sequence(left_seq)?;
                let rd = self.env.sequence(right_seq)?;
                let mut atom = AtomParts::default();
                let vl = self.term_var(left, &mut atom)?;
                let vr = self.term_var(right, &mut atom)?;
                let core = if vl == vr {
                    sequence_pair_same_var(ld, rd, &vl, *cmp)
                } else {
                    sequence_pair(ld, rd, &vl, *cmp, &vr)
                };
                self.finish_atom(core, atom)
            }
            Formula::Call { name, args } => {
                let stored = match self.env.predicates.get(name) {
                    Some(a) => a.clone(),
                    None => return Err(EngineError::UnknownPredicate(name.clone())),
                };
                if stored.tracks.len() != args.len() {
                    return Err(EngineError::Arity {
                        name: name.clone(),
                        expected: stored.tracks.len(),
                        got: args.len(),
                    });
                }
                let params: Vec<String> = (0..args.len()).map(|_| self.fresh_var()).collect();
                let mapping: Vec<(String, String)> = stored
                    .tracks
                    .iter()
                    .cloned()
                    .zip(params.iter().cloned())
                    .collect();
                let mut atom = AtomParts::default();
                atom.fresh.extend(params.iter().cloned());
                let core = stored.rename_tracks(&mapping);
                for (param, arg) in params.iter().zip(args) {
                    let v = self.term_var(arg, &mut atom)?;
                    atom.constraints.push(compare_vars(param, &v, Cmp::Eq));
                }
                self.finish_atom(core, atom)
            }
            Formula::Not(g) => Ok(self.compile(g)?.complement()),
            Formula::And(a, b) => {
                let x = self.compile(a)?;
                let y = self.compile(b)?;
                x.product_with(&y, |p, q| p && q, self.ceiling())
            }
            Formula::Or(a, b) => {
                let x = self.compile(a)?;
                let y = self.compile(b)?;
                x.product_with(&y, |p, q| p || q, self.ceiling())
            }
            Formula::Implies(a, b) => {
                let x = self.compile(a)?;
                let y = self.compile(b)?;
                x.product_with(&y, |p, q| !p || q, self.ceiling())
            }
            Formula::Exists(vars, g) => {
                let mut a = self.compile(g)?;
                for v in vars {
                    a = a.project(v, self.ceiling())?;
                }
                Ok(a)
            }
            Formula::Forall(vars, g) => {
                let mut a = self.compile(g)?.complement();
                for v in vars {
                    a = a.project(v, self.ceiling())?;
                }
                Ok(a.complement())
            }
        }
    }

    /// Reduces a term to a carrier variable, emitting equality constraints
    /// and fresh variables for constants and sums.
    fn term_var(&mut self, t: &Term, atom: &mut AtomParts) -> Result<String, EngineError> {
        match t {
            Term::Var(v) => Ok(v.clone()),
            Term::Const(c) => {
                let f = self.fresh_var();
                atom.constraints.push(var_equals_const(&f, *c));
                atom.fresh.push(f.clone());
                Ok(f)
            }
            Term::Add(a, b) => {
                let va = self.term_var(a, atom)?;
                let vb = self.term_var(b, atom)?;
                let f = self.fresh_var();
                atom.constraints
                    .push(sum_automaton(&va, &vb, &f, self.ceiling())?);
                atom.fresh.push(f.clone());
                Ok(f)
            }
        }
    }

    /// Conjoins the constraints onto the core and projects the fresh
    /// variables away.
    fn finish_atom(
        &self,
        core: TrackAutomaton,
        atom: AtomParts,
    ) -> Result<TrackAutomaton, EngineError> {
        let mut a = core;
        for c in atom.constraints {
            a = a.product_with(&c, |p, q| p && q, self.ceiling())?;
        }
        for f in atom.fresh {
            a = a.project(&f, self.ceiling())?;
        }
        Ok(a)
    }
}

#[derive(Default)]
struct AtomParts {
    constraints: Vec<TrackAutomaton>,
    fresh: Vec<String>,
}

// ------------------------------------------------------- environment

/// Named automatic sequences and compiled predicates, plus the state
/// ceiling applied to constructions.
pub struct PredicateEnv {
    sequences: BTreeMap<String, Dfao>,
    predicates: BTreeMap<String, TrackAutomaton>,
    ceiling: usize,
}

impl Default for PredicateEnv {
    fn default() -> Self {
        PredicateEnv::standard()
    }
}

impl PredicateEnv {
    pub fn new() -> Self {
        PredicateEnv {
            sequences: BTreeMap::new(),
            predicates: BTreeMap::new(),
            ceiling: DEFAULT_STATE_CEILING,
        }
    }

    /// Environment with the builtin sequences VTM (the squarefree word) and
    /// T (Thue-Morse) registered.
    pub fn standard() -> Self {
        let mut env = PredicateEnv::new();
        env.register_sequence("VTM", vtm_dfao()).unwrap();
        env.register_sequence("T", thue_morse()).unwrap();
        env
    }

    /// Sequences must read msd digits and ignore leading zeros.
    pub fn register_sequence(&mut self, name: &str, d: Dfao) -> Result<(), EngineError> {
        if d.digit_order() != DigitOrder::Msd || d.step(d.initial(), 0) != d.initial() {
            return Err(EngineError::BadSequence {
                name: name.to_string(),
            });
        }
        self.sequences.insert(name.to_string(), d);
        Ok(())
    }

    pub fn register_predicate(&mut self, name: &str, a: TrackAutomaton) {
        self.predicates.insert(name.to_string(), a);
    }

    pub fn sequence(&self, name: &str) -> Result<&Dfao, EngineError> {
        self.sequences
            .get(name)
            .ok_or_else(|| EngineError::UnknownSequence(name.to_string()))
    }

    pub fn predicate(&self, name: &str) -> Option<&TrackAutomaton> {
        self.predicates.get(name)
    }

    pub fn set_state_ceiling(&mut self, ceiling: usize) {
        self.ceiling = ceiling;
    }

    pub fn state_ceiling(&self) -> usize {
        self.ceiling
    }

    /// Compiles to a minimal automaton whose tracks are the free variables
    /// in sorted order.
    pub fn compile(&self, f: &Formula) -> Result<TrackAutomaton, EngineError> {
        let mut compiler = Compiler {
            env: self,
            fresh: 0,
        };
        let a = compiler.compile(f)?;
        debug_assert_eq!(a.tracks, f.free_variables());
        Ok(a)
    }

    pub fn compile_text(&self, text: &str) -> Result<TrackAutomaton, EngineError> {
        let f = parse_formula(text)?;
        self.compile(&f)
    }

    /// Compiles and stores a predicate; later formulas can call it as
    /// `$name(...)` with arguments bound to its free variables in sorted
    /// order.
    pub fn define_predicate(
        &mut self,
        name: &str,
        formula_text: &str,
    ) -> Result<&TrackAutomaton, EngineError> {
        let a = self.compile_text(formula_text)?;
        self.predicates.insert(name.to_string(), a);
        Ok(&self.predicates[name])
    }

    /// Runs one `eval name "formula";` command.
    pub fn run_command(&mut self, command: &str) -> Result<(String, &TrackAutomaton), EngineError> {
        let (name, formula_text) = parse_eval_command(command)?;
        self.define_predicate(&name, &formula_text)?;
        Ok((name.clone(), &self.predicates[&name]))
    }
}

/// Splits `eval name "formula";` into the name and the quoted formula.
pub fn parse_eval_command(command: &str) -> Result<(String, String), EngineError> {
    let bad = |reason: &str| EngineError::Command(reason.to_string());
    let s = command.trim();
    let rest = s
        .strip_prefix("eval")
        .ok_or_else(|| bad("expected `eval`"))?;
    let rest = rest.trim_start();
    let name_len = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    if name_len == 0 {
        return Err(bad("missing predicate name"));
    }
    let name = rest[..name_len].to_string();
    let rest = rest[name_len..].trim_start();
    let rest = rest
        .strip_prefix('"')
        .ok_or_else(|| bad("missing opening quote"))?;
    let close = rest.rfind('"').ok_or_else(|| bad("missing closing quote"))?;
    let formula = rest[..close].to_string();
    let tail = rest[close + 1..].trim();
    if !(tail.is_empty() || tail == ";") {
        return Err(bad("unexpected text after closing quote"));
    }
    Ok((name, formula))
}
