//! Deterministic finite automata with output (DFAOs) over base-2 digits.
//!
//! A DFAO computes an automatic sequence: feeding the binary digits of `n`
//! drives the machine to a state whose output letter is `sequence[n]`.
//! The canonical representation is most-significant-digit first with no
//! leading zeros; `msd2(0)` is the empty string, so the initial state's
//! output is `sequence[0]`.

use std::fmt;

use thiserror::Error;

use crate::partition::{self, CompleteDfa};

#[derive(Debug, Error)]
pub enum DfaoError {
    #[error("transition from state {state} on digit {digit} targets missing state {target}")]
    BadTransition { state: u32, digit: u8, target: u32 },
    #[error("initial state {initial} out of range ({state_count} states)")]
    BadInitial { initial: u32, state_count: usize },
    #[error("cannot parse line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DigitOrder {
    Msd,
    Lsd,
}

impl fmt::Display for DigitOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DigitOrder::Msd => "msd",
            DigitOrder::Lsd => "lsd",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfao {
    initial: u32,
    delta: Vec<u32>,
    output: Vec<u8>,
    order: DigitOrder,
}

impl Dfao {
    pub fn new(
        initial: u32,
        delta: Vec<[u32; 2]>,
        output: Vec<u8>,
        order: DigitOrder,
    ) -> Result<Self, DfaoError> {
        let state_count = output.len();
        if initial as usize >= state_count {
            return Err(DfaoError::BadInitial {
                initial,
                state_count,
            });
        }
        let mut flat = Vec::with_capacity(state_count * 2);
        for (state, row) in delta.iter().enumerate() {
            for (digit, &target) in row.iter().enumerate() {
                if target as usize >= state_count {
                    return Err(DfaoError::BadTransition {
                        state: state as u32,
                        digit: digit as u8,
                        target,
                    });
                }
                flat.push(target);
            }
        }
        Ok(Dfao {
            initial,
            delta: flat,
            output,
            order,
        })
    }

    pub fn state_count(&self) -> usize {
        self.output.len()
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    pub fn digit_order(&self) -> DigitOrder {
        self.order
    }

    pub fn step(&self, state: u32, digit: u8) -> u32 {
        self.delta[state as usize * 2 + digit as usize]
    }

    pub fn output(&self, state: u32) -> u8 {
        self.output[state as usize]
    }

    /// Runs digits as given (already in this automaton's digit order).
    pub fn eval_digits(&self, digits: impl IntoIterator<Item = u8>) -> u8 {
        let mut state = self.initial;
        for d in digits {
            state = self.step(state, d);
        }
        self.output(state)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "states {}, initial {}, order {}\n",
            self.state_count(),
            self.initial,
            self.order
        );
        for state in 0..self.state_count() as u32 {
            for digit in 0..2u8 {
                out.push_str(&format!("{state} {digit} -> {}\n", self.step(state, digit)));
            }
        }
        for state in 0..self.state_count() as u32 {
            out.push_str(&format!("output {state} = {}\n", self.output(state)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DfaoError> {
        let parse_err = |line: usize, reason: &str| DfaoError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
        let mut states = None;
        let mut initial = None;
        let mut order = None;
        for field in header.split(',') {
            let mut it = field.split_whitespace();
            match (it.next(), it.next()) {
                (Some("states"), Some(v)) => {
                    states = Some(v.parse::<usize>().map_err(|_| {
                        parse_err(hline, "bad state count")
                    })?)
                }
                (Some("initial"), Some(v)) => {
                    initial = Some(v.parse::<u32>().map_err(|_| {
                        parse_err(hline, "bad initial state")
                    })?)
                }
                (Some("order"), Some("msd")) => order = Some(DigitOrder::Msd),
                (Some("order"), Some("lsd")) => order = Some(DigitOrder::Lsd),
                _ => return Err(parse_err(hline, "expected `states k, initial i, order msd|lsd`")),
            }
        }
        let (states, initial, order) = match (states, initial, order) {
            (Some(s), Some(i), Some(o)) => (s, i, o),
            _ => return Err(parse_err(hline, "incomplete header")),
        };

        let mut delta = vec![[u32::MAX; 2]; states];
        let mut output = vec![u8::MAX; states];
        let mut output_seen = vec![false; states];
        for (lineno, line) in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                ["output", s, "=", letter] => {
                    let s: usize = s.parse().map_err(|_| parse_err(lineno, "bad state"))?;
                    if s >= states {
                        return Err(parse_err(lineno, "state out of range"));
                    }
                    output[s] = letter.parse().map_err(|_| parse_err(lineno, "bad letter"))?;
                    output_seen[s] = true;
                }
                [s, d, "->", t] => {
                    let s: usize = s.parse().map_err(|_| parse_err(lineno, "bad state"))?;
                    let d: usize = d.parse().map_err(|_| parse_err(lineno, "bad digit"))?;
                    let t: u32 = t.parse().map_err(|_| parse_err(lineno, "bad target"))?;
                    if s >= states || d >= 2 {
                        return Err(parse_err(lineno, "state or digit out of range"));
                    }
                    delta[s][d] = t;
                }
                _ => return Err(parse_err(lineno, "expected transition or output line")),
            }
        }
        for (s, row) in delta.iter().enumerate() {
            for (d, &t) in row.iter().enumerate() {
                if t == u32::MAX {
                    return Err(parse_err(0, &format!("missing transition {s} {d}")));
                }
            }
        }
        if let Some(s) = output_seen.iter().position(|&seen| !seen) {
            return Err(parse_err(0, &format!("missing output for state {s}")));
        }
        Dfao::new(initial, delta, output, order)
    }
}

/// Base-2 digits of n, most significant first, no leading zeros; 0 -> empty.
pub fn msd2(n: u64) -> Vec<u8> {
    if n == 0 {
        return Vec::new();
    }
    let bits = 64 - n.leading_zeros() as u64;
    (0..bits).rev().map(|i| ((n >> i) & 1) as u8).collect()
}

/// Output of `d` on the canonical representation of n.
pub fn eval_dfao(d: &Dfao, n: u64) -> u8 {
    let digits = msd2(n);
    match d.digit_order() {
        DigitOrder::Msd => d.eval_digits(digits),
        DigitOrder::Lsd => d.eval_digits(digits.into_iter().rev()),
    }
}

/// The Thue-Morse sequence t(n) = parity of ones in the binary digits of n.
pub fn thue_morse() -> Dfao {
    Dfao::new(0, vec![[0, 1], [1, 0]], vec![0, 1], DigitOrder::Msd).unwrap()
}

/// Parity of the run of trailing 1-digits of n. Determines the carry chain
/// of n+1: if the run has length j, then t(n+1) = t(n) xor parity(j+1).
fn trailing_ones_parity() -> Dfao {
    Dfao::new(0, vec![[0, 1], [0, 0]], vec![0, 1], DigitOrder::Msd).unwrap()
}

/// A DFAO computing `vtm[n]`, built from the identity
/// `vtm[n] = c(t(n), t(n+1))` with c: (0,1)->0, (1,1)->1, (1,0)->2,
/// (0,0)->1, as the product of the t(n) automaton and the trailing-ones
/// parity automaton (which yields t(n+1)), then minimized.
pub fn vtm_dfao() -> Dfao {
    let tm = thue_morse();
    let tr = trailing_ones_parity();
    let pair_map = |t_n: u8, t_n1: u8| match (t_n, t_n1) {
        (0, 1) => 0,
        (1, 1) => 1,
        (1, 0) => 2,
        (0, 0) => 1,
        _ => unreachable!(),
    };

    // Product state (a, b) encoded as a * tr_states + b.
    let tr_states = tr.state_count() as u32;
    let mut delta = Vec::new();
    let mut output = Vec::new();
    for a in 0..tm.state_count() as u32 {
        for b in 0..tr_states {
            delta.push([
                tm.step(a, 0) * tr_states + tr.step(b, 0),
                tm.step(a, 1) * tr_states + tr.step(b, 1),
            ]);
            let t_n = tm.output(a);
            let t_n1 = t_n ^ tr.output(b) ^ 1;
            output.push(pair_map(t_n, t_n1));
        }
    }
    let product = Dfao::new(
        tm.initial() * tr_states + tr.initial(),
        delta,
        output,
        DigitOrder::Msd,
    )
    .unwrap();
    minimize_dfao(&product)
}

/// Output-equivalent DFAO with the minimal number of states, canonically
/// numbered breadth-first from the initial state.
pub fn minimize_dfao(d: &Dfao) -> Dfao {
    let min = partition::minimize(&CompleteDfa {
        num_symbols: 2,
        delta: d.delta.clone(),
        labels: d.output.iter().map(|&o| o as u32).collect(),
        initial: d.initial,
    });
    let delta = (0..min.num_states())
        .map(|s| [min.delta[s * 2], min.delta[s * 2 + 1]])
        .collect();
    let output = min.labels.iter().map(|&l| l as u8).collect();
    Dfao::new(min.initial, delta, output, d.order).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphism::vtm_stream;

    #[test]
    fn msd2_examples() {
        assert!(msd2(0).is_empty());
        assert_eq!(msd2(6), vec![1, 1, 0]);
        assert_eq!(msd2(26), vec![1, 1, 0, 1, 0]);
        assert_eq!(msd2(1), vec![1]);
    }

    #[test]
    fn thue_morse_is_ones_parity() {
        let tm = thue_morse();
        for n in 0..1u64 << 16 {
            assert_eq!(eval_dfao(&tm, n), (n.count_ones() % 2) as u8, "n = {n}");
        }
    }

    #[test]
    fn vtm_dfao_first_letters() {
        let d = vtm_dfao();
        let expect = [0, 1, 2, 0, 2, 1, 0, 1, 2, 1, 0, 2];
        for (n, &letter) in expect.iter().enumerate() {
            assert_eq!(eval_dfao(&d, n as u64), letter, "n = {n}");
        }
    }

    #[test]
    fn vtm_dfao_matches_morphic_stream() {
        let d = vtm_dfao();
        let prefix = vtm_stream().prefix(1 << 20).unwrap();
        for (n, &letter) in prefix.iter().enumerate() {
            assert_eq!(eval_dfao(&d, n as u64), letter, "n = {n}");
        }
    }

    #[test]
    fn vtm_dfao_output_alphabet() {
        let d = vtm_dfao();
        let mut seen = [false; 3];
        for s in 0..d.state_count() as u32 {
            let o = d.output(s);
            assert!(o < 3, "output {o} outside ternary alphabet");
            seen[o as usize] = true;
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn pair_identity_spot_checks() {
        let tm = thue_morse();
        let vtm = vtm_stream().prefix(4097).unwrap();
        assert_eq!(eval_dfao(&tm, 5), 0);
        assert_eq!(eval_dfao(&tm, 6), 0);
        assert_eq!(vtm[5], 1);
        let c = |a: u8, b: u8| match (a, b) {
            (0, 1) => 0,
            (1, 1) => 1,
            (1, 0) => 2,
            (0, 0) => 1,
            _ => unreachable!(),
        };
        for n in 0..4096usize {
            let t_n = eval_dfao(&tm, n as u64);
            let t_n1 = eval_dfao(&tm, n as u64 + 1);
            assert_eq!(vtm[n], c(t_n, t_n1), "n = {n}");
        }
    }

    #[test]
    fn padding_never_changes_output() {
        for d in [thue_morse(), vtm_dfao()] {
            for n in (0..512u64).chain([1000, 65535, 123456]) {
                let canonical = eval_dfao(&d, n);
                for pad in 1..=3 {
                    let mut digits = msd2(n);
                    match d.digit_order() {
                        DigitOrder::Msd => {
                            let mut padded = vec![0u8; pad];
                            padded.extend_from_slice(&digits);
                            digits = padded;
                        }
                        DigitOrder::Lsd => {
                            digits.reverse();
                            digits.extend(std::iter::repeat_n(0, pad));
                        }
                    }
                    assert_eq!(d.eval_digits(digits), canonical, "n = {n}, pad = {pad}");
                }
            }
        }
    }

    #[test]
    fn minimize_removes_duplicate_state() {
        // States 1 and 2 behave identically.
        let d = Dfao::new(
            0,
            vec![[1, 2], [0, 1], [0, 2]],
            vec![0, 1, 1],
            DigitOrder::Msd,
        )
        .unwrap();
        let min = minimize_dfao(&d);
        assert_eq!(min.state_count(), 2);
        for n in 0..256 {
            assert_eq!(eval_dfao(&min, n), eval_dfao(&d, n));
        }
    }

    #[test]
    fn minimize_vtm_agrees_and_is_idempotent() {
        let d = vtm_dfao();
        let min = minimize_dfao(&d);
        for n in 0..1u64 << 16 {
            assert_eq!(eval_dfao(&min, n), eval_dfao(&d, n));
        }
        assert_eq!(minimize_dfao(&min).state_count(), min.state_count());
    }

    #[test]
    fn lsd_variant_agrees_on_reversed_digits() {
        // The ones-parity automaton is direction-independent.
        let msd = thue_morse();
        let lsd = Dfao::new(0, vec![[0, 1], [1, 0]], vec![0, 1], DigitOrder::Lsd).unwrap();
        for n in 0..4096 {
            assert_eq!(eval_dfao(&lsd, n), eval_dfao(&msd, n));
        }
    }

    #[test]
    fn text_roundtrip() {
        for d in [thue_morse(), vtm_dfao()] {
            let text = d.to_text();
            let parsed = Dfao::from_text(&text).unwrap();
            assert_eq!(parsed, d);
        }
        assert!(Dfao::from_text("states 2, initial 0, order msd\n0 0 -> 0\n").is_err());
        assert!(Dfao::from_text("garbage\n").is_err());
    }

    #[test]
    fn invalid_construction_rejected() {
        assert!(matches!(
            Dfao::new(5, vec![[0, 0]], vec![0], DigitOrder::Msd),
            Err(DfaoError::BadInitial { .. })
        ));
        assert!(matches!(
            Dfao::new(0, vec![[0, 9]], vec![0], DigitOrder::Msd),
            Err(DfaoError::BadTransition { .. })
        ));
    }
}
