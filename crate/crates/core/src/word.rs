//! Finite words over small integer alphabets, lazily generated infinite
//! streams, and square/avoidance scans.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WordError {
    #[error("letter {letter} at index {index} not below alphabet size {alphabet_size}")]
    LetterOutOfAlphabet {
        letter: u8,
        index: usize,
        alphabet_size: u8,
    },
    #[error("range {start}+{len} out of bounds for word of length {word_len}")]
    RangeOutOfBounds {
        start: usize,
        len: usize,
        word_len: usize,
    },
    #[error("cannot parse {0:?} as a word (single digits 0-9 only)")]
    Parse(String),
    #[error("stream {name:?} cannot reach length {requested}: {reason}")]
    StreamExhausted {
        name: String,
        requested: usize,
        reason: String,
    },
}

/// A finite word. Letters are 0-based small integers, all below
/// `alphabet_size`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<u8>,
    alphabet_size: u8,
}

impl Word {
    pub fn new(letters: Vec<u8>, alphabet_size: u8) -> Result<Self, WordError> {
        for (index, &letter) in letters.iter().enumerate() {
            if letter >= alphabet_size {
                return Err(WordError::LetterOutOfAlphabet {
                    letter,
                    index,
                    alphabet_size,
                });
            }
        }
        Ok(Word {
            letters,
            alphabet_size,
        })
    }

    /// Builds a word with the smallest alphabet containing its letters.
    pub fn from_letters(letters: Vec<u8>) -> Self {
        let alphabet_size = letters.iter().copied().max().map_or(1, |m| m + 1);
        Word {
            letters,
            alphabet_size,
        }
    }

    pub fn empty() -> Self {
        Word {
            letters: Vec::new(),
            alphabet_size: 1,
        }
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn into_letters(self) -> Vec<u8> {
        self.letters
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet_size
    }

    /// The word with `letters[start .. start+len)` removed.
    pub fn delete_range(&self, start: usize, len: usize) -> Result<Word, WordError> {
        let letters = delete_range(&self.letters, start, len)?;
        Ok(Word {
            letters,
            alphabet_size: self.alphabet_size,
        })
    }
}

impl Deref for Word {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.letters
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &letter in &self.letters {
            if letter > 9 {
                return Err(fmt::Error);
            }
            write!(f, "{letter}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word(\"{self}\")")
    }
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, WordError> {
        let mut letters = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch.to_digit(10) {
                Some(d) => letters.push(d as u8),
                None => return Err(WordError::Parse(s.to_string())),
            }
        }
        Ok(Word::from_letters(letters))
    }
}

/// An occurrence of a square `uu`: `w[start .. start+half)` equals
/// `w[start+half .. start+2*half)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SquareWitness {
    pub start: usize,
    pub half: usize,
}

impl SquareWitness {
    pub fn holds_in(&self, w: &[u8]) -> bool {
        let end = self.start + 2 * self.half;
        self.half > 0
            && end <= w.len()
            && w[self.start..self.start + self.half] == w[self.start + self.half..end]
    }
}

/// Leftmost start of a square of half-length exactly `half`, if any.
///
/// Single right-to-left pass: `run` counts consecutive positions i with
/// w[i] == w[i+half]; a square starts wherever the count reaches `half`.
fn leftmost_square_of_half(w: &[u8], half: usize) -> Option<usize> {
    if half == 0 || w.len() < 2 * half {
        return None;
    }
    let mut run = 0usize;
    let mut leftmost = None;
    for i in (0..w.len() - half).rev() {
        if w[i] == w[i + half] {
            run += 1;
            if run >= half && i + 2 * half <= w.len() {
                leftmost = Some(i);
            }
        } else {
            run = 0;
        }
    }
    leftmost
}

/// The leftmost, then shortest square with half-length at most `max_half`.
pub fn find_square(w: &[u8], max_half: usize) -> Option<SquareWitness> {
    let mut best: Option<SquareWitness> = None;
    for half in 1..=max_half.min(w.len() / 2) {
        if let Some(start) = leftmost_square_of_half(w, half) {
            let cand = SquareWitness { start, half };
            if best.is_none_or(|b| (cand.start, cand.half) < (b.start, b.half)) {
                best = Some(cand);
            }
        }
    }
    best
}

/// Same verdict and witness order as [`find_square`], with the per-half
/// passes spread over a thread pool. Results do not depend on thread count.
pub fn find_square_parallel(w: &[u8], max_half: usize) -> Option<SquareWitness> {
    use rayon::prelude::*;
    (1..=max_half.min(w.len() / 2))
        .into_par_iter()
        .filter_map(|half| leftmost_square_of_half(w, half).map(|start| SquareWitness { start, half }))
        .min_by_key(|c| (c.start, c.half))
}

/// Calls `f` for every square occurrence with half-length at most `max_half`.
pub fn for_each_square(w: &[u8], max_half: usize, mut f: impl FnMut(SquareWitness)) {
    for half in 1..=max_half.min(w.len() / 2) {
        let mut run = 0usize;
        let mut starts = Vec::new();
        for i in (0..w.len() - half).rev() {
            if w[i] == w[i + half] {
                run += 1;
                if run >= half && i + 2 * half <= w.len() {
                    starts.push(i);
                }
            } else {
                run = 0;
            }
        }
        for start in starts.into_iter().rev() {
            f(SquareWitness { start, half });
        }
    }
}

pub fn contains(w: &[u8], pattern: &[u8]) -> bool {
    if pattern.is_empty() {
        return true;
    }
    w.windows(pattern.len()).any(|win| win == pattern)
}

/// True iff none of the patterns occurs as a factor of `w`.
pub fn avoids(w: &[u8], patterns: &[&[u8]]) -> bool {
    patterns.iter().all(|p| !contains(w, p))
}

pub fn delete_range(w: &[u8], start: usize, len: usize) -> Result<Vec<u8>, WordError> {
    if start + len > w.len() {
        return Err(WordError::RangeOutOfBounds {
            start,
            len,
            word_len: w.len(),
        });
    }
    let mut out = Vec::with_capacity(w.len() - len);
    out.extend_from_slice(&w[..start]);
    out.extend_from_slice(&w[start + len..]);
    Ok(out)
}

/// Leftmost-then-shortest square straddling the seam between positions
/// `boundary-1` and `boundary`, with half-length at most `max_half`.
///
/// Used after deletions: when both sides of the seam are factors of a
/// squarefree word, any square of the whole must cross the seam, so this
/// bounded scan decides squarefreeness up to `max_half`.
pub fn crossing_square_at(w: &[u8], boundary: usize, max_half: usize) -> Option<SquareWitness> {
    if boundary == 0 || boundary >= w.len() {
        // No square can contain both boundary-1 and boundary.
        return None;
    }
    let n = w.len();
    let mut best: Option<SquareWitness> = None;
    for half in 1..=max_half.min(n / 2) {
        // Candidate starts s with s <= boundary-1 and s+2*half > boundary.
        let s_min = (boundary + 1).saturating_sub(2 * half);
        let s_max = boundary - 1;
        if s_min > s_max || s_min + 2 * half > n {
            continue;
        }
        let upper = (boundary + half - 2).min(n - half - 1);
        let mut run = 0usize;
        let mut hit = None;
        let mut i = upper as isize;
        while i >= s_min as isize {
            let iu = i as usize;
            if w[iu] == w[iu + half] {
                run += 1;
                if run >= half && iu >= s_min && iu <= s_max && iu + 2 * half <= n {
                    hit = Some(iu);
                }
            } else {
                run = 0;
            }
            i -= 1;
        }
        if let Some(start) = hit {
            let cand = SquareWitness { start, half };
            debug_assert!(cand.holds_in(w));
            if best.is_none_or(|b| (cand.start, cand.half) < (b.start, b.half)) {
                best = Some(cand);
            }
        }
    }
    best
}

/// Generator backing a [`WordStream`]. `fill` must extend `buf` to at least
/// `target` letters without changing the ones already present.
pub trait StreamGen: Send {
    fn fill(&mut self, buf: &mut Vec<u8>, target: usize) -> Result<(), WordError>;
    fn name(&self) -> String;
    fn alphabet_size(&self) -> u8;
}

struct Inner {
    buf: Vec<u8>,
    gen: Option<Box<dyn StreamGen>>,
}

/// A lazily extended infinite (or known-finite) word with a memoized prefix.
/// Two reads of the same prefix always agree; extension is serialized behind
/// a lock.
pub struct WordStream {
    inner: Mutex<Inner>,
    name: String,
    alphabet_size: u8,
    known_len: Option<usize>,
}

impl WordStream {
    pub fn from_gen(gen: Box<dyn StreamGen>) -> Self {
        let name = gen.name();
        let alphabet_size = gen.alphabet_size();
        WordStream {
            inner: Mutex::new(Inner {
                buf: Vec::new(),
                gen: Some(gen),
            }),
            name,
            alphabet_size,
            known_len: None,
        }
    }

    /// A finite stream over an existing word.
    pub fn from_word(w: Word, name: &str) -> Self {
        let alphabet_size = w.alphabet_size();
        let known_len = Some(w.len());
        WordStream {
            inner: Mutex::new(Inner {
                buf: w.into_letters(),
                gen: None,
            }),
            name: name.to_string(),
            alphabet_size,
            known_len,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet_size
    }

    pub fn known_len(&self) -> Option<usize> {
        self.known_len
    }

    fn ensure(&self, target: usize) -> Result<(), WordError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.buf.len() >= target {
            return Ok(());
        }
        let Inner { buf, gen } = &mut *inner;
        match gen {
            Some(g) => g.fill(buf, target),
            None => Err(WordError::StreamExhausted {
                name: self.name.clone(),
                requested: target,
                reason: format!("finite stream of length {}", buf.len()),
            }),
        }
    }

    /// Materializes the first `n` letters.
    pub fn prefix(&self, n: usize) -> Result<Word, WordError> {
        self.ensure(n)?;
        let inner = self.inner.lock().unwrap();
        Ok(Word {
            letters: inner.buf[..n].to_vec(),
            alphabet_size: self.alphabet_size,
        })
    }

    pub fn letter(&self, i: usize) -> Result<u8, WordError> {
        self.ensure(i + 1)?;
        let inner = self.inner.lock().unwrap();
        Ok(inner.buf[i])
    }

    pub fn materialized_len(&self) -> usize {
        self.inner.lock().unwrap().buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn display_roundtrip() {
        let word = w("012021");
        assert_eq!(word.to_string(), "012021");
        assert_eq!(word.alphabet_size(), 3);
        assert_eq!(word.len(), 6);
    }

    #[test]
    fn alphabet_enforced() {
        assert!(Word::new(vec![0, 3], 3).is_err());
        assert!(Word::new(vec![0, 2], 3).is_ok());
    }

    #[test]
    fn find_square_smallest() {
        assert_eq!(
            find_square(&w("00"), 1),
            Some(SquareWitness { start: 0, half: 1 })
        );
    }

    #[test]
    fn find_square_leftmost_then_shortest() {
        // "0101" has squares at (0,2); "00" later starts at 4.
        let word = w("010100");
        assert_eq!(
            find_square(&word, 3),
            Some(SquareWitness { start: 0, half: 2 })
        );
        // At equal starts the shorter half wins.
        let word = w("0000");
        assert_eq!(
            find_square(&word, 2),
            Some(SquareWitness { start: 0, half: 1 })
        );
    }

    #[test]
    fn find_square_exhaustive_small() {
        // All 21 factor pairs of "0121021" checked directly.
        let word = w("0121021");
        for start in 0..word.len() {
            for half in 1..=(word.len() - start) / 2 {
                assert!(
                    word[start..start + half] != word[start + half..start + 2 * half],
                    "unexpected square at ({start},{half})"
                );
            }
        }
        assert_eq!(find_square(&word, 3), None);
    }

    #[test]
    fn find_square_empty() {
        assert_eq!(find_square(&[], 5), None);
    }

    #[test]
    fn avoids_basics() {
        assert!(!avoids(&w("012"), &[&w("012")]));
        assert!(avoids(&w("012"), &[&w("010"), &w("212")]));
    }

    #[test]
    fn delete_range_examples() {
        assert_eq!(delete_range(&w("012"), 1, 1).unwrap(), w("02").to_vec());
        let vtm12 = w("012021012102");
        assert_eq!(
            vtm12.delete_range(2, 1).unwrap(),
            w("01021012102")
        );
        assert_eq!(vtm12.delete_range(0, 0).unwrap(), vtm12);
        assert!(vtm12.delete_range(10, 3).is_err());
    }

    #[test]
    fn crossing_square_examples() {
        // Deleting position 2 of vtm[0..12] leaves no seam square.
        let deleted = w("01021012102");
        assert_eq!(crossing_square_at(&deleted, 2, 5), None);
        assert_eq!(
            crossing_square_at(&w("0110"), 2, 2),
            Some(SquareWitness { start: 1, half: 1 })
        );
        // Boundary 0 can never be straddled.
        assert_eq!(crossing_square_at(&w("0110"), 0, 2), None);
    }

    #[test]
    fn crossing_square_agrees_with_full_scan() {
        // On words whose only squares cross the seam, both scans agree.
        let word = w("0120210121021201"); // squarefree prefix + tweaks
        for boundary in 0..word.len() {
            let seam = crossing_square_at(&word, boundary, 8);
            if let Some(wit) = seam {
                assert!(wit.holds_in(&word));
                assert!(wit.start < boundary && boundary < wit.start + 2 * wit.half);
            }
        }
    }

    #[test]
    fn for_each_square_counts() {
        let mut seen = Vec::new();
        for_each_square(&w("0101"), 2, |s| seen.push(s));
        assert_eq!(
            seen,
            vec![
                SquareWitness { start: 0, half: 2 },
            ]
        );
        let mut seen = Vec::new();
        for_each_square(&w("000"), 2, |s| seen.push(s));
        assert_eq!(
            seen,
            vec![
                SquareWitness { start: 0, half: 1 },
                SquareWitness { start: 1, half: 1 },
            ]
        );
    }

    #[test]
    fn stream_finite() {
        let stream = WordStream::from_word(w("01"), "pair");
        assert_eq!(stream.prefix(2).unwrap(), w("01"));
        assert_eq!(stream.letter(1).unwrap(), 1);
        assert!(stream.prefix(3).is_err());
        assert_eq!(stream.known_len(), Some(2));
    }

    #[test]
    fn parallel_scan_matches_naive() {
        let word = w("0102010201101");
        for max_half in 1..=6 {
            assert_eq!(
                find_square(&word, max_half),
                find_square_parallel(&word, max_half)
            );
        }
    }
}
