//! Morphisms, multi-valued morphisms, fixed-point streams, and bounded
//! squarefreeness certification.
//!
//! Built-ins: `tau` (0 -> 012, 1 -> 02, 2 -> 1, fixed point `vtm`), the
//! 18-uniform squarefree morphism `h5` on five letters, and the multi-valued
//! squarefree morphism `g` whose images per letter have lengths 23..=26.

use std::fmt;

use thiserror::Error;

use crate::word::{self, StreamGen, Word, WordError, WordStream};

#[derive(Debug, Error)]
pub enum MorphismError {
    #[error("letter {letter} outside source alphabet of size {source_size}")]
    LetterOutsideSource { letter: u8, source_size: u8 },
    #[error("seed {seed} is not prolongable: image must start with the seed and have length >= 2")]
    NotProlongable { seed: u8 },
    #[error("morphism does not grow from seed {seed}: iteration stalls at length {len}")]
    NonGrowing { seed: u8, len: usize },
    #[error("schedule length {schedule_len} != word length {word_len}")]
    ScheduleLength { schedule_len: usize, word_len: usize },
    #[error("choice index {choice} invalid for letter {letter} ({available} choices)")]
    BadChoice {
        letter: u8,
        choice: usize,
        available: usize,
    },
    #[error("empty image set for letter {letter}")]
    EmptyImages { letter: u8 },
    #[error("cannot parse morphism line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A morphism determined by letter images; letter `a`'s image is
/// `images[a]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morphism {
    name: String,
    images: Vec<Word>,
    target_size: u8,
}

impl Morphism {
    pub fn new(name: &str, images: Vec<Word>) -> Self {
        let target_size = images
            .iter()
            .map(|im| im.alphabet_size())
            .max()
            .unwrap_or(1);
        Morphism {
            name: name.to_string(),
            images,
            target_size,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source_size(&self) -> u8 {
        self.images.len() as u8
    }

    pub fn target_size(&self) -> u8 {
        self.target_size
    }

    pub fn image(&self, letter: u8) -> Option<&Word> {
        self.images.get(letter as usize)
    }

    /// Common image length if the morphism is uniform.
    pub fn uniform_length(&self) -> Option<usize> {
        let first = self.images.first()?.len();
        self.images.iter().all(|im| im.len() == first).then_some(first)
    }

    pub fn apply(&self, w: &[u8]) -> Result<Vec<u8>, MorphismError> {
        let mut out = Vec::with_capacity(w.len() * 2);
        for &letter in w {
            let image = self.images.get(letter as usize).ok_or(
                MorphismError::LetterOutsideSource {
                    letter,
                    source_size: self.source_size(),
                },
            )?;
            out.extend_from_slice(image);
        }
        Ok(out)
    }

    pub fn apply_word(&self, w: &Word) -> Result<Word, MorphismError> {
        let letters = self.apply(w)?;
        Ok(Word::new(letters, self.target_size).expect("image letters within target alphabet"))
    }

    /// The stream `h^omega(seed)`; requires `h(seed)` to start with `seed`
    /// and be at least two letters long.
    pub fn fixed_point_stream(&self, seed: u8) -> Result<WordStream, MorphismError> {
        let image = self
            .images
            .get(seed as usize)
            .ok_or(MorphismError::LetterOutsideSource {
                letter: seed,
                source_size: self.source_size(),
            })?;
        if image.len() < 2 || image[0] != seed {
            return Err(MorphismError::NotProlongable { seed });
        }
        Ok(WordStream::from_gen(Box::new(FixedPointGen {
            h: self.clone(),
            seed,
        })))
    }

    /// `true` iff images of all squarefree source words of length <= k are
    /// squarefree. Evidence for squarefreeness of the morphism, not proof.
    pub fn bounded_squarefree_check(&self, k: usize) -> bool {
        let mut ok = true;
        for_each_squarefree_word(self.source_size(), k, &mut |w| {
            let image = self.apply(w).expect("letters within source");
            if word::find_square(&image, image.len() / 2).is_some() {
                ok = false;
            }
            ok
        });
        ok
    }

    /// One line per letter: `a -> image`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (letter, image) in self.images.iter().enumerate() {
            out.push_str(&format!("{letter} -> {image}\n"));
        }
        out
    }

    pub fn from_text(name: &str, text: &str) -> Result<Self, MorphismError> {
        let images = parse_image_lines(text)?
            .into_iter()
            .map(|mut choices| choices.remove(0))
            .collect();
        Ok(Morphism::new(name, images))
    }
}

impl fmt::Display for Morphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// tau: 0 -> 012, 1 -> 02, 2 -> 1. Its fixed point from 0 is `vtm`.
pub fn tau() -> Morphism {
    Morphism::new(
        "tau",
        vec![
            "012".parse().unwrap(),
            "02".parse().unwrap(),
            "1".parse().unwrap(),
        ],
    )
}

/// The Thue-Morse morphism 0 -> 01, 1 -> 10.
pub fn thue_morse() -> Morphism {
    Morphism::new("thue_morse", vec!["01".parse().unwrap(), "10".parse().unwrap()])
}

/// Brandenburg's 18-uniform squarefree morphism on five letters.
pub fn h5() -> Morphism {
    Morphism::new(
        "h5",
        vec![
            "010201202101210212".parse().unwrap(),
            "010201202102010212".parse().unwrap(),
            "010201202120121012".parse().unwrap(),
            "010201210201021012".parse().unwrap(),
            "010201210212021012".parse().unwrap(),
        ],
    )
}

/// The ternary squarefree word `vtm`, fixed point of tau from 0.
pub fn vtm_stream() -> WordStream {
    tau().fixed_point_stream(0).expect("tau is prolongable at 0")
}

struct FixedPointGen {
    h: Morphism,
    seed: u8,
}

impl StreamGen for FixedPointGen {
    fn fill(&mut self, buf: &mut Vec<u8>, target: usize) -> Result<(), WordError> {
        if buf.is_empty() {
            buf.push(self.seed);
        }
        while buf.len() < target {
            // buf is always an exact iterate h^k(seed), so h(buf) extends it.
            let next = self.h.apply(buf).map_err(|e| WordError::StreamExhausted {
                name: self.name(),
                requested: target,
                reason: e.to_string(),
            })?;
            if next.len() <= buf.len() {
                return Err(WordError::StreamExhausted {
                    name: self.name(),
                    requested: target,
                    reason: MorphismError::NonGrowing {
                        seed: self.seed,
                        len: buf.len(),
                    }
                    .to_string(),
                });
            }
            debug_assert_eq!(&next[..buf.len()], &buf[..]);
            *buf = next;
        }
        Ok(())
    }

    fn name(&self) -> String {
        format!("{}^omega({})", self.h.name, self.seed)
    }

    fn alphabet_size(&self) -> u8 {
        self.h.target_size()
    }
}

/// A letter-to-set-of-words substitution; applying it requires an explicit
/// per-position choice schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiMorphism {
    name: String,
    choices: Vec<Vec<Word>>,
    target_size: u8,
}

impl MultiMorphism {
    pub fn new(name: &str, choices: Vec<Vec<Word>>) -> Result<Self, MorphismError> {
        for (letter, images) in choices.iter().enumerate() {
            if images.is_empty() {
                return Err(MorphismError::EmptyImages {
                    letter: letter as u8,
                });
            }
        }
        let target_size = choices
            .iter()
            .flatten()
            .map(|im| im.alphabet_size())
            .max()
            .unwrap_or(1);
        Ok(MultiMorphism {
            name: name.to_string(),
            choices,
            target_size,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source_size(&self) -> u8 {
        self.choices.len() as u8
    }

    pub fn target_size(&self) -> u8 {
        self.target_size
    }

    pub fn images(&self, letter: u8) -> Option<&[Word]> {
        self.choices.get(letter as usize).map(|v| v.as_slice())
    }

    /// Concatenation of `choices[w[p]][schedule[p]]` over positions `p`.
    pub fn apply_scheduled(&self, w: &[u8], schedule: &[usize]) -> Result<Vec<u8>, MorphismError> {
        if schedule.len() != w.len() {
            return Err(MorphismError::ScheduleLength {
                schedule_len: schedule.len(),
                word_len: w.len(),
            });
        }
        let mut out = Vec::new();
        for (&letter, &choice) in w.iter().zip(schedule) {
            let images =
                self.choices
                    .get(letter as usize)
                    .ok_or(MorphismError::LetterOutsideSource {
                        letter,
                        source_size: self.source_size(),
                    })?;
            let image = images.get(choice).ok_or(MorphismError::BadChoice {
                letter,
                choice,
                available: images.len(),
            })?;
            out.extend_from_slice(image);
        }
        Ok(out)
    }

    /// Checks every choice combination over every squarefree source word of
    /// length <= k.
    pub fn bounded_squarefree_check(&self, k: usize) -> bool {
        let mut ok = true;
        for_each_squarefree_word(self.source_size(), k, &mut |w| {
            let mut schedule = vec![0usize; w.len()];
            loop {
                let image = self.apply_scheduled(w, &schedule).expect("valid schedule");
                if word::find_square(&image, image.len() / 2).is_some() {
                    ok = false;
                    return false;
                }
                // Advance the mixed-radix choice counter.
                let mut pos = 0;
                loop {
                    if pos == w.len() {
                        return true;
                    }
                    schedule[pos] += 1;
                    if schedule[pos] < self.choices[w[pos] as usize].len() {
                        break;
                    }
                    schedule[pos] = 0;
                    pos += 1;
                }
            }
        });
        ok
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (letter, images) in self.choices.iter().enumerate() {
            let joined: Vec<String> = images.iter().map(|im| im.to_string()).collect();
            out.push_str(&format!("{letter} -> {}\n", joined.join(",")));
        }
        out
    }

    pub fn from_text(name: &str, text: &str) -> Result<Self, MorphismError> {
        MultiMorphism::new(name, parse_image_lines(text)?)
    }
}

/// The cyclic permutation (0 1 2) applied letter-wise.
fn rotate_word(w: &Word) -> Word {
    let letters = w.iter().map(|&a| (a + 1) % 3).collect();
    Word::new(letters, 3).unwrap()
}

/// The multi-valued squarefree morphism g; the four images of each letter
/// have lengths 23, 24, 25, 26, so choice index c adds excess length c.
pub fn g() -> MultiMorphism {
    let g0: Vec<Word> = [
        "01210212021012021201210",
        "012102120210201021201210",
        "0121021202102012021201210",
        "01210212021020121021201210",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect();
    let g1: Vec<Word> = g0.iter().map(rotate_word).collect();
    let g2: Vec<Word> = g1.iter().map(rotate_word).collect();
    MultiMorphism::new("g", vec![g0, g1, g2]).unwrap()
}

/// Depth-first enumeration of squarefree words over `0..alphabet` with
/// length in `1..=max_len`; stops early when the visitor returns false.
pub fn for_each_squarefree_word(
    alphabet: u8,
    max_len: usize,
    visit: &mut impl FnMut(&[u8]) -> bool,
) {
    fn ends_squarefree(w: &[u8]) -> bool {
        let n = w.len();
        for half in 1..=n / 2 {
            if w[n - 2 * half..n - half] == w[n - half..] {
                return false;
            }
        }
        true
    }

    fn rec(
        w: &mut Vec<u8>,
        alphabet: u8,
        max_len: usize,
        visit: &mut impl FnMut(&[u8]) -> bool,
    ) -> bool {
        if w.len() >= max_len {
            return true;
        }
        for letter in 0..alphabet {
            w.push(letter);
            if ends_squarefree(w)
                && (!visit(w) || !rec(w, alphabet, max_len, visit)) {
                    w.pop();
                    return false;
                }
            w.pop();
        }
        true
    }

    let mut w = Vec::with_capacity(max_len);
    rec(&mut w, alphabet, max_len, visit);
}

fn parse_image_lines(text: &str) -> Result<Vec<Vec<Word>>, MorphismError> {
    let mut images: Vec<(u8, Vec<Word>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| MorphismError::Parse {
            line: idx + 1,
            reason: "expected `letter -> image[,image...]`".to_string(),
        })?;
        let letter: u8 = lhs.trim().parse().map_err(|_| MorphismError::Parse {
            line: idx + 1,
            reason: format!("bad letter {lhs:?}"),
        })?;
        let mut words = Vec::new();
        for part in rhs.split(',') {
            let word: Word = part.trim().parse().map_err(|_| MorphismError::Parse {
                line: idx + 1,
                reason: format!("bad image {part:?}"),
            })?;
            words.push(word);
        }
        images.push((letter, words));
    }
    images.sort_by_key(|(letter, _)| *letter);
    for (expect, (letter, _)) in images.iter().enumerate() {
        if *letter as usize != expect {
            return Err(MorphismError::Parse {
                line: 0,
                reason: format!("letters must cover 0..n contiguously, got {letter}"),
            });
        }
    }
    Ok(images.into_iter().map(|(_, w)| w).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_images() {
        let t = tau();
        assert_eq!(
            t.apply(&[1, 0, 1, 2, 1]).unwrap(),
            vec![0, 2, 0, 1, 2, 0, 2, 1, 0, 2]
        );
        assert_eq!(
            t.apply_word(&"10121".parse().unwrap()).unwrap().to_string(),
            "0201202102"
        );
        assert_eq!(
            t.apply_word(&"12101".parse().unwrap()).unwrap().to_string(),
            "0210201202"
        );
        assert_eq!(t.apply(&[]).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn vtm_prefixes() {
        let vtm = vtm_stream();
        assert_eq!(vtm.prefix(12).unwrap().to_string(), "012021012102");
        assert_eq!(
            vtm.prefix(24).unwrap().to_string(),
            "012021012102012021020121"
        );
    }

    #[test]
    fn tau_not_prolongable_at_2() {
        assert!(matches!(
            tau().fixed_point_stream(2),
            Err(MorphismError::NotProlongable { seed: 2 })
        ));
    }

    #[test]
    fn tau_preserves_vtm_prefixes() {
        let vtm = vtm_stream();
        let t = tau();
        for len in [1usize, 5, 100, 1000] {
            let prefix = vtm.prefix(len).unwrap();
            let image = t.apply(&prefix).unwrap();
            let check = vtm.prefix(image.len()).unwrap();
            assert_eq!(image, *check, "tau image of prefix {len}");
        }
    }

    #[test]
    fn apply_is_homomorphism() {
        let t = tau();
        let u: Word = "0120".parse().unwrap();
        let v: Word = "2101".parse().unwrap();
        let mut uv = u.to_vec();
        uv.extend_from_slice(&v);
        let mut concat = t.apply(&u).unwrap();
        concat.extend_from_slice(&t.apply(&v).unwrap());
        assert_eq!(t.apply(&uv).unwrap(), concat);
    }

    #[test]
    fn h5_shape() {
        let h = h5();
        assert_eq!(h.source_size(), 5);
        assert_eq!(h.uniform_length(), Some(18));
        assert_eq!(
            h.image(0).unwrap().to_string(),
            "010201202101210212"
        );
    }

    #[test]
    fn g_shape_and_rotation() {
        let g = g();
        for letter in 0..3u8 {
            let lens: Vec<usize> = g.images(letter).unwrap().iter().map(|w| w.len()).collect();
            assert_eq!(lens, vec![23, 24, 25, 26], "letter {letter}");
        }
        for letter in 1..3u8 {
            for choice in 0..4 {
                let prev = &g.images(letter - 1).unwrap()[choice];
                let cur = &g.images(letter).unwrap()[choice];
                assert_eq!(*cur, rotate_word(prev));
            }
        }
        assert_eq!(
            g.apply_scheduled(&[0], &[0]).unwrap(),
            "01210212021012021201210".parse::<Word>().unwrap().to_vec()
        );
        let len49 = g.apply_scheduled(&[0, 1], &[0, 3]).unwrap();
        assert_eq!(len49.len(), 49);
        assert_eq!(g.apply_scheduled(&[], &[]).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn bad_schedules_rejected() {
        let g = g();
        assert!(matches!(
            g.apply_scheduled(&[0], &[]),
            Err(MorphismError::ScheduleLength { .. })
        ));
        assert!(matches!(
            g.apply_scheduled(&[0], &[4]),
            Err(MorphismError::BadChoice { .. })
        ));
    }

    #[test]
    fn squarefree_word_enumeration_counts() {
        // Ternary squarefree words: 3 of length 1, 6 of length 2, 12 of length 3.
        let mut by_len = [0usize; 4];
        for_each_squarefree_word(3, 3, &mut |w| {
            by_len[w.len()] += 1;
            true
        });
        assert_eq!(by_len, [0, 3, 6, 12]);
    }

    #[test]
    fn identity_morphism_bounded_check() {
        let id = Morphism::new("id2", vec!["0".parse().unwrap(), "1".parse().unwrap()]);
        assert!(id.bounded_squarefree_check(3));
    }

    #[test]
    fn squaring_morphism_fails_check() {
        let bad = Morphism::new("bad", vec!["00".parse().unwrap(), "1".parse().unwrap()]);
        assert!(!bad.bounded_squarefree_check(3));
    }

    #[test]
    fn text_roundtrip() {
        let t = tau();
        let parsed = Morphism::from_text("tau", &t.to_text()).unwrap();
        assert_eq!(parsed, t);
        let g0 = g();
        let parsed = MultiMorphism::from_text("g", &g0.to_text()).unwrap();
        assert_eq!(parsed, g0);
    }
}
