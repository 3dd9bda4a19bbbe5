//! Deciding whether deleting one position of a squarefree word keeps it
//! squarefree. Both halves around the deleted position are factors of the
//! original word, so any new square must straddle the deletion seam; a
//! bounded seam scan therefore certifies disposability up to a half-length
//! bound, and an exact oracle (the compiled predicate automaton) can
//! arbitrate whenever bounded certainty is not enough.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphism::tau;
use crate::word::{crossing_square_at, SquareWitness, Word, WordError, WordStream};

#[derive(Debug, Error)]
pub enum DisposabilityError {
    #[error("positions must be strictly increasing (violated at index {0})")]
    NonMonotone(usize),
    #[error("occurrence of {factor} at position {position} is outside its expected context")]
    ContextAssertion { factor: String, position: usize },
    #[error("position {position}: certified to half-length {bound} but the oracle rejects it")]
    Disagreement { position: u64, bound: usize },
    #[error("position {position}: a verified square witness contradicts the oracle")]
    WitnessContradictsOracle { position: u64 },
    #[error(transparent)]
    Word(#[from] WordError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    DisposableCertifiedToBound,
    NotDisposable,
}

/// Outcome of one deletion check. `witness` is present exactly when the
/// status is `NotDisposable`, and it is re-verified against the deleted
/// word before being returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisposabilityVerdict {
    pub position: usize,
    pub status: VerdictStatus,
    pub witness: Option<SquareWitness>,
    pub bound: usize,
}

impl DisposabilityVerdict {
    pub fn is_disposable(&self) -> bool {
        self.status == VerdictStatus::DisposableCertifiedToBound
    }
}

/// Deletion check against an already materialized prefix. The prefix must
/// extend at least `2 * bound + 1` letters past `j`.
pub fn verdict_in_prefix(prefix: &[u8], j: usize, bound: usize) -> DisposabilityVerdict {
    assert!(
        prefix.len() > j + 2 * bound,
        "prefix too short for a seam scan at {j} with bound {bound}"
    );
    let mut deleted = Vec::with_capacity(prefix.len() - 1);
    deleted.extend_from_slice(&prefix[..j]);
    deleted.extend_from_slice(&prefix[j + 1..]);
    match crossing_square_at(&deleted, j, bound) {
        Some(witness) => {
            assert!(witness.holds_in(&deleted), "witness must be a real square");
            DisposabilityVerdict {
                position: j,
                status: VerdictStatus::NotDisposable,
                witness: Some(witness),
                bound,
            }
        }
        None => DisposabilityVerdict {
            position: j,
            status: VerdictStatus::DisposableCertifiedToBound,
            witness: None,
            bound,
        },
    }
}

pub fn is_disposable_position(
    w: &WordStream,
    j: usize,
    bound: usize,
) -> Result<DisposabilityVerdict, WordError> {
    let prefix = w.prefix(j + 2 * bound + 2)?;
    Ok(verdict_in_prefix(&prefix, j, bound))
}

/// All positions up to `limit` whose deletion is certified squarefree at
/// the given half-length bound.
pub fn disposable_positions(
    w: &WordStream,
    limit: usize,
    bound: usize,
) -> Result<Vec<u64>, WordError> {
    let prefix = w.prefix(limit + 2 * bound + 2)?;
    Ok((0..=limit)
        .into_par_iter()
        .filter(|&j| verdict_in_prefix(&prefix, j, bound).is_disposable())
        .map(|j| j as u64)
        .collect())
}

/// Like [`disposable_positions`], but every verdict is checked against an
/// exact oracle. A position the scan certifies but the oracle rejects gets
/// its bound doubled (up to `max_bound`) until a witness appears; if the
/// oracle instead rejects a verified witness, the oracle itself is wrong
/// and that is reported as an error. Returns the positions and the largest
/// bound that was needed.
pub fn disposable_positions_verified(
    w: &WordStream,
    limit: usize,
    start_bound: usize,
    max_bound: usize,
    oracle: impl Fn(u64) -> bool,
) -> Result<(Vec<u64>, usize), DisposabilityError> {
    let prefix = w.prefix(limit + 2 * max_bound + 2)?;
    let mut positions = Vec::new();
    let mut needed = start_bound;
    for j in 0..=limit {
        let from_oracle = oracle(j as u64);
        let mut bound = start_bound;
        loop {
            let verdict = verdict_in_prefix(&prefix, j, bound);
            match (verdict.is_disposable(), from_oracle) {
                (true, true) => {
                    positions.push(j as u64);
                    break;
                }
                (false, false) => break,
                (true, false) => {
                    if bound >= max_bound {
                        return Err(DisposabilityError::Disagreement {
                            position: j as u64,
                            bound,
                        });
                    }
                    bound = (bound * 2).min(max_bound);
                    needed = needed.max(bound);
                }
                (false, true) => {
                    return Err(DisposabilityError::WitnessContradictsOracle {
                        position: j as u64,
                    })
                }
            }
        }
    }
    Ok((positions, needed))
}

/// Successive differences of a strictly increasing list. With
/// `drop_initial`, differences start from the second listed position.
pub fn first_differences(
    positions: &[u64],
    drop_initial: bool,
) -> Result<Vec<u64>, DisposabilityError> {
    for (i, pair) in positions.windows(2).enumerate() {
        if pair[0] >= pair[1] {
            return Err(DisposabilityError::NonMonotone(i + 1));
        }
    }
    let tail = if drop_initial && !positions.is_empty() {
        &positions[1..]
    } else {
        positions
    };
    Ok(tail.windows(2).map(|p| p[1] - p[0]).collect())
}

/// The two marked factors whose interior letters are always disposable:
/// in the image of 10121 the second and fourth occurrences of 0, and in
/// the image of 12101 the first and third occurrences of 2.
fn marked_factors() -> [(Word, Word, [usize; 2]); 2] {
    let tau = tau();
    let f1 = tau.apply_word(&Word::new(vec![1, 0, 1, 2, 1], 3).unwrap()).unwrap();
    let f2 = tau.apply_word(&Word::new(vec![1, 2, 1, 0, 1], 3).unwrap()).unwrap();
    let c1 = Word::new(
        vec![0, 1, 2, 1, 0, 2, 0, 1, 2, 0, 2, 1, 0, 2, 0, 1, 2, 1],
        3,
    )
    .unwrap();
    let c2 = Word::new(
        vec![1, 0, 1, 2, 0, 2, 1, 0, 2, 0, 1, 2, 0, 2, 1, 0, 1, 2],
        3,
    )
    .unwrap();
    [(f1, c1, [2, 8]), (f2, c2, [1, 7])]
}

/// Offset of each marked factor inside its 18-letter context.
const CONTEXT_OFFSET: usize = 4;

/// Positions up to `limit` that the structural argument marks as
/// disposable: 0, 2, and the designated letters inside every occurrence of
/// the two marked factors. Each occurrence is asserted to sit inside its
/// expected context; a violation falsifies the enclosure claim and is an
/// error, not a skipped occurrence.
pub fn theorem_positions(w: &WordStream, limit: usize) -> Result<Vec<u64>, DisposabilityError> {
    let prefix = w.prefix(limit + CONTEXT_OFFSET + 32)?;
    let mut out: Vec<u64> = [0, 2].iter().copied().filter(|&p| p <= limit as u64).collect();
    for (factor, context, marks) in marked_factors() {
        for p in 0..=limit.min(prefix.len() - factor.len()) {
            if prefix[p..p + factor.len()] != *factor {
                continue;
            }
            let enclosed = p >= CONTEXT_OFFSET
                && p - CONTEXT_OFFSET + context.len() <= prefix.len()
                && prefix[p - CONTEXT_OFFSET..p - CONTEXT_OFFSET + context.len()] == *context;
            if !enclosed {
                return Err(DisposabilityError::ContextAssertion {
                    factor: factor.to_string(),
                    position: p,
                });
            }
            for m in marks {
                let pos = (p + m) as u64;
                if pos <= limit as u64 {
                    out.push(pos);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Lengths l <= bound with w[l] = w[0]: deleting w[1 ..= l] then leaves
/// exactly the suffix of w starting at l, so the factor of length l ending
/// at position l is disposable.
pub fn prefix_disposable_lengths(w: &WordStream, bound: usize) -> Result<Vec<usize>, WordError> {
    let prefix = w.prefix(bound + 1)?;
    Ok((1..=bound).filter(|&l| prefix[l] == prefix[0]).collect())
}

/// The 19 certified deletable positions up to 204, in order.
pub const LISTED_POSITIONS: [u64; 19] = [
    0, 2, 12, 18, 44, 50, 60, 66, 76, 82, 108, 114, 140, 146, 172, 178, 188, 194, 204,
];
