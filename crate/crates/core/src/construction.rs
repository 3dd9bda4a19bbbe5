//! Builds an infinite squarefree word with interior disposable factors of
//! every sufficiently large length, as a concrete pipeline:
//!
//! 1. `x`: a binary word whose only square factors are 00, 11, 0101,
//!    generated by lexicographically-least backtracking.
//! 2. `v`: `x` interleaved with a squarefree word `y` over {2,3,4}, one
//!    `x` letter followed by `n` letters of `y` during phase `n`. Windows
//!    of four consecutive `x` letters a,b,c,d with b != c and abcd != 0101
//!    are counted; after 414 of them the phase advances.
//! 3. `w`: the image of `v` under the 18-uniform morphism followed by the
//!    multi-valued morphism with image lengths 23..=26. Inside the image
//!    of the middle block of the i-th selected window of phase n, image
//!    lengths are stretched so the block's image has length 414n + i,
//!    making it a disposable factor of that exact length.
//!
//! The ledger records every scheduled factor so its disposability can be
//! re-verified by seam scanning.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphism::{g, h5, vtm_stream, Morphism, MorphismError, MultiMorphism};
use crate::word::{
    crossing_square_at, for_each_square, SquareWitness, StreamGen, WordError, WordStream,
};

/// Occurrences counted before the interleaving period advances.
pub const OCCURRENCES_PER_PHASE: usize = 414;

/// Largest schedulable excess for phase n: one factor per length in
/// [414n, 414n + max_excess(n)].
pub fn max_excess(n: usize) -> usize {
    (54 * n).min(413)
}

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("excess {excess} cannot be distributed over {letters} letters (max {max})")]
    ScheduleOverflow {
        excess: usize,
        letters: usize,
        max: usize,
    },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
}

// ------------------------------------------------------------ x stream

const BACKTRACK_MARGIN: usize = 128;

struct FsGen {
    // Invariant: work is a valid word (squares only 00/11/0101) extending
    // everything already handed out; handed-out letters are never revised.
    work: Vec<u8>,
    exposed: usize,
}

impl FsGen {
    /// Could `cand` be appended without creating a square other than
    /// 00, 11, 0101? Only squares ending at the new letter can be new.
    fn append_ok(&self, cand: u8) -> bool {
        let w = &self.work;
        let i = w.len();
        for half in 2..=i.div_ceil(2) {
            // Compare right half (ending in cand) against left half,
            // rightmost letters first for an early exit.
            if cand != w[i - half] {
                continue;
            }
            let mut is_square = true;
            for off in 1..half {
                if w[i - off] != w[i - half - off] {
                    is_square = false;
                    break;
                }
            }
            if is_square {
                if half == 2 && w[i - 3] == 0 && w[i - 2] == 1 && w[i - 1] == 0 && cand == 1 {
                    continue; // 0101 is the one allowed half-2 square
                }
                return false;
            }
        }
        true
    }

    fn extend_to(&mut self, len: usize) -> Result<(), WordError> {
        let exhausted = |at: usize| WordError::StreamExhausted {
            name: "fs".to_string(),
            requested: len,
            reason: format!("backtracking reached committed prefix at length {at}"),
        };
        let mut resume = 0u8;
        while self.work.len() < len {
            let mut placed = false;
            for cand in resume..=1 {
                if self.append_ok(cand) {
                    self.work.push(cand);
                    placed = true;
                    break;
                }
            }
            resume = 0;
            if !placed {
                let last = self.work.pop().ok_or_else(|| exhausted(0))?;
                if self.work.len() < self.exposed {
                    return Err(exhausted(self.exposed));
                }
                resume = last + 1;
            }
        }
        Ok(())
    }
}

impl StreamGen for FsGen {
    fn fill(&mut self, buf: &mut Vec<u8>, target: usize) -> Result<(), WordError> {
        debug_assert_eq!(&self.work[..buf.len()], &buf[..]);
        self.extend_to(target + BACKTRACK_MARGIN)?;
        buf.extend_from_slice(&self.work[buf.len()..target]);
        self.exposed = target;
        Ok(())
    }

    fn name(&self) -> String {
        "fs".to_string()
    }

    fn alphabet_size(&self) -> u8 {
        2
    }
}

/// The lexicographically least binary word whose only square factors are
/// 00, 11, and 0101.
pub fn fs_stream() -> WordStream {
    WordStream::from_gen(Box::new(FsGen {
        work: Vec::new(),
        exposed: 0,
    }))
}

/// The squarefree input over {2,3,4}: vtm with every letter shifted by 2.
pub fn relabeled_vtm_stream() -> WordStream {
    struct Shift(WordStream);
    impl StreamGen for Shift {
        fn fill(&mut self, buf: &mut Vec<u8>, target: usize) -> Result<(), WordError> {
            let prefix = self.0.prefix(target)?;
            buf.extend(prefix[buf.len()..].iter().map(|&l| l + 2));
            Ok(())
        }
        fn name(&self) -> String {
            "vtm+2".to_string()
        }
        fn alphabet_size(&self) -> u8 {
            5
        }
    }
    WordStream::from_gen(Box::new(Shift(vtm_stream())))
}

/// Every distinct square word `uu` occurring in `w`.
pub fn square_census(w: &[u8]) -> std::collections::BTreeSet<Vec<u8>> {
    let mut census = std::collections::BTreeSet::new();
    for_each_square(w, w.len() / 2, |wit| {
        census.insert(w[wit.start..wit.start + 2 * wit.half].to_vec());
    });
    census
}

// ----------------------------------------------------------- interleave

/// One counted window a Y1 b Y2 c Y3 d.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QOccurrence {
    pub phase: usize,
    /// Index of letter a in the x stream.
    pub x_index: usize,
    pub letters: [u8; 4],
    /// (start, len) of Y1, Y2, Y3 in the y stream.
    pub y_ranges: [(usize, usize); 3],
    /// (start, len) of Y2 within v.
    pub v_y2: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub n: usize,
    pub required: usize,
    /// Indices into the occurrence list: the first max_excess(n)+1
    /// occurrences of this phase, one per scheduled excess.
    pub selected: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<PhaseRecord>,
}

struct BlockRec {
    phase: usize,
    y_start: usize,
    v_start: usize,
    len: usize,
}

struct InterleaveGen {
    x: Arc<WordStream>,
    y: Arc<WordStream>,
    xi: usize,
    yi: usize,
    phase: usize,
    found: usize,
    letters: VecDeque<(usize, u8)>,
    blocks: VecDeque<BlockRec>,
    record: bool,
    occurrences: Vec<QOccurrence>,
    plan: Vec<PhaseRecord>,
    phase_first_occ: usize,
    phase_start_xi: usize,
}

/// Safety cap: no phase should need anywhere near this many x letters to
/// collect its occurrences.
const PHASE_X_CAP: usize = 1 << 20;

impl InterleaveGen {
    fn new(x: Arc<WordStream>, y: Arc<WordStream>, record: bool) -> Self {
        InterleaveGen {
            x,
            y,
            xi: 0,
            yi: 0,
            phase: 1,
            found: 0,
            letters: VecDeque::new(),
            blocks: VecDeque::new(),
            record,
            occurrences: Vec::new(),
            plan: Vec::new(),
            phase_first_occ: 0,
            phase_start_xi: 0,
        }
    }

    /// Emits one x letter (closing a window when one completes) and one
    /// y block of the current phase length.
    fn step(&mut self, buf: &mut Vec<u8>) -> Result<(), WordError> {
        if self.xi - self.phase_start_xi > PHASE_X_CAP {
            return Err(WordError::StreamExhausted {
                name: "v".to_string(),
                requested: buf.len(),
                reason: format!(
                    "phase {} found only {} of {} windows in {} x letters",
                    self.phase, self.found, OCCURRENCES_PER_PHASE, PHASE_X_CAP
                ),
            });
        }
        let xl = self.x.letter(self.xi)?;
        buf.push(xl);
        self.letters.push_back((self.xi, xl));
        if self.letters.len() > 4 {
            self.letters.pop_front();
        }
        if self.letters.len() == 4 {
            let in_phase = self.blocks.len() == 3 && self.blocks.iter().all(|b| b.phase == self.phase);
            let l: Vec<(usize, u8)> = self.letters.iter().copied().collect();
            let (a, b, c, d) = (l[0].1, l[1].1, l[2].1, l[3].1);
            if in_phase && b != c && [a, b, c, d] != [0, 1, 0, 1] {
                self.found += 1;
                if self.record {
                    let blocks: Vec<&BlockRec> = self.blocks.iter().collect();
                    debug_assert!(blocks.iter().all(|blk| blk.len == self.phase));
                    self.occurrences.push(QOccurrence {
                        phase: self.phase,
                        x_index: l[0].0,
                        letters: [a, b, c, d],
                        y_ranges: [
                            (blocks[0].y_start, blocks[0].len),
                            (blocks[1].y_start, blocks[1].len),
                            (blocks[2].y_start, blocks[2].len),
                        ],
                        v_y2: (blocks[1].v_start, blocks[1].len),
                    });
                }
                if self.found == OCCURRENCES_PER_PHASE {
                    if self.record {
                        let k = max_excess(self.phase);
                        self.plan.push(PhaseRecord {
                            n: self.phase,
                            required: OCCURRENCES_PER_PHASE,
                            selected: (self.phase_first_occ..self.phase_first_occ + k + 1)
                                .collect(),
                        });
                        self.phase_first_occ = self.occurrences.len();
                    }
                    self.phase += 1;
                    self.found = 0;
                    self.phase_start_xi = self.xi;
                }
            }
        }
        self.xi += 1;

        let n = self.phase;
        let v_start = buf.len();
        let y_end = self.y.prefix(self.yi + n)?;
        buf.extend_from_slice(&y_end[self.yi..]);
        self.blocks.push_back(BlockRec {
            phase: n,
            y_start: self.yi,
            v_start,
            len: n,
        });
        if self.blocks.len() > 3 {
            self.blocks.pop_front();
        }
        self.yi += n;
        Ok(())
    }
}

impl StreamGen for InterleaveGen {
    fn fill(&mut self, buf: &mut Vec<u8>, target: usize) -> Result<(), WordError> {
        while buf.len() < target {
            self.step(buf)?;
        }
        Ok(())
    }

    fn name(&self) -> String {
        "v".to_string()
    }

    fn alphabet_size(&self) -> u8 {
        5
    }
}

/// Runs the interleaving through the requested number of phases, returning
/// the stream (which continues past them), the per-phase plan, and every
/// counted occurrence.
pub fn build_v(
    x: Arc<WordStream>,
    y: Arc<WordStream>,
    phases: usize,
) -> Result<(WordStream, PhasePlan, Vec<QOccurrence>), ConstructionError> {
    assert!(phases >= 1);
    let mut gen = InterleaveGen::new(x.clone(), y.clone(), true);
    let mut buf = Vec::new();
    while gen.plan.len() < phases {
        gen.step(&mut buf)?;
    }
    let plan = PhasePlan {
        phases: gen.plan.clone(),
    };
    let occurrences = gen.occurrences;
    let stream = WordStream::from_gen(Box::new(InterleaveGen::new(x, y, false)));
    Ok((stream, plan, occurrences))
}

// ------------------------------------------------------------- w stream

/// One scheduled disposable factor: the image of the middle block of the
/// `excess`-th selected window of its phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub phase: usize,
    pub excess: usize,
    pub start: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionLedger {
    pub source: String,
    /// How the scheduled occurrences were chosen, for reproducibility.
    pub selection: String,
    pub records: Vec<LedgerRecord>,
    /// Per-record image-length excesses, index-aligned with `records`.
    pub schedules: Vec<Vec<u8>>,
    pub schedule_digest: u64,
}

/// Per-letter image-length excesses summing to `excess`, largest first.
fn front_loaded_excesses(excess: usize, letters: usize) -> Result<Vec<u8>, ConstructionError> {
    if excess > 3 * letters {
        return Err(ConstructionError::ScheduleOverflow {
            excess,
            letters,
            max: 3 * letters,
        });
    }
    let mut e = vec![0u8; letters];
    let q = excess / 3;
    for slot in e.iter_mut().take(q) {
        *slot = 3;
    }
    if !excess.is_multiple_of(3) {
        e[q] = (excess % 3) as u8;
    }
    Ok(e)
}

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct Span {
    vp_start: usize,
    excesses: Vec<u8>,
}

struct GImageGen {
    v: Arc<WordStream>,
    h5: Morphism,
    g: MultiMorphism,
    spans: Arc<Vec<Span>>,
    vt: usize,
}

impl GImageGen {
    fn choice(&self, m: usize) -> usize {
        let idx = self.spans.partition_point(|s| s.vp_start <= m);
        if idx == 0 {
            return 0;
        }
        let span = &self.spans[idx - 1];
        if m < span.vp_start + span.excesses.len() {
            span.excesses[m - span.vp_start] as usize
        } else {
            0
        }
    }
}

impl StreamGen for GImageGen {
    fn fill(&mut self, buf: &mut Vec<u8>, target: usize) -> Result<(), WordError> {
        let block = self.h5.uniform_length().expect("uniform morphism");
        while buf.len() < target {
            let letter = self.v.letter(self.vt)?;
            let image = self.h5.image(letter).expect("letter within alphabet");
            for (j, &il) in image.iter().enumerate() {
                let m = block * self.vt + j;
                let choices = self.g.images(il).expect("letter within alphabet");
                buf.extend_from_slice(&choices[self.choice(m)]);
            }
            self.vt += 1;
        }
        Ok(())
    }

    fn name(&self) -> String {
        "w".to_string()
    }

    fn alphabet_size(&self) -> u8 {
        3
    }
}

/// Applies the two morphisms to `v` with the excess schedule derived from
/// the plan, and records where each scheduled factor lands in `w`.
pub fn build_w(
    v: Arc<WordStream>,
    plan: &PhasePlan,
    occurrences: &[QOccurrence],
) -> Result<(WordStream, ConstructionLedger), ConstructionError> {
    let h5 = h5();
    let block = h5.uniform_length().expect("uniform morphism");
    let base = 23usize;

    let mut scheduled: Vec<(Span, LedgerRecord)> = Vec::new();
    for rec in &plan.phases {
        for (excess, &occ_idx) in rec.selected.iter().enumerate() {
            let occ = &occurrences[occ_idx];
            assert_eq!(occ.phase, rec.n, "selection must stay within its phase");
            let letters = block * occ.v_y2.1;
            let excesses = front_loaded_excesses(excess, letters)?;
            scheduled.push((
                Span {
                    vp_start: block * occ.v_y2.0,
                    excesses,
                },
                LedgerRecord {
                    phase: rec.n,
                    excess,
                    start: 0, // filled in below once spans are ordered
                    length: base * letters + excess,
                },
            ));
        }
    }
    scheduled.sort_by_key(|(s, _)| s.vp_start);
    for pair in scheduled.windows(2) {
        assert!(
            pair[0].0.vp_start + pair[0].0.excesses.len() <= pair[1].0.vp_start,
            "scheduled middle blocks must not overlap"
        );
    }

    let mut records = Vec::with_capacity(scheduled.len());
    let mut schedules = Vec::with_capacity(scheduled.len());
    let mut spans = Vec::with_capacity(scheduled.len());
    let mut extra_before = 0usize;
    let mut digest = 0xcbf29ce484222325u64;
    for (span, mut rec) in scheduled {
        rec.start = base * span.vp_start + extra_before;
        assert!(rec.start > 0, "scheduled factors are interior");
        extra_before += rec.excess;
        digest = fnv1a(digest, &(rec.phase as u64).to_le_bytes());
        digest = fnv1a(digest, &(rec.excess as u64).to_le_bytes());
        digest = fnv1a(digest, &(rec.start as u64).to_le_bytes());
        digest = fnv1a(digest, &(rec.length as u64).to_le_bytes());
        digest = fnv1a(digest, &span.excesses);
        records.push(rec);
        schedules.push(span.excesses.clone());
        spans.push(span);
    }

    let ledger = ConstructionLedger {
        source: "w".to_string(),
        selection: "leftmost counted occurrences per phase, one per excess; front-loaded \
                    image-length excesses"
            .to_string(),
        records,
        schedules,
        schedule_digest: digest,
    };
    let stream = WordStream::from_gen(Box::new(GImageGen {
        v,
        h5,
        g: g(),
        spans: Arc::new(spans),
        vt: 0,
    }));
    Ok((stream, ledger))
}

// ------------------------------------------------------------ lengths L

/// Closed-form description of the lengths covered by the schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthCoverage {
    pub n_max: usize,
    /// Inclusive intervals [414n, 414n + max_excess(n)] for n = 1..=n_max.
    pub intervals: Vec<(u64, u64)>,
    pub missing_below_3312: u64,
}

/// Is `k` the length of some scheduled factor (for any phase)?
pub fn covers_length(k: u64) -> bool {
    let n = (k / 414) as usize;
    n >= 1 && k - 414 * n as u64 <= max_excess(n) as u64
}

/// The covered-length set for phases 1..=n_max. From phase 8 on the
/// intervals are contiguous, so n_max >= 8 implies every length >= 3312 is
/// covered; below 3312 exactly `missing_below_3312` lengths are not.
pub fn lengths_set(n_max: usize) -> LengthCoverage {
    assert!(n_max >= 8, "coverage is contiguous only from phase 8 on");
    let intervals = (1..=n_max)
        .map(|n| (414 * n as u64, (414 * n + max_excess(n)) as u64))
        .collect();
    let missing_below_3312 = (1..3312).filter(|&k| !covers_length(k)).count() as u64;
    LengthCoverage {
        n_max,
        intervals,
        missing_below_3312,
    }
}

// ---------------------------------------------------------- verification

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordVerification {
    pub phase: usize,
    pub excess: usize,
    pub start: usize,
    pub length: usize,
    pub certified: bool,
    pub witness: Option<SquareWitness>,
    pub scan_bound: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub records: Vec<RecordVerification>,
    pub all_certified: bool,
}

/// Re-checks each ledger record by deleting its range and scanning the
/// seam for squares up to half-length `scan`. Only a window of `2 * scan`
/// letters on each side of the seam can matter, so that is all that gets
/// materialized.
pub fn verify_ledger(
    w: &WordStream,
    ledger: &ConstructionLedger,
    scan: usize,
) -> Result<VerificationReport, WordError> {
    let mut records = Vec::with_capacity(ledger.records.len());
    for rec in &ledger.records {
        let left = rec.start.saturating_sub(2 * scan);
        let end = rec.start + rec.length + 2 * scan;
        let prefix = w.prefix(end)?;
        let mut window = Vec::with_capacity(end - left - rec.length);
        window.extend_from_slice(&prefix[left..rec.start]);
        window.extend_from_slice(&prefix[rec.start + rec.length..end]);
        let seam = rec.start - left;
        let witness = crossing_square_at(&window, seam, scan).map(|wit| SquareWitness {
            start: wit.start + left,
            half: wit.half,
        });
        records.push(RecordVerification {
            phase: rec.phase,
            excess: rec.excess,
            start: rec.start,
            length: rec.length,
            certified: witness.is_none(),
            witness,
            scan_bound: scan,
        });
    }
    let all_certified = records.iter().all(|r| r.certified);
    Ok(VerificationReport {
        records,
        all_certified,
    })
}

/// Everything one construction run produces. The interleaved word is shared
/// with the image stream's generator, hence Arc.
pub struct Pipeline {
    pub v: Arc<WordStream>,
    pub plan: PhasePlan,
    pub occurrences: Vec<QOccurrence>,
    pub w: WordStream,
    pub ledger: ConstructionLedger,
}

/// Convenience wrapper: the whole pipeline for the given phase count.
pub fn default_pipeline(phases: usize) -> Result<Pipeline, ConstructionError> {
    let x = Arc::new(fs_stream());
    let y = Arc::new(relabeled_vtm_stream());
    let (v, plan, occurrences) = build_v(x, y, phases)?;
    let v = Arc::new(v);
    let (w, ledger) = build_w(v.clone(), &plan, &occurrences)?;
    Ok(Pipeline { v, plan, occurrences, w, ledger })
}
