//! Divide-and-conquer square detection in O(n log n).
//!
//! A square crossing the midpoint of a word is characterized by two
//! longest-common-extension conditions computable with z-functions, so the
//! whole word can be checked by recursing on halves and testing the crossing
//! cases at each level.

use crate::word::SquareWitness;

/// Standard z-function: `z[i]` = length of the longest common prefix of `s`
/// and `s[i..]`, with `z[0] = |s|`.
pub fn z_function(s: &[u8]) -> Vec<usize> {
    let n = s.len();
    let mut z = vec![0usize; n];
    if n == 0 {
        return z;
    }
    z[0] = n;
    let (mut l, mut r) = (0usize, 0usize);
    for i in 1..n {
        if i < r {
            z[i] = z[i - l].min(r - i);
        }
        while i + z[i] < n && s[z[i]] == s[i + z[i]] {
            z[i] += 1;
        }
        if i + z[i] > r {
            l = i;
            r = i + z[i];
        }
    }
    z
}

const SENTINEL: u8 = 0xff;

/// A square `[s, s+2l)` of `u·v` whose center `s+l` lies in `u` (i.e.
/// `s+l <= |u|`) and whose second half extends into `v`.
///
/// For half-length `l`, writing `p` for the number of second-half letters
/// still inside `u`, the two halves match iff
///   (1) the length-`p` suffixes of `u[..|u|-l]` and `u` agree, and
///   (2) `u[|u|-l ..]` and `v` share a prefix of length `l-p`.
/// Condition (1) is the z-function of reversed `u` at `l`; condition (2) is
/// the z-function of `v # u` at the position of `u[|u|-l]`.
fn crossing_square(u: &[u8], v: &[u8]) -> Option<(usize, usize)> {
    let m = u.len();
    if m == 0 || v.is_empty() {
        return None;
    }
    let rev_u: Vec<u8> = u.iter().rev().copied().collect();
    let zr = z_function(&rev_u);
    let mut t = Vec::with_capacity(v.len() + 1 + m);
    t.extend_from_slice(v);
    t.push(SENTINEL);
    t.extend_from_slice(u);
    let zt = z_function(&t);
    for l in 1..=m {
        let k1 = if l < m { zr[l] } else { 0 };
        let k2 = zt[v.len() + 1 + (m - l)];
        let p_lo = l.saturating_sub(k2);
        let p_hi = k1.min(m - l).min(l - 1);
        if p_lo <= p_hi {
            let p = p_lo;
            return Some((m - p - l, l));
        }
    }
    None
}

/// Any square occurrence in `w` (not necessarily the leftmost), found by
/// divide and conquer. Agrees with the naive scan on presence/absence.
pub fn find_square_dc(w: &[u8]) -> Option<SquareWitness> {
    let n = w.len();
    if n < 2 {
        return None;
    }
    let m = n / 2;
    if let Some(wit) = find_square_dc(&w[..m]) {
        return Some(wit);
    }
    if let Some(wit) = find_square_dc(&w[m..]) {
        return Some(SquareWitness {
            start: wit.start + m,
            half: wit.half,
        });
    }
    if let Some((start, half)) = crossing_square(&w[..m], &w[m..]) {
        let wit = SquareWitness { start, half };
        debug_assert!(wit.holds_in(w));
        return Some(wit);
    }
    // Squares centered right of the midpoint: same test on the reversal.
    let rw: Vec<u8> = w.iter().rev().copied().collect();
    let m2 = n - m;
    if let Some((start, half)) = crossing_square(&rw[..m2], &rw[m2..]) {
        let wit = SquareWitness {
            start: n - start - 2 * half,
            half,
        };
        debug_assert!(wit.holds_in(w));
        return Some(wit);
    }
    None
}

pub fn is_squarefree(w: &[u8]) -> bool {
    find_square_dc(w).is_none()
}
