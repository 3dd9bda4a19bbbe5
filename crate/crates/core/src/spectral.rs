//! Exact-rational spectral analysis of automaton transition structure.
//!
//! The density of an accepted set is computed as the limit fraction of
//! input strings that reach a final state: trim the automaton to states
//! that are reachable and can still accept, extract the unique closed
//! strongly-connected component the trimmed part funnels into, and read
//! the density off the normalized left Perron eigenvector of that
//! component's adjacency matrix. Everything is computed in exact
//! rationals; there is no floating point on this path.

use num::{BigInt, BigRational, One, Signed, Zero};
use thiserror::Error;

use crate::dfao::Dfao;
use crate::engine::TrackAutomaton;

pub type Rational = BigRational;
pub type FrequencyVector = Vec<Rational>;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix rows must form a square")]
    NotSquare,
    #[error("{0} is not an eigenvalue")]
    NotEigenvalue(Rational),
    #[error("eigenspace at {lambda} has dimension {dim}, expected 1")]
    EigenspaceDimension { lambda: Rational, dim: usize },
    #[error("eigenvector entries sum to zero, cannot normalize")]
    ZeroSum,
    #[error("trimmed automaton is not closed: state {state} leaks on symbol {symbol}")]
    NotClosed { state: u32, symbol: usize },
    #[error("trimmed automaton has {0} closed recurrent components, expected exactly 1")]
    SplitRecurrence(usize),
    #[error("recurrent component is not primitive")]
    NotPrimitive,
}

/// A square matrix of exact rationals, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    n: usize,
    rows: Vec<Vec<Rational>>,
}

impl RationalMatrix {
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, SpectralError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(SpectralError::NotSquare);
        }
        Ok(RationalMatrix { n, rows })
    }

    pub fn from_integer_rows(rows: &[Vec<i64>]) -> Result<Self, SpectralError> {
        RationalMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Rational::from_integer(BigInt::from(x))).collect())
                .collect(),
        )
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j]
    }

    pub fn row_sums(&self) -> Vec<Rational> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(Rational::zero(), |acc, x| acc + x))
            .collect()
    }

    /// v * M for a row vector v.
    pub fn left_apply(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|j| {
                (0..self.n).fold(Rational::zero(), |acc, i| acc + &v[i] * &self.rows[i][j])
            })
            .collect()
    }

    /// Rows of space-separated rationals.
    pub fn to_text(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A fixed presentation of the recurrent transition structure of the
/// deletable-position automaton over base-2 digits: eight states, every
/// row summing to 2, accepting states 2 and 8 in 1-based numbering.
pub fn reference_recurrent_matrix() -> RationalMatrix {
    RationalMatrix::from_integer_rows(&[
        vec![0, 1, 1, 0, 0, 0, 0, 0],
        vec![0, 0, 0, 1, 1, 0, 0, 0],
        vec![0, 0, 0, 0, 1, 1, 0, 0],
        vec![1, 0, 0, 0, 0, 0, 1, 0],
        vec![0, 0, 1, 0, 0, 0, 1, 0],
        vec![0, 0, 0, 0, 1, 0, 0, 1],
        vec![0, 0, 0, 1, 1, 0, 0, 0],
        vec![1, 0, 0, 0, 0, 0, 1, 0],
    ])
    .unwrap()
}

/// 1-based accepting states paired with `reference_recurrent_matrix`.
pub const REFERENCE_FINAL_STATES: [usize; 2] = [2, 8];

// ----------------------------------------------------- transition views

struct Machine {
    num_symbols: usize,
    delta: Vec<u32>, // state * num_symbols + symbol
    initial: u32,
    finals: Vec<bool>,
}

impl Machine {
    fn num_states(&self) -> usize {
        self.finals.len()
    }

    fn step(&self, s: u32, c: usize) -> u32 {
        self.delta[s as usize * self.num_symbols + c]
    }
}

fn machine_of_track(a: &TrackAutomaton) -> Machine {
    let m = 1usize << a.tracks().len();
    let n = a.num_states();
    let mut delta = Vec::with_capacity(n * m);
    let mut finals = Vec::with_capacity(n);
    for s in 0..n as u32 {
        for c in 0..m {
            delta.push(a.step(s, c));
        }
        finals.push(a.is_accepting(s));
    }
    Machine {
        num_symbols: m,
        delta,
        initial: a.initial(),
        finals,
    }
}

fn machine_of_dfao(d: &Dfao, accepting_outputs: &[u8]) -> Machine {
    let n = d.state_count();
    let mut delta = Vec::with_capacity(n * 2);
    let mut finals = Vec::with_capacity(n);
    for s in 0..n as u32 {
        for c in 0..2u8 {
            delta.push(d.step(s, c));
        }
        finals.push(accepting_outputs.contains(&d.output(s)));
    }
    Machine {
        num_symbols: 2,
        delta,
        initial: d.initial(),
        finals,
    }
}

/// Transition counts between the given states; transitions leaving the
/// subset are not counted.
pub fn adjacency_matrix(a: &TrackAutomaton, states: &[u32]) -> RationalMatrix {
    adjacency_of(&machine_of_track(a), states)
}

pub fn adjacency_matrix_dfao(d: &Dfao, states: &[u32]) -> RationalMatrix {
    adjacency_of(&machine_of_dfao(d, &[]), states)
}

fn adjacency_of(mach: &Machine, states: &[u32]) -> RationalMatrix {
    let n = states.len();
    let mut rows = vec![vec![Rational::zero(); n]; n];
    for (i, &s) in states.iter().enumerate() {
        for c in 0..mach.num_symbols {
            let t = mach.step(s, c);
            if let Some(j) = states.iter().position(|&u| u == t) {
                rows[i][j] += Rational::one();
            }
        }
    }
    RationalMatrix { n, rows }
}

// -------------------------------------------------------- spectral core

/// Smallest k with M^k entrywise positive, bounded by (n-1)^2 + 1.
/// Positivity patterns are closed under non-negative products, so only the
/// boolean pattern is iterated.
pub fn primitivity_index(m: &RationalMatrix) -> Option<usize> {
    assert!(
        m.rows.iter().flatten().all(|x| !x.is_negative()),
        "primitivity is defined for non-negative matrices"
    );
    let n = m.n;
    let pattern: Vec<bool> = m
        .rows
        .iter()
        .flatten()
        .map(|x| x.is_positive())
        .collect();
    let bound = (n - 1) * (n - 1) + 1;
    let mut power = pattern.clone();
    for k in 1..=bound {
        if power.iter().all(|&p| p) {
            return Some(k);
        }
        let mut next = vec![false; n * n];
        for i in 0..n {
            for l in 0..n {
                if power[i * n + l] {
                    for j in 0..n {
                        next[i * n + j] |= pattern[l * n + j];
                    }
                }
            }
        }
        power = next;
    }
    None
}

/// Exact left eigenvector v with vM = lambda v, normalized to sum 1.
/// Fails unless the eigenspace is exactly one-dimensional.
#[allow(clippy::needless_range_loop)] // index pairs span two rows at once
pub fn left_perron_eigenvector(
    m: &RationalMatrix,
    lambda: &Rational,
) -> Result<FrequencyVector, SpectralError> {
    let n = m.n;
    // Solve (M^T - lambda I) x = 0 by full Gauss-Jordan elimination.
    let mut a = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = m.rows[j][i].clone();
        }
        a[i][i] -= lambda;
    }
    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let inv = a[rank][col].clone();
        for x in &mut a[rank] {
            *x /= &inv;
        }
        for r in 0..n {
            if r != rank && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..n {
                    let sub = &f * &a[rank][c];
                    a[r][c] -= sub;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    let nullity = n - rank;
    if nullity == 0 {
        return Err(SpectralError::NotEigenvalue(lambda.clone()));
    }
    if nullity > 1 {
        return Err(SpectralError::EigenspaceDimension {
            lambda: lambda.clone(),
            dim: nullity,
        });
    }
    let free = (0..n).find(|c| !pivot_cols.contains(c)).unwrap();
    let mut v = vec![Rational::zero(); n];
    v[free] = Rational::one();
    for (r, &c) in pivot_cols.iter().enumerate() {
        v[c] = -a[r][free].clone();
    }
    let sum = v.iter().fold(Rational::zero(), |acc, x| acc + x);
    if sum.is_zero() {
        return Err(SpectralError::ZeroSum);
    }
    for x in &mut v {
        *x /= &sum;
    }
    Ok(v)
}

// ------------------------------------------------------------- density

/// The recurrent component of the trimmed automaton: the unique closed
/// strongly-connected component, as (sorted original states, adjacency).
pub fn recurrent_adjacency(
    a: &TrackAutomaton,
) -> Result<(Vec<u32>, RationalMatrix), SpectralError> {
    let mach = machine_of_track(a);
    let trimmed = trim(&mach);
    let scc = terminal_component(&mach, &trimmed)?;
    let adj = adjacency_of(&mach, &scc);
    Ok((scc, adj))
}

/// Limit fraction of input strings the automaton accepts.
pub fn accepted_density(a: &TrackAutomaton) -> Result<Rational, SpectralError> {
    density_of(&machine_of_track(a))
}

/// Same, for an automaton with output: a state is final when its output
/// letter is in `accepting_outputs`.
pub fn accepted_density_dfao(
    d: &Dfao,
    accepting_outputs: &[u8],
) -> Result<Rational, SpectralError> {
    density_of(&machine_of_dfao(d, accepting_outputs))
}

fn density_of(mach: &Machine) -> Result<Rational, SpectralError> {
    let trimmed = trim(mach);
    if trimmed.iter().all(|&t| !t) {
        return Ok(Rational::zero());
    }
    let scc = terminal_component(mach, &trimmed)?;
    let adj = adjacency_of(mach, &scc);
    if primitivity_index(&adj).is_none() {
        return Err(SpectralError::NotPrimitive);
    }
    // The component is closed and complete, so every row sums to the
    // symbol count and that count is the Perron eigenvalue.
    let lambda = Rational::from_integer(BigInt::from(mach.num_symbols));
    let v = left_perron_eigenvector(&adj, &lambda)?;
    Ok(scc
        .iter()
        .zip(&v)
        .filter(|(&s, _)| mach.finals[s as usize])
        .fold(Rational::zero(), |acc, (_, x)| acc + x))
}

/// States reachable from the initial state that can still reach a final.
fn trim(mach: &Machine) -> Vec<bool> {
    let n = mach.num_states();
    let mut reach = vec![false; n];
    let mut stack = vec![mach.initial];
    reach[mach.initial as usize] = true;
    while let Some(s) = stack.pop() {
        for c in 0..mach.num_symbols {
            let t = mach.step(s, c);
            if !reach[t as usize] {
                reach[t as usize] = true;
                stack.push(t);
            }
        }
    }
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for s in 0..n as u32 {
        for c in 0..mach.num_symbols {
            preds[mach.step(s, c) as usize].push(s);
        }
    }
    let mut co = vec![false; n];
    let mut stack: Vec<u32> = (0..n as u32).filter(|&s| mach.finals[s as usize]).collect();
    for &s in &stack {
        co[s as usize] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &preds[s as usize] {
            if !co[p as usize] {
                co[p as usize] = true;
                stack.push(p);
            }
        }
    }
    (0..n).map(|s| reach[s] && co[s]).collect()
}

/// The unique terminal strongly-connected component of the trimmed part.
/// Requires the trimmed part to be closed (no transitions leave it), so
/// that all probability mass stays inside and converges onto the result.
fn terminal_component(mach: &Machine, trimmed: &[bool]) -> Result<Vec<u32>, SpectralError> {
    let n = mach.num_states();
    for s in 0..n as u32 {
        if !trimmed[s as usize] {
            continue;
        }
        for c in 0..mach.num_symbols {
            if !trimmed[mach.step(s, c) as usize] {
                return Err(SpectralError::NotClosed { state: s, symbol: c });
            }
        }
    }

    // Kosaraju on the trimmed subgraph.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n as u32 {
        if seen[root as usize] || !trimmed[root as usize] {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        seen[root as usize] = true;
        while let Some(&mut (s, ref mut c)) = stack.last_mut() {
            if *c < mach.num_symbols {
                let t = mach.step(s, *c);
                *c += 1;
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    stack.push((t, 0));
                }
            } else {
                order.push(s);
                stack.pop();
            }
        }
    }
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for s in 0..n as u32 {
        if trimmed[s as usize] {
            for c in 0..mach.num_symbols {
                preds[mach.step(s, c) as usize].push(s);
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut num_comps = 0;
    for &root in order.iter().rev() {
        if comp[root as usize] != usize::MAX {
            continue;
        }
        let id = num_comps;
        num_comps += 1;
        comp[root as usize] = id;
        let mut stack = vec![root];
        while let Some(s) = stack.pop() {
            for &p in &preds[s as usize] {
                if comp[p as usize] == usize::MAX {
                    comp[p as usize] = id;
                    stack.push(p);
                }
            }
        }
    }

    let mut is_terminal = vec![true; num_comps];
    for s in 0..n as u32 {
        if !trimmed[s as usize] {
            continue;
        }
        for c in 0..mach.num_symbols {
            let t = mach.step(s, c);
            if comp[s as usize] != comp[t as usize] {
                is_terminal[comp[s as usize]] = false;
            }
        }
    }
    let terminals: Vec<usize> = (0..num_comps).filter(|&c| is_terminal[c]).collect();
    if terminals.len() != 1 {
        return Err(SpectralError::SplitRecurrence(terminals.len()));
    }
    Ok((0..n as u32)
        .filter(|&s| trimmed[s as usize] && comp[s as usize] == terminals[0])
        .collect())
}

/// Counts positions j <= n+1 satisfying the predicate, divided by n, at
/// each checkpoint. Results keep the checkpoint order given.
pub fn empirical_density_series(
    positions: impl Fn(u64) -> bool,
    checkpoints: &[u64],
) -> Vec<(u64, f64)> {
    let Some(&max) = checkpoints.iter().max() else {
        return Vec::new();
    };
    let mut by_n: Vec<(u64, u64)> = Vec::with_capacity(checkpoints.len());
    let mut sorted: Vec<u64> = checkpoints.to_vec();
    sorted.sort_unstable();
    let mut count = 0u64;
    let mut next = 0usize;
    for j in 0..=max + 1 {
        while next < sorted.len() && sorted[next] + 1 < j {
            by_n.push((sorted[next], count));
            next += 1;
        }
        if positions(j) {
            count += 1;
        }
    }
    while next < sorted.len() {
        by_n.push((sorted[next], count));
        next += 1;
    }
    checkpoints
        .iter()
        .map(|&n| {
            let count = by_n.iter().find(|&&(m, _)| m == n).unwrap().1;
            let density = if n == 0 { 0.0 } else { count as f64 / n as f64 };
            (n, density)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{PredicateEnv, DISPO_POS_COMMAND};

    fn frac(p: i64, q: i64) -> Rational {
        Rational::new(BigInt::from(p), BigInt::from(q))
    }

    fn reference_eigenvector() -> Vec<Rational> {
        [
            (1, 12),
            (1, 24),
            (1, 6),
            (1, 8),
            (1, 4),
            (1, 12),
            (5, 24),
            (1, 24),
        ]
        .iter()
        .map(|&(p, q)| frac(p, q))
        .collect()
    }

    fn dispo_pos_automaton() -> TrackAutomaton {
        let mut env = PredicateEnv::standard();
        env.run_command(DISPO_POS_COMMAND).unwrap();
        env.predicate("dispo_pos").unwrap().clone()
    }

    #[test]
    fn primitivity_indices() {
        assert_eq!(primitivity_index(&reference_recurrent_matrix()), Some(5));
        let identity =
            RationalMatrix::from_integer_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]])
                .unwrap();
        assert_eq!(primitivity_index(&identity), None);
        let ones = RationalMatrix::from_integer_rows(&[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(primitivity_index(&ones), Some(1));
        let two = RationalMatrix::from_integer_rows(&[vec![2]]).unwrap();
        assert_eq!(primitivity_index(&two), Some(1));
    }

    #[test]
    fn reference_matrix_eigenvector() {
        let m = reference_recurrent_matrix();
        let v = left_perron_eigenvector(&m, &frac(2, 1)).unwrap();
        assert_eq!(v, reference_eigenvector());
        // vM = 2v entrywise.
        let vm = m.left_apply(&v);
        for (a, b) in vm.iter().zip(&v) {
            assert_eq!(a, &(b * frac(2, 1)));
        }
        let sum: Rational = v.iter().fold(Rational::zero(), |acc, x| acc + x);
        assert_eq!(sum, Rational::one());
    }

    #[test]
    fn eigenvector_trivial_and_errors() {
        let two = RationalMatrix::from_integer_rows(&[vec![2]]).unwrap();
        assert_eq!(
            left_perron_eigenvector(&two, &frac(2, 1)).unwrap(),
            vec![Rational::one()]
        );
        assert!(matches!(
            left_perron_eigenvector(&two, &frac(3, 1)),
            Err(SpectralError::NotEigenvalue(_))
        ));
        let diag = RationalMatrix::from_integer_rows(&[vec![2, 0], vec![0, 2]]).unwrap();
        assert!(matches!(
            left_perron_eigenvector(&diag, &frac(2, 1)),
            Err(SpectralError::EigenspaceDimension { dim: 2, .. })
        ));
    }

    #[test]
    fn permuting_states_permutes_the_eigenvector() {
        let m = reference_recurrent_matrix();
        let v = left_perron_eigenvector(&m, &frac(2, 1)).unwrap();
        let perm = [3usize, 0, 6, 1, 7, 4, 2, 5];
        let mut rows = vec![vec![Rational::zero(); 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                rows[perm[i]][perm[j]] = m.entry(i, j).clone();
            }
        }
        let pm = RationalMatrix::from_rows(rows).unwrap();
        let pv = left_perron_eigenvector(&pm, &frac(2, 1)).unwrap();
        for i in 0..8 {
            assert_eq!(pv[perm[i]], v[i]);
        }
    }

    #[test]
    fn reference_final_mass_is_one_twelfth() {
        let m = reference_recurrent_matrix();
        let v = left_perron_eigenvector(&m, &frac(2, 1)).unwrap();
        let mass: Rational = REFERENCE_FINAL_STATES
            .iter()
            .map(|&s| v[s - 1].clone())
            .fold(Rational::zero(), |acc, x| acc + x);
        assert_eq!(mass, frac(1, 12));
    }

    #[test]
    fn adjacency_shapes() {
        let all = PredicateEnv::new().compile_text("x = x").unwrap();
        let states: Vec<u32> = (0..all.num_states() as u32).collect();
        let adj = adjacency_matrix(&all, &states);
        assert_eq!(adj, RationalMatrix::from_integer_rows(&[vec![2]]).unwrap());

        let a = dispo_pos_automaton();
        let states: Vec<u32> = (0..a.num_states() as u32).collect();
        let adj = adjacency_matrix(&a, &states);
        for s in adj.row_sums() {
            assert_eq!(s, frac(2, 1));
        }
    }

    #[test]
    fn density_of_deletable_positions_is_one_twelfth() {
        let a = dispo_pos_automaton();
        let (states, adj) = recurrent_adjacency(&a).unwrap();
        assert!(primitivity_index(&adj).is_some());
        assert!(!states.is_empty());
        assert_eq!(accepted_density(&a).unwrap(), frac(1, 12));
    }

    #[test]
    fn density_edge_cases() {
        let all = PredicateEnv::new().compile_text("x = x").unwrap();
        assert_eq!(accepted_density(&all).unwrap(), Rational::one());
        let none = PredicateEnv::new().compile_text("x < 0").unwrap();
        assert_eq!(accepted_density(&none).unwrap(), Rational::zero());
        // Period-2 flip-flop: recurrent but not primitive.
        let flip = TrackAutomaton::from_text(
            "tracks x\nstates 2, initial 0, order msd\n0 0 -> 1\n0 1 -> 1\n1 0 -> 0\n1 1 -> 0\noutput 0 = 0\noutput 1 = 1\n",
        )
        .unwrap();
        assert!(matches!(
            accepted_density(&flip),
            Err(SpectralError::NotPrimitive)
        ));
        // Finite language: the accepting chain leaks into the trimmed-away
        // dead state, which the spectral method must refuse.
        let five = PredicateEnv::new().compile_text("x = 5").unwrap();
        assert!(matches!(
            accepted_density(&five),
            Err(SpectralError::NotClosed { .. })
        ));
    }

    #[test]
    fn empirical_series_counts_through_n_plus_one() {
        let listed = [
            0u64, 2, 12, 18, 44, 50, 60, 66, 76, 82, 108, 114, 140, 146, 172, 178, 188, 194, 204,
        ];
        let series = empirical_density_series(|j| listed.contains(&j), &[204, 12, 0]);
        assert_eq!(series.len(), 3);
        assert_eq!(series[0].0, 204);
        assert!((series[0].1 - 19.0 / 204.0).abs() < 1e-12);
        // n = 12 counts positions <= 13: {0, 2, 12}.
        assert!((series[1].1 - 3.0 / 12.0).abs() < 1e-12);
        assert_eq!(series[2], (0, 0.0));

        let zeros = empirical_density_series(|_| false, &[10, 100]);
        assert!(zeros.iter().all(|&(_, d)| d == 0.0));
    }

    #[test]
    fn empirical_density_approaches_the_exact_value() {
        let a = dispo_pos_automaton();
        let n = 1u64 << 14;
        let series = empirical_density_series(|j| a.eval(&[j]), &[n]);
        assert!((series[0].1 - 1.0 / 12.0).abs() < 0.01, "got {}", series[0].1);
    }

    #[test]
    fn matrix_text_output() {
        let m = RationalMatrix::from_rows(vec![
            vec![frac(1, 2), frac(0, 1)],
            vec![frac(3, 1), frac(5, 24)],
        ])
        .unwrap();
        assert_eq!(m.to_text(), "1/2 0\n3 5/24");
    }
}
