//! Hopcroft partition refinement for complete deterministic automata with
//! per-state output labels. Acceptors use labels 0/1; automata with output
//! use the output letter.

/// A complete DFA over symbols `0..num_symbols`; `delta[s * num_symbols + c]`
/// is the successor of state `s` on symbol `c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompleteDfa {
    pub num_symbols: usize,
    pub delta: Vec<u32>,
    pub labels: Vec<u32>,
    pub initial: u32,
}

impl CompleteDfa {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn step(&self, state: u32, symbol: usize) -> u32 {
        self.delta[state as usize * self.num_symbols + symbol]
    }

    pub fn run(&self, symbols: impl IntoIterator<Item = usize>) -> u32 {
        let mut state = self.initial;
        for c in symbols {
            state = self.step(state, c);
        }
        state
    }
}

/// Minimal machine with the same labeled behavior from the initial state.
/// States are renumbered canonically: breadth-first from the initial state
/// in symbol order, so equivalent inputs yield identical outputs.
pub fn minimize(dfa: &CompleteDfa) -> CompleteDfa {
    let k = dfa.num_symbols;
    let (reach, delta_r, labels_r) = restrict_to_reachable(dfa);
    let n = reach.len();
    debug_assert!(n > 0);

    let block_of = refine(n, k, &delta_r, &labels_r);
    canonicalize(k, &delta_r, &labels_r, &block_of)
}

fn restrict_to_reachable(dfa: &CompleteDfa) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let k = dfa.num_symbols;
    let n = dfa.num_states();
    let mut compact = vec![u32::MAX; n];
    let mut order = vec![dfa.initial];
    compact[dfa.initial as usize] = 0;
    let mut head = 0;
    while head < order.len() {
        let s = order[head] as usize;
        head += 1;
        for c in 0..k {
            let t = dfa.delta[s * k + c];
            if compact[t as usize] == u32::MAX {
                compact[t as usize] = order.len() as u32;
                order.push(t);
            }
        }
    }
    let m = order.len();
    let mut delta_r = vec![0u32; m * k];
    let mut labels_r = vec![0u32; m];
    for (new, &old) in order.iter().enumerate() {
        labels_r[new] = dfa.labels[old as usize];
        for c in 0..k {
            delta_r[new * k + c] = compact[dfa.delta[old as usize * k + c] as usize];
        }
    }
    (order, delta_r, labels_r)
}

/// Hopcroft refinement; returns the block index of each state. Blocks of the
/// initial partition are label classes.
#[allow(clippy::needless_range_loop)] // the index feeds `position`, not just the slice
fn refine(n: usize, k: usize, delta: &[u32], labels: &[u32]) -> Vec<u32> {
    // Partition structure: `elements` holds states grouped by block,
    // `position[s]` locates s inside it, blocks are [first, end) slices.
    let mut elements: Vec<u32> = (0..n as u32).collect();
    let mut position: Vec<u32> = (0..n as u32).collect();
    let mut block_of = vec![0u32; n];
    let mut first: Vec<u32> = Vec::new();
    let mut end: Vec<u32> = Vec::new();
    let mut marked: Vec<u32> = Vec::new();

    elements.sort_by_key(|&s| labels[s as usize]);
    let mut start = 0;
    while start < n {
        let label = labels[elements[start] as usize];
        let mut stop = start;
        while stop < n && labels[elements[stop] as usize] == label {
            stop += 1;
        }
        let b = first.len() as u32;
        for i in start..stop {
            let s = elements[i];
            position[s as usize] = i as u32;
            block_of[s as usize] = b;
        }
        first.push(start as u32);
        end.push(stop as u32);
        marked.push(0);
        start = stop;
    }

    // Predecessor lists in CSR form, one per symbol.
    let mut inv_start = vec![0u32; k * (n + 1)];
    for s in 0..n {
        for c in 0..k {
            inv_start[c * (n + 1) + delta[s * k + c] as usize + 1] += 1;
        }
    }
    for c in 0..k {
        for t in 0..n {
            inv_start[c * (n + 1) + t + 1] += inv_start[c * (n + 1) + t];
        }
    }
    let mut inv_data = vec![0u32; k * n];
    let mut cursor = inv_start.clone();
    for s in 0..n {
        for c in 0..k {
            let slot = &mut cursor[c * (n + 1) + delta[s * k + c] as usize];
            inv_data[c * n + *slot as usize] = s as u32;
            *slot += 1;
        }
    }

    let mut worklist: Vec<(u32, u32)> = Vec::new();
    let mut in_work: Vec<bool> = Vec::new();
    in_work.resize(first.len() * k, false);
    for b in 0..first.len() as u32 {
        for c in 0..k as u32 {
            worklist.push((b, c));
            in_work[b as usize * k + c as usize] = true;
        }
    }

    let mut touched: Vec<u32> = Vec::new();
    let mut splitter: Vec<u32> = Vec::new();
    while let Some((a, c)) = worklist.pop() {
        in_work[a as usize * k + c as usize] = false;
        // Mark all predecessors via c of states in block a. Marking swaps
        // entries of `elements`, possibly inside block a itself, so iterate
        // over a snapshot.
        touched.clear();
        let (lo, hi) = (first[a as usize] as usize, end[a as usize] as usize);
        splitter.clear();
        splitter.extend_from_slice(&elements[lo..hi]);
        for &t in &splitter {
            let t = t as usize;
            let ps = inv_start[c as usize * (n + 1) + t] as usize;
            let pe = inv_start[c as usize * (n + 1) + t + 1] as usize;
            for &p in &inv_data[c as usize * n + ps..c as usize * n + pe] {
                let b = block_of[p as usize];
                if marked[b as usize] == 0 {
                    touched.push(b);
                }
                // Swap p into the marked prefix of its block.
                let dest = first[b as usize] + marked[b as usize];
                let pos_p = position[p as usize];
                if pos_p >= dest {
                    let other = elements[dest as usize];
                    elements.swap(dest as usize, pos_p as usize);
                    position[p as usize] = dest;
                    position[other as usize] = pos_p;
                    marked[b as usize] += 1;
                }
            }
        }
        for &b in &touched {
            let m = marked[b as usize];
            marked[b as usize] = 0;
            let size = end[b as usize] - first[b as usize];
            if m == size {
                continue;
            }
            // Split off the marked prefix as a new block.
            let b2 = first.len() as u32;
            first.push(first[b as usize]);
            end.push(first[b as usize] + m);
            marked.push(0);
            first[b as usize] += m;
            for i in first[b2 as usize]..end[b2 as usize] {
                block_of[elements[i as usize] as usize] = b2;
            }
            in_work.resize(first.len() * k, false);
            let (sz1, sz2) = (end[b as usize] - first[b as usize], m);
            for d in 0..k as u32 {
                // Queue the new block if b is already queued, else the smaller half.
                let push = if in_work[b as usize * k + d as usize] || sz2 <= sz1 {
                    b2
                } else {
                    b
                };
                if !in_work[push as usize * k + d as usize] {
                    worklist.push((push, d));
                    in_work[push as usize * k + d as usize] = true;
                }
            }
        }
    }
    block_of
}

fn canonicalize(k: usize, delta: &[u32], labels: &[u32], block_of: &[u32]) -> CompleteDfa {
    let num_blocks = block_of.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
    // One representative per block; transitions agree across a block.
    let mut rep = vec![u32::MAX; num_blocks];
    for (s, &b) in block_of.iter().enumerate() {
        if rep[b as usize] == u32::MAX {
            rep[b as usize] = s as u32;
        }
    }
    let mut bfs_id = vec![u32::MAX; num_blocks];
    let initial_block = block_of[0];
    bfs_id[initial_block as usize] = 0;
    let mut order = vec![initial_block];
    let mut head = 0;
    while head < order.len() {
        let b = order[head];
        head += 1;
        let r = rep[b as usize] as usize;
        for c in 0..k {
            let tb = block_of[delta[r * k + c] as usize];
            if bfs_id[tb as usize] == u32::MAX {
                bfs_id[tb as usize] = order.len() as u32;
                order.push(tb);
            }
        }
    }
    let m = order.len();
    let mut new_delta = vec![0u32; m * k];
    let mut new_labels = vec![0u32; m];
    for (id, &b) in order.iter().enumerate() {
        let r = rep[b as usize] as usize;
        new_labels[id] = labels[r];
        for c in 0..k {
            new_delta[id * k + c] = bfs_id[block_of[delta[r * k + c] as usize] as usize];
        }
    }
    CompleteDfa {
        num_symbols: k,
        delta: new_delta,
        labels: new_labels,
        initial: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn label_of_word(dfa: &CompleteDfa, word: &[usize]) -> u32 {
        dfa.labels[dfa.run(word.iter().copied()) as usize]
    }

    /// Naive Moore refinement, for cross-checking.
    fn moore_classes(dfa: &CompleteDfa) -> usize {
        let n = dfa.num_states();
        let k = dfa.num_symbols;
        let mut class: Vec<u32> = dfa.labels.clone();
        loop {
            let mut sig_map = std::collections::HashMap::new();
            let mut next = vec![0u32; n];
            for s in 0..n {
                let mut sig = vec![class[s]];
                for c in 0..k {
                    sig.push(class[dfa.delta[s * k + c] as usize]);
                }
                let fresh = sig_map.len() as u32;
                next[s] = *sig_map.entry(sig).or_insert(fresh);
            }
            if next == class {
                return sig_map.len();
            }
            class = next;
        }
    }

    #[test]
    fn merges_duplicate_states() {
        // States 1 and 2 are identical; 3 is unreachable.
        let dfa = CompleteDfa {
            num_symbols: 2,
            delta: vec![1, 2, 0, 1, 0, 1, 3, 3],
            labels: vec![0, 1, 1, 0],
            initial: 0,
        };
        let min = minimize(&dfa);
        assert_eq!(min.num_states(), 2);
        assert_eq!(min.initial, 0);
        assert_eq!(min.labels, vec![0, 1]);
    }

    #[test]
    fn canonical_under_state_permutation() {
        let dfa = CompleteDfa {
            num_symbols: 2,
            delta: vec![1, 2, 2, 0, 0, 1],
            labels: vec![0, 1, 2],
            initial: 0,
        };
        // Same machine with states relabeled by the permutation 0->2,1->0,2->1.
        let permuted = CompleteDfa {
            num_symbols: 2,
            delta: vec![1, 2, 2, 0, 0, 1],
            labels: vec![1, 2, 0],
            initial: 2,
        };
        assert_eq!(minimize(&dfa), minimize(&permuted));
    }

    #[test]
    fn single_state() {
        let dfa = CompleteDfa {
            num_symbols: 3,
            delta: vec![0, 0, 0],
            labels: vec![7],
            initial: 0,
        };
        let min = minimize(&dfa);
        assert_eq!(min.num_states(), 1);
        assert_eq!(min.labels, vec![7]);
    }

    #[test]
    fn random_machines_agree_with_naive_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let n = rng.gen_range(1..=40);
            let k = rng.gen_range(1..=3);
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let delta: Vec<u32> = (0..n * k).map(|_| rng.gen_range(0..n) as u32).collect();
            let dfa = CompleteDfa {
                num_symbols: k,
                delta,
                labels,
                initial: rng.gen_range(0..n) as u32,
            };
            let min = minimize(&dfa);

            // Class count must match naive refinement of the reachable part.
            let (_, delta_r, labels_r) = restrict_to_reachable(&dfa);
            let reachable = CompleteDfa {
                num_symbols: k,
                delta: delta_r,
                labels: labels_r,
                initial: 0,
            };
            assert_eq!(min.num_states(), moore_classes(&reachable), "trial {trial}");

            // Behavior must be preserved on random words.
            for _ in 0..50 {
                let len = rng.gen_range(0..12);
                let word: Vec<usize> = (0..len).map(|_| rng.gen_range(0..k)).collect();
                assert_eq!(label_of_word(&dfa, &word), label_of_word(&min, &word));
            }

            // Minimizing twice is a fixed point.
            assert_eq!(minimize(&min), min);
        }
    }
}
