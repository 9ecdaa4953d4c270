//! Compressed adjacency storage and strongly connected components.

/// Directed graph in compressed sparse row form. Successor lists are sorted
/// and duplicate-free.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    /// Builds from per-vertex successor lists; lists are sorted and deduplicated.
    pub fn from_lists<I, L>(lists: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: IntoIterator<Item = usize>,
    {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut scratch: Vec<u32> = Vec::new();
        for list in lists {
            scratch.clear();
            scratch.extend(list.into_iter().map(|v| u32::try_from(v).expect("vertex fits u32")));
            scratch.sort_unstable();
            scratch.dedup();
            targets.extend_from_slice(&scratch);
            offsets.push(targets.len());
        }
        Csr { offsets, targets }
    }

    /// Builds from already sorted, duplicate-free parts.
    pub(crate) fn from_raw(offsets: Vec<usize>, targets: Vec<u32>) -> Self {
        debug_assert_eq!(*offsets.last().unwrap(), targets.len());
        Csr { offsets, targets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn successors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.successors(u).binary_search(&(v as u32)).is_ok()
    }

    pub fn reversed(&self) -> Csr {
        let n = self.len();
        let mut counts = vec![0usize; n + 1];
        for &t in &self.targets {
            counts[t as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut targets = vec![0u32; self.targets.len()];
        // sources are visited in increasing order, so each list comes out sorted
        for u in 0..n {
            for &v in self.successors(u) {
                targets[fill[v as usize]] = u as u32;
                fill[v as usize] += 1;
            }
        }
        Csr {
            offsets: counts,
            targets,
        }
    }

    /// Subgraph induced by `vertices` (sorted, distinct), relabelled to
    /// `0..vertices.len()` in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Csr {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        let mut offsets = Vec::with_capacity(vertices.len() + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        for &v in vertices {
            for &w in self.successors(v) {
                if let Ok(local) = vertices.binary_search(&(w as usize)) {
                    targets.push(local as u32);
                }
            }
            offsets.push(targets.len());
        }
        Csr { offsets, targets }
    }
}

/// Strongly connected components.
#[derive(Clone, Debug)]
pub struct Components {
    /// Component id of every vertex. Ids are in reverse topological order of
    /// the condensation: every edge `u -> v` has `comp[u] >= comp[v]`.
    pub comp: Vec<u32>,
    pub count: usize,
}

/// Iterative Tarjan; no recursion, so graphs with millions of vertices are fine.
pub fn strongly_connected_components(g: &Csr) -> Components {
    const UNSEEN: u32 = u32::MAX;
    let n = g.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack: Vec<u32> = Vec::new();
    // (vertex, position in its successor list)
    let mut frames: Vec<(u32, usize)> = Vec::new();
    let mut next_index = 0u32;
    let mut count = 0usize;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        frames.push((root as u32, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root as u32);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            let v = v as usize;
            let succ = g.successors(v);
            if *pos < succ.len() {
                let w = succ[*pos] as usize;
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    frames.push((w as u32, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                let p = parent as usize;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow") as usize;
                    on_stack[w] = false;
                    comp[w] = count as u32;
                    if w == v {
                        break;
                    }
                }
                count += 1;
            }
        }
    }
    Components { comp, count }
}

/// Breadth-first distances from `source` (`u32::MAX` when unreachable).
pub fn bfs_distances(g: &Csr, source: usize, dist: &mut Vec<u32>, queue: &mut Vec<u32>) {
    dist.clear();
    dist.resize(g.len(), u32::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push(source as u32);
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head] as usize;
        head += 1;
        let du = dist[u];
        for &w in g.successors(u) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = du + 1;
                queue.push(w);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reach(g: &Csr) -> Vec<Vec<bool>> {
        // paths of length >= 1
        let n = g.len();
        let mut r = vec![vec![false; n]; n];
        for u in 0..n {
            for &v in g.successors(u) {
                r[u][v as usize] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }

    #[test]
    fn small_cases() {
        let g = Csr::from_lists(vec![vec![1], vec![2], vec![0, 3], vec![]]);
        let c = strongly_connected_components(&g);
        assert_eq!(c.count, 2);
        assert_eq!(c.comp[0], c.comp[1]);
        assert_eq!(c.comp[1], c.comp[2]);
        assert!(c.comp[3] < c.comp[0]);
    }

    #[test]
    fn reverse_and_induce() {
        let g = Csr::from_lists(vec![vec![2, 1, 1], vec![2], vec![0]]);
        assert_eq!(g.successors(0), &[1, 2]);
        let r = g.reversed();
        assert_eq!(r.successors(2), &[0, 1]);
        assert_eq!(r.successors(0), &[2]);
        let sub = g.induced(&[0, 2]);
        assert_eq!(sub.successors(0), &[1]);
        assert_eq!(sub.successors(1), &[0]);
    }

    #[test]
    fn deep_path_does_not_overflow() {
        let n = 1_000_000;
        let g = Csr::from_lists((0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![0] }));
        let c = strongly_connected_components(&g);
        assert_eq!(c.count, 1);
    }

    fn arb_graph() -> impl Strategy<Value = Csr> {
        (1usize..30)
            .prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0..n, 0..4), n).prop_map(Csr::from_lists))
    }

    proptest! {
        #[test]
        fn matches_mutual_reachability(g in arb_graph()) {
            let c = strongly_connected_components(&g);
            let r = reach(&g);
            for u in 0..g.len() {
                for v in 0..g.len() {
                    let same = u == v || (r[u][v] && r[v][u]);
                    prop_assert_eq!(c.comp[u] == c.comp[v], same);
                    if g.has_edge(u, v) {
                        prop_assert!(c.comp[u] >= c.comp[v]);
                    }
                }
            }
        }
    }
}
