//! Minimum cycle basis via Horton's candidate enumeration with GF(2)
//! elimination. Graphs here are desk-scale molecules, so the O(V * E)
//! candidate set is cheap.

use crate::molgraph::Molecule;

/// Edge-index bitset.
#[derive(Clone, PartialEq, Eq)]
struct EdgeSet {
    words: Vec<u64>,
}

impl EdgeSet {
    fn new(nbonds: usize) -> EdgeSet {
        EdgeSet {
            words: vec![0; nbonds.div_ceil(64).max(1)],
        }
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn xor_with(&mut self, other: &EdgeSet) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn lowest_bit(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }
}

/// Returns each basis cycle as a sorted list of bond indices.
pub fn minimum_cycle_basis(m: &Molecule) -> Vec<Vec<usize>> {
    let dim = m.bond_count() + 1 - m.atom_count();
    if dim == 0 {
        return Vec::new();
    }
    let mut candidates = candidate_cycles(m);
    // Shortest first; ties by edge list for determinism.
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    candidates.dedup();

    let mut basis: Vec<(usize, EdgeSet)> = Vec::new(); // (pivot, reduced row)
    let mut out = Vec::new();
    for cand in candidates {
        let mut row = EdgeSet::new(m.bond_count());
        for &e in &cand {
            row.insert(e);
        }
        for (pivot, b) in &basis {
            if row.contains(*pivot) {
                row.xor_with(b);
            }
        }
        if !row.is_empty() {
            let pivot = row.lowest_bit().unwrap();
            basis.push((pivot, row));
            out.push(cand);
            if out.len() == dim {
                break;
            }
        }
    }
    out
}

/// Horton candidates: for every vertex v and edge (x, y), the cycle formed by
/// the shortest paths v..x and v..y plus the edge, kept when it is a simple
/// cycle.
fn candidate_cycles(m: &Molecule) -> Vec<Vec<usize>> {
    let n = m.atom_count();
    let mut out = Vec::new();
    for v in 0..n {
        let (dist, parent_edge) = bfs(m, v);
        for (bi, bond) in m.bonds().iter().enumerate() {
            let (x, y) = (bond.a, bond.b);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            let px = path_edges(x, &parent_edge, m);
            let py = path_edges(y, &parent_edge, m);
            if px.contains(&bi) || py.contains(&bi) {
                continue;
            }
            let mut edges: Vec<usize> = px;
            edges.extend(py);
            edges.push(bi);
            edges.sort_unstable();
            let before = edges.len();
            edges.dedup();
            if edges.len() != before {
                continue; // paths overlap
            }
            if is_simple_cycle(m, &edges) {
                out.push(edges);
            }
        }
    }
    out
}

fn bfs(m: &Molecule, start: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = m.atom_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent_edge = vec![None; n];
    let mut queue = std::collections::VecDeque::new();
    dist[start] = 0;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        for &(v, bi) in m.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent_edge[v] = Some(bi);
                queue.push_back(v);
            }
        }
    }
    (dist, parent_edge)
}

fn path_edges(mut u: usize, parent_edge: &[Option<usize>], m: &Molecule) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(bi) = parent_edge[u] {
        out.push(bi);
        u = m.bond(bi).other(u);
    }
    out
}

/// Every vertex touched by the edge set must have degree exactly 2 in it.
fn is_simple_cycle(m: &Molecule, edges: &[usize]) -> bool {
    let mut deg = std::collections::BTreeMap::new();
    for &e in edges {
        let b = m.bond(e);
        *deg.entry(b.a).or_insert(0usize) += 1;
        *deg.entry(b.b).or_insert(0usize) += 1;
    }
    deg.values().all(|&d| d == 2)
}
