//! Canonical SMILES generation.
//!
//! Atom ranks are computed by iterative neighborhood refinement; remaining
//! symmetry ties are broken exhaustively by trying every member of the first
//! ambiguous class and keeping the lexicographically smallest rendering. The
//! same machinery produces color-aware graph keys used to deduplicate
//! attachment candidates.

use super::{implicit_hydrogens, BondOrder, Molecule};

/// Canonical SMILES: equal strings for isomorphic molecules, and
/// `parse(write(m))` is isomorphic to `m`.
pub fn write_smiles(m: &Molecule) -> String {
    canonicalize(m, initial_colors(m, None), &render_smiles)
}

/// Canonical key of a vertex-colored molecule. Two colored graphs get the
/// same key iff they are isomorphic under a color-preserving mapping.
pub fn colored_key(m: &Molecule, colors: &[u64]) -> String {
    debug_assert_eq!(colors.len(), m.atom_count());
    canonicalize(m, initial_colors(m, Some(colors)), &|m, order| {
        render_colored(m, order, colors)
    })
}

/// True when the two molecules are isomorphic (same canonical form).
pub fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    a.atom_count() == b.atom_count()
        && a.bond_count() == b.bond_count()
        && write_smiles(a) == write_smiles(b)
}

// Colors are dense ranks: atoms with equal rank are (so far) indistinguishable.
type Colors = Vec<usize>;

fn initial_colors(m: &Molecule, seed: Option<&[u64]>) -> Colors {
    let keys: Vec<(u8, i8, u8, bool, usize, u8, u64)> = (0..m.atom_count())
        .map(|i| {
            let a = m.atom(i);
            (
                element_code(m, i),
                a.charge,
                a.hydrogens,
                a.aromatic,
                m.degree(i),
                m.bond_order_sum(i),
                seed.map_or(0, |s| s[i]),
            )
        })
        .collect();
    ranks_of(&keys)
}

fn element_code(m: &Molecule, i: usize) -> u8 {
    use super::Element::*;
    match m.atom(i).element {
        C => 0,
        N => 1,
        O => 2,
        S => 3,
        P => 4,
        F => 5,
        Cl => 6,
        Br => 7,
        I => 8,
    }
}

fn ranks_of<K: Ord + Clone>(keys: &[K]) -> Colors {
    let mut sorted: Vec<&K> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(&k).unwrap())
        .collect()
}

/// One refinement sweep; repeats until the partition stabilizes.
fn refine(m: &Molecule, mut colors: Colors) -> Colors {
    loop {
        let before = class_count(&colors);
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..m.atom_count())
            .map(|i| {
                let mut nbrs: Vec<(u8, usize)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, bi)| (m.bond(bi).order.code(), colors[nb]))
                    .collect();
                nbrs.sort_unstable();
                (colors[i], nbrs)
            })
            .collect();
        colors = ranks_of(&keys);
        if class_count(&colors) == before {
            return colors;
        }
    }
}

fn class_count(colors: &Colors) -> usize {
    // Colors may be sparse right after an orbit break.
    colors
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len()
}

/// Recursive canonicalization: refine, then break the first ambiguous class
/// exhaustively, keeping the smallest rendering.
fn canonicalize(m: &Molecule, colors: Colors, render: &dyn Fn(&Molecule, &[usize]) -> String) -> String {
    let colors = refine(m, colors);
    let n = m.atom_count();
    if class_count(&colors) == n {
        let order = order_from_colors(&colors);
        return render(m, &order);
    }
    // Smallest ambiguous color class.
    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &c) in colors.iter().enumerate() {
        class_members[c].push(i);
    }
    let target = class_members
        .iter()
        .position(|ms| ms.len() > 1)
        .expect("ambiguous class must exist");
    let mut best: Option<String> = None;
    for &a in &class_members[target] {
        // Single `a` out: it precedes the rest of its class.
        let mut next: Colors = colors.iter().map(|&c| c * 2 + 1).collect();
        next[a] = colors[a] * 2;
        let s = canonicalize(m, next, render);
        if best.as_ref().is_none_or(|b| s < *b) {
            best = Some(s);
        }
    }
    best.unwrap()
}

/// Maps rank -> atom index.
fn order_from_colors(colors: &Colors) -> Vec<usize> {
    let mut order = vec![0usize; colors.len()];
    for (atom, &rank) in colors.iter().enumerate() {
        order[rank] = atom;
    }
    order
}

/// Deterministic serialization of a colored graph in canonical order.
fn render_colored(m: &Molecule, order: &[usize], colors: &[u64]) -> String {
    let mut rank_of = vec![0usize; order.len()];
    for (rank, &atom) in order.iter().enumerate() {
        rank_of[atom] = rank;
    }
    let mut out = String::new();
    for &atom in order {
        let a = m.atom(atom);
        out.push_str(&format!(
            "{}{}{}{}|",
            a.element.symbol(),
            a.charge,
            if a.aromatic { "a" } else { "" },
            colors[atom],
        ));
    }
    let mut edges: Vec<(usize, usize, u8)> = m
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (rank_of[b.a], rank_of[b.b]);
            (x.min(y), x.max(y), b.order.code())
        })
        .collect();
    edges.sort_unstable();
    for (x, y, c) in edges {
        out.push_str(&format!("{}-{}:{};", x, y, c));
    }
    out
}

/// SMILES rendering for a complete canonical ordering.
fn render_smiles(m: &Molecule, order: &[usize]) -> String {
    let n = m.atom_count();
    let mut rank_of = vec![0usize; n];
    for (rank, &atom) in order.iter().enumerate() {
        rank_of[atom] = rank;
    }

    // DFS from the rank-0 atom, preferring low-rank neighbors; collect tree
    // children and ring-closure bonds.
    let start = order[0];
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut ring_bonds: Vec<(usize, usize)> = Vec::new(); // (bond idx, digit)
    let mut seen_ring: Vec<bool> = vec![false; m.bond_count()];
    let mut next_digit = 1usize;

    fn dfs(
        m: &Molecule,
        rank_of: &[usize],
        u: usize,
        visited: &mut [bool],
        children: &mut [Vec<usize>],
        parent: &mut [Option<usize>],
        ring_bonds: &mut Vec<(usize, usize)>,
        seen_ring: &mut [bool],
        next_digit: &mut usize,
    ) {
        visited[u] = true;
        let mut nbrs: Vec<(usize, usize)> = m.neighbors(u).to_vec();
        nbrs.sort_by_key(|&(nb, _)| rank_of[nb]);
        for (v, bi) in nbrs {
            if parent[u] == Some(v) {
                continue;
            }
            if visited[v] {
                if !seen_ring[bi] {
                    seen_ring[bi] = true;
                    ring_bonds.push((bi, *next_digit));
                    *next_digit += 1;
                }
            } else {
                parent[v] = Some(u);
                children[u].push(v);
                dfs(
                    m, rank_of, v, visited, children, parent, ring_bonds, seen_ring, next_digit,
                );
            }
        }
    }
    dfs(
        m,
        &rank_of,
        start,
        &mut visited,
        &mut children,
        &mut parent,
        &mut ring_bonds,
        &mut seen_ring,
        &mut next_digit,
    );

    // Digits carried by each atom, in digit order.
    let mut atom_digits: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (digit, bond idx)
    for &(bi, digit) in &ring_bonds {
        let b = m.bond(bi);
        atom_digits[b.a].push((digit, bi));
        atom_digits[b.b].push((digit, bi));
    }
    for digits in &mut atom_digits {
        digits.sort_unstable();
    }

    let mut out = String::new();
    emit(m, start, &children, &atom_digits, None, &mut out);
    out
}

fn emit(
    m: &Molecule,
    u: usize,
    children: &[Vec<usize>],
    atom_digits: &[Vec<(usize, usize)>],
    inbound: Option<usize>, // bond index from parent
    out: &mut String,
) {
    if let Some(bi) = inbound {
        push_bond_symbol(m, bi, out);
    }
    push_atom_token(m, u, out);
    for &(digit, bi) in &atom_digits[u] {
        push_bond_symbol(m, bi, out);
        if digit < 10 {
            out.push_str(&digit.to_string());
        } else {
            out.push('%');
            out.push_str(&format!("{:02}", digit));
        }
    }
    let kids = &children[u];
    for (pos, &c) in kids.iter().enumerate() {
        let bi = m.bond_between(u, c).unwrap();
        if pos + 1 < kids.len() {
            out.push('(');
            emit(m, c, children, atom_digits, Some(bi), out);
            out.push(')');
        } else {
            emit(m, c, children, atom_digits, Some(bi), out);
        }
    }
}

/// Writes the bond symbol unless the parser default already matches.
fn push_bond_symbol(m: &Molecule, bi: usize, out: &mut String) {
    let b = m.bond(bi);
    let both_aromatic = m.atom(b.a).aromatic && m.atom(b.b).aromatic;
    match b.order {
        BondOrder::Single => {
            if both_aromatic {
                out.push('-');
            }
        }
        BondOrder::Aromatic => {
            if !both_aromatic {
                out.push(':');
            }
        }
        BondOrder::Double => out.push('='),
        BondOrder::Triple => out.push('#'),
    }
}

fn push_atom_token(m: &Molecule, i: usize, out: &mut String) {
    let a = m.atom(i);
    let symbol = if a.aromatic {
        a.element.symbol().to_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    let implied = implicit_hydrogens(a.element, 0, m.bond_order_sum(i), a.aromatic);
    let bracket = a.charge != 0 || (a.charge == 0 && a.hydrogens != implied);
    if !bracket {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    out.push_str(&symbol);
    match a.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => out.push_str(&format!("H{}", h)),
    }
    match a.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 1 => out.push_str(&format!("+{}", c)),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    #[test]
    fn round_trip_single_atom() {
        assert_eq!(write_smiles(&parse_smiles("C").unwrap()), "C");
    }

    #[test]
    fn canonical_equality_for_equivalent_inputs() {
        let a = write_smiles(&parse_smiles("OCC").unwrap());
        let b = write_smiles(&parse_smiles("CCO").unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn benzene_round_trip() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let s = write_smiles(&m);
        let back = parse_smiles(&s).unwrap();
        assert!(isomorphic(&m, &back));
        assert_eq!(back.atom_count(), 6);
        assert!(back.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
    }

    #[test]
    fn explicit_single_between_aromatic_rings() {
        // Biphenyl: the linking bond must be written explicitly.
        let m = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        let s = write_smiles(&m);
        assert!(s.contains('-'), "{}", s);
        let back = parse_smiles(&s).unwrap();
        assert!(isomorphic(&m, &back));
    }

    #[test]
    fn bracket_preserved() {
        let m = parse_smiles("c1cc[nH]c1").unwrap();
        let s = write_smiles(&m);
        assert!(s.contains("[nH]"), "{}", s);
        assert!(isomorphic(&m, &parse_smiles(&s).unwrap()));
        let m = parse_smiles("C[N+](C)(C)C").unwrap();
        let s = write_smiles(&m);
        assert!(s.contains("[N+]"), "{}", s);
        assert!(isomorphic(&m, &parse_smiles(&s).unwrap()));
    }

    #[test]
    fn colored_key_distinguishes_colors() {
        let m = parse_smiles("CCO").unwrap();
        let k1 = colored_key(&m, &[0, 0, 0]);
        let k2 = colored_key(&m, &[1, 0, 0]);
        let k3 = colored_key(&m, &[0, 0, 1]);
        assert_ne!(k1, k2);
        // Coloring the C end vs the O end differ (ends are distinguishable).
        assert_ne!(k2, k3);
    }
}
