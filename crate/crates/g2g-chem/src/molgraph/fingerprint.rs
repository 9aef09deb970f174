//! ECFP-style Morgan fingerprints and Tanimoto similarity.

use thiserror::Error;

use super::Molecule;

/// Hashed circular-environment fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    bits: Vec<u64>,
    nbits: usize,
    radius: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("fingerprint parameters differ: ({0} bits, r{1}) vs ({2} bits, r{3})")]
    Mismatch(usize, usize, usize, usize),
}

impl Fingerprint {
    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn popcount(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.bits[i / 64] |= 1 << (i % 64);
    }

    /// Builds a fingerprint with the given bit positions set.
    pub fn from_bit_positions(
        nbits: usize,
        radius: usize,
        positions: impl IntoIterator<Item = usize>,
    ) -> Fingerprint {
        let mut fp = Fingerprint {
            bits: vec![0u64; nbits.div_ceil(64)],
            nbits,
            radius,
        };
        for p in positions {
            fp.set(p % nbits);
        }
        fp
    }
}

// splitmix64: a fixed, portable mixing function so fingerprints are stable
// across runs and platforms.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn combine(seed: u64, value: u64) -> u64 {
    mix(seed ^ mix(value))
}

/// Folds circular atom environments of radius `0..=radius` into `nbits`
/// buckets. Isomorphic molecules yield identical fingerprints.
pub fn morgan_fingerprint(m: &Molecule, radius: usize, nbits: usize) -> Fingerprint {
    assert!(nbits.is_power_of_two(), "nbits must be a power of two");
    let mut fp = Fingerprint {
        bits: vec![0u64; nbits.div_ceil(64)],
        nbits,
        radius,
    };
    // Round-0 invariants.
    let mut inv: Vec<u64> = (0..m.atom_count())
        .map(|i| {
            let a = m.atom(i);
            let mut h = combine(0x4d4f5247, a.element.symbol().as_bytes()[0] as u64);
            h = combine(h, a.charge as i64 as u64);
            h = combine(h, a.hydrogens as u64);
            h = combine(h, a.aromatic as u64);
            h = combine(h, m.degree(i) as u64);
            h = combine(h, m.bond_order_sum(i) as u64);
            h
        })
        .collect();
    for &v in &inv {
        fp.set((v % nbits as u64) as usize);
    }
    for r in 1..=radius {
        let mut next = inv.clone();
        for i in 0..m.atom_count() {
            let mut env: Vec<u64> = m
                .neighbors(i)
                .iter()
                .map(|&(nb, bi)| combine(m.bond(bi).order.code() as u64 + 1, inv[nb]))
                .collect();
            env.sort_unstable();
            let mut h = combine(r as u64, inv[i]);
            for e in env {
                h = combine(h, e);
            }
            next[i] = h;
            fp.set((h % nbits as u64) as usize);
        }
        inv = next;
    }
    fp
}

/// |a AND b| / |a OR b|, defined as 1.0 when both fingerprints are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.nbits != b.nbits || a.radius != b.radius {
        return Err(FingerprintError::Mismatch(
            a.nbits, a.radius, b.nbits, b.radius,
        ));
    }
    let mut inter = 0u32;
    let mut union = 0u32;
    for (x, y) in a.bits.iter().zip(&b.bits) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Default fingerprint parameters (ECFP4 convention).
pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_NBITS: usize = 2048;

/// Tanimoto similarity of two molecules under the default parameters.
pub fn similarity(a: &Molecule, b: &Molecule) -> f64 {
    let fa = morgan_fingerprint(a, DEFAULT_RADIUS, DEFAULT_NBITS);
    let fb = morgan_fingerprint(b, DEFAULT_RADIUS, DEFAULT_NBITS);
    tanimoto(&fa, &fb).unwrap()
}
