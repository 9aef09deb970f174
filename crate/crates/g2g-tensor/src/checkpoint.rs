//! Checkpoint file format.
//!
//! Layout: magic `VJTNN1`, epoch (u32 LE), entry count (u32 LE), then one
//! table entry per tensor — name length (u16 LE), UTF-8 name, rank (u8),
//! dims (u32 LE each), byte offset into the data section (u64 LE) — followed
//! by the data section of little-endian f32 values. Adam moments are stored
//! as `<name>#m1` / `<name>#m2` entries and per-parameter step counters as
//! `<name>#t`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::store::{Param, ParamStore};
use crate::tensor::{Precision, Tensor};

const MAGIC: &[u8; 6] = b"VJTNN1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
}

/// Writes the store atomically (temp file then rename).
pub fn save(store: &ParamStore, path: &Path) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_store(store, &mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_store(store: &ParamStore, w: &mut impl Write) -> Result<(), CheckpointError> {
    // Entries in deterministic (BTreeMap) order.
    let mut entries: Vec<(String, Vec<u32>, Vec<f32>)> = Vec::new();
    for (name, p) in store.iter() {
        let dims = |t: &Tensor| t.shape().iter().map(|&d| d as u32).collect::<Vec<u32>>();
        let vals = |t: &Tensor| t.data().iter().map(|&x| x as f32).collect::<Vec<f32>>();
        entries.push((name.to_string(), dims(&p.value), vals(&p.value)));
        entries.push((format!("{}#m1", name), dims(&p.m1), vals(&p.m1)));
        entries.push((format!("{}#m2", name), dims(&p.m2), vals(&p.m2)));
        entries.push((format!("{}#t", name), vec![1], vec![p.steps as f32]));
    }

    w.write_all(MAGIC)?;
    w.write_all(&store.epoch.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    let mut offset = 0u64;
    for (name, dims, vals) in &entries {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&[dims.len() as u8])?;
        for d in dims {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&offset.to_le_bytes())?;
        offset += (vals.len() * 4) as u64;
    }
    for (_, _, vals) in &entries {
        for v in vals {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Loads a checkpoint into a fresh store.
pub fn load(path: &Path, precision: Precision) -> Result<ParamStore, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    read_store(&mut r, precision)
}

fn read_store(r: &mut impl Read, precision: Precision) -> Result<ParamStore, CheckpointError> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format("bad magic".into()));
    }
    let epoch = read_u32(r)?;
    let n = read_u32(r)? as usize;
    let mut table: Vec<(String, Vec<usize>, u64)> = Vec::with_capacity(n);
    for _ in 0..n {
        let name_len = read_u16(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| CheckpointError::Format("non-UTF-8 name".into()))?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank)?;
        let mut dims = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            dims.push(read_u32(r)? as usize);
        }
        let offset = read_u64(r)?;
        table.push((name, dims, offset));
    }
    // Offsets are sequential by construction; read the data section in order.
    let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
    let mut sorted = table.clone();
    sorted.sort_by_key(|(_, _, off)| *off);
    for (name, dims, _) in sorted {
        let numel: usize = dims.iter().product();
        let mut buf = vec![0u8; numel * 4];
        r.read_exact(&mut buf)?;
        let data: Vec<f64> = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        tensors.insert(name, Tensor::new(dims, data));
    }

    let mut store = ParamStore::new(precision);
    store.epoch = epoch;
    for (name, value) in &tensors {
        if name.contains('#') {
            continue;
        }
        let m1 = tensors
            .get(&format!("{}#m1", name))
            .ok_or_else(|| CheckpointError::Format(format!("missing moments for {}", name)))?;
        let m2 = tensors
            .get(&format!("{}#m2", name))
            .ok_or_else(|| CheckpointError::Format(format!("missing moments for {}", name)))?;
        let steps = tensors
            .get(&format!("{}#t", name))
            .map(|t| t.data()[0] as u64)
            .unwrap_or(0);
        store.insert_raw(
            name,
            Param {
                value: value.clone(),
                grad: Tensor::zeros(value.shape().to_vec()),
                m1: m1.clone(),
                m2: m2.clone(),
                steps,
            },
        );
    }
    Ok(store)
}

fn read_u16(r: &mut impl Read) -> Result<u16, CheckpointError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_everything() {
        let dir = std::env::temp_dir().join("g2g_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");

        let mut store = ParamStore::new(Precision::Single);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        store.register_matrix("encoder.graph.W1", 4, 6, &mut rng);
        store.register_bias("encoder.tree.b", 4);
        store.epoch = 7;
        // Touch the optimizer state.
        store.accumulate_grad("encoder.tree.b", &Tensor::vector(vec![1.0; 4]), 1.0);
        store.adam_step_all(&crate::store::AdamConfig::default());

        save(&store, &path).unwrap();
        let loaded = load(&path, Precision::Single).unwrap();
        assert_eq!(loaded.epoch, 7);
        assert_eq!(loaded.value("encoder.graph.W1"), store.value("encoder.graph.W1"));
        assert_eq!(loaded.value("encoder.tree.b"), store.value("encoder.tree.b"));
        assert_eq!(
            loaded.param("encoder.tree.b").m1,
            store.param("encoder.tree.b").m1
        );
        assert_eq!(loaded.param("encoder.tree.b").steps, 1);

        // Byte-identical when saved again.
        let path2 = dir.join("model2.ckpt");
        save(&loaded, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn magic_is_checked() {
        let dir = std::env::temp_dir().join("g2g_ckpt_bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt");
        std::fs::write(&path, b"NOTVJT rest").unwrap();
        assert!(matches!(
            load(&path, Precision::Single),
            Err(CheckpointError::Format(_))
        ));
        std::fs::remove_dir_all(&dir).ok();
    }
}
