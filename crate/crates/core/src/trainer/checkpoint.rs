//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//! magic `MREP`, format version u32, length-prefixed JSON config, epoch
//! u64, three loss-history arrays, three entity-id lists, named parameter
//! tensors, then Adam step and first/second moment tensors in the same
//! order as the parameters. Tensor data is stored as f64 bits, which is
//! lossless for both supported precisions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::numerics::{AdamState, Tensor};
use crate::scalar::Scalar;

use super::{History, Model, TrainConfig, TrainError, Trained};

const MAGIC: &[u8; 4] = b"MREP";
const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> TrainError {
    TrainError::Checkpoint(format!("io: {e}"))
}

pub fn checkpoint_save<S: Scalar>(state: &Trained<S>, path: &Path) -> Result<(), TrainError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;

    let cfg_json = serde_json::to_vec(&state.model.cfg)
        .map_err(|e| TrainError::Checkpoint(format!("config encode: {e}")))?;
    write_bytes(&mut w, &cfg_json)?;
    w.write_all(&(state.epoch as u64).to_le_bytes()).map_err(io_err)?;

    for series in [
        &state.history.triplet,
        &state.history.mse,
        &state.history.total,
    ] {
        write_f64s(&mut w, series)?;
    }
    for ids in [
        &state.model.concept_ids,
        &state.model.lecture_ids,
        &state.model.course_ids,
    ] {
        write_u64(&mut w, ids.len() as u64)?;
        for id in ids.iter() {
            write_bytes(&mut w, id.as_bytes())?;
        }
    }

    write_u64(&mut w, state.model.params.len() as u64)?;
    for (name, tensor) in &state.model.params {
        write_bytes(&mut w, name.as_bytes())?;
        write_tensor(&mut w, tensor)?;
    }

    write_u64(&mut w, state.adam.step)?;
    let (m, v) = state.adam.moments();
    for tensor in m.iter().chain(v) {
        write_tensor(&mut w, tensor)?;
    }
    w.flush().map_err(io_err)
}

/// Read only the config embedded in a checkpoint.
pub fn checkpoint_peek_config(path: &Path) -> Result<TrainConfig, TrainError> {
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(TrainError::Checkpoint(format!(
            "bad magic {:?}, not a checkpoint",
            magic
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(TrainError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let cfg_json = read_bytes(&mut r)?;
    serde_json::from_slice(&cfg_json)
        .map_err(|e| TrainError::Checkpoint(format!("config decode: {e}")))
}

/// Load a checkpoint, checking the stored config against `want` on every
/// field except the epoch budget.
pub fn checkpoint_load<S: Scalar>(
    path: &Path,
    want: &TrainConfig,
) -> Result<Trained<S>, TrainError> {
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(TrainError::Checkpoint(format!(
            "bad magic {:?}, not a checkpoint",
            magic
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(TrainError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }

    let cfg_json = read_bytes(&mut r)?;
    let cfg: TrainConfig = serde_json::from_slice(&cfg_json)
        .map_err(|e| TrainError::Checkpoint(format!("config decode: {e}")))?;
    cfg.compatible_with(want)?;

    let epoch = read_u64(&mut r)? as usize;
    let history = History {
        triplet: read_f64s(&mut r)?,
        mse: read_f64s(&mut r)?,
        total: read_f64s(&mut r)?,
    };
    let mut id_lists = Vec::with_capacity(3);
    for _ in 0..3 {
        let n = read_u64(&mut r)? as usize;
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let bytes = read_bytes(&mut r)?;
            ids.push(String::from_utf8(bytes).map_err(|e| {
                TrainError::Checkpoint(format!("id decode: {e}"))
            })?);
        }
        id_lists.push(ids);
    }
    let course_ids = id_lists.pop().expect("three lists");
    let lecture_ids = id_lists.pop().expect("three lists");
    let concept_ids = id_lists.pop().expect("three lists");

    let n_params = read_u64(&mut r)? as usize;
    let mut params: BTreeMap<String, Tensor<S>> = BTreeMap::new();
    for _ in 0..n_params {
        let name = String::from_utf8(read_bytes(&mut r)?)
            .map_err(|e| TrainError::Checkpoint(format!("name decode: {e}")))?;
        let tensor = read_tensor::<S, _>(&mut r)?.with_grad();
        if params.insert(name.clone(), tensor).is_some() {
            return Err(TrainError::Checkpoint(format!("duplicate tensor `{name}`")));
        }
    }

    let step = read_u64(&mut r)?;
    let mut m = Vec::with_capacity(n_params);
    let mut v = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        m.push(read_tensor::<S, _>(&mut r)?);
    }
    for _ in 0..n_params {
        v.push(read_tensor::<S, _>(&mut r)?);
    }

    let shapes: Vec<Vec<usize>> = params.values().map(|t| t.shape().to_vec()).collect();
    let mut adam = AdamState::new(S::from_double(cfg.lr), &shapes);
    adam.restore(step, m, v)?;

    let grad_accum = params
        .iter()
        .map(|(name, t)| (name.clone(), Tensor::zeros(t.shape().to_vec())))
        .collect();
    Ok(Trained {
        model: Model {
            cfg,
            params,
            concept_ids,
            lecture_ids,
            course_ids,
        },
        adam,
        epoch,
        history,
        grad_accum,
    })
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<(), TrainError> {
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> Result<(), TrainError> {
    write_u64(w, bytes.len() as u64)?;
    w.write_all(bytes).map_err(io_err)
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<(), TrainError> {
    write_u64(w, values.len() as u64)?;
    for v in values {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn write_tensor<W: Write, S: Scalar>(w: &mut W, t: &Tensor<S>) -> Result<(), TrainError> {
    w.write_all(&(t.shape().len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for &d in t.shape() {
        write_u64(w, d as u64)?;
    }
    for &v in t.data() {
        w.write_all(&v.to_double().to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, TrainError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, TrainError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>, TrainError> {
    let len = read_u64(r)? as usize;
    if len > (1 << 32) {
        return Err(TrainError::Checkpoint(format!("implausible length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf)
}

fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>, TrainError> {
    let len = read_u64(r)? as usize;
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf).map_err(io_err)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn read_tensor<S: Scalar, R: Read>(r: &mut R) -> Result<Tensor<S>, TrainError> {
    let rank = read_u32(r)? as usize;
    if rank > 8 {
        return Err(TrainError::Checkpoint(format!("implausible rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u64(r)? as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf).map_err(io_err)?;
        data.push(S::from_double(f64::from_le_bytes(buf)));
    }
    Tensor::new(shape, data).map_err(|e| TrainError::Checkpoint(format!("tensor: {e}")))
}
