//! Binary checkpoints: architecture hash, iteration, named `f32` tensors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Model, ModelConfig};
use crate::autodiff::ParamSet;
use crate::error::{Error, Result};
use crate::tensor::Float;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::corrupt("checkpoint", msg)
}

fn hex(h: &[u8]) -> String {
    h.iter().map(|b| format!("{b:02x}")).collect()
}

fn sets<F>(m: &Model<F>) -> [(&'static str, &ParamSet<F>); 2] {
    [("gen/", &m.gen), ("disc/", &m.disc)]
}

pub fn write_checkpoint_to<F: Float, W: Write>(mut w: W, model: &Model<F>, iteration: u64) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&model.config.hash())?;
    w.write_all(&iteration.to_le_bytes())?;
    for (prefix, ps) in sets(model) {
        for p in ps.iter() {
            let name = format!("{prefix}{}", p.name);
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(p.shape.len() as u32).to_le_bytes())?;
            for &d in &p.shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(p.value.len() * 4);
            for v in &p.value {
                buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint<F: Float>(path: &Path, model: &Model<F>, iteration: u64) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint_to(BufWriter::new(f), model, iteration).map_err(|e| match e {
        Error::Stream(e) => Error::io(path, e),
        other => other,
    })
}

/// Reads exactly `buf.len()` bytes. `Ok(false)` on a clean end of stream
/// before the first byte.
fn fill<R: Read>(r: &mut R, buf: &mut [u8], what: &str, allow_eof: bool) -> Result<bool> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) if got == 0 && allow_eof => return Ok(false),
            Ok(0) => return Err(corrupt(format!("truncated while reading {what}"))),
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Stream(e)),
        }
    }
    Ok(true)
}

fn u32_of<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    fill(r, &mut b, what, false)?;
    Ok(u32::from_le_bytes(b))
}

/// Rebuilds a model of architecture `config` from a checkpoint stream and
/// returns it with the stored iteration counter.
pub fn read_checkpoint_from<F: Float, R: Read>(mut r: R, config: &ModelConfig) -> Result<(Model<F>, u64)> {
    let mut magic = [0u8; 4];
    fill(&mut r, &mut magic, "magic", false)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic, not a checkpoint"));
    }
    let version = u32_of(&mut r, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let mut hash = [0u8; 32];
    fill(&mut r, &mut hash, "config hash", false)?;
    let expected = config.hash();
    if hash != expected {
        return Err(Error::HashMismatch { expected: hex(&expected), found: hex(&hash) });
    }
    let mut it = [0u8; 8];
    fill(&mut r, &mut it, "iteration", false)?;
    let iteration = u64::from_le_bytes(it);

    let mut model = Model::<F>::new(config.clone(), 0)?;
    let mut index: HashMap<String, (bool, usize)> = HashMap::new();
    for (set, (prefix, ps)) in sets(&model).into_iter().enumerate() {
        for (i, p) in ps.iter().enumerate() {
            index.insert(format!("{prefix}{}", p.name), (set == 1, i));
        }
    }
    let mut seen = vec![false; index.len()];
    let mut order: HashMap<(bool, usize), usize> = HashMap::new();
    for (k, v) in index.values().enumerate() {
        order.insert(*v, k);
    }
    loop {
        let mut lb = [0u8; 4];
        if !fill(&mut r, &mut lb, "tensor name length", true)? {
            break;
        }
        let len = u32::from_le_bytes(lb) as usize;
        if len > 4096 {
            return Err(corrupt(format!("implausible tensor name length {len}")));
        }
        let mut name = vec![0u8; len];
        fill(&mut r, &mut name, "tensor name", false)?;
        let name = String::from_utf8(name).map_err(|_| corrupt("tensor name is not UTF-8"))?;
        let ndim = u32_of(&mut r, "tensor rank")? as usize;
        if ndim > 8 {
            return Err(corrupt(format!("{name}: implausible rank {ndim}")));
        }
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(u32_of(&mut r, "tensor dims")? as usize);
        }
        let &(is_disc, i) = index.get(&name).ok_or_else(|| corrupt(format!("unexpected tensor {name}")))?;
        let ps = if is_disc { &mut model.disc } else { &mut model.gen };
        let id = ps.ids().nth(i).expect("indexed above");
        if ps.param(id).shape != dims {
            return Err(corrupt(format!("{name}: stored shape {dims:?}, model expects {:?}", ps.param(id).shape)));
        }
        let mut buf = vec![0u8; dims.iter().product::<usize>() * 4];
        fill(&mut r, &mut buf, &name, false)?;
        for (dst, b) in ps.get_mut(id).iter_mut().zip(buf.chunks_exact(4)) {
            *dst = F::from_f64(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
        }
        let slot = order[&(is_disc, i)];
        if std::mem::replace(&mut seen[slot], true) {
            return Err(corrupt(format!("tensor {name} stored twice")));
        }
    }
    if let Some((name, _)) = index.iter().find(|(_, v)| !seen[order[v]]) {
        return Err(corrupt(format!("tensor {name} missing")));
    }
    Ok((model, iteration))
}

pub fn load_checkpoint<F: Float>(path: &Path, config: &ModelConfig) -> Result<(Model<F>, u64)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint_from(BufReader::new(f), config)
}
