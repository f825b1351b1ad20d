//! Versioned binary checkpoint container. All numeric payloads are
//! little-endian `f64`, so a save/load round trip is bit-exact.
//!
//! Layout:
//! ```text
//! magic "CHGNCKPT" | version u32 | meta-len u32 | meta (utf8 key=value lines)
//! | section-count u32 | { name-len u16 | name | payload-len u64 | payload }*
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, ArrayD};

use crate::optim::{Adam, SgdMomentum};
use crate::params::{ParamStore, SnState};
use crate::{Result, TapeError};

const MAGIC: &[u8; 8] = b"CHGNCKPT";
const VERSION: u32 = 1;

/// Header metadata carried by every checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointMeta {
    /// What the checkpoint holds ("generator", "train_state", ...).
    pub kind: String,
    /// Architecture hash; loads refuse a mismatch unless forced.
    pub config_hash: String,
    pub iteration: u64,
}

impl CheckpointMeta {
    fn to_text(&self) -> String {
        format!(
            "kind={}\nconfig_hash={}\niteration={}\n",
            self.kind, self.config_hash, self.iteration
        )
    }

    fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut config_hash = None;
        let mut iteration = None;
        for line in text.lines() {
            let Some((k, v)) = line.split_once('=') else {
                continue;
            };
            match k {
                "kind" => kind = Some(v.to_string()),
                "config_hash" => config_hash = Some(v.to_string()),
                "iteration" => {
                    iteration = Some(v.parse::<u64>().map_err(|e| {
                        TapeError::Format(format!("bad iteration in meta: {e}"))
                    })?)
                }
                _ => {}
            }
        }
        Ok(Self {
            kind: kind.ok_or_else(|| TapeError::Format("meta missing kind".into()))?,
            config_hash: config_hash
                .ok_or_else(|| TapeError::Format("meta missing config_hash".into()))?,
            iteration: iteration
                .ok_or_else(|| TapeError::Format("meta missing iteration".into()))?,
        })
    }
}

pub fn write_checkpoint(
    path: &Path,
    meta: &CheckpointMeta,
    sections: &[(&str, Vec<u8>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let meta_bytes = meta.to_text().into_bytes();
    w.write_all(&(meta_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&meta_bytes)?;
    w.write_all(&(sections.len() as u32).to_le_bytes())?;
    for (name, payload) in sections {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u16).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&(payload.len() as u64).to_le_bytes())?;
        w.write_all(payload)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointMeta, BTreeMap<String, Vec<u8>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TapeError::Format("not a checkpoint file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(TapeError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let meta_len = read_u32(&mut r)? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)?;
    let meta = CheckpointMeta::from_text(
        &String::from_utf8(meta_bytes).map_err(|e| TapeError::Format(e.to_string()))?,
    )?;
    let count = read_u32(&mut r)? as usize;
    let mut sections = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u16(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let payload_len = read_u64(&mut r)? as usize;
        let mut payload = vec![0u8; payload_len];
        r.read_exact(&mut payload)?;
        sections.insert(
            String::from_utf8(name).map_err(|e| TapeError::Format(e.to_string()))?,
            payload,
        );
    }
    Ok((meta, sections))
}

// ---------------------------------------------------------------------------
// byte-level helpers
// ---------------------------------------------------------------------------

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn push_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    push_u16(buf, s.len() as u16);
    buf.extend_from_slice(s.as_bytes());
}

fn push_array(buf: &mut Vec<u8>, a: &ArrayD<f64>) {
    push_u16(buf, a.ndim() as u16);
    for &d in a.shape() {
        push_u32(buf, d as u32);
    }
    for &v in a.iter() {
        push_f64(buf, v);
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(TapeError::Format("truncated section".into()));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| TapeError::Format(e.to_string()))
    }

    fn array(&mut self) -> Result<ArrayD<f64>> {
        let ndim = self.u16()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(self.f64()?);
        }
        ArrayD::from_shape_vec(ndarray::IxDyn(&shape), data)
            .map_err(|e| TapeError::Format(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// payload encodings
// ---------------------------------------------------------------------------

pub fn params_to_bytes(store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    push_u32(&mut buf, store.len() as u32);
    for (name, value) in store.iter() {
        push_str(&mut buf, name);
        push_array(&mut buf, value);
    }
    let sn = store.sn_states();
    push_u32(&mut buf, sn.len() as u32);
    for (name, state) in sn {
        push_str(&mut buf, name);
        push_u32(&mut buf, state.u.len() as u32);
        for &v in state.u.iter() {
            push_f64(&mut buf, v);
        }
        push_u32(&mut buf, state.v.len() as u32);
        for &v in state.v.iter() {
            push_f64(&mut buf, v);
        }
    }
    buf
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<ParamStore> {
    let mut cur = Cursor::new(bytes);
    let mut store = ParamStore::new();
    let count = cur.u32()? as usize;
    for _ in 0..count {
        let name = cur.string()?;
        let value = cur.array()?;
        store.insert(&name, value);
    }
    let sn_count = cur.u32()? as usize;
    for _ in 0..sn_count {
        let name = cur.string()?;
        let ulen = cur.u32()? as usize;
        let mut u = Array1::zeros(ulen);
        for i in 0..ulen {
            u[i] = cur.f64()?;
        }
        let vlen = cur.u32()? as usize;
        let mut v = Array1::zeros(vlen);
        for i in 0..vlen {
            v[i] = cur.f64()?;
        }
        store.set_sn_state(&name, SnState { u, v });
    }
    Ok(store)
}

fn map_to_bytes(buf: &mut Vec<u8>, map: &BTreeMap<String, ArrayD<f64>>) {
    push_u32(buf, map.len() as u32);
    for (name, value) in map {
        push_str(buf, name);
        push_array(buf, value);
    }
}

fn map_from_bytes(cur: &mut Cursor<'_>) -> Result<BTreeMap<String, ArrayD<f64>>> {
    let count = cur.u32()? as usize;
    let mut map = BTreeMap::new();
    for _ in 0..count {
        let name = cur.string()?;
        map.insert(name, cur.array()?);
    }
    Ok(map)
}

pub fn adam_to_bytes(opt: &Adam) -> Vec<u8> {
    let mut buf = Vec::new();
    push_f64(&mut buf, opt.lr);
    push_f64(&mut buf, opt.beta1);
    push_f64(&mut buf, opt.beta2);
    push_f64(&mut buf, opt.eps);
    push_u64(&mut buf, opt.t);
    map_to_bytes(&mut buf, &opt.m);
    map_to_bytes(&mut buf, &opt.v);
    buf
}

pub fn adam_from_bytes(bytes: &[u8]) -> Result<Adam> {
    let mut cur = Cursor::new(bytes);
    let lr = cur.f64()?;
    let beta1 = cur.f64()?;
    let beta2 = cur.f64()?;
    let eps = cur.f64()?;
    let t = cur.u64()?;
    let m = map_from_bytes(&mut cur)?;
    let v = map_from_bytes(&mut cur)?;
    Ok(Adam {
        lr,
        beta1,
        beta2,
        eps,
        t,
        m,
        v,
    })
}

pub fn sgd_to_bytes(opt: &SgdMomentum) -> Vec<u8> {
    let mut buf = Vec::new();
    push_f64(&mut buf, opt.lr);
    push_f64(&mut buf, opt.momentum);
    push_f64(&mut buf, opt.weight_decay);
    map_to_bytes(&mut buf, &opt.buf);
    buf
}

pub fn sgd_from_bytes(bytes: &[u8]) -> Result<SgdMomentum> {
    let mut cur = Cursor::new(bytes);
    let lr = cur.f64()?;
    let momentum = cur.f64()?;
    let weight_decay = cur.f64()?;
    let buf = map_from_bytes(&mut cur)?;
    Ok(SgdMomentum {
        lr,
        momentum,
        weight_decay,
        buf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn params_round_trip_bit_exact() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        store.insert("a.w", crate::init::he_normal(&[4, 3, 3, 3], 0.2, &mut rng));
        store.insert_spectral("b.w", crate::init::he_normal(&[2, 4, 1, 1], 0.2, &mut rng), &mut rng);
        let bytes = params_to_bytes(&store);
        let back = params_from_bytes(&bytes).unwrap();
        assert_eq!(store, back);
    }

    #[test]
    fn container_round_trip() {
        let dir = std::env::temp_dir().join(format!("tapegrad_ckpt_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.ckpt");
        let meta = CheckpointMeta {
            kind: "generator".into(),
            config_hash: "abc".into(),
            iteration: 42,
        };
        let sections = vec![("params", vec![1u8, 2, 3]), ("opt", vec![9u8])];
        write_checkpoint(&path, &meta, &sections).unwrap();
        let (meta2, secs) = read_checkpoint(&path).unwrap();
        assert_eq!(meta, meta2);
        assert_eq!(secs.get("params").unwrap(), &vec![1u8, 2, 3]);
        assert_eq!(secs.get("opt").unwrap(), &vec![9u8]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
