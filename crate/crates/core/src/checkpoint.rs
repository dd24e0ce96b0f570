//! Binary snapshots of model parameters and memory contents.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "OSGC" | version u32 | tensor count u32
//! per tensor: name_len u32 | name utf8 | rank u32 | dims u64 * rank | data f64 * prod(dims)
//! has_memory u8
//! memory: capacity u64 | seen u64 | oracle_calls u64 | count u64
//! per item: id u64 | label u32 | feature_len u64 | features f64 * len
//! ```

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::memory::{LabeledSample, MemoryBuffer, Sample};
use crate::models::Module;
use crate::numeric::Tensor;
use crate::trainers::Model;

const MAGIC: &[u8; 4] = b"OSGC";
const VERSION: u32 = 1;

fn named_params(model: &Model) -> Vec<(String, &Tensor)> {
    let mut out = Vec::new();
    for (names, params) in [
        (model.encoder.param_names(), model.encoder.params()),
        (model.projection.param_names(), model.projection.params()),
        (model.classifier.param_names(), model.classifier.params()),
    ] {
        out.extend(names.into_iter().zip(params));
    }
    out
}

pub fn encode(model: &Model, memory: Option<&MemoryBuffer>) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    let params = named_params(model);
    b.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params {
        b.extend_from_slice(&(name.len() as u32).to_le_bytes());
        b.extend_from_slice(name.as_bytes());
        b.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            b.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            b.extend_from_slice(&x.to_le_bytes());
        }
    }
    match memory {
        None => b.push(0),
        Some(m) => {
            b.push(1);
            for v in [m.capacity() as u64, m.seen(), m.oracle_calls(), m.len() as u64] {
                b.extend_from_slice(&v.to_le_bytes());
            }
            for it in m.items() {
                b.extend_from_slice(&it.sample.id.to_le_bytes());
                b.extend_from_slice(&(it.label as u32).to_le_bytes());
                b.extend_from_slice(&(it.sample.features.len() as u64).to_le_bytes());
                for &x in it.sample.features.iter() {
                    b.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
    }
    b
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Data {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated: need {n} more bytes")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.fail(format!("length {v} does not fit in memory")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| self.fail(format!("element count {n} overflows")))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Overwrite `model`'s parameters from `bytes`. Names and shapes must match
/// the model exactly; the returned memory is `Some` when one was saved.
pub fn decode_into(bytes: &[u8], path: &Path, model: &mut Model) -> Result<Option<MemoryBuffer>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4)? != MAGIC {
        r.pos = 0;
        return Err(r.fail("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.fail(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    let expected: Vec<(String, Vec<usize>)> = named_params(model)
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if count != expected.len() {
        return Err(r.fail(format!("checkpoint has {count} tensors, model has {}", expected.len())));
    }
    let mut loaded = Vec::with_capacity(count);
    for (want_name, want_shape) in &expected {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| r.fail("tensor name is not utf-8"))?;
        if name != want_name {
            return Err(r.fail(format!("expected tensor `{want_name}`, found `{name}`")));
        }
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.len()?);
        }
        if &shape != want_shape {
            return Err(r.fail(format!("tensor `{name}` has shape {shape:?}, model wants {want_shape:?}")));
        }
        let data = r.f64s(shape.iter().product())?;
        loaded.push(Tensor::new(shape, data)?);
    }
    let memory = match r.u8()? {
        0 => None,
        1 => {
            let capacity = r.len()?;
            let seen = r.u64()?;
            let calls = r.u64()?;
            let n = r.len()?;
            let mut items = Vec::with_capacity(n.min(capacity));
            for _ in 0..n {
                let id = r.u64()?;
                let label = r.u32()? as usize;
                let flen = r.len()?;
                let features: Arc<[f64]> = Arc::from(r.f64s(flen)?);
                items.push(LabeledSample {
                    sample: Sample { id, features },
                    label,
                });
            }
            Some(MemoryBuffer::from_parts(capacity, items, seen, calls)?)
        }
        flag => return Err(r.fail(format!("bad memory flag {flag}"))),
    };
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after checkpoint"));
    }

    let mut it = loaded.into_iter();
    for p in model
        .encoder
        .params_mut()
        .into_iter()
        .chain(model.projection.params_mut())
        .chain(model.classifier.params_mut())
    {
        *p = it.next().expect("count checked");
    }
    Ok(memory)
}

pub fn save(path: &Path, model: &Model, memory: Option<&MemoryBuffer>) -> Result<()> {
    std::fs::write(path, encode(model, memory)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_into(path: &Path, model: &mut Model) -> Result<Option<MemoryBuffer>> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_into(&bytes, path, model)
}
