//! `FRN1` model files.
//!
//! Layout (little-endian): magic `FRN1`, u32 `N`, `S`, `l`, `H`; then per fern
//! `S x 4` signed bytes `(dyA, dxA, dyB, dxB)` followed by `2^S x H` f32 log
//! table entries, row-major by outcome; finally a CRC32 of every preceding
//! byte. Tables are held as f64 in memory and narrowed to f32 on write, so
//! a loaded model re-saves to identical bytes.

use std::path::Path;

use super::model::{BinaryTest, Fern, FernsModel, MAX_TESTS_PER_FERN, NUM_CLASSES};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"FRN1";

pub fn model_to_bytes(model: &FernsModel) -> Vec<u8> {
    let s = model.tests_per_fern();
    let per_fern = 4 * s + 4 * (1 << s) * NUM_CLASSES;
    let mut out = Vec::with_capacity(4 + 16 + model.num_ferns() * per_fern + 4);
    out.extend_from_slice(MODEL_MAGIC);
    for v in [model.num_ferns(), s, model.window_radius(), NUM_CLASSES] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for fern in model.ferns() {
        for t in fern.tests() {
            out.extend_from_slice(&[t.a.0 as u8, t.a.1 as u8, t.b.0 as u8, t.b.1 as u8]);
        }
        for v in fern.table() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated model at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<FernsModel> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        let found = &bytes[..bytes.len().min(4)];
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(found),
            std::str::from_utf8(MODEL_MAGIC).unwrap()
        )));
    }
    if bytes.len() < 4 + 16 + 4 {
        return Err(Error::Format("truncated model header".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader { buf: body, pos: 4 };
    let n = r.u32()? as usize;
    let s = r.u32()? as usize;
    let l = r.u32()? as usize;
    let h = r.u32()? as usize;
    if h != NUM_CLASSES {
        return Err(Error::Format(format!("expected {NUM_CLASSES} classes, header says {h}")));
    }
    if n == 0 || !(1..=MAX_TESTS_PER_FERN).contains(&s) || !(1..=i8::MAX as usize).contains(&l) {
        return Err(Error::Format(format!("invalid header N={n} S={s} l={l}")));
    }
    let per_fern = 4 * s + 4 * (1 << s) * h;
    let expected = n
        .checked_mul(per_fern)
        .and_then(|v| v.checked_add(20))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "size mismatch: header N={n} S={s} implies {} bytes, file has {}",
            expected + 4,
            bytes.len()
        )));
    }
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Format(format!(
            "CRC mismatch: stored {stored:08x}, computed {actual:08x}"
        )));
    }

    let li = l as i8;
    let mut ferns = Vec::with_capacity(n);
    for k in 0..n {
        let raw = r.take(4 * s)?;
        let tests = raw
            .chunks_exact(4)
            .map(|c| {
                let t = BinaryTest {
                    a: (c[0] as i8, c[1] as i8),
                    b: (c[2] as i8, c[3] as i8),
                };
                let ok = [t.a.0, t.a.1, t.b.0, t.b.1].iter().all(|v| (-li..=li).contains(v));
                if ok {
                    Ok(t)
                } else {
                    Err(Error::Format(format!("fern {k}: test offset outside window radius {l}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let table = r
            .take(4 * (1 << s) * h)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect::<Vec<_>>();
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("fern {k}: non-finite table entry")));
        }
        ferns.push(Fern::from_parts(tests, table));
    }
    Ok(FernsModel::from_parts(ferns, l, s))
}

pub fn save_model(model: &FernsModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FernsModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
