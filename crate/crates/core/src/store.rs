//! Binary feature-store format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "D2LV"            4 bytes
//! version   u32     = 1
//! count     u64
//! dim       u32
//! count x {
//!     image  u16 length + UTF-8
//!     patch  u16 length + UTF-8
//!     model  u16 length + UTF-8
//!     scale  u32
//!     vector dim x f32
//! }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{FeatureRecord, FeatureStore, ImageId};

pub const STORE_MAGIC: &[u8; 4] = b"D2LV";
pub const STORE_VERSION: u32 = 1;
/// Size of the fixed header in bytes.
pub const STORE_HEADER_LEN: usize = 4 + 4 + 8 + 4;

pub fn write_feature_store<W: Write>(store: &FeatureStore, mut sink: W) -> std::io::Result<()> {
    sink.write_all(STORE_MAGIC)?;
    sink.write_all(&STORE_VERSION.to_le_bytes())?;
    sink.write_all(&(store.len() as u64).to_le_bytes())?;
    sink.write_all(&(store.dim() as u32).to_le_bytes())?;
    for r in store.records() {
        write_str(&mut sink, r.image.as_str())?;
        write_str(&mut sink, &r.patch)?;
        write_str(&mut sink, &r.model)?;
        sink.write_all(&r.scale.to_le_bytes())?;
        for v in &r.vector {
            sink.write_all(&v.to_le_bytes())?;
        }
    }
    sink.flush()
}

fn write_str<W: Write>(sink: &mut W, s: &str) -> std::io::Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| {
        std::io::Error::new(ErrorKind::InvalidInput, format!("id longer than 65535 bytes: {s:.32}..."))
    })?;
    sink.write_all(&len.to_le_bytes())?;
    sink.write_all(s.as_bytes())
}

struct Reader<R> {
    inner: R,
    record: u64,
}

impl<R: Read> Reader<R> {
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => {
                Error::Truncation(format!("stream ended while reading {what} of record {}", self.record))
            }
            _ => Error::Format(format!("read failed: {e}")),
        })
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let mut b = [0; 2];
        self.fill(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let mut buf = vec![0; len];
        self.fill(&mut buf, what)?;
        String::from_utf8(buf)
            .map_err(|_| Error::Corruption(format!("{what} of record {} is not UTF-8", self.record)))
    }
}

pub fn read_feature_store<R: Read>(source: R) -> Result<FeatureStore> {
    let mut rd = Reader { inner: source, record: 0 };
    let mut magic = [0u8; 4];
    rd.inner.read_exact(&mut magic).map_err(|_| Error::Format("missing magic bytes".into()))?;
    if &magic != STORE_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"D2LV\"")));
    }
    let mut header = [0u8; 16];
    rd.inner
        .read_exact(&mut header)
        .map_err(|_| Error::Truncation("header shorter than 20 bytes".into()))?;
    let version = u32::from_le_bytes(header[0..4].try_into().unwrap());
    if version != STORE_VERSION {
        return Err(Error::Format(format!("unsupported store version {version}")));
    }
    let count = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;

    // The count is untrusted; cap the preallocation.
    let mut records = Vec::with_capacity(count.min(1 << 16) as usize);
    let mut payload = vec![0u8; dim * 4];
    for i in 0..count {
        rd.record = i;
        let image = rd.string("image id")?;
        let patch = rd.string("patch id")?;
        let model = rd.string("model id")?;
        let scale = rd.u32("scale")?;
        rd.fill(&mut payload, "vector")?;
        let vector: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Corruption(format!("record {i} holds a non-finite value")));
        }
        let image = ImageId::new(image).map_err(|e| Error::Corruption(format!("record {i}: {e}")))?;
        records.push(FeatureRecord {
            image,
            patch,
            model,
            scale,
            vector,
        });
    }
    FeatureStore::new(dim, records).map_err(|e| match e {
        Error::Invalid(msg) => Error::Corruption(msg),
        other => other,
    })
}

pub fn save_feature_store(store: &FeatureStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_feature_store(store, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_feature_store(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_store(BufReader::new(file))
}
