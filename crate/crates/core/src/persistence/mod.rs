//! Binary dataset and weight files, text clouds, meshes, view sets and
//! manifests. All multi-byte integers and reals are little-endian.

mod dataset;
mod text;
mod weights;

use std::io::Write;
use std::path::Path;

pub use dataset::{
    decode_dataset, encode_dataset, merge_datasets, read_dataset, write_dataset, Dataset, DATASET_HEADER_LEN,
    DATASET_MAGIC, DATASET_VERSION, RECORD_FIXED_LEN,
};
pub use text::{read_ply, read_views, read_xyz, write_ply, write_views, write_xyz, Manifest};
pub use weights::{
    decode_weights, encode_weights, load_weights, read_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION,
};

use crate::{Error, Result};

/// Writes through a sibling temporary file and renames it into place, so
/// readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Cursor over a byte buffer that reports the offset of any shortfall.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> ByteReader<'a> {
        ByteReader { buf, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}
