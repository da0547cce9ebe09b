use std::fs;
use std::path::Path;

use super::{atomic_write, ByteReader};
use crate::oracle::Example;
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"NBVD";
pub const DATASET_VERSION: u16 = 1;
/// magic, version, edge, class count, example count.
pub const DATASET_HEADER_LEN: usize = 4 + 2 + 2 + 2 + 8;
/// object id, run id, iteration, label.
pub const RECORD_FIXED_LEN: usize = 4 + 4 + 2 + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub edge: usize,
    pub classes: usize,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(edge: usize, classes: usize, examples: Vec<Example>) -> Result<Dataset> {
        let d = Dataset { edge, classes, examples };
        d.validate()?;
        Ok(d)
    }

    pub fn record_len(&self) -> usize {
        RECORD_FIXED_LEN + 4 * self.edge.pow(3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edge == 0 || self.edge > u16::MAX as usize {
            return Err(Error::invalid(format!("grid edge {} out of range", self.edge)));
        }
        if self.classes == 0 || self.classes > 256 {
            return Err(Error::invalid(format!("class count {} out of range 1..=256", self.classes)));
        }
        for (i, e) in self.examples.iter().enumerate() {
            if e.edge != self.edge || e.grid.len() != self.edge.pow(3) {
                return Err(Error::invalid(format!("example {i} grid does not match edge {}", self.edge)));
            }
            if e.label as usize >= self.classes {
                return Err(Error::invalid(format!("example {i} label {} >= {}", e.label, self.classes)));
            }
            if let Some(p) = e.grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::invalid(format!("example {i} holds probability {p}")));
            }
        }
        Ok(())
    }
}

pub fn encode_dataset(d: &Dataset) -> Result<Vec<u8>> {
    d.validate()?;
    let mut out = Vec::with_capacity(DATASET_HEADER_LEN + d.examples.len() * d.record_len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(d.edge as u16).to_le_bytes());
    out.extend_from_slice(&(d.classes as u16).to_le_bytes());
    out.extend_from_slice(&(d.examples.len() as u64).to_le_bytes());
    for e in &d.examples {
        out.extend_from_slice(&e.object_id.to_le_bytes());
        out.extend_from_slice(&e.run_id.to_le_bytes());
        out.extend_from_slice(&e.iteration.to_le_bytes());
        out.push(e.label);
        for p in &e.grid {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    Ok(out)
}

struct Header {
    edge: usize,
    classes: usize,
    count: u64,
}

fn decode_header(r: &mut ByteReader<'_>) -> Result<Header> {
    let magic = r.take(4, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"NBVD\"")));
    }
    let version = r.u16("version")?;
    if version != DATASET_VERSION {
        return Err(Error::format(4, format!("unsupported dataset version {version}")));
    }
    let edge = r.u16("grid edge")? as usize;
    if edge == 0 {
        return Err(Error::format(6, "grid edge is 0"));
    }
    let classes = r.u16("class count")? as usize;
    if classes == 0 || classes > 256 {
        return Err(Error::format(8, format!("class count {classes} out of range 1..=256")));
    }
    let count = r.u64("example count")?;
    let record = (RECORD_FIXED_LEN + 4 * edge.pow(3)) as u64;
    let body = r.remaining() as u64;
    if count.checked_mul(record) != Some(body) {
        let offset = DATASET_HEADER_LEN as u64 + body.min(count.saturating_mul(record));
        return Err(Error::format(
            offset,
            format!("header declares {count} records of {record} bytes, body holds {body} bytes"),
        ));
    }
    Ok(Header { edge, classes, count })
}

/// Parses a whole dataset; nothing is returned unless every record is valid.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    let h = decode_header(&mut r)?;
    let cells = h.edge.pow(3);
    let mut examples = Vec::with_capacity(h.count as usize);
    for _ in 0..h.count {
        let object_id = r.u32("object id")?;
        let run_id = r.u32("run id")?;
        let iteration = r.u16("iteration")?;
        let label_at = r.offset();
        let label = r.u8("label")?;
        if label as usize >= h.classes {
            return Err(Error::format(label_at, format!("label {label} >= class count {}", h.classes)));
        }
        let grid_at = r.offset();
        let raw = r.take(4 * cells, "grid")?;
        let grid: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        if let Some(i) = grid.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::format(grid_at + 4 * i as u64, format!("probability {} outside [0,1]", grid[i])));
        }
        examples.push(Example { object_id, run_id, iteration, label, edge: h.edge, grid });
    }
    Ok(Dataset { edge: h.edge, classes: h.classes, examples })
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    atomic_write(path, &encode_dataset(d)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}

/// Concatenates dataset files that share edge and class count. Records are
/// copied verbatim; only the header count changes. Returns the total count.
pub fn merge_datasets(inputs: &[&Path], out: &Path) -> Result<u64> {
    let Some(first) = inputs.first() else {
        return Err(Error::invalid("merge needs at least one input"));
    };
    let mut merged = fs::read(first)?;
    let mut r = ByteReader::new(&merged);
    let base = decode_header(&mut r)?;
    decode_dataset(&merged)?;
    let mut total = base.count;
    for path in &inputs[1..] {
        let bytes = fs::read(path)?;
        let mut r = ByteReader::new(&bytes);
        let h = decode_header(&mut r)?;
        if (h.edge, h.classes) != (base.edge, base.classes) {
            return Err(Error::invalid(format!(
                "{} has edge {} and {} classes, expected {} and {}",
                path.display(),
                h.edge,
                h.classes,
                base.edge,
                base.classes
            )));
        }
        decode_dataset(&bytes)?;
        merged.extend_from_slice(&bytes[DATASET_HEADER_LEN..]);
        total += h.count;
    }
    merged[10..18].copy_from_slice(&total.to_le_bytes());
    atomic_write(out, &merged)?;
    Ok(total)
}
