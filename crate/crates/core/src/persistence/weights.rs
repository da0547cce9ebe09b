use std::fs;
use std::path::Path;

use super::{atomic_write, ByteReader};
use crate::net::{Architecture, NetworkParams, NetworkSpec, ParamLayer, ParamShape};
use crate::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"NBVW";
pub const WEIGHTS_VERSION: u16 = 1;

const KIND_CONV: u8 = 1;
const KIND_DENSE: u8 = 2;
/// Dropout keep probability given to loaded networks; it only matters if
/// training resumes.
const LOADED_KEEP: f64 = 0.7;

pub fn encode_weights(params: &NetworkParams) -> Result<Vec<u8>> {
    let arch = params.arch();
    if arch == Architecture::Custom {
        return Err(Error::invalid("custom architectures cannot be stored"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.push(arch.id());
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for l in params.layers() {
        let (kind, dims) = match l.shape {
            ParamShape::Conv { out, input, k, s } => (KIND_CONV, [out, input, k, s]),
            ParamShape::Dense { out, input } => (KIND_DENSE, [out, input, 1, 1]),
        };
        out.push(kind);
        for d in dims {
            let d = u32::try_from(d).map_err(|_| Error::invalid("layer dimension exceeds u32"))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for w in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    Ok(out)
}

fn reals(r: &mut ByteReader<'_>, n: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = n.checked_mul(8).ok_or_else(|| Error::format(r.offset(), format!("{what} length overflows")))?;
    Ok(r.take(bytes, what)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Input edge the stored layers were built for. The NBV-Net stack fits a
/// range of edges; the default 32 is preferred, then the smallest fit.
fn infer_edge(arch: Architecture, shapes: &[ParamShape]) -> Option<usize> {
    let classes = shapes.last()?.bias_len();
    let fits = |edge: usize| {
        NetworkSpec::for_arch(arch, edge, classes, LOADED_KEEP)
            .and_then(|s| s.param_shapes())
            .is_ok_and(|p| p == shapes)
    };
    if fits(32) {
        return Some(32);
    }
    match (arch, shapes.first()?) {
        (Architecture::FcBaseline, ParamShape::Dense { input, .. }) => {
            let e = (*input as f64).cbrt().round() as usize;
            fits(e).then_some(e)
        }
        _ => (1..=1024).find(|&e| fits(e)),
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != WEIGHTS_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"NBVW\"")));
    }
    let version = r.u16("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::format(4, format!("unsupported weights version {version}")));
    }
    let arch_id = r.u8("architecture id")?;
    let arch = match Architecture::from_id(arch_id) {
        Some(a) if a != Architecture::Custom => a,
        _ => return Err(Error::format(6, format!("unknown architecture id {arch_id}"))),
    };
    let count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let at = r.offset();
        let kind = r.u8("layer kind")?;
        let d = [r.u32("shape")?, r.u32("shape")?, r.u32("shape")?, r.u32("shape")?].map(|v| v as usize);
        let shape = match kind {
            KIND_CONV => ParamShape::Conv { out: d[0], input: d[1], k: d[2], s: d[3] },
            KIND_DENSE if d[2] == 1 && d[3] == 1 => ParamShape::Dense { out: d[0], input: d[1] },
            _ => return Err(Error::format(at, format!("bad layer kind {kind} with shape {d:?}"))),
        };
        let weights = reals(&mut r, shape.weight_len(), "weights")?;
        let bias = reals(&mut r, shape.bias_len(), "biases")?;
        layers.push(ParamLayer { shape, weights, bias });
    }
    if r.remaining() != 0 {
        return Err(Error::format(r.offset(), format!("{} trailing bytes", r.remaining())));
    }
    let shapes: Vec<ParamShape> = layers.iter().map(|l| l.shape).collect();
    let edge = infer_edge(arch, &shapes)
        .ok_or_else(|| Error::format(11, format!("stored layer shapes do not form a {arch} network: {shapes:?}")))?;
    let classes = shapes.last().map_or(0, |s| s.bias_len());
    let spec = NetworkSpec::for_arch(arch, edge, classes, LOADED_KEEP)?;
    NetworkParams::from_layers(spec, layers)
}

pub fn write_weights(path: &Path, params: &NetworkParams) -> Result<()> {
    atomic_write(path, &encode_weights(params)?)
}

pub fn read_weights(path: &Path) -> Result<NetworkParams> {
    decode_weights(&fs::read(path)?)
}

/// Reads weights and insists on the requested architecture.
pub fn load_weights(path: &Path, expected: Architecture) -> Result<NetworkParams> {
    let bytes = fs::read(path)?;
    if bytes.len() >= 7 && &bytes[..4] == WEIGHTS_MAGIC {
        let found = Architecture::from_id(bytes[6]);
        if found != Some(expected) {
            return Err(Error::ArchitectureMismatch {
                expected: expected.to_string(),
                found: found.map_or_else(|| format!("id {}", bytes[6]), |a| a.to_string()),
            });
        }
    }
    decode_weights(&bytes)
}
