//! Weight persistence and firmware export.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes   "NCAWGT01"
//! dims     for each of the six tensors: u32 rank, then rank × u32 extents
//! payload  10101 × f32, tensors in storage order
//! footer   f32 quantizer lo, f32 quantizer hi
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{ModelParams, PARAM_COUNT, TENSOR_NAMES, TENSOR_SHAPES};
use crate::quant::Quantizer;

pub const MAGIC: &[u8; 8] = b"NCAWGT01";

/// Flash of the ATmega2560 the tiles run on.
pub const TARGET_FLASH_BYTES: usize = 256 * 1024;

/// Bytes taken by the weights stored as single-precision floats.
pub const WEIGHT_BYTES: usize = PARAM_COUNT * 4;

fn header_words() -> usize {
    TENSOR_SHAPES.iter().map(|s| 1 + s.len()).sum()
}

/// Exact size of a weight file.
pub fn file_len() -> usize {
    MAGIC.len() + 4 * header_words() + WEIGHT_BYTES + 8
}

pub fn encode_weights(params: &ModelParams, quantizer: &Quantizer) -> Vec<u8> {
    let mut out = Vec::with_capacity(file_len());
    out.extend_from_slice(MAGIC);
    for shape in TENSOR_SHAPES {
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for w in params.iter() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&quantizer.lo().to_le_bytes());
    out.extend_from_slice(&quantizer.hi().to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("weight file truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32> {
        self.take::<4>().map(f32::from_le_bytes)
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<(ModelParams, Quantizer)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take::<8>()?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            std::str::from_utf8(MAGIC).unwrap()
        )));
    }
    for (name, shape) in TENSOR_NAMES.iter().zip(TENSOR_SHAPES) {
        let rank = r.u32()? as usize;
        if rank != shape.len() {
            return Err(Error::Format(format!(
                "{name}: rank {rank}, expected {}",
                shape.len()
            )));
        }
        for &want in shape {
            let got = r.u32()? as usize;
            if got != want {
                return Err(Error::Format(format!("{name}: dims mismatch, expected {shape:?}")));
            }
        }
    }
    let mut flat = Vec::with_capacity(PARAM_COUNT);
    for _ in 0..PARAM_COUNT {
        flat.push(r.f32()?);
    }
    let lo = r.f32()?;
    let hi = r.f32()?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after footer",
            bytes.len() - r.pos
        )));
    }
    let params = ModelParams::from_flat(&flat).expect("payload length checked");
    if !params.corners_are_zero() {
        return Err(Error::Validity("diagonal kernel taps are not zero".into()));
    }
    if !params.is_finite() {
        return Err(Error::Validity("weights contain non-finite values".into()));
    }
    let quantizer = Quantizer::new(lo, hi)?;
    Ok((params, quantizer))
}

pub fn save_weights(params: &ModelParams, quantizer: &Quantizer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !params.corners_are_zero() {
        return Err(Error::Validity("refusing to save nonzero diagonal taps".into()));
    }
    std::fs::write(path, encode_weights(params, quantizer)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(ModelParams, Quantizer)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

/// Plain-text constant arrays for pasting into tile firmware.
pub fn export_firmware_array(params: &ModelParams, quantizer: &Quantizer) -> String {
    let mut out = String::new();
    let pct = 100.0 * WEIGHT_BYTES as f64 / TARGET_FLASH_BYTES as f64;
    writeln!(out, "// Tile NCA weights").unwrap();
    writeln!(out, "// parameters: {PARAM_COUNT}").unwrap();
    writeln!(
        out,
        "// flash budget: {PARAM_COUNT} x 4 = {WEIGHT_BYTES} bytes ({pct:.1}% of {TARGET_FLASH_BYTES} bytes)"
    )
    .unwrap();
    writeln!(out, "// message quantizer: byte 0 = {:?}, byte 255 = {:?}", quantizer.lo(), quantizer.hi()).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "const float QUANT_LO = {:?};", quantizer.lo()).unwrap();
    writeln!(out, "const float QUANT_HI = {:?};", quantizer.hi()).unwrap();
    for ((name, shape), values) in TENSOR_NAMES.iter().zip(TENSOR_SHAPES).zip(params.tensors()) {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        writeln!(out).unwrap();
        writeln!(out, "// {name} [{}]: {} values", dims.join("]["), values.len()).unwrap();
        writeln!(out, "const float {name}[{}] PROGMEM = {{", values.len()).unwrap();
        let row_len = *shape.last().unwrap();
        for row in values.chunks(row_len) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "  {},", cells.join(", ")).unwrap();
        }
        writeln!(out, "}};").unwrap();
    }
    out
}
