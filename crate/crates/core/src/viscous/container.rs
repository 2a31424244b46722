//! Binary container for grid fields: an 8-byte magic, a little-endian `u64`
//! header length, a JSON header, then each time slice as little-endian `f64`s.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectrumDescriptor;

use super::grid::{GridField, GridSpec};

const MAGIC: &[u8; 8] = b"HJBGRID1";

#[derive(Serialize, Deserialize)]
struct Header {
    spec: GridSpec,
    spectrum: SpectrumDescriptor,
    lambdas: Vec<f64>,
    times: Vec<f64>,
    slice_len: usize,
    /// Byte offset of each slice from the start of the data section.
    offsets: Vec<u64>,
}

pub fn write_grid(field: &GridField, mut w: impl Write) -> Result<()> {
    let slice_len = field.slice_len();
    let header = Header {
        spec: field.spec.clone(),
        spectrum: field.spectrum.clone(),
        lambdas: field.lambdas.clone(),
        times: field.times.clone(),
        slice_len,
        offsets: (0..field.slices.len()).map(|k| (k * slice_len * 8) as u64).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(slice_len * 8);
    for s in &field.slices {
        buf.clear();
        s.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid(mut r: impl Read) -> Result<GridField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a grid container (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let h: Header = serde_json::from_slice(&json).map_err(|e| Error::Format(e.to_string()))?;
    h.spec.validate()?;
    if h.slice_len != h.spec.nodes.iter().product::<usize>() || h.offsets.len() != h.times.len() {
        return Err(Error::Format("header sizes are inconsistent".into()));
    }
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let bytes = h.slice_len * 8;
    let slices = h
        .offsets
        .iter()
        .map(|&off| {
            let off = off as usize;
            let chunk = data
                .get(off..off + bytes)
                .ok_or_else(|| Error::Format("slice data truncated".into()))?;
            Ok(chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(GridField {
        spec: h.spec,
        spectrum: h.spectrum,
        lambdas: h.lambdas,
        times: h.times,
        slices,
    })
}
