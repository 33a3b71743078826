//! Binary array files.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `WAVEINV\0`                         |
//! | 4     | u32 format version                        |
//! | 4     | u32 role code (see [`Role`])              |
//! | 4     | u32 number of axes k                      |
//! | 16·k  | per axis: f64 extent, u64 size            |
//! | 8·N   | f64 samples, row-major, first axis outer  |
//!
//! Space-time arrays use axes (t, y, x) or (t, x); boundary signals (t, lateral node);
//! sinograms (angle, offset). For the lateral axis the extent is the boundary length.

use std::io::{self, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"WAVEINV\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Role {
    SpaceTime = 1,
    Boundary = 2,
    Spatial = 3,
    Sinogram = 4,
}

impl Role {
    fn from_code(c: u32) -> Option<Role> {
        match c {
            1 => Some(Role::SpaceTime),
            2 => Some(Role::Boundary),
            3 => Some(Role::Spatial),
            4 => Some(Role::Sinogram),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub role: Role,
    /// (extent, size) per axis.
    pub axes: Vec<(f64, u64)>,
    pub data: Vec<f64>,
}

pub fn encode(a: &Array) -> io::Result<Vec<u8>> {
    let n: u64 = a.axes.iter().map(|(_, s)| *s).product();
    if n as usize != a.data.len() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "axis sizes do not match the data length"));
    }
    let mut out = Vec::with_capacity(20 + 16 * a.axes.len() + 8 * a.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(a.role as u32).to_le_bytes());
    out.extend_from_slice(&(a.axes.len() as u32).to_le_bytes());
    for (e, s) in &a.axes {
        out.extend_from_slice(&e.to_le_bytes());
        out.extend_from_slice(&s.to_le_bytes());
    }
    for v in &a.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

pub fn decode(mut r: impl Read) -> io::Result<Array> {
    let mut b8 = [0u8; 8];
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b8)?;
    if &b8 != MAGIC {
        return Err(bad("not a waveinv array (bad magic)"));
    }
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    r.read_exact(&mut b4)?;
    let role = Role::from_code(u32::from_le_bytes(b4)).ok_or_else(|| bad("unknown role code"))?;
    r.read_exact(&mut b4)?;
    let k = u32::from_le_bytes(b4) as usize;
    if k > 8 {
        return Err(bad("too many axes"));
    }
    let mut axes = Vec::with_capacity(k);
    for _ in 0..k {
        r.read_exact(&mut b8)?;
        let e = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        axes.push((e, u64::from_le_bytes(b8)));
    }
    let n: u64 = axes.iter().map(|(_, s)| *s).product();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() as u64 != 8 * n {
        return Err(bad(&format!("expected {} data bytes, found {}", 8 * n, bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok(Array { role, axes, data })
}

pub fn write(path: &Path, a: &Array) -> io::Result<()> {
    std::fs::File::create(path)?.write_all(&encode(a)?)
}

pub fn read(path: &Path) -> io::Result<Array> {
    decode(io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let a = Array { role: Role::SpaceTime, axes: vec![(3.5, 2), (1.0, 3)], data: vec![1.0, -2.0, 0.5, 0.0, 1e-300, 7.0] };
        let bytes = encode(&a).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), VERSION);
        assert_eq!(bytes.len(), 20 + 32 + 48);
        assert_eq!(decode(&bytes[..]).unwrap(), a);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad[..]).is_err());
    }
}
