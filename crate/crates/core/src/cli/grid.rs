//! GRIDF64 rasters: one ASCII header line `GRIDF64 <nx> <ny> <dx> <dy>\n`
//! followed by `nx·ny` little-endian `f64` values in row-major order.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::mesh::Grid;

pub const MAGIC: &str = "GRIDF64";
/// Headers longer than this are rejected before searching for the newline.
const MAX_HEADER: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl GridHeader {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.nx, self.ny, self.dx, self.dy)
    }

    pub fn from_grid(g: &Grid<f64>) -> Self {
        Self { nx: g.nx, ny: g.ny, dx: g.dx, dy: g.dy }
    }

    fn line(&self) -> String {
        format!("{MAGIC} {} {} {} {}\n", self.nx, self.ny, self.dx, self.dy)
    }
}

pub fn encode(header: &GridHeader, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != header.len() {
        return Err(invalid(format!(
            "raster header declares {} values but {} were given",
            header.len(),
            values.len()
        )));
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("raster value {k} is not finite")));
    }
    header.to_grid()?;
    let line = header.line();
    let mut out = Vec::with_capacity(line.len() + 8 * values.len());
    out.extend_from_slice(line.as_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(GridHeader, Vec<f64>)> {
    let search = &bytes[..bytes.len().min(MAX_HEADER)];
    let end = search.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Parse {
        offset: search.len(),
        message: "missing header line terminator".into(),
    })?;
    let line = std::str::from_utf8(&bytes[..end]).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "header is not valid text".into(),
    })?;
    let mut tokens = Vec::new();
    let mut start = 0;
    for tok in line.split(' ') {
        tokens.push((start, tok));
        start += tok.len() + 1;
    }
    let (_, magic) = tokens[0];
    if magic != MAGIC {
        return Err(Error::Parse { offset: 0, message: format!("unknown magic '{magic}', expected '{MAGIC}'") });
    }
    if tokens.len() != 5 {
        return Err(Error::Parse {
            offset: end,
            message: format!("header has {} fields, expected 5", tokens.len()),
        });
    }
    fn num<V: std::str::FromStr>((offset, tok): (usize, &str), what: &str) -> Result<V> {
        tok.parse().map_err(|_| Error::Parse { offset, message: format!("{what} '{tok}' is not a number") })
    }
    let header = GridHeader {
        nx: num(tokens[1], "nx")?,
        ny: num(tokens[2], "ny")?,
        dx: num(tokens[3], "dx")?,
        dy: num(tokens[4], "dy")?,
    };
    header.to_grid().map_err(|e| Error::Parse { offset: tokens[1].0, message: e.to_string() })?;
    let payload = &bytes[end + 1..];
    let expected = 8 * header.len();
    if payload.len() != expected {
        return Err(Error::Truncated { expected, found: payload.len() });
    }
    let mut values = Vec::with_capacity(header.len());
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Parse { offset: end + 1 + 8 * k, message: format!("value {k} is not finite") });
        }
        values.push(v);
    }
    Ok((header, values))
}

pub fn write_grid(path: impl AsRef<Path>, header: &GridHeader, values: &[f64]) -> Result<()> {
    std::fs::write(path, encode(header, values)?)?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<(GridHeader, Vec<f64>)> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(nx: usize, ny: usize, dx: f64, dy: f64) -> GridHeader {
        GridHeader { nx, ny, dx, dy }
    }

    #[test]
    fn roundtrip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.grd");
        write_grid(&p, &h(2, 2, 1.0, 1.0), &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes.len(), "GRIDF64 2 2 1 1\n".len() + 32);
        assert!(bytes.starts_with(b"GRIDF64 2 2 1 1\n"));
        let (hd, v) = read_grid(&p).unwrap();
        assert_eq!(hd, h(2, 2, 1.0, 1.0));
        assert_eq!(v, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(encode(&hd, &v).unwrap(), bytes);
    }

    #[test]
    fn accepts_fractional_spacing() {
        let mut b = b"GRIDF64 3 2 0.5 0.5\n".to_vec();
        b.extend([0u8; 48]);
        let (hd, v) = decode(&b).unwrap();
        assert_eq!((hd.nx, hd.ny, hd.dx), (3, 2, 0.5));
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn header_errors_carry_offsets() {
        match decode(b"GRIDF32 2 2 1 1\n") {
            Err(Error::Parse { offset: 0, message }) => assert!(message.contains("GRIDF32")),
            other => panic!("{other:?}"),
        }
        match decode(b"GRIDF64 2 x 1 1\n") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode(b"GRIDF64 2 2 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(decode(b"GRIDF64 2 2 1 1"), Err(Error::Parse { .. })));
        assert!(matches!(decode(b"GRIDF64 2 2 0 1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn payload_size_must_match() {
        let mut b = b"GRIDF64 2 2 1 1\n".to_vec();
        b.extend([0u8; 31]);
        assert!(matches!(decode(&b), Err(Error::Truncated { expected: 32, found: 31 })));
        b.extend([0u8; 2]);
        assert!(matches!(decode(&b), Err(Error::Truncated { expected: 32, found: 33 })));
    }

    #[test]
    fn rejects_non_finite_values() {
        assert!(encode(&h(1, 1, 1.0, 1.0), &[f64::NAN]).is_err());
        let mut b = b"GRIDF64 1 1 1 1\n".to_vec();
        b.extend(f64::INFINITY.to_le_bytes());
        assert!(decode(&b).is_err());
    }
}
