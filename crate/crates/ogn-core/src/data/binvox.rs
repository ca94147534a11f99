//! Run-length-encoded voxel files (`#binvox 1`).
//!
//! The data section stores (value, count) byte pairs with counts 1..=255, in
//! the format's y-fastest order: flat index `x*d2*d3 + z*d3 + y`. That axis
//! order is the classic integration mistake, so the parser and writer pin it
//! down in tests. The writer emits canonical RLE (maximal runs, split only at
//! 255), so write(read(bytes)) == bytes for canonical input.

use crate::error::{Error, Result};
use crate::octree::VoxelGrid;

/// Header metadata carried through parse/write roundtrips.
#[derive(Debug, Clone, PartialEq)]
pub struct BinvoxMeta {
    pub translate: [f64; 3],
    pub scale: f64,
}

impl Default for BinvoxMeta {
    fn default() -> Self {
        BinvoxMeta {
            translate: [0.0; 3],
            scale: 1.0,
        }
    }
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos] != b'\n' {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(Error::parse_at("unterminated header line", start));
    }
    let line = std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::parse_at("non-utf8 header line", start))?;
    *pos += 1;
    Ok(line.trim_end_matches('\r'))
}

/// Parse a binvox file into a grid plus header metadata.
pub fn read_binvox(bytes: &[u8]) -> Result<(VoxelGrid, BinvoxMeta)> {
    let mut pos = 0;
    let magic = read_line(bytes, &mut pos)?;
    if magic != "#binvox 1" {
        return Err(Error::parse_at(
            format!("bad magic {magic:?}, expected \"#binvox 1\""),
            0,
        ));
    }
    let mut dim: Option<[u32; 3]> = None;
    let mut meta = BinvoxMeta::default();
    loop {
        let line_start = pos;
        let line = read_line(bytes, &mut pos)?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("dim") => {
                let mut d = [0u32; 3];
                for slot in &mut d {
                    *slot = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| Error::parse_at("malformed dim line", line_start))?;
                }
                dim = Some(d);
            }
            Some("translate") => {
                for slot in &mut meta.translate {
                    *slot = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| Error::parse_at("malformed translate line", line_start))?;
                }
            }
            Some("scale") => {
                meta.scale = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| Error::parse_at("malformed scale line", line_start))?;
            }
            Some("data") => break,
            Some(other) => {
                return Err(Error::parse_at(
                    format!("unexpected header keyword {other:?}"),
                    line_start,
                ))
            }
            None => {}
        }
    }
    let dim = dim.ok_or_else(|| Error::parse_at("missing dim line", pos))?;
    if dim.iter().any(|&d| d == 0) {
        return Err(Error::parse_at("zero dimension", pos));
    }

    let total = dim.iter().map(|&d| d as usize).product::<usize>();
    let mut grid = VoxelGrid::new(dim);
    let (d2, d3) = (dim[1] as usize, dim[2] as usize);
    let mut written = 0usize;
    while written < total {
        if pos + 2 > bytes.len() {
            return Err(Error::parse_at(
                format!("truncated RLE data: {written} of {total} voxels"),
                pos,
            ));
        }
        let value = bytes[pos];
        let count = bytes[pos + 1] as usize;
        if value > 1 {
            return Err(Error::parse_at(format!("RLE value byte {value}"), pos));
        }
        if count == 0 {
            return Err(Error::parse_at("RLE count of zero", pos + 1));
        }
        if written + count > total {
            return Err(Error::parse_at(
                format!("RLE overruns the grid: {} > {total}", written + count),
                pos,
            ));
        }
        if value == 1 {
            for i in written..written + count {
                // binvox order: y fastest, then z, then x.
                let x = i / (d2 * d3);
                let rem = i % (d2 * d3);
                let z = rem / d2;
                let y = rem % d2;
                grid.set(x as u32, y as u32, z as u32, true);
            }
        }
        written += count;
        pos += 2;
    }
    if pos != bytes.len() {
        return Err(Error::parse_at("trailing bytes after voxel data", pos));
    }
    Ok((grid, meta))
}

/// Serialize a grid as canonical binvox bytes.
pub fn write_binvox(grid: &VoxelGrid, meta: &BinvoxMeta) -> Vec<u8> {
    let dim = grid.resolution();
    let mut out = Vec::new();
    out.extend_from_slice(b"#binvox 1\n");
    out.extend_from_slice(format!("dim {} {} {}\n", dim[0], dim[1], dim[2]).as_bytes());
    out.extend_from_slice(
        format!(
            "translate {} {} {}\n",
            meta.translate[0], meta.translate[1], meta.translate[2]
        )
        .as_bytes(),
    );
    out.extend_from_slice(format!("scale {}\n", meta.scale).as_bytes());
    out.extend_from_slice(b"data\n");

    let (d2, d3) = (dim[1] as usize, dim[2] as usize);
    let total = grid.len();
    let value_at = |i: usize| -> u8 {
        let x = i / (d2 * d3);
        let rem = i % (d2 * d3);
        let z = rem / d2;
        let y = rem % d2;
        grid.get(x as u32, y as u32, z as u32) as u8
    };
    let mut i = 0;
    while i < total {
        let value = value_at(i);
        let mut run = 1usize;
        while run < 255 && i + run < total && value_at(i + run) == value {
            run += 1;
        }
        out.push(value);
        out.push(run as u8);
        i += run;
    }
    out
}
