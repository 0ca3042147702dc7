//! Field serialization.
//!
//! Binary layout (all little-endian):
//!
//! | offset | type       | content                                   |
//! |--------|------------|-------------------------------------------|
//! | 0      | `u64`      | dimension `d`                             |
//! | 8      | `u64`      | side `L`                                  |
//! | 16     | `u64`      | components per node (1, `d` or `d²`)      |
//! | 24     | `f64` × n  | values, node-major in row-major node order |
//!
//! CSV has a header `node,x0,..,x{d-1},c0,..,c{m-1}` and one row per node.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{EdgeField, MatrixField, NodeField, TorusGrid};

/// Raw decoded field: grid, components per node, values.
#[derive(Clone, Debug, PartialEq)]
pub struct RawField {
    pub grid: TorusGrid,
    pub components: usize,
    pub values: Vec<f64>,
}

pub fn write_binary<W: Write>(
    mut w: W,
    grid: &TorusGrid,
    components: usize,
    values: &[f64],
) -> Result<()> {
    w.write_all(&(grid.dim() as u64).to_le_bytes())?;
    w.write_all(&(grid.side() as u64).to_le_bytes())?;
    w.write_all(&(components as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<RawField> {
    let mut word = [0u8; 8];
    let mut header = [0u64; 3];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let grid = TorusGrid::new(header[0] as usize, header[1] as usize)?;
    let components = header[2] as usize;
    let n = grid.node_count() * components;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::InvalidInput(format!("{} trailing bytes", rest.len())));
    }
    Ok(RawField { grid, components, values })
}

pub fn write_csv<W: Write>(mut w: W, grid: &TorusGrid, components: usize, values: &[f64]) -> Result<()> {
    let mut header = vec!["node".to_string()];
    header.extend((0..grid.dim()).map(|k| format!("x{k}")));
    header.extend((0..components).map(|c| format!("c{c}")));
    writeln!(w, "{}", header.join(","))?;
    for n in 0..grid.node_count() {
        let mut row = vec![n.to_string()];
        row.extend(grid.coords(n).iter().map(|c| c.to_string()));
        row.extend(values[n * components..(n + 1) * components].iter().map(|v| format!("{v:e}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

impl NodeField<f64> {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, self.grid(), 1, self.values())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let raw = read_binary(r)?;
        expect_components(&raw, 1)?;
        NodeField::from_values(raw.grid, raw.values)
    }
}

impl EdgeField<f64> {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, self.grid(), self.components(), self.values())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let raw = read_binary(r)?;
        expect_components(&raw, raw.grid.dim())?;
        EdgeField::from_values(raw.grid, raw.values)
    }
}

impl MatrixField<f64> {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, self.grid(), self.components(), self.values())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let raw = read_binary(r)?;
        expect_components(&raw, raw.grid.dim() * raw.grid.dim())?;
        MatrixField::from_values(raw.grid, raw.values)
    }
}

fn expect_components(raw: &RawField, expected: usize) -> Result<()> {
    if raw.components != expected {
        return Err(Error::InvalidInput(format!(
            "expected {expected} components per node, file has {}",
            raw.components
        )));
    }
    Ok(())
}
