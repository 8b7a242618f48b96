//! Plain-text field files ("wff v1").
//!
//! One ASCII header line
//!
//!   wff1 <d> <N_or_1> <M> <L> <real|complex>
//!
//! followed by whitespace-separated decimal values in row-major order,
//! complex values as interleaved re im pairs. The N slot holds 1 for
//! single-particle fields and the particle count for configuration-space
//! fields. Writers emit 17 significant digits, so values round-trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ConfigField, FieldKind, ScalarField};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WffHeader {
    pub d: usize,
    pub n_slot: usize,
    pub m: usize,
    pub l: f64,
    pub complex: bool,
}

impl WffHeader {
    pub fn is_scalar(&self) -> bool {
        self.n_slot == 1
    }
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_scalar(path: &Path, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "wff1 {} 1 {} {} real",
        g.d(),
        g.points_per_axis(),
        format_value(g.half_width())
    )?;
    for v in field.values() {
        writeln!(out, "{}", format_value(*v))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_config(path: &Path, field: &ConfigField) -> Result<()> {
    let g = field.grid();
    let mut out = BufWriter::new(File::create(path)?);
    let kind = match field.kind() {
        FieldKind::Real => "real",
        FieldKind::Complex => "complex",
    };
    writeln!(
        out,
        "wff1 {} {} {} {} {kind}",
        g.d(),
        g.n_particles(),
        g.points_per_axis(),
        format_value(g.half_width())
    )?;
    match field.kind() {
        FieldKind::Real => {
            for v in field.real_values()? {
                writeln!(out, "{}", format_value(*v))?;
            }
        }
        FieldKind::Complex => {
            for z in field.complex_values()? {
                writeln!(out, "{} {}", format_value(z.re), format_value(z.im))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<WffHeader> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "wff1" {
        return Err(Error::FieldFile(format!("bad header line: {line:?}")));
    }
    let d: usize = parts[1]
        .parse()
        .map_err(|_| Error::FieldFile(format!("bad dimension {:?}", parts[1])))?;
    let n_slot: usize = parts[2]
        .parse()
        .map_err(|_| Error::FieldFile(format!("bad particle count {:?}", parts[2])))?;
    let m: usize = parts[3]
        .parse()
        .map_err(|_| Error::FieldFile(format!("bad point count {:?}", parts[3])))?;
    let l: f64 = parts[4]
        .parse()
        .map_err(|_| Error::FieldFile(format!("bad half-width {:?}", parts[4])))?;
    let complex = match parts[5] {
        "real" => false,
        "complex" => true,
        other => return Err(Error::FieldFile(format!("bad kind {other:?}"))),
    };
    Ok(WffHeader {
        d,
        n_slot,
        m,
        l,
        complex,
    })
}

fn read_parts(path: &Path) -> Result<(WffHeader, Vec<f64>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::FieldFile("empty file".into()))??;
    let header = parse_header(&header_line)?;
    let mut numbers = Vec::new();
    for line in lines {
        for token in line?.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::FieldFile(format!("bad value {token:?}")))?;
            numbers.push(v);
        }
    }
    Ok((header, numbers))
}

pub fn read_header(path: &Path) -> Result<WffHeader> {
    let reader = BufReader::new(File::open(path)?);
    let line = reader
        .lines()
        .next()
        .ok_or_else(|| Error::FieldFile("empty file".into()))??;
    parse_header(&line)
}

/// Read a single-particle field; the grid supplies the particle count that
/// scalar headers do not carry, and must match the header's d, M, L.
pub fn read_scalar(path: &Path, grid: &GridSpec) -> Result<ScalarField> {
    let (header, numbers) = read_parts(path)?;
    if !header.is_scalar() {
        return Err(Error::FieldFile(format!(
            "expected a scalar field, header carries N = {}",
            header.n_slot
        )));
    }
    if header.complex {
        return Err(Error::FieldFile("scalar fields are real".into()));
    }
    if header.d != grid.d() || header.m != grid.points_per_axis() || header.l != grid.half_width()
    {
        return Err(Error::FieldFile(format!(
            "grid mismatch: file has d={} M={} L={}, expected d={} M={} L={}",
            header.d,
            header.m,
            header.l,
            grid.d(),
            grid.points_per_axis(),
            grid.half_width()
        )));
    }
    if numbers.len() != grid.scalar_len() {
        return Err(Error::FieldFile(format!(
            "expected {} values, found {}",
            grid.scalar_len(),
            numbers.len()
        )));
    }
    ScalarField::new(*grid, numbers)
}

/// Read a configuration-space field, building its grid from the header.
pub fn read_config(path: &Path) -> Result<ConfigField> {
    let (header, numbers) = read_parts(path)?;
    if header.is_scalar() {
        return Err(Error::FieldFile(
            "expected a configuration-space field, header carries N = 1".into(),
        ));
    }
    let grid = GridSpec::new(header.d, header.n_slot, header.l, header.m)?;
    if header.complex {
        if numbers.len() != 2 * grid.config_len() {
            return Err(Error::FieldFile(format!(
                "expected {} re/im values, found {}",
                2 * grid.config_len(),
                numbers.len()
            )));
        }
        let values = numbers
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        ConfigField::new_complex(grid, values)
    } else {
        if numbers.len() != grid.config_len() {
            return Err(Error::FieldFile(format!(
                "expected {} values, found {}",
                grid.config_len(),
                numbers.len()
            )));
        }
        ConfigField::new_real(grid, numbers)
    }
}
