//! CSV field snapshots.
//!
//! Each snapshot is two files: element rows `x,y,h` at centroids and edge
//! rows `x,y,e` at midpoints of interior edges. A `#` header line records
//! the step and both field times. Values carry 17 significant digits, so
//! reading a snapshot back reproduces the coefficients bit for bit.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::timestepper::FieldState;

fn header(out: &mut impl Write, step: usize, state: &FieldState, value: &str) -> Result<()> {
    writeln!(
        out,
        "# step={step} time_e={:.16e} time_h={:.16e}",
        state.time_e, state.time_h
    )?;
    writeln!(out, "x,y,{value}")?;
    Ok(())
}

/// Writes the element (`h`) and edge (`e`) tables of one snapshot.
pub fn export_snapshot(
    state: &FieldState,
    step: usize,
    mesh: &Mesh,
    dofs: &DofMap,
    elements: &mut impl Write,
    edges: &mut impl Write,
) -> Result<()> {
    if state.h.len() != mesh.num_elements() || state.e.len() != dofs.num_edge_dofs() {
        return Err(Error::Shape {
            expected: format!(
                "{} elements, {} edge unknowns",
                mesh.num_elements(),
                dofs.num_edge_dofs()
            ),
            actual: format!("{} and {}", state.h.len(), state.e.len()),
        });
    }
    header(elements, step, state, "h")?;
    for (t, h) in state.h.iter().enumerate() {
        let c = mesh.centroid(t);
        writeln!(elements, "{:.16e},{:.16e},{:.16e}", c.x, c.y, h)?;
    }
    header(edges, step, state, "e")?;
    for (i, e) in state.e.iter().enumerate() {
        let m = mesh.edge_midpoint(dofs.dof_edge(i));
        writeln!(edges, "{:.16e},{:.16e},{:.16e}", m.x, m.y, e)?;
    }
    Ok(())
}

/// File names `h_<step>.csv` and `e_<step>.csv` inside `dir`.
pub fn snapshot_paths(dir: &Path, step: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("h_{step:06}.csv")),
        dir.join(format!("e_{step:06}.csv")),
    )
}

/// Writes a snapshot into `dir` (which must exist) and returns the paths.
pub fn write_snapshot_files(
    dir: &Path,
    state: &FieldState,
    step: usize,
    mesh: &Mesh,
    dofs: &DofMap,
) -> Result<(PathBuf, PathBuf)> {
    let (hp, ep) = snapshot_paths(dir, step);
    let mut hf = std::io::BufWriter::new(std::fs::File::create(&hp)?);
    let mut ef = std::io::BufWriter::new(std::fs::File::create(&ep)?);
    export_snapshot(state, step, mesh, dofs, &mut hf, &mut ef)?;
    hf.flush()?;
    ef.flush()?;
    Ok((hp, ep))
}

/// One table read back from a snapshot file.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotTable {
    pub step: usize,
    pub time_e: f64,
    pub time_h: f64,
    /// `(x, y, value)` rows.
    pub rows: Vec<[f64; 3]>,
}

impl SnapshotTable {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[2]).collect()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_snapshot(input: impl BufRead) -> Result<SnapshotTable> {
    let mut lines = input.lines();
    let head = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty snapshot"))??;
    let mut table = SnapshotTable {
        step: 0,
        time_e: 0.0,
        time_h: 0.0,
        rows: Vec::new(),
    };
    let body = head
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, "missing '#' header"))?;
    for field in body.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("bad header field '{field}'")))?;
        let bad = || parse_err(1, format!("bad value in '{field}'"));
        match k {
            "step" => table.step = v.parse().map_err(|_| bad())?,
            "time_e" => table.time_e = v.parse().map_err(|_| bad())?,
            "time_h" => table.time_h = v.parse().map_err(|_| bad())?,
            _ => return Err(parse_err(1, format!("unknown header field '{k}'"))),
        }
    }
    lines
        .next()
        .ok_or_else(|| parse_err(2, "missing column line"))??;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 3;
        let mut row = [0.0; 3];
        let mut parts = line.split(',');
        for slot in &mut row {
            let tok = parts
                .next()
                .ok_or_else(|| parse_err(n, "expected three columns"))?;
            *slot = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(n, format!("cannot parse '{tok}'")))?;
        }
        if parts.next().is_some() {
            return Err(parse_err(n, "expected three columns"));
        }
        table.rows.push(row);
    }
    Ok(table)
}
