//! Snapshot files.
//!
//! Scalar and face fields are CSV: a header record
//! `nx,ny,lx,ly,field,t`, one record with those values, then one record per
//! grid row of the stored array (row-major, `j` outer). Face components use
//! the field names `ux` (`(nx+1) x ny`) and `uy` (`nx x (ny+1)`).
//!
//! Phase-space distributions are little-endian binary: the magic
//! `NSVPHASE1\n`, `u64` sizes `nx, ny, nvx, nvy`, `f64` values
//! `lx, ly, vmax, t`, then `nx·ny·nvx·nvy` `f64` in the velocity-major layout
//! of [`PhaseDistribution`].

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::engine::{EnergyLedger, LedgerRow, SimState};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField, VectorField};
use crate::kinetic::{PhaseDistribution, VelocityGrid};

const MAGIC: &[u8] = b"NSVPHASE1\n";
const FIELD_HEADER: &str = "nx,ny,lx,ly,field,t";

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Render an array of `w x h` values with the field header.
fn field_csv(g: &Grid2D, name: &str, t: f64, values: &[f64], w: usize) -> String {
    let mut s = format!("{FIELD_HEADER}\n{},{},{:e},{:e},{name},{:e}\n", g.nx, g.ny, g.lx, g.ly, t);
    for row in values.chunks(w) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parsed field file: grid, name, time and the value rows.
struct FieldFile {
    grid: Grid2D,
    name: String,
    t: f64,
    rows: Vec<Vec<f64>>,
}

fn read_field_file(path: &Path) -> Result<FieldFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != FIELD_HEADER {
        return Err(format_err(path, format!("expected header `{FIELD_HEADER}`")));
    }
    let mut records = rdr.records();
    let meta = records
        .next()
        .ok_or_else(|| format_err(path, "missing metadata record"))?
        .map_err(|e| format_err(path, e.to_string()))?;
    if meta.len() != 6 {
        return Err(format_err(path, "metadata record must have 6 columns"));
    }
    let int = |k: usize| meta[k].trim().parse::<usize>().map_err(|e| format_err(path, format!("column {k}: {e}")));
    let num = |k: usize| meta[k].trim().parse::<f64>().map_err(|e| format_err(path, format!("column {k}: {e}")));
    let grid = Grid2D::new(int(0)?, int(1)?, num(2)?, num(3)?).map_err(|e| format_err(path, e.to_string()))?;
    let name = meta[4].trim().to_string();
    let t = num(5)?;
    let mut rows = Vec::new();
    for (k, rec) in records.enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| format_err(path, format!("value row {}: {e}", k + 1)))?;
        rows.push(row);
    }
    Ok(FieldFile { grid, name, t, rows })
}

fn flatten(path: &Path, f: &FieldFile, w: usize, h: usize) -> Result<Vec<f64>> {
    if f.rows.len() != h || f.rows.iter().any(|r| r.len() != w) {
        return Err(format_err(path, format!("field `{}` must have {h} rows of {w} values", f.name)));
    }
    let out: Vec<f64> = f.rows.concat();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(format_err(path, "non-finite value"));
    }
    Ok(out)
}

pub fn write_scalar_csv(path: &Path, name: &str, t: f64, s: &ScalarField) -> Result<()> {
    write_file(path, field_csv(&s.grid, name, t, &s.data, s.grid.nx).as_bytes())
}

/// Read a cell-centred field; returns `(field, name, t)`.
pub fn read_scalar_csv(path: &Path) -> Result<(ScalarField, String, f64)> {
    let f = read_field_file(path)?;
    let data = flatten(path, &f, f.grid.nx, f.grid.ny)?;
    Ok((ScalarField { grid: f.grid, data }, f.name, f.t))
}

/// Write the two face components to `<stem>_x.csv` and `<stem>_y.csv`.
pub fn write_vector_csv(dir: &Path, stem: &str, t: f64, u: &VectorField) -> Result<()> {
    let g = &u.grid;
    write_file(&dir.join(format!("{stem}_x.csv")), field_csv(g, "ux", t, &u.x, g.nx + 1).as_bytes())?;
    write_file(&dir.join(format!("{stem}_y.csv")), field_csv(g, "uy", t, &u.y, g.nx).as_bytes())
}

pub fn read_vector_csv(dir: &Path, stem: &str) -> Result<(VectorField, f64)> {
    let px = dir.join(format!("{stem}_x.csv"));
    let py = dir.join(format!("{stem}_y.csv"));
    let fx = read_field_file(&px)?;
    let fy = read_field_file(&py)?;
    if fx.grid != fy.grid {
        return Err(format_err(&py, "grid differs from the x component"));
    }
    let g = fx.grid;
    let x = flatten(&px, &fx, g.nx + 1, g.ny)?;
    let y = flatten(&py, &fy, g.nx, g.ny + 1)?;
    Ok((VectorField { grid: g, x, y }, fx.t))
}

pub fn write_phase(path: &Path, t: f64, f: &PhaseDistribution) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let g = f.grid;
    let v = f.vgrid;
    let mut put = |b: &[u8]| w.write_all(b).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    for n in [g.nx, g.ny, v.nvx, v.nvy] {
        put(&(n as u64).to_le_bytes())?;
    }
    for x in [g.lx, g.ly, v.vmax, t] {
        put(&x.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * f.data.len());
    for x in &f.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    put(&buf)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a phase-space file; returns `(distribution, t)`.
pub fn read_phase(path: &Path) -> Result<(PhaseDistribution, f64)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let head = MAGIC.len() + 8 * 8;
    if bytes.len() < head || &bytes[..MAGIC.len()] != MAGIC {
        return Err(format_err(path, "not a phase-space file (bad magic or truncated header)"));
    }
    let word = |k: usize| -> [u8; 8] {
        let s = MAGIC.len() + 8 * k;
        bytes[s..s + 8].try_into().expect("8-byte slice")
    };
    let sizes: Vec<usize> = (0..4).map(|k| u64::from_le_bytes(word(k)) as usize).collect();
    let reals: Vec<f64> = (4..8).map(|k| f64::from_le_bytes(word(k))).collect();
    let grid = Grid2D::new(sizes[0], sizes[1], reals[0], reals[1]).map_err(|e| format_err(path, e.to_string()))?;
    let vgrid = VelocityGrid::new(sizes[2], sizes[3], reals[2]).map_err(|e| format_err(path, e.to_string()))?;
    let n = grid.n_cells() * vgrid.n();
    if bytes.len() != head + 8 * n {
        return Err(format_err(
            path,
            format!("expected {} data bytes, found {}", 8 * n, bytes.len() - head),
        ));
    }
    let data: Vec<f64> = bytes[head..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let f = PhaseDistribution { grid, vgrid, data };
    f.validate().map_err(|e| format_err(path, e.to_string()))?;
    Ok((f, reals[3]))
}

/// Directory of snapshot `step`.
pub fn snapshot_dir(root: &Path, step: usize) -> PathBuf {
    root.join("snapshots").join(format!("step_{step:06}"))
}

/// Write `rho.csv`, `p.csv`, `u_x.csv`, `u_y.csv` and `f.bin`.
pub fn write_snapshot(root: &Path, s: &SimState) -> Result<PathBuf> {
    let dir = snapshot_dir(root, s.step);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_scalar_csv(&dir.join("rho.csv"), "rho", s.t, &s.rho)?;
    write_scalar_csv(&dir.join("p.csv"), "p", s.t, &s.p)?;
    write_vector_csv(&dir, "u", s.t, &s.u)?;
    write_phase(&dir.join("f.bin"), s.t, &s.f)?;
    Ok(dir)
}

pub fn read_snapshot(dir: &Path) -> Result<SimState> {
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let step = name
        .strip_prefix("step_")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| format_err(dir, "snapshot directory must be named step_NNNNNN"))?;
    let (rho, _, t) = read_scalar_csv(&dir.join("rho.csv"))?;
    let (p, _, _) = read_scalar_csv(&dir.join("p.csv"))?;
    let (u, _) = read_vector_csv(dir, "u")?;
    let (f, _) = read_phase(&dir.join("f.bin"))?;
    for g in [&p.grid, &u.grid, &f.grid] {
        if *g != rho.grid {
            return Err(format_err(dir, "snapshot files disagree on the grid"));
        }
    }
    Ok(SimState { t, step, rho, u, p, f })
}

/// Snapshot directories under `root/snapshots`, ordered by step.
pub fn snapshot_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let base = root.join("snapshots");
    let entries = fs::read_dir(&base).map_err(|e| Error::io(&base, e))?;
    let mut dirs = Vec::new();
    for e in entries {
        let e = e.map_err(|e| Error::io(&base, e))?;
        if e.path().is_dir() {
            dirs.push(e.path());
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(format_err(&base, "no snapshots found"));
    }
    Ok(dirs)
}

/// Time stamp of a snapshot, read from its density file only.
pub fn snapshot_time(dir: &Path) -> Result<f64> {
    Ok(read_scalar_csv(&dir.join("rho.csv"))?.2)
}

/// All snapshots under `root/snapshots`, ordered by step.
pub fn read_trajectory(root: &Path) -> Result<Vec<SimState>> {
    snapshot_dirs(root)?.iter().map(|d| read_snapshot(d)).collect()
}

pub fn write_ledger(path: &Path, ledger: &EnergyLedger) -> Result<()> {
    write_file(path, ledger.to_csv().as_bytes())
}

pub fn read_ledger(path: &Path) -> Result<EnergyLedger> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| format_err(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != EnergyLedger::HEADER {
        return Err(format_err(path, format!("expected header `{}`", EnergyLedger::HEADER)));
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        let line = n + 2;
        let num = |k: usize| {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| format_err(path, format!("line {line}, column {}: {e}", k + 1)))
        };
        rows.push(LedgerRow {
            step: rec[0]
                .trim()
                .parse()
                .map_err(|e| format_err(path, format!("line {line}, step: {e}")))?,
            t: num(1)?,
            e_fluid: num(2)?,
            e_part: num(3)?,
            d_visc: num(4)?,
            d_drag: num(5)?,
            defect: num(6)?,
            m0f: num(7)?,
            m3f: num(8)?,
            overflow_mass: num(9)?,
        });
    }
    Ok(EnergyLedger { rows })
}
