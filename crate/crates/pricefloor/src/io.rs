//! Persistence: grid dumps, per-path records, summaries, and run manifests.
//!
//! Grids go to CSV with header rows for the axes followed by one row of
//! values per time level; numbers use the shortest round-trip decimal form,
//! so write-then-read restores the exact bits. Large surfaces can go to a
//! flat little-endian binary instead.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde1d::{Grid1D, TruncStep};
use crate::pde_sv::Grid2D;
use crate::sim::PathRecord;

fn join_floats(vals: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("{v}"));
    }
    s
}

fn parse_floats(line: &str, skip_first: bool) -> Result<Vec<f64>> {
    line.split(',')
        .skip(usize::from(skip_first))
        .map(|tok| tok.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number '{tok}': {e}"))))
        .collect()
}

/// Grid dump: `t` header row, `x` header row, a `meta` row with the
/// truncation level and singular flag, then one row of nodal values per
/// time level.
pub fn write_grid1(path: &Path, grid: &Grid1D) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "t,{}", join_floats(&grid.t))?;
    writeln!(f, "x,{}", join_floats(&grid.x))?;
    writeln!(f, "meta,{},{}", grid.trunc_level, u8::from(grid.singular_terminal))?;
    for row in &grid.values {
        writeln!(f, "{}", join_floats(row))?;
    }
    Ok(())
}

pub fn read_grid1(path: &Path) -> Result<Grid1D> {
    let f = BufReader::new(File::open(path)?);
    let mut lines = f.lines();
    let t_line = lines.next().ok_or_else(|| Error::Config("empty grid file".into()))??;
    let x_line = lines.next().ok_or_else(|| Error::Config("grid file missing x header".into()))??;
    let meta_line = lines.next().ok_or_else(|| Error::Config("grid file missing meta header".into()))??;
    let t = parse_floats(&t_line, true)?;
    let x = parse_floats(&x_line, true)?;
    let meta = parse_floats(&meta_line, true)?;
    if meta.len() != 2 {
        return Err(Error::Config("grid meta header must carry two fields".into()));
    }
    let mut values = Vec::with_capacity(t.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_floats(&line, false)?;
        if row.len() != x.len() {
            return Err(Error::Config(format!("grid row has {} values, axis has {}", row.len(), x.len())));
        }
        values.push(row);
    }
    if values.len() != t.len() {
        return Err(Error::Config(format!("grid has {} rows, time axis has {}", values.len(), t.len())));
    }
    Ok(Grid1D { x, t, values, trunc_level: meta[0], singular_terminal: meta[1] != 0.0, cert: Vec::new() })
}

/// Surface dump: as the 1D format with an extra `nu` header block; each time
/// level is one row of `n_nu * n_s` values in variance-major order.
pub fn write_grid2(path: &Path, grid: &Grid2D) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "t,{}", join_floats(&grid.t))?;
    writeln!(f, "nu,{}", join_floats(&grid.nu))?;
    writeln!(f, "s,{}", join_floats(&grid.s))?;
    writeln!(f, "meta,{}", grid.trunc_level)?;
    for row in &grid.values {
        writeln!(f, "{}", join_floats(row))?;
    }
    Ok(())
}

pub fn read_grid2(path: &Path) -> Result<Grid2D> {
    let f = BufReader::new(File::open(path)?);
    let mut lines = f.lines();
    let t = parse_floats(&lines.next().ok_or_else(|| Error::Config("empty surface file".into()))??, true)?;
    let nu = parse_floats(&lines.next().ok_or_else(|| Error::Config("missing nu header".into()))??, true)?;
    let s = parse_floats(&lines.next().ok_or_else(|| Error::Config("missing s header".into()))??, true)?;
    let meta = parse_floats(&lines.next().ok_or_else(|| Error::Config("missing meta header".into()))??, true)?;
    let mut values = Vec::with_capacity(t.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_floats(&line, false)?;
        if row.len() != nu.len() * s.len() {
            return Err(Error::Config("surface row length does not match the axes".into()));
        }
        values.push(row);
    }
    if values.len() != t.len() {
        return Err(Error::Config("surface row count does not match the time axis".into()));
    }
    Ok(Grid2D { nu, s, t, values, trunc_level: meta[0], cert: Vec::new() })
}

const BIN_MAGIC: &[u8; 4] = b"PFG1";

/// Flat binary alternative for large grids: magic, dimensions, then the time
/// axis, space axis, and row-major values as little-endian f64.
pub fn write_grid1_bin(path: &Path, grid: &Grid1D) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(BIN_MAGIC)?;
    f.write_all(&(grid.t.len() as u64).to_le_bytes())?;
    f.write_all(&(grid.x.len() as u64).to_le_bytes())?;
    f.write_all(&grid.trunc_level.to_le_bytes())?;
    f.write_all(&(u64::from(grid.singular_terminal)).to_le_bytes())?;
    for v in grid.t.iter().chain(grid.x.iter()) {
        f.write_all(&v.to_le_bytes())?;
    }
    for row in &grid.values {
        for v in row {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_grid1_bin(path: &Path) -> Result<Grid1D> {
    let mut f = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::Config("not a binary grid file".into()));
    }
    let mut buf8 = [0u8; 8];
    let mut read_u64 = |f: &mut BufReader<File>| -> Result<u64> {
        f.read_exact(&mut buf8)?;
        Ok(u64::from_le_bytes(buf8))
    };
    let nt = read_u64(&mut f)? as usize;
    let nx = read_u64(&mut f)? as usize;
    let mut buf = [0u8; 8];
    f.read_exact(&mut buf)?;
    let trunc_level = f64::from_le_bytes(buf);
    f.read_exact(&mut buf)?;
    let singular = u64::from_le_bytes(buf) != 0;
    let read_vec = |f: &mut BufReader<File>, n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            f.read_exact(&mut b)?;
            out.push(f64::from_le_bytes(b));
        }
        Ok(out)
    };
    let t = read_vec(&mut f, nt)?;
    let x = read_vec(&mut f, nx)?;
    let mut values = Vec::with_capacity(nt);
    for _ in 0..nt {
        values.push(read_vec(&mut f, nx)?);
    }
    Ok(Grid1D { x, t, values, trunc_level, singular_terminal: singular, cert: Vec::new() })
}

/// One row per record; optional fields serialize as empty cells.
pub fn write_records(path: &Path, records: &[PathRecord]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "index,fq_t,liquidated,no_trades,a1,a2,a3,a,xt,xt_closed_form,n_trades,tau_ell")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.fq_t,
            u8::from(r.liquidated),
            u8::from(r.no_trades),
            r.a1,
            r.a2,
            r.a3,
            r.a,
            r.xt,
            r.xt_closed_form,
            r.n_trades,
            r.tau_ell.map_or(String::new(), |v| v.to_string()),
        )?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<PathRecord>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(Error::Config(format!("record row {i} has {} columns, expected 12", cols.len())));
        }
        let fp = |i: usize| -> Result<f64> {
            cols[i].parse::<f64>().map_err(|e| Error::Config(format!("bad number '{}': {e}", cols[i])))
        };
        out.push(PathRecord {
            index: cols[0].parse().map_err(|e| Error::Config(format!("bad index: {e}")))?,
            fq_t: fp(1)?,
            liquidated: cols[2] == "1",
            no_trades: cols[3] == "1",
            a1: fp(4)?,
            a2: fp(5)?,
            a3: fp(6)?,
            a: fp(7)?,
            xt: fp(8)?,
            xt_closed_form: fp(9)?,
            n_trades: cols[10].parse().map_err(|e| Error::Config(format!("bad n_trades: {e}")))?,
            tau_ell: if cols[11].is_empty() {
                None
            } else {
                Some(cols[11].parse().map_err(|e| Error::Config(format!("bad tau_ell: {e}")))?)
            },
            q_dump: None,
        });
    }
    Ok(out)
}

/// Full trajectory of one selected path: time, driver, and position fraction.
pub fn write_trajectory(path: &Path, dt: f64, w: &[f64], q: &[f64]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "t,w,fq")?;
    for (i, (wi, qi)) in w.iter().zip(q.iter()).enumerate() {
        writeln!(f, "{},{},{}", i as f64 * dt, wi, qi)?;
    }
    Ok(())
}

/// Generic numeric table with a named header.
pub fn write_table(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{}", join_floats(row))?;
    }
    Ok(())
}

/// Sidecar describing a solve: ties grids to the exact configuration that
/// produced them and carries the truncation certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub regime_kind: String,
    pub engine: String,
    /// Final truncation level; `None` marks a converged singular solve.
    pub trunc_level: Option<f64>,
    pub cert: Vec<TruncStep>,
    pub files: Vec<String>,
    /// Budget of the switching recursion, when applicable.
    pub n_switches: Option<u32>,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let json =
        serde_json::to_string_pretty(manifest).map_err(|e| Error::Config(format!("manifest encode: {e}")))?;
    f.write_all(json.as_bytes())?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let mut buf = String::new();
    File::open(path)?.read_to_string(&mut buf)?;
    serde_json::from_str(&buf).map_err(|e| Error::Config(format!("manifest decode: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde1d::{solve_truncated, SolveSpec, TerminalSpec};

    #[test]
    fn grid_roundtrip_is_lossless() {
        let spec = SolveSpec { nx: 61, nt: 60, ..Default::default() };
        let grid = solve_truncated(
            &spec,
            &TerminalSpec::ThresholdSingular { ell: -1.4, neg: -2.0 / 3.0 },
            1e3,
            2.0,
            &|_, _| 1.0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.csv");
        write_grid1(&p, &grid).unwrap();
        let back = read_grid1(&p).unwrap();
        assert_eq!(grid.t.len(), back.t.len());
        assert_eq!(grid.x.len(), back.x.len());
        for (a, b) in grid.t.iter().zip(back.t.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (ra, rb) in grid.values.iter().zip(back.values.iter()) {
            for (a, b) in ra.iter().zip(rb.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert_eq!(grid.singular_terminal, back.singular_terminal);

        let pb = dir.path().join("grid.bin");
        write_grid1_bin(&pb, &grid).unwrap();
        let back = read_grid1_bin(&pb).unwrap();
        for (ra, rb) in grid.values.iter().zip(back.values.iter()) {
            for (a, b) in ra.iter().zip(rb.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn records_roundtrip() {
        let records = vec![
            PathRecord {
                index: 0,
                fq_t: 0.0,
                liquidated: true,
                no_trades: false,
                a1: 1.0,
                a2: -0.3,
                a3: 1.04,
                a: -0.01,
                xt: 8.9e6,
                xt_closed_form: 8.9e6 + 1.5,
                n_trades: 1,
                tau_ell: None,
                q_dump: None,
            },
            PathRecord {
                index: 1,
                fq_t: 0.25,
                liquidated: false,
                no_trades: false,
                a1: 0.75,
                a2: 1.25,
                a3: 0.9,
                a: -0.02,
                xt: 6.6e6,
                xt_closed_form: 6.6e6 - 0.5,
                n_trades: 2,
                tau_ell: Some(137),
                q_dump: None,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("records.csv");
        write_records(&p, &records).unwrap();
        let back = read_records(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].fq_t.to_bits(), records[0].fq_t.to_bits());
        assert_eq!(back[1].tau_ell, Some(137));
        assert_eq!(back[1].xt.to_bits(), records[1].xt.to_bits());
        assert!(back[0].liquidated && !back[1].liquidated);
    }

    #[test]
    fn manifest_roundtrip() {
        let m = Manifest {
            config_hash: "abc123".into(),
            regime_kind: "terminal-threshold".into(),
            engine: "grid1d".into(),
            trunc_level: None,
            cert: vec![TruncStep { n: 1e3, sup_delta: 0.01, min_increase: 0.0 }],
            files: vec!["grid.csv".into()],
            n_switches: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        write_manifest(&p, &m).unwrap();
        let back = read_manifest(&p).unwrap();
        assert_eq!(back.config_hash, "abc123");
        assert!(back.trunc_level.is_none());
        assert_eq!(back.cert.len(), 1);
    }
}
