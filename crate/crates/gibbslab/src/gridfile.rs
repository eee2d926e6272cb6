//! File formats: the binary grid container, CSV exports, and the
//! 17-significant-digit real formatting shared by every text output.

use crate::field::Backend;
use crate::model::GibbsModel;
use crate::sampler::{CapacityGrid, Provenance};
use crate::{FieldConfig, LabError, Result};
use std::io::{BufRead, Read, Write};

const MAGIC: &[u8; 8] = b"GLABGRD1";
const VERSION: u32 = 1;

/// 17 significant digits: round-trips through `f64` exactly.
pub fn fmt_g17(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_real(text: &str) -> Result<f64> {
    match text.trim() {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| LabError::invalid(format!("bad real {t:?}"))),
    }
}

/// Writes a grid: fixed header, `log2` values as little-endian f64 bits
/// (`-inf` kept as the standard bit pattern), then the incomplete-cell list.
pub fn save_grid(grid: &CapacityGrid, mut w: impl Write) -> Result<()> {
    let p = grid.provenance();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[grid.dimension(), backend_code(p.backend), 0, 0])?;
    w.write_all(&grid.depth().to_le_bytes())?;
    w.write_all(&grid.truncation_depth().to_le_bytes())?;
    w.write_all(&p.seed.to_le_bytes())?;
    w.write_all(&p.eta.to_bits().to_le_bytes())?;
    w.write_all(&p.trunc_factor.to_bits().to_le_bytes())?;
    w.write_all(&p.model_fingerprint.to_le_bytes())?;
    w.write_all(&(grid.cell_count()).to_le_bytes())?;
    for &v in grid.values() {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    w.write_all(&(grid.incomplete_cells().len() as u64).to_le_bytes())?;
    for &c in grid.incomplete_cells() {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

fn backend_code(b: Backend) -> u8 {
    match b {
        Backend::Hash => 0,
        Backend::Index => 1,
    }
}

fn backend_from(code: u8) -> Result<Backend> {
    match code {
        0 => Ok(Backend::Hash),
        1 => Ok(Backend::Index),
        other => Err(LabError::GridFile(format!("unknown backend code {other}"))),
    }
}

/// Loads a grid written by [`save_grid`]. Own-cube values and witnesses are
/// build-time artifacts and are not stored.
pub fn load_grid(mut r: impl Read) -> Result<CapacityGrid> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LabError::GridFile("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(LabError::GridFile(format!("unsupported version {version}")));
    }
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    let dimension = head[0];
    let backend = backend_from(head[1])?;
    let depth = read_u32(&mut r)?;
    let truncation = read_u32(&mut r)?;
    let seed = read_u64(&mut r)?;
    let eta = f64::from_bits(read_u64(&mut r)?);
    let trunc_factor = f64::from_bits(read_u64(&mut r)?);
    let model_fingerprint = read_u64(&mut r)?;
    let n = read_u64(&mut r)?;
    let expected = 1u64 << (dimension as u32 * depth);
    if n != expected {
        return Err(LabError::GridFile(format!(
            "value count {n} does not match 2^(d J) = {expected}"
        )));
    }
    let mut values = Vec::with_capacity(n as usize);
    for _ in 0..n {
        values.push(f64::from_bits(read_u64(&mut r)?));
    }
    let m = read_u64(&mut r)?;
    let mut incomplete = Vec::with_capacity(m as usize);
    for _ in 0..m {
        incomplete.push(read_u64(&mut r)?);
    }
    Ok(CapacityGrid::from_parts(
        dimension,
        depth,
        values,
        truncation,
        incomplete,
        Provenance { model_fingerprint, seed, eta, backend, trunc_factor },
    ))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// `cell_index,log2_value,witness_depth` (witness column empty for cells
/// without one, e.g. still-incomplete cells or loaded grids).
pub fn grid_csv(grid: &CapacityGrid, mut w: impl Write) -> Result<()> {
    writeln!(w, "cell_index,log2_value,witness_depth")?;
    let witnesses = grid.witnesses();
    for (i, &v) in grid.values().iter().enumerate() {
        let depth = witnesses
            .and_then(|ws| ws[i].map(|cw| cw.depth.to_string()))
            .unwrap_or_default();
        writeln!(w, "{i},{},{depth}", fmt_g17(v))?;
    }
    Ok(())
}

/// Survivor dump at depth `j`: `depth,index_0..index_{d-1},log2_mu` with the
/// per-axis little-endian packed letters.
pub fn survivor_dump_csv(
    model: &GibbsModel,
    field: &FieldConfig,
    j: u32,
    mut w: impl Write,
) -> Result<()> {
    let d = field.dimension();
    write!(w, "depth")?;
    for axis in 0..d {
        write!(w, ",index_{axis}")?;
    }
    writeln!(w, ",log2_mu")?;
    for word in field.survivors_at(j, None)? {
        write!(w, "{j}")?;
        for axis in 0..d {
            write!(w, ",{}", word.axis_index_le(axis))?;
        }
        writeln!(w, ",{}", fmt_g17(model.mu_log2(&word)?))?;
    }
    Ok(())
}

/// Writes aligned columns as CSV: all curves must share their abscissae
/// bit-exactly.
pub fn write_curves_csv(
    x_name: &str,
    xs: &[f64],
    columns: &[(&str, &[f64])],
    mut w: impl Write,
) -> Result<()> {
    for (name, ys) in columns {
        if ys.len() != xs.len() {
            return Err(LabError::invalid(format!(
                "column {name} has {} values for {} abscissae",
                ys.len(),
                xs.len()
            )));
        }
    }
    write!(w, "{x_name}")?;
    for (name, _) in columns {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (i, &x) in xs.iter().enumerate() {
        write!(w, "{}", fmt_g17(x))?;
        for (_, ys) in columns {
            write!(w, ",{}", fmt_g17(ys[i]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a CSV written by [`write_curves_csv`]: header names plus one `Vec`
/// per column.
pub fn read_columns_csv(r: impl Read) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let reader = std::io::BufReader::new(r);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| LabError::invalid("empty CSV"))??;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(LabError::Parse {
                line: lineno + 2,
                msg: format!("expected {} fields, got {}", names.len(), fields.len()),
            });
        }
        for (c, f) in fields.iter().enumerate() {
            cols[c].push(parse_real(f).map_err(|_| LabError::Parse {
                line: lineno + 2,
                msg: format!("bad real {f:?}"),
            })?);
        }
    }
    Ok((names, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{build_capacity_grid, BuildOptions};
    use crate::{Backend, BaseMeasure, FieldConfig, GibbsModel};

    #[test]
    fn grid_roundtrip_is_bit_exact() {
        let model =
            GibbsModel::new(1, BaseMeasure::Homogeneous, 1.0, 0.0, 1.0).unwrap();
        let field = FieldConfig::new(5, 0.5, 1, Backend::Hash, 16).unwrap();
        let grid =
            build_capacity_grid(&model, &field, 3, &BuildOptions::default()).unwrap();
        let mut buf = Vec::new();
        save_grid(&grid, &mut buf).unwrap();
        let grid2 = load_grid(&buf[..]).unwrap();
        assert_eq!(grid.depth(), grid2.depth());
        assert_eq!(grid.truncation_depth(), grid2.truncation_depth());
        assert_eq!(grid.incomplete_cells(), grid2.incomplete_cells());
        let bits: Vec<u64> = grid.values().iter().map(|v| v.to_bits()).collect();
        let bits2: Vec<u64> = grid2.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, bits2);
        assert_eq!(grid.provenance(), grid2.provenance());
    }

    #[test]
    fn g17_roundtrips() {
        for x in [0.1, -3.25e-17, 1.0 / 3.0, f64::NEG_INFINITY, 2f64.sqrt()] {
            let s = fmt_g17(x);
            assert_eq!(parse_real(&s).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn curve_csv_roundtrip() {
        let xs = [0.0, 0.5, 1.0];
        let ys = [1.0, f64::NEG_INFINITY, 0.25];
        let mut buf = Vec::new();
        write_curves_csv("q", &xs, &[("tau", &ys)], &mut buf).unwrap();
        let (names, cols) = read_columns_csv(&buf[..]).unwrap();
        assert_eq!(names, vec!["q", "tau"]);
        assert_eq!(cols[0], xs);
        assert_eq!(cols[1][1], f64::NEG_INFINITY);
    }
}
