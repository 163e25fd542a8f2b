//! Persistence: the diagnostics CSV and binary field snapshots.
//!
//! Snapshot layout: one structured-text header line, then `n^d` raw
//! little-endian f64 values in row-major order. Floats in the header are
//! printed in shortest round-trip form, so write/read is bit-exact.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::Error;
use crate::field::{Grid, ScalarField};
use crate::model::ModelKind;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Write records with the fixed column order
/// `t,E_S,E_P,E,lambda,int_lambda_sq,mass,mass_deficit,mass_bound,
/// sup_abs_phi,sup_xi,xi_pos_l1,xi_l1,mu_total,volume,dissipation,willmore_proxy`.
pub fn write_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(path, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", DiagnosticsRecord::CSV_HEADER).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(w, "{}", r.csv_row()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read back a diagnostics CSV (used by `plot` and tests).
pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format {
        path: path.into(),
        reason: "empty file".into(),
    })?;
    if header != DiagnosticsRecord::CSV_HEADER {
        return Err(Error::Format {
            path: path.into(),
            reason: "unexpected CSV header".into(),
        });
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Format {
                path: path.into(),
                reason: format!("line {}: {e}", lineno + 2),
            })?;
        if fields.len() != 17 {
            return Err(Error::Format {
                path: path.into(),
                reason: format!("line {}: expected 17 columns", lineno + 2),
            });
        }
        out.push(DiagnosticsRecord {
            t: fields[0],
            e_s: fields[1],
            e_p: fields[2],
            e: fields[3],
            lambda: fields[4],
            int_lambda_sq: fields[5],
            mass: fields[6],
            mass_deficit: fields[7],
            mass_bound: fields[8],
            sup_abs_phi: fields[9],
            sup_xi: fields[10],
            xi_pos_l1: fields[11],
            xi_l1: fields[12],
            mu_total: fields[13],
            volume: fields[14],
            dissipation: fields[15],
            willmore_proxy: fields[16],
        });
    }
    Ok(out)
}

/// Snapshot metadata, one line of `key=value` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n: usize,
    pub eps: f64,
    pub alpha: f64,
    pub kind: ModelKind,
    pub t: f64,
    pub m0: f64,
}

pub fn write_snapshot(path: &Path, header: &SnapshotHeader, field: &ScalarField) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(path, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "vpflow-snapshot v1 dim={} n={} eps={} alpha={} kind={} t={} m0={} values={}",
        header.dim,
        header.n,
        header.eps,
        header.alpha,
        header.kind,
        header.t,
        header.m0,
        field.values().len(),
    )
    .map_err(|e| Error::io(path, e))?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, ScalarField), Error> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format {
            path: path.into(),
            reason: "missing header line".into(),
        })?;
    let header_line = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format {
        path: path.into(),
        reason: "header is not UTF-8".into(),
    })?;
    let mut parts = header_line.split_whitespace();
    if parts.next() != Some("vpflow-snapshot") || parts.next() != Some("v1") {
        return Err(Error::Format {
            path: path.into(),
            reason: "not a vpflow snapshot".into(),
        });
    }
    let mut dim = None;
    let mut n = None;
    let mut eps = None;
    let mut alpha = None;
    let mut kind = None;
    let mut t = None;
    let mut m0 = None;
    let mut declared = None;
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Format {
            path: path.into(),
            reason: format!("malformed header field {kv}"),
        })?;
        let bad = |reason: String| Error::Format {
            path: path.into(),
            reason,
        };
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "n" => n = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "eps" => eps = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "alpha" => alpha = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "kind" => kind = Some(v.parse::<ModelKind>().map_err(|e| bad(e.to_string()))?),
            "t" => t = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "m0" => m0 = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "values" => declared = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            other => {
                return Err(bad(format!("unknown header field {other}")));
            }
        }
    }
    let missing = |what: &str| Error::Format {
        path: path.into(),
        reason: format!("missing header field {what}"),
    };
    let header = SnapshotHeader {
        dim: dim.ok_or_else(|| missing("dim"))?,
        n: n.ok_or_else(|| missing("n"))?,
        eps: eps.ok_or_else(|| missing("eps"))?,
        alpha: alpha.ok_or_else(|| missing("alpha"))?,
        kind: kind.ok_or_else(|| missing("kind"))?,
        t: t.ok_or_else(|| missing("t"))?,
        m0: m0.ok_or_else(|| missing("m0"))?,
    };
    let grid = Grid::new(header.dim, header.n)?;
    let count = declared.ok_or_else(|| missing("values"))?;
    if count != grid.len() {
        return Err(Error::Format {
            path: path.into(),
            reason: format!("declared {count} values, grid has {}", grid.len()),
        });
    }
    let payload = &bytes[nl + 1..];
    if payload.len() != 8 * count {
        return Err(Error::Format {
            path: path.into(),
            reason: format!("payload is {} bytes, expected {}", payload.len(), 8 * count),
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, ScalarField::from_values(grid, values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    #[test]
    fn snapshot_roundtrip_bit_exact() {
        let g = Grid::new(2, 16).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] * 7.3 - x[1] * 0.1).sin() * 0.991);
        let header = SnapshotHeader {
            dim: 2,
            n: 16,
            eps: 0.02,
            alpha: 0.5,
            kind: ModelKind::Takasao,
            t: 0.012345678901234567,
            m0: -0.4969368599160421,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.vpf");
        write_snapshot(&path, &header, &f).unwrap();
        let (h2, f2) = read_snapshot(&path).unwrap();
        assert_eq!(h2, header);
        assert_eq!(f2.values(), f.values());
        // payload size: 8 bytes per value after the header line
        let bytes = std::fs::read(&path).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len() - nl - 1, 8 * 16 * 16);
    }

    #[test]
    fn csv_roundtrip() {
        let rec = DiagnosticsRecord {
            t: 0.1,
            e_s: 1.75,
            e_p: 0.001953125,
            e: 1.751953125,
            lambda: -2.25,
            int_lambda_sq: 0.125,
            mass: -0.3333333333333333,
            mass_deficit: 0.07071067811865475,
            mass_bound: 0.688,
            sup_abs_phi: 0.9999999,
            sup_xi: -1e-14,
            xi_pos_l1: 0.0,
            xi_l1: 12.25,
            mu_total: 1.3125,
            volume: 0.1256637,
            dissipation: 3.5,
            willmore_proxy: 42.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(&[rec, rec], &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rec);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,E_S,E_P,E,lambda,int_lambda_sq,mass,"));
    }
}
