//! CSV tables. Floats are written as `{:.16e}`, which round-trips exactly, so
//! a rerun with the same seed produces byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::cbm::DensityEstimate;
use crate::queue::WaveRecord;
use crate::representation::{GGraph, PlanarSample, PointProcessSample};
use crate::stats::{BlockWalkComparison, EnvelopeRow, GoodnessEstimate, QEstimate, TailEstimate};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad field {field:?} on line {line}: {value:?}")]
    Parse { line: usize, field: &'static str, value: String },
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>, ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

/// Opens `path` for writing and hands a buffered writer to `f`.
pub fn to_file<F>(path: &Path, f: F) -> Result<(), ExportError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), ExportError>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_waves<W: Write>(w: W, records: &[WaveRecord]) -> Result<(), ExportError> {
    let mut out = writer(w, &["t", "W", "L", "censored"])?;
    for r in records {
        out.write_record([r.t.to_string(), r.w.to_string(), fmt_f64(r.l), (r.censored as u8).to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_waves<R: Read>(r: R) -> Result<Vec<WaveRecord>, ExportError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize, name: &'static str| {
            let v = rec.get(i).unwrap_or("");
            (v, ExportError::Parse { line: line + 2, field: name, value: v.to_string() })
        };
        let (v, e) = field(0, "t");
        let t = v.parse().map_err(|_| e)?;
        let (v, e) = field(1, "W");
        let w = v.parse().map_err(|_| e)?;
        let (v, e) = field(2, "L");
        let l = v.parse().map_err(|_| e)?;
        let (v, e) = field(3, "censored");
        let censored = match v {
            "0" => false,
            "1" => true,
            _ => return Err(e),
        };
        out.push(WaveRecord { t, w, l, censored });
    }
    Ok(out)
}

/// Rank, position, spacing to the previous rank, step of last move.
pub fn write_snapshot<W: Write>(w: W, positions: &[f64], last_moves: &[u64]) -> Result<(), ExportError> {
    let mut out = writer(w, &["rank", "position", "spacing", "last_move_time"])?;
    for (i, (&x, &m)) in positions.iter().zip(last_moves).enumerate() {
        let gap = if i == 0 { 0.0 } else { x - positions[i - 1] };
        out.write_record([i.to_string(), fmt_f64(x), fmt_f64(gap), m.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_tail<W: Write>(w: W, est: &TailEstimate) -> Result<(), ExportError> {
    let mut out = writer(w, &["j", "N_j", "rho_hat", "se"])?;
    for (i, j) in est.j_grid.iter().enumerate() {
        out.write_record([j.to_string(), est.counts[i].to_string(), fmt_f64(est.rho_hat[i]), fmt_f64(est.se[i])])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_q<W: Write>(w: W, rows: &[QEstimate]) -> Result<(), ExportError> {
    let mut out = writer(w, &["j", "y", "q_hat", "se", "exact"])?;
    for q in rows {
        out.write_record([q.j.to_string(), fmt_f64(q.y), fmt_f64(q.q_hat), fmt_f64(q.se), (q.exact as u8).to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_envelope<W: Write>(w: W, rows: &[EnvelopeRow]) -> Result<(), ExportError> {
    let mut out = writer(w, &["j", "y", "q", "q_floor", "value", "se"])?;
    for r in rows {
        out.write_record([
            r.j.to_string(),
            fmt_f64(r.y),
            fmt_f64(r.q),
            fmt_f64(r.q_floor),
            fmt_f64(r.value),
            fmt_f64(r.se),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_goodness<W: Write>(w: W, rows: &[GoodnessEstimate]) -> Result<(), ExportError> {
    let mut out = writer(w, &["j", "y", "q_ref", "not_good", "se", "samples"])?;
    for r in rows {
        out.write_record([
            r.j.to_string(),
            fmt_f64(r.y),
            fmt_f64(r.q_ref),
            fmt_f64(r.not_good),
            fmt_f64(r.se),
            r.samples.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_blocks<W: Write>(w: W, rows: &[BlockWalkComparison]) -> Result<(), ExportError> {
    let mut out = writer(w, &["t0", "k", "X_k", "S_k", "bad_count", "bound"])?;
    for r in rows {
        out.write_record([
            r.t0.to_string(),
            r.k.to_string(),
            fmt_f64(r.x_k),
            fmt_f64(r.s_k),
            r.bad_count.to_string(),
            fmt_f64(r.bound),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Jump lists of `G(t, ·) = t + F_t(·)`: each jump position with the value
/// just after it, one block of rows per graph.
pub fn write_jumps<W: Write>(w: W, graphs: &[GGraph]) -> Result<(), ExportError> {
    let mut out = writer(w, &["t", "jump_position", "value_after_jump"])?;
    for g in graphs {
        for (k, &x) in g.f.jumps().iter().enumerate() {
            out.write_record([g.t.to_string(), fmt_f64(x), fmt_f64((g.t + k as u64) as f64 - x)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_points<W: Write>(w: W, samples: &[PointProcessSample]) -> Result<(), ExportError> {
    let mut out = writer(w, &["replicate", "y"])?;
    for s in samples {
        for &y in &s.points {
            out.write_record([s.replicate.to_string(), fmt_f64(y)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_planar<W: Write>(w: W, samples: &[PlanarSample]) -> Result<(), ExportError> {
    let mut out = writer(w, &["replicate", "time", "distance", "truncated"])?;
    for s in samples {
        for &(a, b) in &s.points {
            out.write_record([s.replicate.to_string(), fmt_f64(a), fmt_f64(b), (s.truncated as u8).to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_density<W: Write>(w: W, rows: &[DensityEstimate]) -> Result<(), ExportError> {
    let mut out = writer(w, &["eps", "t", "rho_hat", "se"])?;
    for r in rows {
        out.write_record([fmt_f64(r.eps), fmt_f64(r.t), fmt_f64(r.rho_hat), fmt_f64(r.se)])?;
    }
    out.flush()?;
    Ok(())
}

/// Cluster positions, one snapshot per replicate.
pub fn write_clusters<W: Write>(w: W, snapshots: &[(u64, f64, Vec<f64>)]) -> Result<(), ExportError> {
    let mut out = writer(w, &["replicate", "t", "position"])?;
    for (rep, t, xs) in snapshots {
        for &x in xs {
            out.write_record([rep.to_string(), fmt_f64(*t), fmt_f64(x)])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waves_round_trip_exactly() {
        let recs = vec![
            WaveRecord { t: 1, w: 3, l: 4.9, censored: false },
            WaveRecord { t: 2, w: 1, l: 0.1 + 0.2, censored: true },
        ];
        let mut buf = Vec::new();
        write_waves(&mut buf, &recs).unwrap();
        assert_eq!(read_waves(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn malformed_rows_name_the_field() {
        let text = "t,W,L,censored\n1,2,x,0\n";
        match read_waves(text.as_bytes()) {
            Err(ExportError::Parse { line, field, .. }) => assert_eq!((line, field), (2, "L")),
            other => panic!("{other:?}"),
        }
    }
}
