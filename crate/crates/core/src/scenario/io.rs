//! Time-series CSV and binary snapshots.
//!
//! Snapshot layout, all little endian: magic `NPNS1`, `u32` nx, ny, species count,
//! `f64` lx, ly, t, then the fields `c_1..c_N, Φ` (nx·ny each), `u` ((nx+1)·ny),
//! `v` (nx·(ny+1)) and `p` (nx·ny), each row-major with x fastest.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{NpnsError, Result};
use crate::fields::{Grid2D, ScalarField, VectorField};
use crate::state::{FlowState, SimulationState};

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"NPNS1";

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    pub t: f64,
    pub total_energy: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    pub masses: Vec<f64>,
    pub entropies: Vec<f64>,
    pub potential_term: f64,
    pub dist_l2: Vec<f64>,
    pub grad_tilde_l2: Vec<f64>,
    /// Written as `NaN` when absent.
    pub modified_energy: Option<f64>,
}

pub fn timeseries_header(n_species: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "total_energy".into(), "kinetic".into(), "dissipation".into()];
    let per = |h: &mut Vec<String>, prefix: &str| {
        h.extend((1..=n_species).map(|i| format!("{prefix}_{i}")));
    };
    per(&mut h, "mass");
    per(&mut h, "entropy");
    h.push("potential_term".into());
    per(&mut h, "dist_l2");
    per(&mut h, "grad_tilde_l2");
    h.push("modified_energy".into());
    h
}

/// Streams rows to a CSV sink; the header is written on construction.
pub struct TimeseriesWriter<W: Write> {
    inner: csv::Writer<W>,
    n_species: usize,
}

impl<W: Write> TimeseriesWriter<W> {
    pub fn new(sink: W, n_species: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(timeseries_header(n_species))?;
        Ok(Self { inner, n_species })
    }

    pub fn write(&mut self, row: &TimeseriesRow) -> Result<()> {
        let n = self.n_species;
        for v in [&row.masses, &row.entropies, &row.dist_l2, &row.grad_tilde_l2] {
            if v.len() != n {
                return Err(NpnsError::Shape(format!(
                    "timeseries row has {} per-species entries, expected {n}",
                    v.len()
                )));
            }
        }
        let mut rec: Vec<String> = Vec::with_capacity(6 + 4 * n);
        // `Display` for f64 prints the shortest string that parses back to the same bits.
        rec.extend([row.t, row.total_energy, row.kinetic, row.dissipation].map(|x| x.to_string()));
        rec.extend(row.masses.iter().map(f64::to_string));
        rec.extend(row.entropies.iter().map(f64::to_string));
        rec.push(row.potential_term.to_string());
        rec.extend(row.dist_l2.iter().map(f64::to_string));
        rec.extend(row.grad_tilde_l2.iter().map(f64::to_string));
        rec.push(row.modified_energy.unwrap_or(f64::NAN).to_string());
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| NpnsError::Io(e.into_error()))
    }
}

/// Writes all rows at once.
pub fn emit_timeseries<W: Write>(sink: W, n_species: usize, rows: &[TimeseriesRow]) -> Result<W> {
    let mut w = TimeseriesWriter::new(sink, n_species)?;
    for r in rows {
        w.write(r)?;
    }
    w.into_inner()
}

/// Parses a file produced by [`emit_timeseries`].
pub fn read_timeseries<R: Read>(source: R) -> Result<Vec<TimeseriesRow>> {
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers()?.clone();
    let cols = headers.len();
    if cols < 6 || (cols - 6) % 4 != 0 {
        return Err(NpnsError::Format(format!("unexpected column count {cols}")));
    }
    let n = (cols - 6) / 4;
    let expected = timeseries_header(n);
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(NpnsError::Format("timeseries header mismatch".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| NpnsError::Format(format!("bad number {s:?}"))))
            .collect::<Result<_>>()?;
        let slice = |start: usize| vals[start..start + n].to_vec();
        let modified = vals[cols - 1];
        rows.push(TimeseriesRow {
            t: vals[0],
            total_energy: vals[1],
            kinetic: vals[2],
            dissipation: vals[3],
            masses: slice(4),
            entropies: slice(4 + n),
            potential_term: vals[4 + 2 * n],
            dist_l2: slice(5 + 2 * n),
            grad_tilde_l2: slice(5 + 3 * n),
            modified_energy: if modified.is_nan() { None } else { Some(modified) },
        });
    }
    Ok(rows)
}

fn put_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serializes a state into the snapshot format.
pub fn encode_snapshot(state: &SimulationState) -> Vec<u8> {
    let g = state.grid();
    let n_cells = g.n_cells();
    let mut buf = Vec::with_capacity(
        5 + 12 + 24 + 8 * (n_cells * (state.c.len() + 2) + g.n_u_faces() + g.n_v_faces()),
    );
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    for d in [g.nx as u32, g.ny as u32, state.c.len() as u32] {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    put_f64s(&mut buf, &[g.lx, g.ly, state.t]);
    for c in &state.c {
        put_f64s(&mut buf, &c.values);
    }
    put_f64s(&mut buf, &state.phi.values);
    put_f64s(&mut buf, &state.flow.velocity.u);
    put_f64s(&mut buf, &state.flow.velocity.v);
    put_f64s(&mut buf, &state.flow.pressure.values);
    buf
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.data.len() - self.pos < n {
            return Err(NpnsError::Format(format!(
                "snapshot truncated while reading {what} (need {n} bytes at offset {}, file has {})",
                self.pos,
                self.data.len()
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(8 * n, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

/// Inverse of [`encode_snapshot`].
pub fn decode_snapshot(data: &[u8]) -> Result<SimulationState> {
    let mut cur = Cursor { data, pos: 0 };
    let magic = cur.take(5, "magic")?;
    if magic != SNAPSHOT_MAGIC {
        return Err(NpnsError::Format(format!(
            "bad magic {:?}, expected \"NPNS1\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let nx = cur.u32("nx")? as usize;
    let ny = cur.u32("ny")? as usize;
    let ns = cur.u32("species count")? as usize;
    let dims = cur.f64s(3, "header")?;
    let grid = Grid2D::new(nx, ny, dims[0], dims[1])
        .map_err(|e| NpnsError::Format(format!("invalid snapshot dimensions: {e}")))?;
    let n_cells = grid.n_cells();
    let expected = 5 + 12 + 24 + 8 * (n_cells * (ns + 2) + grid.n_u_faces() + grid.n_v_faces());
    if data.len() > expected {
        return Err(NpnsError::Format(format!(
            "snapshot has {} trailing bytes",
            data.len() - expected
        )));
    }
    let mut c = Vec::with_capacity(ns);
    for i in 0..ns {
        c.push(ScalarField::from_values(grid, cur.f64s(n_cells, &format!("c_{}", i + 1))?)?);
    }
    let phi = ScalarField::from_values(grid, cur.f64s(n_cells, "phi")?)?;
    let u = cur.f64s(grid.n_u_faces(), "u")?;
    let v = cur.f64s(grid.n_v_faces(), "v")?;
    let p = ScalarField::from_values(grid, cur.f64s(n_cells, "p")?)?;
    Ok(SimulationState {
        c,
        phi,
        flow: FlowState {
            velocity: VectorField::from_components(grid, u, v)?,
            pressure: p,
        },
        t: dims[2],
    })
}

pub fn save_snapshot(path: &Path, state: &SimulationState) -> Result<()> {
    std::fs::write(path, encode_snapshot(state))?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<SimulationState> {
    decode_snapshot(&std::fs::read(path)?)
}
