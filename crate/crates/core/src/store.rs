//! On-disk formats.
//!
//! A database is a directory holding `manifest.json` plus two little-endian
//! `f64` files per scenario: the waveforms (`N_g × N_t`, gauge-major) and the
//! inundation grid (`nx × ny`, row-major). Bases and coefficient sets use a
//! small binary container: an 8-byte magic, a `u32` version, `u64` dimensions,
//! then the `f64` payload.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pod::{CoefficientSet, PodBasis};
use crate::scenario::{
    resample_series, GaugeSeries, GridGeometry, InundationGrid, ScenarioDatabase, ScenarioRecord,
};

pub const MANIFEST: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;
const BASIS_MAGIC: &[u8; 8] = b"TSDBASIS";
const COEFF_MAGIC: &[u8; 8] = b"TSDCOEFF";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: u64,
    pub waveforms: String,
    pub inundation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub n_scenarios: usize,
    pub n_gauges: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub grid: GridGeometry,
    pub scenarios: Vec<ScenarioEntry>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn f64s_to_bytes(values: impl IntoIterator<Item = f64>, out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn bytes_to_f64s(path: &Path, bytes: &[u8], expected: usize) -> Result<Vec<f64>> {
    if bytes.len() != expected * 8 {
        return Err(format_err(
            path,
            format!("expected {} bytes, found {}", expected * 8, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_grid(path: &Path, grid: &InundationGrid) -> Result<()> {
    let mut buf = Vec::with_capacity(grid.depths().len() * 8);
    f64s_to_bytes(grid.depths().iter().copied(), &mut buf);
    write_file(path, &buf)
}

pub fn read_grid(path: &Path, nx: usize, ny: usize) -> Result<InundationGrid> {
    let values = bytes_to_f64s(path, &read_file(path)?, nx * ny)?;
    InundationGrid::new(nx, ny, values).map_err(|e| format_err(path, e.to_string()))
}

/// Writes `db` into `dir`, creating it if needed.
pub fn save_database(db: &ScenarioDatabase, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(db.len());
    let mut buf = Vec::new();
    for s in db.scenarios() {
        let entry = ScenarioEntry {
            id: s.scenario_id,
            waveforms: format!("s{:06}_wave.bin", s.scenario_id),
            inundation: format!("s{:06}_inun.bin", s.scenario_id),
        };
        buf.clear();
        for g in &s.waveforms {
            f64s_to_bytes(g.samples.iter().copied(), &mut buf);
        }
        write_file(&dir.join(&entry.waveforms), &buf)?;
        write_grid(&dir.join(&entry.inundation), &s.inundation)?;
        entries.push(entry);
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        n_scenarios: db.len(),
        n_gauges: db.n_gauges(),
        n_steps: db.n_steps(),
        dt: db.dt(),
        grid: db.grid().clone(),
        scenarios: entries,
    };
    let path = dir.join(MANIFEST);
    write_file(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let manifest: Manifest = serde_json::from_slice(&read_file(&path)?)
        .map_err(|e| format_err(&path, e.to_string()))?;
    if manifest.version != FORMAT_VERSION {
        return Err(format_err(&path, format!("unsupported version {}", manifest.version)));
    }
    if manifest.n_scenarios != manifest.scenarios.len() {
        return Err(format_err(
            &path,
            format!(
                "declares {} scenarios but lists {}",
                manifest.n_scenarios,
                manifest.scenarios.len()
            ),
        ));
    }
    Ok(manifest)
}

/// Loads a database directory; risk indices are recomputed from the raw data.
pub fn load_database(dir: &Path) -> Result<ScenarioDatabase> {
    let m = read_manifest(dir)?;
    let mut scenarios = Vec::with_capacity(m.n_scenarios);
    for e in &m.scenarios {
        let wave_path = dir.join(&e.waveforms);
        let values = bytes_to_f64s(&wave_path, &read_file(&wave_path)?, m.n_gauges * m.n_steps)?;
        let waveforms = values
            .chunks_exact(m.n_steps.max(1))
            .take(m.n_gauges)
            .enumerate()
            .map(|(g, c)| GaugeSeries::new(g, c.to_vec()))
            .collect();
        let inundation = read_grid(&dir.join(&e.inundation), m.grid.nx, m.grid.ny)?;
        scenarios.push(ScenarioRecord::new(e.id, waveforms, inundation)?);
    }
    ScenarioDatabase::new(scenarios, m.n_gauges, m.n_steps, m.dt, m.grid)
}

/// Reads `time,gauge_0,gauge_1,…` and resamples every gauge onto the database grid.
pub fn read_observation_csv(path: &Path, dt: f64, horizon: f64) -> Result<Vec<GaugeSeries>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("time") || headers.len() < 2 {
        return Err(format_err(path, "header must be time,gauge_0,..."));
    }
    let n_gauges = headers.len() - 1;
    let mut columns: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_gauges];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| format_err(path, format!("bad value in row {}, column {i}", line + 1)))
        };
        let t = parse(0)?;
        for (g, col) in columns.iter_mut().enumerate() {
            col.push((t, parse(g + 1)?));
        }
    }
    columns
        .iter()
        .enumerate()
        .map(|(g, raw)| resample_series(g, raw, dt, horizon))
        .collect()
}

/// Writes uniformly sampled series in the format [`read_observation_csv`] accepts.
pub fn write_observation_csv(path: &Path, series: &[GaugeSeries], dt: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string()];
    header.extend((0..series.len()).map(|g| format!("gauge_{g}")));
    w.write_record(&header)?;
    let n = series.first().map_or(0, GaugeSeries::len);
    for k in 0..n {
        let mut rec = vec![((k + 1) as f64 * dt).to_string()];
        rec.extend(series.iter().map(|s| s.samples[k].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn header(magic: &[u8; 8], dims: &[u64]) -> Vec<u8> {
    let mut buf = magic.to_vec();
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for d in dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    buf
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn open(path: &'a Path, bytes: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        let mut c = Cursor { path, bytes };
        if c.take(8)? != magic {
            return Err(format_err(path, "bad magic"));
        }
        let version = u32::from_le_bytes(c.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(format_err(path, format!("unsupported version {version}")));
        }
        Ok(c)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(format_err(self.path, "truncated file"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn dim(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| format_err(self.path, "dimension overflow"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| format_err(self.path, "dimension overflow"))?;
        let chunk = self.take(bytes)?;
        bytes_to_f64s(self.path, chunk, n)
    }

    fn finish(self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(format_err(self.path, "trailing bytes"))
        }
    }
}

/// Modes (column-major) and the full eigenvalue spectrum.
pub fn save_basis(path: &Path, basis: &PodBasis) -> Result<()> {
    let modes = basis.modes();
    let mut buf = header(
        BASIS_MAGIC,
        &[modes.nrows() as u64, modes.ncols() as u64, basis.eigenvalues().len() as u64],
    );
    f64s_to_bytes(basis.eigenvalues().iter().copied(), &mut buf);
    f64s_to_bytes(modes.iter().copied(), &mut buf);
    write_file(path, &buf)
}

pub fn load_basis(path: &Path) -> Result<PodBasis> {
    let bytes = read_file(path)?;
    let mut c = Cursor::open(path, &bytes, BASIS_MAGIC)?;
    let (n_g, r, n_eig) = (c.dim()?, c.dim()?, c.dim()?);
    let eigenvalues = c.f64s(n_eig)?;
    let modes = DMatrix::from_vec(n_g, r, c.f64s(n_g * r)?);
    c.finish()?;
    PodBasis::from_parts(modes, eigenvalues).map_err(|e| format_err(path, e.to_string()))
}

pub fn save_coefficients(path: &Path, coeffs: &CoefficientSet) -> Result<()> {
    let mut buf = header(
        COEFF_MAGIC,
        &[coeffs.len() as u64, coeffs.rank() as u64, coeffs.n_steps() as u64],
    );
    for &id in coeffs.ids() {
        buf.extend_from_slice(&id.to_le_bytes());
    }
    for j in 0..coeffs.len() {
        f64s_to_bytes(coeffs.matrix(j).iter().copied(), &mut buf);
    }
    write_file(path, &buf)
}

pub fn load_coefficients(path: &Path) -> Result<CoefficientSet> {
    let bytes = read_file(path)?;
    let mut c = Cursor::open(path, &bytes, COEFF_MAGIC)?;
    let (n_s, r, n_t) = (c.dim()?, c.dim()?, c.dim()?);
    let ids = (0..n_s).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
    let alphas = (0..n_s)
        .map(|_| Ok(DMatrix::from_vec(r, n_t, c.f64s(r * n_t)?)))
        .collect::<Result<Vec<_>>>()?;
    c.finish()?;
    CoefficientSet::from_parts(ids, alphas).map_err(|e| format_err(path, e.to_string()))
}

/// `r,c` for every mode count `r = 1..N_g`.
pub fn write_contribution_csv(path: &Path, basis: &PodBasis) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "c"])?;
    for (i, c) in basis.contribution().iter().enumerate() {
        w.write_record([(i + 1).to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `step,scenario_id,prob` for every recorded posterior (`step` is 1-based).
pub fn write_posterior_log(path: &Path, ids: &[u64], history: &[Vec<f64>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "step,scenario_id,prob").map_err(io)?;
    for (k, probs) in history.iter().enumerate() {
        for (id, p) in ids.iter().zip(probs) {
            writeln!(out, "{},{id},{p}", k + 1).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
