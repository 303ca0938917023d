//! On-disk formats: series and window CSV files, binary snapshots and the run manifest.
//!
//! Snapshot files are a 64-byte little-endian header followed by the `u` and then the `v`
//! values as `f64` in storage order (axis 0 fastest):
//!
//! | offset | type     | content                                  |
//! |--------|----------|------------------------------------------|
//! | 0      | [u8; 8]  | magic `CHEMSNAP`                         |
//! | 8      | u32      | format version (1)                       |
//! | 12     | u32      | dimension N                              |
//! | 16     | [u32; 3] | cells per axis (1 beyond N)              |
//! | 28     | u32      | number of fields (2)                     |
//! | 32     | f64      | simulation time                          |
//! | 40     | [f64; 3] | box lengths (0 beyond N)                 |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chemotaxis_core::diagnostics::{DiagSeries, WindowRecord};
use chemotaxis_core::{Field, GridSpec, State};

use crate::error::{HarnessError, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CHEMSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_LEN: usize = 64;

/// Columns every series file starts with.
pub const SERIES_FIXED_COLUMNS: [&str; 10] = [
    "t",
    "mass",
    "sup_u",
    "sup_v",
    "min_u",
    "min_v",
    "entropy",
    "dirichlet",
    "sup_grad_v",
    "dissipation",
];

/// Shortest round-trip decimal, switching to exponent notation for very large or small values.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn series_header(p_list: &[f64], beta_list: &[f64]) -> Vec<String> {
    SERIES_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(p_list.iter().map(|p| format!("u_p{p}")))
        .chain(beta_list.iter().map(|b| format!("gradv_b{b}")))
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

pub fn write_series_csv(path: &Path, series: &DiagSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| HarnessError::csv(path, e);
    w.write_record(series_header(&series.p_list, &series.beta_list))
        .map_err(err)?;
    for r in &series.records {
        let row = [
            r.t,
            r.mass,
            r.sup_u,
            r.sup_v,
            r.min_u,
            r.min_v,
            r.entropy,
            r.dirichlet,
            r.sup_grad_v,
            r.dissipation,
        ]
        .into_iter()
        .chain(r.lp.iter().copied())
        .chain(r.grad_v_pow.iter().copied())
        .map(fmt_f64);
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_windows_csv(path: &Path, series: &DiagSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| HarnessError::csv(path, e);
    w.write_record(["t", "tau", "int_u_sq", "int_grad_v_sq", "int_lap_v_sq"])
        .map_err(err)?;
    for (r, win) in series.records.iter().zip(&series.windows) {
        let WindowRecord {
            u_sq,
            grad_v_sq,
            lap_v_sq,
        } = *win;
        w.write_record([r.t, series.tau, u_sq, grad_v_sq, lap_v_sq].map(fmt_f64))
            .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn encode_snapshot(state: &State) -> Vec<u8> {
    let spec = state.spec();
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 16 * spec.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.dim() as u32).to_le_bytes());
    for a in 0..3 {
        let n = spec.cells().get(a).copied().unwrap_or(1) as u32;
        out.extend_from_slice(&n.to_le_bytes());
    }
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    for a in 0..3 {
        let l = spec.lengths().get(a).copied().unwrap_or(0.0);
        out.extend_from_slice(&l.to_le_bytes());
    }
    debug_assert_eq!(out.len(), SNAPSHOT_HEADER_LEN);
    for x in state.u.values().iter().chain(state.v.values()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<State> {
    let bad = |msg: &str| HarnessError::Invalid(format!("snapshot: {msg}"));
    if bytes.len() < SNAPSHOT_HEADER_LEN || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("missing header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != SNAPSHOT_VERSION {
        return Err(bad("unsupported version"));
    }
    let dim = u32_at(12) as usize;
    if !(1..=3).contains(&dim) || u32_at(28) != 2 {
        return Err(bad("corrupt header"));
    }
    let cells: Vec<usize> = (0..dim).map(|a| u32_at(16 + 4 * a) as usize).collect();
    let lengths: Vec<f64> = (0..dim).map(|a| f64_at(40 + 8 * a)).collect();
    let spec = GridSpec::new(&cells, &lengths)?;
    let n = spec.len();
    if bytes.len() != SNAPSHOT_HEADER_LEN + 16 * n {
        return Err(bad("payload length does not match the header"));
    }
    let values: Vec<f64> = bytes[SNAPSHOT_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let u = Field::new(spec, values[..n].to_vec())?;
    let v = Field::new(spec, values[n..].to_vec())?;
    Ok(State::new(u, v, f64_at(32))?)
}

pub fn write_snapshot(path: &Path, state: &State) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&encode_snapshot(state))
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<State> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HarnessError::io(path, e))?;
    decode_snapshot(&bytes)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| HarnessError::io(path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(path, e))
}
