//! On-disk formats: snapshots, diagnostics CSV, study tables.
//!
//! Every file carries `format_version` and the hash of the config that
//! produced it. Floats are written with Rust's shortest round-trip `Display`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::integrator::DiagnosticsRow;
use crate::phase_space::{Distribution, NormKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub format_version: u32,
    #[serde(default)]
    pub config_hash: String,
    pub d: usize,
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    pub t: f64,
    pub rho0: f64,
}

/// Sidecar path of a snapshot: `name.bin` -> `name.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `f` as raw little-endian f64 plus a JSON sidecar.
pub fn write_snapshot(path: &Path, f: &Distribution, t: f64, config_hash: &str) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * f.values.len());
    for v in &f.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let g = f.geometry;
    let meta = SnapshotMeta {
        format_version: crate::FORMAT_VERSION,
        config_hash: config_hash.to_string(),
        d: g.d,
        nx: g.nx,
        nv: g.nv,
        v_max: g.v_max,
        t,
        rho0: f.rho0,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_snapshot_meta(path: &Path) -> Result<SnapshotMeta> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side)?;
    let meta: SnapshotMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
    if meta.format_version != crate::FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: format_version {} unsupported (expected {})",
            side.display(),
            meta.format_version,
            crate::FORMAT_VERSION
        )));
    }
    Ok(meta)
}

pub fn read_snapshot(path: &Path) -> Result<Distribution> {
    let meta = read_snapshot_meta(path)?;
    let geometry = GridGeometry::new(meta.d, meta.nx, meta.nv, meta.v_max)
        .map_err(|e| Error::Format(format!("{}: {e}", sidecar_path(path).display())))?;
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * geometry.len() {
        return Err(Error::Format(format!(
            "{}: {} bytes, sidecar implies {}",
            path.display(),
            bytes.len(),
            8 * geometry.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let f = Distribution::new(geometry, values)?;
    if (f.rho0 - meta.rho0).abs() > 1e-12 * meta.rho0.abs().max(1.0) {
        log::warn!("{}: sidecar rho0 {} differs from recomputed {}", path.display(), meta.rho0, f.rho0);
    }
    Ok(f)
}

pub fn sobolev_label(key: &NormKey) -> String {
    format!("H{}_r{}", key.k, key.weight)
}

pub fn rho_label(order: f64) -> String {
    format!("rho_H{order}")
}

pub fn header_comment(config_hash: &str) -> String {
    format!("# format_version={} config_hash={}\n", crate::FORMAT_VERSION, config_hash)
}

/// Incremental writer for the diagnostics CSV.
pub struct DiagnosticsWriter {
    out: fs::File,
    d: usize,
    sobolev: Vec<NormKey>,
    rho: Vec<f64>,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path, config_hash: &str, d: usize, sobolev: &[NormKey], rho: &[f64]) -> Result<Self> {
        let mut out = fs::File::create(path)?;
        out.write_all(diagnostics_header(config_hash, d, sobolev, rho).as_bytes())?;
        Ok(Self { out, d, sobolev: sobolev.to_vec(), rho: rho.to_vec() })
    }

    pub fn append(&mut self, row: &DiagnosticsRow) -> Result<()> {
        let line = diagnostics_line(row, self.d, &self.sobolev, &self.rho)?;
        self.out.write_all(line.as_bytes())?;
        Ok(())
    }
}

pub fn diagnostics_header(config_hash: &str, d: usize, sobolev: &[NormKey], rho: &[f64]) -> String {
    let mut cols = vec!["t".to_string(), "mass".to_string()];
    for i in 0..d {
        cols.push(format!("momentum_v{}", i + 1));
    }
    cols.extend(["L2", "energy_kinetic", "energy_potential"].map(String::from));
    cols.extend(sobolev.iter().map(sobolev_label));
    cols.extend(rho.iter().map(|&m| rho_label(m)));
    header_comment(config_hash) + &cols.join(",") + "\n"
}

pub fn diagnostics_line(row: &DiagnosticsRow, d: usize, sobolev: &[NormKey], rho: &[f64]) -> Result<String> {
    let mut line = format!("{},{}", row.t, row.mass);
    for p in row.momentum.iter().take(d) {
        write!(line, ",{p}").expect("string write");
    }
    write!(line, ",{},{},{}", row.l2, row.energy_kinetic, row.energy_potential).expect("string write");
    for key in sobolev {
        let v = row.norms.sobolev(key.k, key.weight).ok_or_else(|| Error::MissingNorm {
            t: row.t,
            what: sobolev_label(key),
        })?;
        write!(line, ",{v}").expect("string write");
    }
    for &m in rho {
        let v = row.norms.rho(m).ok_or_else(|| Error::MissingNorm { t: row.t, what: rho_label(m) })?;
        write!(line, ",{v}").expect("string write");
    }
    line.push('\n');
    Ok(line)
}

/// Parsed CSV: header hash, column names, numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub config_hash: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    parse_table(&fs::read_to_string(path)?)
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut config_hash = None;
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(comment) = line.strip_prefix('#') {
            for field in comment.split_whitespace() {
                if let Some(h) = field.strip_prefix("config_hash=") {
                    config_hash = Some(h.to_string());
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(str::to_string).collect()),
            Some(cols) => {
                let row = line
                    .split(',')
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
                if row.len() != cols.len() {
                    return Err(Error::Format(format!("line {}: {} fields, header has {}", n + 1, row.len(), cols.len())));
                }
                rows.push(row);
            }
        }
    }
    Ok(Table { config_hash, columns: columns.ok_or_else(|| Error::Format("no header row".into()))?, rows })
}

/// Writes a numeric table with the standard header comment.
pub fn write_table(path: &Path, config_hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, format_table(config_hash, columns, rows))?;
    Ok(())
}

pub fn format_table(config_hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header_comment(config_hash) + &columns.join(",") + "\n";
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s += &cells.join(",");
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub format_version: u32,
    pub study: String,
    pub config_hash: String,
    pub eps_list: Vec<f64>,
    pub grid: GridGeometry,
    pub dt: f64,
    /// SHA-256 over the hashes and lengths of the input files.
    pub content_address: String,
    pub inputs: Vec<String>,
    pub csv: String,
}

/// Content address of a set of byte strings, order-sensitive.
pub fn content_address(inputs: &[&[u8]]) -> String {
    let mut outer = Sha256::new();
    for bytes in inputs {
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", bytes.len()));
        h.update(bytes);
        outer.update(h.finalize());
    }
    hex::encode(outer.finalize())
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_study(dir: &Path, stem: &str, columns: &[&str], rows: &[Vec<f64>], mut manifest: StudyManifest) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    write_table(&csv_path, &manifest.config_hash, columns, rows)?;
    manifest.csv = format!("{stem}.csv");
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(csv_path)
}

/// Reads a study CSV and its manifest, refusing mismatched hashes.
pub fn read_study(csv_path: &Path) -> Result<(Table, StudyManifest)> {
    let table = read_table(csv_path)?;
    let manifest: StudyManifest = serde_json::from_str(&fs::read_to_string(csv_path.with_extension("json"))?)?;
    if table.config_hash.as_deref() != Some(manifest.config_hash.as_str()) {
        return Err(Error::Format(format!(
            "{}: config hash {:?} does not match manifest {}",
            csv_path.display(),
            table.config_hash,
            manifest.config_hash
        )));
    }
    Ok((table, manifest))
}
