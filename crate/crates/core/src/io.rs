//! Matrix files: a raw little-endian `f64` row-major payload plus a JSON
//! sidecar at `<payload>.json` holding size, provenance and a SHA-256 of the
//! payload bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, KernelMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    #[serde(rename = "N")]
    pub n: usize,
    pub circuit_id: Option<String>,
    pub width: Option<usize>,
    pub layers: Option<usize>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub checksum: String,
}

impl MatrixSidecar {
    fn meta(&self) -> Option<KernelMeta> {
        Some(KernelMeta {
            circuit_id: self.circuit_id.clone()?,
            width: self.width?,
            layers: self.layers?,
            shots: self.shots?,
            seed: self.seed,
        })
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn payload(values: &DMatrix<f64>) -> Vec<u8> {
    let n = values.nrows();
    let mut bytes = Vec::with_capacity(n * values.ncols() * 8);
    for l in 0..n {
        for m in 0..values.ncols() {
            bytes.extend_from_slice(&values[(l, m)].to_le_bytes());
        }
    }
    bytes
}

fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// SHA-256 of the row-major little-endian payload.
pub fn checksum(values: &DMatrix<f64>) -> String {
    digest(&payload(values))
}

pub fn write_matrix(path: &Path, values: &DMatrix<f64>, meta: Option<&KernelMeta>) -> Result<()> {
    if !values.is_square() {
        return Err(Error::validation("only square matrices are stored"));
    }
    let bytes = payload(values);
    let sidecar = MatrixSidecar {
        n: values.nrows(),
        circuit_id: meta.map(|m| m.circuit_id.clone()),
        width: meta.map(|m| m.width),
        layers: meta.map(|m| m.layers),
        shots: meta.map(|m| m.shots),
        seed: meta.and_then(|m| m.seed),
        checksum: digest(&bytes),
    };
    std::fs::write(path, &bytes)?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a matrix and its sidecar, checking size and checksum.
pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, MatrixSidecar)> {
    let bytes = std::fs::read(path)?;
    let sidecar: MatrixSidecar =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let n = sidecar.n;
    if bytes.len() != n * n * 8 {
        return Err(Error::validation(format!(
            "payload has {} bytes, expected {} for N = {n}",
            bytes.len(),
            n * n * 8
        )));
    }
    if digest(&bytes) != sidecar.checksum {
        return Err(Error::validation("matrix payload checksum mismatch"));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((DMatrix::from_row_slice(n, n, &values), sidecar))
}

pub fn write_kernel(path: &Path, kernel: &KernelMatrix) -> Result<()> {
    write_matrix(path, kernel.values(), Some(kernel.meta()))
}

pub fn read_kernel(path: &Path) -> Result<KernelMatrix> {
    let (values, sidecar) = read_matrix(path)?;
    let meta = sidecar
        .meta()
        .ok_or_else(|| Error::validation("sidecar lacks kernel provenance fields"))?;
    KernelMatrix::new(values, meta)
}

/// Plain CSV dump, one matrix row per line.
pub fn write_matrix_csv<W: Write>(out: W, values: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for l in 0..values.nrows() {
        w.write_record(values.row(l).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
