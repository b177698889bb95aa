//! Parameter checkpoints: a small versioned binary format plus a JSON
//! export for inspection.
//!
//! Layout: magic "AVCP", u32 version, u8 kind (0 = GCN, 1 = dense),
//! then two matrices, each as u64 rows, u64 cols, row-major f64 LE.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{GcnParams, MlpParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AVCP";
const VERSION: u32 = 1;

fn write_matrix(w: &mut impl Write, m: &Array2<f64>) -> Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for &x in m.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_matrix(r: &mut impl Read) -> Result<Array2<f64>> {
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let rows = u64::from_le_bytes(buf8) as usize;
    r.read_exact(&mut buf8)?;
    let cols = u64::from_le_bytes(buf8) as usize;
    if rows.checked_mul(cols).map_or(true, |t| t > 1 << 30) {
        return Err(Error::Checkpoint(format!("implausible matrix shape {rows}x{cols}")));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut buf8)?;
        data.push(f64::from_le_bytes(buf8));
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

fn save(path: &Path, kind: u8, w1: &Array2<f64>, w2: &Array2<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[kind])?;
    write_matrix(&mut out, w1)?;
    write_matrix(&mut out, w2)?;
    out.flush()?;
    Ok(())
}

fn load(path: &Path, want_kind: u8) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("{}: not a checkpoint file", path.display())));
    }
    let mut ver = [0u8; 4];
    input.read_exact(&mut ver)?;
    if u32::from_le_bytes(ver) != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            u32::from_le_bytes(ver)
        )));
    }
    let mut kind = [0u8; 1];
    input.read_exact(&mut kind)?;
    if kind[0] != want_kind {
        return Err(Error::Checkpoint(format!(
            "checkpoint kind {} does not match expected {want_kind}",
            kind[0]
        )));
    }
    Ok((read_matrix(&mut input)?, read_matrix(&mut input)?))
}

pub fn save_gcn_checkpoint(path: impl AsRef<Path>, params: &GcnParams) -> Result<()> {
    save(path.as_ref(), 0, &params.w1, &params.w2)
}

pub fn load_gcn_checkpoint(path: impl AsRef<Path>) -> Result<GcnParams> {
    let (w1, w2) = load(path.as_ref(), 0)?;
    Ok(GcnParams { w1, w2 })
}

pub fn save_mlp_checkpoint(path: impl AsRef<Path>, params: &MlpParams) -> Result<()> {
    save(path.as_ref(), 1, &params.w1, &params.w2)
}

pub fn load_mlp_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams> {
    let (w1, w2) = load(path.as_ref(), 1)?;
    Ok(MlpParams { w1, w2 })
}

/// Human-readable export of the GCN weights.
pub fn export_gcn_json(path: impl AsRef<Path>, params: &GcnParams) -> Result<()> {
    let to_rows = |m: &Array2<f64>| -> Vec<Vec<f64>> {
        m.rows().into_iter().map(|r| r.to_vec()).collect()
    };
    let value = serde_json::json!({
        "format": "gcn-2layer",
        "version": VERSION,
        "w1_shape": [params.w1.nrows(), params.w1.ncols()],
        "w2_shape": [params.w2.nrows(), params.w2.ncols()],
        "w1": to_rows(&params.w1),
        "w2": to_rows(&params.w2),
    });
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    serde_json::to_writer(&mut out, &value).map_err(|e| Error::Checkpoint(e.to_string()))?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcn_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.avcp");
        let params = GcnParams::init(7, 4, 3, 42);
        save_gcn_checkpoint(&path, &params).unwrap();
        assert_eq!(load_gcn_checkpoint(&path).unwrap(), params);
    }

    #[test]
    fn mlp_round_trip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.avcp");
        let params = MlpParams::init(3, 5, 2, 1);
        save_mlp_checkpoint(&path, &params).unwrap();
        assert_eq!(load_mlp_checkpoint(&path).unwrap(), params);
        assert!(load_gcn_checkpoint(&path).is_err()); // wrong kind tag
    }

    #[test]
    fn garbage_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(load_gcn_checkpoint(&path).is_err());
    }

    #[test]
    fn json_export_writes_valid_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        export_gcn_json(&path, &GcnParams::init(2, 3, 2, 0)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["w1_shape"][0], 2);
    }
}
