//! Save/load for symbols and operators.
//!
//! Each object is stored as a JSON manifest plus a raw sidecar file the
//! manifest references.  The sidecar holds little-endian float64 (re, im)
//! pairs in row-major (fiber, row, column) order, where a symbol's rows run
//! over position nodes and columns over frequency nodes, and an operator's
//! rows and columns both run over position nodes.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CordesError, Result};
use crate::grid::Grid;
use crate::module_space::FiberSet;
use crate::quantize::ModuleOp;
use crate::symbols::{Symbol, SymbolFamily};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridSpec {
    n: usize,
    per_axis: usize,
    half_width: f64,
}

impl GridSpec {
    fn of(grid: &Grid) -> Self {
        GridSpec {
            n: grid.dim(),
            per_axis: grid.per_axis(),
            half_width: grid.half_width(),
        }
    }

    fn build(&self) -> Result<Grid> {
        Grid::new(self.n, self.per_axis, self.half_width)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    kind: String,
    grid: GridSpec,
    fibers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<SymbolFamily>,
    data_file: String,
    /// number of complex entries in the sidecar
    count: usize,
}

const SYMBOL_KIND: &str = "symbol";
const OPERATOR_KIND: &str = "operator";

fn sidecar_path(manifest_path: &Path, data_file: &str) -> PathBuf {
    match manifest_path.parent() {
        Some(dir) => dir.join(data_file),
        None => PathBuf::from(data_file),
    }
}

fn data_file_name(manifest_path: &Path) -> String {
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("data");
    format!("{stem}.f64")
}

fn write_blocks(path: &Path, blocks: &[Array2<Complex64>]) -> Result<usize> {
    let count: usize = blocks.iter().map(|b| b.len()).sum();
    let mut bytes = Vec::with_capacity(count * 16);
    for block in blocks {
        for z in block.iter() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(count)
}

fn read_blocks(
    path: &Path,
    fibers: usize,
    rows: usize,
    cols: usize,
) -> Result<Vec<Array2<Complex64>>> {
    let bytes = fs::read(path)?;
    let expected = fibers * rows * cols;
    if bytes.len() != expected * 16 {
        return Err(CordesError::InvalidParam(format!(
            "sidecar {} holds {} bytes, expected {} ({} complex entries)",
            path.display(),
            bytes.len(),
            expected * 16,
            expected
        )));
    }
    let mut values = Vec::with_capacity(expected);
    for chunk in bytes.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[..8].try_into().expect("8-byte chunk"));
        let im = f64::from_le_bytes(chunk[8..].try_into().expect("8-byte chunk"));
        values.push(Complex64::new(re, im));
    }
    let mut blocks = Vec::with_capacity(fibers);
    for fi in 0..fibers {
        let slice = values[fi * rows * cols..(fi + 1) * rows * cols].to_vec();
        let block = Array2::from_shape_vec((rows, cols), slice)
            .map_err(|e| CordesError::InvalidParam(format!("sidecar reshape failed: {e}")))?;
        blocks.push(block);
    }
    Ok(blocks)
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text)?;
    Ok(())
}

fn read_manifest(path: &Path, expect_kind: &str) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.kind != expect_kind {
        return Err(CordesError::InvalidParam(format!(
            "{} is a `{}` manifest, expected `{expect_kind}`",
            path.display(),
            manifest.kind
        )));
    }
    Ok(manifest)
}

/// Write a symbol as `<path>` (JSON manifest) plus a raw sidecar next to it.
pub fn save_symbol(symbol: &Symbol, manifest_path: &Path) -> Result<()> {
    let data_file = data_file_name(manifest_path);
    let count = write_blocks(&sidecar_path(manifest_path, &data_file), symbol.samples())?;
    let manifest = Manifest {
        kind: SYMBOL_KIND.into(),
        grid: GridSpec::of(&symbol.grid),
        fibers: symbol.fibers.labels().to_vec(),
        family: symbol.family.clone(),
        data_file,
        count,
    };
    write_manifest(manifest_path, &manifest)
}

/// Read a symbol back; when the manifest records an analytic family, the
/// family and its descriptor are re-attached.
pub fn load_symbol(manifest_path: &Path) -> Result<Symbol> {
    let manifest = read_manifest(manifest_path, SYMBOL_KIND)?;
    let grid = manifest.grid.build()?;
    let fibers = FiberSet::new(manifest.fibers.clone())?;
    let nn = grid.total_nodes();
    let blocks = read_blocks(
        &sidecar_path(manifest_path, &manifest.data_file),
        fibers.len(),
        nn,
        nn,
    )?;
    let mut symbol = Symbol::from_samples(fibers.clone(), grid, blocks)?;
    if let Some(family) = manifest.family {
        symbol.descriptor = Some(family.descriptor(symbol.grid.dim(), fibers.len())?);
        symbol.family = Some(family);
    }
    Ok(symbol)
}

/// Write an operator as `<path>` (JSON manifest) plus a raw sidecar.
pub fn save_op(op: &ModuleOp, manifest_path: &Path) -> Result<()> {
    let data_file = data_file_name(manifest_path);
    let count = write_blocks(&sidecar_path(manifest_path, &data_file), op.matrices())?;
    let manifest = Manifest {
        kind: OPERATOR_KIND.into(),
        grid: GridSpec::of(&op.grid),
        fibers: op.fibers.labels().to_vec(),
        family: None,
        data_file,
        count,
    };
    write_manifest(manifest_path, &manifest)
}

/// Read an operator back from its manifest.
pub fn load_op(manifest_path: &Path) -> Result<ModuleOp> {
    let manifest = read_manifest(manifest_path, OPERATOR_KIND)?;
    let grid = manifest.grid.build()?;
    let fibers = FiberSet::new(manifest.fibers.clone())?;
    let nn = grid.total_nodes();
    let blocks = read_blocks(
        &sidecar_path(manifest_path, &manifest.data_file),
        fibers.len(),
        nn,
        nn,
    )?;
    ModuleOp::from_matrices(fibers, grid, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::quantize;
    use crate::symbols::sample_family;

    fn sample_symbol() -> Symbol {
        let grid = Grid::new(1, 16, 6.0).unwrap();
        let fibers = FiberSet::new(vec!["a".into(), "b".into()]).unwrap();
        sample_family(
            &SymbolFamily::Gaussian {
                width: 1.0,
                amps: Some(vec![1.0, 2.0]),
            },
            &grid,
            &fibers,
        )
        .unwrap()
    }

    #[test]
    fn symbol_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sym.json");
        let sym = sample_symbol();
        save_symbol(&sym, &path).unwrap();
        let back = load_symbol(&path).unwrap();
        assert_eq!(back.grid, sym.grid);
        assert_eq!(back.fibers, sym.fibers);
        for (a, b) in sym.samples().iter().zip(back.samples()) {
            assert_eq!(a, b); // byte-exact payload
        }
        assert!(back.descriptor.is_some());
        assert_eq!(back.family, sym.family);
    }

    #[test]
    fn operator_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.json");
        let op = quantize(&sample_symbol()).unwrap();
        save_op(&op, &path).unwrap();
        let back = load_op(&path).unwrap();
        assert_eq!(back.grid, op.grid);
        for (a, b) in op.matrices().iter().zip(back.matrices()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sym.json");
        save_symbol(&sample_symbol(), &path).unwrap();
        assert!(load_op(&path).is_err());
    }

    #[test]
    fn truncated_sidecar_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sym.json");
        let sym = sample_symbol();
        save_symbol(&sym, &path).unwrap();
        let data = dir.path().join("sym.f64");
        let bytes = fs::read(&data).unwrap();
        fs::write(&data, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_symbol(&path).is_err());
    }

    #[test]
    fn descriptor_free_symbol_loads_without_family() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sym.json");
        let sym = sample_symbol();
        let stripped =
            Symbol::from_samples(sym.fibers.clone(), sym.grid.clone(), sym.samples().to_vec())
                .unwrap();
        save_symbol(&stripped, &path).unwrap();
        let back = load_symbol(&path).unwrap();
        assert!(back.descriptor.is_none());
        assert!(back.family.is_none());
    }
}
