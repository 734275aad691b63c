//! Binary serialization of reduced-basis bundles.
//!
//! Format: the magic bytes `RBMB`, a little-endian `u32` version, then a
//! sequence of named blocks. Each block is
//!
//! ```text
//! name_len: u32 | name: utf-8 bytes | ndim: u32 | dims: ndim × u64 | data: Π dims × f64
//! ```
//!
//! with every integer and float little-endian. Matrices are stored
//! column-major (nalgebra's native layout) with dims `[nrows, ncols]`.
//! Serialization is deterministic — writing a loaded bundle reproduces the
//! input byte for byte — and the greedy history is encoded numerically so
//! the container stays homogeneous.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{RbMpcError, Result};
use crate::rb::{GreedyRecord, ReducedBasisBundle};

const MAGIC: &[u8; 4] = b"RBMB";
const VERSION: u32 = 1;

fn write_block<W: Write>(w: &mut W, name: &str, dims: &[u64], data: &[f64]) -> Result<()> {
    let expect: u64 = dims.iter().product();
    debug_assert_eq!(expect as usize, data.len());
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

struct Block {
    dims: Vec<u64>,
    data: Vec<f64>,
}

impl Block {
    fn matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        if self.dims.len() != 2 {
            return Err(RbMpcError::BundleFormat(format!(
                "block '{name}': expected 2-d, got {}-d",
                self.dims.len()
            )));
        }
        Ok(DMatrix::from_column_slice(
            self.dims[0] as usize,
            self.dims[1] as usize,
            &self.data,
        ))
    }

    fn vector(&self, name: &str) -> Result<Vec<f64>> {
        if self.dims.len() != 1 {
            return Err(RbMpcError::BundleFormat(format!(
                "block '{name}': expected 1-d, got {}-d",
                self.dims.len()
            )));
        }
        Ok(self.data.clone())
    }
}

fn read_exact_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_blocks<R: Read>(r: &mut R) -> Result<BTreeMap<String, Block>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(RbMpcError::BundleFormat(format!(
            "bad magic bytes {magic:?}"
        )));
    }
    let version = read_exact_u32(r)?;
    if version != VERSION {
        return Err(RbMpcError::BundleFormat(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let mut out = BTreeMap::new();
    loop {
        let mut b4 = [0u8; 4];
        match r.read_exact(&mut b4) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(b4) as usize;
        if name_len > 4096 {
            return Err(RbMpcError::BundleFormat(format!(
                "implausible block-name length {name_len}"
            )));
        }
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| RbMpcError::BundleFormat(format!("block name not utf-8: {e}")))?;
        let ndim = read_exact_u32(r)? as usize;
        if ndim > 8 {
            return Err(RbMpcError::BundleFormat(format!(
                "block '{name}': implausible rank {ndim}"
            )));
        }
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            dims.push(u64::from_le_bytes(b8));
        }
        let count: u64 = dims.iter().product();
        if count > (1 << 32) {
            return Err(RbMpcError::BundleFormat(format!(
                "block '{name}': implausible element count {count}"
            )));
        }
        let mut data = Vec::with_capacity(count as usize);
        let mut b8 = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        if out.insert(name.clone(), Block { dims, data }).is_some() {
            return Err(RbMpcError::BundleFormat(format!("duplicate block '{name}'")));
        }
    }
    Ok(out)
}

/// Serializes a bundle into the versioned block container.
pub fn bundle_to_bytes(bundle: &ReducedBasisBundle) -> Result<Vec<u8>> {
    let mut w: Vec<u8> = Vec::new();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_block(
        &mut w,
        "dims",
        &[4],
        &[
            bundle.n_truth as f64,
            bundle.m_controls as f64,
            bundle.q_a as f64,
            bundle.q_yd as f64,
        ],
    )?;
    write_block(&mut w, "c_d", &[1], &[bundle.c_d])?;
    let mat = |w: &mut Vec<u8>, name: &str, m: &DMatrix<f64>| {
        write_block(w, name, &[m.nrows() as u64, m.ncols() as u64], m.as_slice())
    };
    mat(&mut w, "basis", &bundle.basis)?;
    mat(&mut w, "m_n", &bundle.m_n)?;
    for (q, a) in bundle.a_n.iter().enumerate() {
        mat(&mut w, &format!("a_n/{q}"), a)?;
    }
    mat(&mut w, "d_n", &bundle.d_n)?;
    mat(&mut w, "b_n", &bundle.b_n)?;
    for (q, v) in bundle.obs_yd_n.iter().enumerate() {
        write_block(&mut w, &format!("obs_yd_n/{q}"), &[v.len() as u64], v.as_slice())?;
    }
    mat(&mut w, "ydd", &bundle.ydd)?;
    mat(&mut w, "gram", &bundle.gram)?;
    write_block(&mut w, "b_dual_sq", &[bundle.b_dual_sq.len() as u64], &bundle.b_dual_sq)?;
    // Greedy history: parameter rows plus (indicator, n_after, flag) rows.
    let p_dim = bundle.history.first().map_or(0, |r| r.mu.len());
    let mut mu_flat = Vec::with_capacity(bundle.history.len() * p_dim);
    let mut stats_flat = Vec::with_capacity(bundle.history.len() * 3);
    for rec in &bundle.history {
        if rec.mu.len() != p_dim {
            return Err(RbMpcError::BundleFormat(
                "greedy history has inconsistent parameter dimensions".into(),
            ));
        }
        mu_flat.extend_from_slice(&rec.mu);
        stats_flat.extend_from_slice(&[rec.indicator, rec.n_after as f64, rec.flag as f64]);
    }
    write_block(
        &mut w,
        "history/mu",
        &[bundle.history.len() as u64, p_dim as u64],
        &mu_flat,
    )?;
    write_block(
        &mut w,
        "history/stats",
        &[bundle.history.len() as u64, 3],
        &stats_flat,
    )?;
    Ok(w)
}

/// Parses a bundle from the versioned block container.
pub fn bundle_from_bytes(bytes: &[u8]) -> Result<ReducedBasisBundle> {
    let mut cursor = bytes;
    let mut blocks = read_blocks(&mut cursor)?;
    let mut take = |name: &str| -> Result<Block> {
        blocks
            .remove(name)
            .ok_or_else(|| RbMpcError::BundleFormat(format!("missing block '{name}'")))
    };
    let dims = take("dims")?.vector("dims")?;
    if dims.len() != 4 {
        return Err(RbMpcError::BundleFormat("'dims' must have 4 entries".into()));
    }
    let as_count = |x: f64, what: &str| -> Result<usize> {
        if x < 0.0 || x.fract() != 0.0 || x > 1e15 {
            return Err(RbMpcError::BundleFormat(format!("bad {what} count {x}")));
        }
        Ok(x as usize)
    };
    let n_truth = as_count(dims[0], "truth-dimension")?;
    let m_controls = as_count(dims[1], "control")?;
    let q_a = as_count(dims[2], "form-component")?;
    let q_yd = as_count(dims[3], "desired-state component")?;
    let c_d_block = take("c_d")?.vector("c_d")?;
    let c_d = *c_d_block
        .first()
        .ok_or_else(|| RbMpcError::BundleFormat("empty 'c_d'".into()))?;

    let basis = take("basis")?.matrix("basis")?;
    let m_n = take("m_n")?.matrix("m_n")?;
    let mut a_n = Vec::with_capacity(q_a);
    for q in 0..q_a {
        let name = format!("a_n/{q}");
        a_n.push(take(&name)?.matrix(&name)?);
    }
    let d_n = take("d_n")?.matrix("d_n")?;
    let b_n = take("b_n")?.matrix("b_n")?;
    let mut obs_yd_n = Vec::with_capacity(q_yd);
    for q in 0..q_yd {
        let name = format!("obs_yd_n/{q}");
        obs_yd_n.push(DVector::from_vec(take(&name)?.vector(&name)?));
    }
    let ydd = take("ydd")?.matrix("ydd")?;
    let gram = take("gram")?.matrix("gram")?;
    let b_dual_sq = take("b_dual_sq")?.vector("b_dual_sq")?;

    let hist_mu = take("history/mu")?;
    let hist_stats = take("history/stats")?;
    if hist_mu.dims.len() != 2 || hist_stats.dims.len() != 2 || hist_stats.dims[1] != 3 {
        return Err(RbMpcError::BundleFormat("malformed history blocks".into()));
    }
    let n_rec = hist_mu.dims[0] as usize;
    if hist_stats.dims[0] as usize != n_rec {
        return Err(RbMpcError::BundleFormat(
            "history block row counts disagree".into(),
        ));
    }
    let p_dim = hist_mu.dims[1] as usize;
    let mut history = Vec::with_capacity(n_rec);
    for i in 0..n_rec {
        let mu = hist_mu.data[i * p_dim..(i + 1) * p_dim].to_vec();
        let s = &hist_stats.data[i * 3..i * 3 + 3];
        history.push(GreedyRecord {
            mu,
            indicator: s[0],
            n_after: as_count(s[1], "history basis-size")?,
            flag: as_count(s[2], "history flag")? as u8,
        });
    }
    if !blocks.is_empty() {
        let names: Vec<_> = blocks.keys().cloned().collect();
        return Err(RbMpcError::BundleFormat(format!(
            "unrecognized blocks: {names:?}"
        )));
    }

    let bundle = ReducedBasisBundle {
        n_truth,
        m_controls,
        q_a,
        q_yd,
        basis,
        m_n,
        a_n,
        d_n,
        b_n,
        obs_yd_n,
        ydd,
        gram,
        b_dual_sq,
        c_d,
        history,
    };
    validate_shapes(&bundle)?;
    Ok(bundle)
}

fn validate_shapes(b: &ReducedBasisBundle) -> Result<()> {
    let n = b.basis.ncols();
    let check = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(RbMpcError::BundleFormat(format!(
                "inconsistent block shape: {what}"
            )))
        }
    };
    check(b.basis.nrows() == b.n_truth, "basis rows vs truth dimension")?;
    check(b.m_n.shape() == (n, n), "reduced mass")?;
    check(b.a_n.iter().all(|a| a.shape() == (n, n)), "reduced form components")?;
    check(b.d_n.shape() == (n, n), "reduced observation")?;
    check(b.b_n.shape() == (n, b.m_controls), "reduced control map")?;
    check(b.obs_yd_n.iter().all(|v| v.len() == n), "reduced desired observations")?;
    check(b.ydd.shape() == (b.q_yd, b.q_yd), "desired-state Gram")?;
    check(b.b_dual_sq.len() == b.m_controls, "control dual norms")?;
    let g = b.layout().dim();
    check(b.gram.shape() == (g, g), "residual Gram")?;
    Ok(())
}

/// Writes a bundle to disk.
pub fn save_bundle(bundle: &ReducedBasisBundle, path: impl AsRef<Path>) -> Result<()> {
    let bytes = bundle_to_bytes(bundle)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Reads a bundle from disk.
pub fn load_bundle(path: impl AsRef<Path>) -> Result<ReducedBasisBundle> {
    let bytes = std::fs::read(path)?;
    bundle_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{build_mesh_1d, FESpace};
    use crate::problem::PdeProblem;
    use crate::rb::full_basis_bundle;

    fn sample_bundle() -> ReducedBasisBundle {
        let problem = PdeProblem::reaction_diffusion_1d();
        let space = FESpace::new(build_mesh_1d(12, (0.0, 1.0)).unwrap());
        let ops = assemble(&problem, &space).unwrap();
        let mut b = full_basis_bundle(&ops).unwrap();
        b.history = vec![
            GreedyRecord {
                mu: vec![14.0, 1e-2],
                indicator: 0.3,
                n_after: 2,
                flag: 0,
            },
            GreedyRecord {
                mu: vec![3.0, 1e-3],
                indicator: 0.05,
                n_after: 4,
                flag: 1,
            },
        ];
        b
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bundle = sample_bundle();
        let bytes = bundle_to_bytes(&bundle).unwrap();
        let loaded = bundle_from_bytes(&bytes).unwrap();
        assert_eq!(loaded, bundle);
        let bytes2 = bundle_to_bytes(&loaded).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn file_round_trip() {
        let bundle = sample_bundle();
        let dir = std::env::temp_dir().join("rbmpc-bundle-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sample.rbb");
        save_bundle(&bundle, &path).unwrap();
        let loaded = load_bundle(&path).unwrap();
        assert_eq!(loaded, bundle);
    }

    #[test]
    fn rejects_corrupted_magic() {
        let bundle = sample_bundle();
        let mut bytes = bundle_to_bytes(&bundle).unwrap();
        bytes[0] ^= 0xff;
        let err = bundle_from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, RbMpcError::BundleFormat(_)));
    }

    #[test]
    fn rejects_truncated_stream() {
        let bundle = sample_bundle();
        let bytes = bundle_to_bytes(&bundle).unwrap();
        let err = bundle_from_bytes(&bytes[..bytes.len() - 9]).unwrap_err();
        assert!(matches!(err, RbMpcError::Io(_) | RbMpcError::BundleFormat(_)));
    }

    #[test]
    fn rejects_wrong_version() {
        let bundle = sample_bundle();
        let mut bytes = bundle_to_bytes(&bundle).unwrap();
        bytes[4] = 99;
        let err = bundle_from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, RbMpcError::BundleFormat(_)));
    }
}
