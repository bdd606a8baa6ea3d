//! On-disk cache of built LOD spaces (`GLL1` files).
//!
//! Layout, little endian: magic `GLL1`, version `u32`, key length `u32`,
//! key JSON, then `u64` counts `nc`, `nf`, `nnz`, `nc + 1` row pointers,
//! `nnz` column indices, `nnz` (re, im) pairs of `Ψᵀ`, and one corrector norm
//! per coarse element.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lodspace::{build_lod_space, LodProblem, LodSpace};
use crate::mesh::MeshHierarchy;
use crate::sparse::CsrMatrix;

const MAGIC: &[u8; 4] = b"GLL1";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LodKey {
    pub coarse_k: u32,
    pub fine_k: u32,
    pub kappa: f64,
    pub beta: f64,
    pub ell: usize,
    pub quadrature: String,
    pub potential: String,
}

impl LodKey {
    pub fn of(problem: &LodProblem, ell: usize) -> Self {
        Self {
            coarse_k: problem.mh.coarse_k,
            fine_k: problem.mh.fine_k,
            kappa: problem.kappa,
            beta: problem.beta,
            ell,
            quadrature: problem.quad.name.to_string(),
            potential: problem.potential.name.clone(),
        }
    }

    pub fn file_name(&self) -> String {
        let json = serde_json::to_vec(self).expect("key serializes");
        let digest = Sha256::digest(&json);
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        format!(
            "lod_c{}_f{}_l{}_{}.gll",
            self.coarse_k, self.fine_k, self.ell, hex
        )
    }
}

pub fn write_space(space: &LodSpace, key: &LodKey, mut w: impl Write) -> Result<()> {
    let key = serde_json::to_vec(key)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(key.len() as u32).to_le_bytes())?;
    w.write_all(&key)?;
    let m = &space.psi_t;
    let mut buf = Vec::new();
    for v in [m.nrows(), m.ncols(), m.nnz()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &p in m.indptr() {
        buf.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in m.indices() {
        buf.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for v in m.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    for v in &space.corrector_norms {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_space(mh: Arc<MeshHierarchy>, expect: &LodKey, mut r: impl Read) -> Result<LodSpace> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { b: &bytes, at: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad LOD cache magic".into()));
    }
    if cur.u32()? != VERSION {
        return Err(Error::Format("unsupported LOD cache version".into()));
    }
    let klen = cur.u32()? as usize;
    let key: LodKey = serde_json::from_slice(cur.take(klen)?)?;
    if &key != expect {
        return Err(Error::Format(format!("cache key mismatch: {key:?}")));
    }
    let nc = cur.u64()? as usize;
    let nf = cur.u64()? as usize;
    let nnz = cur.u64()? as usize;
    if nc != mh.coarse().num_vertices() || nf != mh.fine().num_vertices() {
        return Err(Error::Format("cached basis does not fit the mesh".into()));
    }
    let indptr: Vec<usize> = (0..=nc)
        .map(|_| cur.u64().map(|v| v as usize))
        .collect::<Result<_>>()?;
    let indices: Vec<usize> = (0..nnz)
        .map(|_| cur.u64().map(|v| v as usize))
        .collect::<Result<_>>()?;
    let values: Vec<Complex64> = (0..nnz)
        .map(|_| Ok(Complex64::new(cur.f64()?, cur.f64()?)))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = (0..mh.coarse().num_triangles())
        .map(|_| cur.f64())
        .collect::<Result<_>>()?;
    if cur.at != bytes.len() {
        return Err(Error::Format("trailing bytes in LOD cache".into()));
    }
    let valid = indptr[0] == 0
        && indptr[nc] == nnz
        && indptr.windows(2).all(|w| w[0] <= w[1])
        && (0..nc).all(|r| {
            let row = &indices[indptr[r]..indptr[r + 1]];
            row.iter().all(|&c| c < nf) && row.windows(2).all(|w| w[0] < w[1])
        });
    if !valid {
        return Err(Error::Format(
            "corrupt sparsity pattern in LOD cache".into(),
        ));
    }
    let psi_t = CsrMatrix::from_raw(nc, nf, indptr, indices, values);
    LodSpace::from_parts(mh, key.kappa, key.beta, key.ell, psi_t, norms)
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.b.len())
            .ok_or_else(|| Error::Format("truncated LOD cache".into()))?;
        let s = &self.b[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Directory-backed cache; without a directory every request builds.
#[derive(Clone, Debug, Default)]
pub struct LodCache {
    pub dir: Option<PathBuf>,
}

impl LodCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    fn path(&self, key: &LodKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(key.file_name()))
    }

    /// Loads the space for `(problem, ell)` if cached, builds and stores it
    /// otherwise. Unreadable cache files are rebuilt.
    pub fn get_or_build(&self, problem: &LodProblem, ell: usize) -> Result<LodSpace> {
        let key = LodKey::of(problem, ell);
        if let Some(path) = self.path(&key) {
            if path.exists() {
                match load(&path, Arc::clone(&problem.mh), &key) {
                    Ok(s) => return Ok(s),
                    Err(e) => log::warn!("ignoring LOD cache {}: {e}", path.display()),
                }
            }
        }
        let space = build_lod_space(problem, ell)?;
        if let Some(path) = self.path(&key) {
            if let Some(d) = path.parent() {
                std::fs::create_dir_all(d)?;
            }
            let tmp = path.with_extension("tmp");
            let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            write_space(&space, &key, &mut w)?;
            w.flush()?;
            drop(w);
            std::fs::rename(&tmp, &path)?;
        }
        Ok(space)
    }
}

fn load(path: &Path, mh: Arc<MeshHierarchy>, key: &LodKey) -> Result<LodSpace> {
    let f = std::fs::File::open(path)?;
    read_space(mh, key, std::io::BufReader::new(f))
}
