//! Append-only JSONL store of per-realization results.
//!
//! A store is identified by the SHA-256 of its key (record kind, master seed,
//! stream purpose, grid, law, solver configuration and any study-specific
//! inputs). Each line holds one realization index and either its record or
//! the non-convergence data. Missing indices are computed on the worker pool
//! and appended in index order by the calling thread only.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

const APPEND_CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<R> {
    Ok(R),
    Failed { iterations: usize, residual: f64 },
}

impl<R> Outcome<R> {
    pub fn ok(&self) -> Option<&R> {
        match self {
            Outcome::Ok(r) => Some(r),
            Outcome::Failed { .. } => None,
        }
    }
}

#[derive(Deserialize)]
struct Line<R> {
    r: u64,
    outcome: Outcome<R>,
}

#[derive(Serialize)]
struct LineRef<'a, R> {
    r: u64,
    outcome: &'a Outcome<R>,
}

fn ends_with_newline(path: &Path) -> Result<bool> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = File::open(path)?;
    if f.metadata()?.len() == 0 {
        return Ok(true);
    }
    f.seek(SeekFrom::End(-1))?;
    let mut last = [0u8; 1];
    f.read_exact(&mut last)?;
    Ok(last[0] == b'\n')
}

fn append<R: Serialize>(path: &Path, computed: &[(u64, Outcome<R>)]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    // Start on a fresh line in case the previous writer was cut off.
    if !ends_with_newline(path)? {
        file.write_all(b"\n")?;
    }
    let mut buf = String::new();
    for (r, o) in computed {
        buf.push_str(&serde_json::to_string(&LineRef { r: *r, outcome: o })?);
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    file.flush()?;
    Ok(())
}

/// Runs `f` and turns `NonConvergence` into a recorded failure.
pub fn catch_nonconvergence<R>(res: homfluct::Result<R>) -> homfluct::Result<Outcome<R>> {
    match res {
        Ok(r) => Ok(Outcome::Ok(r)),
        Err(homfluct::Error::NonConvergence { iterations, residual, .. }) => {
            Ok(Outcome::Failed { iterations, residual })
        }
        Err(e) => Err(e),
    }
}

pub struct RealizationStore {
    dir: Option<PathBuf>,
}

impl RealizationStore {
    /// A store rooted at `dir`, or an in-memory pass-through if `None`.
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn key_hash(kind: &str, key: &impl Serialize) -> String {
        let body = serde_json::to_string(key).expect("cache key serializes");
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, kind: &str, hash: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{kind}-{}.jsonl", &hash[..24])))
    }

    fn load<R: DeserializeOwned>(path: &Path) -> Result<BTreeMap<u64, Outcome<R>>> {
        let mut out = BTreeMap::new();
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for line in BufReader::new(file).lines() {
            let line = line?;
            // A torn final line from an interrupted run is simply recomputed.
            if let Ok(l) = serde_json::from_str::<Line<R>>(&line) {
                out.insert(l.r, l.outcome);
            }
        }
        Ok(out)
    }

    /// Outcomes for realizations `0..n`, computing only the missing ones.
    pub fn get_or_compute<R, F>(
        &self,
        kind: &str,
        key: &impl Serialize,
        n: u64,
        compute: F,
    ) -> Result<Vec<Outcome<R>>>
    where
        R: Serialize + DeserializeOwned + Send,
        F: Fn(u64) -> homfluct::Result<Outcome<R>> + Sync,
    {
        let hash = Self::key_hash(kind, key);
        let path = self.path(kind, &hash);
        let mut have: BTreeMap<u64, Outcome<R>> = match &path {
            Some(p) => Self::load(p)?,
            None => BTreeMap::new(),
        };
        let missing: Vec<u64> = (0..n).filter(|r| !have.contains_key(r)).collect();
        // Chunks bound the work lost to an interruption.
        for chunk in missing.chunks(APPEND_CHUNK) {
            let computed: Vec<(u64, Outcome<R>)> = chunk
                .par_iter()
                .map(|&r| compute(r).map(|o| (r, o)))
                .collect::<homfluct::Result<Vec<_>>>()?;
            if let Some(p) = &path {
                append(p, &computed)?;
            }
            have.extend(computed);
        }
        Ok((0..n).map(|r| have.remove(&r).expect("all realizations present")).collect())
    }
}
