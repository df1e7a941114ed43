//! JSON cache of orbit tables keyed by `(K, M, L)`.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmetry::{canonical_under_shift, ConditionalOrbitTable, OutputOrbitTable};

/// Bumped whenever the document layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TableDoc {
    reps: Vec<Vec<u8>>,
    counts: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheDoc {
    schema_version: u32,
    k: usize,
    m: usize,
    l: usize,
    conditional: TableDoc,
    output: TableDoc,
}

/// Where the tables came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    /// Enumerated and written to the cache.
    Stored,
    /// Enumerated without a cache directory.
    Computed,
}

pub fn cache_path(dir: &Path, k: usize, m: usize, l: usize) -> PathBuf {
    dir.join(format!("orbits_K{k}_M{m}_L{l}.json"))
}

fn doc_of(cond: &ConditionalOrbitTable, out: &OutputOrbitTable) -> CacheDoc {
    CacheDoc {
        schema_version: SCHEMA_VERSION,
        k: out.k(),
        m: out.m(),
        l: out.block_length(),
        conditional: TableDoc {
            reps: cond.reps().iter().map(<[u8]>::to_vec).collect(),
            counts: cond.counts().to_vec(),
        },
        output: TableDoc {
            reps: out.reps().iter().map(<[u8]>::to_vec).collect(),
            counts: out.counts().to_vec(),
        },
    }
}

fn invalid(path: &Path, why: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("orbit cache {}: {why}", path.display()))
}

fn check_table(path: &Path, doc: &TableDoc, modulus: usize, l: usize, total: u64) -> Result<()> {
    if doc.reps.len() != doc.counts.len() {
        return Err(invalid(path, "reps and counts differ in length"));
    }
    for (i, rep) in doc.reps.iter().enumerate() {
        if rep.len() != l || rep.iter().any(|&v| v as usize >= modulus) {
            return Err(invalid(path, format!("malformed representative {rep:?}")));
        }
        if i > 0 && doc.reps[i - 1] >= *rep {
            return Err(invalid(path, "representatives are not strictly increasing"));
        }
        if canonical_under_shift(rep, modulus).0 != *rep {
            return Err(invalid(path, format!("{rep:?} is not canonical")));
        }
    }
    let sum: u64 = doc.counts.iter().sum();
    if sum != total {
        return Err(invalid(path, format!("orbit sizes add up to {sum}, expected {total}")));
    }
    Ok(())
}

fn read(path: &Path, k: usize, m: usize, l: usize) -> Result<(ConditionalOrbitTable, OutputOrbitTable)> {
    let doc: CacheDoc = serde_json::from_reader(BufReader::new(fs::File::open(path)?))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            path,
            format!("schema version {} (expected {SCHEMA_VERSION})", doc.schema_version),
        ));
    }
    if (doc.k, doc.m, doc.l) != (k, m, l) {
        return Err(invalid(
            path,
            format!("holds K={} M={} L={}", doc.k, doc.m, doc.l),
        ));
    }
    let total = (k as u64).pow(l as u32);
    check_table(path, &doc.conditional, k, l, total)?;
    check_table(path, &doc.output, k / m, l, total)?;
    let cond = ConditionalOrbitTable::from_parts(
        k,
        l,
        doc.conditional.reps.into_iter().zip(doc.conditional.counts),
    );
    let out = OutputOrbitTable::from_parts(k, m, l, doc.output.reps.into_iter().zip(doc.output.counts));
    Ok((cond, out))
}

/// Writes both tables; the file appears atomically.
pub fn store(dir: &Path, cond: &ConditionalOrbitTable, out: &OutputOrbitTable) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, out.k(), out.m(), out.block_length());
    let tmp = path.with_extension("json.tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        serde_json::to_writer(&mut w, &doc_of(cond, out))?;
        w.flush()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Loads cached tables, or enumerates them and stores the result when a
/// directory is given.
pub fn load_or_build(
    dir: Option<&Path>,
    k: usize,
    m: usize,
    l: usize,
) -> Result<(ConditionalOrbitTable, OutputOrbitTable, CacheOutcome)> {
    if let Some(dir) = dir {
        let path = cache_path(dir, k, m, l);
        if path.exists() {
            let (c, o) = read(&path, k, m, l)?;
            return Ok((c, o, CacheOutcome::Hit));
        }
    }
    let cond = ConditionalOrbitTable::enumerate(k, l)?;
    let out = OutputOrbitTable::enumerate(k, m, l)?;
    match dir {
        Some(dir) => {
            store(dir, &cond, &out)?;
            Ok((cond, out, CacheOutcome::Stored))
        }
        None => Ok((cond, out, CacheOutcome::Computed)),
    }
}
