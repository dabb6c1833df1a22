//! Single-writer dataset storage: one CSV file per data set plus a JSON
//! manifest, both rewritten atomically (temp file + rename). Concurrent
//! writers are rejected via a lock file in the store root.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use twinforge_core::doe::compute_features;
use twinforge_core::signals::{ExcitationSignal, Jump, SignalKind, TimeGrid};
use twinforge_core::DataSet;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("id '{0}' not found")]
    NotFound(String),
    #[error("parse failure in {path}, line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("validation failure: {0}")]
    Validation(String),
    #[error("store is locked by another writer ({0})")]
    Locked(PathBuf),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest failure: {0}")]
    Manifest(#[from] serde_json::Error),
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// APRBS, SINAPRBS or MULTISINE.
    pub kind: String,
    /// Data file path relative to the store root.
    pub file: String,
    pub feature_digest: String,
    pub provenance_digest: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StoreManifest {
    pub entries: Vec<ManifestEntry>,
}

/// Per-dataset metadata that the tabular CSV body cannot carry; serialized
/// into the leading `#` comment line of each data file.
#[derive(Debug, Serialize, Deserialize)]
struct DataSetMeta {
    signal_id: String,
    kind: SignalKind,
    seed: u64,
    grid: TimeGrid,
    jumps: Vec<Jump>,
    provenance: String,
}

fn kind_name(kind: SignalKind) -> &'static str {
    match kind {
        SignalKind::Aprbs => "APRBS",
        SignalKind::SinAprbs => "SINAPRBS",
        SignalKind::Multisine => "MULTISINE",
    }
}

/// 17-significant-digit decimal text; parses back to the identical f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Writes `bytes` to `path` atomically via a sibling temp file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct Store {
    root: PathBuf,
    manifest: StoreManifest,
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> StoreResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let manifest_path = root.join("manifest.json");
        let manifest = if manifest_path.exists() {
            serde_json::from_slice(&fs::read(&manifest_path)?)?
        } else {
            StoreManifest::default()
        };
        Ok(Self { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn ids(&self) -> Vec<String> {
        self.manifest.entries.iter().map(|e| e.id.clone()).collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.manifest.entries.iter().any(|e| e.id == id)
    }

    fn lock(&self) -> StoreResult<LockGuard> {
        let path = self.root.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(StoreError::Locked(path))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Next free id for a kind: consecutive numbering with the kind prefix.
    pub fn next_id(&self, kind: SignalKind) -> String {
        let prefix = kind.prefix();
        let max = self
            .manifest
            .entries
            .iter()
            .filter_map(|e| e.id.strip_prefix(prefix)?.parse::<usize>().ok())
            .max()
            .unwrap_or(0);
        format!("{prefix}{:03}", max + 1)
    }

    /// Saves a data set; assigns a consecutive id when `ds.id` is empty.
    /// Returns the id under which the set was stored.
    pub fn save_dataset(&mut self, ds: &DataSet) -> StoreResult<String> {
        ds.validate()
            .map_err(|e| StoreError::Validation(e.to_string()))?;
        let id = if ds.id.is_empty() {
            self.next_id(ds.excitation.kind)
        } else {
            ds.id.clone()
        };
        if self.contains(&id) {
            return Err(StoreError::DuplicateId(id));
        }
        let _guard = self.lock()?;

        let meta = DataSetMeta {
            signal_id: ds.excitation.id.clone(),
            kind: ds.excitation.kind,
            seed: ds.excitation.seed,
            grid: ds.excitation.grid,
            jumps: ds.excitation.jumps.clone(),
            provenance: ds.provenance.clone(),
        };
        let mut body = String::new();
        body.push_str("# ");
        body.push_str(&serde_json::to_string(&meta)?);
        body.push_str("\nt,T_oven,T_A,T_B\n");
        for k in 0..ds.n_samples() {
            body.push_str(&fmt17(ds.excitation.grid.time(k)));
            body.push(',');
            body.push_str(&fmt17(ds.excitation.values[k]));
            body.push(',');
            body.push_str(&fmt17(ds.outputs[0][k]));
            body.push(',');
            body.push_str(&fmt17(ds.outputs[1][k]));
            body.push('\n');
        }

        let file = format!("{id}.csv");
        write_atomic(&self.root.join(&file), body.as_bytes())?;

        let features = compute_features(ds);
        self.manifest.entries.push(ManifestEntry {
            id: id.clone(),
            kind: kind_name(ds.excitation.kind).to_string(),
            file,
            feature_digest: sha256_hex(serde_json::to_string(&features)?.as_bytes()),
            provenance_digest: sha256_hex(ds.provenance.as_bytes()),
        });
        self.manifest.entries.sort_by(|a, b| a.id.cmp(&b.id));
        self.write_manifest()?;
        Ok(id)
    }

    fn write_manifest(&self) -> StoreResult<()> {
        let bytes = serde_json::to_vec_pretty(&self.manifest)?;
        write_atomic(&self.root.join("manifest.json"), &bytes)?;
        Ok(())
    }

    pub fn load_dataset(&self, id: &str) -> StoreResult<DataSet> {
        let entry = self
            .manifest
            .entries
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        let path = self.root.join(&entry.file);
        let text = fs::read_to_string(&path)?;
        let ds = parse_dataset_csv(&text, id, &path)?;
        ds.validate()
            .map_err(|e| StoreError::Validation(e.to_string()))?;
        Ok(ds)
    }

    pub fn load_all(&self) -> StoreResult<Vec<DataSet>> {
        self.manifest
            .entries
            .iter()
            .map(|e| self.load_dataset(&e.id))
            .collect()
    }
}

fn parse_dataset_csv(text: &str, id: &str, path: &Path) -> StoreResult<DataSet> {
    let fail = |line: usize, msg: String| StoreError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();

    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| fail(1, "empty file".into()))?;
    let meta_json = meta_line
        .strip_prefix("# ")
        .ok_or_else(|| fail(1, "missing metadata comment line".into()))?;
    let meta: DataSetMeta =
        serde_json::from_str(meta_json).map_err(|e| fail(1, e.to_string()))?;

    let (_, header) = lines
        .next()
        .ok_or_else(|| fail(2, "missing header row".into()))?;
    if header != "t,T_oven,T_A,T_B" {
        return Err(fail(2, format!("unexpected header '{header}'")));
    }

    let mut values = Vec::with_capacity(meta.grid.n_samples);
    let mut t_a = Vec::with_capacity(meta.grid.n_samples);
    let mut t_b = Vec::with_capacity(meta.grid.n_samples);
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut fields = line.split(',');
        let mut next = || -> StoreResult<f64> {
            let raw = fields
                .next()
                .ok_or_else(|| fail(lineno, "expected 4 columns".into()))?;
            raw.parse::<f64>()
                .map_err(|e| fail(lineno, format!("'{raw}': {e}")))
        };
        let t = next()?;
        let expected_t = meta.grid.time(values.len());
        if (t - expected_t).abs() > 1e-9 * meta.grid.dt {
            return Err(fail(lineno, format!("time {t} off the declared grid")));
        }
        values.push(next()?);
        t_a.push(next()?);
        t_b.push(next()?);
    }
    if values.len() != meta.grid.n_samples {
        return Err(fail(
            text.lines().count(),
            format!(
                "expected {} samples, found {}",
                meta.grid.n_samples,
                values.len()
            ),
        ));
    }

    Ok(DataSet {
        id: id.to_string(),
        excitation: ExcitationSignal {
            grid: meta.grid,
            values,
            kind: meta.kind,
            jumps: meta.jumps,
            seed: meta.seed,
            id: meta.signal_id,
        },
        outputs: vec![t_a, t_b],
        provenance: meta.provenance,
    })
}
