//! File-backed persistence.
//!
//! Layout under the root:
//!
//! ```text
//! pool.json
//! subjects/{id}/profile.json
//! subjects/{id}/recordings/{session}.json
//! subjects/{id}/datasets/{dataset_id}.json
//! blobs/{datasets,models,reports}/{sha256}.{csv,json}
//! runs/{run_id}.json
//! idempotency/{key_hash}.json
//! ```
//!
//! Every write goes to a sibling `*.tmp` file, is synced and then renamed
//! over the target, so a reader sees either the old or the new file. Blobs
//! are content addressed and verified on every read. The directory tree is
//! the whole state; nothing is cached in memory.

use std::fs::{self, File};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use emobase::protocol::{StimulusClip, SubjectProfile};
use emobase::signal::io::RecordedSession;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ServiceError};
use crate::runs::{DatasetMeta, RunDescriptor};

const TMP_SUFFIX: &str = ".tmp";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identifiers become path components, so they are restricted to a safe
/// alphabet and may not start with a dot.
pub fn check_id(kind: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::BadRequest(format!(
            "invalid {kind} id `{id}`: use 1-128 characters from [A-Za-z0-9._-], not starting with '.'"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlobKind {
    Dataset,
    Model,
    Report,
}

impl BlobKind {
    fn dir(self) -> &'static str {
        match self {
            BlobKind::Dataset => "datasets",
            BlobKind::Model => "models",
            BlobKind::Report => "reports",
        }
    }

    fn ext(self) -> &'static str {
        match self {
            BlobKind::Dataset => "csv",
            _ => "json",
        }
    }
}

/// A stored response for replay under an idempotency key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdempotentRecord {
    pub request_sha256: String,
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Creates the layout if needed and removes temp files left by an
    /// interrupted write. Fails when the root cannot be created or written.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in ["subjects", "blobs/datasets", "blobs/models", "blobs/reports", "runs", "idempotency"] {
            fs::create_dir_all(root.join(dir))
                .map_err(|e| ServiceError::Internal(format!("cannot create store at {}: {e}", root.display())))?;
        }
        let store = Self { root };
        store.remove_stale_tmp(&store.root.clone())?;
        let probe = store.root.join(format!(".probe{TMP_SUFFIX}"));
        fs::write(&probe, b"")
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| ServiceError::Internal(format!("store {} is not writable: {e}", store.root.display())))?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn remove_stale_tmp(&self, dir: &Path) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                self.remove_stale_tmp(&path)?;
            } else if path.to_string_lossy().ends_with(TMP_SUFFIX) {
                fs::remove_file(&path)?;
            }
        }
        Ok(())
    }

    /// temp file -> fsync -> rename -> fsync of the directory.
    pub fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = path.parent().expect("store paths have a parent");
        fs::create_dir_all(dir)?;
        let name = path.file_name().expect("store paths name a file").to_string_lossy();
        let tmp = dir.join(format!(".{name}.{}{TMP_SUFFIX}", std::process::id()));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    fn read_opt(&self, path: &Path) -> Result<Option<Vec<u8>>> {
        match fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn read_json<T: DeserializeOwned>(&self, path: &Path) -> Result<Option<T>> {
        let Some(bytes) = self.read_opt(path)? else { return Ok(None) };
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| ServiceError::Integrity(format!("corrupt store file {}: {e}", path.display())))
    }

    fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(value).map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.write_atomic(path, &bytes)
    }

    fn subject_dir(&self, id: &str) -> PathBuf {
        self.root.join("subjects").join(id)
    }

    // pool

    pub fn pool(&self) -> Result<Vec<StimulusClip>> {
        Ok(self.read_json(&self.root.join("pool.json"))?.unwrap_or_default())
    }

    pub fn put_pool(&self, pool: &[StimulusClip]) -> Result<()> {
        self.write_json(&self.root.join("pool.json"), &pool)
    }

    // subjects

    pub fn subject_ids(&self) -> Result<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("subjects"))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("profile.json").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn profile(&self, id: &str) -> Result<SubjectProfile> {
        check_id("subject", id)?;
        self.read_json(&self.subject_dir(id).join("profile.json"))?
            .ok_or_else(|| ServiceError::NotFound(format!("subject `{id}` not found")))
    }

    pub fn has_subject(&self, id: &str) -> bool {
        self.subject_dir(id).join("profile.json").is_file()
    }

    pub fn put_profile(&self, profile: &SubjectProfile) -> Result<()> {
        check_id("subject", &profile.subject_id)?;
        self.write_json(&self.subject_dir(&profile.subject_id).join("profile.json"), profile)
    }

    // recordings

    pub fn recording(&self, subject: &str, session: &str) -> Result<Option<RecordedSession>> {
        check_id("session", session)?;
        self.read_json(&self.subject_dir(subject).join("recordings").join(format!("{session}.json")))
    }

    pub fn put_recording(&self, subject: &str, rec: &RecordedSession) -> Result<()> {
        check_id("session", &rec.manifest.session_id)?;
        let path = self.subject_dir(subject).join("recordings").join(format!("{}.json", rec.manifest.session_id));
        self.write_json(&path, rec)
    }

    /// All recordings of a subject in session-id order.
    pub fn recordings(&self, subject: &str) -> Result<Vec<RecordedSession>> {
        let dir = self.subject_dir(subject).join("recordings");
        let mut names: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect(),
            Err(e) if e.kind() == ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        names.sort();
        names
            .iter()
            .map(|p| self.read_json(p).map(|r| r.expect("listed file exists")))
            .collect()
    }

    // blobs

    fn blob_path(&self, kind: BlobKind, hash: &str) -> PathBuf {
        self.root.join("blobs").join(kind.dir()).join(format!("{hash}.{}", kind.ext()))
    }

    /// Stores `bytes` under their sha256 and returns the hash. Writing an
    /// existing blob is a no-op.
    pub fn put_blob(&self, kind: BlobKind, bytes: &[u8]) -> Result<String> {
        let hash = sha256_hex(bytes);
        let path = self.blob_path(kind, &hash);
        if !path.is_file() {
            self.write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    /// Reads a blob and checks its content against `hash`.
    pub fn blob(&self, kind: BlobKind, hash: &str) -> Result<Vec<u8>> {
        check_id("blob", hash)?;
        let path = self.blob_path(kind, hash);
        let bytes = self
            .read_opt(&path)?
            .ok_or_else(|| ServiceError::NotFound(format!("{} blob {hash} not found", kind.dir())))?;
        let actual = sha256_hex(&bytes);
        if actual != hash {
            return Err(ServiceError::Integrity(format!(
                "{} blob {hash} fails verification (content hashes to {actual})",
                kind.dir()
            )));
        }
        Ok(bytes)
    }

    // datasets

    pub fn dataset_meta(&self, subject: &str, dataset_id: &str) -> Result<DatasetMeta> {
        check_id("dataset", dataset_id)?;
        self.read_json(&self.subject_dir(subject).join("datasets").join(format!("{dataset_id}.json")))?
            .ok_or_else(|| ServiceError::NotFound(format!("dataset `{dataset_id}` not found for `{subject}`")))
    }

    pub fn put_dataset_meta(&self, meta: &DatasetMeta) -> Result<()> {
        let path = self.subject_dir(&meta.subject_id).join("datasets").join(format!("{}.json", meta.dataset_id));
        self.write_json(&path, meta)
    }

    // runs

    pub fn run(&self, run_id: &str) -> Result<Option<RunDescriptor>> {
        check_id("run", run_id)?;
        self.read_json(&self.root.join("runs").join(format!("{run_id}.json")))
    }

    pub fn put_run(&self, run: &RunDescriptor) -> Result<()> {
        self.write_json(&self.root.join("runs").join(format!("{}.json", run.run_id)), run)
    }

    pub fn runs(&self) -> Result<Vec<RunDescriptor>> {
        let mut out = Vec::new();
        for e in fs::read_dir(self.root.join("runs"))? {
            let p = e?.path();
            if p.extension().is_some_and(|x| x == "json") {
                out.extend(self.read_json::<RunDescriptor>(&p)?);
            }
        }
        out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        Ok(out)
    }

    // idempotency

    pub fn idempotent(&self, key_hash: &str) -> Result<Option<IdempotentRecord>> {
        self.read_json(&self.root.join("idempotency").join(format!("{key_hash}.json")))
    }

    pub fn put_idempotent(&self, key_hash: &str, rec: &IdempotentRecord) -> Result<()> {
        self.write_json(&self.root.join("idempotency").join(format!("{key_hash}.json")), rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let h = store.put_blob(BlobKind::Report, b"{\"a\":1}").unwrap();
        assert_eq!(store.blob(BlobKind::Report, &h).unwrap(), b"{\"a\":1}");
        fs::write(store.blob_path(BlobKind::Report, &h), b"{\"a\":2}").unwrap();
        assert!(matches!(store.blob(BlobKind::Report, &h), Err(ServiceError::Integrity(_))));
    }

    #[test]
    fn stale_temp_files_are_swept() {
        let dir = tempfile::tempdir().unwrap();
        Store::open(dir.path()).unwrap();
        let stale = dir.path().join("runs").join(".x.json.1.tmp");
        fs::write(&stale, b"half").unwrap();
        Store::open(dir.path()).unwrap();
        assert!(!stale.exists());
    }

    #[test]
    fn ids_are_path_safe() {
        for bad in ["", "..", "../x", "a/b", ".hidden", "a b"] {
            assert!(check_id("subject", bad).is_err(), "{bad:?}");
        }
        for good in ["subj-0001", "P_1", "s1.v2"] {
            check_id("subject", good).unwrap();
        }
    }
}
