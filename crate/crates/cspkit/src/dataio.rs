//! Trial data model, the on-disk trial format, and dataset manifests.
//!
//! A trial file holds one dataset: a fixed-size header followed by trial
//! records. All integers and floats are little-endian; floats round-trip
//! bit-exactly. See [`read_trialset`] for the exact layout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leio::*;

/// Magic bytes opening every trial file.
pub const TRIAL_MAGIC: &[u8; 6] = b"CSPK1\0";

/// One epoch of multichannel EEG: `data` is channels x samples (row = channel).
/// Labels are 1-based class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: u32,
    pub label: u32,
    pub fs: f64,
    pub data: DMatrix<f64>,
}

impl Trial {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Checks the per-trial invariants: at least 2 channels and 2 samples,
    /// finite data, label within 1..=n_classes.
    pub fn validate(&self, n_classes: u32) -> Result<()> {
        if self.n_channels() < 2 {
            return Err(Error::InvalidInput(format!(
                "trial {} has {} channel(s); at least 2 required",
                self.id,
                self.n_channels()
            )));
        }
        if self.n_samples() < 2 {
            return Err(Error::InvalidInput(format!(
                "trial {} has {} sample(s); at least 2 required",
                self.id,
                self.n_samples()
            )));
        }
        if self.label < 1 || self.label > n_classes {
            return Err(Error::InvalidInput(format!(
                "trial {} label {} outside 1..={}",
                self.id, self.label, n_classes
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trial {} contains non-finite samples",
                self.id
            )));
        }
        if !(self.fs > 0.0) {
            return Err(Error::InvalidInput(format!(
                "trial {} has non-positive sampling rate {}",
                self.id, self.fs
            )));
        }
        Ok(())
    }
}

/// An ordered collection of trials sharing sampling rate and channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub n_classes: u32,
    pub fs: f64,
    pub trials: Vec<Trial>,
}

impl TrialSet {
    pub fn n_channels(&self) -> Option<usize> {
        self.trials.first().map(|t| t.n_channels())
    }

    /// Number of trials carrying each label, indexed by class - 1.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes as usize];
        for t in &self.trials {
            if t.label >= 1 && (t.label as usize) <= counts.len() {
                counts[t.label as usize - 1] += 1;
            }
        }
        counts
    }

    /// Structural invariants: valid trials, uniform fs and channel count.
    /// Does NOT require a trial per class; empty sets are valid containers.
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 1 {
            return Err(Error::InvalidInput("n_classes must be >= 1".into()));
        }
        if !(self.fs > 0.0) {
            return Err(Error::InvalidInput("sampling rate must be positive".into()));
        }
        let n_ch = self.n_channels();
        for t in &self.trials {
            t.validate(self.n_classes)?;
            if t.fs != self.fs {
                return Err(Error::FsMismatch {
                    expected: self.fs,
                    got: t.fs,
                });
            }
            if Some(t.n_channels()) != n_ch {
                return Err(Error::InvalidInput(format!(
                    "trial {} has {} channels, expected {}",
                    t.id,
                    t.n_channels(),
                    n_ch.unwrap_or(0)
                )));
            }
        }
        Ok(())
    }

    /// Additional requirement for sets used to fit filters or classifiers.
    pub fn validate_for_training(&self) -> Result<()> {
        self.validate()?;
        for (i, &n) in self.class_counts().iter().enumerate() {
            if n == 0 {
                return Err(Error::EmptyClass { class: i as u32 + 1 });
            }
        }
        Ok(())
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads a trial file.
///
/// Layout: magic `"CSPK1\0"`, header `{n_classes: u32, fs_hz: f64,
/// n_channels: u32, n_trials: u32}`, then per trial `{id: u32, label: u32,
/// n_samples: u32, data: f64 row-major channels x samples}`. Little-endian
/// throughout. Validation failures name the offending record index.
pub fn read_trialset(path: impl AsRef<Path>) -> Result<TrialSet> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)
        .map_err(|_| format_err(path, "file too short for magic bytes"))?;
    if &magic != TRIAL_MAGIC {
        return Err(format_err(path, "bad magic bytes, not a trial file"));
    }

    let n_classes = read_u32(&mut r).map_err(|_| format_err(path, "truncated header"))?;
    let fs = read_f64(&mut r).map_err(|_| format_err(path, "truncated header"))?;
    let n_channels = read_u32(&mut r).map_err(|_| format_err(path, "truncated header"))? as usize;
    let n_trials = read_u32(&mut r).map_err(|_| format_err(path, "truncated header"))? as usize;

    if n_classes < 1 {
        return Err(format_err(path, "header declares n_classes = 0"));
    }
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(format_err(path, format!("header declares invalid fs {fs}")));
    }
    if n_trials > 0 && n_channels < 2 {
        return Err(format_err(
            path,
            format!("header declares {n_channels} channel(s); at least 2 required"),
        ));
    }

    let mut trials = Vec::with_capacity(n_trials);
    for record in 0..n_trials {
        let bad = |reason: String| Error::InvalidRecord { record, reason };
        let id = read_u32(&mut r).map_err(|_| bad("truncated record header".into()))?;
        let label = read_u32(&mut r).map_err(|_| bad("truncated record header".into()))?;
        let n_samples = read_u32(&mut r).map_err(|_| bad("truncated record header".into()))? as usize;
        if label < 1 || label > n_classes {
            return Err(bad(format!("label {label} outside 1..={n_classes}")));
        }
        if n_samples < 2 {
            return Err(bad(format!("{n_samples} sample(s); at least 2 required")));
        }
        let flat = read_f64_vec(&mut r, n_channels * n_samples)
            .map_err(|_| bad("truncated sample data".into()))?;
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite sample value".into()));
        }
        // Stored row-major (channel-major); DMatrix wants column-major.
        let data = DMatrix::from_fn(n_channels, n_samples, |ch, s| flat[ch * n_samples + s]);
        trials.push(Trial { id, label, fs, data });
    }

    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(format_err(path, "trailing bytes after last record"));
    }

    Ok(TrialSet { n_classes, fs, trials })
}

/// Writes a trial file; `read_trialset` reproduces the set bit-exactly.
pub fn write_trialset(set: &TrialSet, path: impl AsRef<Path>) -> Result<()> {
    set.validate()?;
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);

    w.write_all(TRIAL_MAGIC)?;
    write_u32(&mut w, set.n_classes)?;
    write_f64(&mut w, set.fs)?;
    let n_channels = set.n_channels().unwrap_or(0);
    write_u32(&mut w, n_channels as u32)?;
    write_u32(&mut w, set.trials.len() as u32)?;

    for t in &set.trials {
        write_u32(&mut w, t.id)?;
        write_u32(&mut w, t.label)?;
        write_u32(&mut w, t.n_samples() as u32)?;
        for ch in 0..t.n_channels() {
            for s in 0..t.n_samples() {
                write_f64(&mut w, t.data[(ch, s)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One subject's file pair in a dataset manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub train: String,
    pub test: String,
}

/// Text sidecar listing subjects and their trial-file paths. Relative paths
/// are interpreted relative to the manifest's own directory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub subjects: Vec<ManifestEntry>,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, text)?;
    Ok(())
}
