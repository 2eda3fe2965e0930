//! Versioned binary serialization of classifier state.
//!
//! Everything needed to resume training bit-for-bit is stored: rules with
//! their contribution windows, adaptive thresholds, running input
//! statistics, the reserve queue, and the rule id counter. All integers and
//! floats are little-endian; floats round-trip through their bit patterns.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::leio;

use super::{
    HyperParams, It2GaussianMf, ReservedSample, Rule, Srit2nfisModel, PRUNE_WINDOW,
};

/// Magic prefix of serialized models.
pub const MODEL_MAGIC: &[u8; 6] = b"CSPN1\0";
/// Current format version.
pub const MODEL_VERSION: u32 = 1;

/// Writes the complete model state.
pub fn write_model(path: &Path, model: &Srit2nfisModel) -> Result<()> {
    model.validate()?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    leio::write_u32(&mut out, MODEL_VERSION)?;
    leio::write_u32(&mut out, model.n_classes)?;
    leio::write_u32(&mut out, model.dim as u32)?;

    leio::write_f64(&mut out, model.hyper.add_threshold_init)?;
    leio::write_f64(&mut out, model.hyper.novelty_threshold)?;
    leio::write_f64(&mut out, model.hyper.inter_overlap)?;
    leio::write_f64(&mut out, model.hyper.update_threshold_init)?;
    leio::write_f64(&mut out, model.add_threshold)?;
    leio::write_f64(&mut out, model.update_threshold)?;

    leio::write_u64(&mut out, model.next_rule_id)?;
    for &seen in &model.seen_classes {
        out.write_all(&[u8::from(seen)])?;
    }
    leio::write_u64(&mut out, model.stats_count)?;
    for &v in &model.stats_mean {
        leio::write_f64(&mut out, v)?;
    }
    for &v in &model.stats_m2 {
        leio::write_f64(&mut out, v)?;
    }

    leio::write_u32(&mut out, model.rules.len() as u32)?;
    for rule in &model.rules {
        leio::write_u64(&mut out, rule.id)?;
        leio::write_u32(&mut out, rule.class_assoc)?;
        leio::write_u64(&mut out, rule.age)?;
        for &w in &rule.weights {
            leio::write_f64(&mut out, w)?;
        }
        for m in &rule.mfs {
            leio::write_f64(&mut out, m.mean_lo)?;
            leio::write_f64(&mut out, m.mean_hi)?;
            leio::write_f64(&mut out, m.sigma)?;
        }
        out.write_all(&[rule.recent_misses.len() as u8])?;
        for &miss in &rule.recent_misses {
            out.write_all(&[u8::from(miss)])?;
        }
    }

    leio::write_u32(&mut out, model.reserve_queue.len() as u32)?;
    for s in &model.reserve_queue {
        leio::write_u32(&mut out, s.label)?;
        for &v in &s.values {
            leio::write_f64(&mut out, v)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a model written by [`write_model`], validating every field.
pub fn read_model(path: &Path) -> Result<Srit2nfisModel> {
    let display = path.display().to_string();
    let fail = |reason: String| Error::Format { path: display.clone(), reason };
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 6];
    input.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(fail("bad magic: not a model file".into()));
    }
    let version = leio::read_u32(&mut input)?;
    if version != MODEL_VERSION {
        return Err(fail(format!(
            "unsupported model version {version} (expected {MODEL_VERSION})"
        )));
    }
    let n_classes = leio::read_u32(&mut input)?;
    let dim = leio::read_u32(&mut input)? as usize;
    if !(2..=1 << 16).contains(&n_classes) {
        return Err(fail(format!("implausible class count {n_classes}")));
    }
    if dim == 0 || dim > 1 << 20 {
        return Err(fail(format!("implausible input dimension {dim}")));
    }

    let hyper = HyperParams {
        add_threshold_init: leio::read_f64(&mut input)?,
        novelty_threshold: leio::read_f64(&mut input)?,
        inter_overlap: leio::read_f64(&mut input)?,
        update_threshold_init: leio::read_f64(&mut input)?,
    };
    let add_threshold = leio::read_f64(&mut input)?;
    let update_threshold = leio::read_f64(&mut input)?;

    let next_rule_id = leio::read_u64(&mut input)?;
    let mut seen_classes = Vec::with_capacity(n_classes as usize);
    for _ in 0..n_classes {
        let mut b = [0u8; 1];
        input.read_exact(&mut b)?;
        if b[0] > 1 {
            return Err(fail(format!("seen-class flag must be 0/1, got {}", b[0])));
        }
        seen_classes.push(b[0] == 1);
    }
    let stats_count = leio::read_u64(&mut input)?;
    let stats_mean = leio::read_f64_vec(&mut input, dim)?;
    let stats_m2 = leio::read_f64_vec(&mut input, dim)?;

    let n_rules = leio::read_u32(&mut input)? as usize;
    if n_rules > 1 << 20 {
        return Err(fail(format!("implausible rule count {n_rules}")));
    }
    let mut rules = Vec::with_capacity(n_rules);
    for record in 0..n_rules {
        let id = leio::read_u64(&mut input)?;
        let class_assoc = leio::read_u32(&mut input)?;
        let age = leio::read_u64(&mut input)?;
        let weights = leio::read_f64_vec(&mut input, n_classes as usize)?;
        let mut mfs = Vec::with_capacity(dim);
        for _ in 0..dim {
            mfs.push(It2GaussianMf {
                mean_lo: leio::read_f64(&mut input)?,
                mean_hi: leio::read_f64(&mut input)?,
                sigma: leio::read_f64(&mut input)?,
            });
        }
        let mut len = [0u8; 1];
        input.read_exact(&mut len)?;
        if len[0] as usize > PRUNE_WINDOW {
            return Err(Error::InvalidRecord {
                record,
                reason: format!("contribution window length {} exceeds {PRUNE_WINDOW}", len[0]),
            });
        }
        let mut recent_misses = VecDeque::with_capacity(PRUNE_WINDOW);
        for _ in 0..len[0] {
            let mut b = [0u8; 1];
            input.read_exact(&mut b)?;
            if b[0] > 1 {
                return Err(Error::InvalidRecord {
                    record,
                    reason: format!("miss flag must be 0/1, got {}", b[0]),
                });
            }
            recent_misses.push_back(b[0] == 1);
        }
        rules.push(Rule { id, mfs, weights, class_assoc, age, recent_misses });
    }

    let n_reserved = leio::read_u32(&mut input)? as usize;
    if n_reserved > 1 << 24 {
        return Err(fail(format!("implausible reserve queue length {n_reserved}")));
    }
    let mut reserve_queue = Vec::with_capacity(n_reserved);
    for _ in 0..n_reserved {
        let label = leio::read_u32(&mut input)?;
        let values = leio::read_f64_vec(&mut input, dim)?;
        reserve_queue.push(ReservedSample { values, label });
    }

    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(fail("trailing bytes after model state".into()));
    }

    let model = Srit2nfisModel {
        n_classes,
        dim,
        hyper,
        add_threshold,
        update_threshold,
        rules,
        reserve_queue,
        next_rule_id,
        seen_classes,
        stats_count,
        stats_mean,
        stats_m2,
    };
    model.validate().map_err(|e| fail(e.to_string()))?;
    Ok(model)
}
