//! Training-window checkpoints and their on-disk format.
//!
//! A checkpoint file is a 64-bit little-endian length, a JSON header
//! (config, epoch, accuracies, RNG state), then one binary block per
//! parameter tensor: name length and bytes, row and column counts, and the
//! values as 64-bit little-endian floats in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{NetConfig, NetParams, TrainHistory};
use crate::cogtasks::TaskKind;
use crate::container::{read_f64, read_u64, write_f64, write_u64};
use crate::error::{Error, Result};
use crate::scalar::{real, to_f64, Real};

/// The six windows of training used by the analyses, as fractions of the
/// total epoch count.
pub const DEFAULT_WINDOWS: [(f64, f64); 6] = [
    (0.10, 0.25),
    (0.25, 0.40),
    (0.40, 0.55),
    (0.55, 0.70),
    (0.70, 0.85),
    (0.85, 1.00),
];

/// Deterministic RNG bookkeeping: training derives every stream from the
/// stage seed and epoch index, so these two values reproduce the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub stage_seed: u64,
    pub next_epoch: u64,
}

/// A parameter snapshot taken at one epoch of a training run.
#[derive(Debug, Clone)]
pub struct Checkpoint<S> {
    pub params: NetParams<S>,
    pub epoch: usize,
    pub accuracies: Vec<(TaskKind, S)>,
    pub cumulative_trials: usize,
    pub rng: RngState,
    /// Set when an earlier window already selected this epoch (fewer epochs
    /// than windows).
    pub flagged_duplicate: bool,
}

/// Picks the epoch nearest each window midpoint from a history recorded
/// with snapshots. Duplicated selections (short runs) are flagged.
pub fn checkpoint_windows<S: Real>(
    history: &TrainHistory<S>,
    windows: &[(f64, f64)],
    stage_seed: u64,
) -> Result<Vec<Checkpoint<S>>> {
    let total = history.epochs.len();
    if total == 0 {
        return Err(Error::Config("checkpoint_windows: empty history".into()));
    }
    let mut used = Vec::new();
    let mut out = Vec::with_capacity(windows.len());
    for &(lo, hi) in windows {
        let mid = (lo + hi) / 2.0;
        let epoch = ((mid * total as f64).round() as usize).clamp(1, total);
        let rec = &history.epochs[epoch - 1];
        let params = rec.snapshot.clone().ok_or_else(|| {
            Error::Config("checkpoint_windows needs record_snapshots = true".into())
        })?;
        let flagged_duplicate = used.contains(&epoch);
        used.push(epoch);
        out.push(Checkpoint {
            params,
            epoch,
            accuracies: rec.accuracies.clone(),
            cumulative_trials: rec.cumulative_trials,
            rng: RngState {
                stage_seed,
                next_epoch: epoch as u64 + 1,
            },
            flagged_duplicate,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Header<S> {
    format: String,
    config: NetConfig<S>,
    epoch: usize,
    accuracies: Vec<(TaskKind, f64)>,
    cumulative_trials: usize,
    rng: RngState,
    flagged_duplicate: bool,
}

pub fn save_checkpoint<S: Real + Serialize>(
    path: &Path,
    checkpoint: &Checkpoint<S>,
    config: &NetConfig<S>,
) -> Result<()> {
    let header = Header {
        format: "dynabench-checkpoint-v1".to_string(),
        config: *config,
        epoch: checkpoint.epoch,
        accuracies: checkpoint
            .accuracies
            .iter()
            .map(|(t, a)| (*t, to_f64(*a)))
            .collect(),
        cumulative_trials: checkpoint.cumulative_trials,
        rng: checkpoint.rng,
        flagged_duplicate: checkpoint.flagged_duplicate,
    };
    let json = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    write_u64(&mut w, json.len() as u64)?;
    w.write_all(&json)?;
    let params = &checkpoint.params;
    write_u64(&mut w, params.tensor_count() as u64)?;
    for i in 0..params.tensor_count() {
        let name = params.tensor_name(i);
        let (_, m) = params.tensor(i);
        write_u64(&mut w, name.len() as u64)?;
        w.write_all(name.as_bytes())?;
        write_u64(&mut w, m.nrows() as u64)?;
        write_u64(&mut w, m.ncols() as u64)?;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                write_f64(&mut w, to_f64(m[(r, c)]))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<S: Real + Serialize + DeserializeOwned>(
    path: &Path,
) -> Result<(Checkpoint<S>, NetConfig<S>)> {
    let mut r = BufReader::new(File::open(path)?);
    let json_len = read_u64(&mut r)? as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)?;
    let header: Header<S> = serde_json::from_slice(&json)?;
    if header.format != "dynabench-checkpoint-v1" {
        return Err(Error::Format(format!(
            "unknown checkpoint format {}",
            header.format
        )));
    }
    let mut params = NetParams::<S>::init(&header.config, 0)?.zeros_like();
    let n_blocks = read_u64(&mut r)? as usize;
    if n_blocks != params.tensor_count() {
        return Err(Error::Format(format!(
            "checkpoint has {n_blocks} blocks, config implies {}",
            params.tensor_count()
        )));
    }
    let mut filled = vec![false; params.tensor_count()];
    for _ in 0..n_blocks {
        let name_len = read_u64(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("bad block name".into()))?;
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let idx = (0..params.tensor_count())
            .find(|&i| params.tensor_name(i) == name)
            .ok_or_else(|| Error::Format(format!("unexpected block {name}")))?;
        let m = params.tensor_mut(idx).1;
        if m.shape() != (rows, cols) {
            return Err(Error::Format(format!(
                "block {name} has shape ({rows}, {cols}), expected {:?}",
                m.shape()
            )));
        }
        for rr in 0..rows {
            for cc in 0..cols {
                m[(rr, cc)] = real::<S>(read_f64(&mut r)?);
            }
        }
        filled[idx] = true;
    }
    if !filled.iter().all(|&f| f) {
        return Err(Error::Format("checkpoint is missing blocks".into()));
    }
    let checkpoint = Checkpoint {
        params,
        epoch: header.epoch,
        accuracies: header
            .accuracies
            .iter()
            .map(|(t, a)| (*t, real::<S>(*a)))
            .collect(),
        cumulative_trials: header.cumulative_trials,
        rng: header.rng,
        flagged_duplicate: header.flagged_duplicate,
    };
    Ok((checkpoint, header.config))
}
