//! Masked cross-entropy BPTT training with Adam and weight freezing.

use nalgebra::DMatrix;

use super::forward::{batch_inputs, forward_recorded, BatchInputs, ForwardPass};
use super::{CellKind, FreezeMask, NetConfig, NetParams};
use crate::cogtasks::{generate_batch, Phase, TaskKind, Trial, OUTPUT_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::{from_count, real, Real};
use crate::seed;

const TAG_TRAIN: u64 = 0x7472_6e00;
const TAG_VALIDATE: u64 = 0x7661_6c00;

/// Stopping rule and epoch sizing for one training stage.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainSpec<S> {
    /// Stop once every task's validation accuracy reaches this level.
    pub target_accuracy: S,
    pub max_epochs: usize,
    /// Trials per task per epoch.
    pub trials_per_epoch: usize,
    /// Validation trials per task for the stop rule.
    pub validation_trials: usize,
    /// Keep a parameter snapshot per epoch (needed for window checkpoints).
    pub record_snapshots: bool,
}

impl<S: Real> Default for TrainSpec<S> {
    fn default() -> Self {
        Self {
            target_accuracy: real(0.99),
            max_epochs: 50,
            trials_per_epoch: 10_000,
            validation_trials: 512,
            record_snapshots: false,
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone)]
pub struct EpochRecord<S> {
    pub epoch: usize,
    /// Validation accuracy per task after this epoch.
    pub accuracies: Vec<(TaskKind, S)>,
    pub mean_loss: S,
    pub cumulative_trials: usize,
    pub snapshot: Option<NetParams<S>>,
}

#[derive(Debug, Clone)]
pub struct TrainHistory<S> {
    pub epochs: Vec<EpochRecord<S>>,
    /// Whether the accuracy target was met before the epoch cap.
    pub reached_target: bool,
}

impl<S: Real> TrainHistory<S> {
    pub fn final_accuracy(&self, task: TaskKind) -> Option<S> {
        self.epochs
            .last()?
            .accuracies
            .iter()
            .find(|(t, _)| *t == task)
            .map(|(_, a)| *a)
    }
}

/// Adam with constant learning rate and bias correction.
pub struct Adam<S> {
    m: NetParams<S>,
    v: NetParams<S>,
    t: usize,
    beta1: S,
    beta2: S,
    eps: S,
}

impl<S: Real> Adam<S> {
    pub fn new(params: &NetParams<S>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: real(0.9),
            beta2: real(0.999),
            eps: real(1e-8),
        }
    }

    /// Applies one update, skipping frozen groups (their accumulated
    /// moments stay zero, so this equals zeroing the gradients).
    pub fn step(
        &mut self,
        params: &mut NetParams<S>,
        grads: &NetParams<S>,
        lr: S,
        freeze: &FreezeMask,
    ) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = S::one() - self.beta1.powi(t);
        let bc2 = S::one() - self.beta2.powi(t);
        for i in 0..params.tensor_count() {
            let (group, p) = params.tensor_mut(i);
            if !freeze.trainable(group) {
                continue;
            }
            let g = params_tensor(grads, i);
            let m = params_tensor_mut(&mut self.m, i);
            let v = params_tensor_mut(&mut self.v, i);
            for idx in 0..p.len() {
                let gi = g[idx];
                m[idx] = self.beta1 * m[idx] + (S::one() - self.beta1) * gi;
                v[idx] = self.beta2 * v[idx] + (S::one() - self.beta2) * gi * gi;
                let mhat = m[idx] / bc1;
                let vhat = v[idx] / bc2;
                p[idx] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

fn params_tensor<S: Real>(p: &NetParams<S>, i: usize) -> &DMatrix<S> {
    p.tensor(i).1
}

fn params_tensor_mut<S: Real>(p: &mut NetParams<S>, i: usize) -> &mut DMatrix<S> {
    p.tensor_mut(i).1
}

/// Masked mean cross-entropy of a batch (forward only).
pub fn batch_loss<S: Real>(
    params: &NetParams<S>,
    config: &NetConfig<S>,
    trials: &[Trial<S>],
) -> Result<S> {
    let inputs = batch_inputs(trials)?;
    let pass = forward_recorded(params, config, &inputs);
    Ok(masked_ce(&pass, trials))
}

fn masked_ce<S: Real>(pass: &ForwardPass<S>, trials: &[Trial<S>]) -> S {
    let b = trials.len();
    let steps = trials[0].steps();
    let mask = &trials[0].mask;
    let norm = from_count::<S>(b) * mask.iter().copied().sum::<S>();
    let mut loss = S::zero();
    for t in 0..steps {
        let logits = &pass.logits[t];
        for i in 0..b {
            let target = trials[i].targets[t].index();
            loss += mask[t] * row_cross_entropy(logits, i, target);
        }
    }
    loss / norm
}

fn row_cross_entropy<S: Real>(logits: &DMatrix<S>, row: usize, target: usize) -> S {
    let mut maxv = logits[(row, 0)];
    for k in 1..OUTPUT_CLASSES {
        maxv = maxv.max(logits[(row, k)]);
    }
    let mut z = S::zero();
    for k in 0..OUTPUT_CLASSES {
        z += (logits[(row, k)] - maxv).exp();
    }
    -(logits[(row, target)] - maxv) + z.ln()
}

/// Loss and full analytic gradients of a batch through BPTT over the whole
/// trial, with no truncation. Gradients for frozen groups are not
/// accumulated.
pub fn batch_loss_and_grads<S: Real>(
    params: &NetParams<S>,
    config: &NetConfig<S>,
    trials: &[Trial<S>],
    freeze: &FreezeMask,
) -> Result<(S, NetParams<S>)> {
    let inputs = batch_inputs(trials)?;
    let pass = forward_recorded(params, config, &inputs);
    let loss = masked_ce(&pass, trials);
    let grads = backward(params, config, &inputs, &pass, trials, freeze);
    Ok((loss, grads))
}

fn backward<S: Real>(
    params: &NetParams<S>,
    config: &NetConfig<S>,
    inputs: &BatchInputs<S>,
    pass: &ForwardPass<S>,
    trials: &[Trial<S>],
    freeze: &FreezeMask,
) -> NetParams<S> {
    let b = inputs.batch;
    let h = config.hidden;
    let steps = inputs.steps;
    let alpha = config.alpha;
    let mask = &trials[0].mask;
    let norm = from_count::<S>(b) * mask.iter().copied().sum::<S>();
    let mut grads = params.zeros_like();
    // gradient flowing into the hidden state hs[t+1]
    let mut dh = DMatrix::<S>::zeros(b, h);

    for t in (0..steps).rev() {
        // readout
        let logits = &pass.logits[t];
        let mut dlogits = DMatrix::<S>::zeros(b, OUTPUT_CLASSES);
        for i in 0..b {
            let target = trials[i].targets[t].index();
            let mut maxv = logits[(i, 0)];
            for k in 1..OUTPUT_CLASSES {
                maxv = maxv.max(logits[(i, k)]);
            }
            let mut z = S::zero();
            for k in 0..OUTPUT_CLASSES {
                z += (logits[(i, k)] - maxv).exp();
            }
            for k in 0..OUTPUT_CLASSES {
                let p = (logits[(i, k)] - maxv).exp() / z;
                let y = if k == target { S::one() } else { S::zero() };
                dlogits[(i, k)] = (p - y) * mask[t] / norm;
            }
        }
        let h_t = &pass.hs[t + 1];
        if freeze.readout {
            grads.w_out.gemm(S::one(), &h_t.transpose(), &dlogits, S::one());
            for k in 0..OUTPUT_CLASSES {
                let mut acc = S::zero();
                for i in 0..b {
                    acc += dlogits[(i, k)];
                }
                grads.b_out[(0, k)] += acc;
            }
        }
        dh.gemm(S::one(), &dlogits, &params.w_out.transpose(), S::one());

        // cell
        let h_prev = &pass.hs[t];
        let x = &inputs.xs[t];
        match config.cell {
            CellKind::LeakyRnn => {
                let act = &pass.acts[t];
                // dP = alpha * dh ∘ f'(act)
                let mut dp = DMatrix::<S>::zeros(b, h);
                for i in 0..b {
                    for j in 0..h {
                        dp[(i, j)] = alpha
                            * dh[(i, j)]
                            * config.activation.deriv_from_output(act[(i, j)]);
                    }
                }
                accumulate_gate(&mut grads, 0, x, h_prev, &dp, freeze);
                // dh_prev = (1 - alpha) dh + dp W_rec'
                let mut dh_prev = &dh * (S::one() - alpha);
                dh_prev.gemm(S::one(), &dp, &params.w_rec[0].transpose(), S::one());
                dh = dh_prev;
            }
            CellKind::LeakyGru => {
                let r = &pass.gate_r[t];
                let z = &pass.gate_z[t];
                let cand = &pass.gate_c[t];
                let mut dz = DMatrix::<S>::zeros(b, h);
                let mut dpc = DMatrix::<S>::zeros(b, h);
                let mut dh_prev = DMatrix::<S>::zeros(b, h);
                for i in 0..b {
                    for j in 0..h {
                        let dout = dh[(i, j)];
                        let zv = z[(i, j)];
                        let cv = cand[(i, j)];
                        let hv = h_prev[(i, j)];
                        dz[(i, j)] = dout * alpha * (cv - hv) * zv * (S::one() - zv);
                        dpc[(i, j)] = dout
                            * alpha
                            * zv
                            * config.activation.deriv_from_output(cv);
                        dh_prev[(i, j)] = dout * (S::one() - alpha * zv);
                    }
                }
                // candidate block consumes (r ∘ h_prev)
                let rh = r.component_mul(h_prev);
                accumulate_gate(&mut grads, 2, x, &rh, &dpc, freeze);
                let drh = &dpc * params.w_rec[2].transpose();
                let mut dpr = DMatrix::<S>::zeros(b, h);
                for i in 0..b {
                    for j in 0..h {
                        let rv = r[(i, j)];
                        dh_prev[(i, j)] += drh[(i, j)] * rv;
                        dpr[(i, j)] =
                            drh[(i, j)] * h_prev[(i, j)] * rv * (S::one() - rv);
                    }
                }
                accumulate_gate(&mut grads, 0, x, h_prev, &dpr, freeze);
                dh_prev.gemm(S::one(), &dpr, &params.w_rec[0].transpose(), S::one());
                accumulate_gate(&mut grads, 1, x, h_prev, &dz, freeze);
                dh_prev.gemm(S::one(), &dz, &params.w_rec[1].transpose(), S::one());
                dh = dh_prev;
            }
        }
    }
    grads
}

/// Accumulates input, recurrent, and bias gradients of one gate block.
fn accumulate_gate<S: Real>(
    grads: &mut NetParams<S>,
    gate: usize,
    x: &DMatrix<S>,
    h_like: &DMatrix<S>,
    dpre: &DMatrix<S>,
    freeze: &FreezeMask,
) {
    if freeze.input {
        grads.w_in[gate].gemm(S::one(), &x.transpose(), dpre, S::one());
    }
    if freeze.recurrent {
        grads.w_rec[gate].gemm(S::one(), &h_like.transpose(), dpre, S::one());
        for j in 0..dpre.ncols() {
            let mut acc = S::zero();
            for i in 0..dpre.nrows() {
                acc += dpre[(i, j)];
            }
            grads.b[gate][(0, j)] += acc;
        }
    }
}

/// Trains on the listed tasks (sequentially within each epoch) until every
/// task's validation accuracy reaches the target or the epoch cap is hit.
///
/// Per epoch, `trials_per_epoch` trials per task are consumed in batches of
/// `config.batch`; a fresh Adam state is used for the stage; frozen groups
/// receive no updates. A non-finite loss aborts with a training-failure
/// error so the caller can record and exclude the run.
pub fn train_stage<S: Real>(
    params: &NetParams<S>,
    config: &NetConfig<S>,
    tasks: &[TaskKind],
    freeze: &FreezeMask,
    spec: &TrainSpec<S>,
    seed: u64,
) -> Result<(NetParams<S>, TrainHistory<S>)> {
    if tasks.is_empty() {
        return Err(Error::Config("train_stage needs at least one task".into()));
    }
    config.validate()?;
    freeze.validate()?;
    let mut params = params.clone();
    let mut adam = Adam::new(&params);
    let mut history = TrainHistory {
        epochs: Vec::new(),
        reached_target: false,
    };
    // fixed validation sets, one per task
    let validation: Vec<(TaskKind, Vec<Trial<S>>)> = tasks
        .iter()
        .map(|&task| {
            let trials = validation_set(task, spec.validation_trials, config.batch, seed)?;
            Ok((task, trials))
        })
        .collect::<Result<_>>()?;

    let mut cumulative_trials = 0usize;
    for epoch in 1..=spec.max_epochs {
        let mut loss_sum = S::zero();
        let mut loss_count = 0usize;
        for (task_idx, &task) in tasks.iter().enumerate() {
            let mut remaining = spec.trials_per_epoch;
            let mut batch_idx = 0u64;
            while remaining > 0 {
                let size = remaining.min(config.batch);
                let batch_seed = seed::derive(
                    seed,
                    &[TAG_TRAIN, epoch as u64, task_idx as u64, batch_idx],
                );
                let trials: Vec<Trial<S>> =
                    generate_batch(task, size, Phase::Train, batch_seed)?;
                let (loss, grads) = batch_loss_and_grads(&params, config, &trials, freeze)?;
                if !loss.is_finite() {
                    return Err(Error::TrainingFailure(format!(
                        "non-finite loss at epoch {epoch}, task {task}, batch {batch_idx}"
                    )));
                }
                adam.step(&mut params, &grads, config.lr, freeze);
                loss_sum += loss;
                loss_count += 1;
                cumulative_trials += size;
                remaining -= size;
                batch_idx += 1;
            }
        }
        if !params.all_finite() {
            return Err(Error::TrainingFailure(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
        let mut accuracies = Vec::with_capacity(tasks.len());
        for (task, trials) in &validation {
            let acc = super::forward::weighted_accuracy_on(&params, config, trials)?;
            accuracies.push((*task, acc));
        }
        let done = accuracies.iter().all(|(_, a)| *a >= spec.target_accuracy);
        history.epochs.push(EpochRecord {
            epoch,
            accuracies,
            mean_loss: loss_sum / from_count::<S>(loss_count.max(1)),
            cumulative_trials,
            snapshot: spec.record_snapshots.then(|| params.clone()),
        });
        if done {
            history.reached_target = true;
            break;
        }
    }
    Ok((params, history))
}

/// The fixed validation set for one task: full batches so trials share
/// timing within each batch.
fn validation_set<S: Real>(
    task: TaskKind,
    total: usize,
    batch: usize,
    seed: u64,
) -> Result<Vec<Trial<S>>> {
    let mut out = Vec::with_capacity(total);
    let mut remaining = total;
    let mut idx = 0u64;
    while remaining > 0 {
        let size = remaining.min(batch);
        let s = seed::derive(seed, &[TAG_VALIDATE, task.one_hot_index() as u64, idx]);
        out.extend(generate_batch(task, size, Phase::Train, s)?);
        remaining -= size;
        idx += 1;
    }
    Ok(out)
}
