//! Leaky recurrent cells (RNN and GRU), forward simulation with
//! hidden-state recording, BPTT training with Adam and masked cross-entropy,
//! weight freezing, and checkpointing.

mod checkpoint;
mod forward;
mod train;

pub use checkpoint::{
    checkpoint_windows, load_checkpoint, save_checkpoint, Checkpoint, RngState, DEFAULT_WINDOWS,
};
pub use forward::{forward_trial, predictions_from_logits, weighted_accuracy_on, ForwardOutput};
pub use train::{
    batch_loss, batch_loss_and_grads, train_stage, Adam, EpochRecord, TrainHistory, TrainSpec,
};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cogtasks::{INPUT_CHANNELS, OUTPUT_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    LeakyRnn,
    LeakyGru,
}

impl CellKind {
    /// Number of gate blocks (input matrix, recurrent matrix, bias) the cell
    /// carries.
    pub fn gates(&self) -> usize {
        match self {
            CellKind::LeakyRnn => 1,
            CellKind::LeakyGru => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CellKind::LeakyRnn => "leaky_rnn",
            CellKind::LeakyGru => "leaky_gru",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Softplus,
    Tanh,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
            Activation::Tanh => "tanh",
        }
    }

    #[inline]
    pub fn apply<S: Real>(&self, p: S) -> S {
        match self {
            Activation::Relu => p.max(S::zero()),
            Activation::Softplus => p.max(S::zero()) + (-p.abs()).exp().ln_1p(),
            Activation::Tanh => p.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn deriv_from_output<S: Real>(&self, a: S) -> S {
        match self {
            Activation::Relu => {
                if a > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Softplus => S::one() - (-a).exp(),
            Activation::Tanh => S::one() - a * a,
        }
    }
}

#[inline]
pub(crate) fn sigmoid<S: Real>(p: S) -> S {
    if p >= S::zero() {
        S::one() / (S::one() + (-p).exp())
    } else {
        let e = p.exp();
        e / (S::one() + e)
    }
}

/// Network hyperparameters. The paper's grid spans 2 cells, 3 activations,
/// 2 hidden sizes, 2 learning rates, and 3 batch sizes: 72 configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig<S> {
    pub cell: CellKind,
    pub activation: Activation,
    pub hidden: usize,
    pub lr: S,
    pub batch: usize,
    /// Leak coefficient in (0, 1].
    pub alpha: S,
}

impl<S: Real> NetConfig<S> {
    pub fn new(cell: CellKind, activation: Activation, hidden: usize, lr: S, batch: usize) -> Self {
        Self {
            cell,
            activation,
            hidden,
            lr,
            batch,
            alpha: real(0.2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 {
            return Err(Error::Config("hidden and batch must be >= 1".into()));
        }
        if self.alpha <= S::zero() || self.alpha > S::one() {
            return Err(Error::Config("alpha must lie in (0, 1]".into()));
        }
        if self.lr <= S::zero() {
            return Err(Error::Config("lr must be positive".into()));
        }
        Ok(())
    }

    /// Short label used in reports and file names.
    pub fn label(&self) -> String {
        format!(
            "{}_{}_h{}_lr{}_b{}",
            self.cell.name(),
            self.activation.name(),
            self.hidden,
            crate::scalar::to_f64(self.lr),
            self.batch
        )
    }
}

/// Which parameter groups receive gradient updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeMask {
    pub input: bool,
    pub recurrent: bool,
    pub readout: bool,
}

impl FreezeMask {
    /// Everything trainable.
    pub fn none() -> Self {
        Self {
            input: true,
            recurrent: true,
            readout: true,
        }
    }

    /// Only the input weights learn; recurrent, bias, and readout are fixed.
    pub fn input_only() -> Self {
        Self {
            input: true,
            recurrent: false,
            readout: false,
        }
    }

    pub fn trainable(&self, group: ParamGroup) -> bool {
        match group {
            ParamGroup::Input => self.input,
            ParamGroup::Recurrent => self.recurrent,
            ParamGroup::Readout => self.readout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input || self.recurrent || self.readout) {
            return Err(Error::Config(
                "freeze mask leaves no trainable group".into(),
            ));
        }
        Ok(())
    }
}

/// Parameter groups for freezing: input projections, recurrent weights plus
/// biases, and the readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Input,
    Recurrent,
    Readout,
}

/// Network parameters. Gate blocks are indexed `[reset, update, candidate]`
/// for the GRU and have a single entry for the leaky RNN. Biases are stored
/// as 1-row matrices so every tensor shares one shape type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<S> {
    pub w_in: Vec<DMatrix<S>>,
    pub w_rec: Vec<DMatrix<S>>,
    pub b: Vec<DMatrix<S>>,
    pub w_out: DMatrix<S>,
    pub b_out: DMatrix<S>,
}

impl<S: Real> NetParams<S> {
    /// Seeded initialization: scaled-Gaussian input and readout weights,
    /// orthogonal recurrent matrices, zero biases.
    pub fn init(config: &NetConfig<S>, seed: u64) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let g = config.cell.gates();
        let mut w_in = Vec::with_capacity(g);
        let mut w_rec = Vec::with_capacity(g);
        let mut b = Vec::with_capacity(g);
        for k in 0..g {
            let mut rng = seed::rng(seed, &[1, k as u64]);
            let std_in = real::<S>(1.0 / (INPUT_CHANNELS as f64).sqrt());
            w_in.push(DMatrix::from_fn(INPUT_CHANNELS, h, |_, _| {
                real::<S>(rng.sample::<f64, _>(StandardNormal)) * std_in
            }));
            let mut rng = seed::rng(seed, &[2, k as u64]);
            w_rec.push(random_orthogonal(h, &mut rng));
            b.push(DMatrix::zeros(1, h));
        }
        let mut rng = seed::rng(seed, &[3]);
        let std_out = real::<S>(1.0 / (h as f64).sqrt());
        let w_out = DMatrix::from_fn(h, OUTPUT_CLASSES, |_, _| {
            real::<S>(rng.sample::<f64, _>(StandardNormal)) * std_out
        });
        let b_out = DMatrix::zeros(1, OUTPUT_CLASSES);
        Ok(Self {
            w_in,
            w_rec,
            b,
            w_out,
            b_out,
        })
    }

    /// Same shapes, all zeros. Used for gradients and optimizer state.
    pub fn zeros_like(&self) -> Self {
        Self {
            w_in: self
                .w_in
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect(),
            w_rec: self
                .w_rec
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect(),
            b: self
                .b
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect(),
            w_out: DMatrix::zeros(self.w_out.nrows(), self.w_out.ncols()),
            b_out: DMatrix::zeros(self.b_out.nrows(), self.b_out.ncols()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_out.nrows()
    }

    /// Flat tensor order: gate input matrices, gate recurrent matrices,
    /// gate biases, readout weights, readout bias.
    pub fn tensor_count(&self) -> usize {
        self.w_in.len() + self.w_rec.len() + self.b.len() + 2
    }

    pub fn tensor(&self, i: usize) -> (ParamGroup, &DMatrix<S>) {
        let g = self.w_in.len();
        if i < g {
            (ParamGroup::Input, &self.w_in[i])
        } else if i < 2 * g {
            (ParamGroup::Recurrent, &self.w_rec[i - g])
        } else if i < 3 * g {
            (ParamGroup::Recurrent, &self.b[i - 2 * g])
        } else if i == 3 * g {
            (ParamGroup::Readout, &self.w_out)
        } else {
            (ParamGroup::Readout, &self.b_out)
        }
    }

    pub fn tensor_mut(&mut self, i: usize) -> (ParamGroup, &mut DMatrix<S>) {
        let g = self.w_in.len();
        if i < g {
            (ParamGroup::Input, &mut self.w_in[i])
        } else if i < 2 * g {
            (ParamGroup::Recurrent, &mut self.w_rec[i - g])
        } else if i < 3 * g {
            (ParamGroup::Recurrent, &mut self.b[i - 2 * g])
        } else if i == 3 * g {
            (ParamGroup::Readout, &mut self.w_out)
        } else {
            (ParamGroup::Readout, &mut self.b_out)
        }
    }

    /// Canonical block name used in checkpoint files.
    pub fn tensor_name(&self, i: usize) -> String {
        let g = self.w_in.len();
        if i < g {
            format!("w_in.{i}")
        } else if i < 2 * g {
            format!("w_rec.{}", i - g)
        } else if i < 3 * g {
            format!("b.{}", i - 2 * g)
        } else if i == 3 * g {
            "w_out".into()
        } else {
            "b_out".into()
        }
    }

    pub fn all_finite(&self) -> bool {
        (0..self.tensor_count()).all(|i| self.tensor(i).1.iter().all(|v| v.is_finite()))
    }
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix).
fn random_orthogonal<S: Real>(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<S> {
    let g = DMatrix::from_fn(n, n, |_, _| real::<S>(rng.sample::<f64, _>(StandardNormal)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < S::zero() {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
