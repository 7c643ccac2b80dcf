//! Trial generators for the four value-comparison tasks.
//!
//! Task A (Pro) picks the higher of two stimulus values, B (Anti) the lower,
//! C (Delay) the higher after a memory delay, and M (DelayAnti) the lower
//! after a delay. Inputs carry 7 channels: fixation, two stimulus
//! modalities, and a one-hot task identifier. Stimuli are encoded as an
//! amplitude-modulated sinusoid plus Gaussian noise on one channel per
//! modality.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_count, real, Real};
use crate::seed;

pub const INPUT_CHANNELS: usize = 7;
pub const OUTPUT_CLASSES: usize = 3;
pub const STIMULUS_STEPS: usize = 200;
pub const RESPONSE_STEPS: usize = 25;
/// Delay lengths drawn during training for the delayed tasks.
pub const TRAIN_DELAYS: [usize; 3] = [25, 50, 75];
/// Fixed delay length used at test time.
pub const TEST_DELAY: usize = 100;

const STIM_LOW: f64 = 0.2;
const STIM_HIGH: f64 = 1.0;
const MIN_CONTRAST: f64 = 0.1;
const STIM_NOISE_STD: f64 = 0.05;
const SINE_PERIOD: f64 = 50.0;
const SINE_DEPTH: f64 = 0.1;
const MASK_TOP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    /// Pro: choose the higher stimulus.
    A,
    /// Anti: choose the lower stimulus.
    B,
    /// Delay: choose the higher stimulus after a delay.
    C,
    /// DelayAnti (the Master task): choose the lower stimulus after a delay.
    M,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::A, TaskKind::B, TaskKind::C, TaskKind::M];

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::A => "A",
            TaskKind::B => "B",
            TaskKind::C => "C",
            TaskKind::M => "M",
        }
    }

    /// Index of the task's one-hot input channel.
    pub fn one_hot_index(&self) -> usize {
        match self {
            TaskKind::A => 3,
            TaskKind::B => 4,
            TaskKind::C => 5,
            TaskKind::M => 6,
        }
    }

    pub fn has_delay(&self) -> bool {
        matches!(self, TaskKind::C | TaskKind::M)
    }

    /// True when the correct choice is the lower stimulus.
    pub fn is_anti(&self) -> bool {
        matches!(self, TaskKind::B | TaskKind::M)
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Train,
    Test,
}

/// Per-step target class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(usize)]
pub enum TargetClass {
    Fixate = 0,
    Choice1 = 1,
    Choice2 = 2,
}

impl TargetClass {
    pub fn index(&self) -> usize {
        *self as usize
    }
}

/// Trial timing: stimulus, optional delay, response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub stimulus_steps: usize,
    pub delay_steps: usize,
    pub response_steps: usize,
}

impl TrialTiming {
    pub fn total(&self) -> usize {
        self.stimulus_steps + self.delay_steps + self.response_steps
    }

    /// First step of the response period.
    pub fn response_start(&self) -> usize {
        self.stimulus_steps + self.delay_steps
    }
}

/// One generated trial: inputs (time x 7 channels), per-step targets, the
/// loss/accuracy mask, and the underlying stimulus values.
#[derive(Debug, Clone)]
pub struct Trial<S> {
    pub task: TaskKind,
    pub inputs: DMatrix<S>,
    pub targets: Vec<TargetClass>,
    pub mask: Vec<S>,
    pub v1: S,
    pub v2: S,
    pub timing: TrialTiming,
}

impl<S: Real> Trial<S> {
    pub fn steps(&self) -> usize {
        self.timing.total()
    }

    /// The class a perfect network reports during the response period.
    pub fn correct_choice(&self) -> TargetClass {
        self.targets[self.steps() - 1]
    }
}

/// Draws a delay length for a delayed task in the given phase.
fn draw_delay(task: TaskKind, phase: Phase, rng: &mut ChaCha8Rng) -> usize {
    if !task.has_delay() {
        return 0;
    }
    match phase {
        Phase::Train => TRAIN_DELAYS[rng.random_range(0..TRAIN_DELAYS.len())],
        Phase::Test => TEST_DELAY,
    }
}

/// Generates a single seeded trial.
pub fn generate_trial<S: Real>(task: TaskKind, phase: Phase, seed: u64) -> Trial<S> {
    let mut rng = seed::rng(seed, &[0x7472_6961u64]);
    let delay = draw_delay(task, phase, &mut rng);
    generate_trial_with(task, delay, &mut rng)
}

/// Generates a trial with a fixed delay from an already-positioned stream.
/// Stimulus draws are consumed in the same order for every task, so tasks
/// differing only in decision rule see identical stimuli for the same
/// stream.
pub fn generate_trial_with<S: Real>(
    task: TaskKind,
    delay_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Trial<S> {
    // stimulus values with a minimum contrast
    let (v1, v2) = loop {
        let a: f64 = rng.random_range(STIM_LOW..STIM_HIGH);
        let b: f64 = rng.random_range(STIM_LOW..STIM_HIGH);
        if (a - b).abs() >= MIN_CONTRAST {
            break (a, b);
        }
    };
    let phi1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let phi2: f64 = rng.random_range(0.0..std::f64::consts::TAU);

    let timing = TrialTiming {
        stimulus_steps: STIMULUS_STEPS,
        delay_steps,
        response_steps: RESPONSE_STEPS,
    };
    let total = timing.total();
    let mut inputs = DMatrix::<S>::zeros(total, INPUT_CHANNELS);
    let response_start = timing.response_start();

    for t in 0..total {
        // fixation on through stimulus and delay
        if t < response_start {
            inputs[(t, 0)] = S::one();
        }
        inputs[(t, task.one_hot_index())] = S::one();
        if t < timing.stimulus_steps {
            let tt = t as f64;
            for (chan, (v, phi)) in [(1usize, (v1, phi1)), (2, (v2, phi2))] {
                let carrier =
                    v * (1.0 + SINE_DEPTH * (std::f64::consts::TAU * tt / SINE_PERIOD + phi).sin());
                let noise: f64 = rng.sample(StandardNormal);
                inputs[(t, chan)] = real::<S>(carrier + STIM_NOISE_STD * noise);
            }
        }
    }

    let choice = if (v1 > v2) != task.is_anti() {
        TargetClass::Choice1
    } else {
        TargetClass::Choice2
    };
    let mut targets = vec![TargetClass::Fixate; total];
    let mut mask = vec![S::one(); total];
    for t in response_start..total {
        targets[t] = choice;
        let j = t - response_start;
        let ramp = if timing.response_steps > 1 {
            1.0 + (MASK_TOP - 1.0) * j as f64 / (timing.response_steps - 1) as f64
        } else {
            MASK_TOP
        };
        mask[t] = real::<S>(ramp);
    }

    Trial {
        task,
        inputs,
        targets,
        mask,
        v1: real(v1),
        v2: real(v2),
        timing,
    }
}

/// Generates a seed-deterministic batch. One delay is drawn per batch, so
/// all trials share the same timing; trials are otherwise independent.
pub fn generate_batch<S: Real>(
    task: TaskKind,
    size: usize,
    phase: Phase,
    seed: u64,
) -> Result<Vec<Trial<S>>> {
    if size < 1 {
        return Err(Error::Config("generate_batch needs size >= 1".into()));
    }
    let mut delay_rng = seed::rng(seed, &[0x6465_6c61u64]);
    let delay = draw_delay(task, phase, &mut delay_rng);
    Ok((0..size)
        .map(|i| {
            let mut rng = seed::rng(seed, &[0x7472_6961u64, i as u64]);
            generate_trial_with(task, delay, &mut rng)
        })
        .collect())
}

/// Mask-weighted fraction of correct response-period predictions.
/// Fixation-period steps do not enter the score; see
/// [`fixation_error_rate`] for that side.
pub fn weighted_accuracy<S: Real>(predictions: &[usize], trial: &Trial<S>) -> Result<S> {
    if predictions.len() != trial.steps() {
        return Err(Error::Dimension(format!(
            "predictions length {} vs trial length {}",
            predictions.len(),
            trial.steps()
        )));
    }
    let start = trial.timing.response_start();
    let mut hit = S::zero();
    let mut total = S::zero();
    for t in start..trial.steps() {
        total += trial.mask[t];
        if predictions[t] == trial.targets[t].index() {
            hit += trial.mask[t];
        }
    }
    Ok(hit / total)
}

/// Fraction of fixation-period steps predicted as anything but FIXATE.
pub fn fixation_error_rate<S: Real>(predictions: &[usize], trial: &Trial<S>) -> Result<S> {
    if predictions.len() != trial.steps() {
        return Err(Error::Dimension(format!(
            "predictions length {} vs trial length {}",
            predictions.len(),
            trial.steps()
        )));
    }
    let start = trial.timing.response_start();
    let mut wrong = 0usize;
    for (t, p) in predictions.iter().enumerate().take(start) {
        if *p != TargetClass::Fixate.index() {
            wrong += 1;
        }
        let _ = t;
    }
    Ok(from_count::<S>(wrong) / from_count::<S>(start))
}

/// Trial-level choice: the response-period class with the largest
/// mask-weighted vote.
pub fn trial_choice<S: Real>(predictions: &[usize], trial: &Trial<S>) -> Result<usize> {
    if predictions.len() != trial.steps() {
        return Err(Error::Dimension("prediction length mismatch".into()));
    }
    let start = trial.timing.response_start();
    let mut votes = [S::zero(); OUTPUT_CLASSES];
    for t in start..trial.steps() {
        if predictions[t] < OUTPUT_CLASSES {
            votes[predictions[t]] += trial.mask[t];
        }
    }
    let mut best = 0;
    for k in 1..OUTPUT_CLASSES {
        if votes[k] > votes[best] {
            best = k;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_a_picks_higher_and_b_picks_lower() {
        for s in 0..50u64 {
            let a: Trial<f64> = generate_trial(TaskKind::A, Phase::Train, s);
            let b: Trial<f64> = generate_trial(TaskKind::B, Phase::Train, s);
            assert_eq!(a.v1, b.v1);
            assert_eq!(a.v2, b.v2);
            let want_a = if a.v1 > a.v2 {
                TargetClass::Choice1
            } else {
                TargetClass::Choice2
            };
            let want_b = if a.v1 > a.v2 {
                TargetClass::Choice2
            } else {
                TargetClass::Choice1
            };
            assert_eq!(a.correct_choice(), want_a);
            assert_eq!(b.correct_choice(), want_b);
            // identical inputs except the one-hot channel
            for t in 0..a.steps() {
                for ch in 0..INPUT_CHANNELS {
                    if ch == TaskKind::A.one_hot_index() || ch == TaskKind::B.one_hot_index() {
                        continue;
                    }
                    assert_eq!(a.inputs[(t, ch)], b.inputs[(t, ch)]);
                }
            }
        }
    }

    #[test]
    fn task_m_is_c_timing_with_b_rule() {
        for s in 0..50u64 {
            let c: Trial<f64> = generate_trial(TaskKind::C, Phase::Train, s);
            let m: Trial<f64> = generate_trial(TaskKind::M, Phase::Train, s);
            assert_eq!(c.timing, m.timing);
            assert_eq!(c.v1, m.v1);
            assert_eq!(c.v2, m.v2);
            let anti = if c.correct_choice() == TargetClass::Choice1 {
                TargetClass::Choice2
            } else {
                TargetClass::Choice1
            };
            assert_eq!(m.correct_choice(), anti);
        }
    }

    #[test]
    fn test_phase_uses_fixed_delay() {
        let m: Trial<f64> = generate_trial(TaskKind::M, Phase::Test, 3);
        assert_eq!(m.timing.delay_steps, 100);
        assert_eq!(m.steps(), 325);
        let a: Trial<f64> = generate_trial(TaskKind::A, Phase::Test, 3);
        assert_eq!(a.timing.delay_steps, 0);
        assert_eq!(a.steps(), 225);
    }

    #[test]
    fn fixation_and_targets_are_complementary() {
        for task in TaskKind::ALL {
            let t: Trial<f64> = generate_trial(task, Phase::Train, 11);
            for step in 0..t.steps() {
                let fix_on = t.inputs[(step, 0)] == 1.0;
                let is_fixate = t.targets[step] == TargetClass::Fixate;
                assert_eq!(fix_on, is_fixate, "task {task} step {step}");
            }
            // exactly one one-hot bit
            for step in 0..t.steps() {
                let bits: f64 = (3..7).map(|ch| t.inputs[(step, ch)]).sum();
                assert_eq!(bits, 1.0);
                assert_eq!(t.inputs[(step, task.one_hot_index())], 1.0);
            }
        }
    }

    #[test]
    fn stimulus_channels_are_silent_after_stimulus() {
        let t: Trial<f64> = generate_trial(TaskKind::M, Phase::Train, 13);
        for step in t.timing.stimulus_steps..t.steps() {
            assert_eq!(t.inputs[(step, 1)], 0.0);
            assert_eq!(t.inputs[(step, 2)], 0.0);
        }
    }

    #[test]
    fn mask_ramps_from_one_to_five() {
        let t: Trial<f64> = generate_trial(TaskKind::A, Phase::Train, 17);
        let start = t.timing.response_start();
        assert_eq!(t.mask[start], 1.0);
        assert_eq!(t.mask[t.steps() - 1], 5.0);
        let sum: f64 = t.mask[start..].iter().sum();
        assert!((sum - 75.0).abs() < 1e-12);
        for v in &t.mask[..start] {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn batches_share_timing_and_are_deterministic() {
        let b1: Vec<Trial<f64>> = generate_batch(TaskKind::M, 64, Phase::Train, 5).unwrap();
        assert_eq!(b1.len(), 64);
        let delay = b1[0].timing.delay_steps;
        assert!(TRAIN_DELAYS.contains(&delay));
        for t in &b1 {
            assert_eq!(t.timing.delay_steps, delay);
        }
        let b2: Vec<Trial<f64>> = generate_batch(TaskKind::M, 64, Phase::Train, 5).unwrap();
        for (x, y) in b1.iter().zip(&b2) {
            assert_eq!(x.inputs, y.inputs);
            assert_eq!(x.targets, y.targets);
        }
    }

    #[test]
    fn choice_frequencies_are_balanced() {
        // symmetry of the value sampler: CHOICE_1 frequency is 1/2
        let mut c1 = 0usize;
        let n = 10_000;
        for s in 0..n {
            let t: Trial<f64> = generate_trial(TaskKind::A, Phase::Train, s as u64);
            if t.correct_choice() == TargetClass::Choice1 {
                c1 += 1;
            }
        }
        let freq = c1 as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn weighted_accuracy_extremes() {
        let t: Trial<f64> = generate_trial(TaskKind::A, Phase::Train, 23);
        let perfect: Vec<usize> = t.targets.iter().map(|c| c.index()).collect();
        assert_eq!(weighted_accuracy(&perfect, &t).unwrap(), 1.0);
        let wrong_class = if t.correct_choice() == TargetClass::Choice1 {
            TargetClass::Choice2
        } else {
            TargetClass::Choice1
        };
        let mut all_wrong = perfect.clone();
        for s in t.timing.response_start()..t.steps() {
            all_wrong[s] = wrong_class.index();
        }
        assert_eq!(weighted_accuracy(&all_wrong, &t).unwrap(), 0.0);
        // fixation-period predictions do not move the score
        let mut fix_garbage = perfect.clone();
        for s in 0..t.timing.response_start() {
            fix_garbage[s] = TargetClass::Choice2.index();
        }
        assert_eq!(weighted_accuracy(&fix_garbage, &t).unwrap(), 1.0);
        assert!(fixation_error_rate(&fix_garbage, &t).unwrap() == 1.0);
        assert!(fixation_error_rate(&perfect, &t).unwrap() == 0.0);
    }

    #[test]
    fn final_step_only_scores_five_in_seventy_five() {
        let t: Trial<f64> = generate_trial(TaskKind::A, Phase::Train, 29);
        let mut preds: Vec<usize> = t
            .targets
            .iter()
            .map(|c| {
                if c.index() == TargetClass::Fixate.index() {
                    0
                } else {
                    // wrong choice everywhere in the response window
                    3 - c.index()
                }
            })
            .collect();
        let last = t.steps() - 1;
        preds[last] = t.targets[last].index();
        let acc = weighted_accuracy(&preds, &t).unwrap();
        assert!((acc - 5.0 / 75.0).abs() < 1e-12, "acc {acc}");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let t: Trial<f64> = generate_trial(TaskKind::A, Phase::Train, 31);
        assert!(weighted_accuracy(&vec![0usize; 3], &t).is_err());
    }

    #[test]
    fn trial_choice_reports_majority() {
        let t: Trial<f64> = generate_trial(TaskKind::A, Phase::Train, 37);
        let perfect: Vec<usize> = t.targets.iter().map(|c| c.index()).collect();
        assert_eq!(
            trial_choice(&perfect, &t).unwrap(),
            t.correct_choice().index()
        );
    }
}
