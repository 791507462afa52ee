//! Optimizer, learning-rate schedule, gradient accumulation, epoch loop with
//! validation-loss early stopping, and training checkpoints.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    accumulate_gradients, checkpoint, sequence_loss, Example, Matrix, ModelConfig, ModelError,
    Parameters, Scalar,
};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite update in tensor index {0}")]
    NonFiniteUpdate(usize),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Adam with inverse-square-root learning-rate decay after a linear warmup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub accum_freq: usize,
    pub patience: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-6,
            base_lr: 1e-4,
            warmup_steps: 100,
            accum_freq: 4,
            patience: 5,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err("betas must be in [0,1)".into());
        }
        if self.epsilon <= 0.0 {
            return Err("epsilon must be positive".into());
        }
        if self.warmup_steps == 0 {
            return Err("warmup must be at least 1".into());
        }
        if self.accum_freq == 0 {
            return Err("accum_freq must be at least 1".into());
        }
        Ok(())
    }
}

/// Linear warmup to `base_lr`, then inverse-square-root decay anchored at
/// the warmup boundary. Continuous at `step == warmup_steps`.
pub fn lr_at(step: u64, cfg: &OptimizerConfig) -> f64 {
    assert!(step >= 1, "step counting starts at 1");
    if step <= cfg.warmup_steps {
        cfg.base_lr * step as f64 / cfg.warmup_steps as f64
    } else {
        cfg.base_lr * (cfg.warmup_steps as f64 / step as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub step: u64,
    pub first_moment: Parameters<T>,
    pub second_moment: Parameters<T>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(cfg: &ModelConfig) -> Self {
        OptimizerState {
            step: 0,
            first_moment: Parameters::zeros(cfg),
            second_moment: Parameters::zeros(cfg),
        }
    }
}

/// One bias-corrected Adam update with the scheduled learning rate.
pub fn adam_step<T: Scalar>(
    params: &mut Parameters<T>,
    grads: &Parameters<T>,
    state: &mut OptimizerState<T>,
    cfg: &OptimizerConfig,
) -> Result<(), TrainingError> {
    state.step += 1;
    let t = state.step;
    let lr = T::from_f64(lr_at(t, cfg));
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::ONE;
    let eps = T::from_f64(cfg.epsilon);
    let bias1 = T::from_f64(1.0 - cfg.beta1.powi(t as i32));
    let bias2 = T::from_f64(1.0 - cfg.beta2.powi(t as i32));

    let mut ps = params.tensors_mut();
    let gs = grads.tensors();
    let mut ms = state.first_moment.tensors_mut();
    let mut vs = state.second_moment.tensors_mut();
    debug_assert_eq!(ps.len(), gs.len());
    for i in 0..ps.len() {
        let p = &mut ps[i];
        let g = gs[i];
        let m = &mut ms[i];
        let v = &mut vs[i];
        for j in 0..g.data.len() {
            let gj = g.data[j];
            let mj = b1 * m.data[j] + (one - b1) * gj;
            let vj = b2 * v.data[j] + (one - b2) * gj * gj;
            m.data[j] = mj;
            v.data[j] = vj;
            let m_hat = mj / bias1;
            let v_hat = vj / bias2;
            let upd = lr * m_hat / (v_hat.sqrt() + eps);
            p.data[j] -= upd;
            if !p.data[j].is_finite() {
                return Err(TrainingError::NonFiniteUpdate(i));
            }
        }
    }
    Ok(())
}

/// Accumulate gradients over `accum_freq` micro-batches, then take one
/// optimizer step with the token-mean gradient. Returns the mean loss over
/// the consumed micro-batches.
pub fn step_once<T: Scalar>(
    cfg: &ModelConfig,
    params: &mut Parameters<T>,
    state: &mut OptimizerState<T>,
    opt: &OptimizerConfig,
    micro_batches: &[&[Example]],
) -> Result<f64, TrainingError> {
    step_once_with_rng(cfg, params, state, opt, micro_batches, None)
}

/// `step_once` with a dropout stream; pass `Some` when `cfg.dropout > 0`.
pub fn step_once_with_rng<T: Scalar>(
    cfg: &ModelConfig,
    params: &mut Parameters<T>,
    state: &mut OptimizerState<T>,
    opt: &OptimizerConfig,
    micro_batches: &[&[Example]],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<f64, TrainingError> {
    let mut grads = Parameters::zeros(cfg);
    let mut loss_sum = 0.0f64;
    let mut tokens = 0usize;
    for micro in micro_batches {
        for example in *micro {
            let (s, n) = accumulate_gradients::<T, ChaCha8Rng>(
                cfg,
                params,
                example,
                &mut grads,
                dropout_rng.as_deref_mut(),
            )?;
            loss_sum += s;
            tokens += n;
        }
    }
    if tokens == 0 {
        return Err(ModelError::EmptyLoss.into());
    }
    grads.scale(T::from_f64(1.0 / tokens as f64));
    adam_step(params, &grads, state, opt)?;
    Ok(loss_sum / tokens as f64)
}

/// Mean validation loss under the current parameters, dropout off.
pub fn evaluate_loss<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    examples: &[Example],
) -> Result<f64, TrainingError> {
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for ex in examples {
        let (s, n) = sequence_loss(cfg, params, ex)?;
        sum += s;
        tokens += n;
    }
    if tokens == 0 {
        return Err(ModelError::EmptyLoss.into());
    }
    Ok(sum / tokens as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub micro_batch: usize,
    pub max_steps: Option<u64>,
    pub max_epochs: Option<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            micro_batch: 8,
            max_steps: None,
            max_epochs: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    EarlyStopped,
    MaxSteps,
    MaxEpochs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub split: String,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: u64,
    pub epochs: usize,
    pub best_val_loss: f64,
    pub best_val_step: u64,
    pub stop_reason: StopReason,
    pub curves: Vec<CurvePoint>,
}

/// Deterministic length-bucketed micro-batches: examples sort by source
/// length, chunk, and the chunk order shuffles by (seed, epoch).
pub fn build_micro_batches(
    examples: &[Example],
    micro_batch: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by_key(|&i| (examples[i].src.len(), i));
    let mut chunks: Vec<Vec<usize>> = order
        .chunks(micro_batch.max(1))
        .map(|c| c.to_vec())
        .collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    chunks.shuffle(&mut rng);
    chunks
}

/// Full training loop: gradient accumulation, per-epoch validation,
/// early stopping on validation loss, best-checkpoint retention, and loss
/// curves. The best-validation parameters are returned alongside the report;
/// `params` is left at its final (post-stop) state.
#[allow(clippy::too_many_arguments)]
pub fn train<T: Scalar>(
    cfg: &ModelConfig,
    params: &mut Parameters<T>,
    opt: &OptimizerConfig,
    run: &RunConfig,
    train_set: &[Example],
    valid_set: &[Example],
    out_dir: Option<&Path>,
    vocab_digest: &str,
) -> Result<(TrainReport, Parameters<T>), TrainingError> {
    if train_set.is_empty() {
        return Err(TrainingError::EmptyTrainSet);
    }
    let mut state = OptimizerState::new(cfg);
    let mut curves = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_val_step = 0u64;
    let mut best_params = params.clone();
    let mut epochs_since_best = 0usize;
    let mut epoch = 0usize;
    let stop_reason;
    // dropout draws come from a dedicated stream so the data order and the
    // mask sequence are both functions of the run seed
    let mut dropout_rng = if cfg.dropout > 0.0 {
        Some(ChaCha8Rng::seed_from_u64(run.seed ^ 0xD50F_D50F_D50F_D50F))
    } else {
        None
    };

    'outer: loop {
        if let Some(max_epochs) = run.max_epochs {
            if epoch >= max_epochs {
                stop_reason = StopReason::MaxEpochs;
                break;
            }
        }
        let chunks = build_micro_batches(train_set, run.micro_batch, run.seed, epoch);
        let mut idx = 0usize;
        while idx < chunks.len() {
            let group_end = (idx + opt.accum_freq).min(chunks.len());
            let group: Vec<&[Example]> = Vec::new();
            // materialize micro-batch slices
            let views: Vec<Vec<Example>> = chunks[idx..group_end]
                .iter()
                .map(|c| c.iter().map(|&i| train_set[i].clone()).collect())
                .collect();
            let refs: Vec<&[Example]> = views.iter().map(|v| v.as_slice()).collect();
            let _ = group;
            let loss =
                step_once_with_rng(cfg, params, &mut state, opt, &refs, dropout_rng.as_mut())?;
            curves.push(CurvePoint {
                step: state.step,
                split: "train".into(),
                loss,
            });
            idx = group_end;
            if let Some(max_steps) = run.max_steps {
                if state.step >= max_steps {
                    stop_reason = StopReason::MaxSteps;
                    break 'outer;
                }
            }
        }
        epoch += 1;

        if !valid_set.is_empty() {
            let val = evaluate_loss(cfg, params, valid_set)?;
            curves.push(CurvePoint {
                step: state.step,
                split: "valid".into(),
                loss: val,
            });
            let improved = val < best_val;
            if improved {
                best_val = val;
                best_val_step = state.step;
                best_params = params.clone();
                epochs_since_best = 0;
                if let Some(dir) = out_dir {
                    save_train_checkpoint(
                        &dir.join("best"),
                        cfg,
                        &best_params,
                        Some(&state),
                        vocab_digest,
                    )?;
                }
            } else {
                epochs_since_best += 1;
            }
            if epochs_since_best >= opt.patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }

    if let Some(dir) = out_dir {
        save_train_checkpoint(&dir.join("last"), cfg, params, Some(&state), vocab_digest)?;
        write_curves(&dir.join("curves.csv"), &curves)?;
    }
    Ok((
        TrainReport {
            steps: state.step,
            epochs: epoch,
            best_val_loss: best_val,
            best_val_step,
            stop_reason,
            curves,
        },
        best_params,
    ))
}

pub fn write_curves(path: &Path, curves: &[CurvePoint]) -> Result<(), TrainingError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "step,split,loss")?;
    for c in curves {
        writeln!(f, "{},{},{}", c.step, c.split, c.loss)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

fn config_manifest(cfg: &ModelConfig, vocab_digest: &str, step: u64) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("enc_layers".into(), cfg.enc_layers.to_string());
    m.insert("dec_layers".into(), cfg.dec_layers.to_string());
    m.insert("d_model".into(), cfg.d_model.to_string());
    m.insert("n_heads".into(), cfg.n_heads.to_string());
    m.insert("d_ff".into(), cfg.d_ff.to_string());
    m.insert("max_len".into(), cfg.max_len.to_string());
    m.insert("vocab_size".into(), cfg.vocab_size.to_string());
    m.insert("dropout".into(), cfg.dropout.to_string());
    m.insert("vocab_digest".into(), vocab_digest.to_string());
    m.insert("optimizer_step".into(), step.to_string());
    m
}

pub fn config_from_manifest(m: &BTreeMap<String, String>) -> Result<ModelConfig, TrainingError> {
    let get = |k: &str| -> Result<f64, TrainingError> {
        m.get(k).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
            TrainingError::Model(ModelError::Checkpoint(format!("missing manifest key {k}")))
        })
    };
    Ok(ModelConfig {
        enc_layers: get("enc_layers")? as usize,
        dec_layers: get("dec_layers")? as usize,
        d_model: get("d_model")? as usize,
        n_heads: get("n_heads")? as usize,
        d_ff: get("d_ff")? as usize,
        max_len: get("max_len")? as usize,
        vocab_size: get("vocab_size")? as usize,
        dropout: get("dropout")?,
    })
}

/// Save model parameters (and optionally optimizer moments) with a manifest
/// recording the configuration, vocabulary digest, and step count.
pub fn save_train_checkpoint<T: Scalar>(
    dir: &Path,
    cfg: &ModelConfig,
    params: &Parameters<T>,
    state: Option<&OptimizerState<T>>,
    vocab_digest: &str,
) -> Result<(), TrainingError> {
    let step = state.map(|s| s.step).unwrap_or(0);
    let manifest = config_manifest(cfg, vocab_digest, step);
    let mut tensors: Vec<(String, &Matrix<T>)> = params.named();
    let moment_named: Vec<(String, Matrix<T>)>;
    if let Some(state) = state {
        moment_named = state
            .first_moment
            .named()
            .into_iter()
            .map(|(n, m)| (format!("adam.m.{n}"), m.clone()))
            .chain(
                state
                    .second_moment
                    .named()
                    .into_iter()
                    .map(|(n, m)| (format!("adam.v.{n}"), m.clone())),
            )
            .collect();
        for (n, m) in &moment_named {
            tensors.push((n.clone(), m));
        }
    }
    checkpoint::save_checkpoint(dir, &manifest, &tensors)?;
    Ok(())
}

/// Contents of a loaded training checkpoint: configuration, parameters,
/// optimizer state when present, and the raw manifest.
pub type LoadedCheckpoint<T> = (
    ModelConfig,
    Parameters<T>,
    Option<OptimizerState<T>>,
    BTreeMap<String, String>,
);

/// Load a training checkpoint; optimizer moments are restored when present.
pub fn load_train_checkpoint<T: Scalar>(dir: &Path) -> Result<LoadedCheckpoint<T>, TrainingError> {
    let manifest = checkpoint::read_manifest(dir)?;
    let cfg = config_from_manifest(&manifest)?;
    let tensors = checkpoint::load_tensors::<T>(dir)?;
    let params = Parameters::from_named(&cfg, &tensors)?;
    let has_moments = tensors.keys().any(|k| k.starts_with("adam.m."));
    let state = if has_moments {
        let strip = |prefix: &str| -> BTreeMap<String, Matrix<T>> {
            tensors
                .iter()
                .filter_map(|(k, v)| {
                    k.strip_prefix(prefix)
                        .map(|rest| (rest.to_string(), v.clone()))
                })
                .collect()
        };
        let m = Parameters::from_named(&cfg, &strip("adam.m."))?;
        let v = Parameters::from_named(&cfg, &strip("adam.v."))?;
        let step: u64 = manifest
            .get("optimizer_step")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        Some(OptimizerState {
            step,
            first_moment: m,
            second_moment: v,
        })
    } else {
        None
    };
    Ok((cfg, params, state, manifest))
}

// ---------------------------------------------------------------------------
// corpus -> examples
// ---------------------------------------------------------------------------

/// Build training examples from mined text pairs.
pub fn examples_from_text_pairs(
    pairs: &[(String, String)],
    vocab: &crate::textprep::Vocabulary,
    max_len: usize,
) -> Vec<Example> {
    pairs
        .iter()
        .map(|(src, tgt)| {
            let s = crate::textprep::encode(src, vocab);
            let t = crate::textprep::encode(tgt, vocab);
            Example::from_pair(&s.ids, &t.ids, max_len)
        })
        .collect()
}

/// Build training examples from pre-tokenized (noised) pairs.
pub fn examples_from_id_pairs(pairs: &[(Vec<u32>, Vec<u32>)], max_len: usize) -> Vec<Example> {
    pairs
        .iter()
        .map(|(s, t)| Example::from_pair(s, t, max_len))
        .collect()
}
