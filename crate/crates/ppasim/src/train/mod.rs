//! Straight-through-estimator training of the binarized localisation net.
//!
//! Plain momentum SGD over the latent weights, losses summed across the two
//! heads, single-threaded and fully seeded: the same `TrainConfig` always
//! produces the same metrics history and the same exported model bytes.

mod latent;

pub use latent::{
    batch_pass, fold_batch_norm, BatchNorm, BatchResult, ExportError, FoldedThreshold, Gradients,
    LatentModel, PreparedSample,
};

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bnn::{infer_reference, BnnModel};
use crate::world::{load_dataset, DatasetError, LabeledFrame};

const MOMENTUM: f32 = 0.9;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty: {0}")]
    EmptyDataset(PathBuf),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub seed: u64,
    pub train_path: PathBuf,
    pub test_path: PathBuf,
}

/// One epoch of history. Losses are per-sample means; the reported total is
/// exactly `loss_x + loss_y`. Accuracies are measured on the test set with
/// the exported model, so the final row matches the shipped artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss_x: f64,
    pub loss_y: f64,
    pub loss: f64,
    pub train_acc_x: f64,
    pub train_acc_y: f64,
    pub acc_x: f64,
    pub acc_y: f64,
    pub acc_joint: f64,
}

pub struct TrainOutcome {
    pub latent: LatentModel,
    pub model: BnnModel,
    pub history: Vec<EpochMetrics>,
}

/// Accuracy of a model's reference inference over a record set.
pub fn evaluate(model: &BnnModel, records: &[LabeledFrame]) -> (f64, f64, f64) {
    let mut hits_x = 0usize;
    let mut hits_y = 0usize;
    let mut joint = 0usize;
    for r in records {
        let result = infer_reference(model, &r.image).expect("records are frame-sized");
        let hx = result.prediction.label_x == r.label_x;
        let hy = result.prediction.label_y == r.label_y;
        hits_x += hx as usize;
        hits_y += hy as usize;
        joint += (hx && hy) as usize;
    }
    let n = records.len() as f64;
    (hits_x as f64 / n, hits_y as f64 / n, joint as f64 / n)
}

/// Train from dataset files.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let train_set = load_dataset(&config.train_path)?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset(config.train_path.clone()));
    }
    let test_set = load_dataset(&config.test_path)?;
    if test_set.is_empty() {
        return Err(TrainError::EmptyDataset(config.test_path.clone()));
    }
    train_records(&train_set, &test_set, config)
}

/// Train on in-memory record sets.
pub fn train_records(
    train_set: &[LabeledFrame],
    test_set: &[LabeledFrame],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let mut latent = LatentModel::init(config.seed);
    let input_threshold = latent.input_threshold;
    let prepared: Vec<PreparedSample> = train_set
        .iter()
        .map(|r| PreparedSample::from_pixels(r.image.pixels(), r.label_x, r.label_y, input_threshold))
        .collect();

    let mut velocity = Velocity::zeros(&latent);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    // Separate stream from weight init so reordering draws can't collide.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e3779b97f4a7c15);
    let mut history = Vec::with_capacity(config.epochs);

    // TEMP experiment knobs
    let conv_mult: f32 = std::env::var("PPASIM_CONV_LR_MULT").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0);
    let decay: bool = std::env::var("PPASIM_LR_DECAY").is_ok();

    for epoch in 1..=config.epochs {
        let mut lr = config.learning_rate;
        if decay {
            if epoch * 10 > config.epochs * 6 { lr *= 0.3; }
            if epoch * 10 > config.epochs * 85 / 10 { lr *= 0.3; }
        }
        order.shuffle(&mut rng);
        let mut loss_x_sum = 0.0f64;
        let mut loss_y_sum = 0.0f64;
        let mut hits_x = 0usize;
        let mut hits_y = 0usize;

        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<&PreparedSample> = chunk.iter().map(|&i| &prepared[i]).collect();
            let result = batch_pass(&mut latent, &batch);
            if !(result.loss_x.is_finite() && result.loss_y.is_finite()) {
                return Err(TrainError::Diverged { epoch });
            }
            loss_x_sum += result.loss_x;
            loss_y_sum += result.loss_y;
            hits_x += result.hits_x;
            hits_y += result.hits_y;
            apply_update(&mut latent, &mut velocity, &result.gradients, lr, conv_mult);
        }

        let n = prepared.len() as f64;
        let model = latent.export()?;
        let (acc_x, acc_y, acc_joint) = evaluate(&model, test_set);
        let loss_x = loss_x_sum / n;
        let loss_y = loss_y_sum / n;
        history.push(EpochMetrics {
            epoch,
            loss_x,
            loss_y,
            loss: loss_x + loss_y,
            train_acc_x: hits_x as f64 / n,
            train_acc_y: hits_y as f64 / n,
            acc_x,
            acc_y,
            acc_joint,
        });
    }

    let model = latent.export()?;
    Ok(TrainOutcome {
        latent,
        model,
        history,
    })
}

struct Velocity {
    conv: Vec<[f32; 9]>,
    gamma: Vec<f32>,
    beta: Vec<f32>,
    fc_x: Vec<Vec<f32>>,
    fc_y: Vec<Vec<f32>>,
}

impl Velocity {
    fn zeros(latent: &LatentModel) -> Self {
        Self {
            conv: vec![[0.0; 9]; latent.conv.len()],
            gamma: vec![0.0; latent.bn.len()],
            beta: vec![0.0; latent.bn.len()],
            fc_x: latent.fc_x.iter().map(|w| vec![0.0; w.len()]).collect(),
            fc_y: latent.fc_y.iter().map(|w| vec![0.0; w.len()]).collect(),
        }
    }
}

/// Momentum step with the weight-side STE: the gradient is masked where the
/// latent weight has left [−1, 1], and weights are clipped back afterwards.
fn apply_update(latent: &mut LatentModel, vel: &mut Velocity, grads: &Gradients, lr: f32, conv_mult: f32) {
    let ste = |w: f32, g: f32| if w.abs() <= 1.0 { g } else { 0.0 };
    let conv_lr = lr * conv_mult;
    for c in 0..latent.conv.len() {
        for t in 0..9 {
            let g = ste(latent.conv[c][t], grads.conv[c][t]);
            vel.conv[c][t] = MOMENTUM * vel.conv[c][t] + g;
            latent.conv[c][t] = (latent.conv[c][t] - conv_lr * vel.conv[c][t]).clamp(-1.0, 1.0);
        }
        vel.gamma[c] = MOMENTUM * vel.gamma[c] + grads.gamma[c];
        latent.bn[c].gamma -= conv_lr * vel.gamma[c];
        vel.beta[c] = MOMENTUM * vel.beta[c] + grads.beta[c];
        latent.bn[c].beta -= conv_lr * vel.beta[c];
    }
    for (w_head, (v_head, g_head)) in [
        (&mut latent.fc_x, (&mut vel.fc_x, &grads.fc_x)),
        (&mut latent.fc_y, (&mut vel.fc_y, &grads.fc_y)),
    ] {
        for o in 0..w_head.len() {
            for i in 0..w_head[o].len() {
                let g = ste(w_head[o][i], g_head[o][i]);
                v_head[o][i] = MOMENTUM * v_head[o][i] + g;
                w_head[o][i] = (w_head[o][i] - lr * v_head[o][i]).clamp(-1.0, 1.0);
            }
        }
    }
}

/// Metrics CSV: `epoch,loss,acc_x,acc_y,acc_joint`, one row per epoch.
pub fn write_metrics_csv(history: &[EpochMetrics], path: &Path) -> Result<(), TrainError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "epoch,loss,acc_x,acc_y,acc_joint")?;
    for m in history {
        writeln!(
            f,
            "{},{:.6},{:.6},{:.6},{:.6}",
            m.epoch, m.loss, m.acc_x, m.acc_y, m.acc_joint
        )?;
    }
    Ok(())
}
