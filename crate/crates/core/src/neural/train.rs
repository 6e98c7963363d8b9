use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::Adam;
use super::Network;
use crate::error::{invalid, Error, Result};
use crate::grf::TrainingDataset;
use crate::io::{Decoder, Encoder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Stop after the first epoch whose mean loss is at or below this.
    pub target_loss: Option<f64>,
    /// Log every this many epochs; 0 disables.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            batch_size: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            target_loss: None,
            log_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > n_samples {
            return Err(invalid(format!(
                "batch size {} must lie in 1..={n_samples}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }
}

/// Optimizer state carried across training sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub optimizer: Adam,
    pub epochs_done: u64,
}

const STATE_MAGIC: &[u8; 8] = b"SNOPADAM";
const STATE_VERSION: u32 = 1;

impl TrainState {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::default();
        e.bytes(STATE_MAGIC);
        e.u32(STATE_VERSION);
        e.u64(self.epochs_done);
        self.optimizer.encode(&mut e);
        e.finish_with_checksum()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::with_checksum(bytes)?;
        if d.take(8)? != STATE_MAGIC {
            return Err(Error::Format("not an optimizer state file".into()));
        }
        let version = d.u32()?;
        if version != STATE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: STATE_VERSION,
            });
        }
        let epochs_done = d.u64()?;
        let optimizer = Adam::decode(&mut d)?;
        d.expect_end()?;
        Ok(Self {
            optimizer,
            epochs_done,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Mean loss of each epoch run in this session.
    pub history: Vec<f64>,
    pub reached_target: bool,
}

/// Mini-batch Adam on mean squared error. The shuffle of epoch `e` is
/// drawn from stream `e` of a ChaCha20 generator seeded with
/// `config.seed`, so a resumed run replays the same batches as an
/// uninterrupted one.
pub fn train<N: Network + ?Sized>(
    model: &mut N,
    dataset: &TrainingDataset,
    config: &TrainConfig,
    state: Option<TrainState>,
) -> Result<(TrainOutcome, TrainState)> {
    let n_samples = dataset.n_samples();
    config.validate(n_samples)?;
    let n = dataset.n_cells();
    if n != model.n_cells() {
        return Err(invalid(format!(
            "dataset has {n} cells, model expects {}",
            model.n_cells()
        )));
    }
    let mut state = match state {
        Some(s) => {
            if s.optimizer.n_params() != model.params().len() {
                return Err(invalid("optimizer state does not match the model"));
            }
            s
        }
        None => TrainState {
            optimizer: Adam::new(
                model.params().len(),
                config.learning_rate,
                config.beta1,
                config.beta2,
                config.epsilon,
            )?,
            epochs_done: 0,
        },
    };
    let sources = rows_to_array(&dataset.sources, n)?;
    let fluxes = rows_to_array(&dataset.fluxes, n)?;
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut reached_target = false;
    for _ in 0..config.epochs {
        let epoch = state.epochs_done;
        order.sort_unstable();
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = sources.select(Axis(0), batch);
            let y = fluxes.select(Axis(0), batch);
            let (loss, grad) = model.loss_and_gradient(x.view(), y.view())?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch: epoch as usize });
            }
            state.optimizer.update(model.params_mut(), &grad);
            total += loss * batch.len() as f64;
        }
        let mean = total / n_samples as f64;
        history.push(mean);
        state.epochs_done += 1;
        if config.log_every > 0 && state.epochs_done % config.log_every as u64 == 0 {
            log::info!("epoch {} loss {mean:.3e}", state.epochs_done);
        }
        if config.target_loss.is_some_and(|t| mean <= t) {
            reached_target = true;
            break;
        }
    }
    Ok((
        TrainOutcome {
            history,
            reached_target,
        },
        state,
    ))
}

fn rows_to_array(rows: &[Vec<f64>], n: usize) -> Result<Array2<f64>> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), n), flat).map_err(|e| invalid(e.to_string()))
}
