use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::objective::{total_loss_and_grads, Objective};
use super::optim::{adam_step, OptimizerState};
use crate::field::{geometric_init, save_checkpoint, FieldParams};
use crate::geometry::CrossSectionSet;
use crate::rng::{self, TAG_SHUFFLE};
use crate::sampling::{build_sample_bank, sample_regularization_batch, CapWarning, LabeledSample};
use crate::{Error, Result};

pub const LOG_COLUMNS: [&str; 9] =
    ["epoch", "iter", "loss_total", "loss_on", "loss_off", "loss_eik", "loss_min", "off_fraction", "lr"];

/// Per-epoch means of the loss terms; `iter` counts iterations completed
/// so far across the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub iter: u64,
    pub loss_total: f64,
    pub loss_on: f64,
    pub loss_off: f64,
    pub loss_eik: f64,
    pub loss_min: f64,
    pub off_fraction: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebuildEvent {
    pub epoch: usize,
    pub stage: usize,
    pub epsilon: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    pub rebuilds: Vec<RebuildEvent>,
    pub cap_warnings: Vec<CapWarning>,
}

impl TrainLog {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record(LOG_COLUMNS).map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<LogRow>> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::InvalidInput(e.to_string()))?;
        r.deserialize().map(|row| row.map_err(|e| Error::InvalidInput(e.to_string()))).collect()
    }
}

pub struct TrainOutput {
    pub params: FieldParams<f32>,
    pub log: TrainLog,
}

#[derive(Default)]
pub struct TrainHooks<'a> {
    /// Called after every epoch.
    pub on_epoch: Option<&'a mut dyn FnMut(&LogRow)>,
    /// Where to write the last good parameters if training diverges.
    pub last_good_path: Option<PathBuf>,
}

pub fn train(sections: &CrossSectionSet, config: &TrainConfig) -> Result<TrainOutput> {
    train_with(sections, config, &mut TrainHooks::default())
}

fn bail(err: Error, last_good: &Option<FieldParams<f32>>, hooks: &TrainHooks<'_>) -> Error {
    if let (Some(p), Some(path)) = (last_good, &hooks.last_good_path) {
        match save_checkpoint(p, path) {
            Ok(()) => log::error!("training diverged; last good parameters written to {}", path.display()),
            Err(e) => log::error!("training diverged and saving the last good parameters failed: {e}"),
        }
    }
    err
}

/// Trains a field on normalized cross-sections.
pub fn train_with(sections: &CrossSectionSet, config: &TrainConfig, hooks: &mut TrainHooks<'_>) -> Result<TrainOutput> {
    config.validate()?;
    if sections.contour_count() == 0 {
        return Err(Error::NoContours);
    }
    let mut params = geometric_init::<f32>(config.field, config.init_radius, config.seed)?;
    params.normalization = sections.normalization;
    let mut state = OptimizerState::new(&params);
    let objective = Objective { weights: config.weights, mode: config.grad_mode, data_loss: config.data_loss };
    let schedule = &config.schedule;
    let batch_size = config.batch_size();
    let reg_size = config.reg_batch_size();

    let mut log = TrainLog::default();
    let mut bank: Vec<LabeledSample> = Vec::new();
    let mut last_good = hooks.last_good_path.as_ref().map(|_| params.clone());
    let mut iter: u64 = 0;
    for epoch in 0..config.epochs {
        if bank.is_empty() || schedule.relabel_epochs.contains(&epoch) {
            let stage = schedule.stage_for_epoch(epoch);
            let built = build_sample_bank(sections, schedule, stage, config.seed)?;
            log::info!("epoch {epoch}: sample bank stage {stage}, {} samples", built.samples.len());
            log.rebuilds.push(RebuildEvent { epoch, stage, epsilon: schedule.epsilons[stage], samples: built.samples.len() });
            log.cap_warnings.extend(built.warnings);
            bank = built.samples;
        }
        let lr = config.adam.learning_rate(epoch);
        let mut order: Vec<usize> = (0..bank.len()).collect();
        order.shuffle(&mut rng::stream(&[TAG_SHUFFLE, config.seed, epoch as u64]));

        let mut sums = [0f64; 6];
        let mut iters = 0usize;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<LabeledSample> = chunk.iter().map(|&i| bank[i]).collect();
            let reg = sample_regularization_batch(reg_size, config.seed, iter);
            let (loss, grads) = match total_loss_and_grads(&params, &batch, &reg, &objective) {
                Ok(v) => v,
                Err(e) => return Err(bail(e, &last_good, hooks)),
            };
            if let Err(e) = adam_step(&mut params, &grads, &mut state, &config.adam, lr) {
                return Err(bail(e, &last_good, hooks));
            }
            for (s, v) in sums.iter_mut().zip([loss.total, loss.on, loss.off, loss.eik, loss.min, loss.off_fraction()]) {
                *s += v;
            }
            iters += 1;
            iter += 1;
        }
        let k = iters.max(1) as f64;
        let row = LogRow {
            epoch,
            iter,
            loss_total: sums[0] / k,
            loss_on: sums[1] / k,
            loss_off: sums[2] / k,
            loss_eik: sums[3] / k,
            loss_min: sums[4] / k,
            off_fraction: sums[5] / k,
            lr,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} (on {:.5}, off {:.6}, eik {:.4}, min {:.4}), off {:.4}, lr {lr:e}",
            row.loss_total,
            row.loss_on,
            row.loss_off,
            row.loss_eik,
            row.loss_min,
            row.off_fraction
        );
        if let Some(cb) = hooks.on_epoch.as_mut() {
            cb(&row);
        }
        log.rows.push(row);
        if let Some(lg) = last_good.as_mut() {
            lg.clone_from(&params);
        }
    }
    Ok(TrainOutput { params, log })
}
