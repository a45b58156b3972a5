use std::io::Write;

use serde::{Deserialize, Serialize};

use super::optim::{ema_update_in_place, Adam, CosineRestarts};
use super::{Problem, ReconState};
use crate::error::{param, Result};
use crate::physics::{LossConfig, Objective, Schedule, TermValues};
use crate::grid::RasterGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub restart_period: usize,
    pub restart_mult: usize,
    pub ema_decay: f64,
    /// Epochs without monitor improvement before stopping.
    pub patience: usize,
    /// Monitor evaluation interval in epochs.
    pub monitor_every: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epochs: 6000,
            lr: 0.05,
            lr_min: 0.0,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            restart_period: 500,
            restart_mult: 2,
            ema_decay: 0.999,
            patience: 2000,
            monitor_every: 10,
            seed: 42,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(param("solver needs at least one epoch"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(0.0..=self.lr).contains(&self.lr_min) {
            return Err(param("learning rate must be positive with 0 <= lr_min <= lr"));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(param("EMA decay must lie in [0, 1)"));
        }
        if self.patience == 0 || self.monitor_every == 0 || self.restart_period == 0 || self.restart_mult == 0 {
            return Err(param("patience, monitor interval and restart period must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(param("Adam moments must lie in [0, 1) with positive epsilon"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(param("weight decay must be non-negative"));
        }
        Ok(())
    }

    fn schedule(&self) -> CosineRestarts {
        CosineRestarts { base: self.lr, min: self.lr_min, t0: self.restart_period, mult: self.restart_mult }
    }
}

/// Loss, schedule and optimiser settings for one solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub loss: LossConfig,
    pub schedule: Schedule,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub values: TermValues,
    pub total: f64,
    pub lr: f64,
    /// Radar fit of the EMA state, on monitor epochs only.
    pub monitor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub rows: Vec<HistoryRow>,
    /// Epoch count at which the returned state was taken (0 = initial state).
    pub best_epoch: usize,
    pub best_monitor: Option<f64>,
    pub initial_monitor: Option<f64>,
    pub stopped_early: bool,
}

impl History {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "epoch,radar,mass,flow_tv,laplacian,nonneg,prior,total,lr,monitor")?;
        for r in &self.rows {
            let v = &r.values;
            let mon = r.monitor.map(|m| format!("{m:e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.epoch, v.radar, v.mass, v.flow_tv, v.laplacian, v.nonneg, v.prior, r.total, r.lr, mon
            )?;
        }
        Ok(())
    }
}

/// Minimises the objective over `r_hat` inside `problem.region`, starting
/// from zero. Returns the EMA state with the best monitored radar fit (the
/// initial state included) and the per-epoch history. Without monitor cells
/// the final EMA state is returned.
pub fn solve_variational(problem: &Problem, settings: &SolveSettings) -> Result<(ReconState, History)> {
    let cfg = &settings.solver;
    cfg.validate()?;
    let geom = *problem.geometry();
    let obj = Objective::new(&problem.scene, &problem.obs, problem.norm, &settings.loss, &settings.schedule, cfg.epochs)?;
    let active: Vec<bool> = problem.region.and(problem.scene.valid())?.cells().to_vec();
    let monitor_cells = obj.monitor_cells(&problem.obs, &problem.monitor)?;
    let has_monitor = !monitor_cells.is_empty();

    let n = geom.len();
    let mut x = vec![0.0; n];
    let mut ema = x.clone();
    let mut grad = vec![0.0; n];
    let mut adam = Adam::new(n, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let lr_sched = cfg.schedule();

    let mut history = History::default();
    let mut best = ema.clone();
    if has_monitor {
        let m0 = obj.radar_fit(&ema, &monitor_cells);
        history.initial_monitor = Some(m0);
        history.best_monitor = Some(m0);
    }
    let mut last_improvement = 0usize;

    for epoch in 0..cfg.epochs {
        let (values, _, total) = obj.evaluate(&x, epoch, Some(&mut grad))?;
        let lr = lr_sched.lr_at(epoch);
        adam.step(&mut x, &grad, lr, cfg.weight_decay, &active);
        ema_update_in_place(&mut ema, &x, cfg.ema_decay);
        let done = epoch + 1;
        let mut monitor = None;
        if has_monitor && (done % cfg.monitor_every == 0 || done == cfg.epochs) {
            let m = obj.radar_fit(&ema, &monitor_cells);
            monitor = Some(m);
            if m < history.best_monitor.unwrap_or(f64::INFINITY) {
                history.best_monitor = Some(m);
                history.best_epoch = done;
                best.copy_from_slice(&ema);
                last_improvement = done;
            }
        }
        history.rows.push(HistoryRow { epoch, values, total, lr, monitor });
        if has_monitor && done - last_improvement >= cfg.patience {
            history.stopped_early = true;
            log::info!("early stop at epoch {done}, best at {}", history.best_epoch);
            break;
        }
    }
    if !has_monitor {
        best = ema;
        history.best_epoch = history.rows.len();
    }
    Ok((ReconState { r_hat: RasterGrid::new(geom, best)?, norm: problem.norm }, history))
}
