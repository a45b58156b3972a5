use serde::{Deserialize, Serialize};

use super::terms::{
    flow_tv_kernel, laplacian_kernel, mean_weights, nonneg_kernel, prior_kernel, radar_cells, radar_kernel,
    slope_weight, unit_flow, FlowTv, MassScale, RadarCell,
};
use super::{LossConfig, Schedule, TermWeights};
use crate::data::{NormStats, ObservationLayer, Scene};
use crate::error::{dim, Error, Result};
use crate::grid::{Geometry, Mask, RasterGrid};
use crate::solve::ReconState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Radar,
    Mass,
    FlowTv,
    Laplacian,
    Nonneg,
    Prior,
}

impl Term {
    pub const ALL: [Term; 6] = [Term::Radar, Term::Mass, Term::FlowTv, Term::Laplacian, Term::Nonneg, Term::Prior];

    pub fn name(&self) -> &'static str {
        match self {
            Term::Radar => "radar",
            Term::Mass => "mass",
            Term::FlowTv => "flow_tv",
            Term::Laplacian => "laplacian",
            Term::Nonneg => "nonneg",
            Term::Prior => "prior",
        }
    }
}

/// Unweighted value of each term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TermValues {
    pub radar: f64,
    pub mass: f64,
    pub flow_tv: f64,
    pub laplacian: f64,
    pub nonneg: f64,
    pub prior: f64,
}

impl TermValues {
    pub fn get(&self, t: Term) -> f64 {
        match t {
            Term::Radar => self.radar,
            Term::Mass => self.mass,
            Term::FlowTv => self.flow_tv,
            Term::Laplacian => self.laplacian,
            Term::Nonneg => self.nonneg,
            Term::Prior => self.prior,
        }
    }

    fn set(&mut self, t: Term, v: f64) {
        match t {
            Term::Radar => self.radar = v,
            Term::Mass => self.mass = v,
            Term::FlowTv => self.flow_tv = v,
            Term::Laplacian => self.laplacian = v,
            Term::Nonneg => self.nonneg = v,
            Term::Prior => self.prior = v,
        }
    }
}

impl TermWeights {
    pub fn get(&self, t: Term) -> f64 {
        match t {
            Term::Radar => self.radar,
            Term::Mass => self.mass,
            Term::FlowTv => self.flow_tv,
            Term::Laplacian => self.laplacian,
            Term::Nonneg => self.nonneg,
            Term::Prior => self.prior,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub values: TermValues,
    pub weights: TermWeights,
    /// `sum(weight * value)`.
    pub total: f64,
    /// Gradient of `total` with respect to the normalised residual.
    pub gradient: RasterGrid,
}

/// The full objective for one scene, with everything that does not depend on
/// the residual precomputed.
#[derive(Debug, Clone)]
pub struct Objective {
    geom: Geometry,
    norm: NormStats,
    cfg: LossConfig,
    schedule: Schedule,
    total_epochs: usize,
    hp: Vec<f64>,
    s: Vec<f64>,
    bp: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    ux: Vec<f64>,
    uy: Vec<f64>,
    mean_w: Vec<f64>,
    radar: Vec<RadarCell>,
    prior_w: Vec<f64>,
    /// `(alpha_k, scale)` for the early and late smoothing kernels.
    mass: [Vec<(f64, MassScale)>; 2],
}

impl Objective {
    pub fn new(
        scene: &Scene,
        obs: &ObservationLayer,
        norm: NormStats,
        cfg: &LossConfig,
        schedule: &Schedule,
        total_epochs: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        schedule.validate()?;
        if total_epochs == 0 {
            return Err(crate::error::param("objective needs at least one epoch"));
        }
        let geom = *scene.geometry();
        if !obs.geometry().same_shape(&geom) {
            return Err(dim("observations and scene differ in shape"));
        }
        let valid = scene.valid();
        let v = scene.velocity();
        let (ux, uy) = unit_flow(v, cfg.flow_eps);
        let mean_w = mean_weights(valid);
        let n_valid = valid.count().max(1) as f64;
        let slope = slope_weight(scene.prior_bed(), valid, cfg.slope_floor)?;
        let conf = obs.confidence.values();
        let prior_w = (0..geom.len())
            .map(|i| {
                if !valid.cells()[i] || obs.mask.cells()[i] {
                    0.0
                } else {
                    (1.0 - conf[i]).powi(2) * slope.values()[i] / n_valid
                }
            })
            .collect();
        let q = cfg.mass_conf_exponent;
        let mass_conf: Vec<f64> = conf.iter().map(|c| (1.0 - c).max(0.0).powf(q)).collect();
        let alphas = cfg.alphas();
        let mut mass: [Vec<(f64, MassScale)>; 2] = [Vec::new(), Vec::new()];
        for (phase, slot) in mass.iter_mut().enumerate() {
            for (&k, &a) in cfg.scales.iter().zip(&alphas) {
                let ms = MassScale::new(
                    k,
                    &geom,
                    scene.dhdt().values(),
                    scene.smb().values(),
                    &mass_conf,
                    valid.cells(),
                    cfg.smoothing.kernel(phase),
                )?;
                match ms {
                    Some(ms) => slot.push((a, ms)),
                    None => log::debug!("mass scale {k} has no interior cells on a {}x{} grid", geom.height, geom.width),
                }
            }
        }
        Ok(Self {
            geom,
            norm,
            cfg: cfg.clone(),
            schedule: *schedule,
            total_epochs,
            hp: scene.prior_thickness().values().to_vec(),
            s: scene.surface().values().to_vec(),
            bp: scene.prior_bed().values().to_vec(),
            vx: v.x.values().to_vec(),
            vy: v.y.values().to_vec(),
            ux,
            uy,
            mean_w,
            radar: radar_cells(obs, Some(valid), cfg.radar_weight_floor),
            prior_w,
            mass,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn norm(&self) -> NormStats {
        self.norm
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    pub fn weights(&self, epoch: usize) -> Result<TermWeights> {
        self.schedule.weights(&self.cfg, epoch, self.total_epochs)
    }

    pub fn smoothing_phase(&self, epoch: usize) -> usize {
        self.cfg.smoothing.phase(epoch, self.total_epochs)
    }

    /// Radar cells inside `mask` with weights normalised over that subset.
    pub fn monitor_cells(&self, obs: &ObservationLayer, mask: &Mask) -> Result<Vec<RadarCell>> {
        Ok(radar_cells(obs, Some(&mask.and(&obs.mask)?), self.cfg.radar_weight_floor))
    }

    /// Radar misfit of a residual over a chosen set of cells.
    pub fn radar_fit(&self, r_hat: &[f64], cells: &[RadarCell]) -> f64 {
        let h = self.thickness(r_hat);
        radar_kernel(&h, cells, self.cfg.delta_radar, 0.0, None)
    }

    fn residual(&self, r_hat: &[f64]) -> Vec<f64> {
        r_hat.iter().map(|&x| self.norm.sigma_t * x + self.norm.mu_t).collect()
    }

    fn thickness(&self, r_hat: &[f64]) -> Vec<f64> {
        r_hat.iter().zip(&self.hp).map(|(&x, &hp)| hp + (self.norm.sigma_t * x + self.norm.mu_t)).collect()
    }

    /// Unweighted term value; adds `coef * d(term)/d(r_hat)` to `grad`.
    pub fn term(&self, term: Term, r_hat: &[f64], phase: usize, coef: f64, grad: Option<&mut [f64]>) -> f64 {
        let sigma = self.norm.sigma_t;
        let (rows, cols) = (self.geom.height, self.geom.width);
        let c = coef * sigma;
        match term {
            Term::Radar => radar_kernel(&self.thickness(r_hat), &self.radar, self.cfg.delta_radar, c, grad),
            Term::Mass => {
                let h = self.thickness(r_hat);
                let mut g = grad;
                let mut value = 0.0;
                for (a, ms) in &self.mass[phase] {
                    value += a * ms.kernel(&h, &self.vx, &self.vy, (rows, cols), self.cfg.delta_mass, a * c, g.as_deref_mut());
                }
                value
            }
            Term::FlowTv => {
                let p = FlowTv {
                    ux: &self.ux,
                    uy: &self.uy,
                    weights: &self.mean_w,
                    beta_perp: self.cfg.beta_perp,
                    beta_par: self.cfg.beta_par,
                    eta: self.cfg.abs_eta,
                };
                flow_tv_kernel(&self.thickness(r_hat), rows, cols, &p, c, grad)
            }
            Term::Laplacian => {
                laplacian_kernel(&self.residual(r_hat), rows, cols, &self.mean_w, self.cfg.abs_eta, c, grad)
            }
            Term::Nonneg => nonneg_kernel(&self.thickness(r_hat), &self.mean_w, c, grad),
            Term::Prior => {
                let h = self.thickness(r_hat);
                let b: Vec<f64> = self.s.iter().zip(&h).map(|(s, h)| s - h).collect();
                // d(bed)/d(r_hat) = -sigma
                prior_kernel(&b, &self.bp, &self.prior_w, self.cfg.delta_prior, -c, grad)
            }
        }
    }

    /// Evaluates every term at `epoch`. When `grad` is given it is overwritten
    /// with the gradient of the weighted total.
    pub fn evaluate(&self, r_hat: &[f64], epoch: usize, grad: Option<&mut [f64]>) -> Result<(TermValues, TermWeights, f64)> {
        if r_hat.len() != self.geom.len() {
            return Err(dim("residual length does not match the objective grid"));
        }
        let weights = self.weights(epoch)?;
        let phase = self.smoothing_phase(epoch);
        let mut values = TermValues::default();
        let mut total = 0.0;
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        for t in Term::ALL {
            let w = weights.get(t);
            let g = if w != 0.0 { grad.as_deref_mut() } else { None };
            let v = self.term(t, r_hat, phase, w, g);
            if !v.is_finite() {
                return Err(Error::NonFinite { term: t.name(), epoch });
            }
            values.set(t, v);
            total += w * v;
        }
        if let Some(g) = grad.as_deref() {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { term: "gradient", epoch });
            }
        }
        Ok((values, weights, total))
    }
}

/// Evaluates the objective once for a reconstruction state.
pub fn total_loss(
    state: &ReconState,
    scene: &Scene,
    obs: &ObservationLayer,
    cfg: &LossConfig,
    schedule: &Schedule,
    epoch: usize,
    total_epochs: usize,
) -> Result<LossBreakdown> {
    let obj = Objective::new(scene, obs, state.norm, cfg, schedule, total_epochs)?;
    let mut g = vec![0.0; scene.geometry().len()];
    let (values, weights, total) = obj.evaluate(state.r_hat.values(), epoch, Some(&mut g))?;
    Ok(LossBreakdown { values, weights, total, gradient: RasterGrid::new(*scene.geometry(), g)? })
}
