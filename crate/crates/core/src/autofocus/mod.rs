//! Autofocus motion compensation: spline node values are optimized so that
//! the reconstruction of the measured projections scores best under a
//! reference-free quality metric.

mod quality;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use quality::{evaluate_quality, QualityMetricKind, FOV_FRACTION, HISTOGRAM_BINS, HISTOGRAM_RANGE};

use crate::error::{Error, Result};
use crate::geometry::{circular_trajectory, perturb_trajectory, ScanGeometry, Trajectory};
use crate::motion::{is_translation_axis, MotionCurve, SplineMotionModel};
use crate::projector::{backproject_onto, weight_and_filter, BackprojectionWeight, Grid, Sinogram, ViewKernel, Volume};

/// One reconstruction grid of the coarse-to-fine schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub grid_size: usize,
    pub spacing_mm: f64,
    /// Descent iterations (one gradient each) spent on this grid.
    pub max_iterations: usize,
}

impl Stage {
    pub fn grid(&self) -> Grid {
        Grid::cubic(self.grid_size, self.spacing_mm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub n_nodes: usize,
    pub metric: QualityMetricKind,
    /// Upper bound on quality evaluations, finite-difference probes included.
    pub max_evaluations: usize,
    pub stages: Vec<Stage>,
    /// Central-difference half steps.
    pub fd_step_mm: f64,
    pub fd_step_deg: f64,
    /// Initial per-parameter move of the descent.
    pub initial_move_mm: f64,
    pub initial_move_deg: f64,
    /// Moves below these are treated as converged.
    pub min_move_mm: f64,
    pub min_move_deg: f64,
    /// Node values are clamped to +-bound.
    pub bound_mm: f64,
    pub bound_deg: f64,
    /// A stage ends once an iteration improves the score by less than this
    /// fraction.
    pub tolerance: f64,
    /// Keep the node values of every axis zero-mean. A constant offset of all
    /// nodes is a global rigid transform, which the score cannot observe.
    pub fix_gauge: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            metric: QualityMetricKind::HistogramEntropy,
            max_evaluations: 20_000,
            stages: vec![
                Stage {
                    grid_size: 32,
                    spacing_mm: 4.0,
                    max_iterations: 12,
                },
                Stage {
                    grid_size: 48,
                    spacing_mm: 8.0 / 3.0,
                    max_iterations: 6,
                },
            ],
            fd_step_mm: 0.25,
            fd_step_deg: 0.25,
            initial_move_mm: 1.0,
            initial_move_deg: 1.0,
            min_move_mm: 0.05,
            min_move_deg: 0.05,
            bound_mm: 15.0,
            bound_deg: 15.0,
            tolerance: 1e-5,
            fix_gauge: true,
        }
    }
}

impl OptimizerConfig {
    /// A zero evaluation budget is accepted and makes [`compensate`] return
    /// the initial state.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_nodes < 2 {
            return bad(format!("need at least 2 spline nodes, got {}", self.n_nodes));
        }
        if self.stages.is_empty() {
            return bad("stage schedule is empty".into());
        }
        for s in &self.stages {
            if s.grid_size < 2 || !(s.spacing_mm > 0.0) {
                return bad(format!("invalid stage {s:?}"));
            }
        }
        let positive = [
            ("fd_step_mm", self.fd_step_mm),
            ("fd_step_deg", self.fd_step_deg),
            ("initial_move_mm", self.initial_move_mm),
            ("initial_move_deg", self.initial_move_deg),
            ("bound_mm", self.bound_mm),
            ("bound_deg", self.bound_deg),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.min_move_mm >= 0.0 && self.min_move_deg >= 0.0 && self.tolerance >= 0.0) {
            return bad("min moves and tolerance must be non-negative".into());
        }
        Ok(())
    }

    fn per_axis(&self, mm: f64, deg: f64) -> [f64; 6] {
        std::array::from_fn(|a| if is_translation_axis(a) { mm } else { deg })
    }
}

/// One entry of the score trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 1-based index of the evaluation that produced this score.
    pub evaluation: usize,
    pub stage: usize,
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct CompensationResult {
    pub model: SplineMotionModel,
    pub trajectory: Trajectory,
    /// Reconstruction with the estimated trajectory on the last stage grid.
    pub volume: Volume,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
    /// Scores of the ideal-trajectory and estimated reconstructions on the
    /// last stage grid.
    pub initial_score: f64,
    pub final_score: f64,
}

/// Serializable summary of a [`CompensationResult`] (everything except the
/// volume and matrices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompensationSummary {
    pub model: SplineMotionModel,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
    pub initial_score: f64,
    pub final_score: f64,
}

impl CompensationResult {
    pub fn summary(&self) -> CompensationSummary {
        CompensationSummary {
            model: self.model.clone(),
            trace: self.trace.clone(),
            evaluations: self.evaluations,
            initial_score: self.initial_score,
            final_score: self.final_score,
        }
    }
}

/// Central-difference gradient of `f` at `x` with per-coordinate half steps.
pub fn central_difference_gradient<F>(mut f: F, x: &[f64], steps: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x.len(), steps.len());
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + steps[k];
            let plus = f(&probe);
            probe[k] = x[k] - steps[k];
            let minus = f(&probe);
            probe[k] = x[k];
            (plus - minus) / (2.0 * steps[k])
        })
        .collect()
}

/// Reconstruction of one state together with what is needed to score nearby
/// states incrementally.
struct State {
    params: Vec<f64>,
    curve: MotionCurve,
    traj: Trajectory,
    volume: Volume,
    score: f64,
}

/// Prefiltered projections plus one stage grid.
struct Objective<'a> {
    filtered: &'a Sinogram,
    geom: &'a ScanGeometry,
    ideal: &'a Trajectory,
    grid: Grid,
    metric: QualityMetricKind,
    template: SplineMotionModel,
}

impl Objective<'_> {
    fn curve(&self, params: &[f64]) -> MotionCurve {
        let mut m = self.template.clone();
        m.set_params(params);
        m.to_curve()
    }

    fn state(&self, params: &[f64]) -> Result<State> {
        let curve = self.curve(params);
        let traj = perturb_trajectory(self.ideal, &curve)?;
        let volume = backproject_onto(self.filtered, &traj, self.geom, self.grid, BackprojectionWeight::Fdk)?;
        let score = evaluate_quality(&volume, self.metric);
        Ok(State {
            params: params.to_vec(),
            curve,
            traj,
            volume,
            score,
        })
    }

    /// Score of `params`, obtained by replacing the contributions of the
    /// views whose pose differs from `base`.
    fn probe(&self, base: &State, params: &[f64]) -> Result<f64> {
        let curve = self.curve(params);
        let mut kernels = Vec::new();
        for i in 0..curve.len() {
            let p = curve.params(i);
            if p == base.curve.params(i) {
                continue;
            }
            let m = perturb_view(self.ideal, i, &curve)?;
            kernels.push((i, ViewKernel::new(&base.traj.matrices[i], self.geom, &self.grid, BackprojectionWeight::Fdk).negated()));
            kernels.push((i, ViewKernel::new(&m, self.geom, &self.grid, BackprojectionWeight::Fdk)));
        }
        if kernels.is_empty() {
            return Ok(base.score);
        }
        let mut vol = base.volume.clone();
        let slice = self.grid.shape[0] * self.grid.shape[1];
        let grid = self.grid;
        vol.data.par_chunks_mut(slice).enumerate().for_each(|(z, out)| {
            for (i, k) in &kernels {
                k.accumulate_slice(self.filtered.view(*i), &grid, z, out);
            }
        });
        Ok(evaluate_quality(&vol, self.metric))
    }
}

fn perturb_view(ideal: &Trajectory, i: usize, curve: &MotionCurve) -> Result<crate::geometry::ProjectionMatrix> {
    let one = Trajectory {
        matrices: vec![ideal.matrices[i]],
    };
    let mut c = MotionCurve::zeros(1);
    c.set_params(0, curve.params(i));
    Ok(perturb_trajectory(&one, &c)?.matrices[0])
}

struct Budget {
    max: usize,
    used: usize,
}

impl Budget {
    fn remaining(&self) -> usize {
        self.max - self.used
    }
}

/// Estimates a spline motion model from motion-corrupted projections by
/// minimizing the quality score of the reconstruction, starting from the
/// ideal circular trajectory.
///
/// Each stage runs a sign-based descent with per-parameter moves: a move
/// grows by 1.2 while its gradient keeps its sign and halves when the sign
/// flips; a rejected step halves every move. Gradients are central
/// differences over node values, with every probe reconstruction updated
/// only in the views the changed node reaches. The best visited state is
/// kept; on equal scores the earlier one wins.
pub fn compensate(sino: &Sinogram, geom: &ScanGeometry, cfg: &OptimizerConfig) -> Result<CompensationResult> {
    cfg.validate()?;
    geom.validate()?;
    sino.check_geometry(geom)?;
    let template = SplineMotionModel::zeros(cfg.n_nodes, geom.n_projections)?;
    let filtered = weight_and_filter(sino, geom)?;
    let ideal = circular_trajectory(geom)?;
    let n_params = template.n_params();
    let n_nodes = cfg.n_nodes;
    let axis_of = |k: usize| k / n_nodes;
    let fd_steps: Vec<f64> = (0..n_params)
        .map(|k| cfg.per_axis(cfg.fd_step_mm, cfg.fd_step_deg)[axis_of(k)])
        .collect();
    let bounds: Vec<f64> = (0..n_params)
        .map(|k| cfg.per_axis(cfg.bound_mm, cfg.bound_deg)[axis_of(k)])
        .collect();
    let min_moves: Vec<f64> = (0..n_params)
        .map(|k| cfg.per_axis(cfg.min_move_mm, cfg.min_move_deg)[axis_of(k)])
        .collect();

    let mut budget = Budget {
        max: cfg.max_evaluations,
        used: 0,
    };
    let mut trace = Vec::new();
    let mut params = vec![0.0; n_params];
    let last_stage = cfg.stages.len() - 1;
    let mut final_initial: Option<(f64, Volume)> = None;
    let mut final_best: Option<State> = None;

    for (si, stage) in cfg.stages.iter().enumerate() {
        // Earlier stages leave room for the two evaluations that open the
        // last one.
        let reserve = if si == last_stage { 0 } else { 2 };
        let obj = Objective {
            filtered: &filtered,
            geom,
            ideal: &ideal,
            grid: stage.grid(),
            metric: cfg.metric,
            template: template.clone(),
        };
        let zero = vec![0.0; n_params];
        let mut cur = if si == last_stage {
            // The ideal trajectory competes on the last grid so the result
            // never scores worse than the starting point there.
            if budget.remaining() == 0 {
                break;
            }
            let z = obj.state(&zero)?;
            budget.used += 1;
            trace.push(TracePoint {
                evaluation: budget.used,
                stage: si,
                score: z.score,
            });
            final_initial = Some((z.score, z.volume.clone()));
            if params != zero && budget.remaining() > 0 {
                let s = obj.state(&params)?;
                budget.used += 1;
                trace.push(TracePoint {
                    evaluation: budget.used,
                    stage: si,
                    score: s.score,
                });
                if s.score < z.score {
                    s
                } else {
                    z
                }
            } else {
                z
            }
        } else {
            if budget.remaining() < 1 + reserve {
                continue;
            }
            let s = obj.state(&params)?;
            budget.used += 1;
            trace.push(TracePoint {
                evaluation: budget.used,
                stage: si,
                score: s.score,
            });
            s
        };

        let mut moves: Vec<f64> = (0..n_params)
            .map(|k| cfg.per_axis(cfg.initial_move_mm, cfg.initial_move_deg)[axis_of(k)])
            .collect();
        let mut prev_grad = vec![0.0; n_params];
        'iterations: for it in 0..stage.max_iterations {
            if budget.remaining() < 2 * n_params + 1 + reserve {
                break;
            }
            let mut err = None;
            let grad = central_difference_gradient(
                |x| match obj.probe(&cur, x) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        f64::NAN
                    }
                },
                &cur.params,
                &fd_steps,
            );
            if let Some(e) = err {
                return Err(e);
            }
            budget.used += 2 * n_params;
            for k in 0..n_params {
                let s = grad[k] * prev_grad[k];
                if s > 0.0 {
                    moves[k] *= 1.2;
                } else if s < 0.0 {
                    moves[k] *= 0.5;
                }
            }
            prev_grad.clone_from(&grad);
            let start_score = cur.score;
            loop {
                if moves.iter().zip(&min_moves).all(|(m, lo)| m < lo) {
                    log::debug!("stage {si} iteration {it}: moves below minimum");
                    break 'iterations;
                }
                if budget.remaining() <= reserve {
                    break 'iterations;
                }
                let mut steps: Vec<f64> = (0..n_params)
                    .map(|k| {
                        if grad[k] > 0.0 {
                            -moves[k]
                        } else if grad[k] < 0.0 {
                            moves[k]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if cfg.fix_gauge {
                    for axis in steps.chunks_mut(n_nodes) {
                        let mean = axis.iter().sum::<f64>() / n_nodes as f64;
                        axis.iter_mut().for_each(|v| *v -= mean);
                    }
                }
                let trial: Vec<f64> = (0..n_params)
                    .map(|k| (cur.params[k] + steps[k]).clamp(-bounds[k], bounds[k]))
                    .collect();
                let s = obj.state(&trial)?;
                budget.used += 1;
                trace.push(TracePoint {
                    evaluation: budget.used,
                    stage: si,
                    score: s.score,
                });
                if s.score < cur.score {
                    cur = s;
                    break;
                }
                moves.iter_mut().for_each(|m| *m *= 0.5);
                prev_grad.iter_mut().for_each(|g| *g = 0.0);
            }
            log::debug!("stage {si} iteration {it}: score {:.6e} ({} evaluations)", cur.score, budget.used);
            if (start_score - cur.score) <= cfg.tolerance * start_score.abs() {
                break;
            }
        }
        params.clone_from(&cur.params);
        if si == last_stage {
            final_best = Some(cur);
        }
    }

    let mut model = template;
    let final_grid = cfg.stages[last_stage].grid();
    match (final_best, final_initial) {
        (Some(best), Some((initial_score, _))) => {
            model.set_params(&best.params);
            Ok(CompensationResult {
                model,
                trajectory: best.traj,
                volume: best.volume,
                trace,
                evaluations: budget.used,
                initial_score,
                final_score: best.score,
            })
        }
        _ => {
            // Zero budget: the ideal trajectory, scored outside the budget.
            let volume = backproject_onto(&filtered, &ideal, geom, final_grid, BackprojectionWeight::Fdk)?;
            let score = evaluate_quality(&volume, cfg.metric);
            Ok(CompensationResult {
                model,
                trajectory: ideal,
                volume,
                trace,
                evaluations: budget.used,
                initial_score: score,
                final_score: score,
            })
        }
    }
}
