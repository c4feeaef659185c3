use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{AkimaSpline, MotionCurve, SplineMotionModel};

/// Least-squares spline approximation of a dense motion curve.
#[derive(Clone, Debug)]
pub struct SplineFit {
    pub model: SplineMotionModel,
    /// Root-mean-square residual per axis, in the axis' unit.
    pub rms_residual: [f64; 6],
}

/// Finds node values minimizing the squared difference between the dense
/// spline evaluation and `curve`, independently per axis.
///
/// The Akima interpolant is nonlinear in its node values, so each axis is
/// solved with Levenberg-Marquardt starting from the interpolating fit
/// through the curve values nearest to the nodes.
pub fn fit_spline_least_squares(curve: &MotionCurve, n_nodes: usize) -> Result<SplineFit> {
    let n_proj = curve.len();
    if n_nodes < 2 || n_nodes > n_proj {
        return Err(Error::InvalidArgument(format!(
            "node count must be in [2, {n_proj}], got {n_nodes}"
        )));
    }
    let mut model = SplineMotionModel::zeros(n_nodes, n_proj)?;
    let spacing = model.node_spacing();
    let mut rms_residual = [0.0; 6];
    for axis in 0..6 {
        let (nodes, rms) = fit_axis(curve.axis(axis), n_nodes, spacing);
        model.node_values_mut(axis).copy_from_slice(&nodes);
        rms_residual[axis] = rms;
    }
    Ok(SplineFit { model, rms_residual })
}

fn residuals(nodes: &[f64], spacing: f64, target: &[f64]) -> Vec<f64> {
    AkimaSpline::uniform(nodes, spacing)
        .sample_integers(target.len())
        .iter()
        .zip(target)
        .map(|(s, t)| s - t)
        .collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn fit_axis(target: &[f64], n_nodes: usize, spacing: f64) -> (Vec<f64>, f64) {
    let n = target.len();
    let mut nodes: Vec<f64> = (0..n_nodes)
        .map(|k| target[((k as f64 * spacing).round() as usize).min(n - 1)])
        .collect();
    let mut r = residuals(&nodes, spacing, target);
    let mut cost = sum_sq(&r);
    let scale = target.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut lambda = 1e-3;

    for _ in 0..200 {
        if cost <= 1e-28 * scale * scale * n as f64 {
            break;
        }
        // Central-difference Jacobian of the dense evaluation.
        let h = 1e-6 * scale;
        let mut jac = DMatrix::<f64>::zeros(n, n_nodes);
        let mut probe = nodes.clone();
        for k in 0..n_nodes {
            probe[k] = nodes[k] + h;
            let up = AkimaSpline::uniform(&probe, spacing).sample_integers(n);
            probe[k] = nodes[k] - h;
            let down = AkimaSpline::uniform(&probe, spacing).sample_integers(n);
            probe[k] = nodes[k];
            for i in 0..n {
                jac[(i, k)] = (up[i] - down[i]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);

        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for k in 0..n_nodes {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = nodes.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let r_trial = residuals(&trial, spacing, target);
            let c_trial = sum_sq(&r_trial);
            if c_trial < cost {
                let rel = (cost - c_trial) / cost;
                nodes = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (nodes, (cost / n as f64).sqrt())
}
