use crate::error::{Error, Result};

use super::SplineMotionModel;

/// Akima (1970) interpolant over equidistant nodes starting at zero.
#[derive(Clone, Debug)]
pub struct AkimaSpline {
    spacing: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl AkimaSpline {
    /// Builds the interpolant through `values` placed at `k * spacing`.
    ///
    /// Node slopes use Akima's weighting of neighbouring chord slopes, with two
    /// phantom chords on each end obtained from the quadratic extrapolation of
    /// the original method. With only two nodes the interpolant is the chord.
    pub fn uniform(values: &[f64], spacing: f64) -> Self {
        let n = values.len();
        assert!(n >= 2, "Akima spline needs at least two nodes");
        assert!(spacing > 0.0, "node spacing must be positive");
        if n == 2 {
            let m = (values[1] - values[0]) / spacing;
            return Self {
                spacing,
                values: values.to_vec(),
                slopes: vec![m, m],
            };
        }

        // chords[j + 2] holds the slope of interval j, for j in -2..=n.
        let mut chords = vec![0.0; n + 3];
        for j in 0..n - 1 {
            chords[j + 2] = (values[j + 1] - values[j]) / spacing;
        }
        chords[1] = 2.0 * chords[2] - chords[3];
        chords[0] = 2.0 * chords[1] - chords[2];
        chords[n + 1] = 2.0 * chords[n] - chords[n - 1];
        chords[n + 2] = 2.0 * chords[n + 1] - chords[n];

        let slopes = (0..n)
            .map(|i| {
                // m_{i-2}, m_{i-1}, m_i, m_{i+1}
                let (m0, m1, m2, m3) = (chords[i], chords[i + 1], chords[i + 2], chords[i + 3]);
                let w_right = (m3 - m2).abs();
                let w_left = (m1 - m0).abs();
                if w_right + w_left == 0.0 {
                    0.5 * (m1 + m2)
                } else {
                    (w_right * m1 + w_left * m2) / (w_right + w_left)
                }
            })
            .collect();
        Self {
            spacing,
            values: values.to_vec(),
            slopes,
        }
    }

    pub fn domain_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.spacing
    }

    pub fn node_slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Value at `t`. Arguments outside the node range are clamped onto the
    /// end intervals' cubics.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = t / self.spacing;
        let j = (x.floor().max(0.0) as usize).min(n - 2);
        let s = x - j as f64;
        let h = self.spacing;
        let s2 = s * s;
        let s3 = s2 * s;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        // Written relative to the left node so constants are reproduced exactly.
        self.values[j]
            + h01 * (self.values[j + 1] - self.values[j])
            + h * (h10 * self.slopes[j] + h11 * self.slopes[j + 1])
    }

    /// Values at `t = 0, 1, ..., count - 1`.
    pub fn sample_integers(&self, count: usize) -> Vec<f64> {
        (0..count).map(|t| self.eval(t as f64)).collect()
    }
}

/// Evaluates one axis of the model at continuous projection index `t`.
pub fn akima_eval(model: &SplineMotionModel, t: f64, axis: usize) -> Result<f64> {
    let end = (model.n_projections() - 1) as f64;
    if !(0.0..=end).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside spline domain [0, {end}]")));
    }
    if axis >= 6 {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    Ok(model.axis_spline(axis).eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Textbook Akima on arbitrary abscissae: extend the point set by two
    /// points per side using the quadratic-extrapolation rule for the
    /// abscissae and ordinates, then apply the slope formula and the cubic
    /// polynomial coefficients written out as in the original method.
    fn reference_akima(x: &[f64], y: &[f64], t: f64) -> f64 {
        let n = x.len();
        let mut xs = vec![0.0; n + 4];
        let mut ys = vec![0.0; n + 4];
        xs[2..n + 2].copy_from_slice(x);
        ys[2..n + 2].copy_from_slice(y);
        // x_{-1} = x_0 - (x_2 - x_1), x_{-2} = x_0 - (x_2 - x_0), mirrored on the right
        xs[1] = xs[2] - (xs[4] - xs[3]);
        xs[0] = xs[2] - (xs[4] - xs[2]);
        xs[n + 2] = xs[n + 1] + (xs[n] - xs[n - 1]);
        xs[n + 3] = xs[n + 1] + (xs[n + 1] - xs[n - 1]);
        let slope = |xa: f64, ya: f64, xb: f64, yb: f64| (yb - ya) / (xb - xa);
        // Ordinates follow from requiring the chord-slope differences to be
        // constant across the extrapolated points.
        let m = |i: usize, xs: &[f64], ys: &[f64]| slope(xs[i], ys[i], xs[i + 1], ys[i + 1]);
        let m2 = m(2, &xs, &ys);
        let m3 = m(3, &xs, &ys);
        let m1 = 2.0 * m2 - m3;
        ys[1] = ys[2] - m1 * (xs[2] - xs[1]);
        let m0 = 2.0 * m1 - m2;
        ys[0] = ys[1] - m0 * (xs[1] - xs[0]);
        let mn = m(n, &xs, &ys);
        let mn_1 = m(n - 1, &xs, &ys);
        let mr = 2.0 * mn - mn_1;
        ys[n + 2] = ys[n + 1] + mr * (xs[n + 2] - xs[n + 1]);
        let mr2 = 2.0 * mr - mn;
        ys[n + 3] = ys[n + 2] + mr2 * (xs[n + 3] - xs[n + 2]);

        let chord: Vec<f64> = (0..n + 3).map(|i| m(i, &xs, &ys)).collect();
        let tangent = |i: usize| {
            // node i of the original set sits at index i + 2
            let k = i + 2;
            let (a, b, c, d) = (chord[k - 2], chord[k - 1], chord[k], chord[k + 1]);
            let num = (d - c).abs() * b + (b - a).abs() * c;
            let den = (d - c).abs() + (b - a).abs();
            if den == 0.0 {
                (b + c) / 2.0
            } else {
                num / den
            }
        };
        let j = x.iter().rposition(|&xi| xi <= t).unwrap().min(n - 2);
        let (x1, x2, y1, y2) = (x[j], x[j + 1], y[j], y[j + 1]);
        let (t1, t2) = (tangent(j), tangent(j + 1));
        let dx = x2 - x1;
        let p0 = y1;
        let p1 = t1;
        let p2 = (3.0 * (y2 - y1) / dx - 2.0 * t1 - t2) / dx;
        let p3 = (t1 + t2 - 2.0 * (y2 - y1) / dx) / (dx * dx);
        let d = t - x1;
        p0 + p1 * d + p2 * d * d + p3 * d * d * d
    }

    #[test]
    fn hits_nodes_exactly() {
        let y = [0.3, -1.0, 2.5, 2.5, 0.0, 7.0, -3.0];
        let s = AkimaSpline::uniform(&y, 4.0);
        for (k, &v) in y.iter().enumerate() {
            assert_eq!(s.eval(4.0 * k as f64), v);
        }
    }

    #[test]
    fn reproduces_lines() {
        let y: Vec<f64> = (0..9).map(|k| -0.7 * 3.0 * k as f64 + 2.0).collect();
        let s = AkimaSpline::uniform(&y, 3.0);
        for i in 0..=240 {
            let t = i as f64 * 0.1;
            assert_relative_eq!(s.eval(t), -0.7 * t + 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reproduces_parabola_and_matches_reference() {
        let h = 2.5;
        let x: Vec<f64> = (0..8).map(|k| k as f64 * h).collect();
        let y: Vec<f64> = x.iter().map(|t| t * t).collect();
        let s = AkimaSpline::uniform(&y, h);
        for i in 0..=175 {
            let t = i as f64 * 0.1;
            assert_relative_eq!(s.eval(t), t * t, epsilon = 1e-9);
            assert_relative_eq!(s.eval(t), reference_akima(&x, &y, t), epsilon = 1e-9);
        }
    }

    #[test]
    fn matches_reference_on_irregular_data() {
        let y = [1.0, 1.0, 1.0, 3.0, -2.0, 0.5, 0.5, 4.0, 4.0, -1.0];
        let h = 1.7;
        let x: Vec<f64> = (0..y.len()).map(|k| k as f64 * h).collect();
        let s = AkimaSpline::uniform(&y, h);
        for i in 0..=153 {
            let t = i as f64 * 0.1;
            assert_relative_eq!(s.eval(t), reference_akima(&x, &y, t), epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn first_derivative_is_continuous_at_nodes() {
        let y = [0.0, 2.0, -1.0, 3.0, 3.5, -2.0, 0.0];
        let s = AkimaSpline::uniform(&y, 5.0);
        let eps = 1e-6;
        for k in 1..y.len() - 1 {
            let t = 5.0 * k as f64;
            let left = (s.eval(t) - s.eval(t - eps)) / eps;
            let right = (s.eval(t + eps) - s.eval(t)) / eps;
            assert_relative_eq!(left, right, epsilon = 1e-4, max_relative = 1e-6);
            assert_relative_eq!(left, s.node_slopes()[k], epsilon = 1e-4);
        }
    }

    #[test]
    fn flat_runs_have_zero_slope() {
        let s = AkimaSpline::uniform(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 1.0);
        assert_eq!(s.node_slopes()[1], 0.0);
        assert_eq!(s.node_slopes()[4], 0.0);
        // no overshoot on the step
        for i in 0..=50 {
            let v = s.eval(i as f64 * 0.1);
            assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn two_nodes_give_a_line() {
        let s = AkimaSpline::uniform(&[1.0, 3.0], 4.0);
        assert_eq!(s.eval(2.0), 2.0);
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let m = SplineMotionModel::zeros(4, 10).unwrap();
        assert!(akima_eval(&m, -0.1, 0).is_err());
        assert!(akima_eval(&m, 9.01, 0).is_err());
        assert!(akima_eval(&m, 9.0, 6).is_err());
        assert_eq!(akima_eval(&m, 9.0, 5).unwrap(), 0.0);
    }
}
