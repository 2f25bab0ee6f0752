//! Discrete Hamilton–Jacobi–Bellman equation on a regular grid:
//! `v(x_i) = min_ℓ { (1 − λh) v(x_i + h f(x_i, u_ℓ)) + h g(x_i, u_ℓ) }`,
//! with `v` at off-grid points given by multilinear interpolation.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linear::{InstanceMeta, LinearGlbProblem, PieceData};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HjbError {
    #[error("state dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("axis {0}: need min < max and at least 2 points, or a single point")]
    Axis(usize),
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("step h = {h} outside (0, 1/lambda] with lambda = {lambda}")]
    Step { h: f64, lambda: f64 },
    #[error("control set is empty")]
    NoControls,
    #[error("control {0} has the wrong dimension")]
    ControlDimension(usize),
    #[error("running cost {value} at node {node}, control {control} is negative or not finite")]
    Cost {
        node: usize,
        control: usize,
        value: f64,
    },
    #[error("dynamics at node {node}, control {control} returned a non-finite or misshapen value")]
    Dynamics { node: usize, control: usize },
    #[error("value vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    pub fn spacing(&self) -> f64 {
        if self.points > 1 {
            (self.max - self.min) / (self.points as f64 - 1.0)
        } else {
            0.0
        }
    }

    fn coord(&self, k: usize) -> f64 {
        self.min + self.spacing() * k as f64
    }

    fn valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && (self.points == 1 || (self.points >= 2 && self.min < self.max))
    }
}

pub type Dynamics = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type RunningCost = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct HjbGridSpec {
    pub axes: Vec<GridAxis>,
    pub controls: Vec<Vec<f64>>,
    pub dynamics: Dynamics,
    pub cost: RunningCost,
    pub lambda: f64,
    pub h: f64,
}

impl fmt::Debug for HjbGridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HjbGridSpec")
            .field("axes", &self.axes)
            .field("controls", &self.controls)
            .field("lambda", &self.lambda)
            .field("h", &self.h)
            .finish_non_exhaustive()
    }
}

impl HjbGridSpec {
    pub fn new(
        axes: Vec<GridAxis>,
        controls: Vec<Vec<f64>>,
        dynamics: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        cost: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        lambda: f64,
        h: f64,
    ) -> Self {
        Self {
            axes,
            controls,
            dynamics: Arc::new(dynamics),
            cost: Arc::new(cost),
            lambda,
            h,
        }
    }

    /// `f(x, u) = u`.
    pub fn control_as_velocity(
        axes: Vec<GridAxis>,
        controls: Vec<Vec<f64>>,
        cost: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        lambda: f64,
        h: f64,
    ) -> Self {
        Self::new(axes, controls, |_, u| u.to_vec(), cost, lambda, h)
    }

    /// `f ≡ 0`, `g ≡ c`, a single control.
    pub fn still(axes: Vec<GridAxis>, c: f64, lambda: f64, h: f64) -> Self {
        let dim = axes.len();
        Self::new(
            axes,
            vec![vec![0.0; dim]],
            move |_, _| vec![0.0; dim],
            move |_, _| c,
            lambda,
            h,
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Coordinates of node `i`; the first axis varies fastest.
    pub fn node(&self, mut i: usize) -> Vec<f64> {
        self.axes
            .iter()
            .map(|a| {
                let k = i % a.points;
                i /= a.points;
                a.coord(k)
            })
            .collect()
    }

    fn validate(&self) -> Result<(), HjbError> {
        if !(1..=2).contains(&self.dim()) {
            return Err(HjbError::Dimension(self.dim()));
        }
        if let Some(k) = self.axes.iter().position(|a| !a.valid()) {
            return Err(HjbError::Axis(k));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(HjbError::Lambda(self.lambda));
        }
        if !(self.h > 0.0 && self.h * self.lambda <= 1.0) {
            return Err(HjbError::Step {
                h: self.h,
                lambda: self.lambda,
            });
        }
        if self.controls.is_empty() {
            return Err(HjbError::NoControls);
        }
        if let Some(k) = self.controls.iter().position(|u| u.len() != self.dim()) {
            return Err(HjbError::ControlDimension(k));
        }
        Ok(())
    }

    /// Multilinear weights of `y` clamped to the grid hull, as `(node, weight)`.
    pub fn interpolation(&self, y: &[f64]) -> Vec<(usize, f64)> {
        let mut out = vec![(0usize, 1.0f64)];
        let mut stride = 1;
        for (axis, &coord) in self.axes.iter().zip(y) {
            let (k, frac) = if axis.points == 1 {
                (0, 0.0)
            } else {
                let t = (coord.clamp(axis.min, axis.max) - axis.min) / axis.spacing();
                let k = (t.floor() as usize).min(axis.points - 2);
                let frac = (t - k as f64).clamp(0.0, 1.0);
                // snap rounding noise so exact grid hits stay single-node
                let frac = if frac < 1e-12 {
                    0.0
                } else if frac > 1.0 - 1e-12 {
                    1.0
                } else {
                    frac
                };
                (k, frac)
            };
            let mut next = Vec::with_capacity(out.len() * 2);
            for &(node, w) in &out {
                if frac < 1.0 {
                    next.push((node + k * stride, w * (1.0 - frac)));
                }
                if frac > 0.0 {
                    next.push((node + (k + 1) * stride, w * frac));
                }
            }
            out = next;
            stride *= axis.points;
        }
        out
    }

    fn displaced(&self, node: usize, x: &[f64], control: usize) -> Result<Vec<f64>, HjbError> {
        let f = (self.dynamics)(x, &self.controls[control]);
        if f.len() != self.dim() || f.iter().any(|v| !v.is_finite()) {
            return Err(HjbError::Dynamics { node, control });
        }
        Ok(x.iter().zip(&f).map(|(xi, fi)| xi + self.h * fi).collect())
    }

    fn running_cost(&self, node: usize, x: &[f64], control: usize) -> Result<f64, HjbError> {
        let value = (self.cost)(x, &self.controls[control]);
        if !(value.is_finite() && value >= 0.0) {
            return Err(HjbError::Cost {
                node,
                control,
                value,
            });
        }
        Ok(value)
    }
}

/// One piece per control: row `i` of `A_ℓ` holds the interpolation weights
/// of `x_i + h f(x_i, u_ℓ)` times `1 − λh`, `b_ℓ = h g(·, u_ℓ)`, `U = 1/λ`.
///
/// The cap bounds the exact value function only when `g <= 1`; larger
/// costs are accepted but the cap may then bind.
pub fn hjb_grid_problem(spec: &HjbGridSpec) -> Result<LinearGlbProblem, HjbError> {
    spec.validate()?;
    let n = spec.node_count();
    let scale = 1.0 - spec.lambda * spec.h;
    let mut pieces = Vec::with_capacity(spec.controls.len());
    for l in 0..spec.controls.len() {
        let mut piece = PieceData::new(Vec::new(), vec![0.0; n]);
        for i in 0..n {
            let x = spec.node(i);
            let y = spec.displaced(i, &x, l)?;
            for (j, w) in spec.interpolation(&y) {
                piece.triplets.push((i, j, scale * w));
            }
            piece.b[i] = spec.h * spec.running_cost(i, &x, l)?;
        }
        pieces.push(piece);
    }
    let p = LinearGlbProblem::new(n, pieces, vec![1.0 / spec.lambda; n])
        .expect("interpolation weights are nonnegative and in range");
    Ok(p.with_meta(InstanceMeta {
        generator: "hjb".into(),
        seed: None,
        params: serde_json::json!({
            "axes": spec.axes.iter().map(|a| [a.min, a.max, a.points as f64]).collect::<Vec<_>>(),
            "controls": spec.controls,
            "lambda": spec.lambda,
            "h": spec.h,
        }),
    }))
}

/// `max_i |v_i − min_ℓ {(1 − λh) v(x_i + h f(x_i, u_ℓ)) + h g(x_i, u_ℓ)}|`.
pub fn hjb_residual(spec: &HjbGridSpec, v: &[f64]) -> Result<f64, HjbError> {
    spec.validate()?;
    let n = spec.node_count();
    if v.len() != n {
        return Err(HjbError::Length {
            expected: n,
            found: v.len(),
        });
    }
    let scale = 1.0 - spec.lambda * spec.h;
    let mut worst: f64 = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        let x = spec.node(i);
        let mut best = f64::INFINITY;
        for l in 0..spec.controls.len() {
            let y = spec.displaced(i, &x, l)?;
            let interp: f64 = spec.interpolation(&y).iter().map(|&(j, w)| w * v[j]).sum();
            best = best.min(scale * interp + spec.h * spec.running_cost(i, &x, l)?);
        }
        worst = worst.max((vi - best).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{selective_update_linear, PolicyTag};

    #[test]
    fn still_unit_cost_is_identity_scaled() {
        let spec = HjbGridSpec::still(vec![GridAxis::new(0.0, 1.0, 5)], 1.0, 1.0, 0.5);
        let p = hjb_grid_problem(&spec).unwrap();
        let a = p.pieces()[0].matrix();
        assert_eq!(a.nnz(), 5);
        assert!((0..5).all(|i| a.diagonal(i) == 0.5));
        assert_eq!(p.pieces()[0].offsets(), &[0.5; 5]);
        assert_eq!(p.cap(), &[1.0; 5]);
        let r = selective_update_linear(&p, None, 1e-12, PolicyTag::Fifo).unwrap();
        assert_eq!(r.x, vec![1.0; 5]);
        assert_eq!(hjb_residual(&spec, &r.x).unwrap(), 0.0);
    }

    #[test]
    fn zero_cost_gives_zero() {
        let spec = HjbGridSpec::still(
            vec![GridAxis::new(0.0, 1.0, 4), GridAxis::new(-1.0, 1.0, 3)],
            0.0,
            2.0,
            0.1,
        );
        let p = hjb_grid_problem(&spec).unwrap();
        assert_eq!(p.dim(), 12);
        let r = selective_update_linear(&p, None, 1e-12, PolicyTag::Value).unwrap();
        assert!(r.x.iter().all(|&v| v < 1e-11));
    }

    #[test]
    fn one_cell_push_lands_on_superdiagonal() {
        let axis = GridAxis::new(0.0, 2.0, 5);
        let push = axis.spacing() / 0.5;
        let spec =
            HjbGridSpec::control_as_velocity(vec![axis], vec![vec![push]], |_, _| 1.0, 1.0, 0.5);
        let p = hjb_grid_problem(&spec).unwrap();
        let a = p.pieces()[0].matrix();
        for i in 0..4 {
            assert_eq!(a.get(i, i + 1), 0.5);
            assert_eq!(a.row_nnz(i), 1);
        }
        // the last node is pushed out of the hull and clamped onto itself
        assert_eq!(a.get(4, 4), 0.5);
    }

    #[test]
    fn rows_sum_to_discount() {
        let spec = HjbGridSpec::new(
            vec![GridAxis::new(-1.0, 1.0, 7), GridAxis::new(-1.0, 1.0, 6)],
            vec![vec![1.0, 0.3], vec![-0.7, 0.2], vec![0.0, -1.0]],
            |x, u| vec![u[0] - 0.5 * x[1], u[1] + 0.25 * x[0]],
            |x, u| (x[0] * x[0] + x[1] * x[1] + 0.1 * (u[0] * u[0] + u[1] * u[1])) / 2.2,
            0.5,
            0.2,
        );
        let p = hjb_grid_problem(&spec).unwrap();
        for piece in p.pieces() {
            for i in 0..p.dim() {
                assert!((piece.matrix().row_sum(i) - 0.9).abs() < 1e-15);
            }
        }
        let r = selective_update_linear(&p, None, 1e-10, PolicyTag::Variation).unwrap();
        assert!(hjb_residual(&spec, &r.x).unwrap() <= 1e-10);
    }

    #[test]
    fn small_displacement_is_dominant_diagonal() {
        let axis = GridAxis::new(0.0, 1.0, 11);
        let spec = HjbGridSpec::control_as_velocity(
            vec![axis],
            vec![vec![0.02], vec![-0.03]],
            |x, _| 1.0 + x[0],
            1.0,
            0.5,
        );
        let p = hjb_grid_problem(&spec).unwrap();
        let dom = p.dominance().unwrap();
        assert!((dom.gamma - 0.5).abs() < 1e-15);
        // largest leakage is 0.03·0.5/0.1 = 0.15 of the row
        assert!((dom.delta - 0.15).abs() < 1e-12, "{}", dom.delta);
        assert!(dom.guarantees_faster_preconditioning());
    }

    #[test]
    fn spec_errors() {
        let axes = vec![GridAxis::new(0.0, 1.0, 3)];
        assert!(matches!(
            hjb_grid_problem(&HjbGridSpec::still(axes.clone(), 1.0, 1.0, 1.5)),
            Err(HjbError::Step { .. })
        ));
        let mut spec = HjbGridSpec::still(axes.clone(), 1.0, 1.0, 0.5);
        spec.controls.clear();
        assert_eq!(hjb_grid_problem(&spec).unwrap_err(), HjbError::NoControls);
        assert!(matches!(
            hjb_grid_problem(&HjbGridSpec::still(axes, -1.0, 1.0, 0.5)),
            Err(HjbError::Cost { .. })
        ));
    }
}
