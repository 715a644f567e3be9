use nalgebra::DVector;

use crate::model::State;

/// Step-size control: error norm and the next step proposal.
///
/// Step sizes here are magnitudes; the driver applies the direction.
#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    pub rel_tol: f64,
    /// One entry, or one per component.
    pub abs_tol: Vec<f64>,
    pub norm_control: bool,
    pub h_min: f64,
    pub h_max: f64,
    pub h_constant: bool,
    pub safety: f64,
    pub shrink: f64,
    pub growth: f64,
    pub error_order: usize,
}

impl StepController {
    pub fn new(rel_tol: f64, abs_tol: Vec<f64>, h_min: f64, h_max: f64, error_order: usize) -> Self {
        Self {
            rel_tol,
            abs_tol,
            norm_control: false,
            h_min,
            h_max,
            h_constant: false,
            safety: 0.9,
            shrink: 0.2,
            growth: 5.0,
            error_order: error_order.max(1),
        }
    }

    fn abs_tol(&self, i: usize) -> f64 {
        if self.abs_tol.len() == 1 {
            self.abs_tol[0]
        } else {
            self.abs_tol[i]
        }
    }

    /// Scaled error: at most 1 means the step is accepted.
    pub fn error_norm<S: State>(&self, err: &DVector<S>, y_old: &DVector<S>, y_new: &DVector<S>) -> f64 {
        if self.norm_control {
            let scale = self.abs_tol(0) + self.rel_tol * y_old.norm().max(y_new.norm());
            return err.norm() / scale;
        }
        err.iter()
            .zip(y_old.iter().zip(y_new.iter()))
            .enumerate()
            .map(|(i, (e, (a, b)))| e.modulus() / (self.abs_tol(i) + self.rel_tol * a.modulus().max(b.modulus())))
            .fold(0.0, f64::max)
    }

    /// Whether to accept a step of size `h` with the given error, and the
    /// size of the next attempt.
    pub fn propose(&self, h: f64, err_norm: f64) -> (bool, f64) {
        if self.h_constant {
            return (true, h);
        }
        let accept = err_norm <= 1.0;
        let factor = if err_norm == 0.0 {
            self.growth
        } else {
            (self.safety * err_norm.powf(-1.0 / self.error_order as f64)).clamp(self.shrink, self.growth)
        };
        (accept, (h * factor).clamp(self.h_min, self.h_max))
    }
}
