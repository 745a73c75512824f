use serde::{Deserialize, Serialize};

use crate::model::{ExecState, Mat2};

/// Relative tolerance of the positive-definiteness test.
pub const PD_REL_TOL: f64 = 1e-12;

/// Quadratic value function `V(x) = x'Px + b'x + c` with `P` stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticValue {
    pub p11: f64,
    pub p12: f64,
    pub p22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
}

impl QuadraticValue {
    pub fn value_at(&self, x: ExecState) -> f64 {
        let (q, l) = (x.q, x.lambda);
        self.p11 * q * q
            + 2.0 * self.p12 * q * l
            + self.p22 * l * l
            + self.b1 * q
            + self.b2 * l
            + self.c
    }

    pub fn matrix(&self) -> Mat2 {
        [[self.p11, self.p12], [self.p12, self.p22]]
    }

    pub fn det(&self) -> f64 {
        self.p11 * self.p22 - self.p12 * self.p12
    }

    /// Squared Frobenius norm of `P`.
    pub fn norm_sq(&self) -> f64 {
        self.p11 * self.p11 + 2.0 * self.p12 * self.p12 + self.p22 * self.p22
    }

    /// `p11 > 0` and `det P > 1e-12 (1 + |P|_F^2)`.
    pub fn is_positive_definite(&self) -> bool {
        self.p11 > 0.0 && self.det() > PD_REL_TOL * (1.0 + self.norm_sq())
    }

    pub fn is_finite(&self) -> bool {
        [self.p11, self.p12, self.p22, self.b1, self.b2, self.c]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Affine control `u = alpha + beta_q q + beta_lambda lambda`, in lots sniped at the far touch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePolicy {
    pub alpha: f64,
    pub beta_q: f64,
    pub beta_lambda: f64,
}

impl AffinePolicy {
    /// Raw model control. May be negative (a passive-touch sell) or exceed `q`.
    pub fn action(&self, x: ExecState) -> f64 {
        self.alpha + self.beta_q * x.q + self.beta_lambda * x.lambda
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta_q.is_finite() && self.beta_lambda.is_finite()
    }
}
