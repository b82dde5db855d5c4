//! Plane-strain isotropic linear elasticity.
//!
//! Symmetric 2-tensors are stored as 3-vectors (t11, t22, t12) with the
//! TENSOR off-diagonal component (not the engineering double). Every
//! contraction s : t therefore carries weight 2 on the shear slot:
//! s : t = s11 t11 + s22 t22 + 2 s12 t12. This convention is fixed here once
//! and used by every quadratic form in the crate.

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Weight matrix diag(1, 1, 2) that turns the plain dot product of
/// (t11, t22, t12) vectors into the tensor double contraction.
pub fn contraction_weight() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 2.0))
}

/// Symmetric 2x2 tensor stored as (xx, yy, xy).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy }
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    /// Full tensor contraction s : t = s11 t11 + s22 t22 + 2 s12 t12.
    pub fn ddot(self, other: SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    /// Frobenius norm squared of the tensor (includes both off-diagonals).
    pub fn norm_sq(self) -> f64 {
        self.ddot(self)
    }

    pub fn as_vector(self) -> Vector3<f64> {
        Vector3::new(self.xx, self.yy, self.xy)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        SymTensor2::new(v.x, v.y, v.z)
    }

    /// Max absolute component.
    pub fn amax(self) -> f64 {
        self.xx.abs().max(self.yy.abs()).max(self.xy.abs())
    }
}

impl std::ops::Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }
}

impl std::ops::Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx - o.xx, self.yy - o.yy, self.xy - o.xy)
    }
}

impl std::ops::Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        SymTensor2::new(-self.xx, -self.yy, -self.xy)
    }
}

impl std::ops::Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, s: f64) -> SymTensor2 {
        SymTensor2::new(self.xx * s, self.yy * s, self.xy * s)
    }
}

impl std::ops::Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, t: SymTensor2) -> SymTensor2 {
        t * self
    }
}

/// Plane-strain isotropic material with precomputed Lame constants
/// mu = E / (2(1+nu)), lambda = E nu / ((1+nu)(1-2nu)).
#[derive(Debug, Clone, Copy)]
pub struct Material {
    e: f64,
    nu: f64,
    mu: f64,
    lambda: f64,
}

impl Material {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::InvalidYoung(e));
        }
        if !(nu.is_finite() && nu > 0.0 && nu < 0.5) {
            return Err(Error::InvalidPoisson(nu));
        }
        let mu = e / (2.0 * (1.0 + nu));
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        Ok(Material { e, nu, mu, lambda })
    }

    pub fn young(&self) -> f64 {
        self.e
    }

    pub fn poisson(&self) -> f64 {
        self.nu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// sigma = C eps = 2 mu eps + lambda tr(eps) I.
    pub fn stiffness_apply(&self, eps: SymTensor2) -> SymTensor2 {
        let tr = eps.trace();
        SymTensor2::new(
            2.0 * self.mu * eps.xx + self.lambda * tr,
            2.0 * self.mu * eps.yy + self.lambda * tr,
            2.0 * self.mu * eps.xy,
        )
    }

    /// eps = C^-1 sigma = (1 / 2mu) (sigma - lambda / (2(mu+lambda)) tr(sigma) I).
    pub fn compliance_apply(&self, sig: SymTensor2) -> SymTensor2 {
        let c = self.lambda / (2.0 * (self.mu + self.lambda));
        let tr = sig.trace();
        SymTensor2::new(
            (sig.xx - c * tr) / (2.0 * self.mu),
            (sig.yy - c * tr) / (2.0 * self.mu),
            sig.xy / (2.0 * self.mu),
        )
    }

    /// 3x3 matrix of compliance_apply acting on (s11, s22, s12) vectors.
    /// Symmetric; commutes with the contraction weight diag(1,1,2).
    pub fn compliance_matrix(&self) -> Matrix3<f64> {
        let c = self.lambda / (2.0 * (self.mu + self.lambda));
        let s = 1.0 / (2.0 * self.mu);
        Matrix3::new(
            s * (1.0 - c),
            -s * c,
            0.0,
            -s * c,
            s * (1.0 - c),
            0.0,
            0.0,
            0.0,
            s,
        )
    }
}
