//! Adjoint gradients through the block-triangular state equations.
//!
//! For a quantity `J(φ, y, z)` the thermal adjoint is solved first,
//! `(∂E/∂z)ᵀ z* = −(∂J/∂z)ᵀ`, then the hydraulic one,
//! `(∂H/∂y)ᵀ y* = −(∂J/∂y)ᵀ − (∂E/∂y)ᵀ z*`, both with the factorizations
//! retained by the state solver. The total gradient is
//! `∂J/∂φ + (∂H/∂φ)ᵀ y* + (∂E/∂φ)ᵀ z*`.

use std::cell::Cell;

use crate::physics::{DesignVector, Model, PhysicsError, ThermalParts};
use crate::solver::StateSolution;
use crate::sparse::{LinearSolveError, Triplets};

/// A scalar function of design and state with its partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityOfInterest {
    pub value: f64,
    pub dj_dy: Vec<f64>,
    pub dj_dz: Vec<f64>,
    pub dj_dphi: Vec<f64>,
}

impl QuantityOfInterest {
    pub fn zeros(value: f64, ny: usize, nz: usize, nphi: usize) -> Self {
        Self { value, dj_dy: vec![0.0; ny], dj_dz: vec![0.0; nz], dj_dphi: vec![0.0; nphi] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub y_adj: Vec<f64>,
    pub z_adj: Vec<f64>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum AdjointError {
    #[error("transposed {block} system is singular")]
    Singular { block: &'static str },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

/// Design Jacobians at one converged state, shared by every quantity of
/// interest evaluated there.
#[derive(Debug)]
pub struct Adjoint<'a> {
    model: &'a Model,
    sol: &'a StateSolution,
    de_dy: Triplets,
    dh_dphi: Triplets,
    de_dphi: Triplets,
    h_scales: Vec<f64>,
    t_scales: Vec<f64>,
    passes: Cell<usize>,
}

impl<'a> Adjoint<'a> {
    pub fn new(model: &'a Model, phi: &DesignVector, sol: &'a StateSolution) -> Result<Self, AdjointError> {
        let sys = model.thermal_system(phi, &sol.y, &sol.z, ThermalParts { dz: false, dy: true, dphi: true })?;
        Ok(Self {
            model,
            sol,
            de_dy: sys.dy.expect("requested"),
            dh_dphi: model.dh_dphi(phi, &sol.y),
            de_dphi: sys.dphi.expect("requested"),
            h_scales: model.hydraulic_row_scales(),
            t_scales: model.thermal_row_scales(),
            passes: Cell::new(0),
        })
    }

    /// Number of adjoint passes (one thermal plus one hydraulic transposed
    /// solve each) performed so far.
    pub fn passes(&self) -> usize {
        self.passes.get()
    }

    /// Solves the two transposed systems for one quantity of interest.
    pub fn solve(&self, j: &QuantityOfInterest) -> Result<AdjointState, AdjointError> {
        let rhs_z: Vec<f64> = j.dj_dz.iter().map(|v| -v).collect();
        // the factors are of diag(1/s)·J, so Jᵀ (x / s) = b
        let x = self
            .sol
            .factor_t
            .solve_transpose(&rhs_z)
            .map_err(|_: LinearSolveError| AdjointError::Singular { block: "thermal" })?;
        let z_adj: Vec<f64> = x.iter().zip(&self.t_scales).map(|(v, s)| v / s).collect();

        let ey_z = self.de_dy.tr_mul_vec(&z_adj);
        let rhs_y: Vec<f64> = j.dj_dy.iter().zip(&ey_z).map(|(a, b)| -a - b).collect();
        let x = self.sol.factor_h.solve_transpose(&rhs_y).map_err(|_| AdjointError::Singular { block: "hydraulic" })?;
        let y_adj: Vec<f64> = x.iter().zip(&self.h_scales).map(|(v, s)| v / s).collect();
        self.passes.set(self.passes.get() + 1);
        Ok(AdjointState { y_adj, z_adj })
    }

    /// Total derivative of `J` with respect to the flat design vector.
    pub fn total_gradient(&self, j: &QuantityOfInterest, adj: &AdjointState) -> Vec<f64> {
        let mut g = j.dj_dphi.clone();
        for (gi, v) in g.iter_mut().zip(self.dh_dphi.tr_mul_vec(&adj.y_adj)) {
            *gi += v;
        }
        for (gi, v) in g.iter_mut().zip(self.de_dphi.tr_mul_vec(&adj.z_adj)) {
            *gi += v;
        }
        g
    }

    /// Adjoint solve followed by gradient assembly.
    pub fn gradient(&self, j: &QuantityOfInterest) -> Result<Vec<f64>, AdjointError> {
        let adj = self.solve(j)?;
        Ok(self.total_gradient(j, &adj))
    }

    /// State sensitivity along design direction `v` from the forward
    /// linearized equations.
    pub fn tangent(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>), AdjointError> {
        let hv = self.dh_dphi.mul_vec(v);
        let rhs: Vec<f64> = hv.iter().zip(&self.h_scales).map(|(a, s)| -a / s).collect();
        let dy = self.sol.factor_h.solve(&rhs).map_err(|_| AdjointError::Singular { block: "hydraulic" })?;
        let ev = self.de_dphi.mul_vec(v);
        let ey = self.de_dy.mul_vec(&dy);
        let rhs: Vec<f64> = ev.iter().zip(&ey).zip(&self.t_scales).map(|((a, b), s)| -(a + b) / s).collect();
        let dz = self.sol.factor_t.solve(&rhs).map_err(|_| AdjointError::Singular { block: "thermal" })?;
        Ok((dy, dz))
    }

    /// Directional derivative `dJ/dφ · v` from the tangent solution.
    pub fn directional_derivative(&self, j: &QuantityOfInterest, v: &[f64]) -> Result<f64, AdjointError> {
        let (dy, dz) = self.tangent(v)?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        Ok(dot(&j.dj_dphi, v) + dot(&j.dj_dy, &dy) + dot(&j.dj_dz, &dz))
    }

    pub fn model(&self) -> &Model {
        self.model
    }
}
