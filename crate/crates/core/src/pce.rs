//! Sparse PCE surrogate: fit on a design, predict in physical space.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{MultiIndexSet, PolyBasis};
use crate::design::Design;
use crate::error::{PceError, Result};
use crate::inputs::InputModel;
use crate::solvers::{
    solve_with_hyperparameters, RegressionProblem, SelectionSpec, SolverId, SparseSolution,
};

/// Fitted expansion `sum_alpha c_alpha psi_alpha(T(x))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsePceModel {
    pub input: InputModel,
    pub indices: MultiIndexSet,
    pub solution: SparseSolution,
    #[serde(skip)]
    basis: Option<PolyBasis>,
}

/// Rescales design weights to unit mean square so that weighted and
/// unweighted fits share the same scale of `(Psi^T W^2 Psi)^{-1}`.
pub fn normalized_weights(w: &DVector<f64>) -> DVector<f64> {
    let ms = w.norm_squared() / w.len() as f64;
    if ms > 0.0 {
        w / ms.sqrt()
    } else {
        w.clone()
    }
}

impl SparsePceModel {
    /// Fits `solver` to responses `y` at `design`.
    pub fn fit(
        input: &InputModel,
        basis: &PolyBasis,
        design: &Design,
        y: &DVector<f64>,
        solver: SolverId,
        spec: &SelectionSpec,
    ) -> Result<Self> {
        if design.len() != y.len() {
            return Err(PceError::DimensionMismatch {
                expected: design.len(),
                got: y.len(),
            });
        }
        let psi = design.regression_matrix(basis)?;
        let weights = design.weights.as_ref().map(normalized_weights);
        let problem = RegressionProblem::new(psi, y.clone(), weights)?;
        let solution = solve_with_hyperparameters(solver, &problem, spec)?;
        Ok(Self::from_solution(input.clone(), basis.clone(), solution))
    }

    pub fn from_solution(input: InputModel, basis: PolyBasis, solution: SparseSolution) -> Self {
        Self {
            input,
            indices: basis.index_set().clone(),
            solution,
            basis: Some(basis),
        }
    }

    fn basis(&self) -> Result<Cow<'_, PolyBasis>> {
        match &self.basis {
            Some(b) => Ok(Cow::Borrowed(b)),
            None => Ok(Cow::Owned(PolyBasis::new(
                self.input.families(),
                self.indices.clone(),
            )?)),
        }
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.solution.coefficients
    }

    pub fn n_active(&self) -> usize {
        self.solution.n_active()
    }

    pub fn cv_error(&self) -> f64 {
        self.solution.cv_error
    }

    /// Predictions at standardized points.
    pub fn predict_standard(&self, u: &DMatrix<f64>) -> Result<DVector<f64>> {
        let basis = self.basis()?;
        let active = &self.solution.active_set;
        if active.is_empty() {
            return Ok(DVector::zeros(u.nrows()));
        }
        let psi = basis.assemble_columns(u, active)?;
        let c = DVector::from_iterator(
            active.len(),
            active.iter().map(|&j| self.solution.coefficients[j]),
        );
        Ok(psi * c)
    }

    /// Predictions at physical points (rows of `x`).
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let u = self.input.to_standard_matrix(x)?;
        self.predict_standard(&u)
    }

    /// Mean and variance of the expansion, read off its coefficients.
    pub fn moments(&self) -> (f64, f64) {
        let zero = self
            .indices
            .indices()
            .iter()
            .position(|a| a.iter().all(|&v| v == 0));
        let c = &self.solution.coefficients;
        let mean = zero.map_or(0.0, |j| c[j]);
        let var = c.norm_squared() - mean * mean;
        (mean, var)
    }
}
