//! CP models `⟦σ; U_1, …, U_d⟧` with per-mode column constraints.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{kron_columns, DenseTensor};

/// Constraint carried by a factor matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// Every column has unit Euclidean norm.
    UnitColumns,
    /// `Uᵀ U = I`.
    Orthonormal,
}

/// Weights plus one `n_j × R` factor per mode. By convention the last `t`
/// modes are orthonormal and the leading `d − t` have unit columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    pub sigma: Vec<f64>,
    pub factors: Vec<DMatrix<f64>>,
    pub modes: Vec<ModeKind>,
}

impl CpModel {
    /// Builds a model whose last `t` modes are orthonormal. Shapes are checked;
    /// column constraints are not (see [`CpModel::constraint_error`]).
    pub fn new(sigma: Vec<f64>, factors: Vec<DMatrix<f64>>, t: usize) -> Result<Self> {
        let d = factors.len();
        if d < 2 {
            return Err(Error::structural(format!(
                "a CP model needs at least 2 modes, got {d}"
            )));
        }
        if t > d {
            return Err(Error::structural(format!(
                "{t} orthonormal modes requested for an order-{d} model"
            )));
        }
        let modes = (0..d)
            .map(|j| {
                if j >= d - t {
                    ModeKind::Orthonormal
                } else {
                    ModeKind::UnitColumns
                }
            })
            .collect();
        let model = Self {
            sigma,
            factors,
            modes,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let r = self.sigma.len();
        if r == 0 {
            return Err(Error::structural("rank must be at least 1"));
        }
        if self.modes.len() != self.factors.len() {
            return Err(Error::structural("one mode tag per factor is required"));
        }
        for (j, f) in self.factors.iter().enumerate() {
            if f.ncols() != r {
                return Err(Error::structural(format!(
                    "factor {j} has {} columns but rank is {r}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(Error::structural(format!("factor {j} has no rows")));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn num_orthonormal(&self) -> usize {
        self.modes
            .iter()
            .filter(|&&m| m == ModeKind::Orthonormal)
            .count()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    /// Column `i` of factor `j` as a contiguous slice.
    pub fn column(&self, j: usize, i: usize) -> &[f64] {
        let n = self.factors[j].nrows();
        &self.factors[j].as_slice()[i * n..(i + 1) * n]
    }

    /// Largest violation of the per-mode constraints: `|‖u‖ − 1|` for unit
    /// columns and `max |UᵀU − I|` for orthonormal modes.
    pub fn constraint_error(&self) -> f64 {
        self.factors
            .iter()
            .zip(&self.modes)
            .map(|(u, kind)| match kind {
                ModeKind::UnitColumns => u
                    .column_iter()
                    .map(|c| (c.norm() - 1.0).abs())
                    .fold(0.0, f64::max),
                ModeKind::Orthonormal => gram_error(u),
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_i σ_i ⊗_j u_{j,i}` as a dense tensor.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        self.check_shapes()?;
        let dims = self.dims();
        let mut out = DenseTensor::zeros(dims)?;
        let data = out.data_mut();
        for i in 0..self.rank() {
            let term = self.rank_one_term(i);
            for (o, t) in data.iter_mut().zip(&term) {
                *o += t;
            }
        }
        Ok(out)
    }

    /// Vectorized `σ_i ⊗_j u_{j,i}`.
    pub fn rank_one_term(&self, i: usize) -> Vec<f64> {
        let mut head = self.column(0, i).to_vec();
        for x in &mut head {
            *x *= self.sigma[i];
        }
        kron_columns(
            std::iter::once(head).chain((1..self.order()).map(|j| self.column(j, i).to_vec())),
        )
    }

    /// Columns of every mode but `mode` for component `i`, in mode order.
    pub fn other_columns(&self, mode: usize, i: usize) -> Vec<&[f64]> {
        (0..self.order())
            .filter(|&l| l != mode)
            .map(|l| self.column(l, i))
            .collect()
    }

    /// `R × R` Gram matrix of the vectorized unit rank-1 terms `⊗_j u_{j,i}`,
    /// computed as the Hadamard product of the factor Gram matrices.
    pub fn term_gram(&self) -> DMatrix<f64> {
        let r = self.rank();
        let mut g = DMatrix::from_element(r, r, 1.0);
        for u in &self.factors {
            g.component_mul_assign(&(u.transpose() * u));
        }
        g
    }
}

/// `max |UᵀU − I|` entrywise.
pub fn gram_error(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let r = g.nrows();
    (g - DMatrix::<f64>::identity(r, r)).amax()
}
