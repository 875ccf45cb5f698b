//! Dense complex linear algebra shared by the simulation modules.
//!
//! Systems are small (dimension 2^n with n <= 12, and n <= 4 for the
//! molecules of interest), so dense Hermitian eigensolvers are sufficient.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigenvalue clustering tolerance used when refining degenerate subspaces,
/// relative to the spectral range of the operator.
const CLUSTER_REL_TOL: f64 = 1e-9;

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted
/// ascending and a deterministic phase convention: the largest-magnitude
/// component of each eigenvector is made real and positive.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Eigenvalues in ascending order, Hz.
    pub energies: Vec<f64>,
    /// Eigenvectors as matrix columns, in the same order.
    pub vectors: DMatrix<C64>,
}

impl EigenSystem {
    /// Diagonalize a Hermitian matrix.
    pub fn new(matrix: &DMatrix<C64>) -> Self {
        let eig = matrix.clone().symmetric_eigen();
        let dim = matrix.nrows();

        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(dim, dim);
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(i));
        }

        let mut out = Self { energies, vectors };
        out.fix_phases();
        out
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Eigenvector as a column view.
    pub fn state(&self, i: usize) -> nalgebra::DVectorView<'_, C64> {
        self.vectors.column(i)
    }

    /// Matrix element `<i| op |j>`.
    pub fn matrix_element(&self, op: &DMatrix<C64>, i: usize, j: usize) -> C64 {
        let vi = self.vectors.column(i);
        let vj = self.vectors.column(j);
        (vi.adjoint() * op * vj)[(0, 0)]
    }

    /// Real expectation value `<i| op |i>` of a Hermitian operator.
    pub fn expectation(&self, op: &DMatrix<C64>, i: usize) -> f64 {
        self.matrix_element(op, i, i).re
    }

    /// Refine degenerate eigenspaces so that the given commuting Hermitian
    /// operators become diagonal within each cluster, in order. This makes
    /// the basis of a degenerate Hamiltonian (e.g. the zero-field coupling
    /// Hamiltonian) deterministic and labels-compatible.
    pub fn refine(&mut self, ops: &[&DMatrix<C64>]) {
        // Cluster boundaries move as refinement introduces new quantum
        // numbers; track the effective eigenvalue tuple per column.
        let dim = self.dim();
        let mut keys: Vec<Vec<f64>> = self.energies.iter().map(|&e| vec![e]).collect();

        for op in ops {
            let scale = op.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
            let tol = |k: &[f64], l: &[f64]| {
                k.iter()
                    .zip(l)
                    .all(|(a, b)| (a - b).abs() <= CLUSTER_REL_TOL * scale.max(a.abs().max(b.abs())))
            };

            let mut start = 0;
            while start < dim {
                let mut end = start + 1;
                while end < dim && tol(&keys[end], &keys[start]) {
                    end += 1;
                }
                if end - start > 1 {
                    self.refine_block(op, start, end, &mut keys);
                } else {
                    let val = self.expectation(op, start);
                    keys[start].push(val);
                }
                start = end;
            }
        }
        self.fix_phases();
    }

    fn refine_block(&mut self, op: &DMatrix<C64>, start: usize, end: usize, keys: &mut [Vec<f64>]) {
        let k = end - start;
        let block = self.vectors.columns(start, k).clone_owned();
        let small = block.adjoint() * op * &block;
        let sub = EigenSystem::new(&small);
        let rotated = block * &sub.vectors;
        for (offset, col) in rotated.column_iter().enumerate() {
            self.vectors.set_column(start + offset, &col);
            keys[start + offset].push(sub.energies[offset]);
        }
    }

    fn fix_phases(&mut self) {
        for mut col in self.vectors.column_iter_mut() {
            let mut best = 0;
            let mut best_norm = 0.0;
            for (i, z) in col.iter().enumerate() {
                let n = z.norm();
                if n > best_norm + 1e-12 {
                    best_norm = n;
                    best = i;
                }
            }
            if best_norm > 0.0 {
                let phase = col[best] / C64::new(best_norm, 0.0);
                let correction = phase.conj();
                for z in col.iter_mut() {
                    *z *= correction;
                }
            }
        }
    }
}

/// Maximum elementwise deviation from Hermiticity, `max |A - A^dagger|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Check the matrix is square with the expected dimension.
pub fn check_dim(m: &DMatrix<C64>, expected: usize, what: &'static str) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual: m.nrows(),
        });
    }
    Ok(())
}

/// Unitary `exp(-i * angle * generator)` for a Hermitian generator.
pub fn rotation_unitary(generator: &DMatrix<C64>, angle: f64) -> DMatrix<C64> {
    let eig = EigenSystem::new(generator);
    let dim = eig.dim();
    let phases = DVector::from_iterator(
        dim,
        eig.energies
            .iter()
            .map(|&e| (C64::new(0.0, -angle * e)).exp()),
    );
    let mut scaled = eig.vectors.clone();
    for (i, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[i];
    }
    scaled * eig.vectors.adjoint()
}

/// Kronecker product chain `ops[0] (x) ops[1] (x) ...`.
pub fn kron_chain(ops: &[DMatrix<C64>]) -> DMatrix<C64> {
    let mut result = DMatrix::identity(1, 1);
    for op in ops {
        result = result.kronecker(op);
    }
    result
}

/// Matrix exponential by scaling-and-squaring with a Taylor series.
/// Accurate for the small, well-conditioned matrices used here; serves as
/// a propagation route independent of the eigendecomposition.
pub fn matrix_exp(m: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = m.nrows();
    // 1-norm (max absolute column sum).
    let norm = (0..m.ncols())
        .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / C64::new(2f64.powi(s as i32), 0.0);

    let mut result = DMatrix::<C64>::identity(dim, dim);
    let mut term = DMatrix::<C64>::identity(dim, dim);
    for k in 1..=20 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
