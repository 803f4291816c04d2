//! Thin wrappers around sparse LU for the singular-generator solves shared by
//! the particle engine and the Fock-space oracle.
//!
//! Both steady states and Drazin actions reduce to linear solves with the
//! generator after one redundant row is dropped. The dropped row r0 (any row
//! participating in the left null functional) is replaced by the single
//! equation x[r0] = rhs[r0], which keeps the factorization as sparse as the
//! generator itself; a dense normalization row would fill in badly.
//!
//! * steady state: solve A x = e_r0 (pins x[r0] = 1), then normalize by the
//!   left null functional;
//! * Drazin action y = L^D b: project b off the stationary direction, zero
//!   its r0 entry, solve, and gauge-fix the solution family y + t p back to
//!   zero overlap with the left null functional. Both corrections are the
//!   caller's job since it owns the functional.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::error::{Error, Result};

macro_rules! nullspace_solver {
    ($name:ident, $ty:ty, $one:expr, $zero:expr) => {
        pub struct $name {
            lu: faer::sparse::linalg::solvers::Lu<usize, $ty>,
            dim: usize,
            r0: usize,
        }

        impl $name {
            /// Factor the generator with row `r0` replaced by the pin
            /// equation. `triplets` hold (row, col, value) with duplicates
            /// accumulated.
            pub fn new(dim: usize, triplets: &[(usize, usize, $ty)], r0: usize) -> Result<Self> {
                let mut trips: Vec<Triplet<usize, usize, $ty>> = triplets
                    .iter()
                    .filter(|(r, _, _)| *r != r0)
                    .map(|&(r, c, v)| Triplet::new(r, c, v))
                    .collect();
                trips.push(Triplet::new(r0, r0, $one));
                let mat = SparseColMat::<usize, $ty>::try_new_from_triplets(dim, dim, &trips)
                    .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))?;
                let lu = mat
                    .sp_lu()
                    .map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;
                Ok(Self { lu, dim, r0 })
            }

            /// Unnormalized right null vector of the generator (x[r0] = 1).
            pub fn solve_pinned(&self) -> Vec<$ty> {
                let mut rhs = faer::Mat::<$ty>::zeros(self.dim, 1);
                rhs[(self.r0, 0)] = $one;
                let x = self.lu.solve(&rhs);
                (0..self.dim).map(|i| x[(i, 0)]).collect()
            }

            /// Solve with the r0 entry of `rhs` replaced by 0 (fixing an
            /// arbitrary gauge along the null direction). The caller must
            /// pass a right-hand side orthogonal to the left null vector and
            /// gauge-fix the result.
            pub fn solve_dropped_row(&self, rhs: &[$ty]) -> Vec<$ty> {
                let mut b = faer::Mat::<$ty>::zeros(self.dim, 1);
                for (i, &v) in rhs.iter().enumerate() {
                    b[(i, 0)] = v;
                }
                b[(self.r0, 0)] = $zero;
                let x = self.lu.solve(&b);
                (0..self.dim).map(|i| x[(i, 0)]).collect()
            }
        }
    };
}

nullspace_solver!(NullspaceSolver, f64, 1.0f64, 0.0f64);
nullspace_solver!(
    NullspaceSolverC,
    Complex64,
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 0.0)
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_state_of_two_state_chain() {
        // generator [[-1, 2], [1, -2]]: steady (2/3, 1/3)
        let trips = vec![
            (0usize, 0usize, -1.0),
            (1, 0, 1.0),
            (0, 1, 2.0),
            (1, 1, -2.0),
        ];
        let s = NullspaceSolver::new(2, &trips, 0).unwrap();
        let x = s.solve_pinned();
        let mass: f64 = x.iter().sum();
        assert!((x[0] / mass - 2.0 / 3.0).abs() < 1e-15);
        assert!((x[1] / mass - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dropped_row_solve_recovers_drazin_action() {
        let trips = vec![
            (0usize, 0usize, -1.0),
            (1, 0, 1.0),
            (0, 1, 2.0),
            (1, 1, -2.0),
        ];
        let s = NullspaceSolver::new(2, &trips, 0).unwrap();
        let x = s.solve_pinned();
        let mass: f64 = x.iter().sum();
        let p = [x[0] / mass, x[1] / mass];
        let b = [1.0, -0.25];
        let tb: f64 = b.iter().sum();
        let qb = [b[0] - p[0] * tb, b[1] - p[1] * tb];
        let mut y = s.solve_dropped_row(&qb);
        // gauge-fix to zero sum
        let ty: f64 = y.iter().sum();
        y[0] -= p[0] * ty;
        y[1] -= p[1] * ty;
        // dense reference: L^D = (L - p 1^T)^-1 (I - p 1^T)
        let l = [[-1.0, 2.0], [1.0, -2.0]];
        let a = [
            [l[0][0] - p[0], l[0][1] - p[0]],
            [l[1][0] - p[1], l[1][1] - p[1]],
        ];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let ainv = [
            [a[1][1] / det, -a[0][1] / det],
            [-a[1][0] / det, a[0][0] / det],
        ];
        let want = [
            ainv[0][0] * qb[0] + ainv[0][1] * qb[1],
            ainv[1][0] * qb[0] + ainv[1][1] * qb[1],
        ];
        assert!((y[0] - want[0]).abs() < 1e-14, "{y:?} vs {want:?}");
        assert!((y[1] - want[1]).abs() < 1e-14);
        assert!((y[0] + y[1]).abs() < 1e-14);
    }

    #[test]
    fn complex_solver_round_trips() {
        let trips = vec![
            (0usize, 0usize, Complex64::new(-1.0, 0.0)),
            (1, 0, Complex64::new(1.0, 0.0)),
            (0, 1, Complex64::new(2.0, 0.0)),
            (1, 1, Complex64::new(-2.0, 0.0)),
        ];
        let s = NullspaceSolverC::new(2, &trips, 0).unwrap();
        let x = s.solve_pinned();
        let mass: Complex64 = x.iter().sum();
        assert!((x[0] / mass - 2.0 / 3.0).norm() < 1e-14);
    }
}
