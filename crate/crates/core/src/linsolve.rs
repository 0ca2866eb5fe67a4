//! Dense kernels behind the tangent-space integrator: SVD-based null spaces,
//! minimal-norm least-squares solves and the largest natural frequency of a
//! symmetric pencil.
//!
//! Every routine accepts rank-deficient input. Redundant constraint rows are
//! expected and simply lower the numerical rank.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below `DEFAULT_RANK_TOL * sigma_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative pivot threshold for the Cholesky factorizations used on mass
/// matrices.
pub(crate) const PIVOT_TOL: f64 = 1e-12;

pub(crate) fn ensure_finite_matrix(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn ensure_finite_vector(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} contains non-finite entries")))
    }
}

/// Rank-revealing factorization `A = U Σ Vᵀ` with the full right basis kept,
/// so one factorization serves the null space and any number of
/// pseudoinverse solves.
#[derive(Debug, Clone)]
pub struct Factorization {
    rows: usize,
    cols: usize,
    rank: usize,
    /// First `rank` left singular vectors (rows × rank).
    u: Matrix,
    /// Nonzero singular values, descending.
    sigma: Vector,
    /// Full right basis (cols × cols); the first `rank` columns span the row space.
    v: Matrix,
}

impl Factorization {
    pub fn new(a: &Matrix, rank_tol: f64) -> Result<Self> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::Validation(format!(
                "rank tolerance must lie in (0, 1), got {rank_tol}"
            )));
        }
        ensure_finite_matrix(a, "matrix")?;
        let (rows, cols) = a.shape();

        if rows == 0 || cols == 0 {
            return Ok(Self {
                rows,
                cols,
                rank: 0,
                u: Matrix::zeros(rows, 0),
                sigma: Vector::zeros(0),
                v: Matrix::identity(cols, cols),
            });
        }

        // Pad wide matrices with zero rows so that the SVD returns a square Vᵀ.
        let padded = if rows < cols {
            let mut p = Matrix::zeros(cols, cols);
            p.view_mut((0, 0), (rows, cols)).copy_from(a);
            p
        } else {
            a.clone()
        };

        let svd = SVD::try_new(padded, true, true, 5.0 * f64::EPSILON, 0)
            .ok_or_else(|| Error::Validation("SVD failed to converge".into()))?;
        let u_full = svd.u.expect("left vectors requested");
        let v_t = svd.v_t.expect("right vectors requested");
        let s = svd.singular_values;

        let sigma_max = s.iter().copied().fold(0.0_f64, f64::max);
        let threshold = rank_tol * sigma_max;
        let rank = if sigma_max == 0.0 {
            0
        } else {
            s.iter().filter(|&&v| v >= threshold).count()
        };

        let u = u_full.view((0, 0), (rows, rank)).into_owned();
        let sigma = Vector::from_iterator(rank, s.iter().take(rank).copied());
        let v = v_t.transpose();

        Ok(Self {
            rows,
            cols,
            rank,
            u,
            sigma,
            v,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn singular_values(&self) -> &Vector {
        &self.sigma
    }

    /// Orthonormal basis of `{v : A v = 0}` (cols × (cols − rank)).
    pub fn null_space(&self) -> Matrix {
        self.v.columns(self.rank, self.cols - self.rank).into_owned()
    }

    /// Minimal-norm least-squares solution of `A x = b`.
    pub fn solve(&self, b: &Vector) -> Vector {
        assert_eq!(b.len(), self.rows, "right-hand side length mismatch");
        let v_r = self.v.columns(0, self.rank);
        let mut c = self.u.tr_mul(b);
        c.component_div_assign(&self.sigma);
        v_r * c
    }

    /// Column-wise [`Factorization::solve`].
    pub fn solve_many(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.nrows(), self.rows, "right-hand side row mismatch");
        let v_r = self.v.columns(0, self.rank);
        let mut c = self.u.tr_mul(b);
        for (mut row, s) in c.row_iter_mut().zip(self.sigma.iter()) {
            row /= *s;
        }
        v_r * c
    }

    /// Minimal-norm least-squares solution of `Aᵀ y = b`, reusing this
    /// factorization (`(Aᵀ)⁺ = U Σ⁻¹ Vᵀ`).
    pub fn solve_transposed(&self, b: &Vector) -> Vector {
        assert_eq!(b.len(), self.cols, "right-hand side length mismatch");
        let v_r = self.v.columns(0, self.rank);
        let mut c = v_r.tr_mul(b);
        c.component_div_assign(&self.sigma);
        &self.u * c
    }
}

pub fn null_space_basis(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    Ok(Factorization::new(a, rank_tol)?.null_space())
}

pub fn min_norm_solve(a: &Matrix, b: &Vector) -> Result<Vector> {
    if b.len() != a.nrows() {
        return Err(Error::Validation(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            a.nrows()
        )));
    }
    ensure_finite_vector(b, "right-hand side")?;
    Ok(Factorization::new(a, DEFAULT_RANK_TOL)?.solve(b))
}

pub fn multi_min_norm_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.nrows() != a.nrows() {
        return Err(Error::Validation(format!(
            "right-hand side has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    ensure_finite_matrix(b, "right-hand side")?;
    Ok(Factorization::new(a, DEFAULT_RANK_TOL)?.solve_many(b))
}

/// Lower Cholesky factor of a symmetric matrix. On failure returns the index
/// and value of the first pivot that is not safely positive.
pub(crate) fn cholesky_lower(m: &Matrix, rel_tol: f64) -> std::result::Result<Matrix, (usize, f64)> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0_f64, f64::max);
    let floor = rel_tol * scale.max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return Err((j, d));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

pub(crate) fn symmetric_part(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Largest natural frequency `sqrt(max eig(K, M))` of a symmetric pencil.
///
/// `K` is replaced by its symmetric part. Negative eigenvalues, which show up
/// for instantaneous linearizations away from equilibrium, yield `0`.
pub fn max_generalized_frequency(k: &Matrix, m: &Matrix) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n || k.shape() != (n, n) {
        return Err(Error::Validation(format!(
            "pencil dimensions differ: K is {:?}, M is {:?}",
            k.shape(),
            m.shape()
        )));
    }
    ensure_finite_matrix(k, "stiffness")?;
    ensure_finite_matrix(m, "mass")?;
    if n == 0 {
        return Ok(0.0);
    }

    let l = cholesky_lower(&symmetric_part(m), PIVOT_TOL)
        .map_err(|(pivot, value)| Error::SingularMass { pivot, value })?;
    let ks = symmetric_part(k);
    let linv_k = l
        .solve_lower_triangular(&ks)
        .ok_or(Error::SingularMass { pivot: 0, value: 0.0 })?;
    let a = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or(Error::SingularMass { pivot: 0, value: 0.0 })?;
    let eig = SymmetricEigen::new(symmetric_part(&a));
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(lambda_max.max(0.0).sqrt())
}
