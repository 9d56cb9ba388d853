//! Small dense linear algebra, generic over [`Scalar`] so that it runs on jets,
//! plus `f64` helpers for measuring tensors in an orthonormal frame.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::jets::Scalar;

pub(crate) type Mat<S> = Vec<Vec<S>>;

pub(crate) fn inner_s<S: Scalar>(eps: &[f64], u: &[S], v: &[S]) -> S {
    let mut acc = S::cst(0.0);
    for ((e, a), b) in eps.iter().zip(u).zip(v) {
        acc += *a * *b * *e;
    }
    acc
}

/// Gaussian elimination with partial pivoting on value magnitude.
/// Returns `(det, inverse)`; the inverse is `None` when the matrix is singular
/// to working precision.
pub(crate) fn det_inverse<S: Scalar>(m: &Mat<S>) -> (S, Option<Mat<S>>) {
    let n = m.len();
    let mut a = m.clone();
    let mut inv: Mat<S> = (0..n)
        .map(|i| (0..n).map(|j| S::cst(if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    let mut det = S::cst(1.0);
    let scale = m
        .iter()
        .flat_map(|r| r.iter().map(|x| x.value().abs()))
        .fold(0.0f64, f64::max);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| {
                a[r][col]
                    .value()
                    .abs()
                    .total_cmp(&a[s][col].value().abs())
            })
            .unwrap_or(col);
        if a[piv][col].value().abs() <= 1e-300 + f64::EPSILON * 1e-4 * scale {
            return (S::cst(0.0), None);
        }
        if piv != col {
            a.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for j in 0..n {
            a[col][j] = a[col][j] / p;
            inv[col][j] = inv[col][j] / p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col];
            for j in 0..n {
                let t = a[col][j];
                a[r][j] -= f * t;
                let t = inv[col][j];
                inv[r][j] -= f * t;
            }
        }
    }
    (det, Some(inv))
}

/// Determinant by Laplace expansion. Unlike elimination it has no branches,
/// so derivatives survive even where the value of the determinant is zero.
pub(crate) fn det_expand<S: Scalar>(m: &Mat<S>) -> S {
    let n = m.len();
    match n {
        0 => S::cst(1.0),
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            let mut acc = S::cst(0.0);
            for c in 0..n {
                let minor: Mat<S> = m[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|&(j, _)| j != c)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let term = m[0][c] * det_expand(&minor);
                if c % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

/// Generalised cross product of `m - 1` rows of length `m`: the vector `w`
/// with `w_j = (-1)^j det(rows without column j)`, so `sum_j w_j r_j = 0`
/// for every row `r`.
pub(crate) fn cofactor_vector<S: Scalar>(rows: &[Vec<S>]) -> Vec<S> {
    let m = rows.len() + 1;
    (0..m)
        .map(|j| {
            let minor: Mat<S> = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|&(c, _)| c != j)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let d = det_expand(&minor);
            if j % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

pub(crate) fn values(m: &Mat<impl Scalar>) -> DMatrix<f64> {
    let r = m.len();
    let c = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| m[i][j].value())
}

/// A `g`-orthonormal frame used to measure tensors independently of the
/// chart's coordinate scaling. Columns of `p` are the frame vectors.
#[derive(Debug, Clone)]
pub struct OrthoFrame {
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
}

impl OrthoFrame {
    pub fn new(g: &DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(g.clone());
        if eig.eigenvalues.iter().any(|l| l.abs() < 1e-14) {
            return Err(Error::DegenerateMetric {
                det: eig.eigenvalues.iter().product(),
            });
        }
        let n = g.nrows();
        let q = eig.eigenvectors;
        let s = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| l.abs().sqrt()));
        let mut p = q.clone();
        let mut p_inv = q.transpose();
        for k in 0..n {
            p.column_mut(k).scale_mut(1.0 / s[k]);
            p_inv.row_mut(k).scale_mut(s[k]);
        }
        Ok(Self { p, p_inv })
    }

    /// Components of a lower-index bilinear form in the frame.
    pub fn bilinear(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        self.p.transpose() * t * &self.p
    }

    pub fn bilinear_norm(&self, t: &DMatrix<f64>) -> f64 {
        self.bilinear(t).amax()
    }

    /// Max-entry norm of a mixed `(1,1)` operator.
    pub fn operator_norm(&self, a: &DMatrix<f64>) -> f64 {
        (&self.p_inv * a * &self.p).amax()
    }

    /// Max-entry norm of a vector given by its coordinate components.
    pub fn vector_norm(&self, v: &DVector<f64>) -> f64 {
        (&self.p_inv * v).amax()
    }
}
