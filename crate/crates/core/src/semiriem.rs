//! Signature-aware linear algebra for semi-Euclidean container spaces and the
//! two ambient models built on them: the flat space itself and a quadric
//! `inner(x, x) = eps_q` inside it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for quadric membership.
pub const QUADRIC_TOL: f64 = 1e-9;

/// Tolerance used when checking the infinitesimal-isometry constraint on `B`.
pub const CONFORMAL_MATRIX_TOL: f64 = 1e-12;

/// Metric signs of a flat container space, timelike (`-1`) entries first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Signature {
    eps: Vec<f64>,
}

impl Signature {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::InvalidSignature("empty signature".into()));
        }
        let mut seen_plus = false;
        for (i, &e) in eps.iter().enumerate() {
            if e == 1.0 {
                seen_plus = true;
            } else if e == -1.0 {
                if seen_plus {
                    return Err(Error::InvalidSignature(format!(
                        "entry {i} is -1 after a +1 entry"
                    )));
                }
            } else {
                return Err(Error::InvalidSignature(format!("entry {i} is {e}, not +-1")));
            }
        }
        Ok(Self { eps })
    }

    /// All-plus signature of the given dimension.
    pub fn euclidean(dim: usize) -> Self {
        Self { eps: vec![1.0; dim] }
    }

    /// `(-, +, ..., +)` of the given dimension.
    pub fn lorentz(dim: usize) -> Self {
        assert!(dim >= 1, "Lorentz signature needs at least one slot");
        let mut eps = vec![1.0; dim];
        eps[0] = -1.0;
        Self { eps }
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    /// Number of negative entries.
    pub fn index(&self) -> usize {
        self.eps.iter().filter(|&&e| e < 0.0).count()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.eps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.eps.len(),
                got: len,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Signature {
    type Error = Error;

    fn try_from(eps: Vec<f64>) -> Result<Self> {
        Signature::new(eps)
    }
}

impl From<Signature> for Vec<f64> {
    fn from(sig: Signature) -> Self {
        sig.eps
    }
}

/// `sum_i eps_i u_i v_i`.
pub fn inner(sig: &Signature, u: &[f64], v: &[f64]) -> Result<f64> {
    sig.check_len(u.len())?;
    sig.check_len(v.len())?;
    Ok(inner_unchecked(sig.eps(), u, v))
}

pub(crate) fn inner_unchecked(eps: &[f64], u: &[f64], v: &[f64]) -> f64 {
    eps.iter()
        .zip(u.iter().zip(v))
        .map(|(e, (a, b))| e * a * b)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientKind {
    Flat,
    /// Level set `inner(x, x) = sign` inside the flat container.
    Quadric { sign: f64 },
}

/// A semi-Riemannian space form realised inside a flat container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientSpace {
    pub kind: AmbientKind,
    pub signature: Signature,
}

impl AmbientSpace {
    pub fn flat(signature: Signature) -> Self {
        Self {
            kind: AmbientKind::Flat,
            signature,
        }
    }

    pub fn quadric(signature: Signature, sign: f64) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidParameter(format!(
                "quadric sign must be +-1, got {sign}"
            )));
        }
        if sign < 0.0 && signature.index() == 0 {
            return Err(Error::InvalidParameter(
                "a quadric with inner(x, x) = -1 needs a timelike direction".into(),
            ));
        }
        Ok(Self {
            kind: AmbientKind::Quadric { sign },
            signature,
        })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::flat(Signature::euclidean(dim))
    }

    pub fn lorentz(dim: usize) -> Self {
        Self::flat(Signature::lorentz(dim))
    }

    /// Constant sectional curvature: 0 for flat, `eps_q` for a quadric.
    pub fn curvature(&self) -> f64 {
        match self.kind {
            AmbientKind::Flat => 0.0,
            AmbientKind::Quadric { sign } => sign,
        }
    }

    pub fn container_dim(&self) -> usize {
        self.signature.dim()
    }

    /// Dimension of the ambient manifold itself.
    pub fn dim(&self) -> usize {
        match self.kind {
            AmbientKind::Flat => self.signature.dim(),
            AmbientKind::Quadric { .. } => self.signature.dim() - 1,
        }
    }

    pub fn quadric_sign(&self) -> Option<f64> {
        match self.kind {
            AmbientKind::Flat => None,
            AmbientKind::Quadric { sign } => Some(sign),
        }
    }

    pub fn is_quadric(&self) -> bool {
        matches!(self.kind, AmbientKind::Quadric { .. })
    }

    /// Errors unless `x` belongs to the ambient (always true for flat).
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.signature.check_len(x.len())?;
        if let AmbientKind::Quadric { sign } = self.kind {
            let deviation = (inner_unchecked(self.signature.eps(), x, x) - sign).abs();
            if deviation > QUADRIC_TOL {
                return Err(Error::OffQuadric { deviation });
            }
        }
        Ok(())
    }
}

/// Outcome of [`validate_conformal_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMatrixCheck {
    /// Violated `(j, k)` pairs (zero-based) with the size of the violation.
    pub violations: Vec<(usize, usize, f64)>,
}

impl ConformalMatrixCheck {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `eps_j b_jk + eps_k b_kj = 0` off the diagonal and `b_ii = 0`.
pub fn validate_conformal_matrix(sig: &Signature, b: &DMatrix<f64>) -> Result<ConformalMatrixCheck> {
    let m = sig.dim();
    if b.nrows() != m || b.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: if b.nrows() != m { b.nrows() } else { b.ncols() },
        });
    }
    let eps = sig.eps();
    let mut violations = Vec::new();
    for j in 0..m {
        let d = b[(j, j)];
        if d.abs() > CONFORMAL_MATRIX_TOL {
            violations.push((j, j, d.abs()));
        }
        for k in (j + 1)..m {
            let s = eps[j] * b[(j, k)] + eps[k] * b[(k, j)];
            let scale = 1.0f64.max(b[(j, k)].abs() + b[(k, j)].abs());
            if s.abs() > CONFORMAL_MATRIX_TOL * scale {
                violations.push((j, k, s.abs()));
            }
        }
    }
    Ok(ConformalMatrixCheck { violations })
}

/// Infinitesimal isometry `B` of the container: `inner(Bu, v) + inner(u, Bv) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMatrix {
    b: DMatrix<f64>,
    sig: Signature,
}

impl ConformalMatrix {
    pub fn new(sig: Signature, b: DMatrix<f64>) -> Result<Self> {
        let check = validate_conformal_matrix(&sig, &b)?;
        if !check.is_valid() {
            return Err(Error::InvalidConformalMatrix {
                violations: check.violations.iter().map(|&(j, k, _)| (j, k)).collect(),
            });
        }
        Ok(Self { b, sig })
    }

    /// Skips validation; callers must know why they want an invalid matrix.
    pub(crate) fn new_unchecked(sig: Signature, b: DMatrix<f64>) -> Self {
        Self { b, sig }
    }

    pub fn zero(sig: Signature) -> Self {
        let m = sig.dim();
        Self {
            b: DMatrix::zeros(m, m),
            sig,
        }
    }

    /// Builds the matrix with `b_jk = value` and `b_kj = -eps_j eps_k value`.
    pub fn elementary(sig: Signature, j: usize, k: usize, value: f64) -> Result<Self> {
        let m = sig.dim();
        if j >= m || k >= m || j == k {
            return Err(Error::InvalidParameter(format!(
                "elementary generator needs distinct indices below {m}"
            )));
        }
        let eps = sig.eps();
        let mut b = DMatrix::zeros(m, m);
        b[(j, k)] = value;
        b[(k, j)] = -eps[j] * eps[k] * value;
        Ok(Self { b, sig })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(|&v| v == 0.0)
    }
}

/// Orthogonal projection of `w` onto the tangent space of the quadric through `x`:
/// `w - eps_q inner(w, x) x`, with `eps_q` read off `inner(x, x)`.
pub fn project_tangent(sig: &Signature, x: &[f64], w: &[f64]) -> Result<DVector<f64>> {
    let xx = inner(sig, x, x)?;
    sig.check_len(w.len())?;
    let eps_q = if (xx - 1.0).abs() <= QUADRIC_TOL {
        1.0
    } else if (xx + 1.0).abs() <= QUADRIC_TOL {
        -1.0
    } else {
        return Err(Error::OffQuadric {
            deviation: (xx.abs() - 1.0).abs(),
        });
    };
    let wx = inner_unchecked(sig.eps(), w, x);
    Ok(DVector::from_iterator(
        w.len(),
        w.iter().zip(x).map(|(wi, xi)| wi - eps_q * wx * xi),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lorentz3() -> Signature {
        Signature::new(vec![-1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn inner_examples() {
        let e2 = Signature::euclidean(2);
        assert_eq!(inner(&e2, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(inner(&lorentz3(), &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), -1.0);
        for r in [0.0f64, 0.7, 1.3] {
            let u = [r.cosh(), r.sinh(), 0.0];
            let v = inner(&lorentz3(), &u, &u).unwrap();
            assert!((v + 1.0).abs() < 1e-12, "r = {r}: {v}");
        }
    }

    #[test]
    fn inner_rejects_mismatched_lengths() {
        let e2 = Signature::euclidean(2);
        assert!(matches!(
            inner(&e2, &[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn signature_requires_leading_negatives() {
        assert!(Signature::new(vec![1.0, -1.0]).is_err());
        assert!(Signature::new(vec![-1.0, 0.5]).is_err());
        assert_eq!(Signature::new(vec![-1.0, -1.0, 1.0]).unwrap().index(), 2);
    }

    #[test]
    fn inner_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sig = Signature::new(vec![-1.0, -1.0, 1.0, 1.0]).unwrap();
        for _ in 0..1000 {
            let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            assert_eq!(inner(&sig, &u, &v).unwrap(), inner(&sig, &v, &u).unwrap());
        }
    }

    #[test]
    fn conformal_matrix_examples() {
        let e2 = Signature::euclidean(2);
        let anti = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(validate_conformal_matrix(&e2, &anti).unwrap().is_valid());

        let diag = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        let check = validate_conformal_matrix(&e2, &diag).unwrap();
        assert_eq!(check.violations.len(), 1);
        assert_eq!((check.violations[0].0, check.violations[0].1), (0, 0));

        let l2 = Signature::new(vec![-1.0, 1.0]).unwrap();
        let boost = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(validate_conformal_matrix(&l2, &boost).unwrap().is_valid());
        assert!(!validate_conformal_matrix(&e2, &boost).unwrap().is_valid());

        assert!(validate_conformal_matrix(&e2, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn conformal_matrix_iff_infinitesimal_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sig = Signature::new(vec![-1.0, 1.0, 1.0]).unwrap();
        for trial in 0..40 {
            // Half of the trials use a generator sum, the rest random matrices.
            let b = if trial % 2 == 0 {
                let mut b = DMatrix::zeros(3, 3);
                for j in 0..3 {
                    for k in (j + 1)..3 {
                        let g = ConformalMatrix::elementary(sig.clone(), j, k, rng.gen_range(-2.0..2.0))
                            .unwrap();
                        b += g.matrix();
                    }
                }
                b
            } else {
                DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-2.0..2.0))
            };
            let valid = validate_conformal_matrix(&sig, &b).unwrap().is_valid();
            let mut isometry = true;
            for _ in 0..100 {
                let u = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                let v = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                let bu = &b * &u;
                let bv = &b * &v;
                let s = inner(&sig, bu.as_slice(), v.as_slice()).unwrap()
                    + inner(&sig, u.as_slice(), bv.as_slice()).unwrap();
                if s.abs() > 1e-12 {
                    isometry = false;
                }
            }
            assert_eq!(valid, isometry, "trial {trial}");
        }
    }

    #[test]
    fn project_tangent_examples() {
        let e3 = Signature::euclidean(3);
        let p = project_tangent(&e3, &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
        let p = project_tangent(&e3, &[0.0, 0.0, 1.0], &[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0, 0.0]);
        let p = project_tangent(&lorentz3(), &[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            project_tangent(&e3, &[0.0, 0.0, 2.0], &[1.0, 0.0, 0.0]),
            Err(Error::OffQuadric { .. })
        ));
    }

    #[test]
    fn project_tangent_is_idempotent_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sig = lorentz3();
        for _ in 0..200 {
            let s: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = [(1.0 + s[0] * s[0] + s[1] * s[1]).sqrt(), s[0], s[1]];
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = project_tangent(&sig, &x, &w).unwrap();
            let pp = project_tangent(&sig, &x, p.as_slice()).unwrap();
            assert!(inner(&sig, p.as_slice(), &x).unwrap().abs() <= 1e-12 * (1.0 + p.norm() * 10.0));
            assert!((&p - &pp).amax() <= 1e-12 * (1.0 + p.amax()));
        }
    }

    #[test]
    fn ambient_curvature_follows_kind() {
        assert_eq!(AmbientSpace::euclidean(3).curvature(), 0.0);
        let sphere = AmbientSpace::quadric(Signature::euclidean(4), 1.0).unwrap();
        assert_eq!(sphere.curvature(), 1.0);
        assert_eq!(sphere.dim(), 3);
        let hyp = AmbientSpace::quadric(Signature::lorentz(4), -1.0).unwrap();
        assert_eq!(hyp.curvature(), -1.0);
        assert!(AmbientSpace::quadric(Signature::euclidean(3), -1.0).is_err());
    }
}
