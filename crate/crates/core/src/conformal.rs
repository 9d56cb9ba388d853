//! Conformal vector fields of flat containers and their quadrics, and the split
//! of such a field along a hypersurface into tangential part and angle function.
//!
//! The vector `a` is stored with the signature weights already applied, so
//! `inner(a, x)` is the height function it defines.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::hypersurface::{Chart, Frame};
use crate::jets::{Jet3, Scalar};
use crate::linalg::inner_s;
use crate::semiriem::{project_tangent, AmbientSpace, ConformalMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalField {
    pub a: Vec<f64>,
    pub beta: f64,
    pub b: ConformalMatrix,
    pub gamma: Vec<f64>,
    pub ambient: AmbientSpace,
}

impl ConformalField {
    pub fn new(
        ambient: AmbientSpace,
        a: Vec<f64>,
        beta: f64,
        b: DMatrix<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let b = ConformalMatrix::new(ambient.signature.clone(), b)?;
        Self::assemble(ambient, a, beta, b, gamma)
    }

    /// Like [`ConformalField::new`] but accepts any `B`. Only useful to show
    /// that the conformality check catches a bad matrix.
    pub fn with_unchecked_matrix(
        ambient: AmbientSpace,
        a: Vec<f64>,
        beta: f64,
        b: DMatrix<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let m = ambient.container_dim();
        if b.nrows() != m || b.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: b.nrows(),
            });
        }
        let zero = ConformalMatrix::zero(ambient.signature.clone());
        let mut field = Self::assemble(ambient, a, beta, zero, gamma)?;
        field.b = ConformalMatrix::new_unchecked(field.ambient.signature.clone(), b);
        Ok(field)
    }

    fn assemble(
        ambient: AmbientSpace,
        a: Vec<f64>,
        beta: f64,
        b: ConformalMatrix,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let m = ambient.container_dim();
        for v in [&a, &gamma] {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: v.len(),
                });
            }
        }
        if ambient.is_quadric() && (a.iter().any(|c| *c != 0.0) || beta != 0.0) {
            return Err(Error::InvalidParameter(
                "fields on a quadric are generated by gamma and B only".into(),
            ));
        }
        if ![beta].iter().chain(&a).chain(&gamma).all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            a,
            beta,
            b,
            gamma,
            ambient,
        })
    }

    /// The field whose constant part equals `v` (flat: `gamma = 2v`).
    pub fn generated_by(ambient: AmbientSpace, v: &[f64]) -> Result<Self> {
        let m = ambient.container_dim();
        let gamma: Vec<f64> = if ambient.is_quadric() {
            v.to_vec()
        } else {
            v.iter().map(|c| 2.0 * c).collect()
        };
        let b = ConformalMatrix::zero(ambient.signature.clone());
        Self::assemble(ambient, vec![0.0; m], 0.0, b, gamma)
    }

    /// A pure Killing field `x ↦ Bx`.
    pub fn killing(ambient: AmbientSpace, b: DMatrix<f64>) -> Result<Self> {
        let m = ambient.container_dim();
        Self::new(ambient, vec![0.0; m], 0.0, b, vec![0.0; m])
    }

    /// Same field with `B` replaced.
    pub fn with_matrix(&self, b: DMatrix<f64>) -> Result<Self> {
        Self::new(self.ambient.clone(), self.a.clone(), self.beta, b, self.gamma.clone())
    }

    fn eps(&self) -> &[f64] {
        self.ambient.signature.eps()
    }

    pub fn sigma_generic<S: Scalar>(&self, x: &[S]) -> S {
        match self.ambient.quadric_sign() {
            None => inner_s(self.eps(), &self.a.iter().map(|c| S::cst(*c)).collect::<Vec<_>>(), x) + self.beta,
            Some(q) => {
                let g: Vec<S> = self.gamma.iter().map(|c| S::cst(*c)).collect();
                inner_s(self.eps(), &g, x) * -q
            }
        }
    }

    pub fn eval_generic<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let m = x.len();
        let sigma = self.sigma_generic(x);
        let bm = self.b.matrix();
        let half_xx = if self.ambient.is_quadric() {
            None
        } else {
            Some(inner_s(self.eps(), x, x) * 0.5)
        };
        let gamma_scale = if self.ambient.is_quadric() { 1.0 } else { 0.5 };
        (0..m)
            .map(|i| {
                let mut acc = sigma * x[i];
                if let Some(h) = half_xx {
                    if self.a[i] != 0.0 {
                        acc -= h * self.a[i];
                    }
                }
                for j in 0..m {
                    if bm[(i, j)] != 0.0 {
                        acc += x[j] * bm[(i, j)];
                    }
                }
                acc + self.gamma[i] * gamma_scale
            })
            .collect()
    }

    /// Flat derivative of the field's container extension at `x` along `dir`.
    pub fn directional(&self, x: &[f64], dir: &[f64]) -> Vec<f64> {
        let xs: Vec<Jet3> = x
            .iter()
            .zip(dir)
            .map(|(p, d)| Jet3::constant(*p) + Jet3::variable(0.0, 0, 1) * *d)
            .collect();
        self.eval_generic(&xs).iter().map(|c| c.d1(0)).collect()
    }

    /// Derivative of the extension of `σ` at `x` along `dir`.
    pub fn sigma_directional(&self, x: &[f64], dir: &[f64]) -> f64 {
        let xs: Vec<Jet3> = x
            .iter()
            .zip(dir)
            .map(|(p, d)| Jet3::constant(*p) + Jet3::variable(0.0, 0, 1) * *d)
            .collect();
        self.sigma_generic(&xs).d1(0)
    }

    /// Second derivative of the extension of `σ` at `x` along `(u, v)`.
    pub fn sigma_second(&self, x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let s = Jet3::variable(0.0, 0, 2);
        let t = Jet3::variable(0.0, 1, 2);
        let xs: Vec<Jet3> = (0..x.len())
            .map(|i| Jet3::constant(x[i]) + s * u[i] + t * v[i])
            .collect();
        self.sigma_generic(&xs).d2(0, 1)
    }

    /// Covariant derivative of the field on its ambient along `dir`.
    pub fn covariant(&self, x: &[f64], dir: &[f64]) -> Result<Vec<f64>> {
        let d = self.directional(x, dir);
        if self.ambient.is_quadric() {
            Ok(project_tangent(&self.ambient.signature, x, &d)?.as_slice().to_vec())
        } else {
            Ok(d)
        }
    }
}

pub fn sigma_at(field: &ConformalField, x: &[f64]) -> Result<f64> {
    field.ambient.check_point(x)?;
    Ok(field.sigma_generic(x))
}

pub fn eval_field(field: &ConformalField, x: &[f64]) -> Result<DVector<f64>> {
    field.ambient.check_point(x)?;
    Ok(DVector::from_vec(field.eval_generic(x)))
}

/// Probe vectors for the ambient at `x`: uniform in `[-1, 1]^m`, projected
/// onto the quadric tangent space when needed.
pub fn random_probes<R: Rng>(
    ambient: &AmbientSpace,
    x: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let m = ambient.container_dim();
    let draw = |rng: &mut R| -> Result<Vec<f64>> {
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if ambient.is_quadric() {
            Ok(project_tangent(&ambient.signature, x, &w)?.as_slice().to_vec())
        } else {
            Ok(w)
        }
    };
    (0..count).map(|_| Ok((draw(rng)?, draw(rng)?))).collect()
}

/// `max |<D_X V̄, Y> + <D_Y V̄, X> - 2σ<X, Y>|` over the given probe pairs.
pub fn conformality_residual_probes(
    field: &ConformalField,
    x: &[f64],
    probes: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64> {
    field.ambient.check_point(x)?;
    let eps = field.eps();
    let sigma = field.sigma_generic(x);
    let mut worst = 0.0f64;
    for (u, v) in probes {
        let du = field.covariant(x, u)?;
        let dv = field.covariant(x, v)?;
        let r = inner_s(eps, &du, v) + inner_s(eps, &dv, u) - 2.0 * sigma * inner_s(eps, u, v);
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

pub fn conformality_residual<R: Rng>(
    field: &ConformalField,
    x: &[f64],
    probes: usize,
    rng: &mut R,
) -> Result<f64> {
    let pairs = random_probes(&field.ambient, x, probes, rng)?;
    conformality_residual_probes(field, x, &pairs)
}

/// Flat: largest entry of the Hessian of `σ`. Quadric: largest deviation of
/// the intrinsic Hessian from `-cσ<X, Y>` over projected coordinate vectors.
pub fn sigma_hessian_residual(field: &ConformalField, x: &[f64]) -> Result<f64> {
    field.ambient.check_point(x)?;
    let m = x.len();
    let basis: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut worst = 0.0f64;
    match field.ambient.quadric_sign() {
        None => {
            for i in 0..m {
                for j in i..m {
                    worst = worst.max(field.sigma_second(x, &basis[i], &basis[j]).abs());
                }
            }
        }
        Some(q) => {
            let sig = &field.ambient.signature;
            let c = field.ambient.curvature();
            let sigma = field.sigma_generic(x);
            let radial = field.sigma_directional(x, x);
            let tangent: Vec<Vec<f64>> = basis
                .iter()
                .map(|e| Ok(project_tangent(sig, x, e)?.as_slice().to_vec()))
                .collect::<Result<_>>()?;
            for i in 0..m {
                for j in i..m {
                    let (u, v) = (&tangent[i], &tangent[j]);
                    let uv = inner_s(field.eps(), u, v);
                    let hess = field.sigma_second(x, u, v) - q * uv * radial;
                    worst = worst.max((hess + c * sigma * uv).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Jets of the split of a field along a hypersurface.
#[derive(Debug, Clone)]
pub struct SplitField {
    /// `V̄` along the chart, order 3.
    pub vbar: Vec<Jet3>,
    /// Contravariant components of the tangential part, order 2.
    pub v: Vec<Jet3>,
    /// Angle function `<V̄, N>`, order 2.
    pub c: Jet3,
    /// `σ` restricted to the hypersurface, order 3.
    pub sigma: Jet3,
}

/// Values of [`SplitField`] at one point.
#[derive(Debug, Clone)]
pub struct SplitSample {
    pub u: Vec<f64>,
    pub v: DVector<f64>,
    pub c: f64,
    pub sigma: f64,
    /// `max |V̄ - V - ε_N C N|`.
    pub reconstruction: f64,
}

pub fn split_frame(frame: &Frame, field: &ConformalField) -> Result<SplitField> {
    if frame.ambient != field.ambient {
        return Err(Error::AmbientMismatch);
    }
    let n = frame.dim();
    let vbar = field.eval_generic(&frame.x);
    let sigma = field.sigma_generic(&frame.x);
    let c = frame.inner(&vbar, &frame.normal);
    let tangential: Vec<Jet3> = (0..n).map(|j| frame.inner(&vbar, &frame.e[j])).collect();
    let v = (0..n)
        .map(|i| {
            let mut acc = Jet3::constant(0.0);
            for j in 0..n {
                acc += frame.g_inv[i][j] * tangential[j];
            }
            acc
        })
        .collect();
    Ok(SplitField { vbar, v, c, sigma })
}

impl SplitField {
    pub fn sample(&self, frame: &Frame) -> SplitSample {
        let p = &frame.point;
        let v = DVector::from_iterator(self.v.len(), self.v.iter().map(|j| j.value()));
        let mut rebuilt = &p.normal * (p.eps_n * self.c.value());
        for (i, t) in p.tangents.iter().enumerate() {
            rebuilt += t * v[i];
        }
        let reconstruction = self
            .vbar
            .iter()
            .zip(rebuilt.iter())
            .map(|(a, b)| (a.value() - b).abs())
            .fold(0.0, f64::max);
        SplitSample {
            u: p.u.clone(),
            v,
            c: self.c.value(),
            sigma: self.sigma.value(),
            reconstruction,
        }
    }
}

pub fn split_at(chart: &Chart, field: &ConformalField, u: &[f64]) -> Result<SplitSample> {
    let frame = Frame::new(chart, u)?;
    Ok(split_frame(&frame, field)?.sample(&frame))
}
