//! Geometry of an immersed hypersurface computed from the jets of its chart.
//!
//! [`Frame`] is the workhorse: it keeps every first and second order quantity
//! as a jet in the chart parameters so that derivatives of the metric, the
//! Christoffel symbols and the Weingarten operator come out of the same
//! arithmetic rather than from finite differences.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{jet_eval, DomainBox, Jet3, Scalar, SmoothMap};
use crate::linalg::{cofactor_vector, det_inverse, inner_s, values, Mat, OrthoFrame};
use crate::semiriem::AmbientSpace;

/// Smallest admissible `|det g|`.
pub const METRIC_DET_TOL: f64 = 1e-10;

/// Deviation below which [`umbilicity_at`] reports an umbilic point.
pub const UMBILIC_TOL: f64 = 1e-8;

/// How the unit normal is chosen among its two candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Positive Euclidean dot product with the position vector.
    Position,
    /// Positive component along the given container axis.
    Axis(usize),
}

#[derive(Clone)]
pub struct Chart {
    pub name: String,
    pub map: Arc<dyn SmoothMap>,
    pub ambient: AmbientSpace,
    pub orientation: Orientation,
    /// Region used for random sampling, kept away from coordinate singularities.
    pub sample_box: DomainBox,
}

impl std::fmt::Debug for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .field("ambient", &self.ambient)
            .field("orientation", &self.orientation)
            .field("sample_box", &self.sample_box)
            .finish_non_exhaustive()
    }
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        map: Arc<dyn SmoothMap>,
        ambient: AmbientSpace,
        orientation: Orientation,
        sample_box: DomainBox,
    ) -> Result<Self> {
        let n = ambient.dim() - 1;
        if map.input_dim() != n || sample_box.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: map.input_dim(),
            });
        }
        if map.output_dim() != ambient.container_dim() {
            return Err(Error::DimensionMismatch {
                expected: ambient.container_dim(),
                got: map.output_dim(),
            });
        }
        if let Orientation::Axis(k) = orientation {
            if k >= ambient.container_dim() {
                return Err(Error::InvalidParameter(format!("orientation axis {k}")));
            }
        }
        Ok(Self {
            name: name.into(),
            map,
            ambient,
            orientation,
            sample_box,
        })
    }

    /// Hypersurface dimension `n`.
    pub fn dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn domain(&self) -> &DomainBox {
        self.map.domain()
    }

    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>> {
        crate::jets::evaluate(self.map.as_ref(), u)
    }

    /// Uniform samples from the sample box.
    pub fn sample_points<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                self.sample_box
                    .lo
                    .iter()
                    .zip(&self.sample_box.hi)
                    .map(|(a, b)| rng.gen_range(*a..*b))
                    .collect()
            })
            .collect()
    }
}

/// Plain-number snapshot of a [`Frame`].
#[derive(Debug, Clone)]
pub struct FramePoint {
    pub u: Vec<f64>,
    pub x: DVector<f64>,
    pub tangents: Vec<DVector<f64>>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub normal: DVector<f64>,
    pub eps_n: f64,
    /// Mixed operator, entry `(k, i)` is `A^k_i`.
    pub weingarten: DMatrix<f64>,
    pub mean_curvature: f64,
    /// `christoffel[k][(i, j)] = Γ^k_ij`.
    pub christoffel: Vec<DMatrix<f64>>,
    /// `metric_deriv[k][(i, j)] = ∂_k g_ij`.
    pub metric_deriv: Vec<DMatrix<f64>>,
}

/// Frame quantities kept as jets in the chart parameters.
#[derive(Debug, Clone)]
pub struct Frame {
    pub point: FramePoint,
    pub ambient: AmbientSpace,
    /// Position, order 3.
    pub x: Vec<Jet3>,
    /// `e[i]` is the tangent `∂_i x`, order 2.
    pub e: Vec<Vec<Jet3>>,
    pub g: Mat<Jet3>,
    pub g_inv: Mat<Jet3>,
    /// Unit normal, order 2.
    pub normal: Vec<Jet3>,
    /// `weingarten[k][i] = A^k_i`, order 1.
    pub weingarten: Mat<Jet3>,
    /// `christoffel[k][i][j] = Γ^k_ij`, order 1.
    pub christoffel: Vec<Mat<Jet3>>,
    ortho: OrthoFrame,
}

impl Frame {
    pub fn new(chart: &Chart, u: &[f64]) -> Result<Self> {
        let x = jet_eval(chart.map.as_ref(), u)?;
        Self::from_position(chart, u, x)
    }

    fn from_position(chart: &Chart, u: &[f64], x: Vec<Jet3>) -> Result<Self> {
        let ambient = chart.ambient.clone();
        let eps = ambient.signature.eps().to_vec();
        let n = u.len();
        let m = x.len();
        let xv: Vec<f64> = x.iter().map(|j| j.value()).collect();
        ambient.check_point(&xv)?;

        let e: Vec<Vec<Jet3>> = (0..n)
            .map(|i| x.iter().map(|c| c.partial(i)).collect())
            .collect();
        let g: Mat<Jet3> = (0..n)
            .map(|i| (0..n).map(|j| inner_s(&eps, &e[i], &e[j])).collect())
            .collect();
        let (det, inv) = det_inverse(&g);
        if det.value().abs() < METRIC_DET_TOL {
            return Err(Error::DegenerateMetric {
                det: det.value().abs(),
            });
        }
        let g_inv = inv.ok_or(Error::DegenerateMetric {
            det: det.value().abs(),
        })?;

        let mut rows: Vec<Vec<Jet3>> = Vec::with_capacity(m - 1);
        if ambient.is_quadric() {
            rows.push(x.iter().map(|c| c.truncate(2)).collect());
        }
        rows.extend(e.iter().cloned());
        let w = cofactor_vector(&rows);
        let raw: Vec<Jet3> = w.iter().zip(&eps).map(|(wj, ej)| *wj * *ej).collect();
        let nn = inner_s(&eps, &raw, &raw);
        let scale: f64 = w.iter().map(|j| j.value() * j.value()).sum();
        if nn.value().abs() <= 1e-10 * scale || scale == 0.0 {
            return Err(Error::NullNormal {
                norm: nn.value().abs(),
            });
        }
        let eps_n = nn.value().signum();
        let inv_len = Scalar::recip(Scalar::sqrt(nn.abs()));
        let mut normal: Vec<Jet3> = raw.iter().map(|c| *c * inv_len).collect();
        let flip = match chart.orientation {
            Orientation::Position => {
                normal
                    .iter()
                    .zip(&xv)
                    .map(|(a, b)| a.value() * b)
                    .sum::<f64>()
                    <= 0.0
            }
            Orientation::Axis(k) => normal[k].value() <= 0.0,
        };
        if flip {
            normal.iter_mut().for_each(|c| *c = -*c);
        }

        // A^k_i = -g^{kj} <∂_i N, E_j>; projecting ∂_i N onto the quadric does
        // not change these products because every E_j is tangent to it.
        let dn: Vec<Vec<Jet3>> = (0..n)
            .map(|i| normal.iter().map(|c| c.partial(i)).collect())
            .collect();
        let b: Mat<Jet3> = (0..n)
            .map(|i| (0..n).map(|j| inner_s(&eps, &dn[i], &e[j])).collect())
            .collect();
        let weingarten: Mat<Jet3> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let mut acc = Jet3::constant(0.0);
                        for j in 0..n {
                            acc -= g_inv[k][j] * b[i][j];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();

        let dg: Vec<Mat<Jet3>> = (0..n)
            .map(|l| {
                (0..n)
                    .map(|i| (0..n).map(|j| g[i][j].partial(l)).collect())
                    .collect()
            })
            .collect();
        let mut christoffel = vec![vec![vec![Jet3::constant(0.0); n]; n]; n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut acc = Jet3::constant(0.0);
                    for l in 0..n {
                        acc += g_inv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    }
                    let val = acc * 0.5;
                    christoffel[k][i][j] = val;
                    christoffel[k][j][i] = val;
                }
            }
        }

        let metric = values(&g);
        let wv = values(&weingarten);
        let trace: f64 = (0..n).map(|i| wv[(i, i)]).sum();
        let ortho = OrthoFrame::new(&metric)?;
        let point = FramePoint {
            u: u.to_vec(),
            x: DVector::from_vec(xv),
            tangents: e
                .iter()
                .map(|t| DVector::from_iterator(m, t.iter().map(|c| c.value())))
                .collect(),
            metric,
            metric_inv: values(&g_inv),
            normal: DVector::from_iterator(m, normal.iter().map(|c| c.value())),
            eps_n,
            weingarten: wv,
            mean_curvature: eps_n * trace / n as f64,
            christoffel: christoffel.iter().map(values).collect(),
            metric_deriv: dg.iter().map(values).collect(),
        };
        Ok(Self {
            point,
            ambient,
            x,
            e,
            g,
            g_inv,
            normal,
            weingarten,
            christoffel,
            ortho,
        })
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    pub fn eps(&self) -> &[f64] {
        self.ambient.signature.eps()
    }

    pub fn ortho(&self) -> &OrthoFrame {
        &self.ortho
    }

    /// Ambient inner product of two container vectors given as jets.
    pub fn inner<S: Scalar>(&self, u: &[S], v: &[S]) -> S {
        inner_s(self.eps(), u, v)
    }

    /// Jet of the height function `x ↦ inner(x, v)`.
    pub fn height(&self, v: &[f64]) -> Jet3 {
        let vj: Vec<Jet3> = v.iter().map(|c| Jet3::constant(*c)).collect();
        self.inner(&self.x, &vj)
    }

    /// Ricci tensor with lower indices.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.dim();
        let gam = &self.christoffel;
        DMatrix::from_fn(n, n, |j, k| {
            let mut acc = 0.0;
            for l in 0..n {
                acc += gam[l][j][k].d1(l) - gam[l][j][l].d1(k);
                for m in 0..n {
                    acc += gam[l][l][m].value() * gam[m][j][k].value()
                        - gam[l][k][m].value() * gam[m][j][l].value();
                }
            }
            acc
        })
    }

    pub fn scalar_curvature(&self) -> f64 {
        self.point.metric_inv.component_mul(&self.ricci()).sum()
    }

    /// Contravariant components `g^{ij} ∂_j φ`.
    pub fn gradient(&self, phi: &Jet3) -> DVector<f64> {
        let n = self.dim();
        let d = DVector::from_iterator(n, (0..n).map(|j| phi.d1(j)));
        &self.point.metric_inv * d
    }

    /// The gradient as a jet vector field, one order below `phi`.
    pub fn gradient_field(&self, phi: &Jet3) -> Vec<Jet3> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = Jet3::constant(0.0);
                for j in 0..n {
                    acc += self.g_inv[i][j] * phi.partial(j);
                }
                acc
            })
            .collect()
    }

    /// `Hess φ_ij = ∂_i ∂_j φ - Γ^k_ij ∂_k φ`.
    pub fn hessian(&self, phi: &Jet3) -> Result<DMatrix<f64>> {
        phi.require_order(2)?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let mut acc = phi.d2(i, j);
            for k in 0..n {
                acc -= self.christoffel[k][i][j].value() * phi.d1(k);
            }
            acc
        }))
    }

    /// Entry `(k, i)` is `∇_i W^k`.
    pub fn covariant_derivative(&self, w: &[Jet3]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        for c in w {
            c.require_order(1)?;
        }
        Ok(DMatrix::from_fn(n, n, |k, i| {
            let mut acc = w[k].d1(i);
            for l in 0..n {
                acc += self.christoffel[k][i][l].value() * w[l].value();
            }
            acc
        }))
    }

    /// `(L_W g)_ij = g(∇_i W, E_j) + g(∇_j W, E_i)`.
    pub fn lie_derivative(&self, w: &[Jet3]) -> Result<DMatrix<f64>> {
        let nabla = self.covariant_derivative(w)?;
        let lowered = &self.point.metric * nabla;
        Ok(&lowered + lowered.transpose())
    }

    pub fn divergence(&self, w: &[Jet3]) -> Result<f64> {
        Ok(self.covariant_derivative(w)?.trace())
    }

    /// `h_ij = g(A E_i, E_j)`.
    pub fn weingarten_lower(&self) -> DMatrix<f64> {
        &self.point.metric * &self.point.weingarten
    }

    /// `(A²)_ij = g(A² E_i, E_j)`.
    pub fn weingarten_squared_lower(&self) -> DMatrix<f64> {
        let a = &self.point.weingarten;
        &self.point.metric * a * a
    }

    /// `<∂_i ∂_j x, N>`, an independent route to the second fundamental form.
    pub fn second_fundamental_form_direct(&self) -> DMatrix<f64> {
        let n = self.dim();
        let eps = self.eps();
        DMatrix::from_fn(n, n, |i, j| {
            let xij: Vec<f64> = self.x.iter().map(|c| c.d2(i, j)).collect();
            let nv: Vec<f64> = self.normal.iter().map(|c| c.value()).collect();
            crate::semiriem::inner_unchecked(eps, &xij, &nv)
        })
    }

    /// `(∇_i A)^k_j` for a fixed direction index `i`.
    fn weingarten_derivative(&self, i: usize) -> DMatrix<f64> {
        let n = self.dim();
        let a = &self.weingarten;
        let gam = &self.christoffel;
        DMatrix::from_fn(n, n, |k, j| {
            let mut acc = a[k][j].d1(i);
            for l in 0..n {
                acc += gam[k][i][l].value() * a[l][j].value() - gam[l][i][j].value() * a[k][l].value();
            }
            acc
        })
    }

    /// `(∇_V A)` as a mixed operator for contravariant `v`.
    pub fn weingarten_covariant(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            if v[i] != 0.0 {
                out += self.weingarten_derivative(i) * v[i];
            }
        }
        out
    }

    /// Max over basis pairs of `|(∇_i A) E_j - (∇_j A) E_i|` in an orthonormal frame.
    pub fn codazzi_residual(&self) -> f64 {
        let n = self.dim();
        let d: Vec<DMatrix<f64>> = (0..n).map(|i| self.weingarten_derivative(i)).collect();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = d[i].column(j) - d[j].column(i);
                worst = worst.max(self.ortho.vector_norm(&v.into_owned()));
            }
        }
        worst
    }

    /// `|Ric - c(n-1)g - nH h + ε_N (A²)_b|` in an orthonormal frame.
    pub fn gauss_residual(&self) -> f64 {
        let p = &self.point;
        let n = self.dim() as f64;
        let c = self.ambient.curvature();
        let rhs = &p.metric * (c * (n - 1.0)) + self.weingarten_lower() * (n * p.mean_curvature)
            - self.weingarten_squared_lower() * p.eps_n;
        self.ortho.bilinear_norm(&(self.ricci() - rhs))
    }

    /// `|S / (n(n-1)) - c - ε_N H²|`, zero on umbilic hypersurfaces only.
    pub fn scalar_curvature_residual(&self) -> f64 {
        let p = &self.point;
        let n = self.dim() as f64;
        let c = self.ambient.curvature();
        (self.scalar_curvature() / (n * (n - 1.0)) - c - p.eps_n * p.mean_curvature.powi(2)).abs()
    }

    /// `(deviation, is_umbilic)` where the deviation is `|A - ε_N H I|`.
    pub fn umbilicity(&self) -> (f64, bool) {
        let p = &self.point;
        let n = self.dim();
        let target = DMatrix::identity(n, n) * (p.eps_n * p.mean_curvature);
        let dev = self.ortho.operator_norm(&(&p.weingarten - target));
        (dev, dev <= UMBILIC_TOL)
    }

    /// Contravariant components of a container vector's tangential part.
    pub fn tangential_components(&self, v: &[f64]) -> DVector<f64> {
        let n = self.dim();
        let eps = self.eps();
        let b = DVector::from_iterator(
            n,
            self.point
                .tangents
                .iter()
                .map(|t| crate::semiriem::inner_unchecked(eps, v, t.as_slice())),
        );
        &self.point.metric_inv * b
    }
}

/// Umbilicity report of [`umbilicity_at`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Umbilicity {
    pub is_umbilic: bool,
    pub mean_curvature: f64,
    pub deviation: f64,
}

pub fn frame_at(chart: &Chart, u: &[f64]) -> Result<FramePoint> {
    Ok(Frame::new(chart, u)?.point)
}

/// `(Ric, S)` at `u`.
pub fn ricci_at(chart: &Chart, u: &[f64]) -> Result<(DMatrix<f64>, f64)> {
    let f = Frame::new(chart, u)?;
    let ric = f.ricci();
    let s = f.point.metric_inv.component_mul(&ric).sum();
    Ok((ric, s))
}

fn scalar_jet(phi: &dyn SmoothMap, u: &[f64]) -> Result<Jet3> {
    if phi.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: phi.output_dim(),
        });
    }
    Ok(jet_eval(phi, u)?[0])
}

pub fn gradient_at(chart: &Chart, phi: &dyn SmoothMap, u: &[f64]) -> Result<DVector<f64>> {
    let f = Frame::new(chart, u)?;
    Ok(f.gradient(&scalar_jet(phi, u)?))
}

pub fn hessian_scalar_at(chart: &Chart, phi: &dyn SmoothMap, u: &[f64]) -> Result<DMatrix<f64>> {
    let f = Frame::new(chart, u)?;
    f.hessian(&scalar_jet(phi, u)?)
}

/// `L_W g` for a tangent field given by its components in the chart basis.
pub fn lie_metric_at(chart: &Chart, w: &dyn SmoothMap, u: &[f64]) -> Result<DMatrix<f64>> {
    let f = Frame::new(chart, u)?;
    let wj = jet_eval(w, u)?;
    f.lie_derivative(&wj)
}

pub fn covariant_weingarten_at(chart: &Chart, u: &[f64], v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let f = Frame::new(chart, u)?;
    if v.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: v.len(),
        });
    }
    Ok(f.weingarten_covariant(v))
}

pub fn codazzi_residual_at(chart: &Chart, u: &[f64]) -> Result<f64> {
    Ok(Frame::new(chart, u)?.codazzi_residual())
}

pub fn umbilicity_at(chart: &Chart, u: &[f64]) -> Result<Umbilicity> {
    let f = Frame::new(chart, u)?;
    let (deviation, is_umbilic) = f.umbilicity();
    Ok(Umbilicity {
        is_umbilic,
        mean_curvature: f.point.mean_curvature,
        deviation,
    })
}

/// Distance of the chart image from the ambient quadric at `u` (0 for flat ambients).
pub fn quadric_deviation(chart: &Chart, u: &[f64]) -> Result<f64> {
    let x = chart.point(u)?;
    match chart.ambient.quadric_sign() {
        None => Ok(0.0),
        Some(s) => Ok((crate::semiriem::inner(&chart.ambient.signature, &x, &x)? - s).abs()),
    }
}
