//! Soliton residuals, the structural identities relating a conformal field to
//! the hypersurface it is split along, the concircular fit and classification.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conformal::{split_frame, ConformalField, SplitField};
use crate::error::{Error, Result};
use crate::hypersurface::{Chart, Frame};
use crate::jets::{jet_eval, DomainBox, Jet3, SmoothMap};
use crate::linalg::OrthoFrame;

/// Values with `|v|` at or below this count as zero in classification.
pub const CLASSIFY_TOL: f64 = 1e-6;

/// Gradient norm under which a scan cell holds a stationary point.
pub const STATIONARY_TOL: f64 = 1e-6;

/// Upper end of the inconclusive band of the stationary scan.
pub const STATIONARY_INCONCLUSIVE: f64 = 1e-3;

/// `|ψ|` above this counts as non-zero for the density proxy.
pub const PSI_NONZERO: f64 = 1e-8;

/// Required fraction of points with non-zero `ψ`.
pub const PSI_DENSITY: f64 = 0.99;

/// `λ = (S + div V) / n` for a tangent field given as jets of order ≥ 1.
pub fn extract_lambda(frame: &Frame, v: &[Jet3]) -> Result<f64> {
    let n = frame.dim() as f64;
    Ok((frame.scalar_curvature() + frame.divergence(v)?) / n)
}

pub fn extract_lambda_at(chart: &Chart, v: &dyn SmoothMap, u: &[f64]) -> Result<f64> {
    let frame = Frame::new(chart, u)?;
    extract_lambda(&frame, &jet_eval(v, u)?)
}

/// `Ric + ½ L_V g - λ g` as a bilinear form.
pub fn soliton_tensor(frame: &Frame, v: &[Jet3], lambda: f64) -> Result<DMatrix<f64>> {
    let lie = frame.lie_derivative(v)?;
    Ok(frame.ricci() + lie * 0.5 - &frame.point.metric * lambda)
}

pub fn soliton_residual(frame: &Frame, v: &[Jet3], lambda: f64) -> Result<f64> {
    Ok(frame.ortho().bilinear_norm(&soliton_tensor(frame, v, lambda)?))
}

pub fn soliton_residual_at(chart: &Chart, v: &dyn SmoothMap, lambda: f64, u: &[f64]) -> Result<f64> {
    let frame = Frame::new(chart, u)?;
    soliton_residual(&frame, &jet_eval(v, u)?, lambda)
}

/// A frame together with the split of one conformal field along it.
#[derive(Debug, Clone)]
pub struct FieldFrame<'a> {
    pub frame: Frame,
    pub split: SplitField,
    pub field: &'a ConformalField,
}

impl<'a> FieldFrame<'a> {
    pub fn new(chart: &Chart, field: &'a ConformalField, u: &[f64]) -> Result<Self> {
        let frame = Frame::new(chart, u)?;
        let split = split_frame(&frame, field)?;
        Ok(Self { frame, split, field })
    }

    fn x(&self) -> &[f64] {
        self.frame.point.x.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.split.sigma.value()
    }

    pub fn c(&self) -> f64 {
        self.split.c.value()
    }

    pub fn v(&self) -> DVector<f64> {
        DVector::from_iterator(self.split.v.len(), self.split.v.iter().map(|j| j.value()))
    }

    pub fn lambda(&self) -> Result<f64> {
        extract_lambda(&self.frame, &self.split.v)
    }

    /// Derivative of `σ` along the unit normal.
    pub fn n_sigma(&self) -> f64 {
        self.field
            .sigma_directional(self.x(), self.frame.point.normal.as_slice())
    }

    pub fn soliton_residual(&self, lambda: f64) -> Result<f64> {
        soliton_residual(&self.frame, &self.split.v, lambda)
    }

    /// `2σ g - L_V g + 2 ε_N C h`.
    pub fn lemma31(&self) -> Result<f64> {
        let p = &self.frame.point;
        let t = &p.metric * (2.0 * self.sigma()) - self.frame.lie_derivative(&self.split.v)?
            + self.frame.weingarten_lower() * (2.0 * p.eps_n * self.c());
        Ok(self.frame.ortho().bilinear_norm(&t))
    }

    /// `Ric + ψ g + ε_N C h` with `ψ = σ - λ`.
    pub fn lemma32(&self, lambda: f64) -> Result<f64> {
        let p = &self.frame.point;
        let psi = self.sigma() - lambda;
        let t = self.frame.ricci()
            + &p.metric * psi
            + self.frame.weingarten_lower() * (p.eps_n * self.c());
        Ok(self.frame.ortho().bilinear_norm(&t))
    }

    /// `(∇̄_N V̄)^T` as contravariant components.
    pub fn normal_derivative_tangential(&self) -> Result<DVector<f64>> {
        let d = self
            .field
            .covariant(self.x(), self.frame.point.normal.as_slice())?;
        Ok(self.frame.tangential_components(&d))
    }

    /// `∇C + (∇̄_N V̄)^T + A V`.
    pub fn lemma33(&self) -> Result<f64> {
        let grad = self.frame.gradient(&self.split.c);
        let r = grad + self.normal_derivative_tangential()? + &self.frame.point.weingarten * self.v();
        Ok(self.frame.ortho().vector_norm(&r))
    }

    pub fn hessian_c(&self) -> Result<DMatrix<f64>> {
        self.frame.hessian(&self.split.c)
    }

    /// Right-hand side of the Hessian identity for the angle function.
    pub fn lemma34_rhs(&self) -> Result<DMatrix<f64>> {
        let p = &self.frame.point;
        let c = self.frame.ambient.curvature();
        let n = self.frame.dim();
        let h = self.frame.weingarten_lower();
        let a2 = self.frame.weingarten_squared_lower();
        let nabla_a = &p.metric * self.frame.weingarten_covariant(&self.v());
        // Entry (k, i) is ∇_i V^k; h * nabla gives h_jl ∇_i V^l at (j, i).
        let hv = &h * self.frame.covariant_derivative(&self.split.v)?;
        let mut rhs = &p.metric * -(c * self.c() + self.n_sigma()) + &h * self.sigma()
            + a2 * (p.eps_n * self.c())
            - nabla_a;
        for i in 0..n {
            for j in 0..n {
                rhs[(i, j)] -= hv[(j, i)] + hv[(i, j)];
            }
        }
        Ok(rhs)
    }

    pub fn lemma34(&self) -> Result<f64> {
        let t = self.hessian_c()? - self.lemma34_rhs()?;
        Ok(self.frame.ortho().bilinear_norm(&t))
    }

    /// `k = c + ε_N H²`.
    pub fn k_expected(&self) -> f64 {
        let p = &self.frame.point;
        self.frame.ambient.curvature() + p.eps_n * p.mean_curvature * p.mean_curvature
    }

    /// `b = -(Nσ + ε_N σ H)`.
    pub fn b_expected(&self) -> f64 {
        let p = &self.frame.point;
        -(self.n_sigma() + p.eps_n * self.sigma() * p.mean_curvature)
    }

    pub fn concircular_sample(&self) -> Result<ConcircularSample> {
        Ok(ConcircularSample {
            c: self.c(),
            hessian: self.hessian_c()?,
            metric: self.frame.point.metric.clone(),
            k_expected: self.k_expected(),
            b_expected: self.b_expected(),
        })
    }
}

/// `2σg - L_V g + 2ε_N C h` residual at `u`.
pub fn lemma31_residual_at(chart: &Chart, field: &ConformalField, u: &[f64]) -> Result<f64> {
    FieldFrame::new(chart, field, u)?.lemma31()
}

pub fn lemma32_residual_at(chart: &Chart, field: &ConformalField, lambda: f64, u: &[f64]) -> Result<f64> {
    FieldFrame::new(chart, field, u)?.lemma32(lambda)
}

pub fn lemma33_residual_at(chart: &Chart, field: &ConformalField, u: &[f64]) -> Result<f64> {
    FieldFrame::new(chart, field, u)?.lemma33()
}

pub fn lemma34_residual_at(chart: &Chart, field: &ConformalField, u: &[f64]) -> Result<f64> {
    FieldFrame::new(chart, field, u)?.lemma34()
}

/// Per-point values of a field on a hypersurface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolitonSample {
    pub u: Vec<f64>,
    pub lambda: f64,
    pub psi: f64,
    pub c: f64,
    pub sigma: f64,
    pub residuals: BTreeMap<String, f64>,
}

/// λ, ψ, C and every identity residual at `u`.
pub fn soliton_sample(chart: &Chart, field: &ConformalField, u: &[f64]) -> Result<SolitonSample> {
    let ff = FieldFrame::new(chart, field, u)?;
    let lambda = ff.lambda()?;
    let sigma = ff.sigma();
    let mut residuals = BTreeMap::new();
    residuals.insert("soliton".to_string(), ff.soliton_residual(lambda)?);
    residuals.insert("lemma31".to_string(), ff.lemma31()?);
    residuals.insert("lemma32".to_string(), ff.lemma32(lambda)?);
    residuals.insert("lemma33".to_string(), ff.lemma33()?);
    residuals.insert("lemma34".to_string(), ff.lemma34()?);
    Ok(SolitonSample {
        u: u.to_vec(),
        lambda,
        psi: sigma - lambda,
        c: ff.c(),
        sigma,
        residuals,
    })
}

/// Inputs of the concircular fit at one point.
#[derive(Debug, Clone)]
pub struct ConcircularSample {
    pub c: f64,
    pub hessian: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub k_expected: f64,
    pub b_expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcircularFit {
    pub k: f64,
    pub b: f64,
    pub fit_residual: f64,
    /// Mean of the per-sample expectations.
    pub k_expected: f64,
    pub b_expected: f64,
    pub k_spread: f64,
    pub b_spread: f64,
}

fn spread(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let lo = v.clone().fold(f64::INFINITY, f64::min);
    let hi = v.fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Least-squares `(k, b)` with `Hess C ≈ (b - kC) g`, measured in orthonormal
/// frames so that every sample weighs the same.
pub fn concircular_fit(samples: &[ConcircularSample]) -> Result<ConcircularFit> {
    if samples.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "concircular fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let c_spread = spread(samples.iter().map(|s| s.c));
    let c_scale = samples.iter().map(|s| s.c.abs()).fold(0.0, f64::max);
    if c_spread <= 1e-9 * (1.0 + c_scale) {
        return Err(Error::DegenerateFit { spread: c_spread });
    }
    // Rows: eta_i C k - eta_i b = -Ĥ_ii.
    let mut ata = nalgebra::Matrix2::<f64>::zeros();
    let mut atb = nalgebra::Vector2::<f64>::zeros();
    let mut frames = Vec::with_capacity(samples.len());
    for s in samples {
        let frame = OrthoFrame::new(&s.metric)?;
        let hh = frame.bilinear(&s.hessian);
        let eta = frame.bilinear(&s.metric);
        for i in 0..hh.nrows() {
            let e = eta[(i, i)].signum();
            let row = nalgebra::Vector2::new(e * s.c, -e);
            ata += row * row.transpose();
            atb += row * -hh[(i, i)];
        }
        frames.push((frame, hh, eta));
    }
    let sol = ata
        .try_inverse()
        .map(|inv| inv * atb)
        .ok_or(Error::DegenerateFit { spread: c_spread })?;
    let (k, b) = (sol[0], sol[1]);
    let fit_residual = samples
        .iter()
        .zip(&frames)
        .map(|(s, (_, hh, eta))| (hh + eta * (k * s.c - b)).amax())
        .fold(0.0, f64::max);
    let m = samples.len() as f64;
    Ok(ConcircularFit {
        k,
        b,
        fit_residual,
        k_expected: samples.iter().map(|s| s.k_expected).sum::<f64>() / m,
        b_expected: samples.iter().map(|s| s.b_expected).sum::<f64>() / m,
        k_spread: spread(samples.iter().map(|s| s.k_expected)),
        b_spread: spread(samples.iter().map(|s| s.b_expected)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuFit {
    pub mu: f64,
    pub residual: f64,
    /// `-ε_N ψ / (μ + ε_N C)`, absent where the denominator vanishes.
    pub h_predicted: Option<f64>,
}

/// Projection of `Ric` onto the second fundamental form. `psi_c` supplies
/// `(ψ, C)` for the predicted mean curvature.
pub fn mu_fit(frame: &Frame, psi_c: Option<(f64, f64)>) -> Result<MuFit> {
    let o = frame.ortho();
    let h = o.bilinear(&frame.weingarten_lower());
    if h.amax() <= 1e-12 {
        return Err(Error::UndefinedMu);
    }
    let ric = o.bilinear(&frame.ricci());
    let mu = ric.dot(&h) / h.dot(&h);
    let residual = (ric - &h * mu).amax();
    let eps_n = frame.point.eps_n;
    let h_predicted = psi_c.and_then(|(psi, c)| {
        let den = mu + eps_n * c;
        (den.abs() > 1e-10).then(|| -eps_n * psi / den)
    });
    Ok(MuFit {
        mu,
        residual,
        h_predicted,
    })
}

pub fn mu_fit_at(chart: &Chart, field: Option<&ConformalField>, u: &[f64]) -> Result<MuFit> {
    match field {
        None => mu_fit(&Frame::new(chart, u)?, None),
        Some(f) => {
            let ff = FieldFrame::new(chart, f, u)?;
            let lambda = ff.lambda()?;
            mu_fit(&ff.frame, Some((ff.sigma() - lambda, ff.c())))
        }
    }
}

/// Fraction of `psis` with `|ψ| > PSI_NONZERO`.
pub fn psi_density(psis: &[f64]) -> f64 {
    if psis.is_empty() {
        return 0.0;
    }
    psis.iter().filter(|p| p.abs() > PSI_NONZERO).count() as f64 / psis.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TashiroCase {
    ProductLine,
    Euclidean,
    PseudoHyperbolicZero,
    PseudoHyperbolicNegative,
    /// Pseudo-hyperbolic without a profile telling zero from negative type.
    PseudoHyperbolicUnresolved,
    Hyperbolic,
    Spherical,
}

impl TashiroCase {
    pub fn label(&self) -> &'static str {
        match self {
            TashiroCase::ProductLine => "IA",
            TashiroCase::Euclidean => "IB",
            TashiroCase::PseudoHyperbolicZero => "IIA0",
            TashiroCase::PseudoHyperbolicNegative => "IIA-",
            TashiroCase::PseudoHyperbolicUnresolved => "IIA",
            TashiroCase::Hyperbolic => "IIB",
            TashiroCase::Spherical => "III",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "case")]
pub enum Verdict {
    Case(TashiroCase),
    /// `k < 0` but the stationary scan was inconclusive.
    Indeterminate,
    /// The hypersurface is not umbilic, so the classification does not apply.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryEvidence {
    None,
    Isolated,
    Unknown,
}

/// Which warping function a pseudo-hyperbolic geometry is known to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpProfile {
    Exp,
    Cosh,
    Unknown,
}

pub fn tashiro_classify(k: f64, b: f64, evidence: StationaryEvidence, profile: WarpProfile) -> Result<Verdict> {
    if !k.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite);
    }
    let zero = |v: f64| v.abs() <= CLASSIFY_TOL;
    let case = if zero(k) {
        if zero(b) {
            TashiroCase::ProductLine
        } else {
            TashiroCase::Euclidean
        }
    } else if k > 0.0 {
        TashiroCase::Spherical
    } else {
        match evidence {
            StationaryEvidence::Unknown => return Ok(Verdict::Indeterminate),
            StationaryEvidence::Isolated => TashiroCase::Hyperbolic,
            StationaryEvidence::None => match profile {
                WarpProfile::Exp => TashiroCase::PseudoHyperbolicZero,
                WarpProfile::Cosh => TashiroCase::PseudoHyperbolicNegative,
                WarpProfile::Unknown => TashiroCase::PseudoHyperbolicUnresolved,
            },
        }
    };
    Ok(Verdict::Case(case))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeCase {
    IA,
    IB,
    IIA0,
    IIAminus,
    IIB,
    III,
}

impl OdeCase {
    pub const ALL: [OdeCase; 6] = [
        OdeCase::IA,
        OdeCase::IB,
        OdeCase::IIA0,
        OdeCase::IIAminus,
        OdeCase::IIB,
        OdeCase::III,
    ];

    /// The constant `k` of `ρ'' + kρ = b` solved by this row.
    pub fn k(&self, c: f64) -> f64 {
        match self {
            OdeCase::IA | OdeCase::IB => 0.0,
            OdeCase::IIA0 | OdeCase::IIAminus | OdeCase::IIB => -c * c,
            OdeCase::III => c * c,
        }
    }
}

/// Closed-form solution `ρ(s)` of the concircular ODE for the given row.
pub fn concircular_solution(case: OdeCase, a: f64, b: f64, c: f64, s: f64) -> Result<f64> {
    let needs_c = !matches!(case, OdeCase::IA | OdeCase::IB);
    if needs_c && c <= 0.0 {
        return Err(Error::NoClosedForm(format!("{case:?} needs c > 0, got {c}")));
    }
    match case {
        OdeCase::IA if b != 0.0 => Err(Error::NoClosedForm("IA solves the ODE only with b = 0".into())),
        OdeCase::IB if b == 0.0 => Err(Error::NoClosedForm("IB needs b != 0".into())),
        OdeCase::IA => Ok(a * s),
        OdeCase::IB => Ok(0.5 * b * s * s + a),
        OdeCase::IIA0 => Ok(a * (c * s).exp() - b / (c * c)),
        OdeCase::IIAminus => Ok(a * (c * s).sinh() - b / (c * c)),
        OdeCase::IIB => Ok(a * (c * s).cosh() - b / (c * c)),
        OdeCase::III => Ok(a * (c * s).cos() + b / (c * c)),
    }
}

/// `|ρ'' + kρ - b|` with `ρ''` from a Richardson-extrapolated central difference.
pub fn ode_residual(case: OdeCase, a: f64, b: f64, c: f64, s: f64) -> Result<f64> {
    let rho = |t: f64| concircular_solution(case, a, b, c, t);
    let second = |h: f64| -> Result<f64> { Ok((rho(s + h)? - 2.0 * rho(s)? + rho(s - h)?) / (h * h)) };
    let h = 0.01;
    let d2 = (4.0 * second(0.5 * h)? - second(h)?) / 3.0;
    Ok((d2 + case.k(c) * rho(s)? - b).abs())
}

/// Outcome of [`stationary_scan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryScan {
    pub evidence: StationaryEvidence,
    /// Distinct stationary points found, one per connected group of cells.
    pub points: Vec<Vec<f64>>,
    pub min_gradient_norm: f64,
}

/// Grid search for critical points of a function on the chart.
///
/// `c_at` returns the function as a jet of order ≥ 2 at a frame. Newton's
/// method on `∂C = 0` starts from every cell center; a cell qualifies when it
/// converges inside the cell with `|∇C|_g < STATIONARY_TOL`.
pub fn stationary_scan<F>(chart: &Chart, c_at: F, cells_per_axis: usize, region: &DomainBox) -> Result<StationaryScan>
where
    F: Fn(&Frame) -> Result<Jet3>,
{
    let n = chart.dim();
    let cells = cells_per_axis.max(1);
    let widths: Vec<f64> = (0..n).map(|i| (region.hi[i] - region.lo[i]) / cells as f64).collect();
    let total = cells.pow(n as u32);
    let mut min_norm = f64::INFINITY;
    let mut found: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for flat in 0..total {
        let mut idx = Vec::with_capacity(n);
        let mut r = flat;
        for _ in 0..n {
            idx.push(r % cells);
            r /= cells;
        }
        let lo: Vec<f64> = (0..n).map(|i| region.lo[i] + widths[i] * idx[i] as f64).collect();
        let hi: Vec<f64> = (0..n).map(|i| lo[i] + widths[i]).collect();
        let mut u: Vec<f64> = (0..n).map(|i| 0.5 * (lo[i] + hi[i])).collect();
        let mut converged = false;
        for _ in 0..30 {
            if !chart.domain().contains(&u) {
                break;
            }
            let frame = match Frame::new(chart, &u) {
                Ok(f) => f,
                Err(_) => break,
            };
            let c = c_at(&frame)?;
            c.require_order(2)?;
            let grad = frame.gradient(&c);
            let d1 = DVector::from_iterator(n, (0..n).map(|i| c.d1(i)));
            let norm = grad.dot(&d1).abs().sqrt();
            if region.contains(&u) {
                min_norm = min_norm.min(norm);
            }
            if norm < STATIONARY_TOL {
                converged = true;
                break;
            }
            let hess = DMatrix::from_fn(n, n, |i, j| c.d2(i, j));
            let Some(step) = hess.lu().solve(&d1) else {
                break;
            };
            for i in 0..n {
                u[i] -= step[i];
            }
        }
        // Slack so a point on a shared cell face is not lost to rounding.
        let inside = (0..n).all(|i| {
            let slack = 1e-6 * widths[i];
            lo[i] - slack <= u[i] && u[i] <= hi[i] + slack
        });
        if converged && inside {
            found.push((idx, u));
        }
    }

    // Group qualifying cells by Chebyshev adjacency.
    let mut group = vec![usize::MAX; found.len()];
    let mut groups = 0;
    for s in 0..found.len() {
        if group[s] != usize::MAX {
            continue;
        }
        group[s] = groups;
        let mut stack = vec![s];
        while let Some(a) = stack.pop() {
            for b in 0..found.len() {
                if group[b] == usize::MAX
                    && found[a]
                        .0
                        .iter()
                        .zip(&found[b].0)
                        .all(|(p, q)| p.abs_diff(*q) <= 1)
                {
                    group[b] = groups;
                    stack.push(b);
                }
            }
        }
        groups += 1;
    }
    let scale = widths.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut points = Vec::new();
    for gi in 0..groups {
        let members: Vec<&Vec<f64>> = found
            .iter()
            .zip(&group)
            .filter(|(_, g)| **g == gi)
            .map(|(f, _)| &f.1)
            .collect();
        let first = members[0];
        let coincide = members.iter().all(|p| {
            p.iter()
                .zip(first)
                .all(|(a, b)| (a - b).abs() <= 1e-6 * scale.max(1e-3))
        });
        if coincide {
            points.push(first.clone());
        }
    }
    let evidence = if !points.is_empty() {
        StationaryEvidence::Isolated
    } else if found.is_empty() && min_norm >= STATIONARY_TOL && min_norm <= STATIONARY_INCONCLUSIVE {
        StationaryEvidence::Unknown
    } else {
        StationaryEvidence::None
    };
    Ok(StationaryScan {
        evidence,
        points,
        min_gradient_norm: min_norm,
    })
}
