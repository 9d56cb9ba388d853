//! Built-in geometries with their declared constants.
//!
//! Every entry fixes a chart, an orientation and a canonical field. The
//! declared values (`eps_n`, `H`, `k`, classification) are what the verifiers
//! are expected to reproduce.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conformal::ConformalField;
use crate::error::{Error, Result};
use crate::hypersurface::{Chart, Frame, Orientation};
use crate::jets::{jet_eval, DomainBox, Jet3, ParamMap, Scalar, SmoothMap, MAX_VARS};
use crate::semiriem::{inner, AmbientSpace, Signature};
use crate::soliton::{TashiroCase, Verdict, WarpProfile};

/// Entry names in their stable order.
pub const ENTRY_NAMES: [&str; 7] = [
    "flat_plane",
    "sphere",
    "hyperbolic",
    "pseudo_hyperbolic_zero",
    "pseudo_hyperbolic_negative",
    "latitude_sphere",
    "saddle_graph",
];

/// Polar radius of the latitude sphere inside the unit sphere.
pub const LATITUDE_RADIUS: f64 = 1.0;

/// Keeps polar charts away from their coordinate singularities.
pub const POLAR_MARGIN: f64 = 0.05;

/// Closed form of the soliton function for an entry's field family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolitonFormula {
    /// `λ = σ` on the hypersurface.
    RestrictedSigma,
    /// `λ = ε_N (n - 1 - h_γ)`.
    SpaceForm,
    /// `λ = -(n - 1) + h_γ`.
    WarpedHyperbolic,
    /// `λ = (n - 1 - (h_γ - cos r0 γ_last)) / sin² r0`, valid for `B = 0`.
    LatitudeSphere { r0: f64 },
    None,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub n: usize,
    pub chart: Chart,
    pub eps_n: f64,
    pub mean_curvature: f64,
    pub c_ambient: f64,
    /// `None` where the hypersurface is not umbilic.
    pub k_expected: Option<f64>,
    pub umbilic: bool,
    pub classification: Verdict,
    pub profile: WarpProfile,
    pub soliton_formula: SolitonFormula,
    pub canonical_field: ConformalField,
}

/// Declared constants of an entry, as listed by [`list_catalog`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryInfo {
    pub name: &'static str,
    pub eps_n: f64,
    pub mean_curvature: f64,
    pub c_ambient: f64,
    pub k_expected: Option<f64>,
    pub umbilic: bool,
    pub classification: Verdict,
}

impl CatalogEntry {
    pub fn info(&self) -> EntryInfo {
        EntryInfo {
            name: self.name,
            eps_n: self.eps_n,
            mean_curvature: self.mean_curvature,
            c_ambient: self.c_ambient,
            k_expected: self.k_expected,
            umbilic: self.umbilic,
            classification: self.classification,
        }
    }
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[i] = 1.0;
    v
}

/// `(sin θ1 · S^{k-1}(rest), cos θ1)`, ending in `(cos φ, sin φ)`.
fn sphere_point<S: Scalar>(angles: &[S]) -> Vec<S> {
    if angles.len() == 1 {
        return vec![angles[0].cos(), angles[0].sin()];
    }
    let s = angles[0].sin();
    let mut out: Vec<S> = sphere_point(&angles[1..]).into_iter().map(|c| c * s).collect();
    out.push(angles[0].cos());
    out
}

/// Unit hyperboloid point built by repeated `y ↦ (cosh v · y, sinh v)`.
fn hyperboloid_point<S: Scalar>(v: &[S]) -> Vec<S> {
    let mut y = vec![S::cst(1.0)];
    for &vk in v {
        let ch = vk.cosh();
        y = y.into_iter().map(|c| c * ch).collect();
        y.push(vk.sinh());
    }
    y
}

fn polar_box(n: usize, margin: f64) -> DomainBox {
    let mut lo = vec![margin; n];
    let mut hi = vec![PI - margin; n];
    lo[n - 1] = if margin == 0.0 { -2.0 * PI } else { -PI };
    hi[n - 1] = if margin == 0.0 { 2.0 * PI } else { PI };
    DomainBox::new(lo, hi)
}

macro_rules! param_map {
    ($name:ident, $extra:expr, |$u:ident| $body:expr) => {
        #[derive(Debug, Clone)]
        pub struct $name {
            pub n: usize,
            pub domain: DomainBox,
        }

        impl ParamMap for $name {
            fn input_dim(&self) -> usize {
                self.n
            }
            fn output_dim(&self) -> usize {
                self.n + $extra
            }
            fn domain(&self) -> &DomainBox {
                &self.domain
            }
            fn map<S: Scalar>(&self, $u: &[S]) -> Vec<S> {
                $body
            }
        }
    };
}

param_map!(FlatPlaneMap, 1, |u| {
    let mut x = u.to_vec();
    x.push(S::cst(0.0));
    x
});

param_map!(PolarSphereMap, 1, |u| {
    sphere_point(u)
});

param_map!(HyperboloidGraphMap, 1, |u| {
    let mut r2 = S::cst(1.0);
    for c in u {
        r2 += *c * *c;
    }
    let mut x = vec![r2.sqrt()];
    x.extend_from_slice(u);
    x
});

param_map!(HorosphericalMap, 1, |u| {
    let et = u[0].exp();
    let emt = (-u[0]).exp();
    let mut z2 = S::cst(0.0);
    for c in &u[1..] {
        z2 += *c * *c;
    }
    let mut x = vec![(et + emt + et * z2) * 0.5];
    for c in &u[1..] {
        x.push(et * *c);
    }
    x.push((et - emt - et * z2) * 0.5);
    x
});

param_map!(WarpedCoshMap, 1, |u| {
    let ch = u[0].cosh();
    let mut x: Vec<S> = hyperboloid_point(&u[1..]).into_iter().map(|c| c * ch).collect();
    x.push(u[0].sinh());
    x
});

param_map!(LatitudeMap, 2, |u| {
    let (sr, cr) = (LATITUDE_RADIUS.sin(), LATITUDE_RADIUS.cos());
    let mut x: Vec<S> = sphere_point(u).into_iter().map(|c| c * sr).collect();
    x.push(S::cst(cr));
    x
});

param_map!(SaddleMap, 1, |u| {
    let mut x = u.to_vec();
    x.push(u[0] * u[0] - u[1] * u[1]);
    x
});

/// The catalog entry `name` in dimension `n` (2 ≤ n ≤ 4).
pub fn get_entry(name: &str, n: usize) -> Result<CatalogEntry> {
    if !ENTRY_NAMES.contains(&name) {
        return Err(Error::UnknownEntry(name.to_string()));
    }
    if !(2..=MAX_VARS).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "dimension {n} outside the supported range 2..={MAX_VARS}"
        )));
    }
    let m = n + 1;
    let euclid = AmbientSpace::euclidean(m);
    let lorentz = AmbientSpace::lorentz(m);
    let spherical = Verdict::Case(TashiroCase::Spherical);
    let entry = |chart: Chart,
                 eps_n: f64,
                 h: f64,
                 k: Option<f64>,
                 classification: Verdict,
                 profile: WarpProfile,
                 soliton_formula: SolitonFormula,
                 canonical_field: ConformalField| {
        let c_ambient = chart.ambient.curvature();
        CatalogEntry {
            name: ENTRY_NAMES.iter().find(|e| **e == name).copied().unwrap_or("unknown"),
            n,
            chart,
            eps_n,
            mean_curvature: h,
            c_ambient,
            umbilic: k.is_some(),
            k_expected: k,
            classification,
            profile,
            soliton_formula,
            canonical_field,
        }
    };
    let e = match name {
        "flat_plane" => {
            let chart = Chart::new(
                name,
                Arc::new(FlatPlaneMap {
                    n,
                    domain: DomainBox::cube(n, -2.0, 2.0),
                }),
                euclid.clone(),
                Orientation::Axis(n),
                DomainBox::cube(n, -1.5, 1.5),
            )?;
            let mut a = vec![0.0; m];
            a[0] = 0.5;
            a[n] = 1.0;
            let field = ConformalField::new(euclid, a, 1.0, DMatrix::zeros(m, m), vec![0.0; m])?;
            entry(
                chart,
                1.0,
                0.0,
                Some(0.0),
                Verdict::Case(TashiroCase::Euclidean),
                WarpProfile::Unknown,
                SolitonFormula::RestrictedSigma,
                field,
            )
        }
        "sphere" => {
            let chart = Chart::new(
                name,
                Arc::new(PolarSphereMap {
                    n,
                    domain: polar_box(n, 0.0),
                }),
                euclid.clone(),
                Orientation::Position,
                polar_box(n, POLAR_MARGIN),
            )?;
            let field = ConformalField::generated_by(euclid, &unit(m, n))?;
            entry(
                chart,
                1.0,
                -1.0,
                Some(1.0),
                spherical,
                WarpProfile::Unknown,
                SolitonFormula::SpaceForm,
                field,
            )
        }
        "hyperbolic" => {
            let chart = Chart::new(
                name,
                Arc::new(HyperboloidGraphMap {
                    n,
                    domain: DomainBox::cube(n, -20.0, 20.0),
                }),
                lorentz.clone(),
                Orientation::Position,
                DomainBox::cube(n, -1.5, 1.5),
            )?;
            let field = ConformalField::generated_by(lorentz, &unit(m, 0))?;
            entry(
                chart,
                -1.0,
                1.0,
                Some(-1.0),
                Verdict::Case(TashiroCase::Hyperbolic),
                WarpProfile::Unknown,
                SolitonFormula::SpaceForm,
                field,
            )
        }
        "pseudo_hyperbolic_zero" => {
            let chart = Chart::new(
                name,
                Arc::new(HorosphericalMap {
                    n,
                    domain: DomainBox::cube(n, -3.0, 3.0),
                }),
                lorentz.clone(),
                Orientation::Position,
                DomainBox::cube(n, -1.5, 1.5),
            )?;
            // Null generator with <γ, x> = x_0 + x_n = e^t.
            let mut gamma = vec![0.0; m];
            gamma[0] = -1.0;
            gamma[n] = 1.0;
            let field = ConformalField::generated_by(lorentz, &gamma)?;
            entry(
                chart,
                -1.0,
                1.0,
                Some(-1.0),
                Verdict::Case(TashiroCase::PseudoHyperbolicZero),
                WarpProfile::Exp,
                SolitonFormula::WarpedHyperbolic,
                field,
            )
        }
        "pseudo_hyperbolic_negative" => {
            let chart = Chart::new(
                name,
                Arc::new(WarpedCoshMap {
                    n,
                    domain: DomainBox::cube(n, -3.0, 3.0),
                }),
                lorentz.clone(),
                Orientation::Position,
                DomainBox::cube(n, -1.5, 1.5),
            )?;
            let field = ConformalField::generated_by(lorentz, &unit(m, n))?;
            entry(
                chart,
                -1.0,
                1.0,
                Some(-1.0),
                Verdict::Case(TashiroCase::PseudoHyperbolicNegative),
                WarpProfile::Cosh,
                SolitonFormula::WarpedHyperbolic,
                field,
            )
        }
        "latitude_sphere" => {
            let ambient = AmbientSpace::quadric(Signature::euclidean(n + 2), 1.0)?;
            let chart = Chart::new(
                name,
                Arc::new(LatitudeMap {
                    n,
                    domain: polar_box(n, 0.0),
                }),
                ambient.clone(),
                Orientation::Axis(n + 1),
                polar_box(n, POLAR_MARGIN),
            )?;
            let mut gamma = vec![0.0; n + 2];
            gamma[0] = 1.0;
            gamma[n + 1] = 1.0;
            let field = ConformalField::generated_by(ambient, &gamma)?;
            let cot = 1.0 / LATITUDE_RADIUS.tan();
            entry(
                chart,
                1.0,
                cot,
                Some(1.0 / LATITUDE_RADIUS.sin().powi(2)),
                spherical,
                WarpProfile::Unknown,
                SolitonFormula::LatitudeSphere { r0: LATITUDE_RADIUS },
                field,
            )
        }
        _ => {
            let chart = Chart::new(
                name,
                Arc::new(SaddleMap {
                    n,
                    domain: DomainBox::cube(n, -2.0, 2.0),
                }),
                euclid.clone(),
                Orientation::Axis(n),
                DomainBox::cube(n, -1.0, 1.0),
            )?;
            let field = ConformalField::generated_by(euclid, &unit(m, n))?;
            // Mean curvature varies over the chart; the declared value is at the origin.
            entry(
                chart,
                1.0,
                0.0,
                None,
                Verdict::NotApplicable,
                WarpProfile::Unknown,
                SolitonFormula::None,
                field,
            )
        }
    };
    Ok(e)
}

/// Declared constants of every entry, in stable order.
pub fn list_catalog() -> Vec<EntryInfo> {
    ENTRY_NAMES
        .iter()
        .map(|name| get_entry(name, 2).expect("catalog entries build in dimension 2").info())
        .collect()
}

/// Closed-form soliton function for a field whose constant part is `gamma`.
pub fn expected_lambda(entry: &CatalogEntry, gamma: &[f64], u: &[f64]) -> Result<f64> {
    let x = entry.chart.point(u)?;
    let h = inner(&entry.chart.ambient.signature, &x, gamma)?;
    let n = entry.n as f64;
    match entry.soliton_formula {
        SolitonFormula::SpaceForm => Ok(entry.eps_n * (n - 1.0 - h)),
        SolitonFormula::WarpedHyperbolic => Ok(-(n - 1.0) + h),
        SolitonFormula::LatitudeSphere { r0 } => {
            let last = gamma[gamma.len() - 1];
            Ok((n - 1.0 - (h - r0.cos() * last)) / r0.sin().powi(2))
        }
        SolitonFormula::RestrictedSigma => Err(Error::NoClosedForm(format!(
            "{} carries lambda = sigma on the hypersurface",
            entry.name
        ))),
        SolitonFormula::None => Err(Error::NoClosedForm(format!("{} has no soliton formula", entry.name))),
    }
}

/// Expected `λ` for an arbitrary field on `entry`, when a closed form covers it.
pub fn expected_lambda_for_field(entry: &CatalogEntry, field: &ConformalField, u: &[f64]) -> Result<Option<f64>> {
    let pure_gamma = field.a.iter().all(|c| *c == 0.0) && field.beta == 0.0;
    match entry.soliton_formula {
        SolitonFormula::RestrictedSigma => {
            let x = entry.chart.point(u)?;
            Ok(Some(crate::conformal::sigma_at(field, &x)?))
        }
        SolitonFormula::None => Ok(None),
        SolitonFormula::LatitudeSphere { .. } if !field.b.is_zero() => Ok(None),
        _ if !pure_gamma => Ok(None),
        _ => {
            let scale = if field.ambient.is_quadric() { 1.0 } else { 0.5 };
            let gamma: Vec<f64> = field.gamma.iter().map(|c| c * scale).collect();
            expected_lambda(entry, &gamma, u).map(Some)
        }
    }
}

/// `u ↦ u` on a given box.
#[derive(Debug, Clone)]
pub struct IdentityMap {
    pub domain: DomainBox,
}

impl ParamMap for IdentityMap {
    fn input_dim(&self) -> usize {
        self.domain.dim()
    }
    fn output_dim(&self) -> usize {
        self.domain.dim()
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }
    fn map<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        u.to_vec()
    }
}

/// Drops the timelike coordinate of a chart into the upper hyperboloid,
/// giving parameters of the `hyperbolic` graph chart.
pub struct ToHyperboloidGraph {
    pub source: Arc<dyn SmoothMap>,
}

impl SmoothMap for ToHyperboloidGraph {
    fn input_dim(&self) -> usize {
        self.source.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.source.output_dim() - 1
    }
    fn domain(&self) -> &DomainBox {
        self.source.domain()
    }
    fn eval_f64(&self, u: &[f64]) -> Vec<f64> {
        self.source.eval_f64(u)[1..].to_vec()
    }
    fn eval_jet(&self, u: &[Jet3]) -> Vec<Jet3> {
        self.source.eval_jet(u)[1..].to_vec()
    }
}

/// Max entry of `map^*(g_B) - g_A` at `u`.
pub fn isometry_residual(chart_a: &Chart, chart_b: &Chart, map: &dyn SmoothMap, u: &[f64]) -> Result<f64> {
    let ga = Frame::new(chart_a, u)?.point.metric;
    let phi = jet_eval(map, u)?;
    let v: Vec<f64> = phi.iter().map(|j| j.value()).collect();
    if !chart_b.domain().contains(&v) {
        return Err(Error::OutsideDomain { point: v });
    }
    let gb = Frame::new(chart_b, &v)?.point.metric;
    let n = u.len();
    let jac = DMatrix::from_fn(phi.len(), n, |r, c| phi[r].d1(c));
    let pulled = jac.transpose() * gb * jac;
    Ok((pulled - ga).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurface::{frame_at, umbilicity_at};

    #[test]
    fn sphere_entry_constants() {
        let e = get_entry("sphere", 2).unwrap();
        assert_eq!(e.mean_curvature, -1.0);
        assert_eq!(e.eps_n, 1.0);
        assert_eq!(e.k_expected, Some(1.0));
        assert_eq!(e.classification, Verdict::Case(TashiroCase::Spherical));
    }

    #[test]
    fn warped_metrics() {
        let e = get_entry("pseudo_hyperbolic_zero", 2).unwrap();
        let g = frame_at(&e.chart, &[0.4, 0.2]).unwrap().metric;
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.8f64.exp()]);
        assert!((g - want).amax() <= 1e-9);

        let e = get_entry("pseudo_hyperbolic_negative", 2).unwrap();
        for (t, v) in [(0.3, -0.7), (-1.1, 0.4)] {
            let g = frame_at(&e.chart, &[t, v]).unwrap().metric;
            let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, f64::cosh(t).powi(2)]);
            assert!((g - want).amax() <= 1e-12);
        }
    }

    #[test]
    fn sphere_chart_matches_polar_formula() {
        let e = get_entry("sphere", 2).unwrap();
        let (t, p) = (1.0f64, 0.3f64);
        let x = e.chart.point(&[t, p]).unwrap();
        let want = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
        for (a, b) in x.iter().zip(want) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn expected_lambda_examples() {
        let e = get_entry("sphere", 2).unwrap();
        let g = [0.0, 0.0, 1.0];
        assert!(expected_lambda(&e, &g, &[1e-9, 0.0]).unwrap().abs() < 1e-12);
        assert!((expected_lambda(&e, &g, &[PI / 2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let h = get_entry("hyperbolic", 2).unwrap();
        // Apex of the graph chart is u = 0.
        assert_eq!(expected_lambda(&h, &[1.0, 0.0, 0.0], &[0.0, 0.0]).unwrap(), -2.0);
        let f = get_entry("flat_plane", 2).unwrap();
        assert!(expected_lambda(&f, &[0.0; 3], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn unknown_and_out_of_range() {
        assert!(matches!(get_entry("torus", 2), Err(Error::UnknownEntry(_))));
        assert!(get_entry("sphere", 1).is_err());
        assert!(get_entry("sphere", 5).is_err());
    }

    #[test]
    fn list_is_stable() {
        let l = list_catalog();
        assert_eq!(l.len(), 7);
        assert_eq!(l.iter().map(|e| e.name).collect::<Vec<_>>(), ENTRY_NAMES.to_vec());
        assert!(l.iter().any(|e| e.name == "sphere" && e.k_expected == Some(1.0)));
        assert!(l.iter().any(|e| e.name == "flat_plane" && e.mean_curvature == 0.0));
    }

    #[test]
    fn declared_frames_reproduced() {
        for n in 2..=3 {
            for name in ENTRY_NAMES {
                let e = get_entry(name, n).unwrap();
                let u = e.chart.sample_box.center();
                let p = frame_at(&e.chart, &u).unwrap();
                assert_eq!(p.eps_n, e.eps_n, "{name}");
                let umb = umbilicity_at(&e.chart, &u).unwrap();
                if e.umbilic {
                    assert!((p.mean_curvature - e.mean_curvature).abs() <= 1e-8, "{name} n={n}: {}", p.mean_curvature);
                    assert!(umb.is_umbilic, "{name}");
                }
            }
        }
    }

    #[test]
    fn identity_map_is_an_isometry() {
        let e = get_entry("pseudo_hyperbolic_negative", 2).unwrap();
        let id = IdentityMap {
            domain: e.chart.domain().clone(),
        };
        let r = isometry_residual(&e.chart, &e.chart, &id, &[0.2, 0.3]).unwrap();
        assert_eq!(r, 0.0);
    }
}
