//! Frames, curvature and differential operators on the catalog charts.

use std::sync::Arc;

use almost_soliton::catalog::{get_entry, isometry_residual, CatalogEntry, ToHyperboloidGraph, ENTRY_NAMES};
use almost_soliton::conformal::{split_frame, ConformalField};
use almost_soliton::hypersurface::{covariant_weingarten_at, frame_at, ricci_at, umbilicity_at, Frame, FramePoint};
use almost_soliton::jets::{DomainBox, Jet3, ParamMap, Scalar, SmoothMap};
use almost_soliton::semiriem::{inner, AmbientSpace};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn entries() -> Vec<CatalogEntry> {
    (2..=3)
        .flat_map(|n| ENTRY_NAMES.iter().map(move |name| get_entry(name, n).unwrap()))
        .collect()
}

fn points(e: &CatalogEntry, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    e.chart.sample_points(&mut rng, count)
}

/// Max entry of a bilinear form in a g-orthonormal basis, computed without
/// the library's frame helper.
fn ortho_norm(g: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(g.clone());
    let mut p = eig.eigenvectors.clone();
    for k in 0..g.nrows() {
        p.column_mut(k).scale_mut(1.0 / eig.eigenvalues[k].abs().sqrt());
    }
    (p.transpose() * t * p).amax()
}

fn ambient_curvature(e: &CatalogEntry) -> f64 {
    e.chart.ambient.curvature()
}

#[test]
fn frame_invariants() {
    for e in entries() {
        let eps = e.chart.ambient.signature.eps().to_vec();
        let dot = |a: &DVector<f64>, b: &DVector<f64>| -> f64 { a.iter().zip(b.iter()).zip(&eps).map(|((x, y), s)| x * y * s).sum() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for u in points(&e, 20, 1) {
            let p = frame_at(&e.chart, &u).unwrap();
            let n = e.n;
            assert!((&p.metric - p.metric.transpose()).amax() <= 1e-12);
            assert!((&p.metric * &p.metric_inv - DMatrix::identity(n, n)).amax() <= 1e-10);
            for t in &p.tangents {
                assert!(dot(&p.normal, t).abs() <= 1e-10, "{}", e.name);
            }
            assert!((dot(&p.normal, &p.normal) - p.eps_n).abs() <= 1e-10);
            assert_eq!(p.eps_n.abs(), 1.0);
            for _ in 0..5 {
                let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let lhs = (&p.metric * (&p.weingarten * &x)).dot(&y);
                let rhs = (&p.metric * &x).dot(&(&p.weingarten * &y));
                assert!((lhs - rhs).abs() <= 1e-9, "{}: {lhs} vs {rhs}", e.name);
            }
        }
    }
}

#[test]
fn second_fundamental_form_two_ways() {
    for e in entries() {
        for u in points(&e, 10, 2) {
            let f = Frame::new(&e.chart, &u).unwrap();
            let d = f.second_fundamental_form_direct() - f.weingarten_lower();
            assert!(d.amax() <= 1e-9, "{} {}", e.name, d.amax());
        }
    }
}

#[test]
fn metric_compatibility() {
    for e in entries() {
        let n = e.n;
        for u in points(&e, 20, 4) {
            let p = frame_at(&e.chart, &u).unwrap();
            let g = &p.metric;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut r = p.metric_deriv[k][(i, j)];
                        for l in 0..n {
                            r -= p.christoffel[l][(k, i)] * g[(l, j)] + p.christoffel[l][(k, j)] * g[(i, l)];
                        }
                        assert!(r.abs() <= 1e-9, "{} {r}", e.name);
                    }
                }
            }
        }
    }
}

/// Central difference of a matrix-valued function of the chart parameters.
fn fd_matrix<F: Fn(&FramePoint) -> DMatrix<f64>>(e: &CatalogEntry, u: &[f64], axis: usize, h: f64, f: F) -> DMatrix<f64> {
    let mut up = u.to_vec();
    let mut dn = u.to_vec();
    up[axis] += h;
    dn[axis] -= h;
    (f(&frame_at(&e.chart, &up).unwrap()) - f(&frame_at(&e.chart, &dn).unwrap())) / (2.0 * h)
}

#[test]
fn christoffels_match_finite_differences_of_the_metric() {
    for e in entries() {
        let n = e.n;
        for u in points(&e, 5, 5) {
            let p = frame_at(&e.chart, &u).unwrap();
            let dg: Vec<DMatrix<f64>> = (0..n).map(|k| fd_matrix(&e, &u, k, 1e-5, |q| q.metric.clone())).collect();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut want = 0.0;
                        for l in 0..n {
                            want += 0.5 * p.metric_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                        }
                        let got = p.christoffel[k][(i, j)];
                        assert!((got - want).abs() <= 1e-5, "{} Γ^{k}_{i}{j}: {got} vs {want}", e.name);
                    }
                }
            }
        }
    }
}

#[test]
fn ricci_matches_finite_differences_of_christoffels() {
    for e in entries() {
        let n = e.n;
        for u in points(&e, 5, 6) {
            let p = frame_at(&e.chart, &u).unwrap();
            let (ric, _) = ricci_at(&e.chart, &u).unwrap();
            // dgam[a][l] = ∂_a Γ^l as a matrix in (i, j).
            let dgam: Vec<Vec<DMatrix<f64>>> = (0..n)
                .map(|a| (0..n).map(|l| fd_matrix(&e, &u, a, 1e-5, |q| q.christoffel[l].clone())).collect())
                .collect();
            let gam = &p.christoffel;
            let want = DMatrix::from_fn(n, n, |j, k| {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += dgam[l][l][(j, k)] - dgam[k][l][(j, l)];
                    for m in 0..n {
                        acc += gam[l][(l, m)] * gam[m][(j, k)] - gam[l][(k, m)] * gam[m][(j, l)];
                    }
                }
                acc
            });
            assert!((&ric - &want).amax() <= 1e-5, "{}: {}", e.name, (&ric - &want).amax());
        }
    }
}

#[test]
fn contracted_gauss_equation() {
    for e in entries() {
        let n = e.n as f64;
        let c = ambient_curvature(&e);
        for u in points(&e, 50, 7) {
            let p = frame_at(&e.chart, &u).unwrap();
            let (ric, s) = ricci_at(&e.chart, &u).unwrap();
            let h = &p.metric * &p.weingarten;
            let a2 = &p.metric * &p.weingarten * &p.weingarten;
            let rhs = &p.metric * (c * (n - 1.0)) + &h * (n * p.mean_curvature) - a2 * p.eps_n;
            let r = ortho_norm(&p.metric, &(ric - rhs));
            assert!(r <= 1e-7, "{} {r}", e.name);
            let f = Frame::new(&e.chart, &u).unwrap();
            assert!((f.gauss_residual() - r).abs() <= 1e-9);
            if e.umbilic {
                let scalar = (s / (n * (n - 1.0)) - c - p.eps_n * p.mean_curvature.powi(2)).abs();
                assert!(scalar <= 1e-8, "{} {scalar}", e.name);
            }
        }
    }
}

#[test]
fn saddle_breaks_the_scalar_identity() {
    let e = get_entry("saddle_graph", 2).unwrap();
    let f = Frame::new(&e.chart, &[0.3, 0.2]).unwrap();
    assert!(f.scalar_curvature_residual() > 1e-3);
}

#[test]
fn codazzi_everywhere() {
    for e in entries() {
        let tol = if e.name == "sphere" || e.name == "flat_plane" { 1e-9 } else { 1e-7 };
        for u in points(&e, 20, 8) {
            let r = Frame::new(&e.chart, &u).unwrap().codazzi_residual();
            assert!(r <= tol, "{} {r}", e.name);
        }
    }
}

#[test]
fn covariant_weingarten_matches_fd_transport() {
    for name in ["pseudo_hyperbolic_zero", "pseudo_hyperbolic_negative", "saddle_graph"] {
        let e = get_entry(name, 2).unwrap();
        let n = e.n;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for u in points(&e, 10, 10) {
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let got = covariant_weingarten_at(&e.chart, &u, &v).unwrap();
            let p = frame_at(&e.chart, &u).unwrap();
            let a = &p.weingarten;
            let mut want = DMatrix::zeros(n, n);
            for j in 0..n {
                // (∇_j A)^k_i = ∂_j A^k_i + Γ^k_jl A^l_i - Γ^l_ji A^k_l
                let da = fd_matrix(&e, &u, j, 1e-5, |q| q.weingarten.clone());
                let conn = DMatrix::from_fn(n, n, |k, l| p.christoffel[k][(j, l)]);
                let term = da + &conn * a - a * &conn;
                want += term * v[j];
            }
            assert!((&got - &want).amax() <= 1e-5, "{name}: {}", (&got - &want).amax());
        }
    }
}

#[test]
fn height_hessian_on_the_sphere() {
    let e = get_entry("sphere", 2).unwrap();
    for u in points(&e, 20, 11) {
        let f = Frame::new(&e.chart, &u).unwrap();
        let h = f.height(&[0.0, 0.0, 1.0]);
        let hess = f.hessian(&h).unwrap();
        let want = &f.point.metric * -h.value();
        assert!((hess - want).amax() <= 1e-9);
    }
}

#[test]
fn flat_plane_hessian_of_half_square() {
    let e = get_entry("flat_plane", 2).unwrap();
    let f = Frame::new(&e.chart, &[0.3, -0.4]).unwrap();
    let u = Jet3::variables(&[0.3, -0.4]);
    let phi = (u[0] * u[0] + u[1] * u[1]) * 0.5;
    let hess = f.hessian(&phi).unwrap();
    assert!((hess - DMatrix::identity(2, 2)).amax() <= 1e-14);
}

#[test]
fn gradient_hessian_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for e in entries() {
        let m = e.chart.ambient.container_dim();
        for u in points(&e, 10, 13) {
            let f = Frame::new(&e.chart, &u).unwrap();
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let phi = f.height(&v);
            let hess = f.hessian(&phi).unwrap();
            let nabla = f.covariant_derivative(&f.gradient_field(&phi)).unwrap();
            // g(∇_i grad φ, E_j) = g_jk ∇_i W^k, entry (j, i) of g·∇W.
            let dual = (&f.point.metric * nabla).transpose();
            let x = DVector::from_fn(e.n, |_, _| rng.gen_range(-1.0..1.0));
            let y = DVector::from_fn(e.n, |_, _| rng.gen_range(-1.0..1.0));
            let r = (x.transpose() * (&hess - &dual) * &y)[(0, 0)];
            assert!(r.abs() <= 1e-8, "{} {r}", e.name);
        }
    }
}

#[test]
fn rotations_are_killing_on_the_sphere() {
    let e = get_entry("sphere", 2).unwrap();
    let mut b = DMatrix::zeros(3, 3);
    b[(0, 1)] = 1.0;
    b[(1, 0)] = -1.0;
    b[(1, 2)] = 0.4;
    b[(2, 1)] = -0.4;
    let field = ConformalField::killing(AmbientSpace::euclidean(3), b).unwrap();
    for u in points(&e, 20, 14) {
        let f = Frame::new(&e.chart, &u).unwrap();
        let split = split_frame(&f, &field).unwrap();
        assert!(f.lie_derivative(&split.v).unwrap().amax() <= 1e-9);
    }
}

#[test]
fn umbilicity_of_the_catalog() {
    for e in entries() {
        for u in points(&e, 10, 15) {
            let umb = umbilicity_at(&e.chart, &u).unwrap();
            if e.umbilic {
                assert!(umb.is_umbilic, "{}", e.name);
                assert!((umb.mean_curvature - e.mean_curvature).abs() <= 1e-8);
            }
        }
    }
    let saddle = get_entry("saddle_graph", 2).unwrap();
    let at0 = umbilicity_at(&saddle.chart, &[0.0, 0.0]).unwrap();
    assert!(!at0.is_umbilic);
    assert!(at0.mean_curvature.abs() <= 1e-12);
}

/// `(t, v) ↦ (2t, v)`, which is not an isometry.
struct ScaledT {
    source: Arc<dyn SmoothMap>,
    domain: DomainBox,
}

impl ParamMap for ScaledT {
    fn input_dim(&self) -> usize {
        self.source.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.source.input_dim()
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }
    fn map<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let mut out = u.to_vec();
        out[0] = out[0] * 2.0;
        out
    }
}

#[test]
fn warped_charts_are_isometric_to_the_hyperboloid() {
    let hyp = get_entry("hyperbolic", 2).unwrap();
    for name in ["pseudo_hyperbolic_negative", "pseudo_hyperbolic_zero"] {
        let e = get_entry(name, 2).unwrap();
        let to_graph = ToHyperboloidGraph {
            source: e.chart.map.clone(),
        };
        for u in points(&e, 20, 16) {
            let r = isometry_residual(&e.chart, &hyp.chart, &to_graph, &u).unwrap();
            assert!(r <= 1e-7, "{name} {r}");
        }
    }
    let neg = get_entry("pseudo_hyperbolic_negative", 2).unwrap();
    let scaled = ScaledT {
        source: neg.chart.map.clone(),
        domain: DomainBox::cube(2, -1.5, 1.5),
    };
    let r = isometry_residual(&neg.chart, &neg.chart, &scaled, &[0.4, 0.3]).unwrap();
    assert!(r > 0.1, "{r}");
}

#[test]
fn images_lie_on_their_quadrics() {
    for name in ["hyperbolic", "pseudo_hyperbolic_zero", "pseudo_hyperbolic_negative"] {
        let e = get_entry(name, 3).unwrap();
        for u in points(&e, 20, 17) {
            let x = e.chart.point(&u).unwrap();
            let s = inner(&e.chart.ambient.signature, &x, &x).unwrap();
            assert!((s + 1.0).abs() <= 1e-9, "{name} {s}");
        }
    }
}
