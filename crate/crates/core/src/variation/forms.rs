//! Per-face one-form calculus and the smooth first-variation formulas.
//!
//! One-forms live per face in the orthonormal face frame (e1, e2); the Hodge
//! star on 1-forms is the 90-degree rotation *(w1, w2) = (-w2, w1), and the
//! wedge of two forms integrates as (w1.v2 - w2.v1) * area. Scalar and
//! vector vertex fields enter through their piecewise-linear face gradients.
//!
//! These evaluations converge to the smooth identities only as the mesh
//! refines; the exact discrete derivatives live in the parent module.

use crate::error::{Error, Result};
use crate::gauge::{is_balanced, GaugeState};
use crate::geom::Vec3;
use crate::mesh::{induced_geometry, DiscreteGeometry, Immersion};

/// Scalar one-form on a face: components along (e1, e2).
#[derive(Debug, Clone, Copy)]
pub struct Form1(pub f64, pub f64);

/// R^3-valued one-form on a face.
#[derive(Debug, Clone, Copy)]
pub struct VecForm1(pub Vec3, pub Vec3);

impl Form1 {
    pub fn star(self) -> Form1 {
        Form1(-self.1, self.0)
    }
}

impl VecForm1 {
    pub fn star(self) -> VecForm1 {
        VecForm1(-self.1, self.0)
    }

    /// wedge with dot contraction: (omega ^ eta) / (dy1 dy2)
    pub fn wedge_dot(self, o: VecForm1) -> f64 {
        self.0.dot(o.1) - self.1.dot(o.0)
    }

    /// wedge with cross contraction
    pub fn wedge_cross(self, o: VecForm1) -> Vec3 {
        self.0.cross(o.1) - self.1.cross(o.0)
    }

    pub fn scale(self, s: f64) -> VecForm1 {
        VecForm1(self.0 * s, self.1 * s)
    }

    /// Evaluate on a tangent vector given by its frame components.
    pub fn eval(self, d1: f64, d2: f64) -> Vec3 {
        self.0 * d1 + self.1 * d2
    }
}

/// Differential of a scalar vertex field on face `fi`.
pub fn d_scalar(geo: &DiscreteGeometry, face: [u32; 3], fi: usize, u: &[f64]) -> Form1 {
    let (e1, e2) = geo.face_frames[fi];
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for k in 0..3 {
        let g = geo.hat_gradients[fi][k];
        let val = u[face[k] as usize];
        d1 += val * g.dot(e1);
        d2 += val * g.dot(e2);
    }
    Form1(d1, d2)
}

/// Differential of an R^3-valued vertex field on face `fi`.
pub fn d_vector(geo: &DiscreteGeometry, face: [u32; 3], fi: usize, u: &[Vec3]) -> VecForm1 {
    let (e1, e2) = geo.face_frames[fi];
    let mut d1 = Vec3::ZERO;
    let mut d2 = Vec3::ZERO;
    for k in 0..3 {
        let g = geo.hat_gradients[fi][k];
        let val = u[face[k] as usize];
        d1 += val * g.dot(e1);
        d2 += val * g.dot(e2);
    }
    VecForm1(d1, d2)
}

/// dPhi on a face is the identity on the face plane: components (e1, e2).
pub fn d_phi(geo: &DiscreteGeometry, fi: usize) -> VecForm1 {
    let (e1, e2) = geo.face_frames[fi];
    VecForm1(e1, e2)
}

/// Second fundamental form contracted with a scalar one-form, yielding the
/// normal-valued one-form 2nd-ff |_ w with components sum_i I_ai w_i. The
/// components here are n . d2 Phi, the negative of the shape-operator
/// entries stored in the geometry.
pub fn contract_second_fundamental(
    geo: &DiscreteGeometry,
    fi: usize,
    w: Form1,
) -> VecForm1 {
    let [i11, i12, i22] = geo.second_fundamental[fi];
    let n = geo.face_normals[fi];
    VecForm1(
        n * -(i11 * w.0 + i12 * w.1),
        n * -(i12 * w.0 + i22 * w.1),
    )
}

fn face_mean(face: [u32; 3], u: &[f64]) -> f64 {
    (u[face[0] as usize] + u[face[1] as usize] + u[face[2] as usize]) / 3.0
}

/// First variation of int f(H) dvol in direction w, evaluated through the
/// boundary-integral form
///   1/2 int (*d[f'(H) n]) ^ dw - int (f'(H) *dn) ^ dw - int (f(H) *dPhi) ^ dw.
///
/// The callbacks receive the scalar curvature in the (1/2) lap Phi
/// convention (round sphere with outward normals: -1), the pairing the
/// formula is derived in; even integrands are convention-free.
pub fn first_variation_fh(
    im: &Immersion,
    f: &dyn Fn(f64) -> f64,
    f_prime: &dyn Fn(f64) -> f64,
    w: &[Vec3],
) -> Result<f64> {
    if w.len() != im.mesh.vertex_count() {
        return Err(Error::Parameter("variation field length mismatch".into()));
    }
    let geo = induced_geometry(im)?;
    let h: Vec<f64> = geo.mean_curvature.iter().map(|&t| -t).collect();
    let fpn: Vec<Vec3> = (0..im.mesh.vertex_count())
        .map(|v| geo.normals[v] * f_prime(h[v]))
        .collect();
    let fh: Vec<f64> = h.iter().map(|&t| f(t)).collect();
    let fph: Vec<f64> = h.iter().map(|&t| f_prime(t)).collect();

    let mut total = 0.0;
    for (fi, &face) in im.mesh.faces().iter().enumerate() {
        let area = geo.face_areas[fi];
        let dw = d_vector(&geo, face, fi, w);
        let term1 = 0.5 * d_vector(&geo, face, fi, &fpn).star().wedge_dot(dw);
        let dn = d_vector(&geo, face, fi, &geo.normals);
        let term2 = face_mean(face, &fph) * dn.star().wedge_dot(dw);
        let term3 = face_mean(face, &fh) * d_phi(&geo, fi).star().wedge_dot(dw);
        total += (term1 - term2 - term3) * area;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct OnofriVariation {
    /// Exact derivative of the discrete Onofri energy.
    pub exact: f64,
    /// Boundary-form evaluation of the derivative of
    /// int (|da|^2 + 2 K0 a e^{-2a}) dvol, for the structural cross-check.
    pub boundary_form: f64,
    /// The same quantity assembled from the exact derivative and the exact
    /// log-area variation; boundary_form converges to this under refinement.
    pub boundary_form_target: f64,
}

/// Exact derivative of the discrete Onofri energy in direction w, plus the
/// four-term boundary-integral form as a structural cross-check.
pub fn first_variation_onofri(
    im: &Immersion,
    g: &GaugeState,
    w: &[Vec3],
) -> Result<OnofriVariation> {
    if w.len() != im.mesh.vertex_count() {
        return Err(Error::Parameter("variation field length mismatch".into()));
    }
    let geo = induced_geometry(im)?;
    if !is_balanced(im, &geo, g) {
        return Err(Error::Gauge(
            "first_variation_onofri requires an Aubin gauge".into(),
        ));
    }

    let b = &g.g0_vertex_area;
    let onofri_grad = super::energy_gradient(
        &im.mesh,
        im.positions(),
        b,
        &super::TermWeights::onofri_only(),
    )?;
    let exact: f64 = onofri_grad.iter().zip(w).map(|(gv, wv)| gv.dot(*wv)).sum();

    // d/dt of int (|da|^2 + 2 K0 a e^{-2a}) dvol has term weights
    // 2*Dirichlet + 2*Linear (no log-area part)
    let t_grad = super::energy_gradient(
        &im.mesh,
        im.positions(),
        b,
        &super::TermWeights {
            dirichlet: 2.0,
            linear: 2.0,
            ..Default::default()
        },
    )?;
    let boundary_form_target: f64 = t_grad.iter().zip(w).map(|(gv, wv)| gv.dot(*wv)).sum();

    let k0 = 4.0 * std::f64::consts::PI;
    let alpha = &g.alpha;
    // The density multiplying the curvature term is e^{-2 alpha}: with this
    // weight the four-term form reproduces the dilation mode and the
    // constant-alpha sphere mode of the left side exactly.
    let e2a: Vec<f64> = alpha.iter().map(|&a| (-2.0 * a).exp()).collect();
    let mut boundary_form = 0.0;
    for (fi, &face) in im.mesh.faces().iter().enumerate() {
        let area = geo.face_areas[fi];
        let dw = d_vector(&geo, face, fi, w);
        let da = d_scalar(&geo, face, fi, alpha);
        let da2 = da.0 * da.0 + da.1 * da.1;
        let dphi = d_phi(&geo, fi);
        // <dPhi, da> is the R^3 vector e1 da1 + e2 da2
        let pairing = dphi.0 * da.0 + dphi.1 * da.1;
        let star_da = da.star();
        let term1 = dphi.star().scale(da2).wedge_dot(dw);
        let term2 = -2.0 * VecForm1(pairing * star_da.0, pairing * star_da.1).wedge_dot(dw);
        let term3 = 2.0 * contract_second_fundamental(&geo, fi, star_da).wedge_dot(dw);
        let term4 = -k0 * face_mean(face, &e2a) * dphi.star().wedge_dot(dw);
        boundary_form += (term1 + term2 + term3 + term4) * area;
    }

    Ok(OnofriVariation {
        exact,
        boundary_form,
        boundary_form_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::aubin_balance;
    use crate::geom::v3;
    use crate::mesh::{build_icosphere, Immersion};
    use rand::{Rng, SeedableRng};

    fn unit_sphere(level: u32) -> Immersion {
        Immersion::reference_sphere(build_icosphere(level).unwrap()).unwrap()
    }

    /// Smooth random direction field (lobe mixture); the boundary-integral
    /// evaluations are only consistent against fields with bounded gradients.
    fn random_field(im: &Immersion, seed: u64) -> Vec<Vec3> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let lobes: Vec<(Vec3, Vec3)> = (0..6)
            .map(|_| {
                let q = v3(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalized();
                let c = v3(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                (q, c)
            })
            .collect();
        im.mesh
            .points()
            .iter()
            .map(|&p| {
                let mut w = Vec3::ZERO;
                for &(q, c) in &lobes {
                    w += c * (-(p - q).norm2() / 0.6).exp();
                }
                w
            })
            .collect()
    }

    #[test]
    fn constant_field_gives_zero_variation() {
        let im = unit_sphere(2);
        let w = vec![v3(0.7, -0.3, 0.2); im.mesh.vertex_count()];
        let val = first_variation_fh(&im, &|t| t * t, &|t| 2.0 * t, &w).unwrap();
        assert!(val.abs() < 1e-10, "dw = 0 must kill the variation: {val}");
    }

    #[test]
    fn dilation_direction_kills_willmore_variation() {
        let im = unit_sphere(3);
        let w: Vec<Vec3> = im.positions().to_vec();
        let val = first_variation_fh(&im, &|t| t * t, &|t| 2.0 * t, &w).unwrap();
        assert!(val.abs() < 1e-10, "dilation variation {val}");
    }

    #[test]
    fn fh_variation_matches_fd_of_discrete_integral() {
        // f(t) = (1+t^2)^2 on an ellipsoid against a centered difference of
        // the discrete functional; the two agree up to the discretization gap
        let im = unit_sphere(5)
            .map_positions(|p| v3(p.x, p.y, 2.0 * p.z))
            .unwrap();
        let w = random_field(&im, 11);
        let f = |t: f64| (1.0 + t * t) * (1.0 + t * t);
        let fp = |t: f64| 4.0 * t * (1.0 + t * t);
        let val = first_variation_fh(&im, &f, &fp, &w).unwrap();

        let eval = |im: &Immersion| -> f64 {
            let geo = induced_geometry(im).unwrap();
            geo.mean_curvature
                .iter()
                .zip(&geo.vertex_areas)
                .map(|(&h, &a)| f(h) * a)
                .sum()
        };
        let h = 1e-6;
        let plus = im
            .with_positions(
                im.positions()
                    .iter()
                    .zip(&w)
                    .map(|(p, d)| *p + *d * h)
                    .collect(),
            )
            .unwrap();
        let minus = im
            .with_positions(
                im.positions()
                    .iter()
                    .zip(&w)
                    .map(|(p, d)| *p - *d * h)
                    .collect(),
            )
            .unwrap();
        let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
        let wnorm: f64 = w.iter().map(|v| v.norm2()).sum::<f64>().sqrt();
        let tol = f64::max(1e-3 * fd.abs(), 5e-3 * wnorm);
        assert!(
            (val - fd).abs() < tol,
            "boundary form {val} vs fd {fd}, tol {tol}"
        );
    }

    #[test]
    fn onofri_variation_exact_matches_fd() {
        let im = unit_sphere(3)
            .map_positions(|p| p * (1.0 + 0.1 * p.x + 0.06 * p.y * p.z))
            .unwrap();
        let g = aubin_balance(&im).unwrap();
        let w = random_field(&im, 21);
        let var = first_variation_onofri(&im, &g, &w).unwrap();

        let b = g.g0_vertex_area.clone();
        let tw = super::super::TermWeights::onofri_only();
        let h = 1e-6;
        let shift = |s: f64| -> Vec<Vec3> {
            im.positions()
                .iter()
                .zip(&w)
                .map(|(p, d)| *p + *d * s)
                .collect()
        };
        let ep = super::super::energy_value(&im.mesh, &shift(h), &b, &tw).unwrap();
        let em = super::super::energy_value(&im.mesh, &shift(-h), &b, &tw).unwrap();
        let fd = (ep - em) / (2.0 * h);
        assert!(
            (var.exact - fd).abs() < 1e-4 * fd.abs().max(1e-6),
            "exact {} vs fd {fd}",
            var.exact
        );
    }

    #[test]
    fn onofri_dilation_direction_is_exact_zero_mode() {
        let im = unit_sphere(3)
            .map_positions(|p| p * (1.0 + 0.05 * p.x))
            .unwrap();
        let g = aubin_balance(&im).unwrap();
        let w: Vec<Vec3> = im.positions().to_vec();
        let var = first_variation_onofri(&im, &g, &w).unwrap();
        assert!(var.exact.abs() < 1e-9, "dilation derivative {}", var.exact);
    }

    #[test]
    fn onofri_boundary_form_tracks_exact_when_parametrization_conformal() {
        // the boundary-integral form assumes a conformal parametrization;
        // a Mobius-distorted round sphere provides one, and there the form
        // tracks the exact derivative within mesh error, improving under
        // refinement. Radially parametrized shapes keep a quasi-conformal
        // gap that never refines away.
        use crate::mesh::mobius::MobiusS2;
        let push = MobiusS2::translation(v3(0.0, 0.0, 0.4)).unwrap();
        let mut prev_gap = f64::INFINITY;
        for level in 3..=4 {
            let mesh = crate::mesh::build_icosphere(level).unwrap();
            let im = Immersion::new(
                mesh.clone(),
                mesh.points().iter().map(|&p| push.apply_point(p)).collect(),
            )
            .unwrap();
            let g = aubin_balance(&im).unwrap();
            let w: Vec<Vec3> = im
                .mesh
                .points()
                .iter()
                .map(|&p| {
                    v3(
                        (3.0 * p.x).sin() * 0.3,
                        (2.0 * p.y + 1.0).cos() * 0.4,
                        (2.5 * p.z).sin() * 0.5,
                    )
                })
                .collect();
            let var = first_variation_onofri(&im, &g, &w).unwrap();
            let gap = (var.boundary_form - var.boundary_form_target).abs()
                / var.boundary_form_target.abs().max(1e-12);
            assert!(gap < prev_gap, "level {level}: gap {gap} !< {prev_gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.10, "level-4 relative gap {prev_gap}");
    }
}
