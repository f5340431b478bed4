//! Conservation-law residuals and the Willmore Euler-Lagrange residual.
//!
//! The Noether one-form of the relaxed functional is built per face,
//!
//!   dL = *d[g'(H) n] - 2 g'(H) *dn
//!        + [-2 g(H) + l (|da|^2 - K0 a e^{-2a} + K0 / A)] *dPhi
//!        - 2 l <dPhi, da> *da + 2 l (2nd-ff |_ *da)
//!
//! with g(t) = t^2 + sigma^2 (1 + t^2)^2 the l-scaled curvature integrand
//! and l = 1/log(1/sigma). Closedness of dL (one-ring loop integrals) is the
//! criticality test; the scalar and vector pairing identities hold for any
//! immersion and converge under refinement, as do the curl of the D-field
//! and the Codazzi residual measured in hinge-transported face frames.

use crate::energy::ViscosityParams;
use crate::error::Result;
use crate::gauge::GaugeState;
use crate::geom::Vec3;
use crate::mesh::{induced_geometry, DiscreteGeometry, Immersion};
use crate::variation::forms::{
    contract_second_fundamental, d_phi, d_scalar, d_vector, VecForm1,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConservationReport {
    /// RMS over vertices of one-ring loop integrals of dL.
    pub dl_closedness: f64,
    /// RMS area density mismatch of the scalar pairing identity.
    pub scalar_law: f64,
    /// RMS mismatch of the vector pairing identity.
    pub vector_law: f64,
    /// RMS one-ring curl of the D-field.
    pub d_curl: f64,
    /// RMS Codazzi residual over faces.
    pub codazzi: f64,
}

struct FaceOps<'a> {
    geo: &'a DiscreteGeometry,
    im: &'a Immersion,
}

impl<'a> FaceOps<'a> {
    /// Evaluate a face one-form on a directed edge (from, to) of that face.
    fn eval_on_edge(&self, fi: usize, form: &VecForm1, from: u32, to: u32) -> Vec3 {
        let (e1, e2) = self.geo.face_frames[fi];
        let d = self.im.pos(to) - self.im.pos(from);
        form.eval(d.dot(e1), d.dot(e2))
    }
}

/// Builds all conservation residuals for the relaxed functional.
pub fn conservation_residuals(
    im: &Immersion,
    g: &GaugeState,
    p: &ViscosityParams,
) -> Result<ConservationReport> {
    let geo = induced_geometry(im)?;
    conservation_residuals_with_geo(im, &geo, g, p)
}

pub fn conservation_residuals_with_geo(
    im: &Immersion,
    geo: &DiscreteGeometry,
    g: &GaugeState,
    p: &ViscosityParams,
) -> Result<ConservationReport> {
    g.check_consistency(geo)?;
    let mesh = &*im.mesh;
    let nf = mesh.face_count();
    let nv = mesh.vertex_count();
    let sigma2 = p.sigma * p.sigma;
    let l = p.l_sigma;
    let k0 = 4.0 * std::f64::consts::PI;
    let area = geo.total_area;

    // l-scaled curvature integrand and derivative
    let gf = |t: f64| t * t + sigma2 * (1.0 + t * t) * (1.0 + t * t);
    let gfp = |t: f64| 2.0 * t * (1.0 + 2.0 * sigma2 * (1.0 + t * t));

    // scalar curvature in the (1/2) lap Phi pairing the formulas assume
    let h: Vec<f64> = geo.mean_curvature.iter().map(|&t| -t).collect();
    let gpn: Vec<Vec3> = (0..nv).map(|v| geo.normals[v] * gfp(h[v])).collect();
    let gph: Vec<f64> = h.iter().map(|&t| gfp(t)).collect();
    let gh: Vec<f64> = h.iter().map(|&t| gf(t)).collect();
    let alpha = &g.alpha;
    let ae2a: Vec<f64> = alpha.iter().map(|&a| a * (-2.0 * a).exp()).collect();

    let ops = FaceOps { geo, im };
    let mean = |face: [u32; 3], u: &[f64]| {
        (u[face[0] as usize] + u[face[1] as usize] + u[face[2] as usize]) / 3.0
    };

    // assemble dL and the D-form per face
    let mut dl_forms = Vec::with_capacity(nf);
    let mut d_forms = Vec::with_capacity(nf);
    let mut scalar_sq = 0.0;
    let mut vector_sq = 0.0;
    for (fi, &face) in mesh.faces().iter().enumerate() {
        let dw_n = d_vector(geo, face, fi, &geo.normals);
        let da = d_scalar(geo, face, fi, alpha);
        let da2 = da.0 * da.0 + da.1 * da.1;
        let dphi = d_phi(geo, fi);
        let star_da = da.star();
        let pairing = dphi.0 * da.0 + dphi.1 * da.1; // <dPhi, da> in R^3

        let coeff = -2.0 * mean(face, &gh) + l * (da2 - k0 * mean(face, &ae2a) + k0 / area);
        let d_gpn = d_vector(geo, face, fi, &gpn).star();
        let t2 = dw_n.star().scale(-2.0 * mean(face, &gph));
        let t3 = dphi.star().scale(coeff);
        let t4 = VecForm1(pairing * star_da.0, pairing * star_da.1).scale(-2.0 * l);
        let t5 = contract_second_fundamental(geo, fi, star_da).scale(2.0 * l);
        let dl = VecForm1(
            d_gpn.0 + t2.0 + t3.0 + t4.0 + t5.0,
            d_gpn.1 + t2.1 + t3.1 + t4.1 + t5.1,
        );

        // scalar pairing identity: e1.dl_2 - e2.dl_1
        //   = 2 (g'(H) H - 2 g(H) - l K0 a e^{-2a} + l K0 / A)
        let (e1, e2) = geo.face_frames[fi];
        let lhs_s = e1.dot(dl.1) - e2.dot(dl.0);
        let hf = mean(face, &h);
        let rhs_s = 2.0 * (gfp(hf) * hf - 2.0 * gf(hf) - l * k0 * mean(face, &ae2a) + l * k0 / area);
        let ds = lhs_s - rhs_s;
        scalar_sq += ds * ds * geo.face_areas[fi];

        // D-field one-form D_a = sum_b I_ab e_b, components in the
        // n . d2 Phi convention (negative of the stored shape operator)
        let [i11, i12, i22] = geo.second_fundamental[fi];
        let dd = VecForm1(
            (e1 * i11 + e2 * i12) * -1.0,
            (e1 * i12 + e2 * i22) * -1.0,
        );

        // vector pairing identity:
        //   e1 x dl_2 - e2 x dl_1 = dPhi ^ d g'(H) - 2 l da ^ dD
        // (the minus follows from expanding the cross terms against the
        // D-field definition; the rotation-invariance statement prints the
        // opposite sign, which fails the frame expansion)
        let lhs_v = dphi.wedge_cross(dl);
        let dgp = d_scalar(geo, face, fi, &gph);
        let rhs_v = (e1 * dgp.1 - e2 * dgp.0) - (dd.1 * da.0 - dd.0 * da.1) * (2.0 * l);
        let dv = lhs_v - rhs_v;
        vector_sq += dv.norm2() * geo.face_areas[fi];

        dl_forms.push(dl);
        d_forms.push(dd);
    }
    let scalar_law = (scalar_sq / area).sqrt();
    let vector_law = (vector_sq / area).sqrt();

    // one-ring loop integrals: closedness of dL and of the D-form
    let vertex_faces = mesh.vertex_faces();
    let mut dl_sq = 0.0;
    let mut dcurl_sq = 0.0;
    for v in 0..nv as u32 {
        let mut loop_dl = Vec3::ZERO;
        let mut loop_d = Vec3::ZERO;
        for &fi in &vertex_faces[v as usize] {
            let face = mesh.faces()[fi as usize];
            // opposite edge oriented with the face: v, a, b cyclic
            let k = face.iter().position(|&x| x == v).unwrap();
            let (a, b) = (face[(k + 1) % 3], face[(k + 2) % 3]);
            loop_dl += ops.eval_on_edge(fi as usize, &dl_forms[fi as usize], a, b);
            loop_d += ops.eval_on_edge(fi as usize, &d_forms[fi as usize], a, b);
        }
        dl_sq += loop_dl.norm2();
        dcurl_sq += loop_d.norm2();
    }
    let dl_closedness = (dl_sq / nv as f64).sqrt();
    let d_curl = (dcurl_sq / nv as f64).sqrt();

    let codazzi = codazzi_residual(im, geo);

    Ok(ConservationReport {
        dl_closedness,
        scalar_law,
        vector_law,
        d_curl,
        codazzi,
    })
}

/// Codazzi residual per face: in a frame parallel-transported across each
/// hinge, Codazzi says the in-plane derivatives of the shape operator
/// components satisfy d1 I22 = d2 I12 and d2 I11 = d1 I12. Neighbor samples
/// are transported by the hinge rotation and fitted least-squares.
fn codazzi_residual(im: &Immersion, geo: &DiscreteGeometry) -> f64 {
    let mesh = &*im.mesh;
    let edge_face = mesh.directed_edge_faces();
    let mut total_sq = 0.0;
    let mut total_area = 0.0;

    let centroid = |fi: usize| -> Vec3 {
        let f = mesh.faces()[fi];
        (im.pos(f[0]) + im.pos(f[1]) + im.pos(f[2])) / 3.0
    };

    for (fi, &face) in mesh.faces().iter().enumerate() {
        let (e1, e2) = geo.face_frames[fi];
        let n_f = geo.face_normals[fi];
        let c_f = centroid(fi);

        // gather transported samples from the three hinge neighbors
        let mut rows: Vec<[f64; 2]> = Vec::with_capacity(3);
        let mut rhs: Vec<[f64; 3]> = Vec::with_capacity(3);
        for k in 0..3 {
            let (a, b) = (face[(k + 1) % 3], face[k]);
            let Some(&gi) = edge_face.get(&(a, b)) else {
                continue;
            };
            let gi = gi as usize;
            if gi == fi {
                continue;
            }
            let n_g = geo.face_normals[gi];
            // hinge rotation taking n_g to n_f
            let axis = n_g.cross(n_f);
            let s = axis.norm();
            let c = n_g.dot(n_f).clamp(-1.0, 1.0);
            let rot = if s < 1e-14 {
                crate::geom::Mat3::IDENTITY
            } else {
                crate::geom::Mat3::rotation(axis / s, s.atan2(c))
            };
            // ambient shape tensor of g, transported
            let (g1, g2) = geo.face_frames[gi];
            let [j11, j12, j22] = geo.second_fundamental[gi];
            let t1 = rot.apply(g1);
            let t2 = rot.apply(g2);
            // components in f's frame: I'_ab = sum over g-frame pairs
            let proj = |u: Vec3| (u.dot(e1), u.dot(e2));
            let (p11, p12) = proj(t1);
            let (q11, q12) = proj(t2);
            // M = j11 t1 t1^T + j12 (t1 t2^T + t2 t1^T) + j22 t2 t2^T
            let m11 = j11 * p11 * p11 + 2.0 * j12 * p11 * q11 + j22 * q11 * q11;
            let m12 = j11 * p11 * p12 + j12 * (p11 * q12 + q11 * p12) + j22 * q11 * q12;
            let m22 = j11 * p12 * p12 + 2.0 * j12 * p12 * q12 + j22 * q12 * q12;

            let d = centroid(gi) - c_f;
            rows.push([d.dot(e1), d.dot(e2)]);
            let [i11, i12, i22] = geo.second_fundamental[fi];
            rhs.push([m11 - i11, m12 - i12, m22 - i22]);
        }
        if rows.len() < 2 {
            continue;
        }

        // least-squares fit of the in-plane gradient of each component
        let mut ata = [[0.0; 2]; 2];
        for r in &rows {
            ata[0][0] += r[0] * r[0];
            ata[0][1] += r[0] * r[1];
            ata[1][1] += r[1] * r[1];
        }
        ata[1][0] = ata[0][1];
        let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
        if det.abs() < 1e-30 {
            continue;
        }
        let solve = |b0: f64, b1: f64| -> (f64, f64) {
            (
                (ata[1][1] * b0 - ata[0][1] * b1) / det,
                (ata[0][0] * b1 - ata[1][0] * b0) / det,
            )
        };
        let mut grads = [[0.0; 2]; 3];
        for comp in 0..3 {
            let mut b0 = 0.0;
            let mut b1 = 0.0;
            for (r, y) in rows.iter().zip(&rhs) {
                b0 += r[0] * y[comp];
                b1 += r[1] * y[comp];
            }
            let (gx, gy) = solve(b0, b1);
            grads[comp] = [gx, gy];
        }
        // grads indices: 0 -> I11, 1 -> I12, 2 -> I22
        let r1 = grads[2][0] - grads[1][1]; // d1 I22 - d2 I12
        let r2 = grads[0][1] - grads[1][0]; // d2 I11 - d1 I12
        total_sq += (r1 * r1 + r2 * r2) * geo.face_areas[fi];
        total_area += geo.face_areas[fi];
    }
    if total_area > 0.0 {
        (total_sq / total_area).sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct ElResidual {
    pub field: Vec<Vec3>,
    /// Dual-pairing norm against smooth probe fields. The equation only
    /// holds weakly (pairings against W^{2,4} tests), so the residual is
    /// measured there; the raw pointwise density keeps a nonconvergent
    /// vertex-scale oscillation on irregular meshes.
    pub norm: f64,
    /// Area-weighted L2 norm of the raw field.
    pub raw_norm: f64,
}

/// Willmore Euler-Lagrange residual: discrete divergence of the conservative
/// Willmore field, which in the outward-normal convention used here reads
/// grad(H_vec) - 2 H grad(n) + H^2 grad(Phi) and vanishes identically on
/// round spheres.
pub fn willmore_el_residual(im: &Immersion, geo: &DiscreteGeometry) -> ElResidual {
    let mesh = &*im.mesh;
    let nv = mesh.vertex_count();
    let mut integrated = vec![Vec3::ZERO; nv];

    for (fi, &face) in mesh.faces().iter().enumerate() {
        let area = geo.face_areas[fi];
        let dh = d_vector(geo, face, fi, &geo.mean_curvature_vec);
        let dn = d_vector(geo, face, fi, &geo.normals);
        let dphi = d_phi(geo, fi);
        let hf = (geo.mean_curvature[face[0] as usize]
            + geo.mean_curvature[face[1] as usize]
            + geo.mean_curvature[face[2] as usize])
            / 3.0;
        let field = VecForm1(
            dh.0 - dn.0 * (2.0 * hf) + dphi.0 * (hf * hf),
            dh.1 - dn.1 * (2.0 * hf) + dphi.1 * (hf * hf),
        );
        // weak divergence: integrated div at v = -sum_f A_f field(grad hat_v)
        let (e1, e2) = geo.face_frames[fi];
        for k in 0..3 {
            let hg = geo.hat_gradients[fi][k];
            let contrib = field.eval(hg.dot(e1), hg.dot(e2)) * area;
            integrated[face[k] as usize] -= contrib;
        }
    }

    let mut raw_sq = 0.0;
    let mut field = Vec::with_capacity(nv);
    for v in 0..nv {
        let r = integrated[v] / geo.vertex_areas[v];
        raw_sq += r.norm2() * geo.vertex_areas[v];
        field.push(r);
    }
    let norm = crate::variation::weak_field_norm(mesh, geo, &field);
    ElResidual {
        field,
        norm,
        raw_norm: raw_sq.sqrt(),
    }
}
