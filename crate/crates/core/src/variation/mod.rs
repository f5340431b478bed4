//! Exact gradients of the discrete energies and their finite-difference
//! oracle.
//!
//! The analytic gradient differentiates the discrete energy itself: chain
//! rule through the cotangent weights, the barycentric areas, and the
//! area-ratio conformal factor. That guarantees descent directions for the
//! optimizer and finite-difference agreement to O(h^2) + roundoff; the
//! smooth first-variation formulas live in `forms` as cross-checks.
//!
//! Gauge handling: every evaluation keeps the Mobius element (hence the g0
//! vertex measures b_v) frozen and recomputes alpha from areas. Under
//! dilation x -> e^t x the discrete frame energy W + O is then invariant
//! exactly: cotangents are scale free, alpha shifts by t, and the linear and
//! log-area terms cancel term by term.

pub mod conservation;
pub mod forms;
pub mod residue;

use crate::energy::ViscosityParams;
use crate::error::{Error, Result};
use crate::gauge::{is_balanced, GaugeState};
use crate::geom::Vec3;
use crate::mesh::{
    cot_laplacian_apply_scalar, cot_laplacian_apply_vec, induced_geometry, DiscreteGeometry,
    Immersion, TriangulatedSphere,
};
use rayon::prelude::*;
use std::f64::consts::PI;

/// A tangent direction at an immersion: one vector per vertex, plus the
/// fourth-root Sobolev-type norm built from cotan operators.
#[derive(Debug, Clone)]
pub struct VariationField {
    pub w: Vec<Vec3>,
    pub norm_phi: f64,
}

impl VariationField {
    pub fn new(w: Vec<Vec3>, geo: &DiscreteGeometry, mesh: &TriangulatedSphere) -> Self {
        let norm_phi = phi_norm(mesh, geo, &w);
        VariationField { w, norm_phi }
    }

    pub fn max_norm(&self) -> f64 {
        self.w.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn dot(&self, other: &[Vec3]) -> f64 {
        self.w.iter().zip(other).map(|(a, b)| a.dot(*b)).sum()
    }
}

/// Fourth root of sum (|L w / A|^4 + |dw|^4 + |w|^4) A_v.
pub fn phi_norm(mesh: &TriangulatedSphere, geo: &DiscreteGeometry, w: &[Vec3]) -> f64 {
    let lw = cot_laplacian_apply_vec(mesh, &geo.cot, w);
    let mass = &geo.circ_vertex_areas;
    // per-vertex |dw|^2 as area-weighted average of face Frobenius norms
    let mut dw2 = vec![0.0; w.len()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let (e1, e2) = geo.face_frames[fi];
        let mut d1 = Vec3::ZERO;
        let mut d2 = Vec3::ZERO;
        for k in 0..3 {
            let g = geo.hat_gradients[fi][k];
            d1 += w[f[k] as usize] * g.dot(e1);
            d2 += w[f[k] as usize] * g.dot(e2);
        }
        let fro2 = d1.norm2() + d2.norm2();
        for &v in f {
            dw2[v as usize] += fro2 * geo.face_areas[fi] / 3.0;
        }
    }
    let mut total = 0.0;
    for v in 0..w.len() {
        let a = geo.vertex_areas[v];
        let hess = lw[v].norm2() / (mass[v] * mass[v]);
        let grad = dw2[v] / a;
        total += (hess * hess + grad * grad + w[v].norm2() * w[v].norm2()) * a;
    }
    total.powf(0.25)
}

/// Term weights for the gradient core. The discrete energy differentiated is
///   cw W + cs S + cd Dirichlet + cl Linear + clog LogArea + carea Area
/// with Dirichlet = 1/2 a^T L a, Linear = 4pi sum a_v b_v,
/// LogArea = -2pi log(total area).
#[derive(Debug, Clone, Copy, Default)]
pub struct TermWeights {
    pub willmore: f64,
    pub smoother: f64,
    pub dirichlet: f64,
    pub linear: f64,
    pub log_area: f64,
    pub area: f64,
}

impl TermWeights {
    pub fn willmore_only() -> Self {
        TermWeights {
            willmore: 1.0,
            ..Default::default()
        }
    }

    pub fn onofri_only() -> Self {
        TermWeights {
            dirichlet: 1.0,
            linear: 1.0,
            log_area: 1.0,
            ..Default::default()
        }
    }

    pub fn frame_energy() -> Self {
        TermWeights {
            willmore: 1.0,
            dirichlet: 1.0,
            linear: 1.0,
            log_area: 1.0,
            ..Default::default()
        }
    }

    pub fn area_only() -> Self {
        TermWeights {
            area: 1.0,
            ..Default::default()
        }
    }

    pub fn relaxed(p: &ViscosityParams) -> Self {
        TermWeights {
            willmore: 1.0,
            smoother: p.sigma * p.sigma,
            dirichlet: p.l_sigma,
            linear: p.l_sigma,
            log_area: p.l_sigma,
            area: 0.0,
        }
    }
}

/// Scalar value of the weighted energy with the gauge measures `b` frozen.
/// Curvature densities carry the circumcentric mass; integrals carry the
/// barycentric measure, matching `induced_geometry`.
pub fn energy_value(
    mesh: &TriangulatedSphere,
    positions: &[Vec3],
    b: &[f64],
    tw: &TermWeights,
) -> Result<f64> {
    let nv = mesh.vertex_count();
    let nf = mesh.face_count();
    let mut cot = vec![[0.0; 3]; nf];
    let mut vertex_areas = vec![0.0; nv];
    let mut circ_areas = vec![0.0; nv];
    let mut total_area = 0.0;

    for (fi, f) in mesh.faces().iter().enumerate() {
        let x = [
            positions[f[0] as usize],
            positions[f[1] as usize],
            positions[f[2] as usize],
        ];
        let n = (x[1] - x[0]).cross(x[2] - x[0]);
        let area = 0.5 * n.norm();
        if !(area > 0.0) {
            return Err(Error::Geometry(format!("face {fi} degenerate in probe")));
        }
        total_area += area;
        for k in 0..3 {
            let u = x[(k + 1) % 3] - x[k];
            let v = x[(k + 2) % 3] - x[k];
            cot[fi][k] = u.dot(v) / (2.0 * area);
            vertex_areas[f[k] as usize] += area / 3.0;
        }
        for k in 0..3 {
            let u2 = (x[(k + 1) % 3] - x[k]).norm2();
            let v2 = (x[(k + 2) % 3] - x[k]).norm2();
            circ_areas[f[k] as usize] +=
                (u2 * cot[fi][(k + 2) % 3] + v2 * cot[fi][(k + 1) % 3]) / 8.0;
        }
    }

    let m = cot_laplacian_apply_vec(mesh, &cot, positions);
    let mut w_energy = 0.0;
    let mut s_energy = 0.0;
    for v in 0..nv {
        let ac = circ_areas[v];
        if !(ac > 0.0) {
            return Err(Error::Geometry(format!(
                "vertex {v}: circumcentric area not positive in probe"
            )));
        }
        let h2 = m[v].norm2() / (4.0 * ac * ac);
        w_energy += h2 * vertex_areas[v];
        let s = 1.0 + h2;
        s_energy += s * s * vertex_areas[v];
    }

    let mut value = tw.willmore * w_energy + tw.smoother * s_energy + tw.area * total_area;

    if tw.dirichlet != 0.0 || tw.linear != 0.0 || tw.log_area != 0.0 {
        let alpha: Vec<f64> = (0..nv)
            .map(|v| 0.5 * (vertex_areas[v] / b[v]).ln())
            .collect();
        if tw.dirichlet != 0.0 {
            value +=
                tw.dirichlet * 0.5 * crate::mesh::dirichlet_energy(mesh, &cot, &alpha);
        }
        if tw.linear != 0.0 {
            let lin: f64 = alpha.iter().zip(b).map(|(&a, &bv)| a * bv).sum();
            value += tw.linear * 4.0 * PI * lin;
        }
        if tw.log_area != 0.0 {
            value += tw.log_area * (-2.0 * PI) * total_area.ln();
        }
    }
    Ok(value)
}

/// Exact gradient of the weighted discrete energy with respect to all vertex
/// positions, gauge measures frozen.
pub fn energy_gradient(
    mesh: &TriangulatedSphere,
    positions: &[Vec3],
    b: &[f64],
    tw: &TermWeights,
) -> Result<Vec<Vec3>> {
    let nv = mesh.vertex_count();
    let nf = mesh.face_count();
    let mut cot = vec![[0.0; 3]; nf];
    let mut face_areas = vec![0.0; nf];
    let mut face_normals = vec![Vec3::ZERO; nf];
    let mut vertex_areas = vec![0.0; nv];
    let mut circ_areas = vec![0.0; nv];
    let mut total_area = 0.0;

    for (fi, f) in mesh.faces().iter().enumerate() {
        let x = [
            positions[f[0] as usize],
            positions[f[1] as usize],
            positions[f[2] as usize],
        ];
        let n = (x[1] - x[0]).cross(x[2] - x[0]);
        let two_a = n.norm();
        let area = 0.5 * two_a;
        if !(area > 0.0) {
            return Err(Error::Geometry(format!("face {fi} degenerate")));
        }
        face_areas[fi] = area;
        face_normals[fi] = n / two_a;
        total_area += area;
        for k in 0..3 {
            let u = x[(k + 1) % 3] - x[k];
            let v = x[(k + 2) % 3] - x[k];
            cot[fi][k] = u.dot(v) / (2.0 * area);
            vertex_areas[f[k] as usize] += area / 3.0;
        }
        for k in 0..3 {
            let u2 = (x[(k + 1) % 3] - x[k]).norm2();
            let v2 = (x[(k + 2) % 3] - x[k]).norm2();
            circ_areas[f[k] as usize] +=
                (u2 * cot[fi][(k + 2) % 3] + v2 * cot[fi][(k + 1) % 3]) / 8.0;
        }
    }
    for (v, &a) in circ_areas.iter().enumerate() {
        if !(a > 0.0) {
            return Err(Error::Geometry(format!(
                "vertex {v}: circumcentric area not positive"
            )));
        }
    }

    let needs_alpha = tw.dirichlet != 0.0 || tw.linear != 0.0 || tw.log_area != 0.0;
    let (alpha, l_alpha) = if needs_alpha {
        let alpha: Vec<f64> = (0..nv)
            .map(|v| 0.5 * (vertex_areas[v] / b[v]).ln())
            .collect();
        let la = cot_laplacian_apply_scalar(mesh, &cot, &alpha);
        (alpha, la)
    } else {
        (Vec::new(), Vec::new())
    };

    let m = cot_laplacian_apply_vec(mesh, &cot, positions);

    // adjoints with respect to the integrated curvature m_v, the barycentric
    // area A_v and the circumcentric area A^c_v
    let mut mu = vec![Vec3::ZERO; nv];
    let mut a_adj = vec![0.0; nv];
    let mut circ_adj = vec![0.0; nv];
    for v in 0..nv {
        let a = vertex_areas[v];
        let ac = circ_areas[v];
        let h2 = m[v].norm2() / (4.0 * ac * ac);
        mu[v] = m[v] * ((tw.willmore + 2.0 * tw.smoother * (1.0 + h2)) * a / (2.0 * ac * ac));
        let mut s = tw.willmore * h2 + tw.smoother * (1.0 + h2) * (1.0 + h2);
        if needs_alpha {
            s += (tw.dirichlet * l_alpha[v] + tw.linear * 4.0 * PI * b[v]) / (2.0 * a);
        }
        s += tw.log_area * (-2.0 * PI / total_area);
        s += tw.area;
        a_adj[v] = s;
        circ_adj[v] = -(2.0 * tw.willmore * h2 + 4.0 * tw.smoother * h2 * (1.0 + h2)) * a / ac;
    }

    // explicit position dependence of m = L x with the weights frozen:
    // sum_v mu_v . (L dx)_v = sum_p (L mu)_p . dx_p
    let mut grad = cot_laplacian_apply_vec(mesh, &cot, &mu);

    for (fi, f) in mesh.faces().iter().enumerate() {
        let x = [
            positions[f[0] as usize],
            positions[f[1] as usize],
            positions[f[2] as usize],
        ];
        let nf_hat = face_normals[fi];
        let area = face_areas[fi];
        // gradient of 2*area with respect to each corner
        let g2a = [
            (x[1] - x[2]).cross(nf_hat),
            (x[2] - x[0]).cross(nf_hat),
            (x[0] - x[1]).cross(nf_hat),
        ];

        // barycentric area adjoint
        let area_coeff = (a_adj[f[0] as usize] + a_adj[f[1] as usize] + a_adj[f[2] as usize]) / 3.0;
        for k in 0..3 {
            grad[f[k] as usize] += g2a[k] * (0.5 * area_coeff);
        }

        // cotangent adjoints; the circumcentric corner areas couple the
        // opposite-edge length to each cotangent
        for k in 0..3 {
            let (p, q) = (f[(k + 1) % 3] as usize, f[(k + 2) % 3] as usize);
            let e_pq = positions[p] - positions[q];
            let mut coeff = 0.5 * e_pq.dot(mu[p] - mu[q]);
            coeff += (circ_adj[p] + circ_adj[q]) * e_pq.norm2() / 8.0;
            if tw.dirichlet != 0.0 {
                let da = alpha[p] - alpha[q];
                coeff += tw.dirichlet * 0.25 * da * da;
            }
            // edge-length part of the circumcentric corner areas
            let w_edge = (circ_adj[p] + circ_adj[q]) * cot[fi][k] / 8.0;
            if w_edge != 0.0 {
                grad[p] += e_pq * (2.0 * w_edge);
                grad[q] -= e_pq * (2.0 * w_edge);
            }
            if coeff == 0.0 {
                continue;
            }
            // cot at corner k: (u.v)/(2A) with u, v the edges leaving corner k
            let u = x[(k + 1) % 3] - x[k];
            let v = x[(k + 2) % 3] - x[k];
            let c = cot[fi][k];
            let inv2a = 1.0 / (2.0 * area);
            grad[f[k] as usize] += (-(u + v) - g2a[k] * c) * (inv2a * coeff);
            grad[f[(k + 1) % 3] as usize] += (v - g2a[(k + 1) % 3] * c) * (inv2a * coeff);
            grad[f[(k + 2) % 3] as usize] += (u - g2a[(k + 2) % 3] * c) * (inv2a * coeff);
        }
    }

    Ok(grad)
}

/// The three energy-part gradients plus the area gradient.
#[derive(Debug, Clone)]
pub struct GradParts {
    pub willmore: Vec<Vec3>,
    pub smoother: Vec<Vec3>,
    pub onofri: Vec<Vec3>,
    pub area: Vec<Vec3>,
}

pub fn grad_parts(im: &Immersion, g: &GaugeState) -> Result<GradParts> {
    let b = &g.g0_vertex_area;
    Ok(GradParts {
        willmore: energy_gradient(
            &im.mesh,
            im.positions(),
            b,
            &TermWeights::willmore_only(),
        )?,
        smoother: energy_gradient(
            &im.mesh,
            im.positions(),
            b,
            &TermWeights {
                smoother: 1.0,
                ..Default::default()
            },
        )?,
        onofri: energy_gradient(&im.mesh, im.positions(), b, &TermWeights::onofri_only())?,
        area: energy_gradient(&im.mesh, im.positions(), b, &TermWeights::area_only())?,
    })
}

/// Exact gradient of the relaxed energy.
pub fn grad_analytic(
    im: &Immersion,
    g: &GaugeState,
    p: &ViscosityParams,
) -> Result<VariationField> {
    let tw = TermWeights::relaxed(p);
    let w = energy_gradient(&im.mesh, im.positions(), &g.g0_vertex_area, &tw)?;
    let geo = induced_geometry(im)?;
    Ok(VariationField::new(w, &geo, &im.mesh))
}

/// Central finite-difference gradient of the relaxed energy; the Mobius
/// element is frozen and alpha is recomputed per probe.
pub fn grad_fd(
    im: &Immersion,
    g: &GaugeState,
    p: &ViscosityParams,
    h: f64,
) -> Result<VariationField> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("fd step {h} must be positive")));
    }
    let tw = TermWeights::relaxed(p);
    let w = fd_gradient(&im.mesh, im.positions(), &g.g0_vertex_area, &tw, h)?;
    let geo = induced_geometry(im)?;
    Ok(VariationField::new(w, &geo, &im.mesh))
}

pub fn fd_gradient(
    mesh: &TriangulatedSphere,
    positions: &[Vec3],
    b: &[f64],
    tw: &TermWeights,
    h: f64,
) -> Result<Vec<Vec3>> {
    let nv = mesh.vertex_count();
    let grads: Result<Vec<Vec3>> = (0..nv)
        .into_par_iter()
        .map(|v| {
            let mut pos = positions.to_vec();
            let mut out = [0.0; 3];
            for (c, o) in out.iter_mut().enumerate() {
                let base = match c {
                    0 => positions[v].x,
                    1 => positions[v].y,
                    _ => positions[v].z,
                };
                let set = |pos: &mut Vec<Vec3>, val: f64| match c {
                    0 => pos[v].x = val,
                    1 => pos[v].y = val,
                    _ => pos[v].z = val,
                };
                set(&mut pos, base + h);
                let ep = energy_value(mesh, &pos, b, tw)?;
                set(&mut pos, base - h);
                let em = energy_value(mesh, &pos, b, tw)?;
                set(&mut pos, base);
                *o = (ep - em) / (2.0 * h);
            }
            Ok(Vec3::from_array(out))
        })
        .collect();
    grads
}

/// Smooth probe fields on the reference sphere: coordinate directions and
/// reference normals modulated by polynomials of degree <= 2. Pairing a
/// residual against these and dividing by the probe's Phi-norm measures it
/// in the dual pairing the Palais-Smale machinery uses; pointwise norms of
/// fourth-order residuals never settle on irregular meshes.
pub fn smooth_probe_fields(mesh: &TriangulatedSphere) -> Vec<Vec<Vec3>> {
    let pts = mesh.points();
    let polys: [&dyn Fn(Vec3) -> f64; 10] = [
        &|_| 1.0,
        &|p| p.x,
        &|p| p.y,
        &|p| p.z,
        &|p| p.x * p.y,
        &|p| p.y * p.z,
        &|p| p.z * p.x,
        &|p| p.x * p.x - p.y * p.y,
        &|p| 3.0 * p.z * p.z - 1.0,
        &|p| p.x * p.x - p.z * p.z,
    ];
    let mut fields = Vec::with_capacity(polys.len() * 4 + 6);
    for q in polys {
        for dir in 0..4 {
            let w: Vec<Vec3> = pts
                .iter()
                .map(|&p| {
                    let val = q(p);
                    match dir {
                        0 => crate::geom::v3(val, 0.0, 0.0),
                        1 => crate::geom::v3(0.0, val, 0.0),
                        2 => crate::geom::v3(0.0, 0.0, val),
                        _ => p * val, // radial
                    }
                })
                .collect();
            fields.push(w);
        }
    }
    // off-symmetry lobes: polynomial probes are blind to fields sharing the
    // icosahedral symmetry of the mesh
    let lobes = [
        (crate::geom::v3(0.83, 0.31, 0.46), crate::geom::v3(1.0, -0.4, 0.2)),
        (crate::geom::v3(-0.12, 0.91, -0.39), crate::geom::v3(0.3, 0.8, -0.5)),
        (crate::geom::v3(0.05, -0.55, 0.83), crate::geom::v3(-0.6, 0.1, 0.9)),
    ];
    for (center, dir) in lobes {
        let c = center.normalized();
        for radial in [false, true] {
            let w: Vec<Vec3> = pts
                .iter()
                .map(|&p| {
                    let bump = (-(p - c).norm2() / 0.4).exp();
                    if radial {
                        p * bump
                    } else {
                        dir * bump
                    }
                })
                .collect();
            fields.push(w);
        }
    }
    fields
}

/// Dual-pairing magnitude of a per-vertex density field:
/// max over probes of |int field . w dvol| / ||w||_Phi.
pub fn weak_field_norm(
    mesh: &TriangulatedSphere,
    geo: &DiscreteGeometry,
    field: &[Vec3],
) -> f64 {
    let mut best = 0.0f64;
    for w in smooth_probe_fields(mesh) {
        let wnorm = phi_norm(mesh, geo, &w);
        if !(wnorm > 0.0) {
            continue;
        }
        let pairing: f64 = field
            .iter()
            .zip(&w)
            .zip(&geo.vertex_areas)
            .map(|((r, wv), a)| r.dot(*wv) * a)
            .sum();
        best = best.max(pairing.abs() / wnorm);
    }
    best
}

/// Dual-pairing magnitude of an integrated gradient (covector):
/// max over probes of |<grad, w>| / ||w||_Phi.
pub fn weak_gradient_norm(
    mesh: &TriangulatedSphere,
    geo: &DiscreteGeometry,
    grad: &[Vec3],
) -> f64 {
    let mut best = 0.0f64;
    for w in smooth_probe_fields(mesh) {
        let wnorm = phi_norm(mesh, geo, &w);
        if !(wnorm > 0.0) {
            continue;
        }
        let pairing: f64 = grad.iter().zip(&w).map(|(g, wv)| g.dot(*wv)).sum();
        best = best.max(pairing.abs() / wnorm);
    }
    best
}

/// Lagrange multiplier of the unit-area constraint at a relaxed critical
/// point: 2 sigma^2 int (1 - |H|^4) dvol + l_sigma K0 int alpha dvol_g0
/// - l_sigma K0.
pub fn lagrange_multiplier(im: &Immersion, g: &GaugeState, p: &ViscosityParams) -> Result<f64> {
    if !p.area_constrained {
        return Err(Error::Parameter(
            "lagrange_multiplier requires area_constrained params".into(),
        ));
    }
    let geo = induced_geometry(im)?;
    if !is_balanced(im, &geo, g) {
        return Err(Error::Gauge(
            "lagrange_multiplier requires an Aubin gauge".into(),
        ));
    }
    lagrange_multiplier_with_geo(im, &geo, g, p)
}

pub fn lagrange_multiplier_with_geo(
    _im: &Immersion,
    geo: &DiscreteGeometry,
    g: &GaugeState,
    p: &ViscosityParams,
) -> Result<f64> {
    let k0 = 4.0 * PI;
    let quartic: f64 = geo
        .mean_curvature_vec
        .iter()
        .zip(&geo.vertex_areas)
        .map(|(h, a)| (1.0 - h.norm2() * h.norm2()) * a)
        .sum();
    let alpha_mean: f64 = g
        .alpha
        .iter()
        .zip(&g.g0_vertex_area)
        .map(|(&a, &b)| a * b)
        .sum();
    Ok(2.0 * p.sigma * p.sigma * quartic + p.l_sigma * k0 * alpha_mean - p.l_sigma * k0)
}
