//! Flux residues around edge loops.
//!
//! A loop is a simple cycle of vertices joined by mesh edges. The flux of a
//! per-face field across the loop uses the midpoint rule on each edge, with
//! field values and the conormal taken from the face to the left of the
//! walking direction; the conormal points out of that face, so the residue
//! measures outward flux through the loop.
//!
//! The Willmore residue integrand, in the outward-normal convention of this
//! crate, is  d_nu H_vec - 2 H d_nu n + H^2 d_nu Phi ; it vanishes
//! identically on round spheres and detects the inverted catenoid's center.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{induced_geometry, DiscreteGeometry, Immersion};
use crate::variation::forms::{d_phi, d_vector, VecForm1};

/// A simple edge cycle given by vertex indices.
#[derive(Debug, Clone)]
pub struct EdgeLoop {
    vertices: Vec<u32>,
}

impl EdgeLoop {
    /// Validates: at least 3 vertices, no repeats, consecutive pairs (and the
    /// closing pair) are mesh edges.
    pub fn new(im: &Immersion, vertices: Vec<u32>) -> Result<EdgeLoop> {
        if vertices.len() < 3 {
            return Err(Error::Parameter("loop needs at least 3 vertices".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &v in &vertices {
            if v as usize >= im.mesh.vertex_count() {
                return Err(Error::Parameter(format!("loop vertex {v} out of range")));
            }
            if !seen.insert(v) {
                return Err(Error::Parameter(format!(
                    "loop revisits vertex {v}; not a simple cycle"
                )));
            }
        }
        let edge_face = im.mesh.directed_edge_faces();
        for i in 0..vertices.len() {
            let a = vertices[i];
            let b = vertices[(i + 1) % vertices.len()];
            if !edge_face.contains_key(&(a, b)) && !edge_face.contains_key(&(b, a)) {
                return Err(Error::Parameter(format!(
                    "({a},{b}) is not a mesh edge"
                )));
            }
        }
        Ok(EdgeLoop { vertices })
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    /// Boundary of the polar cap of reference points with z above `z0`,
    /// oriented so the cap lies on the left of the walk.
    pub fn cap_boundary(im: &Immersion, z0: f64) -> Result<EdgeLoop> {
        Self::cap_boundary_about(im, crate::geom::v3(0.0, 0.0, 1.0), z0)
    }

    /// Cap boundary about an arbitrary reference axis: faces whose reference
    /// centroid satisfies <c, axis> > threshold are "in". Caps about a
    /// symmetry axis of the mesh give loops whose discretization noise
    /// cancels by symmetry.
    pub fn cap_boundary_about(im: &Immersion, axis: Vec3, z0: f64) -> Result<EdgeLoop> {
        let axis = axis.normalized();
        let pts = im.mesh.points();
        let in_face = |f: &[u32; 3]| -> bool {
            (pts[f[0] as usize] + pts[f[1] as usize] + pts[f[2] as usize]).dot(axis) / 3.0 > z0
        };
        let edge_face = im.mesh.directed_edge_faces();
        // boundary edges directed with the in-face's orientation
        let mut next: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
        let mut count = 0usize;
        for f in im.mesh.faces() {
            if !in_face(f) {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let opposite = edge_face[&(b, a)] as usize;
                if !in_face(&im.mesh.faces()[opposite]) {
                    if next.insert(a, b).is_some() {
                        return Err(Error::Parameter(
                            "cap boundary is not a simple cycle; move z0".into(),
                        ));
                    }
                    count += 1;
                }
            }
        }
        let &start = next
            .keys()
            .min()
            .ok_or_else(|| Error::Parameter("cap boundary is empty; move z0".into()))?;
        let mut path = vec![start];
        let mut cur = next[&start];
        while cur != start {
            path.push(cur);
            cur = *next
                .get(&cur)
                .ok_or_else(|| Error::Parameter("cap boundary walk broke".into()))?;
        }
        if path.len() != count {
            return Err(Error::Parameter(
                "cap boundary has several components; move z0".into(),
            ));
        }
        EdgeLoop::new(im, path)
    }
}

/// The face left of the directed edge a -> b: the face containing the
/// directed edge (a, b) in its own orientation.
fn left_face(
    edge_face: &std::collections::HashMap<(u32, u32), u32>,
    a: u32,
    b: u32,
) -> Result<usize> {
    edge_face
        .get(&(a, b))
        .map(|&f| f as usize)
        .ok_or_else(|| Error::Parameter(format!("({a},{b}) is not a directed edge")))
}

/// Willmore flux residue of the loop: the line integral of the Noether
/// one-form *d[2Hn] - 4H *dn - 2H^2 *dPhi over two. Expanding the first
/// term shows the integrand is d_nu H_vec - 2H d_nu n - H^2 d_nu Phi with
/// H_vec realized as H n; the normal projection discards the rough
/// tangential part of the raw curvature vector, which otherwise swamps the
/// flux on fine meshes.
pub fn willmore_residue(im: &Immersion, lp: &EdgeLoop) -> Result<Vec3> {
    let geo = induced_geometry(im)?;
    willmore_residue_with_geo(im, &geo, lp)
}

pub fn willmore_residue_with_geo(
    im: &Immersion,
    geo: &DiscreteGeometry,
    lp: &EdgeLoop,
) -> Result<Vec3> {
    // scalar curvature in the (1/2) lap Phi pairing
    let h: Vec<f64> = geo.mean_curvature.iter().map(|&t| -t).collect();
    let hn: Vec<Vec3> = (0..h.len()).map(|v| geo.normals[v] * h[v]).collect();
    let edge_face = im.mesh.directed_edge_faces();
    let n = lp.vertices().len();
    let mut total = Vec3::ZERO;
    for i in 0..n {
        let a = lp.vertices()[i];
        let b = lp.vertices()[(i + 1) % n];
        let fi = left_face(&edge_face, a, b)?;
        let face = im.mesh.faces()[fi];
        let (e1, e2) = geo.face_frames[fi];
        let hf = (h[face[0] as usize] + h[face[1] as usize] + h[face[2] as usize]) / 3.0;
        let dl = {
            let t1 = d_vector(geo, face, fi, &hn).star();
            let t2 = d_vector(geo, face, fi, &geo.normals).star().scale(-2.0 * hf);
            let t3 = d_phi(geo, fi).star().scale(-(hf * hf));
            VecForm1(t1.0 + t2.0 + t3.0, t1.1 + t2.1 + t3.1)
        };
        let edge = im.pos(b) - im.pos(a);
        total += dl.eval(edge.dot(e1), edge.dot(e2));
    }
    Ok(total)
}

/// First-residue integrand: d_nu H_vec - c P_n(d_nu H_vec) + d_tau n x H_vec
/// with c = 1 by default and c = 3 behind the switch. H_vec enters in the
/// (1/2) lap Phi pairing and nu is the conormal into the left face; with
/// these orientations the integrand vanishes pointwise on round spheres.
pub fn first_residue(im: &Immersion, lp: &EdgeLoop, triple_coefficient: bool) -> Result<Vec3> {
    let geo = induced_geometry(im)?;
    first_residue_with_geo(im, &geo, lp, triple_coefficient)
}

pub fn first_residue_with_geo(
    im: &Immersion,
    geo: &DiscreteGeometry,
    lp: &EdgeLoop,
    triple_coefficient: bool,
) -> Result<Vec3> {
    let c = if triple_coefficient { 3.0 } else { 1.0 };
    let edge_face = im.mesh.directed_edge_faces();
    // H_vec realized as H n in the (1/2) lap Phi pairing
    let h: Vec<f64> = geo.mean_curvature.iter().map(|&t| -t).collect();
    let hn: Vec<Vec3> = (0..h.len()).map(|v| geo.normals[v] * h[v]).collect();
    let n = lp.vertices().len();
    let mut total = Vec3::ZERO;
    for i in 0..n {
        let a = lp.vertices()[i];
        let b = lp.vertices()[(i + 1) % n];
        let fi = left_face(&edge_face, a, b)?;
        let face = im.mesh.faces()[fi];
        let (e1, e2) = geo.face_frames[fi];
        let edge = im.pos(b) - im.pos(a);
        let len = edge.norm();
        let tangent = edge / len;
        let nu = geo.face_normals[fi].cross(tangent);

        let dh = d_vector(geo, face, fi, &hn);
        let dn = d_vector(geo, face, fi, &geo.normals);
        let dnu_h = dh.eval(nu.dot(e1), nu.dot(e2));
        let dtau_n = dn.eval(tangent.dot(e1), tangent.dot(e2));
        let nf = geo.face_normals[fi];
        let h_face =
            (hn[face[0] as usize] + hn[face[1] as usize] + hn[face[2] as usize]) / 3.0;
        let integrand = dnu_h - nf * (c * nf.dot(dnu_h)) + dtau_n.cross(h_face);
        total += integrand * len;
    }
    Ok(total)
}
