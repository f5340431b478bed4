//! Reference sphere meshes, immersions and discrete metric quantities.
//!
//! A `TriangulatedSphere` is the domain: a closed oriented genus-0 triangle
//! mesh whose reference points live on the unit sphere. An `Immersion` pins a
//! position in R^3 to every vertex. `DiscreteGeometry` derives the metric
//! data: cotangent weights, barycentric vertex areas, the mean curvature
//! vector H = (L x) / (2 A_v) from the cotangent Laplacian, vertex normals,
//! angle-defect Gauss curvature and a per-face second fundamental form.
//!
//! Sign convention: vertex normals average the incident face normals
//! (weights 1/(|e1|^2 |e2|^2), exact on spheres), faces are oriented so
//! normals point outward for convex shapes, and the scalar mean curvature is
//! H = <H_vec, n>. The unit sphere then has H = +1 and Willmore energy
//! 4*pi. The mean curvature vector itself is half the (positive) cotangent
//! Laplacian of the positions over the circumcentric dual area, which makes
//! it the negative of the analysts' (1/2) lap Phi; formulas with terms odd
//! in the scalar curvature account for the flip where they are evaluated.

pub mod io;
pub mod mobius;

use crate::error::{Error, Result};
use crate::geom::{v3, Vec3};
use std::collections::HashMap;
use std::sync::Arc;

/// Face area below `DEGENERACY_FACTOR * (total_area / face_count)` is an error.
pub const DEGENERACY_FACTOR: f64 = 1e-12;

/// Reference points must sit on the unit sphere within this tolerance.
pub const UNIT_SPHERE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TriangulatedSphere {
    points: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    edges: Vec<[u32; 2]>,
    subdivision_level: Option<u32>,
    vertex_ref_areas: Vec<f64>,
    ref_total_area: f64,
}

impl TriangulatedSphere {
    /// Validates and builds a reference sphere mesh.
    ///
    /// Checks: unit-norm reference points, every directed edge used exactly
    /// once (closed oriented surface), Euler characteristic V - E + F = 2.
    pub fn new(points: Vec<Vec3>, faces: Vec<[u32; 3]>, level: Option<u32>) -> Result<Self> {
        let nv = points.len();
        if nv < 4 || faces.len() < 4 {
            return Err(Error::Parameter(format!(
                "mesh too small: {} vertices, {} faces",
                nv,
                faces.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if (p.norm() - 1.0).abs() > UNIT_SPHERE_TOL {
                return Err(Error::Geometry(format!(
                    "reference point {i} off the unit sphere by {:.3e}",
                    (p.norm() - 1.0).abs()
                )));
            }
        }
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                if a as usize >= nv || b as usize >= nv {
                    return Err(Error::Parameter(format!(
                        "face {fi} references vertex out of range"
                    )));
                }
                if a == b {
                    return Err(Error::Parameter(format!("face {fi} is degenerate")));
                }
                if directed.insert((a, b), fi as u32).is_some() {
                    return Err(Error::Geometry(format!(
                        "directed edge ({a},{b}) used twice; surface not oriented"
                    )));
                }
            }
        }
        let mut edges = Vec::new();
        for &(a, b) in directed.keys() {
            if a < b {
                if !directed.contains_key(&(b, a)) {
                    return Err(Error::Geometry(format!(
                        "edge ({a},{b}) has no opposite; surface not closed"
                    )));
                }
                edges.push([a, b]);
            }
        }
        edges.sort_unstable();
        let ne = edges.len();
        let euler = nv as i64 - ne as i64 + faces.len() as i64;
        if euler != 2 {
            return Err(Error::Geometry(format!(
                "Euler characteristic {euler} != 2; not a sphere"
            )));
        }

        // Barycentric reference areas of the reference embedding.
        let mut vertex_ref_areas = vec![0.0; nv];
        let mut ref_total_area = 0.0;
        for f in &faces {
            let a = triangle_area(
                points[f[0] as usize],
                points[f[1] as usize],
                points[f[2] as usize],
            );
            ref_total_area += a;
            for &v in f {
                vertex_ref_areas[v as usize] += a / 3.0;
            }
        }

        Ok(TriangulatedSphere {
            points,
            faces,
            edges,
            subdivision_level: level,
            vertex_ref_areas,
            ref_total_area,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    pub fn subdivision_level(&self) -> Option<u32> {
        self.subdivision_level
    }

    /// Barycentric vertex areas of the reference embedding.
    pub fn vertex_ref_areas(&self) -> &[f64] {
        &self.vertex_ref_areas
    }

    pub fn ref_total_area(&self) -> f64 {
        self.ref_total_area
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<u32>> {
        let mut vf = vec![Vec::new(); self.points.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v as usize].push(fi as u32);
            }
        }
        vf
    }

    /// Map from directed edge (a,b) to the index of the face containing it.
    pub fn directed_edge_faces(&self) -> HashMap<(u32, u32), u32> {
        let mut m = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                m.insert((f[k], f[(k + 1) % 3]), fi as u32);
            }
        }
        m
    }
}

/// Icosahedron subdivided `level` times, vertices projected to the unit sphere.
pub fn build_icosphere(level: u32) -> Result<Arc<TriangulatedSphere>> {
    if level > 8 {
        return Err(Error::Parameter(format!(
            "subdivision level {level} out of range [0, 8]"
        )));
    }
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut points: Vec<Vec3> = [
        v3(-1.0, phi, 0.0),
        v3(1.0, phi, 0.0),
        v3(-1.0, -phi, 0.0),
        v3(1.0, -phi, 0.0),
        v3(0.0, -1.0, phi),
        v3(0.0, 1.0, phi),
        v3(0.0, -1.0, -phi),
        v3(0.0, 1.0, -phi),
        v3(phi, 0.0, -1.0),
        v3(phi, 0.0, 1.0),
        v3(-phi, 0.0, -1.0),
        v3(-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|p| p.normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let p = (points[a as usize] + points[b as usize]).normalized();
                    points.push(p);
                    (points.len() - 1) as u32
                });
            }
            let (i, j, k) = (f[0], f[1], f[2]);
            let (mij, mjk, mki) = (mid[0], mid[1], mid[2]);
            next_faces.push([i, mij, mki]);
            next_faces.push([j, mjk, mij]);
            next_faces.push([k, mki, mjk]);
            next_faces.push([mij, mjk, mki]);
        }
        faces = next_faces;
    }

    Ok(Arc::new(TriangulatedSphere::new(
        points,
        faces,
        Some(level),
    )?))
}

/// Vertex positions in R^3 over a shared reference sphere.
#[derive(Debug, Clone)]
pub struct Immersion {
    pub mesh: Arc<TriangulatedSphere>,
    positions: Vec<Vec3>,
}

impl Immersion {
    /// Validates face non-degeneracy against the area threshold.
    pub fn new(mesh: Arc<TriangulatedSphere>, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != mesh.vertex_count() {
            return Err(Error::Parameter(format!(
                "positions length {} != vertex count {}",
                positions.len(),
                mesh.vertex_count()
            )));
        }
        let im = Immersion { mesh, positions };
        im.check_degeneracy()?;
        Ok(im)
    }

    fn check_degeneracy(&self) -> Result<()> {
        let mut areas = Vec::with_capacity(self.mesh.face_count());
        let mut total = 0.0;
        for f in self.mesh.faces() {
            let a = triangle_area(self.pos(f[0]), self.pos(f[1]), self.pos(f[2]));
            total += a;
            areas.push(a);
        }
        let threshold = DEGENERACY_FACTOR * total / self.mesh.face_count() as f64;
        for (fi, &a) in areas.iter().enumerate() {
            if !(a > threshold) {
                return Err(Error::Geometry(format!(
                    "face {fi} degenerate: area {a:.3e} below threshold {threshold:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// The reference sphere embedded as-is (positions = reference points).
    pub fn reference_sphere(mesh: Arc<TriangulatedSphere>) -> Result<Self> {
        let positions = mesh.points().to_vec();
        Immersion::new(mesh, positions)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn pos(&self, v: u32) -> Vec3 {
        self.positions[v as usize]
    }

    /// Same mesh, new positions (validated).
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        Immersion::new(self.mesh.clone(), positions)
    }

    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        self.with_positions(self.positions.iter().map(|&p| f(p)).collect())
    }

    /// Enclosed signed volume, (1/6) sum det(x_i, x_j, x_k). Orientation probe
    /// for eversion endpoints.
    pub fn signed_volume(&self) -> f64 {
        let mut v = 0.0;
        for f in self.mesh.faces() {
            let (a, b, c) = (self.pos(f[0]), self.pos(f[1]), self.pos(f[2]));
            v += a.dot(b.cross(c));
        }
        v / 6.0
    }

    pub fn diameter(&self) -> f64 {
        let mut lo = self.positions[0];
        let mut hi = self.positions[0];
        for p in &self.positions {
            lo = v3(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = v3(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (hi - lo).norm()
    }
}

pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * (b - a).cross(c - a).norm()
}

/// Derived per-vertex / per-face metric data of an immersion.
#[derive(Debug, Clone)]
pub struct DiscreteGeometry {
    pub face_areas: Vec<f64>,
    /// Barycentric dual areas: the measure for all energy integrals.
    pub vertex_areas: Vec<f64>,
    /// Circumcentric (signed Voronoi) dual areas: the mass matrix matching
    /// the cotangent operator. Pointwise curvature densities use these;
    /// barycentric masses leave a persistent error at the twelve valence-5
    /// vertices of an icosphere.
    pub circ_vertex_areas: Vec<f64>,
    /// Mean curvature vector H_vec = (L x)_v / (2 A^circ_v).
    pub mean_curvature_vec: Vec<Vec3>,
    /// Signed scalar H = <H_vec, n>.
    pub mean_curvature: Vec<f64>,
    /// Unit vertex normals (area-weighted face normals).
    pub normals: Vec<Vec3>,
    pub face_normals: Vec<Vec3>,
    /// Orthonormal in-plane frame (e1, e2) per face; (e1, e2, n) right-handed.
    pub face_frames: Vec<(Vec3, Vec3)>,
    /// Per-face second fundamental form [I11, I12, I22] in the face frame.
    pub second_fundamental: Vec<[f64; 3]>,
    /// Per-vertex log conformal factor vs the reference embedding.
    pub log_conformal: Vec<f64>,
    /// Angle defect over barycentric vertex area.
    pub gauss_curvature: Vec<f64>,
    pub total_area: f64,
    /// Per-face corner cotangents, cot[f][k] at corner k of face f.
    pub cot: Vec<[f64; 3]>,
    /// Piecewise-linear hat gradients per face corner.
    pub hat_gradients: Vec<[Vec3; 3]>,
}

impl DiscreteGeometry {
    /// Bending energy density integral: sum_e w_e |dn|^2 = int |dn|^2 dvol.
    pub fn gauss_map_dirichlet(&self, mesh: &TriangulatedSphere) -> f64 {
        let mut total = 0.0;
        for (fi, f) in mesh.faces().iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[(k + 1) % 3] as usize, f[(k + 2) % 3] as usize);
                let dn = self.normals[a] - self.normals[b];
                total += 0.5 * self.cot[fi][k] * dn.norm2();
            }
        }
        total
    }

    /// Per-vertex share of int |dn|^2, splitting each edge term in half.
    pub fn bending_per_vertex(&self, mesh: &TriangulatedSphere) -> Vec<f64> {
        let mut out = vec![0.0; self.vertex_areas.len()];
        for (fi, f) in mesh.faces().iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[(k + 1) % 3] as usize, f[(k + 2) % 3] as usize);
                let dn = self.normals[a] - self.normals[b];
                let term = 0.5 * self.cot[fi][k] * dn.norm2();
                out[a] += 0.5 * term;
                out[b] += 0.5 * term;
            }
        }
        out
    }
}

/// Applies the PSD cotangent operator row-wise: (L u)_v = sum_e w_e (u_v - u_w).
pub fn cot_laplacian_apply_scalar(
    mesh: &TriangulatedSphere,
    cot: &[[f64; 3]],
    u: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let w = 0.5 * cot[fi][k];
            let (a, b) = (f[(k + 1) % 3] as usize, f[(k + 2) % 3] as usize);
            let d = w * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        }
    }
    out
}

pub fn cot_laplacian_apply_vec(
    mesh: &TriangulatedSphere,
    cot: &[[f64; 3]],
    u: &[Vec3],
) -> Vec<Vec3> {
    let mut out = vec![Vec3::ZERO; u.len()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let w = 0.5 * cot[fi][k];
            let (a, b) = (f[(k + 1) % 3] as usize, f[(k + 2) % 3] as usize);
            let d = (u[a] - u[b]) * w;
            out[a] += d;
            out[b] -= d;
        }
    }
    out
}

/// Dirichlet energy int |du|^2 dvol = sum_e w_e (u_a - u_b)^2.
pub fn dirichlet_energy(mesh: &TriangulatedSphere, cot: &[[f64; 3]], u: &[f64]) -> f64 {
    let mut total = 0.0;
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[(k + 1) % 3] as usize, f[(k + 2) % 3] as usize);
            let d = u[a] - u[b];
            total += 0.5 * cot[fi][k] * d * d;
        }
    }
    total
}

/// Computes all derived metric quantities of an immersion.
pub fn induced_geometry(im: &Immersion) -> Result<DiscreteGeometry> {
    let mesh = &*im.mesh;
    let nv = mesh.vertex_count();
    let nf = mesh.face_count();

    let mut face_areas = vec![0.0; nf];
    let mut face_normals = vec![Vec3::ZERO; nf];
    let mut face_frames = vec![(Vec3::ZERO, Vec3::ZERO); nf];
    let mut cot = vec![[0.0; 3]; nf];
    let mut hat_gradients = vec![[Vec3::ZERO; 3]; nf];
    let mut vertex_areas = vec![0.0; nv];
    let mut circ_vertex_areas = vec![0.0; nv];
    let mut normals = vec![Vec3::ZERO; nv];
    let mut angle_sum = vec![0.0; nv];
    let mut total_area = 0.0;

    for (fi, f) in mesh.faces().iter().enumerate() {
        let x = [im.pos(f[0]), im.pos(f[1]), im.pos(f[2])];
        let n = (x[1] - x[0]).cross(x[2] - x[0]);
        let two_a = n.norm();
        let area = 0.5 * two_a;
        face_areas[fi] = area;
        total_area += area;
    }
    let threshold = DEGENERACY_FACTOR * total_area / nf as f64;

    for (fi, f) in mesh.faces().iter().enumerate() {
        let x = [im.pos(f[0]), im.pos(f[1]), im.pos(f[2])];
        let nraw = (x[1] - x[0]).cross(x[2] - x[0]);
        let area = face_areas[fi];
        if !(area > threshold) {
            return Err(Error::Geometry(format!(
                "face {fi} degenerate: area {area:.3e}"
            )));
        }
        let nf_hat = nraw / (2.0 * area);
        face_normals[fi] = nf_hat;
        let e1 = (x[1] - x[0]).normalized();
        let e2 = nf_hat.cross(e1);
        face_frames[fi] = (e1, e2);

        for k in 0..3 {
            let xk = x[k];
            let u = x[(k + 1) % 3] - xk;
            let v = x[(k + 2) % 3] - xk;
            cot[fi][k] = u.dot(v) / (2.0 * area);
            let cosang = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0);
            angle_sum[f[k] as usize] += cosang.acos();
            // hat gradient of the corner-k basis function
            let opp = x[(k + 2) % 3] - x[(k + 1) % 3];
            hat_gradients[fi][k] = nf_hat.cross(opp) / (2.0 * area);
        }
        // signed circumcentric corner areas; the three sum to the face area
        for k in 0..3 {
            let u2 = (x[(k + 1) % 3] - x[k]).norm2();
            let v2 = (x[(k + 2) % 3] - x[k]).norm2();
            circ_vertex_areas[f[k] as usize] +=
                (u2 * cot[fi][(k + 2) % 3] + v2 * cot[fi][(k + 1) % 3]) / 8.0;
        }
        for (k, &v) in f.iter().enumerate() {
            vertex_areas[v as usize] += area / 3.0;
            // face-normal average with weights exact for stars inscribed in
            // a sphere (area weights leave an O(h) error that never refines
            // away on irregular stars)
            let u2 = (x[(k + 1) % 3] - x[k]).norm2();
            let v2 = (x[(k + 2) % 3] - x[k]).norm2();
            normals[v as usize] += nraw / (u2 * v2);
        }
    }

    for (vi, &a) in circ_vertex_areas.iter().enumerate() {
        if !(a > 0.0) {
            return Err(Error::Geometry(format!(
                "vertex {vi}: circumcentric dual area {a:.3e} not positive"
            )));
        }
    }

    for (vi, n) in normals.iter_mut().enumerate() {
        *n = n.try_normalized(1e-300).ok_or_else(|| {
            Error::Geometry(format!("vertex {vi}: area-weighted normal vanished"))
        })?;
    }

    let lx = cot_laplacian_apply_vec(mesh, &cot, im.positions());
    let mut mean_curvature_vec = vec![Vec3::ZERO; nv];
    let mut mean_curvature = vec![0.0; nv];
    for v in 0..nv {
        mean_curvature_vec[v] = lx[v] / (2.0 * circ_vertex_areas[v]);
        mean_curvature[v] = mean_curvature_vec[v].dot(normals[v]);
    }

    let mut gauss_curvature = vec![0.0; nv];
    let mut log_conformal = vec![0.0; nv];
    for v in 0..nv {
        gauss_curvature[v] = (2.0 * std::f64::consts::PI - angle_sum[v]) / vertex_areas[v];
        log_conformal[v] = 0.5 * (vertex_areas[v] / mesh.vertex_ref_areas()[v]).ln();
    }

    // Second fundamental form per face: symmetrized gradient of the vertex
    // normal field against the face frame.
    let mut second_fundamental = vec![[0.0; 3]; nf];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let (e1, e2) = face_frames[fi];
        let mut d1 = Vec3::ZERO; // directional derivative of n along e1
        let mut d2 = Vec3::ZERO;
        for k in 0..3 {
            let g = hat_gradients[fi][k];
            let nv_k = normals[f[k] as usize];
            d1 += nv_k * g.dot(e1);
            d2 += nv_k * g.dot(e2);
        }
        let m11 = d1.dot(e1);
        let m22 = d2.dot(e2);
        let m12 = 0.5 * (d1.dot(e2) + d2.dot(e1));
        second_fundamental[fi] = [m11, m12, m22];
    }

    Ok(DiscreteGeometry {
        face_areas,
        vertex_areas,
        circ_vertex_areas,
        mean_curvature_vec,
        mean_curvature,
        normals,
        face_normals,
        face_frames,
        second_fundamental,
        log_conformal,
        gauss_curvature,
        total_area,
        cot,
        hat_gradients,
    })
}

/// Stable 64-bit content hash of mesh combinatorics and positions (FNV-1a).
pub fn content_hash(im: &Immersion) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for f in im.mesh.faces() {
        for &v in f {
            eat(&v.to_le_bytes());
        }
    }
    for p in im.positions() {
        eat(&p.x.to_bits().to_le_bytes());
        eat(&p.y.to_bits().to_le_bytes());
        eat(&p.z.to_bits().to_le_bytes());
    }
    h
}
