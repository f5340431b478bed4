//! Mobius group actions on R^3 and on the unit sphere.
//!
//! `MobiusS2` is a positive conformal transformation of S^2 in the ball
//! model: a pure translation part `a` in the open unit ball followed by a
//! rotation. The translation part acts as
//!
//!   boost_a(p) = (1 - |a|^2)(p + a) / |p + a|^2 + a
//!
//! which on the sphere coincides with Mobius gyro-addition a (+) p. Points
//! concentrate toward a/|a| as |a| -> 1, and the metric scales by
//! rho_a(p)^2 with rho_a(p) = (1 - |a|^2) / |p + a|^2.

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::mesh::{Immersion, TriangulatedSphere};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Ambient Mobius transformation of R^3.
#[derive(Debug, Clone)]
pub enum MobiusR3 {
    Similarity {
        rot: Mat3,
        /// scale factor e^t
        scale: f64,
        translation: Vec3,
    },
    Inversion {
        center: Vec3,
        radius: f64,
    },
}

impl MobiusR3 {
    pub fn identity() -> Self {
        MobiusR3::Similarity {
            rot: Mat3::IDENTITY,
            scale: 1.0,
            translation: Vec3::ZERO,
        }
    }

    pub fn dilation(t: f64) -> Self {
        MobiusR3::Similarity {
            rot: Mat3::IDENTITY,
            scale: t.exp(),
            translation: Vec3::ZERO,
        }
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        match self {
            MobiusR3::Similarity {
                rot,
                scale,
                translation,
            } => rot.apply(p) * *scale + *translation,
            MobiusR3::Inversion { center, radius } => {
                let d = p - *center;
                *center + d * (radius * radius / d.norm2())
            }
        }
    }
}

/// Applies an ambient Mobius map to all positions. Inversions require the
/// center to stay clear of the surface.
pub fn apply_mobius_r3(im: &Immersion, m: &MobiusR3) -> Result<Immersion> {
    if let MobiusR3::Similarity { rot, scale, .. } = m {
        if rot.orthogonality_defect() > 1e-9 {
            return Err(Error::Parameter("similarity rotation not in SO(3)".into()));
        }
        if !(*scale > 0.0) {
            return Err(Error::Parameter(format!("similarity scale {scale} <= 0")));
        }
    }
    if let MobiusR3::Inversion { center, .. } = m {
        let min_d2 = im
            .positions()
            .iter()
            .map(|p| (*p - *center).norm2())
            .fold(f64::INFINITY, f64::min);
        let threshold = 1e-9 * im.diameter();
        if min_d2.sqrt() <= threshold {
            return Err(Error::Geometry(format!(
                "inversion center within {:.3e} of the surface",
                min_d2.sqrt()
            )));
        }
    }
    im.map_positions(|p| m.apply_point(p))
}

/// Positive conformal transformation of S^2: rotation composed with a ball
/// translation, p -> rot * boost_a(p).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MobiusS2 {
    pub a: Vec3,
    pub rot: Mat3,
}

/// Mobius gyro-addition on the unit ball (non-commutative).
pub fn mobius_add(u: Vec3, v: Vec3) -> Vec3 {
    let uv = u.dot(v);
    let u2 = u.norm2();
    let v2 = v.norm2();
    let denom = 1.0 + 2.0 * uv + u2 * v2;
    (u * (1.0 + 2.0 * uv + v2) + v * (1.0 - u2)) / denom
}

impl MobiusS2 {
    pub fn identity() -> Self {
        MobiusS2 {
            a: Vec3::ZERO,
            rot: Mat3::IDENTITY,
        }
    }

    pub fn translation(a: Vec3) -> Result<Self> {
        let m = MobiusS2 {
            a,
            rot: Mat3::IDENTITY,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.norm() < 1.0) {
            return Err(Error::Parameter(format!(
                "ball parameter |a| = {} not < 1",
                self.a.norm()
            )));
        }
        if self.rot.orthogonality_defect() > 1e-9 {
            return Err(Error::Parameter("rot is not a proper rotation".into()));
        }
        Ok(())
    }

    fn boost(a: Vec3, p: Vec3) -> Vec3 {
        let q = p + a;
        (q * ((1.0 - a.norm2()) / q.norm2()) + a).normalized()
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.rot.apply(Self::boost(self.a, p))
    }

    /// Conformal metric scale factor of the map at reference point p.
    pub fn conformal_factor(&self, p: Vec3) -> f64 {
        (1.0 - self.a.norm2()) / (p + self.a).norm2()
    }

    /// Inverse in the form rot' * boost_{a'}: rot' = rot^T, a' = -rot a.
    pub fn inverse(&self) -> MobiusS2 {
        MobiusS2 {
            a: -self.rot.apply(self.a),
            rot: self.rot.transpose(),
        }
    }

    /// Group composition self . other (apply `other` first), renormalized to
    /// the rot * boost form through the gyration rotation.
    pub fn compose(&self, other: &MobiusS2) -> MobiusS2 {
        // self.rot B_{a1} other.rot B_{a2}
        //   = self.rot other.rot B_u B_{a2}          with u = other.rot^T a1
        //   = self.rot other.rot Gyr B_{Gyr^T (u+a2)} with (+) the gyro-addition
        let u = other.rot.transpose().apply(self.a);
        let v = other.a;
        let sum = mobius_add(u, v);
        // gyration gyr[u, v] x = -(u+v) (+) (u (+) (v (+) x)), built columnwise
        let mut cols = [[0.0; 3]; 3];
        let basis = [
            crate::geom::v3(1.0, 0.0, 0.0),
            crate::geom::v3(0.0, 1.0, 0.0),
            crate::geom::v3(0.0, 0.0, 1.0),
        ];
        for (j, &e) in basis.iter().enumerate() {
            let g = mobius_add(-sum, mobius_add(u, mobius_add(v, e * 0.5))) * 2.0;
            cols[j] = g.to_array();
        }
        let gyr = Mat3 {
            m: [
                [cols[0][0], cols[1][0], cols[2][0]],
                [cols[0][1], cols[1][1], cols[2][1]],
                [cols[0][2], cols[1][2], cols[2][2]],
            ],
        };
        MobiusS2 {
            rot: self.rot.mul(&other.rot).mul(&gyr),
            a: gyr.transpose().apply(sum),
        }
    }
}

/// Moves the reference points of a mesh by a sphere Mobius map; the
/// combinatorics are unchanged.
pub fn apply_mobius_s2(
    mesh: &TriangulatedSphere,
    m: &MobiusS2,
) -> Result<Arc<TriangulatedSphere>> {
    m.validate()?;
    let points = mesh.points().iter().map(|&p| m.apply_point(p)).collect();
    Ok(Arc::new(TriangulatedSphere::new(
        points,
        mesh.faces().to_vec(),
        mesh.subdivision_level(),
    )?))
}
