//! Analytic test surfaces sampled onto icosphere combinatorics.
//!
//! The inverted catenoid: the catenoid (cosh v cos u, cosh v sin u, v) is
//! parametrized over the reference sphere through the conformal cylinder map
//! u = longitude, v = artanh(z), then inverted at the origin. Both
//! poles land on the inversion point itself, closing the two ends there;
//! the two sheets meet at the origin in a double point, so the fixture is an
//! immersion with self-intersection, as the eversion machinery requires.
//! Its Willmore energy is 8 pi (two planar ends at 4 pi each).

use crate::error::{Error, Result};
use crate::geom::{v3, Vec3};
use crate::mesh::{build_icosphere, Immersion};

#[derive(Debug, Clone, PartialEq)]
pub enum Fixture {
    Sphere,
    Ellipsoid { a: f64, b: f64, c: f64 },
    InvertedCatenoid,
    BumpSphere { amplitude: f64, width: f64 },
}

impl Fixture {
    /// Parses "sphere", "ellipsoid:a:b:c", "inverted-catenoid",
    /// "bump-sphere:amplitude[:width]".
    pub fn parse(spec: &str) -> Result<Fixture> {
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parameter(format!("bad fixture number {s:?}")))
        };
        match parts[0] {
            "sphere" => Ok(Fixture::Sphere),
            "ellipsoid" => {
                if parts.len() != 4 {
                    return Err(Error::Parameter(
                        "ellipsoid fixture needs ellipsoid:a:b:c".into(),
                    ));
                }
                Ok(Fixture::Ellipsoid {
                    a: num(parts[1])?,
                    b: num(parts[2])?,
                    c: num(parts[3])?,
                })
            }
            "inverted-catenoid" => Ok(Fixture::InvertedCatenoid),
            "bump-sphere" => {
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(Error::Parameter(
                        "bump-sphere fixture needs bump-sphere:amplitude[:width]".into(),
                    ));
                }
                let amplitude = num(parts[1])?;
                let width = if parts.len() == 3 { num(parts[2])? } else { 0.2 };
                Ok(Fixture::BumpSphere { amplitude, width })
            }
            other => Err(Error::Parameter(format!("unknown fixture {other:?}"))),
        }
    }

    pub fn build(&self, level: u32) -> Result<Immersion> {
        let mesh = build_icosphere(level)?;
        let im = Immersion::reference_sphere(mesh)?;
        match *self {
            Fixture::Sphere => Ok(im),
            Fixture::Ellipsoid { a, b, c } => {
                if !(a > 0.0 && b > 0.0 && c > 0.0) {
                    return Err(Error::Parameter("ellipsoid axes must be positive".into()));
                }
                im.map_positions(|p| v3(a * p.x, b * p.y, c * p.z))
            }
            Fixture::InvertedCatenoid => im.map_positions(inverted_catenoid_point),
            Fixture::BumpSphere { amplitude, width } => {
                if !(width > 0.0) {
                    return Err(Error::Parameter("bump width must be positive".into()));
                }
                im.map_positions(|p| {
                    let theta = p.z.clamp(-1.0, 1.0).acos();
                    p * (1.0 + amplitude * (-(theta * theta) / (width * width)).exp())
                })
            }
        }
    }
}

/// Image of a unit-sphere reference point on the inverted catenoid.
pub fn inverted_catenoid_point(p: Vec3) -> Vec3 {
    let z = p.z.clamp(-1.0, 1.0);
    if 1.0 - z.abs() < 1e-14 {
        // both catenoid ends close at the inversion point
        return Vec3::ZERO;
    }
    let u = p.y.atan2(p.x);
    let vpar = z.atanh();
    let ch = vpar.cosh();
    let c = v3(ch * u.cos(), ch * u.sin(), vpar);
    c / c.norm2()
}

/// Closed-form check value: W of the inverted catenoid by 1D quadrature of
/// 8 pi (cosh v - v sinh v)^2 / (cosh^2 v + v^2)^2 over v.
pub fn inverted_catenoid_willmore_quadrature() -> f64 {
    // Simpson on [-L, L]; the integrand decays like v^2 e^{-2v}
    let l = 30.0;
    let n = 40_000;
    let h = 2.0 * l / n as f64;
    let f = |v: f64| {
        let (s, c) = (v.sinh(), v.cosh());
        let num = c - v * s;
        let den = c * c + v * v;
        num * num / (den * den)
    };
    let mut total = f(-l) + f(l);
    for i in 1..n {
        let v = -l + i as f64 * h;
        total += f(v) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    8.0 * std::f64::consts::PI * total * h / 3.0
}
