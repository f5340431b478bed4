//! Conformal gauge relative to the volume-1 round metric.
//!
//! The background metric is g0 = (pullback by a sphere Mobius map of the
//! round metric) / 4pi, so it has unit volume and constant curvature 4pi.
//! Discretely, g0 is carried as a per-vertex density against the reference
//! vertex areas, normalized so the total g0 volume is exactly 1. The
//! conformal factor is the area-density ratio
//!
//!   alpha_v = 1/2 log( vertex_area(immersion) / vertex_area(g0) )
//!
//! which makes int e^{2 alpha} dvol_g0 equal to the immersed area exactly and
//! makes dilations shift alpha by exactly t.
//!
//! The Aubin gauge drives the conformal barycenter of the immersed area
//! measure (placed at the Mobius-moved reference points) to the origin by a
//! damped gyro fixed point on the ball parameter.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::mobius::{mobius_add, MobiusS2};
use crate::mesh::{
    cot_laplacian_apply_scalar, dirichlet_energy, induced_geometry, DiscreteGeometry, Immersion,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dimensionless stop threshold for the balance solver: the area-normalized
/// conformal barycenter must fall below this. Tighter than the 1e-6
/// postcondition so Mobius round-trips recover parameters to ~1e-8.
pub const BALANCE_TOL: f64 = 1e-9;
pub const BALANCE_MAX_ITER: usize = 200;
pub const BALANCE_DAMPING: f64 = 0.5;

/// Onofri-positivity tolerance at subdivision level 4; halved per level.
pub fn onofri_tolerance(level: u32) -> f64 {
    5e-3 * 2f64.powi(4 - level as i32)
}

#[derive(Debug, Clone)]
pub struct GaugeState {
    /// The gauge element. Balance means the area measure placed at
    /// mobius-moved reference points has conformal barycenter ~ 0.
    pub mobius: MobiusS2,
    /// Per-vertex conformal factor alpha.
    pub alpha: Vec<f64>,
    /// Per-vertex density of g0 against reference vertex areas; the products
    /// g0_density * ref_area sum to exactly 1.
    pub g0_density: Vec<f64>,
    /// g0 vertex measures b_v = g0_density_v * ref_area_v (sum to 1).
    pub g0_vertex_area: Vec<f64>,
    /// Curvature of the discretely normalized g0: 4pi divided by the
    /// normalization constant absorbed into the density.
    pub k_g0_effective: f64,
    /// Area of the immersion the state was built from.
    pub total_area: f64,
}

/// Serialized shape: {"mobius": {"a": [x,y,z], "rot": row-major 3x3}, "alpha": [...]}
#[derive(Serialize, Deserialize)]
pub struct GaugeStateJson {
    pub mobius: MobiusJson,
    pub alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct MobiusJson {
    pub a: [f64; 3],
    pub rot: [f64; 9],
}

impl GaugeState {
    pub fn to_json(&self) -> GaugeStateJson {
        GaugeStateJson {
            mobius: MobiusJson {
                a: self.mobius.a.to_array(),
                rot: self.mobius.rot.to_row_major(),
            },
            alpha: self.alpha.clone(),
        }
    }

    /// Area-normalized conformal barycenter of the immersed measure in this gauge.
    pub fn barycenter(&self, im: &Immersion, geo: &DiscreteGeometry) -> Vec3 {
        let mut b = Vec3::ZERO;
        for (v, &p) in im.mesh.points().iter().enumerate() {
            b += self.mobius.apply_point(p) * geo.vertex_areas[v];
        }
        b / geo.total_area
    }

    /// Consistency of alpha with the immersion: sum e^{2 alpha} b_v = area.
    pub fn check_consistency(&self, geo: &DiscreteGeometry) -> Result<()> {
        if self.alpha.len() != geo.vertex_areas.len() {
            return Err(Error::Gauge("gauge built for a different mesh".into()));
        }
        let lhs: f64 = self
            .alpha
            .iter()
            .zip(&self.g0_vertex_area)
            .map(|(&a, &b)| (2.0 * a).exp() * b)
            .sum();
        if (lhs - geo.total_area).abs() > 0.01 * geo.total_area {
            return Err(Error::Gauge(format!(
                "gauge inconsistent with immersion: e^2a volume {lhs} vs area {}",
                geo.total_area
            )));
        }
        Ok(())
    }
}

fn gauge_from_mobius(
    im: &Immersion,
    geo: &DiscreteGeometry,
    mobius: MobiusS2,
) -> Result<GaugeState> {
    mobius.validate()?;
    let mesh = &*im.mesh;
    let nv = mesh.vertex_count();
    let ref_areas = mesh.vertex_ref_areas();

    // raw density of (pullback of g_{S^2}) / 4pi, then exact normalization
    let mut density: Vec<f64> = Vec::with_capacity(nv);
    for &p in mesh.points() {
        let rho = mobius.conformal_factor(p);
        let d = rho * rho / (4.0 * PI);
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::Gauge(format!(
                "degenerate g0 cell: conformal factor {rho} at a reference point"
            )));
        }
        density.push(d);
    }
    let raw_total: f64 = density.iter().zip(ref_areas).map(|(d, a)| d * a).sum();
    if !(raw_total > 0.0) || !raw_total.is_finite() {
        return Err(Error::Gauge("g0 volume degenerate".into()));
    }
    for d in &mut density {
        *d /= raw_total;
    }
    let k_g0_effective = 4.0 * PI * raw_total;

    let mut alpha = Vec::with_capacity(nv);
    let mut g0_vertex_area = Vec::with_capacity(nv);
    for v in 0..nv {
        let b = density[v] * ref_areas[v];
        g0_vertex_area.push(b);
        alpha.push(0.5 * (geo.vertex_areas[v] / b).ln());
    }

    Ok(GaugeState {
        mobius,
        alpha,
        g0_density: density,
        g0_vertex_area,
        k_g0_effective,
        total_area: geo.total_area,
    })
}

/// Conformal factor of an immersion in the gauge given by `m`.
pub fn conformal_factor(im: &Immersion, m: &MobiusS2) -> Result<GaugeState> {
    let geo = induced_geometry(im)?;
    conformal_factor_with_geo(im, &geo, m)
}

pub fn conformal_factor_with_geo(
    im: &Immersion,
    geo: &DiscreteGeometry,
    m: &MobiusS2,
) -> Result<GaugeState> {
    gauge_from_mobius(im, geo, m.clone())
}

/// Finds the Aubin gauge: a Mobius element whose moved reference points give
/// the area measure a vanishing conformal barycenter.
pub fn aubin_balance(im: &Immersion) -> Result<GaugeState> {
    let geo = induced_geometry(im)?;
    aubin_balance_with_geo(im, &geo)
}

pub fn aubin_balance_with_geo(im: &Immersion, geo: &DiscreteGeometry) -> Result<GaugeState> {
    let points = im.mesh.points();
    let areas = &geo.vertex_areas;
    let total = geo.total_area;

    let barycenter = |a: Vec3| -> Vec3 {
        let mut b = Vec3::ZERO;
        if a.norm2() == 0.0 {
            for (v, &p) in points.iter().enumerate() {
                b += p * areas[v];
            }
        } else {
            let m = MobiusS2 {
                a,
                rot: crate::geom::Mat3::IDENTITY,
            };
            for (v, &p) in points.iter().enumerate() {
                b += m.apply_point(p) * areas[v];
            }
        }
        b / total
    };

    let mut a = Vec3::ZERO;
    let mut b = barycenter(a);
    let mut best = b.norm();
    let mut damping = BALANCE_DAMPING;
    let mut iter = 0;
    while b.norm() >= BALANCE_TOL {
        if iter >= BALANCE_MAX_ITER {
            return Err(Error::Convergence(format!(
                "aubin balance stalled after {BALANCE_MAX_ITER} iterations; \
                 last barycenter norm {:.3e}",
                b.norm()
            )));
        }
        let step = b * (-damping);
        let cand = mobius_add(step, a);
        if cand.norm() >= 1.0 - 1e-7 {
            return Err(Error::Convergence(format!(
                "aubin balance pushed to the ball boundary (measure nearly \
                 concentrated at a point); barycenter norm {:.3e}",
                b.norm()
            )));
        }
        let b_cand = barycenter(cand);
        if b_cand.norm() < best {
            a = cand;
            b = b_cand;
            best = b.norm();
            damping = (damping * 1.3).min(1.0);
        } else {
            damping *= 0.5;
            if damping < 1e-6 {
                return Err(Error::Convergence(format!(
                    "aubin balance cannot reduce barycenter below {:.3e}",
                    b.norm()
                )));
            }
        }
        iter += 1;
    }

    gauge_from_mobius(
        im,
        geo,
        MobiusS2 {
            a,
            rot: crate::geom::Mat3::IDENTITY,
        },
    )
}

/// Is the gauge balanced well enough for Aubin-gauge-only statements?
pub fn is_balanced(im: &Immersion, geo: &DiscreteGeometry, g: &GaugeState) -> bool {
    g.barycenter(im, geo).norm() < 1e-4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnofriReport {
    /// 1/2 int |d alpha|^2 dvol
    pub dirichlet: f64,
    /// 4pi int alpha dvol_g0
    pub linear: f64,
    /// 2pi log int e^{2 alpha} dvol_g0
    pub log_area: f64,
    /// dirichlet + linear - log_area
    pub onofri_value: f64,
}

/// The three terms of the Onofri energy, Dirichlet term from the cotan
/// weights of the immersed mesh.
pub fn onofri_energy(im: &Immersion, g: &GaugeState) -> Result<OnofriReport> {
    let geo = induced_geometry(im)?;
    onofri_energy_with_geo(im, &geo, g)
}

pub fn onofri_energy_with_geo(
    im: &Immersion,
    geo: &DiscreteGeometry,
    g: &GaugeState,
) -> Result<OnofriReport> {
    g.check_consistency(geo)?;
    let dirichlet = 0.5 * dirichlet_energy(&im.mesh, &geo.cot, &g.alpha);
    let linear: f64 = 4.0
        * PI
        * g.alpha
            .iter()
            .zip(&g.g0_vertex_area)
            .map(|(&a, &b)| a * b)
            .sum::<f64>();
    let e2a_volume: f64 = g
        .alpha
        .iter()
        .zip(&g.g0_vertex_area)
        .map(|(&a, &b)| (2.0 * a).exp() * b)
        .sum();
    let log_area = 2.0 * PI * e2a_volume.ln();
    Ok(OnofriReport {
        dirichlet,
        linear,
        log_area,
        onofri_value: dirichlet + linear - log_area,
    })
}

/// The sharpened functional 1/3 int |d alpha|^2 + 4pi int alpha dvol_g0
/// - 2pi log int e^{2 alpha} dvol_g0, valid in the Aubin gauge.
pub fn ghoussoub_lin_check(im: &Immersion, g: &GaugeState) -> Result<f64> {
    let geo = induced_geometry(im)?;
    if !is_balanced(im, &geo, g) {
        return Err(Error::Gauge(
            "ghoussoub_lin_check requires a balanced (Aubin) gauge".into(),
        ));
    }
    let rep = onofri_energy_with_geo(im, &geo, g)?;
    // 1/3 int |da|^2 = (2/3) dirichlet
    Ok(2.0 / 3.0 * rep.dirichlet + rep.linear - rep.log_area)
}

#[derive(Debug, Clone)]
pub struct LiouvilleResidual {
    pub field: Vec<f64>,
    /// Area-weighted L1 norm, sum |r_v| A_v.
    pub l1_norm: f64,
}

/// Residual of the Liouville identity -lap alpha = K - e^{-2 alpha} K_g0.
pub fn liouville_residual(im: &Immersion, g: &GaugeState) -> Result<LiouvilleResidual> {
    let geo = induced_geometry(im)?;
    liouville_residual_with_geo(im, &geo, g)
}

pub fn liouville_residual_with_geo(
    im: &Immersion,
    geo: &DiscreteGeometry,
    g: &GaugeState,
) -> Result<LiouvilleResidual> {
    g.check_consistency(geo)?;
    let la = cot_laplacian_apply_scalar(&im.mesh, &geo.cot, &g.alpha);
    let nv = g.alpha.len();
    let mut field = Vec::with_capacity(nv);
    let mut l1 = 0.0;
    for v in 0..nv {
        // -lap alpha = +(L alpha)_v / A_v with the PSD cotan operator
        let r = la[v] / geo.vertex_areas[v] - geo.gauss_curvature[v]
            + (-2.0 * g.alpha[v]).exp() * g.k_g0_effective;
        l1 += r.abs() * geo.vertex_areas[v];
        field.push(r);
    }
    Ok(LiouvilleResidual { field, l1_norm: l1 })
}
