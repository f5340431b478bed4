//! Willmore energy, the quartic smoother, and the viscosity-relaxed total.
//!
//! The relaxed energy of an immersion at viscosity sigma is
//!
//!   total = W + sigma^2 * int (1 + |H|^2)^2 dvol + l_sigma * Onofri
//!
//! with l_sigma = 1 / log(1/sigma). The expanded form is stored directly;
//! the log-weighted composite integrand is never formed, which avoids
//! catastrophic cancellation at small sigma. The sigma-derivative
//! 2 sigma * smoother + (l_sigma^2 / sigma) * Onofri is carried alongside
//! for the annealing filter.

use crate::error::{Error, Result};
use crate::gauge::{is_balanced, onofri_energy_with_geo, GaugeState};
use crate::mesh::{induced_geometry, DiscreteGeometry, Immersion};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViscosityParams {
    pub sigma: f64,
    /// 1 / log(1/sigma), cached.
    pub l_sigma: f64,
    pub area_constrained: bool,
    /// Multiplier for the log-area term of the constrained functional;
    /// defaults to half the background curvature (2pi).
    pub lambda_multiplier: Option<f64>,
}

impl ViscosityParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::Parameter(format!(
                "sigma {sigma} outside (0, 1)"
            )));
        }
        Ok(ViscosityParams {
            sigma,
            l_sigma: 1.0 / (1.0 / sigma).ln(),
            area_constrained: false,
            lambda_multiplier: None,
        })
    }

    pub fn area_constrained(mut self) -> Self {
        self.area_constrained = true;
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub willmore: f64,
    /// int (1 + |H|^2)^2 dvol
    pub smoother: f64,
    pub onofri: f64,
    /// willmore + sigma^2 * smoother + l_sigma * onofri
    pub total: f64,
    pub area: f64,
    /// d total / d sigma = 2 sigma smoother + (l_sigma^2 / sigma) onofri
    pub sigma_derivative: f64,
    /// Lagrange multiplier of the unit-area constraint, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
}

/// W = sum |H_v|^2 A_v.
pub fn willmore(geo: &DiscreteGeometry) -> f64 {
    geo.mean_curvature_vec
        .iter()
        .zip(&geo.vertex_areas)
        .map(|(h, a)| h.norm2() * a)
        .sum()
}

/// int (1 + |H|^2)^2 dvol = sum (1 + |H_v|^2)^2 A_v.
pub fn smoother(geo: &DiscreteGeometry) -> f64 {
    geo.mean_curvature_vec
        .iter()
        .zip(&geo.vertex_areas)
        .map(|(h, a)| {
            let s = 1.0 + h.norm2();
            s * s * a
        })
        .sum()
}

pub fn relaxed_energy(
    im: &Immersion,
    g: &GaugeState,
    p: &ViscosityParams,
) -> Result<EnergyBreakdown> {
    let geo = induced_geometry(im)?;
    relaxed_energy_with_geo(im, &geo, g, p)
}

pub fn relaxed_energy_with_geo(
    im: &Immersion,
    geo: &DiscreteGeometry,
    g: &GaugeState,
    p: &ViscosityParams,
) -> Result<EnergyBreakdown> {
    let w = willmore(geo);
    let s = smoother(geo);
    let onofri = onofri_energy_with_geo(im, geo, g)?.onofri_value;
    let total = w + p.sigma * p.sigma * s + p.l_sigma * onofri;
    let sigma_derivative = 2.0 * p.sigma * s + p.l_sigma * p.l_sigma / p.sigma * onofri;
    let multiplier = if p.area_constrained {
        Some(crate::variation::lagrange_multiplier_with_geo(im, geo, g, p)?)
    } else {
        None
    };
    Ok(EnergyBreakdown {
        willmore: w,
        smoother: s,
        onofri,
        total,
        area: geo.total_area,
        sigma_derivative,
        multiplier,
    })
}

/// One inequality of the bounds report.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyBoundsReport {
    pub checks: Vec<BoundCheck>,
    /// Onofri negativity beyond tolerance means the discretization is broken.
    pub discretization_alarm: bool,
}

/// Structural inequalities tying the relaxed energy to its parts. Requires an
/// Aubin gauge. Diagnostics only, except the W + sigma^2 smoother lower
/// bound, whose failure raises the alarm flag.
pub fn energy_bounds_report(
    im: &Immersion,
    g: &GaugeState,
    p: &ViscosityParams,
    onofri_tol: f64,
) -> Result<EnergyBoundsReport> {
    let geo = induced_geometry(im)?;
    if !is_balanced(im, &geo, g) {
        return Err(Error::Gauge("bounds report requires an Aubin gauge".into()));
    }
    let e = relaxed_energy_with_geo(im, &geo, g, p)?;
    let rep = onofri_energy_with_geo(im, &geo, g)?;
    let log_inv_sigma = (1.0 / p.sigma).ln();

    let mut checks = Vec::new();

    // |log area| / log(1/sigma) <= 2 + log(sigma^2 smoother) / log(1/sigma)
    let lhs65 = e.area.ln().abs() / log_inv_sigma;
    let rhs65 = 2.0 + (p.sigma * p.sigma * e.smoother).ln() / log_inv_sigma;
    checks.push(BoundCheck {
        name: "log_area_vs_smoother",
        lhs: lhs65,
        rhs: rhs65,
        pass: lhs65 <= rhs65,
    });

    // total >= W + sigma^2 smoother  (restates Onofri >= 0); tolerance scaled
    // by the l_sigma weight the Onofri term carries
    let lhs71 = e.willmore + p.sigma * p.sigma * e.smoother;
    let rhs71 = e.total;
    let pass71 = rhs71 >= lhs71 - p.l_sigma * onofri_tol;
    checks.push(BoundCheck {
        name: "relaxed_lower_bound",
        lhs: lhs71,
        rhs: rhs71,
        pass: pass71,
    });

    // l_sigma int |da|^2 <= 6 (total - W)
    let lhs72 = p.l_sigma * 2.0 * rep.dirichlet;
    let rhs72 = 6.0 * (e.total - e.willmore);
    checks.push(BoundCheck {
        name: "gradient_vs_excess",
        lhs: lhs72,
        rhs: rhs72,
        pass: lhs72 <= rhs72 + p.l_sigma * onofri_tol,
    });

    // (1/2) log area / log(1/sigma) <= 1 + log(total - W) / log(1/sigma)
    let excess = e.total - e.willmore;
    if excess > 0.0 {
        let lhs75 = 0.5 * e.area.ln() / log_inv_sigma;
        let rhs75 = 1.0 + excess.ln() / log_inv_sigma;
        checks.push(BoundCheck {
            name: "area_vs_excess",
            lhs: lhs75,
            rhs: rhs75,
            pass: lhs75 <= rhs75,
        });
    }

    let discretization_alarm = !pass71;
    Ok(EnergyBoundsReport {
        checks,
        discretization_alarm,
    })
}
