//! Discrete toolkit for the viscosity-relaxed Willmore energy on
//! triangulated sphere immersions.
//!
//! The pieces, bottom up:
//!
//! * [`mesh`] - icosphere reference meshes, immersions, cotangent-Laplacian
//!   geometry (mean curvature vector, normals, angle-defect curvature,
//!   per-face second fundamental form), Mobius actions on R^3 and S^2,
//!   OFF/OBJ I/O.
//! * [`gauge`] - conformal factor against the volume-1 round background,
//!   Aubin (conformal-barycenter) balancing, Onofri and Ghoussoub-Lin
//!   functionals, Liouville residual.
//! * [`energy`] - Willmore energy, quartic smoother, the relaxed total
//!   W + sigma^2 smoother + Onofri / log(1/sigma), and structural bounds.
//! * [`variation`] - exact gradients of the discrete energies, the
//!   finite-difference oracle, first-variation boundary forms,
//!   conservation-law residuals, loop residues, the area-constraint
//!   multiplier.
//! * [`minmax`] - paths of immersions with pinned endpoints, windowed
//!   descent on the maximal frames, sigma annealing with the Struwe filter,
//!   bending-energy concentration detection.
//! * [`fixtures`] - analytic test surfaces (sphere, ellipsoid, inverted
//!   catenoid, bump sphere) on icosphere combinatorics.
//! * [`cli`] / [`report`] - command front end and JSON reports.
//!
//! Orientation convention: vertex normals point outward on convex shapes and
//! the scalar mean curvature is H = <H_vec, n>, so the unit sphere has
//! H = +1, W = 4 pi, and the smoother equals 16 pi.

// negated comparisons like !(x > 0.0) are NaN-rejecting guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod fixtures;
pub mod gauge;
pub mod geom;
pub mod mesh;
pub mod minmax;
pub mod report;
pub mod variation;

pub use error::{Error, Result};
