//! Path-space minmax relaxation with sigma annealing.
//!
//! A path is an ordered sequence of immersions over one shared mesh with
//! pinned endpoints. One relaxation sweep finds the frames of maximal
//! relaxed energy and runs backtracking gradient descent on a window around
//! them; accepted steps strictly decrease the frame energy, so the path
//! width max_frames F^sigma never increases. Annealing walks a decreasing
//! sigma schedule, records the width, and keeps the sigmas whose Struwe
//! quantity s(sigma) = sigma log(1/sigma) dF/dsigma falls under the
//! configured threshold; the Willmore energy of the argmax frame at accepted
//! sigmas estimates the sigma -> 0 width.

pub mod path_io;

use crate::energy::{relaxed_energy_with_geo, EnergyBreakdown, ViscosityParams};
use crate::error::{Error, Result};
use crate::gauge::{conformal_factor_with_geo, GaugeState};
use crate::geom::Vec3;
use crate::mesh::mobius::MobiusS2;
use crate::mesh::{induced_geometry, Immersion, TriangulatedSphere};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct PathState {
    pub mesh: Arc<TriangulatedSphere>,
    pub frames: Vec<Immersion>,
    pub endpoints_pinned: bool,
    /// Per-frame energy cache, invalidated on frame updates.
    cache: Vec<Option<EnergyBreakdown>>,
}

#[derive(Debug, Clone)]
pub enum PathInterior {
    /// Straight-line interpolation between the endpoints with m total frames.
    Linear { frames: usize },
    /// Explicit interior frames (endpoints excluded).
    Frames(Vec<Immersion>),
}

/// Builds a path with pinned endpoints.
pub fn init_path(start: Immersion, end: Immersion, interior: PathInterior) -> Result<PathState> {
    if !Arc::ptr_eq(&start.mesh, &end.mesh) && start.mesh.faces() != end.mesh.faces() {
        return Err(Error::Parameter(
            "path endpoints must share one mesh".into(),
        ));
    }
    let mesh = start.mesh.clone();
    let mut frames = vec![start];
    match interior {
        PathInterior::Linear { frames: m } => {
            if m < 3 {
                return Err(Error::Parameter(format!("path needs M >= 3, got {m}")));
            }
            let a = frames[0].clone();
            for i in 1..m - 1 {
                let t = i as f64 / (m - 1) as f64;
                let positions: Vec<Vec3> = a
                    .positions()
                    .iter()
                    .zip(end.positions())
                    .map(|(p, q)| *p * (1.0 - t) + *q * t)
                    .collect();
                let frame = Immersion::new(mesh.clone(), positions).map_err(|e| {
                    Error::Geometry(format!("interpolated frame {i} degenerate: {e}"))
                })?;
                frames.push(frame);
            }
        }
        PathInterior::Frames(interior_frames) => {
            for (i, f) in interior_frames.iter().enumerate() {
                if f.mesh.faces() != mesh.faces() {
                    return Err(Error::Parameter(format!(
                        "interior frame {i} does not share the path mesh"
                    )));
                }
            }
            frames.extend(interior_frames);
        }
    }
    frames.push(end);
    if frames.len() < 3 {
        return Err(Error::Parameter(format!(
            "path needs M >= 3 frames, got {}",
            frames.len()
        )));
    }
    let n = frames.len();
    Ok(PathState {
        mesh,
        frames,
        endpoints_pinned: true,
        cache: vec![None; n],
    })
}

impl PathState {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame energy, cached. The gauge is re-balanced per frame.
    pub fn frame_energy(&mut self, i: usize, p: &ViscosityParams) -> Result<EnergyBreakdown> {
        if let Some(e) = &self.cache[i] {
            return Ok(e.clone());
        }
        let e = frame_energy(&self.frames[i], p)?;
        self.cache[i] = Some(e.clone());
        Ok(e)
    }

    pub fn invalidate(&mut self, i: usize) {
        self.cache[i] = None;
    }

    pub fn invalidate_all(&mut self) {
        for c in &mut self.cache {
            *c = None;
        }
    }

    /// Width = max over frames of the relaxed energy; returns (width, argmax).
    pub fn width(&mut self, p: &ViscosityParams) -> Result<(f64, usize)> {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for i in 0..self.len() {
            let e = self.frame_energy(i, p)?;
            if e.total > best {
                best = e.total;
                arg = i;
            }
        }
        Ok((best, arg))
    }
}

/// Balanced gauge with graceful fallback: a path frame may be too distorted
/// to balance, in which case the identity gauge still gives a valid energy.
fn balanced_or_identity(im: &Immersion) -> Result<GaugeState> {
    let geo = induced_geometry(im)?;
    match crate::gauge::aubin_balance_with_geo(im, &geo) {
        Ok(g) => Ok(g),
        Err(_) => conformal_factor_with_geo(im, &geo, &MobiusS2::identity()),
    }
}

pub fn frame_energy(im: &Immersion, p: &ViscosityParams) -> Result<EnergyBreakdown> {
    let geo = induced_geometry(im)?;
    let g = match crate::gauge::aubin_balance_with_geo(im, &geo) {
        Ok(g) => g,
        Err(_) => conformal_factor_with_geo(im, &geo, &MobiusS2::identity())?,
    };
    relaxed_energy_with_geo(im, &geo, &g, p)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineSearchParams {
    /// First trial step, relative to diameter / |grad|_inf.
    pub step0: f64,
    /// Backtracking factor.
    pub shrink: f64,
    /// Trial-step failures tolerated before signalling a stall.
    pub max_backtracks: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams {
            step0: 1e-2,
            shrink: 0.5,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinmaxConfig {
    pub sigma_schedule: Vec<f64>,
    /// Descent iterations per frame per sweep.
    pub inner_steps: usize,
    pub line_search: LineSearchParams,
    pub area_constrained: bool,
    /// Threshold on sigma log(1/sigma) dF/dsigma for accepting a sigma.
    pub struwe_tol: f64,
    pub max_sweeps: usize,
    /// Stop sweeping when the width improves by less than this fraction.
    pub width_stagnation: f64,
    /// Frames on each side of an argmax frame included in the descent window.
    pub window: usize,
    /// Pseudo-arclength redistribution of frames between sweeps.
    pub redistribute: bool,
    /// Ball radius and threshold for bubble flagging in reports.
    pub bubble_epsilon: f64,
    pub bubble_radius: f64,
    /// When set, the relaxed path is written here after every sigma
    /// (subdirectory per sigma) for external visualization.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dump_dir: Option<std::path::PathBuf>,
}

impl Default for MinmaxConfig {
    fn default() -> Self {
        MinmaxConfig {
            sigma_schedule: default_sigma_schedule(),
            inner_steps: 40,
            line_search: LineSearchParams::default(),
            area_constrained: false,
            struwe_tol: 0.5,
            max_sweeps: 25,
            width_stagnation: 1e-6,
            window: 1,
            redistribute: false,
            bubble_epsilon: 1.0,
            bubble_radius: 0.25,
            dump_dir: None,
        }
    }
}

impl MinmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_schedule.is_empty() {
            return Err(Error::Parameter("empty sigma schedule".into()));
        }
        for w in self.sigma_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Parameter(
                    "sigma schedule must be strictly decreasing".into(),
                ));
            }
        }
        for &s in &self.sigma_schedule {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Parameter(format!("sigma {s} outside (0,1)")));
            }
        }
        if !(self.struwe_tol > 0.0) {
            return Err(Error::Parameter("struwe_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self, sigma: f64) -> Result<ViscosityParams> {
        let mut p = ViscosityParams::new(sigma)?;
        p.area_constrained = self.area_constrained;
        Ok(p)
    }
}

/// Geometric schedule sigma_{k+1} = sigma_k / sqrt(2) from 0.2 down to 0.01.
pub fn default_sigma_schedule() -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = 0.2;
    while s >= 0.01 {
        out.push(s);
        s /= 2f64.sqrt();
    }
    out
}

#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub energies: Vec<f64>,
    pub accepted_steps: usize,
    pub stalled: bool,
}

/// Backtracking gradient descent on the relaxed energy of a single frame.
/// Accepted steps strictly decrease F^sigma; with the area constraint the
/// gradient is projected against the area gradient and positions are rescaled
/// to unit area after every step.
pub fn descend_frame(
    im: &Immersion,
    p: &ViscosityParams,
    steps: usize,
    ls: &LineSearchParams,
) -> Result<(Immersion, DescentTrace)> {
    let mut current = im.clone();
    if p.area_constrained {
        current = rescale_to_unit_area(&current)?;
    }
    let mut gauge = balanced_or_identity(&current)?;
    let mut geo = induced_geometry(&current)?;
    let mut energy = relaxed_energy_with_geo(&current, &geo, &gauge, p)?.total;
    let mut trace = DescentTrace {
        energies: vec![energy],
        accepted_steps: 0,
        stalled: false,
    };
    let tw = crate::variation::TermWeights::relaxed(p);
    let mut step_scale = ls.step0;

    for _ in 0..steps {
        let mut grad =
            crate::variation::energy_gradient(&current.mesh, current.positions(), &gauge.g0_vertex_area, &tw)?;
        if p.area_constrained {
            let ga = crate::variation::energy_gradient(
                &current.mesh,
                current.positions(),
                &gauge.g0_vertex_area,
                &crate::variation::TermWeights::area_only(),
            )?;
            let gg: f64 = grad.iter().zip(&ga).map(|(a, b)| a.dot(*b)).sum();
            let aa: f64 = ga.iter().map(|v| v.norm2()).sum();
            if aa > 0.0 {
                let c = gg / aa;
                for (gv, av) in grad.iter_mut().zip(&ga) {
                    *gv -= *av * c;
                }
            }
        }
        let gmax = grad.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if gmax < 1e-14 {
            break;
        }
        let diameter = current.diameter();
        let mut step = step_scale * diameter / gmax;
        let mut accepted = false;
        for _ in 0..ls.max_backtracks {
            let cand_pos: Vec<Vec3> = current
                .positions()
                .iter()
                .zip(&grad)
                .map(|(x, g)| *x - *g * step)
                .collect();
            let cand = match Immersion::new(current.mesh.clone(), cand_pos) {
                Ok(c) => c,
                Err(_) => {
                    step *= ls.shrink;
                    continue;
                }
            };
            let cand = if p.area_constrained {
                rescale_to_unit_area(&cand)?
            } else {
                cand
            };
            let cand_geo = induced_geometry(&cand)?;
            // keep the Mobius element along the step; alpha follows the areas
            let cand_gauge = conformal_factor_with_geo(&cand, &cand_geo, &gauge.mobius)?;
            let cand_energy = relaxed_energy_with_geo(&cand, &cand_geo, &cand_gauge, p)?.total;
            if cand_energy < energy {
                current = cand;
                geo = cand_geo;
                gauge = cand_gauge;
                energy = cand_energy;
                trace.energies.push(energy);
                trace.accepted_steps += 1;
                accepted = true;
                step_scale = (step_scale * 1.5).min(0.1);
                break;
            }
            step *= ls.shrink;
            step_scale *= ls.shrink;
        }
        if !accepted {
            trace.stalled = true;
            break;
        }
        // periodically re-balance the gauge so alpha stays meaningful
        if trace.accepted_steps.is_multiple_of(10) {
            if let Ok(g) = crate::gauge::aubin_balance_with_geo(&current, &geo) {
                gauge = g;
            }
        }
    }
    Ok((current, trace))
}

pub fn rescale_to_unit_area(im: &Immersion) -> Result<Immersion> {
    let geo = induced_geometry(im)?;
    let s = (1.0 / geo.total_area).sqrt();
    im.map_positions(|p| p * s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub width: f64,
    pub argmax: usize,
    pub accepted_steps: usize,
    pub redistributed: bool,
}

/// Repeated sweeps of windowed descent around the argmax frames. The width
/// is asserted nonincreasing after every sweep.
pub fn minmax_relax(
    mut path: PathState,
    p: &ViscosityParams,
    cfg: &MinmaxConfig,
) -> Result<(PathState, Vec<SweepRecord>)> {
    if !path.endpoints_pinned {
        return Err(Error::Parameter("path endpoints must be pinned".into()));
    }
    let mut records = Vec::new();
    let (mut width, mut argmax) = path.width(p)?;
    for sweep in 0..cfg.max_sweeps {
        let last = path.len() - 1;
        let lo = argmax.saturating_sub(cfg.window).max(1);
        let hi = (argmax + cfg.window).min(last.saturating_sub(1));
        let mut accepted = 0;
        if lo <= hi {
            for i in lo..=hi {
                let (frame, trace) =
                    descend_frame(&path.frames[i], p, cfg.inner_steps, &cfg.line_search)?;
                accepted += trace.accepted_steps;
                path.frames[i] = frame;
                path.invalidate(i);
            }
        }

        let mut redistributed = false;
        if cfg.redistribute && accepted > 0 {
            let before = path.width(p)?.0;
            let saved = path.frames.clone();
            redistribute_arclength(&mut path)?;
            path.invalidate_all();
            let after = path.width(p)?.0;
            if after > before {
                // redistribution may not raise the width; revert
                path.frames = saved;
                path.invalidate_all();
            } else {
                redistributed = true;
            }
        }

        let (new_width, new_argmax) = path.width(p)?;
        assert!(
            new_width <= width + 1e-12 * width.abs(),
            "width must not increase: {width} -> {new_width}"
        );
        records.push(SweepRecord {
            sweep,
            width: new_width,
            argmax: new_argmax,
            accepted_steps: accepted,
            redistributed,
        });
        let improved = width - new_width;
        width = new_width;
        argmax = new_argmax;
        if accepted == 0 || improved <= cfg.width_stagnation * width.abs() {
            break;
        }
    }
    Ok((path, records))
}

/// Resamples interior frames so consecutive frames are equidistant in the
/// L2 metric on positions (linear interpolation between existing frames).
fn redistribute_arclength(path: &mut PathState) -> Result<()> {
    let n = path.len();
    if n < 4 {
        return Ok(());
    }
    let dist = |a: &Immersion, b: &Immersion| -> f64 {
        a.positions()
            .iter()
            .zip(b.positions())
            .map(|(p, q)| (*p - *q).norm2())
            .sum::<f64>()
            .sqrt()
    };
    let mut cum = vec![0.0];
    for i in 1..n {
        cum.push(cum[i - 1] + dist(&path.frames[i - 1], &path.frames[i]));
    }
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        return Ok(());
    }
    let mut new_frames = Vec::with_capacity(n);
    new_frames.push(path.frames[0].clone());
    for i in 1..n - 1 {
        let target = total * i as f64 / (n - 1) as f64;
        let j = cum.partition_point(|&c| c < target).clamp(1, n - 1);
        let seg = cum[j] - cum[j - 1];
        let t = if seg > 0.0 { (target - cum[j - 1]) / seg } else { 0.0 };
        let positions: Vec<Vec3> = path.frames[j - 1]
            .positions()
            .iter()
            .zip(path.frames[j].positions())
            .map(|(p, q)| *p * (1.0 - t) + *q * t)
            .collect();
        new_frames.push(Immersion::new(path.mesh.clone(), positions)?);
    }
    new_frames.push(path.frames[n - 1].clone());
    path.frames = new_frames;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaRecord {
    pub sigma: f64,
    pub width: f64,
    pub argmax: usize,
    pub willmore_at_max: f64,
    pub struwe_quantity: f64,
    pub accepted: bool,
    /// Relaxed energy of every frame after the sweeps at this sigma.
    pub frame_energies: Vec<f64>,
    pub sweeps: Vec<SweepRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bubble {
    pub center_vertex: u32,
    pub radius: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinmaxReport {
    pub beta_trace: Vec<SigmaRecord>,
    pub accepted_sigmas: Vec<f64>,
    /// Willmore energy at the argmax frame of the smallest accepted sigma.
    pub beta0_estimate: Option<f64>,
    /// Smallest Struwe quantity seen, reported when nothing was accepted.
    pub min_struwe_quantity: f64,
    /// Per-frame concentration balls on the final path.
    pub bubble_flags: Vec<Vec<Bubble>>,
    /// Width of the final accepted argmax relative to 16 pi, the eversion
    /// lower bound; reported, never asserted.
    pub ratio_to_16pi: Option<f64>,
    pub redistribution_used: bool,
}

/// Annealing loop: relax at each sigma of the schedule, filter by the Struwe
/// quantity, and report the Willmore energy at accepted argmax frames. With
/// `dump_dir` set, the relaxed path is written out after every sigma.
pub fn anneal(mut path: PathState, cfg: &MinmaxConfig) -> Result<(PathState, MinmaxReport)> {
    cfg.validate()?;
    let mut beta_trace = Vec::new();
    let mut accepted_sigmas = Vec::new();
    let mut beta0_estimate = None;
    let mut min_struwe = f64::INFINITY;
    let mut redistribution_used = false;

    for &sigma in &cfg.sigma_schedule {
        let p = cfg.params(sigma)?;
        path.invalidate_all();
        let (new_path, sweeps) = minmax_relax(path, &p, cfg)?;
        path = new_path;
        redistribution_used |= sweeps.iter().any(|s| s.redistributed);
        let (width, argmax) = path.width(&p)?;
        let mut frame_energies = Vec::with_capacity(path.len());
        for i in 0..path.len() {
            frame_energies.push(path.frame_energy(i, &p)?.total);
        }
        let e = path.frame_energy(argmax, &p)?;
        let s_sigma = sigma * (1.0 / sigma).ln().abs() * e.sigma_derivative;
        min_struwe = min_struwe.min(s_sigma);
        let accepted = s_sigma < cfg.struwe_tol;
        if accepted {
            accepted_sigmas.push(sigma);
            beta0_estimate = Some(e.willmore);
        }
        if let Some(dir) = &cfg.dump_dir {
            let sub = dir.join(format!("sigma_{sigma:.6}"));
            crate::minmax::path_io::save_path(&sub, &path)?;
        }
        beta_trace.push(SigmaRecord {
            sigma,
            width,
            argmax,
            willmore_at_max: e.willmore,
            struwe_quantity: s_sigma,
            accepted,
            frame_energies,
            sweeps,
        });
    }

    let bubble_flags = path
        .frames
        .iter()
        .map(|f| detect_bubbles_with_radius(f, cfg.bubble_epsilon, cfg.bubble_radius))
        .collect::<Result<Vec<_>>>()?;

    let ratio_to_16pi = beta0_estimate.map(|b| b / (16.0 * std::f64::consts::PI));

    Ok((
        path,
        MinmaxReport {
            beta_trace,
            accepted_sigmas,
            beta0_estimate,
            min_struwe_quantity: min_struwe,
            bubble_flags,
            ratio_to_16pi,
            redistribution_used,
        },
    ))
}

/// Greedy covering of the reference sphere by geodesic balls; returns the
/// balls whose bending energy int |dn|^2 meets the threshold.
pub fn detect_bubbles(im: &Immersion, epsilon: f64) -> Result<Vec<Bubble>> {
    detect_bubbles_with_radius(im, epsilon, 0.25)
}

pub fn detect_bubbles_with_radius(
    im: &Immersion,
    epsilon: f64,
    radius: f64,
) -> Result<Vec<Bubble>> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter("epsilon must be positive".into()));
    }
    if !(radius > 0.0 && radius < std::f64::consts::PI) {
        return Err(Error::Parameter(format!("ball radius {radius} invalid")));
    }
    let geo = induced_geometry(im)?;
    let bending = geo.bending_per_vertex(&im.mesh);
    let pts = im.mesh.points();
    let nv = pts.len();
    let cos_r = radius.cos();
    let cos_2r = (2.0 * radius).min(std::f64::consts::PI).cos();

    let ball_energy = |center: usize| -> f64 {
        let c = pts[center];
        (0..nv)
            .filter(|&v| pts[v].dot(c) >= cos_r)
            .map(|v| bending[v])
            .sum()
    };

    let mut blocked = vec![false; nv];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(f64, usize)> = None;
        for v in 0..nv {
            if blocked[v] {
                continue;
            }
            let e = ball_energy(v);
            if e >= epsilon && best.map_or(true, |(be, _)| e > be) {
                best = Some((e, v));
            }
        }
        let Some((energy, center)) = best else { break };
        out.push(Bubble {
            center_vertex: center as u32,
            radius,
            energy,
        });
        // block overlapping centers
        let c = pts[center];
        for v in 0..nv {
            if pts[v].dot(c) >= cos_2r {
                blocked[v] = true;
            }
        }
    }
    Ok(out)
}
