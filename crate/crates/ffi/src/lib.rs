//! C ABI over the willmore toolkit.
//!
//! Immersions are opaque handles created and released by this library.
//! Every fallible call returns a `WmStatus`; on failure a thread-local
//! message is retrievable through `wm_last_error_message`. Output buffers
//! are caller-allocated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use willmore::energy::ViscosityParams;
use willmore::error::Error;
use willmore::fixtures::Fixture;
use willmore::gauge::aubin_balance;
use willmore::mesh::{build_icosphere, induced_geometry, Immersion};
use willmore::variation::residue::{first_residue, willmore_residue, EdgeLoop};
use willmore::variation::{grad_analytic, grad_fd};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Status codes shared with the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmStatus {
    Ok = 0,
    Io = 2,
    CheckFailed = 3,
    Convergence = 4,
    Parameter = 5,
    Geometry = 6,
    Gauge = 7,
    NullPointer = 8,
    Panic = 9,
}

fn status_of(e: &Error) -> WmStatus {
    match e.exit_code() {
        2 => WmStatus::Io,
        3 => WmStatus::CheckFailed,
        4 => WmStatus::Convergence,
        5 => WmStatus::Parameter,
        6 => WmStatus::Geometry,
        _ => WmStatus::Gauge,
    }
}

fn run<F: FnOnce() -> Result<WmStatus, Error>>(f: F) -> WmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            WmStatus::Panic
        }
    }
}

/// Opaque immersion handle.
pub struct WmImmersion {
    inner: Immersion,
}

/// Relaxed-energy breakdown at one viscosity value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WmEnergyBreakdown {
    pub willmore: f64,
    pub smoother: f64,
    pub onofri: f64,
    pub total: f64,
    pub area: f64,
    pub sigma_derivative: f64,
}

/// Bending-energy concentration ball.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WmBubble {
    pub center_vertex: u32,
    pub radius: f64,
    pub energy: f64,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, Error> {
    if ptr.is_null() {
        return Err(Error::Parameter("null string".into()));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Error::Parameter("string is not UTF-8".into()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `cap`); returns the full message length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn wm_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Unit sphere immersion at the given icosphere subdivision level, scaled by
/// `radius`.
///
/// # Safety
/// `out` must be a valid pointer; the returned handle is owned by the caller
/// and released with `wm_immersion_free`.
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_sphere(
    level: u32,
    radius: f64,
    out: *mut *mut WmImmersion,
) -> WmStatus {
    run(|| {
        if out.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("radius {radius} must be > 0")));
        }
        let mesh = build_icosphere(level)?;
        let im = Immersion::reference_sphere(mesh)?.map_positions(|p| p * radius)?;
        *out = Box::into_raw(Box::new(WmImmersion { inner: im }));
        Ok(WmStatus::Ok)
    })
}

/// Builds an analytic fixture: "sphere", "ellipsoid:a:b:c",
/// "inverted-catenoid", "bump-sphere:amplitude[:width]".
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_fixture(
    spec: *const c_char,
    level: u32,
    out: *mut *mut WmImmersion,
) -> WmStatus {
    run(|| {
        if out.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        let spec = cstr(spec)?;
        let im = Fixture::parse(spec)?.build(level)?;
        *out = Box::into_raw(Box::new(WmImmersion { inner: im }));
        Ok(WmStatus::Ok)
    })
}

/// Loads an immersion from an OFF or OBJ file (reference points are the
/// normalized positions).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_from_file(
    path: *const c_char,
    out: *mut *mut WmImmersion,
) -> WmStatus {
    run(|| {
        if out.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        let path = cstr(path)?;
        let im = willmore::mesh::io::read_immersion(Path::new(path), None)?;
        *out = Box::into_raw(Box::new(WmImmersion { inner: im }));
        Ok(WmStatus::Ok)
    })
}

/// Writes the immersion to an OFF or OBJ file chosen by extension.
///
/// # Safety
/// `im` must be a live handle from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_write_file(
    im: *const WmImmersion,
    path: *const c_char,
) -> WmStatus {
    run(|| {
        let Some(im) = im.as_ref() else {
            return Ok(WmStatus::NullPointer);
        };
        let path = cstr(path)?;
        willmore::mesh::io::write_immersion(Path::new(path), &im.inner)?;
        Ok(WmStatus::Ok)
    })
}

/// # Safety
/// `im` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_free(im: *mut WmImmersion) {
    if !im.is_null() {
        drop(Box::from_raw(im));
    }
}

/// # Safety
/// `im` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_vertex_count(im: *const WmImmersion) -> usize {
    im.as_ref().map_or(0, |im| im.inner.mesh.vertex_count())
}

/// # Safety
/// `im` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_face_count(im: *const WmImmersion) -> usize {
    im.as_ref().map_or(0, |im| im.inner.mesh.face_count())
}

/// Copies vertex positions (xyz triples) into `buf`; returns the number of
/// doubles required. Copies nothing when `cap` is too small.
///
/// # Safety
/// `buf` must point to `cap` writable doubles, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn wm_immersion_positions(
    im: *const WmImmersion,
    buf: *mut f64,
    cap: usize,
) -> usize {
    let Some(im) = im.as_ref() else { return 0 };
    let needed = im.inner.mesh.vertex_count() * 3;
    if !buf.is_null() && cap >= needed {
        for (i, p) in im.inner.positions().iter().enumerate() {
            *buf.add(3 * i) = p.x;
            *buf.add(3 * i + 1) = p.y;
            *buf.add(3 * i + 2) = p.z;
        }
    }
    needed
}

/// Relaxed energy breakdown in the Aubin gauge (identity gauge when the
/// balance solver cannot converge).
///
/// # Safety
/// `im` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wm_energy(
    im: *const WmImmersion,
    sigma: f64,
    out: *mut WmEnergyBreakdown,
) -> WmStatus {
    run(|| {
        let (Some(im), Some(out)) = (im.as_ref(), out.as_mut()) else {
            return Ok(WmStatus::NullPointer);
        };
        let p = ViscosityParams::new(sigma)?;
        let e = willmore::minmax::frame_energy(&im.inner, &p)?;
        *out = WmEnergyBreakdown {
            willmore: e.willmore,
            smoother: e.smoother,
            onofri: e.onofri,
            total: e.total,
            area: e.area,
            sigma_derivative: e.sigma_derivative,
        };
        Ok(WmStatus::Ok)
    })
}

/// Aubin balance: writes the gauge ball parameter into `a_out[3]` and the
/// final normalized barycenter norm into `barycenter_norm`.
///
/// # Safety
/// `im` must be a live handle; `a_out` must point to 3 writable doubles and
/// `barycenter_norm` to one.
#[no_mangle]
pub unsafe extern "C" fn wm_aubin_balance(
    im: *const WmImmersion,
    a_out: *mut f64,
    barycenter_norm: *mut f64,
) -> WmStatus {
    run(|| {
        let Some(im) = im.as_ref() else {
            return Ok(WmStatus::NullPointer);
        };
        if a_out.is_null() || barycenter_norm.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        let g = aubin_balance(&im.inner)?;
        let geo = induced_geometry(&im.inner)?;
        *a_out = g.mobius.a.x;
        *a_out.add(1) = g.mobius.a.y;
        *a_out.add(2) = g.mobius.a.z;
        *barycenter_norm = g.barycenter(&im.inner, &geo).norm();
        Ok(WmStatus::Ok)
    })
}

/// Analytic-vs-finite-difference gradient check; writes the max relative
/// deviation. A step of 0 selects the default 1e-5 x diameter.
///
/// # Safety
/// `im` live handle, `max_rel_deviation` one writable double.
#[no_mangle]
pub unsafe extern "C" fn wm_grad_check(
    im: *const WmImmersion,
    sigma: f64,
    h: f64,
    max_rel_deviation: *mut f64,
) -> WmStatus {
    run(|| {
        let Some(im) = im.as_ref() else {
            return Ok(WmStatus::NullPointer);
        };
        if max_rel_deviation.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        let p = ViscosityParams::new(sigma)?;
        let g = aubin_balance(&im.inner)?;
        let step = if h > 0.0 { h } else { 1e-5 * im.inner.diameter() };
        let analytic = grad_analytic(&im.inner, &g, &p)?;
        let fd = grad_fd(&im.inner, &g, &p, step)?;
        let scale = analytic.max_norm().max(1e-300);
        let dev = analytic
            .w
            .iter()
            .zip(&fd.w)
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max);
        *max_rel_deviation = dev / scale;
        Ok(WmStatus::Ok)
    })
}

unsafe fn loop_from_raw(
    im: &Immersion,
    vertices: *const u32,
    len: usize,
) -> Result<EdgeLoop, Error> {
    if vertices.is_null() {
        return Err(Error::Parameter("null loop".into()));
    }
    let slice = std::slice::from_raw_parts(vertices, len);
    EdgeLoop::new(im, slice.to_vec())
}

/// Willmore flux residue around a vertex loop; writes the residue vector
/// into `out[3]`.
///
/// # Safety
/// `im` live handle; `vertices` points to `len` vertex indices; `out` to 3
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_willmore_residue(
    im: *const WmImmersion,
    vertices: *const u32,
    len: usize,
    out: *mut f64,
) -> WmStatus {
    run(|| {
        let Some(im) = im.as_ref() else {
            return Ok(WmStatus::NullPointer);
        };
        if out.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        let lp = loop_from_raw(&im.inner, vertices, len)?;
        let r = willmore_residue(&im.inner, &lp)?;
        *out = r.x;
        *out.add(1) = r.y;
        *out.add(2) = r.z;
        Ok(WmStatus::Ok)
    })
}

/// First residue around a vertex loop; `triple_coefficient` selects the
/// literal-3 weight on the normal projection.
///
/// # Safety
/// Same contracts as `wm_willmore_residue`.
#[no_mangle]
pub unsafe extern "C" fn wm_first_residue(
    im: *const WmImmersion,
    vertices: *const u32,
    len: usize,
    triple_coefficient: bool,
    out: *mut f64,
) -> WmStatus {
    run(|| {
        let Some(im) = im.as_ref() else {
            return Ok(WmStatus::NullPointer);
        };
        if out.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        let lp = loop_from_raw(&im.inner, vertices, len)?;
        let r = first_residue(&im.inner, &lp, triple_coefficient)?;
        *out = r.x;
        *out.add(1) = r.y;
        *out.add(2) = r.z;
        Ok(WmStatus::Ok)
    })
}

/// Bending-energy concentration balls (greedy geodesic covering of the
/// reference sphere). Writes up to `cap` balls and the total found count.
///
/// # Safety
/// `im` live handle; `out_buf` points to `cap` writable `WmBubble`s (may be
/// null when `cap` is 0); `out_count` one writable usize.
#[no_mangle]
pub unsafe extern "C" fn wm_detect_bubbles(
    im: *const WmImmersion,
    epsilon: f64,
    radius: f64,
    out_buf: *mut WmBubble,
    cap: usize,
    out_count: *mut usize,
) -> WmStatus {
    run(|| {
        let Some(im) = im.as_ref() else {
            return Ok(WmStatus::NullPointer);
        };
        if out_count.is_null() {
            return Ok(WmStatus::NullPointer);
        }
        let bubbles = willmore::minmax::detect_bubbles_with_radius(&im.inner, epsilon, radius)?;
        *out_count = bubbles.len();
        if !out_buf.is_null() {
            for (i, b) in bubbles.iter().take(cap).enumerate() {
                *out_buf.add(i) = WmBubble {
                    center_vertex: b.center_vertex,
                    radius: b.radius,
                    energy: b.energy,
                };
            }
        }
        Ok(WmStatus::Ok)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::f64::consts::PI;

    #[test]
    fn sphere_energy_through_the_abi() {
        unsafe {
            let mut im: *mut WmImmersion = std::ptr::null_mut();
            assert_eq!(wm_immersion_sphere(4, 1.0, &mut im), WmStatus::Ok);
            assert_eq!(wm_immersion_vertex_count(im), 2562);
            let mut e = WmEnergyBreakdown {
                willmore: 0.0,
                smoother: 0.0,
                onofri: 0.0,
                total: 0.0,
                area: 0.0,
                sigma_derivative: 0.0,
            };
            assert_eq!(wm_energy(im, 0.1, &mut e), WmStatus::Ok);
            assert!((e.willmore - 4.0 * PI).abs() / (4.0 * PI) < 0.01);
            assert!((e.total - 4.16 * PI).abs() / (4.16 * PI) < 0.01);
            wm_immersion_free(im);
        }
    }

    #[test]
    fn error_paths_and_messages() {
        unsafe {
            let mut im: *mut WmImmersion = std::ptr::null_mut();
            assert_eq!(wm_immersion_sphere(99, 1.0, &mut im), WmStatus::Parameter);
            let mut buf = [0i8; 128];
            let len = wm_last_error_message(buf.as_mut_ptr(), buf.len());
            assert!(len > 0);
            let msg = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
            assert!(msg.contains("out of range"), "{msg}");

            let spec = CString::new("torus").unwrap();
            assert_eq!(
                wm_immersion_fixture(spec.as_ptr(), 3, &mut im),
                WmStatus::Parameter
            );

            let path = CString::new("/nonexistent/m.off").unwrap();
            assert_eq!(
                wm_immersion_from_file(path.as_ptr(), &mut im),
                WmStatus::Io
            );
        }
    }

    #[test]
    fn balance_and_gradient_through_the_abi() {
        unsafe {
            let mut im: *mut WmImmersion = std::ptr::null_mut();
            let spec = CString::new("ellipsoid:1:1:2").unwrap();
            assert_eq!(wm_immersion_fixture(spec.as_ptr(), 3, &mut im), WmStatus::Ok);
            let mut a = [0.0f64; 3];
            let mut bary = 1.0f64;
            assert_eq!(
                wm_aubin_balance(im, a.as_mut_ptr(), &mut bary),
                WmStatus::Ok
            );
            assert!(bary < 1e-6);
            let mut dev = 1.0;
            assert_eq!(wm_grad_check(im, 0.1, 0.0, &mut dev), WmStatus::Ok);
            assert!(dev < 1e-4, "gradient deviation {dev}");
            wm_immersion_free(im);
        }
    }

    #[test]
    fn bubbles_and_file_roundtrip() {
        unsafe {
            let mut im: *mut WmImmersion = std::ptr::null_mut();
            let spec = CString::new("bump-sphere:0.6:0.08").unwrap();
            assert_eq!(wm_immersion_fixture(spec.as_ptr(), 4, &mut im), WmStatus::Ok);
            let mut bubbles = [WmBubble {
                center_vertex: 0,
                radius: 0.0,
                energy: 0.0,
            }; 8];
            let mut count = 0usize;
            assert_eq!(
                wm_detect_bubbles(im, 3.0, 0.25, bubbles.as_mut_ptr(), 8, &mut count),
                WmStatus::Ok
            );
            assert_eq!(count, 1, "one concentration ball at the bump");

            let dir = std::env::temp_dir().join(format!("willmore_ffi_{}", std::process::id()));
            std::fs::create_dir_all(&dir).unwrap();
            let path = CString::new(dir.join("bump.off").to_str().unwrap()).unwrap();
            assert_eq!(wm_immersion_write_file(im, path.as_ptr()), WmStatus::Ok);
            let mut im2: *mut WmImmersion = std::ptr::null_mut();
            assert_eq!(wm_immersion_from_file(path.as_ptr(), &mut im2), WmStatus::Ok);
            assert_eq!(
                wm_immersion_vertex_count(im),
                wm_immersion_vertex_count(im2)
            );
            wm_immersion_free(im);
            wm_immersion_free(im2);
            std::fs::remove_dir_all(&dir).ok();
        }
    }

    #[test]
    fn residues_through_the_abi() {
        unsafe {
            let mut im: *mut WmImmersion = std::ptr::null_mut();
            assert_eq!(wm_immersion_sphere(4, 1.0, &mut im), WmStatus::Ok);
            // vertex 0's one-ring: its 5 neighbors in cyclic order
            let inner = &(*im).inner;
            let lp = EdgeLoop::cap_boundary_about(inner, inner.mesh.points()[0], 0.9).unwrap();
            let verts: Vec<u32> = lp.vertices().to_vec();
            let mut out = [0.0f64; 3];
            assert_eq!(
                wm_willmore_residue(im, verts.as_ptr(), verts.len(), out.as_mut_ptr()),
                WmStatus::Ok
            );
            let norm = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
            assert!(norm < 1e-3, "sphere residue {norm}");
            // non-simple loop rejected
            let bad = [0u32, 1, 0];
            assert_eq!(
                wm_willmore_residue(im, bad.as_ptr(), 3, out.as_mut_ptr()),
                WmStatus::Parameter
            );
            wm_immersion_free(im);
        }
    }

    #[test]
    fn generated_header_exists_with_expected_symbols() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("willmore.h");
        let text = std::fs::read_to_string(&header).expect("cbindgen header");
        for symbol in [
            "wm_immersion_sphere",
            "wm_energy",
            "wm_aubin_balance",
            "wm_grad_check",
            "wm_willmore_residue",
            "wm_detect_bubbles",
            "WmStatus",
            "WmEnergyBreakdown",
        ] {
            assert!(text.contains(symbol), "header lacks {symbol}");
        }
    }
}
