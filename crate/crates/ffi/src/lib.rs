//! C ABI for the dcme toolkit.
//!
//! Conventions: raw structures are opaque handles created and destroyed by
//! this library; every fallible call returns a [`DcmeStatus`] and writes its
//! result through an out pointer. `dcme_last_error_message` describes the
//! most recent failure on the calling thread. The C header is generated into
//! `include/dcme.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use dcme::codec::{self, DecodeParams, Detection};
use dcme::error::Error;
use dcme::eval::{self, ApThresholds, EvalImage};
use dcme::grid::{build_class_grid, class_of_instance, ClassPriority};
use dcme::io;
use dcme::loss::{clip_error, clip_error_grad, LossConfig};
use dcme::types::{ClassGrid, GridSpec, InstanceLabelMap, VectorField};

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcmeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ValidationError = 3,
    IoError = 4,
    IndexOutOfRange = 5,
    BufferTooSmall = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> DcmeStatus {
    match err {
        Error::Io { .. } => DcmeStatus::IoError,
        _ => DcmeStatus::ValidationError,
    }
}

fn fail(err: Error) -> DcmeStatus {
    let status = status_of(&err);
    set_last_error(err.to_string());
    status
}

/// Message for the most recent error on this thread, or NULL when the last
/// call succeeded. The pointer stays valid until the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn dcme_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |msg| msg.as_ptr())
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn dcme_status_name(status: DcmeStatus) -> *const c_char {
    let name: &'static CStr = match status {
        DcmeStatus::Ok => c"ok",
        DcmeStatus::NullArgument => c"null argument",
        DcmeStatus::InvalidUtf8 => c"invalid utf-8",
        DcmeStatus::ValidationError => c"validation error",
        DcmeStatus::IoError => c"io error",
        DcmeStatus::IndexOutOfRange => c"index out of range",
        DcmeStatus::BufferTooSmall => c"buffer too small",
    };
    name.as_ptr()
}

unsafe fn path_from<'a>(ptr_: *const c_char) -> Result<&'a Path, DcmeStatus> {
    if ptr_.is_null() {
        return Err(DcmeStatus::NullArgument);
    }
    let s = unsafe { CStr::from_ptr(ptr_) };
    match s.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_last_error("path is not valid UTF-8".into());
            Err(DcmeStatus::InvalidUtf8)
        }
    }
}

macro_rules! nonnull {
    ($p:expr) => {
        if $p.is_null() {
            return DcmeStatus::NullArgument;
        }
    };
}

// ---------------------------------------------------------------------------
// Label maps
// ---------------------------------------------------------------------------

/// Opaque instance label map handle.
pub struct DcmeLabelMap(InstanceLabelMap);

/// Read a label map file (the `ILM v1` text format).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer; the
/// returned handle must be released with `dcme_label_map_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_label_map_read(
    path: *const c_char,
    out: *mut *mut DcmeLabelMap,
) -> DcmeStatus {
    nonnull!(out);
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::read_label_map(path) {
        Ok(map) => {
            unsafe { *out = Box::into_raw(Box::new(DcmeLabelMap(map))) };
            DcmeStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `map` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcme_label_map_write(
    path: *const c_char,
    map: *const DcmeLabelMap,
) -> DcmeStatus {
    nonnull!(map);
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::write_label_map(path, unsafe { &(*map).0 }) {
        Ok(()) => DcmeStatus::Ok,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `map` must be a handle from this library, not yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dcme_label_map_free(map: *mut DcmeLabelMap) {
    if !map.is_null() {
        drop(unsafe { Box::from_raw(map) });
    }
}

/// Row count, or 0 when the handle is NULL.
///
/// # Safety
/// `map` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn dcme_label_map_rows(map: *const DcmeLabelMap) -> u32 {
    if map.is_null() {
        0
    } else {
        unsafe { (*map).0.dims().rows as u32 }
    }
}

/// Column count, or 0 when the handle is NULL.
///
/// # Safety
/// `map` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn dcme_label_map_cols(map: *const DcmeLabelMap) -> u32 {
    if map.is_null() {
        0
    } else {
        unsafe { (*map).0.dims().cols as u32 }
    }
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

/// Opaque displacement field handle.
pub struct DcmeVectorField(VectorField);

/// Encode a label map into its center-of-mass displacement field.
///
/// # Safety
/// `map` must be a live handle; `out` receives a new handle to free with
/// `dcme_vector_field_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_encode(
    map: *const DcmeLabelMap,
    out: *mut *mut DcmeVectorField,
) -> DcmeStatus {
    nonnull!(map);
    nonnull!(out);
    let field = codec::encode(unsafe { &(*map).0 });
    unsafe { *out = Box::into_raw(Box::new(DcmeVectorField(field))) };
    DcmeStatus::Ok
}

/// # Safety
/// `path` must be NUL-terminated; the handle in `out` must be freed with
/// `dcme_vector_field_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_vector_field_read(
    path: *const c_char,
    out: *mut *mut DcmeVectorField,
) -> DcmeStatus {
    nonnull!(out);
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::read_vector_field(path) {
        Ok(field) => {
            unsafe { *out = Box::into_raw(Box::new(DcmeVectorField(field))) };
            DcmeStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `field` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcme_vector_field_write(
    path: *const c_char,
    field: *const DcmeVectorField,
) -> DcmeStatus {
    nonnull!(field);
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::write_vector_field(path, unsafe { &(*field).0 }) {
        Ok(()) => DcmeStatus::Ok,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `field` must be a handle from this library, not yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dcme_vector_field_free(field: *mut DcmeVectorField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

// ---------------------------------------------------------------------------
// Class grids
// ---------------------------------------------------------------------------

/// Opaque class grid handle.
pub struct DcmeClassGrid(ClassGrid);

/// Build the class grid annotation of `map` at grid size 2^`grid_n`, with
/// the class priority derived from the map itself.
///
/// # Safety
/// `map` must be a live handle; the handle in `out` must be freed with
/// `dcme_class_grid_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_class_grid_build(
    map: *const DcmeLabelMap,
    grid_n: u32,
    out: *mut *mut DcmeClassGrid,
) -> DcmeStatus {
    nonnull!(map);
    nonnull!(out);
    let map = unsafe { &(*map).0 };
    let result = (|| {
        let gs = GridSpec::new(grid_n)?;
        let priority = ClassPriority::derive(std::slice::from_ref(map), &[])?;
        build_class_grid(map, gs, &priority)
    })();
    match result {
        Ok(grid) => {
            unsafe { *out = Box::into_raw(Box::new(DcmeClassGrid(grid))) };
            DcmeStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `path` must be NUL-terminated; the handle in `out` must be freed with
/// `dcme_class_grid_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_class_grid_read(
    path: *const c_char,
    out: *mut *mut DcmeClassGrid,
) -> DcmeStatus {
    nonnull!(out);
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::read_class_grid(path) {
        Ok(grid) => {
            unsafe { *out = Box::into_raw(Box::new(DcmeClassGrid(grid))) };
            DcmeStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `grid` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcme_class_grid_write(
    path: *const c_char,
    grid: *const DcmeClassGrid,
) -> DcmeStatus {
    nonnull!(grid);
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::write_class_grid(path, unsafe { &(*grid).0 }) {
        Ok(()) => DcmeStatus::Ok,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `grid` must be a handle from this library, not yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dcme_class_grid_free(grid: *mut DcmeClassGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Decode tuning parameters (see `dcme_decode_params_default`).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcmeDecodeParams {
    pub min_votes: u32,
    pub merge_radius: f64,
    pub assign_tolerance: f64,
    pub fg_threshold: f64,
}

/// Fill `out` with the default decode parameters.
///
/// # Safety
/// `out` must point to writable memory for one `DcmeDecodeParams`.
#[no_mangle]
pub unsafe extern "C" fn dcme_decode_params_default(out: *mut DcmeDecodeParams) -> DcmeStatus {
    nonnull!(out);
    let d = DecodeParams::default();
    unsafe {
        *out = DcmeDecodeParams {
            min_votes: d.min_votes,
            merge_radius: d.merge_radius,
            assign_tolerance: d.assign_tolerance,
            fg_threshold: d.fg_threshold,
        };
    }
    DcmeStatus::Ok
}

/// Opaque decoded detection list.
pub struct DcmeDetectionList {
    detections: Vec<Detection>,
    rows: usize,
    cols: usize,
}

/// Decode a field into class-agnostic detections.
///
/// # Safety
/// `field` must be a live handle; `params` may be NULL for defaults; the
/// handle in `out` must be freed with `dcme_detection_list_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_decode(
    field: *const DcmeVectorField,
    params: *const DcmeDecodeParams,
    out: *mut *mut DcmeDetectionList,
) -> DcmeStatus {
    nonnull!(field);
    nonnull!(out);
    let field = unsafe { &(*field).0 };
    let p = if params.is_null() {
        DecodeParams::default()
    } else {
        let p = unsafe { *params };
        DecodeParams {
            min_votes: p.min_votes,
            merge_radius: p.merge_radius,
            assign_tolerance: p.assign_tolerance,
            fg_threshold: p.fg_threshold,
        }
    };
    match codec::decode(field, &p) {
        Ok(detections) => {
            unsafe {
                *out = Box::into_raw(Box::new(DcmeDetectionList {
                    detections,
                    rows: field.dims().rows,
                    cols: field.dims().cols,
                }));
            }
            DcmeStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Assign classes to decoded detections by center-of-mass lookup in `grid`.
///
/// # Safety
/// Both handles must be live and from this library.
#[no_mangle]
pub unsafe extern "C" fn dcme_detection_list_classify(
    list: *mut DcmeDetectionList,
    grid: *const DcmeClassGrid,
) -> DcmeStatus {
    nonnull!(list);
    nonnull!(grid);
    let list = unsafe { &mut *list };
    let grid = unsafe { &(*grid).0 };
    let dims = match dcme::types::Dims::new(list.rows, list.cols) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    for det in &mut list.detections {
        match class_of_instance(det.center.to_pixel(dims), grid) {
            Ok(class) => det.class = class,
            Err(e) => return fail(e),
        }
    }
    DcmeStatus::Ok
}

/// Number of detections, or 0 for NULL.
///
/// # Safety
/// `list` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn dcme_detection_list_len(list: *const DcmeDetectionList) -> usize {
    if list.is_null() {
        0
    } else {
        unsafe { (*list).detections.len() }
    }
}

/// # Safety
/// `list` must be a handle from this library, not yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dcme_detection_list_free(list: *mut DcmeDetectionList) {
    if !list.is_null() {
        drop(unsafe { Box::from_raw(list) });
    }
}

/// Class id, confidence, center and mask size of detection `index`.
///
/// # Safety
/// `list` must be live; each non-NULL out pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcme_detection_info(
    list: *const DcmeDetectionList,
    index: usize,
    class_out: *mut u32,
    score_out: *mut f64,
    center_x_out: *mut f64,
    center_y_out: *mut f64,
    mask_len_out: *mut usize,
) -> DcmeStatus {
    nonnull!(list);
    let list = unsafe { &*list };
    let Some(det) = list.detections.get(index) else {
        return DcmeStatus::IndexOutOfRange;
    };
    unsafe {
        if !class_out.is_null() {
            *class_out = det.class.0;
        }
        if !score_out.is_null() {
            *score_out = det.score;
        }
        if !center_x_out.is_null() {
            *center_x_out = det.center.x;
        }
        if !center_y_out.is_null() {
            *center_y_out = det.center.y;
        }
        if !mask_len_out.is_null() {
            *mask_len_out = det.mask.len();
        }
    }
    DcmeStatus::Ok
}

/// Copy a detection mask into `buffer` as interleaved (x, y) pairs.
/// `capacity` counts u32 values, so it must be at least twice the mask size.
///
/// # Safety
/// `buffer` must be writable for `capacity` u32 values.
#[no_mangle]
pub unsafe extern "C" fn dcme_detection_mask(
    list: *const DcmeDetectionList,
    index: usize,
    buffer: *mut u32,
    capacity: usize,
) -> DcmeStatus {
    nonnull!(list);
    nonnull!(buffer);
    let list = unsafe { &*list };
    let Some(det) = list.detections.get(index) else {
        return DcmeStatus::IndexOutOfRange;
    };
    if capacity < det.mask.len() * 2 {
        return DcmeStatus::BufferTooSmall;
    }
    let out = unsafe { std::slice::from_raw_parts_mut(buffer, det.mask.len() * 2) };
    for (i, p) in det.mask.iter().enumerate() {
        out[2 * i] = p.x as u32;
        out[2 * i + 1] = p.y as u32;
    }
    DcmeStatus::Ok
}

// ---------------------------------------------------------------------------
// Evaluation and loss
// ---------------------------------------------------------------------------

/// Score detections against ground truth at the standard threshold sweep
/// (0.50..0.95) and return the report table as a newly allocated string.
///
/// # Safety
/// Handles must be live; the string written to `report_out` must be freed
/// with `dcme_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_evaluate(
    list: *const DcmeDetectionList,
    gt: *const DcmeLabelMap,
    report_out: *mut *mut c_char,
) -> DcmeStatus {
    nonnull!(list);
    nonnull!(gt);
    nonnull!(report_out);
    let list = unsafe { &*list };
    let gt = unsafe { &(*gt).0 };
    let report = match eval::evaluate_set(
        &[EvalImage {
            detections: &list.detections,
            gt,
        }],
        &ApThresholds::default(),
    ) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let text = io::format_eval_report(&report);
    match CString::new(text) {
        Ok(s) => {
            unsafe { *report_out = s.into_raw() };
            DcmeStatus::Ok
        }
        Err(_) => DcmeStatus::ValidationError,
    }
}

/// Half-resolution ground-truth round trip report (representation loss).
///
/// # Safety
/// `gt` must be live; the string written to `report_out` must be freed with
/// `dcme_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dcme_halfres_roundtrip_eval(
    gt: *const DcmeLabelMap,
    report_out: *mut *mut c_char,
) -> DcmeStatus {
    nonnull!(gt);
    nonnull!(report_out);
    let gt = unsafe { &(*gt).0 };
    let report = match eval::halfres_roundtrip_eval(gt, &ApThresholds::default()) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    match CString::new(io::format_eval_report(&report)) {
        Ok(s) => {
            unsafe { *report_out = s.into_raw() };
            DcmeStatus::Ok
        }
        Err(_) => DcmeStatus::ValidationError,
    }
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn dcme_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Clipped-logistic error transform with amplitude `a`; NaN when `a <= 0`.
#[no_mangle]
pub extern "C" fn dcme_clip_error(x: f64, a: f64) -> f64 {
    match LossConfig::new(a) {
        Ok(cfg) => clip_error(x, &cfg),
        Err(_) => f64::NAN,
    }
}

/// Derivative of the clipped-logistic transform; NaN when `a <= 0`.
#[no_mangle]
pub extern "C" fn dcme_clip_error_grad(x: f64, a: f64) -> f64 {
    match LossConfig::new(a) {
        Ok(cfg) => clip_error_grad(x, &cfg),
        Err(_) => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dcme::types::ClassId;

    fn c_path(dir: &tempfile::TempDir, name: &str) -> CString {
        CString::new(dir.path().join(name).to_str().unwrap()).unwrap()
    }

    fn sample_map_file(dir: &tempfile::TempDir) -> CString {
        use dcme::synth::{generate, SceneSpec};
        use dcme::types::Dims;
        let spec = SceneSpec {
            n_instances: 5,
            classes: vec![ClassId(1), ClassId(3)],
            min_cm_separation: 9.0,
            extent_range: (6, 16),
            min_area: 12,
            cm_exclusive_grid: Some(GridSpec::new(4).unwrap()),
            ..SceneSpec::new(Dims::new(96, 96).unwrap(), 0, 9)
        };
        let map = generate(&spec).unwrap();
        let path = c_path(dir, "scene.ilm");
        io::write_label_map(Path::new(path.to_str().unwrap()), &map).unwrap();
        path
    }

    #[test]
    fn round_trip_through_the_c_surface() {
        let dir = tempfile::tempdir().unwrap();
        let path = sample_map_file(&dir);
        unsafe {
            let mut map: *mut DcmeLabelMap = ptr::null_mut();
            assert_eq!(dcme_label_map_read(path.as_ptr(), &mut map), DcmeStatus::Ok);
            assert_eq!(dcme_label_map_rows(map), 96);
            assert_eq!(dcme_label_map_cols(map), 96);

            let mut field: *mut DcmeVectorField = ptr::null_mut();
            assert_eq!(dcme_encode(map, &mut field), DcmeStatus::Ok);

            let field_path = c_path(&dir, "scene.vf");
            assert_eq!(
                dcme_vector_field_write(field_path.as_ptr(), field),
                DcmeStatus::Ok
            );
            let mut field2: *mut DcmeVectorField = ptr::null_mut();
            assert_eq!(
                dcme_vector_field_read(field_path.as_ptr(), &mut field2),
                DcmeStatus::Ok
            );

            let mut grid: *mut DcmeClassGrid = ptr::null_mut();
            assert_eq!(dcme_class_grid_build(map, 4, &mut grid), DcmeStatus::Ok);

            let mut params = DcmeDecodeParams {
                min_votes: 0,
                merge_radius: 0.0,
                assign_tolerance: 0.0,
                fg_threshold: 0.0,
            };
            assert_eq!(dcme_decode_params_default(&mut params), DcmeStatus::Ok);
            assert_eq!(params.min_votes, 10);

            let mut dets: *mut DcmeDetectionList = ptr::null_mut();
            assert_eq!(dcme_decode(field2, &params, &mut dets), DcmeStatus::Ok);
            assert_eq!(dcme_detection_list_len(dets), 5);
            assert_eq!(dcme_detection_list_classify(dets, grid), DcmeStatus::Ok);

            let mut class = 0u32;
            let mut score = 0.0f64;
            let mut mask_len = 0usize;
            assert_eq!(
                dcme_detection_info(
                    dets,
                    0,
                    &mut class,
                    &mut score,
                    ptr::null_mut(),
                    ptr::null_mut(),
                    &mut mask_len
                ),
                DcmeStatus::Ok
            );
            assert!(class == 1 || class == 3);
            assert_eq!(score, 1.0);
            assert!(mask_len >= 12);

            let mut buf = vec![0u32; mask_len * 2];
            assert_eq!(
                dcme_detection_mask(dets, 0, buf.as_mut_ptr(), buf.len()),
                DcmeStatus::Ok
            );
            assert_eq!(
                dcme_detection_mask(dets, 0, buf.as_mut_ptr(), 1),
                DcmeStatus::BufferTooSmall
            );
            assert_eq!(
                dcme_detection_info(
                    dets,
                    99,
                    ptr::null_mut(),
                    ptr::null_mut(),
                    ptr::null_mut(),
                    ptr::null_mut(),
                    ptr::null_mut()
                ),
                DcmeStatus::IndexOutOfRange
            );

            let mut report: *mut c_char = ptr::null_mut();
            assert_eq!(dcme_evaluate(dets, map, &mut report), DcmeStatus::Ok);
            let text = CStr::from_ptr(report).to_str().unwrap().to_string();
            assert!(text.contains("mean"));
            assert!(text.contains("100.0"), "{text}");
            dcme_string_free(report);

            let mut report: *mut c_char = ptr::null_mut();
            assert_eq!(dcme_halfres_roundtrip_eval(map, &mut report), DcmeStatus::Ok);
            dcme_string_free(report);

            dcme_detection_list_free(dets);
            dcme_class_grid_free(grid);
            dcme_vector_field_free(field2);
            dcme_vector_field_free(field);
            dcme_label_map_free(map);
        }
    }

    #[test]
    fn error_paths_set_messages() {
        unsafe {
            let mut map: *mut DcmeLabelMap = ptr::null_mut();
            let missing = CString::new("/definitely/not/here.ilm").unwrap();
            assert_eq!(
                dcme_label_map_read(missing.as_ptr(), &mut map),
                DcmeStatus::IoError
            );
            let msg = dcme_last_error_message();
            assert!(!msg.is_null());
            assert!(CStr::from_ptr(msg).to_str().unwrap().contains("not/here"));

            assert_eq!(
                dcme_label_map_read(ptr::null(), &mut map),
                DcmeStatus::NullArgument
            );
            assert_eq!(
                dcme_encode(ptr::null(), ptr::null_mut()),
                DcmeStatus::NullArgument
            );
            assert_eq!(dcme_detection_list_len(ptr::null()), 0);
        }
    }

    #[test]
    fn loss_passthrough() {
        assert_eq!(dcme_clip_error(0.0, 4.0), 0.0);
        assert!((dcme_clip_error(50.0, 4.0) - 2.0).abs() < 1e-9);
        assert_eq!(dcme_clip_error_grad(0.0, 4.0), 1.0);
        assert!(dcme_clip_error(1.0, 0.0).is_nan());
        assert!(dcme_clip_error_grad(1.0, -2.0).is_nan());
    }
}
