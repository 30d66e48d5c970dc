use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use roadaudit::synth::{self, BARRIER_CLASS, COMB_OPEN, MARKING_CLASS, MARKING_PATCH, POLE_CLASS};
use roadaudit_ffi::*;

fn mask_handle(mask: &roadaudit::raster::ClassMask) -> *mut RaClassMask {
    let mut h = ptr::null_mut();
    let st = unsafe { ra_class_mask_new(mask.width(), mask.height(), mask.labels().as_ptr(), mask.labels().len(), &mut h) };
    assert_eq!(st, RaStatus::Ok);
    h
}

fn last_error() -> String {
    let p = ra_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ra_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn hull_with_buffer_sizing() {
    let pts = [
        RaPoint { x: 0, y: 0 },
        RaPoint { x: 4, y: 0 },
        RaPoint { x: 4, y: 4 },
        RaPoint { x: 0, y: 4 },
        RaPoint { x: 2, y: 2 },
    ];
    let mut count = 0;
    let st = unsafe { ra_convex_hull(pts.as_ptr(), pts.len(), ptr::null_mut(), 0, &mut count) };
    assert_eq!(st, RaStatus::Ok);
    assert_eq!(count, 4);
    let mut out = vec![RaPoint { x: -1, y: -1 }; count];
    let st = unsafe { ra_convex_hull(pts.as_ptr(), pts.len(), out.as_mut_ptr(), out.len(), &mut count) };
    assert_eq!(st, RaStatus::Ok);
    assert!(!out.contains(&RaPoint { x: 2, y: 2 }));

    let mut rect = RaRotatedRect { center_x: 0.0, center_y: 0.0, width: 0.0, height: 0.0, angle: 0.0 };
    assert_eq!(unsafe { ra_min_area_rect(pts.as_ptr(), pts.len(), &mut rect) }, RaStatus::Ok);
    assert!((rect.width * rect.height - 16.0).abs() < 1e-9);
}

#[test]
fn errors_carry_status_and_message() {
    let mut count = 0;
    let st = unsafe { ra_convex_hull(ptr::null(), 0, ptr::null_mut(), 0, &mut count) };
    assert_eq!(st, RaStatus::Degenerate);
    assert!(!last_error().is_empty());

    let st = unsafe { ra_convex_hull(ptr::null(), 3, ptr::null_mut(), 0, &mut count) };
    assert_eq!(st, RaStatus::NullArgument);
    assert!(last_error().contains("pts"));

    let mut img = ptr::null_mut();
    let st = unsafe { ra_gray_image_new(3, 3, [0u8; 4].as_ptr(), 4, &mut img) };
    assert_eq!(st, RaStatus::InvalidArgument);
    assert!(img.is_null());

    let path = CString::new("/definitely/not/here.pgm").unwrap();
    assert_eq!(unsafe { ra_gray_image_load(path.as_ptr(), &mut img) }, RaStatus::Io);
}

#[test]
fn barriers_through_the_abi() {
    let mut mask = roadaudit::raster::ClassMask::filled(200, 60, 0);
    COMB_OPEN.paint(&mut mask, 105, 10, BARRIER_CLASS);
    let h = mask_handle(&mask);
    let classes = [BARRIER_CLASS];
    let mut out = [RaBarrier { side: RaSide::Left, solidity: 0.0, safe: true, area: 0.0, x0: 0, y0: 0, x1: 0, y1: 0 }; 4];
    let (mut count, mut dropped) = (0, 99);
    let st = unsafe {
        ra_assess_barriers(h, 200, classes.as_ptr(), 1, 0.8, 0.6, 400.0, out.as_mut_ptr(), out.len(), &mut count, &mut dropped)
    };
    assert_eq!(st, RaStatus::Ok);
    assert_eq!((count, dropped), (1, 0));
    assert_eq!(out[0].side, RaSide::Right);
    assert!(!out[0].safe);
    assert!((out[0].solidity - 0.55).abs() < 0.02);

    let st = unsafe {
        ra_assess_barriers(h, 200, classes.as_ptr(), 1, 1.5, 0.6, 400.0, out.as_mut_ptr(), out.len(), &mut count, ptr::null_mut())
    };
    assert_eq!(st, RaStatus::InvalidArgument);
    unsafe { ra_class_mask_free(h) };
}

#[test]
fn pole_skew_and_no_pole() {
    let (mask, sign) = synth::pole_scene(20.0);
    let h = mask_handle(&mask);
    let mut deg = 0.0;
    assert_eq!(unsafe { ra_pole_skew(h, POLE_CLASS, sign.0, sign.1, &mut deg) }, RaStatus::Ok);
    assert!((deg - 20.0).abs() <= 1.0);
    assert_eq!(unsafe { ra_pole_skew(h, 77, sign.0, sign.1, &mut deg) }, RaStatus::NoPole);
    unsafe { ra_class_mask_free(h) };
}

#[test]
fn marking_damage_through_the_abi() {
    let (gray, mask) = synth::marking_frame(Some(MARKING_PATCH));
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { ra_gray_image_new(gray.width(), gray.height(), gray.data().as_ptr(), gray.data().len(), &mut g) },
        RaStatus::Ok
    );
    assert_eq!(unsafe { ra_gray_image_width(g) }, 120);
    let m = mask_handle(&mask);
    let mut params = std::mem::MaybeUninit::<RaMarkingParams>::uninit();
    assert_eq!(unsafe { ra_marking_params_default(params.as_mut_ptr()) }, RaStatus::Ok);
    let mut params = unsafe { params.assume_init() };
    params.superpixel_area = synth::marking_params().superpixel_area;
    let classes = [MARKING_CLASS];
    let mut out = [RaMarkingRegion { area: 0, mean_density: 0.0, superpixels: 0, x0: 0, y0: 0, x1: 0, y1: 0 }; 4];
    let mut count = 0;
    let st = unsafe { ra_marking_damage(g, m, classes.as_ptr(), 1, &params, out.as_mut_ptr(), out.len(), &mut count) };
    assert_eq!(st, RaStatus::Ok);
    assert_eq!(count, 1);
    let r = out[0];
    assert!(r.x0 <= MARKING_PATCH.x0 && r.y0 <= MARKING_PATCH.y0 && r.x1 >= MARKING_PATCH.x1 && r.y1 >= MARKING_PATCH.y1);
    unsafe {
        ra_gray_image_free(g);
        ra_class_mask_free(m);
    }
}

#[test]
fn track_roundtrip() {
    let csv = CString::new("t,lat,lon\n0,52.0,5.0\n10,52.001,5.001\n").unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { ra_track_parse(csv.as_ptr(), &mut t) }, RaStatus::Ok);
    let (mut lat, mut lon) = (0.0, 0.0);
    assert_eq!(unsafe { ra_track_interpolate(t, 5.0, &mut lat, &mut lon) }, RaStatus::Ok);
    assert!((lat - 52.0005).abs() < 1e-9 && (lon - 5.0005).abs() < 1e-9);
    unsafe { ra_track_free(t) };

    let bad = CString::new("t,lat,lon\n5,1,1\n5,1,1\n").unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { ra_track_parse(bad.as_ptr(), &mut t) }, RaStatus::Track);
}

#[test]
fn manifest_run_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth::write_scene(dir.path()).unwrap();
    let m = CString::new(manifest.to_str().unwrap()).unwrap();

    let mut problems = ptr::null_mut();
    assert_eq!(unsafe { ra_validate_manifest(m.as_ptr(), &mut problems) }, RaStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(problems) }.to_str().unwrap(), "[]");
    unsafe { ra_string_free(problems) };

    let out = dir.path().join("r.geojson");
    let o = CString::new(out.to_str().unwrap()).unwrap();
    let mut summary = ptr::null_mut();
    assert_eq!(unsafe { ra_run_manifest(m.as_ptr(), o.as_ptr(), ptr::null(), 1, &mut summary) }, RaStatus::Ok);
    let s: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(summary) }.to_str().unwrap()).unwrap();
    assert_eq!(s["counts"]["barrier_unsafe"], 1);
    unsafe { ra_string_free(summary) };
    assert!(out.is_file());

    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { ra_run_manifest(missing.as_ptr(), o.as_ptr(), ptr::null(), 1, ptr::null_mut()) },
        RaStatus::ManifestInvalid
    );
}

#[test]
fn reference_library_similarity() {
    let dir = tempfile::tempdir().unwrap();
    synth::write_scene(dir.path()).unwrap();
    let refs = CString::new(dir.path().join("references").to_str().unwrap()).unwrap();
    let mut lib = ptr::null_mut();
    assert_eq!(unsafe { ra_reference_library_load(refs.as_ptr(), &mut lib) }, RaStatus::Ok);
    assert_eq!(unsafe { ra_reference_library_len(lib) }, 1);
    let face = synth::sign_face();
    let mut crop = ptr::null_mut();
    unsafe { ra_gray_image_new(face.width(), face.height(), face.data().as_ptr(), face.data().len(), &mut crop) };
    let mut s = 0.0;
    assert_eq!(unsafe { ra_sign_similarity(lib, synth::SIGN_DETECTOR_CLASS, crop, &mut s) }, RaStatus::Ok);
    assert!((s - 1.0).abs() < 1e-9);
    assert_eq!(unsafe { ra_sign_similarity(lib, 12345, crop, &mut s) }, RaStatus::InvalidArgument);
    unsafe {
        ra_gray_image_free(crop);
        ra_reference_library_free(lib);
    }
}

#[test]
fn header_compiles_as_c99() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = include.join("roadaudit.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["ra_convex_hull", "ra_assess_barriers", "ra_run_manifest", "RA_STATUS_NO_POLE", "typedef struct RaTrack RaTrack"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"roadaudit.h\"\n\
         int probe(const RaClassMask *m) {\n\
           RaBarrier out[4]; size_t n = 0; uint8_t cls = 3;\n\
           RaStatus s = ra_assess_barriers(m, 640, &cls, 1, 0.8, 0.6, 400.0, out, 4, &n, NULL);\n\
           return s == RA_STATUS_OK ? (int)n : -1;\n\
         }\n",
    )
    .unwrap();
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler; header syntax check skipped");
        return;
    };
    assert!(status.success());
}
