use std::ffi::{CStr, CString};
use std::ptr;

use priorfuse_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pf_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn square(z: f64) -> *mut PfMesh {
    let v = [0.0, 0.0, z, 1.0, 0.0, z, 1.0, 1.0, z, 0.0, 1.0, z];
    let t = [0u32, 1, 2, 0, 2, 3];
    let mut mesh = ptr::null_mut();
    let status = unsafe { pf_mesh_new(v.as_ptr(), 4, t.as_ptr(), 2, &mut mesh) };
    assert_eq!(status, PfStatus::Ok, "{}", last_error());
    mesh
}

#[test]
fn mesh_round_trips_through_ply() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("sq.ply").to_str().unwrap()).unwrap();
    let mesh = square(0.5);
    unsafe {
        assert_eq!(pf_mesh_save_ply(mesh, path.as_ptr()), PfStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(pf_mesh_load_ply(path.as_ptr(), &mut back), PfStatus::Ok);
        assert_eq!(
            (pf_mesh_vertex_count(back), pf_mesh_triangle_count(back)),
            (4, 2)
        );
        let mut tris = [0u32; 6];
        assert_eq!(
            pf_mesh_copy_triangles(back, tris.as_mut_ptr(), 6),
            PfStatus::Ok
        );
        assert_eq!(tris, [0, 1, 2, 0, 2, 3]);
        let mut verts = [0.0; 12];
        assert_eq!(
            pf_mesh_copy_vertices(back, verts.as_mut_ptr(), 12),
            PfStatus::Ok
        );
        assert_eq!(verts[2], 0.5);
        assert_eq!(
            pf_mesh_copy_vertices(back, verts.as_mut_ptr(), 11),
            PfStatus::InvalidInput
        );
        pf_mesh_free(back);
        pf_mesh_free(mesh);
    }
}

#[test]
fn evaluate_offset_planes() {
    let (a, b) = (square(0.01), square(0.0));
    let mut m = PfMetrics::default();
    unsafe {
        assert_eq!(pf_evaluate(a, b, 20_000, 0.05, 0, &mut m), PfStatus::Ok);
        assert!((m.chamfer_l1 - 0.01).abs() < 1e-3);
        assert_eq!(m.f_score, 1.0);
        assert_eq!(pf_evaluate(a, a, 1000, 0.05, 0, &mut m), PfStatus::Ok);
        assert_eq!((m.chamfer_l1, m.f_score), (0.0, 1.0));
        pf_mesh_free(a);
        pf_mesh_free(b);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    let mut mesh = ptr::null_mut();
    let missing = CString::new("/nonexistent/dir/x.ply").unwrap();
    unsafe {
        assert_eq!(pf_mesh_load_ply(missing.as_ptr(), &mut mesh), PfStatus::Io);
        assert!(last_error().contains("x.ply"));
        assert!(mesh.is_null());
        assert_eq!(
            pf_mesh_load_ply(ptr::null(), &mut mesh),
            PfStatus::NullPointer
        );
        // index out of range
        let v = [0.0; 9];
        let t = [0u32, 1, 5];
        assert_eq!(
            pf_mesh_new(v.as_ptr(), 3, t.as_ptr(), 1, &mut mesh),
            PfStatus::InvalidInput
        );
        assert!(!last_error().is_empty());
        let mut m = PfMetrics::default();
        assert_eq!(
            pf_evaluate(ptr::null(), ptr::null(), 10, 0.05, 0, &mut m),
            PfStatus::NullPointer
        );
        pf_mesh_free(ptr::null_mut());
        assert_eq!(pf_mesh_vertex_count(ptr::null()), 0);
    }
    let good = square(0.0);
    assert!(last_error().is_empty());
    unsafe { pf_mesh_free(good) };
}

#[test]
fn anr_keeps_agreeing_priors_verbatim() {
    // two pixels: 5 degrees apart (kept) and 40 degrees apart (removed)
    let tilt = |deg: f64| {
        let t = deg.to_radians();
        [t.sin(), 0.0, -t.cos()]
    };
    let rendered = [tilt(0.0), tilt(0.0)].concat();
    let prior = [tilt(5.0), tilt(40.0)].concat();
    let mut out = [9.0; 6];
    let mut mask = [9u8; 2];
    let status = unsafe {
        pf_anr_filter(
            2,
            1,
            rendered.as_ptr(),
            prior.as_ptr(),
            10.0,
            out.as_mut_ptr(),
            mask.as_mut_ptr(),
        )
    };
    assert_eq!(status, PfStatus::Ok, "{}", last_error());
    assert_eq!(mask, [1, 0]);
    assert_eq!(&out[..3], &prior[..3]);
    assert_eq!(&out[3..], &[0.0; 3]);
    let status = unsafe {
        pf_anr_filter(
            2,
            1,
            rendered.as_ptr(),
            prior.as_ptr(),
            95.0,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, PfStatus::InvalidInput);
}

#[test]
fn dnc_keeps_a_consistent_plane() {
    let (w, h) = (16usize, 12usize);
    let intr = PfIntrinsics {
        fx: 20.0,
        fy: 20.0,
        cx: 7.5,
        cy: 5.5,
        width: w,
        height: h,
    };
    let pose = [
        1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    ];
    let depth = vec![2.0; w * h];
    let normals: Vec<f64> = (0..w * h).flat_map(|_| [0.0, 0.0, -1.0]).collect();
    let mut out = vec![0.0; w * h];
    let mut mask = vec![0u8; w * h];
    let status = unsafe {
        pf_dnc_filter(
            &intr,
            pose.as_ptr(),
            depth.as_ptr(),
            normals.as_ptr(),
            8,
            10.0,
            out.as_mut_ptr(),
            mask.as_mut_ptr(),
        )
    };
    assert_eq!(status, PfStatus::Ok, "{}", last_error());
    assert!(mask.iter().all(|&m| m == 1));
    assert_eq!(out, depth);
    let mut bad_pose = pose;
    bad_pose[1] = 0.5;
    let status = unsafe {
        pf_dnc_filter(
            &intr,
            bad_pose.as_ptr(),
            depth.as_ptr(),
            normals.as_ptr(),
            8,
            10.0,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, PfStatus::InvalidInput);
}

#[test]
fn malformed_manifest_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(&manifest, "{ not json").unwrap();
    let path = CString::new(manifest.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(pf_dataset_load(path.as_ptr(), &mut ds), PfStatus::Parse);
        assert!(ds.is_null());
        assert_eq!(pf_dataset_frame_count(ds), 0);
        let mut mesh = ptr::null_mut();
        assert_eq!(
            pf_reconstruct(ds, ptr::null(), &mut mesh),
            PfStatus::NullPointer
        );
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(pf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
