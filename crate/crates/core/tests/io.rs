use bendkit::bending::synthesize;
use bendkit::hypersurface::classify;
use bendkit::io::*;
use bendkit::registry::{build_example, Resolution};
use bendkit::Error;

fn small() -> Resolution {
    Resolution { nu: 17, nv: 17, ns: 5 }
}

#[test]
fn family_round_trip_is_bit_exact() {
    let ex = build_example("clifford", small()).unwrap();
    let fam = ex.family.unwrap();
    let text = to_json(&family_bundle(&fam)).unwrap();
    let back = family_from_bundle(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.phi0.values(), fam.phi0.values());
    assert_eq!(back.phi.values(), fam.phi.values());
    assert_eq!(back.m.values(), fam.m.values());
    assert_eq!(back.kind, fam.kind);
    assert_eq!(to_json(&family_bundle(&back)).unwrap(), text);
}

#[test]
fn hypersurface_round_trip_preserves_derived_data() {
    let hyp = build_example("clifford", small()).unwrap().hyp;
    let text = to_json(&hypersurface_bundle(&hyp)).unwrap();
    let back = hypersurface_from_bundle(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.a_chart, hyp.a_chart);
    assert_eq!(back.metric, hyp.metric);
    assert_eq!(back.nullity, hyp.nullity);
    assert_eq!(back.regular, hyp.regular);
    let (c1, c2) = (hyp.checks.unwrap(), back.checks.unwrap());
    assert_eq!(c1.shape_cross_check, c2.shape_cross_check);
    let (k1, k2) = (classify(&hyp).unwrap(), classify(&back).unwrap());
    assert_eq!(k1.verdict, k2.verdict);
    assert_eq!(k1.residuals, k2.residuals);
}

#[test]
fn bending_round_trip() {
    let hyp = build_example("clifford", small()).unwrap().hyp;
    let cls = classify(&hyp).unwrap();
    let tensors = synthesize(&hyp, &cls).unwrap();
    let file = BendingFile { hyp, b_chart: Some(tensors.b_chart.clone()), tensors: Some(tensors.clone()), t: None, theta: None, meta: Default::default() };
    let text = to_json(&bending_bundle(&file)).unwrap();
    let back = bending_from_bundle(&serde_json::from_str(&text).unwrap()).unwrap();
    let t2 = back.tensors.unwrap();
    assert_eq!(t2.t.values(), tensors.t.values());
    assert_eq!(t2.b_chart, tensors.b_chart);
    assert_eq!(t2.residuals, tensors.residuals);
    assert_eq!(back.t.unwrap().values(), tensors.t.values());
}

#[test]
fn wrong_format_is_rejected() {
    let fam = build_example("clifford", small()).unwrap().family.unwrap();
    let b = family_bundle(&fam);
    assert!(matches!(hypersurface_from_bundle(&b), Err(Error::Format(_))));
    let mut b = b;
    b.fields.remove("m");
    assert!(matches!(family_from_bundle(&b), Err(Error::Format(_))));
}

#[test]
fn missing_file_names_the_path() {
    let err = read_json::<Bundle>(std::path::Path::new("/nonexistent/family.json")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/family.json"));
    assert_eq!(err.exit_class().code(), 2);
}

#[test]
fn obj_slice_counts() {
    let hyp = build_example("clifford", small()).unwrap().hyp;
    let text = obj_slice(&hyp, 2, [0, 1, 2]).unwrap();
    let verts = text.lines().filter(|l| l.starts_with("v ")).count();
    let faces = text.lines().filter(|l| l.starts_with("f ")).count();
    assert_eq!(verts, 17 * 17);
    assert_eq!(faces, 2 * 16 * 16);
    assert!(obj_slice(&hyp, 5, [0, 1, 2]).is_err());
    assert!(obj_slice(&hyp, 0, [0, 1, 4]).is_err());
}

#[test]
fn obj_skips_singular_nodes() {
    let mut hyp = build_example("clifford", small()).unwrap().hyp;
    let idx = hyp.grid.idx(3, 4, 1);
    hyp.regular[idx] = false;
    let text = obj_slice(&hyp, 1, [0, 1, 3]).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 17 * 17 - 1);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2 * (16 * 16 - 4));
}
