mod common;

use apme::linalg::Mat2;
use apme::mesh::vtk::{read_vtk, write_vtk, VtkFields};
use apme::mesh::Rect;

#[test]
fn file_round_trip_keeps_mesh_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap_0.vtk");
    let mesh = common::unstructured_mesh(300, 17);
    let u: Vec<f64> = mesh.vertices().iter().map(|p| (p.x * p.y).exp() * 1e-7 + p.x).collect();
    let q: Vec<f64> = (0..mesh.n_elements()).map(|k| mesh.area(k)).collect();
    let metric = vec![Mat2::new(3.0, -0.25, -0.25, 0.5); mesh.n_elements()];
    let fields = VtkFields {
        point_scalars: vec![("u", &u)],
        cell_scalars: vec![("area", &q)],
        cell_tensors: vec![("metric", &metric)],
    };
    write_vtk(&path, &mesh, "round trip", &fields).unwrap();
    let back = read_vtk(&path).unwrap();
    assert_eq!(back.mesh.vertices(), mesh.vertices());
    assert_eq!(back.mesh.triangles(), mesh.triangles());
    assert_eq!(back.mesh.domain(), mesh.domain());
    assert_eq!(back.scalar("u").unwrap(), u.as_slice());
    assert!(back.scalar("missing").is_none());
    assert_eq!(back.mesh.n_interior(), mesh.n_interior());
}

#[test]
fn written_file_is_legacy_ascii_unstructured_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.vtk");
    let mesh = common::jittered_mesh(Rect::square(1.0), 2, 0.1, 1);
    write_vtk(&path, &mesh, "t", &VtkFields::default()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# vtk DataFile Version"));
    assert_eq!(lines[2], "ASCII");
    assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
    assert!(text.contains(&format!("CELLS {} {}", mesh.n_elements(), 4 * mesh.n_elements())));
    assert!(text.contains(&format!("CELL_TYPES {}", mesh.n_elements())));
}

#[test]
fn missing_or_malformed_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(read_vtk(dir.path().join("none.vtk")).is_err());
    let bad = dir.path().join("bad.vtk");
    std::fs::write(&bad, "# vtk DataFile Version 3.0\nx\nBINARY\n").unwrap();
    assert!(read_vtk(&bad).is_err());
    let short = dir.path().join("short.vtk");
    std::fs::write(
        &short,
        "# vtk DataFile Version 3.0\nx\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 3 double\n0 0 0\n1 0 0\n",
    )
    .unwrap();
    assert!(read_vtk(&short).is_err());
}
