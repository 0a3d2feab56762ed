use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};

use pconvex::export::{write_dirichlet_csv, write_surface_csv, write_surface_obj, DIRICHLET_CSV_HEADER};
use pconvex::{curvature_field, BoundaryData, DiscreteDomain, Domain, DomainGrid, PConvexOperator, RadialField, SphericalGrid};

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SphericalGrid::new(8, 16).unwrap();
    let field = RadialField::from_fn(grid, |x| 1.0 + 0.05 * x[2]).unwrap();
    let op = PConvexOperator::new(2, 2).unwrap();

    let obj = dir.path().join("surface.obj");
    let mut w = BufWriter::new(File::create(&obj).unwrap());
    write_surface_obj(&mut w, &field).unwrap();
    w.flush().unwrap();
    let lines: Vec<String> = BufReader::new(File::open(&obj).unwrap()).lines().map(|l| l.unwrap()).collect();
    let vertices: Vec<[f64; 3]> = lines
        .iter()
        .filter_map(|l| l.strip_prefix("v "))
        .map(|l| {
            let c: Vec<f64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
            [c[0], c[1], c[2]]
        })
        .collect();
    assert_eq!(vertices.len(), grid.len());
    // full precision survives the text round trip
    for (i, v) in vertices.iter().enumerate() {
        assert_eq!(*v, field.position(i));
    }
    let max_index =
        lines.iter().filter_map(|l| l.strip_prefix("f ")).flat_map(|l| l.split_whitespace()).map(|t| t.parse::<usize>().unwrap()).max();
    assert_eq!(max_index, Some(grid.len()));

    let csv = dir.path().join("fields.csv");
    let mut w = BufWriter::new(File::create(&csv).unwrap());
    write_surface_csv(&mut w, &field, &curvature_field(&field, &op).unwrap()).unwrap();
    w.flush().unwrap();
    let rows: Vec<Vec<f64>> = BufReader::new(File::open(&csv).unwrap())
        .lines()
        .skip(1)
        .map(|l| l.unwrap().split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), grid.len());
    assert!(rows.iter().zip(field.values()).all(|(r, rho)| r[2] == *rho && r[7] > 0.0));
}

#[test]
fn dirichlet_csv_marks_boundary_rows() {
    let d = DiscreteDomain::new(DomainGrid::new(Domain::Square, 9).unwrap(), BoundaryData::Radial { a: 0.0, b: 1.0 });
    let u = d.sample(|x| x[0] * x[0] + x[1] * x[1]);
    let monitor = vec![1.0; u.len()];
    let mut buf = Vec::new();
    write_dirichlet_csv(&mut buf, &d, &u, &PConvexOperator::new(2, 1).unwrap(), Some(&monitor)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(DIRICHLET_CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 81);
    let boundary = rows.iter().filter(|r| r.ends_with(",,,,")).count();
    assert_eq!(boundary, 81 - d.unknowns());
    assert!(rows.iter().filter(|r| !r.ends_with(",,,,")).all(|r| r.ends_with(",1.00000000000000000e0")));
}
