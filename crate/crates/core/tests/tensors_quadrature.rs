use amprb::damping_tensors::{assemble_tensors, rotate_tensor, SurfaceMesh};
use amprb::quadrature::{annulus_errors, compute_weights, observed_orders, CompositeGrid, NullVectorOptions, PointKind};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn random_mesh() -> impl Strategy<Value = SurfaceMesh<f64>> {
    let point = (
        prop::array::uniform3(-2.0f64..2.0),
        prop::array::uniform3(-1.0f64..1.0).prop_filter("non-zero normal", |n| n.iter().map(|x| x * x).sum::<f64>() > 1e-2),
        1e-3f64..1.0,
        1e-3f64..0.2,
    );
    (prop::collection::vec(point, 1..60), prop::array::uniform3(-0.5f64..0.5)).prop_map(|(pts, xb)| {
        let mut points = Vec::new();
        let mut normals = Vec::new();
        let mut weights = Vec::new();
        let mut ds = Vec::new();
        for (x, n, w, d) in pts {
            points.push(Vector3::from(x));
            normals.push(Vector3::from(n).normalize());
            weights.push(w);
            ds.push(d);
        }
        SurfaceMesh::new(points, normals, weights, ds, Vector3::from(xb)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn composite_tensor_is_symmetric_psd(mesh in random_mesh(), mu in 0.01f64..10.0, dt in 1e-4f64..1e-1) {
        let t = assemble_tensors(&mesh, mu, 1.0, dt, 0.5).unwrap();
        prop_assert_eq!(t.dvw, t.dwv.transpose());
        prop_assert!(t.asymmetry() <= 1e-12 * t.norm());
        prop_assert!(t.min_eigenvalue() >= -1e-10 * t.norm());
    }

    #[test]
    fn rotating_the_mesh_rotates_the_tensor(mesh in random_mesh(), axis in prop::array::uniform3(-1.0f64..1.0), angle in 0.0f64..6.0) {
        prop_assume!(axis.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle);
        let moved = SurfaceMesh::new(
            mesh.points.iter().map(|p| rot * p).collect(),
            mesh.normals.iter().map(|n| rot * n).collect(),
            mesh.weights.clone(),
            mesh.ds_n.clone(),
            rot * mesh.x_b,
        ).unwrap();
        let a = rotate_tensor(&assemble_tensors(&mesh, 1.0, 1.0, 1e-2, 0.5).unwrap(), rot.matrix()).unwrap();
        let b = assemble_tensors(&moved, 1.0, 1.0, 1e-2, 0.5).unwrap();
        prop_assert!((a.to_matrix() - b.to_matrix()).norm() <= 1e-10 * a.norm());
    }
}

#[test]
fn annulus_weights_converge() {
    let levels = [(20, 126), (40, 246), (80, 486)];
    let errs: Vec<_> = levels.iter().map(|&(nr, m)| annulus_errors(1.0, 2.0, nr, m, 3).unwrap()).collect();
    for e in &errs {
        assert!(e.residual < 1e-10, "{e:?}");
    }
    for (name, pick) in [("area", 0), ("inner", 1), ("outer", 2)] {
        let v: Vec<f64> = errs.iter().map(|e| [e.area, e.inner, e.outer][pick]).collect();
        let o = observed_orders(&v);
        assert!(o.iter().all(|&x| x >= 1.9), "{name}: errors {v:?} orders {o:?}");
    }
}

#[test]
fn negative_weights_stay_near_overlap() {
    let g = CompositeGrid::two_patch_annulus(1.0, 2.0, 20, 126, 3).unwrap();
    let (_, w) = compute_weights(&g, &NullVectorOptions::default()).unwrap();
    // Angular index distance to the nearest interpolation column of the same patch.
    for k in w.negative_volume_weights() {
        let (c, l) = g.locate(k);
        let i = l / 21;
        let near = (0..g.len())
            .filter(|&q| g.kinds[q] == PointKind::Interpolation && g.locate(q).0 == c)
            .map(|q| (g.locate(q).1 / 21).abs_diff(i))
            .min()
            .unwrap();
        assert!(near <= 3, "negative weight at {k} is {near} cells from the overlap");
    }
}

#[test]
fn single_grid_weights_are_composite_rule() {
    let n = 16;
    let g = CompositeGrid::single_segment(0.0, 2.0, n).unwrap();
    let (_, w) = compute_weights(&g, &NullVectorOptions::default()).unwrap();
    let h = 2.0 / n as f64;
    for k in 1..n {
        let want = if k == 1 || k == n - 1 { 1.5 * h } else { h };
        assert!((w.weights[k] - want).abs() < 1e-12 * h);
    }
    assert!((w.weights[0] - 1.0).abs() < 1e-12 && (w.weights[n] - 1.0).abs() < 1e-12);
    // Exact for linear integrands.
    let f: Vec<f64> = (0..=n).map(|k| 3.0 * k as f64 * h - 1.0).collect();
    assert!((w.integrate_volume(&f).unwrap() - 4.0).abs() < 1e-12);
}
