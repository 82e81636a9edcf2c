use proptest::prelude::*;

use maxlump_core::mesh::{build_structured_mesh, jitter_vertices, refine_uniform_with_map, BBox};

fn mesh_strategy() -> impl Strategy<Value = maxlump_core::Mesh> {
    (
        1usize..5,
        1usize..5,
        0.1f64..3.0,
        0.1f64..3.0,
        any::<u16>(),
        any::<bool>(),
        0.0f64..0.3,
        any::<u64>(),
    )
        .prop_map(|(nx, ny, w, h, pattern, all_tri, jitter, seed)| {
            let m =
                build_structured_mesh(nx, ny, BBox::new(-1.0, 0.5, w - 1.0, 0.5 + h), |i, j| {
                    all_tri || pattern >> ((i + 3 * j) % 16) & 1 == 1
                })
                .unwrap();
            // jitter would bend parallelograms, so only all-triangle meshes move
            if m.elements()
                .iter()
                .all(|e| e.kind == maxlump_core::ElementKind::Triangle)
            {
                jitter_vertices(&m, jitter, seed).unwrap()
            } else {
                m
            }
        })
}

proptest! {
    #[test]
    fn refinement_preserves_area(m in mesh_strategy()) {
        let (fine, map) = refine_uniform_with_map(&m).unwrap();
        prop_assert_eq!(fine.num_elements(), 4 * m.num_elements());
        prop_assert!((fine.total_area() - m.total_area()).abs() <= 1e-12 * m.total_area());
        for (t, children) in map.element_children.iter().enumerate() {
            let sum: f64 = children.iter().map(|&c| fine.element_area(c)).sum();
            prop_assert!((sum - m.element_area(t)).abs() <= 1e-12 * m.element_area(t));
        }
    }

    #[test]
    fn affine_map_hits_vertices(m in mesh_strategy()) {
        for (t, el) in m.elements().iter().enumerate() {
            let f = m.affine_map(t).unwrap();
            for (k, xr) in el.kind.reference_vertices().iter().enumerate() {
                let p = f.apply(*xr);
                let q = m.vertices()[el.vertices[k]];
                prop_assert!((p - q).norm() < 1e-12);
            }
        }
    }
}
