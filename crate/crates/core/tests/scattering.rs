//! The stored scattering fixture and the sample scattering config.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use maxlump_core::config::SimConfig;
use maxlump_core::mesh::{read_mesh, write_mesh};
use maxlump_core::scenario::{
    scattering_fixture_mesh, scattering_scenario, OBSTACLE_CENTER, OBSTACLE_RADIUS,
};

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/scatter_disk.mesh")
}

#[test]
fn fixture_file_matches_generator() {
    let stored = read_mesh(BufReader::new(File::open(fixture_path()).unwrap())).unwrap();
    let generated = scattering_fixture_mesh(32).unwrap();
    assert_eq!(stored, generated);
    let mut bytes = Vec::new();
    write_mesh(&generated, &mut bytes).unwrap();
    assert_eq!(bytes, std::fs::read(fixture_path()).unwrap());
}

#[test]
fn fixture_geometry() {
    let m = read_mesh(BufReader::new(File::open(fixture_path()).unwrap())).unwrap();
    let c = OBSTACLE_CENTER;
    let mut hole = 0;
    for (&e, &tag) in m.boundary_tags() {
        let [a, b] = m.edges()[e].vertices;
        let r = |v: usize| {
            ((m.vertices()[v].x - c[0]).powi(2) + (m.vertices()[v].y - c[1]).powi(2)).sqrt()
        };
        if tag == 2 {
            hole += 1;
            assert!(
                (r(a) - OBSTACLE_RADIUS).abs() < 1e-12 && (r(b) - OBSTACLE_RADIUS).abs() < 1e-12
            );
        } else {
            assert_eq!(tag, 1);
        }
    }
    assert!(hole >= 16, "{hole} hole edges");
    let regions: std::collections::BTreeSet<i64> = m.elements().iter().map(|e| e.region).collect();
    assert_eq!(regions.into_iter().collect::<Vec<_>>(), [1, 2]);
}

#[test]
fn sample_config_runs_and_scatters() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scatter.toml");
    let cfg = SimConfig::load(&path).unwrap();
    let snaps = scattering_scenario(&cfg).unwrap();
    let steps: Vec<usize> = snaps.iter().map(|s| s.0).collect();
    assert_eq!(steps.len(), cfg.output.times.len());
    assert!(steps.windows(2).all(|w| w[0] < w[1]));
    for (_, s) in &snaps {
        assert!(s.e.iter().chain(&s.h).all(|v| v.is_finite()));
    }
    // the pulse has left the source strip and reached the obstacle side
    let last = &snaps.last().unwrap().1;
    assert!(last.amplitude() > 1e-4);
    assert!((last.time_e - cfg.time.end).abs() < 1e-12);
}
