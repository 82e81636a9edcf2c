//! Pulse arrival times in a PEC channel: a y-polarized plane wave travels
//! at 1/sqrt(eps mu).

use maxlump_core::config::SimConfig;
use maxlump_core::mesh::Point;
use maxlump_core::scenario::Simulation;

fn channel(eps_right: Option<f64>, end: f64) -> SimConfig {
    let mut toml = format!(
        "name = \"channel\"\n\
         [mesh]\ngenerator = \"quad\"\nnx = 160\nny = 10\nbbox = [0.0, 0.0, 4.0, 0.25]\n\
         [time]\nend = {end}\ncfl = 0.9\n\
         [source]\nkind = \"plane-wave\"\nx_min = 0.0\nx_max = 0.1\nt0 = 0.5\nsigma = 0.15\namplitude = 1.0\n"
    );
    if let Some(eps) = eps_right {
        toml.push_str(&format!(
            "[[mesh.half_plane]]\ntag = 2\npoint = [1.0, 0.0]\nnormal = [1.0, 0.0]\n\
             [[region]]\ntag = 0\neps = 1.0\n[[region]]\ntag = 2\neps = {eps}\n"
        ));
    }
    SimConfig::parse(&toml).unwrap()
}

fn nearest_element(sim: &Simulation, x: f64) -> usize {
    let target = Point::new(x, 0.125);
    (0..sim.disc.mesh.num_elements())
        .min_by(|&a, &b| {
            let da = (sim.disc.mesh.centroid(a) - target).norm();
            let db = (sim.disc.mesh.centroid(b) - target).norm();
            da.total_cmp(&db)
        })
        .unwrap()
}

/// Time of the largest |H| at each probe, refined by a parabola through
/// the three samples around the peak.
fn peak_times(cfg: &SimConfig, probes: &[f64]) -> Vec<f64> {
    let sim = Simulation::from_config(cfg).unwrap();
    let ids: Vec<usize> = probes.iter().map(|&x| nearest_element(&sim, x)).collect();
    let mut series = vec![Vec::new(); ids.len()];
    let mut times = Vec::new();
    let mut state = sim.initial.clone();
    sim.integrator()
        .unwrap()
        .run(&mut state, sim.steps, 1, |_, s| {
            times.push(s.time_h);
            for (k, &t) in ids.iter().enumerate() {
                series[k].push(s.h[t].abs());
            }
        })
        .unwrap();
    series
        .iter()
        .map(|v| {
            let i = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            assert!(i > 0 && i + 1 < v.len(), "peak at the end of the record");
            let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
            let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
            times[i] + shift * (times[i + 1] - times[i])
        })
        .collect()
}

#[test]
fn vacuum_speed_is_one() {
    let t = peak_times(&channel(None, 3.8), &[1.5, 3.0]);
    let speed = 1.5 / (t[1] - t[0]);
    assert!((speed - 1.0).abs() < 0.05, "speed {speed}");
}

#[test]
fn dielectric_speed() {
    let eps = 3.0;
    let t = peak_times(&channel(Some(eps), 5.6), &[1.5, 3.0]);
    let speed = 1.5 / (t[1] - t[0]);
    let want = 1.0 / f64::sqrt(eps);
    assert!(
        (speed / want - 1.0).abs() < 0.1,
        "speed {speed}, expected {want}"
    );
}
