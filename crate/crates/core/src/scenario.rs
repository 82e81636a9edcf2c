//! Turning a [`SimConfig`] into an assembled, initialised simulation.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;

use nalgebra::{Matrix2, Vector2};

use crate::assembly::{Discretization, DofMap, MaterialField};
use crate::benchmarks::{initial_state, CavityMode, ExactSolution};
use crate::config::{Generator, InitialKind, ScenarioKind, SimConfig, SourceKind};
use crate::error::{Error, Result};
use crate::mesh::{
    build_structured_quad_mesh, build_structured_tri_mesh, jitter_vertices, read_mesh,
    refine_uniform, BBox, Mesh, Point,
};
use crate::reference_basis::{merged_basis, normalization};
use crate::timestepper::{estimate_cfl, FieldState, Leapfrog, SourceTerm};

/// The coarse mesh described by `[mesh]`, before `refine` is applied.
pub fn base_mesh(cfg: &SimConfig) -> Result<Mesh> {
    let spec = &cfg.mesh;
    let mut mesh = match (spec.generator, cfg.mesh_path()) {
        (Some(g), _) => {
            let [x0, y0, x1, y1] = spec.bbox;
            let bbox = BBox::new(x0, y0, x1, y1);
            match g {
                Generator::Quad => build_structured_quad_mesh(spec.nx, spec.ny, bbox)?,
                Generator::Tri => build_structured_tri_mesh(spec.nx, spec.ny, bbox)?,
            }
        }
        (None, Some(path)) => {
            let f = File::open(&path).map_err(|e| {
                Error::Config(format!("cannot open mesh file {}: {e}", path.display()))
            })?;
            read_mesh(BufReader::new(f))?
        }
        (None, None) => return Err(Error::Config("mesh needs a generator or a file".into())),
    };
    if spec.jitter > 0.0 {
        mesh = jitter_vertices(&mesh, spec.jitter, spec.seed)?;
    }
    if !spec.half_plane.is_empty() {
        mesh = mesh.with_regions(|t, c| {
            let el = &mesh.elements()[t];
            spec.half_plane.iter().fold(el.region, |r, hp| {
                let d = (c.x - hp.point[0]) * hp.normal[0] + (c.y - hp.point[1]) * hp.normal[1];
                if d > 0.0 {
                    hp.tag
                } else {
                    r
                }
            })
        });
    }
    Ok(mesh)
}

/// Applies `refine` uniform refinements to [`base_mesh`].
pub fn build_mesh(cfg: &SimConfig) -> Result<Mesh> {
    let mut mesh = base_mesh(cfg)?;
    for _ in 0..cfg.mesh.refine {
        mesh = refine_uniform(&mesh)?;
    }
    Ok(mesh)
}

/// Materials per element from the `[[region]]` table. Without any region
/// table every element gets `eps = mu = 1`; otherwise every region present
/// in the mesh needs an entry and every entry must occur in the mesh.
pub fn build_materials(cfg: &SimConfig, mesh: &Mesh) -> Result<MaterialField> {
    let nt = mesh.num_elements();
    if cfg.region.is_empty() {
        return MaterialField::uniform(nt, 1.0, 1.0);
    }
    let present: BTreeSet<i64> = mesh.elements().iter().map(|e| e.region).collect();
    for r in &cfg.region {
        if !present.contains(&r.tag) {
            return Err(Error::Config(format!(
                "region tag {} does not occur in the mesh",
                r.tag
            )));
        }
    }
    let mut eps = Vec::with_capacity(nt);
    let mut mu = Vec::with_capacity(nt);
    for el in mesh.elements() {
        let r = cfg
            .region
            .iter()
            .find(|r| r.tag == el.region)
            .ok_or_else(|| Error::Config(format!("no material for region tag {}", el.region)))?;
        let e = r.epsilon()?;
        eps.push(Matrix2::new(e[0][0], e[0][1], e[1][0], e[1][1]));
        mu.push(r.mu);
    }
    MaterialField::new(eps, mu)
}

fn check_scenario(cfg: &SimConfig, mesh: &Mesh) -> Result<()> {
    if cfg.scenario != ScenarioKind::Scattering {
        return Ok(());
    }
    let regions: BTreeSet<i64> = mesh.elements().iter().map(|e| e.region).collect();
    for tag in [1, 2] {
        if !regions.contains(&tag) {
            return Err(Error::Config(format!(
                "scattering scenario needs elements with region tag {tag}"
            )));
        }
    }
    if !mesh.boundary_tags().values().any(|&t| t == 2) {
        return Err(Error::Config(
            "scattering scenario needs obstacle boundary edges tagged 2".into(),
        ));
    }
    Ok(())
}

/// `int J . phi_i` for every edge unknown, by the vertex rule.
pub fn load_vector(
    mesh: &Mesh,
    dofs: &DofMap,
    current: impl Fn(Point) -> Vector2<f64>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dofs.num_edge_dofs()];
    for t in 0..mesh.num_elements() {
        let el = &mesh.elements()[t];
        let map = mesh.affine_map(t)?;
        let area = mesh.element_area(t);
        let refs = el.kind.reference_vertices();
        let w = area / refs.len() as f64;
        let values: Vec<Vector2<f64>> = el
            .vertices
            .iter()
            .map(|&v| current(mesh.vertices()[v]))
            .collect();
        if values.iter().all(|v| *v == Vector2::zeros()) {
            continue;
        }
        for (k, ld) in dofs.element_dofs(t).iter().enumerate() {
            let Some(i) = ld.dof else { continue };
            let basis = merged_basis(el.kind, k)?;
            let scale = ld.sign * normalization(el.kind);
            for (p, j) in refs.iter().zip(&values) {
                let phi = basis.eval(*p);
                let phi = map.inverse_transpose * Vector2::new(phi[0], phi[1]) * scale;
                out[i] += w * j.dot(&phi);
            }
        }
    }
    Ok(out)
}

/// Soft plane-wave source: a vertical current in the strip
/// `x_min < x < x_max` with a Gaussian pulse in time.
pub fn plane_wave_source(
    cfg: &SimConfig,
    mesh: &Mesh,
    dofs: &DofMap,
) -> Result<Option<SourceTerm>> {
    let s = &cfg.source;
    if s.kind == SourceKind::None {
        return Ok(None);
    }
    let (x0, x1, a) = (s.x_min, s.x_max, s.amplitude);
    let load = load_vector(mesh, dofs, |p| {
        if p.x > x0 && p.x < x1 {
            Vector2::new(0.0, a)
        } else {
            Vector2::zeros()
        }
    })?;
    let window: Vec<(usize, f64)> = load
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w != 0.0)
        .collect();
    if window.is_empty() {
        return Err(Error::Config(format!(
            "source strip ({x0}, {x1}) contains no mesh vertices"
        )));
    }
    let (t0, sigma) = (s.t0, s.sigma);
    Ok(Some(SourceTerm::new(window, move |t| {
        (-((t - t0) / sigma).powi(2)).exp()
    })))
}

/// Step count and step size reaching `end` exactly: the largest step not
/// exceeding `dt_target`.
pub fn fit_time_step(end: f64, dt_target: f64) -> (usize, f64) {
    let steps = ((end / dt_target) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (steps, end / steps as f64)
}

/// An assembled problem with its start values.
pub struct Simulation {
    pub config: SimConfig,
    pub disc: Discretization,
    pub dt: f64,
    pub steps: usize,
    /// Stability limit; `None` when `dt` was given explicitly.
    pub cfl_limit: Option<f64>,
    pub initial: FieldState,
    pub source: Option<SourceTerm>,
    pub exact: Option<CavityMode>,
}

impl Simulation {
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Self::with_mesh(cfg, build_mesh(cfg)?)
    }

    pub fn with_mesh(cfg: &SimConfig, mesh: Mesh) -> Result<Self> {
        cfg.validate()?;
        check_scenario(cfg, &mesh)?;
        let materials = build_materials(cfg, &mesh)?;
        let disc = Discretization::assemble(mesh, materials)?;
        let (target, cfl_limit) = match cfg.time.dt {
            Some(dt) => (dt, None),
            None => {
                let limit = estimate_cfl(&disc.inv_mass_e, &disc.stiffness)?;
                if !limit.is_finite() {
                    return Err(Error::Config(
                        "mesh has no interior edges; set time.dt explicitly".into(),
                    ));
                }
                (cfg.time.cfl.unwrap_or(0.9) * limit, Some(limit))
            }
        };
        let (steps, dt) = fit_time_step(cfg.time.end, target);
        let exact = match cfg.initial.kind {
            InitialKind::Zero => None,
            InitialKind::Cavity => Some(CavityMode::new(cfg.initial.m, cfg.initial.n)?),
        };
        let initial = match &exact {
            Some(c) => initial_state(&disc, c as &dyn ExactSolution, 0.0, dt)?,
            None => FieldState::zeros(disc.dofs.num_edge_dofs(), disc.mesh.num_elements(), dt),
        };
        let source = plane_wave_source(cfg, &disc.mesh, &disc.dofs)?;
        Ok(Simulation {
            config: cfg.clone(),
            disc,
            dt,
            steps,
            cfl_limit,
            initial,
            source,
            exact,
        })
    }

    pub fn integrator(&self) -> Result<Leapfrog<'_>> {
        Ok(Leapfrog::new(self.disc.operators(), self.dt)?.with_source(self.source.as_ref()))
    }

    /// Steps at which snapshots are due: every `stride` steps plus the
    /// configured times, sorted and without duplicates.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let out = &self.config.output;
        let mut s: BTreeSet<usize> = BTreeSet::new();
        if out.stride > 0 {
            s.extend((0..=self.steps).step_by(out.stride));
        }
        for t in &out.times {
            s.insert(((t / self.dt).round() as usize).min(self.steps));
        }
        s.into_iter().collect()
    }

    /// Runs to the end time, calling `observe` for every step listed by
    /// [`Self::snapshot_steps`]. Returns the final state.
    pub fn run(
        &self,
        mut observe: impl FnMut(usize, &FieldState) -> Result<()>,
    ) -> Result<FieldState> {
        let due = self.snapshot_steps();
        let mut next = due.iter().copied().peekable();
        let mut state = self.initial.clone();
        let mut failure = None;
        self.integrator()?.run(&mut state, self.steps, 1, |n, s| {
            // the stride is 1 here, so step 0 is reported too
            if failure.is_none() && next.peek() == Some(&n) {
                next.next();
                if let Err(e) = observe(n, s) {
                    failure = Some(e);
                }
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(state),
        }
    }
}

/// Runs a scattering configuration and returns the snapshots it asks for.
pub fn scattering_scenario(cfg: &SimConfig) -> Result<Vec<(usize, FieldState)>> {
    if cfg.scenario != ScenarioKind::Scattering {
        return Err(Error::Config(
            "configuration does not declare scenario = \"scattering\"".into(),
        ));
    }
    let sim = Simulation::from_config(cfg)?;
    let mut snaps = Vec::new();
    sim.run(|n, s| {
        snaps.push((n, s.clone()));
        Ok(())
    })?;
    Ok(snaps)
}

/// Obstacle centre and radius of [`scattering_fixture_mesh`].
pub const OBSTACLE_CENTER: [f64; 2] = [0.6, 0.0];
pub const OBSTACLE_RADIUS: f64 = 0.25;

/// Triangulated `(-1, 1)^2` with a polygonal hole approximating the disk
/// [`OBSTACLE_CENTER`], [`OBSTACLE_RADIUS`]. Triangles touching the open
/// disk are removed and the vertices left on the hole are moved radially
/// onto the circle. Hole edges carry boundary tag 2, outer edges tag 1.
/// Elements left of the line through `(-0.5, -1)` and `(0, 1)` get region
/// 1, the others region 2.
pub fn scattering_fixture_mesh(n: usize) -> Result<Mesh> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "fixture needs at least 8 cells per side, got {n}"
        )));
    }
    let grid = build_structured_tri_mesh(n, n, BBox::new(-1.0, -1.0, 1.0, 1.0))?;
    let c = Point::new(OBSTACLE_CENTER[0], OBSTACLE_CENTER[1]);
    let r = OBSTACLE_RADIUS;
    let inside = |p: &Point| (p - c).norm() < r;
    let kept: Vec<_> = grid
        .elements()
        .iter()
        .filter(|el| !el.vertices.iter().any(|&v| inside(&grid.vertices()[v])))
        .cloned()
        .collect();
    // vertices of removed triangles that survive lie on the hole boundary
    let mut used = vec![false; grid.num_vertices()];
    for el in &kept {
        el.vertices.iter().for_each(|&v| used[v] = true);
    }
    let mut on_hole = vec![false; grid.num_vertices()];
    for el in grid.elements() {
        if el.vertices.iter().any(|&v| inside(&grid.vertices()[v])) {
            el.vertices
                .iter()
                .filter(|&&v| used[v])
                .for_each(|&v| on_hole[v] = true);
        }
    }
    let mut renumber = vec![usize::MAX; grid.num_vertices()];
    let mut vertices = Vec::new();
    for (v, p) in grid.vertices().iter().enumerate() {
        if used[v] {
            renumber[v] = vertices.len();
            vertices.push(if on_hole[v] {
                c + (p - c) * (r / (p - c).norm())
            } else {
                *p
            });
        }
    }
    let elements: Vec<_> = kept
        .into_iter()
        .map(|mut el| {
            el.vertices.iter_mut().for_each(|v| *v = renumber[*v]);
            el
        })
        .collect();
    let untagged = Mesh::new(vertices, elements, &[])?;
    let hole: Vec<bool> = (0..grid.num_vertices())
        .filter(|&v| used[v])
        .map(|v| on_hole[v])
        .collect();
    let tags: Vec<([usize; 2], i64)> = untagged
        .edges()
        .iter()
        .filter(|e| e.elements.len() == 1)
        .map(|e| {
            (
                e.vertices,
                if hole[e.vertices[0]] && hole[e.vertices[1]] {
                    2
                } else {
                    1
                },
            )
        })
        .collect();
    let mesh = Mesh::new(
        untagged.vertices().to_vec(),
        untagged.elements().to_vec(),
        &tags,
    )?;
    Ok(mesh.with_regions(|_, p| {
        // side of the line from (-0.5, -1) to (0, 1)
        if 0.5 * (p.y + 1.0) - 2.0 * (p.x + 0.5) > 0.0 {
            1
        } else {
            2
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> SimConfig {
        SimConfig::parse(text).unwrap()
    }

    #[test]
    fn half_planes_assign_regions() {
        let c = cfg("[mesh]\ngenerator = \"quad\"\nnx = 4\nny = 2\n[[mesh.half_plane]]\ntag = 2\npoint = [0.5, 0.0]\nnormal = [1.0, 0.0]\n[time]\nend = 1.0\n");
        let m = build_mesh(&c).unwrap();
        let twos = m.elements().iter().filter(|e| e.region == 2).count();
        assert_eq!(twos, 4);
    }

    #[test]
    fn region_tags_are_checked() {
        let base = "[mesh]\ngenerator = \"tri\"\nnx = 2\nny = 2\n[time]\nend = 1.0\n";
        let missing = format!("{base}[[region]]\ntag = 5\neps = 2.0\n");
        assert!(matches!(
            Simulation::from_config(&cfg(&missing)),
            Err(Error::Config(_))
        ));
        let unused = format!("{base}[[region]]\ntag = 0\n[[region]]\ntag = 7\n");
        assert!(matches!(
            Simulation::from_config(&cfg(&unused)),
            Err(Error::Config(_))
        ));
        let ok = format!("{base}[[region]]\ntag = 0\neps = 2.0\n");
        let sim = Simulation::from_config(&cfg(&ok)).unwrap();
        assert_eq!(sim.disc.materials.epsilon[3][(1, 1)], 2.0);
    }

    #[test]
    fn scattering_needs_tags() {
        let no_regions = cfg("scenario = \"scattering\"\n[mesh]\ngenerator = \"tri\"\nnx = 4\nny = 4\n[time]\nend = 0.1\n");
        assert!(matches!(
            scattering_scenario(&no_regions),
            Err(Error::Config(_))
        ));
        assert!(
            scattering_scenario(&cfg("[mesh]\ngenerator = \"tri\"\n[time]\nend = 0.1\n")).is_err()
        );
    }

    #[test]
    fn zero_source_gives_zero_fields() {
        let c = cfg("[mesh]\ngenerator = \"tri\"\nnx = 6\nny = 6\n[time]\nend = 0.5\n[output]\nstride = 5\n");
        let sim = Simulation::from_config(&c).unwrap();
        let mut seen = 0;
        let last = sim
            .run(|_, s| {
                seen += 1;
                assert_eq!(s.amplitude(), 0.0);
                Ok(())
            })
            .unwrap();
        assert_eq!(last.amplitude(), 0.0);
        assert_eq!(seen, sim.steps / 5 + 1);
        assert!((last.time_e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixture_mesh_is_valid() {
        let m = scattering_fixture_mesh(32).unwrap();
        let hole: Vec<usize> = m
            .boundary_tags()
            .iter()
            .filter(|(_, &t)| t == 2)
            .map(|(&e, _)| e)
            .collect();
        assert!(hole.len() >= 12);
        let c = Point::new(OBSTACLE_CENTER[0], OBSTACLE_CENTER[1]);
        for e in hole {
            for v in m.edges()[e].vertices {
                assert!(((m.vertices()[v] - c).norm() - OBSTACLE_RADIUS).abs() < 1e-14);
            }
        }
        // outer boundary: 4 * 32 edges tagged 1
        assert_eq!(m.boundary_tags().values().filter(|&&t| t == 1).count(), 128);
        let regions: BTreeSet<i64> = m.elements().iter().map(|e| e.region).collect();
        assert_eq!(regions, BTreeSet::from([1, 2]));
        let hole_area = 4.0 - m.total_area();
        let disk = std::f64::consts::PI * OBSTACLE_RADIUS * OBSTACLE_RADIUS;
        assert!(hole_area < disk && hole_area > 0.85 * disk, "{hole_area}");
        let min_area = (0..m.num_elements())
            .map(|t| m.element_area(t))
            .fold(f64::INFINITY, f64::min);
        assert!(min_area > 0.1 * (2.0f64 / 32.0).powi(2) / 2.0);
    }

    #[test]
    fn step_fitting() {
        assert_eq!(fit_time_step(1.0, 0.1), (10, 0.1));
        let (n, dt) = fit_time_step(1.0, 0.3);
        assert_eq!(n, 4);
        assert_eq!(dt, 0.25);
        assert_eq!(fit_time_step(1.0, 5.0).0, 1);
    }

    #[test]
    fn load_of_uniform_current() {
        // for a constant current the load vector is M e with e its edge
        // interpolation; on a unit grid M is the identity
        let mesh = build_structured_quad_mesh(4, 4, BBox::new(0.0, 0.0, 4.0, 4.0)).unwrap();
        let dofs = DofMap::new(&mesh);
        let l = load_vector(&mesh, &dofs, |_| Vector2::new(0.0, 1.0)).unwrap();
        for (i, v) in l.iter().enumerate() {
            let [a, b] = mesh.edges()[dofs.dof_edge(i)].vertices;
            let vertical = mesh.vertices()[a].x == mesh.vertices()[b].x;
            assert!(
                (v - if vertical { 1.0 } else { 0.0 }).abs() < 1e-15,
                "{i} {v}"
            );
        }
    }

    #[test]
    fn snapshot_schedule() {
        let c = cfg("[mesh]\ngenerator = \"quad\"\nnx = 2\nny = 2\n[time]\nend = 1.0\ndt = 0.1\n[output]\nstride = 4\ntimes = [0.5, 0.8]\n");
        let sim = Simulation::from_config(&c).unwrap();
        assert_eq!(sim.snapshot_steps(), vec![0, 4, 5, 8]);
        assert_eq!(sim.cfl_limit, None);
    }
}
