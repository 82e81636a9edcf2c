//! Staggered-grid finite differences on a uniform rectangular grid, written
//! independently of the finite element code and used as a differential
//! oracle for it.
//!
//! `ex` lives at horizontal edge midpoints `((i + 1/2) hx, j hy)`, `ey` at
//! vertical edge midpoints `(i hx, (j + 1/2) hy)` and `hz` at cell centres.
//! Tangential `E` on the boundary is held at zero.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{Discretization, MaterialField};
use crate::error::{Error, Result};
use crate::mesh::{build_structured_quad_mesh, BBox};
use crate::timestepper::{FieldState, Leapfrog};

#[derive(Clone, Debug, PartialEq)]
pub struct YeeGrid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub eps: f64,
    pub mu: f64,
    /// `ex[j * nx + i]`, `0 <= j <= ny`.
    pub ex: Vec<f64>,
    /// `ey[j * (nx + 1) + i]`, `0 <= i <= nx`.
    pub ey: Vec<f64>,
    /// `hz[j * nx + i]`.
    pub hz: Vec<f64>,
}

impl YeeGrid {
    /// Zero fields on `[0, lx] x [0, ly]`.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, eps: f64, mu: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lx > 0.0 && ly > 0.0 && eps > 0.0 && mu > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bad grid {nx}x{ny} on {lx}x{ly} with eps={eps}, mu={mu}"
            )));
        }
        Ok(YeeGrid {
            nx,
            ny,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
            eps,
            mu,
            ex: vec![0.0; nx * (ny + 1)],
            ey: vec![0.0; (nx + 1) * ny],
            hz: vec![0.0; nx * ny],
        })
    }

    pub fn ex_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ey_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn hz_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Largest stable step, `1 / sqrt(eps mu) / sqrt(1/hx^2 + 1/hy^2)`.
    pub fn cfl_limit(&self) -> f64 {
        (self.eps * self.mu).sqrt() / (1.0 / (self.hx * self.hx) + 1.0 / (self.hy * self.hy)).sqrt()
    }

    fn update_e(&mut self, dt: f64) {
        let (nx, ny) = (self.nx, self.ny);
        let ax = dt / (self.eps * self.hy);
        for j in 1..ny {
            for i in 0..nx {
                let d = self.hz[j * nx + i] - self.hz[(j - 1) * nx + i];
                self.ex[j * nx + i] += ax * d;
            }
        }
        let ay = dt / (self.eps * self.hx);
        for j in 0..ny {
            for i in 1..nx {
                let d = self.hz[j * nx + i] - self.hz[j * nx + i - 1];
                self.ey[j * (nx + 1) + i] -= ay * d;
            }
        }
    }

    fn update_h(&mut self, dt: f64) {
        let nx = self.nx;
        for j in 0..self.ny {
            for i in 0..nx {
                let dey = (self.ey[j * (nx + 1) + i + 1] - self.ey[j * (nx + 1) + i]) / self.hx;
                let dex = (self.ex[(j + 1) * nx + i] - self.ex[j * nx + i]) / self.hy;
                self.hz[j * nx + i] -= dt / self.mu * (dey - dex);
            }
        }
    }

    /// `E` from `t` to `t + dt`, then `H` from `t + dt/2` to `t + 3dt/2`.
    pub fn step(&mut self, dt: f64) {
        self.update_e(dt);
        self.update_h(dt);
    }

    /// Staggered energy `1/2 eps |E|^2 + 1/2 mu H^- H^+`, with `H^-` recovered
    /// by undoing the last magnetic update.
    pub fn energy(&self, dt: f64) -> f64 {
        let mut prev = self.clone();
        prev.update_h(-dt);
        let cell = self.hx * self.hy;
        let electric: f64 = self.ex.iter().chain(&self.ey).map(|v| v * v).sum();
        let magnetic: f64 = self.hz.iter().zip(&prev.hz).map(|(a, b)| a * b).sum();
        0.5 * cell * (self.eps * electric + self.mu * magnetic)
    }
}

/// Runs `steps` Yee updates, calling `observe(step, grid)` after each.
pub fn yee_reference_run(
    mut grid: YeeGrid,
    dt: f64,
    steps: usize,
    mut observe: impl FnMut(usize, &YeeGrid),
) -> YeeGrid {
    for n in 1..=steps {
        grid.step(dt);
        observe(n, &grid);
    }
    grid
}

/// Where each finite element unknown sits in the staggered grid.
#[derive(Clone, Copy, Debug)]
enum GridSlot {
    Ex(usize),
    Ey(usize),
}

/// Maximum difference between finite element and finite difference
/// trajectories on the unit square, comparing field values (`e_i / |edge|`
/// against `ex`/`ey`, `h` against `hz`) after every step.
///
/// `eps_perturbation = Some((t, factor))` multiplies `eps` on finite element
/// `t` only, which must break the agreement.
pub fn yee_difference(
    nx: usize,
    ny: usize,
    steps: usize,
    seed: u64,
    eps_perturbation: Option<(usize, f64)>,
) -> Result<f64> {
    let mesh = build_structured_quad_mesh(nx, ny, BBox::unit_square())?;
    let nt = mesh.num_elements();
    let mut eps = vec![Matrix2::identity(); nt];
    if let Some((t, factor)) = eps_perturbation {
        if t >= nt {
            return Err(Error::Index(format!(
                "element {t} out of range ({nt} elements)"
            )));
        }
        eps[t] *= factor;
    }
    let disc = Discretization::assemble(mesh, MaterialField::new(eps, vec![1.0; nt])?)?;
    let mut grid = YeeGrid::new(nx, ny, 1.0, 1.0, 1.0, 1.0)?;
    let (hx, hy) = (grid.hx, grid.hy);

    let mesh = &disc.mesh;
    let mut edge_slots = Vec::with_capacity(disc.dofs.num_edge_dofs());
    for dof in 0..disc.dofs.num_edge_dofs() {
        let [a, b] = mesh.edges()[disc.dofs.dof_edge(dof)].vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let mid = 0.5 * (pa + pb);
        let slot = if (pa.y - pb.y).abs() < 1e-12 * hy {
            GridSlot::Ex(
                grid.ex_index((mid.x / hx).floor() as usize, (mid.y / hy).round() as usize),
            )
        } else {
            GridSlot::Ey(
                grid.ey_index((mid.x / hx).round() as usize, (mid.y / hy).floor() as usize),
            )
        };
        edge_slots.push((slot, (pb - pa).norm()));
    }
    let cell_slots: Vec<usize> = (0..nt)
        .map(|t| {
            let c = mesh.centroid(t);
            grid.hz_index((c.x / hx).floor() as usize, (c.y / hy).floor() as usize)
        })
        .collect();

    let dt = 0.9 * grid.cfl_limit();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = FieldState::zeros(disc.dofs.num_edge_dofs(), nt, dt);
    for (dof, &(slot, len)) in edge_slots.iter().enumerate() {
        let v: f64 = rng.gen_range(-1.0..1.0);
        state.e[dof] = v * len;
        match slot {
            GridSlot::Ex(k) => grid.ex[k] = v,
            GridSlot::Ey(k) => grid.ey[k] = v,
        }
    }
    for (t, &k) in cell_slots.iter().enumerate() {
        let v: f64 = rng.gen_range(-1.0..1.0);
        state.h[t] = v;
        grid.hz[k] = v;
    }

    let compare = |s: &FieldState, g: &YeeGrid| -> f64 {
        let de = edge_slots.iter().zip(&s.e).map(|(&(slot, len), e)| {
            let y = match slot {
                GridSlot::Ex(k) => g.ex[k],
                GridSlot::Ey(k) => g.ey[k],
            };
            (e / len - y).abs()
        });
        let dh = cell_slots
            .iter()
            .zip(&s.h)
            .map(|(&k, h)| (h - g.hz[k]).abs());
        de.chain(dh).fold(0.0, f64::max)
    };

    let mut worst = compare(&state, &grid);
    let lf = Leapfrog::new(disc.operators(), dt)?;
    for _ in 0..steps {
        lf.step(&mut state)?;
        grid.step(dt);
        worst = worst.max(compare(&state, &grid));
    }
    Ok(worst)
}

/// Seed used by [`verify_yee_equivalence`].
pub const YEE_SEED: u64 = 0x7ee;

/// [`yee_difference`] with unperturbed material and a fixed seed.
pub fn verify_yee_equivalence(nx: usize, ny: usize, steps: usize) -> Result<f64> {
    yee_difference(nx, ny, steps, YEE_SEED, None)
}
