//! Explicit staggered time integration.
//!
//! The first-order system
//!
//! ```text
//! M_eps de/dt =  C^T h - j
//! M_mu  dh/dt = -C e
//! ```
//!
//! is advanced by leapfrog with `e` at integer and `h` at half-integer time
//! levels. Only `M_eps^-1` is ever applied; `M_eps` itself is reached through
//! conjugate gradients when the energy is needed.

use std::sync::Arc;

use crate::assembly::Discretization;
use crate::error::{shape_err, Error, Result};
use crate::sparse::{
    conjugate_gradient, lanczos_max_eig, CsrMatrix, DiagonalMatrix, LinearOperator,
};

/// Default growth factor (relative to the initial amplitude) above which a
/// run is declared unstable.
pub const DEFAULT_GROWTH_LIMIT: f64 = 1e6;
/// Amplitude treated as a blow-up when the run starts from zero data.
const ABSOLUTE_LIMIT: f64 = 1e150;

/// Coefficient vectors at staggered times: `e` at `time_e`, `h` at `time_h`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    pub time_e: f64,
    pub time_h: f64,
}

impl FieldState {
    pub fn zeros(num_edge_dofs: usize, num_elements: usize, dt: f64) -> Self {
        FieldState {
            e: vec![0.0; num_edge_dofs],
            h: vec![0.0; num_elements],
            time_e: 0.0,
            time_h: 0.5 * dt,
        }
    }

    /// Largest absolute coefficient.
    pub fn amplitude(&self) -> f64 {
        self.e
            .iter()
            .chain(&self.h)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.e.iter().chain(&self.h).all(|v| v.is_finite())
    }
}

/// Current density on edges: `j_i(t) = weight_i * signal(t)` on a window of
/// edge unknowns, zero elsewhere.
#[derive(Clone)]
pub struct SourceTerm {
    pub window: Vec<(usize, f64)>,
    pub signal: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SourceTerm {
    pub fn new(
        window: Vec<(usize, f64)>,
        signal: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SourceTerm {
            window,
            signal: Arc::new(signal),
        }
    }

    /// Subtracts `j(t)` from `rhs`.
    pub fn subtract_from(&self, t: f64, rhs: &mut [f64]) {
        let s = (self.signal)(t);
        if s == 0.0 {
            return;
        }
        for &(i, w) in &self.window {
            rhs[i] -= w * s;
        }
    }
}

impl std::fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceTerm")
            .field("window", &self.window.len())
            .finish()
    }
}

/// The operators the leapfrog update needs.
#[derive(Clone, Copy)]
pub struct FirstOrderOperators<'a> {
    pub inv_mass_e: &'a dyn LinearOperator,
    pub inv_mass_h: &'a DiagonalMatrix,
    pub curl: &'a CsrMatrix,
    pub curl_t: &'a CsrMatrix,
}

impl<'a> FirstOrderOperators<'a> {
    fn check(&self, state: &FieldState) -> Result<()> {
        let ne = self.inv_mass_e.nrows();
        let nt = self.inv_mass_h.len();
        if state.e.len() != ne || state.h.len() != nt {
            return Err(shape_err(
                format!("e of length {ne}, h of length {nt}"),
                format!(
                    "e of length {}, h of length {}",
                    state.e.len(),
                    state.h.len()
                ),
            ));
        }
        if self.curl.nrows() != nt || self.curl.ncols() != ne || self.curl_t.nrows() != ne {
            return Err(shape_err(
                format!("{nt}x{ne} curl"),
                format!("{}x{}", self.curl.nrows(), self.curl.ncols()),
            ));
        }
        Ok(())
    }
}

impl Discretization {
    /// Operators of the reduced system (one unknown per edge).
    pub fn operators(&self) -> FirstOrderOperators<'_> {
        FirstOrderOperators {
            inv_mass_e: &self.inv_mass_e,
            inv_mass_h: &self.mass_h_inv,
            curl: &self.curl,
            curl_t: &self.curl_t,
        }
    }

    /// Operators of the enriched system (two half unknowns per edge).
    pub fn enriched_operators(&self) -> FirstOrderOperators<'_> {
        FirstOrderOperators {
            inv_mass_e: &self.lumped_mass_e_inv,
            inv_mass_h: &self.mass_h_inv,
            curl: &self.curl_tilde,
            curl_t: &self.curl_tilde_t,
        }
    }
}

/// Leapfrog integrator with a fixed step.
pub struct Leapfrog<'a> {
    ops: FirstOrderOperators<'a>,
    dt: f64,
    source: Option<&'a SourceTerm>,
    growth_limit: f64,
}

impl<'a> Leapfrog<'a> {
    /// `dt` may be negative for backward integration.
    pub fn new(ops: FirstOrderOperators<'a>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be finite and nonzero, got {dt}"
            )));
        }
        Ok(Leapfrog {
            ops,
            dt,
            source: None,
            growth_limit: DEFAULT_GROWTH_LIMIT,
        })
    }

    pub fn with_source(mut self, source: Option<&'a SourceTerm>) -> Self {
        self.source = source;
        self
    }

    pub fn with_growth_limit(mut self, limit: f64) -> Self {
        self.growth_limit = limit;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn advance(&self, state: &mut FieldState, rhs: &mut [f64], de: &mut [f64], dh: &mut [f64]) {
        let dt = self.dt;
        self.ops.curl_t.apply_into(&state.h, rhs);
        if let Some(src) = self.source {
            src.subtract_from(state.time_h, rhs);
        }
        self.ops.inv_mass_e.apply_into(rhs, de);
        state
            .e
            .iter_mut()
            .zip(de.iter())
            .for_each(|(e, d)| *e += dt * d);
        self.ops.curl.apply_into(&state.e, dh);
        state
            .h
            .iter_mut()
            .zip(dh.iter())
            .zip(&self.ops.inv_mass_h.diag)
            .for_each(|((h, c), m)| *h -= dt * m * c);
        state.time_e += dt;
        state.time_h += dt;
    }

    /// One leapfrog step; fails if the state becomes non-finite.
    pub fn step(&self, state: &mut FieldState) -> Result<()> {
        self.run(state, 1, 0, |_, _| {})
    }

    /// Advances `steps` times. `observe(step, state)` is called for the
    /// initial state and after every `stride`-th step (never when `stride`
    /// is 0). The run stops with [`Error::BlowUp`] when the state turns
    /// non-finite or its amplitude exceeds the growth limit times the
    /// initial amplitude.
    pub fn run(
        &self,
        state: &mut FieldState,
        steps: usize,
        stride: usize,
        mut observe: impl FnMut(usize, &FieldState),
    ) -> Result<()> {
        self.ops.check(state)?;
        let initial = state.amplitude();
        let limit = if initial > 0.0 {
            (initial * self.growth_limit).min(ABSOLUTE_LIMIT)
        } else {
            ABSOLUTE_LIMIT
        };
        let (ne, nt) = (state.e.len(), state.h.len());
        let (mut rhs, mut de, mut dh) = (vec![0.0; ne], vec![0.0; ne], vec![0.0; nt]);
        if stride > 0 {
            observe(0, state);
        }
        for n in 1..=steps {
            self.advance(state, &mut rhs, &mut de, &mut dh);
            if !state.is_finite() || state.amplitude() > limit {
                return Err(Error::BlowUp {
                    step: n,
                    time: state.time_e,
                });
            }
            if stride > 0 && n % stride == 0 {
                observe(n, state);
            }
        }
        Ok(())
    }

    /// Moves `h` from `time_e + dt/2` to `time_e - dt/2`, so that a
    /// leapfrog with step `-dt` can run the trajectory backwards.
    pub fn restagger(&self, state: &FieldState) -> Result<FieldState> {
        self.ops.check(state)?;
        let c = self.ops.curl.spmv(&state.e)?;
        let h = state
            .h
            .iter()
            .zip(&c)
            .zip(&self.ops.inv_mass_h.diag)
            .map(|((h, c), m)| h + self.dt * m * c)
            .collect();
        Ok(FieldState {
            e: state.e.clone(),
            h,
            time_e: state.time_e,
            time_h: state.time_h - self.dt,
        })
    }

    /// `h` one step before `state.h`; used to evaluate the staggered energy.
    pub fn previous_h(&self, state: &FieldState) -> Result<Vec<f64>> {
        Ok(self.restagger(state)?.h)
    }
}

/// Functional form of a single leapfrog step.
pub fn leapfrog_step(
    state: &FieldState,
    dt: f64,
    ops: FirstOrderOperators<'_>,
    source: Option<&SourceTerm>,
) -> Result<FieldState> {
    let mut next = state.clone();
    Leapfrog::new(ops, dt)?
        .with_source(source)
        .step(&mut next)?;
    Ok(next)
}

/// Leapfrog on the enriched system; returns the states after every step,
/// starting with the initial one.
pub fn run_enriched(
    state: FieldState,
    dt: f64,
    ops: FirstOrderOperators<'_>,
    steps: usize,
) -> Result<Vec<FieldState>> {
    let mut traj = Vec::with_capacity(steps + 1);
    let mut s = state;
    Leapfrog::new(ops, dt)?.run(&mut s, steps, 1, |_, st| traj.push(st.clone()))?;
    Ok(traj)
}

/// `e_next = 2 e - e_prev - dt^2 M_eps^-1 K e`.
pub fn second_order_step(
    e: &[f64],
    e_prev: &[f64],
    dt: f64,
    inv_mass_e: &CsrMatrix,
    stiffness: &CsrMatrix,
) -> Result<Vec<f64>> {
    if e_prev.len() != e.len() {
        return Err(shape_err(e.len(), e_prev.len()));
    }
    let ke = stiffness.spmv(e)?;
    let acc = inv_mass_e.spmv(&ke)?;
    let next: Vec<f64> = e
        .iter()
        .zip(e_prev)
        .zip(&acc)
        .map(|((en, ep), a)| 2.0 * en - ep - dt * dt * a)
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            step: 1,
            time: f64::NAN,
        });
    }
    Ok(next)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenvalue of `M_eps^-1 K`, computed on the similar operator
/// `K M_eps^-1`, which is self-adjoint in the `M_eps^-1` inner product.
/// Lanczos is used because the top of this spectrum is tightly clustered
/// and plain power iteration needs tens of thousands of products there.
pub fn max_eigenvalue(inv_mass_e: &CsrMatrix, stiffness: &CsrMatrix, tol: f64) -> Result<f64> {
    let n = inv_mass_e.nrows();
    if stiffness.nrows() != n || stiffness.ncols() != n || inv_mass_e.ncols() != n {
        return Err(shape_err(
            format!("{n}x{n} matrices"),
            format!("{}x{}", stiffness.nrows(), stiffness.ncols()),
        ));
    }
    let tmp = std::cell::RefCell::new(vec![0.0; n]);
    lanczos_max_eig(
        n,
        |x, y| {
            let mut t = tmp.borrow_mut();
            inv_mass_e.apply_into(x, &mut t);
            stiffness.apply_into(&t, y);
        },
        |x, y| inv_mass_e.apply_into(x, y),
        tol,
        20_000,
    )
}

/// Stability limit `2 / sqrt(lambda_max(M_eps^-1 K))` of the explicit
/// scheme. No safety factor is applied.
pub fn estimate_cfl(inv_mass_e: &CsrMatrix, stiffness: &CsrMatrix) -> Result<f64> {
    let lambda = max_eigenvalue(inv_mass_e, stiffness, 1e-8)?;
    if lambda <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 / lambda.sqrt())
}

/// Staggered leapfrog energy `1/2 e^T M_eps e + 1/2 h_a^T M_mu h_b`, with
/// `M_eps e` obtained by solving `M_eps^-1 z = e` with conjugate gradients.
/// `h_a`, `h_b` are the magnetic vectors half a step before and after `e`.
pub fn discrete_energy(
    e: &[f64],
    h_a: &[f64],
    h_b: &[f64],
    inv_mass_e: &CsrMatrix,
    mass_h: &DiagonalMatrix,
    cg_tol: f64,
) -> Result<f64> {
    if h_a.len() != mass_h.len() || h_b.len() != mass_h.len() {
        return Err(shape_err(mass_h.len(), h_a.len().max(h_b.len())));
    }
    let z = conjugate_gradient(
        |x, y| inv_mass_e.apply_into(x, y),
        e,
        cg_tol,
        10 * e.len() + 100,
    )?
    .x;
    let magnetic: f64 = h_a
        .iter()
        .zip(h_b)
        .zip(&mass_h.diag)
        .map(|((a, b), m)| a * m * b)
        .sum();
    Ok(0.5 * dot(e, &z) + 0.5 * magnetic)
}

/// Energy of a leapfrog state, reconstructing the previous `h` level.
pub fn state_energy(
    integrator: &Leapfrog<'_>,
    state: &FieldState,
    inv_mass_e: &CsrMatrix,
    mass_h: &DiagonalMatrix,
    cg_tol: f64,
) -> Result<f64> {
    let prev = integrator.previous_h(state)?;
    discrete_energy(&state.e, &prev, &state.h, inv_mass_e, mass_h, cg_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::MaterialField;
    use crate::mesh::{
        build_structured_quad_mesh, build_structured_tri_mesh, jitter_vertices, BBox, Mesh,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc(mesh: Mesh, eps: f64) -> Discretization {
        let n = mesh.num_elements();
        Discretization::assemble(mesh, MaterialField::uniform(n, eps, 1.0).unwrap()).unwrap()
    }

    fn random_state(d: &Discretization, seed: u64, dt: f64) -> FieldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = FieldState::zeros(d.dofs.num_edge_dofs(), d.mesh.num_elements(), dt);
        s.e.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s.h.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s
    }

    #[test]
    fn zero_rhs_keeps_e() {
        let d = disc(
            build_structured_quad_mesh(4, 4, BBox::unit_square()).unwrap(),
            1.0,
        );
        let mut s = random_state(&d, 1, 0.1);
        s.h.fill(0.0);
        let next = leapfrog_step(&s, 0.1, d.operators(), None).unwrap();
        assert_eq!(next.e, s.e);
        assert_eq!(next.time_e, 0.1);
    }

    #[test]
    fn constant_h_is_curl_free() {
        let d = disc(
            build_structured_quad_mesh(4, 4, BBox::unit_square()).unwrap(),
            1.0,
        );
        let mut s = FieldState::zeros(d.dofs.num_edge_dofs(), 16, 0.1);
        s.h.fill(0.7);
        let next = leapfrog_step(&s, 0.1, d.operators(), None).unwrap();
        assert!(next.e.iter().all(|&v| v == 0.0));
        assert_eq!(next.h, s.h);
    }

    #[test]
    fn two_cell_hand_update() {
        // one interior edge between two unit squares: C = (1, -1)^T,
        // M_eps^-1 = 1, M_mu^-1 = 1
        let d = disc(
            build_structured_quad_mesh(2, 1, BBox::new(0.0, 0.0, 2.0, 1.0)).unwrap(),
            1.0,
        );
        let dt = 0.3;
        let s = FieldState {
            e: vec![0.25],
            h: vec![1.0, -0.5],
            time_e: 0.0,
            time_h: 0.5 * dt,
        };
        let n = leapfrog_step(&s, dt, d.operators(), None).unwrap();
        let e1 = 0.25 + dt * (1.0 - (-0.5));
        assert!((n.e[0] - e1).abs() < 1e-15);
        assert!((n.h[0] - (1.0 - dt * e1)).abs() < 1e-15);
        assert!((n.h[1] - (-0.5 + dt * e1)).abs() < 1e-15);
    }

    #[test]
    fn source_is_subtracted_at_h_time() {
        let d = disc(
            build_structured_quad_mesh(2, 1, BBox::new(0.0, 0.0, 2.0, 1.0)).unwrap(),
            1.0,
        );
        let src = SourceTerm::new(vec![(0, 2.0)], |t| t);
        let s = FieldState::zeros(1, 2, 0.2);
        let n = leapfrog_step(&s, 0.2, d.operators(), Some(&src)).unwrap();
        assert!((n.e[0] - (-0.2 * 2.0 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn second_order_free_motion_and_zero() {
        let d = disc(
            build_structured_quad_mesh(3, 3, BBox::unit_square()).unwrap(),
            1.0,
        );
        let z = vec![0.0; d.dofs.num_edge_dofs()];
        assert_eq!(
            second_order_step(&z, &z, 0.1, &d.inv_mass_e, &d.stiffness).unwrap(),
            z
        );
        // a field with K e = 0: discrete gradient of a bump at the centre vertex
        let centre = 5; // vertex (1, 1) of the 3x3 grid
        let e: Vec<f64> = (0..d.dofs.num_edge_dofs())
            .map(|i| {
                let [a, b] = d.mesh.edges()[d.dofs.dof_edge(i)].vertices;
                (b == centre) as u8 as f64 - (a == centre) as u8 as f64
            })
            .collect();
        let prev: Vec<f64> = e.iter().map(|v| 0.5 * v).collect();
        let next = second_order_step(&e, &prev, 0.1, &d.inv_mass_e, &d.stiffness).unwrap();
        for i in 0..e.len() {
            assert!((next[i] - (2.0 * e[i] - prev[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn cfl_on_uniform_grid() {
        let n = 32;
        let h = 1.0 / n as f64;
        let d = disc(
            build_structured_quad_mesh(n, n, BBox::unit_square()).unwrap(),
            1.0,
        );
        let dt = estimate_cfl(&d.inv_mass_e, &d.stiffness).unwrap();
        let want = h / 2f64.sqrt();
        assert!((dt / want - 1.0).abs() < 0.01, "{dt} vs {want}");
        // exact discrete value 8 cos^2(pi / 2n) / h^2
        let lambda = 8.0 * (std::f64::consts::PI / (2.0 * n as f64)).cos().powi(2) / (h * h);
        assert!((dt - 2.0 / lambda.sqrt()).abs() / dt < 1e-4);

        let d4 = disc(
            build_structured_quad_mesh(n, n, BBox::unit_square()).unwrap(),
            4.0,
        );
        let dt4 = estimate_cfl(&d4.inv_mass_e, &d4.stiffness).unwrap();
        assert!((dt4 / dt - 2.0).abs() < 1e-3);
    }

    #[test]
    fn cfl_single_edge() {
        let d = disc(
            build_structured_quad_mesh(2, 1, BBox::new(0.0, 0.0, 2.0, 1.0)).unwrap(),
            1.0,
        );
        let dt = estimate_cfl(&d.inv_mass_e, &d.stiffness).unwrap();
        // lambda = M_eps^-1 K = 1 * 2
        assert!((dt - 2.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let d = disc(
            build_structured_quad_mesh(3, 2, BBox::new(0.0, 0.0, 1.5, 1.0)).unwrap(),
            1.0,
        );
        let ne = d.dofs.num_edge_dofs();
        let zero_h = vec![0.0; 6];
        assert_eq!(
            discrete_energy(
                &vec![0.0; ne],
                &zero_h,
                &zero_h,
                &d.inv_mass_e,
                &d.mass_h,
                1e-14
            )
            .unwrap(),
            0.0
        );
        let c = 0.8;
        let h = vec![c; 6];
        let en = discrete_energy(&vec![0.0; ne], &h, &h, &d.inv_mass_e, &d.mass_h, 1e-14).unwrap();
        assert!((en - 0.5 * c * c * 1.5).abs() < 1e-15);
    }

    #[test]
    fn energy_is_conserved_on_jittered_mesh() {
        let m = jitter_vertices(
            &build_structured_tri_mesh(8, 8, BBox::unit_square()).unwrap(),
            0.25,
            3,
        )
        .unwrap();
        let d = disc(m, 2.0);
        let dt = 0.9 * estimate_cfl(&d.inv_mass_e, &d.stiffness).unwrap();
        let lf = Leapfrog::new(d.operators(), dt).unwrap();
        let mut s = random_state(&d, 8, dt);
        let e0 = state_energy(&lf, &s, &d.inv_mass_e, &d.mass_h, 1e-15).unwrap();
        lf.run(&mut s, 300, 0, |_, _| {}).unwrap();
        let e1 = state_energy(&lf, &s, &d.inv_mass_e, &d.mass_h, 1e-15).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-11, "{e0} {e1}");
    }

    #[test]
    fn reversibility() {
        let m = jitter_vertices(
            &build_structured_tri_mesh(6, 5, BBox::unit_square()).unwrap(),
            0.2,
            5,
        )
        .unwrap();
        let d = disc(m, 1.0);
        let dt = 0.5 * estimate_cfl(&d.inv_mass_e, &d.stiffness).unwrap();
        let fwd = Leapfrog::new(d.operators(), dt).unwrap();
        let bwd = Leapfrog::new(d.operators(), -dt).unwrap();
        let s0 = random_state(&d, 4, dt);
        let mut s = s0.clone();
        fwd.run(&mut s, 100, 0, |_, _| {}).unwrap();
        let mut r = fwd.restagger(&s).unwrap();
        bwd.run(&mut r, 100, 0, |_, _| {}).unwrap();
        let back = bwd.restagger(&r).unwrap();
        let err = back
            .e
            .iter()
            .zip(&s0.e)
            .chain(back.h.iter().zip(&s0.h))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-11, "{err}");
        assert!((back.time_h - s0.time_h).abs() < 1e-12);
    }

    #[test]
    fn blow_up_above_cfl() {
        let d = disc(
            build_structured_quad_mesh(16, 16, BBox::unit_square()).unwrap(),
            1.0,
        );
        let dt = estimate_cfl(&d.inv_mass_e, &d.stiffness).unwrap();
        let mut s = random_state(&d, 2, 1.01 * dt);
        let err = Leapfrog::new(d.operators(), 1.01 * dt)
            .unwrap()
            .run(&mut s, 200, 0, |_, _| {})
            .unwrap_err();
        assert!(matches!(err, Error::BlowUp { step, .. } if step <= 200));
    }

    #[test]
    fn enriched_zero_data_stays_zero() {
        let d = disc(
            build_structured_tri_mesh(3, 3, BBox::unit_square()).unwrap(),
            1.0,
        );
        let s = FieldState::zeros(d.dofs.num_half_dofs(), d.mesh.num_elements(), 0.05);
        let traj = run_enriched(s, 0.05, d.enriched_operators(), 10).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.iter().all(|s| s.amplitude() == 0.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let d = disc(
            build_structured_quad_mesh(2, 2, BBox::unit_square()).unwrap(),
            1.0,
        );
        let s = FieldState::zeros(3, 4, 0.1);
        assert!(matches!(
            leapfrog_step(&s, 0.1, d.operators(), None),
            Err(Error::Shape { .. })
        ));
        assert!(Leapfrog::new(d.operators(), 0.0).is_err());
    }
}
