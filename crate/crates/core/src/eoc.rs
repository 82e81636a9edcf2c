//! Convergence studies on sequences of uniformly refined meshes.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::benchmarks::{error_norms, ErrorNorms, ExactSolution, ZeroSolution};
use crate::config::{ReferenceMode, SimConfig};
use crate::error::{Error, Result};
use crate::mesh::{refine_uniform_with_map, ComposedRefinement, Mesh};
use crate::scenario::{build_mesh, Simulation};
use crate::timestepper::FieldState;

#[derive(Clone, Debug, PartialEq)]
pub struct EocRow {
    pub level: usize,
    /// Largest element diameter.
    pub h: f64,
    /// Edge unknowns plus element unknowns.
    pub dofs: usize,
    pub steps: usize,
    pub dt: f64,
    /// Errors at the end time.
    pub error: ErrorNorms,
    pub eoc_e: Option<f64>,
    pub eoc_h: Option<f64>,
    pub eoc_h_super: Option<f64>,
    /// Largest errors over the snapshot steps (equal to `error` when no
    /// snapshots are configured or a self-reference is used).
    pub max_error: ErrorNorms,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
    /// What the errors are measured against.
    pub reference: String,
    /// Why the table stops early, if it does.
    pub failure: Option<String>,
}

fn rate(prev: f64, cur: f64, h_prev: f64, h_cur: f64) -> Option<f64> {
    (prev > 0.0 && cur > 0.0).then(|| (prev / cur).ln() / (h_prev / h_cur).ln())
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl EocTable {
    fn from_rows(mut rows: Vec<EocRow>, reference: String, failure: Option<String>) -> Self {
        for i in 1..rows.len() {
            let (p, c) = (rows[i - 1].clone(), &mut rows[i]);
            c.eoc_e = rate(p.error.e, c.error.e, p.h, c.h);
            c.eoc_h = rate(p.error.h, c.error.h, p.h, c.h);
            c.eoc_h_super = rate(p.error.h_super, c.error.h_super, p.h, c.h);
        }
        EocTable {
            rows,
            reference,
            failure,
        }
    }

    pub fn last(&self) -> Option<&EocRow> {
        self.rows.last()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "reference: {}", self.reference).unwrap();
        writeln!(
            s,
            "{:>5} {:>10} {:>8} {:>6} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6}",
            "level", "h", "dofs", "steps", "err_E", "eoc", "err_H", "eoc", "err_H_sup", "eoc"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:>5} {:>10.4e} {:>8} {:>6} {:>12.4e} {:>6} {:>12.4e} {:>6} {:>12.4e} {:>6}",
                r.level,
                r.h,
                r.dofs,
                r.steps,
                r.error.e,
                fmt_rate(r.eoc_e),
                r.error.h,
                fmt_rate(r.eoc_h),
                r.error.h_super,
                fmt_rate(r.eoc_h_super)
            )
            .unwrap();
        }
        if let Some(f) = &self.failure {
            writeln!(s, "stopped: {f}").unwrap();
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,h,dofs,steps,dt,err_e,eoc_e,err_h,eoc_h,err_h_super,eoc_h_super,max_err_e,max_err_h,max_err_h_super\n",
        );
        let opt = |r: Option<f64>| r.map_or_else(String::new, |v| format!("{v:.16e}"));
        for r in &self.rows {
            writeln!(
                s,
                "{},{:.16e},{},{},{:.16e},{:.16e},{},{:.16e},{},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                r.level,
                r.h,
                r.dofs,
                r.steps,
                r.dt,
                r.error.e,
                opt(r.eoc_e),
                r.error.h,
                opt(r.eoc_h),
                r.error.h_super,
                opt(r.eoc_h_super),
                r.max_error.e,
                r.max_error.h,
                r.max_error.h_super
            )
            .unwrap();
        }
        s
    }
}

fn max_norms(a: ErrorNorms, b: ErrorNorms) -> ErrorNorms {
    ErrorNorms {
        e: a.e.max(b.e),
        h: a.h.max(b.h),
        h_super: a.h_super.max(b.h_super),
    }
}

struct LevelRun {
    row: EocRow,
    /// `e` at the end time and `h` averaged onto the end time.
    e: Vec<f64>,
    h: Vec<f64>,
    mesh: Mesh,
    dofs: crate::assembly::DofMap,
}

fn run_level(cfg: &SimConfig, level: usize, mesh: Mesh, exact: bool) -> Result<LevelRun> {
    let sim = Simulation::with_mesh(cfg, mesh)?;
    let sol: Option<&dyn ExactSolution> = if exact {
        sim.exact.as_ref().map(|c| c as &dyn ExactSolution)
    } else {
        None
    };
    let (mesh, dofs) = (&sim.disc.mesh, &sim.disc.dofs);
    let mut max_error = ErrorNorms::default();
    let state: FieldState = sim.run(|_, s| {
        if let Some(sol) = sol {
            max_error = max_norms(max_error, error_norms(s, sol, mesh, dofs)?);
        }
        Ok(())
    })?;
    let error = match sol {
        Some(sol) => error_norms(&state, sol, mesh, dofs)?,
        None => ErrorNorms::default(),
    };
    let prev = sim.integrator()?.previous_h(&state)?;
    let h_mid = prev
        .iter()
        .zip(&state.h)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Ok(LevelRun {
        row: EocRow {
            level,
            h: mesh.mesh_size(),
            dofs: dofs.num_edge_dofs() + mesh.num_elements(),
            steps: sim.steps,
            dt: sim.dt,
            error,
            eoc_e: None,
            eoc_h: None,
            eoc_h_super: None,
            max_error: max_norms(max_error, error),
        },
        e: state.e,
        h: h_mid,
        mesh: mesh.clone(),
        dofs: dofs.clone(),
    })
}

/// Runs the configured problem on `levels` meshes, each a uniform
/// refinement of the previous one, and tabulates errors and observed
/// orders.
///
/// With an exact solution, `E` is compared at the end time and `H` at its
/// staggered time. Otherwise a reference is computed `extra_levels`
/// refinements below the finest level and restricted to every coarse mesh:
/// edge circulations are summed over child edges and `h` is area-averaged
/// over child elements, both taken at the end time. In that mode `err_H`
/// and `err_H_sup` coincide.
///
/// A level that fails (for instance by blowing up) ends the table; the
/// reason is kept in [`EocTable::failure`].
pub fn convergence_study(cfg: &SimConfig, levels: usize) -> Result<EocTable> {
    if levels < 3 {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let base = build_mesh(cfg)?;
    let exact = match cfg.reference.mode {
        ReferenceMode::Exact => {
            if cfg.initial.kind == crate::config::InitialKind::Zero {
                return Err(Error::Config(
                    "reference.mode = \"exact\" needs initial data with an exact solution".into(),
                ));
            }
            true
        }
        ReferenceMode::Auto => cfg.initial.kind != crate::config::InitialKind::Zero,
        ReferenceMode::SelfReference => false,
    };
    let extra = if exact {
        0
    } else {
        cfg.reference.extra_levels.max(1)
    };

    let mut meshes = vec![base];
    let mut maps = Vec::new();
    for _ in 1..levels + extra {
        let (fine, map) = refine_uniform_with_map(meshes.last().unwrap())?;
        meshes.push(fine);
        maps.push(map);
    }
    let reference_mesh = (!exact).then(|| meshes.pop().unwrap());
    let coarse: Vec<Mesh> = meshes.drain(..levels).collect();

    let results: Vec<Result<LevelRun>> = coarse
        .into_par_iter()
        .enumerate()
        .map(|(l, m)| run_level(cfg, l, m, exact))
        .collect();

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut failure = None;
    for (l, r) in results.into_iter().enumerate() {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                failure = Some(format!("level {l}: {e}"));
                break;
            }
        }
    }

    let description = if exact {
        let m = &cfg.initial;
        format!("exact cavity mode ({}, {}), L2 at end time", m.m, m.n)
    } else {
        format!("self-reference {extra} refinement(s) below the finest level, L2 at end time")
    };

    match reference_mesh {
        None => rows.extend(runs.into_iter().map(|r| r.row)),
        Some(ref_mesh) => {
            let reference = run_level(cfg, levels + extra - 1, ref_mesh, false)?;
            for mut run in runs {
                let l = run.row.level;
                let mut map = ComposedRefinement::identity(&run.mesh);
                for m in &maps[l..] {
                    map = map.then(m);
                }
                let e_ref = restrict_edges(&map, &run.dofs, &reference);
                let h_ref = restrict_elements(&map, &run.mesh, &reference.mesh, &reference.h);
                let diff = FieldState {
                    e: run.e.iter().zip(&e_ref).map(|(a, b)| a - b).collect(),
                    h: run.h.iter().zip(&h_ref).map(|(a, b)| a - b).collect(),
                    time_e: 0.0,
                    time_h: 0.0,
                };
                run.row.error = error_norms(&diff, &ZeroSolution, &run.mesh, &run.dofs)?;
                run.row.max_error = run.row.error;
                rows.push(run.row);
            }
        }
    }
    Ok(EocTable::from_rows(rows, description, failure))
}

fn restrict_edges(
    map: &ComposedRefinement,
    coarse: &crate::assembly::DofMap,
    fine: &LevelRun,
) -> Vec<f64> {
    (0..coarse.num_edge_dofs())
        .map(|i| {
            map.edge_children[coarse.dof_edge(i)]
                .iter()
                .map(|&(child, sign)| {
                    let dof = fine
                        .dofs
                        .edge_dof(child)
                        .expect("children of interior edges are interior");
                    sign * fine.e[dof]
                })
                .sum()
        })
        .collect()
}

fn restrict_elements(map: &ComposedRefinement, coarse: &Mesh, fine: &Mesh, h: &[f64]) -> Vec<f64> {
    (0..coarse.num_elements())
        .map(|t| {
            let s: f64 = map.element_children[t]
                .iter()
                .map(|&c| fine.element_area(c) * h[c])
                .sum();
            s / coarse.element_area(t)
        })
        .collect()
}
