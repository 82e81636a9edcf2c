use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use maxlump_core::benchmarks::error_norms;
use maxlump_core::config::SimConfig;
use maxlump_core::eoc::convergence_study;
use maxlump_core::mesh::{
    build_structured_quad_mesh, build_structured_tri_mesh, describe, jitter_vertices, read_mesh,
    refine_uniform, write_mesh, BBox, Mesh,
};
use maxlump_core::reference_basis::dump_tables;
use maxlump_core::scenario::{build_materials, build_mesh, scattering_fixture_mesh, Simulation};
use maxlump_core::snapshot::write_snapshot_files;
use maxlump_core::timestepper::state_energy;
use maxlump_core::yee::{yee_difference, YEE_SEED};
use maxlump_core::{Discretization, MaterialField};

type CliResult<T = ()> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "maxlump",
    version,
    about = "Mass-lumped edge elements for 2D TE Maxwell problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect meshes.
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
    /// Write one assembled matrix in coordinate format.
    Assemble {
        #[arg(long, value_enum)]
        matrix: MatrixName,
        /// Mesh file (materials eps = mu = 1).
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        mesh: Option<PathBuf>,
        /// Simulation config providing mesh and materials.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a simulation config, writing snapshots to its output directory.
    Run { config: PathBuf },
    /// Convergence study over uniformly refined meshes.
    Converge {
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// CSV destination; defaults to `eoc.csv` in the config's output directory.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare the finite element leapfrog with a staggered-grid finite
    /// difference run on a uniform grid of the unit square.
    YeeCheck {
        #[arg(long, default_value_t = 8)]
        nx: usize,
        #[arg(long, default_value_t = 8)]
        ny: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = YEE_SEED)]
        seed: u64,
        /// Multiply eps on one element, as `ELEMENT:FACTOR` (negative control).
        #[arg(long, value_parser = parse_perturbation)]
        perturb: Option<(usize, f64)>,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Print the reference basis tables.
    DumpBasis,
}

#[derive(Subcommand)]
enum MeshAction {
    /// Structured meshes and the scattering fixture.
    Gen {
        #[arg(long, value_enum, default_value_t = MeshKind::Quad)]
        kind: MeshKind,
        #[arg(long, default_value_t = 8)]
        nx: usize,
        #[arg(long, default_value_t = 8)]
        ny: usize,
        /// `xmin,ymin,xmax,ymax`
        #[arg(long, value_parser = parse_bbox, default_value = "0,0,1,1")]
        bbox: BBox,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        refine: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Summarize a mesh file.
    Info { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshKind {
    Quad,
    Tri,
    /// Square with a disk-shaped hole and two material regions (uses `nx`).
    Scatter,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixName {
    MassH,
    MassHInv,
    LumpedMassE,
    LumpedMassEInv,
    CurlTilde,
    Curl,
    Projection,
    InvMassE,
    Stiffness,
}

fn parse_bbox(s: &str) -> Result<BBox, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x0, y0, x1, y1] if x1 > x0 && y1 > y0 => Ok(BBox::new(x0, y0, x1, y1)),
        _ => Err("expected xmin,ymin,xmax,ymax with xmin < xmax and ymin < ymax".into()),
    }
}

fn parse_perturbation(s: &str) -> Result<(usize, f64), String> {
    let (t, f) = s.split_once(':').ok_or("expected ELEMENT:FACTOR")?;
    Ok((
        t.parse().map_err(|e| format!("{t}: {e}"))?,
        f.parse().map_err(|e| format!("{f}: {e}"))?,
    ))
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_mesh(path: &Path) -> CliResult<Mesh> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(read_mesh(BufReader::new(f))?)
}

fn mesh_gen(
    kind: MeshKind,
    nx: usize,
    ny: usize,
    bbox: BBox,
    jitter: f64,
    seed: u64,
    refine: usize,
) -> CliResult<Mesh> {
    let mut mesh = match kind {
        MeshKind::Quad => build_structured_quad_mesh(nx, ny, bbox)?,
        MeshKind::Tri => build_structured_tri_mesh(nx, ny, bbox)?,
        MeshKind::Scatter => scattering_fixture_mesh(nx)?,
    };
    if jitter > 0.0 {
        mesh = jitter_vertices(&mesh, jitter, seed)?;
    }
    for _ in 0..refine {
        mesh = refine_uniform(&mesh)?;
    }
    Ok(mesh)
}

fn assemble(
    matrix: MatrixName,
    mesh: Option<PathBuf>,
    config: Option<PathBuf>,
    output: Option<PathBuf>,
) -> CliResult {
    let disc = match (mesh, config) {
        (Some(p), _) => {
            let mesh = load_mesh(&p)?;
            let n = mesh.num_elements();
            Discretization::assemble(mesh, MaterialField::uniform(n, 1.0, 1.0)?)?
        }
        (None, Some(c)) => {
            let cfg = SimConfig::load(&c)?;
            let mesh = build_mesh(&cfg)?;
            let materials = build_materials(&cfg, &mesh)?;
            Discretization::assemble(mesh, materials)?
        }
        (None, None) => return Err("give --mesh or --config".into()),
    };
    let m = match matrix {
        MatrixName::MassH => disc.mass_h.to_csr(),
        MatrixName::MassHInv => disc.mass_h_inv.to_csr(),
        MatrixName::LumpedMassE => disc.lumped_mass_e.to_csr(),
        MatrixName::LumpedMassEInv => disc.lumped_mass_e_inv.to_csr(),
        MatrixName::CurlTilde => disc.curl_tilde,
        MatrixName::Curl => disc.curl,
        MatrixName::Projection => disc.projection,
        MatrixName::InvMassE => disc.inv_mass_e,
        MatrixName::Stiffness => disc.stiffness,
    };
    let mut out = open_output(&output)?;
    m.write_coo(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run(config: &Path) -> CliResult {
    let cfg = SimConfig::load(config)?;
    let sim = Simulation::from_config(&cfg)?;
    let disc = &sim.disc;
    println!("{}: {}", cfg.name, describe(&disc.mesh));
    match sim.cfl_limit {
        Some(limit) => println!(
            "dt = {:.6e} ({} steps, stability limit {:.6e})",
            sim.dt, sim.steps, limit
        ),
        None => println!("dt = {:.6e} ({} steps)", sim.dt, sim.steps),
    }
    let out_dir = cfg.output_dir();
    if let Some(d) = &out_dir {
        std::fs::create_dir_all(d)?;
    }
    let lf = sim.integrator()?;
    let energy0 = state_energy(&lf, &sim.initial, &disc.inv_mass_e, &disc.mass_h, 1e-14)?;
    let mut written = 0usize;
    let last = sim.run(|n, s| {
        if let Some(d) = &out_dir {
            write_snapshot_files(d, s, n, &disc.mesh, &disc.dofs)?;
            written += 1;
        }
        Ok(())
    })?;
    let energy1 = state_energy(&lf, &last, &disc.inv_mass_e, &disc.mass_h, 1e-14)?;
    println!("energy: initial {energy0:.12e}, final {energy1:.12e}");
    if let Some(exact) = &sim.exact {
        let e = error_norms(&last, exact, &disc.mesh, &disc.dofs)?;
        println!(
            "errors at t = {:.6}: E {:.6e}, H {:.6e}, H (projected) {:.6e}",
            last.time_e, e.e, e.h, e.h_super
        );
    }
    if let Some(d) = &out_dir {
        println!("{written} snapshot(s) written to {}", d.display());
    }
    Ok(())
}

fn converge(config: &Path, levels: usize, csv: Option<PathBuf>) -> CliResult {
    let cfg = SimConfig::load(config)?;
    let table = convergence_study(&cfg, levels)?;
    print!("{}", table.to_text());
    let csv = csv.or_else(|| cfg.output_dir().map(|d| d.join("eoc.csv")));
    if let Some(p) = csv {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&p, table.to_csv())?;
        println!("csv written to {}", p.display());
    }
    if table.failure.is_some() {
        return Err("convergence study stopped early".into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: CliResult = match cli.command {
        Command::Mesh { action } => match action {
            MeshAction::Gen {
                kind,
                nx,
                ny,
                bbox,
                jitter,
                seed,
                refine,
                output,
            } => mesh_gen(kind, nx, ny, bbox, jitter, seed, refine).and_then(|m| {
                let mut out = open_output(&output)?;
                write_mesh(&m, &mut out)?;
                out.flush()?;
                Ok(())
            }),
            MeshAction::Info { file } => load_mesh(&file).map(|m| println!("{}", describe(&m))),
        },
        Command::Assemble {
            matrix,
            mesh,
            config,
            output,
        } => assemble(matrix, mesh, config, output),
        Command::Run { config } => run(&config),
        Command::Converge { config, levels, csv } => converge(&config, levels, csv),
        Command::YeeCheck {
            nx,
            ny,
            steps,
            seed,
            perturb,
            tolerance,
        } => yee_difference(nx, ny, steps, seed, perturb)
            .map_err(Into::into)
            .and_then(|d| {
                let verdict = if d < tolerance { "PASS" } else { "FAIL" };
                println!("max |FEM - FD| over {steps} steps on {nx}x{ny}: {d:.3e} ({verdict}, tolerance {tolerance:.0e})");
                if d < tolerance {
                    Ok(())
                } else {
                    Err("trajectories differ".into())
                }
            }),
        Command::DumpBasis => {
            print!("{}", dump_tables());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
