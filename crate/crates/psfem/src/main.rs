//! Command-line driver: convergence ladders, mesh inspection and built-in
//! consistency checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector2;

use psfem::bench::{example_mesh, run_ladder, ManufacturedProblem};
use psfem::mesh::{ladder_alpha_fit, quality_report};
use psfem::quadrature::gauss_rule;
use psfem::solver::{solve, DirichletData};
use psfem::{Material, QuadMesh};

#[derive(Parser)]
#[command(
    name = "psfem",
    about = "Plane-strain hybrid stress FEM with superconvergent recovery estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a refinement ladder on a benchmark example and print the table.
    Run {
        /// Benchmark example: 1 (unit square) or 2 (slender strip).
        #[arg(long)]
        example: usize,
        /// Poisson ratio, in (0, 0.5).
        #[arg(long)]
        nu: f64,
        /// Number of ladder levels (at least 2).
        #[arg(long)]
        levels: usize,
        /// One-dimensional Gauss order used for all element integrals.
        #[arg(long, default_value_t = 4)]
        gauss_n: usize,
        /// Young modulus.
        #[arg(long = "E", default_value_t = 1500.0)]
        young: f64,
        /// Write the table to this file as well.
        #[arg(long)]
        out: Option<PathBuf>,
        /// File format for --out.
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
    },
    /// Print size and quality measures of a mesh.
    MeshInfo {
        /// Mesh file in the plain-text quadmesh format.
        #[arg(required_unless_present = "example", conflicts_with = "example")]
        file: Option<PathBuf>,
        /// Use a built-in example mesh instead of a file.
        #[arg(long)]
        example: Option<usize>,
        /// Bisect this many times before reporting.
        #[arg(long, default_value_t = 0)]
        refine: usize,
    },
    /// Run the manufactured-solution self-checks and the patch test.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", serde_json::json!({ "error": err.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> psfem::Result<()> {
    match command {
        Command::Run {
            example,
            nu,
            levels,
            gauss_n,
            young,
            out,
            format,
        } => {
            let material = Material::new(young, nu)?;
            let problem = ManufacturedProblem::example(example, material)?;
            let rule = gauss_rule(gauss_n)?;
            let table = run_ladder(&problem, levels, &rule)?;
            print!("{table}");
            if let Some(path) = out {
                let contents = match format {
                    OutFormat::Csv => table.to_csv(),
                    OutFormat::Json => table.to_json(),
                };
                std::fs::write(&path, contents)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::MeshInfo {
            file,
            example,
            refine,
        } => {
            let mut mesh = match (file, example) {
                (Some(path), None) => QuadMesh::parse(&std::fs::read_to_string(path)?)?,
                (None, Some(which)) => example_mesh(which)?,
                _ => unreachable!("clap enforces exactly one mesh source"),
            };
            let mut ladder = vec![mesh.clone()];
            for _ in 0..refine {
                mesh = mesh.refine_bisection()?;
                ladder.push(mesh.clone());
            }
            let mut report = quality_report(&mesh);
            report.alpha_fit = ladder_alpha_fit(&ladder);
            println!(
                "vertices: {}  elements: {}  interior vertices: {}  h_max: {}",
                mesh.n_vertices(),
                mesh.n_elements(),
                mesh.interior_vertices().count(),
                mesh.h_max()
            );
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
        Command::Verify => verify(),
    }
}

/// Manufactured-solution self-checks for both examples across the Poisson
/// ratios the benchmarks use, then the linear patch test.
fn verify() -> psfem::Result<()> {
    for nu in [0.3, 0.49, 0.4999] {
        let material = Material::new(1500.0, nu)?;
        for which in [1, 2] {
            let problem = ManufacturedProblem::example(which, material)?;
            problem.self_check(100)?;
            println!("ok: example {which} fields consistent at nu = {nu}");
        }
    }

    let mesh = example_mesh(1)?.refine_bisection()?;
    let material = Material::new(1500.0, 0.3)?;
    let rule = gauss_rule(4)?;
    let exact = |x: f64, y: f64| Vector2::new((x + 2.0 * y) / 10.0, (3.0 * x - y) / 10.0);
    let sol = solve(
        &mesh,
        &material,
        &|_, _| Vector2::zeros(),
        &DirichletData::new(exact),
        &rule,
    )?;
    let mut max_dev: f64 = 0.0;
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        max_dev = max_dev.max((sol.vertex_displacement(v) - exact(p.x, p.y)).amax());
    }
    println!("patch test displacement residual: {max_dev:.3e}");
    if max_dev > 1e-9 {
        return Err(psfem::Error::SelfCheck(format!(
            "patch test residual {max_dev:.3e} exceeds 1e-9"
        )));
    }
    println!("ok: patch test reproduces linear displacements");
    Ok(())
}
