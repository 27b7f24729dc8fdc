use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cbcflow::mesh::{generate_bifurcation, generate_cylinder_channel_graded, generate_unit_square, load_mesh, save_mesh};
use cbcflow::scenario::{self, RunOptions, PRESET_NAMES};

/// Taylor-Hood Navier-Stokes solver with convective, do-nothing and
/// directional do-nothing outflow conditions.
#[derive(Parser)]
#[command(name = "cbcflow", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a preset or a scenario file.
    Run {
        /// Scenario TOML file.
        config: Option<String>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long, short)]
        out: PathBuf,
        /// Concurrent sweep points; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Override a field, e.g. `--set geometry.n=16` or `--set sweep.nu='["1/10"]'`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Generate, check or describe meshes.
    Mesh {
        #[command(subcommand)]
        cmd: MeshCmd,
    },
    /// Aggregate a finished run into plot-ready tables.
    Report { dir: PathBuf },
    /// List built-in presets.
    List,
    /// Print the TOML of a preset.
    Show { preset: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    UnitSquare,
    Bifurcation,
    Cylinder,
}

#[derive(Subcommand)]
enum MeshCmd {
    /// Write a generated mesh. The size is cells per side for the unit
    /// square and a target edge length otherwise.
    Generate {
        domain: Domain,
        size: f64,
        #[arg(short, long)]
        output: PathBuf,
        /// Far-field edge length of the cylinder channel (default 3 × size).
        #[arg(long)]
        h_far: Option<f64>,
    },
    Validate { file: PathBuf },
    Info { file: PathBuf },
}

enum Failure {
    Config(String),
    Partial(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    let cfg = |e: &dyn std::fmt::Display| Failure::Config(e.to_string());
    match cmd {
        Cmd::Run { config, preset, out, workers, set } => {
            let source = preset.or(config).ok_or_else(|| Failure::Config("give a scenario file or --preset".into()))?;
            let sc = scenario::load_scenario(&source, &set).map_err(|e| cfg(&e))?;
            let m = scenario::run(&sc, &RunOptions { out: out.clone(), workers }).map_err(|e| cfg(&e))?;
            for p in &m.points {
                let extra = p.message.as_deref().map(|s| format!(" ({s})")).unwrap_or_default();
                println!("{:<28} {:?}{extra}", p.id, p.status);
            }
            println!("manifest: {}", out.join("manifest.json").display());
            let bad = m.points.iter().filter(|p| !p.status.is_success()).count();
            if bad > 0 {
                return Err(Failure::Partial(format!("{bad} of {} points did not succeed", m.points.len())));
            }
        }
        Cmd::Mesh { cmd } => mesh(cmd)?,
        Cmd::Report { dir } => {
            let r = scenario::write_report(&dir).map_err(|e| cfg(&e))?;
            for f in &r.files {
                println!("{}", dir.join(f).display());
            }
            println!("{} points, {} unsuccessful", r.points, r.failed);
        }
        Cmd::List => {
            for name in PRESET_NAMES {
                let s = scenario::preset(name).map_err(|e| cfg(&e))?;
                println!("{name:<16} {}", s.description);
            }
        }
        Cmd::Show { preset } => {
            let text = scenario::preset_source(&preset)
                .ok_or_else(|| cfg(&scenario::ScenarioError::UnknownPreset { name: preset.clone() }))?;
            print!("{text}");
        }
    }
    Ok(())
}

fn mesh(cmd: MeshCmd) -> Result<(), Failure> {
    let err = |e: cbcflow::mesh::MeshError| Failure::Config(e.to_string());
    match cmd {
        MeshCmd::Generate { domain, size, output, h_far } => {
            let m = match domain {
                Domain::UnitSquare => {
                    if size.fract() != 0.0 || size < 2.0 {
                        return Err(Failure::Config(format!("unit-square size must be an integer >= 2, got {size}")));
                    }
                    generate_unit_square(size as usize)
                }
                Domain::Bifurcation => generate_bifurcation(size),
                Domain::Cylinder => generate_cylinder_channel_graded(size, h_far.unwrap_or(3.0 * size)),
            }
            .map_err(err)?;
            save_mesh(&m, &output).map_err(err)?;
            println!("{}: {} nodes, {} triangles", output.display(), m.n_nodes(), m.n_triangles());
        }
        MeshCmd::Validate { file } => {
            let m = load_mesh(&file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            println!("{}: ok ({} triangles)", file.display(), m.n_triangles());
        }
        MeshCmd::Info { file } => {
            let m = load_mesh(&file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            let s = m.stats();
            println!("nodes           {}", s.n_nodes);
            println!("triangles       {}", s.n_triangles);
            println!("edges           {}", s.n_edges);
            println!("boundary edges  {} (H {}, N {}, OUT {})", s.n_boundary_edges, s.edges_per_tag[0], s.edges_per_tag[1], s.edges_per_tag[2]);
            println!("area            {:.6}", s.area);
            println!("min angle       {:.3} deg", s.min_angle_deg);
            println!("edge length     {:.4e} .. {:.4e}", s.h_min, s.h_max);
        }
    }
    Ok(())
}
